//! Cross-module invariant checks exercised through the public API.

use cantordyn::bratteli::zoo::{dyadic_odometer, fat_odometer, fibonacci};
use cantordyn::bratteli::{Cell, ClopenSet};
use cantordyn::conjsynth::{self, Synthesis};
use cantordyn::extension::{self, ext_index};
use cantordyn::fullgroup::{self, FullGroupElement};
use cantordyn::kzero::{self, K0Element, ModCellFunction, Tri};

const BOUND: usize = 14;

fn lcg(seed: &mut u64) -> u64 {
    *seed = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    *seed >> 33
}

#[test]
fn class_equality_is_a_congruence() {
    // Compatible with addition of representatives, invariant under
    // push-forward of either argument.
    let d = fibonacci();
    let mut seed = 404u64;
    for _ in 0..20 {
        let mk = |seed: &mut u64| K0Element {
            level: 1,
            vector: vec![(lcg(seed) % 7) as i128 - 3, (lcg(seed) % 7) as i128 - 3],
        };
        let a = mk(&mut seed);
        let b = mk(&mut seed);
        let c = mk(&mut seed);
        let eq_ab = kzero::classes_equal(&d, &a, &b, BOUND).unwrap().is_yes();
        // push one side deeper: same answer
        let a_pushed = kzero::push_forward(&d, &a, 3).unwrap();
        assert_eq!(
            kzero::classes_equal(&d, &a_pushed, &b, BOUND).unwrap().is_yes(),
            eq_ab
        );
        // add c to both sides: equality preserved
        let add = |x: &K0Element, y: &K0Element| K0Element {
            level: x.level,
            vector: x.vector.iter().zip(&y.vector).map(|(p, q)| p + q).collect(),
        };
        assert_eq!(
            kzero::classes_equal(&d, &add(&a, &c), &add(&b, &c), BOUND).unwrap().is_yes(),
            eq_ab
        );
    }
}

#[test]
fn synthesis_success_implies_spectrum_containment() {
    // Whenever the pipeline succeeds at a level, every p certified in the
    // target spectrum must be certified in the source spectrum.
    let pairs = [
        (dyadic_odometer(), fibonacci()),
        (dyadic_odometer(), dyadic_odometer()),
        (fat_odometer(), fibonacci()),
        (fat_odometer(), dyadic_odometer()),
    ];
    for (x, y) in pairs {
        for level in [2usize, 3] {
            let syn = conjsynth::synthesize_conjugator(&x, &y, level, BOUND).unwrap();
            if let Synthesis::Synthesized(map) = syn {
                let rep = conjsynth::verify_approx_conjugacy(&x, &y, &map, 8).unwrap();
                assert!(rep.all_pass());
                for p in 1..=8u64 {
                    let in_y = kzero::spectrum_membership(&y, p, BOUND).unwrap();
                    if in_y.is_yes() {
                        assert!(
                            kzero::spectrum_membership(&x, p, BOUND).unwrap().is_yes(),
                            "p = {p} in PS(target) but synthesis succeeded without it in PS(source)"
                        );
                    }
                }
            }
        }
    }
}

#[test]
fn full_group_associativity_spot_check() {
    let d = fibonacci();
    let mut seed = 777u64;
    let random_el = |seed: &mut u64| -> FullGroupElement {
        let heights = d.heights(3).unwrap();
        let perms: Vec<Vec<u64>> = heights
            .iter()
            .map(|&h| {
                let mut p: Vec<u64> = (1..=h).collect();
                for i in (1..p.len()).rev() {
                    let j = (lcg(seed) % (i as u64 + 1)) as usize;
                    p.swap(i, j);
                }
                p
            })
            .collect();
        FullGroupElement::from_tower_permutations(&d, 3, &perms).unwrap()
    };
    for _ in 0..5 {
        let (g, h, k) = (random_el(&mut seed), random_el(&mut seed), random_el(&mut seed));
        let left = fullgroup::compose(&d, &fullgroup::compose(&d, &g, &h, 8).unwrap(), &k, 8).unwrap();
        let right = fullgroup::compose(&d, &g, &fullgroup::compose(&d, &h, &k, 8).unwrap(), 8).unwrap();
        // Same map: compare actions on every cell of the deeper level.
        let level = left.level.max(right.level);
        let part = d.kr_partition(level, false).unwrap();
        for cell in part.cells() {
            let s = ClopenSet::single(level, cell);
            let li = fullgroup::apply(&d, &left, &s, 8).unwrap();
            let ri = fullgroup::apply(&d, &right, &s, 8).unwrap();
            assert!(li.same_set(&d, &ri).unwrap(), "associativity at {cell:?}");
        }
    }
}

#[test]
fn pi_star_injective_on_tested_classes() {
    // Distinct base classes push to distinct extension classes: the
    // difference of their embedded vectors never falls into the relation
    // lattice of the augmented presentation.
    let d = fat_odometer();
    let mut c = ModCellFunction::constant(&d, 1, 0, 2).unwrap();
    c.values[0][0] = 1;
    let sys = extension::build_extension(&d, &c, BOUND).unwrap();
    let a = K0Element { level: 1, vector: vec![1, 0] };
    let b = K0Element { level: 1, vector: vec![0, 1] };
    assert!(kzero::classes_equal(&d, &a, &b, BOUND).unwrap().is_no());
    for level in 2..=5usize {
        let m = sys.modulus;
        let towers = d.heights(level).unwrap().len();
        let av = kzero::push_forward(&d, &a, level).unwrap();
        let bv = kzero::push_forward(&d, &b, level).unwrap();
        // pi* of a base vector spreads it over the fibers.
        let mut diff = vec![0i128; towers * m as usize];
        for v in 0..towers {
            for j in 0..m {
                diff[ext_index(v, j, m)] = av.vector[v] - bv.vector[v];
            }
        }
        let relations = extension::roof_relation_columns(&sys, 1, level, 8).unwrap();
        let rows = diff.len();
        let mut mat = cantordyn::intlin::IMat::zero(rows, relations.len());
        for (j, col) in relations.iter().enumerate() {
            for i in 0..rows {
                mat[(i, j)] = col[i];
            }
        }
        let sol = cantordyn::intlin::solve(&mat, &diff).unwrap();
        assert!(sol.is_none(), "pi* images merged at level {level}");
    }
}

#[test]
fn exchange_elements_have_bounded_powers() {
    // |n(x)| stays within the certificate level's maximal height.
    let d = fibonacci();
    let u = ClopenSet::single(3, Cell { tower: 0, floor: 2 });
    let v = ClopenSet::single(3, Cell { tower: 0, floor: 3 });
    let ex = fullgroup::hopf_exchange(&d, &u, &v, BOUND).unwrap();
    let max_h = d.heights(ex.certificate_level).unwrap().into_iter().max().unwrap() as i64;
    assert!(ex.element.max_abs_power() <= max_h);
}

#[test]
fn finite_depth_semi_decisions_return_unknown() {
    // A non-stationary diagram decides nothing past its materialized depth.
    use cantordyn::bratteli::{EdgeLevel, OrderedBratteliDiagram, RawEdge};
    let level = EdgeLevel::from_edges(
        1,
        1,
        &[RawEdge { source: 0, range: 0, rank: 1 }, RawEdge { source: 0, range: 0, rank: 2 }],
    )
    .unwrap();
    let d = OrderedBratteliDiagram::new(vec![level.clone(), level.clone(), level], None).unwrap();
    let unit = kzero::order_unit(&d, 0).unwrap();
    // 16 does not divide any materialized height (max is 8): unknown.
    let ans = kzero::divisible_by(&d, &unit, 16, BOUND).unwrap();
    assert!(matches!(ans, Tri::Unknown { .. }), "{}", ans.verdict_str());
    // 4 divides the level-2 height: decided yes within depth.
    assert!(kzero::divisible_by(&d, &unit, 4, BOUND).unwrap().is_yes());
}

#[test]
fn theorems_refuse_uncertified_diagrams() {
    // A reducible (block) diagram has no strict-positivity window; the
    // synthesis pipeline must refuse it rather than compute on it.
    use cantordyn::bratteli::{EdgeLevel, OrderedBratteliDiagram, RawEdge};
    let first = EdgeLevel::from_edges(
        1,
        2,
        &[RawEdge { source: 0, range: 0, rank: 1 }, RawEdge { source: 0, range: 1, rank: 1 }],
    )
    .unwrap();
    let pattern = EdgeLevel::from_edges(
        2,
        2,
        &[
            RawEdge { source: 0, range: 0, rank: 1 },
            RawEdge { source: 0, range: 0, rank: 2 },
            RawEdge { source: 1, range: 1, rank: 1 },
            RawEdge { source: 1, range: 1, rank: 2 },
        ],
    )
    .unwrap();
    let block = OrderedBratteliDiagram::stationary(first, pattern).unwrap();
    let err = conjsynth::synthesize_conjugator(&block, &dyadic_odometer(), 2, BOUND).unwrap_err();
    assert!(err.to_string().contains("minimality"), "{err}");
}

#[test]
fn key_conjugator_on_two_tower_diagram() {
    // Prescribe beta = alpha^2 on the level-3 partition of the two-tower
    // system: the per-tower Eulerian reordering must exist and verify.
    use cantordyn::bratteli::vershik_action;
    let d = fibonacci();
    let members: Vec<ClopenSet> = d
        .kr_partition(3, false)
        .unwrap()
        .cells()
        .map(|c| ClopenSet::single(3, c))
        .collect();
    let images: Vec<ClopenSet> =
        members.iter().map(|u| vershik_action(&d, u, 2, 8).unwrap()).collect();
    let pc = fullgroup::partition_conjugator(&d, &members, &images, BOUND).unwrap();
    fullgroup::verify_partition_conjugation(&d, &pc.sigma, &members, &images).unwrap();
    assert!(fullgroup::is_bijection(&d, &pc.sigma, 8).unwrap());
}
