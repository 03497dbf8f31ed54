//! Constructive synthesis of approximate conjugators between two Cantor
//! minimal systems from periodic-spectrum data.
//!
//! Given a target clopen partition of `Y`, the pipeline picks a tower
//! partition `Q` of `Y` whose lumped version refines the target, certifies
//! that the gcd `p` of the `Q`-heights lies in the periodic spectrum of the
//! `X` system, finds a tower partition `P` of `X` whose heights are
//! multiples of `p` past the numerical-semigroup threshold, decomposes each
//! `P`-height as a sum of `Q`-heights, divides the `Q`-towers accordingly
//! and packs the copies end-to-end into the `P`-towers. The resulting cell
//! bijection transports the Vershik map of `X` onto that of `Y` exactly on
//! every member of the lumped partition, and the verifier re-checks that
//! identity cell by cell with no tolerance.

use crate::bratteli::{vershik_action, Cell, ClopenSet, OrderedBratteliDiagram, DEFAULT_REFINE_BUDGET};
use crate::error::Error;
use crate::kzero::{self, ModCycleCert, Tri};
use crate::Result;
use serde::{Deserialize, Serialize};

// ---------------------------------------------------------------------------
// Numerical semigroup machinery
// ---------------------------------------------------------------------------

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

pub fn gcd_of(heights: &[u64]) -> u64 {
    heights.iter().copied().fold(0, gcd)
}

/// Minimal `N` such that every multiple `p*n` with `n >= N` is a
/// non-negative integer combination of the heights, where `p` must beless
/// the gcd of the heights. Computed from the Frobenius number of the scaled
/// generators via shortest distances on the residues modulo the smallest
/// generator.
pub fn semigroup_threshold(heights: &[u64], p: u64) -> Result<u64> {
    if heights.is_empty() {
        return Err(Error::contract("semigroup_threshold: empty height list"));
    }
    if heights.contains(&0) {
        return Err(Error::contract("semigroup_threshold: zero height"));
    }
    let g = gcd_of(heights);
    if p != g {
        return Err(Error::contract(format!(
            "semigroup_threshold: p = {p} is not the gcd {g} of the heights"
        )));
    }
    let m: Vec<u64> = heights.iter().map(|&h| h / p).collect();
    if m.contains(&1) {
        return Ok(1);
    }
    let m0 = *m.iter().min().unwrap();
    // Apery-style relaxation: minimal representable value in each residue
    // class mod m0.
    let mut dist: Vec<Option<u64>> = vec![None; m0 as usize];
    dist[0] = Some(0);
    let mut changed = true;
    while changed {
        changed = false;
        for r in 0..m0 as usize {
            let Some(base) = dist[r] else { continue };
            for &mi in &m {
                let val = base + mi;
                let nr = (val % m0) as usize;
                if dist[nr].is_none_or(|old| val < old) {
                    dist[nr] = Some(val);
                    changed = true;
                }
            }
        }
    }
    let mut frobenius: i128 = -1;
    for (r, dr) in dist.iter().enumerate() {
        let dr = dr.ok_or_else(|| {
            Error::contract(format!("residue {r} unreachable; gcd was not 1 after scaling"))
        })?;
        if dr >= m0 {
            frobenius = frobenius.max(dr as i128 - m0 as i128);
        }
    }
    Ok(if frobenius < 1 { 1 } else { frobenius as u64 + 1 })
}

/// Exact decomposition `h = sum_w a_w * heights[w]`, deterministic:
/// maximize the count of the tallest tower first, then the next tallest.
/// Fails explicitly when `h` is not representable.
pub fn height_decomposition(h: u64, heights: &[u64]) -> Result<Vec<u64>> {
    if heights.is_empty() {
        return Err(Error::contract("height_decomposition: empty height list"));
    }
    // Process towers tallest first (ties by lower index).
    let mut order: Vec<usize> = (0..heights.len()).collect();
    order.sort_by_key(|&i| (std::cmp::Reverse(heights[i]), i));
    // reach[i][s]: s representable using towers order[i..].
    let hs = h as usize;
    let k = heights.len();
    let mut reach = vec![vec![false; hs + 1]; k + 1];
    reach[k][0] = true;
    for i in (0..k).rev() {
        let hi = heights[order[i]] as usize;
        for s in 0..=hs {
            // either skip this tower or use one copy and stay at level i
            reach[i][s] = reach[i + 1][s] || (s >= hi && reach[i][s - hi]);
        }
    }
    if !reach[0][hs] {
        return Err(Error::contract(format!(
            "height {h} is not representable by heights {heights:?}"
        )));
    }
    let mut a = vec![0u64; k];
    let mut rem = hs;
    for i in 0..k {
        let hi = heights[order[i]] as usize;
        let mut count = 0u64;
        // Greedily take as many copies as leave a representable remainder
        // for the strictly later towers.
        let mut best: Option<u64> = None;
        let mut c = rem / hi;
        loop {
            let left = rem - c * hi;
            if reach[i + 1][left] {
                best = Some(c as u64);
                break;
            }
            if c == 0 {
                break;
            }
            c -= 1;
        }
        match best {
            Some(cnt) => {
                count = cnt;
                rem -= cnt as usize * hi;
            }
            None => {
                let _ = count;
                return Err(Error::contract("decomposition backtrack failed (internal)"));
            }
        }
        a[order[i]] = count;
    }
    debug_assert_eq!(
        a.iter().zip(heights).map(|(&c, &hh)| c * hh).sum::<u64>(),
        h,
        "decomposition does not sum"
    );
    Ok(a)
}

// ---------------------------------------------------------------------------
// Tower matching plans
// ---------------------------------------------------------------------------

/// One segment of a `P`-tower: a full copy of a `Q`-tower packed at `offset`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlanSegment {
    pub q_tower: usize,
    /// Which copy of the divided `Q`-tower this segment is (0-based, global
    /// per `q_tower`).
    pub copy: usize,
    pub offset: u64,
}

/// A consecutive-preserving bijection between the cells of the divided `Q`
/// partition and the cells of `P`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchingPlan {
    pub p_heights: Vec<u64>,
    pub q_heights: Vec<u64>,
    /// `a[v][w]`: how many copies of `Q`-tower `w` pack into `P`-tower `v`.
    pub a: Vec<Vec<u64>>,
    /// `b[w] = sum_v a[v][w]`: total copies of `Q`-tower `w`.
    pub b: Vec<u64>,
    /// Per `P`-tower, the ordered segments realizing the packing.
    pub segments: Vec<Vec<PlanSegment>>,
}

impl MatchingPlan {
    /// Total cell counts on both sides (must agree).
    pub fn cell_count(&self) -> u64 {
        self.p_heights.iter().sum()
    }

    /// The cell of `P` that the divided cell `(w, copy, l)` maps to.
    pub fn pi(&self, q_tower: usize, copy: usize, floor: u64) -> Option<Cell> {
        for (v, segs) in self.segments.iter().enumerate() {
            for s in segs {
                if s.q_tower == q_tower && s.copy == copy {
                    return Some(Cell { tower: v, floor: s.offset + floor });
                }
            }
        }
        None
    }

    /// Inverse of `pi`: which divided cell sits on `P`-cell `(v, k)`.
    pub fn pi_inverse(&self, cell: Cell) -> Option<(usize, usize, u64)> {
        let segs = self.segments.get(cell.tower)?;
        for s in segs {
            let h = self.q_heights[s.q_tower];
            if cell.floor > s.offset && cell.floor <= s.offset + h {
                return Some((s.q_tower, s.copy, cell.floor - s.offset));
            }
        }
        None
    }

    /// Re-verify the defining equations and the consecutiveness scan.
    pub fn verify(&self) -> Result<()> {
        for (v, row) in self.a.iter().enumerate() {
            let total: u64 = row.iter().zip(&self.q_heights).map(|(&c, &h)| c * h).sum();
            if total != self.p_heights[v] {
                return Err(Error::contract(format!(
                    "plan: sum_w a[{v}][w] h(w) = {total} != h(v) = {}",
                    self.p_heights[v]
                )));
            }
        }
        for (w, &bw) in self.b.iter().enumerate() {
            let col: u64 = self.a.iter().map(|row| row[w]).sum();
            if col != bw {
                return Err(Error::contract(format!("plan: b[{w}] mismatch")));
            }
        }
        let p_total: u64 = self.p_heights.iter().sum();
        let q_total: u64 = self.b.iter().zip(&self.q_heights).map(|(&bw, &h)| bw * h).sum();
        if p_total != q_total {
            return Err(Error::contract("plan: #P != #Q'"));
        }
        // Consecutiveness: segments tile each tower without gaps, and every
        // copy appears exactly once.
        let mut seen = std::collections::BTreeSet::new();
        for (v, segs) in self.segments.iter().enumerate() {
            let mut at = 0u64;
            for s in segs {
                if s.offset != at {
                    return Err(Error::contract(format!("plan: gap in tower {v} at {at}")));
                }
                if !seen.insert((s.q_tower, s.copy)) {
                    return Err(Error::contract("plan: copy used twice"));
                }
                if s.copy as u64 >= self.b[s.q_tower] {
                    return Err(Error::contract("plan: copy index out of range"));
                }
                at += self.q_heights[s.q_tower];
            }
            if at != self.p_heights[v] {
                return Err(Error::contract(format!("plan: tower {v} not fully tiled")));
            }
        }
        Ok(())
    }
}

/// Build the matching plan from a decomposition matrix: for each `P`-tower,
/// pack `a[v][w]` copies of each `Q`-tower end to end, in `Q`-tower index
/// order. Copy indices are assigned globally in packing order.
pub fn tower_matching(p_heights: &[u64], q_heights: &[u64], a: &[Vec<u64>]) -> Result<MatchingPlan> {
    if a.len() != p_heights.len() || a.iter().any(|row| row.len() != q_heights.len()) {
        return Err(Error::contract("tower_matching: matrix shape mismatch"));
    }
    let mut b = vec![0u64; q_heights.len()];
    let mut next_copy = vec![0usize; q_heights.len()];
    let mut segments = Vec::with_capacity(p_heights.len());
    for (v, row) in a.iter().enumerate() {
        let mut segs = Vec::new();
        let mut offset = 0u64;
        for (w, &count) in row.iter().enumerate() {
            for _ in 0..count {
                segs.push(PlanSegment { q_tower: w, copy: next_copy[w], offset });
                next_copy[w] += 1;
                offset += q_heights[w];
            }
            b[w] += count;
        }
        if offset != p_heights[v] {
            return Err(Error::contract(format!(
                "tower_matching: a[{v}] does not satisfy the height equation"
            )));
        }
        segments.push(segs);
    }
    let plan = MatchingPlan {
        p_heights: p_heights.to_vec(),
        q_heights: q_heights.to_vec(),
        a: a.to_vec(),
        b,
        segments,
    };
    plan.verify()?;
    Ok(plan)
}

// ---------------------------------------------------------------------------
// Conjugator synthesis
// ---------------------------------------------------------------------------

/// A synthesized conjugating map between two systems, given as the matching
/// plan between a `P`-level of `X` and a divided `Q`-level of `Y`, together
/// with a concrete deterministic division of the `Q`-tower bases.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PartitionMap {
    pub x_level: usize,
    pub y_level: usize,
    pub plan: MatchingPlan,
    /// `division[w]` lists the `b[w]` base pieces of `Q`-tower `w`, each a
    /// clopen subset of `Y(w, 1)` at some deeper level of `Y`.
    pub division: Vec<Vec<ClopenSet>>,
}

impl PartitionMap {
    /// The `Y`-side set of the divided cell `(w, copy, l)`:
    /// `alpha_Y^{l-1}` of the copy's base piece.
    pub fn q_prime_cell(
        &self,
        dy: &OrderedBratteliDiagram,
        q_tower: usize,
        copy: usize,
        floor: u64,
    ) -> Result<ClopenSet> {
        let piece = &self.division[q_tower][copy];
        vershik_action(dy, piece, floor as i64 - 1, DEFAULT_REFINE_BUDGET)
    }

    /// Image under `sigma` of a union of `P`-cells (level `x_level`): the
    /// union of the matched divided cells on the `Y` side.
    pub fn sigma_image(
        &self,
        dy: &OrderedBratteliDiagram,
        cells: &ClopenSet,
    ) -> Result<ClopenSet> {
        if cells.level != self.x_level {
            return Err(Error::contract("sigma_image expects cells at the matched X level"));
        }
        let mut parts: Vec<ClopenSet> = Vec::new();
        for &c in &cells.cells {
            let (w, copy, l) = self
                .plan
                .pi_inverse(c)
                .ok_or_else(|| Error::contract("cell outside the matching plan"))?;
            parts.push(self.q_prime_cell(dy, w, copy, l)?);
        }
        let deepest = parts.iter().map(|s| s.level).max().unwrap_or(self.y_level);
        let mut out = ClopenSet::empty(deepest);
        for p in parts {
            out = out.union(&p.refine_to(dy, deepest)?);
        }
        Ok(out)
    }

    /// Preimage under `sigma` of a union of `Q`-level cells of `Y`: the
    /// union of the `P`-cells matched to divided cells inside the set.
    pub fn sigma_preimage(&self, set: &ClopenSet) -> Result<ClopenSet> {
        if set.level != self.y_level {
            return Err(Error::contract("sigma_preimage expects cells at the matched Y level"));
        }
        let mut out = ClopenSet::empty(self.x_level);
        for (w, &hw) in self.plan.q_heights.iter().enumerate() {
            for l in 1..=hw {
                if set.contains(&Cell { tower: w, floor: l }) {
                    for copy in 0..self.plan.b[w] as usize {
                        let cell = self
                            .plan
                            .pi(w, copy, l)
                            .ok_or_else(|| Error::contract("plan misses a copy"))?;
                        out.cells.insert(cell);
                    }
                }
            }
        }
        Ok(out)
    }
}

/// Outcome of the synthesis pipeline.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub enum Synthesis {
    Synthesized(Box<PartitionMap>),
    /// The periodic-spectrum precondition failed: the named divisor of the
    /// gcd is certified absent from `PS` of the `X` system.
    Refused { offending_p: u64, certificate: ModCycleCert },
    Unknown { bound: usize },
}

/// Synthesize `sigma : X -> Y` carrying the Vershik map of `X` onto that of
/// `Y` exactly on every member of the lumped partition of `Y` at `q_level`
/// (which must refine the caller's target partition).
pub fn synthesize_conjugator(
    dx: &OrderedBratteliDiagram,
    dy: &OrderedBratteliDiagram,
    q_level: usize,
    bound: usize,
) -> Result<Synthesis> {
    // The pipeline applies only to diagrams whose minimality surrogate
    // certifies (a strict-positivity telescoping window exists).
    for (d, role) in [(dx, "source"), (dy, "target")] {
        if !crate::bratteli::validate(d, 6)?.minimality_certified() {
            return Err(Error::refused(format!(
                "{role} diagram has no strict-positivity window; minimality not certified"
            )));
        }
    }
    let q_heights = dy.heights(q_level)?;
    let p = gcd_of(&q_heights);

    // Certify p in PS(X), reporting the smallest failing divisor.
    let mut divisors: Vec<u64> = (1..=p).filter(|e| p.is_multiple_of(*e)).collect();
    divisors.sort();
    for e in divisors {
        match kzero::spectrum_membership(dx, e, bound)? {
            Tri::Yes(_) => {}
            Tri::No(cert) => return Ok(Synthesis::Refused { offending_p: e, certificate: cert }),
            Tri::Unknown { bound } => return Ok(Synthesis::Unknown { bound }),
        }
    }

    let n_threshold = semigroup_threshold(&q_heights, p)?;
    // Every Q-tower must be divided at least once (the copies have to cover
    // Y), so one copy of each is forced into every P-tower and only the
    // remainder is decomposed freely. The height requirement grows by the
    // total of the Q-heights.
    let q_total: u64 = q_heights.iter().sum();
    let min_height = p * n_threshold + q_total;
    let mut chosen = None;
    for level in 0..=bound {
        let h = match dx.heights(level) {
            Ok(h) => h,
            Err(Error::Depth(_)) => break,
            Err(e) => return Err(e),
        };
        if h.iter().all(|&hv| hv % p == 0 && hv >= min_height) {
            chosen = Some((level, h));
            break;
        }
    }
    let Some((x_level, p_heights)) = chosen else {
        return Ok(Synthesis::Unknown { bound });
    };

    let a: Vec<Vec<u64>> = p_heights
        .iter()
        .map(|&hv| {
            height_decomposition(hv - q_total, &q_heights)
                .map(|rest| rest.iter().map(|&c| c + 1).collect())
        })
        .collect::<Result<_>>()?;
    let plan = tower_matching(&p_heights, &q_heights, &a)?;

    // Concrete deterministic division of each Q-tower base into b[w] pieces:
    // refine the base cell until it has enough sub-cells, then split the
    // ordered sub-cells into contiguous groups of near-equal size.
    let mut division: Vec<Vec<ClopenSet>> = Vec::with_capacity(q_heights.len());
    for (w, &bw) in plan.b.iter().enumerate() {
        let base = ClopenSet::single(q_level, Cell { tower: w, floor: 1 });
        let mut deep = base.clone();
        let mut fuel = DEFAULT_REFINE_BUDGET + bound;
        while (deep.len() as u64) < bw {
            if fuel == 0 {
                return Ok(Synthesis::Unknown { bound });
            }
            deep = deep.refine_once(dy)?;
            fuel -= 1;
        }
        let cells: Vec<Cell> = deep.cells.iter().copied().collect();
        let total = cells.len() as u64;
        let (qsize, extra) = (total / bw, (total % bw) as usize);
        let mut pieces = Vec::with_capacity(bw as usize);
        let mut at = 0usize;
        for i in 0..bw as usize {
            let size = qsize as usize + usize::from(i < extra);
            pieces.push(ClopenSet::from_cells(deep.level, cells[at..at + size].iter().copied()));
            at += size;
        }
        division.push(pieces);
    }

    let map = PartitionMap { x_level, y_level: q_level, plan, division };
    Ok(Synthesis::Synthesized(Box::new(map)))
}

// ---------------------------------------------------------------------------
// Exact verification of approximate conjugacy on a partition
// ---------------------------------------------------------------------------

/// Verification report: one exact boolean per partition member.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConjugacyReport {
    pub entries: Vec<ConjugacyEntry>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConjugacyEntry {
    pub member: String,
    pub holds: bool,
    /// Why the identity failed, when it did.
    pub note: Option<String>,
}

impl ConjugacyReport {
    pub fn all_pass(&self) -> bool {
        self.entries.iter().all(|e| e.holds)
    }

    pub fn failing(&self) -> Vec<&str> {
        self.entries.iter().filter(|e| !e.holds).map(|e| e.member.as_str()).collect()
    }
}

/// Check `sigma alpha sigma^{-1}(U) = beta(U)` exactly for every member `U`
/// of the lumped `Q`-partition of `Y` (no tolerance). Works entirely at the
/// matched levels: preimages are unions of `P`-cells, their Vershik images
/// resolve exactly, and the forward map sends full cells to divided cells.
pub fn verify_approx_conjugacy(
    dx: &OrderedBratteliDiagram,
    dy: &OrderedBratteliDiagram,
    map: &PartitionMap,
    budget: usize,
) -> Result<ConjugacyReport> {
    let q = dy.kr_partition(map.y_level, true)?;
    let mut entries = Vec::new();
    for member in q.members() {
        let label = if member.len() == 1 {
            let c = member.cells.iter().next().unwrap();
            format!("Y({},{})", c.tower, c.floor)
        } else {
            "R(Q)".to_string()
        };
        // Failures (including maps that do not resolve at all) are report
        // entries, not errors.
        let check = || -> Result<bool> {
            let beta_u = vershik_action(dy, &member, 1, budget)?;
            let pre = map.sigma_preimage(&member)?;
            let stepped = vershik_action(dx, &pre, 1, budget)?;
            if stepped.level != map.x_level {
                return Ok(false); // left the matched cell algebra
            }
            let image = map.sigma_image(dy, &stepped)?;
            image.same_set(dy, &beta_u)
        };
        let (holds, note) = match check() {
            Ok(true) => (true, None),
            Ok(false) => (false, Some("image differs from beta(U)".to_string())),
            Err(Error::Contract(msg)) | Err(Error::Depth(msg)) => (false, Some(msg)),
            Err(e) => return Err(e),
        };
        entries.push(ConjugacyEntry { member: label, holds, note });
    }
    Ok(ConjugacyReport { entries })
}
