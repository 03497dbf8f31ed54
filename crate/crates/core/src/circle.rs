//! Isometric circle cocycles and approximate conjugacy on `X x T`.
//!
//! An isometry of the circle is a rotation `R_t` or a rotation composed
//! with the reflection `t -> -t`; the flip bit is a homomorphism onto
//! `Z_2`. A cocycle assigns one isometry per cell. All rotation amounts are
//! exact rationals, so every bound in the constructions below is a strict
//! inequality between rationals and is checked exactly.
//!
//! Contents: the orientation class (a mod-2 coboundary problem in the
//! dimension group), straightening an orientation-preserving cocycle to
//! pure rotations, the eta-correction making a transported rotation cocycle
//! uniformly close to the target, the omega-correction for flip-carrying
//! cocycles over a matched tower plan, the parity-constrained coin problem,
//! and the decision procedure for weak approximate conjugacy of two skew
//! products.

use crate::bratteli::{Cell, OrderedBratteliDiagram, PathPrefix};
use crate::conjsynth::PartitionMap;
use crate::error::Error;
use crate::extension::{self, SpectrumBranch, ZmCocycle};
use crate::kzero::{self, ModCellFunction, ModCycleCert, ModTransferCert, Tri};
use crate::rational::{Rat, TorusPoint};
use crate::Result;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

// ---------------------------------------------------------------------------
// Isometries of the circle
// ---------------------------------------------------------------------------

/// An isometry of `T = R/Z`: `t -> rot + t` (flip = false) or
/// `t -> rot - t` (flip = true).
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct IsomT {
    pub rot: TorusPoint,
    pub flip: bool,
}

impl IsomT {
    pub const IDENTITY: IsomT = IsomT { rot: TorusPoint::ZERO, flip: false };

    pub fn rotation(t: TorusPoint) -> IsomT {
        IsomT { rot: t, flip: false }
    }

    /// The reflection `t -> -t`.
    pub fn reflection() -> IsomT {
        IsomT { rot: TorusPoint::ZERO, flip: true }
    }

    pub fn apply(&self, t: TorusPoint) -> TorusPoint {
        if self.flip {
            self.rot - t
        } else {
            self.rot + t
        }
    }

    /// `self . rhs` (apply `rhs` first).
    pub fn compose(&self, rhs: &IsomT) -> IsomT {
        let rot = if self.flip { self.rot - rhs.rot } else { self.rot + rhs.rot };
        IsomT { rot, flip: self.flip ^ rhs.flip }
    }

    pub fn inverse(&self) -> IsomT {
        if self.flip {
            IsomT { rot: self.rot, flip: true }
        } else {
            IsomT { rot: -self.rot, flip: false }
        }
    }

    /// The orientation bit (0 preserving, 1 reversing).
    pub fn orientation(&self) -> u64 {
        u64::from(self.flip)
    }

    /// Exact sup distance to another isometry: infinite sup over `t` of the
    /// pointwise circle distance. For matching flips this is the rotation
    /// difference; for opposite flips the sup is attained and equals 1/2
    /// plus nothing exact to compare, so it is reported as `None`.
    pub fn uniform_distance(&self, other: &IsomT) -> Option<Rat> {
        if self.flip == other.flip {
            Some(self.rot.dist(&other.rot))
        } else {
            None
        }
    }
}

// ---------------------------------------------------------------------------
// Cocycles
// ---------------------------------------------------------------------------

/// A locally constant map into the circle isometries: one value per cell of
/// a level partition.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircleCocycle {
    pub level: usize,
    pub values: Vec<Vec<IsomT>>,
}

impl CircleCocycle {
    pub fn constant(d: &OrderedBratteliDiagram, level: usize, value: IsomT) -> Result<CircleCocycle> {
        let h = d.heights(level)?;
        Ok(CircleCocycle { level, values: h.iter().map(|&hv| vec![value; hv as usize]).collect() })
    }

    pub fn value(&self, cell: &Cell) -> IsomT {
        self.values[cell.tower][(cell.floor - 1) as usize]
    }

    pub fn refine_to(&self, d: &OrderedBratteliDiagram, level: usize) -> Result<CircleCocycle> {
        if level < self.level {
            return Err(Error::contract("cocycle: target level is shallower"));
        }
        let mut cur = self.clone();
        while cur.level < level {
            let l = cur.level;
            let next_heights = d.heights(l + 1)?;
            let mut values: Vec<Vec<IsomT>> =
                next_heights.iter().map(|&h| vec![IsomT::IDENTITY; h as usize]).collect();
            for (w, row) in values.iter_mut().enumerate() {
                for (v, offset) in d.segments(l, w)? {
                    for (k, &val) in cur.values[v].iter().enumerate() {
                        row[offset as usize + k] = val;
                    }
                }
            }
            cur = CircleCocycle { level: l + 1, values };
        }
        Ok(cur)
    }

    /// The flip-bit function as a `Z_2` cell function.
    pub fn orientation_function(&self) -> ModCellFunction {
        ModCellFunction {
            modulus: 2,
            level: self.level,
            values: self
                .values
                .iter()
                .map(|row| row.iter().map(|i| i.orientation()).collect())
                .collect(),
        }
    }

    pub fn is_rotation_only(&self) -> bool {
        self.values.iter().all(|row| row.iter().all(|i| !i.flip))
    }

    /// The cocycle must assign a value to every cell of its level partition.
    pub fn check_shape(&self, d: &OrderedBratteliDiagram) -> Result<()> {
        let h = d.heights(self.level)?;
        if self.values.len() != h.len()
            || self.values.iter().zip(&h).any(|(row, &hv)| row.len() != hv as usize)
        {
            return Err(Error::contract(format!(
                "cocycle shape does not match the level-{} partition (heights {h:?})",
                self.level
            )));
        }
        Ok(())
    }
}

/// Orientation class `[o(phi)]` in `K^0 / 2 K^0`: zero iff the flip bits
/// solve the mod-2 coboundary equation, in which case the transfer is the
/// straightening data.
pub fn orientation_class(
    d: &OrderedBratteliDiagram,
    phi: &CircleCocycle,
    bound: usize,
) -> Result<Tri<ModTransferCert, ModCycleCert>> {
    kzero::mod_m_solve(d, &phi.orientation_function(), bound)
}

// ---------------------------------------------------------------------------
// Straightening (conjugating an orientation-preserving cocycle to rotations)
// ---------------------------------------------------------------------------

/// The involutive corrector `psi` (identity or reflection per cell) and the
/// rotation cocycle `xi` with `psi(alpha x) . phi_x = R_xi(x) . psi_x`,
/// verified on every cell.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Straightening {
    pub level: usize,
    /// Flip bit of `psi` per cell (the transfer function of the orientation
    /// class; zero on every base cell).
    pub psi_flip: Vec<Vec<bool>>,
    /// The rotation amounts `xi` per cell.
    pub xi: Vec<Vec<TorusPoint>>,
    pub transfer: ModTransferCert,
}

impl Straightening {
    pub fn psi(&self, cell: &Cell) -> IsomT {
        if self.psi_flip[cell.tower][(cell.floor - 1) as usize] {
            IsomT::reflection()
        } else {
            IsomT::IDENTITY
        }
    }

    pub fn xi_value(&self, cell: &Cell) -> TorusPoint {
        self.xi[cell.tower][(cell.floor - 1) as usize]
    }
}

/// Straighten an orientation-preserving cocycle: refuses when the
/// orientation class is nonzero or undecided.
pub fn straighten(
    d: &OrderedBratteliDiagram,
    phi: &CircleCocycle,
    bound: usize,
) -> Result<Straightening> {
    let transfer = match orientation_class(d, phi, bound)? {
        Tri::Yes(t) => t,
        Tri::No(_) => {
            return Err(Error::refused("orientation class is nonzero; cannot straighten"))
        }
        Tri::Unknown { bound } => {
            return Err(Error::refused(format!("orientation class undecided up to {bound}")))
        }
    };
    let level = transfer.level.max(phi.level);
    let phir = phi.refine_to(d, level)?;
    // The transfer is given at its own level; re-expand to `level`.
    let f = ModCellFunction { modulus: 2, level: transfer.level, values: transfer.g.clone() }
        .refine_to(d, level)?;
    let heights = d.heights(level)?;
    let mut psi_flip: Vec<Vec<bool>> = Vec::with_capacity(heights.len());
    let mut xi: Vec<Vec<TorusPoint>> = Vec::with_capacity(heights.len());
    for (v, &h) in heights.iter().enumerate() {
        let h = h as usize;
        let mut flips = Vec::with_capacity(h);
        let mut rots = Vec::with_capacity(h);
        for k in 0..h {
            let fx = f.values[v][k] == 1;
            // f(alpha x): next floor, or 0 at the roof (the transfer
            // vanishes on every base cell).
            let fax = if k + 1 < h { f.values[v][k + 1] == 1 } else { false };
            let psi_x = if fx { IsomT::reflection() } else { IsomT::IDENTITY };
            let psi_ax = if fax { IsomT::reflection() } else { IsomT::IDENTITY };
            let conj = psi_ax.compose(&phir.values[v][k]).compose(&psi_x.inverse());
            if conj.flip {
                return Err(Error::contract(
                    "straightening produced a flip (transfer inconsistent; internal error)",
                ));
            }
            // Verify the defining identity exactly: psi(ax) . phi = R_xi . psi(x).
            let lhs = psi_ax.compose(&phir.values[v][k]);
            let rhs = IsomT::rotation(conj.rot).compose(&psi_x);
            if lhs != rhs {
                return Err(Error::contract("straightening identity failed (internal error)"));
            }
            flips.push(fx);
            rots.push(conj.rot);
        }
        psi_flip.push(flips);
        xi.push(rots);
    }
    Ok(Straightening { level, psi_flip, xi, transfer })
}

// ---------------------------------------------------------------------------
// The eta correction (rotation cocycles over matched towers)
// ---------------------------------------------------------------------------

/// The eta function over a tower system, with its exact deviation data.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EtaFunction {
    pub heights: Vec<u64>,
    /// Tower sums `kappa` of the rotation defect, one per tower.
    pub kappa: Vec<TorusPoint>,
    /// Minimal lifts of `kappa` in `(-1/2, 1/2]`.
    pub kappa_lift: Vec<Rat>,
    /// `eta` per cell (zero on every base floor).
    pub eta: Vec<Vec<TorusPoint>>,
    /// Exact per-tower deviation of the corrected cocycle.
    pub tower_deviation: Vec<Rat>,
    pub sup_deviation: Rat,
}

/// Build `eta` over towers with the given heights from the per-cell defect
/// `delta = (zeta . sigma) - xi`, and verify the strict bound: the corrected
/// defect `|(xi - zeta sigma) - (eta - eta . alpha)|` is below `epsilon` on
/// every cell. Requires every height to exceed `1/epsilon`.
pub fn eta_construction(
    heights: &[u64],
    delta: &[Vec<TorusPoint>],
    epsilon: Rat,
) -> Result<EtaFunction> {
    if heights.len() != delta.len()
        || heights.iter().zip(delta).any(|(&h, row)| row.len() != h as usize)
    {
        return Err(Error::contract("eta: defect values must match the tower heights"));
    }
    if epsilon <= Rat::zero() {
        return Err(Error::contract("eta: epsilon must be positive"));
    }
    for (v, &h) in heights.iter().enumerate() {
        if Rat::from_integer(h as i64) * epsilon <= Rat::from_integer(1) {
            return Err(Error::refused(format!(
                "tower {v} has height {h} <= 1/epsilon; choose a finer tower partition"
            )));
        }
    }
    let mut kappa = Vec::with_capacity(heights.len());
    let mut kappa_lift = Vec::with_capacity(heights.len());
    let mut eta: Vec<Vec<TorusPoint>> = Vec::with_capacity(heights.len());
    let mut tower_deviation = Vec::with_capacity(heights.len());
    let mut sup = Rat::zero();
    for (v, &h) in heights.iter().enumerate() {
        let h_us = h as usize;
        let total = delta[v].iter().fold(TorusPoint::ZERO, |a, &b| a + b);
        let lift = total.minimal_lift();
        // eta(floor k) = prefix_{k-1}(delta) - ((k-1)/h) * lift, mod 1.
        let mut row = Vec::with_capacity(h_us);
        let mut prefix = TorusPoint::ZERO;
        for k in 0..h_us {
            let drift = TorusPoint::new(lift * Rat::new(k as i64, h as i64));
            row.push(prefix - drift);
            prefix = prefix + delta[v][k];
        }
        debug_assert!(row[0].is_zero(), "eta must vanish on the base floor");
        // Exact deviation per cell: |(-delta) - eta + eta(alpha .)| with the
        // roof wrapping to a base floor where eta = 0.
        let mut dev = Rat::zero();
        for k in 0..h_us {
            let eta_next = if k + 1 < h_us { row[k + 1] } else { TorusPoint::ZERO };
            let cell_dev = ((-delta[v][k]) - row[k] + eta_next).norm();
            if cell_dev > dev {
                dev = cell_dev;
            }
        }
        if dev >= epsilon {
            return Err(Error::contract(format!(
                "eta bound violated on tower {v}: deviation {dev} >= epsilon {epsilon} (internal error)"
            )));
        }
        if dev > sup {
            sup = dev;
        }
        kappa.push(total);
        kappa_lift.push(lift);
        eta.push(row);
        tower_deviation.push(dev);
    }
    Ok(EtaFunction {
        heights: heights.to_vec(),
        kappa,
        kappa_lift,
        eta,
        tower_deviation,
        sup_deviation: sup,
    })
}

/// Pull the defect `(zeta . sigma) - xi` back to the matched towers of a
/// synthesized map and build `eta` there. `xi` lives on the `X` cells at
/// the matched level, `zeta` on the `Y` cells; towers are the divided
/// `Q`-copies (heights `q_heights`, floors matched by the plan).
pub fn eta_from_partition_map(
    dx: &OrderedBratteliDiagram,
    map: &PartitionMap,
    xi: &[Vec<TorusPoint>],
    zeta: &[Vec<TorusPoint>],
    epsilon: Rat,
) -> Result<EtaFunction> {
    let plan = &map.plan;
    let heights_x = dx.heights(map.x_level)?;
    if xi.len() != heights_x.len()
        || xi.iter().zip(&heights_x).any(|(row, &h)| row.len() != h as usize)
    {
        return Err(Error::contract("xi must be cell-constant at the matched X level"));
    }
    if zeta.len() != plan.q_heights.len()
        || zeta.iter().zip(&plan.q_heights).any(|(row, &h)| row.len() != h as usize)
    {
        return Err(Error::contract("zeta must be cell-constant at the matched Y level"));
    }
    // Towers of the pullback partition: one per divided Q-copy.
    let mut heights = Vec::new();
    let mut delta = Vec::new();
    for (w, &hw) in plan.q_heights.iter().enumerate() {
        for copy in 0..plan.b[w] as usize {
            let mut row = Vec::with_capacity(hw as usize);
            for l in 1..=hw {
                let p_cell = plan
                    .pi(w, copy, l)
                    .ok_or_else(|| Error::contract("plan misses a matched cell"))?;
                let xi_val = xi[p_cell.tower][(p_cell.floor - 1) as usize];
                let zeta_val = zeta[w][(l - 1) as usize];
                row.push(zeta_val - xi_val);
            }
            heights.push(hw);
            delta.push(row);
        }
    }
    eta_construction(&heights, &delta, epsilon)
}

// ---------------------------------------------------------------------------
// The omega correction (flip-carrying cocycles over matched towers)
// ---------------------------------------------------------------------------

/// The omega cocycle over the matched towers with its exact deviation data.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OmegaResult {
    pub heights: Vec<u64>,
    pub omega: Vec<Vec<IsomT>>,
    pub kappa: Vec<TorusPoint>,
    pub kappa_lift: Vec<Rat>,
    /// Parity suffix sums `chi(v, j)` for `j = 0..h(v)` (last entry 0).
    pub chi: Vec<Vec<u64>>,
    /// Exact deviation per cell of `psi(sigma .) omega - omega(alpha .) phi`.
    pub cell_deviation: Vec<Vec<Rat>>,
    pub sup_deviation: Rat,
}

/// Build `omega` over towers with the given heights from the cocycle values
/// `phi` (on the `X` side) and the pulled-back values `psi_pulled` (the `Y`
/// cocycle composed with the matching), and verify the strict per-tower
/// bound `deviation < 1/h(v)` exactly.
///
/// Hypothesis: per tower, the flip parities of `phi` and `psi_pulled` must
/// agree (refused otherwise, listing the towers with both parities).
pub fn omega_construction(
    heights: &[u64],
    phi: &[Vec<IsomT>],
    psi_pulled: &[Vec<IsomT>],
) -> Result<OmegaResult> {
    let n = heights.len();
    if phi.len() != n || psi_pulled.len() != n {
        return Err(Error::contract("omega: tower counts disagree"));
    }
    for (v, &h) in heights.iter().enumerate() {
        if phi[v].len() != h as usize || psi_pulled[v].len() != h as usize {
            return Err(Error::contract(format!("omega: tower {v} values do not match height")));
        }
    }
    // Parity hypothesis.
    let mut bad = Vec::new();
    for (v, &_h) in heights.iter().enumerate() {
        let po: u64 = phi[v].iter().map(|i| i.orientation()).sum::<u64>() % 2;
        let qo: u64 = psi_pulled[v].iter().map(|i| i.orientation()).sum::<u64>() % 2;
        if po != qo {
            bad.push(format!("tower {v}: o(phi)_v = {po}, sum of o(psi)_w = {qo}"));
        }
    }
    if !bad.is_empty() {
        return Err(Error::refused(format!(
            "parity hypothesis fails: {}",
            bad.join("; ")
        )));
    }

    let mut omega = Vec::with_capacity(n);
    let mut kappa = Vec::with_capacity(n);
    let mut kappa_lift = Vec::with_capacity(n);
    let mut chi_all = Vec::with_capacity(n);
    let mut cell_deviation = Vec::with_capacity(n);
    let mut sup = Rat::zero();
    for (v, &h) in heights.iter().enumerate() {
        let h_us = h as usize;
        // kappa: R_kappa = (psi product, top down) . (phi product)^{-1}.
        let mut psi_prod = IsomT::IDENTITY;
        let mut phi_prod = IsomT::IDENTITY;
        for k in 0..h_us {
            psi_prod = psi_pulled[v][k].compose(&psi_prod);
            phi_prod = phi[v][k].compose(&phi_prod);
        }
        let kap = psi_prod.compose(&phi_prod.inverse());
        if kap.flip {
            return Err(Error::contract("kappa is not a rotation (parity bookkeeping broke)"));
        }
        let lift = kap.rot.minimal_lift();

        // chi(v, j) = sum_{i >= j} o(psi(sigma alpha^i x)), j = 0..h.
        let mut chi = vec![0u64; h_us + 1];
        for j in (0..h_us).rev() {
            chi[j] = (chi[j + 1] + psi_pulled[v][j].orientation()) % 2;
        }

        // eta(alpha^j x) = -(-1)^{chi(v,j)} (j/h) lift, and omega itself.
        let eta_at = |j: usize| -> TorusPoint {
            let sign = if chi[j].is_multiple_of(2) { lift } else { -lift };
            TorusPoint::new(-sign * Rat::new(j as i64, h as i64))
        };
        let mut row = Vec::with_capacity(h_us);
        let mut psi_part = IsomT::IDENTITY;
        let mut phi_part = IsomT::IDENTITY;
        for j in 0..h_us {
            if j == 0 {
                row.push(IsomT::IDENTITY);
            } else {
                psi_part = psi_pulled[v][j - 1].compose(&psi_part);
                phi_part = phi[v][j - 1].compose(&phi_part);
                let w = IsomT::rotation(eta_at(j)).compose(&psi_part).compose(&phi_part.inverse());
                row.push(w);
            }
        }

        // Exact deviation per cell: compare psi(sigma .) omega with
        // omega(alpha .) phi; at the roof, omega wraps to the identity.
        let mut devs = Vec::with_capacity(h_us);
        for j in 0..h_us {
            let a = psi_pulled[v][j].compose(&row[j]);
            let omega_next = if j + 1 < h_us { row[j + 1] } else { IsomT::IDENTITY };
            let b = omega_next.compose(&phi[v][j]);
            let dev = a.uniform_distance(&b).ok_or_else(|| {
                Error::contract("deviation comparison with mismatched flips (internal error)")
            })?;
            let bound = Rat::new(1, h as i64);
            if dev >= bound {
                return Err(Error::contract(format!(
                    "omega bound violated on tower {v} floor {}: {dev} >= 1/{h}",
                    j + 1
                )));
            }
            if dev > sup {
                sup = dev;
            }
            devs.push(dev);
        }
        omega.push(row);
        kappa.push(kap.rot);
        kappa_lift.push(lift);
        chi_all.push(chi);
        cell_deviation.push(devs);
    }
    Ok(OmegaResult {
        heights: heights.to_vec(),
        omega,
        kappa,
        kappa_lift,
        chi: chi_all,
        cell_deviation,
        sup_deviation: sup,
    })
}

/// Pull a `Y`-side cocycle back through a matching plan and build `omega`
/// over the matched `P`-towers of `X`. Checks the plan (hypothesis 1)
/// before delegating to the tower construction (hypothesis 2).
pub fn omega_from_plan(
    dx: &OrderedBratteliDiagram,
    dy: &OrderedBratteliDiagram,
    map: &PartitionMap,
    phi: &CircleCocycle,
    psi: &CircleCocycle,
) -> Result<OmegaResult> {
    map.plan.verify()?;
    let phir = phi.refine_to(dx, map.x_level)?;
    let psi = psi.refine_to(dy, map.y_level)?;
    let plan = &map.plan;
    let heights = &plan.p_heights;
    let mut psi_pulled: Vec<Vec<IsomT>> = Vec::with_capacity(heights.len());
    for (v, &h) in heights.iter().enumerate() {
        let mut row = Vec::with_capacity(h as usize);
        for k in 1..=h {
            let (w, _copy, l) = plan
                .pi_inverse(Cell { tower: v, floor: k })
                .ok_or_else(|| Error::contract("plan misses a cell"))?;
            row.push(psi.values[w][(l - 1) as usize]);
        }
        psi_pulled.push(row);
    }
    omega_construction(heights, &phir.values, &psi_pulled)
}

// ---------------------------------------------------------------------------
// The parity-constrained coin problem
// ---------------------------------------------------------------------------

/// Hypothesis tag of the parity coin problem.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CombinaCase {
    /// Some even `m_i` with nonzero parity, and some odd `m_j`.
    Case1,
    /// Some odd `m_i` with zero parity, and some nonzero parity `m_j`.
    Case2,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Combina {
    pub case: Option<CombinaCase>,
    /// gcd of the generators.
    pub q: u64,
    /// Minimal `N` such that for every `n >= N` and both parities a
    /// solution exists. `None` when neither hypothesis holds.
    pub threshold: Option<u64>,
}

/// Check the hypotheses and compute the threshold by dynamic programming
/// over `(sum, parity)` states. The scan stops once a run of consecutive
/// good `n` of length `min(m_i/q)` appears: the good set is closed under
/// adding any generator, so everything beyond the run is good.
pub fn combina(m: &[u64], chi: &[u64]) -> Result<Combina> {
    if m.is_empty() || m.len() != chi.len() {
        return Err(Error::contract("combina: generators and parities must match"));
    }
    if m.contains(&0) {
        return Err(Error::contract("combina: zero generator"));
    }
    let chi: Vec<u64> = chi.iter().map(|&x| x % 2).collect();
    let q = m.iter().copied().fold(0, gcd);
    let case = if m
        .iter()
        .zip(&chi)
        .any(|(&mi, &ci)| mi % 2 == 0 && ci != 0)
        && m.iter().any(|&mj| mj % 2 == 1)
    {
        Some(CombinaCase::Case1)
    } else if m.iter().zip(&chi).any(|(&mi, &ci)| mi % 2 == 1 && ci == 0)
        && chi.iter().any(|&cj| cj != 0)
    {
        Some(CombinaCase::Case2)
    } else {
        None
    };
    if case.is_none() {
        return Ok(Combina { case, q, threshold: None });
    }

    let scaled: Vec<u64> = m.iter().map(|&x| x / q).collect();
    let min_gen = *scaled.iter().min().unwrap() as usize;
    let max_gen = *scaled.iter().max().unwrap();
    // Reachable (sum, parity) states up to a growing cap.
    let mut cap = (max_gen * max_gen + 2 * max_gen + 4) as usize;
    loop {
        let reach = reach_table(&scaled, &chi, cap);
        // good(n): both parities solvable at sum n.
        let good = |n: usize| reach[n][0] && reach[n][1];
        let mut run = 0usize;
        let mut threshold = None;
        for n in 1..=cap {
            if good(n) {
                run += 1;
                if run >= min_gen.max(1) {
                    threshold = Some((n - run + 1) as u64);
                    break;
                }
            } else {
                run = 0;
            }
        }
        if let Some(mut t) = threshold {
            // Minimality: walk back over any good prefix.
            while t > 1 && good((t - 1) as usize) {
                t -= 1;
            }
            return Ok(Combina { case, q, threshold: Some(t) });
        }
        cap *= 2;
        if cap > 1_000_000 {
            return Err(Error::depth("combina threshold search exceeded the cap"));
        }
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// reach[n][p]: some non-negative combination of the scaled generators sums
/// to `n` with total parity `p`.
fn reach_table(scaled: &[u64], chi: &[u64], cap: usize) -> Vec<[bool; 2]> {
    let mut reach = vec![[false; 2]; cap + 1];
    reach[0][0] = true;
    for n in 0..=cap {
        for par in 0..2 {
            if !reach[n][par] {
                continue;
            }
            for (i, &g) in scaled.iter().enumerate() {
                let nn = n + g as usize;
                if nn <= cap {
                    let np = (par + chi[i] as usize) % 2;
                    reach[nn][np] = true;
                }
            }
        }
    }
    reach
}

/// Explicit witness for `sum l_i m_i = n q` with `sum l_i chi_i = target`
/// (mod 2), or `None` when unsolvable. Deterministic back-trace.
pub fn combina_solve(m: &[u64], chi: &[u64], n: u64, target: u64) -> Result<Option<Vec<u64>>> {
    if m.is_empty() || m.len() != chi.len() || m.contains(&0) {
        return Err(Error::contract("combina_solve: bad generators"));
    }
    let chi: Vec<u64> = chi.iter().map(|&x| x % 2).collect();
    let target = target % 2;
    let q = m.iter().copied().fold(0, gcd);
    let scaled: Vec<u64> = m.iter().map(|&x| x / q).collect();
    let cap = n as usize;
    let reach = reach_table(&scaled, &chi, cap);
    if !reach[cap][target as usize] {
        return Ok(None);
    }
    // Walk back: prefer the lowest generator index at each step.
    let mut l = vec![0u64; m.len()];
    let mut cur = cap;
    let mut par = target as usize;
    while cur > 0 || par != 0 {
        let mut stepped = false;
        for (i, &g) in scaled.iter().enumerate() {
            let g = g as usize;
            if cur >= g {
                let prev_par = (par + chi[i] as usize) % 2;
                if reach[cur - g][prev_par] {
                    l[i] += 1;
                    cur -= g;
                    par = prev_par;
                    stepped = true;
                    break;
                }
            }
        }
        if !stepped {
            return Err(Error::contract("combina back-trace failed (internal error)"));
        }
    }
    // Exactness of both equations.
    debug_assert_eq!(l.iter().zip(m).map(|(&li, &mi)| li * mi).sum::<u64>(), n * q);
    debug_assert_eq!(l.iter().zip(&chi).map(|(&li, &ci)| li * ci).sum::<u64>() % 2, target);
    Ok(Some(l))
}

// ---------------------------------------------------------------------------
// The decision procedure for weak approximate conjugacy of skew products
// ---------------------------------------------------------------------------

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum WacxtVerdict {
    ConditionA,
    ConditionB,
    ConditionC,
    No,
    Unknown,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CondStatus {
    Satisfied,
    Refuted,
    Unknown,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WacxtDecision {
    /// Per `p`: membership in `PS(beta)` and `PS(alpha)`.
    pub ps_table: Vec<(u64, String, String)>,
    /// `Some(p)` when `p` is certified in `PS(beta)` but not in `PS(alpha)`.
    pub containment_obstruction: Option<u64>,
    pub containment_decided: bool,
    pub cond_a: CondStatus,
    /// Orientation transfers witnessing condition (a) (phi side, psi side).
    pub cert_a: Option<(ModTransferCert, ModTransferCert)>,
    pub cond_b: CondStatus,
    /// The witness exponent for condition (b), when satisfied.
    pub cond_b_n: Option<u32>,
    /// Divisibility witnesses and mod-2 gate transfers for condition (b)
    /// (x divisibility, y divisibility, x gate, y gate).
    pub cert_b: Option<WacxtCertB>,
    pub cond_c: CondStatus,
    /// The spectrum-formula branch backing condition (c), when evaluated.
    pub cond_c_branch: Option<SpectrumBranch>,
    /// The two-way spectrum report backing condition (c).
    pub cert_c: Option<extension::PsExtensionReport>,
    pub verdict: WacxtVerdict,
}

/// Certificates for condition (b).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct WacxtCertB {
    pub x_divisibility: kzero::DivisibilityCert,
    pub y_divisibility: kzero::DivisibilityCert,
    pub x_gate: ModTransferCert,
    pub y_gate: ModTransferCert,
}

/// Decide weak approximate conjugacy of `alpha x phi` and `beta x psi`:
/// the periodic spectrum of the target must embed in that of the source,
/// and one of three orientation conditions must hold. All satisfied
/// conditions are evaluated and reported; the verdict names the first.
pub fn decide_wacxt(
    dx: &OrderedBratteliDiagram,
    phi: &CircleCocycle,
    dy: &OrderedBratteliDiagram,
    psi: &CircleCocycle,
    p_max: u64,
    bound: usize,
) -> Result<WacxtDecision> {
    for (d, role) in [(dx, "source"), (dy, "target")] {
        if !crate::bratteli::validate(d, 6)?.minimality_certified() {
            return Err(Error::refused(format!(
                "{role} diagram has no strict-positivity window; minimality not certified"
            )));
        }
    }
    // PS(beta) contained in PS(alpha), up to p_max.
    let mut ps_table = Vec::new();
    let mut containment_obstruction = None;
    let mut containment_decided = true;
    for p in 1..=p_max {
        let sb = kzero::spectrum_membership(dy, p, bound)?;
        let sa = kzero::spectrum_membership(dx, p, bound)?;
        if sb.is_yes() && sa.is_no() && containment_obstruction.is_none() {
            containment_obstruction = Some(p);
        }
        if !(sb.is_yes() || sb.is_no()) || !(sa.is_yes() || sa.is_no()) {
            containment_decided = false;
        }
        ps_table.push((p, sb.verdict_str().to_string(), sa.verdict_str().to_string()));
    }

    // Condition (a): both orientation classes vanish.
    let o_phi = orientation_class(dx, phi, bound)?;
    let o_psi = orientation_class(dy, psi, bound)?;
    let (cond_a, cert_a) = match (&o_phi, &o_psi) {
        (Tri::Yes(ta), Tri::Yes(tb)) => (CondStatus::Satisfied, Some((ta.clone(), tb.clone()))),
        (Tri::No(_), _) | (_, Tri::No(_)) => (CondStatus::Refuted, None),
        _ => (CondStatus::Unknown, None),
    };

    // Condition (b): [o(psi)] nonzero and a common exponent n with
    // 2^(n-1)-divisible units whose halves match the orientation classes
    // mod 2 on both sides.
    let (cond_b, cond_b_n, cert_b) = match &o_psi {
        Tri::Yes(_) => (CondStatus::Refuted, None, None),
        Tri::Unknown { .. } => (CondStatus::Unknown, None, None),
        Tri::No(_) => {
            let mut status = CondStatus::Refuted;
            let mut witness = None;
            let mut cert = None;
            let mut undecided = false;
            for n in 1..=bound as u32 {
                let p = 2u64.pow(n - 1);
                let dx_div = kzero::divisible_by(dx, &kzero::order_unit(dx, 0)?, p, bound)?;
                let dy_div = kzero::divisible_by(dy, &kzero::order_unit(dy, 0)?, p, bound)?;
                match (&dx_div, &dy_div) {
                    (Tri::Yes(fx), Tri::Yes(gy)) => {
                        let fx_fn = quotient_as_mod2(dx, fx)?;
                        let gy_fn = quotient_as_mod2(dy, gy)?;
                        let gate_x = kzero::mod_classes_equal(
                            dx,
                            &fx_fn,
                            &phi.orientation_function(),
                            bound,
                        )?;
                        let gate_y = kzero::mod_classes_equal(
                            dy,
                            &gy_fn,
                            &psi.orientation_function(),
                            bound,
                        )?;
                        match (&gate_x, &gate_y) {
                            (Tri::Yes(tx), Tri::Yes(ty)) => {
                                status = CondStatus::Satisfied;
                                witness = Some(n);
                                cert = Some(WacxtCertB {
                                    x_divisibility: fx.clone(),
                                    y_divisibility: gy.clone(),
                                    x_gate: tx.clone(),
                                    y_gate: ty.clone(),
                                });
                                break;
                            }
                            (Tri::No(_), _) | (_, Tri::No(_)) => {}
                            _ => undecided = true,
                        }
                    }
                    (Tri::No(_), _) | (_, Tri::No(_)) => break, // no larger n can divide
                    _ => {
                        undecided = true;
                        break;
                    }
                }
            }
            if status != CondStatus::Satisfied && undecided {
                status = CondStatus::Unknown;
            }
            (status, witness, cert)
        }
    };

    // Condition (c): [o(psi)] nonzero and the extension spectrum of the
    // target equals its base spectrum.
    let (cond_c, cond_c_branch, cert_c) = match &o_psi {
        Tri::Yes(_) => (CondStatus::Refuted, None, None),
        Tri::Unknown { .. } => (CondStatus::Unknown, None, None),
        Tri::No(_) => {
            let o_fn: ZmCocycle = psi.orientation_function();
            let rep = extension::ps_extension(dy, &o_fn, p_max, bound)?;
            let status = match rep.branch {
                SpectrumBranch::Doubled { .. } => CondStatus::Refuted,
                SpectrumBranch::TrivialClass => CondStatus::Refuted, // inconsistent with nonzero class
                SpectrumBranch::InfinitelyDivisible | SpectrumBranch::GateFails { .. } => {
                    CondStatus::Satisfied
                }
            };
            (status, Some(rep.branch.clone()), Some(rep))
        }
    };

    let verdict = if containment_obstruction.is_some() {
        WacxtVerdict::No
    } else if !containment_decided {
        WacxtVerdict::Unknown
    } else if cond_a == CondStatus::Satisfied {
        WacxtVerdict::ConditionA
    } else if cond_b == CondStatus::Satisfied {
        WacxtVerdict::ConditionB
    } else if cond_c == CondStatus::Satisfied {
        WacxtVerdict::ConditionC
    } else if cond_a == CondStatus::Refuted
        && cond_b == CondStatus::Refuted
        && cond_c == CondStatus::Refuted
    {
        WacxtVerdict::No
    } else {
        WacxtVerdict::Unknown
    };

    Ok(WacxtDecision {
        ps_table,
        containment_obstruction,
        containment_decided,
        cond_a,
        cert_a,
        cond_b,
        cond_b_n,
        cert_b,
        cond_c,
        cond_c_branch,
        cert_c,
        verdict,
    })
}

/// Represent a divisibility quotient vector as a mod-2 function on base
/// cells.
fn quotient_as_mod2(
    d: &OrderedBratteliDiagram,
    cert: &kzero::DivisibilityCert,
) -> Result<ModCellFunction> {
    let mut f = kzero::CellFunction::zero(d, cert.level)?;
    for (v, &q) in cert.quotient.iter().enumerate() {
        f.values[v][0] = q;
    }
    Ok(ModCellFunction::from_cell_function(&f, 2))
}

// ---------------------------------------------------------------------------
// Skew orbits
// ---------------------------------------------------------------------------

/// Exact trajectory of `(x, t)` under `(x, t) -> (alpha x, phi_x(t))` for
/// the given number of steps. The path must be deep enough to resolve the
/// cocycle and every successor taken.
pub fn skew_orbit(
    d: &OrderedBratteliDiagram,
    x: &PathPrefix,
    t: TorusPoint,
    phi: &CircleCocycle,
    steps: usize,
) -> Result<Vec<(PathPrefix, TorusPoint)>> {
    if x.depth() < phi.level {
        return Err(Error::contract("path shallower than the cocycle level"));
    }
    x.validate(d)?;
    let mut out = vec![(x.clone(), t)];
    let mut cur = x.clone();
    let mut cur_t = t;
    for step in 0..steps {
        let cell = cur.truncate(phi.level).cell(d)?;
        cur_t = phi.value(&cell).apply(cur_t);
        cur = cur
            .successor(d)?
            .ok_or_else(|| Error::depth(format!("orbit left the finite window at step {step}")))?;
        out.push((cur.clone(), cur_t));
    }
    Ok(out)
}
