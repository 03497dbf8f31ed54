//! Command execution: every subcommand produces a typed, deterministic,
//! serializable verdict embedding its certificates.

use crate::{
    load_circle_cocycle, load_diagram, load_zm_cocycle, parse_rational, Command, InputRecord,
};
use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};

use cantordyn::bratteli::{self, path_of_cell, Cell, ValidationReport};
use cantordyn::circle::{
    self, decide_wacxt, eta_from_partition_map, omega_from_plan, skew_orbit, straighten, Combina,
    CombinaCase, EtaFunction, OmegaResult, Straightening, WacxtDecision,
};
use cantordyn::conjsynth::{self, ConjugacyReport, PartitionMap, Synthesis};
use cantordyn::extension::{self, PsExtensionReport, TorsionReport};
use cantordyn::kzero::{self, ModCycleCert, SpectrumCert};
use cantordyn::rational::{format_rat, TorusPoint};

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Validate {
        depth: usize,
        report: ValidationReport,
        all_passed: bool,
    },
    Spectrum {
        pmax: u64,
        rows: Vec<SpectrumRow>,
        yes: Vec<u64>,
        undecided: Vec<u64>,
    },
    DecideWac {
        pmax: u64,
        x_rows: Vec<SpectrumRow>,
        y_rows: Vec<SpectrumRow>,
        /// Smallest p certified in PS(beta) but not PS(alpha), if any.
        forward_obstruction: Option<u64>,
        /// Smallest p certified in PS(alpha) but not PS(beta), if any.
        backward_obstruction: Option<u64>,
        /// yes / no / unknown for PS equality (weak approximate conjugacy).
        weakly_approximately_conjugate: String,
    },
    Synthesize {
        level: usize,
        outcome: Synthesis,
        verification: Option<ConjugacyReport>,
    },
    DecideWacxt {
        pmax: u64,
        decision: WacxtDecision,
    },
    Straighten {
        result: Straightening,
    },
    Eta {
        epsilon: String,
        map: Box<PartitionMap>,
        eta: EtaFunction,
        sup_deviation: String,
    },
    Omega {
        map: Box<PartitionMap>,
        omega: OmegaResult,
        sup_deviation: String,
        strict_bound: String,
    },
    Combina {
        m: Vec<u64>,
        chi: Vec<u64>,
        result: Combina,
        solution: Option<CombinaSolution>,
    },
    ExtensionTorsion {
        minimal: Option<bool>,
        report: TorsionReport,
    },
    ExtensionSpectrum {
        pmax: u64,
        report: PsExtensionReport,
    },
    Orbit {
        depth: usize,
        steps: Vec<OrbitStep>,
    },
}

#[derive(Serialize, Deserialize)]
pub struct SpectrumRow {
    pub p: u64,
    pub verdict: String,
    pub yes_cert: Option<SpectrumCert>,
    pub no_cert: Option<ModCycleCert>,
}

#[derive(Serialize, Deserialize)]
pub struct CombinaSolution {
    pub n: u64,
    pub parity: u64,
    pub l: Option<Vec<u64>>,
}

#[derive(Serialize, Deserialize)]
pub struct OrbitStep {
    pub step: usize,
    pub tower: usize,
    pub floor: u64,
    /// Exact circle coordinate as `p/q`.
    pub t: String,
    /// Decimal convenience column (display only; verdict-grade data is the
    /// exact rational).
    pub t_decimal: String,
}

impl Verdict {
    /// 0 = decided, 2 = undecided.
    pub fn exit_code(&self) -> u8 {
        let undecided = match self {
            Verdict::Validate { .. } => false,
            Verdict::Spectrum { undecided, .. } => !undecided.is_empty(),
            Verdict::DecideWac { weakly_approximately_conjugate, .. } => {
                weakly_approximately_conjugate == "unknown"
            }
            Verdict::Synthesize { outcome, .. } => matches!(outcome, Synthesis::Unknown { .. }),
            Verdict::DecideWacxt { decision, .. } => {
                decision.verdict == circle::WacxtVerdict::Unknown
            }
            Verdict::Straighten { .. } => false,
            Verdict::Eta { .. } | Verdict::Omega { .. } => false,
            Verdict::Combina { result, .. } => result.case.is_some() && result.threshold.is_none(),
            Verdict::ExtensionTorsion { report, .. } => report.f0_order.is_none(),
            Verdict::ExtensionSpectrum { report, .. } => {
                report.table.iter().any(|r| r.direct == "unknown")
            }
            Verdict::Orbit { .. } => false,
        };
        if undecided {
            2
        } else {
            0
        }
    }
}

fn spectrum_rows(
    d: &bratteli::OrderedBratteliDiagram,
    pmax: u64,
    bound: usize,
) -> anyhow::Result<Vec<SpectrumRow>> {
    let mut rows = Vec::new();
    for (p, ans) in kzero::periodic_spectrum(d, pmax, bound)? {
        rows.push(SpectrumRow {
            p,
            verdict: ans.verdict_str().to_string(),
            yes_cert: ans.yes().cloned(),
            no_cert: ans.no().cloned(),
        });
    }
    Ok(rows)
}

pub fn execute(command: &Command, bound: usize) -> anyhow::Result<(Verdict, Vec<InputRecord>)> {
    match command {
        Command::Validate { diagram, depth } => {
            let (d, rec) = load_diagram("diagram", diagram)?;
            let report = bratteli::validate(&d, *depth)?;
            let all_passed = report.all_passed();
            Ok((Verdict::Validate { depth: *depth, report, all_passed }, vec![rec]))
        }
        Command::Spectrum { diagram, pmax } => {
            let (d, rec) = load_diagram("diagram", diagram)?;
            let rows = spectrum_rows(&d, *pmax, bound)?;
            let yes = rows.iter().filter(|r| r.verdict == "yes").map(|r| r.p).collect();
            let undecided = rows.iter().filter(|r| r.verdict == "unknown").map(|r| r.p).collect();
            Ok((Verdict::Spectrum { pmax: *pmax, rows, yes, undecided }, vec![rec]))
        }
        Command::DecideWac { x, y, pmax } => {
            let (dx, rx) = load_diagram("x", x)?;
            let (dy, ry) = load_diagram("y", y)?;
            let x_rows = spectrum_rows(&dx, *pmax, bound)?;
            let y_rows = spectrum_rows(&dy, *pmax, bound)?;
            let mut forward = None; // in PS(y) but not PS(x)
            let mut backward = None; // in PS(x) but not PS(y)
            let mut undecided = false;
            for (xr, yr) in x_rows.iter().zip(&y_rows) {
                if yr.verdict == "yes" && xr.verdict == "no" && forward.is_none() {
                    forward = Some(xr.p);
                }
                if xr.verdict == "yes" && yr.verdict == "no" && backward.is_none() {
                    backward = Some(xr.p);
                }
                if xr.verdict == "unknown" || yr.verdict == "unknown" {
                    undecided = true;
                }
            }
            let wac = if forward.is_some() || backward.is_some() {
                "no"
            } else if undecided {
                "unknown"
            } else {
                "yes"
            };
            Ok((
                Verdict::DecideWac {
                    pmax: *pmax,
                    x_rows,
                    y_rows,
                    forward_obstruction: forward,
                    backward_obstruction: backward,
                    weakly_approximately_conjugate: wac.to_string(),
                },
                vec![rx, ry],
            ))
        }
        Command::Synthesize { x, y, level } => {
            let (dx, rx) = load_diagram("x", x)?;
            let (dy, ry) = load_diagram("y", y)?;
            require_minimality_certificate(&dx, "x")?;
            require_minimality_certificate(&dy, "y")?;
            let outcome = conjsynth::synthesize_conjugator(&dx, &dy, *level, bound)?;
            let verification = match &outcome {
                Synthesis::Synthesized(map) => {
                    Some(conjsynth::verify_approx_conjugacy(&dx, &dy, map, 8)?)
                }
                _ => None,
            };
            Ok((Verdict::Synthesize { level: *level, outcome, verification }, vec![rx, ry]))
        }
        Command::DecideWacxt { x, phi, y, psi, pmax } => {
            let (dx, rx) = load_diagram("x", x)?;
            let (cphi, rphi) = load_circle_cocycle("phi", phi)?;
            let (dy, ry) = load_diagram("y", y)?;
            let (cpsi, rpsi) = load_circle_cocycle("psi", psi)?;
            cphi.check_shape(&dx)?;
            cpsi.check_shape(&dy)?;
            require_minimality_certificate(&dx, "x")?;
            require_minimality_certificate(&dy, "y")?;
            let decision = decide_wacxt(&dx, &cphi, &dy, &cpsi, *pmax, bound)?;
            Ok((Verdict::DecideWacxt { pmax: *pmax, decision }, vec![rx, rphi, ry, rpsi]))
        }
        Command::Straighten { diagram, cocycle } => {
            let (d, rd) = load_diagram("diagram", diagram)?;
            let (c, rc) = load_circle_cocycle("cocycle", cocycle)?;
            c.check_shape(&d)?;
            let result = straighten(&d, &c, bound)?;
            Ok((Verdict::Straighten { result }, vec![rd, rc]))
        }
        Command::Eta { x, xi, y, zeta, level, epsilon } => {
            let (dx, rx) = load_diagram("x", x)?;
            let (cxi, rxi) = load_circle_cocycle("xi", xi)?;
            let (dy, ry) = load_diagram("y", y)?;
            let (czeta, rzeta) = load_circle_cocycle("zeta", zeta)?;
            let eps = parse_rational(epsilon)?;
            cxi.check_shape(&dx)?;
            czeta.check_shape(&dy)?;
            if !cxi.is_rotation_only() || !czeta.is_rotation_only() {
                bail!("eta requires rotation-only cocycles (straighten first)");
            }
            let map = match conjsynth::synthesize_conjugator(&dx, &dy, *level, bound)? {
                Synthesis::Synthesized(map) => map,
                Synthesis::Refused { offending_p, .. } => {
                    bail!("synthesis refused: p = {offending_p} is not in the source spectrum")
                }
                Synthesis::Unknown { bound } => bail!("synthesis undecided at bound {bound}"),
            };
            let xi_rows = rotation_rows(&cxi.refine_to(&dx, map.x_level)?);
            let zeta_rows = rotation_rows(&czeta.refine_to(&dy, map.y_level)?);
            let eta = eta_from_partition_map(&dx, &map, &xi_rows, &zeta_rows, eps)?;
            let sup = format_rat(&eta.sup_deviation);
            Ok((
                Verdict::Eta { epsilon: epsilon.clone(), map, eta, sup_deviation: sup },
                vec![rx, rxi, ry, rzeta],
            ))
        }
        Command::Omega { x, phi, y, psi, level } => {
            let (dx, rx) = load_diagram("x", x)?;
            let (cphi, rphi) = load_circle_cocycle("phi", phi)?;
            let (dy, ry) = load_diagram("y", y)?;
            let (cpsi, rpsi) = load_circle_cocycle("psi", psi)?;
            cphi.check_shape(&dx)?;
            cpsi.check_shape(&dy)?;
            let map = match conjsynth::synthesize_conjugator(&dx, &dy, *level, bound)? {
                Synthesis::Synthesized(map) => map,
                Synthesis::Refused { offending_p, .. } => {
                    bail!("synthesis refused: p = {offending_p} is not in the source spectrum")
                }
                Synthesis::Unknown { bound } => bail!("synthesis undecided at bound {bound}"),
            };
            let omega = omega_from_plan(&dx, &dy, &map, &cphi, &cpsi)?;
            let min_h = *map.plan.p_heights.iter().min().unwrap();
            let sup = format_rat(&omega.sup_deviation);
            Ok((
                Verdict::Omega {
                    map,
                    omega,
                    sup_deviation: sup,
                    strict_bound: format!("1/{min_h}"),
                },
                vec![rx, rphi, ry, rpsi],
            ))
        }
        Command::Combina { m, chi, solve } => {
            let m: Vec<u64> = parse_list(m).context("parsing --m")?;
            let chi: Vec<u64> = parse_list(chi).context("parsing --chi")?;
            let result = circle::combina(&m, &chi)?;
            let solution = match solve {
                Some(s) => {
                    let parts: Vec<u64> = parse_list(s).context("parsing --solve")?;
                    if parts.len() != 2 {
                        bail!("--solve expects `n,parity`");
                    }
                    let l = circle::combina_solve(&m, &chi, parts[0], parts[1])?;
                    Some(CombinaSolution { n: parts[0], parity: parts[1] % 2, l })
                }
                None => None,
            };
            Ok((Verdict::Combina { m, chi, result, solution }, vec![]))
        }
        Command::ExtensionTorsion { diagram, cocycle, start_level, levels } => {
            let (d, rd) = load_diagram("diagram", diagram)?;
            let (c, rc) = load_zm_cocycle("cocycle", cocycle)?;
            let sys = extension::build_extension(&d, &c, bound)?;
            let report = extension::torsion_check(&sys, *start_level, *levels, 10)?;
            Ok((Verdict::ExtensionTorsion { minimal: sys.minimal, report }, vec![rd, rc]))
        }
        Command::ExtensionSpectrum { diagram, cocycle, pmax } => {
            let (d, rd) = load_diagram("diagram", diagram)?;
            let (c, rc) = load_zm_cocycle("cocycle", cocycle)?;
            let report = extension::ps_extension(&d, &c, *pmax, bound)?;
            Ok((Verdict::ExtensionSpectrum { pmax: *pmax, report }, vec![rd, rc]))
        }
        Command::Orbit { diagram, cocycle, depth, tower, floor, t, steps } => {
            let (d, rd) = load_diagram("diagram", diagram)?;
            let (c, rc) = load_circle_cocycle("cocycle", cocycle)?;
            c.check_shape(&d)?;
            let t0 = parse_rational(t)?;
            let path = path_of_cell(&d, *depth, Cell { tower: *tower, floor: *floor })?;
            let orbit = skew_orbit(&d, &path, TorusPoint::new(t0), &c, *steps)?;
            let steps = orbit
                .iter()
                .enumerate()
                .map(|(i, (p, tv))| {
                    let cell = p.cell(&d).expect("orbit cells are valid");
                    let rep = tv.rep();
                    OrbitStep {
                        step: i,
                        tower: cell.tower,
                        floor: cell.floor,
                        t: format_rat(&rep),
                        t_decimal: format!("{:.6}", *rep.numer() as f64 / *rep.denom() as f64),
                    }
                })
                .collect();
            Ok((Verdict::Orbit { depth: *depth, steps }, vec![rd, rc]))
        }
        Command::Explain { .. } => unreachable!("handled in main"),
    }
}

/// Decision pipelines apply only to diagrams whose minimality surrogate certifies.
fn require_minimality_certificate(
    d: &bratteli::OrderedBratteliDiagram,
    role: &str,
) -> anyhow::Result<()> {
    let report = bratteli::validate(d, 6)?;
    if !report.minimality_certified() {
        bail!("diagram `{role}` has no strict-positivity window; minimality not certified");
    }
    Ok(())
}

fn rotation_rows(c: &cantordyn::circle::CircleCocycle) -> Vec<Vec<TorusPoint>> {
    c.values.iter().map(|row| row.iter().map(|i| i.rot).collect()).collect()
}

fn parse_list(s: &str) -> anyhow::Result<Vec<u64>> {
    s.split(',')
        .map(|t| t.trim().parse::<u64>().map_err(|e| anyhow::anyhow!("bad number `{t}`: {e}")))
        .collect()
}

pub fn case_name(case: &CombinaCase) -> &'static str {
    match case {
        CombinaCase::Case1 => "case 1",
        CombinaCase::Case2 => "case 2",
    }
}
