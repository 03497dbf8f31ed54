//! Text rendering of reports: the `explain` view. Verbosity 0 prints the
//! verdict lines, 1 adds certificate tables, 2 prints everything down to
//! the raw per-cell data (no information loss).

use crate::verdicts::{case_name, Verdict};
use crate::Report;
use cantordyn::circle::{CondStatus, WacxtVerdict};
use cantordyn::conjsynth::Synthesis;
use std::fmt::Write as _;

pub fn render(report: &Report, verbosity: u8) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "== verdict ==");
    render_verdict(&mut out, &report.verdict, verbosity);
    if verbosity >= 2 {
        // Lossless view: the complete verdict object.
        let _ = writeln!(out, "== verdict (complete) ==");
        let _ = writeln!(
            out,
            "{}",
            serde_json::to_string_pretty(&report.verdict).unwrap_or_default()
        );
    }
    let _ = writeln!(out, "== meta ==");
    let _ = writeln!(out, "tool     {} {}", report.meta.tool, report.meta.version);
    for input in &report.meta.inputs {
        let _ = writeln!(out, "input    {} {} sha256={}", input.role, input.path, input.sha256);
    }
    let _ = writeln!(out, "timing   {} ms", report.meta.timing_ms);
    out
}

fn render_verdict(out: &mut String, v: &Verdict, verbosity: u8) {
    match v {
        Verdict::Validate { depth, report, all_passed } => {
            let _ = writeln!(out, "validate: depth {depth}, all checks passed: {all_passed}");
            for c in &report.checks {
                let _ = writeln!(out, "  [{}] {:24} {}", if c.passed { "ok" } else { "XX" }, c.name, c.detail);
            }
            match report.positivity_window {
                Some(w) => {
                    let _ = writeln!(out, "  positivity window: {w}");
                }
                None => {
                    let _ = writeln!(out, "  positivity window: not found up to depth");
                }
            }
        }
        Verdict::Spectrum { pmax, rows, yes, undecided } => {
            let _ = writeln!(out, "spectrum up to {pmax}: yes = {yes:?}, undecided = {undecided:?}");
            if verbosity >= 1 {
                for r in rows {
                    let mut line = format!("  p = {:3}  {}", r.p, r.verdict);
                    if let Some(c) = &r.yes_cert {
                        let _ = write!(line, "  (level {}, |U| = {} cells)", c.level, c.base_set.len());
                        if verbosity >= 2 {
                            let _ = write!(line, " U = {:?}", c.base_set.cells);
                        }
                    }
                    if let Some(c) = &r.no_cert {
                        let _ = write!(
                            line,
                            "  (mod-{} cycle from level {}, pre-period {}, period {})",
                            c.modulus, c.entry_level, c.pre_period, c.period
                        );
                    }
                    let _ = writeln!(out, "{line}");
                }
            }
        }
        Verdict::DecideWac {
            pmax,
            x_rows,
            y_rows,
            forward_obstruction,
            backward_obstruction,
            weakly_approximately_conjugate,
        } => {
            let _ = writeln!(
                out,
                "decide-wac: weakly approximately conjugate: {weakly_approximately_conjugate}"
            );
            if let Some(p) = forward_obstruction {
                let _ = writeln!(out, "  obstruction: p = {p} in PS(y) but certified not in PS(x)");
            }
            if let Some(p) = backward_obstruction {
                let _ = writeln!(out, "  obstruction: p = {p} in PS(x) but certified not in PS(y)");
            }
            if verbosity >= 1 {
                let _ = writeln!(out, "  {:>4} {:>8} {:>8}", "p", "PS(x)", "PS(y)");
                for p in 1..=*pmax {
                    let xr = &x_rows[(p - 1) as usize];
                    let yr = &y_rows[(p - 1) as usize];
                    let _ = writeln!(out, "  {:>4} {:>8} {:>8}", p, xr.verdict, yr.verdict);
                }
            }
        }
        Verdict::Synthesize { level, outcome, verification } => match outcome {
            Synthesis::Synthesized(map) => {
                let ok = verification.as_ref().map(|r| r.all_pass()).unwrap_or(false);
                let _ = writeln!(
                    out,
                    "synthesize: level {level}: map built (X level {}, Y level {}); exact verification: {}",
                    map.x_level,
                    map.y_level,
                    if ok { "all members pass" } else { "FAILED" }
                );
                if verbosity >= 1 {
                    let _ = writeln!(out, "  heights P = {:?}", map.plan.p_heights);
                    let _ = writeln!(out, "  heights Q = {:?}, copies b = {:?}", map.plan.q_heights, map.plan.b);
                    for (v, segs) in map.plan.segments.iter().enumerate() {
                        let packed: Vec<String> = segs
                            .iter()
                            .map(|s| format!("Q{}#{}@{}", s.q_tower, s.copy, s.offset + 1))
                            .collect();
                        let _ = writeln!(out, "  pi: tower {v} <- [{}]", packed.join(", "));
                    }
                    if let Some(rep) = verification {
                        for e in &rep.entries {
                            let _ = writeln!(
                                out,
                                "  [{}] sigma alpha sigma^-1({}) = beta({})",
                                if e.holds { "ok" } else { "XX" },
                                e.member,
                                e.member
                            );
                        }
                    }
                }
            }
            Synthesis::Refused { offending_p, certificate } => {
                let _ = writeln!(
                    out,
                    "synthesize: refused: p = {offending_p} is certified outside the source spectrum"
                );
                if verbosity >= 1 {
                    let _ = writeln!(
                        out,
                        "  (mod-{} cycle from level {}, pre-period {}, period {})",
                        certificate.modulus,
                        certificate.entry_level,
                        certificate.pre_period,
                        certificate.period
                    );
                }
            }
            Synthesis::Unknown { bound } => {
                let _ = writeln!(out, "synthesize: undecided (bound {bound} exhausted)");
            }
        },
        Verdict::DecideWacxt { pmax, decision } => {
            let verdict = match decision.verdict {
                WacxtVerdict::ConditionA => "yes, via condition (a)",
                WacxtVerdict::ConditionB => "yes, via condition (b)",
                WacxtVerdict::ConditionC => "yes, via condition (c)",
                WacxtVerdict::No => "no",
                WacxtVerdict::Unknown => "unknown",
            };
            let _ = writeln!(out, "decide-wacxt: {verdict}");
            if let Some(p) = decision.containment_obstruction {
                let _ = writeln!(out, "  spectrum containment fails at p = {p}");
            }
            let st = |s: &CondStatus| match s {
                CondStatus::Satisfied => "satisfied",
                CondStatus::Refuted => "refuted",
                CondStatus::Unknown => "unknown",
            };
            let _ = writeln!(out, "  (a) both orientation classes zero: {}", st(&decision.cond_a));
            let _ = writeln!(
                out,
                "  (b) common dyadic exponent with matching classes: {}{}",
                st(&decision.cond_b),
                decision.cond_b_n.map(|n| format!(" (n = {n})")).unwrap_or_default()
            );
            let _ = writeln!(
                out,
                "  (c) extension spectrum equals base spectrum: {}{}",
                st(&decision.cond_c),
                decision
                    .cond_c_branch
                    .as_ref()
                    .map(|b| format!(" (branch {b:?})"))
                    .unwrap_or_default()
            );
            if verbosity >= 1 {
                let _ = writeln!(out, "  {:>4} {:>8} {:>8}", "p", "PS(y)", "PS(x)");
                for (p, sy, sx) in decision.ps_table.iter().take(*pmax as usize) {
                    let _ = writeln!(out, "  {p:>4} {sy:>8} {sx:>8}");
                }
            }
        }
        Verdict::Straighten { result } => {
            let _ = writeln!(
                out,
                "straighten: corrector and rotation cocycle built at level {} (identity verified on every cell)",
                result.level
            );
            if verbosity >= 2 {
                for (v, row) in result.xi.iter().enumerate() {
                    for (k0, rot) in row.iter().enumerate() {
                        let _ = writeln!(
                            out,
                            "  cell ({v},{}) psi_flip={} xi={}",
                            k0 + 1,
                            u8::from(result.psi_flip[v][k0]),
                            rot
                        );
                    }
                }
            }
        }
        Verdict::Eta { epsilon, eta, sup_deviation, .. } => {
            let _ = writeln!(
                out,
                "eta: sup deviation {sup_deviation} < epsilon {epsilon} (exact, strict)"
            );
            if verbosity >= 1 {
                for (i, (k, lift)) in eta.kappa.iter().zip(&eta.kappa_lift).enumerate() {
                    let _ = writeln!(
                        out,
                        "  tower {i}: h = {}, kappa = {}, lift = {}/{}, deviation = {}/{}",
                        eta.heights[i],
                        k,
                        lift.numer(),
                        lift.denom(),
                        eta.tower_deviation[i].numer(),
                        eta.tower_deviation[i].denom()
                    );
                }
            }
        }
        Verdict::Omega { omega, sup_deviation, strict_bound, .. } => {
            let _ = writeln!(
                out,
                "omega: sup deviation {sup_deviation} < {strict_bound} (exact, strict)"
            );
            if verbosity >= 1 {
                for (i, (k, lift)) in omega.kappa.iter().zip(&omega.kappa_lift).enumerate() {
                    let _ = writeln!(
                        out,
                        "  tower {i}: h = {}, kappa = {}, lift = {}/{}, chi = {:?}",
                        omega.heights[i],
                        k,
                        lift.numer(),
                        lift.denom(),
                        omega.chi[i]
                    );
                }
            }
        }
        Verdict::Combina { m, chi, result, solution } => {
            match (&result.case, result.threshold) {
                (None, _) => {
                    let _ = writeln!(out, "combina: m = {m:?}, chi = {chi:?}: neither hypothesis holds");
                }
                (Some(case), Some(n)) => {
                    let _ = writeln!(
                        out,
                        "combina: m = {m:?}, chi = {chi:?}: {} applies, N = {n} (q = {})",
                        case_name(case),
                        result.q
                    );
                }
                (Some(case), None) => {
                    let _ = writeln!(out, "combina: {} applies, threshold undecided", case_name(case));
                }
            }
            if let Some(sol) = solution {
                match &sol.l {
                    Some(l) => {
                        let _ = writeln!(out, "  solve(n = {}, parity = {}): l = {:?}", sol.n, sol.parity, l);
                    }
                    None => {
                        let _ = writeln!(out, "  solve(n = {}, parity = {}): unsolvable", sol.n, sol.parity);
                    }
                }
            }
        }
        Verdict::ExtensionTorsion { minimal, report } => {
            let _ = writeln!(
                out,
                "extension-torsion: factors {:?} (free rank {}), generator order {:?}, minimal: {:?}",
                report.torsion_factors, report.free_rank, report.f0_order, minimal
            );
            let _ = writeln!(
                out,
                "  generator coboundary identity: {}; stabilized at levels {:?}",
                if report.f0_identity { "holds" } else { "FAILS" },
                report.stable_levels
            );
        }
        Verdict::ExtensionSpectrum { pmax, report } => {
            let _ = writeln!(out, "extension-spectrum: branch {:?}", report.branch);
            if verbosity >= 1 {
                let _ = writeln!(out, "  {:>4} {:>8} {:>10} {:>8}", "p", "base", "predicted", "direct");
                for row in report.table.iter().take(*pmax as usize) {
                    let _ = writeln!(
                        out,
                        "  {:>4} {:>8} {:>10} {:>8}",
                        row.p, row.base, row.predicted, row.direct
                    );
                }
            }
        }
        Verdict::Orbit { steps, .. } => {
            let _ = writeln!(out, "orbit: {} steps", steps.len().saturating_sub(1));
            let _ = writeln!(out, "  {:>4} {:>6} {:>8} {:>12} {:>10}", "step", "tower", "floor", "t", "~t");
            for s in steps {
                let _ = writeln!(
                    out,
                    "  {:>4} {:>6} {:>8} {:>12} {:>10}",
                    s.step, s.tower, s.floor, s.t, s.t_decimal
                );
            }
        }
    }
}
