//! Command line front end: define systems and cocycles from files, run the
//! decision procedures and syntheses, and emit deterministic reports.
//!
//! Exit codes: 0 = decided, 2 = undecided (bound exhausted), 1 = error.
//!
//! Structured output prints exactly two JSON lines: the metadata object
//! (tool version, input digests, timing) and the verdict object. The
//! verdict line is byte-identical across runs on identical inputs; all
//! numeric fields in verdicts are exact integers or rational strings.

mod check;
mod render;
mod verdicts;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use cantordyn::bratteli::OrderedBratteliDiagram;
use cantordyn::circle::CircleCocycle;
use cantordyn::extension::ZmCocycle;
use cantordyn::io as fmt_io;
use cantordyn::rational::{parse_rat, Rat};

#[derive(Parser)]
#[command(name = "cantordyn", version, about = "Exact toolkit for Cantor minimal systems and their circle skew products")]
struct Cli {
    /// Re-verify the certificates embedded in a previously written
    /// structured report, without re-running any search.
    #[arg(long, global = true, value_name = "REPORT")]
    check_certificate: Option<PathBuf>,

    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,

    /// Level bound for semi-decisions.
    #[arg(long, global = true, default_value_t = 14)]
    bound: usize,

    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Structured,
}

#[derive(Subcommand)]
enum Command {
    /// Validate a diagram: degrees, ordering extremes, positivity window.
    Validate {
        #[arg(long)]
        diagram: PathBuf,
        #[arg(long, default_value_t = 6)]
        depth: usize,
    },
    /// Periodic spectrum of a system up to a bound.
    Spectrum {
        #[arg(long)]
        diagram: PathBuf,
        #[arg(long, default_value_t = 8)]
        pmax: u64,
    },
    /// Weak approximate conjugacy of two Cantor systems (spectrum test).
    DecideWac {
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        y: PathBuf,
        #[arg(long, default_value_t = 8)]
        pmax: u64,
    },
    /// Synthesize a conjugating map carrying the source dynamics onto the
    /// target's lumped level partition, and verify it exactly.
    Synthesize {
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        y: PathBuf,
        /// Target level of the Y system.
        #[arg(long)]
        level: usize,
    },
    /// Weak approximate conjugacy of two circle skew products.
    DecideWacxt {
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        phi: PathBuf,
        #[arg(long)]
        y: PathBuf,
        #[arg(long)]
        psi: PathBuf,
        #[arg(long, default_value_t = 8)]
        pmax: u64,
    },
    /// Straighten an orientation-preserving cocycle to rotations.
    Straighten {
        #[arg(long)]
        diagram: PathBuf,
        #[arg(long)]
        cocycle: PathBuf,
    },
    /// Build the eta correction for rotation cocycles over a synthesized
    /// matching, with the exact deviation bound.
    Eta {
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        xi: PathBuf,
        #[arg(long)]
        y: PathBuf,
        #[arg(long)]
        zeta: PathBuf,
        /// Target level of the Y system.
        #[arg(long)]
        level: usize,
        /// Exact rational tolerance, e.g. 1/5.
        #[arg(long)]
        epsilon: String,
    },
    /// Build the omega correction for isometric cocycles over a synthesized
    /// matching, with the exact per-tower deviation bound.
    Omega {
        #[arg(long)]
        x: PathBuf,
        #[arg(long)]
        phi: PathBuf,
        #[arg(long)]
        y: PathBuf,
        #[arg(long)]
        psi: PathBuf,
        #[arg(long)]
        level: usize,
    },
    /// The parity-constrained coin problem: threshold and witnesses.
    Combina {
        /// Comma-separated generators, e.g. 2,3.
        #[arg(long)]
        m: String,
        /// Comma-separated parities, e.g. 1,0.
        #[arg(long)]
        chi: String,
        /// Optionally solve one instance `n,parity`.
        #[arg(long)]
        solve: Option<String>,
    },
    /// Torsion of the extension group relative to the embedded base group.
    ExtensionTorsion {
        #[arg(long)]
        diagram: PathBuf,
        #[arg(long)]
        cocycle: PathBuf,
        #[arg(long, default_value_t = 2)]
        start_level: usize,
        #[arg(long, default_value_t = 4)]
        levels: usize,
    },
    /// Periodic spectrum of a Z_2 extension, computed two ways.
    ExtensionSpectrum {
        #[arg(long)]
        diagram: PathBuf,
        #[arg(long)]
        cocycle: PathBuf,
        #[arg(long, default_value_t = 8)]
        pmax: u64,
    },
    /// Exact skew-product orbit of a cylinder point.
    Orbit {
        #[arg(long)]
        diagram: PathBuf,
        #[arg(long)]
        cocycle: PathBuf,
        /// Depth of the path prefix.
        #[arg(long)]
        depth: usize,
        #[arg(long, default_value_t = 0)]
        tower: usize,
        #[arg(long, default_value_t = 1)]
        floor: u64,
        /// Starting circle coordinate, e.g. 1/7.
        #[arg(long, default_value = "0/1")]
        t: String,
        #[arg(long, default_value_t = 10)]
        steps: usize,
    },
    /// Render a structured report as text.
    Explain {
        #[arg(long)]
        report: PathBuf,
        /// 0 = verdict lines, 1 = certificates, 2 = everything.
        #[arg(long, default_value_t = 1)]
        verbosity: u8,
    },
}

/// An input file with its content digest, recorded in the report.
#[derive(Clone, serde::Serialize, serde::Deserialize)]
pub struct InputRecord {
    pub role: String,
    pub path: String,
    pub sha256: String,
    pub content: String,
}

pub fn read_input(role: &str, path: &Path) -> anyhow::Result<(String, InputRecord)> {
    let content =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let mut hasher = Sha256::new();
    hasher.update(content.as_bytes());
    let sha256 = hex_string(&hasher.finalize());
    Ok((
        content.clone(),
        InputRecord {
            role: role.to_string(),
            path: path.display().to_string(),
            sha256,
            content,
        },
    ))
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn load_diagram(role: &str, path: &Path) -> anyhow::Result<(OrderedBratteliDiagram, InputRecord)> {
    let (text, rec) = read_input(role, path)?;
    let d = fmt_io::parse_diagram(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok((d, rec))
}

pub fn load_circle_cocycle(role: &str, path: &Path) -> anyhow::Result<(CircleCocycle, InputRecord)> {
    let (text, rec) = read_input(role, path)?;
    let c = fmt_io::parse_circle_cocycle(&text)
        .with_context(|| format!("parsing {}", path.display()))?;
    Ok((c, rec))
}

pub fn load_zm_cocycle(role: &str, path: &Path) -> anyhow::Result<(ZmCocycle, InputRecord)> {
    let (text, rec) = read_input(role, path)?;
    let c =
        fmt_io::parse_zm_cocycle(&text).with_context(|| format!("parsing {}", path.display()))?;
    Ok((c, rec))
}

pub fn parse_rational(s: &str) -> anyhow::Result<Rat> {
    parse_rat(s).with_context(|| format!("`{s}` is not an exact rational (use p/q)"))
}

/// The full report: metadata plus the deterministic verdict.
#[derive(serde::Serialize, serde::Deserialize)]
pub struct Report {
    pub meta: Meta,
    pub verdict: verdicts::Verdict,
}

#[derive(serde::Serialize, serde::Deserialize)]
pub struct Meta {
    pub tool: String,
    pub version: String,
    pub command_line: Vec<String>,
    pub inputs: Vec<InputRecord>,
    pub timing_ms: u128,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    if let Some(report_path) = &cli.check_certificate {
        let text = std::fs::read_to_string(report_path)
            .with_context(|| format!("reading {}", report_path.display()))?;
        let report = parse_report(&text)?;
        let outcome = check::check_certificates(&report, cli.bound)?;
        for line in &outcome.lines {
            println!("{line}");
        }
        return Ok(if outcome.all_ok { ExitCode::from(0) } else { ExitCode::from(1) });
    }

    let Some(command) = cli.command else {
        bail!("a subcommand is required (or --check-certificate <report>)");
    };

    if let Command::Explain { report, verbosity } = &command {
        let text = std::fs::read_to_string(report)
            .with_context(|| format!("reading {}", report.display()))?;
        let parsed = parse_report(&text)?;
        print!("{}", render::render(&parsed, *verbosity));
        return Ok(ExitCode::from(0));
    }

    let started = std::time::Instant::now();
    let (verdict, inputs) = verdicts::execute(&command, cli.bound)?;
    let exit = verdict.exit_code();
    let report = Report {
        meta: Meta {
            tool: "cantordyn".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command_line: std::env::args().collect(),
            inputs,
            timing_ms: started.elapsed().as_millis(),
        },
        verdict,
    };
    match cli.format {
        Format::Structured => {
            println!("{}", serde_json::to_string(&report.meta)?);
            println!("{}", serde_json::to_string(&report.verdict)?);
        }
        Format::Text => {
            print!("{}", render::render(&report, 1));
        }
    }
    Ok(ExitCode::from(exit))
}

/// Reports are stored as two JSON lines (meta, verdict) or as one JSON
/// object; accept both.
pub fn parse_report(text: &str) -> anyhow::Result<Report> {
    if let Ok(report) = serde_json::from_str::<Report>(text) {
        return Ok(report);
    }
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let meta_line = lines.next().context("empty report file")?;
    let verdict_line = lines.next().context("report file is missing the verdict line")?;
    let meta: Meta = serde_json::from_str(meta_line).context("parsing report meta")?;
    let verdict: verdicts::Verdict =
        serde_json::from_str(verdict_line).context("parsing report verdict")?;
    Ok(Report { meta, verdict })
}
