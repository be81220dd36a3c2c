//! Command-line surface: `check` runs suites on a scenario, `derive` prints
//! evaluated tensors at a point.

mod report;
mod scenario;
mod suite;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

pub use report::{
    emit_report, load_report, owning_suite, ConventionRecord, Format, ReportEntry, SuiteReport, SuiteSummary,
};
pub use scenario::{
    build_scenario, load_scenario, scenario_from_str, ConnectionSpec, Expectation, Scenario, ScenarioFile,
    StructureSpec, Suite, DEFAULT_SAMPLES, DEFAULT_TOLERANCE, SCHEMA_VERSION, SYMBOLIC_INVERSE_MAX,
};
pub use suite::run_suites;

use crate::chart::{nijenhuis, riemann, Tensor};
use crate::error::{Error, Result};
use crate::genconn::{gen_nijenhuis_basis, BaseJets, GenKind};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "metallic-lab", version, about = "Check metallic and generalized structures on a chart")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run verification suites on a scenario file.
    Check {
        scenario: PathBuf,
        /// Restrict to these suites (repeatable).
        #[arg(long = "suite", value_name = "NAME")]
        suites: Vec<String>,
        #[arg(long)]
        samples: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "tol")]
        tolerance: Option<f64>,
        #[arg(long, value_enum, default_value_t = FormatArg::Human)]
        format: FormatArg,
    },
    /// Print an evaluated tensor at one point.
    Derive {
        scenario: PathBuf,
        #[arg(long, value_enum)]
        what: What,
        /// Comma-separated coordinates.
        #[arg(long, value_name = "COORDS", allow_hyphen_values = true)]
        at: String,
        /// Generalized structure for `gen-nijenhuis`.
        #[arg(long, value_enum, default_value_t = StructureArg::Jm)]
        structure: StructureArg,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum FormatArg {
    Human,
    Machine,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum What {
    Christoffel,
    Curvature,
    Nijenhuis,
    GenNijenhuis,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum StructureArg {
    Jm,
    Jp,
    Jc,
}

/// Parses `args` (including the program name) and runs the command. Output
/// goes to stdout, diagnostics to stderr; the return value is the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_PASS };
        }
    };
    match execute(cli.command) {
        Ok((text, code)) => {
            print!("{text}");
            code
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_INPUT
        }
    }
}

fn execute(cmd: Command) -> Result<(String, i32)> {
    match cmd {
        Command::Check {
            scenario,
            suites,
            samples,
            seed,
            tolerance,
            format,
        } => {
            let suites = if suites.is_empty() {
                None
            } else {
                let mut out = Vec::new();
                let mut bad = Vec::new();
                for s in &suites {
                    match Suite::from_name(s) {
                        Some(x) if !out.contains(&x) => out.push(x),
                        Some(_) => {}
                        None => bad.push(format!("unknown suite `{s}`")),
                    }
                }
                if !bad.is_empty() {
                    return Err(Error::Validation(bad));
                }
                Some(out)
            };
            let sc = load_scenario(&scenario)?.with_overrides(suites, samples, seed, tolerance)?;
            let report = run_suites(&sc);
            let format = match format {
                FormatArg::Human => Format::Human,
                FormatArg::Machine => Format::Machine,
            };
            Ok((emit_report(&report, format), report.exit_code()))
        }
        Command::Derive {
            scenario,
            what,
            at,
            structure,
        } => {
            let sc = load_scenario(&scenario)?;
            let point = parse_point(&at, sc.dim())?;
            let kind = match structure {
                StructureArg::Jm => GenKind::Jm,
                StructureArg::Jp => GenKind::Jp,
                StructureArg::Jc => GenKind::Jc,
            };
            Ok((derive(&sc, what, kind, &point)?, EXIT_PASS))
        }
    }
}

pub fn parse_point(text: &str, n: usize) -> Result<Vec<f64>> {
    let mut problems = Vec::new();
    let pt: Vec<f64> = text
        .split(',')
        .map(|s| {
            s.trim().parse::<f64>().unwrap_or_else(|_| {
                problems.push(format!("`{}` is not a number", s.trim()));
                f64::NAN
            })
        })
        .collect();
    if pt.len() != n {
        problems.push(format!("expected {n} coordinates, got {}", pt.len()));
    }
    if problems.is_empty() {
        Ok(pt)
    } else {
        Err(Error::Validation(problems))
    }
}

/// Evaluated tensor at `point`, one nonzero component per line.
pub fn derive(s: &Scenario, what: What, kind: GenKind, point: &[f64]) -> Result<String> {
    let samples = s.sample_points();
    let gamma = s.connection(&samples)?;
    let mut out = String::new();
    let _ = writeln!(out, "scenario {} at {:?}", s.name, point);
    let (label, t, split): (&str, Tensor, Option<usize>) = match what {
        What::Christoffel => ("Gamma", gamma.values(point)?, None),
        What::Curvature => ("R", riemann(&gamma).at(point)?, None),
        What::Nijenhuis => ("N", nijenhuis(&s.j).at(point)?, None),
        What::GenNijenhuis => {
            let jet = BaseJets::new(&s.j, &s.metric)?.at(point)?.structure(kind);
            ("N", gen_nijenhuis_basis(&gamma.values(point)?, &jet), Some(s.dim()))
        }
    };
    let _ = writeln!(out, "{}", index_legend(what, kind));
    write_components(&mut out, label, &t, split);
    Ok(out)
}

fn index_legend(what: What, kind: GenKind) -> String {
    match what {
        What::Christoffel => "Gamma[k,i,j]: nabla_{d_i} d_j = Gamma[k,i,j] d_k".into(),
        What::Curvature => "R[l,i,j,k]: R(d_i, d_j) d_k = R[l,i,j,k] d_l".into(),
        What::Nijenhuis => "N[k,i,j]: N_J(d_i, d_j) = N[k,i,j] d_k".into(),
        What::GenNijenhuis => format!(
            "N[c,a,b]: {kind:?} on basis sections; indices 1..n are d_i, n+1..2n are dx^i"
        ),
    }
}

fn write_components(out: &mut String, label: &str, t: &Tensor, split: Option<usize>) {
    let n = t.dim();
    let rank = t.rank();
    let mut idx = vec![0usize; rank];
    let mut any = false;
    loop {
        let v = t.get(&idx);
        if v != 0.0 {
            any = true;
            let names: Vec<String> = idx
                .iter()
                .map(|i| match split {
                    Some(m) if *i >= m => format!("{}*", i - m + 1),
                    _ => (i + 1).to_string(),
                })
                .collect();
            let _ = writeln!(out, "{label}[{}] = {v:.16e}", names.join(","));
        }
        let mut pos = rank;
        loop {
            if pos == 0 {
                if !any {
                    let _ = writeln!(out, "all components vanish");
                }
                return;
            }
            pos -= 1;
            idx[pos] += 1;
            if idx[pos] < n {
                break;
            }
            idx[pos] = 0;
        }
    }
}
