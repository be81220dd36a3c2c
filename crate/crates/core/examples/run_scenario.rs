//! Run a scenario file and print the report.
//!
//! `cargo run --example run_scenario -- scenarios/sphere-diagJ.json [human|machine]`

use metallic_lab::cli::{emit_report, load_scenario, run_suites, Format};

fn main() {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/flat-golden.json").to_string());
    let format = match args.next().as_deref() {
        Some("machine") => Format::Machine,
        _ => Format::Human,
    };
    let scenario = match load_scenario(&path) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{e}");
            std::process::exit(2);
        }
    };
    let report = run_suites(&scenario);
    print!("{}", emit_report(&report, format));
    std::process::exit(report.exit_code());
}
