//! Runs a reduced verification suite in-process and prints the summary.
//!
//! cargo run --release --example verify_suite

use toda_lax::config::RunConfig;
use toda_lax::verify::cmd_verify;

fn main() -> toda_lax::Result<()> {
    let cfg = RunConfig {
        n_max: 4,
        random_points: 50,
        ..Default::default()
    };
    let report = cmd_verify(&cfg)?;
    print!("{}", report.summary());
    std::process::exit(if report.passed() { 0 } else { 1 });
}
