//! Run verification suites from the registry and write their reports.
//!
//! `cargo run --release --example verify_suite -- thm2.3 prop4.1`

use hill_birkhoff::verify::{run_suites, write_report, RunConfig};

fn main() -> hill_birkhoff::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let ids: Vec<&str> = if args.is_empty() { vec!["thm2.3", "parseval_actions", "appA_differential"] } else { args.iter().map(|s| s.as_str()).collect() };
    let cfg = RunConfig::default();
    let dir = std::env::temp_dir().join("hill-birkhoff-reports");
    for (id, r) in run_suites(&ids, &cfg) {
        let r = r.map_err(|e| hill_birkhoff::Error::Invalid(format!("{id}: {e}")))?;
        write_report(&r, &dir)?;
        println!("{}", r.summary());
        for c in &r.checks {
            println!("    {:<28} {:>12.4e} {} {:.4e}", c.name, c.value, c.relation, c.threshold);
        }
    }
    println!("reports in {}", dir.display());
    Ok(())
}
