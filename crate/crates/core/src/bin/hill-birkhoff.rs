use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hill_birkhoff::birkhoff::birkhoff_map;
use hill_birkhoff::curve::solve_psi_zeros;
use hill_birkhoff::flow::{evolve_kdv, remainder_table, uniform_times, StepControl};
use hill_birkhoff::frequencies::frequencies;
use hill_birkhoff::spectrum::compute_spectrum;
use hill_birkhoff::verify::{run_suite_in, write_report, RunConfig, SuiteReport, Workbench, SCHEMA, SUITES};
use hill_birkhoff::{Error, Potential, Result};

#[derive(Parser)]
#[command(name = "hill-birkhoff", version, about = "Hill spectra, KdV Birkhoff coordinates and verification suites")]
struct Cli {
    /// Plain-text `key = value` run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; stdout when omitted (reports default to `reports`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Potential as JSON (`{"K": K, "mean": c, "coeffs": [[n, re, im], ...]}`) instead of the configured family.
    #[arg(long, global = true)]
    potential: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Gap endpoints, Dirichlet and Neumann data as CSV.
    Spectrum,
    /// The σ-table of ψ zeros as JSON.
    Psi,
    /// Actions and Birkhoff coordinates as JSON.
    Birkhoff,
    /// KdV frequencies as CSV.
    Freqs,
    /// Evolve under KdV; writes the trajectory as JSON lines and the remainder table as CSV.
    Evolve {
        #[arg(long, default_value_t = 1.0)]
        t_final: f64,
        #[arg(long, default_value_t = 11)]
        samples: usize,
    },
    /// Run verification suites (all when none are named).
    Verify { suites: Vec<String> },
    /// Summarize the reports found in the output directory.
    Report,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 3 } else { 1 })
        }
    }
}

fn emit(out: &Option<PathBuf>, name: &str, text: &str) -> Result<()> {
    match out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            let path = dir.join(name);
            std::fs::write(&path, text)?;
            eprintln!("wrote {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<u8> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = Some(o.clone());
    }
    cfg.validate()?;
    if let Some(j) = cli.jobs {
        rayon::ThreadPoolBuilder::new()
            .num_threads(j.max(1))
            .build_global()
            .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?;
    }
    let potential = || -> Result<Potential> {
        match &cli.potential {
            Some(p) => Potential::from_json(&serde_json::from_str(&std::fs::read_to_string(p)?)?),
            None => cfg.potential_for(cfg.k, cfg.n, cfg.m),
        }
    };
    let out = cfg.out.clone();
    match cli.cmd {
        Cmd::Spectrum => {
            let q = potential()?;
            emit(&out, "spectrum.csv", &compute_spectrum(&q, cfg.n_max)?.to_csv())?;
        }
        Cmd::Psi => {
            let q = potential()?.mean_free();
            let psi = solve_psi_zeros(&compute_spectrum(&q, cfg.n_max)?)?;
            let doc = serde_json::json!({"schema": SCHEMA, "psi": psi.to_json()});
            emit(&out, "psi.json", &(serde_json::to_string_pretty(&doc)? + "\n"))?;
        }
        Cmd::Birkhoff => {
            let b = birkhoff_map(&potential()?, cfg.n_max)?;
            let doc = serde_json::json!({"schema": SCHEMA, "rows": b.to_json_rows()});
            emit(&out, "birkhoff.json", &(serde_json::to_string_pretty(&doc)? + "\n"))?;
        }
        Cmd::Freqs => {
            emit(&out, "freqs.csv", &frequencies(&potential()?, cfg.n_max)?.to_csv())?;
        }
        Cmd::Evolve { t_final, samples } => {
            let q = potential()?;
            let f = frequencies(&q, 4 * q.k().max(1))?;
            let tr = evolve_kdv(&q, &uniform_times(t_final, samples), &StepControl::default())?.with_wkb(&f).with_airy();
            emit(&out, "trajectory.jsonl", &tr.to_json_lines())?;
            if samples >= 5 {
                let mut csv = String::from("t,r_high,r_base,dr_low,airy_high\n");
                for r in remainder_table(&tr, cfg.n)? {
                    csv += &format!("{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n", r.t, r.r_high, r.r_base, r.dr_low, r.airy_high.unwrap_or(f64::NAN));
                }
                emit(&out, "remainder.csv", &csv)?;
            }
        }
        Cmd::Verify { suites } => return verify(&cfg, &suites),
        Cmd::Report => return report(&out.unwrap_or_else(|| PathBuf::from("reports"))),
    }
    Ok(0)
}

fn verify(cfg: &RunConfig, suites: &[String]) -> Result<u8> {
    let ids: Vec<&str> = if suites.is_empty() { SUITES.to_vec() } else { suites.iter().map(|s| s.as_str()).collect() };
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("reports"));
    let wb = Workbench::new();
    let mut code = 0;
    for id in ids {
        match run_suite_in(id, cfg, &wb) {
            Ok(r) => {
                write_report(&r, &dir)?;
                println!("{}  [{:.1}s]", r.summary(), r.runtime_s);
                if !r.verdict {
                    code = code.max(2);
                }
            }
            Err(e) if e.is_numerical() => {
                println!("ERROR {id}: {e}");
                code = 3;
            }
            Err(e) => return Err(e),
        }
    }
    Ok(code)
}

fn report(dir: &Path) -> Result<u8> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            let name = p.file_name().and_then(|n| n.to_str()).unwrap_or("");
            name.ends_with(".json") && !name.ends_with(".timing.json") && name != "summary.json"
        })
        .collect();
    paths.sort();
    let mut rows = vec![];
    let mut all = true;
    for p in paths {
        let Ok(r) = serde_json::from_str::<SuiteReport>(&std::fs::read_to_string(&p)?) else { continue };
        // recompute the verdict from the stored checks
        let pass = !r.checks.is_empty() && r.checks.iter().all(|c| if c.relation == "<=" { c.value <= c.threshold } else { c.value >= c.threshold });
        all &= pass;
        println!("{}", r.summary());
        rows.push(serde_json::json!({"suite_id": r.suite_id, "verdict": pass}));
    }
    if rows.is_empty() {
        return Err(Error::Invalid(format!("no reports in {}", dir.display())));
    }
    let doc = serde_json::json!({"schema": SCHEMA, "suites": rows, "all_pass": all});
    std::fs::write(dir.join("summary.json"), serde_json::to_string_pretty(&doc)? + "\n")?;
    Ok(if all { 0 } else { 2 })
}
