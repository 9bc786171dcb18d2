//! Command-line front end: `run`, `refine` and `check`.
//!
//! Exit status is 0 iff every enabled check passed; 1 on check failure,
//! 2 on configuration errors, 3 on solver failure.

use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use thermistor::analytic::RlcClosedForm;
use thermistor::config::{parse_config, RunConfig};
use thermistor::diagnostics::{monitor_fourth_estimate, CheckOutcome};
use thermistor::output;
use thermistor::scheme::RunOptions;

/// Environment variable overriding the output directory.
const OUT_DIR_ENV: &str = "THERMISTOR_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "thermistor",
    version,
    about = "Coupled RLC-thermistor solver with a priori estimate checks"
)]
struct Cli {
    /// Worker threads for the per-node elliptic solves (0 = rayon default).
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute one coupled run and write its record.
    Run {
        config: PathBuf,
        /// Output directory (overrides the config and the environment).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Extra snapshot times, comma separated.
        #[arg(long, value_delimiter = ',')]
        snapshots: Vec<f64>,
        /// Compare V(t) against the uniform-σ closed form and report the error.
        #[arg(long)]
        compare_analytic: bool,
        /// Skip the a priori estimate checks.
        #[arg(long)]
        no_checks: bool,
    },
    /// Run the τ-refinement study: τ, τ/2, τ/4 at fixed dt.
    Refine {
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        no_checks: bool,
    },
    /// Replay the diagnostics checks on a saved record directory.
    Check { record_dir: PathBuf },
}

fn out_dir(flag: Option<PathBuf>, cfg: &RunConfig, config_path: &Path) -> PathBuf {
    if let Some(dir) = flag {
        return dir;
    }
    if let Ok(dir) = std::env::var(OUT_DIR_ENV) {
        if !dir.is_empty() {
            return PathBuf::from(dir);
        }
    }
    if let Some(dir) = &cfg.output.dir {
        return PathBuf::from(dir);
    }
    let stem = config_path
        .file_stem()
        .map(|s| s.to_string_lossy().to_string())
        .unwrap_or_else(|| "run".into());
    PathBuf::from("runs").join(stem)
}

fn print_checks(checks: &[CheckOutcome]) -> bool {
    let mut all = true;
    for c in checks {
        println!(
            "{} {:<26} observed {:>13.6e} bound {:>13.6e} {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.observed,
            c.bound,
            c.detail
        );
        all &= c.passed;
    }
    all
}

fn cmd_run(
    config_path: &Path,
    out: Option<PathBuf>,
    snapshots: Vec<f64>,
    compare_analytic: bool,
    no_checks: bool,
) -> ExitCode {
    let mut cfg = match parse_config(config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    cfg.output.snapshots.extend(snapshots);
    let dir = out_dir(out, &cfg, config_path);
    let state = match cfg.execute(&RunOptions::default()) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("solver failure: {e}");
            return ExitCode::from(3);
        }
    };
    if let Err(e) = output::write_run(&dir, &cfg, &state) {
        eprintln!("cannot write {}: {e}", dir.display());
        return ExitCode::from(3);
    }
    println!(
        "run complete: {} nodes, {} slabs, sup|V| = {:.6e}, min theta = {:.6e}",
        state.times.len(),
        state.summary.n_slabs,
        state.summary.sup_v,
        state.summary.min_theta
    );

    let mut extra_report = String::new();
    if compare_analytic {
        let laws = cfg.build_laws();
        let g = cfg.build_grid();
        match RlcClosedForm::new(&cfg.circuit, &laws, &g) {
            Ok(oracle) => {
                let rel = oracle.relative_sup_error(&state.times, &state.voltage.v);
                println!("analytic comparison: relative sup error = {rel:.6e}");
                extra_report.push_str(&format!("analytic_rel_sup_error {rel:.17e}\n"));
            }
            Err(e) => {
                eprintln!("--compare-analytic: {e}");
                return ExitCode::from(2);
            }
        }
    }

    if no_checks {
        let _ = output::write_checks(&dir, &[], &extra_report);
        println!("checks skipped (--no-checks); record in {}", dir.display());
        return ExitCode::SUCCESS;
    }
    let checks = output::run_checks(
        &cfg,
        &state.diagnostics,
        state.summary.sup_v,
        state.summary.sup_v_prime,
        state.summary.phi0_h1_sq,
    );
    if let Err(e) = output::write_checks(&dir, &checks, &extra_report) {
        eprintln!("cannot write checks: {e}");
        return ExitCode::from(3);
    }
    let all = print_checks(&checks);
    println!("record in {}", dir.display());
    if all {
        ExitCode::SUCCESS
    } else {
        eprintln!(
            "{} check(s) failed",
            checks.iter().filter(|c| !c.passed).count()
        );
        ExitCode::from(1)
    }
}

fn cmd_refine(config_path: &Path, out: Option<PathBuf>, no_checks: bool) -> ExitCode {
    let cfg = match parse_config(config_path) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{e}");
            return ExitCode::from(2);
        }
    };
    let dir = out_dir(out, &cfg, config_path);
    let report = match cfg.execute_refinement(&RunOptions::default()) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("refinement failure: {e}");
            return ExitCode::from(3);
        }
    };

    let mut all_ok = true;
    let mut text = String::new();
    text.push_str("tau refinement study\n");
    text.push_str(&format!(
        "taus: {:.17e} {:.17e} {:.17e}\n",
        report.taus[0], report.taus[1], report.taus[2]
    ));
    text.push_str(&format!(
        "theta Lp(Q) distances: d0 = {:.17e}, d1 = {:.17e}, ratio = {:.6}\n",
        report.theta_distances[0], report.theta_distances[1], report.cauchy_ratio
    ));
    text.push_str(&format!(
        "voltage sup distances: {:.17e} {:.17e}\n",
        report.v_distances[0], report.v_distances[1]
    ));
    text.push_str(&format!(
        "truncation-active fractions: {:.6e} {:.6e} {:.6e}\n",
        report.trunc_fractions[0], report.trunc_fractions[1], report.trunc_fractions[2]
    ));
    if report.nondecreasing {
        text.push_str("WARNING: theta distances did not decrease under tau halving\n");
    }

    for (i, run) in report.runs.iter().enumerate() {
        let sub = dir.join(format!("tau{i}"));
        let mut cfg_k = cfg.clone();
        cfg_k.scheme.tau = report.taus[i];
        if let Err(e) = output::write_run(&sub, &cfg_k, run) {
            eprintln!("cannot write {}: {e}", sub.display());
            return ExitCode::from(3);
        }
        if !no_checks {
            let checks = output::run_checks(
                &cfg_k,
                &run.diagnostics,
                run.summary.sup_v,
                run.summary.sup_v_prime,
                run.summary.phi0_h1_sq,
            );
            println!("-- tau = {:.6e}", report.taus[i]);
            all_ok &= print_checks(&checks);
            let _ = output::write_checks(&sub, &checks, "");
        }
    }

    let records: Vec<&thermistor::diagnostics::DiagnosticsRecord> =
        report.runs.iter().map(|r| &r.diagnostics).collect();
    let fourth = monitor_fourth_estimate(&records);
    text.push_str(&format!(
        "grad-z norms: {:.17e} {:.17e} {:.17e} (spread {:.4})\n",
        fourth.z_grad_norms[0],
        fourth.z_grad_norms[1],
        fourth.z_grad_norms[2],
        fourth.z_grad_spread
    ));
    text.push_str(&format!(
        "Lp u norms: {:.17e} {:.17e} {:.17e} (spread {:.4})\n",
        fourth.lp_u_norms[0], fourth.lp_u_norms[1], fourth.lp_u_norms[2], fourth.lp_u_spread
    ));
    if !no_checks {
        println!(
            "{} fourth-estimate monitors: spreads {:.4} / {:.4} (limit 0.25)",
            if fourth.pass { "PASS" } else { "FAIL" },
            fourth.z_grad_spread,
            fourth.lp_u_spread
        );
        println!(
            "{} cauchy decrease: d1/d0 = {:.4} (limit 0.75)",
            if report.cauchy_ok { "PASS" } else { "FAIL" },
            report.cauchy_ratio
        );
        all_ok &= fourth.pass && report.cauchy_ok;
    }
    if let Err(e) = std::fs::create_dir_all(&dir)
        .and_then(|_| std::fs::write(dir.join("refinement_report.txt"), &text))
    {
        eprintln!("cannot write refinement report: {e}");
        return ExitCode::from(3);
    }
    print!("{text}");
    println!("records in {}", dir.display());
    if all_ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn cmd_check(record_dir: &Path) -> ExitCode {
    match output::replay_checks(record_dir) {
        Ok(checks) => {
            let all = print_checks(&checks);
            if all {
                ExitCode::SUCCESS
            } else {
                eprintln!(
                    "{} check(s) failed",
                    checks.iter().filter(|c| !c.passed).count()
                );
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("cannot replay {}: {e}", record_dir.display());
            ExitCode::from(2)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if cli.threads > 0 {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
        {
            eprintln!("cannot configure {} threads: {e}", cli.threads);
            return ExitCode::from(2);
        }
    }
    match cli.command {
        Command::Run {
            config,
            out,
            snapshots,
            compare_analytic,
            no_checks,
        } => cmd_run(&config, out, snapshots, compare_analytic, no_checks),
        Command::Refine {
            config,
            out,
            no_checks,
        } => cmd_refine(&config, out, no_checks),
        Command::Check { record_dir } => cmd_check(&record_dir),
    }
}
