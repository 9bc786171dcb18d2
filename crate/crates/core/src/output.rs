//! Run artifacts on disk.
//!
//! A run directory holds:
//! - `config.resolved.cfg`: the exact configuration, re-parseable;
//! - `timeseries.csv`: `t,V,Vprime,I_R,slab_index,fp_iterations`;
//! - `diagnostics.csv`: per-node estimate rows;
//! - `meta.csv`: scalar run facts (`key,value`);
//! - `checks.csv` / `report.txt`: verdicts and norm tables;
//! - `theta_t<time>.csv`, `u_t<time>.csv`: field snapshots, `i,j,k,x,y,z,value`.
//!
//! Floats are printed with 17 significant digits, so replaying a record
//! reproduces identical verdicts and identical bytes.

use crate::config::{fmt_f64, parse_config, RunConfig};
use crate::diagnostics::{
    check_contraction, check_energy, check_mass_balance, check_min_principle, check_voltage_bound,
    CheckOutcome, DiagnosticsRecord, DiagnosticsRow, VoltageBoundInputs,
};
use crate::grid::{Field, Grid};
use crate::scheme::{exponent_pair, RunState};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

pub const TIMESERIES_HEADER: &str = "t,V,Vprime,I_R,slab_index,fp_iterations";
pub const DIAGNOSTICS_HEADER: &str = "t,min_theta,min_cell,mass_theta,energy_psi,energy_psi_bound,energy_phi,energy_phi_bound,mass_residual,trunc_fraction,contraction_ratio,z_grad_sq_accum,lp_u_accum,dual_proxy";
pub const SNAPSHOT_HEADER: &str = "i,j,k,x,y,z,value";
pub const CHECKS_HEADER: &str = "check,passed,observed,bound,detail";
pub const META_HEADER: &str = "key,value";

/// Write all artifacts of a completed run into `dir`.
pub fn write_run(dir: &Path, cfg: &RunConfig, state: &RunState) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("config.resolved.cfg"), cfg.serialize())?;

    let mut ts = String::new();
    writeln!(ts, "{TIMESERIES_HEADER}").unwrap();
    for m in 0..state.times.len() {
        writeln!(
            ts,
            "{},{},{},{},{},{}",
            fmt_f64(state.times[m]),
            fmt_f64(state.voltage.v[m]),
            fmt_f64(state.voltage.v_prime[m]),
            fmt_f64(state.i_r[m]),
            state.slab_index[m],
            state.fp_iterations[m]
        )
        .unwrap();
    }
    fs::write(dir.join("timeseries.csv"), ts)?;

    let mut dg = String::new();
    writeln!(dg, "{DIAGNOSTICS_HEADER}").unwrap();
    for r in &state.diagnostics.rows {
        writeln!(
            dg,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            fmt_f64(r.t),
            fmt_f64(r.min_theta),
            r.min_cell,
            fmt_f64(r.mass_theta),
            fmt_f64(r.energy_psi),
            fmt_f64(r.energy_psi_bound),
            fmt_f64(r.energy_phi),
            fmt_f64(r.energy_phi_bound),
            fmt_f64(r.mass_residual),
            fmt_f64(r.trunc_fraction),
            fmt_f64(r.contraction_ratio),
            fmt_f64(r.z_grad_sq_accum),
            fmt_f64(r.lp_u_accum),
            fmt_f64(r.dual_proxy)
        )
        .unwrap();
    }
    fs::write(dir.join("diagnostics.csv"), dg)?;

    let s = &state.summary;
    let mut meta = String::new();
    writeln!(meta, "{META_HEADER}").unwrap();
    for (key, value) in [
        ("const_rhs", s.const_rhs),
        ("phi0_h1_sq", s.phi0_h1_sq),
        ("f_l1", s.f_l1),
        ("kappa", s.kappa),
        ("tau_star", s.tau_star),
        ("theta_star", s.theta_star),
        ("alpha", s.alpha),
        ("p", s.p),
        ("q", s.q),
        ("sup_v", s.sup_v),
        ("sup_v_prime", s.sup_v_prime),
        ("mode_equivalence_gap", s.mode_equivalence_gap),
        ("max_contraction_ratio", s.max_contraction_ratio),
        ("max_mass_residual", s.max_mass_residual),
        ("min_theta", s.min_theta),
        ("z_grad_norm", state.diagnostics.z_grad_norm()),
        ("lp_u_norm", state.diagnostics.lp_u_norm()),
        ("dual_proxy_lp", state.diagnostics.dual_proxy_lp_norm()),
        (
            "data_lower_bound_ok",
            if s.data_lower_bound_ok { 1.0 } else { 0.0 },
        ),
        ("delay_lookups", s.delay_lookups as f64),
        ("delay_misses", s.delay_misses as f64),
        ("n_slabs", s.n_slabs as f64),
        ("max_fp_iterations", s.max_fp_iterations as f64),
        ("max_first_increment", s.max_first_increment),
    ] {
        writeln!(meta, "{key},{}", fmt_f64(value)).unwrap();
    }
    fs::write(dir.join("meta.csv"), meta)?;

    // Snapshots at the configured times, snapped to the nearest node; one
    // file per (field, time) for θ and the Kirchhoff variable u = K(θ).
    let g = cfg.build_grid();
    let laws = cfg.build_laws();
    for &t_want in &cfg.output.snapshots {
        let (node, _) = state
            .times
            .iter()
            .enumerate()
            .map(|(i, t)| (i, (t - t_want).abs()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .unwrap();
        let t_node = state.times[node];
        let theta = &state.theta_nodes[node];
        write_snapshot(&dir.join(format!("theta_t{t_node}.csv")), &g, theta)?;
        let u = Field(theta.0.iter().map(|&th| laws.kirchhoff(th)).collect());
        write_snapshot(&dir.join(format!("u_t{t_node}.csv")), &g, &u)?;
    }
    Ok(())
}

/// One cell-centered field as headered CSV.
pub fn write_snapshot(path: &Path, g: &Grid, field: &Field) -> io::Result<()> {
    let mut s = String::new();
    writeln!(s, "{SNAPSHOT_HEADER}").unwrap();
    for k in 0..g.nz {
        for j in 0..g.ny {
            for i in 0..g.nx {
                let (x, y, z) = g.cell_center(i, j, k);
                writeln!(
                    s,
                    "{i},{j},{k},{},{},{},{}",
                    fmt_f64(x),
                    fmt_f64(y),
                    fmt_f64(z),
                    fmt_f64(field[g.idx(i, j, k)])
                )
                .unwrap();
            }
        }
    }
    fs::write(path, s)
}

/// Verdicts table plus a plain-text report section.
pub fn write_checks(dir: &Path, checks: &[CheckOutcome], extra_report: &str) -> io::Result<()> {
    let mut cs = String::new();
    writeln!(cs, "{CHECKS_HEADER}").unwrap();
    for c in checks {
        writeln!(
            cs,
            "{},{},{},{},{}",
            c.name,
            c.passed,
            fmt_f64(c.observed),
            fmt_f64(c.bound),
            c.detail.replace(',', ";")
        )
        .unwrap();
    }
    fs::write(dir.join("checks.csv"), cs)?;

    let mut rep = String::new();
    for c in checks {
        writeln!(
            rep,
            "{} {:<26} observed {:>24} bound {:>24} {}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            fmt_f64(c.observed),
            fmt_f64(c.bound),
            c.detail
        )
        .unwrap();
    }
    rep.push_str(extra_report);
    fs::write(dir.join("report.txt"), rep)
}

/// The standard check battery for one run.
pub fn run_checks(
    cfg: &RunConfig,
    record: &DiagnosticsRecord,
    sup_v: f64,
    sup_v_prime: f64,
    phi0_h1_sq: f64,
) -> Vec<CheckOutcome> {
    let g = cfg.build_grid();
    let laws = cfg.build_laws();
    let kappa = crate::circuit::contraction_constant(&cfg.circuit, &laws, &g, cfg.scheme.tau);
    let inputs = VoltageBoundInputs {
        t_final: cfg.scheme.t_final,
        phi0_h1_sq,
        f_l1: cfg.circuit.source.l1_norm(cfg.scheme.t_final),
    };
    let mut checks = vec![
        check_min_principle(record, cfg.thermal.theta_star),
        check_energy(record),
        check_mass_balance(record, cfg.scheme.tol_newton),
        check_contraction(record, kappa),
    ];
    checks.extend(check_voltage_bound(
        sup_v,
        sup_v_prime,
        &cfg.circuit,
        &laws,
        &g,
        &inputs,
    ));
    checks
}

/// A record loaded back from disk, sufficient to replay every check.
pub struct LoadedRecord {
    pub config: RunConfig,
    pub record: DiagnosticsRecord,
    pub times: Vec<f64>,
    pub v: Vec<f64>,
    pub v_prime: Vec<f64>,
    pub meta: BTreeMap<String, f64>,
}

fn parse_csv_line(
    line: &str,
    want: usize,
    path: &str,
    lineno: usize,
) -> Result<Vec<String>, String> {
    let fields: Vec<String> = line.split(',').map(|s| s.to_string()).collect();
    if fields.len() < want {
        return Err(format!(
            "{path}: line {lineno}: expected {want} fields, got {}",
            fields.len()
        ));
    }
    Ok(fields)
}

fn read_f64(s: &str, path: &str, lineno: usize) -> Result<f64, String> {
    s.parse::<f64>()
        .map_err(|_| format!("{path}: line {lineno}: `{s}` is not a number"))
}

/// Load a run directory written by `write_run`.
pub fn load_record(dir: &Path) -> Result<LoadedRecord, String> {
    let config = parse_config(&dir.join("config.resolved.cfg")).map_err(|e| e.to_string())?;

    let ts_path = dir.join("timeseries.csv");
    let ts = fs::read_to_string(&ts_path).map_err(|e| format!("{}: {e}", ts_path.display()))?;
    let mut times = Vec::new();
    let mut v = Vec::new();
    let mut v_prime = Vec::new();
    for (n, line) in ts.lines().enumerate() {
        if n == 0 {
            if line != TIMESERIES_HEADER {
                return Err(format!("timeseries.csv: unexpected header `{line}`"));
            }
            continue;
        }
        let f = parse_csv_line(line, 6, "timeseries.csv", n + 1)?;
        times.push(read_f64(&f[0], "timeseries.csv", n + 1)?);
        v.push(read_f64(&f[1], "timeseries.csv", n + 1)?);
        v_prime.push(read_f64(&f[2], "timeseries.csv", n + 1)?);
    }

    let dg_path = dir.join("diagnostics.csv");
    let dg = fs::read_to_string(&dg_path).map_err(|e| format!("{}: {e}", dg_path.display()))?;
    let mut rows = Vec::new();
    for (n, line) in dg.lines().enumerate() {
        if n == 0 {
            if line != DIAGNOSTICS_HEADER {
                return Err(format!("diagnostics.csv: unexpected header `{line}`"));
            }
            continue;
        }
        let f = parse_csv_line(line, 14, "diagnostics.csv", n + 1)?;
        rows.push(DiagnosticsRow {
            t: read_f64(&f[0], "diagnostics.csv", n + 1)?,
            min_theta: read_f64(&f[1], "diagnostics.csv", n + 1)?,
            min_cell: f[2]
                .parse::<usize>()
                .map_err(|_| format!("diagnostics.csv: line {}: bad cell index", n + 1))?,
            mass_theta: read_f64(&f[3], "diagnostics.csv", n + 1)?,
            energy_psi: read_f64(&f[4], "diagnostics.csv", n + 1)?,
            energy_psi_bound: read_f64(&f[5], "diagnostics.csv", n + 1)?,
            energy_phi: read_f64(&f[6], "diagnostics.csv", n + 1)?,
            energy_phi_bound: read_f64(&f[7], "diagnostics.csv", n + 1)?,
            mass_residual: read_f64(&f[8], "diagnostics.csv", n + 1)?,
            trunc_fraction: read_f64(&f[9], "diagnostics.csv", n + 1)?,
            contraction_ratio: read_f64(&f[10], "diagnostics.csv", n + 1)?,
            z_grad_sq_accum: read_f64(&f[11], "diagnostics.csv", n + 1)?,
            lp_u_accum: read_f64(&f[12], "diagnostics.csv", n + 1)?,
            dual_proxy: read_f64(&f[13], "diagnostics.csv", n + 1)?,
        });
    }

    let meta_path = dir.join("meta.csv");
    let meta_text =
        fs::read_to_string(&meta_path).map_err(|e| format!("{}: {e}", meta_path.display()))?;
    let mut meta = BTreeMap::new();
    for (n, line) in meta_text.lines().enumerate() {
        if n == 0 {
            continue;
        }
        let f = parse_csv_line(line, 2, "meta.csv", n + 1)?;
        meta.insert(f[0].clone(), read_f64(&f[1], "meta.csv", n + 1)?);
    }

    let (p, _) = exponent_pair(config.scheme.alpha).map_err(|e| e.to_string())?;
    Ok(LoadedRecord {
        record: DiagnosticsRecord {
            rows,
            alpha: config.scheme.alpha,
            p,
        },
        config,
        times,
        v,
        v_prime,
        meta,
    })
}

/// Replay the standard checks on a saved record.
pub fn replay_checks(dir: &Path) -> Result<Vec<CheckOutcome>, String> {
    let loaded = load_record(dir)?;
    let sup_v = loaded.v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let sup_vp = loaded.v_prime.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let phi0_h1_sq = *loaded
        .meta
        .get("phi0_h1_sq")
        .ok_or_else(|| "meta.csv: missing phi0_h1_sq".to_string())?;
    Ok(run_checks(
        &loaded.config,
        &loaded.record,
        sup_v,
        sup_vp,
        phi0_h1_sq,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn headers_are_stable() {
        // Golden strings: the output schema is part of the interface.
        assert_eq!(TIMESERIES_HEADER, "t,V,Vprime,I_R,slab_index,fp_iterations");
        assert_eq!(SNAPSHOT_HEADER, "i,j,k,x,y,z,value");
        assert_eq!(
            DIAGNOSTICS_HEADER,
            "t,min_theta,min_cell,mass_theta,energy_psi,energy_psi_bound,energy_phi,energy_phi_bound,mass_residual,trunc_fraction,contraction_ratio,z_grad_sq_accum,lp_u_accum,dual_proxy"
        );
        assert_eq!(CHECKS_HEADER, "check,passed,observed,bound,detail");
    }

    #[test]
    fn float_format_round_trips() {
        for v in [
            0.0,
            1.0,
            -1.5e-300,
            std::f64::consts::PI,
            0.1,
            2.0f64.powi(-53),
        ] {
            let s = fmt_f64(v);
            assert_eq!(s.parse::<f64>().unwrap(), v, "{s}");
        }
    }
}
