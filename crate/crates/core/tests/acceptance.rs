//! Acceptance suite: one test per shipped criterion, each printing a
//! PASS/FAIL line (visible with `cargo test --test acceptance -- --nocapture`).
//!
//! The oracles are independent of the solver paths they check: closed-form
//! RLC traces are hard-coded, the layered current comes from the 1-D
//! series-resistance formula, and the manufactured solution is differentiated
//! by hand.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;
use std::time::Instant;
use thermistor::circuit::{self, CircuitParams, SlabInit, SourceTerm};
use thermistor::config::{parse_config, RunConfig};
use thermistor::diagnostics::{
    check_energy, check_mass_balance, check_min_principle, monitor_fourth_estimate,
};
use thermistor::elliptic::solve_potential;
use thermistor::grid::{integrate_volume, Field, Grid, LateralTrace};
use thermistor::laws::{ExchangeLaw, LawFamily, MaterialLaws};
use thermistor::parabolic::{heat_step, HeatState, HeatStepConfig};
use thermistor::scheme::{exponent_pair, RunOptions, RunState};

fn presets_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../presets")
}

fn execute(cfg: &RunConfig) -> RunState {
    cfg.execute(&RunOptions::default())
        .expect("preset run must succeed")
}

struct PresetRun {
    name: &'static str,
    cfg: RunConfig,
    state: RunState,
}

/// Every shipped preset, executed once and shared across criteria.
fn preset_runs() -> &'static Vec<PresetRun> {
    static RUNS: OnceLock<Vec<PresetRun>> = OnceLock::new();
    RUNS.get_or_init(|| {
        ["uniform", "layered", "sigmoid", "zero"]
            .iter()
            .map(|name| {
                let cfg = parse_config(&presets_dir().join(format!("{name}.cfg")))
                    .unwrap_or_else(|e| panic!("preset {name}: {e}"));
                let state = execute(&cfg);
                PresetRun { name, cfg, state }
            })
            .collect()
    })
}

fn verdict(criterion: &str, pass: bool, detail: &str) {
    println!(
        "{} {criterion}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "{criterion}: {detail}");
}

/// Critically damped closed form of the uniform preset:
/// V'' + 2V' + V = 0, V(0) = 1, V'(0) = 0.
fn uniform_exact(t: f64) -> f64 {
    (1.0 + t) * (-t).exp()
}

#[test]
fn criterion_01_uniform_sigma_end_to_end_oracle() {
    let cfg = parse_config(&presets_dir().join("uniform.cfg")).unwrap();
    let mut errs = Vec::new();
    let mut main_seconds = 0.0;
    for dt in [4e-3, 2e-3, 1e-3] {
        let mut c = cfg.clone();
        c.scheme.dt = dt;
        // Tight fixed point so the dt² signal is not floored by iteration noise.
        c.scheme.tol_fp = 1e-11;
        let start = Instant::now();
        let state = execute(&c);
        let secs = start.elapsed().as_secs_f64();
        if dt == 1e-3 {
            main_seconds = secs;
        }
        let mut err = 0.0f64;
        let mut scale = 0.0f64;
        for (t, v) in state.times.iter().zip(&state.voltage.v) {
            err = err.max((v - uniform_exact(*t)).abs());
            scale = scale.max(uniform_exact(*t).abs());
        }
        errs.push(err / scale);
    }
    let o1 = (errs[0] / errs[1]).log2();
    let o2 = (errs[1] / errs[2]).log2();
    let pass = errs[2] <= 1e-3
        && (1.8..=2.2).contains(&o1)
        && (1.8..=2.2).contains(&o2)
        && main_seconds < 30.0;
    verdict(
        "criterion 1 (uniform-sigma oracle)",
        pass,
        &format!(
            "rel Linf at dt=1e-3: {:.3e} (<= 1e-3), temporal orders {:.3}, {:.3} (2.0 +- 0.2), runtime {:.1}s (< 30s)",
            errs[2], o1, o2, main_seconds
        ),
    );
}

#[test]
fn criterion_02_layered_sigma_elliptic_oracle() {
    // 1-D series resistance: sigma = 1 on z < 1/2 and 3 above, V = 1, |B| = 1:
    // I_R = 1/(1/2 + 1/6) = 3/2, exactly representable by the harmonic-mean
    // half-cell scheme, so the only error is the linear solve.
    let g = Grid::new(16, 16, 16, 1.0, 1.0, 1.0).unwrap();
    let laws = MaterialLaws::new(
        LawFamily::ClampedAffine {
            offset: 0.0,
            slope: 1.0,
            lo: 1.0,
            hi: 3.0,
        },
        LawFamily::Constant { value: 1.0 },
        ExchangeLaw::Zero,
    )
    .unwrap();
    let theta = Field::from_fn(&g, |_, _, z| if z < 0.5 { 1.0 } else { 3.0 });
    let tol_lin = 1e-10;
    let sol = solve_potential(&g, &laws, &theta, 1.0, tol_lin).unwrap();
    let oracle = 1.5;
    let ir_err = (sol.i_r - oracle).abs();
    let profile_dev = sol
        .ir_profile
        .iter()
        .map(|p| (p - sol.i_r).abs())
        .fold(0.0f64, f64::max);
    // The layered preset starts from the same configuration at t = 0.
    let preset = &preset_runs()[1];
    assert_eq!(preset.name, "layered");
    let preset_ir0 = preset.state.i_r[0];
    let pass = ir_err <= 10.0 * tol_lin * oracle
        && profile_dev <= 10.0 * tol_lin * oracle
        && (preset_ir0 - oracle).abs() <= 10.0 * tol_lin * oracle;
    verdict(
        "criterion 2 (layered-sigma elliptic oracle)",
        pass,
        &format!(
            "I_R error {:.3e}, profile deviation {:.3e}, preset I_R(0) error {:.3e} (all <= {:.1e})",
            ir_err,
            profile_dev,
            (preset_ir0 - oracle).abs(),
            10.0 * tol_lin * oracle
        ),
    );
}

#[test]
fn criterion_03_minimum_principle_on_every_preset() {
    let mut detail = String::new();
    let mut pass = true;
    for run in preset_runs() {
        assert!(
            run.state.summary.data_lower_bound_ok,
            "{}: data must satisfy theta >= theta*",
            run.name
        );
        let check = check_min_principle(&run.state.diagnostics, run.cfg.thermal.theta_star);
        pass &= check.passed;
        detail.push_str(&format!(
            "{}: min theta = {:.12} >= {:.12}; ",
            run.name, check.observed, check.bound
        ));
    }
    verdict("criterion 3 (minimum principle)", pass, &detail);
}

#[test]
fn criterion_04_energy_inequalities_on_every_node() {
    let mut detail = String::new();
    let mut pass = true;
    for run in preset_runs() {
        let check = check_energy(&run.state.diagnostics);
        pass &= check.passed;
        detail.push_str(&format!(
            "{}: worst margin {:.3e}; ",
            run.name, check.observed
        ));
    }
    verdict("criterion 4 (energy inequalities)", pass, &detail);
}

#[test]
fn criterion_05_mass_balance() {
    let mut detail = String::new();
    let mut pass = true;
    for run in preset_runs() {
        let check = check_mass_balance(&run.state.diagnostics, run.cfg.scheme.tol_newton);
        pass &= check.passed;
        detail.push_str(&format!(
            "{}: max residual {:.3e}; ",
            run.name, check.observed
        ));
    }
    // Insulated uniform-source run: ∫θ(T) - ∫θ₀ = T s |Ω| to 1e-9 relative.
    let g = Grid::new(8, 8, 8, 1.0, 1.0, 2.0).unwrap();
    let laws = MaterialLaws::new(
        LawFamily::Constant { value: 1.0 },
        LawFamily::Constant { value: 1.0 },
        ExchangeLaw::Zero,
    )
    .unwrap();
    let s = 0.7;
    let dt = 0.01;
    let steps = 50;
    let cfg = HeatStepConfig {
        dt,
        tol_newton: 1e-10,
        max_newton: 25,
        max_halvings: 4,
    };
    let source = Field::constant(&g, s);
    let h_gamma = LateralTrace::constant(&g, 0.0);
    let mut state = HeatState::from_theta(&laws, Field::constant(&g, 2.0), 0.0);
    let mass0 = integrate_volume(&g, &state.theta);
    for _ in 0..steps {
        state = heat_step(&laws, &g, &state, &source, &h_gamma, &cfg).unwrap();
    }
    let gained = integrate_volume(&g, &state.theta) - mass0;
    let expected = steps as f64 * dt * s * g.volume();
    let rel = (gained - expected).abs() / expected;
    pass &= rel <= 1e-9;
    detail.push_str(&format!(
        "insulated: relative mass defect {rel:.3e} (<= 1e-9)"
    ));
    verdict("criterion 5 (mass balance)", pass, &detail);
}

#[test]
fn criterion_06_contraction() {
    let mut detail = String::new();
    let mut pass = true;
    for run in preset_runs() {
        let kappa = run.state.summary.kappa;
        let ratio = run.state.summary.max_contraction_ratio;
        pass &= ratio <= 1.05 * kappa;
        detail.push_str(&format!(
            "{}: max ratio {:.3e} <= 1.05 kappa = {:.3e}; ",
            run.name,
            ratio,
            1.05 * kappa
        ));
    }
    // The kappa = 1/2 example: lambda = (1,1,1), sigma^ = 2, |B| = ell = 1,
    // tau = 1/64; iteration count <= ceil(log2(|dV0|/tol_fp)) + 1.
    let g = Grid::new(4, 4, 4, 1.0, 1.0, 1.0).unwrap();
    let laws = MaterialLaws::new(
        LawFamily::Constant { value: 2.0 },
        LawFamily::Constant { value: 1.0 },
        ExchangeLaw::Zero,
    )
    .unwrap();
    let params = CircuitParams {
        lambda1: 1.0,
        lambda2: 1.0,
        lambda3: 1.0,
        v0: 1.0,
        v0_prime: 0.0,
        source: SourceTerm::Zero,
    };
    let tau = 1.0 / 64.0;
    let dt = tau / 16.0;
    let kappa = circuit::contraction_constant(&params, &laws, &g, tau);
    pass &= (kappa - 0.5).abs() < 1e-12;
    let theta0 = Field::constant(&g, 2.0);
    let (c0, _) = circuit::rhs_constant(&params, &laws, &theta0, &g, 1e-10).unwrap();
    let delay: Vec<Field> = (0..17).map(|_| theta0.clone()).collect();
    let tol_fp = 1e-8;
    let fp = circuit::fixed_point_slab(
        &params,
        &laws,
        &g,
        &delay,
        SlabInit {
            t0: 0.0,
            v: 1.0,
            w: 0.0,
        },
        c0,
        dt,
        tol_fp,
        100,
        1e-10,
    )
    .unwrap();
    let bound = (fp.first_increment / tol_fp).log2().ceil() as usize + 1;
    let max_ratio = fp.ratios.iter().copied().fold(0.0f64, f64::max);
    pass &= fp.iterations <= bound && max_ratio <= 1.05 * kappa;
    detail.push_str(&format!(
        "kappa=0.5 slab: {} iterations <= bound {}, max ratio {:.3e}",
        fp.iterations, bound, max_ratio
    ));
    verdict("criterion 6 (contraction)", pass, &detail);
}

#[test]
fn criterion_07_mode_equivalence() {
    let mut detail = String::new();
    let mut pass = true;
    for run in preset_runs() {
        let gap = run.state.summary.mode_equivalence_gap;
        let bound = 10.0 * run.cfg.scheme.tol_fp;
        pass &= gap <= bound;
        detail.push_str(&format!(
            "{}: sup gap {:.3e} <= {:.1e}; ",
            run.name, gap, bound
        ));
    }
    verdict(
        "criterion 7 (fixed-point vs direct elimination)",
        pass,
        &detail,
    );
}

// Manufactured solution θ = 2 + e^{-t} cos(πx)cos(πy)cos(πz) on the unit
// cube with k ≡ 1, h = id: all normal derivatives vanish on the boundary,
// the forcing is θ_t - Δθ = (3π² - 1)e^{-t}ccc and the Robin datum is the
// exact trace.
fn mms_exact(x: f64, y: f64, z: f64, t: f64) -> f64 {
    2.0 + (-t).exp() * (PI * x).cos() * (PI * y).cos() * (PI * z).cos()
}

fn mms_forcing(x: f64, y: f64, z: f64, t: f64) -> f64 {
    (3.0 * PI * PI - 1.0) * (-t).exp() * (PI * x).cos() * (PI * y).cos() * (PI * z).cos()
}

fn mms_march(n: usize, dt: f64, t_final: f64) -> (Grid, Field) {
    let g = Grid::new(n, n, n, 1.0, 1.0, 1.0).unwrap();
    let laws = MaterialLaws::new(
        LawFamily::Constant { value: 1.0 },
        LawFamily::Constant { value: 1.0 },
        ExchangeLaw::Linear { slope: 1.0 },
    )
    .unwrap();
    let cfg = HeatStepConfig {
        dt,
        tol_newton: 1e-12,
        max_newton: 30,
        max_halvings: 2,
    };
    let mut state = HeatState::from_theta(
        &laws,
        Field::from_fn(&g, |x, y, z| mms_exact(x, y, z, 0.0)),
        0.0,
    );
    let steps = (t_final / dt).round() as usize;
    for m in 1..=steps {
        let t_new = m as f64 * dt;
        let source = Field::from_fn(&g, |x, y, z| mms_forcing(x, y, z, t_new));
        let h_gamma = LateralTrace::from_fn(&g, |x, y, z| mms_exact(x, y, z, t_new));
        state = heat_step(&laws, &g, &state, &source, &h_gamma, &cfg).unwrap();
    }
    (g, state.theta)
}

fn l2_field_diff(g: &Grid, a: &Field, b: &Field) -> f64 {
    let mut e = 0.0;
    for c in 0..g.n_cells() {
        let d = a[c] - b[c];
        e += d * d;
    }
    (e * g.cell_volume()).sqrt()
}

fn l2_vs_exact(g: &Grid, theta: &Field, t: f64) -> f64 {
    l2_field_diff(
        g,
        theta,
        &Field::from_fn(g, |x, y, z| mms_exact(x, y, z, t)),
    )
}

#[test]
fn criterion_08_parabolic_manufactured_solution() {
    let start = Instant::now();
    // Temporal order on a fixed 16³ grid: the error against the manufactured
    // solution is O(dt) + O(h²); the dt part is isolated against a dt → 0
    // reference on the same grid so the h² bias drops out exactly.
    let n = 16;
    let t_final = 0.4;
    let (g, reference) = mms_march(n, 0.05 / 64.0, t_final);
    let terrs: Vec<f64> = [0.05, 0.025, 0.0125]
        .iter()
        .map(|&dt| l2_field_diff(&g, &mms_march(n, dt, t_final).1, &reference))
        .collect();
    let t1 = (terrs[0] / terrs[1]).log2();
    let t2 = (terrs[1] / terrs[2]).log2();
    // Spatial order straight against the manufactured solution at small dt.
    let t_short = 0.05;
    let serrs: Vec<f64> = [8, 16, 32]
        .iter()
        .map(|&n| {
            let (g, theta) = mms_march(n, 5e-4, t_short);
            l2_vs_exact(&g, &theta, t_short)
        })
        .collect();
    let s1 = (serrs[0] / serrs[1]).log2();
    let s2 = (serrs[1] / serrs[2]).log2();
    let seconds = start.elapsed().as_secs_f64();
    let pass = (0.9..=1.1).contains(&t1)
        && (0.9..=1.1).contains(&t2)
        && (1.8..=2.2).contains(&s1)
        && (1.8..=2.2).contains(&s2)
        && seconds < 60.0;
    verdict(
        "criterion 8 (parabolic MMS)",
        pass,
        &format!(
            "temporal orders {t1:.3}, {t2:.3} (0.9-1.1); spatial orders {s1:.3}, {s2:.3} (1.8-2.2); runtime {seconds:.1}s (< 60s)"
        ),
    );
}

#[test]
fn criterion_09_tau_refinement_cauchy() {
    let cfg = parse_config(&presets_dir().join("sigmoid.cfg")).unwrap();
    let report = cfg.execute_refinement(&RunOptions::default()).unwrap();
    let records: Vec<_> = report.runs.iter().map(|r| &r.diagnostics).collect();
    let fourth = monitor_fourth_estimate(&records);
    let ratio = report.theta_distances[1] / report.theta_distances[0];
    let pass = ratio <= 0.75 && fourth.pass;
    verdict(
        "criterion 9 (tau-refinement Cauchy behavior)",
        pass,
        &format!(
            "d1/d0 = {:.4} (<= 0.75); monitor spreads {:.4}, {:.4} (<= 0.25)",
            ratio, fourth.z_grad_spread, fourth.lp_u_spread
        ),
    );
}

#[test]
fn criterion_10_exponent_arithmetic() {
    let (p, q) = exponent_pair(5.0 / 6.0).unwrap();
    let conj = (1.0 / p + 1.0 / q - 1.0).abs();
    let mut pass = (p - 9.0 / 8.0).abs() <= 1e-13 && (q - 9.0).abs() <= 1e-12 && conj <= 1e-14;
    // Endpoint limits (5/4, 5) as alpha → 1.
    let (pe, qe) = exponent_pair(1.0 - 1e-10).unwrap();
    pass &= (pe - 1.25).abs() <= 1e-9 && (qe - 5.0).abs() <= 1e-8;
    // Conjugacy across the whole admissible range.
    for i in 1..100 {
        let alpha = 2.0 / 3.0 + (1.0 / 3.0) * i as f64 / 100.0;
        let (p, q) = exponent_pair(alpha).unwrap();
        pass &= (1.0 / p + 1.0 / q - 1.0).abs() <= 1e-14;
    }
    verdict(
        "criterion 10 (exponent arithmetic)",
        pass,
        &format!("alpha = 5/6 gives (p, q) = ({p}, {q}), conjugacy defect {conj:.2e}"),
    );
}
