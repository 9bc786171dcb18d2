//! The time-slab orchestrator: history extension, delayed coefficients,
//! slab-by-slab solve, continuous pasting, and the τ-refinement study.
//!
//! Each slab [nτ, (n+1)τ] freezes the conductivity at the delayed
//! temperature θ(t - τ), with θ(s) = θ₀ for s <= 0. The slab voltage comes
//! from the contraction fixed point (with an optional direct-elimination
//! cross-check reusing the same unit elliptic responses); the heat equation
//! then marches through the slab's inner nodes with the node-local truncated
//! Joule source. Slab joints reuse the same floating-point values and field
//! buffers, so V, θ and u paste continuously. When T is not a multiple of τ
//! the last slab is shortened. dt divides τ exactly, so every delayed lookup
//! lands on a stored node and no temporal interpolation ever occurs.

use crate::circuit::{
    self, fixed_point_slab, rhs_constant, CircuitError, CircuitParams, SlabInit, VoltageTrace,
};
use crate::diagnostics::{DiagnosticsRecord, DiagnosticsRow};
use crate::elliptic::{check_elliptic_energy, dirichlet_h1_sq};
use crate::grid::{Field, Grid, LateralTrace};
use crate::laws::{MaterialLaws, Truncation};
use crate::parabolic::{
    dual_residual_proxy, heat_step, joule_source, mass_balance_residual,
    truncation_active_fraction, HeatState, HeatStepConfig, HeatStepError,
};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SchemeError {
    #[error("invalid scheme configuration: {0}")]
    InvalidConfig(String),
    #[error("slab {slab}: {source}")]
    Slab {
        slab: usize,
        #[source]
        source: CircuitError,
    },
    #[error("slab {slab}, node {node}: {source}")]
    Heat {
        slab: usize,
        node: usize,
        #[source]
        source: HeatStepError,
    },
    #[error("alpha must lie in (2/3, 1), got {0}")]
    AlphaOutOfRange(f64),
}

/// Scheme parameters: slab width τ (< τ*), inner step dt (divides τ and T),
/// horizon T, tolerances, and the fourth-estimate exponent α ∈ (2/3, 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    pub tau: f64,
    pub dt: f64,
    pub t_final: f64,
    pub tol_fp: f64,
    pub tol_lin: f64,
    pub tol_newton: f64,
    pub alpha: f64,
    pub max_fp_iter: usize,
    pub max_newton: usize,
    pub max_halvings: usize,
}

impl Default for SchemeConfig {
    fn default() -> Self {
        SchemeConfig {
            tau: 0.0,
            dt: 0.0,
            t_final: 0.0,
            tol_fp: 1e-8,
            tol_lin: 1e-10,
            tol_newton: 1e-10,
            alpha: 5.0 / 6.0,
            max_fp_iter: 200,
            max_newton: 25,
            max_halvings: 4,
        }
    }
}

/// Integer quotient a/b when it is one to within 1e-9 relative; None otherwise.
fn exact_divisor(a: f64, b: f64) -> Option<usize> {
    if !(b > 0.0) || !(a > 0.0) {
        return None;
    }
    let q = a / b;
    let r = q.round();
    if r >= 1.0 && (q - r).abs() <= 1e-9 * q.max(1.0) {
        Some(r as usize)
    } else {
        None
    }
}

impl SchemeConfig {
    /// Violations that need no grid or laws: positivity, divisibility, α.
    pub fn violations_basic(&self, params: &CircuitParams) -> Vec<String> {
        let mut v = Vec::new();
        if let Err(e) = params.validate() {
            v.push(e);
        }
        for (name, val) in [
            ("tau", self.tau),
            ("dt", self.dt),
            ("t_final", self.t_final),
            ("tol_fp", self.tol_fp),
            ("tol_lin", self.tol_lin),
            ("tol_newton", self.tol_newton),
        ] {
            if !(val > 0.0) {
                v.push(format!("scheme.{name} must be positive, got {val}"));
            }
        }
        if self.tau > 0.0 && self.dt > 0.0 {
            if exact_divisor(self.tau, self.dt).is_none() {
                v.push(format!(
                    "scheme.dt = {} must divide tau = {} exactly",
                    self.dt, self.tau
                ));
            }
            if self.t_final > 0.0 && exact_divisor(self.t_final, self.dt).is_none() {
                v.push(format!(
                    "scheme.dt = {} must divide t_final = {} exactly",
                    self.dt, self.t_final
                ));
            }
        }
        if !(self.alpha > 2.0 / 3.0 && self.alpha < 1.0) {
            v.push(format!(
                "scheme.alpha must lie in (2/3, 1), got {}",
                self.alpha
            ));
        }
        v
    }

    /// Every violated precondition (not just the first).
    pub fn violations(&self, params: &CircuitParams, laws: &MaterialLaws, g: &Grid) -> Vec<String> {
        let mut v = self.violations_basic(params);
        if self.tau > 0.0 && self.dt > 0.0 {
            let tau_star = circuit::threshold_tau_star(params, laws, g);
            if !(self.tau < tau_star) {
                v.push(format!(
                    "scheme.tau = {} must be strictly below tau* = {} (0 < tau < tau*)",
                    self.tau, tau_star
                ));
            }
        }
        v
    }
}

/// The conjugate exponents of the fourth estimate:
/// q = (3α+2)/(3α-2) ∈ (5, ∞) and p = (2+3α)/4 ∈ (1, 5/4), 1/p + 1/q = 1.
pub fn exponent_pair(alpha: f64) -> Result<(f64, f64), SchemeError> {
    if !(alpha > 2.0 / 3.0 && alpha < 1.0) {
        return Err(SchemeError::AlphaOutOfRange(alpha));
    }
    let p = (2.0 + 3.0 * alpha) / 4.0;
    let q = (3.0 * alpha + 2.0) / (3.0 * alpha - 2.0);
    let conj = 1.0 / p + 1.0 / q;
    assert!(
        (conj - 1.0).abs() <= 1e-14,
        "conjugacy defect {}",
        conj - 1.0
    );
    Ok((p, q))
}

/// Thermal data of a run: initial temperature, the lateral boundary
/// temperature trace over time, and the lower bound θ* the data are
/// expected to respect.
pub struct ThermalData<'a> {
    pub theta0: Field,
    pub theta_gamma: &'a (dyn Fn(&Grid, f64) -> LateralTrace + Sync),
    pub theta_star: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    /// Also solve every slab by direct elimination and record the sup-norm
    /// gap to the fixed point.
    pub cross_check_direct: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions {
            cross_check_direct: true,
        }
    }
}

/// Scalar facts about a completed run, enough to replay every check.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub const_rhs: f64,
    pub phi0_h1_sq: f64,
    pub f_l1: f64,
    pub kappa: f64,
    pub tau_star: f64,
    pub theta_star: f64,
    pub alpha: f64,
    pub p: f64,
    pub q: f64,
    pub sup_v: f64,
    pub sup_v_prime: f64,
    /// max over slabs of ‖direct - fixed point‖_∞ (0 when not cross-checked).
    pub mode_equivalence_gap: f64,
    pub max_contraction_ratio: f64,
    pub max_fp_iterations: usize,
    pub max_first_increment: f64,
    pub max_mass_residual: f64,
    pub min_theta: f64,
    /// θ₀ >= θ* and every sampled θ_Γ node >= θ*.
    pub data_lower_bound_ok: bool,
    /// Delayed lookups served; every one landed on a stored node.
    pub delay_lookups: usize,
    pub delay_misses: usize,
    pub n_slabs: usize,
}

/// A completed pasted run.
pub struct RunState {
    pub config: SchemeConfig,
    /// Node times 0, dt, 2dt, ..., T.
    pub times: Vec<f64>,
    pub voltage: VoltageTrace,
    pub i_r: Vec<f64>,
    pub slab_index: Vec<usize>,
    pub fp_iterations: Vec<usize>,
    /// θ at every node (the slab-joint buffers are shared by construction).
    pub theta_nodes: Vec<Field>,
    pub diagnostics: DiagnosticsRecord,
    pub summary: RunSummary,
}

/// z_τ = (1+u)^{α/2}; clamped at zero for out-of-range u (only reachable on
/// data violating the θ* assumption).
fn z_of_u(u: f64, alpha: f64) -> f64 {
    (1.0 + u).max(0.0).powf(0.5 * alpha)
}

/// Σ over interior faces of (Δz/δ)² A δ.
fn z_grad_sq(g: &Grid, u: &Field, alpha: f64) -> f64 {
    let vol = g.hx * g.hy * g.hz;
    let mut e = 0.0;
    for k in 0..g.nz {
        for j in 0..g.ny {
            for i in 1..g.nx {
                let d = (z_of_u(u[g.idx(i, j, k)], alpha) - z_of_u(u[g.idx(i - 1, j, k)], alpha))
                    / g.hx;
                e += d * d * vol;
            }
        }
    }
    for k in 0..g.nz {
        for j in 1..g.ny {
            for i in 0..g.nx {
                let d = (z_of_u(u[g.idx(i, j, k)], alpha) - z_of_u(u[g.idx(i, j - 1, k)], alpha))
                    / g.hy;
                e += d * d * vol;
            }
        }
    }
    for k in 1..g.nz {
        for j in 0..g.ny {
            for i in 0..g.nx {
                let d = (z_of_u(u[g.idx(i, j, k)], alpha) - z_of_u(u[g.idx(i, j, k - 1)], alpha))
                    / g.hz;
                e += d * d * vol;
            }
        }
    }
    e
}

fn lp_u_term(g: &Grid, u: &Field, p: f64) -> f64 {
    let e = 4.0 * p / 3.0;
    let mut s = 0.0;
    for &uc in &u.0 {
        s += uc.abs().powf(e);
    }
    s * g.cell_volume()
}

fn min_with_index(f: &Field) -> (f64, usize) {
    let mut min = f64::INFINITY;
    let mut arg = 0;
    for (i, &v) in f.0.iter().enumerate() {
        if v < min {
            min = v;
            arg = i;
        }
    }
    (min, arg)
}

/// Run the pasted slab scheme over [0, T].
pub fn run(
    config: &SchemeConfig,
    params: &CircuitParams,
    laws: &MaterialLaws,
    g: &Grid,
    data: &ThermalData<'_>,
    options: &RunOptions,
) -> Result<RunState, SchemeError> {
    let violations = config.violations(params, laws, g);
    if !violations.is_empty() {
        return Err(SchemeError::InvalidConfig(violations.join("; ")));
    }
    data.theta0
        .check(g)
        .map_err(|e| SchemeError::InvalidConfig(format!("theta0: {e}")))?;

    let steps_per_slab = exact_divisor(config.tau, config.dt).unwrap();
    let total_steps = exact_divisor(config.t_final, config.dt).unwrap();
    let (p_exp, q_exp) = exponent_pair(config.alpha)?;
    let trunc = Truncation::new(config.tau).expect("validated tau");
    let kappa = circuit::contraction_constant(params, laws, g, config.tau);
    let tau_star = circuit::threshold_tau_star(params, laws, g);

    let (const_rhs, phi0_sol) = rhs_constant(params, laws, &data.theta0, g, config.tol_lin)
        .map_err(|source| SchemeError::Slab { slab: 0, source })?;
    let phi0_h1_sq = dirichlet_h1_sq(g, &phi0_sol.phi, params.v0);
    let f_l1 = params.source.l1_norm(config.t_final);

    let heat_cfg = HeatStepConfig {
        dt: config.dt,
        tol_newton: config.tol_newton,
        max_newton: config.max_newton,
        max_halvings: config.max_halvings,
    };

    let n_nodes = total_steps + 1;
    let mut times = Vec::with_capacity(n_nodes);
    let mut v_all = Vec::with_capacity(n_nodes);
    let mut vp_all = Vec::with_capacity(n_nodes);
    let mut w_all = Vec::with_capacity(n_nodes);
    let mut ir_all = Vec::with_capacity(n_nodes);
    let mut slab_all = Vec::with_capacity(n_nodes);
    let mut iter_all = Vec::with_capacity(n_nodes);
    let mut theta_nodes: Vec<Field> = Vec::with_capacity(n_nodes);
    let mut rows: Vec<DiagnosticsRow> = Vec::with_capacity(n_nodes);

    theta_nodes.push(data.theta0.clone());
    let mut state = HeatState::from_theta(laws, data.theta0.clone(), 0.0);
    let mut init = SlabInit {
        t0: 0.0,
        v: params.v0,
        w: 0.0,
    };
    let mut data_ok = data.theta0.min() >= data.theta_star;

    let mut z_accum = 0.0;
    let mut lp_accum = 0.0;
    let mut mode_gap = 0.0f64;
    let mut max_ratio = 0.0f64;
    let mut max_iters = 0usize;
    let mut max_first_inc = 0.0f64;
    let mut max_mass_res = 0.0f64;
    let mut delay_lookups = 0usize;
    let mut delay_misses = 0usize;
    let mut slab = 0usize;

    let mut done_steps = 0usize;
    while done_steps < total_steps {
        let slab_steps = steps_per_slab.min(total_steps - done_steps);
        let n = slab_steps + 1;
        // Delayed fields: node j of this slab sees global node
        // done_steps + j - steps_per_slab, clamped to the θ₀ extension.
        let delayed: Vec<Field> = (0..n)
            .map(|j| {
                delay_lookups += 1;
                let global = done_steps + j;
                if global <= steps_per_slab {
                    theta_nodes[0].clone()
                } else {
                    let idx = global - steps_per_slab;
                    if idx >= theta_nodes.len() {
                        delay_misses += 1;
                        theta_nodes.last().unwrap().clone()
                    } else {
                        theta_nodes[idx].clone()
                    }
                }
            })
            .collect();

        let fp = fixed_point_slab(
            params,
            laws,
            g,
            &delayed,
            init,
            const_rhs,
            config.dt,
            config.tol_fp,
            config.max_fp_iter,
            config.tol_lin,
        )
        .map_err(|source| SchemeError::Slab { slab, source })?;
        if options.cross_check_direct {
            let unit_ir: Vec<f64> = fp.units.iter().map(|u| u.i_r).collect();
            let f_int: Vec<f64> = (0..n)
                .map(|m| params.source.integral(init.t0 + m as f64 * config.dt))
                .collect();
            let direct = circuit::direct_sweep_from_units(
                params, init, &unit_ir, const_rhs, &f_int, config.dt,
            );
            mode_gap = mode_gap.max(fp.trace.sup_diff(&direct));
        }
        let slab_ratio = fp.ratios.iter().copied().fold(0.0f64, f64::max);
        max_ratio = max_ratio.max(slab_ratio);
        max_iters = max_iters.max(fp.iterations);
        max_first_inc = max_first_inc.max(fp.first_increment);

        if slab == 0 {
            // Node 0: record the initial elliptic state; no step into it.
            let sol0 = fp.units[0].at_voltage(g, fp.trace.v[0]);
            let er = check_elliptic_energy(&sol0, laws, g);
            let (min_theta, min_cell) = min_with_index(&state.theta);
            times.push(0.0);
            v_all.push(fp.trace.v[0]);
            vp_all.push(fp.trace.v_prime[0]);
            w_all.push(fp.trace.w[0]);
            ir_all.push(sol0.i_r);
            slab_all.push(0);
            iter_all.push(fp.iterations);
            rows.push(DiagnosticsRow {
                t: 0.0,
                min_theta,
                min_cell,
                mass_theta: crate::grid::integrate_volume(g, &state.theta),
                energy_psi: er.energy_psi,
                energy_psi_bound: er.psi_bound,
                energy_phi: er.energy_phi,
                energy_phi_bound: er.phi_bound,
                mass_residual: 0.0,
                trunc_fraction: truncation_active_fraction(&sol0, &trunc),
                contraction_ratio: slab_ratio,
                z_grad_sq_accum: z_accum,
                lp_u_accum: lp_accum,
                dual_proxy: 0.0,
            });
        }

        #[allow(clippy::needless_range_loop)] // j indexes nodes, units and the trace together
        for j in 1..=slab_steps {
            let node = done_steps + j;
            let t_node = node as f64 * config.dt;
            let sol = fp.units[j].at_voltage(g, fp.trace.v[j]);
            let source = joule_source(laws, &delayed[j], &sol, &trunc, g);
            let theta_gamma = (data.theta_gamma)(g, t_node);
            theta_gamma
                .check(g)
                .map_err(|e| SchemeError::InvalidConfig(format!("theta_gamma: {e}")))?;
            data_ok = data_ok && theta_gamma.min() >= data.theta_star;
            let h_gamma = LateralTrace(theta_gamma.0.iter().map(|&th| laws.h(th)).collect());
            let next = heat_step(laws, g, &state, &source, &h_gamma, &heat_cfg)
                .map_err(|source| SchemeError::Heat { slab, node, source })?;
            let res = mass_balance_residual(g, &state, &next, &source, &h_gamma, laws, config.dt);
            max_mass_res = max_mass_res.max(res);
            let dual = dual_residual_proxy(g, &state, &next, &source, &h_gamma, laws, config.dt);
            state = next;

            z_accum += config.dt * z_grad_sq(g, &state.u, config.alpha);
            lp_accum += config.dt * lp_u_term(g, &state.u, p_exp);
            let er = check_elliptic_energy(&sol, laws, g);
            let (min_theta, min_cell) = min_with_index(&state.theta);

            times.push(t_node);
            v_all.push(fp.trace.v[j]);
            vp_all.push(fp.trace.v_prime[j]);
            w_all.push(fp.trace.w[j]);
            ir_all.push(sol.i_r);
            slab_all.push(slab);
            iter_all.push(fp.iterations);
            rows.push(DiagnosticsRow {
                t: t_node,
                min_theta,
                min_cell,
                mass_theta: crate::grid::integrate_volume(g, &state.theta),
                energy_psi: er.energy_psi,
                energy_psi_bound: er.psi_bound,
                energy_phi: er.energy_phi,
                energy_phi_bound: er.phi_bound,
                mass_residual: res,
                trunc_fraction: truncation_active_fraction(&sol, &trunc),
                contraction_ratio: slab_ratio,
                z_grad_sq_accum: z_accum,
                lp_u_accum: lp_accum,
                dual_proxy: dual,
            });
            theta_nodes.push(state.theta.clone());
        }

        // Continuous pasting: the next slab starts from the same floats.
        init = SlabInit {
            t0: (done_steps + slab_steps) as f64 * config.dt,
            v: *fp.trace.v.last().unwrap(),
            w: *fp.trace.w.last().unwrap(),
        };
        done_steps += slab_steps;
        slab += 1;
    }

    let sup_v = v_all.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let sup_vp = vp_all.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let min_theta = rows
        .iter()
        .map(|r| r.min_theta)
        .fold(f64::INFINITY, f64::min);

    Ok(RunState {
        config: *config,
        times,
        voltage: VoltageTrace {
            t_nodes: (0..=total_steps).map(|i| i as f64 * config.dt).collect(),
            v: v_all.clone(),
            v_prime: vp_all.clone(),
            w: w_all,
        },
        i_r: ir_all,
        slab_index: slab_all,
        fp_iterations: iter_all,
        theta_nodes,
        diagnostics: DiagnosticsRecord {
            rows,
            alpha: config.alpha,
            p: p_exp,
        },
        summary: RunSummary {
            const_rhs,
            phi0_h1_sq,
            f_l1,
            kappa,
            tau_star,
            theta_star: data.theta_star,
            alpha: config.alpha,
            p: p_exp,
            q: q_exp,
            sup_v,
            sup_v_prime: sup_vp,
            mode_equivalence_gap: mode_gap,
            max_contraction_ratio: max_ratio,
            max_fp_iterations: max_iters,
            max_first_increment: max_first_inc,
            max_mass_residual: max_mass_res,
            min_theta,
            data_lower_bound_ok: data_ok,
            delay_lookups,
            delay_misses,
            n_slabs: slab,
        },
    })
}

/// Discrete ‖θ_a - θ_b‖_{L^p(Q)} over matching node grids.
pub fn lp_q_distance(g: &Grid, a: &[Field], b: &[Field], dt: f64, p: f64) -> f64 {
    assert_eq!(a.len(), b.len(), "runs must share node grids");
    let mut acc = 0.0;
    for (fa, fb) in a.iter().zip(b).skip(1) {
        let mut s = 0.0;
        for (x, y) in fa.0.iter().zip(&fb.0) {
            s += (x - y).abs().powf(p);
        }
        acc += dt * s * g.cell_volume();
    }
    acc.powf(1.0 / p)
}

/// Outcome of the τ-refinement study with τ, τ/2, τ/4 at fixed dt.
pub struct RefinementReport {
    pub taus: [f64; 3],
    /// d_k = ‖θ_{τ/2^k} - θ_{τ/2^{k+1}}‖_{L^p(Q)}, k = 0, 1.
    pub theta_distances: [f64; 2],
    /// sup-norm voltage differences between consecutive runs.
    pub v_distances: [f64; 2],
    /// d₁/d₀ (NaN when d₀ = 0).
    pub cauchy_ratio: f64,
    /// d₁ <= 0.75 d₀, or both distances at the fixed-point noise floor.
    pub cauchy_ok: bool,
    /// Flags d₁ > d₀.
    pub nondecreasing: bool,
    /// Mean over nodes of the truncation-active cell fraction, per run.
    pub trunc_fractions: [f64; 3],
    pub runs: Vec<RunState>,
}

/// Run with τ, τ/2, τ/4 (dt fixed) and compare. Requires base τ < τ*/4 so
/// both halvings stay admissible with margin.
pub fn tau_refinement_study(
    config: &SchemeConfig,
    params: &CircuitParams,
    laws: &MaterialLaws,
    g: &Grid,
    data: &ThermalData<'_>,
    options: &RunOptions,
) -> Result<RefinementReport, SchemeError> {
    let tau_star = circuit::threshold_tau_star(params, laws, g);
    if !(config.tau < 0.25 * tau_star) {
        return Err(SchemeError::InvalidConfig(format!(
            "refinement needs tau = {} < tau*/4 = {}",
            config.tau,
            0.25 * tau_star
        )));
    }
    if exact_divisor(config.tau / 4.0, config.dt).is_none() {
        return Err(SchemeError::InvalidConfig(format!(
            "refinement needs dt = {} to divide tau/4 = {}",
            config.dt,
            config.tau / 4.0
        )));
    }
    let taus = [config.tau, config.tau / 2.0, config.tau / 4.0];
    let mut runs = Vec::with_capacity(3);
    for tau_k in taus {
        let cfg_k = SchemeConfig {
            tau: tau_k,
            ..*config
        };
        runs.push(run(&cfg_k, params, laws, g, data, options)?);
    }
    let p = runs[0].summary.p;
    let d0 = lp_q_distance(g, &runs[0].theta_nodes, &runs[1].theta_nodes, config.dt, p);
    let d1 = lp_q_distance(g, &runs[1].theta_nodes, &runs[2].theta_nodes, config.dt, p);
    let v0 = runs[0].voltage.sup_diff(&runs[1].voltage);
    let v1 = runs[1].voltage.sup_diff(&runs[2].voltage);
    let noise = 10.0 * config.tol_fp;
    let cauchy_ok = d1 <= 0.75 * d0 || (d0 <= noise && d1 <= noise);
    let trunc_fractions = std::array::from_fn(|i| {
        let rows = &runs[i].diagnostics.rows;
        rows.iter().map(|r| r.trunc_fraction).sum::<f64>() / rows.len() as f64
    });
    Ok(RefinementReport {
        taus,
        theta_distances: [d0, d1],
        v_distances: [v0, v1],
        cauchy_ratio: d1 / d0,
        cauchy_ok,
        nondecreasing: d1 > d0,
        trunc_fractions,
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::SourceTerm;
    use crate::laws::{ExchangeLaw, LawFamily};

    fn uniform_laws(sigma: f64) -> MaterialLaws {
        MaterialLaws::new(
            LawFamily::Constant { value: sigma },
            LawFamily::Constant { value: 1.0 },
            ExchangeLaw::Linear { slope: 1.0 },
        )
        .unwrap()
    }

    fn base_params(v0: f64) -> CircuitParams {
        CircuitParams {
            lambda1: 1.0,
            lambda2: 1.0,
            lambda3: 1.0,
            v0,
            v0_prime: 0.0,
            source: SourceTerm::Zero,
        }
    }

    #[test]
    fn exponent_pair_reproduces_the_conjugate_exponents() {
        let (p, q) = exponent_pair(5.0 / 6.0).unwrap();
        assert!((p - 9.0 / 8.0).abs() < 1e-13, "p = {p}");
        assert!((q - 9.0).abs() < 1e-12, "q = {q}");
        assert!((1.0 / p + 1.0 / q - 1.0).abs() <= 1e-14);
        let (p, q) = exponent_pair(0.7).unwrap();
        assert!((q - 41.0).abs() < 1e-9, "q = {q}");
        assert!((p - 1.025).abs() < 1e-12, "p = {p}");
        // α → 1⁻ approaches the endpoint (5/4, 5).
        let (p, q) = exponent_pair(1.0 - 1e-9).unwrap();
        assert!((p - 1.25).abs() < 1e-8);
        assert!((q - 5.0).abs() < 1e-7);
        assert!(exponent_pair(2.0 / 3.0).is_err());
        assert!(exponent_pair(1.0).is_err());
    }

    #[test]
    fn all_zero_electrical_data_stays_at_equilibrium() {
        let g = Grid::new(4, 4, 4, 1.0, 1.0, 1.0).unwrap();
        let laws = uniform_laws(2.0);
        let params = base_params(0.0);
        let config = SchemeConfig {
            tau: 0.02,
            dt: 0.005,
            t_final: 0.1,
            ..Default::default()
        };
        let data = ThermalData {
            theta0: Field::constant(&g, 2.0),
            theta_gamma: &|g: &Grid, _t| LateralTrace::constant(g, 2.0),
            theta_star: 1.0,
        };
        let state = run(&config, &params, &laws, &g, &data, &RunOptions::default()).unwrap();
        assert!(state.voltage.v.iter().all(|&v| v == 0.0));
        for th in &state.theta_nodes {
            for &v in &th.0 {
                assert!((v - 2.0).abs() < 1e-10);
            }
        }
        assert_eq!(state.summary.delay_misses, 0);
        assert!(state.summary.data_lower_bound_ok);
        assert_eq!(state.summary.n_slabs, 5);
        // Last slab shortening: T = 0.11 gives a final half slab.
        let config = SchemeConfig {
            t_final: 0.11,
            ..config
        };
        let state = run(&config, &params, &laws, &g, &data, &RunOptions::default()).unwrap();
        assert_eq!(state.summary.n_slabs, 6);
        assert_eq!(state.times.len(), 23);
        assert!((state.times.last().unwrap() - 0.11).abs() < 1e-12);
    }

    #[test]
    fn uniform_sigma_run_matches_rlc_closed_form() {
        // σ ≡ 1, |B| = ℓ = 1, λ = (1,1,1), V₀ = 1, V₀' = 0:
        // λ₁V'' + (λ₂ + σ₀|B|/ℓ)V' + λ₃V = 0 is critically damped with
        // V(t) = (1+t)e^{-t}. The temperature rises from the Joule source but
        // never feeds back (σ constant), so V follows the closed form.
        let g = Grid::new(4, 4, 4, 1.0, 1.0, 1.0).unwrap();
        let laws = uniform_laws(1.0);
        let params = base_params(1.0);
        let config = SchemeConfig {
            tau: 0.016,
            dt: 0.002,
            t_final: 0.4,
            ..Default::default()
        };
        let data = ThermalData {
            theta0: Field::constant(&g, 2.0),
            theta_gamma: &|g: &Grid, _t| LateralTrace::constant(g, 2.0),
            theta_star: 1.0,
        };
        let state = run(&config, &params, &laws, &g, &data, &RunOptions::default()).unwrap();
        let mut rel = 0.0f64;
        for (t, v) in state.times.iter().zip(&state.voltage.v) {
            let exact = (1.0 + t) * (-t).exp();
            rel = rel.max((v - exact).abs());
        }
        assert!(rel <= 1e-3, "rel error {rel}");
        assert!(state.summary.mode_equivalence_gap <= 10.0 * config.tol_fp);
        assert!(state.summary.max_contraction_ratio <= 1.05 * state.summary.kappa);
        assert!(
            state.summary.min_theta >= 2.0 - 1e-10,
            "Joule heating only adds heat"
        );
        assert!(state.summary.max_mass_residual <= 10.0 * config.tol_newton);
    }

    #[test]
    fn refinement_study_on_constant_sigma_is_inert() {
        // With σ constant the delay never matters: runs at τ, τ/2, τ/4 agree
        // to the fixed-point noise floor.
        let g = Grid::new(3, 3, 3, 1.0, 1.0, 1.0).unwrap();
        let laws = uniform_laws(1.0);
        let params = base_params(1.0);
        let config = SchemeConfig {
            tau: 0.016,
            dt: 0.002,
            t_final: 0.064,
            ..Default::default()
        };
        let data = ThermalData {
            theta0: Field::constant(&g, 2.0),
            theta_gamma: &|g: &Grid, _t| LateralTrace::constant(g, 2.0),
            theta_star: 1.0,
        };
        let rep = tau_refinement_study(&config, &params, &laws, &g, &data, &RunOptions::default())
            .unwrap();
        assert!(
            rep.theta_distances[0] <= 10.0 * config.tol_fp,
            "d0 = {}",
            rep.theta_distances[0]
        );
        assert!(
            rep.theta_distances[1] <= 10.0 * config.tol_fp,
            "d1 = {}",
            rep.theta_distances[1]
        );
        assert!(rep.cauchy_ok);
        assert_eq!(rep.trunc_fractions, [0.0, 0.0, 0.0]);
    }

    #[test]
    fn config_violations_are_collected() {
        let g = Grid::new(4, 4, 4, 1.0, 1.0, 1.0).unwrap();
        let laws = uniform_laws(2.0);
        let params = base_params(1.0);
        // τ = τ* exactly must cite the strict inequality; dt = τ/3.5 fails
        // divisibility; alpha out of range.
        let tau_star = circuit::threshold_tau_star(&params, &laws, &g);
        let config = SchemeConfig {
            tau: tau_star,
            dt: tau_star / 3.5,
            t_final: 1.0,
            alpha: 0.5,
            ..Default::default()
        };
        let v = config.violations(&params, &laws, &g);
        assert!(v.iter().any(|m| m.contains("tau*")), "{v:?}");
        assert!(v.iter().any(|m| m.contains("divide tau")), "{v:?}");
        assert!(v.iter().any(|m| m.contains("alpha")), "{v:?}");
        assert!(v.len() >= 3);
    }
}
