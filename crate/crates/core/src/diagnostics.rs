//! Runtime verification of the computable a priori estimates.
//!
//! Every check is a pure function of recorded rows (plus run constants), so
//! replaying a saved record reproduces identical verdicts:
//!
//! - minimum principle: min θ >= θ* - 1e-10 over all nodes and cells;
//! - voltage bound: sup |V|, sup |V'| under an explicit Gronwall constant
//!   assembled from λ's, T, σ^, |Ω|, |B|, ℓ, ‖f‖_{L¹}, V₀, V₀', ‖φ₀‖_{H¹};
//! - energy inequalities: the per-node ψ- and φ-energy bounds;
//! - mass balance: per-step residual <= 10 · tol_newton;
//! - contraction: measured slab ratios <= 1.05 κ;
//! - fourth-estimate monitors: ‖∇(1+u)^{α/2}‖_{L²(Q)} and the L^{4p/3}(Q)
//!   norm of u, compared across τ-refinement for empirical τ-uniformity.

use crate::circuit::CircuitParams;
use crate::grid::Grid;
use crate::laws::MaterialLaws;

/// Slack on the minimum principle; absorbs the Newton stopping tolerance.
pub const MIN_PRINCIPLE_SLACK: f64 = 1e-10;
/// Measured contraction ratios may exceed κ by at most this factor
/// (discretization of the continuous estimate).
pub const CONTRACTION_SLACK: f64 = 1.05;
/// Allowed relative spread of the fourth-estimate norms across τ-refinement.
pub const FOURTH_ESTIMATE_SPREAD: f64 = 0.25;

/// One per-node row of the run record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub min_theta: f64,
    /// Cell index attaining the minimum.
    pub min_cell: usize,
    /// ∫_Ω θ dv.
    pub mass_theta: f64,
    pub energy_psi: f64,
    pub energy_psi_bound: f64,
    pub energy_phi: f64,
    pub energy_phi_bound: f64,
    /// Normalized w = 1 residual of the step into this node (0 at t = 0).
    pub mass_residual: f64,
    /// Fraction of cells where T_τ clips |∇φ|².
    pub trunc_fraction: f64,
    /// Largest fixed-point ratio of the slab owning this node.
    pub contraction_ratio: f64,
    /// Running ∫₀^t ‖∇ z_τ‖²_{L²} with z_τ = (1+u)^{α/2}.
    pub z_grad_sq_accum: f64,
    /// Running ∫₀^t Σ_c V_c |u_c|^{4p/3}.
    pub lp_u_accum: f64,
    /// Informational dual-norm stand-in: max residual functional over
    /// w ∈ {1, x/Lx, y/Ly, z/ℓ} for the step into this node.
    pub dual_proxy: f64,
}

/// Time-ordered rows plus the exponents they were accumulated with.
#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsRecord {
    pub rows: Vec<DiagnosticsRow>,
    pub alpha: f64,
    pub p: f64,
}

impl DiagnosticsRecord {
    /// ‖∇ z_τ‖_{L²(Q)} over the whole run.
    pub fn z_grad_norm(&self) -> f64 {
        self.rows
            .last()
            .map(|r| r.z_grad_sq_accum.sqrt())
            .unwrap_or(0.0)
    }

    /// Discrete ‖u‖_{L^{4p/3}(Q)}.
    pub fn lp_u_norm(&self) -> f64 {
        let e = 4.0 * self.p / 3.0;
        self.rows
            .last()
            .map(|r| r.lp_u_accum.powf(1.0 / e))
            .unwrap_or(0.0)
    }

    pub fn min_theta(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.min_theta)
            .fold(f64::INFINITY, f64::min)
    }

    /// L^p-in-time norm of the dual-norm stand-in (informational).
    pub fn dual_proxy_lp_norm(&self) -> f64 {
        let mut acc = 0.0;
        for pair in self.rows.windows(2) {
            let dt = pair[1].t - pair[0].t;
            acc += dt * pair[1].dual_proxy.abs().powf(self.p);
        }
        acc.powf(1.0 / self.p)
    }
}

/// Verdict of one check: observed quantity against its bound.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub observed: f64,
    pub bound: f64,
    pub detail: String,
}

impl CheckOutcome {
    fn new(name: &str, passed: bool, observed: f64, bound: f64, detail: String) -> CheckOutcome {
        CheckOutcome {
            name: name.to_string(),
            passed,
            observed,
            bound,
            detail,
        }
    }
}

/// min over all rows of min θ >= θ* - 1e-10. On failure the detail carries
/// the first violating (t, cell, value).
pub fn check_min_principle(record: &DiagnosticsRecord, theta_star: f64) -> CheckOutcome {
    let bound = theta_star - MIN_PRINCIPLE_SLACK;
    for row in &record.rows {
        if row.min_theta < bound {
            return CheckOutcome::new(
                "min_principle",
                false,
                row.min_theta,
                bound,
                format!(
                    "first violation at t = {}, cell {}, theta = {}",
                    row.t, row.min_cell, row.min_theta
                ),
            );
        }
    }
    CheckOutcome::new(
        "min_principle",
        true,
        record.min_theta(),
        bound,
        String::new(),
    )
}

/// Inputs of the explicit voltage bound that are not part of the row record.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VoltageBoundInputs {
    pub t_final: f64,
    /// Discrete ‖φ₀‖²_{H¹(Ω)} of the auxiliary initial potential.
    pub phi0_h1_sq: f64,
    /// ‖f‖_{L¹(0,T)}.
    pub f_l1: f64,
}

/// The τ-independent constants (C_V, C_V') bounding sup |V| and sup |V'|:
/// the energy-plus-Gronwall chain with the crude current bound
/// ∫σ|∇φ|² <= 4σ^|Ω| V²/ℓ², then a term-by-term comparison in the ODE with
/// |I_R| <= (σ^|B|/ℓ)|V| (variational comparison with the uniform-σ^ medium).
pub fn voltage_bound_constants(
    params: &CircuitParams,
    laws: &MaterialLaws,
    g: &Grid,
    inp: &VoltageBoundInputs,
) -> (f64, f64) {
    let (_, sigma_hi) = laws.sigma_bounds();
    let vol = g.volume();
    let ell = g.ell;
    let t = inp.t_final;
    let (l1, l2, l3) = (params.lambda1, params.lambda2, params.lambda3);
    let c_data = l1 * params.v0_prime.abs() + l2 * params.v0.abs() + inp.f_l1;
    let a = 0.5 * l1 * params.v0 * params.v0
        + t * (ell + sigma_hi * vol) / (l2 * ell) * c_data * c_data
        + t * sigma_hi * sigma_hi * vol * (ell + sigma_hi * vol) / (l2 * ell.powi(3))
            * inp.phi0_h1_sq;
    let b = 2.0 * sigma_hi * vol * (ell + sigma_hi * vol) / (l2 * ell.powi(4));
    let c_v = (2.0 * a / l1).sqrt() * (b * t / l1).exp();
    let ihat_bound = sigma_hi * g.base_area() / ell;
    let c0_bound = l1 * params.v0_prime.abs() + l2 * params.v0.abs() + ihat_bound * params.v0.abs();
    let c_vp = (l2 * c_v + l3 * t * c_v + c0_bound + ihat_bound * c_v + inp.f_l1) / l1;
    (c_v, c_vp)
}

/// sup_t |V| <= C_V and sup_t |V'| <= C_V'.
pub fn check_voltage_bound(
    sup_v: f64,
    sup_v_prime: f64,
    params: &CircuitParams,
    laws: &MaterialLaws,
    g: &Grid,
    inp: &VoltageBoundInputs,
) -> Vec<CheckOutcome> {
    let (c_v, c_vp) = voltage_bound_constants(params, laws, g, inp);
    vec![
        CheckOutcome::new("voltage_sup_bound", sup_v <= c_v, sup_v, c_v, String::new()),
        CheckOutcome::new(
            "voltage_derivative_bound",
            sup_v_prime <= c_vp,
            sup_v_prime,
            c_vp,
            String::new(),
        ),
    ]
}

/// Per-node ψ- and φ-energy inequalities, with relative slack 1e-10 as
/// recorded at solve time.
pub fn check_energy(record: &DiagnosticsRecord) -> CheckOutcome {
    let slack = crate::elliptic::ENERGY_SLACK;
    let mut worst: f64 = f64::NEG_INFINITY;
    for row in &record.rows {
        let psi_excess = row.energy_psi - row.energy_psi_bound * (1.0 + slack);
        let phi_excess = row.energy_phi - row.energy_phi_bound * (1.0 + slack);
        if psi_excess > 0.0 || phi_excess > 0.0 {
            return CheckOutcome::new(
                "energy_inequalities",
                false,
                row.energy_psi.max(row.energy_phi),
                row.energy_psi_bound.min(row.energy_phi_bound),
                format!("violated at t = {}", row.t),
            );
        }
        worst = worst.max(psi_excess).max(phi_excess);
    }
    CheckOutcome::new("energy_inequalities", true, worst, 0.0, String::new())
}

/// Per-step mass-balance residual <= 10 · tol_newton.
pub fn check_mass_balance(record: &DiagnosticsRecord, tol_newton: f64) -> CheckOutcome {
    let bound = 10.0 * tol_newton;
    let mut worst = 0.0f64;
    for row in &record.rows {
        if row.mass_residual > bound {
            return CheckOutcome::new(
                "mass_balance",
                false,
                row.mass_residual,
                bound,
                format!("violated at t = {}", row.t),
            );
        }
        worst = worst.max(row.mass_residual);
    }
    CheckOutcome::new("mass_balance", true, worst, bound, String::new())
}

/// Measured fixed-point ratios <= 1.05 κ on every slab.
pub fn check_contraction(record: &DiagnosticsRecord, kappa: f64) -> CheckOutcome {
    let bound = CONTRACTION_SLACK * kappa;
    let mut worst = 0.0f64;
    for row in &record.rows {
        if row.contraction_ratio > bound {
            return CheckOutcome::new(
                "contraction",
                false,
                row.contraction_ratio,
                bound,
                format!("violated at t = {}", row.t),
            );
        }
        worst = worst.max(row.contraction_ratio);
    }
    CheckOutcome::new("contraction", true, worst, bound, String::new())
}

/// Fourth-estimate norm monitors across a τ-refinement family.
#[derive(Debug, Clone, PartialEq)]
pub struct FourthEstimateReport {
    pub z_grad_norms: Vec<f64>,
    pub lp_u_norms: Vec<f64>,
    /// (max - min)/max of each monitor across the runs (0 when all zero).
    pub z_grad_spread: f64,
    pub lp_u_spread: f64,
    pub pass: bool,
}

fn spread(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if max <= 0.0 {
        0.0
    } else {
        (max - min) / max
    }
}

/// Reports ‖∇z_τ‖_{L²(Q)} and ‖u‖_{L^{4p/3}(Q)} for each τ and asserts they
/// vary by at most 25% across the family.
pub fn monitor_fourth_estimate(records: &[&DiagnosticsRecord]) -> FourthEstimateReport {
    let z: Vec<f64> = records.iter().map(|r| r.z_grad_norm()).collect();
    let u: Vec<f64> = records.iter().map(|r| r.lp_u_norm()).collect();
    let zs = spread(&z);
    let us = spread(&u);
    FourthEstimateReport {
        z_grad_norms: z,
        lp_u_norms: u,
        z_grad_spread: zs,
        lp_u_spread: us,
        pass: zs <= FOURTH_ESTIMATE_SPREAD && us <= FOURTH_ESTIMATE_SPREAD,
    }
}
