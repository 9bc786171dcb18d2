//! One implicit time step of the Kirchhoff-transformed heat equation.
//!
//! With u = K(θ) and γ = K⁻¹ the step solves, per cell,
//!
//!   V_c (γ(u⁺) - θ)/dt - (Δ_h u⁺)_c + (lateral lumping) β(u⁺_c)
//!     = V_c S_c + (lateral lumping) h_Γ,
//!
//! with zero flux on the bases Γ_b and the Robin flux β(u) - h_Γ on the
//! lateral boundary, β evaluated at the boundary-adjacent cell (first-order
//! lumping preserves the M-matrix structure behind the discrete minimum
//! principle). The nonlinear system is solved by damped Newton; the Jacobian
//! diag(V_c γ'(u)) + dt·stiffness + dt·diag(A_lat β'(u)) is symmetric
//! positive definite because γ' ∈ [1/k^, 1/k_*] and β' >= 0.
//!
//! Newton converges in the ℓ¹ norm of the integrated residual, scaled by the
//! step's mass content; testing the converged equation with w = 1 then makes
//! the mass-balance residual of `mass_balance_residual` small by construction.

use crate::elliptic::EllipticSolution;
use crate::grid::{integrate_volume, Field, Grid, GridError, LateralTrace};
use crate::laws::{MaterialLaws, Truncation};
use crate::linalg::{pcg, CgOutcome};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HeatStepError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("Newton diverged after all time halvings; residual history {history:?}")]
    NewtonDiverged { history: Vec<f64> },
    #[error("heat step configuration must be positive: {0}")]
    BadConfig(&'static str),
}

/// Step controls. `max_halvings` bounds the recursive dt halving applied
/// when Newton fails outright; substeps are composed to cover the full dt.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatStepConfig {
    pub dt: f64,
    pub tol_newton: f64,
    pub max_newton: usize,
    pub max_halvings: usize,
}

impl HeatStepConfig {
    pub fn validate(&self) -> Result<(), HeatStepError> {
        if !(self.dt > 0.0) {
            return Err(HeatStepError::BadConfig("dt"));
        }
        if !(self.tol_newton > 0.0) {
            return Err(HeatStepError::BadConfig("tol_newton"));
        }
        if self.max_newton == 0 {
            return Err(HeatStepError::BadConfig("max_newton"));
        }
        Ok(())
    }
}

/// Temperature and its Kirchhoff transform, kept consistent cellwise.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatState {
    pub theta: Field,
    pub u: Field,
    pub t: f64,
}

impl HeatState {
    pub fn from_theta(laws: &MaterialLaws, theta: Field, t: f64) -> HeatState {
        let u = Field(theta.0.iter().map(|&th| laws.kirchhoff(th)).collect());
        HeatState { theta, u, t }
    }
}

/// Truncated Joule source σ(θ_delay) T_τ(|∇φ|²); every entry lies in
/// [0, σ^/τ]. The gradient reconstruction lives in the elliptic solution.
pub fn joule_source(
    laws: &MaterialLaws,
    theta_delay: &Field,
    sol: &EllipticSolution,
    trunc: &Truncation,
    g: &Grid,
) -> Field {
    debug_assert_eq!(theta_delay.len(), g.n_cells());
    Field(
        theta_delay
            .0
            .iter()
            .zip(&sol.grad_sq.0)
            .map(|(&th, &gsq)| laws.sigma(th) * trunc.apply(gsq))
            .collect(),
    )
}

/// Fraction of cells where the truncation actually clips |∇φ|².
pub fn truncation_active_fraction(sol: &EllipticSolution, trunc: &Truncation) -> f64 {
    let n = sol.grad_sq.len();
    let active = sol
        .grad_sq
        .0
        .iter()
        .filter(|&&gsq| trunc.active(gsq))
        .count();
    active as f64 / n as f64
}

/// Shared normalization of the step residual: mass already present plus
/// everything the step can move in one dt. Keeps Newton's stopping rule and
/// the mass-balance residual on the same scale.
pub(crate) fn mass_scale(
    g: &Grid,
    laws: &MaterialLaws,
    before: &HeatState,
    source: &Field,
    h_gamma: &LateralTrace,
    dt: f64,
) -> f64 {
    let mut s = 0.0;
    for &th in &before.theta.0 {
        s += th.abs();
    }
    s *= g.cell_volume();
    let mut src = 0.0;
    for &q in &source.0 {
        src += q.abs();
    }
    s += dt * src * g.cell_volume();
    let mut bnd = 0.0;
    for fc in g.lateral_faces() {
        bnd += fc.area * (h_gamma[fc.trace_index].abs() + laws.beta(before.u[fc.cell]).abs());
    }
    s += dt * bnd;
    s.max(f64::MIN_POSITIVE)
}

/// Stiffness transmissibilities A_f/δ_f of the pure Laplacian in u:
/// interior faces only in z (Γ_b is flux-free); lateral Robin handled
/// separately.
struct HeatOperator {
    tx: f64,
    ty: f64,
    tz: f64,
    /// Accumulated lateral boundary area per cell (corner cells carry two).
    lat_area: Vec<f64>,
}

impl HeatOperator {
    fn new(g: &Grid) -> HeatOperator {
        let mut lat_area = vec![0.0; g.n_cells()];
        for fc in g.lateral_faces() {
            lat_area[fc.cell] += fc.area;
        }
        HeatOperator {
            tx: g.hy * g.hz / g.hx,
            ty: g.hx * g.hz / g.hy,
            tz: g.hx * g.hy / g.hz,
            lat_area,
        }
    }

    fn stiffness_apply(&self, g: &Grid, x: &[f64], out: &mut [f64]) {
        for k in 0..g.nz {
            for j in 0..g.ny {
                for i in 0..g.nx {
                    let c = g.idx(i, j, k);
                    let xc = x[c];
                    let mut acc = 0.0;
                    if i > 0 {
                        acc += self.tx * (xc - x[g.idx(i - 1, j, k)]);
                    }
                    if i + 1 < g.nx {
                        acc += self.tx * (xc - x[g.idx(i + 1, j, k)]);
                    }
                    if j > 0 {
                        acc += self.ty * (xc - x[g.idx(i, j - 1, k)]);
                    }
                    if j + 1 < g.ny {
                        acc += self.ty * (xc - x[g.idx(i, j + 1, k)]);
                    }
                    if k > 0 {
                        acc += self.tz * (xc - x[g.idx(i, j, k - 1)]);
                    }
                    if k + 1 < g.nz {
                        acc += self.tz * (xc - x[g.idx(i, j, k + 1)]);
                    }
                    out[c] = acc;
                }
            }
        }
    }

    fn stiffness_diag(&self, g: &Grid) -> Vec<f64> {
        let mut d = vec![0.0; g.n_cells()];
        for k in 0..g.nz {
            for j in 0..g.ny {
                for i in 0..g.nx {
                    let mut acc = 0.0;
                    if i > 0 {
                        acc += self.tx;
                    }
                    if i + 1 < g.nx {
                        acc += self.tx;
                    }
                    if j > 0 {
                        acc += self.ty;
                    }
                    if j + 1 < g.ny {
                        acc += self.ty;
                    }
                    if k > 0 {
                        acc += self.tz;
                    }
                    if k + 1 < g.nz {
                        acc += self.tz;
                    }
                    d[g.idx(i, j, k)] = acc;
                }
            }
        }
        d
    }
}

struct StepContext<'a> {
    laws: &'a MaterialLaws,
    g: &'a Grid,
    op: HeatOperator,
    source: &'a Field,
    h_gamma: &'a LateralTrace,
}

impl StepContext<'_> {
    /// Integrated residual F(u) and the matching γ(u): per cell
    /// V_c(γ(u) - θ_old) + dt [stiffness + lateral β lumping - V_c S].
    fn residual(
        &self,
        u: &[f64],
        theta_old: &Field,
        dt: f64,
        f_out: &mut [f64],
        gamma_out: &mut [f64],
    ) {
        let g = self.g;
        let vc = g.cell_volume();
        for c in 0..g.n_cells() {
            gamma_out[c] = self.laws.kirchhoff_inverse(u[c]);
            f_out[c] = vc * (gamma_out[c] - theta_old[c]) - dt * vc * self.source[c];
        }
        let mut stiff = vec![0.0; g.n_cells()];
        self.op.stiffness_apply(g, u, &mut stiff);
        for c in 0..g.n_cells() {
            f_out[c] += dt * stiff[c];
        }
        for fc in g.lateral_faces() {
            f_out[fc.cell] +=
                dt * fc.area * (self.laws.h(gamma_out[fc.cell]) - self.h_gamma[fc.trace_index]);
        }
    }

    fn l1(&self, f: &[f64]) -> f64 {
        let mut s = 0.0;
        for v in f {
            s += v.abs();
        }
        s
    }

    /// One damped Newton solve over a step of width dt.
    fn newton(
        &self,
        state: &HeatState,
        dt: f64,
        cfg: &HeatStepConfig,
        history: &mut Vec<f64>,
    ) -> Option<HeatState> {
        let g = self.g;
        let n = g.n_cells();
        let vc = g.cell_volume();
        let scale = mass_scale(g, self.laws, state, self.source, self.h_gamma, dt);
        let tol = cfg.tol_newton * scale;
        let stiff_diag = self.op.stiffness_diag(g);

        let mut u: Vec<f64> = state.u.0.clone();
        let mut f = vec![0.0; n];
        let mut gamma = vec![0.0; n];
        let mut f_trial = vec![0.0; n];
        let mut gamma_trial = vec![0.0; n];
        self.residual(&u, &state.theta, dt, &mut f, &mut gamma);
        let mut f_norm = self.l1(&f);

        for it in 0..cfg.max_newton {
            history.push(f_norm);
            let converged = f_norm <= tol;
            // Jacobian pieces at the current iterate.
            let mut time_diag = vec![0.0; n];
            for c in 0..n {
                time_diag[c] = vc / self.laws.k(gamma[c]);
            }
            let mut robin_diag = vec![0.0; n];
            for c in 0..n {
                if self.op.lat_area[c] > 0.0 {
                    robin_diag[c] = self.op.lat_area[c] * self.laws.beta_prime(u[c]);
                }
            }
            let diag: Vec<f64> = (0..n)
                .map(|c| time_diag[c] + dt * (stiff_diag[c] + robin_diag[c]))
                .collect();
            let apply = |x: &[f64], out: &mut [f64]| {
                self.op.stiffness_apply(g, x, out);
                for c in 0..n {
                    out[c] = time_diag[c] * x[c] + dt * (out[c] + robin_diag[c] * x[c]);
                }
            };
            let rhs: Vec<f64> = f.iter().map(|&v| -v).collect();
            let mut delta = vec![0.0; n];
            let cg = pcg(apply, &rhs, &diag, &mut delta, 1e-12, n.max(1000));
            if let CgOutcome::Stalled { residual, .. } = cg {
                if residual > 1e-8 {
                    return None;
                }
            }
            if converged {
                // One polishing step past the tolerance keeps the computed
                // minimum at the exact solution's level.
                for c in 0..n {
                    u[c] += delta[c];
                    gamma[c] = self.laws.kirchhoff_inverse(u[c]);
                }
                return Some(HeatState {
                    theta: Field(gamma),
                    u: Field(u),
                    t: state.t + dt,
                });
            }
            // Halve the step while the residual does not decrease.
            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..8 {
                let trial: Vec<f64> = (0..n).map(|c| u[c] + lambda * delta[c]).collect();
                self.residual(&trial, &state.theta, dt, &mut f_trial, &mut gamma_trial);
                let trial_norm = self.l1(&f_trial);
                if trial_norm < f_norm {
                    u = trial;
                    std::mem::swap(&mut f, &mut f_trial);
                    std::mem::swap(&mut gamma, &mut gamma_trial);
                    f_norm = trial_norm;
                    accepted = true;
                    break;
                }
                lambda *= 0.5;
            }
            if !accepted {
                return None;
            }
            let _ = it;
        }
        history.push(f_norm);
        if f_norm <= tol {
            return Some(HeatState {
                theta: Field(gamma),
                u: Field(u),
                t: state.t + dt,
            });
        }
        None
    }

    fn step_with_halving(
        &self,
        state: &HeatState,
        dt: f64,
        cfg: &HeatStepConfig,
        halvings_left: usize,
        history: &mut Vec<f64>,
    ) -> Option<HeatState> {
        if let Some(next) = self.newton(state, dt, cfg, history) {
            return Some(next);
        }
        if halvings_left == 0 {
            return None;
        }
        let half = 0.5 * dt;
        let mid = self.step_with_halving(state, half, cfg, halvings_left - 1, history)?;
        self.step_with_halving(&mid, half, cfg, halvings_left - 1, history)
    }
}

/// Advance the heat state by cfg.dt under the given source and boundary
/// datum h_Γ = β(u_Γ). On Newton failure the step is halved recursively up
/// to cfg.max_halvings and the substeps composed.
pub fn heat_step(
    laws: &MaterialLaws,
    g: &Grid,
    state: &HeatState,
    source: &Field,
    h_gamma: &LateralTrace,
    cfg: &HeatStepConfig,
) -> Result<HeatState, HeatStepError> {
    cfg.validate()?;
    source.check(g)?;
    h_gamma.check(g)?;
    state.theta.check(g)?;
    let ctx = StepContext {
        laws,
        g,
        op: HeatOperator::new(g),
        source,
        h_gamma,
    };
    let mut history = Vec::new();
    ctx.step_with_halving(state, cfg.dt, cfg, cfg.max_halvings, &mut history)
        .ok_or(HeatStepError::NewtonDiverged { history })
}

/// Informational stand-in for the dual norm of ∂θ/∂t: the step's residual
/// functional R(w) = ∫(θ⁺-θ)/dt·w + ∫∇u⁺·∇w + ∮β(u⁺)w - ∫Sw - ∮h_Γw,
/// evaluated at w = 1 and the normalized coordinates x/Lx, y/Ly, z/ℓ;
/// returns max_w |R(w)|. Not a dual norm, recorded for monitoring only.
#[allow(clippy::too_many_arguments, clippy::type_complexity)]
pub fn dual_residual_proxy(
    g: &Grid,
    before: &HeatState,
    after: &HeatState,
    source: &Field,
    h_gamma: &LateralTrace,
    laws: &MaterialLaws,
    dt: f64,
) -> f64 {
    let vc = g.cell_volume();
    // (w, ∇w) for the four test functions, with ‖w‖_∞ <= 1 on Ω.
    let tests: [(&dyn Fn(f64, f64, f64) -> f64, [f64; 3]); 4] = [
        (&|_, _, _| 1.0, [0.0, 0.0, 0.0]),
        (&|x, _, _| x / g.lx, [1.0 / g.lx, 0.0, 0.0]),
        (&|_, y, _| y / g.ly, [0.0, 1.0 / g.ly, 0.0]),
        (&|_, _, z| z / g.ell, [0.0, 0.0, 1.0 / g.ell]),
    ];
    let mut worst = 0.0f64;
    for (w, grad_w) in tests {
        let mut r = 0.0;
        for k in 0..g.nz {
            for j in 0..g.ny {
                for i in 0..g.nx {
                    let c = g.idx(i, j, k);
                    let (x, y, z) = g.cell_center(i, j, k);
                    r += vc * ((after.theta[c] - before.theta[c]) / dt - source[c]) * w(x, y, z);
                }
            }
        }
        // ∫ ∇u⁺·∇w with the solver's face-difference quadrature.
        if grad_w[0] != 0.0 {
            for k in 0..g.nz {
                for j in 0..g.ny {
                    for i in 1..g.nx {
                        r += (after.u[g.idx(i, j, k)] - after.u[g.idx(i - 1, j, k)])
                            * g.hy
                            * g.hz
                            * grad_w[0];
                    }
                }
            }
        }
        if grad_w[1] != 0.0 {
            for k in 0..g.nz {
                for j in 1..g.ny {
                    for i in 0..g.nx {
                        r += (after.u[g.idx(i, j, k)] - after.u[g.idx(i, j - 1, k)])
                            * g.hx
                            * g.hz
                            * grad_w[1];
                    }
                }
            }
        }
        if grad_w[2] != 0.0 {
            for k in 1..g.nz {
                for j in 0..g.ny {
                    for i in 0..g.nx {
                        r += (after.u[g.idx(i, j, k)] - after.u[g.idx(i, j, k - 1)])
                            * g.hx
                            * g.hy
                            * grad_w[2];
                    }
                }
            }
        }
        for fc in g.lateral_faces() {
            let (x, y, z) = fc.center;
            r += fc.area * (laws.h(after.theta[fc.cell]) - h_gamma[fc.trace_index]) * w(x, y, z);
        }
        worst = worst.max(r.abs());
    }
    worst
}

/// |∫θ⁺ - ∫θ - dt (∫source - ∮(β(u⁺) - h_Γ))| / scale: the w = 1 test of the
/// converged step, bounded by the Newton tolerance by construction.
pub fn mass_balance_residual(
    g: &Grid,
    before: &HeatState,
    after: &HeatState,
    source: &Field,
    h_gamma: &LateralTrace,
    laws: &MaterialLaws,
    dt: f64,
) -> f64 {
    let lhs = integrate_volume(g, &after.theta) - integrate_volume(g, &before.theta);
    let mut boundary = 0.0;
    for fc in g.lateral_faces() {
        boundary += fc.area * (laws.h(after.theta[fc.cell]) - h_gamma[fc.trace_index]);
    }
    let rhs = dt * (integrate_volume(g, source) - boundary);
    let scale = mass_scale(g, laws, before, source, h_gamma, dt);
    (lhs - rhs).abs() / scale
}
