//! The integro-differential voltage equation on one time slab.
//!
//! The integrated circuit equation reads
//!
//!   λ₁ V'(t) + λ₂ V(t) + λ₃ ∫₀^t V = c₀ - I_R(t) + ∫₀^t f,
//!
//! with the constant c₀ = λ₁V₀' + λ₂V₀ + I_R(θ₀, V₀) cached once per run.
//! On a slab [ρ, ρ+τ] the history integral λ₃∫₀^ρ V is a datum carried in W.
//! Because the frozen-coefficient potential problem is linear in V, the
//! current is I_R(t) = Î(t)·V(t) with Î from one unit elliptic solve per
//! node. Two solvers are provided: the contraction fixed point V̄ ↦ Λ(V̄)
//! with explicit I_R samples, and a direct elimination that folds Î into the
//! V coefficient; the direct mode is the internal oracle for the fixed point.
//!
//! Time stepping is the implicit trapezoidal rule on (V, W) with W' = V,
//! second order and unconditionally solvable since λ₁ + dt λ₂/2 > 0.

use crate::elliptic::{solve_unit_potential, EllipticError, EllipticSolution, UnitElliptic};
use crate::grid::{Field, Grid};
use crate::laws::MaterialLaws;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CircuitError {
    #[error(transparent)]
    Elliptic(#[from] EllipticError),
    #[error("slab width {tau} is not below the contraction threshold tau* = {tau_star}")]
    SlabTooWide { tau: f64, tau_star: f64 },
    #[error(
        "fixed point did not converge in {max_iter} iterations; increment history: {history:?}"
    )]
    FixedPointStalled { max_iter: usize, history: Vec<f64> },
    #[error("slab needs at least one step")]
    EmptySlab,
}

/// Prescribed current source f(t) with a closed-form running integral.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceTerm {
    Zero,
    Constant(f64),
    /// amplitude · sin(omega t)
    Sine {
        amplitude: f64,
        omega: f64,
    },
    /// Piecewise constant: (start time, value), starts at t = 0, sorted.
    Steps(Vec<(f64, f64)>),
}

impl SourceTerm {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            SourceTerm::Zero => 0.0,
            SourceTerm::Constant(c) => *c,
            SourceTerm::Sine { amplitude, omega } => amplitude * (omega * t).sin(),
            SourceTerm::Steps(segs) => {
                let mut v = 0.0;
                for &(start, value) in segs {
                    if t >= start {
                        v = value;
                    }
                }
                v
            }
        }
    }

    /// ∫₀^t f, exact.
    pub fn integral(&self, t: f64) -> f64 {
        match self {
            SourceTerm::Zero => 0.0,
            SourceTerm::Constant(c) => c * t,
            SourceTerm::Sine { amplitude, omega } => {
                if *omega == 0.0 {
                    0.0
                } else {
                    amplitude * (1.0 - (omega * t).cos()) / omega
                }
            }
            SourceTerm::Steps(segs) => {
                let mut acc = 0.0;
                for (n, &(start, value)) in segs.iter().enumerate() {
                    let end = segs.get(n + 1).map(|s| s.0).unwrap_or(f64::INFINITY);
                    if t > start {
                        acc += value * (t.min(end) - start);
                    }
                }
                acc
            }
        }
    }

    /// ‖f‖_{L¹(0,T)}; enters the a priori voltage bound.
    pub fn l1_norm(&self, t_final: f64) -> f64 {
        match self {
            SourceTerm::Zero => 0.0,
            SourceTerm::Constant(c) => c.abs() * t_final,
            SourceTerm::Sine { amplitude, omega } => {
                // ∫|sin| over whole half-periods is 2/ω each; integrate the tail directly.
                if *omega == 0.0 {
                    return 0.0;
                }
                let half = std::f64::consts::PI / omega.abs();
                let n = (t_final / half).floor();
                let tail_start = n * half;
                let tail =
                    ((omega * tail_start).cos() - (omega * t_final).cos()).abs() / omega.abs();
                amplitude.abs() * (2.0 * n / omega.abs() + tail)
            }
            SourceTerm::Steps(segs) => {
                let mut acc = 0.0;
                for (n, &(start, value)) in segs.iter().enumerate() {
                    let end = segs.get(n + 1).map(|s| s.0).unwrap_or(f64::INFINITY);
                    if t_final > start {
                        acc += value.abs() * (t_final.min(end) - start);
                    }
                }
                acc
            }
        }
    }
}

/// Circuit data: λ₁, λ₂, λ₃ substitute C, 1/R, 1/L of the original second
/// order equation; all three must be positive for a well-posed run.
#[derive(Debug, Clone, PartialEq)]
pub struct CircuitParams {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub v0: f64,
    pub v0_prime: f64,
    pub source: SourceTerm,
}

impl CircuitParams {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.lambda1 > 0.0 && self.lambda2 > 0.0 && self.lambda3 > 0.0) {
            return Err(format!(
                "lambda1, lambda2, lambda3 must be positive, got ({}, {}, {})",
                self.lambda1, self.lambda2, self.lambda3
            ));
        }
        Ok(())
    }
}

/// Voltage on one slab: nodes, V, V' and the running integral W = ∫₀^t V
/// (trapezoidal accumulation; the first node carries the slab's initial data).
#[derive(Debug, Clone, PartialEq)]
pub struct VoltageTrace {
    pub t_nodes: Vec<f64>,
    pub v: Vec<f64>,
    pub v_prime: Vec<f64>,
    pub w: Vec<f64>,
}

impl VoltageTrace {
    pub fn len(&self) -> usize {
        self.t_nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t_nodes.is_empty()
    }

    pub fn sup_diff(&self, other: &VoltageTrace) -> f64 {
        self.v
            .iter()
            .zip(&other.v)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Slab initial data: start time, V(ρ) and the accumulated W(ρ) = ∫₀^ρ V.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlabInit {
    pub t0: f64,
    pub v: f64,
    pub w: f64,
}

/// τ* = λ₁λ₂ℓ² / (2 σ^ |B|)²: slabs strictly below this width make the
/// fixed-point map a contraction.
pub fn threshold_tau_star(params: &CircuitParams, laws: &MaterialLaws, g: &Grid) -> f64 {
    let (_, sigma_hi) = laws.sigma_bounds();
    let denom = 2.0 * sigma_hi * g.base_area();
    params.lambda1 * params.lambda2 * g.ell * g.ell / (denom * denom)
}

/// κ = √(τ/(λ₁λ₂)) · 2 σ^ |B| / ℓ, the contraction constant of the slab map;
/// κ = √(τ/τ*).
pub fn contraction_constant(
    params: &CircuitParams,
    laws: &MaterialLaws,
    g: &Grid,
    tau: f64,
) -> f64 {
    let (_, sigma_hi) = laws.sigma_bounds();
    (tau / (params.lambda1 * params.lambda2)).sqrt() * 2.0 * sigma_hi * g.base_area() / g.ell
}

/// The cached constant of the integrated equation: λ₁V₀' + λ₂V₀ + I_R(θ₀, V₀),
/// together with the auxiliary t = 0 potential solve it comes from.
pub fn rhs_constant(
    params: &CircuitParams,
    laws: &MaterialLaws,
    theta0: &Field,
    g: &Grid,
    tol_lin: f64,
) -> Result<(f64, EllipticSolution), CircuitError> {
    let sol = crate::elliptic::solve_potential(g, laws, theta0, params.v0, tol_lin)?;
    Ok((
        params.lambda1 * params.v0_prime + params.lambda2 * params.v0 + sol.i_r,
        sol,
    ))
}

enum IrCoupling<'a> {
    /// I_R given per node (fixed-point inner solve).
    Explicit(&'a [f64]),
    /// I_R = Î(t) V(t) folded implicitly (direct elimination).
    Implicit(&'a [f64]),
}

/// Implicit trapezoid on λ₁V' + λ₂V + λ₃W = const - I_R + F, W' = V.
fn trapezoid_sweep(
    params: &CircuitParams,
    init: SlabInit,
    coupling: IrCoupling<'_>,
    const_rhs: f64,
    f_int: &[f64],
    dt: f64,
) -> VoltageTrace {
    let n = f_int.len();
    let (l1, l2, l3) = (params.lambda1, params.lambda2, params.lambda3);
    let mut t_nodes = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    t_nodes.push(init.t0);
    v.push(init.v);
    w.push(init.w);
    let ir_at = |m: usize, vm: f64| -> f64 {
        match coupling {
            IrCoupling::Explicit(ir) => ir[m],
            IrCoupling::Implicit(unit) => unit[m] * vm,
        }
    };
    for m in 0..n - 1 {
        let vm = v[m];
        let wm = w[m];
        let cm = const_rhs + f_int[m] - ir_at(m, vm);
        let (lhs, rhs) = match coupling {
            IrCoupling::Explicit(ir) => {
                let cm1 = const_rhs + f_int[m + 1] - ir[m + 1];
                let a = dt * l2 / (2.0 * l1) + dt * dt * l3 / (4.0 * l1);
                (
                    1.0 + a,
                    vm * (1.0 - a) + dt / (2.0 * l1) * (cm + cm1 - 2.0 * l3 * wm),
                )
            }
            IrCoupling::Implicit(unit) => {
                let am = dt * (l2 + unit[m]) / (2.0 * l1) + dt * dt * l3 / (4.0 * l1);
                let am1 = dt * (l2 + unit[m + 1]) / (2.0 * l1) + dt * dt * l3 / (4.0 * l1);
                let c = const_rhs + f_int[m];
                let c1 = const_rhs + f_int[m + 1];
                (
                    1.0 + am1,
                    vm * (1.0 - am) + dt / (2.0 * l1) * (c + c1 - 2.0 * l3 * wm),
                )
            }
        };
        let v_next = rhs / lhs;
        v.push(v_next);
        w.push(wm + 0.5 * dt * (vm + v_next));
        t_nodes.push(init.t0 + (m + 1) as f64 * dt);
    }
    let v_prime: Vec<f64> = (0..n)
        .map(|m| (const_rhs + f_int[m] - ir_at(m, v[m]) - l2 * v[m] - l3 * w[m]) / l1)
        .collect();
    VoltageTrace {
        t_nodes,
        v,
        v_prime,
        w,
    }
}

/// One trapezoidal sweep with prescribed I_R samples. `ir_samples` and
/// `f_int` (= ∫₀^{t_m} f) are aligned with the slab nodes, first node at ρ.
pub fn advance_voltage_slab(
    params: &CircuitParams,
    init: SlabInit,
    ir_samples: &[f64],
    const_rhs: f64,
    f_int: &[f64],
    dt: f64,
) -> VoltageTrace {
    assert_eq!(
        ir_samples.len(),
        f_int.len(),
        "ir samples must align with slab nodes"
    );
    assert!(dt > 0.0);
    trapezoid_sweep(
        params,
        init,
        IrCoupling::Explicit(ir_samples),
        const_rhs,
        f_int,
        dt,
    )
}

fn unit_solves(
    g: &Grid,
    laws: &MaterialLaws,
    theta_delay: &[Field],
    tol_lin: f64,
) -> Result<Vec<UnitElliptic>, CircuitError> {
    use rayon::prelude::*;
    let sols: Result<Vec<UnitElliptic>, EllipticError> = theta_delay
        .par_iter()
        .map(|th| solve_unit_potential(g, laws, th, tol_lin))
        .collect();
    Ok(sols?)
}

fn f_integrals(source: &SourceTerm, t0: f64, n: usize, dt: f64) -> Vec<f64> {
    (0..n)
        .map(|m| source.integral(t0 + m as f64 * dt))
        .collect()
}

/// Direct sweep from precomputed unit currents; lets a caller that already
/// holds the slab's elliptic responses cross-check the fixed point for free.
pub fn direct_sweep_from_units(
    params: &CircuitParams,
    init: SlabInit,
    unit_ir: &[f64],
    const_rhs: f64,
    f_int: &[f64],
    dt: f64,
) -> VoltageTrace {
    trapezoid_sweep(
        params,
        init,
        IrCoupling::Implicit(unit_ir),
        const_rhs,
        f_int,
        dt,
    )
}

/// Direct-elimination slab solve: one unit elliptic solve per node, then a
/// single trapezoidal sweep with I_R = Î(t)V(t) in the V coefficient.
#[allow(clippy::too_many_arguments)]
pub fn solve_slab_direct(
    params: &CircuitParams,
    laws: &MaterialLaws,
    g: &Grid,
    theta_delay: &[Field],
    init: SlabInit,
    const_rhs: f64,
    dt: f64,
    tol_lin: f64,
) -> Result<(VoltageTrace, Vec<UnitElliptic>), CircuitError> {
    if theta_delay.len() < 2 {
        return Err(CircuitError::EmptySlab);
    }
    let units = unit_solves(g, laws, theta_delay, tol_lin)?;
    let unit_ir: Vec<f64> = units.iter().map(|u| u.i_r).collect();
    let f_int = f_integrals(&params.source, init.t0, theta_delay.len(), dt);
    let trace = trapezoid_sweep(
        params,
        init,
        IrCoupling::Implicit(&unit_ir),
        const_rhs,
        &f_int,
        dt,
    );
    Ok((trace, units))
}

/// Result of the slab fixed point.
#[derive(Debug, Clone)]
pub struct SlabSolve {
    pub trace: VoltageTrace,
    pub units: Vec<UnitElliptic>,
    /// Number of Λ applications.
    pub iterations: usize,
    /// ‖V¹ - V̄⁰‖_∞, the first increment (drives the iteration-count bound).
    pub first_increment: f64,
    /// r_k = ‖V_{k+1} - V_k‖_∞ / ‖V_k - V_{k-1}‖_∞ for k >= 1.
    pub ratios: Vec<f64>,
}

/// The contraction fixed point V̄ ↦ Λ(V̄) on one slab. The initial guess is
/// the constant extension of the slab's initial voltage; the elliptic
/// responses are solved once since σ sees only the delayed temperature.
/// Stops when ‖V_{k+1} - V_k‖_∞ <= tol_fp.
#[allow(clippy::too_many_arguments)]
pub fn fixed_point_slab(
    params: &CircuitParams,
    laws: &MaterialLaws,
    g: &Grid,
    theta_delay: &[Field],
    init: SlabInit,
    const_rhs: f64,
    dt: f64,
    tol_fp: f64,
    max_iter: usize,
    tol_lin: f64,
) -> Result<SlabSolve, CircuitError> {
    if theta_delay.len() < 2 {
        return Err(CircuitError::EmptySlab);
    }
    let n = theta_delay.len();
    let tau = (n - 1) as f64 * dt;
    let tau_star = threshold_tau_star(params, laws, g);
    if !(tau < tau_star) {
        return Err(CircuitError::SlabTooWide { tau, tau_star });
    }
    let units = unit_solves(g, laws, theta_delay, tol_lin)?;
    let unit_ir: Vec<f64> = units.iter().map(|u| u.i_r).collect();
    let f_int = f_integrals(&params.source, init.t0, n, dt);

    let mut v_bar = vec![init.v; n];
    let mut increments: Vec<f64> = Vec::new();
    for _k in 0..max_iter {
        let ir: Vec<f64> = unit_ir.iter().zip(&v_bar).map(|(u, vb)| u * vb).collect();
        let next = trapezoid_sweep(
            params,
            init,
            IrCoupling::Explicit(&ir),
            const_rhs,
            &f_int,
            dt,
        );
        let delta = next
            .v
            .iter()
            .zip(&v_bar)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        increments.push(delta);
        v_bar.copy_from_slice(&next.v);
        if delta <= tol_fp {
            let ratios = increments.windows(2).map(|w| w[1] / w[0]).collect();
            return Ok(SlabSolve {
                trace: next,
                units,
                iterations: increments.len(),
                first_increment: increments[0],
                ratios,
            });
        }
    }
    Err(CircuitError::FixedPointStalled {
        max_iter,
        history: increments,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::laws::{ExchangeLaw, LawFamily};

    fn uniform_laws(sigma: f64) -> MaterialLaws {
        MaterialLaws::new(
            LawFamily::Constant { value: sigma },
            LawFamily::Constant { value: 1.0 },
            ExchangeLaw::Zero,
        )
        .unwrap()
    }

    fn ramp_laws() -> MaterialLaws {
        MaterialLaws::new(
            LawFamily::ClampedAffine {
                offset: 0.0,
                slope: 1.0,
                lo: 1.0,
                hi: 3.0,
            },
            LawFamily::Constant { value: 1.0 },
            ExchangeLaw::Zero,
        )
        .unwrap()
    }

    fn params(l1: f64, l2: f64, l3: f64, v0: f64, v0p: f64) -> CircuitParams {
        CircuitParams {
            lambda1: l1,
            lambda2: l2,
            lambda3: l3,
            v0,
            v0_prime: v0p,
            source: SourceTerm::Zero,
        }
    }

    #[test]
    fn tau_star_formula() {
        let g = Grid::new(2, 2, 2, 1.0, 1.0, 1.0).unwrap();
        let p = params(1.0, 1.0, 1.0, 0.0, 0.0);
        assert!((threshold_tau_star(&p, &uniform_laws(2.0), &g) - 1.0 / 16.0).abs() < 1e-15);
        // Doubling σ^ quarters τ*.
        let t1 = threshold_tau_star(&p, &uniform_laws(2.0), &g);
        let t2 = threshold_tau_star(&p, &uniform_laws(4.0), &g);
        assert!((t2 - t1 / 4.0).abs() < 1e-15);
        // λ₁ = 2, λ₂ = 3, ℓ = 2, σ^ = 1, |B| = 0.5 → 6·4/1 = 24.
        let g2 = Grid::new(2, 2, 2, 1.0, 0.5, 2.0).unwrap();
        let p2 = params(2.0, 3.0, 1.0, 0.0, 0.0);
        assert!((threshold_tau_star(&p2, &uniform_laws(1.0), &g2) - 24.0).abs() < 1e-12);
    }

    #[test]
    fn rhs_constant_uniform_and_layered() {
        let g = Grid::new(4, 4, 8, 1.0, 1.0, 1.0).unwrap();
        // Uniform σ₀ = 2, V₀ = 1, λ₁ = λ₂ = 1, V₀' = 0 → 1 + 0 + 2.
        let p = params(1.0, 1.0, 1.0, 1.0, 0.0);
        let (c, _) =
            rhs_constant(&p, &uniform_laws(2.0), &Field::constant(&g, 1.0), &g, 1e-10).unwrap();
        assert!((c - 3.0).abs() < 1e-9);
        // All-zero data → 0.
        let p0 = params(1.0, 1.0, 1.0, 0.0, 0.0);
        let (c0, _) = rhs_constant(
            &p0,
            &uniform_laws(2.0),
            &Field::constant(&g, 1.0),
            &g,
            1e-10,
        )
        .unwrap();
        assert_eq!(c0, 0.0);
        // Layered σ (1, 3) with λ₁V₀' + λ₂V₀ = 2 → 2 + 1.5 = 3.5.
        let pl = params(1.0, 1.0, 1.0, 1.0, 1.0);
        let theta = Field::from_fn(&g, |_, _, z| if z < 0.5 { 1.0 } else { 3.0 });
        let (cl, _) = rhs_constant(&pl, &ramp_laws(), &theta, &g, 1e-10).unwrap();
        assert!((cl - 3.5).abs() < 1e-9, "got {cl}");
    }

    #[test]
    fn stationary_point_stays_constant() {
        // λ₁V' + λ₂V = λ₂V_ρ with λ₃ = 0 keeps V ≡ V_ρ.
        let p = params(1.0, 2.0, 0.0, 0.0, 0.0);
        let n = 33;
        let v_rho = 1.7;
        let ir = vec![0.0; n];
        let f_int = vec![0.0; n];
        let trace = advance_voltage_slab(
            &p,
            SlabInit {
                t0: 0.0,
                v: v_rho,
                w: 0.0,
            },
            &ir,
            p.lambda2 * v_rho,
            &f_int,
            1e-3,
        );
        for &v in &trace.v {
            assert!((v - v_rho).abs() < 1e-13);
        }
    }

    #[test]
    fn all_zero_data_gives_zero_voltage() {
        let p = params(1.0, 1.0, 1.0, 0.0, 0.0);
        let n = 17;
        let trace = advance_voltage_slab(
            &p,
            SlabInit {
                t0: 0.0,
                v: 0.0,
                w: 0.0,
            },
            &vec![0.0; n],
            0.0,
            &vec![0.0; n],
            1e-3,
        );
        assert!(trace.v.iter().all(|&v| v == 0.0));
        assert!(trace.v_prime.iter().all(|&v| v == 0.0));
        assert!(trace.w.iter().all(|&w| w == 0.0));
    }

    /// Chain direct-mode slabs and compare against the closed form of
    /// λ₁V'' + (λ₂ + σ₀|B|/ℓ)V' + λ₃V = 0 with critically damped data:
    /// λ = (1,1,1), σ₀|B|/ℓ = 1, V₀ = 1, V₀' = 0 → V(t) = (1+t)e^{-t}.
    fn run_uniform_chain(dt: f64, slabs: usize, tau: f64) -> (Vec<f64>, Vec<f64>) {
        let g = Grid::new(3, 3, 3, 1.0, 1.0, 1.0).unwrap();
        let laws = uniform_laws(1.0);
        let p = params(1.0, 1.0, 1.0, 1.0, 0.0);
        let theta0 = Field::constant(&g, 2.0);
        let (c0, _) = rhs_constant(&p, &laws, &theta0, &g, 1e-12).unwrap();
        let n = (tau / dt).round() as usize + 1;
        let mut init = SlabInit {
            t0: 0.0,
            v: p.v0,
            w: 0.0,
        };
        let mut ts = vec![0.0];
        let mut vs = vec![p.v0];
        for s in 0..slabs {
            let delay: Vec<Field> = (0..n).map(|_| theta0.clone()).collect();
            let (trace, _) = solve_slab_direct(&p, &laws, &g, &delay, init, c0, dt, 1e-12).unwrap();
            ts.extend_from_slice(&trace.t_nodes[1..]);
            vs.extend_from_slice(&trace.v[1..]);
            init = SlabInit {
                t0: s as f64 * tau + tau,
                v: *trace.v.last().unwrap(),
                w: *trace.w.last().unwrap(),
            };
        }
        (ts, vs)
    }

    #[test]
    fn uniform_sigma_closed_form_and_trapezoid_order() {
        let tau = 0.048;
        let slabs = 20; // horizon 0.96
        let mut errs = Vec::new();
        for dt in [4e-3, 2e-3, 1e-3] {
            let (ts, vs) = run_uniform_chain(dt, slabs, tau);
            let mut err: f64 = 0.0;
            let mut scale: f64 = 0.0;
            for (t, v) in ts.iter().zip(&vs) {
                let exact = (1.0 + t) * (-t).exp();
                err = err.max((v - exact).abs());
                scale = scale.max(exact.abs());
            }
            errs.push(err / scale);
        }
        println!("trapezoid errors: {errs:?}");
        assert!(errs[2] <= 1e-5, "rel Linf at dt = 1e-3: {}", errs[2]);
        let o1 = (errs[0] / errs[1]).log2();
        let o2 = (errs[1] / errs[2]).log2();
        println!("trapezoid orders: {o1:.3}, {o2:.3}");
        assert!((1.8..=2.2).contains(&o1), "order {o1}");
        assert!((1.8..=2.2).contains(&o2), "order {o2}");
    }

    #[test]
    fn fixed_point_matches_direct_and_contracts() {
        // κ = √(1/64)·2·2·1/1 = 0.5 with the example parameters.
        let g = Grid::new(3, 3, 3, 1.0, 1.0, 1.0).unwrap();
        let laws = uniform_laws(2.0);
        let p = params(1.0, 1.0, 1.0, 1.0, 0.0);
        let theta0 = Field::constant(&g, 2.0);
        let (c0, _) = rhs_constant(&p, &laws, &theta0, &g, 1e-10).unwrap();
        let tau = 1.0 / 64.0;
        let dt = tau / 16.0;
        let kappa = contraction_constant(&p, &laws, &g, tau);
        assert!((kappa - 0.5).abs() < 1e-12);
        let delay: Vec<Field> = (0..17).map(|_| theta0.clone()).collect();
        let init = SlabInit {
            t0: 0.0,
            v: 1.0,
            w: 0.0,
        };
        let tol_fp = 1e-8;
        let fp = fixed_point_slab(&p, &laws, &g, &delay, init, c0, dt, tol_fp, 100, 1e-10).unwrap();
        let (direct, _) = solve_slab_direct(&p, &laws, &g, &delay, init, c0, dt, 1e-10).unwrap();
        let diff = fp.trace.sup_diff(&direct);
        assert!(diff <= 10.0 * tol_fp, "fixed point vs direct: {diff:e}");
        for (k, &r) in fp.ratios.iter().enumerate() {
            assert!(
                r <= 1.05 * kappa,
                "ratio r_{k} = {r} exceeds 1.05 κ = {}",
                1.05 * kappa
            );
        }
        let bound = (fp.first_increment / tol_fp).log2().ceil() as usize + 1;
        println!(
            "fp iterations = {}, bound = {}, first increment = {:e}",
            fp.iterations, bound, fp.first_increment
        );
        assert!(
            fp.iterations <= bound,
            "iterations {} > bound {}",
            fp.iterations,
            bound
        );
    }

    #[test]
    fn fixed_point_trivial_slab_converges_immediately() {
        let g = Grid::new(3, 3, 3, 1.0, 1.0, 1.0).unwrap();
        let laws = uniform_laws(1.0);
        let p = params(1.0, 1.0, 1.0, 0.0, 0.0);
        let delay: Vec<Field> = (0..5).map(|_| Field::constant(&g, 2.0)).collect();
        let init = SlabInit {
            t0: 0.0,
            v: 0.0,
            w: 0.0,
        };
        let fp =
            fixed_point_slab(&p, &laws, &g, &delay, init, 0.0, 1e-3, 1e-12, 100, 1e-10).unwrap();
        assert_eq!(fp.iterations, 1);
        assert!(fp.trace.v.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn slab_width_rejected_at_threshold() {
        let g = Grid::new(3, 3, 3, 1.0, 1.0, 1.0).unwrap();
        let laws = uniform_laws(2.0);
        let p = params(1.0, 1.0, 1.0, 1.0, 0.0);
        // τ* = 1/16; a slab of exactly that width must be rejected.
        let dt = 1.0 / 16.0 / 8.0;
        let delay: Vec<Field> = (0..9).map(|_| Field::constant(&g, 2.0)).collect();
        let init = SlabInit {
            t0: 0.0,
            v: 1.0,
            w: 0.0,
        };
        let err =
            fixed_point_slab(&p, &laws, &g, &delay, init, 0.0, dt, 1e-8, 100, 1e-10).unwrap_err();
        assert!(matches!(err, CircuitError::SlabTooWide { .. }), "{err}");
    }

    #[test]
    fn fixed_point_stall_reports_increment_history() {
        let g = Grid::new(3, 3, 3, 1.0, 1.0, 1.0).unwrap();
        let laws = uniform_laws(2.0);
        let p = params(1.0, 1.0, 1.0, 1.0, 0.0);
        let theta0 = Field::constant(&g, 2.0);
        let (c0, _) = rhs_constant(&p, &laws, &theta0, &g, 1e-10).unwrap();
        let delay: Vec<Field> = (0..9).map(|_| theta0.clone()).collect();
        let init = SlabInit { t0: 0.0, v: 1.0, w: 0.0 };
        let err = fixed_point_slab(&p, &laws, &g, &delay, init, c0, 1e-3, 1e-14, 2, 1e-10)
            .unwrap_err();
        match err {
            CircuitError::FixedPointStalled { max_iter, history } => {
                assert_eq!(max_iter, 2);
                assert_eq!(history.len(), 2);
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn source_terms_integrate_exactly() {
        let s = SourceTerm::Constant(2.0);
        assert_eq!(s.integral(1.5), 3.0);
        let s = SourceTerm::Sine {
            amplitude: 2.0,
            omega: 3.0,
        };
        let t = 0.7;
        assert!((s.integral(t) - 2.0 * (1.0 - (3.0f64 * t).cos()) / 3.0).abs() < 1e-15);
        let s = SourceTerm::Steps(vec![(0.0, 1.0), (1.0, -2.0)]);
        assert_eq!(s.eval(0.5), 1.0);
        assert_eq!(s.eval(1.5), -2.0);
        assert_eq!(s.integral(1.5), 1.0 - 1.0);
        assert_eq!(s.l1_norm(1.5), 2.0);
        // Sine L¹ over a whole number of half periods: 2 amp / ω each.
        let s = SourceTerm::Sine {
            amplitude: 1.0,
            omega: std::f64::consts::PI,
        };
        assert!((s.l1_norm(2.0) - 4.0 / std::f64::consts::PI).abs() < 1e-12);
    }
}
