//! Closed-form voltage for the uniform-conductivity circuit.
//!
//! With σ ≡ σ₀ the current integral is I_R(t) = (σ₀|B|/ℓ) V(t), and
//! differentiating the integrated circuit equation gives the constant
//! coefficient ODE
//!
//!   λ₁ V'' + (λ₂ + σ₀|B|/ℓ) V' + λ₃ V = f(t),   V(0) = V₀, V'(0) = V₀'.
//!
//! Used by the `--compare-analytic` flag to report the error of a coupled
//! run against the exact trace.

use crate::circuit::{CircuitParams, SourceTerm};
use crate::grid::Grid;
use crate::laws::MaterialLaws;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum AnalyticError {
    #[error("the analytic oracle requires a constant sigma family")]
    NonConstantSigma,
    #[error("piecewise-constant sources are not supported by the closed form")]
    UnsupportedSource,
    #[error("resonant sine source (particular solution degenerates)")]
    ResonantSource,
}

#[derive(Debug)]
enum Homogeneous {
    /// Two distinct real roots.
    Overdamped { r1: f64, r2: f64 },
    /// Repeated root r: (a + b t) e^{rt}.
    Critical { r: f64 },
    /// Complex pair s ± iω: e^{st}(a cos ωt + b sin ωt).
    Underdamped { s: f64, omega: f64 },
}

/// The closed-form solution of λ₁V'' + aV' + λ₃V = f with uniform-σ damping.
#[derive(Debug)]
pub struct RlcClosedForm {
    hom: Homogeneous,
    /// Coefficients of the homogeneous part fitted to the initial data.
    c1: f64,
    c2: f64,
    particular: Particular,
}

#[derive(Debug)]
enum Particular {
    Zero,
    /// Constant forcing c: V_p = c/λ₃.
    Constant(f64),
    /// amp·sin(ωt) forcing: V_p = a sin(ωt) + b cos(ωt).
    Sine {
        a: f64,
        b: f64,
        omega: f64,
    },
}

impl Particular {
    fn value(&self, t: f64) -> f64 {
        match *self {
            Particular::Zero => 0.0,
            Particular::Constant(v) => v,
            Particular::Sine { a, b, omega } => a * (omega * t).sin() + b * (omega * t).cos(),
        }
    }

    fn derivative(&self, t: f64) -> f64 {
        match *self {
            Particular::Zero | Particular::Constant(_) => 0.0,
            Particular::Sine { a, b, omega } => {
                omega * (a * (omega * t).cos() - b * (omega * t).sin())
            }
        }
    }
}

impl RlcClosedForm {
    /// Build the oracle for a run with constant σ. Rejects non-constant σ
    /// families (the closed form would not apply).
    pub fn new(
        params: &CircuitParams,
        laws: &MaterialLaws,
        g: &Grid,
    ) -> Result<Self, AnalyticError> {
        let (lo, hi) = laws.sigma_bounds();
        if lo != hi {
            return Err(AnalyticError::NonConstantSigma);
        }
        let damping = params.lambda2 + lo * g.base_area() / g.ell;
        Self::from_coefficients(params, damping)
    }

    /// λ₁V'' + damping·V' + λ₃V = f with V(0) = V₀, V'(0) = V₀'.
    pub fn from_coefficients(params: &CircuitParams, damping: f64) -> Result<Self, AnalyticError> {
        let (l1, l3) = (params.lambda1, params.lambda3);
        let particular = match &params.source {
            SourceTerm::Zero => Particular::Zero,
            SourceTerm::Constant(c) => Particular::Constant(c / l3),
            SourceTerm::Sine { amplitude, omega } => {
                let om = *omega;
                let m11 = l3 - l1 * om * om;
                let m12 = -damping * om;
                let m21 = damping * om;
                let m22 = l3 - l1 * om * om;
                let det = m11 * m22 - m12 * m21;
                if det.abs() < 1e-300 {
                    return Err(AnalyticError::ResonantSource);
                }
                // Solve [m11 m12; m21 m22] (a, b) = (amp, 0).
                let a = amplitude * m22 / det;
                let b = -amplitude * m21 / det;
                Particular::Sine { a, b, omega: om }
            }
            SourceTerm::Steps(_) => return Err(AnalyticError::UnsupportedSource),
        };
        let disc = damping * damping - 4.0 * l1 * l3;
        let scale = (damping * damping).max(4.0 * l1 * l3);
        let hom = if disc.abs() <= 1e-12 * scale {
            Homogeneous::Critical {
                r: -damping / (2.0 * l1),
            }
        } else if disc > 0.0 {
            let sq = disc.sqrt();
            Homogeneous::Overdamped {
                r1: (-damping + sq) / (2.0 * l1),
                r2: (-damping - sq) / (2.0 * l1),
            }
        } else {
            Homogeneous::Underdamped {
                s: -damping / (2.0 * l1),
                omega: (-disc).sqrt() / (2.0 * l1),
            }
        };
        // Fit the homogeneous coefficients to the initial data minus the
        // particular solution.
        let y0 = params.v0 - particular.value(0.0);
        let y0p = params.v0_prime - particular.derivative(0.0);
        let (c1, c2) = match hom {
            Homogeneous::Overdamped { r1, r2 } => {
                let c2 = (y0p - r1 * y0) / (r2 - r1);
                (y0 - c2, c2)
            }
            Homogeneous::Critical { r } => (y0, y0p - r * y0),
            Homogeneous::Underdamped { s, omega } => (y0, (y0p - s * y0) / omega),
        };
        Ok(RlcClosedForm {
            hom,
            c1,
            c2,
            particular,
        })
    }

    pub fn eval(&self, t: f64) -> f64 {
        let hom = match self.hom {
            Homogeneous::Overdamped { r1, r2 } => {
                self.c1 * (r1 * t).exp() + self.c2 * (r2 * t).exp()
            }
            Homogeneous::Critical { r } => (self.c1 + self.c2 * t) * (r * t).exp(),
            Homogeneous::Underdamped { s, omega } => {
                (s * t).exp() * (self.c1 * (omega * t).cos() + self.c2 * (omega * t).sin())
            }
        };
        hom + self.particular.value(t)
    }

    /// Relative sup-norm error of a sampled trace against the closed form.
    pub fn relative_sup_error(&self, times: &[f64], values: &[f64]) -> f64 {
        let mut err = 0.0f64;
        let mut scale = 0.0f64;
        for (t, v) in times.iter().zip(values) {
            let exact = self.eval(*t);
            err = err.max((v - exact).abs());
            scale = scale.max(exact.abs());
        }
        if scale > 0.0 {
            err / scale
        } else {
            err
        }
    }
}
