//! Constitutive laws of the thermistor material.
//!
//! Houses the temperature-dependent conductivities σ (electrical) and k
//! (thermal), the boundary exchange law h, the Kirchhoff transform
//!
//!   K(r) = ∫₀^r k(ρ) dρ,     γ = K⁻¹,     β = h ∘ γ,
//!
//! and the truncation operator T_τ that clamps the Joule source to
//! [-1/τ, 1/τ]. All law families are piecewise-polynomial (or softplus)
//! presets so that K has a closed-form antiderivative; γ is obtained
//! analytically where possible and by bisection-bracketed Newton otherwise.

use thiserror::Error;

/// Relative tolerance of the Kirchhoff inverse: |K(γ(u)) - u| <= TOL_INV * max(1, |u|).
pub const TOL_INV: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum LawError {
    #[error("{field}: lower bound must be positive, got {value}")]
    NonPositiveLowerBound { field: &'static str, value: f64 },
    #[error("{field}: bounds must satisfy lo < hi, got lo = {lo}, hi = {hi}")]
    BadBounds {
        field: &'static str,
        lo: f64,
        hi: f64,
    },
    #[error("{field}: slope must be nonzero for the clamped-affine family")]
    ZeroSlope { field: &'static str },
    #[error("{field}: sigmoid width must be positive, got {value}")]
    BadWidth { field: &'static str, value: f64 },
    #[error("exchange law must satisfy h(0) = 0, got h(0) = {0}")]
    NonzeroAtOrigin(f64),
    #[error("exchange law must be non-decreasing (slope {0} < 0)")]
    DecreasingExchange(f64),
    #[error("exchange law with exponent {0} > 1 violates the linear growth bound on beta")]
    GrowthBound(f64),
    #[error("exchange law exponent must be positive, got {0}")]
    BadExponent(f64),
    #[error("truncation parameter tau must be positive, got {0}")]
    BadTau(f64),
}

/// Preset family for a bounded positive conductivity (σ or k).
///
/// Every family is continuous on ℝ, takes values in [lo, hi] with
/// 0 < lo <= hi, and has a closed-form antiderivative.
#[derive(Debug, Clone, PartialEq)]
pub enum LawFamily {
    /// Constant value c.
    Constant { value: f64 },
    /// clamp(offset + slope * r, lo, hi). Covers both increasing and
    /// decreasing conductivities (NTC thermistors have slope < 0).
    ClampedAffine {
        offset: f64,
        slope: f64,
        lo: f64,
        hi: f64,
    },
    /// lo + (hi - lo) / (1 + exp(-(r - center)/width)), a smooth ramp.
    Sigmoid {
        lo: f64,
        hi: f64,
        center: f64,
        width: f64,
    },
}

impl LawFamily {
    fn validate(&self, field: &'static str) -> Result<(), LawError> {
        match *self {
            LawFamily::Constant { value } => {
                if value <= 0.0 {
                    return Err(LawError::NonPositiveLowerBound { field, value });
                }
            }
            LawFamily::ClampedAffine { slope, lo, hi, .. } => {
                if lo <= 0.0 {
                    return Err(LawError::NonPositiveLowerBound { field, value: lo });
                }
                if lo >= hi {
                    return Err(LawError::BadBounds { field, lo, hi });
                }
                if slope == 0.0 {
                    return Err(LawError::ZeroSlope { field });
                }
            }
            LawFamily::Sigmoid { lo, hi, width, .. } => {
                if lo <= 0.0 {
                    return Err(LawError::NonPositiveLowerBound { field, value: lo });
                }
                if lo >= hi {
                    return Err(LawError::BadBounds { field, lo, hi });
                }
                if width <= 0.0 {
                    return Err(LawError::BadWidth {
                        field,
                        value: width,
                    });
                }
            }
        }
        Ok(())
    }

    /// Exact (inf, sup) of the family over all of ℝ.
    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            LawFamily::Constant { value } => (value, value),
            LawFamily::ClampedAffine { lo, hi, .. } => (lo, hi),
            LawFamily::Sigmoid { lo, hi, .. } => (lo, hi),
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            LawFamily::Constant { value } => value,
            LawFamily::ClampedAffine {
                offset,
                slope,
                lo,
                hi,
            } => (offset + slope * r).clamp(lo, hi),
            LawFamily::Sigmoid {
                lo,
                hi,
                center,
                width,
            } => lo + (hi - lo) * logistic((r - center) / width),
        }
    }

    /// Exact ∫₀^r of the family (signed for r < 0).
    pub fn antiderivative(&self, r: f64) -> f64 {
        match *self {
            LawFamily::Constant { value } => value * r,
            LawFamily::ClampedAffine {
                offset,
                slope,
                lo,
                hi,
            } => clamped_affine_antiderivative(offset, slope, lo, hi, r),
            LawFamily::Sigmoid {
                lo,
                hi,
                center,
                width,
            } => {
                // ∫ logistic((s-c)/w) ds = w * softplus((s-c)/w)
                lo * r
                    + (hi - lo)
                        * width
                        * (softplus((r - center) / width) - softplus(-center / width))
            }
        }
    }

    /// Analytic inverse of the antiderivative when the family admits one.
    fn invert_antiderivative(&self, u: f64) -> Option<f64> {
        match *self {
            LawFamily::Constant { value } => Some(u / value),
            LawFamily::ClampedAffine {
                offset,
                slope,
                lo,
                hi,
            } => Some(clamped_affine_invert(offset, slope, lo, hi, u)),
            LawFamily::Sigmoid { .. } => None,
        }
    }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Overflow-safe ln(1 + e^x).
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Kink locations of clamp(offset + slope*r, lo, hi), sorted ascending,
/// with the constant values taken left of the first and right of the second.
fn clamped_affine_breaks(offset: f64, slope: f64, lo: f64, hi: f64) -> (f64, f64, f64, f64) {
    let r_lo = (lo - offset) / slope;
    let r_hi = (hi - offset) / slope;
    if slope > 0.0 {
        (r_lo, r_hi, lo, hi)
    } else {
        (r_hi, r_lo, hi, lo)
    }
}

fn clamped_affine_antiderivative(offset: f64, slope: f64, lo: f64, hi: f64, r: f64) -> f64 {
    let (p1, p2, left_val, right_val) = clamped_affine_breaks(offset, slope, lo, hi);
    // Integrate segment by segment over [min(0,r), max(0,r)] with sign.
    let (a, b, sign) = if r >= 0.0 {
        (0.0, r, 1.0)
    } else {
        (r, 0.0, -1.0)
    };
    let mut total = 0.0;
    // Left constant part on [a, min(b, p1)]
    if a < p1 {
        total += left_val * (b.min(p1) - a);
    }
    // Affine middle on [max(a,p1), min(b,p2)]
    let s = a.max(p1);
    let e = b.min(p2);
    if s < e {
        total += offset * (e - s) + 0.5 * slope * (e * e - s * s);
    }
    // Right constant part on [max(a, p2), b]
    if b > p2 {
        total += right_val * (b - a.max(p2));
    }
    sign * total
}

fn clamped_affine_invert(offset: f64, slope: f64, lo: f64, hi: f64, u: f64) -> f64 {
    let (p1, p2, left_val, right_val) = clamped_affine_breaks(offset, slope, lo, hi);
    let k1 = clamped_affine_antiderivative(offset, slope, lo, hi, p1);
    let k2 = clamped_affine_antiderivative(offset, slope, lo, hi, p2);
    if u <= k1 {
        p1 + (u - k1) / left_val
    } else if u >= k2 {
        p2 + (u - k2) / right_val
    } else {
        // Middle branch: u = K(p1) + offset (r - p1) + slope (r² - p1²)/2,
        // a monotone quadratic on [p1, p2]; stable root via the q-trick.
        let qa = 0.5 * slope;
        let qb = offset;
        let qc = k1 - offset * p1 - 0.5 * slope * p1 * p1 - u;
        let disc = (qb * qb - 4.0 * qa * qc).max(0.0);
        let q = -0.5 * (qb + qb.signum() * disc.sqrt());
        let r1 = q / qa;
        let r2 = if q != 0.0 { qc / q } else { f64::INFINITY };
        let pick = |r: f64| {
            r.is_finite() && r >= p1 - 1e-9 * (1.0 + p1.abs()) && r <= p2 + 1e-9 * (1.0 + p2.abs())
        };
        if pick(r1) {
            r1.clamp(p1, p2)
        } else if pick(r2) {
            r2.clamp(p1, p2)
        } else {
            // Degenerate rounding case; midpoint is a fine Newton seed.
            0.5 * (p1 + p2)
        }
    }
}

/// Preset family for the boundary exchange law h: continuous,
/// non-decreasing, h(0) = 0.
#[derive(Debug, Clone, PartialEq)]
pub enum ExchangeLaw {
    /// h ≡ 0, the insulated degenerate case (non-strictly increasing).
    Zero,
    /// h(r) = slope * r.
    Linear { slope: f64 },
    /// h(r) = clamp(slope * r, lo, hi); requires lo <= 0 <= hi so h(0) = 0.
    ClampedLinear { slope: f64, lo: f64, hi: f64 },
    /// h(r) = coeff * sign(r) |r|^exponent with exponent in (0, 1].
    /// Exponents above one make |beta| outgrow C(1 + |r|) and are rejected.
    Power { coeff: f64, exponent: f64 },
}

impl ExchangeLaw {
    fn validate(&self) -> Result<(), LawError> {
        match *self {
            ExchangeLaw::Zero => Ok(()),
            ExchangeLaw::Linear { slope } => {
                if slope < 0.0 {
                    return Err(LawError::DecreasingExchange(slope));
                }
                Ok(())
            }
            ExchangeLaw::ClampedLinear { slope, lo, hi } => {
                if slope < 0.0 {
                    return Err(LawError::DecreasingExchange(slope));
                }
                let at_zero = (slope * 0.0).clamp(lo, hi);
                if at_zero != 0.0 {
                    return Err(LawError::NonzeroAtOrigin(at_zero));
                }
                Ok(())
            }
            ExchangeLaw::Power { coeff, exponent } => {
                if coeff < 0.0 {
                    return Err(LawError::DecreasingExchange(coeff));
                }
                if exponent <= 0.0 {
                    return Err(LawError::BadExponent(exponent));
                }
                if exponent > 1.0 {
                    return Err(LawError::GrowthBound(exponent));
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, r: f64) -> f64 {
        match *self {
            ExchangeLaw::Zero => 0.0,
            ExchangeLaw::Linear { slope } => slope * r,
            ExchangeLaw::ClampedLinear { slope, lo, hi } => (slope * r).clamp(lo, hi),
            ExchangeLaw::Power { coeff, exponent } => coeff * r.signum() * r.abs().powf(exponent),
        }
    }
}

/// The constitutive data of one material: σ, k, h together with the exact
/// bounds σ_* <= σ <= σ^ and k_* <= k <= k^ and the derived maps K, γ, β.
///
/// Immutable after construction; shared freely across threads.
#[derive(Debug, Clone)]
pub struct MaterialLaws {
    sigma: LawFamily,
    k: LawFamily,
    h: ExchangeLaw,
    sigma_lo: f64,
    sigma_hi: f64,
    k_lo: f64,
    k_hi: f64,
}

impl MaterialLaws {
    pub fn new(sigma: LawFamily, k: LawFamily, h: ExchangeLaw) -> Result<Self, LawError> {
        sigma.validate("sigma")?;
        k.validate("k")?;
        h.validate()?;
        let (sigma_lo, sigma_hi) = sigma.bounds();
        let (k_lo, k_hi) = k.bounds();
        Ok(MaterialLaws {
            sigma,
            k,
            h,
            sigma_lo,
            sigma_hi,
            k_lo,
            k_hi,
        })
    }

    pub fn sigma(&self, theta: f64) -> f64 {
        self.sigma.eval(theta)
    }

    pub fn k(&self, theta: f64) -> f64 {
        self.k.eval(theta)
    }

    pub fn h(&self, theta: f64) -> f64 {
        self.h.eval(theta)
    }

    /// (σ_*, σ^): exact bounds of σ over ℝ.
    pub fn sigma_bounds(&self) -> (f64, f64) {
        (self.sigma_lo, self.sigma_hi)
    }

    /// (k_*, k^): exact bounds of k over ℝ.
    pub fn k_bounds(&self) -> (f64, f64) {
        (self.k_lo, self.k_hi)
    }

    /// Kirchhoff transform K(θ) = ∫₀^θ k, evaluated in closed form.
    pub fn kirchhoff(&self, theta: f64) -> f64 {
        self.k.antiderivative(theta)
    }

    /// γ = K⁻¹. Closed form for the constant and clamped-affine families,
    /// bisection-bracketed Newton otherwise; either way finished with a
    /// Newton polish so |K(γ(u)) - u| <= TOL_INV * max(1, |u|).
    pub fn kirchhoff_inverse(&self, u: f64) -> f64 {
        let mut r = match self.k.invert_antiderivative(u) {
            Some(r) => r,
            None => self.invert_by_newton(u),
        };
        // One or two polish steps; K' = k >= k_lo > 0 keeps these well posed.
        for _ in 0..2 {
            let err = self.kirchhoff(r) - u;
            if err.abs() <= TOL_INV * u.abs().max(1.0) {
                break;
            }
            r -= err / self.k.eval(r);
        }
        r
    }

    /// Safeguarded Newton on K(r) = u, bracketed by the Lipschitz sandwich
    /// k_* r <= K(r) <= k^ r (r >= 0; mirrored for r < 0).
    fn invert_by_newton(&self, u: f64) -> f64 {
        let (mut a, mut b) = if u >= 0.0 {
            (u / self.k_hi, u / self.k_lo)
        } else {
            (u / self.k_lo, u / self.k_hi)
        };
        let mut r = 0.5 * (a + b);
        let tol = TOL_INV * u.abs().max(1.0);
        for _ in 0..100 {
            let err = self.kirchhoff(r) - u;
            if err.abs() <= tol {
                return r;
            }
            if err > 0.0 {
                b = r;
            } else {
                a = r;
            }
            let step = err / self.k.eval(r);
            let next = r - step;
            r = if next > a && next < b {
                next
            } else {
                0.5 * (a + b)
            };
        }
        r
    }

    /// β(u) = h(γ(u)); non-decreasing with β(0) = 0.
    pub fn beta(&self, u: f64) -> f64 {
        self.h.eval(self.kirchhoff_inverse(u))
    }

    /// Slope of β by centered finite difference with relative step 1e-7
    /// (h is only assumed continuous, so no analytic derivative is demanded).
    pub fn beta_prime(&self, u: f64) -> f64 {
        let eps = 1e-7 * u.abs().max(1.0);
        let d = (self.beta(u + eps) - self.beta(u - eps)) / (2.0 * eps);
        d.max(0.0)
    }

    /// γ'(u) = 1/k(γ(u)), in [1/k^, 1/k_*].
    pub fn gamma_prime(&self, u: f64) -> f64 {
        1.0 / self.k.eval(self.kirchhoff_inverse(u))
    }
}

/// The truncation operator T_τ(r) = clamp(r, -1/τ, 1/τ).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncation {
    tau: f64,
    bound: f64,
}

impl Truncation {
    pub fn new(tau: f64) -> Result<Self, LawError> {
        if !(tau > 0.0) {
            return Err(LawError::BadTau(tau));
        }
        Ok(Truncation {
            tau,
            bound: 1.0 / tau,
        })
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn bound(&self) -> f64 {
        self.bound
    }

    pub fn apply(&self, r: f64) -> f64 {
        r.clamp(-self.bound, self.bound)
    }

    /// True when T_τ actually clips r.
    pub fn active(&self, r: f64) -> bool {
        r.abs() > self.bound
    }
}
