//! Frozen-coefficient potential solver.
//!
//! At a fixed time node the potential solves div(σ(θ_delay) ∇φ) = 0 with
//! φ = 0 on the bottom base, φ = V on the top base and zero flux through the
//! lateral boundary. The shifted potential ψ = φ - (z/ℓ) V vanishes on both
//! bases and satisfies the variational identity
//!
//!   Σ_f σ_f ∇ψ·∇w + Σ_f σ_f (V/ℓ) ∂w/∂z = 0
//!
//! for all discrete w vanishing on Γ_b. The problem is linear in V, so a
//! single unit solve (V = 1) per node is enough: ψ = V·ψ_unit.
//!
//! The scheme is a cell-centered two-point flux finite volume method with
//! harmonic face conductivities and half-cell Dirichlet fluxes; the assembled
//! operator is a symmetric positive definite M-matrix, solved by
//! Jacobi-preconditioned conjugate gradients.

use crate::grid::{face_conductivity, FaceValues, Field, Grid, GridError};
use crate::laws::MaterialLaws;
use crate::linalg::{dot, pcg, CgOutcome};
use thiserror::Error;

/// Internal safety factor: conjugate gradients iterate to
/// `CG_SAFETY * tol_lin` so that quantities derived from the solution
/// (current profile, energies) meet their own 10·tol certificates.
const CG_SAFETY: f64 = 0.05;

#[derive(Debug, Error)]
pub enum EllipticError {
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error("tolerance must be positive, got {0}")]
    BadTolerance(f64),
    #[error(
        "conjugate gradients hit the iteration cap {iterations} at relative residual {residual:e}"
    )]
    IterationCap { iterations: usize, residual: f64 },
}

/// The V = 1 solve at one time node. σ depends only on the delayed
/// temperature, so this is reused across fixed-point iterations.
#[derive(Debug, Clone)]
pub struct UnitElliptic {
    pub phi: Field,
    pub psi: Field,
    /// Î: the unit current integral; I_R(V) = Î·V.
    pub i_r: f64,
    /// Per-layer cross-sectional fluxes of the unit solution (nz + 1 layers,
    /// including the two Dirichlet layers).
    pub profile: Vec<f64>,
    /// σ-weighted Dirichlet energies of the unit ψ and φ.
    pub energy_psi: f64,
    pub energy_phi: f64,
    /// Σ over z-faces of σ_f (1/ℓ)² A_f δ_f: the discrete right side of the
    /// ψ-energy estimate for V = 1.
    pub psi_energy_bound: f64,
    /// |∇φ_unit|² per cell (average of squared face-difference quotients).
    pub grad_sq: Field,
    /// Achieved relative linear residual.
    pub solver_residual: f64,
    /// √N · ‖b‖₂ of the unit system; together with `solver_residual` this
    /// bounds the layer-to-layer drift of the flux profile.
    pub cert_scale: f64,
    pub sigma_faces: FaceValues,
}

/// Potential problem solved at an actual voltage V.
#[derive(Debug, Clone)]
pub struct EllipticSolution {
    pub v: f64,
    pub phi: Field,
    pub psi: Field,
    pub unit_psi: Field,
    pub i_r: f64,
    pub ir_profile: Vec<f64>,
    pub energy_psi: f64,
    pub energy_phi: f64,
    pub psi_energy_bound: f64,
    pub grad_sq: Field,
    pub solver_residual: f64,
    pub cert_scale: f64,
    pub sigma_faces: FaceValues,
}

impl UnitElliptic {
    /// Scale the unit solve to voltage V; fields are affine in V with
    /// φ(V) = V·φ_unit, energies quadratic, currents linear.
    pub fn at_voltage(&self, g: &Grid, v: f64) -> EllipticSolution {
        let scale = |f: &Field, s: f64| Field(f.0.iter().map(|&x| s * x).collect());
        let _ = g;
        EllipticSolution {
            v,
            phi: scale(&self.phi, v),
            psi: scale(&self.psi, v),
            unit_psi: self.psi.clone(),
            i_r: self.i_r * v,
            ir_profile: self.profile.iter().map(|&p| p * v).collect(),
            energy_psi: self.energy_psi * v * v,
            energy_phi: self.energy_phi * v * v,
            psi_energy_bound: self.psi_energy_bound * v * v,
            grad_sq: scale(&self.grad_sq, v * v),
            solver_residual: self.solver_residual,
            cert_scale: self.cert_scale * v.abs(),
            sigma_faces: self.sigma_faces.clone(),
        }
    }
}

/// Face transmissibilities σ_f A_f / δ_f; z-boundary faces use the half-cell
/// distance hz/2. Lateral boundary faces are zero-flux and carry none.
struct Transmissibility {
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
}

fn transmissibility(g: &Grid, sf: &FaceValues) -> Transmissibility {
    let ax = g.hy * g.hz / g.hx;
    let ay = g.hx * g.hz / g.hy;
    let az = g.hx * g.hy / g.hz;
    let mut t = Transmissibility {
        x: sf.x.iter().map(|&s| s * ax).collect(),
        y: sf.y.iter().map(|&s| s * ay).collect(),
        z: sf.z.iter().map(|&s| s * az).collect(),
    };
    // Dirichlet layers: distance hz/2 doubles the coefficient.
    for j in 0..g.ny {
        for i in 0..g.nx {
            let b = sf.zi(g, i, j, 0);
            let tfc = sf.zi(g, i, j, g.nz);
            t.z[b] *= 2.0;
            t.z[tfc] *= 2.0;
        }
    }
    t
}

/// out = A x for the SPD operator with homogeneous Dirichlet data on Γ_b
/// folded into the diagonal and zero-flux lateral faces.
fn apply(g: &Grid, t: &Transmissibility, sf: &FaceValues, x: &[f64], out: &mut [f64]) {
    for k in 0..g.nz {
        for j in 0..g.ny {
            for i in 0..g.nx {
                let c = g.idx(i, j, k);
                let xc = x[c];
                let mut acc = 0.0;
                if i > 0 {
                    acc += t.x[sf.xi(g, i, j, k)] * (xc - x[g.idx(i - 1, j, k)]);
                }
                if i + 1 < g.nx {
                    acc += t.x[sf.xi(g, i + 1, j, k)] * (xc - x[g.idx(i + 1, j, k)]);
                }
                if j > 0 {
                    acc += t.y[sf.yi(g, i, j, k)] * (xc - x[g.idx(i, j - 1, k)]);
                }
                if j + 1 < g.ny {
                    acc += t.y[sf.yi(g, i, j + 1, k)] * (xc - x[g.idx(i, j + 1, k)]);
                }
                if k > 0 {
                    acc += t.z[sf.zi(g, i, j, k)] * (xc - x[g.idx(i, j, k - 1)]);
                } else {
                    acc += t.z[sf.zi(g, i, j, 0)] * xc;
                }
                if k + 1 < g.nz {
                    acc += t.z[sf.zi(g, i, j, k + 1)] * (xc - x[g.idx(i, j, k + 1)]);
                } else {
                    acc += t.z[sf.zi(g, i, j, g.nz)] * xc;
                }
                out[c] = acc;
            }
        }
    }
}

fn diagonal(g: &Grid, t: &Transmissibility, sf: &FaceValues) -> Vec<f64> {
    let mut d = vec![0.0; g.n_cells()];
    for k in 0..g.nz {
        for j in 0..g.ny {
            for i in 0..g.nx {
                let c = g.idx(i, j, k);
                let mut acc = 0.0;
                if i > 0 {
                    acc += t.x[sf.xi(g, i, j, k)];
                }
                if i + 1 < g.nx {
                    acc += t.x[sf.xi(g, i + 1, j, k)];
                }
                if j > 0 {
                    acc += t.y[sf.yi(g, i, j, k)];
                }
                if j + 1 < g.ny {
                    acc += t.y[sf.yi(g, i, j + 1, k)];
                }
                acc += if k > 0 {
                    t.z[sf.zi(g, i, j, k)]
                } else {
                    t.z[sf.zi(g, i, j, 0)]
                };
                acc += if k + 1 < g.nz {
                    t.z[sf.zi(g, i, j, k + 1)]
                } else {
                    t.z[sf.zi(g, i, j, g.nz)]
                };
                d[c] = acc;
            }
        }
    }
    d
}

/// Solve the unit (V = 1) potential problem for the delayed temperature.
pub fn solve_unit_potential(
    g: &Grid,
    laws: &MaterialLaws,
    theta_delay: &Field,
    tol_lin: f64,
) -> Result<UnitElliptic, EllipticError> {
    if !(tol_lin > 0.0) {
        return Err(EllipticError::BadTolerance(tol_lin));
    }
    theta_delay.check(g)?;
    let sigma = Field(theta_delay.0.iter().map(|&th| laws.sigma(th)).collect());
    let sf = face_conductivity(g, &sigma)?;
    let t = transmissibility(g, &sf);
    let diag = diagonal(g, &t, &sf);

    // Right side: the top Dirichlet layer at φ = 1.
    let mut b = vec![0.0; g.n_cells()];
    for j in 0..g.ny {
        for i in 0..g.nx {
            b[g.idx(i, j, g.nz - 1)] = t.z[sf.zi(g, i, j, g.nz)];
        }
    }

    // Linear profile initial guess: exact for uniform σ.
    let mut phi: Vec<f64> = Vec::with_capacity(g.n_cells());
    for k in 0..g.nz {
        let zc = (k as f64 + 0.5) * g.hz;
        for _ in 0..g.nx * g.ny {
            phi.push(zc / g.ell);
        }
    }
    let max_iter = g.n_cells().max(1000);
    let res = match pcg(
        |x, out| apply(g, &t, &sf, x, out),
        &b,
        &diag,
        &mut phi,
        CG_SAFETY * tol_lin,
        max_iter,
    ) {
        CgOutcome::Converged { residual } => residual,
        CgOutcome::Stalled {
            residual,
            iterations,
        } => {
            if residual > tol_lin {
                return Err(EllipticError::IterationCap {
                    iterations,
                    residual,
                });
            }
            residual
        }
    };

    let phi = Field(phi);
    let psi = Field(
        phi.0
            .iter()
            .enumerate()
            .map(|(c, &p)| {
                let k = c / (g.nx * g.ny);
                p - ((k as f64 + 0.5) * g.hz) / g.ell
            })
            .collect(),
    );

    let profile = flux_profile(g, &sf, &phi, 1.0);
    let i_r = profile.iter().sum::<f64>() / profile.len() as f64;
    let energy_phi = dirichlet_energy(g, &sf, &phi, 0.0, 1.0);
    let energy_psi = dirichlet_energy(g, &sf, &psi, 0.0, 0.0);
    let psi_energy_bound = psi_bound(g, &sf);
    let grad_sq = grad_squared(g, &phi, 1.0);
    let b_norm = dot(&b, &b).sqrt();
    let cert_scale = (g.n_cells() as f64).sqrt() * b_norm;

    Ok(UnitElliptic {
        phi,
        psi,
        i_r,
        profile,
        energy_psi,
        energy_phi,
        psi_energy_bound,
        grad_sq,
        solver_residual: res,
        cert_scale,
        sigma_faces: sf,
    })
}

/// Solve the potential problem at voltage V (one unit solve, then scaling).
pub fn solve_potential(
    g: &Grid,
    laws: &MaterialLaws,
    theta_delay: &Field,
    v: f64,
    tol_lin: f64,
) -> Result<EllipticSolution, EllipticError> {
    Ok(solve_unit_potential(g, laws, theta_delay, tol_lin)?.at_voltage(g, v))
}

/// Cross-sectional current through each horizontal face layer:
/// profile(k) = Σ_{i,j} σ_f (φ_above - φ_below)/δ · hx hy, with the Dirichlet
/// data closing the two boundary layers. With an exact solve the profile is
/// constant in z: lateral fluxes vanish and the scheme is conservative.
fn flux_profile(g: &Grid, sf: &FaceValues, phi: &Field, v: f64) -> Vec<f64> {
    let area = g.hx * g.hy;
    let mut profile = Vec::with_capacity(g.nz + 1);
    for kf in 0..=g.nz {
        let mut s = 0.0;
        for j in 0..g.ny {
            for i in 0..g.nx {
                let sig = sf.z[sf.zi(g, i, j, kf)];
                let q = if kf == 0 {
                    (phi[g.idx(i, j, 0)] - 0.0) / (0.5 * g.hz)
                } else if kf == g.nz {
                    (v - phi[g.idx(i, j, g.nz - 1)]) / (0.5 * g.hz)
                } else {
                    (phi[g.idx(i, j, kf)] - phi[g.idx(i, j, kf - 1)]) / g.hz
                };
                s += sig * q * area;
            }
        }
        profile.push(s);
    }
    profile
}

/// Recompute (I_R, per-layer profile) from a stored solution.
pub fn current_integral(g: &Grid, sol: &EllipticSolution) -> (f64, Vec<f64>) {
    let profile = flux_profile(g, &sol.sigma_faces, &sol.phi, sol.v);
    let i_r = profile.iter().sum::<f64>() / profile.len() as f64;
    (i_r, profile)
}

/// Σ_f σ_f |D field|² A_f δ_f with Dirichlet closures (bottom_bc, top_bc)
/// on the two bases; lateral faces are flux-free and contribute nothing.
fn dirichlet_energy(g: &Grid, sf: &FaceValues, field: &Field, bottom_bc: f64, top_bc: f64) -> f64 {
    let mut e = 0.0;
    let vol = g.hx * g.hy * g.hz;
    for k in 0..g.nz {
        for j in 0..g.ny {
            for i in 1..g.nx {
                let d = (field[g.idx(i, j, k)] - field[g.idx(i - 1, j, k)]) / g.hx;
                e += sf.x[sf.xi(g, i, j, k)] * d * d * vol;
            }
        }
    }
    for k in 0..g.nz {
        for j in 1..g.ny {
            for i in 0..g.nx {
                let d = (field[g.idx(i, j, k)] - field[g.idx(i, j - 1, k)]) / g.hy;
                e += sf.y[sf.yi(g, i, j, k)] * d * d * vol;
            }
        }
    }
    for kf in 1..g.nz {
        for j in 0..g.ny {
            for i in 0..g.nx {
                let d = (field[g.idx(i, j, kf)] - field[g.idx(i, j, kf - 1)]) / g.hz;
                e += sf.z[sf.zi(g, i, j, kf)] * d * d * vol;
            }
        }
    }
    let half_vol = g.hx * g.hy * (0.5 * g.hz);
    for j in 0..g.ny {
        for i in 0..g.nx {
            let db = (field[g.idx(i, j, 0)] - bottom_bc) / (0.5 * g.hz);
            e += sf.z[sf.zi(g, i, j, 0)] * db * db * half_vol;
            let dt = (top_bc - field[g.idx(i, j, g.nz - 1)]) / (0.5 * g.hz);
            e += sf.z[sf.zi(g, i, j, g.nz)] * dt * dt * half_vol;
        }
    }
    e
}

/// Σ over z-faces of σ_f (1/ℓ)² A_f δ_f, the unit-voltage discrete mirror of
/// ∫ σ V²/ℓ² (the total z-face volume is exactly |Ω|).
fn psi_bound(g: &Grid, sf: &FaceValues) -> f64 {
    let inv_ell_sq = 1.0 / (g.ell * g.ell);
    let vol = g.hx * g.hy * g.hz;
    let half_vol = 0.5 * vol;
    let mut s = 0.0;
    for kf in 0..=g.nz {
        let w = if kf == 0 || kf == g.nz { half_vol } else { vol };
        for j in 0..g.ny {
            for i in 0..g.nx {
                s += sf.z[sf.zi(g, i, j, kf)] * inv_ell_sq * w;
            }
        }
    }
    s
}

/// |∇φ|² per cell: in each direction the average of the two squared
/// face-difference quotients; lateral boundary faces are flux-free so their
/// quotient is zero, and the Γ_b half-cell quotients use the Dirichlet data.
fn grad_squared(g: &Grid, phi: &Field, v: f64) -> Field {
    let mut out = vec![0.0; g.n_cells()];
    for k in 0..g.nz {
        for j in 0..g.ny {
            for i in 0..g.nx {
                let c = g.idx(i, j, k);
                let pc = phi[c];
                let qxm = if i > 0 {
                    (pc - phi[g.idx(i - 1, j, k)]) / g.hx
                } else {
                    0.0
                };
                let qxp = if i + 1 < g.nx {
                    (phi[g.idx(i + 1, j, k)] - pc) / g.hx
                } else {
                    0.0
                };
                let qym = if j > 0 {
                    (pc - phi[g.idx(i, j - 1, k)]) / g.hy
                } else {
                    0.0
                };
                let qyp = if j + 1 < g.ny {
                    (phi[g.idx(i, j + 1, k)] - pc) / g.hy
                } else {
                    0.0
                };
                let qzm = if k > 0 {
                    (pc - phi[g.idx(i, j, k - 1)]) / g.hz
                } else {
                    (pc - 0.0) / (0.5 * g.hz)
                };
                let qzp = if k + 1 < g.nz {
                    (phi[g.idx(i, j, k + 1)] - pc) / g.hz
                } else {
                    (v - pc) / (0.5 * g.hz)
                };
                out[c] = 0.5 * (qxm * qxm + qxp * qxp)
                    + 0.5 * (qym * qym + qyp * qyp)
                    + 0.5 * (qzm * qzm + qzp * qzp);
            }
        }
    }
    Field(out)
}

/// Result of the discrete energy inequalities at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyReport {
    pub energy_psi: f64,
    pub psi_bound: f64,
    pub energy_phi: f64,
    pub phi_bound: f64,
    pub pass: bool,
}

/// Slack on the energy inequalities; covers rounding and the inexact solve.
pub const ENERGY_SLACK: f64 = 1e-10;

/// Discrete mirrors of the ψ-energy estimate (test w = ψ, Young) and the
/// φ-energy bound 4 σ^ |Ω| V²/ℓ².
pub fn check_elliptic_energy(
    sol: &EllipticSolution,
    laws: &MaterialLaws,
    g: &Grid,
) -> EnergyReport {
    let (_, sigma_hi) = laws.sigma_bounds();
    let psi_bound = sol.psi_energy_bound;
    let phi_bound = 4.0 * sigma_hi * g.volume() / (g.ell * g.ell) * sol.v * sol.v;
    let pass = sol.energy_psi <= psi_bound * (1.0 + ENERGY_SLACK) + f64::MIN_POSITIVE
        && sol.energy_phi <= phi_bound * (1.0 + ENERGY_SLACK) + f64::MIN_POSITIVE;
    EnergyReport {
        energy_psi: sol.energy_psi,
        psi_bound,
        energy_phi: sol.energy_phi,
        phi_bound,
        pass,
    }
}

/// Discrete ‖φ‖²_{H¹} = ∫ φ² + ∫ |∇φ|² with Dirichlet closures (0, v),
/// unit-weighted; used for the a priori voltage bound.
pub fn dirichlet_h1_sq(g: &Grid, phi: &Field, v: f64) -> f64 {
    let mut l2 = 0.0;
    for &p in &phi.0 {
        l2 += p * p;
    }
    l2 *= g.cell_volume();
    let ones = FaceValues {
        x: vec![1.0; (g.nx + 1) * g.ny * g.nz],
        y: vec![1.0; g.nx * (g.ny + 1) * g.nz],
        z: vec![1.0; g.nx * g.ny * (g.nz + 1)],
    };
    l2 + dirichlet_energy(g, &ones, phi, 0.0, v)
}
