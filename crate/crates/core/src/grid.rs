//! Tensor-product finite-volume mesh of the cylinder Ω = B × (0, ℓ),
//! with B a rectangle (0, Lx) × (0, Ly).
//!
//! Cell centers carry the unknowns; faces carry fluxes. The boundary splits
//! into Γ_b (the two horizontal bases z = 0 and z = ℓ) and the lateral
//! boundary Γ_ℓ (the four vertical sides). Integrals use the midpoint rule
//! with a fixed summation order, so results are bit-stable.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum GridError {
    #[error("cell counts must be at least 2, got ({nx}, {ny}, {nz})")]
    TooFewCells { nx: usize, ny: usize, nz: usize },
    #[error("side lengths must be positive, got ({lx}, {ly}, {ell})")]
    NonPositiveLength { lx: f64, ly: f64, ell: f64 },
    #[error("field has {got} entries, grid has {want} cells")]
    FieldSizeMismatch { got: usize, want: usize },
    #[error("lateral trace has {got} entries, grid has {want} lateral faces")]
    TraceSizeMismatch { got: usize, want: usize },
    #[error("field entry {index} is not finite")]
    NonFiniteEntry { index: usize },
    #[error("conductivity must be positive everywhere, found {value} in cell {index}")]
    NonPositiveConductivity { index: usize, value: f64 },
}

/// Uniform cell-centered mesh of B × (0, ℓ). Immutable.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    pub lx: f64,
    pub ly: f64,
    pub ell: f64,
    pub hx: f64,
    pub hy: f64,
    pub hz: f64,
}

impl Grid {
    pub fn new(
        nx: usize,
        ny: usize,
        nz: usize,
        lx: f64,
        ly: f64,
        ell: f64,
    ) -> Result<Self, GridError> {
        if nx < 2 || ny < 2 || nz < 2 {
            return Err(GridError::TooFewCells { nx, ny, nz });
        }
        if !(lx > 0.0 && ly > 0.0 && ell > 0.0) {
            return Err(GridError::NonPositiveLength { lx, ly, ell });
        }
        Ok(Grid {
            nx,
            ny,
            nz,
            lx,
            ly,
            ell,
            hx: lx / nx as f64,
            hy: ly / ny as f64,
            hz: ell / nz as f64,
        })
    }

    pub fn n_cells(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    pub fn cell_volume(&self) -> f64 {
        self.hx * self.hy * self.hz
    }

    /// |B| = Lx · Ly.
    pub fn base_area(&self) -> f64 {
        self.lx * self.ly
    }

    /// |Ω| = |B| · ℓ.
    pub fn volume(&self) -> f64 {
        self.base_area() * self.ell
    }

    /// |Γ_ℓ| = 2 (Lx + Ly) ℓ.
    pub fn lateral_area(&self) -> f64 {
        2.0 * (self.lx + self.ly) * self.ell
    }

    pub fn n_lateral_faces(&self) -> usize {
        2 * (self.nx + self.ny) * self.nz
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.nx * (j + self.ny * k)
    }

    pub fn cell_center(&self, i: usize, j: usize, k: usize) -> (f64, f64, f64) {
        (
            (i as f64 + 0.5) * self.hx,
            (j as f64 + 0.5) * self.hy,
            (k as f64 + 0.5) * self.hz,
        )
    }

    /// Lateral boundary faces in a fixed order: per z-layer, the x = 0 side
    /// (j ascending), then x = Lx, then y = 0 (i ascending), then y = Ly.
    pub fn lateral_faces(&self) -> impl Iterator<Item = LateralFace> + '_ {
        let per_layer = 2 * self.ny + 2 * self.nx;
        (0..self.n_lateral_faces()).map(move |t| {
            let k = t / per_layer;
            let r = t % per_layer;
            let (i, j, side) = if r < self.ny {
                (0, r, Side::XLow)
            } else if r < 2 * self.ny {
                (self.nx - 1, r - self.ny, Side::XHigh)
            } else if r < 2 * self.ny + self.nx {
                (r - 2 * self.ny, 0, Side::YLow)
            } else {
                (r - 2 * self.ny - self.nx, self.ny - 1, Side::YHigh)
            };
            let area = match side {
                Side::XLow | Side::XHigh => self.hy * self.hz,
                Side::YLow | Side::YHigh => self.hx * self.hz,
            };
            let (cx, cy, cz) = self.cell_center(i, j, k);
            let center = match side {
                Side::XLow => (0.0, cy, cz),
                Side::XHigh => (self.lx, cy, cz),
                Side::YLow => (cx, 0.0, cz),
                Side::YHigh => (cx, self.ly, cz),
            };
            LateralFace {
                trace_index: t,
                cell: self.idx(i, j, k),
                area,
                center,
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Side {
    XLow,
    XHigh,
    YLow,
    YHigh,
}

/// One face of the lateral boundary Γ_ℓ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LateralFace {
    pub trace_index: usize,
    /// Index of the adjacent interior cell.
    pub cell: usize,
    pub area: f64,
    /// Face center (on the boundary), for evaluating boundary data.
    pub center: (f64, f64, f64),
}

/// Cell-centered scalar field, indexed by `Grid::idx`.
#[derive(Debug, Clone, PartialEq)]
pub struct Field(pub Vec<f64>);

impl Field {
    pub fn constant(g: &Grid, value: f64) -> Field {
        Field(vec![value; g.n_cells()])
    }

    pub fn from_fn<F: Fn(f64, f64, f64) -> f64>(g: &Grid, f: F) -> Field {
        let mut v = Vec::with_capacity(g.n_cells());
        for k in 0..g.nz {
            for j in 0..g.ny {
                for i in 0..g.nx {
                    let (x, y, z) = g.cell_center(i, j, k);
                    v.push(f(x, y, z));
                }
            }
        }
        Field(v)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn check(&self, g: &Grid) -> Result<(), GridError> {
        if self.0.len() != g.n_cells() {
            return Err(GridError::FieldSizeMismatch {
                got: self.0.len(),
                want: g.n_cells(),
            });
        }
        for (i, v) in self.0.iter().enumerate() {
            if !v.is_finite() {
                return Err(GridError::NonFiniteEntry { index: i });
            }
        }
        Ok(())
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl std::ops::Index<usize> for Field {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

impl std::ops::IndexMut<usize> for Field {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.0[i]
    }
}

/// Scalar values on the lateral boundary faces, in `lateral_faces` order.
#[derive(Debug, Clone, PartialEq)]
pub struct LateralTrace(pub Vec<f64>);

impl LateralTrace {
    pub fn constant(g: &Grid, value: f64) -> LateralTrace {
        LateralTrace(vec![value; g.n_lateral_faces()])
    }

    pub fn from_fn<F: Fn(f64, f64, f64) -> f64>(g: &Grid, f: F) -> LateralTrace {
        LateralTrace(
            g.lateral_faces()
                .map(|fc| f(fc.center.0, fc.center.1, fc.center.2))
                .collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn check(&self, g: &Grid) -> Result<(), GridError> {
        if self.0.len() != g.n_lateral_faces() {
            return Err(GridError::TraceSizeMismatch {
                got: self.0.len(),
                want: g.n_lateral_faces(),
            });
        }
        Ok(())
    }

    pub fn min(&self) -> f64 {
        self.0.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

impl std::ops::Index<usize> for LateralTrace {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.0[i]
    }
}

/// Discrete ∫_Ω f dv: midpoint rule, exact for cellwise-constant integrands.
pub fn integrate_volume(g: &Grid, f: &Field) -> f64 {
    debug_assert_eq!(f.len(), g.n_cells());
    let mut s = 0.0;
    for v in &f.0 {
        s += v;
    }
    g.cell_volume() * s
}

/// Discrete ∫_{Γ_ℓ} t ds with per-face areas.
pub fn integrate_lateral(g: &Grid, t: &LateralTrace) -> f64 {
    debug_assert_eq!(t.len(), g.n_lateral_faces());
    let mut s = 0.0;
    for fc in g.lateral_faces() {
        s += fc.area * t.0[fc.trace_index];
    }
    s
}

/// Per-face scalar values on all faces of the grid (x-, y- and z-normal),
/// used for face conductivities and face fluxes.
///
/// Layouts: x-faces (nx+1)·ny·nz at `i + (nx+1)(j + ny k)`, y-faces
/// nx·(ny+1)·nz at `i + nx(j + (ny+1) k)`, z-faces nx·ny·(nz+1) at
/// `i + nx(j + ny kf)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceValues {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
}

impl FaceValues {
    pub fn zeros(g: &Grid) -> FaceValues {
        FaceValues {
            x: vec![0.0; (g.nx + 1) * g.ny * g.nz],
            y: vec![0.0; g.nx * (g.ny + 1) * g.nz],
            z: vec![0.0; g.nx * g.ny * (g.nz + 1)],
        }
    }

    #[inline]
    pub fn xi(&self, g: &Grid, i: usize, j: usize, k: usize) -> usize {
        debug_assert!(i <= g.nx);
        i + (g.nx + 1) * (j + g.ny * k)
    }

    #[inline]
    pub fn yi(&self, g: &Grid, i: usize, j: usize, k: usize) -> usize {
        debug_assert!(j <= g.ny);
        i + g.nx * (j + (g.ny + 1) * k)
    }

    #[inline]
    pub fn zi(&self, g: &Grid, i: usize, j: usize, kf: usize) -> usize {
        debug_assert!(kf <= g.nz);
        i + g.nx * (j + g.ny * kf)
    }
}

fn harmonic_mean(a: f64, b: f64) -> f64 {
    2.0 * a * b / (a + b)
}

/// Face conductivities from a cell conductivity field: harmonic mean of the
/// two adjacent cells on interior faces, the adjacent cell value on boundary
/// faces. The harmonic mean keeps all face values in [min(a,b), max(a,b)],
/// hence in [σ_*, σ^], and makes the series-resistance of a layered medium
/// exact when material interfaces sit on cell faces.
pub fn face_conductivity(g: &Grid, sigma: &Field) -> Result<FaceValues, GridError> {
    if sigma.len() != g.n_cells() {
        return Err(GridError::FieldSizeMismatch {
            got: sigma.len(),
            want: g.n_cells(),
        });
    }
    for (idx, &v) in sigma.0.iter().enumerate() {
        if !(v > 0.0) {
            return Err(GridError::NonPositiveConductivity {
                index: idx,
                value: v,
            });
        }
    }
    let mut f = FaceValues::zeros(g);
    for k in 0..g.nz {
        for j in 0..g.ny {
            for i in 0..=g.nx {
                let fi = f.xi(g, i, j, k);
                f.x[fi] = if i == 0 {
                    sigma[g.idx(0, j, k)]
                } else if i == g.nx {
                    sigma[g.idx(g.nx - 1, j, k)]
                } else {
                    harmonic_mean(sigma[g.idx(i - 1, j, k)], sigma[g.idx(i, j, k)])
                };
            }
        }
    }
    for k in 0..g.nz {
        for j in 0..=g.ny {
            for i in 0..g.nx {
                let fi = f.yi(g, i, j, k);
                f.y[fi] = if j == 0 {
                    sigma[g.idx(i, 0, k)]
                } else if j == g.ny {
                    sigma[g.idx(i, g.ny - 1, k)]
                } else {
                    harmonic_mean(sigma[g.idx(i, j - 1, k)], sigma[g.idx(i, j, k)])
                };
            }
        }
    }
    for kf in 0..=g.nz {
        for j in 0..g.ny {
            for i in 0..g.nx {
                let fi = f.zi(g, i, j, kf);
                f.z[fi] = if kf == 0 {
                    sigma[g.idx(i, j, 0)]
                } else if kf == g.nz {
                    sigma[g.idx(i, j, g.nz - 1)]
                } else {
                    harmonic_mean(sigma[g.idx(i, j, kf - 1)], sigma[g.idx(i, j, kf)])
                };
            }
        }
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_cube(n: usize) -> Grid {
        Grid::new(n, n, n, 1.0, 1.0, 1.0).unwrap()
    }

    #[test]
    fn construction_and_measures() {
        let g = unit_cube(2);
        assert_eq!(g.n_cells(), 8);
        assert_eq!(g.volume(), 1.0);
        let g = Grid::new(4, 4, 8, 1.0, 1.0, 2.0).unwrap();
        assert_eq!(g.hz, 0.25);
        assert_eq!(g.base_area(), 1.0);
        assert!(Grid::new(1, 2, 2, 1.0, 1.0, 1.0).is_err());
        assert!(Grid::new(2, 2, 2, 0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn boundary_faces_partition() {
        // Γ_ℓ face count and total area; Γ_b is handled via z-face layers 0 and nz.
        let g = Grid::new(3, 4, 5, 2.0, 1.0, 3.0).unwrap();
        assert_eq!(g.n_lateral_faces(), 2 * (3 + 4) * 5);
        assert_eq!(g.lateral_faces().count(), g.n_lateral_faces());
        let total: f64 = g.lateral_faces().map(|f| f.area).sum();
        assert!((total - g.lateral_area()).abs() < 1e-12);
        // Every trace index appears exactly once.
        let mut seen = vec![false; g.n_lateral_faces()];
        for f in g.lateral_faces() {
            assert!(!seen[f.trace_index]);
            seen[f.trace_index] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }

    #[test]
    fn integrate_volume_measures() {
        let g = unit_cube(4);
        assert_eq!(integrate_volume(&g, &Field::constant(&g, 1.0)), 1.0);
        let c = 3.25;
        let gg = Grid::new(4, 2, 3, 2.0, 1.0, 1.5).unwrap();
        assert!((integrate_volume(&gg, &Field::constant(&gg, c)) - c * gg.volume()).abs() < 1e-13);
        // Indicator of a single cell on the 4³ unit cube integrates to 1/64.
        let mut f = Field::constant(&g, 0.0);
        f[g.idx(1, 2, 3)] = 1.0;
        assert!((integrate_volume(&g, &f) - 1.0 / 64.0).abs() < 1e-16);
    }

    #[test]
    fn integrate_lateral_measures() {
        let g = unit_cube(2);
        assert!((integrate_lateral(&g, &LateralTrace::constant(&g, 1.0)) - 4.0).abs() < 1e-13);
        assert_eq!(integrate_lateral(&g, &LateralTrace::constant(&g, 0.0)), 0.0);
        // Single-face indicator on the 2³ unit cube: area hz·hx = 0.25.
        let mut t = LateralTrace::constant(&g, 0.0);
        t.0[0] = 1.0;
        assert!((integrate_lateral(&g, &t) - 0.25).abs() < 1e-16);
    }

    #[test]
    fn face_conductivity_harmonic_means() {
        let g = Grid::new(2, 2, 2, 1.0, 1.0, 1.0).unwrap();
        // Adjacent 1 and 3 in x: face value 2·1·3/4 = 1.5.
        let mut s = Field::constant(&g, 1.0);
        for k in 0..2 {
            for j in 0..2 {
                s[g.idx(1, j, k)] = 3.0;
            }
        }
        let f = face_conductivity(&g, &s).unwrap();
        assert_eq!(f.x[f.xi(&g, 1, 0, 0)], 1.5);
        // Boundary faces carry the adjacent cell value.
        assert_eq!(f.x[f.xi(&g, 0, 0, 0)], 1.0);
        assert_eq!(f.x[f.xi(&g, 2, 0, 0)], 3.0);
        // Equal neighbors reproduce the value.
        assert_eq!(f.y[f.yi(&g, 0, 1, 0)], 1.0);
        let uniform = face_conductivity(&g, &Field::constant(&g, 2.5)).unwrap();
        assert!(uniform
            .x
            .iter()
            .chain(&uniform.y)
            .chain(&uniform.z)
            .all(|&v| v == 2.5));
        // Positivity is enforced.
        let mut bad = Field::constant(&g, 1.0);
        bad[0] = 0.0;
        assert!(face_conductivity(&g, &bad).is_err());
    }

    /// Discrete divergence theorem with dyadic-rational fluxes: the sum of
    /// per-cell net outfluxes equals the boundary flux sum exactly (all
    /// quantities representable, cancellation is exact in f64).
    #[test]
    fn discrete_divergence_theorem_exact() {
        let g = unit_cube(4);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut flux = FaceValues::zeros(&g);
        let dy = |rng: &mut ChaCha8Rng| (rng.random_range(-1024i32..=1024) as f64) / 1024.0;
        for v in flux
            .x
            .iter_mut()
            .chain(flux.y.iter_mut())
            .chain(flux.z.iter_mut())
        {
            *v = dy(&mut rng);
        }
        // Net outflux per cell, then total.
        let mut total = 0.0;
        for k in 0..g.nz {
            for j in 0..g.ny {
                for i in 0..g.nx {
                    let net = flux.x[flux.xi(&g, i + 1, j, k)] - flux.x[flux.xi(&g, i, j, k)]
                        + flux.y[flux.yi(&g, i, j + 1, k)]
                        - flux.y[flux.yi(&g, i, j, k)]
                        + flux.z[flux.zi(&g, i, j, k + 1)]
                        - flux.z[flux.zi(&g, i, j, k)];
                    total += net;
                }
            }
        }
        let mut boundary = 0.0;
        for k in 0..g.nz {
            for j in 0..g.ny {
                boundary += flux.x[flux.xi(&g, g.nx, j, k)] - flux.x[flux.xi(&g, 0, j, k)];
            }
        }
        for k in 0..g.nz {
            for i in 0..g.nx {
                boundary += flux.y[flux.yi(&g, i, g.ny, k)] - flux.y[flux.yi(&g, i, 0, k)];
            }
        }
        for j in 0..g.ny {
            for i in 0..g.nx {
                boundary += flux.z[flux.zi(&g, i, j, g.nz)] - flux.z[flux.zi(&g, i, j, 0)];
            }
        }
        assert_eq!(total, boundary);
    }

    /// Midpoint-rule volume integration converges at order 2 on a smooth field.
    #[test]
    fn integrate_volume_second_order() {
        let exact = {
            // ∫ over the unit cube of sin(πx) sin(πy) sin(πz) = (2/π)³
            let c = 2.0 / std::f64::consts::PI;
            c * c * c
        };
        let f = |x: f64, y: f64, z: f64| {
            (std::f64::consts::PI * x).sin()
                * (std::f64::consts::PI * y).sin()
                * (std::f64::consts::PI * z).sin()
        };
        let mut errs = Vec::new();
        for n in [4, 8, 16] {
            let g = unit_cube(n);
            let fld = Field::from_fn(&g, f);
            errs.push((integrate_volume(&g, &fld) - exact).abs());
        }
        let order1 = (errs[0] / errs[1]).log2();
        let order2 = (errs[1] / errs[2]).log2();
        println!("volume integration orders: {order1:.3}, {order2:.3}");
        assert!(order1 > 1.8 && order1 < 2.2, "order {order1}");
        assert!(order2 > 1.8 && order2 < 2.2, "order {order2}");
    }

    #[test]
    fn field_check_catches_size_and_nan() {
        let g = unit_cube(2);
        assert!(Field(vec![0.0; 7]).check(&g).is_err());
        let mut f = Field::constant(&g, 1.0);
        f[3] = f64::NAN;
        assert!(matches!(
            f.check(&g),
            Err(GridError::NonFiniteEntry { index: 3 })
        ));
        assert!(Field::constant(&g, 1.0).check(&g).is_ok());
    }
}
