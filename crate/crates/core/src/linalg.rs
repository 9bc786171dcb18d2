//! Jacobi-preconditioned conjugate gradients, shared by the potential solve
//! and the Newton linearizations of the heat step. Fixed summation order,
//! so results are bit-stable for given inputs.

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += a[i] * b[i];
    }
    s
}

pub(crate) enum CgOutcome {
    Converged { residual: f64 },
    Stalled { residual: f64, iterations: usize },
}

/// Solve A x = b for SPD A given through `apply`; `x` holds the initial
/// guess on entry and the solution on exit. Residuals are measured in the
/// Euclidean norm relative to ‖b‖₂.
pub(crate) fn pcg<F: FnMut(&[f64], &mut [f64])>(
    mut apply: F,
    b: &[f64],
    diag: &[f64],
    x: &mut [f64],
    rel_tol: f64,
    max_iter: usize,
) -> CgOutcome {
    let n = b.len();
    let b_norm = dot(b, b).sqrt();
    if b_norm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return CgOutcome::Converged { residual: 0.0 };
    }
    let mut r = vec![0.0; n];
    let mut ax = vec![0.0; n];
    apply(x, &mut ax);
    for i in 0..n {
        r[i] = b[i] - ax[i];
    }
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(ri, di)| ri / di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut res = dot(&r, &r).sqrt();
    let target = rel_tol * b_norm;
    let mut iterations = 0;
    while res > target {
        if iterations >= max_iter {
            return CgOutcome::Stalled {
                residual: res / b_norm,
                iterations,
            };
        }
        apply(&p, &mut ax);
        let pap = dot(&p, &ax);
        if !(pap > 0.0) {
            // Loss of positivity from rounding at the bottom of convergence.
            return CgOutcome::Stalled {
                residual: res / b_norm,
                iterations,
            };
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ax[i];
        }
        res = dot(&r, &r).sqrt();
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        iterations += 1;
    }
    CgOutcome::Converged {
        residual: res / b_norm,
    }
}
