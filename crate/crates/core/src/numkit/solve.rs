use super::{Matrix, NumError};

/// Pivots below this fraction of the trace are treated as singular.
pub const PIVOT_REL_TOL: f64 = 1e-14;

/// Solves `(a + ridge·I) x = b` for symmetric positive semidefinite `a`.
///
/// Cholesky factorization followed by one round of iterative refinement
/// against the ridged system. `b` may hold several right-hand sides as
/// columns.
pub fn solve_spd(a: &Matrix, b: &Matrix, ridge: f64) -> Result<Matrix, NumError> {
    if !a.is_square() {
        return Err(NumError::NonSquare {
            rows: a.rows(),
            cols: a.cols(),
        });
    }
    if b.rows() != a.rows() {
        return Err(NumError::ShapeMismatch {
            expected: (a.rows(), b.cols()),
            found: b.shape(),
        });
    }
    if !(ridge >= 0.0) || !ridge.is_finite() {
        return Err(NumError::InvalidRidge(ridge));
    }
    if !a.is_finite() || !b.is_finite() {
        return Err(NumError::NonFinite);
    }
    let asym = a.asymmetry();
    if asym > super::eig::SYMMETRY_TOL * a.max_abs().max(f64::MIN_POSITIVE) {
        return Err(NumError::NotSymmetric { asymmetry: asym });
    }

    let n = a.rows();
    let mut ridged = a.clone();
    for i in 0..n {
        ridged[(i, i)] += ridge;
    }
    let factor = cholesky(&ridged)?;
    let mut x = factor.solve(b);

    // r = b - (a + ridge I) x, then x += A⁻¹ r
    let ax = ridged.matmul(&x)?;
    let residual = b.sub(&ax)?;
    let dx = factor.solve(&residual);
    for (xi, di) in x.data_mut().iter_mut().zip(dx.data()) {
        *xi += di;
    }
    if !x.is_finite() {
        return Err(NumError::NonFinite);
    }
    Ok(x)
}

struct Cholesky {
    /// Lower triangle, row-major.
    l: Matrix,
}

fn cholesky(a: &Matrix) -> Result<Cholesky, NumError> {
    let n = a.rows();
    let trace = a.trace();
    let threshold = PIVOT_REL_TOL * trace.abs();
    let mut l = Matrix::zeros(n, n);
    for j in 0..n {
        let mut d = a[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > threshold) || d <= 0.0 {
            return Err(NumError::SingularSystem {
                index: j,
                pivot: d,
                trace,
            });
        }
        let d = d.sqrt();
        l[(j, j)] = d;
        for i in (j + 1)..n {
            let mut s = a[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / d;
        }
    }
    Ok(Cholesky { l })
}

impl Cholesky {
    fn solve(&self, b: &Matrix) -> Matrix {
        let n = self.l.rows();
        let m = b.cols();
        let l = &self.l;
        let mut y = b.clone();
        for c in 0..m {
            for i in 0..n {
                let mut s = y[(i, c)];
                for k in 0..i {
                    s -= l[(i, k)] * y[(k, c)];
                }
                y[(i, c)] = s / l[(i, i)];
            }
            for i in (0..n).rev() {
                let mut s = y[(i, c)];
                for k in (i + 1)..n {
                    s -= l[(k, i)] * y[(k, c)];
                }
                y[(i, c)] = s / l[(i, i)];
            }
        }
        y
    }
}
