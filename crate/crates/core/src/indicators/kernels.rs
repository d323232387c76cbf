use crate::netgen::CompiledNet;
use crate::numkit::{solve_spd, sym_eig, Matrix, NumError};

use super::{IndicatorError, MseNorm};

/// Relative eigenvalue floor below which the kernel counts as rank deficient.
pub const LAMBDA_MIN_REL: f64 = 1e-12;

/// λmax / λmin of a symmetric PSD kernel. Returns `(cap, true)` when
/// λmin ≤ 1e-12·λmax.
pub fn condition_number(theta: &Matrix, cap: f64) -> Result<(f64, bool), IndicatorError> {
    let eig = sym_eig(theta)?;
    let (max, min) = (eig.max(), eig.min());
    if !(max > 0.0) {
        return Err(IndicatorError::DegenerateKernel(max));
    }
    if min <= LAMBDA_MIN_REL * max {
        return Ok((cap, true));
    }
    Ok(((max / min).min(cap), false))
}

/// Condition number of the empirical NTK `J·Jᵀ` on `x`.
pub fn ntk_condition(
    net: &CompiledNet,
    x: &Matrix,
    cap: f64,
) -> Result<(f64, bool), IndicatorError> {
    let j = net.jacobian(x)?;
    condition_number(&j.gram(), cap)
}

/// Number of distinct activation patterns over the rows of `x`.
pub fn count_regions(net: &CompiledNet, x: &Matrix) -> Result<usize, IndicatorError> {
    Ok(net.forward(x)?.1.unique_count())
}

/// Kernel regression with the last-layer NTK. The classifier bias adds a
/// constant 1 to every kernel entry. Returns the mean per-sample error.
pub fn kernel_regression_error(
    f_train: &Matrix,
    y_train: &Matrix,
    f_test: &Matrix,
    y_test: &Matrix,
    ridge_rel: f64,
    norm: MseNorm,
) -> Result<f64, IndicatorError> {
    let b = f_train.rows();
    let mut g = f_train.gram();
    g.data_mut().iter_mut().for_each(|v| *v += 1.0);
    let ridge = ridge_rel * g.trace() / b as f64;
    let alpha = solve_spd(&g, y_train, ridge)?;
    let mut k = f_test.mul_transpose(f_train)?;
    k.data_mut().iter_mut().for_each(|v| *v += 1.0);
    let pred = k.matmul(&alpha)?;
    let diff = pred.sub(y_test)?;
    let total: f64 = (0..diff.rows())
        .map(|i| {
            let sq: f64 = diff.row(i).iter().map(|d| d * d).sum();
            match norm {
                MseNorm::L2 => sq.sqrt(),
                MseNorm::Squared => sq,
            }
        })
        .sum();
    let mse = total / diff.rows() as f64;
    if !mse.is_finite() {
        return Err(IndicatorError::Num(NumError::NonFinite));
    }
    Ok(mse)
}
