//! Dense symmetric positive definite solves for kernel matrices.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

/// Kernel matrices with a larger condition estimate are rejected.
pub const CONDITION_LIMIT: f64 = 1e16;

/// Largest order for which the condition number is computed from a full eigen-decomposition.
const EXACT_CONDITION_MAX_ORDER: usize = 500;

const REFINEMENT_STEPS: usize = 4;

/// Dot product accumulated in twice the working precision (error-free
/// products and sums), then rounded once.
pub(crate) fn dot2(pairs: impl IntoIterator<Item = (f64, f64)>) -> f64 {
    let (mut sum, mut err) = (0.0f64, 0.0f64);
    for (a, b) in pairs {
        let p = a * b;
        let ep = a.mul_add(b, -p);
        let t = sum + p;
        let z = t - sum;
        err += ep + ((sum - (t - z)) + (p - z));
        sum = t;
    }
    sum + err
}

/// `f - K c` with compensated row sums.
pub(crate) fn residual2(k: &DMatrix<f64>, c: &DVector<f64>, f: &DVector<f64>) -> DVector<f64> {
    DVector::from_iterator(
        f.len(),
        (0..f.len()).map(|i| dot2(std::iter::once((f[i], 1.0)).chain(k.row(i).iter().zip(c.iter()).map(|(a, b)| (*a, -*b))))),
    )
}

/// Factorization of a symmetric positive definite matrix.
pub(crate) enum SpdFactor {
    Cholesky(Cholesky<f64, Dyn>),
    /// Fallback when Cholesky breaks down on a matrix that is still numerically positive definite.
    Eigen(SymmetricEigen<f64, Dyn>),
}

impl SpdFactor {
    pub(crate) fn new(k: &DMatrix<f64>) -> Result<Self> {
        if let Some(ch) = Cholesky::new(k.clone()) {
            return Ok(SpdFactor::Cholesky(ch));
        }
        let eig = SymmetricEigen::new(k.clone());
        let (lo, hi) = extremes(eig.eigenvalues.as_slice());
        let estimate = if lo > 0.0 { hi / lo } else { f64::INFINITY };
        if estimate > CONDITION_LIMIT {
            return Err(Error::IllConditioned { estimate });
        }
        Ok(SpdFactor::Eigen(eig))
    }

    pub(crate) fn solve(&self, b: &DVector<f64>) -> DVector<f64> {
        match self {
            SpdFactor::Cholesky(ch) => ch.solve(b),
            SpdFactor::Eigen(eig) => {
                let mut y = eig.eigenvectors.tr_mul(b);
                y.component_div_assign(&eig.eigenvalues);
                &eig.eigenvectors * y
            }
        }
    }

    /// Solve followed by iterative refinement with compensated residuals.
    pub(crate) fn solve_refined(&self, k: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
        let mut x = self.solve(b);
        let mut last = f64::INFINITY;
        for _ in 0..REFINEMENT_STEPS {
            let r = residual2(k, &x, b);
            let size = r.amax();
            if !(size < last) || size == 0.0 {
                break;
            }
            last = size;
            x += self.solve(&r);
        }
        x
    }

    /// Diagonal of the inverse matrix.
    pub(crate) fn inverse_diagonal(&self) -> DVector<f64> {
        match self {
            SpdFactor::Cholesky(ch) => {
                // K^{-1} = L^{-T} L^{-1}, so diag_i is the squared norm of column i of L^{-1}.
                let n = ch.l_dirty().nrows();
                let mut inv = DMatrix::<f64>::identity(n, n);
                ch.l_dirty().solve_lower_triangular_mut(&mut inv);
                DVector::from_iterator(n, (0..n).map(|i| inv.column(i).rows(i, n - i).norm_squared()))
            }
            SpdFactor::Eigen(eig) => {
                let v = &eig.eigenvectors;
                DVector::from_iterator(
                    v.nrows(),
                    (0..v.nrows()).map(|i| v.row(i).iter().zip(eig.eigenvalues.iter()).map(|(q, l)| q * q / l).sum()),
                )
            }
        }
    }

    /// Lower bound on the condition number from the Cholesky pivots.
    pub(crate) fn pivot_condition_bound(&self) -> f64 {
        match self {
            SpdFactor::Cholesky(ch) => {
                let d = ch.l_dirty().diagonal();
                let (lo, hi) = extremes(d.as_slice());
                (hi / lo).powi(2)
            }
            SpdFactor::Eigen(eig) => {
                let (lo, hi) = extremes(eig.eigenvalues.as_slice());
                hi / lo
            }
        }
    }
}

fn extremes(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

/// `lambda_max / lambda_min` of a symmetric matrix; infinite when it is not positive definite.
///
/// Exact up to order 500, power and inverse iteration above.
pub fn condition_estimate(k: &DMatrix<f64>) -> f64 {
    if k.nrows() <= EXACT_CONDITION_MAX_ORDER {
        let (lo, hi) = extremes(k.symmetric_eigenvalues().as_slice());
        return if lo > 0.0 { hi / lo } else { f64::INFINITY };
    }
    let Ok(factor) = SpdFactor::new(k) else {
        return f64::INFINITY;
    };
    let hi = power_iteration(|x| k * x, k.nrows());
    let lo_inv = power_iteration(|x| factor.solve(x), k.nrows());
    if lo_inv > 0.0 {
        hi * lo_inv
    } else {
        f64::INFINITY
    }
}

/// Dominant eigenvalue magnitude of a symmetric operator.
pub(crate) fn power_iteration(apply: impl Fn(&DVector<f64>) -> DVector<f64>, n: usize) -> f64 {
    let mut x = DVector::from_fn(n, |i, _| 1.0 + 0.5 * ((i as f64) * 0.618_033_988_75).sin());
    x.normalize_mut();
    let mut lambda = 0.0;
    for _ in 0..500 {
        let y = apply(&x);
        let next = y.norm();
        if next == 0.0 {
            return 0.0;
        }
        x = y / next;
        if (next - lambda).abs() <= 1e-12 * next {
            return next;
        }
        lambda = next;
    }
    lambda
}
