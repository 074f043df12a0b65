//! Multivariate normal helpers on top of nalgebra's Cholesky factorization.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// Zero-mean Gaussian `N(0, cov)` kept in factorized form.
#[derive(Debug, Clone)]
pub struct Gaussian {
    cov: DMatrix<f64>,
    lower: DMatrix<f64>,
    log_norm: f64,
}

impl Gaussian {
    pub fn new(cov: DMatrix<f64>) -> Result<Self> {
        if !cov.is_square() || !is_symmetric(&cov, 1e-10) {
            return Err(Error::NotPositiveDefinite);
        }
        let chol = cov.clone().cholesky().ok_or(Error::NotPositiveDefinite)?;
        let lower = chol.l();
        let log_det: f64 = 2.0 * lower.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        if !log_det.is_finite() {
            return Err(Error::NotPositiveDefinite);
        }
        let d = cov.nrows() as f64;
        Ok(Gaussian {
            cov,
            lower,
            log_norm: -0.5 * (d * LN_2PI + log_det),
        })
    }

    pub fn isotropic(d: usize, variance: f64) -> Result<Self> {
        Gaussian::new(DMatrix::identity(d, d) * variance)
    }

    pub fn dim(&self) -> usize {
        self.cov.nrows()
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        &self.cov
    }

    /// Draws `L z` with `z` standard normal.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let z = DVector::from_fn(self.dim(), |_, _| rng.sample::<f64, _>(StandardNormal));
        &self.lower * z
    }

    /// Log density of the offset `x` (i.e. of `mean + x` under `N(mean, cov)`).
    pub fn log_density(&self, x: &DVector<f64>) -> f64 {
        let z = self
            .lower
            .solve_lower_triangular(x)
            .expect("cholesky factor has a positive diagonal");
        self.log_norm - 0.5 * z.norm_squared()
    }

    /// Same covariance scaled by `factor > 0`.
    pub fn scaled(&self, factor: f64) -> Gaussian {
        let d = self.dim() as f64;
        Gaussian {
            cov: &self.cov * factor,
            lower: &self.lower * factor.sqrt(),
            log_norm: self.log_norm - 0.5 * d * factor.ln(),
        }
    }
}

pub(crate) fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    let scale = m.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    (0..m.nrows()).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= tol * scale))
}

/// `log(exp(a) + exp(b))` without overflow.
pub(crate) fn log_add_exp(a: f64, b: f64) -> f64 {
    if a == f64::NEG_INFINITY {
        return b;
    }
    if b == f64::NEG_INFINITY {
        return a;
    }
    let m = a.max(b);
    m + ((a - m).exp() + (b - m).exp()).ln()
}

/// `ln(1 - e^x)` for `x <= 0`.
pub(crate) fn log1m_exp(x: f64) -> f64 {
    if x >= 0.0 {
        f64::NEG_INFINITY
    } else if x > -std::f64::consts::LN_2 {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}
