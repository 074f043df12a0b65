//! Running covariance accumulators and the adaptive proposal scaling rule.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::gaussian::Gaussian;
use crate::model::check_dim;

/// Optimal random-walk scale `2.38² / d`.
pub fn optimal_scale(d: usize) -> f64 {
    2.38 * 2.38 / d as f64
}

pub const DEFAULT_JITTER: f64 = 1e-6;

/// Sample mean and covariance (divisor `count - 1`) updated one point at a time.
#[derive(Debug, Clone, PartialEq)]
pub struct RunningCovariance {
    count: usize,
    mean: DVector<f64>,
    // sum of outer products of deviations from the running mean
    scatter: DMatrix<f64>,
}

impl RunningCovariance {
    pub fn new(d: usize) -> Self {
        RunningCovariance {
            count: 0,
            mean: DVector::zeros(d),
            scatter: DMatrix::zeros(d, d),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn update(&mut self, x: &DVector<f64>) -> Result<()> {
        check_dim(self.dim(), x.len())?;
        self.count += 1;
        let delta = x - &self.mean;
        self.mean += &delta / self.count as f64;
        let after = x - &self.mean;
        self.scatter += &delta * after.transpose();
        Ok(())
    }

    /// Sample covariance; the zero matrix until two points are absorbed.
    pub fn covariance(&self) -> DMatrix<f64> {
        if self.count < 2 {
            return DMatrix::zeros(self.dim(), self.dim());
        }
        let mut cov = &self.scatter / (self.count - 1) as f64;
        // the rank-one updates are symmetric only up to rounding
        cov = (&cov + cov.transpose()) * 0.5;
        cov
    }
}

/// Two-pass sample covariance with divisor `len - 1`.
pub fn batch_covariance(points: &[DVector<f64>]) -> Result<DMatrix<f64>> {
    if points.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: points.len(),
        });
    }
    let d = points[0].len();
    for p in points {
        check_dim(d, p.len())?;
    }
    let n = points.len() as f64;
    let mean = points.iter().fold(DVector::zeros(d), |acc, p| acc + p) / n;
    let mut cov = DMatrix::zeros(d, d);
    for p in points {
        let dev = p - &mean;
        cov += &dev * dev.transpose();
    }
    Ok(cov / (n - 1.0))
}

/// `(2.38²/d)·cov + jitter·I` in factorized form. The jitter grows tenfold on
/// each failed factorization, up to three retries.
pub fn scale_proposal(cov: &DMatrix<f64>, d: usize, jitter: f64) -> Result<Gaussian> {
    let base = cov * optimal_scale(d);
    let mut eps = jitter;
    for _ in 0..4 {
        let m = &base + DMatrix::identity(cov.nrows(), cov.ncols()) * eps;
        if let Ok(g) = Gaussian::new(m) {
            return Ok(g);
        }
        eps *= 10.0;
    }
    Err(Error::DegenerateCovariance)
}

/// True when `cov` from `count` particles supports an adaptive proposal:
/// at least `d + 1` points and a covariance that factorizes without jitter.
pub fn is_usable(cov: &DMatrix<f64>, count: usize) -> bool {
    count > cov.nrows() && cov.iter().all(|v| v.is_finite()) && cov.clone().cholesky().is_some()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(x)
    }

    #[test]
    fn small_counts() {
        let mut acc = RunningCovariance::new(2);
        acc.update(&v(&[1.0, 2.0])).unwrap();
        assert_eq!(acc.mean(), &v(&[1.0, 2.0]));
        assert_eq!(acc.covariance(), DMatrix::zeros(2, 2));

        let (x, y) = (v(&[1.0, 2.0]), v(&[3.0, -1.0]));
        let mut acc = RunningCovariance::new(2);
        acc.update(&x).unwrap();
        acc.update(&y).unwrap();
        let m = (&x + &y) / 2.0;
        let want = (&x - &m) * (&x - &m).transpose() + (&y - &m) * (&y - &m).transpose();
        assert!((acc.covariance() - want).abs().max() < 1e-14);
        assert!(acc.update(&v(&[1.0])).is_err());
    }

    #[test]
    fn batch_covariance_cases() {
        let same = vec![v(&[1.0, 1.0]); 4];
        assert_eq!(batch_covariance(&same).unwrap(), DMatrix::zeros(2, 2));
        let axis = vec![v(&[1.0, 0.0]), v(&[-1.0, 0.0]), v(&[0.0, 2.0]), v(&[0.0, -2.0])];
        let c = batch_covariance(&axis).unwrap();
        assert_eq!(c[(0, 1)], 0.0);
        assert_eq!(c[(1, 0)], 0.0);
        assert!(batch_covariance(&[v(&[1.0])]).is_err());
    }

    #[test]
    fn batch_matches_textbook_two_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts: Vec<_> = (0..200)
            .map(|_| v(&[rng.random(), rng.random::<f64>() * 3.0, rng.random()]))
            .collect();
        let n = pts.len() as f64;
        let c = batch_covariance(&pts).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                let ma: f64 = pts.iter().map(|p| p[a]).sum::<f64>() / n;
                let mb: f64 = pts.iter().map(|p| p[b]).sum::<f64>() / n;
                let s: f64 = pts.iter().map(|p| (p[a] - ma) * (p[b] - mb)).sum::<f64>() / (n - 1.0);
                assert!((c[(a, b)] - s).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn recursive_equals_batch_on_500_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts: Vec<_> = (0..500)
            .map(|_| {
                v(&[
                    rng.random::<f64>() * 10.0 - 3.0,
                    rng.random(),
                    rng.random::<f64>() - 40.0,
                ])
            })
            .collect();
        let mut acc = RunningCovariance::new(3);
        for p in &pts {
            acc.update(p).unwrap();
        }
        assert!((acc.covariance() - batch_covariance(&pts).unwrap()).abs().max() < 1e-10);
    }

    #[test]
    fn scaling_rule() {
        let g = scale_proposal(&DMatrix::identity(1, 1), 1, 1e-6).unwrap();
        assert!((g.covariance()[(0, 0)] - (5.6644 + 1e-6)).abs() < 1e-12);
        let z = scale_proposal(&DMatrix::zeros(3, 3), 3, 1e-6).unwrap();
        assert!((z.covariance() - DMatrix::identity(3, 3) * 1e-6).abs().max() < 1e-18);
        let rank1 = v(&[1.0, 2.0, -1.0]) * v(&[1.0, 2.0, -1.0]).transpose();
        assert!(scale_proposal(&rank1, 3, 1e-6).is_ok());
        let hopeless = DMatrix::from_row_slice(2, 2, &[-1.0, 0.0, 0.0, 1.0]);
        assert!(matches!(
            scale_proposal(&hopeless, 2, 1e-6),
            Err(Error::DegenerateCovariance)
        ));
    }

    #[test]
    fn usability() {
        assert!(!is_usable(&DMatrix::zeros(2, 2), 10));
        assert!(!is_usable(&DMatrix::identity(2, 2), 2));
        assert!(is_usable(&DMatrix::identity(2, 2), 3));
    }

    proptest! {
        #[test]
        fn recursion_is_order_free(seed in any::<u64>(), n in 2usize..60) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut pts: Vec<_> = (0..n).map(|_| v(&[rng.random::<f64>() * 5.0, rng.random::<f64>() - 0.5])).collect();
            let batch = batch_covariance(&pts).unwrap();
            use rand::seq::SliceRandom;
            pts.shuffle(&mut rng);
            let mut acc = RunningCovariance::new(2);
            for p in &pts { acc.update(p).unwrap(); }
            prop_assert!((acc.covariance() - batch).abs().max() < 1e-10);
        }

        #[test]
        fn scaled_output_is_pd(seed in any::<u64>(), rank in 0usize..4) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut cov = DMatrix::zeros(3, 3);
            for _ in 0..rank {
                let u = v(&[rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5]);
                cov += &u * u.transpose();
            }
            let g = scale_proposal(&cov, 3, DEFAULT_JITTER).unwrap();
            let m = g.covariance();
            prop_assert!((m - m.transpose()).abs().max() < 1e-14);
            prop_assert!(m.clone().cholesky().is_some());
        }
    }
}
