use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, thiserror::Error)]
pub enum RegressionError {
    #[error("covariance of dimension {0} is not positive definite")]
    NotPositiveDefinite(usize),
}

/// Ridge regression with running Gram matrix `Σ = λI + Σ xxᵀ` and moment
/// vector `b = Σ y x`. The estimate and `Σ⁻¹` are refreshed on demand.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ridge {
    dim: usize,
    lambda: f64,
    sigma: Vec<f64>,
    b: Vec<f64>,
    theta: Vec<f64>,
    inv: Vec<f64>,
    samples: u64,
}

impl Ridge {
    pub fn new(dim: usize, lambda: f64) -> Self {
        let mut sigma = vec![0.0; dim * dim];
        let mut inv = vec![0.0; dim * dim];
        for i in 0..dim {
            sigma[i * dim + i] = lambda;
            inv[i * dim + i] = 1.0 / lambda;
        }
        Ridge { dim, lambda, sigma, b: vec![0.0; dim], theta: vec![0.0; dim], inv, samples: 0 }
    }

    pub fn push(&mut self, x: &[f64], y: f64) {
        let n = self.dim;
        for i in 0..n {
            if x[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                self.sigma[i * n + j] += x[i] * x[j];
            }
            self.b[i] += y * x[i];
        }
        self.samples += 1;
    }

    /// Solve for `θ = Σ⁻¹ b` and refresh `Σ⁻¹` through a Cholesky factor.
    pub fn refresh(&mut self) -> Result<(), RegressionError> {
        let n = self.dim;
        let mut m = DMatrix::from_row_slice(n, n, &self.sigma);
        let chol = match m.clone().cholesky() {
            Some(c) => c,
            None => {
                // round-off can break exact symmetry; retry on the symmetric part
                m = (&m + m.transpose()) * 0.5;
                m.cholesky().ok_or(RegressionError::NotPositiveDefinite(n))?
            }
        };
        let theta = chol.solve(&DVector::from_column_slice(&self.b));
        self.theta = theta.iter().copied().collect();
        let inv = chol.inverse();
        for i in 0..n {
            for j in 0..n {
                self.inv[i * n + j] = inv[(i, j)];
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn samples(&self) -> u64 {
        self.samples
    }

    /// Row-major `Σ`.
    pub fn sigma(&self) -> &[f64] {
        &self.sigma
    }

    pub fn moment(&self) -> &[f64] {
        &self.b
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    /// Row-major `Σ⁻¹` as of the last refresh.
    pub fn inverse(&self) -> &[f64] {
        &self.inv
    }

    /// `‖Σ^{1/2}(θ - other)‖₂`
    pub fn sigma_distance(&self, other: &[f64]) -> f64 {
        let n = self.dim;
        let d: Vec<f64> = self.theta.iter().zip(other).map(|(a, b)| a - b).collect();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += d[i] * self.sigma[i * n + j] * d[j];
            }
        }
        acc.max(0.0).sqrt()
    }

    /// Smallest eigenvalue of `Σ`.
    pub fn min_eigenvalue(&self) -> f64 {
        let m = DMatrix::from_row_slice(self.dim, self.dim, &self.sigma);
        let sym = (&m + m.transpose()) * 0.5;
        sym.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// Value-targeted and error-targeted regressions of one goal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalRegressors {
    pub value: Ridge,
    pub error: Ridge,
}

impl GoalRegressors {
    pub fn new(dim: usize, lambda: f64) -> Self {
        GoalRegressors { value: Ridge::new(dim, lambda), error: Ridge::new(dim, lambda) }
    }

    pub fn refresh(&mut self) -> Result<(), RegressionError> {
        self.value.refresh()?;
        self.error.refresh()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::RngStream;

    #[test]
    fn zero_targets_keep_theta_zero() {
        let mut r = Ridge::new(3, 0.25);
        r.push(&[0.3, 0.1, 0.0], 0.0);
        r.push(&[0.0, 0.5, 0.2], 0.0);
        r.refresh().unwrap();
        assert!(r.theta().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn sequential_matches_batch_solve() {
        let mut rng = RngStream::new(9, 0);
        let dim = 3;
        let mut r = Ridge::new(dim, 0.1);
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for _ in 0..200 {
            let x: Vec<f64> = (0..dim).map(|_| rng.uniform() - 0.3).collect();
            let y = rng.uniform() * 4.0;
            r.push(&x, y);
            xs.push(x);
            ys.push(y);
        }
        r.refresh().unwrap();
        let mut a = DMatrix::<f64>::identity(dim, dim) * 0.1;
        let mut b = DVector::<f64>::zeros(dim);
        for (x, y) in xs.iter().zip(&ys) {
            let v = DVector::from_column_slice(x);
            a += &v * v.transpose();
            b += v * *y;
        }
        let batch = a.lu().solve(&b).unwrap();
        for i in 0..dim {
            assert!((r.theta()[i] - batch[i]).abs() <= 1e-8 * batch[i].abs().max(1e-12));
        }
    }

    #[test]
    fn noiseless_targets_are_recovered() {
        let truth = [0.4, -1.2, 2.0];
        let mut r = Ridge::new(3, 1e-9);
        let mut rng = RngStream::new(2, 0);
        for _ in 0..500 {
            let x: Vec<f64> = (0..3).map(|_| rng.uniform()).collect();
            let y: f64 = x.iter().zip(&truth).map(|(a, b)| a * b).sum();
            r.push(&x, y);
        }
        r.refresh().unwrap();
        let mut worst: f64 = 0.0;
        for _ in 0..50 {
            let x: Vec<f64> = (0..3).map(|_| rng.uniform()).collect();
            let y: f64 = x.iter().zip(&truth).map(|(a, b)| a * b).sum();
            let fit: f64 = x.iter().zip(r.theta()).map(|(a, b)| a * b).sum();
            worst = worst.max((fit - y).abs());
        }
        assert!(worst < 1e-6, "{worst}");
        assert!(r.min_eigenvalue() >= 1e-9 - 1e-10);
    }
}
