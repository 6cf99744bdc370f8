use ndarray::{Array1, Array2, Axis};

use super::Params;
use crate::error::{Error, Result};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Per-feature batch normalization over the rows of a matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm {
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
}

/// Values saved by a train-mode forward pass for the backward pass.
#[derive(Debug, Clone)]
pub struct BnCache {
    x_hat: Array2<f64>,
    inv_std: Array1<f64>,
}

/// Batch statistics from a train-mode pass, applied separately so that
/// loss evaluation never mutates the model.
#[derive(Debug, Clone)]
pub struct BnStats {
    pub mean: Array1<f64>,
    pub var: Array1<f64>,
}

impl BatchNorm {
    pub fn new(dim: usize) -> Self {
        Self {
            gamma: Array1::ones(dim),
            beta: Array1::zeros(dim),
            running_mean: Array1::zeros(dim),
            running_var: Array1::ones(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.gamma.len()
    }

    fn check(&self, x: &Array2<f64>) -> Result<()> {
        if x.ncols() != self.dim() {
            return Err(Error::Shape {
                context: "batch norm features",
                expected: self.dim(),
                actual: x.ncols(),
            });
        }
        Ok(())
    }

    /// Normalize with batch statistics, returning output, cache and stats.
    pub fn forward_train(&self, x: &Array2<f64>) -> Result<(Array2<f64>, BnCache, BnStats)> {
        self.check(x)?;
        let n = x.nrows();
        if n < 2 {
            return Err(Error::BatchTooSmall(n));
        }
        let mean = x.mean_axis(Axis(0)).expect("non-empty");
        let centered = x - &mean;
        let var = centered.mapv(|v| v * v).mean_axis(Axis(0)).expect("non-empty");
        let inv_std = var.mapv(|v| 1.0 / (v + BN_EPS).sqrt());
        let x_hat = centered * &inv_std;
        let y = &x_hat * &self.gamma + &self.beta;
        Ok((y, BnCache { x_hat, inv_std }, BnStats { mean, var }))
    }

    pub fn forward_infer(&self, x: &Array2<f64>) -> Result<Array2<f64>> {
        self.check(x)?;
        let scale = &self.gamma / &self.running_var.mapv(|v| (v + BN_EPS).sqrt());
        let shift = &self.beta - &(&self.running_mean * &scale);
        Ok(x * &scale + &shift)
    }

    pub fn forward(&mut self, x: &Array2<f64>, mode: Mode) -> Result<Array2<f64>> {
        match mode {
            Mode::Infer => self.forward_infer(x),
            Mode::Train => {
                let (y, _, stats) = self.forward_train(x)?;
                self.update_running(&stats);
                Ok(y)
            }
        }
    }

    pub fn update_running(&mut self, stats: &BnStats) {
        self.running_mean = &self.running_mean * BN_MOMENTUM + &stats.mean * (1.0 - BN_MOMENTUM);
        self.running_var = &self.running_var * BN_MOMENTUM + &stats.var * (1.0 - BN_MOMENTUM);
    }

    /// Returns `dx`; accumulates `dgamma`/`dbeta` into `grads`.
    pub fn backward(&self, dy: &Array2<f64>, cache: &BnCache, grads: &mut BatchNorm) -> Array2<f64> {
        let n = dy.nrows() as f64;
        grads.gamma += &(dy * &cache.x_hat).sum_axis(Axis(0));
        grads.beta += &dy.sum_axis(Axis(0));
        let dx_hat = dy * &self.gamma;
        let sum_dx_hat = dx_hat.sum_axis(Axis(0));
        let sum_dx_hat_xhat = (&dx_hat * &cache.x_hat).sum_axis(Axis(0));
        let mut dx = dx_hat * n - &sum_dx_hat - &(&cache.x_hat * &sum_dx_hat_xhat);
        dx *= &(&cache.inv_std / n);
        dx
    }
}

impl Params for BatchNorm {
    fn params(&self) -> Vec<&[f64]> {
        vec![
            self.gamma.as_slice().expect("contiguous"),
            self.beta.as_slice().expect("contiguous"),
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.gamma.as_slice_mut().expect("contiguous"),
            self.beta.as_slice_mut().expect("contiguous"),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::gradient_check;
    use ndarray::Array;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn random(rows: usize, cols: usize, seed: u64, mean: f64, std: f64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let d = Normal::new(mean, std).unwrap();
        Array::from_shape_fn((rows, cols), |_| d.sample(&mut rng))
    }

    #[test]
    fn train_mode_standardizes() {
        let bn = BatchNorm::new(6);
        let x = random(50, 6, 1, 3.0, 7.0);
        let (y, _, _) = bn.forward_train(&x).unwrap();
        for col in y.columns() {
            let m = col.mean().unwrap();
            let v = col.mapv(|c| (c - m).powi(2)).mean().unwrap();
            assert!(m.abs() < 1e-6);
            assert!((v - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn standardized_input_is_fixed_point() {
        let bn = BatchNorm::new(3);
        let raw = random(200, 3, 2, 0.0, 1.0);
        let (x, _, _) = bn.forward_train(&raw).unwrap();
        let (y, _, _) = bn.forward_train(&x).unwrap();
        assert!((&y - &x).iter().all(|d| d.abs() < 1e-4));
    }

    #[test]
    fn single_row_rejected_in_train_mode() {
        let bn = BatchNorm::new(2);
        assert!(matches!(
            bn.forward_train(&Array2::zeros((1, 2))),
            Err(Error::BatchTooSmall(1))
        ));
        assert!(bn.forward_infer(&Array2::zeros((1, 2))).is_ok());
    }

    #[test]
    fn running_stats_follow_momentum() {
        let mut bn = BatchNorm::new(1);
        let x = Array2::from_shape_vec((2, 1), vec![1.0, 3.0]).unwrap();
        bn.forward(&x, Mode::Train).unwrap();
        assert!((bn.running_mean[0] - 0.2).abs() < 1e-15);
        assert!((bn.running_var[0] - (0.9 + 0.1 * 1.0)).abs() < 1e-15);
        let a = bn.forward_infer(&x).unwrap();
        let b = bn.forward_infer(&x).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut bn = BatchNorm::new(4);
        bn.gamma = Array1::from(vec![0.5, 1.5, -0.7, 1.0]);
        bn.beta = Array1::from(vec![0.1, -0.2, 0.3, 0.0]);
        let x = random(7, 4, 3, 0.5, 2.0);
        let w = random(7, 4, 4, 0.0, 1.0);
        let loss = |m: &BatchNorm| (m.forward_train(&x).unwrap().0 * &w).sum();
        let (_, cache, _) = bn.forward_train(&x).unwrap();
        let mut grads = BatchNorm::new(4);
        grads.zero();
        let dx = bn.backward(&w, &cache, &mut grads);
        assert!(gradient_check(&bn, &grads, loss, 1e-4).passed);

        let h = 1e-5;
        for (r, c) in [(0, 0), (3, 2), (6, 3)] {
            let mut xp = x.clone();
            xp[[r, c]] += h;
            let mut xm = x.clone();
            xm[[r, c]] -= h;
            let f = |x: &Array2<f64>| (bn.forward_train(x).unwrap().0 * &w).sum();
            let numeric = (f(&xp) - f(&xm)) / (2.0 * h);
            assert!((numeric - dx[[r, c]]).abs() < 1e-7 * (1.0 + numeric.abs()));
        }
    }
}
