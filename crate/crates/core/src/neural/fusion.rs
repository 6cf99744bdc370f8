use ndarray::{Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::math::{sigmoid, PROB_EPS};
use super::Params;
use crate::error::{Error, Result};

/// Two dense layers: `tanh` hidden layer, then a sigmoid scalar output.
#[derive(Debug, Clone, PartialEq)]
pub struct FusionDnn {
    /// `Hd x D`.
    pub w1: Array2<f64>,
    pub b1: Array1<f64>,
    /// Output weights, length `Hd`.
    pub w2: Array1<f64>,
    /// Output bias, length 1.
    pub b2: Array1<f64>,
}

pub struct FusionCache {
    input: Array2<f64>,
    hidden: Array2<f64>,
    out: Array1<f64>,
    targets: Array1<f64>,
}

impl FusionDnn {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        Self {
            w1: Array2::zeros((hidden, input_dim)),
            b1: Array1::zeros(hidden),
            w2: Array1::zeros(hidden),
            b2: Array1::zeros(1),
        }
    }

    pub fn new(input_dim: usize, hidden: usize, seed: u64) -> Result<Self> {
        if input_dim == 0 || hidden == 0 {
            return Err(Error::param("fusion", "dimensions must be positive"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dnn = Self::zeros(input_dim, hidden);
        let b1 = 1.0 / (input_dim as f64).sqrt();
        let b2 = 1.0 / (hidden as f64).sqrt();
        dnn.w1.mapv_inplace(|_| rng.random_range(-b1..b1));
        dnn.w2.mapv_inplace(|_| rng.random_range(-b2..b2));
        Ok(dnn)
    }

    pub fn input_dim(&self) -> usize {
        self.w1.ncols()
    }

    fn check(&self, cols: usize) -> Result<()> {
        if cols != self.input_dim() {
            return Err(Error::Shape {
                context: "fusion input",
                expected: self.input_dim(),
                actual: cols,
            });
        }
        Ok(())
    }

    /// Drowsiness probability for each row of `x`.
    pub fn forward_batch(&self, x: &Array2<f64>) -> Result<Array1<f64>> {
        self.check(x.ncols())?;
        let hidden = (x.dot(&self.w1.t()) + &self.b1).mapv(f64::tanh);
        Ok((hidden.dot(&self.w2) + self.b2[0]).mapv(sigmoid))
    }

    pub fn forward(&self, d: &[f64]) -> Result<f64> {
        self.check(d.len())?;
        let hidden = (self.w1.dot(&ndarray::aview1(d)) + &self.b1).mapv(f64::tanh);
        Ok(sigmoid(hidden.dot(&self.w2) + self.b2[0]))
    }

    /// Mean binary cross-entropy of `x` against 0/1 targets.
    pub fn forward_train(&self, x: &Array2<f64>, targets: &[f64]) -> Result<(f64, FusionCache)> {
        self.check(x.ncols())?;
        if targets.len() != x.nrows() || targets.is_empty() {
            return Err(Error::Shape {
                context: "fusion targets",
                expected: x.nrows(),
                actual: targets.len(),
            });
        }
        let hidden = (x.dot(&self.w1.t()) + &self.b1).mapv(f64::tanh);
        let out = (hidden.dot(&self.w2) + self.b2[0]).mapv(sigmoid);
        let loss = out
            .iter()
            .zip(targets)
            .map(|(&r, &y)| -(y * r.max(PROB_EPS).ln() + (1.0 - y) * (1.0 - r).max(PROB_EPS).ln()))
            .sum::<f64>()
            / targets.len() as f64;
        Ok((
            loss,
            FusionCache {
                input: x.clone(),
                hidden,
                out,
                targets: Array1::from(targets.to_vec()),
            },
        ))
    }

    pub fn backward(&self, cache: &FusionCache, grads: &mut FusionDnn) {
        let n = cache.out.len() as f64;
        let d_out = (&cache.out - &cache.targets) / n;
        grads.w2 += &cache.hidden.t().dot(&d_out);
        grads.b2[0] += d_out.sum();
        let mut d_hidden = d_out.insert_axis(Axis(1)).dot(&self.w2.view().insert_axis(Axis(0)));
        d_hidden.zip_mut_with(&cache.hidden, |d, h| *d *= 1.0 - h * h);
        grads.w1 += &d_hidden.t().dot(&cache.input);
        grads.b1 += &d_hidden.sum_axis(Axis(0));
    }

    pub fn loss(&self, x: &Array2<f64>, targets: &[f64]) -> Result<f64> {
        Ok(self.forward_train(x, targets)?.0)
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.input_dim(), self.b1.len())
    }
}

impl Params for FusionDnn {
    fn params(&self) -> Vec<&[f64]> {
        vec![
            self.w1.as_slice().expect("contiguous"),
            self.b1.as_slice().expect("contiguous"),
            self.w2.as_slice().expect("contiguous"),
            self.b2.as_slice().expect("contiguous"),
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.w1.as_slice_mut().expect("contiguous"),
            self.b1.as_slice_mut().expect("contiguous"),
            self.w2.as_slice_mut().expect("contiguous"),
            self.b2.as_slice_mut().expect("contiguous"),
        ]
    }
}

/// `R` for the concatenation of the short- and long-horizon probabilities.
pub fn fuse(p_short: &[f64], p_long: &[f64], dnn: &FusionDnn) -> Result<f64> {
    let d: Vec<f64> = p_short.iter().chain(p_long).copied().collect();
    dnn.forward(&d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::gradient_check;
    use proptest::prelude::*;

    #[test]
    fn zero_weights_give_half() {
        let dnn = FusionDnn::zeros(5, 16);
        assert_eq!(fuse(&[0.2, 0.3, 0.5], &[0.9, 0.1], &dnn).unwrap(), 0.5);
        assert!(fuse(&[0.2, 0.8], &[0.9, 0.1], &dnn).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let dnn = FusionDnn::new(5, 6, 3).unwrap();
        let x = Array2::from_shape_fn((7, 5), |(r, c)| ((r * 3 + c * 5) % 9) as f64 / 9.0);
        let y: Vec<f64> = (0..7).map(|r| (r % 2) as f64).collect();
        let (_, cache) = dnn.forward_train(&x, &y).unwrap();
        let mut grads = dnn.zeros_like();
        dnn.backward(&cache, &mut grads);
        let report = gradient_check(&dnn, &grads, |m| m.loss(&x, &y).unwrap(), 1e-4);
        assert!(report.passed, "{report:?}");
    }

    #[test]
    fn batch_and_single_agree() {
        let dnn = FusionDnn::new(4, 8, 9).unwrap();
        let x = Array2::from_shape_fn((3, 4), |(r, c)| (r as f64 - c as f64) / 4.0);
        let batch = dnn.forward_batch(&x).unwrap();
        for (r, row) in x.rows().into_iter().enumerate() {
            assert!((dnn.forward(row.as_slice().unwrap()).unwrap() - batch[r]).abs() < 1e-15);
        }
    }

    proptest! {
        #[test]
        fn output_in_open_unit_interval(seed in 0u64..500, v in prop::collection::vec(0.0f64..1.0, 5)) {
            let dnn = FusionDnn::new(5, 16, seed).unwrap();
            let r = dnn.forward(&v).unwrap();
            prop_assert!(r > 0.0 && r < 1.0);
        }
    }
}
