use ndarray::{s, Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::batchnorm::{BatchNorm, BnCache, BnStats};
use super::lstm::{LstmCache, LstmCell};
use super::math::{cross_entropy_indices, softmax_rows};
use super::Params;
use crate::error::{Error, Result};

/// Batch-normalized LSTM layers followed by a softmax head.
///
/// Normalization sits in front of every LSTM layer and in front of the head,
/// so a stack of `L` layers has `L + 1` normalizers. Statistics are shared
/// across timesteps.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmStack {
    pub timesteps: usize,
    pub classes: Vec<String>,
    pub norms: Vec<BatchNorm>,
    pub layers: Vec<LstmCell>,
    /// Head weights, `K x H`.
    pub head_w: Array2<f64>,
    pub head_b: Array1<f64>,
}

/// Forward-pass state needed by [`LstmStack::backward`].
#[derive(Debug, Clone)]
pub struct StackCache {
    batch: usize,
    norm_caches: Vec<BnCache>,
    layer_caches: Vec<LstmCache>,
    head_input: Array2<f64>,
    probs: Array2<f64>,
    labels: Vec<usize>,
}

/// Loss, gradients and the batch statistics that a training step should
/// fold into the running averages.
pub struct StackStep {
    pub loss: f64,
    pub grads: LstmStack,
    pub stats: Vec<BnStats>,
}

impl LstmStack {
    pub fn new(
        input_dim: usize,
        hidden: usize,
        layers: usize,
        timesteps: usize,
        classes: Vec<String>,
        seed: u64,
    ) -> Result<Self> {
        if input_dim == 0 || hidden == 0 || layers == 0 || timesteps == 0 {
            return Err(Error::param("stack", "dimensions must be positive"));
        }
        if classes.len() < 2 {
            return Err(Error::param("classes", "need at least two classes"));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut norms = vec![BatchNorm::new(input_dim)];
        let mut cells = Vec::with_capacity(layers);
        for l in 0..layers {
            let d = if l == 0 { input_dim } else { hidden };
            cells.push(LstmCell::init(d, hidden, &mut rng));
            norms.push(BatchNorm::new(hidden));
        }
        let bound = 1.0 / (hidden as f64).sqrt();
        let k = classes.len();
        let head_w = Array2::from_shape_simple_fn((k, hidden), || rng.random_range(-bound..bound));
        Ok(Self {
            timesteps,
            classes,
            norms,
            layers: cells,
            head_w,
            head_b: Array1::zeros(k),
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn hidden(&self) -> usize {
        self.head_w.ncols()
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    /// Same shapes, every value zero; used as a gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        z.zero();
        for n in &mut z.norms {
            n.running_mean.fill(0.0);
            n.running_var.fill(0.0);
        }
        z
    }

    fn check_input(&self, x: &Array2<f64>, batch: usize) -> Result<usize> {
        if x.ncols() != self.input_dim() {
            return Err(Error::Shape {
                context: "stack input features",
                expected: self.input_dim(),
                actual: x.ncols(),
            });
        }
        if batch == 0 || x.nrows() % batch != 0 {
            return Err(Error::Shape {
                context: "stack time-major rows",
                expected: batch,
                actual: x.nrows(),
            });
        }
        Ok(x.nrows() / batch)
    }

    /// Train-mode forward on a time-major batch, loss on the final timestep,
    /// and full backward pass. Does not modify `self`.
    pub fn train_step(&self, x: &Array2<f64>, batch: usize, labels: &[usize]) -> Result<StackStep> {
        let (loss, cache, stats) = self.forward_train(x, batch, labels)?;
        let mut grads = self.zeros_like();
        self.backward(&cache, &mut grads);
        Ok(StackStep { loss, grads, stats })
    }

    pub fn forward_train(
        &self,
        x: &Array2<f64>,
        batch: usize,
        labels: &[usize],
    ) -> Result<(f64, StackCache, Vec<BnStats>)> {
        let steps = self.check_input(x, batch)?;
        if labels.len() != batch {
            return Err(Error::Shape {
                context: "stack labels",
                expected: batch,
                actual: labels.len(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= self.num_classes()) {
            return Err(Error::Shape {
                context: "stack label index",
                expected: self.num_classes(),
                actual: bad,
            });
        }
        let mut norm_caches = Vec::with_capacity(self.norms.len());
        let mut layer_caches = Vec::with_capacity(self.layers.len());
        let mut stats = Vec::with_capacity(self.norms.len());
        let mut h = x.clone();
        for (norm, cell) in self.norms.iter().zip(&self.layers) {
            let (z, nc, st) = norm.forward_train(&h)?;
            let (out, lc) = cell.forward_seq(&z, batch)?;
            norm_caches.push(nc);
            layer_caches.push(lc);
            stats.push(st);
            h = out;
        }
        let last = h.slice(s![(steps - 1) * batch.., ..]).to_owned();
        let (head_input, nc, st) = self.norms[self.depth()].forward_train(&last)?;
        norm_caches.push(nc);
        stats.push(st);
        let probs = softmax_rows(&(head_input.dot(&self.head_w.t()) + &self.head_b));
        let loss = cross_entropy_indices(&probs, labels);
        Ok((
            loss,
            StackCache {
                batch,
                norm_caches,
                layer_caches,
                head_input,
                probs,
                labels: labels.to_vec(),
            },
            stats,
        ))
    }

    pub fn backward(&self, cache: &StackCache, grads: &mut LstmStack) {
        let batch = cache.batch;
        let mut d_logits = cache.probs.clone();
        for (b, &y) in cache.labels.iter().enumerate() {
            d_logits[[b, y]] -= 1.0;
        }
        d_logits /= batch as f64;
        grads.head_w += &d_logits.t().dot(&cache.head_input);
        grads.head_b += &d_logits.sum_axis(Axis(0));
        let d_head_in = d_logits.dot(&self.head_w);
        let depth = self.depth();
        let d_last = self.norms[depth].backward(&d_head_in, &cache.norm_caches[depth], &mut grads.norms[depth]);

        let rows = cache.layer_caches[0].row_count();
        let mut d_h = Array2::zeros((rows, self.hidden()));
        d_h.slice_mut(s![rows - batch.., ..]).assign(&d_last);
        for l in (0..depth).rev() {
            let d_z = self.layers[l].backward_seq(&d_h, &cache.layer_caches[l], &mut grads.layers[l]);
            d_h = self.norms[l].backward(&d_z, &cache.norm_caches[l], &mut grads.norms[l]);
        }
    }

    /// Loss of a train-mode forward pass, for finite-difference checks.
    pub fn loss(&self, x: &Array2<f64>, batch: usize, labels: &[usize]) -> Result<f64> {
        Ok(self.forward_train(x, batch, labels)?.0)
    }

    /// Fold batch statistics into the running averages.
    pub fn update_running(&mut self, stats: &[BnStats]) {
        for (n, s) in self.norms.iter_mut().zip(stats) {
            n.update_running(s);
        }
    }

    /// Inference on a time-major batch; returns `T*B x K` probabilities when
    /// `all_steps`, otherwise the `B x K` final-step probabilities.
    pub fn infer(&self, x: &Array2<f64>, batch: usize, all_steps: bool) -> Result<Array2<f64>> {
        let steps = self.check_input(x, batch)?;
        let mut h = x.clone();
        for (norm, cell) in self.norms.iter().zip(&self.layers) {
            h = cell.forward_seq(&norm.forward_infer(&h)?, batch)?.0;
        }
        if !all_steps {
            h = h.slice(s![(steps - 1) * batch.., ..]).to_owned();
        }
        let z = self.norms[self.depth()].forward_infer(&h)?;
        Ok(softmax_rows(&(z.dot(&self.head_w.t()) + &self.head_b)))
    }

    /// Left-pad `frames` with zero vectors to `timesteps` rows.
    pub fn window_matrix(&self, frames: &[&[f64]]) -> Result<Array2<f64>> {
        let (t, d) = (self.timesteps, self.input_dim());
        if frames.len() > t {
            return Err(Error::Shape {
                context: "stack sequence length",
                expected: t,
                actual: frames.len(),
            });
        }
        let mut x = Array2::zeros((t, d));
        let pad = t - frames.len();
        for (i, f) in frames.iter().enumerate() {
            if f.len() != d {
                return Err(Error::Shape {
                    context: "stack input features",
                    expected: d,
                    actual: f.len(),
                });
            }
            x.row_mut(pad + i).assign(&ndarray::aview1(f));
        }
        Ok(x)
    }

    /// Class probabilities at every timestep of one (left-padded) sequence.
    pub fn stack_forward(&self, frames: &[&[f64]]) -> Result<Vec<Vec<f64>>> {
        let x = self.window_matrix(frames)?;
        let p = self.infer(&x, 1, true)?;
        Ok(p.rows().into_iter().map(|r| r.to_vec()).collect())
    }

    /// Final-timestep class probabilities of one (left-padded) sequence.
    pub fn predict(&self, frames: &[&[f64]]) -> Result<Vec<f64>> {
        let x = self.window_matrix(frames)?;
        Ok(self.infer(&x, 1, false)?.row(0).to_vec())
    }
}

impl Params for LstmStack {
    fn params(&self) -> Vec<&[f64]> {
        let mut v = Vec::new();
        for n in &self.norms {
            v.extend(n.params());
        }
        for l in &self.layers {
            v.extend(l.params());
        }
        v.push(self.head_w.as_slice().expect("contiguous"));
        v.push(self.head_b.as_slice().expect("contiguous"));
        v
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut v = Vec::new();
        for n in &mut self.norms {
            v.extend(n.params_mut());
        }
        for l in &mut self.layers {
            v.extend(l.params_mut());
        }
        v.push(self.head_w.as_slice_mut().expect("contiguous"));
        v.push(self.head_b.as_slice_mut().expect("contiguous"));
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::gradient_check;
    use proptest::prelude::*;
    use rand::Rng;

    fn classes(k: usize) -> Vec<String> {
        (0..k).map(|i| format!("c{i}")).collect()
    }

    fn toy_input(steps: usize, batch: usize, d: usize, seed: u64) -> Array2<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Array2::from_shape_simple_fn((steps * batch, d), || rng.random_range(-2.0..2.0))
    }

    #[test]
    fn gradients_match_finite_differences() {
        for (layers, steps, k) in [(2, 4, 3), (3, 5, 2)] {
            let mut stack = LstmStack::new(3, 4, layers, steps, classes(k), 7).unwrap();
            for n in &mut stack.norms {
                n.gamma.mapv_inplace(|g| g * 1.3);
                n.beta.fill(0.1);
            }
            let batch = 3;
            let x = toy_input(steps, batch, 3, 8);
            let labels: Vec<usize> = (0..batch).map(|b| b % k).collect();
            let step = stack.train_step(&x, batch, &labels).unwrap();
            let report = gradient_check(&stack, &step.grads, |s| s.loss(&x, batch, &labels).unwrap(), 1e-4);
            assert!(report.passed, "L={layers}: {report:?}");
        }
    }

    #[test]
    fn zero_head_gives_uniform() {
        let mut stack = LstmStack::new(4, 3, 2, 5, classes(3), 1).unwrap();
        stack.head_w.fill(0.0);
        let frames = [vec![1.0, 2.0, 3.0, 4.0], vec![0.0, -1.0, 0.5, 2.0]];
        let refs: Vec<&[f64]> = frames.iter().map(|f| f.as_slice()).collect();
        let out = stack.stack_forward(&refs).unwrap();
        assert_eq!(out.len(), 5);
        for p in out {
            assert!(p.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
        }
    }

    #[test]
    fn left_padding_and_length_limits() {
        let stack = LstmStack::new(2, 3, 2, 4, classes(2), 1).unwrap();
        let a = [1.0, 2.0];
        let x = stack.window_matrix(&[&a]).unwrap();
        assert_eq!(x.row(3).to_vec(), vec![1.0, 2.0]);
        assert!(x.slice(s![..3, ..]).iter().all(|&v| v == 0.0));
        assert!(stack.window_matrix(&[&a[..]; 5]).is_err());
        assert!(stack.window_matrix(&[&[1.0][..]]).is_err());
        assert_eq!(stack.predict(&[&a]).unwrap(), stack.predict(&[&a]).unwrap());
        let last = stack.stack_forward(&[&a]).unwrap().pop().unwrap();
        assert_eq!(last, stack.predict(&[&a]).unwrap());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn outputs_are_distributions(seed in 0u64..1000, len in 1usize..6) {
            let stack = LstmStack::new(3, 4, 2, 6, classes(4), seed).unwrap();
            let x = toy_input(len, 1, 3, seed + 1);
            let frames: Vec<&[f64]> = x.rows().into_iter().map(|r| r.to_slice().unwrap()).collect();
            for p in stack.stack_forward(&frames).unwrap() {
                prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                prop_assert!(p.iter().all(|&v| v > 0.0 && v < 1.0));
            }
        }
    }
}
