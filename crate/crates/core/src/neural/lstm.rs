//! LSTM layer with forget, input and output gates and a tanh candidate.
//!
//! Gate pre-activations are `W_x x_t + W_h h_{t-1} + b`, i.e. one affine map
//! of `[h_{t-1}, x_t]` split into two blocks. Rows of the stacked weight
//! matrices are ordered `[f | i | g | o]`, each `hidden` rows tall.
//!
//! Sequence batches are matrices with `T * B` rows in time-major order: row
//! `t * B + b` holds timestep `t` of sequence `b`.

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::math::sigmoid;
use super::Params;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct LstmCell {
    /// Input weights, `4H x D`.
    pub w_x: Array2<f64>,
    /// Recurrent weights, `4H x H`.
    pub w_h: Array2<f64>,
    pub b: Array1<f64>,
}

impl LstmCell {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        Self {
            w_x: Array2::zeros((4 * hidden, input_dim)),
            w_h: Array2::zeros((4 * hidden, hidden)),
            b: Array1::zeros(4 * hidden),
        }
    }

    /// Uniform `±1/sqrt(D + H)` weights, forget-gate bias 1, other biases 0.
    pub fn init(input_dim: usize, hidden: usize, rng: &mut ChaCha8Rng) -> Self {
        let bound = 1.0 / ((input_dim + hidden) as f64).sqrt();
        let mut cell = Self::zeros(input_dim, hidden);
        cell.w_x.mapv_inplace(|_| rng.random_range(-bound..bound));
        cell.w_h.mapv_inplace(|_| rng.random_range(-bound..bound));
        cell.b.slice_mut(s![..hidden]).fill(1.0);
        cell
    }

    pub fn input_dim(&self) -> usize {
        self.w_x.ncols()
    }

    pub fn hidden(&self) -> usize {
        self.w_h.ncols()
    }
}

impl Params for LstmCell {
    fn params(&self) -> Vec<&[f64]> {
        vec![
            self.w_x.as_slice().expect("contiguous"),
            self.w_h.as_slice().expect("contiguous"),
            self.b.as_slice().expect("contiguous"),
        ]
    }

    fn params_mut(&mut self) -> Vec<&mut [f64]> {
        vec![
            self.w_x.as_slice_mut().expect("contiguous"),
            self.w_h.as_slice_mut().expect("contiguous"),
            self.b.as_slice_mut().expect("contiguous"),
        ]
    }
}

/// One recurrence step for a single sequence.
///
/// `f, i, o = σ(·)`, `g = tanh(·)`, `C_t = f ⊙ C_{t-1} + i ⊙ g`,
/// `h_t = o ⊙ tanh(C_t)`.
pub fn lstm_cell_step(
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    cell: &LstmCell,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let (d, h) = (cell.input_dim(), cell.hidden());
    for (context, expected, actual) in [
        ("lstm input", d, x.len()),
        ("lstm hidden state", h, h_prev.len()),
        ("lstm cell state", h, c_prev.len()),
    ] {
        if expected != actual {
            return Err(Error::Shape {
                context,
                expected,
                actual,
            });
        }
    }
    let a = cell.w_x.dot(&ndarray::aview1(x)) + cell.w_h.dot(&ndarray::aview1(h_prev)) + &cell.b;
    let mut h_t = vec![0.0; h];
    let mut c_t = vec![0.0; h];
    for j in 0..h {
        let f = sigmoid(a[j]);
        let i = sigmoid(a[h + j]);
        let g = a[2 * h + j].tanh();
        let o = sigmoid(a[3 * h + j]);
        c_t[j] = f * c_prev[j] + i * g;
        h_t[j] = o * c_t[j].tanh();
    }
    Ok((h_t, c_t))
}

/// Activations kept for backpropagation through time.
#[derive(Debug, Clone)]
pub struct LstmCache {
    batch: usize,
    input: Array2<f64>,
    /// Post-activation gates `[f | i | g | o]`, `T*B x 4H`.
    gates: Array2<f64>,
    cells: Array2<f64>,
    tanh_cells: Array2<f64>,
    hidden: Array2<f64>,
}

impl LstmCell {
    /// Run over a time-major batch from zero state; returns all hidden states.
    pub fn forward_seq(&self, input: &Array2<f64>, batch: usize) -> Result<(Array2<f64>, LstmCache)> {
        let (d, h) = (self.input_dim(), self.hidden());
        if input.ncols() != d {
            return Err(Error::Shape {
                context: "lstm input features",
                expected: d,
                actual: input.ncols(),
            });
        }
        if batch == 0 || input.nrows() % batch != 0 {
            return Err(Error::Shape {
                context: "lstm time-major rows",
                expected: batch,
                actual: input.nrows(),
            });
        }
        let steps = input.nrows() / batch;
        let mut gates = input.dot(&self.w_x.t()) + &self.b;
        let mut cells = Array2::zeros((input.nrows(), h));
        let mut tanh_cells = Array2::zeros((input.nrows(), h));
        let mut hidden = Array2::zeros((input.nrows(), h));
        for t in 0..steps {
            let rows = t * batch..(t + 1) * batch;
            if t > 0 {
                let prev = hidden.slice(s![rows.start - batch..rows.start, ..]);
                let rec = prev.dot(&self.w_h.t());
                gates.slice_mut(s![rows.clone(), ..]).zip_mut_with(&rec, |a, r| *a += r);
            }
            for b in 0..batch {
                let r = t * batch + b;
                let mut g = gates.row_mut(r);
                let g = g.as_slice_mut().expect("contiguous");
                for j in 0..h {
                    g[j] = sigmoid(g[j]);
                    g[h + j] = sigmoid(g[h + j]);
                    g[2 * h + j] = g[2 * h + j].tanh();
                    g[3 * h + j] = sigmoid(g[3 * h + j]);
                }
                for j in 0..h {
                    let c_prev = if t > 0 { cells[[r - batch, j]] } else { 0.0 };
                    let c = g[j] * c_prev + g[h + j] * g[2 * h + j];
                    let tc = c.tanh();
                    cells[[r, j]] = c;
                    tanh_cells[[r, j]] = tc;
                    hidden[[r, j]] = g[3 * h + j] * tc;
                }
            }
        }
        let cache = LstmCache {
            batch,
            input: input.clone(),
            gates,
            cells,
            tanh_cells,
            hidden: hidden.clone(),
        };
        Ok((hidden, cache))
    }

    /// Backpropagate `d_hidden` (gradient w.r.t. every output row) through
    /// time. Accumulates parameter gradients and returns the input gradient.
    pub fn backward_seq(&self, d_hidden: &Array2<f64>, cache: &LstmCache, grads: &mut LstmCell) -> Array2<f64> {
        let h = self.hidden();
        let batch = cache.batch;
        let rows = d_hidden.nrows();
        let steps = rows / batch;
        let mut d_pre = Array2::zeros((rows, 4 * h));
        let mut dh_next = Array2::<f64>::zeros((batch, h));
        let mut dc_next = Array2::<f64>::zeros((batch, h));
        for t in (0..steps).rev() {
            for b in 0..batch {
                let r = t * batch + b;
                let g = cache.gates.row(r);
                let mut da = d_pre.row_mut(r);
                for j in 0..h {
                    let (f, i, gg, o) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
                    let tc = cache.tanh_cells[[r, j]];
                    let dh = d_hidden[[r, j]] + dh_next[[b, j]];
                    let dc = dc_next[[b, j]] + dh * o * (1.0 - tc * tc);
                    let c_prev = if t > 0 { cache.cells[[r - batch, j]] } else { 0.0 };
                    da[j] = dc * c_prev * f * (1.0 - f);
                    da[h + j] = dc * gg * i * (1.0 - i);
                    da[2 * h + j] = dc * i * (1.0 - gg * gg);
                    da[3 * h + j] = dh * tc * o * (1.0 - o);
                    dc_next[[b, j]] = dc * f;
                }
            }
            if t > 0 {
                let block = d_pre.slice(s![t * batch..(t + 1) * batch, ..]);
                dh_next = block.dot(&self.w_h);
            }
        }
        // Hidden state entering each step: zeros at t = 0, else previous output.
        let prev_hidden = shift_down(cache.hidden.view(), batch);
        grads.w_h += &d_pre.t().dot(&prev_hidden);
        grads.w_x += &d_pre.t().dot(&cache.input);
        grads.b += &d_pre.sum_axis(Axis(0));
        d_pre.dot(&self.w_x)
    }
}

impl LstmCache {
    pub(crate) fn row_count(&self) -> usize {
        self.hidden.nrows()
    }
}

fn shift_down(m: ArrayView2<f64>, by: usize) -> Array2<f64> {
    let mut out = Array2::zeros(m.raw_dim());
    let n = m.nrows();
    if n > by {
        out.slice_mut(s![by.., ..]).assign(&m.slice(s![..n - by, ..]));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neural::gradient_check;
    use rand::SeedableRng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    /// Scalar-loop reference recurrence, written independently of the cell code.
    fn reference_step(x: &[f64], hp: &[f64], cp: &[f64], c: &LstmCell) -> (Vec<f64>, Vec<f64>) {
        let h = c.hidden();
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let pre = |gate: usize, j: usize| {
            let row = gate * h + j;
            let mut acc = c.b[row];
            for (k, xv) in x.iter().enumerate() {
                acc += c.w_x[[row, k]] * xv;
            }
            for (k, hv) in hp.iter().enumerate() {
                acc += c.w_h[[row, k]] * hv;
            }
            acc
        };
        let mut hn = Vec::new();
        let mut cn = Vec::new();
        for j in 0..h {
            let cell = sig(pre(0, j)) * cp[j] + sig(pre(1, j)) * pre(2, j).tanh();
            cn.push(cell);
            hn.push(sig(pre(3, j)) * cell.tanh());
        }
        (hn, cn)
    }

    #[test]
    fn zero_params_zero_state() {
        let cell = LstmCell::zeros(3, 4);
        let (h, c) = lstm_cell_step(&[0.5, -1.0, 2.0], &[0.0; 4], &[0.0; 4], &cell).unwrap();
        assert_eq!(h, vec![0.0; 4]);
        assert_eq!(c, vec![0.0; 4]);
    }

    #[test]
    fn matches_reference_recurrence() {
        let cell = LstmCell::init(3, 4, &mut rng(1));
        let mut h = vec![0.1, -0.2, 0.3, 0.0];
        let mut c = vec![0.5, 0.1, -0.4, 0.2];
        for t in 0..5 {
            let x = [t as f64 * 0.3, -0.5, 1.0 - t as f64 * 0.1];
            let (h1, c1) = lstm_cell_step(&x, &h, &c, &cell).unwrap();
            let (h2, c2) = reference_step(&x, &h, &c, &cell);
            for (a, b) in h1.iter().zip(&h2).chain(c1.iter().zip(&c2)) {
                assert!((a - b).abs() < 1e-12);
            }
            (h, c) = (h1, c1);
        }
    }

    #[test]
    fn saturated_gates_retain_memory() {
        let h = 4;
        let mut cell = LstmCell::init(3, h, &mut rng(2));
        cell.w_x.fill(0.0);
        cell.w_h.fill(0.0);
        cell.b.slice_mut(s![..h]).fill(40.0);
        cell.b.slice_mut(s![h..2 * h]).fill(-40.0);
        let c0 = vec![0.7, -0.3, 0.2, 1.1];
        let mut hs = vec![0.0; h];
        let mut cs = c0.clone();
        for t in 0..28 {
            let x = [t as f64, -1.0, 0.5];
            (hs, cs) = lstm_cell_step(&x, &hs, &cs, &cell).unwrap();
        }
        for (a, b) in cs.iter().zip(&c0) {
            assert!((a - b).abs() < 1e-6);
        }
    }

    #[test]
    fn shape_errors() {
        let cell = LstmCell::zeros(3, 2);
        assert!(lstm_cell_step(&[0.0; 2], &[0.0; 2], &[0.0; 2], &cell).is_err());
        assert!(cell.forward_seq(&Array2::zeros((6, 2)), 2).is_err());
        assert!(cell.forward_seq(&Array2::zeros((5, 3)), 2).is_err());
    }

    #[test]
    fn sequence_forward_matches_single_steps() {
        let cell = LstmCell::init(3, 5, &mut rng(3));
        let (steps, batch) = (6, 2);
        let input = Array2::from_shape_fn((steps * batch, 3), |(r, k)| ((r * 7 + k * 3) % 11) as f64 / 5.0 - 1.0);
        let (hidden, _) = cell.forward_seq(&input, batch).unwrap();
        for b in 0..batch {
            let mut h = vec![0.0; 5];
            let mut c = vec![0.0; 5];
            for t in 0..steps {
                let x = input.row(t * batch + b).to_vec();
                (h, c) = lstm_cell_step(&x, &h, &c, &cell).unwrap();
                for j in 0..5 {
                    assert!((hidden[[t * batch + b, j]] - h[j]).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn bptt_gradients() {
        let cell = LstmCell::init(3, 4, &mut rng(4));
        let (steps, batch) = (5, 2);
        let input = Array2::from_shape_fn((steps * batch, 3), |(r, k)| ((r * 5 + k) % 7) as f64 / 3.0 - 1.0);
        let weights = Array2::from_shape_fn((steps * batch, 4), |(r, k)| ((r + 2 * k) % 5) as f64 - 2.0);
        let loss = |c: &LstmCell| (c.forward_seq(&input, batch).unwrap().0 * &weights).sum();
        let (_, cache) = cell.forward_seq(&input, batch).unwrap();
        let mut grads = LstmCell::zeros(3, 4);
        let d_input = cell.backward_seq(&weights, &cache, &mut grads);
        let report = gradient_check(&cell, &grads, loss, 1e-4);
        assert!(report.passed, "{report:?}");

        let eps = 1e-5;
        for (r, k) in [(0, 0), (4, 1), (9, 2)] {
            let mut p = input.clone();
            p[[r, k]] += eps;
            let mut m = input.clone();
            m[[r, k]] -= eps;
            let f = |x: &Array2<f64>| (cell.forward_seq(x, batch).unwrap().0 * &weights).sum();
            let numeric = (f(&p) - f(&m)) / (2.0 * eps);
            assert!((numeric - d_input[[r, k]]).abs() < 1e-7 * (1.0 + numeric.abs()));
        }
    }
}
