use ndarray::{Array2, ArrayView1, ArrayViewMut1, Axis};

use crate::error::{Error, Result};

/// Probability floor used inside logarithms.
pub const PROB_EPS: f64 = 1e-12;

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable softmax of one row, in place.
pub fn softmax_in_place(mut row: ArrayViewMut1<f64>) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    row.mapv_inplace(|v| (v - max).exp());
    let sum = row.sum();
    row.mapv_inplace(|v| v / sum);
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let mut out = ndarray::Array1::from(logits.to_vec());
    softmax_in_place(out.view_mut());
    out.to_vec()
}

/// Row-wise softmax.
pub fn softmax_rows(logits: &Array2<f64>) -> Array2<f64> {
    let mut p = logits.clone();
    for row in p.axis_iter_mut(Axis(0)) {
        softmax_in_place(row);
    }
    p
}

/// Index of the largest value; ties resolve to the lowest index.
pub fn classify(p: &[f64]) -> usize {
    argmax(ArrayView1::from(p))
}

pub(crate) fn argmax(p: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (k, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = k;
        }
    }
    best
}

/// Mean over samples of `-sum_k truth_k * ln(max(pred_k, eps))`.
pub fn cross_entropy(predicted: &[Vec<f64>], truth: &[Vec<f64>]) -> Result<f64> {
    if predicted.len() != truth.len() {
        return Err(Error::Shape {
            context: "cross_entropy samples",
            expected: truth.len(),
            actual: predicted.len(),
        });
    }
    if predicted.is_empty() {
        return Err(Error::param("predicted", "no samples"));
    }
    let mut total = 0.0;
    for (p, t) in predicted.iter().zip(truth) {
        if p.len() != t.len() {
            return Err(Error::Shape {
                context: "cross_entropy classes",
                expected: t.len(),
                actual: p.len(),
            });
        }
        total -= p
            .iter()
            .zip(t)
            .map(|(&p, &t)| if t == 0.0 { 0.0 } else { t * p.max(PROB_EPS).ln() })
            .sum::<f64>();
    }
    Ok(total / predicted.len() as f64)
}

/// Mean cross-entropy of row-wise probabilities against class indices.
pub(crate) fn cross_entropy_indices(p: &Array2<f64>, labels: &[usize]) -> f64 {
    let total: f64 = labels
        .iter()
        .enumerate()
        .map(|(b, &y)| -p[[b, y]].max(PROB_EPS).ln())
        .sum();
    total / labels.len() as f64
}
