use serde::{Deserialize, Serialize};

/// Flat view of every trainable tensor, in a fixed order.
///
/// Gradients are stored in a value of the same type, so `grads.params()`
/// lines up slice by slice with `model.params_mut()`.
pub trait Params {
    fn params(&self) -> Vec<&[f64]>;
    fn params_mut(&mut self) -> Vec<&mut [f64]>;

    fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    fn flatten(&self) -> Vec<f64> {
        self.params().concat()
    }

    fn zero(&mut self) {
        for p in self.params_mut() {
            p.fill(0.0);
        }
    }
}

pub fn global_norm<P: Params>(grads: &P) -> f64 {
    grads
        .params()
        .iter()
        .flat_map(|p| p.iter())
        .map(|g| g * g)
        .sum::<f64>()
        .sqrt()
}

/// Rescale `grads` so their global L2 norm is at most `max_norm`.
pub fn clip_global_norm<P: Params>(grads: &mut P, max_norm: f64) -> f64 {
    let norm = global_norm(grads);
    if norm > max_norm && norm > 0.0 {
        let s = max_norm / norm;
        for p in grads.params_mut() {
            p.iter_mut().for_each(|g| *g *= s);
        }
    }
    norm
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction; moment buffers follow the `Params` order.
#[derive(Debug, Clone)]
pub struct Adam {
    config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl Adam {
    pub fn new<P: Params>(model: &P, config: AdamConfig) -> Self {
        let n = model.param_count();
        Self {
            config,
            m: vec![0.0; n],
            v: vec![0.0; n],
            step: 0,
        }
    }

    pub fn update<P: Params>(&mut self, model: &mut P, grads: &P, lr: f64) {
        self.step += 1;
        let AdamConfig { beta1, beta2, eps } = self.config;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        let mut i = 0;
        for (w, g) in model.params_mut().into_iter().zip(grads.params()) {
            for (w, &g) in w.iter_mut().zip(g) {
                let m = &mut self.m[i];
                let v = &mut self.v[i];
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                *w -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
                i += 1;
            }
        }
    }
}

/// Outcome of comparing analytic and finite-difference gradients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// Flat index of the worst parameter.
    pub worst_index: usize,
    pub checked: usize,
    pub tolerance: f64,
    pub passed: bool,
}

/// Step used for central differences.
pub const GRAD_CHECK_STEP: f64 = 1e-5;
/// Denominator floor for the relative error, so that parameters with
/// near-zero gradient are judged on absolute agreement.
pub const GRAD_CHECK_FLOOR: f64 = 1e-6;

/// Compare `analytic` against central differences of `loss` at `model`.
///
/// Relative error is `|a - n| / max(|a|, |n|, GRAD_CHECK_FLOOR)`.
pub fn gradient_check<P, F>(model: &P, analytic: &P, loss: F, tolerance: f64) -> GradCheckReport
where
    P: Params + Clone,
    F: Fn(&P) -> f64,
{
    let grads = analytic.flatten();
    let mut probe = model.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        worst_index: 0,
        checked: grads.len(),
        tolerance,
        passed: true,
    };
    let mut flat = 0;
    let slices = probe.params().len();
    for s in 0..slices {
        let len = probe.params()[s].len();
        for j in 0..len {
            let orig = probe.params()[s][j];
            probe.params_mut()[s][j] = orig + GRAD_CHECK_STEP;
            let plus = loss(&probe);
            probe.params_mut()[s][j] = orig - GRAD_CHECK_STEP;
            let minus = loss(&probe);
            probe.params_mut()[s][j] = orig;
            let numeric = (plus - minus) / (2.0 * GRAD_CHECK_STEP);
            let a = grads[flat];
            let abs = (a - numeric).abs();
            let rel = abs / a.abs().max(numeric.abs()).max(GRAD_CHECK_FLOOR);
            if rel > report.max_rel_error {
                report.max_rel_error = rel;
                report.worst_index = flat;
            }
            report.max_abs_error = report.max_abs_error.max(abs);
            flat += 1;
        }
    }
    report.passed = report.max_rel_error < tolerance;
    report
}
