//! Bias-corrected Adam.

use crate::error::{Error, Result};
use crate::numerics::tensor::Tensor;

/// Optimizer state for one flat list of parameter tensors. The moment
/// arrays are kept in the same order as the parameters they update.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    t: u64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(param_sizes: &[usize], lr: f64) -> Self {
        AdamState {
            m: param_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            v: param_sizes.iter().map(|&n| vec![0.0; n]).collect(),
            t: 0,
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub fn moments(&self) -> (&[Vec<f64>], &[Vec<f64>]) {
        (&self.m, &self.v)
    }

    pub fn restore(&mut self, m: Vec<Vec<f64>>, v: Vec<Vec<f64>>, t: u64) {
        self.m = m;
        self.v = v;
        self.t = t;
    }
}

/// Applies one Adam update in place, reading each parameter's accumulated
/// gradient. A non-finite gradient entry aborts the step: it is the
/// divergence signal for the whole run.
pub fn adam_step(params: &mut [&mut Tensor], state: &mut AdamState) -> Result<()> {
    if params.len() != state.m.len() {
        return Err(Error::shape(
            "adam_step",
            format!(
                "{} params vs {} moment slots",
                params.len(),
                state.m.len()
            ),
        ));
    }
    for (i, p) in params.iter().enumerate() {
        let n = p.data().len();
        if state.m[i].len() != n {
            return Err(Error::shape(
                "adam_step",
                format!("param {i} has {n} entries, moment has {}", state.m[i].len()),
            ));
        }
        if let Some(g) = p.grad() {
            if let Some(bad) = g.iter().find(|v| !v.is_finite()) {
                return Err(Error::NonFinite(format!(
                    "gradient entry {bad} in parameter {i}; aborting optimizer step"
                )));
            }
        }
    }

    state.t += 1;
    let t = state.t as f64;
    let bc1 = 1.0 - state.beta1.powf(t);
    let bc2 = 1.0 - state.beta2.powf(t);

    for (i, p) in params.iter_mut().enumerate() {
        let grad = match p.grad() {
            Some(g) => g.to_vec(),
            None => continue,
        };
        let m = &mut state.m[i];
        let v = &mut state.v[i];
        let data = p.data_mut();
        for j in 0..data.len() {
            let g = grad[j];
            m[j] = state.beta1 * m[j] + (1.0 - state.beta1) * g;
            v[j] = state.beta2 * v[j] + (1.0 - state.beta2) * g * g;
            let m_hat = m[j] / bc1;
            let v_hat = v[j] / bc2;
            data[j] -= state.lr * m_hat / (v_hat.sqrt() + state.eps);
        }
    }
    Ok(())
}
