//! Shared plumbing for parameterized networks.

use rand::Rng;

use crate::numerics::tensor::Tensor;

/// A named, ordered collection of parameter tensors. The order is the
/// contract: optimizer moments and checkpoint payloads follow it.
pub trait ParamSet {
    fn named(&self) -> Vec<(String, &Tensor)>;
    fn named_mut(&mut self) -> Vec<(String, &mut Tensor)>;

    fn sizes(&self) -> Vec<usize> {
        self.named().iter().map(|(_, t)| t.data().len()).collect()
    }

    fn zero_grads(&mut self) {
        for (_, t) in self.named_mut() {
            t.zero_grad();
        }
    }

    /// Exact element-wise copy of values (target-network sync).
    fn copy_values_from(&mut self, other: &Self)
    where
        Self: Sized,
    {
        let src = other.named();
        for ((_, dst), (_, s)) in self.named_mut().into_iter().zip(src) {
            dst.data_mut().copy_from_slice(s.data());
        }
    }

    fn all_finite(&self) -> bool {
        self.named().iter().all(|(_, t)| t.is_finite())
    }

    /// Global L2 norm over all accumulated gradients.
    fn grad_norm(&self) -> f64 {
        let mut sq = 0.0;
        for (_, t) in self.named() {
            if let Some(g) = t.grad() {
                for v in g {
                    sq += v * v;
                }
            }
        }
        sq.sqrt()
    }

    /// Scales every gradient by `factor` (global-norm clipping support).
    fn scale_grads(&mut self, factor: f64) {
        for (_, t) in self.named_mut() {
            let n = t.data().len();
            if let Some(g) = t.grad() {
                let scaled: Vec<f64> = g.iter().map(|v| v * factor).collect();
                t.zero_grad();
                t.accumulate_grad(&scaled);
                debug_assert_eq!(n, scaled.len());
            }
        }
    }
}

/// Glorot-uniform weight matrix `[fan_in, fan_out]`.
pub fn glorot(fan_in: usize, fan_out: usize, rng: &mut impl Rng) -> Tensor {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    let data = (0..fan_in * fan_out)
        .map(|_| rng.gen_range(-limit..limit))
        .collect();
    Tensor::new(data, vec![fan_in, fan_out]).unwrap().with_grad()
}

/// Zero bias row `[1, n]` for broadcasting against `[rows, n]`.
pub fn zero_bias(n: usize) -> Tensor {
    Tensor::zeros(&[1, n]).with_grad()
}

/// Uniform vector in `[-limit, limit]` with the given shape.
pub fn uniform(shape: &[usize], limit: f64, rng: &mut impl Rng) -> Tensor {
    let n: usize = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-limit..limit)).collect();
    Tensor::new(data, shape.to_vec()).unwrap().with_grad()
}
