//! Central-difference gradient checking.
//!
//! The checker perturbs one parameter coordinate at a time and compares the
//! numeric slope against the analytic gradient produced by the tape. It is
//! deliberately oblivious to how the function under test is built, so it
//! serves as the independent oracle for every backward rule.

use crate::numerics::tensor::Tensor;

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub pass: bool,
    /// (parameter index, coordinate) of the worst entry.
    pub worst: (usize, usize),
}

/// Checks `f`'s analytic gradient against central differences.
///
/// `f` must evaluate a deterministic scalar from `params` and, when asked,
/// leave accumulated gradients in them. It is called once with
/// `compute_grad = true` and then twice per coordinate for the numeric
/// estimate. Relative error per coordinate is
/// `|a - n| / max(1e-8, |a| + |n|)`.
pub fn grad_check(
    f: &mut dyn FnMut(&mut [Tensor], bool) -> f64,
    params: &mut [Tensor],
    h: f64,
    tol: f64,
) -> GradCheckReport {
    assert!(h > 0.0, "step size must be positive");
    for p in params.iter_mut() {
        p.zero_grad();
    }
    let _ = f(params, true);
    let analytic: Vec<Vec<f64>> = params
        .iter()
        .map(|p| p.grad().map(|g| g.to_vec()).unwrap_or_default())
        .collect();

    let mut max_rel_err: f64 = 0.0;
    let mut worst = (0, 0);
    for pi in 0..params.len() {
        if !params[pi].requires_grad() {
            continue;
        }
        for ci in 0..params[pi].data().len() {
            let orig = params[pi].data()[ci];
            params[pi].data_mut()[ci] = orig + h;
            let up = f(params, false);
            params[pi].data_mut()[ci] = orig - h;
            let down = f(params, false);
            params[pi].data_mut()[ci] = orig;

            let numeric = (up - down) / (2.0 * h);
            let a = analytic[pi][ci];
            let rel = (a - numeric).abs() / f64::max(1e-8, a.abs() + numeric.abs());
            if rel > max_rel_err {
                max_rel_err = rel;
                worst = (pi, ci);
            }
        }
    }
    GradCheckReport {
        max_rel_err,
        pass: max_rel_err <= tol,
        worst,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::tape::Tape;

    #[test]
    fn quadratic_passes() {
        // f = theta^2 at theta = 3: analytic 6
        let mut params = vec![Tensor::new(vec![3.0], vec![1]).unwrap().with_grad()];
        let mut f = |ps: &mut [Tensor], grad: bool| {
            let mut t = Tape::new();
            let x = t.param(&ps[0]);
            let sq = t.mul(x, x).unwrap();
            let loss = t.sum_all(sq);
            if grad {
                t.backward(loss).unwrap();
                let g = t.grad(x).unwrap().to_vec();
                ps[0].accumulate_grad(&g);
            }
            t.value(loss)[0]
        };
        let report = grad_check(&mut f, &mut params, 1e-5, 1e-6);
        assert!(report.pass, "max rel err {}", report.max_rel_err);
    }

    #[test]
    fn constant_function_has_zero_error() {
        let mut params = vec![Tensor::new(vec![1.25], vec![1]).unwrap().with_grad()];
        let mut f = |ps: &mut [Tensor], grad: bool| {
            let mut t = Tape::new();
            let _x = t.param(&ps[0]);
            let c = t.constant(vec![4.0], vec![1]).unwrap();
            let loss = t.sum_all(c);
            if grad {
                t.backward(loss).unwrap();
            }
            t.value(loss)[0]
        };
        let report = grad_check(&mut f, &mut params, 1e-5, 1e-9);
        assert!(report.pass);
        assert_eq!(report.max_rel_err, 0.0);
    }

    #[test]
    fn deliberately_wrong_gradient_fails() {
        let mut params = vec![Tensor::new(vec![2.0], vec![1]).unwrap().with_grad()];
        let mut f = |ps: &mut [Tensor], grad: bool| {
            let v = ps[0].data()[0];
            if grad {
                ps[0].accumulate_grad(&[v]); // claims d(x^2)/dx = x
            }
            v * v
        };
        let report = grad_check(&mut f, &mut params, 1e-5, 1e-4);
        assert!(!report.pass);
    }
}
