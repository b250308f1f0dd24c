//! Adaptive-moment parameter updates over flat `f64` slices.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        AdamParams {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First/second moment accumulators, one pair per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
    step: u64,
    pub params: AdamParams,
}

impl OptimizerState {
    /// `tensor_lengths[i]` is the flat length of the i-th parameter tensor.
    pub fn new(tensor_lengths: &[usize], params: AdamParams) -> Self {
        OptimizerState {
            first: tensor_lengths.iter().map(|&n| vec![0.0; n]).collect(),
            second: tensor_lengths.iter().map(|&n| vec![0.0; n]).collect(),
            step: 0,
            params,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One update over every tensor; `tensors[i]` and `grads[i]` must align
/// with the lengths the state was built with. Bias correction uses the
/// explicit `m̂ = m/(1−β1ᵗ)`, `v̂ = v/(1−β2ᵗ)` form.
pub fn adam_step(
    state: &mut OptimizerState,
    tensors: &mut [&mut [f64]],
    grads: &[&[f64]],
) -> Result<()> {
    if tensors.len() != state.first.len() || grads.len() != state.first.len() {
        return Err(Error::Shape {
            context: "adam_step",
            detail: format!(
                "{} tensors, {} gradients, optimizer built for {}",
                tensors.len(),
                grads.len(),
                state.first.len()
            ),
        });
    }
    for (i, g) in grads.iter().enumerate() {
        if g.len() != state.first[i].len() || tensors[i].len() != state.first[i].len() {
            return Err(Error::Shape {
                context: "adam_step",
                detail: format!("tensor {i} length mismatch"),
            });
        }
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                context: format!("gradient tensor {i} during optimizer step {}", state.step + 1),
            });
        }
    }

    state.step += 1;
    let AdamParams {
        lr,
        beta1,
        beta2,
        epsilon,
    } = state.params;
    let bias1 = 1.0 - beta1.powi(state.step as i32);
    let bias2 = 1.0 - beta2.powi(state.step as i32);

    for i in 0..tensors.len() {
        let m = &mut state.first[i];
        let v = &mut state.second[i];
        let theta = &mut *tensors[i];
        let g = grads[i];
        for j in 0..theta.len() {
            m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
            v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
            let m_hat = m[j] / bias1;
            let v_hat = v[j] / bias2;
            theta[j] -= lr * m_hat / (v_hat.sqrt() + epsilon);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_learning_rate() {
        let params = AdamParams::default();
        let mut state = OptimizerState::new(&[1], params);
        let mut theta = vec![0.0];
        adam_step(&mut state, &mut [&mut theta], &[&[1.0]]).unwrap();
        // First bias-corrected step is −lr·g/(|g| + ε·√v̂-ish) ≈ −lr.
        assert!((theta[0] + params.lr).abs() < 1e-6, "theta {}", theta[0]);
        assert_eq!(state.step_count(), 1);
    }

    #[test]
    fn zero_gradient_is_fixed_point() {
        let mut state = OptimizerState::new(&[3], AdamParams::default());
        let mut theta = vec![1.0, -2.0, 0.5];
        let before = theta.clone();
        for _ in 0..5 {
            adam_step(&mut state, &mut [&mut theta], &[&[0.0, 0.0, 0.0]]).unwrap();
        }
        assert_eq!(theta, before);
    }

    #[test]
    fn deterministic_trajectories() {
        let run = || {
            let mut state = OptimizerState::new(&[2], AdamParams::default());
            let mut theta = vec![0.3, -0.7];
            for k in 0..50 {
                let g = [theta[0] - 0.1 * k as f64, theta[1] + 0.05];
                adam_step(&mut state, &mut [&mut theta], &[&g]).unwrap();
            }
            theta
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn non_finite_gradient_rejected() {
        let mut state = OptimizerState::new(&[1], AdamParams::default());
        let mut theta = vec![0.0];
        let err = adam_step(&mut state, &mut [&mut theta], &[&[f64::NAN]]).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
        // Failed step must not advance the counter or touch parameters.
        assert_eq!(state.step_count(), 0);
        assert_eq!(theta, vec![0.0]);
    }

    #[test]
    fn length_mismatch_rejected() {
        let mut state = OptimizerState::new(&[2], AdamParams::default());
        let mut theta = vec![0.0, 0.0];
        assert!(adam_step(&mut state, &mut [&mut theta], &[&[1.0]]).is_err());
    }
}
