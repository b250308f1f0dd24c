//! Central-difference gradient verification.

use rand::seq::index::sample;
use rand::Rng;

/// Anything with a flat parameter vector, a scalar loss on some fixed
/// batch, and an analytic gradient to check against.
pub trait DifferentiableLoss {
    fn param_count(&self) -> usize;
    fn get_param(&self, index: usize) -> f64;
    fn set_param(&mut self, index: usize, value: f64);
    /// Loss at the current parameters (the batch is fixed inside the impl).
    fn loss(&mut self) -> f64;
    /// Full flat analytic gradient at the current parameters.
    fn analytic_gradient(&mut self) -> Vec<f64>;
}

#[derive(Debug, Clone, Copy)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub checked: usize,
    pub worst_index: usize,
}

/// Compare analytic gradients against central differences on a random
/// sample of at least `min_samples` parameters (all of them if the model
/// is smaller). Relative error is `|a−n| / max(|a|, |n|, 1e-12)`.
pub fn gradient_check<L: DifferentiableLoss>(
    model: &mut L,
    step: f64,
    min_samples: usize,
    rng: &mut impl Rng,
) -> GradCheckReport {
    assert!(step > 0.0, "finite-difference step must be positive");
    let total = model.param_count();
    let analytic = model.analytic_gradient();
    assert_eq!(analytic.len(), total, "gradient length mismatch");

    let indices: Vec<usize> = if total <= min_samples {
        (0..total).collect()
    } else {
        let mut picked = sample(rng, total, min_samples).into_vec();
        picked.sort_unstable();
        picked
    };

    let mut max_rel = 0.0_f64;
    let mut worst = 0;
    for &idx in &indices {
        let original = model.get_param(idx);
        model.set_param(idx, original + step);
        let up = model.loss();
        model.set_param(idx, original - step);
        let down = model.loss();
        model.set_param(idx, original);
        let numeric = (up - down) / (2.0 * step);
        let a = analytic[idx];
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-12);
        if rel > max_rel {
            max_rel = rel;
            worst = idx;
        }
    }
    GradCheckReport {
        max_relative_error: max_rel,
        checked: indices.len(),
        worst_index: worst,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// f(w) = Σ (w·x_i − y_i)² / n — exactly quadratic, so central
    /// differences are exact up to rounding.
    struct LinearModel {
        w: Vec<f64>,
        x: Vec<Vec<f64>>,
        y: Vec<f64>,
    }

    impl LinearModel {
        fn residuals(&self) -> Vec<f64> {
            self.x
                .iter()
                .zip(&self.y)
                .map(|(xi, yi)| {
                    xi.iter().zip(&self.w).map(|(a, b)| a * b).sum::<f64>() - yi
                })
                .collect()
        }
    }

    impl DifferentiableLoss for LinearModel {
        fn param_count(&self) -> usize {
            self.w.len()
        }
        fn get_param(&self, index: usize) -> f64 {
            self.w[index]
        }
        fn set_param(&mut self, index: usize, value: f64) {
            self.w[index] = value;
        }
        fn loss(&mut self) -> f64 {
            let n = self.x.len() as f64;
            self.residuals().iter().map(|r| r * r).sum::<f64>() / n
        }
        fn analytic_gradient(&mut self) -> Vec<f64> {
            let n = self.x.len() as f64;
            let res = self.residuals();
            (0..self.w.len())
                .map(|j| {
                    2.0 / n
                        * self
                            .x
                            .iter()
                            .zip(&res)
                            .map(|(xi, r)| xi[j] * r)
                            .sum::<f64>()
                })
                .collect()
        }
    }

    fn toy_model(rng: &mut impl Rng) -> LinearModel {
        let d = 6;
        LinearModel {
            w: (0..d).map(|_| rng.random_range(-1.0..1.0)).collect(),
            x: (0..20)
                .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect(),
            y: (0..20).map(|_| rng.random_range(-1.0..1.0)).collect(),
        }
    }

    #[test]
    fn quadratic_loss_is_near_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut model = toy_model(&mut rng);
        let report = gradient_check(&mut model, 1e-5, 100, &mut rng);
        assert_eq!(report.checked, 6);
        assert!(
            report.max_relative_error <= 1e-9,
            "error {}",
            report.max_relative_error
        );
    }

    #[test]
    fn coarser_step_is_no_more_accurate() {
        // On a quadratic both steps are near-exact; perturb the loss with a
        // cubic term to expose truncation error growth with the step.
        struct Cubic {
            w: f64,
        }
        impl DifferentiableLoss for Cubic {
            fn param_count(&self) -> usize {
                1
            }
            fn get_param(&self, _: usize) -> f64 {
                self.w
            }
            fn set_param(&mut self, _: usize, value: f64) {
                self.w = value;
            }
            fn loss(&mut self) -> f64 {
                self.w.powi(3) + 0.5 * self.w.powi(2)
            }
            fn analytic_gradient(&mut self) -> Vec<f64> {
                vec![3.0 * self.w.powi(2) + self.w]
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut model = Cubic { w: 0.37 };
        let fine = gradient_check(&mut model, 1e-5, 100, &mut rng);
        let coarse = gradient_check(&mut model, 1e-2, 100, &mut rng);
        assert!(coarse.max_relative_error > fine.max_relative_error);
    }
}
