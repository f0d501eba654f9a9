use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self { learning_rate: 1e-3, beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// Moment estimates for one flat parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl AdamState {
    pub fn new(n_params: usize, config: AdamConfig) -> Self {
        Self { config, step: 0, m: vec![0.0; n_params], v: vec![0.0; n_params] }
    }

    /// One bias-corrected Adam update of `params` along `grads`.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        assert_eq!(params.len(), self.m.len(), "parameter count changed under Adam");
        assert_eq!(grads.len(), self.m.len(), "gradient length mismatch");
        self.step += 1;
        let AdamConfig { learning_rate, beta1, beta2, epsilon } = self.config;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            *p -= learning_rate * (*m / c1) / ((*v / c2).sqrt() + epsilon);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = vec![1.0, -2.0];
        let mut s = AdamState::new(2, AdamConfig::default());
        s.step(&mut p, &[0.0, 0.0]);
        assert_eq!(p, vec![1.0, -2.0]);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut p = vec![0.0, 0.0];
        let mut s = AdamState::new(2, AdamConfig { learning_rate: 0.01, ..Default::default() });
        s.step(&mut p, &[3.0, -0.002]);
        assert_relative_eq!(p[0], -0.01, max_relative = 1e-6);
        assert_relative_eq!(p[1], 0.01, max_relative = 1e-4);
    }

    #[test]
    fn quadratic_converges() {
        // f(x) = (x - 3)^2, minimum at 3.
        let mut x = vec![0.0];
        let mut s = AdamState::new(1, AdamConfig { learning_rate: 0.1, ..Default::default() });
        for _ in 0..200 {
            let g = 2.0 * (x[0] - 3.0);
            s.step(&mut x, &[g]);
        }
        assert!((x[0] - 3.0).abs() < 1e-3, "x = {}", x[0]);
    }
}
