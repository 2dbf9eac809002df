//! Adam optimizer with the standard moment defaults.

use super::Scalar;
use ndarray::ArrayD;

#[derive(Debug, Clone, Copy)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn with_learning_rate(learning_rate: f64) -> Self {
        Self {
            learning_rate,
            ..Self::default()
        }
    }
}

/// One optimizer slot per parameter tensor, addressed by position.
pub struct Adam<T: Scalar> {
    cfg: AdamConfig,
    m: Vec<ArrayD<T>>,
    v: Vec<ArrayD<T>>,
    step: u64,
}

impl<T: Scalar> Adam<T> {
    pub fn new(cfg: AdamConfig, shapes: &[&ArrayD<T>]) -> Self {
        Self {
            cfg,
            m: shapes.iter().map(|a| ArrayD::zeros(a.raw_dim())).collect(),
            v: shapes.iter().map(|a| ArrayD::zeros(a.raw_dim())).collect(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Applies one update. `params` and `grads` must be in the same order
    /// as the shapes given at construction.
    pub fn step(&mut self, params: &mut [&mut ArrayD<T>], grads: &[&ArrayD<T>]) {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        self.step += 1;
        let b1 = T::from_f64_c(self.cfg.beta1);
        let b2 = T::from_f64_c(self.cfg.beta2);
        let lr = T::from_f64_c(self.cfg.learning_rate);
        let eps = T::from_f64_c(self.cfg.epsilon);
        let bias1 = T::one() - T::from_f64_c(self.cfg.beta1.powi(self.step as i32));
        let bias2 = T::one() - T::from_f64_c(self.cfg.beta2.powi(self.step as i32));
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads.iter())
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            m.zip_mut_with(g, |m, &g| *m = b1 * *m + (T::one() - b1) * g);
            v.zip_mut_with(g, |v, &g| *v = b2 * *v + (T::one() - b2) * g * g);
            for ((p, &m), &v) in p.iter_mut().zip(m.iter()).zip(v.iter()) {
                let m_hat = m / bias1;
                let v_hat = v / bias2;
                *p = *p - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}
