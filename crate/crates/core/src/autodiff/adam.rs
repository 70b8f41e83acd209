use super::params::Parameters;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
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

/// Bias-corrected Adam over a [`Parameters`] collection.
#[derive(Clone, Debug)]
pub struct AdamState {
    pub config: AdamConfig,
    step_count: u64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(params: &Parameters, config: AdamConfig) -> Self {
        let zeros: Vec<Vec<f64>> = params.iter().map(|(_, _, t)| vec![0.0; t.numel()]).collect();
        Self {
            config,
            step_count: 0,
            first_moment: zeros.clone(),
            second_moment: zeros,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step_count
    }

    pub fn first_moment(&self, index: usize) -> &[f64] {
        &self.first_moment[index]
    }

    pub fn second_moment(&self, index: usize) -> &[f64] {
        &self.second_moment[index]
    }

    /// Applies one update using the gradients currently stored in `params`.
    /// Gradients are left untouched; call [`Parameters::zero_grad`] between steps.
    pub fn step(&mut self, params: &mut Parameters) -> Result<()> {
        if params.len() != self.first_moment.len() {
            return Err(Error::Config(format!(
                "optimizer tracks {} parameters, got {}",
                self.first_moment.len(),
                params.len()
            )));
        }
        for id in params.ids() {
            if params.get(id).grad().is_none() {
                return Err(Error::MissingGrad(params.name(id).to_string()));
            }
            if params.get(id).numel() != self.first_moment[id.index()].len() {
                return Err(Error::Config(format!(
                    "parameter `{}` changed size since the optimizer was created",
                    params.name(id)
                )));
            }
        }

        self.step_count += 1;
        let AdamConfig {
            learning_rate: lr,
            beta1: b1,
            beta2: b2,
            epsilon: eps,
        } = self.config;
        let t = self.step_count as i32;
        let bias1 = 1.0 - b1.powi(t);
        let bias2 = 1.0 - b2.powi(t);

        for id in params.ids() {
            let m = &mut self.first_moment[id.index()];
            let v = &mut self.second_moment[id.index()];
            let (grad, data) = params.get_mut(id).grad_and_data_mut();
            let grad = grad.expect("checked above");
            for (((p, g), m), v) in data.iter_mut().zip(grad).zip(m.iter_mut()).zip(v.iter_mut()) {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m / bias1;
                let v_hat = *v / bias2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
