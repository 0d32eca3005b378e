use ndarray::{Array1, Array2};

use super::mlp::{Dense, MlpModel};

/// Adam optimiser state with bias-corrected moment estimates.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    step: u64,
    first: Vec<Dense>,
    second: Vec<Dense>,
}

impl AdamState {
    pub const DEFAULT_LEARNING_RATE: f64 = 0.01;

    pub fn new(model: &MlpModel, learning_rate: f64) -> Self {
        let zeros: Vec<Dense> = model
            .layers()
            .iter()
            .map(|l| Dense {
                weights: Array2::zeros(l.weights.raw_dim()),
                bias: Array1::zeros(l.bias.raw_dim()),
            })
            .collect();
        AdamState {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first: zeros.clone(),
            second: zeros,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    pub fn apply(&mut self, model: &mut MlpModel, grads: &[Dense]) {
        self.step += 1;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.epsilon);
        let c1 = 1.0 - b1.powi(self.step as i32);
        let c2 = 1.0 - b2.powi(self.step as i32);
        let lr = self.learning_rate;
        let update = |p: &mut f64, m: &mut f64, v: &mut f64, g: f64| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            *p -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
        };
        for (((layer, g), m), v) in model
            .layers_mut()
            .iter_mut()
            .zip(grads)
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            ndarray::Zip::from(&mut layer.weights)
                .and(&mut m.weights)
                .and(&mut v.weights)
                .and(&g.weights)
                .for_each(|p, m, v, &g| update(p, m, v, g));
            ndarray::Zip::from(&mut layer.bias)
                .and(&mut m.bias)
                .and(&mut v.bias)
                .and(&g.bias)
                .for_each(|p, m, v, &g| update(p, m, v, g));
        }
    }
}
