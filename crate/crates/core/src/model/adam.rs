use ndarray::{Array, Dimension, Zip};

use super::network::Layer;

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone)]
pub(crate) struct Adam {
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    step: i32,
    first: Vec<Layer>,
    second: Vec<Layer>,
}

impl Adam {
    pub(crate) fn new(learning_rate: f64, layers: &[Layer]) -> Self {
        Self {
            learning_rate,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            first: layers.iter().map(Layer::zeros_like).collect(),
            second: layers.iter().map(Layer::zeros_like).collect(),
        }
    }

    pub(crate) fn step(&mut self, layers: &mut [Layer], grads: &[Layer]) {
        self.step += 1;
        let lr = self.learning_rate;
        let (b1, b2, eps) = (self.beta1, self.beta2, self.epsilon);
        let c1 = 1.0 - b1.powi(self.step);
        let c2 = 1.0 - b2.powi(self.step);
        for (((p, g), m), v) in layers
            .iter_mut()
            .zip(grads)
            .zip(&mut self.first)
            .zip(&mut self.second)
        {
            update(&mut p.weight, &g.weight, &mut m.weight, &mut v.weight, lr, b1, b2, eps, c1, c2);
            update(&mut p.bias, &g.bias, &mut m.bias, &mut v.bias, lr, b1, b2, eps, c1, c2);
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn update<D: Dimension>(
    param: &mut Array<f64, D>,
    grad: &Array<f64, D>,
    m: &mut Array<f64, D>,
    v: &mut Array<f64, D>,
    lr: f64,
    b1: f64,
    b2: f64,
    eps: f64,
    c1: f64,
    c2: f64,
) {
    Zip::from(param)
        .and(grad)
        .and(m)
        .and(v)
        .for_each(|p, &g, m, v| {
            *m = b1 * *m + (1.0 - b1) * g;
            *v = b2 * *v + (1.0 - b2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            *p -= lr * m_hat / (v_hat.sqrt() + eps);
        });
}
