use serde::{Deserialize, Serialize};

use super::{Matrix, Param};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Adam with bias correction. Moment buffers follow the parameter order
/// passed to [`Adam::step`], which must stay fixed across steps.
#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub config: AdamConfig,
    pub step: u64,
    pub first: Vec<Matrix>,
    pub second: Vec<Matrix>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Adam {
            config,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn step(&mut self, params: &mut [&mut Param]) {
        let active = vec![true; params.len()];
        self.step_active(params, &active);
    }

    /// Like [`Adam::step`], but parameters whose `active` flag is false are left
    /// untouched, moments included.
    pub fn step_active(&mut self, params: &mut [&mut Param], active: &[bool]) {
        assert_eq!(params.len(), active.len());
        if self.first.is_empty() {
            for p in params.iter() {
                let (r, c) = p.shape();
                self.first.push(Matrix::zeros(r, c));
                self.second.push(Matrix::zeros(r, c));
            }
        }
        assert_eq!(self.first.len(), params.len(), "parameter list changed between steps");
        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);
        for (((p, m), v), _) in params
            .iter_mut()
            .zip(&mut self.first)
            .zip(&mut self.second)
            .zip(active)
            .filter(|(_, &on)| on)
        {
            let grads = p.grad.data();
            let values = p.value.data_mut();
            for (((w, &g), mi), vi) in values
                .iter_mut()
                .zip(grads)
                .zip(m.data_mut())
                .zip(v.data_mut())
            {
                *mi = beta1 * *mi + (1.0 - beta1) * g;
                *vi = beta2 * *vi + (1.0 - beta2) * g * g;
                let mhat = *mi / c1;
                let vhat = *vi / c2;
                *w -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr_against_gradient_sign() {
        let mut p = Param::new(Matrix::from_vec(1, 2, vec![1.0, 1.0]).unwrap());
        p.grad = Matrix::from_vec(1, 2, vec![0.3, -5.0]).unwrap();
        let mut adam = Adam::new(AdamConfig { lr: 0.1, ..Default::default() });
        adam.step(&mut [&mut p]);
        assert!((p.value[(0, 0)] - 0.9).abs() < 1e-6);
        assert!((p.value[(0, 1)] - 1.1).abs() < 1e-6);
    }

    #[test]
    fn inactive_params_do_not_move() {
        let mut a = Param::new(Matrix::filled(1, 1, 1.0));
        let mut b = Param::new(Matrix::filled(1, 1, 1.0));
        a.grad[(0, 0)] = 1.0;
        b.grad[(0, 0)] = 1.0;
        let mut adam = Adam::new(AdamConfig::default());
        adam.step(&mut [&mut a, &mut b]);
        let before = (b.value.clone(), adam.first[1].clone());
        a.zero_grad();
        b.zero_grad();
        adam.step_active(&mut [&mut a, &mut b], &[true, false]);
        assert_eq!((b.value.clone(), adam.first[1].clone()), before);
        assert_ne!(a.value[(0, 0)], 1.0 - 1e-3);
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut p = Param::new(Matrix::from_vec(1, 1, vec![5.0]).unwrap());
        let mut adam = Adam::new(AdamConfig { lr: 0.1, ..Default::default() });
        for _ in 0..500 {
            p.zero_grad();
            p.grad[(0, 0)] = 2.0 * (p.value[(0, 0)] - 2.0);
            adam.step(&mut [&mut p]);
        }
        assert!((p.value[(0, 0)] - 2.0).abs() < 1e-2);
    }
}
