use crate::error::{Error, Result};
use crate::tensor::Tensor;

pub const BETA1: f64 = 0.9;
pub const BETA2: f64 = 0.999;
pub const EPSILON: f64 = 1e-8;

/// Adam with decoupled weight decay: each step first shrinks every
/// parameter by `lr * weight_decay`, then applies the bias-corrected
/// adaptive update.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub weight_decay: f64,
    step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl Adam {
    pub fn new(lr: f64, weight_decay: f64, shapes: &[[usize; 2]]) -> Self {
        let zeros: Vec<Tensor> = shapes.iter().map(|&[r, c]| Tensor::zeros(r, c)).collect();
        Self {
            lr,
            weight_decay,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn moments(&self) -> (&[Tensor], &[Tensor]) {
        (&self.m, &self.v)
    }

    pub fn step(&mut self, params: Vec<&mut Tensor>, grads: &[Tensor]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::dim(
                "optimizer step",
                format!(
                    "{} params, {} grads, {} moment slots",
                    params.len(),
                    grads.len(),
                    self.m.len()
                ),
            ));
        }
        for ((p, g), m) in params.iter().zip(grads).zip(&self.m) {
            if p.shape() != g.shape() || p.shape() != m.shape() {
                return Err(Error::dim(
                    "optimizer step",
                    format!(
                        "param {:?}, grad {:?}, moment {:?}",
                        p.shape(),
                        g.shape(),
                        m.shape()
                    ),
                ));
            }
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - BETA1.powi(t);
        let c2 = 1.0 - BETA2.powi(t);
        let decay = 1.0 - self.lr * self.weight_decay;
        for (((p, g), m), v) in params
            .into_iter()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            let (p, g, m, v) = (p.data_mut(), g.data(), m.data_mut(), v.data_mut());
            for i in 0..p.len() {
                m[i] = BETA1 * m[i] + (1.0 - BETA1) * g[i];
                v[i] = BETA2 * v[i] + (1.0 - BETA2) * g[i] * g[i];
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                p[i] = p[i] * decay - self.lr * m_hat / (v_hat.sqrt() + EPSILON);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut opt = Adam::new(0.1, 0.0, &[[1, 2]]);
        let mut p = Tensor::new(1, 2, vec![1.0, -1.0]).unwrap();
        opt.step(vec![&mut p], &[Tensor::new(1, 2, vec![3.0, -0.5]).unwrap()])
            .unwrap();
        // m_hat = g, v_hat = g^2, so the update is lr * g / (|g| + eps).
        assert!((p.get(0, 0) - (1.0 - 0.1 * 3.0 / (3.0 + EPSILON))).abs() < 1e-15);
        assert!((p.get(0, 1) - (-1.0 + 0.1 * 0.5 / (0.5 + EPSILON))).abs() < 1e-15);
        assert_eq!(opt.steps(), 1);
    }

    #[test]
    fn decoupled_decay_with_zero_gradient() {
        let mut opt = Adam::new(0.01, 0.5, &[[1, 1]]);
        let mut p = Tensor::scalar(2.0);
        opt.step(vec![&mut p], &[Tensor::scalar(0.0)]).unwrap();
        assert_eq!(p.item(), 2.0 * (1.0 - 0.01 * 0.5));
    }

    #[test]
    fn minimizes_a_quadratic() {
        let mut opt = Adam::new(0.05, 0.0, &[[1, 1]]);
        let mut x = Tensor::scalar(3.0);
        for _ in 0..2000 {
            let g = Tensor::scalar(2.0 * (x.item() - 1.0));
            opt.step(vec![&mut x], &[g]).unwrap();
        }
        assert!((x.item() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut opt = Adam::new(0.1, 0.0, &[[1, 2]]);
        let mut p = Tensor::zeros(2, 1);
        assert!(opt.step(vec![&mut p], &[Tensor::zeros(2, 1)]).is_err());
    }
}
