use super::param::Param;
use crate::error::{Error, Result};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

/// Adam optimiser (descends the accumulated gradients).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    #[serde(skip)]
    pub(crate) m: Vec<Array2<f64>>,
    #[serde(skip)]
    pub(crate) v: Vec<Array2<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: Vec::new(), v: Vec::new() }
    }

    pub fn moments(&self) -> (&[Array2<f64>], &[Array2<f64>]) {
        (&self.m, &self.v)
    }

    pub(crate) fn set_moments(&mut self, m: Vec<Array2<f64>>, v: Vec<Array2<f64>>) {
        self.m = m;
        self.v = v;
    }

    pub fn step(&mut self, params: Vec<&mut Param>) -> Result<()> {
        if params.iter().any(|p| p.grad.iter().any(|g| !g.is_finite())) {
            return Err(Error::Divergence("non-finite gradient".into()));
        }
        if self.m.len() != params.len() {
            self.m = params.iter().map(|p| Array2::zeros(p.value.raw_dim())).collect();
            self.v = self.m.clone();
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        let (b1, b2, lr, eps) = (self.beta1, self.beta2, self.lr, self.eps);
        for ((p, m), v) in params.into_iter().zip(&mut self.m).zip(&mut self.v) {
            ndarray::Zip::from(&mut p.value).and(&p.grad).and(m).and(v).for_each(|w, &g, m, v| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                *w -= lr * (*m / c1) / ((*v / c2).sqrt() + eps);
            });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut p = Param::new(array![[1.0, -2.0], [0.5, 3.0]]);
        let before = p.value.clone();
        let mut adam = Adam::new(1e-3);
        adam.step(vec![&mut p]).unwrap();
        assert_eq!(p.value, before);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = Param::new(array![[1.0]]);
        p.grad = array![[4.0]];
        let mut adam = Adam::new(0.1);
        adam.step(vec![&mut p]).unwrap();
        assert!((p.value[[0, 0]] - 0.9).abs() < 1e-6);
    }

    #[test]
    fn non_finite_gradient_is_rejected() {
        let mut p = Param::new(array![[1.0]]);
        p.grad = array![[f64::NAN]];
        assert!(matches!(Adam::new(0.1).step(vec![&mut p]), Err(Error::Divergence(_))));
        assert_eq!(p.value, array![[1.0]]);
    }
}
