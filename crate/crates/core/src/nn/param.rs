use super::networks::NetworkSpec;
use ndarray::Array2;

/// A trainable tensor with its gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct Param {
    pub value: Array2<f64>,
    pub grad: Array2<f64>,
}

impl Param {
    pub fn new(value: Array2<f64>) -> Self {
        let grad = Array2::zeros(value.raw_dim());
        Self { value, grad }
    }

    pub fn shape(&self) -> (usize, usize) {
        self.value.dim()
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(0.0);
    }
}

pub trait Module {
    fn params(&self) -> Vec<&Param>;
    fn params_mut(&mut self) -> Vec<&mut Param>;
    fn spec(&self) -> NetworkSpec;

    fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    fn num_params(&self) -> usize {
        self.params().iter().map(|p| p.value.len()).sum()
    }
}

/// `target ← β·online + (1 − β)·target`
pub fn soft_update<M: Module>(target: &mut M, online: &M, beta: f64) {
    for (t, o) in target.params_mut().into_iter().zip(online.params()) {
        t.value.zip_mut_with(&o.value, |t, &o| *t = beta * o + (1.0 - beta) * *t);
    }
}

/// Online network and its slowly tracking target copy.
#[derive(Debug, Clone)]
pub struct TargetPair<M> {
    pub online: M,
    pub target: M,
}

impl<M: Module + Clone> TargetPair<M> {
    pub fn new(online: M) -> Self {
        let target = online.clone();
        Self { online, target }
    }

    pub fn soft_update(&mut self, beta: f64) {
        soft_update(&mut self.target, &self.online, beta);
    }
}
