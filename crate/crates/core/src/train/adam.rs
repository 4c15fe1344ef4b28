use crate::tensor::{Gradients, ParamStore, Real};

use super::TrainError;

/// Adam moments and hyperparameters for every parameter of one store.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Real> AdamState<T> {
    pub const BETA1: f64 = 0.9;
    pub const BETA2: f64 = 0.999;
    pub const EPS: f64 = 1e-8;

    /// Zero moments shaped after `store`, default betas and epsilon.
    pub fn new(store: &ParamStore<T>, lr: f64) -> Self {
        let zeros: Vec<Vec<T>> = store.iter().map(|(_, p)| vec![T::zero(); p.value().numel()]).collect();
        AdamState { lr, beta1: Self::BETA1, beta2: Self::BETA2, eps: Self::EPS, t: 0, m: zeros.clone(), v: zeros }
    }

    /// Restores a saved state; moment lengths must match `store`.
    pub fn from_parts(
        store: &ParamStore<T>,
        hyper: [f64; 4],
        t: u64,
        m: Vec<Vec<T>>,
        v: Vec<Vec<T>>,
    ) -> Result<Self, TrainError> {
        let fits = |moments: &[Vec<T>]| {
            moments.len() == store.len() && store.iter().zip(moments).all(|((_, p), mo)| p.value().numel() == mo.len())
        };
        if !fits(&m) || !fits(&v) {
            return Err(TrainError::Checkpoint("optimizer moments do not match the parameters".into()));
        }
        let [lr, beta1, beta2, eps] = hyper;
        Ok(AdamState { lr, beta1, beta2, eps, t, m, v })
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    pub fn first_moments(&self) -> &[Vec<T>] {
        &self.m
    }

    pub fn second_moments(&self) -> &[Vec<T>] {
        &self.v
    }

    /// One bias-corrected update from the gradients of a backward sweep.
    /// Nothing is modified if any gradient is missing or non-finite.
    pub fn step(&mut self, store: &mut ParamStore<T>, grads: &Gradients<T>) -> Result<(), TrainError> {
        if let Some((_, p)) = store.iter().find(|(id, _)| !grads.has_param(*id)) {
            return Err(TrainError::MissingGradient(p.name().to_string()));
        }
        store.zero_grad();
        grads.accumulate_into(store);
        if let Some((_, p)) = store.iter().find(|(_, p)| p.grad().iter().any(|g| !g.is_finite())) {
            return Err(TrainError::NonFiniteGradient(p.name().to_string()));
        }
        self.t += 1;
        let t = self.t as i32;
        let c = |x: f64| T::from_f64_lossy(x);
        let (b1, b2) = (c(self.beta1), c(self.beta2));
        let (one_b1, one_b2) = (c(1.0 - self.beta1), c(1.0 - self.beta2));
        let bc1 = c(1.0 - self.beta1.powi(t));
        let bc2 = c(1.0 - self.beta2.powi(t));
        let (lr, eps) = (c(self.lr), c(self.eps));
        for ((param, m), v) in store.iter_mut().zip(&mut self.m).zip(&mut self.v) {
            let (values, grad) = param.value_and_grad_mut();
            for i in 0..values.len() {
                let g = grad[i];
                m[i] = b1 * m[i] + one_b1 * g;
                v[i] = b2 * v[i] + one_b2 * g * g;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                values[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
