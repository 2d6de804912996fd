use crate::architectures::ParamMut;
use crate::error::{Error, Result};
use crate::tensor_core::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig {
    pub momentum: f64,
    pub weight_decay: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { momentum: 0.9, weight_decay: 5e-4 }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Invalid(format!("momentum {} outside [0, 1)", self.momentum)));
        }
        if self.weight_decay < 0.0 {
            return Err(Error::Invalid(format!("negative weight decay {}", self.weight_decay)));
        }
        Ok(())
    }
}

/// Momentum SGD; one velocity buffer per parameter, zero until the first step.
#[derive(Debug, Clone)]
pub struct Sgd<T: Real = f32> {
    pub config: OptimizerConfig,
    velocity: Vec<Vec<T>>,
}

impl<T: Real> Sgd<T> {
    pub fn new(config: OptimizerConfig) -> Self {
        Self { config, velocity: Vec::new() }
    }

    pub fn velocity(&self) -> &[Vec<T>] {
        &self.velocity
    }

    /// `g' = g + wd·p` (decaying kinds only), `v ← μ·v + g'`, `p ← p − lr·v`.
    pub fn step(&mut self, params: &mut [ParamMut<'_, T>], grads: &[Option<&[T]>], lr: f64) -> Result<()> {
        if grads.len() != params.len() {
            return Err(Error::shape("sgd_step", format!("{} gradients for {} parameters", grads.len(), params.len())));
        }
        if self.velocity.is_empty() {
            self.velocity = params.iter().map(|p| vec![T::zero(); p.tensor.len()]).collect();
        }
        if self.velocity.len() != params.len() {
            return Err(Error::shape("sgd_step", "parameter list changed between steps"));
        }
        let momentum = T::lit(self.config.momentum);
        let lr = T::lit(lr);
        for ((p, g), v) in params.iter_mut().zip(grads).zip(&mut self.velocity) {
            let g = g.ok_or_else(|| Error::Invalid(format!("missing gradient for {}", p.name)))?;
            if g.len() != p.tensor.len() || v.len() != g.len() {
                return Err(Error::shape("sgd_step", format!("gradient for {} has {} values", p.name, g.len())));
            }
            let decay = T::lit(if p.kind.decays() { self.config.weight_decay } else { 0.0 });
            for ((w, &gi), vi) in p.tensor.data_mut().iter_mut().zip(g).zip(v.iter_mut()) {
                let effective = gi + decay * *w;
                *vi = momentum * *vi + effective;
                *w -= lr * *vi;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::architectures::ParamKind;
    use crate::tensor_core::Tensor;

    fn step_once(opt: &mut Sgd<f64>, p: &mut Tensor<f64>, kind: ParamKind, g: &[f64], lr: f64) {
        let mut params = [ParamMut { name: "p".into(), kind, tensor: p }];
        opt.step(&mut params, &[Some(g)], lr).unwrap();
    }

    #[test]
    fn plain_sgd() {
        let mut opt = Sgd::new(OptimizerConfig { momentum: 0.0, weight_decay: 0.0 });
        let mut p = Tensor::new(&[2], vec![1.0, -2.0]).unwrap();
        step_once(&mut opt, &mut p, ParamKind::Weight, &[0.5, 1.0], 0.1);
        assert_eq!(p.data(), &[1.0 - 0.05, -2.0 - 0.1]);
    }

    #[test]
    fn pure_decay_step() {
        let mut opt = Sgd::new(OptimizerConfig { momentum: 0.9, weight_decay: 5e-4 });
        let mut p = Tensor::new(&[2], vec![2.0, -4.0]).unwrap();
        step_once(&mut opt, &mut p, ParamKind::Bias, &[0.0, 0.0], 0.1);
        for (got, orig) in p.data().iter().zip([2.0, -4.0]) {
            assert!((got - orig * (1.0 - 5e-5)).abs() < 1e-15);
        }
        let mut slope = Tensor::new(&[1], vec![0.25]).unwrap();
        step_once(&mut Sgd::new(OptimizerConfig::default()), &mut slope, ParamKind::Slope, &[0.0], 0.1);
        assert_eq!(slope.data(), &[0.25]);
    }

    #[test]
    fn two_momentum_steps_follow_recurrence() {
        let (mu, lr, g, p0) = (0.9, 0.1, 0.3, 1.0);
        let mut opt = Sgd::new(OptimizerConfig { momentum: mu, weight_decay: 0.0 });
        let mut p = Tensor::new(&[1], vec![p0]).unwrap();
        step_once(&mut opt, &mut p, ParamKind::Weight, &[g], lr);
        step_once(&mut opt, &mut p, ParamKind::Weight, &[g], lr);
        let v1 = g;
        let v2 = mu * v1 + g;
        let want = p0 - lr * v1 - lr * v2;
        assert!((p.data()[0] - want).abs() < 1e-15);
        assert!((opt.velocity()[0][0] - v2).abs() < 1e-15);
    }

    #[test]
    fn missing_gradient_is_rejected() {
        let mut opt = Sgd::<f64>::new(OptimizerConfig::default());
        let mut p = Tensor::new(&[1], vec![1.0]).unwrap();
        let mut params = [ParamMut { name: "p".into(), kind: ParamKind::Weight, tensor: &mut p }];
        assert!(opt.step(&mut params, &[None], 0.1).is_err());
    }
}
