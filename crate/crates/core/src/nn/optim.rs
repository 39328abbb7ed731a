use serde::{Deserialize, Serialize};

use crate::nn::{ParamStore, Real};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum DecayUnit {
    #[default]
    PerEpoch,
}

/// SGD with classical momentum.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    /// Multiplicative learning-rate factor applied once per `decay_unit`.
    pub decay: f64,
    pub decay_unit: DecayUnit,
    /// Rescale the whole gradient to at most this L2 norm before stepping.
    pub clip_norm: Option<f64>,
}

impl Default for OptConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            momentum: 0.9,
            decay: 0.95,
            decay_unit: DecayUnit::PerEpoch,
            clip_norm: None,
        }
    }
}

impl OptConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Invalid(format!(
                "learning_rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Invalid(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(Error::Invalid(format!("decay must lie in (0, 1], got {}", self.decay)));
        }
        if let Some(c) = self.clip_norm {
            if !(c > 0.0 && c.is_finite()) {
                return Err(Error::Invalid(format!("clip_norm must be positive, got {c}")));
            }
        }
        Ok(())
    }
}

/// Global L2 norm of every gradient in the store.
pub fn grad_norm<T: Real>(params: &ParamStore<T>) -> f64 {
    params
        .iter()
        .flat_map(|p| p.grad.iter())
        .map(|g| g.f64().powi(2))
        .sum::<f64>()
        .sqrt()
}

/// `v ← m·v − lr·g; θ ← θ + v`, then zero the gradients.
///
/// All gradients are checked before anything moves, so a NaN leaves the
/// store untouched.
pub fn sgd_momentum_step<T: Real>(params: &mut ParamStore<T>, cfg: &OptConfig) -> Result<()> {
    cfg.validate()?;
    if let Some(bad) = params.iter().find(|p| p.grad.iter().any(|g| !g.is_finite())) {
        return Err(Error::NonFinite(format!("{} (gradient)", bad.name)));
    }
    let mut lr = T::of(cfg.learning_rate);
    if let Some(c) = cfg.clip_norm {
        let n = grad_norm(params);
        if n > c {
            lr *= T::of(c / n);
        }
    }
    let mom = T::of(cfg.momentum);
    for p in params.iter_mut() {
        let theta = p.value.data_mut();
        for ((t, v), g) in theta.iter_mut().zip(p.momentum.iter_mut()).zip(p.grad.iter_mut()) {
            *v = mom * *v - lr * *g;
            *t += *v;
            *g = T::zero();
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::TensorBuf;

    fn scalar_store() -> ParamStore<f64> {
        let mut s = ParamStore::new();
        s.insert("theta", TensorBuf::zeros(&[1])).unwrap();
        s
    }

    fn cfg(lr: f64, momentum: f64) -> OptConfig {
        OptConfig {
            learning_rate: lr,
            momentum,
            ..OptConfig::default()
        }
    }

    #[test]
    fn plain_step() {
        let mut s = scalar_store();
        s.param_mut(0).grad[0] = 1.0;
        sgd_momentum_step(&mut s, &cfg(0.1, 0.0)).unwrap();
        assert!((s.value(0)[0] + 0.1).abs() < 1e-15);
        assert_eq!(s.param(0).grad[0], 0.0);
    }

    #[test]
    fn momentum_recurrence() {
        let mut s = scalar_store();
        let c = cfg(0.1, 0.9);
        s.param_mut(0).grad[0] = 1.0;
        sgd_momentum_step(&mut s, &c).unwrap();
        assert!((s.value(0)[0] + 0.1).abs() < 1e-15);
        s.param_mut(0).grad[0] = 1.0;
        sgd_momentum_step(&mut s, &c).unwrap();
        assert!((s.value(0)[0] + 0.29).abs() < 1e-12);
        // zero gradient: coasts on v = -0.19
        sgd_momentum_step(&mut s, &c).unwrap();
        assert!((s.value(0)[0] - (-0.29 - 0.9 * 0.19)).abs() < 1e-12);
    }

    #[test]
    fn zero_gradient_zero_velocity_is_fixed_point() {
        let mut s = scalar_store();
        s.param_mut(0).value.data_mut()[0] = 0.5;
        sgd_momentum_step(&mut s, &cfg(0.1, 0.9)).unwrap();
        assert_eq!(s.value(0)[0], 0.5);
    }

    #[test]
    fn nan_gradient_names_tensor() {
        let mut s = scalar_store();
        s.param_mut(0).grad[0] = f64::NAN;
        let err = sgd_momentum_step(&mut s, &cfg(0.1, 0.9)).unwrap_err();
        assert!(err.to_string().contains("theta"));
        assert_eq!(s.value(0)[0], 0.0);
    }

    #[test]
    fn clipping_caps_the_step() {
        let mut s = ParamStore::<f64>::new();
        s.insert("a", TensorBuf::zeros(&[2])).unwrap();
        s.param_mut(0).grad.copy_from_slice(&[3.0, 4.0]);
        let c = OptConfig { clip_norm: Some(1.0), ..cfg(1.0, 0.0) };
        sgd_momentum_step(&mut s, &c).unwrap();
        assert!((s.value(0)[0] + 0.6).abs() < 1e-12 && (s.value(0)[1] + 0.8).abs() < 1e-12);
        // below the cap nothing changes
        s.param_mut(0).grad.copy_from_slice(&[0.3, 0.4]);
        sgd_momentum_step(&mut s, &OptConfig { clip_norm: Some(1.0), ..cfg(1.0, 0.0) }).unwrap();
        assert!((s.value(0)[0] + 0.9).abs() < 1e-12);
    }

    #[test]
    fn config_validation() {
        assert!(cfg(0.0, 0.5).validate().is_err());
        assert!(cfg(0.1, 1.0).validate().is_err());
        assert!(OptConfig { decay: 0.0, ..OptConfig::default() }.validate().is_err());
        assert!(OptConfig::default().validate().is_ok());
    }
}
