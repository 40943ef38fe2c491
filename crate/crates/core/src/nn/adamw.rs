use serde::{Deserialize, Serialize};

use crate::{Error, Real, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamWConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        Self {
            lr: 1e-5,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 1e-2,
        }
    }
}

impl AdamWConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.lr >= 0.0
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.eps > 0.0
            && self.weight_decay >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidConfig(format!("bad optimizer settings {self:?}")))
        }
    }
}

/// AdamW with decoupled weight decay:
/// `p ← p − lr·(m̂/(√v̂ + ε) + wd·p)`.
///
/// Moment buffers are kept in `f64` per parameter tensor; the tensor list
/// must have the same shapes on every call.
#[derive(Debug, Clone)]
pub struct AdamW {
    config: AdamWConfig,
    step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamW {
    pub fn new(config: AdamWConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            step: 0,
            m: Vec::new(),
            v: Vec::new(),
        })
    }

    pub fn config(&self) -> &AdamWConfig {
        &self.config
    }

    pub fn set_lr(&mut self, lr: f64) {
        self.config.lr = lr;
    }

    pub fn steps_taken(&self) -> u64 {
        self.step
    }

    /// First and second moment buffers, one pair per tensor.
    pub fn moments(&self) -> (&[Vec<f64>], &[Vec<f64>]) {
        (&self.m, &self.v)
    }

    pub fn restore(config: AdamWConfig, step: u64, m: Vec<Vec<f64>>, v: Vec<Vec<f64>>) -> Result<Self> {
        config.validate()?;
        if m.len() != v.len() || m.iter().zip(&v).any(|(a, b)| a.len() != b.len()) {
            return Err(Error::InvalidInput("optimizer moment shapes disagree".into()));
        }
        Ok(Self { config, step, m, v })
    }

    /// One update over all tensors. Non-finite gradients, or parameters that
    /// become non-finite, abort with [`Error::Divergence`]; in the first case
    /// nothing is modified.
    pub fn step<F: Real>(&mut self, params: &mut [&mut [F]], grads: &[&[F]]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::Shape {
                expected: params.len(),
                actual: grads.len(),
            });
        }
        for (p, g) in params.iter().zip(grads) {
            if p.len() != g.len() {
                return Err(Error::Shape {
                    expected: p.len(),
                    actual: g.len(),
                });
            }
        }
        if self.m.is_empty() {
            self.m = params.iter().map(|p| vec![0.0; p.len()]).collect();
            self.v = self.m.clone();
        } else if self.m.len() != params.len() || self.m.iter().zip(params.iter()).any(|(m, p)| m.len() != p.len()) {
            return Err(Error::InvalidInput(
                "parameter tensors changed shape between optimizer steps".into(),
            ));
        }
        if grads.iter().any(|g| g.iter().any(|v| !v.is_finite())) {
            return Err(Error::Divergence(format!(
                "non-finite gradient at step {}",
                self.step + 1
            )));
        }
        self.step += 1;
        let AdamWConfig {
            lr,
            beta1,
            beta2,
            eps,
            weight_decay,
        } = self.config;
        if lr == 0.0 {
            // moments still advance; parameters stay bit-identical
            for ((g, m), v) in grads.iter().zip(&mut self.m).zip(&mut self.v) {
                for ((gi, mi), vi) in g.iter().zip(m.iter_mut()).zip(v.iter_mut()) {
                    let gf = gi.f64();
                    *mi = beta1 * *mi + (1.0 - beta1) * gf;
                    *vi = beta2 * *vi + (1.0 - beta2) * gf * gf;
                }
            }
            return Ok(());
        }
        let t = self.step as i32;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);
        let mut finite = true;
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            for (((pi, gi), mi), vi) in p.iter_mut().zip(g.iter()).zip(m.iter_mut()).zip(v.iter_mut()) {
                let gf = gi.f64();
                *mi = beta1 * *mi + (1.0 - beta1) * gf;
                *vi = beta2 * *vi + (1.0 - beta2) * gf * gf;
                let m_hat = *mi / bc1;
                let v_hat = *vi / bc2;
                let pf = pi.f64();
                let next = pf - lr * (m_hat / (v_hat.sqrt() + eps) + weight_decay * pf);
                *pi = F::of(next);
                finite &= pi.is_finite();
            }
        }
        if !finite {
            return Err(Error::Divergence(format!(
                "non-finite parameter after step {}",
                self.step
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;

    use super::*;

    #[test]
    fn first_step_moves_by_lr() {
        let cfg = AdamWConfig {
            lr: 0.1,
            weight_decay: 0.0,
            ..Default::default()
        };
        let mut opt = AdamW::new(cfg).unwrap();
        let mut p = vec![1.0f64, -2.0];
        let g = vec![3.0, -0.5];
        opt.step(&mut [p.as_mut_slice()], &[g.as_slice()]).unwrap();
        // m̂ = g, v̂ = g², so the update is lr·g/(|g| + ε)
        assert_abs_diff_eq!(p[0], 1.0 - 0.1 * 3.0 / (3.0 + 1e-8), epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], -2.0 + 0.1 * 0.5 / (0.5 + 1e-8), epsilon = 1e-12);
    }

    #[test]
    fn decay_only() {
        let cfg = AdamWConfig {
            lr: 0.5,
            weight_decay: 0.1,
            ..Default::default()
        };
        let mut opt = AdamW::new(cfg).unwrap();
        let mut p = vec![2.0f64];
        opt.step(&mut [p.as_mut_slice()], &[&[0.0]]).unwrap();
        assert_abs_diff_eq!(p[0], 2.0 - 0.5 * 0.1 * 2.0, epsilon = 1e-15);
    }

    #[test]
    fn zero_lr_is_identity() {
        let mut opt = AdamW::new(AdamWConfig {
            lr: 0.0,
            ..Default::default()
        })
        .unwrap();
        let mut p = vec![0.123f32, 4.5];
        let before = p.clone();
        for _ in 0..3 {
            opt.step(&mut [p.as_mut_slice()], &[&[1.0, -7.0]]).unwrap();
        }
        assert_eq!(p, before);
    }

    #[test]
    fn nan_gradient_is_divergence() {
        let mut opt = AdamW::new(AdamWConfig::default()).unwrap();
        let mut p = vec![1.0f32];
        let err = opt.step(&mut [p.as_mut_slice()], &[&[f32::NAN]]).unwrap_err();
        assert!(matches!(err, Error::Divergence(_)));
        assert_eq!(p, vec![1.0]);
    }

    #[test]
    fn rejects_bad_config() {
        assert!(AdamW::new(AdamWConfig {
            beta1: 1.0,
            ..Default::default()
        })
        .is_err());
    }
}
