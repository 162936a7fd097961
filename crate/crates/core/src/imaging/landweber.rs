use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{GridSpec, ImageGrid, SurfaceOperator, VisibilitySurface};
use crate::error::{Error, Result};

/// Consecutive residual increases tolerated before giving up.
const DIVERGENCE_STREAK: usize = 5;
/// Residuals this small relative to the initial one are at rounding level.
const RESIDUAL_FLOOR: f64 = 1e-13;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LandweberConfig {
    pub max_iters: usize,
    /// Stop when the relative change of the residual norm drops below this.
    pub tol: f64,
    /// Step size; `None` uses `0.9 / sigma_max^2`.
    pub relaxation: Option<f64>,
}

impl Default for LandweberConfig {
    fn default() -> Self {
        Self { max_iters: 500, tol: 1e-6, relaxation: None }
    }
}

impl LandweberConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::config("max_iters", "must be positive"));
        }
        if !(self.tol >= 0.0 && self.tol.is_finite()) {
            return Err(Error::config("tol", "must be nonnegative"));
        }
        if let Some(t) = self.relaxation {
            if !(t > 0.0 && t.is_finite()) {
                return Err(Error::config("relaxation", "must be positive"));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LandweberResult {
    pub image: ImageGrid,
    /// `||W - F f_k||` for `k = 0, 1, ...`, starting from `f_0 = 0`.
    pub residual_history: Vec<f64>,
    pub relaxation: f64,
}

impl LandweberResult {
    pub fn iterations(&self) -> usize {
        self.residual_history.len() - 1
    }

    pub fn is_monotone(&self) -> bool {
        self.residual_history.windows(2).all(|w| w[1] <= w[0])
    }
}

fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// Projected Landweber iteration `f <- max(f + tau Re F^H (W - F f), 0)` from `f = 0`.
pub fn projected_landweber(surface: &VisibilitySurface, spec: GridSpec, config: &LandweberConfig) -> Result<LandweberResult> {
    config.validate()?;
    let op = SurfaceOperator::new(spec, surface.frequencies().to_vec());
    let target = surface.values();

    let (re, im) = op.adjoint_parts(target)?;
    let (re_norm, im_norm) = (re.iter().map(|v| v * v).sum::<f64>().sqrt(), im.iter().map(|v| v * v).sum::<f64>().sqrt());
    if im_norm > 1e-6 * re_norm {
        log::warn!("back-projected surface has a relative imaginary part of {:.3e}", im_norm / re_norm);
    }

    let tau = match config.relaxation {
        Some(t) => t,
        None => {
            let sigma = op.spectral_norm();
            if sigma == 0.0 {
                return Err(Error::Breakdown("Fourier operator vanishes".into()));
            }
            0.9 / (sigma * sigma)
        }
    };

    let mut flux = vec![0.0; spec.size * spec.size];
    let mut residual: Vec<Complex64> = target.to_vec();
    let mut history = vec![norm(&residual)];
    let mut streak = 0;
    for _ in 0..config.max_iters {
        let grad = op.adjoint(&residual)?;
        for (f, g) in flux.iter_mut().zip(&grad) {
            *f = (*f + tau * g).max(0.0);
        }
        let predicted = op.apply(&flux)?;
        for ((r, t), p) in residual.iter_mut().zip(target).zip(&predicted) {
            *r = t - p;
        }
        let prev = *history.last().unwrap();
        let current = norm(&residual);
        history.push(current);
        if current > prev {
            streak += 1;
            if streak >= DIVERGENCE_STREAK {
                return Err(Error::StepSize { iterations: history.len() - 1 });
            }
        } else {
            streak = 0;
        }
        if current <= RESIDUAL_FLOOR * history[0] || (prev - current).abs() < config.tol * prev {
            break;
        }
    }
    Ok(LandweberResult { image: ImageGrid::new(spec, flux)?, residual_history: history, relaxation: tau })
}
