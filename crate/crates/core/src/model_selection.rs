//! Shape parameter selection by leave-one-out cross validation.
//!
//! Leave-one-out residuals come from Rippa's identity `e_i = c_i / (K^{-1})_{ii}`,
//! which equals `f_i - R^{(-i)}(x_i)` without refitting.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interpolation::{augment_nodes, gram_from_augmented, NodeSet};
use crate::kernels::{distance, Profile, RadialKernel};
use crate::linalg::{SpdFactor, CONDITION_LIMIT};
use crate::scalings::AugmentedMap;

/// Grid of candidate shape parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawLoocv", into = "RawLoocv")]
pub struct LoocvConfig {
    epsilon_grid: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLoocv {
    epsilon_grid: Vec<f64>,
}

impl TryFrom<RawLoocv> for LoocvConfig {
    type Error = Error;
    fn try_from(r: RawLoocv) -> Result<Self> {
        LoocvConfig::new(r.epsilon_grid)
    }
}

impl From<LoocvConfig> for RawLoocv {
    fn from(c: LoocvConfig) -> Self {
        RawLoocv { epsilon_grid: c.epsilon_grid }
    }
}

impl Default for LoocvConfig {
    /// 200 equispaced values in `[0.01, 50]`.
    fn default() -> Self {
        Self::linspace(0.01, 50.0, 200).expect("valid default grid")
    }
}

impl LoocvConfig {
    pub fn new(epsilon_grid: Vec<f64>) -> Result<Self> {
        if epsilon_grid.is_empty() {
            return Err(Error::config("epsilon_grid", "must not be empty"));
        }
        if epsilon_grid.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(Error::config("epsilon_grid", "values must be positive and finite"));
        }
        if epsilon_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("epsilon_grid", "values must be strictly increasing"));
        }
        Ok(Self { epsilon_grid })
    }

    /// `count` equispaced values from `lower` to `upper` inclusive.
    pub fn linspace(lower: f64, upper: f64, count: usize) -> Result<Self> {
        let grid = match count {
            0 => Vec::new(),
            1 => vec![lower],
            _ => (0..count).map(|i| lower + (upper - lower) * i as f64 / (count - 1) as f64).collect(),
        };
        Self::new(grid)
    }

    pub fn epsilon_grid(&self) -> &[f64] {
        &self.epsilon_grid
    }
}

/// Leave-one-out residuals `f_i - R^{(-i)}(x_i)` for every node.
pub fn loo_errors(kernel: &RadialKernel, map: &AugmentedMap, nodes: &NodeSet, values: &[f64]) -> Result<Vec<f64>> {
    if nodes.len() < 2 {
        return Err(Error::Invalid("leave-one-out needs at least two nodes".into()));
    }
    if values.len() != nodes.len() {
        return Err(Error::Shape { expected: nodes.len(), found: values.len() });
    }
    let aug = augment_nodes(map, nodes)?;
    let k = gram_from_augmented(kernel, &aug, nodes.dim() + 1);
    let factor = checked_factor(&k)?;
    Ok(rippa(&factor, &k, values))
}

fn checked_factor(k: &DMatrix<f64>) -> Result<SpdFactor> {
    let factor = SpdFactor::new(k)?;
    let bound = factor.pivot_condition_bound();
    if !(bound <= CONDITION_LIMIT) {
        return Err(Error::IllConditioned { estimate: bound });
    }
    Ok(factor)
}

fn rippa(factor: &SpdFactor, k: &DMatrix<f64>, values: &[f64]) -> Vec<f64> {
    let c = factor.solve_refined(k, &DVector::from_column_slice(values));
    let diag = factor.inverse_diagonal();
    c.iter().zip(diag.iter()).map(|(ci, di)| ci / di).collect()
}

/// Result of a grid search over the shape parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonSelection {
    pub best_epsilon: f64,
    /// `(epsilon, leave-one-out RMSE)` for every grid value; rejected values score `+inf`.
    pub score_curve: Vec<(f64, f64)>,
    /// Grid values whose factorization failed or was too ill-conditioned, with the reason.
    pub failures: Vec<(f64, String)>,
}

/// Picks the grid value minimizing the leave-one-out RMSE; ties go to the smaller value.
pub fn select_epsilon(
    config: &LoocvConfig,
    profile: Profile,
    map: &AugmentedMap,
    nodes: &NodeSet,
    values: &[f64],
) -> Result<EpsilonSelection> {
    select_epsilon_joint(config, profile, map, nodes, &[values])
}

/// Like [`select_epsilon`], scoring several data vectors on the same nodes with one shared value.
///
/// The score is the RMSE over all leave-one-out residuals of all vectors.
pub fn select_epsilon_joint(
    config: &LoocvConfig,
    profile: Profile,
    map: &AugmentedMap,
    nodes: &NodeSet,
    values: &[&[f64]],
) -> Result<EpsilonSelection> {
    if nodes.len() < 2 {
        return Err(Error::Invalid("leave-one-out needs at least two nodes".into()));
    }
    if values.is_empty() {
        return Err(Error::Invalid("no data vectors to score".into()));
    }
    if let Some(v) = values.iter().find(|v| v.len() != nodes.len()) {
        return Err(Error::Shape { expected: nodes.len(), found: v.len() });
    }
    let stride = nodes.dim() + 1;
    let aug = augment_nodes(map, nodes)?;
    let n = nodes.len();
    let dist = DMatrix::from_fn(n, n, |i, j| distance(&aug[i * stride..(i + 1) * stride], &aug[j * stride..(j + 1) * stride]));

    let mut score_curve = Vec::with_capacity(config.epsilon_grid.len());
    let mut failures = Vec::new();
    let mut best: Option<(f64, f64)> = None;
    for &eps in &config.epsilon_grid {
        let kernel = RadialKernel::new(profile, eps)?;
        let k = dist.map(|r| kernel.phi(r));
        let score = match checked_factor(&k) {
            Ok(factor) => {
                let (ss, count) = values.iter().fold((0.0, 0usize), |(ss, count), v| {
                    let e = rippa(&factor, &k, v);
                    (ss + e.iter().map(|x| x * x).sum::<f64>(), count + e.len())
                });
                let s = (ss / count as f64).sqrt();
                if s.is_finite() {
                    s
                } else {
                    failures.push((eps, "non-finite leave-one-out residuals".to_string()));
                    f64::INFINITY
                }
            }
            Err(e) => {
                failures.push((eps, e.to_string()));
                f64::INFINITY
            }
        };
        if score.is_finite() && best.is_none_or(|(_, s)| score < s) {
            best = Some((eps, score));
        }
        score_curve.push((eps, score));
    }
    match best {
        Some((best_epsilon, _)) => Ok(EpsilonSelection { best_epsilon, score_curve, failures }),
        None => Err(Error::Selection { failures }),
    }
}
