//! Discontinuous interpolation benchmark on `[-1, 1]^2`.
//!
//! Nodes are drawn from a normal distribution with covariance `0.1 I`
//! (points outside the square are dropped), the target function jumps across
//! the lines `x_1 = -0.3, 0, 0.5`, and three kernel variants are compared:
//!
//! * `classical`: identity map, constant scaling;
//! * `vsdk`: identity map, piecewise constant scaling matching the jumps;
//! * `mvsdk`: the same scaling plus the erf map that spreads the clustered nodes.
//!
//! For every `N` a fresh node set is drawn from its own random stream, so
//! node sets for different `N` are not nested.

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interpolation::{fit_with, FitOptions, NodeSet};
use crate::kernels::{Profile, RadialKernel};
use crate::metrics::{fill_distance, max_abs_error, regional_distances, rmse, separation_distance, DomainBox};
use crate::model_selection::{select_epsilon, EpsilonSelection, LoocvConfig};
use crate::scalings::{AugmentedMap, NodeMap, Partition, PiecewiseConstant, ScalingFunction};

/// Discontinuity lines of the target function, `x_1 = t`.
pub const JUMP_LINES: [f64; 3] = [-0.3, 0.0, 0.5];

/// Per-axis variance of the node distribution.
pub const NODE_VARIANCE: f64 = 0.1;

/// Evaluation points this close to a jump line are nudged off it.
const JUMP_SNAP: f64 = 1e-12;
const JUMP_NUDGE: f64 = 1e-9;

/// Piecewise target function with jumps across `x_1 = -0.3, 0, 0.5`.
pub fn target_f(x: &[f64]) -> f64 {
    let (x1, x2) = (x[0], x[1]);
    if x1 < -0.3 {
        x1 + x2
    } else if (0.0..0.5).contains(&x1) {
        (x1 - 2.0 * x2).sin()
    } else {
        0.0
    }
}

/// The partition of the square into the four strips between jump lines.
pub fn jump_partition() -> Partition {
    Partition::along_axis(0, JUMP_LINES.to_vec()).expect("sorted thresholds")
}

/// Scaling function with values 0, 1, 2, 3 on the four strips.
pub fn shape_function() -> ScalingFunction {
    ScalingFunction::PiecewiseConstant(
        PiecewiseConstant::new(jump_partition(), vec![0.0, 1.0, 2.0, 3.0]).expect("distinct neighbor values"),
    )
}

/// `S(x) = erf(x / sqrt(2 * 0.1))` coordinatewise.
pub fn erf_map() -> NodeMap {
    NodeMap::erf_isotropic(2, 0.0, NODE_VARIANCE).expect("positive variance")
}

/// Normal deviates by the Box-Muller transform on ChaCha20 uniforms.
///
/// Uniforms are `random::<f64>()` values (53 random bits in `[0, 1)`); the
/// first uniform of each pair is reflected to `(0, 1]` before the logarithm.
pub struct BoxMuller {
    rng: ChaCha20Rng,
    spare: Option<f64>,
}

impl BoxMuller {
    /// Generator for `seed` on the given stream.
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, spare: None }
    }

    pub fn next_normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        let u1 = 1.0 - self.rng.random::<f64>();
        let u2 = self.rng.random::<f64>();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        self.spare = Some(radius * angle.sin());
        radius * angle.cos()
    }
}

/// Draws `n` points from `N(0, 0.1 I)` and keeps those inside `[-1, 1]^2`.
///
/// The stream is selected by `n`, so different sizes give unrelated sets.
pub fn sample_gaussian_nodes(n: usize, seed: u64) -> Result<NodeSet> {
    if n == 0 {
        return Err(Error::Invalid("node count must be positive".into()));
    }
    let mut gen = BoxMuller::new(seed, n as u64);
    let sd = NODE_VARIANCE.sqrt();
    let mut coords = Vec::with_capacity(2 * n);
    for _ in 0..n {
        let p = [sd * gen.next_normal(), sd * gen.next_normal()];
        if p.iter().all(|v| (-1.0..=1.0).contains(v)) {
            coords.extend_from_slice(&p);
        }
    }
    if coords.is_empty() {
        return Err(Error::Invalid(format!("no sample of {n} fell inside the domain")));
    }
    NodeSet::new(2, coords)
}

/// Kernel variant compared by the benchmark.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Classical,
    Vsdk,
    Mvsdk,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Classical, Variant::Vsdk, Variant::Mvsdk];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Classical => "classical",
            Variant::Vsdk => "vsdk",
            Variant::Mvsdk => "mvsdk",
        }
    }

    pub fn augmented_map(self) -> AugmentedMap {
        match self {
            Variant::Classical => AugmentedMap::classical(),
            Variant::Vsdk => AugmentedMap::variably_scaled(shape_function()),
            Variant::Mvsdk => AugmentedMap::new(erf_map(), shape_function()).expect("valid map"),
        }
    }
}

/// Uniform shape-parameter grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpsilonGrid {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
}

impl Default for EpsilonGrid {
    fn default() -> Self {
        Self { lower: 0.01, upper: 50.0, count: 200 }
    }
}

impl EpsilonGrid {
    pub fn to_config(&self) -> Result<LoocvConfig> {
        LoocvConfig::linspace(self.lower, self.upper, self.count).map_err(|e| match e {
            Error::Config { message, .. } => Error::config("loocv", message),
            e => e,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub n_values: Vec<usize>,
    /// Points per axis of the evaluation grid.
    pub eval_grid: usize,
    pub seed: u64,
    pub kernels: Vec<Profile>,
    pub variants: Vec<Variant>,
    pub loocv: EpsilonGrid,
    /// Points per axis of the grid approximating the fill distance.
    pub fill_resolution: usize,
    /// Half width of the band around each jump line used for the near-jump error.
    pub band_half_width: f64,
    pub ridge: f64,
    pub output_dir: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n_values: (1..=50).map(|k| 10 * k).collect(),
            eval_grid: 80,
            seed: 0,
            kernels: vec![Profile::WendlandC0, Profile::MaternC6],
            variants: Variant::ALL.to_vec(),
            loocv: EpsilonGrid::default(),
            fill_resolution: crate::metrics::DEFAULT_FILL_RESOLUTION,
            band_half_width: 0.025,
            ridge: 0.0,
            output_dir: None,
        }
    }
}

impl ExperimentConfig {
    pub const KEYS: &'static [&'static str] = &[
        "n_values",
        "eval_grid",
        "seed",
        "kernels",
        "variants",
        "loocv",
        "fill_resolution",
        "band_half_width",
        "ridge",
        "output_dir",
    ];

    pub fn validate(&self) -> Result<()> {
        if self.n_values.is_empty() || self.n_values[0] == 0 || self.n_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::config("n_values", "must be a nonempty strictly increasing list of positive integers"));
        }
        if self.eval_grid < 2 {
            return Err(Error::config("eval_grid", "must be at least 2"));
        }
        if self.fill_resolution < 2 {
            return Err(Error::config("fill_resolution", "must be at least 2"));
        }
        if self.kernels.is_empty() {
            return Err(Error::config("kernels", "must not be empty"));
        }
        if self.variants.is_empty() {
            return Err(Error::config("variants", "must not be empty"));
        }
        if !(self.band_half_width > 0.0 && self.band_half_width.is_finite()) {
            return Err(Error::config("band_half_width", "must be positive"));
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return Err(Error::config("ridge", "must be nonnegative"));
        }
        self.loocv.to_config()?;
        Ok(())
    }
}

/// `M x M` equispaced grid on `[-1, 1]^2`, with points on jump lines nudged to the right.
pub fn evaluation_grid(m: usize) -> Vec<[f64; 2]> {
    let axis: Vec<f64> = (0..m)
        .map(|k| {
            let v = -1.0 + 2.0 * k as f64 / (m - 1) as f64;
            if JUMP_LINES.iter().any(|t| (v - t).abs() < JUMP_SNAP) {
                v + JUMP_NUDGE
            } else {
                v
            }
        })
        .collect();
    axis.iter().flat_map(|&x1| axis.iter().map(move |&x2| [x1, x2])).collect()
}

/// One benchmark cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub kernel: Profile,
    pub variant: Variant,
    pub n_requested: usize,
    pub n_nodes: usize,
    pub epsilon: f64,
    pub rmse: f64,
    /// Largest absolute error within the band around the jump lines.
    pub near_jump_error: f64,
    pub fill_distance: f64,
    pub separation_distance: f64,
    pub condition_estimate: f64,
    pub failed: bool,
    pub message: String,
}

/// Fill and separation distances of the node set a variant interpolates on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceRow {
    pub variant: Variant,
    pub n_requested: usize,
    pub n_nodes: usize,
    pub fill_distance: f64,
    pub separation_distance: f64,
    pub regional_fill: f64,
    pub regional_separation: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoocvCurve {
    pub kernel: Profile,
    pub variant: Variant,
    pub n_requested: usize,
    pub selection: Option<EpsilonSelection>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub rows: Vec<ResultRow>,
    pub distances: Vec<DistanceRow>,
    pub curves: Vec<LoocvCurve>,
}

/// Node set and partition that a variant's distances are measured on.
///
/// The mvsdk variant interpolates on `S(G_N)`, and its regions are the images of
/// the strips under the (coordinatewise increasing) erf map.
pub fn variant_geometry(variant: Variant, nodes: &NodeSet) -> Result<(NodeSet, Partition)> {
    let labelled = nodes.clone().with_labels(&jump_partition())?;
    match variant {
        Variant::Classical | Variant::Vsdk => Ok((labelled, jump_partition())),
        Variant::Mvsdk => {
            let s = erf_map();
            let mapped = labelled.map_points(|p| s.apply_map(p))?;
            let partition = jump_partition().map_thresholds(|_, t| libm::erf(t / (2.0 * NODE_VARIANCE).sqrt()))?;
            Ok((mapped, partition))
        }
    }
}

/// Interpolation outcome for one `(kernel, variant)` pair on a fixed node set.
#[derive(Clone, Debug, PartialEq)]
pub struct CellOutcome {
    pub epsilon: f64,
    pub rmse: f64,
    pub near_jump_error: f64,
    pub condition_estimate: f64,
    pub selection: EpsilonSelection,
}

/// Selects epsilon by LOOCV, fits, and scores the interpolant on the evaluation grid.
///
/// When the exact condition check rejects the selected value, the next best
/// grid values are tried in score order.
pub fn run_cell(
    profile: Profile,
    variant: Variant,
    nodes: &NodeSet,
    loocv: &LoocvConfig,
    grid: &[[f64; 2]],
    band_half_width: f64,
    ridge: f64,
) -> Result<CellOutcome> {
    let map = variant.augmented_map();
    let values: Vec<f64> = nodes.iter().map(target_f).collect();
    let selection = select_epsilon(loocv, profile, &map, nodes, &values)?;
    let mut ranked: Vec<(f64, f64)> = selection.score_curve.iter().copied().filter(|(_, s)| s.is_finite()).collect();
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)));
    let mut last_err = None;
    for (eps, _) in ranked {
        let kernel = RadialKernel::new(profile, eps)?;
        match fit_with(&kernel, &map, nodes, &values, &FitOptions { ridge }) {
            Ok(interp) => {
                let predicted = interp.evaluate(grid)?;
                let reference: Vec<f64> = grid.iter().map(|p| target_f(p)).collect();
                let (band_ref, band_pred): (Vec<f64>, Vec<f64>) = grid
                    .iter()
                    .zip(reference.iter().zip(&predicted))
                    .filter(|(p, _)| JUMP_LINES.iter().any(|t| (p[0] - t).abs() <= band_half_width))
                    .map(|(_, (r, q))| (*r, *q))
                    .unzip();
                return Ok(CellOutcome {
                    epsilon: eps,
                    rmse: rmse(&reference, &predicted)?,
                    near_jump_error: max_abs_error(&band_ref, &band_pred)?,
                    condition_estimate: interp.diagnostics.condition_estimate,
                    selection,
                });
            }
            Err(e @ Error::IllConditioned { .. }) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last_err.unwrap_or(Error::Selection { failures: selection.failures }))
}

/// Runs every `(N, kernel, variant)` cell; failures become flagged rows.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let loocv = config.loocv.to_config()?;
    let grid = evaluation_grid(config.eval_grid);
    let domain = DomainBox::cube(2, -1.0, 1.0, config.fill_resolution)?;
    let mut report = ExperimentReport::default();
    let mut cells = Vec::new();

    for &n in &config.n_values {
        let nodes = sample_gaussian_nodes(n, config.seed)?;
        for &variant in &config.variants {
            let (set, partition) = variant_geometry(variant, &nodes)?;
            let regional = regional_distances(&set, &domain, &partition)?;
            let (h, q) = (fill_distance(&set, &domain)?, if set.len() >= 2 { separation_distance(&set)? } else { f64::INFINITY });
            report.distances.push(DistanceRow {
                variant,
                n_requested: n,
                n_nodes: set.len(),
                fill_distance: h,
                separation_distance: q,
                regional_fill: regional.global_fill,
                regional_separation: regional.global_separation,
            });
            for &kernel in &config.kernels {
                log::info!("N={n} kernel={kernel} variant={}", variant.name());
                let outcome = run_cell(kernel, variant, &nodes, &loocv, &grid, config.band_half_width, config.ridge);
                let (row, selection) = match outcome {
                    Ok(o) => (
                        ResultRow {
                            kernel,
                            variant,
                            n_requested: n,
                            n_nodes: nodes.len(),
                            epsilon: o.epsilon,
                            rmse: o.rmse,
                            near_jump_error: o.near_jump_error,
                            fill_distance: h,
                            separation_distance: q,
                            condition_estimate: o.condition_estimate,
                            failed: false,
                            message: String::new(),
                        },
                        Some(o.selection),
                    ),
                    Err(e) => (
                        ResultRow {
                            kernel,
                            variant,
                            n_requested: n,
                            n_nodes: nodes.len(),
                            epsilon: f64::NAN,
                            rmse: f64::INFINITY,
                            near_jump_error: f64::INFINITY,
                            fill_distance: h,
                            separation_distance: q,
                            condition_estimate: f64::NAN,
                            failed: true,
                            message: e.to_string(),
                        },
                        None,
                    ),
                };
                cells.push((row, LoocvCurve { kernel, variant, n_requested: n, selection }));
            }
        }
    }
    cells.sort_by(|a, b| {
        (a.0.kernel.name(), a.0.variant, a.0.n_requested).cmp(&(b.0.kernel.name(), b.0.variant, b.0.n_requested))
    });
    for (row, curve) in cells {
        report.rows.push(row);
        report.curves.push(curve);
    }
    Ok(report)
}
