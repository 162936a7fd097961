//! Scaling functions, node maps and the augmented map `x -> (S(x), psi(x))`.
//!
//! Evaluating a radial kernel on augmented points gives the whole family of
//! kernels used by this crate: classical (identity map, constant scaling),
//! variably scaled (identity map, non-constant scaling), mapped (constant
//! scaling) and mapped variably scaled (both non-trivial).

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use libm::erf;

use crate::error::{Error, Result};
use crate::kernels::RadialKernel;

/// User supplied scalar function of a point.
#[derive(Clone)]
pub struct ScalarFn(pub Arc<dyn Fn(&[f64]) -> Result<f64> + Send + Sync>);

/// User supplied point-to-point map.
#[derive(Clone)]
pub struct PointFn(pub Arc<dyn Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync>);

/// User supplied region classifier; `None` means the point is not covered.
#[derive(Clone)]
pub struct RegionFn(pub Arc<dyn Fn(&[f64]) -> Option<usize> + Send + Sync>);

macro_rules! opaque_debug {
    ($($t:ty),*) => {$(
        impl fmt::Debug for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(concat!(stringify!($t), "(..)"))
            }
        }
    )*};
}
opaque_debug!(ScalarFn, PointFn, RegionFn);

/// Sorted cut points along one coordinate axis.
///
/// The cuts `t_1 < ... < t_m` split the axis into the half-open intervals
/// `(-inf, t_1), [t_1, t_2), ..., [t_m, inf)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AxisCuts {
    pub axis: usize,
    pub thresholds: Vec<f64>,
}

/// A partition of the domain into disjoint regions.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Partition {
    /// Tensor product of axis intervals; region indices are row-major over `cuts`.
    Axis { cuts: Vec<AxisCuts> },
    #[serde(skip)]
    Custom {
        regions: usize,
        classify: RegionFn,
        /// Pairs of regions that share a boundary.
        adjacency: Vec<(usize, usize)>,
    },
}

impl Partition {
    /// Intervals along a single axis.
    pub fn along_axis(axis: usize, thresholds: Vec<f64>) -> Result<Self> {
        let p = Partition::Axis { cuts: vec![AxisCuts { axis, thresholds }] };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Partition::Axis { cuts } => {
                if cuts.is_empty() {
                    return Err(Error::config("partition.cuts", "at least one axis is required"));
                }
                for c in cuts {
                    if c.thresholds.iter().any(|t| !t.is_finite()) {
                        return Err(Error::config("partition.thresholds", "thresholds must be finite"));
                    }
                    if c.thresholds.windows(2).any(|w| w[0] >= w[1]) {
                        return Err(Error::config("partition.thresholds", "thresholds must be strictly increasing"));
                    }
                }
                Ok(())
            }
            Partition::Custom { regions, adjacency, .. } => {
                if *regions == 0 {
                    return Err(Error::config("partition.regions", "must be positive"));
                }
                if adjacency.iter().any(|&(a, b)| a >= *regions || b >= *regions) {
                    return Err(Error::config("partition.adjacency", "region index out of range"));
                }
                Ok(())
            }
        }
    }

    pub fn region_count(&self) -> usize {
        match self {
            Partition::Axis { cuts } => cuts.iter().map(|c| c.thresholds.len() + 1).product(),
            Partition::Custom { regions, .. } => *regions,
        }
    }

    /// Zero-based index of the region containing `x`.
    pub fn region_of(&self, x: &[f64]) -> Result<usize> {
        match self {
            Partition::Axis { cuts } => {
                let mut index = 0;
                for c in cuts {
                    let v = *x.get(c.axis).ok_or(Error::Shape { expected: c.axis + 1, found: x.len() })?;
                    if v.is_nan() {
                        return Err(Error::Coverage { point: x.to_vec() });
                    }
                    let slot = c.thresholds.partition_point(|&t| t <= v);
                    index = index * (c.thresholds.len() + 1) + slot;
                }
                Ok(index)
            }
            Partition::Custom { regions, classify, .. } => match (classify.0)(x) {
                Some(k) if k < *regions => Ok(k),
                _ => Err(Error::Coverage { point: x.to_vec() }),
            },
        }
    }

    /// Pairs of regions sharing a boundary.
    pub fn neighbors(&self) -> Vec<(usize, usize)> {
        match self {
            Partition::Axis { cuts } => {
                let sizes: Vec<usize> = cuts.iter().map(|c| c.thresholds.len() + 1).collect();
                let total: usize = sizes.iter().product();
                let mut pairs = Vec::new();
                for idx in 0..total {
                    let mut stride = 1;
                    for &size in sizes.iter().rev() {
                        let digit = (idx / stride) % size;
                        if digit + 1 < size {
                            pairs.push((idx, idx + stride));
                        }
                        stride *= size;
                    }
                }
                pairs
            }
            Partition::Custom { adjacency, .. } => adjacency.clone(),
        }
    }

    /// Image of an axis partition under a coordinatewise increasing map.
    pub fn map_thresholds(&self, f: impl Fn(usize, f64) -> f64) -> Result<Self> {
        match self {
            Partition::Axis { cuts } => {
                let cuts = cuts
                    .iter()
                    .map(|c| AxisCuts { axis: c.axis, thresholds: c.thresholds.iter().map(|&t| f(c.axis, t)).collect() })
                    .collect();
                let p = Partition::Axis { cuts };
                p.validate()?;
                Ok(p)
            }
            Partition::Custom { .. } => Err(Error::Invalid("custom partitions cannot be remapped".into())),
        }
    }
}

/// A scaling function constant on each region of a partition.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "RawPiecewise")]
pub struct PiecewiseConstant {
    partition: Partition,
    values: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPiecewise {
    partition: Partition,
    values: Vec<f64>,
}

impl TryFrom<RawPiecewise> for PiecewiseConstant {
    type Error = Error;
    fn try_from(raw: RawPiecewise) -> Result<Self> {
        PiecewiseConstant::new(raw.partition, raw.values)
    }
}

impl PiecewiseConstant {
    /// Neighboring regions must carry distinct values.
    pub fn new(partition: Partition, values: Vec<f64>) -> Result<Self> {
        partition.validate()?;
        if values.len() != partition.region_count() {
            return Err(Error::config(
                "values",
                format!("expected {} region values, got {}", partition.region_count(), values.len()),
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("values", "region values must be finite"));
        }
        for (a, b) in partition.neighbors() {
            if values[a] == values[b] {
                return Err(Error::config(
                    "values",
                    format!("neighboring regions {a} and {b} share the value {}", values[a]),
                ));
            }
        }
        Ok(Self { partition, values })
    }

    pub fn partition(&self) -> &Partition {
        &self.partition
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// Real values on a uniform 2-D grid, read back with bilinear interpolation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSampled")]
pub struct SampledScaling {
    lower: [f64; 2],
    upper: [f64; 2],
    nx: usize,
    ny: usize,
    /// Row-major, `values[iy * nx + ix]`.
    values: Vec<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSampled {
    lower: [f64; 2],
    upper: [f64; 2],
    nx: usize,
    ny: usize,
    values: Vec<f64>,
}

impl TryFrom<RawSampled> for SampledScaling {
    type Error = Error;
    fn try_from(r: RawSampled) -> Result<Self> {
        SampledScaling::new(r.lower, r.upper, r.nx, r.ny, r.values)
    }
}

impl SampledScaling {
    pub fn new(lower: [f64; 2], upper: [f64; 2], nx: usize, ny: usize, values: Vec<f64>) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(Error::config("sampled", "grid needs at least 2 points per axis"));
        }
        if !(lower[0] < upper[0] && lower[1] < upper[1]) {
            return Err(Error::config("sampled", "lower corner must be below upper corner"));
        }
        if values.len() != nx * ny {
            return Err(Error::config("sampled", format!("expected {} values, got {}", nx * ny, values.len())));
        }
        Ok(Self { lower, upper, nx, ny, values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.nx, self.ny)
    }

    pub fn bounds(&self) -> ([f64; 2], [f64; 2]) {
        (self.lower, self.upper)
    }

    /// Same samples over a domain scaled by `factor` about the origin.
    pub fn rescaled(&self, factor: f64) -> Result<Self> {
        let lower = [self.lower[0] * factor, self.lower[1] * factor];
        let upper = [self.upper[0] * factor, self.upper[1] * factor];
        Self::new(lower, upper, self.nx, self.ny, self.values.clone())
    }

    /// Bilinear lookup; points outside the grid box are not covered.
    pub fn lookup(&self, x: &[f64]) -> Result<f64> {
        if x.len() != 2 {
            return Err(Error::Shape { expected: 2, found: x.len() });
        }
        let mut cell = [0usize; 2];
        let mut frac = [0.0; 2];
        let counts = [self.nx, self.ny];
        for a in 0..2 {
            let span = self.upper[a] - self.lower[a];
            let t = (x[a] - self.lower[a]) / span * (counts[a] - 1) as f64;
            let slack = 1e-9 * (counts[a] - 1) as f64;
            if !(t >= -slack && t <= (counts[a] - 1) as f64 + slack) {
                return Err(Error::Coverage { point: x.to_vec() });
            }
            let t = t.clamp(0.0, (counts[a] - 1) as f64);
            let i = (t.floor() as usize).min(counts[a] - 2);
            cell[a] = i;
            frac[a] = t - i as f64;
        }
        let at = |ix: usize, iy: usize| self.values[iy * self.nx + ix];
        let (ix, iy) = (cell[0], cell[1]);
        let (fx, fy) = (frac[0], frac[1]);
        let bottom = at(ix, iy) * (1.0 - fx) + at(ix + 1, iy) * fx;
        let top = at(ix, iy + 1) * (1.0 - fx) + at(ix + 1, iy + 1) * fx;
        Ok(bottom * (1.0 - fy) + top * fy)
    }
}

/// The scaling (shape) function `psi`, supplying the extra coordinate.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ScalingFunction {
    Constant { value: f64 },
    PiecewiseConstant(PiecewiseConstant),
    Sampled(SampledScaling),
    #[serde(skip)]
    Callback(ScalarFn),
}

impl ScalingFunction {
    pub fn constant(value: f64) -> Self {
        ScalingFunction::Constant { value }
    }

    pub fn apply_scaling(&self, x: &[f64]) -> Result<f64> {
        match self {
            ScalingFunction::Constant { value } => Ok(*value),
            ScalingFunction::PiecewiseConstant(p) => Ok(p.values[p.partition.region_of(x)?]),
            ScalingFunction::Sampled(s) => s.lookup(x),
            ScalingFunction::Callback(f) => (f.0)(x),
        }
    }

    pub fn is_constant(&self) -> bool {
        matches!(self, ScalingFunction::Constant { .. })
    }

    fn validate(&self) -> Result<()> {
        match self {
            ScalingFunction::Constant { value } if !value.is_finite() => {
                Err(Error::config("scaling.value", "must be finite"))
            }
            _ => Ok(()),
        }
    }
}

/// The node map `S`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NodeMap {
    Identity,
    /// `S(x) = x + k * beta * (1, ..., 1)` on the `k`-th region (one-based).
    SGibbs { partition: Partition, beta: f64 },
    /// `S_j(x) = erf((x_j - mean_j) / sqrt(2 variance_j))`, uniformizing normal samples onto `(-1, 1)^d`.
    ErfUniformize { mean: Vec<f64>, variance: Vec<f64> },
    /// `S(w) = scale * ln(|w| / reference_radius) * (cos t, sin t)` with `t = atan2(w_2, w_1)`.
    LogPolar { scale: f64, reference_radius: f64 },
    #[serde(skip)]
    Callback(PointFn),
}

impl NodeMap {
    pub fn erf_isotropic(dim: usize, mean: f64, variance: f64) -> Result<Self> {
        let m = NodeMap::ErfUniformize { mean: vec![mean; dim], variance: vec![variance; dim] };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            NodeMap::SGibbs { partition, beta } => {
                partition.validate()?;
                if !beta.is_finite() || *beta == 0.0 {
                    return Err(Error::config("beta", "must be finite and nonzero"));
                }
                Ok(())
            }
            NodeMap::ErfUniformize { mean, variance } => {
                if mean.len() != variance.len() || mean.is_empty() {
                    return Err(Error::config("variance", "mean and variance need the same nonzero length"));
                }
                if variance.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
                    return Err(Error::config("variance", "must be positive"));
                }
                Ok(())
            }
            NodeMap::LogPolar { scale, reference_radius } => {
                if !(scale.is_finite() && *scale > 0.0) {
                    return Err(Error::config("scale", "must be positive"));
                }
                if !(reference_radius.is_finite() && *reference_radius > 0.0) {
                    return Err(Error::config("reference_radius", "must be positive"));
                }
                Ok(())
            }
            NodeMap::Identity | NodeMap::Callback(_) => Ok(()),
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, NodeMap::Identity)
    }

    pub fn apply_map(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(x.len());
        self.apply_into(x, &mut out)?;
        Ok(out)
    }

    /// Appends `S(x)` to `out`.
    pub(crate) fn apply_into(&self, x: &[f64], out: &mut Vec<f64>) -> Result<()> {
        match self {
            NodeMap::Identity => out.extend_from_slice(x),
            NodeMap::SGibbs { partition, beta } => {
                let shift = (partition.region_of(x)? + 1) as f64 * beta;
                out.extend(x.iter().map(|v| v + shift));
            }
            NodeMap::ErfUniformize { mean, variance } => {
                if x.len() != mean.len() {
                    return Err(Error::Shape { expected: mean.len(), found: x.len() });
                }
                out.extend(
                    x.iter().zip(mean).zip(variance).map(|((v, m), s2)| erf((v - m) / (2.0 * s2).sqrt())),
                );
            }
            NodeMap::LogPolar { scale, reference_radius } => {
                if x.len() != 2 {
                    return Err(Error::Shape { expected: 2, found: x.len() });
                }
                let r = x[0].hypot(x[1]);
                if r == 0.0 {
                    return Err(Error::Singularity { point: x.to_vec(), reason: "log-polar map is undefined at the origin".into() });
                }
                let radius = scale * (r / reference_radius).ln();
                out.push(radius * x[0] / r);
                out.push(radius * x[1] / r);
            }
            NodeMap::Callback(f) => out.extend((f.0)(x)?),
        }
        Ok(())
    }
}

/// The pair `(S, psi)` defining `Lambda(x) = (S(x), psi(x))`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "RawAugmented")]
pub struct AugmentedMap {
    pub node_map: NodeMap,
    pub scaling: ScalingFunction,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawAugmented {
    node_map: NodeMap,
    scaling: ScalingFunction,
}

impl TryFrom<RawAugmented> for AugmentedMap {
    type Error = Error;
    fn try_from(r: RawAugmented) -> Result<Self> {
        AugmentedMap::new(r.node_map, r.scaling)
    }
}

impl AugmentedMap {
    pub fn new(node_map: NodeMap, scaling: ScalingFunction) -> Result<Self> {
        node_map.validate()?;
        scaling.validate()?;
        Ok(Self { node_map, scaling })
    }

    /// Identity map with a zero scaling: the classical kernel.
    pub fn classical() -> Self {
        Self { node_map: NodeMap::Identity, scaling: ScalingFunction::constant(0.0) }
    }

    pub fn variably_scaled(scaling: ScalingFunction) -> Self {
        Self { node_map: NodeMap::Identity, scaling }
    }

    pub fn mapped(node_map: NodeMap) -> Self {
        Self { node_map, scaling: ScalingFunction::constant(0.0) }
    }

    pub fn is_trivial(&self) -> bool {
        self.node_map.is_identity() && self.scaling.is_constant()
    }

    /// `(S(x), psi(x))`, a point of dimension `d + 1`.
    pub fn augment(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = Vec::with_capacity(x.len() + 1);
        self.augment_into(x, &mut out)?;
        Ok(out)
    }

    pub(crate) fn augment_into(&self, x: &[f64], out: &mut Vec<f64>) -> Result<()> {
        self.node_map.apply_into(x, out)?;
        out.push(self.scaling.apply_scaling(x)?);
        Ok(())
    }
}

/// Mapped variably scaled kernel value `k((S(x), psi(x)), (S(y), psi(y)))`.
pub fn mvsk_eval(kernel: &RadialKernel, map: &AugmentedMap, x: &[f64], y: &[f64]) -> Result<f64> {
    kernel.eval_kernel(&map.augment(x)?, &map.augment(y)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::Profile;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    // erf(sqrt(5)) and erf(sqrt(0.2)), arbitrary precision.
    const ERF_SQRT5: f64 = 0.998_434_597_741_997_45;
    const ERF_SQRT_FIFTH: f64 = 0.472_910_743_134_461_91;

    fn shape_function() -> ScalingFunction {
        let p = Partition::along_axis(0, vec![-0.3, 0.0, 0.5]).unwrap();
        ScalingFunction::PiecewiseConstant(PiecewiseConstant::new(p, vec![0.0, 1.0, 2.0, 3.0]).unwrap())
    }

    fn erf_map() -> NodeMap {
        NodeMap::erf_isotropic(2, 0.0, 0.1).unwrap()
    }

    /// Independent erf: Maclaurin series, fine for |z| <= 3.
    fn erf_series(z: f64) -> f64 {
        let mut term = z;
        let mut sum = z;
        for n in 1..200 {
            term *= -z * z / n as f64;
            sum += term / (2 * n + 1) as f64;
        }
        2.0 / std::f64::consts::PI.sqrt() * sum
    }

    #[test]
    fn erf_oracle_agrees_with_frozen_values() {
        assert_relative_eq!(erf_series(5f64.sqrt()), ERF_SQRT5, max_relative = 1e-13);
        assert_relative_eq!(erf_series(0.2f64.sqrt()), ERF_SQRT_FIFTH, max_relative = 1e-14);
    }

    #[test]
    fn shape_function_values() {
        let psi = shape_function();
        assert_eq!(psi.apply_scaling(&[-0.5, 0.0]).unwrap(), 0.0);
        assert_eq!(psi.apply_scaling(&[-0.3, 0.0]).unwrap(), 1.0);
        assert_eq!(psi.apply_scaling(&[0.0, 0.0]).unwrap(), 2.0);
        assert_eq!(psi.apply_scaling(&[0.2, 0.9]).unwrap(), 2.0);
        assert_eq!(psi.apply_scaling(&[0.5, -1.0]).unwrap(), 3.0);
        assert_eq!(ScalingFunction::constant(3.0).apply_scaling(&[7.0, -2.0]).unwrap(), 3.0);
        assert!(matches!(psi.apply_scaling(&[f64::NAN, 0.0]), Err(Error::Coverage { .. })));
    }

    #[test]
    fn custom_partition_reports_uncovered_points() {
        let p = Partition::Custom {
            regions: 2,
            classify: RegionFn(Arc::new(|x: &[f64]| if x[0].abs() <= 1.0 { Some((x[0] >= 0.0) as usize) } else { None })),
            adjacency: vec![(0, 1)],
        };
        let psi = ScalingFunction::PiecewiseConstant(PiecewiseConstant::new(p.clone(), vec![0.0, 1.0]).unwrap());
        assert_eq!(psi.apply_scaling(&[0.5]).unwrap(), 1.0);
        assert!(matches!(psi.apply_scaling(&[2.0]), Err(Error::Coverage { .. })));
        assert!(PiecewiseConstant::new(p, vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn neighboring_regions_need_distinct_values() {
        let p = Partition::along_axis(0, vec![0.0, 1.0]).unwrap();
        assert!(PiecewiseConstant::new(p.clone(), vec![0.0, 0.0, 1.0]).is_err());
        // regions 0 and 2 are not neighbors
        assert!(PiecewiseConstant::new(p.clone(), vec![0.0, 1.0, 0.0]).is_ok());
        assert!(PiecewiseConstant::new(p, vec![0.0, 1.0]).is_err());
        assert!(Partition::along_axis(0, vec![1.0, 0.0]).is_err());
    }

    #[test]
    fn tensor_partition_neighbors() {
        let p = Partition::Axis {
            cuts: vec![AxisCuts { axis: 0, thresholds: vec![0.0] }, AxisCuts { axis: 1, thresholds: vec![0.0] }],
        };
        assert_eq!(p.region_count(), 4);
        assert_eq!(p.region_of(&[-1.0, -1.0]).unwrap(), 0);
        assert_eq!(p.region_of(&[-1.0, 1.0]).unwrap(), 1);
        assert_eq!(p.region_of(&[1.0, -1.0]).unwrap(), 2);
        let mut n = p.neighbors();
        n.sort();
        assert_eq!(n, vec![(0, 1), (0, 2), (1, 3), (2, 3)]);
    }

    #[test]
    fn node_map_values() {
        let s = erf_map();
        assert_eq!(s.apply_map(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
        let y = s.apply_map(&[1.0, 1.0]).unwrap();
        assert_relative_eq!(y[0], ERF_SQRT5, max_relative = 1e-15);
        assert_relative_eq!(y[1], ERF_SQRT5, max_relative = 1e-15);
        assert_eq!(NodeMap::Identity.apply_map(&[0.3, -4.0]).unwrap(), vec![0.3, -4.0]);

        let beta = 0.7;
        let gibbs = NodeMap::SGibbs { partition: Partition::along_axis(0, vec![0.0]).unwrap(), beta };
        let y = gibbs.apply_map(&[0.1, 0.1]).unwrap();
        assert_eq!(y, vec![0.1 + 2.0 * beta, 0.1 + 2.0 * beta]);
        let y = gibbs.apply_map(&[-0.1, 0.1]).unwrap();
        assert_eq!(y, vec![-0.1 + beta, 0.1 + beta]);
    }

    #[test]
    fn log_polar_values() {
        let s = NodeMap::LogPolar { scale: 1.0, reference_radius: 1.0 };
        let y = s.apply_map(&[3.0, 0.0]).unwrap();
        assert_relative_eq!(y[0], 3f64.ln(), max_relative = 1e-15);
        assert_eq!(y[1], 0.0);
        assert!(matches!(s.apply_map(&[0.0, 0.0]), Err(Error::Singularity { .. })));
        // reflected points stay apart
        let a = s.apply_map(&[0.3, 0.4]).unwrap();
        let b = s.apply_map(&[-0.3, -0.4]).unwrap();
        assert_relative_eq!(a[0], -b[0]);
        assert!(a[0] != b[0]);
    }

    #[test]
    fn augment_examples() {
        let classical = AugmentedMap::classical();
        assert_eq!(classical.augment(&[1.0, 2.0]).unwrap(), vec![1.0, 2.0, 0.0]);

        let mvsk = AugmentedMap::new(erf_map(), shape_function()).unwrap();
        let y = mvsk.augment(&[0.2, 0.0]).unwrap();
        assert_relative_eq!(y[0], ERF_SQRT_FIFTH, max_relative = 1e-15);
        assert_eq!(&y[1..], &[0.0, 2.0]);

        let lp = AugmentedMap::new(NodeMap::LogPolar { scale: 1.0, reference_radius: 1.0 }, ScalingFunction::constant(0.5)).unwrap();
        let y = lp.augment(&[std::f64::consts::E, 0.0]).unwrap();
        assert_relative_eq!(y[0], 1.0, max_relative = 1e-15);
        assert_eq!(&y[1..], &[0.0, 0.5]);
    }

    #[test]
    fn mvsk_at_coincident_points_is_peak() {
        let k = RadialKernel::new(Profile::MaternC6, 2.0).unwrap();
        let map = AugmentedMap::new(erf_map(), shape_function()).unwrap();
        assert_eq!(mvsk_eval(&k, &map, &[0.4, -0.1], &[0.4, -0.1]).unwrap(), 15.0);
    }

    #[test]
    fn sampled_bilinear_reproduces_linear_functions() {
        let (nx, ny) = (5, 4);
        let mut values = Vec::new();
        for iy in 0..ny {
            for ix in 0..nx {
                let x = -1.0 + 2.0 * ix as f64 / (nx - 1) as f64;
                let y = 3.0 * iy as f64 / (ny - 1) as f64;
                values.push(2.0 * x - y + 0.5);
            }
        }
        let s = SampledScaling::new([-1.0, 0.0], [1.0, 3.0], nx, ny, values).unwrap();
        for &(x, y) in &[(-1.0, 0.0), (1.0, 3.0), (0.13, 2.2), (-0.77, 0.4)] {
            assert_relative_eq!(s.lookup(&[x, y]).unwrap(), 2.0 * x - y + 0.5, epsilon = 1e-13);
        }
        assert!(matches!(s.lookup(&[1.5, 0.0]), Err(Error::Coverage { .. })));
    }

    #[test]
    fn config_round_trip() {
        let map = AugmentedMap::new(erf_map(), shape_function()).unwrap();
        let json = serde_json::to_string(&map).unwrap();
        let back: AugmentedMap = serde_json::from_str(&json).unwrap();
        assert_eq!(serde_json::to_string(&back).unwrap(), json);
        let bad = r#"{"node_map":{"kind":"log_polar","scale":-1.0,"reference_radius":1.0},"scaling":{"kind":"constant","value":0.0}}"#;
        assert!(serde_json::from_str::<AugmentedMap>(bad).is_err());
    }

    fn point() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-1.0..1.0f64, 2)
    }

    fn vsk_value(k: &RadialKernel, psi: &ScalingFunction, x: &[f64], y: &[f64]) -> f64 {
        let dx: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        let dp = psi.apply_scaling(x).unwrap() - psi.apply_scaling(y).unwrap();
        k.eval_profile((dx + dp * dp).sqrt()).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        #[test]
        fn constant_scaling_gives_mapped_kernel(x in point(), y in point(), alpha in -3.0..3.0f64, eps in 0.1..10.0f64) {
            for p in Profile::ALL {
                let k = RadialKernel::new(p, eps).unwrap();
                let map = AugmentedMap::new(erf_map(), ScalingFunction::constant(alpha)).unwrap();
                let lhs = mvsk_eval(&k, &map, &x, &y).unwrap();
                let rhs = k.eval_kernel(&erf_map().apply_map(&x).unwrap(), &erf_map().apply_map(&y).unwrap()).unwrap();
                prop_assert!((lhs - rhs).abs() <= 1e-14 * rhs.abs().max(1e-300));
            }
        }

        #[test]
        fn identity_map_gives_vsk(x in point(), y in point(), eps in 0.1..10.0f64) {
            let psi = shape_function();
            for p in Profile::ALL {
                let k = RadialKernel::new(p, eps).unwrap();
                let map = AugmentedMap::variably_scaled(psi.clone());
                let lhs = mvsk_eval(&k, &map, &x, &y).unwrap();
                let rhs = vsk_value(&k, &psi, &x, &y);
                prop_assert!((lhs - rhs).abs() <= 1e-14 * rhs.abs().max(1e-300));
            }
        }

        #[test]
        fn s_gibbs_opens_gaps(x in point(), y in point(), beta in -2.0..2.0f64) {
            prop_assume!(beta.abs() > 1e-3);
            let partition = Partition::along_axis(0, vec![-0.3, 0.0, 0.5]).unwrap();
            let i = partition.region_of(&x).unwrap() as f64;
            let j = partition.region_of(&y).unwrap() as f64;
            let s = NodeMap::SGibbs { partition, beta };
            let gap = crate::kernels::distance(&s.apply_map(&x).unwrap(), &s.apply_map(&y).unwrap());
            let bound = (i - j).abs() * beta.abs() * 2f64.sqrt() - crate::kernels::distance(&x, &y);
            prop_assert!(gap >= bound - 1e-12);
        }
    }
}
