//! Point-set quality and error metrics: fill distance, separation distance
//! (global and per region) and RMSE.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interpolation::NodeSet;
use crate::kernels::{distance, squared_distance};
use crate::scalings::Partition;

/// Default number of evaluation points per axis for the fill distance.
pub const DEFAULT_FILL_RESOLUTION: usize = 200;

/// Axis-aligned box with an evaluation grid used to approximate suprema over the domain.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBox")]
pub struct DomainBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
    resolution: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawBox {
    lower: Vec<f64>,
    upper: Vec<f64>,
    #[serde(default = "default_resolution")]
    resolution: usize,
}

fn default_resolution() -> usize {
    DEFAULT_FILL_RESOLUTION
}

impl TryFrom<RawBox> for DomainBox {
    type Error = Error;
    fn try_from(r: RawBox) -> Result<Self> {
        DomainBox::new(r.lower, r.upper, r.resolution)
    }
}

impl DomainBox {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, resolution: usize) -> Result<Self> {
        if lower.is_empty() || lower.len() != upper.len() {
            return Err(Error::config("domain", "lower and upper corners need the same nonzero dimension"));
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l < u) || !l.is_finite() || !u.is_finite()) {
            return Err(Error::config("domain", "lower corner must be strictly below the upper corner"));
        }
        if resolution < 2 {
            return Err(Error::config("resolution", "must be at least 2"));
        }
        Ok(Self { lower, upper, resolution })
    }

    /// `[lo, hi]^dim`.
    pub fn cube(dim: usize, lo: f64, hi: f64, resolution: usize) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim], resolution)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn with_resolution(&self, resolution: usize) -> Result<Self> {
        Self::new(self.lower.clone(), self.upper.clone(), resolution)
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.len() == self.dim() && x.iter().zip(&self.lower).zip(&self.upper).all(|((v, l), u)| l <= v && v <= u)
    }

    /// Largest grid spacing over the axes.
    pub fn spacing(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(l, u)| (u - l) / (self.resolution - 1) as f64)
            .fold(0.0, f64::max)
    }

    /// Equispaced grid including the box faces, first axis varying slowest.
    pub fn grid_points(&self) -> Vec<Vec<f64>> {
        let d = self.dim();
        let n = self.resolution;
        let total = n.pow(d as u32);
        (0..total)
            .map(|mut idx| {
                let mut p = vec![0.0; d];
                for a in (0..d).rev() {
                    let k = idx % n;
                    idx /= n;
                    p[a] = self.lower[a] + (self.upper[a] - self.lower[a]) * k as f64 / (n - 1) as f64;
                }
                p
            })
            .collect()
    }
}

/// Nearest-node queries by a sweep over nodes sorted along the first axis.
struct NearestScan<'a> {
    points: Vec<&'a [f64]>,
}

impl<'a> NearestScan<'a> {
    fn new(points: impl Iterator<Item = &'a [f64]>) -> Self {
        let mut points: Vec<&[f64]> = points.collect();
        points.sort_by(|a, b| a[0].total_cmp(&b[0]));
        Self { points }
    }

    fn nearest_distance(&self, x: &[f64]) -> f64 {
        if self.points.is_empty() {
            return f64::INFINITY;
        }
        let start = self.points.partition_point(|p| p[0] < x[0]);
        let mut best = f64::INFINITY;
        for p in self.points[start..].iter() {
            let dx = p[0] - x[0];
            if dx * dx >= best {
                break;
            }
            best = best.min(squared_distance(p, x));
        }
        for p in self.points[..start].iter().rev() {
            let dx = x[0] - p[0];
            if dx * dx >= best {
                break;
            }
            best = best.min(squared_distance(p, x));
        }
        best.sqrt()
    }
}

fn check_dims(nodes: &NodeSet, domain: &DomainBox) -> Result<()> {
    if nodes.dim() != domain.dim() {
        return Err(Error::Shape { expected: domain.dim(), found: nodes.dim() });
    }
    Ok(())
}

/// `sup_{x in domain} min_k |x - x_k|`, with the supremum taken over the domain grid.
///
/// This is a lower bound of the continuous fill distance, accurate to one grid spacing.
pub fn fill_distance(nodes: &NodeSet, domain: &DomainBox) -> Result<f64> {
    check_dims(nodes, domain)?;
    let scan = NearestScan::new(nodes.iter());
    Ok(domain.grid_points().iter().map(|x| scan.nearest_distance(x)).fold(0.0, f64::max))
}

/// Half the smallest pairwise node distance.
pub fn separation_distance(nodes: &NodeSet) -> Result<f64> {
    if nodes.len() < 2 {
        return Err(Error::Invalid("separation distance needs at least two nodes".into()));
    }
    Ok(0.5 * min_pair_distance(nodes.iter().collect()))
}

fn min_pair_distance(points: Vec<&[f64]>) -> f64 {
    let mut best = f64::INFINITY;
    for (i, p) in points.iter().enumerate() {
        for q in &points[..i] {
            best = best.min(squared_distance(p, q));
        }
    }
    best.sqrt()
}

/// Per-region and global fill and separation distances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionalDistances {
    /// Fill distance of each region; infinite for regions without nodes.
    pub fill: Vec<f64>,
    /// Separation distance of each region; infinite for regions with fewer than two nodes.
    pub separation: Vec<f64>,
    /// Maximum regional fill distance.
    pub global_fill: f64,
    /// Minimum regional separation distance over regions with at least two nodes.
    pub global_separation: f64,
    pub empty_regions: Vec<usize>,
}

/// Regional distances for the regions of `partition`.
///
/// Nodes are assigned by their labels when present, otherwise by `partition`.
pub fn regional_distances(nodes: &NodeSet, domain: &DomainBox, partition: &Partition) -> Result<RegionalDistances> {
    check_dims(nodes, domain)?;
    let m = partition.region_count();
    let labels = match nodes.labels() {
        Some(l) => l.to_vec(),
        None => nodes.iter().map(|p| partition.region_of(p)).collect::<Result<_>>()?,
    };
    if let Some(&bad) = labels.iter().find(|&&l| l >= m) {
        return Err(Error::Invalid(format!("node label {bad} exceeds region count {m}")));
    }
    let mut members: Vec<Vec<&[f64]>> = vec![Vec::new(); m];
    for (p, &l) in nodes.iter().zip(&labels) {
        members[l].push(p);
    }
    let scans: Vec<NearestScan> = members.iter().map(|pts| NearestScan::new(pts.iter().copied())).collect();
    let mut fill = vec![0.0f64; m];
    for x in domain.grid_points() {
        let k = partition.region_of(&x)?;
        fill[k] = fill[k].max(scans[k].nearest_distance(&x));
    }
    let mut empty_regions = Vec::new();
    for (k, pts) in members.iter().enumerate() {
        if pts.is_empty() {
            log::warn!("region {k} contains no nodes; its fill distance is infinite");
            fill[k] = f64::INFINITY;
            empty_regions.push(k);
        }
    }
    let separation: Vec<f64> = members
        .iter()
        .map(|pts| if pts.len() >= 2 { 0.5 * min_pair_distance(pts.clone()) } else { f64::INFINITY })
        .collect();
    Ok(RegionalDistances {
        global_fill: fill.iter().copied().fold(0.0, f64::max),
        global_separation: separation.iter().copied().fold(f64::INFINITY, f64::min),
        fill,
        separation,
        empty_regions,
    })
}

/// Root mean squared deviation between two equally long vectors.
pub fn rmse(reference: &[f64], predicted: &[f64]) -> Result<f64> {
    if reference.len() != predicted.len() {
        return Err(Error::Shape { expected: reference.len(), found: predicted.len() });
    }
    if reference.is_empty() {
        return Err(Error::Invalid("rmse of empty vectors".into()));
    }
    let ss: f64 = reference.iter().zip(predicted).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok((ss / reference.len() as f64).sqrt())
}

/// Largest absolute deviation.
pub fn max_abs_error(reference: &[f64], predicted: &[f64]) -> Result<f64> {
    if reference.len() != predicted.len() {
        return Err(Error::Shape { expected: reference.len(), found: predicted.len() });
    }
    Ok(reference.iter().zip(predicted).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
}

/// Distance from `x` to the closest node, by exhaustive scan.
pub fn nearest_node_distance(nodes: &NodeSet, x: &[f64]) -> f64 {
    nodes.iter().map(|p| distance(p, x)).fold(f64::INFINITY, f64::min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn square(res: usize) -> DomainBox {
        DomainBox::cube(2, -1.0, 1.0, res).unwrap()
    }

    #[test]
    fn fill_distance_examples() {
        let d = square(201);
        let h = fill_distance(&NodeSet::from_points(&[[0.0, 0.0]]).unwrap(), &d).unwrap();
        assert!((h - 2f64.sqrt()).abs() <= d.spacing());
        let h = fill_distance(&NodeSet::from_points(&[[-1.0, -1.0], [1.0, 1.0]]).unwrap(), &d).unwrap();
        assert!((h - 2.0).abs() <= d.spacing());
    }

    #[test]
    fn fill_distance_of_uniform_grid_matches_brute_force() {
        let nodes = NodeSet::from_points(&square(9).grid_points()).unwrap();
        let d = square(50);
        let h = fill_distance(&nodes, &d).unwrap();
        let brute = d.grid_points().iter().map(|x| nearest_node_distance(&nodes, x)).fold(0.0, f64::max);
        assert_eq!(h, brute);
        assert!(h <= 0.25);
    }

    #[test]
    fn fill_distance_rejects_dimension_mismatch() {
        let nodes = NodeSet::from_points(&[[0.0]]).unwrap();
        assert!(fill_distance(&nodes, &square(10)).is_err());
    }

    #[test]
    fn separation_examples() {
        let two = NodeSet::from_points(&[[0.0, 0.0], [2.0, 0.0]]).unwrap();
        assert_eq!(separation_distance(&two).unwrap(), 1.0);
        let three = NodeSet::from_points(&[[0.0], [0.3], [0.6]]).unwrap();
        assert_relative_eq!(separation_distance(&three).unwrap(), 0.15, max_relative = 1e-12);
        assert!(separation_distance(&NodeSet::from_points(&[[0.0]]).unwrap()).is_err());
    }

    #[test]
    fn separation_matches_reverse_order_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let pts: Vec<[f64; 2]> = (0..100).map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
        let nodes = NodeSet::from_points(&pts).unwrap();
        let mut best = f64::INFINITY;
        for i in (0..pts.len()).rev() {
            for j in (i + 1..pts.len()).rev() {
                best = best.min(distance(&pts[i], &pts[j]));
            }
        }
        let q = separation_distance(&nodes).unwrap();
        assert_eq!(q, 0.5 * best);
        for i in 0..pts.len() {
            for j in 0..i {
                assert!(q <= 0.5 * distance(&pts[i], &pts[j]));
            }
        }
    }

    #[test]
    fn adding_nodes_never_increases_distances() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let d = square(40);
        let mut pts: Vec<[f64; 2]> = (0..2).map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
        let mut prev_h = fill_distance(&NodeSet::from_points(&pts).unwrap(), &d).unwrap();
        let mut prev_q = separation_distance(&NodeSet::from_points(&pts).unwrap()).unwrap();
        for _ in 0..30 {
            pts.push([rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]);
            let set = NodeSet::from_points(&pts).unwrap();
            let h = fill_distance(&set, &d).unwrap();
            let q = separation_distance(&set).unwrap();
            assert!(h <= prev_h && q <= prev_q);
            prev_h = h;
            prev_q = q;
        }
    }

    #[test]
    fn single_region_reduces_to_global() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts: Vec<[f64; 2]> = (0..40).map(|_| [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)]).collect();
        let nodes = NodeSet::from_points(&pts).unwrap();
        let d = square(60);
        let whole = Partition::along_axis(0, vec![]).unwrap();
        let r = regional_distances(&nodes, &d, &whole).unwrap();
        assert_eq!(r.global_fill, fill_distance(&nodes, &d).unwrap());
        assert_eq!(r.global_separation, separation_distance(&nodes).unwrap());
        assert!(r.empty_regions.is_empty());
    }

    #[test]
    fn empty_region_is_flagged() {
        let nodes = NodeSet::from_points(&[[-0.5, 0.0], [-0.2, 0.3], [-0.9, -0.9]]).unwrap();
        let split = Partition::along_axis(0, vec![0.0]).unwrap();
        let r = regional_distances(&nodes, &square(30), &split).unwrap();
        assert_eq!(r.fill[1], f64::INFINITY);
        assert_eq!(r.empty_regions, vec![1]);
        assert!(r.fill[0].is_finite());
        assert_eq!(r.global_separation, r.separation[0]);
        assert_eq!(r.separation[1], f64::INFINITY);
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(rmse(&[0.0; 4], &[1.0; 4]).unwrap(), 1.0);
        assert_relative_eq!(rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 12.5f64.sqrt(), max_relative = 1e-15);
        assert!(rmse(&[0.0], &[0.0, 1.0]).is_err());
        assert!(rmse(&[], &[]).is_err());
    }

    #[test]
    fn domain_validation() {
        assert!(DomainBox::new(vec![0.0], vec![0.0], 10).is_err());
        assert!(DomainBox::new(vec![0.0], vec![1.0], 1).is_err());
        let d = square(3);
        assert_eq!(d.grid_points().len(), 9);
        assert_eq!(d.grid_points()[1], vec![-1.0, 0.0]);
        assert!(d.contains(&[1.0, -1.0]));
        assert!(!d.contains(&[1.01, 0.0]));
    }
}
