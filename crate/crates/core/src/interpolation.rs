//! Kernel interpolation: Gram assembly, coefficient solve, evaluation and
//! the power function.
//!
//! Every routine works on augmented points `Lambda(x) = (S(x), psi(x))`, so
//! a mapped variably scaled interpolant on `X` is a classical interpolant on
//! `Lambda(X)`.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{distance, RadialKernel};
use crate::linalg::{condition_estimate, dot2, residual2, SpdFactor, CONDITION_LIMIT};
use crate::scalings::{AugmentedMap, Partition};

/// Mapped nodes closer than this are treated as coincident.
pub const INJECTIVITY_TOLERANCE: f64 = 1e-12;

/// Pairwise distinct points in `R^d`, optionally tagged with region labels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawNodeSet", into = "RawNodeSet")]
pub struct NodeSet {
    dim: usize,
    coords: Vec<f64>,
    labels: Option<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNodeSet {
    points: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<usize>>,
}

impl TryFrom<RawNodeSet> for NodeSet {
    type Error = Error;
    fn try_from(raw: RawNodeSet) -> Result<Self> {
        let mut set = NodeSet::from_points(&raw.points)?;
        if let Some(labels) = raw.labels {
            if labels.len() != set.len() {
                return Err(Error::Shape { expected: set.len(), found: labels.len() });
            }
            set.labels = Some(labels);
        }
        Ok(set)
    }
}

impl From<NodeSet> for RawNodeSet {
    fn from(set: NodeSet) -> Self {
        RawNodeSet { points: set.iter().map(<[f64]>::to_vec).collect(), labels: set.labels }
    }
}

impl NodeSet {
    /// Builds a node set from row-major coordinates; duplicates are rejected.
    pub fn new(dim: usize, coords: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Invalid("node dimension must be positive".into()));
        }
        if coords.is_empty() || coords.len() % dim != 0 {
            return Err(Error::Invalid(format!("{} coordinates do not form a nonempty set of {dim}-d points", coords.len())));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::Invalid("node coordinates must be finite".into()));
        }
        let set = NodeSet { dim, coords, labels: None };
        let mut order: Vec<usize> = (0..set.len()).collect();
        order.sort_by(|&a, &b| set.point(a).partial_cmp(set.point(b)).expect("finite"));
        if let Some(w) = order.windows(2).find(|w| set.point(w[0]) == set.point(w[1])) {
            return Err(Error::Invalid(format!("nodes {} and {} coincide", w[0].min(w[1]), w[0].max(w[1]))));
        }
        Ok(set)
    }

    pub fn from_points<P: AsRef<[f64]>>(points: &[P]) -> Result<Self> {
        let dim = points.first().map_or(0, |p| p.as_ref().len());
        let mut coords = Vec::with_capacity(dim * points.len());
        for p in points {
            let p = p.as_ref();
            if p.len() != dim {
                return Err(Error::Shape { expected: dim, found: p.len() });
            }
            coords.extend_from_slice(p);
        }
        Self::new(dim, coords)
    }

    /// Tags every node with its region in `partition`.
    pub fn with_labels(mut self, partition: &Partition) -> Result<Self> {
        let labels = self.iter().map(|p| partition.region_of(p)).collect::<Result<Vec<_>>>()?;
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.coords.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.coords[i * self.dim..(i + 1) * self.dim]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.coords.chunks_exact(self.dim)
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    /// Subset of the nodes, keeping labels.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        let coords = indices.iter().flat_map(|&i| self.point(i).iter().copied()).collect();
        let mut set = NodeSet::new(self.dim, coords)?;
        set.labels = self.labels.as_ref().map(|l| indices.iter().map(|&i| l[i]).collect());
        Ok(set)
    }

    /// Applies `f` to every node; the images must stay distinct.
    pub fn map_points(&self, f: impl Fn(&[f64]) -> Result<Vec<f64>>) -> Result<Self> {
        let mut coords = Vec::with_capacity(self.coords.len() + self.len());
        let mut dim = 0;
        for p in self.iter() {
            let q = f(p)?;
            dim = q.len();
            coords.extend(q);
        }
        let mut set = NodeSet::new(dim, coords)?;
        set.labels = self.labels.clone();
        Ok(set)
    }
}

/// Augmented coordinates `Lambda(x_i)` of every node, row-major with stride `d + 1`.
///
/// Fails when two nodes collapse under the node map.
pub(crate) fn augment_nodes(map: &AugmentedMap, nodes: &NodeSet) -> Result<Vec<f64>> {
    let stride = nodes.dim() + 1;
    let mut out = Vec::with_capacity(nodes.len() * stride);
    for p in nodes.iter() {
        map.augment_into(p, &mut out)?;
        if out.len() % stride != 0 {
            return Err(Error::Shape { expected: nodes.dim(), found: out.len() % stride - 1 });
        }
    }
    if !map.node_map.is_identity() {
        let d = nodes.dim();
        for i in 0..nodes.len() {
            let si = &out[i * stride..i * stride + d];
            for j in 0..i {
                if distance(si, &out[j * stride..j * stride + d]) <= INJECTIVITY_TOLERANCE {
                    return Err(Error::NonInjective { first: j, second: i });
                }
            }
        }
    }
    Ok(out)
}

/// The set `Lambda(X)` in `R^{d+1}`.
pub fn augmented_node_set(map: &AugmentedMap, nodes: &NodeSet) -> Result<NodeSet> {
    NodeSet::new(nodes.dim() + 1, augment_nodes(map, nodes)?)
}

/// Gram matrix from augmented coordinates with the given stride.
pub(crate) fn gram_from_augmented(kernel: &RadialKernel, aug: &[f64], stride: usize) -> DMatrix<f64> {
    let n = aug.len() / stride;
    let mut k = DMatrix::zeros(n, n);
    let peak = kernel.peak();
    for j in 0..n {
        let pj = &aug[j * stride..(j + 1) * stride];
        k[(j, j)] = peak;
        for i in 0..j {
            let v = kernel.phi(distance(&aug[i * stride..(i + 1) * stride], pj));
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

/// `K_ij = k((S(x_i), psi(x_i)), (S(x_j), psi(x_j)))`.
pub fn assemble_gram(kernel: &RadialKernel, map: &AugmentedMap, nodes: &NodeSet) -> Result<DMatrix<f64>> {
    let aug = augment_nodes(map, nodes)?;
    Ok(gram_from_augmented(kernel, &aug, nodes.dim() + 1))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitDiagnostics {
    /// `lambda_max / lambda_min` of the (regularized) kernel matrix.
    pub condition_estimate: f64,
    /// `max_i |(K c - f)_i|`.
    pub residual_at_nodes: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitOptions {
    /// Diagonal shift added to the kernel matrix; zero means pure interpolation.
    #[serde(default)]
    pub ridge: f64,
}

/// A fitted kernel interpolant `R(x) = sum_i c_i k(Lambda(x), Lambda(x_i))`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Interpolant {
    pub nodes: NodeSet,
    pub kernel: RadialKernel,
    pub map: AugmentedMap,
    pub coefficients: Vec<f64>,
    pub diagnostics: FitDiagnostics,
}

/// Solves `K c = f` for the interpolation coefficients.
pub fn fit(kernel: &RadialKernel, map: &AugmentedMap, nodes: &NodeSet, values: &[f64]) -> Result<Interpolant> {
    fit_with(kernel, map, nodes, values, &FitOptions::default())
}

pub fn fit_with(
    kernel: &RadialKernel,
    map: &AugmentedMap,
    nodes: &NodeSet,
    values: &[f64],
    options: &FitOptions,
) -> Result<Interpolant> {
    if values.len() != nodes.len() {
        return Err(Error::Shape { expected: nodes.len(), found: values.len() });
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Invalid("data values must be finite".into()));
    }
    if !(options.ridge >= 0.0 && options.ridge.is_finite()) {
        return Err(Error::config("ridge", "must be a nonnegative finite number"));
    }
    let mut k = assemble_gram(kernel, map, nodes)?;
    for i in 0..k.nrows() {
        k[(i, i)] += options.ridge;
    }
    let estimate = condition_estimate(&k);
    if estimate > CONDITION_LIMIT {
        return Err(Error::IllConditioned { estimate });
    }
    let factor = SpdFactor::new(&k)?;
    let f = DVector::from_column_slice(values);
    let c = factor.solve_refined(&k, &f);
    let residual = residual2(&k, &c, &f).amax();
    Ok(Interpolant {
        nodes: nodes.clone(),
        kernel: *kernel,
        map: map.clone(),
        coefficients: c.as_slice().to_vec(),
        diagnostics: FitDiagnostics { condition_estimate: estimate, residual_at_nodes: residual },
    })
}

impl Interpolant {
    /// Values of the interpolant at each query point.
    pub fn evaluate<P: AsRef<[f64]>>(&self, queries: &[P]) -> Result<Vec<f64>> {
        let stride = self.nodes.dim() + 1;
        let aug = augment_nodes(&self.map, &self.nodes)?;
        let mut q = Vec::with_capacity(stride);
        queries
            .iter()
            .map(|x| {
                let x = x.as_ref();
                if x.len() != self.nodes.dim() {
                    return Err(Error::Shape { expected: self.nodes.dim(), found: x.len() });
                }
                q.clear();
                self.map.augment_into(x, &mut q)?;
                Ok(dot2(aug.chunks_exact(stride).zip(&self.coefficients).map(|(p, c)| (*c, self.kernel.phi(distance(p, &q))))))
            })
            .collect()
    }
}

/// `P(x) = sqrt(k(x, x) - k(x)^T K^{-1} k(x))` at each query.
///
/// Radicands down to `-1e-12 * phi(0)` are rounding noise and are clamped to zero.
pub fn power_function<P: AsRef<[f64]>>(
    kernel: &RadialKernel,
    map: &AugmentedMap,
    nodes: &NodeSet,
    queries: &[P],
) -> Result<Vec<f64>> {
    let stride = nodes.dim() + 1;
    let aug = augment_nodes(map, nodes)?;
    let factor = SpdFactor::new(&gram_from_augmented(kernel, &aug, stride))?;
    let peak = kernel.peak();
    let mut q = Vec::with_capacity(stride);
    queries
        .iter()
        .map(|x| {
            let x = x.as_ref();
            if x.len() != nodes.dim() {
                return Err(Error::Shape { expected: nodes.dim(), found: x.len() });
            }
            q.clear();
            map.augment_into(x, &mut q)?;
            let kx = DVector::from_iterator(nodes.len(), aug.chunks_exact(stride).map(|p| kernel.phi(distance(p, &q))));
            let radicand = peak - kx.dot(&factor.solve(&kx));
            if radicand < -1e-12 * peak {
                return Err(Error::Breakdown(format!("negative power function radicand {radicand:e}")));
            }
            Ok(radicand.max(0.0).sqrt())
        })
        .collect()
}
