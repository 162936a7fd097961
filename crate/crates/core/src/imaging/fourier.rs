use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{GridSpec, ImageGrid, UvGeometry, VisibilitySet};
use crate::error::{Error, Result};
use crate::linalg::power_iteration;

fn phases(freq: f64, coords: &[f64], sign: f64) -> Vec<Complex64> {
    coords.iter().map(|&x| Complex64::from_polar(1.0, sign * TAU * freq * x)).collect()
}

/// `V_i = p^2 sum_pixels f(x, y) exp(-2 pi i (u_i x + v_i y))`.
pub fn forward_model(image: &ImageGrid, geometry: &UvGeometry) -> VisibilitySet {
    let spec = image.spec();
    let (xs, ys) = (spec.axis(0), spec.axis(1));
    let n = spec.size;
    let values = geometry
        .points()
        .iter()
        .map(|&[u, v]| {
            let ex = phases(u, &xs, -1.0);
            let ey = phases(v, &ys, -1.0);
            let mut acc = Complex64::new(0.0, 0.0);
            for (iy, row) in image.flux().chunks_exact(n).enumerate() {
                let inner: Complex64 = row.iter().zip(&ex).map(|(f, e)| e * f).sum();
                acc += ey[iy] * inner;
            }
            acc * spec.pixel_area()
        })
        .collect();
    VisibilitySet::new(geometry.clone(), values, None).expect("one value per point")
}

/// Dirty map `B(x, y) = Re sum_i V_i exp(2 pi i (u_i x + v_i y))`, without clipping.
pub fn back_projection(vis: &VisibilitySet, spec: &GridSpec) -> ImageGrid {
    let (xs, ys) = (spec.axis(0), spec.axis(1));
    let n = spec.size;
    let mut flux = vec![0.0; n * n];
    for (&[u, v], &val) in vis.geometry().points().iter().zip(vis.values()) {
        let ex = phases(u, &xs, 1.0);
        let ey: Vec<Complex64> = phases(v, &ys, 1.0).into_iter().map(|e| e * val).collect();
        for (iy, row) in flux.chunks_exact_mut(n).enumerate() {
            for (cell, e) in row.iter_mut().zip(&ex) {
                *cell += (ey[iy] * e).re;
            }
        }
    }
    ImageGrid::new(*spec, flux).expect("finite sums")
}

/// Adjoint of [`forward_model`] for the real inner products on images and
/// on visibilities (`<a, b> = Re sum a_i conj(b_i)`): `p^2` times the back-projection.
pub fn forward_adjoint(vis: &VisibilitySet, spec: &GridSpec) -> ImageGrid {
    let mut b = back_projection(vis, spec);
    let area = spec.pixel_area();
    b.flux_mut().iter_mut().for_each(|v| *v *= area);
    b
}

/// Discretized Fourier transform between an image grid and a uniform `(u, v)` grid,
/// applied separably as `p^2 E_v f E_u^T`.
#[derive(Clone, Debug)]
pub struct SurfaceOperator {
    spec: GridSpec,
    frequencies: Vec<f64>,
    eu: DMatrix<Complex64>,
    ev: DMatrix<Complex64>,
}

impl SurfaceOperator {
    pub fn new(spec: GridSpec, frequencies: Vec<f64>) -> Self {
        let (xs, ys) = (spec.axis(0), spec.axis(1));
        let build = |coords: &[f64]| {
            DMatrix::from_fn(frequencies.len(), coords.len(), |k, i| Complex64::from_polar(1.0, -TAU * frequencies[k] * coords[i]))
        };
        let (eu, ev) = (build(&xs), build(&ys));
        Self { spec, frequencies, eu, ev }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    /// Row-major surface values `W[kv * n + ku]` of a row-major image.
    pub fn apply(&self, flux: &[f64]) -> Result<Vec<Complex64>> {
        let m = self.spec.size;
        if flux.len() != m * m {
            return Err(Error::Shape { expected: m * m, found: flux.len() });
        }
        let f = DMatrix::from_row_iterator(m, m, flux.iter().map(|&v| Complex64::new(v, 0.0)));
        let w = &self.ev * f * self.eu.transpose() * Complex64::new(self.spec.pixel_area(), 0.0);
        Ok(row_major(&w))
    }

    /// `Re(F^H w)`, the adjoint restricted to real images.
    pub fn adjoint(&self, surface: &[Complex64]) -> Result<Vec<f64>> {
        self.adjoint_parts(surface).map(|(re, _)| re)
    }

    /// Real and imaginary parts of `F^H w`.
    pub fn adjoint_parts(&self, surface: &[Complex64]) -> Result<(Vec<f64>, Vec<f64>)> {
        let n = self.frequencies.len();
        if surface.len() != n * n {
            return Err(Error::Shape { expected: n * n, found: surface.len() });
        }
        let w = DMatrix::from_row_slice(n, n, surface);
        let g = self.ev.adjoint() * w * self.eu.map(|e| e.conj()) * Complex64::new(self.spec.pixel_area(), 0.0);
        let g = row_major(&g);
        Ok((g.iter().map(|c| c.re).collect(), g.iter().map(|c| c.im).collect()))
    }

    /// Largest singular value of the operator on real images, by power iteration.
    pub fn spectral_norm(&self) -> f64 {
        let m = self.spec.size;
        let normal = |x: &DVector<f64>| {
            let w = self.apply(x.as_slice()).expect("image shape");
            DVector::from_vec(self.adjoint(&w).expect("surface shape"))
        };
        power_iteration(normal, m * m).sqrt()
    }
}

fn row_major(m: &DMatrix<Complex64>) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(m.len());
    for r in 0..m.nrows() {
        out.extend(m.row(r).iter().copied());
    }
    out
}
