//! Image reconstruction from sparse Fourier samples (visibilities).
//!
//! Frequencies are in arcsec^-1 and image coordinates in arcsec. The pipeline
//! interpolates the sampled visibilities onto a uniform `(u, v)` grid and
//! inverts the discretized Fourier transform by projected Landweber iteration.

mod fourier;
mod landweber;
mod pipeline;
mod surface;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use fourier::{back_projection, forward_adjoint, forward_model, SurfaceOperator};
pub use landweber::{projected_landweber, LandweberConfig, LandweberResult};
pub use pipeline::{
    chi_square, exact_surface, reconstruct, relative_l2_error, two_gaussian_scenario, GaussianComponent, ImagingVariant, PsiMode,
    ReconstructionConfig, Reconstruction, SourceModel,
};
pub use surface::{
    angle_preservation_check, build_psi_from_backprojection, interpolate_visibility_surface, log_polar_for_radii,
    AngleCheck, SurfaceFit,
};

/// Smallest circle radius of the default geometry, arcsec^-1.
pub const STIX_MIN_RADIUS: f64 = 2.79e-3;
/// Largest circle radius of the default geometry, arcsec^-1.
pub const STIX_MAX_RADIUS: f64 = 7.02e-2;
/// Angles (degrees) of the upper half-plane points on each circle.
pub const STIX_ANGLES_DEG: [f64; 3] = [10.0, 70.0, 130.0];
pub const STIX_CIRCLES: usize = 10;
const STIX_L1: f64 = 550.0;
const STIX_L2: f64 = 47.0;

/// Descriptive data attached to a sampling geometry.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeometryMetadata {
    /// Distinct sampling radii, ascending.
    pub radii: Vec<f64>,
    /// Points per circle, or 0 when circles hold different counts.
    pub points_per_circle: usize,
    /// Instrument distances (mm) between the front and rear grids and detector.
    pub l1: Option<f64>,
    pub l2: Option<f64>,
}

/// Sampled spatial frequencies `(u_i, v_i)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct UvGeometry {
    points: Vec<[f64; 2]>,
    metadata: GeometryMetadata,
}

impl UvGeometry {
    /// Geometry from arbitrary points; radii are grouped up to a relative `1e-9`.
    pub fn from_points(points: Vec<[f64; 2]>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::Invalid("geometry needs at least one point".into()));
        }
        if points.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Domain("geometry coordinates must be finite".into()));
        }
        let mut norms: Vec<f64> = points.iter().map(|p| p[0].hypot(p[1])).collect();
        norms.sort_by(f64::total_cmp);
        let mut radii: Vec<f64> = Vec::new();
        let mut counts: Vec<usize> = Vec::new();
        for r in norms {
            match radii.last() {
                Some(&last) if (r - last).abs() <= 1e-9 * r.max(last) => *counts.last_mut().unwrap() += 1,
                _ => {
                    radii.push(r);
                    counts.push(1);
                }
            }
        }
        let points_per_circle = if counts.windows(2).all(|w| w[0] == w[1]) { counts[0] } else { 0 };
        Ok(Self { points, metadata: GeometryMetadata { radii, points_per_circle, l1: None, l2: None } })
    }

    pub fn points(&self) -> &[[f64; 2]] {
        &self.points
    }

    pub fn metadata(&self) -> &GeometryMetadata {
        &self.metadata
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn max_radius(&self) -> f64 {
        self.points.iter().map(|p| p[0].hypot(p[1])).fold(0.0, f64::max)
    }

    /// Smallest nonzero radius.
    pub fn min_radius(&self) -> f64 {
        self.points.iter().map(|p| p[0].hypot(p[1])).filter(|r| *r > 0.0).fold(f64::INFINITY, f64::min)
    }
}

/// Ten circles with geometrically spaced radii from `2.79e-3` to `7.02e-2`
/// arcsec^-1, three points per circle at 10, 70 and 130 degrees, plus the
/// reflections of all 30 points through the origin.
pub fn default_stix_geometry() -> UvGeometry {
    let ratio = (STIX_MAX_RADIUS / STIX_MIN_RADIUS).powf(1.0 / (STIX_CIRCLES - 1) as f64);
    let radii: Vec<f64> = (0..STIX_CIRCLES)
        .map(|k| match k {
            0 => STIX_MIN_RADIUS,
            k if k == STIX_CIRCLES - 1 => STIX_MAX_RADIUS,
            k => STIX_MIN_RADIUS * ratio.powi(k as i32),
        })
        .collect();
    let mut points = Vec::with_capacity(2 * STIX_CIRCLES * STIX_ANGLES_DEG.len());
    for &r in &radii {
        for deg in STIX_ANGLES_DEG {
            let (s, c) = deg.to_radians().sin_cos();
            points.push([r * c, r * s]);
        }
    }
    let reflected: Vec<[f64; 2]> = points.iter().map(|p| [-p[0], -p[1]]).collect();
    points.extend(reflected);
    UvGeometry {
        points,
        metadata: GeometryMetadata {
            radii,
            points_per_circle: 2 * STIX_ANGLES_DEG.len(),
            l1: Some(STIX_L1),
            l2: Some(STIX_L2),
        },
    }
}

/// Complex visibilities on a geometry, with optional per-point noise levels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisibilitySet {
    geometry: UvGeometry,
    values: Vec<Complex64>,
    noise_sigma: Option<Vec<f64>>,
}

impl VisibilitySet {
    pub fn new(geometry: UvGeometry, values: Vec<Complex64>, noise_sigma: Option<Vec<f64>>) -> Result<Self> {
        if values.len() != geometry.len() {
            return Err(Error::Shape { expected: geometry.len(), found: values.len() });
        }
        if let Some(s) = &noise_sigma {
            if s.len() != values.len() {
                return Err(Error::Shape { expected: values.len(), found: s.len() });
            }
            if s.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::Domain("noise levels must be finite and nonnegative".into()));
            }
        }
        if values.iter().any(|v| !(v.re.is_finite() && v.im.is_finite())) {
            return Err(Error::Domain("visibilities must be finite".into()));
        }
        Ok(Self { geometry, values, noise_sigma })
    }

    pub fn geometry(&self) -> &UvGeometry {
        &self.geometry
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn noise_sigma(&self) -> Option<&[f64]> {
        self.noise_sigma.as_deref()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Largest `|V(-p) - conj(V(p))|` over points whose reflection is sampled.
    pub fn conjugate_asymmetry(&self) -> f64 {
        let pts = self.geometry.points();
        let mut worst: f64 = 0.0;
        for (i, p) in pts.iter().enumerate() {
            if let Some(j) = pts.iter().position(|q| q[0] == -p[0] && q[1] == -p[1]) {
                worst = worst.max((self.values[j] - self.values[i].conj()).norm());
            }
        }
        worst
    }
}

/// Square pixel grid: `size x size` pixels of side `pixel_size` arcsec.
///
/// Pixel `(ix, iy)` is centered at `center + ((ix - size/2) p, (iy - size/2) p)`,
/// so for even sizes one pixel sits exactly on `center`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub size: usize,
    pub pixel_size: f64,
    pub center: [f64; 2],
}

impl GridSpec {
    pub fn new(size: usize, pixel_size: f64, center: [f64; 2]) -> Result<Self> {
        if size < 2 {
            return Err(Error::config("image_size", "must be at least 2"));
        }
        if !(pixel_size.is_finite() && pixel_size > 0.0) {
            return Err(Error::config("pixel_size", "must be positive"));
        }
        if center.iter().any(|c| !c.is_finite()) {
            return Err(Error::config("center", "must be finite"));
        }
        Ok(Self { size, pixel_size, center })
    }

    /// Grid whose discrete Fourier dual covers `[-u_max, u_max)` with `size` samples.
    pub fn nyquist(size: usize, u_max: f64) -> Result<Self> {
        Self::new(size, 1.0 / (2.0 * u_max), [0.0, 0.0])
    }

    /// Pixel center coordinates along x (or y, with `axis = 1`).
    pub fn axis(&self, axis: usize) -> Vec<f64> {
        let half = (self.size / 2) as f64;
        (0..self.size).map(|i| self.center[axis] + (i as f64 - half) * self.pixel_size).collect()
    }

    pub fn pixel_area(&self) -> f64 {
        self.pixel_size * self.pixel_size
    }

    /// Frequency spacing of the dual grid, `1 / (size * pixel_size)`.
    pub fn frequency_spacing(&self) -> f64 {
        1.0 / (self.size as f64 * self.pixel_size)
    }

    /// Frequencies `(k - size/2) du` of the dual grid along one axis.
    pub fn frequency_axis(&self) -> Vec<f64> {
        let du = self.frequency_spacing();
        let half = (self.size / 2) as f64;
        (0..self.size).map(|k| (k as f64 - half) * du).collect()
    }
}

/// Flux image, row-major: `flux[iy * size + ix]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImageGrid {
    spec: GridSpec,
    flux: Vec<f64>,
}

impl ImageGrid {
    /// Image with the given pixel values; negative values are allowed (dirty maps).
    pub fn new(spec: GridSpec, flux: Vec<f64>) -> Result<Self> {
        if flux.len() != spec.size * spec.size {
            return Err(Error::Shape { expected: spec.size * spec.size, found: flux.len() });
        }
        if flux.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("pixel values must be finite".into()));
        }
        Ok(Self { spec, flux })
    }

    pub fn zeros(spec: GridSpec) -> Self {
        Self { spec, flux: vec![0.0; spec.size * spec.size] }
    }

    pub fn spec(&self) -> &GridSpec {
        &self.spec
    }

    pub fn flux(&self) -> &[f64] {
        &self.flux
    }

    pub fn flux_mut(&mut self) -> &mut [f64] {
        &mut self.flux
    }

    pub fn into_flux(self) -> Vec<f64> {
        self.flux
    }

    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.flux[iy * self.spec.size + ix]
    }

    /// Index `(ix, iy)` of the brightest pixel.
    pub fn argmax(&self) -> (usize, usize) {
        let k = self.flux.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).map(|(k, _)| k).unwrap_or(0);
        (k % self.spec.size, k / self.spec.size)
    }

    pub fn total_flux(&self) -> f64 {
        self.flux.iter().sum()
    }
}

/// Uniform `(u, v)` grid carrying an interpolated visibility surface, row-major in `v`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VisibilitySurface {
    frequencies: Vec<f64>,
    values: Vec<Complex64>,
}

impl VisibilitySurface {
    pub fn new(frequencies: Vec<f64>, values: Vec<Complex64>) -> Result<Self> {
        let n = frequencies.len();
        if values.len() != n * n {
            return Err(Error::Shape { expected: n * n, found: values.len() });
        }
        Ok(Self { frequencies, values })
    }

    pub fn zeros(frequencies: Vec<f64>) -> Self {
        let n = frequencies.len();
        Self { frequencies, values: vec![Complex64::new(0.0, 0.0); n * n] }
    }

    /// Frequencies along each axis.
    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn size(&self) -> usize {
        self.frequencies.len()
    }

    /// Value at `(u_{ku}, v_{kv})`.
    pub fn at(&self, ku: usize, kv: usize) -> Complex64 {
        self.values[kv * self.size() + ku]
    }

    /// Largest `|S(-w) - conj(S(w))|` over grid points whose reflection is on the grid.
    pub fn conjugate_asymmetry(&self) -> f64 {
        let n = self.size();
        let mirror: Vec<Option<usize>> = self
            .frequencies
            .iter()
            .map(|f| self.frequencies.iter().position(|g| (g + f).abs() <= 1e-12 * f.abs().max(1e-300)))
            .collect();
        let mut worst: f64 = 0.0;
        for kv in 0..n {
            for ku in 0..n {
                if let (Some(mu), Some(mv)) = (mirror[ku], mirror[kv]) {
                    worst = worst.max((self.at(mu, mv) - self.at(ku, kv).conj()).norm());
                }
            }
        }
        worst
    }
}
