use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use super::{
    build_psi_from_backprojection, forward_model, interpolate_visibility_surface, log_polar_for_radii, projected_landweber,
    GridSpec, ImageGrid, LandweberConfig, SurfaceFit, UvGeometry, VisibilitySet, VisibilitySurface,
};
pub use super::surface::PsiMode;
use crate::error::{Error, Result};
use crate::harness::EpsilonGrid;
use crate::kernels::Profile;
use crate::scalings::AugmentedMap;

/// Circular Gaussian source: total `flux`, standard deviation `sigma` arcsec.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianComponent {
    pub center: [f64; 2],
    pub sigma: f64,
    pub flux: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SourceModel {
    pub components: Vec<GaussianComponent>,
}

impl SourceModel {
    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::config("components", "must not be empty"));
        }
        for c in &self.components {
            if !(c.sigma > 0.0 && c.sigma.is_finite()) {
                return Err(Error::config("sigma", "must be positive"));
            }
            if !(c.flux >= 0.0 && c.flux.is_finite()) || c.center.iter().any(|v| !v.is_finite()) {
                return Err(Error::config("flux", "flux and center must be finite, flux nonnegative"));
            }
        }
        Ok(())
    }

    /// Flux density sampled at pixel centers.
    pub fn render(&self, spec: &GridSpec) -> ImageGrid {
        let (xs, ys) = (spec.axis(0), spec.axis(1));
        let mut flux = Vec::with_capacity(spec.size * spec.size);
        for &y in &ys {
            for &x in &xs {
                flux.push(
                    self.components
                        .iter()
                        .map(|c| {
                            let d2 = (x - c.center[0]).powi(2) + (y - c.center[1]).powi(2);
                            c.flux / (std::f64::consts::TAU * c.sigma * c.sigma) * (-d2 / (2.0 * c.sigma * c.sigma)).exp()
                        })
                        .sum(),
                );
            }
        }
        ImageGrid::new(*spec, flux).expect("finite Gaussian values")
    }

    /// Exact visibilities `sum_k flux_k exp(-2 pi^2 sigma_k^2 |w|^2 - 2 pi i w . c_k)`.
    pub fn visibilities(&self, geometry: &UvGeometry, noise_sigma: Option<Vec<f64>>) -> Result<VisibilitySet> {
        use num_complex::Complex64;
        use std::f64::consts::{PI, TAU};
        let values = geometry
            .points()
            .iter()
            .map(|&[u, v]| {
                self.components
                    .iter()
                    .map(|c| {
                        let amp = c.flux * (-2.0 * PI * PI * c.sigma * c.sigma * (u * u + v * v)).exp();
                        Complex64::from_polar(amp, -TAU * (u * c.center[0] + v * c.center[1]))
                    })
                    .sum()
            })
            .collect();
        VisibilitySet::new(geometry.clone(), values, noise_sigma)
    }
}

/// Two Gaussian sources whose positions, widths and fluxes are jittered by `seed`.
pub fn two_gaussian_scenario(seed: u64) -> SourceModel {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut jitter = |half: f64| half * (2.0 * rng.random::<f64>() - 1.0);
    let first = GaussianComponent { center: [-14.0 + jitter(3.0), -8.0 + jitter(3.0)], sigma: 12.0 + jitter(1.5), flux: 1.0 };
    let second =
        GaussianComponent { center: [14.0 + jitter(3.0), 10.0 + jitter(3.0)], sigma: 9.0 + jitter(1.5), flux: 0.6 + jitter(0.1) };
    SourceModel { components: vec![first, second] }
}

/// Which kernel interpolates the visibility surface.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ImagingVariant {
    Classical,
    Vsk,
    Mvsk,
}

impl ImagingVariant {
    pub const ALL: [ImagingVariant; 3] = [ImagingVariant::Classical, ImagingVariant::Vsk, ImagingVariant::Mvsk];

    pub fn name(self) -> &'static str {
        match self {
            ImagingVariant::Classical => "classical",
            ImagingVariant::Vsk => "vsk",
            ImagingVariant::Mvsk => "mvsk",
        }
    }
}

impl std::str::FromStr for ImagingVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::config("variant", format!("unknown variant `{s}`; expected classical, vsk or mvsk")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ReconstructionConfig {
    pub variant: ImagingVariant,
    pub kernel: Profile,
    /// Pixels per image side; the surface grid has the same size.
    pub image_size: usize,
    /// Pixel side in arcsec; by default `1 / (2 r_max)` so the surface grid spans the sampled disk.
    pub pixel_size: Option<f64>,
    /// Shape parameters tried, in units of the largest sampled radius.
    pub loocv: EpsilonGrid,
    pub psi_mode: PsiMode,
    pub psi_resolution: usize,
    /// Pixel side of the dirty map behind `psi`; defaults to a quarter of the image pixel,
    /// which confines the dirty map to the central quarter of the field of view.
    pub psi_pixel_size: Option<f64>,
    pub landweber: LandweberConfig,
}

impl Default for ReconstructionConfig {
    fn default() -> Self {
        Self {
            variant: ImagingVariant::Mvsk,
            kernel: Profile::MaternC6,
            image_size: 64,
            pixel_size: None,
            loocv: EpsilonGrid::default(),
            psi_mode: PsiMode::Magnitude,
            psi_resolution: 129,
            psi_pixel_size: None,
            landweber: LandweberConfig::default(),
        }
    }
}

impl ReconstructionConfig {
    pub const KEYS: &'static [&'static str] = &[
        "variant",
        "kernel",
        "image_size",
        "pixel_size",
        "loocv",
        "psi_mode",
        "psi_resolution",
        "psi_pixel_size",
        "landweber",
    ];

    pub fn validate(&self) -> Result<()> {
        if self.image_size < 2 {
            return Err(Error::config("image_size", "must be at least 2"));
        }
        if let Some(p) = self.pixel_size {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::config("pixel_size", "must be positive"));
            }
        }
        if let Some(p) = self.psi_pixel_size {
            if !(p > 0.0 && p.is_finite()) {
                return Err(Error::config("psi_pixel_size", "must be positive"));
            }
        }
        if self.psi_resolution < 2 {
            return Err(Error::config("psi_resolution", "must be at least 2"));
        }
        self.loocv.to_config()?;
        self.landweber.validate()
    }

    pub fn grid_spec(&self, geometry: &UvGeometry) -> Result<GridSpec> {
        match self.pixel_size {
            Some(p) => GridSpec::new(self.image_size, p, [0.0, 0.0]),
            None => GridSpec::nyquist(self.image_size, geometry.max_radius()),
        }
    }

    pub fn psi_grid_spec(&self, image: &GridSpec) -> Result<GridSpec> {
        GridSpec::new(image.size, self.psi_pixel_size.unwrap_or(image.pixel_size / 4.0), image.center)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reconstruction {
    pub variant: ImagingVariant,
    pub image: ImageGrid,
    pub surface: SurfaceFit,
    pub residual_history: Vec<f64>,
    pub relaxation: f64,
    /// Visibilities predicted by the reconstructed image at the sampled frequencies.
    pub predicted: VisibilitySet,
    pub chi_square: f64,
}

/// Visibilities to image: surface interpolation, then projected Landweber.
pub fn reconstruct(vis: &VisibilitySet, config: &ReconstructionConfig) -> Result<Reconstruction> {
    config.validate()?;
    let geometry = vis.geometry();
    let spec = config.grid_spec(geometry)?;
    let unit = geometry.max_radius();
    if unit == 0.0 {
        return Err(Error::Domain("all sampled frequencies are at the origin".into()));
    }
    let psi = || build_psi_from_backprojection(vis, &config.psi_grid_spec(&spec)?, config.psi_mode, config.psi_resolution, unit);
    let map = match config.variant {
        ImagingVariant::Classical => AugmentedMap::classical(),
        ImagingVariant::Vsk => AugmentedMap::variably_scaled(psi()?),
        ImagingVariant::Mvsk => AugmentedMap::new(log_polar_for_radii(geometry.min_radius() / unit, 1.0)?, psi()?)?,
    };
    let loocv = config.loocv.to_config()?;
    let surface = interpolate_visibility_surface(vis, config.kernel, &map, &loocv, &spec.frequency_axis(), unit)?;
    let inverted = projected_landweber(&surface.surface, spec, &config.landweber)?;
    let predicted = forward_model(&inverted.image, geometry);
    let chi_square = chi_square(vis, &inverted.image)?;
    Ok(Reconstruction {
        variant: config.variant,
        image: inverted.image,
        surface,
        residual_history: inverted.residual_history,
        relaxation: inverted.relaxation,
        predicted,
        chi_square,
    })
}

/// `(1 / 2N) sum_i ((Re dV_i)^2 + (Im dV_i)^2) / sigma_i^2` with `dV = V_obs - F image`;
/// `sigma_i = 1` when no noise levels are given.
pub fn chi_square(observed: &VisibilitySet, image: &ImageGrid) -> Result<f64> {
    let predicted = forward_model(image, observed.geometry());
    let n = observed.len();
    let mut total = 0.0;
    for i in 0..n {
        let sigma = observed.noise_sigma().map_or(1.0, |s| s[i]);
        if sigma == 0.0 {
            return Err(Error::Domain(format!("noise level of visibility {i} is zero")));
        }
        total += (observed.values()[i] - predicted.values()[i]).norm_sqr() / (sigma * sigma);
    }
    Ok(total / (2 * n) as f64)
}

/// `||a - b|| / ||b||`.
pub fn relative_l2_error(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape { expected: b.len(), found: a.len() });
    }
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    Ok((num / den).sqrt())
}

/// Surface sampled directly from a source model, for testing the inversion alone.
pub fn exact_surface(source: &SourceModel, spec: &GridSpec) -> VisibilitySurface {
    let op = super::SurfaceOperator::new(*spec, spec.frequency_axis());
    VisibilitySurface::new(spec.frequency_axis(), op.apply(source.render(spec).flux()).expect("matching shape"))
        .expect("square grid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::default_stix_geometry;
    use approx::assert_relative_eq;
    use num_complex::Complex64;

    #[test]
    fn chi_square_examples() {
        let g = default_stix_geometry();
        let spec = GridSpec::nyquist(16, g.max_radius()).unwrap();
        let img = SourceModel { components: vec![GaussianComponent { center: [0.0, 0.0], sigma: 15.0, flux: 1.0 }] }.render(&spec);
        let vis = forward_model(&img, &g);
        assert_eq!(chi_square(&vis, &img).unwrap(), 0.0);

        let sigma: Vec<f64> = (0..60).map(|i| 0.1 + 0.01 * i as f64).collect();
        let shifted: Vec<Complex64> = vis.values().iter().zip(&sigma).map(|(v, s)| v + Complex64::new(*s, *s)).collect();
        let noisy = VisibilitySet::new(g.clone(), shifted, Some(sigma)).unwrap();
        assert_relative_eq!(chi_square(&noisy, &img).unwrap(), 1.0, max_relative = 1e-12);

        let mut zero = vec![1.0; 60];
        zero[7] = 0.0;
        let bad = VisibilitySet::new(g, vis.values().to_vec(), Some(zero)).unwrap();
        assert!(chi_square(&bad, &img).is_err());
    }

    #[test]
    fn gaussian_render_matches_analytic_visibilities() {
        let g = default_stix_geometry();
        let spec = GridSpec::new(128, 2.0, [0.0, 0.0]).unwrap();
        let c = GaussianComponent { center: [6.0, -4.0], sigma: 10.0, flux: 2.0 };
        let vis = forward_model(&SourceModel { components: vec![c] }.render(&spec), &g);
        for (&[u, v], val) in g.points().iter().zip(vis.values()) {
            let amp = c.flux * (-2.0 * std::f64::consts::PI.powi(2) * c.sigma.powi(2) * (u * u + v * v)).exp();
            let expected = Complex64::from_polar(amp, -std::f64::consts::TAU * (u * c.center[0] + v * c.center[1]));
            assert!((val - expected).norm() < 1e-9, "{val} vs {expected}");
        }
        let exact = SourceModel { components: vec![c] }.visibilities(&g, None).unwrap();
        for (a, b) in exact.values().iter().zip(vis.values()) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn scenario_is_seeded() {
        assert_eq!(two_gaussian_scenario(3), two_gaussian_scenario(3));
        assert_ne!(two_gaussian_scenario(3), two_gaussian_scenario(4));
        two_gaussian_scenario(3).validate().unwrap();
    }

    #[test]
    fn variant_names_parse() {
        for v in ImagingVariant::ALL {
            assert_eq!(v.name().parse::<ImagingVariant>().unwrap(), v);
        }
        assert!("mvsdk".parse::<ImagingVariant>().is_err());
    }
}
