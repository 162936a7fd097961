use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{back_projection, GridSpec, SurfaceOperator, VisibilitySet, VisibilitySurface};
use crate::error::{Error, Result};
use crate::interpolation::{fit, NodeSet};
use crate::kernels::{Profile, RadialKernel};
use crate::model_selection::{select_epsilon_joint, EpsilonSelection, LoocvConfig};
use crate::scalings::{AugmentedMap, NodeMap, SampledScaling, ScalingFunction};

/// Log-polar map for samples with radii in `[r_min, r_max]`.
///
/// The reference radius is `r_min / e`, so every sample keeps a positive log
/// radius, and the scale makes the largest radius a fixed point of the map.
pub fn log_polar_for_radii(r_min: f64, r_max: f64) -> Result<NodeMap> {
    if !(r_min > 0.0 && r_max >= r_min && r_max.is_finite()) {
        return Err(Error::Domain(format!("need 0 < r_min <= r_max, got {r_min} and {r_max}")));
    }
    let reference_radius = r_min / std::f64::consts::E;
    let map = NodeMap::LogPolar { scale: r_max / (r_max / reference_radius).ln(), reference_radius };
    map.validate()?;
    Ok(map)
}

/// How the Fourier transform of the clipped back-projection becomes `psi`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PsiMode {
    /// Modulus divided by its maximum.
    #[default]
    Magnitude,
    /// Real part mapped affinely onto `[0, 1]`.
    Real,
}

/// Scaling function built from the visibilities themselves.
///
/// The dirty map is clipped at zero, transformed back onto a `resolution x resolution`
/// grid covering `[-r, r]^2` (`r` the largest sampled radius) and normalized to `[0, 1]`.
/// Lookup coordinates are frequencies divided by `unit`.
pub fn build_psi_from_backprojection(
    vis: &VisibilitySet,
    spec: &GridSpec,
    mode: PsiMode,
    resolution: usize,
    unit: f64,
) -> Result<ScalingFunction> {
    if vis.is_empty() {
        return Err(Error::Invalid("no visibilities".into()));
    }
    if resolution < 2 {
        return Err(Error::config("psi_resolution", "must be at least 2"));
    }
    let mut dirty = back_projection(vis, spec);
    dirty.flux_mut().iter_mut().for_each(|v| *v = v.max(0.0));
    if dirty.flux().iter().all(|v| *v == 0.0) {
        log::warn!("back-projection is identically zero; psi falls back to a constant");
        return Ok(ScalingFunction::constant(0.0));
    }
    let r = vis.geometry().max_radius();
    let freqs: Vec<f64> = (0..resolution).map(|k| -r + 2.0 * r * k as f64 / (resolution - 1) as f64).collect();
    let transform = SurfaceOperator::new(*spec, freqs).apply(dirty.flux())?;
    let raw: Vec<f64> = match mode {
        PsiMode::Magnitude => transform.iter().map(|c| c.norm()).collect(),
        PsiMode::Real => transform.iter().map(|c| c.re).collect(),
    };
    let (lo, hi) = raw.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
    let values: Vec<f64> = match mode {
        PsiMode::Magnitude => raw.iter().map(|v| v / hi).collect(),
        PsiMode::Real if hi > lo => raw.iter().map(|v| (v - lo) / (hi - lo)).collect(),
        PsiMode::Real => {
            log::warn!("real part of the transformed back-projection is constant");
            return Ok(ScalingFunction::constant(0.0));
        }
    };
    let bound = r / unit;
    Ok(ScalingFunction::Sampled(SampledScaling::new([-bound, -bound], [bound, bound], resolution, resolution, values)?))
}

/// Interpolated visibility surface and the model choices behind it.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurfaceFit {
    pub surface: VisibilitySurface,
    pub epsilon: f64,
    pub selection: EpsilonSelection,
    /// Largest `|V_i - surface(u_i, v_i)|` relative to `max |V_i|`.
    pub node_residual: f64,
}

/// Interpolates real and imaginary parts separately, with one shape parameter
/// chosen jointly by leave-one-out cross validation.
///
/// Frequencies are divided by `unit` before `map` is applied. Grid points
/// beyond the largest sampled radius are set to zero; grid points where the
/// map is singular get the mean of the innermost circle's visibilities.
pub fn interpolate_visibility_surface(
    vis: &VisibilitySet,
    profile: Profile,
    map: &AugmentedMap,
    loocv: &LoocvConfig,
    frequencies: &[f64],
    unit: f64,
) -> Result<SurfaceFit> {
    if !(unit > 0.0 && unit.is_finite()) {
        return Err(Error::Domain("frequency unit must be positive".into()));
    }
    let points = vis.geometry().points();
    let nodes = NodeSet::from_points(&points.iter().map(|p| [p[0] / unit, p[1] / unit]).collect::<Vec<_>>())?;
    let re: Vec<f64> = vis.values().iter().map(|c| c.re).collect();
    let im: Vec<f64> = vis.values().iter().map(|c| c.im).collect();

    let selection = select_epsilon_joint(loocv, profile, map, &nodes, &[&re, &im])?;
    let mut ranked: Vec<(f64, f64)> = selection.score_curve.iter().copied().filter(|(_, s)| s.is_finite()).collect();
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)));
    let mut fitted = None;
    let mut last_err = None;
    for (eps, _) in ranked {
        let kernel = RadialKernel::new(profile, eps)?;
        match fit(&kernel, map, &nodes, &re).and_then(|a| Ok((a, fit(&kernel, map, &nodes, &im)?))) {
            Ok(pair) => {
                fitted = Some((eps, pair));
                break;
            }
            Err(e @ Error::IllConditioned { .. }) => last_err = Some(e),
            Err(e) => return Err(e),
        }
    }
    let Some((epsilon, (fit_re, fit_im))) = fitted else {
        return Err(last_err.unwrap_or(Error::Selection { failures: selection.failures.clone() }));
    };

    let outer = vis.geometry().max_radius() / unit;
    let inner = vis.geometry().min_radius();
    let innermost: Vec<Complex64> = points
        .iter()
        .zip(vis.values())
        .filter(|(p, _)| (p[0].hypot(p[1]) - inner).abs() <= 1e-9 * inner)
        .map(|(_, v)| *v)
        .collect();
    let center_value = innermost.iter().sum::<Complex64>() / innermost.len().max(1) as f64;

    let n = frequencies.len();
    let mut values = vec![Complex64::new(0.0, 0.0); n * n];
    let mut queries = Vec::new();
    let mut slots = Vec::new();
    for (kv, &v) in frequencies.iter().enumerate() {
        for (ku, &u) in frequencies.iter().enumerate() {
            let w = [u / unit, v / unit];
            if w[0].hypot(w[1]) > outer * (1.0 + 1e-12) {
                continue;
            }
            match map.augment(&w) {
                Ok(_) => {
                    queries.push(w);
                    slots.push(kv * n + ku);
                }
                Err(Error::Singularity { .. }) => values[kv * n + ku] = center_value,
                Err(e) => return Err(e),
            }
        }
    }
    let (sre, sim) = (fit_re.evaluate(&queries)?, fit_im.evaluate(&queries)?);
    for ((slot, a), b) in slots.into_iter().zip(sre).zip(sim) {
        values[slot] = Complex64::new(a, b);
    }

    let at_nodes: Vec<[f64; 2]> = nodes.iter().map(|p| [p[0], p[1]]).collect();
    let (nre, nim) = (fit_re.evaluate(&at_nodes)?, fit_im.evaluate(&at_nodes)?);
    let scale = vis.values().iter().map(|c| c.norm()).fold(0.0, f64::max);
    let node_residual = vis
        .values()
        .iter()
        .zip(nre.iter().zip(&nim))
        .map(|(v, (a, b))| (v - Complex64::new(*a, *b)).norm())
        .fold(0.0, f64::max)
        / if scale > 0.0 { scale } else { 1.0 };

    Ok(SurfaceFit { surface: VisibilitySurface::new(frequencies.to_vec(), values)?, epsilon, selection, node_residual })
}

/// Direction and spread of points before and after a log-polar map.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleCheck {
    /// Largest angular difference (radians, wrapped to `[0, pi]`).
    pub max_angle_error: f64,
    /// `max |p| / min |p|` of the input points.
    pub original_ratio: f64,
    /// `max |S(p)| / min |S(p)|`.
    pub mapped_ratio: f64,
}

impl AngleCheck {
    pub fn preserves_angles(&self, tol: f64) -> bool {
        self.max_angle_error <= tol
    }

    pub fn declusters(&self) -> bool {
        self.mapped_ratio < self.original_ratio
    }
}

/// Compares `atan2` of points and their images, and the radius spreads.
pub fn angle_preservation_check(map: &NodeMap, points: &[[f64; 2]]) -> Result<AngleCheck> {
    if !matches!(map, NodeMap::LogPolar { .. }) {
        return Err(Error::Invalid("angle check applies to log-polar maps".into()));
    }
    let mut max_angle_error: f64 = 0.0;
    let (mut r_lo, mut r_hi, mut s_lo, mut s_hi) = (f64::INFINITY, 0.0f64, f64::INFINITY, 0.0f64);
    for p in points {
        let s = map.apply_map(p)?;
        let mut d = (s[1].atan2(s[0]) - p[1].atan2(p[0])).abs();
        if d > std::f64::consts::PI {
            d = std::f64::consts::TAU - d;
        }
        max_angle_error = max_angle_error.max(d);
        let (r, rs) = (p[0].hypot(p[1]), s[0].hypot(s[1]));
        r_lo = r_lo.min(r);
        r_hi = r_hi.max(r);
        s_lo = s_lo.min(rs);
        s_hi = s_hi.max(rs);
    }
    Ok(AngleCheck { max_angle_error, original_ratio: r_hi / r_lo, mapped_ratio: s_hi / s_lo })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::{default_stix_geometry, forward_model, pipeline::GaussianComponent, pipeline::SourceModel};
    use crate::interpolation::assemble_gram;
    use crate::scalings::mvsk_eval;
    use nalgebra::DVector;
    use approx::assert_relative_eq;

    fn spec() -> GridSpec {
        GridSpec::nyquist(32, 7.02e-2).unwrap()
    }

    fn gaussian_vis(components: Vec<GaussianComponent>) -> VisibilitySet {
        forward_model(&SourceModel { components }.render(&spec()), &default_stix_geometry())
    }

    #[test]
    fn log_polar_normalization() {
        let s = log_polar_for_radii(0.5, 2.0).unwrap();
        let y = s.apply_map(&[2.0, 0.0]).unwrap();
        assert_relative_eq!(y[0], 2.0, max_relative = 1e-14);
        let y = s.apply_map(&[0.0, 0.5]).unwrap();
        let NodeMap::LogPolar { scale, .. } = s else { unreachable!() };
        assert_relative_eq!(y[1], scale, max_relative = 1e-14);
        let unit = NodeMap::LogPolar { scale: 1.0, reference_radius: 1.0 };
        let y = unit.apply_map(&[2.5, 0.0]).unwrap();
        assert_relative_eq!(y[0], 2.5f64.ln(), max_relative = 1e-15);
        assert_eq!(y[1], 0.0);
    }

    #[test]
    fn default_geometry_angles_and_declustering() {
        let g = default_stix_geometry();
        let map = log_polar_for_radii(g.min_radius(), g.max_radius()).unwrap();
        let check = angle_preservation_check(&map, g.points()).unwrap();
        assert!(check.preserves_angles(1e-12));
        assert_relative_eq!(check.original_ratio, 7.02e-2 / 2.79e-3, max_relative = 1e-12);
        assert!(check.declusters());
        // ratio is 1 + ln(r_max / r_min)
        assert_relative_eq!(check.mapped_ratio, 1.0 + (7.02e-2f64 / 2.79e-3).ln(), max_relative = 1e-12);
    }

    #[test]
    fn psi_is_normalized_and_decays() {
        let vis = gaussian_vis(vec![GaussianComponent { center: [0.0, 0.0], sigma: 12.0, flux: 1.0 }]);
        let psi = build_psi_from_backprojection(&vis, &spec(), PsiMode::Magnitude, 65, vis.geometry().max_radius()).unwrap();
        let ScalingFunction::Sampled(s) = &psi else { panic!("expected sampled psi") };
        assert!(s.values().iter().all(|v| (0.0..=1.0).contains(v)));
        assert_relative_eq!(psi.apply_scaling(&[0.0, 0.0]).unwrap(), 1.0, max_relative = 1e-12);
        let ring = |r: f64| -> f64 {
            (0..36).map(|k| {
                let t = k as f64 * std::f64::consts::TAU / 36.0;
                psi.apply_scaling(&[r * t.cos(), r * t.sin()]).unwrap()
            }).sum::<f64>() / 36.0
        };
        assert!(ring(0.1) > ring(0.5));
        assert!(ring(0.5) > ring(0.9));
    }

    #[test]
    fn zero_visibilities_give_constant_psi() {
        let g = default_stix_geometry();
        let vis = VisibilitySet::new(g, vec![Complex64::new(0.0, 0.0); 60], None).unwrap();
        let psi = build_psi_from_backprojection(&vis, &spec(), PsiMode::Magnitude, 33, 1.0).unwrap();
        assert!(psi.is_constant());
        assert_eq!(psi.apply_scaling(&[0.1, 0.2]).unwrap(), 0.0);
    }

    fn mvsk_map(vis: &VisibilitySet) -> AugmentedMap {
        let g = vis.geometry();
        let unit = g.max_radius();
        let psi = build_psi_from_backprojection(vis, &spec(), PsiMode::Magnitude, 65, unit).unwrap();
        AugmentedMap::new(log_polar_for_radii(g.min_radius() / unit, 1.0).unwrap(), psi).unwrap()
    }

    #[test]
    fn surface_interpolates_and_is_conjugate_symmetric() {
        let vis = gaussian_vis(vec![
            GaussianComponent { center: [-10.0, 5.0], sigma: 12.0, flux: 1.0 },
            GaussianComponent { center: [12.0, -4.0], sigma: 9.0, flux: 0.6 },
        ]);
        let map = mvsk_map(&vis);
        let loocv = LoocvConfig::linspace(0.1, 10.0, 30).unwrap();
        let unit = vis.geometry().max_radius();
        let freqs = spec().frequency_axis();
        let out = interpolate_visibility_surface(&vis, Profile::MaternC6, &map, &loocv, &freqs, unit).unwrap();
        assert!(out.node_residual <= 1e-6, "node residual {}", out.node_residual);
        let scale = vis.values().iter().map(|c| c.norm()).fold(0.0, f64::max);
        assert!(out.surface.conjugate_asymmetry() <= 1e-8 * scale);
        // origin of the grid takes the innermost-circle mean
        let c = out.surface.at(16, 16);
        let inner: Complex64 = vis.values().iter().zip(vis.geometry().points()).filter(|(_, p)| p[0].hypot(p[1]) < 2.8e-3).map(|(v, _)| *v).sum::<Complex64>() / 6.0;
        assert_relative_eq!((c - inner).norm(), 0.0, epsilon = 1e-15);
        // corners lie outside the sampled disk
        assert_eq!(out.surface.at(0, 0), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn constant_data_matches_dense_interpolant() {
        let g = default_stix_geometry();
        let gamma = Complex64::new(0.7, 0.0);
        let vis = VisibilitySet::new(g.clone(), vec![gamma; 60], None).unwrap();
        let map = mvsk_map(&vis);
        let loocv = LoocvConfig::new(vec![3.0]).unwrap();
        let unit = g.max_radius();
        let freqs = spec().frequency_axis();
        let out = interpolate_visibility_surface(&vis, Profile::MaternC6, &map, &loocv, &freqs, unit).unwrap();
        let nodes = NodeSet::from_points(&g.points().iter().map(|p| [p[0] / unit, p[1] / unit]).collect::<Vec<_>>()).unwrap();
        // independent dense LU solve and direct kernel sums
        let kernel = RadialKernel::new(Profile::MaternC6, 3.0).unwrap();
        let gram = assemble_gram(&kernel, &map, &nodes).unwrap();
        let coef = gram.lu().solve(&DVector::from_element(60, 0.7)).unwrap();
        let probe = [freqs[20] / unit, freqs[13] / unit];
        let expected: f64 = nodes.iter().zip(coef.iter()).map(|(p, c)| c * mvsk_eval(&kernel, &map, &probe, p).unwrap()).sum();
        assert_relative_eq!(out.surface.at(20, 13).re, expected, max_relative = 1e-10);
        assert_eq!(out.surface.at(20, 13).im, 0.0);
    }
}
