//! Radial kernel profiles.
//!
//! A [`RadialKernel`] pairs a univariate profile with a shape parameter
//! `epsilon` and induces the two-point kernel `k(x, y) = phi(epsilon * |x - y|)`.
//! The Matérn profile is used unnormalized, so `phi(0) = 15`; rescaling it
//! changes the interpolation coefficients but not the interpolant.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Univariate radial profile.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Profile {
    /// `(1 - s)_+^2`, compactly supported on `s <= 1`.
    #[serde(rename = "wendland0")]
    WendlandC0,
    /// `e^{-s} (15 + 15 s + 6 s^2 + s^3)`.
    #[serde(rename = "matern6")]
    MaternC6,
    /// `e^{-s^2}`.
    #[serde(rename = "gaussian")]
    Gaussian,
}

impl Profile {
    pub const ALL: [Profile; 3] = [Profile::WendlandC0, Profile::MaternC6, Profile::Gaussian];

    /// Profile value at the scaled distance `s = epsilon * r`.
    #[inline]
    pub fn at_scaled(self, s: f64) -> f64 {
        match self {
            Profile::WendlandC0 => {
                let t = (1.0 - s).max(0.0);
                t * t
            }
            Profile::MaternC6 => (-s).exp() * (15.0 + s * (15.0 + s * (6.0 + s))),
            Profile::Gaussian => (-s * s).exp(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Profile::WendlandC0 => "wendland0",
            Profile::MaternC6 => "matern6",
            Profile::Gaussian => "gaussian",
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "wendland0" => Ok(Profile::WendlandC0),
            "matern6" => Ok(Profile::MaternC6),
            "gaussian" => Ok(Profile::Gaussian),
            other => Err(Error::config(
                "kernel",
                format!("unknown kernel `{other}`; expected one of wendland0, matern6, gaussian"),
            )),
        }
    }
}

/// A radial profile together with a positive shape parameter.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawKernel")]
pub struct RadialKernel {
    profile: Profile,
    epsilon: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawKernel {
    profile: Profile,
    epsilon: f64,
}

impl TryFrom<RawKernel> for RadialKernel {
    type Error = Error;

    fn try_from(raw: RawKernel) -> Result<Self> {
        RadialKernel::new(raw.profile, raw.epsilon)
    }
}

impl RadialKernel {
    pub fn new(profile: Profile, epsilon: f64) -> Result<Self> {
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(Error::config("epsilon", format!("must be a positive finite number, got {epsilon}")));
        }
        Ok(Self { profile, epsilon })
    }

    pub fn profile(&self) -> Profile {
        self.profile
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        Self::new(self.profile, epsilon)
    }

    /// `phi_epsilon(r)` for `r >= 0`.
    pub fn eval_profile(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(Error::Domain(format!("radial distance must be nonnegative, got {r}")));
        }
        Ok(self.phi(r))
    }

    #[inline]
    pub(crate) fn phi(&self, r: f64) -> f64 {
        self.profile.at_scaled(self.epsilon * r)
    }

    /// `phi(0)`, the diagonal of every Gram matrix built from this kernel.
    pub fn peak(&self) -> f64 {
        self.phi(0.0)
    }

    /// `k(x, y) = phi_epsilon(|x - y|_2)`.
    pub fn eval_kernel(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if x.len() != y.len() {
            return Err(Error::Shape { expected: x.len(), found: y.len() });
        }
        Ok(self.phi(distance(x, y)))
    }
}

#[inline]
pub(crate) fn squared_distance(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

#[inline]
pub(crate) fn distance(x: &[f64], y: &[f64]) -> f64 {
    squared_distance(x, y).sqrt()
}
