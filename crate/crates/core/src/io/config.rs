use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::{EpsilonGrid, ExperimentConfig};
use crate::imaging::ReconstructionConfig;
use crate::kernels::Profile;
use crate::scalings::{AugmentedMap, Partition};

/// Configuration types loadable from TOML or JSON.
pub trait ConfigFile: DeserializeOwned {
    /// Accepted top-level keys.
    const KEYS: &'static [&'static str];

    fn validate(&self) -> Result<()>;

    /// Resolves relative paths against the directory holding the config file.
    fn resolve_paths(&mut self, _base: &Path) {}
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Toml,
    Json,
}

fn format_of(path: &Path) -> Format {
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("json") => Format::Json,
        _ => Format::Toml,
    }
}

fn suggestion(key: &str, valid: &[&str]) -> String {
    let nearest = valid
        .iter()
        .map(|v| (strsim::levenshtein(key, v), *v))
        .min()
        .map(|(_, v)| v)
        .unwrap_or_default();
    format!("unknown key; did you mean `{nearest}`? valid keys: {}", valid.join(", "))
}

/// Parses configuration text; `origin` is used in error messages.
pub fn parse_config_str<T: ConfigFile>(text: &str, json: bool, origin: &Path) -> Result<T> {
    let value: serde_json::Value = if json {
        serde_json::from_str(text).map_err(|e| Error::parse(origin, e))?
    } else {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::parse(origin, e.to_string().trim_end()))?;
        serde_json::to_value(table).map_err(|e| Error::parse(origin, e))?
    };
    let Some(object) = value.as_object() else {
        return Err(Error::parse(origin, "top level must be a table"));
    };
    if let Some(key) = object.keys().find(|k| !T::KEYS.contains(&k.as_str())) {
        return Err(Error::config(key.clone(), suggestion(key, T::KEYS)));
    }
    // deserialize from the original text so errors keep their line numbers
    let config: T = if json {
        serde_json::from_str(text).map_err(|e| Error::parse(origin, e))?
    } else {
        toml::from_str(text).map_err(|e: toml::de::Error| Error::parse(origin, e.to_string().trim_end()))?
    };
    config.validate()?;
    Ok(config)
}

/// Loads and validates a config file; `.json` files are JSON, anything else TOML.
pub fn parse_config<T: ConfigFile>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let json = format_of(path) == Format::Json;
    // file existence is checked after relative paths are resolved
    let mut config: T = parse_unvalidated(&text, json, path)?;
    if let Some(base) = path.parent() {
        config.resolve_paths(base);
    }
    config.validate()?;
    Ok(config)
}

fn parse_unvalidated<T: ConfigFile>(text: &str, json: bool, origin: &Path) -> Result<T> {
    struct Unchecked<T>(T);
    impl<'de, T: ConfigFile> Deserialize<'de> for Unchecked<T> {
        fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
            T::deserialize(d).map(Unchecked)
        }
    }
    impl<T: ConfigFile> ConfigFile for Unchecked<T> {
        const KEYS: &'static [&'static str] = T::KEYS;
        fn validate(&self) -> Result<()> {
            Ok(())
        }
    }
    parse_config_str::<Unchecked<T>>(text, json, origin).map(|u| u.0)
}

fn resolve(base: &Path, path: &mut PathBuf) {
    if path.is_relative() && !base.as_os_str().is_empty() {
        *path = base.join(&*path);
    }
}

fn require_file(field: &str, path: &Path) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::config(field, format!("file `{}` does not exist", path.display())))
    }
}

/// Fit an interpolant to a node CSV and optionally evaluate it at query points.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterpConfig {
    /// Node CSV: coordinates followed by the data value.
    pub nodes: PathBuf,
    /// Query CSV: coordinates only.
    #[serde(default)]
    pub queries: Option<PathBuf>,
    #[serde(default = "default_profile")]
    pub kernel: Profile,
    /// Fixed shape parameter; chosen by leave-one-out cross validation when absent.
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub loocv: EpsilonGrid,
    #[serde(default = "AugmentedMap::classical")]
    pub map: AugmentedMap,
    #[serde(default)]
    pub ridge: f64,
}

fn default_profile() -> Profile {
    Profile::MaternC6
}

impl ConfigFile for InterpConfig {
    const KEYS: &'static [&'static str] = &["nodes", "queries", "kernel", "epsilon", "loocv", "map", "ridge"];

    fn validate(&self) -> Result<()> {
        if let Some(e) = self.epsilon {
            if !(e > 0.0 && e.is_finite()) {
                return Err(Error::config("epsilon", format!("must be positive and finite, got {e}")));
            }
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return Err(Error::config("ridge", "must be nonnegative"));
        }
        self.loocv.to_config()?;
        self.map.node_map.validate()?;
        require_file("nodes", &self.nodes)?;
        if let Some(q) = &self.queries {
            require_file("queries", q)?;
        }
        Ok(())
    }

    fn resolve_paths(&mut self, base: &Path) {
        resolve(base, &mut self.nodes);
        if let Some(q) = &mut self.queries {
            resolve(base, q);
        }
    }
}

/// Fill and separation distances of a node CSV over a box.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsConfig {
    /// Node CSV: coordinates only.
    pub nodes: PathBuf,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    #[serde(default = "default_resolution")]
    pub resolution: usize,
    #[serde(default)]
    pub partition: Option<Partition>,
}

fn default_resolution() -> usize {
    crate::metrics::DEFAULT_FILL_RESOLUTION
}

impl ConfigFile for MetricsConfig {
    const KEYS: &'static [&'static str] = &["nodes", "lower", "upper", "resolution", "partition"];

    fn validate(&self) -> Result<()> {
        crate::metrics::DomainBox::new(self.lower.clone(), self.upper.clone(), self.resolution)?;
        if let Some(p) = &self.partition {
            p.validate()?;
        }
        require_file("nodes", &self.nodes)
    }

    fn resolve_paths(&mut self, base: &Path) {
        resolve(base, &mut self.nodes);
    }
}

impl ConfigFile for ExperimentConfig {
    const KEYS: &'static [&'static str] = ExperimentConfig::KEYS;

    fn validate(&self) -> Result<()> {
        ExperimentConfig::validate(self)
    }

    fn resolve_paths(&mut self, base: &Path) {
        if let Some(dir) = &mut self.output_dir {
            resolve(base, dir);
        }
    }
}

impl ConfigFile for ReconstructionConfig {
    const KEYS: &'static [&'static str] = ReconstructionConfig::KEYS;

    fn validate(&self) -> Result<()> {
        ReconstructionConfig::validate(self)
    }
}
