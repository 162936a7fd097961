//! Configuration files, CSV tables and JSON artifacts.
//!
//! Floats are written with 17 significant digits so that reading a file back
//! reproduces the values bit for bit. JSON artifacts carry a `schema_version`.

mod config;

use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub use config::{parse_config, parse_config_str, ConfigFile, InterpConfig, MetricsConfig};

use crate::error::{Error, Result};
use crate::harness::{DistanceRow, ExperimentReport, ResultRow};
use crate::imaging::{ImageGrid, Reconstruction, UvGeometry, VisibilitySet};
use crate::interpolation::NodeSet;

pub const SCHEMA_VERSION: u32 = 1;

/// `{:.16e}` formatting: 17 significant digits, exact on round trip.
pub fn format_float(v: f64) -> String {
    if v.is_nan() {
        "NaN".into()
    } else if v.is_infinite() {
        if v > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{v:.16e}")
    }
}

fn parse_float(s: &str, path: &Path, line: u64) -> Result<f64> {
    s.trim().parse::<f64>().map_err(|_| Error::parse(path, format!("line {line}: `{s}` is not a number")))
}

/// A row of a CSV table with a fixed column order.
pub trait CsvRow {
    const HEADER: &'static [&'static str];

    fn fields(&self) -> Vec<String>;
}

impl CsvRow for ResultRow {
    const HEADER: &'static [&'static str] = &[
        "kernel",
        "variant",
        "n_requested",
        "n_nodes",
        "epsilon",
        "rmse",
        "near_jump_error",
        "fill_distance",
        "separation_distance",
        "condition_estimate",
        "failed",
        "message",
    ];

    fn fields(&self) -> Vec<String> {
        vec![
            self.kernel.name().into(),
            self.variant.name().into(),
            self.n_requested.to_string(),
            self.n_nodes.to_string(),
            format_float(self.epsilon),
            format_float(self.rmse),
            format_float(self.near_jump_error),
            format_float(self.fill_distance),
            format_float(self.separation_distance),
            format_float(self.condition_estimate),
            self.failed.to_string(),
            self.message.clone(),
        ]
    }
}

impl CsvRow for DistanceRow {
    const HEADER: &'static [&'static str] = &[
        "variant",
        "n_requested",
        "n_nodes",
        "fill_distance",
        "separation_distance",
        "regional_fill",
        "regional_separation",
    ];

    fn fields(&self) -> Vec<String> {
        vec![
            self.variant.name().into(),
            self.n_requested.to_string(),
            self.n_nodes.to_string(),
            format_float(self.fill_distance),
            format_float(self.separation_distance),
            format_float(self.regional_fill),
            format_float(self.regional_separation),
        ]
    }
}

fn create_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(dir) if !dir.as_os_str().is_empty() => fs::create_dir_all(dir).map_err(|e| Error::io(dir, e)),
        _ => Ok(()),
    }
}

fn write_records(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    create_parent(path)?;
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    w.write_record(header).map_err(|e| csv_error(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        csv::ErrorKind::UnequalLengths { pos, expected_len, len } => {
            let line = pos.map_or(0, |p| p.line());
            Error::parse(path, format!("line {line}: expected {expected_len} columns, found {len}"))
        }
        csv::ErrorKind::Utf8 { pos, err } => {
            let line = pos.map_or(0, |p| p.line());
            Error::parse(path, format!("line {line}: {err}"))
        }
        other => Error::parse(path, format!("{other:?}")),
    }
}

/// Writes a table; an empty table yields the header only.
pub fn write_table<R: CsvRow>(path: &Path, rows: &[R]) -> Result<()> {
    let header: Vec<String> = R::HEADER.iter().map(|s| s.to_string()).collect();
    write_records(path, &header, rows.iter().map(CsvRow::fields))
}

/// Numeric CSV with an optional header row (detected by a non-numeric first field).
struct NumericTable {
    header: Option<Vec<String>>,
    rows: Vec<Vec<f64>>,
}

fn read_numeric(path: &Path) -> Result<NumericTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .flexible(true)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut header = None;
    let mut rows = Vec::new();
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(k as u64 + 1, |p| p.line());
        if k == 0 && record.iter().next().is_some_and(|f| f.parse::<f64>().is_err()) {
            header = Some(record.iter().map(str::to_string).collect());
            continue;
        }
        let row = record.iter().map(|f| parse_float(f, path, line)).collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first().map(Vec::len) {
            if row.len() != first {
                return Err(Error::parse(path, format!("line {line}: expected {first} columns, found {}", row.len())));
            }
        }
        rows.push(row);
    }
    Ok(NumericTable { header, rows })
}

/// Nodes with data values.
#[derive(Clone, Debug, PartialEq)]
pub struct Samples {
    pub nodes: NodeSet,
    pub values: Vec<f64>,
}

/// Writes `x1, ..., xd[, value]` rows.
pub fn write_nodes_csv(path: &Path, nodes: &NodeSet, values: Option<&[f64]>) -> Result<()> {
    if let Some(v) = values {
        if v.len() != nodes.len() {
            return Err(Error::Shape { expected: nodes.len(), found: v.len() });
        }
    }
    let mut header: Vec<String> = (1..=nodes.dim()).map(|k| format!("x{k}")).collect();
    if values.is_some() {
        header.push("value".into());
    }
    let rows = nodes.iter().enumerate().map(|(i, p)| {
        let mut row: Vec<String> = p.iter().copied().map(format_float).collect();
        if let Some(v) = values {
            row.push(format_float(v[i]));
        }
        row
    });
    write_records(path, &header, rows)
}

/// Reads a coordinates-only node CSV.
pub fn read_nodes_csv(path: &Path) -> Result<NodeSet> {
    let table = read_numeric(path)?;
    let dim = table.rows.first().map(Vec::len).ok_or_else(|| Error::parse(path, "no rows"))?;
    NodeSet::new(dim, table.rows.into_iter().flatten().collect())
}

/// Reads nodes with values: the `value` column when a header names one, else the last column.
pub fn read_samples_csv(path: &Path) -> Result<Samples> {
    let table = read_numeric(path)?;
    let width = table.rows.first().map(Vec::len).ok_or_else(|| Error::parse(path, "no rows"))?;
    if width < 2 {
        return Err(Error::parse(path, "need at least one coordinate column and a value column"));
    }
    let value_col = table
        .header
        .as_ref()
        .and_then(|h| h.iter().position(|c| c.eq_ignore_ascii_case("value")))
        .unwrap_or(width - 1);
    let mut coords = Vec::with_capacity(table.rows.len() * (width - 1));
    let mut values = Vec::with_capacity(table.rows.len());
    for row in table.rows {
        for (j, v) in row.into_iter().enumerate() {
            if j == value_col {
                values.push(v);
            } else {
                coords.push(v);
            }
        }
    }
    Ok(Samples { nodes: NodeSet::new(width - 1, coords)?, values })
}

const VIS_HEADER: [&str; 5] = ["u", "v", "re", "im", "sigma"];

/// Writes `u, v, re, im, sigma`; `sigma` is empty when no noise levels are set.
pub fn write_visibilities_csv(path: &Path, vis: &VisibilitySet) -> Result<()> {
    let header: Vec<String> = VIS_HEADER.iter().map(|s| s.to_string()).collect();
    let rows = vis.geometry().points().iter().zip(vis.values()).enumerate().map(|(i, (p, v))| {
        vec![
            format_float(p[0]),
            format_float(p[1]),
            format_float(v.re),
            format_float(v.im),
            vis.noise_sigma().map(|s| format_float(s[i])).unwrap_or_default(),
        ]
    });
    write_records(path, &header, rows)
}

pub fn read_visibilities_csv(path: &Path) -> Result<VisibilitySet> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(|e| csv_error(path, e))?;
    let header = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    let col = |name: &str| header.iter().position(|h| h.eq_ignore_ascii_case(name));
    let idx: Vec<Option<usize>> = VIS_HEADER.iter().map(|n| col(n)).collect();
    if idx[..4].iter().any(Option::is_none) {
        return Err(Error::parse(path, "visibility CSV needs columns u, v, re, im (and optionally sigma)"));
    }
    let (mut points, mut values, mut sigma) = (Vec::new(), Vec::new(), Vec::new());
    let mut any_sigma = false;
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let line = record.position().map_or(0, |p| p.line());
        let get = |k: usize| parse_float(&record[idx[k].unwrap()], path, line);
        points.push([get(0)?, get(1)?]);
        values.push(Complex64::new(get(2)?, get(3)?));
        match idx[4].map(|j| &record[j]) {
            Some(s) if !s.is_empty() => {
                any_sigma = true;
                sigma.push(parse_float(s, path, line)?);
            }
            _ => sigma.push(1.0),
        }
    }
    VisibilitySet::new(UvGeometry::from_points(points)?, values, any_sigma.then_some(sigma))
}

/// Reads a `u, v` geometry CSV (header optional, extra columns ignored).
pub fn read_geometry_csv(path: &Path) -> Result<UvGeometry> {
    let table = read_numeric(path)?;
    if table.rows.first().is_some_and(|r| r.len() < 2) {
        return Err(Error::parse(path, "geometry CSV needs u and v columns"));
    }
    UvGeometry::from_points(table.rows.iter().map(|r| [r[0], r[1]]).collect())
}

/// Image as a square text grid, one image row per line, first line `y` lowest.
pub fn write_image_csv(path: &Path, image: &ImageGrid) -> Result<()> {
    let n = image.spec().size;
    let header: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
    write_records(path, &header, image.flux().chunks_exact(n).map(|row| row.iter().copied().map(format_float).collect()))
}

#[derive(Serialize, Deserialize)]
struct Versioned<T> {
    schema_version: u32,
    #[serde(flatten)]
    body: T,
}

/// Pretty JSON with a leading `schema_version` field.
pub fn json_string<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(&Versioned { schema_version: SCHEMA_VERSION, body: value })
        .map_err(|e| Error::Invalid(format!("cannot serialize: {e}")))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    create_parent(path)?;
    let text = json_string(value)?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

/// Reads a versioned JSON artifact, rejecting unknown schema versions.
pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let v: Versioned<T> = serde_json::from_str(&text).map_err(|e| Error::parse(path, e))?;
    if v.schema_version != SCHEMA_VERSION {
        return Err(Error::parse(path, format!("unsupported schema_version {}", v.schema_version)));
    }
    Ok(v.body)
}

/// `rmse.csv`, `distances.csv` and one `loocv_curves/<kernel>_<variant>_N<n>.csv` per cell.
pub fn write_experiment(dir: &Path, report: &ExperimentReport) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_table(&dir.join("rmse.csv"), &report.rows)?;
    write_table(&dir.join("distances.csv"), &report.distances)?;
    let curves = dir.join("loocv_curves");
    fs::create_dir_all(&curves).map_err(|e| Error::io(&curves, e))?;
    for c in &report.curves {
        let path = curves.join(format!("{}_{}_N{}.csv", c.kernel.name(), c.variant.name(), c.n_requested));
        write_score_curve(&path, c.selection.as_ref().map(|s| s.score_curve.as_slice()).unwrap_or_default())?;
    }
    Ok(())
}

/// `epsilon, loo_rmse` rows; rejected grid values score `inf`.
pub fn write_score_curve(path: &Path, curve: &[(f64, f64)]) -> Result<()> {
    let header = vec!["epsilon".to_string(), "loo_rmse".to_string()];
    write_records(path, &header, curve.iter().map(|(e, s)| vec![format_float(*e), format_float(*s)]))
}

#[derive(Serialize)]
struct ReconstructionSummary<'a> {
    variant: &'a str,
    chi_square: f64,
    epsilon: f64,
    iterations: usize,
    relaxation: f64,
    node_residual: f64,
    pixel_size: f64,
    image_size: usize,
    total_flux: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    relative_l2_error: Option<f64>,
}

/// `image.csv`, `residuals.csv`, `visibility_fit.csv` and `summary.json`.
pub fn write_reconstruction(dir: &Path, observed: &VisibilitySet, rec: &Reconstruction, truth: Option<&ImageGrid>) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_image_csv(&dir.join("image.csv"), &rec.image)?;
    write_records(
        &dir.join("residuals.csv"),
        &["iteration".to_string(), "residual".to_string()],
        rec.residual_history.iter().enumerate().map(|(k, r)| vec![k.to_string(), format_float(*r)]),
    )?;
    let header: Vec<String> =
        ["u", "v", "re_observed", "im_observed", "re_predicted", "im_predicted", "sigma"].iter().map(|s| s.to_string()).collect();
    let rows = observed.geometry().points().iter().enumerate().map(|(i, p)| {
        let (o, q) = (observed.values()[i], rec.predicted.values()[i]);
        vec![
            format_float(p[0]),
            format_float(p[1]),
            format_float(o.re),
            format_float(o.im),
            format_float(q.re),
            format_float(q.im),
            format_float(observed.noise_sigma().map_or(1.0, |s| s[i])),
        ]
    });
    write_records(&dir.join("visibility_fit.csv"), &header, rows)?;
    let relative_l2_error = match truth {
        Some(t) => Some(crate::imaging::relative_l2_error(rec.image.flux(), t.flux())?),
        None => None,
    };
    write_json(
        &dir.join("summary.json"),
        &ReconstructionSummary {
            variant: rec.variant.name(),
            chi_square: rec.chi_square,
            epsilon: rec.surface.epsilon,
            iterations: rec.residual_history.len() - 1,
            relaxation: rec.relaxation,
            node_residual: rec.surface.node_residual,
            pixel_size: rec.image.spec().pixel_size,
            image_size: rec.image.spec().size,
            total_flux: rec.image.total_flux(),
            relative_l2_error,
        },
    )
}
