//! File formats: state JSON, complex CSV cells, run configuration, atomic writes.
//!
//! Complex numbers are `[re, im]` in JSON and a quoted `"re,im"` cell in CSV.
//! Floats are printed with Rust's shortest round-trip representation.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::bargmann::HoloState;
use crate::cylinder::HeatKernelParams;
use crate::defaults;
use crate::error::{Error, Result};
use crate::geometry::ChartDesc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// `{"N": 8, "coeffs": [[re, im], ...]}` with `2N + 1` coefficients for labels `-N..=N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFile {
    #[serde(rename = "N")]
    pub truncation: usize,
    pub coeffs: Vec<[f64; 2]>,
}

impl StateFile {
    pub fn from_state(state: &HoloState) -> Result<Self> {
        let truncation = state
            .truncation()
            .ok_or_else(|| Error::InvalidInput("state length must be odd".into()))?;
        Ok(Self {
            truncation,
            coeffs: state.coeffs().iter().map(|c| complex_pair(*c)).collect(),
        })
    }

    pub fn to_state(&self) -> Result<HoloState> {
        let d = 2 * self.truncation + 1;
        if self.coeffs.len() != d {
            return Err(Error::DimensionMismatch {
                context: "state file: 2N+1 coefficients",
                expected: d,
                found: self.coeffs.len(),
            });
        }
        HoloState::new(self.coeffs.iter().map(|&[re, im]| Complex64::new(re, im)).collect())
    }
}

pub fn read_state(path: &Path) -> Result<HoloState> {
    let text = fs::read_to_string(path)?;
    let file: StateFile = serde_json::from_str(&text)?;
    file.to_state()
}

pub fn state_json(state: &HoloState) -> Result<String> {
    Ok(serde_json::to_string_pretty(&StateFile::from_state(state)?)?)
}

pub fn complex_pair(c: Complex64) -> [f64; 2] {
    [c.re, c.im]
}

pub fn fmt_f64(x: f64) -> String {
    format!("{x:?}")
}

/// `"re,im"`, quoted.
pub fn complex_cell(c: Complex64) -> String {
    format!("\"{},{}\"", fmt_f64(c.re), fmt_f64(c.im))
}

/// Plain matrix, one CSV row per matrix row.
pub fn matrix_csv(m: &DMatrix<Complex64>) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|j| complex_cell(m[(i, j)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Grid with a header row of column points and a first column of row points.
pub fn grid_csv(rows: &[f64], cols: &[f64], values: &DMatrix<Complex64>) -> String {
    let mut out = String::from("z\\w");
    for c in cols {
        out.push(',');
        out.push_str(&fmt_f64(*c));
    }
    out.push('\n');
    for (i, r) in rows.iter().enumerate() {
        out.push_str(&fmt_f64(*r));
        for j in 0..cols.len() {
            out.push(',');
            out.push_str(&complex_cell(values[(i, j)]));
        }
        out.push('\n');
    }
    out
}

/// Row-major `[[re, im], ...]` rows for JSON.
pub fn matrix_json(m: &DMatrix<Complex64>) -> Vec<Vec<[f64; 2]>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| complex_pair(m[(i, j)])).collect())
        .collect()
}

/// Writes to a sibling temporary file and renames it over `path`.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidInput(format!("output path {} has no file name", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    fs::write(&tmp, contents)?;
    if let Err(e) = fs::rename(&tmp, path) {
        let _ = fs::remove_file(&tmp);
        return Err(e.into());
    }
    Ok(())
}

/// Propagator settings in a run configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PropagatorSettings {
    pub t: f64,
    pub steps: usize,
    pub epsilon: f64,
    pub division_guard: f64,
}

impl Default for PropagatorSettings {
    fn default() -> Self {
        Self {
            t: 1.0,
            steps: 16,
            epsilon: defaults::EPSILON,
            division_guard: defaults::DIVISION_GUARD,
        }
    }
}

/// Settings loadable with `--config`. Command-line flags override them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub chart: Option<ChartDesc>,
    pub truncation: usize,
    pub quad_order: usize,
    pub heat: HeatKernelParams,
    pub propagator: PropagatorSettings,
    pub output: Option<PathBuf>,
    pub format: Format,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            chart: None,
            truncation: defaults::TRUNCATION,
            quad_order: defaults::QUAD_ORDER,
            heat: HeatKernelParams::default(),
            propagator: PropagatorSettings::default(),
            output: None,
            format: Format::Csv,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::InvalidInput(format!("cannot read config {}: {e}", path.display())))?;
        let cfg: RunConfig = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.quad_order == 0 || self.quad_order > 512 {
            return Err(Error::InvalidInput(format!("quad_order must be in 1..=512, got {}", self.quad_order)));
        }
        if self.truncation > 40 {
            return Err(Error::InvalidInput(format!("truncation must be at most 40, got {}", self.truncation)));
        }
        self.heat.validate()?;
        let p = &self.propagator;
        if p.steps == 0 || !p.t.is_finite() || !(p.epsilon >= 0.0) || !(p.division_guard > 0.0) {
            return Err(Error::InvalidInput(
                "propagator needs steps >= 1, finite t, epsilon >= 0, division_guard > 0".into(),
            ));
        }
        if let Some(chart) = &self.chart {
            chart.build()?;
        }
        Ok(())
    }
}
