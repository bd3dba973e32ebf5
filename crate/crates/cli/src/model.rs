//! Model files: a labelled classical-quantum source, optionally with a
//! second family of output states for the alternative hypothesis.

use std::path::Path;

use cqbound::hypothesis::CQSource;
use cqbound::linalg::{DensityMatrix, HermitianOperator};
use cqbound::tolerance::{DISTRIBUTION_TOL, HERMITIAN_TOL, TRACE_TOL};
use serde::Deserialize;

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

type ComplexMatrix = Vec<Vec<[f64; 2]>>;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub schema_version: u32,
    pub alphabet: Vec<String>,
    pub q_x: Vec<f64>,
    pub states: Vec<ComplexMatrix>,
    #[serde(default)]
    pub alt_states: Option<Vec<ComplexMatrix>>,
    /// Free-form annotations; accepted and ignored.
    #[serde(default, rename = "labels")]
    _labels: Option<serde_json::Value>,
    #[serde(default, rename = "metadata")]
    _metadata: Option<serde_json::Value>,
}

#[derive(Debug, Clone)]
pub struct Model {
    pub source: CQSource,
    pub alt_states: Option<Vec<DensityMatrix>>,
}

pub fn load_model(path: &Path) -> Result<Model, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Validation(format!("{}: {e}", path.display())))?;
    parse_model(&text)
}

pub fn parse_model(text: &str) -> Result<Model, CliError> {
    let file: ModelFile = serde_json::from_str(text).map_err(|e| CliError::Validation(format!("model: {e}")))?;
    validate(file)
}

fn validate(file: ModelFile) -> Result<Model, CliError> {
    if file.schema_version != SCHEMA_VERSION {
        return Err(CliError::Validation(format!(
            "schema_version: {} is not supported (expected {SCHEMA_VERSION})",
            file.schema_version
        )));
    }
    let k = file.alphabet.len();
    if k == 0 {
        return Err(CliError::Validation("alphabet: must not be empty".into()));
    }
    if file.q_x.len() != k {
        return Err(CliError::Validation(format!("q_x: has {} entries, alphabet has {k}", file.q_x.len())));
    }
    if let Some(i) = file.q_x.iter().position(|p| !(*p > 0.0) || !p.is_finite()) {
        return Err(CliError::Validation(format!("q_x[{i}]: {} must be positive", file.q_x[i])));
    }
    let total: f64 = file.q_x.iter().sum();
    if (total - 1.0).abs() > DISTRIBUTION_TOL {
        return Err(CliError::Validation(format!("q_x: sums to {total}, must be 1 within {DISTRIBUTION_TOL:e}")));
    }
    if file.states.len() != k {
        return Err(CliError::Validation(format!("states: has {} entries, alphabet has {k}", file.states.len())));
    }
    let states = densities(&file.states, "states")?;
    let d = states[0].dim();
    let alt_states = match &file.alt_states {
        None => None,
        Some(alt) => {
            if alt.len() != k {
                return Err(CliError::Validation(format!("alt_states: has {} entries, alphabet has {k}", alt.len())));
            }
            let alt = densities(alt, "alt_states")?;
            if let Some(i) = alt.iter().position(|s| s.dim() != d) {
                return Err(CliError::Validation(format!("alt_states[{i}]: dimension {} differs from {d}", alt[i].dim())));
            }
            Some(alt)
        }
    };
    let source = CQSource::new(file.alphabet, file.q_x, states).map_err(|e| CliError::Validation(format!("model: {e}")))?;
    Ok(Model { source, alt_states })
}

fn densities(mats: &[ComplexMatrix], field: &str) -> Result<Vec<DensityMatrix>, CliError> {
    let d = mats.first().map_or(0, Vec::len);
    mats.iter().enumerate().map(|(i, m)| density(m, d, &format!("{field}[{i}]"))).collect()
}

fn density(m: &ComplexMatrix, d: usize, name: &str) -> Result<DensityMatrix, CliError> {
    if d == 0 || m.len() != d || m.iter().any(|row| row.len() != d) {
        return Err(CliError::Validation(format!("{name}: must be a square {d}x{d} matrix")));
    }
    for i in 0..d {
        for j in 0..d {
            let (a, b) = (m[i][j], m[j][i]);
            if !a[0].is_finite() || !a[1].is_finite() {
                return Err(CliError::Validation(format!("{name}[{i}][{j}]: entry is not finite")));
            }
            let dev = (a[0] - b[0]).abs().max((a[1] + b[1]).abs());
            if dev > HERMITIAN_TOL {
                return Err(CliError::Validation(format!(
                    "{name}[{i}][{j}]: not Hermitian (deviation {dev:.3e} > {HERMITIAN_TOL:e})"
                )));
            }
        }
    }
    let rows: Vec<Vec<(f64, f64)>> = m.iter().map(|row| row.iter().map(|z| (z[0], z[1])).collect()).collect();
    let op = HermitianOperator::from_rows(&rows).map_err(|e| CliError::Validation(format!("{name}: {e}")))?;
    let tr = op.trace();
    if (tr - 1.0).abs() > TRACE_TOL {
        return Err(CliError::Validation(format!("{name}: trace {tr} differs from 1 by more than {TRACE_TOL:e}")));
    }
    DensityMatrix::new(op).map_err(|e| CliError::Validation(format!("{name}: {e}")))
}
