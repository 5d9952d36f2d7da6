//! On-disk formats: generator files (TOML) and plain-text matrices.
//!
//! A generator file looks like
//!
//! ```toml
//! input_dim = 2
//! domain_radius = 1.0
//!
//! [[layers]]
//! activation = "elu"
//! weights = [[0.1, -0.3], [0.7, 0.2], [0.0, 1.0], [-0.5, 0.4]]
//! bias = [0.0, 0.1, -0.1, 0.05]
//! ```
//!
//! Weights are stored row by row (`out x in`). Floats are written in their
//! shortest round-trip form, so save/load is lossless.
//!
//! Instead of explicit weights a file may give a seed and per-layer sizes;
//! weights are then drawn with [`FeedforwardGenerator::seeded_uniform`]:
//!
//! ```toml
//! input_dim = 2
//! domain_radius = 1.0
//! seed = 0
//!
//! [[layers]]
//! activation = "elu"
//! size = 4
//! has_bias = true
//! ```

use std::fs;
use std::path::Path;

use genprior_core::generator::Architecture;
use genprior_core::{Activation, FeedforwardGenerator, Layer, Matrix, Vector};
use serde::{Deserialize, Serialize};

use crate::error::AppError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorFile {
    pub input_dim: usize,
    pub domain_radius: f64,
    /// Seed for randomly initialised layers. Required when any layer omits `weights`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub layers: Vec<LayerFile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerFile {
    pub activation: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elu_alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bias: Option<Vec<f64>>,
    /// Output width of a seeded layer.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub has_bias: Option<bool>,
}

impl GeneratorFile {
    pub fn from_generator(gen: &FeedforwardGenerator) -> Self {
        let layers = gen
            .layers()
            .iter()
            .map(|layer| {
                let w = &layer.weights;
                let elu_alpha = match layer.activation {
                    Activation::Elu { alpha } if alpha != 1.0 => Some(alpha),
                    _ => None,
                };
                LayerFile {
                    activation: layer.activation.name().to_string(),
                    elu_alpha,
                    weights: Some((0..w.nrows()).map(|i| w.row(i).iter().copied().collect()).collect()),
                    bias: layer.bias.as_ref().map(|b| b.iter().copied().collect()),
                    size: None,
                    has_bias: None,
                }
            })
            .collect();
        Self {
            input_dim: gen.input_dim(),
            domain_radius: gen.domain_radius(),
            seed: None,
            layers,
        }
    }

    pub fn to_generator(&self) -> Result<FeedforwardGenerator, AppError> {
        let explicit = self.layers.iter().filter(|l| l.weights.is_some()).count();
        if explicit == self.layers.len() {
            let mut layers = Vec::with_capacity(self.layers.len());
            for (i, layer) in self.layers.iter().enumerate() {
                if layer.size.is_some() || layer.has_bias.is_some() {
                    return Err(AppError::config(format!(
                        "layer {i}: `size`/`has_bias` only apply to seeded layers"
                    )));
                }
                let rows = layer.weights.as_deref().unwrap_or_default();
                let weights = matrix_from_rows(rows)
                    .map_err(|e| AppError::config(format!("layer {i} weights: {e}")))?;
                let bias = layer.bias.as_ref().map(|b| Vector::from_column_slice(b));
                layers.push(Layer::new(weights, bias, activation_of(i, layer)?));
            }
            return Ok(FeedforwardGenerator::new(self.input_dim, layers, self.domain_radius)?);
        }
        if explicit > 0 {
            return Err(AppError::config("either every layer or no layer may list `weights`"));
        }
        let seed = self
            .seed
            .ok_or_else(|| AppError::config("layers without `weights` need a top-level `seed`"))?;
        let mut arch = Architecture {
            input_dim: self.input_dim,
            layers: Vec::with_capacity(self.layers.len()),
            domain_radius: self.domain_radius,
        };
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.bias.is_some() {
                return Err(AppError::config(format!("layer {i}: explicit `bias` needs explicit `weights`")));
            }
            let size = layer
                .size
                .ok_or_else(|| AppError::config(format!("layer {i}: missing `size`")))?;
            arch.layers.push((size, activation_of(i, layer)?, layer.has_bias.unwrap_or(true)));
        }
        Ok(FeedforwardGenerator::seeded_uniform(&arch, seed)?)
    }
}

fn activation_of(i: usize, layer: &LayerFile) -> Result<Activation, AppError> {
    Activation::from_name(&layer.activation, layer.elu_alpha.unwrap_or(1.0))
        .ok_or_else(|| AppError::config(format!("layer {i}: unknown activation `{}`", layer.activation)))
}

fn matrix_from_rows(rows: &[Vec<f64>]) -> Result<Matrix, String> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 {
        return Err("matrix is empty".into());
    }
    if let Some(i) = rows.iter().position(|r| r.len() != ncols) {
        return Err(format!("row {i} has {} entries, expected {ncols}", rows[i].len()));
    }
    Ok(Matrix::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

pub fn generator_to_string(gen: &FeedforwardGenerator) -> String {
    toml::to_string(&GeneratorFile::from_generator(gen)).expect("generator files always serialize")
}

pub fn generator_from_str(text: &str) -> Result<FeedforwardGenerator, AppError> {
    let file: GeneratorFile =
        toml::from_str(text).map_err(|e| AppError::config(format!("generator file: {e}")))?;
    file.to_generator()
}

pub fn load_generator(path: &Path) -> Result<FeedforwardGenerator, AppError> {
    generator_from_str(&read(path)?)
}

pub fn save_generator(gen: &FeedforwardGenerator, path: &Path) -> Result<(), AppError> {
    write(path, &generator_to_string(gen))
}

/// Parses a whitespace-separated matrix, one row per line. Blank lines and
/// lines starting with `#` are skipped.
pub fn matrix_from_str(text: &str) -> Result<Matrix, AppError> {
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let row = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .map_err(|_| AppError::config(format!("line {}: cannot parse `{tok}`", lineno + 1)))
            })
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(row);
    }
    matrix_from_rows(&rows).map_err(AppError::config)
}

pub fn matrix_to_string(m: &Matrix) -> String {
    let mut out = String::new();
    for i in 0..m.nrows() {
        let row: Vec<String> = m.row(i).iter().map(|x| format!("{x:?}")).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

/// A vector stored as a single column or a single row.
pub fn vector_from_str(text: &str) -> Result<Vector, AppError> {
    let m = matrix_from_str(text)?;
    if m.ncols() == 1 {
        Ok(m.column(0).into_owned())
    } else if m.nrows() == 1 {
        Ok(m.row(0).transpose())
    } else {
        Err(AppError::config(format!(
            "expected a vector, found a {}x{} matrix",
            m.nrows(),
            m.ncols()
        )))
    }
}

pub fn load_matrix(path: &Path) -> Result<Matrix, AppError> {
    matrix_from_str(&read(path)?)
}

pub fn load_vector(path: &Path) -> Result<Vector, AppError> {
    vector_from_str(&read(path)?)
}

pub(crate) fn read(path: &Path) -> Result<String, AppError> {
    fs::read_to_string(path).map_err(|e| AppError::io(path, e))
}

pub(crate) fn write(path: &Path, text: &str) -> Result<(), AppError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| AppError::io(path, e))
}
