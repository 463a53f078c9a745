//! JSON serialization of trained models.
//!
//! Every real number is written in scientific notation with 17 significant
//! digits, which round-trips `f64` values exactly.

use std::io::Write;
use std::path::Path;

use ndarray::{Array1, Array2};
use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use serde_json::value::RawValue;
use thiserror::Error;

use crate::data::ScalerStats;
use crate::float::Float;
use crate::kernel::KernelSpec;
use crate::objective::{LevelPolicy, Levels};
use crate::trainer::{Model, TrainConfig};

pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ModelIoError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("malformed model: {0}")]
    Format(String),
}

/// Real number written with 17 significant digits.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Exact(f64);

impl Serialize for Exact {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return Err(serde::ser::Error::custom("non-finite number in model"));
        }
        let raw =
            RawValue::from_string(format!("{:.16e}", self.0)).map_err(serde::ser::Error::custom)?;
        raw.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Exact {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = f64::deserialize(d)?;
        if v.is_finite() {
            Ok(Exact(v))
        } else {
            Err(D::Error::custom("non-finite number in model"))
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum KernelDoc {
    Linear,
    Gaussian { gamma: Exact },
    Precomputed { bound: Option<Exact> },
}

#[derive(Debug, Serialize, Deserialize)]
struct SupportDoc {
    index: usize,
    alpha: Exact,
    x: Vec<Exact>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ScalerDoc {
    mean: Vec<Exact>,
    sd: Vec<Exact>,
    degenerate: Vec<bool>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ConfigDoc {
    tol_objective: Exact,
    max_outer_iter: usize,
    restarts: usize,
    seed: u64,
    integrality: LevelPolicy,
}

#[derive(Debug, Serialize, Deserialize)]
struct ModelDoc {
    format_version: u32,
    kernel: KernelDoc,
    nu: Exact,
    mu: Exact,
    m: usize,
    nu_count: usize,
    mu_count: usize,
    b: Exact,
    rho: Exact,
    support: Vec<SupportDoc>,
    support_idx: Vec<usize>,
    eta_zero: Vec<usize>,
    scaler: Option<ScalerDoc>,
    objective: Exact,
    trace: Vec<Exact>,
    iterations: usize,
    rho_b_fallback: bool,
    config: ConfigDoc,
}

fn ex<F: Float>(v: F) -> Exact {
    Exact(v.as_f64())
}

fn exs<F: Float>(v: impl IntoIterator<Item = F>) -> Vec<Exact> {
    v.into_iter().map(ex).collect()
}

fn back<F: Float>(v: Exact) -> F {
    F::cst(v.0)
}

fn to_doc<F: Float>(model: &Model<F>) -> ModelDoc {
    let kernel = match model.config.kernel {
        KernelSpec::Linear => KernelDoc::Linear,
        KernelSpec::Gaussian { gamma } => KernelDoc::Gaussian { gamma: ex(gamma) },
        KernelSpec::Precomputed { bound } => KernelDoc::Precomputed {
            bound: bound.map(ex),
        },
    };
    let support = model
        .retained_idx
        .iter()
        .enumerate()
        .map(|(r, &i)| SupportDoc {
            index: i,
            alpha: ex(model.alpha[i]),
            x: exs(model.retained_features.row(r).iter().copied()),
        })
        .collect();
    ModelDoc {
        format_version: FORMAT_VERSION,
        kernel,
        nu: Exact(model.config.nu),
        mu: Exact(model.config.mu),
        m: model.m(),
        nu_count: model.levels.nu_count,
        mu_count: model.levels.mu_count,
        b: ex(model.b),
        rho: ex(model.rho),
        support,
        support_idx: model.support_idx.clone(),
        eta_zero: (0..model.eta.len()).filter(|&i| !model.eta[i]).collect(),
        scaler: model.scaler.as_ref().map(|s| ScalerDoc {
            mean: exs(s.mean.iter().copied()),
            sd: exs(s.sd.iter().copied()),
            degenerate: s.degenerate.clone(),
        }),
        objective: ex(model.objective),
        trace: exs(model.trace.iter().copied()),
        iterations: model.iterations,
        rho_b_fallback: model.rho_b_fallback,
        config: ConfigDoc {
            tol_objective: Exact(model.config.tol_objective),
            max_outer_iter: model.config.max_outer_iter,
            restarts: model.config.restarts,
            seed: model.config.seed,
            integrality: model.config.integrality,
        },
    }
}

fn from_doc<F: Float>(doc: ModelDoc) -> Result<Model<F>, ModelIoError> {
    let bad = |msg: String| ModelIoError::Format(msg);
    if doc.format_version != FORMAT_VERSION {
        return Err(bad(format!(
            "unsupported format version {}",
            doc.format_version
        )));
    }
    let kernel = match doc.kernel {
        KernelDoc::Linear => KernelSpec::Linear,
        KernelDoc::Gaussian { gamma } => {
            KernelSpec::gaussian(back(gamma)).map_err(|e| bad(e.to_string()))?
        }
        KernelDoc::Precomputed { bound } => KernelSpec::Precomputed {
            bound: bound.map(back),
        },
    };
    let m = doc.m;
    let levels =
        Levels::from_counts(m, doc.nu_count, doc.mu_count).map_err(|e| bad(e.to_string()))?;
    let d = doc.support.first().map_or(0, |s| s.x.len());
    let mut alpha = Array1::<F>::zeros(m);
    let mut retained_idx = Vec::with_capacity(doc.support.len());
    let mut rows = Vec::with_capacity(doc.support.len() * d);
    for s in &doc.support {
        if s.index >= m || s.x.len() != d {
            return Err(bad(format!("support entry {} is inconsistent", s.index)));
        }
        alpha[s.index] = back(s.alpha);
        retained_idx.push(s.index);
        rows.extend(s.x.iter().map(|&v| back::<F>(v)));
    }
    let retained_features =
        Array2::from_shape_vec((retained_idx.len(), d), rows).map_err(|e| bad(e.to_string()))?;
    let mut eta = vec![true; m];
    for &i in &doc.eta_zero {
        *eta.get_mut(i)
            .ok_or_else(|| bad(format!("eta index {} out of range", i)))? = false;
    }
    if doc.support_idx.iter().any(|&i| i >= m) {
        return Err(bad("support index out of range".into()));
    }
    let scaler = doc.scaler.map(|s| ScalerStats {
        mean: s.mean.into_iter().map(back).collect(),
        sd: s.sd.into_iter().map(back).collect(),
        degenerate: s.degenerate,
    });
    Ok(Model {
        config: TrainConfig {
            nu: doc.nu.0,
            mu: doc.mu.0,
            kernel,
            tol_objective: doc.config.tol_objective.0,
            max_outer_iter: doc.config.max_outer_iter,
            restarts: doc.config.restarts,
            seed: doc.config.seed,
            integrality: doc.config.integrality,
        },
        levels,
        alpha,
        b: back(doc.b),
        rho: back(doc.rho),
        eta,
        support_idx: doc.support_idx,
        retained_idx,
        retained_features,
        objective: back(doc.objective),
        trace: doc.trace.into_iter().map(back).collect(),
        iterations: doc.iterations,
        rho_b_fallback: doc.rho_b_fallback,
        scaler,
    })
}

pub fn to_json<F: Float>(model: &Model<F>) -> Result<String, ModelIoError> {
    Ok(serde_json::to_string_pretty(&to_doc(model))?)
}

pub fn from_json<F: Float>(text: &str) -> Result<Model<F>, ModelIoError> {
    from_doc(serde_json::from_str(text)?)
}

/// Writes `bytes` to a temporary file next to `path` and renames it into place.
pub fn write_atomic(path: impl AsRef<Path>, bytes: &[u8]) -> std::io::Result<()> {
    let path = path.as_ref();
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn save<F: Float>(model: &Model<F>, path: impl AsRef<Path>) -> Result<(), ModelIoError> {
    let mut text = to_json(model)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())?;
    Ok(())
}

pub fn load<F: Float>(path: impl AsRef<Path>) -> Result<Model<F>, ModelIoError> {
    from_json(&std::fs::read_to_string(path)?)
}
