//! Kernel functions and Gram matrices.

use std::path::Path;

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::float::Float;

#[derive(Debug, Error)]
pub enum KernelError {
    #[error("non-finite input to kernel evaluation")]
    NonFinite,
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid kernel: {0}")]
    Invalid(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// Kernel choice.
///
/// `Precomputed` treats the feature matrix itself as kernel values: an `m x m`
/// Gram matrix for training, `m_new x m_train` rows for prediction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum KernelSpec<F> {
    Linear,
    Gaussian { gamma: F },
    Precomputed { bound: Option<F> },
}

impl<F: Float> KernelSpec<F> {
    pub fn gaussian(gamma: F) -> Result<Self, KernelError> {
        if !(gamma > F::zero()) || !gamma.is_finite() {
            return Err(KernelError::Invalid(format!(
                "gamma must be positive, got {}",
                gamma
            )));
        }
        Ok(KernelSpec::Gaussian { gamma })
    }

    /// Gaussian kernel with the median-distance bandwidth of `x`.
    pub fn gaussian_median(x: ArrayView2<F>) -> Self {
        KernelSpec::Gaussian {
            gamma: median_heuristic_gamma(x),
        }
    }

    /// `sup_x k(x, x) < inf`: true for the Gaussian kernel and for precomputed
    /// kernels carrying a declared bound.
    pub fn bounded(&self) -> bool {
        match self {
            KernelSpec::Linear => false,
            KernelSpec::Gaussian { .. } => true,
            KernelSpec::Precomputed { bound } => bound.is_some(),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            KernelSpec::Linear => "linear",
            KernelSpec::Gaussian { .. } => "gaussian",
            KernelSpec::Precomputed { .. } => "precomputed",
        }
    }

    #[inline]
    pub fn eval(&self, a: ArrayView1<F>, b: ArrayView1<F>) -> F {
        match self {
            KernelSpec::Linear => a.dot(&b),
            KernelSpec::Gaussian { gamma } => {
                let d2: F = a
                    .iter()
                    .zip(b.iter())
                    .map(|(&u, &v)| (u - v) * (u - v))
                    .sum();
                (-*gamma * d2).exp()
            }
            KernelSpec::Precomputed { .. } => {
                unreachable!("precomputed kernels are looked up, not evaluated")
            }
        }
    }
}

/// Symmetric matrix of kernel evaluations on one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix<F> {
    pub entries: Array2<F>,
    pub kernel: KernelSpec<F>,
}

impl<F: Float> GramMatrix<F> {
    pub fn size(&self) -> usize {
        self.entries.nrows()
    }

    pub fn max_diagonal(&self) -> F {
        self.entries.diag().iter().fold(F::zero(), |a, &b| a.max(b))
    }

    /// Principal submatrix on `idx`.
    pub fn submatrix(&self, idx: &[usize]) -> GramMatrix<F> {
        let entries = Array2::from_shape_fn((idx.len(), idx.len()), |(a, b)| {
            self.entries[[idx[a], idx[b]]]
        });
        GramMatrix {
            entries,
            kernel: self.kernel,
        }
    }

    /// Positive semidefinite up to `tol * max diagonal`, checked by a Cholesky
    /// factorization of `K + tol * maxdiag * I`.
    pub fn is_psd(&self, tol: F) -> bool {
        let m = self.size();
        let shift = tol * self.max_diagonal().max(F::min_positive_value());
        let mut l = Array2::<F>::zeros((m, m));
        for i in 0..m {
            for j in 0..=i {
                let mut s = self.entries[[i, j]];
                for k in 0..j {
                    s = s - l[[i, k]] * l[[j, k]];
                }
                if i == j {
                    let v = s + shift;
                    if v <= F::zero() {
                        return false;
                    }
                    l[[i, i]] = v.sqrt();
                } else {
                    l[[i, j]] = s / l[[j, j]];
                }
            }
        }
        true
    }
}

fn check_finite<F: Float>(x: ArrayView2<F>) -> Result<(), KernelError> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(KernelError::NonFinite)
    }
}

/// Builds `K_ij = k(x_i, x_j)` and symmetrizes it.
pub fn gram<F: Float>(
    spec: &KernelSpec<F>,
    x: ArrayView2<F>,
) -> Result<GramMatrix<F>, KernelError> {
    check_finite(x)?;
    let m = x.nrows();
    let mut k = match spec {
        KernelSpec::Precomputed { .. } => {
            if x.ncols() != m {
                return Err(KernelError::DimensionMismatch(format!(
                    "precomputed kernel must be square, got {}x{}",
                    m,
                    x.ncols()
                )));
            }
            x.to_owned()
        }
        _ => {
            let mut k = Array2::zeros((m, m));
            for i in 0..m {
                for j in 0..=i {
                    let v = spec.eval(x.row(i), x.row(j));
                    k[[i, j]] = v;
                    k[[j, i]] = v;
                }
            }
            k
        }
    };
    let half = F::cst(0.5);
    for i in 0..m {
        for j in 0..i {
            let v = (k[[i, j]] + k[[j, i]]) * half;
            k[[i, j]] = v;
            k[[j, i]] = v;
        }
    }
    Ok(GramMatrix {
        entries: k,
        kernel: *spec,
    })
}

/// Kernel values between new points (rows) and training points (columns).
pub fn eval_cross<F: Float>(
    spec: &KernelSpec<F>,
    x_train: ArrayView2<F>,
    x_new: ArrayView2<F>,
) -> Result<Array2<F>, KernelError> {
    check_finite(x_new)?;
    match spec {
        KernelSpec::Precomputed { .. } => {
            if x_new.ncols() != x_train.nrows() {
                return Err(KernelError::DimensionMismatch(format!(
                    "expected {} kernel columns, got {}",
                    x_train.nrows(),
                    x_new.ncols()
                )));
            }
            Ok(x_new.to_owned())
        }
        _ => {
            check_finite(x_train)?;
            if x_new.ncols() != x_train.ncols() {
                return Err(KernelError::DimensionMismatch(format!(
                    "training points have {} features, new points {}",
                    x_train.ncols(),
                    x_new.ncols()
                )));
            }
            Ok(Array2::from_shape_fn(
                (x_new.nrows(), x_train.nrows()),
                |(i, j)| spec.eval(x_new.row(i), x_train.row(j)),
            ))
        }
    }
}

/// `alpha^T K alpha`, clamped to zero when rounding pushes it slightly negative.
pub fn rkhs_norm_sq<F: Float>(alpha: ArrayView1<F>, k: &GramMatrix<F>) -> Result<F, KernelError> {
    if alpha.len() != k.size() {
        return Err(KernelError::DimensionMismatch(format!(
            "{} coefficients for a {}x{} Gram matrix",
            alpha.len(),
            k.size(),
            k.size()
        )));
    }
    let v = alpha.dot(&k.entries.dot(&alpha));
    let clamp = F::cst(-1e-10);
    if v < F::zero() && v >= clamp {
        Ok(F::zero())
    } else {
        Ok(v)
    }
}

/// `1 / (2 median^2)` over pairwise distances of at most 256 evenly strided rows.
///
/// Falls back to `gamma = 1` when the median distance is zero.
pub fn median_heuristic_gamma<F: Float>(x: ArrayView2<F>) -> F {
    let m = x.nrows();
    let stride = m.div_ceil(256).max(1);
    let rows: Vec<usize> = (0..m).step_by(stride).collect();
    let mut dists = Vec::with_capacity(rows.len() * rows.len() / 2);
    for (a, &i) in rows.iter().enumerate() {
        for &j in &rows[..a] {
            let d2: F = x
                .row(i)
                .iter()
                .zip(x.row(j).iter())
                .map(|(&u, &v)| (u - v) * (u - v))
                .sum();
            dists.push(d2.sqrt());
        }
    }
    if dists.is_empty() {
        return F::one();
    }
    dists.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = dists.len();
    let median = if n % 2 == 1 {
        dists[n / 2]
    } else {
        (dists[n / 2 - 1] + dists[n / 2]) * F::cst(0.5)
    };
    if median > F::zero() {
        F::one() / (F::cst(2.0) * median * median)
    } else {
        F::one()
    }
}

/// Reads a headerless CSV matrix of precomputed kernel values.
pub fn load_precomputed<F: Float>(path: impl AsRef<Path>) -> Result<Array2<F>, KernelError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for record in reader.records() {
        let record = record?;
        let row: Result<Vec<F>, _> = record
            .iter()
            .map(|c| {
                c.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .map(F::cst)
                    .ok_or(KernelError::NonFinite)
            })
            .collect();
        let row = row?;
        if *cols.get_or_insert(row.len()) != row.len() {
            return Err(KernelError::DimensionMismatch(
                "ragged kernel matrix".into(),
            ));
        }
        values.extend(row);
        rows += 1;
    }
    Array2::from_shape_vec((rows, cols.unwrap_or(0)), values)
        .map_err(|e| KernelError::DimensionMismatch(e.to_string()))
}
