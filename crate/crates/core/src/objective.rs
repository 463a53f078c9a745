//! Negative margins, CVaR, the trimmed CVaR difference and related statistics.

use ndarray::{Array1, ArrayView1, ArrayView2};
use thiserror::Error;

use crate::float::Float;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObjectiveError {
    #[error("level {level} times m = {m} is not an integer")]
    NonIntegerLevel { level: f64, m: usize },
    #[error("invalid levels: {0}")]
    InvalidLevel(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// Negative margins `r_i = -y_i g(x_i)`.
pub type MarginVector<F> = Array1<F>;

/// How non-integral `νm`, `μm` are handled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LevelPolicy {
    /// Reject levels whose product with `m` is not an integer.
    Strict,
    /// Snap down to the nearest multiple of `1/m`.
    #[default]
    Snap,
}

/// Integral tail sizes `νm` and `μm` for a sample of size `m`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Levels {
    pub m: usize,
    pub nu_count: usize,
    pub mu_count: usize,
}

const LEVEL_TOL: f64 = 1e-9;

fn count_for(level: f64, m: usize, policy: LevelPolicy) -> Result<usize, ObjectiveError> {
    let x = level * m as f64;
    let nearest = x.round();
    if (x - nearest).abs() <= LEVEL_TOL * x.abs().max(1.0) {
        return Ok(nearest as usize);
    }
    match policy {
        LevelPolicy::Strict => Err(ObjectiveError::NonIntegerLevel { level, m }),
        LevelPolicy::Snap => {
            let snapped = (x + LEVEL_TOL).floor() as usize;
            log::warn!("level {} snapped to {}/{}", level, snapped, m);
            Ok(snapped)
        }
    }
}

impl Levels {
    /// Resolves `(ν, μ)` for `m` samples; requires `0 ≤ μ < ν ≤ 1` after snapping.
    pub fn new(m: usize, nu: f64, mu: f64, policy: LevelPolicy) -> Result<Self, ObjectiveError> {
        if m == 0 {
            return Err(ObjectiveError::InvalidLevel("empty sample".into()));
        }
        if !(nu > 0.0 && nu <= 1.0) || !(0.0..nu).contains(&mu) {
            return Err(ObjectiveError::InvalidLevel(format!(
                "need 0 <= mu < nu <= 1, got nu = {}, mu = {}",
                nu, mu
            )));
        }
        let nu_count = count_for(nu, m, policy)?;
        let mu_count = count_for(mu, m, policy)?;
        Levels::from_counts(m, nu_count, mu_count)
    }

    pub fn from_counts(m: usize, nu_count: usize, mu_count: usize) -> Result<Self, ObjectiveError> {
        if nu_count == 0 || nu_count > m || mu_count >= nu_count {
            return Err(ObjectiveError::InvalidLevel(format!(
                "need 0 <= mu m < nu m <= m, got nu m = {}, mu m = {}, m = {}",
                nu_count, mu_count, m
            )));
        }
        Ok(Levels {
            m,
            nu_count,
            mu_count,
        })
    }

    pub fn nu(&self) -> f64 {
        self.nu_count as f64 / self.m as f64
    }

    pub fn mu(&self) -> f64 {
        self.mu_count as f64 / self.m as f64
    }

    /// `ν − μ` computed from the integer counts.
    pub fn gap<F: Float>(&self) -> F {
        F::from_count(self.nu_count - self.mu_count) / F::from_count(self.m)
    }
}

/// `r_i = -y_i (Σ_j K_ij α_j + b)` where `k_rows` holds one row per sample.
pub fn negative_margins<F: Float>(
    alpha: ArrayView1<F>,
    b: F,
    k_rows: ArrayView2<F>,
    y: &[i8],
) -> Result<MarginVector<F>, ObjectiveError> {
    if k_rows.ncols() != alpha.len() || k_rows.nrows() != y.len() {
        return Err(ObjectiveError::DimensionMismatch(format!(
            "kernel rows {:?}, {} coefficients, {} labels",
            k_rows.dim(),
            alpha.len(),
            y.len()
        )));
    }
    let g = k_rows.dot(&alpha);
    Ok(g.iter()
        .zip(y)
        .map(|(&gi, &yi)| {
            let s = gi + b;
            if yi > 0 {
                -s
            } else {
                s
            }
        })
        .collect())
}

/// Indices sorted by value, largest first; ties keep the lower index first.
pub fn descending_order<F: Float>(values: ArrayView1<F>) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| {
        values[b]
            .partial_cmp(&values[a])
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    idx
}

/// Mean of the descending order statistics at positions `lo+1 ..= hi`.
pub fn tail_mean_counts<F: Float>(values: ArrayView1<F>, lo: usize, hi: usize) -> F {
    assert!(lo < hi && hi <= values.len(), "tail positions out of range");
    let order = descending_order(values);
    let sum: F = order[lo..hi].iter().map(|&i| values[i]).sum();
    sum / F::from_count(hi - lo)
}

fn check_len<F>(values: ArrayView1<F>) -> Result<usize, ObjectiveError> {
    if values.is_empty() {
        Err(ObjectiveError::DimensionMismatch(
            "empty margin vector".into(),
        ))
    } else {
        Ok(values.len())
    }
}

/// Mean of the `νm` largest values.
pub fn cvar<F: Float>(
    values: ArrayView1<F>,
    nu: f64,
    policy: LevelPolicy,
) -> Result<F, ObjectiveError> {
    let m = check_len(values)?;
    let lv = Levels::new(m, nu, 0.0, policy)?;
    Ok(tail_mean_counts(values, 0, lv.nu_count))
}

/// Mean of the values ranked `μm+1 ..= νm` in descending order.
pub fn trimmed_cvar_diff<F: Float>(
    values: ArrayView1<F>,
    nu: f64,
    mu: f64,
    policy: LevelPolicy,
) -> Result<F, ObjectiveError> {
    let m = check_len(values)?;
    let lv = Levels::new(m, nu, mu, policy)?;
    Ok(tail_mean_counts(values, lv.mu_count, lv.nu_count))
}

/// `½‖f‖² + (ν−μ) · trimmed_cvar_diff`.
pub fn primal_objective<F: Float>(
    norm_sq: F,
    nu: f64,
    mu: f64,
    values: ArrayView1<F>,
    policy: LevelPolicy,
) -> Result<F, ObjectiveError> {
    let m = check_len(values)?;
    let lv = Levels::new(m, nu, mu, policy)?;
    Ok(primal_objective_levels(norm_sq, &lv, values))
}

pub fn primal_objective_levels<F: Float>(norm_sq: F, lv: &Levels, values: ArrayView1<F>) -> F {
    F::cst(0.5) * norm_sq + lv.gap::<F>() * tail_mean_counts(values, lv.mu_count, lv.nu_count)
}

/// Objective of the robust problem for given `ρ` and outlier indicator `η`:
/// `½‖f‖² − (ν−μ)ρ + (1/m) Σ η_i [ρ + r_i]_+`.
pub fn robust_objective<F: Float>(
    norm_sq: F,
    rho: F,
    eta: &[bool],
    values: ArrayView1<F>,
    lv: &Levels,
) -> F {
    let m = F::from_count(lv.m);
    let hinge: F = values
        .iter()
        .zip(eta)
        .filter(|(_, &e)| e)
        .map(|(&r, _)| (rho + r).max(F::zero()))
        .sum();
    F::cst(0.5) * norm_sq - lv.gap::<F>() * rho + hinge / m
}

/// `(q̄_{1−ν}, q_{1−μ})` of the empirical distribution of `values`.
///
/// `q̄_{1−ν} = sup{r : F̂(r) ≤ 1−ν}` is the order statistic `x_(⌊(1−ν)m⌋+1)`
/// and `q_{1−μ} = inf{r : F̂(r) ≥ 1−μ}` is `x_(⌈(1−μ)m⌉)`, both in ascending
/// order. The trimmed mean averages exactly the order statistics between them.
pub fn empirical_quantiles<F: Float>(
    values: ArrayView1<F>,
    nu: f64,
    mu: f64,
) -> Result<(F, F), ObjectiveError> {
    let m = check_len(values)?;
    if !(0.0 < mu && mu < nu && nu < 1.0) {
        return Err(ObjectiveError::InvalidLevel(format!(
            "need 0 < mu < nu < 1, got nu = {}, mu = {}",
            nu, mu
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let lower = (1.0 - nu) * m as f64;
    let upper = (1.0 - mu) * m as f64;
    let k_low = (lower + LEVEL_TOL * lower.max(1.0)).floor() as usize;
    let k_up = (upper - LEVEL_TOL * upper.max(1.0)).ceil().max(1.0) as usize;
    Ok((sorted[k_low.min(m - 1)], sorted[k_up.min(m) - 1]))
}

/// Mean of the gap variable, `B √(μ(1−μ)) / (√(2π) (ν−μ))`.
pub fn gap_bias<F: Float>(b_mu: F, mu: F, nu: F) -> F {
    let two_pi = F::cst(2.0 * std::f64::consts::PI);
    b_mu * (mu * (F::one() - mu)).sqrt() / (two_pi.sqrt() * (nu - mu))
}
