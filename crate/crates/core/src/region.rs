//! Breakdown-point calculus over the `(ν, μ)` plane.
//!
//! Every predicate is generic over [`RegionScalar`], so it can be evaluated
//! exactly with `Ratio<i64>` as well as in floating point.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::float::RegionScalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegionError {
    #[error("mu must be below r/2")]
    MuTooLarge,
    #[error("no lattice point lies in the region")]
    EmptyRegion,
    #[error("invalid argument: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Classification {
    /// Breakdown point of both `f` and `b` equals `μ`.
    FullBreakdownMu,
    /// Unbounded kernel: `f` breaks down at `μ`, `b` possibly earlier.
    FunctionOnlyMuBiasLower,
    /// Breakdown point below `μ`.
    BelowMu,
}

impl Classification {
    pub fn as_str(&self) -> &'static str {
        match self {
            Classification::FullBreakdownMu => "full_breakdown_mu",
            Classification::FunctionOnlyMuBiasLower => "function_only_mu_bias_lower",
            Classification::BelowMu => "below_mu",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeyInequality {
    /// `μ < r/2`.
    pub mu_ok: bool,
    /// `ν − μ ≤ 2(r − 2μ)`.
    pub holds: bool,
    /// `ν − μ < 2(r − 2μ)`.
    pub strict: bool,
}

fn two<S: RegionScalar>() -> S {
    S::one() + S::one()
}

fn rhs<S: RegionScalar>(mu: S, r: S) -> S {
    two::<S>() * (r - two::<S>() * mu)
}

pub fn key_inequality_holds<S: RegionScalar>(nu: S, mu: S, r: S) -> KeyInequality {
    let gap = nu - mu;
    let bound = rhs(mu, r);
    KeyInequality {
        mu_ok: two::<S>() * mu < r,
        holds: gap <= bound,
        strict: gap < bound,
    }
}

/// Smallest `ℓ ≥ 0` with `0 ≤ 2(μ − ℓ/m) < ν − μ < 2(r − 2μ)`.
pub fn bias_ell<S: RegionScalar>(nu: S, mu: S, r: S, m: usize) -> Option<usize> {
    let gap = nu - mu;
    if !(gap < rhs(mu, r)) || m == 0 {
        return None;
    }
    let m_s = S::from_usize(m).expect("sample size");
    let zero = S::zero();
    for ell in 0..=m {
        let left = two::<S>() * (mu - S::from_usize(ell).expect("count") / m_s);
        if left < zero {
            return None;
        }
        if left < gap {
            return Some(ell);
        }
    }
    None
}

/// Breakdown class for the given kernel boundedness.
pub fn classify<S: RegionScalar>(
    nu: S,
    mu: S,
    r: S,
    kernel_bounded: bool,
) -> Result<Classification, RegionError> {
    let key = key_inequality_holds(nu, mu, r);
    if !key.mu_ok {
        return Err(RegionError::MuTooLarge);
    }
    if kernel_bounded {
        return Ok(if key.holds {
            Classification::FullBreakdownMu
        } else {
            Classification::BelowMu
        });
    }
    let gap = nu - mu;
    let two_mu = two::<S>() * mu;
    let bound = rhs(mu, r);
    if two_mu < gap && gap <= bound {
        Ok(Classification::FullBreakdownMu)
    } else if S::zero() < gap && gap < two_mu && gap < bound {
        Ok(Classification::FunctionOnlyMuBiasLower)
    } else {
        Ok(Classification::BelowMu)
    }
}

/// Per-point summary of the predicates above.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionReport<S> {
    pub nu: S,
    pub mu: S,
    pub r: S,
    pub mu_lt_half_r: bool,
    pub key_inequality: bool,
    pub strict_inequality: bool,
    pub bias_ell: Option<usize>,
    /// `None` when `μ ≥ r/2`.
    pub classification: Option<Classification>,
}

pub fn report<S: RegionScalar>(
    nu: S,
    mu: S,
    r: S,
    m: usize,
    kernel_bounded: bool,
) -> RegionReport<S> {
    let key = key_inequality_holds(nu, mu, r);
    RegionReport {
        nu,
        mu,
        r,
        mu_lt_half_r: key.mu_ok,
        key_inequality: key.holds,
        strict_inequality: key.strict,
        bias_ell: bias_ell(nu, mu, r, m),
        classification: classify(nu, mu, r, kernel_bounded).ok(),
    }
}

/// Admissible parameter regions `{0 ≤ μ (≤ μ̄), 0 < ν − μ < 2(r − 2μ)}` for
/// the lower and upper label-ratio estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaRegions<S> {
    pub r_low: S,
    pub r_up: S,
    pub mu_bar: Option<S>,
}

/// Label-ratio bounds from the observed ratio `r′`. With an outlier bound
/// `μ̄`: `[max(r′−μ̄, 0), min(r′+μ̄, ½)]`; without: `[2r′/3, min(2r′, ½)]`.
pub fn lambda_regions<S: RegionScalar>(
    r_prime: S,
    mu_bar: Option<S>,
) -> Result<LambdaRegions<S>, RegionError> {
    let half = S::from_ratio(1, 2);
    if !(r_prime > S::zero() && r_prime <= half) {
        return Err(RegionError::Invalid(format!(
            "label ratio {:?} outside (0, 1/2]",
            r_prime
        )));
    }
    let min = |a: S, b: S| if a < b { a } else { b };
    let max = |a: S, b: S| if a > b { a } else { b };
    Ok(match mu_bar {
        Some(mb) => LambdaRegions {
            r_low: max(r_prime - mb, S::zero()),
            r_up: min(r_prime + mb, half),
            mu_bar: Some(mb),
        },
        None => LambdaRegions {
            r_low: two::<S>() * r_prime / S::from_usize(3).expect("3"),
            r_up: min(two::<S>() * r_prime, half),
            mu_bar: None,
        },
    })
}

impl<S: RegionScalar> LambdaRegions<S> {
    fn contains(&self, nu: S, mu: S, r: S) -> bool {
        if mu < S::zero() {
            return false;
        }
        if let Some(mb) = self.mu_bar {
            if mu > mb {
                return false;
            }
        }
        let gap = nu - mu;
        S::zero() < gap && gap < rhs(mu, r)
    }

    pub fn contains_low(&self, nu: S, mu: S) -> bool {
        self.contains(nu, mu, self.r_low)
    }

    pub fn contains_up(&self, nu: S, mu: S) -> bool {
        self.contains(nu, mu, self.r_up)
    }
}

/// Grid point with its exact counts `νm` and `μm`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint<S> {
    pub nu: S,
    pub mu: S,
    pub nu_count: usize,
    pub mu_count: usize,
}

fn lattice<S: RegionScalar>(
    pred: &impl Fn(S, S) -> bool,
    m: usize,
    step: usize,
) -> Vec<GridPoint<S>> {
    let m_s = S::from_usize(m).expect("sample size");
    let mut out = Vec::new();
    for mu_count in (0..m).step_by(step) {
        for nu_count in ((mu_count + step)..m).step_by(step) {
            let nu = S::from_usize(nu_count).expect("count") / m_s;
            let mu = S::from_usize(mu_count).expect("count") / m_s;
            if pred(nu, mu) {
                out.push(GridPoint {
                    nu,
                    mu,
                    nu_count,
                    mu_count,
                });
            }
        }
    }
    out
}

/// Points of the lattice `{(a k/m, b k/m)}` with `0 ≤ μ < ν < 1` that satisfy
/// `pred`, for the smallest stride `k` giving at most `n_points` of them.
/// Ordered by `μ`, then `ν`.
pub fn grid<S: RegionScalar>(
    pred: impl Fn(S, S) -> bool,
    m: usize,
    n_points: usize,
) -> Result<Vec<GridPoint<S>>, RegionError> {
    if n_points == 0 || m < 2 {
        return Err(RegionError::Invalid("need n_points >= 1 and m >= 2".into()));
    }
    let full = lattice(&pred, m, 1);
    if full.is_empty() {
        return Err(RegionError::EmptyRegion);
    }
    if full.len() <= n_points {
        return Ok(full);
    }
    for step in 2..m {
        let pts = lattice(&pred, m, step);
        if !pts.is_empty() && pts.len() <= n_points {
            return Ok(pts);
        }
    }
    let stride = full.len().div_ceil(n_points);
    Ok(full.into_iter().step_by(stride).collect())
}
