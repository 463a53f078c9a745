//! Dual picture of the robust SVM: reduced convex hulls of each class and the
//! minimum RKHS distance between them.
//!
//! For fixed `η` the dual of the robust problem is
//! `max −½‖Σ γ_i y_i k(·, x_i)‖²` over `0 ≤ γ_i ≤ η_i/m` with per-class sums
//! `(ν−μ)/2`. Rescaling `γ' = 2γ/(ν−μ)` gives two reduced convex hulls with caps
//! `2η_i/((ν−μ)m)`, so the fixed-η primal optimum is `−(ν−μ)²/8 · min_norm`.

use ndarray::{Array1, ArrayView2};
use rayon::prelude::*;
use thiserror::Error;

use crate::float::Float;
use crate::objective::{negative_margins, robust_objective, Levels};
use crate::qp::{self, QpError, QpProblem, SolverOptions};
use crate::trainer::{build_subproblem_with_box, recover_rho_b};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("{count} outlier indicators exceed the enumeration limit {limit}")]
    TooLarge { count: u128, limit: u128 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("QP solver failed: {0}")]
    Solver(String),
    #[error("primal and dual disagree on boundedness")]
    Inconsistent,
}

/// Largest number of indicators `opt_value` will enumerate.
pub const ENUMERATION_LIMIT: u128 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Positive,
    Negative,
}

/// Reduced convex hull of one class for a given indicator.
#[derive(Debug, Clone, PartialEq)]
pub struct HullSpec {
    pub eta: Vec<bool>,
    pub levels: Levels,
    pub side: Side,
}

impl HullSpec {
    /// Per-point cap `2η_i/((ν−μ)m)`.
    pub fn cap<F: Float>(&self, i: usize) -> F {
        if self.eta[i] {
            F::cst(2.0) / F::from_count(self.levels.nu_count - self.levels.mu_count)
        } else {
            F::zero()
        }
    }
}

/// Squared distance between the hulls, or `Infinite` when a hull is empty.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MinNorm<F> {
    Finite(F),
    Infinite,
}

impl<F: Float> MinNorm<F> {
    pub fn is_finite(&self) -> bool {
        matches!(self, MinNorm::Finite(_))
    }

    pub fn finite(&self) -> Option<F> {
        match self {
            MinNorm::Finite(v) => Some(*v),
            MinNorm::Infinite => None,
        }
    }

    /// Order with `Infinite` above every finite value.
    pub fn max(self, other: Self) -> Self {
        match (self, other) {
            (MinNorm::Finite(a), MinNorm::Finite(b)) => MinNorm::Finite(a.max(b)),
            _ => MinNorm::Infinite,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HullStatus {
    pub positive: bool,
    pub negative: bool,
}

impl HullStatus {
    pub fn both(&self) -> bool {
        self.positive && self.negative
    }
}

/// A hull is nonempty iff its caps sum to at least one, that is
/// `2 |{i : y_i = ±1, η_i = 1}| ≥ (ν−μ)m`; decided in integers.
pub fn hull_nonempty(eta: &[bool], y: &[i8], lv: &Levels) -> HullStatus {
    let gap = lv.nu_count - lv.mu_count;
    let count = |label: i8| eta.iter().zip(y).filter(|(&e, &v)| e && v == label).count();
    HullStatus {
        positive: 2 * count(1) >= gap,
        negative: 2 * count(-1) >= gap,
    }
}

fn check_dims<F>(k: ArrayView2<F>, y: &[i8], eta: &[bool]) -> Result<(), GeometryError> {
    if k.dim() != (y.len(), y.len()) || eta.len() != y.len() {
        return Err(GeometryError::DimensionMismatch(format!(
            "kernel {:?}, {} labels, {} indicators",
            k.dim(),
            y.len(),
            eta.len()
        )));
    }
    Ok(())
}

fn kept<F: Float>(
    k: ArrayView2<F>,
    y: &[i8],
    eta: &[bool],
) -> (Vec<usize>, ndarray::Array2<F>, Vec<i8>) {
    let idx: Vec<usize> = (0..y.len()).filter(|&i| eta[i]).collect();
    let sub = ndarray::Array2::from_shape_fn((idx.len(), idx.len()), |(a, b)| k[[idx[a], idx[b]]]);
    let ys = idx.iter().map(|&i| y[i]).collect();
    (idx, sub, ys)
}

fn tight<F: Float>() -> SolverOptions<F> {
    SolverOptions::with_tol(F::cst(1e-12).max(F::epsilon() * F::cst(1000.0)))
}

fn solve_tight<F: Float>(p: &QpProblem<F>) -> Result<Option<qp::QpSolution<F>>, GeometryError> {
    match qp::solve(p, &tight()) {
        Ok(s) => Ok(Some(s)),
        Err(QpError::Infeasible) => Ok(None),
        Err(QpError::IterLimit(s)) => Ok(Some(*s)),
        Err(QpError::InvalidProblem(msg)) => Err(GeometryError::Solver(msg)),
    }
}

/// `min ‖Σ γ'_i y_i k(·, x_i)‖²` over the two reduced hulls.
pub fn min_norm_between_hulls<F: Float>(
    k: ArrayView2<F>,
    y: &[i8],
    eta: &[bool],
    lv: &Levels,
) -> Result<MinNorm<F>, GeometryError> {
    check_dims(k, y, eta)?;
    if !hull_nonempty(eta, y, lv).both() {
        return Ok(MinNorm::Infinite);
    }
    let (_, sub, ys) = kept(k, y, eta);
    let n = ys.len();
    let cap = F::cst(2.0) / F::from_count(lv.nu_count - lv.mu_count);
    let q = ndarray::Array2::from_shape_fn((n, n), |(i, j)| {
        let s = if ys[i] == ys[j] { F::one() } else { -F::one() };
        s * sub[[i, j]]
    });
    let p = QpProblem {
        q,
        c: Array1::zeros(n),
        upper: Array1::from_elem(n, cap),
        y: ys,
        d: F::zero(),
        s: F::cst(2.0),
    };
    match solve_tight(&p)? {
        Some(sol) => {
            let v = sol.beta.dot(&p.q.dot(&sol.beta));
            Ok(MinNorm::Finite(v.max(F::zero())))
        }
        None => Ok(MinNorm::Infinite),
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return acc;
        }
    }
    acc
}

fn combinations(m: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (0..k).collect();
    loop {
        out.push(cur.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if cur[i] < m - k + i {
                cur[i] += 1;
                for j in i + 1..k {
                    cur[j] = cur[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// Maximizer of the inner minimum and the value it attains.
#[derive(Debug, Clone, PartialEq)]
pub struct OptValue<F> {
    pub value: MinNorm<F>,
    pub eta: Vec<bool>,
}

/// `max_η min_{f ∈ V_η} ‖f‖²` over indicators with exactly `μm` zeros.
///
/// Zeroing more coordinates only shrinks the hulls, so the maximum over
/// indicators with at least `m − μm` ones sits on this boundary. Ties keep the
/// lexicographically first zero set.
pub fn opt_value<F: Float>(
    k: ArrayView2<F>,
    y: &[i8],
    lv: &Levels,
) -> Result<OptValue<F>, GeometryError> {
    let m = y.len();
    check_dims(k, y, &vec![true; m])?;
    let count = binomial(m, lv.mu_count);
    if count > ENUMERATION_LIMIT {
        return Err(GeometryError::TooLarge {
            count,
            limit: ENUMERATION_LIMIT,
        });
    }
    let candidates = combinations(m, lv.mu_count);
    let values: Result<Vec<(MinNorm<F>, Vec<bool>)>, GeometryError> = candidates
        .par_iter()
        .map(|zeros| {
            let mut eta = vec![true; m];
            for &i in zeros {
                eta[i] = false;
            }
            min_norm_between_hulls(k, y, &eta, lv).map(|v| (v, eta))
        })
        .collect();
    let mut best: Option<(MinNorm<F>, Vec<bool>)> = None;
    for (v, eta) in values? {
        let better = match (&best, v) {
            (None, _) => true,
            (Some((MinNorm::Infinite, _)), _) => false,
            (Some(_), MinNorm::Infinite) => true,
            (Some((MinNorm::Finite(b), _)), MinNorm::Finite(a)) => a > *b,
        };
        if better {
            best = Some((v, eta));
        }
    }
    let (value, eta) = best.expect("at least one indicator");
    Ok(OptValue { value, eta })
}

/// Both sides of the fixed-η strong duality identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PrimalDual<F> {
    Finite {
        primal: F,
        dual: F,
        residual: F,
    },
    /// Empty hull on the dual side and an infeasible QP on the primal side.
    Unbounded,
}

/// Solves the fixed-η primal through its QP dual, maps the solution back to
/// `(α, b, ρ)`, evaluates the primal objective, and compares it with
/// `−(ν−μ)²/8 · min_norm_between_hulls`.
pub fn primal_dual_check<F: Float>(
    k: ArrayView2<F>,
    y: &[i8],
    eta: &[bool],
    lv: &Levels,
) -> Result<PrimalDual<F>, GeometryError> {
    check_dims(k, y, eta)?;
    let dual_side = min_norm_between_hulls(k, y, eta, lv)?;
    let (_, sub, ys) = kept(k, y, eta);
    let gap = lv.gap::<F>();
    let p = build_subproblem_with_box(sub.view(), &ys, &vec![true; ys.len()], gap, lv.m);
    let sol = if ys.is_empty() {
        None
    } else {
        solve_tight(&p)?
    };
    match (sol, dual_side) {
        (None, MinNorm::Infinite) => Ok(PrimalDual::Unbounded),
        (Some(sol), MinNorm::Finite(mn)) => {
            let alpha: Array1<F> = sol
                .beta
                .iter()
                .zip(&ys)
                .map(|(&b, &v)| if v > 0 { b } else { -b })
                .collect();
            let rb = recover_rho_b(sol.beta.view(), alpha.view(), sub.view(), &ys, p.upper[0]);
            let norm_sq = alpha.dot(&sub.dot(&alpha));
            let margins = negative_margins(alpha.view(), rb.b, sub.view(), &ys)
                .map_err(|e| GeometryError::DimensionMismatch(e.to_string()))?;
            let primal =
                robust_objective(norm_sq, rb.rho, &vec![true; ys.len()], margins.view(), lv);
            let dual = -gap * gap / F::cst(8.0) * mn;
            Ok(PrimalDual::Finite {
                primal,
                dual,
                residual: (primal - dual).abs(),
            })
        }
        _ => Err(GeometryError::Inconsistent),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::LevelPolicy;
    use ndarray::{array, Array2};

    fn lv(m: usize, nu: f64, mu: f64) -> Levels {
        Levels::new(m, nu, mu, LevelPolicy::Strict).unwrap()
    }

    #[test]
    fn hull_counting() {
        let y = [1, 1, 1, 1, 1, -1, -1, -1, -1, -1];
        let l = lv(10, 0.6, 0.2);
        assert!(hull_nonempty(&[true; 10], &y, &l).both());
        let mut eta = [true; 10];
        for e in eta.iter_mut().skip(5).take(4) {
            *e = false;
        }
        let s = hull_nonempty(&eta, &y, &l);
        assert!(s.positive && !s.negative);
        let h = HullSpec {
            eta: eta.to_vec(),
            levels: l,
            side: Side::Negative,
        };
        assert_eq!(h.cap::<f64>(0), 0.5);
        assert_eq!(h.cap::<f64>(5), 0.0);
    }

    #[test]
    fn two_point_distance() {
        let k = Array2::<f64>::eye(2);
        let l = lv(2, 1.0, 0.0);
        let v = min_norm_between_hulls(k.view(), &[1, -1], &[true, true], &l).unwrap();
        assert!((v.finite().unwrap() - 2.0).abs() < 1e-12);
        match primal_dual_check(k.view(), &[1, -1], &[true, true], &l).unwrap() {
            PrimalDual::Finite {
                primal,
                dual,
                residual,
            } => {
                assert!((dual + 0.25).abs() < 1e-12);
                assert!((primal + 0.25).abs() < 1e-9);
                assert!(residual < 1e-9);
            }
            PrimalDual::Unbounded => panic!("bounded instance"),
        }
    }

    #[test]
    fn empty_hull_is_infinite_on_both_sides() {
        let k = Array2::<f64>::eye(4);
        let y = [1, 1, -1, -1];
        let l = lv(4, 0.75, 0.25);
        let eta = [true, true, false, true];
        // gap count 2, one negative left: 2·1 ≥ 2 holds
        assert!(min_norm_between_hulls(k.view(), &y, &eta, &l)
            .unwrap()
            .is_finite());
        let l = lv(4, 1.0, 0.25);
        assert_eq!(
            min_norm_between_hulls(k.view(), &y, &eta, &l).unwrap(),
            MinNorm::Infinite
        );
        assert_eq!(
            primal_dual_check(k.view(), &y, &eta, &l).unwrap(),
            PrimalDual::Unbounded
        );
    }

    #[test]
    fn opt_value_reduces_to_single_indicator() {
        let k = array![
            [1.0, 0.3, 0.1, 0.0],
            [0.3, 1.0, 0.2, 0.1],
            [0.1, 0.2, 1.0, 0.4],
            [0.0, 0.1, 0.4, 1.0]
        ];
        let y = [1, 1, -1, -1];
        let l = lv(4, 0.5, 0.0);
        let o = opt_value(k.view(), &y, &l).unwrap();
        let direct = min_norm_between_hulls(k.view(), &y, &[true; 4], &l).unwrap();
        assert_eq!(o.value, direct);
        assert_eq!(o.eta, vec![true; 4]);
    }

    #[test]
    fn enumeration_guard() {
        let m = 40;
        let k = Array2::<f64>::eye(m);
        let y: Vec<i8> = (0..m).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect();
        let l = lv(m, 0.5, 0.25);
        assert!(matches!(
            opt_value(k.view(), &y, &l),
            Err(GeometryError::TooLarge { .. })
        ));
    }

    #[test]
    fn combinations_are_complete() {
        assert_eq!(combinations(5, 2).len(), 10);
        assert_eq!(combinations(4, 0), vec![Vec::<usize>::new()]);
        assert_eq!(binomial(12, 2), 66);
    }
}
