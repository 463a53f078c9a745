//! Box-constrained convex QP with the two ν-SVM equality constraints:
//!
//! ```text
//! minimize   ½ βᵀQβ + cᵀβ
//! subject to 0 ≤ β ≤ u,  βᵀy = d,  βᵀ1 = s
//! ```
//!
//! Because `y ∈ {±1}`, the two equalities fix the mass of each class:
//! `Σ_{y=+1} β = (s+d)/2` and `Σ_{y=-1} β = (s-d)/2`. The solver moves mass
//! between two coordinates of the same class at a time, which keeps both
//! equalities satisfied exactly along the way.

use ndarray::{Array1, Array2, ArrayView1};
use thiserror::Error;

use crate::float::Float;

#[derive(Debug, Error)]
pub enum QpError<F: Float> {
    #[error("constraint set is empty")]
    Infeasible,
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("iteration limit reached (KKT residual {})", .0.kkt_residual)]
    IterLimit(Box<QpSolution<F>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem<F> {
    pub q: Array2<F>,
    pub c: Array1<F>,
    pub upper: Array1<F>,
    pub y: Vec<i8>,
    /// Required value of `βᵀy`.
    pub d: F,
    /// Required value of `βᵀ1`.
    pub s: F,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Optimal,
    IterLimit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution<F> {
    pub beta: Array1<F>,
    pub objective: F,
    pub status: QpStatus,
    /// Largest same-class KKT violation `max_{β_j>0} G_j − min_{β_i<u_i} G_i`.
    pub kkt_residual: F,
    pub iterations: usize,
    /// Objective after every pair update, when requested.
    pub trace: Vec<F>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverOptions<F> {
    pub tol: F,
    /// Pair-update budget; `None` means `100 m²`.
    pub max_iter: Option<usize>,
    pub record_trace: bool,
}

impl<F: Float> Default for SolverOptions<F> {
    fn default() -> Self {
        SolverOptions {
            tol: F::cst(1e-8).max(F::epsilon() * F::cst(100.0)),
            max_iter: None,
            record_trace: false,
        }
    }
}

impl<F: Float> SolverOptions<F> {
    pub fn with_tol(tol: F) -> Self {
        SolverOptions {
            tol,
            ..Default::default()
        }
    }
}

impl<F: Float> QpProblem<F> {
    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    pub fn validate(&self) -> Result<(), QpError<F>> {
        let m = self.c.len();
        if self.q.dim() != (m, m) || self.upper.len() != m || self.y.len() != m {
            return Err(QpError::InvalidProblem(format!(
                "Q is {:?}, c has {}, upper {}, y {}",
                self.q.dim(),
                m,
                self.upper.len(),
                self.y.len()
            )));
        }
        if self
            .upper
            .iter()
            .any(|&u| !(u > F::zero()) || !u.is_finite())
        {
            return Err(QpError::InvalidProblem(
                "upper bounds must be positive".into(),
            ));
        }
        if self.y.iter().any(|&v| v != 1 && v != -1) {
            return Err(QpError::InvalidProblem("y must be ±1".into()));
        }
        let scale = self.q.iter().fold(F::one(), |a, &b| a.max(b.abs()));
        let tol = F::cst(1e-10) * scale;
        for i in 0..m {
            for j in 0..i {
                if (self.q[[i, j]] - self.q[[j, i]]).abs() > tol {
                    return Err(QpError::InvalidProblem("Q is not symmetric".into()));
                }
            }
        }
        Ok(())
    }

    /// Mass `(p, n)` the positive and negative classes must carry.
    pub fn class_targets(&self) -> (F, F) {
        let half = F::cst(0.5);
        ((self.s + self.d) * half, (self.s - self.d) * half)
    }

    /// Total box capacity per class.
    pub fn class_capacity(&self) -> (F, F) {
        let mut pos = F::zero();
        let mut neg = F::zero();
        for (&u, &y) in self.upper.iter().zip(&self.y) {
            if y == 1 {
                pos = pos + u;
            } else {
                neg = neg + u;
            }
        }
        (pos, neg)
    }

    pub fn objective(&self, beta: ArrayView1<F>) -> F {
        F::cst(0.5) * beta.dot(&self.q.dot(&beta)) + self.c.dot(&beta)
    }

    fn slack(&self) -> F {
        let (cp, cn) = self.class_capacity();
        let scale = F::one().max(self.s.abs()).max(self.d.abs()).max(cp).max(cn);
        F::epsilon() * F::cst(64.0) * scale
    }
}

/// Whether `{0 ≤ β ≤ u, βᵀy = d, βᵀ1 = s}` is nonempty.
///
/// Decided in closed form from the per-class targets, with a rounding slack of
/// a few ulps.
pub fn feasible<F: Float>(p: &QpProblem<F>) -> bool {
    let (tp, tn) = p.class_targets();
    let (cp, cn) = p.class_capacity();
    let eps = p.slack();
    tp >= -eps && tn >= -eps && tp <= cp + eps && tn <= cn + eps
}

/// Initial point spreading each class target proportionally to the upper bounds.
fn initial_point<F: Float>(p: &QpProblem<F>) -> Array1<F> {
    let (tp, tn) = p.class_targets();
    let (cp, cn) = p.class_capacity();
    let fp = (tp.max(F::zero()) / cp).min(F::one());
    let fn_ = (tn.max(F::zero()) / cn).min(F::one());
    p.upper
        .iter()
        .zip(&p.y)
        .map(|(&u, &y)| {
            let f = if y == 1 { fp } else { fn_ };
            if f >= F::one() {
                u
            } else {
                u * f
            }
        })
        .collect()
}

struct Selection<F> {
    up: usize,
    down: usize,
    residual: F,
}

/// Picks the same-class pair with the best second-order gain.
///
/// `down` maximizes the gradient over coordinates that can decrease; `up`
/// maximizes `(G_down − G_up)² / curvature` over coordinates that can
/// increase. Ties go to the lowest index.
fn select_pair<F: Float>(
    p: &QpProblem<F>,
    beta: &Array1<F>,
    grad: &Array1<F>,
    tau: F,
    tol: F,
) -> Selection<F> {
    let m = beta.len();
    let mut residual = F::zero();
    let mut best: Option<(usize, usize, F)> = None;
    for class in [1i8, -1] {
        let mut down = None;
        let mut gmax = F::neg_infinity();
        let mut gmin = F::infinity();
        for t in 0..m {
            if p.y[t] != class {
                continue;
            }
            if beta[t] > F::zero() && grad[t] > gmax {
                gmax = grad[t];
                down = Some(t);
            }
            if beta[t] < p.upper[t] && grad[t] < gmin {
                gmin = grad[t];
            }
        }
        let Some(j) = down else { continue };
        if gmin == F::infinity() {
            continue;
        }
        let violation = gmax - gmin;
        residual = residual.max(violation);
        if violation <= tol {
            continue;
        }
        let qjj = p.q[[j, j]];
        let mut pick: Option<(usize, F)> = None;
        for t in 0..m {
            if p.y[t] != class || beta[t] >= p.upper[t] || grad[t] >= gmax {
                continue;
            }
            let mut a = p.q[[t, t]] + qjj - F::cst(2.0) * p.q[[t, j]];
            if a <= tau {
                a = tau;
            }
            let diff = gmax - grad[t];
            let gain = diff * diff / a;
            if pick.is_none_or(|(_, g)| gain > g) {
                pick = Some((t, gain));
            }
        }
        if let Some((i, gain)) = pick {
            if best.is_none_or(|(_, _, g)| gain > g) {
                best = Some((i, j, gain));
            }
        }
    }
    match best {
        Some((up, down, _)) => Selection { up, down, residual },
        None => Selection {
            up: usize::MAX,
            down: usize::MAX,
            residual,
        },
    }
}

fn gradient<F: Float>(p: &QpProblem<F>, beta: &Array1<F>) -> Array1<F> {
    p.q.dot(beta) + &p.c
}

fn free_set<F: Float>(p: &QpProblem<F>, beta: &Array1<F>) -> Vec<usize> {
    (0..beta.len())
        .filter(|&t| beta[t] > F::zero() && beta[t] < p.upper[t])
        .collect()
}

/// Newton step on the free coordinates with the class masses held fixed,
/// followed by an exact line search clipped to the box. Singular directions
/// are handled by a pseudo-inverse. Returns whether `beta` moved.
fn newton_polish<F: Float>(
    p: &QpProblem<F>,
    free: &[usize],
    beta: &mut Array1<F>,
    grad: &mut Array1<F>,
) -> bool {
    let n = free.len();
    let classes: Vec<i8> = [1i8, -1]
        .into_iter()
        .filter(|&c| free.iter().any(|&t| p.y[t] == c))
        .collect();
    if n < 2 {
        return false;
    }
    let size = n + classes.len();
    let mut kkt = nalgebra::DMatrix::<f64>::zeros(size, size);
    let mut rhs = nalgebra::DVector::<f64>::zeros(size);
    for (a, &i) in free.iter().enumerate() {
        for (b, &j) in free.iter().enumerate() {
            kkt[(a, b)] = p.q[[i, j]].as_f64();
        }
        for (c, &class) in classes.iter().enumerate() {
            if p.y[i] == class {
                kkt[(a, n + c)] = 1.0;
                kkt[(n + c, a)] = 1.0;
            }
        }
        rhs[a] = -grad[i].as_f64();
    }
    let eig = nalgebra::SymmetricEigen::new(kkt);
    let lmax = eig.eigenvalues.iter().fold(0.0f64, |a, &l| a.max(l.abs()));
    let cutoff = 1e-13 * lmax * size as f64;
    let proj = eig.eigenvectors.transpose() * &rhs;
    let mut sol = nalgebra::DVector::<f64>::zeros(size);
    for k in 0..size {
        let l = eig.eigenvalues[k];
        if l.abs() > cutoff {
            sol += eig.eigenvectors.column(k) * (proj[k] / l);
        }
    }
    let mut dir: Vec<f64> = sol.iter().take(n).copied().collect();
    for &class in &classes {
        let members: Vec<usize> = (0..n).filter(|&a| p.y[free[a]] == class).collect();
        let mean = members.iter().map(|&a| dir[a]).sum::<f64>() / members.len() as f64;
        for &a in &members {
            dir[a] -= mean;
        }
    }
    let slope: f64 = free
        .iter()
        .zip(&dir)
        .map(|(&i, &d)| grad[i].as_f64() * d)
        .sum();
    if !(slope < 0.0) {
        return false;
    }
    let mut curv = 0.0;
    for (a, &i) in free.iter().enumerate() {
        for (b, &j) in free.iter().enumerate() {
            curv += dir[a] * p.q[[i, j]].as_f64() * dir[b];
        }
    }
    let mut step = if curv > 0.0 {
        -slope / curv
    } else {
        f64::INFINITY
    };
    let mut blocking = None;
    for (a, &i) in free.iter().enumerate() {
        let room = if dir[a] > 0.0 {
            (p.upper[i] - beta[i]).as_f64() / dir[a]
        } else if dir[a] < 0.0 {
            beta[i].as_f64() / -dir[a]
        } else {
            continue;
        };
        if room < step {
            step = room;
            blocking = Some(a);
        }
    }
    if !(step > 0.0 && step.is_finite()) {
        return false;
    }
    let before = p.objective(beta.view());
    let saved = beta.clone();
    for (a, &i) in free.iter().enumerate() {
        let v = (beta[i].as_f64() + step * dir[a]).clamp(0.0, p.upper[i].as_f64());
        beta[i] = F::cst(v);
    }
    if let Some(a) = blocking {
        let i = free[a];
        beta[i] = if dir[a] > 0.0 { p.upper[i] } else { F::zero() };
    }
    if p.objective(beta.view()) >= before {
        *beta = saved;
        return false;
    }
    *grad = gradient(p, beta);
    true
}

/// Solves the problem from the default proportional starting point.
pub fn solve<F: Float>(
    p: &QpProblem<F>,
    opts: &SolverOptions<F>,
) -> Result<QpSolution<F>, QpError<F>> {
    p.validate()?;
    if !feasible(p) {
        return Err(QpError::Infeasible);
    }
    let beta = initial_point(p);
    run(p, beta, opts)
}

/// Solves from a caller supplied feasible point; falls back to the default
/// start when `beta0` violates the constraints.
pub fn solve_from<F: Float>(
    p: &QpProblem<F>,
    beta0: Array1<F>,
    opts: &SolverOptions<F>,
) -> Result<QpSolution<F>, QpError<F>> {
    p.validate()?;
    if !feasible(p) {
        return Err(QpError::Infeasible);
    }
    let beta = if satisfies_constraints(p, beta0.view()) {
        beta0
    } else {
        initial_point(p)
    };
    run(p, beta, opts)
}

/// Box exactly, equalities to `1e-9 · max(1, |d|, |s|)`.
pub fn satisfies_constraints<F: Float>(p: &QpProblem<F>, beta: ArrayView1<F>) -> bool {
    if beta.len() != p.len() {
        return false;
    }
    if beta
        .iter()
        .zip(p.upper.iter())
        .any(|(&b, &u)| b < F::zero() || b > u)
    {
        return false;
    }
    let tol = F::cst(1e-9) * F::one().max(p.d.abs()).max(p.s.abs());
    let dot_y: F = beta
        .iter()
        .zip(&p.y)
        .map(|(&b, &y)| if y == 1 { b } else { -b })
        .sum();
    (dot_y - p.d).abs() <= tol && (beta.sum() - p.s).abs() <= tol
}

fn run<F: Float>(
    p: &QpProblem<F>,
    mut beta: Array1<F>,
    opts: &SolverOptions<F>,
) -> Result<QpSolution<F>, QpError<F>> {
    let m = p.len();
    let max_iter = opts.max_iter.unwrap_or(100 * m * m).max(1);
    let max_diag = p.q.diag().iter().fold(F::zero(), |a, &b| a.max(b));
    let tau = (F::cst(2e-10) * max_diag).max(F::min_positive_value());
    let mut grad = gradient(p, &beta);
    let mut objective = p.objective(beta.view());
    let mut trace = Vec::new();
    let mut iterations = 0;
    let two = F::cst(2.0);
    let half = F::cst(0.5);
    let polish_every = 2 * m.max(10);
    let mut polished: Vec<usize> = Vec::new();

    loop {
        if iterations > 0 && iterations % polish_every == 0 {
            let mut free = free_set(p, &beta);
            for _ in 0..m {
                if free == polished {
                    break;
                }
                let moved = newton_polish(p, &free, &mut beta, &mut grad);
                if moved && opts.record_trace {
                    objective = p.objective(beta.view());
                    trace.push(objective);
                }
                polished = free;
                if !moved {
                    break;
                }
                free = free_set(p, &beta);
            }
        }
        let mut sel = select_pair(p, &beta, &grad, tau, opts.tol);
        if sel.residual <= opts.tol {
            // confirm against a freshly computed gradient
            grad = gradient(p, &beta);
            sel = select_pair(p, &beta, &grad, tau, opts.tol);
            if sel.residual <= opts.tol {
                return Ok(QpSolution {
                    objective: p.objective(beta.view()),
                    beta,
                    status: QpStatus::Optimal,
                    kkt_residual: sel.residual,
                    iterations,
                    trace,
                });
            }
        }
        if iterations >= max_iter || sel.up == usize::MAX {
            grad = gradient(p, &beta);
            let residual = select_pair(p, &beta, &grad, tau, opts.tol).residual;
            return Err(QpError::IterLimit(Box::new(QpSolution {
                objective: p.objective(beta.view()),
                beta,
                status: QpStatus::IterLimit,
                kkt_residual: residual,
                iterations,
                trace,
            })));
        }

        let (i, j) = (sel.up, sel.down);
        let curvature = p.q[[i, i]] + p.q[[j, j]] - two * p.q[[i, j]];
        let a = if curvature <= tau { tau } else { curvature };
        let delta = grad[j] - grad[i];
        let room_up = p.upper[i] - beta[i];
        let room_down = beta[j];
        let mut step = delta / a;
        let pair_sum = beta[i] + beta[j];
        if step >= room_up && room_up <= room_down {
            step = room_up;
            beta[i] = p.upper[i];
            beta[j] = (pair_sum - p.upper[i]).max(F::zero());
        } else if step >= room_down {
            step = room_down;
            beta[j] = F::zero();
            beta[i] = pair_sum.min(p.upper[i]);
        } else {
            beta[i] = beta[i] + step;
            beta[j] = beta[j] - step;
        }
        let qi = p.q.row(i);
        let qj = p.q.row(j);
        for t in 0..m {
            grad[t] = grad[t] + step * (qi[t] - qj[t]);
        }
        if opts.record_trace {
            objective = objective - step * delta + half * step * step * curvature;
            trace.push(objective);
        }
        iterations += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn two_point(s: f64) -> QpProblem<f64> {
        QpProblem {
            q: Array2::eye(2),
            c: array![0.0, 0.0],
            upper: array![0.5, 0.5],
            y: vec![1, -1],
            d: 0.0,
            s,
        }
    }

    #[test]
    fn feasibility_closed_form() {
        assert!(feasible(&two_point(1.0)));
        assert!(!feasible(&two_point(1.2)));
    }

    #[test]
    fn single_feasible_point() {
        let sol = solve(&two_point(1.0), &SolverOptions::default()).unwrap();
        assert_eq!(sol.status, QpStatus::Optimal);
        assert_eq!(sol.beta, array![0.5, 0.5]);
        assert!((sol.objective - 0.25).abs() < 1e-15);
    }

    #[test]
    fn infeasible_is_reported() {
        assert!(matches!(
            solve(&two_point(1.2), &SolverOptions::default()),
            Err(QpError::Infeasible)
        ));
    }

    #[test]
    fn rejects_malformed_problems() {
        let mut p = two_point(1.0);
        p.upper[0] = 0.0;
        assert!(matches!(
            solve(&p, &SolverOptions::default()),
            Err(QpError::InvalidProblem(_))
        ));
        let mut p = two_point(1.0);
        p.q[[0, 1]] = 1.0;
        assert!(matches!(
            solve(&p, &SolverOptions::default()),
            Err(QpError::InvalidProblem(_))
        ));
    }

    #[test]
    fn same_class_pair_reaches_known_optimum() {
        // two positives with identity Q: minimize ½(b0² + b1²) - b0 on b0 + b1 = 1
        let p = QpProblem::<f64> {
            q: Array2::eye(2),
            c: array![-1.0, 0.0],
            upper: array![1.0, 1.0],
            y: vec![1, 1],
            d: 1.0,
            s: 1.0,
        };
        let sol = solve(&p, &SolverOptions::default()).unwrap();
        assert!((sol.beta[0] - 1.0).abs() < 1e-12);
        assert!(sol.beta[1].abs() < 1e-12);
    }

    #[test]
    fn iteration_limit_returns_iterate() {
        let q = array![
            [2.0, 0.3, 0.1, 0.0],
            [0.3, 1.0, 0.2, 0.1],
            [0.1, 0.2, 1.5, 0.4],
            [0.0, 0.1, 0.4, 1.2]
        ];
        let p = QpProblem {
            q,
            c: array![-0.3, 0.2, -0.1, 0.05],
            upper: array![1.0, 1.0, 1.0, 1.0],
            y: vec![1, 1, -1, -1],
            d: 0.0,
            s: 1.0,
        };
        let opts = SolverOptions {
            tol: 1e-14,
            max_iter: Some(1),
            record_trace: false,
        };
        match solve(&p, &opts) {
            Err(QpError::IterLimit(sol)) => {
                assert_eq!(sol.iterations, 1);
                assert!(satisfies_constraints(&p, sol.beta.view()));
            }
            other => panic!("expected iteration limit, got {:?}", other),
        }
    }

    #[test]
    fn works_in_f32() {
        let p = QpProblem::<f32> {
            q: Array2::eye(2),
            c: array![0.0, 0.0],
            upper: array![0.5, 0.5],
            y: vec![1, -1],
            d: 0.0,
            s: 1.0,
        };
        let sol = solve(&p, &SolverOptions::default()).unwrap();
        assert!((sol.objective - 0.25).abs() < 1e-6);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn random_problem() -> impl Strategy<Value = QpProblem<f64>> {
            (3usize..9).prop_flat_map(|m| {
                (
                    proptest::collection::vec(-1.0f64..1.0, m * m),
                    proptest::collection::vec(-1.0f64..1.0, m),
                    proptest::collection::vec(0.1f64..1.0, m),
                    proptest::collection::vec(any::<bool>(), m),
                    0.0f64..1.0,
                    0.0f64..1.0,
                )
                    .prop_map(move |(a, c, u, ys, fp, fnn)| {
                        let a = Array2::from_shape_vec((m, m), a).unwrap();
                        let q = a.t().dot(&a);
                        let mut y: Vec<i8> = ys.iter().map(|&b| if b { 1 } else { -1 }).collect();
                        y[0] = 1;
                        y[1] = -1;
                        let upper = Array1::from(u);
                        let (mut cp, mut cn) = (0.0, 0.0);
                        for (&ui, &yi) in upper.iter().zip(&y) {
                            if yi == 1 {
                                cp += ui
                            } else {
                                cn += ui
                            }
                        }
                        let (tp, tn) = (fp * cp, fnn * cn);
                        QpProblem {
                            q,
                            c: Array1::from(c),
                            upper,
                            y,
                            d: tp - tn,
                            s: tp + tn,
                        }
                    })
            })
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn optimal_solutions_are_feasible_and_stationary(p in random_problem()) {
                let opts = SolverOptions { tol: 1e-9, max_iter: None, record_trace: true };
                let sol = solve(&p, &opts).unwrap();
                prop_assert!(satisfies_constraints(&p, sol.beta.view()));
                prop_assert!(sol.kkt_residual <= 1e-9);
                // monotone descent of the pair updates
                let mut prev = f64::INFINITY;
                for &v in &sol.trace {
                    prop_assert!(v <= prev + 1e-12 * (1.0 + prev.abs().min(1e12)));
                    prev = v;
                }
                // reduced gradient vanishes on free coordinates for fitted multipliers
                let g = p.q.dot(&sol.beta) + &p.c;
                for class in [1i8, -1] {
                    let free: Vec<usize> = (0..p.len())
                        .filter(|&i| p.y[i] == class && sol.beta[i] > 1e-12 && sol.beta[i] < p.upper[i] - 1e-12)
                        .collect();
                    if free.is_empty() { continue; }
                    let lambda = free.iter().map(|&i| g[i]).sum::<f64>() / free.len() as f64;
                    for &i in &free {
                        prop_assert!((g[i] - lambda).abs() <= 1e-8);
                    }
                }
            }

            #[test]
            fn deterministic(p in random_problem()) {
                let a = solve(&p, &SolverOptions::default()).unwrap();
                let b = solve(&p, &SolverOptions::default()).unwrap();
                prop_assert_eq!(a.beta, b.beta);
            }
        }
    }
}
