//! Difference-of-convex training of the robust (ν, μ)-SVM.
//!
//! Each outer iteration fixes the outlier indicator `η` from the current
//! negative margins, solves the convex QP obtained by linearizing the concave
//! part, and maps the QP solution back to `(α, b, ρ)`.

use std::collections::HashSet;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{Dataset, ScalerStats};
use crate::float::Float;
use crate::kernel::{eval_cross, gram, GramMatrix, KernelError, KernelSpec};
use crate::objective::{
    descending_order, negative_margins, primal_objective_levels, LevelPolicy, Levels,
    ObjectiveError,
};
use crate::qp::{self, QpError, QpProblem, SolverOptions};

#[derive(Debug, Error)]
pub enum TrainError<F: Float> {
    #[error("training data contains a single class")]
    SingleClass,
    #[error(
        "QP subproblem infeasible at outer iteration {iteration}: the robust problem is unbounded"
    )]
    SubproblemInfeasible { iteration: usize },
    #[error("no convergence within {} outer iterations", .0.config.max_outer_iter)]
    NotConverged(Box<Model<F>>),
    #[error(transparent)]
    Level(#[from] ObjectiveError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error("QP solver failed: {0}")]
    Solver(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig<F> {
    pub nu: f64,
    pub mu: f64,
    pub kernel: KernelSpec<F>,
    /// Relative objective change that stops the outer loop.
    pub tol_objective: f64,
    pub max_outer_iter: usize,
    /// Number of runs; run 0 starts from `η = 1`, later runs from random `η`.
    pub restarts: usize,
    pub seed: u64,
    pub integrality: LevelPolicy,
}

impl<F: Float> TrainConfig<F> {
    pub fn new(nu: f64, mu: f64, kernel: KernelSpec<F>) -> Self {
        TrainConfig {
            nu,
            mu,
            kernel,
            tol_objective: 1e-9,
            max_outer_iter: 200,
            restarts: 1,
            seed: 0,
            integrality: LevelPolicy::Snap,
        }
    }
}

/// Trained decision function `g(x) = Σ_j α_j k(x, x_j) + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Model<F> {
    pub config: TrainConfig<F>,
    pub levels: Levels,
    /// Dual coefficients over the full training set.
    pub alpha: Array1<F>,
    pub b: F,
    pub rho: F,
    pub eta: Vec<bool>,
    /// Indices with `|α_i|` above round-off.
    pub support_idx: Vec<usize>,
    /// Indices with `α_i ≠ 0` whose rows are retained for prediction.
    pub retained_idx: Vec<usize>,
    /// Feature rows of `retained_idx`; zero columns when trained from a Gram matrix only.
    pub retained_features: Array2<F>,
    pub objective: F,
    pub trace: Vec<F>,
    pub iterations: usize,
    /// Set when `ρ` and `b` came from the bound-interval fallback.
    pub rho_b_fallback: bool,
    pub scaler: Option<ScalerStats<F>>,
}

impl<F: Float> Model<F> {
    pub fn kernel(&self) -> &KernelSpec<F> {
        &self.config.kernel
    }

    pub fn m(&self) -> usize {
        self.alpha.len()
    }

    /// Decision values from kernel rows against every training point.
    pub fn decision_from_kernel_rows(
        &self,
        rows: ArrayView2<F>,
    ) -> Result<Array1<F>, TrainError<F>> {
        if rows.ncols() != self.m() {
            return Err(TrainError::DimensionMismatch(format!(
                "expected {} kernel columns, got {}",
                self.m(),
                rows.ncols()
            )));
        }
        Ok(rows.dot(&self.alpha) + self.b)
    }

    /// Decision values for raw feature rows, standardized first when the model
    /// carries scaler statistics. Precomputed kernels take kernel rows instead.
    pub fn decision_function(&self, x_new: ArrayView2<F>) -> Result<Array1<F>, TrainError<F>> {
        if let KernelSpec::Precomputed { .. } = self.config.kernel {
            return self.decision_from_kernel_rows(x_new);
        }
        let x = match &self.scaler {
            Some(s) => {
                if s.mean.len() != x_new.ncols() {
                    return Err(TrainError::DimensionMismatch(format!(
                        "model expects {} features, got {}",
                        s.mean.len(),
                        x_new.ncols()
                    )));
                }
                s.transform(&x_new.to_owned())
            }
            None => x_new.to_owned(),
        };
        if self.retained_idx.is_empty() {
            return Ok(Array1::from_elem(x.nrows(), self.b));
        }
        if self.retained_features.ncols() == 0 && x.ncols() != 0 {
            return Err(TrainError::DimensionMismatch(
                "model was trained from a Gram matrix and keeps no feature rows".into(),
            ));
        }
        let k = eval_cross(&self.config.kernel, self.retained_features.view(), x.view())?;
        let coef: Array1<F> = self.retained_idx.iter().map(|&i| self.alpha[i]).collect();
        Ok(k.dot(&coef) + self.b)
    }

    /// Scores and labels; a score of exactly zero is labelled `+1`.
    pub fn predict(&self, x_new: ArrayView2<F>) -> Result<(Array1<F>, Vec<i8>), TrainError<F>> {
        let scores = self.decision_function(x_new)?;
        let labels = sign_labels(scores.view());
        Ok((scores, labels))
    }

    /// `‖f‖²_H = αᵀKα` on the training Gram matrix.
    pub fn norm_sq(&self, k: &GramMatrix<F>) -> Result<F, KernelError> {
        crate::kernel::rkhs_norm_sq(self.alpha.view(), k)
    }
}

pub fn sign_labels<F: Float>(scores: ArrayView1<F>) -> Vec<i8> {
    scores
        .iter()
        .map(|&s| if s >= F::zero() { 1 } else { -1 })
        .collect()
}

/// Drops the `μm` largest margins: `η_i = 0` for the first `mu_count`
/// positions of the stable descending sort.
pub fn update_eta<F: Float>(margins: ArrayView1<F>, mu_count: usize) -> Vec<bool> {
    let mut eta = vec![true; margins.len()];
    for i in descending_order(margins).into_iter().take(mu_count) {
        eta[i] = false;
    }
    eta
}

fn subproblem<F: Float>(k: ArrayView2<F>, y: &[i8], eta: &[bool], s: F, inv_m: F) -> QpProblem<F> {
    let m = y.len();
    let yf: Vec<F> = y
        .iter()
        .map(|&v| if v > 0 { F::one() } else { -F::one() })
        .collect();
    let q = Array2::from_shape_fn((m, m), |(i, j)| yf[i] * yf[j] * k[[i, j]]);
    let dropped: Vec<usize> = (0..m).filter(|&i| !eta[i]).collect();
    let c: Array1<F> = (0..m)
        .map(|i| -dropped.iter().map(|&j| q[[i, j]]).sum::<F>() * inv_m)
        .collect();
    let d = dropped.iter().map(|&j| yf[j]).sum::<F>() * inv_m;
    QpProblem {
        q,
        c,
        upper: Array1::from_elem(m, inv_m),
        y: y.to_vec(),
        d,
        s,
    }
}

/// QP of one outer iteration: `K̃_ij = y_i y_j K_ij`, `c = −K̃(1−η)/m`,
/// `d = yᵀ(1−η)/m`, box `1/m`, sum `ν`.
pub fn build_subproblem<F: Float>(k: ArrayView2<F>, y: &[i8], eta: &[bool], nu: F) -> QpProblem<F> {
    subproblem(k, y, eta, nu, F::one() / F::from_count(y.len()))
}

/// Same structure with an explicit sum `s` and box `1/m_box`.
pub fn build_subproblem_with_box<F: Float>(
    k: ArrayView2<F>,
    y: &[i8],
    eta: &[bool],
    s: F,
    m_box: usize,
) -> QpProblem<F> {
    subproblem(k, y, eta, s, F::one() / F::from_count(m_box))
}

/// `α = y ∘ (β − (1−η)/m)`.
pub fn recover_alpha<F: Float>(beta: ArrayView1<F>, eta: &[bool], y: &[i8]) -> Array1<F> {
    let inv_m = F::one() / F::from_count(beta.len());
    recover_alpha_with_box(beta, eta, y, inv_m)
}

fn recover_alpha_with_box<F: Float>(
    beta: ArrayView1<F>,
    eta: &[bool],
    y: &[i8],
    inv_m: F,
) -> Array1<F> {
    beta.iter()
        .zip(eta)
        .zip(y)
        .map(|((&b, &e), &yi)| {
            let v = if e { b } else { b - inv_m };
            if yi > 0 {
                v
            } else {
                -v
            }
        })
        .collect()
}

/// Threshold and bias recovered from a QP solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoB<F> {
    pub rho: F,
    pub b: F,
    /// True when a class had no free coordinate and the interval midpoint was used.
    pub fallback: bool,
}

/// Solves `f_i + b = ρ` (positives) and `f_i + b = −ρ` (negatives) over free
/// coordinates by least squares, with `f = Kα`.
///
/// A class without free coordinates takes the midpoint of the interval its
/// bound coordinates allow (or the finite end of a half-line).
pub fn recover_rho_b<F: Float>(
    beta: ArrayView1<F>,
    alpha: ArrayView1<F>,
    k: ArrayView2<F>,
    y: &[i8],
    upper: F,
) -> RhoB<F> {
    let f = k.dot(&alpha);
    let margin = F::cst(1e-8) * upper;
    // u = b − ρ from positives, v = b + ρ from negatives
    let mut sums = [F::zero(); 2];
    let mut counts = [0usize; 2];
    let mut lo = [F::neg_infinity(); 2];
    let mut hi = [F::infinity(); 2];
    for i in 0..beta.len() {
        let c = if y[i] > 0 { 0 } else { 1 };
        let target = -f[i];
        if beta[i] > margin && beta[i] < upper - margin {
            sums[c] = sums[c] + target;
            counts[c] += 1;
            continue;
        }
        let at_lower = beta[i] <= margin;
        // positives: β=0 ⇒ u ≥ −f_i, β=1/m ⇒ u ≤ −f_i; negatives reversed
        if (c == 0) == at_lower {
            lo[c] = lo[c].max(target);
        } else {
            hi[c] = hi[c].min(target);
        }
    }
    let mut fallback = false;
    let mut value = [F::zero(); 2];
    for c in 0..2 {
        value[c] = if counts[c] > 0 {
            sums[c] / F::from_count(counts[c])
        } else {
            fallback = true;
            match (lo[c].is_finite(), hi[c].is_finite()) {
                (true, true) => (lo[c] + hi[c]) * F::cst(0.5),
                (true, false) => lo[c],
                (false, true) => hi[c],
                (false, false) => F::zero(),
            }
        };
    }
    let half = F::cst(0.5);
    RhoB {
        b: (value[0] + value[1]) * half,
        rho: (value[1] - value[0]) * half,
        fallback,
    }
}

/// Solution of one DC run before features are attached.
#[derive(Debug, Clone)]
struct DcRun<F> {
    alpha: Array1<F>,
    b: F,
    rho: F,
    eta: Vec<bool>,
    objective: F,
    trace: Vec<F>,
    iterations: usize,
    fallback: bool,
    converged: bool,
}

fn qp_options<F: Float>(k: &GramMatrix<F>) -> SolverOptions<F> {
    let base = F::cst(1e-11).max(F::epsilon() * F::cst(1000.0));
    SolverOptions {
        tol: base * F::one().max(k.max_diagonal()),
        max_iter: None,
        record_trace: false,
    }
}

fn dc_run<F: Float>(
    k: &GramMatrix<F>,
    y: &[i8],
    lv: &Levels,
    cfg: &TrainConfig<F>,
    eta0: Vec<bool>,
) -> Result<DcRun<F>, TrainError<F>> {
    let nu = F::from_count(lv.nu_count) / F::from_count(lv.m);
    let opts = qp_options(k);
    let tol = F::cst(cfg.tol_objective);
    let mut eta = eta0;
    let mut seen: HashSet<Vec<bool>> = HashSet::new();
    let mut best: Option<DcRun<F>> = None;
    let mut trace: Vec<F> = Vec::new();
    let mut prev_beta: Option<Array1<F>> = None;

    for iteration in 0..cfg.max_outer_iter.max(1) {
        seen.insert(eta.clone());
        let p = build_subproblem(k.entries.view(), y, &eta, nu);
        let sol = match prev_beta.take() {
            Some(b0) => qp::solve_from(&p, b0, &opts),
            None => qp::solve(&p, &opts),
        };
        let sol = match sol {
            Ok(s) => s,
            Err(QpError::Infeasible) => return Err(TrainError::SubproblemInfeasible { iteration }),
            Err(QpError::IterLimit(s)) => {
                log::warn!(
                    "QP iteration limit at outer iteration {}, residual {}",
                    iteration,
                    s.kkt_residual
                );
                *s
            }
            Err(QpError::InvalidProblem(msg)) => return Err(TrainError::Solver(msg)),
        };
        let alpha = recover_alpha(sol.beta.view(), &eta, y);
        let rb = recover_rho_b(
            sol.beta.view(),
            alpha.view(),
            k.entries.view(),
            y,
            p.upper[0],
        );
        let norm_sq = crate::kernel::rkhs_norm_sq(alpha.view(), k)?;
        let margins = negative_margins(alpha.view(), rb.b, k.entries.view(), y)?;
        let objective = primal_objective_levels(norm_sq, lv, margins.view());

        if let Some(&prev) = trace.last() {
            if objective > prev + tol * prev.abs() {
                // numerical ascent: keep the previous iterate
                let mut out = best.expect("previous iterate");
                out.converged = true;
                return Ok(out);
            }
        }
        trace.push(objective);
        let next_eta = update_eta(margins.view(), lv.mu_count);
        let stalled = trace.len() >= 2 && {
            let prev = trace[trace.len() - 2];
            (prev - objective).abs() <= tol * prev.abs().max(F::min_positive_value())
        };
        let repeated = seen.contains(&next_eta);
        best = Some(DcRun {
            alpha,
            b: rb.b,
            rho: rb.rho,
            eta: eta.clone(),
            objective,
            trace: trace.clone(),
            iterations: iteration + 1,
            fallback: rb.fallback,
            converged: repeated || stalled,
        });
        if repeated || stalled {
            break;
        }
        prev_beta = Some(sol.beta);
        eta = next_eta;
    }
    Ok(best.expect("at least one outer iteration"))
}

fn check_classes<F: Float>(y: &[i8]) -> Result<(), TrainError<F>> {
    let pos = y.iter().filter(|&&v| v > 0).count();
    if pos == 0 || pos == y.len() {
        Err(TrainError::SingleClass)
    } else {
        Ok(())
    }
}

/// Trains from a precomputed Gram matrix; `features` (rows aligned with the
/// Gram matrix) are retained for prediction when given.
pub fn train_gram<F: Float>(
    k: &GramMatrix<F>,
    y: &[i8],
    features: Option<ArrayView2<F>>,
    cfg: &TrainConfig<F>,
) -> Result<Model<F>, TrainError<F>> {
    let m = y.len();
    if k.size() != m {
        return Err(TrainError::DimensionMismatch(format!(
            "Gram matrix is {}x{}, {} labels",
            k.size(),
            k.size(),
            m
        )));
    }
    check_classes(y)?;
    let lv = Levels::new(m, cfg.nu, cfg.mu, cfg.integrality)?;

    let mut first_err = None;
    let mut best: Option<DcRun<F>> = None;
    for run in 0..cfg.restarts.max(1) {
        let eta0 = if run == 0 {
            vec![true; m]
        } else {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(run as u64));
            let mut eta = vec![true; m];
            for i in sample(&mut rng, m, lv.mu_count).into_iter() {
                eta[i] = false;
            }
            eta
        };
        match dc_run(k, y, &lv, cfg, eta0) {
            Ok(r) => {
                if best.as_ref().is_none_or(|b| r.objective < b.objective) {
                    best = Some(r);
                }
            }
            Err(e) => {
                log::debug!("run {} failed: {}", run, e);
                if first_err.is_none() {
                    first_err = Some(e);
                }
            }
        }
    }
    let Some(run) = best else {
        return Err(first_err.expect("some run reported an error"));
    };
    let model = assemble(run.clone(), lv, cfg, features);
    if run.converged {
        Ok(model)
    } else {
        Err(TrainError::NotConverged(Box::new(model)))
    }
}

fn assemble<F: Float>(
    run: DcRun<F>,
    levels: Levels,
    cfg: &TrainConfig<F>,
    features: Option<ArrayView2<F>>,
) -> Model<F> {
    let m = run.alpha.len();
    let thresh = F::cst(1e-9).max(F::epsilon() * F::cst(16.0)) / F::from_count(m);
    let support_idx: Vec<usize> = (0..m).filter(|&i| run.alpha[i].abs() > thresh).collect();
    let retained_idx: Vec<usize> = (0..m).filter(|&i| run.alpha[i] != F::zero()).collect();
    let retained_features = match features {
        Some(x) => Array2::from_shape_fn((retained_idx.len(), x.ncols()), |(r, c)| {
            x[[retained_idx[r], c]]
        }),
        None => Array2::zeros((retained_idx.len(), 0)),
    };
    Model {
        config: cfg.clone(),
        levels,
        alpha: run.alpha,
        b: run.b,
        rho: run.rho,
        eta: run.eta,
        support_idx,
        retained_idx,
        retained_features,
        objective: run.objective,
        trace: run.trace,
        iterations: run.iterations,
        rho_b_fallback: run.fallback,
        scaler: None,
    }
}

/// Trains on a dataset whose features are already in model space.
pub fn train<F: Float>(ds: &Dataset<F>, cfg: &TrainConfig<F>) -> Result<Model<F>, TrainError<F>> {
    check_classes(&ds.labels)?;
    let k = gram(&cfg.kernel, ds.features.view())?;
    let features = match cfg.kernel {
        KernelSpec::Precomputed { .. } => None,
        _ => Some(ds.features.view()),
    };
    train_gram(&k, &ds.labels, features, cfg)
}

/// Standardizes the features, trains, and stores the scaler in the model so
/// that prediction accepts raw features.
pub fn train_standardized<F: Float>(
    ds: &Dataset<F>,
    cfg: &TrainConfig<F>,
) -> Result<Model<F>, TrainError<F>> {
    let (scaled, stats) = crate::data::standardize(ds);
    let mut model = train(&scaled, cfg)?;
    model.scaler = Some(stats);
    Ok(model)
}
