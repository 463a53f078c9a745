//! Synthetic data, contamination operators and breakdown sweeps.

use ndarray::{Array1, Array2, Axis};
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, Dataset};
use crate::float::Float;
use crate::kernel::{eval_cross, gram, KernelSpec};
use crate::trainer::{sign_labels, train_gram, Model, TrainConfig, TrainError};

#[derive(Debug, Error)]
pub enum LabError {
    #[error("requested {requested} contaminated samples but only {available} are eligible")]
    CountTooLarge { requested: usize, available: usize },
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("contaminated data shares only {shared} samples with the original, expected at least {expected}")]
    Membership { shared: usize, expected: usize },
    #[error(transparent)]
    Data(#[from] DataError),
}

/// Two interleaved spirals of `m/2` points each, 1.5 turns, radius growing
/// linearly with the angle; the negative spiral is the positive one rotated
/// by π. Coordinates get independent `N(0, noise_sd²)` noise.
pub fn spiral<F: Float>(m: usize, noise_sd: f64, seed: u64) -> Result<Dataset<F>, LabError> {
    if m < 4 || !m.is_multiple_of(2) {
        return Err(LabError::Invalid(format!(
            "spiral needs an even m >= 4, got {}",
            m
        )));
    }
    if !(noise_sd >= 0.0) || !noise_sd.is_finite() {
        return Err(LabError::Invalid(format!(
            "noise sd must be >= 0, got {}",
            noise_sd
        )));
    }
    let n = m / 2;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, noise_sd).expect("valid sd");
    let mut x = Array2::<F>::zeros((m, 2));
    let mut labels = Vec::with_capacity(m);
    for k in 0..n {
        let (cx, cy) = spiral_point(k, n);
        for (row, sign) in [(k, 1.0), (n + k, -1.0)] {
            let dx = if noise_sd > 0.0 {
                noise.sample(&mut rng)
            } else {
                0.0
            };
            let dy = if noise_sd > 0.0 {
                noise.sample(&mut rng)
            } else {
                0.0
            };
            x[[row, 0]] = F::cst(sign * cx + dx);
            x[[row, 1]] = F::cst(sign * cy + dy);
        }
    }
    labels.extend(std::iter::repeat_n(1i8, n));
    labels.extend(std::iter::repeat_n(-1i8, n));
    Ok(Dataset::new(x, labels)?)
}

/// Noise-free point `k` of the positive spiral with `n` points.
pub fn spiral_point(k: usize, n: usize) -> (f64, f64) {
    let s = (k + 1) as f64 / n as f64;
    let theta = 3.0 * std::f64::consts::PI * s;
    (s * theta.cos(), s * theta.sin())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContaminationMode {
    /// Replace positive samples by points drawn uniformly from a box around the centroid.
    ReplacePositiveWithOutliers,
    /// Flip labels of positive samples.
    FlipPositiveLabels,
    /// Flip labels of negative samples (the unboundedness construction).
    AdversarialFlipNegatives,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContaminationSpec {
    pub mode: ContaminationMode,
    pub count: usize,
    /// Half-width of the outlier box in replacement mode.
    pub outlier_scale: f64,
    pub seed: u64,
}

/// Number of samples of `b` that also occur in `a` with the same id, features and label.
pub fn shared_count<F: Float>(a: &Dataset<F>, b: &Dataset<F>) -> usize {
    let pos: std::collections::HashMap<usize, usize> =
        a.ids.iter().enumerate().map(|(i, &id)| (id, i)).collect();
    b.ids
        .iter()
        .enumerate()
        .filter(|(j, id)| {
            pos.get(id).is_some_and(|&i| {
                a.labels[i] == b.labels[*j] && a.features.row(i) == b.features.row(*j)
            })
        })
        .count()
}

/// Applies `spec`; modified rows receive fresh ids, untouched rows keep theirs.
pub fn contaminate<F: Float>(
    ds: &Dataset<F>,
    spec: &ContaminationSpec,
) -> Result<Dataset<F>, LabError> {
    let target: i8 = match spec.mode {
        ContaminationMode::AdversarialFlipNegatives => -1,
        _ => 1,
    };
    let eligible: Vec<usize> = (0..ds.len()).filter(|&i| ds.labels[i] == target).collect();
    if spec.count > eligible.len() {
        return Err(LabError::CountTooLarge {
            requested: spec.count,
            available: eligible.len(),
        });
    }
    if spec.mode == ContaminationMode::ReplacePositiveWithOutliers && !(spec.outlier_scale > 0.0) {
        return Err(LabError::Invalid("outlier scale must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut chosen: Vec<usize> = sample(&mut rng, eligible.len(), spec.count)
        .into_iter()
        .map(|k| eligible[k])
        .collect();
    chosen.sort_unstable();

    let mut features = ds.features.clone();
    let mut labels = ds.labels.clone();
    let mut ids = ds.ids.clone();
    let centroid = ds
        .features
        .mean_axis(Axis(0))
        .unwrap_or_else(|| Array1::zeros(ds.dim()));
    let next_id = ds.ids.iter().max().map_or(0, |&v| v + 1);
    for (k, &i) in chosen.iter().enumerate() {
        match spec.mode {
            ContaminationMode::ReplacePositiveWithOutliers => {
                for c in 0..ds.dim() {
                    let u: f64 = rng.random_range(-1.0..=1.0);
                    features[[i, c]] = centroid[c] + F::cst(u * spec.outlier_scale);
                }
            }
            ContaminationMode::FlipPositiveLabels | ContaminationMode::AdversarialFlipNegatives => {
                labels[i] = -labels[i];
            }
        }
        ids[i] = next_id + k;
    }
    let out = Dataset {
        features,
        labels,
        ids,
        feature_names: ds.feature_names.clone(),
        label_mapping: ds.label_mapping.clone(),
    };
    let shared = shared_count(ds, &out);
    let expected = ds.len() - spec.count;
    if shared < expected {
        return Err(LabError::Membership { shared, expected });
    }
    Ok(out)
}

/// Outlier indicator of the unboundedness construction: zeros on the first
/// `mu_count` negatives of `contaminated` that are untouched originals.
pub fn adversarial_eta<F: Float>(
    original: &Dataset<F>,
    contaminated: &Dataset<F>,
    mu_count: usize,
) -> Result<Vec<bool>, LabError> {
    let orig_ids: std::collections::HashSet<usize> = original.ids.iter().copied().collect();
    let remaining: Vec<usize> = (0..contaminated.len())
        .filter(|&i| contaminated.labels[i] == -1 && orig_ids.contains(&contaminated.ids[i]))
        .collect();
    if remaining.len() < mu_count {
        return Err(LabError::CountTooLarge {
            requested: mu_count,
            available: remaining.len(),
        });
    }
    let mut eta = vec![true; contaminated.len()];
    for &i in &remaining[..mu_count] {
        eta[i] = false;
    }
    Ok(eta)
}

/// Outcome of one contaminated training run.
#[derive(Debug, Clone, PartialEq)]
pub enum RunOutcome {
    Completed {
        norm_f: f64,
        abs_b: f64,
        test_error: f64,
        objective: f64,
        outer_iterations: usize,
        support: usize,
        /// `|support| ≥ (ν−μ)m` and every support index has `η_i = 1`.
        support_ok: bool,
    },
    /// A QP subproblem was infeasible: the robust problem is unbounded.
    Unbounded,
    Failed(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub nu: f64,
    pub mu: f64,
    pub max_norm_f: Option<f64>,
    pub max_abs_b: Option<f64>,
    pub max_test_error: Option<f64>,
    pub unbounded_count: usize,
    pub failed_count: usize,
    pub runs: Vec<RunOutcome>,
    pub seeds: Vec<u64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub trials: usize,
    pub records: Vec<SweepRecord>,
}

/// Sweep settings shared by every grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig<F> {
    pub kernel: KernelSpec<F>,
    pub trials: usize,
    /// Mode, scale and base seed; the count is `μm` of each grid point.
    pub template: ContaminationSpec,
    pub max_outer_iter: usize,
    pub restarts: usize,
}

/// Seed of trial `t` at grid point `p`.
pub fn trial_seed(base: u64, point: usize, trial: usize) -> u64 {
    base.wrapping_add((point as u64).wrapping_mul(1_000_003))
        .wrapping_add(trial as u64)
}

fn test_error<F: Float>(
    model: &Model<F>,
    train_x: &Array2<F>,
    test: &Dataset<F>,
) -> Result<f64, TrainError<F>> {
    if test.is_empty() {
        return Ok(0.0);
    }
    let rows = eval_cross(&model.config.kernel, train_x.view(), test.features.view())?;
    let scores = model.decision_from_kernel_rows(rows.view())?;
    let labels = sign_labels(scores.view());
    let wrong = labels
        .iter()
        .zip(&test.labels)
        .filter(|(a, b)| a != b)
        .count();
    Ok(wrong as f64 / test.len() as f64)
}

fn run_one<F: Float>(
    clean: &Dataset<F>,
    nu: f64,
    mu: f64,
    mu_count: usize,
    seed: u64,
    cfg: &SweepConfig<F>,
    test_set: &Dataset<F>,
) -> RunOutcome {
    let spec = ContaminationSpec {
        count: mu_count,
        seed,
        ..cfg.template
    };
    let data = match contaminate(clean, &spec) {
        Ok(d) => d,
        Err(e) => return RunOutcome::Failed(e.to_string()),
    };
    let k = match gram(&cfg.kernel, data.features.view()) {
        Ok(k) => k,
        Err(e) => return RunOutcome::Failed(e.to_string()),
    };
    let mut tc = TrainConfig::new(nu, mu, cfg.kernel);
    tc.max_outer_iter = cfg.max_outer_iter;
    tc.restarts = cfg.restarts;
    tc.seed = seed;
    let model = match train_gram(&k, &data.labels, None, &tc) {
        Ok(m) => m,
        Err(TrainError::NotConverged(m)) => *m,
        Err(TrainError::SubproblemInfeasible { .. }) => return RunOutcome::Unbounded,
        Err(e) => return RunOutcome::Failed(e.to_string()),
    };
    let norm_sq = match model.norm_sq(&k) {
        Ok(v) => v.as_f64(),
        Err(e) => return RunOutcome::Failed(e.to_string()),
    };
    let err = match test_error(&model, &data.features, test_set) {
        Ok(e) => e,
        Err(e) => return RunOutcome::Failed(e.to_string()),
    };
    let lv = model.levels;
    let support_ok = model.support_idx.len() >= lv.nu_count - lv.mu_count
        && model.support_idx.iter().all(|&i| model.eta[i]);
    RunOutcome::Completed {
        norm_f: norm_sq.max(0.0).sqrt(),
        abs_b: model.b.as_f64().abs(),
        test_error: err,
        objective: model.objective.as_f64(),
        outer_iterations: model.iterations,
        support: model.support_idx.len(),
        support_ok,
    }
}

/// For every `(ν, μ)` and trial: contaminate `μm` samples, train, and record
/// `‖f‖_H`, `|b|` and the clean test error. Failures are recorded, never fatal.
pub fn breakdown_sweep<F: Float>(
    clean: &Dataset<F>,
    grid: &[(f64, f64)],
    cfg: &SweepConfig<F>,
    test_set: &Dataset<F>,
) -> Result<SweepResult, LabError> {
    if grid.is_empty() || cfg.trials == 0 {
        return Err(LabError::Invalid(
            "grid must be nonempty and trials >= 1".into(),
        ));
    }
    let m = clean.len();
    let tasks: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|p| (0..cfg.trials).map(move |t| (p, t)))
        .collect();
    let outcomes: Vec<RunOutcome> = tasks
        .par_iter()
        .map(|&(p, t)| {
            let (nu, mu) = grid[p];
            let mu_count = (mu * m as f64 + 1e-9).floor() as usize;
            run_one(
                clean,
                nu,
                mu,
                mu_count,
                trial_seed(cfg.template.seed, p, t),
                cfg,
                test_set,
            )
        })
        .collect();
    let mut records = Vec::with_capacity(grid.len());
    for (p, chunk) in outcomes.chunks(cfg.trials).enumerate() {
        let (nu, mu) = grid[p];
        let mut rec = SweepRecord {
            nu,
            mu,
            max_norm_f: None,
            max_abs_b: None,
            max_test_error: None,
            unbounded_count: 0,
            failed_count: 0,
            runs: chunk.to_vec(),
            seeds: (0..cfg.trials)
                .map(|t| trial_seed(cfg.template.seed, p, t))
                .collect(),
        };
        let upd = |slot: &mut Option<f64>, v: f64| *slot = Some(slot.map_or(v, |s: f64| s.max(v)));
        for run in chunk {
            match run {
                RunOutcome::Completed {
                    norm_f,
                    abs_b,
                    test_error,
                    ..
                } => {
                    upd(&mut rec.max_norm_f, *norm_f);
                    upd(&mut rec.max_abs_b, *abs_b);
                    upd(&mut rec.max_test_error, *test_error);
                }
                RunOutcome::Unbounded => rec.unbounded_count += 1,
                RunOutcome::Failed(msg) => {
                    log::warn!("run at nu = {}, mu = {} failed: {}", nu, mu, msg);
                    rec.failed_count += 1;
                }
            }
        }
        records.push(rec);
    }
    Ok(SweepResult {
        trials: cfg.trials,
        records,
    })
}
