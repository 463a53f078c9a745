//! Stratified k-fold cross-validation and grid search over `(ν, μ)`.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::data::Dataset;
use crate::float::Float;
use crate::kernel::{gram, GramMatrix, KernelError};
use crate::trainer::{sign_labels, train_gram, Model, TrainConfig, TrainError};

#[derive(Debug, Error)]
pub enum SelectError {
    #[error("class {label} has {count} samples, fewer than k = {k}")]
    TooFewSamples { label: i8, count: usize, k: usize },
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("every grid point failed on every fold")]
    AllFailed,
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

/// Splits indices into `k` folds; each class is shuffled and dealt round-robin,
/// so per-class counts differ by at most one across folds.
pub fn stratified_kfold(
    labels: &[i8],
    k: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>, SelectError> {
    if k < 2 {
        return Err(SelectError::Invalid(format!("need k >= 2, got {}", k)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds = vec![Vec::new(); k];
    let mut next = 0;
    for label in [1i8, -1] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == label).collect();
        if idx.len() < k {
            return Err(SelectError::TooFewSamples {
                label,
                count: idx.len(),
                k,
            });
        }
        idx.shuffle(&mut rng);
        for i in idx {
            folds[next].push(i);
            next = (next + 1) % k;
        }
    }
    for f in &mut folds {
        f.sort_unstable();
    }
    Ok(folds)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvRow {
    pub nu: f64,
    pub mu: f64,
    pub mean_error: f64,
    /// Sample standard deviation across folds.
    pub sd_error: f64,
    pub fold_errors: Vec<f64>,
    pub failed_folds: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvTable {
    pub rows: Vec<CvRow>,
    pub chosen: (f64, f64),
    pub folds: Vec<Vec<usize>>,
}

/// Error charged to a fold whose training run fails.
pub const FAILED_FOLD_ERROR: f64 = 1.0;

fn complement(m: usize, fold: &[usize]) -> Vec<usize> {
    let mut mask = vec![true; m];
    for &i in fold {
        mask[i] = false;
    }
    (0..m).filter(|&i| mask[i]).collect()
}

/// Validation error of one train/validate split, or `None` when training failed.
pub fn fold_error<F: Float>(
    k: &GramMatrix<F>,
    labels: &[i8],
    train_idx: &[usize],
    val_idx: &[usize],
    cfg: &TrainConfig<F>,
) -> Option<f64> {
    let sub = k.submatrix(train_idx);
    let y: Vec<i8> = train_idx.iter().map(|&i| labels[i]).collect();
    let model: Model<F> = match train_gram(&sub, &y, None, cfg) {
        Ok(m) => m,
        Err(TrainError::NotConverged(m)) => *m,
        Err(e) => {
            log::debug!("fold training failed: {}", e);
            return None;
        }
    };
    let rows = Array2::from_shape_fn((val_idx.len(), train_idx.len()), |(a, b)| {
        k.entries[[val_idx[a], train_idx[b]]]
    });
    let scores = model.decision_from_kernel_rows(rows.view()).ok()?;
    let pred = sign_labels(scores.view());
    let wrong = val_idx
        .iter()
        .zip(&pred)
        .filter(|(&i, &p)| labels[i] != p)
        .count();
    Some(wrong as f64 / val_idx.len().max(1) as f64)
}

/// k-fold cross-validation of every grid point; the Gram matrix is built once.
///
/// The chosen point minimizes the mean error; ties go to the smaller `ν`, then
/// the smaller `μ`.
pub fn grid_search_cv<F: Float>(
    ds: &Dataset<F>,
    grid: &[(f64, f64)],
    k: usize,
    template: &TrainConfig<F>,
    seed: u64,
) -> Result<CvTable, SelectError> {
    if grid.is_empty() {
        return Err(SelectError::Invalid("empty grid".into()));
    }
    let folds = stratified_kfold(&ds.labels, k, seed)?;
    let kmat = gram(&template.kernel, ds.features.view())?;
    let m = ds.len();
    let splits: Vec<(Vec<usize>, &Vec<usize>)> =
        folds.iter().map(|f| (complement(m, f), f)).collect();
    let tasks: Vec<(usize, usize)> = (0..grid.len())
        .flat_map(|p| (0..k).map(move |f| (p, f)))
        .collect();
    let results: Vec<Option<f64>> = tasks
        .par_iter()
        .map(|&(p, f)| {
            let mut cfg = template.clone();
            cfg.nu = grid[p].0;
            cfg.mu = grid[p].1;
            let (train_idx, val_idx) = &splits[f];
            fold_error(&kmat, &ds.labels, train_idx, val_idx, &cfg)
        })
        .collect();
    if results.iter().all(Option::is_none) {
        return Err(SelectError::AllFailed);
    }
    let rows: Vec<CvRow> = results
        .chunks(k)
        .zip(grid)
        .map(|(chunk, &(nu, mu))| {
            let errors: Vec<f64> = chunk
                .iter()
                .map(|e| e.unwrap_or(FAILED_FOLD_ERROR))
                .collect();
            let mean = errors.iter().sum::<f64>() / k as f64;
            let var = errors.iter().map(|e| (e - mean) * (e - mean)).sum::<f64>() / (k - 1) as f64;
            CvRow {
                nu,
                mu,
                mean_error: mean,
                sd_error: var.sqrt(),
                fold_errors: errors,
                failed_folds: chunk.iter().filter(|e| e.is_none()).count(),
            }
        })
        .collect();
    let best = rows
        .iter()
        .min_by(|a, b| {
            a.mean_error
                .total_cmp(&b.mean_error)
                .then(a.nu.total_cmp(&b.nu))
                .then(a.mu.total_cmp(&b.mu))
        })
        .expect("nonempty grid");
    Ok(CvTable {
        chosen: (best.nu, best.mu),
        rows,
        folds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::KernelSpec;
    use ndarray::array;

    #[test]
    fn balanced_ten_into_five() {
        let labels = [1, -1, 1, -1, 1, -1, 1, -1, 1, -1];
        let folds = stratified_kfold(&labels, 5, 3).unwrap();
        for f in &folds {
            assert_eq!(f.len(), 2);
            assert_eq!(f.iter().filter(|&&i| labels[i] == 1).count(), 1);
        }
        let mut all: Vec<usize> = folds.concat();
        all.sort_unstable();
        assert_eq!(all, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn too_few_samples() {
        assert!(matches!(
            stratified_kfold(&[1, 1, 1, -1], 2, 0),
            Err(SelectError::TooFewSamples { label: -1, .. })
        ));
        assert!(stratified_kfold(&[1, -1], 1, 0).is_err());
    }

    #[test]
    fn deterministic_folds() {
        let labels: Vec<i8> = (0..30).map(|i| if i % 3 == 0 { -1 } else { 1 }).collect();
        assert_eq!(
            stratified_kfold(&labels, 4, 9).unwrap(),
            stratified_kfold(&labels, 4, 9).unwrap()
        );
    }

    fn separable() -> Dataset<f64> {
        let x = array![
            [0.0, 0.1],
            [0.2, 0.0],
            [0.1, 0.2],
            [-0.1, 0.0],
            [0.0, -0.2],
            [3.0, 3.1],
            [3.2, 3.0],
            [3.1, 2.9],
            [2.9, 3.0],
            [3.0, 2.8]
        ];
        Dataset::new(x, vec![1, 1, 1, 1, 1, -1, -1, -1, -1, -1]).unwrap()
    }

    fn imbalanced() -> Dataset<f64> {
        let x = array![
            [0.0, 0.1],
            [0.2, 0.0],
            [0.1, 0.2],
            [-0.1, 0.0],
            [0.0, -0.2],
            [0.3, 0.1],
            [-0.2, 0.2],
            [0.1, -0.1],
            [3.0, 3.1],
            [3.2, 3.0],
            [3.1, 2.9],
            [2.9, 3.0]
        ];
        Dataset::new(x, vec![1, 1, 1, 1, 1, 1, 1, 1, -1, -1, -1, -1]).unwrap()
    }

    #[test]
    fn single_point_is_chosen() {
        let cfg = TrainConfig::new(0.5, 0.0, KernelSpec::Gaussian { gamma: 0.5 });
        let t = grid_search_cv(&separable(), &[(0.5, 0.0)], 5, &cfg, 1).unwrap();
        assert_eq!(t.chosen, (0.5, 0.0));
        assert_eq!(t.rows[0].mean_error, 0.0);
    }

    #[test]
    fn perfect_point_wins_and_infeasible_points_are_penalized() {
        // training folds have r = 1/3, and ν = 0.9 exceeds 2r: every fold is infeasible
        let cfg = TrainConfig::new(0.5, 0.0, KernelSpec::Gaussian { gamma: 0.5 });
        let t = grid_search_cv(&imbalanced(), &[(0.9, 0.0), (0.5, 0.0)], 4, &cfg, 1).unwrap();
        assert_eq!(t.rows[0].failed_folds, 4);
        assert_eq!(t.rows[0].mean_error, 1.0);
        assert_eq!(t.chosen, (0.5, 0.0));
    }

    #[test]
    fn ties_prefer_smaller_nu() {
        let cfg = TrainConfig::new(0.5, 0.0, KernelSpec::Gaussian { gamma: 0.5 });
        let t = grid_search_cv(&separable(), &[(0.75, 0.0), (0.5, 0.0)], 5, &cfg, 1).unwrap();
        assert_eq!(t.rows[0].mean_error, t.rows[1].mean_error);
        assert_eq!(t.chosen, (0.5, 0.0));
    }

    #[test]
    fn all_failed() {
        let cfg = TrainConfig::new(0.5, 0.0, KernelSpec::Gaussian { gamma: 0.5 });
        assert!(matches!(
            grid_search_cv(&imbalanced(), &[(0.9, 0.0)], 4, &cfg, 1),
            Err(SelectError::AllFailed)
        ));
    }
}
