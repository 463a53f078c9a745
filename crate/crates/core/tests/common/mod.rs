//! Independent oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use robust_svm::data::Dataset;
use robust_svm::qp::QpProblem;

/// Exhaustive active-set solve: every coordinate is put at its lower bound,
/// its upper bound, or left free; the free block is solved from the KKT
/// system by pseudo-inverse. Returns the best feasible stationary point, or
/// `None` when no face is feasible.
pub fn enum_qp(p: &QpProblem<f64>) -> Option<(Vec<f64>, f64)> {
    let m = p.y.len();
    assert!(m <= 10, "enumeration oracle is exponential");
    let target = |class: i8| {
        if class == 1 {
            (p.s + p.d) / 2.0
        } else {
            (p.s - p.d) / 2.0
        }
    };
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut state = vec![0u8; m];
    let total = 3usize.pow(m as u32);
    for code in 0..total {
        let mut c = code;
        for s in state.iter_mut() {
            *s = (c % 3) as u8;
            c /= 3;
        }
        let mut beta = vec![0.0; m];
        let free: Vec<usize> = (0..m).filter(|&i| state[i] == 1).collect();
        for i in 0..m {
            if state[i] == 2 {
                beta[i] = p.upper[i];
            }
        }
        let classes: Vec<i8> = [1i8, -1]
            .into_iter()
            .filter(|&c| free.iter().any(|&i| p.y[i] == c))
            .collect();
        let mut ok = true;
        for class in [1i8, -1] {
            if !classes.contains(&class) {
                let fixed: f64 = (0..m).filter(|&i| p.y[i] == class).map(|i| beta[i]).sum();
                if (fixed - target(class)).abs() > 1e-12 {
                    ok = false;
                }
            }
        }
        if !ok {
            continue;
        }
        if !free.is_empty() {
            let n = free.len();
            let size = n + classes.len();
            let mut a = DMatrix::<f64>::zeros(size, size);
            let mut rhs = DVector::<f64>::zeros(size);
            for (r, &i) in free.iter().enumerate() {
                for (s, &j) in free.iter().enumerate() {
                    a[(r, s)] = p.q[[i, j]];
                }
                let mut lin = p.c[i];
                for j in 0..m {
                    if state[j] == 2 {
                        lin += p.q[[i, j]] * beta[j];
                    }
                }
                rhs[r] = -lin;
                for (t, &class) in classes.iter().enumerate() {
                    if p.y[i] == class {
                        a[(r, n + t)] = 1.0;
                        a[(n + t, r)] = 1.0;
                    }
                }
            }
            for (t, &class) in classes.iter().enumerate() {
                let fixed: f64 = (0..m)
                    .filter(|&i| p.y[i] == class && state[i] == 2)
                    .map(|i| beta[i])
                    .sum();
                rhs[n + t] = target(class) - fixed;
            }
            let pinv = match a.clone().pseudo_inverse(1e-12) {
                Ok(v) => v,
                Err(_) => continue,
            };
            let sol = &pinv * &rhs;
            if (&a * &sol - &rhs).amax() > 1e-9 {
                continue;
            }
            for (r, &i) in free.iter().enumerate() {
                beta[i] = sol[r];
            }
            if free
                .iter()
                .any(|&i| beta[i] < -1e-12 || beta[i] > p.upper[i] + 1e-12)
            {
                continue;
            }
            for &i in &free {
                beta[i] = beta[i].clamp(0.0, p.upper[i]);
            }
        }
        let obj = p.objective(Array1::from(beta.clone()).view());
        if best.as_ref().is_none_or(|(_, b)| obj < *b) {
            best = Some((beta, obj));
        }
    }
    best
}

/// `yyᵀ ∘ K` restricted to `idx`.
pub fn signed_gram(k: &Array2<f64>, y: &[i8], idx: &[usize]) -> Array2<f64> {
    Array2::from_shape_fn((idx.len(), idx.len()), |(a, b)| {
        let (i, j) = (idx[a], idx[b]);
        k[[i, j]] * (y[i] * y[j]) as f64
    })
}

/// Fixed-η dual: class masses `gap/2`, box `1/m`, over the kept samples.
pub fn fixed_eta_dual(
    k: &Array2<f64>,
    y: &[i8],
    eta: &[bool],
    gap: f64,
) -> (Vec<usize>, QpProblem<f64>) {
    let m = y.len();
    let idx: Vec<usize> = (0..m).filter(|&i| eta[i]).collect();
    let n = idx.len();
    let p = QpProblem {
        q: signed_gram(k, y, &idx),
        c: Array1::zeros(n),
        upper: Array1::from_elem(n, 1.0 / m as f64),
        y: idx.iter().map(|&i| y[i]).collect(),
        d: 0.0,
        s: gap,
    };
    (idx, p)
}

/// Squared distance between the reduced hulls with caps `2/(gap m)`.
pub fn hull_distance_sq(k: &Array2<f64>, y: &[i8], eta: &[bool], gap: f64) -> Option<f64> {
    let m = y.len();
    let idx: Vec<usize> = (0..m).filter(|&i| eta[i]).collect();
    let n = idx.len();
    let p = QpProblem {
        q: signed_gram(k, y, &idx),
        c: Array1::zeros(n),
        upper: Array1::from_elem(n, 2.0 / (gap * m as f64)),
        y: idx.iter().map(|&i| y[i]).collect(),
        d: 0.0,
        s: 2.0,
    };
    enum_qp(&p).map(|(_, obj)| 2.0 * obj)
}

/// `f(x_i) = Σ_j a_j K_ij` for signed coefficients `a`.
pub fn f_values(k: &Array2<f64>, coef: &[f64], idx: &[usize]) -> Vec<f64> {
    let m = k.nrows();
    (0..m)
        .map(|i| idx.iter().zip(coef).map(|(&j, &a)| a * k[[i, j]]).sum())
        .collect()
}

/// Minimizes `−gap ρ + (1/m) Σ η_i [ρ − y_i (f_i + b)]_+` over `(ρ, b)` by
/// scanning the kinks of its two separable one-dimensional pieces.
/// Returns `(value, ρ, b)`, or `None` when the function is unbounded below.
pub fn best_rho_b(f: &[f64], y: &[i8], eta: &[bool], gap: f64) -> Option<(f64, f64, f64)> {
    let m = f.len() as f64;
    let pos: Vec<f64> = (0..f.len())
        .filter(|&i| eta[i] && y[i] == 1)
        .map(|i| f[i])
        .collect();
    let neg: Vec<f64> = (0..f.len())
        .filter(|&i| eta[i] && y[i] == -1)
        .map(|i| -f[i])
        .collect();
    let piece = |kinks: &[f64]| -> Option<(f64, f64)> {
        if (kinks.len() as f64) < gap * m / 2.0 - 1e-12 {
            return None;
        }
        kinks
            .iter()
            .map(|&t| {
                let v = -gap * t / 2.0 + kinks.iter().map(|&k| (t - k).max(0.0)).sum::<f64>() / m;
                (v, t)
            })
            .min_by(|a, b| a.0.total_cmp(&b.0))
    };
    let (hu, u) = piece(&pos)?;
    let (hv, v) = piece(&neg)?;
    Some((hu + hv, (u + v) / 2.0, (v - u) / 2.0))
}

/// All index sets of size `k` from `0..n`, in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, n, k, &mut Vec::new(), &mut out);
    out
}

/// Gaussian blobs in the plane with class means `±shift`; labels are shuffled
/// with exactly `n_pos` positives.
pub fn blobs(rng: &mut ChaCha8Rng, m: usize, n_pos: usize, shift: f64) -> Dataset<f64> {
    let mut labels: Vec<i8> = (0..m).map(|i| if i < n_pos { 1 } else { -1 }).collect();
    for i in (1..m).rev() {
        let j = rng.random_range(0..=i);
        labels.swap(i, j);
    }
    let x = Array2::from_shape_fn((m, 2), |(i, _)| {
        let z: f64 = StandardNormal.sample(rng);
        z + shift * labels[i] as f64
    });
    Dataset::new(x, labels).unwrap()
}

/// Breakdown predicates on the lattice `ν = i/n, μ = j/n, r = rr/n`, all in integers.
pub mod lattice {
    pub fn mu_ok(j: i64, rr: i64) -> bool {
        2 * j < rr
    }

    pub fn key(i: i64, j: i64, rr: i64) -> bool {
        i - j <= 2 * (rr - 2 * j)
    }

    pub fn key_strict(i: i64, j: i64, rr: i64) -> bool {
        i - j < 2 * (rr - 2 * j)
    }

    /// Smallest `ℓ` with `0 ≤ 2(μ − ℓ/m) < ν − μ < 2(r − 2μ)`; `m` samples, grid denominator `n`.
    pub fn bias_ell(i: i64, j: i64, rr: i64, n: i64, m: i64) -> Option<usize> {
        let valid: Vec<usize> = (0..=m)
            .filter(|&l| {
                let left = 2 * (j * m - l * n);
                0 <= left && left < (i - j) * m && key_strict(i, j, rr)
            })
            .map(|l| l as usize)
            .collect();
        valid.into_iter().min()
    }

    /// `0` full breakdown μ, `1` function only, `2` below μ.
    pub fn class(i: i64, j: i64, rr: i64, bounded: bool) -> Option<u8> {
        if !mu_ok(j, rr) {
            return None;
        }
        let gap = i - j;
        let bound = 2 * (rr - 2 * j);
        if bounded {
            return Some(if gap <= bound { 0 } else { 2 });
        }
        if 2 * j < gap && gap <= bound {
            Some(0)
        } else if 0 < gap && gap < (2 * j).min(bound) {
            Some(1)
        } else {
            Some(2)
        }
    }

    /// Membership in `{0 ≤ μ ≤ μ̄, 0 < ν − μ < 2(r − 2μ)}` with `r = rn/rd`, `μ̄ = bn/bd`.
    pub fn in_region(i: i64, j: i64, n: i64, rn: i64, rd: i64, mu_bar: Option<(i64, i64)>) -> bool {
        if j < 0 {
            return false;
        }
        if let Some((bn, bd)) = mu_bar {
            if j * bd > bn * n {
                return false;
            }
        }
        let gap = i - j;
        gap > 0 && gap * rd < 2 * (rn * n - 2 * j * rd)
    }
}
