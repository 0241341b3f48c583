//! Test-only oracles. None of these call into the code paths they check.
#![allow(dead_code)]

use std::path::PathBuf;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

/// `ln(y!)` by direct summation.
pub fn ln_factorial(y: u64) -> f64 {
    (2..=y).map(|k| (k as f64).ln()).sum()
}

/// Poisson log-likelihood evaluated row by row.
pub fn naive_log_likelihood(beta: &[f64], rows: &[Vec<f64>], y: &[u64]) -> f64 {
    let mut total = 0.0;
    for (row, &yi) in rows.iter().zip(y) {
        let mut eta = 0.0;
        for j in 0..row.len() {
            eta += row[j] * beta[j];
        }
        total += yi as f64 * eta - eta.exp() - ln_factorial(yi);
    }
    total
}

/// Gaussian elimination with partial pivoting.
pub fn gauss_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            for c in col..n {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (b[i] - s) / a[i][i];
    }
    x
}

/// Newton–Raphson on the analytic Poisson score and Hessian, with
/// backtracking on the log-likelihood.
pub fn newton_poisson(rows: &[Vec<f64>], y: &[u64]) -> Vec<f64> {
    let p = rows[0].len();
    let mut beta = vec![0.0; p];
    let mean = y.iter().sum::<u64>() as f64 / y.len() as f64;
    beta[0] = mean.max(0.5).ln();
    let mut ll = naive_log_likelihood(&beta, rows, y);
    for _ in 0..200 {
        let mut grad = vec![0.0; p];
        let mut hess = vec![vec![0.0; p]; p];
        for (row, &yi) in rows.iter().zip(y) {
            let eta: f64 = row.iter().zip(&beta).map(|(a, b)| a * b).sum();
            let mu = eta.exp();
            for j in 0..p {
                grad[j] += row[j] * (yi as f64 - mu);
                for k in 0..p {
                    hess[j][k] += mu * row[j] * row[k];
                }
            }
        }
        let step = gauss_solve(hess, grad);
        let mut t = 1.0;
        let mut next: Vec<f64>;
        loop {
            next = beta.iter().zip(&step).map(|(b, s)| b + t * s).collect();
            let cand = naive_log_likelihood(&next, rows, y);
            if cand >= ll - 1e-12 * ll.abs() || t < 1e-8 {
                ll = cand;
                break;
            }
            t *= 0.5;
        }
        let moved = step.iter().map(|s| (t * s).abs()).fold(0.0, f64::max);
        beta = next;
        if moved < 1e-13 {
            break;
        }
    }
    beta
}

/// Winding number of `ring` around the point; nonzero means inside.
pub fn winding_number(lat: f64, lon: f64, ring: &[(f64, f64)]) -> i32 {
    let is_left = |a: (f64, f64), b: (f64, f64)| (b.0 - a.0) * (lat - a.1) - (lon - a.0) * (b.1 - a.1);
    let mut wn = 0;
    for w in ring.windows(2) {
        let (a, b) = (w[0], w[1]);
        if a.1 <= lat {
            if b.1 > lat && is_left(a, b) > 0.0 {
                wn += 1;
            }
        } else if b.1 <= lat && is_left(a, b) < 0.0 {
            wn -= 1;
        }
    }
    wn
}

/// Containment by winding numbers: inside the outer ring, outside all holes.
pub fn winding_contains(lat: f64, lon: f64, rings: &[Vec<(f64, f64)>]) -> bool {
    winding_number(lat, lon, &rings[0]) != 0
        && rings[1..].iter().all(|h| winding_number(lat, lon, h) == 0)
}

/// Sample quantile: 1-based position `1 + (n - 1) p` between order statistics.
pub fn hand_quantile(values: &[f64], p: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let pos = 1.0 + (v.len() as f64 - 1.0) * p;
    let below = pos.floor();
    let frac = pos - below;
    let i = below as usize - 1;
    if i + 1 >= v.len() {
        v[v.len() - 1]
    } else {
        v[i] * (1.0 - frac) + v[i + 1] * frac
    }
}

/// Central finite-difference gradient.
pub fn finite_difference_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> Vec<f64> {
    (0..x.len())
        .map(|j| {
            let mut up = x.to_vec();
            let mut down = x.to_vec();
            up[j] += h;
            down[j] -= h;
            (f(&up) - f(&down)) / (2.0 * h)
        })
        .collect()
}

/// Knuth's multiplication sampler; fine for the small means used here.
pub fn poisson_draw(rng: &mut impl Rng, mean: f64) -> u64 {
    let limit = (-mean).exp();
    let mut k = 0;
    let mut prod: f64 = rng.random();
    while prod > limit {
        k += 1;
        prod *= rng.random::<f64>();
    }
    k
}

/// A random Poisson regression problem: intercept plus up to three
/// covariates uniform on `[-1, 1]`, `n <= 200`.
pub struct Instance {
    pub rows: Vec<Vec<f64>>,
    pub y: Vec<u64>,
    pub beta: Vec<f64>,
}

pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = rng.random_range(1..=4);
    let n = rng.random_range(40..=200);
    let mut beta: Vec<f64> = (0..p).map(|_| rng.random_range(-0.8..0.8)).collect();
    beta[0] = rng.random_range(0.0..1.5);
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let mut r = vec![1.0];
            r.extend((1..p).map(|_| rng.random_range(-1.0..1.0)));
            r
        })
        .collect();
    let y = rows
        .iter()
        .map(|r| {
            let eta: f64 = r.iter().zip(&beta).map(|(a, b)| a * b).sum();
            poisson_draw(&mut rng, eta.exp())
        })
        .collect();
    Instance { rows, y, beta }
}

pub fn column_names(p: usize) -> Vec<String> {
    (0..p).map(|j| if j == 0 { "Intercept".into() } else { format!("x{j}") }).collect()
}
