use super::linalg::{cholesky, cholesky_inverse, cholesky_solve};
use super::{DesignMatrix, GlmError};

/// Maximum number of times a step is halved when it increases the deviance.
const MAX_HALVINGS: u32 = 10;

/// Relative deviance rise treated as rounding noise. Near the optimum the
/// deviance is flat and a full Newton step can land a few ulps higher.
const DEVIANCE_NOISE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    /// Relative deviance change below which the fit has converged.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            tol: 1e-8,
            max_iter: 25,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GlmFit {
    pub column_names: Vec<String>,
    /// Log-scale coefficients, one per design column.
    pub coefficients: Vec<f64>,
    /// Inverse Fisher information at the final estimate.
    pub covariance: Vec<Vec<f64>>,
    pub standard_errors: Vec<f64>,
    pub fitted_values: Vec<f64>,
    pub deviance: f64,
    /// Deviance at the starting point followed by one entry per iteration.
    pub deviance_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

fn check_dims(x: &DesignMatrix, beta_len: Option<usize>, y_len: usize) -> Result<(), GlmError> {
    if let Some(b) = beta_len {
        if b != x.n_cols() {
            return Err(GlmError::Dimension(format!(
                "{b} coefficients for {} columns",
                x.n_cols()
            )));
        }
    }
    if y_len != x.n_rows() {
        return Err(GlmError::Dimension(format!(
            "{y_len} responses for {} rows",
            x.n_rows()
        )));
    }
    Ok(())
}

/// `η = Xβ`.
pub fn linear_predictor(beta: &[f64], x: &DesignMatrix) -> Vec<f64> {
    x.rows()
        .map(|row| row.iter().zip(beta).map(|(a, b)| a * b).sum())
        .collect()
}

/// Poisson log-likelihood `Σ yᵢηᵢ − exp(ηᵢ) − ln(yᵢ!)`.
pub fn log_likelihood(beta: &[f64], x: &DesignMatrix, y: &[u64]) -> Result<f64, GlmError> {
    check_dims(x, Some(beta.len()), y.len())?;
    let mut total = 0.0;
    for (i, (eta, &yi)) in linear_predictor(beta, x).into_iter().zip(y).enumerate() {
        let mu = eta.exp();
        if !eta.is_finite() || !mu.is_finite() {
            return Err(GlmError::Overflow(i));
        }
        let yi = yi as f64;
        total += yi * eta - mu - libm::lgamma(yi + 1.0);
    }
    Ok(total)
}

/// Gradient of the log-likelihood, `Xᵀ(y − μ)`.
pub fn score(beta: &[f64], x: &DesignMatrix, y: &[u64]) -> Result<Vec<f64>, GlmError> {
    check_dims(x, Some(beta.len()), y.len())?;
    let mut g = vec![0.0; x.n_cols()];
    for (i, (row, eta)) in x.rows().zip(linear_predictor(beta, x)).enumerate() {
        let mu = eta.exp();
        if !mu.is_finite() {
            return Err(GlmError::Overflow(i));
        }
        let r = y[i] as f64 - mu;
        for (gj, xj) in g.iter_mut().zip(row) {
            *gj += xj * r;
        }
    }
    Ok(g)
}

/// `XᵀWX` with `W = diag(weights)`.
fn weighted_gram(x: &DesignMatrix, weights: &[f64]) -> Vec<Vec<f64>> {
    let p = x.n_cols();
    let mut a = vec![vec![0.0; p]; p];
    for (row, &w) in x.rows().zip(weights) {
        for j in 0..p {
            let wx = w * row[j];
            for k in 0..=j {
                a[j][k] += wx * row[k];
            }
        }
    }
    for j in 0..p {
        for k in 0..j {
            a[k][j] = a[j][k];
        }
    }
    a
}

/// Fisher information `XᵀWX` with `W = diag(exp(Xβ))`.
pub fn fisher_information(beta: &[f64], x: &DesignMatrix) -> Vec<Vec<f64>> {
    let mu: Vec<f64> = linear_predictor(beta, x).into_iter().map(f64::exp).collect();
    weighted_gram(x, &mu)
}

/// Poisson deviance `2 Σ [yᵢ ln(yᵢ/μᵢ) − (yᵢ − μᵢ)]`, with the log term
/// taken as zero when `yᵢ = 0`.
pub fn deviance(y: &[u64], mu: &[f64]) -> f64 {
    2.0 * y
        .iter()
        .zip(mu)
        .map(|(&yi, &m)| {
            let yi = yi as f64;
            let log_term = if yi > 0.0 { yi * (yi / m).ln() } else { 0.0 };
            log_term - (yi - m)
        })
        .sum::<f64>()
}

fn means(beta: &[f64], x: &DesignMatrix) -> Vec<f64> {
    linear_predictor(beta, x).into_iter().map(f64::exp).collect()
}

fn singular(x: &DesignMatrix, index: usize) -> GlmError {
    GlmError::SingularDesign {
        column: x.column_names()[index].clone(),
        index,
    }
}

/// Fits a Poisson log-link GLM by IRLS.
///
/// Starts from `β = (ln(ȳ + 0.1), 0, …)`. Each iteration solves
/// `(XᵀWX)β = XᵀWz` with `W = diag(μ)` and `z = η + (y − μ)/μ` by Cholesky;
/// a step that raises the deviance is halved up to ten times. Iteration
/// stops when `|ΔD| / (|D| + 0.1) < tol`. A fit that runs out of iterations
/// is returned with `converged = false`.
pub fn fit_poisson(x: &DesignMatrix, y: &[u64], options: &FitOptions) -> Result<GlmFit, GlmError> {
    check_dims(x, None, y.len())?;
    let (n, p) = (x.n_rows(), x.n_cols());
    if n <= p {
        return Err(GlmError::TooFewRows { rows: n, cols: p });
    }

    let mean_y = y.iter().map(|&v| v as f64).sum::<f64>() / n as f64;
    let mut beta = vec![0.0; p];
    beta[0] = (mean_y + 0.1).ln();
    let mut mu = means(&beta, x);
    let mut dev = deviance(y, &mu);
    let mut trace = vec![dev];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < options.max_iter {
        iterations += 1;
        let eta = linear_predictor(&beta, x);
        let z: Vec<f64> = eta
            .iter()
            .zip(&mu)
            .zip(y)
            .map(|((e, m), &yi)| e + (yi as f64 - m) / m)
            .collect();
        let gram = weighted_gram(x, &mu);
        let l = cholesky(&gram).map_err(|j| singular(x, j))?;
        let mut rhs = vec![0.0; p];
        for ((row, &w), zi) in x.rows().zip(&mu).zip(&z) {
            for (r, xj) in rhs.iter_mut().zip(row) {
                *r += xj * w * zi;
            }
        }
        let target = cholesky_solve(&l, &rhs);

        let mut step = 1.0;
        let mut candidate = target.clone();
        let mut cand_mu = means(&candidate, x);
        let mut cand_dev = deviance(y, &cand_mu);
        let mut halvings = 0;
        let ceiling = dev + DEVIANCE_NOISE * (dev.abs() + 0.1);
        let acceptable = |d: f64| d.is_finite() && d <= ceiling;
        while !acceptable(cand_dev) && halvings < MAX_HALVINGS {
            step *= 0.5;
            halvings += 1;
            candidate = beta
                .iter()
                .zip(&target)
                .map(|(b, t)| b + step * (t - b))
                .collect();
            cand_mu = means(&candidate, x);
            cand_dev = deviance(y, &cand_mu);
        }

        if !acceptable(cand_dev) {
            // no descent direction left; stay put and report whether that
            // is numerically indistinguishable from convergence
            trace.push(dev);
            let rel = (cand_dev - dev).abs() / (dev.abs() + 0.1);
            converged = cand_dev.is_finite() && rel < options.tol;
            break;
        }

        let change = (cand_dev - dev).abs() / (cand_dev.abs() + 0.1);
        beta = candidate;
        mu = cand_mu;
        dev = cand_dev;
        trace.push(dev);
        if change < options.tol {
            converged = true;
            break;
        }
    }

    let info = weighted_gram(x, &mu);
    let l = cholesky(&info).map_err(|j| singular(x, j))?;
    let covariance = cholesky_inverse(&l);
    let standard_errors = (0..p).map(|j| covariance[j][j].max(0.0).sqrt()).collect();

    Ok(GlmFit {
        column_names: x.column_names().to_vec(),
        coefficients: beta,
        covariance,
        standard_errors,
        fitted_values: mu,
        deviance: dev,
        deviance_trace: trace,
        iterations,
        converged,
    })
}
