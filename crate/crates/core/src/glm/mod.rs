//! Poisson regression with a log link, fitted by iteratively reweighted
//! least squares, with Wald inference and report rendering.
//!
//! ```
//! use bikeshare_equity::glm::{fit_poisson, DesignMatrix, FitOptions};
//!
//! // intercept-only: the fitted mean is the sample mean
//! let x = DesignMatrix::from_rows(&[vec![1.0], vec![1.0], vec![1.0]], &["Intercept"]).unwrap();
//! let fit = fit_poisson(&x, &[1, 2, 3], &FitOptions::default()).unwrap();
//! assert!((fit.coefficients[0] - 2f64.ln()).abs() < 1e-10);
//! ```

mod inference;
mod irls;
mod linalg;

use thiserror::Error;

pub use inference::{
    exp_coefficients, format_estimate, format_p_value, normal_cdf, render_report,
    significance_stars, two_sided_p_value, wald_tests, CoefficientReport, ReportRow, WaldTest,
};
pub use irls::{
    deviance, fisher_information, fit_poisson, linear_predictor, log_likelihood, score, FitOptions,
    GlmFit,
};
pub use linalg::{cholesky, cholesky_inverse, cholesky_solve};

#[derive(Debug, Error, PartialEq)]
pub enum GlmError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("design matrix has a non-finite entry at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("first design column must be an all-ones intercept")]
    MissingIntercept,
    #[error("need more rows than columns (got {rows} rows, {cols} columns)")]
    TooFewRows { rows: usize, cols: usize },
    #[error("singular design: column `{column}` (index {index}) is linearly dependent on earlier columns")]
    SingularDesign { column: String, index: usize },
    #[error("linear predictor overflowed at row {0}")]
    Overflow(usize),
    #[error("fit did not converge; inference is unavailable")]
    NotConverged,
    #[error("standard error of `{0}` is zero; Wald test is undefined")]
    DegenerateInference(String),
}

/// Dense row-major design matrix whose first column is the intercept.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    n_rows: usize,
    n_cols: usize,
    values: Vec<f64>,
    column_names: Vec<String>,
}

impl DesignMatrix {
    pub fn new(
        n_rows: usize,
        n_cols: usize,
        values: Vec<f64>,
        column_names: Vec<String>,
    ) -> Result<Self, GlmError> {
        if n_cols == 0 {
            return Err(GlmError::Dimension("design needs at least one column".into()));
        }
        if values.len() != n_rows * n_cols {
            return Err(GlmError::Dimension(format!(
                "{} values for a {n_rows}x{n_cols} matrix",
                values.len()
            )));
        }
        if column_names.len() != n_cols {
            return Err(GlmError::Dimension(format!(
                "{} column names for {n_cols} columns",
                column_names.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(GlmError::NonFinite {
                row: i / n_cols,
                col: i % n_cols,
            });
        }
        if values.chunks(n_cols).any(|row| row[0] != 1.0) {
            return Err(GlmError::MissingIntercept);
        }
        Ok(DesignMatrix {
            n_rows,
            n_cols,
            values,
            column_names,
        })
    }

    pub fn from_rows<S: AsRef<str>>(rows: &[Vec<f64>], names: &[S]) -> Result<Self, GlmError> {
        let n_cols = names.len();
        if let Some(bad) = rows.iter().position(|r| r.len() != n_cols) {
            return Err(GlmError::Dimension(format!("row {bad} does not have {n_cols} entries")));
        }
        DesignMatrix::new(
            rows.len(),
            n_cols,
            rows.concat(),
            names.iter().map(|s| s.as_ref().to_string()).collect(),
        )
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks(self.n_cols)
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_cols + col]
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    /// Copy with column `col` multiplied by `factor`.
    pub fn with_scaled_column(&self, col: usize, factor: f64) -> Result<Self, GlmError> {
        let mut values = self.values.clone();
        for row in values.chunks_mut(self.n_cols) {
            row[col] *= factor;
        }
        DesignMatrix::new(self.n_rows, self.n_cols, values, self.column_names.clone())
    }
}
