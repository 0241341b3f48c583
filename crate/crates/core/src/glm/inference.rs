use std::fmt::Write as _;
use std::io::Write;

use super::{GlmError, GlmFit};

/// Standard normal CDF, `Φ(x) = erfc(−x/√2) / 2`.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// `2 (1 − Φ(|z|))`, evaluated as `erfc(|z|/√2)` so small tails keep their
/// relative precision.
pub fn two_sided_p_value(z: f64) -> f64 {
    libm::erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaldTest {
    pub z: f64,
    pub p: f64,
}

/// Per-coefficient Wald z statistics and two-sided p-values.
pub fn wald_tests(fit: &GlmFit) -> Result<Vec<WaldTest>, GlmError> {
    if !fit.converged {
        return Err(GlmError::NotConverged);
    }
    fit.coefficients
        .iter()
        .zip(&fit.standard_errors)
        .zip(&fit.column_names)
        .map(|((&b, &se), name)| {
            if !(se > 0.0) {
                return Err(GlmError::DegenerateInference(name.clone()));
            }
            let z = b / se;
            Ok(WaldTest {
                z,
                p: two_sided_p_value(z),
            })
        })
        .collect()
}

/// Multiplicative effects `exp(β)`.
pub fn exp_coefficients(coefficients: &[f64]) -> Vec<f64> {
    coefficients.iter().map(|b| b.exp()).collect()
}

/// `***` below .01, `**` below .05, `*` below .1.
pub fn significance_stars(p: f64) -> &'static str {
    if p < 0.01 {
        "***"
    } else if p < 0.05 {
        "**"
    } else if p < 0.1 {
        "*"
    } else {
        ""
    }
}

/// Three decimals, never `-0.000`.
pub fn format_estimate(x: f64) -> String {
    let s = format!("{x:.3}");
    if s == "-0.000" {
        "0.000".to_string()
    } else {
        s
    }
}

/// Three decimals, or `< .001` below one thousandth.
pub fn format_p_value(p: f64) -> String {
    if p < 0.001 {
        "< .001".to_string()
    } else {
        format!("{p:.3}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub predictor: String,
    pub estimate: f64,
    pub exp_estimate: f64,
    pub z_statistic: f64,
    pub p_value: f64,
    pub stars: &'static str,
}

/// Coefficient table in design-column order.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientReport {
    pub rows: Vec<ReportRow>,
}

pub const REPORT_HEADER: [&str; 5] = ["predictor", "coefficient", "exp_coefficient", "p_value", "stars"];

impl CoefficientReport {
    /// CSV `predictor,coefficient,exp_coefficient,p_value,stars` with
    /// rounded, display-ready values.
    pub fn write_csv<W: Write>(&self, writer: W) -> csv::Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(REPORT_HEADER)?;
        for row in &self.rows {
            wtr.write_record([
                row.predictor.as_str(),
                &format_estimate(row.estimate),
                &format_estimate(row.exp_estimate),
                &format_p_value(row.p_value),
                row.stars,
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Aligned plain-text rendering with numbered rows.
    pub fn to_text(&self) -> String {
        let header = ["", "Predictor", "Coefficient", "exp(Coefficient)", "p-Value", "Significance"];
        let cells: Vec<[String; 6]> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                [
                    (i + 1).to_string(),
                    r.predictor.clone(),
                    format_estimate(r.estimate),
                    format_estimate(r.exp_estimate),
                    format_p_value(r.p_value),
                    r.stars.to_string(),
                ]
            })
            .collect();
        let mut widths = header.map(str::len);
        for row in &cells {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.chars().count());
            }
        }
        let mut out = String::new();
        let line = |out: &mut String, row: [&str; 6]| {
            let _ = writeln!(
                out,
                "{:>w0$}  {:<w1$}  {:>w2$}  {:>w3$}  {:>w4$}  {:<w5$}",
                row[0], row[1], row[2], row[3], row[4], row[5],
                w0 = widths[0], w1 = widths[1], w2 = widths[2],
                w3 = widths[3], w4 = widths[4], w5 = widths[5],
            );
        };
        line(&mut out, header);
        let rule: usize = widths.iter().sum::<usize>() + 2 * (widths.len() - 1);
        out.push_str(&"-".repeat(rule));
        out.push('\n');
        for row in &cells {
            line(&mut out, [&row[0], &row[1], &row[2], &row[3], &row[4], &row[5]]);
        }
        out.lines().map(str::trim_end).collect::<Vec<_>>().join("\n") + "\n"
    }
}

/// Builds the coefficient table for a converged fit.
pub fn render_report(fit: &GlmFit) -> Result<CoefficientReport, GlmError> {
    let tests = wald_tests(fit)?;
    let exps = exp_coefficients(&fit.coefficients);
    let rows = fit
        .column_names
        .iter()
        .zip(&fit.coefficients)
        .zip(exps)
        .zip(tests)
        .map(|(((name, &b), e), t)| ReportRow {
            predictor: name.clone(),
            estimate: b,
            exp_estimate: e,
            z_statistic: t.z,
            p_value: t.p,
            stars: significance_stars(t.p),
        })
        .collect();
    Ok(CoefficientReport { rows })
}
