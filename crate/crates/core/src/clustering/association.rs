use ndarray::Array2;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Association {
    /// Observed counts; rows follow `row_labels`, columns `col_labels`.
    pub table: Array2<f64>,
    pub row_labels: Vec<usize>,
    pub col_labels: Vec<usize>,
    pub n: usize,
    pub chi2: f64,
    pub dof: usize,
    pub p_value: f64,
    pub v: f64,
    pub bias_corrected: bool,
}

/// Cramér's V from a χ² statistic. The corrected form shrinks φ² and the
/// effective table dimensions by their small-sample bias.
pub fn cramers_v(chi2: f64, n: usize, rows: usize, cols: usize, bias_corrected: bool) -> f64 {
    let (nf, r, c) = (n as f64, rows as f64, cols as f64);
    if rows < 2 || cols < 2 || n == 0 {
        return 0.0;
    }
    let phi2 = chi2 / nf;
    let v2 = if bias_corrected {
        if n < 2 {
            return 0.0;
        }
        let phi2c = (phi2 - (c - 1.0) * (r - 1.0) / (nf - 1.0)).max(0.0);
        let rc = r - (r - 1.0).powi(2) / (nf - 1.0);
        let cc = c - (c - 1.0).powi(2) / (nf - 1.0);
        let denom = (rc - 1.0).min(cc - 1.0);
        if denom <= 0.0 {
            return 0.0;
        }
        phi2c / denom
    } else {
        phi2 / (r.min(c) - 1.0)
    };
    v2.max(0.0).sqrt().min(1.0)
}

/// Pearson χ² test of independence between two labelings plus Cramér's V.
/// Labels index categories `0..=max`; categories that never occur are dropped.
pub fn chi_squared_cramers_v(a: &[usize], b: &[usize], bias_corrected: bool) -> Result<Association> {
    if a.len() != b.len() {
        return Err(Error::Dimension(format!("label lengths differ: {} vs {}", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::EmptyInput("labels"));
    }
    let present = |v: &[usize]| {
        let mut seen = vec![false; v.iter().max().unwrap() + 1];
        for x in v {
            seen[*x] = true;
        }
        if seen.iter().any(|s| !s) {
            log::warn!("dropping empty categories from contingency table");
        }
        seen.iter().enumerate().filter(|(_, s)| **s).map(|(i, _)| i).collect::<Vec<_>>()
    };
    let (rl, cl) = (present(a), present(b));
    if rl.len() < 2 || cl.len() < 2 {
        return Err(Error::DegenerateInput(format!(
            "contingency table needs at least 2 categories per side, got {}x{}",
            rl.len(),
            cl.len()
        )));
    }
    let mut table = Array2::<f64>::zeros((rl.len(), cl.len()));
    for (x, y) in a.iter().zip(b) {
        let i = rl.binary_search(x).unwrap();
        let j = cl.binary_search(y).unwrap();
        table[[i, j]] += 1.0;
    }
    let n = a.len();
    let chi2 = pearson_chi2(&table);
    let dof = (rl.len() - 1) * (cl.len() - 1);
    let p_value = ChiSquared::new(dof as f64).map(|d| d.sf(chi2)).unwrap_or(f64::NAN);
    let v = cramers_v(chi2, n, rl.len(), cl.len(), bias_corrected);
    Ok(Association { table, row_labels: rl, col_labels: cl, n, chi2, dof, p_value, v, bias_corrected })
}

pub fn pearson_chi2(table: &Array2<f64>) -> f64 {
    let n: f64 = table.sum();
    let rows = table.sum_axis(ndarray::Axis(1));
    let cols = table.sum_axis(ndarray::Axis(0));
    let mut chi2 = 0.0;
    for ((i, j), o) in table.indexed_iter() {
        let e = rows[i] * cols[j] / n;
        if e > 0.0 {
            chi2 += (o - e).powi(2) / e;
        }
    }
    chi2
}
