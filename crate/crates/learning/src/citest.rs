//! Pearson chi-square test of conditional independence on categorical data.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::dataset::CaseDataset;
use crate::error::{LearningError, Result};

/// Default bound on the conditioning-set size.
pub const MAX_CONDITIONING: usize = 3;

/// Strata whose average expected cell count falls below this are pooled.
pub const MIN_EXPECTED: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CiResult {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
    /// Rows used after listwise deletion.
    pub n: usize,
}

/// Chi-square statistic and degrees of freedom of one contingency table,
/// ignoring empty rows and columns. `None` when fewer than two non-empty
/// rows or columns remain.
fn table_statistic(t: &[f64], rows: usize, cols: usize) -> Option<(f64, usize)> {
    let rs: Vec<f64> = (0..rows).map(|r| t[r * cols..(r + 1) * cols].iter().sum()).collect();
    let cs: Vec<f64> = (0..cols).map(|c| (0..rows).map(|r| t[r * cols + c]).sum()).collect();
    let n: f64 = rs.iter().sum();
    let live_r = rs.iter().filter(|v| **v > 0.0).count();
    let live_c = cs.iter().filter(|v| **v > 0.0).count();
    if live_r < 2 || live_c < 2 {
        return None;
    }
    let mut stat = 0.0;
    for r in 0..rows {
        for c in 0..cols {
            let e = rs[r] * cs[c] / n;
            if e > 0.0 {
                let d = t[r * cols + c] - e;
                stat += d * d / e;
            }
        }
    }
    Some((stat, (live_r - 1) * (live_c - 1)))
}

pub fn chi_square_ci_test(data: &CaseDataset, x: &str, y: &str, given: &[&str]) -> Result<CiResult> {
    chi_square_ci_test_limited(data, x, y, given, MAX_CONDITIONING)
}

pub fn chi_square_ci_test_limited(
    data: &CaseDataset,
    x: &str,
    y: &str,
    given: &[&str],
    limit: usize,
) -> Result<CiResult> {
    if given.len() > limit {
        return Err(LearningError::ConditioningTooLarge {
            size: given.len(),
            limit,
        });
    }
    let xi = data.require_column(x)?;
    let yi = data.require_column(y)?;
    let gi: Vec<usize> = given.iter().map(|g| data.require_column(g)).collect::<Result<_>>()?;
    let schema = data.schema();
    let (kx, ky) = (schema[xi].cardinality(), schema[yi].cardinality());
    let strata: usize = gi.iter().map(|&g| schema[g].cardinality()).product();
    let cell = kx * ky;
    let mut tables = vec![0.0; strata * cell];
    let mut n = 0;
    'rows: for row in data.rows() {
        let (Some(a), Some(b)) = (row[xi], row[yi]) else { continue };
        let mut s = 0;
        for &g in &gi {
            match row[g] {
                Some(v) => s = s * schema[g].cardinality() + v,
                None => continue 'rows,
            }
        }
        tables[s * cell + a * ky + b] += 1.0;
        n += 1;
    }
    let mut stat = 0.0;
    let mut dof = 0;
    let mut pooled = vec![0.0; cell];
    let mut any_pooled = false;
    for t in tables.chunks(cell) {
        let total: f64 = t.iter().sum();
        if total == 0.0 {
            continue;
        }
        if total / (cell as f64) < MIN_EXPECTED {
            pooled.iter_mut().zip(t).for_each(|(p, v)| *p += v);
            any_pooled = true;
            continue;
        }
        if let Some((s, d)) = table_statistic(t, kx, ky) {
            stat += s;
            dof += d;
        }
    }
    if any_pooled {
        if let Some((s, d)) = table_statistic(&pooled, kx, ky) {
            stat += s;
            dof += d;
        }
    }
    if dof == 0 {
        return Err(LearningError::InsufficientData {
            x: x.to_string(),
            y: y.to_string(),
        });
    }
    let dist = ChiSquared::new(dof as f64).map_err(|e| LearningError::Invalid(e.to_string()))?;
    let p_value = (1.0 - dist.cdf(stat)).clamp(0.0, 1.0);
    Ok(CiResult {
        statistic: stat,
        dof,
        p_value,
        n,
    })
}
