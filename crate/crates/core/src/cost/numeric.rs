//! Log-domain combinatorics used by the cost criterion.
//!
//! All values are natural logarithms. Factorials below [`TABLE_LEN`] come
//! from a lazily built table; larger arguments fall back to log-gamma.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use statrs::function::gamma::ln_gamma;

use crate::error::{CatsError, Result};

const TABLE_LEN: usize = 1 << 20;

fn factorial_table() -> &'static [f64] {
    static TABLE: OnceLock<Vec<f64>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(TABLE_LEN);
        t.push(0.0);
        t.push(0.0);
        for m in 2..TABLE_LEN {
            t.push(ln_gamma(m as f64 + 1.0));
        }
        t
    })
}

/// `ln(m!)`.
#[inline]
pub fn log_factorial(m: u64) -> f64 {
    if (m as usize) < TABLE_LEN {
        factorial_table()[m as usize]
    } else {
        ln_gamma(m as f64 + 1.0)
    }
}

/// `ln C(m, j)`; fails when `j > m`.
pub fn log_binomial(m: u64, j: u64) -> Result<f64> {
    if j > m {
        return Err(CatsError::InvalidArgument(format!(
            "binomial C({m}, {j}) requires j <= m"
        )));
    }
    Ok(log_binomial_unchecked(m, j))
}

#[inline]
pub(crate) fn log_binomial_unchecked(m: u64, j: u64) -> f64 {
    if j == 0 || j == m {
        return 0.0;
    }
    log_factorial(m) - log_factorial(j) - log_factorial(m - j)
}

#[inline]
fn log_add_exp(x: f64, y: f64) -> f64 {
    if x == f64::NEG_INFINITY {
        return y;
    }
    if y == f64::NEG_INFINITY {
        return x;
    }
    let (hi, lo) = if x > y { (x, y) } else { (y, x) };
    hi + (lo - hi).exp().ln_1p()
}

/// `ln B(m, j)` for partitions of `m` labelled elements into at most `j`
/// non-empty groups, `B(m, j) = sum_{i=1..j} S(m, i)` with `S` the Stirling
/// numbers of the second kind.
///
/// `j` is clamped to `m`. Results are served from a process-wide cache that
/// holds one row per `m`, extended on demand.
pub fn log_partition_count(m: u64, j: u64) -> f64 {
    assert!(m >= 1 && j >= 1, "log_partition_count requires m, j >= 1");
    let j = j.min(m);
    if j == 1 {
        return 0.0;
    }
    partition_row(m, j)[j as usize - 1]
}

/// Cumulative `ln B(m, 1..=len)` for one `m`.
type Row = Arc<Vec<f64>>;

fn partition_row(m: u64, j: u64) -> Row {
    static CACHE: OnceLock<Mutex<HashMap<u64, Row>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(row) = cache.lock().unwrap().get(&m) {
        if row.len() as u64 >= j {
            return row.clone();
        }
    }
    // Grow geometrically so repeated requests with slowly rising j stay cheap.
    let width = (j.max(16).saturating_mul(2)).min(m);
    let row = Arc::new(compute_partition_row(m, width as usize));
    let mut guard = cache.lock().unwrap();
    let entry = guard.entry(m).or_insert_with(|| row.clone());
    if entry.len() < row.len() {
        *entry = row;
    }
    entry.clone()
}

/// Stirling recurrence `S(r, i) = i S(r-1, i) + S(r-1, i-1)` in log domain,
/// truncated to `i <= width`, then prefix log-sum-exp over `i`.
fn compute_partition_row(m: u64, width: usize) -> Vec<f64> {
    let ln_i: Vec<f64> = (0..=width).map(|i| (i as f64).ln()).collect();
    // stirling[i] = ln S(r, i), index 0 unused (S(r, 0) = 0 for r >= 1).
    let mut stirling = vec![f64::NEG_INFINITY; width + 1];
    stirling[1] = 0.0;
    for r in 2..=m as usize {
        let top = r.min(width);
        for i in (2..=top).rev() {
            stirling[i] = log_add_exp(ln_i[i] + stirling[i], stirling[i - 1]);
        }
    }
    let mut out = Vec::with_capacity(width);
    let mut acc = f64::NEG_INFINITY;
    for &s in stirling.iter().skip(1) {
        acc = log_add_exp(acc, s);
        out.push(acc);
    }
    out
}
