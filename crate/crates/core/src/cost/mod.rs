//! The model selection criterion and its incremental variations.
//!
//! `cost(M)` is a negative log posterior in nats, split into nine additive
//! terms (five prior, four likelihood). Lower is better. Empty cells
//! contribute nothing, so every evaluation is linear in the number of
//! nonempty cells.

mod incremental;
pub mod numeric;

use serde::{Deserialize, Serialize};

pub use incremental::WorkingGrid;
pub use numeric::{log_binomial, log_factorial, log_partition_count};

use crate::dataset::CatsDataset;
use crate::error::Result;
use crate::gridmodel::{build_cell_stats, CellStats, Dimension, GridModel, Merge, Move};
use numeric::log_binomial_unchecked as lbin;

/// The nine terms of the criterion and their sum, in nats.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostBreakdown {
    /// `ln n + ln a + ln N`.
    pub prior_header: f64,
    /// `ln B(n, k_S) + ln B(a, k_E)`.
    pub prior_partitions: f64,
    /// `ln C(N + k - 1, k - 1)`.
    pub prior_cells: f64,
    pub prior_seq_clusters: f64,
    pub prior_event_clusters: f64,
    /// `ln N! - sum ln N_cell!`.
    pub lik_cells: f64,
    pub lik_seq: f64,
    pub lik_event: f64,
    /// `sum ln N_interval!`.
    pub lik_time: f64,
    pub total: f64,
}

impl CostBreakdown {
    pub fn terms(&self) -> [f64; 9] {
        [
            self.prior_header,
            self.prior_partitions,
            self.prior_cells,
            self.prior_seq_clusters,
            self.prior_event_clusters,
            self.lik_cells,
            self.lik_seq,
            self.lik_event,
            self.lik_time,
        ]
    }

    pub fn prior(&self) -> f64 {
        self.terms()[..5].iter().sum()
    }

    pub fn likelihood(&self) -> f64 {
        self.terms()[5..].iter().sum()
    }
}

/// `ln C(total + size - 1, size - 1)`, the cost of spreading a cluster's
/// points over its values; zero for an empty cluster.
#[inline]
pub(crate) fn cluster_term(total: u64, size: u64) -> f64 {
    if size == 0 {
        0.0
    } else {
        lbin(total + size - 1, size - 1)
    }
}

/// Prior terms that depend only on the part counts.
#[inline]
pub(crate) fn structure_prior(d: &CatsDataset, ks: usize, kt: usize, ke: usize) -> f64 {
    let n_points = d.n_points() as u64;
    let k = (ks * kt * ke) as u64;
    log_partition_count(d.n_sequences() as u64, ks as u64)
        + log_partition_count(d.n_events() as u64, ke as u64)
        + lbin(n_points + k - 1, k - 1)
}

pub(crate) fn evaluate(d: &CatsDataset, s: &CellStats, ks: usize, kt: usize, ke: usize) -> CostBreakdown {
    let n_points = d.n_points() as u64;
    let k = (ks * kt * ke) as u64;
    let prior_header =
        (d.n_sequences() as f64).ln() + (d.n_events() as f64).ln() + (n_points as f64).ln();
    let prior_partitions = log_partition_count(d.n_sequences() as u64, ks as u64)
        + log_partition_count(d.n_events() as u64, ke as u64);
    let prior_cells = lbin(n_points + k - 1, k - 1);
    let prior_seq_clusters = s
        .seq_totals
        .iter()
        .zip(&s.seq_sizes)
        .map(|(&t, &n)| cluster_term(t, n))
        .sum();
    let prior_event_clusters = s
        .event_totals
        .iter()
        .zip(&s.event_sizes)
        .map(|(&t, &n)| cluster_term(t, n))
        .sum();
    let cell_sum: f64 = s
        .seq_slices
        .iter()
        .flat_map(|slice| slice.values())
        .map(|&c| log_factorial(c))
        .sum();
    let lik_cells = log_factorial(n_points) - cell_sum;
    let lik_seq = s.seq_totals.iter().map(|&t| log_factorial(t)).sum::<f64>()
        - d.seq_counts().iter().map(|&c| log_factorial(c)).sum::<f64>();
    let lik_event = s.event_totals.iter().map(|&t| log_factorial(t)).sum::<f64>()
        - d.event_counts().iter().map(|&c| log_factorial(c)).sum::<f64>();
    let lik_time = s.time_totals.iter().map(|&t| log_factorial(t)).sum();

    let mut out = CostBreakdown {
        prior_header,
        prior_partitions,
        prior_cells,
        prior_seq_clusters,
        prior_event_clusters,
        lik_cells,
        lik_seq,
        lik_event,
        lik_time,
        total: 0.0,
    };
    out.total = out.terms().iter().sum();
    out
}

/// Evaluates the criterion for `m` given its cell statistics.
pub fn cost(d: &CatsDataset, m: &GridModel, s: &CellStats) -> CostBreakdown {
    evaluate(d, s, m.k_seq(), m.k_time(), m.k_event())
}

/// Builds the statistics of `m` and evaluates it.
pub fn model_cost(d: &CatsDataset, m: &GridModel) -> Result<CostBreakdown> {
    let s = build_cell_stats(d, m)?;
    Ok(cost(d, m, &s))
}

/// `cost(after merge) - cost(m)`, computed from the merged parts' slices only.
pub fn delta_cost_merge(d: &CatsDataset, m: &GridModel, s: &CellStats, g: Merge) -> Result<f64> {
    let grid = WorkingGrid::with_stats(d, m, s.clone())?;
    grid.check_merge(g)?;
    let g = Merge::new(g.dim, g.a, g.b);
    Ok(grid.merge_delta(g.dim, g.a, g.b))
}

/// `cost(after move) - cost(m)` for a value move or boundary shift.
pub fn delta_cost_move(d: &CatsDataset, m: &GridModel, s: &CellStats, v: Move) -> Result<f64> {
    let grid = WorkingGrid::with_stats(d, m, s.clone())?;
    match v {
        Move::Value { dim, value, target } => {
            grid.check_value_move(dim, value, target)?;
            Ok(grid.move_delta(dim, value, target))
        }
        Move::Boundary { left, offset } => {
            let group = m.shifted_boundary_group(d, left, offset)?;
            Ok(grid.shift_delta(left, group))
        }
    }
}

/// Dimension tag used in traces and candidate ordering.
pub(crate) fn dim_index(dim: Dimension) -> usize {
    match dim {
        Dimension::Seq => 0,
        Dimension::Time => 1,
        Dimension::Event => 2,
    }
}
