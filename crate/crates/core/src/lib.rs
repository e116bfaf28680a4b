//! Bayesian data-grid coclustering of categorical time series.
//!
//! A dataset of `(sequence, time, event)` points is summarized by a 3D grid:
//! clusters of sequences, intervals of time, and clusters of events. The grid
//! minimizing [`cost::cost`] is searched with greedy merges, local moves and
//! randomized restarts ([`optimizer`]). A fitted grid can then be coarsened
//! along merge hierarchies and inspected through typicality rankings and
//! frequency, mutual-information and contrast matrices ([`exploit`]).

pub mod cost;
pub mod dataset;
pub mod error;
pub mod exploit;
pub mod gridmodel;
pub mod optimizer;
pub mod synthbench;

pub use cost::{cost, model_cost, CostBreakdown};
pub use dataset::{load_dataset, marginal_stats, CatsDataset, Delimiter, InputFormat, MarginalStats, Point};
pub use error::{CatsError, Result};
pub use gridmodel::{build_cell_stats, CellStats, Dimension, GridModel, Merge, Move};
pub use optimizer::{vns_optimize, OptimizationTrace, OptimizerConfig};
