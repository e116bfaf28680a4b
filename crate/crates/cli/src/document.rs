//! The JSON exchange format for fitted grids.

use anyhow::{bail, ensure, Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use catsgrid::exploit::{cluster_views, typicality_ranking, ClusterView, HierarchyMerge, HierarchySet, HierarchyTree};
use catsgrid::{model_cost, CatsDataset, CatsError, CostBreakdown, Dimension, GridModel};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetDigest {
    pub n_sequences: usize,
    pub n_events: usize,
    pub n_points: usize,
    pub n_time_values: usize,
    /// Hex SHA-256 of the input bytes.
    pub source_sha256: String,
}

impl DatasetDigest {
    pub fn new(d: &CatsDataset, source: &[u8]) -> Self {
        Self {
            n_sequences: d.n_sequences(),
            n_events: d.n_events(),
            n_points: d.n_points(),
            n_time_values: d.n_time_groups(),
            source_sha256: hex::encode(Sha256::digest(source)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    pub id: String,
    pub points: u64,
    pub members: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub id: String,
    pub label: String,
    pub lower: f64,
    pub upper: f64,
    /// Rank span `[rank_start, rank_end)` in time order.
    pub rank_start: usize,
    pub rank_end: usize,
    /// First distinct time value of the interval, by index.
    pub group_start: usize,
    pub points: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSection {
    pub seq_clusters: Vec<Cluster>,
    pub intervals: Vec<Interval>,
    pub event_clusters: Vec<Cluster>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hierarchies {
    pub cost_star: f64,
    pub cost_null: f64,
    /// Global merge sequence; part ids refer to the model's parts, and the
    /// second part is absorbed into the first.
    pub merges: Vec<HierarchyMerge>,
    pub seq: HierarchyTree,
    pub time: HierarchyTree,
    pub event: HierarchyTree,
}

impl Hierarchies {
    pub fn from_set(h: &HierarchySet) -> Self {
        let ir = h.ir_star();
        Self {
            cost_star: h.cost_star,
            cost_null: h.cost_null,
            merges: h.merges.clone(),
            seq: h.seq.to_tree(h.cost_star, ir),
            time: h.time.to_tree(h.cost_star, ir),
            event: h.event.to_tree(h.cost_star, ir),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypicalValue {
    pub value: String,
    pub tau: f64,
    #[serde(skip_serializing_if = "std::ops::Not::not", default)]
    pub sole_member: bool,
}

/// Top-K most typical values per cluster; empty when a dimension has a
/// single cluster.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TypicalitySection {
    pub top_k: usize,
    pub seq: Vec<Vec<TypicalValue>>,
    pub event: Vec<Vec<TypicalValue>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitInfo {
    pub seed: u64,
    pub rounds: usize,
    pub runtime_s: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub budget_s: Option<f64>,
}

/// Set on documents produced by `simplify`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Simplified {
    /// Cost of the fitted grid this one was derived from.
    pub source_cost: f64,
    /// Information ratio relative to that grid.
    pub ir: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDocument {
    pub schema_version: u32,
    pub dataset: DatasetDigest,
    pub model: ModelSection,
    /// Nonempty cells as `[seq_cluster, interval, event_cluster, count]`.
    pub cells: Vec<[u64; 4]>,
    pub cost: CostBreakdown,
    pub hierarchies: Hierarchies,
    pub typicality: TypicalitySection,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub matrices: Option<Vec<ClusterView>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub fit: Option<FitInfo>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub simplified: Option<Simplified>,
}

pub fn cluster_id(dim: Dimension, c: usize) -> String {
    format!("{}{c}", dim.symbol())
}

pub fn interval_label(d: &CatsDataset, m: &GridModel, j: usize) -> String {
    let (lo, hi) = m.interval_bounds(d, j);
    let open = if j == 0 { '[' } else { ']' };
    format!("{open}{lo};{hi}]")
}

fn clusters(d: &CatsDataset, m: &GridModel, dim: Dimension, totals: &[u64]) -> Vec<Cluster> {
    let labels = if dim == Dimension::Seq { d.seq_labels() } else { d.event_labels() };
    (0..m.k(dim))
        .map(|c| Cluster {
            id: cluster_id(dim, c),
            points: totals[c],
            members: m.members(dim, c).iter().map(|&v| labels[v as usize].clone()).collect(),
        })
        .collect()
}

fn top_typical(d: &CatsDataset, m: &GridModel, dim: Dimension, k: usize) -> Result<Vec<Vec<TypicalValue>>> {
    let labels = if dim == Dimension::Seq { d.seq_labels() } else { d.event_labels() };
    match typicality_ranking(d, m, dim) {
        Ok(r) => Ok(r
            .clusters
            .iter()
            .map(|c| {
                c.iter()
                    .take(k)
                    .map(|t| TypicalValue {
                        value: labels[t.value as usize].clone(),
                        tau: t.tau,
                        sole_member: t.sole_member,
                    })
                    .collect()
            })
            .collect()),
        Err(CatsError::Undefined(_)) => Ok(Vec::new()),
        Err(e) => Err(e.into()),
    }
}

/// Everything the document needs beyond the model itself.
pub struct DocumentOptions {
    pub top_k: usize,
    pub matrices: bool,
    pub fit: Option<FitInfo>,
    pub simplified: Option<Simplified>,
}

impl GridDocument {
    pub fn build(d: &CatsDataset, source: &[u8], m: &GridModel, h: &HierarchySet, opts: DocumentOptions) -> Result<Self> {
        let stats = catsgrid::build_cell_stats(d, m)?;
        let cost = catsgrid::cost(d, m, &stats);
        let intervals = (0..m.k_time())
            .map(|j| {
                let (lower, upper) = m.interval_bounds(d, j);
                let (rank_start, rank_end) = m.interval_ranks(d, j);
                Interval {
                    id: cluster_id(Dimension::Time, j),
                    label: interval_label(d, m, j),
                    lower,
                    upper,
                    rank_start,
                    rank_end,
                    group_start: m.interval_groups(j).0,
                    points: stats.time_totals()[j],
                }
            })
            .collect();
        let cells = stats
            .sorted_cells()
            .into_iter()
            .map(|(s, t, e, n)| [s as u64, t as u64, e as u64, n])
            .collect();
        Ok(Self {
            schema_version: SCHEMA_VERSION,
            dataset: DatasetDigest::new(d, source),
            model: ModelSection {
                seq_clusters: clusters(d, m, Dimension::Seq, stats.seq_totals()),
                intervals,
                event_clusters: clusters(d, m, Dimension::Event, stats.event_totals()),
            },
            cells,
            cost,
            hierarchies: Hierarchies::from_set(h),
            typicality: TypicalitySection {
                top_k: opts.top_k,
                seq: top_typical(d, m, Dimension::Seq, opts.top_k)?,
                event: top_typical(d, m, Dimension::Event, opts.top_k)?,
            },
            matrices: if opts.matrices { Some(cluster_views(d, m)?) } else { None },
            fit: opts.fit,
            simplified: opts.simplified,
        })
    }

    /// Rebuilds the model against the dataset it was fitted on.
    pub fn to_model(&self, d: &CatsDataset) -> Result<GridModel> {
        ensure!(
            self.schema_version == SCHEMA_VERSION,
            "unsupported schema version {} (expected {SCHEMA_VERSION})",
            self.schema_version
        );
        let digest = &self.dataset;
        if (digest.n_sequences, digest.n_events, digest.n_points, digest.n_time_values)
            != (d.n_sequences(), d.n_events(), d.n_points(), d.n_time_groups())
        {
            bail!("grid was fitted on a different dataset");
        }
        let assign = |clusters: &[Cluster], n: usize, code: &dyn Fn(&str) -> Option<u32>| -> Result<Vec<u32>> {
            let mut out = vec![u32::MAX; n];
            for (c, cl) in clusters.iter().enumerate() {
                for label in &cl.members {
                    let v = code(label).with_context(|| format!("unknown value {label:?} in cluster {}", cl.id))?;
                    out[v as usize] = c as u32;
                }
            }
            ensure!(out.iter().all(|&c| c != u32::MAX), "some values are not assigned to a cluster");
            Ok(out)
        };
        let seq = assign(&self.model.seq_clusters, d.n_sequences(), &|l| d.seq_code(l))?;
        let event = assign(&self.model.event_clusters, d.n_events(), &|l| d.event_code(l))?;
        let starts: Vec<u32> = self.model.intervals.iter().map(|i| i.group_start as u32).collect();
        for i in &self.model.intervals {
            ensure!(
                i.group_start < d.n_time_groups() && d.group_start_rank(i.group_start) == i.rank_start,
                "interval {} does not match the dataset ranks",
                i.id
            );
        }
        let m = GridModel::new(d, seq, event, starts)?;
        let recomputed = model_cost(d, &m)?.total;
        ensure!(
            (recomputed - self.cost.total).abs() <= 1e-9 * recomputed.abs().max(1.0),
            "stored cost {} differs from recomputed {recomputed}",
            self.cost.total
        );
        Ok(m)
    }

    pub fn seq_cluster_index(&self, id: &str) -> Result<usize> {
        let ids: Vec<&str> = self.model.seq_clusters.iter().map(|c| c.id.as_str()).collect();
        let bare = id.strip_prefix('S').unwrap_or(id);
        match bare.parse::<usize>() {
            Ok(c) if c < ids.len() => Ok(c),
            _ => Err(crate::UsageError(format!("unknown cluster {id:?}; valid ids: {}", ids.join(", "))).into()),
        }
    }
}
