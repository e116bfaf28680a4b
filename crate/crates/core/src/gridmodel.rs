//! Data-grid models and their sparse sufficient statistics.
//!
//! A [`GridModel`] holds three univariate partitions: sequence clusters,
//! event clusters, and time intervals. Intervals are stored as runs of tie
//! groups, so a boundary can never split points sharing a time value.
//! Cluster indices are canonical: ordered by the smallest value code they
//! contain.

use std::fmt;

use rustc_hash::FxHashMap;
use serde::{Deserialize, Serialize};

use crate::dataset::CatsDataset;
use crate::error::{CatsError, Result};

/// One of the three partitioned variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Dimension {
    #[serde(rename = "S")]
    Seq,
    #[serde(rename = "T")]
    Time,
    #[serde(rename = "E")]
    Event,
}

impl Dimension {
    pub const ALL: [Dimension; 3] = [Dimension::Seq, Dimension::Time, Dimension::Event];

    pub fn symbol(self) -> &'static str {
        match self {
            Dimension::Seq => "S",
            Dimension::Time => "T",
            Dimension::Event => "E",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

/// Merge of two parts of one dimension. Time merges must be adjacent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Merge {
    pub dim: Dimension,
    pub a: usize,
    pub b: usize,
}

impl Merge {
    pub fn new(dim: Dimension, a: usize, b: usize) -> Self {
        Self { dim, a: a.min(b), b: a.max(b) }
    }
}

/// Local modification of a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Move {
    /// Reassign a sequence or event value to another cluster.
    Value { dim: Dimension, value: u32, target: usize },
    /// Shift the boundary between interval `left` and `left + 1` by a signed
    /// number of ranks. The new position must fall between two tie groups.
    Boundary { left: usize, offset: i64 },
}

pub(crate) type SliceMap = FxHashMap<u64, u64>;

#[inline]
pub(crate) fn pack(x: u32, y: u32) -> u64 {
    (u64::from(x) << 32) | u64::from(y)
}

#[inline]
pub(crate) fn unpack(key: u64) -> (u32, u32) {
    ((key >> 32) as u32, key as u32)
}

/// Relabels `assign` so clusters are numbered by first appearance in value order.
fn canonical_relabel(assign: &mut [u32]) -> usize {
    let mut remap: FxHashMap<u32, u32> = FxHashMap::default();
    for c in assign.iter_mut() {
        let next = remap.len() as u32;
        *c = *remap.entry(*c).or_insert(next);
    }
    remap.len()
}

/// Three-way partition of a dataset.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GridModel {
    seq_assign: Vec<u32>,
    event_assign: Vec<u32>,
    /// First tie group of each interval; `interval_starts[0] == 0`.
    interval_starts: Vec<u32>,
    n_time_groups: u32,
    k_seq: usize,
    k_event: usize,
}

impl GridModel {
    /// Validates and canonicalizes a model. Cluster labels in the assignments
    /// may be arbitrary; empty clusters simply do not exist afterwards.
    pub fn new(
        d: &CatsDataset,
        mut seq_assign: Vec<u32>,
        mut event_assign: Vec<u32>,
        mut interval_starts: Vec<u32>,
    ) -> Result<Self> {
        if seq_assign.len() != d.n_sequences() {
            return Err(CatsError::InconsistentModel(format!(
                "{} sequence assignments for {} sequences",
                seq_assign.len(),
                d.n_sequences()
            )));
        }
        if event_assign.len() != d.n_events() {
            return Err(CatsError::InconsistentModel(format!(
                "{} event assignments for {} events",
                event_assign.len(),
                d.n_events()
            )));
        }
        let groups = d.n_time_groups() as u32;
        if interval_starts.first() != Some(&0) {
            return Err(CatsError::InconsistentModel("first interval must start at group 0".into()));
        }
        if interval_starts.windows(2).any(|w| w[0] >= w[1]) || *interval_starts.last().unwrap() >= groups {
            return Err(CatsError::InconsistentModel(
                "interval starts must be strictly increasing tie-group indices".into(),
            ));
        }
        interval_starts.shrink_to_fit();
        let k_seq = canonical_relabel(&mut seq_assign);
        let k_event = canonical_relabel(&mut event_assign);
        Ok(Self { seq_assign, event_assign, interval_starts, n_time_groups: groups, k_seq, k_event })
    }

    /// Single part per dimension.
    pub fn null(d: &CatsDataset) -> Self {
        Self::new(d, vec![0; d.n_sequences()], vec![0; d.n_events()], vec![0]).expect("null model")
    }

    /// One part per distinct value in every dimension.
    pub fn finest(d: &CatsDataset) -> Self {
        Self::new(
            d,
            (0..d.n_sequences() as u32).collect(),
            (0..d.n_events() as u32).collect(),
            (0..d.n_time_groups() as u32).collect(),
        )
        .expect("finest model")
    }

    pub fn k_seq(&self) -> usize {
        self.k_seq
    }

    pub fn k_time(&self) -> usize {
        self.interval_starts.len()
    }

    pub fn k_event(&self) -> usize {
        self.k_event
    }

    pub fn k(&self, dim: Dimension) -> usize {
        match dim {
            Dimension::Seq => self.k_seq,
            Dimension::Time => self.k_time(),
            Dimension::Event => self.k_event,
        }
    }

    /// Number of cells `k_S * k_T * k_E`.
    pub fn n_cells(&self) -> u64 {
        (self.k_seq * self.k_time() * self.k_event) as u64
    }

    pub fn seq_assignment(&self) -> &[u32] {
        &self.seq_assign
    }

    pub fn event_assignment(&self) -> &[u32] {
        &self.event_assign
    }

    pub fn interval_starts(&self) -> &[u32] {
        &self.interval_starts
    }

    pub fn seq_cluster_of(&self, s: u32) -> usize {
        self.seq_assign[s as usize] as usize
    }

    pub fn event_cluster_of(&self, e: u32) -> usize {
        self.event_assign[e as usize] as usize
    }

    /// Tie groups `[start, end)` of interval `j`.
    pub fn interval_groups(&self, j: usize) -> (usize, usize) {
        let start = self.interval_starts[j] as usize;
        let end = self.interval_starts.get(j + 1).map_or(self.n_time_groups as usize, |&g| g as usize);
        (start, end)
    }

    /// Interval index of every tie group.
    pub fn group_intervals(&self) -> Vec<u32> {
        let mut out = vec![0u32; self.n_time_groups as usize];
        for j in 0..self.k_time() {
            let (a, b) = self.interval_groups(j);
            out[a..b].fill(j as u32);
        }
        out
    }

    /// Members of sequence cluster `c`, ascending.
    pub fn seq_members(&self, c: usize) -> Vec<u32> {
        members(&self.seq_assign, c)
    }

    /// Members of event cluster `c`, ascending.
    pub fn event_members(&self, c: usize) -> Vec<u32> {
        members(&self.event_assign, c)
    }

    pub fn members(&self, dim: Dimension, c: usize) -> Vec<u32> {
        match dim {
            Dimension::Seq => self.seq_members(c),
            Dimension::Event => self.event_members(c),
            Dimension::Time => {
                let (a, b) = self.interval_groups(c);
                (a as u32..b as u32).collect()
            }
        }
    }

    /// Rank span `[start, end)` of interval `j`.
    pub fn interval_ranks(&self, d: &CatsDataset, j: usize) -> (usize, usize) {
        let (a, b) = self.interval_groups(j);
        (d.group_start_rank(a), d.group_start_rank(b))
    }

    /// Time bounds of interval `j`. Inner bounds sit at the midpoint between
    /// the last time of one interval and the first time of the next; the
    /// outer bounds are the observed extremes.
    pub fn interval_bounds(&self, d: &CatsDataset, j: usize) -> (f64, f64) {
        let times = d.group_times();
        let (a, b) = self.interval_groups(j);
        let lower = if a == 0 { times[0] } else { 0.5 * (times[a - 1] + times[a]) };
        let upper = if b == times.len() { times[b - 1] } else { 0.5 * (times[b - 1] + times[b]) };
        (lower, upper)
    }

    /// Inner boundaries in time units.
    pub fn boundaries(&self, d: &CatsDataset) -> Vec<f64> {
        (1..self.k_time()).map(|j| self.interval_bounds(d, j).0).collect()
    }

    pub(crate) fn check_dataset(&self, d: &CatsDataset) -> Result<()> {
        if self.seq_assign.len() != d.n_sequences()
            || self.event_assign.len() != d.n_events()
            || self.n_time_groups as usize != d.n_time_groups()
        {
            return Err(CatsError::InconsistentModel(
                "model dimensions do not match the dataset".into(),
            ));
        }
        Ok(())
    }

    /// Returns the model after merging two parts. Part `b` is absorbed into `a`.
    pub fn apply_merge(&self, d: &CatsDataset, g: Merge) -> Result<GridModel> {
        self.check_dataset(d)?;
        let Merge { dim, a, b } = Merge::new(g.dim, g.a, g.b);
        let k = self.k(dim);
        if a == b || b >= k {
            return Err(CatsError::InvalidCandidate(format!(
                "cannot merge parts {a} and {b} of {dim} (k = {k})"
            )));
        }
        match dim {
            Dimension::Seq | Dimension::Event => {
                let mut assign = if dim == Dimension::Seq { self.seq_assign.clone() } else { self.event_assign.clone() };
                for c in assign.iter_mut() {
                    if *c as usize == b {
                        *c = a as u32;
                    }
                }
                if dim == Dimension::Seq {
                    GridModel::new(d, assign, self.event_assign.clone(), self.interval_starts.clone())
                } else {
                    GridModel::new(d, self.seq_assign.clone(), assign, self.interval_starts.clone())
                }
            }
            Dimension::Time => {
                if b != a + 1 {
                    return Err(CatsError::InvalidCandidate(format!(
                        "time intervals {a} and {b} are not adjacent"
                    )));
                }
                let mut starts = self.interval_starts.clone();
                starts.remove(b);
                GridModel::new(d, self.seq_assign.clone(), self.event_assign.clone(), starts)
            }
        }
    }

    /// Returns the model after a value move or boundary shift. Moving the only
    /// member out of a cluster deletes that cluster.
    pub fn apply_move(&self, d: &CatsDataset, v: Move) -> Result<GridModel> {
        self.check_dataset(d)?;
        match v {
            Move::Value { dim, value, target } => {
                let (assign, n_values) = match dim {
                    Dimension::Seq => (&self.seq_assign, d.n_sequences()),
                    Dimension::Event => (&self.event_assign, d.n_events()),
                    Dimension::Time => {
                        return Err(CatsError::InvalidCandidate("time values move via boundary shifts".into()))
                    }
                };
                if value as usize >= n_values || target >= self.k(dim) {
                    return Err(CatsError::InvalidCandidate(format!(
                        "value {value} or target cluster {target} out of range for {dim}"
                    )));
                }
                if assign[value as usize] as usize == target {
                    return Err(CatsError::InvalidCandidate(format!(
                        "value {value} already belongs to cluster {target}"
                    )));
                }
                let mut assign = assign.clone();
                assign[value as usize] = target as u32;
                if dim == Dimension::Seq {
                    GridModel::new(d, assign, self.event_assign.clone(), self.interval_starts.clone())
                } else {
                    GridModel::new(d, self.seq_assign.clone(), assign, self.interval_starts.clone())
                }
            }
            Move::Boundary { left, offset } => {
                let new_start = self.shifted_boundary_group(d, left, offset)?;
                let mut starts = self.interval_starts.clone();
                starts[left + 1] = new_start as u32;
                GridModel::new(d, self.seq_assign.clone(), self.event_assign.clone(), starts)
            }
        }
    }

    /// Tie group at which interval `left + 1` starts after shifting by `offset` ranks.
    pub(crate) fn shifted_boundary_group(&self, d: &CatsDataset, left: usize, offset: i64) -> Result<usize> {
        if left + 1 >= self.k_time() {
            return Err(CatsError::InvalidCandidate(format!("no boundary after interval {left}")));
        }
        if offset == 0 {
            return Err(CatsError::InvalidCandidate("boundary shift of zero ranks".into()));
        }
        let (lo, _) = self.interval_groups(left);
        let (cur, hi) = self.interval_groups(left + 1);
        let rank = d.group_start_rank(cur) as i64 + offset;
        let group = if rank < 0 { None } else { d.group_at_rank(rank as usize) };
        match group {
            Some(g) if g > lo && g < hi => Ok(g),
            Some(_) => Err(CatsError::InvalidCandidate(
                "boundary shift would empty an interval".into(),
            )),
            None => Err(CatsError::InvalidCandidate(format!(
                "rank {rank} does not separate two tie groups"
            ))),
        }
    }
}

fn members(assign: &[u32], c: usize) -> Vec<u32> {
    assign.iter().enumerate().filter(|(_, &x)| x as usize == c).map(|(v, _)| v as u32).collect()
}

/// Sparse cell counts with per-part slices.
///
/// Each nonempty cell `(s, t, e)` is stored three times, once in the slice of
/// each of its parts, keyed by its two other coordinates. Merge costs then
/// only touch the slices of the parts involved.
#[derive(Debug, Clone, PartialEq)]
pub struct CellStats {
    pub(crate) seq_slices: Vec<SliceMap>,
    pub(crate) time_slices: Vec<SliceMap>,
    pub(crate) event_slices: Vec<SliceMap>,
    pub(crate) seq_totals: Vec<u64>,
    pub(crate) time_totals: Vec<u64>,
    pub(crate) event_totals: Vec<u64>,
    pub(crate) seq_sizes: Vec<u64>,
    pub(crate) event_sizes: Vec<u64>,
    pub(crate) n_points: u64,
}

impl CellStats {
    pub(crate) fn empty(ks: usize, kt: usize, ke: usize) -> Self {
        Self {
            seq_slices: vec![SliceMap::default(); ks],
            time_slices: vec![SliceMap::default(); kt],
            event_slices: vec![SliceMap::default(); ke],
            seq_totals: vec![0; ks],
            time_totals: vec![0; kt],
            event_totals: vec![0; ke],
            seq_sizes: vec![0; ks],
            event_sizes: vec![0; ke],
            n_points: 0,
        }
    }

    #[inline]
    pub(crate) fn add(&mut self, s: u32, t: u32, e: u32, count: u64) {
        *self.seq_slices[s as usize].entry(pack(t, e)).or_insert(0) += count;
        *self.time_slices[t as usize].entry(pack(s, e)).or_insert(0) += count;
        *self.event_slices[e as usize].entry(pack(s, t)).or_insert(0) += count;
        self.seq_totals[s as usize] += count;
        self.time_totals[t as usize] += count;
        self.event_totals[e as usize] += count;
        self.n_points += count;
    }

    #[inline]
    pub(crate) fn remove(&mut self, s: u32, t: u32, e: u32, count: u64) {
        fn dec(map: &mut SliceMap, key: u64, count: u64) {
            let slot = map.get_mut(&key).expect("cell present");
            *slot -= count;
            if *slot == 0 {
                map.remove(&key);
            }
        }
        dec(&mut self.seq_slices[s as usize], pack(t, e), count);
        dec(&mut self.time_slices[t as usize], pack(s, e), count);
        dec(&mut self.event_slices[e as usize], pack(s, t), count);
        self.seq_totals[s as usize] -= count;
        self.time_totals[t as usize] -= count;
        self.event_totals[e as usize] -= count;
        self.n_points -= count;
    }

    /// Count of cell `(s, t, e)`.
    pub fn count(&self, s: usize, t: usize, e: usize) -> u64 {
        self.seq_slices[s].get(&pack(t as u32, e as u32)).copied().unwrap_or(0)
    }

    /// Nonempty cells as `(s, t, e, count)`, in unspecified order.
    pub fn cells(&self) -> impl Iterator<Item = (usize, usize, usize, u64)> + '_ {
        self.seq_slices.iter().enumerate().flat_map(|(s, slice)| {
            slice.iter().map(move |(&key, &c)| {
                let (t, e) = unpack(key);
                (s, t as usize, e as usize, c)
            })
        })
    }

    /// Nonempty cells sorted by `(s, t, e)`.
    pub fn sorted_cells(&self) -> Vec<(usize, usize, usize, u64)> {
        let mut cells: Vec<_> = self.cells().collect();
        cells.sort_unstable();
        cells
    }

    pub fn n_nonempty(&self) -> usize {
        self.seq_slices.iter().map(|m| m.len()).sum()
    }

    /// Points per sequence cluster, `N_{i_S}`.
    pub fn seq_totals(&self) -> &[u64] {
        &self.seq_totals
    }

    /// Points per interval, `N_{j_T}`.
    pub fn time_totals(&self) -> &[u64] {
        &self.time_totals
    }

    /// Points per event cluster, `N_{i_E}`.
    pub fn event_totals(&self) -> &[u64] {
        &self.event_totals
    }

    /// Sequences per sequence cluster, `n_{i_S}`.
    pub fn seq_sizes(&self) -> &[u64] {
        &self.seq_sizes
    }

    /// Event values per event cluster, `n_{i_E}`.
    pub fn event_sizes(&self) -> &[u64] {
        &self.event_sizes
    }

    pub fn n_points(&self) -> u64 {
        self.n_points
    }
}

/// Exact cell counts of `m` over `d` in one pass.
pub fn build_cell_stats(d: &CatsDataset, m: &GridModel) -> Result<CellStats> {
    m.check_dataset(d)?;
    let mut stats = CellStats::empty(m.k_seq(), m.k_time(), m.k_event());
    let group_interval = m.group_intervals();
    let (seqs, events, groups) = (d.seq_of_points(), d.event_of_points(), d.group_of_points());
    for i in 0..d.n_points() {
        stats.add(
            m.seq_assign[seqs[i] as usize],
            group_interval[groups[i] as usize],
            m.event_assign[events[i] as usize],
            1,
        );
    }
    for &c in &m.seq_assign {
        stats.seq_sizes[c as usize] += 1;
    }
    for &c in &m.event_assign {
        stats.event_sizes[c as usize] += 1;
    }
    Ok(stats)
}
