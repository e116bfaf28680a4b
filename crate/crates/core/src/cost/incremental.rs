//! Mutable grid with slot-indexed parts and in-place updates.
//!
//! Parts are addressed by slot. A merge or a move that empties a part leaves
//! a dead slot behind instead of renumbering, so indices held by callers stay
//! valid. Time slots are chained in chronological order.

use rustc_hash::FxHashMap;

use super::numeric::log_factorial as lnf;
use super::{cluster_term, evaluate, structure_prior, CostBreakdown};
use crate::dataset::CatsDataset;
use crate::error::{CatsError, Result};
use crate::gridmodel::{build_cell_stats, pack, unpack, CellStats, Dimension, GridModel, Merge, SliceMap};

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub struct WorkingGrid<'d> {
    d: &'d CatsDataset,
    seq_of: Vec<u32>,
    event_of: Vec<u32>,
    interval_of_group: Vec<u32>,
    /// `[start, end)` tie groups per time slot; dead slots are empty.
    spans: Vec<(u32, u32)>,
    next: Vec<u32>,
    prev: Vec<u32>,
    first_interval: u32,
    stats: CellStats,
    live: [usize; 3],
}

/// `lnf(y - x) + lnf(z + x) - lnf(y) - lnf(z)`: change of `sum ln cell!`
/// when `x` points go from a cell holding `y` to one holding `z`.
#[inline]
fn transfer(y: u64, z: u64, x: u64) -> f64 {
    lnf(y - x) + lnf(z + x) - lnf(y) - lnf(z)
}

impl<'d> WorkingGrid<'d> {
    pub fn new(d: &'d CatsDataset, m: &GridModel) -> Result<Self> {
        let stats = build_cell_stats(d, m)?;
        Self::with_stats(d, m, stats)
    }

    pub fn with_stats(d: &'d CatsDataset, m: &GridModel, stats: CellStats) -> Result<Self> {
        m.check_dataset(d)?;
        if stats.seq_slices.len() != m.k_seq()
            || stats.time_slices.len() != m.k_time()
            || stats.event_slices.len() != m.k_event()
            || stats.n_points != d.n_points() as u64
        {
            return Err(CatsError::InconsistentModel("cell statistics do not match the model".into()));
        }
        let kt = m.k_time();
        let spans: Vec<(u32, u32)> = (0..kt)
            .map(|j| {
                let (a, b) = m.interval_groups(j);
                (a as u32, b as u32)
            })
            .collect();
        let next = (0..kt).map(|j| if j + 1 < kt { j as u32 + 1 } else { NONE }).collect();
        let prev = (0..kt).map(|j| if j > 0 { j as u32 - 1 } else { NONE }).collect();
        Ok(Self {
            d,
            seq_of: m.seq_assignment().to_vec(),
            event_of: m.event_assignment().to_vec(),
            interval_of_group: m.group_intervals(),
            spans,
            next,
            prev,
            first_interval: 0,
            stats,
            live: [m.k_seq(), kt, m.k_event()],
        })
    }

    pub fn dataset(&self) -> &'d CatsDataset {
        self.d
    }

    pub fn stats(&self) -> &CellStats {
        &self.stats
    }

    pub fn k(&self, dim: Dimension) -> usize {
        self.live[super::dim_index(dim)]
    }

    pub fn seq_of(&self) -> &[u32] {
        &self.seq_of
    }

    pub fn event_of(&self) -> &[u32] {
        &self.event_of
    }

    pub fn slot_of(&self, dim: Dimension, value: u32) -> usize {
        match dim {
            Dimension::Seq => self.seq_of[value as usize] as usize,
            Dimension::Event => self.event_of[value as usize] as usize,
            Dimension::Time => self.interval_of_group[value as usize] as usize,
        }
    }

    /// Number of values in a slot (sequences, events, or tie groups).
    pub fn slot_size(&self, dim: Dimension, slot: usize) -> u64 {
        match dim {
            Dimension::Seq => self.stats.seq_sizes[slot],
            Dimension::Event => self.stats.event_sizes[slot],
            Dimension::Time => u64::from(self.spans[slot].1 - self.spans[slot].0),
        }
    }

    pub fn slot_total(&self, dim: Dimension, slot: usize) -> u64 {
        match dim {
            Dimension::Seq => self.stats.seq_totals[slot],
            Dimension::Event => self.stats.event_totals[slot],
            Dimension::Time => self.stats.time_totals[slot],
        }
    }

    /// Live slots; time slots come in chronological order.
    pub fn live_slots(&self, dim: Dimension) -> Vec<usize> {
        match dim {
            Dimension::Time => {
                let mut out = Vec::with_capacity(self.live[1]);
                let mut j = self.first_interval;
                while j != NONE {
                    out.push(j as usize);
                    j = self.next[j as usize];
                }
                out
            }
            _ => (0..self.slot_count(dim)).filter(|&c| self.slot_size(dim, c) > 0).collect(),
        }
    }

    pub fn slot_count(&self, dim: Dimension) -> usize {
        match dim {
            Dimension::Seq => self.stats.seq_sizes.len(),
            Dimension::Event => self.stats.event_sizes.len(),
            Dimension::Time => self.spans.len(),
        }
    }

    /// Time slot following `slot`, if any.
    pub fn next_interval(&self, slot: usize) -> Option<usize> {
        match self.next[slot] {
            NONE => None,
            j => Some(j as usize),
        }
    }

    pub fn interval_span(&self, slot: usize) -> (usize, usize) {
        let (a, b) = self.spans[slot];
        (a as usize, b as usize)
    }

    pub fn cost(&self) -> CostBreakdown {
        evaluate(self.d, &self.stats, self.live[0], self.live[1], self.live[2])
    }

    /// Compacts live slots into a canonical [`GridModel`].
    pub fn to_model(&self) -> GridModel {
        let starts: Vec<u32> = self.live_slots(Dimension::Time).iter().map(|&j| self.spans[j].0).collect();
        GridModel::new(self.d, self.seq_of.clone(), self.event_of.clone(), starts)
            .expect("working grid stays consistent")
    }

    fn slices(&self, dim: Dimension) -> &[SliceMap] {
        match dim {
            Dimension::Seq => &self.stats.seq_slices,
            Dimension::Time => &self.stats.time_slices,
            Dimension::Event => &self.stats.event_slices,
        }
    }

    fn structure_delta(&self, dks: usize, dkt: usize, dke: usize) -> f64 {
        let [ks, kt, ke] = self.live;
        structure_prior(self.d, ks - dks, kt - dkt, ke - dke) - structure_prior(self.d, ks, kt, ke)
    }

    pub(crate) fn check_merge(&self, g: Merge) -> Result<()> {
        let Merge { dim, a, b } = g;
        let n = self.slot_count(dim);
        if a == b || a >= n || b >= n || self.slot_size(dim, a) == 0 || self.slot_size(dim, b) == 0 {
            return Err(CatsError::InvalidCandidate(format!("cannot merge parts {a} and {b} of {dim}")));
        }
        if dim == Dimension::Time && self.next[a.min(b)] != a.max(b) as u32 {
            return Err(CatsError::InvalidCandidate(format!("time intervals {a} and {b} are not adjacent")));
        }
        Ok(())
    }

    pub(crate) fn check_value_move(&self, dim: Dimension, value: u32, target: usize) -> Result<()> {
        let n_values = match dim {
            Dimension::Seq => self.seq_of.len(),
            Dimension::Event => self.event_of.len(),
            Dimension::Time => {
                return Err(CatsError::InvalidCandidate("time values move via boundary shifts".into()))
            }
        };
        if value as usize >= n_values || target >= self.slot_count(dim) || self.slot_size(dim, target) == 0 {
            return Err(CatsError::InvalidCandidate(format!("value {value} or cluster {target} out of range")));
        }
        if self.slot_of(dim, value) == target {
            return Err(CatsError::InvalidCandidate(format!("value {value} already in cluster {target}")));
        }
        Ok(())
    }

    /// Cost change of merging slots `a` and `b`. For time, `b` must follow `a`
    /// (either order is accepted).
    pub fn merge_delta(&self, dim: Dimension, a: usize, b: usize) -> f64 {
        self.merge_local_delta(dim, a, b) + self.merge_structure_delta(dim)
    }

    /// The part of a merge delta that depends on the part counts only; it is
    /// shared by every candidate of one dimension.
    pub fn merge_structure_delta(&self, dim: Dimension) -> f64 {
        match dim {
            Dimension::Seq => self.structure_delta(1, 0, 0),
            Dimension::Time => self.structure_delta(0, 1, 0),
            Dimension::Event => self.structure_delta(0, 0, 1),
        }
    }

    /// The part of a merge delta that depends on the two slots only.
    pub fn merge_local_delta(&self, dim: Dimension, a: usize, b: usize) -> f64 {
        let slices = self.slices(dim);
        let (small, large) = if slices[a].len() <= slices[b].len() {
            (&slices[a], &slices[b])
        } else {
            (&slices[b], &slices[a])
        };
        let mut cells = 0.0;
        for (key, &x) in small {
            if let Some(&y) = large.get(key) {
                cells += lnf(x) + lnf(y) - lnf(x + y);
            }
        }
        let (ta, tb) = (self.slot_total(dim, a), self.slot_total(dim, b));
        let marginal = lnf(ta + tb) - lnf(ta) - lnf(tb);
        let prior = match dim {
            Dimension::Time => 0.0,
            _ => {
                let (na, nb) = (self.slot_size(dim, a), self.slot_size(dim, b));
                cluster_term(ta + tb, na + nb) - cluster_term(ta, na) - cluster_term(tb, nb)
            }
        };
        cells + marginal + prior
    }

    /// Merges slot `b` into slot `a` (for time, the two must be adjacent;
    /// the earlier slot survives).
    pub fn merge(&mut self, dim: Dimension, a: usize, b: usize) -> usize {
        match dim {
            Dimension::Seq => {
                let moved: Vec<(u64, u64)> = self.stats.seq_slices[b].drain().collect();
                for (key, c) in moved {
                    let (t, e) = unpack(key);
                    self.stats.seq_totals[b] -= c;
                    self.stats.time_totals[t as usize] -= c;
                    self.stats.event_totals[e as usize] -= c;
                    self.stats.n_points -= c;
                    remove_key(&mut self.stats.time_slices[t as usize], pack(b as u32, e), c);
                    remove_key(&mut self.stats.event_slices[e as usize], pack(b as u32, t), c);
                    self.stats.add(a as u32, t, e, c);
                }
                for s in self.seq_of.iter_mut() {
                    if *s as usize == b {
                        *s = a as u32;
                    }
                }
                self.stats.seq_sizes[a] += self.stats.seq_sizes[b];
                self.stats.seq_sizes[b] = 0;
                self.live[0] -= 1;
                a
            }
            Dimension::Event => {
                let moved: Vec<(u64, u64)> = self.stats.event_slices[b].drain().collect();
                for (key, c) in moved {
                    let (s, t) = unpack(key);
                    self.stats.event_totals[b] -= c;
                    self.stats.seq_totals[s as usize] -= c;
                    self.stats.time_totals[t as usize] -= c;
                    self.stats.n_points -= c;
                    remove_key(&mut self.stats.seq_slices[s as usize], pack(t, b as u32), c);
                    remove_key(&mut self.stats.time_slices[t as usize], pack(s, b as u32), c);
                    self.stats.add(s, t, a as u32, c);
                }
                for e in self.event_of.iter_mut() {
                    if *e as usize == b {
                        *e = a as u32;
                    }
                }
                self.stats.event_sizes[a] += self.stats.event_sizes[b];
                self.stats.event_sizes[b] = 0;
                self.live[2] -= 1;
                a
            }
            Dimension::Time => {
                let (left, right) = if self.next[a] == b as u32 { (a, b) } else { (b, a) };
                debug_assert_eq!(self.next[left], right as u32);
                let moved: Vec<(u64, u64)> = self.stats.time_slices[right].drain().collect();
                for (key, c) in moved {
                    let (s, e) = unpack(key);
                    self.stats.time_totals[right] -= c;
                    self.stats.seq_totals[s as usize] -= c;
                    self.stats.event_totals[e as usize] -= c;
                    self.stats.n_points -= c;
                    remove_key(&mut self.stats.seq_slices[s as usize], pack(right as u32, e), c);
                    remove_key(&mut self.stats.event_slices[e as usize], pack(s, right as u32), c);
                    self.stats.add(s, left as u32, e, c);
                }
                let (rs, re) = self.spans[right];
                self.interval_of_group[rs as usize..re as usize].fill(left as u32);
                self.spans[left].1 = re;
                self.spans[right] = (0, 0);
                let after = self.next[right];
                self.next[left] = after;
                if after != NONE {
                    self.prev[after as usize] = left as u32;
                }
                self.next[right] = NONE;
                self.prev[right] = NONE;
                self.live[1] -= 1;
                left
            }
        }
    }

    /// Cell contributions of one sequence or event value, keyed like the
    /// slices of its dimension.
    pub fn value_cells(&self, dim: Dimension, value: u32) -> Vec<(u64, u64)> {
        let d = self.d;
        let groups = d.group_of_points();
        let mut acc: FxHashMap<u64, u64> = FxHashMap::default();
        match dim {
            Dimension::Seq => {
                let events = d.event_of_points();
                for &p in d.seq_points(value) {
                    let t = self.interval_of_group[groups[p as usize] as usize];
                    let e = self.event_of[events[p as usize] as usize];
                    *acc.entry(pack(t, e)).or_insert(0) += 1;
                }
            }
            Dimension::Event => {
                let seqs = d.seq_of_points();
                for &p in d.event_points(value) {
                    let s = self.seq_of[seqs[p as usize] as usize];
                    let t = self.interval_of_group[groups[p as usize] as usize];
                    *acc.entry(pack(s, t)).or_insert(0) += 1;
                }
            }
            Dimension::Time => unreachable!("time values are tie groups"),
        }
        let mut cells: Vec<(u64, u64)> = acc.into_iter().collect();
        cells.sort_unstable();
        cells
    }

    fn value_total(&self, dim: Dimension, value: u32) -> u64 {
        match dim {
            Dimension::Seq => self.d.seq_counts()[value as usize],
            Dimension::Event => self.d.event_counts()[value as usize],
            Dimension::Time => unreachable!(),
        }
    }

    pub fn move_delta(&self, dim: Dimension, value: u32, target: usize) -> f64 {
        let cells = self.value_cells(dim, value);
        self.move_delta_with(dim, value, &cells, target)
    }

    /// As [`move_delta`](Self::move_delta) with precomputed `value_cells`.
    pub fn move_delta_with(&self, dim: Dimension, value: u32, cells: &[(u64, u64)], target: usize) -> f64 {
        let source = self.slot_of(dim, value);
        debug_assert_ne!(source, target);
        let slices = self.slices(dim);
        let (from, to) = (&slices[source], &slices[target]);
        let mut cell_delta = 0.0;
        for &(key, x) in cells {
            let y = from[&key];
            let z = to.get(&key).copied().unwrap_or(0);
            cell_delta -= transfer(y, z, x);
        }
        let nv = self.value_total(dim, value);
        let (tf, tt) = (self.slot_total(dim, source), self.slot_total(dim, target));
        let (sf, st) = (self.slot_size(dim, source), self.slot_size(dim, target));
        let marginal = transfer(tf, tt, nv);
        let prior = cluster_term(tf - nv, sf - 1) + cluster_term(tt + nv, st + 1)
            - cluster_term(tf, sf)
            - cluster_term(tt, st);
        let structure = if sf == 1 {
            match dim {
                Dimension::Seq => self.structure_delta(1, 0, 0),
                _ => self.structure_delta(0, 0, 1),
            }
        } else {
            0.0
        };
        cell_delta + marginal + prior + structure
    }

    /// Moves a sequence or event value to another live slot.
    pub fn move_value(&mut self, dim: Dimension, value: u32, target: usize) {
        let cells = self.value_cells(dim, value);
        let source = self.slot_of(dim, value);
        let (source32, target32) = (source as u32, target as u32);
        for (key, x) in cells {
            let (u, w) = unpack(key);
            match dim {
                Dimension::Seq => {
                    self.stats.remove(source32, u, w, x);
                    self.stats.add(target32, u, w, x);
                }
                _ => {
                    self.stats.remove(u, w, source32, x);
                    self.stats.add(u, w, target32, x);
                }
            }
        }
        let (sizes, assign, live) = match dim {
            Dimension::Seq => (&mut self.stats.seq_sizes, &mut self.seq_of, &mut self.live[0]),
            _ => (&mut self.stats.event_sizes, &mut self.event_of, &mut self.live[2]),
        };
        sizes[source] -= 1;
        sizes[target] += 1;
        assign[value as usize] = target32;
        if sizes[source] == 0 {
            *live -= 1;
        }
    }

    /// Per `(s, e)` point counts of the tie groups `[from, to)`.
    fn group_range_cells(&self, from: usize, to: usize) -> Vec<(u64, u64)> {
        let d = self.d;
        let (seqs, events) = (d.seq_of_points(), d.event_of_points());
        let mut acc: FxHashMap<u64, u64> = FxHashMap::default();
        let (r0, r1) = (d.group_start_rank(from), d.group_start_rank(to));
        for &p in &d.rank_order()[r0..r1] {
            let s = self.seq_of[seqs[p as usize] as usize];
            let e = self.event_of[events[p as usize] as usize];
            *acc.entry(pack(s, e)).or_insert(0) += 1;
        }
        let mut cells: Vec<(u64, u64)> = acc.into_iter().collect();
        cells.sort_unstable();
        cells
    }

    /// Cost change of moving the start of the interval after `left` to tie
    /// group `group`, which must lie strictly inside the union of both.
    pub fn shift_delta(&self, left: usize, group: usize) -> f64 {
        let right = self.next[left] as usize;
        let (ls, _) = self.spans[left];
        let (rs, re) = self.spans[right];
        debug_assert!(group > ls as usize && group < re as usize && group != rs as usize);
        let (from, to, lo, hi) = if group < rs as usize {
            (left, right, group, rs as usize)
        } else {
            (right, left, rs as usize, group)
        };
        let cells = self.group_range_cells(lo, hi);
        let moved: u64 = cells.iter().map(|&(_, c)| c).sum();
        let (from_slice, to_slice) = (&self.stats.time_slices[from], &self.stats.time_slices[to]);
        let mut delta = 0.0;
        for (key, x) in cells {
            let y = from_slice[&key];
            let z = to_slice.get(&key).copied().unwrap_or(0);
            delta -= transfer(y, z, x);
        }
        delta + transfer(self.stats.time_totals[from], self.stats.time_totals[to], moved)
    }

    /// Moves the boundary after `left` to tie group `group`.
    pub fn shift(&mut self, left: usize, group: usize) {
        let right = self.next[left] as usize;
        let (rs, _) = self.spans[right];
        let (from, to, lo, hi) = if group < rs as usize {
            (left, right, group, rs as usize)
        } else {
            (right, left, rs as usize, group)
        };
        for (key, x) in self.group_range_cells(lo, hi) {
            let (s, e) = unpack(key);
            self.stats.remove(s, from as u32, e, x);
            self.stats.add(s, to as u32, e, x);
        }
        self.interval_of_group[lo..hi].fill(to as u32);
        self.spans[left].1 = group as u32;
        self.spans[right].0 = group as u32;
    }
}

fn remove_key(map: &mut SliceMap, key: u64, c: u64) {
    let slot = map.get_mut(&key).expect("cell present");
    *slot -= c;
    if *slot == 0 {
        map.remove(&key);
    }
}
