//! Encoded (sequence, time, event) point sets.
//!
//! A [`CatsDataset`] interns sequence ids and event labels in first-seen
//! order, keeps every row with its multiplicity, and indexes the points by
//! time rank. Points sharing a time value form a *tie group*; groups are the
//! atomic units of any time discretization.

use std::collections::HashMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{CatsError, Result};

/// One raw observation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub seq: String,
    pub t: f64,
    pub event: String,
}

impl Point {
    pub fn new(seq: impl Into<String>, t: f64, event: impl Into<String>) -> Self {
        Self { seq: seq.into(), t, event: event.into() }
    }
}

/// Column separator of a text input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Delimiter {
    /// Tab when the first data line contains one, comma otherwise.
    #[default]
    Auto,
    Tab,
    Comma,
}

impl Delimiter {
    fn resolve(self, first_line: &str) -> char {
        match self {
            Delimiter::Tab => '\t',
            Delimiter::Comma => ',',
            Delimiter::Auto if first_line.contains('\t') => '\t',
            Delimiter::Auto => ',',
        }
    }
}

/// Text input options.
#[derive(Debug, Clone, Copy, Default)]
pub struct InputFormat {
    pub delimiter: Delimiter,
    /// `None` auto-detects a header from a non-numeric time field in row 1.
    pub header: Option<bool>,
}

/// Immutable encoded dataset.
#[derive(Debug, Clone)]
pub struct CatsDataset {
    seq_labels: Vec<String>,
    event_labels: Vec<String>,
    seq_codes: HashMap<String, u32>,
    event_codes: HashMap<String, u32>,

    seq: Vec<u32>,
    event: Vec<u32>,
    time: Vec<f64>,

    /// Point indices sorted by time (stable on input order).
    rank_order: Vec<u32>,
    /// Tie group of each point.
    group_of: Vec<u32>,
    /// Distinct time values, ascending.
    group_times: Vec<f64>,
    /// `group_offsets[g]..group_offsets[g + 1]` is the rank span of group `g`.
    group_offsets: Vec<usize>,

    seq_counts: Vec<u64>,
    event_counts: Vec<u64>,
    seq_offsets: Vec<usize>,
    seq_members: Vec<u32>,
    event_offsets: Vec<usize>,
    event_members: Vec<u32>,
}

fn bucket(keys: &[u32], n_keys: usize) -> (Vec<u64>, Vec<usize>, Vec<u32>) {
    let mut counts = vec![0u64; n_keys];
    for &k in keys {
        counts[k as usize] += 1;
    }
    let mut offsets = Vec::with_capacity(n_keys + 1);
    offsets.push(0);
    for &c in &counts {
        offsets.push(offsets.last().unwrap() + c as usize);
    }
    let mut cursor = offsets.clone();
    let mut members = vec![0u32; keys.len()];
    for (i, &k) in keys.iter().enumerate() {
        members[cursor[k as usize]] = i as u32;
        cursor[k as usize] += 1;
    }
    (counts, offsets, members)
}

impl CatsDataset {
    /// Builds a dataset from raw points, interning labels in first-seen order.
    pub fn from_points<I>(points: I) -> Result<Self>
    where
        I: IntoIterator<Item = Point>,
    {
        let mut seq_labels = Vec::new();
        let mut event_labels = Vec::new();
        let mut seq_codes = HashMap::new();
        let mut event_codes = HashMap::new();
        let mut seq = Vec::new();
        let mut event = Vec::new();
        let mut time = Vec::new();

        for (row, p) in points.into_iter().enumerate() {
            if p.seq.is_empty() || p.event.is_empty() {
                return Err(CatsError::Parse {
                    line: row + 1,
                    message: "empty sequence id or event label".into(),
                });
            }
            if !p.t.is_finite() {
                return Err(CatsError::Parse { line: row + 1, message: "time is not finite".into() });
            }
            let s = *seq_codes.entry(p.seq.clone()).or_insert_with(|| {
                seq_labels.push(p.seq.clone());
                (seq_labels.len() - 1) as u32
            });
            let e = *event_codes.entry(p.event.clone()).or_insert_with(|| {
                event_labels.push(p.event.clone());
                (event_labels.len() - 1) as u32
            });
            seq.push(s);
            event.push(e);
            time.push(p.t);
        }
        if seq.is_empty() {
            return Err(CatsError::EmptyInput);
        }

        let mut rank_order: Vec<u32> = (0..time.len() as u32).collect();
        rank_order.sort_by(|&i, &j| time[i as usize].total_cmp(&time[j as usize]));

        let mut group_of = vec![0u32; time.len()];
        let mut group_times = Vec::new();
        let mut group_offsets = Vec::new();
        for (rank, &p) in rank_order.iter().enumerate() {
            let t = time[p as usize];
            if group_times.last() != Some(&t) {
                group_times.push(t);
                group_offsets.push(rank);
            }
            group_of[p as usize] = (group_times.len() - 1) as u32;
        }
        group_offsets.push(time.len());

        let (seq_counts, seq_offsets, seq_members) = bucket(&seq, seq_labels.len());
        let (event_counts, event_offsets, event_members) = bucket(&event, event_labels.len());

        Ok(Self {
            seq_labels,
            event_labels,
            seq_codes,
            event_codes,
            seq,
            event,
            time,
            rank_order,
            group_of,
            group_times,
            group_offsets,
            seq_counts,
            event_counts,
            seq_offsets,
            seq_members,
            event_offsets,
            event_members,
        })
    }

    /// Number of points `N`.
    pub fn n_points(&self) -> usize {
        self.seq.len()
    }

    /// Number of distinct sequences `n`.
    pub fn n_sequences(&self) -> usize {
        self.seq_labels.len()
    }

    /// Number of distinct events `a`.
    pub fn n_events(&self) -> usize {
        self.event_labels.len()
    }

    /// Number of distinct time values.
    pub fn n_time_groups(&self) -> usize {
        self.group_times.len()
    }

    pub fn seq_labels(&self) -> &[String] {
        &self.seq_labels
    }

    pub fn event_labels(&self) -> &[String] {
        &self.event_labels
    }

    pub fn seq_code(&self, label: &str) -> Option<u32> {
        self.seq_codes.get(label).copied()
    }

    pub fn event_code(&self, label: &str) -> Option<u32> {
        self.event_codes.get(label).copied()
    }

    /// Sequence code of each point, in input order.
    pub fn seq_of_points(&self) -> &[u32] {
        &self.seq
    }

    /// Event code of each point, in input order.
    pub fn event_of_points(&self) -> &[u32] {
        &self.event
    }

    pub fn times(&self) -> &[f64] {
        &self.time
    }

    /// Tie group of each point, in input order.
    pub fn group_of_points(&self) -> &[u32] {
        &self.group_of
    }

    /// Point indices sorted by time.
    pub fn rank_order(&self) -> &[u32] {
        &self.rank_order
    }

    /// Distinct time values, ascending.
    pub fn group_times(&self) -> &[f64] {
        &self.group_times
    }

    /// Rank at which tie group `g` starts; `group_start_rank(n_time_groups())` is `N`.
    pub fn group_start_rank(&self, g: usize) -> usize {
        self.group_offsets[g]
    }

    /// Point indices of tie group `g`.
    pub fn group_points(&self, g: usize) -> &[u32] {
        &self.rank_order[self.group_offsets[g]..self.group_offsets[g + 1]]
    }

    /// Index of the tie group starting exactly at `rank`, if any.
    pub fn group_at_rank(&self, rank: usize) -> Option<usize> {
        self.group_offsets.binary_search(&rank).ok()
    }

    /// Points per sequence, `n^S_i`.
    pub fn seq_counts(&self) -> &[u64] {
        &self.seq_counts
    }

    /// Points per event value, `n^E_i`.
    pub fn event_counts(&self) -> &[u64] {
        &self.event_counts
    }

    /// Point indices of sequence `s`.
    pub fn seq_points(&self, s: u32) -> &[u32] {
        &self.seq_members[self.seq_offsets[s as usize]..self.seq_offsets[s as usize + 1]]
    }

    /// Point indices carrying event `e`.
    pub fn event_points(&self, e: u32) -> &[u32] {
        &self.event_members[self.event_offsets[e as usize]..self.event_offsets[e as usize + 1]]
    }

    /// Decodes every point back to its labels, in input order.
    pub fn rows(&self) -> impl Iterator<Item = Point> + '_ {
        (0..self.n_points()).map(move |i| Point {
            seq: self.seq_labels[self.seq[i] as usize].clone(),
            t: self.time[i],
            event: self.event_labels[self.event[i] as usize].clone(),
        })
    }
}

/// Parses delimiter-separated `id, time, event` rows.
pub fn load_dataset<R: BufRead>(source: R, format: InputFormat) -> Result<CatsDataset> {
    let mut lines = Vec::new();
    for (idx, line) in source.lines().enumerate() {
        let line = line.map_err(|e| CatsError::Parse { line: idx + 1, message: e.to_string() })?;
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.trim().is_empty() {
            continue;
        }
        lines.push((idx + 1, trimmed.to_string()));
    }
    let Some((_, first)) = lines.first() else {
        return Err(CatsError::EmptyInput);
    };
    let sep = format.delimiter.resolve(first);

    let split = |line_no: usize, text: &str| -> Result<(String, String, String)> {
        let fields: Vec<&str> = text.split(sep).map(str::trim).collect();
        if fields.len() != 3 {
            return Err(CatsError::Parse {
                line: line_no,
                message: format!("expected 3 columns, found {}", fields.len()),
            });
        }
        Ok((fields[0].to_string(), fields[1].to_string(), fields[2].to_string()))
    };

    let skip_header = match format.header {
        Some(h) => h,
        None => {
            // A lone row with a bad time is a data error, not a header.
            let (line_no, text) = &lines[0];
            let (_, t, _) = split(*line_no, text)?;
            t.parse::<f64>().is_err() && lines.len() > 1
        }
    };

    let mut points = Vec::with_capacity(lines.len());
    for (line_no, text) in lines.iter().skip(usize::from(skip_header)) {
        let (s, t, e) = split(*line_no, text)?;
        let t: f64 = t.parse().map_err(|_| CatsError::Parse {
            line: *line_no,
            message: format!("time value {t:?} is not a number"),
        })?;
        if !t.is_finite() {
            return Err(CatsError::Parse { line: *line_no, message: "time value is not finite".into() });
        }
        if s.is_empty() || e.is_empty() {
            return Err(CatsError::Parse {
                line: *line_no,
                message: "empty sequence id or event label".into(),
            });
        }
        points.push(Point { seq: s, t, event: e });
    }
    CatsDataset::from_points(points)
}

/// Empirical cumulative distribution over integer counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountCdf {
    /// `(x, fraction of items with count <= x)` for each distinct count `x`, ascending.
    pub steps: Vec<(u64, f64)>,
}

impl CountCdf {
    fn from_counts(counts: &[u64]) -> Self {
        let mut sorted = counts.to_vec();
        sorted.sort_unstable();
        let total = sorted.len() as f64;
        let mut steps: Vec<(u64, f64)> = Vec::new();
        for (i, &c) in sorted.iter().enumerate() {
            let frac = (i + 1) as f64 / total;
            match steps.last_mut() {
                Some(last) if last.0 == c => last.1 = frac,
                _ => steps.push((c, frac)),
            }
        }
        if let Some(last) = steps.last_mut() {
            last.1 = 1.0;
        }
        Self { steps }
    }

    /// Fraction of items whose count is `<= x`.
    pub fn at(&self, x: u64) -> f64 {
        match self.steps.partition_point(|&(c, _)| c <= x) {
            0 => 0.0,
            i => self.steps[i - 1].1,
        }
    }
}

/// Marginal summaries of a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalStats {
    /// Distribution of the number of points per sequence.
    pub points_per_sequence: CountCdf,
    /// Point count at each distinct time value.
    pub points_per_time: Vec<(f64, u64)>,
    /// Distribution of the number of points per event value.
    pub points_per_event: CountCdf,
}

pub fn marginal_stats(d: &CatsDataset) -> MarginalStats {
    let points_per_time = (0..d.n_time_groups())
        .map(|g| (d.group_times()[g], d.group_points(g).len() as u64))
        .collect();
    MarginalStats {
        points_per_sequence: CountCdf::from_counts(d.seq_counts()),
        points_per_time,
        points_per_event: CountCdf::from_counts(d.event_counts()),
    }
}
