//! Synthetic pattern data with known ground truth, and recovery scoring.
//!
//! Each pattern splits the time range into segments, each allowing a subset
//! of the event alphabet. A point draws a sequence uniformly, a time uniformly
//! over the range, and an event from the segment's allowed set with
//! probability `1 - eta`, otherwise from its complement.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::cost::model_cost;
use crate::dataset::{CatsDataset, Point};
use crate::error::{CatsError, Result};
use crate::gridmodel::{Dimension, GridModel};
use crate::optimizer::{vns_optimize, OptimizerConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    /// Exclusive lower bound, except for the first segment of a pattern.
    pub lo: f64,
    /// Inclusive upper bound.
    pub hi: f64,
    pub events: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pattern {
    pub segments: Vec<Segment>,
}

impl Pattern {
    fn segment_at(&self, t: f64) -> Option<usize> {
        self.segments
            .iter()
            .enumerate()
            .position(|(j, s)| (if j == 0 { t >= s.lo } else { t > s.lo }) && t <= s.hi)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternSpec {
    pub patterns: Vec<Pattern>,
}

fn seg(lo: f64, hi: f64, events: &str) -> Segment {
    Segment { lo, hi, events: events.chars().map(String::from).collect() }
}

impl PatternSpec {
    /// Two patterns over `[0, 1000]` and the alphabet `a..l`.
    pub fn two_patterns() -> Self {
        Self {
            patterns: vec![
                Pattern {
                    segments: vec![
                        seg(0.0, 250.0, "abc"),
                        seg(250.0, 500.0, "def"),
                        seg(500.0, 750.0, "ghi"),
                        seg(750.0, 1000.0, "jkl"),
                    ],
                },
                Pattern {
                    segments: vec![
                        seg(0.0, 100.0, "jkl"),
                        seg(100.0, 400.0, "ghi"),
                        seg(400.0, 600.0, "def"),
                        seg(600.0, 1000.0, "abc"),
                    ],
                },
            ],
        }
    }

    fn validate(&self) -> Result<(f64, f64)> {
        let bad = |m: &str| Err(CatsError::InvalidArgument(m.to_string()));
        let Some(first) = self.patterns.first() else { return bad("no patterns") };
        let (Some(lo), Some(hi)) = (first.segments.first(), first.segments.last()) else {
            return bad("pattern without segments");
        };
        let range = (lo.lo, hi.hi);
        for p in &self.patterns {
            let (Some(a), Some(b)) = (p.segments.first(), p.segments.last()) else {
                return bad("pattern without segments");
            };
            if (a.lo, b.hi) != range {
                return bad("patterns must cover the same time range");
            }
            for w in p.segments.windows(2) {
                if w[0].hi != w[1].lo {
                    return bad("segments must be contiguous");
                }
            }
            if p.segments.iter().any(|s| s.hi.partial_cmp(&s.lo) != Some(Ordering::Greater) || s.events.is_empty()) {
                return bad("segments must be nonempty");
            }
        }
        if range.1.partial_cmp(&range.0) != Some(Ordering::Greater) {
            return bad("empty time range");
        }
        Ok(range)
    }

    /// Event alphabet in first-appearance order.
    pub fn alphabet(&self) -> Vec<String> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for e in self.patterns.iter().flat_map(|p| &p.segments).flat_map(|s| &s.events) {
            if seen.insert(e.clone()) {
                out.push(e.clone());
            }
        }
        out
    }

    /// Events grouped by identical membership over all segments.
    pub fn event_groups(&self) -> Vec<Vec<String>> {
        let mut order: Vec<Vec<(usize, usize)>> = Vec::new();
        let mut groups: Vec<Vec<String>> = Vec::new();
        for e in self.alphabet() {
            let sig: Vec<(usize, usize)> = self
                .patterns
                .iter()
                .enumerate()
                .flat_map(|(i, p)| {
                    p.segments.iter().enumerate().filter(|(_, s)| s.events.contains(&e)).map(move |(j, _)| (i, j))
                })
                .collect();
            match order.iter().position(|o| *o == sig) {
                Some(g) => groups[g].push(e),
                None => {
                    order.push(sig);
                    groups.push(vec![e]);
                }
            }
        }
        groups
    }

    /// Union of inner segment boundaries, ascending.
    pub fn boundaries(&self) -> Vec<f64> {
        let mut b: Vec<f64> = self
            .patterns
            .iter()
            .flat_map(|p| p.segments.iter().skip(1).map(|s| s.lo))
            .collect();
        b.sort_by(f64::total_cmp);
        b.dedup();
        b
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeType {
    #[default]
    Real,
    Integer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    /// Pattern index of every generated sequence label.
    pub seq_patterns: Vec<(String, usize)>,
    pub event_groups: Vec<Vec<String>>,
    pub boundaries: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synthetic {
    pub points: Vec<Point>,
    pub truth: GroundTruth,
}

impl Synthetic {
    pub fn dataset(&self) -> Result<CatsDataset> {
        CatsDataset::from_points(self.points.clone())
    }
}

/// Draws `n_points` points with `cm` sequences per pattern.
pub fn generate(spec: &PatternSpec, cm: usize, n_points: usize, eta: f64, seed: u64, time: TimeType) -> Result<Synthetic> {
    let (t0, t1) = spec.validate()?;
    if cm == 0 || n_points == 0 {
        return Err(CatsError::InvalidArgument("cm and the number of points must be positive".into()));
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(CatsError::InvalidArgument(format!("noise level {eta} outside [0, 1]")));
    }
    let alphabet = spec.alphabet();
    let n_seq = cm * spec.patterns.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(n_points);
    for _ in 0..n_points {
        let s = rng.random_range(0..n_seq);
        let pattern = &spec.patterns[s / cm];
        let mut t = rng.random_range(t0..=t1);
        if time == TimeType::Integer {
            t = t.round();
        }
        let allowed = &pattern.segments[pattern.segment_at(t).expect("time inside range")].events;
        let noisy = rng.random_bool(eta);
        let pool: Vec<&String> = if noisy {
            alphabet.iter().filter(|e| !allowed.contains(e)).collect()
        } else {
            allowed.iter().collect()
        };
        // A segment allowing the whole alphabet has no complement.
        let pool = if pool.is_empty() { allowed.iter().collect() } else { pool };
        let event = pool[rng.random_range(0..pool.len())].clone();
        points.push(Point::new(format!("s{s}"), t, event));
    }
    let truth = GroundTruth {
        seq_patterns: (0..n_seq).map(|s| (format!("s{s}"), s / cm)).collect(),
        event_groups: spec.event_groups(),
        boundaries: spec.boundaries(),
    };
    Ok(Synthetic { points, truth })
}

fn comb2(x: u64) -> f64 {
    (x as f64) * (x as f64 - 1.0) / 2.0
}

/// Pair-counting adjusted Rand index between two labelings.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(CatsError::InvalidArgument("labelings differ in length".into()));
    }
    if a.len() < 2 {
        return Err(CatsError::Undefined("adjusted Rand index needs at least two elements".into()));
    }
    let mut table: HashMap<(usize, usize), u64> = HashMap::new();
    let mut rows: HashMap<usize, u64> = HashMap::new();
    let mut cols: HashMap<usize, u64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let index: f64 = table.values().map(|&c| comb2(c)).sum();
    let sa: f64 = rows.values().map(|&c| comb2(c)).sum();
    let sb: f64 = cols.values().map(|&c| comb2(c)).sum();
    let expected = sa * sb / comb2(a.len() as u64);
    let max = (sa + sb) / 2.0;
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}

/// Symmetric maximum distance between found and true boundaries; infinite
/// when exactly one side is empty.
pub fn max_boundary_error(found: &[f64], truth: &[f64]) -> f64 {
    if found.is_empty() && truth.is_empty() {
        return 0.0;
    }
    if found.is_empty() || truth.is_empty() {
        return f64::INFINITY;
    }
    let nearest = |x: f64, ys: &[f64]| ys.iter().map(|y| (x - y).abs()).fold(f64::INFINITY, f64::min);
    let a = truth.iter().map(|&t| nearest(t, found)).fold(0.0, f64::max);
    let b = found.iter().map(|&f| nearest(f, truth)).fold(0.0, f64::max);
    a.max(b)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Recovery {
    pub k_s: usize,
    pub k_t: usize,
    pub k_e: usize,
    pub ari_seq: f64,
    pub ari_event: f64,
    pub max_boundary_error: f64,
}

/// Scores a model against the truth over the values present in `d`.
pub fn score(d: &CatsDataset, m: &GridModel, truth: &GroundTruth) -> Result<Recovery> {
    let members = |labels: &[String], dim: Dimension| -> Vec<Vec<String>> {
        (0..m.k(dim))
            .map(|c| m.members(dim, c).iter().map(|&v| labels[v as usize].clone()).collect())
            .collect()
    };
    score_labels(
        &members(d.seq_labels(), Dimension::Seq),
        &members(d.event_labels(), Dimension::Event),
        &m.boundaries(d),
        truth,
    )
}

fn labeled_ari(clusters: &[Vec<String>], truth: &HashMap<&str, usize>, what: &str) -> Result<f64> {
    let (mut found, mut want) = (Vec::new(), Vec::new());
    for (c, members) in clusters.iter().enumerate() {
        for label in members {
            let g = truth
                .get(label.as_str())
                .ok_or_else(|| CatsError::InvalidArgument(format!("{what} {label} missing from the truth")))?;
            found.push(c);
            want.push(*g);
        }
    }
    adjusted_rand_index(&found, &want)
}

/// Scores partitions given as member labels per cluster, and inner time
/// boundaries.
pub fn score_labels(
    seq_clusters: &[Vec<String>],
    event_clusters: &[Vec<String>],
    boundaries: &[f64],
    truth: &GroundTruth,
) -> Result<Recovery> {
    let pattern_of: HashMap<&str, usize> = truth.seq_patterns.iter().map(|(s, p)| (s.as_str(), *p)).collect();
    let group_of: HashMap<&str, usize> = truth
        .event_groups
        .iter()
        .enumerate()
        .flat_map(|(g, es)| es.iter().map(move |e| (e.as_str(), g)))
        .collect();
    Ok(Recovery {
        k_s: seq_clusters.len(),
        k_t: boundaries.len() + 1,
        k_e: event_clusters.len(),
        ari_seq: labeled_ari(seq_clusters, &pattern_of, "sequence")?,
        ari_event: labeled_ari(event_clusters, &group_of, "event")?,
        max_boundary_error: max_boundary_error(boundaries, &truth.boundaries),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub cm: usize,
    pub eta: f64,
    pub n_points: usize,
    pub seed: u64,
    pub k_s: usize,
    pub k_e: usize,
    pub k_t: usize,
    pub ari_seq: f64,
    pub ari_event: f64,
    pub max_boundary_error: f64,
    pub cost: f64,
    pub runtime_s: f64,
}

/// Generates, fits and scores one dataset.
pub fn run_case(
    spec: &PatternSpec,
    cm: usize,
    eta: f64,
    n_points: usize,
    seed: u64,
    cfg: &OptimizerConfig,
) -> Result<(GridModel, CurveRow)> {
    let syn = generate(spec, cm, n_points, eta, seed, TimeType::Real)?;
    let d = syn.dataset()?;
    let start = Instant::now();
    let (m, _) = vns_optimize(&d, &OptimizerConfig { seed, ..cfg.clone() });
    let runtime_s = start.elapsed().as_secs_f64();
    let r = score(&d, &m, &syn.truth)?;
    let row = CurveRow {
        cm,
        eta,
        n_points,
        seed,
        k_s: r.k_s,
        k_e: r.k_e,
        k_t: r.k_t,
        ari_seq: r.ari_seq,
        ari_event: r.ari_event,
        max_boundary_error: r.max_boundary_error,
        cost: model_cost(&d, &m)?.total,
        runtime_s,
    };
    Ok((m, row))
}

/// Recovery over the full cross product of settings.
pub fn ari_curve(
    spec: &PatternSpec,
    cms: &[usize],
    etas: &[f64],
    sizes: &[usize],
    seeds: &[u64],
    cfg: &OptimizerConfig,
) -> Result<Vec<CurveRow>> {
    let mut rows = Vec::new();
    for &cm in cms {
        for &eta in etas {
            for &n in sizes {
                for &seed in seeds {
                    rows.push(run_case(spec, cm, eta, n, seed, cfg)?.1);
                }
            }
        }
    }
    Ok(rows)
}
