//! Independent reference implementations used as test oracles.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};
use std::hash::Hash;

use catsgrid::{CatsDataset, GridModel, Point};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `ln k!` for `k <= n` by direct summation.
pub struct LnFact(Vec<f64>);

impl LnFact {
    pub fn new(n: usize) -> Self {
        let mut v = vec![0.0; n + 1];
        for i in 1..=n {
            v[i] = v[i - 1] + (i as f64).ln();
        }
        Self(v)
    }

    pub fn at(&self, k: u64) -> f64 {
        self.0[k as usize]
    }

    pub fn binom(&self, n: u64, k: u64) -> f64 {
        self.at(n) - self.at(k) - self.at(n - k)
    }
}

/// `ln` of the number of partitions of `m` items into at most `j` groups,
/// from Stirling numbers of the second kind in floating point.
pub fn ln_partitions(m: usize, j: usize) -> f64 {
    let mut s = vec![vec![0.0f64; m + 1]; m + 1];
    s[0][0] = 1.0;
    for i in 1..=m {
        for k in 1..=i {
            s[i][k] = k as f64 * s[i - 1][k] + s[i - 1][k - 1];
        }
    }
    s[m][1..=j.min(m)].iter().sum::<f64>().ln()
}

/// Interval index of a time value given the inner boundaries.
fn interval_of(t: f64, bounds: &[f64]) -> usize {
    bounds.iter().filter(|&&b| b < t).count()
}

/// The criterion recomputed from raw points.
pub fn oracle_cost(d: &CatsDataset, m: &GridModel) -> f64 {
    let n_points = d.n_points();
    let lf = LnFact::new(n_points + d.n_sequences() * d.n_events() * (m.k_time() + 1) + 16);
    let bounds = m.boundaries(d);
    let (ks, kt, ke) = (m.k_seq(), m.k_time(), m.k_event());

    let mut cells: HashMap<(usize, usize, usize), u64> = HashMap::new();
    let mut seq_tot = vec![0u64; ks];
    let mut ev_tot = vec![0u64; ke];
    let mut int_tot = vec![0u64; kt];
    let mut seq_val: HashMap<String, u64> = HashMap::new();
    let mut ev_val: HashMap<String, u64> = HashMap::new();
    for p in d.rows() {
        let s = m.seq_cluster_of(d.seq_code(&p.seq).unwrap());
        let e = m.event_cluster_of(d.event_code(&p.event).unwrap());
        let t = interval_of(p.t, &bounds);
        *cells.entry((s, t, e)).or_default() += 1;
        seq_tot[s] += 1;
        ev_tot[e] += 1;
        int_tot[t] += 1;
        *seq_val.entry(p.seq).or_default() += 1;
        *ev_val.entry(p.event).or_default() += 1;
    }
    let n = d.n_sequences();
    let a = d.n_events();
    let big_n = n_points as u64;
    let k = (ks * kt * ke) as u64;

    let mut seq_size = vec![0u64; ks];
    for v in 0..n as u32 {
        seq_size[m.seq_cluster_of(v)] += 1;
    }
    let mut ev_size = vec![0u64; ke];
    for v in 0..a as u32 {
        ev_size[m.event_cluster_of(v)] += 1;
    }

    let mut total = (n as f64).ln() + (a as f64).ln() + (big_n as f64).ln();
    total += ln_partitions(n, ks) + ln_partitions(a, ke);
    total += lf.binom(big_n + k - 1, k - 1);
    for c in 0..ks {
        total += lf.binom(seq_tot[c] + seq_size[c] - 1, seq_size[c] - 1);
    }
    for c in 0..ke {
        total += lf.binom(ev_tot[c] + ev_size[c] - 1, ev_size[c] - 1);
    }
    total += lf.at(big_n) - cells.values().map(|&c| lf.at(c)).sum::<f64>();
    total += seq_tot.iter().map(|&c| lf.at(c)).sum::<f64>() - seq_val.values().map(|&c| lf.at(c)).sum::<f64>();
    total += ev_tot.iter().map(|&c| lf.at(c)).sum::<f64>() - ev_val.values().map(|&c| lf.at(c)).sum::<f64>();
    total += int_tot.iter().map(|&c| lf.at(c)).sum::<f64>();
    total
}

/// Mutual information of a joint count table, in nats.
pub fn mutual_information<X: Hash + Eq + Clone, Y: Hash + Eq + Clone>(joint: &HashMap<(X, Y), u64>) -> f64 {
    let n: u64 = joint.values().sum();
    let mut px: HashMap<X, u64> = HashMap::new();
    let mut py: HashMap<Y, u64> = HashMap::new();
    for ((x, y), &c) in joint {
        *px.entry(x.clone()).or_default() += c;
        *py.entry(y.clone()).or_default() += c;
    }
    let n = n as f64;
    joint
        .iter()
        .filter(|(_, &c)| c > 0)
        .map(|((x, y), &c)| {
            let c = c as f64;
            c / n * (c * n / (px[x] as f64 * py[y] as f64)).ln()
        })
        .sum()
}

/// Per point `(seq cluster, interval, event cluster)` of a model.
pub fn point_cells(d: &CatsDataset, m: &GridModel) -> Vec<(usize, usize, usize)> {
    let bounds = m.boundaries(d);
    d.rows()
        .map(|p| {
            (
                m.seq_cluster_of(d.seq_code(&p.seq).unwrap()),
                interval_of(p.t, &bounds),
                m.event_cluster_of(d.event_code(&p.event).unwrap()),
            )
        })
        .collect()
}

pub fn random_dataset(rng: &mut ChaCha8Rng, n_points: usize, n_seq: u32, n_times: u32, n_ev: u32) -> CatsDataset {
    let pts: Vec<Point> = (0..n_points)
        .map(|_| {
            Point::new(
                format!("s{}", rng.random_range(0..n_seq)),
                f64::from(rng.random_range(0..n_times)),
                format!("e{}", rng.random_range(0..n_ev)),
            )
        })
        .collect();
    CatsDataset::from_points(pts).unwrap()
}

pub fn random_model(rng: &mut ChaCha8Rng, d: &CatsDataset) -> GridModel {
    let ks = rng.random_range(1..=d.n_sequences().min(5)) as u32;
    let ke = rng.random_range(1..=d.n_events().min(5)) as u32;
    let seq = (0..d.n_sequences()).map(|_| rng.random_range(0..ks)).collect();
    let ev = (0..d.n_events()).map(|_| rng.random_range(0..ke)).collect();
    let p = rng.random_range(0.0..0.4);
    let mut starts: Vec<u32> = (1..d.n_time_groups() as u32).filter(|_| rng.random_bool(p)).collect();
    starts.insert(0, 0);
    GridModel::new(d, seq, ev, starts).unwrap()
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A realization of the two-behaviour toy: S1, S2 emit A/B before t=50 and
/// C/D after; S3, S4 the opposite.
pub fn toy_points(per_sequence: usize, seed: u64) -> Vec<Point> {
    let mut rng = seeded(seed);
    let mut pts = Vec::new();
    for (s, early) in [("S1", true), ("S2", true), ("S3", false), ("S4", false)] {
        for _ in 0..per_sequence {
            let t: f64 = rng.random_range(0.0..100.0);
            let ev = if (t < 50.0) == early {
                ["A", "B"][rng.random_range(0..2)]
            } else {
                ["C", "D"][rng.random_range(0..2)]
            };
            pts.push(Point::new(s, (t * 100.0).round() / 100.0, ev));
        }
    }
    pts
}

/// Members of every cluster of one dimension, as sorted label sets.
pub fn groupings(labels: &[String], assign: &[u32]) -> Vec<Vec<String>> {
    let mut by: BTreeMap<u32, Vec<String>> = BTreeMap::new();
    for (v, &c) in assign.iter().enumerate() {
        by.entry(c).or_default().push(labels[v].clone());
    }
    let mut out: Vec<Vec<String>> = by
        .into_values()
        .map(|mut g| {
            g.sort();
            g
        })
        .collect();
    out.sort();
    out
}
