//! Grid search: bounded random initialization, greedy bottom-up merging,
//! alternating local moves, and multi-start restarts.
//!
//! Every chain is `init -> moves -> greedy merges -> moves`. All accepted
//! steps strictly decrease the cost by more than the tolerance, so the cost
//! within a chain never increases. Candidate deltas are evaluated in parallel
//! but the winner is always picked by a sequential scan in canonical order,
//! which makes results independent of the worker count.

use std::fmt;
use std::io::{self, Write};
use std::time::{Duration, Instant};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::WorkingGrid;
use crate::dataset::CatsDataset;
use crate::gridmodel::{Dimension, GridModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Number of independent restarts.
    pub vns_rounds: usize,
    pub seed: u64,
    /// Cap on initial parts per dimension; `None` means `ceil(sqrt(N))`.
    pub max_initial_parts: Option<usize>,
    /// Stop starting new restarts once this much time has elapsed.
    pub time_budget: Option<Duration>,
    /// Minimum cost decrease for a step to be accepted.
    pub tolerance: f64,
    /// Boundary shift window in ranks; `None` means `ceil(sqrt(N / k_T))`.
    pub boundary_window: Option<usize>,
    /// Safety cap on move cycles per post-optimization call.
    pub max_move_cycles: usize,
    /// When greedy merging stalls, follow the best merges down to the null
    /// model and jump to the cheapest grid on that path if it improves.
    pub lookahead: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            vns_rounds: 10,
            seed: 0,
            max_initial_parts: None,
            time_budget: None,
            tolerance: 1e-9,
            boundary_window: None,
            max_move_cycles: 100,
            lookahead: true,
        }
    }
}

impl OptimizerConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    fn initial_cap(&self, d: &CatsDataset) -> usize {
        self.max_initial_parts
            .unwrap_or_else(|| (d.n_points() as f64).sqrt().ceil() as usize)
            .max(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Phase {
    Init,
    PreMoves,
    Greedy,
    Lookahead,
    PostMoves,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Phase::Init => "init",
            Phase::PreMoves => "pre",
            Phase::Greedy => "greedy",
            Phase::Lookahead => "lookahead",
            Phase::PostMoves => "post",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub round: usize,
    pub phase: Phase,
    pub step: usize,
    pub action: String,
    pub delta: f64,
    pub cost: f64,
    pub elapsed_s: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OptimizationTrace {
    pub steps: Vec<TraceStep>,
    /// Final cost of each completed restart.
    pub round_costs: Vec<f64>,
    /// Best cost found after each completed restart.
    pub round_best: Vec<f64>,
}

impl OptimizationTrace {
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "round,phase,step,action,delta,cost,elapsed_s")?;
        for s in &self.steps {
            writeln!(
                w,
                "{},{},{},{},{},{},{:.6}",
                s.round, s.phase, s.step, s.action, s.delta, s.cost, s.elapsed_s
            )?;
        }
        Ok(())
    }

    /// Costs of the given round in commit order.
    pub fn round_cost_sequence(&self, round: usize) -> Vec<f64> {
        self.steps.iter().filter(|s| s.round == round).map(|s| s.cost).collect()
    }
}

/// Snapshot handed to progress hooks after each committed step.
#[derive(Debug, Clone, Copy)]
pub struct Progress {
    pub round: usize,
    pub phase: Phase,
    pub step: usize,
    pub cost: f64,
    pub elapsed: Duration,
}

struct Recorder<'h> {
    trace: OptimizationTrace,
    round: usize,
    step: usize,
    start: Instant,
    hook: Option<&'h mut dyn FnMut(&Progress)>,
}

impl<'h> Recorder<'h> {
    fn new(hook: Option<&'h mut dyn FnMut(&Progress)>) -> Self {
        Self { trace: OptimizationTrace::default(), round: 0, step: 0, start: Instant::now(), hook }
    }

    fn record(&mut self, phase: Phase, action: String, delta: f64, cost: f64) {
        let elapsed = self.start.elapsed();
        self.trace.steps.push(TraceStep {
            round: self.round,
            phase,
            step: self.step,
            action,
            delta,
            cost,
            elapsed_s: elapsed.as_secs_f64(),
        });
        if let Some(hook) = self.hook.as_mut() {
            hook(&Progress { round: self.round, phase, step: self.step, cost, elapsed });
        }
        self.step += 1;
    }
}

/// `k` non-empty random groups over `n` values.
fn random_assignment(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Vec<u32> {
    let k = k.clamp(1, n);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut assign = vec![0u32; n];
    for (i, &v) in order.iter().enumerate() {
        assign[v] = if i < k { i as u32 } else { rng.random_range(0..k as u32) };
    }
    assign
}

/// Equal-frequency split of the time axis into at most `k` intervals whose
/// boundaries fall between tie groups.
fn equal_frequency_starts(d: &CatsDataset, k: usize) -> Vec<u32> {
    let groups = d.n_time_groups();
    let k = k.clamp(1, groups);
    let n = d.n_points();
    let mut starts = vec![0u32];
    for i in 1..k {
        let target = i * n / k;
        // first group starting at or after the target rank
        let (mut lo, mut hi) = (0usize, groups);
        while lo < hi {
            let mid = (lo + hi) / 2;
            if d.group_start_rank(mid) < target {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        let g = lo.min(groups - 1) as u32;
        if g > *starts.last().unwrap() {
            starts.push(g);
        }
    }
    starts
}

/// Random model with at most `cfg.max_initial_parts` (default `ceil(sqrt(N))`)
/// parts per dimension.
pub fn build_initial_model(d: &CatsDataset, cfg: &OptimizerConfig, rng: &mut ChaCha8Rng) -> GridModel {
    build_initial_with_cap(d, cfg.initial_cap(d), rng)
}

fn build_initial_with_cap(d: &CatsDataset, cap: usize, rng: &mut ChaCha8Rng) -> GridModel {
    let seq = random_assignment(d.n_sequences(), cap, rng);
    let event = random_assignment(d.n_events(), cap, rng);
    let starts = equal_frequency_starts(d, cap);
    GridModel::new(d, seq, event, starts).expect("initial model is valid")
}

/// A merge candidate in canonical order: dimension, then slots.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Candidate {
    pub dim: Dimension,
    pub a: usize,
    pub b: usize,
    pub delta: f64,
}

/// Local merge deltas of the live pairs, kept across merges. A merge leaves
/// the pairs of its own dimension unchanged unless they involve one of the
/// merged parts; pairs of the other two dimensions must be recomputed.
#[derive(Debug, Clone)]
pub(crate) struct MergeEvaluator {
    /// Dense `width x width` per dimension, indexed `a * width + b` with
    /// `a < b`; NaN marks a stale entry.
    local: [Vec<f64>; 3],
    width: [usize; 3],
}

impl MergeEvaluator {
    pub(crate) fn new(grid: &WorkingGrid<'_>) -> Self {
        let width = Dimension::ALL.map(|dim| grid.slot_count(dim));
        Self { local: width.map(|w| vec![f64::NAN; w * w]), width }
    }

    /// All live candidates in canonical order.
    pub(crate) fn candidates(&mut self, grid: &WorkingGrid<'_>) -> Vec<Candidate> {
        let mut out = Vec::new();
        for (k, dim) in Dimension::ALL.into_iter().enumerate() {
            let live = grid.live_slots(dim);
            if live.len() < 2 {
                continue;
            }
            let w = self.width[k];
            let pairs: Vec<(usize, usize)> = if dim == Dimension::Time {
                live.windows(2).map(|p| (p[0], p[1])).collect()
            } else {
                let mut pairs = Vec::with_capacity(live.len() * (live.len() - 1) / 2);
                for (i, &a) in live.iter().enumerate() {
                    for &b in &live[i + 1..] {
                        pairs.push((a, b));
                    }
                }
                pairs
            };
            let table = &mut self.local[k];
            let stale: Vec<(usize, usize)> = pairs.iter().copied().filter(|&(a, b)| table[a * w + b].is_nan()).collect();
            let fresh: Vec<f64> = stale
                .par_iter()
                .with_min_len(16)
                .map(|&(a, b)| grid.merge_local_delta(dim, a, b))
                .collect();
            for (&(a, b), v) in stale.iter().zip(fresh) {
                table[a * w + b] = v;
            }
            let structure = grid.merge_structure_delta(dim);
            out.extend(pairs.into_iter().map(|(a, b)| Candidate { dim, a, b, delta: table[a * w + b] + structure }));
        }
        out
    }

    pub(crate) fn apply(&mut self, grid: &mut WorkingGrid<'_>, c: Candidate) {
        grid.merge(c.dim, c.a, c.b);
        for (k, dim) in Dimension::ALL.into_iter().enumerate() {
            let w = self.width[k];
            let table = &mut self.local[k];
            if dim != c.dim {
                table.fill(f64::NAN);
                continue;
            }
            for x in 0..w {
                for part in [c.a, c.b] {
                    table[part * w + x] = f64::NAN;
                    table[x * w + part] = f64::NAN;
                }
            }
        }
    }
}

/// First candidate in canonical order among those within `tol` of the minimum.
pub(crate) fn pick_best(cands: &[Candidate], tol: f64) -> Option<Candidate> {
    let mut best: Option<Candidate> = None;
    for c in cands {
        match best {
            Some(b) if c.delta >= b.delta - tol => {}
            _ => best = Some(*c),
        }
    }
    best
}

fn greedy_in_place(
    grid: &mut WorkingGrid<'_>,
    eval: &mut MergeEvaluator,
    tol: f64,
    rec: &mut Recorder<'_>,
    mut cost: f64,
) -> f64 {
    loop {
        let cands = eval.candidates(grid);
        let Some(best) = pick_best(&cands, tol) else { break };
        if best.delta >= -tol {
            break;
        }
        eval.apply(grid, best);
        cost += best.delta;
        rec.record(Phase::Greedy, format!("merge {} {} {}", best.dim, best.a, best.b), best.delta, cost);
    }
    cost
}

/// Merges along the best-merge path from `grid` to the null model, up to the
/// cheapest grid on it; `None` unless that grid improves by more than `tol`.
fn lookahead_path(grid: &WorkingGrid<'_>, eval: &MergeEvaluator, tol: f64) -> Option<(Vec<Candidate>, f64)> {
    let mut scratch = grid.clone();
    let mut eval = eval.clone();
    let mut path = Vec::new();
    let (mut acc, mut best, mut best_len) = (0.0, 0.0, 0);
    while let Some(c) = pick_best(&eval.candidates(&scratch), tol) {
        eval.apply(&mut scratch, c);
        acc += c.delta;
        path.push(c);
        if acc < best - tol {
            best = acc;
            best_len = path.len();
        }
    }
    path.truncate(best_len);
    (best_len > 0).then_some((path, best))
}

/// Greedy best-improvement merging until no merge lowers the cost.
pub fn greedy_merge_optimize(d: &CatsDataset, m0: &GridModel, cfg: &OptimizerConfig) -> (GridModel, OptimizationTrace) {
    let mut grid = WorkingGrid::new(d, m0).expect("model matches dataset");
    let mut rec = Recorder::new(None);
    let cost = grid.cost().total;
    rec.record(Phase::Init, "start".into(), 0.0, cost);
    let mut eval = MergeEvaluator::new(&grid);
    let final_cost = greedy_in_place(&mut grid, &mut eval, cfg.tolerance, &mut rec, cost);
    rec.trace.round_costs.push(final_cost);
    rec.trace.round_best.push(final_cost);
    (grid.to_model(), rec.trace)
}

fn value_moves(
    grid: &mut WorkingGrid<'_>,
    dim: Dimension,
    tol: f64,
    rng: &mut ChaCha8Rng,
    rec: &mut Recorder<'_>,
    phase: Phase,
    cost: &mut f64,
) -> bool {
    let n = match dim {
        Dimension::Seq => grid.seq_of().len(),
        _ => grid.event_of().len(),
    };
    let mut order: Vec<u32> = (0..n as u32).collect();
    order.shuffle(rng);
    let mut improved = false;
    for v in order {
        let live = grid.live_slots(dim);
        if live.len() < 2 {
            break;
        }
        let source = grid.slot_of(dim, v);
        let cells = grid.value_cells(dim, v);
        let mut best: Option<(usize, f64)> = None;
        for &target in &live {
            if target == source {
                continue;
            }
            let delta = grid.move_delta_with(dim, v, &cells, target);
            if best.is_none_or(|(_, b)| delta < b - tol) {
                best = Some((target, delta));
            }
        }
        if let Some((target, delta)) = best {
            if delta < -tol {
                grid.move_value(dim, v, target);
                *cost += delta;
                improved = true;
                rec.record(phase, format!("move {dim} {v} {target}"), delta, *cost);
            }
        }
    }
    improved
}

fn boundary_moves(
    grid: &mut WorkingGrid<'_>,
    window: Option<usize>,
    tol: f64,
    rec: &mut Recorder<'_>,
    phase: Phase,
    cost: &mut f64,
) -> bool {
    let d = grid.dataset();
    let n = d.n_points();
    let mut improved = false;
    let live = grid.live_slots(Dimension::Time);
    let w = window.unwrap_or_else(|| ((n as f64 / live.len() as f64).sqrt().ceil()) as usize).max(1);
    for &left in &live {
        let Some(right) = grid.next_interval(left) else { break };
        let (ls, _) = grid.interval_span(left);
        let (rs, re) = grid.interval_span(right);
        let rank = d.group_start_rank(rs);
        let lo_rank = rank.saturating_sub(w);
        let hi_rank = rank + w;
        let mut best: Option<(usize, f64)> = None;
        let mut g = rs;
        while g > ls + 1 && d.group_start_rank(g - 1) >= lo_rank {
            g -= 1;
            let delta = grid.shift_delta(left, g);
            if best.is_none_or(|(_, b)| delta < b - tol) {
                best = Some((g, delta));
            }
        }
        let mut g = rs + 1;
        while g < re && d.group_start_rank(g) <= hi_rank {
            let delta = grid.shift_delta(left, g);
            if best.is_none_or(|(_, b)| delta < b - tol) {
                best = Some((g, delta));
            }
            g += 1;
        }
        if let Some((g, delta)) = best {
            if delta < -tol {
                grid.shift(left, g);
                *cost += delta;
                improved = true;
                rec.record(phase, format!("shift {left} {g}"), delta, *cost);
            }
        }
    }
    improved
}

fn moves_in_place(
    grid: &mut WorkingGrid<'_>,
    cfg: &OptimizerConfig,
    rng: &mut ChaCha8Rng,
    rec: &mut Recorder<'_>,
    phase: Phase,
    mut cost: f64,
) -> f64 {
    for _ in 0..cfg.max_move_cycles {
        let mut improved = value_moves(grid, Dimension::Seq, cfg.tolerance, rng, rec, phase, &mut cost);
        improved |= boundary_moves(grid, cfg.boundary_window, cfg.tolerance, rec, phase, &mut cost);
        improved |= value_moves(grid, Dimension::Event, cfg.tolerance, rng, rec, phase, &mut cost);
        if !improved {
            break;
        }
    }
    cost
}

/// Alternating local moves: values across clusters for sequences and events,
/// boundary shifts for time, until a full cycle brings no improvement.
pub fn post_optimize(d: &CatsDataset, m: &GridModel, cfg: &OptimizerConfig, rng: &mut ChaCha8Rng) -> GridModel {
    let mut grid = WorkingGrid::new(d, m).expect("model matches dataset");
    let mut rec = Recorder::new(None);
    let cost = grid.cost().total;
    moves_in_place(&mut grid, cfg, rng, &mut rec, Phase::PostMoves, cost);
    grid.to_model()
}

/// Greedy merging followed by relocation moves.
fn descend(
    grid: &mut WorkingGrid<'_>,
    cfg: &OptimizerConfig,
    rng: &mut ChaCha8Rng,
    rec: &mut Recorder<'_>,
    cost: f64,
) -> f64 {
    let mut eval = MergeEvaluator::new(grid);
    let cost = greedy_in_place(grid, &mut eval, cfg.tolerance, rec, cost);
    moves_in_place(grid, cfg, rng, rec, Phase::PostMoves, cost)
}

fn run_chain(
    d: &CatsDataset,
    cap: usize,
    cfg: &OptimizerConfig,
    rng: &mut ChaCha8Rng,
    rec: &mut Recorder<'_>,
) -> (GridModel, f64) {
    let init = build_initial_with_cap(d, cap, rng);
    let mut grid = WorkingGrid::new(d, &init).expect("initial model matches dataset");
    let mut cost = grid.cost().total;
    rec.record(
        Phase::Init,
        format!("init {} {} {}", init.k_seq(), init.k_time(), init.k_event()),
        0.0,
        cost,
    );
    cost = moves_in_place(&mut grid, cfg, rng, rec, Phase::PreMoves, cost);
    cost = descend(&mut grid, cfg, rng, rec, cost);
    // Jumps start from the plain descent's result, so they can only improve it.
    while let Some((path, delta)) =
        cfg.lookahead.then(|| lookahead_path(&grid, &MergeEvaluator::new(&grid), cfg.tolerance)).flatten()
    {
        for c in &path {
            grid.merge(c.dim, c.a, c.b);
        }
        cost += delta;
        rec.record(Phase::Lookahead, format!("jump {}", path.len()), delta, cost);
        cost = descend(&mut grid, cfg, rng, rec, cost);
    }
    let model = grid.to_model();
    // Re-evaluate from scratch so the reported cost carries no drift.
    let exact = grid.cost().total;
    debug_assert!((exact - cost).abs() < 1e-6 * exact.abs().max(1.0));
    (model, exact)
}

/// Initial-part cap of restart `round`: `sqrt(N)`, then half, then double.
fn round_cap(base: usize, round: usize) -> usize {
    match round % 3 {
        0 => base,
        1 => base.div_ceil(2),
        _ => base * 2,
    }
    .max(1)
}

/// Multi-start search; returns the best model over all restarts.
pub fn vns_optimize(d: &CatsDataset, cfg: &OptimizerConfig) -> (GridModel, OptimizationTrace) {
    vns_optimize_with_progress(d, cfg, None)
}

pub fn vns_optimize_with_progress(
    d: &CatsDataset,
    cfg: &OptimizerConfig,
    hook: Option<&mut dyn FnMut(&Progress)>,
) -> (GridModel, OptimizationTrace) {
    let mut rec = Recorder::new(hook);
    let base = cfg.initial_cap(d);

    // The null model is always a candidate.
    let null = GridModel::null(d);
    let mut best_cost = WorkingGrid::new(d, &null).expect("null model").cost().total;
    let mut best = null;

    for round in 0..cfg.vns_rounds.max(1) {
        if round > 0 {
            if let Some(budget) = cfg.time_budget {
                if rec.start.elapsed() >= budget {
                    break;
                }
            }
        }
        rec.round = round;
        rec.step = 0;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(round as u64);
        let (model, cost) = run_chain(d, round_cap(base, round), cfg, &mut rng, &mut rec);
        if cost < best_cost - cfg.tolerance {
            best_cost = cost;
            best = model;
        }
        rec.trace.round_costs.push(cost);
        rec.trace.round_best.push(best_cost);
        log::debug!("round {round}: cost {cost:.4}, best {best_cost:.4}");
    }
    (best, rec.trace)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cost::{delta_cost_merge, model_cost};
    use crate::dataset::Point;
    use crate::gridmodel::{build_cell_stats, Merge};

    fn noise(seed: u64, n: usize) -> CatsDataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pts: Vec<Point> = (0..n)
            .map(|_| {
                Point::new(
                    format!("s{}", rng.random_range(0..10)),
                    f64::from(rng.random_range(0..100)),
                    format!("e{}", rng.random_range(0..6)),
                )
            })
            .collect();
        CatsDataset::from_points(pts).unwrap()
    }

    #[test]
    fn initial_model_respects_caps() {
        let d = CatsDataset::from_points(vec![
            Point::new("a", 1.0, "x"),
            Point::new("b", 2.0, "y"),
            Point::new("c", 3.0, "z"),
            Point::new("d", 3.0, "w"),
        ])
        .unwrap();
        let cfg = OptimizerConfig { max_initial_parts: Some(2), ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = build_initial_model(&d, &cfg, &mut rng);
        assert!(m.k_seq() <= 2 && m.k_event() <= 2 && m.k_time() <= 2);
        let mut rng2 = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(m, build_initial_model(&d, &cfg, &mut rng2));

        let single = CatsDataset::from_points(vec![Point::new("a", 1.0, "x"), Point::new("a", 2.0, "y")]).unwrap();
        let m = build_initial_model(&single, &OptimizerConfig::default(), &mut rng);
        assert_eq!(m.k_seq(), 1);
    }

    #[test]
    fn equal_frequency_respects_ties() {
        let pts: Vec<Point> = (0..20).map(|i| Point::new("a", f64::from(i / 5), "x")).collect();
        let d = CatsDataset::from_points(pts).unwrap();
        assert_eq!(equal_frequency_starts(&d, 8), vec![0, 1, 2, 3]);
        assert_eq!(equal_frequency_starts(&d, 2), vec![0, 2]);
    }

    #[test]
    fn greedy_from_null_is_identity() {
        let d = noise(3, 80);
        let null = GridModel::null(&d);
        let (m, trace) = greedy_merge_optimize(&d, &null, &OptimizerConfig::default());
        assert_eq!(m, null);
        assert_eq!(trace.steps.len(), 1);
    }

    #[test]
    fn greedy_terminates_at_local_optimum() {
        let d = noise(5, 300);
        let cfg = OptimizerConfig::default();
        let m0 = GridModel::finest(&d);
        let (m, trace) = greedy_merge_optimize(&d, &m0, &cfg);
        let costs = trace.round_cost_sequence(0);
        assert!(costs.windows(2).all(|w| w[1] < w[0]));
        let s = build_cell_stats(&d, &m).unwrap();
        for dim in Dimension::ALL {
            let k = m.k(dim);
            for a in 0..k {
                for b in a + 1..k {
                    if dim == Dimension::Time && b != a + 1 {
                        continue;
                    }
                    let delta = delta_cost_merge(&d, &m, &s, Merge::new(dim, a, b)).unwrap();
                    assert!(delta >= -cfg.tolerance, "{dim} {a} {b}: {delta}");
                }
            }
        }
        let c0 = model_cost(&d, &m0).unwrap().total;
        let c1 = model_cost(&d, &m).unwrap().total;
        assert!(c1 <= c0);
        assert!((c1 - costs.last().unwrap()).abs() < 1e-6);
    }

    #[test]
    fn post_optimize_never_increases_cost() {
        let d = noise(9, 250);
        let cfg = OptimizerConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..5 {
            let m = build_initial_model(&d, &cfg, &mut rng);
            let before = model_cost(&d, &m).unwrap().total;
            let after_model = post_optimize(&d, &m, &cfg, &mut rng);
            let after = model_cost(&d, &after_model).unwrap().total;
            assert!(after <= before + 1e-9);
            let again = post_optimize(&d, &after_model, &cfg, &mut rng);
            assert_eq!(again, after_model);
        }
    }

    #[test]
    fn single_round_matches_chain() {
        let d = noise(2, 200);
        let cfg = OptimizerConfig { vns_rounds: 1, seed: 17, ..Default::default() };
        let (m, trace) = vns_optimize(&d, &cfg);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        rng.set_stream(0);
        let mut rec = Recorder::new(None);
        let (chain, chain_cost) = run_chain(&d, cfg.initial_cap(&d), &cfg, &mut rng, &mut rec);
        let null_cost = model_cost(&d, &GridModel::null(&d)).unwrap().total;
        if chain_cost < null_cost {
            assert_eq!(m, chain);
        } else {
            assert_eq!(m, GridModel::null(&d));
        }
        assert_eq!(trace.round_costs.len(), 1);
    }

    #[test]
    fn vns_is_deterministic() {
        let d = noise(8, 200);
        let cfg = OptimizerConfig { vns_rounds: 3, seed: 5, ..Default::default() };
        let (a, ta) = vns_optimize(&d, &cfg);
        let (b, tb) = vns_optimize(&d, &cfg);
        assert_eq!(a, b);
        assert_eq!(ta.round_costs, tb.round_costs);
        assert!(ta.round_best.windows(2).all(|w| w[1] <= w[0]));
    }
}
