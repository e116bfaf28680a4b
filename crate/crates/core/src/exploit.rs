//! Reading a fitted grid: merge hierarchies, information ratio,
//! simplification, typicality, and per-cluster matrices.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cost::{model_cost, WorkingGrid};
use crate::dataset::CatsDataset;
use crate::error::{CatsError, Result};
use crate::gridmodel::{build_cell_stats, CellStats, Dimension, GridModel, Merge};
use crate::optimizer::{pick_best, MergeEvaluator};

const TOL: f64 = 1e-9;

/// `cost(M after merging the two parts) - cost(M)`.
pub fn dissimilarity(d: &CatsDataset, m: &GridModel, g: Merge) -> Result<f64> {
    let s = build_cell_stats(d, m)?;
    crate::cost::delta_cost_merge(d, m, &s, g)
}

/// Share of the structure of `M*` kept by a model of cost `cost_m`:
/// `(cost_m - cost_null) / (cost_star - cost_null)`, clamped to `[0, 1]`.
/// Zero when `M*` is no better than the null model.
pub fn information_ratio(cost_m: f64, cost_star: f64, cost_null: f64) -> f64 {
    let span = cost_star - cost_null;
    if span.abs() <= TOL * cost_null.abs().max(1.0) {
        log::warn!("information ratio undefined: the model is no better than the null model");
        return 0.0;
    }
    ((cost_m - cost_null) / span).clamp(0.0, 1.0)
}

/// One step of the global merge sequence, in working-grid slot terms:
/// part `b` is merged into part `a`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HierarchyMerge {
    pub dim: Dimension,
    pub a: usize,
    pub b: usize,
    pub delta: f64,
    /// Cost after the merge.
    pub cost: f64,
    pub ir: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DendrogramNode {
    pub left: usize,
    pub right: usize,
    pub delta: f64,
    pub cost: f64,
    pub ir: f64,
    pub level: f64,
    /// Position in the global merge sequence.
    pub step: usize,
}

/// Leaves `0..n_leaves` are the parts of `M*`; internal node `i` has id
/// `n_leaves + i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    pub dim: Dimension,
    pub n_leaves: usize,
    pub nodes: Vec<DendrogramNode>,
}

/// Nested form of a dendrogram.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyTree {
    /// Part index in `M*` for leaves.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub part: Option<usize>,
    pub delta: f64,
    pub cost: f64,
    pub ir: f64,
    pub level: f64,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub children: Vec<HierarchyTree>,
}

impl Dendrogram {
    pub fn root(&self) -> usize {
        self.n_leaves + self.nodes.len() - 1
    }

    /// The nested tree; leaves carry the cost of `M*`.
    pub fn to_tree(&self, cost_star: f64, ir_star: f64) -> HierarchyTree {
        self.subtree(self.root(), cost_star, ir_star)
    }

    fn subtree(&self, id: usize, cost_star: f64, ir_star: f64) -> HierarchyTree {
        if id < self.n_leaves {
            return HierarchyTree {
                part: Some(id),
                delta: 0.0,
                cost: cost_star,
                ir: ir_star,
                level: 1.0 - ir_star,
                children: Vec::new(),
            };
        }
        let n = &self.nodes[id - self.n_leaves];
        HierarchyTree {
            part: None,
            delta: n.delta,
            cost: n.cost,
            ir: n.ir,
            level: n.level,
            children: vec![self.subtree(n.left, cost_star, ir_star), self.subtree(n.right, cost_star, ir_star)],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchySet {
    pub cost_star: f64,
    pub cost_null: f64,
    pub merges: Vec<HierarchyMerge>,
    pub seq: Dendrogram,
    pub time: Dendrogram,
    pub event: Dendrogram,
}

impl HierarchySet {
    pub fn dendrogram(&self, dim: Dimension) -> &Dendrogram {
        match dim {
            Dimension::Seq => &self.seq,
            Dimension::Time => &self.time,
            Dimension::Event => &self.event,
        }
    }

    pub fn ir_star(&self) -> f64 {
        information_ratio(self.cost_star, self.cost_star, self.cost_null)
    }
}

/// Merges the globally least-dissimilar pair, over all three dimensions,
/// until the null model is reached.
pub fn build_hierarchies(d: &CatsDataset, mstar: &GridModel) -> Result<HierarchySet> {
    let mut grid = WorkingGrid::new(d, mstar)?;
    let cost_star = grid.cost().total;
    let cost_null = model_cost(d, &GridModel::null(d))?.total;
    let mut dendros: Vec<Dendrogram> = Dimension::ALL
        .iter()
        .map(|&dim| Dendrogram { dim, n_leaves: mstar.k(dim), nodes: Vec::new() })
        .collect();
    let mut node_of: Vec<Vec<usize>> = Dimension::ALL.iter().map(|&dim| (0..mstar.k(dim)).collect()).collect();
    let mut merges = Vec::new();
    let mut cost = cost_star;
    let mut eval = MergeEvaluator::new(&grid);
    while let Some(c) = pick_best(&eval.candidates(&grid), TOL) {
        eval.apply(&mut grid, c);
        cost += c.delta;
        let ir = information_ratio(cost, cost_star, cost_null);
        let k = dim_slot(c.dim);
        let tree = &mut dendros[k];
        tree.nodes.push(DendrogramNode {
            left: node_of[k][c.a],
            right: node_of[k][c.b],
            delta: c.delta,
            cost,
            ir,
            level: 1.0 - ir,
            step: merges.len(),
        });
        node_of[k][c.a] = tree.n_leaves + tree.nodes.len() - 1;
        merges.push(HierarchyMerge { dim: c.dim, a: c.a, b: c.b, delta: c.delta, cost, ir });
    }
    // Pin the root to the exact null cost.
    if let Some(last) = merges.last_mut() {
        last.cost = cost_null;
        last.ir = 0.0;
        let tree = &mut dendros[dim_slot(last.dim)];
        let root = tree.nodes.last_mut().expect("merge recorded");
        root.cost = cost_null;
        root.ir = 0.0;
        root.level = 1.0;
    }
    let [seq, time, event]: [Dendrogram; 3] = dendros.try_into().expect("three dimensions");
    Ok(HierarchySet { cost_star, cost_null, merges, seq, time, event })
}

fn dim_slot(dim: Dimension) -> usize {
    match dim {
        Dimension::Seq => 0,
        Dimension::Time => 1,
        Dimension::Event => 2,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum SimplifyTarget {
    /// Part counts per dimension; `None` keeps the dimension of `M*`.
    Parts { seq: Option<usize>, time: Option<usize>, event: Option<usize> },
    /// Coarsest model along the merge sequence whose IR stays at or above this.
    MinIr(f64),
}

/// Replays the merge sequence of `h` on `mstar` until `target` binds.
pub fn simplify(d: &CatsDataset, mstar: &GridModel, h: &HierarchySet, target: SimplifyTarget) -> Result<GridModel> {
    let mut grid = WorkingGrid::new(d, mstar)?;
    if h.seq.n_leaves != mstar.k_seq() || h.time.n_leaves != mstar.k_time() || h.event.n_leaves != mstar.k_event() {
        return Err(CatsError::InconsistentModel("hierarchy was built for another model".into()));
    }
    match target {
        SimplifyTarget::Parts { seq, time, event } => {
            let goal = [seq, time, event];
            for (dim, want) in Dimension::ALL.into_iter().zip(goal) {
                if let Some(k) = want {
                    if k == 0 || k > mstar.k(dim) {
                        return Err(CatsError::Unachievable(format!(
                            "{k} parts of {dim} requested, model has {}",
                            mstar.k(dim)
                        )));
                    }
                }
            }
            for g in &h.merges {
                if let Some(k) = goal[dim_slot(g.dim)] {
                    if grid.k(g.dim) > k {
                        grid.merge(g.dim, g.a, g.b);
                    }
                }
            }
        }
        SimplifyTarget::MinIr(r) => {
            if !(0.0..=1.0).contains(&r) {
                return Err(CatsError::Unachievable(format!("information ratio {r} outside [0, 1]")));
            }
            // Zero-delta merges keep IR at 1; full retention means M* itself.
            if r >= 1.0 {
                return Ok(mstar.clone());
            }
            for g in &h.merges {
                if g.ir < r {
                    break;
                }
                grid.merge(g.dim, g.a, g.b);
            }
        }
    }
    Ok(grid.to_model())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Typicality {
    pub value: u32,
    pub tau: f64,
    /// The value is alone in its cluster; moving it out deletes the cluster.
    pub sole_member: bool,
}

fn check_value(grid: &WorkingGrid<'_>, dim: Dimension, value: u32) -> Result<()> {
    let n = match dim {
        Dimension::Seq => grid.seq_of().len(),
        Dimension::Event => grid.event_of().len(),
        Dimension::Time => return Err(CatsError::InvalidArgument("typicality applies to sequences and events".into())),
    };
    if value as usize >= n {
        return Err(CatsError::InvalidArgument(format!("{dim} value {value} out of range")));
    }
    if grid.k(dim) < 2 {
        return Err(CatsError::Undefined(format!("typicality undefined: {dim} has a single cluster")));
    }
    Ok(())
}

fn typicality_in(grid: &WorkingGrid<'_>, dim: Dimension, value: u32) -> Typicality {
    let n = grid.stats().n_points() as f64;
    let source = grid.slot_of(dim, value);
    let cells = grid.value_cells(dim, value);
    let p_c = grid.slot_total(dim, source) as f64 / n;
    let mut acc = 0.0;
    for target in grid.live_slots(dim) {
        if target != source {
            let p = grid.slot_total(dim, target) as f64 / n;
            acc += p * grid.move_delta_with(dim, value, &cells, target);
        }
    }
    Typicality { value, tau: acc / (1.0 - p_c), sole_member: grid.slot_size(dim, source) == 1 }
}

/// Probability-weighted cost increase of moving `value` to each other
/// cluster, normalized by the mass outside its own cluster.
pub fn typicality(d: &CatsDataset, m: &GridModel, dim: Dimension, value: u32) -> Result<Typicality> {
    let grid = WorkingGrid::new(d, m)?;
    check_value(&grid, dim, value)?;
    Ok(typicality_in(&grid, dim, value))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypicalityRanking {
    pub dim: Dimension,
    /// Per cluster, members by decreasing typicality.
    pub clusters: Vec<Vec<Typicality>>,
}

pub fn typicality_ranking(d: &CatsDataset, m: &GridModel, dim: Dimension) -> Result<TypicalityRanking> {
    let grid = WorkingGrid::new(d, m)?;
    check_value(&grid, dim, 0)?;
    let n_values = if dim == Dimension::Seq { d.n_sequences() } else { d.n_events() };
    let all: Vec<Typicality> = (0..n_values as u32).into_par_iter().map(|v| typicality_in(&grid, dim, v)).collect();
    let mut clusters = vec![Vec::new(); m.k(dim)];
    for t in all {
        clusters[cluster_of(m, dim, t.value)].push(t);
    }
    for c in &mut clusters {
        c.sort_by(|x, y| y.tau.total_cmp(&x.tau).then(x.value.cmp(&y.value)));
    }
    Ok(TypicalityRanking { dim, clusters })
}

fn cluster_of(m: &GridModel, dim: Dimension, v: u32) -> usize {
    match dim {
        Dimension::Seq => m.seq_cluster_of(v),
        _ => m.event_cluster_of(v),
    }
}

/// Dense row-major `k_T x k_E` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix<T> {
    pub n_rows: usize,
    pub n_cols: usize,
    pub values: Vec<T>,
}

impl<T: Copy> Matrix<T> {
    pub fn get(&self, row: usize, col: usize) -> T {
        self.values[row * self.n_cols + col]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[T]> {
        self.values.chunks(self.n_cols.max(1))
    }
}

impl Matrix<f64> {
    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }
}

fn check_cluster(m: &GridModel, s: &CellStats, c: usize) -> Result<()> {
    if c >= m.k_seq() {
        return Err(CatsError::InvalidArgument(format!("sequence cluster {c} out of range (0..{})", m.k_seq())));
    }
    if s.seq_totals()[c] == 0 {
        return Err(CatsError::Undefined(format!("sequence cluster {c} is empty")));
    }
    Ok(())
}

fn frequency_from(m: &GridModel, s: &CellStats, c: usize) -> Matrix<u64> {
    let (kt, ke) = (m.k_time(), m.k_event());
    let mut values = vec![0u64; kt * ke];
    for (cs, t, e, n) in s.cells() {
        if cs == c {
            values[t * ke + e] = n;
        }
    }
    Matrix { n_rows: kt, n_cols: ke, values }
}

fn cmi_from(m: &GridModel, s: &CellStats, c: usize) -> Matrix<f64> {
    let f = frequency_from(m, s, c);
    let total = s.seq_totals()[c] as f64;
    let mut row = vec![0.0; f.n_rows];
    let mut col = vec![0.0; f.n_cols];
    for (t, r) in f.rows().enumerate() {
        for (e, &x) in r.iter().enumerate() {
            row[t] += x as f64;
            col[e] += x as f64;
        }
    }
    let values = (0..f.n_rows * f.n_cols)
        .map(|i| {
            let (t, e) = (i / f.n_cols, i % f.n_cols);
            let x = f.values[i] as f64;
            if x == 0.0 {
                0.0
            } else {
                let p = x / total;
                p * (x * total / (row[t] * col[e])).ln()
            }
        })
        .collect();
    Matrix { n_rows: f.n_rows, n_cols: f.n_cols, values }
}

fn contrast_from(m: &GridModel, s: &CellStats, c: usize) -> Matrix<f64> {
    let (kt, ke) = (m.k_time(), m.k_event());
    let n = s.n_points() as f64;
    let mut joint = vec![0.0; kt * ke];
    for (_, t, e, x) in s.cells() {
        joint[t * ke + e] += x as f64;
    }
    let nc = s.seq_totals()[c] as f64;
    let f = frequency_from(m, s, c);
    let values = f
        .values
        .iter()
        .zip(&joint)
        .map(|(&x, &te)| {
            if x == 0 {
                0.0
            } else {
                let x = x as f64;
                x / n * (x * n / (te * nc)).ln()
            }
        })
        .collect();
    Matrix { n_rows: kt, n_cols: ke, values }
}

/// Cell counts of one sequence cluster.
pub fn frequency_matrix(d: &CatsDataset, m: &GridModel, seq_cluster: usize) -> Result<Matrix<u64>> {
    let s = build_cell_stats(d, m)?;
    check_cluster(m, &s, seq_cluster)?;
    Ok(frequency_from(m, &s, seq_cluster))
}

/// Contributions of each cell to the mutual information between time and
/// events, within one sequence cluster.
pub fn cmi_matrix(d: &CatsDataset, m: &GridModel, seq_cluster: usize) -> Result<Matrix<f64>> {
    let s = build_cell_stats(d, m)?;
    check_cluster(m, &s, seq_cluster)?;
    Ok(cmi_from(m, &s, seq_cluster))
}

/// Contributions of one sequence cluster's cells to the mutual information
/// between `(T, E)` and the sequence clusters, with global probabilities.
pub fn contrast_matrix(d: &CatsDataset, m: &GridModel, seq_cluster: usize) -> Result<Matrix<f64>> {
    let s = build_cell_stats(d, m)?;
    check_cluster(m, &s, seq_cluster)?;
    Ok(contrast_from(m, &s, seq_cluster))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterView {
    pub cluster: usize,
    pub frequency: Matrix<u64>,
    pub cmi: Matrix<f64>,
    pub contrast: Matrix<f64>,
}

/// All three matrices of every nonempty sequence cluster.
pub fn cluster_views(d: &CatsDataset, m: &GridModel) -> Result<Vec<ClusterView>> {
    let s = build_cell_stats(d, m)?;
    Ok((0..m.k_seq())
        .filter(|&c| s.seq_totals()[c] > 0)
        .map(|c| ClusterView {
            cluster: c,
            frequency: frequency_from(m, &s, c),
            cmi: cmi_from(m, &s, c),
            contrast: contrast_from(m, &s, c),
        })
        .collect())
}
