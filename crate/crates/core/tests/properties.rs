mod common;

use std::collections::HashMap;

use catsgrid::cost::{delta_cost_merge, delta_cost_move, log_partition_count};
use catsgrid::exploit::{
    build_hierarchies, cmi_matrix, contrast_matrix, frequency_matrix, information_ratio, simplify, SimplifyTarget,
};
use catsgrid::optimizer::{build_initial_model, greedy_merge_optimize, post_optimize, OptimizerConfig};
use catsgrid::synthbench::adjusted_rand_index;
use catsgrid::{build_cell_stats, model_cost, Dimension, GridModel, Merge, Move};
use common::*;
use proptest::prelude::*;
use rand::Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn cost_matches_oracle(seed in any::<u64>(), n in 5usize..150) {
        let mut rng = seeded(seed);
        let d = random_dataset(&mut rng, n, 8, 30, 6);
        let m = random_model(&mut rng, &d);
        let c = model_cost(&d, &m).unwrap();
        let oracle = oracle_cost(&d, &m);
        prop_assert!((c.total - oracle).abs() < 1e-8 * oracle.max(1.0), "{} vs {}", c.total, oracle);
        prop_assert!((c.terms().iter().sum::<f64>() - c.total).abs() < 1e-9 * c.total);
        prop_assert!(c.terms().iter().all(|&t| t >= -1e-9));
    }

    #[test]
    fn deltas_match_recompute(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let d = random_dataset(&mut rng, 120, 10, 40, 7);
        let m = random_model(&mut rng, &d);
        let s = build_cell_stats(&d, &m).unwrap();
        let base = oracle_cost(&d, &m);
        for dim in Dimension::ALL {
            let k = m.k(dim);
            if k >= 2 {
                let a = rng.random_range(0..k - 1);
                let b = if dim == Dimension::Time { a + 1 } else { rng.random_range(a + 1..k) };
                let g = Merge::new(dim, a, b);
                let delta = delta_cost_merge(&d, &m, &s, g).unwrap();
                let after = oracle_cost(&d, &m.apply_merge(&d, g).unwrap());
                prop_assert!((delta - (after - base)).abs() < 1e-6);
            }
        }
        for dim in [Dimension::Seq, Dimension::Event] {
            let k = m.k(dim);
            let n_values = if dim == Dimension::Seq { d.n_sequences() } else { d.n_events() };
            if k >= 2 {
                let value = rng.random_range(0..n_values as u32);
                let current = if dim == Dimension::Seq { m.seq_cluster_of(value) } else { m.event_cluster_of(value) };
                let target = (current + rng.random_range(1..k)) % k;
                let mv = Move::Value { dim, value, target };
                let delta = delta_cost_move(&d, &m, &s, mv).unwrap();
                let after = oracle_cost(&d, &m.apply_move(&d, mv).unwrap());
                prop_assert!((delta - (after - base)).abs() < 1e-6);
            }
        }
        if m.k_time() >= 2 {
            let left = rng.random_range(0..m.k_time() - 1);
            let offset = if rng.random_bool(0.5) { 1 } else { -1 };
            let mv = Move::Boundary { left, offset };
            if let Ok(moved) = m.apply_move(&d, mv) {
                let delta = delta_cost_move(&d, &m, &s, mv).unwrap();
                prop_assert!((delta - (oracle_cost(&d, &moved) - base)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn relabeling_is_canonical(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let d = random_dataset(&mut rng, 60, 8, 20, 6);
        let m = random_model(&mut rng, &d);
        let shift = |assign: &[u32], k: usize| assign.iter().map(|&c| (c + 3) % k as u32).collect::<Vec<_>>();
        let permuted = GridModel::new(
            &d,
            shift(m.seq_assignment(), m.k_seq()),
            shift(m.event_assignment(), m.k_event()),
            m.interval_starts().to_vec(),
        )
        .unwrap();
        prop_assert_eq!(&permuted, &m);
    }

    #[test]
    fn search_steps_never_increase_cost(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let d = random_dataset(&mut rng, 150, 10, 50, 6);
        let cfg = OptimizerConfig::with_seed(seed);
        let m0 = build_initial_model(&d, &cfg, &mut rng);
        let c0 = model_cost(&d, &m0).unwrap().total;
        let (g, trace) = greedy_merge_optimize(&d, &m0, &cfg);
        let costs = trace.round_cost_sequence(0);
        prop_assert!(costs.windows(2).all(|w| w[1] <= w[0]));
        let cg = model_cost(&d, &g).unwrap().total;
        prop_assert!(cg <= c0 + 1e-9);
        let s = build_cell_stats(&d, &g).unwrap();
        for dim in Dimension::ALL {
            for a in 0..g.k(dim) {
                for b in a + 1..g.k(dim) {
                    if dim == Dimension::Time && b != a + 1 {
                        continue;
                    }
                    prop_assert!(delta_cost_merge(&d, &g, &s, Merge::new(dim, a, b)).unwrap() >= -cfg.tolerance);
                }
            }
        }
        let p = post_optimize(&d, &g, &cfg, &mut rng);
        prop_assert!(model_cost(&d, &p).unwrap().total <= cg + 1e-9);
    }

    #[test]
    fn hierarchy_and_simplify(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let d = random_dataset(&mut rng, 100, 8, 30, 6);
        let m = random_model(&mut rng, &d);
        let h = build_hierarchies(&d, &m).unwrap();
        let expected: usize = Dimension::ALL.iter().map(|&dim| m.k(dim) - 1).sum();
        prop_assert_eq!(h.merges.len(), expected);
        prop_assert!(h.merges.iter().all(|g| (0.0..=1.0).contains(&g.ir)));
        if let Some(last) = h.merges.last() {
            prop_assert_eq!(last.ir, 0.0);
        }
        let ks = rng.random_range(1..=m.k_seq());
        let ke = rng.random_range(1..=m.k_event());
        let cut = simplify(&d, &m, &h, SimplifyTarget::Parts { seq: Some(ks), time: None, event: Some(ke) }).unwrap();
        prop_assert_eq!((cut.k_seq(), cut.k_time(), cut.k_event()), (ks, m.k_time(), ke));

        let r = rng.random_range(0.0..1.0);
        let s = simplify(&d, &m, &h, SimplifyTarget::MinIr(r)).unwrap();
        let ir = information_ratio(model_cost(&d, &s).unwrap().total, h.cost_star, h.cost_null);
        let applied = h.merges.iter().take_while(|g| g.ir >= r).count();
        prop_assert!(ir >= r - 1e-9 || h.cost_star >= h.cost_null);
        if let Some(next) = h.merges.get(applied) {
            prop_assert!(next.ir < r);
        }
    }

    #[test]
    fn matrix_identities(seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let d = random_dataset(&mut rng, 200, 8, 30, 6);
        let m = random_model(&mut rng, &d);
        let cells = point_cells(&d, &m);
        let mut te_s: HashMap<((usize, usize), usize), u64> = HashMap::new();
        for &(s, t, e) in &cells {
            *te_s.entry(((t, e), s)).or_default() += 1;
        }
        let mut contrast_sum = 0.0;
        for c in 0..m.k_seq() {
            let Ok(freq) = frequency_matrix(&d, &m, c) else { continue };
            let mut within: HashMap<(usize, usize), u64> = HashMap::new();
            for &(s, t, e) in &cells {
                if s == c {
                    *within.entry((t, e)).or_default() += 1;
                }
            }
            for (&(t, e), &n) in &within {
                prop_assert_eq!(freq.get(t, e), n);
            }
            prop_assert_eq!(freq.values.iter().sum::<u64>(), within.values().sum::<u64>());
            let cmi = cmi_matrix(&d, &m, c).unwrap().sum();
            prop_assert!((cmi - mutual_information(&within)).abs() < 1e-9);
            prop_assert!(cmi >= -1e-12);
            contrast_sum += contrast_matrix(&d, &m, c).unwrap().sum();
        }
        prop_assert!((contrast_sum - mutual_information(&te_s)).abs() < 1e-9);
    }

    #[test]
    fn ari_is_symmetric_and_bounded(a in prop::collection::vec(0usize..4, 2..40), seed in any::<u64>()) {
        let mut rng = seeded(seed);
        let b: Vec<usize> = a.iter().map(|_| rng.random_range(0..4)).collect();
        let ab = adjusted_rand_index(&a, &b).unwrap();
        let ba = adjusted_rand_index(&b, &a).unwrap();
        prop_assert!((ab - ba).abs() < 1e-12);
        prop_assert!(ab <= 1.0 + 1e-12);
        prop_assert_eq!(adjusted_rand_index(&a, &a).unwrap(), 1.0);
        let relabeled: Vec<usize> = a.iter().map(|&x| 7 - x).collect();
        prop_assert!((adjusted_rand_index(&relabeled, &b).unwrap() - ab).abs() < 1e-12);
    }

    #[test]
    fn partition_counts(m in 1u64..40, j in 1u64..40) {
        let j = j.min(m);
        let v = log_partition_count(m, j);
        prop_assert!((v - ln_partitions(m as usize, j as usize)).abs() < 1e-9 * v.max(1.0));
        if j > 1 {
            prop_assert!(v >= log_partition_count(m, j - 1));
        }
    }
}

#[test]
fn reference_partition_counts() {
    assert!((log_partition_count(3, 2) - 4f64.ln()).abs() < 1e-12);
    assert!((log_partition_count(3, 3) - 5f64.ln()).abs() < 1e-12);
    assert_eq!(log_partition_count(5, 1), 0.0);
}

#[test]
fn greedy_from_finest_recovers_toy_grid() {
    let d = catsgrid::CatsDataset::from_points(toy_points(25, 0)).unwrap();
    let (m, _) = greedy_merge_optimize(&d, &GridModel::finest(&d), &OptimizerConfig::default());
    assert_eq!((m.k_seq(), m.k_time(), m.k_event()), (2, 2, 2));
    assert_eq!(
        groupings(d.seq_labels(), m.seq_assignment()),
        [vec!["S1".to_string(), "S2".into()], vec!["S3".into(), "S4".into()]]
    );
    assert_eq!(
        groupings(d.event_labels(), m.event_assignment()),
        [vec!["A".to_string(), "B".into()], vec!["C".into(), "D".into()]]
    );
}

#[test]
fn post_optimize_relocates_planted_sequence() {
    use catsgrid::synthbench::{generate, PatternSpec, TimeType};
    let syn = generate(&PatternSpec::two_patterns(), 10, 2048, 0.1, 4, TimeType::Real).unwrap();
    let d = syn.dataset().unwrap();
    let truth_seq: Vec<u32> = d.seq_labels().iter().map(|l| l[1..].parse::<u32>().unwrap() / 10).collect();
    let ev: Vec<u32> = d.event_labels().iter().map(|l| u32::from(l.as_bytes()[0] - b'a') / 3).collect();
    let starts: Vec<u32> = syn
        .truth
        .boundaries
        .iter()
        .map(|&b| d.group_times().partition_point(|&t| t <= b) as u32)
        .collect();
    let starts = [vec![0], starts].concat();
    let good = GridModel::new(&d, truth_seq.clone(), ev.clone(), starts.clone()).unwrap();
    let mut planted = truth_seq;
    let victim = d.seq_code("s3").unwrap() as usize;
    planted[victim] = 1 - planted[victim];
    let bad = GridModel::new(&d, planted, ev, starts).unwrap();
    let fixed = post_optimize(&d, &bad, &OptimizerConfig::default(), &mut seeded(1));
    assert_eq!(fixed.seq_cluster_of(victim as u32), good.seq_cluster_of(victim as u32));
    assert!(model_cost(&d, &fixed).unwrap().total < model_cost(&d, &bad).unwrap().total);
}
