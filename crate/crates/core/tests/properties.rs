use std::collections::HashSet;

use ndarray::Array2;
use proptest::prelude::*;

use seg_core::augment::{augment, class_balance, swap_train_val};
use seg_core::graph::{noise_ratio, perturb_with_ground_truth, PerturbMode};
use seg_core::harness::{make_splits, ProtocolConfig};
use seg_core::topology::{add_edges, apply_decision, delete_edges, modify, TUThresholds};
use seg_core::{Graph, PredictionMatrix, Split};

fn arb_graph() -> impl Strategy<Value = Graph> {
    (4usize..24, 2usize..5).prop_flat_map(|(n, c)| {
        (
            proptest::collection::vec(0..c, n),
            proptest::collection::vec((0..n, 0..n), 0..3 * n),
        )
            .prop_map(move |(labels, edges)| {
                Graph::new(Array2::zeros((n, 1)), labels, c, edges).unwrap()
            })
    })
}

fn arb_preds(n: usize, c: usize) -> impl Strategy<Value = PredictionMatrix> {
    proptest::collection::vec(-3.0f64..3.0, n * c)
        .prop_map(move |v| PredictionMatrix::from_logits(Array2::from_shape_vec((n, c), v).unwrap()))
}

fn graph_and_preds() -> impl Strategy<Value = (Graph, PredictionMatrix)> {
    arb_graph().prop_flat_map(|g| {
        let (n, c) = (g.num_nodes(), g.num_classes());
        (Just(g), arb_preds(n, c))
    })
}

fn pairs(edges: &[seg_core::topology::EdgeScore]) -> HashSet<(usize, usize)> {
    edges.iter().map(|e| (e.u, e.v)).collect()
}

proptest! {
    #[test]
    fn deletion_monotone_in_tau_d((g, p) in graph_and_preds(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (_, d_lo) = delete_edges(&g, &p, &TUThresholds::new(lo, 1.0)).unwrap();
        let (_, d_hi) = delete_edges(&g, &p, &TUThresholds::new(hi, 1.0)).unwrap();
        prop_assert!(pairs(&d_lo.deletions).is_subset(&pairs(&d_hi.deletions)));
        for e in &d_hi.deletions {
            prop_assert!(e.u != e.v);
            prop_assert!(p.argmax(e.u) != p.argmax(e.v));
            prop_assert!(e.correlation <= hi);
            prop_assert!(g.has_edge(e.u, e.v));
        }
    }

    #[test]
    fn addition_monotone_in_tau_a((g, p) in graph_and_preds(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let (g_hi, d_hi) = add_edges(&g, &p, &TUThresholds::new(0.0, hi)).unwrap();
        let (_, d_lo) = add_edges(&g, &p, &TUThresholds::new(0.0, lo)).unwrap();
        prop_assert!(pairs(&d_hi.additions).is_subset(&pairs(&d_lo.additions)));
        prop_assert!(d_lo.additions.len() <= 2 * g.num_edges());
        for e in &d_hi.additions {
            prop_assert!(e.u < e.v);
            prop_assert!(!g.has_edge(e.u, e.v));
            prop_assert!(p.argmax(e.u) == p.argmax(e.v));
            prop_assert!(e.correlation >= hi);
        }
        prop_assert_eq!(g_hi.num_edges(), g.num_edges() + d_hi.additions.len());
    }

    #[test]
    fn rejection_is_identity((g, p) in graph_and_preds()) {
        let t = TUThresholds::rejection();
        for (out, d) in [delete_edges(&g, &p, &t).unwrap(), add_edges(&g, &p, &t).unwrap(), modify(&g, &p, &t).unwrap()] {
            prop_assert!(d.is_empty());
            prop_assert_eq!(out.edges(), g.edges());
        }
    }

    #[test]
    fn modify_keeps_budget((g, p) in graph_and_preds(), tau_d in 0.0f64..1.0) {
        let (out, d) = modify(&g, &p, &TUThresholds::new(tau_d, 0.0)).unwrap();
        prop_assert!(d.additions.len() <= d.deletions.len());
        prop_assert_eq!(d.additions.len() + d.addition_shortfall, d.deletions.len());
        prop_assert!(pairs(&d.additions).is_disjoint(&pairs(&d.deletions)));
        prop_assert_eq!(out.num_edges() + d.addition_shortfall, g.num_edges());
    }

    #[test]
    fn ground_truth_deletion_removes_all_noise(g in arb_graph()) {
        let p = PredictionMatrix::one_hot(g.labels(), g.num_classes());
        let (out, _) = delete_edges(&g, &p, &TUThresholds::new(1.0, 1.0)).unwrap();
        prop_assert_eq!(noise_ratio(&out).num_inter, 0);
        prop_assert_eq!(noise_ratio(&out).num_intra, noise_ratio(&g).num_intra);
    }

    #[test]
    fn apply_empty_decision_is_identity((g, p) in graph_and_preds()) {
        let (_, d) = delete_edges(&g, &p, &TUThresholds::rejection()).unwrap();
        let out = apply_decision(&g, &d).unwrap();
        prop_assert_eq!(out.edges(), g.edges());
    }

    #[test]
    fn augmented_set_invariants(
        (g, p1) in graph_and_preds(),
        seed in any::<u64>(),
        tau in 0.0f64..1.0,
        logits in proptest::collection::vec(-3.0f64..3.0, 24 * 4),
    ) {
        let (n, c) = (g.num_nodes(), g.num_classes());
        let p2 = PredictionMatrix::from_logits(Array2::from_shape_vec((n, c), logits[..n * c].to_vec()).unwrap());
        let split = Split::new(vec![0], vec![1, 2], (3..n).collect());
        let aug = augment(&[p1.clone(), p2.clone()], &split, tau).unwrap();
        let visible: HashSet<usize> = split.visible().into_iter().collect();
        for e in &aug.entries {
            prop_assert!(!visible.contains(&e.node));
            prop_assert_eq!(p1.argmax(e.node), e.pseudo_label);
            prop_assert_eq!(p2.argmax(e.node), e.pseudo_label);
            prop_assert!(e.min_confidence >= tau);
        }
        // A stricter threshold only shrinks the set.
        let strict = augment(&[p1, p2], &split, (tau + 0.1).min(1.0)).unwrap();
        let all: HashSet<usize> = aug.entries.iter().map(|e| e.node).collect();
        prop_assert!(strict.entries.iter().all(|e| all.contains(&e.node)));

        let balanced = class_balance(&aug, c);
        let counts = balanced.class_counts(c);
        prop_assert!(counts.iter().all(|&k| k == counts[0]));
        prop_assert_eq!(counts[0], *aug.class_counts(c).iter().min().unwrap());
        prop_assert!(balanced.entries.iter().all(|e| all.contains(&e.node)));
        prop_assert!(balanced.entries.windows(2).all(|w| w[0].node < w[1].node));

        let swapped = swap_train_val(&split, 2, seed).unwrap();
        for s in swapped {
            prop_assert_eq!(s.train.len(), split.train.len());
            let mut v = s.visible();
            v.sort_unstable();
            prop_assert_eq!(v, vec![0, 1, 2]);
            prop_assert_eq!(&s.test, &split.test);
        }
    }

    #[test]
    fn splits_partition_nodes(seed in any::<u64>(), per_class in 1usize..4) {
        let labels: Vec<usize> = (0..30).map(|v| v % 3).collect();
        let g = Graph::new(Array2::zeros((30, 1)), labels, 3, Vec::new()).unwrap();
        let protocol = ProtocolConfig {
            n_train_per_class: per_class,
            n_val_per_class: 2,
            n_splits: 3,
            n_seeds: 1,
            master_seed: seed,
        };
        for s in make_splits(&g, &protocol).unwrap() {
            s.validate(30).unwrap();
            prop_assert_eq!(s.train.len() + s.val.len() + s.test.len(), 30);
            for class in 0..3 {
                prop_assert_eq!(s.train.iter().filter(|&&v| g.label(v) == class).count(), per_class);
                prop_assert_eq!(s.val.iter().filter(|&&v| g.label(v) == class).count(), 2);
            }
        }
    }

    #[test]
    fn perturbation_moves_noise_monotonically(g in arb_graph(), k in 0usize..5, seed in any::<u64>()) {
        let before = noise_ratio(&g);
        let k_del = k.min(before.num_inter);
        let del = perturb_with_ground_truth(&g, PerturbMode::DeleteInter, k_del, seed).unwrap();
        prop_assert_eq!(noise_ratio(&del).num_inter, before.num_inter - k_del);
        prop_assert!(noise_ratio(&del).noise_ratio <= before.noise_ratio + 1e-15);
        if let Ok(add) = perturb_with_ground_truth(&g, PerturbMode::AddIntra, k, seed) {
            prop_assert_eq!(noise_ratio(&add).num_intra, before.num_intra + k);
            prop_assert!(noise_ratio(&add).noise_ratio <= before.noise_ratio + 1e-15);
        }
    }

    #[test]
    fn softmax_rows_are_distributions((_, p) in graph_and_preds()) {
        for v in 0..p.num_nodes() {
            let s: f64 = p.row(v).sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
            prop_assert!(p.row(v).iter().all(|&x| x >= 0.0));
            prop_assert!(p.correlation(v, v) <= 1.0 + 1e-12);
        }
    }
}
