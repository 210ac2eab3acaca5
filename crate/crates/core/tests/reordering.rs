mod common;

use std::collections::BTreeSet;

use num_rational::Ratio;
use proptest::prelude::*;
use rand::Rng;
use scenefuse::reorder::{brute_force_reorder, causality, iou, order_cost, reorder, ReorderError};
use scenefuse::{Exact, ExactSceneOrder, SceneOrder};

fn set(names: &[&str]) -> BTreeSet<String> {
    names.iter().map(|s| s.to_string()).collect()
}

fn rosters() -> impl Strategy<Value = Vec<BTreeSet<u8>>> {
    prop::collection::vec(prop::collection::btree_set(0u8..6, 1..4), 1..=8)
}

fn permuted<T: Clone>(items: &[T], perm: &[usize]) -> Vec<T> {
    perm.iter().map(|&i| items[i].clone()).collect()
}

#[test]
fn iou_is_exact() {
    let v: Exact = iou(&set(&["Alice", "Bob"]), &set(&["Bob", "Charlie"]));
    assert_eq!(v, Ratio::new(1, 3));
    let disjoint: Exact = iou(&set(&["A"]), &set(&["B"]));
    assert_eq!(disjoint, Ratio::from_integer(0));
    let same: Exact = iou(&set(&["A", "B"]), &set(&["B", "A"]));
    assert_eq!(same, Ratio::from_integer(1));
}

#[test]
fn worked_instance() {
    let r = [set(&["A", "B"]), set(&["C", "D"]), set(&["A", "B"])];
    let o: ExactSceneOrder = reorder(&r);
    assert_eq!(o.original_cost, Ratio::from_integer(2));
    assert_eq!(o.cost, Ratio::from_integer(1));
    assert!(causality(&r).respected_by(&o.permutation));
    let best: ExactSceneOrder = brute_force_reorder(&r).unwrap();
    assert_eq!(best.cost, o.cost);
}

#[test]
fn causality_pairs() {
    let r = [set(&["A"]), set(&["B"]), set(&["A", "C"]), set(&["C"])];
    let c = causality(&r);
    assert!(c.contains(0, 2) && c.contains(2, 3));
    assert!(!c.contains(0, 3) && !c.contains(1, 2));
    assert!(c.respected_by(&[1, 0, 2, 3]));
    assert!(!c.respected_by(&[2, 0, 1, 3]));
}

#[test]
fn single_scene_and_no_overlap() {
    let one: SceneOrder = reorder(&[set(&["A"])]);
    assert_eq!((one.permutation.as_slice(), one.cost), (&[0usize][..], 0.0));
    let r = [set(&["A"]), set(&["B"]), set(&["C"])];
    let o: SceneOrder = reorder(&r);
    assert_eq!(o.permutation, [0, 1, 2]);
    assert_eq!(o.cost, 2.0);
}

#[test]
fn brute_force_guard() {
    let r: Vec<BTreeSet<u8>> = (0..9).map(|i| BTreeSet::from([i])).collect();
    assert!(matches!(brute_force_reorder::<f64, u8>(&r), Err(ReorderError::TooLarge { .. })));
}

#[test]
fn greedy_gap_diagnostic() {
    let mut rng = common::rng(7);
    let mut gaps = Vec::new();
    for _ in 0..300 {
        let n = rng.gen_range(1..=8);
        let r: Vec<BTreeSet<u8>> =
            (0..n).map(|_| (0..rng.gen_range(1..4)).map(|_| rng.gen_range(0..6)).collect()).collect();
        let greedy: ExactSceneOrder = reorder(&r);
        let best: ExactSceneOrder = brute_force_reorder(&r).unwrap();
        assert!(best.cost <= greedy.cost);
        let gap = greedy.cost - best.cost;
        gaps.push(*gap.numer() as f64 / *gap.denom() as f64);
    }
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    println!("mean greedy gap over {} instances: {mean:.4}", gaps.len());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn greedy_is_feasible_and_never_worse(r in rosters()) {
        let o: ExactSceneOrder = reorder(&r);
        let mut sorted = o.permutation.clone();
        sorted.sort_unstable();
        prop_assert_eq!(sorted, (0..r.len()).collect::<Vec<_>>());
        prop_assert!(causality(&r).respected_by(&o.permutation));
        prop_assert!(o.cost <= o.original_cost);
        prop_assert_eq!(o.cost, order_cost::<Exact, _>(&permuted(&r, &o.permutation)));
        prop_assert_eq!(o.original_cost, order_cost::<Exact, _>(&r));
    }

    #[test]
    fn brute_force_is_optimal_and_feasible(r in rosters()) {
        let best: ExactSceneOrder = brute_force_reorder(&r).unwrap();
        let greedy: ExactSceneOrder = reorder(&r);
        prop_assert!(best.cost <= greedy.cost);
        prop_assert!(causality(&r).respected_by(&best.permutation));
    }

    #[test]
    fn iou_bounds_and_symmetry(a in prop::collection::btree_set(0u8..8, 1..5), b in prop::collection::btree_set(0u8..8, 1..5)) {
        let x: Exact = iou(&a, &b);
        let y: Exact = iou(&b, &a);
        prop_assert_eq!(x, y);
        prop_assert!(x >= Ratio::from_integer(0) && x <= Ratio::from_integer(1));
        let f: f64 = iou(&a, &b);
        prop_assert!((f - *x.numer() as f64 / *x.denom() as f64).abs() < 1e-12);
    }
}
