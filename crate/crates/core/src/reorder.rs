//! Scene reordering under a causality constraint.
//!
//! Adjacent scenes pay `1 - IOU` of their casts; the total over a sequence is
//! the order cost. Scenes that share a character never swap relative order.
//! The optimizer repeatedly sweeps left to right, moving each scene to the
//! frontmost position its causal predecessors allow whenever that strictly
//! lowers the order cost.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// Largest instance [`brute_force_reorder`] accepts.
pub const BRUTE_FORCE_MAX_SCENES: usize = 8;

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum ReorderError {
    #[error("brute force limited to {max} scenes, got {scenes}")]
    TooLarge { scenes: usize, max: usize },
}

/// A permutation of scenes (by original index) and its costs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneOrder<T> {
    pub permutation: Vec<usize>,
    pub original_cost: T,
    #[serde(rename = "reordered_cost")]
    pub cost: T,
}

/// Intersection over union of two casts; 0 when both are empty.
pub fn iou<T: Scalar, S: Ord>(a: &BTreeSet<S>, b: &BTreeSet<S>) -> T {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        T::zero()
    } else {
        T::from_count(inter) / T::from_count(union)
    }
}

/// Sum of `1 - iou` over adjacent scenes.
pub fn order_cost<T: Scalar, S: Ord>(rosters: &[BTreeSet<S>]) -> T {
    rosters
        .windows(2)
        .fold(T::zero(), |acc, w| acc + (T::one() - iou::<T, S>(&w[0], &w[1])))
}

/// Pairs of scenes (original indices `i < j`) that share a character.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CausalityRelation {
    pub pairs: BTreeSet<(usize, usize)>,
}

impl CausalityRelation {
    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.pairs.contains(&(i.min(j), i.max(j)))
    }

    /// Whether `permutation` keeps every related pair in original order.
    pub fn respected_by(&self, permutation: &[usize]) -> bool {
        let mut position = vec![0; permutation.len()];
        for (p, &s) in permutation.iter().enumerate() {
            position[s] = p;
        }
        self.pairs.iter().all(|&(i, j)| position[i] < position[j])
    }
}

pub fn causality<S: Ord>(rosters: &[BTreeSet<S>]) -> CausalityRelation {
    let mut pairs = BTreeSet::new();
    for i in 0..rosters.len() {
        for j in (i + 1)..rosters.len() {
            if !rosters[i].is_disjoint(&rosters[j]) {
                pairs.insert((i, j));
            }
        }
    }
    CausalityRelation { pairs }
}

/// Pairwise transition costs `1 - iou`, computed once per call.
struct Transitions<T> {
    n: usize,
    cost: Vec<T>,
    shares: Vec<bool>,
}

impl<T: Scalar> Transitions<T> {
    fn new<S: Ord>(rosters: &[BTreeSet<S>]) -> Self {
        let n = rosters.len();
        let mut cost = vec![T::zero(); n * n];
        let mut shares = vec![false; n * n];
        for i in 0..n {
            for j in 0..n {
                cost[i * n + j] = T::one() - iou::<T, S>(&rosters[i], &rosters[j]);
                shares[i * n + j] = i != j && !rosters[i].is_disjoint(&rosters[j]);
            }
        }
        Transitions { n, cost, shares }
    }

    fn sequence_cost(&self, perm: &[usize]) -> T {
        perm.windows(2).fold(T::zero(), |acc, w| acc + self.cost[w[0] * self.n + w[1]])
    }

    fn shares(&self, a: usize, b: usize) -> bool {
        self.shares[a * self.n + b]
    }
}

/// Greedy causality-preserving reordering.
pub fn reorder<T: Scalar, S: Ord>(rosters: &[BTreeSet<S>]) -> SceneOrder<T> {
    let table = Transitions::<T>::new(rosters);
    let mut perm: Vec<usize> = (0..rosters.len()).collect();
    let original_cost = table.sequence_cost(&perm);
    let mut cost = original_cost;
    'pass: loop {
        for pos in 1..perm.len() {
            let scene = perm[pos];
            let target = perm[..pos]
                .iter()
                .rposition(|&other| table.shares(other, scene))
                .map_or(0, |q| q + 1);
            if target == pos {
                continue;
            }
            let mut candidate = perm.clone();
            candidate.remove(pos);
            candidate.insert(target, scene);
            let candidate_cost = table.sequence_cost(&candidate);
            if candidate_cost < cost {
                perm = candidate;
                cost = candidate_cost;
                continue 'pass;
            }
        }
        break;
    }
    SceneOrder { permutation: perm, original_cost, cost }
}

/// Advances `perm` to its lexicographic successor; false at the last one.
fn next_permutation(perm: &mut [usize]) -> bool {
    let Some(i) = perm.windows(2).rposition(|w| w[0] < w[1]) else {
        return false;
    };
    let j = perm.iter().rposition(|&x| x > perm[i]).expect("successor exists");
    perm.swap(i, j);
    perm[i + 1..].reverse();
    true
}

/// Exhaustive minimum over causality-respecting permutations; ties go to
/// the lexicographically smallest permutation.
pub fn brute_force_reorder<T: Scalar, S: Ord>(
    rosters: &[BTreeSet<S>],
) -> Result<SceneOrder<T>, ReorderError> {
    let n = rosters.len();
    if n > BRUTE_FORCE_MAX_SCENES {
        return Err(ReorderError::TooLarge { scenes: n, max: BRUTE_FORCE_MAX_SCENES });
    }
    let table = Transitions::<T>::new(rosters);
    let relation = causality(rosters);
    let mut perm: Vec<usize> = (0..n).collect();
    let original_cost = table.sequence_cost(&perm);
    let mut best = (original_cost, perm.clone());
    loop {
        if relation.respected_by(&perm) {
            let c = table.sequence_cost(&perm);
            if c < best.0 {
                best = (c, perm.clone());
            }
        }
        if !next_permutation(&mut perm) {
            break;
        }
    }
    Ok(SceneOrder { permutation: best.1, original_cost, cost: best.0 })
}
