#![allow(dead_code)]

use std::collections::BTreeMap;

use alcs::clustering::ClusterModel;
use alcs::data::Features;
use alcs::evaluation::Labeled;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_points(rng: &mut impl Rng, n: usize, dim: usize) -> Features {
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
    Features::from_rows(&rows).unwrap()
}

/// A model with the given cluster sizes; geometry is irrelevant.
pub fn synthetic_model(sizes: &[usize]) -> ClusterModel {
    let assignments: Vec<usize> = sizes.iter().enumerate().flat_map(|(c, &s)| std::iter::repeat_n(c, s)).collect();
    ClusterModel {
        centers: (0..sizes.len()).map(|c| vec![c as f64]).collect(),
        center_distances: vec![0.0; assignments.len()],
        assignments,
        cluster_sizes: sizes.to_vec(),
    }
}

/// Sorts every training point by (distance, id), votes over the first k,
/// breaks vote ties towards the smaller class.
pub fn brute_knn(train: &[Labeled], q: &[f64], k: usize) -> usize {
    let mut all: Vec<(f64, usize, usize)> = train
        .iter()
        .map(|t| (t.features.iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt(), t.id, t.label))
        .collect();
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
    let mut votes: BTreeMap<usize, usize> = BTreeMap::new();
    for &(_, _, l) in &all[..k] {
        *votes.entry(l).or_default() += 1;
    }
    let top = *votes.values().max().unwrap();
    *votes.iter().find(|(_, &v)| v == top).unwrap().0
}

/// Accuracy and macro-F1 from a dense confusion matrix over the union of
/// observed classes.
pub fn brute_metrics(truth: &[usize], pred: &[usize]) -> (f64, f64) {
    let classes: Vec<usize> = {
        let mut c: Vec<usize> = truth.iter().chain(pred).copied().collect();
        c.sort();
        c.dedup();
        c
    };
    let n = classes.iter().max().map_or(0, |m| m + 1);
    let mut confusion = vec![vec![0usize; n]; n];
    for (&t, &p) in truth.iter().zip(pred) {
        confusion[t][p] += 1;
    }
    let correct: usize = (0..n).map(|c| confusion[c][c]).sum();
    let f1s: Vec<f64> = classes
        .iter()
        .map(|&c| {
            let tp = confusion[c][c] as f64;
            let predicted: usize = (0..n).map(|t| confusion[t][c]).sum();
            let actual: usize = confusion[c].iter().sum();
            let precision = if predicted > 0 { tp / predicted as f64 } else { 0.0 };
            let recall = if actual > 0 { tp / actual as f64 } else { 0.0 };
            if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            }
        })
        .collect();
    (correct as f64 / truth.len() as f64, f1s.iter().sum::<f64>() / f1s.len() as f64)
}

/// Best agreement between two labelings over all one-to-one label matchings
/// (exhaustive over permutations of the smaller label set).
pub fn best_match_agreement(truth: &[usize], found: &[usize]) -> f64 {
    let kt = truth.iter().max().map_or(0, |m| m + 1);
    let kf = found.iter().max().map_or(0, |m| m + 1);
    let mut counts = vec![vec![0usize; kf]; kt];
    for (&t, &f) in truth.iter().zip(found) {
        counts[t][f] += 1;
    }
    fn search(counts: &[Vec<usize>], row: usize, used: &mut Vec<bool>) -> usize {
        if row == counts.len() {
            return 0;
        }
        let mut best = search(counts, row + 1, used);
        for f in 0..used.len() {
            if !used[f] {
                used[f] = true;
                best = best.max(counts[row][f] + search(counts, row + 1, used));
                used[f] = false;
            }
        }
        best
    }
    search(&counts, 0, &mut vec![false; kf]) as f64 / truth.len() as f64
}
