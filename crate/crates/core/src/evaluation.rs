//! Simulated annotator, k-NN classifier, metrics, baselines and the
//! benchmark protocol.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{Clusterer, FpsClustering, DEFAULT_TAU};
use crate::data::{euclidean, split_pool, ClassId, Dataset, Normalization};
use crate::error::{Error, Result};
use crate::selection::{select_queries, DEFAULT_RHO};

pub const DEFAULT_KNN_K: usize = 5;
pub const DEFAULT_TEST_FRACTION: f64 = 0.3;
pub const DEFAULT_BUDGET_FRACTION: f64 = 0.1;

/// Hands out ground-truth labels for pool samples and counts the requests.
pub struct Oracle<'a> {
    dataset: &'a Dataset,
    in_pool: Vec<bool>,
    queries: usize,
}

impl<'a> Oracle<'a> {
    pub fn new(dataset: &'a Dataset, pool: &[usize]) -> Self {
        let mut in_pool = vec![false; dataset.len()];
        for &id in pool {
            in_pool[id] = true;
        }
        Self { dataset, in_pool, queries: 0 }
    }

    /// Labels for `ids`. Fails without counting anything if any id lies
    /// outside the unlabeled pool.
    pub fn query_labels(&mut self, ids: &[usize]) -> Result<Vec<(usize, ClassId)>> {
        if let Some(&bad) = ids.iter().find(|&&id| !self.in_pool.get(id).copied().unwrap_or(false)) {
            return Err(Error::NotInPool(bad));
        }
        self.queries += ids.len();
        Ok(ids.iter().map(|&id| (id, self.dataset.label(id))).collect())
    }

    pub fn queries(&self) -> usize {
        self.queries
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Labeled {
    pub id: usize,
    pub features: Vec<f64>,
    pub label: ClassId,
}

impl Labeled {
    pub fn from_dataset(ds: &Dataset, id: usize) -> Self {
        let s = ds.sample(id);
        Self { id, features: s.features.to_vec(), label: s.label }
    }
}

/// Majority-vote k-nearest-neighbor classifier.
#[derive(Debug, Clone)]
pub struct KnnClassifier {
    k: usize,
    train: Vec<Labeled>,
}

pub fn train_knn(labeled: Vec<Labeled>, k: usize) -> Result<KnnClassifier> {
    if labeled.is_empty() {
        return Err(Error::EmptyTrainingSet);
    }
    if k == 0 || k > labeled.len() {
        return Err(Error::InvalidParameter(format!("k = {k} with {} training samples", labeled.len())));
    }
    Ok(KnnClassifier { k, train: labeled })
}

impl KnnClassifier {
    pub fn k(&self) -> usize {
        self.k
    }

    /// Distance ties go to the lower training id, vote ties to the smaller
    /// class id.
    pub fn predict(&self, x: &[f64]) -> ClassId {
        let mut near: Vec<(f64, usize, ClassId)> =
            self.train.iter().map(|t| (euclidean(x, &t.features), t.id, t.label)).collect();
        let by_distance =
            |a: &(f64, usize, ClassId), b: &(f64, usize, ClassId)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
        if self.k < near.len() {
            near.select_nth_unstable_by(self.k - 1, by_distance);
        }
        let mut votes: BTreeMap<ClassId, usize> = BTreeMap::new();
        for &(_, _, label) in &near[..self.k] {
            *votes.entry(label).or_default() += 1;
        }
        // BTreeMap iterates in ascending class order, so the first maximum wins ties.
        votes.into_iter().fold((0, 0), |best, (c, n)| if n > best.1 { (c, n) } else { best }).0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub macro_f1: f64,
}

/// Accuracy and macro-F1 over the classes present in either `truth` or
/// `predicted`. A class with no precision and no recall scores F1 = 0.
pub fn metrics(truth: &[ClassId], predicted: &[ClassId]) -> Metrics {
    assert_eq!(truth.len(), predicted.len());
    let mut tp: BTreeMap<ClassId, usize> = BTreeMap::new();
    let mut fp: BTreeMap<ClassId, usize> = BTreeMap::new();
    let mut fn_: BTreeMap<ClassId, usize> = BTreeMap::new();
    let mut correct = 0;
    for (&t, &p) in truth.iter().zip(predicted) {
        tp.entry(t).or_default();
        tp.entry(p).or_default();
        if t == p {
            correct += 1;
            *tp.get_mut(&t).unwrap() += 1;
        } else {
            *fp.entry(p).or_default() += 1;
            *fn_.entry(t).or_default() += 1;
        }
    }
    let f1: f64 = tp
        .iter()
        .map(|(c, &tp)| {
            let fp = fp.get(c).copied().unwrap_or(0);
            let fn_ = fn_.get(c).copied().unwrap_or(0);
            if tp == 0 {
                0.0
            } else {
                2.0 * tp as f64 / (2 * tp + fp + fn_) as f64
            }
        })
        .sum();
    let classes = tp.len().max(1);
    Metrics { accuracy: correct as f64 / truth.len().max(1) as f64, macro_f1: f1 / classes as f64 }
}

pub fn evaluate(clf: &KnnClassifier, test: &[Labeled]) -> Result<Metrics> {
    if test.is_empty() {
        return Err(Error::EmptyTestSet);
    }
    let truth: Vec<ClassId> = test.iter().map(|t| t.label).collect();
    let predicted: Vec<ClassId> = test.par_iter().map(|t| clf.predict(&t.features)).collect();
    Ok(metrics(&truth, &predicted))
}

/// Uniform sample of `n_q` pool ids without replacement.
///
/// Draws from stream 1 of the cell's seed, so it never shares random bits
/// with the pool split (stream 0).
pub fn baseline_random(pool: &[usize], n_q: usize, seed: u64) -> Result<Vec<usize>> {
    if n_q > pool.len() {
        return Err(Error::BudgetExceedsPool { n_q, pool: pool.len() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    Ok(index::sample(&mut rng, pool.len(), n_q).into_iter().map(|i| pool[i]).collect())
}

/// One score of one strategy on one dataset. Repeated cells (several
/// seeds) are averaged before ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct Score {
    pub dataset: String,
    pub strategy: String,
    pub value: f64,
}

impl Score {
    pub fn new(dataset: impl Into<String>, strategy: impl Into<String>, value: f64) -> Self {
        Self { dataset: dataset.into(), strategy: strategy.into(), value }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RankTable {
    pub datasets: Vec<String>,
    pub strategies: Vec<String>,
    /// Mean score per `[dataset][strategy]`.
    pub scores: Vec<Vec<f64>>,
    /// Rank per `[dataset][strategy]`, 1 = best, ties share the mid-rank.
    pub ranks: Vec<Vec<f64>>,
    pub mean_ranks: Vec<f64>,
}

impl RankTable {
    pub fn mean_rank(&self, strategy: &str) -> Option<f64> {
        self.strategies.iter().position(|s| s == strategy).map(|i| self.mean_ranks[i])
    }
}

/// Ranks strategies per dataset (higher score is better) and averages the
/// ranks over datasets. Datasets and strategies keep first-seen order.
pub fn average_ranks(scores: &[Score]) -> Result<RankTable> {
    let mut datasets: Vec<String> = Vec::new();
    let mut strategies: Vec<String> = Vec::new();
    for s in scores {
        if !datasets.contains(&s.dataset) {
            datasets.push(s.dataset.clone());
        }
        if !strategies.contains(&s.strategy) {
            strategies.push(s.strategy.clone());
        }
    }
    let mut sums = vec![vec![(0.0, 0usize); strategies.len()]; datasets.len()];
    for s in scores {
        let d = datasets.iter().position(|x| *x == s.dataset).unwrap();
        let t = strategies.iter().position(|x| *x == s.strategy).unwrap();
        sums[d][t].0 += s.value;
        sums[d][t].1 += 1;
    }
    let mut table = Vec::with_capacity(datasets.len());
    for (d, row) in sums.iter().enumerate() {
        let mut means = Vec::with_capacity(row.len());
        for (t, &(sum, n)) in row.iter().enumerate() {
            if n == 0 {
                return Err(Error::MissingCell { dataset: datasets[d].clone(), strategy: strategies[t].clone() });
            }
            means.push(sum / n as f64);
        }
        table.push(means);
    }
    let ranks: Vec<Vec<f64>> = table.iter().map(|row| mid_ranks(row)).collect();
    let mean_ranks =
        (0..strategies.len()).map(|t| ranks.iter().map(|r| r[t]).sum::<f64>() / datasets.len().max(1) as f64).collect();
    Ok(RankTable { datasets, strategies, scores: table, ranks, mean_ranks })
}

/// Descending ranks with ties sharing the average of their positions.
fn mid_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[b].total_cmp(&values[a]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // Positions start+1 ..= end share their mean.
        let rank = (start + 1 + end) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    /// Hybrid center + boundary selection with niching.
    Alcs,
    /// Center pass only (boundary share forced to 0).
    Center,
    /// Uniform random sampling from the pool.
    Random,
}

impl Strategy {
    pub fn name(self) -> &'static str {
        match self {
            Strategy::Alcs => "alcs",
            Strategy::Center => "center",
            Strategy::Random => "random",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "alcs" => Ok(Strategy::Alcs),
            "center" | "center-only" => Ok(Strategy::Center),
            "random" => Ok(Strategy::Random),
            other => Err(Error::InvalidParameter(format!("unknown strategy {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub strategies: Vec<Strategy>,
    pub seeds: Vec<u64>,
    pub budget_fraction: f64,
    pub rho: f64,
    pub knn_k: usize,
    pub tau: f64,
    pub test_fraction: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            strategies: vec![Strategy::Alcs, Strategy::Random],
            seeds: vec![0],
            budget_fraction: DEFAULT_BUDGET_FRACTION,
            rho: DEFAULT_RHO,
            knn_k: DEFAULT_KNN_K,
            tau: DEFAULT_TAU,
            test_fraction: DEFAULT_TEST_FRACTION,
        }
    }
}

/// Outcome of one (dataset, strategy, seed) cell.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentReport {
    pub dataset: String,
    pub strategy: Strategy,
    pub seed: u64,
    pub normalization: Normalization,
    pub n_pool: usize,
    pub n_test: usize,
    pub n_q: usize,
    pub budget_fraction: f64,
    pub stratified_split: bool,
    /// Labels handed out by the oracle; always equals `n_q`.
    pub oracle_queries: usize,
    /// Effective k after clamping to the number of labeled samples.
    pub knn_k: usize,
    pub accuracy: f64,
    pub macro_f1: f64,
    /// Clusters found; absent for strategies that do not cluster.
    pub clusters_found: Option<usize>,
    /// Kept out of serialized reports so they stay byte-reproducible.
    #[serde(skip)]
    pub wall_time: Duration,
}

/// Number of queries for a pool: `round(fraction * n_U)`, half to even,
/// at least one.
pub fn query_budget(budget_fraction: f64, n_unlabeled: usize) -> Result<usize> {
    if !(budget_fraction > 0.0 && budget_fraction < 1.0) {
        return Err(Error::InvalidParameter(format!("budget fraction {budget_fraction} not in (0, 1)")));
    }
    Ok(((budget_fraction * n_unlabeled as f64).round_ties_even() as usize).clamp(1, n_unlabeled.max(1)))
}

/// Runs every (strategy, seed) cell on one dataset. Reports come back in
/// (strategy, seed) order regardless of how the cells were scheduled.
pub fn run_experiment(name: &str, ds: &Dataset, cfg: &ExperimentConfig) -> Result<Vec<ExperimentReport>> {
    if cfg.seeds.is_empty() || cfg.strategies.is_empty() {
        return Err(Error::InvalidParameter("need at least one strategy and one seed".into()));
    }
    let cells: Vec<(Strategy, u64)> =
        cfg.strategies.iter().flat_map(|&s| cfg.seeds.iter().map(move |&seed| (s, seed))).collect();
    cells
        .par_iter()
        .map(|&(strategy, seed)| {
            run_cell(name, ds, strategy, seed, cfg).map_err(|e| Error::Cell {
                strategy: strategy.to_string(),
                seed,
                source: Box::new(e),
            })
        })
        .collect()
}

pub fn run_cell(
    name: &str,
    ds: &Dataset,
    strategy: Strategy,
    seed: u64,
    cfg: &ExperimentConfig,
) -> Result<ExperimentReport> {
    let start = Instant::now();
    let split = split_pool(ds, seed, cfg.test_fraction)?;
    let n_q = query_budget(cfg.budget_fraction, split.n_unlabeled())?;

    let (queried, clusters_found) = match strategy {
        Strategy::Random => (baseline_random(&split.unlabeled_ids, n_q, seed)?, None),
        Strategy::Alcs | Strategy::Center => {
            let pool = ds.view(&split.unlabeled_ids);
            let model = FpsClustering { tau: cfg.tau }.cluster(&pool)?;
            let rho = if strategy == Strategy::Center { 0.0 } else { cfg.rho };
            let picks = select_queries(&pool, &model, n_q, rho)?;
            (picks.ids(), Some(model.num_clusters()))
        }
    };

    let mut oracle = Oracle::new(ds, &split.unlabeled_ids);
    let train: Vec<Labeled> = oracle
        .query_labels(&queried)?
        .into_iter()
        .map(|(id, label)| Labeled { id, features: ds.sample(id).features.to_vec(), label })
        .collect();
    let k = cfg.knn_k.min(train.len());
    let clf = train_knn(train, k)?;
    let test: Vec<Labeled> = split.test_ids.iter().map(|&id| Labeled::from_dataset(ds, id)).collect();
    let m = evaluate(&clf, &test)?;

    Ok(ExperimentReport {
        dataset: name.to_string(),
        strategy,
        seed,
        normalization: ds.normalization(),
        n_pool: split.n_unlabeled(),
        n_test: split.test_ids.len(),
        n_q,
        budget_fraction: cfg.budget_fraction,
        stratified_split: split.stratified,
        oracle_queries: oracle.queries(),
        knn_k: k,
        accuracy: m.accuracy,
        macro_f1: m.macro_f1,
        clusters_found,
        wall_time: start.elapsed(),
    })
}
