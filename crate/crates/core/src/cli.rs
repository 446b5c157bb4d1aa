//! Configuration and the `cluster`, `select` and `bench` commands.
//!
//! A run is described by a [`RunConfig`]: a flat TOML file whose keys can
//! each be overridden from the command line. The resolved config is echoed
//! into every report and written next to the outputs as
//! `effective_config.toml`, which reproduces the run when fed back with
//! `--config`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::clustering::{fps_cluster_with, neighboring_centers, DEFAULT_TAU};
use crate::data::{load_dataset, normalize, Dataset, LabelColumn, Normalization};
use crate::error::{Error, Result};
use crate::evaluation::{
    average_ranks, query_budget, run_cell, ExperimentConfig, ExperimentReport, RankTable, Score, Strategy,
    DEFAULT_BUDGET_FRACTION, DEFAULT_KNN_K, DEFAULT_TEST_FRACTION,
};
use crate::selection::{allocate_budget, hybrid_select, DEFAULT_RHO};
use crate::synthetic::BlobSpec;

/// Fully resolved run configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: Vec<PathBuf>,
    pub synthetic: Vec<String>,
    pub label_col: String,
    pub normalize: Normalization,
    pub budget: f64,
    pub rho: f64,
    pub strategies: Vec<Strategy>,
    pub seeds: Vec<u64>,
    pub knn_k: usize,
    pub tau: f64,
    pub test_fraction: f64,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: Vec::new(),
            synthetic: Vec::new(),
            label_col: LabelColumn::LAST.to_string(),
            normalize: Normalization::MinMax,
            budget: DEFAULT_BUDGET_FRACTION,
            rho: DEFAULT_RHO,
            strategies: vec![Strategy::Alcs, Strategy::Random],
            seeds: vec![0],
            knn_k: DEFAULT_KNN_K,
            tau: DEFAULT_TAU,
            test_fraction: DEFAULT_TEST_FRACTION,
            out: PathBuf::from("alcs-out"),
        }
    }
}

/// Partial config: what a file or the command line sets explicitly.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigOverrides {
    pub data: Option<Vec<PathBuf>>,
    pub synthetic: Option<Vec<String>>,
    pub label_col: Option<String>,
    pub normalize: Option<Normalization>,
    pub budget: Option<f64>,
    pub rho: Option<f64>,
    pub strategies: Option<Vec<Strategy>>,
    pub seeds: Option<Vec<u64>>,
    pub knn_k: Option<usize>,
    pub tau: Option<f64>,
    pub test_fraction: Option<f64>,
    pub out: Option<PathBuf>,
}

impl ConfigOverrides {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Applies `self` on top of `base`.
    pub fn apply(self, base: RunConfig) -> RunConfig {
        RunConfig {
            data: self.data.unwrap_or(base.data),
            synthetic: self.synthetic.unwrap_or(base.synthetic),
            label_col: self.label_col.unwrap_or(base.label_col),
            normalize: self.normalize.unwrap_or(base.normalize),
            budget: self.budget.unwrap_or(base.budget),
            rho: self.rho.unwrap_or(base.rho),
            strategies: self.strategies.unwrap_or(base.strategies),
            seeds: self.seeds.unwrap_or(base.seeds),
            knn_k: self.knn_k.unwrap_or(base.knn_k),
            tau: self.tau.unwrap_or(base.tau),
            test_fraction: self.test_fraction.unwrap_or(base.test_fraction),
            out: self.out.unwrap_or(base.out),
        }
    }
}

impl RunConfig {
    /// Defaults, then the config file (if any), then command-line flags.
    pub fn resolve(file: Option<&Path>, flags: ConfigOverrides) -> Result<Self> {
        let mut cfg = RunConfig::default();
        if let Some(path) = file {
            cfg = ConfigOverrides::from_file(path)?.apply(cfg);
        }
        let cfg = flags.apply(cfg);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        if !(self.budget > 0.0 && self.budget < 1.0) {
            return bad(format!("budget {} not in (0, 1)", self.budget));
        }
        if !(0.0..=1.0).contains(&self.rho) {
            return bad(format!("rho {} not in [0, 1]", self.rho));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return bad(format!("test fraction {} not in (0, 1)", self.test_fraction));
        }
        if !(0.0..=1.0).contains(&self.tau) {
            return bad(format!("tau {} not in [0, 1]", self.tau));
        }
        if self.seeds.is_empty() {
            return bad("at least one seed is required".into());
        }
        if self.strategies.is_empty() {
            return bad("at least one strategy is required".into());
        }
        if self.knn_k == 0 {
            return bad("knn k must be positive".into());
        }
        if self.data.is_empty() && self.synthetic.is_empty() {
            return bad("no dataset given (use --data or --synthetic)".into());
        }
        if let Some(missing) = self.data.iter().find(|p| !p.is_file()) {
            return bad(format!("data file {} does not exist", missing.display()));
        }
        for spec in &self.synthetic {
            spec.parse::<BlobSpec>()?;
        }
        self.label_col.parse::<LabelColumn>().expect("infallible");
        Ok(())
    }

    pub fn experiment(&self) -> ExperimentConfig {
        ExperimentConfig {
            strategies: self.strategies.clone(),
            seeds: self.seeds.clone(),
            budget_fraction: self.budget,
            rho: self.rho,
            knn_k: self.knn_k,
            tau: self.tau,
            test_fraction: self.test_fraction,
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// Loads every configured dataset (files first, then synthetic specs)
    /// and applies the configured normalization.
    pub fn datasets(&self) -> Result<Vec<(String, Dataset)>> {
        let label: LabelColumn = self.label_col.parse().expect("infallible");
        let mut out = Vec::new();
        for path in &self.data {
            let name =
                path.file_stem().map_or_else(|| path.display().to_string(), |s| s.to_string_lossy().into_owned());
            out.push((name, normalize(&load_dataset(path, &label)?, self.normalize)));
        }
        for spec in &self.synthetic {
            let spec: BlobSpec = spec.parse()?;
            out.push((spec.to_string(), normalize(&spec.generate()?, self.normalize)));
        }
        Ok(out)
    }
}

/// File-name-safe version of a dataset name.
fn slug(name: &str) -> String {
    name.chars().map(|c| if c.is_ascii_alphanumeric() || c == '.' || c == '-' || c == '_' { c } else { '-' }).collect()
}

/// Writes to a sibling temp file and renames it into place, so readers
/// never observe a partial file.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, contents).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

#[derive(Serialize)]
struct ClusterSummary<'a> {
    index: usize,
    size: usize,
    center: &'a [f64],
    members: Vec<usize>,
}

#[derive(Serialize)]
struct ClusterReport<'a> {
    dataset: &'a str,
    n: usize,
    normalization: Normalization,
    tau: f64,
    clusters_found: usize,
    clusters: Vec<ClusterSummary<'a>>,
    config: &'a RunConfig,
}

/// Clusters every dataset and writes `<out>/<name>.clusters.json`.
pub fn cmd_cluster(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for (name, ds) in cfg.datasets()? {
        let features = ds.features();
        let model = fps_cluster_with(features, cfg.tau)?;
        let clusters = (0..model.num_clusters())
            .map(|i| ClusterSummary {
                index: i,
                size: model.cluster_sizes[i],
                center: &model.centers[i],
                members: model.members(i).into_iter().map(|r| features.id(r)).collect(),
            })
            .collect();
        let report = ClusterReport {
            dataset: &name,
            n: ds.len(),
            normalization: ds.normalization(),
            tau: cfg.tau,
            clusters_found: model.num_clusters(),
            clusters,
            config: cfg,
        };
        let path = cfg.out.join(format!("{}.clusters.json", slug(&name)));
        write_atomic(&path, &serde_json::to_vec_pretty(&report)?)?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Serialize)]
struct SelectReport<'a> {
    dataset: &'a str,
    n_pool: usize,
    budget_fraction: f64,
    n_q: usize,
    rounding: &'static str,
    rho: f64,
    clusters_found: usize,
    plan: &'a crate::selection::QueryPlan,
    config: &'a RunConfig,
}

/// Selects `round(budget * n)` queries from every dataset (the whole dataset
/// is the pool) and writes `<name>.queries.csv` with one
/// `id,cluster,pass,priority` row per query plus `<name>.plan.json`.
pub fn cmd_select(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for (name, ds) in cfg.datasets()? {
        let features = ds.features();
        let model = fps_cluster_with(features, cfg.tau)?;
        let n_q = query_budget(cfg.budget, ds.len())?;
        let plan = allocate_budget(&model, n_q, cfg.rho)?;
        let neighbors = if model.num_clusters() >= 2 { Some(neighboring_centers(&model)?) } else { None };
        let queries = hybrid_select(features, &model, neighbors.as_ref(), &plan)?;

        let mut csv = String::from("id,cluster,pass,priority\n");
        for e in &queries.entries {
            let pass = match e.pass {
                crate::selection::Pass::Center => "center",
                crate::selection::Pass::Boundary => "boundary",
            };
            writeln!(csv, "{},{},{},{}", e.id, e.cluster, pass, e.priority).unwrap();
        }
        let base = slug(&name);
        let csv_path = cfg.out.join(format!("{base}.queries.csv"));
        write_atomic(&csv_path, csv.as_bytes())?;

        let report = SelectReport {
            dataset: &name,
            n_pool: ds.len(),
            budget_fraction: cfg.budget,
            n_q,
            rounding: "n_q = round_half_even(budget_fraction * n_pool), at least 1",
            rho: cfg.rho,
            clusters_found: model.num_clusters(),
            plan: &plan,
            config: cfg,
        };
        let plan_path = cfg.out.join(format!("{base}.plan.json"));
        write_atomic(&plan_path, &serde_json::to_vec_pretty(&report)?)?;
        written.push(csv_path);
        written.push(plan_path);
    }
    Ok(written)
}

#[derive(Serialize)]
struct ReportLine<'a> {
    #[serde(flatten)]
    report: &'a ExperimentReport,
    config: &'a RunConfig,
}

pub const REPORTS_FILE: &str = "reports.jsonl";
pub const SUMMARY_FILE: &str = "summary.csv";
pub const TIMINGS_FILE: &str = "timings.csv";
pub const CONFIG_FILE: &str = "effective_config.toml";

#[derive(Debug)]
pub struct BenchOutcome {
    pub reports: Vec<ExperimentReport>,
    pub accuracy_ranks: RankTable,
    pub macro_f1_ranks: RankTable,
}

/// Runs every (dataset, strategy, seed) cell and writes `reports.jsonl`,
/// `summary.csv`, `effective_config.toml` and `timings.csv` under the
/// output directory. Wall-clock times only go to `timings.csv`.
///
/// Successful cells are always written. If any cell failed, the summary is
/// not produced and the first failure is returned.
pub fn cmd_bench(cfg: &RunConfig) -> Result<BenchOutcome> {
    use rayon::prelude::*;

    let datasets = cfg.datasets()?;
    let exp = cfg.experiment();
    let mut cells: Vec<(usize, Strategy, u64)> = Vec::new();
    for d in 0..datasets.len() {
        for &s in &exp.strategies {
            cells.extend(exp.seeds.iter().map(|&seed| (d, s, seed)));
        }
    }
    let results: Vec<Result<ExperimentReport>> = cells
        .par_iter()
        .map(|&(d, strategy, seed)| {
            let (name, ds) = &datasets[d];
            run_cell(name, ds, strategy, seed, &exp).map_err(|e| Error::Cell {
                strategy: strategy.to_string(),
                seed,
                source: Box::new(e),
            })
        })
        .collect();

    let mut reports = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok(rep) => reports.push(rep),
            Err(e) => failures.push(e),
        }
    }

    let mut lines = Vec::new();
    let mut timings = String::from("dataset,strategy,seed,wall_time_ms\n");
    for rep in &reports {
        serde_json::to_writer(&mut lines, &ReportLine { report: rep, config: cfg })?;
        lines.push(b'\n');
        writeln!(timings, "{},{},{},{:.3}", rep.dataset, rep.strategy, rep.seed, rep.wall_time.as_secs_f64() * 1e3)
            .unwrap();
    }
    write_atomic(&cfg.out.join(CONFIG_FILE), cfg.to_toml().as_bytes())?;
    write_atomic(&cfg.out.join(REPORTS_FILE), &lines)?;
    write_atomic(&cfg.out.join(TIMINGS_FILE), timings.as_bytes())?;

    if let Some(first) = failures.into_iter().next() {
        return Err(first);
    }

    let accuracy_ranks = average_ranks(&scores(&reports, |r| r.accuracy))?;
    let macro_f1_ranks = average_ranks(&scores(&reports, |r| r.macro_f1))?;
    let summary = summary_csv(&reports, &accuracy_ranks, &macro_f1_ranks);
    write_atomic(&cfg.out.join(SUMMARY_FILE), summary.as_bytes())?;
    Ok(BenchOutcome { reports, accuracy_ranks, macro_f1_ranks })
}

pub fn scores(reports: &[ExperimentReport], metric: impl Fn(&ExperimentReport) -> f64) -> Vec<Score> {
    reports.iter().map(|r| Score::new(r.dataset.clone(), r.strategy.name(), metric(r))).collect()
}

/// One row per (dataset, strategy) with seed-averaged metrics and ranks,
/// followed by one `average` row per strategy holding the mean ranks.
pub fn summary_csv(reports: &[ExperimentReport], acc: &RankTable, f1: &RankTable) -> String {
    let mut out = String::from("dataset,strategy,seeds,mean_accuracy,mean_macro_f1,rank_accuracy,rank_macro_f1\n");
    for (d, dataset) in acc.datasets.iter().enumerate() {
        for (s, strategy) in acc.strategies.iter().enumerate() {
            let seeds = reports.iter().filter(|r| &r.dataset == dataset && r.strategy.name() == strategy).count();
            writeln!(
                out,
                "{dataset},{strategy},{seeds},{},{},{},{}",
                acc.scores[d][s], f1.scores[d][s], acc.ranks[d][s], f1.ranks[d][s]
            )
            .unwrap();
        }
    }
    for (s, strategy) in acc.strategies.iter().enumerate() {
        let n = acc.datasets.len() as f64;
        let mean_acc = acc.scores.iter().map(|row| row[s]).sum::<f64>() / n;
        let mean_f1 = f1.scores.iter().map(|row| row[s]).sum::<f64>() / n;
        let seeds = reports.iter().filter(|r| r.strategy.name() == strategy).count();
        writeln!(out, "average,{strategy},{seeds},{mean_acc},{mean_f1},{},{}", acc.mean_ranks[s], f1.mean_ranks[s])
            .unwrap();
    }
    out
}
