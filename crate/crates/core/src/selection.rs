//! Hybrid center / bi-cluster boundary query selection.
//!
//! The query budget is split across clusters in proportion to their size.
//! Inside each cluster a share `rho` goes to samples between the cluster and
//! its two nearest neighboring clusters, the rest to samples near the
//! center. Both passes pick through [`select_with_niching`].

use rayon::prelude::*;
use serde::Serialize;

use crate::clustering::{ClusterModel, NeighborInfo};
use crate::data::{euclidean, Features};
use crate::diversity::{niche_radius, select_with_niching, PriorityField, PriorityKind};
use crate::error::{Error, Result};

pub const DEFAULT_RHO: f64 = 0.5;

/// Budget of one cluster.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClusterBudget {
    pub cluster: usize,
    pub size: usize,
    pub budget: usize,
    pub center_count: usize,
    pub boundary_count: usize,
    pub rho: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryPlan {
    pub total_budget: usize,
    pub clusters: Vec<ClusterBudget>,
}

/// Round half to even.
fn round_even(x: f64) -> usize {
    x.round_ties_even().max(0.0) as usize
}

/// Splits `n_q` queries across clusters with the same boundary share `rho`.
pub fn allocate_budget(model: &ClusterModel, n_q: usize, rho: f64) -> Result<QueryPlan> {
    allocate_budget_with(model, n_q, &vec![rho; model.num_clusters()])
}

/// Splits `n_q` queries across clusters, `rho[i]` being cluster `i`'s
/// boundary share.
///
/// Each cluster first gets `round(|C_i| / n_U * n_q)` (half to even). The
/// total is then repaired one unit at a time: a shortfall goes to the
/// cluster with the largest remaining fractional claim, a surplus comes out
/// of the one with the smallest; ties prefer the larger cluster, then the
/// lower index. No cluster is given more than its size.
///
/// With a single cluster there are no neighbors, so its share is forced to
/// 0. A boundary count larger than the cluster's candidate set spills over
/// to the center count.
pub fn allocate_budget_with(model: &ClusterModel, n_q: usize, rho: &[f64]) -> Result<QueryPlan> {
    let sizes = &model.cluster_sizes;
    let n_u: usize = sizes.iter().sum();
    if sizes.is_empty() || n_u == 0 {
        return Err(Error::InvalidParameter("cluster model is empty".into()));
    }
    if n_q == 0 {
        return Err(Error::ZeroBudget);
    }
    if n_q > n_u {
        return Err(Error::BudgetExceedsPool { n_q, pool: n_u });
    }
    if rho.len() != sizes.len() {
        return Err(Error::DimensionMismatch { left: sizes.len(), right: rho.len() });
    }
    if let Some(r) = rho.iter().find(|r| !(0.0..=1.0).contains(*r)) {
        return Err(Error::InvalidParameter(format!("rho {r} not in [0, 1]")));
    }

    let raw: Vec<f64> = sizes.iter().map(|&s| s as f64 / n_u as f64 * n_q as f64).collect();
    let mut budget: Vec<usize> = raw.iter().zip(sizes).map(|(&r, &s)| round_even(r).min(s)).collect();
    let by_claim = |a: usize, b: usize, budget: &[usize]| {
        let ra = raw[a] - budget[a] as f64;
        let rb = raw[b] - budget[b] as f64;
        ra.total_cmp(&rb).then(sizes[a].cmp(&sizes[b])).then(b.cmp(&a))
    };
    loop {
        let total: usize = budget.iter().sum();
        if total < n_q {
            let i = (0..sizes.len())
                .filter(|&i| budget[i] < sizes[i])
                .max_by(|&a, &b| by_claim(a, b, &budget))
                .expect("n_q <= n_U leaves room");
            budget[i] += 1;
        } else if total > n_q {
            let i = (0..sizes.len())
                .filter(|&i| budget[i] > 0)
                .min_by(|&a, &b| {
                    let ra = raw[a] - budget[a] as f64;
                    let rb = raw[b] - budget[b] as f64;
                    ra.total_cmp(&rb).then(sizes[b].cmp(&sizes[a])).then(a.cmp(&b))
                })
                .expect("positive total");
            budget[i] -= 1;
        } else {
            break;
        }
    }

    let single = sizes.len() == 1;
    let clusters = (0..sizes.len())
        .map(|i| {
            let rho = if single { 0.0 } else { rho[i] };
            let b = budget[i];
            let center = round_even(b as f64 * (1.0 - rho)).min(b);
            let candidates = sizes[i].div_ceil(2);
            let boundary = (b - center).min(candidates);
            ClusterBudget {
                cluster: i,
                size: sizes[i],
                budget: b,
                center_count: b - boundary,
                boundary_count: boundary,
                rho,
            }
        })
        .collect();
    Ok(QueryPlan { total_budget: n_q, clusters })
}

/// Representativeness `1 / (1 + e^d)` of a sample at distance `d` from its
/// cluster center.
pub fn cluster_representativeness(d: f64) -> Result<f64> {
    if d.is_nan() || d < 0.0 {
        return Err(Error::NegativeDistance(d));
    }
    Ok(1.0 / (1.0 + d.exp()))
}

/// Uncertainty `1 / (1 + e^((d1 + d2) / (d_ref1 + d_ref2)))`: `d1`, `d2` are
/// a candidate's distances to the two neighboring centers, the references
/// are the distances from its own center to those neighbors.
pub fn cluster_uncertainty(d1: f64, d2: f64, d_ref1: f64, d_ref2: f64) -> Result<f64> {
    let reference = d_ref1 + d_ref2;
    if reference.is_nan() || reference <= 0.0 {
        return Err(Error::NonPositiveReference(reference));
    }
    for d in [d1, d2] {
        if d.is_nan() || d < 0.0 {
            return Err(Error::NegativeDistance(d));
        }
    }
    Ok(1.0 / (1.0 + ((d1 + d2) / reference).exp()))
}

/// The `ceil(|C_i| / 2)` members of cluster `i` farthest from its center,
/// ties to the lower row. Returned in ascending row order.
pub fn boundary_candidates(model: &ClusterModel, i: usize) -> Vec<usize> {
    let mut members = model.members(i);
    let take = members.len().div_ceil(2);
    members.sort_by(|&a, &b| model.center_distances[b].total_cmp(&model.center_distances[a]).then(a.cmp(&b)));
    members.truncate(take);
    members.sort_unstable();
    members
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Pass {
    Center,
    Boundary,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QueryEntry {
    pub id: usize,
    /// Row in the clustered feature view.
    #[serde(skip)]
    pub row: usize,
    pub cluster: usize,
    pub pass: Pass,
    pub priority: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct QuerySet {
    pub entries: Vec<QueryEntry>,
}

impl QuerySet {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> Vec<usize> {
        self.entries.iter().map(|e| e.id).collect()
    }
}

/// Runs the center pass then the boundary pass in every cluster.
///
/// Samples already taken by the center pass are not boundary candidates. If
/// too few candidates remain, the shortfall is filled by continuing the
/// center pass over the cluster's untaken members.
pub fn hybrid_select(
    features: &Features,
    model: &ClusterModel,
    neighbors: Option<&NeighborInfo>,
    plan: &QueryPlan,
) -> Result<QuerySet> {
    if model.num_samples() != features.len() || plan.clusters.len() != model.num_clusters() {
        return Err(Error::InvalidParameter("query plan does not match the cluster model".into()));
    }
    let per_cluster: Vec<Result<Vec<QueryEntry>>> =
        plan.clusters.par_iter().map(|b| select_in_cluster(features, model, neighbors, b)).collect();
    let mut entries = Vec::with_capacity(plan.total_budget);
    for picks in per_cluster {
        entries.extend(picks?);
    }
    Ok(QuerySet { entries })
}

fn select_in_cluster(
    features: &Features,
    model: &ClusterModel,
    neighbors: Option<&NeighborInfo>,
    budget: &ClusterBudget,
) -> Result<Vec<QueryEntry>> {
    if budget.budget == 0 {
        return Ok(Vec::new());
    }
    let i = budget.cluster;
    let members = model.members(i);
    let cfg = niche_radius(&features.select_rows(&members));
    let entry = |pass| {
        move |(row, priority): (usize, f64)| QueryEntry { id: features.id(row), row, cluster: i, pass, priority }
    };

    let center_field = |rows: Vec<usize>| -> Result<PriorityField> {
        let p = rows.iter().map(|&r| cluster_representativeness(model.center_distances[r])).collect::<Result<_>>()?;
        Ok(PriorityField::new(PriorityKind::Center, rows, p))
    };

    let mut taken = vec![false; features.len()];
    let mut out: Vec<QueryEntry> =
        select_with_niching(&center_field(members.clone())?, features, budget.center_count, &cfg)?
            .into_iter()
            .map(entry(Pass::Center))
            .collect();
    for e in &out {
        taken[e.row] = true;
    }

    if budget.boundary_count > 0 {
        let nb = neighbors.ok_or(Error::SingleCluster)?.get(i).ok_or(Error::SingleCluster)?;
        let rows: Vec<usize> = boundary_candidates(model, i).into_iter().filter(|&r| !taken[r]).collect();
        let p = rows
            .iter()
            .map(|&r| {
                let x = features.row(r);
                let d1 = euclidean(x, &model.centers[nb.nc1]);
                let d2 = euclidean(x, &model.centers[nb.nc2]);
                cluster_uncertainty(d1, d2, nb.d_ref1, nb.d_ref2)
            })
            .collect::<Result<_>>()?;
        let count = budget.boundary_count.min(rows.len());
        let field = PriorityField::new(PriorityKind::Boundary, rows, p);
        for e in select_with_niching(&field, features, count, &cfg)?.into_iter().map(entry(Pass::Boundary)) {
            taken[e.row] = true;
            out.push(e);
        }
    }

    let shortfall = budget.budget - out.len();
    if shortfall > 0 {
        let rest: Vec<usize> = members.into_iter().filter(|&r| !taken[r]).collect();
        out.extend(
            select_with_niching(&center_field(rest)?, features, shortfall, &cfg)?.into_iter().map(entry(Pass::Center)),
        );
    }
    Ok(out)
}

/// Budget allocation, neighbor lookup and hybrid selection in one call.
pub fn select_queries(features: &Features, model: &ClusterModel, n_q: usize, rho: f64) -> Result<QuerySet> {
    let plan = allocate_budget(model, n_q, rho)?;
    let neighbors = if model.num_clusters() >= 2 { Some(crate::clustering::neighboring_centers(model)?) } else { None };
    hybrid_select(features, model, neighbors.as_ref(), &plan)
}
