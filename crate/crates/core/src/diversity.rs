//! Niching-based diversity exploration for query selection.
//!
//! Selection repeatedly takes the highest-priority candidate, then forms a
//! niche of the remaining candidates within a radius of it and divides
//! their priorities by the niche's total priority. Candidates crowded around
//! an earlier pick therefore lose ground to candidates elsewhere.

use serde::{Deserialize, Serialize};

use crate::data::Features;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriorityKind {
    /// Cluster representativeness, favoring samples near their center.
    Center,
    /// Cluster uncertainty, favoring samples between adjacent clusters.
    Boundary,
}

/// Query priorities over a set of rows of some [`Features`] view.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorityField {
    pub kind: PriorityKind,
    pub rows: Vec<usize>,
    pub priorities: Vec<f64>,
}

impl PriorityField {
    pub fn new(kind: PriorityKind, rows: Vec<usize>, priorities: Vec<f64>) -> Self {
        assert_eq!(rows.len(), priorities.len(), "one priority per row");
        Self { kind, rows, priorities }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NicheConfig {
    pub radius: f64,
    pub k: usize,
}

/// Neighborhood radius of a cluster: the mean, over members, of the mean
/// distance to their `k = round(sqrt(m))` nearest fellow members.
pub fn niche_radius(members: &Features) -> NicheConfig {
    let m = members.len();
    if m < 2 {
        return NicheConfig { radius: 0.0, k: 1 };
    }
    let k = ((m as f64).sqrt().round() as usize).clamp(1, m - 1);
    let mut scratch = Vec::with_capacity(m - 1);
    let mut total = 0.0;
    for a in 0..m {
        scratch.clear();
        scratch.extend((0..m).filter(|&b| b != a).map(|b| members.dist(a, b)));
        scratch.select_nth_unstable_by(k - 1, f64::total_cmp);
        total += scratch[..k].iter().sum::<f64>() / k as f64;
    }
    NicheConfig { radius: total / m as f64, k }
}

/// Picks `count` rows from `field`, returning each with its priority at the
/// moment it was picked.
///
/// After each pick, every remaining candidate within `cfg.radius` of it
/// (inclusive) has its priority divided by `max(1, S)`, where `S` sums the
/// pick's priority and the priorities of those candidates. Sums below one
/// leave priorities untouched, so a priority never grows.
pub fn select_with_niching(
    field: &PriorityField,
    features: &Features,
    count: usize,
    cfg: &NicheConfig,
) -> Result<Vec<(usize, f64)>> {
    if count > field.len() {
        return Err(Error::CountExceedsAvailable { count, available: field.len() });
    }
    let mut priority = field.priorities.clone();
    let mut open = vec![true; field.len()];
    let mut picks = Vec::with_capacity(count);
    let mut niche = Vec::new();
    for _ in 0..count {
        let best = (0..field.len())
            .filter(|&i| open[i])
            .reduce(|a, b| {
                if priority[b] > priority[a] || (priority[b] == priority[a] && field.rows[b] < field.rows[a]) {
                    b
                } else {
                    a
                }
            })
            .expect("count <= field size");
        open[best] = false;
        picks.push((field.rows[best], priority[best]));

        niche.clear();
        niche.extend(
            (0..field.len()).filter(|&i| open[i] && features.dist(field.rows[best], field.rows[i]) <= cfg.radius),
        );
        let share = priority[best] + niche.iter().map(|&i| priority[i]).sum::<f64>();
        if share > 1.0 {
            for &i in &niche {
                priority[i] /= share;
            }
        }
    }
    Ok(picks)
}
