//! Exhaustive search over (threshold, cutoff, min_count).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::assoc::{associate, trial_cost, CostParams};
use crate::discrepancy::{Metric, ScoredCloud, Segmentation};
use crate::error::{Error, Result};
use crate::geom::Point3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub thresholds: Vec<f64>,
    pub cutoffs: Vec<f64>,
    pub min_counts: Vec<u32>,
}

fn increasing<T: PartialOrd>(v: &[T]) -> bool {
    !v.is_empty() && v.windows(2).all(|w| w[0] < w[1])
}

impl GridSpec {
    pub fn new(thresholds: Vec<f64>, cutoffs: Vec<f64>, min_counts: Vec<u32>) -> Result<Self> {
        let g = Self {
            thresholds,
            cutoffs,
            min_counts,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !increasing(&self.thresholds) || !increasing(&self.cutoffs) || !increasing(&self.min_counts) {
            return Err(Error::param("grid lists must be non-empty and strictly increasing"));
        }
        if !(self.cutoffs[0] > 0.0) {
            return Err(Error::param("cutoffs must be > 0"));
        }
        Ok(())
    }

    pub fn size(&self) -> usize {
        self.thresholds.len() * self.cutoffs.len() * self.min_counts.len()
    }
}

/// `n` evenly spaced values from `a` to `b` inclusive.
pub fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![a],
        _ => (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// Nearest-rank percentile (`q` in [0, 1]) of a non-empty sample.
pub fn percentile(values: &[f64], q: f64) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let rank = (q * v.len() as f64).ceil() as usize;
    Some(v[rank.clamp(1, v.len()) - 1])
}

/// Default upper threshold bound per metric.
pub fn threshold_upper_bound(metric: Metric) -> f64 {
    match metric {
        Metric::MDistance => 3.0,
        Metric::L2 => 0.05,
    }
}

/// 20 thresholds from the smallest per-trial 25th percentile of smoothed
/// scores up to the metric's bound, 30 cutoffs in [0.05, 1], min counts 0–9.
pub fn standard_grid(trials: &[&ScoredCloud], metric: Metric) -> Result<GridSpec> {
    let lower = trials
        .iter()
        .filter_map(|s| percentile(&s.smoothed_scores, 0.25))
        .fold(f64::INFINITY, f64::min);
    let upper = threshold_upper_bound(metric);
    if !(lower < upper) {
        return Err(Error::param(format!("threshold lower bound {lower} is not below {upper}")));
    }
    GridSpec::new(linspace(lower, upper, 20), linspace(0.05, 1.0, 30), (0..=9).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub threshold: f64,
    pub cutoff: f64,
    pub min_count: u32,
    pub mean_cost: f64,
}

/// A validation trial: scored query plus its true FOD centroids.
#[derive(Debug, Clone, Copy)]
pub struct Trial<'a> {
    pub scored: &'a ScoredCloud,
    pub truth: &'a [Point3],
}

/// Mean trial cost of every grid triple, indexed `[threshold][cutoff][min_count]`.
pub fn grid_costs(trials: &[Trial<'_>], spec: &GridSpec, params: &CostParams) -> Result<Vec<Vec<Vec<f64>>>> {
    spec.validate()?;
    if trials.is_empty() {
        return Err(Error::param("grid search needs at least one trial"));
    }
    let max_cutoff = *spec.cutoffs.last().unwrap();
    let jobs: Vec<(usize, usize)> = (0..spec.thresholds.len())
        .flat_map(|t| (0..trials.len()).map(move |k| (t, k)))
        .collect();
    // per (threshold, trial): cost for every (cutoff, min_count)
    let per: Vec<Vec<Vec<f64>>> = jobs
        .par_iter()
        .map(|&(t, k)| {
            let tr = trials[k];
            let seg = Segmentation::new(tr.scored, spec.thresholds[t], max_cutoff);
            spec.cutoffs
                .iter()
                .map(|&c| {
                    let clusters = seg.clusters(tr.scored, c, 0);
                    spec.min_counts
                        .iter()
                        .map(|&mc| {
                            let cents: Vec<Point3> = clusters
                                .iter()
                                .filter(|cl| cl.point_count_weighted >= u64::from(mc))
                                .map(|cl| cl.centroid)
                                .collect();
                            trial_cost(&associate(tr.truth, &cents, params.penalty_distance), params)
                        })
                        .collect()
                })
                .collect()
        })
        .collect();
    let n = trials.len();
    Ok((0..spec.thresholds.len())
        .map(|t| {
            (0..spec.cutoffs.len())
                .map(|c| {
                    (0..spec.min_counts.len())
                        .map(|m| (0..n).map(|k| per[t * n + k][c][m]).sum::<f64>() / n as f64)
                        .collect()
                })
                .collect()
        })
        .collect())
}

/// Argmin of the mean trial cost; ties go to the lower threshold, then
/// cutoff, then min count.
pub fn grid_search(trials: &[Trial<'_>], spec: &GridSpec, params: &CostParams) -> Result<GridResult> {
    let costs = grid_costs(trials, spec, params)?;
    let mut best: Option<GridResult> = None;
    for (t, row) in costs.iter().enumerate() {
        for (c, col) in row.iter().enumerate() {
            for (m, &cost) in col.iter().enumerate() {
                if best.is_none_or(|b| cost < b.mean_cost) {
                    best = Some(GridResult {
                        threshold: spec.thresholds[t],
                        cutoff: spec.cutoffs[c],
                        min_count: spec.min_counts[m],
                        mean_cost: cost,
                    });
                }
            }
        }
    }
    Ok(best.expect("grid is non-empty"))
}
