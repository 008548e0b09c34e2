//! Candidate–FOD association and the per-trial cost.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Point3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostParams {
    /// Weight of each unassociated candidate.
    pub lambda: f64,
    /// Distance charged to a FOD when a trial has no candidates at all.
    pub penalty_distance: f64,
}

impl CostParams {
    pub fn new(lambda: f64, penalty_distance: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::param("lambda must be > 0"));
        }
        if !(penalty_distance >= 0.0) {
            return Err(Error::param("penalty_distance must be >= 0"));
        }
        Ok(Self {
            lambda,
            penalty_distance,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssociationResult {
    pub n: usize,
    pub distances: Vec<f64>,
    /// Candidates chosen by no FOD.
    pub m: usize,
    /// FOD index → nearest candidate index (`None` when there are none).
    pub mapping: Vec<Option<usize>>,
}

/// Maps each FOD centroid to its nearest candidate centroid (lower index on
/// ties).
pub fn associate(actual: &[Point3], candidates: &[Point3], penalty_distance: f64) -> AssociationResult {
    let mut used = vec![false; candidates.len()];
    let mut distances = Vec::with_capacity(actual.len());
    let mut mapping = Vec::with_capacity(actual.len());
    for a in actual {
        let best = candidates
            .iter()
            .enumerate()
            .map(|(j, c)| (j, (a - c).norm()))
            .fold(None, |b: Option<(usize, f64)>, c| match b {
                Some(b) if b.1 <= c.1 => Some(b),
                _ => Some(c),
            });
        match best {
            Some((j, d)) => {
                used[j] = true;
                distances.push(d);
                mapping.push(Some(j));
            }
            None => {
                distances.push(penalty_distance);
                mapping.push(None);
            }
        }
    }
    AssociationResult {
        n: actual.len(),
        distances,
        m: used.iter().filter(|u| !**u).count(),
        mapping,
    }
}

/// `c = (1/n) Σ d_i + λ m`, with the first term 0 when `n = 0`.
pub fn trial_cost(assoc: &AssociationResult, params: &CostParams) -> f64 {
    let mean = if assoc.n == 0 {
        0.0
    } else {
        assoc.distances.iter().sum::<f64>() / assoc.n as f64
    };
    mean + params.lambda * assoc.m as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shared_candidate() {
        let a = [Point3::new(-1.0, 0.0, 0.0), Point3::new(1.0, 0.0, 0.0)];
        let r = associate(&a, &[Point3::origin()], 5.0);
        assert_eq!(r.mapping, vec![Some(0), Some(0)]);
        assert_eq!(r.m, 0);
    }

    #[test]
    fn no_fods() {
        let c = [Point3::origin(); 3];
        let r = associate(&[], &c, 5.0);
        assert_eq!((r.n, r.m), (0, 3));
        assert_eq!(trial_cost(&r, &CostParams::new(0.05, 5.0).unwrap()), 0.15000000000000002);
    }

    #[test]
    fn two_fods_one_candidate_plus_stray() {
        // drill and screwdriver share a candidate; a mid-tank candidate is unused
        let a = [Point3::new(0.0, 0.0, 0.0), Point3::new(0.2, 0.0, 0.0)];
        let c = [Point3::new(0.1, 0.0, 0.0), Point3::new(3.0, 1.0, 0.0)];
        let r = associate(&a, &c, 5.0);
        assert_eq!(r.m, 1);
    }

    #[test]
    fn no_candidates_uses_penalty() {
        let r = associate(&[Point3::origin()], &[], 4.5);
        assert_eq!(r.distances, vec![4.5]);
        assert_eq!(r.mapping, vec![None]);
    }

    #[test]
    fn cost_arithmetic() {
        let r = AssociationResult {
            n: 2,
            distances: vec![0.1, 0.3],
            m: 1,
            mapping: vec![Some(0), Some(0)],
        };
        let p = CostParams::new(0.05, 1.0).unwrap();
        assert!((trial_cost(&r, &p) - 0.25).abs() < 1e-15);
        let perfect = AssociationResult {
            n: 1,
            distances: vec![0.0],
            m: 0,
            mapping: vec![Some(0)],
        };
        assert_eq!(trial_cost(&perfect, &p), 0.0);
        assert!(CostParams::new(0.0, 1.0).is_err());
    }
}
