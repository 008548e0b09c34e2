//! Detection metrics over inspection reports.
//!
//! Every candidate counts as one photo. A photo shows a FOD when the FOD's
//! centroid lies within the view radius of the candidate centroid.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::assoc::associate;
use crate::geom::Point3;
use crate::report::{InspectionReport, GroundTruthFod, MIXED_FOD, NO_FOD, NOT_SURE};

pub const DEFAULT_VIEW_RADIUS: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypeRecall {
    pub total: usize,
    pub detected: usize,
    pub recall: f64,
}

/// Label (row) by actual content (column) counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn to_csv(&self) -> String {
        let quote = |s: &str| {
            if s.contains(',') || s.contains('"') {
                format!("\"{}\"", s.replace('"', "\"\""))
            } else {
                s.to_string()
            }
        };
        let mut out = String::from("label");
        for c in &self.cols {
            out.push(',');
            out.push_str(&quote(c));
        }
        out.push('\n');
        for (r, row) in self.rows.iter().zip(&self.counts) {
            out.push_str(&quote(r));
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionMetrics {
    pub photos: usize,
    /// `None` when no report carries ground truth.
    pub photos_with_fod: Option<usize>,
    pub precision: Option<f64>,
    pub fods_total: Option<usize>,
    pub fods_detected: Option<usize>,
    pub recall: Option<f64>,
    pub per_type: BTreeMap<String, TypeRecall>,
    /// Unassociated candidates per report with ground truth.
    pub unassociated_per_trial: Vec<usize>,
    /// Distance from each FOD to its nearest candidate.
    pub distance_errors: Vec<f64>,
    pub confusion: Option<ConfusionMatrix>,
    /// How often each label was given (current labels only).
    pub label_tallies: BTreeMap<String, usize>,
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

fn in_view(c: &Point3, truth: &[GroundTruthFod], r: f64) -> Vec<usize> {
    (0..truth.len()).filter(|&i| (truth[i].centroid - c).norm() <= r).collect()
}

/// Photo precision, FOD recall (total and per type), association
/// statistics and the label confusion matrix. Reports without ground truth
/// only contribute photo counts and label tallies.
pub fn detection_metrics(reports: &[InspectionReport], view_radius: f64, penalty_distance: f64) -> DetectionMetrics {
    let mut photos = 0;
    let mut with_fod = 0;
    let mut fods_total = 0;
    let mut fods_detected = 0;
    let mut any_truth = false;
    let mut per_type: BTreeMap<String, (usize, usize)> = BTreeMap::new();
    let mut unassociated = Vec::new();
    let mut distances = Vec::new();
    let mut tallies: BTreeMap<String, usize> = BTreeMap::new();

    let mut rows: Vec<String> = Vec::new();
    let mut types: Vec<String> = Vec::new();
    for r in reports {
        for l in r.label_set() {
            if !rows.contains(&l) {
                rows.push(l);
            }
        }
        for g in r.ground_truth.iter().flatten() {
            if !types.contains(&g.fod_type) {
                types.push(g.fod_type.clone());
            }
        }
    }
    types.sort();
    // keep the two fixed rows last
    rows.retain(|l| l != NO_FOD && l != NOT_SURE);
    rows.push(NO_FOD.into());
    rows.push(NOT_SURE.into());
    let mut cols = types.clone();
    cols.push(NO_FOD.into());
    cols.push(MIXED_FOD.into());
    let mut counts = vec![vec![0usize; cols.len()]; rows.len()];

    for r in reports {
        photos += r.candidates.len();
        let labels = r.current_labels();
        for rec in &labels {
            for l in &rec.labels {
                *tallies.entry(l.clone()).or_default() += 1;
            }
        }
        let Some(truth) = &r.ground_truth else { continue };
        any_truth = true;
        let mut seen = vec![false; truth.len()];
        let mut content: BTreeMap<usize, usize> = BTreeMap::new();
        for c in &r.candidates {
            let v = in_view(&c.centroid, truth, view_radius);
            if !v.is_empty() {
                with_fod += 1;
            }
            for &i in &v {
                seen[i] = true;
            }
            let col = match v.len() {
                0 => cols.len() - 2,
                1 => types.iter().position(|t| *t == truth[v[0]].fod_type).unwrap(),
                _ => cols.len() - 1,
            };
            content.insert(c.id, col);
        }
        for rec in &labels {
            let Some(&col) = content.get(&rec.candidate_id) else { continue };
            for l in &rec.labels {
                let row = match rows.iter().position(|x| x == l) {
                    Some(p) => p,
                    None => {
                        rows.push(l.clone());
                        counts.push(vec![0; cols.len()]);
                        rows.len() - 1
                    }
                };
                counts[row][col] += 1;
            }
        }
        for (g, s) in truth.iter().zip(&seen) {
            let e = per_type.entry(g.fod_type.clone()).or_default();
            e.0 += 1;
            if *s {
                e.1 += 1;
                fods_detected += 1;
            }
            fods_total += 1;
        }
        let actual: Vec<Point3> = truth.iter().map(|g| g.centroid).collect();
        let cands: Vec<Point3> = r.candidates.iter().map(|c| c.centroid).collect();
        let a = associate(&actual, &cands, penalty_distance);
        unassociated.push(a.m);
        distances.extend(a.distances);
    }

    DetectionMetrics {
        photos,
        photos_with_fod: any_truth.then_some(with_fod),
        precision: any_truth.then(|| ratio(with_fod, photos)),
        fods_total: any_truth.then_some(fods_total),
        fods_detected: any_truth.then_some(fods_detected),
        recall: any_truth.then(|| ratio(fods_detected, fods_total)),
        per_type: per_type
            .into_iter()
            .map(|(k, (t, d))| {
                (
                    k,
                    TypeRecall {
                        total: t,
                        detected: d,
                        recall: ratio(d, t),
                    },
                )
            })
            .collect(),
        unassociated_per_trial: unassociated,
        distance_errors: distances,
        confusion: any_truth.then_some(ConfusionMatrix { rows, cols, counts }),
        label_tallies: tallies,
    }
}
