//! Per-point discrepancy of a query scan against the reference, score
//! smoothing, segmentation and clustering into FOD candidates.

mod cluster;

pub use cluster::{agglomerate, Merge, MergeTrace};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::covariance::CovarianceField;
use crate::error::{Error, Result};
use crate::geom::{random_downsample, remove_statistical_outliers, voxel_downsample, KdTree, OutlierParams, Point3, PointCloud};
use crate::reference::ReferenceMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    L2,
    MDistance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiscrepancyConfig {
    pub metric: Metric,
    /// Unitless for the M-distance, meters for L2.
    pub threshold: f64,
    /// Cluster merge cutoff, meters.
    pub cutoff: f64,
    /// Minimum weighted point count of a kept cluster.
    pub min_count: u32,
    pub smoothing_k: usize,
    /// `None` skips query denoising.
    pub denoise: Option<OutlierParams>,
    pub downsample: Downsample,
}

/// How the query is thinned before scoring.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Downsample {
    None,
    /// Voxel means, keeping per-voxel point counts as weights.
    Voxel { size: f64 },
    /// Keeps a seeded random fraction of the points.
    Random { ratio: f64, seed: u64 },
}

impl DiscrepancyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0) {
            return Err(Error::param("threshold must be > 0"));
        }
        if !(self.cutoff > 0.0) {
            return Err(Error::param("cutoff must be > 0"));
        }
        if self.smoothing_k == 0 {
            return Err(Error::param("smoothing_k must be >= 1"));
        }
        match self.downsample {
            Downsample::Voxel { size } if !(size > 0.0) => return Err(Error::param("voxel size must be > 0")),
            Downsample::Random { ratio, .. } if !(ratio > 0.0 && ratio <= 1.0) => {
                return Err(Error::param("random ratio must be in (0, 1]"))
            }
            _ => {}
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredCloud {
    pub points: Vec<Point3>,
    /// Voxel counts `n_i`.
    pub weights: Vec<u32>,
    pub raw_scores: Vec<f64>,
    pub smoothed_scores: Vec<f64>,
    pub associated_reference_index: Vec<usize>,
}

impl ScoredCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Indices whose smoothed score is strictly above `threshold`.
    pub fn segment(&self, threshold: f64) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.smoothed_scores[i] > threshold).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateCluster {
    /// Indices into the scored cloud.
    pub member_indices: Vec<usize>,
    pub centroid: Point3,
    pub point_count_weighted: u64,
    pub max_score: f64,
}

/// Squared local Mahalanobis distance of `delta` under precision `p`.
fn mahalanobis2(p: &nalgebra::Matrix3<f64>, dx: f64, dy: f64, dz: f64) -> f64 {
    p[(0, 0)] * dx * dx
        + p[(1, 1)] * dy * dy
        + p[(2, 2)] * dz * dz
        + 2.0 * (p[(0, 1)] * dx * dy + p[(0, 2)] * dx * dz + p[(1, 2)] * dy * dz)
}

/// Denoises and down-samples the query, then scores it with [`score_cloud`].
pub fn score_query(
    query: &PointCloud,
    reference: &ReferenceMap,
    field: Option<&CovarianceField>,
    config: &DiscrepancyConfig,
) -> Result<ScoredCloud> {
    config.validate()?;
    if query.is_empty() {
        return Err(Error::EmptyIndex);
    }
    let cleaned = match config.denoise {
        Some(p) => remove_statistical_outliers(query, p)?.0,
        None => query.clone(),
    };
    let prepared = match config.downsample {
        Downsample::Voxel { size } => voxel_downsample(&cleaned, size)?,
        Downsample::Random { ratio, seed } => random_downsample(&cleaned, ratio, seed)?,
        Downsample::None => cleaned,
    };
    score_cloud(&prepared, reference, field, config.metric, config.smoothing_k)
}

/// Scores an already prepared cloud. Point weights act as the counts `n_i`
/// of the smoothing mean `d̃_i = Σ n_j d_j / Σ n_j` over the `smoothing_k`
/// nearest query points (the point itself included).
pub fn score_cloud(
    cloud: &PointCloud,
    reference: &ReferenceMap,
    field: Option<&CovarianceField>,
    metric: Metric,
    smoothing_k: usize,
) -> Result<ScoredCloud> {
    if smoothing_k == 0 {
        return Err(Error::param("smoothing_k must be >= 1"));
    }
    if cloud.is_empty() || reference.is_empty() {
        return Err(Error::EmptyIndex);
    }
    let field = match (metric, field) {
        (Metric::MDistance, None) => return Err(Error::Config("m_distance needs a covariance field".into())),
        (Metric::MDistance, Some(f)) if f.len() != reference.len() => {
            return Err(Error::Config(format!(
                "covariance field has {} entries for {} reference points",
                f.len(),
                reference.len()
            )))
        }
        (_, f) => f,
    };
    let tree = KdTree::new(reference.cloud().points());
    let refs = reference.cloud().points();
    let scored: Vec<(usize, f64)> = cloud
        .points()
        .par_iter()
        .map(|q| {
            let j = tree.nearest(q)?.index;
            let (dx, dy, dz) = (q.x - refs[j].x, q.y - refs[j].y, q.z - refs[j].z);
            let s = match (metric, field) {
                (Metric::MDistance, Some(f)) => mahalanobis2(f.precision(j), dx, dy, dz).max(0.0).sqrt(),
                _ => (dx * dx + dy * dy + dz * dz).sqrt(),
            };
            Ok((j, s))
        })
        .collect::<Result<_>>()?;
    let (assoc, raw): (Vec<usize>, Vec<f64>) = scored.into_iter().unzip();
    let weights: Vec<u32> = (0..cloud.len()).map(|i| cloud.weight(i)).collect();
    let smoothed = smooth_scores(cloud.points(), &weights, &raw, smoothing_k)?;
    Ok(ScoredCloud {
        points: cloud.points().to_vec(),
        weights,
        raw_scores: raw,
        smoothed_scores: smoothed,
        associated_reference_index: assoc,
    })
}

/// Count-weighted mean of scores over each point's `k` nearest neighbors.
pub fn smooth_scores(points: &[Point3], weights: &[u32], scores: &[f64], k: usize) -> Result<Vec<f64>> {
    let tree = KdTree::new(points);
    points
        .par_iter()
        .map(|p| {
            let nb = tree.knn(p, k)?;
            let (mut num, mut den) = (0.0, 0.0);
            for n in &nb {
                let w = f64::from(weights[n.index]);
                num += w * scores[n.index];
                den += w;
            }
            Ok(num / den)
        })
        .collect()
}

/// Builds candidates from clusters given as member lists: computes
/// statistics, drops light clusters, and orders by descending weighted
/// count, then centroid.
pub fn finalize_clusters(scored: &ScoredCloud, groups: Vec<Vec<usize>>, min_count: u32) -> Vec<CandidateCluster> {
    let mut out: Vec<CandidateCluster> = groups
        .into_iter()
        .map(|members| {
            let centroid = cluster::centroid_of(&scored.points, &members);
            let point_count_weighted = members.iter().map(|&i| u64::from(scored.weights[i])).sum();
            let max_score = members
                .iter()
                .map(|&i| scored.smoothed_scores[i])
                .fold(f64::NEG_INFINITY, f64::max);
            CandidateCluster {
                member_indices: members,
                centroid,
                point_count_weighted,
                max_score,
            }
        })
        .filter(|c| c.point_count_weighted >= u64::from(min_count))
        .collect();
    out.sort_by(|a, b| {
        b.point_count_weighted.cmp(&a.point_count_weighted).then_with(|| {
            let (p, q) = (&a.centroid, &b.centroid);
            p.x.total_cmp(&q.x).then(p.y.total_cmp(&q.y)).then(p.z.total_cmp(&q.z))
        })
    });
    out
}

/// Thresholds smoothed scores, agglomerates the selected points and keeps
/// clusters whose weighted count reaches `min_count`.
pub fn segment_and_cluster(
    scored: &ScoredCloud,
    threshold: f64,
    cutoff: f64,
    min_count: u32,
) -> Result<Vec<CandidateCluster>> {
    if !(cutoff > 0.0) {
        return Err(Error::param("cutoff must be > 0"));
    }
    let selected = scored.segment(threshold);
    let pts: Vec<Point3> = selected.iter().map(|&i| scored.points[i]).collect();
    let groups = agglomerate(&pts, cutoff)
        .cut(cutoff)
        .into_iter()
        .map(|g| g.into_iter().map(|k| selected[k]).collect())
        .collect();
    Ok(finalize_clusters(scored, groups, min_count))
}

/// Segmentation prepared for many cutoffs and min counts at one threshold.
#[derive(Debug, Clone)]
pub struct Segmentation {
    selected: Vec<usize>,
    trace: MergeTrace,
}

impl Segmentation {
    /// Agglomerates the points above `threshold` up to `max_cutoff`.
    pub fn new(scored: &ScoredCloud, threshold: f64, max_cutoff: f64) -> Self {
        let selected = scored.segment(threshold);
        let pts: Vec<Point3> = selected.iter().map(|&i| scored.points[i]).collect();
        Self {
            trace: agglomerate(&pts, max_cutoff),
            selected,
        }
    }

    pub fn selected(&self) -> &[usize] {
        &self.selected
    }

    /// Same result as [`segment_and_cluster`] for any `cutoff` up to the
    /// construction cutoff.
    pub fn clusters(&self, scored: &ScoredCloud, cutoff: f64, min_count: u32) -> Vec<CandidateCluster> {
        let groups = self
            .trace
            .cut(cutoff)
            .into_iter()
            .map(|g| g.into_iter().map(|k| self.selected[k]).collect())
            .collect();
        finalize_clusters(scored, groups, min_count)
    }
}
