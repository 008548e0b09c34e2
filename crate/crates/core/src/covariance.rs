//! Local covariance field over the reference map.
//!
//! Training scans are compared point-by-point with the reference: every
//! training point adds the outer product of its signed error to the scatter
//! matrix of its nearest reference point. Scatter matrices are then pooled
//! over a spatial neighborhood of each reference point, either uniformly
//! (mean smoothing) or with Gaussian reliability weights, and regularized
//! so every covariance is invertible.

use std::io::{BufRead, Write};

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{KdTree, Neighbor, Point3, PointCloud};
use crate::reference::ReferenceMap;

/// Default diagonal loading, m².
pub const DEFAULT_EPSILON: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterAccumulator {
    pub scatter: Matrix3<f64>,
    pub sample_count: u64,
}

impl Default for ScatterAccumulator {
    fn default() -> Self {
        Self {
            scatter: Matrix3::zeros(),
            sample_count: 0,
        }
    }
}

impl ScatterAccumulator {
    /// Maximum-likelihood covariance `S / n`, `None` when unvisited.
    pub fn mle(&self) -> Option<Matrix3<f64>> {
        (self.sample_count > 0).then(|| self.scatter / self.sample_count as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoothingMode {
    Mean,
    Gaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Neighborhood {
    Knn { k: usize },
    Sphere { radius: f64 },
}

/// What the Gaussian kernel measures for neighbor `j` of point `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelDistance {
    /// Distance between reference points `i` and `j`.
    #[default]
    Spatial,
    /// RMS training error recorded at neighbor `j`, `sqrt(tr(S_j) / n_j)`.
    SampleError,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingConfig {
    pub mode: SmoothingMode,
    pub neighborhood: Neighborhood,
    /// Gaussian roll-off in meters; ignored in mean mode.
    #[serde(default = "default_sigma")]
    pub sigma: f64,
    #[serde(default)]
    pub kernel_distance: KernelDistance,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_sigma() -> f64 {
    0.05
}

fn default_epsilon() -> f64 {
    DEFAULT_EPSILON
}

impl SmoothingConfig {
    pub fn mean_knn(k: usize) -> Self {
        Self {
            mode: SmoothingMode::Mean,
            neighborhood: Neighborhood::Knn { k },
            sigma: default_sigma(),
            kernel_distance: KernelDistance::Spatial,
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn gaussian(neighborhood: Neighborhood, sigma: f64) -> Self {
        Self {
            mode: SmoothingMode::Gaussian,
            neighborhood,
            sigma,
            kernel_distance: KernelDistance::Spatial,
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.neighborhood {
            Neighborhood::Knn { k } if k == 0 => return Err(Error::param("smoothing k must be >= 1")),
            Neighborhood::Sphere { radius } if !(radius > 0.0) => {
                return Err(Error::param("smoothing radius must be > 0"))
            }
            _ => {}
        }
        if self.mode == SmoothingMode::Gaussian && !(self.sigma > 0.0) {
            return Err(Error::param("gaussian sigma must be > 0"));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::param("epsilon must be >= 0"));
        }
        Ok(())
    }
}

/// Regularized per-point covariances and their inverses.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceField {
    covariances: Vec<Matrix3<f64>>,
    precisions: Vec<Matrix3<f64>>,
    unsupported: Vec<bool>,
    epsilon: f64,
}

impl CovarianceField {
    /// Builds a field from already-regularized covariances.
    pub fn new(covariances: Vec<Matrix3<f64>>, epsilon: f64, unsupported: Vec<bool>) -> Result<Self> {
        if unsupported.len() != covariances.len() {
            return Err(Error::Config("unsupported flags misaligned with covariances".into()));
        }
        let precisions = covariances
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let sym = (c + c.transpose()) * 0.5;
                sym.cholesky()
                    .map(|ch| ch.inverse())
                    .ok_or_else(|| Error::Config(format!("covariance {i} is not positive definite")))
            })
            .collect::<Result<_>>()?;
        Ok(Self {
            covariances,
            precisions,
            unsupported,
            epsilon,
        })
    }

    /// Same covariance at every point.
    pub fn uniform(n: usize, cov: Matrix3<f64>) -> Result<Self> {
        Self::new(vec![cov; n], 0.0, vec![false; n])
    }

    pub fn len(&self) -> usize {
        self.covariances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.covariances.is_empty()
    }

    pub fn covariances(&self) -> &[Matrix3<f64>] {
        &self.covariances
    }

    pub fn covariance(&self, i: usize) -> &Matrix3<f64> {
        &self.covariances[i]
    }

    pub fn precision(&self, i: usize) -> &Matrix3<f64> {
        &self.precisions[i]
    }

    pub fn unsupported(&self) -> &[bool] {
        &self.unsupported
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// `ln det Σ_i` for every point.
    pub fn log_determinants(&self) -> Vec<f64> {
        self.covariances.iter().map(|c| c.determinant().ln()).collect()
    }

    /// Multiplies every covariance by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(
            self.covariances.iter().map(|m| m * c).collect(),
            self.epsilon * c,
            self.unsupported.clone(),
        )
    }
}

/// Accumulates the scatter of training points around their nearest
/// reference points. Training weights scale both the scatter contribution
/// and the sample count.
pub fn accumulate_scatter(reference: &ReferenceMap, training: &[PointCloud]) -> Result<Vec<ScatterAccumulator>> {
    if reference.is_empty() {
        return Err(Error::EmptyIndex);
    }
    let tree = KdTree::new(reference.cloud().points());
    let refs = reference.cloud().points();
    let mut acc = vec![ScatterAccumulator::default(); reference.len()];
    for cloud in training {
        let nearest: Vec<usize> = cloud
            .points()
            .par_iter()
            .map(|p| tree.nearest(p).map(|n| n.index))
            .collect::<Result<_>>()?;
        // sequential reduction keeps the summation order fixed
        for (j, (p, &i)) in cloud.points().iter().zip(&nearest).enumerate() {
            let w = cloud.weight(j);
            let d: Vector3<f64> = p - refs[i];
            acc[i].scatter += d * d.transpose() * f64::from(w);
            acc[i].sample_count += u64::from(w);
        }
    }
    Ok(acc)
}

fn neighbors(tree: &KdTree, p: &Point3, n: Neighborhood) -> Result<Vec<Neighbor>> {
    match n {
        Neighborhood::Knn { k } => tree.knn(p, k),
        Neighborhood::Sphere { radius } => tree.within_radius(p, radius),
    }
}

/// Pools scatter matrices over each point's neighborhood.
///
/// Mean mode: `Σ_i = ΣS_j / Σn_j`. Gaussian mode: `w_j = exp(-d_j²/σ²)`,
/// `V1 = Σ n_j w_j`, `V2 = Σ n_j w_j²`, `Σ_i = Σ w_j S_j / (V1 − V2/V1)`.
/// A point whose denominator is not positive gets `εI` and is flagged
/// unsupported; every other point gets `Σ_i + εI`.
pub fn smooth_covariances(
    reference: &ReferenceMap,
    accumulators: &[ScatterAccumulator],
    config: &SmoothingConfig,
) -> Result<CovarianceField> {
    config.validate()?;
    if accumulators.len() != reference.len() {
        return Err(Error::Config(format!(
            "{} accumulators for {} reference points",
            accumulators.len(),
            reference.len()
        )));
    }
    let tree = KdTree::new(reference.cloud().points());
    let eps = Matrix3::identity() * config.epsilon;
    let sigma2 = config.sigma * config.sigma;
    let out: Vec<(Matrix3<f64>, bool)> = reference
        .cloud()
        .points()
        .par_iter()
        .map(|p| {
            let nbrs = neighbors(&tree, p, config.neighborhood)?;
            let pooled = match config.mode {
                SmoothingMode::Mean => {
                    let mut s = Matrix3::zeros();
                    let mut n = 0u64;
                    for nb in &nbrs {
                        s += accumulators[nb.index].scatter;
                        n += accumulators[nb.index].sample_count;
                    }
                    (n > 0).then(|| s / n as f64)
                }
                SmoothingMode::Gaussian => {
                    let mut s = Matrix3::zeros();
                    let (mut v1, mut v2) = (0.0, 0.0);
                    for nb in &nbrs {
                        let a = &accumulators[nb.index];
                        if a.sample_count == 0 {
                            continue;
                        }
                        let d2 = match config.kernel_distance {
                            KernelDistance::Spatial => nb.distance * nb.distance,
                            KernelDistance::SampleError => a.scatter.trace() / a.sample_count as f64,
                        };
                        let w = (-d2 / sigma2).exp();
                        let n = a.sample_count as f64;
                        s += a.scatter * w;
                        v1 += n * w;
                        v2 += n * w * w;
                    }
                    let denom = if v1 > 0.0 { v1 - v2 / v1 } else { 0.0 };
                    (denom > 0.0).then(|| s / denom)
                }
            };
            Ok(match pooled {
                Some(c) => (c + eps, false),
                None => (eps, true),
            })
        })
        .collect::<Result<_>>()?;
    let (covs, flags): (Vec<_>, Vec<_>) = out.into_iter().unzip();
    CovarianceField::new(covs, config.epsilon, flags)
}

/// Gives each full-resolution point the covariance of its nearest
/// down-sampled reference point.
pub fn propagate_to_full(
    full: &PointCloud,
    downsampled: &ReferenceMap,
    field: &CovarianceField,
) -> Result<CovarianceField> {
    if field.len() != downsampled.len() {
        return Err(Error::Config("covariance field misaligned with reference".into()));
    }
    let tree = KdTree::new(downsampled.cloud().points());
    let idx: Vec<usize> = full
        .points()
        .par_iter()
        .map(|p| tree.nearest(p).map(|n| n.index))
        .collect::<Result<_>>()?;
    Ok(CovarianceField {
        covariances: idx.iter().map(|&i| field.covariances[i]).collect(),
        precisions: idx.iter().map(|&i| field.precisions[i]).collect(),
        unsupported: idx.iter().map(|&i| field.unsupported[i]).collect(),
        epsilon: field.epsilon,
    })
}

/// Header line of the covariance sidecar. The header is one line of JSON,
/// followed by `count` records of six little-endian f64 values
/// (`xx xy xz yy yz zz`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldHeader {
    pub count: usize,
    pub epsilon: f64,
    pub config: Option<SmoothingConfig>,
    pub layout: String,
    #[serde(default)]
    pub unsupported: Vec<usize>,
}

pub const FIELD_LAYOUT: &str = "upper_triangle_xx_xy_xz_yy_yz_zz_f64_le";

pub fn write_field<W: Write>(w: &mut W, field: &CovarianceField, config: Option<&SmoothingConfig>) -> Result<()> {
    let header = FieldHeader {
        count: field.len(),
        epsilon: field.epsilon,
        config: config.copied(),
        layout: FIELD_LAYOUT.to_string(),
        unsupported: (0..field.len()).filter(|&i| field.unsupported[i]).collect(),
    };
    serde_json::to_writer(&mut *w, &header)?;
    w.write_all(b"\n")?;
    for c in &field.covariances {
        for v in [c[(0, 0)], c[(0, 1)], c[(0, 2)], c[(1, 1)], c[(1, 2)], c[(2, 2)]] {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_field<R: BufRead>(r: &mut R) -> Result<(CovarianceField, FieldHeader)> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    let header: FieldHeader = serde_json::from_str(line.trim_end())?;
    if header.layout != FIELD_LAYOUT {
        return Err(Error::parse(format!("unknown covariance layout '{}'", header.layout)));
    }
    let mut covs = Vec::with_capacity(header.count);
    let mut buf = [0u8; 48];
    for _ in 0..header.count {
        r.read_exact(&mut buf)?;
        let v: Vec<f64> = buf
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        covs.push(Matrix3::new(v[0], v[1], v[2], v[1], v[3], v[4], v[2], v[4], v[5]));
    }
    let mut flags = vec![false; header.count];
    for &i in &header.unsupported {
        if i >= header.count {
            return Err(Error::parse("unsupported index out of range"));
        }
        flags[i] = true;
    }
    let field = CovarianceField::new(covs, header.epsilon, flags)?;
    Ok((field, header))
}
