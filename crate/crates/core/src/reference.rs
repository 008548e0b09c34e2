//! FOD-free reference map, built either from a CAD mesh or by merging
//! nominal sample scans.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{
    icp_register, remove_statistical_outliers, sample_mesh, voxel_downsample, IcpParams,
    OutlierParams, PointCloud, TriangleMesh,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    CadMesh,
    SampleMerge,
}

/// Reference point cloud plus the per-point voxel occupancy counts.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceMap {
    points: PointCloud,
    occupancy_counts: Vec<u32>,
    provenance: Provenance,
    voxel_size: Option<f64>,
}

/// JSON sidecar written next to the reference PLY.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceMeta {
    pub provenance: Provenance,
    pub voxel_size: Option<f64>,
    pub occupancy_counts: Vec<u32>,
}

impl ReferenceMap {
    /// Wraps an existing cloud. Counts default to the cloud weights (or 1).
    pub fn from_parts(
        points: PointCloud,
        occupancy_counts: Option<Vec<u32>>,
        provenance: Provenance,
        voxel_size: Option<f64>,
    ) -> Result<Self> {
        let counts = occupancy_counts.unwrap_or_else(|| (0..points.len()).map(|i| points.weight(i)).collect());
        if counts.len() != points.len() {
            return Err(Error::Config(format!(
                "reference has {} points but {} occupancy counts",
                points.len(),
                counts.len()
            )));
        }
        let points = points.with_weights(counts.clone())?;
        Ok(Self {
            points,
            occupancy_counts: counts,
            provenance,
            voxel_size,
        })
    }

    pub fn from_meta(points: PointCloud, meta: ReferenceMeta) -> Result<Self> {
        Self::from_parts(points, Some(meta.occupancy_counts), meta.provenance, meta.voxel_size)
    }

    pub fn meta(&self) -> ReferenceMeta {
        ReferenceMeta {
            provenance: self.provenance,
            voxel_size: self.voxel_size,
            occupancy_counts: self.occupancy_counts.clone(),
        }
    }

    pub fn cloud(&self) -> &PointCloud {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn occupancy_counts(&self) -> &[u32] {
        &self.occupancy_counts
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn voxel_size(&self) -> Option<f64> {
        self.voxel_size
    }

    /// Length of the bounding-box diagonal, 0 for an empty map.
    pub fn bbox_diagonal(&self) -> f64 {
        self.points.bounds().map_or(0.0, |(lo, hi)| (hi - lo).norm())
    }
}

/// Dense reference from uniform samples of a CAD mesh.
pub fn build_from_mesh(mesh: &TriangleMesh, n_points: usize, seed: u64) -> Result<ReferenceMap> {
    let cloud = sample_mesh(mesh, n_points, seed)?;
    let counts = vec![1; cloud.len()];
    ReferenceMap::from_parts(cloud, Some(counts), Provenance::CadMesh, None)
}

/// Which cloud every sample is registered against.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegistrationTarget {
    FirstSample,
    Cad,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleMergeParams {
    pub voxel_size: f64,
    /// Voxels whose count is below this quantile of all counts are dropped.
    pub occupancy_quantile: f64,
    /// `None` skips denoising.
    pub denoise: Option<OutlierParams>,
    /// `None` skips registration (samples are already in a common frame).
    pub icp: Option<IcpParams>,
}

impl Default for SampleMergeParams {
    fn default() -> Self {
        Self {
            voxel_size: 0.05,
            occupancy_quantile: 0.25,
            denoise: Some(OutlierParams::default()),
            icp: Some(IcpParams::default()),
        }
    }
}

/// Nearest-rank quantile of a multiset: the value at sorted position
/// `ceil(q·n)` (1-based), with `q = 0` giving the minimum.
pub fn nearest_rank_quantile(values: &[u32], q: f64) -> Option<u32> {
    if values.is_empty() {
        return None;
    }
    let mut v = values.to_vec();
    v.sort_unstable();
    let rank = (q * v.len() as f64).ceil() as usize;
    Some(v[rank.clamp(1, v.len()) - 1])
}

/// Merges nominal scans into a reference: denoise each sample, register it
/// to the chosen target, concatenate, voxel-average, and drop low-occupancy
/// voxels.
///
/// With [`RegistrationTarget::Cad`] the `cad` cloud must be supplied.
pub fn build_from_samples(
    samples: &[PointCloud],
    target: RegistrationTarget,
    cad: Option<&PointCloud>,
    params: &SampleMergeParams,
) -> Result<ReferenceMap> {
    if samples.is_empty() {
        return Err(Error::param("at least one sample cloud is required"));
    }
    if !(params.voxel_size > 0.0) {
        return Err(Error::param("voxel_size must be > 0"));
    }
    if !(0.0..1.0).contains(&params.occupancy_quantile) {
        return Err(Error::param("occupancy_quantile must be in [0, 1)"));
    }
    let denoised: Vec<PointCloud> = samples
        .par_iter()
        .enumerate()
        .map(|(i, s)| match params.denoise {
            Some(p) => remove_statistical_outliers(s, p)
                .map(|(c, _)| c)
                .map_err(|e| Error::Sample {
                    index: i,
                    stage: "denoising",
                    source: Box::new(e),
                }),
            None => Ok(s.clone()),
        })
        .collect::<Result<_>>()?;

    let registered: Vec<PointCloud> = match params.icp {
        None => denoised,
        Some(icp) => {
            let anchor = match target {
                RegistrationTarget::FirstSample => denoised[0].clone(),
                RegistrationTarget::Cad => cad
                    .ok_or_else(|| Error::Config("registration target 'cad' needs a CAD cloud".into()))?
                    .clone(),
            };
            denoised
                .par_iter()
                .enumerate()
                .map(|(i, s)| {
                    if i == 0 && target == RegistrationTarget::FirstSample {
                        return Ok(s.clone());
                    }
                    icp_register(s, &anchor, icp)
                        .map(|r| s.transformed(&r.transform))
                        .map_err(|e| Error::Sample {
                            index: i,
                            stage: "registration",
                            source: Box::new(e),
                        })
                })
                .collect::<Result<_>>()?
        }
    };

    let merged = PointCloud::concat(&registered);
    let voxels = voxel_downsample(&merged.without_weights(), params.voxel_size)?;
    let counts = voxels.weights().unwrap_or_default().to_vec();
    let keep: Vec<usize> = if params.occupancy_quantile > 0.0 {
        let limit = nearest_rank_quantile(&counts, params.occupancy_quantile).unwrap_or(0);
        (0..counts.len()).filter(|&i| counts[i] >= limit).collect()
    } else {
        (0..counts.len()).collect()
    };
    let kept = voxels.select(&keep);
    let kept_counts = keep.iter().map(|&i| counts[i]).collect();
    ReferenceMap::from_parts(kept, Some(kept_counts), Provenance::SampleMerge, Some(params.voxel_size))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::Point3;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn quantile_nearest_rank() {
        let v = [5, 1, 3, 2, 4];
        assert_eq!(nearest_rank_quantile(&v, 0.0), Some(1));
        assert_eq!(nearest_rank_quantile(&v, 0.2), Some(1));
        assert_eq!(nearest_rank_quantile(&v, 0.25), Some(2));
        assert_eq!(nearest_rank_quantile(&v, 0.99), Some(5));
        assert_eq!(nearest_rank_quantile(&[], 0.5), None);
    }

    #[test]
    fn mesh_reference_counts_are_one() {
        let m = TriangleMesh::axis_box(Point3::origin(), Point3::new(1.0, 1.0, 1.0)).unwrap();
        let r = build_from_mesh(&m, 1000, 4).unwrap();
        assert_eq!(r.len(), 1000);
        assert!(r.occupancy_counts().iter().all(|&c| c == 1));
        assert_eq!(r.provenance(), Provenance::CadMesh);
    }

    #[test]
    fn single_sample_quantile_zero_is_voxel_means() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts: Vec<Point3> = (0..400)
            .map(|_| Point3::new(rng.random(), rng.random(), 0.0))
            .collect();
        let s = PointCloud::new(pts).unwrap();
        let params = SampleMergeParams {
            voxel_size: 0.1,
            occupancy_quantile: 0.0,
            denoise: None,
            icp: Some(IcpParams::default()),
        };
        let r = build_from_samples(&[s.clone()], RegistrationTarget::FirstSample, None, &params).unwrap();
        let v = voxel_downsample(&s, 0.1).unwrap();
        assert_eq!(r.cloud().points(), v.points());
        assert_eq!(r.occupancy_counts(), v.weights().unwrap());
    }

    #[test]
    fn cad_target_requires_cloud() {
        let s = PointCloud::new(vec![Point3::origin(); 3]).unwrap();
        let params = SampleMergeParams {
            denoise: None,
            ..Default::default()
        };
        assert!(build_from_samples(&[s], RegistrationTarget::Cad, None, &params).is_err());
    }

    #[test]
    fn bad_parameters() {
        let s = PointCloud::new(vec![Point3::origin(); 3]).unwrap();
        let mut p = SampleMergeParams {
            denoise: None,
            icp: None,
            ..Default::default()
        };
        p.occupancy_quantile = 1.0;
        assert!(build_from_samples(&[s.clone()], RegistrationTarget::FirstSample, None, &p).is_err());
        assert!(build_from_samples(&[], RegistrationTarget::FirstSample, None, &SampleMergeParams::default()).is_err());
    }
}
