use std::collections::BTreeMap;

use nalgebra::Vector3;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{KdTree, Point3, PointCloud};
use crate::error::{Error, Result};

/// Voxel key of a coordinate: `floor(coord / size)` per axis, anchored at the
/// world origin.
pub(crate) fn voxel_key(p: &Point3, size: f64) -> (i64, i64, i64) {
    (
        (p.x / size).floor() as i64,
        (p.y / size).floor() as i64,
        (p.z / size).floor() as i64,
    )
}

#[derive(Default)]
struct VoxelAcc {
    sum: Vector3<f64>,
    count: usize,
    weight: u64,
    rgb: [u64; 3],
}

/// Replaces all points sharing a voxel by their arithmetic mean.
///
/// The output weight of each voxel is the summed weight of its members, which
/// is the member count for an unweighted cloud. Output is ordered by
/// lexicographic voxel key.
pub fn voxel_downsample(cloud: &PointCloud, voxel_size: f64) -> Result<PointCloud> {
    if !(voxel_size > 0.0) || !voxel_size.is_finite() {
        return Err(Error::param(format!("voxel size must be > 0, got {voxel_size}")));
    }
    let mut voxels: BTreeMap<(i64, i64, i64), VoxelAcc> = BTreeMap::new();
    let colors = cloud.colors();
    for (i, p) in cloud.points().iter().enumerate() {
        let acc = voxels.entry(voxel_key(p, voxel_size)).or_default();
        acc.sum += p.coords;
        acc.count += 1;
        acc.weight += u64::from(cloud.weight(i));
        if let Some(c) = colors {
            for ch in 0..3 {
                acc.rgb[ch] += u64::from(c[i][ch]);
            }
        }
    }
    let mut points = Vec::with_capacity(voxels.len());
    let mut weights = Vec::with_capacity(voxels.len());
    let mut rgb = Vec::with_capacity(if colors.is_some() { voxels.len() } else { 0 });
    for acc in voxels.values() {
        points.push(Point3::from(acc.sum / acc.count as f64));
        weights.push(u32::try_from(acc.weight).unwrap_or(u32::MAX));
        if colors.is_some() {
            let n = acc.count as u64;
            rgb.push([
                (acc.rgb[0] / n) as u8,
                (acc.rgb[1] / n) as u8,
                (acc.rgb[2] / n) as u8,
            ]);
        }
    }
    let mut out = PointCloud::new(points)?.with_weights(weights)?;
    if colors.is_some() {
        out = out.with_colors(rgb)?;
    }
    Ok(out)
}

/// Keeps `round(ratio * n)` points chosen without replacement, in their
/// original order.
pub fn random_downsample(cloud: &PointCloud, ratio: f64, seed: u64) -> Result<PointCloud> {
    if !(ratio > 0.0 && ratio <= 1.0) {
        return Err(Error::param(format!("ratio must be in (0, 1], got {ratio}")));
    }
    let n = cloud.len();
    let keep = ((ratio * n as f64).round() as usize).min(n);
    if keep == n {
        return Ok(cloud.clone());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut idx = rand::seq::index::sample(&mut rng, n, keep).into_vec();
    idx.sort_unstable();
    Ok(cloud.select(&idx))
}

/// Parameters of statistical outlier removal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OutlierParams {
    pub k: usize,
    pub std_ratio: f64,
}

impl Default for OutlierParams {
    fn default() -> Self {
        Self {
            k: 20,
            std_ratio: 2.0,
        }
    }
}

/// Mean distance from each point to its `k` nearest other points.
pub(crate) fn mean_knn_distances(cloud: &PointCloud, k: usize) -> Result<Vec<f64>> {
    let tree = KdTree::new(cloud.points());
    cloud
        .points()
        .par_iter()
        .enumerate()
        .map(|(i, p)| {
            let nn = tree.knn(p, k + 1)?;
            let mut sum = 0.0;
            let mut taken = 0;
            for n in nn.iter().filter(|n| n.index != i).take(k) {
                sum += n.distance;
                taken += 1;
            }
            Ok(sum / taken as f64)
        })
        .collect()
}

/// Removes points whose mean k-NN distance exceeds `μ + std_ratio·σ` of that
/// statistic over the whole cloud. Returns the filtered cloud and the removed
/// indices in ascending order.
pub fn remove_statistical_outliers(
    cloud: &PointCloud,
    params: OutlierParams,
) -> Result<(PointCloud, Vec<usize>)> {
    let OutlierParams { k, std_ratio } = params;
    if k == 0 {
        return Err(Error::param("outlier k must be >= 1"));
    }
    if !(std_ratio > 0.0) {
        return Err(Error::param("std_ratio must be > 0"));
    }
    if cloud.len() < k + 1 {
        return Err(Error::InsufficientPoints {
            needed: k + 1,
            got: cloud.len(),
        });
    }
    let stat = mean_knn_distances(cloud, k)?;
    let n = stat.len() as f64;
    let mu = stat.iter().sum::<f64>() / n;
    let var = stat.iter().map(|s| (s - mu) * (s - mu)).sum::<f64>() / n;
    let limit = mu + std_ratio * var.sqrt();
    let (kept, removed): (Vec<usize>, Vec<usize>) = (0..stat.len()).partition(|&i| stat[i] <= limit);
    Ok((cloud.select(&kept), removed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use std::collections::HashMap;

    fn cloud(pts: &[[f64; 3]]) -> PointCloud {
        PointCloud::new(pts.iter().map(|p| Point3::new(p[0], p[1], p[2])).collect()).unwrap()
    }

    #[test]
    fn two_points_one_voxel() {
        let c = cloud(&[[0.01, 0.0, 0.0], [0.03, 0.0, 0.0]]);
        let d = voxel_downsample(&c, 0.05).unwrap();
        assert_eq!(d.len(), 1);
        assert!((d.points()[0].x - 0.02).abs() < 1e-15);
        assert_eq!(d.weights().unwrap(), &[2]);
    }

    #[test]
    fn huge_voxel_gives_centroid() {
        let c = cloud(&[[0.1, 0.2, 0.3], [0.4, 0.1, 0.2], [0.3, 0.3, 0.1]]);
        let d = voxel_downsample(&c, 10.0).unwrap();
        assert_eq!(d.len(), 1);
        assert!((d.points()[0] - c.centroid().unwrap()).norm() < 1e-15);
        assert_eq!(d.weights().unwrap(), &[3]);
    }

    #[test]
    fn voxel_rejects_bad_size() {
        let c = cloud(&[[0.0; 3]]);
        assert!(voxel_downsample(&c, 0.0).is_err());
        assert!(voxel_downsample(&c, -1.0).is_err());
    }

    #[test]
    fn voxel_means_match_group_by_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let pts: Vec<Point3> = (0..1000)
            .map(|_| Point3::new(rng.random(), rng.random(), rng.random()))
            .collect();
        let c = PointCloud::new(pts.clone()).unwrap();
        let d = voxel_downsample(&c, 0.1).unwrap();

        let mut groups: HashMap<(i64, i64, i64), Vec<Point3>> = HashMap::new();
        for p in &pts {
            let key = (
                (p.x / 0.1).floor() as i64,
                (p.y / 0.1).floor() as i64,
                (p.z / 0.1).floor() as i64,
            );
            groups.entry(key).or_default().push(*p);
        }
        let mut keys: Vec<_> = groups.keys().copied().collect();
        keys.sort();
        assert_eq!(d.len(), keys.len());
        for (j, key) in keys.iter().enumerate() {
            let members = &groups[key];
            let mut s = Vector3::zeros();
            for p in members {
                s += p.coords;
            }
            let mean = s / members.len() as f64;
            assert_eq!(d.points()[j].coords, mean);
            assert_eq!(d.weights().unwrap()[j] as usize, members.len());
        }
        assert_eq!(d.total_weight(), 1000);
    }

    #[test]
    fn random_downsample_contracts() {
        let pts: Vec<[f64; 3]> = (0..10).map(|i| [i as f64, 0.0, 0.0]).collect();
        let c = cloud(&pts);
        assert_eq!(random_downsample(&c, 1.0, 3).unwrap(), c);
        let a = random_downsample(&c, 0.5, 42).unwrap();
        let b = random_downsample(&c, 0.5, 42).unwrap();
        assert_eq!(a.len(), 5);
        assert_eq!(a, b);
        // original order preserved
        assert!(a.points().windows(2).all(|w| w[0].x < w[1].x));
        assert!(random_downsample(&c, 0.0, 1).is_err());
        assert!(random_downsample(&c, 1.5, 1).is_err());

        let big: Vec<[f64; 3]> = (0..1000).map(|i| [i as f64, 1.0, 2.0]).collect();
        let big = cloud(&big);
        let s = random_downsample(&big, 0.1, 9).unwrap();
        assert_eq!(s.len(), 100);
        assert!(s.points().iter().all(|p| big.points().contains(p)));
    }

    fn grid_plus_outlier() -> PointCloud {
        let mut pts = Vec::new();
        for i in 0..10 {
            for j in 0..10 {
                pts.push([i as f64 * 0.1, j as f64 * 0.1, 0.0]);
            }
        }
        pts.push([10.0, 0.0, 0.0]);
        cloud(&pts)
    }

    #[test]
    fn removes_only_far_point() {
        let c = grid_plus_outlier();
        let (kept, removed) =
            remove_statistical_outliers(&c, OutlierParams { k: 8, std_ratio: 2.0 }).unwrap();
        assert_eq!(removed, vec![100]);
        assert_eq!(kept.len(), 100);
    }

    #[test]
    fn rerun_on_bounded_grid_trims_corners() {
        // Without the far point the spread collapses and the four grid
        // corners (mean 8-NN distance ~0.184 vs limit ~0.166) fall out.
        let c = grid_plus_outlier();
        let p = OutlierParams { k: 8, std_ratio: 2.0 };
        let (kept, _) = remove_statistical_outliers(&c, p).unwrap();
        let (_, removed) = remove_statistical_outliers(&kept, p).unwrap();
        assert_eq!(removed, vec![0, 9, 90, 99]);
    }

    #[test]
    fn idempotent_on_closed_lattice_plus_outlier() {
        // 100 points evenly spaced on a closed ring share one k-NN statistic.
        let r = 10.0 / std::f64::consts::TAU;
        let mut pts: Vec<[f64; 3]> = (0..100)
            .map(|i| {
                let a = i as f64 * std::f64::consts::TAU / 100.0;
                [r * a.cos(), r * a.sin(), 0.0]
            })
            .collect();
        pts.push([0.0, 0.0, 10.0]);
        let c = cloud(&pts);
        let p = OutlierParams { k: 8, std_ratio: 2.0 };
        let (kept, removed) = remove_statistical_outliers(&c, p).unwrap();
        assert_eq!(removed, vec![100]);
        let (again, removed2) = remove_statistical_outliers(&kept, p).unwrap();
        assert!(removed2.is_empty());
        assert_eq!(again, kept);
    }

    #[test]
    fn desk_statistic_for_far_point() {
        // The far point's mean 8-NN distance is large; grid points stay near 0.13.
        let c = grid_plus_outlier();
        let stat = mean_knn_distances(&c, 8).unwrap();
        assert!(stat[100] > 9.0);
        assert!(stat[..100].iter().all(|&s| s < 0.2));
    }

    #[test]
    fn coincident_points_survive() {
        let c = cloud(&[[1.0, 1.0, 1.0]; 30]);
        let (kept, removed) = remove_statistical_outliers(&c, OutlierParams::default()).unwrap();
        assert!(removed.is_empty());
        assert_eq!(kept.len(), 30);
    }

    #[test]
    fn too_few_points() {
        let c = cloud(&[[0.0; 3]; 5]);
        assert!(matches!(
            remove_statistical_outliers(&c, OutlierParams { k: 5, std_ratio: 1.0 }),
            Err(Error::InsufficientPoints { .. })
        ));
    }
}
