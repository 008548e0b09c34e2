mod common;

use common::*;
use nalgebra::Matrix3;
use proptest::prelude::*;
use proptest::test_runner::{Config as PtConfig, RngSeed};
use tanksweep::covariance::CovarianceField;
use tanksweep::discrepancy::{agglomerate, score_cloud, segment_and_cluster, smooth_scores, Metric, ScoredCloud};
use tanksweep::geom::{remove_statistical_outliers, voxel_downsample, OutlierParams, Point3, PointCloud};
use tanksweep::reference::{build_from_samples, Provenance, ReferenceMap, RegistrationTarget, SampleMergeParams};
use tanksweep::tuning::{associate, exact_p_value, signed_ranks, trial_cost, Alternative, AssociationResult, CostParams};
use tanksweep::waypoint::{
    cast_ray, inflate_costmap, sample_waypoint_ring, select_waypoint, squared_distance_transform, OccupancyCostMap,
    INSCRIBED, LETHAL, UNKNOWN,
};

fn cfg(cases: u32, seed: u64) -> PtConfig {
    PtConfig {
        cases,
        rng_seed: RngSeed::Fixed(seed),
        failure_persistence: None,
        ..PtConfig::default()
    }
}

fn point() -> impl Strategy<Value = Point3> {
    (-2.0..2.0f64, -2.0..2.0f64, -1.0..1.0f64).prop_map(|(x, y, z)| Point3::new(x, y, z))
}

fn cloud(min: usize, max: usize) -> impl Strategy<Value = Vec<Point3>> {
    prop::collection::vec(point(), min..max)
}

fn scored_cloud(n: std::ops::Range<usize>) -> impl Strategy<Value = ScoredCloud> {
    prop::collection::vec((point(), 0.0..3.0f64, 1u32..5), n).prop_map(|v| {
        let points: Vec<Point3> = v.iter().map(|t| t.0).collect();
        let scores: Vec<f64> = v.iter().map(|t| t.1).collect();
        let weights: Vec<u32> = v.iter().map(|t| t.2).collect();
        let n = points.len();
        ScoredCloud {
            points,
            weights,
            raw_scores: scores.clone(),
            smoothed_scores: scores,
            associated_reference_index: vec![0; n],
        }
    })
}

proptest! {
    #![proptest_config(cfg(48, 11))]

    #[test]
    fn knn_sorted_and_exhaustive(pts in cloud(1, 300), q in point(), k in 1usize..40) {
        let tree = tanksweep::geom::KdTree::new(&pts);
        let got = tree.knn(&q, k).unwrap();
        prop_assert!(got.windows(2).all(|w| w[0].distance <= w[1].distance));
        prop_assert!(got.iter().all(|n| n.distance >= 0.0));
        let got: Vec<(usize, f64)> = got.iter().map(|n| (n.index, n.distance)).collect();
        prop_assert_eq!(got, knn_scan(&pts, &q, k));
    }

    #[test]
    fn voxel_weights_conserve_and_points_stay_in_voxel(pts in cloud(1, 400), size in 0.05..1.0f64) {
        let c = PointCloud::new(pts.clone()).unwrap();
        let v = voxel_downsample(&c, size).unwrap();
        prop_assert_eq!(v.total_weight(), pts.len() as u64);
        // each output point is a mean of inputs sharing one voxel, so it
        // lies in the closed cube of some input's voxel
        for p in v.points() {
            let inside = pts.iter().any(|q| {
                let lo = [(q.x / size).floor() * size, (q.y / size).floor() * size, (q.z / size).floor() * size];
                (0..3).all(|a| p[a] >= lo[a] - 1e-12 && p[a] <= lo[a] + size + 1e-12)
            });
            prop_assert!(inside);
        }
    }

    #[test]
    fn outlier_removal_keeps_points_at_or_below_mean(pts in cloud(12, 150), k in 1usize..8, r in 0.1..3.0f64) {
        let c = PointCloud::new(pts.clone()).unwrap();
        let (_, removed) = remove_statistical_outliers(&c, OutlierParams { k, std_ratio: r }).unwrap();
        let stat: Vec<f64> = pts
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let nb = knn_scan(&pts, p, k + 1);
                let others: Vec<f64> = nb.iter().filter(|(j, _)| *j != i).take(k).map(|(_, d)| *d).collect();
                others.iter().sum::<f64>() / k as f64
            })
            .collect();
        let mean = stat.iter().sum::<f64>() / stat.len() as f64;
        for i in removed {
            prop_assert!(stat[i] > mean * (1.0 - 1e-12), "removed point {} with stat {} <= mean {}", i, stat[i], mean);
        }
    }

    #[test]
    fn raising_threshold_never_adds_points(s in scored_cloud(1..120), a in 0.0..3.0f64, b in 0.0..3.0f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let high = s.segment(hi);
        let low = s.segment(lo);
        prop_assert!(high.iter().all(|i| low.contains(i)));
    }

    #[test]
    fn raising_min_count_never_adds_clusters(s in scored_cloud(1..120), t in 0.0..2.0f64, c in 0.05..1.5f64, m in 0u32..12) {
        let few = segment_and_cluster(&s, t, c, m + 3).unwrap();
        let many = segment_and_cluster(&s, t, c, m).unwrap();
        prop_assert!(few.len() <= many.len());
        for cl in &few {
            prop_assert!(many.iter().any(|x| x.member_indices == cl.member_indices));
        }
    }

    #[test]
    fn raising_cutoff_never_adds_clusters(pts in cloud(1, 120), a in 0.0..2.0f64, b in 0.0..2.0f64) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let t = agglomerate(&pts, 2.0);
        prop_assert!(t.cut(hi).len() <= t.cut(lo).len());
    }

    #[test]
    fn uniform_scores_smooth_to_themselves(pts in cloud(1, 200), w in prop::collection::vec(1u32..9, 200), v in 0.0..10.0f64, k in 1usize..60) {
        let n = pts.len();
        let s = smooth_scores(&pts, &w[..n], &vec![v; n], k).unwrap();
        prop_assert!(s.iter().all(|x| (x - v).abs() <= 1e-12 * v.max(1.0)));
    }

    #[test]
    fn scaling_covariance_by_four_halves_scores(refs in cloud(1, 60), query in cloud(1, 60), d in (0.001..1.0f64, 0.001..1.0f64, 0.001..1.0f64)) {
        let reference = ReferenceMap::from_parts(PointCloud::new(refs.clone()).unwrap(), None, Provenance::CadMesh, None).unwrap();
        let cov = Matrix3::new(d.0, 0.3 * d.0.min(d.1), 0.0, 0.3 * d.0.min(d.1), d.1, 0.0, 0.0, 0.0, d.2);
        let field = CovarianceField::uniform(refs.len(), cov).unwrap();
        let q = PointCloud::new(query).unwrap();
        let a = score_cloud(&q, &reference, Some(&field), Metric::MDistance, 1).unwrap();
        let b = score_cloud(&q, &reference, Some(&field.scaled(4.0).unwrap()), Metric::MDistance, 1).unwrap();
        for (x, y) in a.raw_scores.iter().zip(&b.raw_scores) {
            prop_assert_eq!(*y, x / 2.0);
        }
    }

    #[test]
    fn trial_cost_monotone(d in prop::collection::vec(0.0..3.0f64, 1..8), m in 0usize..6, bump in 0.0..1.0f64, i in 0usize..8) {
        let p = CostParams::new(0.05, 2.0).unwrap();
        let base = AssociationResult { n: d.len(), distances: d.clone(), m, mapping: vec![None; d.len()] };
        let mut more_d = base.clone();
        more_d.distances[i % d.len()] += bump;
        let mut more_m = base.clone();
        more_m.m += 1;
        prop_assert!(trial_cost(&more_d, &p) >= trial_cost(&base, &p));
        prop_assert!(trial_cost(&more_m, &p) >= trial_cost(&base, &p));
    }

    #[test]
    fn association_picks_nearest(actual in cloud(0, 8), cands in cloud(0, 10)) {
        let a = associate(&actual, &cands, 5.0);
        prop_assert_eq!(a.mapping.len(), actual.len());
        for (k, g) in actual.iter().enumerate() {
            match a.mapping[k] {
                Some(j) => {
                    prop_assert_eq!(a.distances[k], (cands[j] - g).norm());
                    prop_assert!(cands.iter().all(|c| (c - g).norm() >= a.distances[k]));
                }
                None => {
                    prop_assert!(cands.is_empty());
                    prop_assert_eq!(a.distances[k], 5.0);
                }
            }
        }
    }

    #[test]
    fn one_sided_p_values_cover_observed_mass(d in prop::collection::vec(prop_oneof![-5i32..0, 1i32..6], 1..13)) {
        let d: Vec<f64> = d.into_iter().map(f64::from).collect();
        let s = signed_ranks(&d, &vec![0.0; d.len()]).unwrap();
        let g = exact_p_value(&s.ranks, s.w_plus, Alternative::Greater);
        let l = exact_p_value(&s.ranks, s.w_plus, Alternative::Less);
        prop_assert!(g > 0.0 && g <= 1.0 && l > 0.0 && l <= 1.0);
        prop_assert!(g + l >= 1.0);
    }
}

#[test]
fn identity_covariance_segments_like_l2() {
    let spec = tanksweep::scenegen::SceneSpec::default();
    let mesh = tanksweep::scenegen::tank_mesh(&spec).unwrap();
    let reference = tanksweep::reference::build_from_mesh(&mesh, 30_000, 3).unwrap();
    let scene = tanksweep::scenegen::synthetic_trial(&spec, 4).unwrap();
    let q = tanksweep::geom::random_downsample(&scene.cloud, 0.2, 1).unwrap();
    let field = CovarianceField::uniform(reference.len(), Matrix3::identity()).unwrap();
    let m = score_cloud(&q, &reference, Some(&field), Metric::MDistance, 30).unwrap();
    let l = score_cloud(&q, &reference, None, Metric::L2, 30).unwrap();
    assert_eq!(m, l);
    for t in [0.005, 0.01, 0.02, 0.04] {
        assert_eq!(m.segment(t), l.segment(t));
        assert_eq!(segment_and_cluster(&m, t, 0.2, 3).unwrap(), segment_and_cluster(&l, t, 0.2, 3).unwrap());
    }
}

#[test]
fn quantile_filter_is_monotone_and_counts_conserve() {
    let spec = tanksweep::scenegen::SceneSpec::default();
    let samples = tanksweep::scenegen::nominal_scans(&spec, 3, 40).unwrap();
    let mut last = usize::MAX;
    for q in [0.0, 0.1, 0.25, 0.5, 0.75, 0.9] {
        let params = SampleMergeParams { voxel_size: 0.08, occupancy_quantile: q, denoise: None, icp: None };
        let r = build_from_samples(&samples, RegistrationTarget::FirstSample, None, &params).unwrap();
        assert!(r.len() <= last);
        last = r.len();
        if q == 0.0 {
            let total: u64 = r.occupancy_counts().iter().map(|&c| u64::from(c)).sum();
            assert_eq!(total, samples.iter().map(|s| s.len() as u64).sum::<u64>());
            assert!(r.occupancy_counts().iter().all(|&c| c >= 1));
        }
    }
}

fn blocky_map(seed: u64) -> OccupancyCostMap {
    use rand::Rng;
    let mut r = rng(seed);
    let mut m = OccupancyCostMap::new(60, 60, 0.05, [0.0, 0.0]).unwrap();
    for _ in 0..6 {
        let (x0, y0) = (r.random_range(0..55), r.random_range(0..55));
        let (w, h) = (r.random_range(1..6), r.random_range(1..6));
        for y in y0..y0 + h {
            for x in x0..x0 + w {
                m.set(x, y, LETHAL);
            }
        }
    }
    m.set(r.random_range(0..60), r.random_range(0..60), UNKNOWN);
    m
}

#[test]
fn inflation_monotone_in_distance() {
    for seed in 0..20 {
        let m = blocky_map(seed);
        let inf = inflate_costmap(&m, 0.1, 0.5, 5.0).unwrap();
        let d2 = squared_distance_transform(&m).unwrap();
        let mut pairs: Vec<(i64, u8)> = (0..m.cells.len())
            .filter(|&i| m.cells[i] < LETHAL)
            .map(|i| (d2[i], inf.cells[i]))
            .collect();
        pairs.sort();
        assert!(pairs.windows(2).all(|w| w[0].1 >= w[1].1));
        assert!(pairs.iter().all(|p| p.1 <= INSCRIBED));
    }
}

#[test]
fn ray_cost_splits_additively() {
    use rand::Rng;
    let mut r = rng(9);
    let mut m = OccupancyCostMap::new(40, 40, 0.05, [0.0, 0.0]).unwrap();
    for c in m.cells.iter_mut() {
        *c = r.random_range(0..200);
    }
    for _ in 0..200 {
        let a = [r.random::<f64>() * 1.99, r.random::<f64>() * 1.99];
        let b = [r.random::<f64>() * 1.99, r.random::<f64>() * 1.99];
        // split at the point where the segment crosses a vertical grid line
        let gx = ((a[0].min(b[0]) / 0.05).floor() + 1.0) * 0.05;
        if gx >= a[0].max(b[0]) || (b[0] - a[0]).abs() < 1e-6 {
            continue;
        }
        let t = (gx - a[0]) / (b[0] - a[0]);
        let mid = [gx, a[1] + t * (b[1] - a[1])];
        let whole = cast_ray(&m, a, b).unwrap();
        let first = cast_ray(&m, a, mid).unwrap();
        let second = cast_ray(&m, mid, b).unwrap();
        let shared = f64::from(m.cost_at(mid).unwrap());
        assert!((whole.cumulative_cost - (first.cumulative_cost + second.cumulative_cost - shared)).abs() < 1e-9);
    }
}

#[test]
fn selected_waypoint_is_cheap_cell_with_clear_ray() {
    for seed in 0..20 {
        let m = inflate_costmap(&blocky_map(seed + 50), 0.05, 0.3, 5.0).unwrap();
        let target = [1.5, 1.5];
        let ring = sample_waypoint_ring(target, 0.3, 1.0, 24, 3);
        if let Some(w) = select_waypoint(&m, &ring, target, 128) {
            assert!(m.cost_at(w.position).unwrap() < 128);
            let r = cast_ray(&m, w.position, target).unwrap();
            assert!(r.reached);
            assert_eq!(r.cumulative_cost, w.ray_cost);
        }
    }
}
