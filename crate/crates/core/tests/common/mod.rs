//! Brute-force reference implementations and the shared synthetic study.
#![allow(dead_code)]

pub mod checks;

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tanksweep::config::Config;
use tanksweep::covariance::CovarianceField;
use tanksweep::geom::{Point3, PointCloud};
use tanksweep::pipeline::{build_reference, fit_covariance, TuningTrial};
use tanksweep::reference::ReferenceMap;
use tanksweep::scenegen::{nominal_scans, synthetic_trial, tank_mesh, Scene, SceneSpec};
use tanksweep::waypoint::{OccupancyCostMap, LETHAL, UNKNOWN};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_points(n: usize, scale: f64, seed: u64) -> Vec<Point3> {
    let mut r = rng(seed);
    (0..n)
        .map(|_| Point3::new(r.random::<f64>() * scale, r.random::<f64>() * scale, r.random::<f64>() * scale))
        .collect()
}

/// Indices and distances of the `k` nearest points by full scan, ordered by
/// (squared distance, index).
pub fn knn_scan(points: &[Point3], q: &Point3, k: usize) -> Vec<(usize, f64)> {
    let mut all: Vec<(f64, usize)> = points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let (dx, dy, dz) = (p.x - q.x, p.y - q.y, p.z - q.z);
            (dx * dx + dy * dy + dz * dz, i)
        })
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    all.into_iter().take(k).map(|(d2, i)| (i, d2.sqrt())).collect()
}

fn passable(v: u8) -> bool {
    v != UNKNOWN && v < LETHAL
}

/// Reachable cells from `(sx, sy)` by breadth-first search over a 2D grid.
pub fn bfs_reachable(map: &OccupancyCostMap, sx: usize, sy: usize) -> Vec<Vec<bool>> {
    let (w, h) = (map.width, map.height);
    let grid: Vec<Vec<u8>> = (0..h).map(|y| (0..w).map(|x| map.cells[y * w + x]).collect()).collect();
    let mut seen = vec![vec![false; w]; h];
    let mut q = VecDeque::new();
    seen[sy][sx] = true;
    q.push_back((sx as i64, sy as i64));
    while let Some((x, y)) = q.pop_front() {
        for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
            let (nx, ny) = (x + dx, y + dy);
            if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                continue;
            }
            let (ux, uy) = (nx as usize, ny as usize);
            if !seen[uy][ux] && passable(grid[uy][ux]) {
                seen[uy][ux] = true;
                q.push_back((nx, ny));
            }
        }
    }
    seen
}

/// Squared cell distance from every cell to the nearest obstacle by
/// checking every obstacle.
pub fn brute_distance(map: &OccupancyCostMap) -> Vec<i64> {
    let obstacles: Vec<(i64, i64)> = (0..map.height)
        .flat_map(|y| (0..map.width).map(move |x| (x, y)))
        .filter(|&(x, y)| {
            let v = map.cells[y * map.width + x];
            v != UNKNOWN && v >= map.lethal_threshold
        })
        .map(|(x, y)| (x as i64, y as i64))
        .collect();
    let mut out = Vec::with_capacity(map.cells.len());
    for y in 0..map.height as i64 {
        for x in 0..map.width as i64 {
            out.push(
                obstacles
                    .iter()
                    .map(|&(ox, oy)| (ox - x).pow(2) + (oy - y).pow(2))
                    .min()
                    .unwrap_or(i64::MAX),
            );
        }
    }
    out
}

/// Cost of a free cell at `d` meters from the nearest obstacle.
pub fn expected_inflation(d: f64, robot: f64, inflation: f64, scaling: f64) -> u8 {
    if d <= robot {
        253
    } else if d <= inflation {
        (252.0 * (-scaling * (d - robot)).exp()).round() as u8
    } else {
        0
    }
}

/// Inflated map computed from brute-force distances.
pub fn brute_inflate(map: &OccupancyCostMap, robot: f64, inflation: f64, scaling: f64) -> Vec<u8> {
    let d2 = brute_distance(map);
    let any = d2.iter().any(|&d| d != i64::MAX);
    map.cells
        .iter()
        .zip(&d2)
        .map(|(&v, &d)| {
            if !any || v == UNKNOWN || v >= map.lethal_threshold {
                v
            } else {
                v.max(expected_inflation((d as f64).sqrt() * map.resolution, robot, inflation, scaling))
            }
        })
        .collect()
}

/// Cells visited by a segment, found by sampling it every 1/20 cell. When two
/// consecutive samples differ diagonally, the skipped side cell is decided
/// by which side of the shared corner the segment passes (both sides, x
/// first, when it passes through the corner exactly).
pub fn sampled_cells(map: &OccupancyCostMap, from: [f64; 2], to: [f64; 2]) -> Vec<(usize, usize)> {
    let g = |p: [f64; 2]| [(p[0] - map.origin[0]) / map.resolution, (p[1] - map.origin[1]) / map.resolution];
    let (a, b) = (g(from), g(to));
    let d = [b[0] - a[0], b[1] - a[1]];
    let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
    let steps = ((len * 20.0).ceil() as usize).max(1);
    let at = |t: f64| if t >= 1.0 { b } else { [a[0] + d[0] * t, a[1] + d[1] * t] };
    let cell = |p: [f64; 2]| (p[0].floor() as i64, p[1].floor() as i64);
    let mut out = vec![cell(a)];
    for s in 1..=steps {
        let p = at(s as f64 / steps as f64);
        // a sample exactly on a cell boundary belongs to no single cell
        if s < steps && (p[0].fract() == 0.0 || p[1].fract() == 0.0) {
            continue;
        }
        let c = cell(p);
        let last = *out.last().unwrap();
        if c == last {
            continue;
        }
        if c.0 != last.0 && c.1 != last.1 {
            // corner shared by the two cells
            let cx = last.0.max(c.0) as f64;
            let cy = last.1.max(c.1) as f64;
            let cross = d[0] * (cy - a[1]) - d[1] * (cx - a[0]);
            // sign of the cross product says whether the corner lies left
            // or right of the direction of travel
            let sx = c.0 - last.0;
            let sy = c.1 - last.1;
            let turn = cross * (sx * sy) as f64;
            if turn > 0.0 {
                out.push((c.0, last.1));
            } else if turn < 0.0 {
                out.push((last.0, c.1));
            } else {
                out.push((c.0, last.1));
                out.push((last.0, c.1));
            }
        }
        out.push(c);
    }
    out.into_iter().map(|(x, y)| (x as usize, y as usize)).collect()
}

/// Centroid-linkage agglomeration recomputing every pairwise centroid
/// distance at every step. Returns clusters (ascending members) ordered by
/// smallest member.
pub fn naive_agglomerate(points: &[Point3], cutoff: f64) -> Vec<Vec<usize>> {
    let mut clusters: Vec<Vec<usize>> = (0..points.len()).map(|i| vec![i]).collect();
    let centroid = |m: &[usize]| {
        let mut s = [0.0; 3];
        for &i in m {
            s[0] += points[i].x;
            s[1] += points[i].y;
            s[2] += points[i].z;
        }
        let n = m.len() as f64;
        [s[0] / n, s[1] / n, s[2] / n]
    };
    loop {
        let cents: Vec<[f64; 3]> = clusters.iter().map(|c| centroid(c)).collect();
        let mut best: Option<(f64, usize, usize, usize, usize)> = None;
        for i in 0..clusters.len() {
            for j in i + 1..clusters.len() {
                let (a, b) = (cents[i], cents[j]);
                let d2 = (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2);
                let (lo, hi) = (clusters[i][0].min(clusters[j][0]), clusters[i][0].max(clusters[j][0]));
                let better = match best {
                    None => true,
                    Some((bd, blo, bhi, _, _)) => d2 < bd || (d2 == bd && (lo, hi) < (blo, bhi)),
                };
                if better {
                    best = Some((d2, lo, hi, i, j));
                }
            }
        }
        match best {
            Some((d2, _, _, i, j)) if d2.sqrt() < cutoff => {
                let mut merged = clusters[i].clone();
                merged.extend_from_slice(&clusters[j]);
                merged.sort_unstable();
                clusters[i] = merged;
                clusters.remove(j);
            }
            _ => break,
        }
    }
    clusters.sort_by_key(|c| c[0]);
    clusters
}

/// Average ranks of |d| by counting smaller and equal values.
pub fn ranks_by_counting(d: &[f64]) -> Vec<f64> {
    d.iter()
        .map(|x| {
            let less = d.iter().filter(|y| y.abs() < x.abs()).count() as f64;
            let equal = d.iter().filter(|y| y.abs() == x.abs()).count() as f64;
            less + (equal + 1.0) / 2.0
        })
        .collect()
}

/// Upper-tail signed-rank p-value by listing all 2ⁿ sign patterns.
pub fn enumerate_p_greater(d: &[f64]) -> f64 {
    let ranks = ranks_by_counting(d);
    let observed: f64 = d.iter().zip(&ranks).filter(|(x, _)| **x > 0.0).map(|(_, r)| r).sum();
    let n = d.len();
    let mut hits = 0u64;
    for mask in 0u64..(1 << n) {
        let w: f64 = (0..n).filter(|i| mask >> i & 1 == 1).map(|i| ranks[i]).sum();
        if w >= observed - 1e-9 {
            hits += 1;
        }
    }
    hits as f64 / (1u64 << n) as f64
}

/// Reference, covariance field and seeded trials shared by the end-to-end
/// checks: CAD reference of the default scene, covariance from 8 nominal
/// scans, 5 tuning trials and 15 test trials.
pub struct Study {
    pub config: Config,
    pub spec: SceneSpec,
    pub reference: ReferenceMap,
    pub field: CovarianceField,
    pub tuning: Vec<TuningTrial>,
    pub test: Vec<TuningTrial>,
}

pub fn trial(scene: Scene) -> TuningTrial {
    TuningTrial {
        truth: scene.centroids(),
        query: scene.cloud,
    }
}

pub fn study(n_test: usize) -> Study {
    let config = Config::profile("sim").unwrap();
    let spec = SceneSpec::default();
    let reference = build_reference(&config, &[], Some(&tank_mesh(&spec).unwrap())).unwrap();
    let training: Vec<PointCloud> = nominal_scans(&spec, 8, 1000).unwrap();
    let field = fit_covariance(&config, &reference, &training).unwrap();
    let tuning = (100..105).map(|s| trial(synthetic_trial(&spec, s).unwrap())).collect();
    let test = (0..n_test as u64).map(|s| trial(synthetic_trial(&spec, s).unwrap())).collect();
    Study {
        config,
        spec,
        reference,
        field,
        tuning,
        test,
    }
}
