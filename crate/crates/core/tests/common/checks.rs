//! Oracle comparisons shared by the unit-style tests and the acceptance
//! report. Each returns a short summary on success and the first mismatch
//! on failure.

use rand::Rng;
use tanksweep::discrepancy::{agglomerate, ScoredCloud};
use tanksweep::geom::{KdTree, Point3};
use tanksweep::tuning::{exact_p_value, grid_costs, grid_search, signed_ranks, wilcoxon_signed_rank};
use tanksweep::tuning::{Alternative, CostParams, GridSpec, Trial};
use tanksweep::waypoint::{
    flood_fill_reachable, inflate_costmap, squared_distance_transform, traverse, OccupancyCostMap, FREE, LETHAL,
    UNKNOWN,
};

use super::*;

pub type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

pub fn knn_vs_scan() -> Check {
    let mut queries = 0;
    for (n, seed) in [(1, 1), (17, 2), (500, 3), (2000, 4)] {
        let pts = random_points(n, 2.0, seed);
        let tree = KdTree::new(&pts);
        for q in random_points(40, 2.4, seed + 100) {
            for k in [1, 5, 32, n + 3] {
                let got: Vec<(usize, f64)> =
                    tree.knn(&q, k).map_err(|e| e.to_string())?.iter().map(|nb| (nb.index, nb.distance)).collect();
                ensure!(got == knn_scan(&pts, &q, k), "n={n} k={k} q={q:?}");
                queries += 1;
            }
        }
    }
    Ok(format!("{queries} queries, n up to 2000, identical indices and distances"))
}

pub fn random_map(seed: u64, w: usize, h: usize) -> OccupancyCostMap {
    let mut r = rng(seed);
    let mut m = OccupancyCostMap::new(w, h, 0.05, [-0.3, 0.7]).unwrap();
    let density = 0.2 + 0.3 * r.random::<f64>();
    for c in m.cells.iter_mut() {
        let u: f64 = r.random();
        *c = if u < density {
            LETHAL
        } else if u < density + 0.03 {
            UNKNOWN
        } else if u < density + 0.06 {
            r.random_range(1..=253)
        } else {
            FREE
        };
    }
    m
}

pub fn flood_fill_vs_bfs() -> Check {
    let mut checked = 0;
    for seed in 0..200 {
        let m = random_map(seed, 50, 50);
        let free: Vec<(usize, usize)> = (0..50)
            .flat_map(|y| (0..50).map(move |x| (x, y)))
            .filter(|&(x, y)| {
                let v = m.get(x, y);
                v != UNKNOWN && v < LETHAL
            })
            .collect();
        let (sx, sy) = free[rng(seed + 7).random_range(0..free.len())];
        let got = flood_fill_reachable(&m, m.cell_center(sx, sy)).map_err(|e| e.to_string())?;
        let want = bfs_reachable(&m, sx, sy);
        for y in 0..50 {
            for x in 0..50 {
                let expect = if want[y][x] { FREE } else { LETHAL };
                ensure!(got.get(x, y) == expect, "map {seed} cell ({x},{y})");
            }
        }
        checked += 1;
        if checked == 50 {
            break;
        }
    }
    ensure!(checked == 50, "only {checked} maps checked");
    Ok("50 random 50x50 maps, identical reachable sets".into())
}

pub fn inflation_vs_brute() -> Check {
    let mut maps = 0;
    for seed in 0..30 {
        let mut m = random_map(seed + 1000, 23 + seed as usize % 7, 31);
        // sparse obstacles give long distances
        for c in m.cells.iter_mut() {
            if *c == LETHAL && rng(u64::from(*c) + seed).random::<f64>() < 0.9 {
                *c = FREE;
            }
        }
        let want = brute_distance(&m);
        match squared_distance_transform(&m) {
            Some(d) => ensure!(d == want, "distance transform differs on map {seed}"),
            None => ensure!(want.iter().all(|&v| v == i64::MAX), "missing distance transform on map {seed}"),
        }
        for (r, big, s) in [(0.15, 0.4, 10.0), (0.05, 0.05, 3.0), (0.1, 1.0, 0.5)] {
            let got = inflate_costmap(&m, r, big, s).map_err(|e| e.to_string())?;
            ensure!(got.cells == brute_inflate(&m, r, big, s), "inflation differs on map {seed} ({r}, {big}, {s})");
        }
        maps += 1;
    }
    Ok(format!("{maps} maps x 3 radius settings, exact"))
}

pub fn ray_vs_sampling() -> Check {
    let m = OccupancyCostMap::new(30, 30, 0.1, [-1.0, 0.5]).unwrap();
    let mut r = rng(42);
    let span = |r: &mut rand_chacha::ChaCha8Rng| [-1.0 + 2.999 * r.random::<f64>(), 0.5 + 2.999 * r.random::<f64>()];
    for _ in 0..100 {
        let (a, b) = (span(&mut r), span(&mut r));
        ensure!(traverse(&m, a, b).map_err(|e| e.to_string())? == sampled_cells(&m, a, b), "{a:?} -> {b:?}");
    }
    // exact corner crossings on a unit grid
    let u = OccupancyCostMap::new(12, 12, 1.0, [0.0, 0.0]).unwrap();
    let corners = [
        ([0.5, 0.5], [5.5, 5.5]),
        ([5.5, 0.5], [0.5, 5.5]),
        ([0.5, 1.5], [4.5, 9.5]),
        ([11.5, 11.5], [2.5, 2.5]),
        ([1.0, 1.0], [7.0, 4.0]),
    ];
    for (a, b) in corners {
        ensure!(traverse(&u, a, b).map_err(|e| e.to_string())? == sampled_cells(&u, a, b), "{a:?} -> {b:?}");
    }
    Ok(format!("100 random rays + {} corner rays, identical cell sequences", corners.len()))
}

pub fn blob_points(n: usize, seed: u64) -> Vec<Point3> {
    let mut r = rng(seed);
    let centers: Vec<Point3> = random_points(5, 3.0, seed + 1);
    (0..n)
        .map(|i| {
            let c = centers[i % centers.len()];
            let s = 0.05 + 0.3 * ((i / 5) % 3) as f64;
            Point3::new(
                c.x + s * (r.random::<f64>() - 0.5),
                c.y + s * (r.random::<f64>() - 0.5),
                c.z + s * (r.random::<f64>() - 0.5),
            )
        })
        .collect()
}

pub fn clustering_vs_naive() -> Check {
    let mut cuts = 0;
    for (n, seed) in [(2, 1), (10, 2), (60, 3), (200, 4)] {
        let pts = blob_points(n, seed);
        let trace = agglomerate(&pts, 2.0);
        for cutoff in [0.0, 0.05, 0.2, 0.45, 1.0, 2.0] {
            ensure!(trace.cut(cutoff) == naive_agglomerate(&pts, cutoff), "n={n} cutoff={cutoff}");
            cuts += 1;
        }
    }
    Ok(format!("{cuts} cuts, n up to 200, identical partitions"))
}

pub fn toy_scored(seed: u64) -> (ScoredCloud, Vec<Point3>) {
    let mut r = rng(seed);
    let truth = vec![Point3::new(0.5, 0.5, 0.0), Point3::new(2.0, 1.0, 0.0), Point3::new(1.2, 2.2, 0.0)];
    let mut points = Vec::new();
    let mut scores = Vec::new();
    for t in &truth {
        for _ in 0..15 {
            points.push(Point3::new(t.x + 0.2 * (r.random::<f64>() - 0.5), t.y + 0.2 * (r.random::<f64>() - 0.5), 0.05));
            scores.push(1.0 + 2.0 * r.random::<f64>());
        }
    }
    for _ in 0..60 {
        points.push(Point3::new(2.5 * r.random::<f64>(), 2.5 * r.random::<f64>(), 0.0));
        scores.push(2.0 * r.random::<f64>());
    }
    let n = points.len();
    let weights: Vec<u32> = (0..n).map(|_| r.random_range(1..4)).collect();
    (
        ScoredCloud {
            points,
            weights,
            raw_scores: scores.clone(),
            smoothed_scores: scores,
            associated_reference_index: vec![0; n],
        },
        truth,
    )
}

/// Mean cost of one grid triple recomputed from scratch.
pub fn exhaustive_cost(data: &[(ScoredCloud, Vec<Point3>)], t: f64, c: f64, m: u32, lambda: f64, penalty: f64) -> f64 {
    let mut total = 0.0;
    for (s, truth) in data {
        let sel: Vec<usize> = (0..s.points.len()).filter(|&i| s.smoothed_scores[i] > t).collect();
        let pts: Vec<Point3> = sel.iter().map(|&i| s.points[i]).collect();
        let mut cents = Vec::new();
        for cl in naive_agglomerate(&pts, c) {
            let w: u64 = cl.iter().map(|&k| u64::from(s.weights[sel[k]])).sum();
            if w >= u64::from(m) {
                let n = cl.len() as f64;
                let mut acc = [0.0; 3];
                for &k in &cl {
                    acc[0] += pts[k].x;
                    acc[1] += pts[k].y;
                    acc[2] += pts[k].z;
                }
                cents.push(Point3::new(acc[0] / n, acc[1] / n, acc[2] / n));
            }
        }
        let mut used = vec![false; cents.len()];
        let mut dsum = 0.0;
        for g in truth {
            if cents.is_empty() {
                dsum += penalty;
                continue;
            }
            let mut best = 0;
            for j in 1..cents.len() {
                if (cents[j] - g).norm() < (cents[best] - g).norm() {
                    best = j;
                }
            }
            used[best] = true;
            dsum += (cents[best] - g).norm();
        }
        let mean = if truth.is_empty() { 0.0 } else { dsum / truth.len() as f64 };
        total += mean + lambda * used.iter().filter(|u| !**u).count() as f64;
    }
    total / data.len() as f64
}

pub fn grid_search_vs_exhaustive() -> Check {
    let data: Vec<(ScoredCloud, Vec<Point3>)> = (0..3).map(|s| toy_scored(s + 10)).collect();
    let spec = GridSpec::new(vec![0.5, 1.0, 1.5, 2.5], vec![0.1, 0.2, 0.35, 0.6], vec![0, 6]).unwrap();
    let params = CostParams::new(0.05, 3.0).unwrap();
    let trials: Vec<Trial<'_>> = data.iter().map(|(s, t)| Trial { scored: s, truth: t }).collect();
    let costs = grid_costs(&trials, &spec, &params).map_err(|e| e.to_string())?;
    let mut best: Option<(f64, f64, f64, u32)> = None;
    for (ti, &t) in spec.thresholds.iter().enumerate() {
        for (ci, &c) in spec.cutoffs.iter().enumerate() {
            for (mi, &m) in spec.min_counts.iter().enumerate() {
                let want = exhaustive_cost(&data, t, c, m, 0.05, 3.0);
                let got = costs[ti][ci][mi];
                ensure!((got - want).abs() < 1e-12, "cost at ({t},{c},{m}): {got} vs {want}");
                if best.is_none_or(|b| want < b.0) {
                    best = Some((want, t, c, m));
                }
            }
        }
    }
    let got = grid_search(&trials, &spec, &params).map_err(|e| e.to_string())?;
    let (cost, t, c, m) = best.unwrap();
    ensure!(
        (got.threshold, got.cutoff, got.min_count) == (t, c, m),
        "argmin ({}, {}, {}) vs ({t}, {c}, {m})",
        got.threshold,
        got.cutoff,
        got.min_count
    );
    ensure!((got.mean_cost - cost).abs() < 1e-12, "best cost {} vs {cost}", got.mean_cost);
    Ok(format!("4x4x2 grid, all 32 costs within 1e-12, argmin ({t}, {c}, {m})"))
}

pub fn wilcoxon_vs_enumeration() -> Check {
    let mut r = rng(3);
    let mut cases = 0;
    for n in 1..=12 {
        for rep in 0..8 {
            // integer-valued differences produce ties
            let d: Vec<f64> = (0..n)
                .map(|_| {
                    let v = if rep % 2 == 0 { r.random_range(-6i32..=6) as f64 } else { r.random::<f64>() - 0.4 };
                    if v == 0.0 { 1.0 } else { v }
                })
                .collect();
            let zeros = vec![0.0; n];
            let sr = signed_ranks(&d, &zeros).map_err(|e| e.to_string())?;
            ensure!(sr.ranks == ranks_by_counting(&d), "ranks differ for {d:?}");
            let want = enumerate_p_greater(&d);
            let got = exact_p_value(&sr.ranks, sr.w_plus, Alternative::Greater);
            ensure!(got == want, "n={n} d={d:?}: {got} vs {want}");
            let neg: Vec<f64> = d.iter().map(|x| -x).collect();
            let srn = signed_ranks(&neg, &zeros).map_err(|e| e.to_string())?;
            ensure!(exact_p_value(&srn.ranks, srn.w_plus, Alternative::Less) == want, "mirrored n={n}");
            cases += 1;
        }
    }
    let six = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
    let p = wilcoxon_signed_rank(&six, &[0.0; 6], Alternative::Greater).map_err(|e| e.to_string())?;
    ensure!(p == 1.0 / 64.0, "all-positive n=6 gives {p}");
    Ok(format!("{cases} samples n<=12 equal to 2^n enumeration; all-positive n=6 p = {p}"))
}
