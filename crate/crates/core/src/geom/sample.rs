use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Point3, PointCloud, TriangleMesh};
use crate::error::{Error, Result};

/// Draws `n_points` uniformly over the mesh surface: faces are picked with
/// probability proportional to area, then a point is drawn uniformly inside
/// the chosen face.
pub fn sample_mesh(mesh: &TriangleMesh, n_points: usize, seed: u64) -> Result<PointCloud> {
    if mesh.faces().is_empty() {
        return Err(Error::EmptyMesh);
    }
    if n_points == 0 {
        return Err(Error::param("n_points must be >= 1"));
    }
    let mut cumulative = Vec::with_capacity(mesh.faces().len());
    let mut total = 0.0;
    for f in 0..mesh.faces().len() {
        total += mesh.face_area(f);
        cumulative.push(total);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..n_points)
        .map(|_| {
            let u: f64 = rng.random::<f64>() * total;
            let face = cumulative
                .partition_point(|&c| c <= u)
                .min(cumulative.len() - 1);
            let [a, b, c] = mesh.triangle(face);
            let mut r1: f64 = rng.random();
            let mut r2: f64 = rng.random();
            if r1 + r2 > 1.0 {
                r1 = 1.0 - r1;
                r2 = 1.0 - r2;
            }
            a + (b - a) * r1 + (c - a) * r2
        })
        .collect();
    PointCloud::new(points)
}

/// Whether `p` lies in triangle `abc` (coplanar within `tol`, barycentric
/// coordinates in `[-tol, 1 + tol]`).
pub fn point_in_triangle(p: &Point3, tri: &[Point3; 3], tol: f64) -> bool {
    let [a, b, c] = tri;
    let v0 = b - a;
    let v1 = c - a;
    let v2 = p - a;
    let n = v0.cross(&v1);
    let nn = n.norm();
    if nn == 0.0 {
        return false;
    }
    if (v2.dot(&n) / nn).abs() > tol {
        return false;
    }
    let d00 = v0.dot(&v0);
    let d01 = v0.dot(&v1);
    let d11 = v1.dot(&v1);
    let d20 = v2.dot(&v0);
    let d21 = v2.dot(&v1);
    let denom = d00 * d11 - d01 * d01;
    let v = (d11 * d20 - d01 * d21) / denom;
    let w = (d00 * d21 - d01 * d20) / denom;
    let u = 1.0 - v - w;
    [u, v, w].iter().all(|&x| x >= -tol && x <= 1.0 + tol)
}
