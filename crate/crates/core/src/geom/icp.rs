use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{KdTree, Point3, PointCloud, RigidTransform};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IcpParams {
    pub max_corr_dist: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for IcpParams {
    fn default() -> Self {
        Self {
            max_corr_dist: 0.1,
            max_iter: 50,
            tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IcpResult {
    /// Maps source coordinates into the target frame.
    pub transform: RigidTransform,
    /// Fraction of source points with a correspondence at exit.
    pub fitness: f64,
    pub rmse: f64,
    /// Correspondence RMSE after each accepted iterate, starting with the
    /// initial alignment. Non-increasing.
    pub rmse_history: Vec<f64>,
}

struct Matches {
    pairs: Vec<(usize, usize)>,
    rmse: f64,
}

fn correspond(
    src: &[Point3],
    tree: &KdTree,
    t: &RigidTransform,
    max_dist: f64,
) -> Result<Matches> {
    let found: Vec<Option<(usize, f64)>> = src
        .par_iter()
        .map(|p| {
            let q = t.apply(p);
            tree.nearest(&q)
                .map(|n| (n.distance <= max_dist).then_some((n.index, n.distance)))
        })
        .collect::<Result<_>>()?;
    let mut pairs = Vec::new();
    let mut sq = 0.0;
    for (i, f) in found.into_iter().enumerate() {
        if let Some((j, d)) = f {
            pairs.push((i, j));
            sq += d * d;
        }
    }
    let rmse = if pairs.is_empty() {
        0.0
    } else {
        (sq / pairs.len() as f64).sqrt()
    };
    Ok(Matches { pairs, rmse })
}

/// Least-squares rigid motion taking `from[i]` onto `to[i]` (Kabsch).
pub(crate) fn kabsch(from: &[Point3], to: &[Point3]) -> RigidTransform {
    let n = from.len() as f64;
    let cf = from.iter().fold(Vector3::zeros(), |s, p| s + p.coords) / n;
    let ct = to.iter().fold(Vector3::zeros(), |s, p| s + p.coords) / n;
    let mut h = Matrix3::zeros();
    for (a, b) in from.iter().zip(to) {
        h += (a.coords - cf) * (b.coords - ct).transpose();
    }
    let svd = h.svd(true, true);
    let u = svd.u.unwrap();
    let vt = svd.v_t.unwrap();
    let v = vt.transpose();
    let d = (v * u.transpose()).determinant().signum();
    let fix = Matrix3::from_diagonal(&Vector3::new(1.0, 1.0, if d == 0.0 { 1.0 } else { d }));
    let r = v * fix * u.transpose();
    // re-orthonormalize against round-off so the transform invariants hold
    let r = nalgebra::Rotation3::from_matrix_eps(&r, 1e-15, 16, nalgebra::Rotation3::from_matrix_unchecked(r));
    let r = *r.matrix();
    RigidTransform {
        rotation: r,
        translation: ct - r * cf,
    }
}

/// Point-to-point ICP aligning `source` onto `target`.
///
/// An iterate is accepted only if it does not raise the correspondence RMSE;
/// iteration stops once the accepted improvement drops below `tol`.
pub fn icp_register(source: &PointCloud, target: &PointCloud, params: IcpParams) -> Result<IcpResult> {
    if source.is_empty() || target.is_empty() {
        return Err(Error::param("ICP needs non-empty source and target clouds"));
    }
    if !(params.max_corr_dist > 0.0) {
        return Err(Error::param("max_corr_dist must be > 0"));
    }
    let tree = KdTree::new(target.points());
    let src = source.points();
    let mut t = RigidTransform::identity();
    let mut m = correspond(src, &tree, &t, params.max_corr_dist)?;
    if m.pairs.is_empty() {
        return Err(Error::NoOverlap);
    }
    let mut history = vec![m.rmse];
    for _ in 0..params.max_iter {
        if m.rmse == 0.0 {
            break;
        }
        let (from, to): (Vec<Point3>, Vec<Point3>) = m
            .pairs
            .iter()
            .map(|&(i, j)| (t.apply(&src[i]), target.points()[j]))
            .unzip();
        let step = kabsch(&from, &to);
        let candidate = step.compose(&t);
        let next = correspond(src, &tree, &candidate, params.max_corr_dist)?;
        if next.pairs.is_empty() || next.rmse > m.rmse {
            break;
        }
        let improvement = m.rmse - next.rmse;
        t = candidate;
        m = next;
        history.push(m.rmse);
        if improvement < params.tol {
            break;
        }
    }
    Ok(IcpResult {
        transform: t,
        fitness: m.pairs.len() as f64 / src.len() as f64,
        rmse: m.rmse,
        rmse_history: history,
    })
}
