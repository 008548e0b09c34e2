//! Point-cloud primitives shared by every stage of the detector.

mod filter;
mod icp;
mod kdtree;
mod sample;

pub use filter::{random_downsample, remove_statistical_outliers, voxel_downsample, OutlierParams};
pub use icp::{icp_register, IcpParams, IcpResult};
pub use kdtree::{KdTree, Neighbor};
pub use sample::{point_in_triangle, sample_mesh};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point3 = nalgebra::Point3<f64>;
pub type Rgb = [u8; 3];

fn is_finite(p: &Point3) -> bool {
    p.x.is_finite() && p.y.is_finite() && p.z.is_finite()
}

/// Ordered set of 3D points with optional per-point voxel counts and colors.
///
/// Weights, when present, are the number of raw points merged into each
/// point during voxel down-sampling. A missing weight vector means every
/// point stands for exactly one sample.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PointCloud {
    points: Vec<Point3>,
    weights: Option<Vec<u32>>,
    colors: Option<Vec<Rgb>>,
}

impl PointCloud {
    pub fn new(points: Vec<Point3>) -> Result<Self> {
        if let Some(i) = points.iter().position(|p| !is_finite(p)) {
            return Err(Error::param(format!("point {i} has a non-finite coordinate")));
        }
        Ok(Self {
            points,
            weights: None,
            colors: None,
        })
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn with_weights(mut self, weights: Vec<u32>) -> Result<Self> {
        if weights.len() != self.points.len() {
            return Err(Error::param(format!(
                "weights length {} does not match point count {}",
                weights.len(),
                self.points.len()
            )));
        }
        if weights.iter().any(|&w| w == 0) {
            return Err(Error::param("weights must be >= 1"));
        }
        self.weights = Some(weights);
        Ok(self)
    }

    pub fn with_colors(mut self, colors: Vec<Rgb>) -> Result<Self> {
        if colors.len() != self.points.len() {
            return Err(Error::param(format!(
                "colors length {} does not match point count {}",
                colors.len(),
                self.points.len()
            )));
        }
        self.colors = Some(colors);
        Ok(self)
    }

    pub fn without_weights(mut self) -> Self {
        self.weights = None;
        self
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Point3] {
        &self.points
    }

    pub fn weights(&self) -> Option<&[u32]> {
        self.weights.as_deref()
    }

    pub fn colors(&self) -> Option<&[Rgb]> {
        self.colors.as_deref()
    }

    /// Weight of point `i`, 1 when the cloud carries no weights.
    pub fn weight(&self, i: usize) -> u32 {
        self.weights.as_ref().map_or(1, |w| w[i])
    }

    pub fn total_weight(&self) -> u64 {
        match &self.weights {
            Some(w) => w.iter().map(|&x| u64::from(x)).sum(),
            None => self.points.len() as u64,
        }
    }

    /// Subset of the cloud in the given index order.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            weights: self
                .weights
                .as_ref()
                .map(|w| indices.iter().map(|&i| w[i]).collect()),
            colors: self
                .colors
                .as_ref()
                .map(|c| indices.iter().map(|&i| c[i]).collect()),
        }
    }

    /// Concatenates clouds in order. Weights and colors survive only if every
    /// input carries them; missing weights count as 1.
    pub fn concat<'a, I>(clouds: I) -> PointCloud
    where
        I: IntoIterator<Item = &'a PointCloud>,
    {
        let clouds: Vec<&PointCloud> = clouds.into_iter().collect();
        let points = clouds.iter().flat_map(|c| c.points.iter().copied()).collect();
        let weights = if clouds.iter().any(|c| c.weights.is_some()) {
            Some(
                clouds
                    .iter()
                    .flat_map(|c| (0..c.len()).map(move |i| c.weight(i)))
                    .collect(),
            )
        } else {
            None
        };
        let colors = if !clouds.is_empty() && clouds.iter().all(|c| c.colors.is_some()) {
            Some(
                clouds
                    .iter()
                    .flat_map(|c| c.colors.as_ref().unwrap().iter().copied())
                    .collect(),
            )
        } else {
            None
        };
        PointCloud {
            points,
            weights,
            colors,
        }
    }

    pub fn transformed(&self, t: &RigidTransform) -> PointCloud {
        PointCloud {
            points: self.points.iter().map(|p| t.apply(p)).collect(),
            weights: self.weights.clone(),
            colors: self.colors.clone(),
        }
    }

    /// Axis-aligned bounds `(min, max)`, `None` for an empty cloud.
    pub fn bounds(&self) -> Option<(Point3, Point3)> {
        let first = *self.points.first()?;
        Some(self.points.iter().fold((first, first), |(lo, hi), p| {
            (
                Point3::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z)),
                Point3::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z)),
            )
        }))
    }

    pub fn centroid(&self) -> Option<Point3> {
        mean_point(self.points.iter())
    }
}

/// Arithmetic mean accumulated in iteration order.
pub fn mean_point<'a, I>(points: I) -> Option<Point3>
where
    I: IntoIterator<Item = &'a Point3>,
{
    let mut sum = Vector3::zeros();
    let mut n = 0usize;
    for p in points {
        sum += p.coords;
        n += 1;
    }
    (n > 0).then(|| Point3::from(sum / n as f64))
}

/// Proper rigid motion `x -> R x + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl RigidTransform {
    const TOL: f64 = 1e-9;

    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        let ortho = (rotation * rotation.transpose() - Matrix3::identity()).norm();
        let det = rotation.determinant();
        if !(ortho <= Self::TOL) || !((det - 1.0).abs() <= Self::TOL) {
            return Err(Error::param(format!(
                "rotation is not proper orthonormal (|RR^T - I| = {ortho:e}, det = {det})"
            )));
        }
        if !translation.iter().all(|v| v.is_finite()) {
            return Err(Error::param("translation must be finite"));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Rotation by `angle` radians about `axis` followed by a translation.
    pub fn from_axis_angle(axis: Vector3<f64>, angle: f64, translation: Vector3<f64>) -> Self {
        let rot = nalgebra::Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), angle);
        Self {
            rotation: *rot.matrix(),
            translation,
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn apply(&self, p: &Point3) -> Point3 {
        Point3::from(self.rotation * p.coords + self.translation)
    }

    /// `self ∘ other`: applies `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// Rotation angle in radians, in `[0, π]`.
    pub fn rotation_angle(&self) -> f64 {
        let c = ((self.rotation.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
        c.acos()
    }
}

/// Indexed triangle mesh with degenerate faces removed at construction.
#[derive(Debug, Clone, Default)]
pub struct TriangleMesh {
    vertices: Vec<Point3>,
    faces: Vec<[usize; 3]>,
}

impl TriangleMesh {
    pub fn new(vertices: Vec<Point3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        if let Some(i) = vertices.iter().position(|p| !is_finite(p)) {
            return Err(Error::param(format!("vertex {i} has a non-finite coordinate")));
        }
        let n = vertices.len();
        if let Some(f) = faces.iter().find(|f| f.iter().any(|&i| i >= n)) {
            return Err(Error::param(format!(
                "face {f:?} references a vertex beyond {n}"
            )));
        }
        let faces = faces
            .into_iter()
            .filter(|f| triangle_area(&vertices[f[0]], &vertices[f[1]], &vertices[f[2]]) > 0.0)
            .collect();
        Ok(Self { vertices, faces })
    }

    pub fn vertices(&self) -> &[Point3] {
        &self.vertices
    }

    pub fn faces(&self) -> &[[usize; 3]] {
        &self.faces
    }

    pub fn triangle(&self, face: usize) -> [Point3; 3] {
        let f = self.faces[face];
        [self.vertices[f[0]], self.vertices[f[1]], self.vertices[f[2]]]
    }

    pub fn face_area(&self, face: usize) -> f64 {
        let [a, b, c] = self.triangle(face);
        triangle_area(&a, &b, &c)
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    /// Merges another mesh into this one, offsetting its indices.
    pub fn append(&mut self, other: &TriangleMesh) {
        let base = self.vertices.len();
        self.vertices.extend_from_slice(&other.vertices);
        self.faces
            .extend(other.faces.iter().map(|f| [f[0] + base, f[1] + base, f[2] + base]));
    }

    /// Closed axis-aligned box with outward-facing triangles.
    pub fn axis_box(min: Point3, max: Point3) -> Result<Self> {
        let v = |x: f64, y: f64, z: f64| Point3::new(x, y, z);
        let vertices = vec![
            v(min.x, min.y, min.z),
            v(max.x, min.y, min.z),
            v(max.x, max.y, min.z),
            v(min.x, max.y, min.z),
            v(min.x, min.y, max.z),
            v(max.x, min.y, max.z),
            v(max.x, max.y, max.z),
            v(min.x, max.y, max.z),
        ];
        let faces = vec![
            [0, 2, 1],
            [0, 3, 2],
            [4, 5, 6],
            [4, 6, 7],
            [0, 1, 5],
            [0, 5, 4],
            [1, 2, 6],
            [1, 6, 5],
            [2, 3, 7],
            [2, 7, 6],
            [3, 0, 4],
            [3, 4, 7],
        ];
        Self::new(vertices, faces)
    }
}

pub(crate) fn triangle_area(a: &Point3, b: &Point3, c: &Point3) -> f64 {
    0.5 * (b - a).cross(&(c - a)).norm()
}
