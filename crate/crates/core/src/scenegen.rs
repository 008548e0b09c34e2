//! Deterministic synthetic tank scenes: an axis-aligned tank with optional
//! box-shaped structure (columns, beams), per-surface sensor noise, and
//! box-shaped FODs resting on the floor.
//!
//! Sample positions come only from `SceneSpec::seed`; noise, FOD placement
//! and perturbations come from the per-call seed. Two scans of the same spec
//! therefore observe the same surface points under independent noise.

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{Point3, PointCloud, RigidTransform, TriangleMesh};
use crate::report::GroundTruthFod;

/// Zero-mean Gaussian noise split into the surface-normal direction and the
/// two in-plane directions (standard deviations, meters).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub normal: f64,
    pub tangential: f64,
}

impl NoiseModel {
    pub const NONE: NoiseModel = NoiseModel {
        normal: 0.0,
        tangential: 0.0,
    };

    pub fn isotropic(s: f64) -> Self {
        Self {
            normal: s,
            tangential: s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxElement {
    pub min: Point3,
    pub max: Point3,
}

impl BoxElement {
    pub fn contains(&self, p: &Point3) -> bool {
        (0..3).all(|i| p[i] > self.min[i] && p[i] < self.max[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneSpec {
    /// Interior extent along x, y, z; the tank spans `[0, dims]`.
    pub dims: [f64; 3],
    /// Points per m².
    pub floor_density: f64,
    pub wall_density: f64,
    pub ceiling_density: f64,
    pub fod_density: f64,
    /// Columns, beams and other solid structure.
    pub elements: Vec<BoxElement>,
    pub floor_noise: NoiseModel,
    pub wall_noise: NoiseModel,
    pub ceiling_noise: NoiseModel,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            dims: [2.4, 1.6, 1.3],
            floor_density: 1500.0,
            wall_density: 1500.0,
            ceiling_density: 1500.0,
            fod_density: 6000.0,
            elements: vec![BoxElement {
                min: Point3::new(1.5, 0.9, 0.0),
                max: Point3::new(1.7, 1.1, 1.3),
            }],
            floor_noise: NoiseModel::isotropic(0.004),
            wall_noise: NoiseModel {
                normal: 0.02,
                tangential: 0.004,
            },
            ceiling_noise: NoiseModel {
                normal: 0.04,
                tangential: 0.006,
            },
            seed: 1,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.dims.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::param("tank dimensions must be > 0"));
        }
        if [self.floor_density, self.wall_density, self.ceiling_density, self.fod_density]
            .iter()
            .any(|d| !(*d > 0.0))
        {
            return Err(Error::param("densities must be > 0"));
        }
        for n in [self.floor_noise, self.wall_noise, self.ceiling_noise] {
            if !(n.normal >= 0.0 && n.tangential >= 0.0) {
                return Err(Error::param("noise deviations must be >= 0"));
            }
        }
        Ok(())
    }

    pub fn without_noise(&self) -> Self {
        Self {
            floor_noise: NoiseModel::NONE,
            wall_noise: NoiseModel::NONE,
            ceiling_noise: NoiseModel::NONE,
            ..self.clone()
        }
    }

    fn inside_structure(&self, p: &Point3) -> bool {
        self.elements.iter().any(|e| e.contains(p))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FodSpec {
    pub fod_type: String,
    /// Box extent along x, y, z.
    pub size: [f64; 3],
}

/// Tool catalog used by [`sample_fod_protocol`].
pub fn fod_catalog() -> Vec<FodSpec> {
    [
        ("Hammer", [0.32, 0.12, 0.04]),
        ("Power drill", [0.24, 0.08, 0.20]),
        ("Tape measure", [0.08, 0.08, 0.05]),
        ("Screwdriver", [0.20, 0.04, 0.03]),
        ("Sander", [0.16, 0.12, 0.12]),
        ("Crimper", [0.22, 0.06, 0.03]),
    ]
    .into_iter()
    .map(|(t, s)| FodSpec {
        fod_type: t.to_string(),
        size: s,
    })
    .collect()
}

/// Draws 2 to 5 distinct tools from the catalog.
pub fn sample_fod_protocol(seed: u64) -> Vec<FodSpec> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cat = fod_catalog();
    let n = rng.random_range(2..=5);
    let mut idx = rand::seq::index::sample(&mut rng, cat.len(), n).into_vec();
    idx.sort_unstable();
    idx.into_iter().map(|i| cat[i].clone()).collect()
}

/// One planar rectangular patch: `origin + u·a + v·b` for `u, v ∈ [0, 1]`.
struct Patch {
    origin: Point3,
    a: Vector3<f64>,
    b: Vector3<f64>,
    normal: Vector3<f64>,
    density: f64,
    noise: NoiseModel,
}

impl Patch {
    fn area(&self) -> f64 {
        self.a.cross(&self.b).norm()
    }
}

fn tank_patches(spec: &SceneSpec) -> Vec<Patch> {
    let [lx, ly, lz] = spec.dims;
    let o = Point3::origin();
    let (ex, ey, ez) = (Vector3::x() * lx, Vector3::y() * ly, Vector3::z() * lz);
    let wall = |origin: Point3, a, b, normal| Patch {
        origin,
        a,
        b,
        normal,
        density: spec.wall_density,
        noise: spec.wall_noise,
    };
    let mut p = vec![
        Patch {
            origin: o,
            a: ex,
            b: ey,
            normal: Vector3::z(),
            density: spec.floor_density,
            noise: spec.floor_noise,
        },
        Patch {
            origin: o + ez,
            a: ex,
            b: ey,
            normal: -Vector3::z(),
            density: spec.ceiling_density,
            noise: spec.ceiling_noise,
        },
        wall(o, ex, ez, Vector3::y()),
        wall(o + ey, ex, ez, -Vector3::y()),
        wall(o, ey, ez, Vector3::x()),
        wall(o + ex, ey, ez, -Vector3::x()),
    ];
    for e in &spec.elements {
        let d = e.max - e.min;
        let (dx, dy, dz) = (Vector3::x() * d.x, Vector3::y() * d.y, Vector3::z() * d.z);
        p.push(wall(e.min, dx, dz, -Vector3::y()));
        p.push(wall(e.min + dy, dx, dz, Vector3::y()));
        p.push(wall(e.min, dy, dz, -Vector3::x()));
        p.push(wall(e.min + dx, dy, dz, Vector3::x()));
        p.push(Patch {
            origin: e.min + dz,
            a: dx,
            b: dy,
            normal: Vector3::z(),
            density: spec.floor_density,
            noise: spec.floor_noise,
        });
        p.push(Patch {
            origin: e.min,
            a: dx,
            b: dy,
            normal: -Vector3::z(),
            density: spec.ceiling_density,
            noise: spec.ceiling_noise,
        });
    }
    p
}

/// Exact surface samples (index of source patch kept for noise).
fn surface_samples(spec: &SceneSpec, patches: &[Patch]) -> Vec<(Point3, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::new();
    let eps = 1e-9;
    for (k, p) in patches.iter().enumerate() {
        let n = (p.area() * p.density).round() as usize;
        for _ in 0..n {
            let (u, v): (f64, f64) = (rng.random(), rng.random());
            let q = p.origin + p.a * u + p.b * v;
            // drop samples hidden inside structure or outside the tank
            let probe = q + p.normal * eps;
            let inside_tank = (0..3).all(|i| probe[i] >= -eps && probe[i] <= spec.dims[i] + eps);
            if !inside_tank || spec.inside_structure(&probe) {
                continue;
            }
            out.push((q, k));
        }
    }
    out
}

fn tangent_basis(n: &Vector3<f64>) -> (Vector3<f64>, Vector3<f64>) {
    let helper = if n.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
    let t1 = n.cross(&helper).normalize();
    (t1, n.cross(&t1))
}

fn add_noise(p: Point3, n: &Vector3<f64>, noise: NoiseModel, rng: &mut ChaCha8Rng) -> Point3 {
    if noise.normal == 0.0 && noise.tangential == 0.0 {
        return p;
    }
    let std = Normal::new(0.0, 1.0).unwrap();
    let (t1, t2) = tangent_basis(n);
    let (a, b, c): (f64, f64, f64) = (std.sample(rng), std.sample(rng), std.sample(rng));
    p + n * (a * noise.normal) + t1 * (b * noise.tangential) + t2 * (c * noise.tangential)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacedFod {
    pub spec: FodSpec,
    /// Box center; the box rests on the floor.
    pub centroid: Point3,
}

impl PlacedFod {
    pub fn bounds(&self) -> (Point3, Point3) {
        let h = Vector3::new(self.spec.size[0], self.spec.size[1], self.spec.size[2]) / 2.0;
        (self.centroid - h, self.centroid + h)
    }

    pub fn truth(&self) -> GroundTruthFod {
        GroundTruthFod {
            fod_type: self.spec.fod_type.clone(),
            centroid: self.centroid,
        }
    }
}

/// Uniform xy in the tank, then moved to the closest spot where the whole
/// footprint is inside the tank and off any structure.
pub fn place_fods(spec: &SceneSpec, fods: &[FodSpec], seed: u64) -> Result<Vec<PlacedFod>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9E37_79B9_7F4A_7C15);
    let margin = 0.01;
    fods.iter()
        .map(|f| {
            let [sx, sy, sz] = f.size;
            if f.size.iter().any(|s| !(*s > 0.0)) {
                return Err(Error::param(format!("{} has a non-positive size", f.fod_type)));
            }
            if sx + 2.0 * margin >= spec.dims[0] || sy + 2.0 * margin >= spec.dims[1] || sz >= spec.dims[2] {
                return Err(Error::param(format!("{} does not fit in the tank", f.fod_type)));
            }
            let clamp = |v: f64, half: f64, len: f64| v.clamp(half + margin, len - half - margin);
            let mut x = clamp(rng.random_range(0.0..spec.dims[0]), sx / 2.0, spec.dims[0]);
            let mut y = clamp(rng.random_range(0.0..spec.dims[1]), sy / 2.0, spec.dims[1]);
            for e in &spec.elements {
                if e.min.z > sz {
                    continue;
                }
                let lo = (e.min.x - sx / 2.0 - margin, e.min.y - sy / 2.0 - margin);
                let hi = (e.max.x + sx / 2.0 + margin, e.max.y + sy / 2.0 + margin);
                if x > lo.0 && x < hi.0 && y > lo.1 && y < hi.1 {
                    let moves = [(lo.0, y), (hi.0, y), (x, lo.1), (x, hi.1)];
                    let ok = |&(mx, my): &(f64, f64)| {
                        mx >= sx / 2.0 + margin
                            && mx <= spec.dims[0] - sx / 2.0 - margin
                            && my >= sy / 2.0 + margin
                            && my <= spec.dims[1] - sy / 2.0 - margin
                    };
                    let best = moves
                        .iter()
                        .filter(|m| ok(m))
                        .min_by(|a, b| {
                            let da = (a.0 - x).powi(2) + (a.1 - y).powi(2);
                            let db = (b.0 - x).powi(2) + (b.1 - y).powi(2);
                            da.total_cmp(&db)
                        })
                        .ok_or_else(|| Error::param(format!("no room for {}", f.fod_type)))?;
                    x = best.0;
                    y = best.1;
                }
            }
            Ok(PlacedFod {
                spec: f.clone(),
                centroid: Point3::new(x, y, sz / 2.0),
            })
        })
        .collect()
}

/// A generated scan together with its FODs.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub cloud: PointCloud,
    pub fods: Vec<PlacedFod>,
}

impl Scene {
    pub fn ground_truth(&self) -> Vec<GroundTruthFod> {
        self.fods.iter().map(PlacedFod::truth).collect()
    }

    pub fn centroids(&self) -> Vec<Point3> {
        self.fods.iter().map(|f| f.centroid).collect()
    }
}

/// Samples every tank surface, adds noise, and renders the FODs as dense
/// boxes (top and sides) with the floor under each footprint removed.
pub fn generate_scene(spec: &SceneSpec, fods: &[FodSpec], seed: u64) -> Result<Scene> {
    spec.validate()?;
    let placed = place_fods(spec, fods, seed)?;
    let patches = tank_patches(spec);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::new();
    for (q, k) in surface_samples(spec, &patches) {
        let under_fod = k == 0
            && placed.iter().any(|f| {
                let (lo, hi) = f.bounds();
                q.x >= lo.x && q.x <= hi.x && q.y >= lo.y && q.y <= hi.y
            });
        if under_fod {
            continue;
        }
        points.push(add_noise(q, &patches[k].normal, patches[k].noise, &mut rng));
    }
    let fod_noise = NoiseModel::isotropic(spec.floor_noise.normal.min(spec.floor_noise.tangential));
    let mut frng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    for f in &placed {
        let (lo, hi) = f.bounds();
        let d = hi - lo;
        let faces = [
            (lo + Vector3::z() * d.z, Vector3::x() * d.x, Vector3::y() * d.y, Vector3::z()),
            (lo, Vector3::x() * d.x, Vector3::z() * d.z, -Vector3::y()),
            (lo + Vector3::y() * d.y, Vector3::x() * d.x, Vector3::z() * d.z, Vector3::y()),
            (lo, Vector3::y() * d.y, Vector3::z() * d.z, -Vector3::x()),
            (lo + Vector3::x() * d.x, Vector3::y() * d.y, Vector3::z() * d.z, Vector3::x()),
        ];
        for (o, a, b, n) in faces {
            let count = (a.cross(&b).norm() * spec.fod_density).round() as usize;
            for _ in 0..count {
                let (u, v): (f64, f64) = (frng.random(), frng.random());
                points.push(add_noise(o + a * u + b * v, &n, fod_noise, &mut frng));
            }
        }
    }
    Ok(Scene {
        cloud: PointCloud::new(points)?,
        fods: placed,
    })
}

/// One seeded validation trial: FOD layout from the catalog protocol,
/// placement and noise all derived from `seed`.
pub fn synthetic_trial(spec: &SceneSpec, seed: u64) -> Result<Scene> {
    let mut sp = spec.clone();
    sp.seed = seed;
    generate_scene(&sp, &sample_fod_protocol(seed), seed.wrapping_add(5000))
}

/// FOD-free noisy scans for covariance training.
pub fn nominal_scans(spec: &SceneSpec, n: usize, seed: u64) -> Result<Vec<PointCloud>> {
    (0..n as u64)
        .map(|i| generate_scene(spec, &[], seed.wrapping_add(i)).map(|s| s.cloud))
        .collect()
}

/// Random rigid offset about the tank center: rotation about z up to
/// `max_angle` radians and xy translation up to `max_shift` meters.
pub fn random_perturbation(spec: &SceneSpec, max_angle: f64, max_shift: f64, seed: u64) -> RigidTransform {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xD1B5_4A32_D192_ED03);
    let angle = if max_angle > 0.0 { rng.random_range(-max_angle..=max_angle) } else { 0.0 };
    let (tx, ty) = if max_shift > 0.0 {
        (rng.random_range(-max_shift..=max_shift), rng.random_range(-max_shift..=max_shift))
    } else {
        (0.0, 0.0)
    };
    let c = Vector3::new(spec.dims[0] / 2.0, spec.dims[1] / 2.0, 0.0);
    let rot = RigidTransform::from_axis_angle(Vector3::z(), angle, Vector3::zeros());
    let to_center = RigidTransform::from_axis_angle(Vector3::z(), 0.0, -c);
    let back = RigidTransform::from_axis_angle(Vector3::z(), 0.0, c + Vector3::new(tx, ty, 0.0));
    back.compose(&rot.compose(&to_center))
}

/// Closed triangle mesh of the tank interior and its structure.
pub fn tank_mesh(spec: &SceneSpec) -> Result<TriangleMesh> {
    let [lx, ly, lz] = spec.dims;
    let mut m = TriangleMesh::axis_box(Point3::origin(), Point3::new(lx, ly, lz))?;
    for e in &spec.elements {
        m.append(&TriangleMesh::axis_box(e.min, e.max)?);
    }
    Ok(m)
}

/// True if `p` lies on one of the scene's nominal surfaces (within `tol`).
pub fn on_nominal_surface(spec: &SceneSpec, p: &Point3, tol: f64) -> bool {
    let [lx, ly, lz] = spec.dims;
    let on_tank = p.z.abs() <= tol
        || (p.z - lz).abs() <= tol
        || p.x.abs() <= tol
        || (p.x - lx).abs() <= tol
        || p.y.abs() <= tol
        || (p.y - ly).abs() <= tol;
    let on_elem = spec.elements.iter().any(|e| {
        let within = |i: usize| p[i] >= e.min[i] - tol && p[i] <= e.max[i] + tol;
        let on = |i: usize| (p[i] - e.min[i]).abs() <= tol || (p[i] - e.max[i]).abs() <= tol;
        (0..3).all(within) && (0..3).any(on)
    });
    on_tank || on_elem
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_points_lie_on_surfaces() {
        let spec = SceneSpec {
            floor_density: 200.0,
            wall_density: 200.0,
            ceiling_density: 200.0,
            ..SceneSpec::default()
        }
        .without_noise();
        let s = generate_scene(&spec, &[], 3).unwrap();
        assert!(s.cloud.len() > 1000);
        assert!(s.cloud.points().iter().all(|p| on_nominal_surface(&spec, p, 1e-9)));
        assert!(s.cloud.points().iter().all(|p| !spec.inside_structure(p)));
    }

    #[test]
    fn same_seed_same_bytes() {
        let spec = SceneSpec {
            floor_density: 100.0,
            wall_density: 100.0,
            ceiling_density: 100.0,
            ..SceneSpec::default()
        };
        let fods = sample_fod_protocol(9);
        assert!((2..=5).contains(&fods.len()));
        assert_eq!(fods, sample_fod_protocol(9));
        let a = generate_scene(&spec, &fods, 4).unwrap();
        let b = generate_scene(&spec, &fods, 4).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.cloud, generate_scene(&spec, &fods, 5).unwrap().cloud);
    }

    #[test]
    fn fods_inside_tank_and_off_structure() {
        let spec = SceneSpec::default();
        for seed in 0..50 {
            let placed = place_fods(&spec, &fod_catalog(), seed).unwrap();
            for f in &placed {
                let (lo, hi) = f.bounds();
                assert!(lo.x > 0.0 && lo.y > 0.0 && hi.x < spec.dims[0] && hi.y < spec.dims[1]);
                for e in &spec.elements {
                    let overlap = lo.x < e.max.x && hi.x > e.min.x && lo.y < e.max.y && hi.y > e.min.y;
                    assert!(!overlap, "{f:?}");
                }
            }
        }
    }

    #[test]
    fn centroid_inside_fod_points() {
        let spec = SceneSpec::default().without_noise();
        let fods = vec![fod_catalog()[1].clone()];
        let s = generate_scene(&spec, &fods, 2).unwrap();
        let (lo, hi) = s.fods[0].bounds();
        let c = s.fods[0].centroid;
        assert!((0..3).all(|i| c[i] > lo[i] && c[i] < hi[i]));
    }

    #[test]
    fn oversized_fod_rejected() {
        let big = FodSpec {
            fod_type: "plank".into(),
            size: [5.0, 0.1, 0.1],
        };
        assert!(generate_scene(&SceneSpec::default(), &[big], 1).is_err());
    }
}
