//! 2D occupancy grid / cost map.

use std::collections::VecDeque;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::PointCloud;

pub const FREE: u8 = 0;
pub const INSCRIBED: u8 = 253;
pub const LETHAL: u8 = 254;
/// Cell never observed. Not an obstacle for inflation, impassable for rays.
pub const UNKNOWN: u8 = 255;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyCostMap {
    pub width: usize,
    pub height: usize,
    /// Meters per cell.
    pub resolution: f64,
    /// World coordinate of the lower-left corner of cell (0, 0).
    pub origin: [f64; 2],
    /// Row-major, `cells[y * width + x]`.
    pub cells: Vec<u8>,
    pub lethal_threshold: u8,
}

impl OccupancyCostMap {
    pub fn new(width: usize, height: usize, resolution: f64, origin: [f64; 2]) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::param("map must have at least one cell"));
        }
        if !(resolution > 0.0) {
            return Err(Error::param("resolution must be > 0"));
        }
        Ok(Self {
            width,
            height,
            resolution,
            origin,
            cells: vec![FREE; width * height],
            lethal_threshold: LETHAL,
        })
    }

    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn get(&self, x: usize, y: usize) -> u8 {
        self.cells[self.index(x, y)]
    }

    pub fn set(&mut self, x: usize, y: usize, v: u8) {
        let i = self.index(x, y);
        self.cells[i] = v;
    }

    /// Continuous grid coordinates (cell units) of a world point.
    pub fn to_grid(&self, p: [f64; 2]) -> [f64; 2] {
        [
            (p[0] - self.origin[0]) / self.resolution,
            (p[1] - self.origin[1]) / self.resolution,
        ]
    }

    /// Cell containing a world point, `None` outside the map.
    pub fn world_to_cell(&self, p: [f64; 2]) -> Option<(usize, usize)> {
        let g = self.to_grid(p);
        let (x, y) = (g[0].floor(), g[1].floor());
        (x >= 0.0 && y >= 0.0 && (x as usize) < self.width && (y as usize) < self.height)
            .then(|| (x as usize, y as usize))
    }

    pub fn cell_center(&self, x: usize, y: usize) -> [f64; 2] {
        [
            self.origin[0] + (x as f64 + 0.5) * self.resolution,
            self.origin[1] + (y as f64 + 0.5) * self.resolution,
        ]
    }

    /// Cell value at a world point, `None` outside the map.
    pub fn cost_at(&self, p: [f64; 2]) -> Option<u8> {
        self.world_to_cell(p).map(|(x, y)| self.get(x, y))
    }

    pub(crate) fn is_obstacle(&self, v: u8) -> bool {
        v != UNKNOWN && v >= self.lethal_threshold
    }

    pub(crate) fn is_free(&self, v: u8) -> bool {
        v != UNKNOWN && v < self.lethal_threshold
    }

    /// Binary PGM rendering, north up; darker is costlier.
    pub fn write_pgm<W: Write>(&self, w: &mut W) -> Result<()> {
        write!(w, "P5\n{} {}\n255\n", self.width, self.height)?;
        let mut row = vec![0u8; self.width];
        for y in (0..self.height).rev() {
            for (x, px) in row.iter_mut().enumerate() {
                let v = self.get(x, y);
                *px = if v == UNKNOWN { 128 } else { 254 - v.min(254) };
            }
            w.write_all(&row)?;
        }
        Ok(())
    }
}

/// Marks every cell holding a point with `z ∈ [z_min, z_max]` as lethal.
/// The map spans the cloud's xy bounds plus one cell on each side.
pub fn project_occupancy(cloud: &PointCloud, resolution: f64, z_min: f64, z_max: f64) -> Result<OccupancyCostMap> {
    if !(resolution > 0.0) {
        return Err(Error::param("resolution must be > 0"));
    }
    if !(z_min < z_max) {
        return Err(Error::param("z_min must be < z_max"));
    }
    let (lo, hi) = cloud.bounds().ok_or(Error::EmptyIndex)?;
    let origin = [lo.x - resolution, lo.y - resolution];
    let width = ((hi.x - origin[0]) / resolution).floor() as usize + 2;
    let height = ((hi.y - origin[1]) / resolution).floor() as usize + 2;
    let mut map = OccupancyCostMap::new(width, height, resolution, origin)?;
    for p in cloud.points() {
        if p.z < z_min || p.z > z_max {
            continue;
        }
        if let Some((x, y)) = map.world_to_cell([p.x, p.y]) {
            map.set(x, y, LETHAL);
        }
    }
    Ok(map)
}

/// 4-connected flood fill over free cells from `seed`; reached cells become
/// free and everything else lethal.
pub fn flood_fill_reachable(map: &OccupancyCostMap, seed: [f64; 2]) -> Result<OccupancyCostMap> {
    let (sx, sy) = map.world_to_cell(seed).ok_or(Error::OutOfBounds(seed[0], seed[1]))?;
    if !map.is_free(map.get(sx, sy)) {
        return Err(Error::SeedBlocked);
    }
    let mut reached = vec![false; map.cells.len()];
    let mut queue = VecDeque::from([(sx, sy)]);
    reached[map.index(sx, sy)] = true;
    while let Some((x, y)) = queue.pop_front() {
        let mut visit = |nx: usize, ny: usize| {
            let i = map.index(nx, ny);
            if !reached[i] && map.is_free(map.cells[i]) {
                reached[i] = true;
                queue.push_back((nx, ny));
            }
        };
        if x > 0 {
            visit(x - 1, y);
        }
        if x + 1 < map.width {
            visit(x + 1, y);
        }
        if y > 0 {
            visit(x, y - 1);
        }
        if y + 1 < map.height {
            visit(x, y + 1);
        }
    }
    let mut out = map.clone();
    for (c, r) in out.cells.iter_mut().zip(reached) {
        *c = if r { FREE } else { LETHAL };
    }
    Ok(out)
}

const FAR: i64 = 1 << 40;

/// Exact 1D squared distance transform (lower envelope of parabolas) with
/// breakpoints kept as rationals.
fn edt_1d(f: &[i64], out: &mut [i64]) {
    let n = f.len();
    let mut v = vec![0usize; n];
    // breakpoint z[k] = num / den between parabola k-1 and k
    let mut z: Vec<(i128, i128)> = vec![(0, 1); n + 1];
    let mut k = 0usize;
    let inter = |q: usize, p: usize| -> (i128, i128) {
        let (q, p) = (q as i128, p as i128);
        let num = (i128::from(f[q as usize]) + q * q) - (i128::from(f[p as usize]) + p * p);
        (num, 2 * (q - p))
    };
    let le = |a: (i128, i128), b: (i128, i128)| a.0 * b.1 <= b.0 * a.1;
    const NEG: (i128, i128) = (-1 << 100, 1);
    const POS: (i128, i128) = (1 << 100, 1);
    z[0] = NEG;
    z[1] = POS;
    for q in 1..n {
        let mut s = inter(q, v[k]);
        while le(s, z[k]) {
            k -= 1;
            s = inter(q, v[k]);
        }
        k += 1;
        v[k] = q;
        z[k] = s;
        z[k + 1] = POS;
    }
    k = 0;
    for (q, o) in out.iter_mut().enumerate() {
        // advance while z[k+1] < q
        while z[k + 1].0 < (q as i128) * z[k + 1].1 {
            k += 1;
        }
        let d = q as i64 - v[k] as i64;
        *o = d * d + f[v[k]];
    }
}

/// Squared distance, in cells, from every cell to the nearest obstacle cell;
/// `None` when the map has no obstacles.
pub fn squared_distance_transform(map: &OccupancyCostMap) -> Option<Vec<i64>> {
    let (w, h) = (map.width, map.height);
    if !map.cells.iter().any(|&v| map.is_obstacle(v)) {
        return None;
    }
    let mut g = vec![0i64; w * h];
    let mut col = vec![0i64; h];
    let mut tmp = vec![0i64; h];
    for x in 0..w {
        for y in 0..h {
            col[y] = if map.is_obstacle(map.get(x, y)) { 0 } else { FAR };
        }
        edt_1d(&col, &mut tmp);
        for y in 0..h {
            g[y * w + x] = tmp[y];
        }
    }
    let mut out = vec![0i64; w * h];
    let mut row = vec![0i64; w];
    for y in 0..h {
        edt_1d(&g[y * w..(y + 1) * w], &mut row);
        out[y * w..(y + 1) * w].copy_from_slice(&row);
    }
    Some(out)
}

/// Cost of a free cell at distance `d` (meters) from the nearest obstacle.
pub fn inflation_cost(d: f64, robot_radius: f64, inflation_radius: f64, cost_scaling: f64) -> u8 {
    if d <= robot_radius {
        INSCRIBED
    } else if d <= inflation_radius {
        (252.0 * (-cost_scaling * (d - robot_radius)).exp()).round() as u8
    } else {
        FREE
    }
}

/// Navigation-stack style inflation: lethal cells stay lethal, free cells get
/// an inscribed or exponentially decaying cost by distance to the nearest
/// lethal cell. Unknown cells are left as they are.
pub fn inflate_costmap(
    map: &OccupancyCostMap,
    robot_radius: f64,
    inflation_radius: f64,
    cost_scaling: f64,
) -> Result<OccupancyCostMap> {
    if !(robot_radius > 0.0) || !(inflation_radius >= robot_radius) {
        return Err(Error::param("need inflation_radius >= robot_radius > 0"));
    }
    let mut out = map.clone();
    let Some(d2) = squared_distance_transform(map) else {
        return Ok(out);
    };
    for (i, c) in out.cells.iter_mut().enumerate() {
        if *c == UNKNOWN || map.is_obstacle(*c) {
            continue;
        }
        let d = (d2[i] as f64).sqrt() * map.resolution;
        *c = (*c).max(inflation_cost(d, robot_radius, inflation_radius, cost_scaling));
    }
    Ok(out)
}
