//! STL meshes, binary and ASCII. Shared corners are welded by exact
//! coordinate match on load.

use std::collections::HashMap;
use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::geom::{Point3, TriangleMesh};

#[derive(Default)]
struct Welder {
    vertices: Vec<Point3>,
    lookup: HashMap<[u64; 3], usize>,
}

impl Welder {
    fn index(&mut self, p: Point3) -> usize {
        let key = [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()];
        *self.lookup.entry(key).or_insert_with(|| {
            self.vertices.push(p);
            self.vertices.len() - 1
        })
    }
}

fn is_binary(bytes: &[u8]) -> bool {
    if bytes.len() < 84 {
        return false;
    }
    let n = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize;
    bytes.len() == 84 + 50 * n || !bytes.starts_with(b"solid")
}

pub fn read_stl<R: Read>(mut reader: R) -> Result<TriangleMesh> {
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes)?;
    if is_binary(&bytes) {
        read_binary(&bytes)
    } else {
        read_ascii(std::str::from_utf8(&bytes).map_err(|_| Error::parse("STL is neither binary nor UTF-8"))?)
    }
}

fn read_binary(bytes: &[u8]) -> Result<TriangleMesh> {
    let n = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize;
    if bytes.len() < 84 + 50 * n {
        return Err(Error::parse(format!("binary STL truncated: {n} triangles declared")));
    }
    let mut w = Welder::default();
    let mut faces = Vec::with_capacity(n);
    for t in 0..n {
        let rec = &bytes[84 + 50 * t..84 + 50 * (t + 1)];
        let f = |o: usize| f32::from_le_bytes(rec[o..o + 4].try_into().unwrap()) as f64;
        let mut face = [0usize; 3];
        for (k, slot) in face.iter_mut().enumerate() {
            let o = 12 + 12 * k;
            *slot = w.index(Point3::new(f(o), f(o + 4), f(o + 8)));
        }
        faces.push(face);
    }
    TriangleMesh::new(w.vertices, faces)
}

fn read_ascii(text: &str) -> Result<TriangleMesh> {
    let mut w = Welder::default();
    let mut faces = Vec::new();
    let mut corners = Vec::with_capacity(3);
    for line in text.lines() {
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("vertex") => {
                let v: Vec<f64> = tok
                    .map(|s| s.parse::<f64>().map_err(|e| Error::parse(format!("bad STL vertex: {e}"))))
                    .collect::<Result<_>>()?;
                if v.len() != 3 {
                    return Err(Error::parse("STL vertex needs 3 coordinates"));
                }
                corners.push(w.index(Point3::new(v[0], v[1], v[2])));
            }
            Some("endloop") => {
                if corners.len() != 3 {
                    return Err(Error::parse("STL facet must have 3 vertices"));
                }
                faces.push([corners[0], corners[1], corners[2]]);
                corners.clear();
            }
            _ => {}
        }
    }
    TriangleMesh::new(w.vertices, faces)
}

fn normal(mesh: &TriangleMesh, f: usize) -> [f32; 3] {
    let [a, b, c] = mesh.triangle(f);
    let n = (b - a).cross(&(c - a)).normalize();
    [n.x as f32, n.y as f32, n.z as f32]
}

pub fn write_stl_binary<W: Write>(w: &mut W, mesh: &TriangleMesh) -> Result<()> {
    let mut header = [0u8; 80];
    header[..9].copy_from_slice(b"tanksweep");
    w.write_all(&header)?;
    w.write_all(&(mesh.faces().len() as u32).to_le_bytes())?;
    for f in 0..mesh.faces().len() {
        for v in normal(mesh, f) {
            w.write_all(&v.to_le_bytes())?;
        }
        for p in mesh.triangle(f) {
            for v in [p.x, p.y, p.z] {
                w.write_all(&(v as f32).to_le_bytes())?;
            }
        }
        w.write_all(&[0, 0])?;
    }
    Ok(())
}

pub fn write_stl_ascii<W: Write>(w: &mut W, mesh: &TriangleMesh) -> Result<()> {
    writeln!(w, "solid tanksweep")?;
    for f in 0..mesh.faces().len() {
        let n = normal(mesh, f);
        writeln!(w, "  facet normal {} {} {}", n[0], n[1], n[2])?;
        writeln!(w, "    outer loop")?;
        for p in mesh.triangle(f) {
            writeln!(w, "      vertex {} {} {}", p.x, p.y, p.z)?;
        }
        writeln!(w, "    endloop\n  endfacet")?;
    }
    writeln!(w, "endsolid tanksweep")?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_roundtrip_binary_and_ascii() {
        let m = TriangleMesh::axis_box(Point3::new(0.0, 0.0, 0.0), Point3::new(1.0, 2.0, 0.5)).unwrap();
        let mut bin = Vec::new();
        write_stl_binary(&mut bin, &m).unwrap();
        assert_eq!(bin.len(), 84 + 50 * 12);
        let b = read_stl(bin.as_slice()).unwrap();
        assert_eq!(b.vertices().len(), 8);
        assert_eq!(b.faces().len(), 12);
        assert!((b.surface_area() - m.surface_area()).abs() < 1e-6);

        let mut txt = Vec::new();
        write_stl_ascii(&mut txt, &m).unwrap();
        let a = read_stl(txt.as_slice()).unwrap();
        assert_eq!(a.vertices().len(), 8);
        assert_eq!(a.faces().len(), 12);
    }

    #[test]
    fn truncated_binary_fails() {
        let mut bin = vec![0u8; 84];
        bin[80..84].copy_from_slice(&5u32.to_le_bytes());
        assert!(read_stl(bin.as_slice()).is_err());
    }
}
