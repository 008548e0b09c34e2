//! PLY reader/writer for point clouds and triangle meshes.
//!
//! Reads `ascii` and `binary_little_endian` files. Vertex `x`, `y`, `z` and
//! optional `red`, `green`, `blue` are extracted; any other vertex property is
//! skipped. Faces are read from a `vertex_indices` (or `vertex_index`) list
//! and fanned into triangles.

use std::io::{BufRead, BufReader, Read, Write};

use crate::error::{Error, Result};
use crate::geom::{Point3, PointCloud, Rgb, TriangleMesh};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlyFormat {
    Ascii,
    BinaryLittleEndian,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            other => return Err(Error::parse(format!("unknown PLY scalar type '{other}'"))),
        })
    }

    fn read_bin<R: Read>(self, r: &mut R) -> Result<f64> {
        macro_rules! rd {
            ($t:ty, $n:expr) => {{
                let mut b = [0u8; $n];
                r.read_exact(&mut b)?;
                <$t>::from_le_bytes(b) as f64
            }};
        }
        Ok(match self {
            Scalar::I8 => rd!(i8, 1),
            Scalar::U8 => rd!(u8, 1),
            Scalar::I16 => rd!(i16, 2),
            Scalar::U16 => rd!(u16, 2),
            Scalar::I32 => rd!(i32, 4),
            Scalar::U32 => rd!(u32, 4),
            Scalar::F32 => rd!(f32, 4),
            Scalar::F64 => rd!(f64, 8),
        })
    }
}

#[derive(Debug, Clone)]
enum Property {
    Scalar { name: String, ty: Scalar },
    List { name: String, count: Scalar, item: Scalar },
}

#[derive(Debug, Clone)]
struct Element {
    name: String,
    count: usize,
    props: Vec<Property>,
}

struct Header {
    format: PlyFormat,
    elements: Vec<Element>,
}

fn read_header<R: BufRead>(r: &mut R) -> Result<Header> {
    let mut line = String::new();
    r.read_line(&mut line)?;
    if line.trim() != "ply" {
        return Err(Error::parse("missing 'ply' magic"));
    }
    let mut format = None;
    let mut elements: Vec<Element> = Vec::new();
    loop {
        line.clear();
        if r.read_line(&mut line)? == 0 {
            return Err(Error::parse("unexpected end of PLY header"));
        }
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            ["end_header"] => break,
            ["format", "ascii", _] => format = Some(PlyFormat::Ascii),
            ["format", "binary_little_endian", _] => format = Some(PlyFormat::BinaryLittleEndian),
            ["format", other, ..] => {
                return Err(Error::parse(format!("unsupported PLY format '{other}'")))
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => elements.push(Element {
                name: name.to_string(),
                count: count
                    .parse()
                    .map_err(|_| Error::parse(format!("bad element count '{count}'")))?,
                props: Vec::new(),
            }),
            ["property", "list", count, item, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::parse("property before element"))?;
                el.props.push(Property::List {
                    name: name.to_string(),
                    count: Scalar::parse(count)?,
                    item: Scalar::parse(item)?,
                });
            }
            ["property", ty, name] => {
                let el = elements
                    .last_mut()
                    .ok_or_else(|| Error::parse("property before element"))?;
                el.props.push(Property::Scalar {
                    name: name.to_string(),
                    ty: Scalar::parse(ty)?,
                });
            }
            _ => return Err(Error::parse(format!("bad PLY header line '{}'", line.trim()))),
        }
    }
    Ok(Header {
        format: format.ok_or_else(|| Error::parse("PLY header has no format line"))?,
        elements,
    })
}

#[derive(Default)]
struct PlyData {
    points: Vec<Point3>,
    colors: Vec<Rgb>,
    has_color: bool,
    faces: Vec<[usize; 3]>,
}

/// Reads one element record as a list of (scalar values | list values).
fn read_record<R: BufRead>(
    r: &mut R,
    format: PlyFormat,
    el: &Element,
    tokens: &mut std::vec::IntoIter<String>,
) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(el.props.len());
    let next_ascii = |tokens: &mut std::vec::IntoIter<String>| -> Result<f64> {
        tokens
            .next()
            .ok_or_else(|| Error::parse(format!("short '{}' record", el.name)))?
            .parse::<f64>()
            .map_err(|e| Error::parse(format!("bad number in '{}' record: {e}", el.name)))
    };
    for p in &el.props {
        match (format, p) {
            (PlyFormat::Ascii, Property::Scalar { .. }) => out.push(vec![next_ascii(tokens)?]),
            (PlyFormat::Ascii, Property::List { .. }) => {
                let n = next_ascii(tokens)? as usize;
                let mut v = Vec::with_capacity(n);
                for _ in 0..n {
                    v.push(next_ascii(tokens)?);
                }
                out.push(v);
            }
            (PlyFormat::BinaryLittleEndian, Property::Scalar { ty, .. }) => {
                out.push(vec![ty.read_bin(r)?])
            }
            (PlyFormat::BinaryLittleEndian, Property::List { count, item, .. }) => {
                let n = count.read_bin(r)? as usize;
                let mut v = Vec::with_capacity(n);
                for _ in 0..n {
                    v.push(item.read_bin(r)?);
                }
                out.push(v);
            }
        }
    }
    Ok(out)
}

fn read_body<R: BufRead>(r: &mut R, header: &Header) -> Result<PlyData> {
    let mut data = PlyData::default();
    let mut line = String::new();
    for el in &header.elements {
        let idx = |name: &str| {
            el.props.iter().position(|p| match p {
                Property::Scalar { name: n, .. } | Property::List { name: n, .. } => n == name,
            })
        };
        let xyz = [idx("x"), idx("y"), idx("z")];
        let rgb = [idx("red"), idx("green"), idx("blue")];
        let face_list = idx("vertex_indices").or_else(|| idx("vertex_index"));
        if el.name == "vertex" {
            data.has_color = rgb.iter().all(Option::is_some);
        }
        for _ in 0..el.count {
            let mut tokens = if header.format == PlyFormat::Ascii {
                line.clear();
                if r.read_line(&mut line)? == 0 {
                    return Err(Error::parse(format!("truncated '{}' element", el.name)));
                }
                line.split_whitespace()
                    .map(str::to_owned)
                    .collect::<Vec<_>>()
                    .into_iter()
            } else {
                Vec::new().into_iter()
            };
            let rec = read_record(r, header.format, el, &mut tokens)?;
            match el.name.as_str() {
                "vertex" => {
                    let [Some(x), Some(y), Some(z)] = xyz else {
                        return Err(Error::parse("vertex element lacks x/y/z"));
                    };
                    data.points.push(Point3::new(rec[x][0], rec[y][0], rec[z][0]));
                    if data.has_color {
                        let c = |i: Option<usize>| rec[i.unwrap()][0].clamp(0.0, 255.0) as u8;
                        data.colors.push([c(rgb[0]), c(rgb[1]), c(rgb[2])]);
                    }
                }
                "face" => {
                    if let Some(fi) = face_list {
                        let v = &rec[fi];
                        for t in 1..v.len().saturating_sub(1) {
                            data.faces.push([v[0] as usize, v[t] as usize, v[t + 1] as usize]);
                        }
                    }
                }
                _ => {}
            }
        }
    }
    Ok(data)
}

fn read_data<R: Read>(reader: R) -> Result<PlyData> {
    let mut r = BufReader::new(reader);
    let header = read_header(&mut r)?;
    read_body(&mut r, &header)
}

pub fn read_ply_cloud<R: Read>(reader: R) -> Result<PointCloud> {
    let data = read_data(reader)?;
    let mut cloud = PointCloud::new(data.points)?;
    if data.has_color {
        cloud = cloud.with_colors(data.colors)?;
    }
    Ok(cloud)
}

pub fn read_ply_mesh<R: Read>(reader: R) -> Result<TriangleMesh> {
    let data = read_data(reader)?;
    TriangleMesh::new(data.points, data.faces)
}

fn write_header<W: Write>(
    w: &mut W,
    format: PlyFormat,
    n_vertices: usize,
    color: bool,
    n_faces: Option<usize>,
) -> Result<()> {
    writeln!(w, "ply")?;
    match format {
        PlyFormat::Ascii => writeln!(w, "format ascii 1.0")?,
        PlyFormat::BinaryLittleEndian => writeln!(w, "format binary_little_endian 1.0")?,
    }
    writeln!(w, "element vertex {n_vertices}")?;
    writeln!(w, "property double x\nproperty double y\nproperty double z")?;
    if color {
        writeln!(w, "property uchar red\nproperty uchar green\nproperty uchar blue")?;
    }
    if let Some(nf) = n_faces {
        writeln!(w, "element face {nf}")?;
        writeln!(w, "property list uchar int vertex_indices")?;
    }
    writeln!(w, "end_header")?;
    Ok(())
}

fn write_vertex<W: Write>(w: &mut W, format: PlyFormat, p: &Point3, c: Option<&Rgb>) -> Result<()> {
    match format {
        PlyFormat::Ascii => {
            write!(w, "{} {} {}", p.x, p.y, p.z)?;
            if let Some(c) = c {
                write!(w, " {} {} {}", c[0], c[1], c[2])?;
            }
            writeln!(w)?;
        }
        PlyFormat::BinaryLittleEndian => {
            for v in [p.x, p.y, p.z] {
                w.write_all(&v.to_le_bytes())?;
            }
            if let Some(c) = c {
                w.write_all(c)?;
            }
        }
    }
    Ok(())
}

pub fn write_ply_cloud<W: Write>(w: &mut W, cloud: &PointCloud, format: PlyFormat) -> Result<()> {
    let colors = cloud.colors();
    write_header(w, format, cloud.len(), colors.is_some(), None)?;
    for (i, p) in cloud.points().iter().enumerate() {
        write_vertex(w, format, p, colors.map(|c| &c[i]))?;
    }
    Ok(())
}

pub fn write_ply_mesh<W: Write>(w: &mut W, mesh: &TriangleMesh, format: PlyFormat) -> Result<()> {
    write_header(w, format, mesh.vertices().len(), false, Some(mesh.faces().len()))?;
    for p in mesh.vertices() {
        write_vertex(w, format, p, None)?;
    }
    for f in mesh.faces() {
        match format {
            PlyFormat::Ascii => writeln!(w, "3 {} {} {}", f[0], f[1], f[2])?,
            PlyFormat::BinaryLittleEndian => {
                w.write_all(&[3u8])?;
                for &i in f {
                    w.write_all(&(i as i32).to_le_bytes())?;
                }
            }
        }
    }
    Ok(())
}
