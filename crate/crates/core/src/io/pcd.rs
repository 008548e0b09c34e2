//! ASCII PCD (point cloud data) files with `x y z` and an optional packed
//! `rgb` field.

use std::io::{BufRead, BufReader, Read, Write};

use crate::error::{Error, Result};
use crate::geom::{Point3, PointCloud};

pub fn read_pcd<R: Read>(reader: R) -> Result<PointCloud> {
    let r = BufReader::new(reader);
    let mut fields: Vec<String> = Vec::new();
    let mut types: Vec<String> = Vec::new();
    let mut declared: Option<usize> = None;
    let mut in_data = false;
    let mut points = Vec::new();
    let mut colors = Vec::new();
    let mut xyz = [None; 3];
    let mut rgb = None;
    for line in r.lines() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        if !in_data {
            let mut tok = t.split_whitespace();
            let key = tok.next().unwrap_or_default();
            let rest: Vec<String> = tok.map(str::to_owned).collect();
            match key {
                "FIELDS" => fields = rest,
                "TYPE" => types = rest,
                "POINTS" => {
                    declared = Some(
                        rest.first()
                            .and_then(|s| s.parse().ok())
                            .ok_or_else(|| Error::parse("bad POINTS line"))?,
                    )
                }
                "DATA" => {
                    if rest.first().map(String::as_str) != Some("ascii") {
                        return Err(Error::parse("only ascii PCD data is supported"));
                    }
                    let col = |name: &str| fields.iter().position(|f| f == name);
                    xyz = [col("x"), col("y"), col("z")];
                    if xyz.iter().any(Option::is_none) {
                        return Err(Error::parse("PCD lacks x/y/z fields"));
                    }
                    rgb = col("rgb").or_else(|| col("rgba"));
                    in_data = true;
                }
                _ => {}
            }
            continue;
        }
        let vals: Vec<&str> = t.split_whitespace().collect();
        if vals.len() < fields.len() {
            return Err(Error::parse(format!("short PCD row '{t}'")));
        }
        let num = |i: usize| -> Result<f64> {
            vals[i]
                .parse::<f64>()
                .map_err(|e| Error::parse(format!("bad PCD value '{}': {e}", vals[i])))
        };
        points.push(Point3::new(num(xyz[0].unwrap())?, num(xyz[1].unwrap())?, num(xyz[2].unwrap())?));
        if let Some(ci) = rgb {
            let packed = if types.get(ci).map(String::as_str) == Some("F") {
                (num(ci)? as f32).to_bits()
            } else {
                num(ci)? as u32
            };
            colors.push([(packed >> 16) as u8, (packed >> 8) as u8, packed as u8]);
        }
    }
    if !in_data {
        return Err(Error::parse("PCD has no DATA line"));
    }
    if let Some(n) = declared {
        if n != points.len() {
            return Err(Error::parse(format!("PCD declares {n} points but has {}", points.len())));
        }
    }
    let mut cloud = PointCloud::new(points)?;
    if rgb.is_some() {
        cloud = cloud.with_colors(colors)?;
    }
    Ok(cloud)
}

pub fn write_pcd<W: Write>(w: &mut W, cloud: &PointCloud) -> Result<()> {
    let color = cloud.colors();
    writeln!(w, "# .PCD v0.7 - Point Cloud Data file format")?;
    writeln!(w, "VERSION 0.7")?;
    if color.is_some() {
        writeln!(w, "FIELDS x y z rgb\nSIZE 8 8 8 4\nTYPE F F F U\nCOUNT 1 1 1 1")?;
    } else {
        writeln!(w, "FIELDS x y z\nSIZE 8 8 8\nTYPE F F F\nCOUNT 1 1 1")?;
    }
    writeln!(w, "WIDTH {}\nHEIGHT 1\nVIEWPOINT 0 0 0 1 0 0 0", cloud.len())?;
    writeln!(w, "POINTS {}\nDATA ascii", cloud.len())?;
    for (i, p) in cloud.points().iter().enumerate() {
        match color {
            Some(c) => {
                let [r, g, b] = c[i];
                let packed = (u32::from(r) << 16) | (u32::from(g) << 8) | u32::from(b);
                writeln!(w, "{} {} {} {packed}", p.x, p.y, p.z)?
            }
            None => writeln!(w, "{} {} {}", p.x, p.y, p.z)?,
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reads_pcl_style_float_rgb() {
        let packed = f32::from_bits(0x00FF8001);
        let text = format!(
            "VERSION .7\nFIELDS x y z rgb\nSIZE 4 4 4 4\nTYPE F F F F\nCOUNT 1 1 1 1\n\
             WIDTH 1\nHEIGHT 1\nVIEWPOINT 0 0 0 1 0 0 0\nPOINTS 1\nDATA ascii\n1 2 3 {packed:e}\n"
        );
        let c = read_pcd(text.as_bytes()).unwrap();
        assert_eq!(c.points(), &[Point3::new(1.0, 2.0, 3.0)]);
        assert_eq!(c.colors().unwrap(), &[[0xFF, 0x80, 0x01]]);
    }

    #[test]
    fn roundtrip() {
        let c = PointCloud::new(vec![Point3::new(0.5, -0.25, 1e-3), Point3::new(7.0, 8.0, 9.0)])
            .unwrap()
            .with_colors(vec![[1, 2, 3], [4, 5, 6]])
            .unwrap();
        let mut buf = Vec::new();
        write_pcd(&mut buf, &c).unwrap();
        assert_eq!(read_pcd(buf.as_slice()).unwrap(), c);
    }

    #[test]
    fn point_count_mismatch() {
        let text = "FIELDS x y z\nPOINTS 2\nDATA ascii\n1 2 3\n";
        assert!(read_pcd(text.as_bytes()).is_err());
        assert!(read_pcd("FIELDS x y z\nDATA binary\n".as_bytes()).is_err());
    }
}
