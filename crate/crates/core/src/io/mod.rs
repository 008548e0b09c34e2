//! Point-cloud and mesh file formats plus small JSON helpers.

mod pcd;
mod ply;
mod stl;

pub use pcd::{read_pcd, write_pcd};
pub use ply::{read_ply_cloud, read_ply_mesh, write_ply_cloud, write_ply_mesh, PlyFormat};
pub use stl::{read_stl, write_stl_ascii, write_stl_binary};

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::geom::{PointCloud, TriangleMesh};

fn extension(path: &Path) -> String {
    path.extension()
        .and_then(|e| e.to_str())
        .unwrap_or_default()
        .to_ascii_lowercase()
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingArtifact(path.display().to_string()),
        _ => Error::Io(e),
    })
}

/// Reads a point cloud from a `.ply` or `.pcd` file.
pub fn read_cloud(path: &Path) -> Result<PointCloud> {
    match extension(path).as_str() {
        "ply" => read_ply_cloud(open(path)?),
        "pcd" => read_pcd(open(path)?),
        other => Err(Error::parse(format!("unsupported point cloud extension '{other}'"))),
    }
}

/// Writes a point cloud; PLY output is binary little-endian.
pub fn write_cloud(path: &Path, cloud: &PointCloud) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    match extension(path).as_str() {
        "ply" => write_ply_cloud(&mut w, cloud, PlyFormat::BinaryLittleEndian)?,
        "pcd" => write_pcd(&mut w, cloud)?,
        other => return Err(Error::parse(format!("unsupported point cloud extension '{other}'"))),
    }
    w.flush()?;
    Ok(())
}

/// Reads a triangle mesh from a `.ply` or `.stl` file.
pub fn read_mesh(path: &Path) -> Result<TriangleMesh> {
    match extension(path).as_str() {
        "ply" => read_ply_mesh(open(path)?),
        "stl" => read_stl(open(path)?),
        other => Err(Error::parse(format!("unsupported mesh extension '{other}'"))),
    }
}

pub fn write_mesh(path: &Path, mesh: &TriangleMesh) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    match extension(path).as_str() {
        "ply" => write_ply_mesh(&mut w, mesh, PlyFormat::BinaryLittleEndian)?,
        "stl" => write_stl_binary(&mut w, mesh)?,
        other => return Err(Error::parse(format!("unsupported mesh extension '{other}'"))),
    }
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_reader(std::io::BufReader::new(open(path)?))?)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}
