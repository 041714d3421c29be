use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::io::write_bytes;

use super::ShellMesh;

const HEADER_LEN: usize = 80;

/// Binary STL: 80-byte header carrying the provenance digest, little-endian float32 data.
pub fn stl_bytes(mesh: &ShellMesh) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 4 + 50 * mesh.triangles.len());
    let mut header = [b' '; HEADER_LEN];
    let tag = format!("sha256:{}", mesh.provenance);
    let n = tag.len().min(HEADER_LEN);
    header[..n].copy_from_slice(&tag.as_bytes()[..n]);
    out.extend_from_slice(&header);
    out.extend_from_slice(&(mesh.triangles.len() as u32).to_le_bytes());
    for t in 0..mesh.triangles.len() {
        let [a, b, c] = mesh.triangle(t);
        let n = (b - a).cross(&(c - a));
        let len = n.norm();
        let n = if len > 0.0 { n / len } else { n };
        for v in [n, a, b, c] {
            for k in 0..3 {
                out.extend_from_slice(&(v[k] as f32).to_le_bytes());
            }
        }
        out.extend_from_slice(&0u16.to_le_bytes());
    }
    out
}

pub fn export_stl(mesh: &ShellMesh, path: &Path) -> Result<()> {
    write_bytes(path, &stl_bytes(mesh))
}

pub fn export_obj(mesh: &ShellMesh, path: &Path) -> Result<()> {
    let mut buf = Vec::with_capacity(40 * (mesh.vertices.len() + mesh.triangles.len()));
    writeln!(buf, "# sha256:{}", mesh.provenance).expect("in-memory write");
    for v in &mesh.vertices {
        writeln!(buf, "v {} {} {}", v.x, v.y, v.z).expect("in-memory write");
    }
    for t in &mesh.triangles {
        writeln!(buf, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1).expect("in-memory write");
    }
    write_bytes(path, &buf)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StlFile {
    pub header: [u8; HEADER_LEN],
    pub triangles: Vec<[[f32; 3]; 3]>,
}

impl StlFile {
    /// Provenance digest stored in the header, if present.
    pub fn provenance(&self) -> Option<String> {
        let text = std::str::from_utf8(&self.header).ok()?;
        text.trim_end().strip_prefix("sha256:").map(str::to_string)
    }
}

pub fn read_stl(path: &Path) -> Result<StlFile> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    let bad = |m: &str| Error::Mesh(format!("{}: {m}", path.display()));
    if bytes.len() < HEADER_LEN + 4 {
        return Err(bad("truncated header"));
    }
    let mut header = [0u8; HEADER_LEN];
    header.copy_from_slice(&bytes[..HEADER_LEN]);
    let n = u32::from_le_bytes(
        bytes[HEADER_LEN..HEADER_LEN + 4]
            .try_into()
            .expect("4 bytes"),
    ) as usize;
    if bytes.len() != HEADER_LEN + 4 + 50 * n {
        return Err(bad("size does not match the triangle count"));
    }
    let f = |o: usize| f32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
    let triangles = (0..n)
        .map(|t| {
            let o = HEADER_LEN + 4 + 50 * t + 12;
            [0, 1, 2].map(|v| [0, 1, 2].map(|k| f(o + 12 * v + 4 * k)))
        })
        .collect();
    Ok(StlFile { header, triangles })
}
