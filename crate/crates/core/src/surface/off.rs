//! ASCII OFF reading and writing.
//!
//! Accepted: an `OFF` header line (optionally with the counts on the same line),
//! `#` comments, blank lines, polygon faces (fan-triangulated). Written: triangles
//! only, shortest round-trip float formatting, so save→load is lossless.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;

use super::mesh::SurfaceMesh;
use super::SurfaceError;

fn parse_err(line: usize, message: impl Into<String>) -> SurfaceError {
    SurfaceError::Parse {
        line,
        message: message.into(),
    }
}

/// Parse OFF text into raw vertices and triangles, without validation.
pub fn parse_off(text: &str) -> Result<(Vec<Vector3<f64>>, Vec<[usize; 3]>), SurfaceError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.split('#').next().unwrap_or("").trim()))
        .filter(|(_, l)| !l.is_empty());

    let (hline, header) = lines.next().ok_or_else(|| parse_err(1, "empty file"))?;
    let mut head = header.split_whitespace();
    if head.next() != Some("OFF") {
        return Err(parse_err(hline, "missing OFF header"));
    }
    let rest: Vec<&str> = head.collect();
    let (cline, counts) = if rest.is_empty() {
        let (n, l) = lines
            .next()
            .ok_or_else(|| parse_err(hline + 1, "missing counts line"))?;
        (n, l.split_whitespace().collect::<Vec<_>>())
    } else {
        (hline, rest)
    };
    if counts.len() < 2 {
        return Err(parse_err(cline, "counts line needs vertex and face counts"));
    }
    let count = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| parse_err(cline, format!("bad count `{s}`")))
    };
    let nv = count(counts[0])?;
    let nf = count(counts[1])?;

    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let (n, l) = lines
            .next()
            .ok_or_else(|| parse_err(0, format!("expected {nv} vertices")))?;
        let xyz: Vec<f64> = l
            .split_whitespace()
            .take(3)
            .map(|s| s.parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|e| parse_err(n, format!("bad vertex: {e}")))?;
        if xyz.len() != 3 {
            return Err(parse_err(n, "vertex needs three coordinates"));
        }
        vertices.push(Vector3::new(xyz[0], xyz[1], xyz[2]));
    }

    let mut triangles = Vec::with_capacity(nf);
    for _ in 0..nf {
        let (n, l) = lines
            .next()
            .ok_or_else(|| parse_err(0, format!("expected {nf} faces")))?;
        let mut it = l.split_whitespace();
        let k: usize = it
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| parse_err(n, "bad face vertex count"))?;
        if k < 3 {
            return Err(parse_err(n, "face needs at least three vertices"));
        }
        let idx: Vec<usize> = it
            .take(k)
            .map(|s| s.parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|e| parse_err(n, format!("bad face index: {e}")))?;
        if idx.len() != k {
            return Err(parse_err(n, format!("face lists {} of {k} indices", idx.len())));
        }
        for i in 1..k - 1 {
            triangles.push([idx[0], idx[i], idx[i + 1]]);
        }
    }
    if let Some((n, _)) = lines.next() {
        return Err(parse_err(n, "trailing data after faces"));
    }
    Ok((vertices, triangles))
}

/// OFF text for a mesh (triangles in their stored, outward winding).
pub fn to_off_string(mesh: &SurfaceMesh) -> String {
    let mut out = String::with_capacity(mesh.vertices().len() * 48 + mesh.triangles().len() * 24);
    out.push_str("OFF\n");
    let _ = writeln!(out, "{} {} 0", mesh.vertices().len(), mesh.triangles().len());
    for v in mesh.vertices() {
        let _ = writeln!(out, "{:?} {:?} {:?}", v.x, v.y, v.z);
    }
    for t in mesh.triangles() {
        let _ = writeln!(out, "3 {} {} {}", t[0], t[1], t[2]);
    }
    out
}

impl SurfaceMesh {
    pub fn from_off_str(text: &str) -> Result<Self, SurfaceError> {
        let (v, t) = parse_off(text)?;
        Self::new(v, t)
    }

    pub fn to_off_string(&self) -> String {
        to_off_string(self)
    }
}

/// Read and validate an OFF mesh file.
pub fn load_mesh(path: impl AsRef<Path>) -> Result<SurfaceMesh, SurfaceError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|e| SurfaceError::Io(format!("{}: {e}", path.display())))?;
    SurfaceMesh::from_off_str(&text)
}

pub fn save_mesh(mesh: &SurfaceMesh, path: impl AsRef<Path>) -> Result<(), SurfaceError> {
    let path = path.as_ref();
    std::fs::write(path, to_off_string(mesh))
        .map_err(|e| SurfaceError::Io(format!("{}: {e}", path.display())))
}
