use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{IsoError, Mesh};
use crate::geometry::Vec3;

/// ASCII OBJ with `v` and `f` records. Coordinates use the shortest
/// representation that parses back to the same value.
pub fn format_obj(mesh: &Mesh) -> String {
    let mut s = String::new();
    for v in &mesh.vertices {
        let _ = writeln!(s, "v {} {} {}", v.x, v.y, v.z);
    }
    for t in &mesh.triangles {
        let _ = writeln!(s, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1);
    }
    s
}

/// Reads `v` and `f` records (`f` entries may carry `/vt/vn` suffixes;
/// polygons are fan-triangulated). Other records are ignored.
pub fn parse_obj(text: &str) -> Result<Mesh, IsoError> {
    let mut mesh = Mesh::default();
    let mut faces: Vec<(usize, Vec<i64>)> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        let err = |d: String| IsoError::Obj { line: ln + 1, detail: d };
        let mut it = line.split_whitespace();
        match it.next() {
            Some("v") => {
                let c: Vec<f64> = it
                    .take(3)
                    .map(|x| x.parse::<f64>().map_err(|e| err(format!("{x}: {e}"))))
                    .collect::<Result<_, _>>()?;
                if c.len() != 3 {
                    return Err(err("vertex needs 3 coordinates".into()));
                }
                mesh.vertices.push(Vec3::new(c[0] as _, c[1] as _, c[2] as _));
            }
            Some("f") => {
                let idx: Vec<i64> = it
                    .map(|tok| {
                        let first = tok.split('/').next().unwrap_or("");
                        first.parse::<i64>().map_err(|e| err(format!("{tok}: {e}")))
                    })
                    .collect::<Result<_, _>>()?;
                if idx.len() < 3 {
                    return Err(err("face needs at least 3 vertices".into()));
                }
                faces.push((ln + 1, idx));
            }
            _ => {}
        }
    }
    let nv = mesh.vertices.len() as i64;
    for (line, idx) in faces {
        let resolve = |i: i64| -> Result<u32, IsoError> {
            let r = if i < 0 { nv + i } else { i - 1 };
            if r < 0 || r >= nv {
                return Err(IsoError::Obj { line, detail: format!("vertex index {i} out of range") });
            }
            Ok(r as u32)
        };
        let v: Vec<u32> = idx.into_iter().map(resolve).collect::<Result<_, _>>()?;
        for k in 1..v.len() - 1 {
            mesh.triangles.push([v[0], v[k], v[k + 1]]);
        }
    }
    Ok(mesh)
}

pub fn write_obj(mesh: &Mesh, path: &Path) -> Result<(), IsoError> {
    fs::write(path, format_obj(mesh)).map_err(|source| IsoError::Io { path: path.display().to_string(), source })
}

pub fn read_obj(path: &Path) -> Result<Mesh, IsoError> {
    let text = fs::read_to_string(path).map_err(|source| IsoError::Io { path: path.display().to_string(), source })?;
    parse_obj(&text)
}
