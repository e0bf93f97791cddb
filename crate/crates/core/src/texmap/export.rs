//! OBJ + MTL + PNG export and import.
//!
//! The PNG is 8-bit RGBA; alpha 255 marks valid texels. Texture coordinates
//! are written per triangle corner, so `vt` index `3t + k + 1` belongs to
//! corner `k` of triangle `t`.

use std::fmt::Write as _;
use std::fs;
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use super::{Atlas, TexError, Texture, TexturedMesh};
use crate::geometry::Vec3;
use crate::isoext::Mesh;
use crate::Real;

const MATERIAL: &str = "textured";

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> TexError + '_ {
    move |source| TexError::Io { path: path.display().to_string(), source }
}

fn sibling(obj: &Path, ext: &str) -> PathBuf {
    obj.with_extension(ext)
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Writes `path` (OBJ) plus `.mtl` and `.png` files next to it.
pub fn export_obj(tm: &TexturedMesh, path: &Path) -> Result<(), TexError> {
    let (mtl, png) = (sibling(path, "mtl"), sibling(path, "png"));
    let mut obj = String::new();
    let _ = writeln!(obj, "mtllib {}", file_name(&mtl));
    for v in &tm.mesh.vertices {
        let _ = writeln!(obj, "v {} {} {}", v.x, v.y, v.z);
    }
    for t in 0..tm.mesh.triangles.len() {
        for [u, v] in tm.atlas.uv(t) {
            let _ = writeln!(obj, "vt {u} {v}");
        }
    }
    let _ = writeln!(obj, "usemtl {MATERIAL}");
    for (t, f) in tm.mesh.triangles.iter().enumerate() {
        let _ = writeln!(obj, "f {}/{} {}/{} {}/{}", f[0] + 1, 3 * t + 1, f[1] + 1, 3 * t + 2, f[2] + 1, 3 * t + 3);
    }
    fs::write(path, obj).map_err(io_err(path))?;
    let m = format!("newmtl {MATERIAL}\nKa 1 1 1\nKd 1 1 1\nKs 0 0 0\nillum 1\nmap_Kd {}\n", file_name(&png));
    fs::write(&mtl, m).map_err(io_err(&mtl))?;
    write_png(&tm.texture, &png)
}

fn png_err(path: &Path, e: impl std::fmt::Display) -> TexError {
    TexError::Png { path: path.display().to_string(), detail: e.to_string() }
}

fn write_png(tex: &Texture, path: &Path) -> Result<(), TexError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let n = tex.size as u32;
    let mut enc = png::Encoder::new(BufWriter::new(file), n, n);
    enc.set_color(png::ColorType::Rgba);
    enc.set_depth(png::BitDepth::Eight);
    let mut w = enc.write_header().map_err(|e| png_err(path, e))?;
    let q = |c: Real| (c.clamp(0.0, 1.0) * 255.0).round() as u8;
    let data: Vec<u8> = tex
        .rgb
        .iter()
        .zip(&tex.valid)
        .flat_map(|(c, &v)| [q(c[0]), q(c[1]), q(c[2]), if v { 255 } else { 0 }])
        .collect();
    w.write_image_data(&data).map_err(|e| png_err(path, e))?;
    w.finish().map_err(|e| png_err(path, e))
}

fn read_png(path: &Path) -> Result<Texture, TexError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut reader = png::Decoder::new(BufReader::new(file)).read_info().map_err(|e| png_err(path, e))?;
    let size = reader.output_buffer_size().ok_or_else(|| png_err(path, "image too large"))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(|e| png_err(path, e))?;
    if info.color_type != png::ColorType::Rgba || info.bit_depth != png::BitDepth::Eight || info.width != info.height {
        return Err(png_err(path, format!("expected square 8-bit RGBA, got {:?} {:?} {}x{}", info.color_type, info.bit_depth, info.width, info.height)));
    }
    let n = info.width as usize;
    let px = &buf[..n * n * 4];
    Ok(Texture {
        size: n,
        rgb: px.chunks_exact(4).map(|p| [p[0], p[1], p[2]].map(|b| b as Real / 255.0)).collect(),
        valid: px.chunks_exact(4).map(|p| p[3] > 0).collect(),
    })
}

/// Reads a textured mesh written by [`export_obj`].
pub fn import_obj(path: &Path) -> Result<TexturedMesh, TexError> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let bad = |line: usize, detail: String| TexError::Parse { path: path.display().to_string(), line, detail };
    let mut vertices = Vec::new();
    let mut vts: Vec<[Real; 2]> = Vec::new();
    let mut faces: Vec<[(u32, usize); 3]> = Vec::new();
    let mut mtllib = None;
    for (ln, line) in text.lines().enumerate() {
        let mut it = line.split_whitespace();
        let num = |s: Option<&str>| -> Result<Real, TexError> {
            s.and_then(|s| s.parse().ok()).ok_or_else(|| bad(ln + 1, format!("bad number in `{line}`")))
        };
        match it.next() {
            Some("v") => vertices.push(Vec3::new(num(it.next())?, num(it.next())?, num(it.next())?)),
            Some("vt") => vts.push([num(it.next())?, num(it.next())?]),
            Some("mtllib") => mtllib = it.next().map(str::to_owned),
            Some("f") => {
                let mut f = [(0u32, 0usize); 3];
                for slot in f.iter_mut() {
                    let tok = it.next().ok_or_else(|| bad(ln + 1, "face needs three corners".into()))?;
                    let mut parts = tok.split('/');
                    let v: u32 = parts.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad(ln + 1, format!("bad corner `{tok}`")))?;
                    let t: usize = parts.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad(ln + 1, format!("corner `{tok}` lacks a vt index")))?;
                    if v == 0 || v as usize > vertices.len() || t == 0 || t > vts.len() {
                        return Err(bad(ln + 1, format!("corner `{tok}` out of range")));
                    }
                    *slot = (v - 1, t - 1);
                }
                faces.push(f);
            }
            _ => {}
        }
    }
    let mtl_name = mtllib.ok_or_else(|| bad(0, "no mtllib statement".into()))?;
    let mtl_path = path.with_file_name(&mtl_name);
    let mtl = fs::read_to_string(&mtl_path).map_err(io_err(&mtl_path))?;
    let png_name = mtl
        .lines()
        .find_map(|l| l.trim().strip_prefix("map_Kd").map(|s| s.trim().to_owned()))
        .ok_or_else(|| TexError::Parse { path: mtl_path.display().to_string(), line: 0, detail: "no map_Kd".into() })?;
    let texture = read_png(&path.with_file_name(png_name))?;
    let s = texture.size as Real;
    // Chart corners sit on integer texel coordinates; snap away the
    // rounding of the [0, 1] representation.
    let snap = |x: Real| if (x - x.round()).abs() < 1e-6 { x.round() } else { x };
    let corners = faces.iter().map(|f| f.map(|(_, t)| [snap(vts[t][0] * s), snap((1.0 - vts[t][1]) * s)])).collect();
    let mesh = Mesh { vertices, triangles: faces.iter().map(|f| f.map(|(v, _)| v)).collect() };
    let atlas = Atlas::from_corners(&mesh, texture.size, corners);
    Ok(TexturedMesh { mesh, atlas, texture })
}
