//! Plain-text PGM/PPM dumps for eyeballing maps.

use std::fmt::Write as _;
use std::path::Path;

use super::{GBuffer, RenderError};
use crate::Real;

fn write(path: &Path, text: String) -> Result<(), RenderError> {
    std::fs::write(path, text).map_err(|source| RenderError::Io { path: path.display().to_string(), source })
}

fn to_byte(x: Real) -> u8 {
    (x.clamp(0.0, 1.0) * 255.0).round() as u8
}

fn pgm(width: usize, height: usize, values: impl Iterator<Item = u8>) -> String {
    let mut s = format!("P2\n{width} {height}\n255\n");
    for (i, v) in values.enumerate() {
        let sep = if (i + 1) % width == 0 { '\n' } else { ' ' };
        let _ = write!(s, "{v}{sep}");
    }
    s
}

/// Depth as grey levels, near = white; background is black.
pub fn write_depth_pgm(g: &GBuffer, path: &Path) -> Result<(), RenderError> {
    let finite = g.depth.data().iter().filter(|d| d.is_finite());
    let lo = finite.clone().fold(Real::INFINITY, |a, &b| a.min(b));
    let hi = finite.fold(Real::NEG_INFINITY, |a, &b| a.max(b));
    let span = (hi - lo).max(1e-12);
    let bytes = g.depth.data().iter().map(|&d| if d.is_finite() { to_byte(1.0 - 0.8 * (d - lo) / span) } else { 0 });
    write(path, pgm(g.width, g.height, bytes))
}

pub fn write_mask_pgm(g: &GBuffer, path: &Path) -> Result<(), RenderError> {
    write(path, pgm(g.width, g.height, g.mask.data().iter().map(|&m| to_byte(m))))
}

/// Normals mapped by `(n + 1) / 2` to RGB.
pub fn write_normal_ppm(g: &GBuffer, path: &Path) -> Result<(), RenderError> {
    let n = g.pixels();
    let d = g.normal.data();
    let mut s = format!("P3\n{} {}\n255\n", g.width, g.height);
    for p in 0..n {
        let sep = if (p + 1) % g.width == 0 { '\n' } else { ' ' };
        let [r, gg, b] = [d[p], d[n + p], d[2 * n + p]].map(|c| if g.is_covered(p) { to_byte((c + 1.0) / 2.0) } else { 0 });
        let _ = write!(s, "{r} {gg} {b}{sep}");
    }
    write(path, s)
}
