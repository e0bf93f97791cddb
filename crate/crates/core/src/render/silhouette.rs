//! Soft silhouette band.
//!
//! Near a coverage change each pixel gets `clamp(0.5 + s * d / band, 0, 1)`,
//! where `d` is the screen distance from the pixel centre to the nearest
//! projected contour edge and `s` is +1 inside the coverage and -1 outside.
//! Contour edges are mesh edges between a front- and a back-facing triangle,
//! or boundary edges. Pixels away from any coverage change keep their hard
//! value, so the mask is exactly 0 or 1 there.

use std::collections::HashMap;

use super::raster::{coverage, Coverage};
use super::{check_band, check_resolution, RenderError, NEAR_PLANE};
use crate::geometry::{Camera, Vec3};
use crate::isoext::Mesh;
use crate::{Array, Real};

const CELL: usize = 4;

/// One band pixel's dependence on the two endpoints of its nearest contour.
#[derive(Clone, Copy, Debug)]
pub(crate) struct SoftTerm {
    pixel: usize,
    va: u32,
    vb: u32,
    ga: [Real; 2],
    gb: [Real; 2],
}

pub(crate) struct SoftMask {
    pub values: Vec<Real>,
    terms: Vec<SoftTerm>,
}

struct Segment {
    va: u32,
    vb: u32,
    a: [Real; 2],
    b: [Real; 2],
}

fn contour_segments(verts: &[Vec3], tris: &[[u32; 3]], cam: &Camera) -> Vec<Segment> {
    let eye = cam.center();
    let mut edges: HashMap<(u32, u32), (usize, usize)> = HashMap::new();
    for t in tris {
        let [a, b, c] = t.map(|i| verts[i as usize]);
        let n = (b - a).cross(c - a);
        let front = n.dot(eye - a) > 0.0;
        for k in 0..3 {
            let (i, j) = (t[k], t[(k + 1) % 3]);
            if i == j {
                continue;
            }
            let e = edges.entry((i.min(j), i.max(j))).or_insert((0, 0));
            if front {
                e.0 += 1;
            } else {
                e.1 += 1;
            }
        }
    }
    let mut keys: Vec<(u32, u32)> = edges
        .iter()
        .filter(|(_, &(f, b))| f + b == 1 || (f > 0 && b > 0))
        .map(|(&k, _)| k)
        .collect();
    keys.sort_unstable();
    keys.into_iter()
        .filter_map(|(i, j)| {
            let pa = cam.project(verts[i as usize]);
            let pb = cam.project(verts[j as usize]);
            (pa.depth > NEAR_PLANE && pb.depth > NEAR_PLANE).then_some(Segment { va: i, vb: j, a: pa.uv, b: pb.uv })
        })
        .collect()
}

/// Distance from `p` to segment `ab` with its gradients w.r.t. `a` and `b`.
fn segment_distance(p: [Real; 2], a: [Real; 2], b: [Real; 2]) -> (Real, [Real; 2], [Real; 2]) {
    let e = [b[0] - a[0], b[1] - a[1]];
    let len2 = e[0] * e[0] + e[1] * e[1];
    let t = if len2 > 0.0 {
        (((p[0] - a[0]) * e[0] + (p[1] - a[1]) * e[1]) / len2).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let q = [a[0] + t * e[0], a[1] + t * e[1]];
    let diff = [q[0] - p[0], q[1] - p[1]];
    let d = (diff[0] * diff[0] + diff[1] * diff[1]).sqrt();
    if d == 0.0 {
        return (0.0, [0.0; 2], [0.0; 2]);
    }
    let u = [diff[0] / d, diff[1] / d];
    // Moving an endpoint moves the closest point by the matching
    // interpolation weight; only the component along u changes d.
    (d, [u[0] * (1.0 - t), u[1] * (1.0 - t)], [u[0] * t, u[1] * t])
}

pub(crate) fn soft_mask_core(verts: &[Vec3], tris: &[[u32; 3]], cam: &Camera, cov: &Coverage, band: Real) -> SoftMask {
    let (w, h) = (cov.width, cov.height);
    let covered: Vec<bool> = cov.face.iter().map(|&f| f >= 0).collect();
    let mut values: Vec<Real> = covered.iter().map(|&c| if c { 1.0 } else { 0.0 }).collect();
    let reach = (band / 2.0).ceil() as usize;

    let segments = contour_segments(verts, tris, cam);
    let (gw, gh) = (w.div_ceil(CELL), h.div_ceil(CELL));
    let mut grid: Vec<Vec<usize>> = vec![Vec::new(); gw * gh];
    let pad = band / 2.0 + 1.0;
    for (s, seg) in segments.iter().enumerate() {
        let x0 = seg.a[0].min(seg.b[0]) - pad;
        let x1 = seg.a[0].max(seg.b[0]) + pad;
        let y0 = seg.a[1].min(seg.b[1]) - pad;
        let y1 = seg.a[1].max(seg.b[1]) + pad;
        if x1 < 0.0 || y1 < 0.0 || x0 > w as Real || y0 > h as Real {
            continue;
        }
        let cx0 = (x0.max(0.0) as usize / CELL).min(gw - 1);
        let cx1 = (x1.min(w as Real) as usize / CELL).min(gw - 1);
        let cy0 = (y0.max(0.0) as usize / CELL).min(gh - 1);
        let cy1 = (y1.min(h as Real) as usize / CELL).min(gh - 1);
        for cy in cy0..=cy1 {
            for cx in cx0..=cx1 {
                grid[cy * gw + cx].push(s);
            }
        }
    }

    let mut terms = Vec::new();
    for y in 0..h {
        for x in 0..w {
            let p = y * w + x;
            let c = covered[p];
            let near_change = (y.saturating_sub(reach)..=(y + reach).min(h - 1))
                .any(|yy| (x.saturating_sub(reach)..=(x + reach).min(w - 1)).any(|xx| covered[yy * w + xx] != c));
            if !near_change {
                continue;
            }
            let centre = [x as Real + 0.5, y as Real + 0.5];
            let mut best: Option<(Real, usize, [Real; 2], [Real; 2])> = None;
            for &s in &grid[(y / CELL) * gw + x / CELL] {
                let seg = &segments[s];
                let (d, ga, gb) = segment_distance(centre, seg.a, seg.b);
                if best.is_none_or(|b| d < b.0) {
                    best = Some((d, s, ga, gb));
                }
            }
            let Some((d, s, ga, gb)) = best else {
                continue;
            };
            let sign = if c { 1.0 } else { -1.0 };
            let raw = 0.5 + sign * d / band;
            values[p] = raw.clamp(0.0, 1.0);
            if raw > 0.0 && raw < 1.0 && d > 0.0 {
                let k = sign / band;
                let seg = &segments[s];
                terms.push(SoftTerm {
                    pixel: p,
                    va: seg.va,
                    vb: seg.vb,
                    ga: [k * ga[0], k * ga[1]],
                    gb: [k * gb[0], k * gb[1]],
                });
            }
        }
    }
    SoftMask { values, terms }
}

impl SoftMask {
    /// Chains screen-space endpoint gradients through the projection.
    pub(crate) fn backward(&self, g: &[Real], verts: &[Vec3], cam: &Camera) -> Vec<Real> {
        let mut grad = vec![0.0; verts.len() * 3];
        let k = &cam.intrinsics;
        let rt = cam.rotation.transpose();
        let mut push = |v: u32, g2: [Real; 2]| {
            let c = cam.to_camera(verts[v as usize]);
            let iz = 1.0 / c.z;
            // d(u, v) / d(camera point), transposed onto g2.
            let gc = Vec3::new(
                g2[0] * k.fx * iz,
                g2[1] * k.fy * iz,
                -(g2[0] * k.fx * c.x + g2[1] * k.fy * c.y) * iz * iz,
            );
            let gw = rt.mul_vec(gc);
            let i = v as usize * 3;
            grad[i] += gw.x;
            grad[i + 1] += gw.y;
            grad[i + 2] += gw.z;
        };
        for t in &self.terms {
            let gp = g[t.pixel];
            if gp == 0.0 {
                continue;
            }
            push(t.va, [t.ga[0] * gp, t.ga[1] * gp]);
            push(t.vb, [t.gb[0] * gp, t.gb[1] * gp]);
        }
        grad
    }
}

/// Hard coverage blended with the signed silhouette ramp, `[H, W]`.
pub fn soft_mask(mesh: &Mesh, camera: &Camera, resolution: usize, band: Real) -> Result<Array, RenderError> {
    check_resolution(resolution)?;
    check_band(band)?;
    let cam = camera.with_resolution(resolution, resolution);
    let cov = coverage(&mesh.vertices, &mesh.triangles, &cam);
    let soft = soft_mask_core(&mesh.vertices, &mesh.triangles, &cam, &cov, band);
    Ok(Array::new(vec![resolution, resolution], soft.values).expect("mask shape"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Intrinsics;

    fn camera(res: usize) -> Camera {
        let k = Intrinsics::from_fov(res, res, 50.0);
        Camera::look_at(k, Vec3::new(0.0, 0.0, -2.5), Vec3::ZERO, Vec3::new(0.0, 1.0, 0.0)).unwrap()
    }

    /// Quad whose right edge projects exactly onto the pixel-centre column
    /// `x = 16.5` of a 32x32 image.
    fn half_plane_quad(cam: &Camera) -> Mesh {
        let corners = [(-100.0, -100.0), (16.5, -100.0), (16.5, 132.0), (-100.0, 132.0)];
        Mesh {
            vertices: corners.iter().map(|&(u, v)| cam.unproject(u, v, 2.5)).collect(),
            triangles: vec![[0, 1, 2], [0, 2, 3]],
        }
    }

    #[test]
    fn silhouette_pixel_is_half() {
        let cam = camera(32);
        let mesh = half_plane_quad(&cam);
        let m = soft_mask(&mesh, &cam, 32, 2.0).unwrap();
        let d = m.data();
        for y in 2..30 {
            let v = d[y * 32 + 16];
            assert!((v - 0.5).abs() <= 0.05, "row {y}: {v}");
            // One pixel to either side sits on the ends of the ramp.
            assert!((d[y * 32 + 15] - 1.0).abs() < 1e-9);
            assert!(d[y * 32 + 17].abs() < 1e-9);
            // Far inside and far outside.
            assert_eq!(d[y * 32 + 5], 1.0);
            assert_eq!(d[y * 32 + 28], 0.0);
        }
    }

    #[test]
    fn wider_band_ramps_linearly() {
        let cam = camera(32);
        let mesh = half_plane_quad(&cam);
        let m = soft_mask(&mesh, &cam, 32, 4.0).unwrap();
        let row = &m.data()[16 * 32..17 * 32];
        for (x, expected) in [(14, 1.0), (15, 0.75), (16, 0.5), (17, 0.25), (18, 0.0)] {
            assert!((row[x] - expected).abs() < 1e-6, "x {x}: {}", row[x]);
        }
    }

    #[test]
    fn segment_distance_gradients() {
        let (p, a, b) = ([0.3, 1.1], [-1.0, 0.2], [2.0, -0.4]);
        let (d, ga, gb) = segment_distance(p, a, b);
        let h = 1e-6;
        for k in 0..2 {
            let mut ap = a;
            ap[k] += h;
            let mut am = a;
            am[k] -= h;
            let fd = (segment_distance(p, ap, b).0 - segment_distance(p, am, b).0) / (2.0 * h);
            assert!((fd - ga[k]).abs() < 1e-6);
            let mut bp = b;
            bp[k] += h;
            let mut bm = b;
            bm[k] -= h;
            let fd = (segment_distance(p, a, bp).0 - segment_distance(p, a, bm).0) / (2.0 * h);
            assert!((fd - gb[k]).abs() < 1e-6);
        }
        assert!(d > 0.0);
    }
}
