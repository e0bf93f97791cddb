//! Sphere tracing of analytic SDFs for ground-truth maps.

use super::{check_resolution, GBuffer, RenderError};
use crate::exec;
use crate::geometry::{Camera, ShapeSdf, Vec3};
use crate::Real;

pub const MAX_TRACE_STEPS: usize = 256;
const HIT_EPS: Real = 1e-7;
const NORMAL_H: Real = 1e-4;

fn central_normal(shape: &ShapeSdf, p: Vec3) -> Vec3 {
    let dx = Vec3::new(NORMAL_H, 0.0, 0.0);
    let dy = Vec3::new(0.0, NORMAL_H, 0.0);
    let dz = Vec3::new(0.0, 0.0, NORMAL_H);
    Vec3::new(
        shape.eval(p + dx) - shape.eval(p - dx),
        shape.eval(p + dy) - shape.eval(p - dy),
        shape.eval(p + dz) - shape.eval(p - dz),
    )
    .normalized()
}

/// First surface hit along `origin + t * dir` (unit `dir`) inside the unit
/// sphere, or `None` on a miss or when the march does not converge.
fn trace(shape: &ShapeSdf, origin: Vec3, dir: Vec3) -> Option<Vec3> {
    let b = origin.dot(dir);
    let disc = b * b - (origin.norm_sq() - 1.0);
    if disc < 0.0 {
        return None;
    }
    let root = disc.sqrt();
    let t_exit = -b + root;
    let mut t = (-b - root).max(0.0);
    for _ in 0..MAX_TRACE_STEPS {
        let p = origin + dir * t;
        let s = shape.eval(p);
        if s < HIT_EPS {
            return Some(p);
        }
        t += s;
        if t > t_exit {
            return None;
        }
    }
    None
}

/// Ground-truth G-buffer of `shape` seen from `camera`.
///
/// Normals come from central differences of the SDF and are flipped to face
/// the camera, like the rasterizer's. Hit pixels get face id 0 and zero
/// barycentrics; the mask is exactly 0 or 1.
pub fn render_gt(shape: &ShapeSdf, camera: &Camera, resolution: usize) -> Result<GBuffer, RenderError> {
    check_resolution(resolution)?;
    let cam = camera.with_resolution(resolution, resolution);
    let eye = cam.center();
    let rows = exec::map_indexed(resolution, |y| {
        (0..resolution)
            .map(|x| {
                let dir = cam.ray_world(x as Real + 0.5, y as Real + 0.5);
                trace(shape, eye, dir).map(|p| {
                    let mut n = central_normal(shape, p);
                    if n.dot(dir) > 0.0 {
                        n = -n;
                    }
                    (cam.to_camera(p).z, n)
                })
            })
            .collect::<Vec<_>>()
    });
    let mut g = GBuffer::background(resolution, resolution);
    let n = g.pixels();
    for (p, hit) in rows.into_iter().flatten().enumerate() {
        let Some((z, nn)) = hit else { continue };
        g.depth.data_mut()[p] = z;
        g.mask.data_mut()[p] = 1.0;
        g.faceid[p] = 0;
        let nd = g.normal.data_mut();
        nd[p] = nn.x;
        nd[n + p] = nn.y;
        nd[2 * n + p] = nn.z;
    }
    Ok(g)
}
