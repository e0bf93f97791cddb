use std::sync::Arc;

use super::silhouette::{soft_mask_core, SoftMask};
use super::{check_band, check_resolution, GBuffer, RenderError, BACKGROUND_FACE, DEFAULT_BAND, NEAR_PLANE};
use crate::exec;
use crate::geometry::{Camera, Vec3};
use crate::isoext::Mesh;
use crate::{Array, Real, Tape, Var};

const BAND_ROWS: usize = 8;

#[derive(Clone, Copy)]
struct Pixel {
    face: i32,
    depth: Real,
    bary: [Real; 3],
}

/// Screen-space setup of one front-of-camera triangle.
struct ScreenTri {
    face: usize,
    s: [[Real; 2]; 3],
    inv_z: [Real; 3],
    area: Real,
    x0: usize,
    x1: usize,
    y0: usize,
    y1: usize,
}

/// Hard coverage: face id, depth and perspective-correct barycentrics.
pub(crate) struct Coverage {
    pub width: usize,
    pub height: usize,
    pub face: Vec<i32>,
    pub depth: Vec<Real>,
    pub bary: Vec<[Real; 3]>,
}

fn edge(a: [Real; 2], b: [Real; 2], p: [Real; 2]) -> Real {
    (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
}

fn setup(verts: &[Vec3], tris: &[[u32; 3]], cam: &Camera) -> Vec<ScreenTri> {
    let (w, h) = (cam.width(), cam.height());
    let proj: Vec<(Vec3, [Real; 2])> = verts
        .iter()
        .map(|&v| {
            let p = cam.project(v);
            (cam.to_camera(v), p.uv)
        })
        .collect();
    let mut out = Vec::new();
    for (f, t) in tris.iter().enumerate() {
        let c = t.map(|i| proj[i as usize]);
        if c.iter().any(|(v, _)| !(v.z > NEAR_PLANE)) {
            continue;
        }
        let s = c.map(|(_, uv)| uv);
        let area = edge(s[0], s[1], s[2]);
        if area == 0.0 || !area.is_finite() {
            continue;
        }
        let min_x = s.iter().map(|p| p[0]).fold(Real::INFINITY, Real::min);
        let max_x = s.iter().map(|p| p[0]).fold(Real::NEG_INFINITY, Real::max);
        let min_y = s.iter().map(|p| p[1]).fold(Real::INFINITY, Real::min);
        let max_y = s.iter().map(|p| p[1]).fold(Real::NEG_INFINITY, Real::max);
        // Pixel centres x + 0.5 inside [min, max].
        let lo = |m: Real| (m - 0.5).ceil().max(0.0) as usize;
        let hi = |m: Real, n: usize| {
            let v = (m - 0.5).floor();
            if v < 0.0 {
                None
            } else {
                Some((v as usize).min(n - 1))
            }
        };
        let (Some(x1), Some(y1)) = (hi(max_x, w), hi(max_y, h)) else {
            continue;
        };
        let (x0, y0) = (lo(min_x), lo(min_y));
        if x0 > x1 || y0 > y1 {
            continue;
        }
        out.push(ScreenTri {
            face: f,
            s,
            inv_z: c.map(|(v, _)| 1.0 / v.z),
            area,
            x0,
            x1,
            y0,
            y1,
        });
    }
    out
}

pub(crate) fn coverage(verts: &[Vec3], tris: &[[u32; 3]], cam: &Camera) -> Coverage {
    let (w, h) = (cam.width(), cam.height());
    let screen = setup(verts, tris, cam);
    let empty = Pixel { face: BACKGROUND_FACE, depth: Real::INFINITY, bary: [0.0; 3] };
    let mut pixels = vec![empty; w * h];
    exec::for_each_chunk_mut(&mut pixels, BAND_ROWS * w, |band, chunk| {
        let row0 = band * BAND_ROWS;
        let row1 = row0 + chunk.len() / w;
        for t in &screen {
            if t.y1 < row0 || t.y0 >= row1 {
                continue;
            }
            let sign = t.area.signum();
            let inv_area = 1.0 / t.area.abs();
            for y in t.y0.max(row0)..=t.y1.min(row1 - 1) {
                let py = y as Real + 0.5;
                for x in t.x0..=t.x1 {
                    let p = [x as Real + 0.5, py];
                    let l0 = sign * edge(t.s[1], t.s[2], p);
                    let l1 = sign * edge(t.s[2], t.s[0], p);
                    let l2 = sign * edge(t.s[0], t.s[1], p);
                    if l0 < 0.0 || l1 < 0.0 || l2 < 0.0 {
                        continue;
                    }
                    let lam = [l0 * inv_area, l1 * inv_area, l2 * inv_area];
                    let pz = [lam[0] * t.inv_z[0], lam[1] * t.inv_z[1], lam[2] * t.inv_z[2]];
                    let depth = 1.0 / (pz[0] + pz[1] + pz[2]);
                    let px = &mut chunk[(y - row0) * w + x];
                    // Triangles arrive in face order, so strict comparison
                    // keeps the lowest face id on exact ties.
                    if depth < px.depth {
                        *px = Pixel {
                            face: t.face as i32,
                            depth,
                            bary: [pz[0] * depth, pz[1] * depth, pz[2] * depth],
                        };
                    }
                }
            }
        }
    });
    Coverage {
        width: w,
        height: h,
        face: pixels.iter().map(|p| p.face).collect(),
        depth: pixels.iter().map(|p| p.depth).collect(),
        bary: pixels.iter().map(|p| p.bary).collect(),
    }
}

/// Unit world-space face normals oriented toward the camera centre, plus the
/// orientation sign and the unnormalised normal length.
fn facing_normals(verts: &[Vec3], tris: &[[u32; 3]], cam: &Camera) -> Vec<(Vec3, Real, Real)> {
    let eye = cam.center();
    tris.iter()
        .map(|t| {
            let [a, b, c] = t.map(|i| verts[i as usize]);
            let n = (b - a).cross(c - a);
            let len = n.norm();
            let s = if n.dot(eye - a) >= 0.0 { 1.0 } else { -1.0 };
            if len == 0.0 {
                (Vec3::ZERO, s, 0.0)
            } else {
                (n * (s / len), s, len)
            }
        })
        .collect()
}

fn validate(verts: &[Vec3], tris: &[[u32; 3]]) -> Result<(), RenderError> {
    for (tri, t) in tris.iter().enumerate() {
        for &vertex in t {
            if vertex as usize >= verts.len() {
                return Err(RenderError::Index { tri, vertex, count: verts.len() });
            }
        }
    }
    Ok(())
}

fn assemble(cov: &Coverage, normals: &[(Vec3, Real, Real)], soft: &SoftMask) -> GBuffer {
    let (w, h) = (cov.width, cov.height);
    let n = w * h;
    let mut g = GBuffer::background(w, h);
    g.depth = Array::new(vec![h, w], cov.depth.clone()).expect("depth shape");
    g.mask = Array::new(vec![h, w], soft.values.clone()).expect("mask shape");
    g.faceid = cov.face.clone();
    let nd = g.normal.data_mut();
    for p in 0..n {
        if cov.face[p] >= 0 {
            let (nn, _, _) = normals[cov.face[p] as usize];
            nd[p] = nn.x;
            nd[n + p] = nn.y;
            nd[2 * n + p] = nn.z;
        }
    }
    let bd = g.barycentric.data_mut();
    for p in 0..n {
        for k in 0..3 {
            bd[k * n + p] = cov.bary[p][k];
        }
    }
    g
}

/// Rasterizes `mesh` into a `resolution x resolution` G-buffer with the
/// default silhouette band.
pub fn rasterize(mesh: &Mesh, camera: &Camera, resolution: usize) -> Result<GBuffer, RenderError> {
    rasterize_with_band(mesh, camera, resolution, DEFAULT_BAND)
}

pub fn rasterize_with_band(
    mesh: &Mesh,
    camera: &Camera,
    resolution: usize,
    band: Real,
) -> Result<GBuffer, RenderError> {
    check_resolution(resolution)?;
    check_band(band)?;
    validate(&mesh.vertices, &mesh.triangles)?;
    let cam = camera.with_resolution(resolution, resolution);
    let cov = coverage(&mesh.vertices, &mesh.triangles, &cam);
    let normals = facing_normals(&mesh.vertices, &mesh.triangles, &cam);
    let soft = soft_mask_core(&mesh.vertices, &mesh.triangles, &cam, &cov, band);
    Ok(assemble(&cov, &normals, &soft))
}

/// Differentiable render: depth `[H, W]`, normal `[3, H, W]` and mask
/// `[H, W]` nodes, each depending on the vertex node, plus the plain buffer.
pub struct Rendered {
    pub depth: Var,
    pub normal: Var,
    pub mask: Var,
    pub gbuffer: GBuffer,
}

/// Records depth, normal and mask rendering of the `[V, 3]` vertex node.
///
/// Depth gradients follow from intersecting the pixel ray with the triangle
/// plane; normal gradients from the normalised face normal; mask gradients
/// from the silhouette ramp. Background pixels pass no depth or normal
/// gradient.
pub fn render_op(
    tape: &mut Tape,
    vertices: Var,
    triangles: &[[u32; 3]],
    camera: &Camera,
    resolution: usize,
    band: Real,
) -> Result<Rendered, RenderError> {
    check_resolution(resolution)?;
    check_band(band)?;
    let shape = tape.shape(vertices).to_vec();
    if shape.len() != 2 || shape[1] != 3 {
        return Err(RenderError::VertexShape(shape));
    }
    let nv = shape[0];
    let verts: Arc<Vec<Vec3>> = Arc::new(tape.value(vertices).data().chunks_exact(3).map(Vec3::from_slice).collect());
    validate(&verts, triangles)?;
    let tris: Arc<Vec<[u32; 3]>> = Arc::new(triangles.to_vec());
    let cam = camera.with_resolution(resolution, resolution);
    let cov = Arc::new(coverage(&verts, &tris, &cam));
    let normals = Arc::new(facing_normals(&verts, &tris, &cam));
    let soft = Arc::new(soft_mask_core(&verts, &tris, &cam, &cov, band));
    let gbuffer = assemble(&cov, &normals, &soft);
    let (w, h) = (resolution, resolution);

    let depth = {
        let (verts, tris, cov) = (verts.clone(), tris.clone(), cov.clone());
        tape.custom(&[vertices], gbuffer.depth.clone(), move |g| {
            vec![Some(depth_backward(g, &verts, &tris, &cov, &cam, nv))]
        })
    };
    let normal = {
        let (verts, tris, cov, normals) = (verts.clone(), tris.clone(), cov.clone(), normals.clone());
        tape.custom(&[vertices], gbuffer.normal.clone(), move |g| {
            vec![Some(normal_backward(g, &verts, &tris, &cov, &normals, nv))]
        })
    };
    let mask = {
        let soft = soft.clone();
        tape.custom(&[vertices], gbuffer.mask.clone(), move |g| vec![Some(soft.backward(g, &verts, &cam))])
    };
    debug_assert_eq!(gbuffer.pixels(), w * h);
    Ok(Rendered { depth, normal, mask, gbuffer })
}

fn add_vertex_grad(grad: &mut [Real], v: u32, g: Vec3) {
    let i = v as usize * 3;
    grad[i] += g.x;
    grad[i + 1] += g.y;
    grad[i + 2] += g.z;
}

fn depth_backward(g: &[Real], verts: &[Vec3], tris: &[[u32; 3]], cov: &Coverage, cam: &Camera, nv: usize) -> Vec<Real> {
    let mut grad = vec![0.0; nv * 3];
    let rt = cam.rotation.transpose();
    for (p, &gp) in g.iter().enumerate() {
        let f = cov.face[p];
        if f < 0 || gp == 0.0 {
            continue;
        }
        let t = tris[f as usize];
        let [a, b, c] = t.map(|i| cam.to_camera(verts[i as usize]));
        let (x, y) = (p % cov.width, p / cov.width);
        let r = cam.ray_camera(x as Real + 0.5, y as Real + 0.5);
        let e1 = b - a;
        let e2 = c - a;
        let n = e1.cross(e2);
        let d = n.dot(r);
        if d == 0.0 {
            continue;
        }
        // z = (n . a) / (n . r); q is the offset from the hit point to a.
        let z = n.dot(a) / d;
        let q = a - r * z;
        let db = e2.cross(q) / d;
        let dc = q.cross(e1) / d;
        let da = n / d - db - dc;
        add_vertex_grad(&mut grad, t[0], rt.mul_vec(da * gp));
        add_vertex_grad(&mut grad, t[1], rt.mul_vec(db * gp));
        add_vertex_grad(&mut grad, t[2], rt.mul_vec(dc * gp));
    }
    grad
}

fn normal_backward(
    g: &[Real],
    verts: &[Vec3],
    tris: &[[u32; 3]],
    cov: &Coverage,
    normals: &[(Vec3, Real, Real)],
    nv: usize,
) -> Vec<Real> {
    let n = cov.width * cov.height;
    let mut per_face = vec![Vec3::ZERO; tris.len()];
    for p in 0..n {
        let f = cov.face[p];
        if f >= 0 {
            per_face[f as usize] = per_face[f as usize] + Vec3::new(g[p], g[n + p], g[2 * n + p]);
        }
    }
    let mut grad = vec![0.0; nv * 3];
    for (f, &gf) in per_face.iter().enumerate() {
        let (nn, s, len) = normals[f];
        if len == 0.0 || gf == Vec3::ZERO {
            continue;
        }
        // Output is s * N / |N| with N = (b - a) x (c - a).
        let g_n = (gf - nn * nn.dot(gf)) * (s / len);
        let t = tris[f];
        let [a, b, c] = t.map(|i| verts[i as usize]);
        let (e1, e2) = (b - a, c - a);
        let gb = e2.cross(g_n);
        let gc = g_n.cross(e1);
        add_vertex_grad(&mut grad, t[0], -(gb + gc));
        add_vertex_grad(&mut grad, t[1], gb);
        add_vertex_grad(&mut grad, t[2], gc);
    }
    grad
}
