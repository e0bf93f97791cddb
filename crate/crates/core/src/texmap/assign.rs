use super::{Atlas, TexError, Texture};
use crate::diffcore::bilinear_at;
use crate::geometry::{Camera, Vec3};
use crate::isoext::Mesh;
use crate::render::rasterize;
use crate::{exec, Array, Real};

fn check_images(views: &[(Camera, Array)]) -> Result<(), TexError> {
    for (index, (_, img)) in views.iter().enumerate() {
        let s = img.shape();
        if s.len() != 3 || s[0] != 3 || s[1] != s[2] || s[1] == 0 {
            return Err(TexError::Image { index, shape: s.to_vec() });
        }
    }
    Ok(())
}

/// Visible pixel count of every triangle in every view, `[view][triangle]`.
/// Only pixels where the z-buffer shows the triangle count.
pub fn visible_areas(mesh: &Mesh, views: &[(Camera, Array)]) -> Result<Vec<Vec<usize>>, TexError> {
    check_images(views)?;
    views
        .iter()
        .map(|(cam, img)| {
            let g = rasterize(mesh, cam, img.shape()[1])?;
            let mut count = vec![0; mesh.triangles.len()];
            for &f in &g.faceid {
                if f >= 0 {
                    count[f as usize] += 1;
                }
            }
            Ok(count)
        })
        .collect()
}

/// Per triangle, the view with the largest visible area; ties go to the
/// lowest view index, and triangles seen by no view get `None`.
pub fn best_views(areas: &[Vec<usize>], triangles: usize) -> Vec<Option<usize>> {
    (0..triangles)
        .map(|t| {
            let mut best: Option<(usize, usize)> = None;
            for (v, a) in areas.iter().enumerate() {
                if a[t] > 0 && best.is_none_or(|(_, b)| a[t] > b) {
                    best = Some((v, a[t]));
                }
            }
            best.map(|(v, _)| v)
        })
        .collect()
}

fn sample(img: &Array, cam: &Camera, p: Vec3) -> [Real; 3] {
    let q = cam.project(p);
    let n = img.shape()[1] as Real;
    let s = cam.width() as Real;
    // Cameras may be set up at another resolution than the image.
    let (u, v) = ((q.uv[0] * n / s).clamp(0.0, n - 1e-6), (q.uv[1] * n / s).clamp(0.0, n - 1e-6));
    let c = bilinear_at(img, u, v);
    [c[0], c[1], c[2]]
}

/// Initial texture: every texel of a triangle's chart samples the
/// triangle's best view at the texel's surface point. Texels of triangles no
/// view sees stay invalid.
pub fn assign_colors(mesh: &Mesh, atlas: &Atlas, views: &[(Camera, Array)]) -> Result<Texture, TexError> {
    let areas = visible_areas(mesh, views)?;
    let best = best_views(&areas, mesh.triangles.len());
    let per_tri = exec::map_indexed(mesh.triangles.len(), |t| {
        let Some(v) = best[t] else {
            return Vec::new();
        };
        let (cam, img) = &views[v];
        let [a, b, c] = mesh.corners(t);
        atlas
            .texels_of(t)
            .into_iter()
            .map(|x| {
                let l = atlas.bary[x];
                (x, sample(img, cam, a * l[0] + b * l[1] + c * l[2]))
            })
            .collect::<Vec<_>>()
    });
    let mut tex = Texture::blank(atlas.size);
    for texels in per_tri {
        for (x, c) in texels {
            tex.rgb[x] = c;
            tex.valid[x] = true;
        }
    }
    Ok(tex)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::geometry::Intrinsics;
    use crate::texmap::build_atlas;

    /// Cameras on the six axes looking at the origin, each with a constant
    /// image of a distinct colour.
    pub(crate) fn axis_views(res: usize) -> Vec<(Camera, Array)> {
        let k = Intrinsics::from_fov(res, res, 50.0);
        let dirs = [
            Vec3::new(1.0, 0.0, 0.0),
            Vec3::new(-1.0, 0.0, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
            Vec3::new(0.0, -1.0, 0.0),
            Vec3::new(0.0, 0.0, 1.0),
            Vec3::new(0.0, 0.0, -1.0),
        ];
        dirs.iter()
            .enumerate()
            .map(|(i, &d)| {
                let up = if d.y != 0.0 { Vec3::new(0.0, 0.0, 1.0) } else { Vec3::new(0.0, 1.0, 0.0) };
                let cam = Camera::look_at(k, d * 3.0, Vec3::ZERO, up).unwrap();
                let col = view_colour(i);
                let data = (0..3).flat_map(|c| std::iter::repeat_n(col[c], res * res)).collect();
                (cam, Array::new(vec![3, res, res], data).unwrap())
            })
            .collect()
    }

    pub(crate) fn view_colour(i: usize) -> [Real; 3] {
        [(i as Real + 1.0) / 8.0, 1.0 - (i as Real) / 8.0, if i % 2 == 0 { 0.25 } else { 0.75 }]
    }

    /// Outward normal of triangle `t`.
    pub(crate) fn face_normal(m: &Mesh, t: usize) -> Vec3 {
        let [a, b, c] = m.corners(t);
        (b - a).cross(c - a).normalized()
    }

    #[test]
    fn cube_faces_take_their_facing_view() {
        let mesh = Mesh::cube(0.5);
        let views = axis_views(48);
        let atlas = build_atlas(&mesh, 128).unwrap();
        let tex = assign_colors(&mesh, &atlas, &views).unwrap();
        let best = best_views(&visible_areas(&mesh, &views).unwrap(), 12);
        for t in 0..12 {
            let n = face_normal(&mesh, t);
            // The facing view is the one whose camera sits along the normal.
            let facing = (0..6).find(|&v| (views[v].0.center().normalized() - n).norm() < 1e-9).unwrap();
            assert_eq!(best[t], Some(facing), "triangle {t}");
            for x in atlas.texels_of(t) {
                assert!(tex.valid[x]);
                let want = view_colour(facing);
                assert!((0..3).all(|c| (tex.rgb[x][c] - want[c]).abs() < 1e-12));
            }
        }
    }

    #[test]
    fn hidden_triangles_stay_invalid() {
        // Only the +x view: faces pointing elsewhere are never seen.
        let mesh = Mesh::cube(0.5);
        let views = vec![axis_views(48).swap_remove(0)];
        let atlas = build_atlas(&mesh, 128).unwrap();
        let tex = assign_colors(&mesh, &atlas, &views).unwrap();
        for t in 0..12 {
            let seen = face_normal(&mesh, t).x > 0.5;
            assert!(atlas.texels_of(t).iter().all(|&x| tex.valid[x] == seen), "triangle {t}");
        }
    }

    #[test]
    fn ties_go_to_the_lowest_view() {
        let areas = vec![vec![5, 0, 3], vec![5, 0, 4], vec![2, 0, 4]];
        assert_eq!(best_views(&areas, 3), vec![Some(0), None, Some(1)]);
        // Identical views: the first wins.
        let mesh = Mesh::cube(0.5);
        let v = axis_views(32);
        let twice = vec![v[0].clone(), v[0].clone()];
        let best = best_views(&visible_areas(&mesh, &twice).unwrap(), 12);
        assert!(best.iter().all(|b| b.is_none() || *b == Some(0)));
    }

    #[test]
    fn never_samples_a_view_where_fully_hidden() {
        let s = crate::geometry::ShapeSdf::sphere(0.6);
        let mesh = crate::isoext::extract_mesh(&crate::isoext::ScalarGrid::from_fn(10, |p| s.eval(p))).unwrap().mesh;
        let views = axis_views(32);
        let areas = visible_areas(&mesh, &views).unwrap();
        for (t, b) in best_views(&areas, mesh.triangles.len()).iter().enumerate() {
            if let Some(v) = b {
                assert!(areas[*v][t] > 0);
            } else {
                assert!(areas.iter().all(|a| a[t] == 0));
            }
        }
    }

    #[test]
    fn rejects_non_rgb_images() {
        let mesh = Mesh::cube(0.5);
        let atlas = build_atlas(&mesh, 64).unwrap();
        let cam = axis_views(8)[0].0;
        let bad = vec![(cam, Array::zeros(&[1, 8, 8]))];
        assert!(matches!(assign_colors(&mesh, &atlas, &bad), Err(TexError::Image { index: 0, .. })));
    }
}
