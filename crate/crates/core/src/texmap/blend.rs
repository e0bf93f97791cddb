//! Surface-space blur and hole filling over chart texels.
//!
//! Texels connect to their 8 neighbours within the same chart and, across a
//! shared mesh edge, to their seam links. A seam link joins two texels as if
//! they were one, so a blur window centred on a seam reaches equally far into
//! both charts.

use super::{Atlas, TexError, Texture};
use crate::{exec, Real};

fn window(atlas: &Atlas, x: usize, r: usize, out: &mut Vec<usize>) {
    let n = atlas.size;
    let t = atlas.owner[x];
    let (cx, cy) = (x % n, x / n);
    for y in cy.saturating_sub(r)..=(cy + r).min(n - 1) {
        for xx in cx.saturating_sub(r)..=(cx + r).min(n - 1) {
            let i = y * n + xx;
            if atlas.owner[i] == t {
                out.push(i);
            }
        }
    }
}

/// Chart texels within `r` steps of `x`, crossing at most one seam.
fn neighbourhood(atlas: &Atlas, x: usize, r: usize) -> Vec<usize> {
    let mut own = Vec::new();
    window(atlas, x, r, &mut own);
    let n = atlas.size;
    let mut all = own.clone();
    for &s in &own {
        let d = ((s % n).abs_diff(x % n)).max((s / n).abs_diff(x / n));
        for l in atlas.links(s) {
            window(atlas, l, r - d, &mut all);
        }
    }
    all.sort_unstable();
    all.dedup();
    all
}

/// Box blur of radius `radius` texels: every valid texel becomes the mean of
/// the valid texels in its surface neighbourhood. Validity is unchanged.
pub fn blend_colors(tex: &Texture, atlas: &Atlas, radius: usize) -> Texture {
    if radius == 0 {
        return tex.clone();
    }
    let targets: Vec<usize> = (0..tex.rgb.len()).filter(|&i| tex.valid[i] && atlas.owner[i] >= 0).collect();
    let blended = exec::map_indexed(targets.len(), |k| {
        let mut sum = [0.0; 3];
        let mut cnt = 0usize;
        for y in neighbourhood(atlas, targets[k], radius) {
            if tex.valid[y] {
                for c in 0..3 {
                    sum[c] += tex.rgb[y][c];
                }
                cnt += 1;
            }
        }
        sum.map(|s| s / cnt as Real)
    });
    let mut out = tex.clone();
    for (&i, c) in targets.iter().zip(blended) {
        out.rgb[i] = c;
    }
    out
}

fn graph_neighbours(atlas: &Atlas, x: usize, out: &mut Vec<usize>) {
    out.clear();
    window(atlas, x, 1, out);
    out.retain(|&y| y != x);
    out.extend(atlas.links(x));
}

/// Breadth-first propagation from valid texels: each ring of newly reached
/// chart texels takes the mean of its already valid neighbours. Chart texels
/// that no valid texel can reach (a surface component no view saw) take the
/// mean of all valid texels, so every chart texel ends up valid.
pub fn fill_holes(tex: &Texture, atlas: &Atlas) -> Result<Texture, TexError> {
    let chart: Vec<usize> = (0..tex.rgb.len()).filter(|&i| atlas.owner[i] >= 0).collect();
    let seeds: Vec<usize> = chart.iter().copied().filter(|&i| tex.valid[i]).collect();
    if seeds.is_empty() {
        return Err(TexError::NothingToFill);
    }
    let mut out = tex.clone();
    let mut nb = Vec::new();
    let mut frontier: Vec<usize> = Vec::new();
    let mut queued = vec![false; tex.rgb.len()];
    for &s in &seeds {
        graph_neighbours(atlas, s, &mut nb);
        for &y in &nb {
            if !out.valid[y] && !queued[y] {
                queued[y] = true;
                frontier.push(y);
            }
        }
    }
    while !frontier.is_empty() {
        frontier.sort_unstable();
        // Colours of the whole ring are computed before any is committed.
        let ring: Vec<[Real; 3]> = frontier
            .iter()
            .map(|&x| {
                let mut nb = Vec::new();
                graph_neighbours(atlas, x, &mut nb);
                let (mut sum, mut cnt) = ([0.0; 3], 0);
                for &y in nb.iter().filter(|&&y| out.valid[y]) {
                    for c in 0..3 {
                        sum[c] += out.rgb[y][c];
                    }
                    cnt += 1;
                }
                sum.map(|s| s / cnt.max(1) as Real)
            })
            .collect();
        for (&x, c) in frontier.iter().zip(ring) {
            out.rgb[x] = c;
            out.valid[x] = true;
        }
        let mut next = Vec::new();
        for &x in &frontier {
            graph_neighbours(atlas, x, &mut nb);
            for &y in &nb {
                if !out.valid[y] && !queued[y] {
                    queued[y] = true;
                    next.push(y);
                }
            }
        }
        frontier = next;
    }
    let unreached: Vec<usize> = chart.iter().copied().filter(|&i| !out.valid[i]).collect();
    if !unreached.is_empty() {
        let mut mean = [0.0; 3];
        for &s in &seeds {
            for c in 0..3 {
                mean[c] += tex.rgb[s][c] / seeds.len() as Real;
            }
        }
        for i in unreached {
            out.rgb[i] = mean;
            out.valid[i] = true;
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::Vec3;
    use crate::isoext::Mesh;
    use crate::texmap::assign::tests::{axis_views, face_normal, view_colour};
    use crate::texmap::{assign_colors, build_atlas};

    fn two_faces() -> (Mesh, Atlas) {
        // Unit square split along its diagonal, both charts the same scale.
        let mesh = Mesh {
            vertices: vec![Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0), Vec3::new(1.0, 1.0, 0.0), Vec3::new(0.0, 1.0, 0.0)],
            triangles: vec![[0, 1, 2], [0, 2, 3]],
        };
        let atlas = build_atlas(&mesh, 64).unwrap();
        (mesh, atlas)
    }

    fn painted(atlas: &Atlas, f: impl Fn(i32) -> Option<[Real; 3]>) -> Texture {
        let mut t = Texture::blank(atlas.size);
        for i in 0..t.rgb.len() {
            if atlas.owner[i] >= 0 {
                if let Some(c) = f(atlas.owner[i]) {
                    t.rgb[i] = c;
                    t.valid[i] = true;
                }
            }
        }
        t
    }

    #[test]
    fn radius_zero_and_constant_are_fixed_points() {
        let (_, atlas) = two_faces();
        let t = painted(&atlas, |o| Some([o as Real, 0.5, 1.0 - o as Real]));
        assert_eq!(blend_colors(&t, &atlas, 0), t);
        let c = painted(&atlas, |_| Some([0.3, 0.6, 0.9]));
        let b = blend_colors(&c, &atlas, 3);
        for i in 0..c.rgb.len() {
            assert!((0..3).all(|k| (b.rgb[i][k] - c.rgb[i][k]).abs() < 1e-12));
        }
        assert_eq!(b.valid, c.valid);
    }

    #[test]
    fn seam_texels_meet_halfway() {
        let (_, atlas) = two_faces();
        let t = painted(&atlas, |o| Some([o as Real; 3]));
        let b = blend_colors(&t, &atlas, 2);
        let seam: Vec<usize> = atlas.seams.iter().map(|&(a, _)| a as usize).collect();
        assert!(!seam.is_empty());
        // Ends of the shared edge sit next to chart corners and see less of
        // the other side; the midsection is what the box average predicts.
        let mut mids = Vec::new();
        for &x in &seam {
            let n = atlas.size;
            let (px, py) = (x % n, x / n);
            let near_corner = atlas.corners[atlas.owner[x] as usize].iter().any(|c| (c[0] - px as Real).abs() < 6.0 && (c[1] - py as Real).abs() < 6.0);
            if !near_corner {
                mids.push(b.rgb[x][0]);
            }
        }
        assert!(!mids.is_empty());
        for v in mids {
            assert!((v - 0.5).abs() <= 0.1, "seam texel {v}");
        }
    }

    #[test]
    fn fill_is_identity_when_complete_and_reaches_everything() {
        let (_, atlas) = two_faces();
        let full = painted(&atlas, |_| Some([0.2, 0.4, 0.6]));
        assert_eq!(fill_holes(&full, &atlas).unwrap(), full);
        let half = painted(&atlas, |o| (o == 0).then_some([0.2, 0.4, 0.6]));
        let f = fill_holes(&half, &atlas).unwrap();
        assert_eq!(f.coverage(&atlas), 1.0);
        // Filled from a constant colour stays that colour.
        for i in atlas.texels_of(1) {
            assert!((f.rgb[i][1] - 0.4).abs() < 1e-12);
        }
        // Idempotent once complete.
        assert_eq!(fill_holes(&f, &atlas).unwrap(), f);
        assert!(matches!(fill_holes(&Texture::blank(64), &atlas), Err(TexError::NothingToFill)));
    }

    #[test]
    fn single_hole_takes_its_surroundings() {
        let (_, atlas) = two_faces();
        let mut t = painted(&atlas, |_| Some([0.7, 0.1, 0.3]));
        let hole = atlas.texels_of(0)[40];
        t.valid[hole] = false;
        t.rgb[hole] = [0.0; 3];
        let f = fill_holes(&t, &atlas).unwrap();
        assert!(f.valid[hole]);
        assert!((0..3).all(|c| (f.rgb[hole][c] - [0.7, 0.1, 0.3][c]).abs() < 1e-12));
    }

    #[test]
    fn occluded_cube_face_is_filled_from_its_neighbours() {
        let mesh = Mesh::cube(0.5);
        // Drop the -z camera: the -z face is invisible in every view.
        let views: Vec<_> = axis_views(48).into_iter().take(5).collect();
        let atlas = build_atlas(&mesh, 128).unwrap();
        let init = assign_colors(&mesh, &atlas, &views).unwrap();
        let hidden: Vec<usize> = (0..12).filter(|&t| face_normal(&mesh, t).z < -0.5).collect();
        assert_eq!(hidden.len(), 2);
        for &t in &hidden {
            assert!(atlas.texels_of(t).iter().all(|&x| !init.valid[x]));
        }
        assert!(init.coverage(&atlas) < 1.0);
        let filled = fill_holes(&init, &atlas).unwrap();
        assert_eq!(filled.coverage(&atlas), 1.0);
        // Colours come from the four side faces, never from outside them.
        let sides: Vec<[Real; 3]> = (0..4).map(view_colour).collect();
        for &t in &hidden {
            for x in atlas.texels_of(t) {
                for c in 0..3 {
                    let lo = sides.iter().map(|s| s[c]).fold(Real::INFINITY, Real::min);
                    let hi = sides.iter().map(|s| s[c]).fold(Real::NEG_INFINITY, Real::max);
                    assert!(filled.rgb[x][c] >= lo - 1e-12 && filled.rgb[x][c] <= hi + 1e-12);
                }
            }
        }
    }
}
