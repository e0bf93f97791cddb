//! Per-triangle chart atlas.
//!
//! Triangle `t` gets cell `(t % n, t / n)` of an `n x n` grid with
//! `n = ceil(sqrt(T))`. Its chart is the right triangle spanning the cell
//! inset by [`GUTTER`] texels, corners on integer texel coordinates. A texel
//! belongs to a chart when its centre lies in the closed chart triangle.

use std::collections::HashMap;

use super::TexError;
use crate::isoext::Mesh;
use crate::Real;

/// Empty texels kept on each side of a chart within its cell.
pub const GUTTER: usize = 2;
/// Texels whose centre is within this many texels of a shared edge are
/// linked to the neighbouring chart.
const SEAM_REACH: Real = 1.0;

#[derive(Clone, Debug, PartialEq)]
pub struct Atlas {
    pub size: usize,
    /// Per triangle, chart corners in texel coordinates (x right, y down).
    pub corners: Vec<[[Real; 2]; 3]>,
    /// Owning triangle per texel, -1 outside every chart.
    pub owner: Vec<i32>,
    /// Barycentrics of each owned texel centre in its chart.
    pub bary: Vec<[Real; 3]>,
    /// Symmetric texel links across shared mesh edges, sorted.
    pub seams: Vec<(u32, u32)>,
}

fn edge(a: [Real; 2], b: [Real; 2], p: [Real; 2]) -> Real {
    (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
}

/// Grid-packed per-triangle charts for `mesh` in a `size x size` atlas.
pub fn build_atlas(mesh: &Mesh, size: usize) -> Result<Atlas, TexError> {
    let n_tri = mesh.triangles.len();
    if n_tri == 0 {
        return Err(TexError::EmptyMesh);
    }
    let mut bad: Vec<(u32, u32)> = mesh.edge_counts().into_iter().filter(|&(_, c)| c > 2).map(|(e, _)| e).collect();
    if !bad.is_empty() {
        bad.sort_unstable();
        return Err(TexError::NonManifold(bad));
    }
    let grid = (n_tri as Real).sqrt().ceil() as usize;
    let grid = if grid * grid < n_tri { grid + 1 } else { grid };
    let cell = size / grid;
    // The chart leg must hold at least two texels.
    if cell < 2 * GUTTER + 2 {
        return Err(TexError::AtlasTooSmall { size, triangles: n_tri, needed: grid * (2 * GUTTER + 2) });
    }
    let leg = (cell - 2 * GUTTER) as Real;
    let corners = (0..n_tri)
        .map(|t| {
            let x0 = ((t % grid) * cell + GUTTER) as Real;
            let y0 = ((t / grid) * cell + GUTTER) as Real;
            [[x0, y0], [x0 + leg, y0], [x0, y0 + leg]]
        })
        .collect();
    Ok(Atlas::from_corners(mesh, size, corners))
}

impl Atlas {
    /// Atlas from explicit chart corners, computing texel ownership and seam
    /// links.
    pub fn from_corners(mesh: &Mesh, size: usize, corners: Vec<[[Real; 2]; 3]>) -> Atlas {
        let mut owner = vec![-1; size * size];
        let mut bary = vec![[0.0; 3]; size * size];
        for (t, c) in corners.iter().enumerate() {
            let area = edge(c[0], c[1], c[2]);
            if area == 0.0 {
                continue;
            }
            let lo = |k: usize| c.iter().map(|p| p[k]).fold(Real::INFINITY, Real::min);
            let hi = |k: usize| c.iter().map(|p| p[k]).fold(Real::NEG_INFINITY, Real::max);
            let x0 = (lo(0) - 0.5).ceil().max(0.0) as usize;
            let y0 = (lo(1) - 0.5).ceil().max(0.0) as usize;
            let x1 = ((hi(0) - 0.5).floor().max(-1.0) + 1.0).min(size as Real) as usize;
            let y1 = ((hi(1) - 0.5).floor().max(-1.0) + 1.0).min(size as Real) as usize;
            for y in y0..y1 {
                for x in x0..x1 {
                    let p = [x as Real + 0.5, y as Real + 0.5];
                    let l = [edge(c[1], c[2], p) / area, edge(c[2], c[0], p) / area, edge(c[0], c[1], p) / area];
                    let i = y * size + x;
                    if l.iter().all(|&v| v >= 0.0) && owner[i] < 0 {
                        owner[i] = t as i32;
                        bary[i] = l;
                    }
                }
            }
        }
        let mut atlas = Atlas { size, corners, owner, bary, seams: Vec::new() };
        atlas.seams = atlas.link_seams(mesh);
        atlas
    }

    /// Chart corners of triangle `t` as OBJ-style coordinates in `[0, 1]`
    /// (v up).
    pub fn uv(&self, t: usize) -> [[Real; 2]; 3] {
        let s = self.size as Real;
        self.corners[t].map(|p| [p[0] / s, 1.0 - p[1] / s])
    }

    /// Texels owned by triangle `t`, in row-major order.
    pub fn texels_of(&self, t: usize) -> Vec<usize> {
        let c = &self.corners[t];
        let lo = |k: usize| c.iter().map(|p| p[k]).fold(Real::INFINITY, Real::min);
        let hi = |k: usize| c.iter().map(|p| p[k]).fold(Real::NEG_INFINITY, Real::max);
        let x0 = lo(0).floor().max(0.0) as usize;
        let y0 = lo(1).floor().max(0.0) as usize;
        let x1 = (hi(0).ceil() as usize).min(self.size);
        let y1 = (hi(1).ceil() as usize).min(self.size);
        let mut v = Vec::new();
        for y in y0..y1 {
            for x in x0..x1 {
                if self.owner[y * self.size + x] == t as i32 {
                    v.push(y * self.size + x);
                }
            }
        }
        v
    }

    /// Texels linked to `texel` across a seam.
    pub fn links(&self, texel: usize) -> impl Iterator<Item = usize> + '_ {
        let k = texel as u32;
        let start = self.seams.partition_point(|&(a, _)| a < k);
        self.seams[start..].iter().take_while(move |&&(a, _)| a == k).map(|&(_, b)| b as usize)
    }

    /// Distance in texels from an owned texel centre to the chart edge
    /// opposite corner `k`.
    fn edge_distance(&self, t: usize, b: [Real; 3], k: usize) -> Real {
        let c = &self.corners[t];
        let (i, j) = ((k + 1) % 3, (k + 2) % 3);
        let len = ((c[j][0] - c[i][0]).powi(2) + (c[j][1] - c[i][1]).powi(2)).sqrt();
        b[k] * edge(c[0], c[1], c[2]).abs() / len
    }

    fn link_seams(&self, mesh: &Mesh) -> Vec<(u32, u32)> {
        // Edge -> (triangle, local corner opposite the edge).
        let mut by_edge: HashMap<(u32, u32), Vec<(usize, usize)>> = HashMap::new();
        for (t, tri) in mesh.triangles.iter().enumerate() {
            for k in 0..3 {
                let (a, b) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
                by_edge.entry((a.min(b), a.max(b))).or_default().push((t, k));
            }
        }
        let mut shared: Vec<_> = by_edge.into_iter().filter(|(_, v)| v.len() == 2).collect();
        shared.sort_unstable_by_key(|(e, _)| *e);
        let mut texels: Vec<Vec<usize>> = vec![Vec::new(); mesh.triangles.len()];
        for (i, &o) in self.owner.iter().enumerate() {
            if o >= 0 {
                texels[o as usize].push(i);
            }
        }
        let mut links = Vec::new();
        for ((lo, _), sides) in shared {
            // Seam texels of each side with their position along the edge,
            // measured from the lower vertex id.
            let side = |&(t, k): &(usize, usize)| -> Vec<(usize, Real)> {
                let tri = mesh.triangles[t];
                let (i, j) = ((k + 1) % 3, (k + 2) % 3);
                let far = if tri[i] == lo { j } else { i };
                texels[t]
                    .iter()
                    .filter_map(|&x| {
                        let b = self.bary[x];
                        (self.edge_distance(t, b, k) <= SEAM_REACH).then(|| {
                            let s = b[i] + b[j];
                            (x, if s > 0.0 { b[far] / s } else { 0.5 })
                        })
                    })
                    .collect()
            };
            let (a, b) = (side(&sides[0]), side(&sides[1]));
            let nearest = |from: &[(usize, Real)], to: &[(usize, Real)], out: &mut Vec<(u32, u32)>| {
                for &(x, s) in from {
                    let best = to.iter().min_by(|p, q| (p.1 - s).abs().total_cmp(&(q.1 - s).abs()).then(p.0.cmp(&q.0)));
                    if let Some(&(y, _)) = best {
                        out.push((x as u32, y as u32));
                        out.push((y as u32, x as u32));
                    }
                }
            };
            nearest(&a, &b, &mut links);
            nearest(&b, &a, &mut links);
        }
        links.sort_unstable();
        links.dedup();
        links
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{ShapeSdf, Vec3};
    use crate::isoext::{extract_mesh, ScalarGrid};

    fn single() -> Mesh {
        Mesh { vertices: vec![Vec3::ZERO, Vec3::new(1.0, 0.0, 0.0), Vec3::new(0.0, 1.0, 0.0)], triangles: vec![[0, 1, 2]] }
    }

    #[test]
    fn single_triangle_fills_its_cell_minus_gutter() {
        let a = build_atlas(&single(), 32).unwrap();
        let owned: Vec<usize> = (0..32 * 32).filter(|&i| a.owner[i] == 0).collect();
        // Right triangle with 28-texel legs: row y holds 28 - y centres.
        assert_eq!(owned.len(), (1..=28).sum::<usize>());
        for &i in &owned {
            let (x, y) = (i % 32, i / 32);
            assert!((GUTTER..32 - GUTTER).contains(&x) && (GUTTER..32 - GUTTER).contains(&y));
        }
        assert_eq!(a.corners[0], [[2.0, 2.0], [30.0, 2.0], [2.0, 30.0]]);
    }

    #[test]
    fn grid_holds_ceil_sqrt_squared_cells() {
        let s = ShapeSdf::sphere(0.6);
        let mesh = extract_mesh(&ScalarGrid::from_fn(8, |p| s.eval(p))).unwrap().mesh;
        let n = mesh.triangles.len();
        let g = (n as f64).sqrt().ceil() as usize;
        let a = build_atlas(&mesh, 512).unwrap();
        let cell = 512 / g;
        let max_x = a.corners.iter().map(|c| c[1][0]).fold(0.0, Real::max);
        let max_y = a.corners.iter().map(|c| c[2][1]).fold(0.0, Real::max);
        assert!(max_x as usize <= g * cell && max_y as usize <= g * cell);
        assert_eq!(a.corners[n - 1][0][1] as usize, ((n - 1) / g) * cell + GUTTER);
    }

    #[test]
    fn charts_never_share_texels() {
        let s = ShapeSdf::sphere(0.6);
        let mesh = extract_mesh(&ScalarGrid::from_fn(7, |p| s.eval(p))).unwrap().mesh;
        let a = build_atlas(&mesh, 256).unwrap();
        // Brute-force ownership scan: count charts containing each centre.
        for y in 0..256 {
            for x in 0..256 {
                let p = [x as Real + 0.5, y as Real + 0.5];
                let hits = a
                    .corners
                    .iter()
                    .filter(|c| {
                        let area = edge(c[0], c[1], c[2]);
                        [edge(c[1], c[2], p), edge(c[2], c[0], p), edge(c[0], c[1], p)].iter().all(|&e| e / area >= 0.0)
                    })
                    .count();
                assert!(hits <= 1, "texel ({x}, {y}) in {hits} charts");
                assert_eq!(hits == 1, a.owner[y * 256 + x] >= 0);
            }
        }
        for t in 0..mesh.triangles.len() {
            assert!(!a.texels_of(t).is_empty());
        }
    }

    #[test]
    fn seams_link_both_sides_of_shared_edges() {
        let mesh = Mesh::cube(0.5);
        let a = build_atlas(&mesh, 128).unwrap();
        for &(x, y) in &a.seams {
            assert!(a.seams.binary_search(&(y, x)).is_ok());
            assert_ne!(a.owner[x as usize], a.owner[y as usize]);
        }
        // Every triangle of a closed mesh reaches all three neighbours.
        for t in 0..12 {
            let mut nb: Vec<i32> = a.texels_of(t).iter().flat_map(|&x| a.links(x).map(|y| a.owner[y]).collect::<Vec<_>>()).collect();
            nb.sort_unstable();
            nb.dedup();
            assert_eq!(nb.len(), 3, "triangle {t}");
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(build_atlas(&Mesh::default(), 64), Err(TexError::EmptyMesh)));
        let mut m = single();
        m.vertices.push(Vec3::new(0.0, 0.0, 1.0));
        m.vertices.push(Vec3::new(0.0, 0.0, -1.0));
        m.triangles.push([0, 1, 3]);
        m.triangles.push([0, 1, 4]);
        match build_atlas(&m, 64) {
            Err(TexError::NonManifold(e)) => assert_eq!(e, vec![(0, 1)]),
            other => panic!("{other:?}"),
        }
        assert!(matches!(build_atlas(&single(), 5), Err(TexError::AtlasTooSmall { .. })));
    }
}
