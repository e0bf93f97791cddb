use super::tables::{CORNERS, EDGE_CORNERS, EDGE_TABLE, TRI_TABLE};
use super::{IsoError, Mesh};
use crate::diffcore::{Array, Tape, Var};
use crate::exec;
use crate::geometry::{Lattice, Vec3};
use crate::Real;

/// Signed distances and cell-unit deformations on a [`Lattice`].
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarGrid {
    pub res: usize,
    /// `[N]` in lattice order.
    pub sdf: Vec<Real>,
    /// `[N * 3]`, offsets in units of the cell size.
    pub deform: Vec<Real>,
}

impl ScalarGrid {
    pub fn new(res: usize, sdf: Vec<Real>, deform: Vec<Real>) -> Result<Self, IsoError> {
        let n = res * res * res;
        if res < 2 || sdf.len() != n || deform.len() != 3 * n {
            return Err(IsoError::Grid(format!(
                "res {res}: expected {n} sdf and {} deformation values, got {} and {}",
                3 * n,
                sdf.len(),
                deform.len()
            )));
        }
        Ok(Self { res, sdf, deform })
    }

    /// Samples `f` at every node with zero deformation.
    pub fn from_fn(res: usize, f: impl Fn(Vec3) -> Real + Sync) -> Self {
        let l = Lattice::new(res);
        let sdf = exec::map_indexed(l.num_nodes(), |idx| {
            let (i, j, k) = l.coords(idx);
            f(l.position(i, j, k))
        });
        Self { res, sdf, deform: vec![0.0; 3 * l.num_nodes()] }
    }

    pub fn lattice(&self) -> Lattice {
        Lattice::new(self.res)
    }

    pub fn cell_size(&self) -> Real {
        self.lattice().spacing()
    }

    /// Node position after deformation.
    pub fn displaced(&self, idx: usize) -> Vec3 {
        let l = self.lattice();
        let (i, j, k) = l.coords(idx);
        let d = Vec3::from_slice(&self.deform[3 * idx..3 * idx + 3]);
        l.position(i, j, k) + d * l.spacing()
    }
}

/// Lattice edge a mesh vertex lies on, and the crossing parameter along it.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgeSource {
    pub a: usize,
    pub b: usize,
    pub t: Real,
}

/// Mesh plus the lattice edge behind every vertex.
#[derive(Clone, Debug, PartialEq)]
pub struct Extraction {
    pub mesh: Mesh,
    pub sources: Vec<EdgeSource>,
}

fn inside(s: Real) -> bool {
    s < 0.0
}

/// Marching cubes over the deformed lattice.
///
/// A node is inside when its value is negative. Each vertex sits on a cut
/// lattice edge `(a, b)` at `t = s_a / (s_a - s_b)` between the displaced
/// endpoints and is shared by every cell around that edge. Vertices are
/// ordered by edge id (`3 * node + axis`), triangles by cell, and triangles
/// with area below `1e-12` are dropped.
pub fn extract_mesh(grid: &ScalarGrid) -> Result<Extraction, IsoError> {
    if let Some(i) = grid.sdf.iter().position(|v| !v.is_finite()) {
        return Err(IsoError::NonFinite(i));
    }
    if let Some(i) = grid.deform.iter().position(|v| !v.is_finite()) {
        return Err(IsoError::NonFinite(i / 3));
    }
    let r = grid.res;
    let l = grid.lattice();
    let stride = [1usize, r, r * r];
    let cells = r - 1;
    // Per z-slab triangle lists as edge ids.
    let slabs: Vec<Vec<[usize; 3]>> = exec::map_indexed(cells, |k| {
        let mut tris = Vec::new();
        for j in 0..cells {
            for i in 0..cells {
                let base = l.index(i, j, k);
                let node = |c: usize| base + CORNERS[c][0] * stride[0] + CORNERS[c][1] * stride[1] + CORNERS[c][2] * stride[2];
                let mut case = 0usize;
                for c in 0..8 {
                    if inside(grid.sdf[node(c)]) {
                        case |= 1 << c;
                    }
                }
                if EDGE_TABLE[case] == 0 {
                    continue;
                }
                let edge_id = |e: usize| {
                    let [c0, c1] = EDGE_CORNERS[e];
                    let (n0, n1) = (node(c0), node(c1));
                    let lo = n0.min(n1);
                    let axis = match n0.max(n1) - lo {
                        1 => 0,
                        d if d == r => 1,
                        _ => 2,
                    };
                    3 * lo + axis
                };
                for tri in TRI_TABLE[case].chunks(3) {
                    if tri[0] < 0 {
                        break;
                    }
                    tris.push([edge_id(tri[0] as usize), edge_id(tri[2] as usize), edge_id(tri[1] as usize)]);
                }
            }
        }
        tris
    });
    let mut edges: Vec<usize> = slabs.iter().flatten().flatten().copied().collect();
    edges.sort_unstable();
    edges.dedup();
    let sources: Vec<EdgeSource> = edges
        .iter()
        .map(|&e| {
            let (a, axis) = (e / 3, e % 3);
            let b = a + stride[axis];
            let (sa, sb) = (grid.sdf[a], grid.sdf[b]);
            EdgeSource { a, b, t: sa / (sa - sb) }
        })
        .collect();
    let vertices: Vec<Vec3> = sources
        .iter()
        .map(|s| {
            let pa = grid.displaced(s.a);
            let pb = grid.displaced(s.b);
            pa + (pb - pa) * s.t
        })
        .collect();
    let lookup = |e: usize| edges.binary_search(&e).expect("edge registered") as u32;
    let mut triangles = Vec::new();
    for tri in slabs.iter().flatten() {
        let t = [lookup(tri[0]), lookup(tri[1]), lookup(tri[2])];
        let (a, b, c) = (vertices[t[0] as usize], vertices[t[1] as usize], vertices[t[2] as usize]);
        if 0.5 * (b - a).cross(c - a).norm() < 1e-12 {
            continue;
        }
        triangles.push(t);
    }
    // Drop vertices no triangle references any more.
    let mut used = vec![false; vertices.len()];
    triangles.iter().flatten().for_each(|&v| used[v as usize] = true);
    let mut remap = vec![u32::MAX; vertices.len()];
    let mut mesh = Mesh::default();
    let mut kept = Vec::new();
    for (i, &u) in used.iter().enumerate() {
        if u {
            remap[i] = mesh.vertices.len() as u32;
            mesh.vertices.push(vertices[i]);
            kept.push(sources[i]);
        }
    }
    mesh.triangles = triangles.into_iter().map(|t| t.map(|v| remap[v as usize])).collect();
    Ok(Extraction { mesh, sources: kept })
}

/// Derivatives of one vertex position. The position depends on
/// `(s_a, s_b)` through `t` and on the two endpoint deformations through
/// isotropic weights.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct VertexJacobian {
    pub d_sa: Vec3,
    pub d_sb: Vec3,
    /// `dv / d(deform_a)` is this scalar times the identity.
    pub d_da: Real,
    pub d_db: Real,
}

/// Analytic vertex Jacobians for an extraction of `grid`.
pub fn vertex_gradients(ex: &Extraction, grid: &ScalarGrid) -> Vec<VertexJacobian> {
    let h = grid.cell_size();
    ex.sources
        .iter()
        .map(|s| {
            let (sa, sb) = (grid.sdf[s.a], grid.sdf[s.b]);
            let den = (sa - sb) * (sa - sb);
            let dt_dsa = -sb / den;
            let dt_dsb = sa / den;
            let e = grid.displaced(s.b) - grid.displaced(s.a);
            VertexJacobian {
                d_sa: e * dt_dsa,
                d_sb: e * dt_dsb,
                d_da: (1.0 - s.t) * h,
                d_db: s.t * h,
            }
        })
        .collect()
}

/// Extraction as a tape op: `sdf: [N]`, `deform: [N, 3]` to vertex positions
/// `[V, 3]`. Connectivity is returned alongside and is piecewise constant.
pub fn extract_mesh_op(tape: &mut Tape, sdf: Var, deform: Var, res: usize) -> Result<(Var, Extraction), IsoError> {
    let grid = ScalarGrid::new(res, tape.value(sdf).data().to_vec(), tape.value(deform).data().to_vec())?;
    let ex = extract_mesh(&grid)?;
    let jac = vertex_gradients(&ex, &grid);
    let sources = ex.sources.clone();
    let n = grid.sdf.len();
    let v = ex.mesh.vertices.len();
    let out = Array::new(vec![v, 3], ex.mesh.flat_vertices())?;
    let var = tape.custom(&[sdf, deform], out, move |g| {
        let mut gs = vec![0.0; n];
        let mut gd = vec![0.0; 3 * n];
        for (i, (s, j)) in sources.iter().zip(&jac).enumerate() {
            let gv = Vec3::from_slice(&g[3 * i..3 * i + 3]);
            gs[s.a] += gv.dot(j.d_sa);
            gs[s.b] += gv.dot(j.d_sb);
            for ax in 0..3 {
                gd[3 * s.a + ax] += gv[ax] * j.d_da;
                gd[3 * s.b + ax] += gv[ax] * j.d_db;
            }
        }
        vec![Some(gs), Some(gd)]
    });
    Ok((var, ex))
}
