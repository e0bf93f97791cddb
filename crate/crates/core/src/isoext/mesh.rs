use std::collections::HashMap;

use crate::geometry::Vec3;
use crate::Real;

/// Indexed triangle mesh.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Mesh {
    pub vertices: Vec<Vec3>,
    pub triangles: Vec<[u32; 3]>,
}

impl Mesh {
    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    pub fn vertex(&self, i: u32) -> Vec3 {
        self.vertices[i as usize]
    }

    pub fn corners(&self, t: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertex(a), self.vertex(b), self.vertex(c)]
    }

    /// Vertex positions as a flat `[V * 3]` buffer.
    pub fn flat_vertices(&self) -> Vec<Real> {
        self.vertices.iter().flat_map(|v| v.to_array()).collect()
    }

    pub fn from_flat(flat: &[Real], triangles: Vec<[u32; 3]>) -> Self {
        Self { vertices: flat.chunks_exact(3).map(Vec3::from_slice).collect(), triangles }
    }

    pub fn triangle_area(&self, t: usize) -> Real {
        let [a, b, c] = self.corners(t);
        0.5 * (b - a).cross(c - a).norm()
    }

    pub fn area(&self) -> Real {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Signed enclosed volume; positive for outward-facing winding.
    pub fn signed_volume(&self) -> Real {
        (0..self.triangles.len())
            .map(|t| {
                let [a, b, c] = self.corners(t);
                a.dot(b.cross(c)) / 6.0
            })
            .sum()
    }

    /// Undirected edge -> incident triangle count.
    pub fn edge_counts(&self) -> HashMap<(u32, u32), usize> {
        let mut m = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                *m.entry((a.min(b), a.max(b))).or_insert(0) += 1;
            }
        }
        m
    }

    /// Edges not shared by exactly two triangles.
    pub fn non_manifold_edges(&self) -> Vec<(u32, u32)> {
        let mut v: Vec<_> = self.edge_counts().into_iter().filter(|&(_, c)| c != 2).map(|(e, _)| e).collect();
        v.sort_unstable();
        v
    }

    /// Every edge shared by exactly two triangles, traversed in opposite
    /// directions.
    pub fn is_closed_oriented_manifold(&self) -> bool {
        let mut directed: HashMap<(u32, u32), usize> = HashMap::new();
        for t in &self.triangles {
            for k in 0..3 {
                *directed.entry((t[k], t[(k + 1) % 3])).or_insert(0) += 1;
            }
        }
        directed.iter().all(|(&(a, b), &c)| c == 1 && directed.get(&(b, a)) == Some(&1))
    }

    pub fn euler_characteristic(&self) -> i64 {
        let used: std::collections::HashSet<u32> = self.triangles.iter().flatten().copied().collect();
        used.len() as i64 - self.edge_counts().len() as i64 + self.triangles.len() as i64
    }

    /// Per-vertex neighbour lists (sorted, unique).
    pub fn vertex_neighbors(&self) -> Vec<Vec<u32>> {
        let mut nb = vec![Vec::new(); self.vertices.len()];
        for t in &self.triangles {
            for k in 0..3 {
                let (a, b) = (t[k], t[(k + 1) % 3]);
                nb[a as usize].push(b);
                nb[b as usize].push(a);
            }
        }
        for n in &mut nb {
            n.sort_unstable();
            n.dedup();
        }
        nb
    }

    /// Vertices touching an edge with a single incident triangle.
    pub fn boundary_vertices(&self) -> Vec<bool> {
        let mut b = vec![false; self.vertices.len()];
        for ((x, y), c) in self.edge_counts() {
            if c == 1 {
                b[x as usize] = true;
                b[y as usize] = true;
            }
        }
        b
    }

    pub fn translated(&self, d: Vec3) -> Mesh {
        Mesh { vertices: self.vertices.iter().map(|&v| v + d).collect(), triangles: self.triangles.clone() }
    }

    /// Axis-aligned cube `[-h, h]^3`, two outward-facing triangles per face.
    pub fn cube(h: Real) -> Mesh {
        let vertices = (0..8)
            .map(|i| {
                let s = |bit: usize| if i & bit != 0 { h } else { -h };
                Vec3::new(s(1), s(2), s(4))
            })
            .collect();
        // Faces as outward-wound quads over the corner bit pattern.
        let quads: [[u32; 4]; 6] = [
            [0, 4, 6, 2], // -x
            [1, 3, 7, 5], // +x
            [0, 1, 5, 4], // -y
            [2, 6, 7, 3], // +y
            [0, 2, 3, 1], // -z
            [4, 5, 7, 6], // +z
        ];
        let triangles = quads.iter().flat_map(|q| [[q[0], q[1], q[2]], [q[0], q[2], q[3]]]).collect();
        Mesh { vertices, triangles }
    }
}

/// Euclidean distance from `p` to triangle `(a, b, c)`.
pub fn point_triangle_distance(p: Vec3, a: Vec3, b: Vec3, c: Vec3) -> Real {
    // Region classification on the triangle's plane.
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(ap);
    let d2 = ac.dot(ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return (p - a).norm();
    }
    let bp = p - b;
    let d3 = ab.dot(bp);
    let d4 = ac.dot(bp);
    if d3 >= 0.0 && d4 <= d3 {
        return (p - b).norm();
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (p - (a + ab * v)).norm();
    }
    let cp = p - c;
    let d5 = ab.dot(cp);
    let d6 = ac.dot(cp);
    if d6 >= 0.0 && d5 <= d6 {
        return (p - c).norm();
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (p - (a + ac * w)).norm();
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (p - (b + (c - b) * w)).norm();
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    (p - (a + ab * v + ac * w)).norm()
}
