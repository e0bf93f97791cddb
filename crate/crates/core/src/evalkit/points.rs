//! Surface sampling and Chamfer distance.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::EvalError;
use crate::geometry::Vec3;
use crate::isoext::Mesh;
use crate::Real;

/// `n` points uniformly distributed over the surface area of `mesh`.
pub fn sample_surface(mesh: &Mesh, n: usize, seed: u64) -> Result<Vec<Vec3>, EvalError> {
    if mesh.is_empty() {
        return Err(EvalError::EmptyMesh);
    }
    let mut cdf = Vec::with_capacity(mesh.triangles.len());
    let mut acc = 0.0;
    for t in 0..mesh.triangles.len() {
        acc += mesh.triangle_area(t);
        cdf.push(acc);
    }
    if !(acc > 0.0) {
        return Err(EvalError::EmptyMesh);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..n)
        .map(|_| {
            let u: Real = rng.gen::<Real>() * acc;
            let t = cdf.partition_point(|&c| c <= u).min(cdf.len() - 1);
            let (r1, r2): (Real, Real) = (rng.gen(), rng.gen());
            let s = r1.sqrt();
            let [a, b, c] = mesh.corners(t);
            a * (1.0 - s) + b * (s * (1.0 - r2)) + c * (s * r2)
        })
        .collect())
}

fn sq(a: Vec3, b: Vec3) -> Real {
    let d = a - b;
    d.x * d.x + d.y * d.y + d.z * d.z
}

/// Uniform bucket grid over a point set.
struct Grid<'a> {
    pts: &'a [Vec3],
    lo: Vec3,
    cell: Real,
    dims: [usize; 3],
    start: Vec<usize>,
    items: Vec<usize>,
}

impl<'a> Grid<'a> {
    fn new(pts: &'a [Vec3]) -> Self {
        let mut lo = pts[0];
        let mut hi = pts[0];
        for p in pts {
            lo = Vec3::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z));
            hi = Vec3::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z));
        }
        let ext = hi - lo;
        let side = ext.max_component().max(1e-9);
        let per_axis = (pts.len() as Real / 2.0).cbrt().ceil().max(1.0);
        let cell = side / per_axis;
        let dim = |e: Real| ((e / cell).floor() as usize + 1).max(1);
        let dims = [dim(ext.x), dim(ext.y), dim(ext.z)];
        let mut counts = vec![0usize; dims[0] * dims[1] * dims[2] + 1];
        let mut g = Self { pts, lo, cell, dims, start: Vec::new(), items: Vec::new() };
        let keys: Vec<usize> = pts.iter().map(|&p| g.flat(g.coords(p))).collect();
        for &k in &keys {
            counts[k + 1] += 1;
        }
        for i in 1..counts.len() {
            counts[i] += counts[i - 1];
        }
        let mut fill = counts.clone();
        let mut items = vec![0; pts.len()];
        for (i, &k) in keys.iter().enumerate() {
            items[fill[k]] = i;
            fill[k] += 1;
        }
        g.start = counts;
        g.items = items;
        g
    }

    fn coords(&self, p: Vec3) -> [usize; 3] {
        let c = |v: Real, lo: Real, d: usize| (((v - lo) / self.cell).floor().max(0.0) as usize).min(d - 1);
        [c(p.x, self.lo.x, self.dims[0]), c(p.y, self.lo.y, self.dims[1]), c(p.z, self.lo.z, self.dims[2])]
    }

    fn flat(&self, c: [usize; 3]) -> usize {
        (c[2] * self.dims[1] + c[1]) * self.dims[0] + c[0]
    }

    /// Exact squared distance from `p` to its nearest grid point.
    fn nearest_sq(&self, p: Vec3) -> Real {
        let c = self.coords(p);
        let mut best = Real::INFINITY;
        let max_r = self.dims.iter().max().copied().unwrap_or(1);
        for r in 0..=max_r {
            let lo = c.map(|v| v as isize - r as isize);
            let hi = c.map(|v| v as isize + r as isize);
            for z in lo[2].max(0)..=hi[2].min(self.dims[2] as isize - 1) {
                for y in lo[1].max(0)..=hi[1].min(self.dims[1] as isize - 1) {
                    for x in lo[0].max(0)..=hi[0].min(self.dims[0] as isize - 1) {
                        let on_shell = [x, y, z].iter().zip(lo.iter().zip(&hi)).any(|(v, (l, h))| v == l || v == h);
                        if !on_shell {
                            continue;
                        }
                        let k = self.flat([x as usize, y as usize, z as usize]);
                        for &i in &self.items[self.start[k]..self.start[k + 1]] {
                            best = best.min(sq(p, self.pts[i]));
                        }
                    }
                }
            }
            // Every point outside the searched block is at least this far.
            let mut bound = Real::INFINITY;
            let pa = p.to_array();
            let la = self.lo.to_array();
            for a in 0..3 {
                if lo[a] > 0 {
                    bound = bound.min(pa[a] - (la[a] + lo[a] as Real * self.cell));
                }
                if (hi[a] as usize) + 1 < self.dims[a] {
                    bound = bound.min(la[a] + (hi[a] + 1) as Real * self.cell - pa[a]);
                }
            }
            if bound == Real::INFINITY || (bound > 0.0 && bound * bound >= best) {
                break;
            }
        }
        best
    }
}

/// Symmetric mean of squared nearest-neighbour distances, grid accelerated.
pub fn chamfer(p: &[Vec3], q: &[Vec3]) -> Result<Real, EvalError> {
    if p.is_empty() || q.is_empty() {
        return Err(EvalError::EmptyPoints);
    }
    let one_way = |a: &[Vec3], b: &[Vec3]| {
        let g = Grid::new(b);
        let d = crate::exec::map_indexed(a.len(), |i| g.nearest_sq(a[i]));
        d.iter().sum::<Real>() / a.len() as Real
    };
    Ok(one_way(p, q) + one_way(q, p))
}

/// Quadratic-time reference for [`chamfer`].
pub fn chamfer_brute_force(p: &[Vec3], q: &[Vec3]) -> Result<Real, EvalError> {
    if p.is_empty() || q.is_empty() {
        return Err(EvalError::EmptyPoints);
    }
    let one_way = |a: &[Vec3], b: &[Vec3]| {
        a.iter().map(|&x| b.iter().map(|&y| sq(x, y)).fold(Real::INFINITY, Real::min)).sum::<Real>() / a.len() as Real
    };
    Ok(one_way(p, q) + one_way(q, p))
}
