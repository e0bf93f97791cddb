use super::Vec3;
use crate::Real;

/// Regular `res^3` node lattice over `[-1, 1]^3`. Node `(i, j, k)` sits at
/// `-1 + h * (i, j, k)` with `h = 2 / (res - 1)` and has flat index
/// `(k * res + j) * res + i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Lattice {
    pub res: usize,
}

impl Lattice {
    pub const MIN: Real = -1.0;
    pub const MAX: Real = 1.0;

    pub fn new(res: usize) -> Self {
        assert!(res >= 2, "lattice needs at least 2 nodes per axis");
        Self { res }
    }

    pub fn spacing(&self) -> Real {
        (Self::MAX - Self::MIN) / (self.res - 1) as Real
    }

    pub fn num_nodes(&self) -> usize {
        self.res * self.res * self.res
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.res + j) * self.res + i
    }

    pub fn coords(&self, idx: usize) -> (usize, usize, usize) {
        let r = self.res;
        (idx % r, (idx / r) % r, idx / (r * r))
    }

    pub fn position(&self, i: usize, j: usize, k: usize) -> Vec3 {
        let h = self.spacing();
        Vec3::new(
            Self::MIN + h * i as Real,
            Self::MIN + h * j as Real,
            Self::MIN + h * k as Real,
        )
    }

    /// Continuous grid coordinates (node units) of a world point.
    pub fn to_grid(&self, p: Vec3) -> [Real; 3] {
        let s = 1.0 / self.spacing();
        [(p.x - Self::MIN) * s, (p.y - Self::MIN) * s, (p.z - Self::MIN) * s]
    }

    /// All node positions as a flat `[N * 3]` buffer in index order.
    pub fn positions_flat(&self) -> Vec<Real> {
        let mut out = Vec::with_capacity(self.num_nodes() * 3);
        for idx in 0..self.num_nodes() {
            let (i, j, k) = self.coords(idx);
            out.extend_from_slice(&self.position(i, j, k).to_array());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn corners_and_index_round_trip() {
        let l = Lattice::new(5);
        assert_eq!(l.position(0, 0, 0), Vec3::new(-1.0, -1.0, -1.0));
        assert_eq!(l.position(4, 4, 4), Vec3::new(1.0, 1.0, 1.0));
        for idx in 0..l.num_nodes() {
            let (i, j, k) = l.coords(idx);
            assert_eq!(l.index(i, j, k), idx);
        }
        let g = l.to_grid(l.position(1, 2, 3));
        assert!((g[0] - 1.0).abs() < 1e-12 && (g[1] - 2.0).abs() < 1e-12 && (g[2] - 3.0).abs() < 1e-12);
    }
}
