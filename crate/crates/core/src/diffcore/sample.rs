//! Bilinear and trilinear sampling.
//!
//! Image convention: texel `(i, j)` (column, row) covers `[i, i+1) x [j, j+1)`
//! and its center sits at `(i + 0.5, j + 0.5)`. Queries outside `[0, W) x
//! [0, H)` return [`OUT_OF_VIEW`]; inside the image, taps beyond the outermost
//! centers clamp to the border texel.
//!
//! Grid convention: node `(x, y, z)` sits at integer coordinates; a grid
//! `[C, D, H, W]` is indexed `z` along `D`, `y` along `H`, `x` along `W`.
//! Queries outside `[0, W-1] x [0, H-1] x [0, D-1]` return [`OUT_OF_VIEW`].

use super::{shape_err, Array, DiffError, Tape, Var};
use crate::Real;

/// Value returned for samples that fall outside the map or grid.
pub const OUT_OF_VIEW: Real = 0.0;

/// One interpolation tap: flat spatial index, weight, and the weight's
/// derivatives with respect to each query coordinate.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Tap<const D: usize> {
    pub idx: usize,
    pub w: Real,
    pub dw: [Real; D],
}

pub(crate) fn bilinear_taps(h: usize, w: usize, u: Real, v: Real) -> Option<[Tap<2>; 4]> {
    if !(u >= 0.0 && u < w as Real && v >= 0.0 && v < h as Real) {
        return None;
    }
    let x = u - 0.5;
    let y = v - 0.5;
    let x0 = x.floor();
    let y0 = y.floor();
    let fx = x - x0;
    let fy = y - y0;
    let clampi = |i: Real, n: usize| (i.max(0.0) as usize).min(n - 1);
    let xi0 = clampi(x0, w);
    let xi1 = clampi(x0 + 1.0, w);
    let yi0 = clampi(y0, h);
    let yi1 = clampi(y0 + 1.0, h);
    Some([
        Tap {
            idx: yi0 * w + xi0,
            w: (1.0 - fx) * (1.0 - fy),
            dw: [-(1.0 - fy), -(1.0 - fx)],
        },
        Tap {
            idx: yi0 * w + xi1,
            w: fx * (1.0 - fy),
            dw: [1.0 - fy, -fx],
        },
        Tap {
            idx: yi1 * w + xi0,
            w: (1.0 - fx) * fy,
            dw: [-fy, 1.0 - fx],
        },
        Tap {
            idx: yi1 * w + xi1,
            w: fx * fy,
            dw: [fy, fx],
        },
    ])
}

fn axis_split(x: Real, n: usize) -> (usize, Real) {
    // Node n-1 is reached from the left cell with fraction 1.
    if n == 1 {
        return (0, 0.0);
    }
    let i = (x.floor() as usize).min(n - 2);
    (i, x - i as Real)
}

pub(crate) fn trilinear_taps(dims: [usize; 3], p: [Real; 3]) -> Option<[Tap<3>; 8]> {
    let [d, h, w] = dims;
    let [x, y, z] = p;
    let inside = |c: Real, n: usize| c >= 0.0 && c <= (n - 1) as Real;
    if !(inside(x, w) && inside(y, h) && inside(z, d)) {
        return None;
    }
    let (xi, fx) = axis_split(x, w);
    let (yi, fy) = axis_split(y, h);
    let (zi, fz) = axis_split(z, d);
    let step = |n: usize| usize::from(n > 1);
    let (sx, sy, sz) = (step(w), step(h), step(d));
    let mut taps = [Tap {
        idx: 0,
        w: 0.0,
        dw: [0.0; 3],
    }; 8];
    for (k, tap) in taps.iter_mut().enumerate() {
        let (bx, by, bz) = (k & 1, (k >> 1) & 1, (k >> 2) & 1);
        let (wx, dx) = if bx == 1 { (fx, 1.0) } else { (1.0 - fx, -1.0) };
        let (wy, dy) = if by == 1 { (fy, 1.0) } else { (1.0 - fy, -1.0) };
        let (wz, dz) = if bz == 1 { (fz, 1.0) } else { (1.0 - fz, -1.0) };
        let ix = xi + bx * sx;
        let iy = yi + by * sy;
        let iz = zi + bz * sz;
        *tap = Tap {
            idx: (iz * h + iy) * w + ix,
            w: wx * wy * wz,
            dw: [dx * wy * wz, wx * dy * wz, wx * wy * dz],
        };
    }
    Some(taps)
}

/// Samples every channel of `map: [C, H, W]` at pixel coordinates `(u, v)`.
pub fn bilinear_at(map: &Array, u: Real, v: Real) -> Vec<Real> {
    let (c, h, w) = (map.shape()[0], map.shape()[1], map.shape()[2]);
    let plane = h * w;
    match bilinear_taps(h, w, u, v) {
        None => vec![OUT_OF_VIEW; c],
        Some(taps) => (0..c)
            .map(|ch| {
                taps.iter()
                    .map(|t| t.w * map.data()[ch * plane + t.idx])
                    .sum()
            })
            .collect(),
    }
}

/// Samples every channel of `grid: [C, D, H, W]` at grid coordinates
/// `(x, y, z)`.
pub fn trilinear_at(grid: &Array, p: [Real; 3]) -> Vec<Real> {
    let s = grid.shape();
    let (c, dims) = (s[0], [s[1], s[2], s[3]]);
    let vol = dims.iter().product::<usize>();
    match trilinear_taps(dims, p) {
        None => vec![OUT_OF_VIEW; c],
        Some(taps) => (0..c)
            .map(|ch| taps.iter().map(|t| t.w * grid.data()[ch * vol + t.idx]).sum())
            .collect(),
    }
}

impl Tape {
    /// Samples `map: [C, H, W]` at `uv: [N, 2]` pixel coordinates, giving
    /// `[N, C]`. Differentiable in both arguments.
    pub fn bilinear_sample(&mut self, map: Var, uv: Var) -> Result<Var, DiffError> {
        let ms = self.shape(map).to_vec();
        let us = self.shape(uv).to_vec();
        if ms.len() != 3 || us.len() != 2 || us[1] != 2 {
            return Err(shape_err(
                "bilinear_sample",
                format!("map {ms:?} (want [C,H,W]), uv {us:?} (want [N,2])"),
            ));
        }
        let (c, h, w) = (ms[0], ms[1], ms[2]);
        let n = us[0];
        let plane = h * w;
        let mv = self.shared(map);
        let uvv = self.value(uv).data();
        let taps: Vec<Option<[Tap<2>; 4]>> = (0..n)
            .map(|i| bilinear_taps(h, w, uvv[2 * i], uvv[2 * i + 1]))
            .collect();
        let mut out = vec![OUT_OF_VIEW; n * c];
        for (i, t) in taps.iter().enumerate() {
            if let Some(t) = t {
                for ch in 0..c {
                    out[i * c + ch] = t.iter().map(|t| t.w * mv.data()[ch * plane + t.idx]).sum();
                }
            }
        }
        let out = Array::new(vec![n, c], out)?;
        Ok(self.custom(&[map, uv], out, move |g| {
            let mut gm = vec![0.0; c * plane];
            let mut guv = vec![0.0; n * 2];
            for (i, t) in taps.iter().enumerate() {
                let Some(t) = t else { continue };
                for ch in 0..c {
                    let go = g[i * c + ch];
                    for tap in t {
                        gm[ch * plane + tap.idx] += go * tap.w;
                        let val = mv.data()[ch * plane + tap.idx];
                        guv[2 * i] += go * tap.dw[0] * val;
                        guv[2 * i + 1] += go * tap.dw[1] * val;
                    }
                }
            }
            vec![Some(gm), Some(guv)]
        }))
    }

    /// Resamples `x: [C, H, W]` to `[C, out_h, out_w]` with bilinear
    /// interpolation at the output texel centers.
    pub fn resize_bilinear(&mut self, x: Var, out_h: usize, out_w: usize) -> Result<Var, DiffError> {
        let s = self.shape(x).to_vec();
        if s.len() != 3 || out_h == 0 || out_w == 0 {
            return Err(shape_err("resize_bilinear", format!("input {s:?}")));
        }
        let (c, h, w) = (s[0], s[1], s[2]);
        if h == out_h && w == out_w {
            return self.reshape(x, &s);
        }
        let taps: Vec<[Tap<2>; 4]> = (0..out_h * out_w)
            .map(|o| {
                let (i, j) = (o / out_w, o % out_w);
                let u = (j as Real + 0.5) * w as Real / out_w as Real;
                let v = (i as Real + 0.5) * h as Real / out_h as Real;
                bilinear_taps(h, w, u, v).expect("resize samples stay inside the image")
            })
            .collect();
        let plane = h * w;
        let oplane = out_h * out_w;
        let xv = self.value(x).data();
        let mut out = vec![0.0; c * oplane];
        for ch in 0..c {
            for (o, t) in taps.iter().enumerate() {
                out[ch * oplane + o] = t.iter().map(|t| t.w * xv[ch * plane + t.idx]).sum();
            }
        }
        let out = Array::new(vec![c, out_h, out_w], out)?;
        Ok(self.custom(&[x], out, move |g| {
            let mut gx = vec![0.0; c * plane];
            for ch in 0..c {
                for (o, t) in taps.iter().enumerate() {
                    let go = g[ch * oplane + o];
                    for tap in t {
                        gx[ch * plane + tap.idx] += go * tap.w;
                    }
                }
            }
            vec![Some(gx)]
        }))
    }

    /// Samples `grid: [C, D, H, W]` at `xyz: [N, 3]` grid coordinates, giving
    /// `[N, C]`. Differentiable in both arguments.
    pub fn trilinear_interp(&mut self, grid: Var, xyz: Var) -> Result<Var, DiffError> {
        let gs = self.shape(grid).to_vec();
        let ps = self.shape(xyz).to_vec();
        if gs.len() != 4 || ps.len() != 2 || ps[1] != 3 {
            return Err(shape_err(
                "trilinear_interp",
                format!("grid {gs:?} (want [C,D,H,W]), xyz {ps:?} (want [N,3])"),
            ));
        }
        let c = gs[0];
        let dims = [gs[1], gs[2], gs[3]];
        let vol: usize = dims.iter().product();
        let n = ps[0];
        let gv = self.shared(grid);
        let pv = self.value(xyz).data();
        let taps: Vec<Option<[Tap<3>; 8]>> = (0..n)
            .map(|i| trilinear_taps(dims, [pv[3 * i], pv[3 * i + 1], pv[3 * i + 2]]))
            .collect();
        let mut out = vec![OUT_OF_VIEW; n * c];
        for (i, t) in taps.iter().enumerate() {
            if let Some(t) = t {
                for ch in 0..c {
                    out[i * c + ch] = t.iter().map(|t| t.w * gv.data()[ch * vol + t.idx]).sum();
                }
            }
        }
        let out = Array::new(vec![n, c], out)?;
        Ok(self.custom(&[grid, xyz], out, move |g| {
            let mut gg = vec![0.0; c * vol];
            let mut gp = vec![0.0; n * 3];
            for (i, t) in taps.iter().enumerate() {
                let Some(t) = t else { continue };
                for ch in 0..c {
                    let go = g[i * c + ch];
                    if go == 0.0 {
                        continue;
                    }
                    for tap in t {
                        gg[ch * vol + tap.idx] += go * tap.w;
                        let val = gv.data()[ch * vol + tap.idx];
                        for a in 0..3 {
                            gp[3 * i + a] += go * tap.dw[a] * val;
                        }
                    }
                }
            }
            vec![Some(gg), Some(gp)]
        }))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::gradcheck::check_gradients;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn pixel_center_returns_texel() {
        let map = Array::new(vec![1, 2, 3], (0..6).map(|i| i as Real).collect()).unwrap();
        for j in 0..2 {
            for i in 0..3 {
                let v = bilinear_at(&map, i as Real + 0.5, j as Real + 0.5);
                assert_eq!(v[0], (j * 3 + i) as Real);
            }
        }
    }

    #[test]
    fn block_midpoint_averages() {
        let map = Array::new(vec![1, 2, 2], vec![0.0, 1.0, 2.0, 3.0]).unwrap();
        assert_eq!(bilinear_at(&map, 1.0, 1.0)[0], 1.5);
    }

    #[test]
    fn outside_is_zero() {
        let map = Array::full(&[2, 4, 4], 5.0);
        assert_eq!(bilinear_at(&map, -0.1, 2.0), vec![0.0, 0.0]);
        assert_eq!(bilinear_at(&map, 2.0, 4.0), vec![0.0, 0.0]);
        // Border clamps inside the image.
        assert_eq!(bilinear_at(&map, 0.1, 3.9), vec![5.0, 5.0]);
    }

    #[test]
    fn node_and_cell_center() {
        let grid = Array::new(vec![1, 2, 2, 2], (0..8).map(|i| i as Real).collect()).unwrap();
        // node (x=1, y=0, z=1) -> index (1*2+0)*2+1 = 5
        assert_eq!(trilinear_at(&grid, [1.0, 0.0, 1.0])[0], 5.0);
        assert_eq!(trilinear_at(&grid, [0.5, 0.5, 0.5])[0], 3.5);
        assert_eq!(trilinear_at(&grid, [1.5, 0.5, 0.5])[0], 0.0);
    }

    #[test]
    fn bilinear_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let map = Array::new(vec![2, 5, 6], (0..60).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        // keep queries away from texel-center kinks
        let uv: Vec<Real> = (0..8)
            .flat_map(|_| {
                let u = rng.gen_range(0..6) as Real + 0.5 + rng.gen_range(0.1..0.9);
                let v = rng.gen_range(0..5) as Real + 0.5 + rng.gen_range(0.1..0.9);
                [u.min(5.99), v.min(4.99)]
            })
            .collect();
        let uv = Array::new(vec![8, 2], uv).unwrap();
        check_gradients(&[map, uv], 1e-6, 1e-5, |t, v| {
            let s = t.bilinear_sample(v[0], v[1]).unwrap();
            let sq = t.mul(s, s).unwrap();
            t.sum(sq)
        })
        .unwrap();
    }

    #[test]
    fn trilinear_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let grid = Array::new(vec![2, 3, 4, 3], (0..72).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let p: Vec<Real> = (0..6)
            .flat_map(|_| {
                [
                    rng.gen_range(0..2) as Real + rng.gen_range(0.1..0.9),
                    rng.gen_range(0..3) as Real + rng.gen_range(0.1..0.9),
                    rng.gen_range(0..2) as Real + rng.gen_range(0.1..0.9),
                ]
            })
            .collect();
        let p = Array::new(vec![6, 3], p).unwrap();
        check_gradients(&[grid, p], 1e-6, 1e-5, |t, v| {
            let s = t.trilinear_interp(v[0], v[1]).unwrap();
            let sq = t.mul(s, s).unwrap();
            t.sum(sq)
        })
        .unwrap();
    }

    #[test]
    fn resize_gradients_and_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = Array::new(vec![2, 4, 4], (0..32).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let r = Array::new(vec![2, 6, 6], (0..72).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        check_gradients(&[x.clone()], 1e-6, 1e-5, move |t, v| {
            let y = t.resize_bilinear(v[0], 6, 6).unwrap();
            let rc = t.constant(r.clone());
            let p = t.mul(y, rc).unwrap();
            t.sum(p)
        })
        .unwrap();
        let mut t = Tape::new();
        let xv = t.constant(x.clone());
        let y = t.resize_bilinear(xv, 4, 4).unwrap();
        assert_eq!(t.value(y), &x);
    }
}
