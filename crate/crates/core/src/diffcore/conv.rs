//! 2D/3D cross-correlation via im2col + GEMM.
//!
//! Both ops share one implementation: a 2D convolution is a 3D convolution
//! with unit depth and a depth-1 kernel.

use super::{gemm, shape_err, Array, DiffError, Tape, Var};
use crate::exec;
use crate::Real;

#[derive(Clone, Copy, Debug)]
struct Geom {
    cin: usize,
    cout: usize,
    inp: [usize; 3],
    ker: [usize; 3],
    pad: [usize; 3],
    stride: usize,
    out: [usize; 3],
}

impl Geom {
    fn k(&self) -> usize {
        self.cin * self.ker.iter().product::<usize>()
    }
    fn p(&self) -> usize {
        self.out.iter().product()
    }
    fn in_len(&self) -> usize {
        self.cin * self.inp.iter().product::<usize>()
    }
}

fn make_geom(
    op: &'static str,
    cin: usize,
    inp: [usize; 3],
    wshape: (usize, usize, [usize; 3]),
    stride: usize,
    pad: [usize; 3],
) -> Result<Geom, DiffError> {
    let (cout, wcin, ker) = wshape;
    if wcin != cin {
        return Err(shape_err(
            op,
            format!("input has {cin} channels, weights expect {wcin}"),
        ));
    }
    if stride == 0 {
        return Err(DiffError::Invalid {
            op,
            detail: "stride must be positive".into(),
        });
    }
    let mut out = [0; 3];
    for a in 0..3 {
        let span = inp[a] + 2 * pad[a];
        if span < ker[a] {
            return Err(shape_err(
                op,
                format!(
                    "kernel extent {} exceeds padded input extent {} on axis {a}",
                    ker[a], span
                ),
            ));
        }
        out[a] = (span - ker[a]) / stride + 1;
    }
    Ok(Geom {
        cin,
        cout,
        inp,
        ker,
        pad,
        stride,
        out,
    })
}

fn im2col(x: &[Real], g: &Geom) -> Vec<Real> {
    let p = g.p();
    let mut cols = vec![0.0; g.k() * p];
    let [id, ih, iw] = g.inp;
    let [kd, kh, kw] = g.ker;
    let [od, oh, ow] = g.out;
    exec::for_each_chunk_mut(&mut cols, p, |row, dst| {
        let kx = row % kw;
        let ky = (row / kw) % kh;
        let kz = (row / (kw * kh)) % kd;
        let c = row / (kw * kh * kd);
        let src = &x[c * id * ih * iw..(c + 1) * id * ih * iw];
        let mut o = 0;
        for z in 0..od {
            let sz = (z * g.stride + kz) as isize - g.pad[0] as isize;
            for y in 0..oh {
                let sy = (y * g.stride + ky) as isize - g.pad[1] as isize;
                for xo in 0..ow {
                    let sx = (xo * g.stride + kx) as isize - g.pad[2] as isize;
                    dst[o] = if sz >= 0
                        && sy >= 0
                        && sx >= 0
                        && (sz as usize) < id
                        && (sy as usize) < ih
                        && (sx as usize) < iw
                    {
                        src[(sz as usize * ih + sy as usize) * iw + sx as usize]
                    } else {
                        0.0
                    };
                    o += 1;
                }
            }
        }
    });
    cols
}

fn col2im(cols: &[Real], g: &Geom) -> Vec<Real> {
    let [id, ih, iw] = g.inp;
    let [kd, kh, kw] = g.ker;
    let [od, oh, ow] = g.out;
    let p = g.p();
    let per_c = kd * kh * kw;
    let mut dx = vec![0.0; g.in_len()];
    exec::for_each_chunk_mut(&mut dx, id * ih * iw, |c, dst| {
        for kr in 0..per_c {
            let row = c * per_c + kr;
            let kx = kr % kw;
            let ky = (kr / kw) % kh;
            let kz = kr / (kw * kh);
            let src = &cols[row * p..(row + 1) * p];
            let mut o = 0;
            for z in 0..od {
                let sz = (z * g.stride + kz) as isize - g.pad[0] as isize;
                for y in 0..oh {
                    let sy = (y * g.stride + ky) as isize - g.pad[1] as isize;
                    for xo in 0..ow {
                        let sx = (xo * g.stride + kx) as isize - g.pad[2] as isize;
                        if sz >= 0
                            && sy >= 0
                            && sx >= 0
                            && (sz as usize) < id
                            && (sy as usize) < ih
                            && (sx as usize) < iw
                        {
                            dst[(sz as usize * ih + sy as usize) * iw + sx as usize] += src[o];
                        }
                        o += 1;
                    }
                }
            }
        }
    });
    dx
}

fn forward(x: &[Real], w: &[Real], b: Option<&[Real]>, g: &Geom) -> (Vec<Real>, Vec<Real>) {
    let cols = im2col(x, g);
    let p = g.p();
    let mut out = vec![0.0; g.cout * p];
    if let Some(b) = b {
        for (co, row) in out.chunks_mut(p).enumerate() {
            row.fill(b[co]);
        }
    }
    let beta = if b.is_some() { 1.0 } else { 0.0 };
    gemm(g.cout, g.k(), p, 1.0, w, false, &cols, false, beta, &mut out);
    (out, cols)
}

/// Raw 3D convolution without recording. Input `[cin, d, h, w]`, weights
/// `[cout, cin, kd, kh, kw]`.
pub fn conv3d_forward(
    x: &Array,
    w: &Array,
    b: Option<&Array>,
    stride: usize,
    padding: usize,
) -> Result<Array, DiffError> {
    let g = geom3(x.shape(), w.shape(), stride, padding)?;
    let (out, _) = forward(x.data(), w.data(), b.map(|b| b.data()), &g);
    Array::new(vec![g.cout, g.out[0], g.out[1], g.out[2]], out)
}

/// Raw 2D convolution without recording. Input `[cin, h, w]`, weights
/// `[cout, cin, kh, kw]`.
pub fn conv2d_forward(
    x: &Array,
    w: &Array,
    b: Option<&Array>,
    stride: usize,
    padding: usize,
) -> Result<Array, DiffError> {
    let g = geom2(x.shape(), w.shape(), stride, padding)?;
    let (out, _) = forward(x.data(), w.data(), b.map(|b| b.data()), &g);
    Array::new(vec![g.cout, g.out[1], g.out[2]], out)
}

fn geom2(xs: &[usize], ws: &[usize], stride: usize, padding: usize) -> Result<Geom, DiffError> {
    if xs.len() != 3 || ws.len() != 4 {
        return Err(shape_err(
            "conv2d",
            format!("expected input [C,H,W] and weights [O,C,k,k], got {xs:?} and {ws:?}"),
        ));
    }
    make_geom(
        "conv2d",
        xs[0],
        [1, xs[1], xs[2]],
        (ws[0], ws[1], [1, ws[2], ws[3]]),
        stride,
        [0, padding, padding],
    )
}

fn geom3(
    xs: &[usize],
    ws: &[usize],
    stride: usize,
    padding: usize,
) -> Result<Geom, DiffError> {
    if xs.len() != 4 || ws.len() != 5 {
        return Err(shape_err(
            "conv3d",
            format!("expected input [C,D,H,W] and weights [O,C,k,k,k], got {xs:?} and {ws:?}"),
        ));
    }
    make_geom(
        "conv3d",
        xs[0],
        [xs[1], xs[2], xs[3]],
        (ws[0], ws[1], [ws[2], ws[3], ws[4]]),
        stride,
        [padding; 3],
    )
}

impl Tape {
    fn conv_record(
        &mut self,
        x: Var,
        w: Var,
        b: Option<Var>,
        g: Geom,
        out_shape: Vec<usize>,
    ) -> Result<Var, DiffError> {
        if let Some(b) = b {
            if self.shape(b) != [g.cout] {
                return Err(shape_err(
                    "conv",
                    format!("bias shape {:?}, expected [{}]", self.shape(b), g.cout),
                ));
            }
        }
        let wv = self.shared(w);
        let bv = b.map(|b| self.shared(b));
        let (out, cols) = forward(self.value(x).data(), wv.data(), bv.as_ref().map(|b| b.data()), &g);
        let out = Array::new(out_shape, out)?;
        let mut parents = vec![x, w];
        if let Some(b) = b {
            parents.push(b);
        }
        let need_x = self.requires_grad(x);
        let need_w = self.requires_grad(w);
        let has_b = b.is_some();
        Ok(self.custom(&parents, out, move |dout| {
            let p = g.p();
            let k = g.k();
            let dx = need_x.then(|| {
                let mut dcols = vec![0.0; k * p];
                gemm(k, g.cout, p, 1.0, wv.data(), true, dout, false, 0.0, &mut dcols);
                col2im(&dcols, &g)
            });
            let dw = need_w.then(|| {
                let mut dw = vec![0.0; g.cout * k];
                gemm(g.cout, p, k, 1.0, dout, false, &cols, true, 0.0, &mut dw);
                dw
            });
            let mut grads = vec![dx, dw];
            if has_b {
                grads.push(Some(dout.chunks(p).map(|r| r.iter().sum()).collect()));
            }
            grads
        }))
    }

    /// Cross-correlation of `x: [C_in, H, W]` with `w: [C_out, C_in, kh, kw]`.
    pub fn conv2d(
        &mut self,
        x: Var,
        w: Var,
        b: Option<Var>,
        stride: usize,
        padding: usize,
    ) -> Result<Var, DiffError> {
        let g = geom2(self.shape(x), self.shape(w), stride, padding)?;
        self.conv_record(x, w, b, g, vec![g.cout, g.out[1], g.out[2]])
    }

    /// Cross-correlation of `x: [C_in, D, H, W]` with
    /// `w: [C_out, C_in, kd, kh, kw]`.
    pub fn conv3d(
        &mut self,
        x: Var,
        w: Var,
        b: Option<Var>,
        stride: usize,
        padding: usize,
    ) -> Result<Var, DiffError> {
        let g = geom3(self.shape(x), self.shape(w), stride, padding)?;
        self.conv_record(x, w, b, g, vec![g.cout, g.out[0], g.out[1], g.out[2]])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::gradcheck::check_gradients;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rand_array(shape: &[usize], rng: &mut ChaCha8Rng) -> Array {
        let n = shape.iter().product();
        Array::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    // Direct nested-loop correlation, the oracle for the GEMM path.
    fn direct_conv2d(x: &Array, w: &Array, stride: usize, pad: usize) -> Array {
        let (c, h, wd) = (x.shape()[0], x.shape()[1], x.shape()[2]);
        let (o, k) = (w.shape()[0], w.shape()[2]);
        let oh = (h + 2 * pad - k) / stride + 1;
        let ow = (wd + 2 * pad - k) / stride + 1;
        let mut out = Array::zeros(&[o, oh, ow]);
        for oc in 0..o {
            for y in 0..oh {
                for xx in 0..ow {
                    let mut s = 0.0;
                    for ic in 0..c {
                        for ky in 0..k {
                            for kx in 0..k {
                                let sy = (y * stride + ky) as isize - pad as isize;
                                let sx = (xx * stride + kx) as isize - pad as isize;
                                if sy < 0 || sx < 0 || sy >= h as isize || sx >= wd as isize {
                                    continue;
                                }
                                s += x.data()[(ic * h + sy as usize) * wd + sx as usize]
                                    * w.data()[((oc * c + ic) * k + ky) * k + kx];
                            }
                        }
                    }
                    out.data_mut()[(oc * oh + y) * ow + xx] = s;
                }
            }
        }
        out
    }

    #[test]
    fn identity_kernel_2d() {
        let x = Array::new(vec![1, 3, 3], (0..9).map(|i| i as Real).collect()).unwrap();
        let w = Array::new(vec![1, 1, 1, 1], vec![1.0]).unwrap();
        let y = conv2d_forward(&x, &w, None, 1, 0).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn all_ones_2x2() {
        let x = Array::new(vec![1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let w = Array::full(&[1, 1, 2, 2], 1.0);
        let y = conv2d_forward(&x, &w, None, 1, 0).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1]);
        assert_eq!(y.data(), &[10.0]);
    }

    #[test]
    fn identity_kernel_3d() {
        let x = Array::new(vec![1, 2, 3, 2], (0..12).map(|i| i as Real * 0.5).collect()).unwrap();
        let w = Array::new(vec![1, 1, 1, 1, 1], vec![1.0]).unwrap();
        let y = conv3d_forward(&x, &w, None, 1, 0).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn all_ones_cube_3d() {
        let x = Array::full(&[1, 2, 2, 2], 1.0);
        let w = Array::full(&[1, 1, 2, 2, 2], 1.0);
        let y = conv3d_forward(&x, &w, None, 1, 0).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1, 1]);
        assert_eq!(y.data(), &[8.0]);
    }

    #[test]
    fn gemm_path_matches_direct_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &(stride, pad) in &[(1, 1), (2, 1), (1, 0), (2, 0)] {
            let x = rand_array(&[3, 7, 6], &mut rng);
            let w = rand_array(&[4, 3, 3, 3], &mut rng);
            let a = conv2d_forward(&x, &w, None, stride, pad).unwrap();
            let b = direct_conv2d(&x, &w, stride, pad);
            assert_eq!(a.shape(), b.shape());
            assert!(a.max_abs_diff(&b) < 1e-12);
        }
    }

    #[test]
    fn shape_mismatch_reported() {
        let x = Array::zeros(&[2, 4, 4]);
        let w = Array::zeros(&[1, 3, 3, 3]);
        let err = conv2d_forward(&x, &w, None, 1, 1).unwrap_err();
        assert!(err.to_string().contains("2 channels"));
    }

    #[test]
    fn conv2d_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let x = rand_array(&[2, 5, 5], &mut rng);
        let w = rand_array(&[3, 2, 3, 3], &mut rng);
        let b = rand_array(&[3], &mut rng);
        let r = rand_array(&[3, 3, 3], &mut rng);
        check_gradients(&[x, w, b], 1e-6, 1e-5, move |t, v| {
            let y = t.conv2d(v[0], v[1], Some(v[2]), 2, 1).unwrap();
            let rc = t.constant(r.clone());
            let p = t.mul(y, rc).unwrap();
            t.sum(p)
        })
        .unwrap();
    }

    #[test]
    fn conv3d_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let x = rand_array(&[2, 4, 3, 4], &mut rng);
        let w = rand_array(&[2, 2, 3, 3, 3], &mut rng);
        let b = rand_array(&[2], &mut rng);
        let r = rand_array(&[2, 4, 3, 4], &mut rng);
        check_gradients(&[x, w, b], 1e-6, 1e-5, move |t, v| {
            let y = t.conv3d(v[0], v[1], Some(v[2]), 1, 1).unwrap();
            let rc = t.constant(r.clone());
            let p = t.mul(y, rc).unwrap();
            t.sum(p)
        })
        .unwrap();
    }
}
