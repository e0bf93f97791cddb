//! SSIM and multi-scale SSIM with analytic gradients.
//!
//! Images are planar `[C, H, W]` with values in `[0, 1]`. Statistics use a
//! separable Gaussian window (11 taps, sigma 1.5) in valid mode; scales are
//! linked by 2x2 average pooling. Per-scale contrast-structure means are
//! clamped at zero before the weighted geometric product, so strongly
//! anticorrelated maps score 0 rather than NaN.

use crate::Real;

pub const SSIM_C1: Real = 0.01 * 0.01;
pub const SSIM_C2: Real = 0.03 * 0.03;
pub const WINDOW: usize = 11;
pub const SIGMA: Real = 1.5;
pub const SCALES: usize = 3;
/// Leading three of the standard five-scale exponents, renormalised.
const RAW_WEIGHTS: [Real; SCALES] = [0.0448, 0.2856, 0.3001];

fn scale_weights() -> [Real; SCALES] {
    let s: Real = RAW_WEIGHTS.iter().sum();
    RAW_WEIGHTS.map(|w| w / s)
}

/// Normalised 1-D Gaussian taps.
pub fn gaussian_window(size: usize, sigma: Real) -> Vec<Real> {
    let c = (size as Real - 1.0) / 2.0;
    let g: Vec<Real> = (0..size).map(|i| (-((i as Real - c).powi(2)) / (2.0 * sigma * sigma)).exp()).collect();
    let s: Real = g.iter().sum();
    g.into_iter().map(|v| v / s).collect()
}

/// Window length used for an `h x w` image: 11, or the largest odd size
/// that fits.
fn window_for(h: usize, w: usize) -> usize {
    let m = h.min(w).min(WINDOW);
    if m % 2 == 0 {
        m - 1
    } else {
        m
    }
}

fn blur(img: &[Real], h: usize, w: usize, g: &[Real]) -> Vec<Real> {
    let k = g.len();
    let (oh, ow) = (h + 1 - k, w + 1 - k);
    let mut tmp = vec![0.0; h * ow];
    for y in 0..h {
        let row = &img[y * w..(y + 1) * w];
        let dst = &mut tmp[y * ow..(y + 1) * ow];
        for (j, gj) in g.iter().enumerate() {
            for (d, s) in dst.iter_mut().zip(&row[j..j + ow]) {
                *d += gj * s;
            }
        }
    }
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for (j, gj) in g.iter().enumerate() {
            let src = &tmp[(y + j) * ow..(y + j + 1) * ow];
            for (o, s) in out[y * ow..(y + 1) * ow].iter_mut().zip(src) {
                *o += gj * s;
            }
        }
    }
    out
}

/// Adjoint of [`blur`].
fn blur_t(grad: &[Real], h: usize, w: usize, g: &[Real]) -> Vec<Real> {
    let k = g.len();
    let (oh, ow) = (h + 1 - k, w + 1 - k);
    let mut tmp = vec![0.0; h * ow];
    for y in 0..oh {
        for (j, gj) in g.iter().enumerate() {
            let dst = &mut tmp[(y + j) * ow..(y + j + 1) * ow];
            for (d, s) in dst.iter_mut().zip(&grad[y * ow..(y + 1) * ow]) {
                *d += gj * s;
            }
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        let src = &tmp[y * ow..(y + 1) * ow];
        let dst = &mut out[y * w..(y + 1) * w];
        for (j, gj) in g.iter().enumerate() {
            for (d, s) in dst[j..j + ow].iter_mut().zip(src) {
                *d += gj * s;
            }
        }
    }
    out
}

fn pool(img: &[Real], h: usize, w: usize) -> Vec<Real> {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = vec![0.0; oh * ow];
    for y in 0..oh {
        for x in 0..ow {
            let i = 2 * y * w + 2 * x;
            out[y * ow + x] = 0.25 * (img[i] + img[i + 1] + img[i + w] + img[i + w + 1]);
        }
    }
    out
}

fn pool_t(grad: &[Real], h: usize, w: usize) -> Vec<Real> {
    let (oh, ow) = (h / 2, w / 2);
    let mut out = vec![0.0; h * w];
    for y in 0..oh {
        for x in 0..ow {
            let g = 0.25 * grad[y * ow + x];
            let i = 2 * y * w + 2 * x;
            out[i] += g;
            out[i + 1] += g;
            out[i + w] += g;
            out[i + w + 1] += g;
        }
    }
    out
}

struct ScaleStats {
    /// Mean contrast-structure term.
    mcs: Real,
    /// Mean full SSIM (luminance x contrast-structure).
    mssim: Real,
    grads: Option<[Vec<Real>; 2]>,
}

/// Which per-scale factor gradients are wanted for.
#[derive(Clone, Copy, PartialEq)]
enum Want {
    Nothing,
    /// d mcs/dx, d mcs/dy
    Cs,
    /// d mssim/dx, d mssim/dy
    Full,
}

/// Statistics at one scale, with the gradients selected by `want`.
fn scale_stats(x: &[Real], y: &[Real], h: usize, w: usize, want: Want) -> ScaleStats {
    let g = gaussian_window(window_for(h, w), SIGMA);
    let xx: Vec<Real> = x.iter().map(|v| v * v).collect();
    let yy: Vec<Real> = y.iter().map(|v| v * v).collect();
    let xy: Vec<Real> = x.iter().zip(y).map(|(a, b)| a * b).collect();
    let a = blur(x, h, w, &g);
    let b = blur(y, h, w, &g);
    let sxx = blur(&xx, h, w, &g);
    let syy = blur(&yy, h, w, &g);
    let sxy = blur(&xy, h, w, &g);
    let n = a.len();
    let inv_n = 1.0 / n as Real;
    let (mut mcs, mut mssim) = (0.0, 0.0);
    let grad = want != Want::Nothing;
    // Per-output partials of the wanted factor w.r.t. (A, B, Sxx, Syy, Sxy).
    let mut part = if grad { vec![[0.0; 5]; n] } else { Vec::new() };
    for p in 0..n {
        let (ma, mb) = (a[p], b[p]);
        let vx = sxx[p] - ma * ma;
        let vy = syy[p] - mb * mb;
        let cov = sxy[p] - ma * mb;
        let d = vx + vy + SSIM_C2;
        let cs = (2.0 * cov + SSIM_C2) / d;
        let q = ma * ma + mb * mb + SSIM_C1;
        let l = (2.0 * ma * mb + SSIM_C1) / q;
        mcs += cs;
        mssim += l * cs;
        if grad {
            let dcs = [(2.0 * ma * cs - 2.0 * mb) / d, (2.0 * mb * cs - 2.0 * ma) / d, -cs / d, -cs / d, 2.0 / d];
            let dl_a = (2.0 * mb - 2.0 * ma * l) / q;
            let dl_b = (2.0 * ma - 2.0 * mb * l) / q;
            part[p] = if want == Want::Cs {
                dcs.map(|v| v * inv_n)
            } else {
                [
                    (dl_a * cs + l * dcs[0]) * inv_n,
                    (dl_b * cs + l * dcs[1]) * inv_n,
                    l * dcs[2] * inv_n,
                    l * dcs[3] * inv_n,
                    l * dcs[4] * inv_n,
                ]
            };
        }
    }
    let grads = grad.then(|| {
        let ch = |k: usize| blur_t(&part.iter().map(|v| v[k]).collect::<Vec<_>>(), h, w, &g);
        let (ga, gb, gxx, gyy, gxy) = (ch(0), ch(1), ch(2), ch(3), ch(4));
        let gx: Vec<Real> = (0..h * w).map(|i| ga[i] + 2.0 * x[i] * gxx[i] + y[i] * gxy[i]).collect();
        let gy: Vec<Real> = (0..h * w).map(|i| gb[i] + 2.0 * y[i] * gyy[i] + x[i] * gxy[i]).collect();
        [gx, gy]
    });
    ScaleStats { mcs: mcs * inv_n, mssim: mssim * inv_n, grads }
}

/// Number of dyadic scales used for an `h x w` image.
pub fn scales_for(h: usize, w: usize) -> usize {
    if (h.min(w) >> (SCALES - 1)) >= WINDOW {
        SCALES
    } else {
        1
    }
}

fn ms_ssim_channel(x: &[Real], y: &[Real], h: usize, w: usize, grad: bool) -> (Real, Option<(Vec<Real>, Vec<Real>)>) {
    let m = scales_for(h, w);
    let weights: Vec<Real> = if m == 1 { vec![1.0] } else { scale_weights().to_vec() };
    let mut dims = vec![(h, w)];
    let mut stats = Vec::with_capacity(m);
    let (mut xs, mut ys) = (x.to_vec(), y.to_vec());
    for j in 0..m {
        let (hj, wj) = dims[j];
        let want = match (grad, j + 1 < m) {
            (false, _) => Want::Nothing,
            (true, true) => Want::Cs,
            (true, false) => Want::Full,
        };
        stats.push(scale_stats(&xs, &ys, hj, wj, want));
        if j + 1 < m {
            xs = pool(&xs, hj, wj);
            ys = pool(&ys, hj, wj);
            dims.push((hj / 2, wj / 2));
        }
    }
    let factors: Vec<Real> = (0..m)
        .map(|j| if j + 1 < m { stats[j].mcs } else { stats[j].mssim }.max(0.0))
        .collect();
    let value: Real = factors.iter().zip(&weights).map(|(f, b)| f.powf(*b)).product();
    if !grad {
        return (value, None);
    }
    if value == 0.0 {
        return (value, Some((vec![0.0; h * w], vec![0.0; h * w])));
    }
    let (mut gx, mut gy): (Vec<Real>, Vec<Real>) = (Vec::new(), Vec::new());
    for j in (0..m).rev() {
        let (hj, wj) = dims[j];
        let [sx, sy] = stats[j].grads.as_ref().expect("gradients requested");
        let k = value * weights[j] / factors[j];
        let mut tx: Vec<Real> = sx.iter().map(|v| k * v).collect();
        let mut ty: Vec<Real> = sy.iter().map(|v| k * v).collect();
        if j + 1 < m {
            let ux = pool_t(&gx, hj, wj);
            let uy = pool_t(&gy, hj, wj);
            tx.iter_mut().zip(ux).for_each(|(a, b)| *a += b);
            ty.iter_mut().zip(uy).for_each(|(a, b)| *a += b);
        }
        gx = tx;
        gy = ty;
    }
    (value, Some((gx, gy)))
}

fn check(x: &[Real], y: &[Real], c: usize, h: usize, w: usize) {
    assert_eq!(x.len(), c * h * w, "image size");
    assert_eq!(y.len(), c * h * w, "image size");
}

/// MS-SSIM averaged over channels.
pub fn ms_ssim(x: &[Real], y: &[Real], channels: usize, h: usize, w: usize) -> Real {
    check(x, y, channels, h, w);
    let n = h * w;
    (0..channels)
        .map(|c| ms_ssim_channel(&x[c * n..(c + 1) * n], &y[c * n..(c + 1) * n], h, w, false).0)
        .sum::<Real>()
        / channels as Real
}

/// MS-SSIM with its gradients w.r.t. both images.
pub fn ms_ssim_grad(x: &[Real], y: &[Real], channels: usize, h: usize, w: usize) -> (Real, Vec<Real>, Vec<Real>) {
    check(x, y, channels, h, w);
    let n = h * w;
    let inv = 1.0 / channels as Real;
    let (mut total, mut gx, mut gy) = (0.0, Vec::with_capacity(x.len()), Vec::with_capacity(x.len()));
    for c in 0..channels {
        let (v, g) = ms_ssim_channel(&x[c * n..(c + 1) * n], &y[c * n..(c + 1) * n], h, w, true);
        let (a, b) = g.expect("gradients requested");
        total += v * inv;
        gx.extend(a.into_iter().map(|v| v * inv));
        gy.extend(b.into_iter().map(|v| v * inv));
    }
    (total, gx, gy)
}

/// Single-scale mean SSIM averaged over channels.
pub fn ssim(x: &[Real], y: &[Real], channels: usize, h: usize, w: usize) -> Real {
    check(x, y, channels, h, w);
    let n = h * w;
    (0..channels)
        .map(|c| scale_stats(&x[c * n..(c + 1) * n], &y[c * n..(c + 1) * n], h, w, Want::Nothing).mssim)
        .sum::<Real>()
        / channels as Real
}
