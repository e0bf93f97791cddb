//! Per-view loss terms as tape ops. Every op takes the ground-truth map as a
//! node too, so gradients w.r.t. targets can be inspected.

use super::msssim::ms_ssim_grad;
use super::LossError;
use crate::{Array, Real, Tape, Var};

fn same_len(tape: &Tape, op: &'static str, a: Var, b: Var) -> Result<(), LossError> {
    if tape.shape(a) != tape.shape(b) {
        return Err(LossError::Shape {
            op,
            detail: format!("{:?} vs {:?}", tape.shape(a), tape.shape(b)),
        });
    }
    Ok(())
}

/// Pixels where both the ground-truth mask and the predicted coverage are on.
pub fn valid_pixels(pred_faceid: &[i32], gt_mask: &[Real]) -> Vec<bool> {
    pred_faceid.iter().zip(gt_mask).map(|(&f, &m)| f >= 0 && m > 0.5).collect()
}

/// Mean of `|d - gt| / (gt - d_min)` over valid pixels. Returns the node and
/// whether the valid set was empty (loss 0).
pub fn depth_loss(tape: &mut Tape, d: Var, gt: Var, valid: &[bool], d_min: Real) -> Result<(Var, bool), LossError> {
    same_len(tape, "depth_loss", d, gt)?;
    if valid.len() != tape.value(d).len() {
        return Err(LossError::Shape { op: "depth_loss", detail: "valid mask length".into() });
    }
    let dv = tape.value(d).data();
    let gv = tape.value(gt).data();
    let idx: Vec<usize> = (0..valid.len()).filter(|&p| valid[p]).collect();
    for &p in &idx {
        if !(gv[p] > d_min) {
            return Err(LossError::DepthBelowMin { pixel: p, depth: gv[p] as f64, d_min: d_min as f64 });
        }
    }
    let n = dv.len();
    let inv = 1.0 / idx.len().max(1) as Real;
    // Per-pixel partials w.r.t. d and gt.
    let mut terms = Vec::with_capacity(idx.len());
    let mut total = 0.0;
    for &p in &idx {
        let den = gv[p] - d_min;
        let r = dv[p] - gv[p];
        total += r.abs() / den;
        let s = if r > 0.0 {
            1.0
        } else if r < 0.0 {
            -1.0
        } else {
            0.0
        };
        // d/dgt of |d - gt| / (gt - d_min).
        let dg = -s / den - r.abs() / (den * den);
        terms.push((p, s / den * inv, dg * inv));
    }
    let empty = idx.is_empty();
    let node = tape.custom(&[d, gt], Array::scalar(total * inv), move |g| {
        let mut gd = vec![0.0; n];
        let mut gg = vec![0.0; n];
        for &(p, a, b) in &terms {
            gd[p] = a * g[0];
            gg[p] = b * g[0];
        }
        vec![Some(gd), Some(gg)]
    });
    Ok((node, empty))
}

/// Mean of `1 - |n . gt|` over valid pixels of `[3, H, W]` maps.
pub fn normal_loss(tape: &mut Tape, n: Var, gt: Var, valid: &[bool]) -> Result<(Var, bool), LossError> {
    same_len(tape, "normal_loss", n, gt)?;
    let len = tape.value(n).len();
    let hw = valid.len();
    if len != 3 * hw {
        return Err(LossError::Shape { op: "normal_loss", detail: format!("{len} values for {hw} pixels") });
    }
    let nv = tape.shared(n);
    let gv = tape.shared(gt);
    let idx: Vec<usize> = (0..hw).filter(|&p| valid[p]).collect();
    let at = |a: &Array, p: usize| [a.data()[p], a.data()[hw + p], a.data()[2 * hw + p]];
    let mut total = 0.0;
    let mut signs = Vec::with_capacity(idx.len());
    for &p in &idx {
        let (a, b) = (at(&nv, p), at(&gv, p));
        for v in [a, b] {
            let norm = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if (norm - 1.0).abs() > 1e-3 {
                return Err(LossError::NonUnitNormal { pixel: p, norm: norm as f64 });
            }
        }
        let dot = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
        total += 1.0 - dot.abs();
        signs.push(if dot > 0.0 {
            1.0
        } else if dot < 0.0 {
            -1.0
        } else {
            0.0
        });
    }
    let inv = 1.0 / idx.len().max(1) as Real;
    let empty = idx.is_empty();
    let node = tape.custom(&[n, gt], Array::scalar(total * inv), move |g| {
        let mut gn = vec![0.0; len];
        let mut gg = vec![0.0; len];
        for (&p, &s) in idx.iter().zip(&signs) {
            let k = -s * inv * g[0];
            for c in 0..3 {
                gn[c * hw + p] = k * gv.data()[c * hw + p];
                gg[c * hw + p] = k * nv.data()[c * hw + p];
            }
        }
        vec![Some(gn), Some(gg)]
    });
    Ok((node, empty))
}

/// Mean squared difference over all pixels.
pub fn mask_loss(tape: &mut Tape, m: Var, gt: Var) -> Result<Var, LossError> {
    same_len(tape, "mask_loss", m, gt)?;
    let diff = tape.sub(m, gt)?;
    let sq = tape.mul(diff, diff)?;
    Ok(tape.mean(sq))
}

/// `1 - MS-SSIM` of `[3, H, W]` normal maps mapped to `[0, 1]` by `(n + 1) / 2`.
pub fn structural_loss(tape: &mut Tape, n: Var, gt: Var) -> Result<Var, LossError> {
    same_len(tape, "structural_loss", n, gt)?;
    let shape = tape.shape(n).to_vec();
    if shape.len() != 3 || shape[0] != 3 {
        return Err(LossError::Shape { op: "structural_loss", detail: format!("expected [3, H, W], got {shape:?}") });
    }
    let (h, w) = (shape[1], shape[2]);
    let x: Vec<Real> = tape.value(n).data().iter().map(|v| 0.5 * (v + 1.0)).collect();
    let y: Vec<Real> = tape.value(gt).data().iter().map(|v| 0.5 * (v + 1.0)).collect();
    let (value, gx, gy) = ms_ssim_grad(&x, &y, 3, h, w);
    Ok(tape.custom(&[n, gt], Array::scalar(1.0 - value), move |g| {
        let k = -0.5 * g[0];
        vec![Some(gx.iter().map(|v| k * v).collect()), Some(gy.iter().map(|v| k * v).collect())]
    }))
}
