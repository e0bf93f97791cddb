//! Angle-dependent corruption of the generated views.
//!
//! Each non-reference image is resampled through a random similarity warp
//! plus a smooth elastic field, then its brightness is scaled. Magnitudes
//! grow with the angular distance from the reference view.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::sample::TrainingSample;
use super::SynthError;
use crate::geometry::ViewSet;
use crate::{Array, Real};

/// Pixel bounds below are stated for this image width and scale with it.
pub const REFERENCE_WIDTH: Real = 64.0;
pub const MAX_TRANSLATION_PX: Real = 4.0;
pub const MAX_ROTATION_DEG: Real = 3.0;
pub const MAX_SCALE: Real = 0.03;
pub const MAX_GAIN: Real = 0.10;
/// Mean displacement, in pixels at unit magnitude, after renormalisation.
pub const MEAN_DISPLACEMENT_PX: Real = 2.0;

/// Monotone map from angular distance (degrees) to `[0.3, 1]`.
pub fn angle_gain(angle_deg: Real) -> Real {
    let t = angle_deg.clamp(0.0, 180.0).to_radians();
    0.3 + 0.7 * (1.0 - t.cos()) / 2.0
}

#[derive(Clone, Debug, PartialEq)]
pub struct InconsistencyProfile {
    pub severity: Real,
    /// Angular distance of each view from the reference, in degrees.
    pub angles: Vec<Real>,
    pub warp: bool,
    pub elastic: bool,
    pub shading: bool,
    pub seed: u64,
}

impl InconsistencyProfile {
    /// All perturbation kinds enabled, angles measured from view 0.
    pub fn for_views(views: &ViewSet, severity: Real, seed: u64) -> Self {
        Self {
            severity,
            angles: (0..views.len()).map(|i| views.angle_to_reference(i)).collect(),
            warp: true,
            elastic: true,
            shading: true,
            seed,
        }
    }

    /// Overall magnitude for a view in `[0, severity]`.
    pub fn magnitude(&self, view: usize) -> Real {
        self.severity * angle_gain(self.angles[view])
    }
}

/// Per-pixel source offsets `(dx, dy)` for one view, plus the gain.
pub struct ViewWarp {
    pub dx: Vec<Real>,
    pub dy: Vec<Real>,
    pub gain: Real,
}

impl ViewWarp {
    pub fn mean_displacement(&self) -> Real {
        self.dx.iter().zip(&self.dy).map(|(x, y)| x.hypot(*y)).sum::<Real>() / self.dx.len().max(1) as Real
    }
}

/// Builds the warp for one view. The translation alone already moves every
/// pixel by about twice the target mean, so after the rescale the mean
/// displacement equals the target exactly and all bounds still hold.
pub fn view_warp(profile: &InconsistencyProfile, view: usize, width: usize, height: usize) -> ViewWarp {
    let m = profile.magnitude(view);
    let px = width as Real / REFERENCE_WIDTH;
    let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
    rng.set_stream(view as u64);
    let phi: Real = rng.gen_range(0.0..std::f64::consts::TAU as Real);
    let rot_sign: Real = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    let scale_sign: Real = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    let gain_sign: Real = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    let phase: [Real; 2] = [rng.gen_range(0.0..6.28), rng.gen_range(0.0..6.28)];

    let t = [m * MAX_TRANSLATION_PX * px * phi.cos(), m * MAX_TRANSLATION_PX * px * phi.sin()];
    let theta = (rot_sign * m * MAX_ROTATION_DEG).to_radians();
    let s = 1.0 + scale_sign * m * MAX_SCALE;
    let amp = m * MEAN_DISPLACEMENT_PX * px;
    let omega = std::f64::consts::TAU as Real * 1.5 / width.max(1) as Real;
    let (cx, cy) = (width as Real / 2.0, height as Real / 2.0);
    let (sin, cos) = theta.sin_cos();

    let n = width * height;
    let (mut dx, mut dy) = (vec![0.0; n], vec![0.0; n]);
    for y in 0..height {
        for x in 0..width {
            let (u, v) = (x as Real + 0.5, y as Real + 0.5);
            let (mut ox, mut oy) = (0.0, 0.0);
            if profile.warp {
                // Inverse of  x' = c + s R (x - c) + t.
                let (qx, qy) = (u - cx - t[0], v - cy - t[1]);
                let sx = cx + (cos * qx + sin * qy) / s;
                let sy = cy + (-sin * qx + cos * qy) / s;
                ox += sx - u;
                oy += sy - v;
            }
            if profile.elastic {
                ox += amp * (omega * v + phase[0]).sin();
                oy += amp * (omega * u + phase[1]).sin();
            }
            dx[y * width + x] = ox;
            dy[y * width + x] = oy;
        }
    }
    let mut warp = ViewWarp { dx, dy, gain: if profile.shading { 1.0 + gain_sign * m * MAX_GAIN } else { 1.0 } };
    let mean = warp.mean_displacement();
    let target = m * MEAN_DISPLACEMENT_PX * px;
    if mean > target && mean > 0.0 {
        let k = target / mean;
        warp.dx.iter_mut().chain(warp.dy.iter_mut()).for_each(|d| *d *= k);
    }
    warp
}

/// Bilinear lookup with zero outside the image.
fn sample_channel(src: &[Real], w: usize, h: usize, x: Real, y: Real) -> Real {
    let (fx, fy) = (x - 0.5, y - 0.5);
    let (x0, y0) = (fx.floor(), fy.floor());
    let (ax, ay) = (fx - x0, fy - y0);
    let (x0, y0) = (x0 as isize, y0 as isize);
    let at = |xx: isize, yy: isize| {
        if xx < 0 || yy < 0 || xx >= w as isize || yy >= h as isize {
            0.0
        } else {
            src[yy as usize * w + xx as usize]
        }
    };
    (1.0 - ay) * ((1.0 - ax) * at(x0, y0) + ax * at(x0 + 1, y0)) + ay * ((1.0 - ax) * at(x0, y0 + 1) + ax * at(x0 + 1, y0 + 1))
}

pub fn apply_warp(img: &Array, warp: &ViewWarp) -> Array {
    let (c, h, w) = (img.shape()[0], img.shape()[1], img.shape()[2]);
    let n = h * w;
    let src = img.data();
    let mut out = vec![0.0; c * n];
    for ch in 0..c {
        let plane = &src[ch * n..(ch + 1) * n];
        for p in 0..n {
            let (u, v) = ((p % w) as Real + 0.5, (p / w) as Real + 0.5);
            let val = sample_channel(plane, w, h, u + warp.dx[p], v + warp.dy[p]);
            out[ch * n + p] = (val * warp.gain).clamp(0.0, 1.0);
        }
    }
    Array::new(img.shape().to_vec(), out).expect("image shape")
}

/// Corrupts every non-reference input image; ground truth is left alone.
pub fn perturb_views(sample: &TrainingSample, profile: &InconsistencyProfile) -> Result<TrainingSample, SynthError> {
    if profile.angles.len() != sample.views.len() {
        return Err(SynthError::Profile(format!(
            "profile covers {} views but the sample has {}",
            profile.angles.len(),
            sample.views.len()
        )));
    }
    if !(0.0..=1.0).contains(&profile.severity) {
        return Err(SynthError::Profile(format!("severity {} outside [0, 1]", profile.severity)));
    }
    let mut out = sample.clone();
    out.severity = profile.severity;
    if profile.severity == 0.0 {
        return Ok(out);
    }
    for i in sample.input_indices() {
        let img = &sample.images[i];
        let warp = view_warp(profile, i, img.shape()[2], img.shape()[1]);
        out.images[i] = apply_warp(img, &warp);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evalkit::psnr_map;
    use crate::geometry::{Intrinsics, DEFAULT_CAMERA_RADIUS};
    use crate::synthdata::{generate_shape, input_views, render_sample};

    fn sample(seed: u64, res: usize) -> TrainingSample {
        let vs = input_views(6, DEFAULT_CAMERA_RADIUS, Intrinsics::from_fov(res, res, 50.0)).unwrap();
        render_sample(&generate_shape(seed), &vs, res).unwrap()
    }

    #[test]
    fn gain_is_monotone_into_range() {
        assert!((angle_gain(0.0) - 0.3).abs() < 1e-12);
        assert!((angle_gain(180.0) - 1.0).abs() < 1e-12);
        let mut last = 0.0;
        for a in 0..=180 {
            let g = angle_gain(a as Real);
            assert!(g >= last);
            last = g;
        }
    }

    #[test]
    fn zero_severity_is_identity() {
        let s = sample(1, 32);
        let p = perturb_views(&s, &InconsistencyProfile::for_views(&s.views, 0.0, 9)).unwrap();
        assert_eq!(p.images, s.images);
    }

    #[test]
    fn reference_untouched_and_gt_untouched() {
        let s = sample(2, 32);
        for sev in [0.3, 1.0] {
            let p = perturb_views(&s, &InconsistencyProfile::for_views(&s.views, sev, 4)).unwrap();
            assert_eq!(p.images[0], s.images[0]);
            for i in 1..7 {
                assert_ne!(p.images[i], s.images[i]);
                assert_eq!(p.gt[i].depth, s.gt[i].depth);
            }
        }
    }

    #[test]
    fn bad_profiles_rejected() {
        let s = sample(3, 16);
        let mut prof = InconsistencyProfile::for_views(&s.views, 0.5, 1);
        prof.angles.pop();
        assert!(matches!(perturb_views(&s, &prof), Err(SynthError::Profile(_))));
        let prof = InconsistencyProfile::for_views(&s.views, 1.5, 1);
        assert!(perturb_views(&s, &prof).is_err());
    }

    #[test]
    fn warp_respects_bounds() {
        for seed in 0..20 {
            for angle in [10.0, 90.0, 180.0] {
                let prof = InconsistencyProfile { severity: 1.0, angles: vec![0.0, angle], warp: true, elastic: true, shading: true, seed };
                let w = view_warp(&prof, 1, 64, 64);
                let m = prof.magnitude(1);
                // Translation + rotation/scale about the centre + elastic.
                let corner = (32.0 as Real).hypot(32.0);
                let bound = m * (MAX_TRANSLATION_PX + corner * (MAX_ROTATION_DEG.to_radians() + MAX_SCALE) * 1.1 + MEAN_DISPLACEMENT_PX * 1.5);
                for (x, y) in w.dx.iter().zip(&w.dy) {
                    assert!(x.hypot(*y) <= bound);
                }
                assert!((w.mean_displacement() - m * MEAN_DISPLACEMENT_PX).abs() < 1e-9);
                assert!((w.gain - 1.0).abs() <= m * MAX_GAIN + 1e-12);
            }
        }
    }

    #[test]
    fn displacement_nondecreasing_in_angle() {
        for seed in 0..50 {
            let s_views = sample(0, 8).views;
            let prof = InconsistencyProfile::for_views(&s_views, 0.5, seed);
            let mut by_angle: Vec<(Real, Real)> =
                (1..7).map(|i| (prof.angles[i], view_warp(&prof, i, 64, 64).mean_displacement())).collect();
            by_angle.sort_by(|a, b| a.0.total_cmp(&b.0));
            for w in by_angle.windows(2) {
                assert!(w[1].1 >= w[0].1 - 1e-9, "seed {seed}: {by_angle:?}");
            }
        }
    }

    #[test]
    fn psnr_drops_with_angle() {
        let res = 64;
        let mut sums = [0.0; 7];
        let mut angles = [0.0; 7];
        for seed in 0..50 {
            let s = sample(seed, res);
            let prof = InconsistencyProfile::for_views(&s.views, 0.5, seed);
            let p = perturb_views(&s, &prof).unwrap();
            for i in 1..7 {
                sums[i] += psnr_map(p.images[i].data(), s.images[i].data()) / 50.0;
                angles[i] = prof.angles[i];
            }
        }
        let mut groups: Vec<(Real, Vec<Real>)> = Vec::new();
        for i in 1..7 {
            match groups.iter_mut().find(|g| (g.0 - angles[i]).abs() < 1e-6) {
                Some(g) => g.1.push(sums[i]),
                None => groups.push((angles[i], vec![sums[i]])),
            }
        }
        groups.sort_by(|a, b| a.0.total_cmp(&b.0));
        let means: Vec<Real> = groups.iter().map(|g| g.1.iter().sum::<Real>() / g.1.len() as Real).collect();
        assert!(groups.len() >= 3);
        assert!(means.windows(2).all(|w| w[1] < w[0]), "{means:?}");
    }
}
