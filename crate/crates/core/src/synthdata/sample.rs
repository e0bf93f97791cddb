//! Shaded input images and ground-truth maps for one shape.

use super::shapes::GeneratedShape;
use super::SynthError;
use crate::geometry::{make_ring_views, Camera, Intrinsics, Vec3, ViewSet, REFERENCE_ELEVATION};
use crate::render::{render_gt, GBuffer};
use crate::{exec, Array, Real};

pub const AMBIENT: Real = 0.08;

/// Light directions (towards the light) in the camera frame, with colours.
/// The rig moves with the camera so every view is lit alike.
pub fn lights() -> [(Vec3, [Real; 3]); 3] {
    [
        (Vec3::new(-0.5, -0.8, -0.6).normalized(), [0.7, 0.665, 0.63]),
        (Vec3::new(0.7, -0.2, -0.4).normalized(), [0.24, 0.3, 0.42]),
        (Vec3::new(-0.1, 0.6, -0.8).normalized(), [0.3, 0.225, 0.175]),
    ]
}

/// Reference view followed by `n` generated views. Six views give the usual
/// ring; other counts spread evenly in azimuth with alternating elevation.
pub fn input_views(n: usize, radius: Real, k: Intrinsics) -> Result<ViewSet, SynthError> {
    if n == 0 {
        return Err(SynthError::Config("at least one generated view is required".into()));
    }
    let mut az = vec![0.0];
    let mut el = vec![REFERENCE_ELEVATION];
    for i in 0..n {
        az.push(30.0 + 360.0 * i as Real / n as Real);
        el.push(if i % 2 == 0 { 30.0 } else { -20.0 });
    }
    Ok(make_ring_views(&az, &el, radius, k)?)
}

/// One shape seen from a view set: shaded input images plus ground truth.
#[derive(Clone, Debug)]
pub struct TrainingSample {
    pub shape_id: String,
    pub shape: GeneratedShape,
    pub views: ViewSet,
    /// `[3, H, W]` per view, background exactly 0.
    pub images: Vec<Array>,
    pub gt: Vec<GBuffer>,
    pub reference: usize,
    /// Severity applied to `images`; 0 for a clean sample.
    pub severity: Real,
}

impl TrainingSample {
    pub fn resolution(&self) -> usize {
        self.gt.first().map_or(0, |g| g.width)
    }

    /// Indices of the generated (non-reference) views.
    pub fn input_indices(&self) -> Vec<usize> {
        (0..self.views.len()).filter(|&i| i != self.reference).collect()
    }
}

/// Lambertian shading of a ground-truth render.
pub fn shade(g: &GBuffer, camera: &Camera, albedo: [Real; 3]) -> Array {
    let n = g.pixels();
    let rig = lights();
    let mut img = vec![0.0; 3 * n];
    for p in 0..n {
        if !g.is_covered(p) {
            continue;
        }
        let nn = g.normal_at(p);
        let normal = camera.rotation.mul_vec(Vec3::new(nn[0], nn[1], nn[2]));
        let mut c = [AMBIENT; 3];
        for (dir, col) in &rig {
            let lam = normal.dot(*dir).max(0.0);
            for ch in 0..3 {
                c[ch] += lam * col[ch];
            }
        }
        for ch in 0..3 {
            img[ch * n + p] = (albedo[ch] * c[ch]).clamp(0.0, 1.0);
        }
    }
    Array::new(vec![3, g.height, g.width], img).expect("image shape")
}

/// Renders every view of `views`; view 0 is the reference.
pub fn render_sample(shape: &GeneratedShape, views: &ViewSet, resolution: usize) -> Result<TrainingSample, SynthError> {
    if views.is_empty() {
        return Err(SynthError::Config("empty view set".into()));
    }
    let out = exec::map_indexed(views.len(), |i| render_gt(&shape.sdf, views.camera(i), resolution));
    let gt = out.into_iter().collect::<Result<Vec<_>, _>>()?;
    let images = gt.iter().enumerate().map(|(i, g)| shade(g, views.camera(i), shape.albedo)).collect();
    Ok(TrainingSample { shape_id: String::new(), shape: shape.clone(), views: views.clone(), images, gt, reference: 0, severity: 0.0 })
}
