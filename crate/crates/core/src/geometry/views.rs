use std::fmt::Write as _;

use super::{Camera, GeometryError, Intrinsics, Vec3};
use crate::Real;

pub const DEFAULT_CAMERA_RADIUS: Real = 2.5;
/// Elevation of the reference view `v0` (azimuth 0).
pub const REFERENCE_ELEVATION: Real = 20.0;
pub const RING_AZIMUTHS: [Real; 6] = [30.0, 90.0, 150.0, 210.0, 270.0, 330.0];
pub const RING_ELEVATIONS: [Real; 6] = [30.0, -20.0, 30.0, -20.0, 30.0, -20.0];

const UP: Vec3 = Vec3::new(0.0, 1.0, 0.0);

/// Position on the sphere of `radius`. Azimuth 0, elevation 0 is `+z`;
/// azimuth grows towards `+x`, elevation towards `+y`.
pub fn spherical_position(azimuth_deg: Real, elevation_deg: Real, radius: Real) -> Vec3 {
    let (sa, ca) = azimuth_deg.to_radians().sin_cos();
    let (se, ce) = elevation_deg.to_radians().sin_cos();
    Vec3::new(ce * sa, se, ce * ca) * radius
}

/// A view as orbit parameters plus the camera built from them.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct View {
    pub azimuth: Real,
    pub elevation: Real,
    pub radius: Real,
    pub camera: Camera,
}

impl View {
    pub fn new(azimuth: Real, elevation: Real, radius: Real, k: Intrinsics) -> Result<Self, GeometryError> {
        if !(radius > 0.0) {
            return Err(GeometryError::InvalidViews(format!("radius must be positive, got {radius}")));
        }
        let eye = spherical_position(azimuth, elevation, radius);
        let camera = Camera::look_at(k, eye, Vec3::ZERO, UP)?;
        Ok(Self { azimuth, elevation, radius, camera })
    }

    pub fn direction(&self) -> Vec3 {
        spherical_position(self.azimuth, self.elevation, 1.0)
    }
}

/// Ordered set of views. When it comes from [`ViewSet::default_preset`], index 0
/// is the reference view and 1..=6 the generated ring.
#[derive(Clone, Debug, PartialEq)]
pub struct ViewSet {
    pub views: Vec<View>,
}

impl ViewSet {
    pub fn len(&self) -> usize {
        self.views.len()
    }

    pub fn is_empty(&self) -> bool {
        self.views.is_empty()
    }

    pub fn cameras(&self) -> Vec<Camera> {
        self.views.iter().map(|v| v.camera).collect()
    }

    pub fn camera(&self, i: usize) -> &Camera {
        &self.views[i].camera
    }

    /// Reference view followed by the six generated views.
    pub fn default_preset(radius: Real, k: Intrinsics) -> Result<Self, GeometryError> {
        let mut az = vec![0.0];
        az.extend_from_slice(&RING_AZIMUTHS);
        let mut el = vec![REFERENCE_ELEVATION];
        el.extend_from_slice(&RING_ELEVATIONS);
        make_ring_views(&az, &el, radius, k)
    }

    /// Angle in degrees between view `i` and view 0.
    pub fn angle_to_reference(&self, i: usize) -> Real {
        let a = self.views[0].direction();
        let b = self.views[i].direction();
        a.dot(b).clamp(-1.0, 1.0).acos().to_degrees()
    }

    pub fn subset(&self, indices: &[usize]) -> ViewSet {
        ViewSet { views: indices.iter().map(|&i| self.views[i]).collect() }
    }

    /// One line per view: index, azimuth, elevation, radius, fx, fy, cx, cy,
    /// width, height.
    pub fn to_manifest(&self) -> String {
        let mut s = String::from("# index azimuth elevation radius fx fy cx cy width height\n");
        for (i, v) in self.views.iter().enumerate() {
            let k = &v.camera.intrinsics;
            let _ = writeln!(
                s,
                "{i} {} {} {} {} {} {} {} {} {}",
                v.azimuth, v.elevation, v.radius, k.fx, k.fy, k.cx, k.cy, k.width, k.height
            );
        }
        s
    }

    pub fn from_manifest(text: &str) -> Result<Self, GeometryError> {
        let mut views = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |detail: String| GeometryError::Manifest { line: ln + 1, detail };
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.len() != 10 {
                return Err(err(format!("expected 10 fields, found {}", f.len())));
            }
            let idx: usize = f[0].parse().map_err(|e| err(format!("index: {e}")))?;
            if idx != views.len() {
                return Err(err(format!("expected index {}, found {idx}", views.len())));
            }
            let r = |i: usize| -> Result<Real, GeometryError> {
                f[i].parse::<Real>().map_err(|e| err(format!("field {i}: {e}")))
            };
            let u = |i: usize| -> Result<usize, GeometryError> {
                f[i].parse::<usize>().map_err(|e| err(format!("field {i}: {e}")))
            };
            let k = Intrinsics { fx: r(4)?, fy: r(5)?, cx: r(6)?, cy: r(7)?, width: u(8)?, height: u(9)? };
            views.push(View::new(r(1)?, r(2)?, r(3)?, k)?);
        }
        Ok(Self { views })
    }
}

/// One camera per (azimuth, elevation) pair on the sphere of `radius`, all
/// aimed at the origin. The radius must leave the unit bounding sphere
/// outside the cameras.
pub fn make_ring_views(
    azimuths: &[Real],
    elevations: &[Real],
    radius: Real,
    k: Intrinsics,
) -> Result<ViewSet, GeometryError> {
    if azimuths.is_empty() || azimuths.len() != elevations.len() {
        return Err(GeometryError::InvalidViews(format!(
            "{} azimuths vs {} elevations",
            azimuths.len(),
            elevations.len()
        )));
    }
    if radius <= 1.0 {
        return Err(GeometryError::InvalidViews(format!(
            "radius {radius} places cameras inside the unit bounding sphere"
        )));
    }
    let views = azimuths
        .iter()
        .zip(elevations)
        .map(|(&az, &el)| View::new(az, el, radius, k))
        .collect::<Result<_, _>>()?;
    Ok(ViewSet { views })
}

/// `n` views on a Fibonacci spiral, used for evaluation and extra
/// supervision.
pub fn uniform_view_sphere(n: usize, radius: Real, k: Intrinsics) -> Result<ViewSet, GeometryError> {
    if n == 0 {
        return Err(GeometryError::InvalidViews("need at least one view".into()));
    }
    let golden = std::f64::consts::PI as Real * (3.0 - (5.0 as Real).sqrt());
    let views = (0..n)
        .map(|i| {
            let y = 1.0 - 2.0 * (i as Real + 0.5) / n as Real;
            let phi = golden * i as Real;
            let r = (1.0 - y * y).max(0.0).sqrt();
            let (x, z) = (r * phi.cos(), r * phi.sin());
            let azimuth = x.atan2(z).to_degrees();
            let elevation = y.clamp(-1.0, 1.0).asin().to_degrees();
            View::new(azimuth, elevation, radius, k)
        })
        .collect::<Result<_, _>>()?;
    Ok(ViewSet { views })
}
