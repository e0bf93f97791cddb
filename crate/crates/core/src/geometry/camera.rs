use super::{GeometryError, Mat3, Vec3};
use crate::Real;

/// Pinhole intrinsics in pixels. Pixel centres sit at half-integer
/// coordinates, so the image spans `[0, width) x [0, height)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Intrinsics {
    pub fx: Real,
    pub fy: Real,
    pub cx: Real,
    pub cy: Real,
    pub width: usize,
    pub height: usize,
}

impl Intrinsics {
    /// Square pixels, principal point at the image centre, horizontal field
    /// of view `fov_deg`.
    pub fn from_fov(width: usize, height: usize, fov_deg: Real) -> Self {
        let f = 0.5 * width as Real / (0.5 * fov_deg.to_radians()).tan();
        Self {
            fx: f,
            fy: f,
            cx: 0.5 * width as Real,
            cy: 0.5 * height as Real,
            width,
            height,
        }
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let bad = |m: String| Err(GeometryError::InvalidCamera(m));
        if self.width == 0 || self.height == 0 {
            return bad(format!("empty image {}x{}", self.width, self.height));
        }
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return bad(format!("focal lengths must be positive, got {} {}", self.fx, self.fy));
        }
        if !(0.0..self.width as Real).contains(&self.cx)
            || !(0.0..self.height as Real).contains(&self.cy)
        {
            return bad(format!("principal point ({}, {}) outside image", self.cx, self.cy));
        }
        Ok(())
    }
}

/// Result of projecting a world point. `depth` is the camera-space z; when it
/// is not positive the point is behind the camera and `uv` is meaningless.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Projection {
    pub uv: [Real; 2],
    pub depth: Real,
}

impl Projection {
    pub fn in_front(&self) -> bool {
        self.depth > 0.0
    }
}

/// World-to-camera rigid transform plus intrinsics. Camera space is
/// x right, y down, z forward.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Camera {
    pub intrinsics: Intrinsics,
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl Camera {
    pub fn new(intrinsics: Intrinsics, rotation: Mat3, translation: Vec3) -> Result<Self, GeometryError> {
        intrinsics.validate()?;
        let err = rotation.orthonormality_error();
        let det = rotation.determinant();
        if err > 1e-6 || (det - 1.0).abs() > 1e-6 {
            return Err(GeometryError::InvalidCamera(format!(
                "rotation not orthonormal (error {err:e}, det {det})"
            )));
        }
        Ok(Self { intrinsics, rotation, translation })
    }

    /// Camera at `eye` looking at `target`. When the view direction is
    /// parallel to `up`, the up vector is nudged so the frame stays defined.
    pub fn look_at(intrinsics: Intrinsics, eye: Vec3, target: Vec3, up: Vec3) -> Result<Self, GeometryError> {
        let f = (target - eye).normalized();
        if f.norm() == 0.0 {
            return Err(GeometryError::InvalidCamera("eye coincides with target".into()));
        }
        let mut right = f.cross(up);
        if right.norm() < 1e-6 {
            right = f.cross((up + Vec3::new(1e-3, 0.0, 1e-3)).normalized());
        }
        let right = right.normalized();
        let down = f.cross(right);
        let rotation = Mat3::from_rows(right, down, f);
        let translation = -rotation.mul_vec(eye);
        Self::new(intrinsics, rotation, translation)
    }

    /// Same pose with intrinsics rescaled to a `width x height` image.
    pub fn with_resolution(&self, width: usize, height: usize) -> Camera {
        let k = &self.intrinsics;
        let sx = width as Real / k.width as Real;
        let sy = height as Real / k.height as Real;
        Camera {
            intrinsics: Intrinsics { fx: k.fx * sx, fy: k.fy * sy, cx: k.cx * sx, cy: k.cy * sy, width, height },
            ..*self
        }
    }

    pub fn width(&self) -> usize {
        self.intrinsics.width
    }

    pub fn height(&self) -> usize {
        self.intrinsics.height
    }

    pub fn center(&self) -> Vec3 {
        -self.rotation.transpose().mul_vec(self.translation)
    }

    pub fn to_camera(&self, p: Vec3) -> Vec3 {
        self.rotation.mul_vec(p) + self.translation
    }

    pub fn project(&self, p: Vec3) -> Projection {
        let c = self.to_camera(p);
        let k = &self.intrinsics;
        Projection {
            uv: [k.fx * c.x / c.z + k.cx, k.fy * c.y / c.z + k.cy],
            depth: c.z,
        }
    }

    /// Direction (camera frame, unnormalised, z = 1) through pixel `(u, v)`.
    pub fn ray_camera(&self, u: Real, v: Real) -> Vec3 {
        let k = &self.intrinsics;
        Vec3::new((u - k.cx) / k.fx, (v - k.cy) / k.fy, 1.0)
    }

    /// Unit world-space direction through pixel `(u, v)`.
    pub fn ray_world(&self, u: Real, v: Real) -> Vec3 {
        self.rotation.transpose().mul_vec(self.ray_camera(u, v)).normalized()
    }

    pub fn unproject(&self, u: Real, v: Real, depth: Real) -> Vec3 {
        let c = self.ray_camera(u, v) * depth;
        self.rotation.transpose().mul_vec(c - self.translation)
    }

    /// Bit pattern used to order cameras canonically.
    pub fn sort_key(&self) -> Vec<u64> {
        let k = &self.intrinsics;
        let mut key: Vec<u64> = self.rotation.0.iter().flatten().map(|x| x.to_bits() as u64).collect();
        key.extend(self.translation.to_array().iter().map(|x| x.to_bits() as u64));
        key.extend([k.fx, k.fy, k.cx, k.cy].iter().map(|x| x.to_bits() as u64));
        key.extend([k.width as u64, k.height as u64]);
        key
    }
}

/// Smallest camera-space depth at which any point of the origin-centred
/// sphere of `radius` can appear.
pub fn bounding_sphere_min_depth(camera: &Camera, radius: Real) -> Result<Real, GeometryError> {
    let d = camera.center().norm();
    if d <= radius {
        return Err(GeometryError::InsideBoundingSphere {
            distance: d as f64,
            radius: radius as f64,
        });
    }
    Ok(d - radius)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_cam() -> Camera {
        let k = Intrinsics { fx: 100.0, fy: 100.0, cx: 32.0, cy: 32.0, width: 64, height: 64 };
        Camera::new(k, Mat3::IDENTITY, Vec3::ZERO).unwrap()
    }

    #[test]
    fn projects_simple_point() {
        let p = unit_cam().project(Vec3::new(0.1, 0.0, 1.0));
        assert!((p.uv[0] - 42.0).abs() < 1e-12 && (p.uv[1] - 32.0).abs() < 1e-12);
        assert!((p.depth - 1.0).abs() < 1e-12);
    }

    #[test]
    fn behind_camera_is_flagged() {
        assert!(!unit_cam().project(Vec3::new(0.0, 0.0, -1.0)).in_front());
    }

    #[test]
    fn unproject_inverts_project() {
        let k = Intrinsics::from_fov(64, 48, 50.0);
        let cam = Camera::look_at(k, Vec3::new(0.7, 1.1, 2.0), Vec3::ZERO, Vec3::new(0.0, 1.0, 0.0)).unwrap();
        for p in [Vec3::new(0.1, -0.2, 0.3), Vec3::new(-0.4, 0.5, 0.0)] {
            let q = cam.project(p);
            let back = cam.unproject(q.uv[0], q.uv[1], q.depth);
            assert!((back - p).norm() < 1e-12);
        }
    }

    #[test]
    fn projection_is_rigid_equivariant() {
        let k = Intrinsics::from_fov(64, 64, 50.0);
        let cam = Camera::look_at(k, Vec3::new(0.3, 0.9, 2.2), Vec3::ZERO, Vec3::new(0.0, 1.0, 0.0)).unwrap();
        let rot = Mat3::rotation(Vec3::new(0.2, 1.0, -0.4), 1.1);
        let shift = Vec3::new(0.5, -0.2, 0.1);
        // Moving the world by x -> R x + s is undone in camera coordinates.
        let moved = Camera::new(k, cam.rotation.mul_mat(&rot.transpose()), cam.translation - cam.rotation.mul_vec(rot.transpose().mul_vec(shift))).unwrap();
        let p = Vec3::new(0.1, 0.2, -0.3);
        let a = cam.project(p);
        let b = moved.project(rot.mul_vec(p) + shift);
        assert!((a.uv[0] - b.uv[0]).abs() < 1e-9 && (a.uv[1] - b.uv[1]).abs() < 1e-9 && (a.depth - b.depth).abs() < 1e-9);
    }

    #[test]
    fn look_at_frame() {
        let k = Intrinsics::from_fov(64, 64, 50.0);
        let cam = Camera::look_at(k, Vec3::new(0.0, 0.0, 2.5), Vec3::ZERO, Vec3::new(0.0, 1.0, 0.0)).unwrap();
        assert!((cam.center() - Vec3::new(0.0, 0.0, 2.5)).norm() < 1e-12);
        let c = cam.project(Vec3::ZERO);
        assert!((c.uv[0] - 32.0).abs() < 1e-12 && (c.depth - 2.5).abs() < 1e-12);
        // World +x maps to image right, world +y to image up.
        assert!(cam.project(Vec3::new(0.1, 0.0, 0.0)).uv[0] > 32.0);
        assert!(cam.project(Vec3::new(0.0, 0.1, 0.0)).uv[1] < 32.0);
    }

    #[test]
    fn look_at_straight_down_is_defined() {
        let k = Intrinsics::from_fov(32, 32, 50.0);
        let cam = Camera::look_at(k, Vec3::new(0.0, 2.5, 0.0), Vec3::ZERO, Vec3::new(0.0, 1.0, 0.0)).unwrap();
        assert!(cam.rotation.orthonormality_error() < 1e-9);
    }

    #[test]
    fn rejects_bad_rotation() {
        let k = Intrinsics::from_fov(32, 32, 50.0);
        let mut m = Mat3::IDENTITY;
        m.0[0][0] = 2.0;
        assert!(Camera::new(k, m, Vec3::ZERO).is_err());
        let mut flip = Mat3::IDENTITY;
        flip.0[2][2] = -1.0;
        assert!(Camera::new(k, flip, Vec3::ZERO).is_err());
    }

    #[test]
    fn min_depth() {
        let k = Intrinsics::from_fov(32, 32, 50.0);
        let cam = Camera::look_at(k, Vec3::new(0.0, 0.0, 3.0), Vec3::ZERO, Vec3::new(0.0, 1.0, 0.0)).unwrap();
        assert!((bounding_sphere_min_depth(&cam, 1.0).unwrap() - 2.0).abs() < 1e-12);
        let near = Camera::look_at(k, Vec3::new(0.0, 0.0, 0.5), Vec3::ZERO, Vec3::new(0.0, 1.0, 0.0)).unwrap();
        assert!(bounding_sphere_min_depth(&near, 1.0).is_err());
    }
}
