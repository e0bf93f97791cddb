use super::{Mat3, Vec3};
use crate::Real;

/// Target conservative bounding radius after normalisation.
pub const NORMALIZED_BOUND: Real = 0.95;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Primitive {
    Sphere { radius: Real },
    Box { half: Vec3 },
    RoundedBox { half: Vec3, rounding: Real },
    /// Inside-outside function raised to a power that makes it homogeneous
    /// of degree one, scaled by the smallest radius. Not an exact distance.
    Superellipsoid { radii: Vec3, e1: Real, e2: Real },
    /// Segment from `-half_length` to `half_length` along local y.
    Capsule { half_length: Real, radius: Real },
}

fn box_sdf(p: Vec3, half: Vec3) -> Real {
    let q = p.abs() - half;
    q.max_scalar(0.0).norm() + q.max_component().min(0.0)
}

impl Primitive {
    pub fn eval(&self, p: Vec3) -> Real {
        match *self {
            Primitive::Sphere { radius } => p.norm() - radius,
            Primitive::Box { half } => box_sdf(p, half),
            Primitive::RoundedBox { half, rounding } => {
                box_sdf(p, half - Vec3::new(rounding, rounding, rounding)) - rounding
            }
            Primitive::Superellipsoid { radii, e1, e2 } => {
                let q = p.abs().div_elem(radii);
                let xy = (q.x.powf(2.0 / e2) + q.y.powf(2.0 / e2)).powf(e2 / e1);
                let f = (xy + q.z.powf(2.0 / e1)).powf(e1 / 2.0);
                let rmin = radii.x.min(radii.y).min(radii.z);
                (f - 1.0) * rmin
            }
            Primitive::Capsule { half_length, radius } => {
                let y = p.y.clamp(-half_length, half_length);
                (p - Vec3::new(0.0, y, 0.0)).norm() - radius
            }
        }
    }

    /// Radius of a sphere around the local origin containing the shape.
    pub fn bound(&self) -> Real {
        match *self {
            Primitive::Sphere { radius } => radius,
            Primitive::Box { half } | Primitive::RoundedBox { half, .. } => half.norm(),
            Primitive::Superellipsoid { radii, .. } => radii.norm(),
            Primitive::Capsule { half_length, radius } => half_length + radius,
        }
    }
}

/// A primitive with a rigid placement: `world = rotation * local + translation`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Placed {
    pub primitive: Primitive,
    pub rotation: Mat3,
    pub translation: Vec3,
}

impl Placed {
    pub fn at(primitive: Primitive, translation: Vec3) -> Self {
        Self { primitive, rotation: Mat3::IDENTITY, translation }
    }

    pub fn eval(&self, p: Vec3) -> Real {
        self.primitive.eval(self.rotation.transpose().mul_vec(p - self.translation))
    }

    pub fn bound(&self) -> Real {
        self.translation.norm() + self.primitive.bound()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Combine {
    Union,
    Intersection,
    /// Polynomial smooth minimum with blend width `k`.
    SmoothUnion(Real),
}

impl Combine {
    fn apply(&self, a: Real, b: Real) -> Real {
        match *self {
            Combine::Union => a.min(b),
            Combine::Intersection => a.max(b),
            Combine::SmoothUnion(k) => {
                let h = (k - (a - b).abs()).max(0.0) / k;
                a.min(b) - h * h * k * 0.25
            }
        }
    }
}

/// Parts folded left to right: `ops[i]` merges part `i + 1` into the running
/// result. The whole shape is uniformly scaled by `scale`.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapeSdf {
    pub parts: Vec<Placed>,
    pub ops: Vec<Combine>,
    pub scale: Real,
}

impl ShapeSdf {
    pub fn sphere(radius: Real) -> Self {
        Self {
            parts: vec![Placed::at(Primitive::Sphere { radius }, Vec3::ZERO)],
            ops: Vec::new(),
            scale: 1.0,
        }
    }

    /// Builds a composite and rescales it so that [`ShapeSdf::bound`] equals
    /// the normalised radius.
    pub fn normalized(parts: Vec<Placed>, ops: Vec<Combine>) -> Self {
        assert!(!parts.is_empty() && ops.len() + 1 == parts.len());
        let mut s = Self { parts, ops, scale: 1.0 };
        s.scale = NORMALIZED_BOUND / s.bound();
        s
    }

    pub fn eval(&self, p: Vec3) -> Real {
        let q = p / self.scale;
        let mut d = self.parts[0].eval(q);
        for (op, part) in self.ops.iter().zip(&self.parts[1..]) {
            d = op.apply(d, part.eval(q));
        }
        d * self.scale
    }

    /// Conservative radius of an origin-centred sphere containing the shape.
    pub fn bound(&self) -> Real {
        let mut r: Real = self.parts.iter().map(|p| p.bound()).fold(0.0, Real::max);
        for op in &self.ops {
            if let Combine::SmoothUnion(k) = op {
                r += 0.25 * k;
            }
        }
        r * self.scale
    }

    /// Central-difference gradient.
    pub fn gradient(&self, p: Vec3) -> Vec3 {
        let e = 1e-5;
        let dx = Vec3::new(e, 0.0, 0.0);
        let dy = Vec3::new(0.0, e, 0.0);
        let dz = Vec3::new(0.0, 0.0, e);
        Vec3::new(
            self.eval(p + dx) - self.eval(p - dx),
            self.eval(p + dy) - self.eval(p - dy),
            self.eval(p + dz) - self.eval(p - dz),
        ) / (2.0 * e)
    }

    pub fn normal(&self, p: Vec3) -> Vec3 {
        self.gradient(p).normalized()
    }
}
