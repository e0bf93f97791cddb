//! Random composite shapes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{Combine, Mat3, Placed, Primitive, ShapeSdf, Vec3};
use crate::Real;

/// Radius of the shapes in [`ShapeFamily::Sphere`].
pub const SPHERE_RADIUS: Real = 0.6;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ShapeFamily {
    /// Union of 2 to 6 random primitives.
    Composite,
    /// A single sphere of radius [`SPHERE_RADIUS`].
    Sphere,
}

impl ShapeFamily {
    pub fn name(self) -> &'static str {
        match self {
            ShapeFamily::Composite => "composite",
            ShapeFamily::Sphere => "sphere",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "composite" => Some(ShapeFamily::Composite),
            "sphere" => Some(ShapeFamily::Sphere),
            _ => None,
        }
    }
}

/// A generated shape and its surface colour.
#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedShape {
    pub seed: u64,
    pub family: ShapeFamily,
    pub sdf: ShapeSdf,
    pub albedo: [Real; 3],
}

fn unit_vector(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 && n <= 1.0 {
            return v / n;
        }
    }
}

fn random_primitive(rng: &mut ChaCha8Rng) -> Primitive {
    fn half(rng: &mut ChaCha8Rng) -> Vec3 {
        Vec3::new(rng.gen_range(0.15..0.4), rng.gen_range(0.15..0.4), rng.gen_range(0.15..0.4))
    }
    match rng.gen_range(0..5) {
        0 => Primitive::Sphere { radius: rng.gen_range(0.25..0.5) },
        1 => Primitive::Box { half: half(rng) },
        2 => {
            let half = half(rng);
            let rounding = rng.gen_range(0.03..0.1 as Real).min(0.5 * half.x.min(half.y).min(half.z));
            Primitive::RoundedBox { half, rounding }
        }
        3 => Primitive::Superellipsoid {
            radii: Vec3::new(rng.gen_range(0.27..0.45), rng.gen_range(0.27..0.45), rng.gen_range(0.27..0.45)),
            e1: rng.gen_range(0.7..1.2),
            e2: rng.gen_range(0.7..1.2),
        },
        _ => Primitive::Capsule { half_length: rng.gen_range(0.1..0.35), radius: rng.gen_range(0.1..0.25) },
    }
}

/// Random composite for `seed`; the same seed always yields the same shape.
pub fn generate_shape(seed: u64) -> GeneratedShape {
    generate_family(ShapeFamily::Composite, seed)
}

pub fn generate_family(family: ShapeFamily, seed: u64) -> GeneratedShape {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let albedo = [rng.gen_range(0.5..0.9), rng.gen_range(0.5..0.9), rng.gen_range(0.5..0.9)];
    let sdf = match family {
        ShapeFamily::Sphere => ShapeSdf::sphere(SPHERE_RADIUS),
        ShapeFamily::Composite => {
            let n = rng.gen_range(2..=6);
            let mut parts: Vec<Placed> = Vec::with_capacity(n);
            for i in 0..n {
                let primitive = random_primitive(&mut rng);
                let axis = unit_vector(&mut rng);
                let rotation = Mat3::rotation(axis, rng.gen_range(0.0..std::f64::consts::PI as Real));
                // Each part hangs off an earlier one so the union stays connected.
                let translation = if i == 0 {
                    Vec3::ZERO
                } else {
                    let parent = parts[rng.gen_range(0..i)].translation;
                    parent + unit_vector(&mut rng) * rng.gen_range(0.2..0.45)
                };
                parts.push(Placed { primitive, rotation, translation });
            }
            let centroid = parts.iter().fold(Vec3::ZERO, |a, p| a + p.translation) / n as Real;
            for p in &mut parts {
                p.translation = p.translation - centroid;
            }
            // Hard unions only: a smooth blend shrinks the gradient norm in
            // the blend region.
            ShapeSdf::normalized(parts, vec![Combine::Union; n - 1])
        }
    };
    GeneratedShape { seed, family, sdf, albedo }
}
