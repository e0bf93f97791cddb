//! Multiview texture mapping onto a per-triangle chart atlas.
//!
//! [`texture_mesh`] runs the three steps in order: each triangle takes its
//! colours from the view where most of it is visible ([`assign_colors`]),
//! colours are box-blurred over the surface ([`blend_colors`]), and texels
//! no view saw are filled by breadth-first propagation ([`fill_holes`]).

mod assign;
mod atlas;
mod blend;
mod export;

pub use assign::{assign_colors, best_views, visible_areas};
pub use atlas::{build_atlas, Atlas, GUTTER};
pub use blend::{blend_colors, fill_holes};
pub use export::{export_obj, import_obj};

use thiserror::Error;

use crate::geometry::Camera;
use crate::isoext::Mesh;
use crate::{Array, Real};

#[derive(Debug, Error)]
pub enum TexError {
    #[error("mesh has no triangles")]
    EmptyMesh,
    #[error("mesh is not manifold; edges shared by more than two triangles: {0:?}")]
    NonManifold(Vec<(u32, u32)>),
    #[error("atlas of {size} texels per side is too small for {triangles} triangles (needs {needed})")]
    AtlasTooSmall { size: usize, triangles: usize, needed: usize },
    #[error("no texel received a colour; nothing to propagate")]
    NothingToFill,
    #[error("image {index} has shape {shape:?}, expected a square [3, N, N] RGB image")]
    Image { index: usize, shape: Vec<usize> },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad texture image {path}: {detail}")]
    Png { path: String, detail: String },
    #[error("malformed {path} line {line}: {detail}")]
    Parse { path: String, line: usize, detail: String },
    #[error(transparent)]
    Render(#[from] crate::render::RenderError),
}

/// RGB texels in `[0, 1]` with a validity flag, row-major, `size x size`.
#[derive(Clone, Debug, PartialEq)]
pub struct Texture {
    pub size: usize,
    pub rgb: Vec<[Real; 3]>,
    pub valid: Vec<bool>,
}

impl Texture {
    pub fn blank(size: usize) -> Self {
        Self { size, rgb: vec![[0.0; 3]; size * size], valid: vec![false; size * size] }
    }

    /// The texture as stored in an 8-bit image.
    pub fn quantized(&self) -> Texture {
        let q = |c: Real| (c.clamp(0.0, 1.0) * 255.0).round() / 255.0;
        Texture { size: self.size, rgb: self.rgb.iter().map(|c| c.map(q)).collect(), valid: self.valid.clone() }
    }

    /// Fraction of `atlas` chart texels that are valid.
    pub fn coverage(&self, atlas: &Atlas) -> Real {
        let chart: Vec<usize> = (0..self.rgb.len()).filter(|&i| atlas.owner[i] >= 0).collect();
        chart.iter().filter(|&&i| self.valid[i]).count() as Real / chart.len().max(1) as Real
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TexturedMesh {
    pub mesh: Mesh,
    pub atlas: Atlas,
    pub texture: Texture,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TexConfig {
    /// Atlas side length in texels.
    pub size: usize,
    /// Blend radius in texels.
    pub blend_radius: usize,
}

impl Default for TexConfig {
    fn default() -> Self {
        Self { size: 1024, blend_radius: 2 }
    }
}

/// Atlas, colour assignment, blending and hole filling.
pub fn texture_mesh(mesh: &Mesh, views: &[(Camera, Array)], cfg: &TexConfig) -> Result<TexturedMesh, TexError> {
    let atlas = build_atlas(mesh, cfg.size)?;
    let initial = assign_colors(mesh, &atlas, views)?;
    let blended = blend_colors(&initial, &atlas, cfg.blend_radius);
    let texture = fill_holes(&blended, &atlas)?;
    Ok(TexturedMesh { mesh: mesh.clone(), atlas, texture })
}
