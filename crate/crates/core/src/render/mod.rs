//! Software rendering of geometric maps.
//!
//! [`rasterize`] and [`render_op`] z-buffer a triangle mesh into depth,
//! world-space normal and mask maps; the tape op carries gradients from all
//! three maps back to vertex positions. [`render_gt`] sphere-traces an
//! analytic SDF for ground truth. Camera space is x right, y down, z forward,
//! and pixel `(x, y)` has its centre at `(x + 0.5, y + 0.5)`.

mod dump;
mod raster;
mod silhouette;
mod trace;

pub use dump::{write_depth_pgm, write_mask_pgm, write_normal_ppm};
pub use raster::{rasterize, rasterize_with_band, render_op, Rendered};
pub use silhouette::soft_mask;
pub use trace::{render_gt, MAX_TRACE_STEPS};

use thiserror::Error;

use crate::{Array, Real};

/// Face id of pixels not covered by any triangle.
pub const BACKGROUND_FACE: i32 = -1;
/// Default width of the silhouette ramp, in pixels.
pub const DEFAULT_BAND: Real = 2.0;
/// Triangles with a vertex closer than this to the camera plane are skipped.
pub const NEAR_PLANE: Real = 1e-3;

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("silhouette band must be >= 1 pixel, got {0}")]
    Band(Real),
    #[error("resolution must be positive")]
    Resolution,
    #[error("vertex array must be [V, 3], got {0:?}")]
    VertexShape(Vec<usize>),
    #[error("triangle {tri} references vertex {vertex} of {count}")]
    Index { tri: usize, vertex: u32, count: usize },
    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Per-pixel geometric render output.
///
/// `depth` holds camera-space z with `+inf` for background; `normal` is
/// `[3, H, W]` world-space, zero on background. `faceid` is
/// [`BACKGROUND_FACE`] exactly where depth is infinite. The rasterizer's mask
/// additionally ramps to zero over half a band outside the silhouette, so a
/// few background pixels carry a small positive mask value.
#[derive(Clone, Debug)]
pub struct GBuffer {
    pub width: usize,
    pub height: usize,
    pub depth: Array,
    pub normal: Array,
    pub mask: Array,
    pub faceid: Vec<i32>,
    pub barycentric: Array,
}

impl GBuffer {
    pub fn background(width: usize, height: usize) -> Self {
        let n = width * height;
        Self {
            width,
            height,
            depth: Array::full(&[height, width], Real::INFINITY),
            normal: Array::zeros(&[3, height, width]),
            mask: Array::zeros(&[height, width]),
            faceid: vec![BACKGROUND_FACE; n],
            barycentric: Array::zeros(&[3, height, width]),
        }
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn is_covered(&self, p: usize) -> bool {
        self.faceid[p] != BACKGROUND_FACE
    }

    pub fn covered_count(&self) -> usize {
        self.faceid.iter().filter(|&&f| f != BACKGROUND_FACE).count()
    }

    /// Normal at pixel `p` as a triple.
    pub fn normal_at(&self, p: usize) -> [Real; 3] {
        let n = self.pixels();
        let d = self.normal.data();
        [d[p], d[n + p], d[2 * n + p]]
    }
}

fn check_resolution(resolution: usize) -> Result<(), RenderError> {
    if resolution == 0 {
        return Err(RenderError::Resolution);
    }
    Ok(())
}

fn check_band(band: Real) -> Result<(), RenderError> {
    if !(band >= 1.0) {
        return Err(RenderError::Band(band));
    }
    Ok(())
}
