//! Training objectives.
//!
//! Pixelwise depth, normal and mask terms compare a rendered view against its
//! ground truth; the structural term (1 - MS-SSIM on normal maps) only asks
//! for matching local structure. [`total_loss`] dispatches the two kinds over
//! views according to a [`Supervision`] plan: the default plan applies pixel
//! terms at the reference view 0 alone and structural terms at every other
//! view.

pub mod msssim;
mod pixel;
mod total;

pub use pixel::{depth_loss, mask_loss, normal_loss, structural_loss, valid_pixels};
pub use total::{total_loss, LossOutput, LossReport, Supervision, Target};

use thiserror::Error;

use crate::diffcore::DiffError;
use crate::isoext::RegWeights;
use crate::kvconfig::{ConfigError, KvConfig};
use crate::Real;

#[derive(Debug, Error)]
pub enum LossError {
    #[error("{op}: {detail}")]
    Shape { op: &'static str, detail: String },
    #[error("ground-truth depth {depth} at pixel {pixel} is not beyond d_min {d_min}")]
    DepthBelowMin { pixel: usize, depth: f64, d_min: f64 },
    #[error("normal at pixel {pixel} has length {norm}")]
    NonUnitNormal { pixel: usize, norm: f64 },
    #[error("{preds} rendered views but {targets} targets")]
    ViewCount { preds: usize, targets: usize },
    #[error("supervision references view {view} of {count}")]
    ViewIndex { view: usize, count: usize },
    #[error(transparent)]
    Diff(#[from] DiffError),
}

/// Term weights: `depth`, `normal` and `mask` scale the pixel terms,
/// `structural` the per-view structural term.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossWeights {
    pub depth: Real,
    pub normal: Real,
    pub mask: Real,
    pub structural: Real,
    pub reg: RegWeights,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { depth: 1.0, normal: 0.2, mask: 1.0, structural: 0.1, reg: RegWeights::default() }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let all = [
            ("loss.depth", self.depth),
            ("loss.normal", self.normal),
            ("loss.mask", self.mask),
            ("loss.structural", self.structural),
            ("reg.sdf_smooth", self.reg.sdf_smooth),
            ("reg.deform", self.reg.deform),
            ("reg.laplacian", self.reg.laplacian),
        ];
        for (key, v) in all {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(ConfigError::Value { key: key.into(), value: v.to_string(), detail: "must be a finite nonnegative number".into() });
            }
        }
        Ok(())
    }

    pub fn to_kv(&self, kv: &mut KvConfig) {
        kv.set("loss.depth", self.depth);
        kv.set("loss.normal", self.normal);
        kv.set("loss.mask", self.mask);
        kv.set("loss.structural", self.structural);
        kv.set("reg.sdf_smooth", self.reg.sdf_smooth);
        kv.set("reg.deform", self.reg.deform);
        kv.set("reg.laplacian", self.reg.laplacian);
    }

    pub fn from_kv(kv: &KvConfig) -> Result<Self, ConfigError> {
        let mut w = Self::default();
        kv.read_into("loss.depth", &mut w.depth)?;
        kv.read_into("loss.normal", &mut w.normal)?;
        kv.read_into("loss.mask", &mut w.mask)?;
        kv.read_into("loss.structural", &mut w.structural)?;
        kv.read_into("reg.sdf_smooth", &mut w.reg.sdf_smooth)?;
        kv.read_into("reg.deform", &mut w.reg.deform)?;
        kv.read_into("reg.laplacian", &mut w.reg.laplacian)?;
        w.validate()?;
        Ok(w)
    }
}
