//! The reconstruction network: a view-shared 2D encoder, projection-based
//! lifting with average pooling, residual 3D refinement and a trilinear +
//! MLP decoder onto the fine grid.

mod config;
mod lift;
mod model;
mod params;

pub use config::NetConfig;
pub use lift::{canonical_view_order, lift_features};
pub use model::{decode_grid, extract_2d_features, refine_3d, GridVars, Model};
pub use params::{BoundParams, Params};

use thiserror::Error;

use crate::arrayio::ArrayIoError;
use crate::diffcore::DiffError;

#[derive(Debug, Error)]
pub enum NetError {
    #[error(transparent)]
    Diff(#[from] DiffError),
    #[error("invalid network configuration: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("lifting needs at least one view")]
    NoViews,
    #[error("missing parameter `{0}`")]
    MissingParam(String),
    #[error("parameter `{name}` has shape {found:?}, expected {expected:?}")]
    ParamShape {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error(transparent)]
    Io(#[from] ArrayIoError),
}
