//! Differentiable isosurface extraction from a signed-distance grid with
//! per-node deformations, plus the mesh regularizers.

mod extract;
mod mesh;
mod obj;
mod reg;
pub(crate) mod tables;

pub use extract::{extract_mesh, extract_mesh_op, vertex_gradients, EdgeSource, Extraction, ScalarGrid, VertexJacobian};
pub use mesh::{point_triangle_distance, Mesh};
pub use obj::{read_obj, write_obj, parse_obj, format_obj};
pub use reg::{deform_reg, laplacian_reg, reg_loss, sdf_smoothness, RegTerms, RegWeights};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IsoError {
    #[error("grid contains a non-finite value at node {0}")]
    NonFinite(usize),
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed OBJ line {line}: {detail}")]
    Obj { line: usize, detail: String },
    #[error(transparent)]
    Diff(#[from] crate::diffcore::DiffError),
}
