//! Inference: one forward pass from posed images to a mesh.

use super::TrainError;
use crate::geometry::{Camera, ViewSet};
use crate::isoext::{extract_mesh, Mesh, ScalarGrid};
use crate::liftnet::Model;
use crate::Array;

/// Reconstructs a mesh from any number (at least one) of posed RGB images.
/// The reference view is not needed. `resolution` is the image size the
/// model was trained at.
pub fn reconstruct(model: &Model, resolution: usize, images: &[(Camera, Array)]) -> Result<Mesh, TrainError> {
    if images.is_empty() {
        return Err(TrainError::Mismatch("no input images; pass at least one posed image".into()));
    }
    for (i, (cam, img)) in images.iter().enumerate() {
        let s = img.shape();
        if s.len() != 3 || s[0] != 3 {
            return Err(TrainError::Mismatch(format!("image {i} has shape {s:?}, expected [3, H, W] RGB")));
        }
        if s[1] != resolution || s[2] != resolution {
            return Err(TrainError::Mismatch(format!(
                "image {i} is {}x{} but the checkpoint was trained at {resolution}x{resolution}; \
                 resample the images or regenerate the data with --resolution {resolution}",
                s[2], s[1]
            )));
        }
        if cam.width() != resolution || cam.height() != resolution {
            return Err(TrainError::Mismatch(format!(
                "camera {i} is set up for {}x{} pixels but its image is {resolution}x{resolution}; \
                 rebuild the view set at resolution {resolution}",
                cam.width(),
                cam.height()
            )));
        }
    }
    let (sdf, deform) = model.infer(images)?;
    let grid = ScalarGrid::new(model.config.fine_res, sdf.into_data(), deform.into_data())?;
    Ok(extract_mesh(&grid)?.mesh)
}

/// As [`reconstruct`], pairing `images` with the views of `views` in order.
pub fn reconstruct_views(model: &Model, resolution: usize, views: &ViewSet, images: &[Array]) -> Result<Mesh, TrainError> {
    if views.len() != images.len() {
        return Err(TrainError::Mismatch(format!(
            "{} images but {} cameras; supply one camera per image in the same order",
            images.len(),
            views.len()
        )));
    }
    let posed: Vec<(Camera, Array)> = views.cameras().into_iter().zip(images.iter().cloned()).collect();
    reconstruct(model, resolution, &posed)
}
