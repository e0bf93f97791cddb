//! Training samples held in memory, with lazily prepared clean inputs and
//! extra supervision views.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::TrainError;
use crate::geometry::{bounding_sphere_min_depth, Camera, View, ViewSet};
use crate::render::{render_gt, GBuffer};
use crate::synthdata::{render_sample, Dataset, GeneratedShape, TrainingSample};
use crate::{exec, Array, Real};

/// Ground-truth maps of one supervised view.
#[derive(Clone, Debug)]
pub struct ViewTarget {
    pub camera: Camera,
    /// Background depth replaced by 0 so the array stays finite.
    pub depth: Array,
    pub normal: Array,
    pub mask: Array,
    pub d_min: Real,
}

impl ViewTarget {
    pub fn from_gbuffer(camera: &Camera, g: &GBuffer) -> Self {
        Self {
            camera: *camera,
            depth: g.depth.map(|d| if d.is_finite() { d } else { 0.0 }),
            normal: g.normal.clone(),
            mask: g.mask.clone(),
            d_min: bounding_sphere_min_depth(camera, 1.0).unwrap_or(0.0),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ShapeData {
    pub id: String,
    pub shape: GeneratedShape,
    pub views: ViewSet,
    /// Stored (simulated) inputs, one per generated view.
    pub inputs: Vec<Array>,
    /// Unperturbed inputs, filled by [`TrainData::prepare`].
    pub clean: Option<Vec<Array>>,
    /// Reference view first, then the generated views.
    pub targets: Vec<ViewTarget>,
    pub extra: Option<Vec<ViewTarget>>,
}

impl ShapeData {
    pub fn from_sample(s: &TrainingSample) -> Self {
        let inputs = s.input_indices().iter().map(|&i| s.images[i].clone()).collect();
        let mut order = vec![s.reference];
        order.extend(s.input_indices());
        let targets = order.iter().map(|&i| ViewTarget::from_gbuffer(s.views.camera(i), &s.gt[i])).collect();
        Self { id: s.shape_id.clone(), shape: s.shape.clone(), views: s.views.clone(), inputs, clean: None, targets, extra: None }
    }

    /// Cameras of the generated views, in input order.
    pub fn input_cameras(&self) -> Vec<Camera> {
        (1..self.views.len()).map(|i| *self.views.camera(i)).collect()
    }

    pub fn resolution(&self) -> usize {
        self.inputs.first().map_or(0, |a| a.shape()[2])
    }
}

/// Random supervision cameras for one shape, fixed by the shape seed.
pub fn extra_views(seed: u64, count: usize, like: &View) -> Result<Vec<Camera>, TrainError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_e8a7_0000_0001);
    (0..count)
        .map(|_| {
            let z: Real = rng.gen_range(-1.0..1.0);
            let phi: Real = rng.gen_range(0.0..std::f64::consts::TAU as Real);
            let r = (1.0 - z * z).sqrt();
            let (x, y) = (r * phi.cos(), z);
            let zz = r * phi.sin();
            let az = x.atan2(zz).to_degrees();
            let el = y.asin().to_degrees().clamp(-85.0, 85.0);
            Ok(View::new(az, el, like.radius, like.camera.intrinsics)?.camera)
        })
        .collect()
}

#[derive(Clone, Debug, Default)]
pub struct TrainData {
    pub shapes: Vec<ShapeData>,
}

impl TrainData {
    pub fn from_samples(samples: &[TrainingSample]) -> Self {
        Self { shapes: samples.iter().map(ShapeData::from_sample).collect() }
    }

    /// Loads every shape of `split` from an on-disk dataset.
    pub fn from_dataset(ds: &Dataset, split: &str) -> Result<Self, TrainError> {
        let idx = ds.indices_in(split);
        let samples = exec::map_indexed(idx.len(), |k| ds.load(idx[k])).into_iter().collect::<Result<Vec<_>, _>>()?;
        Ok(Self::from_samples(&samples))
    }

    pub fn len(&self) -> usize {
        self.shapes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shapes.is_empty()
    }

    pub fn resolution(&self) -> usize {
        self.shapes.first().map_or(0, |s| s.resolution())
    }

    /// Renders what the given needs call for and is not cached yet.
    pub fn prepare(&mut self, clean: bool, extra: usize) -> Result<(), TrainError> {
        let todo: Vec<usize> = (0..self.shapes.len())
            .filter(|&i| {
                let s = &self.shapes[i];
                (clean && s.clean.is_none()) || (extra > 0 && s.extra.as_ref().is_none_or(|e| e.len() != extra))
            })
            .collect();
        let shapes = &self.shapes;
        let made = exec::map_indexed(todo.len(), |k| -> Result<_, TrainError> {
            let s = &shapes[todo[k]];
            let res = s.resolution();
            let c = if clean && s.clean.is_none() {
                let r = render_sample(&s.shape, &s.views, res)?;
                Some(r.input_indices().iter().map(|&i| r.images[i].clone()).collect::<Vec<_>>())
            } else {
                None
            };
            let e = if extra > 0 {
                let cams = extra_views(s.shape.seed, extra, &s.views.views[0])?;
                let t = cams
                    .iter()
                    .map(|cam| Ok(ViewTarget::from_gbuffer(cam, &render_gt(&s.shape.sdf, cam, res)?)))
                    .collect::<Result<Vec<_>, TrainError>>()?;
                Some(t)
            } else {
                None
            };
            Ok((c, e))
        });
        for (k, r) in made.into_iter().enumerate() {
            let (c, e) = r?;
            let s = &mut self.shapes[todo[k]];
            if c.is_some() {
                s.clean = c;
            }
            if e.is_some() {
                s.extra = e;
            }
        }
        Ok(())
    }
}
