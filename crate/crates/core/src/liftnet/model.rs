use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{lift_features, BoundParams, NetConfig, NetError, Params};
use crate::diffcore::{Activation, Array, DenseLayer, Tape, Var};
use crate::geometry::{Camera, Lattice};
use crate::Real;

/// Smallest accepted input image side.
pub const MIN_INPUT_SIZE: usize = 16;

/// Decoded fine-grid fields on the tape: `sdf: [N]` and `deform: [N, 3]` in
/// cell units, with `N = res^3` in lattice order.
#[derive(Clone, Copy, Debug)]
pub struct GridVars {
    pub sdf: Var,
    pub deform: Var,
    pub res: usize,
}

/// Bound on the deformation activation, just inside half a cell.
pub const DEFORM_LIMIT: Real = 0.49;

fn res_block(tape: &mut Tape, p: &BoundParams, name: &str, x: Var, three_d: bool) -> Result<Var, NetError> {
    let conv = |tape: &mut Tape, x: Var, layer: &str| -> Result<Var, NetError> {
        let w = p.var(&format!("{name}.{layer}.w"))?;
        let b = p.var(&format!("{name}.{layer}.b"))?;
        let pad = tape.shape(w)[2] / 2;
        Ok(if three_d {
            tape.conv3d(x, w, Some(b), 1, pad)?
        } else {
            tape.conv2d(x, w, Some(b), 1, pad)?
        })
    };
    let h = conv(tape, x, "res1")?;
    let h = tape.relu(h);
    let h = conv(tape, h, "res2")?;
    let mut y = tape.add(x, h)?;
    if p.maybe(&format!("{name}.proj.w")).is_some() {
        y = conv(tape, y, "proj")?;
    }
    Ok(y)
}

/// View-shared 2D features of one image `[C_in, H, W]`, resampled to
/// `[C, feature_res, feature_res]`.
pub fn extract_2d_features(tape: &mut Tape, p: &BoundParams, cfg: &NetConfig, image: Var) -> Result<Var, NetError> {
    let s = tape.shape(image).to_vec();
    if s.len() != 3 || s[0] != cfg.input_channels() {
        return Err(NetError::Input(format!(
            "image shape {s:?}, expected [{}, H, W]",
            cfg.input_channels()
        )));
    }
    if s[1] != s[2] || s[1] < MIN_INPUT_SIZE {
        return Err(NetError::Input(format!(
            "image must be square and at least {MIN_INPUT_SIZE} pixels, got {}x{}",
            s[2], s[1]
        )));
    }
    let mut x = image;
    for i in 0..cfg.encoder.len().saturating_sub(1) {
        let w = p.var(&format!("enc.{i}.w"))?;
        let b = p.var(&format!("enc.{i}.b"))?;
        let stride = if i == 0 { 2 } else { 1 };
        x = tape.conv2d(x, w, Some(b), stride, cfg.kernel / 2)?;
        x = tape.relu(x);
    }
    x = tape.resize_bilinear(x, cfg.feature_res, cfg.feature_res)?;
    for i in 0..cfg.conv2d.len() - 1 {
        x = res_block(tape, p, &format!("c2d.{i}"), x, false)?;
    }
    Ok(x)
}

/// Residual 3D convolutions over a `[C, R, R, R]` volume.
pub fn refine_3d(tape: &mut Tape, p: &BoundParams, cfg: &NetConfig, volume: Var) -> Result<Var, NetError> {
    let s = tape.shape(volume);
    if s.len() != 4 || s[0] != cfg.conv3d[0] {
        return Err(NetError::Input(format!(
            "volume shape {s:?}, expected [{}, R, R, R]",
            cfg.conv3d[0]
        )));
    }
    let mut x = volume;
    for i in 0..cfg.conv3d.len() - 1 {
        x = res_block(tape, p, &format!("c3d.{i}"), x, true)?;
    }
    Ok(x)
}

/// Trilinearly samples the coarse volume at every node of the `fine_res`
/// lattice and maps each feature through the shared MLP. The first output
/// channel is the signed distance, the other three a deformation bounded by
/// [`DEFORM_LIMIT`] cells.
pub fn decode_grid(tape: &mut Tape, p: &BoundParams, cfg: &NetConfig, volume: Var, fine_res: usize) -> Result<GridVars, NetError> {
    let s = tape.shape(volume).to_vec();
    if s.len() != 4 || s[1] != s[2] || s[2] != s[3] {
        return Err(NetError::Input(format!("volume shape {s:?} is not [C,R,R,R]")));
    }
    let r = s[1];
    if fine_res < r {
        return Err(NetError::Input(format!("fine resolution {fine_res} below coarse {r}")));
    }
    let fine = Lattice::new(fine_res);
    let n = fine.num_nodes();
    let scale = (r - 1) as Real;
    let denom = (fine_res - 1) as Real;
    let mut xyz = Vec::with_capacity(n * 3);
    for idx in 0..n {
        let (i, j, k) = fine.coords(idx);
        xyz.extend_from_slice(&[
            i as Real * scale / denom,
            j as Real * scale / denom,
            k as Real * scale / denom,
        ]);
    }
    let xyz = tape.constant(Array::new(vec![n, 3], xyz)?);
    let feats = tape.trilinear_interp(volume, xyz)?;
    let nl = cfg.mlp.len() - 1;
    let layers = (0..nl)
        .map(|i| {
            Ok(DenseLayer {
                weight: p.var(&format!("mlp.{i}.w"))?,
                bias: p.var(&format!("mlp.{i}.b"))?,
                activation: if i + 1 == nl { Activation::Identity } else { Activation::Relu },
            })
        })
        .collect::<Result<Vec<_>, NetError>>()?;
    let out = tape.mlp_forward(feats, &layers)?;
    let sdf = tape.columns(out, 0, 1)?;
    let sdf = tape.reshape(sdf, &[n])?;
    let raw = tape.columns(out, 1, 4)?;
    let deform = tape.scaled_tanh(raw, DEFORM_LIMIT);
    Ok(GridVars { sdf, deform, res: fine_res })
}

/// Configuration plus weights.
#[derive(Clone, Debug, PartialEq)]
pub struct Model {
    pub config: NetConfig,
    pub params: Params,
}

impl Model {
    pub fn new(config: NetConfig, seed: u64) -> Result<Self, NetError> {
        config.validate()?;
        let params = Params::init(&config, &mut ChaCha8Rng::seed_from_u64(seed));
        Ok(Self { config, params })
    }

    pub fn from_parts(config: NetConfig, params: Params) -> Result<Self, NetError> {
        config.validate()?;
        params.check(&config)?;
        Ok(Self { config, params })
    }

    pub fn parameter_count(&self) -> usize {
        self.params.count()
    }

    /// `|p| - prior_radius` at every node of the fine lattice.
    pub fn prior_field(&self) -> Array {
        let l = Lattice::new(self.config.fine_res);
        let data = (0..l.num_nodes())
            .map(|idx| {
                let (i, j, k) = l.coords(idx);
                l.position(i, j, k).norm() - self.config.prior_radius
            })
            .collect();
        Array::new(vec![l.num_nodes()], data).expect("lattice size")
    }

    /// Full forward pass from posed images to the fine SDF and deformation.
    pub fn forward(&self, tape: &mut Tape, p: &BoundParams, images: &[(Camera, Var)]) -> Result<GridVars, NetError> {
        if images.is_empty() {
            return Err(NetError::NoViews);
        }
        let mut maps = Vec::with_capacity(images.len());
        for (cam, img) in images {
            let s = tape.shape(*img);
            if s.len() == 3 && (s[1] != cam.height() || s[2] != cam.width()) {
                return Err(NetError::Input(format!(
                    "image {}x{} does not match camera {}x{}",
                    s[2],
                    s[1],
                    cam.width(),
                    cam.height()
                )));
            }
            maps.push((*cam, extract_2d_features(tape, p, &self.config, *img)?));
        }
        let vol = lift_features(tape, &maps, Lattice::new(self.config.grid_res))?;
        let vol = refine_3d(tape, p, &self.config, vol)?;
        let grid = decode_grid(tape, p, &self.config, vol, self.config.fine_res)?;
        let prior = self.prior_field();
        let sdf = tape.add_const(grid.sdf, &prior)?;
        Ok(GridVars { sdf, ..grid })
    }

    /// Forward pass on constant inputs, returning plain arrays.
    pub fn infer(&self, images: &[(Camera, Array)]) -> Result<(Array, Array), NetError> {
        let mut tape = Tape::new();
        let p = self.params.bind(&mut tape);
        let vars: Vec<(Camera, Var)> = images.iter().map(|(c, a)| (*c, tape.constant(a.clone()))).collect();
        let g = self.forward(&mut tape, &p, &vars)?;
        Ok((tape.value(g.sdf).clone(), tape.value(g.deform).clone()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::gradcheck::check_gradients;
    use crate::geometry::{Intrinsics, ViewSet};
    use rand::Rng;

    fn rand_array(shape: &[usize], rng: &mut ChaCha8Rng) -> Array {
        let n = shape.iter().product();
        Array::new(shape.to_vec(), (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    fn tiny() -> NetConfig {
        NetConfig {
            encoder: vec![3, 2],
            conv2d: vec![2, 3],
            conv3d: vec![3, 2],
            mlp: vec![2, 3, 4],
            d2d: 3,
            kernel: 3,
            feature_res: 8,
            grid_res: 3,
            fine_res: 4,
            prior_radius: 0.5,
        }
    }

    #[test]
    fn identical_images_give_identical_maps() {
        let m = Model::new(NetConfig::desk(), 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let img = rand_array(&[3, 32, 32], &mut rng);
        let mut tape = Tape::new();
        let p = m.params.bind(&mut tape);
        let a = tape.constant(img.clone());
        let b = tape.constant(img);
        let fa = extract_2d_features(&mut tape, &p, &m.config, a).unwrap();
        let fb = extract_2d_features(&mut tape, &p, &m.config, b).unwrap();
        assert_eq!(tape.value(fa), tape.value(fb));
    }

    #[test]
    fn feature_maps_are_64_for_any_input_size() {
        let m = Model::new(NetConfig::desk(), 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for n in [128usize, 256, 320] {
            let mut tape = Tape::new();
            let p = m.params.bind(&mut tape);
            let x = tape.constant(rand_array(&[3, n, n], &mut rng));
            let f = extract_2d_features(&mut tape, &p, &m.config, x).unwrap();
            assert_eq!(tape.shape(f), &[8, 64, 64]);
        }
        let mut tape = Tape::new();
        let p = m.params.bind(&mut tape);
        let x = tape.constant(Array::zeros(&[3, 32, 48]));
        assert!(extract_2d_features(&mut tape, &p, &m.config, x).is_err());
        let x = tape.constant(Array::zeros(&[3, 8, 8]));
        assert!(extract_2d_features(&mut tape, &p, &m.config, x).is_err());
    }

    #[test]
    fn encoder_receives_gradient() {
        let m = Model::new(NetConfig::desk(), 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut tape = Tape::new();
        let p = m.params.bind(&mut tape);
        let x = tape.constant(rand_array(&[3, 32, 32], &mut rng));
        let f = extract_2d_features(&mut tape, &p, &m.config, x).unwrap();
        let wts = tape.constant(rand_array(&[8 * 64 * 64], &mut rng));
        let flat = tape.reshape(f, &[8 * 64 * 64]).unwrap();
        let y = tape.mul(flat, wts).unwrap();
        let loss = tape.sum(y);
        tape.backward(loss).unwrap();
        let g = tape.grad_array(p.var("enc.0.w").unwrap());
        assert!(g.data().iter().any(|&v| v != 0.0));
    }

    #[test]
    fn zero_residual_branch_is_identity() {
        let mut m = Model::new(NetConfig::desk(), 0).unwrap();
        for name in ["c3d.0.res2.w", "c3d.0.res2.b", "c3d.1.res2.w", "c3d.1.res2.b"] {
            m.params.get_mut(name).unwrap().data_mut().fill(0.0);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v = rand_array(&[8, 5, 5, 5], &mut rng);
        let mut tape = Tape::new();
        let p = m.params.bind(&mut tape);
        let x = tape.constant(v.clone());
        let y = refine_3d(&mut tape, &p, &m.config, x).unwrap();
        assert_eq!(tape.value(y), &v);
    }

    #[test]
    fn full_widths_keep_volume_shape() {
        let cfg = NetConfig { conv3d: vec![32; 5], mlp: vec![32, 4], ..tiny() };
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let params = Params::init(&NetConfig { conv2d: vec![2, 32], ..cfg.clone() }, &mut rng);
        let mut tape = Tape::new();
        let p = params.bind(&mut tape);
        let x = tape.constant(rand_array(&[32, 4, 4, 4], &mut rng));
        let y = refine_3d(&mut tape, &p, &cfg, x).unwrap();
        assert_eq!(tape.shape(y), &[32, 4, 4, 4]);
    }

    #[test]
    fn constant_volume_decodes_to_constant_sdf() {
        let m = Model::new(NetConfig::desk(), 3).unwrap();
        let mut tape = Tape::new();
        let p = m.params.bind(&mut tape);
        let x = tape.constant(Array::full(&[8, 4, 4, 4], 0.3));
        let g = decode_grid(&mut tape, &p, &m.config, x, 7).unwrap();
        let s = tape.value(g.sdf).data();
        assert!(s.iter().all(|&v| v == s[0]));
    }

    #[test]
    fn coincident_nodes_decode_exactly() {
        let m = Model::new(NetConfig::desk(), 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let vol = rand_array(&[8, 4, 4, 4], &mut rng);
        let mut tape = Tape::new();
        let p = m.params.bind(&mut tape);
        let x = tape.constant(vol.clone());
        let g = decode_grid(&mut tape, &p, &m.config, x, 7).unwrap();
        // Fine node (2, 4, 6) sits on coarse node (1, 2, 3).
        let coarse = crate::diffcore::trilinear_at(&vol, [1.0, 2.0, 3.0]);
        let mut t2 = Tape::new();
        let p2 = m.params.bind(&mut t2);
        let f = t2.constant(Array::new(vec![1, 8], coarse).unwrap());
        let layers: Vec<DenseLayer> = (0..3)
            .map(|i| DenseLayer {
                weight: p2.var(&format!("mlp.{i}.w")).unwrap(),
                bias: p2.var(&format!("mlp.{i}.b")).unwrap(),
                activation: if i == 2 { Activation::Identity } else { Activation::Relu },
            })
            .collect();
        let o = t2.mlp_forward(f, &layers).unwrap();
        let idx = Lattice::new(7).index(2, 4, 6);
        assert_eq!(tape.value(g.sdf).data()[idx], t2.value(o).data()[0]);
    }

    #[test]
    fn deformation_is_bounded() {
        let mut m = Model::new(NetConfig::desk(), 3).unwrap();
        // Large output weights push the activation into saturation.
        for x in m.params.get_mut("mlp.2.w").unwrap().data_mut() {
            *x *= 1e4;
        }
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut tape = Tape::new();
        let p = m.params.bind(&mut tape);
        let x = tape.constant(rand_array(&[8, 12, 12, 12], &mut rng));
        let g = decode_grid(&mut tape, &p, &m.config, x, 47).unwrap();
        let d = tape.value(g.deform);
        assert!(d.len() >= 3 * 100_000);
        assert!(d.data().iter().all(|v| v.abs() <= 0.5));
    }

    #[test]
    fn end_to_end_gradients() {
        let cfg = tiny();
        let k = Intrinsics::from_fov(16, 16, 50.0);
        let vs = ViewSet::default_preset(2.5, k).unwrap();
        let cams: Vec<Camera> = vs.cameras()[1..3].to_vec();
        let model = Model::new(cfg.clone(), 5).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let imgs: Vec<Array> = (0..2).map(|_| rand_array(&[3, 16, 16], &mut rng)).collect();
        let wsdf = rand_array(&[64], &mut rng);
        let wdef = rand_array(&[64, 3], &mut rng);
        let names: Vec<String> = model.params.entries.iter().map(|(n, _)| n.clone()).collect();
        let inputs: Vec<Array> = model.params.entries.iter().map(|(_, a)| a.clone()).collect();
        let f = move |tape: &mut Tape, x: &[Var]| {
            let params = Params {
                entries: names.iter().cloned().zip(x.iter().map(|v| tape.value(*v).clone())).collect(),
            };
            let bound = BoundParams::from_vars(&params, x);
            let images: Vec<(Camera, Var)> = cams.iter().zip(&imgs).map(|(c, i)| (*c, tape.constant(i.clone()))).collect();
            let m = Model { config: cfg.clone(), params };
            let g = m.forward(tape, &bound, &images).unwrap();
            let a = tape.constant(wsdf.clone());
            let b = tape.constant(wdef.clone());
            let s = tape.mul(g.sdf, a).unwrap();
            let d = tape.mul(g.deform, b).unwrap();
            let s = tape.sum(s);
            let d = tape.sum(d);
            tape.add(s, d).unwrap()
        };
        check_gradients(&inputs, 1e-6, 1e-5, f).unwrap();
    }
}
