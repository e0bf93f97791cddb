//! On-disk datasets.
//!
//! Layout: `<root>/<shape_id>/<view>.{img,depth,normal,mask}`, each file a
//! single-array container, plus `<root>/manifest.txt` with one line per
//! (shape, view):
//!
//! ```text
//! id split family seed severity view azimuth elevation radius fov resolution
//! ```
//!
//! Shapes are regenerated from `(family, seed)` when loading, so clean images
//! and additional ground truth can be rendered on demand.

use std::fs;
use std::path::{Path, PathBuf};

use super::perturb::{perturb_views, InconsistencyProfile};
use super::sample::{input_views, render_sample, TrainingSample};
use super::shapes::{generate_family, ShapeFamily};
use super::SynthError;
use crate::arrayio::{read_arrays, write_arrays};
use crate::evalkit::psnr_map;
use crate::geometry::{Intrinsics, View, ViewSet, DEFAULT_CAMERA_RADIUS};
use crate::render::{GBuffer, BACKGROUND_FACE};
use crate::{exec, Array, Real};

pub const MANIFEST: &str = "manifest.txt";
const EXTS: [&str; 4] = ["img", "depth", "normal", "mask"];
/// Seed offset separating the evaluation split from training.
const EVAL_OFFSET: u64 = 1_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Eval,
}

impl Split {
    pub fn name(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Eval => "eval",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetConfig {
    pub train: usize,
    pub eval: usize,
    /// Generated views per shape, not counting the reference.
    pub views: usize,
    pub resolution: usize,
    pub severity: Real,
    pub seed: u64,
    pub family: ShapeFamily,
    pub fov_deg: Real,
    pub camera_radius: Real,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            train: 64,
            eval: 8,
            views: 6,
            resolution: 64,
            severity: 0.5,
            seed: 0,
            family: ShapeFamily::Composite,
            fov_deg: 50.0,
            camera_radius: DEFAULT_CAMERA_RADIUS,
        }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<(), SynthError> {
        if self.train + self.eval == 0 {
            return Err(SynthError::Config("dataset needs at least one shape".into()));
        }
        if self.views == 0 || self.resolution == 0 {
            return Err(SynthError::Config("views and resolution must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.severity) {
            return Err(SynthError::Config(format!("severity {} outside [0, 1]", self.severity)));
        }
        Ok(())
    }

    pub fn view_set(&self) -> Result<ViewSet, SynthError> {
        input_views(self.views, self.camera_radius, Intrinsics::from_fov(self.resolution, self.resolution, self.fov_deg))
    }

    /// `(split, index)` for every shape, training first.
    pub fn entries(&self) -> Vec<(Split, usize)> {
        (0..self.train).map(|i| (Split::Train, i)).chain((0..self.eval).map(|i| (Split::Eval, i))).collect()
    }
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn shape_seed(base: u64, split: Split, index: usize) -> u64 {
    let offset = if split == Split::Eval { EVAL_OFFSET } else { 0 };
    splitmix(base ^ splitmix(index as u64 + offset))
}

pub fn shape_id(split: Split, index: usize) -> String {
    format!("{}_{index:04}", split.name())
}

/// The clean and perturbed sample for one dataset entry.
pub fn make_sample(cfg: &DatasetConfig, views: &ViewSet, split: Split, index: usize) -> Result<TrainingSample, SynthError> {
    let seed = shape_seed(cfg.seed, split, index);
    let shape = generate_family(cfg.family, seed);
    let mut clean = render_sample(&shape, views, cfg.resolution)?;
    clean.shape_id = shape_id(split, index);
    let profile = InconsistencyProfile::for_views(views, cfg.severity, seed);
    perturb_views(&clean, &profile)
}

/// Every sample of the dataset, generated in parallel. A pure function of
/// the configuration.
pub fn generate_dataset(cfg: &DatasetConfig) -> Result<Vec<TrainingSample>, SynthError> {
    cfg.validate()?;
    let views = cfg.view_set()?;
    let entries = cfg.entries();
    exec::map_indexed(entries.len(), |i| make_sample(cfg, &views, entries[i].0, entries[i].1)).into_iter().collect()
}

fn manifest_lines(sample: &TrainingSample, split: &str, fov: Real) -> String {
    let mut s = String::new();
    for (i, v) in sample.views.views.iter().enumerate() {
        s.push_str(&format!(
            "{} {split} {} {} {} {i} {} {} {} {fov} {}\n",
            sample.shape_id,
            sample.shape.family.name(),
            sample.shape.seed,
            sample.severity,
            v.azimuth,
            v.elevation,
            v.radius,
            sample.resolution(),
        ));
    }
    s
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> SynthError + '_ {
    move |source| SynthError::Io { path: path.display().to_string(), source }
}

fn write_shape(dir: &Path, sample: &TrainingSample) -> Result<(), SynthError> {
    let tmp = dir.join(format!("{}.partial", sample.shape_id));
    fs::create_dir_all(&tmp).map_err(io_err(&tmp))?;
    for (i, (img, g)) in sample.images.iter().zip(&sample.gt).enumerate() {
        let items = [img, &g.depth, &g.normal, &g.mask];
        for (ext, arr) in EXTS.iter().zip(items) {
            let path = tmp.join(format!("{i}.{ext}"));
            write_arrays(&path, &[(ext.to_string(), arr.clone())])
                .map_err(|e| SynthError::Corrupt { path: path.display().to_string(), detail: e.to_string() })?;
        }
    }
    let dst = dir.join(&sample.shape_id);
    fs::rename(&tmp, &dst).map_err(io_err(&dst))
}

// Fault-injection hook for tests: fail after writing this many shapes.
#[cfg(test)]
thread_local! {
    pub(crate) static FAIL_AFTER: std::cell::Cell<Option<usize>> = const { std::cell::Cell::new(None) };
}

fn staging_dir(root: &Path) -> PathBuf {
    let name = root.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "dataset".into());
    root.with_file_name(format!(".{name}.staging-{}", std::process::id()))
}

fn prepare_root(root: &Path) -> Result<(), SynthError> {
    if root.exists() {
        let empty = fs::read_dir(root).map_err(io_err(root))?.next().is_none();
        if !empty {
            return Err(SynthError::Exists(root.display().to_string()));
        }
        fs::remove_dir(root).map_err(io_err(root))?;
    }
    Ok(())
}

/// Writes samples under `root`. Everything is staged in a sibling
/// directory and moved into place at the end; on any error the staging
/// directory is removed and `root` is left absent.
pub fn write_dataset(samples: &[TrainingSample], splits: &[Split], root: &Path, fov: Real) -> Result<String, SynthError> {
    assert_eq!(samples.len(), splits.len());
    prepare_root(root)?;
    let stage = staging_dir(root);
    let result = (|| {
        let _ = fs::remove_dir_all(&stage);
        fs::create_dir_all(&stage).map_err(io_err(&stage))?;
        let mut manifest = String::new();
        for (k, (s, split)) in samples.iter().zip(splits).enumerate() {
            #[cfg(test)]
            if FAIL_AFTER.with(|f| f.get()) == Some(k) {
                return Err(SynthError::Io { path: stage.display().to_string(), source: std::io::Error::other("injected failure") });
            }
            let _ = k;
            write_shape(&stage, s)?;
            manifest.push_str(&manifest_lines(s, split.name(), fov));
        }
        let mpath = stage.join(MANIFEST);
        fs::write(&mpath, &manifest).map_err(io_err(&mpath))?;
        fs::rename(&stage, root).map_err(io_err(root))?;
        Ok(manifest)
    })();
    if result.is_err() {
        let _ = fs::remove_dir_all(&stage);
    }
    result
}

/// Generates and writes a dataset shape by shape, in parallel, without
/// holding it all in memory.
pub fn generate_to_disk(cfg: &DatasetConfig, root: &Path) -> Result<String, SynthError> {
    cfg.validate()?;
    let views = cfg.view_set()?;
    prepare_root(root)?;
    let stage = staging_dir(root);
    let entries = cfg.entries();
    let result = (|| {
        let _ = fs::remove_dir_all(&stage);
        fs::create_dir_all(&stage).map_err(io_err(&stage))?;
        let parts = exec::map_indexed(entries.len(), |i| -> Result<String, SynthError> {
            let (split, idx) = entries[i];
            let s = make_sample(cfg, &views, split, idx)?;
            write_shape(&stage, &s)?;
            Ok(manifest_lines(&s, split.name(), cfg.fov_deg))
        });
        let manifest = parts.into_iter().collect::<Result<Vec<_>, _>>()?.concat();
        let mpath = stage.join(MANIFEST);
        fs::write(&mpath, &manifest).map_err(io_err(&mpath))?;
        fs::rename(&stage, root).map_err(io_err(root))?;
        Ok(manifest)
    })();
    if result.is_err() {
        let _ = fs::remove_dir_all(&stage);
    }
    result
}

/// One shape's manifest entry.
#[derive(Clone, Debug, PartialEq)]
pub struct ShapeEntry {
    pub id: String,
    pub split: String,
    pub family: ShapeFamily,
    pub seed: u64,
    pub severity: Real,
    pub views: ViewSet,
    pub resolution: usize,
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub root: PathBuf,
    pub shapes: Vec<ShapeEntry>,
}

impl Dataset {
    pub fn open(root: &Path) -> Result<Self, SynthError> {
        let mpath = root.join(MANIFEST);
        let text = fs::read_to_string(&mpath).map_err(io_err(&mpath))?;
        let mut shapes: Vec<ShapeEntry> = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let bad = |detail: String| SynthError::Manifest { line: ln + 1, detail };
            let f: Vec<&str> = line.split_whitespace().collect();
            if f.is_empty() {
                continue;
            }
            if f.len() != 11 {
                return Err(bad(format!("expected 11 fields, found {}", f.len())));
            }
            let num = |i: usize| f[i].parse::<Real>().map_err(|e| bad(format!("field {}: {e}", i + 1)));
            let int = |i: usize| f[i].parse::<u64>().map_err(|e| bad(format!("field {}: {e}", i + 1)));
            let family = ShapeFamily::parse(f[2]).ok_or_else(|| bad(format!("unknown family {}", f[2])))?;
            let res = int(10)? as usize;
            let view = View::new(num(6)?, num(7)?, num(8)?, Intrinsics::from_fov(res, res, num(9)?)).map_err(|e| bad(e.to_string()))?;
            let vi = int(5)? as usize;
            match shapes.last_mut() {
                Some(s) if s.id == f[0] => {
                    if vi != s.views.len() {
                        return Err(bad(format!("view {vi} out of order")));
                    }
                    s.views.views.push(view);
                }
                _ => {
                    if vi != 0 {
                        return Err(bad(format!("shape {} starts at view {vi}", f[0])));
                    }
                    shapes.push(ShapeEntry {
                        id: f[0].to_string(),
                        split: f[1].to_string(),
                        family,
                        seed: int(3)?,
                        severity: num(4)?,
                        views: ViewSet { views: vec![view] },
                        resolution: res,
                    });
                }
            }
        }
        Ok(Self { root: root.to_path_buf(), shapes })
    }

    pub fn len(&self) -> usize {
        self.shapes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.shapes.is_empty()
    }

    pub fn indices_in(&self, split: &str) -> Vec<usize> {
        (0..self.shapes.len()).filter(|&i| self.shapes[i].split == split).collect()
    }

    fn read_one(&self, path: &Path, shape: &[usize]) -> Result<Array, SynthError> {
        let corrupt = |detail: String| SynthError::Corrupt { path: path.display().to_string(), detail };
        let arrays = read_arrays(path).map_err(|e| corrupt(e.to_string()))?;
        let arr = arrays.into_iter().next().ok_or_else(|| corrupt("no array".into()))?.1;
        if arr.shape() != shape {
            return Err(corrupt(format!("expected shape {shape:?}, found {:?}", arr.shape())));
        }
        Ok(arr)
    }

    /// Loads shape `i` with its stored (possibly perturbed) images.
    pub fn load(&self, i: usize) -> Result<TrainingSample, SynthError> {
        let e = &self.shapes[i];
        let r = e.resolution;
        let dir = self.root.join(&e.id);
        let mut images = Vec::new();
        let mut gt = Vec::new();
        for v in 0..e.views.len() {
            let p = |ext: &str| dir.join(format!("{v}.{ext}"));
            images.push(self.read_one(&p("img"), &[3, r, r])?);
            let depth = self.read_one(&p("depth"), &[r, r])?;
            let normal = self.read_one(&p("normal"), &[3, r, r])?;
            let mask = self.read_one(&p("mask"), &[r, r])?;
            let faceid = mask.data().iter().map(|&m| if m > 0.5 { 0 } else { BACKGROUND_FACE }).collect();
            gt.push(GBuffer { width: r, height: r, depth, normal, mask, faceid, barycentric: Array::zeros(&[3, r, r]) });
        }
        Ok(TrainingSample {
            shape_id: e.id.clone(),
            shape: generate_family(e.family, e.seed),
            views: e.views.clone(),
            images,
            gt,
            reference: 0,
            severity: e.severity,
        })
    }

    /// Re-renders the unperturbed images of shape `i`.
    pub fn load_clean(&self, i: usize) -> Result<TrainingSample, SynthError> {
        let e = &self.shapes[i];
        let mut s = render_sample(&generate_family(e.family, e.seed), &e.views, e.resolution)?;
        s.shape_id = e.id.clone();
        Ok(s)
    }
}

/// Mean PSNR of perturbed vs clean input images per view, over all shapes.
#[derive(Clone, Debug, PartialEq)]
pub struct PsnrRow {
    pub view: usize,
    pub angle: Real,
    pub psnr: Real,
}

pub fn psnr_by_view(samples: &[(TrainingSample, TrainingSample)]) -> Vec<PsnrRow> {
    let Some((first, _)) = samples.first() else {
        return Vec::new();
    };
    (0..first.views.len())
        .map(|v| PsnrRow {
            view: v,
            angle: first.views.angle_to_reference(v),
            psnr: samples.iter().map(|(p, c)| psnr_map(p.images[v].data(), c.images[v].data())).sum::<Real>()
                / samples.len() as Real,
        })
        .collect()
}

/// PSNR-vs-angle statistics for a configuration.
pub fn dataset_stats(cfg: &DatasetConfig) -> Result<Vec<PsnrRow>, SynthError> {
    cfg.validate()?;
    let views = cfg.view_set()?;
    let entries = cfg.entries();
    let pairs = exec::map_indexed(entries.len(), |i| -> Result<_, SynthError> {
        let (split, idx) = entries[i];
        let perturbed = make_sample(cfg, &views, split, idx)?;
        let clean = render_sample(&perturbed.shape, &views, cfg.resolution)?;
        Ok((perturbed, clean))
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    Ok(psnr_by_view(&pairs))
}

pub fn format_stats(rows: &[PsnrRow]) -> String {
    let mut s = format!("{:>4} {:>9} {:>9}\n", "view", "angle", "psnr");
    for r in rows {
        s.push_str(&format!("{:>4} {:>9.2} {:>9.3}\n", r.view, r.angle, r.psnr));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> DatasetConfig {
        DatasetConfig { train: 3, eval: 1, views: 6, resolution: 16, seed: 5, ..DatasetConfig::default() }
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().join("ds");
        let cfg = tiny();
        let manifest = generate_to_disk(&cfg, &root).unwrap();
        assert_eq!(manifest.lines().count(), 4 * 7);
        let on_disk = fs::read_to_string(root.join(MANIFEST)).unwrap();
        assert_eq!(on_disk, manifest);
        let ds = Dataset::open(&root).unwrap();
        assert_eq!(ds.len(), 4);
        assert_eq!(ds.indices_in("eval"), vec![3]);
        let mem = generate_dataset(&cfg).unwrap();
        for (i, s) in mem.iter().enumerate() {
            let l = ds.load(i).unwrap();
            assert_eq!(l.shape_id, s.shape_id);
            assert_eq!(l.shape, s.shape);
            assert_eq!(l.views, s.views);
            assert_eq!(l.images, s.images);
            for (a, b) in l.gt.iter().zip(&s.gt) {
                assert_eq!(a.depth.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>(), b.depth.data().iter().map(|x| x.to_bits()).collect::<Vec<_>>());
                assert_eq!(a.normal, b.normal);
                assert_eq!(a.mask, b.mask);
                assert_eq!(a.faceid, b.faceid);
            }
            let clean = ds.load_clean(i).unwrap();
            assert_eq!(clean.images[0], s.images[0]);
        }
    }

    #[test]
    fn generation_is_pure() {
        let a = generate_dataset(&tiny()).unwrap();
        let b = generate_dataset(&tiny()).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.images, y.images);
        }
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        generate_to_disk(&tiny(), &d1.path().join("x")).unwrap();
        generate_to_disk(&tiny(), &d2.path().join("x")).unwrap();
        for e in ["manifest.txt", "train_0001/3.img", "eval_0000/6.normal"] {
            assert_eq!(fs::read(d1.path().join("x").join(e)).unwrap(), fs::read(d2.path().join("x").join(e)).unwrap());
        }
    }

    #[test]
    fn partial_write_removes_directory() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().join("ds");
        let cfg = tiny();
        let samples = generate_dataset(&cfg).unwrap();
        let splits: Vec<Split> = cfg.entries().iter().map(|e| e.0).collect();
        FAIL_AFTER.with(|f| f.set(Some(2)));
        let r = write_dataset(&samples, &splits, &root, cfg.fov_deg);
        FAIL_AFTER.with(|f| f.set(None));
        assert!(r.is_err());
        assert!(!root.exists());
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 0);
        write_dataset(&samples, &splits, &root, cfg.fov_deg).unwrap();
        assert!(matches!(write_dataset(&samples, &splits, &root, cfg.fov_deg), Err(SynthError::Exists(_))));
    }

    #[test]
    fn corrupted_file_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().join("ds");
        generate_to_disk(&tiny(), &root).unwrap();
        let victim = root.join("train_0002").join("4.depth");
        let bytes = fs::read(&victim).unwrap();
        fs::write(&victim, &bytes[..bytes.len() - 5]).unwrap();
        let ds = Dataset::open(&root).unwrap();
        ds.load(1).unwrap();
        let err = ds.load(2).unwrap_err();
        assert!(matches!(err, SynthError::Corrupt { .. }));
        assert!(err.to_string().contains("4.depth"), "{err}");
    }

    #[test]
    fn bad_manifest_reports_line() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join(MANIFEST), "a train composite 1 0.5 0 0 20 2.5 50 16\nb train nope 1 0.5 0 0 20 2.5 50 16\n").unwrap();
        let err = Dataset::open(dir.path()).unwrap_err();
        assert!(matches!(err, SynthError::Manifest { line: 2, .. }), "{err}");
    }

    #[test]
    fn zero_severity_stats_hit_cap() {
        let cfg = DatasetConfig { severity: 0.0, train: 2, eval: 0, resolution: 16, ..DatasetConfig::default() };
        let rows = dataset_stats(&cfg).unwrap();
        assert_eq!(rows.len(), 7);
        assert!(rows.iter().all(|r| r.psnr == crate::evalkit::PSNR_CAP));
        assert_eq!(format_stats(&rows).lines().count(), 8);
    }

    #[test]
    fn rejects_bad_config() {
        assert!(DatasetConfig { train: 0, eval: 0, ..DatasetConfig::default() }.validate().is_err());
        assert!(DatasetConfig { severity: 2.0, ..DatasetConfig::default() }.validate().is_err());
    }
}
