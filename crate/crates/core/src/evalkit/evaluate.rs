//! Full evaluation of a reconstructed mesh against ground truth.

use std::fmt::Write as _;

use super::maps::{normalize_depth, normalize_normals, psnr_map, ssim_map, structural_distance};
use super::{chamfer, emd, sample_surface, EvalError};
use crate::geometry::{uniform_view_sphere, Intrinsics, ShapeSdf, DEFAULT_CAMERA_RADIUS};
use crate::isoext::{extract_mesh, Mesh, ScalarGrid};
use crate::render::{rasterize, render_gt, GBuffer};
use crate::{exec, Real};

/// What a reconstruction is compared with.
#[derive(Clone, Copy, Debug)]
pub enum GroundTruth<'a> {
    Shape(&'a ShapeSdf),
    Mesh(&'a Mesh),
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalConfig {
    pub views: usize,
    pub resolution: usize,
    pub points: usize,
    pub seed: u64,
    pub camera_radius: Real,
    pub fov_deg: Real,
    /// Lattice used to mesh an analytic ground truth before sampling.
    pub gt_mesh_res: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            views: 32,
            resolution: 64,
            points: 2048,
            seed: 0,
            camera_radius: DEFAULT_CAMERA_RADIUS,
            fov_deg: 50.0,
            gt_mesh_res: 128,
        }
    }
}

/// Image metrics in report units (SSIM and SDIST scaled by 100).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct MapScores {
    pub psnr_d: Real,
    pub ssim_d: Real,
    pub sdist_d: Real,
    pub psnr_n: Real,
    pub ssim_n: Real,
    pub sdist_n: Real,
}

impl MapScores {
    fn to_array(self) -> [Real; 6] {
        [self.psnr_d, self.ssim_d, self.sdist_d, self.psnr_n, self.ssim_n, self.sdist_n]
    }

    fn from_array(a: [Real; 6]) -> Self {
        Self { psnr_d: a[0], ssim_d: a[1], sdist_d: a[2], psnr_n: a[3], ssim_n: a[4], sdist_n: a[5] }
    }

    /// Arithmetic mean of per-view scores.
    pub fn mean(all: &[MapScores]) -> MapScores {
        let mut acc = [0.0; 6];
        for s in all {
            for (a, v) in acc.iter_mut().zip(s.to_array()) {
                *a += v;
            }
        }
        let n = all.len().max(1) as Real;
        MapScores::from_array(acc.map(|a| a / n))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    /// Chamfer distance x100; infinite when the mesh is empty.
    pub cd: Real,
    /// Earth mover's distance x100; infinite when the mesh is empty.
    pub emd: Real,
    pub maps: MapScores,
    pub per_view: Vec<MapScores>,
    /// Set when the reconstruction is empty and point metrics are sentinels.
    pub failed: bool,
}

pub const CSV_HEADER: &str = "id,CD,EMD,PSNR_d,SSIM_d,SDIST_d,PSNR_n,SSIM_n,SDIST_n,failed";
const COLUMNS: [&str; 9] = ["CD", "EMD", "PSNR_d", "SSIM_d", "SDIST_d", "PSNR_n", "SSIM_n", "SDIST_n", "failed"];

impl EvalReport {
    fn values(&self) -> [Real; 8] {
        let m = self.maps.to_array();
        [self.cd, self.emd, m[0], m[1], m[2], m[3], m[4], m[5]]
    }

    pub fn csv_row(&self, id: &str) -> String {
        let mut s = id.to_string();
        for v in self.values() {
            let _ = write!(s, ",{v}");
        }
        let _ = write!(s, ",{}", self.failed as u8);
        s
    }

    pub fn to_csv(rows: &[(String, EvalReport)]) -> String {
        let mut s = format!("{CSV_HEADER}\n");
        for (id, r) in rows {
            s.push_str(&r.csv_row(id));
            s.push('\n');
        }
        s
    }

    /// Column-aligned text table with a trailing mean row.
    pub fn to_table(rows: &[(String, EvalReport)]) -> String {
        let id_w = rows.iter().map(|(id, _)| id.len()).max().unwrap_or(2).max(4);
        let mut s = format!("{:<id_w$}", "id");
        for c in COLUMNS {
            let _ = write!(s, " {c:>9}");
        }
        s.push('\n');
        let push_row = |s: &mut String, id: &str, vals: [Real; 8], failed: usize| {
            let _ = write!(s, "{id:<id_w$}");
            for v in vals {
                let _ = write!(s, " {v:>9.4}");
            }
            let _ = writeln!(s, " {failed:>9}");
        };
        for (id, r) in rows {
            push_row(&mut s, id, r.values(), r.failed as usize);
        }
        if rows.len() > 1 {
            let mut mean = [0.0; 8];
            for (_, r) in rows {
                for (m, v) in mean.iter_mut().zip(r.values()) {
                    *m += v / rows.len() as Real;
                }
            }
            push_row(&mut s, "mean", mean, rows.iter().filter(|(_, r)| r.failed).count());
        }
        s
    }
}

fn view_scores(pred: &GBuffer, gt: &GBuffer, camera_distance: Real) -> MapScores {
    let (h, w) = (pred.height, pred.width);
    let (pd, gd) = (normalize_depth(pred, camera_distance), normalize_depth(gt, camera_distance));
    let (pn, gn) = (normalize_normals(pred), normalize_normals(gt));
    MapScores {
        psnr_d: psnr_map(&pd, &gd),
        ssim_d: 100.0 * ssim_map(&pd, &gd, 1, h, w),
        sdist_d: 100.0 * structural_distance(&pd, &gd, 1, h, w),
        psnr_n: psnr_map(&pn, &gn),
        ssim_n: 100.0 * ssim_map(&pn, &gn, 3, h, w),
        sdist_n: 100.0 * structural_distance(&pn, &gn, 3, h, w),
    }
}

/// Meshes an analytic shape finely enough that its discretisation error is
/// far below the metric resolution.
pub fn mesh_shape(shape: &ShapeSdf, res: usize) -> Result<Mesh, EvalError> {
    let grid = ScalarGrid::from_fn(res, |p| shape.eval(p));
    Ok(extract_mesh(&grid)?.mesh)
}

/// Point-set and per-view map metrics of `mesh` against `gt`.
pub fn evaluate(mesh: &Mesh, gt: GroundTruth<'_>, cfg: &EvalConfig) -> Result<EvalReport, EvalError> {
    let k = Intrinsics::from_fov(cfg.resolution, cfg.resolution, cfg.fov_deg);
    let views = uniform_view_sphere(cfg.views, cfg.camera_radius, k)?;
    let per_view = exec::map_indexed(views.len(), |i| -> Result<MapScores, EvalError> {
        let cam = views.camera(i);
        let pred = rasterize(mesh, cam, cfg.resolution)?;
        let target = match gt {
            GroundTruth::Shape(s) => render_gt(s, cam, cfg.resolution)?,
            GroundTruth::Mesh(m) => rasterize(m, cam, cfg.resolution)?,
        };
        Ok(view_scores(&pred, &target, cfg.camera_radius))
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let maps = MapScores::mean(&per_view);

    if mesh.is_empty() {
        return Ok(EvalReport { cd: Real::INFINITY, emd: Real::INFINITY, maps, per_view, failed: true });
    }
    let owned;
    let gt_mesh = match gt {
        GroundTruth::Shape(s) => {
            owned = mesh_shape(s, cfg.gt_mesh_res)?;
            &owned
        }
        GroundTruth::Mesh(m) => m,
    };
    let p = sample_surface(mesh, cfg.points, cfg.seed)?;
    let q = sample_surface(gt_mesh, cfg.points, cfg.seed)?;
    Ok(EvalReport { cd: 100.0 * chamfer(&p, &q)?, emd: 100.0 * emd(&p, &q)?, maps, per_view, failed: false })
}
