use super::pixel::{depth_loss, mask_loss, normal_loss, structural_loss, valid_pixels};
use super::{LossError, LossWeights};
use crate::render::Rendered;
use crate::{Real, Tape, Var};

/// Ground-truth maps of one view. `d_min` is the depth offset that removes
/// the camera distance from the depth term.
#[derive(Clone, Copy, Debug)]
pub struct Target {
    pub depth: Var,
    pub normal: Var,
    pub mask: Var,
    pub d_min: Real,
}

/// Which views receive pixelwise terms and which receive the structural term.
#[derive(Clone, Debug, PartialEq)]
pub struct Supervision {
    pub pixel: Vec<usize>,
    pub structural: Vec<usize>,
}

impl Supervision {
    /// Pixel terms at view 0, structural terms at views `1..n`.
    pub fn view_dependent(n: usize) -> Self {
        Self { pixel: vec![0], structural: (1..n).collect() }
    }

    /// Both kinds of terms at every view.
    pub fn all_views(n: usize) -> Self {
        Self { pixel: (0..n).collect(), structural: (0..n).collect() }
    }
}

/// Scalar values of one loss evaluation.
///
/// Pixel terms are averaged over the pixel-supervised views and the
/// structural term is summed over its views, so
/// `total = depth*w_d + normal*w_n + mask*w_m + structural*w_s + reg`.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LossReport {
    pub depth: Real,
    pub normal: Real,
    pub mask: Real,
    pub structural: Real,
    pub reg: Real,
    pub total: Real,
    /// Pixel-supervised views whose valid set was empty.
    pub empty_views: Vec<usize>,
}

impl LossReport {
    pub const CSV_HEADER: &'static str = "step,depth,normal,mask,structural,reg,total";

    pub fn csv_row(&self, step: usize) -> String {
        format!(
            "{step},{},{},{},{},{},{}",
            self.depth, self.normal, self.mask, self.structural, self.reg, self.total
        )
    }

    pub fn is_finite(&self) -> bool {
        [self.depth, self.normal, self.mask, self.structural, self.reg, self.total].iter().all(|v| v.is_finite())
    }
}

pub struct LossOutput {
    pub total: Var,
    pub report: LossReport,
}

/// Combines per-view terms according to `plan`. `reg` is an already
/// weighted scalar regularizer node.
pub fn total_loss(
    tape: &mut Tape,
    preds: &[Rendered],
    targets: &[Target],
    plan: &Supervision,
    weights: &LossWeights,
    reg: Option<Var>,
) -> Result<LossOutput, LossError> {
    if preds.len() != targets.len() {
        return Err(LossError::ViewCount { preds: preds.len(), targets: targets.len() });
    }
    for &v in plan.pixel.iter().chain(&plan.structural) {
        if v >= preds.len() {
            return Err(LossError::ViewIndex { view: v, count: preds.len() });
        }
    }
    let mut report = LossReport::default();
    let mut terms: Vec<(Var, Real)> = Vec::new();
    let k = 1.0 / plan.pixel.len().max(1) as Real;
    for &v in &plan.pixel {
        let (p, t) = (&preds[v], &targets[v]);
        let valid = valid_pixels(&p.gbuffer.faceid, tape.value(t.mask).data());
        let (ld, empty) = depth_loss(tape, p.depth, t.depth, &valid, t.d_min)?;
        let (ln, _) = normal_loss(tape, p.normal, t.normal, &valid)?;
        let lm = mask_loss(tape, p.mask, t.mask)?;
        if empty {
            report.empty_views.push(v);
        }
        report.depth += k * tape.value(ld).item();
        report.normal += k * tape.value(ln).item();
        report.mask += k * tape.value(lm).item();
        terms.extend([(ld, k * weights.depth), (ln, k * weights.normal), (lm, k * weights.mask)]);
    }
    for &v in &plan.structural {
        let ls = structural_loss(tape, preds[v].normal, targets[v].normal)?;
        report.structural += tape.value(ls).item();
        terms.push((ls, weights.structural));
    }
    if let Some(r) = reg {
        report.reg = tape.value(r).item();
        terms.push((r, 1.0));
    }
    let total = tape.weighted_sum(&terms)?;
    report.total = tape.value(total).item();
    Ok(LossOutput { total, report })
}
