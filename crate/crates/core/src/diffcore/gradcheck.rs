//! Central finite-difference oracle for tape gradients.
//!
//! The numeric side only ever evaluates the forward graph, so it stays
//! independent of every backward closure it checks.

use super::{Array, Tape, Var};
use crate::Real;

#[derive(Clone, Debug)]
pub struct GradCheckReport {
    /// Largest `|analytic - numeric|` over all checked entries.
    pub max_abs_err: Real,
    /// Largest error normalised by the tolerance scale of its entry.
    pub max_scaled_err: Real,
    pub checked: usize,
}

/// Builds a fresh tape, registers `inputs` as gradient leaves and evaluates
/// `f` on them. Returns the scalar output and the analytic gradients.
pub fn analytic_gradient<F>(inputs: &[Array], f: &F) -> (Real, Vec<Array>)
where
    F: Fn(&mut Tape, &[Var]) -> Var,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|a| tape.param(a.clone())).collect();
    let out = f(&mut tape, &vars);
    let value = tape.value(out).item();
    tape.backward(out).expect("scalar output");
    let grads = vars.iter().map(|&v| tape.grad_array(v)).collect();
    (value, grads)
}

fn eval_forward<F>(inputs: &[Array], f: &F) -> Real
where
    F: Fn(&mut Tape, &[Var]) -> Var,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|a| tape.constant(a.clone())).collect();
    let out = f(&mut tape, &vars);
    tape.value(out).item()
}

/// Central differences `(f(x + h) - f(x - h)) / 2h` for every input entry.
pub fn numeric_gradient<F>(inputs: &[Array], h: Real, f: &F) -> Vec<Array>
where
    F: Fn(&mut Tape, &[Var]) -> Var,
{
    let mut work: Vec<Array> = inputs.to_vec();
    let mut grads = Vec::with_capacity(inputs.len());
    for i in 0..inputs.len() {
        let mut g = Array::zeros(inputs[i].shape());
        for j in 0..inputs[i].len() {
            let x0 = inputs[i].data()[j];
            work[i].data_mut()[j] = x0 + h;
            let fp = eval_forward(&work, f);
            work[i].data_mut()[j] = x0 - h;
            let fm = eval_forward(&work, f);
            work[i].data_mut()[j] = x0;
            g.data_mut()[j] = (fp - fm) / (2.0 * h);
        }
        grads.push(g);
    }
    grads
}

/// Compares analytic and numeric gradients of `f` at `inputs`.
///
/// An entry passes when `|a - n| <= rtol * (|n| + 0.01 * max|n| + 1e-8)`,
/// where `max|n|` is taken over the same input array. The second term keeps
/// near-zero entries from failing on round-off alone.
pub fn check_gradients<F>(
    inputs: &[Array],
    h: Real,
    rtol: Real,
    f: F,
) -> Result<GradCheckReport, String>
where
    F: Fn(&mut Tape, &[Var]) -> Var,
{
    let (_, analytic) = analytic_gradient(inputs, &f);
    let numeric = numeric_gradient(inputs, h, &f);
    let mut report = GradCheckReport {
        max_abs_err: 0.0,
        max_scaled_err: 0.0,
        checked: 0,
    };
    let mut worst = String::new();
    for (i, (a, n)) in analytic.iter().zip(&numeric).enumerate() {
        let scale_max = n.data().iter().fold(0.0 as Real, |m, x| m.max(x.abs()));
        for j in 0..a.len() {
            let (av, nv) = (a.data()[j], n.data()[j]);
            let err = (av - nv).abs();
            let scale = nv.abs() + 0.01 * scale_max + 1e-8;
            let scaled = err / scale;
            report.checked += 1;
            report.max_abs_err = report.max_abs_err.max(err);
            if scaled > report.max_scaled_err {
                report.max_scaled_err = scaled;
                worst = format!("input {i} entry {j}: analytic {av:e} numeric {nv:e}");
            }
        }
    }
    if report.max_scaled_err > rtol {
        Err(format!(
            "gradient mismatch (scaled err {:e} > {rtol:e}); worst {worst}",
            report.max_scaled_err
        ))
    } else {
        Ok(report)
    }
}
