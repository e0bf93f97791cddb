//! Adam with cosine learning-rate decay and global-norm clipping.

use crate::{Array, Real};

/// Learning rate at `step` of `total`, decaying from `base` to 0.
pub fn cosine_lr(base: Real, step: usize, total: usize) -> Real {
    if total == 0 {
        return base;
    }
    let t = (step as Real / total as Real).min(1.0);
    0.5 * base * (1.0 + (std::f64::consts::PI as Real * t).cos())
}

/// Scales gradients in place so their joint norm is at most `max_norm`.
/// Returns the norm before clipping.
pub fn clip_global_norm(grads: &mut [Array], max_norm: Real) -> Real {
    let norm = grads.iter().flat_map(|g| g.data().iter()).map(|x| x * x).sum::<Real>().sqrt();
    if norm > max_norm {
        let k = max_norm / norm;
        for g in grads.iter_mut() {
            g.data_mut().iter_mut().for_each(|x| *x *= k);
        }
    }
    norm
}

#[derive(Clone, Debug, PartialEq)]
pub struct Adam {
    pub beta1: Real,
    pub beta2: Real,
    pub eps: Real,
    pub m: Vec<Array>,
    pub v: Vec<Array>,
    /// Number of updates applied so far.
    pub t: u64,
}

impl Adam {
    pub fn new(shapes: &[&[usize]], beta1: Real, beta2: Real, eps: Real) -> Self {
        Self {
            beta1,
            beta2,
            eps,
            m: shapes.iter().map(|s| Array::zeros(s)).collect(),
            v: shapes.iter().map(|s| Array::zeros(s)).collect(),
            t: 0,
        }
    }

    pub fn step(&mut self, params: &mut [&mut Array], grads: &[Array], lr: Real) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for (((p, g), m), v) in params.iter_mut().zip(grads).zip(&mut self.m).zip(&mut self.v) {
            let (pd, gd) = (p.data_mut(), g.data());
            let (md, vd) = (m.data_mut(), v.data_mut());
            for i in 0..pd.len() {
                md[i] = self.beta1 * md[i] + (1.0 - self.beta1) * gd[i];
                vd[i] = self.beta2 * vd[i] + (1.0 - self.beta2) * gd[i] * gd[i];
                let mhat = md[i] / c1;
                let vhat = vd[i] / c2;
                pd[i] -= lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schedule_endpoints() {
        assert_eq!(cosine_lr(1e-3, 0, 100), 1e-3);
        assert!((cosine_lr(1e-3, 50, 100) - 5e-4).abs() < 1e-15);
        assert!(cosine_lr(1e-3, 100, 100).abs() < 1e-15);
    }

    #[test]
    fn clipping() {
        let mut g = vec![Array::from_vec(vec![3.0, 0.0]), Array::from_vec(vec![4.0])];
        assert_eq!(clip_global_norm(&mut g, 1.0), 5.0);
        assert!((g[0].data()[0] - 0.6).abs() < 1e-15 && (g[1].data()[0] - 0.8).abs() < 1e-15);
        let mut small = vec![Array::from_vec(vec![0.1])];
        clip_global_norm(&mut small, 1.0);
        assert_eq!(small[0].data()[0], 0.1);
    }

    #[test]
    fn first_step_moves_by_lr() {
        // With bias correction the first update is lr * sign(g).
        let mut p = Array::from_vec(vec![1.0, -2.0]);
        let mut opt = Adam::new(&[&[2]], 0.9, 0.999, 1e-12);
        opt.step(&mut [&mut p], &[Array::from_vec(vec![0.5, -3.0])], 0.01);
        assert!((p.data()[0] - 0.99).abs() < 1e-9 && (p.data()[1] + 1.99).abs() < 1e-9);
    }

    #[test]
    fn minimises_quadratic() {
        let mut p = Array::from_vec(vec![3.0, -1.5]);
        let mut opt = Adam::new(&[&[2]], 0.9, 0.999, 1e-8);
        for s in 0..2000 {
            let g = Array::from_vec(p.data().iter().map(|x| 2.0 * x).collect());
            opt.step(&mut [&mut p], &[g], cosine_lr(0.05, s, 2000));
        }
        assert!(p.data().iter().all(|x| x.abs() < 1e-3), "{:?}", p.data());
    }
}
