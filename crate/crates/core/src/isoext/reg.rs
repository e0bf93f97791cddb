use super::Mesh;
use crate::diffcore::{Array, DiffError, Tape, Var};
use crate::Real;

/// Weights of the three regularizer terms.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegWeights {
    pub sdf_smooth: Real,
    pub deform: Real,
    pub laplacian: Real,
}

impl Default for RegWeights {
    fn default() -> Self {
        Self { sdf_smooth: 0.5, deform: 0.05, laplacian: 50.0 }
    }
}

/// Tape handles and values of the individual terms.
#[derive(Clone, Copy, Debug)]
pub struct RegTerms {
    pub total: Var,
    pub sdf_smooth: Real,
    pub deform: Real,
    pub laplacian: Real,
}

/// Mean squared second difference of the SDF along each lattice axis.
/// Zero (with zero gradient) for any affine field.
pub fn sdf_smoothness(tape: &mut Tape, sdf: Var, res: usize) -> Result<Var, DiffError> {
    let n = res * res * res;
    if tape.value(sdf).len() != n || res < 3 {
        return Err(DiffError::Invalid {
            op: "sdf_smoothness",
            detail: format!("{} values for res {res}", tape.value(sdf).len()),
        });
    }
    let stride = [1usize, res, res * res];
    let mut triples = Vec::new();
    for k in 0..res {
        for j in 0..res {
            for i in 0..res {
                let c = [i, j, k];
                let idx = (k * res + j) * res + i;
                for ax in 0..3 {
                    if c[ax] >= 1 && c[ax] + 1 < res {
                        triples.push((idx - stride[ax], idx, idx + stride[ax]));
                    }
                }
            }
        }
    }
    let s = tape.value(sdf).data();
    let inv = 1.0 / triples.len() as Real;
    let diffs: Vec<Real> = triples.iter().map(|&(a, b, c)| s[a] - 2.0 * s[b] + s[c]).collect();
    let val = diffs.iter().map(|d| d * d).sum::<Real>() * inv;
    Ok(tape.custom(&[sdf], Array::scalar(val), move |g| {
        let mut gs = vec![0.0; n];
        for (&(a, b, c), d) in triples.iter().zip(&diffs) {
            let k = 2.0 * d * inv * g[0];
            gs[a] += k;
            gs[b] -= 2.0 * k;
            gs[c] += k;
        }
        vec![Some(gs)]
    }))
}

/// Mean over nodes of the squared deformation length.
pub fn deform_reg(tape: &mut Tape, deform: Var) -> Result<Var, DiffError> {
    let n = tape.value(deform).len() / 3;
    let sq = tape.mul(deform, deform)?;
    let s = tape.sum(sq);
    Ok(tape.scale(s, 1.0 / n.max(1) as Real))
}

/// Mean over non-boundary vertices of the squared distance to the centroid
/// of their one-ring.
pub fn laplacian_reg(tape: &mut Tape, vertices: Var, triangles: &[[u32; 3]]) -> Result<Var, DiffError> {
    let vs = tape.value(vertices).shape().to_vec();
    if vs.len() != 2 || vs[1] != 3 {
        return Err(DiffError::Invalid { op: "laplacian_reg", detail: format!("vertices {vs:?}") });
    }
    let mesh = Mesh::from_flat(tape.value(vertices).data(), triangles.to_vec());
    let nb = mesh.vertex_neighbors();
    let boundary = mesh.boundary_vertices();
    let active: Vec<usize> = (0..mesh.vertices.len()).filter(|&i| !boundary[i] && !nb[i].is_empty()).collect();
    if active.is_empty() {
        return Ok(tape.custom(&[vertices], Array::scalar(0.0), move |_| vec![None]));
    }
    let inv = 1.0 / active.len() as Real;
    let resid: Vec<[Real; 3]> = active
        .iter()
        .map(|&i| {
            let c = nb[i].iter().fold(crate::geometry::Vec3::ZERO, |acc, &j| acc + mesh.vertices[j as usize])
                / nb[i].len() as Real;
            (mesh.vertices[i] - c).to_array()
        })
        .collect();
    let val = resid.iter().map(|r| r.iter().map(|x| x * x).sum::<Real>()).sum::<Real>() * inv;
    let nv = mesh.vertices.len();
    Ok(tape.custom(&[vertices], Array::scalar(val), move |g| {
        let mut gv = vec![0.0; 3 * nv];
        for (&i, r) in active.iter().zip(&resid) {
            let k = 2.0 * inv * g[0];
            let share = k / nb[i].len() as Real;
            for ax in 0..3 {
                gv[3 * i + ax] += k * r[ax];
                for &j in &nb[i] {
                    gv[3 * j as usize + ax] -= share * r[ax];
                }
            }
        }
        vec![Some(gv)]
    }))
}

/// Weighted sum of the three regularizers.
pub fn reg_loss(
    tape: &mut Tape,
    sdf: Var,
    deform: Var,
    res: usize,
    vertices: Var,
    triangles: &[[u32; 3]],
    w: RegWeights,
) -> Result<RegTerms, DiffError> {
    let a = sdf_smoothness(tape, sdf, res)?;
    let b = deform_reg(tape, deform)?;
    let c = laplacian_reg(tape, vertices, triangles)?;
    let (va, vb, vc) = (tape.value(a).item(), tape.value(b).item(), tape.value(c).item());
    let total = tape.weighted_sum(&[(a, w.sdf_smooth), (b, w.deform), (c, w.laplacian)])?;
    Ok(RegTerms { total, sdf_smooth: va, deform: vb, laplacian: vc })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::gradcheck::check_gradients;
    use crate::isoext::{extract_mesh, extract_mesh_op, ScalarGrid};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn flat_configuration() {
        let res = 9;
        let g = ScalarGrid::from_fn(res, |p| p.x - 0.37);
        let mut tape = Tape::new();
        let sdf = tape.param(Array::from_vec(g.sdf.clone()));
        let def = tape.param(Array::new(vec![res * res * res, 3], g.deform.clone()).unwrap());
        let (v, ex) = extract_mesh_op(&mut tape, sdf, def, res).unwrap();
        let t = reg_loss(&mut tape, sdf, def, res, v, &ex.mesh.triangles, RegWeights::default()).unwrap();
        assert!(t.sdf_smooth < 1e-20 && t.deform == 0.0 && t.laplacian < 1e-8, "{t:?}");
        tape.backward(t.total).unwrap();
        let gs = tape.grad_array(sdf);
        assert!(gs.data().iter().all(|x| x.abs() < 1e-9));
        let gd = tape.grad_array(def);
        assert!(gd.data().iter().all(|x| x.abs() < 1e-9));
    }

    #[test]
    fn affine_field_has_no_smoothness_cost() {
        let res = 7;
        let g = ScalarGrid::from_fn(res, |p| 0.3 * p.x - 0.1 * p.y + 0.8 * p.z - 0.05);
        let mut tape = Tape::new();
        let sdf = tape.param(Array::from_vec(g.sdf));
        let r = sdf_smoothness(&mut tape, sdf, res).unwrap();
        assert!(tape.value(r).item() < 1e-20);
        tape.backward(r).unwrap();
        assert!(tape.grad_array(sdf).data().iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn deformation_term_is_quadratic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let d: Vec<Real> = (0..30).map(|_| rng.gen_range(-0.4..0.4)).collect();
        let mut tape = Tape::new();
        let a = tape.constant(Array::new(vec![10, 3], d.clone()).unwrap());
        let b = tape.constant(Array::new(vec![10, 3], d.iter().map(|x| 2.0 * x).collect()).unwrap());
        let ra = deform_reg(&mut tape, a).unwrap();
        let rb = deform_reg(&mut tape, b).unwrap();
        assert!((tape.value(rb).item() - 4.0 * tape.value(ra).item()).abs() < 1e-12);
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let res = 6;
        let n = res * res * res;
        let sdf: Vec<Real> = (0..n)
            .map(|_| {
                let v: Real = rng.gen_range(0.2..1.0);
                if rng.gen_bool(0.5) { v } else { -v }
            })
            .collect();
        let deform: Vec<Real> = (0..3 * n).map(|_| rng.gen_range(-0.3..0.3)).collect();
        assert!(!extract_mesh(&ScalarGrid::new(res, sdf.clone(), deform.clone()).unwrap()).unwrap().mesh.is_empty());
        let inputs = [Array::from_vec(sdf), Array::new(vec![n, 3], deform).unwrap()];
        let f = move |tape: &mut Tape, x: &[Var]| {
            let (v, ex) = extract_mesh_op(tape, x[0], x[1], res).unwrap();
            reg_loss(tape, x[0], x[1], res, v, &ex.mesh.triangles, RegWeights { sdf_smooth: 0.7, deform: 0.3, laplacian: 2.0 })
                .unwrap()
                .total
        };
        check_gradients(&inputs, 1e-6, 1e-5, f).unwrap();
    }
}
