
use super::NetError;
use crate::diffcore::sample::{bilinear_taps, Tap};
use crate::diffcore::{Array, Tape, Var};
use crate::exec;
use crate::geometry::{Camera, Lattice};
use crate::Real;

/// Indices of `views` in canonical order (by camera, then by feature values)
/// with bit-identical (camera, map) duplicates removed.
pub fn canonical_view_order(tape: &Tape, views: &[(Camera, Var)]) -> Vec<usize> {
    let keys: Vec<(Vec<u64>, Vec<u64>)> = views
        .iter()
        .map(|(cam, map)| {
            let bits = tape.value(*map).data().iter().map(|x| x.to_bits() as u64).collect();
            (cam.sort_key(), bits)
        })
        .collect();
    let mut order: Vec<usize> = (0..views.len()).collect();
    order.sort_by(|&a, &b| keys[a].cmp(&keys[b]).then(a.cmp(&b)));
    order.dedup_by(|a, b| keys[*a] == keys[*b]);
    order
}

type PointTaps = Vec<(u32, [Tap<2>; 4])>;

/// Averages features fetched by projecting every lattice node into every view.
///
/// Each map is `[C, H, W]`; the result is `[C, R, R, R]` over `lattice`. A
/// node contributes from a view only when it lies in front of the camera and
/// projects inside the map; the average runs over those views, and a node
/// seen by none gets zeros. Views are summed in canonical order, so permuting
/// the input or repeating a view leaves the result bit-identical.
pub fn lift_features(tape: &mut Tape, views: &[(Camera, Var)], lattice: Lattice) -> Result<Var, NetError> {
    if views.is_empty() {
        return Err(NetError::NoViews);
    }
    let shape = tape.shape(views[0].1).to_vec();
    if shape.len() != 3 {
        return Err(NetError::Input(format!("feature map shape {shape:?} is not [C,H,W]")));
    }
    for (i, (_, m)) in views.iter().enumerate() {
        if tape.shape(*m) != shape.as_slice() {
            return Err(NetError::Input(format!(
                "feature map {i} has shape {:?}, expected {shape:?}",
                tape.shape(*m)
            )));
        }
    }
    let (c, h, w) = (shape[0], shape[1], shape[2]);
    let plane = h * w;
    let order = canonical_view_order(tape, views);
    let cams: Vec<Camera> = order.iter().map(|&i| views[i].0).collect();
    let maps: Vec<std::sync::Arc<Array>> = order.iter().map(|&i| tape.shared(views[i].1)).collect();
    let parents: Vec<Var> = order.iter().map(|&i| views[i].1).collect();
    let nodes = lattice.num_nodes();

    // Map-space scale: cameras are defined at image resolution, maps may be
    // smaller or larger.
    let scales: Vec<(Real, Real)> = cams
        .iter()
        .map(|c| (w as Real / c.width() as Real, h as Real / c.height() as Real))
        .collect();

    let taps: Vec<PointTaps> = exec::map_indexed(nodes, |idx| {
        let (i, j, k) = lattice.coords(idx);
        let p = lattice.position(i, j, k);
        let mut out = Vec::with_capacity(cams.len());
        for (v, cam) in cams.iter().enumerate() {
            let q = cam.project(p);
            if !q.in_front() {
                continue;
            }
            let (sx, sy) = scales[v];
            if let Some(t) = bilinear_taps(h, w, q.uv[0] * sx, q.uv[1] * sy) {
                out.push((v as u32, t));
            }
        }
        out
    });

    let mut data = vec![0.0; c * nodes];
    let rows: Vec<Vec<Real>> = exec::map_indexed(nodes, |idx| {
        let t = &taps[idx];
        let mut acc = vec![0.0; c];
        if t.is_empty() {
            return acc;
        }
        for (v, tt) in t {
            let m = maps[*v as usize].data();
            for (ch, a) in acc.iter_mut().enumerate() {
                *a += tt.iter().map(|tap| tap.w * m[ch * plane + tap.idx]).sum::<Real>();
            }
        }
        let inv = 1.0 / t.len() as Real;
        acc.iter_mut().for_each(|a| *a *= inv);
        acc
    });
    for (idx, row) in rows.iter().enumerate() {
        for ch in 0..c {
            data[ch * nodes + idx] = row[ch];
        }
    }
    let r = lattice.res;
    let out = Array::new(vec![c, r, r, r], data)?;
    let nviews = cams.len();
    Ok(tape.custom(&parents, out, move |g| {
        exec::map_indexed(nviews, |v| {
            let mut gm = vec![0.0; c * plane];
            for (idx, t) in taps.iter().enumerate() {
                let inv = 1.0 / t.len().max(1) as Real;
                for (vv, tt) in t {
                    if *vv as usize != v {
                        continue;
                    }
                    for ch in 0..c {
                        let go = g[ch * nodes + idx] * inv;
                        if go == 0.0 {
                            continue;
                        }
                        for tap in tt {
                            gm[ch * plane + tap.idx] += go * tap.w;
                        }
                    }
                }
            }
            Some(gm)
        })
    }))
}
