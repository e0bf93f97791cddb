//! Earth mover's distance between equal-size point sets: the mean distance
//! under an optimal one-to-one matching.

use super::EvalError;
use crate::geometry::Vec3;
use crate::Real;

/// Largest size solved exactly; bigger inputs use the auction solver.
pub const HUNGARIAN_MAX: usize = 256;

fn cost_matrix(p: &[Vec3], q: &[Vec3]) -> Vec<Real> {
    let n = p.len();
    let rows = crate::exec::map_indexed(n, |i| q.iter().map(|&b| (p[i] - b).norm()).collect::<Vec<_>>());
    rows.concat()
}

/// Minimum-cost perfect matching on a square `n x n` cost matrix. Returns
/// `assign[row] = column`.
pub fn hungarian(cost: &[Real], n: usize) -> Vec<usize> {
    assert_eq!(cost.len(), n * n, "cost matrix must be n x n");
    // Shortest augmenting paths with row/column potentials; 1-based with a
    // virtual column 0.
    let inf = Real::INFINITY;
    let mut u = vec![0.0; n + 1];
    let mut v = vec![0.0; n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        let mut minv = vec![inf; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[(i0 - 1) * n + j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut assign = vec![0; n];
    for j in 1..=n {
        assign[owner[j] - 1] = j - 1;
    }
    assign
}

/// Auction assignment with epsilon scaling. The result is within `n * eps`
/// of the optimum for the final `eps`.
fn auction(cost: &[Real], n: usize) -> Vec<usize> {
    let max_cost = cost.iter().cloned().fold(0.0, Real::max);
    let mut price = vec![0.0; n];
    let final_eps = (max_cost * 1e-4).max(1e-12);
    let mut eps = (max_cost / 4.0).max(final_eps);
    let mut assign = vec![usize::MAX; n];
    loop {
        let mut owner = vec![usize::MAX; n];
        assign.iter_mut().for_each(|a| *a = usize::MAX);
        let mut queue: std::collections::VecDeque<usize> = (0..n).collect();
        while let Some(i) = queue.pop_front() {
            let row = &cost[i * n..(i + 1) * n];
            let (mut best, mut second, mut bj) = (Real::NEG_INFINITY, Real::NEG_INFINITY, 0);
            for j in 0..n {
                let val = -row[j] - price[j];
                if val > best {
                    second = best;
                    best = val;
                    bj = j;
                } else if val > second {
                    second = val;
                }
            }
            let bid = if second.is_finite() { best - second + eps } else { eps };
            price[bj] += bid;
            if owner[bj] != usize::MAX {
                assign[owner[bj]] = usize::MAX;
                queue.push_back(owner[bj]);
            }
            owner[bj] = i;
            assign[i] = bj;
        }
        if eps <= final_eps {
            break;
        }
        eps = (eps / 5.0).max(final_eps);
    }
    assign
}

fn check(p: &[Vec3], q: &[Vec3]) -> Result<(), EvalError> {
    if p.len() != q.len() {
        return Err(EvalError::SizeMismatch(p.len(), q.len()));
    }
    if p.is_empty() {
        return Err(EvalError::EmptyPoints);
    }
    Ok(())
}

fn matched_mean(cost: &[Real], n: usize, assign: &[usize]) -> Real {
    assign.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum::<Real>() / n as Real
}

pub fn emd_hungarian(p: &[Vec3], q: &[Vec3]) -> Result<Real, EvalError> {
    check(p, q)?;
    let cost = cost_matrix(p, q);
    Ok(matched_mean(&cost, p.len(), &hungarian(&cost, p.len())))
}

pub fn emd_auction(p: &[Vec3], q: &[Vec3]) -> Result<Real, EvalError> {
    check(p, q)?;
    let cost = cost_matrix(p, q);
    Ok(matched_mean(&cost, p.len(), &auction(&cost, p.len())))
}

/// Exact for up to [`HUNGARIAN_MAX`] points, auction above.
pub fn emd(p: &[Vec3], q: &[Vec3]) -> Result<Real, EvalError> {
    if p.len() <= HUNGARIAN_MAX {
        emd_hungarian(p, q)
    } else {
        emd_auction(p, q)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{seq::SliceRandom, Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cloud(n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec3> {
        (0..n).map(|_| Vec3::new(rng.gen(), rng.gen(), rng.gen())).collect()
    }

    fn brute_force(cost: &[Real], n: usize) -> Real {
        fn rec(cost: &[Real], n: usize, row: usize, used: &mut [bool], acc: Real, best: &mut Real) {
            if row == n {
                *best = best.min(acc);
                return;
            }
            for j in 0..n {
                if !used[j] {
                    used[j] = true;
                    rec(cost, n, row + 1, used, acc + cost[row * n + j], best);
                    used[j] = false;
                }
            }
        }
        let mut best = Real::INFINITY;
        rec(cost, n, 0, &mut vec![false; n], 0.0, &mut best);
        best
    }

    #[test]
    fn hungarian_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for n in 1..=7 {
            let cost: Vec<Real> = (0..n * n).map(|_| rng.gen_range(0.0..10.0)).collect();
            let a = hungarian(&cost, n);
            let total: Real = a.iter().enumerate().map(|(i, &j)| cost[i * n + j]).sum();
            assert!((total - brute_force(&cost, n)).abs() < 1e-9);
            let mut cols = a.clone();
            cols.sort();
            assert_eq!(cols, (0..n).collect::<Vec<_>>());
        }
    }

    #[test]
    fn permutation_has_zero_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p = cloud(300, &mut rng);
        let mut q = p.clone();
        q.shuffle(&mut rng);
        assert_eq!(emd(&p[..100], &{
            let mut r = p[..100].to_vec();
            r.reverse();
            r
        })
        .unwrap(), 0.0);
        assert!(emd(&p, &q).unwrap() < 1e-3);
    }

    #[test]
    fn size_mismatch_rejected() {
        let p = vec![Vec3::ZERO; 3];
        assert!(matches!(emd(&p, &p[..2]), Err(EvalError::SizeMismatch(3, 2))));
        assert!(matches!(emd(&[], &[]), Err(EvalError::EmptyPoints)));
    }

    #[test]
    fn auction_close_to_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..50 {
            let p = cloud(64, &mut rng);
            let q = cloud(64, &mut rng);
            let exact = emd_hungarian(&p, &q).unwrap();
            let approx = emd_auction(&p, &q).unwrap();
            assert!(approx >= exact - 1e-12);
            assert!((approx - exact) / exact < 0.05, "{approx} vs {exact}");
        }
    }

    #[test]
    fn translation_gives_offset() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = cloud(40, &mut rng);
        // Tiny shift: matching each point to its own image is optimal.
        let d = Vec3::new(1e-3, 0.0, 0.0);
        let q: Vec<Vec3> = p.iter().map(|&x| x + d).collect();
        assert!((emd(&p, &q).unwrap() - 1e-3).abs() < 1e-9);
    }
}
