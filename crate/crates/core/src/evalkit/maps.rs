//! Metrics on rendered geometric maps.

use crate::losses::msssim;
use crate::render::GBuffer;
use crate::Real;

pub const PSNR_CAP: Real = 99.0;
/// Value written to background pixels of both maps before comparison.
pub const BACKGROUND_VALUE: Real = 1.0;

/// `10 log10(1 / mse)`, capped at [`PSNR_CAP`].
pub fn psnr(mse: Real) -> Real {
    if mse <= 0.0 {
        return PSNR_CAP;
    }
    (10.0 * (1.0 / mse).log10()).min(PSNR_CAP)
}

pub fn psnr_map(x: &[Real], y: &[Real]) -> Real {
    assert_eq!(x.len(), y.len(), "map sizes differ");
    let mse = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<Real>() / x.len().max(1) as Real;
    psnr(mse)
}

/// Single-scale SSIM of `[C, H, W]` maps in `[0, 1]`.
pub fn ssim_map(x: &[Real], y: &[Real], channels: usize, h: usize, w: usize) -> Real {
    msssim::ssim(x, y, channels, h, w)
}

/// `1 - MS-SSIM`, unscaled.
pub fn structural_distance(x: &[Real], y: &[Real], channels: usize, h: usize, w: usize) -> Real {
    1.0 - msssim::ms_ssim(x, y, channels, h, w)
}

/// Depth mapped to `[0, 1]` across the depth range of the unit bounding
/// sphere seen from `camera_distance`; background becomes 1.
pub fn normalize_depth(g: &GBuffer, camera_distance: Real) -> Vec<Real> {
    let near = camera_distance - 1.0;
    g.depth
        .data()
        .iter()
        .enumerate()
        .map(|(p, &d)| if g.is_covered(p) { ((d - near) / 2.0).clamp(0.0, 1.0) } else { BACKGROUND_VALUE })
        .collect()
}

/// Normals mapped by `(n + 1) / 2`; background becomes 1.
pub fn normalize_normals(g: &GBuffer) -> Vec<Real> {
    let n = g.pixels();
    g.normal
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| if g.is_covered(i % n) { 0.5 * (v + 1.0) } else { BACKGROUND_VALUE })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn psnr_closed_forms() {
        let x = vec![0.3; 100];
        assert_eq!(psnr_map(&x, &x), PSNR_CAP);
        let y: Vec<Real> = x.iter().map(|v| v + 0.1).collect();
        assert!((psnr_map(&x, &y) - 20.0).abs() < 1e-9);
        assert!((psnr(0.01) - 20.0).abs() < 1e-12);
        assert!((psnr(0.25) - 6.020599913279624).abs() < 1e-9);
    }

    fn pattern(h: usize, w: usize) -> Vec<Real> {
        (0..h * w).map(|i| 0.5 + 0.4 * ((i % w) as Real * 0.3).sin() * ((i / w) as Real * 0.2).cos()).collect()
    }

    #[test]
    fn ssim_properties() {
        let x = pattern(32, 32);
        assert!((ssim_map(&x, &x, 1, 32, 32) - 1.0).abs() < 1e-12);
        let inv: Vec<Real> = x.iter().map(|v| 1.0 - v).collect();
        assert!(ssim_map(&x, &inv, 1, 32, 32) < 0.0);
        let shifted: Vec<Real> = x.iter().map(|v| v + 0.01).collect();
        assert!(ssim_map(&x, &shifted, 1, 32, 32) > 0.98);
        assert_eq!(structural_distance(&x, &x, 1, 32, 32), 0.0);
    }
}
