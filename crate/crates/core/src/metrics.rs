//! Error and smoothness measures.

use num_complex::Complex64;

use crate::dft::{dft_2d, Direction};
use crate::error::Result;
use crate::grids::CartesianImage;

/// `mean((a - b)²)`.
pub fn mse(a: &CartesianImage, b: &CartesianImage) -> Result<f64> {
    a.same_shape(b)?;
    Ok(mse_raw(&a.values, &b.values))
}

/// `‖a - b‖₂ / ‖b‖₂`.
pub fn relative_l2(a: &CartesianImage, b: &CartesianImage) -> Result<f64> {
    a.same_shape(b)?;
    Ok(relative_l2_raw(&a.values, &b.values))
}

pub fn mse_raw(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64
}

/// `‖a - b‖₂ / ‖b‖₂`; 0 when both are zero, infinite when only `b` is.
pub fn relative_l2_raw(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    if den == 0.0 {
        return if num == 0.0 { 0.0 } else { f64::INFINITY };
    }
    (num / den).sqrt()
}

/// Relative L2 over the pixels selected by `mask(x, y)`.
pub fn relative_l2_masked<F>(a: &CartesianImage, b: &CartesianImage, mask: F) -> Result<f64>
where
    F: Fn(f64, f64) -> bool,
{
    a.same_shape(b)?;
    let (mut num, mut den) = (0.0, 0.0);
    for iy in 0..a.ny {
        for ix in 0..a.nx {
            if mask(a.x(ix), a.y(iy)) {
                let (u, v) = (a.at(ix, iy), b.at(ix, iy));
                num += (u - v) * (u - v);
                den += v * v;
            }
        }
    }
    Ok(if den == 0.0 { if num == 0.0 { 0.0 } else { f64::INFINITY } } else { (num / den).sqrt() })
}

/// Spectral energy `Σ|F(k)|²/(nx·ny)` over bins whose radial frequency exceeds
/// `fraction` of Nyquist (normalized per axis).
pub fn hf_energy(img: &CartesianImage, fraction: f64) -> f64 {
    let (nx, ny) = (img.nx, img.ny);
    let data: Vec<Complex64> = img.values.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    let spec = dft_2d(&data, nx, ny, Direction::Forward);
    let mut acc = 0.0;
    for ky in 0..ny {
        let fy = crate::dft::signed_index(ky, ny) as f64 / (ny as f64 / 2.0);
        for kx in 0..nx {
            let fx = crate::dft::signed_index(kx, nx) as f64 / (nx as f64 / 2.0);
            if fx.hypot(fy) > fraction {
                acc += spec[ky * nx + kx].norm_sqr();
            }
        }
    }
    acc / (nx * ny) as f64
}

/// Anisotropic total variation `Σ (|∂x f| + |∂y f|)·dx·dy` with forward differences.
pub fn total_variation(img: &CartesianImage) -> f64 {
    let (nx, ny) = (img.nx, img.ny);
    let mut acc = 0.0;
    for iy in 0..ny {
        for ix in 0..nx {
            let v = img.at(ix, iy);
            if ix + 1 < nx {
                acc += (img.at(ix + 1, iy) - v).abs() * img.dy();
            }
            if iy + 1 < ny {
                acc += (img.at(ix, iy + 1) - v).abs() * img.dx();
            }
        }
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_images_have_zero_mse() {
        let a = CartesianImage::from_fn(16, 16, |x, y| x * y);
        assert_eq!(mse(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn doubling_gives_relative_error_one() {
        let b = CartesianImage::from_fn(16, 16, |x, y| 1.0 + x - y);
        let a = CartesianImage { values: b.values.iter().map(|v| 2.0 * v).collect(), ..b.clone() };
        assert!((relative_l2(&a, &b).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn constant_has_no_high_frequency_energy() {
        let c = CartesianImage::from_fn(32, 32, |_, _| 3.0);
        assert!(hf_energy(&c, 0.5) < 1e-20);
        let checker = CartesianImage::from_fn(32, 32, |x, _| if (x * 16.0).round() as i64 % 2 == 0 { 1.0 } else { -1.0 });
        assert!(hf_energy(&checker, 0.5) > 0.9 * checker.norm().powi(2));
    }

    #[test]
    fn mismatched_shapes_are_rejected() {
        assert!(mse(&CartesianImage::zeros(4, 4), &CartesianImage::zeros(4, 5)).is_err());
    }

    #[test]
    fn total_variation_of_step() {
        let img = CartesianImage::from_fn(10, 10, |x, _| if x >= 0.0 { 1.0 } else { 0.0 });
        assert!((total_variation(&img) - 10.0 * 0.2).abs() < 1e-12);
    }
}
