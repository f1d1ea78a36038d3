//! Filtered and Tikhonov-regularized reconstruction.
//!
//! Filters take ordinary frequency `ν` (cycles per unit length):
//! `F_λ(ν) = |ν|/(1 + λ|ν|)`, so that `B F_λ g` solves `(B R + λ I) f = B g`.

use std::f64::consts::PI;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bst::{bst_backproject, frequency_to_image, polar_spectrum, BstOptions};
use crate::dft::{next_pow2, signed_index, transform_rows, Direction};
use crate::error::{Result, TomoError};
use crate::grids::{polar_to_cartesian_frequency, CartesianImage, Sinogram};
use crate::logpolar::{logpolar_backproject, LogPolarOptions};
use crate::radon::radon_numeric;
use crate::reference::backproject_naive;

pub use crate::metrics::total_variation;

/// Output scale of [`fbp`]. Filters and engines are normalized analytically;
/// the disk test pins this at 1.
pub const FBP_SCALE: f64 = 1.0;

/// Zero-padding factor of the projection filter. With `F(0) = 0` the
/// periodized ramp kernel carries a DC offset that falls like 1/padding;
/// at ×2 it biases reconstructions by about 6%.
pub const FILTER_PAD: usize = 4;

/// BST zero-padding used by [`fbp`]: filtered projections have tails cut at
/// `|t| = 1` and need a finer `Δσ` than raw ones.
pub const FBP_BST_ZERO_PAD: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterKind {
    Ramp,
    Tikhonov,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FilterSpec {
    pub lambda: f64,
    pub kind: FilterKind,
    /// Fraction of the sinogram Nyquist frequency kept, in `(0, 1]`.
    pub cutoff: f64,
}

impl FilterSpec {
    pub fn ramp() -> Self {
        Self { lambda: 0.0, kind: FilterKind::Ramp, cutoff: 1.0 }
    }

    pub fn tikhonov(lambda: f64) -> Self {
        Self { lambda, kind: FilterKind::Tikhonov, cutoff: 1.0 }
    }

    pub fn with_cutoff(self, cutoff: f64) -> Self {
        Self { cutoff, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(TomoError::InvalidParameter(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.cutoff > 0.0 && self.cutoff <= 1.0) {
            return Err(TomoError::InvalidParameter(format!("cutoff must be in (0, 1], got {}", self.cutoff)));
        }
        Ok(())
    }

    fn effective_lambda(&self) -> f64 {
        match self.kind {
            FilterKind::Ramp => 0.0,
            FilterKind::Tikhonov => self.lambda,
        }
    }

    /// `F_λ(ν)` without the cutoff.
    pub fn response(&self, nu: f64) -> f64 {
        let a = nu.abs();
        a / (1.0 + self.effective_lambda() * a)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Engine {
    Naive,
    Bst,
    Logpolar,
}

impl FromStr for Engine {
    type Err = TomoError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "naive" => Ok(Self::Naive),
            "bst" => Ok(Self::Bst),
            "logpolar" | "log-polar" => Ok(Self::Logpolar),
            other => Err(TomoError::InvalidParameter(format!(
                "engine must be naive, bst or logpolar, got {other:?}"
            ))),
        }
    }
}

/// Filters one projection. Returns the full zero-padded (length `2^k ≥ 4·nt`)
/// circular result; the first `nt` entries are the filtered projection.
pub fn filter_projection(row: &[f64], dt: f64, spec: &FilterSpec) -> Vec<f64> {
    filter_projection_padded(row, dt, spec, FILTER_PAD)
}

pub fn filter_projection_padded(row: &[f64], dt: f64, spec: &FilterSpec, pad: usize) -> Vec<f64> {
    let nt = row.len();
    let len = next_pow2(pad.max(2) * nt);
    let mut buf: Vec<Complex64> = row.iter().map(|&v| Complex64::new(v, 0.0)).collect();
    buf.resize(len, Complex64::new(0.0, 0.0));
    transform_rows(&mut buf, len, Direction::Forward);
    let nyq = 0.5 / dt;
    for (k, v) in buf.iter_mut().enumerate() {
        let nu = signed_index(k, len) as f64 / (len as f64 * dt);
        let pass = if nu.abs() <= spec.cutoff * nyq + 1e-12 { 1.0 } else { 0.0 };
        *v *= spec.response(nu) * pass;
    }
    transform_rows(&mut buf, len, Direction::Inverse);
    buf.iter().map(|v| v.re / len as f64).collect()
}

pub fn filter_sinogram(g: &Sinogram, spec: &FilterSpec) -> Result<Sinogram> {
    spec.validate()?;
    let dt = g.dt();
    let mut out = Sinogram::zeros(g.nt, g.ntheta);
    out.values.par_chunks_mut(g.nt).enumerate().for_each(|(j, row)| {
        let full = filter_projection(g.row(j), dt, spec);
        row.copy_from_slice(&full[..g.nt]);
    });
    Ok(out)
}

pub fn backproject_with(g: &Sinogram, engine: Engine, n: usize) -> Result<CartesianImage> {
    match engine {
        Engine::Naive => Ok(backproject_naive(g, n)),
        Engine::Bst => bst_backproject(g, &BstOptions::new(n)),
        Engine::Logpolar => logpolar_backproject(g, &LogPolarOptions::default(), n).map(|r| r.image),
    }
}

/// `B F_λ g`, backprojected with the chosen engine.
pub fn fbp(g: &Sinogram, spec: &FilterSpec, engine: Engine, n: usize) -> Result<CartesianImage> {
    let filtered = filter_sinogram(g, spec)?;
    let mut img = match engine {
        Engine::Bst => bst_backproject(&filtered, &BstOptions { zero_pad: FBP_BST_ZERO_PAD, ..BstOptions::new(n) })?,
        other => backproject_with(&filtered, other, n)?,
    };
    if FBP_SCALE != 1.0 {
        img.values.iter_mut().for_each(|v| *v *= FBP_SCALE);
    }
    Ok(img)
}

/// Direct Fourier inversion with the regularized slice relation
/// `f̂(σξ_θ) = ĝ(σ, θ)/(1 + λν)`, `ν = σ/2π`, gridded like the BST engine.
/// Frequencies beyond the sinogram's Nyquist limit carry no data and are zeroed.
pub fn regularized_fst_reconstruct(g: &Sinogram, lambda: f64, n: usize) -> Result<CartesianImage> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(TomoError::InvalidParameter(format!("lambda must be >= 0, got {lambda}")));
    }
    if n < 2 || n > 2 * g.nt {
        return Err(TomoError::InvalidParameter(format!("n must be in [2, 2*nt], got {n}")));
    }
    let (ps, grid) = polar_spectrum(g, FBP_BST_ZERO_PAD, 0.0, n)?;
    let mut freq = polar_to_cartesian_frequency(&ps, &grid)?;
    let sigma_nyq = PI / g.dt();
    let mx = grid.mx;
    freq.values.par_chunks_mut(mx).enumerate().for_each(|(ky, row)| {
        for (kx, v) in row.iter_mut().enumerate() {
            let (wx, wy) = grid.omega(kx, ky);
            let sigma = wx.hypot(wy);
            if sigma > sigma_nyq {
                *v = Complex64::new(0.0, 0.0);
            } else {
                *v /= 1.0 + lambda * sigma / (2.0 * PI);
            }
        }
    });
    Ok(frequency_to_image(freq.values, &grid, n, 1.0).0)
}

/// `‖B R f + λ f - B g‖ / ‖B g‖` with the naive backprojector and the
/// midpoint ray-sum projector.
pub fn normal_equations_residual(f: &CartesianImage, g: &Sinogram, lambda: f64) -> f64 {
    let rf = radon_numeric(f, g.nt, g.ntheta, f.dx().min(f.dy()) / 2.0).expect("step within range");
    let brf = backproject_naive(&rf, f.nx);
    let bg = backproject_naive(g, f.nx);
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..bg.values.len() {
        let r = brf.values[i] + lambda * f.values[i] - bg.values[i];
        num += r * r;
        den += bg.values[i] * bg.values[i];
    }
    if den == 0.0 {
        return if num == 0.0 { 0.0 } else { f64::INFINITY };
    }
    (num / den).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::{hf_energy, relative_l2_masked};
    use crate::phantoms::{rasterize, shepp_logan, EllipseSet};
    use crate::radon::radon_ellipses;

    #[test]
    fn lambda_zero_is_the_ramp() {
        let t = FilterSpec::tikhonov(0.0);
        let r = FilterSpec::ramp();
        for nu in [-3.0, 0.0, 0.5, 17.0] {
            assert_eq!(t.response(nu), r.response(nu));
            assert_eq!(r.response(nu), nu.abs());
        }
    }

    #[test]
    fn filter_bound() {
        for lambda in [0.002, 0.2, 5.0] {
            let f = FilterSpec::tikhonov(lambda);
            for nu in [0.1, 1.0, 10.0, 1e4] {
                assert!(f.response(nu) <= nu.min(1.0 / lambda));
            }
        }
    }

    #[test]
    fn filtered_projection_has_no_dc() {
        let g = radon_ellipses(&shepp_logan(), 128, 4);
        for lambda in [0.0, 0.02] {
            let full = filter_projection(g.row(1), g.dt(), &FilterSpec::tikhonov(lambda));
            let scale: f64 = g.row(1).iter().map(|v| v.abs()).sum();
            assert!(full.iter().sum::<f64>().abs() <= 1e-10 * scale);
        }
    }

    #[test]
    fn larger_lambda_is_smoother() {
        let g = radon_ellipses(&shepp_logan(), 128, 8);
        let hf = |lambda: f64| {
            let f = filter_sinogram(&g, &FilterSpec::tikhonov(lambda)).unwrap();
            let mut e = 0.0;
            for j in 0..g.ntheta {
                let row: Vec<Complex64> = f.row(j).iter().map(|&v| Complex64::new(v, 0.0)).collect();
                let s = crate::dft::dft_1d(&row, Direction::Forward);
                e += s[g.nt / 4..3 * g.nt / 4].iter().map(|v| v.norm_sqr()).sum::<f64>();
            }
            e
        };
        assert!(hf(0.2) < hf(0.002));
    }

    #[test]
    fn filtering_commutes_with_angle_permutation() {
        let g = radon_ellipses(&shepp_logan(), 64, 6);
        let mut perm = Sinogram::zeros(64, 6);
        let order = [3, 0, 5, 1, 4, 2];
        for (j, &src) in order.iter().enumerate() {
            perm.row_mut(j).copy_from_slice(g.row(src));
        }
        let a = filter_sinogram(&g, &FilterSpec::ramp()).unwrap();
        let b = filter_sinogram(&perm, &FilterSpec::ramp()).unwrap();
        for (j, &src) in order.iter().enumerate() {
            assert_eq!(b.row(j), a.row(src));
        }
    }

    #[test]
    fn disk_inversion_naive() {
        let g = radon_ellipses(&EllipseSet::disk(0.6, 1.0), 128, 180);
        let f = fbp(&g, &FilterSpec::ramp(), Engine::Naive, 128).unwrap();
        let (mut si, mut ni, mut so, mut no) = (0.0, 0, 0.0, 0);
        for iy in 0..128 {
            for ix in 0..128 {
                let r = f.x(ix).hypot(f.y(iy));
                if r < 0.5 {
                    si += f.at(ix, iy);
                    ni += 1;
                } else if r > 0.7 && r < 1.0 {
                    so += f.at(ix, iy);
                    no += 1;
                }
            }
        }
        let (mi, mo) = (si / ni as f64, so / no as f64);
        assert!((mi - 1.0).abs() <= 0.05, "interior mean {mi}");
        assert!(mo.abs() <= 0.05, "exterior mean {mo}");
    }

    #[test]
    fn fst_route_matches_fbp_route() {
        let g = radon_ellipses(&shepp_logan(), 128, 180);
        let a = regularized_fst_reconstruct(&g, 0.0, 128).unwrap();
        let b = fbp(&g, &FilterSpec::ramp(), Engine::Bst, 128).unwrap();
        // outside the unit disk FBP sees filtered projections cut at |t| = 1
        let rel = relative_l2_masked(&a, &b, |x, y| x.hypot(y) <= 1.0).unwrap();
        assert!(rel <= 5e-2, "rel={rel}");
    }

    #[test]
    fn fst_zero_and_large_lambda() {
        let z = regularized_fst_reconstruct(&Sinogram::zeros(64, 32), 0.1, 64).unwrap();
        assert!(z.values.iter().all(|&v| v == 0.0));
        let g = radon_ellipses(&shepp_logan(), 64, 90);
        let f0 = regularized_fst_reconstruct(&g, 0.0, 64).unwrap();
        let f100 = regularized_fst_reconstruct(&g, 100.0, 64).unwrap();
        assert!(f100.norm() <= f0.norm());
        assert!(hf_energy(&f100, 0.25) <= hf_energy(&f0, 0.25) / (1.0 + 100.0));
    }

    #[test]
    fn normal_equation_residuals() {
        assert_eq!(normal_equations_residual(&CartesianImage::zeros(16, 16), &Sinogram::zeros(16, 8), 0.0), 0.0);
        let set = EllipseSet::disk(0.5, 1.0);
        let f = rasterize(&set, 64);
        let g = radon_ellipses(&set, 64, 90);
        let r = normal_equations_residual(&f, &g, 0.0);
        assert!(r <= 0.1, "r={r}");
    }
}
