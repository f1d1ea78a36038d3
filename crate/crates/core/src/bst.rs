//! Backprojection through the slice theorem for `B`:
//! the 2D spectrum of `B g` on the ray `σξ_θ` is `2π·ĝ(σ, θ)/σ`.
//!
//! Pipeline: unfold to semi-polar, one-sided DFT per half-ray, pair opposite
//! half-rays into `ĝ(σ, φ)`, grid onto a cartesian frequency grid, apply the
//! radial kernel, inverse 2D DFT, crop.

use std::f64::consts::PI;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dft::{fft2_inplace, next_pow2, transform_rows, Direction};
use crate::error::{Result, TomoError};
use crate::grids::{
    node_coord, polar_to_cartesian_frequency, sinogram_to_semipolar, CartesianImage, FrequencyGrid, FrequencyImage,
    PolarSpectrum,
    Sinogram,
};
use crate::oracles::{gaussian_backprojection, gaussian_projection};
use crate::special::bessel_i0_scaled;

/// Overall output scale. The transforms above are normalized analytically, so
/// this is 1; the constant-sinogram test pins it against the `πc` law.
pub const BST_CALIBRATION: f64 = 1.0;

/// Standard deviation of the Gaussian reference used to carry the DC term.
pub const DC_REFERENCE_WIDTH: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DcMode {
    /// Remove each projection's mass via a Gaussian reference, backproject the
    /// zero-mean rest, add the mean mass back through the reference's exact
    /// backprojection.
    SubtractMean,
    /// Cap the kernel at `1/Δσ` near the origin.
    KernelCap,
}

impl FromStr for DcMode {
    type Err = TomoError;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "subtract_mean" | "subtract-mean" => Ok(Self::SubtractMean),
            "kernel_cap" | "kernel-cap" => Ok(Self::KernelCap),
            other => Err(TomoError::InvalidParameter(format!(
                "dc mode must be subtract_mean or kernel_cap, got {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BstOptions {
    /// Kaiser-Bessel shape along `s`; 0 disables the window.
    pub beta: f64,
    /// Zero-padding factor `z ≥ 1`.
    pub zero_pad: f64,
    pub dc_mode: DcMode,
    pub n_out: usize,
}

impl BstOptions {
    pub fn new(n_out: usize) -> Self {
        Self { beta: 0.0, zero_pad: 2.0, dc_mode: DcMode::SubtractMean, n_out }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.zero_pad >= 1.0 && self.zero_pad.is_finite()) {
            return Err(TomoError::InvalidParameter(format!("zero_pad must be >= 1, got {}", self.zero_pad)));
        }
        if !(self.beta >= 0.0 && self.beta.is_finite()) {
            return Err(TomoError::InvalidParameter(format!("beta must be >= 0, got {}", self.beta)));
        }
        if self.n_out < 2 {
            return Err(TomoError::InvalidParameter(format!("n_out must be >= 2, got {}", self.n_out)));
        }
        Ok(())
    }
}

/// Diagnostics from one BST run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BstReport {
    /// Mean projection mass relative to the reference, `c̄`.
    pub dc_mean: f64,
    /// `(max c_j - min c_j)/|c̄|`; zero for consistent data.
    pub dc_spread: f64,
    /// Largest `|Im|` after the inverse transform relative to the largest `|Re|`.
    pub imag_residue: f64,
    pub dsigma: f64,
}

/// Symmetric Kaiser-Bessel window of length `n`.
pub fn kaiser_window(n: usize, beta: f64) -> Vec<f64> {
    assert!(n >= 2, "kaiser window needs at least 2 samples");
    let denom = bessel_i0_scaled(beta);
    let span = (n - 1) as f64;
    (0..n)
        .map(|i| {
            let c = (2 * i as i64 - n as i64 + 1) as f64 / span;
            let a = beta * (1.0 - c * c).max(0.0).sqrt();
            (bessel_i0_scaled(a) / denom * (a - beta).exp()).abs()
        })
        .collect()
}

/// Discrete `1/σ` kernel: `K_m = 1/(mΔσ)`, `K_0 = 1/Δσ`.
pub fn sigma_kernel(nsigma: usize, dsigma: f64) -> Vec<f64> {
    assert!(dsigma > 0.0, "dsigma must be positive");
    (0..nsigma).map(|m| if m == 0 { 1.0 / dsigma } else { 1.0 / (m as f64 * dsigma) }).collect()
}

#[inline]
fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        x.sin() / x
    }
}

pub fn bst_backproject(g: &Sinogram, opts: &BstOptions) -> Result<CartesianImage> {
    bst_backproject_report(g, opts).map(|(img, _)| img)
}

pub fn bst_backproject_report(g: &Sinogram, opts: &BstOptions) -> Result<(CartesianImage, BstReport)> {
    let (freq, mut report) = cartesian_spectrum(g, opts)?;
    let n = opts.n_out;
    let (mut img, imag_residue) = frequency_to_image(freq.values, &freq.grid, n, BST_CALIBRATION);
    report.imag_residue = imag_residue;
    if opts.dc_mode == DcMode::SubtractMean && report.dc_mean != 0.0 {
        let (c, s_ref) = (report.dc_mean, DC_REFERENCE_WIDTH);
        img.values.par_chunks_mut(n).enumerate().for_each(|(iy, row)| {
            let y = node_coord(iy, n);
            for (ix, v) in row.iter_mut().enumerate() {
                let r = node_coord(ix, n).hypot(y);
                *v += c * gaussian_backprojection(r, s_ref);
            }
        });
    }
    Ok((img, report))
}

/// Spectrum (angular frequencies, transform kernel `e^{-iω·x}`) of the
/// uncropped periodic BST output: the gridded, kernel-weighted spectrum the
/// engine inverts, plus the exact spectrum `c̄·(2π/σ)·e^{-σ²s²/2}` of the
/// mean DC term in `subtract_mean` mode. The origin bin is left as gridded.
pub fn bst_spectrum(g: &Sinogram, opts: &BstOptions) -> Result<(FrequencyImage, BstReport)> {
    let (mut freq, report) = cartesian_spectrum(g, opts)?;
    let grid = freq.grid;
    // frequency_to_image divides by mx·my·dx², i.e. multiplies by Δω²/4π²,
    // so grid values are continuous-transform samples up to the calibration
    let to_ft = BST_CALIBRATION;
    let c = if opts.dc_mode == DcMode::SubtractMean { report.dc_mean } else { 0.0 };
    let s_ref = DC_REFERENCE_WIDTH;
    freq.values.par_chunks_mut(grid.mx).enumerate().for_each(|(ky, row)| {
        for (kx, v) in row.iter_mut().enumerate() {
            *v *= to_ft;
            let (wx, wy) = grid.omega(kx, ky);
            let sigma = wx.hypot(wy);
            if sigma > 0.0 && c != 0.0 {
                *v += c * 2.0 * PI / sigma * (-0.5 * sigma * sigma * s_ref * s_ref).exp();
            }
        }
    });
    Ok((freq, report))
}

fn cartesian_spectrum(g: &Sinogram, opts: &BstOptions) -> Result<(FrequencyImage, BstReport)> {
    opts.validate()?;
    if opts.n_out > 2 * g.nt {
        return Err(TomoError::InvalidParameter(format!(
            "n_out = {} exceeds the supported resolution 2*nt = {}",
            opts.n_out,
            2 * g.nt
        )));
    }
    let n = opts.n_out;

    // DC handling: remove c_j·γ(t) from every projection.
    let s_ref = DC_REFERENCE_WIDTH;
    let (work, dc_mean, dc_spread) = match opts.dc_mode {
        DcMode::SubtractMean => {
            let gamma: Vec<f64> = (0..g.nt).map(|i| gaussian_projection(g.t(i), s_ref)).collect();
            let gsum: f64 = gamma.iter().sum();
            let coeffs: Vec<f64> = (0..g.ntheta).map(|j| g.row(j).iter().sum::<f64>() / gsum).collect();
            let mut w = g.clone();
            for (j, c) in coeffs.iter().enumerate() {
                for (v, gm) in w.row_mut(j).iter_mut().zip(&gamma) {
                    *v -= c * gm;
                }
            }
            let mean = coeffs.iter().sum::<f64>() / coeffs.len() as f64;
            let (lo, hi) = coeffs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &c| (a.min(c), b.max(c)));
            let spread = if mean != 0.0 { (hi - lo) / mean.abs() } else { 0.0 };
            if spread > 1e-3 {
                log::info!("projection masses vary across angles: spread {spread:.3e} of the mean");
            }
            (w, mean, spread)
        }
        DcMode::KernelCap => (g.clone(), 0.0, 0.0),
    };

    let (mut ps, grid) = polar_spectrum(&work, opts.zero_pad, opts.beta, n)?;
    let dsigma = ps.dsigma;
    let (nsigma, nphi) = (ps.nsigma, ps.nphi);
    if opts.dc_mode == DcMode::SubtractMean {
        for k in 0..nphi {
            ps.values[k * nsigma] = Complex64::new(0.0, 0.0);
        }
    }

    let mut freq = polar_to_cartesian_frequency(&ps, &grid)?;
    let mx = grid.mx;
    let origin = match opts.dc_mode {
        DcMode::SubtractMean => {
            let s: Complex64 = (0..nphi).map(|k| ps.values[k * nsigma + 1]).sum();
            s / nphi as f64 * (2.0 * PI / dsigma)
        }
        DcMode::KernelCap => {
            let s: Complex64 = (0..nphi).map(|k| ps.values[k * nsigma]).sum();
            s / nphi as f64 * (2.0 * PI / dsigma)
        }
    };
    let cap = opts.dc_mode == DcMode::KernelCap;
    freq.values.par_chunks_mut(mx).enumerate().for_each(|(ky, row)| {
        for (kx, v) in row.iter_mut().enumerate() {
            let (wx, wy) = grid.omega(kx, ky);
            let sigma = wx.hypot(wy);
            if sigma == 0.0 {
                *v = Complex64::new(origin.re, 0.0);
            } else {
                let s = if cap { sigma.max(dsigma) } else { sigma };
                *v *= 2.0 * PI / s;
            }
        }
    });
    let report = BstReport { dc_mean, dc_spread, imag_residue: 0.0, dsigma };
    Ok((freq, report))
}

/// Samples `ĝ(σ, φ)` of the linearly interpolated sinogram on polar rays out
/// to the Nyquist corner of an `n × n` output, plus the matching frequency grid.
///
/// Each half-ray gets a one-sided DFT (half weight at `s = 0`) padded so that
/// `Δσ ≤ π/z`; opposite half-rays are paired. Profiles are pre-divided by
/// `sinc²(Δσ·s/2)`, which cancels the apodization of the later linear
/// interpolation along `σ`.
pub(crate) fn polar_spectrum(
    g: &Sinogram,
    zero_pad: f64,
    beta: f64,
    n: usize,
) -> Result<(PolarSpectrum, FrequencyGrid)> {
    let p = sinogram_to_semipolar(g)?;
    let ns = p.ns;
    let ntheta = g.ntheta;
    let nphi = p.nphi;
    let ds = p.ds();
    let len = next_pow2((2.0 * zero_pad * ns as f64).ceil() as usize).max(2 * ns + 2);
    let dsigma = 2.0 * PI / (len as f64 * ds);

    let window: Vec<f64> = if beta > 0.0 {
        let w = kaiser_window(2 * ns + 1, beta);
        w[ns..].to_vec()
    } else {
        vec![1.0; ns + 1]
    };
    let weights: Vec<f64> = (0..=ns)
        .map(|i| {
            let s = i as f64 * ds;
            let half = if i == 0 { 0.5 } else { 1.0 };
            half * ds * window[i] / sinc(0.5 * dsigma * s).powi(2)
        })
        .collect();

    let mut rows = vec![Complex64::new(0.0, 0.0); nphi * len];
    rows.par_chunks_mut(len).enumerate().for_each(|(k, row)| {
        for (i, (v, w)) in row.iter_mut().zip(&weights).enumerate() {
            *v = Complex64::new(p.row(k)[i] * w, 0.0);
        }
    });
    transform_rows(&mut rows, len, Direction::Forward);

    // ĝ(σ, φ_k) = h_k(σ) + conj(h_{k+π}(σ)). Past one period the sampled
    // spectrum repeats, and the linear interpolant along t multiplies it by
    // sinc²(σΔs/2).
    let grid = FrequencyGrid::for_image(n, n, zero_pad);
    let nsigma = (grid.nyquist_radius() / dsigma).ceil() as usize + 2;
    let mut ps = PolarSpectrum::zeros(nsigma, nphi, dsigma)?;
    ps.values.par_chunks_mut(nsigma).enumerate().for_each(|(k, out)| {
        let a = &rows[k * len..(k + 1) * len];
        let kb = (k + ntheta) % nphi;
        let b = &rows[kb * len..(kb + 1) * len];
        for (m, v) in out.iter_mut().enumerate() {
            let idx = m % len;
            let sigma = m as f64 * dsigma;
            *v = (a[idx] + b[idx].conj()) * sinc(0.5 * sigma * ds).powi(2);
        }
    });
    Ok((ps, grid))
}

/// Inverse 2D DFT of a spectrum sampled on `grid` (angular frequencies),
/// cropped to `n × n`. Returns the image and the largest `|Im|/|Re|` ratio.
pub(crate) fn frequency_to_image(
    mut buf: Vec<Complex64>,
    grid: &FrequencyGrid,
    n: usize,
    factor: f64,
) -> (CartesianImage, f64) {
    let (mx, my) = (grid.mx, grid.my);
    fft2_inplace(&mut buf, mx, my, Direction::Inverse);
    let dx = 2.0 / n as f64;
    let scale = factor / ((mx * my) as f64 * dx * dx);
    let mut img = CartesianImage::zeros(n, n);
    let mut max_re: f64 = 0.0;
    let mut max_im: f64 = 0.0;
    for iy in 0..n {
        let fy = ((iy as i64 - (n / 2) as i64).rem_euclid(my as i64)) as usize;
        for ix in 0..n {
            let fx = ((ix as i64 - (n / 2) as i64).rem_euclid(mx as i64)) as usize;
            let v = buf[fy * mx + fx] * scale;
            max_re = max_re.max(v.re.abs());
            max_im = max_im.max(v.im.abs());
            img.values[iy * n + ix] = v.re;
        }
    }
    (img, if max_re > 0.0 { max_im / max_re } else { max_im })
}

/// Largest relative L2 distance, over a few probe angles, between the 1D
/// spectrum of a projection and the radial slice of the image spectrum,
/// for `σ` up to half the image Nyquist frequency.
pub fn fst_consistency(f: &CartesianImage, g: &Sinogram) -> f64 {
    fst_consistency_padded(f, g, 8)
}

/// [`fst_consistency`] with the image spectrum zero-padded by `pad`.
pub fn fst_consistency_padded(f: &CartesianImage, g: &Sinogram, pad: usize) -> f64 {
    let (nx, ny) = (f.nx, f.ny);
    let mx = next_pow2(nx * pad.max(1));
    let my = next_pow2(ny * pad.max(1));
    let mut buf = vec![Complex64::new(0.0, 0.0); mx * my];
    for iy in 0..ny {
        let fy = ((iy as i64 - (ny / 2) as i64).rem_euclid(my as i64)) as usize;
        for ix in 0..nx {
            let fx = ((ix as i64 - (nx / 2) as i64).rem_euclid(mx as i64)) as usize;
            buf[fy * mx + fx] = Complex64::new(f.at(ix, iy), 0.0);
        }
    }
    fft2_inplace(&mut buf, mx, my, Direction::Forward);
    let cell = f.dx() * f.dy();
    let dwx = 2.0 * PI / (mx as f64 * f.dx());
    let dwy = 2.0 * PI / (my as f64 * f.dy());

    let at = |kx: i64, ky: i64| buf[(ky.rem_euclid(my as i64) as usize) * mx + kx.rem_euclid(mx as i64) as usize];
    let slice = |wx: f64, wy: f64| {
        let (u, v) = (wx / dwx, wy / dwy);
        let (u0, v0) = (u.floor(), v.floor());
        let (fu, fv) = (u - u0, v - v0);
        let (i, j) = (u0 as i64, v0 as i64);
        (at(i, j) * (1.0 - fu) * (1.0 - fv) + at(i + 1, j) * fu * (1.0 - fv) + at(i, j + 1) * (1.0 - fu) * fv
            + at(i + 1, j + 1) * fu * fv)
            * cell
    };

    let sigma_max = 0.5 * PI / f.dx().max(f.dy());
    let dsig = dwx.min(dwy);
    let nsig = (sigma_max / dsig).floor() as usize + 1;
    let probes = 8.min(g.ntheta);
    let mut worst: f64 = 0.0;
    for p in 0..probes {
        let j = p * g.ntheta / probes;
        let (sn, cs) = g.theta(j).sin_cos();
        let (mut num, mut den) = (0.0, 0.0);
        for m in 0..nsig {
            let sigma = m as f64 * dsig;
            let gh: Complex64 = g
                .row(j)
                .iter()
                .enumerate()
                .map(|(i, &v)| Complex64::from_polar(v, -sigma * g.t(i)))
                .sum::<Complex64>()
                * g.dt();
            let fh = slice(sigma * cs, sigma * sn);
            num += (gh - fh).norm_sqr();
            den += fh.norm_sqr();
        }
        if den > 0.0 {
            worst = worst.max((num / den).sqrt());
        }
    }
    worst
}
