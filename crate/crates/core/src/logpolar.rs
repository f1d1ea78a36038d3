//! Log-polar convolution backprojection.
//!
//! With `s = e^μ` and `x = e^ρ ξ_θ`, backprojection of semi-polar data becomes
//! a convolution on the `(ρ, θ)` cylinder:
//! `B g(ρ, θ) = ∫∫ p(μ, φ) δ(1 - e^{ρ-μ} cos(θ-φ)) dμ dφ`.
//! The convolution runs through 2D DFTs, zero-padded along `ρ`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dft::{fft2_inplace, next_pow2, Direction};
use crate::error::{Result, TomoError};
use crate::grids::{
    adaptive_rho0, compute_nrho, fill_logpolar_from_semipolar, logpolar_to_cartesian_within,
    sinogram_to_semipolar, CartesianImage, LogPolarImage, Sinogram,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rho0Mode {
    /// `ρ₀ = ln(min(Δx, Δy)) - ln 2`.
    Adaptive,
    Explicit(f64),
}

/// A block of projection angles centred at `theta0` with half-width `beta`,
/// processed with the object shrunk by `rescale` and moved away from the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sector {
    pub theta0: f64,
    pub beta: f64,
    pub rescale: f64,
}

impl Sector {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta <= PI / 2.0 + 1e-12) {
            return Err(TomoError::InvalidParameter(format!("sector beta must be in (0, pi/2], got {}", self.beta)));
        }
        if !(self.rescale > 0.0 && self.rescale < 0.5) {
            return Err(TomoError::InvalidParameter(format!(
                "sector rescale must be in (0, 1/2), got {}",
                self.rescale
            )));
        }
        if !self.theta0.is_finite() {
            return Err(TomoError::InvalidParameter("sector theta0 must be finite".into()));
        }
        Ok(())
    }
}

/// Default sector half-width for partial backprojection.
pub const DEFAULT_SECTOR_BETA: f64 = PI / 8.0;
/// Default object shrink factor `a_r` for partial backprojection.
pub const DEFAULT_SECTOR_RESCALE: f64 = 0.25;

/// Evenly spaced sectors of half-width `beta` covering `[0, π)`.
pub fn default_sectors(beta: f64, rescale: f64) -> Vec<Sector> {
    let count = (PI / (2.0 * beta)).ceil().max(1.0) as usize;
    let half = PI / (2.0 * count as f64);
    (0..count).map(|k| Sector { theta0: (2 * k + 1) as f64 * half, beta: half, rescale }).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogPolarOptions {
    pub rho0_mode: Rho0Mode,
    pub nrho_override: Option<usize>,
    /// When set, the single sector is run through [`partial_backproject`].
    pub sector: Option<Sector>,
    /// Radial FFT length as a multiple of `N_ρ` (rounded up to a power of two).
    pub zero_pad: f64,
}

impl Default for LogPolarOptions {
    fn default() -> Self {
        Self { rho0_mode: Rho0Mode::Adaptive, nrho_override: None, sector: None, zero_pad: 2.0 }
    }
}

/// A log-polar backprojection with the mesh it was computed on.
#[derive(Debug, Clone, PartialEq)]
pub struct LogPolarBackprojection {
    pub image: CartesianImage,
    pub rho0: f64,
    /// `e^{ρ₀}`; values inside this disk are not resolved.
    pub fovea_radius: f64,
    pub nrho: usize,
    pub drho: f64,
}

/// Box-rule kernel on offsets `ρ' = d·Δρ`, `d ∈ [-(N_ρ-1), N_ρ-1]`, and angles
/// `θ'_j = -π + j·Δφ`: `1/Δρ` where `|e^{ρ'} cos θ' - 1| ≤ Δρ`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogPolarKernel {
    pub drho: f64,
    pub nrho: usize,
    pub nphi: usize,
    /// `values[j * (2·nrho - 1) + (d + nrho - 1)]`.
    pub values: Vec<f64>,
}

impl LogPolarKernel {
    pub fn width(&self) -> usize {
        2 * self.nrho - 1
    }

    pub fn at(&self, d: i64, j: usize) -> f64 {
        self.values[j * self.width() + (d + self.nrho as i64 - 1) as usize]
    }

    pub fn support_count(&self) -> usize {
        self.values.iter().filter(|&&v| v != 0.0).count()
    }
}

/// Offsets `d` (in units of `Δρ`) where the box rule fires at angle `θ'`.
fn kernel_offsets(drho: f64, nrho: usize, theta: f64) -> impl Iterator<Item = i64> {
    let c = theta.cos();
    let max_d = nrho as i64 - 1;
    let (lo, hi) = if c > 0.0 {
        let lo = ((1.0 - drho).max(1e-300) / c).ln() / drho;
        let hi = ((1.0 + drho) / c).ln() / drho;
        ((lo.floor() as i64 - 1).max(-max_d), (hi.ceil() as i64 + 1).min(max_d))
    } else {
        (1, 0)
    };
    (lo..=hi).filter(move |&d| ((d as f64 * drho).exp() * c - 1.0).abs() <= drho)
}

pub fn make_logpolar_kernel(drho: f64, nrho: usize, nphi: usize) -> LogPolarKernel {
    let width = 2 * nrho - 1;
    let mut values = vec![0.0; nphi * width];
    let dphi = 2.0 * PI / nphi as f64;
    for j in 0..nphi {
        let theta = -PI + j as f64 * dphi;
        for d in kernel_offsets(drho, nrho, theta) {
            values[j * width + (d + nrho as i64 - 1) as usize] = 1.0 / drho;
        }
    }
    LogPolarKernel { drho, nrho, nphi, values }
}

/// Cyclic-in-θ, linear-in-ρ convolution of `l` with the box-rule kernel,
/// scaled by `Δρ·Δφ/2` (the box has width `2Δρ` in the level-set variable).
pub fn logpolar_convolve(l: &LogPolarImage) -> LogPolarImage {
    logpolar_convolve_padded(l, 2.0)
}

/// [`logpolar_convolve`] with a radial FFT length of `next_pow2(⌈z·N_ρ⌉)`.
/// `z < 2` lets the kernel tail wrap around in `ρ`.
pub fn logpolar_convolve_padded(l: &LogPolarImage, z: f64) -> LogPolarImage {
    let (nrho, nphi) = (l.nrho, l.nphi);
    let p = next_pow2((z.max(1.0) * nrho as f64).ceil() as usize);
    let dphi = l.dphi();
    let zero = Complex64::new(0.0, 0.0);

    let mut data = vec![zero; nphi * p];
    data.par_chunks_mut(p).enumerate().for_each(|(k, row)| {
        for (v, &x) in row.iter_mut().zip(l.row(k)) {
            *v = Complex64::new(x, 0.0);
        }
    });
    let mut kern = vec![zero; nphi * p];
    kern.par_chunks_mut(p).enumerate().for_each(|(k, row)| {
        // row k holds angular offset k·Δφ wrapped into [-π, π)
        let theta = (k as f64 * dphi + PI).rem_euclid(2.0 * PI) - PI;
        for d in kernel_offsets(l.drho, nrho, theta) {
            row[d.rem_euclid(p as i64) as usize] = Complex64::new(1.0 / l.drho, 0.0);
        }
    });

    fft2_inplace(&mut data, p, nphi, Direction::Forward);
    fft2_inplace(&mut kern, p, nphi, Direction::Forward);
    data.par_iter_mut().zip(kern.par_iter()).for_each(|(a, b)| *a *= b);
    drop(kern);
    fft2_inplace(&mut data, p, nphi, Direction::Inverse);

    let scale = l.drho * dphi * 0.5 / (p * nphi) as f64;
    let mut out = l.clone();
    out.values.par_chunks_mut(nrho).enumerate().for_each(|(k, row)| {
        for (i, v) in row.iter_mut().enumerate() {
            *v = data[k * p + i].re * scale;
        }
    });
    out
}

/// Largest log step must not exceed the radial step `2/N_s`.
fn check_biggest_step(drho: f64, ns: usize) -> Result<()> {
    let step = 1.0 - (-drho).exp();
    let ds = 2.0 / ns as f64;
    if step > ds * (1.0 + 1e-9) {
        return Err(TomoError::InvalidGrid(format!(
            "log-polar mesh too coarse: largest step {step:.4e} exceeds radial step {ds:.4e}"
        )));
    }
    Ok(())
}

pub fn logpolar_backproject(g: &Sinogram, opts: &LogPolarOptions, n_out: usize) -> Result<LogPolarBackprojection> {
    if n_out < 2 {
        return Err(TomoError::InvalidParameter(format!("n_out must be >= 2, got {n_out}")));
    }
    if !(opts.zero_pad >= 1.0) {
        return Err(TomoError::InvalidParameter(format!("zero_pad must be >= 1, got {}", opts.zero_pad)));
    }
    if let Some(sector) = opts.sector {
        let image = partial_backproject(g, &[sector], n_out)?;
        return Ok(LogPolarBackprojection { image, rho0: f64::NEG_INFINITY, fovea_radius: 0.0, nrho: 0, drho: 0.0 });
    }
    let p = sinogram_to_semipolar(g)?;
    let ns = p.ns;
    let ln_step = (1.0 - 2.0 / ns as f64).ln();
    let (rho0, nrho) = match opts.rho0_mode {
        Rho0Mode::Adaptive => (adaptive_rho0(n_out, n_out), compute_nrho(ns, n_out, n_out)),
        Rho0Mode::Explicit(r) => {
            if !(r < 0.0) {
                return Err(TomoError::InvalidParameter(format!("rho0 must be negative, got {r}")));
            }
            let n = if ln_step.is_finite() { (r / ln_step).ceil() as usize } else { 2 };
            (r, n.clamp(2, 64 * ns))
        }
    };
    let nrho = opts.nrho_override.unwrap_or(nrho);
    if nrho < 2 {
        return Err(TomoError::InvalidParameter(format!("nrho must be at least 2, got {nrho}")));
    }
    let drho = -rho0 / nrho as f64;
    check_biggest_step(drho, ns)?;

    // Extend past ρ = 0 so the square's corners (‖x‖ up to √2) are covered.
    let extra = (std::f64::consts::SQRT_2.ln() / drho).ceil() as usize + 1;
    let mut l = LogPolarImage::with_mesh(rho0, drho, nrho + extra, p.nphi)?;
    fill_logpolar_from_semipolar(&p, &mut l);
    let conv = logpolar_convolve_padded(&l, opts.zero_pad);
    let image = logpolar_to_cartesian_within(&conv, n_out, n_out, f64::INFINITY);
    Ok(LogPolarBackprojection { image, rho0, fovea_radius: rho0.exp(), nrho, drho })
}

/// `2π·c²·e^{2ρ₀}`: bound on the squared L2 error from cutting out the fovea,
/// where `c` bounds `|B g|` near the origin.
pub fn truncation_error_bound(rho0: f64, c: f64) -> f64 {
    2.0 * PI * c * c * (2.0 * rho0).exp()
}

/// Circular distance between two angles on a circle of circumference `period`.
fn circ_dist(a: f64, b: f64, period: f64) -> f64 {
    let d = (a - b).rem_euclid(period);
    d.min(period - d)
}

/// Backprojection assembled from angular sectors.
///
/// Each sector's object is shrunk by `a_r` and moved to `c = (1-a_r)·ξ_{θ₀}`,
/// so its projections over the sector stay away from `s = 0` and no fovea is
/// needed. Sectors are widened by `2Δθ` on each side; every projection angle
/// is weighted by one over the number of sectors that use it.
pub fn partial_backproject(g: &Sinogram, sectors: &[Sector], n_out: usize) -> Result<CartesianImage> {
    if n_out < 2 {
        return Err(TomoError::InvalidParameter(format!("n_out must be >= 2, got {n_out}")));
    }
    if sectors.is_empty() {
        return Err(TomoError::InvalidParameter("at least one sector is required".into()));
    }
    for s in sectors {
        s.validate()?;
    }
    let dtheta = g.dtheta();
    let ext = 2.0 * dtheta;
    let mut counts = vec![0usize; g.ntheta];
    for j in 0..g.ntheta {
        let th = g.theta(j);
        if !sectors.iter().any(|s| circ_dist(th, s.theta0, PI) <= s.beta + 1e-12) {
            return Err(TomoError::InvalidParameter(format!("sectors do not cover projection angle {th:.6}")));
        }
        counts[j] = sectors.iter().filter(|s| circ_dist(th, s.theta0, PI) <= s.beta + ext + 1e-12).count();
    }

    let mut total = CartesianImage::zeros(n_out, n_out);
    // Fixed sector order keeps the reduction deterministic.
    let parts: Vec<Result<CartesianImage>> =
        sectors.par_iter().map(|s| sector_backproject(g, s, ext, &counts, n_out)).collect();
    for part in parts {
        let part = part?;
        for (t, v) in total.values.iter_mut().zip(&part.values) {
            *t += v;
        }
    }
    Ok(total)
}

fn sector_backproject(g: &Sinogram, s: &Sector, ext: f64, counts: &[usize], n: usize) -> Result<CartesianImage> {
    let a = s.rescale;
    let dx = 2.0 / n as f64;
    let (cs0, sn0) = (s.theta0.cos(), s.theta0.sin());
    let c = ((1.0 - a) * cs0, (1.0 - a) * sn0);

    let s_min = (1.0 - a) * (s.beta + ext).min(PI / 2.0).cos() - a * std::f64::consts::SQRT_2;
    let rho0 = if s_min > 0.0 { s_min.ln() } else { (a * dx).ln() - 2f64.ln() };
    let drho = -(1.0 - a * g.dt()).ln();
    // outermost point of the moved image
    let r_max = c.0.hypot(c.1) + a * std::f64::consts::SQRT_2 * (1.0 + dx);
    let nrho = (((r_max.ln() - rho0) / drho).ceil() as usize + 1).max(2);
    let nphi = 2 * g.ntheta;
    let mut l = LogPolarImage::with_mesh(rho0, drho, nrho, nphi)?;

    // Data of the moved object, sampled straight onto the mesh:
    // R u(s, φ) = a·g((s - c·ξ_φ)/a, φ), on the sector's angles and their antipodes.
    l.values.par_chunks_mut(nrho).enumerate().for_each(|(k, row)| {
        let j = k % g.ntheta;
        let th = g.theta(j);
        if circ_dist(th, s.theta0, PI) > s.beta + ext + 1e-12 {
            return;
        }
        let w = a / counts[j] as f64;
        let sign = if k < g.ntheta { 1.0 } else { -1.0 };
        let (sn, cs) = th.sin_cos();
        let cxi = c.0 * cs + c.1 * sn;
        for (i, v) in row.iter_mut().enumerate() {
            let t = sign * (rho0 + (i + 1) as f64 * drho).exp();
            *v = w * g.interp(j, (t - cxi) / a);
        }
    });
    let conv = logpolar_convolve(&l);

    // B g(x) = B u(a·x + c)/a
    Ok(CartesianImage::from_fn(n, n, |x, y| {
        let (yx, yy) = (a * x + c.0, a * y + c.1);
        let r = yx.hypot(yy);
        if r == 0.0 {
            return 0.0;
        }
        conv.sample(r.ln(), yy.atan2(yx)) / a
    }))
}

/// Pixel mask helper: true outside the disk `‖x‖ ≤ radius`.
pub fn outside_disk(radius: f64) -> impl Fn(f64, f64) -> bool {
    move |x, y| x.hypot(y) > radius
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::relative_l2_masked;
    use crate::phantoms::{shepp_logan, EllipseSet, PointSourceSet};
    use crate::radon::{radon_ellipses, radon_points};
    use crate::reference::backproject_naive;

    #[test]
    fn kernel_examples() {
        let k = make_logpolar_kernel(0.05, 40, 64);
        // θ' = 0 is row nphi/2
        assert_eq!(k.at(0, 32), 1.0 / 0.05);
        // θ' = π/2 is row 48
        for d in -39..=39 {
            assert_eq!(k.at(d, 48), 0.0);
        }
    }

    #[test]
    fn kernel_support_scales_with_nrho() {
        let rho0 = -3.0;
        let a = make_logpolar_kernel(-rho0 / 100.0, 100, 128).support_count() as f64;
        let b = make_logpolar_kernel(-rho0 / 200.0, 200, 128).support_count() as f64;
        let r = b / a;
        assert!((0.5..=2.0).contains(&r), "ratio {r}");
    }

    fn direct_convolve(l: &LogPolarImage) -> Vec<f64> {
        let k = make_logpolar_kernel(l.drho, l.nrho, l.nphi);
        let mut out = vec![0.0; l.values.len()];
        for kk in 0..l.nphi {
            for i in 0..l.nrho {
                let mut acc = 0.0;
                for k2 in 0..l.nphi {
                    // kernel row for θ' = (kk - k2)Δφ wrapped into [-π, π)
                    let j = ((kk as i64 - k2 as i64) + (l.nphi / 2) as i64).rem_euclid(l.nphi as i64) as usize;
                    for i2 in 0..l.nrho {
                        acc += l.values[k2 * l.nrho + i2] * k.at(i as i64 - i2 as i64, j);
                    }
                }
                out[kk * l.nrho + i] = acc * l.drho * l.dphi() * 0.5;
            }
        }
        out
    }

    #[test]
    fn fft_convolution_matches_direct_sum() {
        let mut l = LogPolarImage::standard(-1.5, 16, 16).unwrap();
        for (i, v) in l.values.iter_mut().enumerate() {
            *v = ((i * 7919) % 13) as f64 / 13.0 - 0.4;
        }
        let fast = logpolar_convolve(&l);
        let slow = direct_convolve(&l);
        let norm = slow.iter().map(|v| v * v).sum::<f64>().sqrt();
        let err = fast.values.iter().zip(&slow).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        assert!(err <= 1e-10 * norm, "err={err} norm={norm}");
    }

    #[test]
    fn zero_sinogram_gives_zero() {
        let r = logpolar_backproject(&Sinogram::zeros(64, 90), &LogPolarOptions::default(), 64).unwrap();
        assert!(r.image.values.iter().all(|&v| v == 0.0));
        let p = partial_backproject(&Sinogram::zeros(64, 90), &default_sectors(PI / 8.0, 0.25), 64).unwrap();
        assert!(p.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn worked_mesh_size() {
        assert_eq!(compute_nrho(1024, 1024, 1024), 3546);
        let g = Sinogram::zeros(2048, 8);
        let r = logpolar_backproject(&g, &LogPolarOptions::default(), 1024).unwrap();
        assert_eq!(r.nrho, 3546);
    }

    #[test]
    fn positive_rho0_is_rejected() {
        let opts = LogPolarOptions { rho0_mode: Rho0Mode::Explicit(0.5), ..Default::default() };
        let err = logpolar_backproject(&Sinogram::zeros(32, 16), &opts, 32).unwrap_err();
        assert!(err.to_string().contains("rho0 must be negative"));
    }

    #[test]
    fn coarse_mesh_is_rejected() {
        let opts = LogPolarOptions { nrho_override: Some(4), ..Default::default() };
        assert!(logpolar_backproject(&Sinogram::zeros(64, 16), &opts, 64).is_err());
    }

    #[test]
    fn matches_naive_outside_fovea() {
        let g = radon_ellipses(&shepp_logan(), 64, 90);
        let naive = backproject_naive(&g, 64);
        let lp = logpolar_backproject(&g, &LogPolarOptions::default(), 64).unwrap();
        let rel = relative_l2_masked(&lp.image, &naive, outside_disk(2.0 * lp.fovea_radius)).unwrap();
        assert!(rel <= 8e-2, "rel={rel}");
    }

    #[test]
    fn single_sector_matches_full_engine() {
        let g = radon_ellipses(&shepp_logan(), 64, 90);
        let full = logpolar_backproject(&g, &LogPolarOptions::default(), 64).unwrap();
        let sector = Sector { theta0: PI / 2.0, beta: PI / 2.0, rescale: 0.25 };
        let part = partial_backproject(&g, &[sector], 64).unwrap();
        let rel = relative_l2_masked(&part, &full.image, outside_disk(2.0 * full.fovea_radius)).unwrap();
        assert!(rel <= 5e-2, "rel={rel}");
    }

    #[test]
    fn partial_point_source_profile() {
        let a = (0.3, 0.0);
        let g = radon_points(&PointSourceSet { points: vec![a], seed: 0 }, 256, 360);
        let img = partial_backproject(&g, &default_sectors(PI / 8.0, 0.25), 128).unwrap();
        let mut worst: f64 = 0.0;
        for ix in 0..128 {
            let x = img.x(ix);
            let d = (x - a.0).abs();
            if (0.1..=0.4).contains(&d) {
                let expect = 1.0 / d;
                worst = worst.max((img.at(ix, 64) - expect).abs() / expect);
            }
        }
        assert!(worst <= 0.1, "worst={worst}");
    }

    #[test]
    fn uncovered_angles_are_rejected() {
        let s = Sector { theta0: 0.3, beta: 0.2, rescale: 0.25 };
        assert!(partial_backproject(&Sinogram::zeros(32, 16), &[s], 32).is_err());
        let bad = Sector { theta0: 0.3, beta: 0.2, rescale: 0.6 };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn bound_values() {
        assert!((truncation_error_bound(-(1024f64).ln(), 1.0) - 2.0 * PI / 1024f64.powi(2)).abs() < 1e-18);
        assert!(truncation_error_bound(-200.0, 5.0) < 1e-150);
        let a = truncation_error_bound(-2.0, 1.3);
        let b = truncation_error_bound(-2.0 - 2f64.ln(), 1.3);
        assert!((b / a - 0.25).abs() < 1e-12);
    }

    #[test]
    fn disk_backprojection_is_linear() {
        let g1 = radon_ellipses(&EllipseSet::disk(0.5, 1.0), 64, 45);
        let g2 = radon_ellipses(&shepp_logan(), 64, 45);
        let sum = Sinogram { values: g1.values.iter().zip(&g2.values).map(|(a, b)| 2.0 * a + b).collect(), ..g1.clone() };
        let o = LogPolarOptions::default();
        let a = logpolar_backproject(&g1, &o, 64).unwrap().image;
        let b = logpolar_backproject(&g2, &o, 64).unwrap().image;
        let c = logpolar_backproject(&sum, &o, 64).unwrap().image;
        let norm = c.norm();
        let err: f64 = c.values.iter().zip(a.values.iter().zip(&b.values)).map(|(c, (a, b))| (c - 2.0 * a - b).powi(2)).sum::<f64>().sqrt();
        assert!(err <= 1e-10 * norm);
    }
}
