//! Grid types and the resampling steps between them.
//!
//! Storage is always row-major with the slow axis first:
//! images are `values[iy * nx + ix]`, sinograms `values[j * nt + i]`
//! (angle outer), polar and log-polar grids `values[k * row_len + i]`
//! (angle outer).

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TomoError};

const TWO_PI: f64 = 2.0 * PI;

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(i) => Err(TomoError::InvalidGrid(format!("non-finite value at index {i}"))),
        None => Ok(()),
    }
}

fn check_len(len: usize, expected: usize) -> Result<()> {
    if len != expected {
        return Err(TomoError::DimensionMismatch {
            expected: format!("{expected} values"),
            actual: format!("{len} values"),
        });
    }
    Ok(())
}

/// Linear interpolation at fractional index `u` with zero outside the nodes.
///
/// This is the hat-function interpolant: node `i` contributes
/// `row[i]·max(0, 1 - |u - i|)`, so it fades to zero one step past either end.
#[inline]
pub fn hat_interp(row: &[f64], u: f64) -> f64 {
    if !(u > -1.0) || u >= row.len() as f64 {
        return 0.0;
    }
    let i0 = u.floor();
    let frac = u - i0;
    let i0 = i0 as i64;
    let n = row.len() as i64;
    let mut v = 0.0;
    if i0 >= 0 && i0 < n {
        v += row[i0 as usize] * (1.0 - frac);
    }
    if frac > 0.0 && i0 + 1 >= 0 && i0 + 1 < n {
        v += row[(i0 + 1) as usize] * frac;
    }
    v
}

/// Wraps an angle into `[0, 2π)`.
#[inline]
pub fn wrap_two_pi(phi: f64) -> f64 {
    let w = phi.rem_euclid(TWO_PI);
    if w >= TWO_PI {
        0.0
    } else {
        w
    }
}

/// Image node coordinate: `(i - ⌊n/2⌋)·(2/n)`, so even sizes start at -1 and
/// always contain the origin.
#[inline]
pub fn node_coord(i: usize, n: usize) -> f64 {
    (i as f64 - (n / 2) as f64) * (2.0 / n as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CartesianImage {
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<f64>,
}

impl CartesianImage {
    pub fn new(nx: usize, ny: usize, values: Vec<f64>) -> Result<Self> {
        if nx < 2 || ny < 2 {
            return Err(TomoError::InvalidGrid(format!("image must be at least 2x2, got {nx}x{ny}")));
        }
        check_len(values.len(), nx * ny)?;
        check_finite(&values)?;
        Ok(Self { nx, ny, values })
    }

    pub fn zeros(nx: usize, ny: usize) -> Self {
        assert!(nx >= 2 && ny >= 2, "image must be at least 2x2");
        Self { nx, ny, values: vec![0.0; nx * ny] }
    }

    /// Samples `f(x, y)` at every node, in parallel over rows.
    pub fn from_fn<F>(nx: usize, ny: usize, f: F) -> Self
    where
        F: Fn(f64, f64) -> f64 + Sync,
    {
        let mut img = Self::zeros(nx, ny);
        img.values.par_chunks_mut(nx).enumerate().for_each(|(iy, row)| {
            let y = node_coord(iy, ny);
            for (ix, v) in row.iter_mut().enumerate() {
                *v = f(node_coord(ix, nx), y);
            }
        });
        img
    }

    pub fn dx(&self) -> f64 {
        2.0 / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        2.0 / self.ny as f64
    }

    pub fn x(&self, ix: usize) -> f64 {
        node_coord(ix, self.nx)
    }

    pub fn y(&self, iy: usize) -> f64 {
        node_coord(iy, self.ny)
    }

    pub fn at(&self, ix: usize, iy: usize) -> f64 {
        self.values[iy * self.nx + ix]
    }

    /// Bilinear sample at a continuous point; zero outside the node lattice.
    pub fn sample(&self, x: f64, y: f64) -> f64 {
        let u = x / self.dx() + (self.nx / 2) as f64;
        let v = y / self.dy() + (self.ny / 2) as f64;
        if !(u > -1.0 && v > -1.0) || u >= self.nx as f64 || v >= self.ny as f64 {
            return 0.0;
        }
        let iv = v.floor();
        let fv = v - iv;
        let iv = iv as i64;
        let mut acc = 0.0;
        for (row, w) in [(iv, 1.0 - fv), (iv + 1, fv)] {
            if w == 0.0 || row < 0 || row >= self.ny as i64 {
                continue;
            }
            let start = row as usize * self.nx;
            acc += w * hat_interp(&self.values[start..start + self.nx], u);
        }
        acc
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// `Σ f · dx · dy`.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.dx() * self.dy()
    }

    pub fn same_shape(&self, other: &Self) -> Result<()> {
        if self.nx != other.nx || self.ny != other.ny {
            return Err(TomoError::DimensionMismatch {
                expected: format!("{}x{}", self.nx, self.ny),
                actual: format!("{}x{}", other.nx, other.ny),
            });
        }
        Ok(())
    }
}

/// Parallel-beam projections `g(t_i, θ_j)` with `t_i = -1 + i·Δt`, `θ_j = j·π/N_θ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sinogram {
    pub nt: usize,
    pub ntheta: usize,
    pub values: Vec<f64>,
}

impl Sinogram {
    pub fn new(nt: usize, ntheta: usize, values: Vec<f64>) -> Result<Self> {
        if nt < 2 || ntheta < 1 {
            return Err(TomoError::InvalidGrid(format!("sinogram needs nt >= 2 and ntheta >= 1, got {nt}x{ntheta}")));
        }
        check_len(values.len(), nt * ntheta)?;
        check_finite(&values)?;
        Ok(Self { nt, ntheta, values })
    }

    pub fn zeros(nt: usize, ntheta: usize) -> Self {
        assert!(nt >= 2 && ntheta >= 1, "sinogram needs nt >= 2 and ntheta >= 1");
        Self { nt, ntheta, values: vec![0.0; nt * ntheta] }
    }

    /// Samples `f(t, θ)` at every node, in parallel over angles.
    pub fn from_fn<F>(nt: usize, ntheta: usize, f: F) -> Self
    where
        F: Fn(f64, f64) -> f64 + Sync,
    {
        let mut g = Self::zeros(nt, ntheta);
        let dt = g.dt();
        let dtheta = g.dtheta();
        g.values.par_chunks_mut(nt).enumerate().for_each(|(j, row)| {
            let theta = j as f64 * dtheta;
            for (i, v) in row.iter_mut().enumerate() {
                *v = f(-1.0 + i as f64 * dt, theta);
            }
        });
        g
    }

    pub fn dt(&self) -> f64 {
        2.0 / self.nt as f64
    }

    pub fn dtheta(&self) -> f64 {
        PI / self.ntheta as f64
    }

    pub fn t(&self, i: usize) -> f64 {
        -1.0 + i as f64 * self.dt()
    }

    pub fn theta(&self, j: usize) -> f64 {
        j as f64 * self.dtheta()
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.values[j * self.nt..(j + 1) * self.nt]
    }

    pub fn row_mut(&mut self, j: usize) -> &mut [f64] {
        let nt = self.nt;
        &mut self.values[j * nt..(j + 1) * nt]
    }

    /// Linear interpolation along `t` in projection `j`; zero off the support.
    #[inline]
    pub fn interp(&self, j: usize, t: f64) -> f64 {
        hat_interp(self.row(j), (t + 1.0) / self.dt())
    }

    /// `Σ_i g(t_i, θ_j)·Δt`.
    pub fn angle_mass(&self, j: usize) -> f64 {
        self.row(j).iter().sum::<f64>() * self.dt()
    }

    /// `Σ g·Δt·Δθ`.
    pub fn mass(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.dt() * self.dtheta()
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scaled(&self, a: f64) -> Self {
        Self { nt: self.nt, ntheta: self.ntheta, values: self.values.iter().map(|v| v * a).collect() }
    }
}

/// Semi-polar samples `p(s_i, φ_k)` with `s_i = i/N_s` for `i = 0..=N_s` and
/// `φ_k = k·2π/N_φ`. Rows hold `N_s + 1` samples so that `s = 1` is a node.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolarSinogram {
    pub ns: usize,
    pub nphi: usize,
    pub values: Vec<f64>,
}

impl PolarSinogram {
    pub fn new(ns: usize, nphi: usize, values: Vec<f64>) -> Result<Self> {
        if ns < 1 || nphi < 2 {
            return Err(TomoError::InvalidGrid(format!("polar grid needs ns >= 1 and nphi >= 2, got {ns}x{nphi}")));
        }
        check_len(values.len(), (ns + 1) * nphi)?;
        check_finite(&values)?;
        Ok(Self { ns, nphi, values })
    }

    pub fn zeros(ns: usize, nphi: usize) -> Self {
        Self { ns, nphi, values: vec![0.0; (ns + 1) * nphi] }
    }

    pub fn row_len(&self) -> usize {
        self.ns + 1
    }

    pub fn ds(&self) -> f64 {
        1.0 / self.ns as f64
    }

    pub fn dphi(&self) -> f64 {
        TWO_PI / self.nphi as f64
    }

    pub fn s(&self, i: usize) -> f64 {
        i as f64 * self.ds()
    }

    pub fn phi(&self, k: usize) -> f64 {
        k as f64 * self.dphi()
    }

    pub fn row(&self, k: usize) -> &[f64] {
        let n = self.row_len();
        &self.values[k * n..(k + 1) * n]
    }

    /// Linear interpolation along `s` in row `k`.
    #[inline]
    pub fn interp(&self, k: usize, s: f64) -> f64 {
        hat_interp(self.row(k), s * self.ns as f64)
    }

    /// Integral of the hat interpolant over the half-plane `s ≥ 0`. The `s = 0`
    /// node carries half weight because its hat straddles both half-lines.
    pub fn mass(&self) -> f64 {
        let n = self.row_len();
        let mut acc = 0.0;
        for k in 0..self.nphi {
            let row = &self.values[k * n..(k + 1) * n];
            acc += 0.5 * row[0] + row[1..].iter().sum::<f64>();
        }
        acc * self.ds() * self.dphi()
    }
}

/// Log-polar samples on `ρ_i = ρ₀ + (i+1)·Δρ`, `φ_k = k·2π/N_φ`.
///
/// A standard mesh has `Δρ = -ρ₀/N_ρ`, so the top node sits at `ρ = 0`
/// (`s = 1`). Engines may extend `N_ρ` past that to reach the image corners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogPolarImage {
    pub rho0: f64,
    pub drho: f64,
    pub nrho: usize,
    pub nphi: usize,
    pub values: Vec<f64>,
}

impl LogPolarImage {
    pub fn standard(rho0: f64, nrho: usize, nphi: usize) -> Result<Self> {
        if !(rho0 < 0.0) {
            return Err(TomoError::InvalidParameter(format!("rho0 must be negative, got {rho0}")));
        }
        if nrho < 2 {
            return Err(TomoError::InvalidParameter(format!("nrho must be at least 2, got {nrho}")));
        }
        Self::with_mesh(rho0, -rho0 / nrho as f64, nrho, nphi)
    }

    pub fn with_mesh(rho0: f64, drho: f64, nrho: usize, nphi: usize) -> Result<Self> {
        if !(rho0 < 0.0) {
            return Err(TomoError::InvalidParameter(format!("rho0 must be negative, got {rho0}")));
        }
        if !(drho > 0.0) || nrho < 2 || nphi < 2 {
            return Err(TomoError::InvalidGrid(format!(
                "log-polar mesh needs drho > 0, nrho >= 2, nphi >= 2 (got {drho}, {nrho}, {nphi})"
            )));
        }
        Ok(Self { rho0, drho, nrho, nphi, values: vec![0.0; nrho * nphi] })
    }

    pub fn rho(&self, i: usize) -> f64 {
        self.rho0 + (i + 1) as f64 * self.drho
    }

    pub fn phi(&self, k: usize) -> f64 {
        k as f64 * self.dphi()
    }

    pub fn dphi(&self) -> f64 {
        TWO_PI / self.nphi as f64
    }

    /// Top node of the mesh.
    pub fn rho_max(&self) -> f64 {
        self.rho(self.nrho - 1)
    }

    /// Radius `e^{ρ₀}` of the disk the mesh does not resolve.
    pub fn fovea_radius(&self) -> f64 {
        self.rho0.exp()
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.values[k * self.nrho..(k + 1) * self.nrho]
    }

    /// Bilinear sample. Below `ρ₀` and above the top node the image is 0;
    /// between `ρ₀` and the first node it is held at the first node.
    pub fn sample(&self, rho: f64, phi: f64) -> f64 {
        if !(rho >= self.rho0) {
            return 0.0;
        }
        let u = (rho - self.rho0) / self.drho - 1.0;
        let top = (self.nrho - 1) as f64;
        if u > top + 1e-9 {
            return 0.0;
        }
        let u = u.clamp(0.0, top);
        let i0 = (u.floor() as usize).min(self.nrho - 1);
        let fu = u - i0 as f64;
        let i1 = (i0 + 1).min(self.nrho - 1);

        let w = wrap_two_pi(phi) / self.dphi();
        let k0 = (w.floor() as usize) % self.nphi;
        let fw = w - w.floor();
        let k1 = (k0 + 1) % self.nphi;

        let at = |k: usize, i: usize| self.values[k * self.nrho + i];
        let r0 = at(k0, i0) * (1.0 - fu) + at(k0, i1) * fu;
        let r1 = at(k1, i0) * (1.0 - fu) + at(k1, i1) * fu;
        r0 * (1.0 - fw) + r1 * fw
    }
}

/// Complex samples of a spectrum on polar rays: `σ_m = m·Δσ`,
/// `φ_k = k·2π/N_φ` (full turn), stored `values[k * nsigma + m]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarSpectrum {
    pub nsigma: usize,
    pub nphi: usize,
    pub dsigma: f64,
    pub values: Vec<Complex64>,
}

impl PolarSpectrum {
    pub fn zeros(nsigma: usize, nphi: usize, dsigma: f64) -> Result<Self> {
        if !(dsigma > 0.0) || nsigma < 2 || nphi < 2 {
            return Err(TomoError::InvalidGrid(format!(
                "polar spectrum needs dsigma > 0, nsigma >= 2, nphi >= 2 (got {dsigma}, {nsigma}, {nphi})"
            )));
        }
        Ok(Self { nsigma, nphi, dsigma, values: vec![Complex64::new(0.0, 0.0); nsigma * nphi] })
    }

    pub fn sigma_max(&self) -> f64 {
        (self.nsigma - 1) as f64 * self.dsigma
    }

    pub fn dphi(&self) -> f64 {
        TWO_PI / self.nphi as f64
    }

    /// Bilinear sample; zero beyond the last radial node.
    pub fn sample(&self, sigma: f64, phi: f64) -> Complex64 {
        let u = sigma / self.dsigma;
        if u > (self.nsigma - 1) as f64 {
            return Complex64::new(0.0, 0.0);
        }
        let m0 = (u.floor() as usize).min(self.nsigma - 2);
        let fu = u - m0 as f64;
        let w = wrap_two_pi(phi) / self.dphi();
        let k0 = (w.floor() as usize) % self.nphi;
        let fw = w - w.floor();
        let k1 = (k0 + 1) % self.nphi;
        let at = |k: usize, m: usize| self.values[k * self.nsigma + m];
        let r0 = at(k0, m0) * (1.0 - fu) + at(k0, m0 + 1) * fu;
        let r1 = at(k1, m0) * (1.0 - fu) + at(k1, m0 + 1) * fu;
        r0 * (1.0 - fw) + r1 * fw
    }
}

/// Cartesian DFT grid for an `nx × ny` image zero-padded to `mx × my`.
///
/// Bin `k` along x has angular frequency `signed(k)·Δω_x` with
/// `Δω_x = 2π/(mx·dx)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyGrid {
    pub nx: usize,
    pub ny: usize,
    pub mx: usize,
    pub my: usize,
}

impl FrequencyGrid {
    /// Power-of-two padded grid at least `z` times the image size.
    pub fn for_image(nx: usize, ny: usize, z: f64) -> Self {
        let pad = |n: usize| crate::dft::next_pow2((n as f64 * z.max(1.0)).ceil() as usize);
        Self { nx, ny, mx: pad(nx), my: pad(ny) }
    }

    pub fn domega_x(&self) -> f64 {
        TWO_PI / (self.mx as f64 * 2.0 / self.nx as f64)
    }

    pub fn domega_y(&self) -> f64 {
        TWO_PI / (self.my as f64 * 2.0 / self.ny as f64)
    }

    /// Largest radius on the grid: the corner at the Nyquist frequency.
    pub fn nyquist_radius(&self) -> f64 {
        let wx = PI * self.nx as f64 / 2.0;
        let wy = PI * self.ny as f64 / 2.0;
        wx.hypot(wy)
    }

    pub fn omega(&self, kx: usize, ky: usize) -> (f64, f64) {
        (
            crate::dft::signed_index(kx, self.mx) as f64 * self.domega_x(),
            crate::dft::signed_index(ky, self.my) as f64 * self.domega_y(),
        )
    }
}

/// Complex samples on a [`FrequencyGrid`], `values[ky * mx + kx]` in FFT order.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyImage {
    pub grid: FrequencyGrid,
    pub values: Vec<Complex64>,
}

impl FrequencyImage {
    /// Largest `|b(-ω) - conj(b(ω))|` over the grid.
    pub fn hermitian_defect(&self) -> f64 {
        let (mx, my) = (self.grid.mx, self.grid.my);
        let mut worst: f64 = 0.0;
        for ky in 0..my {
            for kx in 0..mx {
                let a = self.values[ky * mx + kx];
                let b = self.values[((my - ky) % my) * mx + (mx - kx) % mx];
                worst = worst.max((b - a.conj()).norm());
            }
        }
        worst
    }
}

/// Unfolds the sinogram onto the semi-polar half-plane `s ≥ 0`, `φ ∈ [0, 2π)`.
///
/// Requires an even `nt` so that `N_s = N_t/2` and every `s_i` lands on a ray.
pub fn sinogram_to_semipolar(g: &Sinogram) -> Result<PolarSinogram> {
    if !g.nt.is_multiple_of(2) {
        return Err(TomoError::InvalidGrid(format!("semi-polar unfolding needs an even nt, got {}", g.nt)));
    }
    let ns = g.nt / 2;
    let nphi = 2 * g.ntheta;
    let mut p = PolarSinogram::zeros(ns, nphi);
    let row_len = ns + 1;
    p.values.par_chunks_mut(row_len).enumerate().for_each(|(k, row)| {
        let (j, sign) = if k < g.ntheta { (k, 1.0) } else { (k - g.ntheta, -1.0) };
        for (i, v) in row.iter_mut().enumerate() {
            *v = g.interp(j, sign * i as f64 / ns as f64);
        }
    });
    Ok(p)
}

/// Folds a semi-polar grid back to a sinogram with `N_t = 2N_s`, `N_θ = N_φ/2`.
pub fn semipolar_to_sinogram(p: &PolarSinogram) -> Result<Sinogram> {
    if !p.nphi.is_multiple_of(2) {
        return Err(TomoError::InvalidGrid(format!("folding needs an even nphi, got {}", p.nphi)));
    }
    let ntheta = p.nphi / 2;
    let nt = 2 * p.ns;
    let mut g = Sinogram::zeros(nt, ntheta);
    let dt = g.dt();
    g.values.par_chunks_mut(nt).enumerate().for_each(|(j, row)| {
        for (i, v) in row.iter_mut().enumerate() {
            let t = -1.0 + i as f64 * dt;
            *v = if t >= 0.0 { p.interp(j, t) } else { p.interp(j + ntheta, -t) };
        }
    });
    Ok(g)
}

/// Resamples along `s = e^ρ` onto a standard log-polar mesh.
pub fn semipolar_to_logpolar(p: &PolarSinogram, rho0: f64, nrho: usize) -> Result<LogPolarImage> {
    let mut l = LogPolarImage::standard(rho0, nrho, p.nphi)?;
    fill_logpolar_from_semipolar(p, &mut l);
    Ok(l)
}

/// Fills an arbitrary mesh (same `N_φ` as `p`) from the semi-polar samples.
pub(crate) fn fill_logpolar_from_semipolar(p: &PolarSinogram, l: &mut LogPolarImage) {
    assert_eq!(p.nphi, l.nphi, "angular grids must match");
    let nrho = l.nrho;
    let (rho0, drho) = (l.rho0, l.drho);
    l.values.par_chunks_mut(nrho).enumerate().for_each(|(k, row)| {
        for (i, v) in row.iter_mut().enumerate() {
            *v = p.interp(k, (rho0 + (i + 1) as f64 * drho).exp());
        }
    });
}

/// Inverse of [`semipolar_to_logpolar`] on `s ≥ e^{ρ₀}`; smaller radii read 0.
pub fn logpolar_to_semipolar(l: &LogPolarImage, ns: usize) -> PolarSinogram {
    let mut p = PolarSinogram::zeros(ns, l.nphi);
    let row_len = ns + 1;
    p.values.par_chunks_mut(row_len).enumerate().for_each(|(k, row)| {
        let phi = l.phi(k);
        for (i, v) in row.iter_mut().enumerate().skip(1) {
            *v = l.sample((i as f64 / ns as f64).ln(), phi);
        }
    });
    p
}

/// Samples a cartesian image onto a log-polar mesh by bilinear interpolation.
pub fn cartesian_to_logpolar(img: &CartesianImage, rho0: f64, nrho: usize, nphi: usize) -> Result<LogPolarImage> {
    let mut l = LogPolarImage::standard(rho0, nrho, nphi)?;
    let dphi = l.dphi();
    let drho = l.drho;
    l.values.par_chunks_mut(nrho).enumerate().for_each(|(k, row)| {
        let (sn, cs) = (k as f64 * dphi).sin_cos();
        for (i, v) in row.iter_mut().enumerate() {
            let r = (rho0 + (i + 1) as f64 * drho).exp();
            *v = img.sample(r * cs, r * sn);
        }
    });
    Ok(l)
}

/// Samples the log-polar image at every pixel node with `‖x‖ ≤ 1`.
///
/// Pixels with `‖x‖ > 1`, with `ln‖x‖ < ρ₀`, or at the origin are 0.
pub fn logpolar_to_cartesian(l: &LogPolarImage, nx: usize, ny: usize) -> CartesianImage {
    logpolar_to_cartesian_within(l, nx, ny, 1.0)
}

/// As [`logpolar_to_cartesian`] but with a caller-chosen outer radius; used by
/// engines whose meshes extend past the unit circle to reach the corners.
pub(crate) fn logpolar_to_cartesian_within(l: &LogPolarImage, nx: usize, ny: usize, r_max: f64) -> CartesianImage {
    CartesianImage::from_fn(nx, ny, |x, y| {
        let r = x.hypot(y);
        if r == 0.0 || r > r_max {
            return 0.0;
        }
        l.sample(r.ln(), y.atan2(x))
    })
}

/// Number of log-polar radial nodes so the biggest log step matches the
/// radial step `2/N_s` and the mesh reaches down to one pixel.
pub fn compute_nrho(ns: usize, nx: usize, ny: usize) -> usize {
    let ds = 2.0 / ns as f64;
    let lo = (1.0 / nx as f64).min(1.0 / ny as f64).ln();
    let denom = (1.0 - ds).ln();
    let raw = if denom.is_finite() && denom < 0.0 { (lo / denom).ceil() } else { 0.0 };
    let raw = if raw.is_finite() && raw > 0.0 { raw as usize } else { 0 };
    raw.clamp(2, 64 * ns.max(1))
}

/// `ρ₀ = ln(min(Δx, Δy)) - ln 2`: half a pixel below the finest image step.
pub fn adaptive_rho0(nx: usize, ny: usize) -> f64 {
    (2.0 / nx as f64).min(2.0 / ny as f64).ln() - 2f64.ln()
}

/// Grids a polar spectrum onto a cartesian DFT grid (bilinear in `(σ, φ)`)
/// and symmetrizes it so that its inverse transform is real.
pub fn polar_to_cartesian_frequency(ps: &PolarSpectrum, grid: &FrequencyGrid) -> Result<FrequencyImage> {
    let required = grid.nyquist_radius();
    if ps.sigma_max() < required * (1.0 - 1e-12) {
        return Err(TomoError::InsufficientBandwidth { available: ps.sigma_max(), required });
    }
    let (mx, my) = (grid.mx, grid.my);
    let mut values = vec![Complex64::new(0.0, 0.0); mx * my];
    values.par_chunks_mut(mx).enumerate().for_each(|(ky, row)| {
        for (kx, v) in row.iter_mut().enumerate() {
            let (wx, wy) = grid.omega(kx, ky);
            *v = ps.sample(wx.hypot(wy), wy.atan2(wx));
        }
    });
    enforce_hermitian(&mut values, mx, my);
    Ok(FrequencyImage { grid: *grid, values })
}

/// Replaces `H[k]` by `(H[k] + conj H[-k])/2` over an `mx × my` FFT-ordered grid.
pub fn enforce_hermitian(values: &mut [Complex64], mx: usize, my: usize) {
    for ky in 0..my {
        let ky2 = (my - ky) % my;
        for kx in 0..mx {
            let kx2 = (mx - kx) % mx;
            let a = ky * mx + kx;
            let b = ky2 * mx + kx2;
            if b < a {
                continue;
            }
            let avg = (values[a] + values[b].conj()) * 0.5;
            values[a] = avg;
            values[b] = avg.conj();
        }
    }
}
