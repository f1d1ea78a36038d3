//! Timing and accuracy studies, written out as CSV.
//!
//! Benchmark sinograms use `N_t = N` (so `N_s = N/2`) and `N_θ = N` for an
//! `N × N` output.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bst::{bst_backproject, BstOptions};
use crate::error::{Result, TomoError};
use crate::grids::{compute_nrho, CartesianImage, Sinogram};
use crate::logpolar::{logpolar_backproject, LogPolarOptions};
use crate::metrics::{mse, relative_l2, mse_raw, relative_l2_raw};
use crate::phantoms::{rasterize_averaged, shepp_logan};
use crate::radon::{add_poisson_noise, radon_ellipses, NoiseSpec};
use crate::recon::{fbp, filter_sinogram, Engine, FilterSpec};
use crate::reference::backproject_naive;

pub const CSV_HEADER: &str = "method,N,Ntheta,z,lambda,seed,wall_ms,mse,rel_l2";
/// Extra columns of the noise study: input (sinogram) errors.
pub const NOISE_CSV_HEADER: &str = "method,N,Ntheta,z,lambda,seed,wall_ms,mse,rel_l2,input_mse,input_rel_l2";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub method: Engine,
    pub n: usize,
    pub ntheta: usize,
    pub z: f64,
    pub lambda: f64,
    pub seed: u64,
    pub wall_ms: f64,
    pub mse: f64,
    pub rel_l2: f64,
    /// Sinogram error, only set by the noise study.
    pub input: Option<(f64, f64)>,
}

pub fn method_name(m: Engine) -> &'static str {
    match m {
        Engine::Naive => "naive",
        Engine::Bst => "bst",
        Engine::Logpolar => "logpolar",
    }
}

/// CSV with [`CSV_HEADER`], or [`NOISE_CSV_HEADER`] when any record carries input errors.
pub fn to_csv(records: &[BenchRecord]) -> String {
    let noisy = records.iter().any(|r| r.input.is_some());
    let mut out = String::from(if noisy { NOISE_CSV_HEADER } else { CSV_HEADER });
    out.push('\n');
    for r in records {
        write!(
            out,
            "{},{},{},{},{},{},{:.3},{:e},{:e}",
            method_name(r.method),
            r.n,
            r.ntheta,
            r.z,
            r.lambda,
            r.seed,
            r.wall_ms,
            r.mse,
            r.rel_l2
        )
        .unwrap();
        if noisy {
            let (a, b) = r.input.unwrap_or((0.0, 0.0));
            write!(out, ",{a:e},{b:e}").unwrap();
        }
        out.push('\n');
    }
    out
}

/// Thread count from `TOMO_THREADS`, falling back to the machine's parallelism.
pub fn threads_from_env() -> usize {
    std::env::var("TOMO_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

/// Runs `f` inside a rayon pool sized by [`threads_from_env`].
pub fn with_env_threads<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    let threads = threads_from_env();
    log::info!("running with {threads} threads");
    match rayon::ThreadPoolBuilder::new().num_threads(threads).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

/// Median wall time in ms over `reps` (at least 5) runs after one warmup.
/// Returns the last result with the time.
pub fn time_median<T>(reps: usize, mut f: impl FnMut() -> Result<T>) -> Result<(T, f64)> {
    let reps = reps.max(5);
    let mut out = f()?;
    let mut times = Vec::with_capacity(reps);
    for _ in 0..reps {
        let start = Instant::now();
        out = f()?;
        times.push(start.elapsed().as_secs_f64() * 1e3);
    }
    times.sort_by(f64::total_cmp);
    let mid = times.len() / 2;
    let med = if times.len() % 2 == 1 { times[mid] } else { 0.5 * (times[mid - 1] + times[mid]) };
    Ok((out, med.max(1e-6)))
}

/// Plain backprojection with one engine at default options.
pub fn backproject(g: &Sinogram, method: Engine, n: usize, z: f64) -> Result<CartesianImage> {
    match method {
        Engine::Naive => Ok(backproject_naive(g, n)),
        Engine::Bst => bst_backproject(g, &BstOptions { zero_pad: z, ..BstOptions::new(n) }),
        Engine::Logpolar => {
            logpolar_backproject(g, &LogPolarOptions { zero_pad: z, ..Default::default() }, n).map(|r| r.image)
        }
    }
}

pub fn bench_sinogram(n: usize) -> Sinogram {
    radon_ellipses(&shepp_logan(), n, n)
}

/// Filtered reconstructions of the Shepp-Logan sinogram for `N = 256·2^k`.
/// Errors are against the rasterized phantom.
pub fn bench_scaling(ks: &[u32], methods: &[Engine], reps: usize) -> Result<Vec<BenchRecord>> {
    let mut out = Vec::new();
    for &k in ks {
        let n = 256usize << k;
        let g = bench_sinogram(n);
        let truth = rasterize_averaged(&shepp_logan(), n, 4);
        let filtered = filter_sinogram(&g, &FilterSpec::ramp())?;
        for &m in methods {
            let z = if m == Engine::Naive { 1.0 } else { 2.0 };
            let (img, wall_ms) = time_median(reps, || backproject(&filtered, m, n, z))?;
            log::info!("scaling {} N={n}: {wall_ms:.1} ms", method_name(m));
            out.push(BenchRecord {
                method: m,
                n,
                ntheta: n,
                z,
                lambda: 0.0,
                seed: 0,
                wall_ms,
                mse: mse(&img, &truth)?,
                rel_l2: relative_l2(&img, &truth)?,
                input: None,
            });
        }
    }
    Ok(out)
}

/// Fast engines across zero-padding factors. Errors are against the naive
/// backprojection of the same sinogram.
pub fn bench_zero_padding(zs: &[f64], n: usize, reps: usize) -> Result<Vec<BenchRecord>> {
    if let Some(z) = zs.iter().find(|&&z| !(z >= 1.0)) {
        return Err(TomoError::InvalidParameter(format!("zero-padding factors must be >= 1, got {z}")));
    }
    let g = bench_sinogram(n);
    let reference = backproject_naive(&g, n);
    let mut out = Vec::new();
    for &m in &[Engine::Bst, Engine::Logpolar] {
        for &z in zs {
            let (img, wall_ms) = time_median(reps, || backproject(&g, m, n, z))?;
            out.push(BenchRecord {
                method: m,
                n,
                ntheta: n,
                z,
                lambda: 0.0,
                seed: 0,
                wall_ms,
                mse: mse(&img, &reference)?,
                rel_l2: relative_l2(&img, &reference)?,
                input: None,
            });
        }
    }
    Ok(out)
}

/// Poisson noise with `photon_scale` chosen by bisection (in log scale) so the
/// sinogram's relative L2 error matches `target` within 2%.
pub fn calibrate_noise(g: &Sinogram, target: f64, seed: u64) -> Result<(Sinogram, f64)> {
    if !(target > 0.0 && target < 1.0) {
        return Err(TomoError::InvalidParameter(format!("noise level must be in (0, 1), got {target}")));
    }
    let err = |scale: f64| -> Result<(Sinogram, f64)> {
        let noisy = add_poisson_noise(g, &NoiseSpec::new(scale, seed)?);
        let e = relative_l2_raw(&noisy.values, &g.values);
        Ok((noisy, e))
    };
    // error falls roughly like scale^{-1/2}
    let (mut lo, mut hi) = (1e-2f64.ln(), 1e12f64.ln());
    let mut best = err(((lo + hi) / 2.0).exp())?;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        best = err(mid.exp())?;
        if (best.1 - target).abs() <= 0.02 * target {
            break;
        }
        if best.1 > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(best)
}

/// Regularized FBP of noisy Shepp-Logan data at each sinogram error level
/// (0 means clean). Errors are against the rasterized phantom.
pub fn bench_noise(levels: &[f64], methods: &[Engine], n: usize, lambda: f64, seed: u64) -> Result<Vec<BenchRecord>> {
    let g = radon_ellipses(&shepp_logan(), n, n);
    let truth = rasterize_averaged(&shepp_logan(), n, 4);
    let spec = FilterSpec::tikhonov(lambda);
    let mut out = Vec::new();
    for &level in levels {
        let noisy = if level == 0.0 { g.clone() } else { calibrate_noise(&g, level, seed)?.0 };
        let input = (mse_raw(&noisy.values, &g.values), relative_l2_raw(&noisy.values, &g.values));
        for &m in methods {
            let start = Instant::now();
            let img = fbp(&noisy, &spec, m, n)?;
            let wall_ms = (start.elapsed().as_secs_f64() * 1e3).max(1e-6);
            out.push(BenchRecord {
                method: m,
                n,
                ntheta: n,
                z: 2.0,
                lambda,
                seed,
                wall_ms,
                mse: mse(&img, &truth)?,
                rel_l2: relative_l2(&img, &truth)?,
                input: Some(input),
            });
        }
    }
    Ok(out)
}

/// Predicted operation counts. `Ω_BST = N_θN_s log₂N_s + N_xN_y(log₂N_x + log₂N_y) + N_s²`,
/// `Ω_Andersson = N_θN_ρ(log₂N_ρ + log₂N_θ) + 2N_ρN_θ` with `N_ρ` from
/// [`compute_nrho`], and `N_θN_xN_y` for the naive engine.
pub fn complexity_model(method: Engine, ns: usize, ntheta: usize, nx: usize, ny: usize) -> f64 {
    let (ns_f, nt_f, nx_f, ny_f) = (ns as f64, ntheta as f64, nx as f64, ny as f64);
    match method {
        Engine::Bst => nt_f * ns_f * ns_f.log2() + nx_f * ny_f * (nx_f.log2() + ny_f.log2()) + ns_f * ns_f,
        Engine::Logpolar => {
            let nrho = compute_nrho(ns, nx, ny) as f64;
            nt_f * nrho * (nrho.log2() + nt_f.log2()) + 2.0 * nrho * nt_f
        }
        Engine::Naive => nt_f * nx_f * ny_f,
    }
}

/// Least-squares slope of `log₂ wall_ms` against `log₂ N` for one method.
pub fn scaling_slope(records: &[BenchRecord], method: Engine) -> Option<f64> {
    let pts: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.method == method)
        .map(|r| ((r.n as f64).log2(), r.wall_ms.log2()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}
