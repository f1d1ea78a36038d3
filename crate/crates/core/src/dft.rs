//! Discrete Fourier transforms.
//!
//! Forward transforms use the kernel `e^{-2πi·jk/N}` with no scaling; inverse
//! transforms apply `1/N` (or `1/(nx·ny)` in 2D). The heavy lifting is done by
//! `rustfft`; plans are cached per thread.

use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Forward,
    Inverse,
}

type PlanCache = (FftPlanner<f64>, HashMap<(usize, Direction), Arc<dyn Fft<f64>>>);

thread_local! {
    static PLANS: RefCell<PlanCache> =
        RefCell::new((FftPlanner::new(), HashMap::new()));
}

/// Returns a (cached) plan for the given length and direction.
pub fn plan(len: usize, dir: Direction) -> Arc<dyn Fft<f64>> {
    PLANS.with(|cell| {
        let (planner, cache) = &mut *cell.borrow_mut();
        cache
            .entry((len, dir))
            .or_insert_with(|| match dir {
                Direction::Forward => planner.plan_fft_forward(len),
                Direction::Inverse => planner.plan_fft_inverse(len),
            })
            .clone()
    })
}

pub fn dft_1d(signal: &[Complex64], dir: Direction) -> Vec<Complex64> {
    let mut out = signal.to_vec();
    if out.is_empty() {
        return out;
    }
    transform_rows(&mut out, signal.len(), dir);
    if dir == Direction::Inverse {
        scale(&mut out, 1.0 / signal.len() as f64);
    }
    out
}

/// 2D transform of a row-major `ny × nx` array (`data[iy * nx + ix]`).
pub fn dft_2d(data: &[Complex64], nx: usize, ny: usize, dir: Direction) -> Vec<Complex64> {
    assert_eq!(data.len(), nx * ny, "dft_2d: buffer length does not match nx*ny");
    let mut out = data.to_vec();
    fft2_inplace(&mut out, nx, ny, dir);
    if dir == Direction::Inverse {
        scale(&mut out, 1.0 / (nx * ny) as f64);
    }
    out
}

/// Unnormalized in-place transform of every contiguous row of length `row_len`.
pub fn transform_rows(buf: &mut [Complex64], row_len: usize, dir: Direction) {
    if row_len == 0 || buf.is_empty() {
        return;
    }
    let fft = plan(row_len, dir);
    let scratch_len = fft.get_inplace_scratch_len();
    let rows_per_chunk = (buf.len() / row_len / rayon::current_num_threads().max(1)).max(1);
    buf.par_chunks_mut(row_len * rows_per_chunk).for_each(|chunk| {
        let mut scratch = vec![Complex64::new(0.0, 0.0); scratch_len];
        fft.process_with_scratch(chunk, &mut scratch);
    });
}

/// Unnormalized in-place 2D transform.
pub fn fft2_inplace(buf: &mut [Complex64], nx: usize, ny: usize, dir: Direction) {
    transform_rows(buf, nx, dir);
    let mut t = transpose(buf, nx, ny);
    transform_rows(&mut t, ny, dir);
    let back = transpose(&t, ny, nx);
    buf.copy_from_slice(&back);
}

/// Transposes a row-major `rows × cols` array (`cols` = row length).
pub fn transpose<T: Copy + Send + Sync>(src: &[T], cols: usize, rows: usize) -> Vec<T> {
    debug_assert_eq!(src.len(), cols * rows);
    let mut dst = Vec::with_capacity(src.len());
    for c in 0..cols {
        dst.extend((0..rows).map(|r| src[r * cols + c]));
    }
    dst
}

pub fn scale(buf: &mut [Complex64], factor: f64) {
    buf.iter_mut().for_each(|v| *v *= factor);
}

pub fn next_pow2(n: usize) -> usize {
    n.max(1).next_power_of_two()
}

/// Signed frequency index of FFT bin `k` for a length-`n` transform.
pub fn signed_index(k: usize, n: usize) -> i64 {
    if k <= n / 2 {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn naive_dft(x: &[Complex64]) -> Vec<Complex64> {
        let n = x.len();
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(j, v)| {
                        let ang = -2.0 * std::f64::consts::PI * (j * k) as f64 / n as f64;
                        v * Complex64::from_polar(1.0, ang)
                    })
                    .sum()
            })
            .collect()
    }

    #[test]
    fn delta_transforms_to_ones() {
        let mut x = vec![c(0.0); 16];
        x[0] = c(1.0);
        for v in dft_1d(&x, Direction::Forward) {
            assert!((v - c(1.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn constant_has_only_dc() {
        let x = vec![c(2.5); 32];
        let y = dft_1d(&x, Direction::Forward);
        assert!((y[0] - c(80.0)).norm() < 1e-12);
        assert!(y[1..].iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn matches_direct_sum_for_odd_length() {
        let x: Vec<_> = (0..15).map(|i| Complex64::new((i as f64).sin(), (i * i) as f64 * 0.01)).collect();
        let fast = dft_1d(&x, Direction::Forward);
        let slow = naive_dft(&x);
        for (a, b) in fast.iter().zip(&slow) {
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn two_d_round_trip() {
        let (nx, ny) = (8, 6);
        let x: Vec<_> = (0..nx * ny).map(|i| Complex64::new((i as f64 * 0.37).cos(), 0.1 * i as f64)).collect();
        let y = dft_2d(&x, nx, ny, Direction::Forward);
        let z = dft_2d(&y, nx, ny, Direction::Inverse);
        for (a, b) in x.iter().zip(&z) {
            assert!((a - b).norm() < 1e-12);
        }
        // separable check: 2D DC equals total sum
        let total: Complex64 = x.iter().sum();
        assert!((y[0] - total).norm() < 1e-10);
    }

    #[test]
    fn signed_indices() {
        assert_eq!(signed_index(0, 8), 0);
        assert_eq!(signed_index(4, 8), 4);
        assert_eq!(signed_index(5, 8), -3);
        assert_eq!(signed_index(7, 8), -1);
    }
}
