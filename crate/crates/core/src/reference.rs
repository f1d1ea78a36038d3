//! Slow reference backprojectors and the discrete adjointness check.

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::grids::{hat_interp, node_coord, CartesianImage, Sinogram};
use crate::radon::radon_numeric;

/// `b(x) = Δθ·Σ_k g(x·ξ_{θ_k}, θ_k)` at every pixel node, linear in `t`.
pub fn backproject_naive(g: &Sinogram, n: usize) -> CartesianImage {
    const ROWS: usize = 8;
    let dtheta = g.dtheta();
    let trig: Vec<(f64, f64)> = (0..g.ntheta).map(|j| g.theta(j).sin_cos()).collect();
    let inv_dt = 1.0 / g.dt();
    let xs: Vec<f64> = (0..n).map(|i| node_coord(i, n)).collect();
    let mut img = CartesianImage::zeros(n, n);
    // blocks of image rows, angles outside: the sinogram row being read stays in cache
    img.values.par_chunks_mut(n * ROWS).enumerate().for_each(|(c, block)| {
        for (j, &(sn, cs)) in trig.iter().enumerate() {
            let row = g.row(j);
            for (r, line) in block.chunks_mut(n).enumerate() {
                let base = node_coord(c * ROWS + r, n) * sn + 1.0;
                for (v, &x) in line.iter_mut().zip(&xs) {
                    *v += hat_interp(row, (x * cs + base) * inv_dt);
                }
            }
        }
        block.iter_mut().for_each(|v| *v *= dtheta);
    });
    img
}

/// Sinogram value at a point `y` of the plane, read as the ray through `y`
/// perpendicular to it: `t = ‖y‖`, `θ = angle(y)` (folded into `[0, π)`).
/// Linear in `t` and in `θ` (periodic with the sign flip `g(t, θ+π) = g(-t, θ)`).
fn sample_on_plane(g: &Sinogram, y: (f64, f64)) -> f64 {
    let r = y.0.hypot(y.1);
    if r == 0.0 {
        // every direction passes through here; average over angles
        return (0..g.ntheta).map(|j| g.interp(j, 0.0)).sum::<f64>() / g.ntheta as f64;
    }
    let ang = y.1.atan2(y.0).rem_euclid(2.0 * PI);
    let u = ang / g.dtheta();
    let j0 = u.floor();
    let f = u - j0;
    let j0 = j0 as usize;
    let read = |j: usize| {
        let m = j % (2 * g.ntheta);
        if m < g.ntheta {
            g.interp(m, r)
        } else {
            g.interp(m - g.ntheta, -r)
        }
    };
    read(j0) * (1.0 - f) + read(j0 + 1) * f
}

/// Backprojection as a stack of circles through the origin:
/// `b(x) = ½·(2π/m)·Σ_k g_c(x/2 + (‖x‖/2)·ξ_k)`.
pub fn backproject_circles(g: &Sinogram, n: usize, m: usize) -> CartesianImage {
    let m = m.max(16);
    let trig: Vec<(f64, f64)> = (0..m).map(|k| (2.0 * PI * k as f64 / m as f64).sin_cos()).collect();
    let w = 0.5 * 2.0 * PI / m as f64;
    CartesianImage::from_fn(n, n, |x, y| {
        let half_r = 0.5 * x.hypot(y);
        let mut acc = 0.0;
        for &(sn, cs) in &trig {
            acc += sample_on_plane(g, (0.5 * x + half_r * cs, 0.5 * y + half_r * sn));
        }
        acc * w
    })
}

/// Default circle quadrature count, `4·N_θ`.
pub fn default_circle_nodes(g: &Sinogram) -> usize {
    (4 * g.ntheta).max(16)
}

/// `|⟨R f, g⟩ - ⟨f, B g⟩| / (‖f‖·‖g‖)` with Riemann-sum inner products,
/// `R` the midpoint ray-sum projector and `B` the naive backprojector.
pub fn adjointness_gap(f: &CartesianImage, g: &Sinogram) -> f64 {
    let step = f.dx().min(f.dy()) / 2.0;
    let rf = radon_numeric(f, g.nt, g.ntheta, step).expect("step is within the allowed range");
    let bg = backproject_naive(g, f.nx);
    let cell_v = g.dt() * g.dtheta();
    let cell_u = f.dx() * f.dy();
    let lhs: f64 = rf.values.iter().zip(&g.values).map(|(a, b)| a * b).sum::<f64>() * cell_v;
    let rhs: f64 = f.values.iter().zip(&bg.values).map(|(a, b)| a * b).sum::<f64>() * cell_u;
    let nf = (f.values.iter().map(|v| v * v).sum::<f64>() * cell_u).sqrt();
    let ng = (g.values.iter().map(|v| v * v).sum::<f64>() * cell_v).sqrt();
    if nf == 0.0 || ng == 0.0 {
        return 0.0;
    }
    (lhs - rhs).abs() / (nf * ng)
}

/// Pixel-node coordinates of an `n × n` image, exposed for tests that build
/// masks without an image at hand.
pub fn pixel_coord(i: usize, n: usize) -> f64 {
    node_coord(i, n)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::relative_l2;
    use crate::phantoms::shepp_logan;
    use crate::radon::radon_ellipses;

    #[test]
    fn constant_sinogram_gives_pi_c() {
        let c = 1.7;
        let g = Sinogram::from_fn(64, 45, |_, _| c);
        let b = backproject_naive(&g, 64);
        for iy in 0..64 {
            for ix in 0..64 {
                if b.x(ix).hypot(b.y(iy)) <= 1.0 - g.dt() {
                    assert!((b.at(ix, iy) - PI * c).abs() < 1e-10);
                }
            }
        }
        let bc = backproject_circles(&g, 32, 180);
        for iy in 0..32 {
            for ix in 0..32 {
                if bc.x(ix).hypot(bc.y(iy)) <= 1.0 - 2.0 * g.dt() {
                    assert!((bc.at(ix, iy) - PI * c).abs() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn zero_in_zero_out() {
        let g = Sinogram::zeros(32, 20);
        assert!(backproject_naive(&g, 16).values.iter().all(|&v| v == 0.0));
        assert!(backproject_circles(&g, 16, 80).values.iter().all(|&v| v == 0.0));
        assert_eq!(adjointness_gap(&CartesianImage::zeros(16, 16), &g), 0.0);
    }

    #[test]
    fn circles_agree_with_naive_on_shepp_logan() {
        let g = radon_ellipses(&shepp_logan(), 128, 180);
        let a = backproject_naive(&g, 128);
        let b = backproject_circles(&g, 128, default_circle_nodes(&g));
        let rel = relative_l2(&b, &a).unwrap();
        assert!(rel <= 3e-2, "rel={rel}");
    }

    #[test]
    fn nonnegative_input_gives_nonnegative_output() {
        let g = radon_ellipses(&shepp_logan(), 64, 30);
        let pos = Sinogram { values: g.values.iter().map(|v| v.abs()).collect(), ..g };
        assert!(backproject_naive(&pos, 32).values.iter().all(|&v| v >= 0.0));
    }
}
