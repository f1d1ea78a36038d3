//! Closed-form backprojection results used as test oracles.

use std::f64::consts::PI;

use crate::error::{Result, TomoError};
use crate::special::{bessel_i0_scaled, bessel_j1};

/// Scale between the angular-frequency Fourier transform of `B R circ` and
/// [`circ_bp_spectrum`]: `FT(B R circ)(ω) = 4π²·J₁(‖ω‖)/‖ω‖²` with the
/// transform kernel `e^{-iω·x}`.
pub const CIRC_ANGULAR_SCALE: f64 = 4.0 * PI * PI;

/// Backprojection of the projections of a unit point mass at `a`:
/// `1/‖x - a‖`.
pub fn point_source_psf(x: (f64, f64), a: (f64, f64)) -> Result<f64> {
    let d = (x.0 - a.0).hypot(x.1 - a.1);
    if d == 0.0 {
        return Err(TomoError::Domain("point-source response is singular at x = a".into()));
    }
    Ok(1.0 / d)
}

/// The alternative closed form `‖a‖/√((x·a)² + (‖a‖² - x·â)²)` with `â` the
/// point `a` rotated by +π/2. It equals `1/‖x - â‖`, i.e. its singularity sits
/// at the rotated point; kept so tests can show which form matches a discrete
/// backprojection.
pub fn point_source_psf_rotated(x: (f64, f64), a: (f64, f64)) -> Result<f64> {
    let na2 = a.0 * a.0 + a.1 * a.1;
    let ahat = (-a.1, a.0);
    let xa = x.0 * a.0 + x.1 * a.1;
    let xah = x.0 * ahat.0 + x.1 * ahat.1;
    let den = (xa * xa + (na2 - xah).powi(2)).sqrt();
    if den == 0.0 || na2 == 0.0 {
        return Err(TomoError::Domain("rotated point-source form is singular here".into()));
    }
    Ok(na2.sqrt() / den)
}

/// `J₁(‖ω‖)/‖ω‖²`, the radial profile of the backprojected circ spectrum.
pub fn circ_bp_spectrum(omega_norm: f64) -> Result<f64> {
    if omega_norm == 0.0 {
        return Err(TomoError::Domain("circ backprojection spectrum diverges at the origin".into()));
    }
    let w = omega_norm.abs();
    Ok(bessel_j1(w) / (w * w))
}

/// Projection profile of the unit-mass isotropic Gaussian with standard
/// deviation `s`: `e^{-t²/(2s²)}/(√(2π)·s)`, the same at every angle.
pub fn gaussian_projection(t: f64, s: f64) -> f64 {
    (-t * t / (2.0 * s * s)).exp() / ((2.0 * PI).sqrt() * s)
}

/// Backprojection of [`gaussian_projection`] over `θ ∈ [0, π)`:
/// `√(π/2)/s · e^{-r²/(4s²)}·I₀(r²/(4s²))`.
pub fn gaussian_backprojection(r: f64, s: f64) -> f64 {
    let q = r * r / (4.0 * s * s);
    (PI / 2.0).sqrt() / s * bessel_i0_scaled(q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn primary_psf_is_inverse_distance() {
        assert!((point_source_psf((0.3, 0.1), (0.3, 0.0)).unwrap() - 10.0).abs() < 1e-12);
        assert!(point_source_psf((0.3, 0.0), (0.3, 0.0)).is_err());
    }

    #[test]
    fn rotated_form_worked_value() {
        let v = point_source_psf_rotated((0.3, 0.0), (0.3, 0.0)).unwrap();
        assert!((v - 1.0 / (0.3 * 2f64.sqrt())).abs() < 1e-12);
        assert!((v - 2.3570226).abs() < 1e-6);
    }

    #[test]
    fn rotated_form_is_inverse_distance_to_rotated_point() {
        let a = (0.21, -0.13);
        let ahat = (-a.1, a.0);
        for &x in &[(0.5, 0.2), (-0.3, 0.4), (0.0, -0.6)] {
            let lhs = point_source_psf_rotated(x, a).unwrap();
            let rhs = point_source_psf(x, ahat).unwrap();
            assert!((lhs - rhs).abs() < 1e-12 * rhs);
        }
    }

    #[test]
    fn psf_is_rotation_equivariant() {
        let (x, a) = ((0.4, -0.1), (0.2, 0.25));
        let q = |p: (f64, f64), t: f64| (p.0 * t.cos() - p.1 * t.sin(), p.0 * t.sin() + p.1 * t.cos());
        for t in [0.3, 1.7, -2.2] {
            let r = point_source_psf(q(x, t), q(a, t)).unwrap();
            assert!((r - point_source_psf(x, a).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn circ_spectrum_small_argument() {
        let w = 1e-3;
        let v = circ_bp_spectrum(w).unwrap() * w;
        assert!((v - 0.5).abs() < 1e-4 * 0.5);
        assert!(circ_bp_spectrum(0.0).is_err());
    }

    #[test]
    fn circ_spectrum_vanishes_at_first_bessel_zero() {
        let (mut lo, mut hi) = (3.0, 4.5);
        assert!(bessel_j1(lo) > 0.0 && bessel_j1(hi) < 0.0);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if bessel_j1(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!((lo - 3.8317).abs() < 1e-4);
        assert!(circ_bp_spectrum(lo).unwrap().abs() < 1e-12);
        let w = 2.7;
        assert!((circ_bp_spectrum(w).unwrap() * w * w - bessel_j1(w)).abs() < 1e-15);
    }

    #[test]
    fn gaussian_backprojection_matches_quadrature() {
        let s = 0.25;
        for &r in &[0.0, 0.1, 0.4, 0.9] {
            let n = 20_000;
            let dth = PI / n as f64;
            let quad: f64 = (0..n).map(|k| gaussian_projection(r * ((k as f64 + 0.5) * dth).cos(), s) * dth).sum();
            assert!((quad - gaussian_backprojection(r, s)).abs() < 1e-9, "r={r}");
        }
    }
}
