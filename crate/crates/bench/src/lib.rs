//! Fixtures shared by the criterion benchmarks.

use tomo_core::phantoms::shepp_logan;
use tomo_core::radon::radon_ellipses;
use tomo_core::Sinogram;

/// Shepp-Logan sinogram for an `n × n` reconstruction: `N_t = n`, `N_θ = n`.
pub fn sinogram(n: usize) -> Sinogram {
    radon_ellipses(&shepp_logan(), n, n)
}
