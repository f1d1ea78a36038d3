//! Test phantoms: ellipse sets, the circ function and random point sources.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, TomoError};
use crate::grids::CartesianImage;

const SHEPP_LOGAN_TABLE: &str = include_str!("../data/shepp_logan.txt");

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub center: (f64, f64),
    /// Semi-axes `(A, B)` along the tilted x and y directions.
    pub semi_axes: (f64, f64),
    /// Counterclockwise rotation in radians.
    pub tilt: f64,
    pub intensity: f64,
}

impl Ellipse {
    pub fn new(center: (f64, f64), semi_axes: (f64, f64), tilt: f64, intensity: f64) -> Result<Self> {
        if !(semi_axes.0 > 0.0 && semi_axes.1 > 0.0) {
            return Err(TomoError::InvalidParameter(format!(
                "ellipse semi-axes must be positive, got {:?}",
                semi_axes
            )));
        }
        Ok(Self { center, semi_axes, tilt, intensity })
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (sn, cs) = self.tilt.sin_cos();
        let (dx, dy) = (x - self.center.0, y - self.center.1);
        let u = (dx * cs + dy * sn) / self.semi_axes.0;
        let v = (-dx * sn + dy * cs) / self.semi_axes.1;
        u * u + v * v <= 1.0
    }

    pub fn area(&self) -> f64 {
        std::f64::consts::PI * self.semi_axes.0 * self.semi_axes.1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EllipseSet {
    pub ellipses: Vec<Ellipse>,
}

impl EllipseSet {
    pub fn new(ellipses: Vec<Ellipse>) -> Result<Self> {
        if ellipses.is_empty() {
            return Err(TomoError::InvalidParameter("ellipse set must not be empty".into()));
        }
        Ok(Self { ellipses })
    }

    /// Disk of the given radius centred at the origin.
    pub fn disk(radius: f64, intensity: f64) -> Self {
        Self { ellipses: vec![Ellipse { center: (0.0, 0.0), semi_axes: (radius, radius), tilt: 0.0, intensity }] }
    }

    /// Parses the plain-text table format (`cx cy A B tilt_deg intensity`).
    pub fn parse_table(text: &str) -> Result<Self> {
        let mut ellipses = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let nums: std::result::Result<Vec<f64>, _> = line.split_whitespace().map(str::parse).collect();
            let nums = nums.map_err(|e| {
                TomoError::InvalidParameter(format!("ellipse table line {}: {e}", lineno + 1))
            })?;
            if nums.len() != 6 {
                return Err(TomoError::InvalidParameter(format!(
                    "ellipse table line {}: expected 6 columns, found {}",
                    lineno + 1,
                    nums.len()
                )));
            }
            ellipses.push(Ellipse::new((nums[0], nums[1]), (nums[2], nums[3]), nums[4].to_radians(), nums[5])?);
        }
        Self::new(ellipses)
    }

    pub fn value(&self, x: f64, y: f64) -> f64 {
        self.ellipses.iter().filter(|e| e.contains(x, y)).map(|e| e.intensity).sum()
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        let ellipses = self
            .ellipses
            .iter()
            .map(|e| Ellipse { center: (e.center.0 + dx, e.center.1 + dy), ..*e })
            .collect();
        Self { ellipses }
    }

    pub fn concat(&self, other: &Self) -> Self {
        Self { ellipses: self.ellipses.iter().chain(&other.ellipses).copied().collect() }
    }

    /// `Σ ρ·π·A·B`.
    pub fn mass(&self) -> f64 {
        self.ellipses.iter().map(|e| e.intensity * e.area()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSourceSet {
    pub points: Vec<(f64, f64)>,
    pub seed: u64,
}

/// The ten-ellipse head phantom with its original intensities.
pub fn shepp_logan() -> EllipseSet {
    EllipseSet::parse_table(SHEPP_LOGAN_TABLE).expect("bundled Shepp-Logan table is valid")
}

/// Pixel value = sum of intensities of the ellipses containing the pixel node.
pub fn rasterize(set: &EllipseSet, n: usize) -> CartesianImage {
    CartesianImage::from_fn(n, n, |x, y| set.value(x, y))
}

/// Pixel value = mean of `set` over a `k × k` subgrid of the pixel cell
/// centred on its node.
pub fn rasterize_averaged(set: &EllipseSet, n: usize, k: usize) -> CartesianImage {
    let k = k.max(1);
    let h = 2.0 / n as f64 / k as f64;
    let off: Vec<f64> = (0..k).map(|i| (i as f64 - 0.5 * (k - 1) as f64) * h).collect();
    CartesianImage::from_fn(n, n, |x, y| {
        let mut acc = 0.0;
        for &u in &off {
            for &v in &off {
                acc += set.value(x + u, y + v);
            }
        }
        acc / (k * k) as f64
    })
}

/// `circ(‖x‖)`: 1 inside, 0 outside, ½ within half a pixel diagonal of the rim.
pub fn circ_phantom(n: usize) -> CartesianImage {
    let half_diag = std::f64::consts::SQRT_2 / n as f64;
    CartesianImage::from_fn(n, n, |x, y| {
        let r = x.hypot(y);
        if (r - 1.0).abs() < half_diag {
            0.5
        } else if r < 1.0 {
            1.0
        } else {
            0.0
        }
    })
}

/// `count` points drawn uniformly from `[-0.3, 0.3]²` with a ChaCha8 stream.
pub fn point_sources(count: usize, seed: u64) -> Result<PointSourceSet> {
    if count == 0 {
        return Err(TomoError::InvalidParameter("point count must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let points = (0..count)
        .map(|_| (rng.random_range(-0.3..=0.3), rng.random_range(-0.3..=0.3)))
        .collect();
    Ok(PointSourceSet { points, seed })
}
