//! Gaussian (center/surround) and von Mises (border ownership) kernels.
//!
//! Kernels are odd- or even-sized square grids. Coordinates are measured
//! from the geometric center `c = (size - 1) / 2`, so even sizes are
//! centered between pixels and every kernel is symmetric under the grid's
//! own reflections. All constructed kernels have unit L1 mass.

use std::f64::consts::PI;

use super::bessel::bessel_i0;
use crate::error::{Error, Result};
use crate::grid::{Geometry, Grid};

/// Isotropic Gaussian of standard deviation `sigma` on a `size x size` grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianKernelSpec {
    pub size: usize,
    pub sigma: f64,
}

impl GaussianKernelSpec {
    pub fn new(size: usize, sigma: f64) -> Self {
        Self { size, sigma }
    }

    pub fn validate(&self) -> Result<()> {
        if self.size == 0 {
            return Err(Error::invalid("size", "kernel size must be >= 1"));
        }
        if !(self.sigma > 0.0) || !self.sigma.is_finite() {
            return Err(Error::invalid("sigma", format!("{} is not a positive finite value", self.sigma)));
        }
        Ok(())
    }
}

/// Ring-shaped orientation-tuned kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VonMisesKernelSpec {
    /// Ring radius `R0` in pixels.
    pub radius: f64,
    /// Concentration `rho`.
    pub rho: f64,
    /// Orientation in radians, measured counter-clockwise from +x with +y up.
    pub theta: f64,
    /// Pixels per side; `None` means `2 * ceil(R0) + 1`.
    pub size: Option<usize>,
}

impl VonMisesKernelSpec {
    pub fn new(radius: f64, rho: f64, theta: f64) -> Self {
        Self {
            radius,
            rho,
            theta,
            size: None,
        }
    }

    pub fn side(&self) -> usize {
        self.size
            .unwrap_or(2 * self.radius.ceil() as usize + 1)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(Error::invalid("radius", "R0 must be positive"));
        }
        if !(self.rho >= 0.0) || !self.rho.is_finite() {
            return Err(Error::invalid("rho", "concentration must be >= 0"));
        }
        if (self.side() as f64) < 2.0 * self.radius + 1.0 {
            return Err(Error::invalid("size", format!("{} px cannot hold a ring of radius {}", self.side(), self.radius)));
        }
        Ok(())
    }
}

fn center(size: usize) -> f64 {
    (size as f64 - 1.0) / 2.0
}

fn normalize(mut g: Grid<f64>) -> Grid<f64> {
    let mass: f64 = g.iter().map(|v| v.abs()).sum();
    if mass > 0.0 {
        g.scale(1.0 / mass);
    }
    g
}

/// Unnormalized Gaussian weights, `exp(-r^2 / (2 sigma^2))`.
pub fn gaussian_weights(spec: &GaussianKernelSpec) -> Result<Grid<f64>> {
    spec.validate()?;
    let c = center(spec.size);
    let two_s2 = 2.0 * spec.sigma * spec.sigma;
    Ok(Grid::from_fn(Geometry::new(spec.size, spec.size), |i, j| {
        let (dx, dy) = (i as f64 - c, j as f64 - c);
        (-(dx * dx + dy * dy) / two_s2).exp()
    }))
}

/// L1-normalized Gaussian kernel.
pub fn gaussian_kernel(spec: &GaussianKernelSpec) -> Result<Grid<f64>> {
    Ok(normalize(gaussian_weights(spec)?))
}

/// Unnormalized von Mises weights:
/// `exp(rho R0 cos(atan2(-y, x) - theta)) / I0(|sqrt(x^2 + y^2) - R0|)`,
/// with `x` the column offset and `y` the row offset (rows grow downward).
/// At an odd-sized kernel's center pixel the direction term is replaced by
/// its mean over all directions, `I0(rho R0)`.
pub fn von_mises_weights(spec: &VonMisesKernelSpec) -> Result<Grid<f64>> {
    spec.validate()?;
    let size = spec.side();
    let c = center(size);
    let gain = spec.rho * spec.radius;
    Ok(Grid::from_fn(Geometry::new(size, size), |i, j| {
        let (x, y) = (i as f64 - c, j as f64 - c);
        let r = (x * x + y * y).sqrt();
        // direction is undefined at the origin; use the angular mean of the numerator
        let numerator = if r == 0.0 {
            bessel_i0(gain)
        } else {
            (gain * ((-y).atan2(x) - spec.theta).cos()).exp()
        };
        numerator / bessel_i0((r - spec.radius).abs())
    }))
}

/// L1-normalized von Mises kernel.
pub fn von_mises_kernel(spec: &VonMisesKernelSpec) -> Result<Grid<f64>> {
    Ok(normalize(von_mises_weights(spec)?))
}

/// Formats a kernel as plain text: one row per line, 9 significant digits.
pub fn dump_kernel(kernel: &Grid<f64>) -> String {
    let mut out = String::new();
    for y in 0..kernel.height() {
        let row: Vec<String> = kernel.row(y).iter().map(|v| format!("{v:.8e}")).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

/// Parses the output of [`dump_kernel`].
pub fn parse_kernel(text: &str) -> Result<Grid<f64>> {
    let rows: Vec<Vec<f64>> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            l.split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| Error::Format(format!("{t:?}: {e}"))))
                .collect()
        })
        .collect::<Result<_>>()?;
    let h = rows.len();
    let w = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|r| r.len() != w) {
        return Err(Error::Format("ragged kernel rows".into()));
    }
    Grid::from_vec(Geometry::new(w, h), rows.into_iter().flatten().collect())
}

/// The four base orientations used by the border-ownership stage.
pub fn base_orientations() -> [f64; 4] {
    [0.0, PI / 4.0, PI / 2.0, 3.0 * PI / 4.0]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn assert_close(a: &Grid<f64>, b: &Grid<f64>, tol: f64) {
        assert_eq!(a.geometry(), b.geometry());
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() <= tol, "{x} vs {y}");
        }
    }

    #[test]
    fn flat_limit() {
        let k = gaussian_kernel(&GaussianKernelSpec::new(8, 1e6)).unwrap();
        for v in k.iter() {
            assert!((v - 1.0 / 64.0).abs() < 1e-9);
        }
    }

    #[test]
    fn center_to_neighbour_ratio() {
        // odd size puts a pixel exactly on the mean
        let k = gaussian_kernel(&GaussianKernelSpec::new(9, 1.0)).unwrap();
        let ratio = k[(4, 4)] / k[(5, 4)];
        assert!((ratio - 0.5f64.exp()).abs() < 1e-12);
        assert!((ratio - 1.648_721_270_700_128_1).abs() < 1e-12);
        // size 8: pixels at r^2 = 0.5 and 2.5
        let k = gaussian_kernel(&GaussianKernelSpec::new(8, 1.0)).unwrap();
        assert!((k[(3, 3)] / k[(2, 3)] - 1f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn gaussian_is_isotropic_on_grid() {
        for (size, sigma) in [(8, 1.0), (8, 4.0), (16, 8.0), (5, 0.7)] {
            let k = gaussian_kernel(&GaussianKernelSpec::new(size, sigma)).unwrap();
            assert_close(&k, &k.rotate_ccw(), 1e-15);
            assert_close(&k, &k.flip_horizontal(), 1e-15);
            assert!((k.sum() - 1.0).abs() < 1e-12);
            assert!(k.iter().all(|v| *v >= 0.0));
        }
    }

    #[test]
    fn invalid_specs() {
        assert!(gaussian_kernel(&GaussianKernelSpec::new(0, 1.0)).is_err());
        assert!(gaussian_kernel(&GaussianKernelSpec::new(3, 0.0)).is_err());
        let mut vm = VonMisesKernelSpec::new(8.0, 0.2, 0.0);
        vm.size = Some(9);
        assert!(von_mises_kernel(&vm).is_err());
    }

    #[test]
    fn von_mises_opposite_orientation_is_point_reflection() {
        for theta in base_orientations() {
            let a = von_mises_kernel(&VonMisesKernelSpec::new(8.0, 0.2, theta)).unwrap();
            let b = von_mises_kernel(&VonMisesKernelSpec::new(8.0, 0.2, theta + PI)).unwrap();
            let reflected = a.rotate_ccw().rotate_ccw();
            assert_close(&b, &reflected, 1e-12);
        }
    }

    #[test]
    fn von_mises_peak_on_ring() {
        for theta in base_orientations().into_iter().chain([PI, 1.25 * PI, 1.5 * PI, 1.75 * PI]) {
            let w = von_mises_weights(&VonMisesKernelSpec::new(8.0, 0.2, theta)).unwrap();
            // dense search over the grid
            let (mut best, mut at) = (f64::MIN, (0, 0));
            for (x, y, v) in w.indexed_iter() {
                if *v > best {
                    best = *v;
                    at = (x, y);
                }
            }
            let (dx, dy) = (at.0 as f64 - 8.0, at.1 as f64 - 8.0);
            let r = (dx * dx + dy * dy).sqrt();
            assert!((r - 8.0).abs() <= 0.5, "theta {theta}: peak at r = {r}");
            // peak lies in direction theta (y up)
            let dir = (-dy).atan2(dx);
            let diff = (dir - theta).sin().atan2((dir - theta).cos()).abs();
            assert!(diff < 0.2, "theta {theta}: peak direction {dir}");
        }
    }

    #[test]
    fn von_mises_rotation_by_quarter_turn() {
        for theta in [0.0, PI / 4.0] {
            let a = von_mises_kernel(&VonMisesKernelSpec::new(8.0, 0.2, theta)).unwrap();
            let b = von_mises_kernel(&VonMisesKernelSpec::new(8.0, 0.2, theta + PI / 2.0)).unwrap();
            assert_close(&a.rotate_ccw(), &b, 1e-6);
        }
    }

    #[test]
    fn von_mises_normalized_and_finite() {
        let k = von_mises_kernel(&VonMisesKernelSpec::new(8.0, 0.2, 0.3)).unwrap();
        assert_eq!(k.geometry(), Geometry::new(17, 17));
        assert!((k.sum() - 1.0).abs() < 1e-12);
        assert!(k.iter().all(|v| v.is_finite() && *v >= 0.0));
    }

    #[test]
    fn dump_has_nine_significant_digits() {
        let k = gaussian_kernel(&GaussianKernelSpec::new(3, 1.0)).unwrap();
        let text = dump_kernel(&k);
        let first = text.split_whitespace().next().unwrap();
        let mantissa = first.split('e').next().unwrap().replace('.', "");
        assert_eq!(mantissa.len(), 9);
        let back = parse_kernel(&text).unwrap();
        assert_close(&back, &k, 1e-9);
    }
}
