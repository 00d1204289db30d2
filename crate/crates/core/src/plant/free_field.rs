//! Frequency-domain free-field monopole model for global (radiated power)
//! reduction studies.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::geometry::{distance, Position};

/// A point source with complex strength, radiating `q * exp(-jkr) / r`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Monopole {
    pub position: Position,
    pub strength: Complex64,
}

/// Complex pressure at `point` for wavenumber `k`.
pub fn pressure(sources: &[Monopole], point: &Position, k: f64) -> Complex64 {
    sources
        .iter()
        .map(|s| {
            let r = distance(&s.position, point).max(1e-9);
            s.strength * Complex64::from_polar(1.0 / r, -k * r)
        })
        .sum()
}

/// Quadrature grid on a sphere: midpoint rule in `cos(theta)` and `phi`.
#[derive(Debug, Clone)]
pub struct SphereGrid {
    pub points: Vec<Position>,
    pub weights: Vec<f64>,
}

impl SphereGrid {
    pub fn new(center: Position, radius: f64, n_polar: usize, n_azimuth: usize) -> Self {
        let du = 2.0 / n_polar as f64;
        let dphi = 2.0 * PI / n_azimuth as f64;
        let w = radius * radius * du * dphi;
        let mut points = Vec::with_capacity(n_polar * n_azimuth);
        for i in 0..n_polar {
            let u = -1.0 + (i as f64 + 0.5) * du;
            let s = (1.0 - u * u).sqrt();
            for j in 0..n_azimuth {
                let phi = (j as f64 + 0.5) * dphi;
                points.push([
                    center[0] + radius * s * phi.cos(),
                    center[1] + radius * s * phi.sin(),
                    center[2] + radius * u,
                ]);
            }
        }
        let weights = vec![w; points.len()];
        Self { points, weights }
    }

    /// `sum w |p|^2`, proportional to radiated power in the far field.
    pub fn integrated_power(&self, sources: &[Monopole], k: f64) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(p, w)| w * pressure(sources, p, k).norm_sqr())
            .sum()
    }
}

/// Least-squares strength of a secondary monopole minimizing the grid
/// integrated power of `primary` plus the secondary.
pub fn optimal_secondary_strength(
    primary: &[Monopole],
    secondary_at: Position,
    k: f64,
    grid: &SphereGrid,
) -> Complex64 {
    let unit = [Monopole {
        position: secondary_at,
        strength: Complex64::new(1.0, 0.0),
    }];
    let mut num = Complex64::new(0.0, 0.0);
    let mut den = 0.0;
    for (p, &w) in grid.points.iter().zip(&grid.weights) {
        let a = pressure(primary, p, k);
        let b = pressure(&unit, p, k);
        num += w * b.conj() * a;
        den += w * b.norm_sqr();
    }
    -num / den
}

/// Closed-form total power change (dB) for a primary monopole and one
/// optimally driven secondary monopole separated by `d_over_lambda`
/// wavelengths: `10 log10(1 - sinc^2(kd))`.
pub fn global_power_reduction(d_over_lambda: f64) -> f64 {
    let kd = 2.0 * PI * d_over_lambda;
    let sinc = if kd == 0.0 { 1.0 } else { kd.sin() / kd };
    10.0 * (1.0 - sinc * sinc).log10()
}

/// Grid-integrated counterpart of [`global_power_reduction`]: places the pair
/// in the simulated free field, solves for the optimal secondary strength by
/// least squares on a far-field sphere and returns the power change in dB.
pub fn simulated_global_reduction(d_over_lambda: f64, wavelength: f64) -> f64 {
    let k = 2.0 * PI / wavelength;
    let d = d_over_lambda * wavelength;
    // off-axis separation so the grid is not aligned with the pair
    let dir = [1.0 / 3f64.sqrt(); 3];
    let primary = [Monopole {
        position: [0.0; 3],
        strength: Complex64::new(1.0, 0.0),
    }];
    let secondary_at = [dir[0] * d, dir[1] * d, dir[2] * d];
    let grid = SphereGrid::new([0.0; 3], 100.0 * wavelength, 400, 96);
    let q = optimal_secondary_strength(&primary, secondary_at, k, &grid);
    let off = grid.integrated_power(&primary, k);
    let on = grid.integrated_power(
        &[
            primary[0],
            Monopole {
                position: secondary_at,
                strength: q,
            },
        ],
        k,
    );
    10.0 * (on / off).log10()
}
