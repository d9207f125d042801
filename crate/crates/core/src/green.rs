//! Perforated ball domains and the regular part of the Dirichlet Green
//! function of a ball.
//!
//! Sign convention: `G(x, y) = c_N |x − y|^{2−N} − H(x, y)` with `H ≥ 0`, so
//! that `G` vanishes on the boundary. Two normalizations are exposed:
//!
//! * [`green_regular_part`] / [`robin_function`] return `H` itself, which
//!   carries the constant `c_N = 1 / (N (N−2) ω_N)`;
//! * [`kernel_regular_part`] / [`kernel_robin`] return `H / c_N`, the
//!   harmonic function matching the bare kernel `|x − y|^{2−N}` on the
//!   boundary. This is the quantity the projected bubble sees
//!   (`P U − U ≈ −α_N δ^{(N−2)/2} H/c_N` away from the holes) and therefore
//!   the one entering the reduced energy.

use serde::{Deserialize, Serialize};

use crate::bubbles::DimensionConstants;
use crate::error::{LabError, Result};

/// Boundary tolerance, relative to the radius.
const BOUNDARY_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: Vec<f64>,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: Vec<f64>, radius: f64) -> Result<Self> {
        if !(radius > 0.0) || !radius.is_finite() {
            return Err(LabError::InvalidParameter(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        Ok(Self { center, radius })
    }

    pub fn unit(n: usize) -> Self {
        Self {
            center: vec![0.0; n],
            radius: 1.0,
        }
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn distance_from_center(&self, x: &[f64]) -> f64 {
        x.iter()
            .zip(&self.center)
            .map(|(a, c)| (a - c) * (a - c))
            .sum::<f64>()
            .sqrt()
    }

    /// Distance from an interior point to the boundary sphere.
    pub fn distance_to_boundary(&self, x: &[f64]) -> f64 {
        self.radius - self.distance_from_center(x)
    }

    fn check_closed(&self, x: &[f64], what: &str) -> Result<()> {
        if x.len() != self.dim() {
            return Err(LabError::DimensionMismatch(format!(
                "{what} has {} coordinates, the ball lives in R^{}",
                x.len(),
                self.dim()
            )));
        }
        if self.distance_from_center(x) > self.radius * (1.0 + BOUNDARY_SLACK) {
            return Err(LabError::OutsideDomain(format!(
                "{what} at distance {} from the center of a ball of radius {}",
                self.distance_from_center(x),
                self.radius
            )));
        }
        Ok(())
    }

    fn check_interior(&self, x: &[f64], what: &str) -> Result<()> {
        self.check_closed(x, what)?;
        if self.distance_from_center(x) >= self.radius * (1.0 - BOUNDARY_SLACK) {
            return Err(LabError::OutsideDomain(format!(
                "{what} lies on the boundary"
            )));
        }
        Ok(())
    }
}

/// A hole `B_{r ε}(a)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoleSpec {
    pub center: Vec<f64>,
    pub radius_coeff: f64,
}

/// `Ω_ε = Ω \ ⋃ B_{r_i ε}(a_i)` with `Ω` a ball.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerforatedDomain {
    pub ambient: Ball,
    pub holes: Vec<HoleSpec>,
    pub epsilon: f64,
}

impl PerforatedDomain {
    pub fn new(ambient: Ball, holes: Vec<HoleSpec>, epsilon: f64) -> Result<Self> {
        let dom = Self {
            ambient,
            holes,
            epsilon,
        };
        dom.validate()?;
        Ok(dom)
    }

    pub fn hole_radius(&self, i: usize) -> f64 {
        self.holes[i].radius_coeff * self.epsilon
    }

    /// Checks every geometric invariant and reports the first violation.
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(LabError::InvalidParameter(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        for (i, hole) in self.holes.iter().enumerate() {
            if !(hole.radius_coeff > 0.0) {
                return Err(LabError::InvalidParameter(format!(
                    "hole {i}: radius coefficient must be positive"
                )));
            }
            self.ambient
                .check_interior(&hole.center, &format!("hole {i} center"))?;
            let r = self.hole_radius(i);
            let gap = self.ambient.distance_to_boundary(&hole.center);
            if r >= gap / 2.0 {
                return Err(LabError::InvalidParameter(format!(
                    "hole {i}: radius {r} is not below half the distance {gap} to the boundary"
                )));
            }
        }
        for i in 0..self.holes.len() {
            for j in (i + 1)..self.holes.len() {
                let d: f64 = self.holes[i]
                    .center
                    .iter()
                    .zip(&self.holes[j].center)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                if d <= self.hole_radius(i) + self.hole_radius(j) {
                    return Err(LabError::InvalidParameter(format!(
                        "holes {i} and {j} overlap at epsilon = {}",
                        self.epsilon
                    )));
                }
            }
        }
        Ok(())
    }
}

/// `H / c_N` for the ball via the Kelvin image, written in the symmetric form
/// `(|x'|²|y'|²/R² − 2 x'·y' + R²)^{(2−N)/2}` with `x' = x − c`, `y' = y − c`.
pub fn kernel_regular_part(ball: &Ball, x: &[f64], y: &[f64]) -> Result<f64> {
    ball.check_closed(x, "x")?;
    ball.check_closed(y, "y")?;
    Ok(kernel_regular_part_unchecked(ball, x, y))
}

pub(crate) fn kernel_regular_part_unchecked(ball: &Ball, x: &[f64], y: &[f64]) -> f64 {
    let n = ball.dim() as f64;
    let r2 = ball.radius * ball.radius;
    let mut xx = 0.0;
    let mut yy = 0.0;
    let mut xy = 0.0;
    for ((a, b), c) in x.iter().zip(y).zip(&ball.center) {
        let xs = a - c;
        let ys = b - c;
        xx += xs * xs;
        yy += ys * ys;
        xy += xs * ys;
    }
    let q = xx * yy / r2 - 2.0 * xy + r2;
    q.powf((2.0 - n) / 2.0)
}

/// Regular part `H(x, y)` of the Green function of the ball.
pub fn green_regular_part(
    ball: &Ball,
    dims: &DimensionConstants,
    x: &[f64],
    y: &[f64],
) -> Result<f64> {
    if ball.dim() != dims.n {
        return Err(LabError::DimensionMismatch(format!(
            "ball in R^{} with N = {}",
            ball.dim(),
            dims.n
        )));
    }
    Ok(dims.green_constant() * kernel_regular_part(ball, x, y)?)
}

/// `H(a, a) / c_N = (R / (R² − |a − c|²))^{N−2}`.
pub fn kernel_robin(ball: &Ball, a: &[f64]) -> Result<f64> {
    ball.check_interior(a, "a")?;
    let n = ball.dim() as f64;
    let s = ball.distance_from_center(a);
    let r = ball.radius;
    Ok((r / (r * r - s * s)).powf(n - 2.0))
}

/// Robin function `H(a, a)`.
pub fn robin_function(ball: &Ball, dims: &DimensionConstants, a: &[f64]) -> Result<f64> {
    if ball.dim() != dims.n {
        return Err(LabError::DimensionMismatch(format!(
            "ball in R^{} with N = {}",
            ball.dim(),
            dims.n
        )));
    }
    Ok(dims.green_constant() * kernel_robin(ball, a)?)
}

/// Relative finite-difference step for [`harmonicity_check`].
pub const HARMONICITY_FD_STEP: f64 = 1e-3;

/// Sample points of the harmonicity check: the center and the axis and
/// diagonal directions at radii `{0.2, 0.4, 0.6, 0.8}·R`.
fn harmonicity_samples(ball: &Ball) -> Vec<Vec<f64>> {
    let n = ball.dim();
    let mut dirs: Vec<Vec<f64>> = (0..n)
        .flat_map(|j| {
            [1.0, -1.0].into_iter().map(move |s| {
                let mut e = vec![0.0; n];
                e[j] = s;
                e
            })
        })
        .collect();
    let inv = 1.0 / (n as f64).sqrt();
    dirs.push(vec![inv; n]);
    dirs.push(vec![-inv; n]);
    let mut pts = vec![ball.center.clone()];
    for frac in [0.2, 0.4, 0.6, 0.8] {
        for e in &dirs {
            pts.push(
                ball.center
                    .iter()
                    .zip(e)
                    .map(|(c, v)| c + frac * ball.radius * v)
                    .collect(),
            );
        }
    }
    pts
}

/// Max over a fixed interior grid of `|Δ_x H(x, y)|` by central differences.
pub fn harmonicity_check(ball: &Ball, dims: &DimensionConstants, y: &[f64]) -> Result<f64> {
    ball.check_interior(y, "y")?;
    let step = HARMONICITY_FD_STEP * ball.radius;
    let cn = dims.green_constant();
    let h = |x: &[f64]| cn * kernel_regular_part_unchecked(ball, x, y);
    let mut worst: f64 = 0.0;
    for x in harmonicity_samples(ball) {
        let center = h(&x);
        let mut z = x.clone();
        let mut lap = 0.0;
        for j in 0..x.len() {
            z[j] = x[j] + step;
            let fp = h(&z);
            z[j] = x[j] - step;
            let fm = h(&z);
            z[j] = x[j];
            lap += (fp - 2.0 * center + fm) / (step * step);
        }
        worst = worst.max(lap.abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_in_ball(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> Vec<f64> {
        loop {
            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-radius..radius)).collect();
            if x.iter().map(|v| v * v).sum::<f64>().sqrt() < radius {
                return x;
            }
        }
    }

    fn random_on_sphere(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> Vec<f64> {
        let x = random_in_ball(rng, n, 1.0);
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        x.iter().map(|v| radius * v / norm).collect()
    }

    #[test]
    fn value_at_center() {
        let d4 = DimensionConstants::new(4).unwrap();
        let ball = Ball::unit(4);
        let h = green_regular_part(&ball, &d4, &[0.0; 4], &[0.0; 4]).unwrap();
        assert!((h - 1.0 / (8.0 * d4.omega_ball)).abs() < 1e-15);

        let d3 = DimensionConstants::new(3).unwrap();
        let r = robin_function(&Ball::unit(3), &d3, &[0.0; 3]).unwrap();
        assert!((r - 1.0 / (4.0 * PI)).abs() < 1e-15);
    }

    #[test]
    fn green_vanishes_on_the_boundary() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [3, 4] {
            let dims = DimensionConstants::new(n).unwrap();
            let ball = Ball::new(vec![0.3; n], 2.0).unwrap();
            for _ in 0..50 {
                let y: Vec<f64> = random_in_ball(&mut rng, n, 1.9)
                    .iter()
                    .zip(&ball.center)
                    .map(|(v, c)| v + c)
                    .collect();
                let x: Vec<f64> = random_on_sphere(&mut rng, n, ball.radius)
                    .iter()
                    .zip(&ball.center)
                    .map(|(v, c)| v + c)
                    .collect();
                let dist: f64 = x
                    .iter()
                    .zip(&y)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                let singular = dims.green_constant() * dist.powf(2.0 - n as f64);
                let h = green_regular_part(&ball, &dims, &x, &y).unwrap();
                assert!((singular - h).abs() < 1e-10 * singular.max(1.0));
            }
        }
    }

    #[test]
    fn symmetry_and_positivity() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let dims = DimensionConstants::new(4).unwrap();
        let ball = Ball::unit(4);
        for _ in 0..20 {
            let x = random_in_ball(&mut rng, 4, 0.99);
            let y = random_in_ball(&mut rng, 4, 0.99);
            let hxy = green_regular_part(&ball, &dims, &x, &y).unwrap();
            let hyx = green_regular_part(&ball, &dims, &y, &x).unwrap();
            assert!((hxy - hyx).abs() <= 1e-12 * hxy);
            assert!(robin_function(&ball, &dims, &x).unwrap() > 0.0);
        }
    }

    #[test]
    fn robin_grows_toward_the_boundary() {
        let dims = DimensionConstants::new(4).unwrap();
        let ball = Ball::unit(4);
        let at = |s: f64| robin_function(&ball, &dims, &[s, 0.0, 0.0, 0.0]).unwrap();
        assert!(at(0.5) > at(0.0));
        let mut last = 0.0;
        for s in [0.9, 0.99, 0.999, 0.9999] {
            let v = at(s);
            assert!(v > last);
            last = v;
        }
        assert!(last > 1e5);
        assert!(robin_function(&ball, &dims, &[1.0, 0.0, 0.0, 0.0]).is_err());
        assert!(robin_function(&ball, &dims, &[1.5, 0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn robin_matches_diagonal_of_regular_part() {
        let ball = Ball::new(vec![0.1, -0.2, 0.0], 1.5).unwrap();
        let a = [0.4, 0.3, -0.5];
        let diag = kernel_regular_part(&ball, &a, &a).unwrap();
        let robin = kernel_robin(&ball, &a).unwrap();
        assert!((diag - robin).abs() < 1e-13 * robin);
    }

    #[test]
    fn outside_points_rejected() {
        let dims = DimensionConstants::new(3).unwrap();
        let ball = Ball::unit(3);
        assert!(matches!(
            green_regular_part(&ball, &dims, &[2.0, 0.0, 0.0], &[0.0; 3]),
            Err(LabError::OutsideDomain(_))
        ));
        assert!(green_regular_part(&ball, &dims, &[0.0; 4], &[0.0; 3]).is_err());
    }

    #[test]
    fn regular_part_is_harmonic() {
        let dims = DimensionConstants::new(4).unwrap();
        let ball = Ball::unit(4);
        assert!(harmonicity_check(&ball, &dims, &[0.3, 0.0, 0.0, 0.0]).unwrap() < 1e-5);
        assert!(harmonicity_check(&ball, &dims, &[0.0; 4]).unwrap() < 1e-5);
        let d3 = DimensionConstants::new(3).unwrap();
        let v = harmonicity_check(&Ball::unit(3), &d3, &[0.0, 0.5, 0.2]).unwrap();
        assert!(v.is_finite() && v < 1e-5);
    }

    #[test]
    fn perforated_domain_invariants() {
        let ball = Ball::unit(4);
        let hole = |c: [f64; 4], r: f64| HoleSpec {
            center: c.to_vec(),
            radius_coeff: r,
        };
        let ok = PerforatedDomain::new(
            ball.clone(),
            vec![
                hole([0.5, 0.0, 0.0, 0.0], 1.0),
                hole([-0.5, 0.0, 0.0, 0.0], 2.0),
            ],
            1e-2,
        );
        assert!(ok.is_ok());
        // Overlapping holes.
        assert!(PerforatedDomain::new(
            ball.clone(),
            vec![
                hole([0.01, 0.0, 0.0, 0.0], 1.0),
                hole([-0.01, 0.0, 0.0, 0.0], 1.0)
            ],
            1e-2
        )
        .is_err());
        // Hole touching the boundary.
        assert!(
            PerforatedDomain::new(ball.clone(), vec![hole([0.95, 0.0, 0.0, 0.0], 5.0)], 1e-2)
                .is_err()
        );
        assert!(PerforatedDomain::new(ball, vec![hole([1.0, 0.0, 0.0, 0.0], 1.0)], 1e-3).is_err());
    }
}
