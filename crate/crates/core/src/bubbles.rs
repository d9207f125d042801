//! The standard bubble `U_{δ,ξ}(x) = α_N (δ / (δ² + |x − ξ|²))^{(N−2)/2}`,
//! its `N + 1` derivative kernels, and residual checks for the critical
//! equation `−ΔU = U^p` and its linearization.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Constants attached to the space dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DimensionConstants {
    pub n: usize,
    /// Critical exponent `(N+2)/(N−2)`.
    pub p: f64,
    /// Bubble normalization `α_N`.
    pub alpha: f64,
    /// Surface area of the unit sphere `S^{N−1}`.
    pub omega_sphere: f64,
    /// Volume of the unit ball.
    pub omega_ball: f64,
}

impl DimensionConstants {
    pub fn new(n: usize) -> Result<Self> {
        let omega_ball = match n {
            3 => 4.0 * PI / 3.0,
            4 => PI * PI / 2.0,
            _ => return Err(LabError::UnsupportedDimension(n)),
        };
        let nf = n as f64;
        let alpha = (nf * (nf - 2.0)).powf((nf - 2.0) / 4.0);
        Ok(Self {
            n,
            p: (nf + 2.0) / (nf - 2.0),
            alpha,
            omega_sphere: nf * omega_ball,
            omega_ball,
        })
    }

    /// Same dimension with a different normalization constant; used to
    /// show that the residual check pins `α_N` down.
    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn nf(&self) -> f64 {
        self.n as f64
    }

    /// `(N − 2) / 2`, the decay exponent of the bubble profile.
    pub fn half_gap(&self) -> f64 {
        (self.nf() - 2.0) / 2.0
    }

    /// `c_N = 1 / (N (N−2) ω_N)`, the constant of the fundamental solution.
    pub fn green_constant(&self) -> f64 {
        1.0 / (self.nf() * (self.nf() - 2.0) * self.omega_ball)
    }

    /// `α_N^{p+1}`, the recurring prefactor of the energy integrals.
    pub fn alpha_energy(&self) -> f64 {
        self.alpha.powf(self.p + 1.0)
    }
}

/// Parameters `(δ, ξ)` of one bubble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BubbleParams {
    pub delta: f64,
    pub xi: Vec<f64>,
    pub dims: DimensionConstants,
}

impl BubbleParams {
    pub fn new(delta: f64, xi: Vec<f64>, dims: DimensionConstants) -> Result<Self> {
        if !(delta > 0.0) || !delta.is_finite() {
            return Err(LabError::InvalidParameter(format!(
                "bubble scale must be positive, got {delta}"
            )));
        }
        if xi.len() != dims.n {
            return Err(LabError::DimensionMismatch(format!(
                "center has {} coordinates, expected {}",
                xi.len(),
                dims.n
            )));
        }
        Ok(Self { delta, xi, dims })
    }

    /// Bubble of scale `δ` centered at the origin.
    pub fn centered(delta: f64, dims: DimensionConstants) -> Result<Self> {
        Self::new(delta, vec![0.0; dims.n], dims)
    }

    fn dist2(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.xi.len());
        x.iter().zip(&self.xi).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    /// Value of the radial profile at distance `rho` from the center.
    pub fn profile(&self, rho: f64) -> f64 {
        let d = self.delta;
        self.dims.alpha * (d / (d * d + rho * rho)).powf(self.dims.half_gap())
    }

    /// `−ΔU` of the radial profile at distance `rho` (closed form).
    pub fn neg_laplacian_profile(&self, rho: f64) -> f64 {
        let n = self.dims.nf();
        let d = self.delta;
        self.dims.alpha * n * (n - 2.0) * d.powf((n + 2.0) / 2.0)
            / (d * d + rho * rho).powf((n + 2.0) / 2.0)
    }

    pub fn max_value(&self) -> f64 {
        self.dims.alpha * self.delta.powf(-self.dims.half_gap())
    }
}

fn check_point(b: &BubbleParams, x: &[f64]) {
    assert_eq!(
        x.len(),
        b.dims.n,
        "point dimension does not match the bubble"
    );
}

/// `U_{δ,ξ}(x)`.
pub fn bubble_eval(b: &BubbleParams, x: &[f64]) -> f64 {
    check_point(b, x);
    b.profile(b.dist2(x).sqrt())
}

/// Derivative kernel `ψ^h`: `∂U/∂δ` for `h = 0`, `∂U/∂ξ_h` for `1 ≤ h ≤ N`.
pub fn psi_eval(b: &BubbleParams, h: usize, x: &[f64]) -> Result<f64> {
    let n = b.dims.n;
    if h > n {
        return Err(LabError::IndexOutOfRange { index: h, max: n });
    }
    check_point(b, x);
    let nf = b.dims.nf();
    let d = b.delta;
    let r2 = b.dist2(x);
    let denom = (d * d + r2).powf(nf / 2.0);
    let value = if h == 0 {
        b.dims.alpha * b.dims.half_gap() * d.powf((nf - 4.0) / 2.0) * (r2 - d * d) / denom
    } else {
        b.dims.alpha * (nf - 2.0) * d.powf(b.dims.half_gap()) * (x[h - 1] - b.xi[h - 1]) / denom
    };
    Ok(value)
}

/// `−ΔU(x) − U(x)^p` with the Laplacian taken in closed form.
pub fn bubble_residual(b: &BubbleParams, x: &[f64]) -> f64 {
    check_point(b, x);
    let rho = b.dist2(x).sqrt();
    b.neg_laplacian_profile(rho) - b.profile(rho).powf(b.dims.p)
}

/// Relative finite-difference step used by [`linearized_residual`].
pub const LINEARIZED_FD_STEP: f64 = 2e-3;

/// Fixed sample set around the center: the origin plus the `±e_j` axes and
/// the two main diagonals at radii `{1/4, 1/2, 1, 3/2, 2, 3}·δ`.
pub fn linearization_samples(b: &BubbleParams) -> Vec<Vec<f64>> {
    let n = b.dims.n;
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for j in 0..n {
        for s in [1.0, -1.0] {
            let mut e = vec![0.0; n];
            e[j] = s;
            dirs.push(e);
        }
    }
    let inv = 1.0 / (n as f64).sqrt();
    dirs.push(vec![inv; n]);
    dirs.push(
        (0..n)
            .map(|j| if j % 2 == 0 { inv } else { -inv })
            .collect(),
    );

    let mut pts = vec![b.xi.clone()];
    for &radius in &[0.25, 0.5, 1.0, 1.5, 2.0, 3.0] {
        for e in &dirs {
            pts.push(
                b.xi.iter()
                    .zip(e)
                    .map(|(c, v)| c + radius * b.delta * v)
                    .collect(),
            );
        }
    }
    pts
}

fn fd_laplacian<F: Fn(&[f64]) -> f64>(f: &F, x: &[f64], step: f64) -> f64 {
    let center = f(x);
    let mut y = x.to_vec();
    let mut lap = 0.0;
    for j in 0..x.len() {
        let mut at = |t: f64| {
            y[j] = x[j] + t;
            let v = f(&y);
            y[j] = x[j];
            v
        };
        let (p1, m1, p2, m2) = (at(step), at(-step), at(2.0 * step), at(-2.0 * step));
        lap += (16.0 * (p1 + m1) - (p2 + m2) - 30.0 * center) / (12.0 * step * step);
    }
    lap
}

/// Sup over [`linearization_samples`] of `|−Δφ − p U^{p−1} φ|` for an
/// arbitrary function `φ`, with a fourth-order central Laplacian.
pub fn linearized_residual_of<F>(b: &BubbleParams, phi: F) -> f64
where
    F: Fn(&[f64]) -> f64,
{
    let step = LINEARIZED_FD_STEP * b.delta;
    let p = b.dims.p;
    linearization_samples(b)
        .iter()
        .map(|x| {
            let u = bubble_eval(b, x);
            (-fd_laplacian(&phi, x, step) - p * u.powf(p - 1.0) * phi(x)).abs()
        })
        .fold(0.0, f64::max)
}

/// Residual of the linearized equation for the kernel `ψ^h`.
pub fn linearized_residual(b: &BubbleParams, h: usize) -> Result<f64> {
    if h > b.dims.n {
        return Err(LabError::IndexOutOfRange {
            index: h,
            max: b.dims.n,
        });
    }
    Ok(linearized_residual_of(b, |x| {
        psi_eval(b, h, x).expect("index checked above")
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn dims(n: usize) -> DimensionConstants {
        DimensionConstants::new(n).unwrap()
    }

    #[test]
    fn dimension_constants() {
        let d3 = dims(3);
        let d4 = dims(4);
        assert_eq!(d3.p, 5.0);
        assert_eq!(d4.p, 3.0);
        assert!((d4.alpha - 8f64.sqrt()).abs() < 1e-15);
        assert!((d3.alpha - 3f64.powf(0.25)).abs() < 1e-15);
        for d in [d3, d4] {
            assert!((d.omega_sphere - d.nf() * d.omega_ball).abs() < 1e-14);
        }
        assert!((d4.omega_sphere - 2.0 * PI * PI).abs() < 1e-13);
        assert!(DimensionConstants::new(5).is_err());
    }

    #[test]
    fn bubble_examples() {
        let b = BubbleParams::centered(1.0, dims(4)).unwrap();
        assert!((bubble_eval(&b, &[0.0; 4]) - 8f64.sqrt()).abs() < 1e-14);

        let b3 = BubbleParams::centered(2.0, dims(3)).unwrap();
        let expected = 3f64.powf(0.25) * 2f64.powf(-0.5);
        assert!((bubble_eval(&b3, &[0.0; 3]) - expected).abs() < 1e-14);

        let mut last = f64::INFINITY;
        for k in 0..40 {
            let r = 0.5 * k as f64;
            let v = bubble_eval(&b, &[r, 0.0, 0.0, 0.0]);
            assert!(v < last || k == 0);
            last = v;
        }
        assert!(bubble_eval(&b, &[1e8, 0.0, 0.0, 0.0]) < 1e-15);
    }

    #[test]
    fn invalid_bubbles_rejected() {
        assert!(BubbleParams::centered(0.0, dims(4)).is_err());
        assert!(BubbleParams::centered(-1.0, dims(3)).is_err());
        assert!(BubbleParams::new(1.0, vec![0.0; 3], dims(4)).is_err());
    }

    #[test]
    fn kernel_examples() {
        let b = BubbleParams::centered(1.0, dims(4)).unwrap();
        let x0 = [0.0; 4];
        assert!((psi_eval(&b, 0, &x0).unwrap() + b.dims.alpha).abs() < 1e-14);
        assert_eq!(psi_eval(&b, 1, &x0).unwrap(), 0.0);
        let on_sphere = [0.6, 0.8, 0.0, 0.0];
        assert!(psi_eval(&b, 0, &on_sphere).unwrap().abs() < 1e-15);
        assert!(matches!(
            psi_eval(&b, 5, &x0),
            Err(LabError::IndexOutOfRange { index: 5, max: 4 })
        ));
    }

    #[test]
    fn residual_certifies_alpha() {
        for n in [3, 4] {
            let b = BubbleParams::centered(1.0, dims(n)).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            let worst = (0..100)
                .map(|_| {
                    let x: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
                    bubble_residual(&b, &x).abs()
                })
                .fold(0.0, f64::max);
            assert!(worst < 1e-10, "N={n}: {worst}");

            let perturbed =
                BubbleParams::centered(1.0, dims(n).with_alpha(1.01 * dims(n).alpha)).unwrap();
            let r = bubble_residual(&perturbed, &vec![0.0; n]).abs();
            assert!(r > 1e-2, "perturbed alpha must be detected: {r}");
        }
    }

    #[test]
    fn linearized_kernels() {
        let b = BubbleParams::centered(1.0, dims(4)).unwrap();
        assert!(linearized_residual(&b, 0).unwrap() < 1e-6);
        assert!(linearized_residual(&b, 2).unwrap() < 1e-6);
        assert!(linearized_residual(&b, 9).is_err());

        // U solves −ΔU = U^p, so the linearized residual at ξ is (p−1) U^p.
        let p = b.dims.p;
        let expected = (p - 1.0) * b.max_value().powf(p);
        let r = linearized_residual_of(&b, |x| bubble_eval(&b, x));
        assert!(r >= expected * (1.0 - 1e-6), "{r} vs {expected}");
    }

    #[test]
    fn kernels_match_finite_differences() {
        for n in [3, 4] {
            let b = BubbleParams::new(0.7, vec![0.1; n], dims(n)).unwrap();
            let x: Vec<f64> = (0..n).map(|j| 0.3 + 0.2 * j as f64).collect();
            let hstep = 1e-6;
            let plus = BubbleParams::new(b.delta + hstep, b.xi.clone(), b.dims).unwrap();
            let minus = BubbleParams::new(b.delta - hstep, b.xi.clone(), b.dims).unwrap();
            let fd = (bubble_eval(&plus, &x) - bubble_eval(&minus, &x)) / (2.0 * hstep);
            let exact = psi_eval(&b, 0, &x).unwrap();
            assert!(((fd - exact) / exact).abs() < 1e-6);
            for h in 1..=n {
                let mut xp = b.xi.clone();
                xp[h - 1] += hstep;
                let mut xm = b.xi.clone();
                xm[h - 1] -= hstep;
                let fp = bubble_eval(&BubbleParams::new(b.delta, xp, b.dims).unwrap(), &x);
                let fm = bubble_eval(&BubbleParams::new(b.delta, xm, b.dims).unwrap(), &x);
                let fd = (fp - fm) / (2.0 * hstep);
                let exact = psi_eval(&b, h, &x).unwrap();
                assert!(((fd - exact) / exact).abs() < 1e-6, "N={n} h={h}");
            }
        }
    }

    proptest! {
        #[test]
        fn maximum_sits_at_the_center(
            delta in 0.05f64..5.0,
            xi in prop::collection::vec(-2.0f64..2.0, 4),
            offset in prop::collection::vec(-3.0f64..3.0, 4),
        ) {
            let b = BubbleParams::new(delta, xi.clone(), dims(4)).unwrap();
            let peak = bubble_eval(&b, &xi);
            prop_assert!((peak - b.max_value()).abs() <= 1e-12 * peak);
            let x: Vec<f64> = xi.iter().zip(&offset).map(|(a, o)| a + o).collect();
            prop_assert!(bubble_eval(&b, &x) <= peak);
            // The radial derivative points inward.
            let rho: f64 = offset.iter().map(|o| o * o).sum::<f64>().sqrt();
            if rho > 1e-3 {
                prop_assert!(b.profile(rho * 1.001) < b.profile(rho));
            }
        }

        #[test]
        fn scaling_covariance(
            n in 3usize..=4,
            delta in 0.01f64..10.0,
            raw in prop::collection::vec(-3.0f64..3.0, 8),
        ) {
            let d = dims(n);
            let xi: Vec<f64> = raw[..n].to_vec();
            let x: Vec<f64> = raw[4..4 + n].to_vec();
            let b = BubbleParams::new(delta, xi.clone(), d).unwrap();
            let unit = BubbleParams::centered(1.0, d).unwrap();
            let y: Vec<f64> = x.iter().zip(&xi).map(|(a, c)| (a - c) / delta).collect();
            let lhs = bubble_eval(&b, &x);
            let rhs = delta.powf(-d.half_gap()) * bubble_eval(&unit, &y);
            prop_assert!((lhs - rhs).abs() <= 1e-13 * lhs.abs().max(1e-300));
        }
    }
}
