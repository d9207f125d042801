//! Radial projections of a bubble onto an annulus and scaling laws of
//! bubble integrals, checked by log–log fits over geometric `δ` grids.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;

use crate::bubbles::{BubbleParams, DimensionConstants};
use crate::error::{LabError, Result};
use crate::fit::{log_augmented_fit, loglog_fit, LineFit};
use crate::quadrature::{decade_breaks, integrate_with_breaks, QuadOptions};

fn quad_opts() -> QuadOptions {
    QuadOptions::with_tolerances(1e-300, 1e-11)
}

/// Twelve points `δ_k = 0.1 · 2^{−k}`.
pub fn default_delta_grid() -> Vec<f64> {
    (0..12).map(|k| 0.1 * 0.5f64.powi(k)).collect()
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 3 {
        return Err(LabError::InvalidParameter(
            "delta grid needs at least three points".into(),
        ));
    }
    if grid.iter().any(|d| !(*d > 0.0)) {
        return Err(LabError::InvalidParameter(
            "delta grid must be positive".into(),
        ));
    }
    let r0 = grid[1] / grid[0];
    for w in grid.windows(2) {
        let r = w[1] / w[0];
        if !(r <= 0.5 + 1e-12) || (r - r0).abs() > 1e-9 * r0 {
            return Err(LabError::InvalidParameter(format!(
                "delta grid must be geometric, decreasing, ratio <= 1/2 (found {r})"
            )));
        }
    }
    Ok(())
}

/// `U_{δ,ξ} + A + B s^{2−N}` on the annulus `ρ_0 < |x − ξ| < R`, vanishing
/// on both spheres.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialProjection {
    pub bubble: BubbleParams,
    pub inner: f64,
    pub outer: f64,
    pub a: f64,
    pub b: f64,
}

pub fn project_bubble_radial(
    inner: f64,
    outer: f64,
    bubble: BubbleParams,
) -> Result<RadialProjection> {
    if !(inner > 0.0) || !(inner < outer) {
        return Err(LabError::DegenerateAnnulus { inner, outer });
    }
    let m = bubble.dims.nf() - 2.0;
    let u_in = bubble.profile(inner);
    let u_out = bubble.profile(outer);
    let den = inner.powf(-m) - outer.powf(-m);
    let b = (u_out - u_in) / den;
    let a = -u_out - b * outer.powf(-m);
    Ok(RadialProjection {
        bubble,
        inner,
        outer,
        a,
        b,
    })
}

impl RadialProjection {
    /// `h(s) = A + B s^{2−N}`.
    pub fn correction(&self, s: f64) -> f64 {
        self.a + self.b * s.powf(2.0 - self.bubble.dims.nf())
    }

    pub fn value(&self, s: f64) -> f64 {
        self.bubble.profile(s) + self.correction(s)
    }

    /// `|−Δ(PU) − U^p| / U^p` at radius `s`, with `−Δh` expanded term by term.
    pub fn pde_residual(&self, s: f64) -> f64 {
        let nf = self.bubble.dims.nf();
        let m = nf - 2.0;
        let h1 = -m * self.b * s.powf(-m - 1.0);
        let h2 = m * (m + 1.0) * self.b * s.powf(-m - 2.0);
        let lap_h = h2 + (nf - 1.0) / s * h1;
        let up = self.bubble.profile(s).powf(self.bubble.dims.p);
        (self.bubble.neg_laplacian_profile(s) - lap_h - up).abs() / up
    }

    /// `n` radii from `inner` to `outer`, geometric.
    pub fn samples(&self, n: usize) -> Vec<f64> {
        let (l0, l1) = (self.inner.ln(), self.outer.ln());
        (0..n)
            .map(|i| (l0 + (l1 - l0) * i as f64 / (n - 1) as f64).exp())
            .collect()
    }
}

/// Sup-ratio of the projection remainder against its pointwise bound.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemainderReport {
    pub epsilon: f64,
    pub delta: f64,
    pub sup_remainder: f64,
    /// `sup_x |R(x)| / bound(x)`.
    pub ratio: f64,
}

/// Remainder of the projected bubble at `τ = 0` in the ball `B_R(a)` with the
/// hole `B_{rε}(a)` and `δ = d√ε`:
///
/// `R(x) = PU − U + α_N δ^{(N−2)/2} H̃(x, a) + α_N δ^{−(N−2)/2} (rε/|x − a|)^{N−2}`
///
/// where `H̃(x, a) = R^{2−N}` is the kernel-normalized regular part. The
/// bound is `δ^{(N−2)/2} [ε^{N−2}(1 + εδ^{1−N}) |x − a|^{2−N} + δ² + (ε/δ)^{N−2}]`.
pub fn remainder_check(
    dims: DimensionConstants,
    ball_radius: f64,
    hole_r: f64,
    d: f64,
    epsilon: f64,
    samples: usize,
) -> Result<RemainderReport> {
    let delta = d * epsilon.sqrt();
    let inner = hole_r * epsilon;
    let bubble = BubbleParams::centered(delta, dims)?;
    let proj = project_bubble_radial(inner, ball_radius, bubble)?;
    let nf = dims.nf();
    let m = nf - 2.0;
    let k = dims.half_gap();
    let alpha = dims.alpha;
    let big_r = ball_radius;

    // A + α δ^k R^{−m} = [α δ^k R^{−m} − U(R)] − B R^{−m}, and
    // B + α δ^{−k} ρ_0^m = [U(R) − U(ρ_0) + α δ^{−k} (1 − (ρ_0/R)^m)] / D,
    // each bracket evaluated without cancellation.
    let u_out = proj.bubble.profile(big_r);
    let gap_out = alpha
        * delta.powf(k)
        * big_r.powf(-m)
        * -(-k * (delta * delta / (big_r * big_r)).ln_1p()).exp_m1();
    let gap_in =
        alpha * delta.powf(-k) * -(-k * (inner * inner / (delta * delta)).ln_1p()).exp_m1();
    let den = inner.powf(-m) - big_r.powf(-m);
    let far = u_out + gap_in - alpha * delta.powf(-k) * (inner / big_r).powf(m);
    let b_shift = far / den;
    let constant = gap_out - proj.b * big_r.powf(-m);

    let mut sup_r: f64 = 0.0;
    let mut ratio: f64 = 0.0;
    for s in proj.samples(samples) {
        let rem = constant + b_shift * s.powf(-m);
        let bound = delta.powf(k)
            * (epsilon.powf(m) * (1.0 + epsilon * delta.powf(1.0 - nf)) * s.powf(-m)
                + delta * delta
                + (epsilon / delta).powf(m));
        sup_r = sup_r.max(rem.abs());
        ratio = ratio.max(rem.abs() / bound);
    }
    Ok(RemainderReport {
        epsilon,
        delta,
        sup_remainder: sup_r,
        ratio,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemainderSweep {
    pub reports: Vec<RemainderReport>,
    /// Slope of `log ratio` against `log ε`; negative means growth as `ε ↓`.
    pub log_ratio_slope: f64,
    pub bounded: bool,
}

/// Slope threshold of a `log ratio` fit below which a ratio is judged to
/// grow as the small parameter decreases.
pub const REMAINDER_SLOPE_FLOOR: f64 = -0.1;

pub fn remainder_sweep(
    dims: DimensionConstants,
    ball_radius: f64,
    hole_r: f64,
    d: f64,
    epsilons: &[f64],
) -> Result<RemainderSweep> {
    let reports: Vec<RemainderReport> = epsilons
        .par_iter()
        .map(|&e| remainder_check(dims, ball_radius, hole_r, d, e, 1000))
        .collect::<Result<_>>()?;
    let fit = loglog_fit(
        epsilons,
        &reports.iter().map(|r| r.ratio).collect::<Vec<_>>(),
    )?;
    Ok(RemainderSweep {
        bounded: fit.slope >= REMAINDER_SLOPE_FLOOR,
        log_ratio_slope: fit.slope,
        reports,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub exponent_measured: f64,
    pub exponent_predicted: f64,
    pub delta_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub r2: f64,
    /// The fit carried a `|log δ|` factor.
    pub log_augmented: bool,
    /// `max/min − 1` of the values; the meaningful fit quality when the
    /// predicted exponent is zero and `r2` degenerates.
    pub relative_spread: f64,
}

impl ScalingFit {
    pub fn slope_error(&self) -> f64 {
        (self.exponent_measured - self.exponent_predicted).abs()
    }

    fn from_values(grid: &[f64], values: Vec<f64>, predicted: f64, log_case: bool) -> Result<Self> {
        let LineFit { slope, r2, .. } = if log_case {
            log_augmented_fit(grid, &values)?
        } else {
            loglog_fit(grid, &values)?
        };
        let max = values.iter().copied().fold(f64::MIN, f64::max);
        let min = values.iter().copied().fold(f64::MAX, f64::min);
        Ok(Self {
            relative_spread: max / min - 1.0,
            exponent_measured: slope,
            exponent_predicted: predicted,
            delta_grid: grid.to_vec(),
            values,
            r2,
            log_augmented: log_case,
        })
    }
}

/// Ball `B_R(0)` containing the bubble center at distance `offset` from 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SingleDomain {
    pub radius: f64,
    pub offset: f64,
}

impl SingleDomain {
    pub fn centered(radius: f64) -> Self {
        Self {
            radius,
            offset: 0.0,
        }
    }
}

/// Fraction of the sphere `|x − ξ| = s` lying in `B_R(0)` when `|ξ| = h`.
fn sphere_fraction(n: usize, radius: f64, h: f64, s: f64) -> f64 {
    if s + h <= radius {
        return 1.0;
    }
    if s >= radius + h {
        return 0.0;
    }
    let c = ((radius * radius - h * h - s * s) / (2.0 * h * s)).clamp(-1.0, 1.0);
    match n {
        3 => (c + 1.0) / 2.0,
        _ => {
            (c * (1.0 - c * c).sqrt() + c.asin() + std::f64::consts::FRAC_PI_2)
                / std::f64::consts::PI
        }
    }
}

/// Mean of `|θ_h|^ν` over the unit sphere `S^{N−1}`.
pub fn angular_moment(n: usize, nu: f64) -> f64 {
    let nf = n as f64;
    gamma(nf / 2.0) * gamma((nu + 1.0) / 2.0)
        / (std::f64::consts::PI.sqrt() * gamma((nf + nu) / 2.0))
}

/// `∫ U_δ^q |x − ξ|^{power}` over `{ρ < |x − ξ|} ∩ B_R(0)`, as a radial
/// integral around `ξ`.
fn radial_bubble_integral(
    dims: &DimensionConstants,
    delta: f64,
    q: f64,
    power: f64,
    inner: f64,
    domain: SingleDomain,
) -> Result<f64> {
    let bubble = BubbleParams::centered(delta, *dims)?;
    let outer = domain.radius + domain.offset;
    let n = dims.n;
    let f = |s: f64| {
        s.powf(dims.nf() - 1.0 + power)
            * bubble.profile(s).powf(q)
            * sphere_fraction(n, domain.radius, domain.offset, s)
    };
    let mut breaks = decade_breaks(delta, inner, outer);
    breaks.push(domain.radius - domain.offset);
    Ok(dims.omega_sphere * integrate_with_breaks(f, inner, outer, &breaks, quad_opts())?.value)
}

/// `∫_Ω U_δ^q`.
pub fn bubble_power_integral(
    dims: &DimensionConstants,
    q: f64,
    delta: f64,
    domain: SingleDomain,
) -> Result<f64> {
    radial_bubble_integral(dims, delta, q, 0.0, 0.0, domain)
}

/// Exponent of `∫_Ω U_δ^q` and whether a `|log δ|` factor is present.
pub fn predicted_single_exponent(n: usize, q: f64) -> (f64, bool) {
    let nf = n as f64;
    let crit = nf / (nf - 2.0);
    if (q - crit).abs() < 1e-12 {
        (nf / 2.0, true)
    } else if q < crit {
        ((nf - 2.0) * q / 2.0, false)
    } else {
        // Includes q = 2N/(N−2), where the exponent vanishes.
        (nf - (nf - 2.0) * q / 2.0, false)
    }
}

fn check_domain(domain: SingleDomain) -> Result<()> {
    if !(domain.radius > 0.0) || !(domain.offset >= 0.0) || domain.offset >= domain.radius {
        return Err(LabError::InvalidParameter(format!(
            "bubble center at distance {} must lie inside the ball of radius {}",
            domain.offset, domain.radius
        )));
    }
    Ok(())
}

/// Fits `log ∫_Ω U_δ^q` against `log δ`.
pub fn scaling_law_single(
    q: f64,
    dims: DimensionConstants,
    grid: &[f64],
    domain: SingleDomain,
) -> Result<ScalingFit> {
    if !(q > 0.0) {
        return Err(LabError::InvalidParameter(format!(
            "q = {q} must be positive"
        )));
    }
    check_grid(grid)?;
    check_domain(domain)?;
    let values: Vec<f64> = grid
        .par_iter()
        .map(|&d| bubble_power_integral(&dims, q, d, domain))
        .collect::<Result<_>>()?;
    let (pred, log_case) = predicted_single_exponent(dims.n, q);
    ScalingFit::from_values(grid, values, pred, log_case)
}

/// `∫_{Ω∖B_{rδ²}(a)} U_δ^q |x_h − ξ_h|^{ν_1} / |x − a|^{ν_2}` with `ξ = a` the
/// center of `B_R`.
pub fn weighted_integral(
    dims: &DimensionConstants,
    q: f64,
    nu1: f64,
    nu2: f64,
    delta: f64,
    hole_r: f64,
    ball_radius: f64,
) -> Result<f64> {
    let inner = hole_r * delta * delta;
    Ok(angular_moment(dims.n, nu1)
        * radial_bubble_integral(
            dims,
            delta,
            q,
            nu1 - nu2,
            inner,
            SingleDomain::centered(ball_radius),
        )?)
}

/// Exponent of [`weighted_integral`] and whether a `|log δ|` factor is present.
pub fn predicted_weighted_exponent(n: usize, q: f64, nu1: f64, nu2: f64) -> Result<(f64, bool)> {
    let nf = n as f64;
    if nu1 < 0.0 || nu2 < 0.0 || nu2 > nf {
        return Err(LabError::HypothesisViolated(format!(
            "need nu1 >= 0 and 0 <= nu2 <= N (got nu1 = {nu1}, nu2 = {nu2})"
        )));
    }
    if nu2 == nf {
        if nu1 != 0.0 || !((nf - 2.0) * q + nu2 > nf) {
            return Err(LabError::HypothesisViolated(
                "nu2 = N needs nu1 = 0 and (N−2) q > 0".into(),
            ));
        }
        return Ok((-(nf - 2.0) * q / 2.0, true));
    }
    if nu2 == 0.0 && (q - (nf + nu1) / (nf - 2.0)).abs() < 1e-12 {
        return Ok(((nf - 2.0) * q / 2.0, true));
    }
    if !((nf - 2.0) * q + nu2 - nu1 > nf) {
        return Err(LabError::HypothesisViolated(format!(
            "(N−2) q + nu2 − nu1 = {} must exceed N = {n}",
            (nf - 2.0) * q + nu2 - nu1
        )));
    }
    Ok((nf + nu1 - nu2 - (nf - 2.0) * q / 2.0, false))
}

/// Hole coefficient of the excised ball `B_{rδ²}(a)` in the weighted law.
pub const WEIGHTED_HOLE_R: f64 = 1.0;

pub fn scaling_law_weighted(
    q: f64,
    nu1: f64,
    nu2: f64,
    dims: DimensionConstants,
    grid: &[f64],
    ball_radius: f64,
) -> Result<ScalingFit> {
    let (pred, log_case) = predicted_weighted_exponent(dims.n, q, nu1, nu2)?;
    check_grid(grid)?;
    let values: Vec<f64> = grid
        .par_iter()
        .map(|&d| weighted_integral(&dims, q, nu1, nu2, d, WEIGHTED_HOLE_R, ball_radius))
        .collect::<Result<_>>()?;
    ScalingFit::from_values(grid, values, pred, log_case)
}

/// Two bubbles at `(±separation/2, 0, …)` in `B_R(0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairGeometry {
    pub ball_radius: f64,
    pub separation: f64,
}

impl PairGeometry {
    fn check(&self) -> Result<()> {
        if !(self.separation > 0.0) {
            return Err(LabError::InvalidParameter("bubble centers coincide".into()));
        }
        if !(self.separation / 2.0 < self.ball_radius) {
            return Err(LabError::InvalidParameter(format!(
                "centers at distance {} from the origin lie outside the ball of radius {}",
                self.separation / 2.0,
                self.ball_radius
            )));
        }
        Ok(())
    }
}

/// Optional weight `|x − ξ_1|^{ν_1} / |x − a|^{ν_2}` with `a = ξ_1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairWeight {
    pub nu1: f64,
    pub nu2: f64,
}

/// Surface area of `S^{N−2}`.
fn omega_minus_two(n: usize) -> f64 {
    match n {
        3 => 2.0 * std::f64::consts::PI,
        _ => 4.0 * std::f64::consts::PI,
    }
}

/// `∫_{B_R} U_{δ_1,ξ_1}^{q_1} U_{δ_2,ξ_2}^{q_2} [weight]` with `ξ_1` at
/// `+separation/2` and `ξ_2` at `−separation/2` on the first axis.
///
/// The integrand is axially symmetric; each half-ball is integrated in polar
/// coordinates `(s, φ)` around the center it contains, with the angular
/// measure `ω_{N−2} ρ^{N−2}` of the remaining directions.
pub fn pair_integral(
    dims: &DimensionConstants,
    geometry: PairGeometry,
    first: (f64, f64),
    second: (f64, f64),
    weight: Option<PairWeight>,
) -> Result<f64> {
    geometry.check()?;
    let (q1, d1) = first;
    let (q2, d2) = second;
    let h = geometry.separation / 2.0;
    let big_r = geometry.ball_radius;
    let b1 = BubbleParams::centered(d1, *dims)?;
    let b2 = BubbleParams::centered(d2, *dims)?;
    let n = dims.n;
    let (w1, w2) = weight.map_or((0.0, 0.0), |w| (w.nu1, w.nu2));
    let integrand = |x1: f64, rho: f64| {
        let r1 = ((x1 - h).powi(2) + rho * rho).sqrt();
        let r2 = ((x1 + h).powi(2) + rho * rho).sqrt();
        let mut v = b1.profile(r1).powf(q1) * b2.profile(r2).powf(q2);
        if w1 != w2 {
            v *= r1.powf(w1 - w2);
        }
        v
    };
    let outer_opts = QuadOptions::with_tolerances(1e-300, 1e-9);

    // Half-ball x_1 > 0 around (h, 0) when `sign = 1`, x_1 < 0 around (−h, 0)
    // when `sign = −1`; the scale of the bubble sitting there sets the breaks.
    let half = |sign: f64, scale: f64| -> Result<f64> {
        let reach = |phi: f64| {
            let c = phi.cos();
            let ball = -h * c + (h * h * c * c - h * h + big_r * big_r).sqrt();
            if c < 0.0 {
                ball.min(h / -c)
            } else {
                ball
            }
        };
        let inner = |phi: f64| -> f64 {
            let smax = reach(phi);
            let (c, s_) = (phi.cos(), phi.sin());
            let f = |s: f64| {
                let x1 = sign * (h + s * c);
                let rho = s * s_;
                integrand(x1, rho) * rho.powi(n as i32 - 2) * s
            };
            integrate_with_breaks(f, 0.0, smax, &decade_breaks(scale, 0.0, smax), quad_opts())
                .map(|r| r.value)
                .unwrap_or(f64::NAN)
        };
        let kink = big_r.atan2(-h);
        let v = integrate_with_breaks(inner, 0.0, std::f64::consts::PI, &[kink], outer_opts)?.value;
        if v.is_nan() {
            return Err(LabError::Quadrature {
                lower: 0.0,
                upper: big_r,
                error: f64::NAN,
            });
        }
        Ok(v)
    };
    let (right, left) = rayon::join(|| half(1.0, d1), || half(-1.0, d2));
    Ok(omega_minus_two(n) * (right? + left?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairFit {
    pub delta_grid: Vec<f64>,
    pub values: Vec<f64>,
    /// Three-term bound `δ^{kq_1+kq_2} + δ^{kq_1} I_2 + δ^{kq_2} I_1`, `k = (N−2)/2`.
    pub bounds: Vec<f64>,
    pub ratios: Vec<f64>,
    /// Slope of `log ratio` against `log δ`; negative means growth as `δ ↓`.
    pub ratio_slope: f64,
    /// `value / (δ² |log δ|^{2/N})` when `q_1 = q_2 = N/(N−2)`.
    pub critical_ratios: Option<Vec<f64>>,
    pub bounded: bool,
}

/// Dominance of the pair integral by its three-term bound over the grid,
/// with `δ_1 = δ_2 = δ`. The single integrals inside the bound are taken
/// over the same ball, around the respective center.
pub fn scaling_law_pair(
    q1: f64,
    q2: f64,
    dims: DimensionConstants,
    grid: &[f64],
    geometry: PairGeometry,
    weight: Option<PairWeight>,
) -> Result<PairFit> {
    geometry.check()?;
    check_grid(grid)?;
    if !(q1 > 0.0) || !(q2 >= 0.0) {
        return Err(LabError::InvalidParameter(format!(
            "invalid powers q1 = {q1}, q2 = {q2}"
        )));
    }
    if let Some(w) = weight {
        if w.nu1 < 0.0 || !(w.nu2 >= 0.0 && w.nu2 < dims.nf()) {
            return Err(LabError::HypothesisViolated(format!(
                "need nu1 >= 0 and 0 <= nu2 < N (got {}, {})",
                w.nu1, w.nu2
            )));
        }
    }
    let domain = SingleDomain {
        radius: geometry.ball_radius,
        offset: geometry.separation / 2.0,
    };
    let k = dims.half_gap();
    let power = weight.map_or(0.0, |w| w.nu1 - w.nu2);
    let rows: Vec<(f64, f64)> = grid
        .par_iter()
        .map(|&d| -> Result<(f64, f64)> {
            let value = pair_integral(&dims, geometry, (q1, d), (q2, d), weight)?;
            let i1 = radial_bubble_integral(&dims, d, q1, power, 0.0, domain)?;
            let i2 = bubble_power_integral(&dims, q2, d, domain)?;
            let bound = d.powf(k * (q1 + q2)) + d.powf(k * q1) * i2 + d.powf(k * q2) * i1;
            Ok((value, bound))
        })
        .collect::<Result<_>>()?;
    let (values, bounds): (Vec<f64>, Vec<f64>) = rows.into_iter().unzip();
    let ratios: Vec<f64> = values.iter().zip(&bounds).map(|(v, b)| v / b).collect();
    let fit = loglog_fit(grid, &ratios)?;
    let crit = dims.nf() / (dims.nf() - 2.0);
    let critical_ratios =
        ((q1 - crit).abs() < 1e-12 && (q2 - crit).abs() < 1e-12 && weight.is_none()).then(|| {
            values
                .iter()
                .zip(grid)
                .map(|(v, d)| v / (d * d * d.ln().abs().powf(2.0 / dims.nf())))
                .collect()
        });
    Ok(PairFit {
        bounded: fit.slope >= REMAINDER_SLOPE_FLOOR,
        ratio_slope: fit.slope,
        delta_grid: grid.to_vec(),
        values,
        bounds,
        ratios,
        critical_ratios,
    })
}
