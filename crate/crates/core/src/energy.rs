//! Reduced energy `Ψ(d, τ)` of the finite-dimensional reduction, its
//! constants and derivatives, and the critical point `(d̃, 0)`.
//!
//! The interaction kernel `Γ(τ) = ∫ |y + τ|^{2−N} (1 + |y|²)^{−(N+2)/2} dy`
//! is evaluated through the mean-value property of the harmonic function
//! `y ↦ |y + τ|^{2−N}`: with `t = |τ|` and `w(r) = (1 + r²)^{−(N+2)/2}`,
//!
//! `Γ(τ) = ω_{N−1} [ t^{2−N} ∫_0^t r^{N−1} w dr + ∫_t^∞ r w dr ]
//!       = ω_{N−1} [ t² a(t) + ∫_t^∞ r w dr ]`,
//!
//! where `a(t) = ∫_0^1 s^{N−1} (1 + t²s²)^{−(N+2)/2} ds` is smooth at `t = 0`.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::bubbles::DimensionConstants;
use crate::error::{LabError, Result};
use crate::quadrature::{integrate, integrate_to_infinity, QuadOptions};

/// Default box parameter of `X_η`.
pub const DEFAULT_ETA: f64 = 1e-3;

fn quad_opts() -> QuadOptions {
    QuadOptions::with_tolerances(1e-14, 1e-13)
}

fn radial_integral<F: Fn(f64) -> f64>(f: F) -> Result<f64> {
    Ok(integrate_to_infinity(f, 0.0, &[1.0, 10.0, 100.0], quad_opts())?.value)
}

/// `b_1 = (α_N^{p+1}/N) ∫_{R^N} (1 + |y|²)^{−N} dy`.
pub fn constant_b1(dims: &DimensionConstants) -> Result<f64> {
    let n = dims.n as i32;
    let radial = radial_integral(|r| r.powi(n - 1) / (1.0 + r * r).powi(n))?;
    Ok(dims.alpha_energy() / dims.nf() * dims.omega_sphere * radial)
}

/// `b_2 = (α_N^{p+1}/2) ∫_{R^N} (1 + |y|²)^{−(N+2)/2} dy`.
pub fn constant_b2(dims: &DimensionConstants) -> Result<f64> {
    let n = dims.n as i32;
    let e = (dims.nf() + 2.0) / 2.0;
    let radial = radial_integral(|r| r.powi(n - 1) * (1.0 + r * r).powf(-e))?;
    Ok(dims.alpha_energy() / 2.0 * dims.omega_sphere * radial)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// `a(t)` and `a'(t)/t`.
fn inner_moments(dims: &DimensionConstants, t: f64) -> Result<(f64, f64)> {
    let nf = dims.nf();
    let n = dims.n as i32;
    let t2 = t * t;
    let a = integrate(
        |s| s.powi(n - 1) * (1.0 + t2 * s * s).powf(-(nf + 2.0) / 2.0),
        0.0,
        1.0,
        quad_opts(),
    )?
    .value;
    let da_over_t = -(nf + 2.0)
        * integrate(
            |s| s.powi(n + 1) * (1.0 + t2 * s * s).powf(-(nf + 4.0) / 2.0),
            0.0,
            1.0,
            quad_opts(),
        )?
        .value;
    Ok((a, da_over_t))
}

/// `Γ(τ)`.
pub fn gamma_kernel(dims: &DimensionConstants, tau: &[f64]) -> Result<f64> {
    check_len(dims, tau)?;
    let t = norm(tau);
    let (a, _) = inner_moments(dims, t)?;
    let e = (dims.nf() + 2.0) / 2.0;
    let tail = integrate_to_infinity(
        |r| r * (1.0 + r * r).powf(-e),
        t,
        &[1.0, 10.0, 100.0],
        quad_opts(),
    )?
    .value;
    Ok(dims.omega_sphere * (t * t * a + tail))
}

/// `∇Γ(τ) = ω_{N−1} (2 − N) a(|τ|) τ`.
pub fn gamma_grad(dims: &DimensionConstants, tau: &[f64]) -> Result<Vec<f64>> {
    check_len(dims, tau)?;
    let (a, _) = inner_moments(dims, norm(tau))?;
    let k = dims.omega_sphere * (2.0 - dims.nf()) * a;
    Ok(tau.iter().map(|x| k * x).collect())
}

/// `∇²Γ(τ) = ω_{N−1} (2 − N) [a I + (a'/t) τ τᵀ]`.
pub fn gamma_hessian(dims: &DimensionConstants, tau: &[f64]) -> Result<DMatrix<f64>> {
    check_len(dims, tau)?;
    let (a, da_over_t) = inner_moments(dims, norm(tau))?;
    let k = dims.omega_sphere * (2.0 - dims.nf());
    let n = dims.n;
    Ok(DMatrix::from_fn(n, n, |i, j| {
        k * (if i == j { a } else { 0.0 } + da_over_t * tau[i] * tau[j])
    }))
}

fn check_len(dims: &DimensionConstants, tau: &[f64]) -> Result<()> {
    if tau.len() != dims.n {
        return Err(LabError::DimensionMismatch(format!(
            "tau has {} coordinates, N = {}",
            tau.len(),
            dims.n
        )));
    }
    Ok(())
}

/// Monte Carlo estimate of `Γ(τ)` straight from its N-dimensional
/// definition, returning `(mean, standard error)`.
///
/// In the variable `z = y + τ` the integrand is `|z|^{2−N} w(z − τ)`.
/// Samples come from an equal mixture of `q_1 ∝ |z|^{2−N} (1 + |z|²)^{−2}`,
/// which absorbs the kernel singularity, and `q_2 ∝ w(z − τ)`, the bubble
/// density itself; the importance weight is bounded.
pub fn gamma_monte_carlo<R: Rng + ?Sized>(
    dims: &DimensionConstants,
    tau: &[f64],
    samples: usize,
    rng: &mut R,
) -> Result<(f64, f64)> {
    check_len(dims, tau)?;
    if samples < 2 {
        return Err(LabError::InvalidParameter(
            "need at least two samples".into(),
        ));
    }
    let n = dims.n;
    let nf = dims.nf();
    let e = (nf + 2.0) / 2.0;
    // Normalizers of q_1 and q_2.
    let c1 = dims.omega_sphere / 2.0;
    let c2 = dims.omega_ball;
    let mut sum = 0.0;
    let mut sum2 = 0.0;
    let mut z = vec![0.0; n];
    for _ in 0..samples {
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        if rng.random::<bool>() {
            let u: f64 = rng.random();
            let r = (u / (1.0 - u)).sqrt();
            let l = norm(&z);
            z.iter_mut().for_each(|v| *v *= r / l);
        } else {
            // Multivariate t with two degrees of freedom, rescaled.
            let w = -2.0 * (1.0 - rng.random::<f64>()).ln();
            let s = w.sqrt();
            z.iter_mut().zip(tau).for_each(|(v, t)| *v = *v / s + t);
        }
        let r2: f64 = z.iter().map(|v| v * v).sum();
        let y2: f64 = z.iter().zip(tau).map(|(v, t)| (v - t).powi(2)).sum();
        let wy = (1.0 + y2).powf(-e);
        let kernel = r2.powf((2.0 - nf) / 2.0);
        let q1 = kernel * (1.0 + r2).powi(-2) / c1;
        let q2 = wy / c2;
        let v = kernel * wy / (0.5 * (q1 + q2));
        sum += v;
        sum2 += v * v;
    }
    let m = samples as f64;
    let mean = sum / m;
    let var = (sum2 / m - mean * mean).max(0.0) * m / (m - 1.0);
    Ok((mean, (var / m).sqrt()))
}

/// Data of `Ψ` for `k` peaks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedEnergyModel {
    pub dims: DimensionConstants,
    pub weights: Vec<f64>,
    /// Per-peak Robin value in kernel normalization, `H(a_i, a_i)/c_N`.
    pub robin: Vec<f64>,
    pub hole_r: Vec<f64>,
    pub b1: f64,
    pub b2: f64,
    pub gamma0: f64,
}

impl ReducedEnergyModel {
    pub fn new(
        dims: DimensionConstants,
        weights: Vec<f64>,
        robin: Vec<f64>,
        hole_r: Vec<f64>,
    ) -> Result<Self> {
        let k = weights.len();
        if k == 0 || robin.len() != k || hole_r.len() != k {
            return Err(LabError::DimensionMismatch(format!(
                "weights, robin and hole_r must have equal nonzero length (got {}, {}, {})",
                k,
                robin.len(),
                hole_r.len()
            )));
        }
        for (name, v) in [
            ("weights", &weights),
            ("robin", &robin),
            ("hole_r", &hole_r),
        ] {
            if let Some(i) = v.iter().position(|&x| !(x > 0.0 && x.is_finite())) {
                return Err(LabError::InvalidParameter(format!(
                    "{name}[{i}] = {} must be positive",
                    v[i]
                )));
            }
        }
        Ok(Self {
            b1: constant_b1(&dims)?,
            b2: constant_b2(&dims)?,
            gamma0: gamma_kernel(&dims, &vec![0.0; dims.n])?,
            dims,
            weights,
            robin,
            hole_r,
        })
    }

    /// One peak of a scalar equation with coefficient `μ`: weight `μ^{−2/(p−1)}`.
    pub fn single_peak(dims: DimensionConstants, mu: f64, robin: f64, hole_r: f64) -> Result<Self> {
        let w = mu.powf(-2.0 / (dims.p - 1.0));
        Self::new(dims, vec![w], vec![robin], vec![hole_r])
    }

    pub fn peaks(&self) -> usize {
        self.weights.len()
    }

    /// `α_N^{p+1} r_i^{N−2} / 2`.
    fn hole_factor(&self, i: usize) -> f64 {
        self.dims.alpha_energy() * self.hole_r[i].powf(self.dims.nf() - 2.0) / 2.0
    }

    /// Coefficients `(Ã_i, B̃_i)` of `Ψ(d, 0) = Σ Ã_i d_i^{N−2} + B̃_i d_i^{2−N}`.
    pub fn coefficients(&self, i: usize) -> (f64, f64) {
        let w = self.weights[i];
        (
            w * self.b2 * self.robin[i],
            w * self.hole_factor(i) * self.gamma0,
        )
    }

    /// `d̃_i = (B̃_i / Ã_i)^{1/(2(N−2))}`.
    pub fn d_tilde(&self) -> Vec<f64> {
        let e = 1.0 / (2.0 * (self.dims.nf() - 2.0));
        (0..self.peaks())
            .map(|i| {
                let (a, b) = self.coefficients(i);
                (b / a).powf(e)
            })
            .collect()
    }
}

/// A point `(d, τ)` of `X_η`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReducedPoint {
    pub d: Vec<f64>,
    pub tau: Vec<Vec<f64>>,
    pub eta: f64,
}

impl ReducedPoint {
    pub fn new(d: Vec<f64>, tau: Vec<Vec<f64>>, eta: f64) -> Self {
        Self { d, tau, eta }
    }

    pub fn at_origin(d: Vec<f64>, n: usize) -> Self {
        let tau = vec![vec![0.0; n]; d.len()];
        Self::new(d, tau, DEFAULT_ETA)
    }

    pub fn in_box(&self) -> bool {
        let upper = 1.0 / self.eta;
        self.d.iter().all(|&d| d > self.eta && d < upper)
            && self.tau.iter().all(|t| norm(t) < upper)
    }

    fn check(&self, model: &ReducedEnergyModel) -> Result<()> {
        if self.d.len() != model.peaks() || self.tau.len() != model.peaks() {
            return Err(LabError::DimensionMismatch(format!(
                "point has {} / {} peaks, model has {}",
                self.d.len(),
                self.tau.len(),
                model.peaks()
            )));
        }
        for t in &self.tau {
            check_len(&model.dims, t)?;
        }
        if !self.in_box() {
            return Err(LabError::OutsideBox(format!(
                "d = {:?}, |tau| = {:?}, eta = {}",
                self.d,
                self.tau.iter().map(|t| norm(t)).collect::<Vec<_>>(),
                self.eta
            )));
        }
        Ok(())
    }
}

/// `g(τ) = Γ(τ) (1 + |τ|²)^{−(N−2)/2}` with gradient and Hessian.
struct Shape {
    value: f64,
    grad: Vec<f64>,
    hess: DMatrix<f64>,
}

fn shape(dims: &DimensionConstants, tau: &[f64], order: usize) -> Result<Shape> {
    let n = dims.n;
    let k = dims.half_gap();
    let t2: f64 = tau.iter().map(|x| x * x).sum();
    let q = 1.0 + t2;
    let gam = gamma_kernel(dims, tau)?;
    let value = gam * q.powf(-k);
    if order == 0 {
        return Ok(Shape {
            value,
            grad: vec![],
            hess: DMatrix::zeros(0, 0),
        });
    }
    let dg = gamma_grad(dims, tau)?;
    let grad: Vec<f64> = (0..n)
        .map(|i| q.powf(-k) * dg[i] - 2.0 * k * q.powf(-k - 1.0) * gam * tau[i])
        .collect();
    if order == 1 {
        return Ok(Shape {
            value,
            grad,
            hess: DMatrix::zeros(0, 0),
        });
    }
    let d2g = gamma_hessian(dims, tau)?;
    let hess = DMatrix::from_fn(n, n, |i, j| {
        let id = if i == j { 1.0 } else { 0.0 };
        q.powf(-k) * d2g[(i, j)]
            - 2.0 * k * q.powf(-k - 1.0) * (tau[i] * dg[j] + dg[i] * tau[j] + gam * id)
            + 4.0 * k * (k + 1.0) * q.powf(-k - 2.0) * gam * tau[i] * tau[j]
    });
    Ok(Shape { value, grad, hess })
}

/// `Ψ(d, τ) = Σ_i w_i [b_2 H_i d_i^{N−2} + (α_N^{p+1} r_i^{N−2}/2) Γ(τ_i) d_i^{2−N} (1 + |τ_i|²)^{(2−N)/2}]`.
pub fn psi_eval(model: &ReducedEnergyModel, pt: &ReducedPoint) -> Result<f64> {
    pt.check(model)?;
    let m = model.dims.nf() - 2.0;
    let mut total = 0.0;
    for i in 0..model.peaks() {
        let g = shape(&model.dims, &pt.tau[i], 0)?;
        let d = pt.d[i];
        total += model.weights[i]
            * (model.b2 * model.robin[i] * d.powf(m) + model.hole_factor(i) * g.value * d.powf(-m));
    }
    Ok(total)
}

/// Gradient ordered `(∂_{d_1}, …, ∂_{d_k}, ∇_{τ_1}, …, ∇_{τ_k})`.
pub fn psi_grad(model: &ReducedEnergyModel, pt: &ReducedPoint) -> Result<Vec<f64>> {
    pt.check(model)?;
    let n = model.dims.n;
    let k = model.peaks();
    let m = model.dims.nf() - 2.0;
    let mut out = vec![0.0; k * (n + 1)];
    for i in 0..k {
        let g = shape(&model.dims, &pt.tau[i], 1)?;
        let d = pt.d[i];
        let w = model.weights[i];
        let kf = model.hole_factor(i);
        out[i] =
            w * m * (model.b2 * model.robin[i] * d.powf(m - 1.0) - kf * g.value * d.powf(-m - 1.0));
        for h in 0..n {
            out[k + i * n + h] = w * kf * d.powf(-m) * g.grad[h];
        }
    }
    Ok(out)
}

/// Hessian in the ordering of [`psi_grad`].
pub fn psi_hessian(model: &ReducedEnergyModel, pt: &ReducedPoint) -> Result<DMatrix<f64>> {
    pt.check(model)?;
    let n = model.dims.n;
    let k = model.peaks();
    let m = model.dims.nf() - 2.0;
    let dim = k * (n + 1);
    let mut hess = DMatrix::zeros(dim, dim);
    for i in 0..k {
        let g = shape(&model.dims, &pt.tau[i], 2)?;
        let d = pt.d[i];
        let w = model.weights[i];
        let kf = model.hole_factor(i);
        hess[(i, i)] = w
            * m
            * ((m - 1.0) * model.b2 * model.robin[i] * d.powf(m - 2.0)
                + (m + 1.0) * kf * g.value * d.powf(-m - 2.0));
        for h in 0..n {
            let mixed = -w * m * kf * d.powf(-m - 1.0) * g.grad[h];
            hess[(i, k + i * n + h)] = mixed;
            hess[(k + i * n + h, i)] = mixed;
            for l in 0..n {
                hess[(k + i * n + h, k + i * n + l)] = w * kf * d.powf(-m) * g.hess[(h, l)];
            }
        }
    }
    Ok(hess)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPointReport {
    pub point: ReducedPoint,
    pub grad_norm: f64,
    pub hessian: Vec<Vec<f64>>,
    /// Largest `|∂²Ψ/∂τ∂d|` entry.
    pub mixed_block_max: f64,
    pub d_block_eigenvalues: Vec<f64>,
    pub tau_block_eigenvalues: Vec<f64>,
    /// d-block positive definite and τ-block negative definite.
    pub nondegenerate_saddle: bool,
}

/// `(d̃, 0)` in closed form together with its Hessian signature.
pub fn critical_point(model: &ReducedEnergyModel, eta: f64) -> Result<CriticalPointReport> {
    let d = model.d_tilde();
    for (i, &di) in d.iter().enumerate() {
        if !(di > eta && di < 1.0 / eta) {
            return Err(LabError::CriticalPointEscapes {
                peak: i,
                d: di,
                lower: eta,
                upper: 1.0 / eta,
            });
        }
    }
    let n = model.dims.n;
    let mut point = ReducedPoint::at_origin(d, n);
    point.eta = eta;
    classify(model, point)
}

fn classify(model: &ReducedEnergyModel, point: ReducedPoint) -> Result<CriticalPointReport> {
    let n = model.dims.n;
    let k = model.peaks();
    let grad = psi_grad(model, &point)?;
    let hess = psi_hessian(model, &point)?;
    let mut mixed: f64 = 0.0;
    for i in 0..k {
        for j in k..k * (n + 1) {
            mixed = mixed.max(hess[(i, j)].abs());
        }
    }
    let d_block = hess.view((0, 0), (k, k)).into_owned();
    let t_block = hess.view((k, k), (k * n, k * n)).into_owned();
    let mut d_eigs: Vec<f64> = SymmetricEigen::new(d_block)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    let mut t_eigs: Vec<f64> = SymmetricEigen::new(t_block)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    d_eigs.sort_by(f64::total_cmp);
    t_eigs.sort_by(f64::total_cmp);
    let saddle = d_eigs.iter().all(|&v| v > 0.0) && t_eigs.iter().all(|&v| v < 0.0);
    Ok(CriticalPointReport {
        grad_norm: norm(&grad),
        hessian: (0..hess.nrows())
            .map(|i| hess.row(i).iter().copied().collect())
            .collect(),
        mixed_block_max: mixed,
        d_block_eigenvalues: d_eigs,
        tau_block_eigenvalues: t_eigs,
        nondegenerate_saddle: saddle,
        point,
    })
}

/// Newton iteration on `∇Ψ = 0` from `start`; cross-check for the closed form.
pub fn critical_point_newton(
    model: &ReducedEnergyModel,
    start: ReducedPoint,
) -> Result<CriticalPointReport> {
    let n = model.dims.n;
    let k = model.peaks();
    let mut pt = start;
    let mut history = Vec::new();
    for _ in 0..50 {
        let g = psi_grad(model, &pt)?;
        let gn = norm(&g);
        history.push(gn);
        let scale = model.weights.iter().sum::<f64>() * model.b2;
        if gn <= 1e-13 * scale {
            return classify(model, pt);
        }
        let h = psi_hessian(model, &pt)?;
        let step = h
            .lu()
            .solve(&nalgebra::DVector::from_vec(g))
            .ok_or_else(|| {
                LabError::InvalidParameter("singular Hessian of the reduced energy".into())
            })?;
        let mut t = 1.0;
        loop {
            let mut trial = pt.clone();
            for i in 0..k {
                trial.d[i] -= t * step[i];
                for hh in 0..n {
                    trial.tau[i][hh] -= t * step[k + i * n + hh];
                }
            }
            if trial.in_box() {
                pt = trial;
                break;
            }
            t *= 0.5;
            if t < 1e-6 {
                return Err(LabError::OutsideBox("Newton step leaves X_eta".into()));
            }
        }
    }
    Err(LabError::NewtonDiverged {
        iterations: history.len(),
        residual: *history.last().unwrap_or(&f64::NAN),
        history,
    })
}

/// Leading-order energy `(Σ w_i) b_1 + Ψ(d̃, 0) ε^{(N−2)/2}`.
pub fn energy_expansion(model: &ReducedEnergyModel, epsilon: f64) -> Result<f64> {
    if !(epsilon > 0.0) {
        return Err(LabError::InvalidParameter(format!(
            "epsilon = {epsilon} must be positive"
        )));
    }
    let pt = ReducedPoint::at_origin(model.d_tilde(), model.dims.n);
    let psi = psi_eval(model, &pt)?;
    let total_weight: f64 = model.weights.iter().sum();
    Ok(total_weight * model.b1 + psi * epsilon.powf(model.dims.half_gap()))
}

/// Diagonal constant `σ_ll`, `l = 0` for the dilation kernel and
/// `l = 1..=N` for the translations.
pub fn sigma_constants(dims: &DimensionConstants, l: usize) -> Result<f64> {
    if l > dims.n {
        return Err(LabError::IndexOutOfRange {
            index: l,
            max: dims.n,
        });
    }
    let nf = dims.nf();
    let n = dims.n as i32;
    let pre = dims.p * dims.alpha_energy() * dims.omega_sphere;
    let e = nf + 2.0;
    if l == 0 {
        let radial =
            radial_integral(|r| r.powi(n - 1) * (r * r - 1.0).powi(2) * (1.0 + r * r).powf(-e))?;
        Ok(pre * dims.half_gap().powi(2) * radial)
    } else {
        // ∫ y_l² f(|y|) dy = (1/N) ∫ |y|² f(|y|) dy.
        let radial = radial_integral(|r| r.powi(n + 1) * (1.0 + r * r).powf(-e))?;
        Ok(pre * (nf - 2.0).powi(2) / nf * radial)
    }
}

/// Quadrature value of an off-diagonal `σ_lk`, `l ≠ k`.
///
/// Each off-diagonal integrand is odd in one coordinate `y_j`; with `y_j`
/// along the polar axis the integral factors into a radial part times
/// `∫_0^π cos θ sin^{N−2} θ dθ`, both evaluated numerically.
pub fn sigma_offdiagonal(dims: &DimensionConstants, l: usize, k: usize) -> Result<f64> {
    if l > dims.n || k > dims.n {
        return Err(LabError::IndexOutOfRange {
            index: l.max(k),
            max: dims.n,
        });
    }
    if l == k {
        return Err(LabError::InvalidParameter(
            "sigma_offdiagonal needs l != k".into(),
        ));
    }
    let nf = dims.nf();
    let n = dims.n as i32;
    let e = nf + 2.0;
    let angular = integrate(
        |th: f64| th.cos() * th.sin().powi(n - 2),
        0.0,
        std::f64::consts::PI,
        quad_opts(),
    )?
    .value;
    let radial = if l.min(k) == 0 {
        radial_integral(|r| r.powi(n) * (r * r - 1.0) * (1.0 + r * r).powf(-e))?
    } else {
        radial_integral(|r| r.powi(n + 1) * (1.0 + r * r).powf(-e))?
    };
    Ok(dims.p * dims.alpha_energy() * radial * angular)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use statrs::function::beta::beta;
    use std::f64::consts::PI;

    fn dims(n: usize) -> DimensionConstants {
        DimensionConstants::new(n).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn b_constants_against_beta_integrals() {
        // ∫_0^∞ r^{N−1}(1+r²)^{−s} dr = B(N/2, s − N/2) / 2.
        for n in [3usize, 4] {
            let d = dims(n);
            let nf = n as f64;
            let b1 = d.alpha_energy() / nf * d.omega_sphere * 0.5 * beta(nf / 2.0, nf / 2.0);
            let b2 = d.alpha_energy() / 2.0 * d.omega_sphere * 0.5 * beta(nf / 2.0, 1.0);
            assert!(rel(constant_b1(&d).unwrap(), b1) < 1e-10);
            assert!(rel(constant_b2(&d).unwrap(), b2) < 1e-10);
        }
        assert!(rel(constant_b1(&dims(4)).unwrap(), 8.0 * PI * PI / 3.0) < 1e-10);
        assert!(rel(constant_b2(&dims(4)).unwrap(), 16.0 * PI * PI) < 1e-10);
    }

    #[test]
    fn gamma_at_origin() {
        assert!(rel(gamma_kernel(&dims(4), &[0.0; 4]).unwrap(), PI * PI / 2.0) < 1e-10);
        assert!(rel(gamma_kernel(&dims(3), &[0.0; 3]).unwrap(), 4.0 * PI / 3.0) < 1e-10);
    }

    #[test]
    fn gamma_tail_closed_form() {
        // ∫_t^∞ r (1+r²)^{−(N+2)/2} dr = (1+t²)^{−N/2}/N.
        for n in [3usize, 4] {
            let d = dims(n);
            let nf = n as f64;
            for t in [0.3, 1.0, 4.0] {
                let mut tau = vec![0.0; n];
                tau[0] = t;
                let (a, _) = inner_moments(&d, t).unwrap();
                let expected = d.omega_sphere * (t * t * a + (1.0 + t * t).powf(-nf / 2.0) / nf);
                assert!(rel(gamma_kernel(&d, &tau).unwrap(), expected) < 1e-12);
            }
        }
    }

    #[test]
    fn gamma_matches_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [3usize, 4] {
            let d = dims(n);
            for t in [0.0, 0.5, 2.0] {
                let tau: Vec<f64> = (0..n).map(|j| if j == 1 { t } else { 0.0 }).collect();
                let exact = gamma_kernel(&d, &tau).unwrap();
                let (mc, se) = gamma_monte_carlo(&d, &tau, 200_000, &mut rng).unwrap();
                assert!(rel(mc, exact) < 0.01, "N={n} t={t}: {mc} ± {se} vs {exact}");
                assert!(se / exact < 0.003, "N={n} t={t}: standard error {se}");
            }
        }
    }

    #[test]
    fn gamma_derivatives_match_differences() {
        let d = dims(4);
        let tau = [0.4, -0.2, 0.7, 0.1];
        let h = 1e-5;
        let g = gamma_grad(&d, &tau).unwrap();
        let hs = gamma_hessian(&d, &tau).unwrap();
        for i in 0..4 {
            let mut p = tau;
            let mut m = tau;
            p[i] += h;
            m[i] -= h;
            let fd = (gamma_kernel(&d, &p).unwrap() - gamma_kernel(&d, &m).unwrap()) / (2.0 * h);
            assert!((fd - g[i]).abs() < 1e-7 * g[i].abs().max(1.0));
            let gp = gamma_grad(&d, &p).unwrap();
            let gm = gamma_grad(&d, &m).unwrap();
            for j in 0..4 {
                let fd = (gp[j] - gm[j]) / (2.0 * h);
                assert!((fd - hs[(i, j)]).abs() < 1e-7 * hs[(i, j)].abs().max(1.0));
            }
        }
        let h0 = gamma_hessian(&d, &[0.0; 4]).unwrap();
        assert!((h0[(0, 0)] - d.omega_sphere * (2.0 - 4.0) / 4.0).abs() < 1e-12);
    }

    fn model4() -> ReducedEnergyModel {
        ReducedEnergyModel::new(dims(4), vec![1.0, 2.0], vec![1.0, 1.7], vec![1.0, 0.6]).unwrap()
    }

    #[test]
    fn critical_point_structure() {
        for model in [
            model4(),
            ReducedEnergyModel::new(dims(3), vec![0.7], vec![2.0], vec![1.3]).unwrap(),
        ] {
            let rep = critical_point(&model, DEFAULT_ETA).unwrap();
            assert!(rep.grad_norm < 1e-10, "{}", rep.grad_norm);
            assert!(rep.mixed_block_max < 1e-8);
            assert!(rep.nondegenerate_saddle);
            let newton = critical_point_newton(
                &model,
                ReducedPoint::at_origin(vec![0.6; model.peaks()], model.dims.n),
            )
            .unwrap();
            for (a, b) in newton.point.d.iter().zip(&rep.point.d) {
                assert!(rel(*a, *b) < 1e-10);
            }
        }
    }

    #[test]
    fn dd_entry_in_dimension_four() {
        let model = model4();
        let rep = critical_point(&model, DEFAULT_ETA).unwrap();
        for i in 0..2 {
            let d = rep.point.d[i];
            let w = model.weights[i];
            let kf = model.dims.alpha_energy() * model.hole_r[i].powi(2) / 2.0;
            let expected =
                2.0 * w * model.b2 * model.robin[i] + 6.0 * w * kf * model.gamma0 / d.powi(4);
            assert!(rel(rep.hessian[i][i], expected) < 1e-12);
        }
    }

    #[test]
    fn unit_ball_center_gives_unit_d() {
        let model = ReducedEnergyModel::single_peak(dims(4), 1.0, 1.0, 1.0).unwrap();
        // Ã = b_2 = 16π², B̃ = (64/2) Γ(0) = 16π².
        assert!(rel(model.d_tilde()[0], 1.0) < 1e-12);
    }

    #[test]
    fn escape_is_reported() {
        let model = ReducedEnergyModel::single_peak(dims(4), 1.0, 1e-16, 1.0).unwrap();
        assert!(matches!(
            critical_point(&model, 1e-3),
            Err(LabError::CriticalPointEscapes { .. })
        ));
    }

    #[test]
    fn box_membership() {
        let model = model4();
        let pt = ReducedPoint::at_origin(vec![1e-4, 1.0], 4);
        assert!(matches!(
            psi_eval(&model, &pt),
            Err(LabError::OutsideBox(_))
        ));
        let pt = ReducedPoint::at_origin(vec![1.0], 4);
        assert!(psi_eval(&model, &pt).is_err());
    }

    #[test]
    fn expansion_limits() {
        let model = model4();
        let e0 = 3.0 * model.b1;
        assert!(rel(energy_expansion(&model, 1e-12).unwrap(), e0) < 1e-9);
        let m3 = ReducedEnergyModel::new(dims(3), vec![1.0], vec![1.0], vec![1.0]).unwrap();
        let base = m3.b1;
        let c1 = energy_expansion(&m3, 1e-4).unwrap() - base;
        let c2 = energy_expansion(&m3, 4e-4).unwrap() - base;
        assert!(rel(c2 / c1, 2.0) < 1e-9);
        assert!(energy_expansion(&m3, 0.0).is_err());
    }

    #[test]
    fn sigma_values() {
        let d = dims(4);
        // σ_00 = σ_ll = 3·64·2π² · 1/60 for N = 4.
        let expected = 3.0 * 64.0 * 2.0 * PI * PI / 60.0;
        assert!(rel(sigma_constants(&d, 0).unwrap(), expected) < 1e-10);
        for l in 1..=4 {
            assert!(rel(sigma_constants(&d, l).unwrap(), expected) < 1e-10);
        }
        for n in [3usize, 4] {
            let d = dims(n);
            assert!(sigma_offdiagonal(&d, 0, 1).unwrap().abs() < 1e-10);
            assert!(sigma_offdiagonal(&d, 1, 2).unwrap().abs() < 1e-10);
            assert!(sigma_constants(&d, n + 1).is_err());
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(50))]

        #[test]
        fn gradient_matches_differences(
            d1 in 0.2f64..3.0, d2 in 0.2f64..3.0,
            t in proptest::collection::vec(-1.5f64..1.5, 8),
        ) {
            let model = model4();
            let pt = ReducedPoint::new(vec![d1, d2], vec![t[..4].to_vec(), t[4..].to_vec()], DEFAULT_ETA);
            let g = psi_grad(&model, &pt).unwrap();
            let hs = psi_hessian(&model, &pt).unwrap();
            let flat = |p: &ReducedPoint| {
                let mut v = p.d.clone();
                p.tau.iter().for_each(|t| v.extend(t));
                v
            };
            let unflat = |v: &[f64]| ReducedPoint::new(v[..2].to_vec(), vec![v[2..6].to_vec(), v[6..].to_vec()], DEFAULT_ETA);
            let x = flat(&pt);
            for j in 0..x.len() {
                let h = 1e-5 * x[j].abs().max(1.0);
                let mut p = x.clone();
                let mut m = x.clone();
                p[j] += h;
                m[j] -= h;
                let fd = (psi_eval(&model, &unflat(&p)).unwrap() - psi_eval(&model, &unflat(&m)).unwrap()) / (2.0 * h);
                let scale = g.iter().fold(1.0f64, |a, b| a.max(b.abs()));
                prop_assert!((fd - g[j]).abs() <= 1e-6 * scale, "j={} fd={} g={}", j, fd, g[j]);
                let gp = psi_grad(&model, &unflat(&p)).unwrap();
                let gm = psi_grad(&model, &unflat(&m)).unwrap();
                for i in 0..x.len() {
                    let fd2 = (gp[i] - gm[i]) / (2.0 * h);
                    prop_assert!((fd2 - hs[(i, j)]).abs() <= 1e-5 * scale);
                }
            }
        }

        #[test]
        fn gamma_is_radial_and_maximal_at_origin(v in proptest::collection::vec(-3.0f64..3.0, 4), angle in 0.0f64..std::f64::consts::TAU) {
            let d = dims(4);
            let t = norm(&v);
            prop_assume!(t > 1e-3);
            let rotated = [v[0] * angle.cos() - v[1] * angle.sin(), v[0] * angle.sin() + v[1] * angle.cos(), v[2], v[3]];
            let a = gamma_kernel(&d, &v).unwrap();
            prop_assert!((a - gamma_kernel(&d, &rotated).unwrap()).abs() < 1e-12 * a);
            prop_assert!(a < gamma_kernel(&d, &[0.0; 4]).unwrap());
        }

        #[test]
        fn weights_are_linear(w in 0.1f64..5.0, d in 0.1f64..5.0) {
            let a = ReducedEnergyModel::new(dims(3), vec![w], vec![1.2], vec![0.8]).unwrap();
            let b = ReducedEnergyModel::new(dims(3), vec![2.0 * w], vec![1.2], vec![0.8]).unwrap();
            let pt = ReducedPoint::at_origin(vec![d], 3);
            let (va, vb) = (psi_eval(&a, &pt).unwrap(), psi_eval(&b, &pt).unwrap());
            prop_assert!((vb - 2.0 * va).abs() < 1e-12 * vb);
            let tau_grad = &psi_grad(&a, &pt).unwrap()[1..];
            prop_assert!(tau_grad.iter().all(|x| *x == 0.0));
        }
    }
}
