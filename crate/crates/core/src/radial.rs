//! Radial Newton solver for `−Δu = μ u₊^p` on the annulus `rε < |x| < R`
//! with zero boundary values, rate sweeps in `ε`, and composition of
//! synchronized system solutions `u_i = c_i w`.
//!
//! The mesh is uniform in `t = log s`, so it is geometrically graded toward
//! the hole and resolves every scale between `rε` and `R` alike. In `t` the
//! equation reads `−(s^{N−2} u_t)_t = s^N μ f(u)`, discretized in flux form
//!
//! `−[s_{i+½}^{N−2}(u_{i+1} − u_i) − s_{i−½}^{N−2}(u_i − u_{i−1})] / h² = s_i^N μ f(u_i)`,
//!
//! which is second-order accurate and whose solutions are exactly the
//! critical points of the discrete action used by [`energy_of_solution`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::asymptotics::project_bubble_radial;
use crate::bubbles::{BubbleParams, DimensionConstants};
use crate::coupling::{CVector, CouplingSpec};
use crate::energy::{energy_expansion, ReducedEnergyModel};
use crate::error::{LabError, Result};
use crate::fit::loglog_fit;
use crate::green::{kernel_robin, Ball};

/// Scalar problem on a centered annulus inside `B_R(0)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadialProblem {
    pub dims: DimensionConstants,
    pub ball_radius: f64,
    pub hole_r: f64,
    pub mu: f64,
}

impl RadialProblem {
    pub fn new(dims: DimensionConstants, ball_radius: f64, hole_r: f64, mu: f64) -> Result<Self> {
        for (name, v) in [
            ("ball radius", ball_radius),
            ("hole coefficient", hole_r),
            ("mu", mu),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(LabError::InvalidParameter(format!(
                    "{name} = {v} must be positive"
                )));
            }
        }
        Ok(Self {
            dims,
            ball_radius,
            hole_r,
            mu,
        })
    }

    pub fn inner_radius(&self, epsilon: f64) -> f64 {
        self.hole_r * epsilon
    }

    /// Single-peak reduced energy with the Robin value of the ambient ball
    /// at its center and weight `μ^{−2/(p−1)}`.
    pub fn reduced_model(&self) -> Result<ReducedEnergyModel> {
        let ball = Ball::new(vec![0.0; self.dims.n], self.ball_radius)?;
        let robin = kernel_robin(&ball, &vec![0.0; self.dims.n])?;
        ReducedEnergyModel::single_peak(self.dims, self.mu, robin, self.hole_r)
    }

    /// `μ^{−1/(p−1)}`, the amplitude of the concentrating profile.
    pub fn amplitude(&self) -> f64 {
        self.mu.powf(-1.0 / (self.dims.p - 1.0))
    }

    fn check_epsilon(&self, epsilon: f64) -> Result<()> {
        if !(epsilon > 0.0) || self.inner_radius(epsilon) >= self.ball_radius {
            return Err(LabError::DegenerateAnnulus {
                inner: self.inner_radius(epsilon),
                outer: self.ball_radius,
            });
        }
        Ok(())
    }
}

/// Samples of a radial function on a log-uniform mesh, endpoints included.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialGrid {
    pub nodes: Vec<f64>,
    pub values: Vec<f64>,
    pub dims: DimensionConstants,
    pub mu: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConcentrationMetrics {
    pub epsilon: f64,
    pub umax: f64,
    pub rpeak: f64,
    /// `(α_N μ^{−1/(p−1)} / umax)^{2/(N−2)}`.
    pub delta_est: f64,
    pub d_est: f64,
    pub energy: f64,
    pub iterations: usize,
    /// Largest componentwise backward error of the discrete equations.
    pub residual: f64,
    pub residual_history: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialGuess {
    /// `μ^{−1/(p−1)} P U_{δ̃, 0}` with `δ̃ = d̃ √ε` from the reduced energy.
    BubbleAnsatz,
    /// `μ^{−1/(p−1)} P U_{d √ε, 0}` for a prescribed `d`.
    Bubble {
        d: f64,
    },
    /// A previous profile, carried over by the bubble covariance law.
    Profile(RadialGrid),
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub nodes: usize,
    pub max_iterations: usize,
    pub tolerance: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            nodes: 2000,
            max_iterations: 50,
            tolerance: 1e-14,
        }
    }
}

/// Residuals below this level count as converged when Newton stagnates.
pub const RESIDUAL_FLOOR: f64 = 1e-10;

#[derive(Debug, Clone)]
struct LogMesh {
    n: usize,
    h: f64,
    s: Vec<f64>,
    /// `s_{i+½}^{N−2}` for the cells `[i, i+1]`.
    flux: Vec<f64>,
    /// `s_i^N`.
    weight: Vec<f64>,
}

impl LogMesh {
    fn new(inner: f64, outer: f64, n: usize, nf: f64) -> Result<Self> {
        if n < 5 {
            return Err(LabError::InvalidParameter(format!(
                "need at least 5 nodes, got {n}"
            )));
        }
        if !(inner > 0.0 && inner < outer) {
            return Err(LabError::DegenerateAnnulus { inner, outer });
        }
        let (t0, t1) = (inner.ln(), outer.ln());
        let h = (t1 - t0) / (n - 1) as f64;
        let s: Vec<f64> = (0..n)
            .map(|i| {
                if i == n - 1 {
                    outer
                } else {
                    (t0 + h * i as f64).exp()
                }
            })
            .collect();
        let s = {
            let mut s = s;
            s[0] = inner;
            s
        };
        let flux = (0..n - 1)
            .map(|i| (t0 + h * (i as f64 + 0.5)).exp().powf(nf - 2.0))
            .collect();
        let weight = s.iter().map(|x| x.powf(nf)).collect();
        Ok(Self {
            n,
            h,
            s,
            flux,
            weight,
        })
    }

    fn from_nodes(nodes: &[f64], nf: f64) -> Result<Self> {
        let mesh = Self::new(nodes[0], *nodes.last().unwrap(), nodes.len(), nf)?;
        let tol = 1e-10;
        if nodes
            .iter()
            .zip(&mesh.s)
            .any(|(a, b)| ((a - b) / b).abs() > tol)
        {
            return Err(LabError::InvalidParameter(
                "grid nodes are not log-uniform".into(),
            ));
        }
        Ok(mesh)
    }

    /// `(A u)_i` at interior node `i`, with `A` the scaled flux operator.
    fn apply(&self, u: &[f64], i: usize) -> f64 {
        let h2 = self.h * self.h;
        -(self.flux[i] * (u[i + 1] - u[i]) - self.flux[i - 1] * (u[i] - u[i - 1])) / h2
    }

    /// Sum of the magnitudes of the terms of `(A u)_i`.
    fn row_size(&self, u: &[f64], i: usize) -> f64 {
        let h2 = self.h * self.h;
        (self.flux[i] * (u[i + 1].abs() + u[i].abs())
            + self.flux[i - 1] * (u[i].abs() + u[i - 1].abs()))
            / h2
    }
}

fn positive_part_pow(u: f64, p: f64) -> f64 {
    if u > 0.0 {
        u.powf(p)
    } else {
        0.0
    }
}

struct Residual {
    vector: Vec<f64>,
    /// Row magnitudes `Σ|terms|` used to scale `vector`.
    sizes: Vec<f64>,
    relative: f64,
}

impl Residual {
    /// `‖F / size‖₂` with the row sizes of `scaling`, so that successive
    /// iterates are compared in one fixed norm.
    fn merit(&self, scaling: &Residual) -> f64 {
        self.vector
            .iter()
            .zip(&scaling.sizes)
            .filter(|(_, s)| **s > 0.0)
            .map(|(f, s)| (f / s).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Componentwise backward error: each row `F_i` is measured against the
/// sum of the magnitudes of its own terms, so rows near the hole (scaled by
/// a tiny `s^N`) and rows at the peak count alike.
fn residual(mesh: &LogMesh, u: &[f64], mu: f64, p: f64) -> Residual {
    let n = mesh.n;
    let mut vector = vec![0.0; n];
    let mut sizes = vec![0.0; n];
    let mut worst: f64 = 0.0;
    for i in 1..n - 1 {
        let src = mesh.weight[i] * mu * positive_part_pow(u[i], p);
        vector[i] = mesh.apply(u, i) - src;
        sizes[i] = mesh.row_size(u, i) + src;
        if sizes[i] > 0.0 {
            worst = worst.max(vector[i].abs() / sizes[i]);
        }
    }
    Residual {
        vector,
        sizes,
        relative: worst,
    }
}

/// Thomas algorithm; `lower[i]`, `diag[i]`, `upper[i]` for rows `0..m`.
fn solve_tridiagonal(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &[f64]) -> Option<Vec<f64>> {
    let m = diag.len();
    let mut c = vec![0.0; m];
    let mut d = vec![0.0; m];
    let mut piv = diag[0];
    if piv == 0.0 || !piv.is_finite() {
        return None;
    }
    c[0] = upper[0] / piv;
    d[0] = rhs[0] / piv;
    for i in 1..m {
        piv = diag[i] - lower[i] * c[i - 1];
        if piv == 0.0 || !piv.is_finite() {
            return None;
        }
        c[i] = if i + 1 < m { upper[i] / piv } else { 0.0 };
        d[i] = (rhs[i] - lower[i] * d[i - 1]) / piv;
    }
    let mut x = vec![0.0; m];
    x[m - 1] = d[m - 1];
    for i in (0..m - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    Some(x)
}

/// Linear interpolation in `log s`, zero outside the sampled range.
fn interpolate_log(grid: &RadialGrid, s: f64) -> f64 {
    let nodes = &grid.nodes;
    if s <= nodes[0] || s >= *nodes.last().unwrap() {
        return 0.0;
    }
    let t0 = nodes[0].ln();
    let h = (nodes.last().unwrap().ln() - t0) / (nodes.len() - 1) as f64;
    let x = (s.ln() - t0) / h;
    let i = (x.floor() as usize).min(nodes.len() - 2);
    let w = x - i as f64;
    grid.values[i] * (1.0 - w) + grid.values[i + 1] * w
}

fn initial_values(
    problem: &RadialProblem,
    epsilon: f64,
    mesh: &LogMesh,
    guess: &InitialGuess,
) -> Result<Vec<f64>> {
    let dims = problem.dims;
    let bubble_guess = |d: f64| -> Result<Vec<f64>> {
        let delta = d * epsilon.sqrt();
        let proj = project_bubble_radial(
            problem.inner_radius(epsilon),
            problem.ball_radius,
            BubbleParams::centered(delta, dims)?,
        )?;
        let amp = problem.amplitude();
        Ok(mesh
            .s
            .iter()
            .map(|&s| (amp * proj.value(s)).max(0.0))
            .collect())
    };
    let mut u = match guess {
        InitialGuess::BubbleAnsatz => bubble_guess(problem.reduced_model()?.d_tilde()[0])?,
        InitialGuess::Bubble { d } => bubble_guess(*d)?,
        InitialGuess::Zero => vec![0.0; mesh.n],
        InitialGuess::Profile(prev) => {
            if prev.dims.n != dims.n {
                return Err(LabError::DimensionMismatch(
                    "profile from another dimension".into(),
                ));
            }
            // δ ∝ √ε: u_new(s) = λ^{(N−2)/2} u_old(λ s), λ = δ_old / δ_new.
            let eps_old = grid_epsilon(prev, problem);
            let lambda = (eps_old / epsilon).sqrt();
            let k = dims.half_gap();
            mesh.s
                .iter()
                .map(|&s| lambda.powf(k) * interpolate_log(prev, lambda * s))
                .collect()
        }
    };
    u[0] = 0.0;
    u[mesh.n - 1] = 0.0;
    Ok(u)
}

fn grid_epsilon(grid: &RadialGrid, problem: &RadialProblem) -> f64 {
    grid.nodes[0] / problem.hole_r
}

/// Newton solve of the discrete problem at `ε`.
pub fn solve_radial(
    problem: &RadialProblem,
    epsilon: f64,
    initial: &InitialGuess,
    opts: SolverOptions,
) -> Result<(RadialGrid, ConcentrationMetrics)> {
    problem.check_epsilon(epsilon)?;
    let dims = problem.dims;
    let p = dims.p;
    let mu = problem.mu;
    let mesh = LogMesh::new(
        problem.inner_radius(epsilon),
        problem.ball_radius,
        opts.nodes,
        dims.nf(),
    )?;
    let mut u = initial_values(problem, epsilon, &mesh, initial)?;
    let n = mesh.n;
    let h2 = mesh.h * mesh.h;

    let mut res = residual(&mesh, &u, mu, p);
    let mut history = vec![res.relative];
    let mut iterations = 0;
    let mut converged = res.relative <= opts.tolerance;
    while !converged && iterations < opts.max_iterations {
        iterations += 1;
        let m = n - 2;
        let mut lower = vec![0.0; m];
        let mut diag = vec![0.0; m];
        let mut upper = vec![0.0; m];
        let mut rhs = vec![0.0; m];
        for r in 0..m {
            let i = r + 1;
            lower[r] = -mesh.flux[i - 1] / h2;
            upper[r] = -mesh.flux[i] / h2;
            diag[r] = (mesh.flux[i] + mesh.flux[i - 1]) / h2
                - mesh.weight[i] * mu * p * positive_part_pow(u[i], p - 1.0);
            rhs[r] = -res.vector[i];
        }
        let step = solve_tridiagonal(&lower, &diag, &upper, &rhs).ok_or_else(|| {
            LabError::NewtonDiverged {
                iterations,
                residual: res.relative,
                history: history.clone(),
            }
        })?;

        let mut lambda = 1.0;
        let accepted = loop {
            let trial: Vec<f64> = (0..n)
                .map(|i| {
                    if i == 0 || i == n - 1 {
                        0.0
                    } else {
                        u[i] + lambda * step[i - 1]
                    }
                })
                .collect();
            let tr = residual(&mesh, &trial, mu, p);
            if tr.merit(&res) <= (1.0 - 1e-4 * lambda) * res.merit(&res)
                || tr.relative <= opts.tolerance
            {
                break Some((trial, tr));
            }
            lambda *= 0.5;
            if lambda < 1.0 / 1024.0 {
                break None;
            }
        };
        match accepted {
            Some((trial, tr)) => {
                let previous = res.relative;
                u = trial;
                res = tr;
                history.push(res.relative);
                let stalled = res.relative > 0.5 * previous;
                converged =
                    res.relative <= opts.tolerance || (stalled && res.relative <= RESIDUAL_FLOOR);
            }
            None => {
                // No descent left: accept only a round-off limited iterate.
                converged = res.relative <= RESIDUAL_FLOOR;
                break;
            }
        }
    }
    if !converged {
        return Err(LabError::NewtonDiverged {
            iterations,
            residual: res.relative,
            history,
        });
    }

    let umax = u.iter().copied().fold(0.0, f64::max);
    if umax <= 1e-10 * dims.alpha * problem.amplitude() {
        return Err(LabError::TrivialBranch);
    }
    let grid = RadialGrid {
        nodes: mesh.s.clone(),
        values: u,
        dims,
        mu,
    };
    let (peak_value, rpeak) = refined_peak(&grid);
    let delta_est = (dims.alpha * problem.amplitude() / peak_value).powf(2.0 / (dims.nf() - 2.0));
    let spec = CouplingSpec::single_group(dims.n, vec![mu], vec![vec![mu]])?;
    let energy = energy_of_solution(std::slice::from_ref(&grid), &spec)?;
    let metrics = ConcentrationMetrics {
        epsilon,
        umax: peak_value,
        rpeak,
        delta_est,
        d_est: delta_est / epsilon.sqrt(),
        energy,
        iterations,
        residual: res.relative,
        residual_history: history,
    };
    Ok((grid, metrics))
}

/// Peak value and radius by a parabola through the largest sample and its
/// neighbors, in `log s`.
fn refined_peak(grid: &RadialGrid) -> (f64, f64) {
    let (i, _) =
        grid.values.iter().enumerate().fold(
            (0, f64::MIN),
            |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc },
        );
    let v = &grid.values;
    if i == 0 || i + 1 >= v.len() {
        return (v[i], grid.nodes[i]);
    }
    let (a, b, c) = (v[i - 1], v[i], v[i + 1]);
    let den = a - 2.0 * b + c;
    if den >= 0.0 {
        return (b, grid.nodes[i]);
    }
    let x = 0.5 * (a - c) / den;
    let h = (grid.nodes[i + 1] / grid.nodes[i]).ln();
    (b - 0.25 * (a - c) * x, grid.nodes[i] * (x * h).exp())
}

/// Number of sign changes of the discrete derivative over the interior.
pub fn derivative_sign_changes(grid: &RadialGrid) -> usize {
    let d: Vec<f64> = grid
        .values
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|x| *x != 0.0)
        .collect();
    d.windows(2)
        .filter(|w| w[0].signum() != w[1].signum())
        .count()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub solver: SolverOptions,
    /// Independent continuation chains solved in parallel.
    pub chains: usize,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            solver: SolverOptions::default(),
            chains: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    /// Decreasing.
    pub epsilons: Vec<f64>,
    pub metrics: Vec<ConcentrationMetrics>,
    #[serde(skip)]
    pub profiles: Vec<RadialGrid>,
    pub slope: f64,
    pub r2: f64,
    /// `d_est` at the smallest `ε`.
    pub d_est: f64,
    pub d_tilde: f64,
    pub d_relative_error: f64,
    /// `(max − min) / mean` of `d_est` over the last three points.
    pub d_spread_last3: f64,
    /// `(J_ε(u) − expansion) / ε^{(N−2)/2}` per point.
    pub energy_gaps: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("{error}")]
pub struct SweepFailure {
    /// Metrics of the solves that completed, in decreasing `ε`.
    pub partial: Vec<ConcentrationMetrics>,
    pub error: LabError,
}

/// Geometric grid of `count` values from `hi` down to `lo`.
pub fn geometric_grid(hi: f64, lo: f64, count: usize) -> Vec<f64> {
    (0..count)
        .map(|k| hi * (lo / hi).powf(k as f64 / (count - 1).max(1) as f64))
        .collect()
}

fn run_chain(
    problem: &RadialProblem,
    epsilons: &[f64],
    opts: SolverOptions,
) -> Vec<std::result::Result<(RadialGrid, ConcentrationMetrics), LabError>> {
    let mut out = Vec::with_capacity(epsilons.len());
    let mut previous: Option<RadialGrid> = None;
    for &e in epsilons {
        let attempt = match &previous {
            Some(prev) => solve_radial(problem, e, &InitialGuess::Profile(prev.clone()), opts)
                .or_else(|_| solve_radial(problem, e, &InitialGuess::BubbleAnsatz, opts)),
            None => solve_radial(problem, e, &InitialGuess::BubbleAnsatz, opts),
        };
        match attempt {
            Ok((g, m)) => {
                previous = Some(g.clone());
                out.push(Ok((g, m)));
            }
            Err(err) => {
                out.push(Err(err));
                break;
            }
        }
    }
    out
}

/// Solves along a decreasing `ε` grid with continuation and fits
/// `log δ_est` against `log ε`.
pub fn rate_sweep(
    problem: &RadialProblem,
    epsilons: &[f64],
    opts: &SweepOptions,
) -> std::result::Result<SweepReport, SweepFailure> {
    let fail = |partial, error| SweepFailure { partial, error };
    if epsilons.len() < 3 {
        return Err(fail(
            vec![],
            LabError::InvalidParameter("sweep needs at least three epsilons".into()),
        ));
    }
    let mut eps = epsilons.to_vec();
    eps.sort_by(|a, b| b.total_cmp(a));
    if eps.windows(2).any(|w| w[0] == w[1]) {
        return Err(fail(
            vec![],
            LabError::InvalidParameter("repeated epsilon in sweep".into()),
        ));
    }
    for &e in &eps {
        if let Err(err) = problem.check_epsilon(e) {
            return Err(fail(vec![], err));
        }
    }

    let chains = opts.chains.clamp(1, eps.len());
    let chunk = eps.len().div_ceil(chains);
    let results: Vec<_> = eps
        .par_chunks(chunk)
        .map(|c| run_chain(problem, c, opts.solver))
        .collect();

    let mut profiles = Vec::new();
    let mut metrics = Vec::new();
    let mut first_error = None;
    for (ci, chain) in results.into_iter().enumerate() {
        for (j, r) in chain.into_iter().enumerate() {
            match r {
                Ok((g, m)) => {
                    profiles.push(g);
                    metrics.push(m);
                }
                Err(e) if first_error.is_none() => {
                    first_error = Some((eps[ci * chunk + j], e));
                }
                Err(_) => {}
            }
        }
    }
    if let Some((epsilon, reason)) = first_error {
        let completed = metrics.len();
        return Err(fail(
            metrics,
            LabError::SweepAborted {
                epsilon,
                completed,
                reason: Box::new(reason),
            },
        ));
    }

    let summarize = || -> Result<SweepReport> {
        let deltas: Vec<f64> = metrics.iter().map(|m| m.delta_est).collect();
        let fit = loglog_fit(&eps, &deltas)?;
        let model = problem.reduced_model()?;
        let d_tilde = model.d_tilde()[0];
        let d_est = metrics.last().unwrap().d_est;
        let tail: Vec<f64> = metrics.iter().rev().take(3).map(|m| m.d_est).collect();
        let mean = tail.iter().sum::<f64>() / tail.len() as f64;
        let spread = (tail.iter().copied().fold(f64::MIN, f64::max)
            - tail.iter().copied().fold(f64::MAX, f64::min))
            / mean;
        let k = problem.dims.half_gap();
        let energy_gaps = metrics
            .iter()
            .map(|m| Ok((m.energy - energy_expansion(&model, m.epsilon)?) / m.epsilon.powf(k)))
            .collect::<Result<Vec<f64>>>()?;
        Ok(SweepReport {
            epsilons: eps.clone(),
            slope: fit.slope,
            r2: fit.r2,
            d_est,
            d_tilde,
            d_relative_error: (d_est - d_tilde).abs() / d_tilde,
            d_spread_last3: spread,
            energy_gaps,
            metrics: metrics.clone(),
            profiles: profiles.clone(),
        })
    };
    summarize().map_err(|e| fail(metrics.clone(), e))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementStudy {
    pub nodes: usize,
    pub delta_coarse: f64,
    pub delta_fine: f64,
    pub relative_change: f64,
}

/// `δ_est` at `nodes` and at `2·nodes − 1` (every coarse node kept).
pub fn refinement_study(
    problem: &RadialProblem,
    epsilon: f64,
    opts: SolverOptions,
) -> Result<RefinementStudy> {
    let (_, coarse) = solve_radial(problem, epsilon, &InitialGuess::BubbleAnsatz, opts)?;
    let fine_opts = SolverOptions {
        nodes: 2 * opts.nodes - 1,
        ..opts
    };
    let (_, fine) = solve_radial(problem, epsilon, &InitialGuess::BubbleAnsatz, fine_opts)?;
    Ok(RefinementStudy {
        nodes: opts.nodes,
        delta_coarse: coarse.delta_est,
        delta_fine: fine.delta_est,
        relative_change: (coarse.delta_est - fine.delta_est).abs() / fine.delta_est,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupComposition {
    pub components: Vec<RadialGrid>,
    /// Componentwise backward error of each system equation.
    pub residuals: Vec<f64>,
    /// Same measure for the scalar profile `w`.
    pub scalar_residual: f64,
    /// Deviation of each equation's discrete residual from `c_i` times the
    /// scalar one, written in the log variable (`−u_tt − (N−2)u_t = s² f`)
    /// and relative to `‖c_i s² w^p‖∞`.
    pub identity_defects: Vec<f64>,
}

/// `u_i = c_i w` for the group of `c`, with the discrete residual of
/// `−Δu_i − μ_i u_i^p − Σ_{j≠i} β_ij u_j^{(p+1)/2} u_i^{(p−1)/2}`.
pub fn compose_group_solution(
    spec: &CouplingSpec,
    c: &CVector,
    w: &RadialGrid,
) -> Result<GroupComposition> {
    let range = spec.group(c.group)?;
    if c.c.len() != range.len() {
        return Err(LabError::DimensionMismatch(format!(
            "group {} has {} components, amplitude vector has {}",
            c.group,
            range.len(),
            c.c.len()
        )));
    }
    if w.dims.n != spec.n {
        return Err(LabError::DimensionMismatch(format!(
            "profile in R^{} for a system in R^{}",
            w.dims.n, spec.n
        )));
    }
    if (w.mu - 1.0).abs() > 1e-14 {
        return Err(LabError::InvalidParameter(format!(
            "composition needs the mu = 1 scalar profile, got mu = {}",
            w.mu
        )));
    }
    let dims = w.dims;
    let p = dims.p;
    let mesh = LogMesh::from_nodes(&w.nodes, dims.nf())?;
    let n = mesh.n;
    let block = spec.block(c.group)?;
    let k = c.c.len();

    let components: Vec<RadialGrid> =
        c.c.iter()
            .map(|ci| RadialGrid {
                nodes: w.nodes.clone(),
                values: w.values.iter().map(|v| ci * v).collect(),
                dims,
                mu: 1.0,
            })
            .collect();
    let scalar = residual(&mesh, &w.values, 1.0, p);

    let mut residuals = Vec::with_capacity(k);
    let mut defects = Vec::with_capacity(k);
    for i in 0..k {
        let ui = &components[i].values;
        let mut rmax: f64 = 0.0;
        let mut dmax: f64 = 0.0;
        let mut fmax: f64 = 0.0;
        for node in 1..n - 1 {
            let mut src = block[(i, i)] * positive_part_pow(ui[node], p);
            for j in 0..k {
                if j != i {
                    let uj = components[j].values[node];
                    src += block[(i, j)]
                        * positive_part_pow(uj, (p + 1.0) / 2.0)
                        * positive_part_pow(ui[node], (p - 1.0) / 2.0);
                }
            }
            let wt = mesh.weight[node];
            let r = mesh.apply(ui, node) - wt * src;
            rmax = rmax.max(r.abs() / (mesh.row_size(ui, node) + wt * src.abs()));
            // In the log variable the rows carry s^{N−2}; dividing it out
            // leaves −u_tt − (N−2)u_t − s² f(u), uniform in s.
            let t_scale = mesh.s[node].powf(dims.nf() - 2.0);
            dmax = dmax.max((r - c.c[i] * scalar.vector[node]).abs() / t_scale);
            fmax = fmax.max((c.c[i] * wt / t_scale * positive_part_pow(w.values[node], p)).abs());
        }
        residuals.push(rmax);
        defects.push(dmax / fmax);
    }
    Ok(GroupComposition {
        components,
        residuals,
        scalar_residual: scalar.relative,
        identity_defects: defects,
    })
}

/// Discrete action
/// `J = Σ_i ∫ ½|∇u_i|² − μ_i F(u_i) − (2/(p+1)) Σ_{i<j} β_ij |u_i|^{(p+1)/2} |u_j|^{(p+1)/2}`
/// with `F(t) = t₊^{p+1}/(p+1)`, in the radial measure `ω_{N−1} s^{N−1} ds`:
/// cell differences for the gradient and the trapezoid rule in `log s` for
/// the potential, matching the solver's discretization.
pub fn energy_of_solution(grids: &[RadialGrid], spec: &CouplingSpec) -> Result<f64> {
    let first = grids
        .first()
        .ok_or_else(|| LabError::InvalidParameter("no grids".into()))?;
    if grids.len() != spec.m() {
        return Err(LabError::DimensionMismatch(format!(
            "{} grids for {} components",
            grids.len(),
            spec.m()
        )));
    }
    if grids
        .iter()
        .any(|g| g.nodes != first.nodes || g.values.len() != g.nodes.len() || g.dims != first.dims)
    {
        return Err(LabError::DimensionMismatch(
            "grids do not share nodes".into(),
        ));
    }
    if first.dims.n != spec.n {
        return Err(LabError::DimensionMismatch(format!(
            "grids in R^{} for a system in R^{}",
            first.dims.n, spec.n
        )));
    }
    let dims = first.dims;
    let p = dims.p;
    let mesh = LogMesh::from_nodes(&first.nodes, dims.nf())?;
    let n = mesh.n;
    let h = mesh.h;
    let trap = |i: usize| if i == 0 || i == n - 1 { 0.5 } else { 1.0 };

    let mut total = 0.0;
    for g in grids {
        let u = &g.values;
        total += (0..n - 1)
            .map(|i| 0.5 * mesh.flux[i] * (u[i + 1] - u[i]).powi(2) / h)
            .sum::<f64>();
    }
    for i in 0..spec.m() {
        let u = &grids[i].values;
        total -= spec.mu[i] / (p + 1.0)
            * (0..n)
                .map(|k| trap(k) * h * mesh.weight[k] * positive_part_pow(u[k], p + 1.0))
                .sum::<f64>();
        for (j, other) in grids.iter().enumerate().skip(i + 1) {
            let v = &other.values;
            total -= 2.0 / (p + 1.0)
                * spec.beta[i][j]
                * (0..n)
                    .map(|k| {
                        trap(k)
                            * h
                            * mesh.weight[k]
                            * u[k].abs().powf((p + 1.0) / 2.0)
                            * v[k].abs().powf((p + 1.0) / 2.0)
                    })
                    .sum::<f64>();
        }
    }
    Ok(dims.omega_sphere * total)
}

/// The initial guess sampled on the solver's mesh.
pub fn guess_grid(
    problem: &RadialProblem,
    epsilon: f64,
    guess: &InitialGuess,
    nodes: usize,
) -> Result<RadialGrid> {
    problem.check_epsilon(epsilon)?;
    let mesh = LogMesh::new(
        problem.inner_radius(epsilon),
        problem.ball_radius,
        nodes,
        problem.dims.nf(),
    )?;
    let values = initial_values(problem, epsilon, &mesh, guess)?;
    Ok(RadialGrid {
        nodes: mesh.s,
        values,
        dims: problem.dims,
        mu: problem.mu,
    })
}

/// `max_{t>0} J(t v)` for the scalar action with mass `grid.mu`.
///
/// The concentrating solution is a mountain-pass point: along its own ray
/// it is the maximum, so a guess can have lower action than the solution
/// while the ray maximum of the guess cannot.
pub fn ray_maximum_energy(grid: &RadialGrid) -> Result<f64> {
    let spec = CouplingSpec::single_group(grid.dims.n, vec![grid.mu], vec![vec![grid.mu]])?;
    let p = grid.dims.p;
    // J(tv) = t² A/2 − t^{p+1} B/(p+1); split J(v) by evaluating at t = 1, 2.
    let j1 = energy_of_solution(std::slice::from_ref(grid), &spec)?;
    let doubled = RadialGrid {
        values: grid.values.iter().map(|v| 2.0 * v).collect(),
        ..grid.clone()
    };
    let j2 = energy_of_solution(&[doubled], &spec)?;
    let two_p = 2f64.powf(p + 1.0);
    let b = (4.0 * j1 - j2) / (two_p - 4.0) * (p + 1.0);
    let a = 2.0 * (j1 + b / (p + 1.0));
    if !(a > 0.0 && b > 0.0) {
        return Err(LabError::InvalidParameter(
            "profile has no positive ray maximum".into(),
        ));
    }
    Ok((0.5 - 1.0 / (p + 1.0)) * a.powf((p + 1.0) / (p - 1.0)) / b.powf(2.0 / (p - 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coupling::solve_c_vector;

    fn problem(n: usize, r: f64, mu: f64) -> RadialProblem {
        RadialProblem::new(DimensionConstants::new(n).unwrap(), 1.0, r, mu).unwrap()
    }

    #[test]
    fn thomas_matches_dense_solve() {
        let lower = [0.0, 1.0, -2.0, 0.5];
        let diag = [4.0, -3.0, 5.0, 2.0];
        let upper = [1.0, 0.7, 1.5, 0.0];
        let x = [1.0, -2.0, 0.5, 3.0];
        let rhs: Vec<f64> = (0..4)
            .map(|i| {
                diag[i] * x[i]
                    + if i > 0 { lower[i] * x[i - 1] } else { 0.0 }
                    + if i < 3 { upper[i] * x[i + 1] } else { 0.0 }
            })
            .collect();
        let sol = solve_tridiagonal(&lower, &diag, &upper, &rhs).unwrap();
        for (a, b) in sol.iter().zip(x) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn converges_to_single_positive_peak() {
        let pb = problem(4, 1.0, 1.0);
        let (g, m) = solve_radial(
            &pb,
            1e-3,
            &InitialGuess::BubbleAnsatz,
            SolverOptions::default(),
        )
        .unwrap();
        assert!(m.residual < 1e-10, "{m:?}");
        assert!(g.values[1..g.values.len() - 1].iter().all(|v| *v > 0.0));
        assert_eq!(derivative_sign_changes(&g), 1);
        assert!(m.rpeak > g.nodes[0] && m.rpeak < 1.0);
        assert!(m.iterations <= 10);
    }

    #[test]
    fn zero_guess_is_trivial() {
        let pb = problem(4, 1.0, 1.0);
        assert_eq!(
            solve_radial(&pb, 1e-3, &InitialGuess::Zero, SolverOptions::default()).unwrap_err(),
            LabError::TrivialBranch
        );
    }

    #[test]
    fn newton_lowers_the_action() {
        for n in [3, 4] {
            let pb = problem(n, 1.0, 1.0);
            let (g, m) = solve_radial(
                &pb,
                1e-3,
                &InitialGuess::BubbleAnsatz,
                SolverOptions::default(),
            )
            .unwrap();
            let guess = guess_grid(&pb, 1e-3, &InitialGuess::BubbleAnsatz, 2000).unwrap();
            let top = ray_maximum_energy(&guess).unwrap();
            assert!(m.energy < top, "N={n}: {} vs {}", m.energy, top);
            // The solution is its own ray maximum.
            let own = ray_maximum_energy(&g).unwrap();
            assert!((own - m.energy).abs() < 1e-8 * m.energy);
        }
    }

    #[test]
    fn dimension_three_and_mass_scaling() {
        let pb = problem(3, 1.0, 2.0);
        let (g, m) = solve_radial(
            &pb,
            1e-3,
            &InitialGuess::BubbleAnsatz,
            SolverOptions::default(),
        )
        .unwrap();
        assert!(m.residual < 1e-10);
        // μ rescales the solution of the μ = 1 problem by μ^{−1/(p−1)}.
        let unit = problem(3, 1.0, 1.0);
        let (w, _) = solve_radial(
            &unit,
            1e-3,
            &InitialGuess::BubbleAnsatz,
            SolverOptions::default(),
        )
        .unwrap();
        let amp = pb.amplitude();
        for (a, b) in g.values.iter().zip(&w.values) {
            assert!((a - amp * b).abs() < 1e-8 * amp * m.umax.max(1.0));
        }
    }

    #[test]
    fn continuation_from_previous_profile() {
        let pb = problem(4, 1.0, 1.0);
        let opts = SolverOptions::default();
        let (g, _) = solve_radial(&pb, 1e-3, &InitialGuess::BubbleAnsatz, opts).unwrap();
        let (_, a) = solve_radial(&pb, 5e-4, &InitialGuess::Profile(g), opts).unwrap();
        let (_, b) = solve_radial(&pb, 5e-4, &InitialGuess::BubbleAnsatz, opts).unwrap();
        assert!(
            (a.delta_est - b.delta_est).abs() < 1e-7 * b.delta_est,
            "{:?} {:?}",
            a,
            b
        );
    }

    #[test]
    fn composition_identity() {
        let spec =
            CouplingSpec::single_group(4, vec![1.0, 2.0], vec![vec![1.0, -0.5], vec![-0.5, 2.0]])
                .unwrap();
        let c = solve_c_vector(&spec, 0).unwrap();
        let pb = problem(4, 1.0, 1.0);
        let (w, _) = solve_radial(
            &pb,
            1e-3,
            &InitialGuess::BubbleAnsatz,
            SolverOptions::default(),
        )
        .unwrap();
        let comp = compose_group_solution(&spec, &c, &w).unwrap();
        assert!(
            comp.identity_defects.iter().all(|d| *d < 1e-10),
            "{:?}",
            comp.identity_defects
        );

        let mut bad = c.clone();
        bad.c[0] *= 1.01;
        let comp = compose_group_solution(&spec, &bad, &w).unwrap();
        assert!(
            comp.identity_defects[0] > 1e-3,
            "{:?}",
            comp.identity_defects
        );

        let one = CouplingSpec::single_group(4, vec![1.0], vec![vec![1.0]]).unwrap();
        let c1 = solve_c_vector(&one, 0).unwrap();
        let comp = compose_group_solution(&one, &c1, &w).unwrap();
        assert_eq!(comp.components[0].values, w.values);
    }

    #[test]
    fn action_of_zero_and_mismatches() {
        let pb = problem(4, 1.0, 1.0);
        let mesh = LogMesh::new(1e-3, 1.0, 50, 4.0).unwrap();
        let zero = RadialGrid {
            nodes: mesh.s.clone(),
            values: vec![0.0; 50],
            dims: pb.dims,
            mu: 1.0,
        };
        let spec = CouplingSpec::single_group(4, vec![1.0], vec![vec![1.0]]).unwrap();
        assert_eq!(
            energy_of_solution(std::slice::from_ref(&zero), &spec).unwrap(),
            0.0
        );
        assert!(energy_of_solution(&[zero.clone(), zero.clone()], &spec).is_err());
        let mut other = zero.clone();
        other.nodes[3] *= 1.01;
        let spec2 =
            CouplingSpec::single_group(4, vec![1.0, 1.0], vec![vec![1.0, 0.1], vec![0.1, 1.0]])
                .unwrap();
        assert!(energy_of_solution(&[zero, other], &spec2).is_err());
    }

    #[test]
    fn degenerate_hole() {
        let pb = problem(4, 2.0, 1.0);
        assert!(matches!(
            solve_radial(
                &pb,
                0.6,
                &InitialGuess::BubbleAnsatz,
                SolverOptions::default()
            ),
            Err(LabError::DegenerateAnnulus { .. })
        ));
    }
}
