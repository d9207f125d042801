//! Task orchestration. The coupling chain (amplitudes, spectrum, reduced
//! energy, critical point) runs in order; scaling checks and the radial
//! sweep do not depend on it and run alongside.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};

use coron_core::asymptotics::{
    default_delta_grid, remainder_sweep, scaling_law_pair, scaling_law_single,
    scaling_law_weighted, PairGeometry, ScalingFit, SingleDomain,
};
use coron_core::bubbles::DimensionConstants;
use coron_core::coupling::{
    amplitude_residual, boundary_c_vector, build_spectrum, solve_c_vector, CVector, CouplingSpec,
    Verdict,
};
use coron_core::energy::{
    critical_point, critical_point_newton, energy_expansion, gamma_monte_carlo, psi_eval,
    ReducedEnergyModel, ReducedPoint,
};
use coron_core::green::{kernel_robin, Ball, PerforatedDomain};
use coron_core::radial::{
    compose_group_solution, rate_sweep, RadialProblem, SolverOptions, SweepOptions,
};
use coron_core::LabError;

use crate::config::{ExperimentConfig, ScalingLaw, Task};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Pass,
    Fail,
    Degenerate,
    Inconclusive,
    Error,
}

/// A reported number (or array of numbers) and where it came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Quantity {
    pub name: String,
    pub module: &'static str,
    pub operation: &'static str,
    pub value: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub module: &'static str,
    pub operation: &'static str,
    pub outcome: Outcome,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskError {
    pub module: &'static str,
    pub operation: &'static str,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Timing {
    pub module: &'static str,
    pub operation: &'static str,
    pub elapsed_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaskReport {
    pub task: Task,
    pub outcome: Outcome,
    pub inputs: Vec<Quantity>,
    pub outputs: Vec<Quantity>,
    pub checks: Vec<Check>,
    pub error: Option<TaskError>,
    pub timing: Timing,
}

/// A CSV table destined for `<file>`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub file: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    pub tasks: Vec<TaskReport>,
    pub tables: Vec<Table>,
}

impl RunResult {
    /// 1 on any task error, 2 on any check that did not pass, 0 otherwise.
    pub fn exit_code(&self) -> i32 {
        if self.tasks.iter().any(|t| t.outcome == Outcome::Error) {
            1
        } else if self.tasks.iter().any(|t| t.outcome != Outcome::Pass) {
            2
        } else {
            0
        }
    }
}

const M_COUPLING: &str = "coron_core::coupling";
const M_ENERGY: &str = "coron_core::energy";
const M_GREEN: &str = "coron_core::green";
const M_ASYMPTOTICS: &str = "coron_core::asymptotics";
const M_RADIAL: &str = "coron_core::radial";
const M_CLI: &str = "coron_lab::config";

/// Amplitude residual and defect tolerances of the reported checks.
pub const AMPLITUDE_TOL: f64 = 1e-10;
pub const GRADIENT_TOL: f64 = 1e-10;
pub const MIXED_BLOCK_TOL: f64 = 1e-8;
pub const SLOPE_TOL: f64 = 0.05;
pub const R2_MIN: f64 = 0.999;
pub const FLAT_SPREAD_MAX: f64 = 1e-2;
pub const RATE_SLOPE: f64 = 0.5;
pub const D_REL_TOL: f64 = 0.2;
pub const D_SPREAD_MAX: f64 = 0.1;
pub const RESIDUAL_TOL: f64 = 1e-10;
pub const COMPOSITION_TOL: f64 = 1e-10;
/// Monte Carlo agreement of `Γ(0)` in standard errors.
pub const MC_SIGMAS: f64 = 5.0;
pub const MC_SAMPLES: usize = 20_000;

struct Builder {
    task: Task,
    start: Instant,
    inputs: Vec<Quantity>,
    outputs: Vec<Quantity>,
    checks: Vec<Check>,
}

impl Builder {
    fn new(task: Task) -> Self {
        Self {
            task,
            start: Instant::now(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            checks: Vec::new(),
        }
    }

    fn input(&mut self, name: impl Into<String>, value: Value) {
        self.inputs.push(Quantity {
            name: name.into(),
            module: M_CLI,
            operation: "ExperimentConfig",
            value,
        });
    }

    fn out(
        &mut self,
        name: impl Into<String>,
        module: &'static str,
        operation: &'static str,
        value: Value,
    ) {
        self.outputs.push(Quantity {
            name: name.into(),
            module,
            operation,
            value,
        });
    }

    fn check(
        &mut self,
        name: impl Into<String>,
        module: &'static str,
        operation: &'static str,
        pass: bool,
        detail: String,
    ) {
        self.verdict(
            name,
            module,
            operation,
            if pass { Outcome::Pass } else { Outcome::Fail },
            detail,
        );
    }

    fn verdict(
        &mut self,
        name: impl Into<String>,
        module: &'static str,
        operation: &'static str,
        outcome: Outcome,
        detail: String,
    ) {
        self.checks.push(Check {
            name: name.into(),
            module,
            operation,
            outcome,
            detail,
        });
    }

    fn finish(self, error: Option<TaskError>) -> TaskReport {
        let outcome = if error.is_some() {
            Outcome::Error
        } else {
            // Worst outcome: degenerate before inconclusive before fail.
            let rank = |o: Outcome| match o {
                Outcome::Pass => 0,
                Outcome::Fail => 1,
                Outcome::Inconclusive => 2,
                Outcome::Degenerate => 3,
                Outcome::Error => 4,
            };
            self.checks
                .iter()
                .map(|c| c.outcome)
                .max_by_key(|o| rank(*o))
                .unwrap_or(Outcome::Pass)
        };
        TaskReport {
            task: self.task,
            outcome,
            inputs: self.inputs,
            outputs: self.outputs,
            checks: self.checks,
            error,
            timing: Timing {
                module: "coron_lab::pipeline",
                operation: self.task.name(),
                elapsed_ms: self.start.elapsed().as_secs_f64() * 1e3,
            },
        }
    }
}

fn fail(module: &'static str, operation: &'static str, e: impl std::fmt::Display) -> TaskError {
    TaskError {
        module,
        operation,
        message: e.to_string(),
    }
}

type Step<T> = std::result::Result<T, TaskError>;

/// Amplitudes of every group; a group on the boundary of the admissible
/// range gets its limit amplitudes, flagged with `true`.
fn amplitudes(spec: &CouplingSpec) -> Step<Vec<(CVector, bool)>> {
    (0..spec.group_count())
        .map(|h| match solve_c_vector(spec, h) {
            Ok(c) => Ok((c, false)),
            Err(e @ LabError::NoPositiveSolution(_)) => match boundary_c_vector(spec, h) {
                Ok(c) => Ok((c, true)),
                Err(_) => Err(fail(M_COUPLING, "solve_c_vector", e)),
            },
            Err(e) => Err(fail(M_COUPLING, "solve_c_vector", e)),
        })
        .collect()
}

fn spec_of(cfg: &ExperimentConfig) -> Step<CouplingSpec> {
    cfg.coupling_spec()
        .map_err(|e| fail(M_COUPLING, "CouplingSpec::new", e))
}

fn task_c_vector(cfg: &ExperimentConfig) -> TaskReport {
    let mut b = Builder::new(Task::CVector);
    b.input("mu", json!(cfg.coupling.mu));
    b.input("beta", json!(cfg.coupling.beta));
    b.input("decomposition", json!(cfg.decomposition()));
    let run = |b: &mut Builder| -> Step<()> {
        let spec = spec_of(cfg)?;
        let dims = DimensionConstants::new(cfg.dims)
            .map_err(|e| fail("coron_core::bubbles", "DimensionConstants::new", e))?;
        for (c, boundary) in amplitudes(&spec)? {
            let h = c.group;
            let block = spec
                .block(h)
                .map_err(|e| fail(M_COUPLING, "CouplingSpec::block", e))?;
            let res = amplitude_residual(&block, &c.c, dims.p)
                .iter()
                .fold(0.0f64, |a, r| a.max(r.abs()));
            b.out(
                format!("group{h}.c"),
                M_COUPLING,
                "solve_c_vector",
                json!(c.c),
            );
            b.out(
                format!("group{h}.c_squared"),
                M_COUPLING,
                "solve_c_vector",
                json!(c.c.iter().map(|v| v * v).collect::<Vec<_>>()),
            );
            b.out(
                format!("group{h}.residual"),
                M_COUPLING,
                "amplitude_residual",
                json!(res),
            );
            if boundary {
                let zeros: Vec<usize> = (0..c.c.len()).filter(|&i| c.c[i] == 0.0).collect();
                b.verdict(
                    format!("group{h}.positive"),
                    M_COUPLING,
                    "boundary_c_vector",
                    Outcome::Degenerate,
                    format!("degenerate: amplitudes vanish at components {zeros:?} (boundary of the admissible range)"),
                );
            }
            b.check(
                format!("group{h}.residual"),
                M_COUPLING,
                "amplitude_residual",
                res < AMPLITUDE_TOL,
                format!("max |residual| = {res:e} (tolerance {AMPLITUDE_TOL:e})"),
            );
        }
        Ok(())
    };
    let err = run(&mut b).err();
    b.finish(err)
}

fn verdict_outcome(v: Verdict) -> Outcome {
    match v {
        Verdict::Nondegenerate => Outcome::Pass,
        Verdict::Degenerate => Outcome::Degenerate,
        Verdict::Inconclusive => Outcome::Inconclusive,
    }
}

fn task_spectrum(cfg: &ExperimentConfig) -> TaskReport {
    let mut b = Builder::new(Task::Spectrum);
    b.input("mu", json!(cfg.coupling.mu));
    b.input("beta", json!(cfg.coupling.beta));
    let run = |b: &mut Builder| -> Step<()> {
        let spec = spec_of(cfg)?;
        for (c, _) in amplitudes(&spec)? {
            let h = c.group;
            let rep =
                build_spectrum(&spec, &c).map_err(|e| fail(M_COUPLING, "build_spectrum", e))?;
            b.out(
                format!("group{h}.lambdas"),
                M_COUPLING,
                "build_spectrum",
                json!(rep.lambdas),
            );
            b.out(
                format!("group{h}.thetas"),
                M_COUPLING,
                "build_spectrum",
                json!(rep.thetas),
            );
            b.out(
                format!("group{h}.mat_m"),
                M_COUPLING,
                "build_spectrum",
                json!(rep.mat_m),
            );
            b.out(
                format!("group{h}.det_c"),
                M_COUPLING,
                "build_spectrum",
                json!(rep.det_c),
            );
            b.out(
                format!("group{h}.det_block"),
                M_COUPLING,
                "build_spectrum",
                json!(rep.det_block),
            );
            b.out(
                format!("group{h}.principal_residual"),
                M_COUPLING,
                "build_spectrum",
                json!(rep.principal_residual),
            );
            b.verdict(
                format!("group{h}.nondegeneracy"),
                M_COUPLING,
                "nondegeneracy_check",
                verdict_outcome(rep.verdict),
                rep.verdict_reason.clone(),
            );
        }
        Ok(())
    };
    let err = run(&mut b).err();
    b.finish(err)
}

fn reduced_model(cfg: &ExperimentConfig) -> Step<(ReducedEnergyModel, Vec<f64>)> {
    let spec = spec_of(cfg)?;
    let dims = DimensionConstants::new(cfg.dims)
        .map_err(|e| fail("coron_core::bubbles", "DimensionConstants::new", e))?;
    let ball = Ball::new(cfg.ball_center(), cfg.domain.ball.radius)
        .map_err(|e| fail(M_GREEN, "Ball::new", e))?;
    PerforatedDomain::new(ball.clone(), cfg.domain.holes.clone(), cfg.max_epsilon())
        .map_err(|e| fail(M_GREEN, "PerforatedDomain::new", e))?;
    let amps = amplitudes(&spec)?;
    if amps.len() != cfg.domain.holes.len() {
        return Err(fail(
            M_ENERGY,
            "ReducedEnergyModel::new",
            format!("{} groups but {} holes", amps.len(), cfg.domain.holes.len()),
        ));
    }
    // A group u_i = c_i w carries the energy of Σ c_i² scalar profiles.
    let weights: Vec<f64> = amps
        .iter()
        .map(|(c, _)| c.c.iter().map(|v| v * v).sum())
        .collect();
    let robin = cfg
        .domain
        .holes
        .iter()
        .map(|h| kernel_robin(&ball, &h.center))
        .collect::<coron_core::Result<Vec<f64>>>()
        .map_err(|e| fail(M_GREEN, "kernel_robin", e))?;
    let hole_r = cfg.domain.holes.iter().map(|h| h.radius_coeff).collect();
    let model = ReducedEnergyModel::new(dims, weights, robin.clone(), hole_r)
        .map_err(|e| fail(M_ENERGY, "ReducedEnergyModel::new", e))?;
    Ok((model, robin))
}

fn task_reduced_energy(cfg: &ExperimentConfig, seed: u64) -> TaskReport {
    let mut b = Builder::new(Task::ReducedEnergy);
    b.input("ball_radius", json!(cfg.domain.ball.radius));
    b.input("holes", json!(cfg.domain.holes));
    b.input("epsilon_grid", json!(cfg.reduction.epsilon_grid));
    b.input("seed", json!(seed));
    let run = |b: &mut Builder| -> Step<()> {
        let (model, robin) = reduced_model(cfg)?;
        b.out("b1", M_ENERGY, "constant_b1", json!(model.b1));
        b.out("b2", M_ENERGY, "constant_b2", json!(model.b2));
        b.out("gamma0", M_ENERGY, "gamma_kernel", json!(model.gamma0));
        b.out(
            "weights",
            M_ENERGY,
            "ReducedEnergyModel::new",
            json!(model.weights),
        );
        b.out("robin", M_GREEN, "kernel_robin", json!(robin));
        let d = model.d_tilde();
        b.out("d_tilde", M_ENERGY, "ReducedEnergyModel::d_tilde", json!(d));
        let psi = psi_eval(&model, &ReducedPoint::at_origin(d, cfg.dims))
            .map_err(|e| fail(M_ENERGY, "psi_eval", e))?;
        b.out("psi_at_d_tilde", M_ENERGY, "psi_eval", json!(psi));
        let expansion = cfg
            .reduction
            .epsilon_grid
            .iter()
            .map(|&e| energy_expansion(&model, e).map(|v| json!({ "epsilon": e, "energy": v })))
            .collect::<coron_core::Result<Vec<Value>>>()
            .map_err(|e| fail(M_ENERGY, "energy_expansion", e))?;
        b.out(
            "energy_expansion",
            M_ENERGY,
            "energy_expansion",
            json!(expansion),
        );

        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mean, se) = gamma_monte_carlo(&model.dims, &vec![0.0; cfg.dims], MC_SAMPLES, &mut rng)
            .map_err(|e| fail(M_ENERGY, "gamma_monte_carlo", e))?;
        b.out(
            "gamma0_monte_carlo",
            M_ENERGY,
            "gamma_monte_carlo",
            json!({ "mean": mean, "standard_error": se }),
        );
        let z = (mean - model.gamma0).abs() / se;
        b.check(
            "gamma0.monte_carlo",
            M_ENERGY,
            "gamma_monte_carlo",
            z < MC_SIGMAS,
            format!("|mean − Γ(0)| = {z:.2} standard errors (limit {MC_SIGMAS})"),
        );
        Ok(())
    };
    let err = run(&mut b).err();
    b.finish(err)
}

fn task_critical_point(cfg: &ExperimentConfig) -> TaskReport {
    let mut b = Builder::new(Task::CriticalPoint);
    b.input("eta", json!(cfg.reduction.eta));
    let run = |b: &mut Builder| -> Step<()> {
        let (model, _) = reduced_model(cfg)?;
        let rep = critical_point(&model, cfg.reduction.eta)
            .map_err(|e| fail(M_ENERGY, "critical_point", e))?;
        b.out("d", M_ENERGY, "critical_point", json!(rep.point.d));
        b.out("tau", M_ENERGY, "critical_point", json!(rep.point.tau));
        b.out(
            "grad_norm",
            M_ENERGY,
            "critical_point",
            json!(rep.grad_norm),
        );
        b.out(
            "mixed_block_max",
            M_ENERGY,
            "critical_point",
            json!(rep.mixed_block_max),
        );
        b.out(
            "d_block_eigenvalues",
            M_ENERGY,
            "critical_point",
            json!(rep.d_block_eigenvalues),
        );
        b.out(
            "tau_block_eigenvalues",
            M_ENERGY,
            "critical_point",
            json!(rep.tau_block_eigenvalues),
        );

        // Newton from a perturbed start must return to the closed form.
        let start = ReducedPoint::new(
            rep.point.d.iter().map(|d| 1.2 * d).collect(),
            vec![vec![0.0; cfg.dims]; model.peaks()],
            cfg.reduction.eta,
        );
        let newton = critical_point_newton(&model, start)
            .map_err(|e| fail(M_ENERGY, "critical_point_newton", e))?;
        let gap = newton
            .point
            .d
            .iter()
            .zip(&rep.point.d)
            .fold(0.0f64, |a, (x, y)| a.max((x - y).abs() / y));
        b.out(
            "newton_relative_gap",
            M_ENERGY,
            "critical_point_newton",
            json!(gap),
        );

        b.check(
            "gradient",
            M_ENERGY,
            "psi_grad",
            rep.grad_norm < GRADIENT_TOL,
            format!("‖∇Ψ‖ = {:e} (tolerance {GRADIENT_TOL:e})", rep.grad_norm),
        );
        b.check(
            "mixed_block",
            M_ENERGY,
            "psi_hessian",
            rep.mixed_block_max < MIXED_BLOCK_TOL,
            format!(
                "max |∂²Ψ/∂d∂τ| = {:e} (tolerance {MIXED_BLOCK_TOL:e})",
                rep.mixed_block_max
            ),
        );
        b.check(
            "signature",
            M_ENERGY,
            "critical_point",
            rep.nondegenerate_saddle,
            "d-block positive definite, τ-block negative definite".into(),
        );
        b.check(
            "newton_agreement",
            M_ENERGY,
            "critical_point_newton",
            gap < 1e-8,
            format!("relative gap {gap:e}"),
        );
        Ok(())
    };
    let err = run(&mut b).err();
    b.finish(err)
}

fn fit_row(fit: &ScalingFit) -> Value {
    json!({
        "exponent_measured": fit.exponent_measured,
        "exponent_predicted": fit.exponent_predicted,
        "r2": fit.r2,
        "log_augmented": fit.log_augmented,
        "relative_spread": fit.relative_spread,
    })
}

fn task_scaling(cfg: &ExperimentConfig) -> (TaskReport, Vec<Table>) {
    let mut b = Builder::new(Task::ScalingChecks);
    let laws = cfg.scaling.laws_for(cfg.dims);
    let grid = default_delta_grid();
    b.input("laws", json!(laws));
    b.input("delta_grid", json!(grid));
    let mut tables = Vec::new();
    let mut run = |b: &mut Builder| -> Step<()> {
        let dims = DimensionConstants::new(cfg.dims)
            .map_err(|e| fail("coron_core::bubbles", "DimensionConstants::new", e))?;
        let radius = cfg.domain.ball.radius;
        for law in &laws {
            let label = law.label();
            match *law {
                ScalingLaw::Single { q } => {
                    let fit = scaling_law_single(q, dims, &grid, SingleDomain::centered(radius))
                        .map_err(|e| fail(M_ASYMPTOTICS, "scaling_law_single", e))?;
                    single_checks(b, &label, "scaling_law_single", &fit);
                    tables.push(fit_table(&label, &fit));
                }
                ScalingLaw::Weighted { q, nu1, nu2 } => {
                    let fit = scaling_law_weighted(q, nu1, nu2, dims, &grid, radius)
                        .map_err(|e| fail(M_ASYMPTOTICS, "scaling_law_weighted", e))?;
                    single_checks(b, &label, "scaling_law_weighted", &fit);
                    tables.push(fit_table(&label, &fit));
                }
                ScalingLaw::Pair { q1, q2, separation } => {
                    let geometry = PairGeometry {
                        ball_radius: radius,
                        separation,
                    };
                    let fit = scaling_law_pair(q1, q2, dims, &grid, geometry, None)
                        .map_err(|e| fail(M_ASYMPTOTICS, "scaling_law_pair", e))?;
                    b.out(
                        label.clone(),
                        M_ASYMPTOTICS,
                        "scaling_law_pair",
                        json!({ "ratios": fit.ratios, "ratio_slope": fit.ratio_slope, "critical_ratios": fit.critical_ratios }),
                    );
                    b.check(
                        label.clone(),
                        M_ASYMPTOTICS,
                        "scaling_law_pair",
                        fit.bounded,
                        format!("ratio slope {:.4} in log δ", fit.ratio_slope),
                    );
                    tables.push(Table {
                        file: format!("scaling_{label}.csv"),
                        header: vec![
                            "delta".into(),
                            "value".into(),
                            "bound".into(),
                            "ratio".into(),
                        ],
                        rows: (0..fit.delta_grid.len())
                            .map(|i| {
                                vec![
                                    fit.delta_grid[i],
                                    fit.values[i],
                                    fit.bounds[i],
                                    fit.ratios[i],
                                ]
                            })
                            .collect(),
                    });
                }
            }
        }
        if cfg.scaling.remainder {
            let hole_r = cfg.domain.holes.first().map_or(1.0, |h| h.radius_coeff);
            let eps: Vec<f64> = (0..7).map(|k| 1e-2 * 10f64.powf(-0.5 * k as f64)).collect();
            let sweep = remainder_sweep(dims, radius, hole_r, 1.0, &eps)
                .map_err(|e| fail(M_ASYMPTOTICS, "remainder_sweep", e))?;
            b.out(
                "remainder",
                M_ASYMPTOTICS,
                "remainder_sweep",
                json!({ "log_ratio_slope": sweep.log_ratio_slope, "ratios": sweep.reports.iter().map(|r| r.ratio).collect::<Vec<_>>() }),
            );
            b.check(
                "remainder",
                M_ASYMPTOTICS,
                "remainder_sweep",
                sweep.bounded,
                format!("log ratio slope {:.4} in log ε", sweep.log_ratio_slope),
            );
            tables.push(Table {
                file: "scaling_remainder.csv".into(),
                header: vec![
                    "epsilon".into(),
                    "delta".into(),
                    "sup_remainder".into(),
                    "ratio".into(),
                ],
                rows: sweep
                    .reports
                    .iter()
                    .map(|r| vec![r.epsilon, r.delta, r.sup_remainder, r.ratio])
                    .collect(),
            });
        }
        Ok(())
    };
    let err = run(&mut b).err();
    (b.finish(err), tables)
}

fn single_checks(b: &mut Builder, label: &str, op: &'static str, fit: &ScalingFit) {
    b.out(label, M_ASYMPTOTICS, op, fit_row(fit));
    let flat = fit.exponent_predicted == 0.0;
    let quality = if flat {
        fit.relative_spread < FLAT_SPREAD_MAX
    } else {
        fit.r2 >= R2_MIN
    };
    b.check(
        label,
        M_ASYMPTOTICS,
        op,
        fit.slope_error() < SLOPE_TOL && quality,
        format!(
            "slope {:.4} vs {:.4}, {}",
            fit.exponent_measured,
            fit.exponent_predicted,
            if flat {
                format!("spread {:.2e}", fit.relative_spread)
            } else {
                format!("r² {:.6}", fit.r2)
            }
        ),
    );
}

fn fit_table(label: &str, fit: &ScalingFit) -> Table {
    Table {
        file: format!("scaling_{label}.csv"),
        header: vec!["delta".into(), "value".into()],
        rows: fit
            .delta_grid
            .iter()
            .zip(&fit.values)
            .map(|(d, v)| vec![*d, *v])
            .collect(),
    }
}

fn task_radial(cfg: &ExperimentConfig) -> (TaskReport, Vec<Table>) {
    let mut b = Builder::new(Task::RadialSweep);
    b.input("epsilon_grid", json!(cfg.reduction.epsilon_grid));
    b.input("nodes", json!(cfg.radial.nodes));
    b.input("chains", json!(cfg.radial.chains));
    let mut tables = Vec::new();
    let mut run = |b: &mut Builder| -> Step<()> {
        let dims = DimensionConstants::new(cfg.dims)
            .map_err(|e| fail("coron_core::bubbles", "DimensionConstants::new", e))?;
        let hole = cfg
            .domain
            .holes
            .first()
            .ok_or_else(|| fail(M_RADIAL, "RadialProblem::new", "no hole"))?;
        let problem = RadialProblem::new(dims, cfg.domain.ball.radius, hole.radius_coeff, 1.0)
            .map_err(|e| fail(M_RADIAL, "RadialProblem::new", e))?;
        let opts = SweepOptions {
            solver: SolverOptions {
                nodes: cfg.radial.nodes,
                ..Default::default()
            },
            chains: cfg.radial.chains,
        };
        let rep = match rate_sweep(&problem, &cfg.reduction.epsilon_grid, &opts) {
            Ok(r) => r,
            Err(f) => {
                b.out(
                    "partial_d_est",
                    M_RADIAL,
                    "rate_sweep",
                    json!(f
                        .partial
                        .iter()
                        .map(|m| json!({ "epsilon": m.epsilon, "d_est": m.d_est }))
                        .collect::<Vec<_>>()),
                );
                return Err(fail(M_RADIAL, "rate_sweep", f.error));
            }
        };
        b.out("slope", M_RADIAL, "rate_sweep", json!(rep.slope));
        b.out("r2", M_RADIAL, "rate_sweep", json!(rep.r2));
        b.out("d_est", M_RADIAL, "rate_sweep", json!(rep.d_est));
        b.out(
            "d_tilde",
            M_ENERGY,
            "ReducedEnergyModel::d_tilde",
            json!(rep.d_tilde),
        );
        b.out(
            "d_relative_error",
            M_RADIAL,
            "rate_sweep",
            json!(rep.d_relative_error),
        );
        b.out(
            "d_spread_last3",
            M_RADIAL,
            "rate_sweep",
            json!(rep.d_spread_last3),
        );
        b.out(
            "energy_gaps",
            M_RADIAL,
            "energy_of_solution",
            json!(rep.energy_gaps),
        );
        let worst = rep.metrics.iter().map(|m| m.residual).fold(0.0, f64::max);
        b.out("max_residual", M_RADIAL, "solve_radial", json!(worst));

        b.check(
            "rate_slope",
            M_RADIAL,
            "rate_sweep",
            (rep.slope - RATE_SLOPE).abs() < SLOPE_TOL,
            format!(
                "slope {:.4} (expected {RATE_SLOPE} ± {SLOPE_TOL})",
                rep.slope
            ),
        );
        b.check(
            "d_vs_reduced_energy",
            M_RADIAL,
            "rate_sweep",
            rep.d_relative_error < D_REL_TOL,
            format!("d_est {:.4} vs d̃ {:.4}", rep.d_est, rep.d_tilde),
        );
        b.check(
            "d_stabilizes",
            M_RADIAL,
            "rate_sweep",
            rep.d_spread_last3 < D_SPREAD_MAX,
            format!(
                "spread over the last three points {:.4}",
                rep.d_spread_last3
            ),
        );
        b.check(
            "residual",
            M_RADIAL,
            "solve_radial",
            worst < RESIDUAL_TOL,
            format!("largest residual {worst:e}"),
        );

        tables.push(Table {
            file: format!("sweep_{}.csv", cfg.name),
            header: [
                "epsilon",
                "delta_est",
                "d_est",
                "umax",
                "rpeak",
                "energy",
                "energy_gap",
                "residual",
                "iterations",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
            rows: rep
                .metrics
                .iter()
                .zip(&rep.energy_gaps)
                .map(|(m, g)| {
                    vec![
                        m.epsilon,
                        m.delta_est,
                        m.d_est,
                        m.umax,
                        m.rpeak,
                        m.energy,
                        *g,
                        m.residual,
                        m.iterations as f64,
                    ]
                })
                .collect(),
        });
        if cfg.radial.profiles {
            for g in &rep.profiles {
                let eps = g.nodes[0] / hole.radius_coeff;
                tables.push(Table {
                    file: format!("profile_{eps:.3e}.csv"),
                    header: vec!["radius".into(), "value".into()],
                    rows: g
                        .nodes
                        .iter()
                        .zip(&g.values)
                        .map(|(s, v)| vec![*s, *v])
                        .collect(),
                });
            }
        }

        // Same-point group solutions u_i = c_i w at the smallest ε.
        if let Ok(spec) = cfg.coupling_spec() {
            if let (Ok(amps), Some(w)) = (amplitudes(&spec), rep.profiles.last()) {
                for (c, _) in amps {
                    let h = c.group;
                    let comp = compose_group_solution(&spec, &c, w)
                        .map_err(|e| fail(M_RADIAL, "compose_group_solution", e))?;
                    let defect = comp.identity_defects.iter().copied().fold(0.0, f64::max);
                    b.out(
                        format!("group{h}.identity_defects"),
                        M_RADIAL,
                        "compose_group_solution",
                        json!(comp.identity_defects),
                    );
                    b.out(
                        format!("group{h}.residuals"),
                        M_RADIAL,
                        "compose_group_solution",
                        json!(comp.residuals),
                    );
                    b.check(
                        format!("group{h}.composition"),
                        M_RADIAL,
                        "compose_group_solution",
                        defect < COMPOSITION_TOL,
                        format!("identity defect {defect:e}"),
                    );
                }
            }
        }
        Ok(())
    };
    let err = run(&mut b).err();
    (b.finish(err), tables)
}

/// Runs the requested tasks. Reports come back in the canonical task order
/// regardless of scheduling, so output is deterministic up to timings.
pub fn run(cfg: &ExperimentConfig, seed: u64) -> RunResult {
    let chain = || {
        let mut out = Vec::new();
        if cfg.wants(Task::CVector) {
            out.push(task_c_vector(cfg));
        }
        if cfg.wants(Task::Spectrum) {
            out.push(task_spectrum(cfg));
        }
        if cfg.wants(Task::ReducedEnergy) {
            out.push(task_reduced_energy(cfg, seed));
        }
        if cfg.wants(Task::CriticalPoint) {
            out.push(task_critical_point(cfg));
        }
        out
    };
    let scaling = || cfg.wants(Task::ScalingChecks).then(|| task_scaling(cfg));
    let radial = || cfg.wants(Task::RadialSweep).then(|| task_radial(cfg));
    let (mut tasks, (s, r)) = rayon::join(chain, || rayon::join(scaling, radial));

    let mut tables = Vec::new();
    for (rep, t) in [s, r].into_iter().flatten() {
        tasks.push(rep);
        tables.extend(t);
    }
    tasks.sort_by_key(|t| t.task);
    RunResult { tasks, tables }
}
