//! Amplitude vectors of synchronized bubble solutions and the spectral
//! nondegeneracy test of their linearization.
//!
//! For a group `I` with coupling block `B = (β_ij)_{i,j∈I}` (and
//! `β_ii = μ_i`), `(c_i U)_{i∈I}` solves the limiting system iff
//! `Σ_j β_ij c_i^{(p−1)/2} c_j^{(p+1)/2} = c_i`. In `R^4` this is the linear
//! system `B (c²) = 1`; in `R^3` it reads `c_i Σ_j β_ij c_j³ = 1`.

use std::ops::Range;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::bubbles::DimensionConstants;
use crate::error::{LabError, Result};

/// Tolerance on `|Λ − 1|` and `|Λ − 3|` in [`nondegeneracy_check`].
pub const DEGENERACY_TOL: f64 = 1e-8;

const SYMMETRY_TOL: f64 = 1e-12;

/// Coupling data of an `m`-component system with a contiguous grouping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingSpec {
    pub n: usize,
    pub mu: Vec<f64>,
    /// Full symmetric `m × m` matrix, diagonal equal to `mu`.
    pub beta: Vec<Vec<f64>>,
    /// Strictly increasing `(l_0 = 0, …, l_q = m)`.
    pub decomposition: Vec<usize>,
}

impl CouplingSpec {
    /// Builds and validates a spec. The diagonal of `beta` is overwritten
    /// with `mu`.
    pub fn new(
        n: usize,
        mu: Vec<f64>,
        mut beta: Vec<Vec<f64>>,
        decomposition: Vec<usize>,
    ) -> Result<Self> {
        for (i, row) in beta.iter_mut().enumerate() {
            if let (Some(slot), Some(&m)) = (row.get_mut(i), mu.get(i)) {
                *slot = m;
            }
        }
        let spec = Self {
            n,
            mu,
            beta,
            decomposition,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// A single group holding every component.
    pub fn single_group(n: usize, mu: Vec<f64>, beta: Vec<Vec<f64>>) -> Result<Self> {
        let m = mu.len();
        Self::new(n, mu, beta, vec![0, m])
    }

    pub fn m(&self) -> usize {
        self.mu.len()
    }

    pub fn validate(&self) -> Result<()> {
        DimensionConstants::new(self.n)?;
        let m = self.m();
        if m == 0 {
            return Err(LabError::InvalidParameter("no components".into()));
        }
        if let Some(i) = self.mu.iter().position(|&v| !(v > 0.0)) {
            return Err(LabError::InvalidParameter(format!(
                "mu[{i}] = {} is not positive",
                self.mu[i]
            )));
        }
        if self.beta.len() != m || self.beta.iter().any(|r| r.len() != m) {
            return Err(LabError::DimensionMismatch(format!(
                "beta must be {m} x {m}"
            )));
        }
        for i in 0..m {
            if (self.beta[i][i] - self.mu[i]).abs() > SYMMETRY_TOL * self.mu[i] {
                return Err(LabError::InvalidParameter(format!(
                    "beta[{i}][{i}] must equal mu[{i}]"
                )));
            }
            for j in (i + 1)..m {
                let (a, b) = (self.beta[i][j], self.beta[j][i]);
                if (a - b).abs() > SYMMETRY_TOL * a.abs().max(b.abs()).max(1.0) {
                    return Err(LabError::InvalidParameter(format!(
                        "beta is not symmetric: beta[{i}][{j}] = {a}, beta[{j}][{i}] = {b}"
                    )));
                }
            }
        }
        let l = &self.decomposition;
        if l.len() < 2 || l[0] != 0 || *l.last().unwrap() != m || l.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(LabError::InvalidParameter(format!(
                "decomposition {l:?} is not strictly increasing from 0 to {m}"
            )));
        }
        Ok(())
    }

    pub fn group_count(&self) -> usize {
        self.decomposition.len() - 1
    }

    /// Zero-based component indices of group `h`.
    pub fn group(&self, h: usize) -> Result<Range<usize>> {
        if h >= self.group_count() {
            return Err(LabError::IndexOutOfRange {
                index: h,
                max: self.group_count().saturating_sub(1),
            });
        }
        Ok(self.decomposition[h]..self.decomposition[h + 1])
    }

    pub fn block(&self, h: usize) -> Result<DMatrix<f64>> {
        let g = self.group(h)?;
        let k = g.len();
        Ok(DMatrix::from_fn(k, k, |i, j| {
            self.beta[g.start + i][g.start + j]
        }))
    }
}

/// Positive amplitudes of one group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CVector {
    pub c: Vec<f64>,
    pub group: usize,
}

/// Componentwise residual `Σ_j β_ij c_i^{(p−1)/2} c_j^{(p+1)/2} − c_i`.
pub fn amplitude_residual(block: &DMatrix<f64>, c: &[f64], p: f64) -> Vec<f64> {
    let k = c.len();
    (0..k)
        .map(|i| {
            let s: f64 = (0..k)
                .map(|j| block[(i, j)] * c[i].powf((p - 1.0) / 2.0) * c[j].powf((p + 1.0) / 2.0))
                .sum();
            s - c[i]
        })
        .collect()
}

/// Solves the amplitude system of group `group`.
///
/// `N = 4`: linear solve for `c²` followed by positivity check and square
/// roots. `N = 3`: Newton on `c_i Σ_j β_ij c_j³ = 1`, continued in the
/// off-diagonal coupling from the decoupled amplitudes `μ_i^{−1/4}`.
pub fn solve_c_vector(spec: &CouplingSpec, group: usize) -> Result<CVector> {
    let block = spec.block(group)?;
    let c = match spec.n {
        4 => solve_quadratic_amplitudes(&block, group, 0.0)?,
        3 => solve_cubic_amplitudes(&block, group)?,
        n => return Err(LabError::UnsupportedDimension(n)),
    };
    Ok(CVector { c, group })
}

/// Relative size below which a solved `c_i²` counts as zero on the boundary
/// of the admissible range.
pub const BOUNDARY_TOL: f64 = 1e-12;

/// Amplitudes on the boundary of the admissible range (`N = 4`), where some
/// `c_i²` of the linear solve vanishes, e.g. `β_12 = μ_1`. Squares within
/// `BOUNDARY_TOL` of zero are set to zero; negative squares are rejected as
/// in [`solve_c_vector`].
pub fn boundary_c_vector(spec: &CouplingSpec, group: usize) -> Result<CVector> {
    if spec.n != 4 {
        return Err(LabError::SpectrumUnsupported(spec.n));
    }
    let block = spec.block(group)?;
    let c = solve_quadratic_amplitudes(&block, group, BOUNDARY_TOL)?;
    Ok(CVector { c, group })
}

fn solve_quadratic_amplitudes(
    block: &DMatrix<f64>,
    group: usize,
    zero_tol: f64,
) -> Result<Vec<f64>> {
    let k = block.nrows();
    let scale = block.amax();
    let lu = block.clone().lu();
    let det = lu.determinant();
    if !det.is_finite() || det.abs() <= 1e-13 * scale.powi(k as i32) {
        return Err(LabError::SingularBlock(group));
    }
    let squares = lu
        .solve(&DVector::from_element(k, 1.0))
        .ok_or(LabError::SingularBlock(group))?;
    let cut = zero_tol * squares.amax();
    let squares = squares.map(|s| if s.abs() <= cut { 0.0 } else { s });
    if let Some(i) = squares
        .iter()
        .position(|&s| !(s > 0.0 || (zero_tol > 0.0 && s == 0.0)))
    {
        return Err(LabError::NoPositiveSolution(format!(
            "group {group}: solved c_{}^2 = {} is not positive",
            i + 1,
            squares[i]
        )));
    }
    Ok(squares.iter().map(|s| s.sqrt()).collect())
}

fn solve_cubic_amplitudes(block: &DMatrix<f64>, group: usize) -> Result<Vec<f64>> {
    let k = block.nrows();
    let diag = DMatrix::from_fn(k, k, |i, j| if i == j { block[(i, i)] } else { 0.0 });
    let off = block - &diag;
    let mut c: DVector<f64> = DVector::from_fn(k, |i, _| block[(i, i)].powf(-0.25));

    let newton = |b: &DMatrix<f64>, c: &mut DVector<f64>| -> Result<()> {
        for _ in 0..60 {
            let cubes = c.map(|v| v.powi(3));
            let bc = b * &cubes;
            let f = DVector::from_fn(k, |i, _| c[i] * bc[i] - 1.0);
            if f.amax() < 1e-14 {
                return Ok(());
            }
            let jac = DMatrix::from_fn(k, k, |i, j| {
                let d = if i == j { bc[i] } else { 0.0 };
                d + 3.0 * c[i] * b[(i, j)] * c[j] * c[j]
            });
            let step = jac
                .lu()
                .solve(&(-&f))
                .ok_or(LabError::SingularBlock(group))?;
            // Damp so that every amplitude stays positive.
            let mut lambda: f64 = 1.0;
            for i in 0..k {
                if c[i] + lambda * step[i] <= 0.0 {
                    lambda = lambda.min(0.5 * c[i] / (-step[i]));
                }
            }
            *c += step * lambda;
        }
        let cubes = c.map(|v| v.powi(3));
        let bc = b * &cubes;
        let worst = (0..k)
            .map(|i| (c[i] * bc[i] - 1.0).abs())
            .fold(0.0, f64::max);
        if worst < 1e-12 {
            Ok(())
        } else {
            Err(LabError::NoPositiveSolution(format!(
                "group {group}: amplitude continuation stalled with residual {worst:e}"
            )))
        }
    };

    const STAGES: usize = 32;
    for s in 1..=STAGES {
        let t = s as f64 / STAGES as f64;
        let b = &diag + &off * t;
        newton(&b, &mut c)?;
    }
    if c.iter().any(|&v| !(v > 0.0)) {
        return Err(LabError::NoPositiveSolution(format!("group {group}")));
    }
    Ok(c.iter().copied().collect())
}

/// Whether `β_12` lies in `(−√(μ_1 μ_2), min μ) ∪ (max μ, ∞)`.
pub fn admissible_beta_range(mu1: f64, mu2: f64, beta12: f64) -> bool {
    let lower = -(mu1 * mu2).sqrt();
    (beta12 > lower && beta12 < mu1.min(mu2)) || beta12 > mu1.max(mu2)
}

/// Closed-form amplitudes `c_1², c_2²` of a two-component group.
pub fn two_component_squares(mu1: f64, mu2: f64, beta12: f64) -> (f64, f64) {
    let den = beta12 * beta12 - mu1 * mu2;
    ((beta12 - mu2) / den, (beta12 - mu1) / den)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Nondegenerate,
    Degenerate,
    Inconclusive,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Nondegenerate => "nondegenerate",
            Verdict::Degenerate => "degenerate",
            Verdict::Inconclusive => "inconclusive",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerdictDetail {
    pub verdict: Verdict,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub group: usize,
    pub mat_c: Vec<Vec<f64>>,
    pub mat_m: Vec<Vec<f64>>,
    /// Eigenvalues of `𝓒`, principal one first, the rest descending.
    pub thetas: Vec<f64>,
    /// Eigenvalues of `𝓜`, from an independent eigensolve, same order.
    pub lambdas: Vec<f64>,
    pub principal_eigvec: Vec<f64>,
    /// `‖𝓜 c − 3 c‖ / ‖c‖`.
    pub principal_residual: f64,
    pub det_c: f64,
    pub det_block: f64,
    pub verdict: Verdict,
    pub verdict_reason: String,
    /// `(λ_1, λ_2)` from the quadratic formula when the group has two components.
    pub m2_closed_form: Option<(f64, f64)>,
}

fn to_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| m.row(i).iter().copied().collect())
        .collect()
}

/// Eigenpairs sorted with the one closest to `target` first, the rest in
/// descending order.
fn ordered_eigen(mat: &DMatrix<f64>, target: f64) -> (Vec<f64>, Vec<DVector<f64>>) {
    let eig = SymmetricEigen::new(mat.clone());
    let mut idx: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    let lead = idx
        .iter()
        .copied()
        .min_by(|&a, &b| {
            (eig.eigenvalues[a] - target)
                .abs()
                .total_cmp(&(eig.eigenvalues[b] - target).abs())
        })
        .expect("non-empty spectrum");
    idx.retain(|&i| i != lead);
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    idx.insert(0, lead);
    let vals = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = idx
        .iter()
        .map(|&i| eig.eigenvectors.column(i).into_owned())
        .collect();
    (vals, vecs)
}

/// Assembles `𝓒_ij = β_ij c_i c_j` and `𝓜 = Id + 2𝓒` and classifies the spectrum.
pub fn build_spectrum(spec: &CouplingSpec, c: &CVector) -> Result<SpectrumReport> {
    if spec.n != 4 {
        return Err(LabError::SpectrumUnsupported(spec.n));
    }
    let block = spec.block(c.group)?;
    let k = block.nrows();
    if c.c.len() != k {
        return Err(LabError::DimensionMismatch(format!(
            "group {} has {k} components, amplitude vector has {}",
            c.group,
            c.c.len()
        )));
    }
    let cv = DVector::from_column_slice(&c.c);
    let mat_c = DMatrix::from_fn(k, k, |i, j| block[(i, j)] * cv[i] * cv[j]);
    let mat_m = DMatrix::identity(k, k) + &mat_c * 2.0;

    let (thetas, theta_vecs) = ordered_eigen(&mat_c, 1.0);
    let (lambdas, _) = ordered_eigen(&mat_m, 3.0);

    let mut principal = theta_vecs[0].clone();
    if principal.sum() < 0.0 {
        principal = -principal;
    }
    let principal_residual = (&mat_m * &cv - &cv * 3.0).norm() / cv.norm();

    let m2_closed_form = (k == 2).then(|| {
        let (c1, c2) = (cv[0], cv[1]);
        let b12 = block[(0, 1)];
        let a11 = 3.0 * block[(0, 0)] * c1 * c1 + b12 * c2 * c2;
        let a22 = 3.0 * block[(1, 1)] * c2 * c2 + b12 * c1 * c1;
        let a12 = 2.0 * b12 * c1 * c2;
        let disc = ((a11 - a22).powi(2) + 4.0 * a12 * a12).sqrt();
        ((a11 + a22 + disc) / 2.0, (a11 + a22 - disc) / 2.0)
    });

    let mut report = SpectrumReport {
        group: c.group,
        det_c: mat_c.determinant(),
        det_block: block.determinant(),
        mat_c: to_rows(&mat_c),
        mat_m: to_rows(&mat_m),
        thetas,
        lambdas,
        principal_eigvec: principal.iter().copied().collect(),
        principal_residual,
        verdict: Verdict::Inconclusive,
        verdict_reason: String::new(),
        m2_closed_form,
    };
    let detail = nondegeneracy_check(&report);
    report.verdict = detail.verdict;
    report.verdict_reason = detail.reason;
    Ok(report)
}

/// Known prefix `(ν_1, ν_2) = (1, 3)` of the eigenvalues of
/// `−Δv = ν U² v` in `R^4`. Higher eigenvalues are not provided.
pub fn eigenvalue_ladder() -> Vec<f64> {
    vec![1.0, 3.0]
}

/// Classifies the spectrum of `𝓜` against the known ladder.
///
/// `Λ_1 = 3` must be simple; every other eigenvalue must stay below
/// `3 − tol` and away from `1`. An eigenvalue at or above `3 + tol` would
/// have to be compared with `ν_3, ν_4, …` and yields `inconclusive`.
/// Eigenvalues at or below `−1` cannot meet the positive ladder and are
/// accepted.
pub fn nondegeneracy_check(report: &SpectrumReport) -> VerdictDetail {
    let ladder = eigenvalue_ladder();
    let (nu1, nu2) = (ladder[0], ladder[1]);
    let tol = DEGENERACY_TOL;
    let lam = &report.lambdas;
    let k = lam.len();
    let name = |l: usize| {
        if k == 2 {
            format!("λ{}", subscript(l + 1))
        } else {
            format!("Λ{}", subscript(l + 1))
        }
    };

    if (lam[0] - nu2).abs() > tol {
        return VerdictDetail {
            verdict: Verdict::Degenerate,
            reason: format!(
                "degenerate: no eigenvalue equals 3 (closest {:.12})",
                lam[0]
            ),
        };
    }
    for (l, &v) in lam.iter().enumerate().skip(1) {
        if (v - nu2).abs() <= tol {
            return VerdictDetail {
                verdict: Verdict::Degenerate,
                reason: format!("degenerate: {} = 3 (Λ = 3 is not simple)", name(l)),
            };
        }
        if (v - nu1).abs() <= tol {
            return VerdictDetail {
                verdict: Verdict::Degenerate,
                reason: format!("degenerate: {} = 1", name(l)),
            };
        }
    }
    if let Some((l, &v)) = lam
        .iter()
        .enumerate()
        .skip(1)
        .find(|(_, &v)| v >= nu2 + tol)
    {
        return VerdictDetail {
            verdict: Verdict::Inconclusive,
            reason: format!(
                "inconclusive: {} = {v:.10} > 3 would need the eigenvalues ν_k beyond ν_2 = 3",
                name(l)
            ),
        };
    }
    VerdictDetail {
        verdict: Verdict::Nondegenerate,
        reason: "nondegenerate: Λ = 3 simple, all other eigenvalues below 3 and away from 1".into(),
    }
}

fn subscript(i: usize) -> String {
    const DIGITS: [char; 10] = ['₀', '₁', '₂', '₃', '₄', '₅', '₆', '₇', '₈', '₉'];
    i.to_string()
        .chars()
        .map(|ch| DIGITS[ch.to_digit(10).unwrap() as usize])
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn two(n: usize, mu1: f64, mu2: f64, b: f64) -> CouplingSpec {
        CouplingSpec::single_group(n, vec![mu1, mu2], vec![vec![mu1, b], vec![b, mu2]]).unwrap()
    }

    #[test]
    fn two_component_example() {
        let spec = two(4, 1.0, 2.0, -0.5);
        let c = solve_c_vector(&spec, 0).unwrap();
        assert!((c.c[0] * c.c[0] - 10.0 / 7.0).abs() < 1e-12);
        assert!((c.c[1] * c.c[1] - 6.0 / 7.0).abs() < 1e-12);
        let (s1, s2) = two_component_squares(1.0, 2.0, -0.5);
        assert!((s1 - 10.0 / 7.0).abs() < 1e-12 && (s2 - 6.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn symmetric_masses() {
        for b in [-0.7, 0.3, 2.5] {
            let spec = two(4, 1.3, 1.3, b);
            let c = solve_c_vector(&spec, 0).unwrap();
            for ci in &c.c {
                assert!((ci * ci - 1.0 / (1.3 + b)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn scalar_group() {
        for n in [3, 4] {
            let spec = CouplingSpec::single_group(n, vec![2.0], vec![vec![2.0]]).unwrap();
            let c = solve_c_vector(&spec, 0).unwrap();
            let p = DimensionConstants::new(n).unwrap().p;
            assert!((c.c[0] - 2f64.powf(-1.0 / (p - 1.0))).abs() < 1e-13);
        }
    }

    #[test]
    fn cubic_system_in_dimension_three() {
        let spec = two(3, 1.0, 2.0, -0.4);
        let c = solve_c_vector(&spec, 0).unwrap();
        let res = amplitude_residual(&spec.block(0).unwrap(), &c.c, 5.0);
        assert!(res.iter().all(|r| r.abs() < 1e-12), "{res:?}");
        assert!(c.c.iter().all(|&v| v > 0.0));
    }

    #[test]
    fn singular_and_nonpositive_blocks() {
        let spec = two(4, 1.0, 1.0, 1.0);
        assert_eq!(solve_c_vector(&spec, 0), Err(LabError::SingularBlock(0)));
        // β_12 between min and max μ: no positive solution.
        let spec = two(4, 1.0, 2.0, 1.5 - 0.2);
        assert!(matches!(
            solve_c_vector(&spec, 0),
            Err(LabError::NoPositiveSolution(_))
        ));
    }

    #[test]
    fn spec_validation() {
        assert!(CouplingSpec::new(
            4,
            vec![1.0, 1.0],
            vec![vec![1.0, 0.2], vec![0.3, 1.0]],
            vec![0, 2]
        )
        .is_err());
        assert!(CouplingSpec::new(
            4,
            vec![1.0, -1.0],
            vec![vec![1.0, 0.2], vec![0.2, -1.0]],
            vec![0, 2]
        )
        .is_err());
        assert!(CouplingSpec::new(
            4,
            vec![1.0, 1.0],
            vec![vec![1.0, 0.2], vec![0.2, 1.0]],
            vec![0, 1, 1, 2]
        )
        .is_err());
        assert!(CouplingSpec::new(5, vec![1.0], vec![vec![1.0]], vec![0, 1]).is_err());
        let s = CouplingSpec::new(4, vec![1.0, 2.0, 1.0], vec![vec![0.0; 3]; 3], vec![0, 2, 3])
            .unwrap();
        assert_eq!(s.beta[1][1], 2.0);
        assert_eq!(s.group(1).unwrap(), 2..3);
        assert!(s.group(2).is_err());
    }

    #[test]
    fn admissible_ranges() {
        assert!(admissible_beta_range(1.0, 2.0, -0.5));
        assert!(!admissible_beta_range(1.0, 2.0, 1.0));
        assert!(admissible_beta_range(1.0, 2.0, 3.0));
        assert!(!admissible_beta_range(1.0, 2.0, -2f64.sqrt()));
        assert!(!admissible_beta_range(1.0, 2.0, 1.5));
    }

    #[test]
    fn spectrum_of_cooperative_pair() {
        let spec = two(4, 1.0, 2.0, 1.5 + 1.0);
        let c = solve_c_vector(&spec, 0).unwrap();
        let rep = build_spectrum(&spec, &c).unwrap();
        assert!((rep.lambdas[0] - 3.0).abs() < 1e-10);
        assert!(rep.lambdas[1] > -1.0 && rep.lambdas[1] < 3.0);
        assert_eq!(rep.verdict, Verdict::Nondegenerate);
        let (l1, l2) = rep.m2_closed_form.unwrap();
        assert!((l1 - 3.0).abs() < 1e-10);
        assert!((l2 - rep.lambdas[1]).abs() < 1e-10);
    }

    #[test]
    fn degenerate_boundary() {
        // β_12 = μ_1: the linear system still has c = (0, 1/√μ_2), so probe
        // from inside the admissible range instead and watch λ₂ → 1.
        let mu = (1.0, 2.0);
        let near = two(4, mu.0, mu.1, mu.0 - 1e-9);
        let c = solve_c_vector(&near, 0);
        // c_1² = (β−μ_2)/(β²−μ_1μ_2) stays positive, c_2² → 0⁺.
        let c = c.unwrap();
        let rep = build_spectrum(&near, &c).unwrap();
        assert!((rep.lambdas[1] - 1.0).abs() < 1e-8);
        assert_eq!(rep.verdict, Verdict::Degenerate);
        assert_eq!(rep.verdict_reason, "degenerate: λ₂ = 1");
    }

    #[test]
    fn exact_boundary_through_limit_amplitudes() {
        let spec = two(4, 1.0, 2.0, 1.0);
        assert!(matches!(
            solve_c_vector(&spec, 0),
            Err(LabError::NoPositiveSolution(_))
        ));
        let c = boundary_c_vector(&spec, 0).unwrap();
        assert_eq!(c.c[1], 0.0);
        assert!((c.c[0] - 1.0).abs() < 1e-14);
        let rep = build_spectrum(&spec, &c).unwrap();
        assert!((rep.lambdas[1] - 1.0).abs() < 1e-12);
        assert_eq!(rep.verdict_reason, "degenerate: λ₂ = 1");
        // Outside the range the squares are genuinely negative.
        assert!(boundary_c_vector(&two(4, 1.0, 2.0, 1.5), 0).is_err());
    }

    #[test]
    fn scalar_spectrum() {
        let spec = CouplingSpec::single_group(4, vec![1.7], vec![vec![1.7]]).unwrap();
        let c = solve_c_vector(&spec, 0).unwrap();
        let rep = build_spectrum(&spec, &c).unwrap();
        assert_eq!(rep.lambdas.len(), 1);
        assert!((rep.mat_c[0][0] - 1.0).abs() < 1e-14);
        assert_eq!(rep.verdict, Verdict::Nondegenerate);
    }

    #[test]
    fn competitive_pair_needs_higher_ladder() {
        let spec = two(4, 1.0, 2.0, -0.5);
        let c = solve_c_vector(&spec, 0).unwrap();
        let rep = build_spectrum(&spec, &c).unwrap();
        // λ₂ = 3 − 2β(c₁² + c₂²) = 37/7.
        assert!((rep.lambdas[1] - 37.0 / 7.0).abs() < 1e-12);
        assert_eq!(rep.verdict, Verdict::Inconclusive);
    }

    #[test]
    fn spectrum_refuses_dimension_three() {
        let spec = two(3, 1.0, 2.0, -0.4);
        let c = solve_c_vector(&spec, 0).unwrap();
        assert_eq!(
            build_spectrum(&spec, &c),
            Err(LabError::SpectrumUnsupported(3))
        );
        let bad = CVector {
            c: vec![1.0],
            group: 0,
        };
        assert!(matches!(
            build_spectrum(&two(4, 1.0, 2.0, -0.5), &bad),
            Err(LabError::DimensionMismatch(_))
        ));
    }

    #[test]
    fn ladder() {
        let l = eigenvalue_ladder();
        assert_eq!(l, vec![1.0, 3.0]);
        assert!(l.windows(2).all(|w| w[0] < w[1]));
    }

    proptest! {
        #[test]
        fn pair_identities(
            mu1 in 0.2f64..4.0,
            mu2 in 0.2f64..4.0,
            t in 0.0f64..1.0,
            cooperative in any::<bool>(),
        ) {
            let lo = -(mu1 * mu2).sqrt();
            let hi = mu1.min(mu2);
            let b = if cooperative { mu1.max(mu2) + 0.05 + 3.0 * t } else { lo + (hi - lo) * (0.02 + 0.96 * t) };
            prop_assume!(admissible_beta_range(mu1, mu2, b));
            let spec = two(4, mu1, mu2, b);
            let c = solve_c_vector(&spec, 0).unwrap();
            let (s1, s2) = two_component_squares(mu1, mu2, b);
            prop_assert!((c.c[0].powi(2) - s1).abs() <= 1e-12 * s1.max(1.0));
            prop_assert!((c.c[1].powi(2) - s2).abs() <= 1e-12 * s2.max(1.0));
            let rep = build_spectrum(&spec, &c).unwrap();
            let m = &rep.mat_m;
            let trace = m[0][0] + m[1][1];
            let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
            let (l1, l2) = rep.m2_closed_form.unwrap();
            prop_assert!((l1 + l2 - trace).abs() < 1e-10 * trace.abs().max(1.0));
            prop_assert!((l1 * l2 - det).abs() < 1e-10 * det.abs().max(1.0));
            // Alternative form {3, 3 − 2β(c₁² + c₂²)}.
            let alt = 3.0 - 2.0 * b * (s1 + s2);
            let other = if (l1 - 3.0).abs() < (l2 - 3.0).abs() { l2 } else { l1 };
            prop_assert!((other - alt).abs() < 1e-9 * alt.abs().max(1.0));
            let expected_det = c.c.iter().map(|v| v * v).product::<f64>() * rep.det_block;
            prop_assert!((rep.det_c - expected_det).abs() < 1e-10 * expected_det.abs().max(1.0));
            for (th, la) in rep.thetas.iter().zip(&rep.lambdas) {
                prop_assert!((la - (1.0 + 2.0 * th)).abs() < 1e-12 * la.abs().max(1.0));
            }
        }
    }
}
