//! Globally adaptive Gauss–Kronrod (G10/K21) quadrature on finite and
//! semi-infinite intervals.
//!
//! Semi-infinite ranges `[a, ∞)` with `a ≥ 0` are mapped onto a finite
//! angle interval through `r = tan θ`, which keeps the algebraically
//! decaying radial integrands of this crate smooth at the far end.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{LabError, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_1,
    0.973_906_528_517_171_7,
    0.930_157_491_355_708_2,
    0.865_063_366_688_984_5,
    0.780_817_726_586_416_9,
    0.679_409_568_299_024_4,
    0.562_757_134_668_604_7,
    0.433_395_394_129_247_2,
    0.294_392_862_701_460_2,
    0.148_874_338_981_631_2,
    0.0,
];

const WG: [f64; 5] = [
    0.066_671_344_308_688_14,
    0.149_451_349_150_580_6,
    0.219_086_362_515_982_04,
    0.269_266_719_309_996_35,
    0.295_524_224_714_752_87,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874,
    0.032_558_162_307_964_73,
    0.054_755_896_574_351_996,
    0.075_039_674_810_919_95,
    0.093_125_454_583_697_6,
    0.109_387_158_802_297_64,
    0.123_491_976_262_065_85,
    0.134_709_217_311_473_33,
    0.142_775_938_577_060_08,
    0.147_739_104_901_338_49,
    0.149_445_554_002_916_9,
];

/// Stopping rule for the adaptive integrator.
#[derive(Debug, Clone, Copy)]
pub struct QuadOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            max_intervals: 4000,
        }
    }
}

impl QuadOptions {
    pub fn with_tolerances(abs_tol: f64, rel_tol: f64) -> Self {
        Self {
            abs_tol,
            rel_tol,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct QuadResult {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

struct Segment {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}

impl Eq for Segment {}

impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut scaled = err.abs();
    if res_asc != 0.0 && scaled != 0.0 {
        let scale = (200.0 * scaled / res_asc).powf(1.5);
        scaled = if scale < 1.0 {
            res_asc * scale
        } else {
            res_asc
        };
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        let min_err = 50.0 * f64::EPSILON * res_abs;
        if min_err > scaled {
            scaled = min_err;
        }
    }
    scaled
}

/// Single 21-point Kronrod panel with the embedded 10-point Gauss error estimate.
fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let f_center = f(center);

    let mut res_k = f_center * WGK[10];
    let mut res_g = 0.0;
    let mut res_abs = (f_center * WGK[10]).abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];

    for j in 0..10 {
        let dx = half * XGK[j];
        let f1 = f(center - dx);
        let f2 = f(center + dx);
        fv1[j] = f1;
        fv2[j] = f2;
        res_k += WGK[j] * (f1 + f2);
        res_abs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            res_g += WG[j / 2] * (f1 + f2);
        }
    }

    let mean = 0.5 * res_k;
    let mut res_asc = WGK[10] * (f_center - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }

    let value = res_k * half;
    let err = rescale_error(
        (res_k - res_g) * half,
        res_abs * half.abs(),
        res_asc * half.abs(),
    );
    (value, err)
}

/// Adaptive integration of `f` over `[a, b]`, splitting first at `breaks`
/// (points strictly inside the interval; others are ignored).
pub fn integrate_with_breaks<F>(
    f: F,
    a: f64,
    b: f64,
    breaks: &[f64],
    opts: QuadOptions,
) -> Result<QuadResult>
where
    F: Fn(f64) -> f64,
{
    if a == b {
        return Ok(QuadResult {
            value: 0.0,
            error: 0.0,
            intervals: 0,
        });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };

    let mut cuts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|&x| x > lo && x < hi)
        .collect();
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let mut nodes = Vec::with_capacity(cuts.len() + 2);
    nodes.push(lo);
    nodes.extend(cuts);
    nodes.push(hi);

    let mut heap = BinaryHeap::new();
    let mut total = 0.0;
    let mut total_err = 0.0;
    for w in nodes.windows(2) {
        let (value, error) = gk21(&f, w[0], w[1]);
        total += value;
        total_err += error;
        heap.push(Segment {
            a: w[0],
            b: w[1],
            value,
            error,
        });
    }

    loop {
        let tol = opts.abs_tol.max(opts.rel_tol * total.abs());
        if total_err <= tol {
            break;
        }
        if heap.len() >= opts.max_intervals {
            // Accept a result limited only by round-off.
            if total_err <= 1e3 * tol {
                break;
            }
            return Err(LabError::Quadrature {
                lower: lo,
                upper: hi,
                error: total_err,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Interval collapsed to machine resolution.
            heap.push(worst);
            if total_err <= 1e3 * tol {
                break;
            }
            return Err(LabError::Quadrature {
                lower: lo,
                upper: hi,
                error: total_err,
            });
        }
        let (v1, e1) = gk21(&f, worst.a, mid);
        let (v2, e2) = gk21(&f, mid, worst.b);
        total += v1 + v2 - worst.value;
        total_err += e1 + e2 - worst.error;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
    }

    // Re-sum to shed accumulated cancellation in the running totals.
    let intervals = heap.len();
    let (value, error) = heap
        .into_iter()
        .fold((0.0, 0.0), |(v, e), s| (v + s.value, e + s.error));
    Ok(QuadResult {
        value: sign * value,
        error,
        intervals,
    })
}

pub fn integrate<F>(f: F, a: f64, b: f64, opts: QuadOptions) -> Result<QuadResult>
where
    F: Fn(f64) -> f64,
{
    integrate_with_breaks(f, a, b, &[], opts)
}

/// Integral over `[a, ∞)` for `a ≥ 0` through `r = tan θ`.
///
/// `breaks` are given in the original variable `r`.
pub fn integrate_to_infinity<F>(
    f: F,
    a: f64,
    breaks: &[f64],
    opts: QuadOptions,
) -> Result<QuadResult>
where
    F: Fn(f64) -> f64,
{
    if a < 0.0 {
        return Err(LabError::InvalidParameter(format!(
            "semi-infinite quadrature needs a >= 0, got {a}"
        )));
    }
    let theta_breaks: Vec<f64> = breaks
        .iter()
        .filter(|&&r| r > a)
        .map(|r| r.atan())
        .collect();
    let g = |theta: f64| {
        let c = theta.cos();
        let r = theta.tan();
        f(r) / (c * c)
    };
    integrate_with_breaks(
        g,
        a.atan(),
        std::f64::consts::FRAC_PI_2,
        &theta_breaks,
        opts,
    )
}

/// Geometric break points `scale · 10^k` inside `(lo, hi)`; used to resolve
/// integrands concentrated at a small length scale.
pub fn decade_breaks(scale: f64, lo: f64, hi: f64) -> Vec<f64> {
    let mut out = Vec::new();
    if !(scale > 0.0) {
        return out;
    }
    for k in -6..=12 {
        let x = scale * 10f64.powi(k);
        if x > lo && x < hi {
            out.push(x);
        }
    }
    out
}
