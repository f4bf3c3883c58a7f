//! Adaptive Gauss–Kronrod (7/15) quadrature on the unit interval, carried
//! out in the log domain.
//!
//! Each panel is evaluated relative to the largest `log_f` value among its
//! own nodes, so integrands of size `e^{±700}` never overflow. Panel totals
//! are brought to a common scale only when they are summed.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};

use super::log_sum_exp;

/// Nodes closer than this to 0 or 1 are moved inward before `log_f` is called.
pub const ENDPOINT_CLIP: f64 = 1e-12;

/// Tolerances and budget for [`log_integrate_unit`].
///
/// The integral is returned as a logarithm, so both tolerances are stated
/// for `ln I`: a panel set is accepted once its error estimate `E` satisfies
/// `E / I <= max(abs_tol, rel_tol * |ln I|)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            abs_tol: 1e-10,
            rel_tol: 1e-9,
            max_subdivisions: 2048,
        }
    }
}

impl QuadratureSpec {
    pub fn new(abs_tol: f64, rel_tol: f64, max_subdivisions: usize) -> Result<Self> {
        let spec = Self {
            abs_tol,
            rel_tol,
            max_subdivisions,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.abs_tol > 0.0) || !self.abs_tol.is_finite() {
            return Err(domain("abs_tol", self.abs_tol, "(0, inf)"));
        }
        if !(self.rel_tol > 0.0) || !self.rel_tol.is_finite() {
            return Err(domain("rel_tol", self.rel_tol, "(0, inf)"));
        }
        if self.max_subdivisions < 8 {
            return Err(domain(
                "max_subdivisions",
                self.max_subdivisions as f64,
                "[8, inf)",
            ));
        }
        Ok(())
    }

    fn accepts(&self, log_total: f64, log_err: f64) -> bool {
        if log_err == f64::NEG_INFINITY {
            return true;
        }
        let tol = self.abs_tol.max(self.rel_tol * log_total.abs());
        log_err - log_total <= tol.ln()
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639,
    0.949_107_912_342_758_525,
    0.864_864_423_359_769_073,
    0.741_531_185_599_394_440,
    0.586_087_235_467_691_130,
    0.405_845_151_377_397_167,
    0.207_784_955_007_898_468,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_225,
    0.063_092_092_629_978_553,
    0.104_790_010_322_250_184,
    0.140_653_259_715_525_919,
    0.169_004_726_639_267_903,
    0.190_350_578_064_785_410,
    0.204_432_940_075_298_892,
    0.209_482_141_084_727_828,
];

const WG: [f64; 4] = [
    0.129_484_966_168_869_693,
    0.279_705_391_489_276_668,
    0.381_830_050_505_118_945,
    0.417_959_183_673_469_388,
];

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    log_est: f64,
    log_err: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.log_err == other.log_err
    }
}

impl Eq for Panel {}

impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.log_err.total_cmp(&other.log_err)
    }
}

fn eval_clipped<F: FnMut(f64) -> f64>(log_f: &mut F, x: f64) -> Result<f64> {
    let x = x.clamp(ENDPOINT_CLIP, 1.0 - ENDPOINT_CLIP);
    let v = log_f(x);
    if v.is_nan() || v == f64::INFINITY {
        return Err(domain("log_f", v, "[-inf, inf)"));
    }
    Ok(v)
}

fn gk15<F: FnMut(f64) -> f64>(log_f: &mut F, a: f64, b: f64) -> Result<Panel> {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);

    let mut lv = [0.0_f64; 15];
    lv[14] = eval_clipped(log_f, center)?;
    for j in 0..7 {
        let dx = half * XGK[j];
        lv[2 * j] = eval_clipped(log_f, center - dx)?;
        lv[2 * j + 1] = eval_clipped(log_f, center + dx)?;
    }
    let shift = lv.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if shift == f64::NEG_INFINITY {
        return Ok(Panel {
            a,
            b,
            log_est: f64::NEG_INFINITY,
            log_err: f64::NEG_INFINITY,
        });
    }
    let mut fv = [0.0_f64; 15];
    for (f, l) in fv.iter_mut().zip(lv.iter()) {
        *f = (l - shift).exp();
    }

    let fc = fv[14];
    let mut kron = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let pair = fv[2 * j] + fv[2 * j + 1];
        kron += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let mean = 0.5 * kron;
    let mut asc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        asc += WGK[j] * ((fv[2 * j] - mean).abs() + (fv[2 * j + 1] - mean).abs());
    }

    // The integrand is nonnegative, so resabs equals the Kronrod sum.
    let est = kron * half;
    let asc = asc * half;
    let mut err = ((kron - gauss) * half).abs();
    if asc != 0.0 && err != 0.0 {
        err = asc * (200.0 * err / asc).powf(1.5).min(1.0);
    }
    err = err.max(50.0 * f64::EPSILON * est);

    Ok(Panel {
        a,
        b,
        log_est: shift + est.ln(),
        log_err: shift + err.ln(),
    })
}

fn totals(panels: &[Panel]) -> (f64, f64) {
    let ests: Vec<f64> = panels.iter().map(|p| p.log_est).collect();
    let errs: Vec<f64> = panels.iter().map(|p| p.log_err).collect();
    (log_sum_exp(&ests), log_sum_exp(&errs))
}

/// Default panel boundaries: a uniform grid of sixteen panels, with extra
/// cuts near both ends where `η ln x`-type terms vary fastest.
fn default_breaks() -> Vec<f64> {
    let mut v: Vec<f64> = (1..16).map(|i| i as f64 / 16.0).collect();
    v.extend_from_slice(&[1e-8, 1e-4, 1.0 - 1e-4, 1.0 - 1e-8]);
    v
}

/// `ln ∫_0^1 exp(log_f(x)) dx` by adaptive Gauss–Kronrod subdivision.
pub fn log_integrate_unit<F: FnMut(f64) -> f64>(log_f: F, spec: &QuadratureSpec) -> Result<f64> {
    log_integrate_unit_with_breaks(log_f, &default_breaks(), spec)
}

/// As [`log_integrate_unit`], starting from panels cut at `breaks`.
///
/// Points outside `(0, 1)` are ignored. Good breaks (around a sharp peak of
/// the integrand, say) mostly save work; correctness does not depend on them
/// unless a feature is narrow enough to fall between all fifteen nodes of
/// every initial panel.
pub fn log_integrate_unit_with_breaks<F: FnMut(f64) -> f64>(
    mut log_f: F,
    breaks: &[f64],
    spec: &QuadratureSpec,
) -> Result<f64> {
    spec.validate()?;
    let mut cuts: Vec<f64> = breaks
        .iter()
        .copied()
        .filter(|x| *x > 0.0 && *x < 1.0)
        .collect();
    cuts.push(0.0);
    cuts.push(1.0);
    cuts.sort_by(f64::total_cmp);
    cuts.dedup_by(|a, b| (*a - *b).abs() <= f64::EPSILON);

    let mut heap = BinaryHeap::with_capacity(spec.max_subdivisions + cuts.len());
    for w in cuts.windows(2) {
        heap.push(gk15(&mut log_f, w[0], w[1])?);
    }

    loop {
        let panels = heap.as_slice();
        let (log_total, log_err) = totals(panels);
        if log_total == f64::NEG_INFINITY {
            return Ok(log_total);
        }
        if spec.accepts(log_total, log_err) {
            return Ok(log_total);
        }
        if panels.len() >= spec.max_subdivisions {
            return Err(Error::NonConvergence {
                subdivisions: panels.len(),
                log_estimate: log_total,
                log_error: log_err,
            });
        }
        let worst = heap.pop().expect("heap is nonempty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // The panel cannot be split further in double precision.
            let (log_total, log_err) = totals(heap.as_slice());
            let log_total = super::log_add_exp(log_total, worst.log_est);
            let log_err = super::log_add_exp(log_err, worst.log_err);
            return Err(Error::NonConvergence {
                subdivisions: heap.len() + 1,
                log_estimate: log_total,
                log_error: log_err,
            });
        }
        heap.push(gk15(&mut log_f, worst.a, mid)?);
        heap.push(gk15(&mut log_f, mid, worst.b)?);
    }
}

/// Composite Simpson rule with `intervals` (rounded up to even) equal
/// intervals, in the log domain. No error estimate; used as a fallback
/// when the adaptive rule runs out of budget.
pub fn log_integrate_composite<F: FnMut(f64) -> f64>(mut log_f: F, intervals: usize) -> Result<f64> {
    let n = (intervals.max(2) + 1) & !1;
    let h = 1.0 / n as f64;
    let mut lv = Vec::with_capacity(n + 1);
    for i in 0..=n {
        let w: f64 = if i == 0 || i == n {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        lv.push(eval_clipped(&mut log_f, i as f64 * h)? + w.ln());
    }
    Ok(log_sum_exp(&lv) + (h / 3.0).ln())
}
