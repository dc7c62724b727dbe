//! Adaptive Gauss–Kronrod quadrature and Bessel-weighted semi-infinite
//! integrals of the form ∫ g(k) J_n(kρ) dk.
//!
//! The Bessel-weighted routine integrates panel by panel between consecutive
//! zeros of J_n(kρ). When the range up to `k_max` holds many oscillations the
//! partial sums are accelerated with Wynn's epsilon algorithm.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};
use crate::special::{bessel_zero, BesselOrder};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// 7-point Gauss weights at XGK[1], XGK[3], XGK[5], XGK[7]
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
    pub max_intervals: usize,
}

impl Tolerance {
    pub fn relative(rel: f64) -> Self {
        Tolerance {
            rel,
            abs: 0.0,
            max_intervals: 2000,
        }
    }

    pub fn with_abs(mut self, abs: f64) -> Self {
        self.abs = abs;
        self
    }

    fn target(&self, value: f64) -> f64 {
        (self.rel * value.abs()).max(self.abs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub abs_error: f64,
    pub evaluations: usize,
}

impl QuadResult {
    fn failure(&self, tol: &Tolerance) -> Error {
        Error::Quadrature {
            achieved: self.abs_error / self.value.abs().max(f64::MIN_POSITIVE),
            requested: tol.rel,
        }
    }
}

/// One 15-point Kronrod rule on [a, b]; returns (estimate, |K15 − G7|).
pub fn gauss_kronrod_15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut kronrod = WGK[7] * fc;
    let mut gauss = WG[3] * fc;
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx) + f(c + dx);
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    (kronrod * h, ((kronrod - gauss) * h).abs())
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

/// Globally adaptive integration of `f` over [a, b], bisecting the segment
/// with the largest error estimate until the tolerance is met.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: Tolerance) -> Result<QuadResult> {
    let (value, error) = gauss_kronrod_15(&f, a, b);
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value, error });
    let mut total = value;
    let mut total_err = error;
    let mut evaluations = 15;
    while total_err > tol.target(total) {
        if heap.len() >= tol.max_intervals {
            let partial = QuadResult {
                value: total,
                abs_error: total_err,
                evaluations,
            };
            return Err(partial.failure(&tol));
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        let (v1, e1) = gauss_kronrod_15(&f, worst.a, mid);
        let (v2, e2) = gauss_kronrod_15(&f, mid, worst.b);
        evaluations += 30;
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
    // re-sum to shed accumulated cancellation in the running totals
    let value = heap.iter().map(|s| s.value).sum();
    let abs_error = heap.iter().map(|s| s.error).sum();
    Ok(QuadResult {
        value,
        abs_error,
        evaluations,
    })
}

/// Wynn's epsilon algorithm, fed one partial sum at a time.
#[derive(Debug, Default)]
pub struct WynnEpsilon {
    diagonal: Vec<f64>,
}

impl WynnEpsilon {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds the next partial sum and returns the current best extrapolation.
    pub fn push(&mut self, s: f64) -> f64 {
        let old = std::mem::take(&mut self.diagonal);
        let mut new = Vec::with_capacity(old.len() + 1);
        new.push(s);
        for k in 0..old.len() {
            let diff = new[k] - old[k];
            if diff == 0.0 || !diff.is_finite() {
                break;
            }
            let below = if k == 0 { 0.0 } else { old[k - 1] };
            new.push(below + 1.0 / diff);
        }
        self.diagonal = new;
        let last_even = (self.diagonal.len() - 1) & !1;
        self.diagonal[last_even]
    }
}

const DIRECT_PANEL_LIMIT: usize = 64;
const MIN_EXTRAPOLATION_PANELS: usize = 12;

/// ∫_0^{k_max} g(k) J_n(kρ) dk, with `tail_bound` an upper bound on the
/// magnitude of the neglected ∫_{k_max}^∞ contribution.
pub fn bessel_weighted_integral<G: Fn(f64) -> f64>(
    g: G,
    order: BesselOrder,
    rho: f64,
    k_max: f64,
    tail_bound: f64,
    tol: Tolerance,
) -> Result<QuadResult> {
    let panel_tol = Tolerance {
        rel: tol.rel * 1e-3,
        abs: tol.abs * 1e-3,
        max_intervals: tol.max_intervals,
    };
    if rho == 0.0 {
        return match order {
            BesselOrder::One => Ok(QuadResult {
                value: 0.0,
                abs_error: 0.0,
                evaluations: 0,
            }),
            BesselOrder::Zero => {
                let mut r = integrate(&g, 0.0, k_max, panel_tol)?;
                r.abs_error += tail_bound;
                check(r, &tol)
            }
        };
    }

    let integrand = |k: f64| g(k) * order.eval(k * rho);
    let mut lower = 0.0;
    let mut sum = 0.0;
    let mut sum_err = 0.0;
    let mut evaluations = 0;
    let mut wynn = WynnEpsilon::new();
    let mut previous_estimate = f64::NAN;
    let mut settled = 0;
    let direct = k_max * rho / std::f64::consts::PI <= DIRECT_PANEL_LIMIT as f64;

    for m in 1.. {
        let upper = (bessel_zero(order, m) / rho).min(k_max);
        let panel = integrate(integrand, lower, upper, panel_tol)?;
        sum += panel.value;
        sum_err += panel.abs_error;
        evaluations += panel.evaluations;
        if upper >= k_max {
            return check(
                QuadResult {
                    value: sum,
                    abs_error: sum_err + tail_bound,
                    evaluations,
                },
                &tol,
            );
        }
        lower = upper;
        if direct {
            continue;
        }
        let estimate = wynn.push(sum);
        if m >= MIN_EXTRAPOLATION_PANELS {
            let change = (estimate - previous_estimate).abs();
            if change <= 0.1 * tol.target(estimate) {
                settled += 1;
                if settled >= 2 {
                    return check(
                        QuadResult {
                            value: estimate,
                            abs_error: change + sum_err,
                            evaluations,
                        },
                        &tol,
                    );
                }
            } else {
                settled = 0;
            }
        }
        previous_estimate = estimate;
    }
    unreachable!("panel loop terminates at k_max")
}

fn check(r: QuadResult, tol: &Tolerance) -> Result<QuadResult> {
    if r.value.is_finite() && r.abs_error <= tol.target(r.value) {
        Ok(r)
    } else {
        Err(r.failure(tol))
    }
}
