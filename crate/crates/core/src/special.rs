//! Bessel functions of the first kind, orders 0 and 1, and their zeros.
//!
//! Power series below |x| = 12, Hankel asymptotic expansion above. Absolute
//! accuracy is around 1e-11 over the whole real line, which is ample for the
//! 1e-6 quadrature tolerances used by the field model.

use std::f64::consts::{FRAC_PI_4, PI};

const SERIES_LIMIT: f64 = 12.0;

/// Bessel order supported by the Hankel integrals.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BesselOrder {
    Zero,
    One,
}

impl BesselOrder {
    fn nu(self) -> f64 {
        match self {
            BesselOrder::Zero => 0.0,
            BesselOrder::One => 1.0,
        }
    }

    pub fn eval(self, x: f64) -> f64 {
        match self {
            BesselOrder::Zero => bessel_j0(x),
            BesselOrder::One => bessel_j1(x),
        }
    }
}

pub fn bessel_j0(x: f64) -> f64 {
    let ax = x.abs();
    if ax < SERIES_LIMIT {
        series(0.0, ax)
    } else {
        asymptotic(0.0, ax)
    }
}

pub fn bessel_j1(x: f64) -> f64 {
    let ax = x.abs();
    let v = if ax < SERIES_LIMIT {
        series(1.0, ax)
    } else {
        asymptotic(1.0, ax)
    };
    if x < 0.0 {
        -v
    } else {
        v
    }
}

// sum_k (-1)^k (x/2)^(2k+nu) / (k! (k+nu)!)
fn series(nu: f64, x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = if nu == 0.0 { 1.0 } else { 0.5 * x };
    let mut sum = term;
    let mut k = 1.0;
    loop {
        term *= -q / (k * (k + nu));
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) && k > 0.5 * x {
            break;
        }
        k += 1.0;
        if k > 200.0 {
            break;
        }
    }
    sum
}

fn asymptotic(nu: f64, x: f64) -> f64 {
    let mu = 4.0 * nu * nu;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut a = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..60 {
        let odd = (2 * k - 1) as f64;
        a *= (mu - odd * odd) / (k as f64 * 8.0 * x);
        if a.abs() >= last {
            break;
        }
        last = a.abs();
        match k % 4 {
            1 => q += a,
            2 => p -= a,
            3 => q -= a,
            _ => p += a,
        }
        if a.abs() < 1e-17 {
            break;
        }
    }
    let chi = x - (0.5 * nu + 0.5) * PI + FRAC_PI_4;
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

/// The `m`-th positive zero (m ≥ 1) of J0 or J1.
pub fn bessel_zero(order: BesselOrder, m: usize) -> f64 {
    assert!(m >= 1, "Bessel zeros are numbered from 1");
    let nu = order.nu();
    let mu = 4.0 * nu * nu;
    let beta = (m as f64 + 0.5 * nu - 0.25) * PI;
    let b8 = 8.0 * beta;
    let mut x = beta - (mu - 1.0) / b8 - 4.0 * (mu - 1.0) * (7.0 * mu - 31.0) / (3.0 * b8.powi(3));
    for _ in 0..4 {
        let (f, df) = match order {
            BesselOrder::Zero => (bessel_j0(x), -bessel_j1(x)),
            BesselOrder::One => {
                let j1 = bessel_j1(x);
                (j1, bessel_j0(x) - j1 / x)
            }
        };
        let dx = f / df;
        x -= dx;
        if dx.abs() < 1e-15 * x {
            break;
        }
    }
    x
}

#[cfg(test)]
mod tests {
    use super::*;

    // J_n(x) = (1/π) ∫_0^π cos(nτ − x sin τ) dτ; the trapezoid rule on a
    // periodic analytic integrand converges geometrically.
    fn integral_oracle(n: f64, x: f64) -> f64 {
        let m = 4000;
        let h = PI / m as f64;
        let mut s = 0.5 * ((0.0f64).cos() + (n * PI).cos());
        for i in 1..m {
            let t = i as f64 * h;
            s += (n * t - x * t.sin()).cos();
        }
        s * h / PI
    }

    #[test]
    fn matches_integral_representation() {
        let mut x = 0.0;
        while x < 80.0 {
            assert!((bessel_j0(x) - integral_oracle(0.0, x)).abs() < 2e-11, "J0({x})");
            assert!((bessel_j1(x) - integral_oracle(1.0, x)).abs() < 2e-11, "J1({x})");
            x += 0.37;
        }
    }

    #[test]
    fn matches_reference_values() {
        // mpmath, 30 digits
        let cases = [
            (0.5, 0.938_469_807_240_812_9, 0.242_268_457_674_873_9),
            (7.5, 0.266_339_657_880_378_4, 0.135_248_427_579_705_5),
            (12.0, 0.047_689_310_796_833_54, -0.223_447_104_490_627_6),
            (30.0, -0.086_367_983_581_040_21, -0.118_751_062_616_622_9),
            (100.0, 0.019_985_850_304_223_12, -0.077_145_352_014_112_16),
        ];
        for (x, j0, j1) in cases {
            assert!((bessel_j0(x) - j0).abs() < 1e-11, "J0({x})");
            assert!((bessel_j1(x) - j1).abs() < 1e-11, "J1({x})");
        }
        assert_eq!(bessel_j0(0.0), 1.0);
        assert_eq!(bessel_j1(0.0), 0.0);
        assert_eq!(bessel_j1(-2.0), -bessel_j1(2.0));
    }

    #[test]
    fn zeros_are_roots_and_ordered() {
        assert!((bessel_zero(BesselOrder::Zero, 1) - 2.404_825_557_695_773).abs() < 1e-12);
        assert!((bessel_zero(BesselOrder::One, 1) - 3.831_705_970_207_512).abs() < 1e-12);
        for order in [BesselOrder::Zero, BesselOrder::One] {
            let mut prev = 0.0;
            for m in 1..200 {
                let z = bessel_zero(order, m);
                assert!(order.eval(z).abs() < 1e-11);
                assert!(z > prev + 2.3);
                prev = z;
            }
        }
    }
}
