//! Incomplete gamma function in log space and the quantile functions built
//! on it.
//!
//! All inversions are bracketed: a safeguarded Newton step is taken when it
//! stays inside the current bracket, otherwise the bracket is bisected.

use statrs::distribution::{ContinuousCDF, StudentsT};
use statrs::function::gamma::ln_gamma;
use std::f64::consts::{LN_2, PI};

const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;
const MAX_ITER: usize = 200_000;

/// Relative tolerance on the abscissa for every root-finding routine here.
pub const QUANTILE_TOL: f64 = 1e-14;

/// `ln Γ(a) − [(a − ½) ln a − a + ½ ln 2π]`, the Stirling remainder.
fn stirling_remainder(a: f64) -> f64 {
    if a >= 10.0 {
        let r = 1.0 / a;
        let r2 = r * r;
        r * (1.0 / 12.0 - r2 * (1.0 / 360.0 - r2 * (1.0 / 1260.0 - r2 / 1680.0)))
    } else {
        ln_gamma(a) - ((a - 0.5) * a.ln() - a + 0.5 * (2.0 * PI).ln())
    }
}

/// `a ln x − x − ln Γ(a)` evaluated without catastrophic cancellation for
/// large `a`.
fn ln_prefactor(a: f64, x: f64) -> f64 {
    if a < 10.0 {
        return a * x.ln() - x - ln_gamma(a);
    }
    let t = (x - a) / a;
    let log1pmx = t.ln_1p() - t;
    a * log1pmx + 0.5 * a.ln() - 0.5 * (2.0 * PI).ln() - stirling_remainder(a)
}

/// `ln(1 − e^l)` for `l ≤ 0`.
fn ln_one_minus_exp(l: f64) -> f64 {
    if l > -LN_2 {
        (-l.exp_m1()).ln()
    } else {
        (-l.exp()).ln_1p()
    }
}

fn ln_p_series(a: f64, x: f64) -> f64 {
    let mut ap = a;
    let mut term = 1.0;
    let mut sum = 1.0;
    for _ in 0..MAX_ITER {
        ap += 1.0;
        term *= x / ap;
        sum += term;
        if term < sum * EPS {
            break;
        }
    }
    ln_prefactor(a, x) - a.ln() + sum.ln()
}

// Modified Lentz evaluation of the continued fraction for Q(a, x).
fn ln_q_cont_frac(a: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    ln_prefactor(a, x) + h.ln()
}

/// Log of the regularized lower incomplete gamma function `P(a, x)`.
pub fn ln_gamma_p(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0);
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if x.is_infinite() {
        return 0.0;
    }
    if x < a + 1.0 {
        ln_p_series(a, x)
    } else {
        ln_one_minus_exp(ln_q_cont_frac(a, x))
    }
}

/// Log of the regularized upper incomplete gamma function `Q(a, x)`.
pub fn ln_gamma_q(a: f64, x: f64) -> f64 {
    debug_assert!(a > 0.0);
    if x <= 0.0 {
        return 0.0;
    }
    if x.is_infinite() {
        return f64::NEG_INFINITY;
    }
    if x < a + 1.0 {
        ln_one_minus_exp(ln_p_series(a, x))
    } else {
        ln_q_cont_frac(a, x)
    }
}

pub fn gamma_p(a: f64, x: f64) -> f64 {
    ln_gamma_p(a, x).exp()
}

/// Log density of Gamma(shape, rate) at `x > 0`.
pub fn ln_gamma_pdf(x: f64, shape: f64, rate: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    shape * rate.ln() - ln_gamma(shape) + (shape - 1.0) * x.ln() - rate * x
}

/// Log of `∫₀ᵘ x^{a−1} e^{−bx} dx`, the normalizer of a Gamma(a, b) density
/// truncated to `(0, u]`.
pub fn ln_truncated_gamma_norm(shape: f64, rate: f64, upper: f64) -> f64 {
    ln_gamma_p(shape, rate * upper) + ln_gamma(shape) - shape * rate.ln()
}

/// Finds the root of an increasing function on `[lo, hi]`. `f` returns the
/// value and its derivative.
fn solve_increasing(
    mut lo: f64,
    mut hi: f64,
    start: f64,
    f: impl Fn(f64) -> (f64, f64),
) -> f64 {
    let mut x = if start > lo && start < hi {
        start
    } else {
        0.5 * (lo + hi)
    };
    for _ in 0..500 {
        let (fx, dfx) = f(x);
        if fx == 0.0 {
            return x;
        }
        if fx.is_nan() {
            // Only possible at the closed ends; pull back into the interior.
            x = 0.5 * (lo + hi);
            continue;
        }
        if fx < 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let newton = x - fx / dfx;
        let next = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - x).abs() <= QUANTILE_TOL * next.abs() || hi - lo <= QUANTILE_TOL * hi.abs() {
            return next;
        }
        x = next;
    }
    x
}

/// Quantile of the standard Gamma(shape, 1) distribution.
fn std_gamma_quantile(p: f64, shape: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0 && shape > 0.0);
    let upper_tail = p > 0.5;
    let target = if upper_tail { (-p).ln_1p() } else { p.ln() };
    // Both branches are increasing in y.
    let f = |y: f64| -> (f64, f64) {
        let ln_pdf = ln_prefactor(shape, y) - y.ln();
        if upper_tail {
            let lq = ln_gamma_q(shape, y);
            (target - lq, (ln_pdf - lq).exp())
        } else {
            let lp = ln_gamma_p(shape, y);
            (lp - target, (ln_pdf - lp).exp())
        }
    };
    let mut lo = 0.0;
    let mut hi = shape.max(1.0);
    while f(hi).0 < 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    solve_increasing(lo, hi, shape.clamp(lo, hi), f)
}

/// Quantile of Gamma(shape, rate) at probability `p ∈ (0, 1)`.
pub fn gamma_quantile(p: f64, shape: f64, rate: f64) -> f64 {
    std_gamma_quantile(p, shape) / rate
}

/// Quantile of the Inverse-Gamma distribution with the given shape and
/// scale: `q_IG(p; a, b) = b / q_Gamma(1 − p; a, 1)`.
pub fn inv_gamma_quantile(p: f64, shape: f64, scale: f64) -> f64 {
    scale / std_gamma_quantile(1.0 - p, shape)
}

/// Maps `u ∈ (0, 1)` through the inverse CDF of Gamma(shape, rate)
/// restricted to `(0, upper]`. Works in log space so that it remains exact
/// when the untruncated mass below `upper` underflows.
pub fn truncated_gamma_inverse(u: f64, shape: f64, rate: f64, upper: f64) -> f64 {
    let y_max = rate * upper;
    let ln_mass = ln_gamma_p(shape, y_max);
    let target = u.ln() + ln_mass;
    let f = |y: f64| -> (f64, f64) {
        let lp = ln_gamma_p(shape, y);
        let ln_pdf = ln_prefactor(shape, y) - y.ln();
        (lp - target, (ln_pdf - lp).exp())
    };
    let mode = ((shape - 1.0).max(0.0)).min(y_max);
    let y = solve_increasing(0.0, y_max, mode, f);
    (y / rate).min(upper)
}

/// Quantile of Student's t with `df` degrees of freedom.
pub fn student_t_quantile(p: f64, df: f64) -> f64 {
    StudentsT::new(0.0, 1.0, df)
        .expect("degrees of freedom must be positive")
        .inverse_cdf(p)
}

/// `ln C(n, k)` by a finite product; exact up to rounding for the small `k`
/// used by neighbor-count normalizers.
pub fn ln_choose(n: usize, k: usize) -> f64 {
    if k > n {
        return f64::NEG_INFINITY;
    }
    let k = k.min(n - k);
    (0..k)
        .map(|j| ((n - j) as f64).ln() - ((j + 1) as f64).ln())
        .sum()
}

/// Numerically stable `ln Σ exp(v)`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}
