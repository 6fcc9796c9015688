//! Adaptive quadrature.
//!
//! Two entry points cover every integral in the crate:
//!
//! * [`adaptive_simpson`] — classic bisection-adaptive Simpson on a finite
//!   interval. An interval is accepted when one more refinement changes its
//!   Simpson value by less than the local error budget; Richardson
//!   extrapolation of the accepted pair gives an extra order.
//! * [`integrate_log_half_line`] — integrals over `(0, ∞)` of smooth,
//!   unimodal, exponentially decaying integrands. The substitution
//!   `s = scale·e^t` maps the half line to the real line where both tails
//!   decay at least exponentially; the tails are expanded by doubling until
//!   negligible and the remaining finite interval goes to
//!   [`adaptive_simpson`].
//!
//! Tolerances are relative. Failure to converge within the depth/expansion
//! budget is reported as [`Error::QuadratureFailure`], never as a silently
//! inaccurate value.

use crate::error::{Error, Result};

/// Hard cap on bisection depth; 2^50 subdivisions exhaust f64 spacing.
const MAX_DEPTH: u32 = 50;

/// Tail-expansion cap for the log-mapped half line.
const MAX_EXPANSIONS: u32 = 40;

struct Panel {
    fa: f64,
    fm: f64,
    fb: f64,
    value: f64,
}

fn simpson(fa: f64, fm: f64, fb: f64, h: f64) -> f64 {
    (fa + 4.0 * fm + fb) * h / 6.0
}

fn adapt<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    panel: &Panel,
    budget: f64,
    depth: u32,
    worst: &mut f64,
) -> f64 {
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = Panel {
        fa: panel.fa,
        fm: flm,
        fb: panel.fm,
        value: simpson(panel.fa, flm, panel.fm, m - a),
    };
    let right = Panel {
        fa: panel.fm,
        fm: frm,
        fb: panel.fb,
        value: simpson(panel.fm, frm, panel.fb, b - m),
    };
    let refined = left.value + right.value;
    let err = refined - panel.value;
    if err.abs() <= 15.0 * budget || depth >= MAX_DEPTH {
        if depth >= MAX_DEPTH {
            *worst = worst.max(err.abs() / 15.0);
        }
        // Richardson: S(h/2) + (S(h/2) - S(h)) / 15
        return refined + err / 15.0;
    }
    adapt(f, a, m, &left, 0.5 * budget, depth + 1, worst)
        + adapt(f, m, b, &right, 0.5 * budget, depth + 1, worst)
}

/// Integrate `f` over `[a, b]` to relative tolerance `rel_tol`.
pub fn adaptive_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64) -> Result<f64> {
    if !(rel_tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "quadrature tolerance must be positive, got {rel_tol}"
        )));
    }
    if a == b {
        return Ok(0.0);
    }
    // Coarse composite pass sets the absolute budget for the adaptive pass.
    let n0 = 64;
    let h = (b - a) / n0 as f64;
    let mut coarse = f(a) + f(b);
    for i in 1..n0 {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        coarse += w * f(a + i as f64 * h);
    }
    coarse *= h / 3.0;
    let scale = coarse.abs().max(f64::MIN_POSITIVE);
    let budget = rel_tol * scale;

    let fa = f(a);
    let fb = f(b);
    let fm = f(0.5 * (a + b));
    let root = Panel {
        fa,
        fm,
        fb,
        value: simpson(fa, fm, fb, b - a),
    };
    let mut worst = 0.0;
    let value = adapt(&f, a, b, &root, budget, 0, &mut worst);
    if worst > budget.max(1e-14 * value.abs()) {
        return Err(Error::QuadratureFailure {
            tol: rel_tol,
            best: worst / scale,
        });
    }
    Ok(value)
}

/// Integrate `f` over `(0, ∞)` to relative tolerance `rel_tol`.
///
/// `scale` should sit near the integrand's peak (any positive value inside
/// the bulk works; tails are found by doubling). The integrand must be
/// continuous on `(0, ∞)`, bounded near 0, and decay faster than `1/s` at
/// infinity.
pub fn integrate_log_half_line<F: Fn(f64) -> f64>(f: F, scale: f64, rel_tol: f64) -> Result<f64> {
    if !(scale > 0.0) || !scale.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "integration scale must be positive and finite, got {scale}"
        )));
    }
    // g(t) = f(scale e^t) scale e^t on the whole real line
    let g = |t: f64| {
        let s = scale * t.exp();
        f(s) * s
    };
    let mut g_max = g(0.0).abs();
    for t in [-2.0, -1.0, 1.0, 2.0] {
        g_max = g_max.max(g(t).abs());
    }
    if g_max == 0.0 {
        return Ok(0.0);
    }
    let cutoff = g_max * rel_tol * 1e-3;

    let mut hi = 2.0;
    let mut expansions = 0;
    while g(hi).abs() > cutoff || g(0.75 * hi).abs() > cutoff {
        hi *= 2.0;
        expansions += 1;
        if expansions > MAX_EXPANSIONS {
            return Err(Error::QuadratureFailure {
                tol: rel_tol,
                best: g(hi).abs() / g_max,
            });
        }
    }
    let mut lo = -2.0;
    expansions = 0;
    while g(lo).abs() > cutoff || g(0.75 * lo).abs() > cutoff {
        lo *= 2.0;
        expansions += 1;
        if expansions > MAX_EXPANSIONS {
            return Err(Error::QuadratureFailure {
                tol: rel_tol,
                best: g(lo).abs() / g_max,
            });
        }
    }
    adaptive_simpson(g, lo, hi, rel_tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let v = adaptive_simpson(|x| x * x * x - 2.0 * x + 1.0, -1.0, 3.0, 1e-12).unwrap();
        // antiderivative x^4/4 - x^2 + x
        let exact = (81.0 / 4.0 - 9.0 + 3.0) - (0.25 - 1.0 - 1.0);
        assert!((v - exact).abs() < 1e-12 * exact.abs());
    }

    #[test]
    fn oscillatory_integral_converges() {
        let v = adaptive_simpson(|x| (10.0 * x).sin(), 0.0, 1.0, 1e-12).unwrap();
        let exact = (1.0 - (10.0_f64).cos()) / 10.0;
        assert!((v - exact).abs() < 1e-11, "{v} vs {exact}");
    }

    #[test]
    fn gaussian_on_half_line() {
        // ∫_0^∞ e^{-s^2/2} ds = sqrt(pi/2)
        let v = integrate_log_half_line(|s| (-0.5 * s * s).exp(), 1.0, 1e-12).unwrap();
        let exact = (std::f64::consts::PI / 2.0).sqrt();
        assert!((v - exact).abs() < 1e-11 * exact, "{v} vs {exact}");
    }

    #[test]
    fn exponential_with_remote_scale_guess() {
        // scale far from the bulk still converges via tail doubling
        let v = integrate_log_half_line(|s| (-s).exp(), 40.0, 1e-11).unwrap();
        assert!((v - 1.0).abs() < 1e-10, "{v}");
    }

    #[test]
    fn zero_width_interval() {
        assert_eq!(adaptive_simpson(|x| x, 2.0, 2.0, 1e-10).unwrap(), 0.0);
    }

    #[test]
    fn invalid_tolerance_rejected() {
        assert!(matches!(
            adaptive_simpson(|x| x, 0.0, 1.0, 0.0),
            Err(Error::InvalidParameter(_))
        ));
    }
}
