//! Compactly supported smooth test functions.
//!
//! Martingale and generator checks quantify over smooth functions with
//! compact support. The concrete family used here is
//! `u(x) = (monomial) · (plateau bump)`: each axis gets a C-infinity
//! cutoff that is exactly 1 on an inner plateau and exactly 0 outside the
//! support box, built from the classic transition
//! `S(θ) = f(θ) / (f(θ) + f(1−θ))` with `f(θ) = e^{−1/θ}`. Values,
//! gradients and Hessians are all closed-form; finite differences serve
//! only as a validation path.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::coefficients::{BoxDomain, MatrixField, ScalarField, VectorField};
use crate::error::{Error, Result};

/// `f(θ) = e^{−1/θ}` for `θ > 0`, else 0; the building block of the
/// smooth step. Underflow truncates the far tails to exact zeros, which
/// keeps supports sharp.
#[inline]
fn edge(theta: f64) -> f64 {
    if theta > 0.0 {
        (-1.0 / theta).exp()
    } else {
        0.0
    }
}

/// Smooth step and its first two derivatives: `S ≡ 0` for `θ ≤ 0`,
/// `S ≡ 1` for `θ ≥ 1`, C-infinity in between.
fn smooth_step(theta: f64) -> (f64, f64, f64) {
    if theta <= 0.0 {
        return (0.0, 0.0, 0.0);
    }
    if theta >= 1.0 {
        return (1.0, 0.0, 0.0);
    }
    let f = edge(theta);
    let g = edge(1.0 - theta);
    let denom = f + g;
    if denom == 0.0 {
        // both tails underflowed; resolve by side
        return if theta >= 0.5 {
            (1.0, 0.0, 0.0)
        } else {
            (0.0, 0.0, 0.0)
        };
    }
    let t2 = theta * theta;
    let omt = 1.0 - theta;
    let omt2 = omt * omt;
    let fp = f / t2;
    let gp = -g / omt2;
    let fpp = f * (1.0 - 2.0 * theta) / (t2 * t2);
    let gpp = g * (2.0 * theta - 1.0) / (omt2 * omt2);
    let n = fp * g - f * gp;
    let np = fpp * g - f * gpp;
    let s = f / denom;
    let sp = n / (denom * denom);
    let spp = (np * denom - 2.0 * n * (fp + gp)) / (denom * denom * denom);
    (s, sp, spp)
}

/// One axis of the product cutoff.
#[derive(Debug, Clone, Copy)]
struct CutoffAxis {
    center: f64,
    half: f64,
    /// 1 / (half − plateau radius)
    inv_edge: f64,
}

impl CutoffAxis {
    fn new(lo: f64, hi: f64, plateau_frac: f64) -> Self {
        let center = 0.5 * (lo + hi);
        let half = 0.5 * (hi - lo);
        let plateau = plateau_frac * half;
        CutoffAxis {
            center,
            half,
            inv_edge: 1.0 / (half - plateau),
        }
    }

    /// `(χ, χ', χ'')` at `x`.
    fn eval(&self, x: f64) -> (f64, f64, f64) {
        let t = x - self.center;
        let theta = (self.half - t.abs()) * self.inv_edge;
        let (s, sp, spp) = smooth_step(theta);
        let dtheta = -t.signum() * self.inv_edge;
        (s, sp * dtheta, spp * self.inv_edge * self.inv_edge)
    }
}

#[derive(Debug, Clone)]
struct ProductBump {
    axes: Vec<CutoffAxis>,
}

impl ProductBump {
    fn new(support: &BoxDomain, plateau_frac: f64) -> Result<Self> {
        if !(plateau_frac > 0.0 && plateau_frac < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "plateau fraction must lie in (0, 1), got {plateau_frac}"
            )));
        }
        let axes = support
            .lo
            .iter()
            .zip(&support.hi)
            .map(|(&l, &h)| CutoffAxis::new(l, h, plateau_frac))
            .collect();
        Ok(ProductBump { axes })
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        self.axes
            .iter()
            .zip(x.iter())
            .map(|(a, &xi)| a.eval(xi).0)
            .product()
    }

    /// Value, gradient and Hessian of the product of axis cutoffs.
    fn with_derivs(&self, x: &DVector<f64>) -> (f64, DVector<f64>, DMatrix<f64>) {
        let d = self.axes.len();
        let evals: Vec<(f64, f64, f64)> = self
            .axes
            .iter()
            .zip(x.iter())
            .map(|(a, &xi)| a.eval(xi))
            .collect();
        let value: f64 = evals.iter().map(|e| e.0).product();
        let mut grad = DVector::zeros(d);
        let mut hess = DMatrix::zeros(d, d);
        // product over all axes except a masked set; zero factors make the
        // naive quotient unusable, so recompute the partial products
        let partial = |skip_a: usize, skip_b: usize| -> f64 {
            evals
                .iter()
                .enumerate()
                .filter(|(k, _)| *k != skip_a && *k != skip_b)
                .map(|(_, e)| e.0)
                .product()
        };
        for i in 0..d {
            grad[i] = evals[i].1 * partial(i, i);
            for j in 0..d {
                if i == j {
                    hess[(i, i)] = evals[i].2 * partial(i, i);
                } else {
                    hess[(i, j)] = evals[i].1 * evals[j].1 * partial(i, j);
                }
            }
        }
        (value, grad, hess)
    }
}

fn monomial_with_derivs(exps: &[u32], x: &DVector<f64>) -> (f64, DVector<f64>, DMatrix<f64>) {
    let d = exps.len();
    let value: f64 = exps
        .iter()
        .zip(x.iter())
        .map(|(&e, &xi)| xi.powi(e as i32))
        .collect::<Vec<_>>()
        .iter()
        .product();
    let term = |i: usize, drop: u32| -> f64 {
        // x_i^{e_i − drop}, zero if the exponent would go negative
        let e = exps[i];
        if e < drop {
            0.0
        } else {
            x[i].powi((e - drop) as i32)
        }
    };
    let others = |skip_a: usize, skip_b: usize| -> f64 {
        (0..d)
            .filter(|k| *k != skip_a && *k != skip_b)
            .map(|k| x[k].powi(exps[k] as i32))
            .product()
    };
    let mut grad = DVector::zeros(d);
    let mut hess = DMatrix::zeros(d, d);
    for i in 0..d {
        let ei = exps[i] as f64;
        grad[i] = ei * term(i, 1) * others(i, i);
        for j in 0..d {
            if i == j {
                hess[(i, i)] = ei * (ei - 1.0) * term(i, 2) * others(i, i);
            } else {
                let ej = exps[j] as f64;
                hess[(i, j)] = ei * ej * term(i, 1) * term(j, 1) * others(i, j);
            }
        }
    }
    (value, grad, hess)
}

/// A smooth compactly supported function with closed-form value, gradient
/// and Hessian, vanishing identically outside `support`.
#[derive(Clone)]
pub struct TestFunction {
    pub name: String,
    pub support: BoxDomain,
    value: ScalarField,
    grad: VectorField,
    hess: MatrixField,
}

impl std::fmt::Debug for TestFunction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TestFunction")
            .field("name", &self.name)
            .field("support", &self.support)
            .finish()
    }
}

impl TestFunction {
    pub fn value(&self, x: &DVector<f64>) -> f64 {
        (self.value)(x)
    }

    pub fn grad(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.grad)(x)
    }

    pub fn hess(&self, x: &DVector<f64>) -> DMatrix<f64> {
        (self.hess)(x)
    }

    /// Pure plateau bump: exactly 1 on the inner `plateau_frac` box,
    /// exactly 0 outside the support.
    pub fn bump(support: BoxDomain, plateau_frac: f64) -> Result<Self> {
        Self::monomial_bump(&vec![0; support.dim()], support, plateau_frac)
    }

    /// `(Π x_k^{e_k}) ·` bump. Exponents are absolute coordinates, not
    /// centered on the box.
    pub fn monomial_bump(exps: &[u32], support: BoxDomain, plateau_frac: f64) -> Result<Self> {
        if exps.len() != support.dim() {
            return Err(Error::InvalidParameter(format!(
                "exponents dimension {} does not match box dimension {}",
                exps.len(),
                support.dim()
            )));
        }
        let bump = ProductBump::new(&support, plateau_frac)?;
        let name = if exps.iter().all(|&e| e == 0) {
            "bump".to_string()
        } else {
            let mono: Vec<String> = exps
                .iter()
                .enumerate()
                .filter(|(_, &e)| e > 0)
                .map(|(i, &e)| {
                    if e == 1 {
                        format!("x{}", i + 1)
                    } else {
                        format!("x{}^{}", i + 1, e)
                    }
                })
                .collect();
            format!("{}*bump", mono.join("*"))
        };
        let exps_v = exps.to_vec();
        let bump_v = bump.clone();
        let value: ScalarField = Arc::new(move |x: &DVector<f64>| {
            let b = bump_v.value(x);
            if b == 0.0 {
                return 0.0;
            }
            let p: f64 = exps_v
                .iter()
                .zip(x.iter())
                .map(|(&e, &xi)| xi.powi(e as i32))
                .product();
            p * b
        });
        let exps_g = exps.to_vec();
        let bump_g = bump.clone();
        let grad: VectorField = Arc::new(move |x: &DVector<f64>| {
            let (b, gb, _)= bump_g.with_derivs(x);
            let (p, gp, _) = monomial_with_derivs(&exps_g, x);
            gp * b + gb * p
        });
        let exps_h = exps.to_vec();
        let bump_h = bump;
        let hess: MatrixField = Arc::new(move |x: &DVector<f64>| {
            let (b, gb, hb) = bump_h.with_derivs(x);
            let (p, gp, hp) = monomial_with_derivs(&exps_h, x);
            hp * b + &gp * gb.transpose() + &gb * gp.transpose() + hb * p
        });
        Ok(TestFunction {
            name,
            support,
            value,
            grad,
            hess,
        })
    }

    /// The pointwise square `u²`, with derivatives by the product rule.
    pub fn squared(&self) -> TestFunction {
        let v = Arc::clone(&self.value);
        let value: ScalarField = Arc::new(move |x: &DVector<f64>| {
            let u = v(x);
            u * u
        });
        let v2 = Arc::clone(&self.value);
        let g2 = Arc::clone(&self.grad);
        let grad: VectorField = Arc::new(move |x: &DVector<f64>| g2(x) * (2.0 * v2(x)));
        let v3 = Arc::clone(&self.value);
        let g3 = Arc::clone(&self.grad);
        let h3 = Arc::clone(&self.hess);
        let hess: MatrixField = Arc::new(move |x: &DVector<f64>| {
            let u = v3(x);
            let g = g3(x);
            let mut h = h3(x) * (2.0 * u);
            h += 2.0 * &g * g.transpose();
            h
        });
        TestFunction {
            name: format!("({})^2", self.name),
            support: self.support.clone(),
            value,
            grad,
            hess,
        }
    }

    /// The default battery used by the verification suites: a plateau
    /// bump, a signed linear bump and a mixed quadratic bump.
    pub fn standard_battery(support: &BoxDomain) -> Vec<TestFunction> {
        let d = support.dim();
        let mut exps_x1 = vec![0; d];
        exps_x1[0] = 1;
        let mut exps_x1x2 = vec![0; d];
        exps_x1x2[0] = 1;
        if d > 1 {
            exps_x1x2[1] = 1;
        } else {
            exps_x1x2[0] = 2;
        }
        vec![
            TestFunction::bump(support.clone(), 0.5).expect("valid battery support"),
            TestFunction::monomial_bump(&exps_x1, support.clone(), 0.5)
                .expect("valid battery support"),
            TestFunction::monomial_bump(&exps_x1x2, support.clone(), 0.5)
                .expect("valid battery support"),
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::derive_stream;

    fn support() -> BoxDomain {
        BoxDomain::new(vec![-2.0, -1.0], vec![2.0, 3.0]).unwrap()
    }

    fn v2(x: f64, y: f64) -> DVector<f64> {
        DVector::from_column_slice(&[x, y])
    }

    #[test]
    fn smooth_step_endpoints_are_exact() {
        assert_eq!(smooth_step(-0.5), (0.0, 0.0, 0.0));
        assert_eq!(smooth_step(0.0), (0.0, 0.0, 0.0));
        assert_eq!(smooth_step(1.0), (1.0, 0.0, 0.0));
        assert_eq!(smooth_step(2.0), (1.0, 0.0, 0.0));
        let (s, _, _) = smooth_step(0.5);
        assert_eq!(s, 0.5); // symmetry point
    }

    #[test]
    fn smooth_step_derivatives_match_fd() {
        for theta in [0.1, 0.3, 0.5, 0.7, 0.9] {
            let h = 1e-6;
            let (_, sp, spp) = smooth_step(theta);
            let (sph, _, _) = smooth_step(theta + h);
            let (smh, _, _) = smooth_step(theta - h);
            let fd1 = (sph - smh) / (2.0 * h);
            assert!((sp - fd1).abs() < 1e-8, "theta {theta}: {sp} vs {fd1}");
            // wider step for the second difference to stay above f64 noise
            let h2 = 1e-4;
            let (s0, _, _) = smooth_step(theta);
            let (sp2, _, _) = smooth_step(theta + h2);
            let (sm2, _, _) = smooth_step(theta - h2);
            let fd2 = (sp2 - 2.0 * s0 + sm2) / (h2 * h2);
            assert!((spp - fd2).abs() < 1e-5, "theta {theta}: {spp} vs {fd2}");
        }
    }

    #[test]
    fn bump_is_one_on_plateau_and_zero_outside() {
        let u = TestFunction::bump(support(), 0.5).unwrap();
        // plateau: within half the half-width of the center (0, 1)
        assert_eq!(u.value(&v2(0.0, 1.0)), 1.0);
        assert_eq!(u.value(&v2(0.9, 1.5)), 1.0);
        assert_eq!(u.grad(&v2(0.5, 1.0)), DVector::zeros(2));
        assert_eq!(u.hess(&v2(0.5, 1.0)), DMatrix::zeros(2, 2));
        // outside the support box
        assert_eq!(u.value(&v2(2.5, 1.0)), 0.0);
        assert_eq!(u.value(&v2(0.0, -1.5)), 0.0);
        assert_eq!(u.grad(&v2(3.0, 0.0)), DVector::zeros(2));
        // strictly between plateau and edge: in (0, 1)
        let mid = u.value(&v2(1.5, 1.0));
        assert!(mid > 0.0 && mid < 1.0, "{mid}");
    }

    #[test]
    fn gradient_and_hessian_match_finite_differences() {
        let mut rng = derive_stream(17, "testfn", 0);
        let functions = vec![
            TestFunction::bump(support(), 0.5).unwrap(),
            TestFunction::monomial_bump(&[1, 0], support(), 0.5).unwrap(),
            TestFunction::monomial_bump(&[1, 1], support(), 0.4).unwrap(),
            TestFunction::monomial_bump(&[2, 0], support(), 0.6).unwrap(),
            TestFunction::monomial_bump(&[2, 3], support(), 0.5).unwrap(),
        ];
        let h = 1e-5;
        for u in &functions {
            for _ in 0..40 {
                let x = support().shrink(0.95).sample_uniform(&mut rng);
                let g = u.grad(&x);
                let hess = u.hess(&x);
                for i in 0..2 {
                    let mut xp = x.clone();
                    let mut xm = x.clone();
                    xp[i] += h;
                    xm[i] -= h;
                    let fd = (u.value(&xp) - u.value(&xm)) / (2.0 * h);
                    let scale = g[i].abs().max(1.0);
                    assert!(
                        (g[i] - fd).abs() / scale < 1e-7,
                        "{}: grad[{i}] {} vs fd {}",
                        u.name,
                        g[i],
                        fd
                    );
                    for j in 0..2 {
                        let mut xpp = x.clone();
                        xpp[i] += h;
                        xpp[j] += h;
                        let mut xpm = x.clone();
                        xpm[i] += h;
                        xpm[j] -= h;
                        let mut xmp = x.clone();
                        xmp[i] -= h;
                        xmp[j] += h;
                        let mut xmm = x.clone();
                        xmm[i] -= h;
                        xmm[j] -= h;
                        let fd2 = (u.value(&xpp) - u.value(&xpm) - u.value(&xmp)
                            + u.value(&xmm))
                            / (4.0 * h * h);
                        let scale = hess[(i, j)].abs().max(1.0);
                        assert!(
                            (hess[(i, j)] - fd2).abs() / scale < 1e-4,
                            "{}: hess[{i},{j}] {} vs fd {}",
                            u.name,
                            hess[(i, j)],
                            fd2
                        );
                    }
                }
            }
        }
    }

    #[test]
    fn monomial_values_on_plateau() {
        let u = TestFunction::monomial_bump(&[2, 1], support(), 0.5).unwrap();
        // bump ≡ 1 near the center (0, 1): u = x1² x2
        assert_eq!(u.value(&v2(0.5, 1.2)), 0.25 * 1.2);
        let g = u.grad(&v2(0.5, 1.2));
        assert!((g[0] - 2.0 * 0.5 * 1.2).abs() < 1e-15);
        assert!((g[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn squared_matches_pointwise_square() {
        let u = TestFunction::monomial_bump(&[1, 1], support(), 0.5).unwrap();
        let usq = u.squared();
        let mut rng = derive_stream(23, "testfn-sq", 0);
        let h = 1e-5;
        for _ in 0..25 {
            let x = support().shrink(0.95).sample_uniform(&mut rng);
            let v = u.value(&x);
            assert_eq!(usq.value(&x), v * v);
            let g = usq.grad(&x);
            for i in 0..2 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] += h;
                xm[i] -= h;
                let fd = (usq.value(&xp) - usq.value(&xm)) / (2.0 * h);
                assert!((g[i] - fd).abs() / g[i].abs().max(1.0) < 1e-7);
            }
        }
    }

    #[test]
    fn battery_has_three_members_with_common_support() {
        let fns = TestFunction::standard_battery(&support());
        assert_eq!(fns.len(), 3);
        for f in &fns {
            assert_eq!(f.support, support());
            assert_eq!(f.value(&v2(2.4, 0.0)), 0.0);
        }
    }

    #[test]
    fn dimension_mismatch_rejected() {
        assert!(TestFunction::monomial_bump(&[1], support(), 0.5).is_err());
        assert!(TestFunction::bump(support(), 0.0).is_err());
        assert!(TestFunction::bump(support(), 1.0).is_err());
    }
}
