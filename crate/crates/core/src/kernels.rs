//! The massive kernel family.
//!
//! Scalar building blocks for the regularized field:
//!
//! * `k_m(z) = ½ ∫_0^∞ exp(−m²‖z‖²/(2s) − s/2) ds`, a positive-type kernel
//!   with `k_m(0) = 1` and the closed form `k_m(z) = m‖z‖·K1(m‖z‖)`;
//! * the massive Green function
//!   `G(r) = ∫_0^∞ exp(−m²s/2 − r²/(2s)) ds/(2s) = K0(mr)`, which also
//!   equals `∫_1^∞ k_m(sr)/s ds`;
//! * per-layer covariances `∫_{c_{k−1}}^{c_k} k_m(sr)/s ds` that partition
//!   the Green integral at the cut sequence `(c_k)`.
//!
//! All values come from adaptive quadrature; the Bessel forms in
//! [`crate::bessel`] are the independent oracles.

use serde::{Deserialize, Serialize};

use crate::bessel;
use crate::error::{Error, Result};
use crate::quad::{adaptive_simpson, integrate_log_half_line};

/// Default relative quadrature tolerance. Kernel values feed covariance
/// matrices, so quadrature error must sit far below the Cholesky jitter.
pub const DEFAULT_QUAD_TOL: f64 = 1e-10;

/// Full parameterization of the regularized field and Liouville density:
/// mass `m`, cut sequence `(c_k)` with `c_1 = 1`, active layer count `n`,
/// intermittency `gamma`, and quadrature tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub m: f64,
    pub cuts: Vec<f64>,
    pub n: usize,
    pub gamma: f64,
    pub quad_tol: f64,
}

impl KernelParams {
    /// Validated constructor. `cuts` must start at exactly 1 and increase
    /// strictly; `gamma` must lie in the open interval (0, 2).
    pub fn new(m: f64, cuts: Vec<f64>, n: usize, gamma: f64) -> Result<Self> {
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "mass m must be positive and finite, got {m}"
            )));
        }
        if cuts.is_empty() {
            return Err(Error::InvalidParameter("cut sequence is empty".into()));
        }
        if cuts[0] != 1.0 {
            return Err(Error::InvalidParameter(format!(
                "first cut must be 1, got {}",
                cuts[0]
            )));
        }
        for w in cuts.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidParameter(format!(
                    "cuts must be strictly increasing, got {} after {}",
                    w[1], w[0]
                )));
            }
        }
        if n == 0 || n > cuts.len() {
            return Err(Error::InvalidParameter(format!(
                "layer index n = {n} outside 1..={}",
                cuts.len()
            )));
        }
        if !(gamma > 0.0 && gamma < 2.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma must lie in (0, 2), got {gamma}"
            )));
        }
        Ok(Self {
            m,
            cuts,
            n,
            gamma,
            quad_tol: DEFAULT_QUAD_TOL,
        })
    }

    /// Dyadic cut sequence `c_k = 2^{k−1}`, `k = 1..=n`.
    pub fn dyadic(m: f64, n: usize, gamma: f64) -> Result<Self> {
        let cuts = (0..n.max(1)).map(|k| (k as f64).exp2()).collect();
        Self::new(m, cuts, n.max(1), gamma)
    }

    pub fn with_quad_tol(mut self, quad_tol: f64) -> Result<Self> {
        if !(quad_tol > 0.0 && quad_tol <= 1e-3) {
            return Err(Error::InvalidParameter(format!(
                "quad_tol must lie in (0, 1e-3], got {quad_tol}"
            )));
        }
        self.quad_tol = quad_tol;
        Ok(self)
    }

    /// Pointwise variance of the regularized field, `ln c_n` under the
    /// `c_0 := c_1` convention (the first layer is degenerate).
    pub fn variance(&self) -> f64 {
        self.cuts[self.n - 1].ln()
    }

    /// Tolerance for inner integrals of nested quadratures, kept two orders
    /// below the outer tolerance so adaptivity never chases inner noise.
    fn inner_tol(&self) -> f64 {
        (self.quad_tol * 1e-2).max(1e-13)
    }
}

/// The kernel `k_m` as a function of the separation norm `r = ‖z‖`.
pub fn k_m_radial(params: &KernelParams, r: f64) -> Result<f64> {
    k_m_with_tol(params.m, r, params.quad_tol)
}

/// The kernel `k_m` at a planar separation `z`.
pub fn k_m(params: &KernelParams, z: [f64; 2]) -> Result<f64> {
    k_m_radial(params, z[0].hypot(z[1]))
}

fn k_m_with_tol(m: f64, r: f64, tol: f64) -> Result<f64> {
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "separation must be nonnegative and finite, got {r}"
        )));
    }
    let a = 0.5 * m * m * r * r;
    // integrand peaks at s = m r; any bulk point works for r = 0
    let scale = if m * r > 0.0 { m * r } else { 2.0 };
    integrate_log_half_line(|s| 0.5 * (-a / s - 0.5 * s).exp(), scale, tol)
}

/// Massive Green function at separation `r > 0` (diverges logarithmically
/// at `r = 0`).
pub fn green_massive(params: &KernelParams, r: f64) -> Result<f64> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::SingularArgument(format!(
            "green function needs r > 0, got {r}"
        )));
    }
    let m = params.m;
    let b = 0.5 * r * r;
    let half_m2 = 0.5 * m * m;
    // stationary point of −m²s/2 − r²/(2s) − ln s
    let scale = ((1.0 + m * m * r * r).sqrt() - 1.0) / (m * m);
    let scale = if scale > 0.0 { scale } else { b.max(1e-8) };
    integrate_log_half_line(
        |s| (-half_m2 * s - b / s).exp() / (2.0 * s),
        scale,
        params.quad_tol,
    )
}

/// The Green function through its layer representation
/// `∫_1^∞ k_m(sr)/s ds`, evaluated by nested quadrature. Exactly equal to
/// [`green_massive`] in the limit of vanishing tolerance; keeping both
/// routes makes the identity testable.
pub fn green_via_layers(params: &KernelParams, r: f64) -> Result<f64> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::SingularArgument(format!(
            "layer representation needs r > 0, got {r}"
        )));
    }
    let inner = params.inner_tol();
    let m = params.m;
    // substitute s = e^u: ∫_0^∞ k_m(r e^u) du, double-exponential tail
    let h = |u: f64| k_m_with_tol(m, r * u.exp(), inner).unwrap_or(f64::NAN);
    let h0 = h(0.0);
    let cutoff = h0 * params.quad_tol * 1e-3;
    let mut hi = 2.0;
    let mut expansions = 0;
    while h(hi) > cutoff {
        hi *= 2.0;
        expansions += 1;
        if expansions > 40 {
            return Err(Error::QuadratureFailure {
                tol: params.quad_tol,
                best: h(hi) / h0,
            });
        }
    }
    adaptive_simpson(h, 0.0, hi, params.quad_tol)
}

/// Covariance of the `k`-th layer at separation `r`:
/// `∫_{c_{k−1}}^{c_k} k_m(sr)/s ds`. Layer 1 is identically zero under the
/// `c_0 := c_1` convention. At `r = 0` the value is `ln(c_k/c_{k−1})`.
pub fn layer_covariance(params: &KernelParams, k: usize, r: f64) -> Result<f64> {
    let max = params.cuts.len();
    if k == 0 || k > max {
        return Err(Error::IndexOutOfRange { index: k, max });
    }
    if !(r >= 0.0) || !r.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "separation must be nonnegative and finite, got {r}"
        )));
    }
    if k == 1 {
        return Ok(0.0);
    }
    let (lo, hi) = (params.cuts[k - 2], params.cuts[k - 1]);
    let inner = params.inner_tol();
    let m = params.m;
    if r == 0.0 {
        // k_m(0) is still taken from quadrature; only the factor is hoisted
        let at_zero = k_m_with_tol(m, 0.0, inner)?;
        return adaptive_simpson(|s| at_zero / s, lo, hi, params.quad_tol);
    }
    adaptive_simpson(
        |s| k_m_with_tol(m, s * r, inner).unwrap_or(f64::NAN) / s,
        lo,
        hi,
        params.quad_tol,
    )
}

/// Field covariance at separation `r`: the sum of the active layer
/// covariances `Σ_{k=2..n} ∫_{c_{k−1}}^{c_k} k_m(sr)/s ds`.
pub fn covariance_sum(params: &KernelParams, r: f64) -> Result<f64> {
    let mut total = 0.0;
    for k in 2..=params.n {
        total += layer_covariance(params, k, r)?;
    }
    Ok(total)
}

/// One row of the Green-function table: quadrature value against the
/// Bessel oracle `K0(mr)`.
#[derive(Debug, Clone, Serialize)]
pub struct GreenTableRow {
    pub r: f64,
    pub g: f64,
    pub k0_oracle: f64,
    pub rel_err: f64,
}

/// Tabulate the Green function on `steps` points spanning `[rmin, rmax]`.
pub fn green_table(m: f64, rmin: f64, rmax: f64, steps: usize, quad_tol: f64) -> Result<Vec<GreenTableRow>> {
    if !(rmin > 0.0) || !(rmax > rmin) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < rmin < rmax, got rmin = {rmin}, rmax = {rmax}"
        )));
    }
    if steps < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least 2 steps, got {steps}"
        )));
    }
    let params = KernelParams::dyadic(m, 1, 1.0)?.with_quad_tol(quad_tol)?;
    let mut rows = Vec::with_capacity(steps);
    for i in 0..steps {
        let r = rmin + (rmax - rmin) * i as f64 / (steps - 1) as f64;
        let g = green_massive(&params, r)?;
        let k0_oracle = bessel::k0(m * r);
        let rel_err = ((g - k0_oracle) / k0_oracle).abs();
        rows.push(GreenTableRow {
            r,
            g,
            k0_oracle,
            rel_err,
        });
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(m: f64) -> KernelParams {
        KernelParams::dyadic(m, 4, 1.0).unwrap()
    }

    /// Plain composite Simpson on a fixed fine grid; deliberately
    /// independent of the adaptive engine.
    fn brute_force_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
        let n = panels * 2;
        let h = (b - a) / n as f64;
        let mut acc = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(a + i as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn k_m_at_origin_is_one() {
        let p = params(1.0);
        let v = k_m(&p, [0.0, 0.0]).unwrap();
        assert!((v - 1.0).abs() < 10.0 * p.quad_tol, "{v}");
    }

    #[test]
    fn k_m_decays_monotonically() {
        let p = params(1.0);
        let mut prev = k_m_radial(&p, 0.0).unwrap();
        for r in [0.5, 1.0, 2.0, 4.0, 8.0, 14.0] {
            let v = k_m_radial(&p, r).unwrap();
            assert!(v < prev, "k_m not decreasing at r = {r}");
            prev = v;
        }
        assert!(prev < 1e-3, "tail has not decayed: {prev}");
    }

    #[test]
    fn k_m_depends_on_norm_only() {
        let p = params(1.0);
        let a = k_m(&p, [0.6, 0.8]).unwrap();
        let b = k_m(&p, [1.0, 0.0]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn k_m_matches_bessel_oracle_at_unit_radius() {
        // k_m(z) = m‖z‖ K1(m‖z‖); frozen reference K1(1) from mpmath
        let p = params(1.0);
        let v = k_m_radial(&p, 1.0).unwrap();
        let want = 0.60190723019723457;
        assert!(((v - want) / want).abs() < 10.0 * p.quad_tol, "{v}");
        // cross-check against a brute-force fine grid on the raw integral
        let brute = brute_force_simpson(|s| 0.5 * (-0.5 / s - 0.5 * s).exp(), 1e-6, 80.0, 40_000);
        assert!(((v - brute) / v).abs() < 1e-9, "{v} vs brute {brute}");
    }

    #[test]
    fn k_m_bessel_identity_on_grid() {
        for m in [0.5, 1.0, 2.0] {
            let p = params(m);
            for i in 0..20 {
                let r = 0.1 + (5.0 - 0.1) * i as f64 / 19.0;
                let v = k_m_radial(&p, r).unwrap();
                let oracle = m * r * crate::bessel::k1(m * r);
                let rel = ((v - oracle) / oracle).abs();
                assert!(
                    rel < 10.0 * p.quad_tol,
                    "m = {m}, r = {r}: rel err {rel:e}"
                );
            }
        }
    }

    #[test]
    fn green_matches_k0_oracle() {
        let p = params(1.0);
        let v = green_massive(&p, 0.5).unwrap();
        let want = 0.92441907122766586; // K0(0.5), mpmath
        assert!(((v - want) / want).abs() < 10.0 * p.quad_tol, "{v}");
    }

    #[test]
    fn green_rejects_singular_argument() {
        let p = params(1.0);
        assert!(matches!(
            green_massive(&p, 0.0),
            Err(Error::SingularArgument(_))
        ));
        assert!(matches!(
            green_massive(&p, -1.0),
            Err(Error::SingularArgument(_))
        ));
    }

    #[test]
    fn green_two_representations_agree() {
        let p = params(1.0);
        for r in [0.3, 1.0, 2.5] {
            let direct = green_massive(&p, r).unwrap();
            let layered = green_via_layers(&p, r).unwrap();
            let rel = ((direct - layered) / direct).abs();
            assert!(rel < 1e-8, "r = {r}: {direct} vs {layered}, rel {rel:e}");
        }
    }

    #[test]
    fn green_decays_at_infinity() {
        let p = params(1.0);
        assert!(green_massive(&p, 12.0).unwrap() < 1e-4);
    }

    #[test]
    fn layer_zero_separation_is_log_ratio() {
        let p = params(1.0);
        for k in 2..=4 {
            let v = layer_covariance(&p, k, 0.0).unwrap();
            let want = (p.cuts[k - 1] / p.cuts[k - 2]).ln();
            assert!((v - want).abs() < 10.0 * p.quad_tol, "layer {k}: {v}");
        }
    }

    #[test]
    fn first_layer_vanishes() {
        let p = params(1.0);
        assert_eq!(layer_covariance(&p, 1, 0.7).unwrap(), 0.0);
    }

    #[test]
    fn layer_index_bounds() {
        let p = params(1.0);
        assert!(matches!(
            layer_covariance(&p, 0, 0.5),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(matches!(
            layer_covariance(&p, 5, 0.5),
            Err(Error::IndexOutOfRange { .. })
        ));
    }

    #[test]
    fn layers_telescope_to_unsplit_integral() {
        // Σ_{k=2..n} layer_k(r) = ∫_1^{c_n} k_m(sr)/s ds, brute-forced with
        // the Bessel-free raw double integral collapsed to the outer one
        let p = params(1.0);
        let r = 0.8;
        let total = covariance_sum(&p, r).unwrap();
        let brute = brute_force_simpson(
            |s| {
                brute_force_simpson(
                    |t| 0.5 * (-0.5 * (s * r) * (s * r) / t - 0.5 * t).exp(),
                    1e-7,
                    120.0,
                    6_000,
                ) / s
            },
            1.0,
            p.cuts[3],
            2_000,
        );
        assert!(
            ((total - brute) / total).abs() < 1e-7,
            "{total} vs brute {brute}"
        );
    }

    #[test]
    fn variance_is_log_of_active_cut() {
        let p = params(1.0);
        assert!((p.variance() - (8.0_f64).ln()).abs() < 1e-15);
    }

    #[test]
    fn params_validation() {
        assert!(KernelParams::new(0.0, vec![1.0, 2.0], 2, 1.0).is_err());
        assert!(KernelParams::new(1.0, vec![2.0, 3.0], 2, 1.0).is_err());
        assert!(KernelParams::new(1.0, vec![1.0, 1.0], 2, 1.0).is_err());
        assert!(KernelParams::new(1.0, vec![1.0, 2.0], 3, 1.0).is_err());
        assert!(KernelParams::new(1.0, vec![1.0, 2.0], 2, 2.0).is_err());
        assert!(KernelParams::new(1.0, vec![1.0, 2.0], 2, 1.0).is_ok());
        assert!(KernelParams::dyadic(1.0, 3, 1.0)
            .unwrap()
            .with_quad_tol(1e-2)
            .is_err());
    }

    #[test]
    fn outputs_are_bit_deterministic() {
        let p = params(2.0);
        let a = green_massive(&p, 1.3).unwrap();
        let b = green_massive(&p, 1.3).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        let c = k_m_radial(&p, 0.4).unwrap();
        let d = k_m_radial(&p, 0.4).unwrap();
        assert_eq!(c.to_bits(), d.to_bits());
    }

    #[test]
    fn green_table_rows_are_consistent() {
        let rows = green_table(1.0, 0.2, 3.0, 8, 1e-10).unwrap();
        assert_eq!(rows.len(), 8);
        for row in &rows {
            assert!(row.rel_err < 1e-8, "r = {}: rel {:e}", row.r, row.rel_err);
            assert!(row.g > 0.0 && row.k0_oracle > 0.0);
        }
        assert!(rows.windows(2).all(|w| w[1].r > w[0].r));
    }
}
