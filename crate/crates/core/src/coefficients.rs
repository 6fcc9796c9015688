//! Coefficient bundles for the four diffusion families.
//!
//! A [`DiffusionSpec`] packages the density `rho`, the symmetric diffusion
//! matrix `A`, the drift field `B`, their derivatives and the state-space
//! box for one of:
//!
//! * `Lbm` — `A = Id`, `B = 0`, `rho` the Liouville density of a field
//!   realization (or a constant stand-in);
//! * `DegenerateWeighted` — `A` uniformly weighted by `rho`:
//!   `λ^{-1} rho ‖ξ‖² ≤ ⟨Aξ,ξ⟩ ≤ λ rho ‖ξ‖²`;
//! * `LocallyElliptic` — smooth `A`, locally uniformly elliptic, state
//!   space weighted by `rho`;
//! * `LebesgueDegenerate` — `ψ ‖ξ‖² ≤ ⟨Aξ,ξ⟩` with Lebesgue reference
//!   measure (`rho` stores `ψ`, which also drives the kill floor).
//!
//! Coefficients are callables plus optional analytic derivatives; centered
//! finite differences fill in whatever is missing.

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde_json::json;

use crate::error::{Error, Result};
use crate::field::{evaluate_field_unchecked, field_gradient_unchecked, GridField, GridSpec};
use crate::rng::derive_stream;
use crate::verify::{json_f64, VerificationReport};

pub type ScalarField = Arc<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>;
pub type VectorField = Arc<dyn Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>;
pub type MatrixField = Arc<dyn Fn(&DVector<f64>) -> DMatrix<f64> + Send + Sync>;

/// Default kill floor for the density.
pub const DEFAULT_RHO_FLOOR: f64 = 1e-8;

/// Axis-aligned box in `R^d`.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct BoxDomain {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxDomain {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::InvalidParameter(format!(
                "box bounds must be nonempty and of equal dimension, got {} and {}",
                lo.len(),
                hi.len()
            )));
        }
        for (l, h) in lo.iter().zip(&hi) {
            if !(l < h) || !l.is_finite() || !h.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "box needs lo < hi with finite bounds, got [{l}, {h}]"
                )));
            }
        }
        Ok(Self { lo, hi })
    }

    pub fn cube(half_width: f64, dim: usize) -> Result<Self> {
        Self::new(vec![-half_width; dim], vec![half_width; dim])
    }

    pub fn from_grid(grid: &GridSpec) -> Self {
        BoxDomain {
            lo: vec![grid.origin[0], grid.origin[1]],
            hi: vec![
                grid.origin[0] + grid.extent[0],
                grid.origin[1] + grid.extent[1],
            ],
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &DVector<f64>) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(&self.hi))
                .all(|(v, (l, h))| *v >= *l && *v <= *h)
    }

    pub fn center(&self) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            self.lo.iter().zip(&self.hi).map(|(l, h)| 0.5 * (l + h)),
        )
    }

    pub fn diameter(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| (h - l) * (h - l))
            .sum::<f64>()
            .sqrt()
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).product()
    }

    /// Centered shrink by `factor` in each axis (factor 1 is the identity).
    pub fn shrink(&self, factor: f64) -> BoxDomain {
        let lo = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| 0.5 * (l + h) - 0.5 * factor * (h - l))
            .collect();
        let hi = self
            .lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| 0.5 * (l + h) + 0.5 * factor * (h - l))
            .collect();
        BoxDomain { lo, hi }
    }

    pub fn sample_uniform<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        DVector::from_iterator(
            self.dim(),
            self.lo
                .iter()
                .zip(&self.hi)
                .map(|(l, h)| rng.gen_range(*l..*h)),
        )
    }
}

/// Callables for `rho`, `A` and `B` plus optional analytic derivatives.
/// Missing derivatives fall back to centered finite differences with step
/// `fd_step`.
#[derive(Clone)]
pub struct CoefficientSet {
    pub rho: ScalarField,
    pub grad_rho: Option<VectorField>,
    pub a: MatrixField,
    pub div_a: Option<VectorField>,
    pub b: VectorField,
    pub fd_step: f64,
}

impl fmt::Debug for CoefficientSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientSet")
            .field("grad_rho", &self.grad_rho.is_some())
            .field("div_a", &self.div_a.is_some())
            .field("fd_step", &self.fd_step)
            .finish()
    }
}

impl CoefficientSet {
    pub fn rho_at(&self, x: &DVector<f64>) -> f64 {
        (self.rho)(x)
    }

    pub fn a_at(&self, x: &DVector<f64>) -> DMatrix<f64> {
        (self.a)(x)
    }

    pub fn b_at(&self, x: &DVector<f64>) -> DVector<f64> {
        (self.b)(x)
    }

    /// Gradient of `rho`: analytic when supplied, centered FD otherwise.
    pub fn grad_rho_at(&self, x: &DVector<f64>) -> DVector<f64> {
        if let Some(g) = &self.grad_rho {
            return g(x);
        }
        let d = x.len();
        let h = self.fd_step;
        let mut out = DVector::zeros(d);
        let mut probe = x.clone();
        for i in 0..d {
            probe[i] = x[i] + h;
            let fp = (self.rho)(&probe);
            probe[i] = x[i] - h;
            let fm = (self.rho)(&probe);
            probe[i] = x[i];
            out[i] = (fp - fm) / (2.0 * h);
        }
        out
    }

    /// Row divergence of `A`: component `i` is `Σ_j ∂_j a_ij`.
    pub fn div_a_at(&self, x: &DVector<f64>) -> DVector<f64> {
        if let Some(g) = &self.div_a {
            return g(x);
        }
        let d = x.len();
        let h = self.fd_step;
        let mut out = DVector::zeros(d);
        let mut probe = x.clone();
        for j in 0..d {
            probe[j] = x[j] + h;
            let ap = (self.a)(&probe);
            probe[j] = x[j] - h;
            let am = (self.a)(&probe);
            probe[j] = x[j];
            for i in 0..d {
                out[i] += (ap[(i, j)] - am[(i, j)]) / (2.0 * h);
            }
        }
        out
    }

    pub fn has_analytic_derivatives(&self) -> bool {
        self.grad_rho.is_some() && self.div_a.is_some()
    }
}

/// The four model families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Lbm,
    DegenerateWeighted,
    LocallyElliptic,
    LebesgueDegenerate,
}

impl Family {
    /// Does the generator divide the diffusion matrix by `rho`?
    pub fn weights_by_rho(&self) -> bool {
        matches!(self, Family::Lbm | Family::DegenerateWeighted)
    }
}

/// One fully specified diffusion model.
#[derive(Clone)]
pub struct DiffusionSpec {
    pub family: Family,
    pub coeffs: CoefficientSet,
    pub dim: usize,
    pub domain: BoxDomain,
    pub rho_floor: f64,
    pub preset_name: String,
    /// Uniform weight constant of the `DegenerateWeighted` family.
    pub lambda: Option<f64>,
}

impl fmt::Debug for DiffusionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DiffusionSpec")
            .field("family", &self.family)
            .field("dim", &self.dim)
            .field("preset", &self.preset_name)
            .field("rho_floor", &self.rho_floor)
            .finish()
    }
}

fn zero_vector_field(dim: usize) -> VectorField {
    Arc::new(move |_x: &DVector<f64>| DVector::zeros(dim))
}

fn identity_matrix_field(dim: usize) -> MatrixField {
    Arc::new(move |_x: &DVector<f64>| DMatrix::identity(dim, dim))
}

/// Liouville density of a field realization:
/// `rho(z) = exp(gamma·X(z) − gamma²/2·Var)`, with `X` the bilinear
/// interpolant. The interpolation happens on the field and the exponential
/// comes last, so `rho` stays strictly positive on the grid box; outside
/// the box the callables return NaN and callers must kill first.
pub fn liouville_rho(field: Arc<GridField>, gamma: f64) -> Result<CoefficientSet> {
    if !(gamma > 0.0 && gamma < 2.0) {
        return Err(Error::InvalidParameter(format!(
            "gamma must lie in (0, 2), got {gamma}"
        )));
    }
    let shift = 0.5 * gamma * gamma * field.variance;
    let diam = BoxDomain::from_grid(&field.grid).diameter();
    let f_value = Arc::clone(&field);
    let rho: ScalarField = Arc::new(move |x: &DVector<f64>| {
        let p = [x[0], x[1]];
        match evaluate_field_unchecked(&f_value, p) {
            Some(v) => (gamma * v - shift).exp(),
            None => f64::NAN,
        }
    });
    let f_grad = Arc::clone(&field);
    let rho_for_grad = Arc::clone(&rho);
    let grad_rho: VectorField = Arc::new(move |x: &DVector<f64>| {
        let p = [x[0], x[1]];
        match field_gradient_unchecked(&f_grad, p) {
            Some(g) => {
                let r = rho_for_grad(x);
                DVector::from_column_slice(&[gamma * g[0] * r, gamma * g[1] * r])
            }
            None => DVector::from_element(2, f64::NAN),
        }
    });
    Ok(CoefficientSet {
        rho,
        grad_rho: Some(grad_rho),
        a: identity_matrix_field(2),
        div_a: Some(zero_vector_field(2)),
        b: zero_vector_field(2),
        fd_step: 1e-5 * diam,
    })
}

/// How the density of a preset is chosen.
#[derive(Debug, Clone)]
enum RhoModel {
    Constant(f64),
    /// `rho = exp(−alpha‖x‖²)`
    Gaussian(f64),
    Liouville { field: Arc<GridField>, gamma: f64 },
}

impl RhoModel {
    fn build(&self, dim: usize, fd_step: f64) -> Result<(ScalarField, VectorField)> {
        match self {
            RhoModel::Constant(c) => {
                let c = *c;
                if !(c > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "constant rho must be positive, got {c}"
                    )));
                }
                Ok((Arc::new(move |_x| c), zero_vector_field(dim)))
            }
            RhoModel::Gaussian(alpha) => {
                let alpha = *alpha;
                if !(alpha > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "gaussian rho needs alpha > 0, got {alpha}"
                    )));
                }
                let value: ScalarField =
                    Arc::new(move |x: &DVector<f64>| (-alpha * x.norm_squared()).exp());
                let v = Arc::clone(&value);
                let grad: VectorField =
                    Arc::new(move |x: &DVector<f64>| x * (-2.0 * alpha * v(x)));
                Ok((value, grad))
            }
            RhoModel::Liouville { field, gamma } => {
                let cs = liouville_rho(Arc::clone(field), *gamma)?;
                let _ = fd_step;
                Ok((cs.rho, cs.grad_rho.expect("liouville grad is analytic")))
            }
        }
    }

    fn is_radial(&self) -> bool {
        matches!(self, RhoModel::Constant(_) | RhoModel::Gaussian(_))
    }
}

/// Knobs understood by [`make_preset`]; unset fields take preset-specific
/// defaults.
#[derive(Debug, Clone, Default)]
pub struct PresetOptions {
    pub dim: Option<usize>,
    pub domain: Option<BoxDomain>,
    pub rho_floor: Option<f64>,
    /// Use `rho ≡ c`.
    pub rho_const: Option<f64>,
    /// Use `rho = exp(−alpha‖x‖²)`.
    pub rho_alpha: Option<f64>,
    /// Strength of the rotational drift `b_rot·(−x₂, x₁, 0, …)`.
    pub b_rot: Option<f64>,
    /// Replace the degenerate `ψ·Id` of `lebesgue-degenerate` by `Id`.
    pub identity_a: bool,
    /// Field realization for the Liouville density.
    pub field: Option<Arc<GridField>>,
    /// Intermittency for the Liouville density (defaults to the gamma the
    /// field was built with).
    pub gamma: Option<f64>,
}

impl PresetOptions {
    pub fn with_field(field: Arc<GridField>) -> Self {
        PresetOptions {
            field: Some(field),
            ..Default::default()
        }
    }

    pub fn with_constant_rho(c: f64) -> Self {
        PresetOptions {
            rho_const: Some(c),
            ..Default::default()
        }
    }

    fn rho_model(&self, default: RhoModel) -> Result<RhoModel> {
        if let Some(field) = &self.field {
            let gamma = self.gamma.unwrap_or(field.params.gamma);
            return Ok(RhoModel::Liouville {
                field: Arc::clone(field),
                gamma,
            });
        }
        if let Some(c) = self.rho_const {
            return Ok(RhoModel::Constant(c));
        }
        if let Some(a) = self.rho_alpha {
            return Ok(RhoModel::Gaussian(a));
        }
        Ok(default)
    }
}

/// Rotational vector field `s·(−x₂, x₁, 0, …)`: divergence-free for
/// Lebesgue measure, and weighted-divergence-free for any radial weight.
fn rotational_field(strength: f64, dim: usize) -> VectorField {
    Arc::new(move |x: &DVector<f64>| {
        let mut out = DVector::zeros(dim);
        out[0] = -strength * x[1];
        out[1] = strength * x[0];
        out
    })
}

/// Build one of the registered model presets.
///
/// Registry: `lbm`, `bm`, `distorted-bm`, `aniso-degenerate`,
/// `locally-elliptic`, `lebesgue-degenerate`.
pub fn make_preset(name: &str, opts: &PresetOptions) -> Result<DiffusionSpec> {
    let dim = opts.dim.unwrap_or(2);
    if dim < 2 {
        return Err(Error::InvalidParameter(format!(
            "presets need dim >= 2, got {dim}"
        )));
    }
    let rho_floor = opts.rho_floor.unwrap_or(DEFAULT_RHO_FLOOR);
    if !(rho_floor > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "rho_floor must be positive, got {rho_floor}"
        )));
    }
    // the steep gaussian density of `locally-elliptic` clears the kill
    // floor only on a tighter default box
    let default_half_width = if name == "locally-elliptic" { 2.0 } else { 4.0 };
    let domain = match &opts.domain {
        Some(d) => {
            if d.dim() != dim {
                return Err(Error::InvalidParameter(format!(
                    "domain dimension {} does not match dim {dim}",
                    d.dim()
                )));
            }
            d.clone()
        }
        None => match &opts.field {
            Some(f) => BoxDomain::from_grid(&f.grid),
            None => BoxDomain::cube(default_half_width, dim)?,
        },
    };
    let fd_step = 1e-5 * domain.diameter();
    let b_rot = opts.b_rot.unwrap_or(if name == "lebesgue-degenerate" {
        0.5
    } else {
        0.0
    });
    if b_rot != 0.0 && dim != 2 {
        return Err(Error::InvalidParameter(
            "rotational drift is only defined for dim = 2".into(),
        ));
    }

    let spec = match name {
        "lbm" => {
            let model = opts.rho_model(RhoModel::Constant(1.0))?;
            if opts.field.is_some() && dim != 2 {
                return Err(Error::InvalidParameter(
                    "field-based rho needs dim = 2".into(),
                ));
            }
            if b_rot != 0.0 {
                return Err(Error::InvalidParameter(
                    "the lbm family has no drift term".into(),
                ));
            }
            let (rho, grad_rho) = model.build(dim, fd_step)?;
            DiffusionSpec {
                family: Family::Lbm,
                coeffs: CoefficientSet {
                    rho,
                    grad_rho: Some(grad_rho),
                    a: identity_matrix_field(dim),
                    div_a: Some(zero_vector_field(dim)),
                    b: zero_vector_field(dim),
                    fd_step,
                },
                dim,
                domain,
                rho_floor,
                preset_name: name.to_string(),
                lambda: None,
            }
        }
        "bm" => {
            // plain Brownian motion: the weighted family with rho ≡ 1
            let mut o = opts.clone();
            o.rho_const = Some(opts.rho_const.unwrap_or(1.0));
            o.field = None;
            o.rho_alpha = None;
            let mut spec = make_preset("distorted-bm", &o)?;
            spec.preset_name = "bm".into();
            return Ok(spec);
        }
        "distorted-bm" | "aniso-degenerate" => {
            let model = opts.rho_model(RhoModel::Gaussian(0.5))?;
            if b_rot != 0.0 && !model.is_radial() {
                return Err(Error::InvalidParameter(
                    "rotational drift needs a radial rho for the weighted family".into(),
                ));
            }
            let weight = if name == "aniso-degenerate" {
                if dim != 2 {
                    return Err(Error::InvalidParameter(
                        "aniso-degenerate is a planar preset".into(),
                    ));
                }
                DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0])
            } else {
                DMatrix::identity(dim, dim)
            };
            let lambda = {
                let eig = weight.clone().symmetric_eigenvalues();
                let (lo, hi): (f64, f64) = (eig.min(), eig.max());
                (1.0 / lo).max(hi)
            };
            let (rho, grad_rho) = model.build(dim, fd_step)?;
            let w_a = weight.clone();
            let rho_a = Arc::clone(&rho);
            let a: MatrixField = Arc::new(move |x: &DVector<f64>| &w_a * rho_a(x));
            let w_div = weight;
            let grad_for_div = Arc::clone(&grad_rho);
            // Σ_j ∂_j (rho·M_ij) = (M ∇rho)_i for constant M
            let div_a: VectorField = Arc::new(move |x: &DVector<f64>| &w_div * grad_for_div(x));
            DiffusionSpec {
                family: Family::DegenerateWeighted,
                coeffs: CoefficientSet {
                    rho,
                    grad_rho: Some(grad_rho),
                    a,
                    div_a: Some(div_a),
                    b: rotational_field(b_rot, dim),
                    fd_step,
                },
                dim,
                domain,
                rho_floor,
                preset_name: name.to_string(),
                lambda: Some(lambda),
            }
        }
        "locally-elliptic" => {
            let model = opts.rho_model(RhoModel::Gaussian(1.0))?;
            if b_rot != 0.0 && !model.is_radial() {
                return Err(Error::InvalidParameter(
                    "rotational drift needs a radial rho for the weighted measure".into(),
                ));
            }
            let (rho, grad_rho) = model.build(dim, fd_step)?;
            let base = if dim == 2 {
                DMatrix::from_row_slice(2, 2, &[1.25, 0.25, 0.25, 1.0])
            } else {
                DMatrix::identity(dim, dim)
            };
            // A(x) = (1 + e^{−‖x‖²}/2)·M0: smooth, bounded, elliptic
            let scalar = |x: &DVector<f64>| 1.0 + 0.5 * (-x.norm_squared()).exp();
            let m_a = base.clone();
            let a: MatrixField = Arc::new(move |x: &DVector<f64>| &m_a * scalar(x));
            let m_div = base;
            let div_a: VectorField = Arc::new(move |x: &DVector<f64>| {
                let factor = -(-x.norm_squared()).exp();
                &m_div * (x * factor)
            });
            DiffusionSpec {
                family: Family::LocallyElliptic,
                coeffs: CoefficientSet {
                    rho,
                    grad_rho: Some(grad_rho),
                    a,
                    div_a: Some(div_a),
                    b: rotational_field(b_rot, dim),
                    fd_step,
                },
                dim,
                domain,
                rho_floor,
                preset_name: name.to_string(),
                lambda: None,
            }
        }
        "lebesgue-degenerate" => {
            // psi(x) = min(x₁², 1): degenerate on the hyperplane {x₁ = 0}
            let identity_a = opts.identity_a;
            let psi: ScalarField = if identity_a {
                Arc::new(|_x| 1.0)
            } else {
                Arc::new(|x: &DVector<f64>| (x[0] * x[0]).min(1.0))
            };
            let grad_psi: VectorField = if identity_a {
                zero_vector_field(dim)
            } else {
                Arc::new(move |x: &DVector<f64>| {
                    let mut g = DVector::zeros(x.len());
                    if x[0].abs() < 1.0 {
                        g[0] = 2.0 * x[0];
                    }
                    g
                })
            };
            let psi_a = Arc::clone(&psi);
            let a: MatrixField =
                Arc::new(move |x: &DVector<f64>| DMatrix::identity(x.len(), x.len()) * psi_a(x));
            let grad_for_div = Arc::clone(&grad_psi);
            let div_a: VectorField = Arc::new(move |x: &DVector<f64>| grad_for_div(x));
            DiffusionSpec {
                family: Family::LebesgueDegenerate,
                coeffs: CoefficientSet {
                    rho: psi,
                    grad_rho: Some(grad_psi),
                    a,
                    div_a: Some(div_a),
                    b: rotational_field(b_rot, dim),
                    fd_step,
                },
                dim,
                domain,
                rho_floor,
                preset_name: name.to_string(),
                lambda: None,
            }
        }
        other => return Err(Error::UnknownPreset(other.to_string())),
    };

    if !spec.domain.contains(&spec.domain.center()) {
        return Err(Error::InvalidParameter("domain has empty interior".into()));
    }
    Ok(spec)
}

/// Deterministic probe points in the (slightly shrunken) domain.
pub fn default_probes(spec: &DiffusionSpec, count: usize, seed: u64) -> Vec<DVector<f64>> {
    let inner = spec.domain.shrink(0.9);
    let mut rng = derive_stream(seed, "probes", 0);
    (0..count).map(|_| inner.sample_uniform(&mut rng)).collect()
}

/// Structural validation of a spec at probe points: symmetry of `A`,
/// family ellipticity bounds, the floor on `rho`, analytic-versus-FD
/// derivative agreement, and a Monte Carlo weak-divergence test for `B`.
/// Failures are reported, never thrown.
pub fn validate_spec(spec: &DiffusionSpec, probes: &[DVector<f64>]) -> VerificationReport {
    let mut failed: Vec<String> = Vec::new();
    let mut details = Vec::new();
    let slack = 1e-9;

    // symmetry of A
    let mut max_asym = 0.0f64;
    for x in probes {
        let a = spec.coeffs.a_at(x);
        let scale = a.amax().max(1.0);
        max_asym = max_asym.max((&a - a.transpose()).amax() / scale);
    }
    if max_asym > 1e-10 {
        failed.push("a-symmetry".into());
    }
    details.push(("max_asymmetry".to_string(), max_asym));

    // family ellipticity
    let mut ell_violation = 0.0f64;
    for x in probes {
        let a = spec.coeffs.a_at(x);
        let eig = a.symmetric_eigenvalues();
        let (lo, hi) = (eig.min(), eig.max());
        let v: f64 = match spec.family {
            Family::Lbm => (lo - 1.0).abs().max((hi - 1.0).abs()),
            Family::DegenerateWeighted => {
                let rho = spec.coeffs.rho_at(x);
                let lambda = spec.lambda.unwrap_or(1.0);
                (rho / lambda - lo).max(hi - lambda * rho).max(0.0) / rho.max(1e-300)
            }
            Family::LocallyElliptic => (-lo).max(0.0),
            Family::LebesgueDegenerate => {
                let psi = spec.coeffs.rho_at(x);
                (psi - lo).max(0.0) / psi.max(1e-300)
            }
        };
        ell_violation = ell_violation.max(v);
    }
    if ell_violation > slack {
        failed.push("ellipticity".into());
    }
    details.push(("max_ellipticity_violation".to_string(), ell_violation));

    // rho floor
    let mut min_rho = f64::INFINITY;
    for x in probes {
        min_rho = min_rho.min(spec.coeffs.rho_at(x));
    }
    if !(min_rho > spec.rho_floor) {
        failed.push("rho-floor".into());
    }
    details.push(("min_rho".to_string(), min_rho));

    // analytic derivatives against centered finite differences
    let fd_tol = 1e-6f64.max(10.0 * spec.coeffs.fd_step * spec.coeffs.fd_step);
    let mut max_grad_err = 0.0f64;
    let mut max_diva_err = 0.0f64;
    if spec.coeffs.grad_rho.is_some() {
        let fd_only = CoefficientSet {
            grad_rho: None,
            ..spec.coeffs.clone()
        };
        for x in probes {
            let analytic = spec.coeffs.grad_rho_at(x);
            let fd = fd_only.grad_rho_at(x);
            for i in 0..analytic.len() {
                let err = (analytic[i] - fd[i]).abs() / analytic[i].abs().max(1.0);
                max_grad_err = max_grad_err.max(err);
            }
        }
        if max_grad_err > fd_tol {
            failed.push("grad-rho-fd".into());
        }
    }
    if spec.coeffs.div_a.is_some() {
        let fd_only = CoefficientSet {
            div_a: None,
            ..spec.coeffs.clone()
        };
        for x in probes {
            let analytic = spec.coeffs.div_a_at(x);
            let fd = fd_only.div_a_at(x);
            for i in 0..analytic.len() {
                let err = (analytic[i] - fd[i]).abs() / analytic[i].abs().max(1.0);
                max_diva_err = max_diva_err.max(err);
            }
        }
        if max_diva_err > fd_tol {
            failed.push("div-a-fd".into());
        }
    }
    details.push(("max_grad_rho_fd_err".to_string(), max_grad_err));
    details.push(("max_div_a_fd_err".to_string(), max_diva_err));

    // weak divergence of B: ∫⟨B,∇f⟩·w dx ≈ 0 for polynomial test functions
    let b_is_zero = probes
        .iter()
        .all(|x| spec.coeffs.b_at(x).amax() == 0.0);
    let mut worst_z = 0.0f64;
    if !b_is_zero && spec.dim == 2 {
        let weight: Box<dyn Fn(&DVector<f64>) -> f64> = match spec.family {
            Family::LebesgueDegenerate => Box::new(|_x| 1.0),
            _ => {
                let rho = Arc::clone(&spec.coeffs.rho);
                Box::new(move |x| rho(x))
            }
        };
        let grads: Vec<(&str, Box<dyn Fn(&DVector<f64>) -> DVector<f64>>)> = vec![
            ("x1", Box::new(|_x: &DVector<f64>| DVector::from_column_slice(&[1.0, 0.0]))),
            ("x2", Box::new(|_x: &DVector<f64>| DVector::from_column_slice(&[0.0, 1.0]))),
            (
                "x1x2",
                Box::new(|x: &DVector<f64>| DVector::from_column_slice(&[x[1], x[0]])),
            ),
            (
                "x1sq",
                Box::new(|x: &DVector<f64>| DVector::from_column_slice(&[2.0 * x[0], 0.0])),
            ),
        ];
        let n_mc = 20_000;
        let mut rng = derive_stream(0x5eed, "divergence-mc", 0);
        let points: Vec<DVector<f64>> = (0..n_mc)
            .map(|_| spec.domain.sample_uniform(&mut rng))
            .collect();
        for (fname, grad_f) in &grads {
            let samples: Vec<f64> = points
                .iter()
                .map(|x| spec.coeffs.b_at(x).dot(&grad_f(x)) * weight(x))
                .collect();
            let (mean, se) = crate::verify::mean_and_se(&samples);
            let z = if se > 0.0 { mean.abs() / se } else { 0.0 };
            worst_z = worst_z.max(z);
            details.push((format!("divergence_z_{fname}"), z));
        }
        if worst_z > 4.0 {
            failed.push("b-divergence".into());
        }
    }

    let mut report = VerificationReport::exact(
        format!("validate-spec:{}", spec.preset_name),
        failed.len() as f64,
        0.0,
        probes.len() as u64,
    );
    for (k, v) in details {
        report = report.with_f64_detail(&k, v);
    }
    report = report.with_detail("failed_checks", json!(failed));
    report = report.with_detail("fd_tolerance", json_f64(fd_tol));
    report
}
