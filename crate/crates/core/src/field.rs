//! Lattice sampling of the regularized field.
//!
//! The field `X_n = Σ_{k≤n} Y_k` is sampled exactly on a rectangular grid
//! from its covariance matrix (entries from [`crate::kernels`], dense
//! Cholesky with a small diagonal jitter), and evaluated off-grid by
//! bilinear interpolation. Sampling streams are counter-based, so ensemble
//! draws are independent of evaluation order.

use std::collections::HashMap;
use std::io::{Read, Write};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kernels::{covariance_sum, KernelParams};
use crate::rng::{derive_stream, fill_standard_normal};

/// Cap on nodes for dense factorization.
pub const MAX_GRID_NODES: usize = 4096;

/// Relative size of the diagonal jitter added before factorization.
const JITTER_REL: f64 = 1e-10;

/// A rectangular lattice: origin, extent and per-axis resolution.
/// Node `(ix, iy)` sits at `origin + (ix·dx, iy·dy)`; storage is row-major
/// with index `iy·nx + ix`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub origin: [f64; 2],
    pub extent: [f64; 2],
    pub resolution: [usize; 2],
}

impl GridSpec {
    pub fn new(origin: [f64; 2], extent: [f64; 2], resolution: [usize; 2]) -> Result<Self> {
        if !(extent[0] > 0.0 && extent[1] > 0.0)
            || !extent[0].is_finite()
            || !extent[1].is_finite()
        {
            return Err(Error::InvalidParameter(format!(
                "grid extent must be positive and finite, got {extent:?}"
            )));
        }
        if resolution[0] < 2 || resolution[1] < 2 {
            return Err(Error::InvalidParameter(format!(
                "grid resolution must be at least 2 per axis, got {resolution:?}"
            )));
        }
        let nodes = resolution[0] * resolution[1];
        if nodes > MAX_GRID_NODES {
            return Err(Error::GridTooLarge {
                nodes,
                cap: MAX_GRID_NODES,
            });
        }
        Ok(Self {
            origin,
            extent,
            resolution,
        })
    }

    /// Square grid centered at the origin with side `2·half_width`.
    pub fn centered_square(half_width: f64, nodes_per_axis: usize) -> Result<Self> {
        Self::new(
            [-half_width, -half_width],
            [2.0 * half_width, 2.0 * half_width],
            [nodes_per_axis, nodes_per_axis],
        )
    }

    pub fn nx(&self) -> usize {
        self.resolution[0]
    }

    pub fn ny(&self) -> usize {
        self.resolution[1]
    }

    pub fn node_count(&self) -> usize {
        self.nx() * self.ny()
    }

    pub fn dx(&self) -> f64 {
        self.extent[0] / (self.nx() - 1) as f64
    }

    pub fn dy(&self) -> f64 {
        self.extent[1] / (self.ny() - 1) as f64
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx() + ix
    }

    pub fn node_position(&self, ix: usize, iy: usize) -> [f64; 2] {
        [
            self.origin[0] + ix as f64 * self.dx(),
            self.origin[1] + iy as f64 * self.dy(),
        ]
    }

    /// Closed bounding box membership.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.origin[0]
            && p[0] <= self.origin[0] + self.extent[0]
            && p[1] >= self.origin[1]
            && p[1] <= self.origin[1] + self.extent[1]
    }
}

/// One realization of the regularized field on a grid.
#[derive(Debug, Clone)]
pub struct GridField {
    pub grid: GridSpec,
    pub values: Vec<f64>,
    /// Pointwise variance `ln c_n` used in the Liouville normalization.
    pub variance: f64,
    pub params: KernelParams,
    pub seed: u64,
}

impl GridField {
    pub fn value_at_node(&self, ix: usize, iy: usize) -> f64 {
        self.values[self.grid.index(ix, iy)]
    }

    /// A degenerate all-zero field (what `n = 1` produces); useful as the
    /// `gamma → 0` stand-in where `rho ≡ 1`.
    pub fn zero(params: KernelParams, grid: GridSpec) -> Self {
        let n = grid.node_count();
        GridField {
            grid,
            values: vec![0.0; n],
            variance: 0.0,
            params,
            seed: 0,
        }
    }
}

/// Covariance matrix of the field on the grid: entry `(i, j)` is
/// `Σ_{k=2..n} layer_covariance(k, ‖p_i − p_j‖)`. The separation of two
/// nodes depends only on their integer offset, so kernel quadratures are
/// cached per offset and the matrix is exactly symmetric.
pub fn build_covariance(params: &KernelParams, grid: &GridSpec) -> Result<DMatrix<f64>> {
    let n = grid.node_count();
    let (nx, ny) = (grid.nx(), grid.ny());
    let (dx, dy) = (grid.dx(), grid.dy());

    let mut by_offset: HashMap<(usize, usize), f64> = HashMap::new();
    for ox in 0..nx {
        for oy in 0..ny {
            let r = (ox as f64 * dx).hypot(oy as f64 * dy);
            by_offset.insert((ox, oy), covariance_sum(params, r)?);
        }
    }

    let mut k = DMatrix::zeros(n, n);
    for iy in 0..ny {
        for ix in 0..nx {
            let i = grid.index(ix, iy);
            for jy in 0..ny {
                for jx in 0..nx {
                    let j = grid.index(jx, jy);
                    if j < i {
                        continue;
                    }
                    let off = (ix.abs_diff(jx), iy.abs_diff(jy));
                    let v = by_offset[&off];
                    k[(i, j)] = v;
                    k[(j, i)] = v;
                }
            }
        }
    }
    Ok(k)
}

/// Factorized sampler: builds the covariance once, draws fields cheaply.
#[derive(Debug, Clone)]
pub struct FieldSampler {
    params: KernelParams,
    grid: GridSpec,
    factor: DMatrix<f64>,
    variance: f64,
}

impl FieldSampler {
    pub fn new(params: KernelParams, grid: GridSpec) -> Result<Self> {
        let variance = if params.n == 1 { 0.0 } else { params.variance() };
        let k = build_covariance(&params, &grid)?;
        let factor = factorize(k)?;
        Ok(Self {
            params,
            grid,
            factor,
            variance,
        })
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn params(&self) -> &KernelParams {
        &self.params
    }

    /// Draw the field realization keyed by `seed`. Identical
    /// `(params, grid, seed)` reproduce values bit-identically.
    pub fn sample(&self, seed: u64) -> GridField {
        let n = self.grid.node_count();
        let mut rng = derive_stream(seed, "field-sample", 0);
        let mut xi = DVector::zeros(n);
        fill_standard_normal(&mut rng, xi.as_mut_slice());
        let values = (&self.factor * xi).as_slice().to_vec();
        GridField {
            grid: self.grid.clone(),
            values,
            variance: self.variance,
            params: self.params.clone(),
            seed,
        }
    }
}

/// Factor of the jittered covariance: Cholesky when it succeeds, otherwise
/// a symmetric eigendecomposition with eigenvalues floored at zero.
fn factorize(mut k: DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = k.nrows();
    if k.iter().all(|&v| v == 0.0) {
        return Ok(k); // degenerate n = 1 field
    }
    let jitter = JITTER_REL * k.trace() / n as f64;
    for i in 0..n {
        k[(i, i)] += jitter;
    }
    let psd_tol = 1e-8 * k.trace().abs().max(1.0) / n as f64;
    match nalgebra::Cholesky::new(k.clone()) {
        Some(chol) => Ok(chol.unpack()),
        None => {
            let eig = nalgebra::SymmetricEigen::new(k);
            let min_eig = eig.eigenvalues.min();
            if min_eig < -psd_tol {
                return Err(Error::CovarianceNotPSD { min_eig });
            }
            let sqrt = DVector::from_iterator(
                n,
                eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()),
            );
            let mut f = eig.eigenvectors;
            for (j, s) in sqrt.iter().enumerate() {
                f.column_mut(j).scale_mut(*s);
            }
            Ok(f)
        }
    }
}

/// Sample one field realization (factorize + draw).
pub fn sample_field(params: &KernelParams, grid: &GridSpec, seed: u64) -> Result<GridField> {
    Ok(FieldSampler::new(params.clone(), grid.clone())?.sample(seed))
}

/// Bilinear interpolation of the nodal values; exact at nodes.
pub fn evaluate_field(field: &GridField, p: [f64; 2]) -> Result<f64> {
    match evaluate_field_unchecked(field, p) {
        Some(v) => Ok(v),
        None => Err(Error::OutOfDomain(format!(
            "point ({}, {}) outside grid box",
            p[0], p[1]
        ))),
    }
}

/// Interpolation returning `None` outside the grid box; the panic-free
/// path used inside coefficient closures.
pub fn evaluate_field_unchecked(field: &GridField, p: [f64; 2]) -> Option<f64> {
    let g = &field.grid;
    if !g.contains(p) {
        return None;
    }
    let u = (p[0] - g.origin[0]) / g.dx();
    let v = (p[1] - g.origin[1]) / g.dy();
    let ix = (u.floor() as usize).min(g.nx() - 2);
    let iy = (v.floor() as usize).min(g.ny() - 2);
    let fx = u - ix as f64;
    let fy = v - iy as f64;
    let v00 = field.values[g.index(ix, iy)];
    let v10 = field.values[g.index(ix + 1, iy)];
    let v01 = field.values[g.index(ix, iy + 1)];
    let v11 = field.values[g.index(ix + 1, iy + 1)];
    Some(
        v00 * (1.0 - fx) * (1.0 - fy)
            + v10 * fx * (1.0 - fy)
            + v01 * (1.0 - fx) * fy
            + v11 * fx * fy,
    )
}

/// Gradient of the interpolant inside its cell (one-sided on cell edges).
pub fn field_gradient_unchecked(field: &GridField, p: [f64; 2]) -> Option<[f64; 2]> {
    let g = &field.grid;
    if !g.contains(p) {
        return None;
    }
    let u = (p[0] - g.origin[0]) / g.dx();
    let v = (p[1] - g.origin[1]) / g.dy();
    let ix = (u.floor() as usize).min(g.nx() - 2);
    let iy = (v.floor() as usize).min(g.ny() - 2);
    let fx = u - ix as f64;
    let fy = v - iy as f64;
    let v00 = field.values[g.index(ix, iy)];
    let v10 = field.values[g.index(ix + 1, iy)];
    let v01 = field.values[g.index(ix, iy + 1)];
    let v11 = field.values[g.index(ix + 1, iy + 1)];
    let dvdx = ((v10 - v00) * (1.0 - fy) + (v11 - v01) * fy) / g.dx();
    let dvdy = ((v01 - v00) * (1.0 - fx) + (v11 - v10) * fx) / g.dy();
    Some([dvdx, dvdy])
}

const GFLD_MAGIC: &[u8; 4] = b"GFLD";
const GFLD_VERSION: u32 = 1;

/// Binary field dump: 32-byte header (magic "GFLD", version, nx, ny,
/// reserved) followed by `nx·ny` little-endian f64 values, row-major.
pub fn write_gfld<W: Write>(field: &GridField, mut w: W) -> Result<()> {
    w.write_all(GFLD_MAGIC)?;
    w.write_all(&GFLD_VERSION.to_le_bytes())?;
    w.write_all(&(field.grid.nx() as u32).to_le_bytes())?;
    w.write_all(&(field.grid.ny() as u32).to_le_bytes())?;
    w.write_all(&[0u8; 16])?;
    for v in &field.values {
        w.write_all(&v.to_le_bytes())?;
    }
    Ok(())
}

/// Read back the raw payload of a binary field dump.
pub fn read_gfld<R: Read>(mut r: R) -> Result<(u32, u32, Vec<f64>)> {
    let mut header = [0u8; 32];
    r.read_exact(&mut header)?;
    if &header[0..4] != GFLD_MAGIC {
        return Err(Error::Parse {
            path: "gfld.magic".into(),
            message: "bad magic, expected GFLD".into(),
        });
    }
    let version = u32::from_le_bytes(header[4..8].try_into().unwrap());
    if version != GFLD_VERSION {
        return Err(Error::Parse {
            path: "gfld.version".into(),
            message: format!("unsupported version {version}"),
        });
    }
    let nx = u32::from_le_bytes(header[8..12].try_into().unwrap());
    let ny = u32::from_le_bytes(header[12..16].try_into().unwrap());
    let mut values = vec![0.0f64; (nx * ny) as usize];
    let mut buf = [0u8; 8];
    for v in values.iter_mut() {
        r.read_exact(&mut buf)?;
        *v = f64::from_le_bytes(buf);
    }
    Ok((nx, ny, values))
}

/// CSV field dump: `ix,iy,x,y,value`.
pub fn write_field_csv<W: Write>(field: &GridField, mut w: W) -> Result<()> {
    writeln!(w, "ix,iy,x,y,value")?;
    for iy in 0..field.grid.ny() {
        for ix in 0..field.grid.nx() {
            let p = field.grid.node_position(ix, iy);
            writeln!(
                w,
                "{},{},{},{},{}",
                ix,
                iy,
                p[0],
                p[1],
                field.value_at_node(ix, iy)
            )?;
        }
    }
    Ok(())
}
