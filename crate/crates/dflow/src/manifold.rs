//! Embedded almost Hermitian targets.
//!
//! Three explicit isometric embeddings stand in for the abstract target:
//! the round two-sphere in R^3 (Kahler), the round six-sphere in R^7 with
//! the almost complex structure induced by the seven-dimensional cross
//! product (almost Hermitian, not Kahler), and the flat complex line R^2
//! (a validation channel where the flow collapses to a scalar PDE).

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Tolerance for accepting a point as lying on the target.
pub const POINT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Target {
    S2,
    S6,
    FlatC,
}

/// 3D cross product into `out`.
pub fn cross3(a: &[f64], b: &[f64], out: &mut [f64]) {
    out[0] = a[1] * b[2] - a[2] * b[1];
    out[1] = a[2] * b[0] - a[0] * b[2];
    out[2] = a[0] * b[1] - a[1] * b[0];
}

/// Index triples of the seven-dimensional cross product, 0-based: each
/// `(a, b, c)` encodes `e_a x e_b = e_c` together with its cyclic images.
/// This is the convention `e_i x e_{i+1} = e_{i+3}` (indices mod 7).
const FANO_TRIPLES: [[usize; 3]; 7] = [
    [0, 1, 3],
    [1, 2, 4],
    [2, 3, 5],
    [3, 4, 6],
    [4, 5, 0],
    [5, 6, 1],
    [6, 0, 2],
];

/// 7D cross product into `out`.
pub fn cross7(a: &[f64], b: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for &[i, j, k] in FANO_TRIPLES.iter() {
        out[k] += a[i] * b[j] - a[j] * b[i];
        out[i] += a[j] * b[k] - a[k] * b[j];
        out[j] += a[k] * b[i] - a[i] * b[k];
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

impl Target {
    pub fn ambient_dim(self) -> usize {
        match self {
            Target::S2 => 3,
            Target::S6 => 7,
            Target::FlatC => 2,
        }
    }

    /// Whether the almost complex structure is parallel. The six-sphere is
    /// the non-Kahler case: its J has nonvanishing covariant derivative.
    pub fn is_kahler(self) -> bool {
        !matches!(self, Target::S6)
    }

    pub fn is_sphere(self) -> bool {
        !matches!(self, Target::FlatC)
    }

    pub fn name(self) -> &'static str {
        match self {
            Target::S2 => "s2",
            Target::S6 => "s6",
            Target::FlatC => "flatc",
        }
    }

    pub fn parse(s: &str) -> Option<Target> {
        match s {
            "s2" => Some(Target::S2),
            "s6" => Some(Target::S6),
            "flatc" => Some(Target::FlatC),
            _ => None,
        }
    }

    /// Residual of the defining constraint at `u` (0 for the flat target).
    pub fn constraint_residual(self, u: &[f64]) -> f64 {
        if self.is_sphere() {
            (norm(u) - 1.0).abs()
        } else {
            0.0
        }
    }

    pub fn check_point(self, u: &[f64]) -> Result<()> {
        let res = self.constraint_residual(u);
        if res > POINT_TOL {
            Err(Error::OffManifold { residual: res })
        } else {
            Ok(())
        }
    }

    /// Unchecked tangent projection at `u`: `v - <v, u> u` for spheres,
    /// the identity for the flat target.
    pub fn project_tangent_into(self, u: &[f64], v: &[f64], out: &mut [f64]) {
        if self.is_sphere() {
            let c = dot(v, u);
            for i in 0..u.len() {
                out[i] = v[i] - c * u[i];
            }
        } else {
            out.copy_from_slice(v);
        }
    }

    pub fn project_tangent(self, u: &[f64], v: &[f64]) -> Result<Vec<f64>> {
        self.check_point(u)?;
        let mut out = vec![0.0; v.len()];
        self.project_tangent_into(u, v, &mut out);
        Ok(out)
    }

    /// Unchecked retraction: normalization for spheres, identity otherwise.
    pub fn retract_into(self, y: &[f64], out: &mut [f64]) -> Result<()> {
        if self.is_sphere() {
            let r = norm(y);
            if r < 1e-6 {
                return Err(Error::NearZeroPoint);
            }
            for i in 0..y.len() {
                out[i] = y[i] / r;
            }
        } else {
            out.copy_from_slice(y);
        }
        Ok(())
    }

    pub fn retract(self, y: &[f64]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; y.len()];
        self.retract_into(y, &mut out)?;
        Ok(out)
    }

    /// Unchecked almost complex structure at `u` applied to a tangent `x`.
    ///
    /// S2: `u x X`; S6: tangent projection of `u x X` (7D product);
    /// flat target: rotation by +90 degrees.
    pub fn apply_j_into(self, u: &[f64], x: &[f64], out: &mut [f64]) {
        match self {
            Target::S2 => cross3(u, x, out),
            Target::S6 => {
                let mut c = [0.0; 7];
                cross7(u, x, &mut c);
                self.project_tangent_into(u, &c, out);
            }
            Target::FlatC => {
                let (a, b) = (x[0], x[1]);
                out[0] = -b;
                out[1] = a;
            }
        }
    }

    pub fn apply_j(self, u: &[f64], x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(u)?;
        let tangency = if self.is_sphere() {
            dot(u, x).abs()
        } else {
            0.0
        };
        if tangency > 1e-6 * (1.0 + norm(x)) {
            return Err(Error::OffManifold { residual: tangency });
        }
        let mut out = vec![0.0; x.len()];
        self.apply_j_into(u, x, &mut out);
        Ok(out)
    }

    /// Constant-curvature Riemannian curvature tensor `R(X, Y) Z` at `u`:
    /// `<Y, Z> X - <X, Z> Y` on the round spheres, zero on the flat target.
    pub fn curvature_into(self, x: &[f64], y: &[f64], z: &[f64], out: &mut [f64]) {
        if self.is_sphere() {
            let yz = dot(y, z);
            let xz = dot(x, z);
            for i in 0..x.len() {
                out[i] = yz * x[i] - xz * y[i];
            }
        } else {
            out.iter_mut().for_each(|v| *v = 0.0);
        }
    }

    pub fn curvature(self, x: &[f64], y: &[f64], z: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.curvature_into(x, y, z, &mut out);
        out
    }

    /// Finite-difference estimate of the operator norm of `(nabla_X J)` at
    /// `u`: central difference of the sandwiched matrix `Pi J Pi` along the
    /// retracted line through `u` in direction `x`, restricted back to the
    /// tangent space. Kahler targets give zero up to the difference step.
    pub fn nabla_j_norm(self, u: &[f64], x: &[f64]) -> f64 {
        const STEP: f64 = 1e-5;
        let d = self.ambient_dim();
        let sandwich = |point: &[f64]| -> Array2<f64> {
            let mut m = Array2::zeros((d, d));
            let mut e = vec![0.0; d];
            let mut t1 = vec![0.0; d];
            let mut t2 = vec![0.0; d];
            let mut t3 = vec![0.0; d];
            for j in 0..d {
                e.iter_mut().for_each(|v| *v = 0.0);
                e[j] = 1.0;
                self.project_tangent_into(point, &e, &mut t1);
                self.apply_j_into(point, &t1, &mut t2);
                self.project_tangent_into(point, &t2, &mut t3);
                for i in 0..d {
                    m[(i, j)] = t3[i];
                }
            }
            m
        };
        let mut up = vec![0.0; d];
        let mut um = vec![0.0; d];
        let shift = |sign: f64, out: &mut Vec<f64>| {
            let moved: Vec<f64> = u.iter().zip(x).map(|(a, b)| a + sign * STEP * b).collect();
            self.retract_into(&moved, out)
                .expect("step stays away from the origin");
        };
        shift(1.0, &mut up);
        shift(-1.0, &mut um);
        let diff = (sandwich(&up) - sandwich(&um)) / (2.0 * STEP);
        // restrict to the tangent space at u on both sides
        let mut restricted = Array2::zeros((d, d));
        let mut col = vec![0.0; d];
        let mut t1 = vec![0.0; d];
        let mut t2 = vec![0.0; d];
        for j in 0..d {
            let mut e = vec![0.0; d];
            e[j] = 1.0;
            self.project_tangent_into(u, &e, &mut t1);
            for i in 0..d {
                col[i] = (0..d).map(|k| diff[(i, k)] * t1[k]).sum();
            }
            self.project_tangent_into(u, &col, &mut t2);
            for i in 0..d {
                restricted[(i, j)] = t2[i];
            }
        }
        spectral_norm(&restricted)
    }
}

/// Largest singular value by power iteration on `M^T M`.
fn spectral_norm(m: &Array2<f64>) -> f64 {
    let d = m.ncols();
    let mt_m = m.t().dot(m);
    let mut v = vec![1.0 / (d as f64).sqrt(); d];
    let mut lambda = 0.0;
    for _ in 0..200 {
        let mut w = vec![0.0; d];
        for i in 0..d {
            w[i] = (0..d).map(|j| mt_m[(i, j)] * v[j]).sum();
        }
        let nw = norm(&w);
        if nw < 1e-300 {
            return 0.0;
        }
        lambda = nw;
        for i in 0..d {
            v[i] = w[i] / nw;
        }
    }
    lambda.sqrt()
}

/// Tangent vectors along a sampled curve: one ambient `d`-vector per node.
#[derive(Debug, Clone)]
pub struct TangentField {
    grid: Grid,
    values: Array2<f64>,
}

impl TangentField {
    pub fn new(grid: &Grid, values: Array2<f64>) -> Result<Self> {
        if values.ncols() != grid.n() {
            return Err(Error::GridMismatch);
        }
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite {
                what: "tangent field".into(),
            });
        }
        Ok(TangentField {
            grid: grid.clone(),
            values,
        })
    }

    pub fn zeros(grid: &Grid, dim: usize) -> Self {
        TangentField {
            grid: grid.clone(),
            values: Array2::zeros((dim, grid.n())),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut Array2<f64> {
        &mut self.values
    }

    pub fn dim(&self) -> usize {
        self.values.nrows()
    }

    /// `integral of h(V, V) dx`, the squared section norm.
    pub fn l2_norm_sq(&self) -> f64 {
        let w = self.grid.period() / self.grid.n() as f64;
        w * self.values.iter().map(|v| v * v).sum::<f64>()
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_sq().sqrt()
    }

    pub fn l2_inner(&self, other: &TangentField) -> Result<f64> {
        if self.grid != other.grid || self.values.dim() != other.values.dim() {
            return Err(Error::GridMismatch);
        }
        let w = self.grid.period() / self.grid.n() as f64;
        Ok(w * self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| a * b)
            .sum::<f64>())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, s: f64) -> TangentField {
        TangentField {
            grid: self.grid.clone(),
            values: self.values.mapv(|v| v * s),
        }
    }

    pub fn add(&self, other: &TangentField) -> TangentField {
        TangentField {
            grid: self.grid.clone(),
            values: &self.values + &other.values,
        }
    }

    pub fn sub(&self, other: &TangentField) -> TangentField {
        TangentField {
            grid: self.grid.clone(),
            values: &self.values - &other.values,
        }
    }
}
