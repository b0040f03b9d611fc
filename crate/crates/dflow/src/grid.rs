//! Periodic collocation grid, discrete Fourier transform plumbing, spectral
//! derivatives and dealiased products.
//!
//! Conventions: `n` equispaced nodes `x_j = j L / n` on a period-`L` torus,
//! dual frequencies `xi_j = 2 pi j / L` for `j in {-n/2+1, ..., n/2}` stored
//! in FFT order (nonnegative first). The Nyquist mode `j = n/2` is unpaired
//! and is zeroed by every odd-parity operator. Fourier coefficients are
//! `c_j = (1/n) sum_k u_k exp(-i xi_j x_k)`, so the discrete inner product
//! `(L/n) sum_j f_j conj(g_j)` matches `L sum_j c_j conj(d_j)` exactly
//! (Parseval).

use std::fmt;
use std::sync::Arc;

use ndarray::Array1;
use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

struct GridInner {
    n: usize,
    period: f64,
    nodes: Vec<f64>,
    freqs: Vec<f64>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
}

/// Periodic grid with its dual frequency lattice and cached transform plans.
///
/// Cheap to clone and safe to share across threads; all state is immutable
/// after construction.
#[derive(Clone)]
pub struct Grid(Arc<GridInner>);

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("n", &self.0.n)
            .field("period", &self.0.period)
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        self.0.n == other.0.n && self.0.period == other.0.period
    }
}

impl Grid {
    /// Build a grid with `n` nodes (even, >= 16) on a torus of length `period`.
    pub fn new(n: usize, period: f64) -> Result<Self> {
        if n < 16 || n % 2 != 0 {
            return Err(Error::GridSize { n });
        }
        if !(period > 0.0) || !period.is_finite() {
            return Err(Error::GridPeriod { period });
        }
        let nodes = (0..n).map(|j| j as f64 * period / n as f64).collect();
        let freqs = (0..n)
            .map(|i| {
                let j = if i <= n / 2 {
                    i as isize
                } else {
                    i as isize - n as isize
                };
                2.0 * std::f64::consts::PI * j as f64 / period
            })
            .collect();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(n);
        let inv = planner.plan_fft_inverse(n);
        Ok(Grid(Arc::new(GridInner {
            n,
            period,
            nodes,
            freqs,
            fwd,
            inv,
        })))
    }

    pub fn n(&self) -> usize {
        self.0.n
    }

    pub fn period(&self) -> f64 {
        self.0.period
    }

    pub fn nodes(&self) -> &[f64] {
        &self.0.nodes
    }

    /// Frequencies in FFT order: `0, 2pi/L, ..., pi n/L, -2pi(n/2-1)/L, ..., -2pi/L`.
    pub fn freqs(&self) -> &[f64] {
        &self.0.freqs
    }

    /// Largest frequency magnitude on the lattice (the Nyquist mode).
    pub fn xi_max(&self) -> f64 {
        std::f64::consts::PI * self.0.n as f64 / self.0.period
    }

    /// Signed mode index of storage slot `i`.
    pub fn mode_index(&self, i: usize) -> isize {
        let n = self.0.n;
        if i <= n / 2 {
            i as isize
        } else {
            i as isize - n as isize
        }
    }

    /// Largest retained |mode index| under the 2/3-rule product dealiasing.
    ///
    /// Chosen so a pointwise product of two retained fields never aliases back
    /// into the retained band.
    pub fn dealias_cutoff(&self) -> usize {
        (self.0.n - 1) / 3
    }

    /// Unnormalized forward transform, in place.
    pub(crate) fn fft(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.0.n);
        self.0.fwd.process(buf);
    }

    /// Normalized inverse transform, in place.
    pub(crate) fn ifft(&self, buf: &mut [Complex64]) {
        debug_assert_eq!(buf.len(), self.0.n);
        self.0.inv.process(buf);
        let scale = 1.0 / self.0.n as f64;
        for v in buf.iter_mut() {
            *v *= scale;
        }
    }

    /// Multiply the spectrum of `buf` (physical samples) by `sym`, in place.
    pub(crate) fn apply_symbol(&self, buf: &mut [Complex64], sym: &[Complex64]) {
        self.fft(buf);
        for (v, m) in buf.iter_mut().zip(sym) {
            *v *= *m;
        }
        self.ifft(buf);
    }

    /// Spectral derivative symbol `(i xi)^order`, Nyquist zeroed for odd orders.
    pub(crate) fn derivative_symbol(&self, order: u32) -> Vec<Complex64> {
        let n = self.0.n;
        self.0
            .freqs
            .iter()
            .enumerate()
            .map(|(i, &xi)| {
                if order % 2 == 1 && i == n / 2 {
                    Complex64::new(0.0, 0.0)
                } else {
                    Complex64::new(0.0, xi).powu(order)
                }
            })
            .collect()
    }

    /// Zero all spectral modes with |mode index| above the dealias cutoff.
    pub(crate) fn truncate_spectrum(&self, buf: &mut [Complex64]) {
        let cut = self.dealias_cutoff() as isize;
        for i in 0..self.0.n {
            if self.mode_index(i).abs() > cut {
                buf[i] = Complex64::new(0.0, 0.0);
            }
        }
    }

    /// In-place dealias of physical samples.
    pub(crate) fn dealias_samples(&self, buf: &mut [Complex64]) {
        self.fft(buf);
        self.truncate_spectrum(buf);
        self.ifft(buf);
    }
}

/// Real scalar field sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RealField {
    grid: Grid,
    values: Array1<f64>,
}

/// Complex scalar field sampled on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    grid: Grid,
    values: Array1<Complex64>,
}

fn check_finite_real(values: &Array1<f64>) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite {
            what: "field samples".into(),
        })
    }
}

fn check_finite_complex(values: &Array1<Complex64>) -> Result<()> {
    if values.iter().all(|v| v.re.is_finite() && v.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite {
            what: "field samples".into(),
        })
    }
}

impl RealField {
    pub fn new(grid: &Grid, values: Array1<f64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::GridMismatch);
        }
        check_finite_real(&values)?;
        Ok(RealField {
            grid: grid.clone(),
            values,
        })
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().iter().map(|&x| f(x)).collect();
        RealField {
            grid: grid.clone(),
            values,
        }
    }

    pub fn zeros(grid: &Grid) -> Self {
        RealField {
            grid: grid.clone(),
            values: Array1::zeros(grid.n()),
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &Array1<f64> {
        &self.values
    }

    pub fn to_complex(&self) -> ComplexField {
        let values = self.values.mapv(|v| Complex64::new(v, 0.0));
        ComplexField {
            grid: self.grid.clone(),
            values,
        }
    }

    /// Exact derivative of the band-limited interpolant.
    pub fn derivative(&self, order: u32) -> Result<RealField> {
        if order > 4 {
            return Err(Error::DerivativeOrder { order });
        }
        let mut buf: Vec<Complex64> = self
            .values
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        let sym = self.grid.derivative_symbol(order);
        self.grid.apply_symbol(&mut buf, &sym);
        let values = buf.iter().map(|v| v.re).collect();
        Ok(RealField {
            grid: self.grid.clone(),
            values,
        })
    }

    /// 2/3-rule truncation of the field itself.
    pub fn dealiased(&self) -> RealField {
        let mut buf: Vec<Complex64> = self
            .values
            .iter()
            .map(|&v| Complex64::new(v, 0.0))
            .collect();
        self.grid.dealias_samples(&mut buf);
        let values = buf.iter().map(|v| v.re).collect();
        RealField {
            grid: self.grid.clone(),
            values,
        }
    }

    /// Pointwise product with both factors and the result truncated to the
    /// dealias band.
    pub fn mul_dealiased(&self, other: &RealField) -> Result<RealField> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let a = self.dealiased();
        let b = other.dealiased();
        let mut prod = RealField {
            grid: self.grid.clone(),
            values: &a.values * &b.values,
        };
        prod = prod.dealiased();
        Ok(prod)
    }

    pub fn l2_inner(&self, other: &RealField) -> Result<f64> {
        if self.grid != other.grid {
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

    pub fn l2_norm(&self) -> f64 {
        let w = self.grid.period() / self.grid.n() as f64;
        (w * self.values.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Samples of `x -> f(-x)` (grid reflection `j -> n - j mod n`).
    pub fn reflected(&self) -> RealField {
        let n = self.grid.n();
        let values = (0..n).map(|j| self.values[(n - j) % n]).collect();
        RealField {
            grid: self.grid.clone(),
            values,
        }
    }
}

impl ComplexField {
    pub fn new(grid: &Grid, values: Array1<Complex64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(Error::GridMismatch);
        }
        check_finite_complex(&values)?;
        Ok(ComplexField {
            grid: grid.clone(),
            values,
        })
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64) -> Complex64) -> Self {
        let values = grid.nodes().iter().map(|&x| f(x)).collect();
        ComplexField {
            grid: grid.clone(),
            values,
        }
    }

    pub fn zeros(grid: &Grid) -> Self {
        ComplexField {
            grid: grid.clone(),
            values: Array1::zeros(grid.n()),
        }
    }

    /// Field with spectrum `coeffs[i]` on mode slot `i` (coefficient of
    /// `exp(i xi_i x)`).
    pub fn from_spectrum(grid: &Grid, coeffs: &[Complex64]) -> Result<Self> {
        if coeffs.len() != grid.n() {
            return Err(Error::GridMismatch);
        }
        let mut buf: Vec<Complex64> = coeffs.iter().map(|&c| c * grid.n() as f64).collect();
        grid.ifft(&mut buf);
        Ok(ComplexField {
            grid: grid.clone(),
            values: buf.into_iter().collect(),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &Array1<Complex64> {
        &self.values
    }

    /// Fourier coefficients `c_j` in FFT order.
    pub fn spectrum(&self) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = self.values.to_vec();
        self.grid.fft(&mut buf);
        let scale = 1.0 / self.grid.n() as f64;
        buf.iter_mut().for_each(|v| *v *= scale);
        buf
    }

    pub fn re(&self) -> RealField {
        RealField {
            grid: self.grid.clone(),
            values: self.values.mapv(|v| v.re),
        }
    }

    pub fn max_abs_im(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.im.abs()))
    }

    pub fn derivative(&self, order: u32) -> Result<ComplexField> {
        if order > 4 {
            return Err(Error::DerivativeOrder { order });
        }
        let mut buf = self.values.to_vec();
        let sym = self.grid.derivative_symbol(order);
        self.grid.apply_symbol(&mut buf, &sym);
        Ok(ComplexField {
            grid: self.grid.clone(),
            values: buf.into_iter().collect(),
        })
    }

    pub fn dealiased(&self) -> ComplexField {
        let mut buf = self.values.to_vec();
        self.grid.dealias_samples(&mut buf);
        ComplexField {
            grid: self.grid.clone(),
            values: buf.into_iter().collect(),
        }
    }

    pub fn mul_dealiased(&self, other: &ComplexField) -> Result<ComplexField> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let a = self.dealiased();
        let b = other.dealiased();
        let prod = ComplexField {
            grid: self.grid.clone(),
            values: &a.values * &b.values,
        };
        Ok(prod.dealiased())
    }

    /// Pointwise multiplication by a real coefficient field, dealiased.
    pub fn coeff_mul(&self, coeff: &RealField) -> Result<ComplexField> {
        if self.grid != coeff.grid {
            return Err(Error::GridMismatch);
        }
        self.mul_dealiased(&coeff.to_complex())
    }

    /// `(L/n) sum_j f_j conj(g_j)`.
    pub fn l2_inner(&self, other: &ComplexField) -> Result<Complex64> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        let w = self.grid.period() / self.grid.n() as f64;
        Ok(self
            .values
            .iter()
            .zip(other.values.iter())
            .map(|(a, b)| a * b.conj())
            .sum::<Complex64>()
            * w)
    }

    pub fn l2_norm(&self) -> f64 {
        let w = self.grid.period() / self.grid.n() as f64;
        (w * self.values.iter().map(|v| v.norm_sqr()).sum::<f64>()).sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    pub fn conj(&self) -> ComplexField {
        ComplexField {
            grid: self.grid.clone(),
            values: self.values.mapv(|v| v.conj()),
        }
    }

    /// Samples of `x -> f(-x)` (grid reflection `j -> n - j mod n`).
    pub fn reflected(&self) -> ComplexField {
        let n = self.grid.n();
        let values = (0..n).map(|j| self.values[(n - j) % n]).collect();
        ComplexField {
            grid: self.grid.clone(),
            values,
        }
    }
}

impl std::ops::Add<&ComplexField> for &ComplexField {
    type Output = ComplexField;
    fn add(self, rhs: &ComplexField) -> ComplexField {
        assert_eq!(self.grid, rhs.grid, "field grids must match");
        ComplexField {
            grid: self.grid.clone(),
            values: &self.values + &rhs.values,
        }
    }
}

impl std::ops::Sub<&ComplexField> for &ComplexField {
    type Output = ComplexField;
    fn sub(self, rhs: &ComplexField) -> ComplexField {
        assert_eq!(self.grid, rhs.grid, "field grids must match");
        ComplexField {
            grid: self.grid.clone(),
            values: &self.values - &rhs.values,
        }
    }
}

impl std::ops::Mul<Complex64> for &ComplexField {
    type Output = ComplexField;
    fn mul(self, rhs: Complex64) -> ComplexField {
        ComplexField {
            grid: self.grid.clone(),
            values: self.values.mapv(|v| v * rhs),
        }
    }
}

impl std::ops::Mul<f64> for &ComplexField {
    type Output = ComplexField;
    fn mul(self, rhs: f64) -> ComplexField {
        ComplexField {
            grid: self.grid.clone(),
            values: self.values.mapv(|v| v * rhs),
        }
    }
}
