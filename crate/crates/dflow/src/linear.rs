//! The auxiliary one-dimensional linear dispersive problem
//!
//! ```text
//! U_t + U_xxx + i (a(x) U_x)_x + b_x(x) U_x + c(x) U = F(t, x)
//! ```
//!
//! with real smooth periodic coefficients. The first-order coefficient is an
//! exact derivative, which makes the scalar gauge
//! `lambda = 1 - (i/3) b(x) p(D)` effective: conjugating the stationary part
//! through `lambda` (and through the smoothing operator `<D>^{-1}`) leaves
//! only L2-bounded remainders, and the norm
//! `N(U)^2 = |lambda U|^2 + |<D>^{-1} U|^2` satisfies a Gronwall inequality
//! along the evolution.
//!
//! Everything here is a scalar rehearsal of the bundle gauge used by the
//! geometric flow; the module exposes each operator and remainder as a
//! testable object.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{ComplexField, Grid, RealField};
use crate::multiplier::{smoothed_recip_times_xi, Multiplier, Parity};

type Forcing = Arc<dyn Fn(f64, &Grid) -> ComplexField + Send + Sync>;

/// Coefficient bundle of the linear problem, with spectrally precomputed
/// derivatives of `b` and the multipliers the gauge machinery needs.
#[derive(Clone)]
pub struct LinearCoeffs {
    grid: Grid,
    a: RealField,
    b: RealField,
    c: RealField,
    b_x: RealField,
    b_xx: RealField,
    b_xxx: RealField,
    recip: Multiplier,
    bessel_inv: Multiplier,
    /// `p(xi) xi` (even real; exactly 1 outside the transition band).
    recip_times_xi: Multiplier,
    /// `i xi (1 - p(xi) xi)` (odd imaginary; supported on `|xi| < 2`).
    dx_complement: Multiplier,
    forcing: Option<Forcing>,
}

impl std::fmt::Debug for LinearCoeffs {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LinearCoeffs")
            .field("grid", &self.grid)
            .field("forcing", &self.forcing.is_some())
            .finish()
    }
}

impl LinearCoeffs {
    pub fn new(grid: &Grid, a: RealField, b: RealField, c: RealField) -> Result<Self> {
        for f in [&a, &b, &c] {
            if f.grid() != grid {
                return Err(Error::GridMismatch);
            }
        }
        let b_x = b.derivative(1)?;
        let b_xx = b.derivative(2)?;
        let b_xxx = b.derivative(3)?;
        Ok(LinearCoeffs {
            grid: grid.clone(),
            recip: Multiplier::recip_freq(grid),
            bessel_inv: Multiplier::bessel_inv(grid),
            recip_times_xi: Multiplier::from_symbol_fn(
                grid,
                "recip-times-xi",
                Parity::EvenReal,
                |xi| Complex64::new(smoothed_recip_times_xi(xi), 0.0),
            )?,
            dx_complement: Multiplier::from_symbol_fn(
                grid,
                "dx-complement",
                Parity::OddImaginary,
                |xi| Complex64::new(0.0, xi * (1.0 - smoothed_recip_times_xi(xi))),
            )?,
            a,
            b,
            c,
            b_x,
            b_xx,
            b_xxx,
            forcing: None,
        })
    }

    /// Smooth mean-zero default: `a = cos(2 pi x / L)`, `b = sin(2 pi x / L)`,
    /// `c = 0.5`. Exercises every term of the operator.
    pub fn default_preset(grid: &Grid) -> Self {
        let k = 2.0 * std::f64::consts::PI / grid.period();
        let a = RealField::from_fn(grid, |x| (k * x).cos());
        let b = RealField::from_fn(grid, |x| (k * x).sin());
        let c = RealField::from_fn(grid, |_| 0.5);
        LinearCoeffs::new(grid, a, b, c).expect("preset coefficients are valid")
    }

    pub fn with_forcing(mut self, f: Forcing) -> Self {
        self.forcing = Some(f);
        self
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn coefficient_b(&self) -> &RealField {
        &self.b
    }

    /// Coefficients of the time-reversed problem: a solution conjugated and
    /// reflected in `x` solves the same equation with
    /// `a(x) -> a(-x)`, `b(x) -> -b(-x)`, `c(x) -> -c(-x)`.
    pub fn time_reversed(&self) -> Self {
        let a = self.a.reflected();
        let b = RealField::new(&self.grid, self.b.reflected().values().mapv(|v| -v))
            .expect("reflection preserves finiteness");
        let c = RealField::new(&self.grid, self.c.reflected().values().mapv(|v| -v))
            .expect("reflection preserves finiteness");
        LinearCoeffs::new(&self.grid, a, b, c).expect("reversed coefficients are valid")
    }

    /// The scalar gauge correction `(i/3) b(x) p(D) U`.
    pub fn gauge_correction(&self, u: &ComplexField) -> Result<ComplexField> {
        let p_u = self.recip.apply(u)?;
        let scaled = &p_u * Complex64::new(0.0, 1.0 / 3.0);
        scaled.coeff_mul(&self.b)
    }

    /// The scalar gauge `lambda U = U - (i/3) b(x) p(D) U`.
    pub fn gauge_apply(&self, u: &ComplexField) -> Result<ComplexField> {
        Ok(u - &self.gauge_correction(u)?)
    }

    /// Stationary part `S U = U_xxx + i (a U_x)_x + b_x U_x + c U`
    /// (so the equation reads `U_t + S U = F`).
    pub fn stationary_part(&self, u: &ComplexField) -> Result<ComplexField> {
        let u_x = u.derivative(1)?;
        let a_ux = u_x.coeff_mul(&self.a)?;
        let disp = &(&a_ux.derivative(1)? * Complex64::new(0.0, 1.0)) + &u.derivative(3)?;
        let first = u_x.coeff_mul(&self.b_x)?;
        let zeroth = u.coeff_mul(&self.c)?;
        Ok(&(&disp + &first) + &zeroth)
    }

    /// Evolution right-hand side `U_t = F - S U`.
    pub fn rhs(&self, u: &ComplexField, t: f64) -> Result<ComplexField> {
        let mut out = &self.stationary_part(u)? * (-1.0);
        if let Some(f) = &self.forcing {
            out = &out + &f(t, &self.grid);
        }
        Ok(out)
    }

    /// The constant-coefficient principal part `P U = U_xxx + i (a U_x)_x`
    /// shared by both conjugation identities.
    pub fn principal_part(&self, u: &ComplexField) -> Result<ComplexField> {
        let a_ux = u.derivative(1)?.coeff_mul(&self.a)?;
        Ok(&(&a_ux.derivative(1)? * Complex64::new(0.0, 1.0)) + &u.derivative(3)?)
    }

    /// The explicit bounded remainder of the cubic commutator:
    ///
    /// ```text
    /// -[lambda~, d_x^3] = -b_x d_x + r,
    /// r = b_x d_x (1 - p(D) D) - b_xx p(D) D + (i/3) b_xxx p(D).
    /// ```
    pub fn cubic_commutator_remainder(&self, u: &ComplexField) -> Result<ComplexField> {
        let term1 = self.dx_complement.apply(u)?.coeff_mul(&self.b_x)?;
        let term2 = self.recip_times_xi.apply(u)?.coeff_mul(&self.b_xx)?;
        let term3 = &self.recip.apply(u)?.coeff_mul(&self.b_xxx)? * Complex64::new(0.0, 1.0 / 3.0);
        Ok(&(&term1 - &term2) + &term3)
    }

    /// Left side of the cubic commutator identity: `-[lambda~, d_x^3] U`.
    pub fn cubic_commutator(&self, u: &ComplexField) -> Result<ComplexField> {
        let lt_d3 = self.gauge_correction(&u.derivative(3)?)?;
        let d3_lt = self.gauge_correction(u)?.derivative(3)?;
        // -(lambda~ d^3 - d^3 lambda~)
        Ok(&d3_lt - &lt_d3)
    }

    /// Zeroth-order remainder of the gauge conjugation:
    /// `-[lambda~, i d_x a d_x] - lambda~ b_x d_x + lambda c`.
    fn zeroth_remainder(&self, u: &ComplexField) -> Result<ComplexField> {
        let a_disp = |w: &ComplexField| -> Result<ComplexField> {
            let a_wx = w.derivative(1)?.coeff_mul(&self.a)?;
            Ok(&a_wx.derivative(1)? * Complex64::new(0.0, 1.0))
        };
        let comm = &self.gauge_correction(&a_disp(u)?)? - &a_disp(&self.gauge_correction(u)?)?;
        let first = self.gauge_correction(&u.derivative(1)?.coeff_mul(&self.b_x)?)?;
        let zeroth = self.gauge_apply(&u.coeff_mul(&self.c)?)?;
        Ok(&(&(&comm * (-1.0)) - &first) + &zeroth)
    }

    /// Full remainder of the gauge conjugation:
    /// `lambda S = (d^3 + i d_x a d_x) lambda + r`, assembled from the
    /// literal zeroth-order terms plus the explicit cubic remainder.
    pub fn gauge_remainder(&self, u: &ComplexField) -> Result<ComplexField> {
        Ok(&self.zeroth_remainder(u)? + &self.cubic_commutator_remainder(u)?)
    }

    /// Remainder of the smoothing conjugation:
    /// `<D>^{-1} S = (d^3 + i d_x a d_x) <D>^{-1} + r`.
    pub fn smoothing_remainder(&self, u: &ComplexField) -> Result<ComplexField> {
        let a_disp = |w: &ComplexField| -> Result<ComplexField> {
            let a_wx = w.derivative(1)?.coeff_mul(&self.a)?;
            Ok(&a_wx.derivative(1)? * Complex64::new(0.0, 1.0))
        };
        let comm = &self.bessel_inv.apply(&a_disp(u)?)? - &a_disp(&self.bessel_inv.apply(u)?)?;
        let lower = &u.derivative(1)?.coeff_mul(&self.b_x)? + &u.coeff_mul(&self.c)?;
        Ok(&comm + &self.bessel_inv.apply(&lower)?)
    }

    /// `N(U)^2 = |lambda U|^2 + |<D>^{-1} U|^2`, components kept separately.
    pub fn gauged_norm(&self, u: &ComplexField) -> Result<GaugedNorm> {
        let gauge_part = self.gauge_apply(u)?.l2_norm();
        let smooth_part = self.bessel_inv.apply(u)?.l2_norm();
        Ok(GaugedNorm {
            gauge_part,
            smooth_part,
        })
    }

    /// Symbol-derived bound `M` with `1/M <= N(U)/|U| <= M`:
    /// `M = 1 + max|b| max|p| / 3 + 1`.
    pub fn equivalence_bound(&self) -> f64 {
        2.0 + self.b.max_abs() * self.recip.max_abs() / 3.0
    }

    /// Default explicit-stage stability limit for the integrating-factor
    /// stepper: the stiff cubic term is exact, the second-order explicit
    /// dispersive term caps the step.
    pub fn suggested_dt(&self) -> f64 {
        let amax = self.a.max_abs().max(1.0);
        0.5 / (amax * self.grid.xi_max().powi(2))
    }

    /// Integrating-factor RK4 evolution of `U_t = -S U + F`.
    ///
    /// The constant-coefficient stiff part `-d_x^3` is applied exactly in
    /// Fourier space through `exp(i xi^3 dt)` factors; the variable
    /// coefficients are explicit. Aborts (with the partial trajectory
    /// flagged) when the norm grows by 1e6 over the initial datum.
    pub fn evolve(&self, u0: &ComplexField, t_end: f64, dt: f64) -> Result<LinearTrajectory> {
        if u0.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        if !(dt > 0.0) {
            return Err(Error::InvalidParam {
                name: "dt".into(),
                detail: format!("time step must be positive, got {dt}"),
            });
        }
        let n = self.grid.n();
        let nyq = n / 2;
        let stiff: Vec<Complex64> = self
            .grid
            .freqs()
            .iter()
            .enumerate()
            .map(|(i, &xi)| {
                if i == nyq {
                    Complex64::new(0.0, 0.0)
                } else {
                    // symbol of -d_x^3
                    -Complex64::new(0.0, xi).powu(3)
                }
            })
            .collect();
        let phase = |h: f64| -> Vec<Complex64> { stiff.iter().map(|l| (l * h).exp()).collect() };
        let e_half = phase(dt / 2.0);
        let e_full = phase(dt);
        let apply_e = |e: &[Complex64], f: &ComplexField| -> ComplexField {
            let mut buf = f.values().to_vec();
            self.grid.apply_symbol(&mut buf, e);
            ComplexField::new(&self.grid, buf.into_iter().collect())
                .expect("exponential factor keeps samples finite")
        };
        // explicit part: everything except the stiff cubic term
        let explicit = |u: &ComplexField, t: f64| -> Result<ComplexField> {
            let u_x = u.derivative(1)?;
            let a_ux_x = u_x.coeff_mul(&self.a)?.derivative(1)?;
            let mut out = &(&(&a_ux_x * Complex64::new(0.0, -1.0)) - &u_x.coeff_mul(&self.b_x)?)
                - &u.coeff_mul(&self.c)?;
            if let Some(f) = &self.forcing {
                out = &out + &f(t, &self.grid);
            }
            Ok(out)
        };

        let norm0 = u0.l2_norm().max(f64::MIN_POSITIVE);
        let mut u = u0.clone();
        let mut t = 0.0;
        let mut traj = LinearTrajectory {
            samples: vec![LinearSample::measure(self, &u, 0.0)?],
            final_state: u.clone(),
            blow_up: None,
        };
        let total_steps = (t_end / dt).ceil() as usize;
        let sample_stride = (total_steps / 200).max(1);
        let mut step_idx = 0usize;
        while t < t_end - 1e-14 * t_end.max(1.0) {
            let h = dt.min(t_end - t);
            let (eh, ef);
            let (e1, e2) = if (h - dt).abs() < 1e-15 * dt {
                (&e_half, &e_full)
            } else {
                eh = phase(h / 2.0);
                ef = phase(h);
                (&eh, &ef)
            };
            let n1 = explicit(&u, t)?;
            let u2 = apply_e(e1, &(&u + &(&n1 * (h / 2.0))));
            let n2 = explicit(&u2, t + h / 2.0)?;
            let u3 = &apply_e(e1, &u) + &(&n2 * (h / 2.0));
            let n3 = explicit(&u3, t + h / 2.0)?;
            let u4 = &apply_e(e2, &u) + &apply_e(e1, &(&n3 * h));
            let n4 = explicit(&u4, t + h)?;
            let weighted = &(&apply_e(e2, &n1) + &apply_e(e1, &(&(&n2 + &n3) * 2.0))) + &n4;
            u = &apply_e(e2, &u) + &(&weighted * (h / 6.0));
            t += h;
            step_idx += 1;
            let norm = u.l2_norm();
            if !norm.is_finite() || norm > 1e6 * norm0 {
                traj.blow_up = Some((t, norm / norm0));
                break;
            }
            if step_idx % sample_stride == 0 || t >= t_end - 1e-14 {
                traj.samples.push(LinearSample::measure(self, &u, t)?);
            }
        }
        traj.final_state = u;
        Ok(traj)
    }
}

/// Value of the gauged norm with its two components.
#[derive(Debug, Clone, Copy)]
pub struct GaugedNorm {
    pub gauge_part: f64,
    pub smooth_part: f64,
}

impl GaugedNorm {
    pub fn value(&self) -> f64 {
        (self.gauge_part * self.gauge_part + self.smooth_part * self.smooth_part).sqrt()
    }
}

/// Per-sample record of a linear evolution.
#[derive(Debug, Clone)]
pub struct LinearSample {
    pub t: f64,
    pub l2_norm: f64,
    pub gauged_norm: f64,
    /// First eight nonnegative-frequency Fourier coefficients.
    pub modes: Vec<Complex64>,
}

impl LinearSample {
    fn measure(coeffs: &LinearCoeffs, u: &ComplexField, t: f64) -> Result<LinearSample> {
        let spec = u.spectrum();
        Ok(LinearSample {
            t,
            l2_norm: u.l2_norm(),
            gauged_norm: coeffs.gauged_norm(u)?.value(),
            modes: spec[..8.min(spec.len())].to_vec(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct LinearTrajectory {
    pub samples: Vec<LinearSample>,
    pub final_state: ComplexField,
    /// `(t, growth factor)` when the run was aborted.
    pub blow_up: Option<(f64, f64)>,
}

/// Max over the test fields of `|left(U) - right(U)| / |U|`.
pub fn commutator_residual(
    left: &dyn Fn(&ComplexField) -> Result<ComplexField>,
    right: &dyn Fn(&ComplexField) -> Result<ComplexField>,
    fields: &[ComplexField],
) -> Result<f64> {
    let mut worst = 0.0f64;
    for u in fields {
        let norm = u.l2_norm();
        if norm == 0.0 {
            continue;
        }
        let diff = (&left(u)? - &right(u)?).l2_norm();
        worst = worst.max(diff / norm);
    }
    Ok(worst)
}

/// Apply `op` to unit-amplitude single modes `exp(i xi_j x)` for
/// `j = 1..=j_max` and report `(xi_j, |op e_j| / |e_j|)`.
pub fn frequency_sweep(
    grid: &Grid,
    op: &dyn Fn(&ComplexField) -> Result<ComplexField>,
    j_max: usize,
) -> Result<Vec<(f64, f64)>> {
    let mut pts = Vec::with_capacity(j_max);
    for j in 1..=j_max {
        let xi = grid.freqs()[j];
        let e = ComplexField::from_fn(grid, |x| Complex64::new(0.0, xi * x).exp());
        let ratio = op(&e)?.l2_norm() / e.l2_norm();
        pts.push((xi, ratio));
    }
    Ok(pts)
}

/// Least-squares slope of `log ratio` against `log xi`. Boundedness
/// surrogate: a bounded operator family sweeps out slope about zero.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let data: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 1e-300)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let n = data.len() as f64;
    let mx = data.iter().map(|(x, _)| x).sum::<f64>() / n;
    let my = data.iter().map(|(_, y)| y).sum::<f64>() / n;
    let sxy: f64 = data.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = data.iter().map(|(x, _)| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use std::f64::consts::PI;

    fn lab_grid() -> Grid {
        Grid::new(128, 2.0 * PI).unwrap()
    }

    fn random_band_limited(grid: &Grid, band: usize, rng: &mut impl Rng) -> ComplexField {
        let n = grid.n();
        let mut coeffs = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..n {
            let j = grid.mode_index(i).unsigned_abs();
            if j <= band {
                coeffs[i] =
                    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                        / (1.0 + j as f64);
            }
        }
        ComplexField::from_spectrum(grid, &coeffs).unwrap()
    }

    #[test]
    fn gauge_is_identity_without_b() {
        let g = lab_grid();
        let a = RealField::from_fn(&g, |x| x.cos());
        let b = RealField::from_fn(&g, |_| 0.0);
        let c = RealField::from_fn(&g, |_| 0.0);
        let coeffs = LinearCoeffs::new(&g, a, b, c).unwrap();
        let u = ComplexField::from_fn(&g, |x| Complex64::new(x.sin(), x.cos()));
        let gu = coeffs.gauge_apply(&u).unwrap();
        assert!((&gu - &u).max_abs() <= 1e-14);
    }

    #[test]
    fn gauge_fixes_constants() {
        let g = lab_grid();
        let coeffs = LinearCoeffs::default_preset(&g);
        let u = ComplexField::from_fn(&g, |_| Complex64::new(2.0, -1.0));
        let gu = coeffs.gauge_apply(&u).unwrap();
        assert!((&gu - &u).max_abs() <= 1e-14);
    }

    #[test]
    fn gauge_preserves_reality() {
        let g = lab_grid();
        let coeffs = LinearCoeffs::default_preset(&g);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let u = random_band_limited(&g, 20, &mut rng);
            let real_u = u.re().to_complex();
            let gu = coeffs.gauge_apply(&real_u).unwrap();
            assert!(gu.max_abs_im() <= 1e-13, "im {}", gu.max_abs_im());
        }
    }

    #[test]
    fn rhs_on_single_mode_without_coefficients() {
        let g = lab_grid();
        let zero = RealField::from_fn(&g, |_| 0.0);
        let coeffs = LinearCoeffs::new(&g, zero.clone(), zero.clone(), zero.clone()).unwrap();
        let xi = g.freqs()[3];
        let u = ComplexField::from_fn(&g, |x| Complex64::new(0.0, xi * x).exp());
        let rhs = coeffs.rhs(&u, 0.0).unwrap();
        // -U_xxx = i xi^3 U
        let expect = &u * Complex64::new(0.0, xi.powi(3));
        assert!((&rhs - &expect).max_abs() <= 1e-10 * expect.max_abs());
    }

    #[test]
    fn rhs_with_only_zeroth_order_term() {
        let g = lab_grid();
        let zero = RealField::from_fn(&g, |_| 0.0);
        let one = RealField::from_fn(&g, |_| 1.0);
        let coeffs = LinearCoeffs::new(&g, zero.clone(), zero.clone(), one).unwrap();
        let u = ComplexField::from_fn(&g, |x| Complex64::new((3.0 * x).sin(), 0.2));
        let su = coeffs.stationary_part(&u).unwrap();
        let dispersive = u.derivative(3).unwrap();
        assert!((&(&su - &dispersive) - &u).max_abs() <= 1e-10);
    }

    #[test]
    fn principal_part_is_antisymmetric() {
        let g = lab_grid();
        let coeffs = LinearCoeffs::default_preset(&g);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let u = random_band_limited(&g, 24, &mut rng);
            let pu = coeffs.principal_part(&u).unwrap();
            let re = pu.l2_inner(&u).unwrap().re;
            assert!(re.abs() <= 1e-11 * u.l2_norm().powi(2).max(1.0), "re {re}");
        }
    }

    #[test]
    fn cubic_remainder_vanishes_without_b() {
        let g = lab_grid();
        let a = RealField::from_fn(&g, |x| x.cos());
        let zero = RealField::from_fn(&g, |_| 0.0);
        let coeffs = LinearCoeffs::new(&g, a, zero.clone(), zero).unwrap();
        let u = ComplexField::from_fn(&g, |x| Complex64::new(x.sin(), -(2.0 * x).cos()));
        assert!(coeffs.cubic_commutator_remainder(&u).unwrap().max_abs() <= 1e-14);
    }

    #[test]
    fn cubic_remainder_high_frequency_form() {
        // on modes with |xi| >= 2 the remainder collapses to
        // -b_xx U + (i/3) b_xxx p(D) U
        let g = lab_grid();
        let coeffs = LinearCoeffs::default_preset(&g);
        let xi = g.freqs()[7];
        assert!(xi >= 2.0);
        let u = ComplexField::from_fn(&g, |x| Complex64::new(0.0, xi * x).exp());
        let r = coeffs.cubic_commutator_remainder(&u).unwrap();
        let simplified = &(&u.coeff_mul(&coeffs.b_xx).unwrap() * (-1.0))
            + &(&coeffs
                .recip
                .apply(&u)
                .unwrap()
                .coeff_mul(&coeffs.b_xxx)
                .unwrap()
                * Complex64::new(0.0, 1.0 / 3.0));
        assert!((&r - &simplified).max_abs() <= 1e-12 * (1.0 + r.max_abs()));
    }

    #[test]
    fn cubic_commutator_identity() {
        // -[lambda~, d^3] U = -b_x U_x + r U on band-limited fields
        let g = lab_grid();
        let coeffs = LinearCoeffs::default_preset(&g);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        let fields: Vec<ComplexField> = (0..50)
            .map(|_| random_band_limited(&g, g.n() / 4, &mut rng))
            .collect();
        let left = |u: &ComplexField| coeffs.cubic_commutator(u);
        let right = |u: &ComplexField| {
            let first = u.derivative(1)?.coeff_mul(&coeffs.b_x)?;
            Ok(&coeffs.cubic_commutator_remainder(u)? - &first)
        };
        let res = commutator_residual(&left, &right, &fields).unwrap();
        assert!(res <= 1e-9, "relative residual {res}");
    }

    #[test]
    fn gauge_conjugation_identity() {
        // lambda S = (d^3 + i d a d) lambda + r on band-limited fields
        let g = lab_grid();
        let coeffs = LinearCoeffs::default_preset(&g);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        let fields: Vec<ComplexField> = (0..20)
            .map(|_| random_band_limited(&g, g.n() / 4, &mut rng))
            .collect();
        let left = |u: &ComplexField| coeffs.gauge_apply(&coeffs.stationary_part(u)?);
        let right = |u: &ComplexField| {
            Ok(&coeffs.principal_part(&coeffs.gauge_apply(u)?)? + &coeffs.gauge_remainder(u)?)
        };
        let res = commutator_residual(&left, &right, &fields).unwrap();
        assert!(res <= 1e-9, "relative residual {res}");
    }

    #[test]
    fn smoothing_conjugation_identity() {
        let g = lab_grid();
        let coeffs = LinearCoeffs::default_preset(&g);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(37);
        let fields: Vec<ComplexField> = (0..20)
            .map(|_| random_band_limited(&g, g.n() / 4, &mut rng))
            .collect();
        let left = |u: &ComplexField| coeffs.bessel_inv.apply(&coeffs.stationary_part(u)?);
        let right = |u: &ComplexField| {
            Ok(&coeffs.principal_part(&coeffs.bessel_inv.apply(u)?)?
                + &coeffs.smoothing_remainder(u)?)
        };
        let res = commutator_residual(&left, &right, &fields).unwrap();
        assert!(res <= 1e-9, "relative residual {res}");
    }

    #[test]
    fn zero_operators_have_zero_residual() {
        let g = lab_grid();
        let zero = |_u: &ComplexField| Ok(ComplexField::zeros(&g));
        let u = ComplexField::from_fn(&g, |x| Complex64::new(x.sin(), 0.0));
        assert_eq!(commutator_residual(&zero, &zero, &[u]).unwrap(), 0.0);
    }

    #[test]
    fn remainder_sweeps_are_flat() {
        let g = Grid::new(256, 2.0 * PI).unwrap();
        let coeffs = LinearCoeffs::default_preset(&g);
        let jmax = g.n() / 4;
        for (name, op) in [
            (
                "gauge",
                &(|u: &ComplexField| coeffs.gauge_remainder(u))
                    as &dyn Fn(&ComplexField) -> Result<ComplexField>,
            ),
            ("smoothing", &|u: &ComplexField| {
                coeffs.smoothing_remainder(u)
            }),
            ("cubic", &|u: &ComplexField| {
                coeffs.cubic_commutator_remainder(u)
            }),
        ] {
            let pts = frequency_sweep(&g, op, jmax).unwrap();
            let slope = loglog_slope(&pts);
            assert!(slope <= 0.1, "{name} remainder slope {slope}");
        }
    }

    #[test]
    fn airy_evolution_is_exact_per_mode() {
        let g = lab_grid();
        let zero = RealField::from_fn(&g, |_| 0.0);
        let coeffs = LinearCoeffs::new(&g, zero.clone(), zero.clone(), zero).unwrap();
        let xi = g.freqs()[5];
        let u0 = ComplexField::from_fn(&g, |x| Complex64::new(0.0, xi * x).exp());
        let t_end = 0.25;
        let traj = coeffs.evolve(&u0, t_end, coeffs.suggested_dt()).unwrap();
        let expect = ComplexField::from_fn(&g, |x| {
            Complex64::new(0.0, xi * x + xi.powi(3) * t_end).exp()
        });
        let err = (&traj.final_state - &expect).max_abs();
        assert!(err <= 1e-10, "Airy error {err}");
    }

    #[test]
    fn constant_damping_decays_exactly() {
        let g = lab_grid();
        let zero = RealField::from_fn(&g, |_| 0.0);
        let gamma = 0.8;
        let c = RealField::from_fn(&g, |_| gamma);
        let coeffs = LinearCoeffs::new(&g, zero.clone(), zero, c).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        let u0 = random_band_limited(&g, 20, &mut rng);
        let t_end = 0.3;
        let traj = coeffs.evolve(&u0, t_end, coeffs.suggested_dt()).unwrap();
        let expect = u0.l2_norm() * (-gamma * t_end).exp();
        let got = traj.final_state.l2_norm();
        assert!(
            (got - expect).abs() <= 1e-8 * expect,
            "norm {got} vs {expect}"
        );
    }

    #[test]
    fn norm_equivalence_window() {
        let g = lab_grid();
        let coeffs = LinearCoeffs::default_preset(&g);
        let m = coeffs.equivalence_bound();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(43);
        for _ in 0..100 {
            let u = random_band_limited(&g, 40, &mut rng);
            let ratio = coeffs.gauged_norm(&u).unwrap().value() / u.l2_norm();
            assert!(
                ratio >= 1.0 / m && ratio <= m,
                "ratio {ratio} outside [{}, {m}]",
                1.0 / m
            );
        }
        let zero = ComplexField::zeros(&g);
        assert_eq!(coeffs.gauged_norm(&zero).unwrap().value(), 0.0);
    }

    #[test]
    fn gauged_norm_without_b_reduces_to_plain_parts() {
        let g = lab_grid();
        let a = RealField::from_fn(&g, |x| x.cos());
        let zero = RealField::from_fn(&g, |_| 0.0);
        let coeffs = LinearCoeffs::new(&g, a, zero.clone(), zero).unwrap();
        let u = ComplexField::from_fn(&g, |x| Complex64::new(x.sin(), (2.0 * x).cos()));
        let gn = coeffs.gauged_norm(&u).unwrap();
        assert!((gn.gauge_part - u.l2_norm()).abs() <= 1e-12);
    }

    #[test]
    fn time_reversal_roundtrip() {
        let g = lab_grid();
        let coeffs = LinearCoeffs::default_preset(&g);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(47);
        let u0 = random_band_limited(&g, 12, &mut rng);
        let t_end = 0.05;
        let dt = coeffs.suggested_dt();
        let fwd = coeffs.evolve(&u0, t_end, dt).unwrap();
        let v0 = fwd.final_state.reflected().conj();
        let back = coeffs.time_reversed().evolve(&v0, t_end, dt).unwrap();
        let recovered = back.final_state.reflected().conj();
        let err = (&recovered - &u0).l2_norm() / u0.l2_norm();
        assert!(err <= 1e-7, "reversal error {err}");
    }

    #[test]
    fn gronwall_bound_with_full_coefficients() {
        let g = lab_grid();
        let coeffs = LinearCoeffs::default_preset(&g);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(53);
        let u0 = random_band_limited(&g, 16, &mut rng);
        let t_end = 0.2;
        let traj = coeffs.evolve(&u0, t_end, coeffs.suggested_dt()).unwrap();
        assert!(traj.blow_up.is_none());
        // fit the growth constant from the gauged-norm series
        let series: Vec<(f64, f64)> = traj.samples.iter().map(|s| (s.t, s.gauged_norm)).collect();
        let c_fit = fit_log_slope(&series);
        let m = coeffs.equivalence_bound();
        let bound = m * m * (c_fit.abs() * t_end).exp() * u0.l2_norm();
        let got = traj.final_state.l2_norm();
        assert!(
            got <= bound * 1.05,
            "norm {got} above Gronwall envelope {bound}"
        );

        // the fitted constant is stable under grid doubling
        let g2 = Grid::new(256, 2.0 * PI).unwrap();
        let coeffs2 = LinearCoeffs::default_preset(&g2);
        let spec = u0.spectrum();
        let mut coeffs_big = vec![Complex64::new(0.0, 0.0); 256];
        for i in 0..g.n() {
            let j = g.mode_index(i);
            let slot = if j >= 0 {
                j as usize
            } else {
                (256 + j) as usize
            };
            coeffs_big[slot] = spec[i];
        }
        let u0b = ComplexField::from_spectrum(&g2, &coeffs_big).unwrap();
        let traj2 = coeffs2.evolve(&u0b, t_end, coeffs2.suggested_dt()).unwrap();
        let series2: Vec<(f64, f64)> = traj2.samples.iter().map(|s| (s.t, s.gauged_norm)).collect();
        let c_fit2 = fit_log_slope(&series2);
        let scale = c_fit.abs().max(c_fit2.abs()).max(1e-6);
        assert!(
            (c_fit - c_fit2).abs() <= 0.2 * scale,
            "fitted constants differ: {c_fit} vs {c_fit2}"
        );
    }

    #[test]
    fn gauged_growth_constant_uniform_in_band_limit() {
        let g = Grid::new(256, 2.0 * PI).unwrap();
        let coeffs = LinearCoeffs::default_preset(&g);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(59);
        let mut fitted = Vec::new();
        for band in [8usize, 16, 32] {
            let u0 = random_band_limited(&g, band, &mut rng);
            let traj = coeffs.evolve(&u0, 0.1, coeffs.suggested_dt()).unwrap();
            let series: Vec<(f64, f64)> =
                traj.samples.iter().map(|s| (s.t, s.gauged_norm)).collect();
            fitted.push(fit_log_slope(&series));
        }
        let max = fitted.iter().cloned().fold(f64::MIN, f64::max);
        let min = fitted.iter().cloned().fold(f64::MAX, f64::min);
        // growth rate does not trend with the maximal frequency of the data
        assert!(
            max - min <= 1.0 + 0.5 * max.abs(),
            "fitted constants spread too widely: {fitted:?}"
        );
    }

    // simple least-squares slope of log N against t (test-local oracle)
    fn fit_log_slope(series: &[(f64, f64)]) -> f64 {
        let pts: Vec<(f64, f64)> = series
            .iter()
            .map(|&(t, v)| (t, v.max(1e-300).ln()))
            .collect();
        let n = pts.len() as f64;
        let mt = pts.iter().map(|(t, _)| t).sum::<f64>() / n;
        let mv = pts.iter().map(|(_, v)| v).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|(t, v)| (t - mt) * (v - mv)).sum();
        let sxx: f64 = pts.iter().map(|(t, _)| (t - mt) * (t - mt)).sum();
        sxy / sxx
    }
}
