//! Fourier multipliers with parity metadata.
//!
//! A multiplier is stored as symbol samples on the grid's frequency lattice.
//! The parity tag records the symmetry class that makes real-field
//! applications well defined: odd-imaginary symbols (like `i p(xi)`) map real
//! fields to real fields, even-real symbols preserve reality, odd-real
//! symbols send real fields to purely imaginary ones.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{ComplexField, Grid, RealField};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    EvenReal,
    OddReal,
    OddImaginary,
}

/// Smoothed reciprocal-frequency symbol: `1/xi` for `|xi| >= 2`, `0` on
/// `[-1, 1]`, and `chi(|xi| - 1) / xi` on the transition band `1 < |xi| < 2`
/// with `chi` the quintic smoothstep `t^3 (10 - 15 t + 6 t^2)`.
pub fn smoothed_recip(xi: f64) -> f64 {
    let a = xi.abs();
    if a <= 1.0 {
        0.0
    } else if a >= 2.0 {
        1.0 / xi
    } else {
        let t = a - 1.0;
        let chi = t * t * t * (10.0 - 15.0 * t + 6.0 * t * t);
        chi / xi
    }
}

/// The product `xi * smoothed_recip(xi)`, built so the plateau values are
/// exact: identically `1` for `|xi| >= 2` and `0` on `[-1, 1]`. The operator
/// `1 - p(D) D` therefore annihilates every mode with `|xi| >= 2` exactly.
pub fn smoothed_recip_times_xi(xi: f64) -> f64 {
    let a = xi.abs();
    if a <= 1.0 {
        0.0
    } else if a >= 2.0 {
        1.0
    } else {
        let t = a - 1.0;
        t * t * t * (10.0 - 15.0 * t + 6.0 * t * t)
    }
}

/// A Fourier multiplier: symbol samples on the grid frequencies plus the
/// parity class they satisfy.
#[derive(Debug, Clone)]
pub struct Multiplier {
    grid: Grid,
    name: String,
    parity: Parity,
    symbol: Vec<Complex64>,
}

impl Multiplier {
    /// Validate and wrap explicit symbol samples.
    pub fn new(grid: &Grid, name: &str, parity: Parity, symbol: Vec<Complex64>) -> Result<Self> {
        if symbol.len() != grid.n() {
            return Err(Error::GridMismatch);
        }
        let m = Multiplier {
            grid: grid.clone(),
            name: name.to_string(),
            parity,
            symbol,
        };
        m.check_parity()?;
        Ok(m)
    }

    /// Build from a scalar symbol function of the frequency.
    pub fn from_symbol_fn(
        grid: &Grid,
        name: &str,
        parity: Parity,
        f: impl Fn(f64) -> Complex64,
    ) -> Result<Self> {
        let n = grid.n();
        let symbol = grid
            .freqs()
            .iter()
            .enumerate()
            .map(|(i, &xi)| {
                if i == n / 2 && matches!(parity, Parity::OddReal | Parity::OddImaginary) {
                    Complex64::new(0.0, 0.0)
                } else {
                    f(xi)
                }
            })
            .collect();
        Multiplier::new(grid, name, parity, symbol)
    }

    /// The smoothed reciprocal-frequency multiplier (odd, real).
    pub fn recip_freq(grid: &Grid) -> Multiplier {
        Multiplier::from_symbol_fn(grid, "recip-freq", Parity::OddReal, |xi| {
            Complex64::new(smoothed_recip(xi), 0.0)
        })
        .expect("built-in symbol respects its parity")
    }

    /// `i` times the smoothed reciprocal frequency (odd, imaginary): the
    /// operator that maps real periodic fields to real periodic fields.
    pub fn recip_freq_imag(grid: &Grid) -> Multiplier {
        Multiplier::from_symbol_fn(grid, "recip-freq-imag", Parity::OddImaginary, |xi| {
            Complex64::new(0.0, smoothed_recip(xi))
        })
        .expect("built-in symbol respects its parity")
    }

    /// Smoothing multiplier `(1 + xi^2)^(-1/2)` (even, real).
    pub fn bessel_inv(grid: &Grid) -> Multiplier {
        Multiplier::from_symbol_fn(grid, "bessel-inv", Parity::EvenReal, |xi| {
            Complex64::new(1.0 / (1.0 + xi * xi).sqrt(), 0.0)
        })
        .expect("built-in symbol respects its parity")
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn parity(&self) -> Parity {
        self.parity
    }

    pub fn symbol(&self) -> &[Complex64] {
        &self.symbol
    }

    pub fn max_abs(&self) -> f64 {
        self.symbol.iter().fold(0.0, |m, s| m.max(s.norm()))
    }

    fn check_parity(&self) -> Result<()> {
        let n = self.grid.n();
        let tol = 8.0 * f64::EPSILON * (1.0 + self.max_abs());
        let fail = |detail: String| Error::ParityViolation {
            name: self.name.clone(),
            detail,
        };
        for i in 0..n {
            let s = self.symbol[i];
            match self.parity {
                Parity::EvenReal | Parity::OddReal => {
                    if s.im.abs() > tol {
                        return Err(fail(format!("sample {i} has imaginary part {}", s.im)));
                    }
                }
                Parity::OddImaginary => {
                    if s.re.abs() > tol {
                        return Err(fail(format!("sample {i} has real part {}", s.re)));
                    }
                }
            }
        }
        // pairing i <-> n - i realizes xi <-> -xi for 0 < i < n/2
        for i in 1..n / 2 {
            let s = self.symbol[i];
            let t = self.symbol[n - i];
            let ok = match self.parity {
                Parity::EvenReal => (s - t).norm() <= tol,
                Parity::OddReal | Parity::OddImaginary => (s + t).norm() <= tol,
            };
            if !ok {
                return Err(fail(format!(
                    "samples {i} and {} break the symmetry",
                    n - i
                )));
            }
        }
        if matches!(self.parity, Parity::OddReal | Parity::OddImaginary) {
            if self.symbol[0].norm() > tol {
                return Err(fail("odd symbol must vanish at xi = 0".into()));
            }
            if self.symbol[n / 2].norm() > tol {
                return Err(fail(
                    "odd symbol must vanish at the unpaired Nyquist mode".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn apply(&self, field: &ComplexField) -> Result<ComplexField> {
        if field.grid() != &self.grid {
            return Err(Error::GridMismatch);
        }
        let mut buf = field.values().to_vec();
        self.grid.apply_symbol(&mut buf, &self.symbol);
        ComplexField::new(&self.grid, buf.into_iter().collect())
    }

    /// Apply to a real field, returning a real field. Valid for even-real and
    /// odd-imaginary parities; odd-real symbols produce imaginary output and
    /// are rejected.
    pub fn apply_real(&self, field: &RealField) -> Result<RealField> {
        if matches!(self.parity, Parity::OddReal) {
            return Err(Error::RealApplication {
                name: self.name.clone(),
            });
        }
        let out = self.apply(&field.to_complex())?;
        Ok(out.re())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn grid_sampling_band_interior() -> Grid {
        // xi_j = j/2, so xi_3 = 1.5 lands inside the transition band
        Grid::new(64, 4.0 * PI).unwrap()
    }

    #[test]
    fn recip_freq_matches_declared_values() {
        let g = grid_sampling_band_interior();
        let m = Multiplier::recip_freq(&g);
        let at = |target: f64| {
            let i = g
                .freqs()
                .iter()
                .position(|&xi| (xi - target).abs() < 1e-12)
                .unwrap();
            m.symbol()[i].re
        };
        assert!((at(4.0) - 0.25).abs() < 1e-15);
        assert_eq!(at(0.5), 0.0);
        assert!((at(-4.0) + 0.25).abs() < 1e-15);
        // quintic smoothstep at the band midpoint: chi(0.5) = 0.5
        assert!((at(1.5) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn recip_freq_times_xi_is_one_outside_band() {
        let g = Grid::new(128, 1.0).unwrap();
        let m = Multiplier::recip_freq(&g);
        for (i, &xi) in g.freqs().iter().enumerate() {
            if xi.abs() >= 2.0 && i != g.n() / 2 {
                let prod = m.symbol()[i].re * xi;
                assert!(
                    (prod - 1.0).abs() <= f64::EPSILON,
                    "p(xi) xi != 1 at xi = {xi}"
                );
                // the composite sample is exact, so 1 - p(D) D kills the mode
                assert_eq!(smoothed_recip_times_xi(xi), 1.0);
            }
            if xi.abs() <= 1.0 {
                assert_eq!(smoothed_recip_times_xi(xi), 0.0);
            }
        }
    }

    #[test]
    fn odd_real_applied_to_real_field_is_rejected() {
        let g = Grid::new(32, 1.0).unwrap();
        let m = Multiplier::recip_freq(&g);
        let f = RealField::from_fn(&g, |x| (2.0 * PI * x).cos());
        assert!(m.apply_real(&f).is_err());
    }

    #[test]
    fn imaginary_variant_on_cosine_mode() {
        // On L = 4 pi, mode 8 has xi = 4 where p = 1/4; i p(D) cos(4 x)
        // equals -(1/4) sin(4 x).
        let g = grid_sampling_band_interior();
        let m = Multiplier::recip_freq_imag(&g);
        let f = RealField::from_fn(&g, |x| (4.0 * x).cos());
        let out = m.apply(&f.to_complex()).unwrap();
        assert!(out.max_abs_im() <= 1e-14);
        let expect = RealField::from_fn(&g, |x| -0.25 * (4.0 * x).sin());
        let err = out
            .re()
            .values()
            .iter()
            .zip(expect.values().iter())
            .fold(0.0f64, |mx, (a, b)| mx.max((a - b).abs()));
        assert!(err <= 1e-13, "err {err}");
    }

    #[test]
    fn applying_imag_variant_twice_is_minus_square() {
        let g = Grid::new(64, 1.0).unwrap();
        let q = Multiplier::recip_freq_imag(&g);
        let sq = Multiplier::from_symbol_fn(&g, "minus-p-squared", Parity::EvenReal, |xi| {
            let p = smoothed_recip(xi);
            Complex64::new(-p * p, 0.0)
        })
        .unwrap();
        let f = RealField::from_fn(&g, |x| (2.0 * PI * x).sin() + 0.3 * (6.0 * PI * x).cos());
        let twice = q.apply(&q.apply(&f.to_complex()).unwrap()).unwrap();
        let once = sq.apply(&f.to_complex()).unwrap();
        let err = (&twice - &once).max_abs();
        assert!(err <= 1e-14, "err {err}");
    }

    #[test]
    fn bessel_inv_values_and_constants() {
        let g = Grid::new(64, 2.0 * PI).unwrap();
        let m = Multiplier::bessel_inv(&g);
        assert_eq!(m.symbol()[0].re, 1.0);
        let i10 = g
            .freqs()
            .iter()
            .position(|&xi| (xi - 10.0).abs() < 1e-12)
            .unwrap();
        assert!((m.symbol()[i10].re - 1.0 / 101.0f64.sqrt()).abs() < 1e-15);
        let c = RealField::from_fn(&g, |_| 2.5);
        let out = m.apply_real(&c).unwrap();
        let err = out
            .values()
            .iter()
            .fold(0.0f64, |mx, v| mx.max((v - 2.5).abs()));
        assert!(err <= 1e-13);
    }

    #[test]
    fn parity_validation_rejects_bad_symbols() {
        let g = Grid::new(32, 1.0).unwrap();
        let mut sym = vec![Complex64::new(0.0, 0.0); 32];
        sym[1] = Complex64::new(1.0, 0.0);
        // claims odd-real but the mirror sample is zero, not -1
        assert!(Multiplier::new(&g, "broken", Parity::OddReal, sym).is_err());
    }

    proptest! {
        #[test]
        fn odd_imaginary_preserves_reality(seed in 0u64..200, ngrid in prop::sample::select(vec![32usize, 64, 128])) {
            let g = Grid::new(ngrid, 1.0).unwrap();
            let f = RealField::from_fn(&g, |x| {
                let s = seed as f64;
                (2.0 * PI * x + 0.7 * s).sin() + 0.4 * (8.0 * PI * x + s).cos()
                    + 0.1 * (2.0 * PI * (ngrid as f64 / 4.0) * x).sin()
            });
            let q = Multiplier::recip_freq_imag(&g);
            let out = q.apply(&f.to_complex()).unwrap();
            prop_assert!(out.max_abs_im() <= 1e-13);
        }

        #[test]
        fn derivative_commutes_with_multipliers(k in 1usize..12) {
            let g = Grid::new(64, 1.0).unwrap();
            let f = RealField::from_fn(&g, |x| (2.0 * PI * k as f64 * x).cos());
            let m = Multiplier::bessel_inv(&g);
            let a = m.apply(&f.derivative(1).unwrap().to_complex()).unwrap();
            let b = m.apply(&f.to_complex()).unwrap().derivative(1).unwrap();
            prop_assert!((&a - &b).max_abs() <= 1e-12 * (1.0 + a.max_abs()));
        }
    }
}
