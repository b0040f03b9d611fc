//! Quantitative diagnostics: per-time records, instantaneous-rate probes
//! with independent analytic cross-checks, and growth-constant fitting.

use crate::covariant::{
    covariant_derivative, covariant_stack, energy, flow_rhs, AmbientCurve, FlowParams,
};
use crate::error::{Error, Result};
use crate::flow::advance_by;
use crate::gauge::GaugeOp;
use crate::manifold::TangentField;

/// Per-time diagnostics of a flow run.
#[derive(Debug, Clone)]
pub struct DiagRecord {
    pub t: f64,
    /// `(1/2) integral h(u_x, u_x)`.
    pub energy: f64,
    /// Sobolev norms `H^1 .. H^{k+1}` (partial sums of the stack).
    pub hnorms: Vec<f64>,
    /// Gauged energy `N_{k+1}`.
    pub n_gauged: f64,
    /// Max constraint residual over the nodes.
    pub constraint: f64,
    /// Optional `(ungauged, gauged)` top-norm rates from a probe.
    pub rates: Option<(f64, f64)>,
}

impl DiagRecord {
    pub fn at_time(mut self, t: f64) -> Self {
        self.t = t;
        self
    }
}

/// Assemble all diagnostics at one snapshot.
pub fn record(u: &AmbientCurve, p: &FlowParams) -> Result<DiagRecord> {
    let k = p.k_gauge;
    let stack = covariant_stack(u, k)?;
    let mut hnorms = Vec::with_capacity(k + 1);
    let mut acc = 0.0;
    for level in stack.iter() {
        acc += level.l2_norm_sq();
        hnorms.push(acc.sqrt());
    }
    let gauge = if p.a == 0.0 {
        GaugeOp::identity(u)
    } else {
        GaugeOp::bind(u, k, p.a)?
    };
    let top = gauge.apply(&stack[k])?.l2_norm_sq();
    let lower: f64 = stack[..k].iter().map(|v| v.l2_norm_sq()).sum();
    Ok(DiagRecord {
        t: u.time(),
        energy: energy(u),
        hnorms,
        n_gauged: (lower + top).sqrt(),
        constraint: u.constraint_residual(),
        rates: None,
    })
}

/// Result of fitting `log N` against `t`.
#[derive(Debug, Clone, Copy)]
pub struct GronwallFit {
    /// Least-squares slope.
    pub c_fit: f64,
    /// Root-mean-square residual of the fit in log space.
    pub residual: f64,
    /// Largest finite-difference slope (the envelope rate).
    pub c_env: f64,
    /// Whether the fit bounds every finite-difference slope within 10%.
    pub accepted: bool,
}

impl GronwallFit {
    /// The reported growth constant: the fit when it envelopes the series,
    /// otherwise the envelope itself, so `N(t) <= N(0) exp(c_hat t)` holds
    /// on the sampled series.
    pub fn c_hat(&self) -> f64 {
        self.c_fit.max(self.c_env)
    }
}

/// Fit the exponential growth constant of a positive series.
pub fn gronwall_fit(series: &[(f64, f64)]) -> Result<GronwallFit> {
    if series.len() < 10 {
        return Err(Error::TooFewSamples {
            need: 10,
            got: series.len(),
        });
    }
    if series.iter().any(|&(_, v)| !(v > 0.0)) {
        return Err(Error::NonPositiveSeries);
    }
    let pts: Vec<(f64, f64)> = series.iter().map(|&(t, v)| (t, v.ln())).collect();
    let n = pts.len() as f64;
    let mt = pts.iter().map(|(t, _)| t).sum::<f64>() / n;
    let mv = pts.iter().map(|(_, v)| v).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|(t, v)| (t - mt) * (v - mv)).sum();
    let sxx: f64 = pts.iter().map(|(t, _)| (t - mt) * (t - mt)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParam {
            name: "series".into(),
            detail: "all samples share one time".into(),
        });
    }
    let c_fit = sxy / sxx;
    let intercept = mv - c_fit * mt;
    let residual = (pts
        .iter()
        .map(|(t, v)| (v - (intercept + c_fit * t)).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    let c_env = pts
        .windows(2)
        .map(|w| (w[1].1 - w[0].1) / (w[1].0 - w[0].0))
        .fold(f64::NEG_INFINITY, f64::max);
    let accepted = c_env <= c_fit + 0.1 * c_fit.abs().max(1e-12);
    Ok(GronwallFit {
        c_fit,
        residual,
        c_env,
        accepted,
    })
}

/// Functionals whose instantaneous rate the probe can measure.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateFunctional {
    /// `(1/2) integral h(u_x, u_x)`.
    Energy,
    /// `|nabla_x^k u_x|^2`.
    HkTopSq,
    /// `|Lambda nabla_x^k u_x|^2`.
    GaugedTopSq,
}

fn eval_functional(u: &AmbientCurve, p: &FlowParams, f: RateFunctional) -> Result<f64> {
    match f {
        RateFunctional::Energy => Ok(energy(u)),
        RateFunctional::HkTopSq => Ok(covariant_stack(u, p.k_gauge)?[p.k_gauge].l2_norm_sq()),
        RateFunctional::GaugedTopSq => {
            let stack = covariant_stack(u, p.k_gauge)?;
            let gauge = if p.a == 0.0 {
                GaugeOp::identity(u)
            } else {
                GaugeOp::bind(u, p.k_gauge, p.a)?
            };
            Ok(gauge.apply(&stack[p.k_gauge])?.l2_norm_sq())
        }
    }
}

/// `d/dt` of a functional at the snapshot, by Richardson-extrapolated
/// forward differences of two integrator micro-steps (`delta = 1e-6`).
pub fn rate_probe(u: &AmbientCurve, p: &FlowParams, functional: RateFunctional) -> Result<f64> {
    const DELTA: f64 = 1e-6;
    let f0 = eval_functional(u, p, functional)?;
    let u_half = advance_by(u, p, DELTA / 2.0)?;
    let u_full = advance_by(u, p, DELTA)?;
    let r_half = (eval_functional(&u_half, p, functional)? - f0) / (DELTA / 2.0);
    let r_full = (eval_functional(&u_full, p, functional)? - f0) / DELTA;
    Ok(2.0 * r_half - r_full)
}

/// Analytic energy rate `dE/dt = -eps |nabla_x^2 u_x|^2`: every
/// non-dissipative term of the flow pairs to zero against `u_x`.
pub fn energy_rate_analytic(u: &AmbientCurve, p: &FlowParams) -> Result<f64> {
    if p.eps == 0.0 {
        return Ok(0.0);
    }
    let stack = covariant_stack(u, 2)?;
    Ok(-p.eps * stack[2].l2_norm_sq())
}

/// Analytic top-norm rate via the commutation route:
///
/// ```text
/// d/dt |nabla^k u_x|^2 = 2 < nabla_t nabla^k u_x, nabla^k u_x >,
/// nabla_t nabla^k u_x = nabla^{k+1} u_t
///                       - sum_{m=0}^{k-1} nabla^{k-1-m} { R(u_x, u_t) nabla^m u_x }.
/// ```
///
/// Exact on constant-curvature targets up to the spatial discretization;
/// independent of the finite-difference route.
pub fn hk_top_rate_analytic(u: &AmbientCurve, p: &FlowParams) -> Result<f64> {
    let k = p.k_gauge;
    let u_t = flow_rhs(u, p)?;
    let stack = covariant_stack(u, k)?;

    // nabla^{k+1} u_t
    let mut high = u_t.clone();
    for _ in 0..=k {
        high = covariant_derivative(u, &high);
    }

    // curvature corrections
    let d = u.dim();
    let n = u.grid().n();
    let mut correction = TangentField::zeros(u.grid(), d);
    let mut x = vec![0.0; d];
    let mut y = vec![0.0; d];
    let mut z = vec![0.0; d];
    let mut r = vec![0.0; d];
    for m in 0..k {
        let mut term = TangentField::zeros(u.grid(), d);
        for j in 0..n {
            for i in 0..d {
                x[i] = stack[0].values()[(i, j)];
                y[i] = u_t.values()[(i, j)];
                z[i] = stack[m].values()[(i, j)];
            }
            u.target().curvature_into(&x, &y, &z, &mut r);
            for i in 0..d {
                term.values_mut()[(i, j)] = r[i];
            }
        }
        for _ in 0..(k - 1 - m) {
            term = covariant_derivative(u, &term);
        }
        correction = correction.add(&term);
    }
    let nabla_t_top = high.sub(&correction);
    Ok(2.0 * nabla_t_top.l2_inner(&stack[k])?)
}
