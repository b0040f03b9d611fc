//! File emission: CSV trajectories and reports (RFC 4180), static SVG line
//! charts rendered from CSV content, binary snapshot dumps, and run
//! manifests. All numeric formatting goes through the shortest-roundtrip
//! float formatter, so identical inputs produce byte-identical files.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::covariant::AmbientCurve;
use crate::diagnostics::DiagRecord;
use crate::error::{Error, Result};
use crate::flow::{ContinuationReport, Trajectory};
use crate::gauge::ProbeReport;
use crate::grid::Grid;
use crate::linear::LinearSample;
use crate::manifold::Target;

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Assemble an RFC 4180 document with a header row; `\r\n` line endings.
pub fn csv_document(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut doc = String::new();
    doc.push_str(
        &header
            .iter()
            .map(|h| csv_field(h))
            .collect::<Vec<_>>()
            .join(","),
    );
    doc.push_str("\r\n");
    for row in rows {
        doc.push_str(
            &row.iter()
                .map(|f| csv_field(f))
                .collect::<Vec<_>>()
                .join(","),
        );
        doc.push_str("\r\n");
    }
    doc
}

fn fnum(v: f64) -> String {
    format!("{v}")
}

/// Flow trajectory CSV: `t, energy, h1..h{k+1}, n_gauged, constraint`.
pub fn trajectory_csv(diag: &[DiagRecord], k_gauge: usize) -> String {
    let mut header: Vec<String> = vec!["t".into(), "energy".into()];
    for m in 1..=k_gauge + 1 {
        header.push(format!("h{m}"));
    }
    header.push("n_gauged".into());
    header.push("constraint".into());
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let rows: Vec<Vec<String>> = diag
        .iter()
        .map(|r| {
            let mut row = vec![fnum(r.t), fnum(r.energy)];
            row.extend(r.hnorms.iter().map(|h| fnum(*h)));
            row.push(fnum(r.n_gauged));
            row.push(fnum(r.constraint));
            row
        })
        .collect();
    csv_document(&header_refs, &rows)
}

/// Linear-lab trajectory CSV:
/// `t, re_mode_0, im_mode_0, .., re_mode_7, im_mode_7, l2_norm, gauged_norm`.
pub fn linear_csv(samples: &[LinearSample]) -> String {
    let mut header: Vec<String> = vec!["t".into()];
    for m in 0..8 {
        header.push(format!("re_mode_{m}"));
        header.push(format!("im_mode_{m}"));
    }
    header.push("l2_norm".into());
    header.push("gauged_norm".into());
    let header_refs: Vec<&str> = header.iter().map(|s| s.as_str()).collect();
    let rows: Vec<Vec<String>> = samples
        .iter()
        .map(|s| {
            let mut row = vec![fnum(s.t)];
            for m in 0..8 {
                let c = s.modes.get(m).copied().unwrap_or_default();
                row.push(fnum(c.re));
                row.push(fnum(c.im));
            }
            row.push(fnum(s.l2_norm));
            row.push(fnum(s.gauged_norm));
            row
        })
        .collect();
    csv_document(&header_refs, &rows)
}

/// Probe CSV: `target, spike_freq, k_gauge, ungauged_rate, gauged_rate, n_gauged`.
pub fn probe_csv(target: Target, k_gauge: usize, reports: &[ProbeReport]) -> String {
    let header = [
        "target",
        "spike_freq",
        "k_gauge",
        "ungauged_rate",
        "gauged_rate",
        "n_gauged",
    ];
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                target.name().to_string(),
                r.spike_freq.to_string(),
                k_gauge.to_string(),
                fnum(r.ungauged_rate),
                fnum(r.gauged_rate),
                fnum(r.n_gauged),
            ]
        })
        .collect();
    csv_document(&header, &rows)
}

/// Continuation CSV: one row per regularization strength.
pub fn continuation_csv(report: &ContinuationReport) -> String {
    let header = [
        "eps",
        "distance",
        "c_hat",
        "max_ratio_within_bound",
        "n_initial",
        "n_final",
    ];
    let rows: Vec<Vec<String>> = report
        .entries
        .iter()
        .map(|e| {
            vec![
                fnum(e.eps),
                fnum(e.distance),
                fnum(e.c_hat),
                fnum(e.max_ratio_within_bound),
                fnum(e.n_initial),
                fnum(e.n_final),
            ]
        })
        .collect();
    csv_document(&header, &rows)
}

/// Invariant-suite CSV: `name, pass, detail`.
pub fn invariants_csv(checks: &[suite::Check]) -> String {
    let header = ["name", "pass", "detail"];
    let rows: Vec<Vec<String>> = checks
        .iter()
        .map(|c| vec![c.name.clone(), c.pass.to_string(), c.detail.clone()])
        .collect();
    csv_document(&header, &rows)
}

/// Write a run manifest: `key = value` lines in the given order.
pub fn write_manifest(path: &Path, entries: &[(String, String)]) -> Result<()> {
    let mut doc = String::new();
    for (k, v) in entries {
        doc.push_str(&format!("{k} = {v}\n"));
    }
    fs::write(path, doc)?;
    Ok(())
}

const SNAPSHOT_MAGIC: &[u8; 4] = b"DFLW";
const SNAPSHOT_VERSION: u32 = 1;

/// Binary snapshot dump, little-endian throughout:
/// header `magic "DFLW", version: u32, d: u32, n: u32, period: f64`,
/// then one record per snapshot: `t: f64` followed by `d * n` row-major
/// `f64` samples.
pub fn write_snapshots(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(SNAPSHOT_MAGIC);
    let first = &traj.snapshots.first().expect("trajectory is nonempty").1;
    let d = first.dim() as u32;
    let n = first.grid().n() as u32;
    out.extend_from_slice(&SNAPSHOT_VERSION.to_le_bytes());
    out.extend_from_slice(&d.to_le_bytes());
    out.extend_from_slice(&n.to_le_bytes());
    out.extend_from_slice(&first.grid().period().to_le_bytes());
    for (t, curve) in &traj.snapshots {
        out.extend_from_slice(&t.to_le_bytes());
        for row in curve.samples().rows() {
            for v in row {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    fs::write(path, out)?;
    Ok(())
}

/// Read back a snapshot dump; used by tests and post-processing.
pub fn read_snapshots(path: &Path, target: Target) -> Result<Vec<(f64, AmbientCurve)>> {
    let mut bytes = Vec::new();
    fs::File::open(path)?.read_to_end(&mut bytes)?;
    let fail = |detail: &str| Error::InvalidParam {
        name: "snapshot file".into(),
        detail: detail.into(),
    };
    if bytes.len() < 24 || &bytes[..4] != SNAPSHOT_MAGIC {
        return Err(fail("bad magic or truncated header"));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
    if u32_at(4) != SNAPSHOT_VERSION {
        return Err(fail("unsupported version"));
    }
    let d = u32_at(8) as usize;
    let n = u32_at(12) as usize;
    let period = f64_at(16);
    if d != target.ambient_dim() {
        return Err(fail("dimension does not match the target"));
    }
    let grid = Grid::new(n, period)?;
    let rec = 8 + 8 * d * n;
    let mut pos = 24;
    let mut out = Vec::new();
    while pos + rec <= bytes.len() {
        let t = f64_at(pos);
        let mut samples = Array2::zeros((d, n));
        for i in 0..d {
            for j in 0..n {
                samples[(i, j)] = f64_at(pos + 8 + 8 * (i * n + j));
            }
        }
        out.push((t, AmbientCurve::new(target, &grid, samples)?.with_time(t)));
        pos += rec;
    }
    if pos != bytes.len() {
        return Err(fail("trailing bytes after the last record"));
    }
    Ok(out)
}

/// Render selected CSV columns as a static SVG line chart. The chart is
/// derived purely from the CSV text so plots can be regenerated post hoc.
pub fn svg_from_csv(csv: &str, x_col: &str, y_cols: &[&str], title: &str) -> Result<String> {
    let mut lines = csv.lines();
    let header: Vec<&str> = lines
        .next()
        .ok_or_else(|| Error::InvalidParam {
            name: "csv".into(),
            detail: "empty document".into(),
        })?
        .trim_end_matches('\r')
        .split(',')
        .collect();
    let col = |name: &str| -> Result<usize> {
        header
            .iter()
            .position(|h| *h == name)
            .ok_or_else(|| Error::InvalidParam {
                name: "csv column".into(),
                detail: format!("no column named `{name}`"),
            })
    };
    let xi = col(x_col)?;
    let yis: Vec<usize> = y_cols.iter().map(|c| col(c)).collect::<Result<_>>()?;
    let mut xs = Vec::new();
    let mut ys: Vec<Vec<f64>> = vec![Vec::new(); yis.len()];
    for line in lines {
        let fields: Vec<&str> = line.trim_end_matches('\r').split(',').collect();
        if fields.len() != header.len() {
            continue;
        }
        let parse = |i: usize| fields[i].parse::<f64>().ok();
        if let Some(x) = parse(xi) {
            xs.push(x);
            for (k, &yi) in yis.iter().enumerate() {
                ys[k].push(parse(yi).unwrap_or(f64::NAN));
            }
        }
    }
    if xs.is_empty() {
        return Err(Error::InvalidParam {
            name: "csv".into(),
            detail: "no data rows".into(),
        });
    }
    let (w, h, ml, mr, mt, mb) = (800.0, 500.0, 70.0, 20.0, 40.0, 50.0);
    let finite = |v: &f64| v.is_finite();
    let xmin = xs
        .iter()
        .filter(|v| finite(v))
        .cloned()
        .fold(f64::INFINITY, f64::min);
    let xmax = xs
        .iter()
        .filter(|v| finite(v))
        .cloned()
        .fold(f64::NEG_INFINITY, f64::max);
    let mut ymin = f64::INFINITY;
    let mut ymax = f64::NEG_INFINITY;
    for series in &ys {
        for v in series.iter().filter(|v| finite(v)) {
            ymin = ymin.min(*v);
            ymax = ymax.max(*v);
        }
    }
    let (xspan, yspan) = ((xmax - xmin).max(1e-300), (ymax - ymin).max(1e-300));
    let px = |x: f64| ml + (x - xmin) / xspan * (w - ml - mr);
    let py = |y: f64| h - mb - (y - ymin) / yspan * (h - mt - mb);
    let palette = [
        "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
    ];
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{w}\" height=\"{h}\" viewBox=\"0 0 {w} {h}\">\n"
    ));
    svg.push_str(&format!(
        "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n<text x=\"{}\" y=\"24\" font-size=\"16\" text-anchor=\"middle\">{title}</text>\n",
        w / 2.0
    ));
    svg.push_str(&format!(
        "<line x1=\"{ml}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n<line x1=\"{ml}\" y1=\"{mt}\" x2=\"{ml}\" y2=\"{}\" stroke=\"black\"/>\n",
        h - mb, w - mr, h - mb, h - mb
    ));
    svg.push_str(&format!(
        "<text x=\"{ml}\" y=\"{}\" font-size=\"11\">{xmin:.4e}</text>\n<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\">{xmax:.4e}</text>\n",
        h - mb + 16.0, w - mr, h - mb + 16.0
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\">{ymin:.4e}</text>\n<text x=\"{}\" y=\"{}\" font-size=\"11\" text-anchor=\"end\">{ymax:.4e}</text>\n",
        ml - 6.0, h - mb, ml - 6.0, mt + 10.0
    ));
    for (k, series) in ys.iter().enumerate() {
        let color = palette[k % palette.len()];
        let pts: Vec<String> = xs
            .iter()
            .zip(series)
            .filter(|(x, y)| x.is_finite() && y.is_finite())
            .map(|(x, y)| format!("{:.2},{:.2}", px(*x), py(*y)))
            .collect();
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\" points=\"{}\"/>\n",
            pts.join(" ")
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" fill=\"{color}\">{}</text>\n",
            w - mr - 150.0,
            mt + 16.0 * (k + 1) as f64,
            y_cols[k]
        ));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

pub fn write_text(path: &Path, content: &str) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(content.as_bytes())?;
    Ok(())
}

/// The runnable invariant suite behind the `invariants` scenario.
pub mod suite {
    use super::*;
    use crate::covariant::{covariant_stack, energy, flow_rhs, FlowParams};
    use crate::flow::{evolve, max_speed, presets};
    use crate::gauge::GaugeOp;
    use crate::grid::{ComplexField, RealField};
    use crate::linear::{commutator_residual, frequency_sweep, loglog_slope, LinearCoeffs};
    use crate::manifold::{cross7, dot};
    use crate::multiplier::{smoothed_recip_times_xi, Multiplier};
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[derive(Debug, Clone)]
    pub struct Check {
        pub name: String,
        pub pass: bool,
        pub detail: String,
    }

    fn check(name: &str, pass: bool, detail: String) -> Check {
        Check {
            name: name.to_string(),
            pass,
            detail,
        }
    }

    fn random_real_field(grid: &Grid, rng: &mut impl Rng) -> RealField {
        let vals = (0..grid.n()).map(|_| rng.random_range(-1.0..1.0)).collect();
        RealField::new(grid, vals).expect("bounded samples are finite")
    }

    /// Run every library-level invariant at suite scale and report one line
    /// per property.
    pub fn invariant_suite(seed: u64) -> Vec<Check> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();

        // multiplier reality: i p(D) maps real fields to real fields
        {
            let mut worst = 0.0f64;
            for n in [64usize, 128, 256] {
                let grid = Grid::new(n, 1.0).expect("valid grid");
                let q = Multiplier::recip_freq_imag(&grid);
                for _ in 0..50 {
                    let f = random_real_field(&grid, &mut rng);
                    let im = q.apply(&f.to_complex()).expect("same grid").max_abs_im();
                    worst = worst.max(im);
                }
            }
            out.push(check(
                "multiplier-reality",
                worst <= 1e-13,
                format!("max imaginary part {worst:.3e} (tolerance 1e-13)"),
            ));
        }

        // symbol plateau: p(xi) xi = 1 for |xi| >= 2, so 1 - p(D)D kills those modes
        {
            let grid = Grid::new(128, 1.0).expect("valid grid");
            let exact = grid
                .freqs()
                .iter()
                .filter(|xi| xi.abs() >= 2.0)
                .all(|&xi| smoothed_recip_times_xi(xi) == 1.0);
            out.push(check(
                "recip-symbol-plateau",
                exact,
                "p(xi) xi identically 1 outside the transition band".into(),
            ));
        }

        // Parseval
        {
            let grid = Grid::new(128, 1.0).expect("valid grid");
            let mut worst = 0.0f64;
            for _ in 0..20 {
                let f = random_real_field(&grid, &mut rng);
                let lhs = f.l2_inner(&f).expect("same grid");
                let spec = f.to_complex().spectrum();
                let rhs: f64 = grid.period() * spec.iter().map(|c| c.norm_sqr()).sum::<f64>();
                worst = worst.max((lhs - rhs).abs() / lhs.max(1e-300));
            }
            out.push(check(
                "parseval",
                worst <= 1e-12,
                format!("max relative defect {worst:.3e}"),
            ));
        }

        // derivative commutes with multipliers on band-limited fields
        {
            let grid = Grid::new(128, 1.0).expect("valid grid");
            let m = Multiplier::bessel_inv(&grid);
            let mut worst = 0.0f64;
            for k in 1..12 {
                let f = RealField::from_fn(&grid, |x| {
                    (2.0 * std::f64::consts::PI * k as f64 * x).cos()
                });
                let a = m.apply(&f.derivative(1).expect("order ok").to_complex());
                let b = m.apply(&f.to_complex()).expect("grid ok").derivative(1);
                let diff = (&a.expect("grid ok") - &b.expect("order ok")).max_abs();
                worst = worst.max(diff);
            }
            out.push(check(
                "derivative-multiplier-commutation",
                worst <= 1e-12,
                format!("max defect {worst:.3e}"),
            ));
        }

        // pointwise manifold identities on random data
        {
            let mut worst_proj = 0.0f64;
            let mut worst_j = 0.0f64;
            let mut worst_cross = 0.0f64;
            let mut worst_curv = 0.0f64;
            for target in [Target::S2, Target::S6, Target::FlatC] {
                let d = target.ambient_dim();
                for _ in 0..30 {
                    let raw: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                    let u = if target.is_sphere() {
                        match target.retract(&raw) {
                            Ok(u) => u,
                            Err(_) => continue,
                        }
                    } else {
                        raw.clone()
                    };
                    let vx: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                    let vy: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
                    let x = target.project_tangent(&u, &vx).expect("u on target");
                    let y = target.project_tangent(&u, &vy).expect("u on target");
                    let xx = target.project_tangent(&u, &x).expect("u on target");
                    worst_proj = worst_proj.max(
                        x.iter()
                            .zip(&xx)
                            .map(|(a, b)| (a - b).abs())
                            .fold(0.0, f64::max),
                    );
                    let jx = target.apply_j(&u, &x).expect("tangent input");
                    let jjx = target.apply_j(&u, &jx).expect("tangent input");
                    worst_j = worst_j.max(
                        jjx.iter()
                            .zip(&x)
                            .map(|(a, b)| (a + b).abs())
                            .fold(0.0, f64::max),
                    );
                    worst_j = worst_j.max(dot(&jx, &x).abs());
                    if target == Target::S6 {
                        let mut c = [0.0; 7];
                        cross7(&x, &y, &mut c);
                        worst_cross = worst_cross.max(dot(&c, &x).abs());
                        worst_cross = worst_cross.max(dot(&c, &y).abs());
                        let lagr = dot(&x, &x) * dot(&y, &y) - dot(&x, &y).powi(2);
                        worst_cross = worst_cross.max((dot(&c, &c) - lagr).abs());
                    }
                    let z = target.project_tangent(&u, &vx).expect("u on target");
                    let w = target.project_tangent(&u, &vy).expect("u on target");
                    let lhs = dot(&target.curvature(&x, &y, &z), &w);
                    let rhs = dot(&target.curvature(&z, &w, &x), &y);
                    worst_curv = worst_curv.max((lhs - rhs).abs());
                }
            }
            out.push(check(
                "projector-idempotent",
                worst_proj <= 1e-13,
                format!("max defect {worst_proj:.3e}"),
            ));
            out.push(check(
                "almost-complex-structure",
                worst_j <= 1e-12,
                format!("max J^2+id / skewness defect {worst_j:.3e}"),
            ));
            out.push(check(
                "seven-dim-cross-product",
                worst_cross <= 1e-12,
                format!("max orthogonality/Lagrange defect {worst_cross:.3e}"),
            ));
            out.push(check(
                "curvature-pair-symmetry",
                worst_curv <= 1e-12,
                format!("max defect {worst_curv:.3e}"),
            ));
        }

        // the covariant derivative of J: zero on Kahler targets, not on S6
        {
            let grid = Grid::new(64, 1.0).expect("valid grid");
            let s2 = presets::wobbly_s2(&grid).expect("preset");
            let u: Vec<f64> = (0..3).map(|i| s2.samples()[(i, 0)]).collect();
            let x = Target::S2
                .project_tangent(&u, &[0.3, -0.5, 0.8])
                .expect("point on sphere");
            let nj_s2 = Target::S2.nabla_j_norm(&u, &x);
            let s6 = presets::generic_s6(&grid).expect("preset");
            let u6: Vec<f64> = (0..7).map(|i| s6.samples()[(i, 0)]).collect();
            let x6 = Target::S6
                .project_tangent(&u6, &[0.3, -0.5, 0.8, 0.1, -0.6, 0.2, 0.4])
                .expect("point on sphere");
            let nj_s6 = Target::S6.nabla_j_norm(&u6, &x6);
            out.push(check(
                "nabla-j-signature",
                nj_s2 <= 1e-6 && nj_s6 > 0.1,
                format!("|nabla J| on S2 {nj_s2:.3e}, on S6 {nj_s6:.3}"),
            ));
        }

        // stack and right-hand side tangency
        {
            let grid = Grid::new(128, 1.0).expect("valid grid");
            let u = presets::wobbly_s2(&grid).expect("preset");
            let p = FlowParams::new(1.0, 0.5, 1e-3, 2, 1e-6, 0.0).expect("valid params");
            let stack = covariant_stack(&u, 3).expect("resolved");
            let worst_stack = stack
                .iter()
                .map(|v| u.tangency_residual(v) / v.max_abs().max(1.0))
                .fold(0.0, f64::max);
            let rhs = flow_rhs(&u, &p).expect("resolved");
            let worst_rhs = u.tangency_residual(&rhs) / rhs.max_abs().max(1.0);
            out.push(check(
                "stack-and-rhs-tangency",
                worst_stack <= 1e-8 && worst_rhs <= 1e-8,
                format!("stack {worst_stack:.3e}, rhs {worst_rhs:.3e}"),
            ));
        }

        // scalar gauge commutator identity
        {
            let grid = Grid::new(128, 2.0 * std::f64::consts::PI).expect("valid grid");
            let coeffs = LinearCoeffs::default_preset(&grid);
            let fields: Vec<ComplexField> = (0..10)
                .map(|_| {
                    let n = grid.n();
                    let mut spec = vec![Complex64::default(); n];
                    for (i, c) in spec.iter_mut().enumerate() {
                        let j = grid.mode_index(i).unsigned_abs();
                        if j <= n / 4 {
                            *c = Complex64::new(
                                rng.random_range(-1.0..1.0),
                                rng.random_range(-1.0..1.0),
                            ) / (1.0 + j as f64);
                        }
                    }
                    ComplexField::from_spectrum(&grid, &spec).expect("same grid")
                })
                .collect();
            let left = |u: &ComplexField| coeffs.cubic_commutator(u);
            let right = |u: &ComplexField| {
                let bx = coeffs.coefficient_b().derivative(1)?;
                let first_order = u.derivative(1)?.coeff_mul(&bx)?;
                Ok(&coeffs.cubic_commutator_remainder(u)? - &first_order)
            };
            let res = commutator_residual(&left, &right, &fields).expect("fields valid");
            out.push(check(
                "cubic-commutator-identity",
                res <= 1e-9,
                format!("max relative residual {res:.3e}"),
            ));
        }

        // remainder boundedness sweeps
        {
            let grid = Grid::new(256, 2.0 * std::f64::consts::PI).expect("valid grid");
            let coeffs = LinearCoeffs::default_preset(&grid);
            let jmax = grid.n() / 4;
            let mut detail = String::new();
            let mut pass = true;
            let ops: [(
                &str,
                Box<dyn Fn(&ComplexField) -> crate::Result<ComplexField>>,
            ); 3] = [
                (
                    "gauge",
                    Box::new(|u: &ComplexField| coeffs.gauge_remainder(u)),
                ),
                (
                    "smoothing",
                    Box::new(|u: &ComplexField| coeffs.smoothing_remainder(u)),
                ),
                (
                    "cubic",
                    Box::new(|u: &ComplexField| coeffs.cubic_commutator_remainder(u)),
                ),
            ];
            for (name, op) in &ops {
                let pts = frequency_sweep(&grid, op.as_ref(), jmax).expect("sweep ok");
                let slope = loglog_slope(&pts);
                pass &= slope <= 0.1;
                detail.push_str(&format!("{name} {slope:.3}; "));
            }
            out.push(check("remainder-sweep-slopes", pass, detail));
        }

        // norm equivalence windows (scalar and bundle)
        {
            let grid = Grid::new(128, 2.0 * std::f64::consts::PI).expect("valid grid");
            let coeffs = LinearCoeffs::default_preset(&grid);
            let m = coeffs.equivalence_bound();
            let mut pass = true;
            let mut worst: f64 = 1.0;
            for _ in 0..50 {
                let f = random_real_field(&grid, &mut rng).to_complex();
                let ratio = coeffs.gauged_norm(&f).expect("same grid").value() / f.l2_norm();
                pass &= ratio >= 1.0 / m && ratio <= m;
                worst = worst.max(ratio.max(1.0 / ratio));
            }
            let fgrid = Grid::new(128, 1.0).expect("valid grid");
            for _ in 0..10 {
                let u = presets::random_smooth_curve(Target::S6, &fgrid, 6, 0.3, &mut rng)
                    .expect("preset");
                let p = FlowParams::new(1.0, 0.0, 0.0, 2, 1e-6, 0.0).expect("valid params");
                let gauge = GaugeOp::bind(&u, 2, 1.0).expect("a nonzero");
                let mb = gauge.equivalence_bound();
                let ratio = crate::gauge::gauged_energy(&u, &p).expect("resolved")
                    / crate::covariant::sobolev_norm(&u, 2).expect("resolved");
                pass &= ratio >= 1.0 / mb && ratio <= mb;
            }
            out.push(check(
                "norm-equivalence-windows",
                pass,
                format!("worst scalar ratio magnification {worst:.4}"),
            ));
        }

        // conservation, dissipation, and constraint along short runs
        {
            let grid = Grid::new(64, 1.0).expect("valid grid");
            let u0 =
                presets::latitude_circle(&grid, std::f64::consts::PI / 3.0, 1).expect("preset");
            let p = FlowParams::new(0.0, 0.0, 0.0, 2, FlowParams::cfl_dt(&grid), 0.005)
                .expect("valid params");
            let traj = evolve(&u0, &p).expect("stable run");
            let e0 = traj.diag[0].energy;
            let drift = traj
                .diag
                .iter()
                .map(|r| (r.energy - e0).abs() / e0)
                .fold(0.0, f64::max);
            let constraint = traj.diag.iter().map(|r| r.constraint).fold(0.0, f64::max);
            let w0 = presets::wobbly_s2(&grid).expect("preset");
            let dt = FlowParams::stable_dt(&grid, 0.0, 1e-2, max_speed(&w0));
            let pd = FlowParams::new(0.0, 0.0, 1e-2, 2, dt, 50.0 * dt).expect("valid params");
            let td = evolve(&w0, &pd).expect("stable run");
            let monotone = td
                .diag
                .windows(2)
                .all(|w| w[1].energy <= w[0].energy + 1e-10 * e0);
            out.push(check(
                "energy-conservation",
                drift <= 1e-8,
                format!("relative drift {drift:.3e} over t = 0.005"),
            ));
            out.push(check(
                "energy-dissipation",
                monotone && energy(&td.final_curve().clone()) < energy(&w0),
                "regularized energy nonincreasing".into(),
            ));
            out.push(check(
                "constraint-preservation",
                constraint <= 1e-10,
                format!("max residual {constraint:.3e}"),
            ));
        }

        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::covariant::FlowParams;
    use crate::flow::{evolve, presets};

    #[test]
    fn csv_escapes_special_fields() {
        let doc = csv_document(&["a", "b"], &[vec!["x,y".into(), "pl\"ain".into()]]);
        assert_eq!(doc, "a,b\r\n\"x,y\",\"pl\"\"ain\"\r\n");
    }

    #[test]
    fn snapshot_roundtrip() {
        let grid = Grid::new(64, 1.0).unwrap();
        let u0 = presets::wobbly_s2(&grid).unwrap();
        let p = FlowParams::new(0.0, 0.0, 0.0, 2, FlowParams::cfl_dt(&grid), 0.001).unwrap();
        let traj = evolve(&u0, &p).unwrap();
        let dir = std::env::temp_dir().join("dflow-snap-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("snap.bin");
        write_snapshots(&path, &traj).unwrap();
        let back = read_snapshots(&path, Target::S2).unwrap();
        assert_eq!(back.len(), traj.snapshots.len());
        for ((t1, c1), (t2, c2)) in traj.snapshots.iter().zip(&back) {
            assert_eq!(t1, t2);
            assert_eq!(c1.samples(), c2.samples());
        }
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn svg_renders_from_csv() {
        let grid = Grid::new(64, 1.0).unwrap();
        let u0 = presets::latitude_circle(&grid, 1.0, 1).unwrap();
        let p = FlowParams::new(0.0, 0.0, 0.0, 2, FlowParams::cfl_dt(&grid), 0.001).unwrap();
        let traj = evolve(&u0, &p).unwrap();
        let csv = trajectory_csv(&traj.diag, p.k_gauge);
        let svg = svg_from_csv(&csv, "t", &["energy", "n_gauged"], "flow diagnostics").unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("polyline"));
        assert!(svg_from_csv(&csv, "t", &["missing"], "x").is_err());
    }

    #[test]
    fn invariant_suite_passes() {
        let checks = suite::invariant_suite(7);
        for c in &checks {
            assert!(c.pass, "invariant `{}` failed: {}", c.name, c.detail);
        }
        assert!(checks.len() >= 12);
    }
}
