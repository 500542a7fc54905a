//! Invariant suites over sampled points of an atlas, collected into a
//! pass/fail table with measured margins.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{GeomError, Result};
use crate::gallery;
use crate::immersion::classify::ordered_frame;
use crate::immersion::{classify_point, codazzi_residual, ricci_eq_residual, weinstein_frame, Atlas, PointGeometry, ProbeKind, Stratum};
use crate::jetcalc::{ricci_profile, sectional_range};
use crate::linalg::max_cross_cosine;
use crate::morse::{chen_and_wide, tau_by_morse, MorseOptions};
use crate::sampling::ShiftedHalton;
use crate::structure::connection::connection_form_coords;
use crate::structure::report::ReportOptions;
use crate::structure::{structure_report, StructureReport};

pub const GAUSS_TOL: f64 = 1e-6;
pub const CODAZZI_TOL: f64 = 1e-5;
pub const RICCI_EQ_TOL: f64 = 1e-5;
/// Smallest admissible eigenvalue of the curvature operator.
pub const CURVATURE_FLOOR: f64 = -1e-7;
pub const DECK_TOL: f64 = 1e-9;
pub const BAND_FLAT_TOL: f64 = 1e-8;
pub const SPLITTING_TOL: f64 = 1e-5;
pub const W_T_TOL: f64 = 1e-6;
pub const KERNEL_ANGLE_TOL: f64 = 1e-6;
pub const CONNECTION_TOL: f64 = 1e-6;
/// Lower bound for λ₁ + λ₂ of the Ricci tensor at nonflat switched-sphere samples.
pub const TWO_POSITIVE_MIN: f64 = 0.01;
/// Ricci eigenvalues at or below this count as zero when testing Ric > 0.
pub const RICCI_ZERO: f64 = 1e-9;

/// One row of the verification table.
#[derive(Clone, Debug, Serialize)]
pub struct Check {
    pub name: String,
    pub measured: f64,
    pub threshold: f64,
    /// Distance to the threshold on the passing side (negative on failure).
    pub margin: f64,
    pub samples: usize,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

impl Check {
    /// Passes iff `measured ≤ threshold`.
    pub fn at_most(name: &str, measured: f64, threshold: f64, samples: usize) -> Self {
        let passed = measured <= threshold;
        Check { name: name.into(), measured, threshold, margin: threshold - measured, samples, passed, detail: None }
    }

    /// Passes iff `measured ≥ threshold`.
    pub fn at_least(name: &str, measured: f64, threshold: f64, samples: usize) -> Self {
        let passed = measured >= threshold;
        Check { name: name.into(), measured, threshold, margin: measured - threshold, samples, passed, detail: None }
    }

    pub fn with_detail(mut self, d: impl Into<String>) -> Self {
        self.detail = Some(d.into());
        self
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyOptions {
    /// Points for the pointwise suite (Gauss identity, curvature sign, strata).
    pub samples: usize,
    /// Points for the Codazzi and Ricci-equation residuals.
    pub residual_samples: usize,
    /// U₁ points examined by the structure suite.
    pub structure_samples: usize,
    /// Directions for the wideness verdict.
    pub directions: usize,
    pub seed: u64,
    pub rank_tol: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions { samples: 1000, residual_samples: 200, structure_samples: 200, directions: 64, seed: 1, rank_tol: 1e-7 }
    }
}

/// A sampled point with the probe it came from.
#[derive(Clone, Debug, Serialize)]
pub struct Sample {
    pub probe: usize,
    pub chart: usize,
    pub u: Vec<f64>,
}

/// `count` quasirandom points dealt round-robin over the atlas probes, each
/// probe drawing from its own shifted Halton sequence.
pub fn sample_points(atlas: &Atlas, count: usize, seed: u64) -> Vec<Sample> {
    let mut seqs: Vec<ShiftedHalton> =
        atlas.probes.iter().enumerate().map(|(i, p)| ShiftedHalton::new(atlas.charts[p.chart].n, seed.wrapping_mul(31).wrapping_add(i as u64))).collect();
    let np = atlas.probes.len().max(1);
    (0..count)
        .filter(|_| !atlas.probes.is_empty())
        .map(|i| {
            let pi = i % np;
            let p = &atlas.probes[pi];
            Sample { probe: pi, chart: p.chart, u: p.region.from_unit(&seqs[pi].next_point()) }
        })
        .collect()
}

/// What the pointwise suite records at one sample.
#[derive(Clone, Debug, Serialize)]
pub struct PointRecord {
    pub sample: Sample,
    pub stratum: Option<Stratum>,
    pub flat: bool,
    pub gauss: f64,
    pub rhat_min: f64,
    pub ricci: Vec<f64>,
    pub error: Option<String>,
}

fn point_record(atlas: &Atlas, s: &Sample, rank_tol: f64) -> PointRecord {
    let chart = &atlas.charts[s.chart];
    let mut rec = PointRecord { sample: s.clone(), stratum: None, flat: false, gauss: f64::NAN, rhat_min: f64::NAN, ricci: Vec::new(), error: None };
    let geom = match PointGeometry::at(chart, &s.u) {
        Ok(g) => g,
        Err(e) => {
            rec.error = Some(e.to_string());
            return rec;
        }
    };
    rec.gauss = crate::immersion::residuals::gauss_residual_at(&geom);
    rec.rhat_min = sectional_range(&geom.curvature).rhat_min;
    rec.ricci = ricci_profile(&geom.curvature, RICCI_ZERO).eigenvalues;
    match weinstein_frame(&geom.forms).and_then(|f| classify_point(&f, &geom.forms, rank_tol)) {
        Ok(c) => {
            rec.stratum = Some(c.stratum);
            rec.flat = c.flat;
        }
        Err(e) => rec.error = Some(e.to_string()),
    }
    rec
}

pub fn pointwise_records(atlas: &Atlas, samples: &[Sample], rank_tol: f64) -> Vec<PointRecord> {
    crate::parallel::install(|| samples.par_iter().map(|s| point_record(atlas, s, rank_tol)).collect())
}

fn stratum_key(r: &PointRecord) -> String {
    match (&r.stratum, &r.error) {
        (Some(s), _) => {
            let base = match s {
                Stratum::RelNullity(k) => format!("RelNullity({k})"),
                Stratum::U(k) => format!("U{k}"),
                Stratum::Strict { rank_a, rank_b } => format!("Strict({rank_a},{rank_b})"),
            };
            if r.flat {
                format!("{base} flat")
            } else {
                base
            }
        }
        (None, Some(e)) => format!("refused: {}", e.split(':').next().unwrap_or(e)),
        (None, None) => "unclassified".into(),
    }
}

pub fn strata_histogram(records: &[PointRecord]) -> BTreeMap<String, usize> {
    let mut h = BTreeMap::new();
    for r in records {
        *h.entry(stratum_key(r)).or_insert(0) += 1;
    }
    h
}

/// Whether a classified point is of the kind the example predicts.
pub fn stratum_expected(atlas: &Atlas, r: &PointRecord) -> bool {
    let Some(s) = r.stratum else { return false };
    let kind = atlas.probes[r.sample.probe].kind;
    match atlas.name.as_str() {
        "round-s3" => s == Stratum::U(0) && !r.flat,
        "product-s2s2" => s == Stratum::U(2),
        "moebius" | "moebius-cyl" => s == Stratum::U(1) || r.flat,
        "switched-s3" => match kind {
            ProbeKind::Flat => matches!(s, Stratum::RelNullity(_)) && r.flat,
            _ => s == Stratum::U(1) && !r.flat,
        },
        "cylinder-quotient" => s == Stratum::U(1) && !r.flat,
        _ => true,
    }
}

/// Largest Codazzi and Ricci-equation residuals at `target` points at which the
/// smooth normal gauge exists; points where it does not are skipped and
/// counted, with at most 4·target draws.
pub fn residual_suite(atlas: &Atlas, target: usize, seed: u64) -> (f64, f64, usize, usize) {
    let pool = sample_points(atlas, 4 * target, seed ^ 0xc0da);
    let vals: Vec<Option<(f64, f64)>> = crate::parallel::install(|| {
        pool.par_iter()
            .map(|s| {
                let chart = &atlas.charts[s.chart];
                Some((codazzi_residual(chart, &s.u).ok()?, ricci_eq_residual(chart, &s.u).ok()?))
            })
            .collect()
    });
    let (mut c, mut r, mut used, mut skipped) = (0.0f64, 0.0f64, 0usize, 0usize);
    for v in vals {
        if used == target {
            break;
        }
        match v {
            Some((a, b)) => {
                c = c.max(a);
                r = r.max(b);
                used += 1;
            }
            None => skipped += 1,
        }
    }
    (c, r, used, skipped)
}

/// Structure rows at U₁ samples, in sample order.
pub fn structure_rows(atlas: &Atlas, samples: &[Sample], rank_tol: f64) -> Vec<(Sample, Result<StructureReport>)> {
    let opts = ReportOptions { rank_tol, ..Default::default() };
    crate::parallel::install(|| samples.par_iter().map(|s| (s.clone(), structure_report(&atlas.charts[s.chart], &s.u, &opts))).collect())
}

/// Summary of the splitting tensor, w(T) and the composition criterion over U₁ rows.
#[derive(Clone, Debug, Serialize)]
pub struct StructureSummary {
    pub rows: usize,
    pub c_max: f64,
    pub w_t_max: f64,
    pub composition_failures: usize,
    pub refusals: usize,
}

pub fn summarize_structure(rows: &[(Sample, Result<StructureReport>)]) -> StructureSummary {
    let mut out = StructureSummary { rows: 0, c_max: 0.0, w_t_max: 0.0, composition_failures: 0, refusals: 0 };
    for (_, r) in rows {
        match r {
            Ok(rep) if rep.stratum == Stratum::U(1) => {
                out.rows += 1;
                match (rep.c_norm, rep.w_t, rep.composition_ok) {
                    (Some(c), Some(w), Some(ok)) => {
                        out.c_max = out.c_max.max(c);
                        out.w_t_max = out.w_t_max.max(w);
                        if !ok {
                            out.composition_failures += 1;
                        }
                    }
                    _ => out.refusals += 1,
                }
            }
            Ok(_) => {}
            Err(_) => out.refusals += 1,
        }
    }
    out
}

/// Kernel orthogonality and |w| at U₂ samples: (worst cosine between ker A
/// and ker B, worst |w|, points examined, refusals).
pub fn kernel_suite(atlas: &Atlas, samples: &[Sample], rank_tol: f64) -> (f64, f64, usize, usize) {
    let vals: Vec<Option<(f64, f64)>> = crate::parallel::install(|| {
        samples
            .par_iter()
            .map(|s| {
                let chart = &atlas.charts[s.chart];
                let geom = PointGeometry::at(chart, &s.u).ok()?;
                let fr = weinstein_frame(&geom.forms).ok()?;
                let ord = ordered_frame(&fr, &geom.forms, rank_tol).ok()?;
                if ord.kernel_a.ncols() + ord.kernel_b.ncols() != chart.n {
                    return Some((1.0, f64::NAN));
                }
                let cos = max_cross_cosine(&ord.kernel_a, &ord.kernel_b);
                let (w, _) = connection_form_coords(chart, &s.u, rank_tol).ok()?;
                // Covector in coordinates; measure its metric norm.
                let g_inv = &geom.forms.metric.g_inv;
                let wv = nalgebra::DVector::from_vec(w);
                let wn = (wv.transpose() * g_inv * &wv)[(0, 0)].max(0.0).sqrt();
                Some((cos, wn))
            })
            .collect()
    });
    let (mut cos, mut w, mut used, mut refused) = (0.0f64, 0.0f64, 0, 0);
    for v in vals {
        match v {
            Some((c, x)) => {
                cos = cos.max(c);
                w = if x.is_nan() { f64::INFINITY } else { w.max(x) };
                used += 1;
            }
            None => refused += 1,
        }
    }
    (cos, w, used, refused)
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub example: String,
    pub params: Value,
    pub checks: Vec<Check>,
    pub strata: BTreeMap<String, usize>,
    pub passed: bool,
    pub runtime_s: f64,
    pub version: String,
    pub config: Value,
}

/// Runs every suite that applies to the atlas.
pub fn verify_atlas(atlas: &Atlas, opts: &VerifyOptions) -> Result<VerifyReport> {
    let t0 = Instant::now();
    let mut checks = Vec::new();
    let samples = sample_points(atlas, opts.samples, opts.seed);
    let records = pointwise_records(atlas, &samples, opts.rank_tol);
    let evaluated: Vec<&PointRecord> = records.iter().filter(|r| r.gauss.is_finite()).collect();
    let immersion_failures = records.len() - evaluated.len();
    checks.push(Check::at_most("immersion", immersion_failures as f64, 0.0, records.len()).with_detail("points where the differential or metric degenerates"));
    let gauss = evaluated.iter().map(|r| r.gauss).fold(0.0, f64::max);
    checks.push(Check::at_most("gauss", gauss, GAUSS_TOL, evaluated.len()));
    let rhat = evaluated.iter().map(|r| r.rhat_min).fold(f64::INFINITY, f64::min);
    checks.push(Check::at_least("curvature_operator_min", rhat, CURVATURE_FLOOR, evaluated.len()));
    let unexpected = records.iter().filter(|r| !stratum_expected(atlas, r)).count();
    checks.push(
        Check::at_most("strata", unexpected as f64, 0.0, records.len())
            .with_detail(format!("expected {}; measured = points outside it", atlas.meta.expected_strata)),
    );

    let (codazzi, ricci_eq, used, skipped) = residual_suite(atlas, opts.residual_samples, opts.seed);
    let note = format!("{skipped} points without a smooth normal gauge skipped");
    checks.push(Check::at_most("codazzi", codazzi, CODAZZI_TOL, used).with_detail(note.clone()));
    checks.push(Check::at_most("ricci_equation", ricci_eq, RICCI_EQ_TOL, used).with_detail(note));

    if atlas.charts.iter().any(|c| !c.decks.is_empty()) {
        let deck = atlas.deck_equivariance(opts.samples, opts.seed)?;
        checks.push(Check::at_most("deck_equivariance", deck, DECK_TOL, opts.samples));
    }

    match atlas.name.as_str() {
        "moebius" | "moebius-cyl" => {
            let p = gallery::moebius_params(&atlas.name, &atlas.params)?;
            let (period, flat) = gallery::band_defects(&p, opts.samples, opts.seed)?;
            checks.push(Check::at_most("band_flatness", flat, BAND_FLAT_TOL, opts.samples));
            checks.push(Check::at_most("band_periodicity", period, DECK_TOL, opts.samples));
        }
        "product-s2s2" => {
            let (cos, w, used, refused) = kernel_suite(atlas, &samples, opts.rank_tol);
            checks.push(Check::at_most("kernel_orthogonality", cos, KERNEL_ANGLE_TOL, used).with_detail(format!("{refused} refused")));
            checks.push(Check::at_most("connection_form", w, CONNECTION_TOL, used));
        }
        "switched-s3" => {
            let nonflat: Vec<&PointRecord> = evaluated.iter().copied().filter(|r| atlas.probes[r.sample.probe].kind != ProbeKind::Flat).collect();
            let positive = evaluated.iter().filter(|r| r.ricci.first().is_some_and(|&l| l > RICCI_ZERO)).count();
            checks.push(Check::at_most("ricci_positive_points", positive as f64, 0.0, evaluated.len()));
            let two = nonflat.iter().map(|r| if r.ricci.len() >= 2 { r.ricci[0] + r.ricci[1] } else { f64::NAN }).fold(f64::INFINITY, f64::min);
            checks.push(Check::at_least("ricci_two_positive", two, TWO_POSITIVE_MIN, nonflat.len()));
        }
        _ => {}
    }

    if matches!(atlas.name.as_str(), "switched-s3" | "cylinder-quotient" | "moebius" | "moebius-cyl") {
        let u1: Vec<Sample> =
            records.iter().filter(|r| r.stratum == Some(Stratum::U(1)) && !r.flat).take(opts.structure_samples).map(|r| r.sample.clone()).collect();
        let rows = structure_rows(atlas, &u1, opts.rank_tol);
        let s = summarize_structure(&rows);
        let refused = format!("{} refusals", s.refusals);
        checks.push(Check::at_most("splitting_tensor", s.c_max, SPLITTING_TOL, s.rows).with_detail(refused.clone()));
        // The band's rulings are not nullity lines, so w(T) need not vanish on the Moebius examples.
        if matches!(atlas.name.as_str(), "switched-s3" | "cylinder-quotient") {
            checks.push(Check::at_most("connection_on_nullity", s.w_t_max, W_T_TOL, s.rows).with_detail(refused));
        }
        checks.push(Check::at_most("composition_criterion", s.composition_failures as f64, 0.0, s.rows));
    }

    if opts.directions > 0 {
        let m = tau_by_morse(atlas, opts.directions, opts.seed, &MorseOptions::default())?;
        let v = chen_and_wide(&m.tau, &m.stderr, atlas.meta.tight_target);
        let bar = 3.0 * m.stderr.iter().sum::<f64>();
        let c = Check {
            name: "wide".into(),
            measured: v.gap,
            threshold: bar,
            margin: if atlas.meta.expected_wide { bar - v.gap.abs() } else { v.gap.abs() - bar },
            samples: m.pairs * 2,
            passed: v.wide == atlas.meta.expected_wide,
            detail: Some(format!("chen gap by Morse average; expected wide = {}", atlas.meta.expected_wide)),
        };
        checks.push(c);
    }

    let passed = checks.iter().all(|c| c.passed);
    Ok(VerifyReport {
        example: atlas.name.clone(),
        params: atlas.params.clone(),
        checks,
        strata: strata_histogram(&records),
        passed,
        runtime_s: t0.elapsed().as_secs_f64(),
        version: crate::VERSION.into(),
        config: json!(opts),
    })
}

/// Plain-text table of a report.
pub fn render_table(rep: &VerifyReport) -> String {
    let mut out = format!("{:<26} {:>13} {:>13} {:>13} {:>7}  {}\n", "invariant", "measured", "threshold", "margin", "n", "result");
    for c in &rep.checks {
        out.push_str(&format!(
            "{:<26} {:>13.4e} {:>13.4e} {:>13.4e} {:>7}  {}\n",
            c.name,
            c.measured,
            c.threshold,
            c.margin,
            c.samples,
            if c.passed { "PASS" } else { "FAIL" }
        ));
    }
    out
}

impl VerifyReport {
    pub fn failed(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }
}

/// Convenience wrapper: build by name and verify.
pub fn verify_example(name: &str, params: &Value, opts: &VerifyOptions) -> Result<VerifyReport> {
    if !gallery::EXAMPLES.contains(&name) {
        return Err(GeomError::InvalidInput(format!("unknown example `{name}`")));
    }
    verify_atlas(&gallery::build(name, params)?, opts)
}
