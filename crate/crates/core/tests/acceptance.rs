//! End-to-end acceptance suite. Every test prints one `criterion N: PASS|FAIL`
//! line with its measured values, written straight to stderr so it shows up
//! even when the harness captures output.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use serde_json::json;

use codim2_core::gallery::{self, band_defects, moebius_params, synthetic_cone, EXAMPLES};
use codim2_core::immersion::residuals::gauss_residual_at;
use codim2_core::immersion::{Atlas, PointGeometry, ProbeKind, Stratum};
use codim2_core::matspec::{lemma_fuzz, reference_grid, FuzzConfig};
use codim2_core::morse::{
    chen_and_wide, tau_by_leaf_formula, tau_by_morse, tau_by_quadrature, LeafEstimate, LeafOptions, MorseEstimate, MorseOptions, QuadratureEstimate,
    QuadratureOptions,
};
use codim2_core::structure::{riccati_residual, splitting_data};
use codim2_core::verify::{kernel_suite, pointwise_records, residual_suite, sample_points, stratum_expected, structure_rows, summarize_structure};

const RANK_TOL: f64 = 1e-7;
const SEED: u64 = 1;
const DIRECTIONS: usize = 500;

/// One measured quantity of a criterion.
struct Item {
    what: String,
    ok: bool,
}

fn item(what: impl Into<String>, ok: bool) -> Item {
    Item { what: what.into(), ok }
}

fn conclude(n: usize, title: &str, items: Vec<Item>) {
    let ok = items.iter().all(|i| i.ok);
    let failed: Vec<&str> = items.iter().filter(|i| !i.ok).map(|i| i.what.as_str()).collect();
    let detail: Vec<&str> = items.iter().map(|i| i.what.as_str()).collect();
    let line = format!("criterion {n:>2}: {} {title} [{}]\n", if ok { "PASS" } else { "FAIL" }, detail.join("; "));
    std::io::stderr().write_all(line.as_bytes()).unwrap();
    assert!(ok, "criterion {n} failed: {}", failed.join("; "));
}

fn atlas(name: &str) -> &'static Atlas {
    static ATLASES: OnceLock<Vec<Atlas>> = OnceLock::new();
    let all = ATLASES.get_or_init(|| EXAMPLES.iter().map(|n| gallery::build(n, &json!({})).unwrap()).collect());
    &all[EXAMPLES.iter().position(|n| *n == name).unwrap()]
}

struct Estimates {
    morse: MorseEstimate,
    morse_time: Duration,
    quad: QuadratureEstimate,
    quad_time: Duration,
}

/// Morse average over 500 directions and quadrature at the default budget,
/// computed once per example and shared between criteria.
fn estimates(name: &str) -> &'static Estimates {
    static CELLS: [OnceLock<Estimates>; 6] = [OnceLock::new(), OnceLock::new(), OnceLock::new(), OnceLock::new(), OnceLock::new(), OnceLock::new()];
    let i = EXAMPLES.iter().position(|n| *n == name).unwrap();
    CELLS[i].get_or_init(|| {
        let a = atlas(name);
        let t = Instant::now();
        let morse = tau_by_morse(a, DIRECTIONS, SEED, &MorseOptions::default()).unwrap_or_else(|e| panic!("{name}: Morse average: {e}"));
        let morse_time = t.elapsed();
        let t = Instant::now();
        let quad = tau_by_quadrature(a, &QuadratureOptions::default()).unwrap_or_else(|e| panic!("{name}: quadrature: {e}"));
        Estimates { morse, morse_time, quad, quad_time: t.elapsed() }
    })
}

fn leaf_switched() -> &'static (LeafEstimate, Duration) {
    static LEAF: OnceLock<(LeafEstimate, Duration)> = OnceLock::new();
    LEAF.get_or_init(|| {
        let t = Instant::now();
        let l = tau_by_leaf_formula(atlas("switched-s3"), &LeafOptions::default()).unwrap();
        (l, t.elapsed())
    })
}

fn max_dev(tau: &[f64], want: &[f64]) -> f64 {
    tau.iter().zip(want).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

/// τ₀ + τₙ − Σ_{0<k<n} τ_k.
fn chen_gap(tau: &[f64]) -> f64 {
    let n = tau.len() - 1;
    tau[0] + tau[n] - tau[1..n].iter().sum::<f64>()
}

fn fmt(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.4}")).collect();
    format!("({})", parts.join(", "))
}

#[test]
fn criterion_01_pencil_lemma_fuzz() {
    let cfg = FuzzConfig::default();
    let t = Instant::now();
    let rep = lemma_fuzz(&cfg);
    let secs = t.elapsed().as_secs_f64();
    conclude(
        1,
        "PSD pencil fuzz",
        vec![
            item(
                format!("{} pairs, dims {}..={}, {}-point grid", rep.trials, cfg.dim_min, cfg.dim_max, reference_grid().len()),
                rep.trials == 10_000 && reference_grid().len() == 20,
            ),
            item(format!("inequality failures {} at margin {:.0e}", rep.failures, cfg.tol), rep.failures == 0),
            item(
                format!("classifier mismatches {} of {} unambiguous ({} ambiguous)", rep.classifier_mismatches, rep.classifier_checked, rep.ambiguous),
                rep.classifier_mismatches == 0 && rep.classifier_checked > 9_000,
            ),
            item(format!("Schur residual {:.2e} over {} pairs", rep.schur_max_residual, rep.schur_checked), rep.schur_max_residual <= 1e-8),
            item(format!("runtime {secs:.1}s"), secs <= 60.0),
        ],
    );
}

#[test]
fn criterion_02_gauss_identity() {
    let t = Instant::now();
    let mut items = Vec::new();
    for name in EXAMPLES {
        let a = atlas(name);
        let samples = sample_points(a, 1_000, SEED);
        let mut worst = 0.0f64;
        let mut bad = 0;
        for s in &samples {
            match PointGeometry::at(&a.charts[s.chart], &s.u) {
                Ok(g) => worst = worst.max(gauss_residual_at(&g)),
                Err(_) => bad += 1,
            }
        }
        items.push(item(format!("{name} {worst:.1e} ({} pts, {bad} failed)", samples.len()), worst <= 1e-6 && bad == 0 && samples.len() == 1_000));
    }
    let secs = t.elapsed().as_secs_f64();
    items.push(item(format!("runtime {secs:.1}s"), secs <= 300.0));
    conclude(2, "Gauss identity", items);
}

#[test]
fn criterion_03_codazzi_and_ricci_equations() {
    let mut items = Vec::new();
    for name in EXAMPLES {
        let (codazzi, ricci, used, _) = residual_suite(atlas(name), 200, SEED);
        items.push(item(format!("{name} codazzi {codazzi:.1e} ricci {ricci:.1e} at {used}"), codazzi <= 1e-5 && ricci <= 1e-5 && used == 200));
    }
    conclude(3, "Codazzi and Ricci equations", items);
}

#[test]
fn criterion_04_round_sphere() {
    let e = estimates("round-s3");
    let want = [1.0, 0.0, 0.0, 1.0];
    let q = &e.quad;
    let gap = chen_gap(&q.tau);
    let verdict = chen_and_wide(&q.tau, &q.error, atlas("round-s3").meta.tight_target);
    conclude(
        4,
        "round S3 baseline",
        vec![
            item(format!("Morse {} over {} pairs", fmt(&e.morse.tau), e.morse.pairs), max_dev(&e.morse.tau, &want) <= 0.03 && e.morse.pairs * 2 >= DIRECTIONS),
            item(format!("quadrature {} on {} nodes", fmt(&q.tau), q.nodes), max_dev(&q.tau, &want) <= 0.01),
            item(format!("gap {gap:.4}"), (gap - 2.0).abs() <= 0.05 && (chen_gap(&e.morse.tau) - 2.0).abs() <= 0.05),
            item(format!("wide {}", verdict.wide), !verdict.wide),
        ],
    );
}

#[test]
fn criterion_05_product_of_spheres() {
    let name = "product-s2s2";
    let e = estimates(name);
    let a = atlas(name);
    let want = [1.0, 0.0, 2.0, 0.0, 1.0];
    let q = &e.quad;
    let verdict = chen_and_wide(&q.tau, &q.error, a.meta.tight_target);
    let samples = sample_points(a, 1_000, SEED);
    let records = pointwise_records(a, &samples, RANK_TOL);
    let u2 = records.iter().filter(|r| r.stratum == Some(Stratum::U(2))).count();
    let (cos, w, used, refused) = kernel_suite(a, &samples, RANK_TOL);
    conclude(
        5,
        "S2 x S2",
        vec![
            item(format!("Morse {}", fmt(&e.morse.tau)), max_dev(&e.morse.tau, &want) <= 0.05),
            item(format!("quadrature {}", fmt(&q.tau)), max_dev(&q.tau, &want) <= 0.05),
            item(
                format!("gap {:.4} / {:.4}", chen_gap(&q.tau), chen_gap(&e.morse.tau)),
                chen_gap(&q.tau).abs() <= 0.05 && chen_gap(&e.morse.tau).abs() <= 0.05,
            ),
            item(format!("wide {}", verdict.wide), verdict.wide),
            item(format!("U2 at {u2} of {}", records.len()), u2 == records.len()),
            item(format!("kernel angle defect {cos:.1e}, |w| {w:.1e} at {used} ({refused} refused)"), cos <= 1e-6 && w <= 1e-6 && refused == 0),
        ],
    );
}

#[test]
fn criterion_06_switched_sphere_type_numbers() {
    let name = "switched-s3";
    let a = atlas(name);
    let e = estimates(name);
    let (leaf, leaf_time) = leaf_switched();
    let q = &e.quad;
    let verdict = chen_and_wide(&q.tau, &q.error, a.meta.tight_target);
    let disks_ok = leaf.curvature_integrals.len() == 2 && leaf.curvature_integrals.values().all(|k| (k - 2.0 * PI).abs() <= 0.02 * 2.0 * PI);
    let secs = (e.quad_time + *leaf_time).as_secs_f64();
    conclude(
        6,
        "switched S3 at epsilon 0.2",
        vec![
            item(format!("epsilon {}", a.params["epsilon"]), a.params["epsilon"].as_f64() == Some(0.2)),
            item(format!("quadrature {}", fmt(&q.tau)), max_dev(&q.tau, &[1.0; 4]) <= 0.1),
            item(format!("leaf formula {:.5} ± {:.1e}", leaf.tau, leaf.error), (leaf.tau - 1.0).abs() <= 0.02),
            item(format!("disk curvature integrals {:?}", leaf.curvature_integrals.values().map(|k| format!("{k:.5}")).collect::<Vec<_>>()), disks_ok),
            item(format!("wide {} tight {}", verdict.wide, verdict.tight), verdict.wide && verdict.tight),
            item(format!("runtime {secs:.1}s"), secs <= 600.0),
        ],
    );
}

#[test]
fn criterion_07_switched_sphere_strata() {
    let a = atlas("switched-s3");
    let records = pointwise_records(a, &sample_points(a, 10_000, SEED), RANK_TOL);
    let admissible = |r: &codim2_core::verify::PointRecord| match r.stratum {
        Some(Stratum::U(1)) => !r.flat,
        Some(Stratum::RelNullity(_)) => r.flat,
        _ => false,
    };
    let stray = records.iter().filter(|r| !admissible(r)).count();
    let ric_pos = records.iter().filter(|r| r.ricci.first().is_some_and(|&l| l > 1e-9)).count();
    let nonflat: Vec<_> = records.iter().filter(|r| r.stratum.is_some() && !r.flat).collect();
    let two = nonflat.iter().map(|r| r.ricci[0] + r.ricci[1]).fold(f64::INFINITY, f64::min);
    let flat = records.iter().filter(|r| r.flat).count();
    let flat_probe = records.iter().filter(|r| a.probes[r.sample.probe].kind == ProbeKind::Flat).count();
    conclude(
        7,
        "switched S3 strata",
        vec![
            item(
                format!("{stray} of {} outside U1 and flat RelNullity ({flat} flat, {flat_probe} from the flat probe)", records.len()),
                stray == 0 && records.len() == 10_000,
            ),
            item(format!("Ric > 0 at {ric_pos} points"), ric_pos == 0),
            item(format!("min λ1+λ2 {two:.4} over {} nonflat", nonflat.len()), two >= 0.01 && !nonflat.is_empty()),
        ],
    );
}

#[test]
fn criterion_08_splitting_tensor() {
    let mut items = Vec::new();
    for name in ["switched-s3", "cylinder-quotient"] {
        let a = atlas(name);
        let records = pointwise_records(a, &sample_points(a, 1_000, SEED), RANK_TOL);
        let u1: Vec<_> = records.iter().filter(|r| r.stratum == Some(Stratum::U(1)) && !r.flat).take(200).map(|r| r.sample.clone()).collect();
        let s = summarize_structure(&structure_rows(a, &u1, RANK_TOL));
        items.push(item(
            format!(
                "{name} ‖C‖ {:.1e} |w(T)| {:.1e}, composition failures {}, refusals {} at {}",
                s.c_max, s.w_t_max, s.composition_failures, s.refusals, s.rows
            ),
            s.rows == u1.len() && s.rows >= 100 && s.c_max <= 1e-5 && s.w_t_max <= 1e-6 && s.composition_failures == 0 && s.refusals == 0,
        ));
    }
    let cone = synthetic_cone(0.5).unwrap();
    let chart = &cone.charts[0];
    let (mut c_min, mut closed) = (f64::INFINITY, 0.0f64);
    for u in [[1.3, 0.4, 0.7], [0.8, -0.2, 0.1], [1.6, 0.5, -0.6]] {
        c_min = c_min.min(splitting_data(chart, &u, None, RANK_TOL).unwrap().norm());
        closed = closed.max(riccati_residual(chart, &u, 0.3, 9, RANK_TOL).unwrap().closed_form_defect);
    }
    items.push(item(format!("cone ‖C‖ ≥ {c_min:.3}, Riccati closed-form defect {closed:.1e}"), c_min >= 0.1 && closed <= 1e-3));
    conclude(8, "splitting tensor and normal connection", items);
}

#[test]
fn criterion_09_moebius_examples() {
    let mut items = Vec::new();
    for name in ["moebius", "moebius-cyl"] {
        let a = atlas(name);
        let deck = a.deck_equivariance(10_000, SEED).unwrap();
        let records = pointwise_records(a, &sample_points(a, 10_000, SEED), RANK_TOL);
        let rhat = records.iter().map(|r| r.rhat_min).fold(f64::INFINITY, f64::min);
        let outside = records.iter().filter(|r| !stratum_expected(a, r)).count();
        let (period, flat) = band_defects(&moebius_params(name, &a.params).unwrap(), 10_000, SEED).unwrap();
        items.push(item(
            format!("{name} deck {deck:.1e} R̂ min {rhat:.1e} flatness {flat:.1e} period {period:.1e} outside K∪U1 {outside}"),
            deck <= 1e-9 && rhat >= -1e-7 && flat <= 1e-8 && period <= 1e-9 && outside == 0 && records.len() == 10_000,
        ));
    }
    conclude(9, "flat band compositions", items);
}

#[test]
fn criterion_10_estimator_coherence() {
    let mut items = Vec::new();
    for name in EXAMPLES {
        let a = atlas(name);
        let e = estimates(name);
        let n = a.n;
        let (tm, sm, tq, sq) = (&e.morse.tau, &e.morse.stderr, &e.quad.tau, &e.quad.error);
        let agree = (0..=n).map(|k| (tm[k] - tq[k]).abs() - 3.0 * (sm[k] + sq[k])).fold(f64::NEG_INFINITY, f64::max);
        let sym = |t: &[f64], s: &[f64]| (0..=n).map(|k| (t[k] - t[n - k]).abs() - 3.0 * (s[k] + s[n - k])).fold(f64::NEG_INFINITY, f64::max);
        let morse_ineq = |t: &[f64], s: &[f64]| (0..=n).map(|k| t[k] - (a.meta.betti[k] as f64 - 3.0 * s[k])).fold(f64::INFINITY, f64::min);
        let ok = agree <= 0.0 && sym(tm, sm) <= 0.0 && sym(tq, sq) <= 0.0 && morse_ineq(tm, sm) >= 0.0 && morse_ineq(tq, sq) >= 0.0;
        items.push(item(
            format!(
                "{name} Morse {} [{:.0}s] quadrature {} [{:.0}s] excess {agree:.1e}",
                fmt(tm),
                e.morse_time.as_secs_f64(),
                fmt(tq),
                e.quad_time.as_secs_f64()
            ),
            ok,
        ));
    }
    conclude(10, "Morse average and quadrature coherence", items);
}
