//! Whole-atlas checks on the constructed examples.

use nalgebra::DVector;
use serde_json::json;

use codim2_core::gallery::{self, Profile, ProfileSpec, EXAMPLES};
use codim2_core::immersion::{classify_point, weinstein_frame, PointGeometry};
use codim2_core::linalg::sym_eigenvalues;
use codim2_core::structure::{leaf_total_curvature, nullity_direction};
use codim2_core::verify::{pointwise_records, sample_points, strata_histogram};
use codim2_core::GeomError;

const RANK_TOL: f64 = 1e-7;

#[test]
fn every_atlas_is_an_immersion_with_nonnegative_curvature_operator() {
    for name in EXAMPLES {
        let atlas = gallery::build(name, &json!({})).unwrap();
        let samples = sample_points(&atlas, 10_000, 3);
        let mut worst = f64::INFINITY;
        for s in &samples {
            let geom = PointGeometry::at(&atlas.charts[s.chart], &s.u).unwrap_or_else(|e| panic!("{name} at {:?}: {e}", s.u));
            worst = worst.min(sym_eigenvalues(&geom.curvature.rhat)[0]);
        }
        assert!(worst >= -1e-7, "{name}: R̂ min {worst}");
        if atlas.charts.iter().any(|c| !c.decks.is_empty()) {
            let d = atlas.deck_equivariance(2_000, 5).unwrap();
            assert!(d <= 1e-9, "{name}: deck defect {d}");
        }
    }
}

#[test]
fn pointwise_wideness_holds_away_from_rank_ambiguity() {
    for name in EXAMPLES {
        let atlas = gallery::build(name, &json!({})).unwrap();
        let samples = sample_points(&atlas, 2_000, 11);
        let (mut ok, mut total) = (0usize, 0usize);
        for s in &samples {
            let geom = PointGeometry::at(&atlas.charts[s.chart], &s.u).unwrap();
            let frame = weinstein_frame(&geom.forms).unwrap();
            match classify_point(&frame, &geom.forms, RANK_TOL) {
                Ok(c) => {
                    total += 1;
                    // The sphere is the one example whose points are all umbilic with B = 0.
                    if c.locally_wide_ok || (name == "round-s3" && c.u0_like) {
                        ok += 1;
                    }
                }
                Err(GeomError::AmbiguousRank { .. }) => {}
                Err(e) => panic!("{name}: classification raised {e}"),
            }
        }
        assert!(ok as f64 >= 0.999 * total as f64, "{name}: {ok} of {total} locally wide");
    }
}

#[test]
fn band_variants_share_pointwise_statistics() {
    let hist = |name: &str| {
        let atlas = gallery::build(name, &json!({})).unwrap();
        strata_histogram(&pointwise_records(&atlas, &sample_points(&atlas, 4_000, 2), RANK_TOL))
    };
    assert_eq!(hist("moebius"), hist("moebius-cyl"));
}

#[test]
fn profile_curvature_is_flat_to_infinite_order_at_the_boundary() {
    let p = Profile::new(&ProfileSpec::default()).unwrap();
    // Log-spaced samples toward the boundary while the curvature is representable.
    let mut pts = Vec::new();
    let mut s = p.blend() / 2.0;
    while p.gauss_curvature(s) > 1e-250 {
        pts.push((s.ln(), p.gauss_curvature(s).ln()));
        s /= 10f64.powf(0.25);
    }
    assert!(pts.len() >= 9, "only {} usable samples", pts.len());
    let slope = |w: &[(f64, f64)]| {
        let n = w.len() as f64;
        let (mx, my) = (w.iter().map(|p| p.0).sum::<f64>() / n, w.iter().map(|p| p.1).sum::<f64>() / n);
        w.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>() / w.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>()
    };
    let last = slope(&pts[pts.len() - 5..]);
    assert!(last > 8.0, "log-log slope {last} over the last decade");
    // Faster than any power: the slope keeps growing decade by decade.
    let earlier = slope(&pts[pts.len() - 9..pts.len() - 4]);
    assert!(last > earlier, "{last} vs {earlier}");
}

/// Classical RK4 along the unit nullity field, independent of the library tracer.
fn follow(chart: &codim2_core::immersion::Chart, u0: &[f64], length: f64, steps: usize) -> Vec<f64> {
    let mut u = DVector::from_column_slice(u0);
    let mut r = nullity_direction(chart, u0, None, RANK_TOL).unwrap();
    let h = length / steps as f64;
    for _ in 0..steps {
        let f = |x: &DVector<f64>, r: &DVector<f64>| nullity_direction(chart, x.as_slice(), Some(r), RANK_TOL).unwrap();
        let k1 = f(&u, &r);
        let k2 = f(&(&u + &k1 * (h / 2.0)), &k1);
        let k3 = f(&(&u + &k2 * (h / 2.0)), &k1);
        let k4 = f(&(&u + &k3 * h), &k1);
        u += (&k1 + &k2 * 2.0 + &k3 * 2.0 + &k4) * (h / 6.0);
        r = k1;
    }
    u.as_slice().to_vec()
}

#[test]
fn leaf_curvature_does_not_depend_on_the_starting_point() {
    let atlas = gallery::build("cylinder-quotient", &json!({})).unwrap();
    let slice = &atlas.leaf_slices[0];
    let chart = &atlas.charts[slice.chart];
    for u0 in [[0.3, 0.2, 0.0], [-0.5, 0.7, 0.0], [0.9, -0.1, 0.0]] {
        let a = leaf_total_curvature(chart, &u0, slice.period, RANK_TOL).unwrap();
        let u1 = follow(chart, &u0, 0.37 * slice.period, 400);
        let b = leaf_total_curvature(chart, &u1, slice.period, RANK_TOL).unwrap();
        assert!((a.kappa - b.kappa).abs() <= 1e-6, "{} vs {}", a.kappa, b.kappa);
    }
}
