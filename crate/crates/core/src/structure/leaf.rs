//! Total curvature of closed nullity leaves.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::immersion::{Chart, PointGeometry};
use crate::structure::nullity::nullity_direction_at;

/// Relative change between step doublings at which κ_g is accepted.
pub const LEAF_REL_TOL: f64 = 1e-8;
/// Ambient closure tolerance relative to the leaf length.
pub const CLOSURE_TOL: f64 = 1e-6;

#[derive(Clone, Debug, Serialize)]
pub struct LeafCurvature {
    pub kappa: f64,
    pub length: f64,
    /// Ambient distance between the start and end points.
    pub gap: f64,
    pub steps: usize,
}

/// T and ‖α(T,T)‖ at `u`. Nullity leaves are totally geodesic, so the
/// ambient curvature of the leaf equals ‖α(T,T)‖.
fn field(chart: &Chart, u: &DVector<f64>, reference: &DVector<f64>, rank_tol: f64) -> Result<(DVector<f64>, f64)> {
    let geom = PointGeometry::at(chart, u.as_slice())?;
    let t = nullity_direction_at(&geom, Some(reference), rank_tol)?;
    let x = geom.forms.coords_to_frame(&t);
    let a0 = (x.transpose() * &geom.forms.alpha[0] * &x)[(0, 0)];
    let a1 = (x.transpose() * &geom.forms.alpha[1] * &x)[(0, 0)];
    Ok((t, a0.hypot(a1)))
}

fn trace(chart: &Chart, u0: &[f64], length: f64, steps: usize, rank_tol: f64) -> Result<(f64, DVector<f64>)> {
    let mut u = DVector::from_column_slice(u0);
    let geom = PointGeometry::at(chart, u0)?;
    let mut reference = nullity_direction_at(&geom, None, rank_tol)?;
    let h = length / steps as f64;
    let mut kappa = 0.0;
    for _ in 0..steps {
        let (k1, c1) = field(chart, &u, &reference, rank_tol)?;
        let (k2, c2) = field(chart, &(&u + &k1 * (0.5 * h)), &k1, rank_tol)?;
        let (k3, c3) = field(chart, &(&u + &k2 * (0.5 * h)), &k1, rank_tol)?;
        let (k4, c4) = field(chart, &(&u + &k3 * h), &k1, rank_tol)?;
        u += (&k1 + &k2 * 2.0 + &k3 * 2.0 + &k4) * (h / 6.0);
        kappa += (c1 + 2.0 * c2 + 2.0 * c3 + c4) * (h / 6.0);
        reference = k1;
    }
    Ok((kappa, u))
}

/// κ_g = ∫ ‖γ̃″‖ over the leaf through `u0`, which must return to its start
/// in the ambient space after arclength `period` (possibly through a deck map).
pub fn leaf_total_curvature(chart: &Chart, u0: &[f64], period: f64, rank_tol: f64) -> Result<LeafCurvature> {
    let start = chart.point(u0)?;
    let mut steps = 32usize;
    let (mut prev, _) = trace(chart, u0, period, steps, rank_tol)?;
    loop {
        steps *= 2;
        let (kappa, end) = trace(chart, u0, period, steps, rank_tol)?;
        let settled = (kappa - prev).abs() <= LEAF_REL_TOL * kappa.abs().max(1e-300);
        if settled || steps >= 8192 {
            let p = chart.point(end.as_slice())?;
            let gap = p.iter().zip(&start).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
            if gap > CLOSURE_TOL * period.max(1.0) {
                return Err(GeomError::LeafNotClosed { gap });
            }
            return Ok(LeafCurvature { kappa, length: period, gap, steps });
        }
        prev = kappa;
    }
}
