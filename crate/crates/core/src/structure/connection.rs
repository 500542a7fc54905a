//! Normal connection form of the Weinstein frame and the composition criterion.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::immersion::classify::{ordered_frame, OrderedFrame};
use crate::immersion::residuals::ProjectedGauge;
use crate::immersion::{classify_point, fundamental_forms, weinstein_frame, Chart, Stratum};

/// Coordinate step for differencing the frame rotation angle.
pub const H_W: f64 = 1e-3;

/// Weinstein frame at `u`, refusing points where it is not forced.
fn unique_frame(chart: &Chart, u: &[f64], rank_tol: f64) -> Result<OrderedFrame> {
    let forms = fundamental_forms(chart, u)?;
    let fr = weinstein_frame(&forms)?;
    if !fr.unique || fr.totally_geodesic {
        return Err(GeomError::FrameNotSmooth);
    }
    ordered_frame(&fr, &forms, rank_tol)
}

/// Angle of the Weinstein ξ at `u` measured in the projected gauge of (ξ₀, η₀).
fn rotation_angle(chart: &Chart, u: &[f64], xi0: &DVector<f64>, eta0: &DVector<f64>, rank_tol: f64) -> Result<f64> {
    let forms = fundamental_forms(chart, u)?;
    let fr = weinstein_frame(&forms)?;
    if !fr.unique || fr.totally_geodesic {
        return Err(GeomError::FrameNotSmooth);
    }
    let _ = rank_tol;
    let proj = |v: &DVector<f64>| -> DVector<f64> {
        let nrm = &forms.normal;
        nrm * (nrm.transpose() * v)
    };
    let xp = proj(xi0).normalize();
    let mut ep = proj(eta0);
    ep -= &xp * xp.dot(&ep);
    let ep = ep.normalize();
    // The frame is unique only up to exchanging ξ and η.
    let cand = if fr.xi.dot(xi0) >= fr.eta.dot(xi0) { fr.xi.clone() } else { fr.eta.clone() };
    let cand = if cand.dot(&xp) >= 0.0 { cand } else { -cand };
    Ok(cand.dot(&ep).atan2(cand.dot(&xp)))
}

/// w(∂ᵢ) = ⟨∇⊥_{∂ᵢ} ξ, η⟩ of the Weinstein frame, together with the frame.
pub fn connection_form_coords(chart: &Chart, u: &[f64], rank_tol: f64) -> Result<(Vec<f64>, OrderedFrame)> {
    let ord = unique_frame(chart, u, rank_tol)?;
    let (xi0, eta0) = (ord.frame.xi.clone(), ord.frame.eta.clone());
    let gauge = ProjectedGauge::new(chart, u, &xi0, &eta0)?;
    let wp = gauge.w_values();
    let n = chart.n;
    let mut w = Vec::with_capacity(n);
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        let diff = |h: f64| -> Result<f64> {
            let up: Vec<f64> = u.iter().zip(&e).map(|(a, b)| a + h * b).collect();
            let um: Vec<f64> = u.iter().zip(&e).map(|(a, b)| a - h * b).collect();
            Ok((rotation_angle(chart, &up, &xi0, &eta0, rank_tol)? - rotation_angle(chart, &um, &xi0, &eta0, rank_tol)?) / (2.0 * h))
        };
        let d1 = diff(H_W)?;
        let d2 = diff(0.5 * H_W)?;
        w.push(wp[i] + (4.0 * d2 - d1) / 3.0);
    }
    Ok((w, ord))
}

/// w(X) for a tangent vector X in chart coordinates.
pub fn connection_form(chart: &Chart, u: &[f64], x: &DVector<f64>, rank_tol: f64) -> Result<f64> {
    let (w, _) = connection_form_coords(chart, u, rank_tol)?;
    Ok(w.iter().zip(x.iter()).map(|(a, b)| a * b).sum())
}

/// Per-point evidence for ker B ⊂ ker w.
#[derive(Clone, Debug, Serialize)]
pub struct CompositionSample {
    pub point: Vec<f64>,
    /// max |w(X)| over an orthonormal basis of ker B.
    pub w_on_ker_b: f64,
    pub ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct CompositionReport {
    pub ok: bool,
    pub worst: f64,
    pub samples: Vec<CompositionSample>,
}

/// Tolerance for w on ker B.
pub const COMPOSITION_TOL: f64 = 1e-6;

/// |w| on ker B at a U₁ point (in the ordered Weinstein frame).
pub fn w_on_ker_b(chart: &Chart, u: &[f64], rank_tol: f64) -> Result<f64> {
    let forms = fundamental_forms(chart, u)?;
    let fr = weinstein_frame(&forms)?;
    let class = classify_point(&fr, &forms, rank_tol)?;
    if class.stratum != Stratum::U(1) {
        return Err(GeomError::NotApplicable(format!("point is in {:?}, not U1", class.stratum)));
    }
    let (w, ord) = connection_form_coords(chart, u, rank_tol)?;
    let w = DVector::from_vec(w);
    let mut worst = 0.0f64;
    for c in 0..ord.kernel_b.ncols() {
        let x = forms.frame_to_coords(&ord.kernel_b.column(c).into_owned());
        worst = worst.max(w.dot(&x).abs());
    }
    Ok(worst)
}

/// True iff w vanishes on ker B at every sample, all of which must lie in U₁.
pub fn composition_criterion(chart: &Chart, points: &[Vec<f64>], rank_tol: f64) -> Result<CompositionReport> {
    let mut samples = Vec::with_capacity(points.len());
    let mut worst = 0.0f64;
    for u in points {
        let v = w_on_ker_b(chart, u, rank_tol)?;
        worst = worst.max(v);
        samples.push(CompositionSample { point: u.clone(), w_on_ker_b: v, ok: v <= COMPOSITION_TOL });
    }
    Ok(CompositionReport { ok: samples.iter().all(|s| s.ok), worst, samples })
}
