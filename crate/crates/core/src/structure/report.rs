//! Per-point structure rows.

use nalgebra::DVector;
use serde::Serialize;

use crate::error::Result;
use crate::immersion::{classify_point, weinstein_frame, Chart, PointGeometry, Stratum};
use crate::structure::connection::{connection_form_coords, w_on_ker_b, COMPOSITION_TOL};
use crate::structure::leaf::leaf_total_curvature;
use crate::structure::nullity::{nullity_data, nullity_direction_at};
use crate::structure::splitting::{riccati_residual, splitting_data};

#[derive(Clone, Debug, Serialize)]
pub struct StructureReport {
    pub point: Vec<f64>,
    pub stratum: Stratum,
    pub mu: usize,
    pub nu: usize,
    #[serde(rename = "C_norm")]
    pub c_norm: Option<f64>,
    pub riccati_residual: Option<f64>,
    pub w_values: Option<Vec<f64>>,
    #[serde(rename = "wT")]
    pub w_t: Option<f64>,
    pub composition_ok: Option<bool>,
    pub w_on_ker_b: Option<f64>,
    pub leaf_kappa: Option<f64>,
    /// Reasons for operations that declined to run at this point.
    pub refusals: Vec<String>,
}

/// Options controlling the more expensive parts of a structure row.
#[derive(Clone, Debug)]
pub struct ReportOptions {
    pub rank_tol: f64,
    /// Leaf segment length for the Riccati check; skipped when `None`.
    pub riccati_length: Option<f64>,
    /// Closed-leaf period for κ_g; skipped when `None`.
    pub leaf_period: Option<f64>,
}

impl Default for ReportOptions {
    fn default() -> Self {
        ReportOptions { rank_tol: 1e-7, riccati_length: None, leaf_period: None }
    }
}

pub fn structure_report(chart: &Chart, u: &[f64], opts: &ReportOptions) -> Result<StructureReport> {
    let geom = PointGeometry::at(chart, u)?;
    let frame = weinstein_frame(&geom.forms)?;
    let class = classify_point(&frame, &geom.forms, opts.rank_tol)?;
    let nd = nullity_data(&geom, opts.rank_tol)?;
    let mut refusals = Vec::new();
    let mut note = |e: crate::error::GeomError| refusals.push(e.to_string());

    let t = match nullity_direction_at(&geom, None, opts.rank_tol) {
        Ok(t) => Some(t),
        Err(e) => {
            note(e);
            None
        }
    };
    let c_norm = if t.is_some() {
        match splitting_data(chart, u, t.as_ref(), opts.rank_tol) {
            Ok(sd) => Some(sd.norm()),
            Err(e) => {
                note(e);
                None
            }
        }
    } else {
        None
    };
    let riccati = match (t.as_ref(), opts.riccati_length) {
        (Some(_), Some(len)) => match riccati_residual(chart, u, len, 9, opts.rank_tol) {
            Ok(r) => Some(r.residual),
            Err(e) => {
                note(e);
                None
            }
        },
        _ => None,
    };
    let (w_values, w_t) = match connection_form_coords(chart, u, opts.rank_tol) {
        Ok((w, _)) => {
            let wt = t.as_ref().map(|t| DVector::from_vec(w.clone()).dot(t).abs());
            (Some(w), wt)
        }
        Err(e) => {
            note(e);
            (None, None)
        }
    };
    let w_kb = if class.stratum == Stratum::U(1) {
        match w_on_ker_b(chart, u, opts.rank_tol) {
            Ok(v) => Some(v),
            Err(e) => {
                note(e);
                None
            }
        }
    } else {
        None
    };
    let leaf_kappa = match (t.as_ref(), opts.leaf_period) {
        (Some(_), Some(p)) => match leaf_total_curvature(chart, u, p, opts.rank_tol) {
            Ok(l) => Some(l.kappa),
            Err(e) => {
                note(e);
                None
            }
        },
        _ => None,
    };
    Ok(StructureReport {
        point: u.to_vec(),
        stratum: class.stratum,
        mu: nd.mu,
        nu: nd.nu,
        c_norm,
        riccati_residual: riccati,
        w_values,
        w_t,
        composition_ok: w_kb.map(|v| v <= COMPOSITION_TOL),
        w_on_ker_b: w_kb,
        leaf_kappa,
        refusals,
    })
}
