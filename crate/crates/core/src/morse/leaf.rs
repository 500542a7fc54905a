//! τ_k = (1/8π²) ∫ K(T⊥) κ_g over the leaf space, for three-dimensional
//! immersions foliated by closed nullity leaves.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::immersion::{Atlas, LeafSlice, PointGeometry};
use crate::linalg::{lambda_max, lambda_min, null_space, CompensatedSum};
use crate::structure::{leaf_total_curvature, nullity_direction_at};

#[derive(Clone, Debug, Serialize)]
pub struct LeafOptions {
    /// Quadrature nodes per axis on each slice.
    pub nodes: usize,
    pub rank_tol: f64,
}

impl Default for LeafOptions {
    fn default() -> Self {
        LeafOptions { nodes: 12, rank_tol: 1e-13 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct LeafEstimate {
    /// The common value of every τ_k.
    pub tau: f64,
    pub error: f64,
    /// ∫ K over each component's leaf space.
    pub curvature_integrals: BTreeMap<String, f64>,
    /// Smallest and largest leaf total curvature met.
    pub kappa_range: (f64, f64),
    pub nodes: usize,
}

/// Below this curvature a node contributes nothing and its leaf is not traced.
/// It sits above the rank-ambiguity band of the default `rank_tol`.
const K_FLOOR: f64 = 1e-10;

struct NodeValue {
    k_area: f64,
    k_kappa_area: f64,
    kappa: Option<f64>,
}

fn node(atlas: &Atlas, slice: &LeafSlice, v: &[f64], w: f64, opts: &LeafOptions) -> Result<NodeValue> {
    let chart = &atlas.charts[slice.chart];
    let mut u = Vec::with_capacity(chart.n);
    u.extend_from_slice(&v[..slice.axis]);
    u.push(slice.value);
    u.extend_from_slice(&v[slice.axis..]);
    let geom = PointGeometry::at(chart, &u)?;
    let metric = &geom.forms.metric;
    let n = chart.n;
    let keep: Vec<usize> = (0..n).filter(|&i| i != slice.axis).collect();
    let gs = DMatrix::from_fn(n - 1, n - 1, |i, j| metric.g[(keep[i], keep[j])]);
    let area = gs.determinant().sqrt();
    if lambda_max(&geom.curvature.rhat).abs().max(lambda_min(&geom.curvature.rhat).abs()) < K_FLOOR {
        return Ok(NodeValue { k_area: 0.0, k_kappa_area: 0.0, kappa: None });
    }
    let t = nullity_direction_at(&geom, None, opts.rank_tol)?;
    let tf: DVector<f64> = geom.forms.coords_to_frame(&t);
    let perp = null_space(&DMatrix::from_row_slice(1, n, tf.as_slice()), 1e-12);
    let x: Vec<f64> = perp.column(0).iter().copied().collect();
    let y: Vec<f64> = perp.column(1).iter().copied().collect();
    let k = geom.curvature.sectional(&x, &y);
    // Leaf-space measure: slice area times the normal component of T.
    let transverse = t[slice.axis].abs() / metric.g_inv[(slice.axis, slice.axis)].sqrt();
    let dm = w * area * transverse;
    let lc = leaf_total_curvature(chart, &u, slice.period, opts.rank_tol)?;
    Ok(NodeValue { k_area: k * dm, k_kappa_area: k * lc.kappa * dm, kappa: Some(lc.kappa) })
}

fn evaluate(atlas: &Atlas, m: usize, opts: &LeafOptions) -> Result<(f64, BTreeMap<String, f64>, (f64, f64), usize)> {
    let mut total = CompensatedSum::default();
    let mut per: BTreeMap<String, f64> = BTreeMap::new();
    let mut kr = (f64::INFINITY, f64::NEG_INFINITY);
    let mut count = 0;
    for slice in &atlas.leaf_slices {
        let rule = slice.region.quadrature(m);
        count += rule.len();
        let vals: Vec<Result<NodeValue>> = rule.par_iter().map(|(v, w)| node(atlas, slice, v, *w, opts)).collect();
        let mut kint = 0.0;
        for nv in vals {
            let nv = nv?;
            total.add(nv.k_kappa_area);
            kint += nv.k_area;
            if let Some(kg) = nv.kappa {
                kr = (kr.0.min(kg), kr.1.max(kg));
            }
        }
        *per.entry(slice.component.clone()).or_default() += kint;
    }
    Ok((total.value() / (8.0 * PI * PI), per, kr, count))
}

pub fn tau_by_leaf_formula(atlas: &Atlas, opts: &LeafOptions) -> Result<LeafEstimate> {
    if atlas.n != 3 || atlas.leaf_slices.is_empty() {
        return Err(GeomError::NotApplicable(format!("leaf formula needs n = 3 and leaf slices; `{}` has none", atlas.name)));
    }
    let (tau, per, kr, nodes) = crate::parallel::install(|| evaluate(atlas, opts.nodes, opts))?;
    if opts.nodes < 3 {
        return Err(GeomError::InvalidInput("leaf formula needs at least 3 nodes per axis".into()));
    }
    let coarse_m = (opts.nodes * 3).div_ceil(4).min(opts.nodes - 1);
    let (coarse, _, _, _) = crate::parallel::install(|| evaluate(atlas, coarse_m, opts))?;
    Ok(LeafEstimate { tau, error: (tau - coarse).abs() + 1e-10, curvature_integrals: per, kappa_range: kr, nodes })
}
