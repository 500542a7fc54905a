//! τ_k as an integral over the unit normal bundle:
//! τ_k = (1/vol Sⁿ⁺¹) ∫_M ∫_{ind A_β = k} |det A_β| dθ dV.

use std::f64::consts::FRAC_PI_2;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::Result;
use crate::immersion::{fundamental_forms, weinstein_frame, Atlas, Chart, FundamentalForms};
use crate::linalg::{gauss_legendre_on, sphere_volume, sym_eigenvalues, CompensatedSum};

#[derive(Clone, Debug, Serialize)]
pub struct QuadratureOptions {
    /// Spatial nodes per chart, split evenly over the axes.
    pub budget: usize,
    /// Gauss–Legendre nodes per constant-index piece of each θ-quadrant.
    pub theta_nodes: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions { budget: 128 * 64, theta_nodes: 16 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct QuadratureEstimate {
    pub tau: Vec<f64>,
    /// |fine − coarse| per k, plus a floor for roundoff.
    pub error: Vec<f64>,
    /// Contribution of each θ-quadrant of the edge-aligned frame to Σ_k τ_k.
    pub quadrants: [f64; 4],
    pub nodes: usize,
}

/// Eigenvalue-based index sampling points per quadrant.
const INDEX_PROBES: usize = 32;

fn index_and_det(forms: &FundamentalForms, theta: f64) -> (usize, f64) {
    let ev = sym_eigenvalues(&forms.shape_at_angle(theta));
    (ev.iter().filter(|&&x| x < 0.0).count(), ev.iter().product::<f64>().abs())
}

/// Per-k fiber integral ∫ |det A_β| 1[ind = k] dθ at one point, by quadrant of the
/// edge-aligned frame (or the chart normal basis where no frame exists).
/// Quadrants are cut further where the index changes, so every piece is smooth.
pub fn pointwise_density(forms: &FundamentalForms, theta_nodes: usize) -> (Vec<f64>, [f64; 4]) {
    let n = forms.n();
    let base = match weinstein_frame(forms) {
        Ok(fr) if !fr.totally_geodesic => fr.edges.0,
        _ => 0.0,
    };
    let mut out = vec![0.0; n + 1];
    let mut quad = [0.0; 4];
    for (q, qsum) in quad.iter_mut().enumerate() {
        let (a, b) = (base + q as f64 * FRAC_PI_2, base + (q + 1) as f64 * FRAC_PI_2);
        let mut cuts = vec![a];
        let probe = |k: usize| a + (b - a) * (k as f64 + 0.5) / INDEX_PROBES as f64;
        let mut prev_idx = index_and_det(forms, probe(0)).0;
        for k in 1..INDEX_PROBES {
            let idx = index_and_det(forms, probe(k)).0;
            if idx != prev_idx {
                let (mut lo, mut hi) = (probe(k - 1), probe(k));
                for _ in 0..60 {
                    let mid = 0.5 * (lo + hi);
                    if index_and_det(forms, mid).0 == prev_idx {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                cuts.push(0.5 * (lo + hi));
                prev_idx = idx;
            }
        }
        cuts.push(b);
        for w in cuts.windows(2) {
            let (xs, ws) = gauss_legendre_on(theta_nodes, w[0], w[1]);
            for (x, wt) in xs.iter().zip(&ws) {
                let (idx, det) = index_and_det(forms, *x);
                out[idx] += wt * det;
                *qsum += wt * det;
            }
        }
    }
    (out, quad)
}

fn chart_integral(chart: &Chart, m: usize, theta_nodes: usize) -> Result<(Vec<f64>, [f64; 4], usize)> {
    let nodes = chart.region.quadrature(m);
    let parts: Vec<Result<(Vec<f64>, [f64; 4])>> = nodes
        .par_iter()
        .map(|(u, w)| {
            let forms = fundamental_forms(chart, u)?;
            let vol = forms.metric.g.determinant().sqrt();
            let (dens, quad) = pointwise_density(&forms, theta_nodes);
            Ok((dens.iter().map(|d| d * vol * w).collect(), quad.map(|x| x * vol * w)))
        })
        .collect();
    let n1 = chart.n + 1;
    let mut sums = vec![CompensatedSum::default(); n1];
    let mut qs = [CompensatedSum::default(); 4];
    for p in parts {
        let (d, q) = p?;
        for k in 0..n1 {
            sums[k].add(d[k]);
        }
        for k in 0..4 {
            qs[k].add(q[k]);
        }
    }
    Ok((sums.iter().map(|s| s.value()).collect(), [0, 1, 2, 3].map(|k| qs[k].value()), nodes.len()))
}

fn integrate(atlas: &Atlas, coarse: bool, opts: &QuadratureOptions) -> Result<(Vec<f64>, [f64; 4], usize)> {
    let n1 = atlas.n + 1;
    let mut tau = vec![0.0; n1];
    let mut quad = [0.0; 4];
    let mut count = 0;
    for chart in atlas.charts.iter().filter(|c| c.tiles) {
        let fine = ((opts.budget as f64).powf(1.0 / chart.n as f64).ceil() as usize).max(3);
        let m = if coarse { ((fine as f64 * 0.75).ceil() as usize).min(fine - 1) } else { fine };
        let (t, q, c) = chart_integral(chart, m, opts.theta_nodes)?;
        for k in 0..n1 {
            tau[k] += t[k];
        }
        for k in 0..4 {
            quad[k] += q[k];
        }
        count += c;
    }
    let norm = sphere_volume(atlas.n + 1);
    Ok((tau.iter().map(|t| t / norm).collect(), quad.map(|q| q / norm), count))
}

/// Tensor-product quadrature over every tiling chart with an error estimate
/// from a coarser rule (3/4 of the nodes per axis).
pub fn tau_by_quadrature(atlas: &Atlas, opts: &QuadratureOptions) -> Result<QuadratureEstimate> {
    let (fine, quadrants, nodes) = crate::parallel::install(|| integrate(atlas, false, opts))?;
    let (coarse, _, _) = crate::parallel::install(|| integrate(atlas, true, opts))?;
    let error = fine.iter().zip(&coarse).map(|(f, c)| (f - c).abs() + 1e-10).collect();
    Ok(QuadratureEstimate { tau: fine, error, quadrants, nodes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery::round_sphere;

    #[test]
    fn round_sphere_fiber_integral_is_four_thirds() {
        // A_β = cos θ·I on the unit S³, so ∫_{cos θ > 0} cos³θ dθ = 4/3.
        let atlas = round_sphere(3, 1.0).unwrap();
        let forms = fundamental_forms(&atlas.charts[0], &[0.2, -0.1, 0.3]).unwrap();
        let (d, _) = pointwise_density(&forms, 16);
        assert!((d[0] - 4.0 / 3.0).abs() < 1e-12 && (d[3] - 4.0 / 3.0).abs() < 1e-12);
        assert!(d[1].abs() < 1e-14 && d[2].abs() < 1e-14);
    }
}
