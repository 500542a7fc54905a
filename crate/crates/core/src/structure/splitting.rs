//! Splitting tensor CX = −∇_X T of a unit nullity field and its Riccati equation.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::immersion::{Chart, PointGeometry};
use crate::jetcalc::MetricData;
use crate::linalg::null_space;
use crate::structure::nullity::nullity_direction_at;

/// Finite-difference step (arclength) for derivatives of the nullity field.
pub const H_C: f64 = 1e-4;

/// Nullity direction with the metric data needed to differentiate it.
struct Sample {
    t: DVector<f64>,
    metric: MetricData,
}

fn sample(chart: &Chart, u: &[f64], reference: Option<&DVector<f64>>, rank_tol: f64) -> Result<Sample> {
    let geom = PointGeometry::at(chart, u)?;
    let t = nullity_direction_at(&geom, reference, rank_tol)?;
    Ok(Sample { t, metric: geom.forms.metric })
}

fn shifted(u: &[f64], x: &DVector<f64>, h: f64) -> Vec<f64> {
    u.iter().zip(x.iter()).map(|(a, b)| a + h * b).collect()
}

/// Directional derivative of the coordinate components of T along X,
/// central differences with one Richardson step.
fn dt_along(chart: &Chart, u: &[f64], x: &DVector<f64>, t0: &DVector<f64>, rank_tol: f64) -> Result<DVector<f64>> {
    let xn = x.norm().max(f64::MIN_POSITIVE);
    let h = H_C / xn;
    let d = |h: f64| -> Result<DVector<f64>> {
        let p = sample(chart, &shifted(u, x, h), Some(t0), rank_tol)?.t;
        let m = sample(chart, &shifted(u, x, -h), Some(t0), rank_tol)?.t;
        Ok((p - m) / (2.0 * h))
    };
    let coarse = d(h)?;
    let fine = d(0.5 * h)?;
    Ok((fine * 4.0 - coarse) / 3.0)
}

/// ∇_X T = DT·X + Γ(X, T) in chart coordinates.
fn covariant_dt(metric: &MetricData, dt: &DVector<f64>, x: &DVector<f64>, t: &DVector<f64>) -> DVector<f64> {
    let n = metric.n;
    DVector::from_fn(n, |i, _| {
        let mut v = dt[i];
        for j in 0..n {
            for k in 0..n {
                v += metric.gamma[i][j][k] * x[j] * t[k];
            }
        }
        v
    })
}

fn project_perp(metric: &MetricData, v: &DVector<f64>, t: &DVector<f64>) -> DVector<f64> {
    let c = (t.transpose() * &metric.g * v)[(0, 0)];
    v - t * c
}

/// Orthonormal basis of T⊥ in chart coordinates.
pub fn perp_frame(metric: &MetricData, t: &DVector<f64>) -> DMatrix<f64> {
    // Work in orthonormal-frame coordinates, where T⊥ is a Euclidean complement.
    let e = &metric.frame;
    let tf = e.transpose() * &metric.g * t;
    let q = null_space(&DMatrix::from_row_slice(1, tf.len(), tf.as_slice()), 1e-12);
    e * q
}

/// The splitting tensor at a point.
#[derive(Clone, Debug)]
pub struct SplittingData {
    pub t: DVector<f64>,
    /// Orthonormal basis of T⊥ in chart coordinates.
    pub basis: DMatrix<f64>,
    /// Matrix of C in `basis`.
    pub c: DMatrix<f64>,
}

impl SplittingData {
    pub fn norm(&self) -> f64 {
        crate::linalg::spectral_norm(&self.c)
    }
}

/// CX for a single tangent vector X ⊥ T, in chart coordinates.
pub fn splitting_tensor(chart: &Chart, u: &[f64], x: &DVector<f64>, rank_tol: f64) -> Result<DVector<f64>> {
    let s = sample(chart, u, None, rank_tol)?;
    let dt = dt_along(chart, u, x, &s.t, rank_tol)?;
    let cov = covariant_dt(&s.metric, &dt, x, &s.t);
    Ok(-project_perp(&s.metric, &cov, &s.t))
}

/// Full matrix of C on T⊥. `reference` fixes the sign of T.
pub fn splitting_data(chart: &Chart, u: &[f64], reference: Option<&DVector<f64>>, rank_tol: f64) -> Result<SplittingData> {
    let s = sample(chart, u, reference, rank_tol)?;
    splitting_in_frame(chart, u, &s, None, rank_tol)
}

fn splitting_in_frame(chart: &Chart, u: &[f64], s: &Sample, basis: Option<&DMatrix<f64>>, rank_tol: f64) -> Result<SplittingData> {
    let basis = basis.cloned().unwrap_or_else(|| perp_frame(&s.metric, &s.t));
    let k = basis.ncols();
    let mut cx = Vec::with_capacity(k);
    for a in 0..k {
        let x = basis.column(a).into_owned();
        let dt = dt_along(chart, u, &x, &s.t, rank_tol)?;
        let cov = covariant_dt(&s.metric, &dt, &x, &s.t);
        cx.push(-project_perp(&s.metric, &cov, &s.t));
    }
    let g = &s.metric.g;
    let c = DMatrix::from_fn(k, k, |b, a| (basis.column(b).transpose() * g * &cx[a])[(0, 0)]);
    Ok(SplittingData { t: s.t.clone(), basis, c })
}

/// State along a nullity leaf: position and a parallel frame of T⊥.
#[derive(Clone, Debug)]
struct LeafState {
    u: DVector<f64>,
    frame: DMatrix<f64>,
}

fn leaf_rhs(chart: &Chart, st: &LeafState, reference: &DVector<f64>, rank_tol: f64) -> Result<(DVector<f64>, DMatrix<f64>, DVector<f64>)> {
    let s = sample(chart, st.u.as_slice(), Some(reference), rank_tol)?;
    let n = s.metric.n;
    let gam = &s.metric.gamma;
    let mut df = DMatrix::zeros(n, st.frame.ncols());
    for a in 0..st.frame.ncols() {
        for i in 0..n {
            let mut v = 0.0;
            for j in 0..n {
                for k in 0..n {
                    v -= gam[i][j][k] * s.t[j] * st.frame[(k, a)];
                }
            }
            df[(i, a)] = v;
        }
    }
    Ok((s.t.clone(), df, s.t))
}

/// One RK4 step of the leaf flow with parallel transport of the frame.
fn leaf_step(chart: &Chart, st: &LeafState, h: f64, reference: &mut DVector<f64>, rank_tol: f64) -> Result<LeafState> {
    let (k1u, k1f, t1) = leaf_rhs(chart, st, reference, rank_tol)?;
    *reference = t1;
    let s2 = LeafState { u: &st.u + &k1u * (0.5 * h), frame: &st.frame + &k1f * (0.5 * h) };
    let (k2u, k2f, _) = leaf_rhs(chart, &s2, reference, rank_tol)?;
    let s3 = LeafState { u: &st.u + &k2u * (0.5 * h), frame: &st.frame + &k2f * (0.5 * h) };
    let (k3u, k3f, _) = leaf_rhs(chart, &s3, reference, rank_tol)?;
    let s4 = LeafState { u: &st.u + &k3u * h, frame: &st.frame + &k3f * h };
    let (k4u, k4f, _) = leaf_rhs(chart, &s4, reference, rank_tol)?;
    Ok(LeafState { u: &st.u + (k1u + k2u * 2.0 + k3u * 2.0 + k4u) * (h / 6.0), frame: &st.frame + (k1f + k2f * 2.0 + k3f * 2.0 + k4f) * (h / 6.0) })
}

/// Riccati verification along a leaf segment.
#[derive(Clone, Debug, Serialize)]
pub struct RiccatiReport {
    /// max ‖C′ − C²‖ over interior samples.
    pub residual: f64,
    /// max ‖C(t) − C₀(I − (t−t₀)C₀)⁻¹‖.
    pub closed_form_defect: f64,
    pub c_norm_max: f64,
    pub samples: usize,
}

/// Follows the nullity leaf from `u` for arclength `length`, expressing C in
/// a parallel frame, and checks C′ = C² and its explicit solution.
pub fn riccati_residual(chart: &Chart, u: &[f64], length: f64, samples: usize, rank_tol: f64) -> Result<RiccatiReport> {
    if samples < 5 {
        return Err(GeomError::InvalidInput("riccati_residual needs at least 5 samples".into()));
    }
    let s0 = sample(chart, u, None, rank_tol)?;
    let mut reference = s0.t.clone();
    let mut st = LeafState { u: DVector::from_column_slice(u), frame: perp_frame(&s0.metric, &s0.t) };
    let dt = length / (samples - 1) as f64;
    let substeps = 4;
    let mut cs: Vec<DMatrix<f64>> = Vec::with_capacity(samples);
    for j in 0..samples {
        if j > 0 {
            for _ in 0..substeps {
                st = leaf_step(chart, &st, dt / substeps as f64, &mut reference, rank_tol)?;
            }
        }
        let s = sample(chart, st.u.as_slice(), Some(&reference), rank_tol)?;
        reference = s.t.clone();
        let data = splitting_in_frame(chart, st.u.as_slice(), &s, Some(&st.frame), rank_tol)?;
        cs.push(data.c);
    }
    let k = cs[0].nrows();
    let c0 = cs[0].clone();
    let ident = DMatrix::<f64>::identity(k, k);
    let mut residual = 0.0f64;
    let mut closed = 0.0f64;
    let mut cmax = 0.0f64;
    for (j, c) in cs.iter().enumerate() {
        cmax = cmax.max(crate::linalg::spectral_norm(c));
        let t = j as f64 * dt;
        if let Some(inv) = (&ident - &c0 * t).try_inverse() {
            closed = closed.max((c - &c0 * inv).amax());
        }
        if j >= 2 && j + 2 < cs.len() {
            let d = (&cs[j - 2] - &cs[j - 1] * 8.0 + &cs[j + 1] * 8.0 - &cs[j + 2]) / (12.0 * dt);
            residual = residual.max((d - c * c).amax());
        }
    }
    Ok(RiccatiReport { residual, closed_form_defect: closed, c_norm_max: cmax, samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gallery::cone::synthetic_cone;

    #[test]
    fn cone_splitting_tensor_is_minus_inverse_radius() {
        let atlas = synthetic_cone(0.5).unwrap();
        let ch = &atlas.charts[0];
        let u = [1.3, 0.4, 0.7];
        let sd = splitting_data(ch, &u, None, 1e-7).unwrap();
        let t = u[0];
        let mut ev = crate::linalg::sym_eigenvalues(&sd.c);
        ev.sort_by(f64::total_cmp);
        for v in ev {
            assert!((v + 1.0 / t).abs() < 1e-6, "eigenvalue {v}");
        }
    }
}
