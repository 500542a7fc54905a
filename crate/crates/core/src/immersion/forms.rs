//! First and second fundamental forms of a chart at a point.

use nalgebra::{DMatrix, DVector};

use crate::error::{GeomError, Result};
use crate::immersion::Chart;
use crate::jetcalc::{CurvatureData, Derivs, MetricData};
use crate::linalg::{null_space, singular_values};

/// Relative singular-value floor of the differential.
pub const IMMERSION_TOL: f64 = 1e-8;

/// Metric, orthonormal tangent and normal frames, and the second fundamental
/// form α expressed in those frames.
#[derive(Clone, Debug)]
pub struct FundamentalForms {
    pub u: Vec<f64>,
    pub point: Vec<f64>,
    pub metric: MetricData,
    /// Columns eₐ = Σᵢ ∂ᵢf Eᵢₐ, orthonormal in the ambient space.
    pub tangent: DMatrix<f64>,
    /// Two orthonormal columns spanning the normal plane.
    pub normal: DMatrix<f64>,
    /// `alpha[k][(a,b)] = ⟨α(eₐ,e_b), ν_k⟩`.
    pub alpha: [DMatrix<f64>; 2],
}

impl FundamentalForms {
    pub fn n(&self) -> usize {
        self.metric.n
    }

    pub fn from_derivs(d: &Derivs, metric: MetricData, u: &[f64]) -> Result<Self> {
        let n = d.n;
        let m = d.m;
        if m != n + 2 {
            return Err(GeomError::InvalidInput(format!("codimension {} is not two", m as i64 - n as i64)));
        }
        let jac = d.jacobian();
        let e = &metric.frame;
        let tangent = &jac * e;
        let normal = null_space(&tangent.transpose(), 1e-9);
        if normal.ncols() != 2 {
            return Err(GeomError::RankDeficient { n });
        }
        let alpha = [0, 1].map(|k| {
            let nu = normal.column(k);
            let coord = DMatrix::from_fn(n, n, |i, j| (0..m).map(|c| d.d2[i][j][c] * nu[c]).sum::<f64>());
            let mut a = e.transpose() * coord * e;
            a = (&a + a.transpose()) * 0.5;
            a
        });
        Ok(FundamentalForms { u: u.to_vec(), point: d.f.clone(), metric, tangent, normal, alpha })
    }

    /// Shape operator in the unit normal direction `w` (ambient vector).
    pub fn shape_along(&self, w: &DVector<f64>) -> DMatrix<f64> {
        let c0 = self.normal.column(0).dot(w);
        let c1 = self.normal.column(1).dot(w);
        &self.alpha[0] * c0 + &self.alpha[1] * c1
    }

    /// Shape operator of u(φ) = cosφ ν₀ + sinφ ν₁.
    pub fn shape_at_angle(&self, phi: f64) -> DMatrix<f64> {
        let (s, c) = phi.sin_cos();
        &self.alpha[0] * c + &self.alpha[1] * s
    }

    pub fn normal_at_angle(&self, phi: f64) -> DVector<f64> {
        let (s, c) = phi.sin_cos();
        self.normal.column(0) * c + self.normal.column(1) * s
    }

    /// |α|² = Σ ‖α(eₐ,e_b)‖².
    pub fn alpha_norm2(&self) -> f64 {
        self.alpha[0].norm_squared() + self.alpha[1].norm_squared()
    }

    /// Coordinates of an orthonormal-frame vector in chart coordinates.
    pub fn frame_to_coords(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.metric.frame * x
    }

    /// Orthonormal-frame components of a chart-coordinate vector.
    pub fn coords_to_frame(&self, v: &DVector<f64>) -> DVector<f64> {
        // E⁻¹ = Lᵀ, and Lᵀ = Eᵀ g.
        self.metric.frame.transpose() * &self.metric.g * v
    }
}

fn check_rank(d: &Derivs) -> Result<()> {
    let s = singular_values(&d.jacobian());
    let smax = s.first().copied().unwrap_or(0.0);
    let smin = s.last().copied().unwrap_or(0.0);
    if s.len() < d.n || !(smin > IMMERSION_TOL * smax) {
        return Err(GeomError::RankDeficient { n: d.n });
    }
    Ok(())
}

/// Metric and second fundamental form at `u` from second-order jets.
pub fn fundamental_forms(chart: &Chart, u: &[f64]) -> Result<FundamentalForms> {
    let d = Derivs::from_jets(&chart.eval(u, 2)?);
    check_rank(&d)?;
    let metric = MetricData::from_derivs(&d)?;
    FundamentalForms::from_derivs(&d, metric, u)
}

/// Extrinsic and intrinsic data at one point from a single third-order jet.
#[derive(Clone, Debug)]
pub struct PointGeometry {
    pub chart: usize,
    pub forms: FundamentalForms,
    pub curvature: CurvatureData,
    pub derivs: Derivs,
}

impl PointGeometry {
    pub fn at(chart: &Chart, u: &[f64]) -> Result<Self> {
        Self::at_indexed(chart, 0, u)
    }

    pub fn at_indexed(chart: &Chart, index: usize, u: &[f64]) -> Result<Self> {
        let d = Derivs::from_jets(&chart.eval(u, 3)?);
        check_rank(&d)?;
        let curvature = CurvatureData::from_derivs(&d)?;
        let forms = FundamentalForms::from_derivs(&d, curvature.metric.clone(), u)?;
        Ok(PointGeometry { chart: index, forms, curvature, derivs: d })
    }

    pub fn n(&self) -> usize {
        self.forms.n()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::immersion::{Factor, Region};
    use crate::jetcalc::Jet;

    fn sphere_in_r5(r: f64) -> Chart {
        Chart::new("s3", 3, 5, vec![(-2.0, 2.0); 3], Region::new(vec![Factor::ball(3, 1.0, true)]), move |x: &[Jet]| {
            let q = &(&(&x[0] * &x[0]) + &(&x[1] * &x[1])) + &(&x[2] * &x[2]);
            let den = (&q + 1.0).recip();
            let mut out: Vec<Jet> = x.iter().map(|xi| (xi * &den).scale(2.0 * r)).collect();
            out.push((&(1.0 - &q) * &den).scale(r));
            out.push(x[0].lift(0.0));
            out
        })
    }

    #[test]
    fn affine_chart_has_no_second_form() {
        let ch = Chart::new("plane", 2, 4, vec![(-1.0, 1.0); 2], Region::new(vec![Factor::interval(-1.0, 1.0), Factor::interval(-1.0, 1.0)]), |x: &[Jet]| {
            vec![&x[0] * 2.0 + &x[1], x[1].clone(), x[0].lift(3.0), &x[0] - &x[1]]
        });
        let ff = fundamental_forms(&ch, &[0.3, -0.2]).unwrap();
        assert!(ff.alpha_norm2() < 1e-28);
    }

    #[test]
    fn sphere_second_form_is_umbilic() {
        let r = 1.7;
        let ch = sphere_in_r5(r);
        let ff = fundamental_forms(&ch, &[0.2, -0.4, 0.1]).unwrap();
        // One normal direction carries I/R, the other nothing.
        let p = DVector::from_vec(ff.point.clone());
        let inward = -&p / r;
        let a = ff.shape_along(&inward);
        assert!((a - DMatrix::identity(3, 3) / r).norm() < 1e-12);
        let e5 = DVector::from_vec(vec![0.0, 0.0, 0.0, 0.0, 1.0]);
        assert!(ff.shape_along(&e5).norm() < 1e-12);
    }

    #[test]
    fn rank_deficient_map_is_rejected() {
        let ch = Chart::new("fold", 2, 4, vec![(-1.0, 1.0); 2], Region::new(vec![Factor::interval(-1.0, 1.0), Factor::interval(-1.0, 1.0)]), |x: &[Jet]| {
            vec![x[0].clone(), x[0].clone(), x[0].lift(0.0), x[0].lift(1.0)]
        });
        assert!(matches!(fundamental_forms(&ch, &[0.0, 0.0]), Err(GeomError::RankDeficient { .. })));
    }
}
