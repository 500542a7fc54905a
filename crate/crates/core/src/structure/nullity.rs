//! Nullity of the curvature tensor and relative nullity of the second
//! fundamental form.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::immersion::classify::{guarded_rank, ordered_frame};
use crate::immersion::{weinstein_frame, Chart, PointGeometry};
use crate::jetcalc::curvature::two_form_pairs;
use crate::jetcalc::CurvatureData;
use crate::linalg::{containment_defect, null_space, singular_values};

/// Γ(p) and Δ(p), both as orthonormal columns in orthonormal-frame coordinates.
#[derive(Clone, Debug)]
pub struct NullityData {
    pub gamma_basis: DMatrix<f64>,
    pub mu: usize,
    pub delta_basis: DMatrix<f64>,
    pub nu: usize,
    /// Distance of Δ from lying inside Γ.
    pub containment: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct NullitySummary {
    pub mu: usize,
    pub nu: usize,
    pub containment: f64,
}

impl NullityData {
    pub fn summary(&self) -> NullitySummary {
        NullitySummary { mu: self.mu, nu: self.nu, containment: self.containment }
    }
}

/// The matrix of u ↦ (⟨R(eₐ,e_b)u, e_d⟩)_{a<b, d}.
fn nullity_operator(curv: &CurvatureData) -> DMatrix<f64> {
    let n = curv.n;
    let pairs = two_form_pairs(n);
    let mut m = DMatrix::zeros(pairs.len() * n, n);
    for (p, &(a, b)) in pairs.iter().enumerate() {
        for d in 0..n {
            for c in 0..n {
                m[(p * n + d, c)] = curv.rf(a, b, c, d);
            }
        }
    }
    m
}

/// Γ(p) = {u : R(a,b)u = 0 for all a, b}.
pub fn nullity(curv: &CurvatureData, rank_tol: f64) -> Result<(DMatrix<f64>, usize)> {
    let m = nullity_operator(curv);
    let s = singular_values(&m);
    let smax = s.first().copied().unwrap_or(0.0);
    let thr = rank_tol * smax.max(curv.scale);
    for &v in &s {
        if v > 0.1 * thr && v < 10.0 * thr {
            return Err(GeomError::AmbiguousRank { value: v, threshold: thr });
        }
    }
    let basis = null_space(&m, thr.max(f64::MIN_POSITIVE));
    let mu = basis.ncols();
    Ok((basis, mu))
}

/// Γ from curvature and Δ = ker A ∩ ker B from the Weinstein frame.
pub fn nullity_data(geom: &PointGeometry, rank_tol: f64) -> Result<NullityData> {
    let (gamma_basis, mu) = nullity(&geom.curvature, rank_tol)?;
    let frame = weinstein_frame(&geom.forms)?;
    let ord = ordered_frame(&frame, &geom.forms, rank_tol)?;
    let n = geom.n();
    let scale = geom.forms.alpha_norm2().sqrt();
    let delta_basis = if ord.frame.totally_geodesic {
        DMatrix::identity(n, n)
    } else {
        let sum = &ord.frame.a + &ord.frame.b;
        let rank = guarded_rank(&sum, rank_tol, scale)?;
        let mut basis = null_space(&sum, rank_tol * scale);
        if basis.ncols() != n - rank {
            basis = DMatrix::zeros(n, 0);
        }
        basis
    };
    let nu = delta_basis.ncols();
    let containment = containment_defect(&delta_basis, &gamma_basis);
    Ok(NullityData { gamma_basis, mu, delta_basis, nu, containment })
}

/// Unit nullity direction in chart coordinates, oriented against `reference`.
pub fn nullity_direction(chart: &Chart, u: &[f64], reference: Option<&DVector<f64>>, rank_tol: f64) -> Result<DVector<f64>> {
    let geom = PointGeometry::at(chart, u)?;
    nullity_direction_at(&geom, reference, rank_tol)
}

pub fn nullity_direction_at(geom: &PointGeometry, reference: Option<&DVector<f64>>, rank_tol: f64) -> Result<DVector<f64>> {
    let (basis, mu) = nullity(&geom.curvature, rank_tol)?;
    if mu != 1 {
        return Err(GeomError::NullityNotLine { mu });
    }
    let mut t = geom.forms.frame_to_coords(&basis.column(0).into_owned());
    if let Some(r) = reference {
        if t.dot(r) < 0.0 {
            t = -t;
        }
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::immersion::{Factor, Region};
    use crate::jetcalc::Jet;

    /// S²(1) × ℝ via polar angles, a straight line factor.
    fn s2_times_line() -> Chart {
        Chart::new(
            "s2xr",
            3,
            5,
            vec![(0.2, 2.9), (-7.0, 7.0), (-5.0, 5.0)],
            Region::new(vec![Factor::interval(0.5, 2.5), Factor::periodic(0.0, std::f64::consts::TAU), Factor::interval(-1.0, 1.0)]),
            |x: &[Jet]| {
                let st = x[0].sin();
                vec![&st * &x[1].cos(), &st * &x[1].sin(), x[0].cos(), x[2].clone(), x[2].lift(0.0)]
            },
        )
    }

    #[test]
    fn product_nullity_is_the_line_factor() {
        let ch = s2_times_line();
        let geom = PointGeometry::at(&ch, &[1.1, 0.4, 0.2]).unwrap();
        let nd = nullity_data(&geom, 1e-7).unwrap();
        assert_eq!(nd.mu, 1);
        assert_eq!(nd.nu, 1);
        assert!(nd.containment < 1e-10);
        let t = nullity_direction_at(&geom, None, 1e-7).unwrap();
        assert!((t[2].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn flat_chart_nullity_is_everything() {
        let ch = Chart::new("flat", 3, 5, vec![(-1.0, 1.0); 3], Region::new(vec![Factor::ball(3, 1.0, true)]), |x: &[Jet]| {
            vec![x[0].clone(), x[1].clone(), x[2].clone(), x[0].lift(0.0), x[0].lift(0.0)]
        });
        let geom = PointGeometry::at(&ch, &[0.1, 0.1, 0.1]).unwrap();
        let (_, mu) = nullity(&geom.curvature, 1e-7).unwrap();
        assert_eq!(mu, 3);
        assert!(matches!(nullity_direction_at(&geom, None, 1e-7), Err(GeomError::NullityNotLine { mu: 3 })));
    }
}
