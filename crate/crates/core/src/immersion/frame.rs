//! Weinstein frames: orthonormal normal bases in which both shape operators
//! are positive semidefinite.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use nalgebra::{DMatrix, DVector};

use crate::error::{GeomError, Result};
use crate::immersion::FundamentalForms;
use crate::linalg::{lambda_max, lambda_min};

/// Slack on the cone width, in radians.
pub const TOL_ANGLE: f64 = 1e-4;
/// Norm of α below which a point is treated as totally geodesic.
pub const FLAT_ALPHA: f64 = 1e-10;

const SCAN_STEPS: usize = 32;

/// Normal frame {ξ, η} with A = A_ξ and B = A_η.
#[derive(Clone, Debug)]
pub struct ShapeFrame {
    pub point: Vec<f64>,
    pub tangent: DMatrix<f64>,
    pub xi: DVector<f64>,
    pub eta: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub unique: bool,
    /// Angular width of the cone spanned by {α(X,X)}.
    pub width: f64,
    /// Cone edges as angles in the chart's normal basis, counterclockwise.
    pub edges: (f64, f64),
    pub totally_geodesic: bool,
}

impl ShapeFrame {
    pub fn n(&self) -> usize {
        self.a.nrows()
    }

    /// Shape operator of β(θ) = cosθ ξ + sinθ η.
    pub fn shape(&self, theta: f64) -> DMatrix<f64> {
        shape_operator(self, theta)
    }

    pub fn beta(&self, theta: f64) -> DVector<f64> {
        let (s, c) = theta.sin_cos();
        &self.xi * c + &self.eta * s
    }

    /// The frame with ξ on the cone's clockwise edge; when the cone is
    /// narrower than a quadrant this is one of the admissible frames.
    pub fn edge_aligned(&self, forms: &FundamentalForms) -> ShapeFrame {
        if self.totally_geodesic {
            return self.clone();
        }
        let lo = self.edges.0;
        let mut out = self.clone();
        out.xi = forms.normal_at_angle(lo);
        out.eta = forms.normal_at_angle(lo + FRAC_PI_2);
        out.a = forms.shape_at_angle(lo);
        out.b = forms.shape_at_angle(lo + FRAC_PI_2);
        out
    }

    /// Exchanges the roles of ξ and η.
    pub fn swapped(&self) -> ShapeFrame {
        let mut out = self.clone();
        std::mem::swap(&mut out.xi, &mut out.eta);
        std::mem::swap(&mut out.a, &mut out.b);
        out
    }

    /// Orthonormality and tangency defects: (|⟨ξ,η⟩|, max unit defect, max tangency).
    pub fn defects(&self) -> (f64, f64, f64) {
        let cross = self.xi.dot(&self.eta).abs();
        let unit = (self.xi.norm() - 1.0).abs().max((self.eta.norm() - 1.0).abs());
        let tang = (self.tangent.transpose() * &self.xi).amax().max((self.tangent.transpose() * &self.eta).amax());
        (cross, unit, tang)
    }
}

/// A_β for β(θ) = cosθ ξ + sinθ η.
pub fn shape_operator(frame: &ShapeFrame, theta: f64) -> DMatrix<f64> {
    let (s, c) = theta.sin_cos();
    &frame.a * c + &frame.b * s
}

fn wrap(x: f64) -> f64 {
    x.rem_euclid(2.0 * PI)
}

/// Smallest ψ ∈ [0, π] with `pred(ψ)`, refined by bisection.
fn first_true(pred: impl Fn(f64) -> bool) -> Option<f64> {
    if pred(0.0) {
        return Some(0.0);
    }
    let step = PI / SCAN_STEPS as f64;
    let mut prev = 0.0;
    for k in 1..=SCAN_STEPS {
        let x = k as f64 * step;
        if pred(x) {
            let (mut lo, mut hi) = (prev, x);
            for _ in 0..64 {
                let mid = 0.5 * (lo + hi);
                if pred(mid) {
                    hi = mid;
                } else {
                    lo = mid;
                }
                if hi - lo < 1e-15 {
                    break;
                }
            }
            return Some(hi);
        }
        prev = x;
    }
    None
}

/// Rotates the normal basis so that the cone of {α(X,X)} lies in the first
/// quadrant, returning the frame that bisects the cone.
pub fn weinstein_frame(forms: &FundamentalForms) -> Result<ShapeFrame> {
    let norm = forms.alpha_norm2().sqrt();
    if norm <= FLAT_ALPHA {
        return Ok(ShapeFrame {
            point: forms.point.clone(),
            tangent: forms.tangent.clone(),
            xi: forms.normal_at_angle(0.0),
            eta: forms.normal_at_angle(FRAC_PI_2),
            a: forms.alpha[0].clone(),
            b: forms.alpha[1].clone(),
            unique: false,
            width: 0.0,
            edges: (0.0, 0.0),
            totally_geodesic: true,
        });
    }
    let tol = 1e-12 * norm;
    let h = (forms.alpha[0].trace(), forms.alpha[1].trace());
    let center = if h.0.hypot(h.1) > 1e-9 * norm {
        h.1.atan2(h.0)
    } else {
        // Mean curvature vanishes but α does not: the cone cannot sit in a
        // quadrant. Fall back to a principal direction so the scan reports it.
        let (i, j) = forms.alpha[0].iamax_full();
        forms.alpha[1][(i, j)].atan2(forms.alpha[0][(i, j)])
    };
    // ⟨α(X,X), u(φ+π/2)⟩ as a quadratic form.
    let across = |phi: f64| -> DMatrix<f64> {
        let (s, c) = phi.sin_cos();
        &forms.alpha[1] * c - &forms.alpha[0] * s
    };
    let plus = first_true(|psi| lambda_max(&across(center + psi)) <= tol);
    let minus = first_true(|psi| lambda_min(&across(center - psi)) >= -tol);
    let (plus, minus) = match (plus, minus) {
        (Some(p), Some(m)) => (p, m),
        _ => return Err(GeomError::NoQuadrantFrame { width: PI }),
    };
    let width = plus + minus;
    if width > FRAC_PI_2 + TOL_ANGLE {
        return Err(GeomError::NoQuadrantFrame { width });
    }
    let lo = wrap(center - minus);
    let mid = lo + 0.5 * width;
    // The edge scan only sees lines through the origin; a cone filling a
    // whole line passes it, so positivity is confirmed directly.
    let (a_lo, a_hi) = (forms.shape_at_angle(lo), forms.shape_at_angle(lo + FRAC_PI_2));
    let slack = 1e-9 * norm;
    if lambda_min(&a_lo) < -slack || lambda_min(&a_hi) < -slack {
        return Err(GeomError::NoQuadrantFrame { width: PI });
    }
    Ok(ShapeFrame {
        point: forms.point.clone(),
        tangent: forms.tangent.clone(),
        xi: forms.normal_at_angle(mid - FRAC_PI_4),
        eta: forms.normal_at_angle(mid + FRAC_PI_4),
        a: forms.shape_at_angle(mid - FRAC_PI_4),
        b: forms.shape_at_angle(mid + FRAC_PI_4),
        unique: width >= FRAC_PI_2 - TOL_ANGLE,
        width,
        edges: (lo, lo + width),
        totally_geodesic: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jetcalc::{Derivs, MetricData};
    use crate::linalg::lambda_min;

    /// Forms with identity metric and prescribed α in normal basis e₄, e₅ of ℝⁿ⁺².
    fn synthetic(a0: DMatrix<f64>, a1: DMatrix<f64>) -> FundamentalForms {
        let n = a0.nrows();
        let m = n + 2;
        let d = Derivs {
            n,
            m,
            f: vec![0.0; m],
            d1: (0..n).map(|i| (0..m).map(|c| if c == i { 1.0 } else { 0.0 }).collect()).collect(),
            d2: (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| {
                            let mut v = vec![0.0; m];
                            v[n] = a0[(i, j)];
                            v[n + 1] = a1[(i, j)];
                            v
                        })
                        .collect()
                })
                .collect(),
            d3: vec![vec![vec![vec![0.0; m]; n]; n]; n],
        };
        let metric = MetricData::from_derivs(&d).unwrap();
        FundamentalForms::from_derivs(&d, metric, &vec![0.0; n]).unwrap()
    }

    #[test]
    fn ray_cone_gives_bisecting_frame() {
        let ff = synthetic(DMatrix::identity(3, 3), DMatrix::zeros(3, 3));
        let fr = weinstein_frame(&ff).unwrap();
        assert!(!fr.unique);
        assert!(fr.width < 1e-10);
        let c = std::f64::consts::FRAC_1_SQRT_2;
        assert!((fr.a.clone() - DMatrix::identity(3, 3) * c).norm() < 1e-10);
        assert!((fr.b.clone() - DMatrix::identity(3, 3) * c).norm() < 1e-10);
    }

    #[test]
    fn product_cone_is_a_quadrant() {
        let a0 = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1.0, 0.0, 0.0]));
        let a1 = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 0.0, 1.0, 1.0]));
        // Rotate the normal basis by an arbitrary angle first.
        let t: f64 = 0.7;
        let r0 = &a0 * t.cos() + &a1 * t.sin();
        let r1 = &a1 * t.cos() - &a0 * t.sin();
        let ff = synthetic(r0, r1);
        let fr = weinstein_frame(&ff).unwrap();
        assert!(fr.unique);
        let e = fr.edge_aligned(&ff);
        let mut diag: Vec<f64> = (0..4).map(|i| e.a[(i, i)]).collect();
        diag.sort_by(f64::total_cmp);
        assert!((diag[0]).abs() < 1e-10 && (diag[3] - 1.0).abs() < 1e-10);
        assert!(lambda_min(&e.a) > -1e-10 && lambda_min(&e.b) > -1e-10);
        assert!((e.a.clone() * &e.b).norm() < 1e-10);
    }

    #[test]
    fn hyperbolic_point_is_rejected() {
        let a0 = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, -1.0, 0.5]));
        let ff = synthetic(a0, DMatrix::zeros(3, 3));
        assert!(matches!(weinstein_frame(&ff), Err(GeomError::NoQuadrantFrame { .. })));
    }

    #[test]
    fn flat_point_returns_arbitrary_frame() {
        let ff = synthetic(DMatrix::zeros(3, 3), DMatrix::zeros(3, 3));
        let fr = weinstein_frame(&ff).unwrap();
        assert!(fr.totally_geodesic && !fr.unique);
        assert!(fr.a.norm() == 0.0 && fr.b.norm() == 0.0);
    }

    #[test]
    fn antipodal_shape_operator() {
        let a0 = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0]));
        let ff = synthetic(a0.clone(), DMatrix::zeros(2, 2) + DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 1.0])));
        let fr = weinstein_frame(&ff).unwrap().edge_aligned(&ff);
        assert!((shape_operator(&fr, PI) + &fr.a).norm() < 1e-12);
        assert!((shape_operator(&fr, 0.0) - &fr.a).norm() < 1e-15);
    }
}
