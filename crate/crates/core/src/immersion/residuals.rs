//! Gauss, Codazzi and Ricci structure equations as numerical residuals.
//!
//! Codazzi and Ricci residuals are evaluated in the projected gauge: the
//! normal frame at nearby points is obtained by projecting a fixed base pair
//! (ξ₀, η₀) onto the normal plane and orthonormalizing. Both equations are
//! covariant under normal frame rotations, so any smooth gauge gives the same
//! verdict. Derivatives of the gauge come from the chart jets, not from
//! differencing.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::immersion::{classify::gauss_operator, weinstein_frame, Chart, PointGeometry};
use crate::jetcalc::{dot, Jet, MetricData};

pub type JetVec = Vec<Jet>;

fn sub_proj(v: &[Jet], t: &[Jet]) -> JetVec {
    let p = dot(v, t);
    v.iter().zip(t).map(|(x, y)| x - &(y * &p)).collect()
}

fn normalize(v: &[Jet]) -> JetVec {
    let inv = dot(v, v).sqrt().recip();
    v.iter().map(|x| x * &inv).collect()
}

/// Smooth normal frame near a base point, carried as second-order jets.
pub struct ProjectedGauge {
    pub n: usize,
    pub metric: MetricData,
    /// ξ and η as jets in the chart variables.
    pub xi: JetVec,
    pub eta: JetVec,
    /// A_ij, B_ij, and w_j = ⟨∂ⱼξ, η⟩ as first-order jets, in chart coordinates.
    pub a: Vec<Vec<Jet>>,
    pub b: Vec<Vec<Jet>>,
    pub w: Vec<Jet>,
}

impl ProjectedGauge {
    pub fn new(chart: &Chart, u: &[f64], xi0: &DVector<f64>, eta0: &DVector<f64>) -> Result<Self> {
        let jets = chart.eval(u, 3)?;
        let d = crate::jetcalc::Derivs::from_jets(&jets);
        let metric = MetricData::from_derivs(&d)?;
        let n = chart.n;
        let m = jets.len();
        let fi: Vec<JetVec> = (0..n).map(|i| jets.iter().map(|f| f.partial(i)).collect()).collect();
        let mut tangent: Vec<JetVec> = Vec::with_capacity(n);
        for v in &fi {
            let mut w = v.clone();
            for t in &tangent {
                w = sub_proj(&w, t);
            }
            tangent.push(normalize(&w));
        }
        let lift = |v: &DVector<f64>| -> JetVec { (0..m).map(|c| fi[0][0].lift(v[c])).collect() };
        let project = |mut w: JetVec| -> JetVec {
            for t in &tangent {
                w = sub_proj(&w, t);
            }
            w
        };
        let xi = normalize(&project(lift(xi0)));
        let eta = normalize(&sub_proj(&project(lift(eta0)), &xi));
        let fij: Vec<Vec<JetVec>> = (0..n).map(|i| (0..n).map(|j| fi[i].iter().map(|f| f.partial(j)).collect()).collect()).collect();
        let a = (0..n).map(|i| (0..n).map(|j| dot(&fij[i][j], &xi)).collect()).collect();
        let b = (0..n).map(|i| (0..n).map(|j| dot(&fij[i][j], &eta)).collect()).collect();
        let w = (0..n)
            .map(|j| {
                let dxi: JetVec = xi.iter().map(|x| x.partial(j)).collect();
                dot(&dxi, &eta)
            })
            .collect();
        Ok(ProjectedGauge { n, metric, xi, eta, a, b, w })
    }

    /// Values of w(∂ⱼ).
    pub fn w_values(&self) -> Vec<f64> {
        self.w.iter().map(Jet::value).collect()
    }

    fn covariant(&self, s: &[Vec<Jet>], k: usize, i: usize, j: usize) -> f64 {
        let g = &self.metric.gamma;
        let mut v = s[i][j].d1(k);
        for l in 0..self.n {
            v -= g[l][k][i] * s[l][j].value() + g[l][k][j] * s[i][l].value();
        }
        v
    }

    /// Largest Codazzi defect over orthonormal frame components.
    pub fn codazzi(&self) -> f64 {
        let n = self.n;
        let e = &self.metric.frame;
        let mut t1 = vec![0.0; n * n * n];
        let mut t2 = vec![0.0; n * n * n];
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    let wk = self.w[k].value();
                    let wi = self.w[i].value();
                    let (a, b) = (&self.a, &self.b);
                    t1[(k * n + i) * n + j] = self.covariant(a, k, i, j) - wk * b[i][j].value() - (self.covariant(a, i, k, j) - wi * b[k][j].value());
                    t2[(k * n + i) * n + j] = self.covariant(b, k, i, j) + wk * a[i][j].value() - (self.covariant(b, i, k, j) + wi * a[k][j].value());
                }
            }
        }
        frame_max(&t1, e, n).max(frame_max(&t2, e, n))
    }

    /// Largest defect of dw = ⟨[A,B]·,·⟩ over orthonormal frame components.
    pub fn ricci(&self) -> f64 {
        let n = self.n;
        let av = DMatrix::from_fn(n, n, |i, j| self.a[i][j].value());
        let bv = DMatrix::from_fn(n, n, |i, j| self.b[i][j].value());
        let gi = &self.metric.g_inv;
        let comm = &av * gi * &bv - &bv * gi * &av;
        let lhs = DMatrix::from_fn(n, n, |i, j| self.w[j].d1(i) - self.w[i].d1(j));
        let defect = lhs - comm.transpose();
        let e = &self.metric.frame;
        (e.transpose() * defect * e).amax()
    }
}

fn frame_max(t: &[f64], e: &DMatrix<f64>, n: usize) -> f64 {
    let mut worst = 0.0f64;
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let mut s = 0.0;
                for k in 0..n {
                    for i in 0..n {
                        for j in 0..n {
                            s += e[(k, a)] * e[(i, b)] * e[(j, c)] * t[(k * n + i) * n + j];
                        }
                    }
                }
                worst = worst.max(s.abs());
            }
        }
    }
    worst
}

/// Base pair for the projected gauge: the Weinstein frame when it exists,
/// otherwise the chart's normal basis.
pub fn base_pair(geom: &PointGeometry) -> (DVector<f64>, DVector<f64>) {
    match weinstein_frame(&geom.forms) {
        Ok(fr) => (fr.xi, fr.eta),
        Err(_) => (geom.forms.normal.column(0).into_owned(), geom.forms.normal.column(1).into_owned()),
    }
}

/// ‖R̂ − (Λ²A + Λ²B)‖ / (1 + ‖R̂‖). The right side is invariant under
/// rotations of the normal frame, so the chart's normal basis is used.
pub fn gauss_residual(chart: &Chart, u: &[f64]) -> Result<f64> {
    let geom = PointGeometry::at(chart, u)?;
    Ok(gauss_residual_at(&geom))
}

pub fn gauss_residual_at(geom: &PointGeometry) -> f64 {
    let rhat = &geom.curvature.rhat;
    let g = gauss_operator(&geom.forms.alpha[0], &geom.forms.alpha[1]);
    (rhat - g).norm() / (1.0 + rhat.norm())
}

pub fn codazzi_residual(chart: &Chart, u: &[f64]) -> Result<f64> {
    let geom = PointGeometry::at(chart, u)?;
    let (xi, eta) = base_pair(&geom);
    Ok(ProjectedGauge::new(chart, u, &xi, &eta)?.codazzi())
}

pub fn ricci_eq_residual(chart: &Chart, u: &[f64]) -> Result<f64> {
    let geom = PointGeometry::at(chart, u)?;
    let (xi, eta) = base_pair(&geom);
    Ok(ProjectedGauge::new(chart, u, &xi, &eta)?.ricci())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::immersion::{Factor, Region};

    /// A generic graph in ℝ⁴ with nonzero normal curvature.
    fn twisted_graph() -> Chart {
        Chart::new("graph", 2, 4, vec![(-1.0, 1.0); 2], Region::new(vec![Factor::interval(-1.0, 1.0), Factor::interval(-1.0, 1.0)]), |x: &[Jet]| {
            let p = &(&x[0] * &x[0]) - &(&x[1] * &x[1]).scale(0.5);
            let q = &(&x[0] * &x[1]) + &(&x[0] * &(&x[1] * &x[1])).scale(0.3);
            vec![x[0].clone(), x[1].clone(), p, q.sin()]
        })
    }

    #[test]
    fn codazzi_and_ricci_hold_on_a_generic_surface() {
        let ch = twisted_graph();
        for u in [[0.1, 0.2], [-0.4, 0.3], [0.5, -0.6]] {
            let geom = PointGeometry::at(&ch, &u).unwrap();
            let (xi, eta) = (geom.forms.normal.column(0).into_owned(), geom.forms.normal.column(1).into_owned());
            let g = ProjectedGauge::new(&ch, &u, &xi, &eta).unwrap();
            assert!(g.codazzi() < 1e-11, "codazzi {}", g.codazzi());
            assert!(g.ricci() < 1e-11, "ricci {}", g.ricci());
            // The check has power: the normal bundle is curved here.
            let lhs = g.w[1].d1(0) - g.w[0].d1(1);
            assert!(lhs.abs() > 1e-3);
        }
    }

    #[test]
    fn affine_chart_residuals_vanish() {
        let ch = Chart::new("plane", 3, 5, vec![(-1.0, 1.0); 3], Region::new(vec![Factor::ball(3, 1.0, true)]), |x: &[Jet]| {
            vec![x[0].clone(), &x[1] + &x[2], x[2].clone(), x[0].lift(1.0), &x[0] * 0.5]
        });
        assert!(gauss_residual(&ch, &[0.1, 0.2, 0.3]).unwrap() < 1e-15);
        assert!(codazzi_residual(&ch, &[0.1, 0.2, 0.3]).unwrap() < 1e-14);
        assert!(ricci_eq_residual(&ch, &[0.1, 0.2, 0.3]).unwrap() < 1e-14);
    }
}
