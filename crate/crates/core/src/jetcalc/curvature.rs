//! Intrinsic Riemannian quantities of an immersed chart, computed from the
//! third-order jet of the chart map.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::immersion::Chart;
use crate::jetcalc::Jet;
use crate::linalg::{null_space, sym_eigen, sym_eigenvalues};
use crate::sampling::halton;

/// Threshold below which the metric is treated as degenerate.
pub const DET_MIN: f64 = 1e-12;

/// Chart derivatives unpacked into plain arrays: `d1[i][c]`, `d2[i][j][c]`, `d3[i][j][k][c]`.
#[derive(Clone, Debug)]
pub struct Derivs {
    pub n: usize,
    pub m: usize,
    pub f: Vec<f64>,
    pub d1: Vec<Vec<f64>>,
    pub d2: Vec<Vec<Vec<f64>>>,
    pub d3: Vec<Vec<Vec<Vec<f64>>>>,
}

impl Derivs {
    pub fn from_jets(jets: &[Jet]) -> Self {
        let n = jets[0].n();
        let m = jets.len();
        let f = jets.iter().map(Jet::value).collect();
        let d1 = (0..n).map(|i| jets.iter().map(|j| j.d1(i)).collect()).collect();
        let d2 = (0..n).map(|i| (0..n).map(|k| jets.iter().map(|j| j.d2(i, k)).collect()).collect()).collect();
        let d3 = (0..n).map(|i| (0..n).map(|k| (0..n).map(|l| jets.iter().map(|j| j.d3(i, k, l)).collect()).collect()).collect()).collect();
        Derivs { n, m, f, d1, d2, d3 }
    }

    /// The differential as an m×n matrix.
    pub fn jacobian(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.m, self.n, |c, i| self.d1[i][c])
    }
}

fn dotv(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// First fundamental form, its first derivatives and the Christoffel symbols.
#[derive(Clone, Debug)]
pub struct MetricData {
    pub n: usize,
    pub g: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
    /// `dg[k][i][j] = ∂ₖ g_ij`.
    pub dg: Vec<Vec<Vec<f64>>>,
    /// `gamma[l][i][j] = Γˡᵢⱼ`.
    pub gamma: Vec<Vec<Vec<f64>>>,
    /// Orthonormal frame: column `a` holds the coordinates of eₐ, so EᵀgE = I.
    pub frame: DMatrix<f64>,
}

impl MetricData {
    pub fn from_derivs(d: &Derivs) -> Result<Self> {
        let n = d.n;
        let g = DMatrix::from_fn(n, n, |i, j| dotv(&d.d1[i], &d.d1[j]));
        let det = g.determinant();
        if !(det > DET_MIN) {
            return Err(GeomError::DegenerateMetric { det });
        }
        let chol = g.clone().cholesky().ok_or(GeomError::DegenerateMetric { det })?;
        let g_inv = chol.inverse();
        let l = chol.l();
        let frame = l.transpose().try_inverse().ok_or(GeomError::DegenerateMetric { det })?;
        let mut dg = vec![vec![vec![0.0; n]; n]; n];
        let mut first_kind = vec![vec![vec![0.0; n]; n]; n];
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    dg[k][i][j] = dotv(&d.d2[i][k], &d.d1[j]) + dotv(&d.d1[i], &d.d2[j][k]);
                    // Γ_{k,ij} = ⟨f_ij, f_k⟩
                    first_kind[k][i][j] = dotv(&d.d2[i][j], &d.d1[k]);
                }
            }
        }
        let mut gamma = vec![vec![vec![0.0; n]; n]; n];
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    gamma[l][i][j] = (0..n).map(|m| g_inv[(l, m)] * first_kind[m][i][j]).sum();
                }
            }
        }
        Ok(MetricData { n, g, g_inv, dg, gamma, frame })
    }

    /// Derivatives of the Christoffel symbols, `[k][l][i][j] = ∂ₖΓˡᵢⱼ`.
    fn gamma_derivs(&self, d: &Derivs) -> Vec<Vec<Vec<Vec<f64>>>> {
        let n = self.n;
        let mut out = vec![vec![vec![vec![0.0; n]; n]; n]; n];
        for k in 0..n {
            for i in 0..n {
                for j in 0..n {
                    // ∂ₖΓ_{m,ij} - ∂ₖg_{mp} Γᵖᵢⱼ, raised with g⁻¹.
                    let lowered: Vec<f64> = (0..n)
                        .map(|m| {
                            let dk = dotv(&d.d3[i][j][k], &d.d1[m]) + dotv(&d.d2[i][j], &d.d2[m][k]);
                            let corr: f64 = (0..n).map(|p| self.dg[k][m][p] * self.gamma[p][i][j]).sum();
                            dk - corr
                        })
                        .collect();
                    for l in 0..n {
                        out[k][l][i][j] = (0..n).map(|m| self.g_inv[(l, m)] * lowered[m]).sum();
                    }
                }
            }
        }
        out
    }
}

/// Riemann tensor in several guises plus Ricci data at one point.
#[derive(Clone, Debug)]
pub struct CurvatureData {
    pub n: usize,
    pub metric: MetricData,
    /// `R^l_{ijk}` stored at `((l*n + i)*n + j)*n + k`, with R(∂ᵢ,∂ⱼ)∂ₖ = R^l_{ijk}∂ₗ.
    pub riemann_up: Vec<f64>,
    /// `R_{ijkl} = ⟨R(∂ᵢ,∂ⱼ)∂ₖ, ∂ₗ⟩` in coordinates.
    pub riemann: Vec<f64>,
    /// `R_{abcd}` in the orthonormal frame of `metric.frame`.
    pub riemann_frame: Vec<f64>,
    /// Curvature operator on Λ² in the orthonormal basis {eₐ∧e_b : a<b}.
    pub rhat: DMatrix<f64>,
    /// Ricci tensor in the orthonormal frame.
    pub ricci: DMatrix<f64>,
    /// Natural size of the curvature, |α|² for the chart, used for relative tolerances.
    pub scale: f64,
}

/// Index pairs (a<b) labelling the 2-form basis.
pub fn two_form_pairs(n: usize) -> Vec<(usize, usize)> {
    let mut v = Vec::new();
    for a in 0..n {
        for b in (a + 1)..n {
            v.push((a, b));
        }
    }
    v
}

impl CurvatureData {
    #[inline]
    pub fn idx(&self, i: usize, j: usize, k: usize, l: usize) -> usize {
        ((i * self.n + j) * self.n + k) * self.n + l
    }

    /// Lowered component in the orthonormal frame.
    pub fn rf(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        self.riemann_frame[self.idx(a, b, c, d)]
    }

    pub fn from_jets(jets: &[Jet]) -> Result<Self> {
        let d = Derivs::from_jets(jets);
        Self::from_derivs(&d)
    }

    pub fn from_derivs(d: &Derivs) -> Result<Self> {
        let n = d.n;
        let metric = MetricData::from_derivs(d)?;
        let dgam = metric.gamma_derivs(d);
        let gam = &metric.gamma;
        let at = |i: usize, j: usize, k: usize, l: usize| ((i * n + j) * n + k) * n + l;
        let mut up = vec![0.0; n * n * n * n];
        for l in 0..n {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let mut r = dgam[i][l][j][k] - dgam[j][l][i][k];
                        for m in 0..n {
                            r += gam[l][i][m] * gam[m][j][k] - gam[l][j][m] * gam[m][i][k];
                        }
                        up[at(l, i, j, k)] = r;
                    }
                }
            }
        }
        let mut low = vec![0.0; n * n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        low[at(i, j, k, l)] = (0..n).map(|m| metric.g[(l, m)] * up[at(m, i, j, k)]).sum();
                    }
                }
            }
        }
        let e = &metric.frame;
        let mut t = low.clone();
        // Contract each slot with the frame in turn.
        for slot in 0..4 {
            let mut next = vec![0.0; n * n * n * n];
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        for l in 0..n {
                            let mut s = 0.0;
                            for p in 0..n {
                                let (src, coef) = match slot {
                                    0 => (at(p, j, k, l), e[(p, i)]),
                                    1 => (at(i, p, k, l), e[(p, j)]),
                                    2 => (at(i, j, p, l), e[(p, k)]),
                                    _ => (at(i, j, k, p), e[(p, l)]),
                                };
                                s += coef * t[src];
                            }
                            next[at(i, j, k, l)] = s;
                        }
                    }
                }
            }
            t = next;
        }
        let pairs = two_form_pairs(n);
        let np = pairs.len();
        let rhat = DMatrix::from_fn(np, np, |p, q| {
            let (a, b) = pairs[p];
            let (c, dd) = pairs[q];
            t[at(a, b, dd, c)]
        });
        let ricci = DMatrix::from_fn(n, n, |b, c| (0..n).map(|a| t[at(a, b, c, a)]).sum());
        let scale = second_form_scale(d, &metric);
        Ok(CurvatureData { n, metric, riemann_up: up, riemann: low, riemann_frame: t, rhat, ricci, scale })
    }

    /// Sectional curvature of span{x, y}, with x, y given in orthonormal-frame coordinates.
    pub fn sectional(&self, x: &[f64], y: &[f64]) -> f64 {
        let n = self.n;
        let mut num = 0.0;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        num += self.rf(a, b, c, d) * x[a] * y[b] * y[c] * x[d];
                    }
                }
            }
        }
        let xx: f64 = dotv(x, x);
        let yy: f64 = dotv(y, y);
        let xy: f64 = dotv(x, y);
        num / (xx * yy - xy * xy)
    }

    /// Largest violation of the algebraic symmetries, relative to 1 + max |R|.
    pub fn symmetry_residual(&self) -> f64 {
        let n = self.n;
        let big = self.riemann_frame.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let mut worst = 0.0f64;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let r = self.rf(a, b, c, d);
                        worst = worst.max((r + self.rf(b, a, c, d)).abs()).max((r + self.rf(a, b, d, c)).abs()).max((r - self.rf(c, d, a, b)).abs());
                    }
                }
            }
        }
        worst / (1.0 + big)
    }

    /// First Bianchi identity residual, relative to 1 + max |R|.
    pub fn bianchi_residual(&self) -> f64 {
        let n = self.n;
        let big = self.riemann_frame.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let mut worst = 0.0f64;
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for d in 0..n {
                        let s = self.rf(a, b, c, d) + self.rf(b, c, a, d) + self.rf(c, a, b, d);
                        worst = worst.max(s.abs());
                    }
                }
            }
        }
        worst / (1.0 + big)
    }
}

fn second_form_scale(d: &Derivs, metric: &MetricData) -> f64 {
    let n = d.n;
    let jac = d.jacobian();
    let proj_t = &jac * &metric.g_inv * jac.transpose();
    let mut best = 0.0f64;
    for a in 0..n {
        for b in 0..n {
            let mut h = nalgebra::DVector::zeros(d.m);
            for i in 0..n {
                for j in 0..n {
                    let w = metric.frame[(i, a)] * metric.frame[(j, b)];
                    for c in 0..d.m {
                        h[c] += w * d.d2[i][j][c];
                    }
                }
            }
            let hn = &h - &proj_t * &h;
            best = best.max(hn.norm_squared());
        }
    }
    best
}

/// Third-order jets of every ambient coordinate at `u`.
pub fn eval_jet3(chart: &Chart, u: &[f64]) -> Result<Vec<Jet>> {
    chart.eval(u, 3)
}

/// Riemann data at `u` computed purely from the induced metric.
pub fn intrinsic_curvature(chart: &Chart, u: &[f64]) -> Result<CurvatureData> {
    CurvatureData::from_jets(&eval_jet3(chart, u)?)
}

/// Extremes of sectional curvature at a point.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct SectionalRange {
    pub min: f64,
    pub max: f64,
    /// Smallest eigenvalue of the curvature operator, a lower bound for `min`.
    pub rhat_min: f64,
}

fn perp_basis(x: &[f64]) -> DMatrix<f64> {
    let row = DMatrix::from_row_slice(1, x.len(), x);
    null_space(&row, 1e-12 * (1.0 + dotv(x, x).sqrt()))
}

fn extreme_partner(curv: &CurvatureData, x: &[f64], maximize: bool) -> (Vec<f64>, f64) {
    let n = curv.n;
    let mut m = DMatrix::zeros(n, n);
    for a in 0..n {
        for d in 0..n {
            let w = x[a] * x[d];
            if w == 0.0 {
                continue;
            }
            for b in 0..n {
                for c in 0..n {
                    m[(b, c)] += w * curv.rf(a, b, c, d);
                }
            }
        }
    }
    let q = perp_basis(x);
    let red = q.transpose() * &m * &q;
    let (vals, vecs) = sym_eigen(&red);
    let pick = if maximize { vals.len() - 1 } else { 0 };
    let y = &q * vecs.column(pick);
    (y.iter().copied().collect(), vals[pick])
}

fn normalize(v: &mut [f64]) {
    let s = dotv(v, v).sqrt();
    if s > 0.0 {
        v.iter_mut().for_each(|x| *x /= s);
    }
}

/// Minimum and maximum sectional curvature over 2-planes, found by
/// quasirandom seeding followed by alternating eigenvector refinement.
pub fn sectional_range(curv: &CurvatureData) -> SectionalRange {
    let n = curv.n;
    let rhat_min = sym_eigenvalues(&curv.rhat).first().copied().unwrap_or(0.0);
    if n < 2 {
        return SectionalRange { min: 0.0, max: 0.0, rhat_min };
    }
    if n == 2 {
        let k = curv.rf(0, 1, 1, 0);
        return SectionalRange { min: k, max: k, rhat_min };
    }
    let mut seeds: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for a in 0..n {
        for b in (a + 1)..n {
            let mut x = vec![0.0; n];
            let mut y = vec![0.0; n];
            x[a] = 1.0;
            y[b] = 1.0;
            seeds.push((x, y));
        }
    }
    for s in 0..(16 * n) {
        let h = halton(s + 1, 2 * n);
        let mut x: Vec<f64> = h[..n].iter().map(|t| 2.0 * t - 1.0).collect();
        let mut y: Vec<f64> = h[n..].iter().map(|t| 2.0 * t - 1.0).collect();
        normalize(&mut x);
        let p = dotv(&x, &y);
        y.iter_mut().zip(&x).for_each(|(yv, xv)| *yv -= p * xv);
        normalize(&mut y);
        if dotv(&y, &y) > 0.5 {
            seeds.push((x, y));
        }
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (x0, y0) in &seeds {
        for maximize in [false, true] {
            let (mut x, mut y) = (x0.clone(), y0.clone());
            let mut k = curv.sectional(&x, &y);
            for _ in 0..40 {
                let (ny, _) = extreme_partner(curv, &x, maximize);
                y = ny;
                let (nx, kv) = extreme_partner(curv, &y, maximize);
                x = nx;
                let done = (kv - k).abs() <= 1e-15 * (1.0 + kv.abs());
                k = kv;
                if done {
                    break;
                }
            }
            let kv = curv.sectional(&x, &y);
            lo = lo.min(kv);
            hi = hi.max(kv);
        }
    }
    SectionalRange { min: lo, max: hi, rhat_min }
}

/// Sorted Ricci eigenvalues and positivity flags.
#[derive(Clone, Debug, Serialize)]
pub struct RicciProfile {
    pub eigenvalues: Vec<f64>,
    /// λ₁ + λ₂ > tol.
    pub two_positive: bool,
    /// λ₁ > tol.
    pub positive: bool,
}

pub fn ricci_profile(curv: &CurvatureData, tol: f64) -> RicciProfile {
    let ev = sym_eigenvalues(&curv.ricci);
    let two = if ev.len() >= 2 { ev[0] + ev[1] } else { ev.first().copied().unwrap_or(0.0) };
    RicciProfile { two_positive: two > tol, positive: ev.first().is_some_and(|&l| l > tol), eigenvalues: ev }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::jetcalc::Jet;

    fn sphere_s3(u: &[f64]) -> Vec<Jet> {
        let x = Jet::seed(u, 3);
        let r2 = &(&(&x[0] * &x[0]) + &(&x[1] * &x[1])) + &(&x[2] * &x[2]);
        let den = (&r2 + 1.0).recip();
        let mut out: Vec<Jet> = x.iter().map(|xi| &(xi * &den) * 2.0).collect();
        out.push(&(&r2 - 1.0) * &den);
        out
    }

    fn s2_times_line(u: &[f64]) -> Vec<Jet> {
        let x = Jet::seed(u, 3);
        let (st, ct) = (x[0].sin(), x[0].cos());
        vec![&st * &x[1].cos(), &st * &x[1].sin(), ct, x[2].clone()]
    }

    #[test]
    fn round_s3_has_unit_curvature() {
        let c = CurvatureData::from_jets(&sphere_s3(&[0.3, -0.2, 0.5])).unwrap();
        let r = sectional_range(&c);
        assert!((r.min - 1.0).abs() < 1e-10 && (r.max - 1.0).abs() < 1e-10, "{r:?}");
        let ric = ricci_profile(&c, 1e-9);
        for l in &ric.eigenvalues {
            assert!((l - 2.0).abs() < 1e-10);
        }
        assert!(ric.two_positive && ric.positive);
        assert!(c.bianchi_residual() < 1e-12 && c.symmetry_residual() < 1e-12);
    }

    #[test]
    fn s2_times_line_profile() {
        let c = CurvatureData::from_jets(&s2_times_line(&[1.1, 0.4, 0.0])).unwrap();
        let r = sectional_range(&c);
        assert!(r.min.abs() < 1e-9 && (r.max - 1.0).abs() < 1e-9, "{r:?}");
        let ric = ricci_profile(&c, 1e-9);
        assert!(ric.eigenvalues[0].abs() < 1e-10);
        assert!((ric.eigenvalues[1] - 1.0).abs() < 1e-10 && (ric.eigenvalues[2] - 1.0).abs() < 1e-10);
        assert!(ric.two_positive && !ric.positive);
    }

    #[test]
    fn flat_polar_chart_is_flat() {
        let u = [1.3, 0.7, -0.4];
        let x = Jet::seed(&u, 3);
        let jets = vec![&x[0] * &x[1].cos(), &x[0] * &x[1].sin(), x[2].clone()];
        let c = CurvatureData::from_jets(&jets).unwrap();
        assert!(c.riemann.iter().all(|r| r.abs() < 1e-13));
        let ric = ricci_profile(&c, 1e-9);
        assert!(!ric.two_positive);
    }

    #[test]
    fn degenerate_metric_is_rejected() {
        let x = Jet::seed(&[0.0, 0.5], 3);
        let jets = vec![&x[0] * &x[0], x[1].clone(), x[1].clone()];
        assert!(matches!(CurvatureData::from_jets(&jets), Err(GeomError::DegenerateMetric { .. })));
    }
}
