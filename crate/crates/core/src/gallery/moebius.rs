//! ℝ × ellipsoid composed with a flat band, in a Möbius and a cylinder variant.
//!
//! The Möbius band is the rectifying developable of a closed space curve
//! built from three congruent segments. Each segment is a copy of the previous
//! one under a rigid motion that also flips the principal normal, so the
//! developable glues back with a flip after one full turn.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{Matrix3, Vector3};
use serde::Serialize;
use serde_json::json;

use crate::error::{GeomError, Result};
use crate::gallery::{hemisphere, stereo};
use crate::immersion::{Atlas, Chart, DeckMap, ExampleMetadata, Factor, Region};
use crate::jetcalc::Jet;

/// Number of congruent segments of the core curve.
const SEGMENTS: usize = 3;
/// RK4 steps per segment when tabulating the Frenet frame.
const STEPS: usize = 12288;
/// Knots kept per segment.
const KNOTS: usize = 3072;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum BandKind {
    Moebius,
    Cylinder,
}

#[derive(Clone, Debug, Serialize)]
pub struct MoebiusParams {
    /// Half-width of the flat strip ℝ × (−ε, ε).
    pub epsilon: f64,
    pub band: BandKind,
    /// Ellipsoid semi-axes; the first one must be smaller than `epsilon`.
    pub semi_axes: [f64; 3],
}

impl Default for MoebiusParams {
    fn default() -> Self {
        MoebiusParams { epsilon: 0.05, band: BandKind::Moebius, semi_axes: [0.04, 0.3, 0.3] }
    }
}

/// Curvature κ(s) = k₀ cos(3πs) and rectifying angle ω(s) = π/2 − w₀ cos(3πs),
/// torsion τ = κ cot ω, as univariate 3-jets.
#[derive(Clone, Copy, Debug)]
struct CurveLaw {
    k0: f64,
    w0: f64,
}

impl CurveLaw {
    fn omega(&self, s: &Jet) -> Jet {
        let c = (s * (SEGMENTS as f64 * PI)).cos();
        -(c * self.w0) + PI / 2.0
    }

    fn kappa(&self, s: &Jet) -> Jet {
        (s * (SEGMENTS as f64 * PI)).cos() * self.k0
    }

    /// (κ, τ) at a float parameter.
    fn curvatures(&self, s: f64) -> (f64, f64) {
        let arg = SEGMENTS as f64 * PI * s;
        let k = self.k0 * arg.cos();
        let om = PI / 2.0 - self.w0 * arg.cos();
        (k, k * om.cos() / om.sin())
    }

    fn omega_f(&self, s: f64) -> f64 {
        PI / 2.0 - self.w0 * (SEGMENTS as f64 * PI * s).cos()
    }

    fn omega_prime(&self, s: f64) -> f64 {
        let a = SEGMENTS as f64 * PI;
        self.w0 * a * (a * s).sin()
    }

    fn generator(&self, s: f64) -> Matrix3<f64> {
        let (k, t) = self.curvatures(s);
        Matrix3::new(0.0, -k, 0.0, k, 0.0, -t, 0.0, t, 0.0)
    }
}

/// Frenet frame F (columns T, N, B) and position along one segment.
#[derive(Clone, Copy, Debug)]
struct State {
    f: Matrix3<f64>,
    c: Vector3<f64>,
}

fn rk4(law: &CurveLaw, st: State, s: f64, h: f64) -> State {
    let d = |x: &State, s: f64| -> (Matrix3<f64>, Vector3<f64>) { (x.f * law.generator(s), x.f.column(0).into_owned()) };
    let (a1, b1) = d(&st, s);
    let s2 = State { f: st.f + a1 * (0.5 * h), c: st.c + b1 * (0.5 * h) };
    let (a2, b2) = d(&s2, s + 0.5 * h);
    let s3 = State { f: st.f + a2 * (0.5 * h), c: st.c + b2 * (0.5 * h) };
    let (a3, b3) = d(&s3, s + 0.5 * h);
    let s4 = State { f: st.f + a3 * h, c: st.c + b3 * h };
    let (a4, b4) = d(&s4, s + h);
    State { f: st.f + (a1 + a2 * 2.0 + a3 * 2.0 + a4) * (h / 6.0), c: st.c + (b1 + b2 * 2.0 + b3 * 2.0 + b4) * (h / 6.0) }
}

fn flip() -> Matrix3<f64> {
    Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, -1.0))
}

/// Integrates one segment, returning (R, d) with F(P) = R·F(0)·S, c(P) = R·c(0) + d.
fn segment_motion(law: &CurveLaw, steps: usize) -> (Matrix3<f64>, Vector3<f64>) {
    let p = 1.0 / SEGMENTS as f64;
    let h = p / steps as f64;
    let mut st = State { f: Matrix3::identity(), c: Vector3::zeros() };
    for i in 0..steps {
        st = rk4(law, st, i as f64 * h, h);
    }
    (st.f * flip(), st.c)
}

/// Rotation angle of R and the axial component of d; both must be (2π/3, 0).
fn closure_defect(law: &CurveLaw) -> [f64; 2] {
    let (r, d) = segment_motion(law, 2048);
    let angle = ((r.trace() - 1.0) / 2.0).clamp(-1.0, 1.0).acos();
    let axis = Vector3::new(r[(2, 1)] - r[(1, 2)], r[(0, 2)] - r[(2, 0)], r[(1, 0)] - r[(0, 1)]).normalize();
    [angle - 2.0 * PI / SEGMENTS as f64, axis.dot(&d)]
}

/// Newton on (k₀, w₀) from a nearby starting guess.
fn solve_closure() -> Result<CurveLaw> {
    let mut x = [17.8, 0.595];
    for _ in 0..30 {
        let law = CurveLaw { k0: x[0], w0: x[1] };
        let f = closure_defect(&law);
        if f[0].abs().max(f[1].abs()) < 1e-13 {
            return Ok(law);
        }
        let mut jac = [[0.0; 2]; 2];
        for j in 0..2 {
            let mut xp = x;
            let h = 1e-6 * x[j].abs().max(1.0);
            xp[j] += h;
            let fp = closure_defect(&CurveLaw { k0: xp[0], w0: xp[1] });
            jac[0][j] = (fp[0] - f[0]) / h;
            jac[1][j] = (fp[1] - f[1]) / h;
        }
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if det.abs() < 1e-14 {
            break;
        }
        x[0] -= (jac[1][1] * f[0] - jac[0][1] * f[1]) / det;
        x[1] -= (-jac[1][0] * f[0] + jac[0][0] * f[1]) / det;
    }
    let law = CurveLaw { k0: x[0], w0: x[1] };
    let f = closure_defect(&law);
    if f[0].abs().max(f[1].abs()) < 1e-11 {
        Ok(law)
    } else {
        Err(GeomError::BandSelfCheck { defect: f[0].abs().max(f[1].abs()) })
    }
}

/// Tabulated Möbius core curve with its rectifying developable in flat coordinates.
#[derive(Debug)]
pub struct MoebiusBand {
    law: CurveLaw,
    knots: Vec<State>,
    rot: Matrix3<f64>,
    disp: Vector3<f64>,
}

impl MoebiusBand {
    pub fn new() -> Result<Self> {
        let law = solve_closure()?;
        let p = 1.0 / SEGMENTS as f64;
        let h = p / STEPS as f64;
        let every = STEPS / KNOTS;
        let mut st = State { f: Matrix3::identity(), c: Vector3::zeros() };
        let mut knots = Vec::with_capacity(KNOTS + 1);
        knots.push(st);
        for i in 0..STEPS {
            st = rk4(&law, st, i as f64 * h, h);
            if (i + 1) % every == 0 {
                knots.push(st);
            }
        }
        let rot = st.f * flip();
        let disp = st.c;
        Ok(MoebiusBand { law, knots, rot, disp })
    }

    pub fn curve_parameters(&self) -> (f64, f64) {
        (self.law.k0, self.law.w0)
    }

    /// Frame and position at any arclength s.
    fn state(&self, s: f64) -> State {
        let p = 1.0 / SEGMENTS as f64;
        let j = (s / p).floor();
        let sigma = s - j * p;
        let spacing = p / KNOTS as f64;
        let k = ((sigma / spacing).floor() as usize).min(KNOTS - 1);
        let rest = sigma - k as f64 * spacing;
        let base = k as f64 * spacing;
        let mut st = self.knots[k];
        let sub = 2;
        for i in 0..sub {
            st = rk4(&self.law, st, base + i as f64 * rest / sub as f64, rest / sub as f64);
        }
        let s_flip = flip();
        if j >= 0.0 {
            for _ in 0..j as i64 {
                st = State { f: self.rot * st.f * s_flip, c: self.rot * st.c + self.disp };
            }
        } else {
            let rt = self.rot.transpose();
            for _ in 0..(-j) as i64 {
                st = State { f: rt * st.f * s_flip, c: rt * (st.c - self.disp) };
            }
        }
        st
    }

    /// Derivatives up to order 3 at s of the curve c and the ruling D = cos ω T + sin ω B.
    fn curve_jets(&self, s: f64) -> ([[f64; 4]; 3], [[f64; 4]; 3]) {
        let st = self.state(s);
        let sv = Jet::variable(1, 3, 0, s);
        let uni = |j: &Jet| [j.value(), j.d1(0), j.d2(0, 0), j.d3(0, 0, 0)];
        let kap = uni(&self.law.kappa(&sv));
        let om_j = self.law.omega(&sv);
        let tau = uni(&(&self.law.kappa(&sv) * &(om_j.cos() / om_j.sin())));
        let om_d = [uni(&om_j.cos()), uni(&om_j.sin())];
        let gen = |k: usize| Matrix3::new(0.0, -kap[k], 0.0, kap[k], 0.0, -tau[k], 0.0, tau[k], 0.0);
        let (o0, o1, o2) = (gen(0), gen(1), gen(2));
        let f0 = st.f;
        let f1 = f0 * o0;
        let f2 = f1 * o0 + f0 * o1;
        let f3 = f2 * o0 + f1 * o1 * 2.0 + f0 * o2;
        let fr = [f0, f1, f2, f3];
        let dvec = |k: usize| Vector3::new(om_d[0][k], 0.0, om_d[1][k]);
        let binom = [[1.0, 0.0, 0.0, 0.0], [1.0, 1.0, 0.0, 0.0], [1.0, 2.0, 1.0, 0.0], [1.0, 3.0, 3.0, 1.0]];
        let mut c = [[0.0; 4]; 3];
        let mut d = [[0.0; 4]; 3];
        for i in 0..3 {
            c[i][0] = st.c[i];
            for k in 1..4 {
                c[i][k] = fr[k - 1][(i, 0)];
            }
        }
        for k in 0..4 {
            let mut v = Vector3::zeros();
            for j in 0..=k {
                v += fr[j] * dvec(k - j) * binom[k][j];
            }
            for i in 0..3 {
                d[i][k] = v[i];
            }
        }
        (c, d)
    }

    /// The flat strip (x₀, x₁) mapped isometrically onto the developable.
    pub fn map(&self, x0: &Jet, x1: &Jet) -> [Jet; 3] {
        let (a, b) = (x0.value(), x1.value());
        let cot = |s: f64| {
            let om = self.law.omega_f(s);
            om.cos() / om.sin()
        };
        let slope = |s: f64| {
            let om = self.law.omega_f(s);
            1.0 - b * self.law.omega_prime(s) / (om.sin() * om.sin())
        };
        let mut s = a;
        for _ in 0..60 {
            let r = s + b * cot(s) - a;
            s -= r / slope(s);
            if r.abs() < 1e-15 {
                break;
            }
        }
        let dval = slope(s);
        let mut sj = Jet::constant(x0.n(), x0.order(), s);
        for _ in 0..=x0.order() {
            let om = self.law.omega(&sj);
            let r = &(&sj + &(x1 * &(om.cos() / om.sin()))) - x0;
            sj = &sj - &(r * (1.0 / dval));
        }
        let v = x1 / &self.law.omega(&sj).sin();
        let (c, d) = self.curve_jets(s);
        [0, 1, 2].map(|i| sj.compose(c[i]) + &v * &sj.compose(d[i]))
    }
}

enum Band {
    Moebius(MoebiusBand),
    Cylinder,
}

impl Band {
    fn map(&self, x0: &Jet, x1: &Jet) -> [Jet; 3] {
        match self {
            Band::Moebius(b) => b.map(x0, x1),
            Band::Cylinder => {
                let r = 1.0 / (2.0 * PI);
                let t = x0 * (2.0 * PI);
                [t.cos() * r, t.sin() * r, x1.clone()]
            }
        }
    }
}

/// max |β(x₀+1, ∓x₁) − β(x₀, x₁)| and the largest Gauss curvature / metric
/// defect of the band at quasirandom points of the strip.
fn band_self_check(band: &Band, flip_sign: f64, width: f64, samples: usize, seed: u64) -> (f64, f64) {
    let mut q = crate::sampling::ShiftedHalton::new(2, seed);
    let mut period = 0.0f64;
    let mut flat = 0.0f64;
    for _ in 0..samples {
        let t = q.next_point();
        let (a, b) = (t[0], (2.0 * t[1] - 1.0) * width);
        let p0 = band.map(&Jet::constant(2, 0, a), &Jet::constant(2, 0, b));
        let p1 = band.map(&Jet::constant(2, 0, a + 1.0), &Jet::constant(2, 0, flip_sign * b));
        let d = p0.iter().zip(&p1).map(|(x, y)| (x.value() - y.value()).powi(2)).sum::<f64>().sqrt();
        period = period.max(d);
        let x = Jet::seed(&[a, b], 2);
        let f = band.map(&x[0], &x[1]);
        let du = |i: usize| Vector3::new(f[0].d1(i), f[1].d1(i), f[2].d1(i));
        let ddu = |i: usize, j: usize| Vector3::new(f[0].d2(i, j), f[1].d2(i, j), f[2].d2(i, j));
        let (e0, e1) = (du(0), du(1));
        let gdef = (e0.dot(&e0) - 1.0).abs().max((e1.dot(&e1) - 1.0).abs()).max(e0.dot(&e1).abs());
        let nrm = e0.cross(&e1).normalize();
        let (l, m, nn) = (ddu(0, 0).dot(&nrm), ddu(0, 1).dot(&nrm), ddu(1, 1).dot(&nrm));
        let det_g = e0.dot(&e0) * e1.dot(&e1) - e0.dot(&e1).powi(2);
        let k = (l * nn - m * m) / det_g;
        flat = flat.max(k.abs()).max(gdef);
    }
    (period, flat)
}

fn make_band(p: &MoebiusParams) -> Result<(Band, f64)> {
    match p.band {
        BandKind::Moebius => {
            if p.epsilon > 0.1 {
                return Err(GeomError::InvalidInput(format!("strip half-width {} is too wide for the band", p.epsilon)));
            }
            Ok((Band::Moebius(MoebiusBand::new()?), -1.0))
        }
        BandKind::Cylinder => Ok((Band::Cylinder, 1.0)),
    }
}

/// (periodicity defect, flatness defect) of the band at `samples` quasirandom points.
pub fn band_defects(p: &MoebiusParams, samples: usize, seed: u64) -> Result<(f64, f64)> {
    let (band, flip_sign) = make_band(p)?;
    Ok(band_self_check(&band, flip_sign, p.epsilon, samples, seed))
}

pub fn moebius_composition(p: &MoebiusParams) -> Result<Atlas> {
    let [a1, a2, a3] = p.semi_axes;
    if !(a1 > 0.0 && a2 > 0.0 && a3 > 0.0) {
        return Err(GeomError::InvalidInput("ellipsoid semi-axes must be positive".into()));
    }
    if !(a1 < p.epsilon) {
        return Err(GeomError::InvalidInput(format!("first semi-axis {a1} must be below the strip half-width {}", p.epsilon)));
    }
    let (band, flip_sign) = make_band(p)?;
    let (period_defect, flat_defect) = band_self_check(&band, flip_sign, p.epsilon, 256, 17);
    if flat_defect > 1e-8 {
        return Err(GeomError::BandNotFlat { residual: flat_defect });
    }
    if period_defect > 1e-9 {
        return Err(GeomError::BandSelfCheck { defect: period_defect });
    }
    let band = Arc::new(band);
    let mut charts = Vec::new();
    for sign in [1.0, -1.0] {
        let (label, closed) = hemisphere(sign);
        let x0_factor = match p.band {
            BandKind::Moebius => Factor::interval(0.0, 1.0),
            BandKind::Cylinder => Factor::periodic(0.0, 1.0),
        };
        let region = Region::new(vec![x0_factor, Factor::ball(2, 1.0, closed)]);
        let deck = match p.band {
            BandKind::Moebius => {
                let mut dm = DeckMap::affine(
                    "flip",
                    nalgebra::DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -1.0, 1.0])),
                    nalgebra::DVector::from_vec(vec![1.0, 0.0, 0.0]),
                    0,
                );
                dm.orientation_reversing = true;
                dm
            }
            BandKind::Cylinder => DeckMap::translation(3, 0, 1.0, "loop"),
        };
        let b = Arc::clone(&band);
        let chart = Chart::new(label, 3, 5, vec![(-1.0, 2.0), (-1.6, 1.6), (-1.6, 1.6)], region, move |x| {
            let y = stereo(&x[1..3], sign);
            let [b0, b1, b2] = b.map(&x[0], &(&y[0] * a1));
            vec![b0, b1, b2, &y[1] * a2, &y[2] * a3]
        })
        .with_decks(vec![deck])
        .with_seed_grid(vec![48, 16, 16]);
        charts.push(chart);
    }
    let (name, field, orientable, betti) = match p.band {
        BandKind::Moebius => ("moebius", "Z/2", false, vec![1, 1, 1, 1]),
        BandKind::Cylinder => ("moebius-cyl", "Q", true, vec![1, 1, 1, 1]),
    };
    let curve = match band.as_ref() {
        Band::Moebius(b) => Some(b.curve_parameters()),
        Band::Cylinder => None,
    };
    Ok(Atlas {
        name: name.into(),
        n: 3,
        probes: Atlas::default_probes(&charts),
        charts,
        meta: ExampleMetadata {
            betti,
            field: field.into(),
            expected_tau: None,
            expected_strata: "K ∪ U1".into(),
            orientable,
            tight_target: 4.0,
            tight_convention: "sum of Betti numbers".into(),
            expected_wide: true,
        },
        leaf_slices: Vec::new(),
        params: json!({
            "epsilon": p.epsilon,
            "band": p.band,
            "semi_axes": p.semi_axes,
            "curve": curve.map(|(k0, w0)| json!({ "k0": k0, "w0": w0 })),
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closure_parameters_match_reference_integration() {
        let band = MoebiusBand::new().unwrap();
        let (k0, w0) = band.curve_parameters();
        // Independent high-accuracy integration gives k0 = 17.80041484, w0 = 0.59465636.
        assert!((k0 - 17.80041484).abs() < 1e-6, "k0 = {k0}");
        assert!((w0 - 0.59465636).abs() < 1e-7, "w0 = {w0}");
    }

    #[test]
    fn band_is_isometric_and_glues_with_a_flip() {
        let band = Band::Moebius(MoebiusBand::new().unwrap());
        let (period, flat) = band_self_check(&band, -1.0, 0.05, 256, 17);
        assert!(period < 1e-10, "period defect {period}");
        assert!(flat < 1e-9, "flatness defect {flat}");
    }

    #[test]
    fn band_jets_match_finite_differences() {
        let band = MoebiusBand::new().unwrap();
        let (a, b) = (0.37, 0.021);
        let x = Jet::seed(&[a, b], 3);
        let f = band.map(&x[0], &x[1]);
        let h = 1e-5;
        let val = |a: f64, b: f64| band.map(&Jet::constant(2, 0, a), &Jet::constant(2, 0, b)).map(|j| j.value());
        for i in 0..3 {
            let fd0 = (val(a + h, b)[i] - val(a - h, b)[i]) / (2.0 * h);
            let fd1 = (val(a, b + h)[i] - val(a, b - h)[i]) / (2.0 * h);
            assert!((fd0 - f[i].d1(0)).abs() < 1e-7);
            assert!((fd1 - f[i].d1(1)).abs() < 1e-7);
            let xh = Jet::seed(&[a + h, b], 3);
            let xm = Jet::seed(&[a - h, b], 3);
            let d2 = (band.map(&xh[0], &xh[1])[i].d2(0, 0) - band.map(&xm[0], &xm[1])[i].d2(0, 0)) / (2.0 * h);
            assert!((d2 - f[i].d3(0, 0, 0)).abs() < 1e-4 * (1.0 + d2.abs()));
        }
    }

    #[test]
    fn composition_is_deck_equivariant() {
        for band in [BandKind::Moebius, BandKind::Cylinder] {
            let atlas = moebius_composition(&MoebiusParams { band, ..Default::default() }).unwrap();
            let d = atlas.deck_equivariance(200, 3).unwrap();
            assert!(d < 1e-9, "{band:?}: {d}");
        }
    }
}
