//! The switched 3-sphere: two solid tori S²₊ × S¹ and S¹ × S²₋ joined along a
//! flat cylinder S¹ × [0, ε] × S¹ in ℝ⁵.
//!
//! The half-sphere S²₊ is a surface of revolution whose meridian has turning
//! angle θ with θ′ = c·ψ(s). Here ψ is a smooth step that vanishes to infinite
//! order at the boundary circle and equals 1 from s = δ on, so beyond δ the
//! meridian is an exact circular arc closing up smoothly at the apex.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;
use serde_json::json;

use crate::error::{GeomError, Result};
use crate::immersion::{Atlas, Chart, DeckMap, ExampleMetadata, Factor, LeafSlice, Probe, ProbeKind, Region};
use crate::jetcalc::Jet;
use crate::linalg::gauss_legendre_on;

#[derive(Clone, Debug, Serialize)]
pub struct ProfileSpec {
    /// Scale a of the exp(−a/s) flattening at the boundary.
    pub flatness: f64,
    /// Arclength δ over which the curvature switches on.
    pub blend: f64,
}

impl Default for ProfileSpec {
    fn default() -> Self {
        ProfileSpec { flatness: 0.1, blend: 1.0 }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct SwitchedParams {
    pub epsilon: f64,
    pub profile: ProfileSpec,
}

impl Default for SwitchedParams {
    fn default() -> Self {
        SwitchedParams { epsilon: 0.2, profile: ProfileSpec::default() }
    }
}

/// Knots per unit blend length for the tabulated meridian.
const KNOTS: usize = 4096;
const GL_NODES: usize = 8;

/// ψ and ψ′ of the smooth step on [0, δ].
fn step(a: f64, d: f64, s: f64) -> (f64, f64) {
    if s <= 0.0 {
        return (0.0, 0.0);
    }
    if s >= d {
        return (1.0, 0.0);
    }
    let x = a / s - a / (d - s);
    if x > 700.0 {
        return (0.0, 0.0);
    }
    let p = 1.0 / (1.0 + x.exp());
    (p, p * (1.0 - p) * (a / (s * s) + a / ((d - s) * (d - s))))
}

/// Meridian of S²₊ parametrized by arclength from the boundary circle (r = 1).
#[derive(Clone, Debug)]
pub struct Profile {
    a: f64,
    delta: f64,
    c: f64,
    spacing: f64,
    big_theta: Vec<f64>,
    r: Vec<f64>,
    z: Vec<f64>,
    /// Arclength of the apex.
    pub length: f64,
    pub cap_radius: f64,
    z_apex: f64,
}

impl Profile {
    pub fn new(spec: &ProfileSpec) -> Result<Self> {
        let (a, delta) = (spec.flatness, spec.blend);
        if !(a > 0.0 && delta > 0.0 && delta <= 1.5 && a < delta) {
            return Err(GeomError::InvalidInput(format!("profile needs 0 < flatness < blend <= 1.5, got a={a}, δ={delta}")));
        }
        let spacing = delta / KNOTS as f64;
        let psi = |s: f64| step(a, delta, s).0;
        let integral = |lo: f64, hi: f64, f: &dyn Fn(f64) -> f64| -> f64 {
            let (x, w) = gauss_legendre_on(GL_NODES, lo, hi);
            x.iter().zip(&w).map(|(x, w)| w * f(*x)).sum()
        };
        let mut big_theta = Vec::with_capacity(KNOTS + 1);
        big_theta.push(0.0);
        for k in 0..KNOTS {
            let lo = k as f64 * spacing;
            big_theta.push(big_theta[k] + integral(lo, lo + spacing, &psi));
        }
        // Θ at the outer quadrature nodes, reused while solving for c.
        let (gx, gw) = gauss_legendre_on(GL_NODES, 0.0, spacing);
        let mut nodes = Vec::with_capacity(KNOTS * GL_NODES);
        for k in 0..KNOTS {
            let lo = k as f64 * spacing;
            for (x, w) in gx.iter().zip(&gw) {
                nodes.push((big_theta[k] + integral(lo, lo + x, &psi), *w));
            }
        }
        let half = big_theta[KNOTS];
        let residual = |c: f64| -> f64 {
            let r_end = 1.0 - nodes.iter().map(|(t, w)| w * (c * t).sin()).sum::<f64>();
            c * r_end - (c * half).cos()
        };
        // The cap closes smoothly iff c·r(δ) = cos(θ(δ)); the sign change is bracketed by (0, π/(2Θ(δ))).
        let (mut lo, mut hi) = (1e-9, PI / (2.0 * half) - 1e-12);
        if residual(lo) >= 0.0 || residual(hi) <= 0.0 {
            return Err(GeomError::InvalidInput("profile parameters admit no smooth cap".into()));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if residual(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo < 1e-15 {
                break;
            }
        }
        let c = 0.5 * (lo + hi);
        let mut r = Vec::with_capacity(KNOTS + 1);
        let mut z = Vec::with_capacity(KNOTS + 1);
        r.push(1.0);
        z.push(0.0);
        for k in 0..KNOTS {
            let mut ds = 0.0;
            let mut dz = 0.0;
            for j in 0..GL_NODES {
                let (t, w) = nodes[k * GL_NODES + j];
                ds += w * (c * t).sin();
                dz += w * (c * t).cos();
            }
            r.push(r[k] - ds);
            z.push(z[k] + dz);
        }
        let rho = 1.0 / c;
        let theta_end = c * half;
        let length = delta + (PI / 2.0 - theta_end) * rho;
        let z_apex = z[KNOTS] + rho * (1.0 - theta_end.sin());
        let p = Profile { a, delta, c, spacing, big_theta, r, z, length, cap_radius: rho, z_apex };
        let defect = p.seam_defect();
        if defect > 1e-8 {
            return Err(GeomError::ProfileNotC2Matched { defect });
        }
        Ok(p)
    }

    pub fn curvature_scale(&self) -> f64 {
        self.c
    }

    pub fn blend(&self) -> f64 {
        self.delta
    }

    /// Height of the apex above the boundary circle.
    pub fn apex_height(&self) -> f64 {
        self.z_apex
    }

    /// Θ(s) = ∫₀ˢ ψ on [0, δ].
    fn big_theta_at(&self, s: f64) -> f64 {
        let k = ((s / self.spacing).floor() as usize).min(KNOTS - 1);
        let lo = k as f64 * self.spacing;
        let (x, w) = gauss_legendre_on(GL_NODES, lo, s);
        self.big_theta[k] + x.iter().zip(&w).map(|(x, w)| w * step(self.a, self.delta, *x).0).sum::<f64>()
    }

    /// θ, θ′, θ″.
    pub fn theta(&self, s: f64) -> [f64; 3] {
        if s <= 0.0 {
            [0.0; 3]
        } else if s < self.delta {
            let (p, dp) = step(self.a, self.delta, s);
            [self.c * self.big_theta_at(s), self.c * p, self.c * dp]
        } else {
            [self.c * self.big_theta[KNOTS] + self.c * (s - self.delta), self.c, 0.0]
        }
    }

    /// r and z from the tables (s in [0, δ]).
    fn tabulated(&self, s: f64) -> (f64, f64) {
        let k = ((s / self.spacing).floor() as usize).min(KNOTS - 1);
        let lo = k as f64 * self.spacing;
        let (x, w) = gauss_legendre_on(GL_NODES, lo, s);
        let (mut r, mut z) = (self.r[k], self.z[k]);
        for (x, w) in x.iter().zip(&w) {
            let t = self.c * self.big_theta_at(*x);
            r -= w * t.sin();
            z += w * t.cos();
        }
        (r, z)
    }

    /// Derivatives 0..=3 of r(s) and z(s).
    pub fn eval(&self, s: f64) -> ([f64; 4], [f64; 4]) {
        if s < 0.0 {
            return ([1.0, 0.0, 0.0, 0.0], [s, 1.0, 0.0, 0.0]);
        }
        let [t, t1, t2] = self.theta(s);
        let (r, z) = if s < self.delta {
            self.tabulated(s)
        } else {
            let q = self.c * (self.length - s);
            (self.cap_radius * q.sin(), self.z_apex - self.cap_radius * (1.0 - q.cos()))
        };
        let (st, ct) = t.sin_cos();
        ([r, -st, -ct * t1, st * t1 * t1 - ct * t2], [z, ct, -st * t1, -ct * t1 * t1 - st * t2])
    }

    /// Largest 2-jet mismatch of (r, z) between the tabulated meridian and the cap at s = δ.
    pub fn seam_defect(&self) -> f64 {
        let s = self.delta;
        let [t, t1, _] = [self.c * self.big_theta[KNOTS], self.c * step(self.a, self.delta, s).0, 0.0];
        let (r, z) = (self.r[KNOTS], self.z[KNOTS]);
        let q = self.c * (self.length - s);
        let (rc, zc) = (self.cap_radius * q.sin(), self.z_apex - self.cap_radius * (1.0 - q.cos()));
        let table = [r, -t.sin(), -t.cos() * t1, z, t.cos(), -t.sin() * t1];
        let tc = PI / 2.0 - q;
        let cap = [rc, -tc.sin(), -tc.cos() * self.c, zc, tc.cos(), -tc.sin() * self.c];
        table.iter().zip(&cap).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    /// Gauss curvature θ′ cos θ / r of the surface of revolution.
    pub fn gauss_curvature(&self, s: f64) -> f64 {
        let [t, t1, _] = self.theta(s);
        let (r, _) = self.eval(s);
        t1 * t.cos() / r[0]
    }

    /// Smallest s at which the Gauss curvature reaches `k` (it is increasing near the boundary).
    pub fn first_reaching(&self, k: f64) -> f64 {
        let (mut lo, mut hi) = (0.0, self.delta);
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if self.gauss_curvature(mid) < k {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    }
}

/// Sectional curvature threshold defining the interior probes.
const INTERIOR_CURVATURE: f64 = 0.012;

pub fn switched_sphere(p: &SwitchedParams) -> Result<Atlas> {
    let eps = p.epsilon;
    if !(eps >= 0.0 && eps.is_finite() && eps <= 2.0) {
        return Err(GeomError::InvalidInput(format!("ε must lie in [0, 2], got {eps}")));
    }
    let prof = Arc::new(Profile::new(&p.profile)?);
    let rho = prof.cap_radius;
    let (r_delta, _) = prof.eval(prof.blend());
    let r_cut = 0.8 * r_delta[0];
    let s_cut = prof.length - (r_cut / rho).asin() * rho;
    let lo = -eps / 2.0;
    let s_int = prof.first_reaching(INTERIOR_CURVATURE);
    let tau = 2.0 * PI;
    let lin = |s: &Jet, pr: &Profile| -> (Jet, Jet) {
        let (r, z) = pr.eval(s.value());
        (s.compose(r), s.compose(z))
    };
    let apex = move |x: &Jet, y: &Jet, pr: &Profile| -> Jet {
        let q = &(x * x) + &(y * y);
        (-q + rho * rho).sqrt() + (pr.apex_height() - rho)
    };
    let decks = |axes: &[usize]| axes.iter().map(|&ax| DeckMap::translation(3, ax, tau, &format!("turn{ax}"))).collect::<Vec<_>>();
    let s_domain = (lo - 0.05, s_cut + 0.5 * (prof.length - s_cut));
    let ang = (-3.0 * PI, 3.0 * PI);
    let region_side = Region::new(vec![
        Factor::pieces(lo, s_cut, &[0.0, 0.1 * prof.blend(), 0.3 * prof.blend(), prof.blend()]),
        Factor::periodic(0.0, tau),
        Factor::periodic(0.0, tau),
    ]);
    let region_cap = Region::new(vec![Factor::ball(2, r_cut, false), Factor::periodic(0.0, tau)]);
    let cap_box = (-1.3 * r_cut, 1.3 * r_cut);

    let pr = Arc::clone(&prof);
    let plus = Chart::new("N+", 3, 5, vec![s_domain, ang, ang], region_side.clone(), move |x| {
        let (r, z) = lin(&x[0], &pr);
        vec![&r * &x[1].cos(), &r * &x[1].sin(), z + eps, x[2].cos(), x[2].sin()]
    })
    .with_decks(decks(&[1, 2]))
    .with_seed_grid(vec![40, 16, 16]);
    let pr = Arc::clone(&prof);
    let plus_cap = Chart::new("N+ apex", 3, 5, vec![cap_box, cap_box, ang], region_cap.clone(), move |x| {
        let h = apex(&x[0], &x[1], &pr);
        vec![x[0].clone(), x[1].clone(), h + eps, x[2].cos(), x[2].sin()]
    })
    .with_decks(decks(&[2]))
    .with_seed_grid(vec![12, 12, 16]);
    let pr = Arc::clone(&prof);
    let minus = Chart::new("N-", 3, 5, vec![s_domain, ang, ang], region_side.clone(), move |x| {
        let (r, z) = lin(&x[0], &pr);
        vec![x[2].cos(), x[2].sin(), -z, &r * &x[1].cos(), &r * &x[1].sin()]
    })
    .with_decks(decks(&[1, 2]))
    .with_seed_grid(vec![40, 16, 16]);
    let pr = Arc::clone(&prof);
    let minus_cap = Chart::new("N- apex", 3, 5, vec![cap_box, cap_box, ang], region_cap.clone(), move |x| {
        let h = apex(&x[0], &x[1], &pr);
        vec![x[2].cos(), x[2].sin(), -h, x[0].clone(), x[1].clone()]
    })
    .with_decks(decks(&[2]))
    .with_seed_grid(vec![12, 12, 16]);
    let charts = vec![plus, plus_cap, minus, minus_cap];

    let mut probes = Vec::new();
    for (side, cap, name) in [(0usize, 1usize, "N+"), (2, 3, "N-")] {
        probes.push(Probe {
            chart: side,
            region: Region::new(vec![Factor::pieces(s_int, s_cut, &[prof.blend()]), Factor::periodic(0.0, tau), Factor::periodic(0.0, tau)]),
            kind: ProbeKind::Interior,
            label: format!("{name} interior"),
        });
        probes.push(Probe { chart: cap, region: region_cap.clone(), kind: ProbeKind::Interior, label: format!("{name} apex") });
        if eps > 0.0 {
            probes.push(Probe {
                chart: side,
                region: Region::new(vec![Factor::interval(lo, 0.0), Factor::periodic(0.0, tau), Factor::periodic(0.0, tau)]),
                kind: ProbeKind::Flat,
                label: format!("{name} cylinder half"),
            });
        }
    }
    let slice_side = Region::new(vec![Factor::pieces(lo, s_cut, &[0.0, 0.1 * prof.blend(), 0.3 * prof.blend(), prof.blend()]), Factor::periodic(0.0, tau)]);
    let slice_cap = Region::new(vec![Factor::ball(2, r_cut, false)]);
    let leaf_slices = vec![
        LeafSlice { chart: 0, axis: 2, value: 0.0, region: slice_side.clone(), period: tau, component: "N+".into() },
        LeafSlice { chart: 1, axis: 2, value: 0.0, region: slice_cap.clone(), period: tau, component: "N+".into() },
        LeafSlice { chart: 2, axis: 2, value: 0.0, region: slice_side, period: tau, component: "N-".into() },
        LeafSlice { chart: 3, axis: 2, value: 0.0, region: slice_cap, period: tau, component: "N-".into() },
    ];
    Ok(Atlas {
        name: "switched-s3".into(),
        n: 3,
        charts,
        meta: ExampleMetadata {
            betti: vec![1, 0, 0, 1],
            field: "Q".into(),
            expected_tau: Some(vec![1.0; 4]),
            expected_strata: "K ∪ U1: U1 with ranks (2,1) off the flat torus region".into(),
            orientable: true,
            tight_target: 4.0,
            tight_convention: "minimal Morse-number sum among wide immersions".into(),
            expected_wide: true,
        },
        probes,
        leaf_slices,
        params: json!({
            "epsilon": eps,
            "profile": p.profile,
            "curvature_scale": prof.curvature_scale(),
            "profile_length": prof.length,
            "interior_from": s_int,
            "apex_cut": s_cut,
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_profile_is_valid() {
        let p = Profile::new(&ProfileSpec::default()).unwrap();
        assert!(p.seam_defect() < 1e-10);
        // The apex lies on the axis and θ reaches π/2 there.
        let (r, _) = p.eval(p.length);
        assert!(r[0].abs() < 1e-12);
        assert!((p.theta(p.length)[0] - PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn gauss_bonnet_on_the_half_sphere() {
        // ∫K dA = 2π ∫ θ′ cos θ ds = 2π sin θ(S) = 2π for a geodesic boundary.
        let p = Profile::new(&ProfileSpec::default()).unwrap();
        let mut total = 0.0;
        let pieces = 200;
        for k in 0..pieces {
            let (a, b) = (k as f64 * p.length / pieces as f64, (k + 1) as f64 * p.length / pieces as f64);
            let (x, w) = gauss_legendre_on(8, a, b);
            for (x, w) in x.iter().zip(&w) {
                let [t, t1, _] = p.theta(*x);
                total += w * t1 * t.cos();
            }
        }
        assert!((2.0 * PI * total - 2.0 * PI).abs() < 1e-10, "{total}");
    }

    #[test]
    fn meridian_is_unit_speed_and_matches_its_derivative() {
        let p = Profile::new(&ProfileSpec::default()).unwrap();
        for s in [0.05, 0.31, 0.77, 0.999, 1.2] {
            let (r, z) = p.eval(s);
            assert!((r[1] * r[1] + z[1] * z[1] - 1.0).abs() < 1e-14);
            let h = 1e-6;
            let (rp, zp) = p.eval(s + h);
            let (rm, zm) = p.eval(s - h);
            assert!(((rp[0] - rm[0]) / (2.0 * h) - r[1]).abs() < 1e-8);
            assert!(((zp[0] - zm[0]) / (2.0 * h) - z[1]).abs() < 1e-8);
        }
    }
}
