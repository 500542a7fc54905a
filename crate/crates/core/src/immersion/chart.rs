//! Parametrized immersion pieces, their fundamental regions and deck maps.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::jetcalc::Jet;
use crate::linalg::gauss_legendre_on;

/// A chart map acting on jets, so one closure yields values and derivatives.
pub type MapFn = dyn Fn(&[Jet]) -> Vec<Jet> + Send + Sync;

/// One factor of a product region.
#[derive(Clone, Debug, Serialize)]
pub enum Factor {
    /// `[lo, hi)` with optional interior breakpoints for piecewise quadrature.
    Interval { lo: f64, hi: f64, breaks: Vec<f64>, periodic: bool },
    /// Euclidean ball of radius `radius` about the origin in `dim` coordinates.
    Ball { dim: usize, radius: f64, closed: bool },
}

impl Factor {
    pub fn interval(lo: f64, hi: f64) -> Self {
        Factor::Interval { lo, hi, breaks: Vec::new(), periodic: false }
    }

    pub fn periodic(lo: f64, hi: f64) -> Self {
        Factor::Interval { lo, hi, breaks: Vec::new(), periodic: true }
    }

    pub fn pieces(lo: f64, hi: f64, breaks: &[f64]) -> Self {
        Factor::Interval { lo, hi, breaks: breaks.to_vec(), periodic: false }
    }

    pub fn ball(dim: usize, radius: f64, closed: bool) -> Self {
        Factor::Ball { dim, radius, closed }
    }

    pub fn dim(&self) -> usize {
        match self {
            Factor::Interval { .. } => 1,
            Factor::Ball { dim, .. } => *dim,
        }
    }

    fn contains(&self, x: &[f64]) -> bool {
        match self {
            Factor::Interval { lo, hi, .. } => x[0] >= *lo && x[0] < *hi,
            Factor::Ball { radius, closed, .. } => {
                let r2: f64 = x.iter().map(|v| v * v).sum();
                if *closed {
                    r2 <= radius * radius
                } else {
                    r2 < radius * radius
                }
            }
        }
    }

    /// Maps a point of the unit cube onto the factor, uniformly in coordinates.
    fn from_unit(&self, t: &[f64]) -> Vec<f64> {
        match self {
            Factor::Interval { lo, hi, .. } => vec![lo + (hi - lo) * t[0]],
            Factor::Ball { dim, radius, .. } => match dim {
                1 => vec![radius * (2.0 * t[0] - 1.0)],
                2 => {
                    let r = radius * t[0].sqrt();
                    let a = 2.0 * PI * t[1];
                    vec![r * a.cos(), r * a.sin()]
                }
                3 => {
                    let r = radius * t[0].cbrt();
                    let z = 2.0 * t[1] - 1.0;
                    let s = (1.0 - z * z).max(0.0).sqrt();
                    let a = 2.0 * PI * t[2];
                    vec![r * s * a.cos(), r * s * a.sin(), r * z]
                }
                _ => {
                    // Radial law with a crude direction map; adequate for sampling.
                    let r = radius * t[0].powf(1.0 / *dim as f64);
                    let mut v: Vec<f64> = (0..*dim).map(|i| (2.0 * PI * t[(i + 1) % dim]).cos() + 1e-3 * i as f64).collect();
                    let nv = v.iter().map(|x| x * x).sum::<f64>().sqrt();
                    v.iter_mut().for_each(|x| *x *= r / nv);
                    v
                }
            },
        }
    }

    /// Tensor quadrature nodes with `m` points per axis.
    fn rule(&self, m: usize) -> Vec<(Vec<f64>, f64)> {
        let m = m.max(1);
        match self {
            Factor::Interval { lo, hi, breaks, periodic } => {
                if *periodic {
                    let h = (hi - lo) / m as f64;
                    (0..m).map(|k| (vec![lo + (k as f64 + 0.5) * h], h)).collect()
                } else {
                    let mut cuts = vec![*lo];
                    cuts.extend(breaks.iter().copied().filter(|b| b > lo && b < hi));
                    cuts.push(*hi);
                    let mut out = Vec::new();
                    for w in cuts.windows(2) {
                        let (x, wt) = gauss_legendre_on(m, w[0], w[1]);
                        out.extend(x.into_iter().zip(wt).map(|(x, w)| (vec![x], w)));
                    }
                    out
                }
            }
            Factor::Ball { dim, radius, .. } => {
                let (rs, rw) = gauss_legendre_on(m, 0.0, *radius);
                let dirs = sphere_rule(*dim, m);
                let mut out = Vec::new();
                for (r, w) in rs.iter().zip(&rw) {
                    let jac = r.powi(*dim as i32 - 1);
                    for (d, dw) in &dirs {
                        out.push((d.iter().map(|x| x * r).collect(), w * jac * dw));
                    }
                }
                out
            }
        }
    }
}

/// Product rule on the unit sphere S^{d-1} with `m` nodes per angular axis.
fn sphere_rule(d: usize, m: usize) -> Vec<(Vec<f64>, f64)> {
    match d {
        1 => vec![(vec![1.0], 1.0), (vec![-1.0], 1.0)],
        _ => {
            // Azimuth on S¹ by the trapezoid rule.
            let ma = 2 * m;
            let mut cur: Vec<(Vec<f64>, f64)> = (0..ma)
                .map(|k| {
                    let a = 2.0 * PI * (k as f64 + 0.5) / ma as f64;
                    (vec![a.cos(), a.sin()], 2.0 * PI / ma as f64)
                })
                .collect();
            // Lift S^{k-1} to S^k through the height z, with weight (1−z²)^{(k−2)/2}
            // (polynomial, so exact, on S²).
            for k in 2..d {
                let (zs, zw) = gauss_legendre_on(m, -1.0, 1.0);
                let mut next = Vec::new();
                for (z, w) in zs.iter().zip(&zw) {
                    let (s, c) = ((1.0 - z * z).sqrt(), *z);
                    let jac = s.powi(k as i32 - 2);
                    for (p, pw) in &cur {
                        let mut q: Vec<f64> = p.iter().map(|x| x * s).collect();
                        q.push(c);
                        next.push((q, w * jac * pw));
                    }
                }
                cur = next;
            }
            cur
        }
    }
}

/// Product of factors laid out over consecutive coordinates.
#[derive(Clone, Debug, Serialize)]
pub struct Region {
    pub factors: Vec<Factor>,
}

impl Region {
    pub fn new(factors: Vec<Factor>) -> Self {
        Region { factors }
    }

    pub fn dim(&self) -> usize {
        self.factors.iter().map(Factor::dim).sum()
    }

    pub fn contains(&self, u: &[f64]) -> bool {
        let mut off = 0;
        for f in &self.factors {
            let d = f.dim();
            if !f.contains(&u[off..off + d]) {
                return false;
            }
            off += d;
        }
        true
    }

    /// Maps `t ∈ [0,1)^dim` into the region.
    pub fn from_unit(&self, t: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        let mut off = 0;
        for f in &self.factors {
            let d = f.dim();
            out.extend(f.from_unit(&t[off..off + d]));
            off += d;
        }
        out
    }

    /// Tensor-product quadrature (Gauss–Legendre, trapezoid for periodic
    /// axes, polar products on balls) with `m` nodes per axis.
    pub fn quadrature(&self, m: usize) -> Vec<(Vec<f64>, f64)> {
        let mut acc: Vec<(Vec<f64>, f64)> = vec![(Vec::new(), 1.0)];
        for f in &self.factors {
            let rule = f.rule(m);
            let mut next = Vec::with_capacity(acc.len() * rule.len());
            for (p, w) in &acc {
                for (q, v) in &rule {
                    let mut x = p.clone();
                    x.extend_from_slice(q);
                    next.push((x, w * v));
                }
            }
            acc = next;
        }
        acc
    }

    /// Coordinate-space diameter bound.
    pub fn diameter(&self) -> f64 {
        self.factors
            .iter()
            .map(|f| match f {
                Factor::Interval { lo, hi, .. } => (hi - lo).powi(2),
                Factor::Ball { radius, .. } => (2.0 * radius).powi(2),
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Bounding box of the region.
    pub fn bounds(&self) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for f in &self.factors {
            match f {
                Factor::Interval { lo, hi, .. } => out.push((*lo, *hi)),
                Factor::Ball { dim, radius, .. } => out.extend(std::iter::repeat_n((-radius, *radius), *dim)),
            }
        }
        out
    }

    /// Axes that are periodic, with their period.
    pub fn periodic_axes(&self) -> Vec<Option<f64>> {
        let mut out = Vec::new();
        for f in &self.factors {
            match f {
                Factor::Interval { lo, hi, periodic, .. } => out.push(periodic.then_some(hi - lo)),
                Factor::Ball { dim, .. } => out.extend(std::iter::repeat_n(None, *dim)),
            }
        }
        out
    }
}

/// Affine self-map of a chart domain, u ↦ Lu + b, shifting one axis by a period.
#[derive(Clone, Debug, Serialize)]
pub struct DeckMap {
    pub label: String,
    #[serde(skip)]
    pub linear: DMatrix<f64>,
    #[serde(skip)]
    pub offset: DVector<f64>,
    /// The coordinate advanced by one period.
    pub axis: usize,
    pub isometry: bool,
    pub orientation_reversing: bool,
}

impl DeckMap {
    /// Pure translation of `axis` by `period`.
    pub fn translation(n: usize, axis: usize, period: f64, label: &str) -> Self {
        let mut offset = DVector::zeros(n);
        offset[axis] = period;
        DeckMap { label: label.to_string(), linear: DMatrix::identity(n, n), offset, axis, isometry: true, orientation_reversing: false }
    }

    pub fn affine(label: &str, linear: DMatrix<f64>, offset: DVector<f64>, axis: usize) -> Self {
        let orientation_reversing = linear.determinant() < 0.0;
        DeckMap { label: label.to_string(), linear, offset, axis, isometry: true, orientation_reversing }
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let v = &self.linear * DVector::from_column_slice(u) + &self.offset;
        v.iter().copied().collect()
    }

    pub fn apply_inverse(&self, u: &[f64]) -> Vec<f64> {
        let inv = self.linear.clone().try_inverse().expect("deck maps are invertible");
        let v = inv * (DVector::from_column_slice(u) - &self.offset);
        v.iter().copied().collect()
    }

    pub fn period(&self) -> f64 {
        self.offset[self.axis]
    }
}

/// A parametrized piece of an immersion f: U ⊂ ℝⁿ → ℝⁿ⁺².
#[derive(Clone)]
pub struct Chart {
    pub label: String,
    pub n: usize,
    pub ambient: usize,
    /// Axis-aligned box on which the map may be evaluated.
    pub domain: Vec<(f64, f64)>,
    /// Half-open fundamental region; the regions of all tiling charts
    /// partition the manifold up to measure zero.
    pub region: Region,
    pub decks: Vec<DeckMap>,
    /// Whether this chart takes part in integration and critical point counts.
    pub tiles: bool,
    /// Grid resolution per axis used to seed critical point searches.
    pub seed_grid: Vec<usize>,
    map: Arc<MapFn>,
}

impl fmt::Debug for Chart {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Chart")
            .field("label", &self.label)
            .field("n", &self.n)
            .field("ambient", &self.ambient)
            .field("domain", &self.domain)
            .finish_non_exhaustive()
    }
}

impl Chart {
    pub fn new<F>(label: &str, n: usize, ambient: usize, domain: Vec<(f64, f64)>, region: Region, map: F) -> Self
    where
        F: Fn(&[Jet]) -> Vec<Jet> + Send + Sync + 'static,
    {
        assert_eq!(domain.len(), n);
        assert_eq!(region.dim(), n);
        Chart { label: label.to_string(), n, ambient, domain, region, decks: Vec::new(), tiles: true, seed_grid: vec![24; n], map: Arc::new(map) }
    }

    pub fn with_decks(mut self, decks: Vec<DeckMap>) -> Self {
        self.decks = decks;
        self
    }

    pub fn with_seed_grid(mut self, grid: Vec<usize>) -> Self {
        assert_eq!(grid.len(), self.n);
        self.seed_grid = grid;
        self
    }

    pub fn in_domain(&self, u: &[f64]) -> bool {
        u.len() == self.n && u.iter().zip(&self.domain).all(|(x, (lo, hi))| x >= lo && x <= hi && x.is_finite())
    }

    /// Jets of every ambient coordinate at `u`, up to `order`.
    pub fn eval(&self, u: &[f64], order: usize) -> Result<Vec<Jet>> {
        if !self.in_domain(u) {
            return Err(GeomError::DomainViolation { chart: self.label.clone(), point: u.to_vec() });
        }
        let out = self.eval_unchecked(u, order);
        // A chart formula evaluated where it has no real value is outside its domain too.
        if out.iter().any(|j| !j.coeffs().iter().all(|c| c.is_finite())) {
            return Err(GeomError::DomainViolation { chart: self.label.clone(), point: u.to_vec() });
        }
        Ok(out)
    }

    pub fn eval_unchecked(&self, u: &[f64], order: usize) -> Vec<Jet> {
        let out = (self.map)(&Jet::seed(u, order));
        debug_assert_eq!(out.len(), self.ambient);
        out
    }

    /// Applies the map to arbitrary input jets (for composition checks).
    pub fn map_jets(&self, x: &[Jet]) -> Vec<Jet> {
        (self.map)(x)
    }

    /// The image point f(u).
    pub fn point(&self, u: &[f64]) -> Result<Vec<f64>> {
        Ok(self.eval(u, 0)?.iter().map(Jet::value).collect())
    }

    /// Reduces `u` into the fundamental region along deck-translated axes.
    /// Returns `None` if the reduced point is still outside the region.
    pub fn reduce(&self, u: &[f64]) -> Option<Vec<f64>> {
        let mut v = u.to_vec();
        let bounds = self.region.bounds();
        for deck in &self.decks {
            let (lo, hi) = bounds[deck.axis];
            let mut guard = 0;
            while v[deck.axis] >= hi && guard < 64 {
                v = deck.apply_inverse(&v);
                guard += 1;
            }
            while v[deck.axis] < lo && guard < 128 {
                v = deck.apply(&v);
                guard += 1;
            }
        }
        self.region.contains(&v).then_some(v)
    }
}

/// Expected topology and verdicts attached to an example.
#[derive(Clone, Debug, Serialize)]
pub struct ExampleMetadata {
    /// Betti numbers b₀..bₙ over `field`.
    pub betti: Vec<u32>,
    pub field: String,
    pub expected_tau: Option<Vec<f64>>,
    pub expected_strata: String,
    pub orientable: bool,
    /// Target for Σ τ_k in the tightness verdict.
    pub tight_target: f64,
    pub tight_convention: String,
    /// Whether the example is expected to be wide.
    pub expected_wide: bool,
}

impl ExampleMetadata {
    pub fn euler_characteristic(&self) -> i64 {
        self.betti.iter().enumerate().map(|(k, &b)| if k % 2 == 0 { b as i64 } else { -(b as i64) }).sum()
    }
}

/// What a sampling region is expected to contain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ProbeKind {
    Generic,
    /// Open interior of a nonflat stratum.
    Interior,
    /// Flat points.
    Flat,
}

/// A sampling region inside one chart.
#[derive(Clone, Debug, Serialize)]
pub struct Probe {
    pub chart: usize,
    pub region: Region,
    pub kind: ProbeKind,
    pub label: String,
}

/// Transversal cross-section to the nullity leaves, used by the leaf formula.
#[derive(Clone, Debug, Serialize)]
pub struct LeafSlice {
    pub chart: usize,
    /// Coordinate held fixed on the slice.
    pub axis: usize,
    pub value: f64,
    /// Region over the remaining n−1 coordinates.
    pub region: Region,
    /// Arclength after which every leaf returns.
    pub period: f64,
    pub component: String,
}

/// An immersion given by charts, with metadata.
#[derive(Clone, Debug)]
pub struct Atlas {
    pub name: String,
    pub n: usize,
    pub charts: Vec<Chart>,
    pub meta: ExampleMetadata,
    pub probes: Vec<Probe>,
    pub leaf_slices: Vec<LeafSlice>,
    pub params: serde_json::Value,
}

impl Atlas {
    pub fn ambient(&self) -> usize {
        self.n + 2
    }

    /// Default probes: the fundamental regions of all tiling charts.
    pub fn default_probes(charts: &[Chart]) -> Vec<Probe> {
        charts
            .iter()
            .enumerate()
            .filter(|(_, c)| c.tiles)
            .map(|(i, c)| Probe { chart: i, region: c.region.clone(), kind: ProbeKind::Generic, label: c.label.clone() })
            .collect()
    }

    /// Largest ‖f(τu) − f(u)‖ over deck maps at quasirandom samples per chart.
    pub fn deck_equivariance(&self, samples: usize, seed: u64) -> Result<f64> {
        let mut worst = 0.0f64;
        for chart in &self.charts {
            if chart.decks.is_empty() {
                continue;
            }
            let mut q = crate::sampling::ShiftedHalton::new(chart.n, seed);
            for _ in 0..samples {
                let u = chart.region.from_unit(&q.next_point());
                let fu = chart.point(&u)?;
                for deck in &chart.decks {
                    let tu = deck.apply(&u);
                    if !chart.in_domain(&tu) {
                        continue;
                    }
                    let ft = chart.point(&tu)?;
                    let d = fu.iter().zip(&ft).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                    worst = worst.max(d);
                }
            }
        }
        Ok(worst)
    }

    /// Largest defect ‖τ*g − g‖ of the induced metric under each deck map.
    pub fn deck_isometry_defect(&self, samples: usize, seed: u64) -> Result<f64> {
        let mut worst = 0.0f64;
        for chart in &self.charts {
            let mut q = crate::sampling::ShiftedHalton::new(chart.n, seed ^ 0x5a5a);
            for _ in 0..samples {
                let u = chart.region.from_unit(&q.next_point());
                for deck in &chart.decks {
                    let tu = deck.apply(&u);
                    if !chart.in_domain(&tu) {
                        continue;
                    }
                    let g0 = metric_at(chart, &u)?;
                    let g1 = metric_at(chart, &tu)?;
                    let pulled = deck.linear.transpose() * g1 * &deck.linear;
                    worst = worst.max((pulled - &g0).abs().max() / (1.0 + g0.abs().max()));
                }
            }
        }
        Ok(worst)
    }
}

fn metric_at(chart: &Chart, u: &[f64]) -> Result<DMatrix<f64>> {
    let jets = chart.eval(u, 1)?;
    let n = chart.n;
    Ok(DMatrix::from_fn(n, n, |i, j| jets.iter().map(|f| f.d1(i) * f.d1(j)).sum()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ball_quadrature_volume() {
        for (d, exact) in [(2usize, PI), (3, 4.0 * PI / 3.0)] {
            let r = Region::new(vec![Factor::ball(d, 1.0, true)]);
            let v: f64 = r.quadrature(8).iter().map(|(_, w)| w).sum();
            assert!((v - exact).abs() < 1e-12, "d={d} v={v}");
        }
        // ∫_{B³} |x|² = 4π/5
        let r = Region::new(vec![Factor::ball(3, 1.0, true)]);
        let v: f64 = r.quadrature(6).iter().map(|(x, w)| w * x.iter().map(|t| t * t).sum::<f64>()).sum();
        assert!((v - 4.0 * PI / 5.0).abs() < 1e-12);
    }

    #[test]
    fn piecewise_interval_and_periodic() {
        let r = Region::new(vec![Factor::pieces(0.0, 2.0, &[0.5, 1.0]), Factor::periodic(0.0, 2.0 * PI)]);
        let v: f64 = r.quadrature(5).iter().map(|(x, w)| w * x[0] * x[0] * x[1].cos().powi(2)).sum();
        assert!((v - 8.0 / 3.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn half_open_membership() {
        let r = Region::new(vec![Factor::interval(0.0, 1.0), Factor::ball(2, 1.0, false)]);
        assert!(r.contains(&[0.0, 0.5, 0.0]));
        assert!(!r.contains(&[1.0, 0.5, 0.0]));
        assert!(!r.contains(&[0.5, 1.0, 0.0]));
    }

    #[test]
    fn deck_reduction() {
        let chart = Chart::new("line", 1, 3, vec![(-10.0, 10.0)], Region::new(vec![Factor::interval(0.0, 1.0)]), |x| {
            vec![x[0].clone(), x[0].lift(0.0), x[0].lift(0.0)]
        })
        .with_decks(vec![DeckMap::translation(1, 0, 1.0, "shift")]);
        let r = chart.reduce(&[3.25]).unwrap();
        assert!((r[0] - 0.25).abs() < 1e-14);
        let r = chart.reduce(&[-0.75]).unwrap();
        assert!((r[0] - 0.25).abs() < 1e-14);
    }
}
