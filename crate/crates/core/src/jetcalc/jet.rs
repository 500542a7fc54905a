//! Truncated multivariate Taylor arithmetic up to third order.
//!
//! A [`Jet`] stores the value of a function together with all of its partial
//! derivatives up to `order` (at most 3) in `n` variables. Mixed partials are
//! stored once, indexed by the sorted multi-index.

use std::ops::{Add, AddAssign, Div, Mul, MulAssign, Neg, Sub, SubAssign};
use std::sync::OnceLock;

use smallvec::SmallVec;

/// Largest number of base variables a jet may carry.
pub const MAX_VARS: usize = 6;
/// Highest derivative order carried.
pub const MAX_ORDER: usize = 3;

type Coeffs = SmallVec<[f64; 35]>;

struct Layout {
    n: usize,
    off2: usize,
    off3: usize,
    pair: [[usize; MAX_VARS]; MAX_VARS],
    triple: [[[usize; MAX_VARS]; MAX_VARS]; MAX_VARS],
    pairs: Vec<(usize, usize)>,
    triples: Vec<(usize, usize, usize)>,
}

impl Layout {
    fn build(n: usize) -> Self {
        let off2 = 1 + n;
        let off3 = off2 + n * (n + 1) / 2;
        let mut pair = [[0; MAX_VARS]; MAX_VARS];
        let mut triple = [[[0; MAX_VARS]; MAX_VARS]; MAX_VARS];
        let mut pairs = Vec::new();
        let mut triples = Vec::new();
        for i in 0..n {
            for j in i..n {
                let idx = off2 + pairs.len();
                pair[i][j] = idx;
                pair[j][i] = idx;
                pairs.push((i, j));
            }
        }
        for i in 0..n {
            for j in i..n {
                for k in j..n {
                    let idx = off3 + triples.len();
                    for (a, b, c) in [(i, j, k), (i, k, j), (j, i, k), (j, k, i), (k, i, j), (k, j, i)] {
                        triple[a][b][c] = idx;
                    }
                    triples.push((i, j, k));
                }
            }
        }
        Layout { n, off2, off3, pair, triple, pairs, triples }
    }

    fn len(&self, order: usize) -> usize {
        let n = self.n;
        match order {
            0 => 1,
            1 => 1 + n,
            2 => self.off3,
            _ => self.off3 + n * (n + 1) * (n + 2) / 6,
        }
    }
}

fn layout(n: usize) -> &'static Layout {
    static TABLES: OnceLock<Vec<Layout>> = OnceLock::new();
    assert!(n <= MAX_VARS, "jet supports at most {MAX_VARS} variables, got {n}");
    &TABLES.get_or_init(|| (0..=MAX_VARS).map(Layout::build).collect())[n]
}

/// Number of stored coefficients for `n` variables at the given order.
pub fn coeff_count(n: usize, order: usize) -> usize {
    layout(n).len(order.min(MAX_ORDER))
}

/// Value and partial derivatives (up to third order) of a scalar function.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    n: u8,
    order: u8,
    c: Coeffs,
}

impl Jet {
    /// A constant with all derivatives zero.
    pub fn constant(n: usize, order: usize, value: f64) -> Self {
        let order = order.min(MAX_ORDER);
        let mut c: Coeffs = SmallVec::from_elem(0.0, coeff_count(n, order));
        c[0] = value;
        Jet { n: n as u8, order: order as u8, c }
    }

    /// The coordinate function `x_i` evaluated at `value`.
    pub fn variable(n: usize, order: usize, i: usize, value: f64) -> Self {
        assert!(i < n);
        let mut j = Self::constant(n, order, value);
        if j.order >= 1 {
            j.c[1 + i] = 1.0;
        }
        j
    }

    /// Seeds one jet per coordinate of `u`.
    pub fn seed(u: &[f64], order: usize) -> Vec<Jet> {
        let n = u.len();
        u.iter().enumerate().map(|(i, &x)| Jet::variable(n, order, i, x)).collect()
    }

    /// A constant sharing the shape of `self`.
    pub fn lift(&self, value: f64) -> Self {
        Self::constant(self.n(), self.order(), value)
    }

    pub fn n(&self) -> usize {
        self.n as usize
    }

    pub fn order(&self) -> usize {
        self.order as usize
    }

    pub fn value(&self) -> f64 {
        self.c[0]
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.c
    }

    /// First partial ∂ᵢf (zero when not carried).
    pub fn d1(&self, i: usize) -> f64 {
        if self.order >= 1 {
            self.c[1 + i]
        } else {
            0.0
        }
    }

    /// Second partial ∂ᵢ∂ⱼf.
    pub fn d2(&self, i: usize, j: usize) -> f64 {
        if self.order >= 2 {
            self.c[layout(self.n()).pair[i][j]]
        } else {
            0.0
        }
    }

    /// Third partial ∂ᵢ∂ⱼ∂ₖf.
    pub fn d3(&self, i: usize, j: usize, k: usize) -> f64 {
        if self.order >= 3 {
            self.c[layout(self.n()).triple[i][j][k]]
        } else {
            0.0
        }
    }

    pub fn set_d1(&mut self, i: usize, v: f64) {
        assert!(self.order >= 1);
        self.c[1 + i] = v;
    }

    pub fn set_d2(&mut self, i: usize, j: usize, v: f64) {
        assert!(self.order >= 2);
        let idx = layout(self.n()).pair[i][j];
        self.c[idx] = v;
    }

    pub fn set_d3(&mut self, i: usize, j: usize, k: usize, v: f64) {
        assert!(self.order >= 3);
        let idx = layout(self.n()).triple[i][j][k];
        self.c[idx] = v;
    }

    /// Drops derivatives above `order`.
    pub fn truncate(&self, order: usize) -> Self {
        let order = order.min(self.order());
        let len = coeff_count(self.n(), order);
        Jet { n: self.n, order: order as u8, c: SmallVec::from_slice(&self.c[..len]) }
    }

    /// The jet of ∂ᵢf, one order lower.
    pub fn partial(&self, i: usize) -> Self {
        assert!(self.order >= 1, "cannot differentiate an order-0 jet");
        let n = self.n();
        let lay = layout(n);
        let order = self.order() - 1;
        let mut out = Jet::constant(n, order, self.c[1 + i]);
        if order >= 1 {
            for j in 0..n {
                out.c[1 + j] = self.c[lay.pair[i][j]];
            }
        }
        if order >= 2 {
            for (p, &(j, k)) in lay.pairs.iter().enumerate() {
                out.c[lay.off2 + p] = self.c[lay.triple[i][j][k]];
            }
        }
        out
    }

    fn check_shape(&self, other: &Jet) -> usize {
        assert_eq!(self.n, other.n, "jets over different variable counts");
        self.order.min(other.order) as usize
    }

    /// Composes a univariate function with derivatives `d = [φ, φ′, φ″, φ‴]` at the value of `self`.
    pub fn compose(&self, d: [f64; 4]) -> Self {
        let n = self.n();
        let lay = layout(n);
        let order = self.order();
        let mut out = Jet::constant(n, order, d[0]);
        let f = &self.c;
        if order >= 1 {
            for i in 0..n {
                out.c[1 + i] = d[1] * f[1 + i];
            }
        }
        if order >= 2 {
            for (p, &(i, j)) in lay.pairs.iter().enumerate() {
                let idx = lay.off2 + p;
                out.c[idx] = d[2] * f[1 + i] * f[1 + j] + d[1] * f[idx];
            }
        }
        if order >= 3 {
            for (t, &(i, j, k)) in lay.triples.iter().enumerate() {
                let idx = lay.off3 + t;
                let (fi, fj, fk) = (f[1 + i], f[1 + j], f[1 + k]);
                let (fij, fik, fjk) = (f[lay.pair[i][j]], f[lay.pair[i][k]], f[lay.pair[j][k]]);
                out.c[idx] = d[3] * fi * fj * fk + d[2] * (fij * fk + fik * fj + fjk * fi) + d[1] * f[idx];
            }
        }
        out
    }

    pub fn sin(&self) -> Self {
        let (s, c) = self.value().sin_cos();
        self.compose([s, c, -s, -c])
    }

    pub fn cos(&self) -> Self {
        let (s, c) = self.value().sin_cos();
        self.compose([c, -s, -c, s])
    }

    pub fn exp(&self) -> Self {
        let e = self.value().exp();
        self.compose([e; 4])
    }

    pub fn ln(&self) -> Self {
        let x = self.value();
        self.compose([x.ln(), 1.0 / x, -1.0 / (x * x), 2.0 / (x * x * x)])
    }

    pub fn sqrt(&self) -> Self {
        let x = self.value();
        let r = x.sqrt();
        self.compose([r, 0.5 / r, -0.25 / (r * x), 0.375 / (r * x * x)])
    }

    pub fn recip(&self) -> Self {
        let x = self.value();
        let r = 1.0 / x;
        self.compose([r, -r * r, 2.0 * r * r * r, -6.0 * r * r * r * r])
    }

    pub fn tan(&self) -> Self {
        let t = self.value().tan();
        let s = 1.0 + t * t;
        self.compose([t, s, 2.0 * t * s, 2.0 * s * (1.0 + 3.0 * t * t)])
    }

    pub fn atan(&self) -> Self {
        let x = self.value();
        let q = 1.0 / (1.0 + x * x);
        self.compose([x.atan(), q, -2.0 * x * q * q, (6.0 * x * x - 2.0) * q * q * q])
    }

    pub fn powi(&self, k: i32) -> Self {
        let x = self.value();
        let kf = k as f64;
        let term = |coef: f64, p: i32| if coef == 0.0 { 0.0 } else { coef * x.powi(p) };
        self.compose([x.powi(k), term(kf, k - 1), term(kf * (kf - 1.0), k - 2), term(kf * (kf - 1.0) * (kf - 2.0), k - 3)])
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        out.c.iter_mut().for_each(|x| *x *= s);
        out
    }
}

/// Euclidean inner product of two jet vectors.
pub fn dot(a: &[Jet], b: &[Jet]) -> Jet {
    assert_eq!(a.len(), b.len());
    let mut acc = &a[0] * &b[0];
    for (x, y) in a.iter().zip(b).skip(1) {
        acc += &(x * y);
    }
    acc
}

impl<'a> Add<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        let order = self.check_shape(rhs);
        let mut out = self.truncate(order);
        for (o, r) in out.c.iter_mut().zip(rhs.c.iter()) {
            *o += r;
        }
        out
    }
}

impl<'a> Sub<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        let order = self.check_shape(rhs);
        let mut out = self.truncate(order);
        for (o, r) in out.c.iter_mut().zip(rhs.c.iter()) {
            *o -= r;
        }
        out
    }
}

impl<'a> Mul<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        let order = self.check_shape(rhs);
        let n = self.n();
        let lay = layout(n);
        let (a, b) = (&self.c, &rhs.c);
        let mut out = Jet::constant(n, order, a[0] * b[0]);
        if order >= 1 {
            for i in 0..n {
                out.c[1 + i] = a[1 + i] * b[0] + a[0] * b[1 + i];
            }
        }
        if order >= 2 {
            for (p, &(i, j)) in lay.pairs.iter().enumerate() {
                let idx = lay.off2 + p;
                out.c[idx] = a[idx] * b[0] + a[1 + i] * b[1 + j] + a[1 + j] * b[1 + i] + a[0] * b[idx];
            }
        }
        if order >= 3 {
            for (t, &(i, j, k)) in lay.triples.iter().enumerate() {
                let idx = lay.off3 + t;
                let (ij, ik, jk) = (lay.pair[i][j], lay.pair[i][k], lay.pair[j][k]);
                out.c[idx] = a[idx] * b[0]
                    + a[ij] * b[1 + k]
                    + a[ik] * b[1 + j]
                    + a[jk] * b[1 + i]
                    + a[1 + i] * b[jk]
                    + a[1 + j] * b[ik]
                    + a[1 + k] * b[ij]
                    + a[0] * b[idx];
            }
        }
        out
    }
}

impl<'a> Div<&'a Jet> for &'a Jet {
    type Output = Jet;
    fn div(self, rhs: &Jet) -> Jet {
        self * &rhs.recip()
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr<Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                (&self).$m(&rhs)
            }
        }
        impl<'a> $tr<&'a Jet> for Jet {
            type Output = Jet;
            fn $m(self, rhs: &Jet) -> Jet {
                (&self).$m(rhs)
            }
        }
        impl<'a> $tr<Jet> for &'a Jet {
            type Output = Jet;
            fn $m(self, rhs: Jet) -> Jet {
                self.$m(&rhs)
            }
        }
    };
}

forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);
forward_owned!(Div, div);

impl AddAssign<&Jet> for Jet {
    fn add_assign(&mut self, rhs: &Jet) {
        *self = &*self + rhs;
    }
}

impl SubAssign<&Jet> for Jet {
    fn sub_assign(&mut self, rhs: &Jet) {
        *self = &*self - rhs;
    }
}

impl MulAssign<&Jet> for Jet {
    fn mul_assign(&mut self, rhs: &Jet) {
        *self = &*self * rhs;
    }
}

impl Add<f64> for &Jet {
    type Output = Jet;
    fn add(self, rhs: f64) -> Jet {
        let mut out = self.clone();
        out.c[0] += rhs;
        out
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: f64) -> Jet {
        self.c[0] += rhs;
        self
    }
}

impl Sub<f64> for &Jet {
    type Output = Jet;
    fn sub(self, rhs: f64) -> Jet {
        self + (-rhs)
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(self, rhs: f64) -> Jet {
        self + (-rhs)
    }
}

impl Mul<f64> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Mul<&Jet> for f64 {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        rhs.scale(self)
    }
}

impl Mul<Jet> for f64 {
    type Output = Jet;
    fn mul(self, rhs: Jet) -> Jet {
        rhs.scale(self)
    }
}

impl Sub<&Jet> for f64 {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        -rhs + self
    }
}

impl Sub<Jet> for f64 {
    type Output = Jet;
    fn sub(self, rhs: Jet) -> Jet {
        -rhs + self
    }
}

impl Add<&Jet> for f64 {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        rhs + self
    }
}

impl Add<Jet> for f64 {
    type Output = Jet;
    fn add(self, rhs: Jet) -> Jet {
        rhs + self
    }
}

impl Div<f64> for &Jet {
    type Output = Jet;
    fn div(self, rhs: f64) -> Jet {
        self.scale(1.0 / rhs)
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    fn div(self, rhs: f64) -> Jet {
        self.scale(1.0 / rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * (1.0 + b.abs())
    }

    #[test]
    fn polynomial_curve() {
        let u = Jet::variable(1, 3, 0, 1.0);
        let sq = &u * &u;
        assert_eq!(sq.value(), 1.0);
        assert_eq!(sq.d1(0), 2.0);
        assert_eq!(sq.d2(0, 0), 2.0);
        assert_eq!(sq.d3(0, 0, 0), 0.0);
        assert_eq!(u.d2(0, 0), 0.0);
    }

    #[test]
    fn affine_map_has_no_curvature_terms() {
        let x = Jet::seed(&[0.3, -1.2, 2.0], 3);
        let y = &(&x[0] * 2.0 - &x[1] * 0.5) + &(&x[2] * 3.0 + 7.0);
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(y.d2(i, j), 0.0);
                for k in 0..3 {
                    assert_eq!(y.d3(i, j, k), 0.0);
                }
            }
        }
        assert_eq!(y.d1(1), -0.5);
    }

    #[test]
    fn mixed_monomial() {
        let x = Jet::seed(&[1.5, -0.7], 3);
        // f = x^2 y^3
        let f = x[0].powi(2) * x[1].powi(3);
        let (a, b) = (1.5f64, -0.7f64);
        assert!(close(f.d2(0, 1), 2.0 * a * 3.0 * b * b, 1e-14));
        assert!(close(f.d3(0, 0, 1), 2.0 * 3.0 * b * b, 1e-14));
        assert!(close(f.d3(1, 0, 1), 2.0 * a * 6.0 * b, 1e-14));
        assert!(close(f.d3(1, 1, 1), a * a * 6.0, 1e-14));
    }

    #[test]
    fn elementary_functions_match_series() {
        let x = Jet::variable(1, 3, 0, 0.4);
        let s = x.sin();
        assert!(close(s.d3(0, 0, 0), -(0.4f64).cos(), 1e-15));
        let r = x.sqrt();
        assert!(close(r.d3(0, 0, 0), 0.375 * 0.4f64.powf(-2.5), 1e-13));
        let t = x.tan();
        let sec2 = 1.0 / 0.4f64.cos().powi(2);
        assert!(close(t.d2(0, 0), 2.0 * 0.4f64.tan() * sec2, 1e-13));
        let q = x.recip() * x.clone();
        assert!(close(q.value(), 1.0, 1e-15));
        assert!(q.d1(0).abs() < 1e-14 && q.d2(0, 0).abs() < 1e-13 && q.d3(0, 0, 0).abs() < 1e-12);
        let at = x.tan().atan();
        assert!(close(at.d1(0), 1.0, 1e-14) && at.d3(0, 0, 0).abs() < 1e-12);
        let e = x.ln().exp();
        assert!(close(e.d1(0), 1.0, 1e-14) && e.d2(0, 0).abs() < 1e-13);
    }

    #[test]
    fn partial_shifts_order() {
        let x = Jet::seed(&[0.2, 0.9], 3);
        let f = (&x[0] * &x[1]).sin();
        let fx = f.partial(0);
        assert_eq!(fx.order(), 2);
        assert!(close(fx.value(), f.d1(0), 0.0));
        assert!(close(fx.d1(1), f.d2(0, 1), 0.0));
        assert!(close(fx.d2(0, 1), f.d3(0, 0, 1), 0.0));
    }

    #[test]
    fn order_zero_is_value_only() {
        let x = Jet::seed(&[0.5, 2.0], 0);
        let f = (&x[0] * &x[1]).exp() + 1.0;
        assert_eq!(f.coeffs().len(), 1);
        assert!(close(f.value(), 1.0f64.exp() + 1.0, 1e-15));
    }

    #[test]
    fn mixed_order_truncates() {
        let a = Jet::variable(2, 3, 0, 1.0);
        let b = Jet::variable(2, 1, 1, 2.0);
        let p = &a * &b;
        assert_eq!(p.order(), 1);
        assert_eq!(p.d1(0), 2.0);
        assert_eq!(p.d1(1), 1.0);
    }
}
