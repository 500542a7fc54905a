//! Pointwise strata: relative nullity set and the sets U_k.

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::immersion::{FundamentalForms, ShapeFrame};
use crate::jetcalc::curvature::two_form_pairs;
use crate::linalg::{null_space, singular_values};

/// Stratum of a point.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Stratum {
    /// ν = dim(ker A ∩ ker B) ≥ 1.
    RelNullity(usize),
    /// rank A = n − k, rank B = k with complementary kernels.
    U(usize),
    /// Trivial kernel intersection with rank A + rank B > n.
    Strict { rank_a: usize, rank_b: usize },
}

#[derive(Clone, Debug, Serialize)]
pub struct PointClass {
    pub stratum: Stratum,
    pub flat: bool,
    pub locally_wide_ok: bool,
    pub ranks: (usize, usize),
    /// rank B = 0 with A nonsingular: excluded from wide immersions.
    pub u0_like: bool,
}

/// The frame used for classification: edge aligned, ordered so rank B ≤ rank A.
#[derive(Clone, Debug)]
pub struct OrderedFrame {
    pub frame: ShapeFrame,
    pub rank_a: usize,
    pub rank_b: usize,
    pub kernel_a: DMatrix<f64>,
    pub kernel_b: DMatrix<f64>,
}

/// Numerical rank with the decade guard around `tol·scale`.
pub fn guarded_rank(m: &DMatrix<f64>, rank_tol: f64, scale: f64) -> Result<usize> {
    let thr = rank_tol * scale;
    let s = singular_values(m);
    for &v in &s {
        if v > 0.1 * thr && v < 10.0 * thr {
            return Err(GeomError::AmbiguousRank { value: v, threshold: thr });
        }
    }
    Ok(s.iter().filter(|&&v| v > thr).count())
}

pub fn ordered_frame(frame: &ShapeFrame, forms: &FundamentalForms, rank_tol: f64) -> Result<OrderedFrame> {
    let mut fr = frame.edge_aligned(forms);
    let scale = forms.alpha_norm2().sqrt();
    if fr.totally_geodesic {
        let n = forms.n();
        return Ok(OrderedFrame { frame: fr, rank_a: 0, rank_b: 0, kernel_a: DMatrix::identity(n, n), kernel_b: DMatrix::identity(n, n) });
    }
    let mut ra = guarded_rank(&fr.a, rank_tol, scale)?;
    let mut rb = guarded_rank(&fr.b, rank_tol, scale)?;
    if rb > ra {
        fr = fr.swapped();
        std::mem::swap(&mut ra, &mut rb);
    }
    let thr = rank_tol * scale;
    let kernel_a = null_space(&fr.a, thr);
    let kernel_b = null_space(&fr.b, thr);
    Ok(OrderedFrame { frame: fr, rank_a: ra, rank_b: rb, kernel_a, kernel_b })
}

/// Λ²A + Λ²B on the 2-form basis {eₐ∧e_b : a<b}.
pub fn gauss_operator(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let pairs = two_form_pairs(a.nrows());
    DMatrix::from_fn(pairs.len(), pairs.len(), |p, q| {
        let (i, j) = pairs[p];
        let (k, l) = pairs[q];
        a[(i, k)] * a[(j, l)] - a[(i, l)] * a[(j, k)] + b[(i, k)] * b[(j, l)] - b[(i, l)] * b[(j, k)]
    })
}

/// Classifies a point from its Weinstein frame.
pub fn classify_point(frame: &ShapeFrame, forms: &FundamentalForms, rank_tol: f64) -> Result<PointClass> {
    let n = forms.n();
    let ord = ordered_frame(frame, forms, rank_tol)?;
    let scale = forms.alpha_norm2().sqrt();
    if ord.frame.totally_geodesic {
        return Ok(PointClass { stratum: Stratum::RelNullity(n), flat: true, locally_wide_ok: true, ranks: (0, 0), u0_like: false });
    }
    let (ra, rb) = (ord.rank_a, ord.rank_b);
    let sum = &ord.frame.a + &ord.frame.b;
    let nu = n - guarded_rank(&sum, rank_tol, scale)?;
    let gauss = gauss_operator(&ord.frame.a, &ord.frame.b);
    let flat = gauss.amax() <= rank_tol * scale * scale;
    let a_nonzero = ra > 0;
    let b_nonzero = rb > 0;
    let (stratum, wide) = if nu >= 1 {
        (Stratum::RelNullity(nu), true)
    } else if ra + rb == n {
        (Stratum::U(rb), a_nonzero && b_nonzero)
    } else {
        (Stratum::Strict { rank_a: ra, rank_b: rb }, false)
    };
    Ok(PointClass { stratum, flat, locally_wide_ok: wide, ranks: (ra, rb), u0_like: rb == 0 && ra == n })
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DVector;

    #[test]
    fn gauss_operator_of_diagonal_pair() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 0.0]));
        let b = DMatrix::from_diagonal(&DVector::from_vec(vec![0.0, 0.0, 3.0]));
        let g = gauss_operator(&a, &b);
        // pairs (0,1),(0,2),(1,2): only e₀∧e₁ is curved.
        assert_eq!(g[(0, 0)], 2.0);
        assert_eq!(g[(1, 1)], 0.0);
        assert_eq!(g[(2, 2)], 0.0);
    }

    #[test]
    fn ambiguous_rank_is_reported() {
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1e-7]));
        assert!(matches!(guarded_rank(&a, 1e-7, 1.0), Err(GeomError::AmbiguousRank { .. })));
        let a = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 1e-3]));
        assert_eq!(guarded_rank(&a, 1e-7, 1.0).unwrap(), 2);
    }
}
