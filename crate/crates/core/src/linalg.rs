//! Small dense linear-algebra helpers shared by the geometry modules.

use nalgebra::{DMatrix, DVector, SymmetricEigen, SVD};

/// Iteration cap for the iterative decompositions; nalgebra loops forever on NaN.
const MAX_ITER: usize = 10_000;

/// SVD that returns `None` on non-finite input or non-convergence.
pub fn svd(m: &DMatrix<f64>, u: bool, v: bool) -> Option<SVD<f64, nalgebra::Dyn, nalgebra::Dyn>> {
    if !m.iter().all(|x| x.is_finite()) {
        return None;
    }
    SVD::try_new(m.clone(), u, v, f64::EPSILON, MAX_ITER)
}

fn sym_decomp(m: &DMatrix<f64>) -> Option<SymmetricEigen<f64, nalgebra::Dyn>> {
    if !m.iter().all(|x| x.is_finite()) {
        return None;
    }
    SymmetricEigen::try_new((m + m.transpose()) * 0.5, f64::EPSILON, MAX_ITER)
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues ascending.
pub fn sym_eigen(m: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = m.nrows();
    if n == 0 {
        return (Vec::new(), DMatrix::zeros(0, 0));
    }
    let Some(eig) = sym_decomp(m) else {
        return (vec![f64::NAN; n], DMatrix::from_element(n, n, f64::NAN));
    };
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = DMatrix::zeros(n, n);
    for (c, &i) in idx.iter().enumerate() {
        vecs.set_column(c, &eig.eigenvectors.column(i));
    }
    (values, vecs)
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 {
        return Vec::new();
    }
    let Some(eig) = sym_decomp(m) else {
        return vec![f64::NAN; m.nrows()];
    };
    let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn lambda_max(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).last().copied().unwrap_or(0.0)
}

pub fn lambda_min(m: &DMatrix<f64>) -> f64 {
    sym_eigenvalues(m).first().copied().unwrap_or(0.0)
}

/// Spectral norm of a general matrix.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    singular_values(m).first().copied().unwrap_or(f64::NAN)
}

/// Singular values in descending order.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.is_empty() {
        return Vec::new();
    }
    let Some(d) = svd(m, false, false) else {
        return vec![f64::NAN; m.nrows().min(m.ncols())];
    };
    let mut s: Vec<f64> = d.singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

/// Orthonormal basis (as columns) of the numerical kernel of `m`:
/// right singular vectors whose singular value is at most `tol`.
pub fn null_space(m: &DMatrix<f64>, tol: f64) -> DMatrix<f64> {
    let cols = m.ncols();
    if cols == 0 {
        return DMatrix::zeros(0, 0);
    }
    // Pad so that the thin SVD exposes a full set of right singular vectors.
    let padded = if m.nrows() < cols {
        let mut p = DMatrix::zeros(cols, cols);
        p.view_mut((0, 0), (m.nrows(), cols)).copy_from(m);
        p
    } else {
        m.clone()
    };
    let Some(svd) = svd(&padded, false, true) else {
        return DMatrix::zeros(cols, 0);
    };
    let vt = svd.v_t.expect("requested V^T");
    let kernel: Vec<usize> = (0..svd.singular_values.len()).filter(|&i| svd.singular_values[i] <= tol).collect();
    let mut out = DMatrix::zeros(cols, kernel.len());
    for (c, &i) in kernel.iter().enumerate() {
        out.set_column(c, &vt.row(i).transpose());
    }
    out
}

/// Counts of (negative, zero, positive) eigenvalues with the zero band `|λ| ≤ tol`.
pub fn inertia(m: &DMatrix<f64>, tol: f64) -> (usize, usize, usize) {
    let ev = sym_eigenvalues(m);
    let neg = ev.iter().filter(|&&x| x < -tol).count();
    let pos = ev.iter().filter(|&&x| x > tol).count();
    (neg, ev.len() - neg - pos, pos)
}

/// Modified Gram–Schmidt on the columns of `m`. Returns `None` when a column
/// is dependent on the previous ones to within `tol` relative.
pub fn gram_schmidt(m: &DMatrix<f64>, tol: f64) -> Option<DMatrix<f64>> {
    let mut q = m.clone();
    for j in 0..q.ncols() {
        let orig = m.column(j).norm();
        for _ in 0..2 {
            for i in 0..j {
                let p = q.column(i).dot(&q.column(j));
                let qi = q.column(i).into_owned();
                let mut cj = q.column_mut(j);
                cj.axpy(-p, &qi, 1.0);
            }
        }
        let nrm = q.column(j).norm();
        if nrm <= tol * orig.max(f64::MIN_POSITIVE) || nrm == 0.0 {
            return None;
        }
        q.column_mut(j).unscale_mut(nrm);
    }
    Some(q)
}

/// Largest principal angle cosine defect: max |⟨x, y⟩| over unit x ∈ span(a), y ∈ span(b).
/// Both inputs must have orthonormal columns.
pub fn max_cross_cosine(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    if a.ncols() == 0 || b.ncols() == 0 {
        return 0.0;
    }
    spectral_norm(&(a.transpose() * b))
}

/// Distance of span(a) from lying inside span(b): max over unit x ∈ span(a) of ‖x − P_b x‖.
pub fn containment_defect(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    if a.ncols() == 0 {
        return 0.0;
    }
    let proj = if b.ncols() == 0 { DMatrix::zeros(a.nrows(), a.nrows()) } else { b * b.transpose() };
    spectral_norm(&(a - proj * a))
}

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(m >= 1);
    if m == 1 {
        return (vec![0.0], vec![2.0]);
    }
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    for i in 0..m.div_ceil(2) {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 1.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=m {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            dp = m as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[m - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[m - 1 - i] = wi;
    }
    (x, w)
}

/// Gauss–Legendre rule mapped to [a, b].
pub fn gauss_legendre_on(m: usize, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(m);
    let h = 0.5 * (b - a);
    let c = 0.5 * (a + b);
    (x.iter().map(|t| c + h * t).collect(), w.iter().map(|t| h * t).collect())
}

/// Γ(k/2) for a positive integer k, by exact recursion from Γ(1) and Γ(1/2).
pub fn gamma_half(k: usize) -> f64 {
    assert!(k >= 1);
    if k == 1 {
        std::f64::consts::PI.sqrt()
    } else if k == 2 {
        1.0
    } else {
        let x = (k - 2) as f64 / 2.0;
        x * gamma_half(k - 2)
    }
}

/// Volume of the round unit sphere Sᵐ ⊂ ℝᵐ⁺¹: 2π^{(m+1)/2} / Γ((m+1)/2).
pub fn sphere_volume(m: usize) -> f64 {
    2.0 * std::f64::consts::PI.powf((m as f64 + 1.0) / 2.0) / gamma_half(m + 1)
}

/// Kahan–Babuška compensated accumulator.
#[derive(Clone, Copy, Debug, Default)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

pub fn to_dvec(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for m in 1..12 {
            let (x, w) = gauss_legendre(m);
            for deg in 0..(2 * m) {
                let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
                assert!((q - exact).abs() < 1e-13, "m={m} deg={deg} q={q}");
            }
        }
    }

    #[test]
    fn sphere_volumes_closed_form() {
        assert!((sphere_volume(1) - 2.0 * PI).abs() < 1e-13);
        assert!((sphere_volume(2) - 4.0 * PI).abs() < 1e-13);
        assert!((sphere_volume(3) - 2.0 * PI * PI).abs() < 1e-13);
        assert!((sphere_volume(4) - 8.0 * PI * PI / 3.0).abs() < 1e-12);
        assert!((sphere_volume(5) - PI.powi(3)).abs() < 1e-12);
    }

    #[test]
    fn null_space_of_wide_matrix() {
        let m = DMatrix::from_row_slice(1, 3, &[1.0, 1.0, 0.0]);
        let k = null_space(&m, 1e-12);
        assert_eq!(k.ncols(), 2);
        assert!((&m * &k).norm() < 1e-14);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::default();
        s.add(1e16);
        for _ in 0..1000 {
            s.add(1.0);
        }
        s.add(-1e16);
        assert_eq!(s.value(), 1000.0);
    }
}
