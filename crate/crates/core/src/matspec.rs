//! The PSD pencil inequality |det(A+tB)| ≥ |det(A−tB)| and its equality cases.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{GeomError, Result};
use crate::linalg::{spectral_norm, sym_eigen};
use crate::sampling::rng;

/// Default relative threshold for numerical rank decisions.
pub const RANK_TOL: f64 = 1e-7;
/// Normalized gap above which a pair counts as strictly unequal on the reference grid.
pub const EQUALITY_MARGIN: f64 = 1e-6;

/// A pair of symmetric positive semidefinite matrices of equal size.
#[derive(Clone, Debug)]
pub struct PsdPair {
    a: DMatrix<f64>,
    b: DMatrix<f64>,
}

fn check_psd(m: &DMatrix<f64>, name: &str) -> Result<()> {
    let nrm = spectral_norm(m);
    let asym = spectral_norm(&(m - m.transpose()));
    if asym > 1e-12 * nrm {
        return Err(GeomError::InvalidInput(format!("{name} is not symmetric (defect {asym:e})")));
    }
    let (ev, _) = sym_eigen(m);
    if let Some(&lo) = ev.first() {
        if lo < -1e-10 * nrm {
            return Err(GeomError::InvalidInput(format!("{name} has eigenvalue {lo:e} < 0")));
        }
    }
    Ok(())
}

impl PsdPair {
    pub fn new(a: DMatrix<f64>, b: DMatrix<f64>) -> Result<Self> {
        if a.nrows() == 0 || !a.is_square() || a.shape() != b.shape() {
            return Err(GeomError::InvalidInput("matrices must be square, nonempty and the same size".into()));
        }
        check_psd(&a, "A")?;
        check_psd(&b, "B")?;
        Ok(PsdPair { a, b })
    }

    pub fn from_rows(dim: usize, a: &[f64], b: &[f64]) -> Result<Self> {
        if a.len() != dim * dim || b.len() != dim * dim {
            return Err(GeomError::InvalidInput("row data does not match dim".into()));
        }
        Self::new(DMatrix::from_row_slice(dim, dim, a), DMatrix::from_row_slice(dim, dim, b))
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn b(&self) -> &DMatrix<f64> {
        &self.b
    }

    /// (‖A‖ + t‖B‖)^dim, the natural size of det(A ± tB).
    pub fn scale(&self, t: f64) -> f64 {
        (spectral_norm(&self.a) + t.abs() * spectral_norm(&self.b)).powi(self.dim() as i32)
    }
}

/// Determinant of a real symmetric matrix by Bunch–Kaufman LDLᵀ with
/// symmetric 1×1/2×2 pivoting.
pub fn sym_det(m: &DMatrix<f64>) -> f64 {
    let n = m.nrows();
    if m.iter().any(|x| !x.is_finite()) {
        return f64::NAN;
    }
    let mut a = (m + m.transpose()) * 0.5;
    let alpha = (1.0 + 17f64.sqrt()) / 8.0;
    let mut det = 1.0;
    let mut k = 0;
    let swap = |a: &mut DMatrix<f64>, p: usize, q: usize| {
        if p != q {
            a.swap_rows(p, q);
            a.swap_columns(p, q);
        }
    };
    while k < n {
        let (mut r, mut lambda) = (k, 0.0f64);
        for i in (k + 1)..n {
            if a[(i, k)].abs() > lambda {
                lambda = a[(i, k)].abs();
                r = i;
            }
        }
        let akk = a[(k, k)].abs();
        if akk == 0.0 && lambda == 0.0 {
            return 0.0;
        }
        let two_by_two = if akk >= alpha * lambda {
            false
        } else {
            let sigma = (k..n).filter(|&j| j != r).map(|j| a[(j, r)].abs()).fold(0.0, f64::max);
            if akk * sigma >= alpha * lambda * lambda {
                false
            } else if a[(r, r)].abs() >= alpha * sigma {
                swap(&mut a, k, r);
                false
            } else {
                swap(&mut a, k + 1, r);
                true
            }
        };
        // Trailing updates are computed on the lower triangle and mirrored, so
        // the working matrix stays exactly symmetric and pivot tests read
        // consistent entries.
        if !two_by_two {
            let d = a[(k, k)];
            det *= d;
            if d == 0.0 {
                return 0.0;
            }
            for i in (k + 1)..n {
                let l = a[(i, k)] / d;
                for j in (k + 1)..=i {
                    let v = a[(i, j)] - l * a[(j, k)];
                    a[(i, j)] = v;
                    a[(j, i)] = v;
                }
            }
            k += 1;
        } else {
            let (p, q, s) = (a[(k, k)], a[(k, k + 1)], a[(k + 1, k + 1)]);
            let dd = p * s - q * q;
            det *= dd;
            for i in (k + 2)..n {
                let (x, y) = (a[(i, k)], a[(i, k + 1)]);
                // [x y] D⁻¹
                let l0 = (x * s - y * q) / dd;
                let l1 = (y * p - x * q) / dd;
                for j in (k + 2)..=i {
                    let v = a[(i, j)] - (l0 * a[(j, k)] + l1 * a[(j, k + 1)]);
                    a[(i, j)] = v;
                    a[(j, i)] = v;
                }
            }
            k += 2;
        }
    }
    det
}

/// det(A + tB).
pub fn pencil_det(pair: &PsdPair, t: f64) -> f64 {
    sym_det(&(&pair.a + &pair.b * t))
}

/// |det(A+tB)| ≥ |det(A−tB)| − tol·scale(t) at every sample.
pub fn inequality_holds(pair: &PsdPair, t_samples: &[f64], tol: f64) -> bool {
    t_samples.iter().all(|&t| {
        let plus = pencil_det(pair, t).abs();
        let minus = pencil_det(pair, -t).abs();
        plus >= minus - tol * pair.scale(t)
    })
}

/// Smallest normalized margin (|det(A+tB)| − |det(A−tB)|)/scale over the samples.
pub fn worst_margin(pair: &PsdPair, t_samples: &[f64]) -> f64 {
    t_samples.iter().map(|&t| (pencil_det(pair, t).abs() - pencil_det(pair, -t).abs()) / pair.scale(t)).fold(f64::INFINITY, f64::min)
}

/// Floor of the equality normalization, relative to [`PsdPair::scale`].
pub const EQUALITY_FLOOR: f64 = 1e-8;

/// Largest relative gap (|d₊| − |d₋|)/(|d₊| + |d₋| + floor·scale) over the
/// samples, d± = det(A ± tB); zero means equality on the grid. Normalizing by
/// the determinants themselves keeps strict pencils with spread spectra from
/// looking equal in high dimension, while the floor absorbs roundoff when both
/// determinants vanish.
pub fn equality_gap(pair: &PsdPair, t_samples: &[f64]) -> f64 {
    t_samples
        .iter()
        .map(|&t| {
            let (plus, minus) = (pencil_det(pair, t).abs(), pencil_det(pair, -t).abs());
            (plus - minus) / (plus + minus + EQUALITY_FLOOR * pair.scale(t))
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Logarithmic grid of `m` points on [lo, hi].
pub fn log_grid(m: usize, lo: f64, hi: f64) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..m).map(|i| (a + (b - a) * i as f64 / (m - 1) as f64).exp()).collect()
}

/// The reference t-grid: 20 points log-spaced on [1e-3, 1e3].
pub fn reference_grid() -> Vec<f64> {
    log_grid(20, 1e-3, 1e3)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Branch {
    KernelsIntersect,
    KernelsComplement,
    Strict,
}

/// Evidence supporting a verdict.
#[derive(Clone, Debug, Serialize)]
pub enum Witness {
    /// A common kernel vector.
    Vector(Vec<f64>),
    /// Column bases of ker A and ker B.
    Kernels {
        ker_a: Vec<Vec<f64>>,
        ker_b: Vec<Vec<f64>>,
    },
    None,
}

#[derive(Clone, Debug, Serialize)]
pub struct PencilVerdict {
    pub branch: Branch,
    pub witness: Witness,
    /// True when the complement branch is reached with one operator identically zero.
    pub degenerate: bool,
}

fn columns(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.ncols()).map(|j| m.column(j).iter().copied().collect()).collect()
}

/// Kernel basis from a symmetric eigen-decomposition with ambiguity guard.
fn psd_kernel(m: &DMatrix<f64>, thr: f64) -> Result<DMatrix<f64>> {
    let (vals, vecs) = sym_eigen(m);
    for &v in &vals {
        let a = v.abs();
        if a > thr / 10.0 && a < thr * 10.0 && thr > 0.0 {
            return Err(GeomError::AmbiguousRank { value: a, threshold: thr });
        }
    }
    let idx: Vec<usize> = (0..vals.len()).filter(|&i| vals[i].abs() <= thr).collect();
    let mut k = DMatrix::zeros(m.nrows(), idx.len());
    for (c, &i) in idx.iter().enumerate() {
        k.set_column(c, &vecs.column(i));
    }
    Ok(k)
}

/// Decides which equality branch of the pencil inequality applies.
pub fn classify_equality(pair: &PsdPair, rank_tol: f64) -> Result<PencilVerdict> {
    let n = pair.dim();
    let s = spectral_norm(&pair.a).max(spectral_norm(&pair.b));
    if s == 0.0 {
        let mut v = vec![0.0; n];
        v[0] = 1.0;
        return Ok(PencilVerdict { branch: Branch::KernelsIntersect, witness: Witness::Vector(v), degenerate: false });
    }
    let thr = rank_tol * s;
    let ka = psd_kernel(&pair.a, thr)?;
    let kb = psd_kernel(&pair.b, thr)?;
    // For PSD operators ker(A+B) = ker A ∩ ker B.
    let kab = psd_kernel(&(&pair.a + &pair.b), thr)?;
    if kab.ncols() > 0 {
        let v = kab.column(0).iter().copied().collect();
        return Ok(PencilVerdict { branch: Branch::KernelsIntersect, witness: Witness::Vector(v), degenerate: false });
    }
    if ka.ncols() + kb.ncols() == n {
        let degenerate = ka.ncols() == n || kb.ncols() == n;
        return Ok(PencilVerdict { branch: Branch::KernelsComplement, witness: Witness::Kernels { ker_a: columns(&ka), ker_b: columns(&kb) }, degenerate });
    }
    Ok(PencilVerdict { branch: Branch::Strict, witness: Witness::None, degenerate: false })
}

/// Blocks of the Schur reduction of A relative to ker B.
#[derive(Clone, Debug)]
pub struct SchurBlocks {
    /// A restricted to ker B.
    pub c: DMatrix<f64>,
    /// E − DᵗC⁻¹D on (ker B)ᗮ.
    pub a_hat: DMatrix<f64>,
    /// B restricted to (ker B)ᗮ.
    pub b_hat: DMatrix<f64>,
}

impl SchurBlocks {
    /// det(C)·det(Â + tB̂).
    pub fn reduced_det(&self, t: f64) -> f64 {
        let dc = sym_det(&self.c);
        if self.a_hat.nrows() == 0 {
            return dc;
        }
        dc * sym_det(&(&self.a_hat + &self.b_hat * t))
    }
}

/// Splits V = ker B ⊕ (ker B)ᗮ and eliminates the ker B block of A.
pub fn schur_reduce(pair: &PsdPair, rank_tol: f64) -> Result<SchurBlocks> {
    let n = pair.dim();
    let s = spectral_norm(&pair.a).max(spectral_norm(&pair.b));
    let thr = rank_tol * s;
    // ker B is judged against ‖B‖: dropping an eigenvalue λ perturbs
    // det(A + tB) by at most λ/‖B‖ relative to the pencil scale.
    let thr_b = rank_tol * spectral_norm(&pair.b);
    let (vals, vecs) = sym_eigen(&pair.b);
    if let Some(&v) = vals.iter().find(|v| v.abs() > thr_b / 10.0 && v.abs() < thr_b * 10.0) {
        return Err(GeomError::AmbiguousRank { value: v.abs(), threshold: thr_b });
    }
    let ker: Vec<usize> = (0..n).filter(|&i| vals[i].abs() <= thr_b).collect();
    let rng_idx: Vec<usize> = (0..n).filter(|&i| vals[i].abs() > thr_b).collect();
    if ker.is_empty() {
        return Err(GeomError::InvalidInput("B is nonsingular".into()));
    }
    let pick = |idx: &[usize]| {
        let mut q = DMatrix::zeros(n, idx.len());
        for (c, &i) in idx.iter().enumerate() {
            q.set_column(c, &vecs.column(i));
        }
        q
    };
    let k = pick(&ker);
    let kp = pick(&rng_idx);
    let c = k.transpose() * &pair.a * &k;
    let (cv, _) = sym_eigen(&c);
    if cv[0] <= thr {
        return Err(GeomError::CNotPositive);
    }
    let d = k.transpose() * &pair.a * &kp;
    let e = kp.transpose() * &pair.a * &kp;
    let cinv = c.clone().cholesky().ok_or(GeomError::CNotPositive)?.inverse();
    let a_hat = &e - d.transpose() * &cinv * &d;
    let a_hat = (&a_hat + a_hat.transpose()) * 0.5;
    let b_hat = kp.transpose() * &pair.b * &kp;
    Ok(SchurBlocks { c, a_hat, b_hat })
}

/// Random PSD matrix GᵗG where G is Gaussian with `dim - rank` zeroed
/// columns, followed by a Gaussian change of basis so the kernel is generic.
pub fn random_psd<R: Rng>(rng: &mut R, dim: usize, rank: usize) -> DMatrix<f64> {
    let mut g = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let mut cols: Vec<usize> = (0..dim).collect();
    for i in 0..dim {
        let j = rng.random_range(i..dim);
        cols.swap(i, j);
    }
    for &c in cols.iter().take(dim - rank.min(dim)) {
        g.column_mut(c).fill(0.0);
    }
    let h = DMatrix::from_fn(dim, dim, |_, _| rng.sample::<f64, _>(StandardNormal));
    let gh = g * h;
    let m = gh.transpose() * gh;
    (&m + m.transpose()) * 0.5
}

/// Outcome of a randomized sweep over PSD pairs.
#[derive(Clone, Debug, Serialize)]
pub struct FuzzReport {
    pub trials: usize,
    pub failures: usize,
    pub ambiguous: usize,
    pub worst_margin: f64,
    pub classifier_checked: usize,
    pub classifier_mismatches: usize,
    pub schur_checked: usize,
    pub schur_max_residual: f64,
    pub schur_min_eig: f64,
}

/// Configuration for [`lemma_fuzz`].
#[derive(Clone, Debug, Serialize)]
pub struct FuzzConfig {
    pub trials: usize,
    pub dim_min: usize,
    pub dim_max: usize,
    pub seed: u64,
    pub tol: f64,
    pub rank_tol: f64,
}

impl Default for FuzzConfig {
    fn default() -> Self {
        FuzzConfig { trials: 10_000, dim_min: 2, dim_max: 6, seed: 7, tol: 1e-9, rank_tol: RANK_TOL }
    }
}

/// Samples random PSD pairs and checks the inequality, the equality
/// classifier against grid ground truth, and the Schur identity.
pub fn lemma_fuzz(cfg: &FuzzConfig) -> FuzzReport {
    let mut r = rng(cfg.seed);
    let grid = reference_grid();
    let mut rep = FuzzReport {
        trials: cfg.trials,
        failures: 0,
        ambiguous: 0,
        worst_margin: f64::INFINITY,
        classifier_checked: 0,
        classifier_mismatches: 0,
        schur_checked: 0,
        schur_max_residual: 0.0,
        schur_min_eig: f64::INFINITY,
    };
    for _ in 0..cfg.trials {
        let dim = r.random_range(cfg.dim_min..=cfg.dim_max);
        let ra = r.random_range(0..=dim);
        let rb = r.random_range(0..=dim);
        let a = random_psd(&mut r, dim, ra);
        let b = random_psd(&mut r, dim, rb);
        let pair = match PsdPair::new(a, b) {
            Ok(p) => p,
            Err(_) => {
                rep.failures += 1;
                continue;
            }
        };
        if !inequality_holds(&pair, &grid, cfg.tol) {
            rep.failures += 1;
        }
        rep.worst_margin = rep.worst_margin.min(worst_margin(&pair, &grid));
        let gap = equality_gap(&pair, &grid);
        // A drawn factor can come out nearly rank deficient. The classifier
        // then rounds it down while the grid still sees t·λ, so such pairs
        // have no well-posed ground truth.
        let scale = spectral_norm(&pair.a).max(spectral_norm(&pair.b));
        let resolved = |m: &DMatrix<f64>, rank: usize| rank == 0 || sym_eigen(m).0[dim - rank] > 10.0 * cfg.rank_tol * scale;
        let truth_ambiguous = (gap > EQUALITY_MARGIN / 10.0 && gap < EQUALITY_MARGIN * 10.0) || !resolved(&pair.a, ra) || !resolved(&pair.b, rb);
        match classify_equality(&pair, cfg.rank_tol) {
            Err(GeomError::AmbiguousRank { .. }) => rep.ambiguous += 1,
            Err(_) => rep.failures += 1,
            Ok(v) => {
                if truth_ambiguous {
                    rep.ambiguous += 1;
                } else {
                    rep.classifier_checked += 1;
                    let strict = gap > EQUALITY_MARGIN;
                    if strict != (v.branch == Branch::Strict) {
                        rep.classifier_mismatches += 1;
                    }
                }
            }
        }
        if let Ok(blocks) = schur_reduce(&pair, cfg.rank_tol) {
            rep.schur_checked += 1;
            for &t in &grid {
                let lhs = pencil_det(&pair, t);
                let rhs = blocks.reduced_det(t);
                let rel = (lhs - rhs).abs() / pair.scale(t).max(lhs.abs()).max(f64::MIN_POSITIVE);
                rep.schur_max_residual = rep.schur_max_residual.max(rel);
            }
            if blocks.a_hat.nrows() > 0 {
                let (ev, _) = sym_eigen(&blocks.a_hat);
                // Relative to A: when Â vanishes exactly its computed
                // eigenvalues are pure roundoff of the elimination.
                let nrm = spectral_norm(&pair.a).max(f64::MIN_POSITIVE);
                rep.schur_min_eig = rep.schur_min_eig.min(ev[0] / nrm);
            }
        }
    }
    rep
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(a: &[f64], b: &[f64]) -> PsdPair {
        PsdPair::new(DMatrix::from_diagonal(&a.into()), DMatrix::from_diagonal(&b.into())).unwrap()
    }

    #[test]
    fn determinant_examples() {
        assert_eq!(pencil_det(&diag(&[1.0, 0.0], &[0.0, 1.0]), 2.0), 2.0);
        assert_eq!(pencil_det(&diag(&[1.0, 1.0], &[0.0, 0.0]), 5.0), 1.0);
        assert_eq!(pencil_det(&diag(&[2.0, 1.0], &[1.0, 1.0]), 1.0), 6.0);
    }

    #[test]
    fn inequality_examples() {
        assert!(inequality_holds(&diag(&[2.0, 1.0], &[1.0, 1.0]), &[1.0, 2.0], 0.0));
        let comp = diag(&[1.0, 0.0], &[0.0, 1.0]);
        assert!(inequality_holds(&comp, &[0.5, 3.0], 0.0));
        assert_eq!(equality_gap(&comp, &[0.5, 3.0]), 0.0);
        let z = diag(&[0.0, 0.0], &[1.0, 1.0]);
        assert_eq!(pencil_det(&z, 3.0).abs(), pencil_det(&z, -3.0).abs());
        assert_eq!(pencil_det(&z, 3.0), 9.0);
    }

    #[test]
    fn classifier_examples() {
        let v = classify_equality(&diag(&[1.0, 0.0], &[1.0, 0.0]), RANK_TOL).unwrap();
        assert_eq!(v.branch, Branch::KernelsIntersect);
        match v.witness {
            Witness::Vector(w) => assert!(w[0].abs() < 1e-12 && (w[1].abs() - 1.0).abs() < 1e-12),
            _ => panic!("expected vector witness"),
        }
        let v = classify_equality(&diag(&[1.0, 0.0], &[0.0, 1.0]), RANK_TOL).unwrap();
        assert_eq!(v.branch, Branch::KernelsComplement);
        assert!(!v.degenerate);
        let p = diag(&[1.0, 1.0], &[1.0, 0.0]);
        assert_eq!(classify_equality(&p, RANK_TOL).unwrap().branch, Branch::Strict);
        assert_eq!(pencil_det(&p, 2.0).abs(), 3.0);
        assert_eq!(pencil_det(&p, -2.0).abs(), 1.0);
        let z = classify_equality(&diag(&[0.0, 0.0], &[1.0, 2.0]), RANK_TOL).unwrap();
        assert_eq!(z.branch, Branch::KernelsComplement);
        assert!(z.degenerate);
    }

    #[test]
    fn ambiguous_rank_is_flagged() {
        let p = diag(&[1.0, 3e-7], &[0.0, 1.0]);
        assert!(matches!(classify_equality(&p, RANK_TOL), Err(GeomError::AmbiguousRank { .. })));
    }

    #[test]
    fn schur_examples() {
        let s = schur_reduce(&diag(&[1.0, 2.0], &[0.0, 1.0]), RANK_TOL).unwrap();
        assert!((s.c[(0, 0)] - 1.0).abs() < 1e-14);
        assert!((s.a_hat[(0, 0)] - 2.0).abs() < 1e-14);
        assert!((s.b_hat[(0, 0)] - 1.0).abs() < 1e-14);
        let p = PsdPair::from_rows(2, &[1.0, 1.0, 1.0, 2.0], &[0.0, 0.0, 0.0, 1.0]).unwrap();
        let s = schur_reduce(&p, RANK_TOL).unwrap();
        assert!((s.c[(0, 0)] - 1.0).abs() < 1e-14);
        assert!((s.a_hat[(0, 0)] - 1.0).abs() < 1e-14);
        assert!((s.b_hat[(0, 0)] - 1.0).abs() < 1e-14);
        assert_eq!(schur_reduce(&diag(&[0.0, 1.0], &[0.0, 1.0]), RANK_TOL).unwrap_err(), GeomError::CNotPositive);
    }

    #[test]
    fn bunch_kaufman_matches_lu_on_indefinite() {
        let mut r = rng(11);
        for dim in 1..8 {
            for _ in 0..50 {
                let g = DMatrix::from_fn(dim, dim, |_, _| r.sample::<f64, _>(StandardNormal));
                let m = &g + g.transpose();
                let lu = m.clone().lu().determinant();
                let bk = sym_det(&m);
                assert!((lu - bk).abs() <= 1e-10 * (1.0 + lu.abs()), "dim {dim}: {lu} vs {bk}");
            }
        }
        // Zero diagonal forces 2×2 pivots.
        let m = DMatrix::from_row_slice(3, 3, &[0.0, 1.0, 2.0, 1.0, 0.0, 3.0, 2.0, 3.0, 0.0]);
        assert!((sym_det(&m) - m.clone().lu().determinant()).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_psd() {
        let a = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -1.0]));
        assert!(PsdPair::new(a.clone(), a).is_err());
    }
}
