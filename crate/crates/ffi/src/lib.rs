//! C ABI over `codim2-core`.
//!
//! Every entry point returns a [`Codim2Status`]. On anything other than
//! `CODIM2_STATUS_OK` a message is stored per thread and can be read back with
//! [`codim2_last_error_message`]. Atlases are opaque handles created from a
//! JSON descriptor `{"example": "...", "params": {...}}` and released with
//! [`codim2_atlas_free`]. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use codim2_core::gallery::{self, AtlasDescriptor};
use codim2_core::immersion::residuals::gauss_residual;
use codim2_core::immersion::{classify_point, fundamental_forms, weinstein_frame, Atlas, Stratum};
use codim2_core::matspec::{pencil_det, PsdPair};
use codim2_core::morse::{tau_by_quadrature, QuadratureOptions};
use codim2_core::GeomError;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Codim2Status {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidInput = 3,
    DomainViolation = 4,
    /// Rank, frame or metric degeneracy at the requested point.
    Degenerate = 5,
    NotApplicable = 6,
    /// Output buffer too small; the required length was written.
    BufferTooSmall = 7,
    /// Any other numerical failure.
    Numerical = 8,
    Panic = 9,
}

/// Stratum kind reported by [`codim2_classify`].
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Codim2StratumKind {
    /// ν ≥ 1; `index` holds ν.
    RelNullity = 0,
    /// Complementary kernels; `index` holds k = rank B.
    U = 1,
    /// Trivial kernel intersection with rank A + rank B > n.
    Strict = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug)]
pub struct Codim2PointClass {
    pub kind: Codim2StratumKind,
    pub index: usize,
    pub rank_a: usize,
    pub rank_b: usize,
    /// Nonzero where the curvature operator vanishes.
    pub flat: i32,
}

/// Opaque immersion handle.
pub struct Codim2Atlas {
    inner: Atlas,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &GeomError) -> Codim2Status {
    use GeomError::*;
    match e {
        InvalidInput(_) => Codim2Status::InvalidInput,
        DomainViolation { .. } => Codim2Status::DomainViolation,
        NotApplicable(_) => Codim2Status::NotApplicable,
        DegenerateMetric { .. } | RankDeficient { .. } | NoQuadrantFrame { .. } | AmbiguousRank { .. } | FrameNotSmooth => Codim2Status::Degenerate,
        _ => Codim2Status::Numerical,
    }
}

struct Fail(Codim2Status, String);

impl From<GeomError> for Fail {
    fn from(e: GeomError) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(name: &str) -> Fail {
    Fail(Codim2Status::NullPointer, format!("`{name}` is null"))
}

/// Runs `f`, turning errors and panics into a status and a stored message.
fn guard<F: FnOnce() -> Result<(), Fail>>(f: F) -> Codim2Status {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            Codim2Status::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(p) => {
            let msg = p.downcast_ref::<&str>().map(|s| s.to_string()).or_else(|| p.downcast_ref::<String>().cloned()).unwrap_or_else(|| "unknown panic".into());
            set_error(format!("panic: {msg}"));
            Codim2Status::Panic
        }
    }
}

unsafe fn slice_arg<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(name));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

unsafe fn atlas_arg<'a>(a: *const Codim2Atlas) -> Result<&'a Atlas, Fail> {
    a.as_ref().map(|h| &h.inner).ok_or_else(|| null("atlas"))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn codim2_version() -> *const c_char {
    static V: &str = concat!(env!("CARGO_PKG_VERSION"), "\0");
    V.as_ptr().cast()
}

/// Copies the last error message of this thread into `buf` (NUL terminated,
/// truncated to `len`). Returns the full message length without the NUL, or 0
/// when the last call succeeded.
///
/// # Safety
/// `buf` must be null or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn codim2_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| match e.borrow().as_ref() {
        None => {
            if !buf.is_null() && len > 0 {
                *buf = 0;
            }
            0
        }
        Some(msg) => {
            let bytes = msg.as_bytes();
            if !buf.is_null() && len > 0 {
                let n = bytes.len().min(len - 1);
                ptr::copy_nonoverlapping(bytes.as_ptr().cast(), buf, n);
                *buf.add(n) = 0;
            }
            bytes.len()
        }
    })
}

/// Builds an atlas from a JSON descriptor.
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn codim2_atlas_new(json: *const c_char, out: *mut *mut Codim2Atlas) -> Codim2Status {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        if json.is_null() {
            return Err(null("json"));
        }
        let text = CStr::from_ptr(json).to_str().map_err(|e| Fail(Codim2Status::InvalidUtf8, e.to_string()))?;
        let desc: AtlasDescriptor =
            serde_json::from_str(text).map_err(|e| Fail(Codim2Status::InvalidInput, format!("descriptor at line {} column {}: {e}", e.line(), e.column())))?;
        let inner = gallery::from_descriptor(&desc)?;
        *out = Box::into_raw(Box::new(Codim2Atlas { inner }));
        Ok(())
    })
}

/// Releases an atlas. Null is ignored.
///
/// # Safety
/// `atlas` must come from [`codim2_atlas_new`] and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn codim2_atlas_free(atlas: *mut Codim2Atlas) {
    if !atlas.is_null() {
        drop(Box::from_raw(atlas));
    }
}

/// Manifold dimension n and chart count.
///
/// # Safety
/// `atlas` must be a live handle; outputs may be null.
#[no_mangle]
pub unsafe extern "C" fn codim2_atlas_info(atlas: *const Codim2Atlas, n: *mut usize, charts: *mut usize) -> Codim2Status {
    guard(|| {
        let a = atlas_arg(atlas)?;
        if !n.is_null() {
            *n = a.n;
        }
        if !charts.is_null() {
            *charts = a.charts.len();
        }
        Ok(())
    })
}

/// det(A + tB) for a PSD pair given as row-major `dim × dim` arrays.
///
/// # Safety
/// `a` and `b` must point to `dim * dim` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn codim2_pencil_det(dim: usize, a: *const f64, b: *const f64, t: f64, out: *mut f64) -> Codim2Status {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let len = dim.checked_mul(dim).ok_or_else(|| Fail(Codim2Status::InvalidInput, "dim overflows".into()))?;
        let pair = PsdPair::from_rows(dim, slice_arg(a, len, "a")?, slice_arg(b, len, "b")?)?;
        *out = pencil_det(&pair, t);
        Ok(())
    })
}

unsafe fn point_arg<'a>(a: &'a Atlas, chart: usize, u: *const f64, len: usize) -> Result<(&'a codim2_core::immersion::Chart, &'a [f64]), Fail> {
    let c = a.charts.get(chart).ok_or_else(|| Fail(Codim2Status::InvalidInput, format!("chart {chart} out of range ({} charts)", a.charts.len())))?;
    if len != a.n {
        return Err(Fail(Codim2Status::InvalidInput, format!("point has {len} coordinates, expected {}", a.n)));
    }
    Ok((c, slice_arg(u, len, "u")?))
}

/// Gauss-equation residual at a chart point.
///
/// # Safety
/// `u` must point to `len` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn codim2_gauss_residual(atlas: *const Codim2Atlas, chart: usize, u: *const f64, len: usize, out: *mut f64) -> Codim2Status {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let (c, u) = point_arg(atlas_arg(atlas)?, chart, u, len)?;
        *out = gauss_residual(c, u)?;
        Ok(())
    })
}

/// Stratum of a chart point. `rank_tol` ≤ 0 selects the library default.
///
/// # Safety
/// `u` must point to `len` doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn codim2_classify(
    atlas: *const Codim2Atlas,
    chart: usize,
    u: *const f64,
    len: usize,
    rank_tol: f64,
    out: *mut Codim2PointClass,
) -> Codim2Status {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let (c, u) = point_arg(atlas_arg(atlas)?, chart, u, len)?;
        let tol = if rank_tol > 0.0 { rank_tol } else { codim2_core::verify::VerifyOptions::default().rank_tol };
        let forms = fundamental_forms(c, u)?;
        let class = classify_point(&weinstein_frame(&forms)?, &forms, tol)?;
        let (kind, index) = match class.stratum {
            Stratum::RelNullity(k) => (Codim2StratumKind::RelNullity, k),
            Stratum::U(k) => (Codim2StratumKind::U, k),
            Stratum::Strict { .. } => (Codim2StratumKind::Strict, 0),
        };
        *out = Codim2PointClass { kind, index, rank_a: class.ranks.0, rank_b: class.ranks.1, flat: class.flat as i32 };
        Ok(())
    })
}

/// Type numbers by normal-bundle quadrature. `tau` and `err` receive n + 1
/// values each; `cap` is their capacity. `budget` and `theta_nodes` of 0 take
/// the defaults. On `CODIM2_STATUS_BUFFER_TOO_SMALL`, `out_len` holds n + 1.
///
/// # Safety
/// `tau` and `err` must point to `cap` writable doubles (`err` may be null),
/// `out_len` must be valid.
#[no_mangle]
pub unsafe extern "C" fn codim2_tau_quadrature(
    atlas: *const Codim2Atlas,
    budget: usize,
    theta_nodes: usize,
    tau: *mut f64,
    err: *mut f64,
    cap: usize,
    out_len: *mut usize,
) -> Codim2Status {
    guard(|| {
        if out_len.is_null() {
            return Err(null("out_len"));
        }
        let a = atlas_arg(atlas)?;
        *out_len = a.n + 1;
        if cap < a.n + 1 {
            return Err(Fail(Codim2Status::BufferTooSmall, format!("need {} slots, got {cap}", a.n + 1)));
        }
        if tau.is_null() {
            return Err(null("tau"));
        }
        let d = QuadratureOptions::default();
        let opts =
            QuadratureOptions { budget: if budget == 0 { d.budget } else { budget }, theta_nodes: if theta_nodes == 0 { d.theta_nodes } else { theta_nodes } };
        let est = tau_by_quadrature(a, &opts)?;
        ptr::copy_nonoverlapping(est.tau.as_ptr(), tau, est.tau.len());
        if !err.is_null() {
            ptr::copy_nonoverlapping(est.error.as_ptr(), err, est.error.len());
        }
        Ok(())
    })
}
