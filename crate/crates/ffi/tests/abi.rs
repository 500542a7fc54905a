use std::ffi::{c_char, CStr, CString};
use std::ptr;

use codim2_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 512];
    let n = unsafe { codim2_last_error_message(buf.as_mut_ptr(), buf.len()) };
    let s = unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned();
    assert_eq!(n.min(511), s.len());
    s
}

fn atlas(json: &str) -> *mut Codim2Atlas {
    let c = CString::new(json).unwrap();
    let mut h = ptr::null_mut();
    let st = unsafe { codim2_atlas_new(c.as_ptr(), &mut h) };
    assert_eq!(st, Codim2Status::Ok, "{}", last_error());
    assert!(!h.is_null());
    h
}

#[test]
fn version_matches_the_crate() {
    let v = unsafe { CStr::from_ptr(codim2_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn pencil_det_of_diagonal_pair() {
    let a = [1.0, 0.0, 0.0, 2.0];
    let b = [3.0, 0.0, 0.0, 0.0];
    let mut d = 0.0;
    let st = unsafe { codim2_pencil_det(2, a.as_ptr(), b.as_ptr(), 0.5, &mut d) };
    assert_eq!(st, Codim2Status::Ok);
    // (1 + 1.5) · 2
    assert!((d - 5.0).abs() < 1e-12);
}

#[test]
fn pencil_det_rejects_indefinite_input() {
    let a = [1.0, 0.0, 0.0, -1.0];
    let b = [0.0; 4];
    let mut d = 0.0;
    let st = unsafe { codim2_pencil_det(2, a.as_ptr(), b.as_ptr(), 1.0, &mut d) };
    assert_eq!(st, Codim2Status::InvalidInput);
    assert!(last_error().contains("eigenvalue"));
}

#[test]
fn null_pointers_are_reported() {
    let mut d = 0.0;
    let st = unsafe { codim2_pencil_det(2, ptr::null(), ptr::null(), 1.0, &mut d) };
    assert_eq!(st, Codim2Status::NullPointer);
    let st = unsafe { codim2_atlas_new(ptr::null(), ptr::null_mut()) };
    assert_eq!(st, Codim2Status::NullPointer);
    let mut n = 0;
    assert_eq!(unsafe { codim2_atlas_info(ptr::null(), &mut n, ptr::null_mut()) }, Codim2Status::NullPointer);
}

#[test]
fn success_clears_the_error() {
    let mut d = 0.0;
    unsafe { codim2_pencil_det(1, ptr::null(), ptr::null(), 1.0, &mut d) };
    assert!(!last_error().is_empty());
    let one = [1.0];
    assert_eq!(unsafe { codim2_pencil_det(1, one.as_ptr(), one.as_ptr(), 1.0, &mut d) }, Codim2Status::Ok);
    assert_eq!(unsafe { codim2_last_error_message(ptr::null_mut(), 0) }, 0);
    assert_eq!(d, 2.0);
}

#[test]
fn malformed_descriptor_reports_position() {
    let c = CString::new("{\"example\": \n 3}").unwrap();
    let mut h = ptr::null_mut();
    let st = unsafe { codim2_atlas_new(c.as_ptr(), &mut h) };
    assert_eq!(st, Codim2Status::InvalidInput);
    assert!(h.is_null());
    assert!(last_error().contains("line 2"), "{}", last_error());

    let c = CString::new(r#"{"example": "klein-bottle"}"#).unwrap();
    assert_eq!(unsafe { codim2_atlas_new(c.as_ptr(), &mut h) }, Codim2Status::InvalidInput);
    assert!(last_error().contains("klein-bottle"));
}

#[test]
fn sphere_handle_round_trip() {
    let h = atlas(r#"{"example": "round-s3"}"#);
    let (mut n, mut charts) = (0, 0);
    assert_eq!(unsafe { codim2_atlas_info(h, &mut n, &mut charts) }, Codim2Status::Ok);
    assert_eq!(n, 3);
    assert!(charts >= 1);

    let u = [0.1, -0.2, 0.05];
    let mut g = f64::NAN;
    assert_eq!(unsafe { codim2_gauss_residual(h, 0, u.as_ptr(), 3, &mut g) }, Codim2Status::Ok);
    assert!(g < 1e-10, "{g}");

    let mut class = Codim2PointClass { kind: Codim2StratumKind::Strict, index: 9, rank_a: 0, rank_b: 0, flat: 1 };
    assert_eq!(unsafe { codim2_classify(h, 0, u.as_ptr(), 3, 0.0, &mut class) }, Codim2Status::Ok);
    assert_eq!(class.kind, Codim2StratumKind::U);
    assert_eq!((class.index, class.rank_a, class.rank_b, class.flat), (0, 3, 0, 0));

    let mut small = [0.0; 2];
    let mut len = 0;
    let st = unsafe { codim2_tau_quadrature(h, 512, 8, small.as_mut_ptr(), ptr::null_mut(), 2, &mut len) };
    assert_eq!(st, Codim2Status::BufferTooSmall);
    assert_eq!(len, 4);

    let (mut tau, mut err) = ([0.0; 4], [0.0; 4]);
    let st = unsafe { codim2_tau_quadrature(h, 512, 8, tau.as_mut_ptr(), err.as_mut_ptr(), 4, &mut len) };
    assert_eq!(st, Codim2Status::Ok, "{}", last_error());
    assert!((tau[0] - 1.0).abs() < 0.01 && (tau[3] - 1.0).abs() < 0.01, "{tau:?}");
    assert!(tau[1].abs() < 0.01 && tau[2].abs() < 0.01);
    assert!(err.iter().all(|e| e.is_finite() && *e >= 0.0));

    unsafe { codim2_atlas_free(h) };
}

#[test]
fn chart_and_point_validation() {
    let h = atlas(r#"{"example": "round-s3", "params": {"radius": 2.0}}"#);
    let u = [0.0; 2];
    let mut g = 0.0;
    assert_eq!(unsafe { codim2_gauss_residual(h, 0, u.as_ptr(), 2, &mut g) }, Codim2Status::InvalidInput);
    let u = [0.0; 3];
    assert_eq!(unsafe { codim2_gauss_residual(h, 99, u.as_ptr(), 3, &mut g) }, Codim2Status::InvalidInput);
    let far = [1e6, 0.0, 0.0];
    assert_eq!(unsafe { codim2_gauss_residual(h, 0, far.as_ptr(), 3, &mut g) }, Codim2Status::DomainViolation);
    unsafe { codim2_atlas_free(h) };
    unsafe { codim2_atlas_free(ptr::null_mut()) };
}

#[test]
fn product_points_are_u2() {
    let h = atlas(r#"{"example": "product-s2s2"}"#);
    let u = [0.3, 0.1, -0.2, 0.4];
    let mut class = Codim2PointClass { kind: Codim2StratumKind::Strict, index: 0, rank_a: 0, rank_b: 0, flat: 0 };
    assert_eq!(unsafe { codim2_classify(h, 0, u.as_ptr(), 4, 0.0, &mut class) }, Codim2Status::Ok, "{}", last_error());
    assert_eq!((class.kind, class.index), (Codim2StratumKind::U, 2));
    unsafe { codim2_atlas_free(h) };
}

#[test]
fn header_declares_every_entry_point() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/codim2.h")).unwrap();
    for f in [
        "codim2_version",
        "codim2_last_error_message",
        "codim2_atlas_new",
        "codim2_atlas_free",
        "codim2_atlas_info",
        "codim2_pencil_det",
        "codim2_gauss_residual",
        "codim2_classify",
        "codim2_tau_quadrature",
        "CODIM2_STATUS_OK",
        "typedef struct Codim2Atlas Codim2Atlas",
    ] {
        assert!(h.contains(f), "header lacks {f}");
    }
}
