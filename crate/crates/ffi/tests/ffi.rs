use std::ffi::{CStr, CString};
use std::path::Path;
use std::process::Command;
use std::ptr;

use carnot_ffi::*;

fn group(name: &str) -> *mut CarnotGroupHandle {
    let name = CString::new(name).unwrap();
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { carnot_group_new(name.as_ptr(), &mut g) }, CarnotStatus::Ok);
    assert!(!g.is_null());
    g
}

fn last_error() -> String {
    let mut buf = vec![0 as std::ffi::c_char; 256];
    unsafe { carnot_last_error(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

#[test]
fn heisenberg_compose_and_dilate() {
    let g = group("heisenberg1");
    unsafe {
        assert_eq!(carnot_group_dim(g), 3);
        assert_eq!(carnot_group_homogeneous_dim(g), 4.0);
        let (x, y) = ([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        let mut z = [0.0; 3];
        assert_eq!(carnot_group_compose(g, x.as_ptr(), y.as_ptr(), 3, z.as_mut_ptr()), CarnotStatus::Ok);
        assert_eq!(z, [1.0, 1.0, 0.5]);
        assert_eq!(carnot_group_dilate(g, 2.0, z.as_ptr(), 3, z.as_mut_ptr()), CarnotStatus::Ok);
        assert_eq!(z, [2.0, 2.0, 2.0]);
        carnot_group_free(g);
    }
}

#[test]
fn dimension_and_null_errors() {
    let g = group("euclidean2");
    let x = [0.0; 3];
    let mut out = [0.0; 3];
    unsafe {
        let s = carnot_group_compose(g, x.as_ptr(), x.as_ptr(), 3, out.as_mut_ptr());
        assert_eq!(s, CarnotStatus::DimensionMismatch);
        assert!(last_error().contains("expects 2"));
        assert_eq!(carnot_group_compose(g, ptr::null(), x.as_ptr(), 2, out.as_mut_ptr()), CarnotStatus::NullPointer);
        assert_eq!(carnot_group_compose(ptr::null(), x.as_ptr(), x.as_ptr(), 2, out.as_mut_ptr()), CarnotStatus::NullPointer);
        carnot_group_free(g);
        carnot_group_free(ptr::null_mut());
    }
}

#[test]
fn unknown_group_is_invalid() {
    let name = CString::new("heisenberg9").unwrap();
    let mut g = ptr::null_mut();
    assert_eq!(unsafe { carnot_group_new(name.as_ptr(), &mut g) }, CarnotStatus::InvalidArgument);
    assert!(g.is_null());
    assert!(!last_error().is_empty());
}

#[test]
fn euclidean_distance_and_kernel() {
    let g = group("euclidean2");
    let (x, y) = ([0.0, 0.0], [3.0, 4.0]);
    let (mut d, mut gap) = (0.0, 0.0);
    let (mut k, mut err) = (0.0, 0.0);
    unsafe {
        assert_eq!(carnot_distance(g, x.as_ptr(), y.as_ptr(), 2, 1, &mut d, &mut gap), CarnotStatus::Ok);
        assert!((d - 5.0).abs() < 1e-4);
        assert_eq!(carnot_heat_kernel(g, y.as_ptr(), 2, 1.0, &mut k, &mut err), CarnotStatus::Ok);
        let want = (-25.0f64 / 4.0).exp() / (4.0 * std::f64::consts::PI);
        assert!((k - want).abs() < 1e-15);
        assert_eq!(carnot_heat_kernel(g, y.as_ptr(), 2, -1.0, &mut k, &mut err), CarnotStatus::InvalidArgument);
        carnot_group_free(g);
    }
}

#[test]
fn heat_operator_fundamental_solution() {
    let name = CString::new("euclidean1").unwrap();
    let mut op = ptr::null_mut();
    let (mut v, mut err) = (0.0, 0.0);
    unsafe {
        assert_eq!(carnot_operator_heat(name.as_ptr(), 0.0, &mut op), CarnotStatus::Ok);
        let (x, xi) = ([0.3], [0.0]);
        assert_eq!(carnot_fundamental_solution(op, x.as_ptr(), 0.5, xi.as_ptr(), 0.0, 1, 3, &mut v, &mut err), CarnotStatus::Ok);
        let want = (-0.09f64 / 2.0).exp() / (2.0 * std::f64::consts::PI).sqrt();
        assert!((v - want).abs() <= 1e-10 + err, "{v} vs {want}");
        carnot_operator_free(op);
    }
}

#[test]
fn malformed_operator_json() {
    let json = CString::new("{\"group\": ").unwrap();
    let mut op = ptr::null_mut();
    assert_eq!(unsafe { carnot_operator_new(json.as_ptr(), &mut op) }, CarnotStatus::InvalidArgument);
    assert!(op.is_null());
}

#[test]
fn version_string() {
    let v = unsafe { CStr::from_ptr(carnot_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_compiles_as_c_and_cpp() {
    let header = Path::new(env!("CARGO_MANIFEST_DIR")).join("include/carnot.h");
    assert!(header.exists());
    for (compiler, lang) in [("cc", "c"), ("c++", "c++")] {
        let Ok(status) = Command::new(compiler)
            .args(["-fsyntax-only", "-Wall", "-Werror", "-x", lang])
            .arg(&header)
            .status()
        else {
            eprintln!("{compiler} not available, skipping");
            continue;
        };
        assert!(status.success(), "{compiler} rejected the header");
    }
}

#[test]
fn c_program_links_against_static_library() {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let deps = std::env::current_exe().unwrap().parent().unwrap().to_path_buf();
    let lib = deps.join("libcarnot_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built, skipping", lib.display());
        return;
    }
    let exe = Path::new(env!("CARGO_TARGET_TMPDIR")).join("carnot_smoke");
    let Ok(status) = Command::new("cc")
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&exe)
        .status()
    else {
        eprintln!("cc not available, skipping");
        return;
    };
    assert!(status.success(), "link failed");
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "smoke exited with {:?}", out.status.code());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok "));
}
