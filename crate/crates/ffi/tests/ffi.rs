use std::ffi::CString;
use std::os::raw::c_char;
use std::process::Command;
use std::ptr;

use cusp_core::dynamics::{collision_of_state, state_from_collision, step, Collision};
use cusp_core::geometry::{build_one_cusp_table, OneCuspParams};
use cusp_core::observable::{Observable, ObservableSpec};
use cusp_core::stable_stats::birkhoff_samples;
use cusp_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 512];
    let mut len = 0usize;
    unsafe { cusp_last_error(buf.as_mut_ptr(), buf.len(), &mut len) };
    let bytes: Vec<u8> = buf[..len.min(511)].iter().map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

fn one_cusp() -> *mut CuspTable {
    let mut t = ptr::null_mut();
    let st = unsafe { cusp_table_one_cusp(3.0, 1.0, 1.0, 1.0, 0.1, &mut t) };
    assert_eq!(st, CuspStatus::Ok);
    assert!(!t.is_null());
    t
}

#[test]
fn table_info_matches_core() {
    let t = one_cusp();
    let core = build_one_cusp_table(&OneCuspParams::default()).unwrap();
    let (mut per, mut alpha, mut count) = (0.0, 0.0, 0u32);
    assert_eq!(unsafe { cusp_table_info(t, &mut per, &mut alpha, &mut count) }, CuspStatus::Ok);
    assert_eq!(per, core.perimeter);
    assert_eq!(alpha, core.alpha());
    assert_eq!(count, 1);
    unsafe { cusp_table_free(t) };
}

#[test]
fn orbit_follows_core_collision_map() {
    let t = one_cusp();
    let core = build_one_cusp_table(&OneCuspParams::default()).unwrap();
    let (mut r, mut phi) = (0.0, 0.0);
    assert_eq!(unsafe { cusp_sample_mu(t, 5, 0, &mut r, &mut phi) }, CuspStatus::Ok);
    let mut o = ptr::null_mut();
    assert_eq!(unsafe { cusp_orbit_new(t, r, phi, &mut o) }, CuspStatus::Ok);
    let mut st = state_from_collision(&core, Collision { r, phi }).unwrap();
    for _ in 0..200 {
        let (mut r1, mut p1, mut d1) = (0.0, 0.0, 0.0);
        assert_eq!(unsafe { cusp_orbit_step(o, &mut r1, &mut p1, &mut d1) }, CuspStatus::Ok);
        let (next, d) = step(&core, &st).unwrap();
        st = next;
        let x = collision_of_state(&core, &st);
        assert_eq!((r1, p1, d1), (x.r, x.phi, d));
    }
    unsafe {
        cusp_orbit_free(o);
        cusp_table_free(t);
    }
}

#[test]
fn return_map_reports_a_base_point() {
    let t = one_cusp();
    let (mut r, mut phi) = (0.0, 0.0);
    unsafe { cusp_sample_mu(t, 11, 3, &mut r, &mut phi) };
    let (mut n, mut label, mut r1, mut p1) = (0u64, 7u32, 0.0, 0.0);
    let st = unsafe { cusp_return_map(t, r, phi, &mut n, &mut label, &mut r1, &mut p1) };
    assert_eq!(st, CuspStatus::Ok, "{}", last_error());
    assert!(n >= 1);
    assert!(label <= 1);
    assert!(p1 > 0.0 && p1 < std::f64::consts::PI);
    unsafe { cusp_table_free(t) };
}

#[test]
fn birkhoff_samples_match_core() {
    let t = one_cusp();
    let mut obs = ptr::null_mut();
    assert_eq!(unsafe { cusp_observable_cusp_bump(t, 1, 1.0, 0.3, &mut obs) }, CuspStatus::Ok);
    let mut out = vec![0.0; 4];
    assert_eq!(unsafe { cusp_birkhoff_samples(t, obs, 1000, 4, 21, out.as_mut_ptr()) }, CuspStatus::Ok);
    let core = build_one_cusp_table(&OneCuspParams::default()).unwrap();
    let f = Observable::new(&core, ObservableSpec::single_cusp(1, 1.0, 0.3)).unwrap();
    let run = birkhoff_samples(&core, &f, 1000, 4, 21).unwrap();
    assert_eq!(out, run.samples);
    unsafe {
        cusp_observable_free(obs);
        cusp_table_free(t);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    let mut t = ptr::null_mut();
    let st = unsafe { cusp_table_one_cusp(1.5, 1.0, 1.0, 1.0, 0.1, &mut t) };
    assert_ne!(st, CuspStatus::Ok);
    assert!(t.is_null());
    assert!(last_error().contains("beta"), "{}", last_error());

    let st = unsafe { cusp_table_info(ptr::null(), ptr::null_mut(), ptr::null_mut(), ptr::null_mut()) };
    assert_eq!(st, CuspStatus::NullPointer);

    let mut tiny = [0 as c_char; 4];
    let mut len = 0usize;
    let st = unsafe { cusp_last_error(tiny.as_mut_ptr(), tiny.len(), &mut len) };
    assert_eq!(st, CuspStatus::BufferTooSmall);
    assert!(len > 3);
    assert_eq!(tiny[3], 0);

    let bad = CString::new("seed = 1\n[table]\nkind = \"nonsense\"\n").unwrap();
    let st = unsafe { cusp_table_from_config(bad.as_ptr(), &mut t) };
    assert_eq!(st, CuspStatus::Config);

    unsafe {
        cusp_table_free(ptr::null_mut());
        cusp_orbit_free(ptr::null_mut());
        cusp_observable_free(ptr::null_mut());
    }
}

#[test]
fn stable_cdf_of_symmetric_law() {
    let mut v = 0.0;
    assert_eq!(unsafe { cusp_stable_cdf(1.5, 0.0, 1.0, 0.0, &mut v) }, CuspStatus::Ok);
    assert!((v - 0.5).abs() < 1e-9);
    assert_eq!(unsafe { cusp_stable_cdf(2.5, 0.0, 1.0, 0.0, &mut v) }, CuspStatus::Domain);
}

#[test]
fn corner_series_summary() {
    let mut s = CuspCornerSummary { n: 0, n_prime: 0, n1: 0, n2: 0, n3: 0, c_n: 0.0, c_n_prime: 0.0 };
    let st = unsafe { cusp_corner_series(3.0, 1.0, 1.0, true, 200.0, false, &mut s) };
    assert_eq!(st, CuspStatus::Ok, "{}", last_error());
    assert!(s.n_prime == 2 * s.n || s.n_prime + 1 == 2 * s.n);
    assert!(s.n1 <= s.n2 && s.n2 <= s.n3 && s.n3 <= s.n);
    assert!(s.c_n > 0.0);
}

#[test]
fn header_declares_every_export() {
    let dir = env!("CARGO_MANIFEST_DIR");
    let src = std::fs::read_to_string(format!("{dir}/src/lib.rs")).unwrap();
    let header = std::fs::read_to_string(format!("{dir}/include/cusp.h")).unwrap();
    let mut count = 0;
    for line in src.lines() {
        if let Some(rest) = line.strip_prefix("pub unsafe extern \"C\" fn ") {
            let name = &rest[..rest.find('(').unwrap()];
            assert!(header.contains(&format!(" {name}(")), "{name} missing from include/cusp.h");
            count += 1;
        }
    }
    assert!(count >= 15);
    for variant in ["CUSP_STATUS_OK = 0", "CUSP_STATUS_NULL_POINTER = 1", "CUSP_STATUS_PANIC = 15"] {
        assert!(header.contains(variant), "{variant}");
    }
}

#[test]
fn header_compiles_as_c() {
    let dir = env!("CARGO_MANIFEST_DIR");
    let Ok(out) = Command::new("cc")
        .args(["-fsyntax-only", "-Wall", "-Werror", "-std=c99", "-x", "c", &format!("{dir}/include/cusp.h")])
        .output()
    else {
        eprintln!("no C compiler on PATH; header syntax not checked");
        return;
    };
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}
