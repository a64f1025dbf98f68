//! C interface to `cusp_core`.
//!
//! Every function returns a `CuspStatus` code; results go through out
//! pointers. Tables, orbits and observables are opaque handles released with
//! their `_free` function. The message for the last failure on the calling
//! thread is available from `cusp_last_error`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use cusp_core::cli::RunConfig;
use cusp_core::cusp_analysis::{launch_series, theta_for_reflections, CornerOptions, Launch, Precision};
use cusp_core::dynamics::{collision_of_state, sample_mu, state_from_collision, step, Collision, State};
use cusp_core::error::Error;
use cusp_core::geometry::{
    build_one_cusp_table, build_two_cusp_table, CuspSpec, OneCuspParams, Side, TableSpec, TwoCuspParams,
};
use cusp_core::induced::{return_map, ReturnOptions};
use cusp_core::observable::{Observable, ObservableSpec};
use cusp_core::stable::StableParams;
use cusp_core::stable_stats::{birkhoff_samples, task_rng};

/// Status codes returned by every function.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CuspStatus {
    Ok = 0,
    NullPointer = 1,
    Domain = 2,
    Singular = 3,
    Grazing = 4,
    Numerical = 5,
    Construction = 6,
    Extraction = 7,
    Segmentation = 8,
    Hypothesis = 9,
    Inconclusive = 10,
    Config = 11,
    Io = 12,
    Utf8 = 13,
    BufferTooSmall = 14,
    Panic = 15,
}

impl From<&Error> for CuspStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Domain(_) => CuspStatus::Domain,
            Error::Singular(_) => CuspStatus::Singular,
            Error::Grazing(_) => CuspStatus::Grazing,
            Error::Numerical(_) => CuspStatus::Numerical,
            Error::Construction(_) => CuspStatus::Construction,
            Error::Extraction { .. } => CuspStatus::Extraction,
            Error::Segmentation(_) => CuspStatus::Segmentation,
            Error::Hypothesis(_) => CuspStatus::Hypothesis,
            Error::Inconclusive(_) => CuspStatus::Inconclusive,
            Error::Config(_) => CuspStatus::Config,
            Error::Io(_) => CuspStatus::Io,
        }
    }
}

/// A billiard table.
pub struct CuspTable {
    spec: TableSpec,
}

/// An orbit of the collision map on a table it borrows.
pub struct CuspOrbit {
    table: *const CuspTable,
    state: State,
}

/// A mean-zero observable bound to a table.
pub struct CuspObservable {
    f: Observable,
}

/// Summary of one corner series.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct CuspCornerSummary {
    pub n: u64,
    pub n_prime: u64,
    pub n1: u64,
    pub n2: u64,
    pub n3: u64,
    pub c_n: f64,
    pub c_n_prime: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn guard<F: FnOnce() -> Result<(), CuspStatus>>(f: F) -> CuspStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CuspStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            CuspStatus::Panic
        }
    }
}

fn fail(e: Error) -> CuspStatus {
    let s = CuspStatus::from(&e);
    set_error(e.to_string());
    s
}

unsafe fn deref<'a, T>(p: *const T) -> Result<&'a T, CuspStatus> {
    if p.is_null() {
        set_error("null pointer argument".into());
        Err(CuspStatus::NullPointer)
    } else {
        Ok(&*p)
    }
}

unsafe fn write<T>(p: *mut T, v: T) -> Result<(), CuspStatus> {
    if p.is_null() {
        set_error("null output pointer".into());
        Err(CuspStatus::NullPointer)
    } else {
        p.write(v);
        Ok(())
    }
}

fn side_of(first_plus: bool) -> Side {
    if first_plus {
        Side::Plus
    } else {
        Side::Minus
    }
}

/// Copies the last error message of this thread into `buf` as a
/// NUL-terminated string. `len` receives the message length without the NUL.
///
/// # Safety
/// `buf` must point to `cap` writable bytes or be null with `cap == 0`.
#[no_mangle]
pub unsafe extern "C" fn cusp_last_error(buf: *mut c_char, cap: usize, len: *mut usize) -> CuspStatus {
    let msg = LAST_ERROR.with(|e| e.borrow().clone());
    if !len.is_null() {
        *len = msg.len();
    }
    if cap == 0 {
        return if msg.is_empty() { CuspStatus::Ok } else { CuspStatus::BufferTooSmall };
    }
    if buf.is_null() {
        return CuspStatus::NullPointer;
    }
    let n = msg.len().min(cap - 1);
    ptr::copy_nonoverlapping(msg.as_ptr() as *const c_char, buf, n);
    *buf.add(n) = 0;
    if n < msg.len() {
        CuspStatus::BufferTooSmall
    } else {
        CuspStatus::Ok
    }
}

fn boxed_table(spec: TableSpec, out: *mut *mut CuspTable) -> Result<(), CuspStatus> {
    unsafe { write(out, Box::into_raw(Box::new(CuspTable { spec }))) }
}

/// Builds the one-cusp table.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cusp_table_one_cusp(
    beta: f64,
    c_plus: f64,
    c_minus: f64,
    wall_length: f64,
    epsilon: f64,
    out: *mut *mut CuspTable,
) -> CuspStatus {
    guard(|| {
        let p = OneCuspParams { beta, c_plus, c_minus, wall_length, epsilon, ..Default::default() };
        boxed_table(build_one_cusp_table(&p).map_err(fail)?, out)
    })
}

/// Builds the two-cusp table; cusp `a` has label 1 and cusp `b` label 2.
///
/// # Safety
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cusp_table_two_cusp(
    beta_a: f64,
    c_a: f64,
    beta_b: f64,
    c_b: f64,
    wall_length: f64,
    epsilon: f64,
    out: *mut *mut CuspTable,
) -> CuspStatus {
    guard(|| {
        let p = TwoCuspParams {
            beta_a,
            c_a_plus: c_a,
            c_a_minus: c_a,
            beta_b,
            c_b_plus: c_b,
            c_b_minus: c_b,
            wall_length,
            epsilon,
            ..Default::default()
        };
        boxed_table(build_two_cusp_table(&p).map_err(fail)?, out)
    })
}

/// Builds the table described by the `[table]` section of a run config.
///
/// # Safety
/// `toml` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn cusp_table_from_config(toml: *const c_char, out: *mut *mut CuspTable) -> CuspStatus {
    guard(|| {
        let text = deref(toml).and_then(|_| {
            CStr::from_ptr(toml).to_str().map_err(|_| {
                set_error("config is not valid UTF-8".into());
                CuspStatus::Utf8
            })
        })?;
        let cfg = RunConfig::parse(text).map_err(fail)?;
        boxed_table(cfg.table.build().map_err(fail)?, out)
    })
}

/// # Safety
/// `table` must come from a `cusp_table_*` constructor or be null; orbits and
/// observables built on it must be freed first.
#[no_mangle]
pub unsafe extern "C" fn cusp_table_free(table: *mut CuspTable) {
    if !table.is_null() {
        drop(Box::from_raw(table));
    }
}

/// Perimeter, stability index and number of cusps.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cusp_table_info(
    table: *const CuspTable,
    perimeter: *mut f64,
    alpha: *mut f64,
    cusp_count: *mut u32,
) -> CuspStatus {
    guard(|| {
        let t = &deref(table)?.spec;
        write(perimeter, t.perimeter)?;
        write(alpha, t.alpha())?;
        write(cusp_count, t.cusps.len() as u32)
    })
}

/// Draws a collision `(r, φ)` from the invariant measure, reproducibly in
/// `(seed, task)`.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cusp_sample_mu(
    table: *const CuspTable,
    seed: u64,
    task: u64,
    r: *mut f64,
    phi: *mut f64,
) -> CuspStatus {
    guard(|| {
        let t = &deref(table)?.spec;
        let x = sample_mu(t, &mut task_rng(seed, task));
        write(r, x.r)?;
        write(phi, x.phi)
    })
}

/// Starts an orbit at the collision `(r, φ)`.
///
/// # Safety
/// `table` must outlive the orbit; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cusp_orbit_new(
    table: *const CuspTable,
    r: f64,
    phi: f64,
    out: *mut *mut CuspOrbit,
) -> CuspStatus {
    guard(|| {
        let t = &deref(table)?.spec;
        let state = state_from_collision(t, Collision { r, phi }).map_err(fail)?;
        write(out, Box::into_raw(Box::new(CuspOrbit { table, state })))
    })
}

/// Applies the collision map once and reports the new collision and the
/// free path travelled. The orbit is unchanged on failure.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cusp_orbit_step(
    orbit: *mut CuspOrbit,
    r: *mut f64,
    phi: *mut f64,
    free_path: *mut f64,
) -> CuspStatus {
    guard(|| {
        if orbit.is_null() {
            set_error("null orbit".into());
            return Err(CuspStatus::NullPointer);
        }
        let o = &mut *orbit;
        let t = &deref(o.table)?.spec;
        let (next, d) = step(t, &o.state).map_err(fail)?;
        o.state = next;
        let x = collision_of_state(t, &next);
        write(r, x.r)?;
        write(phi, x.phi)?;
        write(free_path, d)
    })
}

/// # Safety
/// `orbit` must come from `cusp_orbit_new` or be null.
#[no_mangle]
pub unsafe extern "C" fn cusp_orbit_free(orbit: *mut CuspOrbit) {
    if !orbit.is_null() {
        drop(Box::from_raw(orbit));
    }
}

/// First return to the base set from `(r, φ)`: return time, label of the
/// visited cusp (0 for none) and the return point.
///
/// # Safety
/// All pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn cusp_return_map(
    table: *const CuspTable,
    r: f64,
    phi: f64,
    return_time: *mut u64,
    cusp_label: *mut u32,
    r_out: *mut f64,
    phi_out: *mut f64,
) -> CuspStatus {
    guard(|| {
        let t = &deref(table)?.spec;
        let rec = return_map(t, Collision { r, phi }, None, ReturnOptions::default()).map_err(|e| fail(e.source))?;
        write(return_time, rec.return_time)?;
        write(cusp_label, rec.cusp_label as u32)?;
        write(r_out, rec.end.r)?;
        write(phi_out, rec.end.phi)
    })
}

/// Bump observable on the walls of one cusp, centred under the invariant
/// measure.
///
/// # Safety
/// `table` must outlive the observable; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cusp_observable_cusp_bump(
    table: *const CuspTable,
    label: u32,
    weight: f64,
    width: f64,
    out: *mut *mut CuspObservable,
) -> CuspStatus {
    guard(|| {
        let t = &deref(table)?.spec;
        let f = Observable::new(t, ObservableSpec::single_cusp(label as usize, weight, width)).map_err(fail)?;
        write(out, Box::into_raw(Box::new(CuspObservable { f })))
    })
}

/// # Safety
/// `obs` must come from a `cusp_observable_*` constructor or be null.
#[no_mangle]
pub unsafe extern "C" fn cusp_observable_free(obs: *mut CuspObservable) {
    if !obs.is_null() {
        drop(Box::from_raw(obs));
    }
}

/// Fills `out[0..reps]` with `S_n f / n^{1/α}` from independent invariant
/// starts.
///
/// # Safety
/// `out` must point to `reps` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn cusp_birkhoff_samples(
    table: *const CuspTable,
    obs: *const CuspObservable,
    n: u64,
    reps: u64,
    seed: u64,
    out: *mut f64,
) -> CuspStatus {
    guard(|| {
        let t = &deref(table)?.spec;
        let f = &deref(obs)?.f;
        if out.is_null() {
            set_error("null output buffer".into());
            return Err(CuspStatus::NullPointer);
        }
        let run = birkhoff_samples(t, f, n as usize, reps as usize, seed).map_err(fail)?;
        ptr::copy_nonoverlapping(run.samples.as_ptr(), out, run.samples.len());
        Ok(())
    })
}

/// CDF of the strictly stable law with parameters `(α, ξ, scale)` at `x`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cusp_stable_cdf(alpha: f64, xi: f64, scale: f64, x: f64, out: *mut f64) -> CuspStatus {
    guard(|| {
        let p = StableParams::new(alpha, xi, scale).map_err(fail)?;
        write(out, p.cdf(x))
    })
}

/// Corner series of a launch aimed to make about `n_target` reflections on
/// the first wall of a cusp with walls `±c± s^β/β`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn cusp_corner_series(
    beta: f64,
    c_plus: f64,
    c_minus: f64,
    first_plus: bool,
    n_target: f64,
    extended: bool,
    out: *mut CuspCornerSummary,
) -> CuspStatus {
    guard(|| {
        let spec = CuspSpec { label: 1, beta, c_plus, c_minus, epsilon: 0.1, vertex_abscissa: 0.0, wall_length: 1.0 };
        let side = side_of(first_plus);
        let x0 = 0.9 * spec.wall_length;
        let theta = theta_for_reflections(&spec, side, n_target, x0).map_err(fail)?;
        let precision = if extended { Precision::Extended } else { Precision::Auto };
        let s = launch_series(&spec, side, &Launch { theta, offset: 0.0, x0 }, precision, &CornerOptions::default())
            .map_err(fail)?;
        write(
            out,
            CuspCornerSummary {
                n: s.n as u64,
                n_prime: s.n_prime as u64,
                n1: s.n1 as u64,
                n2: s.n2 as u64,
                n3: s.n3 as u64,
                c_n: s.c_n,
                c_n_prime: s.c_n_prime,
            },
        )
    })
}
