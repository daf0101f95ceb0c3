//! C interface to the ringmod toolkit.
//!
//! Every function returns a [`RingmodStatus`]. On failure the message is
//! available from [`ringmod_last_error`] on the same thread. Strings handed
//! out by the library are released with [`ringmod_string_free`]; handles with
//! their matching `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use ringmod::config::RunConfig;
use ringmod::geometry::{Condenser, Point, SphericalRing};
use ringmod::mappings::{MappingKind, MappingSpec};
use ringmod::modulus::{ring_capacity, separating_modulus, sphere_family_modulus, SphereFamily};
use ringmod::quadrature::QuadratureSpec;
use ringmod::run::{execute, RunOptions};
use ringmod::verify::{check_lower_q, check_main_lemma_chain, check_ring_q, lower_q_weight};
use ringmod::weights::{
    lower_criterion_integral, lq_norm, ring_criterion_integral, spherical_average, WeightField, WeightKind,
};
use ringmod::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RingmodStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidJson = 3,
    InvalidArgument = 4,
    Computation = 5,
    Domain = 6,
    Panic = 7,
}

/// Mapping from the analytic zoo.
pub struct RingmodMapping {
    inner: MappingSpec,
}

/// Weight field Q.
pub struct RingmodWeight {
    inner: WeightField,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).ok());
}

fn status_of(e: &Error) -> RingmodStatus {
    match e {
        Error::UnsupportedDimension(_)
        | Error::DimensionMismatch { .. }
        | Error::InvalidRing { .. }
        | Error::InvalidParameter { .. } => RingmodStatus::InvalidArgument,
        Error::SingularPoint(_) | Error::NotSpherePreserving(_) | Error::NotApplicable(_) => RingmodStatus::Domain,
        Error::NonConvergence(_) | Error::NonFinite { .. } | Error::Divergent(_) | Error::MultiplicityMismatch { .. } => {
            RingmodStatus::Computation
        }
    }
}

struct Failure(RingmodStatus, String);

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure(status_of(&e), e.to_string())
    }
}

fn guard<F: FnOnce() -> Result<(), Failure>>(f: F) -> RingmodStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => RingmodStatus::Ok,
        Ok(Err(Failure(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            RingmodStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(RingmodStatus::NullPointer, format!("`{what}` is null"))
}

unsafe fn read_str<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Failure(RingmodStatus::InvalidUtf8, format!("`{what}` is not valid UTF-8")))
}

unsafe fn read_json<T: serde::de::DeserializeOwned>(p: *const c_char, what: &str) -> Result<T, Failure> {
    let s = read_str(p, what)?;
    serde_json::from_str(s).map_err(|e| Failure(RingmodStatus::InvalidJson, format!("`{what}`: {e}")))
}

unsafe fn read_point(p: *const f64, dim: usize, what: &str) -> Result<Point, Failure> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(Point::new(std::slice::from_raw_parts(p, dim))?)
}

unsafe fn write_out<T>(out: *mut T, v: T, what: &str) -> Result<(), Failure> {
    if out.is_null() {
        return Err(null(what));
    }
    out.write(v);
    Ok(())
}

unsafe fn write_string(out: *mut *mut c_char, s: String) -> Result<(), Failure> {
    let c = CString::new(s).map_err(|_| Failure(RingmodStatus::Computation, "output contains NUL".into()))?;
    write_out(out, c.into_raw(), "out")
}

unsafe fn read_handle<'a, T>(h: *const T, what: &str) -> Result<&'a T, Failure> {
    h.as_ref().ok_or_else(|| null(what))
}

/// Message of the last failed call on this thread, or NULL. Valid until the
/// next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ringmod_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ringmod_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be NULL or a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn ringmod_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Creates a mapping from a JSON kind object such as
/// `{"kind":"radial_stretch","alpha":2}`, centered at `center[0..dim]`.
///
/// # Safety
/// Pointers must be valid; `center` must hold `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn ringmod_mapping_new(
    kind_json: *const c_char,
    center: *const f64,
    dim: usize,
    out: *mut *mut RingmodMapping,
) -> RingmodStatus {
    guard(|| {
        let kind: MappingKind = read_json(kind_json, "kind_json")?;
        let c = read_point(center, dim, "center")?;
        let m = Box::new(RingmodMapping { inner: MappingSpec::new(kind, c)? });
        write_out(out, Box::into_raw(m), "out")
    })
}

/// # Safety
/// `h` must be NULL or a handle from [`ringmod_mapping_new`].
#[no_mangle]
pub unsafe extern "C" fn ringmod_mapping_free(h: *mut RingmodMapping) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Writes ||f'(x)||, J_f(x) and K_f(x) (INFINITY when unbounded).
///
/// # Safety
/// `x` must hold as many doubles as the mapping's dimension; out pointers may
/// be NULL to skip a value.
#[no_mangle]
pub unsafe extern "C" fn ringmod_mapping_distortion(
    h: *const RingmodMapping,
    x: *const f64,
    op_norm: *mut f64,
    jacobian_det: *mut f64,
    kf: *mut f64,
) -> RingmodStatus {
    guard(|| {
        let m = &read_handle(h, "mapping")?.inner;
        let p = read_point(x, m.dim(), "x")?;
        let s = m.distortion_sample(&p)?;
        if !op_norm.is_null() {
            op_norm.write(s.op_norm);
        }
        if !jacobian_det.is_null() {
            jacobian_det.write(s.jacobian_det);
        }
        if !kf.is_null() {
            kf.write(s.kf.unwrap_or(f64::INFINITY));
        }
        Ok(())
    })
}

/// Writes f(x) into `y`, which must hold the mapping's dimension.
///
/// # Safety
/// `x` and `y` must hold as many doubles as the mapping's dimension.
#[no_mangle]
pub unsafe extern "C" fn ringmod_mapping_apply(h: *const RingmodMapping, x: *const f64, y: *mut f64) -> RingmodStatus {
    guard(|| {
        let m = &read_handle(h, "mapping")?.inner;
        let p = read_point(x, m.dim(), "x")?;
        if y.is_null() {
            return Err(null("y"));
        }
        let fx = m.apply(&p)?;
        std::slice::from_raw_parts_mut(y, m.dim()).copy_from_slice(fx.coords());
        Ok(())
    })
}

/// Creates a weight from a JSON kind object such as `{"kind":"radial_log"}`.
///
/// # Safety
/// Pointers must be valid; `center` must hold `dim` doubles.
#[no_mangle]
pub unsafe extern "C" fn ringmod_weight_new(
    kind_json: *const c_char,
    center: *const f64,
    dim: usize,
    out: *mut *mut RingmodWeight,
) -> RingmodStatus {
    guard(|| {
        let kind: WeightKind = read_json(kind_json, "kind_json")?;
        let c = read_point(center, dim, "center")?;
        let w = Box::new(RingmodWeight { inner: WeightField::new(kind, c)? });
        write_out(out, Box::into_raw(w), "out")
    })
}

/// Q = N(f, D) K_f for a mapping, with N validated on the ring (r1, r2).
///
/// # Safety
/// `mapping` must be a live handle and `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ringmod_weight_from_mapping(
    mapping: *const RingmodMapping,
    r1: f64,
    r2: f64,
    out: *mut *mut RingmodWeight,
) -> RingmodStatus {
    guard(|| {
        let m = &read_handle(mapping, "mapping")?.inner;
        let ring = SphericalRing::new(m.center(), r1, r2)?;
        let w = Box::new(RingmodWeight { inner: lower_q_weight(m, &ring, 0)? });
        write_out(out, Box::into_raw(w), "out")
    })
}

/// # Safety
/// `h` must be NULL or a weight handle.
#[no_mangle]
pub unsafe extern "C" fn ringmod_weight_free(h: *mut RingmodWeight) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RingmodWeightFunctional {
    /// Mean of Q over S(center, a).
    SphericalAverage = 0,
    /// ||Q||_{n-1} over S(center, a).
    LqNorm = 1,
    /// Integral of dr / ||Q||_{n-1}(r) over (a, b).
    LowerCriterion = 2,
    /// Integral of dr / (r q(r)^{1/(n-1)}) over (a, b).
    RingCriterion = 3,
}

/// Evaluates a scalar functional of the weight about its own center.
/// `b` is ignored for the single-radius functionals.
///
/// # Safety
/// `h` must be a live weight handle, `out` valid.
#[no_mangle]
pub unsafe extern "C" fn ringmod_weight_functional(
    h: *const RingmodWeight,
    which: RingmodWeightFunctional,
    a: f64,
    b: f64,
    out: *mut f64,
) -> RingmodStatus {
    guard(|| {
        let q = &read_handle(h, "weight")?.inner;
        let spec = QuadratureSpec::default();
        let c = q.center();
        let v = match which {
            RingmodWeightFunctional::SphericalAverage => spherical_average(q, &c, a, &spec)?,
            RingmodWeightFunctional::LqNorm => lq_norm(q, &c, a, &spec)?,
            RingmodWeightFunctional::LowerCriterion => lower_criterion_integral(q, &c, a, b, &spec)?,
            RingmodWeightFunctional::RingCriterion => ring_criterion_integral(q, &c, a, b, &spec)?,
        };
        write_out(out, v, "out")
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RingmodQuantity {
    /// Conformal modulus of the concentric sphere family.
    SphereFamilyModulus = 0,
    RingCapacity = 1,
    SeparatingModulus = 2,
}

/// Closed-form value for the centered ring (r1, r2) in dimension `dim`.
///
/// # Safety
/// `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ringmod_closed_form(
    which: RingmodQuantity,
    dim: usize,
    r1: f64,
    r2: f64,
    out: *mut f64,
) -> RingmodStatus {
    guard(|| {
        let ring = SphericalRing::centered(dim, r1, r2)?;
        let v = match which {
            RingmodQuantity::SphereFamilyModulus => sphere_family_modulus(&SphereFamily::conformal(ring)).value,
            RingmodQuantity::RingCapacity => ring_capacity(&Condenser::new(ring)).value,
            RingmodQuantity::SeparatingModulus => separating_modulus(&Condenser::new(ring)).value,
        };
        write_out(out, v, "out")
    })
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RingmodCheck {
    LowerQ = 0,
    RingQ = 1,
    MainLemmaChain = 2,
}

/// Runs a check about the mapping's center on (r1, r2) and returns the
/// report as JSON. `weight` may be NULL to use N(f, D) K_f (raised to n-1 for
/// the ring check). `holds` receives 1 when the inequality holds.
///
/// # Safety
/// Handles must be live; `report_json` receives a string to release with
/// [`ringmod_string_free`].
#[no_mangle]
pub unsafe extern "C" fn ringmod_check(
    which: RingmodCheck,
    mapping: *const RingmodMapping,
    weight: *const RingmodWeight,
    r1: f64,
    r2: f64,
    holds: *mut c_int,
    report_json: *mut *mut c_char,
) -> RingmodStatus {
    guard(|| {
        let f = &read_handle(mapping, "mapping")?.inner;
        let c = f.center();
        let spec = QuadratureSpec::default();
        let q = match weight.as_ref() {
            Some(w) => w.inner.clone(),
            None => {
                let base = lower_q_weight(f, &SphericalRing::new(c, r1, r2)?, 0)?;
                if which == RingmodCheck::RingQ {
                    base.powf(f.dim() as f64 - 1.0)?
                } else {
                    base
                }
            }
        };
        let report = match which {
            RingmodCheck::LowerQ => check_lower_q(f, &q, &c, r1, r2, &spec)?,
            RingmodCheck::RingQ => check_ring_q(f, &q, &c, r1, r2, &spec)?,
            RingmodCheck::MainLemmaChain => check_main_lemma_chain(f, &q, &c, (r1, r2), &spec)?,
        };
        if !holds.is_null() {
            holds.write((report.verdict == ringmod::verify::Verdict::Holds) as c_int);
        }
        if report_json.is_null() {
            return Ok(());
        }
        write_string(report_json, serde_json::to_string(&report).expect("report serialises"))
    })
}

/// Runs a full JSON configuration in memory. `exit_code` receives the
/// CLI exit status (0, 3 or 4); a malformed config returns
/// `RINGMOD_STATUS_INVALID_JSON` or `RINGMOD_STATUS_INVALID_ARGUMENT`.
///
/// # Safety
/// `config_json` must be a valid string; out pointers valid.
#[no_mangle]
pub unsafe extern "C" fn ringmod_run_config(
    config_json: *const c_char,
    exit_code: *mut c_int,
    report_json: *mut *mut c_char,
) -> RingmodStatus {
    guard(|| {
        let text = read_str(config_json, "config_json")?;
        let cfg = RunConfig::from_json(text).map_err(|e| Failure(RingmodStatus::InvalidJson, e.to_string()))?;
        let outcome = execute(&cfg, &RunOptions::default())?;
        write_out(exit_code, outcome.report.exit_code() as c_int, "exit_code")?;
        write_string(report_json, outcome.report.to_json())
    })
}
