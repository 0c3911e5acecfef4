//! C ABI over the overlap-lab library.
//!
//! Every fallible function returns an [`OlStatus`]; on failure the message is
//! kept per thread and can be read with [`ol_last_error_message`]. Models and
//! Melnikov profiles are opaque heap handles released with their `_free`
//! functions.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use overlap_lab::fixedpoints::refine_fixed_point;
use overlap_lab::integrate::{strobe, strobe_jacobian};
use overlap_lab::melnikov::{melnikov_profile, separatrix, MelnikovProfile};
use overlap_lab::regimes::{confinement_test, ConfinementOptions, Verdict};
use overlap_lab::{Coupling, Error, Family, IntegratorConfig, ModelSpec, Perturbation, PhaseState};

pub const OL_FAMILY_CUBIC: u32 = 0;
pub const OL_FAMILY_TORUS: u32 = 1;

pub const OL_COUPLING_MU_ONLY: u32 = 0;
pub const OL_COUPLING_EPS_MU: u32 = 1;

pub const OL_VERDICT_CONFINED: u32 = 0;
pub const OL_VERDICT_OVERLAPPED: u32 = 1;
pub const OL_VERDICT_UNDETERMINED: u32 = 2;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OlStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Parse = 3,
    NotASaddle = 4,
    NoConvergence = 5,
    NotHyperbolic = 6,
    Integration = 7,
    NoSuchConnection = 8,
    InsufficientArclength = 9,
    Io = 10,
    Panic = 11,
}

/// Opaque model handle.
pub struct OlModel {
    spec: ModelSpec,
}

/// Opaque Melnikov profile handle.
pub struct OlProfile {
    profile: MelnikovProfile,
}

/// Integrator settings. Pass `NULL` wherever one is accepted to use the
/// defaults of [`ol_integrator_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct OlIntegrator {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_step: f64,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct OlHyperbolicOrbit {
    pub x: f64,
    pub y: f64,
    pub t: f64,
    pub lambda_u: f64,
    pub lambda_s: f64,
    pub v_u: [f64; 2],
    pub v_s: [f64; 2],
    pub residual: f64,
    pub parent_x: f64,
    pub parent_y: f64,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> OlStatus {
    match e {
        Error::InvalidSpec(_) | Error::InvalidArgument(_) => OlStatus::InvalidArgument,
        Error::Parse(_) => OlStatus::Parse,
        Error::NotASaddle { .. } => OlStatus::NotASaddle,
        Error::NoConvergence { .. } => OlStatus::NoConvergence,
        Error::NotHyperbolic { .. } => OlStatus::NotHyperbolic,
        Error::StepLimit { .. }
        | Error::StepUnderflow { .. }
        | Error::Integration(_)
        | Error::TailTruncation { .. } => OlStatus::Integration,
        Error::NoSuchConnection(_) => OlStatus::NoSuchConnection,
        Error::InsufficientArclength(_) => OlStatus::InsufficientArclength,
        Error::Io(_) | Error::Json(_) => OlStatus::Io,
    }
}

/// Runs `f`, converting errors and panics into a status plus message.
fn guard<F>(f: F) -> OlStatus
where
    F: FnOnce() -> Result<(), (OlStatus, String)>,
{
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            OlStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic".into());
            OlStatus::Panic
        }
    }
}

fn lib_err(e: Error) -> (OlStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (OlStatus, String) {
    (OlStatus::NullPointer, format!("{what} is NULL"))
}

fn config(ptr: *const OlIntegrator, base: IntegratorConfig) -> IntegratorConfig {
    // SAFETY: the caller passes NULL or a valid pointer.
    match unsafe { ptr.as_ref() } {
        Some(c) => IntegratorConfig {
            abs_tol: c.abs_tol,
            rel_tol: c.rel_tol,
            max_step: c.max_step,
            ..base
        },
        None => base,
    }
}

fn model<'a>(m: *const OlModel) -> Result<&'a OlModel, (OlStatus, String)> {
    // SAFETY: handles come from `ol_model_new` and are live until freed.
    unsafe { m.as_ref() }.ok_or_else(|| null("model"))
}

/// Default integrator settings (absolute 1e-12, relative 1e-10).
#[no_mangle]
pub extern "C" fn ol_integrator_default() -> OlIntegrator {
    let c = IntegratorConfig::default();
    OlIntegrator {
        abs_tol: c.abs_tol,
        rel_tol: c.rel_tol,
        max_step: c.max_step,
    }
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ol_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Copies the calling thread's last error message into `buf` (truncated,
/// always NUL-terminated when `len > 0`). Returns the full message length
/// excluding the terminator, or 0 when there is no error.
///
/// # Safety
/// `buf` must be NULL or point to `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ol_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let e = e.borrow();
        let Some(msg) = e.as_ref() else {
            if !buf.is_null() && len > 0 {
                *buf = 0;
            }
            return 0;
        };
        let bytes = msg.as_bytes();
        if !buf.is_null() && len > 0 {
            let n = bytes.len().min(len - 1);
            ptr::copy_nonoverlapping(bytes.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        bytes.len()
    })
}

/// Creates a model. `f_expr` is an inline perturbation such as
/// `"cos(x+2y+t)"`; NULL selects that default.
///
/// # Safety
/// `f_expr` must be NULL or a valid C string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn ol_model_new(
    family: u32,
    epsilon: f64,
    mu: f64,
    coupling: u32,
    f_expr: *const c_char,
    out: *mut *mut OlModel,
) -> OlStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let family = match family {
            OL_FAMILY_CUBIC => Family::Cubic,
            OL_FAMILY_TORUS => Family::Torus,
            other => return Err((OlStatus::InvalidArgument, format!("unknown family {other}"))),
        };
        let coupling = match coupling {
            OL_COUPLING_MU_ONLY => Coupling::MuOnly,
            OL_COUPLING_EPS_MU => Coupling::EpsMu,
            other => {
                return Err((
                    OlStatus::InvalidArgument,
                    format!("unknown coupling {other}"),
                ))
            }
        };
        let perturbation = if f_expr.is_null() {
            Perturbation::standard()
        } else {
            let s = CStr::from_ptr(f_expr)
                .to_str()
                .map_err(|_| (OlStatus::Parse, "perturbation is not UTF-8".to_string()))?;
            Perturbation::parse_expr(s).map_err(lib_err)?
        };
        let spec = ModelSpec::new(family, epsilon, mu, perturbation, coupling).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(OlModel { spec }));
        Ok(())
    })
}

/// Releases a model. NULL is ignored.
///
/// # Safety
/// `m` must be NULL or a handle from `ol_model_new` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ol_model_free(m: *mut OlModel) {
    if !m.is_null() {
        drop(Box::from_raw(m));
    }
}

/// `H(x, y, t)`.
///
/// # Safety
/// `m` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ol_energy(
    m: *const OlModel,
    x: f64,
    y: f64,
    t: f64,
    out: *mut f64,
) -> OlStatus {
    guard(|| {
        let m = model(m)?;
        if out.is_null() {
            return Err(null("out"));
        }
        *out = m.spec.energy(&PhaseState::new(x, y, t));
        Ok(())
    })
}

/// `(ẋ, ẏ)` at `(x, y, t)`.
///
/// # Safety
/// `m` must be a live handle and `dx`, `dy` writable.
#[no_mangle]
pub unsafe extern "C" fn ol_vector_field(
    m: *const OlModel,
    x: f64,
    y: f64,
    t: f64,
    dx: *mut f64,
    dy: *mut f64,
) -> OlStatus {
    guard(|| {
        let m = model(m)?;
        if dx.is_null() || dy.is_null() {
            return Err(null("output"));
        }
        let (a, b) = m.spec.vector_field(x, y, t);
        *dx = a;
        *dy = b;
        Ok(())
    })
}

/// `n` iterates of the time-2π map from `(x, y)` at phase `t0`, written to
/// `xs[0..n]` and `ys[0..n]` as lifted coordinates.
///
/// # Safety
/// `m` must be a live handle; `xs` and `ys` must hold `n` doubles;
/// `cfg` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn ol_strobe(
    m: *const OlModel,
    x: f64,
    y: f64,
    t0: f64,
    n: usize,
    cfg: *const OlIntegrator,
    xs: *mut f64,
    ys: *mut f64,
) -> OlStatus {
    guard(|| {
        let m = model(m)?;
        if xs.is_null() || ys.is_null() {
            return Err(null("output buffer"));
        }
        let cfg = config(cfg, IntegratorConfig::default());
        let its = strobe(&m.spec, PhaseState::new(x, y, t0), n, &cfg).map_err(lib_err)?;
        for (k, s) in its.iter().enumerate() {
            *xs.add(k) = s.x;
            *ys.add(k) = s.y;
        }
        Ok(())
    })
}

/// Jacobian of the time-2π map, row-major into `out[0..4]`.
///
/// # Safety
/// `m` must be a live handle and `out` hold 4 doubles; `cfg` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn ol_strobe_jacobian(
    m: *const OlModel,
    x: f64,
    y: f64,
    t0: f64,
    cfg: *const OlIntegrator,
    out: *mut f64,
) -> OlStatus {
    guard(|| {
        let m = model(m)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = config(cfg, IntegratorConfig::default());
        let j = strobe_jacobian(&m.spec, PhaseState::new(x, y, t0), &cfg).map_err(lib_err)?;
        for (k, v) in j.0.iter().flatten().enumerate() {
            *out.add(k) = *v;
        }
        Ok(())
    })
}

/// Newton refinement of a fixed point of the time-2π map at phase `t0`.
///
/// # Safety
/// `m` must be a live handle and `out` writable; `cfg` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn ol_refine_fixed_point(
    m: *const OlModel,
    x: f64,
    y: f64,
    t0: f64,
    cfg: *const OlIntegrator,
    out: *mut OlHyperbolicOrbit,
) -> OlStatus {
    guard(|| {
        let m = model(m)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = config(cfg, IntegratorConfig::default());
        let o = refine_fixed_point(&m.spec, PhaseState::new(x, y, t0), &cfg).map_err(lib_err)?;
        *out = OlHyperbolicOrbit {
            x: o.base.x,
            y: o.base.y,
            t: o.base.t,
            lambda_u: o.lambda_u(),
            lambda_s: o.lambda_s(),
            v_u: o.v_u(),
            v_s: o.v_s(),
            residual: o.residual,
            parent_x: o.parent_saddle.x,
            parent_y: o.parent_saddle.y,
        };
        Ok(())
    })
}

/// Melnikov profile (per unit `μ`) of the model's perturbation along the
/// unperturbed connection from saddle `(from_x, from_y)` to `(to_x, to_y)`.
///
/// # Safety
/// `m` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn ol_melnikov_profile(
    m: *const OlModel,
    from_x: f64,
    from_y: f64,
    to_x: f64,
    to_y: f64,
    n_t0: usize,
    out: *mut *mut OlProfile,
) -> OlStatus {
    guard(|| {
        let m = model(m)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let sep = separatrix(
            &m.spec.unperturbed(),
            PhaseState::at(from_x, from_y),
            PhaseState::at(to_x, to_y),
            None,
        )
        .map_err(lib_err)?;
        let profile =
            melnikov_profile(&sep, &m.spec.perturbation_per_unit_mu(), n_t0).map_err(lib_err)?;
        *out = Box::into_raw(Box::new(OlProfile { profile }));
        Ok(())
    })
}

/// Number of sampled phases.
///
/// # Safety
/// `p` must be NULL or a live profile handle.
#[no_mangle]
pub unsafe extern "C" fn ol_profile_len(p: *const OlProfile) -> usize {
    p.as_ref().map_or(0, |p| p.profile.t0.len())
}

/// Copies up to `cap` samples into `t0` and `values`; returns the number copied.
///
/// # Safety
/// `p` must be a live handle; `t0` and `values` must hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn ol_profile_samples(
    p: *const OlProfile,
    t0: *mut f64,
    values: *mut f64,
    cap: usize,
) -> usize {
    let Some(p) = p.as_ref() else { return 0 };
    if t0.is_null() || values.is_null() {
        return 0;
    }
    let n = p.profile.t0.len().min(cap);
    for k in 0..n {
        *t0.add(k) = p.profile.t0[k];
        *values.add(k) = p.profile.values[k];
    }
    n
}

/// Profile value at any phase, from its harmonic expansion.
///
/// # Safety
/// `p` must be a live profile handle.
#[no_mangle]
pub unsafe extern "C" fn ol_profile_eval(p: *const OlProfile, t0: f64) -> f64 {
    p.as_ref().map_or(f64::NAN, |p| p.profile.eval(t0))
}

/// Copies up to `cap` simple zeros into `zeros`; returns the number copied.
///
/// # Safety
/// `p` must be a live handle and `zeros` hold `cap` doubles.
#[no_mangle]
pub unsafe extern "C" fn ol_profile_zeros(
    p: *const OlProfile,
    zeros: *mut f64,
    cap: usize,
) -> usize {
    let Some(p) = p.as_ref() else { return 0 };
    if zeros.is_null() {
        return 0;
    }
    let n = p.profile.zeros.len().min(cap);
    for k in 0..n {
        *zeros.add(k) = p.profile.zeros[k].t0;
    }
    n
}

/// # Safety
/// `p` must be NULL or a handle from `ol_melnikov_profile` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ol_profile_free(p: *mut OlProfile) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Confinement test with `n_orbits` seeds and `n_strobe` iterates each;
/// writes one of the `OL_VERDICT_*` values. Zero budgets select defaults.
///
/// # Safety
/// `m` must be a live handle and `verdict` writable.
#[no_mangle]
pub unsafe extern "C" fn ol_confinement_test(
    m: *const OlModel,
    n_orbits: usize,
    n_strobe: usize,
    verdict: *mut u32,
) -> OlStatus {
    guard(|| {
        let m = model(m)?;
        if verdict.is_null() {
            return Err(null("verdict"));
        }
        let mut opts = ConfinementOptions::default();
        if n_orbits > 0 {
            opts.n_orbits = n_orbits;
        }
        if n_strobe > 0 {
            opts.n_strobe = n_strobe;
        }
        let r = confinement_test(&m.spec, &opts).map_err(lib_err)?;
        *verdict = match r.verdict {
            Verdict::Confined => OL_VERDICT_CONFINED,
            Verdict::Overlapped => OL_VERDICT_OVERLAPPED,
            Verdict::Undetermined => OL_VERDICT_UNDETERMINED,
        };
        Ok(())
    })
}
