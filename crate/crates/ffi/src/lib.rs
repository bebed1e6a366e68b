//! C ABI for `ndae-ident`.
//!
//! Objects cross the boundary as opaque handles created by `*_new`/`*_load`
//! style functions and released with the matching `*_free`. Every function
//! returns an [`NdaeStatus`]; on failure, [`ndae_last_error`] describes the
//! most recent error on the calling thread. Matrices are dense row-major
//! `double` arrays. Strings returned to the caller are released with
//! [`ndae_string_free`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use ndae_ident::certificate::{check_assumption3, prop1_bound};
use ndae_ident::dae::{simulate, tableau, InputSignal, SolverConfig, Trajectory};
use ndae_ident::model::{build_synthetic_model, NdaeModel};
use ndae_ident::nn::Checkpoint;
use ndae_ident::numerics::Matrix;
use ndae_ident::Error;

/// Result code of every entry point.
#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NdaeStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    DimensionMismatch = 3,
    SingularMatrix = 4,
    NoConvergence = 5,
    SolverFailure = 6,
    NotPositiveDefinite = 7,
    NotSymmetric = 8,
    NotHurwitz = 9,
    Io = 10,
    Json = 11,
    Panic = 12,
    Other = 13,
}

impl From<&Error> for NdaeStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::InvalidArgument(_) | Error::UnknownTableau(_) | Error::TooFewPoints { .. } => {
                NdaeStatus::InvalidArgument
            }
            Error::DimensionMismatch(_) => NdaeStatus::DimensionMismatch,
            Error::SingularMatrix { .. } | Error::IndexViolation => NdaeStatus::SingularMatrix,
            Error::NoConvergence { .. } => NdaeStatus::NoConvergence,
            Error::SolverFailure { .. } => NdaeStatus::SolverFailure,
            Error::NotPositiveDefinite { .. } => NdaeStatus::NotPositiveDefinite,
            Error::NotSymmetric { .. } => NdaeStatus::NotSymmetric,
            Error::NotHurwitz => NdaeStatus::NotHurwitz,
            Error::Io(_) => NdaeStatus::Io,
            Error::Json(_) => NdaeStatus::Json,
            _ => NdaeStatus::Other,
        }
    }
}

/// Opaque model handle.
pub struct NdaeModelHandle(NdaeModel);

/// Opaque simulation result.
pub struct NdaeTrajectory(Trajectory);

/// Opaque network checkpoint (algebraic map or differential network).
pub struct NdaeCheckpoint(Checkpoint);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

enum Fail {
    Null(&'static str),
    Core(Error),
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

type FfiResult = Result<(), Fail>;

/// Runs `f`, converting errors and panics into a status code.
fn guard(f: impl FnOnce() -> FfiResult) -> NdaeStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => NdaeStatus::Ok,
        Ok(Err(Fail::Null(what))) => {
            set_last_error(format!("null pointer: {what}"));
            NdaeStatus::NullPointer
        }
        Ok(Err(Fail::Core(e))) => {
            set_last_error(e.to_string());
            NdaeStatus::from(&e)
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {msg}"));
            NdaeStatus::Panic
        }
    }
}

unsafe fn input<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a>(p: *mut f64, len: usize, what: &'static str) -> Result<&'a mut [f64], Fail> {
    if len == 0 {
        return Ok(&mut []);
    }
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(slice::from_raw_parts_mut(p, len))
}

unsafe fn text<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::Core(Error::InvalidArgument(format!("{what} is not UTF-8"))))
}

unsafe fn handle<'a, T>(p: *const T, what: &'static str) -> Result<&'a T, Fail> {
    p.as_ref().ok_or(Fail::Null(what))
}

fn store<T>(out: *mut *mut T, value: T) -> FfiResult {
    if out.is_null() {
        return Err(Fail::Null("out"));
    }
    unsafe { *out = Box::into_raw(Box::new(value)) };
    Ok(())
}

fn store_string(out: *mut *mut c_char, s: String) -> FfiResult {
    if out.is_null() {
        return Err(Fail::Null("out"));
    }
    let c = CString::new(s).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    unsafe { *out = c.into_raw() };
    Ok(())
}

fn copy_out(dst: &mut [f64], src: &[f64]) -> FfiResult {
    if dst.len() != src.len() {
        return Err(Error::DimensionMismatch(format!(
            "output buffer holds {}, need {}",
            dst.len(),
            src.len()
        ))
        .into());
    }
    dst.copy_from_slice(src);
    Ok(())
}

unsafe fn square(p: *const f64, n: usize, what: &'static str) -> Result<Matrix, Fail> {
    Ok(Matrix::from_row_major(n, n, input(p, n * n, what)?.to_vec())?)
}

/// Message of the last failed call on this thread, or null. Valid until
/// the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn ndae_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn ndae_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn ndae_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Synthetic `n_gen`-generator model.
#[no_mangle]
pub unsafe extern "C" fn ndae_model_synthetic(
    n_gen: usize,
    seed: u64,
    out: *mut *mut NdaeModelHandle,
) -> NdaeStatus {
    guard(|| store(out, NdaeModelHandle(build_synthetic_model(n_gen, seed)?)))
}

#[no_mangle]
pub unsafe extern "C" fn ndae_model_from_json(
    json: *const c_char,
    out: *mut *mut NdaeModelHandle,
) -> NdaeStatus {
    guard(|| {
        let s = text(json, "json")?;
        store(out, NdaeModelHandle(NdaeModel::from_json(s)?))
    })
}

/// Serializes the model; release the string with [`ndae_string_free`].
#[no_mangle]
pub unsafe extern "C" fn ndae_model_to_json(
    model: *const NdaeModelHandle,
    out: *mut *mut c_char,
) -> NdaeStatus {
    guard(|| {
        let m = handle(model, "model")?;
        store_string(out, m.0.to_json()?)
    })
}

#[no_mangle]
pub unsafe extern "C" fn ndae_model_free(model: *mut NdaeModelHandle) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Writes the state and input sizes; any output pointer may be null.
#[no_mangle]
pub unsafe extern "C" fn ndae_model_dims(
    model: *const NdaeModelHandle,
    n_d: *mut usize,
    n_a: *mut usize,
    m: *mut usize,
) -> NdaeStatus {
    guard(|| {
        let h = &handle(model, "model")?.0;
        for (p, v) in [(n_d, h.n_d), (n_a, h.n_a), (m, h.m)] {
            if !p.is_null() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// `out[n_d] = f̃(x_d, x_a, u)`.
#[no_mangle]
pub unsafe extern "C" fn ndae_model_rhs(
    model: *const NdaeModelHandle,
    xd: *const f64,
    xa: *const f64,
    u: *const f64,
    out: *mut f64,
) -> NdaeStatus {
    guard(|| {
        let h = &handle(model, "model")?.0;
        let v = h.eval_dynamic_rhs(
            input(xd, h.n_d, "xd")?,
            input(xa, h.n_a, "xa")?,
            input(u, h.m, "u")?,
        )?;
        copy_out(output(out, h.n_d, "out")?, &v)
    })
}

/// `out[n_a] = g̃(x_d, x_a)`.
#[no_mangle]
pub unsafe extern "C" fn ndae_model_residual(
    model: *const NdaeModelHandle,
    xd: *const f64,
    xa: *const f64,
    out: *mut f64,
) -> NdaeStatus {
    guard(|| {
        let h = &handle(model, "model")?.0;
        let v = h.eval_algebraic_residual(input(xd, h.n_d, "xd")?, input(xa, h.n_a, "xa")?)?;
        copy_out(output(out, h.n_a, "out")?, &v)
    })
}

/// Solves `g̃(x_d0, x_a) = 0` from `xa_guess` (null means zeros).
#[no_mangle]
pub unsafe extern "C" fn ndae_model_consistent_init(
    model: *const NdaeModelHandle,
    xd0: *const f64,
    xa_guess: *const f64,
    out: *mut f64,
) -> NdaeStatus {
    guard(|| {
        let h = &handle(model, "model")?.0;
        let zeros = vec![0.0; h.n_a];
        let guess = if xa_guess.is_null() {
            &zeros[..]
        } else {
            input(xa_guess, h.n_a, "xa_guess")?
        };
        let v = h.consistent_init(input(xd0, h.n_d, "xd0")?, guess)?;
        copy_out(output(out, h.n_a, "out")?, &v)
    })
}

/// Fixed-step simulation under `u_k(t) = offset_k + amplitude_k·sin(2π·frequency·t + phase_k)`.
/// `amplitude` and `phase` may be null for a constant input.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn ndae_simulate(
    model: *const NdaeModelHandle,
    tableau_name: *const c_char,
    delta: f64,
    t_end: f64,
    xd0: *const f64,
    offset: *const f64,
    amplitude: *const f64,
    phase: *const f64,
    frequency: f64,
    out: *mut *mut NdaeTrajectory,
) -> NdaeStatus {
    guard(|| {
        let h = &handle(model, "model")?.0;
        let tab = tableau(text(tableau_name, "tableau_name")?)?;
        let m = h.m;
        let opt = |p: *const f64, what| -> Result<Vec<f64>, Fail> {
            if p.is_null() {
                Ok(vec![0.0; m])
            } else {
                Ok(input(p, m, what)?.to_vec())
            }
        };
        let signal = InputSignal::new(
            input(offset, m, "offset")?.to_vec(),
            opt(amplitude, "amplitude")?,
            frequency,
            opt(phase, "phase")?,
        )?;
        let cfg = SolverConfig::with_delta(delta);
        let traj = simulate(h, input(xd0, h.n_d, "xd0")?, &|t| signal.eval(t), t_end, &tab, &cfg)?;
        store(out, NdaeTrajectory(traj))
    })
}

/// Number of output times.
#[no_mangle]
pub unsafe extern "C" fn ndae_trajectory_len(traj: *const NdaeTrajectory, len: *mut usize) -> NdaeStatus {
    guard(|| {
        let t = &handle(traj, "traj")?.0;
        if len.is_null() {
            return Err(Fail::Null("len"));
        }
        *len = t.len();
        Ok(())
    })
}

/// Copies the output times into `out[len]`.
#[no_mangle]
pub unsafe extern "C" fn ndae_trajectory_times(
    traj: *const NdaeTrajectory,
    out: *mut f64,
    len: usize,
) -> NdaeStatus {
    guard(|| {
        let t = &handle(traj, "traj")?.0;
        copy_out(output(out, len, "out")?, &t.times)
    })
}

/// Copies the differential states, row-major `len × n_d`.
#[no_mangle]
pub unsafe extern "C" fn ndae_trajectory_states_d(
    traj: *const NdaeTrajectory,
    out: *mut f64,
    len: usize,
) -> NdaeStatus {
    guard(|| {
        let t = &handle(traj, "traj")?.0;
        let flat: Vec<f64> = t.states_d.concat();
        copy_out(output(out, len, "out")?, &flat)
    })
}

/// Copies the algebraic states, row-major `len × n_a`.
#[no_mangle]
pub unsafe extern "C" fn ndae_trajectory_states_a(
    traj: *const NdaeTrajectory,
    out: *mut f64,
    len: usize,
) -> NdaeStatus {
    guard(|| {
        let t = &handle(traj, "traj")?.0;
        let flat: Vec<f64> = t.states_a.concat();
        copy_out(output(out, len, "out")?, &flat)
    })
}

#[no_mangle]
pub unsafe extern "C" fn ndae_trajectory_free(traj: *mut NdaeTrajectory) {
    if !traj.is_null() {
        drop(Box::from_raw(traj));
    }
}

/// `sqrt(c0 / (λ_min(P)·λ_min(P^{-1/2} W P^{-1/2})))` for `n × n` `P`, `W`.
#[no_mangle]
pub unsafe extern "C" fn ndae_prop1_bound(
    p: *const f64,
    w: *const f64,
    n: usize,
    c0: f64,
    out: *mut f64,
) -> NdaeStatus {
    guard(|| {
        let b = prop1_bound(&square(p, n, "p")?, &square(w, n, "w")?, c0)?;
        copy_out(output(out, 1, "out")?, &[b])
    })
}

/// Checks `AᵀP + PA + P·L⁻¹·P + c1·K + W ⪯ 0`; writes the verdict and
/// `−λ_max` of the left-hand side.
#[no_mangle]
#[allow(clippy::too_many_arguments)]
pub unsafe extern "C" fn ndae_check_assumption3(
    a: *const f64,
    p: *const f64,
    w: *const f64,
    l: *const f64,
    k: *const f64,
    n: usize,
    c1: f64,
    feasible: *mut bool,
    margin: *mut f64,
) -> NdaeStatus {
    guard(|| {
        let c = check_assumption3(
            &square(a, n, "a")?,
            &square(p, n, "p")?,
            &square(w, n, "w")?,
            &square(l, n, "l")?,
            &square(k, n, "k")?,
            c1,
        )?;
        if feasible.is_null() || margin.is_null() {
            return Err(Fail::Null("feasible/margin"));
        }
        *feasible = c.feasible;
        *margin = c.margin;
        Ok(())
    })
}

/// Loads a checkpoint JSON file written by the command-line tool.
#[no_mangle]
pub unsafe extern "C" fn ndae_checkpoint_load(
    path: *const c_char,
    out: *mut *mut NdaeCheckpoint,
) -> NdaeStatus {
    guard(|| store(out, NdaeCheckpoint(Checkpoint::load(text(path, "path")?)?)))
}

#[no_mangle]
pub unsafe extern "C" fn ndae_checkpoint_from_json(
    json: *const c_char,
    out: *mut *mut NdaeCheckpoint,
) -> NdaeStatus {
    guard(|| store(out, NdaeCheckpoint(Checkpoint::from_json(text(json, "json")?)?)))
}

/// Input and output sizes of the network: `(n_d, n_a)` for an algebraic
/// map, `(n, n)` for a differential network with `m` inputs.
#[no_mangle]
pub unsafe extern "C" fn ndae_checkpoint_dims(
    ckpt: *const NdaeCheckpoint,
    n_in: *mut usize,
    n_out: *mut usize,
    m: *mut usize,
) -> NdaeStatus {
    guard(|| {
        let (i, o, mm) = match &handle(ckpt, "ckpt")?.0 {
            Checkpoint::Mlp(net) => (net.input_dim(), net.output_dim(), 0),
            Checkpoint::Dnn(d) => (d.n(), d.n(), d.n_input()),
        };
        for (p, v) in [(n_in, i), (n_out, o), (m, mm)] {
            if !p.is_null() {
                *p = v;
            }
        }
        Ok(())
    })
}

/// Evaluates `ℓ̂(x)` for an algebraic map or `ẋ = dnn(x, u)` for a
/// differential network (`u` ignored for algebraic maps).
#[no_mangle]
pub unsafe extern "C" fn ndae_checkpoint_eval(
    ckpt: *const NdaeCheckpoint,
    x: *const f64,
    u: *const f64,
    out: *mut f64,
) -> NdaeStatus {
    guard(|| {
        let v = match &handle(ckpt, "ckpt")?.0 {
            Checkpoint::Mlp(net) => net.forward(input(x, net.input_dim(), "x")?)?,
            Checkpoint::Dnn(d) => d.rhs(input(x, d.n(), "x")?, input(u, d.n_input(), "u")?)?,
        };
        copy_out(output(out, v.len(), "out")?, &v)
    })
}

#[no_mangle]
pub unsafe extern "C" fn ndae_checkpoint_free(ckpt: *mut NdaeCheckpoint) {
    if !ckpt.is_null() {
        drop(Box::from_raw(ckpt));
    }
}
