//! C ABI over eprlab. Every call returns an `EprStatus`; on failure the
//! message is available from `eprlab_last_error` on the same thread.
//! Handles are opaque and must be released with their `_free` function.
//!
//! # Safety
//!
//! Pointer arguments must be null or valid for the access implied by their
//! type and length argument. Handles must come from the matching `_new`
//! function and must not be used after `_free`.

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use eprlab::bohmsim::{self, ExperimentConfig, Field, PairCoordinates};
use eprlab::densecode::{BellLabel, DenseCoder, Sign};
use eprlab::numkit::CVec;
use eprlab::teleport::Teleporter;
use eprlab::EprError;
use num_complex::Complex64;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EprStatus {
    Ok = 0,
    NullPointer = 1,
    Config = 2,
    Size = 3,
    Format = 4,
    Dimension = 5,
    Capability = 6,
    Ambiguity = 7,
    Node = 8,
    Coverage = 9,
    State = 10,
    Io = 11,
    BufferTooSmall = 12,
    Panic = 13,
}

/// Bell label: sign is +1 or -1.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EprLabel {
    pub k: u32,
    pub sign: i32,
    pub j: u32,
}

pub struct EprDenseCoder(DenseCoder);
pub struct EprTeleporter(Teleporter);
pub struct EprBohmField(Field);

thread_local! {
    static LAST: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_last(msg: String) {
    LAST.with(|l| *l.borrow_mut() = msg);
}

fn status_of(e: &EprError) -> EprStatus {
    match e {
        EprError::Size(_) => EprStatus::Size,
        EprError::Format(_) | EprError::Parse { .. } | EprError::Validation(_) => EprStatus::Format,
        EprError::OrderMismatch { .. } | EprError::Dimension { .. } => EprStatus::Dimension,
        EprError::Capability(_) => EprStatus::Capability,
        EprError::Ambiguity { .. } => EprStatus::Ambiguity,
        EprError::Node { .. } => EprStatus::Node,
        EprError::Coverage(_) => EprStatus::Coverage,
        EprError::State(_) => EprStatus::State,
        EprError::Config(_) => EprStatus::Config,
        EprError::Io(_) => EprStatus::Io,
    }
}

fn guard(f: impl FnOnce() -> Result<(), EprStatus>) -> EprStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_last(String::new());
            EprStatus::Ok
        }
        Ok(Err(s)) => s,
        Err(_) => {
            set_last("panic inside eprlab".into());
            EprStatus::Panic
        }
    }
}

fn fail(e: EprError) -> EprStatus {
    let s = status_of(&e);
    set_last(e.to_string());
    s
}

fn null() -> EprStatus {
    set_last("null pointer argument".into());
    EprStatus::NullPointer
}

fn label_in(n: usize, l: EprLabel) -> Result<BellLabel, EprStatus> {
    let sign = match l.sign {
        1 => Sign::Plus,
        -1 => Sign::Minus,
        s => return Err(fail(EprError::Config(format!("sign must be +1 or -1, got {s}")))),
    };
    BellLabel::new(n, l.k as usize, sign, l.j as usize).map_err(fail)
}

fn label_out(l: BellLabel) -> EprLabel {
    EprLabel { k: l.k as u32, sign: l.sign.value() as i32, j: l.j as u32 }
}

unsafe fn read_state(re: *const f64, im: *const f64, len: usize) -> Result<CVec, EprStatus> {
    if re.is_null() || im.is_null() {
        return Err(null());
    }
    let re = std::slice::from_raw_parts(re, len);
    let im = std::slice::from_raw_parts(im, len);
    Ok(CVec::from_iterator(len, re.iter().zip(im).map(|(&a, &b)| Complex64::new(a, b))))
}

/// Copies the last error message of this thread into `buf` (NUL-terminated,
/// truncated to `len`). Returns the full message length.
#[no_mangle]
pub unsafe extern "C" fn eprlab_last_error(buf: *mut c_char, len: usize) -> usize {
    LAST.with(|l| {
        let s = l.borrow();
        if !buf.is_null() && len > 0 {
            let n = s.len().min(len - 1);
            ptr::copy_nonoverlapping(s.as_ptr() as *const c_char, buf, n);
            *buf.add(n) = 0;
        }
        s.len()
    })
}

// ---------------------------------------------------------------- dense coding

/// Dense coder over 2N channels with the built-in Hadamard choice.
#[no_mangle]
pub unsafe extern "C" fn eprlab_dense_new(n: usize, out: *mut *mut EprDenseCoder) -> EprStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let c = DenseCoder::with_table_hadamard(n).map_err(fail)?;
        *out = Box::into_raw(Box::new(EprDenseCoder(c)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn eprlab_dense_free(h: *mut EprDenseCoder) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

#[no_mangle]
pub unsafe extern "C" fn eprlab_dense_n(h: *const EprDenseCoder) -> usize {
    h.as_ref().map(|c| c.0.n()).unwrap_or(0)
}

/// Encodes message m in [0, 4N²), measures, and writes the decoded message.
#[no_mangle]
pub unsafe extern "C" fn eprlab_dense_roundtrip(h: *const EprDenseCoder, message: usize, decoded: *mut usize, label: *mut EprLabel) -> EprStatus {
    guard(|| {
        let c = h.as_ref().ok_or_else(null)?;
        if decoded.is_null() {
            return Err(null());
        }
        let r = c.0.roundtrip(message).map_err(fail)?;
        let out = eprlab::densecode::decode_message(&r.message_out, c.0.message_bits()).map_err(fail)?;
        *decoded = out;
        if !label.is_null() {
            *label = label_out(r.label);
        }
        Ok(())
    })
}

/// Writes the (2N)² amplitudes of a Bell state into re/im.
#[no_mangle]
pub unsafe extern "C" fn eprlab_dense_bell(h: *const EprDenseCoder, label: EprLabel, re: *mut f64, im: *mut f64, len: usize) -> EprStatus {
    guard(|| {
        let c = h.as_ref().ok_or_else(null)?;
        if re.is_null() || im.is_null() {
            return Err(null());
        }
        let n = c.0.n();
        let v = c.0.bell(label_in(n, label)?);
        if len < v.len() {
            set_last(format!("buffer holds {len}, need {}", v.len()));
            return Err(EprStatus::BufferTooSmall);
        }
        for (i, z) in v.iter().enumerate() {
            *re.add(i) = z.re;
            *im.add(i) = z.im;
        }
        Ok(())
    })
}

/// Bell measurement of a pair state of length (2N)².
#[no_mangle]
pub unsafe extern "C" fn eprlab_dense_measure(h: *const EprDenseCoder, re: *const f64, im: *const f64, len: usize, label: *mut EprLabel, weight: *mut f64) -> EprStatus {
    guard(|| {
        let c = h.as_ref().ok_or_else(null)?;
        if label.is_null() {
            return Err(null());
        }
        let v = read_state(re, im, len)?;
        let (l, w) = match c.0.bsm_dense(&v) {
            Ok(r) => (r.label, r.weight),
            Err(EprError::Capability(_)) => c.0.bsm_project(&v).map_err(fail)?,
            Err(e) => return Err(fail(e)),
        };
        *label = label_out(l);
        if !weight.is_null() {
            *weight = w;
        }
        Ok(())
    })
}

// ---------------------------------------------------------------- teleport

#[no_mangle]
pub unsafe extern "C" fn eprlab_teleporter_new(n: usize, out: *mut *mut EprTeleporter) -> EprStatus {
    guard(|| {
        if out.is_null() {
            return Err(null());
        }
        let h = eprlab::densecode::table_hadamard(n).map_err(fail)?;
        let t = Teleporter::new(n, h).map_err(fail)?;
        *out = Box::into_raw(Box::new(EprTeleporter(t)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn eprlab_teleporter_free(h: *mut EprTeleporter) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Teleports a 2N-amplitude state with a seeded measurement. Bob's corrected
/// state is written to out_re/out_im when they are non-null.
#[no_mangle]
pub unsafe extern "C" fn eprlab_teleport(
    h: *const EprTeleporter,
    re: *const f64,
    im: *const f64,
    len: usize,
    seed: u64,
    outcome: *mut EprLabel,
    fidelity: *mut f64,
    out_re: *mut f64,
    out_im: *mut f64,
) -> EprStatus {
    guard(|| {
        let t = h.as_ref().ok_or_else(null)?;
        if outcome.is_null() || fidelity.is_null() {
            return Err(null());
        }
        let phi = read_state(re, im, len)?;
        let r = t.0.simulate(&phi, seed).map_err(fail)?;
        *outcome = label_out(r.outcome_position);
        *fidelity = r.fidelity;
        if !out_re.is_null() && !out_im.is_null() {
            for (i, z) in r.bob_after.iter().enumerate().take(len) {
                *out_re.add(i) = z.re;
                *out_im.add(i) = z.im;
            }
        }
        Ok(())
    })
}

// ---------------------------------------------------------------- bohm

/// Field from a JSON experiment config (NUL-terminated UTF-8).
#[no_mangle]
pub unsafe extern "C" fn eprlab_bohm_new(json: *const c_char, out: *mut *mut EprBohmField) -> EprStatus {
    guard(|| {
        if json.is_null() || out.is_null() {
            return Err(null());
        }
        let s = CStr::from_ptr(json).to_str().map_err(|e| fail(EprError::Config(e.to_string())))?;
        let cfg = ExperimentConfig::from_json(s).map_err(fail)?;
        let f = Field::new(&cfg).map_err(fail)?;
        *out = Box::into_raw(Box::new(EprBohmField(f)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn eprlab_bohm_free(h: *mut EprBohmField) {
    if !h.is_null() {
        drop(Box::from_raw(h));
    }
}

/// Guidance velocities at (y1, y2, t), x on the free paths.
#[no_mangle]
pub unsafe extern "C" fn eprlab_bohm_velocities(h: *const EprBohmField, y1: f64, y2: f64, t: f64, v1: *mut f64, v2: *mut f64) -> EprStatus {
    guard(|| {
        let f = h.as_ref().ok_or_else(null)?;
        if v1.is_null() || v2.is_null() {
            return Err(null());
        }
        let c = PairCoordinates::at(f.0.config(), y1, y2, t);
        let (a, b) = bohmsim::bohm_velocities(f.0.config(), &c).map_err(fail)?;
        *v1 = a;
        *v2 = b;
        Ok(())
    })
}

/// Endpoint of one trajectory from (y1, y2) at t=0 to t_final.
/// `truncated` is set to 1 when the integrator stopped at a node.
#[no_mangle]
pub unsafe extern "C" fn eprlab_bohm_trajectory_end(
    h: *const EprBohmField,
    y1: f64,
    y2: f64,
    t_final: f64,
    end_y1: *mut f64,
    end_y2: *mut f64,
    truncated: *mut i32,
) -> EprStatus {
    guard(|| {
        let f = h.as_ref().ok_or_else(null)?;
        if end_y1.is_null() || end_y2.is_null() {
            return Err(null());
        }
        let cfg = f.0.config();
        let ctrl = bohmsim::StepControl::for_params(&cfg.params);
        let tr = bohmsim::integrate_endpoint(&f.0, &PairCoordinates::at(cfg, y1, y2, 0.0), t_final, ctrl).map_err(fail)?;
        let e = tr.last();
        *end_y1 = e.y1;
        *end_y2 = e.y2;
        if !truncated.is_null() {
            *truncated = tr.truncated as i32;
        }
        Ok(())
    })
}

/// y0 √(1 + a²) for the configured parameters.
#[no_mangle]
pub unsafe extern "C" fn eprlab_bohm_com(h: *const EprBohmField, y0: f64, t: f64, out: *mut f64) -> EprStatus {
    guard(|| {
        let f = h.as_ref().ok_or_else(null)?;
        if out.is_null() {
            return Err(null());
        }
        *out = bohmsim::com_closed_form(y0, &f.0.config().params, t);
        Ok(())
    })
}
