//! C interface to the goalkeeper scoring engine.
//!
//! An engine is an opaque handle created by [`gkq_engine_new_default`] or
//! [`gkq_engine_from_frb`] and released with [`gkq_engine_free`]. Every
//! fallible call returns a [`GkqStatus`]; on failure a message is available
//! from [`gkq_last_error`] on the same thread until the next call. Strings
//! returned through out-parameters are owned by the caller and must be
//! released with [`gkq_string_free`]. A handle may be shared across threads
//! for scoring; freeing it must not race with other calls.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use gkq::gk::{default_calibration, Attribute, GKProfile, GkModel, QualityLevel, ScoreError};
use gkq::report::EvaluationReport;
use gkq::ruledsl::{format_rulebase, parse_rulebase_bytes};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GkqStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidJson = 3,
    InvalidProfile = 4,
    ParseError = 5,
    IncompatibleRulebase = 6,
    Internal = 7,
    Panic = 8,
}

/// Quality levels, worst to best.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GkqLevel {
    Awful = 0,
    RelativelyAwful = 1,
    Bad = 2,
    RelativelyBad = 3,
    Ordinary = 4,
    RelativelyGood = 5,
    Good = 6,
    AlmostExcellent = 7,
    Excellent = 8,
}

impl From<QualityLevel> for GkqLevel {
    fn from(level: QualityLevel) -> Self {
        match level {
            QualityLevel::Awful => GkqLevel::Awful,
            QualityLevel::RelativelyAwful => GkqLevel::RelativelyAwful,
            QualityLevel::Bad => GkqLevel::Bad,
            QualityLevel::RelativelyBad => GkqLevel::RelativelyBad,
            QualityLevel::Ordinary => GkqLevel::Ordinary,
            QualityLevel::RelativelyGood => GkqLevel::RelativelyGood,
            QualityLevel::Good => GkqLevel::Good,
            QualityLevel::AlmostExcellent => GkqLevel::AlmostExcellent,
            QualityLevel::Excellent => GkqLevel::Excellent,
        }
    }
}

/// Number of values passed to [`gkq_score`]: seven ratings then height in cm.
pub const GKQ_PROFILE_LEN: usize = 8;

/// Opaque scoring engine.
pub struct GkqEngine {
    model: GkModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

struct Failure(GkqStatus, String);

fn set_last_error(message: &str) {
    let c = CString::new(message.replace('\0', " ")).expect("interior NULs replaced");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn run(f: impl FnOnce() -> Result<(), Failure>) -> GkqStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => GkqStatus::Ok,
        Ok(Err(Failure(status, message))) => {
            set_last_error(&message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".to_string());
            set_last_error(&format!("internal panic: {message}"));
            GkqStatus::Panic
        }
    }
}

fn null(what: &str) -> Failure {
    Failure(GkqStatus::NullPointer, format!("{what} is null"))
}

unsafe fn engine_ref<'a>(engine: *const GkqEngine) -> Result<&'a GkqEngine, Failure> {
    engine.as_ref().ok_or_else(|| null("engine"))
}

unsafe fn c_str<'a>(s: *const c_char, what: &str) -> Result<&'a CStr, Failure> {
    if s.is_null() {
        return Err(null(what));
    }
    Ok(CStr::from_ptr(s))
}

fn score_failure(e: ScoreError) -> Failure {
    match e {
        ScoreError::Profile(p) => Failure(GkqStatus::InvalidProfile, p.to_string()),
        ScoreError::Incompatible(m) => Failure(GkqStatus::IncompatibleRulebase, m),
        other => Failure(GkqStatus::Internal, other.to_string()),
    }
}

fn into_c_string(s: String) -> *mut c_char {
    CString::new(s).expect("engine output has no NUL bytes").into_raw()
}

/// Engine with the default calibration and the generated 256-rule base.
/// Returns null only if construction panicked.
#[no_mangle]
pub extern "C" fn gkq_engine_new_default() -> *mut GkqEngine {
    let mut out = ptr::null_mut();
    run(|| {
        out = Box::into_raw(Box::new(GkqEngine { model: GkModel::new(default_calibration()) }));
        Ok(())
    });
    out
}

/// Engine scoring with the rule base in `frb_text` (NUL-terminated UTF-8).
///
/// # Safety
/// `frb_text` must be null or a valid NUL-terminated string; `out` must be
/// null or point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn gkq_engine_from_frb(frb_text: *const c_char, out: *mut *mut GkqEngine) -> GkqStatus {
    run(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = ptr::null_mut();
        let text = c_str(frb_text, "frb_text")?;
        let rulebase = parse_rulebase_bytes(text.to_bytes())
            .map_err(|e| Failure(GkqStatus::ParseError, e.to_string()))?;
        let model = GkModel::with_rulebase(default_calibration(), rulebase).map_err(score_failure)?;
        *out = Box::into_raw(Box::new(GkqEngine { model }));
        Ok(())
    })
}

/// Releases an engine. Null is ignored.
///
/// # Safety
/// `engine` must be null or a handle from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gkq_engine_free(engine: *mut GkqEngine) {
    if !engine.is_null() {
        drop(Box::from_raw(engine));
    }
}

/// Scores eight numbers: exit from goal, flexibility, overhead dominance,
/// establishing connection, courage, leadership, person-to-person battles
/// (each 0 to 10), then height in cm (100 to 220).
///
/// # Safety
/// `values` must point to [`GKQ_PROFILE_LEN`] doubles. `out_score` and
/// `out_level` may each be null.
#[no_mangle]
pub unsafe extern "C" fn gkq_score(
    engine: *const GkqEngine,
    values: *const f64,
    out_score: *mut f64,
    out_level: *mut GkqLevel,
) -> GkqStatus {
    run(|| {
        let engine = engine_ref(engine)?;
        if values.is_null() {
            return Err(null("values"));
        }
        let v = std::slice::from_raw_parts(values, GKQ_PROFILE_LEN);
        let mut profile = GKProfile::from_numbers([0.0; 7], 0.0);
        for (attr, &x) in Attribute::ALL.iter().zip(v) {
            *profile.get_mut(*attr) = x.into();
        }
        let scored = engine.model.score(&profile).map_err(score_failure)?;
        if let Some(s) = out_score.as_mut() {
            *s = scored.score;
        }
        if let Some(l) = out_level.as_mut() {
            *l = scored.level.into();
        }
        Ok(())
    })
}

/// Evaluates a profile JSON object and writes the report JSON to `out`.
/// The report is the same document the HTTP service returns.
///
/// # Safety
/// `profile_json` must be null or a valid NUL-terminated string; `out` must
/// point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn gkq_evaluate_json(
    engine: *const GkqEngine,
    profile_json: *const c_char,
    out: *mut *mut c_char,
) -> GkqStatus {
    run(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = ptr::null_mut();
        let engine = engine_ref(engine)?;
        let json = c_str(profile_json, "profile_json")?;
        let profile: GKProfile = serde_json::from_slice(json.to_bytes())
            .map_err(|e| Failure(GkqStatus::InvalidJson, e.to_string()))?;
        let scored = engine.model.score(&profile).map_err(score_failure)?;
        *out = into_c_string(EvaluationReport::new(&scored, engine.model.rulebase()).to_json());
        Ok(())
    })
}

/// Writes the engine's rule base in canonical `.frb` form to `out`.
///
/// # Safety
/// `out` must point to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn gkq_rulebase_text(engine: *const GkqEngine, out: *mut *mut c_char) -> GkqStatus {
    run(|| {
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = ptr::null_mut();
        let engine = engine_ref(engine)?;
        *out = into_c_string(format_rulebase(engine.model.rulebase()));
        Ok(())
    })
}

/// Message for the last failed call on this thread, or null. Valid until the
/// next call into this library on the same thread.
#[no_mangle]
pub extern "C" fn gkq_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must be null or a string from this library not yet freed.
#[no_mangle]
pub unsafe extern "C" fn gkq_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Display name of a level ("Relatively good"), or null if out of range.
/// The string is static.
#[no_mangle]
pub extern "C" fn gkq_level_name(level: i32) -> *const c_char {
    const NAMES: [&CStr; 9] = [
        c"Awful",
        c"Relatively awful",
        c"Bad",
        c"Relatively bad",
        c"Ordinary",
        c"Relatively good",
        c"Good",
        c"Almost excellent",
        c"Excellent",
    ];
    usize::try_from(level).ok().and_then(|i| NAMES.get(i)).map_or(ptr::null(), |s| s.as_ptr())
}
