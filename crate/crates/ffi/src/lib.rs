//! C interface to healthscope.
//!
//! Every entry point returns an [`HsStatus`]. On anything other than
//! `HS_STATUS_OK` the thread's last error message is available through
//! [`hs_last_error_message`]. Objects handed out as pointers are owned by the
//! caller and must be released with the matching `*_free` function.

use std::cell::RefCell;
use std::collections::HashMap;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use healthscope::diagnosis::lof;
use healthscope::harness::{run_pipeline, PipelineConfig, PipelineOutput};
use healthscope::inference::path_availability;
use healthscope::topology::check_identifiability;
use healthscope::{ComponentId, ComponentKind, Error, ProbePath, Topology, TopologySpec};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Spec = 4,
    Pairing = 5,
    Config = 6,
    NotFound = 7,
    Infeasible = 8,
    InsufficientData = 9,
    EmptyWindow = 10,
    Parse = 11,
    Io = 12,
    Panic = 13,
}

/// Opaque cluster model.
pub struct HsTopology(Topology);

/// Opaque result of one simulated scenario run end to end.
pub struct HsPipelineResult(PipelineOutput);

/// Localization and attribution counts of a pipeline run.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct HsScore {
    pub true_positives: u32,
    pub false_negatives: u32,
    pub false_positives: u32,
    pub failure_correct: u32,
    pub failure_incorrect: u32,
    pub overload_correct: u32,
    pub overload_incorrect: u32,
    pub recall: f64,
    pub windows: u32,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> HsStatus {
    match e {
        Error::Pairing(_) => HsStatus::Pairing,
        Error::Spec(_) => HsStatus::Spec,
        Error::NotFound(_) => HsStatus::NotFound,
        Error::Config(_) => HsStatus::Config,
        Error::Infeasible { .. } => HsStatus::Infeasible,
        Error::InsufficientData(_) => HsStatus::InsufficientData,
        Error::EmptyWindow(_) => HsStatus::EmptyWindow,
        Error::Parse(_) | Error::Json(_) | Error::Csv(_) => HsStatus::Parse,
        Error::Io(_) => HsStatus::Io,
    }
}

struct Fail(HsStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> HsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => HsStatus::Ok,
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            HsStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(HsStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|e| Fail(HsStatus::InvalidUtf8, format!("{what}: {e}")))
}

unsafe fn out_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn slice_arg<'a, T>(p: *const T, len: usize, what: &str) -> Result<&'a [T], Fail> {
    if len == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(std::slice::from_raw_parts(p, len))
}

fn to_c_string(s: String) -> Result<*mut c_char, Fail> {
    CString::new(s)
        .map(CString::into_raw)
        .map_err(|e| Fail(HsStatus::InvalidArgument, e.to_string()))
}

/// Message for the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn hs_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static string.
#[no_mangle]
pub extern "C" fn hs_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Releases a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` must come from this library and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn hs_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds a preset topology (`minimal`, `ci`, `full`) with the given seed.
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hs_topology_preset(
    name: *const c_char,
    seed: u64,
    out: *mut *mut HsTopology,
) -> HsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let spec = TopologySpec::preset(str_arg(name, "name")?)?.with_seed(seed);
        *out = Box::into_raw(Box::new(HsTopology(Topology::build(spec)?)));
        Ok(())
    })
}

/// Builds a topology from a TOML topology spec.
///
/// # Safety
/// `toml_text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hs_topology_from_toml(
    toml_text: *const c_char,
    out: *mut *mut HsTopology,
) -> HsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let spec: TopologySpec =
            toml::from_str(str_arg(toml_text, "toml_text")?).map_err(Error::from)?;
        *out = Box::into_raw(Box::new(HsTopology(Topology::build(spec)?)));
        Ok(())
    })
}

/// Number of components of every kind, clients included.
///
/// # Safety
/// `topo` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hs_topology_component_count(
    topo: *const HsTopology,
    out: *mut usize,
) -> HsStatus {
    guard(|| {
        let t = topo.as_ref().ok_or_else(|| null("topo"))?;
        *out_arg(out, "out")? = t.0.component_count();
        Ok(())
    })
}

/// Topology document as JSON. Free the result with [`hs_string_free`].
///
/// # Safety
/// `topo` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hs_topology_to_json(
    topo: *const HsTopology,
    out: *mut *mut c_char,
) -> HsStatus {
    guard(|| {
        let t = topo.as_ref().ok_or_else(|| null("topo"))?;
        let out = out_arg(out, "out")?;
        *out = to_c_string(serde_json::to_string(&t.0.document()).map_err(Error::from)?)?;
        Ok(())
    })
}

/// Exact `k`-identifiability of the storage components when every client
/// probes. On a negative verdict `witness` (if non-null) receives a JSON
/// description of the blocking failure set; otherwise it is set to null.
///
/// # Safety
/// `topo` must be a live handle; `identifiable` must be writable; `witness`
/// may be null.
#[no_mangle]
pub unsafe extern "C" fn hs_topology_check_identifiability(
    topo: *const HsTopology,
    k: usize,
    identifiable: *mut bool,
    witness: *mut *mut c_char,
) -> HsStatus {
    guard(|| {
        let t = topo.as_ref().ok_or_else(|| null("topo"))?;
        let identifiable = out_arg(identifiable, "identifiable")?;
        let monitors: Vec<ComponentId> = t.0.clients().iter().map(|c| c.id).collect();
        let report = check_identifiability(&t.0, &monitors, k)?;
        *identifiable = report.identifiable;
        if let Some(w) = witness.as_mut() {
            *w = match &report.witness {
                Some(x) => to_c_string(serde_json::to_string(x).map_err(Error::from)?)?,
                None => ptr::null_mut(),
            };
        }
        Ok(())
    })
}

/// # Safety
/// `topo` must come from this library and not have been freed. Null is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn hs_topology_free(topo: *mut HsTopology) {
    if !topo.is_null() {
        drop(Box::from_raw(topo));
    }
}

/// Generates, simulates, infers, diagnoses and scores one scenario described
/// by a TOML pipeline config. An empty string runs the defaults.
///
/// # Safety
/// `config_toml` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hs_pipeline_run_toml(
    config_toml: *const c_char,
    out: *mut *mut HsPipelineResult,
) -> HsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let cfg = PipelineConfig::from_toml_str(str_arg(config_toml, "config_toml")?)?;
        *out = Box::into_raw(Box::new(HsPipelineResult(run_pipeline(&cfg)?)));
        Ok(())
    })
}

/// # Safety
/// `result` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hs_pipeline_score(
    result: *const HsPipelineResult,
    out: *mut HsScore,
) -> HsStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(|| null("result"))?;
        let s = &r.0.score;
        *out_arg(out, "out")? = HsScore {
            true_positives: s.localization.true_positives as u32,
            false_negatives: s.localization.false_negatives as u32,
            false_positives: s.localization.false_positives as u32,
            failure_correct: s.attribution.failure.correct as u32,
            failure_incorrect: s.attribution.failure.incorrect as u32,
            overload_correct: s.attribution.overload.correct as u32,
            overload_incorrect: s.attribution.overload.incorrect as u32,
            recall: s.recall(),
            windows: r.0.windows.len() as u32,
        };
        Ok(())
    })
}

/// Flagged components per window as a JSON object keyed by window index.
/// Free the result with [`hs_string_free`].
///
/// # Safety
/// `result` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hs_pipeline_flagged_json(
    result: *const HsPipelineResult,
    out: *mut *mut c_char,
) -> HsStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(|| null("result"))?;
        let out = out_arg(out, "out")?;
        *out = to_c_string(serde_json::to_string(&r.0.flagged()).map_err(Error::from)?)?;
        Ok(())
    })
}

/// Full score report as JSON. Free the result with [`hs_string_free`].
///
/// # Safety
/// `result` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hs_pipeline_report_json(
    result: *const HsPipelineResult,
    out: *mut *mut c_char,
) -> HsStatus {
    guard(|| {
        let r = result.as_ref().ok_or_else(|| null("result"))?;
        let out = out_arg(out, "out")?;
        *out = to_c_string(serde_json::to_string(&r.0.score).map_err(Error::from)?)?;
        Ok(())
    })
}

/// # Safety
/// `result` must come from this library and not have been freed. Null is
/// ignored.
#[no_mangle]
pub unsafe extern "C" fn hs_pipeline_free(result: *mut HsPipelineResult) {
    if !result.is_null() {
        drop(Box::from_raw(result));
    }
}

/// Success probability of a path with serial healths `serial` and redundancy
/// groups laid out back to back in `group_healths`, group `i` holding
/// `group_sizes[i]` members.
///
/// # Safety
/// Each pointer must reference the stated number of elements (it may be null
/// when the count is zero); `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn hs_path_availability(
    serial: *const f64,
    serial_len: usize,
    group_sizes: *const usize,
    group_count: usize,
    group_healths: *const f64,
    group_healths_len: usize,
    out: *mut f64,
) -> HsStatus {
    guard(|| {
        let out = out_arg(out, "out")?;
        let serial = slice_arg(serial, serial_len, "serial")?;
        let sizes = slice_arg(group_sizes, group_count, "group_sizes")?;
        let members = slice_arg(group_healths, group_healths_len, "group_healths")?;
        if sizes.iter().sum::<usize>() != members.len() {
            return Err(Fail(
                HsStatus::InvalidArgument,
                format!(
                    "group sizes sum to {} but {} group healths were given",
                    sizes.iter().sum::<usize>(),
                    members.len()
                ),
            ));
        }
        // Stand-in components carry the supplied healths.
        let mut next = 0u32;
        let mut healths = HashMap::new();
        let mut id = |x: f64| {
            let c = ComponentId::new(ComponentKind::Osd, next);
            next += 1;
            healths.insert(c, x);
            c
        };
        let serial: Vec<ComponentId> = serial.iter().map(|&x| id(x)).collect();
        let mut rest = members;
        let mut groups = Vec::with_capacity(sizes.len());
        for &n in sizes {
            let (g, tail) = rest.split_at(n);
            groups.push(g.iter().map(|&x| id(x)).collect());
            rest = tail;
        }
        let path = ProbePath {
            client: ComponentId::client(0),
            target: ComponentId::new(ComponentKind::Osd, 0),
            serial,
            groups,
        };
        *out = path_availability(&path, &healths)?;
        Ok(())
    })
}

/// Local outlier factor of `n_points` points of dimension `dims`, stored row
/// by row in `points`. Writes one score per point into `scores`.
///
/// # Safety
/// `points` must hold `n_points * dims` values and `scores` room for
/// `n_points`.
#[no_mangle]
pub unsafe extern "C" fn hs_lof(
    points: *const f64,
    n_points: usize,
    dims: usize,
    k: usize,
    scores: *mut f64,
) -> HsStatus {
    guard(|| {
        if dims == 0 {
            return Err(Fail(HsStatus::InvalidArgument, "dims must be positive".into()));
        }
        let len = n_points
            .checked_mul(dims)
            .ok_or_else(|| Fail(HsStatus::InvalidArgument, "point buffer too large".into()))?;
        let flat = slice_arg(points, len, "points")?;
        let rows: Vec<Vec<f64>> = flat.chunks(dims).map(<[f64]>::to_vec).collect();
        let s = lof(&rows, k)?;
        if scores.is_null() {
            return Err(null("scores"));
        }
        std::slice::from_raw_parts_mut(scores, n_points).copy_from_slice(&s);
        Ok(())
    })
}
