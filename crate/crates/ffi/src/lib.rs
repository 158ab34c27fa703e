//! C ABI over `gnn-designer`.
//!
//! Every fallible call returns a [`GdStatus`]. On failure the message is available from
//! [`gd_last_error`] on the same thread. Handles are opaque and freed with their matching
//! `*_free`; strings returned through `char **` are freed with [`gd_string_free`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;
use std::sync::Arc;

use gnn_designer::graph_data::{load_dataset, GraphDataset};
use gnn_designer::knowledge_base::{build_confidence, kendall_tau, BenchmarkTable, ErMode};
use gnn_designer::pipeline::{Designer, PipelineConfig};
use gnn_designer::properties::{compute_properties, Property, SamplingConfig, NUM_PROPERTIES};
use gnn_designer::search_space::Architecture;
use gnn_designer::Error;

/// Number of graph properties written by `gd_properties_compute`.
pub const GD_NUM_PROPERTIES: usize = 16;
const _: () = assert!(GD_NUM_PROPERTIES == NUM_PROPERTIES);

pub const GD_ER_BEST: c_int = 0;
pub const GD_ER_MEAN: c_int = 1;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GdStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidInput = 3,
    Io = 4,
    Parse = 5,
    NotFound = 6,
    Leakage = 7,
    Backend = 8,
    Panic = 9,
}

/// A loaded graph dataset.
pub struct GdDataset(GraphDataset);

/// A loaded benchmark table.
pub struct GdBench(Arc<BenchmarkTable>);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(s).ok());
}

fn status_of(e: &Error) -> GdStatus {
    match e {
        Error::MissingFile(_) | Error::Io { .. } => GdStatus::Io,
        Error::Parse { .. } | Error::IndexOutOfRange { .. } | Error::Mismatch(_) | Error::Json { .. } => GdStatus::Parse,
        Error::NotFound { .. } => GdStatus::NotFound,
        Error::Leakage(_) => GdStatus::Leakage,
        Error::Protocol(_) | Error::Trainer(_) | Error::Backend(_) => GdStatus::Backend,
        _ => GdStatus::InvalidInput,
    }
}

struct Fail(GdStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> GdStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            GdStatus::Ok
        }
        Ok(Err(Fail(code, msg))) => {
            set_error(msg);
            code
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "panic".into());
            set_error(format!("internal panic: {msg}"));
            GdStatus::Panic
        }
    }
}

fn null(what: &str) -> Fail {
    Fail(GdStatus::NullPointer, format!("{what} is null"))
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(GdStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Fail> {
    let c = CString::new(s).map_err(|_| Fail(GdStatus::InvalidInput, "output contains NUL".into()))?;
    *out = c.into_raw();
    Ok(())
}

/// The last error message on this thread, or NULL. Valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn gd_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Frees a string returned by this library. NULL is ignored.
#[no_mangle]
pub unsafe extern "C" fn gd_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Canonical name of property `index` (0..16), or NULL. The string is static.
#[no_mangle]
pub extern "C" fn gd_property_name(index: usize) -> *const c_char {
    static NAMES: std::sync::LazyLock<Vec<CString>> =
        std::sync::LazyLock::new(|| Property::ALL.iter().map(|p| CString::new(p.name()).unwrap()).collect());
    NAMES.get(index).map_or(ptr::null(), |s| s.as_ptr())
}

/// Tie-corrected Kendall correlation of two score lists of length `n`. NaN when either list
/// is constant.
#[no_mangle]
pub unsafe extern "C" fn gd_kendall_tau(a: *const f64, b: *const f64, n: usize, out: *mut f64) -> GdStatus {
    guard(|| {
        if a.is_null() || b.is_null() || out.is_null() {
            return Err(null("argument"));
        }
        let (a, b) = (std::slice::from_raw_parts(a, n), std::slice::from_raw_parts(b, n));
        *out = kendall_tau(a, b)?;
        Ok(())
    })
}

/// Validates an architecture key and writes its canonical form to `canonical`.
#[no_mangle]
pub unsafe extern "C" fn gd_architecture_validate(key: *const c_char, canonical: *mut *mut c_char) -> GdStatus {
    guard(|| {
        let key = str_arg(key, "key")?;
        if canonical.is_null() {
            return Err(null("canonical"));
        }
        let a: Architecture = key.parse()?;
        put_string(canonical, a.to_string())
    })
}

/// Loads a dataset directory.
#[no_mangle]
pub unsafe extern "C" fn gd_dataset_load(dir: *const c_char, out: *mut *mut GdDataset) -> GdStatus {
    guard(|| {
        let dir = str_arg(dir, "dir")?;
        if out.is_null() {
            return Err(null("out"));
        }
        let g = load_dataset(dir)?;
        *out = Box::into_raw(Box::new(GdDataset(g)));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn gd_dataset_free(d: *mut GdDataset) {
    if !d.is_null() {
        drop(Box::from_raw(d));
    }
}

#[no_mangle]
pub unsafe extern "C" fn gd_dataset_num_nodes(d: *const GdDataset) -> usize {
    d.as_ref().map_or(0, |d| d.0.num_nodes)
}

/// Computes the 16 properties into `out` (canonical order, NaN where undefined).
#[no_mangle]
pub unsafe extern "C" fn gd_properties_compute(
    d: *const GdDataset,
    max_nodes: usize,
    pair_samples: usize,
    seed: u64,
    out: *mut f64,
) -> GdStatus {
    guard(|| {
        let d = d.as_ref().ok_or_else(|| null("dataset"))?;
        if out.is_null() {
            return Err(null("out"));
        }
        let cfg = SamplingConfig { max_nodes, pair_samples, seed };
        cfg.check()?;
        let pv = compute_properties(&d.0, &cfg)?;
        std::slice::from_raw_parts_mut(out, NUM_PROPERTIES).copy_from_slice(&pv.values);
        Ok(())
    })
}

/// Loads a benchmark CSV and, when `props_dir` is not NULL, its property directory.
#[no_mangle]
pub unsafe extern "C" fn gd_bench_load(csv: *const c_char, props_dir: *const c_char, out: *mut *mut GdBench) -> GdStatus {
    guard(|| {
        let csv = str_arg(csv, "csv")?;
        let props = if props_dir.is_null() { None } else { Some(str_arg(props_dir, "props_dir")?) };
        if out.is_null() {
            return Err(null("out"));
        }
        let t = BenchmarkTable::load(csv, props.map(Path::new))?;
        *out = Box::into_raw(Box::new(GdBench(Arc::new(t))));
        Ok(())
    })
}

#[no_mangle]
pub unsafe extern "C" fn gd_bench_free(b: *mut GdBench) {
    if !b.is_null() {
        drop(Box::from_raw(b));
    }
}

#[no_mangle]
pub unsafe extern "C" fn gd_bench_num_records(b: *const GdBench) -> usize {
    b.as_ref().map_or(0, |b| b.0.num_records())
}

/// Builds the confidence table and writes it as JSON. `er_mode` is `GD_ER_BEST` or
/// `GD_ER_MEAN`.
#[no_mangle]
pub unsafe extern "C" fn gd_confidence_build(
    b: *const GdBench,
    n_f: usize,
    n_m: usize,
    er_mode: c_int,
    json: *mut *mut c_char,
) -> GdStatus {
    guard(|| {
        let b = b.as_ref().ok_or_else(|| null("bench"))?;
        if json.is_null() {
            return Err(null("json"));
        }
        let mode = match er_mode {
            GD_ER_BEST => ErMode::Best,
            GD_ER_MEAN => ErMode::Mean,
            m => return Err(Fail(GdStatus::InvalidInput, format!("unknown er_mode {m}"))),
        };
        let c = build_confidence(&b.0, n_f, n_m, mode)?;
        put_string(json, c.to_json())
    })
}

/// Runs the pipeline. `config_json` is a pipeline config object and must name a
/// `leave_one_out` dataset. The report bundle goes to `out_dir` unless it is NULL. The run
/// summary is written to `summary_json`.
#[no_mangle]
pub unsafe extern "C" fn gd_design_run(
    b: *const GdBench,
    config_json: *const c_char,
    out_dir: *const c_char,
    summary_json: *mut *mut c_char,
) -> GdStatus {
    guard(|| {
        let b = b.as_ref().ok_or_else(|| null("bench"))?;
        let cfg = str_arg(config_json, "config_json")?;
        let out = if out_dir.is_null() { None } else { Some(str_arg(out_dir, "out_dir")?) };
        if summary_json.is_null() {
            return Err(null("summary_json"));
        }
        let cfg: PipelineConfig =
            serde_json::from_str(cfg).map_err(|e| Fail(GdStatus::Parse, format!("config_json: {e}")))?;
        if cfg.leave_one_out.is_none() {
            return Err(Fail(GdStatus::InvalidInput, "config_json must set leave_one_out".into()));
        }
        let d = Designer::new(cfg, b.0.clone(), None, None)?;
        let o = d.run(out.map(Path::new), false)?;
        put_string(summary_json, serde_json::to_string(&o.summary).expect("summary serializes"))
    })
}
