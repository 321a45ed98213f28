//! C ABI over the mhnpath engine.
//!
//! Objects cross the boundary as opaque handles created by `*_load`
//! functions and released by the matching `*_free`. Every fallible call
//! returns an `MhnStatus`; on failure `mhn_last_error` describes the most
//! recent error on the calling thread. Strings returned through out
//! parameters are owned by the caller and released with `mhn_string_free`.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use mhnpath::chem::{canonicalize, parse_smiles};
use mhnpath::conditions::TablePredictor;
use mhnpath::mhn::{load_model, Ensemble};
use mhnpath::pricing::PriceCatalog;
use mhnpath::scoring::ToxicityDb;
use mhnpath::search::{
    extract_routes, run_search, serialize_tree, EnsembleRanker, ExhaustiveRanker, SearchConfig, Services,
    TemperatureUnit, TemplateRanker,
};
use mhnpath::templates::TemplateLibrary;
use thiserror::Error;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MhnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    /// Malformed SMILES, JSON or file contents.
    Parse = 3,
    Io = 4,
    /// Rejected configuration or incompatible model and library.
    Config = 5,
    /// Failure inside the engine after inputs were accepted.
    Runtime = 6,
    Panic = 7,
}

#[derive(Debug, Error)]
enum FfiError {
    #[error("null pointer argument: {0}")]
    Null(&'static str),
    #[error("argument {0} is not valid UTF-8")]
    Utf8(&'static str),
    #[error("{0}")]
    Parse(String),
    #[error("{0}")]
    Io(String),
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl FfiError {
    fn status(&self) -> MhnStatus {
        match self {
            FfiError::Null(_) => MhnStatus::NullPointer,
            FfiError::Utf8(_) => MhnStatus::InvalidUtf8,
            FfiError::Parse(_) => MhnStatus::Parse,
            FfiError::Io(_) => MhnStatus::Io,
            FfiError::Config(_) => MhnStatus::Config,
            FfiError::Runtime(_) => MhnStatus::Runtime,
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

/// Run `f`, record any error or panic, and return its status.
fn guard(f: impl FnOnce() -> Result<(), FfiError>) -> MhnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            MhnStatus::Ok
        }
        Ok(Err(e)) => {
            let s = e.status();
            set_error(e.to_string());
            s
        }
        Err(p) => {
            let msg = p
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| p.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            MhnStatus::Panic
        }
    }
}

/// # Safety
/// `p` is null or a valid NUL-terminated string.
unsafe fn text<'a>(p: *const c_char, name: &'static str) -> Result<&'a str, FfiError> {
    if p.is_null() {
        return Err(FfiError::Null(name));
    }
    CStr::from_ptr(p).to_str().map_err(|_| FfiError::Utf8(name))
}

unsafe fn out<'a, T>(p: *mut T, name: &'static str) -> Result<&'a mut T, FfiError> {
    p.as_mut().ok_or(FfiError::Null(name))
}

fn owned_string(s: String) -> *mut c_char {
    CString::new(s.replace('\0', " ")).expect("interior NULs removed").into_raw()
}

/// Template library handle.
pub struct MhnLibrary {
    inner: TemplateLibrary,
}

/// Template ranker handle: a model ensemble or, without models, every
/// template in library order.
pub struct MhnRanker {
    inner: Box<dyn TemplateRanker>,
}

/// Price catalog handle.
pub struct MhnCatalog {
    inner: PriceCatalog,
}

/// Message of the last failed call on this thread, or null. Valid until
/// the next call on the same thread.
#[no_mangle]
pub extern "C" fn mhn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn mhn_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Release a string returned by this library. Null is ignored.
///
/// # Safety
/// `s` is null or was returned by this library and not yet freed.
#[no_mangle]
pub unsafe extern "C" fn mhn_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Canonical SMILES of `smiles`, written to `*out`.
///
/// # Safety
/// `smiles` is a NUL-terminated string and `out_smiles` is writable.
#[no_mangle]
pub unsafe extern "C" fn mhn_canonicalize(smiles: *const c_char, out_smiles: *mut *mut c_char) -> MhnStatus {
    guard(|| {
        let s = text(smiles, "smiles")?;
        let dst = out(out_smiles, "out_smiles")?;
        let c = canonicalize(s).map_err(|e| FfiError::Parse(format!("SMILES {s:?}: {e}")))?;
        *dst = owned_string(c);
        Ok(())
    })
}

/// Load a template library TSV.
///
/// # Safety
/// `path` is a NUL-terminated string and `out_lib` is writable.
#[no_mangle]
pub unsafe extern "C" fn mhn_library_load(path: *const c_char, out_lib: *mut *mut MhnLibrary) -> MhnStatus {
    guard(|| {
        let p = text(path, "path")?;
        let dst = out(out_lib, "out_lib")?;
        let inner = TemplateLibrary::load(&PathBuf::from(p)).map_err(|e| FfiError::Parse(format!("{p}: {e}")))?;
        *dst = Box::into_raw(Box::new(MhnLibrary { inner }));
        Ok(())
    })
}

/// Number of templates, or 0 for null.
///
/// # Safety
/// `lib` is null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn mhn_library_len(lib: *const MhnLibrary) -> usize {
    lib.as_ref().map_or(0, |l| l.inner.len())
}

/// # Safety
/// `lib` is null or a live handle, which this call invalidates.
#[no_mangle]
pub unsafe extern "C" fn mhn_library_free(lib: *mut MhnLibrary) {
    if !lib.is_null() {
        drop(Box::from_raw(lib));
    }
}

/// Build a ranker over `lib` from `n_models` model files. With zero
/// models every template is proposed in library order. The library is
/// copied; the handle stays owned by the caller.
///
/// # Safety
/// `lib` is a live handle, `model_paths` points to `n_models` strings
/// (or may be null when `n_models` is 0) and `out_ranker` is writable.
#[no_mangle]
pub unsafe extern "C" fn mhn_ranker_load(
    lib: *const MhnLibrary,
    model_paths: *const *const c_char,
    n_models: usize,
    out_ranker: *mut *mut MhnRanker,
) -> MhnStatus {
    guard(|| {
        let lib = lib.as_ref().ok_or(FfiError::Null("lib"))?.inner.clone();
        let dst = out(out_ranker, "out_ranker")?;
        let inner: Box<dyn TemplateRanker> = if n_models == 0 {
            Box::new(ExhaustiveRanker { library: lib })
        } else {
            if model_paths.is_null() {
                return Err(FfiError::Null("model_paths"));
            }
            let mut models = Vec::with_capacity(n_models);
            for i in 0..n_models {
                let p = text(*model_paths.add(i), "model_paths[i]")?;
                models.push(load_model(&PathBuf::from(p), &lib).map_err(|e| FfiError::Config(format!("{p}: {e}")))?);
            }
            let ensemble = Ensemble::new(models, &lib).map_err(|e| FfiError::Config(e.to_string()))?;
            Box::new(EnsembleRanker { ensemble, library: lib })
        };
        *dst = Box::into_raw(Box::new(MhnRanker { inner }));
        Ok(())
    })
}

/// # Safety
/// `r` is null or a live handle, which this call invalidates.
#[no_mangle]
pub unsafe extern "C" fn mhn_ranker_free(r: *mut MhnRanker) {
    if !r.is_null() {
        drop(Box::from_raw(r));
    }
}

/// Rank templates for one molecule. Writes up to `capacity` template ids
/// and scores, best first, and the count to `*out_len`.
///
/// # Safety
/// `ranker` is a live handle, `smiles` a NUL-terminated string,
/// `out_ids` and `out_scores` hold `capacity` elements and `out_len` is
/// writable.
#[no_mangle]
pub unsafe extern "C" fn mhn_rank(
    ranker: *const MhnRanker,
    smiles: *const c_char,
    capacity: usize,
    screen: bool,
    out_ids: *mut usize,
    out_scores: *mut f64,
    out_len: *mut usize,
) -> MhnStatus {
    guard(|| {
        let r = ranker.as_ref().ok_or(FfiError::Null("ranker"))?;
        let s = text(smiles, "smiles")?;
        let len = out(out_len, "out_len")?;
        if capacity > 0 && (out_ids.is_null() || out_scores.is_null()) {
            return Err(FfiError::Null("out_ids/out_scores"));
        }
        let m = parse_smiles(s).map_err(|e| FfiError::Parse(format!("SMILES {s:?}: {e}")))?;
        let ranked = r.inner.rank(&m.strip_maps(), capacity, screen);
        for (i, (id, score)) in ranked.iter().enumerate() {
            *out_ids.add(i) = *id;
            *out_scores.add(i) = *score;
        }
        *len = ranked.len();
        Ok(())
    })
}

/// Load a price catalog CSV.
///
/// # Safety
/// `path` is a NUL-terminated string and `out_catalog` is writable.
#[no_mangle]
pub unsafe extern "C" fn mhn_catalog_load(path: *const c_char, out_catalog: *mut *mut MhnCatalog) -> MhnStatus {
    guard(|| {
        let p = text(path, "path")?;
        let dst = out(out_catalog, "out_catalog")?;
        let inner = PriceCatalog::load(&PathBuf::from(p)).map_err(|e| match e {
            mhnpath::pricing::PricingError::Io(e) => FfiError::Io(format!("{p}: {e}")),
            other => FfiError::Parse(format!("{p}: {other}")),
        })?;
        *dst = Box::into_raw(Box::new(MhnCatalog { inner }));
        Ok(())
    })
}

/// # Safety
/// `c` is null or a live handle, which this call invalidates.
#[no_mangle]
pub unsafe extern "C" fn mhn_catalog_free(c: *mut MhnCatalog) {
    if !c.is_null() {
        drop(Box::from_raw(c));
    }
}

/// Plan routes for `smiles` with the synthetic ranker and catalog. The
/// search configuration is a JSON object (null for defaults). Writes the
/// search tree as JSON to `*out_tree` and the number of solved routes to
/// `*out_routes`. Conditions use the default row and toxicity classes
/// default to neutral.
///
/// # Safety
/// Handles are live, strings are NUL-terminated or `config_json` is null,
/// and the out parameters are writable.
#[no_mangle]
pub unsafe extern "C" fn mhn_search(
    ranker: *const MhnRanker,
    catalog: *const MhnCatalog,
    smiles: *const c_char,
    config_json: *const c_char,
    out_tree: *mut *mut c_char,
    out_routes: *mut usize,
) -> MhnStatus {
    guard(|| {
        let r = ranker.as_ref().ok_or(FfiError::Null("ranker"))?;
        let cat = catalog.as_ref().ok_or(FfiError::Null("catalog"))?;
        let s = text(smiles, "smiles")?;
        let tree_dst = out(out_tree, "out_tree")?;
        let routes_dst = out(out_routes, "out_routes")?;
        let cfg: SearchConfig = if config_json.is_null() {
            SearchConfig::default()
        } else {
            serde_json::from_str(text(config_json, "config_json")?).map_err(|e| FfiError::Parse(e.to_string()))?
        };
        cfg.validate().map_err(|e| FfiError::Config(e.to_string()))?;
        let target = parse_smiles(s).map_err(|e| FfiError::Parse(format!("SMILES {s:?}: {e}")))?;
        let table = TablePredictor::empty();
        let tox = ToxicityDb::new();
        let services = Services {
            catalog: &cat.inner,
            conditions: &table,
            toxicity: &tox,
            enzymatic: None,
            synthetic: Some(r.inner.as_ref()),
            cancel: None,
        };
        let outcome = run_search(&target, &cfg, &services).map_err(|e| FfiError::Runtime(e.to_string()))?;
        *routes_dst = extract_routes(&outcome.root, &cfg.weights).len();
        *tree_dst = owned_string(serialize_tree(&outcome.root, TemperatureUnit::Celsius));
        Ok(())
    })
}

/// Cost, temperature and solvent sub-scores and their weighted sum for
/// one reaction. `solvent_class` is -1, 0 or +1.
///
/// # Safety
/// `out_composite` is writable.
#[no_mangle]
pub unsafe extern "C" fn mhn_composite_score(
    total_cost_usd_per_g: f64,
    temperature_c: f64,
    solvent_class: i32,
    w_cost: f64,
    w_temp: f64,
    w_solv: f64,
    out_composite: *mut f64,
) -> MhnStatus {
    use mhnpath::scoring::{composite_score, cost_score, temp_score, ScoreWeights};
    guard(|| {
        let dst = out(out_composite, "out_composite")?;
        let w = ScoreWeights::new(w_cost, w_temp, w_solv).map_err(|e| FfiError::Config(e.to_string()))?;
        if !(-1..=1).contains(&solvent_class) {
            return Err(FfiError::Config(format!("solvent class {solvent_class} outside -1..=1")));
        }
        let c = cost_score(total_cost_usd_per_g).map_err(|e| FfiError::Config(e.to_string()))?;
        *dst = composite_score(c, temp_score(temperature_c), f64::from(solvent_class), &w);
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panics_become_status() {
        let s = guard(|| panic!("boom"));
        assert_eq!(s, MhnStatus::Panic);
        let msg = unsafe { CStr::from_ptr(mhn_last_error()) }.to_str().unwrap();
        assert!(msg.contains("boom"));
    }

    #[test]
    fn success_clears_error() {
        set_error("old".into());
        assert_eq!(guard(|| Ok(())), MhnStatus::Ok);
        assert!(mhn_last_error().is_null());
    }
}
