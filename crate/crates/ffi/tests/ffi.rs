use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use mhnpath::mhn::{init_model, save_model, ModelConfig};
use mhnpath::templates::TemplateLibrary;
use mhnpath_ffi::*;

fn toy(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../core/fixtures/toy").join(name)
}

fn cstr(s: &str) -> CString {
    CString::new(s).unwrap()
}

fn path_c(p: &Path) -> CString {
    cstr(p.to_str().unwrap())
}

fn last_error() -> String {
    let p = mhn_last_error();
    assert!(!p.is_null(), "expected an error message");
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

unsafe fn take_string(p: *mut c_char) -> String {
    let s = CStr::from_ptr(p).to_str().unwrap().to_owned();
    mhn_string_free(p);
    s
}

fn load_library() -> *mut MhnLibrary {
    let mut lib = ptr::null_mut();
    let p = path_c(&toy("library.tsv"));
    assert_eq!(unsafe { mhn_library_load(p.as_ptr(), &mut lib) }, MhnStatus::Ok);
    lib
}

fn load_catalog() -> *mut MhnCatalog {
    let mut cat = ptr::null_mut();
    let p = path_c(&toy("prices.csv"));
    assert_eq!(unsafe { mhn_catalog_load(p.as_ptr(), &mut cat) }, MhnStatus::Ok);
    cat
}

fn exhaustive(lib: *const MhnLibrary) -> *mut MhnRanker {
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { mhn_ranker_load(lib, ptr::null(), 0, &mut r) }, MhnStatus::Ok);
    r
}

#[test]
fn version_matches_crate() {
    let v = unsafe { CStr::from_ptr(mhn_version()) }.to_str().unwrap();
    assert_eq!(v, env!("CARGO_PKG_VERSION"));
}

#[test]
fn canonicalize_round_trip_and_errors() {
    let mut out = ptr::null_mut();
    let s = cstr("OCC");
    assert_eq!(unsafe { mhn_canonicalize(s.as_ptr(), &mut out) }, MhnStatus::Ok);
    assert_eq!(unsafe { take_string(out) }, mhnpath::chem::canonicalize("CCO").unwrap());
    assert!(mhn_last_error().is_null());

    let bad = cstr("C1CC");
    assert_eq!(unsafe { mhn_canonicalize(bad.as_ptr(), &mut out) }, MhnStatus::Parse);
    assert!(last_error().contains("C1CC"));

    assert_eq!(unsafe { mhn_canonicalize(ptr::null(), &mut out) }, MhnStatus::NullPointer);
    assert!(last_error().contains("smiles"));
    assert_eq!(unsafe { mhn_canonicalize(s.as_ptr(), ptr::null_mut()) }, MhnStatus::NullPointer);

    let invalid = [0xffu8, 0];
    assert_eq!(unsafe { mhn_canonicalize(invalid.as_ptr().cast(), &mut out) }, MhnStatus::InvalidUtf8);
}

#[test]
fn library_and_catalog_handles() {
    let lib = load_library();
    assert_eq!(unsafe { mhn_library_len(lib) }, 2);
    assert_eq!(unsafe { mhn_library_len(ptr::null()) }, 0);
    unsafe { mhn_library_free(lib) };
    unsafe { mhn_library_free(ptr::null_mut()) };

    let mut out = ptr::null_mut();
    let missing = cstr("/nonexistent/library.tsv");
    assert_ne!(unsafe { mhn_library_load(missing.as_ptr(), &mut out) }, MhnStatus::Ok);
    assert!(out.is_null());
    assert!(last_error().contains("/nonexistent/library.tsv"));

    let cat = load_catalog();
    unsafe { mhn_catalog_free(cat) };
    let mut c = ptr::null_mut();
    let missing = cstr("/nonexistent/prices.csv");
    assert_eq!(unsafe { mhn_catalog_load(missing.as_ptr(), &mut c) }, MhnStatus::Io);
}

#[test]
fn rank_exhaustive_fills_buffers() {
    let lib = load_library();
    let r = exhaustive(lib);
    let (mut ids, mut scores, mut n) = ([usize::MAX; 4], [f64::NAN; 4], 0usize);
    let s = cstr("CCOC");
    let st = unsafe { mhn_rank(r, s.as_ptr(), 4, false, ids.as_mut_ptr(), scores.as_mut_ptr(), &mut n) };
    assert_eq!(st, MhnStatus::Ok);
    assert_eq!(n, 2);
    assert_eq!(&ids[..2], &[0, 1]);
    assert_eq!(&scores[..2], &[0.5, 0.5]);
    assert_eq!(ids[2], usize::MAX);

    let st = unsafe { mhn_rank(r, s.as_ptr(), 1, false, ids.as_mut_ptr(), scores.as_mut_ptr(), &mut n) };
    assert_eq!(st, MhnStatus::Ok);
    assert_eq!(n, 1);

    let st = unsafe { mhn_rank(r, s.as_ptr(), 2, false, ptr::null_mut(), scores.as_mut_ptr(), &mut n) };
    assert_eq!(st, MhnStatus::NullPointer);
    let bad = cstr("C(");
    let st = unsafe { mhn_rank(r, bad.as_ptr(), 2, false, ids.as_mut_ptr(), scores.as_mut_ptr(), &mut n) };
    assert_eq!(st, MhnStatus::Parse);
    unsafe {
        mhn_ranker_free(r);
        mhn_library_free(lib);
    }
}

#[test]
fn rank_with_model_ensemble() {
    let dir = tempfile::tempdir().unwrap();
    let tl = TemplateLibrary::load(&toy("library.tsv")).unwrap();
    let cfg = ModelConfig {
        fp_bits: 64,
        template_fp_bits: 64,
        d_assoc: 8,
        ..ModelConfig::default()
    };
    let model_path = dir.path().join("m.mhnp");
    save_model(&init_model(&cfg, &tl).unwrap(), &model_path).unwrap();

    let lib = load_library();
    let p = path_c(&model_path);
    let paths = [p.as_ptr(), p.as_ptr()];
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { mhn_ranker_load(lib, paths.as_ptr(), 2, &mut r) }, MhnStatus::Ok);
    let (mut ids, mut scores, mut n) = ([0usize; 2], [0f64; 2], 0usize);
    let s = cstr("CCOC");
    let st = unsafe { mhn_rank(r, s.as_ptr(), 2, false, ids.as_mut_ptr(), scores.as_mut_ptr(), &mut n) };
    assert_eq!(st, MhnStatus::Ok);
    assert_eq!(n, 2);
    assert!((scores.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    assert!(scores[0] >= scores[1]);
    unsafe { mhn_ranker_free(r) };

    let junk = dir.path().join("junk.mhnp");
    std::fs::write(&junk, b"not a model").unwrap();
    let j = path_c(&junk);
    let mut r = ptr::null_mut();
    assert_eq!(unsafe { mhn_ranker_load(lib, &j.as_ptr(), 1, &mut r) }, MhnStatus::Config);
    assert!(r.is_null());
    assert_eq!(unsafe { mhn_ranker_load(lib, ptr::null(), 1, &mut r) }, MhnStatus::NullPointer);
    unsafe { mhn_library_free(lib) };
}

#[test]
fn search_returns_tree_and_validates_config() {
    let lib = load_library();
    let r = exhaustive(lib);
    let cat = load_catalog();
    let (mut tree, mut routes) = (ptr::null_mut(), 0usize);
    let s = cstr("CCOC");
    let st = unsafe { mhn_search(r, cat, s.as_ptr(), ptr::null(), &mut tree, &mut routes) };
    assert_eq!(st, MhnStatus::Ok, "{}", last_error());
    let json = unsafe { take_string(tree) };
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["smiles"], "CCOC");
    assert!(routes >= 1);

    let cfg = cstr(r#"{"max_expansions": 0}"#);
    let st = unsafe { mhn_search(r, cat, s.as_ptr(), cfg.as_ptr(), &mut tree, &mut routes) };
    assert_eq!(st, MhnStatus::Ok, "{}", last_error());
    unsafe { mhn_string_free(tree) };
    assert_eq!(routes, 0);

    let zero_depth = cstr(r#"{"max_depth": 0}"#);
    let st = unsafe { mhn_search(r, cat, s.as_ptr(), zero_depth.as_ptr(), &mut tree, &mut routes) };
    assert_eq!(st, MhnStatus::Config);
    assert!(last_error().contains("max_depth"));

    let unknown = cstr(r#"{"depth": 3}"#);
    let st = unsafe { mhn_search(r, cat, s.as_ptr(), unknown.as_ptr(), &mut tree, &mut routes) };
    assert_eq!(st, MhnStatus::Parse);
    let bad_weights = cstr(r#"{"weights": {"w_cost": -1.0, "w_temp": 0.5, "w_solv": 0.5}}"#);
    let st = unsafe { mhn_search(r, cat, s.as_ptr(), bad_weights.as_ptr(), &mut tree, &mut routes) };
    assert_ne!(st, MhnStatus::Ok);
    assert_eq!(
        unsafe { mhn_search(ptr::null(), cat, s.as_ptr(), ptr::null(), &mut tree, &mut routes) },
        MhnStatus::NullPointer
    );
    unsafe {
        mhn_catalog_free(cat);
        mhn_ranker_free(r);
        mhn_library_free(lib);
    }
}

#[test]
fn composite_score_boundaries() {
    let mut out = f64::NAN;
    let st = unsafe { mhn_composite_score(500.0, 300.0, -1, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, &mut out) };
    assert_eq!(st, MhnStatus::Ok);
    assert!((out + 1.0).abs() < 1e-12);
    assert_eq!(
        unsafe { mhn_composite_score(1.0, 25.0, 2, 0.5, 0.25, 0.25, &mut out) },
        MhnStatus::Config
    );
    assert_eq!(
        unsafe { mhn_composite_score(1.0, 25.0, 0, -0.5, 1.0, 0.5, &mut out) },
        MhnStatus::Config
    );
}

#[test]
fn errors_are_thread_local() {
    let bad = cstr("C(");
    let mut out = ptr::null_mut();
    assert_eq!(unsafe { mhn_canonicalize(bad.as_ptr(), &mut out) }, MhnStatus::Parse);
    std::thread::spawn(|| assert!(mhn_last_error().is_null())).join().unwrap();
    assert!(!last_error().is_empty());
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("include/mhnpath.h")).unwrap();
    for name in [
        "mhn_last_error",
        "mhn_version",
        "mhn_string_free",
        "mhn_canonicalize",
        "mhn_library_load",
        "mhn_library_len",
        "mhn_library_free",
        "mhn_ranker_load",
        "mhn_ranker_free",
        "mhn_rank",
        "mhn_catalog_load",
        "mhn_catalog_free",
        "mhn_search",
        "mhn_composite_score",
        "MHN_STATUS_PANIC",
        "typedef struct MhnRanker MhnRanker",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}

/// Compiles the C smoke program against the header and static archive.
/// Skipped when no C compiler or archive is present.
#[test]
fn c_program_links_and_runs() {
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().and_then(Path::parent).unwrap();
    let archive = profile_dir.join("libmhnpath_ffi.a");
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if !archive.exists() || Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or {}", archive.display());
        return;
    }
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let dir = tempfile::tempdir().unwrap();
    let bin = dir.path().join("smoke");
    let status = Command::new(&cc)
        .arg(manifest.join("tests/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&archive)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success(), "C compile failed");
    let out = Command::new(&bin).arg(toy("library.tsv")).arg(toy("prices.csv")).output().unwrap();
    assert!(out.status.success(), "smoke exited {:?}: {}", out.status, String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("routes="));
}
