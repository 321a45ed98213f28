#![allow(dead_code)]

pub mod metrics;
pub mod mhn;
pub mod reactions;
pub mod universe;

use std::path::PathBuf;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}
