#![allow(dead_code)]

use std::path::PathBuf;
use std::sync::OnceLock;

use nlde::harness::{ReferenceCache, StudyContext};

/// Reference cache kept under the target directory so reruns reuse it.
pub fn cache_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("nlde-cache")
}

pub fn context() -> &'static StudyContext {
    static CTX: OnceLock<StudyContext> = OnceLock::new();
    CTX.get_or_init(|| StudyContext::new(Some(ReferenceCache::new(cache_dir())), 1).expect("worker pool"))
}

pub fn rel_dev(got: f64, expected: f64) -> f64 {
    (got / expected - 1.0).abs()
}
