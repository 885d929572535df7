#![allow(dead_code)]

#[path = "../../../core/tests/support/fake_http.rs"]
pub mod fake_http;

use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use evobase_core::pipeline::ModelSet;
use evobase_core::svm::TrainConfig;
use evobase_core::training::{build_datasets, read_corpus, train_model_set};

pub const SEED: u64 = 42;

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

pub fn fixture_models() -> &'static ModelSet {
    static MODELS: OnceLock<ModelSet> = OnceLock::new();
    MODELS.get_or_init(|| {
        let corpus = read_corpus(&fixtures().join("fixture_corpus.jsonl")).unwrap();
        let sets = build_datasets(&corpus, 1.0, SEED).unwrap();
        train_model_set(&sets, &TrainConfig::default(), "2024-01-01").unwrap()
    })
}

/// Fixture models written to a fresh directory.
pub fn fixture_model_dir() -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    fixture_models().save_dir(dir.path()).unwrap();
    dir
}

pub fn saint_petersburg() -> PathBuf {
    fixtures().join("articles/saint_petersburg.txt")
}

pub fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap()
}
