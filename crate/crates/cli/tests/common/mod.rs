#![allow(dead_code)]

use std::path::Path;
use std::process::{Command, Output};

use archlens_core::synthetic::{write_corpus, DiagramFamily, SyntheticDiagram};
use tempfile::TempDir;

pub fn archlens(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_archlens"))
        .args(args)
        .output()
        .expect("spawn archlens")
}

pub fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

pub fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

pub fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

pub fn p(path: &Path) -> &str {
    path.to_str().expect("utf-8 temp path")
}

pub fn corpus(families: &[DiagramFamily], per_class: usize, seed: u64) -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path(), families, per_class, 400, 0.5, seed).unwrap();
    dir
}

pub fn write_diagram(family: DiagramFamily, seed: u64, size: u32, path: &Path) {
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    SyntheticDiagram::new(family, seed, 0.5)
        .render(size)
        .save_png(path)
        .unwrap();
}

/// Builds an index over `dataset` at `<work>/index.arpx` and returns its path.
pub fn index(dataset: &Path, work: &Path, extra: &[&str]) -> std::path::PathBuf {
    let out = work.join("index.arpx");
    let mut args = vec!["index", p(dataset), p(&out)];
    args.extend_from_slice(extra);
    let o = archlens(&args);
    assert_eq!(code(&o), 0, "index failed: {}", stderr(&o));
    out
}
