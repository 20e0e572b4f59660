#![allow(dead_code)]

use std::path::Path;

use archlens_core::synthetic::{write_corpus, DiagramFamily, SyntheticDiagram};
use archlens_core::RasterImage;
use tempfile::TempDir;

pub fn corpus(families: &[DiagramFamily], per_class: usize, variation: f32, seed: u64) -> TempDir {
    let dir = tempfile::tempdir().unwrap();
    write_corpus(dir.path(), families, per_class, 400, variation, seed).unwrap();
    dir
}

pub fn save(img: &RasterImage, path: &Path) {
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    img.save_png(path).unwrap();
}

pub fn diagram(family: DiagramFamily, seed: u64) -> RasterImage {
    SyntheticDiagram::new(family, seed, 0.5).render(400)
}
