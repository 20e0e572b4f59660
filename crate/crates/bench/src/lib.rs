//! Shared fixtures for the benchmarks.

use archlens_core::imaging::preprocess;
use archlens_core::index::{ImageIndex, IndexRecord};
use archlens_core::synthetic::{DiagramFamily, SyntheticDiagram};
use archlens_core::{extract_features, FeatureSet, GrayImage, Pipeline};

/// A preprocessed working image of one synthetic diagram.
pub fn working_image(family: DiagramFamily, seed: u64) -> GrayImage {
    let p = Pipeline::default();
    preprocess(
        &SyntheticDiagram::new(family, seed, 0.5).render(400),
        &p.preprocess,
    )
    .unwrap()
}

pub fn features(family: DiagramFamily, seed: u64) -> FeatureSet {
    let p = Pipeline::default();
    extract_features(
        &working_image(family, seed),
        &p.sift,
        format!("{family:?}/{seed}"),
        Some(family.label()),
    )
    .unwrap()
}

/// `per_class` synthetic diagrams for each family.
pub fn index(per_class: u64) -> ImageIndex {
    let records = DiagramFamily::ALL
        .iter()
        .flat_map(|f| (0..per_class).map(move |s| (*f, s)))
        .map(|(f, s)| {
            let fs = features(f, s);
            IndexRecord::new(fs.image_id.clone(), f.label(), fs)
        })
        .collect();
    ImageIndex::new(Pipeline::default().fingerprint(), records).unwrap()
}
