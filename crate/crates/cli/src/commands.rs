use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use archlens_core::evaluation::{
    class_subset_crr_from_matrix, genuine_imposter_split, label_counts, leave_one_out_from_matrix,
    EvaluationError, SamplingPolicy,
};
use archlens_core::index::{
    build_index, compute_pairwise_scores, load_index, save_index, CachedScores, ImageIndex,
    IndexError, FORMAT_VERSION,
};
use archlens_core::knowledge::{evaluate_design, load_kb, EvaluateOptions, KbError};
use archlens_core::synthetic::{write_corpus, DiagramFamily};
use archlens_core::Settings;
use serde_json::json;

use crate::output::{crr_text, curve_text, distribution_text, json_lines, write_atomic};
use crate::{invalid, runtime, ConfigArgs, Failure};

fn load_settings(args: &ConfigArgs, gate_override: bool) -> Result<Settings, Failure> {
    let mut settings = match &args.config {
        None => Settings::default(),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("cannot read config {}", path.display()))
                .map_err(runtime)?;
            toml::from_str(&text)
                .with_context(|| format!("invalid config {}", path.display()))
                .map_err(invalid)?
        }
    };
    if gate_override {
        settings.preprocess.gate_override = true;
    }
    settings
        .pipeline()
        .validate()
        .map_err(|e| invalid(anyhow!("invalid config: {e}")))?;
    settings
        .matching
        .validate()
        .map_err(|e| invalid(anyhow!(e)))?;
    Ok(settings)
}

fn open_index(path: &Path) -> Result<ImageIndex, Failure> {
    load_index(path)
        .with_context(|| format!("cannot load index {}", path.display()))
        .map_err(runtime)
}

fn index_failure(e: IndexError) -> Failure {
    match e {
        IndexError::UnknownLabel { .. } | IndexError::EmptyDataset(_) | IndexError::Config(_) => {
            invalid(e)
        }
        other => runtime(other),
    }
}

fn evaluation_failure(e: EvaluationError) -> Failure {
    match e {
        EvaluationError::SingleLabel(_)
        | EvaluationError::TooFewRecords(_)
        | EvaluationError::EmptyIndex => invalid(e),
        other => runtime(other),
    }
}

pub fn index(
    dataset: &Path,
    out: &Path,
    config: &ConfigArgs,
    gate_override: bool,
    pairwise: bool,
) -> Result<(), Failure> {
    let settings = load_settings(config, gate_override)?;
    if !dataset.is_dir() {
        return Err(runtime(anyhow!(
            "dataset root {} is not a directory",
            dataset.display()
        )));
    }
    let (mut idx, report) = build_index(dataset, &settings.pipeline()).map_err(index_failure)?;
    if pairwise {
        let matrix = compute_pairwise_scores(&idx, &settings.matching).map_err(runtime)?;
        idx = idx
            .with_scores(CachedScores {
                matching: settings.matching.clone(),
                matrix,
            })
            .map_err(runtime)?;
    }
    save_index(&idx, out)
        .with_context(|| format!("cannot write index {}", out.display()))
        .map_err(runtime)?;
    println!("{report}");
    Ok(())
}

pub struct EvaluateArgs {
    pub index: PathBuf,
    pub kb: PathBuf,
    pub image: PathBuf,
    pub config: ConfigArgs,
    pub out: Option<PathBuf>,
    pub top_k: usize,
    pub min_confidence: f64,
    pub gate_override: bool,
    pub qa: Vec<String>,
}

pub fn evaluate(a: EvaluateArgs) -> Result<(), Failure> {
    if a.top_k == 0 {
        return Err(invalid(anyhow!("--top-k must be at least 1")));
    }
    if !(0.0..=1.0).contains(&a.min_confidence) {
        return Err(invalid(anyhow!(
            "--min-confidence must lie in [0, 1], got {}",
            a.min_confidence
        )));
    }
    let settings = load_settings(&a.config, a.gate_override)?;
    let kb = load_kb(&a.kb).map_err(|e| match e {
        KbError::Invalid(_) => invalid(e),
        other => runtime(other),
    })?;
    for qa in &a.qa {
        kb.resolve(qa).map_err(invalid)?;
    }
    let idx = open_index(&a.index)?;
    let opts = EvaluateOptions {
        top_k: a.top_k,
        confidence_threshold: a.min_confidence,
        requested: a.qa,
    };
    let report = evaluate_design(
        &kb,
        &idx,
        &a.image,
        &settings.pipeline(),
        &settings.matching,
        &opts,
    )
    .map_err(runtime)?;
    if let Some(out) = &a.out {
        let json = serde_json::to_vec_pretty(&report).map_err(runtime)?;
        write_atomic(out, &json).map_err(runtime)?;
    }
    print!("{report}");
    Ok(())
}

pub fn crr(
    index: &Path,
    config: &ConfigArgs,
    out: Option<&Path>,
    subset_curve: bool,
    seed: u64,
    sample_cap: usize,
) -> Result<(), Failure> {
    if sample_cap == 0 {
        return Err(invalid(anyhow!("--sample-cap must be at least 1")));
    }
    let settings = load_settings(config, false)?;
    let idx = open_index(index)?;
    let labels = idx.labels();
    let ids = idx.ids();
    let matrix = idx.score_matrix(&settings.matching).map_err(runtime)?;
    let report = leave_one_out_from_matrix(&matrix, &labels, &ids).map_err(evaluation_failure)?;
    let dist = genuine_imposter_split(&matrix, &labels).report();
    let curve = if subset_curve {
        let policy = SamplingPolicy { seed, sample_cap };
        Some(
            class_subset_crr_from_matrix(&matrix, &labels, &ids, &policy)
                .map_err(evaluation_failure)?,
        )
    } else {
        None
    };

    if let Some(out) = out {
        let mut records = vec![json!({
            "kind": "summary",
            "n": report.n,
            "x": report.x,
            "crr": report.crr,
            "labels": report.labels,
            "confusion": report.confusion,
        })];
        records.extend(
            report.per_class.iter().map(
                |c| json!({"kind": "class", "label": c.label, "n": c.n, "x": c.x, "crr": c.crr}),
            ),
        );
        records.push(json!({"kind": "distributions", "report": dist}));
        if let Some(c) = &curve {
            for p in &c.points {
                records.push(json!({
                    "kind": "subset-k",
                    "k": p.k,
                    "seed": c.seed,
                    "sample_cap": c.sample_cap,
                    "total_subsets": p.total_subsets,
                    "evaluated": p.subsets.len(),
                    "exhaustive": p.exhaustive,
                    "mean": p.mean,
                    "min": p.min,
                    "max": p.max,
                }));
                records.extend(p.subsets.iter().map(|s| {
                    json!({"kind": "subset", "k": p.k, "labels": s.labels, "n": s.n, "x": s.x, "crr": s.crr})
                }));
            }
        }
        write_atomic(out, &json_lines(&records)).map_err(runtime)?;
    }
    print!("{}", crr_text(&report));
    print!("{}", distribution_text(&dist));
    if let Some(c) = &curve {
        print!("{}", curve_text(c));
    }
    Ok(())
}

pub fn kb_validate(path: &Path) -> Result<(), Failure> {
    match load_kb(path) {
        Ok(kb) => {
            println!(
                "{} patterns, {} tactics, {} quality attributes",
                kb.patterns().len(),
                kb.tactics().len(),
                kb.vocabulary().len()
            );
            Ok(())
        }
        Err(e @ KbError::Invalid(_)) => Err(invalid(e)),
        Err(e) => Err(runtime(e)),
    }
}

pub fn stats(index: &Path, config: &ConfigArgs, out: Option<&Path>) -> Result<(), Failure> {
    let settings = load_settings(config, false)?;
    let idx = open_index(index)?;
    let counts = label_counts(&idx.labels());
    let per_label: Vec<_> = counts
        .iter()
        .map(|(label, n)| {
            let kps: Vec<usize> = idx
                .records()
                .iter()
                .filter(|r| r.label == *label)
                .map(|r| r.features.len())
                .collect();
            json!({
                "label": label,
                "records": n,
                "keypoints_min": kps.iter().min(),
                "keypoints_max": kps.iter().max(),
                "keypoints_mean": kps.iter().sum::<usize>() as f64 / kps.len() as f64,
            })
        })
        .collect();
    let total_kps: usize = idx.records().iter().map(|r| r.features.len()).sum();
    let empty = idx
        .records()
        .iter()
        .filter(|r| r.features.is_empty())
        .count();
    let dist = if idx.len() >= 2 {
        let m = idx.score_matrix(&settings.matching).map_err(runtime)?;
        Some(genuine_imposter_split(&m, &idx.labels()).report())
    } else {
        None
    };
    let summary = json!({
        "format_version": FORMAT_VERSION,
        "fingerprint": idx.fingerprint().to_string(),
        "records": idx.len(),
        "keypoints": total_kps,
        "empty_feature_sets": empty,
        "cached_matrix": idx.scores().map(|c| json!({
            "ratio_threshold": c.matching.ratio_threshold,
            "require_mutual": c.matching.require_mutual,
        })),
        "labels": per_label,
        "distributions": dist,
    });
    if let Some(out) = out {
        let bytes = serde_json::to_vec_pretty(&summary).map_err(runtime)?;
        write_atomic(out, &bytes).map_err(runtime)?;
    }

    println!(
        "index format {FORMAT_VERSION}, config {}",
        idx.fingerprint()
    );
    println!(
        "{} records, {} keypoints, {} with no keypoints",
        idx.len(),
        total_kps,
        empty
    );
    match idx.scores() {
        Some(c) => println!(
            "cached score matrix: ratio {}, mutual {}",
            c.matching.ratio_threshold, c.matching.require_mutual
        ),
        None => println!("cached score matrix: none"),
    }
    for (label, n) in &counts {
        println!("  {:<36} {n:>5}", label.as_str());
    }
    if let Some(d) = &dist {
        print!("{}", distribution_text(d));
    }
    Ok(())
}

pub fn synth(
    out_dir: &Path,
    per_class: usize,
    size: u32,
    variation: f32,
    seed: u64,
) -> Result<(), Failure> {
    if per_class == 0 {
        return Err(invalid(anyhow!("--per-class must be at least 1")));
    }
    if size < 32 {
        return Err(invalid(anyhow!("--size must be at least 32")));
    }
    if !(0.0..=1.0).contains(&variation) {
        return Err(invalid(anyhow!("--variation must lie in [0, 1]")));
    }
    let n = write_corpus(
        out_dir,
        &DiagramFamily::ALL,
        per_class,
        size,
        variation,
        seed,
    )
    .map_err(runtime)?;
    println!("wrote {n} images under {}", out_dir.display());
    Ok(())
}
