use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;

use anyhow::Context;
use archlens_core::evaluation::{CrrReport, DistributionReport, SubsetCrrCurve};
use tempfile::NamedTempFile;

/// Writes through a temporary sibling file so a failure never leaves a
/// partial output behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> anyhow::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp =
        NamedTempFile::new_in(dir).with_context(|| format!("cannot write {}", path.display()))?;
    tmp.write_all(bytes)?;
    tmp.persist(path)
        .map_err(|e| e.error)
        .with_context(|| format!("cannot write {}", path.display()))?;
    Ok(())
}

pub fn json_lines<T: serde::Serialize>(records: &[T]) -> Vec<u8> {
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r).expect("serializable");
        out.push(b'\n');
    }
    out
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"))
}

pub fn crr_text(r: &CrrReport) -> String {
    let mut s = String::new();
    writeln!(s, "CRR {:.2}% ({}/{})", r.crr, r.x, r.n).unwrap();
    writeln!(s, "per class:").unwrap();
    let width = r.labels.iter().map(|l| l.as_str().len()).max().unwrap_or(0);
    for c in &r.per_class {
        writeln!(
            s,
            "  {:<width$}  {:>4}/{:<4} {:6.2}%",
            c.label.as_str(),
            c.x,
            c.n,
            c.crr
        )
        .unwrap();
    }
    writeln!(
        s,
        "confusion (rows true, columns predicted, order as above):"
    )
    .unwrap();
    for row in &r.confusion {
        let cells: Vec<String> = row.iter().map(|v| format!("{v:>4}")).collect();
        writeln!(s, "  {}", cells.join("")).unwrap();
    }
    s
}

pub fn distribution_text(d: &DistributionReport) -> String {
    let mut s = String::new();
    writeln!(s, "score pairs: {} ({} policy)", d.total_pairs, d.policy).unwrap();
    for (name, x) in [("genuine", &d.genuine), ("imposter", &d.imposter)] {
        writeln!(
            s,
            "  {name:<8} count {:>8}  mean {}  median {}",
            x.count,
            opt(x.mean),
            opt(x.median)
        )
        .unwrap();
    }
    s
}

pub fn curve_text(c: &SubsetCrrCurve) -> String {
    let mut s = String::new();
    writeln!(
        s,
        "class-subset CRR (seed {}, sample cap {}):",
        c.seed, c.sample_cap
    )
    .unwrap();
    for p in &c.points {
        let how = if p.exhaustive { "all" } else { "sampled" };
        writeln!(
            s,
            "  k={:<2} subsets {:>4}/{:<5} ({how:<7}) mean {:6.2}  min {:6.2}  max {:6.2}",
            p.k,
            p.subsets.len(),
            p.total_subsets,
            p.mean,
            p.min,
            p.max
        )
        .unwrap();
    }
    s
}
