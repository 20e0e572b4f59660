//! Pattern to quality-attribute associations, the tactic catalogue, and the
//! design evaluation report built on top of classification.
//!
//! # File format
//!
//! UTF-8 text, one record per line. Blank lines and lines starting with `#`
//! are ignored; leading and trailing whitespace is trimmed.
//!
//! ```text
//! qa <name> [aka <alias>, <alias>...]
//! pattern <label>: strength <ref>, ...; weakness <ref>, ... [; source <note>]
//! tactic <name> -> <ref>, ... : <description> [; source <note>]
//! ```
//!
//! Names are lowercase `[a-z0-9-]` words. A `<ref>` is a declared quality
//! attribute name or alias, optionally followed by `/<sub-attribute>` where the
//! sub-attribute is free-form. A list consisting of the single token `-` is
//! empty. The tactic description runs to the last `; source `.
//!
//! Every pattern label must appear exactly once. A pattern may not list the
//! same quality characteristic, with or without sub-attributes, as both a
//! strength and a weakness. Tactics need at least one target and unique names.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evaluation::classify;
use crate::imaging::{load_image, ImagingError};
use crate::index::{ImageIndex, Ranked};
use crate::label::PatternLabel;
use crate::matching::MatchConfig;
use crate::pipeline::{Pipeline, PipelineError};

const SEED: &str = include_str!("../data/seed.kb");

/// Default rank-1 score above which a report is flagged as low confidence.
pub const DEFAULT_CONFIDENCE_THRESHOLD: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// 1-based source line, or 0 for whole-file problems.
    pub line: usize,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line == 0 {
            write!(f, "{}", self.message)
        } else {
            write!(f, "line {}: {}", self.line, self.message)
        }
    }
}

#[derive(Debug, Error)]
pub enum KbError {
    #[error("cannot read knowledge base {}: {cause}", path.display())]
    Io {
        path: PathBuf,
        cause: std::io::Error,
    },
    #[error("knowledge base has {} violation(s):\n{}", .0.len(), .0.iter().map(|v| format!("  {v}")).collect::<Vec<_>>().join("\n"))]
    Invalid(Vec<Violation>),
    #[error("unknown quality attribute `{0}`")]
    UnknownQa(String),
}

/// A quality characteristic, optionally narrowed to a sub-attribute.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub struct QaRef {
    pub characteristic: String,
    pub sub: Option<String>,
}

impl fmt::Display for QaRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.sub {
            Some(s) => write!(f, "{}/{}", self.characteristic, s),
            None => write!(f, "{}", self.characteristic),
        }
    }
}

impl From<QaRef> for String {
    fn from(q: QaRef) -> String {
        q.to_string()
    }
}

impl TryFrom<String> for QaRef {
    type Error = String;
    fn try_from(s: String) -> Result<Self, String> {
        let (c, sub) = match s.split_once('/') {
            Some((c, sub)) => (c, Some(sub)),
            None => (s.as_str(), None),
        };
        if !is_name(c) || sub.is_some_and(|x| x.trim().is_empty()) {
            return Err(format!("malformed quality attribute `{s}`"));
        }
        Ok(QaRef {
            characteristic: c.to_string(),
            sub: sub.map(str::to_string),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QualityAttribute {
    pub name: String,
    pub aliases: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Tactic {
    pub name: String,
    pub targets: Vec<QaRef>,
    pub description: String,
    pub source: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PatternEntry {
    pub label: PatternLabel,
    pub strengths: Vec<QaRef>,
    pub weaknesses: Vec<QaRef>,
    pub source: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KnowledgeBase {
    vocabulary: Vec<QualityAttribute>,
    /// One per label, in canonical label order.
    patterns: Vec<PatternEntry>,
    tactics: Vec<Tactic>,
}

fn is_name(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '-')
        && !s.starts_with('-')
}

fn split_list(s: &str) -> Vec<&str> {
    let s = s.trim();
    if s == "-" || s.is_empty() {
        return Vec::new();
    }
    s.split(',').map(str::trim).collect()
}

/// Splits `text; source note` on the last `; source `.
fn split_source(s: &str) -> (&str, Option<String>) {
    match s.rfind("; source ") {
        Some(i) => (&s[..i], Some(s[i + "; source ".len()..].trim().to_string())),
        None => (s, None),
    }
}

struct Raw<'a> {
    line: usize,
    kind: RawKind<'a>,
}

enum RawKind<'a> {
    Qa(&'a str, Vec<&'a str>),
    Pattern {
        label: &'a str,
        strengths: Vec<&'a str>,
        weaknesses: Vec<&'a str>,
        source: Option<String>,
    },
    Tactic {
        name: &'a str,
        targets: Vec<&'a str>,
        description: &'a str,
        source: Option<String>,
    },
}

fn parse_line(line: &str) -> Result<Option<RawKind<'_>>, String> {
    let line = line.trim();
    if line.is_empty() || line.starts_with('#') {
        return Ok(None);
    }
    let (kw, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
    let rest = rest.trim();
    match kw {
        "qa" => {
            let (name, aliases) = match rest.split_once(" aka ") {
                Some((n, a)) => (n.trim(), split_list(a)),
                None => (rest, Vec::new()),
            };
            Ok(Some(RawKind::Qa(name, aliases)))
        }
        "pattern" => {
            let (label, body) = rest
                .split_once(':')
                .ok_or("expected `pattern <label>: strength ...; weakness ...`")?;
            let (body, source) = split_source(body);
            let mut strengths = None;
            let mut weaknesses = None;
            for clause in body.split(';').map(str::trim) {
                let (key, list) = clause
                    .split_once(char::is_whitespace)
                    .unwrap_or((clause, ""));
                let slot = match key {
                    "strength" | "strengths" => &mut strengths,
                    "weakness" | "weaknesses" => &mut weaknesses,
                    _ => return Err(format!("unexpected clause `{clause}`")),
                };
                if slot.replace(split_list(list)).is_some() {
                    return Err(format!("`{key}` listed twice"));
                }
            }
            Ok(Some(RawKind::Pattern {
                label: label.trim(),
                strengths: strengths.ok_or("missing `strength` clause")?,
                weaknesses: weaknesses
                    .ok_or("missing `weakness` clause (write `weakness -` for none)")?,
                source,
            }))
        }
        "tactic" => {
            let (name, body) = rest
                .split_once("->")
                .ok_or("expected `tactic <name> -> <qa>, ... : <description>`")?;
            let (targets, desc) = body
                .split_once(':')
                .ok_or("expected `: <description>` after the tactic targets")?;
            let (description, source) = split_source(desc);
            Ok(Some(RawKind::Tactic {
                name: name.trim(),
                targets: split_list(targets),
                description: description.trim(),
                source,
            }))
        }
        other => Err(format!("unknown record kind `{other}`")),
    }
}

impl KnowledgeBase {
    /// The knowledge base shipped with the library.
    pub fn seed() -> Self {
        Self::parse(SEED).expect("bundled knowledge base is valid")
    }

    pub fn seed_text() -> &'static str {
        SEED
    }

    /// Parses and validates, reporting every violation found.
    pub fn parse(text: &str) -> Result<Self, KbError> {
        let mut violations = Vec::new();
        let mut raws = Vec::new();
        for (i, line) in text.lines().enumerate() {
            match parse_line(line) {
                Ok(Some(kind)) => raws.push(Raw { line: i + 1, kind }),
                Ok(None) => {}
                Err(message) => violations.push(Violation {
                    line: i + 1,
                    message,
                }),
            }
        }
        let mut v = |line: usize, message: String| violations.push(Violation { line, message });

        // Vocabulary first so declarations may appear anywhere.
        let mut vocabulary = Vec::new();
        let mut lookup: BTreeMap<String, String> = BTreeMap::new();
        for r in &raws {
            if let RawKind::Qa(name, aliases) = &r.kind {
                for n in std::iter::once(name).chain(aliases.iter()) {
                    if !is_name(n) {
                        v(r.line, format!("invalid quality attribute name `{n}`"));
                    } else if let Some(prev) = lookup.insert(n.to_string(), name.to_string()) {
                        v(
                            r.line,
                            format!("duplicate quality attribute `{n}` (already names `{prev}`)"),
                        );
                    }
                }
                vocabulary.push(QualityAttribute {
                    name: name.to_string(),
                    aliases: aliases.iter().map(|a| a.to_string()).collect(),
                });
            }
        }
        let resolve = |s: &str| -> Result<QaRef, String> {
            let mut r = QaRef::try_from(s.to_string())?;
            r.characteristic = lookup
                .get(&r.characteristic)
                .cloned()
                .ok_or_else(|| format!("unknown quality attribute `{}`", r.characteristic))?;
            Ok(r)
        };

        let mut patterns: BTreeMap<PatternLabel, PatternEntry> = BTreeMap::new();
        let mut tactics: Vec<Tactic> = Vec::new();
        for r in &raws {
            match &r.kind {
                RawKind::Qa(..) => {}
                RawKind::Pattern {
                    label,
                    strengths,
                    weaknesses,
                    source,
                } => {
                    let label: PatternLabel = match label.parse() {
                        Ok(l) => l,
                        Err(e) => {
                            v(r.line, format!("{e}"));
                            continue;
                        }
                    };
                    let mut resolve_all = |list: &[&str]| -> Vec<QaRef> {
                        list.iter()
                            .filter_map(|s| {
                                resolve(s)
                                    .map_err(|m| v(r.line, format!("pattern {label}: {m}")))
                                    .ok()
                            })
                            .collect()
                    };
                    let strengths = resolve_all(strengths);
                    let weaknesses = resolve_all(weaknesses);
                    let strong: BTreeSet<&str> = strengths
                        .iter()
                        .map(|q| q.characteristic.as_str())
                        .collect();
                    let mut reported = BTreeSet::new();
                    for w in &weaknesses {
                        if strong.contains(w.characteristic.as_str())
                            && reported.insert(&w.characteristic)
                        {
                            v(
                                r.line,
                                format!(
                                    "pattern {label} lists {} as both strength and weakness",
                                    w.characteristic
                                ),
                            );
                        }
                    }
                    let entry = PatternEntry {
                        label,
                        strengths,
                        weaknesses,
                        source: source.clone(),
                    };
                    if patterns.insert(label, entry).is_some() {
                        v(r.line, format!("duplicate pattern entry for {label}"));
                    }
                }
                RawKind::Tactic {
                    name,
                    targets,
                    description,
                    source,
                } => {
                    if !is_name(name) {
                        v(r.line, format!("invalid tactic name `{name}`"));
                    }
                    if targets.is_empty() {
                        v(
                            r.line,
                            format!("tactic {name} targets no quality attribute"),
                        );
                    }
                    if description.is_empty() {
                        v(r.line, format!("tactic {name} has no description"));
                    }
                    if tactics.iter().any(|t| t.name == *name) {
                        v(r.line, format!("duplicate tactic {name}"));
                    }
                    let targets = targets
                        .iter()
                        .filter_map(|s| {
                            resolve(s)
                                .map_err(|m| v(r.line, format!("tactic {name}: {m}")))
                                .ok()
                        })
                        .collect();
                    tactics.push(Tactic {
                        name: name.to_string(),
                        targets,
                        description: description.to_string(),
                        source: source.clone(),
                    });
                }
            }
        }
        for label in PatternLabel::ALL {
            if !patterns.contains_key(&label) {
                v(0, format!("missing pattern entry for {label}"));
            }
        }
        if vocabulary.is_empty() {
            v(0, "no quality attributes declared".into());
        }

        if !violations.is_empty() {
            violations.sort_by_key(|x| x.line);
            return Err(KbError::Invalid(violations));
        }
        Ok(Self {
            vocabulary,
            patterns: patterns.into_values().collect(),
            tactics,
        })
    }

    pub fn vocabulary(&self) -> &[QualityAttribute] {
        &self.vocabulary
    }

    pub fn patterns(&self) -> &[PatternEntry] {
        &self.patterns
    }

    pub fn tactics(&self) -> &[Tactic] {
        &self.tactics
    }

    /// Canonical reference for a name, alias, or `name/sub`.
    pub fn resolve(&self, qa: &str) -> Result<QaRef, KbError> {
        let unknown = || KbError::UnknownQa(qa.to_string());
        let mut r = QaRef::try_from(qa.to_string()).map_err(|_| unknown())?;
        let decl = self
            .vocabulary
            .iter()
            .find(|d| d.name == r.characteristic || d.aliases.contains(&r.characteristic))
            .ok_or_else(unknown)?;
        r.characteristic = decl.name.clone();
        Ok(r)
    }

    pub fn entry(&self, p: PatternLabel) -> &PatternEntry {
        // Every label is present once validation has passed.
        &self.patterns[self.patterns.binary_search_by_key(&p, |e| e.label).unwrap()]
    }

    /// Strengths and weaknesses in file order.
    pub fn qas_for_pattern(&self, p: PatternLabel) -> (&[QaRef], &[QaRef]) {
        let e = self.entry(p);
        (&e.strengths, &e.weaknesses)
    }

    /// Tactics targeting `qa`, in file order. A bare characteristic matches
    /// tactics for any of its sub-attributes; a sub-attribute matches tactics
    /// for itself or for the whole characteristic.
    pub fn tactics_for_qa(&self, qa: &str) -> Result<Vec<&Tactic>, KbError> {
        let want = self.resolve(qa)?;
        Ok(self
            .tactics
            .iter()
            .filter(|t| t.targets.iter().any(|g| covers(&want, g)))
            .collect())
    }
}

fn covers(want: &QaRef, target: &QaRef) -> bool {
    want.characteristic == target.characteristic
        && (want.sub.is_none() || target.sub.is_none() || want.sub == target.sub)
}

pub fn load_kb(path: &Path) -> Result<KnowledgeBase, KbError> {
    let text = std::fs::read_to_string(path).map_err(|source| KbError::Io {
        path: path.to_path_buf(),
        cause: source,
    })?;
    KnowledgeBase::parse(&text)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RecommendationReason {
    Weakness,
    Requested,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recommendation {
    pub qa: QaRef,
    pub reason: RecommendationReason,
    pub tactics: Vec<Tactic>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub image_id: String,
    pub pattern: PatternLabel,
    pub score: f64,
    pub evidence: Vec<Ranked>,
    /// Distinct labels among the evidence, nearest first.
    pub evidence_labels: Vec<PatternLabel>,
    pub strengths: Vec<QaRef>,
    pub weaknesses: Vec<QaRef>,
    pub recommendations: Vec<Recommendation>,
    pub notes: Vec<String>,
    pub confidence_threshold: f64,
    pub low_confidence: bool,
}

impl fmt::Display for EvaluationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let join = |v: &[QaRef]| {
            v.iter()
                .map(|q| q.to_string())
                .collect::<Vec<_>>()
                .join(", ")
        };
        if self.low_confidence {
            writeln!(
                f,
                "LOW CONFIDENCE: rank-1 score {:.4} is above {:.4}",
                self.score, self.confidence_threshold
            )?;
        }
        writeln!(f, "image: {}", self.image_id)?;
        writeln!(f, "pattern: {} (score {:.4})", self.pattern, self.score)?;
        writeln!(f, "evidence:")?;
        for (i, r) in self.evidence.iter().enumerate() {
            writeln!(f, "  {}. {} {} {:.4}", i + 1, r.image_id, r.label, r.score)?;
        }
        writeln!(f, "strengths: {}", join(&self.strengths))?;
        if self.weaknesses.is_empty() {
            writeln!(f, "weaknesses: none")?;
        } else {
            writeln!(f, "weaknesses: {}", join(&self.weaknesses))?;
        }
        for rec in &self.recommendations {
            let why = match rec.reason {
                RecommendationReason::Weakness => "weakness",
                RecommendationReason::Requested => "requested",
            };
            writeln!(f, "tactics for {} ({why}):", rec.qa)?;
            if rec.tactics.is_empty() {
                writeln!(f, "  (none recorded)")?;
            }
            for t in &rec.tactics {
                writeln!(f, "  - {}: {}", t.name, t.description)?;
            }
        }
        for n in &self.notes {
            writeln!(f, "note: {n}")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluateOptions {
    pub top_k: usize,
    pub confidence_threshold: f64,
    /// Extra quality attributes to recommend tactics for.
    pub requested: Vec<String>,
}

impl Default for EvaluateOptions {
    fn default() -> Self {
        Self {
            top_k: 5,
            confidence_threshold: DEFAULT_CONFIDENCE_THRESHOLD,
            requested: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Load,
    QualityGate,
    Preprocess,
    Features,
    Classify,
    Knowledge,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Stage::Load => "load",
            Stage::QualityGate => "quality-gate",
            Stage::Preprocess => "preprocess",
            Stage::Features => "features",
            Stage::Classify => "classify",
            Stage::Knowledge => "knowledge",
        })
    }
}

#[derive(Debug, Error)]
#[error("{stage} stage failed: {message}")]
pub struct DesignError {
    pub stage: Stage,
    pub message: String,
}

fn stage_err(stage: Stage) -> impl FnOnce(String) -> DesignError {
    move |message| DesignError { stage, message }
}

/// Classifies the diagram at `image` and assembles the evaluation report.
pub fn evaluate_design(
    kb: &KnowledgeBase,
    index: &ImageIndex,
    image: &Path,
    pipeline: &Pipeline,
    matching: &MatchConfig,
    opts: &EvaluateOptions,
) -> Result<EvaluationReport, DesignError> {
    let requested: Vec<QaRef> = opts
        .requested
        .iter()
        .map(|q| kb.resolve(q).map_err(|e| e.to_string()))
        .collect::<Result<_, _>>()
        .map_err(stage_err(Stage::Knowledge))?;
    if pipeline.fingerprint() != index.fingerprint() {
        return Err(stage_err(Stage::Classify)(format!(
            "feature config {} differs from the index's {}",
            pipeline.fingerprint(),
            index.fingerprint()
        )));
    }
    let img = load_image(image).map_err(|e: ImagingError| stage_err(Stage::Load)(e.to_string()))?;
    let image_id = image.display().to_string();
    let q = pipeline
        .extract(&img, &image_id, None)
        .map_err(|e| match e {
            PipelineError::Gate(m) => stage_err(Stage::QualityGate)(m),
            PipelineError::Preprocess(e) => stage_err(Stage::Preprocess)(e.to_string()),
            PipelineError::Features(e) => stage_err(Stage::Features)(e.to_string()),
        })?;
    let c = classify(index, &q, matching, opts.top_k)
        .map_err(|e| stage_err(Stage::Classify)(e.to_string()))?;
    Ok(assemble(
        kb,
        image_id,
        c,
        &requested,
        opts.confidence_threshold,
    ))
}

/// Builds the report from an already computed classification.
pub fn assemble(
    kb: &KnowledgeBase,
    image_id: String,
    c: crate::evaluation::Classification,
    requested: &[QaRef],
    confidence_threshold: f64,
) -> EvaluationReport {
    let (strengths, weaknesses) = kb.qas_for_pattern(c.label);
    let mut evidence_labels = Vec::new();
    for r in &c.evidence {
        if !evidence_labels.contains(&r.label) {
            evidence_labels.push(r.label);
        }
    }
    let mut recommendations: Vec<Recommendation> = Vec::new();
    let mut push = |qa: &QaRef, reason: RecommendationReason| {
        if recommendations.iter().any(|r| &r.qa == qa) {
            return;
        }
        let tactics = kb
            .tactics()
            .iter()
            .filter(|t| t.targets.iter().any(|g| covers(qa, g)))
            .cloned()
            .collect();
        recommendations.push(Recommendation {
            qa: qa.clone(),
            reason,
            tactics,
        });
    };
    weaknesses
        .iter()
        .for_each(|w| push(w, RecommendationReason::Weakness));
    requested
        .iter()
        .for_each(|q| push(q, RecommendationReason::Requested));

    let mut notes = Vec::new();
    if weaknesses.is_empty() {
        notes.push(format!("no weaknesses recorded for {}", c.label));
    }
    let low_confidence = c.score > confidence_threshold;
    if c.low_confidence && !low_confidence {
        notes.push("no descriptor matched any indexed image".into());
    }
    EvaluationReport {
        image_id,
        pattern: c.label,
        score: c.score,
        evidence: c.evidence,
        evidence_labels,
        strengths: strengths.to_vec(),
        weaknesses: weaknesses.to_vec(),
        recommendations,
        notes,
        confidence_threshold,
        low_confidence,
    }
}
