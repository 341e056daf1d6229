//! PubTabNet-style annotation ingestion and TEDS evaluation of prediction files.

use std::collections::BTreeMap;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use tsrlab_core::grammar::{
    split_structure, tokenize_with_bound, vocabulary_hash, TableClass, Token, TokenSequence,
};
use tsrlab_core::teds::{aggregate, score_tokens, TedsError, NODE_COUNTING};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {reason}")]
    Format { line: usize, reason: String },
    #[error("no prediction filename matches an annotation")]
    EmptyJoin,
    #[error("could not build a worker pool: {0}")]
    Pool(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            "test" => Ok(Split::Test),
            other => Err(format!("unknown split `{other}` (expected train, val or test)")),
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnnotationRecord {
    pub filename: String,
    pub split: Split,
    /// The `html.structure.tokens` strings, verbatim.
    pub structure_tokens: Vec<String>,
}

impl AnnotationRecord {
    pub fn tokens(&self) -> TokenSequence {
        tokenize_with_bound(&self.structure_tokens, usize::MAX).expect("unbounded")
    }

    fn from_json(v: &Value) -> Option<Self> {
        let filename = v.get("filename")?.as_str()?.to_string();
        let split = v.get("split")?.as_str()?.parse().ok()?;
        let structure_tokens = v
            .get("html")?
            .get("structure")?
            .get("tokens")?
            .as_array()?
            .iter()
            .map(|t| t.as_str().map(str::to_string))
            .collect::<Option<Vec<_>>>()?;
        Some(Self {
            filename,
            split,
            structure_tokens,
        })
    }

    pub fn to_json(&self) -> Value {
        serde_json::json!({
            "filename": self.filename,
            "split": self.split,
            "html": { "structure": { "tokens": self.structure_tokens } },
        })
    }
}

/// Records kept and lines skipped for lacking a usable filename, split or
/// `html.structure.tokens` field.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Annotations {
    pub records: Vec<AnnotationRecord>,
    pub skipped: usize,
}

fn parse_line(line: &str, number: usize) -> Result<Value, EvalError> {
    serde_json::from_str(line).map_err(|e| EvalError::Format {
        line: number,
        reason: format!("invalid JSON: {e}"),
    })
}

/// Streams annotations line by line. Lines that are not JSON are an error;
/// JSON records missing a required field are skipped and counted.
pub fn read_annotations<R: BufRead>(reader: R, split: Option<Split>) -> Result<Annotations, EvalError> {
    let mut out = Annotations::default();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| EvalError::Io {
            path: "<annotations>".into(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let v = parse_line(&line, i + 1)?;
        match AnnotationRecord::from_json(&v) {
            Some(r) => {
                if split.is_none_or(|s| s == r.split) {
                    if r.tokens().tokens().contains(&Token::Unk) {
                        log::warn!("{}: structure tokens outside the vocabulary", r.filename);
                    }
                    out.records.push(r);
                }
            }
            None => {
                log::warn!(
                    "line {}: record lacks filename, split or html.structure.tokens",
                    i + 1
                );
                out.skipped += 1;
            }
        }
    }
    Ok(out)
}

fn open(path: &Path) -> Result<BufReader<File>, EvalError> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|source| EvalError::Io {
            path: path.display().to_string(),
            source,
        })
}

pub fn load_annotations(path: &Path, split: Option<Split>) -> Result<Annotations, EvalError> {
    read_annotations(open(path)?, split)
}

pub fn write_annotations<W: Write>(mut w: W, records: &[AnnotationRecord]) -> std::io::Result<()> {
    for r in records {
        serde_json::to_writer(&mut w, &r.to_json())?;
        writeln!(w)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PredictionBody {
    Tokens(Vec<String>),
    /// Canonical structure string such as `<tbody><tr><td></td></tr></tbody>`.
    Html(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PredictionRecord {
    pub filename: String,
    pub body: PredictionBody,
}

impl PredictionRecord {
    pub fn tokens(&self) -> TokenSequence {
        let seq = match &self.body {
            PredictionBody::Tokens(t) => tokenize_with_bound(t, usize::MAX),
            PredictionBody::Html(s) => tokenize_with_bound(&split_structure(s), usize::MAX),
        };
        seq.expect("unbounded")
    }
}

/// Predictions carry `filename` and either `tokens` (array) or `html` (string).
/// Annotation records are accepted too.
pub fn read_predictions<R: BufRead>(reader: R) -> Result<Vec<PredictionRecord>, EvalError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|source| EvalError::Io {
            path: "<predictions>".into(),
            source,
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let v = parse_line(&line, i + 1)?;
        let bad = |reason: &str| EvalError::Format {
            line: i + 1,
            reason: reason.into(),
        };
        let filename = v
            .get("filename")
            .and_then(Value::as_str)
            .ok_or_else(|| bad("missing string field `filename`"))?
            .to_string();
        let body = if let Some(t) = v.get("tokens") {
            let list = t
                .as_array()
                .and_then(|a| {
                    a.iter()
                        .map(|x| x.as_str().map(str::to_string))
                        .collect::<Option<Vec<_>>>()
                })
                .ok_or_else(|| bad("`tokens` must be an array of strings"))?;
            PredictionBody::Tokens(list)
        } else if let Some(h) = v.get("html") {
            if let Some(s) = h.as_str() {
                PredictionBody::Html(s.to_string())
            } else {
                // Annotation layout, so a ground-truth file can be scored against itself.
                let list = h
                    .pointer("/structure/tokens")
                    .and_then(Value::as_array)
                    .and_then(|a| {
                        a.iter()
                            .map(|x| x.as_str().map(str::to_string))
                            .collect::<Option<Vec<_>>>()
                    })
                    .ok_or_else(|| bad("`html` must be a string or hold structure.tokens"))?;
                PredictionBody::Tokens(list)
            }
        } else {
            return Err(bad("prediction needs `tokens` or `html`"));
        };
        out.push(PredictionRecord { filename, body });
    }
    Ok(out)
}

pub fn load_predictions(path: &Path) -> Result<Vec<PredictionRecord>, EvalError> {
    read_predictions(open(path)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FlagKind {
    /// Annotation without a prediction; scored 0.
    MissingPrediction,
    /// Prediction whose filename has no annotation; ignored.
    UnmatchedPrediction,
    /// Prediction that does not parse; scored 0.
    MalformedPrediction,
    /// Annotation whose structure does not parse; excluded from the means.
    InvalidGroundTruth,
    /// Repeated filename; the first occurrence is used.
    DuplicateAnnotation,
    DuplicatePrediction,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize)]
pub struct Flag {
    pub filename: String,
    pub kind: FlagKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleResult {
    pub filename: String,
    pub class: &'static str,
    pub teds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalReport {
    pub version: &'static str,
    pub vocab_hash: String,
    pub node_counting: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub split: Option<Split>,
    pub n_samples: usize,
    pub n_simple: usize,
    pub n_complex: usize,
    /// Percentages with two decimals; `null` when the class is empty.
    pub teds_simple: Option<f64>,
    pub teds_complex: Option<f64>,
    pub teds_all: f64,
    pub flags: Vec<Flag>,
    pub per_sample: Vec<SampleResult>,
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

fn class_name(c: TableClass) -> &'static str {
    match c {
        TableClass::Simple => "simple",
        TableClass::Complex => "complex",
    }
}

/// Joins predictions to annotations on filename and scores every annotation.
/// `threads` sizes the worker pool (default: one per processor). Results are
/// ordered by filename, so neither input order nor thread count affects them.
pub fn evaluate(
    gt: &[AnnotationRecord],
    pred: &[PredictionRecord],
    threads: Option<usize>,
) -> Result<EvalReport, EvalError> {
    let mut flags = Vec::new();
    let mut gts: BTreeMap<&str, &AnnotationRecord> = BTreeMap::new();
    for r in gt {
        if gts.contains_key(r.filename.as_str()) {
            flags.push(Flag {
                filename: r.filename.clone(),
                kind: FlagKind::DuplicateAnnotation,
            });
        } else {
            gts.insert(&r.filename, r);
        }
    }
    let mut preds: BTreeMap<&str, &PredictionRecord> = BTreeMap::new();
    for p in pred {
        let kind = if !gts.contains_key(p.filename.as_str()) {
            Some(FlagKind::UnmatchedPrediction)
        } else if preds.contains_key(p.filename.as_str()) {
            Some(FlagKind::DuplicatePrediction)
        } else {
            preds.insert(&p.filename, p);
            None
        };
        if let Some(kind) = kind {
            flags.push(Flag {
                filename: p.filename.clone(),
                kind,
            });
        }
    }
    if preds.is_empty() {
        return Err(EvalError::EmptyJoin);
    }

    let jobs: Vec<(&str, &AnnotationRecord, Option<&PredictionRecord>)> =
        gts.iter().map(|(f, g)| (*f, *g, preds.get(f).copied())).collect();
    let score = || {
        jobs.par_iter()
            .map(
                |(f, g, p)| -> Result<(TableClass, f64, Option<FlagKind>), TedsError> {
                    let gt_tokens = g.tokens();
                    let class = tsrlab_core::grammar::parse(gt_tokens.tokens())?.classify();
                    Ok(match p {
                        None => (class, 0.0, Some(FlagKind::MissingPrediction)),
                        Some(p) => {
                            let s = score_tokens(p.tokens().tokens(), gt_tokens.tokens())?;
                            let flag = s.pred_malformed.then_some(FlagKind::MalformedPrediction);
                            log::debug!("{f}: {}", s.score);
                            (class, s.score, flag)
                        }
                    })
                },
            )
            .collect::<Vec<_>>()
    };
    let results = match threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| EvalError::Pool(e.to_string()))?
            .install(score),
        None => score(),
    };

    let mut per_sample = Vec::with_capacity(results.len());
    let mut pairs = Vec::with_capacity(results.len());
    for ((filename, _, _), r) in jobs.iter().zip(results) {
        match r {
            Ok((class, teds, flag)) => {
                if let Some(kind) = flag {
                    flags.push(Flag {
                        filename: filename.to_string(),
                        kind,
                    });
                }
                pairs.push((class, teds));
                per_sample.push(SampleResult {
                    filename: filename.to_string(),
                    class: class_name(class),
                    teds,
                });
            }
            Err(e) => {
                log::warn!("{filename}: {e}");
                flags.push(Flag {
                    filename: filename.to_string(),
                    kind: FlagKind::InvalidGroundTruth,
                });
            }
        }
    }
    let means = aggregate(&pairs).map_err(|_| EvalError::EmptyJoin)?;
    flags.sort();
    Ok(EvalReport {
        version: env!("CARGO_PKG_VERSION"),
        vocab_hash: vocabulary_hash(),
        node_counting: NODE_COUNTING,
        split: None,
        n_samples: pairs.len(),
        n_simple: means.n_simple,
        n_complex: means.n_complex,
        teds_simple: means.simple,
        teds_complex: means.complex,
        teds_all: means.all,
        flags,
        per_sample,
    })
}
