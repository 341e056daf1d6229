//! Tree-edit-distance-based similarity between predicted and ground-truth
//! table structures.
//!
//! `TEDS = 1 - EditDist(pred, gt) / max(|pred|, |gt|)`, where node counts
//! include the synthetic `table` root. Only structure is compared: two `td`
//! nodes match when their span attributes agree.

mod distance;
mod tree;

pub use distance::{tree_edit_distance, CostModel, StructureCost};
pub use tree::{LabeledTree, NodeLabel, Tag};

use serde::Serialize;

use crate::grammar::{parse, ParseError, TableClass, TableTree, Token, TokenSequence};

/// Node-counting convention recorded in every report.
pub const NODE_COUNTING: &str = "node counts include the synthetic table root";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TedsError {
    #[error("ground truth does not parse: {0}")]
    GroundTruth(#[from] ParseError),
    #[error("no scores to aggregate")]
    EmptyInput,
}

/// TEDS between two already-parsed tables.
pub fn teds_trees(pred: &TableTree, gt: &TableTree) -> f64 {
    let a = LabeledTree::from_table(pred);
    let b = LabeledTree::from_table(gt);
    let dist = tree_edit_distance(&a, &b, &StructureCost);
    let denom = a.len().max(b.len()) as f64;
    (1.0 - dist / denom).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TedsScore {
    pub score: f64,
    /// The prediction failed to parse and was scored 0.
    pub pred_malformed: bool,
}

/// Scores token lists. A prediction that fails to parse scores 0.0; a ground
/// truth that fails to parse is an error.
pub fn score_tokens(pred: &[Token], gt: &[Token]) -> Result<TedsScore, TedsError> {
    let gt = parse(gt)?;
    Ok(match parse(pred) {
        Ok(p) => TedsScore {
            score: teds_trees(&p, &gt),
            pred_malformed: false,
        },
        Err(e) => {
            log::debug!("unparseable prediction scored 0: {e}");
            TedsScore {
                score: 0.0,
                pred_malformed: true,
            }
        }
    })
}

pub fn teds(pred: &TokenSequence, gt: &TokenSequence) -> Result<f64, TedsError> {
    score_tokens(pred.tokens(), gt.tokens()).map(|s| s.score)
}

/// Rounds a percentage half-up to two decimals.
pub(crate) fn round_percent(p: f64) -> f64 {
    (p * 100.0 + 1e-9).round() / 100.0
}

/// Class-wise and overall means, in percent with two decimals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClassMeans {
    pub n_simple: usize,
    pub n_complex: usize,
    /// `None` when no sample falls in the class.
    pub simple: Option<f64>,
    pub complex: Option<f64>,
    /// Mean over every sample (not the mean of the two class means).
    pub all: f64,
}

pub fn aggregate(scores: &[(TableClass, f64)]) -> Result<ClassMeans, TedsError> {
    if scores.is_empty() {
        return Err(TedsError::EmptyInput);
    }
    let mean = |class: Option<TableClass>| {
        let picked: Vec<f64> = scores
            .iter()
            .filter(|(c, _)| class.is_none_or(|k| *c == k))
            .map(|(_, s)| *s)
            .collect();
        let n = picked.len();
        let m = (n > 0).then(|| round_percent(100.0 * picked.iter().sum::<f64>() / n as f64));
        (n, m)
    };
    let (n_simple, simple) = mean(Some(TableClass::Simple));
    let (n_complex, complex) = mean(Some(TableClass::Complex));
    let (_, all) = mean(None);
    Ok(ClassMeans {
        n_simple,
        n_complex,
        simple,
        complex,
        all: all.expect("input is non-empty"),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleScore {
    pub id: String,
    #[serde(serialize_with = "serialize_class")]
    pub class: TableClass,
    pub score: f64,
}

fn serialize_class<S: serde::Serializer>(c: &TableClass, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&c.to_string())
}

/// Per-sample scores plus their class means.
#[derive(Debug, Clone, PartialEq)]
pub struct TedsReport {
    pub per_sample: Vec<SampleScore>,
    pub means: ClassMeans,
}

impl TedsReport {
    pub fn from_samples(per_sample: Vec<SampleScore>) -> Result<Self, TedsError> {
        let pairs: Vec<(TableClass, f64)> = per_sample.iter().map(|s| (s.class, s.score)).collect();
        let means = aggregate(&pairs)?;
        Ok(Self { per_sample, means })
    }
}
