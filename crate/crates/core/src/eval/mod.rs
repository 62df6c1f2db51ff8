//! Downstream evaluation of frozen embeddings.

mod probe;
mod ranking;

pub use probe::{linear_probe, LabeledSplit, ProbeConfig, ProbeOutcome};
pub use ranking::{rank_metrics, RankMetrics};

use serde::{Deserialize, Serialize};

use crate::autodiff::Matrix;
use crate::error::{Error, Result};
use crate::graph::{smoothness_delta, Edge, Graph};
use crate::model::{decode_dot, decode_edge, DecoderParams};

/// How a candidate edge is scored.
#[derive(Debug, Clone, Copy)]
pub enum LinkScorer<'a> {
    Decoder(&'a DecoderParams),
    Dot,
}

pub fn score_edges(z: &Matrix, pairs: &[Edge], scorer: LinkScorer<'_>) -> Result<Vec<f64>> {
    pairs
        .iter()
        .map(|&(u, v)| match scorer {
            LinkScorer::Decoder(dec) => decode_edge(z, u, v, dec),
            LinkScorer::Dot => decode_dot(z, u, v),
        })
        .collect()
}

pub fn link_pred_eval(z: &Matrix, pos: &[Edge], neg: &[Edge], scorer: LinkScorer<'_>) -> Result<RankMetrics> {
    if pos.is_empty() {
        return Err(Error::EmptySet("positive edges"));
    }
    if neg.is_empty() {
        return Err(Error::EmptySet("negative edges"));
    }
    let mut scores = score_edges(z, pos, scorer)?;
    scores.extend(score_edges(z, neg, scorer)?);
    let labels: Vec<bool> = (0..scores.len()).map(|i| i < pos.len()).collect();
    rank_metrics(&scores, &labels)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothnessReport {
    pub delta: f64,
    /// `-inf` when `delta` is exactly zero.
    pub log10_delta: f64,
}

pub fn smoothness_report(graph: &Graph, z: &Matrix) -> Result<SmoothnessReport> {
    let delta = smoothness_delta(graph, z)?;
    Ok(SmoothnessReport {
        delta,
        log10_delta: delta.log10(),
    })
}

/// Rounds a percentage to two decimals for reporting.
pub fn round2(x: f64) -> f64 {
    (x * 100.0).round() / 100.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dot_auc: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dot_ap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "extended_float")]
    pub log10_delta: Option<f64>,
    #[serde(default)]
    pub config: serde_json::Value,
    pub seed: u64,
}

impl MetricsReport {
    pub fn new(config: serde_json::Value, seed: u64) -> Self {
        Self {
            accuracy: None,
            auc: None,
            ap: None,
            dot_auc: None,
            dot_ap: None,
            delta: None,
            log10_delta: None,
            config,
            seed,
        }
    }

    pub fn with_accuracy(mut self, accuracy: f64) -> Self {
        self.accuracy = Some(round2(accuracy));
        self
    }

    pub fn with_link(mut self, decoder: Option<RankMetrics>, dot: RankMetrics) -> Self {
        if let Some(m) = decoder {
            self.auc = Some(round2(m.auc));
            self.ap = Some(round2(m.ap));
        }
        self.dot_auc = Some(round2(dot.auc));
        self.dot_ap = Some(round2(dot.ap));
        self
    }

    pub fn with_smoothness(mut self, s: SmoothnessReport) -> Self {
        self.delta = Some(s.delta);
        self.log10_delta = Some(s.log10_delta);
        self
    }
}

/// JSON has no infinities; `-inf` and `inf` are written as strings.
mod extended_float {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match v {
            Some(x) if x.is_finite() => s.serialize_f64(*x),
            Some(x) if *x > 0.0 => s.serialize_str("inf"),
            Some(x) if *x < 0.0 => s.serialize_str("-inf"),
            _ => s.serialize_none(),
        }
    }

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        match Option::<Repr>::deserialize(d)? {
            None => Ok(None),
            Some(Repr::Num(x)) => Ok(Some(x)),
            Some(Repr::Text(t)) => match t.as_str() {
                "inf" => Ok(Some(f64::INFINITY)),
                "-inf" => Ok(Some(f64::NEG_INFINITY)),
                other => Err(serde::de::Error::custom(format!("unexpected value {other:?}"))),
            },
        }
    }
}
