use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses::LossWeights;
use crate::model::ModelDims;

/// Self-supervision signal the encoder is trained to reconstruct.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Pretext {
    EdgeRecon,
    FeatureRecon,
}

impl fmt::Display for Pretext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pretext::EdgeRecon => "edge_recon",
            Pretext::FeatureRecon => "feature_recon",
        })
    }
}

impl FromStr for Pretext {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "edge_recon" => Ok(Pretext::EdgeRecon),
            "feature_recon" => Ok(Pretext::FeatureRecon),
            other => Err(Error::Config(format!(
                "unknown pretext {other:?} (expected edge_recon or feature_recon)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub mask_ratio: f64,
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
    pub margin: f64,
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub epochs: usize,
    pub hidden: usize,
    pub emb_dim: usize,
    pub decoder_hidden: usize,
    pub seed: u64,
    pub pretext: Pretext,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let w = LossWeights::cora_defaults();
        Self {
            mask_ratio: w.mask_ratio,
            lambda1: w.lambda1,
            lambda2: w.lambda2,
            lambda3: w.lambda3,
            margin: w.margin,
            learning_rate: 0.01,
            weight_decay: 5e-4,
            epochs: 500,
            hidden: 256,
            emb_dim: 128,
            decoder_hidden: 64,
            seed: 0,
            pretext: Pretext::EdgeRecon,
        }
    }
}

/// Keys accepted in a config file, in canonical order.
pub const CONFIG_KEYS: [&str; 13] = [
    "mask_ratio",
    "lambda1",
    "lambda2",
    "lambda3",
    "margin",
    "learning_rate",
    "weight_decay",
    "epochs",
    "hidden",
    "emb_dim",
    "decoder_hidden",
    "seed",
    "pretext",
];

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| Error::Config(format!("invalid value {value:?} for {key}")))
}

impl TrainConfig {
    pub fn weights(&self) -> LossWeights {
        LossWeights {
            lambda1: self.lambda1,
            lambda2: self.lambda2,
            lambda3: self.lambda3,
            margin: self.margin,
            mask_ratio: self.mask_ratio,
        }
    }

    /// Overwrites the loss weights, margin and mask ratio.
    pub fn with_weights(mut self, w: LossWeights) -> Self {
        self.lambda1 = w.lambda1;
        self.lambda2 = w.lambda2;
        self.lambda3 = w.lambda3;
        self.margin = w.margin;
        self.mask_ratio = w.mask_ratio;
        self
    }

    pub fn model_dims(&self, node_features: usize) -> ModelDims {
        ModelDims {
            node_features,
            hidden: self.hidden,
            embedding: self.emb_dim,
            decoder_hidden: self.decoder_hidden,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.weights().validate()?;
        if self.epochs == 0 {
            return Err(Error::InvalidArgument("epochs must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "learning_rate {} must be positive",
                self.learning_rate
            )));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "weight_decay {} must be >= 0",
                self.weight_decay
            )));
        }
        if self.hidden == 0 || self.emb_dim == 0 || self.decoder_hidden == 0 {
            return Err(Error::InvalidArgument("layer widths must be >= 1".into()));
        }
        Ok(())
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "mask_ratio" => self.mask_ratio = parse_value(key, value)?,
            "lambda1" => self.lambda1 = parse_value(key, value)?,
            "lambda2" => self.lambda2 = parse_value(key, value)?,
            "lambda3" => self.lambda3 = parse_value(key, value)?,
            "margin" => self.margin = parse_value(key, value)?,
            "learning_rate" => self.learning_rate = parse_value(key, value)?,
            "weight_decay" => self.weight_decay = parse_value(key, value)?,
            "epochs" => self.epochs = parse_value(key, value)?,
            "hidden" => self.hidden = parse_value(key, value)?,
            "emb_dim" => self.emb_dim = parse_value(key, value)?,
            "decoder_hidden" => self.decoder_hidden = parse_value(key, value)?,
            "seed" => self.seed = parse_value(key, value)?,
            "pretext" => self.pretext = value.parse()?,
            other => return Err(Error::Config(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Parses flat `key = value` text on top of `self`. Blank lines and `#`
    /// comments are skipped; unknown or repeated keys are rejected.
    pub fn apply_text(mut self, text: &str) -> Result<Self> {
        let mut seen = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(Error::Config(format!("line {}: expected key=value, got {line:?}", i + 1)));
            };
            let key = key.trim();
            if seen.contains(&key) {
                return Err(Error::Config(format!("line {}: duplicate key {key:?}", i + 1)));
            }
            self.set(key, value.trim())
                .map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
            seen.push(key);
        }
        Ok(self)
    }

    /// Renders every field as `key=value`, parseable by [`apply_text`](Self::apply_text).
    pub fn to_text(&self) -> String {
        let values = [
            format!("{:?}", self.mask_ratio),
            format!("{:?}", self.lambda1),
            format!("{:?}", self.lambda2),
            format!("{:?}", self.lambda3),
            format!("{:?}", self.margin),
            format!("{:?}", self.learning_rate),
            format!("{:?}", self.weight_decay),
            self.epochs.to_string(),
            self.hidden.to_string(),
            self.emb_dim.to_string(),
            self.decoder_hidden.to_string(),
            self.seed.to_string(),
            self.pretext.to_string(),
        ];
        CONFIG_KEYS
            .iter()
            .zip(values)
            .map(|(k, v)| format!("{k}={v}\n"))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let cfg = TrainConfig {
            lambda1: 0.001,
            seed: 42,
            pretext: Pretext::FeatureRecon,
            ..TrainConfig::default()
        };
        assert_eq!(TrainConfig::default().apply_text(&cfg.to_text()).unwrap(), cfg);
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        let base = TrainConfig::default();
        assert!(matches!(base.clone().apply_text("lambda4=1"), Err(Error::Config(_))));
        assert!(base.clone().apply_text("epochs").is_err());
        assert!(base.clone().apply_text("epochs=ten").is_err());
        assert!(base.clone().apply_text("seed=1\nseed=2").is_err());
        let ok = base.apply_text("# c\n\nepochs = 3\npretext=feature_recon\n").unwrap();
        assert_eq!((ok.epochs, ok.pretext), (3, Pretext::FeatureRecon));
    }

    #[test]
    fn validation() {
        assert!(TrainConfig::default().validate().is_ok());
        for bad in [
            TrainConfig { mask_ratio: 1.2, ..Default::default() },
            TrainConfig { epochs: 0, ..Default::default() },
            TrainConfig { learning_rate: 0.0, ..Default::default() },
            TrainConfig { margin: -1.5, ..Default::default() },
        ] {
            assert!(bad.validate().is_err());
        }
    }
}
