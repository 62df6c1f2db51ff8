//! Embedding, checkpoint, link-split and manifest files.
//!
//! * Embedding file: header `N D`, then `N` rows of `D` reals.
//! * Checkpoint: `bsg-checkpoint 1`, then `dims`, `seed`, `epochs` and
//!   `pretext` lines, then one `matrix <name> <rows> <cols>` block per tensor.
//!
//! Reals are written with shortest round-trip formatting, so every file
//! reloads to bit-identical values.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::autodiff::Matrix;
use crate::error::{Error, Result};
use crate::graph::{write_edges, Edge, LinkSplit};
use crate::model::{DecoderParams, EncoderParams, ModelDims, ModelParams};
use crate::trainer::{Pretext, TrainConfig};

const CHECKPOINT_MAGIC: &str = "bsg-checkpoint 1";

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write(path: &Path, text: String) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn format_row(out: &mut String, row: &[f64]) {
    for (c, v) in row.iter().enumerate() {
        if c > 0 {
            out.push(' ');
        }
        write!(out, "{v:?}").unwrap();
    }
    out.push('\n');
}

/// Line cursor that keeps 1-based line numbers for error messages.
struct Lines<'a> {
    path: &'a Path,
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    last: usize,
}

impl<'a> Lines<'a> {
    fn new(path: &'a Path, text: &'a str) -> Self {
        Self {
            path,
            inner: text.lines().enumerate(),
            last: 0,
        }
    }

    fn err(&self, message: impl Into<String>) -> Error {
        Error::parse(self.path, self.last, message)
    }

    /// Next non-blank line, or an error naming what was expected.
    fn next(&mut self, what: &str) -> Result<&'a str> {
        for (i, line) in self.inner.by_ref() {
            self.last = i + 1;
            let line = line.trim();
            if !line.is_empty() {
                return Ok(line);
            }
        }
        Err(self.err(format!("unexpected end of file, expected {what}")))
    }

    fn finished(&mut self) -> Result<()> {
        for (i, line) in self.inner.by_ref() {
            if !line.trim().is_empty() {
                self.last = i + 1;
                return Err(self.err("trailing content"));
            }
        }
        Ok(())
    }

    fn numbers<T: std::str::FromStr>(&self, line: &str, count: usize, what: &str) -> Result<Vec<T>> {
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != count {
            return Err(self.err(format!("{what}: expected {count} values, got {}", fields.len())));
        }
        fields
            .iter()
            .map(|s| s.parse::<T>().map_err(|_| self.err(format!("{what}: invalid number {s:?}"))))
            .collect()
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<Matrix> {
        let mut data = Vec::with_capacity(rows * cols);
        for _ in 0..rows {
            let line = self.next("a matrix row")?;
            let row: Vec<f64> = self.numbers(line, cols, "matrix row")?;
            if let Some(v) = row.iter().find(|v| !v.is_finite()) {
                return Err(self.err(format!("non-finite value {v}")));
            }
            data.extend(row);
        }
        Matrix::from_vec(rows, cols, data)
    }

    /// `key v1 v2 ...` with the given key.
    fn keyed<'l>(&self, line: &'l str, key: &str) -> Result<&'l str> {
        match line.split_once(char::is_whitespace) {
            Some((k, rest)) if k == key => Ok(rest.trim()),
            _ => Err(self.err(format!("expected `{key} ...`, got {line:?}"))),
        }
    }
}

pub fn format_embeddings(z: &Matrix) -> String {
    let mut out = format!("{} {}\n", z.rows(), z.cols());
    for r in 0..z.rows() {
        format_row(&mut out, z.row(r));
    }
    out
}

pub fn write_embeddings(path: &Path, z: &Matrix) -> Result<()> {
    write(path, format_embeddings(z))
}

pub fn parse_embeddings(path: &Path, text: &str) -> Result<Matrix> {
    let mut lines = Lines::new(path, text);
    let header = lines.next("an `N D` header")?;
    let dims: Vec<usize> = lines.numbers(header, 2, "header")?;
    let z = lines.matrix(dims[0], dims[1])?;
    lines.finished()?;
    Ok(z)
}

pub fn load_embeddings(path: &Path) -> Result<Matrix> {
    parse_embeddings(path, &read(path)?)
}

/// Trained parameters plus the metadata needed to resume or audit a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: ModelParams,
    pub seed: u64,
    pub epochs: usize,
    pub pretext: Pretext,
}

pub fn format_checkpoint(ckpt: &Checkpoint) -> String {
    let d = ckpt.params.dims();
    let mut out = String::new();
    writeln!(out, "{CHECKPOINT_MAGIC}").unwrap();
    writeln!(out, "dims {} {} {} {}", d.node_features, d.hidden, d.embedding, d.decoder_hidden).unwrap();
    writeln!(out, "seed {}", ckpt.seed).unwrap();
    writeln!(out, "epochs {}", ckpt.epochs).unwrap();
    writeln!(out, "pretext {}", ckpt.pretext).unwrap();
    let p = &ckpt.params;
    let mut named = vec![
        ("w1", &p.encoder.w1),
        ("w2", &p.encoder.w2),
        ("v1", &p.decoder.v1),
        ("v2", &p.decoder.v2),
    ];
    if let Some(f) = &p.feature_decoder {
        named.push(("feature_decoder", f));
    }
    for (name, m) in named {
        writeln!(out, "matrix {name} {} {}", m.rows(), m.cols()).unwrap();
        for r in 0..m.rows() {
            format_row(&mut out, m.row(r));
        }
    }
    out
}

pub fn write_checkpoint(path: &Path, ckpt: &Checkpoint) -> Result<()> {
    write(path, format_checkpoint(ckpt))
}

pub fn parse_checkpoint(path: &Path, text: &str) -> Result<Checkpoint> {
    let mut lines = Lines::new(path, text);
    if lines.next("the checkpoint header")? != CHECKPOINT_MAGIC {
        return Err(lines.err(format!("not a checkpoint (expected {CHECKPOINT_MAGIC:?})")));
    }
    let line = lines.next("dims")?;
    let d: Vec<usize> = lines.numbers(lines.keyed(line, "dims")?, 4, "dims")?;
    let dims = ModelDims {
        node_features: d[0],
        hidden: d[1],
        embedding: d[2],
        decoder_hidden: d[3],
    };
    let line = lines.next("seed")?;
    let seed = lines.numbers::<u64>(lines.keyed(line, "seed")?, 1, "seed")?[0];
    let line = lines.next("epochs")?;
    let epochs = lines.numbers::<usize>(lines.keyed(line, "epochs")?, 1, "epochs")?[0];
    let line = lines.next("pretext")?;
    let pretext: Pretext = lines
        .keyed(line, "pretext")?
        .parse()
        .map_err(|e: Error| lines.err(e.to_string()))?;

    let mut expected = vec![
        ("w1", dims.node_features, dims.hidden),
        ("w2", dims.hidden, dims.embedding),
        ("v1", dims.embedding, dims.decoder_hidden),
        ("v2", dims.decoder_hidden, 1),
    ];
    if pretext == Pretext::FeatureRecon {
        expected.push(("feature_decoder", dims.embedding, dims.node_features));
    }
    let mut tensors = Vec::new();
    for (name, rows, cols) in expected {
        let line = lines.next(&format!("matrix {name}"))?;
        let shape = format!("{name} {rows} {cols}");
        if lines.keyed(line, "matrix")? != shape {
            return Err(lines.err(format!("expected `matrix {shape}`, got {line:?}")));
        }
        tensors.push(lines.matrix(rows, cols)?);
    }
    lines.finished()?;
    let mut tensors = tensors.into_iter();
    let mut take = || tensors.next().unwrap();
    let params = ModelParams {
        encoder: EncoderParams { w1: take(), w2: take() },
        decoder: DecoderParams { v1: take(), v2: take() },
        feature_decoder: (pretext == Pretext::FeatureRecon).then(take),
    };
    Ok(Checkpoint {
        params,
        seed,
        epochs,
        pretext,
    })
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    parse_checkpoint(path, &read(path)?)
}

/// File names used for a link-prediction holdout inside a directory.
pub const LINK_SPLIT_FILES: [&str; 5] = ["train_edges.txt", "val_pos.txt", "val_neg.txt", "test_pos.txt", "test_neg.txt"];

pub fn write_link_split(dir: &Path, split: &LinkSplit) -> Result<()> {
    let train = split.train.undirected_edges();
    let sets: [&[Edge]; 5] = [&train, &split.val_pos, &split.val_neg, &split.test_pos, &split.test_neg];
    for (name, edges) in LINK_SPLIT_FILES.iter().zip(sets) {
        write_edges(&dir.join(name), edges)?;
    }
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().fold(String::with_capacity(64), |mut s, b| {
        write!(s, "{b:02x}").unwrap();
        s
    })
}

pub fn file_digest(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// Everything needed to rerun a training command bit-exactly on the same build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config: TrainConfig,
    pub seed: u64,
    /// Input role (`edges`, `features`, ...) to path and SHA-256 digest.
    pub inputs: BTreeMap<String, InputFile>,
    /// Holdout fractions when training ran on a link-prediction split.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub link_split: Option<(f64, f64)>,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputFile {
    pub path: PathBuf,
    pub sha256: String,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<Self> {
        serde_json::from_str(&read(path)?).map_err(|e| Error::parse(path, e.line(), e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write(path, serde_json::to_string_pretty(self).expect("manifest serializes") + "\n")
    }

    /// Checks that every recorded input still has its recorded digest.
    pub fn verify_inputs(&self) -> Result<()> {
        for (role, input) in &self.inputs {
            let actual = file_digest(&input.path)?;
            if actual != input.sha256 {
                return Err(Error::InvalidArgument(format!(
                    "{role} input {} changed since the manifest was written",
                    input.path.display()
                )));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::init_params;

    #[test]
    fn embeddings_round_trip() {
        let z = Matrix::from_rows(&[[0.1, -2.5e-17], [1.0 / 3.0, 7.0]]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("z.txt");
        write_embeddings(&p, &z).unwrap();
        assert_eq!(load_embeddings(&p).unwrap(), z);
    }

    #[test]
    fn malformed_embeddings_report_line() {
        let p = Path::new("z.txt");
        let err = parse_embeddings(p, "2 2\n1 2\n3 oops\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = parse_embeddings(p, "2 2\n1 2\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        assert!(parse_embeddings(p, "1 1\n1\n2\n").is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let dims = ModelDims {
            node_features: 3,
            hidden: 4,
            embedding: 2,
            decoder_hidden: 3,
        };
        let (encoder, decoder) = init_params(&dims, 5).unwrap();
        for feature_decoder in [None, Some(Matrix::filled(2, 3, 0.25))] {
            let pretext = if feature_decoder.is_some() {
                Pretext::FeatureRecon
            } else {
                Pretext::EdgeRecon
            };
            let ckpt = Checkpoint {
                params: ModelParams {
                    encoder: encoder.clone(),
                    decoder: decoder.clone(),
                    feature_decoder,
                },
                seed: 9,
                epochs: 12,
                pretext,
            };
            let text = format_checkpoint(&ckpt);
            assert_eq!(parse_checkpoint(Path::new("c"), &text).unwrap(), ckpt);
        }
    }

    #[test]
    fn digest_matches_known_value() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
