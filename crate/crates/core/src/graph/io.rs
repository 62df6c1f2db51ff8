//! Plain-text graph files.
//!
//! * Edge file: one `u v` pair per line (tab or space separated, 0-indexed);
//!   blank lines and lines starting with `#` are skipped.
//! * Feature file: one whitespace-separated row of reals per node; row `i`
//!   belongs to node `i` and the row count fixes the node count.
//! * Label file: `node_id label_id` per line, every node exactly once.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::autodiff::Matrix;
use crate::error::{Error, Result};
use crate::graph::Graph;

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Numbered content lines, skipping blanks and `#` comments.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_pair(path: &Path, line_no: usize, line: &str) -> Result<(usize, usize)> {
    let mut fields = line.split_whitespace();
    let (Some(a), Some(b), None) = (fields.next(), fields.next(), fields.next()) else {
        return Err(Error::parse(path, line_no, format!("expected two integers, got {line:?}")));
    };
    let parse = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::parse(path, line_no, format!("invalid non-negative integer {s:?}")))
    };
    Ok((parse(a)?, parse(b)?))
}

pub fn parse_edges(path: &Path) -> Result<Vec<(usize, usize)>> {
    let text = read(path)?;
    content_lines(&text).map(|(n, l)| parse_pair(path, n, l)).collect()
}

pub fn parse_features(path: &Path) -> Result<Matrix> {
    let text = read(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (line_no, line) in content_lines(&text) {
        let row = line
            .split_whitespace()
            .map(|s| {
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| Error::parse(path, line_no, format!("invalid real {s:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::parse(
                    path,
                    line_no,
                    format!("{} values, expected {}", row.len(), first.len()),
                ));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::parse(path, 0, "feature file has no rows"));
    }
    Matrix::from_rows(&rows)
}

/// Reads a label file for `num_nodes` nodes.
pub fn load_labels(path: &Path, num_nodes: usize) -> Result<Vec<usize>> {
    let text = read(path)?;
    let mut labels = vec![None; num_nodes];
    for (line_no, line) in content_lines(&text) {
        let (node, label) = parse_pair(path, line_no, line)?;
        if node >= num_nodes {
            return Err(Error::IndexOutOfRange { index: node, num_nodes });
        }
        if labels[node].replace(label).is_some() {
            return Err(Error::parse(path, line_no, format!("node {node} labeled twice")));
        }
    }
    labels
        .into_iter()
        .enumerate()
        .map(|(i, l)| l.ok_or_else(|| Error::DimensionMismatch(format!("node {i} has no label in {}", path.display()))))
        .collect()
}

pub fn load_graph(edge_path: &Path, feature_path: &Path, label_path: Option<&Path>) -> Result<Graph> {
    let edges = parse_edges(edge_path)?;
    let features = parse_features(feature_path)?;
    let labels = label_path.map(|p| load_labels(p, features.rows())).transpose()?;
    Graph::new(&edges, features, labels)
}

fn write(path: &Path, text: String) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn write_edges(path: &Path, edges: &[(usize, usize)]) -> Result<()> {
    let mut out = String::new();
    for (u, v) in edges {
        writeln!(out, "{u}\t{v}").unwrap();
    }
    write(path, out)
}

pub fn write_features(path: &Path, features: &Matrix) -> Result<()> {
    write(path, format_rows(features))
}

pub fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let mut out = String::new();
    for (i, l) in labels.iter().enumerate() {
        writeln!(out, "{i}\t{l}").unwrap();
    }
    write(path, out)
}

/// Space-separated rows using shortest round-trip float formatting.
pub(crate) fn format_rows(m: &Matrix) -> String {
    let mut out = String::new();
    for r in 0..m.rows() {
        for (c, v) in m.row(r).iter().enumerate() {
            if c > 0 {
                out.push(' ');
            }
            write!(out, "{v:?}").unwrap();
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn files(edges: &str, feats: &str) -> (tempfile::TempDir, std::path::PathBuf, std::path::PathBuf) {
        let dir = tempfile::tempdir().unwrap();
        let e = dir.path().join("edges.txt");
        let f = dir.path().join("features.txt");
        fs::write(&e, edges).unwrap();
        fs::write(&f, feats).unwrap();
        (dir, e, f)
    }

    #[test]
    fn loads_and_symmetrizes() {
        let (_d, e, f) = files("# comment\n0 1\n1\t2\n", "1 0\n0 1\n1 1\n");
        let g = load_graph(&e, &f, None).unwrap();
        assert_eq!(g.num_nodes(), 3);
        assert_eq!(g.num_edges(), 4);
        assert_eq!(g.feature_dim(), 2);
    }

    #[test]
    fn duplicate_direction_collapses() {
        let (_d, e, f) = files("0 1\n1 0\n1 2\n", "0\n0\n0\n");
        assert_eq!(load_graph(&e, &f, None).unwrap().num_edges(), 4);
    }

    #[test]
    fn out_of_range_edge() {
        let (_d, e, f) = files("0 3\n", "0\n0\n0\n");
        assert!(matches!(
            load_graph(&e, &f, None),
            Err(Error::IndexOutOfRange { index: 3, num_nodes: 3 })
        ));
    }

    #[test]
    fn malformed_lines_report_line_numbers() {
        let (_d, e, f) = files("0 1\n1 x\n", "0\n0\n");
        match load_graph(&e, &f, None) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let (_d, e, f) = files("0 1\n", "0 1\n0\n");
        assert!(matches!(load_graph(&e, &f, None), Err(Error::Parse { line: 2, .. })));
    }

    #[test]
    fn labels_must_cover_nodes() {
        let (d, e, f) = files("0 1\n", "0\n0\n");
        let l = d.path().join("labels.txt");
        fs::write(&l, "0 1\n").unwrap();
        assert!(matches!(load_graph(&e, &f, Some(&l)), Err(Error::DimensionMismatch(_))));
        fs::write(&l, "0 1\n1 0\n").unwrap();
        assert_eq!(load_graph(&e, &f, Some(&l)).unwrap().labels(), Some(&[1, 0][..]));
    }

    #[test]
    fn features_round_trip_exactly() {
        let m = Matrix::from_rows(&[[0.1, -1.0 / 3.0], [1e-300, 12345.678901234567]]).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("f.txt");
        write_features(&p, &m).unwrap();
        assert_eq!(parse_features(&p).unwrap(), m);
    }
}
