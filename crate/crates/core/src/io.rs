//! Dataset manifest reading and writing.
//!
//! A dataset is a JSON manifest naming three sibling files:
//!
//! ```text
//! {"num_nodes": 4, "num_classes": 2, "feature_dim": 3,
//!  "edges": "edges.txt", "labels": "labels.txt", "features": "features.csv"}
//! ```
//!
//! * edges: one `u v` pair per line (direction is discarded, duplicates merged)
//! * labels: one class id per line, exactly `num_nodes` lines
//! * features: CSV without header (`num_nodes` rows x `feature_dim` columns), or
//!   raw little-endian `f64` in row-major order when the file ends in `.f64`
//!
//! The optional `row_normalize` field (default `true`) scales each feature row
//! to unit L1 norm after loading.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub num_nodes: usize,
    pub num_classes: usize,
    pub feature_dim: usize,
    pub edges: PathBuf,
    pub labels: PathBuf,
    pub features: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub row_normalize: Option<bool>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Overrides the manifest's `row_normalize` field when set.
    pub row_normalize: Option<bool>,
}

/// Resolves a dataset path: a directory means `<dir>/manifest.json`.
pub fn manifest_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(MANIFEST_FILE)
    } else {
        path.to_path_buf()
    }
}

pub fn load_graph(path: impl AsRef<Path>) -> Result<Graph> {
    load_graph_with(path, LoadOptions::default())
}

pub fn load_graph_with(path: impl AsRef<Path>, options: LoadOptions) -> Result<Graph> {
    let manifest_file = manifest_path(path.as_ref());
    let text = fs::read_to_string(&manifest_file).map_err(|e| Error::io(&manifest_file, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| {
        Error::parse(&manifest_file, e.line(), format!("invalid manifest: {e}"))
    })?;
    let base = manifest_file.parent().unwrap_or(Path::new("."));
    let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };

    let n = manifest.num_nodes;
    let edges = read_edges(&resolve(&manifest.edges), n)?;
    let labels = read_labels(&resolve(&manifest.labels), n, manifest.num_classes)?;
    let features = read_features(&resolve(&manifest.features), n, manifest.feature_dim)?;

    let graph = Graph::new(features, labels, manifest.num_classes, edges)?;
    let normalize = options
        .row_normalize
        .or(manifest.row_normalize)
        .unwrap_or(true);
    Ok(if normalize { graph.row_normalized() } else { graph })
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn read_edges(path: &Path, n: usize) -> Result<Vec<(usize, usize)>> {
    let text = read_text(path)?;
    let mut edges = Vec::new();
    for (line, content) in data_lines(&text) {
        let mut it = content.split_whitespace();
        let mut next = || -> Result<usize> {
            let tok = it
                .next()
                .ok_or_else(|| Error::parse(path, line, "expected two node indices"))?;
            tok.parse()
                .map_err(|_| Error::parse(path, line, format!("invalid node index {tok:?}")))
        };
        let (u, v) = (next()?, next()?);
        if it.next().is_some() {
            return Err(Error::parse(path, line, "expected exactly two node indices"));
        }
        for index in [u, v] {
            if index >= n {
                return Err(Error::NodeOutOfRange {
                    context: format!("{}:{line}", path.display()),
                    index,
                    num_nodes: n,
                });
            }
        }
        edges.push((u, v));
    }
    Ok(edges)
}

fn read_labels(path: &Path, n: usize, num_classes: usize) -> Result<Vec<usize>> {
    let text = read_text(path)?;
    let mut labels = Vec::with_capacity(n);
    for (line, content) in data_lines(&text) {
        let label: usize = content
            .parse()
            .map_err(|_| Error::parse(path, line, format!("invalid label {content:?}")))?;
        if label >= num_classes {
            return Err(Error::LabelOutOfRange {
                context: format!("{}:{line}", path.display()),
                label,
                num_classes,
            });
        }
        labels.push(label);
    }
    if labels.len() != n {
        return Err(Error::parse(
            path,
            labels.len(),
            format!("expected {n} labels, found {}", labels.len()),
        ));
    }
    Ok(labels)
}

fn read_features(path: &Path, n: usize, d: usize) -> Result<Array2<f64>> {
    if path.extension().is_some_and(|e| e == "f64") {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        if bytes.len() != n * d * 8 {
            return Err(Error::parse(
                path,
                0,
                format!(
                    "expected {} bytes for {n} x {d} f64 values, found {}",
                    n * d * 8,
                    bytes.len()
                ),
            ));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        return Array2::from_shape_vec((n, d), values)
            .map_err(|e| Error::Internal(e.to_string()));
    }

    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut values = Vec::with_capacity(n * d);
    let mut rows = 0;
    for record in reader.records() {
        let record = record.map_err(|e| csv_error(path, e))?;
        rows += 1;
        if record.len() != d {
            return Err(Error::parse(
                path,
                rows,
                format!("expected {d} columns, found {}", record.len()),
            ));
        }
        for field in record.iter() {
            values.push(
                field
                    .parse::<f64>()
                    .map_err(|_| Error::parse(path, rows, format!("invalid number {field:?}")))?,
            );
        }
    }
    if rows != n {
        return Err(Error::parse(
            path,
            rows,
            format!("expected {n} feature rows, found {rows}"),
        ));
    }
    Array2::from_shape_vec((n, d), values).map_err(|e| Error::Internal(e.to_string()))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map(|p| p.line() as usize).unwrap_or(0);
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        kind => Error::parse(path, line, format!("{kind:?}")),
    }
}

/// Writes `graph` into `dir` (created if missing) with binary features, so a
/// subsequent [`load_graph`] reproduces labels, edges and features bit-exactly.
pub fn save_graph(graph: &Graph, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut edges = String::with_capacity(graph.num_edges() * 12);
    for &(u, v) in graph.edges() {
        edges.push_str(&format!("{u} {v}\n"));
    }
    write_file(&dir.join("edges.txt"), edges.as_bytes())?;

    let labels: String = graph.labels().iter().map(|l| format!("{l}\n")).collect();
    write_file(&dir.join("labels.txt"), labels.as_bytes())?;

    let mut bytes = Vec::with_capacity(graph.num_nodes() * graph.feature_dim() * 8);
    for x in graph.features().iter() {
        bytes.extend_from_slice(&x.to_le_bytes());
    }
    write_file(&dir.join("features.f64"), &bytes)?;

    let manifest = Manifest {
        num_nodes: graph.num_nodes(),
        num_classes: graph.num_classes(),
        feature_dim: graph.feature_dim(),
        edges: "edges.txt".into(),
        labels: "labels.txt".into(),
        features: "features.f64".into(),
        row_normalize: Some(false),
    };
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Internal(e.to_string()))?;
    write_file(&dir.join(MANIFEST_FILE), json.as_bytes())
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(bytes).map_err(|e| Error::io(path, e))
}
