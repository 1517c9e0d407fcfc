//! On-disk formats: the DMAT text matrix format, dataset manifests, and
//! model directories.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::dataset::{one_hot_pm, Hyperparams, SeenDataset, UnseenDataset};
use crate::error::{Error, Result};
use crate::jedm::JedmModel;
use crate::matrix::DenseMatrix;
use crate::scalar::Scalar;

pub const MODEL_FORMAT_VERSION: &str = "tstd-model/1";

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Reads the DMAT text format: header `dmat <rows> <cols>`, then one
/// whitespace-separated matrix row per line. `#` lines are comments.
pub fn read_dmat<S: Scalar>(path: &Path) -> Result<DenseMatrix<S>> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim_start().starts_with('#') && !l.trim().is_empty());

    let parse_err = |line: usize, message: String| Error::Parse {
        path: path.display().to_string(),
        line: line + 1,
        message,
    };

    let (header_no, header) = lines
        .next()
        .ok_or_else(|| parse_err(0, "empty file".into()))?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some("dmat") {
        return Err(parse_err(header_no, "expected `dmat <rows> <cols>` header".into()));
    }
    let rows: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| parse_err(header_no, "bad row count".into()))?;
    let cols: usize = parts
        .next()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| parse_err(header_no, "bad column count".into()))?;

    let mut data = Vec::with_capacity(rows * cols);
    let mut seen_rows = 0;
    for (line_no, line) in lines {
        if seen_rows == rows {
            return Err(parse_err(line_no, format!("more than {rows} data rows")));
        }
        let values: Vec<f64> = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .map_err(|e| parse_err(line_no, format!("bad number {tok:?}: {e}")))
            })
            .collect::<Result<_>>()?;
        if values.len() != cols {
            return Err(parse_err(
                line_no,
                format!("expected {cols} entries, found {}", values.len()),
            ));
        }
        data.extend(values.into_iter().map(S::from_f64));
        seen_rows += 1;
    }
    if seen_rows != rows {
        return Err(parse_err(0, format!("expected {rows} data rows, found {seen_rows}")));
    }
    DenseMatrix::new(rows, cols, data)
}

pub fn write_dmat<S: Scalar>(path: &Path, m: &DenseMatrix<S>) -> Result<()> {
    let mut out = String::new();
    out.push_str(&format!("dmat {} {}\n", m.rows(), m.cols()));
    for r in 0..m.rows() {
        let row: Vec<String> = m.row(r).iter().map(|v| format!("{}", v.as_f64())).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| io_err(path, e))
}

/// Dataset manifest. `labels` holds one class name per instance and is
/// required for seen data; for unseen data it supplies evaluation truth.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetManifest {
    pub features: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
    pub embeddings: PathBuf,
    pub classes: Vec<String>,
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Json {
            path: path.display().to_string(),
            source: e,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(path, text).map_err(|e| io_err(path, e))
    }
}

fn resolve(manifest_path: &Path, rel: &Path) -> PathBuf {
    if rel.is_absolute() {
        rel.to_path_buf()
    } else {
        manifest_path.parent().unwrap_or(Path::new(".")).join(rel)
    }
}

fn read_label_indices(path: &Path, classes: &[String]) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(line_no, l)| {
            let name = l.trim();
            classes
                .iter()
                .position(|c| c == name)
                .ok_or_else(|| Error::Parse {
                    path: path.display().to_string(),
                    line: line_no + 1,
                    message: format!("unknown class name {name:?}"),
                })
        })
        .collect()
}

pub fn load_seen<S: Scalar>(manifest_path: &Path) -> Result<SeenDataset<S>> {
    let manifest = DatasetManifest::load(manifest_path)?;
    let labels_path = manifest.labels.as_ref().ok_or_else(|| {
        Error::Config(format!(
            "manifest {} has no `labels` key (required for seen data)",
            manifest_path.display()
        ))
    })?;
    let x = read_dmat(&resolve(manifest_path, &manifest.features))?;
    let a = read_dmat(&resolve(manifest_path, &manifest.embeddings))?;
    let labels = read_label_indices(&resolve(manifest_path, labels_path), &manifest.classes)?;
    let y = one_hot_pm(&labels, manifest.classes.len())?;
    Ok(SeenDataset {
        x,
        y,
        a,
        class_names: manifest.classes,
    })
}

pub fn load_unseen<S: Scalar>(manifest_path: &Path) -> Result<UnseenDataset<S>> {
    let manifest = DatasetManifest::load(manifest_path)?;
    let x = read_dmat(&resolve(manifest_path, &manifest.features))?;
    let a = read_dmat(&resolve(manifest_path, &manifest.embeddings))?;
    let truth_labels = match &manifest.labels {
        Some(p) => Some(read_label_indices(&resolve(manifest_path, p), &manifest.classes)?),
        None => None,
    };
    Ok(UnseenDataset {
        x,
        a,
        class_names: manifest.classes,
        truth_labels,
    })
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelMeta {
    format_version: String,
    hyper: Hyperparams,
    latent_dim: usize,
    seed: u64,
    objective_trace: Vec<f64>,
}

/// Writes `D_s.dmat`, `V.dmat` and `model.json` into `dir`.
pub fn save_model<S: Scalar>(dir: &Path, model: &JedmModel<S>) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    write_dmat(&dir.join("D_s.dmat"), &model.dictionary)?;
    write_dmat(&dir.join("V.dmat"), &model.compat)?;
    let meta = ModelMeta {
        format_version: MODEL_FORMAT_VERSION.to_string(),
        hyper: model.hyper.clone(),
        latent_dim: model.latent_dim,
        seed: model.seed,
        objective_trace: model.objective_trace.iter().map(|v| v.as_f64()).collect(),
    };
    let path = dir.join("model.json");
    let mut f = fs::File::create(&path).map_err(|e| io_err(&path, e))?;
    let text = serde_json::to_string_pretty(&meta).expect("model meta serializes");
    f.write_all(text.as_bytes()).map_err(|e| io_err(&path, e))
}

pub fn load_model<S: Scalar>(dir: &Path) -> Result<JedmModel<S>> {
    let meta_path = dir.join("model.json");
    let text = fs::read_to_string(&meta_path).map_err(|e| io_err(&meta_path, e))?;
    let meta: ModelMeta = serde_json::from_str(&text).map_err(|e| Error::Json {
        path: meta_path.display().to_string(),
        source: e,
    })?;
    if meta.format_version != MODEL_FORMAT_VERSION {
        return Err(Error::Config(format!(
            "unsupported model format {:?}, expected {MODEL_FORMAT_VERSION:?}",
            meta.format_version
        )));
    }
    Ok(JedmModel {
        dictionary: read_dmat(&dir.join("D_s.dmat"))?,
        compat: read_dmat(&dir.join("V.dmat"))?,
        hyper: meta.hyper,
        latent_dim: meta.latent_dim,
        seed: meta.seed,
        objective_trace: meta.objective_trace.into_iter().map(S::from_f64).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    type M = DenseMatrix<f64>;

    #[test]
    fn dmat_parses_comments_and_shapes() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.dmat");
        fs::write(&path, "# a comment\ndmat 2 3\n1 2 3\n# mid comment\n4.5 -6 7e-2\n").unwrap();
        let m: M = read_dmat(&path).unwrap();
        assert_eq!(m.rows(), 2);
        assert_eq!(m.get(1, 2), 7e-2);
    }

    #[test]
    fn dmat_rejects_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let bad_header = dir.path().join("a.dmat");
        fs::write(&bad_header, "matrix 2 2\n1 2\n3 4\n").unwrap();
        assert!(read_dmat::<f64>(&bad_header).is_err());

        let short_row = dir.path().join("b.dmat");
        fs::write(&short_row, "dmat 2 2\n1 2\n3\n").unwrap();
        assert!(read_dmat::<f64>(&short_row).is_err());

        let missing_row = dir.path().join("c.dmat");
        fs::write(&missing_row, "dmat 2 2\n1 2\n").unwrap();
        assert!(read_dmat::<f64>(&missing_row).is_err());
    }

    #[test]
    fn model_directory_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let model = JedmModel {
            dictionary: M::from_fn(3, 2, |r, c| (r as f64 - c as f64) * 0.37),
            compat: M::from_fn(2, 4, |r, c| (r * 4 + c) as f64 * 0.11 - 0.2),
            hyper: Hyperparams::default(),
            latent_dim: 2,
            seed: 99,
            objective_trace: vec![10.0, 3.5, 3.1],
        };
        save_model(dir.path(), &model).unwrap();
        let loaded: JedmModel<f64> = load_model(dir.path()).unwrap();
        assert_eq!(loaded.dictionary, model.dictionary);
        assert_eq!(loaded.compat, model.compat);
        assert_eq!(loaded.objective_trace, model.objective_trace);
        assert_eq!(loaded.seed, 99);
    }

    #[test]
    fn manifest_rejects_unknown_keys() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        fs::write(
            &path,
            r#"{"features": "x.dmat", "embeddings": "a.dmat", "classes": ["a"], "bogus": 1}"#,
        )
        .unwrap();
        assert!(DatasetManifest::load(&path).is_err());
    }

    proptest! {
        #[test]
        fn dmat_roundtrip_is_exact(
            rows in 1usize..6,
            cols in 1usize..6,
            seed in any::<u32>(),
        ) {
            // Shortest round-trip float formatting: read(write(m)) == m bitwise.
            let mut state = seed as u64 ^ 0x9e3779b9;
            let m = M::from_fn(rows, cols, |_, _| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((state >> 11) as f64 / (1u64 << 53) as f64) * 2000.0 - 1000.0
            });
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("m.dmat");
            write_dmat(&path, &m).unwrap();
            let back: M = read_dmat(&path).unwrap();
            prop_assert_eq!(back, m);
        }
    }
}
