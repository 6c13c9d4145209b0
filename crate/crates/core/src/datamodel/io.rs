//! Dataset directory format.
//!
//! ```text
//! dataset/
//!   manifest.toml     num_views, [[views]] {path, rows, cols, features?}, labels?, mask?
//!   view0.txt         one matrix row (feature) per line, values space/comma/tab separated
//!   labels.txt        one nonnegative integer per line
//!   mask.txt          N lines of l space-separated 0/1 flags
//! ```
//!
//! Only the views listed in the manifest are read.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};

use super::MultiViewDataset;
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    num_views: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mask: Option<PathBuf>,
    views: Vec<ViewEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ViewEntry {
    path: PathBuf,
    rows: usize,
    cols: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    features: Option<PathBuf>,
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn split_fields(line: &str) -> impl Iterator<Item = &str> {
    line.split(|c: char| c == ',' || c == ';' || c.is_whitespace())
        .filter(|s| !s.is_empty())
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

/// Reads a dense delimiter-separated matrix, one row per line.
pub fn read_matrix(path: &Path) -> Result<Array2<f64>> {
    let text = read_text(path)?;
    let mut values = Vec::new();
    let mut rows = 0;
    let mut cols = None;
    for (line_no, line) in data_lines(&text) {
        let start = values.len();
        for field in split_fields(line) {
            let v: f64 = field.parse().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                reason: format!("not a number: {field:?}"),
            })?;
            values.push(v);
        }
        let width = values.len() - start;
        match cols {
            None => cols = Some(width),
            Some(c) if c != width => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: line_no,
                    reason: format!("expected {c} columns, found {width}"),
                })
            }
            _ => {}
        }
        rows += 1;
    }
    let cols = cols.unwrap_or(0);
    Array2::from_shape_vec((rows, cols), values).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        reason: e.to_string(),
    })
}

pub fn write_matrix(path: &Path, m: ArrayView2<f64>) -> Result<()> {
    let mut out = String::new();
    for row in m.rows() {
        let mut first = true;
        for v in row {
            if !first {
                out.push(' ');
            }
            first = false;
            write!(out, "{v}").expect("write to String");
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn read_labels(path: &Path) -> Result<Vec<usize>> {
    let text = read_text(path)?;
    data_lines(&text)
        .map(|(line_no, line)| {
            line.parse::<usize>().map_err(|_| Error::Parse {
                path: path.to_path_buf(),
                line: line_no,
                reason: format!("not a nonnegative integer label: {line:?}"),
            })
        })
        .collect()
}

fn read_mask(path: &Path, n: usize, l: usize) -> Result<Array2<bool>> {
    let text = read_text(path)?;
    let mut mask = Array2::from_elem((n, l), false);
    let mut rows = 0;
    for (line_no, line) in data_lines(&text) {
        let parse_err = |reason: String| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            reason,
        };
        if rows >= n {
            return Err(parse_err(format!("more than {n} mask rows")));
        }
        let flags: Vec<&str> = split_fields(line).collect();
        if flags.len() != l {
            return Err(parse_err(format!("expected {l} flags, found {}", flags.len())));
        }
        for (v, flag) in flags.into_iter().enumerate() {
            mask[[rows, v]] = match flag {
                "1" => true,
                "0" => false,
                other => return Err(parse_err(format!("mask flag must be 0 or 1, got {other:?}"))),
            };
        }
        rows += 1;
    }
    if rows != n {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: rows,
            reason: format!("expected {n} mask rows, found {rows}"),
        });
    }
    Ok(mask)
}

fn read_names(path: &Path) -> Result<Vec<String>> {
    Ok(read_text(path)?
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty())
        .map(String::from)
        .collect())
}

/// Loads a dataset directory described by `manifest.toml`.
pub fn load_dataset(dir: &Path) -> Result<MultiViewDataset> {
    let manifest_path = dir.join(MANIFEST_FILE);
    let manifest_err = |reason: String| Error::Manifest {
        path: manifest_path.clone(),
        reason,
    };
    let manifest: Manifest =
        toml::from_str(&read_text(&manifest_path)?).map_err(|e| manifest_err(e.to_string()))?;
    if manifest.num_views != manifest.views.len() {
        return Err(manifest_err(format!(
            "num_views = {} but {} [[views]] entries",
            manifest.num_views,
            manifest.views.len()
        )));
    }
    if manifest.views.is_empty() {
        return Err(manifest_err("no views declared".into()));
    }

    let mut views = Vec::with_capacity(manifest.views.len());
    let mut names = Vec::new();
    for (v, entry) in manifest.views.iter().enumerate() {
        let x = read_matrix(&dir.join(&entry.path))?;
        if x.dim() != (entry.rows, entry.cols) {
            return Err(manifest_err(format!(
                "view {v} declared {}x{}, file {} is {}x{}",
                entry.rows,
                entry.cols,
                entry.path.display(),
                x.nrows(),
                x.ncols()
            )));
        }
        views.push(x);
        if let Some(f) = &entry.features {
            names.push((v, read_names(&dir.join(f))?));
        }
    }

    let n = views[0].ncols();
    let l = views.len();
    let labels = manifest
        .labels
        .as_ref()
        .map(|p| read_labels(&dir.join(p)))
        .transpose()?;
    let presence = match &manifest.mask {
        Some(p) => read_mask(&dir.join(p), n, l)?,
        None => Array2::from_elem((n, l), true),
    };

    let ds = MultiViewDataset::new(views, presence, labels)?;
    if names.is_empty() {
        return Ok(ds);
    }
    if names.len() != l {
        return Err(manifest_err(
            "feature name files must be given for all views or none".into(),
        ));
    }
    ds.with_feature_names(names.into_iter().map(|(_, n)| n).collect())
}

/// Writes `dataset` in the directory format read by [`load_dataset`].
/// The mask file is only written for incomplete datasets.
pub fn write_dataset(dir: &Path, dataset: &MultiViewDataset) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::new();
    for (v, x) in dataset.views().iter().enumerate() {
        let file = PathBuf::from(format!("view{v}.txt"));
        write_matrix(&dir.join(&file), x.view())?;
        let features = match dataset.feature_names() {
            Some(all) => {
                let f = PathBuf::from(format!("view{v}_features.txt"));
                let body: String = all[v].iter().map(|s| format!("{s}\n")).collect();
                fs::write(dir.join(&f), body).map_err(|e| Error::io(dir.join(&f), e))?;
                Some(f)
            }
            None => None,
        };
        entries.push(ViewEntry {
            path: file,
            rows: x.nrows(),
            cols: x.ncols(),
            features,
        });
    }
    let labels = match dataset.labels() {
        Some(labels) => {
            let f = PathBuf::from("labels.txt");
            let body: String = labels.iter().map(|y| format!("{y}\n")).collect();
            fs::write(dir.join(&f), body).map_err(|e| Error::io(dir.join(&f), e))?;
            Some(f)
        }
        None => None,
    };
    let mask = if dataset.is_complete() {
        None
    } else {
        let f = PathBuf::from("mask.txt");
        let mut body = String::new();
        for row in dataset.presence().rows() {
            let flags: Vec<&str> = row.iter().map(|&p| if p { "1" } else { "0" }).collect();
            body.push_str(&flags.join(" "));
            body.push('\n');
        }
        fs::write(dir.join(&f), body).map_err(|e| Error::io(dir.join(&f), e))?;
        Some(f)
    };
    let manifest = Manifest {
        num_views: entries.len(),
        labels,
        mask,
        views: entries,
    };
    let text = toml::to_string(&manifest).map_err(|e| Error::Manifest {
        path: dir.join(MANIFEST_FILE),
        reason: e.to_string(),
    })?;
    fs::write(dir.join(MANIFEST_FILE), text).map_err(|e| Error::io(dir.join(MANIFEST_FILE), e))
}
