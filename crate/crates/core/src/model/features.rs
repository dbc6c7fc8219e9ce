//! Dense per-node feature rows.

use std::collections::HashMap;
use std::io::{BufRead, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Row-major `n × dim` matrix of finite reals with one labelled row per node.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    labels: Vec<String>,
    dim: usize,
    data: Vec<f64>,
}

impl FeatureMatrix {
    pub fn new(labels: Vec<String>, dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("feature dimension must be positive".into()));
        }
        if data.len() != labels.len() * dim {
            return Err(Error::Config(format!(
                "feature data has {} values, expected {} rows × {dim}",
                data.len(),
                labels.len()
            )));
        }
        if let Some(k) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric {
                node: labels[k / dim].clone(),
                message: format!("component {} is {}", k % dim, data[k]),
            });
        }
        Ok(Self { labels, dim, data })
    }

    pub fn from_rows(labels: Vec<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != dim) {
            return Err(Error::Config(format!(
                "row {bad} has dimension {}, expected {dim}",
                rows[bad].len()
            )));
        }
        Self::new(labels, dim, rows.concat())
    }

    pub fn zeros(labels: Vec<String>, dim: usize) -> Self {
        let data = vec![0.0; labels.len() * dim];
        Self { labels, dim, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn label_index(&self) -> HashMap<&str, usize> {
        self.labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), i))
            .collect()
    }

    /// Writes `node v1 v2 … vd` lines using shortest round-trip formatting.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        for (label, row) in self.labels.iter().zip(self.rows()) {
            write!(out, "{label}")?;
            for v in row {
                write!(out, " {v}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    pub fn read_text<R: BufRead>(input: R, path: &Path) -> Result<Self> {
        let mut labels = Vec::new();
        let mut rows = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let mut fields = trimmed.split_whitespace();
            let label = fields.next().expect("non-empty line").to_owned();
            let row = fields
                .map(|f| {
                    f.parse::<f64>().map_err(|_| Error::Parse {
                        path: path.to_path_buf(),
                        line: lineno + 1,
                        message: format!("`{f}` is not a number"),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            labels.push(label);
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::Empty(format!("{} has no feature rows", path.display())));
        }
        Self::from_rows(labels, &rows)
    }

    /// Keeps and reorders rows to follow `labels`; unknown labels get zero rows.
    pub fn select(&self, labels: &[String]) -> (Self, Vec<String>) {
        let index = self.label_index();
        let mut data = Vec::with_capacity(labels.len() * self.dim);
        let mut missing = Vec::new();
        for l in labels {
            match index.get(l.as_str()) {
                Some(&i) => data.extend_from_slice(self.row(i)),
                None => {
                    missing.push(l.clone());
                    data.extend(std::iter::repeat_n(0.0, self.dim));
                }
            }
        }
        (
            Self {
                labels: labels.to_vec(),
                dim: self.dim,
                data,
            },
            missing,
        )
    }

    pub(crate) fn from_parts_unchecked(labels: Vec<String>, dim: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), labels.len() * dim);
        Self { labels, dim, data }
    }
}
