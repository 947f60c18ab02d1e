//! Dataset ingestion for the real-graph benchmark.
//!
//! File formats:
//! - edges: the crate's edge-list text format (`i j` per line, 0-based,
//!   undirected edges once, `#` comments ignored);
//! - features: headerless CSV, one row per node, comma-separated floats;
//! - labels: headerless CSV, one row per node, either a single class index
//!   or a one-hot row;
//! - splits: headerless CSV of `node,split_id,role` with role in
//!   {train, val, test}, encoding any number of fixed splits.

use std::path::{Path, PathBuf};

use ndarray::Array2;

use super::HarnessError;
use crate::graphs::{degree_summary, read_edge_list, CommunityAssignment, Graph};

#[derive(Debug, Clone)]
pub struct DatasetPaths {
    pub edges: PathBuf,
    pub features: PathBuf,
    pub labels: PathBuf,
    pub splits: PathBuf,
}

/// A fixed train/validation/test partition.
#[derive(Debug, Clone, Default)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub graph: Graph,
    pub features: Array2<f64>,
    pub labels: CommunityAssignment,
    pub splits: Vec<Split>,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.graph.n()
    }

    pub fn summary(&self) -> String {
        let deg = degree_summary(&self.graph);
        format!(
            "nodes: {}, features: {}, classes: {}, edges: {}, mean degree: {:.2}, splits: {}",
            self.n(),
            self.features.ncols(),
            self.labels.num_communities(),
            self.graph.num_edges(),
            deg.mean,
            self.splits.len()
        )
    }
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> HarnessError {
    HarnessError::Parse {
        path: path.display().to_string(),
        line,
        message: message.into(),
    }
}

fn read_numeric_csv(path: &Path) -> Result<Vec<Vec<f64>>, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::File {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let row: Result<Vec<f64>, _> = trimmed
            .split(',')
            .map(|cell| cell.trim().parse::<f64>())
            .collect();
        match row {
            Ok(r) => rows.push(r),
            Err(e) => return Err(parse_error(path, idx + 1, format!("bad number: {e}"))),
        }
    }
    Ok(rows)
}

fn features_from_rows(path: &Path, rows: Vec<Vec<f64>>) -> Result<Array2<f64>, HarnessError> {
    if rows.is_empty() {
        return Err(parse_error(path, 0, "no feature rows"));
    }
    let d = rows[0].len();
    let mut out = Array2::<f64>::zeros((rows.len(), d));
    for (i, row) in rows.iter().enumerate() {
        if row.len() != d {
            return Err(parse_error(
                path,
                i + 1,
                format!("expected {d} columns, got {}", row.len()),
            ));
        }
        for (j, &v) in row.iter().enumerate() {
            if !v.is_finite() {
                return Err(parse_error(path, i + 1, "non-finite feature"));
            }
            out[(i, j)] = v;
        }
    }
    Ok(out)
}

/// Label rows are either a single class index per node or one-hot vectors.
fn labels_from_rows(path: &Path, rows: Vec<Vec<f64>>) -> Result<CommunityAssignment, HarnessError> {
    if rows.is_empty() {
        return Err(parse_error(path, 0, "no label rows"));
    }
    let width = rows[0].len();
    if width == 1 {
        let mut labels = Vec::with_capacity(rows.len());
        let mut max = 0usize;
        for (i, row) in rows.iter().enumerate() {
            if row.len() != 1 {
                return Err(parse_error(path, i + 1, "inconsistent label row width"));
            }
            let v = row[0];
            if v < 0.0 || v.fract() != 0.0 {
                return Err(parse_error(path, i + 1, format!("bad class index {v}")));
            }
            let c = v as usize;
            max = max.max(c);
            labels.push(c);
        }
        CommunityAssignment::from_labels(labels, max + 1).map_err(HarnessError::from)
    } else {
        let mut matrix = Array2::<f64>::zeros((rows.len(), width));
        for (i, row) in rows.iter().enumerate() {
            if row.len() != width {
                return Err(parse_error(path, i + 1, "inconsistent label row width"));
            }
            for (j, &v) in row.iter().enumerate() {
                matrix[(i, j)] = v;
            }
        }
        CommunityAssignment::from_one_hot(&matrix)
            .map_err(|e| HarnessError::Dataset(format!("{}: {e}", path.display())))
    }
}

fn splits_from_file(path: &Path, n: usize) -> Result<Vec<Split>, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::File {
        path: path.display().to_string(),
        source: e,
    })?;
    let mut splits: Vec<Split> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let cells: Vec<&str> = trimmed.split(',').map(|c| c.trim()).collect();
        if cells.len() != 3 {
            return Err(parse_error(path, lineno, "expected node,split_id,role"));
        }
        let node: usize = cells[0]
            .parse()
            .map_err(|e| parse_error(path, lineno, format!("bad node: {e}")))?;
        if node >= n {
            return Err(parse_error(
                path,
                lineno,
                format!("node {node} out of range for {n} nodes"),
            ));
        }
        let split_id: usize = cells[1]
            .parse()
            .map_err(|e| parse_error(path, lineno, format!("bad split id: {e}")))?;
        while splits.len() <= split_id {
            splits.push(Split::default());
        }
        let split = &mut splits[split_id];
        match cells[2] {
            "train" => split.train.push(node),
            "val" | "validation" => split.val.push(node),
            "test" => split.test.push(node),
            other => {
                return Err(parse_error(
                    path,
                    lineno,
                    format!("unknown role '{other}' (expected train|val|test)"),
                ))
            }
        }
    }
    for (id, split) in splits.iter().enumerate() {
        if split.train.is_empty() || split.test.is_empty() {
            return Err(HarnessError::Dataset(format!(
                "split {id} is missing train or test nodes"
            )));
        }
        let mut seen = vec![0u8; n];
        for &i in split.train.iter().chain(&split.val).chain(&split.test) {
            seen[i] += 1;
            if seen[i] > 1 {
                return Err(HarnessError::Dataset(format!(
                    "node {i} appears twice in split {id}"
                )));
            }
        }
    }
    Ok(splits)
}

/// Loads and cross-validates the four dataset files.
pub fn load_dataset(paths: &DatasetPaths) -> Result<Dataset, HarnessError> {
    let features = features_from_rows(&paths.features, read_numeric_csv(&paths.features)?)?;
    let n = features.nrows();
    let graph = read_edge_list(&paths.edges, Some(n))?;
    let labels = labels_from_rows(&paths.labels, read_numeric_csv(&paths.labels)?)?;
    if labels.len() != n {
        return Err(HarnessError::Dataset(format!(
            "feature rows ({n}) and label rows ({}) disagree",
            labels.len()
        )));
    }
    let splits = splits_from_file(&paths.splits, n)?;
    Ok(Dataset {
        graph,
        features,
        labels,
        splits,
    })
}

/// Writes a dataset back out in the same four-file format (fixtures, demos).
pub fn write_dataset(dataset: &Dataset, paths: &DatasetPaths) -> Result<(), HarnessError> {
    crate::graphs::write_edge_list(&dataset.graph, &paths.edges)?;
    let fmt_row = |row: ndarray::ArrayView1<f64>| {
        row.iter()
            .map(|v| format!("{v}"))
            .collect::<Vec<_>>()
            .join(",")
    };
    super::write_csv(
        &paths.features,
        // headerless by format; write_csv demands a header line, so emit a
        // comment the reader skips
        "# features",
        dataset.features.rows().into_iter().map(fmt_row),
    )?;
    super::write_csv(
        &paths.labels,
        "# labels",
        dataset
            .labels
            .labels()
            .iter()
            .map(|c| format!("{c}")),
    )?;
    let mut rows = Vec::new();
    for (id, split) in dataset.splits.iter().enumerate() {
        for &i in &split.train {
            rows.push(format!("{i},{id},train"));
        }
        for &i in &split.val {
            rows.push(format!("{i},{id},val"));
        }
        for &i in &split.test {
            rows.push(format!("{i},{id},test"));
        }
    }
    super::write_csv(&paths.splits, "# splits", rows)?;
    Ok(())
}
