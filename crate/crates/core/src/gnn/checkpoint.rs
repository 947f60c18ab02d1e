//! Textual model checkpoints: every parameter tensor with a shape header,
//! one row per line, in shortest-roundtrip decimal so reloads are bit-exact.

use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use ndarray::Array2;

use super::{Activation, GnnError, GnnModel, LayerParams};

pub fn save_gnn_checkpoint(model: &GnnModel, path: &Path) -> Result<(), GnnError> {
    let file = std::fs::File::create(path)?;
    let mut w = BufWriter::new(file);
    writeln!(w, "# gnn checkpoint v1")?;
    writeln!(w, "activation {}", model.activation.label())?;
    writeln!(w, "layers {}", model.layers.len())?;
    let write_tensor = |w: &mut BufWriter<std::fs::File>,
                        name: &str,
                        t: &Array2<f64>|
     -> Result<(), GnnError> {
        writeln!(w, "tensor {name} {} {}", t.nrows(), t.ncols())?;
        for row in t.rows() {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:?}")).collect();
            writeln!(w, "{}", cells.join(" "))?;
        }
        Ok(())
    };
    for (l, layer) in model.layers.iter().enumerate() {
        writeln!(w, "layer {l} taps {} slope {:?}", layer.taps.len(), layer.slope)?;
        for (k, tap) in layer.taps.iter().enumerate() {
            write_tensor(&mut w, &format!("layer{l}.tap{k}"), tap)?;
        }
    }
    write_tensor(&mut w, "classifier", &model.classifier)?;
    w.flush()?;
    Ok(())
}

struct LineReader<R: BufRead> {
    lines: std::iter::Enumerate<std::io::Lines<R>>,
}

impl<R: BufRead> LineReader<R> {
    fn next_line(&mut self) -> Result<(usize, String), GnnError> {
        loop {
            match self.lines.next() {
                Some((idx, line)) => {
                    let line = line?;
                    let trimmed = line.trim().to_string();
                    if trimmed.is_empty() || trimmed.starts_with('#') {
                        continue;
                    }
                    return Ok((idx + 1, trimmed));
                }
                None => {
                    return Err(GnnError::CheckpointParse {
                        line: 0,
                        message: "unexpected end of file".into(),
                    })
                }
            }
        }
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> GnnError {
    GnnError::CheckpointParse {
        line,
        message: message.into(),
    }
}

fn read_tensor<R: BufRead>(
    reader: &mut LineReader<R>,
    expected_name: &str,
) -> Result<Array2<f64>, GnnError> {
    let (lineno, header) = reader.next_line()?;
    let parts: Vec<&str> = header.split_whitespace().collect();
    if parts.len() != 4 || parts[0] != "tensor" || parts[1] != expected_name {
        return Err(parse_err(
            lineno,
            format!("expected 'tensor {expected_name} <rows> <cols>', got '{header}'"),
        ));
    }
    let rows: usize = parts[2]
        .parse()
        .map_err(|e| parse_err(lineno, format!("bad rows: {e}")))?;
    let cols: usize = parts[3]
        .parse()
        .map_err(|e| parse_err(lineno, format!("bad cols: {e}")))?;
    let mut t = Array2::<f64>::zeros((rows, cols));
    for r in 0..rows {
        let (lineno, line) = reader.next_line()?;
        let cells: Vec<&str> = line.split_whitespace().collect();
        if cells.len() != cols {
            return Err(parse_err(
                lineno,
                format!("expected {cols} values, got {}", cells.len()),
            ));
        }
        for (c, cell) in cells.iter().enumerate() {
            t[(r, c)] = cell
                .parse()
                .map_err(|e| parse_err(lineno, format!("bad value '{cell}': {e}")))?;
        }
    }
    Ok(t)
}

pub fn load_gnn_checkpoint(path: &Path) -> Result<GnnModel, GnnError> {
    let file = std::fs::File::open(path)?;
    let mut reader = LineReader {
        lines: std::io::BufReader::new(file).lines().enumerate(),
    };
    let (lineno, line) = reader.next_line()?;
    let activation = match line.strip_prefix("activation ") {
        Some("identity") => Activation::Identity,
        Some("prelu") => Activation::PRelu,
        _ => return Err(parse_err(lineno, format!("bad activation line '{line}'"))),
    };
    let (lineno, line) = reader.next_line()?;
    let layer_count: usize = line
        .strip_prefix("layers ")
        .ok_or_else(|| parse_err(lineno, "expected 'layers <n>'"))?
        .parse()
        .map_err(|e| parse_err(lineno, format!("bad layer count: {e}")))?;
    let mut layers = Vec::with_capacity(layer_count);
    for l in 0..layer_count {
        let (lineno, line) = reader.next_line()?;
        let parts: Vec<&str> = line.split_whitespace().collect();
        if parts.len() != 6 || parts[0] != "layer" || parts[2] != "taps" || parts[4] != "slope" {
            return Err(parse_err(
                lineno,
                format!("expected 'layer {l} taps <k> slope <s>', got '{line}'"),
            ));
        }
        if parts[1].parse::<usize>().ok() != Some(l) {
            return Err(parse_err(lineno, format!("expected layer index {l}")));
        }
        let tap_count: usize = parts[3]
            .parse()
            .map_err(|e| parse_err(lineno, format!("bad tap count: {e}")))?;
        let slope: f64 = parts[5]
            .parse()
            .map_err(|e| parse_err(lineno, format!("bad slope: {e}")))?;
        let mut taps = Vec::with_capacity(tap_count);
        for k in 0..tap_count {
            taps.push(read_tensor(&mut reader, &format!("layer{l}.tap{k}"))?);
        }
        layers.push(LayerParams { taps, slope });
    }
    let classifier = read_tensor(&mut reader, "classifier")?;
    Ok(GnnModel {
        layers,
        classifier,
        activation,
    })
}
