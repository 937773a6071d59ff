//! Text file formats: signed edge lists, dense matrices and labels.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use signedprop_core::{DenseMatrix, LabelSet, SparseGraph};

use crate::error::{CliError, Result};

/// Positive and negative halves of a signed graph on a shared node set.
#[derive(Debug, Clone, PartialEq)]
pub struct SignedEdgeList {
    pub positive: SparseGraph,
    pub negative: SparseGraph,
}

impl SignedEdgeList {
    pub fn n(&self) -> usize {
        self.positive.n()
    }

    /// All edges as `(i, j, sign)` with `i < j`, sorted by `(i, j)`.
    pub fn canonical_edges(&self) -> Vec<(usize, usize, i8)> {
        let mut out: Vec<(usize, usize, i8)> = self
            .positive
            .edges()
            .map(|(i, j, _)| (i, j, 1))
            .chain(self.negative.edges().map(|(i, j, _)| (i, j, -1)))
            .collect();
        out.sort_unstable();
        out
    }
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| CliError::io(path, e))
}

fn source_name(path: &Path) -> String {
    path.display().to_string()
}

/// Parses `n <N>` followed by `i j s` lines. Blank lines and `#` comments are skipped.
/// Repeating an edge with the same sign is accepted once.
pub fn read_signed_edgelist<R: BufRead>(reader: R, name: &str) -> Result<SignedEdgeList> {
    let mut graphs: Option<(SparseGraph, SparseGraph)> = None;
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line.map_err(|e| CliError::parse(name, lineno, e.to_string()))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let Some((pos, neg)) = graphs.as_mut() else {
            let n = match fields.as_slice() {
                ["n", count] => count.parse::<usize>().map_err(|_| {
                    CliError::parse(name, lineno, format!("bad node count {count:?}"))
                })?,
                _ => {
                    return Err(CliError::parse(
                        name,
                        lineno,
                        "expected header \"n <count>\"",
                    ))
                }
            };
            graphs = Some((SparseGraph::new(n), SparseGraph::new(n)));
            continue;
        };
        let [i, j, s] = fields.as_slice() else {
            return Err(CliError::parse(
                name,
                lineno,
                format!("expected \"i j s\", got {line:?}"),
            ));
        };
        let node = |tok: &str| {
            tok.parse::<usize>()
                .map_err(|_| CliError::parse(name, lineno, format!("bad node id {tok:?}")))
        };
        let (i, j) = (node(i)?, node(j)?);
        if i == j {
            return Err(CliError::parse(
                name,
                lineno,
                format!("self-loop on node {i}"),
            ));
        }
        let n = pos.n();
        if i >= n || j >= n {
            return Err(CliError::parse(
                name,
                lineno,
                format!("node id out of range for n={n}"),
            ));
        }
        let (same, other) = match *s {
            "+1" | "1" => (&mut *pos, &*neg),
            "-1" => (&mut *neg, &*pos),
            _ => {
                return Err(CliError::parse(
                    name,
                    lineno,
                    format!("sign must be +1 or -1, got {s:?}"),
                ))
            }
        };
        if other.has_edge(i, j) {
            return Err(CliError::parse(
                name,
                lineno,
                format!("edge {{{i},{j}}} listed with both signs"),
            ));
        }
        same.add_edge(i, j)
            .map_err(|e| CliError::parse(name, lineno, e.to_string()))?;
    }
    let (positive, negative) =
        graphs.ok_or_else(|| CliError::parse(name, 1, "missing header \"n <count>\""))?;
    Ok(SignedEdgeList { positive, negative })
}

/// Writes the header and every edge once in canonical order. Edge weights are not stored.
pub fn write_signed_edgelist<W: Write>(mut writer: W, g: &SignedEdgeList) -> std::io::Result<()> {
    writeln!(writer, "n {}", g.n())?;
    for (i, j, s) in g.canonical_edges() {
        writeln!(writer, "{i} {j} {}", if s > 0 { "+1" } else { "-1" })?;
    }
    writer.flush()
}

pub fn load_signed_edgelist(path: &Path) -> Result<SignedEdgeList> {
    read_signed_edgelist(open(path)?, &source_name(path))
}

pub fn save_signed_edgelist(path: &Path, g: &SignedEdgeList) -> Result<()> {
    write_signed_edgelist(create(path)?, g).map_err(|e| CliError::io(path, e))
}

fn csv_reader<R: Read>(reader: R, headers: bool) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(headers)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader)
}

fn csv_error(name: &str, e: &csv::Error) -> CliError {
    let line = e.position().map_or(0, |p| p.line() as usize);
    CliError::parse(name, line, e.to_string())
}

/// One row per line, no header. `#` lines are ignored.
pub fn read_dense_csv<R: Read>(reader: R, name: &str) -> Result<DenseMatrix> {
    let mut data = Vec::new();
    let mut shape = (0, 0);
    for record in csv_reader(reader, false).records() {
        let record = record.map_err(|e| csv_error(name, &e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if shape.0 > 0 && record.len() != shape.1 {
            return Err(CliError::parse(
                name,
                line,
                format!("expected {} columns, got {}", shape.1, record.len()),
            ));
        }
        for field in &record {
            let v: f64 = field
                .parse()
                .map_err(|_| CliError::parse(name, line, format!("bad number {field:?}")))?;
            if !v.is_finite() {
                return Err(CliError::parse(
                    name,
                    line,
                    format!("non-finite entry {field:?}"),
                ));
            }
            data.push(v);
        }
        shape = (shape.0 + 1, record.len());
    }
    Ok(DenseMatrix::from_vec(shape.0, shape.1, data)?)
}

/// Writes every entry in shortest round-trip form, optionally after a `#` comment line.
pub fn write_dense_csv<W: Write>(
    mut writer: W,
    x: &DenseMatrix,
    comment: Option<&str>,
) -> std::io::Result<()> {
    if let Some(c) = comment {
        writeln!(writer, "# {c}")?;
    }
    for row in x.row_iter() {
        let line: Vec<String> = row.iter().map(f64::to_string).collect();
        writeln!(writer, "{}", line.join(","))?;
    }
    writer.flush()
}

pub fn load_dense_csv(path: &Path) -> Result<DenseMatrix> {
    read_dense_csv(open(path)?, &source_name(path))
}

pub fn save_dense_csv(path: &Path, x: &DenseMatrix, comment: Option<&str>) -> Result<()> {
    write_dense_csv(create(path)?, x, comment).map_err(|e| CliError::io(path, e))
}

pub const LABELS_HEADER: &str = "node,class,mask";

/// Parses `node,class,mask` rows. Nodes must appear as `0..n` in order; mask is `0` or `1`.
pub fn read_labels_csv<R: Read>(reader: R, name: &str) -> Result<LabelSet> {
    let mut rdr = csv_reader(reader, true);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| csv_error(name, &e))?
        .iter()
        .map(str::to_owned)
        .collect();
    if header.join(",") != LABELS_HEADER {
        return Err(CliError::parse(
            name,
            1,
            format!("expected header {LABELS_HEADER:?}"),
        ));
    }
    let mut classes = Vec::new();
    let mut mask = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(name, &e))?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let field = |k: usize| record.get(k).unwrap_or_default();
        let node: usize = field(0)
            .parse()
            .map_err(|_| CliError::parse(name, line, format!("bad node id {:?}", field(0))))?;
        if node != classes.len() {
            return Err(CliError::parse(
                name,
                line,
                format!("expected node {}, got {node}", classes.len()),
            ));
        }
        let class: usize = field(1)
            .parse()
            .map_err(|_| CliError::parse(name, line, format!("bad class id {:?}", field(1))))?;
        let trained = match field(2) {
            "1" => true,
            "0" => false,
            other => {
                return Err(CliError::parse(
                    name,
                    line,
                    format!("mask must be 0 or 1, got {other:?}"),
                ))
            }
        };
        classes.push(class);
        mask.push(trained);
    }
    Ok(LabelSet::new(classes, mask)?)
}

pub fn write_labels_csv<W: Write>(mut writer: W, labels: &LabelSet) -> std::io::Result<()> {
    writeln!(writer, "{LABELS_HEADER}")?;
    for (i, (&c, &m)) in labels.classes().iter().zip(labels.train_mask()).enumerate() {
        writeln!(writer, "{i},{c},{}", u8::from(m))?;
    }
    writer.flush()
}

pub fn load_labels_csv(path: &Path) -> Result<LabelSet> {
    read_labels_csv(open(path)?, &source_name(path))
}

pub fn save_labels_csv(path: &Path, labels: &LabelSet) -> Result<()> {
    write_labels_csv(create(path)?, labels).map_err(|e| CliError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<SignedEdgeList> {
        read_signed_edgelist(text.as_bytes(), "test")
    }

    fn line_of(err: CliError) -> usize {
        match err {
            CliError::Parse { line, .. } => line,
            other => panic!("expected a parse error, got {other}"),
        }
    }

    #[test]
    fn single_positive_edge() {
        let g = parse("n 2\n0 1 +1\n").unwrap();
        assert!(g.positive.has_edge(0, 1) && g.positive.has_edge(1, 0));
        assert_eq!(g.negative.num_edges(), 0);
    }

    #[test]
    fn contradictory_duplicate_is_rejected() {
        assert_eq!(line_of(parse("n 2\n0 1 +1\n0 1 -1\n").unwrap_err()), 3);
        assert_eq!(line_of(parse("n 2\n1 0 -1\n0 1 1\n").unwrap_err()), 3);
    }

    #[test]
    fn identical_duplicate_is_merged() {
        let g = parse("n 3\n0 1 -1\n1 0 -1\n").unwrap();
        assert_eq!(g.canonical_edges(), vec![(0, 1, -1)]);
    }

    #[test]
    fn header_only_gives_isolated_nodes() {
        let g = parse("n 3\n").unwrap();
        assert_eq!(g.n(), 3);
        assert!(g.canonical_edges().is_empty());
    }

    #[test]
    fn malformed_lines_report_line_numbers() {
        assert_eq!(line_of(parse("0 1 +1\n").unwrap_err()), 1);
        assert_eq!(line_of(parse("n 3\n\n0 0 +1\n").unwrap_err()), 3);
        assert_eq!(line_of(parse("n 3\n0 1 +2\n").unwrap_err()), 2);
        assert_eq!(line_of(parse("n 3\n0 5 +1\n").unwrap_err()), 2);
        assert_eq!(line_of(parse("n 3\n0 1\n").unwrap_err()), 2);
        assert_eq!(line_of(parse("").unwrap_err()), 1);
    }

    #[test]
    fn edgelist_is_canonical_after_round_trip() {
        let g = parse("# comment\nn 4\n3 2 -1\n1 0 +1\n0 2 +1\n").unwrap();
        let mut out = Vec::new();
        write_signed_edgelist(&mut out, &g).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(text, "n 4\n0 1 +1\n0 2 +1\n2 3 -1\n");
        assert_eq!(parse(&text).unwrap(), g);
    }

    #[test]
    fn dense_round_trip_is_exact() {
        let x = DenseMatrix::from_rows(&[vec![0.1, -1.0 / 3.0, 1e-300], vec![f64::MAX, -0.0, 2.5]])
            .unwrap();
        let mut out = Vec::new();
        write_dense_csv(&mut out, &x, Some("config-hash: abc")).unwrap();
        let back = read_dense_csv(out.as_slice(), "x").unwrap();
        assert_eq!(back, x);
    }

    #[test]
    fn dense_rejects_ragged_rows() {
        let err = read_dense_csv("1,2\n3\n".as_bytes(), "x").unwrap_err();
        assert!(matches!(err, CliError::Parse { .. }));
        assert!(read_dense_csv("1,nan\n".as_bytes(), "x").is_err());
    }

    #[test]
    fn labels_round_trip() {
        let labels = LabelSet::new(vec![0, 1, 1, 0], vec![true, false, true, false]).unwrap();
        let mut out = Vec::new();
        write_labels_csv(&mut out, &labels).unwrap();
        assert!(out.starts_with(b"node,class,mask\n0,0,1\n"));
        assert_eq!(read_labels_csv(out.as_slice(), "l").unwrap(), labels);
    }

    #[test]
    fn labels_reject_bad_rows() {
        assert_eq!(
            line_of(
                read_labels_csv("node,class,mask\n0,0,1\n2,1,0\n".as_bytes(), "l").unwrap_err()
            ),
            3
        );
        assert!(read_labels_csv("node,class,mask\n0,0,yes\n".as_bytes(), "l").is_err());
        assert!(read_labels_csv("id,class,mask\n".as_bytes(), "l").is_err());
    }
}
