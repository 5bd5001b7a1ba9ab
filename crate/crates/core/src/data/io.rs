use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::Array2;

use super::{Dataset, FeatureKind, FeatureLayout, FeatureTable};
use crate::error::{Error, Result};
use crate::graph::Graph;

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Lines with their 1-based numbers, CR stripped.
fn numbered_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.strip_suffix('\r').unwrap_or(l)))
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

/// Reads a tab-separated edge list. `#` lines and blank lines are skipped.
/// Node count is `max id + 1` unless `num_nodes` is given.
pub fn read_edge_list(path: &Path, num_nodes: Option<usize>) -> Result<Graph> {
    let text = read_text(path)?;
    let mut edges = Vec::new();
    for (no, line) in numbered_lines(&text) {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split('\t');
        let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(parse_err(path, no, "expected two tab-separated node ids"));
        };
        let u: usize = a
            .parse()
            .map_err(|_| parse_err(path, no, format!("bad node id `{a}`")))?;
        let v: usize = b
            .parse()
            .map_err(|_| parse_err(path, no, format!("bad node id `{b}`")))?;
        edges.push((u, v));
    }
    let max_id = edges.iter().map(|&(u, v)| u.max(v) + 1).max().unwrap_or(0);
    let n = match num_nodes {
        Some(n) if n < max_id => {
            return Err(Error::InvalidInput(format!(
                "{}: node id {} exceeds node count {n}",
                path.display(),
                max_id - 1
            )))
        }
        Some(n) => n,
        None => max_id,
    };
    Graph::new(n, &edges)
}

pub fn write_edge_list(path: &Path, graph: &Graph) -> Result<()> {
    let mut out = String::new();
    for &(u, v) in graph.edges() {
        writeln!(out, "{u}\t{v}").unwrap();
    }
    write_text(path, &out)
}

/// Reads the feature format: a `n<TAB>m<TAB>kind` header, then a `dense`
/// marker followed by `n` rows, or a `sparse` marker followed by
/// `i<TAB>j<TAB>value` triplets.
pub fn read_features(path: &Path) -> Result<FeatureTable> {
    let text = read_text(path)?;
    let mut lines = numbered_lines(&text);
    let (no, header) = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty feature file"))?;
    let fields: Vec<&str> = header.split('\t').collect();
    if fields.len() != 3 {
        return Err(parse_err(path, no, "header must be `n<TAB>m<TAB>kind`"));
    }
    let n: usize = fields[0]
        .parse()
        .map_err(|_| parse_err(path, no, format!("bad row count `{}`", fields[0])))?;
    let m: usize = fields[1]
        .parse()
        .map_err(|_| parse_err(path, no, format!("bad column count `{}`", fields[1])))?;
    let kind: FeatureKind = fields[2]
        .parse()
        .map_err(|e: Error| parse_err(path, no, e.to_string()))?;
    let (no, marker) = lines
        .next()
        .ok_or_else(|| parse_err(path, 2, "missing dense/sparse marker"))?;
    let mut values = Array2::<f64>::zeros((n, m));
    let parse_val = |no: usize, s: &str| -> Result<f64> {
        let v: f64 = s
            .parse()
            .map_err(|_| parse_err(path, no, format!("bad value `{s}`")))?;
        if !v.is_finite() {
            return Err(parse_err(path, no, "non-finite value"));
        }
        Ok(v)
    };
    let layout = match marker.trim() {
        "dense" => {
            let mut row = 0;
            for (no, line) in lines {
                if line.trim().is_empty() {
                    continue;
                }
                if row == n {
                    return Err(parse_err(path, no, format!("more than {n} rows")));
                }
                let vals: Vec<&str> = line.split_whitespace().collect();
                if vals.len() != m {
                    return Err(parse_err(
                        path,
                        no,
                        format!("expected {m} values, found {}", vals.len()),
                    ));
                }
                for (j, s) in vals.into_iter().enumerate() {
                    values[[row, j]] = parse_val(no, s)?;
                }
                row += 1;
            }
            if row != n {
                return Err(parse_err(path, no, format!("expected {n} rows, found {row}")));
            }
            FeatureLayout::Dense
        }
        "sparse" => {
            for (no, line) in lines {
                if line.trim().is_empty() {
                    continue;
                }
                let parts: Vec<&str> = line.split('\t').collect();
                if parts.len() != 3 {
                    return Err(parse_err(path, no, "expected `i<TAB>j<TAB>value`"));
                }
                let i: usize = parts[0]
                    .parse()
                    .map_err(|_| parse_err(path, no, format!("bad row `{}`", parts[0])))?;
                let j: usize = parts[1]
                    .parse()
                    .map_err(|_| parse_err(path, no, format!("bad column `{}`", parts[1])))?;
                if i >= n || j >= m {
                    return Err(parse_err(path, no, format!("entry ({i},{j}) outside {n}x{m}")));
                }
                values[[i, j]] = parse_val(no, parts[2])?;
            }
            FeatureLayout::Sparse
        }
        other => {
            return Err(parse_err(
                path,
                no,
                format!("expected `dense` or `sparse`, found `{other}`"),
            ))
        }
    };
    let table = FeatureTable {
        values,
        kind,
        layout,
    };
    table.validate().map_err(|e| parse_err(path, 1, e.to_string()))?;
    Ok(table)
}

pub fn write_features(path: &Path, table: &FeatureTable) -> Result<()> {
    let (n, m) = table.values.dim();
    let mut out = format!("{n}\t{m}\t{}\n", table.kind);
    match table.layout {
        FeatureLayout::Dense => {
            out.push_str("dense\n");
            for row in table.values.rows() {
                let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
                out.push_str(&line.join(" "));
                out.push('\n');
            }
        }
        FeatureLayout::Sparse => {
            out.push_str("sparse\n");
            for ((i, j), v) in table.values.indexed_iter() {
                if *v != 0.0 {
                    writeln!(out, "{i}\t{j}\t{v}").unwrap();
                }
            }
        }
    }
    write_text(path, &out)
}

/// Reads `i<TAB>class` lines; every node in `0..n` must appear exactly once.
pub fn read_labels(path: &Path, n: usize) -> Result<Vec<usize>> {
    let text = read_text(path)?;
    let mut labels = vec![None; n];
    for (no, line) in numbered_lines(&text) {
        if line.starts_with('#') || line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split('\t');
        let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(parse_err(path, no, "expected `node<TAB>class`"));
        };
        let i: usize = a
            .parse()
            .map_err(|_| parse_err(path, no, format!("bad node id `{a}`")))?;
        let c: usize = b
            .parse()
            .map_err(|_| parse_err(path, no, format!("bad class `{b}`")))?;
        if i >= n {
            return Err(parse_err(path, no, format!("node {i} outside [0,{n})")));
        }
        if labels[i].replace(c).is_some() {
            return Err(parse_err(path, no, format!("node {i} labelled twice")));
        }
    }
    labels
        .into_iter()
        .enumerate()
        .map(|(i, l)| {
            l.ok_or_else(|| Error::InvalidInput(format!("{}: node {i} has no label", path.display())))
        })
        .collect()
}

pub fn write_labels(path: &Path, labels: &[usize]) -> Result<()> {
    let mut out = String::new();
    for (i, c) in labels.iter().enumerate() {
        writeln!(out, "{i}\t{c}").unwrap();
    }
    write_text(path, &out)
}

/// Loads a dataset; the node count comes from the feature header.
pub fn load_dataset(edges: &Path, features: &Path, labels: Option<&Path>) -> Result<Dataset> {
    let table = read_features(features)?;
    let graph = read_edge_list(edges, Some(table.rows()))?;
    let labels = labels.map(|p| read_labels(p, table.rows())).transpose()?;
    let name = features
        .parent()
        .and_then(|p| p.file_name())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    Dataset::new(name, graph, table, labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn tmp() -> tempfile::TempDir {
        tempfile::tempdir().unwrap()
    }

    #[test]
    fn toy_fixture_roundtrips_bitwise() {
        let dir = tmp();
        let e = dir.path().join("edges.tsv");
        let f = dir.path().join("features.tsv");
        let l = dir.path().join("labels.tsv");
        fs::write(&e, "0\t1\n1\t2\n").unwrap();
        fs::write(&f, "3\t2\tbinary\nsparse\n0\t1\t1\n2\t0\t1\n").unwrap();
        fs::write(&l, "0\t0\n1\t1\n2\t0\n").unwrap();
        let ds = load_dataset(&e, &f, Some(&l)).unwrap();
        assert_eq!(ds.graph.num_edges(), 2);
        assert_eq!(ds.num_classes(), 2);

        let out = dir.path().join("out");
        fs::create_dir(&out).unwrap();
        write_edge_list(&out.join("e"), &ds.graph).unwrap();
        write_features(&out.join("f"), &ds.features).unwrap();
        write_labels(&out.join("l"), ds.labels.as_ref().unwrap()).unwrap();
        assert_eq!(fs::read(&e).unwrap(), fs::read(out.join("e")).unwrap());
        assert_eq!(fs::read(&f).unwrap(), fs::read(out.join("f")).unwrap());
        assert_eq!(fs::read(&l).unwrap(), fs::read(out.join("l")).unwrap());
    }

    #[test]
    fn dense_continuous_roundtrip() {
        let dir = tmp();
        let p = dir.path().join("x");
        let t = FeatureTable::new(array![[0.1, -2.5e-7], [3.0, 1e300]], FeatureKind::Continuous)
            .unwrap();
        write_features(&p, &t).unwrap();
        let back = read_features(&p).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn comments_crlf_and_override() {
        let dir = tmp();
        let p = dir.path().join("e");
        fs::write(&p, "# header\r\n0\t3\r\n").unwrap();
        let g = read_edge_list(&p, None).unwrap();
        assert_eq!(g.num_nodes(), 4);
        let g = read_edge_list(&p, Some(6)).unwrap();
        assert_eq!(g.num_nodes(), 6);
        assert!(read_edge_list(&p, Some(2)).is_err());
    }

    #[test]
    fn corrupt_header_names_line() {
        let dir = tmp();
        let p = dir.path().join("f");
        fs::write(&p, "3 2 binary\ndense\n").unwrap();
        let err = read_features(&p).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 1),
            other => panic!("unexpected {other}"),
        }
        fs::write(&p, "2\t2\tbinary\ndense\n0 1\n0 x\n").unwrap();
        match read_features(&p).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 4),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn rejects_non_binary_values() {
        let dir = tmp();
        let p = dir.path().join("f");
        fs::write(&p, "1\t2\tbinary\ndense\n0 0.5\n").unwrap();
        assert!(read_features(&p).is_err());
    }

    #[test]
    fn edge_parse_errors() {
        let dir = tmp();
        let p = dir.path().join("e");
        fs::write(&p, "0\t1\n0 2\n").unwrap();
        match read_edge_list(&p, None).unwrap_err() {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn labels_must_cover_nodes() {
        let dir = tmp();
        let p = dir.path().join("l");
        fs::write(&p, "0\t1\n").unwrap();
        assert!(read_labels(&p, 2).is_err());
        fs::write(&p, "0\t1\n0\t2\n").unwrap();
        assert!(read_labels(&p, 1).is_err());
    }
}
