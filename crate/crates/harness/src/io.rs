//! Edge-list and label files.
//!
//! Lines are `a<sep>b` with `sep` one of space, tab or comma; blank lines
//! and lines starting with `#` are skipped. Vertex ids are arbitrary tokens
//! mapped to dense ids in order of first appearance.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use dynsample_core::pairs::PairSet;
use dynsample_core::sbm::ObservedGraph;

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeList {
    pub graph: ObservedGraph,
    /// Original token of each dense id.
    pub ids: Vec<String>,
    pub duplicates: usize,
    pub self_loops: usize,
}

impl EdgeList {
    pub fn id_map(&self) -> HashMap<&str, usize> {
        self.ids.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect()
    }
}

/// Non-comment lines split into exactly two fields.
fn records<'a>(text: &'a str, path: &'a Path) -> impl Iterator<Item = Result<(usize, &'a str, &'a str)>> + 'a {
    text.lines().enumerate().filter_map(move |(i, raw)| {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            return None;
        }
        let fields: Vec<&str> = line.split(|c: char| c == ',' || c.is_whitespace()).filter(|f| !f.is_empty()).collect();
        Some(match fields.as_slice() {
            [a, b] => Ok((i + 1, *a, *b)),
            _ => Err(HarnessError::Format {
                path: path.to_path_buf(),
                line: i + 1,
                message: format!("expected two fields, found {}", fields.len()),
            }),
        })
    })
}

pub fn parse_edge_list(text: &str, path: &Path) -> Result<EdgeList> {
    let mut ids: Vec<String> = Vec::new();
    let mut index: HashMap<String, usize> = HashMap::new();
    let mut raw = Vec::new();
    let mut self_loops = 0;
    for rec in records(text, path) {
        let (_, a, b) = rec?;
        let mut dense = |tok: &str| {
            *index.entry(tok.to_string()).or_insert_with(|| {
                ids.push(tok.to_string());
                ids.len() - 1
            })
        };
        let (i, j) = (dense(a), dense(b));
        if i == j {
            self_loops += 1;
        } else {
            raw.push((i.min(j), i.max(j)));
        }
    }
    let mut edges = PairSet::empty(ids.len());
    let mut duplicates = 0;
    for (i, j) in raw {
        if !edges.insert(i, j) {
            duplicates += 1;
        }
    }
    Ok(EdgeList { graph: ObservedGraph::new(edges, None)?, ids, duplicates, self_loops })
}

pub fn load_edge_list(path: &Path) -> Result<EdgeList> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_edge_list(&text, path)
}

/// Dense 0-based labels for every vertex of `list`.
///
/// Label tokens are mapped to dense ids in order of first appearance.
/// Unknown vertex ids, repeated vertices and unlabelled vertices are errors.
pub fn parse_labels(text: &str, path: &Path, list: &EdgeList) -> Result<Vec<usize>> {
    let ids = list.id_map();
    let mut labels: Vec<Option<usize>> = vec![None; list.ids.len()];
    let mut names: HashMap<&str, usize> = HashMap::new();
    let fail = |line: usize, message: String| HarnessError::Format { path: path.to_path_buf(), line, message };
    for rec in records(text, path) {
        let (line, vertex, label) = rec?;
        let Some(&v) = ids.get(vertex) else {
            return Err(fail(line, format!("label for unknown vertex id {vertex:?}")));
        };
        if labels[v].is_some() {
            return Err(fail(line, format!("vertex id {vertex:?} labelled twice")));
        }
        let next = names.len();
        labels[v] = Some(*names.entry(label).or_insert(next));
    }
    labels
        .iter()
        .enumerate()
        .map(|(v, l)| l.ok_or_else(|| fail(0, format!("vertex id {:?} has no label", list.ids[v]))))
        .collect()
}

pub fn load_labels(path: &Path, list: &EdgeList) -> Result<Vec<usize>> {
    let text = fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse_labels(&text, path, list)
}

fn write_lines(path: &Path, lines: impl Iterator<Item = String>) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path).map_err(|e| HarnessError::io(path, e))?);
    for line in lines {
        writeln!(out, "{line}").map_err(|e| HarnessError::io(path, e))?;
    }
    out.flush().map_err(|e| HarnessError::io(path, e))
}

/// `original_id,dense_id` per line.
pub fn write_vertex_map(path: &Path, list: &EdgeList) -> Result<()> {
    write_lines(path, list.ids.iter().enumerate().map(|(i, s)| format!("{s},{i}")))
}

/// Tab-separated `i j` with `i < j`, in pair order.
pub fn write_edge_list(path: &Path, graph: &ObservedGraph) -> Result<()> {
    write_lines(path, graph.edges().iter().map(|(i, j)| format!("{i}\t{j}")))
}

/// Labels keyed by original ids, tab-separated.
pub fn write_labels(path: &Path, ids: &[String], labels: &[usize]) -> Result<()> {
    write_lines(path, ids.iter().zip(labels).map(|(s, l)| format!("{s}\t{l}")))
}

pub fn ensure_dir(dir: &Path) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    Ok(dir.to_path_buf())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_and_loops_are_dropped() {
        let list = parse_edge_list("0,1\n1,2\n0,1\n2,2\n", Path::new("x")).unwrap();
        assert_eq!(list.graph.edge_count(), 2);
        assert_eq!((list.duplicates, list.self_loops), (1, 1));
        assert_eq!(list.ids, ["0", "1", "2"]);
    }

    #[test]
    fn comments_and_remapping() {
        let list = parse_edge_list("# comment\n5 7\n", Path::new("x")).unwrap();
        assert_eq!(list.graph.n(), 2);
        assert!(list.graph.edges().contains(0, 1));
        assert_eq!(list.ids, ["5", "7"]);
    }

    #[test]
    fn reversed_duplicate_counts_once() {
        let list = parse_edge_list("a\tb\nb\ta\n", Path::new("x")).unwrap();
        assert_eq!((list.graph.edge_count(), list.duplicates), (1, 1));
    }

    #[test]
    fn malformed_line_names_its_number() {
        let err = parse_edge_list("1 2\n\n3 4 5\n", Path::new("g.txt")).unwrap_err();
        assert!(matches!(err, HarnessError::Format { line: 3, .. }), "{err}");
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn labels_follow_the_vertex_map() {
        let list = parse_edge_list("10 20\n20 30\n", Path::new("g")).unwrap();
        let labels = parse_labels("30,red\n10 blue\n20\tred\n", Path::new("l"), &list).unwrap();
        assert_eq!(labels, vec![1, 0, 0]);
        let err = parse_labels("10 a\n99 b\n", Path::new("l"), &list).unwrap_err();
        assert!(matches!(err, HarnessError::Format { line: 2, .. }), "{err}");
        assert!(err.to_string().contains("99"));
        assert!(parse_labels("10 a\n20 b\n", Path::new("l"), &list).is_err());
    }
}
