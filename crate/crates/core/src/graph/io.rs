//! Edge-list and attribute-table readers and writers.
//!
//! Edge file: one edge per line, two whitespace-separated unsigned integer
//! ids. Blank lines and lines starting with `#` are skipped. Edges are read as
//! undirected; a reversed duplicate is the same edge.
//!
//! Attribute file: comma-separated, no quoting. The first line is a header
//! `node_id,<attr>,<attr>,...`; each further line is `<id>,<value>,...` with
//! one cell per header column. Cells are trimmed; an empty cell is a missing
//! value. One of the columns is designated the label column.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{AttributedGraph, GraphBuilder};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub nodes: usize,
    pub undirected_edges: usize,
    pub self_loops_dropped: usize,
    pub duplicates_dropped: usize,
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

pub(crate) fn parse_edges(path: &Path, text: &str) -> Result<Vec<(u64, u64)>> {
    let mut edges = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut it = line.split_whitespace();
        let (Some(a), Some(b), None) = (it.next(), it.next(), it.next()) else {
            return Err(parse_err(path, i + 1, format!("expected two node ids, got {line:?}")));
        };
        let parse = |s: &str| {
            s.parse::<u64>()
                .map_err(|_| parse_err(path, i + 1, format!("invalid node id {s:?}")))
        };
        edges.push((parse(a)?, parse(b)?));
    }
    Ok(edges)
}

struct AttributeTable {
    columns: Vec<String>,
    rows: BTreeMap<u64, Vec<String>>,
}

fn parse_attributes(path: &Path, text: &str) -> Result<AttributeTable> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let Some((_, header)) = lines.next() else {
        return Err(parse_err(path, 1, "missing header row"));
    };
    let header: Vec<String> = header.split(',').map(|c| c.trim().to_string()).collect();
    if header.len() < 2 {
        return Err(parse_err(path, 1, "header needs a node id column and at least one attribute"));
    }
    let columns = header[1..].to_vec();
    let mut rows = BTreeMap::new();
    for (i, raw) in lines {
        let cells: Vec<&str> = raw.split(',').map(str::trim).collect();
        if cells.len() != header.len() {
            return Err(parse_err(
                path,
                i + 1,
                format!("expected {} cells, got {}", header.len(), cells.len()),
            ));
        }
        let id: u64 = cells[0]
            .parse()
            .map_err(|_| parse_err(path, i + 1, format!("invalid node id {:?}", cells[0])))?;
        let values = cells[1..].iter().map(|s| s.to_string()).collect();
        if rows.insert(id, values).is_some() {
            return Err(parse_err(path, i + 1, format!("duplicate node id {id}")));
        }
    }
    Ok(AttributeTable { columns, rows })
}

/// Sorts class names numerically when they all parse as integers, otherwise
/// lexicographically.
fn sort_classes(classes: BTreeSet<String>) -> Vec<String> {
    let mut out: Vec<String> = classes.into_iter().collect();
    if out.iter().all(|c| c.parse::<i64>().is_ok()) {
        out.sort_by_key(|c| c.parse::<i64>().unwrap());
    }
    out
}

/// Reads an attributed graph. Node dense ids follow ascending original id;
/// the label column is removed from the attribute set and becomes the class.
pub fn load_graph(
    edge_file: impl AsRef<Path>,
    attr_file: impl AsRef<Path>,
    label_attr: &str,
) -> Result<(AttributedGraph, LoadReport)> {
    let edge_path = edge_file.as_ref();
    let attr_path = attr_file.as_ref();
    let edge_text = fs::read_to_string(edge_path).map_err(|e| Error::io(edge_path, e))?;
    let attr_text = fs::read_to_string(attr_path).map_err(|e| Error::io(attr_path, e))?;
    let edges = parse_edges(edge_path, &edge_text)?;
    let table = parse_attributes(attr_path, &attr_text)?;
    build_from_tables(&edges, &table, label_attr)
}

fn build_from_tables(
    edges: &[(u64, u64)],
    table: &AttributeTable,
    label_attr: &str,
) -> Result<(AttributedGraph, LoadReport)> {
    let label_col = table
        .columns
        .iter()
        .position(|c| c == label_attr)
        .ok_or_else(|| Error::Config(format!("label attribute {label_attr:?} not in attribute header")))?;
    let classes = sort_classes(
        table
            .rows
            .values()
            .map(|r| r[label_col].clone())
            .filter(|v| !v.is_empty())
            .collect(),
    );
    let attr_names: Vec<String> = table
        .columns
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != label_col)
        .map(|(_, c)| c.clone())
        .collect();
    let mut builder = GraphBuilder::new(attr_names, classes);
    for (&id, row) in &table.rows {
        let attrs: Vec<&str> = row
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != label_col)
            .map(|(_, v)| v.as_str())
            .collect();
        let label = Some(row[label_col].as_str()).filter(|l| !l.is_empty());
        builder.add_node(id, &attrs, label)?;
    }
    let mut missing = BTreeSet::new();
    for &(a, b) in edges {
        match (builder.node_by_original(a), builder.node_by_original(b)) {
            (Some(u), Some(v)) => builder.add_edge(u, v),
            (u, v) => {
                if u.is_none() {
                    missing.insert(a);
                }
                if v.is_none() {
                    missing.insert(b);
                }
            }
        }
    }
    if !missing.is_empty() {
        return Err(Error::MissingNodes(missing.into_iter().collect()));
    }
    let (graph, build) = builder.build()?;
    let report = LoadReport {
        nodes: graph.node_count(),
        undirected_edges: graph.edge_count(),
        self_loops_dropped: build.self_loops_dropped,
        duplicates_dropped: build.duplicates_dropped,
    };
    Ok((graph, report))
}

/// Writes each undirected edge once as `u v` (original ids, `u < v`).
pub fn write_edges(g: &AttributedGraph, path: impl AsRef<Path>) -> Result<()> {
    let mut lines: Vec<(u64, u64)> = Vec::with_capacity(g.edge_count());
    for u in g.nodes() {
        for &v in g.neighbors(u) {
            let (a, b) = (g.original_id(u), g.original_id(v));
            if a < b {
                lines.push((a, b));
            }
        }
    }
    lines.sort_unstable();
    let mut out = String::new();
    writeln!(out, "# {} nodes, {} undirected edges", g.node_count(), g.edge_count()).unwrap();
    for (a, b) in lines {
        writeln!(out, "{a} {b}").unwrap();
    }
    let path = path.as_ref();
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Writes the attribute table with the class label as the last column.
pub fn write_attributes(g: &AttributedGraph, path: impl AsRef<Path>, label_attr: &str) -> Result<()> {
    let schema = g.schema();
    let check = |s: &str| {
        if s.contains(',') || s.contains('\n') {
            Err(Error::argument(format!("value {s:?} cannot be written to a comma-separated file")))
        } else {
            Ok(())
        }
    };
    let mut out = String::from("node_id");
    for name in schema.attr_names() {
        check(name)?;
        out.push(',');
        out.push_str(name);
    }
    check(label_attr)?;
    writeln!(out, ",{label_attr}").unwrap();
    let mut order: Vec<_> = g.nodes().collect();
    order.sort_by_key(|&v| g.original_id(v));
    for v in order {
        write!(out, "{}", g.original_id(v)).unwrap();
        for a in 0..g.attr_count() {
            let value = &schema.levels(a)[g.attr(v, a) as usize];
            check(value)?;
            write!(out, ",{value}").unwrap();
        }
        let label = g.label(v).map(|c| schema.class_names()[c].as_str()).unwrap_or("");
        writeln!(out, ",{label}").unwrap();
    }
    let path = path.as_ref();
    fs::write(path, out).map_err(|e| Error::io(path, e))
}
