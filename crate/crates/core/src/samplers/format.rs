//! Line-oriented text format for crawl results.
//!
//! Node ids are the graph's original ids. Lines starting with `#` and blank
//! lines are ignored. A crawl sample is
//!
//! ```text
//! method RW
//! node 17
//! node 4
//! ```
//!
//! with one `node` line per unique visited node in visit order. A tour
//! collection is
//!
//! ```text
//! d_s 12
//! seed 3
//! seed 8
//! degree 17 4
//! tour 3 17 22 8
//! ```
//!
//! with one `seed` line per seed node, one `degree` line per interior node and
//! one `tour` line per completed tour, in sampling order.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{CrawlSample, Method, TourCollection};
use crate::error::{Error, Result};
use crate::graph::{AttributedGraph, NodeId};

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn records(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.trim();
        (!l.is_empty() && !l.starts_with('#')).then(|| (i + 1, l.split_whitespace().collect()))
    })
}

fn node(g: &AttributedGraph, path: &Path, line: usize, tok: &str) -> Result<NodeId> {
    let id: u64 = tok
        .parse()
        .map_err(|_| parse_err(path, line, format!("invalid node id {tok:?}")))?;
    g.node_by_original(id)
        .ok_or_else(|| parse_err(path, line, format!("node {id} not in graph")))
}

pub fn write_sample(g: &AttributedGraph, sample: &CrawlSample, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::from("# rlr-crawl crawl sample\n");
    writeln!(out, "method {}", sample.method).unwrap();
    for &v in &sample.visited {
        writeln!(out, "node {}", g.original_id(v)).unwrap();
    }
    let path = path.as_ref();
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_sample(g: &AttributedGraph, path: impl AsRef<Path>) -> Result<CrawlSample> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut method = None;
    let mut visited = Vec::new();
    for (line, toks) in records(&text) {
        match toks.as_slice() {
            ["method", m] => method = Some(m.parse::<Method>().map_err(|e| parse_err(path, line, e.to_string()))?),
            ["node", id] => visited.push(node(g, path, line, id)?),
            _ => return Err(parse_err(path, line, "expected `method <tag>` or `node <id>`")),
        }
    }
    let method = method.ok_or_else(|| parse_err(path, 1, "missing method line"))?;
    let sample = CrawlSample { method, visited };
    sample.validate(g)?;
    Ok(sample)
}

pub fn write_tours(g: &AttributedGraph, tours: &TourCollection, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::from("# rlr-crawl tour collection\n");
    writeln!(out, "d_s {}", tours.d_s).unwrap();
    for &s in &tours.seeds {
        writeln!(out, "seed {}", g.original_id(s)).unwrap();
    }
    for (&v, &d) in &tours.degrees {
        writeln!(out, "degree {} {d}", g.original_id(v)).unwrap();
    }
    for tour in &tours.tours {
        out.push_str("tour");
        for &v in tour {
            write!(out, " {}", g.original_id(v)).unwrap();
        }
        out.push('\n');
    }
    let path = path.as_ref();
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads a tour collection and validates it against `g`.
pub fn read_tours(g: &AttributedGraph, path: impl AsRef<Path>) -> Result<TourCollection> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut d_s = None;
    let mut seeds = Vec::new();
    let mut degrees = BTreeMap::new();
    let mut tours = Vec::new();
    for (line, toks) in records(&text) {
        match toks.as_slice() {
            ["d_s", n] => d_s = Some(n.parse::<usize>().map_err(|_| parse_err(path, line, "invalid d_s"))?),
            ["seed", id] => seeds.push(node(g, path, line, id)?),
            ["degree", id, d] => {
                let d = d.parse::<usize>().map_err(|_| parse_err(path, line, "invalid degree"))?;
                degrees.insert(node(g, path, line, id)?, d);
            }
            ["tour", rest @ ..] => tours.push(
                rest.iter()
                    .map(|t| node(g, path, line, t))
                    .collect::<Result<Vec<_>>>()?,
            ),
            _ => return Err(parse_err(path, line, "unrecognized record")),
        }
    }
    seeds.sort_unstable();
    let tc = TourCollection {
        seeds,
        d_s: d_s.ok_or_else(|| parse_err(path, 1, "missing d_s line"))?,
        tours,
        degrees,
    };
    tc.validate(g)?;
    Ok(tc)
}

#[cfg(test)]
mod tests {
    use super::super::{crawl_rw, sample_tours};
    use super::*;
    use crate::graph::test_graphs::*;

    fn tmp(name: &str) -> std::path::PathBuf {
        std::env::temp_dir().join(format!("rlr-fmt-{}-{name}", std::process::id()))
    }

    #[test]
    fn sample_round_trip() {
        let g = complete(6);
        let s = crawl_rw(&g, 2, 5, 7).unwrap();
        let p = tmp("sample.txt");
        write_sample(&g, &s, &p).unwrap();
        assert_eq!(read_sample(&g, &p).unwrap(), s);
    }

    #[test]
    fn tours_round_trip() {
        let edges = [(0, 1), (1, 2), (2, 3), (3, 0), (2, 4), (4, 5), (5, 2)];
        let g = from_edges(6, &edges, &[0; 6], 2);
        let t = sample_tours(&g, &[0, 5], 25, 6, 3).unwrap();
        let p = tmp("tours.txt");
        write_tours(&g, &t, &p).unwrap();
        assert_eq!(read_tours(&g, &p).unwrap(), t);
    }

    #[test]
    fn corrupted_tours_rejected() {
        let g = path(4);
        let p = tmp("bad-tours.txt");
        fs::write(&p, "d_s 1\nseed 0\ndegree 1 2\ntour 0 1 0\n").unwrap();
        assert!(read_tours(&g, &p).is_ok());
        fs::write(&p, "d_s 2\nseed 0\ndegree 1 2\ntour 0 1 0\n").unwrap();
        assert!(matches!(read_tours(&g, &p), Err(Error::Data(_))));
        fs::write(&p, "d_s 1\nseed 0\ndegree 2 2\ntour 0 2 0\n").unwrap();
        assert!(matches!(read_tours(&g, &p), Err(Error::Data(_))));
    }
}
