//! Edge-list and node-attribute files, and the bundled datasets.
//!
//! Node files are CSV with a `node` column followed by categorical attribute
//! columns. Edge files hold one pair of node labels per line, separated by a
//! tab, comma or spaces; lines starting with `#` are comments.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Attributes, Graph};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Builtin {
    Florentine,
    Karate,
    Fauxmesa,
}

impl Builtin {
    pub const ALL: [Builtin; 3] = [Builtin::Florentine, Builtin::Karate, Builtin::Fauxmesa];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Florentine => "florentine",
            Builtin::Karate => "karate",
            Builtin::Fauxmesa => "fauxmesa",
        }
    }

    fn sources(self) -> (&'static str, &'static str) {
        match self {
            Builtin::Florentine => (
                include_str!("../data/florentine/nodes.csv"),
                include_str!("../data/florentine/edges.tsv"),
            ),
            Builtin::Karate => (
                include_str!("../data/karate/nodes.csv"),
                include_str!("../data/karate/edges.tsv"),
            ),
            Builtin::Fauxmesa => (
                include_str!("../data/fauxmesa/nodes.csv"),
                include_str!("../data/fauxmesa/edges.tsv"),
            ),
        }
    }

    pub fn load(self) -> Result<Graph> {
        let (nodes, edges) = self.sources();
        let origin = Path::new(self.name());
        parse_graph(nodes, edges, &origin.join("nodes.csv"), &origin.join("edges.tsv"))
    }
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Builtin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Builtin::ALL
            .into_iter()
            .find(|b| b.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::config(format!("unknown builtin dataset `{s}`")))
    }
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Node labels and attribute columns from a node CSV.
pub fn parse_nodes(text: &str, path: &Path) -> Result<(Vec<String>, Attributes)> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let (hline, header) = lines.next().ok_or_else(|| parse_error(path, 1, "missing header"))?;
    let columns: Vec<&str> = header.split(',').map(str::trim).collect();
    if columns[0] != "node" {
        return Err(parse_error(path, hline, "first column must be `node`"));
    }
    let mut labels = Vec::new();
    let mut values: Vec<Vec<String>> = vec![Vec::new(); columns.len() - 1];
    for (lineno, line) in lines {
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != columns.len() {
            return Err(parse_error(
                path,
                lineno,
                format!("expected {} fields, found {}", columns.len(), fields.len()),
            ));
        }
        labels.push(fields[0].to_string());
        for (col, v) in values.iter_mut().zip(&fields[1..]) {
            col.push(v.to_string());
        }
    }
    let attributes: Attributes = columns[1..]
        .iter()
        .map(|c| c.to_string())
        .zip(values)
        .collect::<BTreeMap<_, _>>();
    Ok((labels, attributes))
}

/// Node-index pairs from an edge list over `labels`.
pub fn parse_edges(text: &str, path: &Path, labels: &[String]) -> Result<Vec<(usize, usize)>> {
    let index: BTreeMap<&str, usize> = labels.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();
    let mut edges = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line
            .split(|c: char| c == '\t' || c == ',' || c.is_whitespace())
            .filter(|f| !f.is_empty())
            .collect();
        if fields.len() != 2 {
            return Err(parse_error(path, i + 1, "expected two node labels"));
        }
        let lookup = |l: &str| {
            index
                .get(l)
                .copied()
                .ok_or_else(|| parse_error(path, i + 1, format!("unknown node `{l}`")))
        };
        let (a, b) = (lookup(fields[0])?, lookup(fields[1])?);
        if a == b {
            return Err(parse_error(path, i + 1, format!("self-loop on `{}`", fields[0])));
        }
        edges.push((a, b));
    }
    Ok(edges)
}

fn parse_graph(nodes: &str, edges: &str, nodes_path: &Path, edges_path: &Path) -> Result<Graph> {
    let (labels, attributes) = parse_nodes(nodes, nodes_path)?;
    let pairs = parse_edges(edges, edges_path, &labels)?;
    Graph::from_edge_list(labels.len(), &pairs, Some(attributes))?.with_labels(labels)
}

/// Reads a node CSV and edge list from disk.
pub fn load_files(nodes: &Path, edges: &Path) -> Result<Graph> {
    let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| Error::io(p, e));
    parse_graph(&read(nodes)?, &read(edges)?, nodes, edges)
}

/// Writes `g` as a tab-separated edge list of node labels.
pub fn write_edge_list<W: Write>(g: &Graph, mut out: W) -> std::io::Result<()> {
    for (i, j) in g.edges() {
        writeln!(out, "{}\t{}", g.label(i), g.label(j))?;
    }
    Ok(())
}
