//! Plain-text edge lists: a `# nodes=N` header, then one `i j` pair per line.

use std::fmt::Write as _;
use std::path::Path;

use super::Graph;
use crate::error::{Error, Result};

pub fn format_edge_list(g: &Graph) -> String {
    let mut out = format!("# nodes={}\n", g.node_count());
    for (i, j) in g.edges() {
        let _ = writeln!(out, "{i} {j}");
    }
    out
}

pub fn parse_edge_list(text: &str) -> Result<Graph> {
    let mut nodes: Option<usize> = None;
    let mut edges = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(v) = comment.trim().strip_prefix("nodes=") {
                let n = v
                    .trim()
                    .parse::<usize>()
                    .map_err(|e| Error::parse(Some(line_no), format!("bad node count: {e}")))?;
                nodes = Some(n);
            }
            continue;
        }
        let mut parts = line.split_whitespace();
        let mut field = |name: &str| -> Result<usize> {
            parts
                .next()
                .ok_or_else(|| Error::parse(Some(line_no), format!("missing {name} endpoint")))?
                .parse::<usize>()
                .map_err(|e| Error::parse(Some(line_no), format!("bad {name} endpoint: {e}")))
        };
        let i = field("first")?;
        let j = field("second")?;
        if parts.next().is_some() {
            return Err(Error::parse(Some(line_no), "expected exactly two endpoints"));
        }
        edges.push((i, j, line_no));
    }
    let n = nodes.ok_or_else(|| Error::parse(None, "missing `# nodes=N` header"))?;
    let mut g = Graph::empty(n);
    for (i, j, line_no) in edges {
        g.add_edge(i, j)
            .map_err(|e| Error::parse(Some(line_no), e.to_string()))?;
    }
    Ok(g)
}

pub fn write_edge_list(g: &Graph, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_edge_list(g)).map_err(|e| Error::io(path, e))
}

pub fn read_edge_list(path: impl AsRef<Path>) -> Result<Graph> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_edge_list(&text).map_err(|e| e.at_path(path))
}
