//! METIS/Chaco graph file format: reader and writer.
//!
//! Header is `n m [fmt]` with fmt in {0, 1, 10, 11}; adjacency lines are
//! 1-indexed. fmt selects node weights (10), edge weights (1) or both (11).

use std::collections::HashMap;
use std::io::{BufRead, Write};

use thiserror::Error;

use crate::graph::{Graph, NodeId};
use crate::solution::SeparatorSolution;

#[derive(Debug, Error, PartialEq)]
pub enum MetisError {
    #[error("line {0}: malformed header: {1}")]
    MalformedHeader(usize, String),
    #[error("line {0}: unsupported fmt code {1}")]
    UnsupportedFmt(usize, String),
    #[error("line {0}: expected integer, got '{1}'")]
    BadToken(usize, String),
    #[error("line {0}: index out of range: {1} (n = {2})")]
    IndexOutOfRange(usize, u64, usize),
    #[error("line {0}: self-loop at node {1}")]
    SelfLoop(usize, usize),
    #[error("line {0}: missing edge weight")]
    MissingEdgeWeight(usize),
    #[error("line {0}: asymmetric adjacency: edge ({1}, {2}) has no reverse (or weights differ)")]
    Asymmetric(usize, usize, usize),
    #[error("expected {0} adjacency lines, found {1}")]
    TruncatedFile(usize, usize),
    #[error("line {0}: weight must be >= 1")]
    ZeroWeight(usize),
    #[error("io error: {0}")]
    Io(String),
}

/// Parses a METIS graph. Parallel edges are merged by weight sum.
pub fn load_metis<R: BufRead>(reader: R) -> Result<Graph, MetisError> {
    let mut lines = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| MetisError::Io(e.to_string()))?;
        lines.push((i + 1, line));
    }
    let mut iter = lines
        .into_iter()
        .filter(|(_, l)| !l.trim_start().starts_with('%'));
    let (header_no, header) = iter
        .next()
        .ok_or_else(|| MetisError::MalformedHeader(1, "empty file".into()))?;
    let tokens: Vec<&str> = header.split_whitespace().collect();
    if tokens.len() < 2 || tokens.len() > 3 {
        return Err(MetisError::MalformedHeader(header_no, header.clone()));
    }
    let n: usize = tokens[0]
        .parse()
        .map_err(|_| MetisError::MalformedHeader(header_no, header.clone()))?;
    let m: usize = tokens[1]
        .parse()
        .map_err(|_| MetisError::MalformedHeader(header_no, header.clone()))?;
    let fmt = tokens.get(2).copied().unwrap_or("0");
    let (has_node_weights, has_edge_weights) = match fmt {
        "0" | "00" => (false, false),
        "1" | "01" => (false, true),
        "10" => (true, false),
        "11" => (true, true),
        other => return Err(MetisError::UnsupportedFmt(header_no, other.to_string())),
    };

    let mut node_weights = vec![1u64; n];
    // Directed view of the file for the symmetry check: (u, v) -> weight.
    let mut directed: HashMap<(NodeId, NodeId), u64> = HashMap::new();
    let mut arc_lines: HashMap<(NodeId, NodeId), usize> = HashMap::new();
    let mut count = 0usize;
    for v in 0..n {
        let Some((line_no, line)) = iter.next() else {
            return Err(MetisError::TruncatedFile(n, count));
        };
        count += 1;
        let mut tokens = line.split_whitespace();
        if has_node_weights {
            let tok = tokens
                .next()
                .ok_or_else(|| MetisError::BadToken(line_no, line.clone()))?;
            let w: u64 = tok
                .parse()
                .map_err(|_| MetisError::BadToken(line_no, tok.to_string()))?;
            if w == 0 {
                return Err(MetisError::ZeroWeight(line_no));
            }
            node_weights[v] = w;
        }
        while let Some(tok) = tokens.next() {
            let target: u64 = tok
                .parse()
                .map_err(|_| MetisError::BadToken(line_no, tok.to_string()))?;
            if target < 1 || target as usize > n {
                return Err(MetisError::IndexOutOfRange(line_no, target, n));
            }
            let u = target as usize - 1;
            if u == v {
                return Err(MetisError::SelfLoop(line_no, v + 1));
            }
            let w = if has_edge_weights {
                let tok = tokens.next().ok_or(MetisError::MissingEdgeWeight(line_no))?;
                let w: u64 = tok
                    .parse()
                    .map_err(|_| MetisError::BadToken(line_no, tok.to_string()))?;
                if w == 0 {
                    return Err(MetisError::ZeroWeight(line_no));
                }
                w
            } else {
                1
            };
            let key = (v as NodeId, u as NodeId);
            *directed.entry(key).or_insert(0) += w;
            arc_lines.entry(key).or_insert(line_no);
        }
    }
    // Symmetry: every arc must have a reverse of equal merged weight.
    for (&(u, v), &w) in &directed {
        match directed.get(&(v, u)) {
            Some(&rw) if rw == w => {}
            _ => {
                return Err(MetisError::Asymmetric(
                    arc_lines[&(u, v)],
                    u as usize + 1,
                    v as usize + 1,
                ))
            }
        }
    }
    let edges: Vec<_> = directed
        .into_iter()
        .filter(|&((u, v), _)| u < v)
        .map(|((u, v), w)| (u, v, w))
        .collect();
    let g = Graph::from_edges(n, &edges, Some(node_weights))
        .map_err(|e| MetisError::Io(e.to_string()))?;
    let _ = m; // header edge count is informational; merged count may differ
    Ok(g)
}

/// Writes a graph in METIS format. Emits fmt 11 when any weight differs from
/// one, fmt 10/1 when only one kind does, and fmt 0 otherwise.
pub fn write_metis<W: Write>(g: &Graph, mut out: W) -> std::io::Result<()> {
    let has_node_weights = g.nodes().any(|v| g.node_weight(v) != 1);
    let has_edge_weights = g
        .nodes()
        .any(|v| g.neighbors(v).any(|(_, w)| w != 1));
    let fmt = match (has_node_weights, has_edge_weights) {
        (false, false) => "",
        (false, true) => " 1",
        (true, false) => " 10",
        (true, true) => " 11",
    };
    writeln!(out, "{} {}{}", g.n(), g.m(), fmt)?;
    for v in g.nodes() {
        let mut tokens = Vec::new();
        if has_node_weights {
            tokens.push(g.node_weight(v).to_string());
        }
        for (u, w) in g.neighbors(v) {
            tokens.push((u + 1).to_string());
            if has_edge_weights {
                tokens.push(w.to_string());
            }
        }
        writeln!(out, "{}", tokens.join(" "))?;
    }
    Ok(())
}

/// Writes a separator solution: first line `n k separator_weight`, then one
/// assignment per node (label k = separator).
pub fn write_separator<W: Write>(sol: &SeparatorSolution, mut out: W) -> std::io::Result<()> {
    writeln!(
        out,
        "{} {} {}",
        sol.assignment().len(),
        sol.k,
        sol.separator_weight()
    )?;
    for &label in sol.assignment() {
        writeln!(out, "{label}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn parse(text: &str) -> Result<Graph, MetisError> {
        load_metis(Cursor::new(text))
    }

    #[test]
    fn p3_unit_weights() {
        let g = parse("3 2\n2\n1 3\n2\n").unwrap();
        assert_eq!(g.n(), 3);
        assert_eq!(g.m(), 2);
        assert!(g.has_edge(0, 1));
        assert!(g.has_edge(1, 2));
        assert!(g.nodes().all(|v| g.node_weight(v) == 1));
    }

    #[test]
    fn edge_weight_fmt() {
        let g = parse("2 1 1\n2 5\n1 5\n").unwrap();
        assert_eq!(g.m(), 1);
        assert_eq!(g.neighbors(0).next(), Some((1, 5)));
    }

    #[test]
    fn node_and_edge_weight_fmt() {
        let g = parse("2 1 11\n3 2 5\n4 1 5\n").unwrap();
        assert_eq!(g.node_weight(0), 3);
        assert_eq!(g.node_weight(1), 4);
        assert_eq!(g.neighbors(0).next(), Some((1, 5)));
    }

    #[test]
    fn index_out_of_range_reports_line() {
        let err = parse("3 2\n2\n1 4\n2\n").unwrap_err();
        assert_eq!(err, MetisError::IndexOutOfRange(3, 4, 3));
    }

    #[test]
    fn self_loop_rejected() {
        let err = parse("2 1\n1\n1\n").unwrap_err();
        assert_eq!(err, MetisError::SelfLoop(2, 1));
    }

    #[test]
    fn asymmetric_rejected() {
        let err = parse("3 2\n2\n3\n2\n").unwrap_err();
        assert!(matches!(err, MetisError::Asymmetric(_, _, _)));
    }

    #[test]
    fn malformed_header() {
        let err = parse("nope\n").unwrap_err();
        assert!(matches!(err, MetisError::MalformedHeader(1, _)));
    }

    #[test]
    fn comments_skipped() {
        let g = parse("% a comment\n3 2\n2\n1 3\n2\n").unwrap();
        assert_eq!(g.n(), 3);
    }

    #[test]
    fn round_trip_identity() {
        let g = parse("3 2 11\n2 2 7\n1 1 7 3 9\n5 2 9\n").unwrap();
        let mut buf = Vec::new();
        write_metis(&g, &mut buf).unwrap();
        let g2 = load_metis(Cursor::new(&buf)).unwrap();
        let mut buf2 = Vec::new();
        write_metis(&g2, &mut buf2).unwrap();
        assert_eq!(buf, buf2);
    }
}
