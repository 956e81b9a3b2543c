//! Edge-list text format.
//!
//! The first data line is the node count `n`; each following line is `u v`
//! with 0-indexed decimal ids. `#` starts a comment, blank lines are
//! ignored. Writing emits each edge once with `u < v`, so write-then-read
//! is the identity on canonical graphs.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};

pub fn write_edge_list<W: Write>(g: &Graph, mut w: W) -> Result<()> {
    writeln!(w, "{}", g.node_count())?;
    for (u, v) in g.edges() {
        writeln!(w, "{} {}", u, v)?;
    }
    Ok(())
}

pub fn write_edge_list_file<P: AsRef<Path>>(g: &Graph, path: P) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_edge_list(g, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn read_edge_list<R: BufRead>(r: R) -> Result<Graph> {
    let mut n: Option<usize> = None;
    let mut edges: Vec<(NodeId, NodeId)> = Vec::new();
    for (idx, line) in r.lines().enumerate() {
        let line_no = idx + 1;
        let line = line?;
        let data = match line.split('#').next() {
            Some(d) => d.trim(),
            None => "",
        };
        if data.is_empty() {
            continue;
        }
        match n {
            None => {
                n = Some(data.parse().map_err(|_| Error::Parse {
                    line: line_no,
                    msg: format!("expected node count, got {:?}", data),
                })?);
            }
            Some(n) => {
                let mut it = data.split_whitespace();
                let u = parse_id(it.next(), data, line_no)?;
                let v = parse_id(it.next(), data, line_no)?;
                if it.next().is_some() {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: format!("expected `u v`, got {:?}", data),
                    });
                }
                if u as usize >= n || v as usize >= n {
                    return Err(Error::Parse {
                        line: line_no,
                        msg: format!("node id out of range 0..{} in {:?}", n, data),
                    });
                }
                edges.push((u, v));
            }
        }
    }
    let n = n.ok_or(Error::Parse {
        line: 0,
        msg: "empty file: missing node count".to_string(),
    })?;
    Graph::from_edge_list(&edges, n)
}

pub fn read_edge_list_file<P: AsRef<Path>>(path: P) -> Result<Graph> {
    read_edge_list(BufReader::new(File::open(path)?))
}

fn parse_id(tok: Option<&str>, data: &str, line_no: usize) -> Result<NodeId> {
    let tok = tok.ok_or_else(|| Error::Parse {
        line: line_no,
        msg: format!("expected `u v`, got {:?}", data),
    })?;
    tok.parse().map_err(|_| Error::Parse {
        line: line_no,
        msg: format!("invalid node id {:?}", tok),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_path() {
        let g = Graph::from_edge_list(&[(0, 1), (1, 2), (2, 3), (3, 4)], 5).unwrap();
        let mut buf = Vec::new();
        write_edge_list(&g, &mut buf).unwrap();
        let back = read_edge_list(&buf[..]).unwrap();
        assert_eq!(g, back);
    }

    #[test]
    fn reads_three_node_path() {
        let g = read_edge_list("3\n0 1\n1 2\n".as_bytes()).unwrap();
        assert_eq!(g.node_count(), 3);
        assert_eq!(g.edge_count(), 2);
        assert_eq!(g.neighbors(1), &[0, 2]);
    }

    #[test]
    fn bad_token_names_line() {
        let err = read_edge_list("3\n0 1\nx 2\n".as_bytes()).unwrap_err();
        match err {
            Error::Parse { line, msg } => {
                assert_eq!(line, 3);
                assert!(msg.contains('x'), "message should name the token: {msg}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn comments_and_blanks_ignored() {
        let g = read_edge_list("# header\n\n4\n0 1 # edge\n  \n2 3\n".as_bytes()).unwrap();
        assert_eq!(g.edge_count(), 2);
    }

    #[test]
    fn out_of_range_id_names_line() {
        let err = read_edge_list("2\n0 5\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
    }
}
