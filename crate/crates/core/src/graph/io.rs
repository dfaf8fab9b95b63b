//! Node/edge file formats.
//!
//! Node file: JSON lines `{"id": int, "text": str, "label": int|null, "split": "train"|"val"|"test"}`.
//! Edge file: whitespace-separated id pairs, one per line, `#` starts a comment.
//! Either file may be gzip-compressed; compression is detected from the magic bytes.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use serde::{Deserialize, Serialize};

use super::tag::{Split, TextAttributedGraph};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NodeRecord {
    id: u64,
    text: String,
    label: Option<usize>,
    split: Split,
}

/// Opens a file for line reading, transparently decompressing gzip.
pub fn open_lines(path: &Path) -> Result<Box<dyn BufRead>> {
    let mut file = File::open(path)?;
    let mut magic = [0u8; 2];
    let n = file.read(&mut magic)?;
    let file = File::open(path)?;
    if n == 2 && magic == [0x1f, 0x8b] {
        Ok(Box::new(BufReader::new(MultiGzDecoder::new(file))))
    } else {
        Ok(Box::new(BufReader::new(file)))
    }
}

/// Creates a writer; a `.gz` extension selects gzip output.
pub fn create_writer(path: &Path) -> Result<Box<dyn Write>> {
    let file = BufWriter::new(File::create(path)?);
    if path.extension().is_some_and(|e| e == "gz") {
        Ok(Box::new(GzEncoder::new(file, Compression::default())))
    } else {
        Ok(Box::new(file))
    }
}

fn parse_err(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

pub fn load_tag(nodes_path: &Path, edges_path: &Path) -> Result<TextAttributedGraph> {
    let mut ids = Vec::new();
    let mut texts = Vec::new();
    let mut labels = Vec::new();
    let mut splits = Vec::new();
    for (i, line) in open_lines(nodes_path)?.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: NodeRecord = serde_json::from_str(&line).map_err(|e| parse_err(nodes_path, i + 1, e.to_string()))?;
        ids.push(rec.id);
        texts.push(rec.text);
        labels.push(rec.label);
        splits.push(rec.split);
    }
    let mut index = HashMap::with_capacity(ids.len());
    for (i, &id) in ids.iter().enumerate() {
        if index.insert(id, i).is_some() {
            return Err(Error::Validation(format!("duplicate node id {id}")));
        }
    }

    let mut edges = Vec::new();
    for (i, line) in open_lines(edges_path)?.lines().enumerate() {
        let line = line?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut parts = content.split_whitespace();
        let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(parse_err(edges_path, i + 1, "expected exactly two node ids"));
        };
        let parse = |s: &str| s.parse::<u64>().map_err(|e| parse_err(edges_path, i + 1, format!("bad id `{s}`: {e}")));
        let (a, b) = (parse(a)?, parse(b)?);
        let lookup = |id: u64| {
            index
                .get(&id)
                .copied()
                .ok_or_else(|| Error::Validation(format!("edge on line {} references unknown node {id}", i + 1)))
        };
        edges.push((lookup(a)?, lookup(b)?));
    }
    let num_classes = labels.iter().flatten().max().map_or(0, |&c| c + 1);
    TextAttributedGraph::new(ids, edges, texts, labels, splits, num_classes)
}

pub fn write_tag(graph: &TextAttributedGraph, nodes_path: &Path, edges_path: &Path) -> Result<()> {
    let mut w = create_writer(nodes_path)?;
    for v in 0..graph.node_count() {
        let rec = NodeRecord {
            id: graph.ids()[v],
            text: graph.text(v).to_string(),
            label: graph.label(v),
            split: graph.split(v),
        };
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    drop(w);
    let mut w = create_writer(edges_path)?;
    writeln!(w, "# undirected edges, one pair per line")?;
    for (a, b) in graph.edges() {
        writeln!(w, "{} {}", graph.ids()[a], graph.ids()[b])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    fn write(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
        let p = dir.join(name);
        fs::write(&p, body).unwrap();
        p
    }

    const NODES: &str = r#"{"id": 0, "text": "alpha beta", "label": 0, "split": "train"}
{"id": 1, "text": "gamma", "label": null, "split": "test"}
"#;

    #[test]
    fn loads_symmetrized_graph() {
        let dir = tempfile::tempdir().unwrap();
        let n = write(dir.path(), "n.jsonl", NODES);
        let e = write(dir.path(), "e.txt", "# header\n0 1\n0 1  # duplicate\n0 0\n");
        let g = load_tag(&n, &e).unwrap();
        assert_eq!(g.node_count(), 2);
        assert_eq!(g.edge_count(), 1);
        assert!(g.has_edge(1, 0));
        assert_eq!(g.label(1), None);
        assert_eq!(g.num_classes(), 1);
    }

    #[test]
    fn reports_line_numbers_and_dangling_edges() {
        let dir = tempfile::tempdir().unwrap();
        let bad = write(dir.path(), "bad.jsonl", "{\"id\": 0, \"text\": \"x\", \"label\": 0, \"split\": \"train\"}\n{oops}\n");
        let e = write(dir.path(), "e.txt", "");
        match load_tag(&bad, &e) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
        let n = write(dir.path(), "n.jsonl", NODES);
        let dangling = write(dir.path(), "d.txt", "0 9\n");
        assert!(matches!(load_tag(&n, &dangling), Err(Error::Validation(_))));
        let dup = write(dir.path(), "dup.jsonl", "{\"id\": 3, \"text\": \"x\", \"label\": 0, \"split\": \"train\"}\n{\"id\": 3, \"text\": \"y\", \"label\": 0, \"split\": \"val\"}\n");
        assert!(matches!(load_tag(&dup, &e), Err(Error::Validation(_))));
    }

    #[test]
    fn gzip_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let n = write(dir.path(), "n.jsonl", NODES);
        let e = write(dir.path(), "e.txt", "0 1\n");
        let g = load_tag(&n, &e).unwrap();
        let (nz, ez) = (dir.path().join("n.jsonl.gz"), dir.path().join("e.txt.gz"));
        write_tag(&g, &nz, &ez).unwrap();
        assert_eq!(load_tag(&nz, &ez).unwrap(), g);
    }
}
