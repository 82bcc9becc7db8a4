//! File formats for the pipeline's inputs and outputs.
//!
//! * votes: CSV, header row = LF names, cells in `{-1, 0, 1}`
//! * gold labels: CSV with a single `y` column, blank = unlabeled
//! * embeddings: JSON `{"lf_names": [...], "dim": d, "vectors": [[...], ...]}`
//! * task config: JSON
//! * similarity: JSON `{"kind": ..., "m": ..., "rows": [[...]]}` plus a heatmap CSV
//! * structure: JSON `{"removed", "survivors", "anchors", "edges"}`

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::data::{
    DependencyStructure, EmbeddingSet, GoldLabels, SimilarityKind, SimilarityMatrix, TaskConfig, VoteMatrix,
};
use crate::error::{Error, Result};

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    serde_json::from_reader(open(path)?).map_err(|e| Error::malformed(what, format!("{}: {e}", path.display())))
}

/// Pretty JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| Error::malformed("json output", e))?;
    w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn parse_votes_csv<R: Read>(reader: R) -> Result<VoteMatrix> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let names: Vec<String> = rdr
        .headers()
        .map_err(|e| Error::malformed("votes csv", e))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    let mut rows = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(|e| Error::malformed("votes csv", e))?;
        let parsed = record
            .iter()
            .enumerate()
            .map(|(col, cell)| {
                cell.trim().parse::<i64>().map_err(|_| {
                    Error::malformed(
                        "votes csv",
                        format!("row {row}, column {col}: `{cell}` is not an integer"),
                    )
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(parsed);
    }
    VoteMatrix::new(names, rows)
}

pub fn read_votes(path: &Path) -> Result<VoteMatrix> {
    parse_votes_csv(open(path)?)
}

pub fn votes_to_csv(votes: &VoteMatrix) -> String {
    let mut out = votes.lf_names().join(",");
    out.push('\n');
    for row in votes.rows() {
        let cells: Vec<String> = row.iter().map(i8::to_string).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn write_votes(path: &Path, votes: &VoteMatrix) -> Result<()> {
    write_text(path, &votes_to_csv(votes))
}

/// Parsed by hand: a blank line is an unlabeled example, which a CSV reader
/// would skip.
pub fn parse_gold_csv<R: Read>(mut reader: R) -> Result<GoldLabels> {
    let mut text = String::new();
    reader
        .read_to_string(&mut text)
        .map_err(|e| Error::malformed("gold csv", e))?;
    let body = text.strip_suffix('\n').unwrap_or(&text);
    let mut lines = body.split('\n').map(|l| l.strip_suffix('\r').unwrap_or(l));
    if lines.next().map(str::trim) != Some("y") {
        return Err(Error::malformed("gold csv", "expected a single column named `y`"));
    }
    let mut labels = Vec::new();
    for (row, line) in lines.enumerate() {
        let cell = line.trim();
        if cell.is_empty() {
            labels.push(None);
            continue;
        }
        let v: i8 = cell
            .parse()
            .map_err(|_| Error::malformed("gold csv", format!("row {row}: `{cell}` is not -1 or 1")))?;
        labels.push(Some(v));
    }
    GoldLabels::new(labels)
}

pub fn read_gold(path: &Path) -> Result<GoldLabels> {
    parse_gold_csv(open(path)?)
}

pub fn gold_to_csv(gold: &GoldLabels) -> String {
    let mut out = String::from("y\n");
    for label in gold.labels() {
        if let Some(v) = label {
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    out
}

pub fn write_gold(path: &Path, gold: &GoldLabels) -> Result<()> {
    write_text(path, &gold_to_csv(gold))
}

pub fn parse_embeddings_json(text: &str) -> Result<EmbeddingSet> {
    let set: EmbeddingSet = serde_json::from_str(text).map_err(|e| Error::malformed("embeddings json", e))?;
    set.validate()?;
    Ok(set)
}

pub fn read_embeddings(path: &Path) -> Result<EmbeddingSet> {
    let set: EmbeddingSet = read_json(path, "embeddings json")?;
    set.validate()?;
    Ok(set)
}

pub fn read_config(path: &Path) -> Result<TaskConfig> {
    let cfg: TaskConfig = read_json(path, "task config json")?;
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Serialize, Deserialize)]
struct SimilarityFile {
    kind: SimilarityKind,
    m: usize,
    rows: Vec<Vec<f64>>,
}

pub fn similarity_to_json(matrix: &SimilarityMatrix) -> serde_json::Value {
    serde_json::to_value(SimilarityFile {
        kind: matrix.kind(),
        m: matrix.m(),
        rows: matrix.rows(),
    })
    .expect("similarity matrix serializes")
}

pub fn parse_similarity_json(text: &str) -> Result<SimilarityMatrix> {
    let file: SimilarityFile = serde_json::from_str(text).map_err(|e| Error::malformed("similarity json", e))?;
    if file.rows.len() != file.m {
        return Err(Error::DimensionMismatch {
            axis: "similarity m",
            expected: file.m,
            found: file.rows.len(),
        });
    }
    SimilarityMatrix::from_rows(file.kind, file.rows)
}

pub fn read_similarity(path: &Path) -> Result<SimilarityMatrix> {
    let mut text = String::new();
    open(path)?.read_to_string(&mut text).map_err(|e| Error::io(path, e))?;
    parse_similarity_json(&text)
}

/// Square CSV with LF names as header row and first column.
pub fn similarity_heatmap_csv(matrix: &SimilarityMatrix, names: &[String]) -> String {
    let mut out = String::from("lf");
    for name in names {
        out.push(',');
        out.push_str(name);
    }
    out.push('\n');
    for (i, row) in matrix.rows().iter().enumerate() {
        out.push_str(&names[i]);
        for v in row {
            out.push(',');
            out.push_str(&v.to_string());
        }
        out.push('\n');
    }
    out
}

pub fn read_structure(path: &Path) -> Result<DependencyStructure> {
    read_json(path, "structure json")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn votes_csv_parses_and_prints() {
        let text = "a,b,c\n1,0,-1\n-1,-1,1\n";
        let votes = parse_votes_csv(text.as_bytes()).unwrap();
        assert_eq!(votes.n(), 2);
        assert_eq!(votes.get(1, 2), 1);
        assert_eq!(votes_to_csv(&votes), text);
    }

    #[test]
    fn votes_csv_rejects_bad_cells() {
        assert!(parse_votes_csv("a,b\n1,2\n".as_bytes())
            .unwrap_err()
            .to_string()
            .contains("out-of-range vote"));
        assert!(matches!(
            parse_votes_csv("a,b\n1,x\n".as_bytes()),
            Err(Error::Malformed { .. })
        ));
        assert!(parse_votes_csv("a,a\n1,1\n".as_bytes()).is_err());
    }

    #[test]
    fn gold_csv_blank_is_unlabeled() {
        let gold = parse_gold_csv("y\n1\n\n-1\n".as_bytes()).unwrap();
        assert_eq!(gold.labels(), &[Some(1), None, Some(-1)]);
        assert_eq!(gold_to_csv(&gold), "y\n1\n\n-1\n");
        assert!(parse_gold_csv("y\n0\n".as_bytes()).is_err());
        assert!(parse_gold_csv("label\n1\n".as_bytes()).is_err());
    }

    #[test]
    fn embeddings_json_shape() {
        let set = parse_embeddings_json(r#"{"lf_names":["a","b"],"dim":2,"vectors":[[1,0],[0.5,0.25]]}"#).unwrap();
        assert_eq!(set.vectors[1], vec![0.5, 0.25]);
        let err = parse_embeddings_json(r#"{"lf_names":["a","b"],"dim":2,"vectors":[[1,0],[0.5]]}"#).unwrap_err();
        assert!(err.to_string().contains("dimension disagreement"));
    }

    #[test]
    fn similarity_json_round_trip() {
        let m = SimilarityMatrix::from_rows(SimilarityKind::Cosine, vec![vec![1.0, 0.3], vec![0.3, 1.0]]).unwrap();
        let text = serde_json::to_string(&similarity_to_json(&m)).unwrap();
        assert!(text.contains(r#""kind":"cosine""#));
        assert_eq!(parse_similarity_json(&text).unwrap(), m);
    }

    #[test]
    fn structure_json_shape() {
        let s = DependencyStructure {
            removed: vec![3],
            survivors: vec![0, 1, 2],
            anchors: Some([0, 2]),
            edges: vec![],
        };
        let text = serde_json::to_string(&s).unwrap();
        assert_eq!(
            text,
            r#"{"removed":[3],"survivors":[0,1,2],"anchors":[0,2],"edges":[]}"#
        );
    }
}
