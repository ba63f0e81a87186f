//! Sample records, label sets, and dataset loading.
//!
//! Datasets arrive as JSON Lines or CSV. Both carry a text, a gold label,
//! and an optional stable id; when the id column is absent one is
//! synthesized from the zero-padded row index so outcome logs stay joinable
//! across runs.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: unknown label {label:?}")]
    UnknownLabel { line: usize, label: String },
    #[error("line {line}: duplicate sample id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("invalid label set: {0}")]
    InvalidLabelSet(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Ordered set of class labels. The order is load-bearing: it breaks argmax
/// ties and fixes the scanning order when parsing free-text responses.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct LabelSet {
    labels: Vec<String>,
}

impl LabelSet {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self, DatasetError> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() < 2 {
            return Err(DatasetError::InvalidLabelSet(format!(
                "need at least 2 labels, got {}",
                labels.len()
            )));
        }
        let mut seen = HashSet::new();
        for l in &labels {
            if l.is_empty() {
                return Err(DatasetError::InvalidLabelSet("empty label".into()));
            }
            if !seen.insert(l.clone()) {
                return Err(DatasetError::InvalidLabelSet(format!(
                    "duplicate label {l:?}"
                )));
            }
        }
        Ok(LabelSet { labels })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn contains(&self, label: &str) -> bool {
        self.labels.iter().any(|l| l == label)
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }
}

impl TryFrom<Vec<String>> for LabelSet {
    type Error = String;

    fn try_from(labels: Vec<String>) -> Result<Self, String> {
        LabelSet::new(labels).map_err(|e| e.to_string())
    }
}

impl From<LabelSet> for Vec<String> {
    fn from(set: LabelSet) -> Vec<String> {
        set.labels
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextSample {
    pub id: String,
    pub text: String,
    pub label: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    Jsonl,
    Csv,
}

#[derive(Clone, Debug)]
pub struct Dataset {
    pub name: String,
    pub samples: Vec<TextSample>,
    pub label_set: LabelSet,
}

/// Raw record shape shared by both formats. Extra fields in the source data
/// are ignored; only config files are strict about unknown keys.
#[derive(Deserialize)]
struct RawRecord {
    text: String,
    label: String,
    #[serde(default)]
    id: Option<String>,
}

fn synthesized_id(index: usize) -> String {
    format!("{index:06}")
}

fn admit(
    raw: RawRecord,
    line: usize,
    index: usize,
    label_set: &LabelSet,
    seen_ids: &mut HashSet<String>,
    samples: &mut Vec<TextSample>,
) -> Result<(), DatasetError> {
    if raw.text.trim().is_empty() {
        return Err(DatasetError::Malformed {
            line,
            message: "empty text".into(),
        });
    }
    if !label_set.contains(&raw.label) {
        return Err(DatasetError::UnknownLabel {
            line,
            label: raw.label,
        });
    }
    let id = raw.id.unwrap_or_else(|| synthesized_id(index));
    if !seen_ids.insert(id.clone()) {
        return Err(DatasetError::DuplicateId { line, id });
    }
    samples.push(TextSample {
        id,
        text: raw.text,
        label: raw.label,
    });
    Ok(())
}

/// Loads a dataset, validating every label against `label_set`. The dataset
/// name defaults to the file stem.
pub fn load_dataset(
    path: &Path,
    format: DatasetFormat,
    label_set: &LabelSet,
) -> Result<Dataset, DatasetError> {
    let mut samples = Vec::new();
    let mut seen_ids = HashSet::new();
    match format {
        DatasetFormat::Jsonl => {
            let reader = BufReader::new(File::open(path)?);
            let mut index = 0;
            for (line_idx, line) in reader.lines().enumerate() {
                let line_no = line_idx + 1;
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let raw: RawRecord =
                    serde_json::from_str(&line).map_err(|e| DatasetError::Malformed {
                        line: line_no,
                        message: e.to_string(),
                    })?;
                admit(raw, line_no, index, label_set, &mut seen_ids, &mut samples)?;
                index += 1;
            }
        }
        DatasetFormat::Csv => {
            let mut reader = csv::Reader::from_path(path).map_err(csv_open_error)?;
            let headers = reader.headers().map_err(csv_open_error)?.clone();
            for col in ["text", "label"] {
                if !headers.iter().any(|h| h == col) {
                    return Err(DatasetError::Malformed {
                        line: 1,
                        message: format!("missing required column {col:?}"),
                    });
                }
            }
            for (index, row) in reader.deserialize::<RawRecord>().enumerate() {
                let line_no = index + 2;
                let raw = row.map_err(|e| DatasetError::Malformed {
                    line: line_no,
                    message: e.to_string(),
                })?;
                admit(raw, line_no, index, label_set, &mut seen_ids, &mut samples)?;
            }
        }
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".to_string());
    Ok(Dataset {
        name,
        samples,
        label_set: label_set.clone(),
    })
}

fn csv_open_error(e: csv::Error) -> DatasetError {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => DatasetError::Io(io),
        other => DatasetError::Malformed {
            line: 1,
            message: format!("{other:?}"),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn labels() -> LabelSet {
        LabelSet::new(["positive", "negative"]).unwrap()
    }

    fn write_temp(contents: &str, suffix: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(suffix).tempfile().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f.flush().unwrap();
        f
    }

    #[test]
    fn label_set_requires_two_distinct_labels() {
        assert!(LabelSet::new(["only"]).is_err());
        assert!(LabelSet::new(["a", "a"]).is_err());
        assert!(LabelSet::new(["a", ""]).is_err());
        let set = LabelSet::new(["a", "b", "c"]).unwrap();
        assert_eq!(set.index_of("b"), Some(1));
        assert_eq!(set.index_of("z"), None);
    }

    #[test]
    fn jsonl_loads_and_synthesizes_ids() {
        let f = write_temp(
            concat!(
                "{\"text\": \"fine film\", \"label\": \"positive\"}\n",
                "\n",
                "{\"text\": \"dull plot\", \"label\": \"negative\", \"id\": \"mr-17\"}\n",
            ),
            ".jsonl",
        );
        let ds = load_dataset(f.path(), DatasetFormat::Jsonl, &labels()).unwrap();
        assert_eq!(ds.samples.len(), 2);
        assert_eq!(ds.samples[0].id, "000000");
        assert_eq!(ds.samples[1].id, "mr-17");
        assert_eq!(ds.samples[1].label, "negative");
    }

    #[test]
    fn jsonl_unknown_label_names_line_and_label() {
        let f = write_temp(
            "{\"text\": \"x y\", \"label\": \"positive\"}\n{\"text\": \"y z\", \"label\": \"neutral\"}\n",
            ".jsonl",
        );
        let err = load_dataset(f.path(), DatasetFormat::Jsonl, &labels()).unwrap_err();
        match err {
            DatasetError::UnknownLabel { line, label } => {
                assert_eq!(line, 2);
                assert_eq!(label, "neutral");
            }
            other => panic!("unexpected error: {other}"),
        }
    }

    #[test]
    fn jsonl_malformed_record_names_line() {
        let f = write_temp("{\"text\": \"ok\", \"label\": \"positive\"}\nnot json\n", ".jsonl");
        let err = load_dataset(f.path(), DatasetFormat::Jsonl, &labels()).unwrap_err();
        assert!(matches!(err, DatasetError::Malformed { line: 2, .. }));
    }

    #[test]
    fn empty_text_rejected() {
        let f = write_temp("{\"text\": \"   \", \"label\": \"positive\"}\n", ".jsonl");
        let err = load_dataset(f.path(), DatasetFormat::Jsonl, &labels()).unwrap_err();
        assert!(matches!(err, DatasetError::Malformed { line: 1, .. }));
    }

    #[test]
    fn duplicate_ids_rejected() {
        let f = write_temp(
            concat!(
                "{\"text\": \"a b\", \"label\": \"positive\", \"id\": \"s1\"}\n",
                "{\"text\": \"c d\", \"label\": \"negative\", \"id\": \"s1\"}\n",
            ),
            ".jsonl",
        );
        let err = load_dataset(f.path(), DatasetFormat::Jsonl, &labels()).unwrap_err();
        assert!(matches!(err, DatasetError::DuplicateId { line: 2, .. }));
    }

    #[test]
    fn csv_handles_quoted_fields() {
        let f = write_temp(
            "text,label\n\"Net sales, as reported, rose\",positive\nweak outlook,negative\n",
            ".csv",
        );
        let ds = load_dataset(f.path(), DatasetFormat::Csv, &labels()).unwrap();
        assert_eq!(ds.samples[0].text, "Net sales, as reported, rose");
        assert_eq!(ds.samples[0].id, "000000");
        assert_eq!(ds.samples[1].id, "000001");
    }

    #[test]
    fn csv_with_id_column() {
        let f = write_temp(
            "text,label,id\ngreat watch,positive,r1\nterrible watch,negative,r2\n",
            ".csv",
        );
        let ds = load_dataset(f.path(), DatasetFormat::Csv, &labels()).unwrap();
        assert_eq!(ds.samples[1].id, "r2");
    }

    #[test]
    fn csv_missing_column_reported() {
        let f = write_temp("text,sentiment\nok,positive\n", ".csv");
        let err = load_dataset(f.path(), DatasetFormat::Csv, &labels()).unwrap_err();
        assert!(matches!(err, DatasetError::Malformed { line: 1, .. }));
    }

    #[test]
    fn loads_a_thousand_records_quickly() {
        let mut body = String::new();
        for i in 0..1000 {
            body.push_str(&format!(
                "{{\"text\": \"sample number {i} body\", \"label\": \"positive\"}}\n"
            ));
        }
        let f = write_temp(&body, ".jsonl");
        let ds = load_dataset(f.path(), DatasetFormat::Jsonl, &labels()).unwrap();
        assert_eq!(ds.samples.len(), 1000);
        assert_eq!(ds.samples[999].id, "000999");
    }
}
