//! JSONL dataset ingestion with per-corpus adapters.
//!
//! Every adapter maps one JSON object per line onto [`DatasetRecord`].
//! String-or-list fields (sentence lists, multi-line summaries) are joined
//! with single spaces.

use std::collections::HashSet;
use std::io::{BufRead, BufReader};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::HarnessError;
use crate::segmenter::count_words;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    #[default]
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetRecord {
    pub id: String,
    pub document: String,
    pub aspect: String,
    pub reference_summary: String,
    pub split: Split,
}

/// Field aliases for one export format, tried in order.
struct Adapter {
    id: &'static [&'static str],
    document: &'static [&'static str],
    aspect: &'static [&'static str],
    summary: &'static [&'static str],
}

pub const ADAPTERS: &[&str] = &["jsonl", "manews", "oasum", "usb"];

fn adapter(name: &str) -> Option<Adapter> {
    Some(match name {
        "jsonl" => Adapter { id: &["id"], document: &["document"], aspect: &["aspect"], summary: &["summary"] },
        "manews" => Adapter {
            id: &["id", "doc_id"],
            document: &["article", "document", "text"],
            aspect: &["aspect", "aspect_name"],
            summary: &["summary", "aspect_summary"],
        },
        "oasum" => Adapter {
            id: &["id", "doc_id", "title"],
            document: &["document", "article", "text"],
            aspect: &["aspect"],
            summary: &["aspect_sents", "summary"],
        },
        "usb" => Adapter {
            id: &["id", "doc_id"],
            document: &["input_lines", "document", "source"],
            aspect: &["topic_name", "aspect", "topic"],
            summary: &["output_lines", "summary", "target"],
        },
        _ => return None,
    })
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadStats {
    /// Rows considered after the row cap (blank lines excluded).
    pub loaded: usize,
    pub kept: usize,
    pub skipped_malformed: usize,
    pub filtered_long: usize,
    /// `(line number, reason)` for each malformed row.
    pub malformed: Vec<(usize, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedDataset {
    pub records: Vec<DatasetRecord>,
    pub stats: LoadStats,
}

#[derive(Debug, Clone, Copy)]
pub struct LoadLimits {
    /// Only the first `max_records` rows are considered.
    pub max_records: usize,
    /// Documents must have strictly fewer words than this.
    pub max_record_words: usize,
}

impl LoadLimits {
    pub const NONE: LoadLimits = LoadLimits { max_records: usize::MAX, max_record_words: usize::MAX };
}

fn text_field(obj: &serde_json::Map<String, Value>, names: &[&str]) -> Option<String> {
    names.iter().find_map(|n| match obj.get(*n)? {
        Value::String(s) => Some(s.trim().to_string()),
        Value::Array(items) => {
            let parts: Vec<&str> = items.iter().filter_map(Value::as_str).map(str::trim).collect();
            (parts.len() == items.len()).then(|| parts.join(" "))
        }
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    })
}

fn parse_line(line: &str, adapter: &Adapter, line_no: usize) -> Result<DatasetRecord, String> {
    let value: Value = serde_json::from_str(line).map_err(|e| format!("invalid JSON: {e}"))?;
    let obj = value.as_object().ok_or("not a JSON object")?;
    let get = |names: &[&str], what: &str| {
        text_field(obj, names).filter(|s| !s.is_empty()).ok_or_else(|| format!("missing or empty {what}"))
    };
    let id = text_field(obj, adapter.id).filter(|s| !s.is_empty()).unwrap_or_else(|| format!("line{line_no}"));
    let split = match obj.get("split").and_then(Value::as_str) {
        None | Some("test") | Some("validation") | Some("valid") | Some("dev") => Split::Test,
        Some("train") => Split::Train,
        Some(other) => return Err(format!("unknown split {other:?}")),
    };
    Ok(DatasetRecord {
        id,
        document: get(adapter.document, "document")?,
        aspect: get(adapter.aspect, "aspect")?,
        reference_summary: get(adapter.summary, "summary")?,
        split,
    })
}

/// Loads a JSONL export. The row cap is applied first, then malformed rows
/// are dropped, then documents with `max_record_words` or more words.
pub fn load_dataset(path: &Path, adapter_id: &str, limits: LoadLimits) -> Result<LoadedDataset, HarnessError> {
    let adapter = adapter(adapter_id).ok_or_else(|| HarnessError::AdapterUnknown(adapter_id.to_string()))?;
    if !path.is_file() {
        return Err(HarnessError::FileNotFound(path.to_path_buf()));
    }
    let file = std::fs::File::open(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    let mut stats = LoadStats::default();
    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = match line {
            Ok(l) => l,
            Err(e) => {
                if stats.loaded >= limits.max_records {
                    break;
                }
                stats.loaded += 1;
                stats.skipped_malformed += 1;
                stats.malformed.push((line_no, format!("unreadable line: {e}")));
                continue;
            }
        };
        if line.trim().is_empty() {
            continue;
        }
        if stats.loaded >= limits.max_records {
            break;
        }
        stats.loaded += 1;
        let record = match parse_line(&line, &adapter, line_no) {
            Ok(r) if !seen.insert(r.id.clone()) => Err(format!("duplicate id {:?}", r.id)),
            other => other,
        };
        match record {
            Err(reason) => {
                log::warn!("{}:{line_no}: skipping malformed row: {reason}", path.display());
                stats.skipped_malformed += 1;
                stats.malformed.push((line_no, reason));
            }
            Ok(r) if count_words(&r.document) >= limits.max_record_words => stats.filtered_long += 1,
            Ok(r) => records.push(r),
        }
    }
    stats.kept = records.len();
    if records.is_empty() {
        return Err(HarnessError::EmptyAfterFilter);
    }
    Ok(LoadedDataset { records, stats })
}

pub fn write_jsonl<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), HarnessError> {
    use std::io::Write;
    let mut out = std::io::BufWriter::new(
        std::fs::File::create(path).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?,
    );
    for row in rows {
        serde_json::to_writer(&mut out, row).map_err(|e| HarnessError::Io(e.to_string()))?;
        out.write_all(b"\n").map_err(|e| HarnessError::Io(e.to_string()))?;
    }
    out.flush().map_err(|e| HarnessError::Io(e.to_string()))
}

/// Writes records in the native `jsonl` adapter format.
pub fn write_dataset(path: &Path, records: &[DatasetRecord]) -> Result<(), HarnessError> {
    let rows: Vec<Value> = records
        .iter()
        .map(|r| {
            serde_json::json!({
                "id": r.id,
                "document": r.document,
                "aspect": r.aspect,
                "summary": r.reference_summary,
                "split": r.split,
            })
        })
        .collect();
    write_jsonl(path, &rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn file(lines: &[String]) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        for l in lines {
            writeln!(f, "{l}").unwrap();
        }
        f
    }

    fn row(id: usize, words: usize) -> String {
        serde_json::json!({
            "id": format!("r{id}"),
            "document": vec!["w"; words].join(" "),
            "aspect": "a",
            "summary": "s",
        })
        .to_string()
    }

    #[test]
    fn loads_valid_rows() {
        let f = file(&[row(0, 5), row(1, 5), row(2, 5)]);
        let d = load_dataset(f.path(), "jsonl", LoadLimits::NONE).unwrap();
        assert_eq!(d.records.len(), 3);
        assert_eq!(d.records[1].id, "r1");
        assert_eq!(d.records[0].split, Split::Test);
    }

    #[test]
    fn row_cap_precedes_length_filter() {
        let lines: Vec<String> = (0..2500).map(|i| row(i, if i % 10 == 0 { 1500 } else { 10 })).collect();
        let f = file(&lines);
        let d = load_dataset(f.path(), "jsonl", LoadLimits { max_records: 2000, max_record_words: 1024 }).unwrap();
        assert_eq!(d.stats.loaded, 2000);
        assert_eq!(d.stats.filtered_long, 200);
        assert_eq!(d.stats.kept, 1800);
        assert_eq!(d.records.last().unwrap().id, "r1999");
    }

    #[test]
    fn long_record_excluded_and_boundary_is_strict() {
        let f = file(&[row(0, 1500), row(1, 1024), row(2, 1023)]);
        let d = load_dataset(f.path(), "jsonl", LoadLimits { max_records: 10, max_record_words: 1024 }).unwrap();
        assert_eq!(d.records.iter().map(|r| r.id.as_str()).collect::<Vec<_>>(), ["r2"]);
        assert_eq!(d.stats.filtered_long, 2);
    }

    #[test]
    fn malformed_rows_reported_with_line_numbers() {
        let f = file(&[
            row(0, 5),
            "{not json".into(),
            r#"{"id":"x","document":"d","aspect":"","summary":"s"}"#.into(),
            row(0, 5),
            "".into(),
            row(3, 5),
        ]);
        let d = load_dataset(f.path(), "jsonl", LoadLimits::NONE).unwrap();
        assert_eq!(d.records.len(), 2);
        assert_eq!(d.stats.malformed.iter().map(|m| m.0).collect::<Vec<_>>(), [2, 3, 4]);
        let s = &d.stats;
        assert_eq!(s.loaded, s.kept + s.skipped_malformed + s.filtered_long);
    }

    #[test]
    fn errors() {
        assert!(matches!(
            load_dataset(Path::new("/no/such/file.jsonl"), "jsonl", LoadLimits::NONE),
            Err(HarnessError::FileNotFound(_))
        ));
        let f = file(&[row(0, 5)]);
        assert!(matches!(load_dataset(f.path(), "nope", LoadLimits::NONE), Err(HarnessError::AdapterUnknown(_))));
        let f = file(&[row(0, 2000)]);
        assert!(matches!(
            load_dataset(f.path(), "jsonl", LoadLimits { max_records: 10, max_record_words: 1024 }),
            Err(HarnessError::EmptyAfterFilter)
        ));
    }

    #[test]
    fn usb_adapter_joins_lines() {
        let line = serde_json::json!({
            "id": "u1",
            "input_lines": ["First line.", "Second line."],
            "topic_name": "Career",
            "output_lines": ["Summary one.", "Summary two."],
        });
        let f = file(&[line.to_string()]);
        let d = load_dataset(f.path(), "usb", LoadLimits::NONE).unwrap();
        assert_eq!(d.records[0].document, "First line. Second line.");
        assert_eq!(d.records[0].aspect, "Career");
    }

    #[test]
    fn round_trips_native_format() {
        let recs = vec![DatasetRecord {
            id: "a".into(),
            document: "doc text".into(),
            aspect: "asp".into(),
            reference_summary: "sum".into(),
            split: Split::Train,
        }];
        let f = tempfile::NamedTempFile::new().unwrap();
        write_dataset(f.path(), &recs).unwrap();
        assert_eq!(load_dataset(f.path(), "jsonl", LoadLimits::NONE).unwrap().records, recs);
    }
}
