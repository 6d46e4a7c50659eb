use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One labelled tweet as read from the source CSV.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RawRecord {
    /// 1-based line number of the row in the source file.
    pub line: usize,
    pub text: String,
    pub label: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct IngestReport {
    pub rows: usize,
    pub skipped: usize,
    /// `(line, reason)` for every skipped row.
    pub problems: Vec<(usize, String)>,
}

const TEXT_COLUMNS: &[&str] = &["tweet_text", "text", "tweet"];
const LABEL_COLUMNS: &[&str] = &["cyberbullying_type", "label", "class"];

fn find_column(headers: &csv::StringRecord, names: &[&str]) -> Option<usize> {
    names.iter().find_map(|n| {
        headers
            .iter()
            .position(|h| h.trim().eq_ignore_ascii_case(n))
    })
}

/// Reads a headered CSV with a text column and a class column.
///
/// Rows that fail to parse, have too few fields or an empty text are
/// skipped and reported; a missing column is an error.
pub fn ingest_csv(path: impl AsRef<Path>) -> Result<(Vec<RawRecord>, IngestReport)> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    ingest_reader(file)
}

pub fn ingest_reader<R: std::io::Read>(reader: R) -> Result<(Vec<RawRecord>, IngestReport)> {
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let text_col = find_column(&headers, TEXT_COLUMNS)
        .ok_or_else(|| Error::MissingColumn(TEXT_COLUMNS[0].into()))?;
    let label_col = find_column(&headers, LABEL_COLUMNS)
        .ok_or_else(|| Error::MissingColumn(LABEL_COLUMNS[0].into()))?;

    let mut records = Vec::new();
    let mut report = IngestReport::default();
    let mut row = csv::StringRecord::new();
    loop {
        let line = rdr.position().line() as usize;
        match rdr.read_record(&mut row) {
            Ok(false) => break,
            Ok(true) => {
                let line = row.position().map_or(line, |p| p.line() as usize);
                match (row.get(text_col), row.get(label_col)) {
                    (Some(text), Some(label))
                        if !text.trim().is_empty() && !label.trim().is_empty() =>
                    {
                        records.push(RawRecord {
                            line,
                            text: text.to_string(),
                            label: label.trim().to_string(),
                        });
                    }
                    (Some(_), Some(_)) => {
                        report.problems.push((line, "empty text or label".into()))
                    }
                    _ => report.problems.push((
                        line,
                        format!("expected at least {} fields", text_col.max(label_col) + 1),
                    )),
                }
            }
            Err(e) => {
                let line = e.position().map_or(line, |p| p.line() as usize);
                if !e.is_io_error() && matches!(e.kind(), csv::ErrorKind::Utf8 { .. }) {
                    report.problems.push((line, "invalid UTF-8".into()));
                    continue;
                }
                return Err(e.into());
            }
        }
    }
    report.rows = records.len();
    report.skipped = report.problems.len();
    Ok((records, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_rows() {
        let data = "tweet_text,cyberbullying_type\nhello there,age\n\"a, b\",gender\n";
        let (recs, rep) = ingest_reader(data.as_bytes()).unwrap();
        assert_eq!(rep.rows, 2);
        assert_eq!(recs[0].text, "hello there");
        assert_eq!(recs[0].label, "age");
        assert_eq!(recs[0].line, 2);
        assert_eq!(recs[1].text, "a, b");
        assert_eq!(recs[1].line, 3);
    }

    #[test]
    fn short_and_empty_rows_are_skipped() {
        let data = "text,label\nok,age\nonly\n,age\nfine,religion\n";
        let (recs, rep) = ingest_reader(data.as_bytes()).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(rep.skipped, 2);
        assert_eq!(rep.problems[0].0, 3);
        assert_eq!(rep.problems[1].0, 4);
    }

    #[test]
    fn missing_column() {
        let err = ingest_reader("foo,label\nx,y\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::MissingColumn(_)));
    }
}
