use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use super::LogRecord;
use crate::error::{Error, Result};

/// Line accounting for one ingestion pass.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestStats {
    pub lines: usize,
    pub accepted: usize,
    /// Malformed or incomplete lines that were dropped.
    pub skipped: usize,
    /// Whitespace-only lines; neither accepted nor skipped.
    pub blank: usize,
}

/// Parses newline-delimited JSON log records from `reader`.
///
/// Lines that fail to decode, lack a required key, or carry a negative
/// dwell time are dropped and counted in [`IngestStats::skipped`]. Only
/// read errors are fatal.
pub fn parse_log<R: BufRead>(reader: R) -> std::io::Result<(Vec<LogRecord>, IngestStats)> {
    let mut stats = IngestStats::default();
    let mut records = Vec::new();
    for line in reader.lines() {
        let line = line?;
        stats.lines += 1;
        if line.trim().is_empty() {
            stats.blank += 1;
            continue;
        }
        match serde_json::from_str::<LogRecord>(&line) {
            Ok(rec) if rec.dwell_seconds >= 0.0 && rec.dwell_seconds.is_finite() => {
                stats.accepted += 1;
                records.push(rec);
            }
            _ => stats.skipped += 1,
        }
    }
    Ok((records, stats))
}

pub fn load_log(path: &Path) -> Result<(Vec<LogRecord>, IngestStats)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    parse_log(BufReader::new(file)).map_err(|e| Error::io(path, e))
}

/// Writes one JSON object per record, in the order given.
pub fn write_log<W: Write>(records: &[LogRecord], mut out: W) -> std::io::Result<()> {
    for rec in records {
        serde_json::to_writer(&mut out, rec)?;
        out.write_all(b"\n")?;
    }
    out.flush()
}

pub fn save_log(records: &[LogRecord], path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_log(records, BufWriter::new(file)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::EventType;

    const FULL: &str = r#"{"ts":1700000000,"user":"u1","session":"s1","query":"ai books","doc":"b7","dwell":12.5,"event":"click"}"#;

    #[test]
    fn full_line_maps_fields() {
        let (recs, stats) = parse_log(FULL.as_bytes()).unwrap();
        assert_eq!(stats.accepted, 1);
        assert_eq!(stats.skipped, 0);
        assert_eq!(
            recs[0],
            LogRecord {
                timestamp: 1_700_000_000,
                user_id: "u1".into(),
                session_id: "s1".into(),
                query: "ai books".into(),
                doc_id: "b7".into(),
                dwell_seconds: 12.5,
                event_type: EventType::Click,
            }
        );
    }

    #[test]
    fn missing_doc_is_skipped() {
        let line = r#"{"ts":1,"user":"u1","session":"s1","query":"q","dwell":1,"event":"view"}"#;
        let (recs, stats) = parse_log(line.as_bytes()).unwrap();
        assert!(recs.is_empty());
        assert_eq!(stats.skipped, 1);
    }

    #[test]
    fn empty_input() {
        let (recs, stats) = parse_log(&b""[..]).unwrap();
        assert!(recs.is_empty());
        assert_eq!(stats, IngestStats::default());
    }

    #[test]
    fn bad_lines_are_counted_not_fatal() {
        let input = format!(
            "{FULL}\nnot json\n\n{}\n{}\n{}\n{FULL}\n",
            r#"{"ts":1,"user":"u","session":"s","query":"q","doc":"d","dwell":-1,"event":"view"}"#,
            r#"{"ts":1,"user":"u","session":"s","query":"q","doc":"d","dwell":1,"event":"like"}"#,
            r#"{"ts":1,"user":"u","session":"s","query":null,"doc":"d","dwell":1,"event":"view"}"#,
        );
        let (recs, stats) = parse_log(input.as_bytes()).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(stats.skipped, 4);
        assert_eq!(stats.blank, 1);
        assert_eq!(stats.lines, 7);
    }

    #[test]
    fn unknown_keys_are_ignored() {
        let line = r#"{"ts":5,"user":"u","session":"s","query":"","doc":"d","dwell":0,"event":"purchase","ip":"10.0.0.1"}"#;
        let (recs, _) = parse_log(line.as_bytes()).unwrap();
        assert_eq!(recs[0].event_type, EventType::Purchase);
    }

    #[test]
    fn unreadable_path_is_fatal() {
        let err = load_log(Path::new("/nonexistent/dir/log.jsonl")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }
}
