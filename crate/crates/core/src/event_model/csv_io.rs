use std::io::{Read, Write};
use std::path::Path;

use super::{recode_levels, CriticalEvent, RawEvent, RecodeMap, Variable};
use crate::error::{Error, Result};

pub const LABEL_COLUMN: &str = "confirmed_conflict";

/// Reads events from CSV. All schema columns are required;
/// `confirmed_conflict` is optional. Any other column is an error.
pub fn read_events<R: Read>(reader: R, map: &RecodeMap) -> Result<Vec<CriticalEvent>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    let unknown: Vec<String> = headers
        .iter()
        .filter(|h| Variable::from_name(h).is_none() && h.as_str() != LABEL_COLUMN)
        .cloned()
        .collect();
    if !unknown.is_empty() {
        return Err(Error::UnknownColumns(unknown));
    }
    let missing: Vec<String> = Variable::ALL
        .iter()
        .filter(|v| !headers.iter().any(|h| h == v.name()))
        .map(|v| v.name().to_string())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingColumns(missing));
    }
    let mut events = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line());
        let mut raw = RawEvent::new();
        for (h, v) in headers.iter().zip(record.iter()) {
            raw.fields.insert(h.clone(), v.to_string());
        }
        let event = recode_levels(&raw, map)
            .map_err(|e| Error::CsvRecord { line, message: e.to_string() })?;
        events.push(event);
    }
    Ok(events)
}

pub fn read_events_path(path: &Path, map: &RecodeMap) -> Result<Vec<CriticalEvent>> {
    read_events(std::fs::File::open(path)?, map)
}

/// Writes events in canonical form; floats use the shortest round-trip
/// representation so output is byte-stable.
pub fn write_events<W: Write>(writer: W, events: &[CriticalEvent]) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<&str> = Variable::ALL.iter().map(|v| v.name()).collect();
    header.push(LABEL_COLUMN);
    wtr.write_record(&header)?;
    for e in events {
        let mut row: Vec<String> = Variable::ALL
            .iter()
            .map(|&v| match e.continuous(v) {
                Some(x) => x.to_string(),
                None => v.levels()[e.level(v).expect("categorical")].to_string(),
            })
            .collect();
        row.push(match e.label {
            Some(true) => "1".into(),
            Some(false) => "0".into(),
            None => String::new(),
        });
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn write_events_path(path: &Path, events: &[CriticalEvent]) -> Result<()> {
    write_events(std::fs::File::create(path)?, events)
}
