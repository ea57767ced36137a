//! CSV ingestion.
//!
//! Two schemas are accepted:
//!  * paired rows, header `pair,x,y` — one row per pair with the deltas
//!    already formed;
//!  * geo-level rows, header `geo,pair,assignment,spend,response` with
//!    `assignment ∈ {treatment, control}` and exactly one of each per pair;
//!    deltas are formed internally as treatment minus control.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use crate::error::{Error, Result};
use crate::paired_data::{compute_differences, GeoPairOutcome, PairedDifference};

/// Which CSV layout to expect.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CsvSchema {
    Paired,
    GeoLevel,
}

/// A dataset with pair labels preserved in input order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub pair_ids: Vec<String>,
    pub diffs: Vec<PairedDifference>,
}

fn schema_err(path: &str, line: u64, msg: impl Into<String>) -> Error {
    Error::Schema {
        path: path.to_string(),
        line,
        msg: msg.into(),
    }
}

/// Read a dataset from a file path.
pub fn read_csv_path(path: &Path, schema: CsvSchema) -> Result<Dataset> {
    let file = std::fs::File::open(path)?;
    read_csv(file, schema, &path.display().to_string())
}

/// Read a dataset from any reader; `name` labels error messages.
pub fn read_csv<R: Read>(reader: R, schema: CsvSchema, name: &str) -> Result<Dataset> {
    match schema {
        CsvSchema::Paired => read_paired(reader, name),
        CsvSchema::GeoLevel => read_geo_level(reader, name),
    }
}

fn parse_field(raw: &str, field: &str, path: &str, line: u64) -> Result<f64> {
    let v: f64 = raw
        .trim()
        .parse()
        .map_err(|_| schema_err(path, line, format!("{field}: not a number: '{raw}'")))?;
    if !v.is_finite() {
        return Err(schema_err(path, line, format!("{field}: non-finite value")));
    }
    Ok(v)
}

fn read_paired<R: Read>(reader: R, name: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| schema_err(name, 1, e.to_string()))?
        .clone();
    let expected = ["pair", "x", "y"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(schema_err(
            name,
            1,
            format!("expected header 'pair,x,y', got '{}'", headers.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    let mut pair_ids = Vec::new();
    let mut diffs = Vec::new();
    let mut seen: HashMap<String, u64> = HashMap::new();
    for (idx, record) in rdr.records().enumerate() {
        let line = idx as u64 + 2;
        let record = record.map_err(|e| schema_err(name, line, e.to_string()))?;
        if record.len() != 3 {
            return Err(schema_err(name, line, "expected 3 fields"));
        }
        let id = record[0].to_string();
        if id.is_empty() {
            return Err(schema_err(name, line, "empty pair id"));
        }
        if let Some(prev) = seen.insert(id.clone(), line) {
            return Err(schema_err(
                name,
                line,
                format!("pair '{id}' already defined at line {prev}"),
            ));
        }
        let x = parse_field(&record[1], "x", name, line)?;
        let y = parse_field(&record[2], "y", name, line)?;
        pair_ids.push(id);
        diffs.push(PairedDifference::new(x, y));
    }
    if diffs.is_empty() {
        return Err(schema_err(name, 2, "no data rows"));
    }
    Ok(Dataset { pair_ids, diffs })
}

struct GeoRow {
    line: u64,
    treated: bool,
    spend: f64,
    response: f64,
}

fn read_geo_level<R: Read>(reader: R, name: &str) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| schema_err(name, 1, e.to_string()))?
        .clone();
    let expected = ["geo", "pair", "assignment", "spend", "response"];
    if headers.iter().collect::<Vec<_>>() != expected {
        return Err(schema_err(
            name,
            1,
            format!(
                "expected header 'geo,pair,assignment,spend,response', got '{}'",
                headers.iter().collect::<Vec<_>>().join(",")
            ),
        ));
    }
    // pair id → rows, preserving first-appearance order
    let mut order: Vec<String> = Vec::new();
    let mut rows: HashMap<String, Vec<GeoRow>> = HashMap::new();
    for (idx, record) in rdr.records().enumerate() {
        let line = idx as u64 + 2;
        let record = record.map_err(|e| schema_err(name, line, e.to_string()))?;
        if record.len() != 5 {
            return Err(schema_err(name, line, "expected 5 fields"));
        }
        let pair = record[1].to_string();
        if pair.is_empty() {
            return Err(schema_err(name, line, "empty pair id"));
        }
        let treated = match &record[2] {
            "treatment" => true,
            "control" => false,
            other => {
                return Err(schema_err(
                    name,
                    line,
                    format!("assignment must be 'treatment' or 'control', got '{other}'"),
                ))
            }
        };
        let spend = parse_field(&record[3], "spend", name, line)?;
        let response = parse_field(&record[4], "response", name, line)?;
        if !rows.contains_key(&pair) {
            order.push(pair.clone());
        }
        rows.entry(pair).or_default().push(GeoRow {
            line,
            treated,
            spend,
            response,
        });
    }
    if order.is_empty() {
        return Err(schema_err(name, 2, "no data rows"));
    }
    let mut outcomes = Vec::with_capacity(order.len());
    for pair in &order {
        let group = &rows[pair];
        if group.len() != 2 {
            return Err(schema_err(
                name,
                group.last().unwrap().line,
                format!("pair '{pair}' has {} rows, expected 2", group.len()),
            ));
        }
        let (t, c) = match (group[0].treated, group[1].treated) {
            (true, false) => (&group[0], &group[1]),
            (false, true) => (&group[1], &group[0]),
            _ => {
                return Err(schema_err(
                    name,
                    group[1].line,
                    format!("pair '{pair}' needs exactly one treatment and one control row"),
                ))
            }
        };
        // Treatment row is taken as the first geo, so assignment = +1
        // reproduces treatment-minus-control deltas.
        outcomes.push(GeoPairOutcome {
            pair_id: pair.clone(),
            spend_first: t.spend,
            response_first: t.response,
            spend_second: c.spend,
            response_second: c.response,
            assignment: 1,
        });
    }
    let diffs = compute_differences(&outcomes)?;
    Ok(Dataset {
        pair_ids: order,
        diffs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paired_schema_reads() {
        let csv = "pair,x,y\nA,1.0,2.0\nB,2.0,4.5\n";
        let ds = read_csv(csv.as_bytes(), CsvSchema::Paired, "test").unwrap();
        assert_eq!(ds.pair_ids, vec!["A", "B"]);
        assert_eq!(ds.diffs[1], PairedDifference::new(2.0, 4.5));
    }

    #[test]
    fn paired_schema_rejects_duplicate_pair_with_line() {
        let csv = "pair,x,y\nA,1,2\nA,3,4\n";
        let err = read_csv(csv.as_bytes(), CsvSchema::Paired, "test").unwrap_err();
        match err {
            Error::Schema { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn paired_schema_rejects_bad_number_with_line() {
        let csv = "pair,x,y\nA,1,2\nB,oops,4\n";
        let err = read_csv(csv.as_bytes(), CsvSchema::Paired, "test").unwrap_err();
        match err {
            Error::Schema { line, msg, .. } => {
                assert_eq!(line, 3);
                assert!(msg.contains("oops"));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn geo_level_schema_forms_differences() {
        let csv = "geo,pair,assignment,spend,response\n\
                   g1,P1,treatment,3.0,10.0\n\
                   g2,P1,control,1.0,4.0\n\
                   g3,P2,control,2.0,5.0\n\
                   g4,P2,treatment,2.5,7.0\n";
        let ds = read_csv(csv.as_bytes(), CsvSchema::GeoLevel, "test").unwrap();
        assert_eq!(ds.pair_ids, vec!["P1", "P2"]);
        assert_eq!(ds.diffs[0], PairedDifference::new(2.0, 6.0));
        assert_eq!(ds.diffs[1], PairedDifference::new(0.5, 2.0));
    }

    #[test]
    fn geo_level_rejects_double_treatment() {
        let csv = "geo,pair,assignment,spend,response\n\
                   g1,P1,treatment,3.0,10.0\n\
                   g2,P1,treatment,1.0,4.0\n";
        let err = read_csv(csv.as_bytes(), CsvSchema::GeoLevel, "test").unwrap_err();
        assert!(matches!(err, Error::Schema { line: 3, .. }));
    }
}
