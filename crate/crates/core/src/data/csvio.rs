use std::collections::BTreeMap;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

use super::{Cohort, Observation, MAX_RESPONSE};

/// Column mapping for cohort CSV files.
///
/// Response columns are every header that starts with `response_prefix`
/// followed by a 1-based integer, ordered by that integer.
#[derive(Debug, Clone)]
pub struct CsvSchema {
    pub subject_col: String,
    pub timestamp_col: String,
    pub response_prefix: String,
    pub label_col: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        Self {
            subject_col: "subject_id".into(),
            timestamp_col: "timestamp".into(),
            response_prefix: "r_".into(),
            label_col: "label".into(),
        }
    }
}

struct Columns {
    subject: usize,
    timestamp: usize,
    label: usize,
    responses: Vec<usize>,
}

fn resolve_columns(path: &Path, header: &csv::StringRecord, schema: &CsvSchema) -> Result<Columns> {
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                message: format!("missing column `{name}`"),
            })
    };
    let mut responses: Vec<(usize, usize)> = header
        .iter()
        .enumerate()
        .filter_map(|(col, h)| {
            h.trim()
                .strip_prefix(schema.response_prefix.as_str())
                .and_then(|k| k.parse::<usize>().ok())
                .map(|k| (k, col))
        })
        .collect();
    responses.sort_unstable();
    for (expected, &(k, _)) in (1..).zip(&responses) {
        if k != expected {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: 1,
                message: format!("response columns must be numbered 1..D; found gap at {expected}"),
            });
        }
    }
    Ok(Columns {
        subject: find(&schema.subject_col)?,
        timestamp: find(&schema.timestamp_col)?,
        label: find(&schema.label_col)?,
        responses: responses.into_iter().map(|(_, c)| c).collect(),
    })
}

/// Reads a cohort CSV (`subject_id,timestamp,r_1,...,r_D,label`).
pub fn read_cohort_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<Cohort> {
    let path = path.as_ref();
    let mut text = String::new();
    File::open(path)?.read_to_string(&mut text)?;
    parse_cohort(path, &text, schema)
}

fn parse_cohort(path: &Path, text: &str, schema: &CsvSchema) -> Result<Cohort> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(text.as_bytes());
    let header = rdr.headers()?.clone();
    let cols = resolve_columns(path, &header, schema)?;
    let dim = cols.responses.len();

    let mut observations = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let parse_err = |message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        if record.len() != header.len() {
            return Err(parse_err(format!(
                "expected {} fields, found {}",
                header.len(),
                record.len()
            )));
        }
        let field = |c: usize| record[c].trim();
        let subject_id = field(cols.subject)
            .parse::<u64>()
            .map_err(|e| parse_err(format!("subject_id: {e}")))?;
        let timestamp = field(cols.timestamp)
            .parse::<f64>()
            .map_err(|e| parse_err(format!("timestamp: {e}")))?;
        let label = match field(cols.label) {
            "0" => false,
            "1" => true,
            other => return Err(parse_err(format!("label must be 0 or 1, found `{other}`"))),
        };
        let mut responses = Vec::with_capacity(dim);
        for &c in &cols.responses {
            let v = field(c)
                .parse::<i64>()
                .map_err(|e| parse_err(format!("column {}: {e}", &header[c])))?;
            if !(0..=i64::from(MAX_RESPONSE)).contains(&v) {
                return Err(Error::Validation {
                    line,
                    message: format!("response {v} in column {} outside [0, {MAX_RESPONSE}]", &header[c]),
                });
            }
            responses.push(v as u8);
        }
        observations.push(Observation {
            subject_id,
            timestamp,
            responses,
            label,
        });
    }
    Cohort::new(observations, dim)
}

/// Writes a cohort using the default schema. Floats use the shortest
/// representation that round-trips.
pub fn write_cohort_csv(cohort: &Cohort, path: impl AsRef<Path>) -> Result<()> {
    let mut out = String::new();
    out.push_str("subject_id,timestamp");
    for d in 1..=cohort.feature_dim() {
        out.push_str(&format!(",r_{d}"));
    }
    out.push_str(",label\n");
    for o in cohort.observations() {
        out.push_str(&format!("{},{}", o.subject_id, o.timestamp));
        for r in &o.responses {
            out.push_str(&format!(",{r}"));
        }
        out.push_str(if o.label { ",1\n" } else { ",0\n" });
    }
    File::create(path)?.write_all(out.as_bytes())?;
    Ok(())
}

/// Writes a `subject_id,<column>` map, e.g. synthetic ground truth clusters.
pub fn write_group_csv(
    groups: &BTreeMap<u64, usize>,
    column: &str,
    path: impl AsRef<Path>,
) -> Result<()> {
    let mut out = format!("subject_id,{column}\n");
    for (s, g) in groups {
        out.push_str(&format!("{s},{g}\n"));
    }
    File::create(path)?.write_all(out.as_bytes())?;
    Ok(())
}

/// Reads a two-column `subject_id,<label>` CSV. Labels may be arbitrary
/// strings; they are mapped to dense group indices in sorted label order,
/// and the sorted labels are returned alongside.
pub fn read_group_csv(path: impl AsRef<Path>) -> Result<(BTreeMap<u64, usize>, Vec<String>)> {
    let path = path.as_ref();
    let mut rdr = csv::Reader::from_path(path)?;
    let mut raw: Vec<(u64, String)> = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        if record.len() < 2 {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line,
                message: "expected subject_id and group columns".into(),
            });
        }
        let s = record[0].trim().parse::<u64>().map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line,
            message: format!("subject_id: {e}"),
        })?;
        raw.push((s, record[1].trim().to_string()));
    }
    let mut names: Vec<String> = raw.iter().map(|(_, g)| g.clone()).collect();
    names.sort();
    names.dedup();
    let groups = raw
        .into_iter()
        .map(|(s, g)| (s, names.binary_search(&g).expect("label present")))
        .collect();
    Ok((groups, names))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<Cohort> {
        parse_cohort(Path::new("mem.csv"), text, &CsvSchema::default())
    }

    #[test]
    fn three_rows_two_features() {
        let c = parse("subject_id,timestamp,r_1,r_2,label\n0,0.5,1,2,0\n0,1.5,3,4,1\n1,0.25,10,0,0\n")
            .unwrap();
        assert_eq!(c.len(), 3);
        assert_eq!(c.feature_dim(), 2);
        assert_eq!(c.observations()[1].responses, vec![3, 4]);
        assert!(c.observations()[1].label);
    }

    #[test]
    fn response_eleven_is_a_validation_error_at_its_line() {
        let err = parse("subject_id,timestamp,r_1,r_2,label\n0,0,1,2,0\n0,1,11,4,1\n").unwrap_err();
        assert!(matches!(err, Error::Validation { line: 3, .. }), "{err}");
    }

    #[test]
    fn header_only_gives_empty_cohort() {
        let c = parse("subject_id,timestamp,r_1,r_2,label\n").unwrap();
        assert_eq!(c.len(), 0);
        assert_eq!(c.n_subjects(), 0);
        assert_eq!(c.feature_dim(), 2);
    }

    #[test]
    fn malformed_row_reports_line() {
        let err = parse("subject_id,timestamp,r_1,label\n0,0,1,0\nx,1,2,1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err}");
        let err = parse("subject_id,timestamp,r_1,label\n0,0,1\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
    }

    #[test]
    fn response_columns_ordered_numerically() {
        let c = parse("label,r_2,subject_id,r_10,timestamp,r_1,r_3,r_4,r_5,r_6,r_7,r_8,r_9\n1,2,4,10,0,1,3,4,5,6,7,8,9\n")
            .unwrap();
        assert_eq!(c.observations()[0].responses, (1..=10).collect::<Vec<u8>>());
    }
}
