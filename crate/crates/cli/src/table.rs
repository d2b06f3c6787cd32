//! CSV ingestion: `time`, `event`, optional stratum column, every other
//! column a numeric covariate in file order.

use std::path::Path;

use anyhow::{bail, Context, Result};
use coxcindex::{validate_dataset, Dataset, RawRow};

pub const TIME_COL: &str = "time";
pub const EVENT_COL: &str = "event";
pub const DEFAULT_STRATA_COL: &str = "stratum";

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub covariate_names: Vec<String>,
    /// Name of the stratum column if the file has one.
    pub strata_col: Option<String>,
    pub dataset: Dataset,
}

fn parse_number(field: &str, row: usize, column: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .with_context(|| format!("row {row}: column {column:?}: cannot parse {field:?} as a number"))
}

/// Read a survival table. `strata_col = None` looks for a column named
/// `stratum` and falls back to a single stratum when there is none.
pub fn read_table(path: &Path, strata_col: Option<&str>) -> Result<Table> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("cannot open {}", path.display()))?;
    let headers: Vec<String> = reader
        .headers()
        .context("missing header row")?
        .iter()
        .map(str::to_string)
        .collect();

    let find = |name: &str| headers.iter().position(|h| h == name);
    let time_idx = find(TIME_COL).with_context(|| format!("missing required column {TIME_COL:?}"))?;
    let event_idx = find(EVENT_COL).with_context(|| format!("missing required column {EVENT_COL:?}"))?;
    let strata_idx = match strata_col {
        Some(name) => Some(find(name).with_context(|| format!("strata column {name:?} not found"))?),
        None => find(DEFAULT_STRATA_COL),
    };
    let covariate_idx: Vec<usize> = (0..headers.len())
        .filter(|&i| i != time_idx && i != event_idx && Some(i) != strata_idx)
        .collect();

    let mut rows = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let row = r + 1;
        let record = record.with_context(|| format!("row {row}: malformed CSV record"))?;
        if record.len() != headers.len() {
            bail!("row {row}: expected {} fields, found {}", headers.len(), record.len());
        }
        let time = parse_number(&record[time_idx], row, TIME_COL)?;
        let event = parse_number(&record[event_idx], row, EVENT_COL)?;
        let stratum = match strata_idx {
            Some(i) => {
                let field = record[i].trim();
                let label = field.parse::<i64>().with_context(|| {
                    format!("row {row}: stratum {field:?} is not an integer label")
                })?;
                Some(label)
            }
            None => None,
        };
        let covariates = covariate_idx
            .iter()
            .map(|&i| parse_number(&record[i], row, &headers[i]))
            .collect::<Result<Vec<_>>>()?;
        rows.push(RawRow {
            time,
            event,
            stratum,
            covariates,
        });
    }
    let dataset = validate_dataset(&rows).with_context(|| format!("invalid data in {}", path.display()))?;
    Ok(Table {
        covariate_names: covariate_idx.iter().map(|&i| headers[i].clone()).collect(),
        strata_col: strata_idx.map(|i| headers[i].clone()),
        dataset,
    })
}
