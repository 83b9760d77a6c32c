//! CSV ingestion and export.

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use log::warn;

use crate::data::dataset::{Column, Dataset};
use crate::data::schema::{Kind, SfmSchema};
use crate::error::{Error, Result};

fn is_missing(cell: &str) -> bool {
    matches!(cell.trim(), "" | "NA" | "N/A" | "NaN" | "nan" | "?" | "null")
}

/// Loads a header-bearing CSV file against `schema`.
///
/// Rows with a missing cell or an unparseable number are dropped and
/// counted; the count is available as [`Dataset::dropped_rows`]. The
/// returned dataset's schema lists columns in the file's header order.
pub fn load_dataset(path: impl AsRef<Path>, schema: &SfmSchema) -> Result<Dataset> {
    let file = std::fs::File::open(path.as_ref())
        .map_err(|e| Error::Data(format!("cannot open {}: {e}", path.as_ref().display())))?;
    read_dataset(file, schema)
}

pub fn read_dataset<R: Read>(reader: R, schema: &SfmSchema) -> Result<Dataset> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();

    let by_name: HashMap<&str, usize> = schema.columns.iter().enumerate().map(|(i, c)| (c.name.as_str(), i)).collect();
    for h in &header {
        if !by_name.contains_key(h.as_str()) {
            return Err(Error::Schema(format!(
                "CSV column {h:?} has no role in the schema (declare it with role \"ignored\")"
            )));
        }
    }
    for c in &schema.columns {
        if !header.iter().any(|h| *h == c.name) {
            return Err(Error::Schema(format!("schema column {:?} is missing from the CSV header", c.name)));
        }
    }

    let mut ordered = schema.clone();
    ordered.columns = header.iter().map(|h| schema.columns[by_name[h.as_str()]].clone()).collect();
    let kinds: Vec<Kind> = ordered.columns.iter().map(|c| c.kind).collect();

    let mut labels: Vec<Vec<String>> = vec![Vec::new(); header.len()];
    let mut numbers: Vec<Vec<f64>> = vec![Vec::new(); header.len()];
    let mut dropped = 0usize;
    let mut parse_failures = 0usize;

    'rows: for (line, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != header.len() {
            return Err(Error::Data(format!(
                "row {} has {} fields, header has {}",
                line + 2,
                record.len(),
                header.len()
            )));
        }
        let mut parsed: Vec<Option<f64>> = vec![None; header.len()];
        for (j, cell) in record.iter().enumerate() {
            if is_missing(cell) {
                dropped += 1;
                continue 'rows;
            }
            if kinds[j] == Kind::Continuous {
                match cell.parse::<f64>() {
                    Ok(v) if v.is_finite() => parsed[j] = Some(v),
                    _ => {
                        if parse_failures < 5 {
                            warn!("row {}: column {:?} value {cell:?} is not a finite number; row dropped", line + 2, header[j]);
                        }
                        parse_failures += 1;
                        dropped += 1;
                        continue 'rows;
                    }
                }
            }
        }
        for (j, cell) in record.iter().enumerate() {
            match kinds[j] {
                Kind::Continuous => numbers[j].push(parsed[j].expect("parsed above")),
                Kind::Categorical => labels[j].push(cell.to_owned()),
            }
        }
    }
    if parse_failures > 0 {
        warn!("{parse_failures} rows dropped for unparseable numeric cells");
    }
    if dropped > 0 {
        warn!("{dropped} rows dropped during ingestion (missing or unparseable cells)");
    }

    let columns: Vec<Column> = kinds
        .iter()
        .enumerate()
        .map(|(j, k)| match k {
            Kind::Continuous => Column::Continuous(std::mem::take(&mut numbers[j])),
            Kind::Categorical => Column::from_labels(&labels[j]),
        })
        .collect();
    Ok(Dataset::from_columns(ordered, columns)?.with_dropped_rows(dropped))
}

/// Writes `d` as CSV in schema column order. Numbers use the shortest
/// representation that parses back to the identical `f64`.
pub fn write_dataset<W: Write>(d: &Dataset, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(d.schema().columns.iter().map(|c| c.name.as_str()))?;
    let mut row: Vec<String> = Vec::with_capacity(d.columns().len());
    for r in 0..d.n() {
        row.clear();
        row.extend(d.columns().iter().map(|c| c.value(r).to_string()));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn save_dataset(d: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path.as_ref())?;
    write_dataset(d, std::io::BufWriter::new(file))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::schema::{ColumnSpec, Role};

    fn schema() -> SfmSchema {
        SfmSchema::new(
            vec![
                ColumnSpec::new("sex", Role::Protected, Kind::Categorical),
                ColumnSpec::new("age", Role::Confounder, Kind::Continuous),
                ColumnSpec::new("occupation", Role::Mediator, Kind::Categorical),
            ],
            "female",
            "male",
        )
        .unwrap()
    }

    #[test]
    fn ingests_and_counts_rows() {
        let csv = "sex,age,occupation\nfemale,30,clerk\nmale,41.5,manager\nmale,22,clerk\n";
        let d = read_dataset(csv.as_bytes(), &schema()).unwrap();
        assert_eq!(d.n(), 3);
        assert_eq!(d.dropped_rows(), 0);
        assert_eq!(d.x(), &[0, 1, 1]);
    }

    #[test]
    fn three_level_protected_is_a_schema_error() {
        let csv = "sex,age,occupation\nfemale,30,clerk\nmale,41,manager\nother,22,clerk\n";
        assert!(matches!(read_dataset(csv.as_bytes(), &schema()), Err(Error::Schema(_))));
    }

    #[test]
    fn missing_column_is_a_schema_error() {
        let csv = "sex,age\nfemale,30\nmale,41\n";
        assert!(matches!(read_dataset(csv.as_bytes(), &schema()), Err(Error::Schema(_))));
    }

    #[test]
    fn unparseable_and_missing_cells_drop_rows() {
        let csv = "sex,age,occupation\nfemale,30,clerk\nmale,abc,manager\nmale,,clerk\nfemale,NA,clerk\nmale,50,clerk\n";
        let d = read_dataset(csv.as_bytes(), &schema()).unwrap();
        assert_eq!(d.n(), 2);
        assert_eq!(d.dropped_rows(), 3);
    }

    #[test]
    fn header_order_is_preserved_on_export() {
        let csv = "occupation,sex,age\nclerk,female,30\nmanager,male,41.25\n";
        let d = read_dataset(csv.as_bytes(), &schema()).unwrap();
        let mut out = Vec::new();
        write_dataset(&d, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), csv);
    }
}
