//! Right-censored records and their CSV formats.
//!
//! Dataset CSV: `x_0, ..., x_{d-1}, time, event` with `event` in {0, 1}.
//! Ground-truth CSV appends `latent_T, latent_U`. Semi-synthetic input is any
//! headered numeric CSV whose last column is the outcome.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalRecord {
    pub x: Vec<f64>,
    pub time: f64,
    pub event: bool,
}

impl SurvivalRecord {
    pub fn new(x: Vec<f64>, time: f64, event: bool) -> Self {
        Self { x, time, event }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurvivalDataset {
    records: Vec<SurvivalRecord>,
    dim: usize,
}

impl SurvivalDataset {
    pub fn new(records: Vec<SurvivalRecord>) -> Result<Self> {
        let Some(first) = records.first() else {
            return Err(Error::domain("dataset is empty"));
        };
        let dim = first.x.len();
        for (i, r) in records.iter().enumerate() {
            if r.x.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    got: r.x.len(),
                });
            }
            if !(r.time.is_finite() && r.time >= 0.0) {
                return Err(Error::domain(format!(
                    "record {i}: time must be finite and nonnegative, got {}",
                    r.time
                )));
            }
            if r.x.iter().any(|v| !v.is_finite()) {
                return Err(Error::domain(format!("record {i}: non-finite covariate")));
            }
        }
        Ok(Self { records, dim })
    }

    pub fn records(&self) -> &[SurvivalRecord] {
        &self.records
    }

    #[cfg(test)]
    pub(crate) fn records_mut(&mut self) -> &mut [SurvivalRecord] {
        &mut self.records
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn events(&self) -> usize {
        self.records.iter().filter(|r| r.event).count()
    }

    pub fn censored(&self) -> usize {
        self.len() - self.events()
    }

    pub fn censoring_rate(&self) -> f64 {
        self.censored() as f64 / self.len() as f64
    }

    /// New dataset holding the records at `indices`, in that order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        Self::new(indices.iter().map(|&i| self.records[i].clone()).collect())
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        write_records(&self.records, self.dim, None, out)
    }

    /// Reads the dataset format. Extra `latent_T`/`latent_U` columns are ignored.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(input);
        let headers = rdr.headers()?.clone();
        let names: Vec<&str> = headers.iter().map(str::trim).collect();
        let time_col = names
            .iter()
            .position(|h| *h == "time")
            .ok_or_else(|| Error::Parse {
                line: 1,
                message: "missing 'time' column".into(),
            })?;
        if names.get(time_col + 1) != Some(&"event") {
            return Err(Error::Parse {
                line: 1,
                message: "'event' must follow 'time'".into(),
            });
        }
        for (i, h) in names[..time_col].iter().enumerate() {
            if *h != format!("x_{i}") {
                return Err(Error::Parse {
                    line: 1,
                    message: format!("expected covariate column 'x_{i}', found '{h}'"),
                });
            }
        }
        let extra = &names[time_col + 2..];
        if !(extra.is_empty() || extra == ["latent_T", "latent_U"]) {
            return Err(Error::Parse {
                line: 1,
                message: format!("unexpected trailing columns {extra:?}"),
            });
        }

        let mut records = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let line = row + 2;
            let rec = rec.map_err(|e| Error::Parse {
                line,
                message: e.to_string(),
            })?;
            if rec.len() != names.len() {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {} fields, found {}", names.len(), rec.len()),
                });
            }
            let num = |k: usize| -> Result<f64> {
                let cell = rec[k].trim();
                let v: f64 = cell.parse().map_err(|_| Error::Parse {
                    line,
                    message: format!("column '{}' is not numeric: '{cell}'", names[k]),
                })?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::Parse {
                        line,
                        message: format!("column '{}' is not finite", names[k]),
                    })
                }
            };
            let x = (0..time_col).map(num).collect::<Result<Vec<_>>>()?;
            let time = num(time_col)?;
            if time < 0.0 {
                return Err(Error::Parse {
                    line,
                    message: "time must be nonnegative".into(),
                });
            }
            let event = match rec[time_col + 1].trim() {
                "1" => true,
                "0" => false,
                other => {
                    return Err(Error::Parse {
                        line,
                        message: format!("event must be 0 or 1, got '{other}'"),
                    })
                }
            };
            records.push(SurvivalRecord::new(x, time, event));
        }
        if records.is_empty() {
            return Err(Error::Parse {
                line: 2,
                message: "no data rows".into(),
            });
        }
        Self::new(records)
    }
}

pub(crate) fn write_records<W: Write>(
    records: &[SurvivalRecord],
    dim: usize,
    latents: Option<(&[f64], &[f64])>,
    out: W,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (0..dim).map(|i| format!("x_{i}")).collect();
    header.push("time".into());
    header.push("event".into());
    if latents.is_some() {
        header.push("latent_T".into());
        header.push("latent_U".into());
    }
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(header.len());
    for (i, r) in records.iter().enumerate() {
        row.clear();
        row.extend(r.x.iter().map(|v| v.to_string()));
        row.push(r.time.to_string());
        row.push(if r.event { "1" } else { "0" }.to_string());
        if let Some((t, u)) = latents {
            row.push(t[i].to_string());
            row.push(u[i].to_string());
        }
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Covariates and positive outcomes read from a semi-synthetic input CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeTable {
    pub covariate_names: Vec<String>,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<f64>,
}

impl OutcomeTable {
    /// Header row required; last column is the outcome, the rest numeric covariates.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_reader(input);
        let headers = rdr.headers()?.clone();
        if headers.len() < 2 {
            return Err(Error::Parse {
                line: 1,
                message: "need at least one covariate column and an outcome column".into(),
            });
        }
        let d = headers.len() - 1;
        let covariate_names = headers
            .iter()
            .take(d)
            .map(|s| s.trim().to_string())
            .collect();
        let mut x = Vec::new();
        let mut y = Vec::new();
        let mut bad_lines = Vec::new();
        for (row, rec) in rdr.records().enumerate() {
            let line = row + 2;
            let rec = rec.map_err(|e| Error::Parse {
                line,
                message: e.to_string(),
            })?;
            if rec.len() != d + 1 {
                return Err(Error::Parse {
                    line,
                    message: format!("expected {} fields, found {}", d + 1, rec.len()),
                });
            }
            let parsed: Option<Vec<f64>> = rec
                .iter()
                .map(|c| c.trim().parse::<f64>().ok().filter(|v| v.is_finite()))
                .collect();
            match parsed {
                Some(v) => {
                    if v[d] <= 0.0 {
                        return Err(Error::Parse {
                            line,
                            message: format!("outcome must be positive, got {}", v[d]),
                        });
                    }
                    y.push(v[d]);
                    x.push(v[..d].to_vec());
                }
                None => bad_lines.push(line),
            }
        }
        if !bad_lines.is_empty() {
            return Err(Error::Parse {
                line: bad_lines[0],
                message: format!("non-numeric cells on lines {bad_lines:?}"),
            });
        }
        if y.is_empty() {
            return Err(Error::Parse {
                line: 2,
                message: "no data rows".into(),
            });
        }
        Ok(Self {
            covariate_names,
            x,
            y,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip() {
        let d = SurvivalDataset::new(vec![
            SurvivalRecord::new(vec![0.1, 0.2], 1.5, true),
            SurvivalRecord::new(vec![0.3, 0.123_456_789_012_345_68], 0.25, false),
        ])
        .unwrap();
        let mut buf = Vec::new();
        d.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("x_0,x_1,time,event\n"));
        assert_eq!(SurvivalDataset::read_csv(&buf[..]).unwrap(), d);
        assert_eq!(d.events(), 1);
        assert_eq!(d.censored(), 1);
    }

    #[test]
    fn ground_truth_columns_are_accepted() {
        let text = "x_0,time,event,latent_T,latent_U\n0.5,1.0,1,1.0,2.0\n";
        let d = SurvivalDataset::read_csv(text.as_bytes()).unwrap();
        assert_eq!(d.len(), 1);
    }

    #[test]
    fn malformed_rows_report_line() {
        let text = "x_0,time,event\n0.5,1.0,1\n0.5,abc,0\n";
        match SurvivalDataset::read_csv(text.as_bytes()) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
        let bad_event = "x_0,time,event\n0.5,1.0,2\n";
        assert!(SurvivalDataset::read_csv(bad_event.as_bytes()).is_err());
        let bad_header = "a,time,event\n0.5,1.0,1\n";
        assert!(SurvivalDataset::read_csv(bad_header.as_bytes()).is_err());
        assert!(SurvivalDataset::read_csv("x_0,time,event\n".as_bytes()).is_err());
    }

    #[test]
    fn dataset_invariants() {
        assert!(SurvivalDataset::new(vec![]).is_err());
        assert!(SurvivalDataset::new(vec![
            SurvivalRecord::new(vec![0.1], 1.0, true),
            SurvivalRecord::new(vec![0.1, 0.2], 1.0, true),
        ])
        .is_err());
        assert!(SurvivalDataset::new(vec![SurvivalRecord::new(vec![0.1], -1.0, true)]).is_err());
    }

    #[test]
    fn outcome_table_rejects_non_numeric_with_lines() {
        let text = "a,b,y\n1,2,3\nfoo,2,3\n1,2,bar\n";
        match OutcomeTable::read_csv(text.as_bytes()) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("[3, 4]"));
            }
            other => panic!("{other:?}"),
        }
        let ok = OutcomeTable::read_csv("a,y\n1,2\n3,4\n".as_bytes()).unwrap();
        assert_eq!(ok.y, vec![2.0, 4.0]);
        assert!(OutcomeTable::read_csv("a,y\n1,0\n".as_bytes()).is_err());
    }
}
