//! Tabular samples with designated roles and their CSV representation.
//!
//! The CSV header is `t,y,w_0,…,x_0,…` optionally followed by the hidden
//! evaluation columns `z_0,…` and `u`. Values are written with Rust's
//! shortest round-trip float formatting, so a write/read cycle is exact.

use std::io::{Read, Write};
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("line {line}, column `{column}`: cannot parse `{value}` as a number")]
    Parse {
        line: u64,
        column: String,
        value: String,
    },
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("unexpected column `{0}`")]
    UnexpectedColumn(String),
    #[error("column `{column}` has {got} rows, expected {expected}")]
    Ragged {
        column: String,
        expected: usize,
        got: usize,
    },
    #[error("treatment column must be 0/1, found {0} at row {1}")]
    NonBinaryTreatment(f64, usize),
    #[error("dataset has no rows")]
    Empty,
}

pub type Result<T> = std::result::Result<T, DatasetError>;

/// Observed columns plus optional hidden ground truth for evaluation.
///
/// Columns are stored column-major. Estimators read `t`, `y`, `w` and `x`
/// only; the hidden mediator and confounder are reachable through
/// [`Dataset::hidden_z`] and [`Dataset::hidden_u`] for evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    t: Vec<f64>,
    y: Vec<f64>,
    w: Vec<Vec<f64>>,
    x: Vec<Vec<f64>>,
    z: Option<Vec<Vec<f64>>>,
    u: Option<Vec<f64>>,
}

fn check_len(name: &str, col: &[f64], n: usize) -> Result<()> {
    if col.len() != n {
        return Err(DatasetError::Ragged {
            column: name.to_string(),
            expected: n,
            got: col.len(),
        });
    }
    Ok(())
}

impl Dataset {
    pub fn new(t: Vec<f64>, y: Vec<f64>, w: Vec<Vec<f64>>, x: Vec<Vec<f64>>) -> Result<Self> {
        let n = t.len();
        if n == 0 {
            return Err(DatasetError::Empty);
        }
        check_len("y", &y, n)?;
        for (j, c) in w.iter().enumerate() {
            check_len(&format!("w_{j}"), c, n)?;
        }
        for (j, c) in x.iter().enumerate() {
            check_len(&format!("x_{j}"), c, n)?;
        }
        if let Some((i, v)) = t.iter().enumerate().find(|(_, v)| **v != 0.0 && **v != 1.0) {
            return Err(DatasetError::NonBinaryTreatment(*v, i));
        }
        Ok(Self {
            t,
            y,
            w,
            x,
            z: None,
            u: None,
        })
    }

    /// Attaches hidden ground-truth columns.
    pub fn with_hidden(mut self, z: Option<Vec<Vec<f64>>>, u: Option<Vec<f64>>) -> Result<Self> {
        let n = self.len();
        if let Some(z) = &z {
            for (j, c) in z.iter().enumerate() {
                check_len(&format!("z_{j}"), c, n)?;
            }
        }
        if let Some(u) = &u {
            check_len("u", u, n)?;
        }
        self.z = z;
        self.u = u;
        Ok(self)
    }

    /// Copy with hidden columns removed.
    pub fn observed_only(&self) -> Dataset {
        Dataset {
            z: None,
            u: None,
            ..self.clone()
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn t(&self) -> &[f64] {
        &self.t
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn w(&self) -> &[Vec<f64>] {
        &self.w
    }

    pub fn x(&self) -> &[Vec<f64>] {
        &self.x
    }

    pub fn d_w(&self) -> usize {
        self.w.len()
    }

    pub fn d_x(&self) -> usize {
        self.x.len()
    }

    pub fn hidden_z(&self) -> Option<&[Vec<f64>]> {
        self.z.as_deref()
    }

    pub fn hidden_u(&self) -> Option<&[f64]> {
        self.u.as_deref()
    }

    fn header(&self) -> Vec<String> {
        let mut h = vec!["t".to_string(), "y".to_string()];
        h.extend((0..self.w.len()).map(|j| format!("w_{j}")));
        h.extend((0..self.x.len()).map(|j| format!("x_{j}")));
        if let Some(z) = &self.z {
            h.extend((0..z.len()).map(|j| format!("z_{j}")));
        }
        if self.u.is_some() {
            h.push("u".to_string());
        }
        h
    }

    fn columns(&self) -> Vec<&[f64]> {
        let mut cols: Vec<&[f64]> = vec![&self.t, &self.y];
        cols.extend(self.w.iter().map(Vec::as_slice));
        cols.extend(self.x.iter().map(Vec::as_slice));
        if let Some(z) = &self.z {
            cols.extend(z.iter().map(Vec::as_slice));
        }
        if let Some(u) = &self.u {
            cols.push(u);
        }
        cols
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(self.header())?;
        let cols = self.columns();
        let mut row: Vec<String> = Vec::with_capacity(cols.len());
        for i in 0..self.len() {
            row.clear();
            row.extend(cols.iter().map(|c| c[i].to_string()));
            wtr.write_record(&row)?;
        }
        wtr.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(input);
        let header: Vec<String> = rdr.headers()?.iter().map(|s| s.trim().to_string()).collect();
        let mut cols: Vec<Vec<f64>> = vec![Vec::new(); header.len()];
        for rec in rdr.records() {
            let rec = rec?;
            let line = rec.position().map_or(0, |p| p.line());
            for (j, field) in rec.iter().enumerate() {
                let v: f64 = field.trim().parse().map_err(|_| DatasetError::Parse {
                    line,
                    column: header[j].clone(),
                    value: field.to_string(),
                })?;
                cols[j].push(v);
            }
        }

        let take = |name: &str, cols: &mut Vec<Vec<f64>>| -> Option<Vec<f64>> {
            header
                .iter()
                .position(|h| h == name)
                .map(|i| std::mem::take(&mut cols[i]))
        };
        let block = |prefix: &str, cols: &mut Vec<Vec<f64>>| -> Vec<Vec<f64>> {
            (0..)
                .map_while(|j| take(&format!("{prefix}_{j}"), cols))
                .collect()
        };
        for h in &header {
            let known = h == "t"
                || h == "y"
                || h == "u"
                || ["w_", "x_", "z_"].iter().any(|p| {
                    h.strip_prefix(p)
                        .is_some_and(|rest| rest.parse::<usize>().is_ok())
                });
            if !known {
                return Err(DatasetError::UnexpectedColumn(h.clone()));
            }
        }
        let t = take("t", &mut cols).ok_or_else(|| DatasetError::MissingColumn("t".into()))?;
        let y = take("y", &mut cols).ok_or_else(|| DatasetError::MissingColumn("y".into()))?;
        let w = block("w", &mut cols);
        let x = block("x", &mut cols);
        let z = block("z", &mut cols);
        let u = take("u", &mut cols);
        let expected = header.len();
        let used = 2 + w.len() + x.len() + z.len() + usize::from(u.is_some());
        if used != expected {
            return Err(DatasetError::MissingColumn(
                "contiguous w_/x_/z_ indices starting at 0".into(),
            ));
        }
        Dataset::new(t, y, w, x)?.with_hidden((!z.is_empty()).then_some(z), u)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_csv(std::io::BufReader::new(std::fs::File::open(path)?))
    }
}
