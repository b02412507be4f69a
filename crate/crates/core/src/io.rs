//! CSV input: clinical tables and expression matrices.
//!
//! Files are RFC 4180 with a header row. The first column holds sample ids
//! (or gene ids for genes-as-rows expression files). Empty cells and `NA`,
//! `NaN`, `null`, `.` are read as missing.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use crate::data::{Dataset, Outcome};
use crate::error::{BossError, Result};

/// Raw table with the header split off. `line` numbers are 1-based file
/// lines, the header being line 1.
#[derive(Debug, Clone)]
pub struct Table {
    pub headers: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

pub fn read_table(path: impl AsRef<Path>) -> Result<Table> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| BossError::Io(format!("{}: {e}", path.display())))?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| BossError::Io(format!("{}: {e}", path.display())))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    if headers.is_empty() {
        return Err(BossError::InvalidInput(format!("{}: empty header", path.display())));
    }
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| BossError::InvalidInput(format!("{}: {e}", path.display())))?;
        rows.push(record.iter().map(str::to_string).collect());
    }
    Ok(Table { headers, rows })
}

pub fn is_missing(cell: &str) -> bool {
    matches!(cell.trim(), "" | "NA" | "NaN" | "nan" | "null" | ".")
}

fn parse_cell(cell: &str, column: &str, line: usize) -> Result<f64> {
    if is_missing(cell) {
        return Ok(f64::NAN);
    }
    cell.trim().parse::<f64>().map_err(|_| {
        BossError::InvalidInput(format!(
            "column '{column}', line {line}: cannot parse '{cell}' as a number"
        ))
    })
}

impl Table {
    pub fn column(&self, name: &str) -> Result<usize> {
        self.headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| BossError::InvalidInput(format!("unknown column '{name}'")))
    }

    pub fn ids(&self) -> Vec<String> {
        self.rows.iter().map(|r| r[0].trim().to_string()).collect()
    }

    pub fn numeric(&self, name: &str) -> Result<Vec<f64>> {
        let c = self.column(name)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(r, row)| parse_cell(&row[c], name, r + 2))
            .collect()
    }

    /// Event indicator: 1/0 or true/false. Missing cells come back as `None`.
    pub fn events(&self, name: &str) -> Result<Vec<Option<bool>>> {
        let c = self.column(name)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(r, row)| {
                let cell = row[c].trim();
                if is_missing(cell) {
                    return Ok(None);
                }
                match cell.to_ascii_lowercase().as_str() {
                    "1" | "1.0" | "true" => Ok(Some(true)),
                    "0" | "0.0" | "false" => Ok(Some(false)),
                    _ => Err(BossError::InvalidInput(format!(
                        "column '{name}', line {}: event indicator must be 0/1, got '{cell}'",
                        r + 2
                    ))),
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum OutcomeColumns {
    Quantitative(String),
    Survival { time: String, event: String },
}

impl OutcomeColumns {
    /// `Y` for a quantitative outcome, `TIME,EVENT` for survival.
    pub fn parse(spec: &str) -> Result<Self> {
        let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
        match parts.as_slice() {
            [y] if !y.is_empty() => Ok(OutcomeColumns::Quantitative(y.to_string())),
            [t, e] if !t.is_empty() && !e.is_empty() => Ok(OutcomeColumns::Survival {
                time: t.to_string(),
                event: e.to_string(),
            }),
            _ => Err(BossError::InvalidInput(format!(
                "outcome must be COL or TIME,EVENT, got '{spec}'"
            ))),
        }
    }
}

/// Outcome and covariates of the samples, without a biomarker.
#[derive(Debug, Clone)]
pub struct Clinical {
    pub sample_ids: Vec<String>,
    pub outcome: Outcome,
    pub covariates: DMatrix<f64>,
    pub covariate_names: Vec<String>,
}

impl Clinical {
    pub fn from_table(table: &Table, outcome: &OutcomeColumns, covariates: &[String]) -> Result<Self> {
        let outcome = match outcome {
            OutcomeColumns::Quantitative(y) => Outcome::Quantitative(table.numeric(y)?),
            OutcomeColumns::Survival { time, event } => {
                let mut t = table.numeric(time)?;
                let e = table.events(event)?;
                // a missing indicator makes the whole row missing
                for (ti, ei) in t.iter_mut().zip(&e) {
                    if ei.is_none() {
                        *ti = f64::NAN;
                    }
                }
                Outcome::Survival {
                    time: t,
                    event: e.into_iter().map(|x| x.unwrap_or(false)).collect(),
                }
            }
        };
        let n = table.rows.len();
        let mut cov = DMatrix::zeros(n, covariates.len());
        for (j, name) in covariates.iter().enumerate() {
            for (i, v) in table.numeric(name)?.into_iter().enumerate() {
                cov[(i, j)] = v;
            }
        }
        Ok(Clinical {
            sample_ids: table.ids(),
            outcome,
            covariates: cov,
            covariate_names: covariates.to_vec(),
        })
    }

    pub fn n(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn dataset(&self, biomarker: Vec<f64>) -> Result<Dataset> {
        Dataset::new(
            self.sample_ids.clone(),
            self.outcome.clone(),
            biomarker,
            self.covariates.clone(),
            self.covariate_names.clone(),
        )
    }

    pub fn select(&self, rows: &[usize]) -> Clinical {
        Clinical {
            sample_ids: rows.iter().map(|&r| self.sample_ids[r].clone()).collect(),
            outcome: self.outcome.select(rows),
            covariates: self.covariates.select_rows(rows),
            covariate_names: self.covariate_names.clone(),
        }
    }
}

/// Reads a single-biomarker (or biomarker-pair) dataset.
pub fn read_dataset(
    path: impl AsRef<Path>,
    outcome: &OutcomeColumns,
    biomarker: &str,
    second_biomarker: Option<&str>,
    covariates: &[String],
) -> Result<Dataset> {
    let table = read_table(path)?;
    let clinical = Clinical::from_table(&table, outcome, covariates)?;
    let b = table.numeric(biomarker)?;
    match second_biomarker {
        None => clinical.dataset(b),
        Some(name) => Dataset::new_pair(
            clinical.sample_ids,
            clinical.outcome,
            b,
            table.numeric(name)?,
            clinical.covariates,
            clinical.covariate_names,
        ),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    /// First column sample id, one column per gene.
    SamplesAsRows,
    /// First column gene id, one column per sample.
    GenesAsRows,
}

/// Expression matrix read lazily in blocks of genes.
#[derive(Debug, Clone)]
pub struct ExpressionFile {
    path: PathBuf,
    layout: Layout,
    pub sample_ids: Vec<String>,
    pub genes: Vec<String>,
}

fn open_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| BossError::Io(format!("{}: {e}", path.display())))
}

impl ExpressionFile {
    /// Scans ids only; values are parsed block by block.
    pub fn open(path: impl AsRef<Path>, layout: Layout) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let mut reader = open_reader(&path)?;
        let header: Vec<String> = reader
            .headers()
            .map_err(|e| BossError::Io(format!("{}: {e}", path.display())))?
            .iter()
            .skip(1)
            .map(|h| h.trim().to_string())
            .collect();
        let mut first_column = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| BossError::InvalidInput(format!("{}: {e}", path.display())))?;
            first_column.push(record.get(0).unwrap_or("").trim().to_string());
        }
        let (sample_ids, genes) = match layout {
            Layout::SamplesAsRows => (first_column, header),
            Layout::GenesAsRows => (header, first_column),
        };
        Ok(ExpressionFile {
            path,
            layout,
            sample_ids,
            genes,
        })
    }

    /// Calls `f(first_gene_index, values)` with up to `block` genes at a
    /// time, each a vector over `sample_ids`.
    pub fn for_each_block(
        &self,
        block: usize,
        mut f: impl FnMut(usize, Vec<Vec<f64>>) -> Result<()>,
    ) -> Result<()> {
        let block = block.max(1);
        match self.layout {
            Layout::GenesAsRows => {
                let mut reader = open_reader(&self.path)?;
                let mut start = 0;
                let mut pending = Vec::with_capacity(block);
                for (r, record) in reader.records().enumerate() {
                    let record = record.map_err(|e| BossError::InvalidInput(e.to_string()))?;
                    let gene = &self.genes[r];
                    let values = record
                        .iter()
                        .skip(1)
                        .map(|cell| parse_cell(cell, gene, r + 2))
                        .collect::<Result<Vec<f64>>>()?;
                    if values.len() != self.sample_ids.len() {
                        return Err(BossError::InvalidInput(format!(
                            "gene '{gene}' (line {}) has {} values, header has {} samples",
                            r + 2,
                            values.len(),
                            self.sample_ids.len()
                        )));
                    }
                    pending.push(values);
                    if pending.len() == block {
                        f(start, std::mem::take(&mut pending))?;
                        start = r + 1;
                    }
                }
                if !pending.is_empty() {
                    f(start, pending)?;
                }
            }
            Layout::SamplesAsRows => {
                // one pass over the file per block of columns
                for start in (0..self.genes.len()).step_by(block) {
                    let end = (start + block).min(self.genes.len());
                    let mut values = vec![Vec::with_capacity(self.sample_ids.len()); end - start];
                    let mut reader = open_reader(&self.path)?;
                    for (r, record) in reader.records().enumerate() {
                        let record = record.map_err(|e| BossError::InvalidInput(e.to_string()))?;
                        for (g, column) in values.iter_mut().enumerate() {
                            let cell = record.get(start + g + 1).ok_or_else(|| {
                                BossError::InvalidInput(format!("line {}: too few columns", r + 2))
                            })?;
                            column.push(parse_cell(cell, &self.genes[start + g], r + 2)?);
                        }
                    }
                    f(start, values)?;
                }
            }
        }
        Ok(())
    }
}

/// Positions of shared ids: `(left_index, right_index)` pairs in left order,
/// plus the counts of unmatched ids on each side.
pub fn inner_join(left: &[String], right: &[String]) -> Result<(Vec<(usize, usize)>, usize, usize)> {
    let mut index = HashMap::with_capacity(right.len());
    for (j, id) in right.iter().enumerate() {
        if index.insert(id.as_str(), j).is_some() {
            return Err(BossError::InvalidInput(format!("duplicate sample id '{id}'")));
        }
    }
    let mut seen = HashMap::with_capacity(left.len());
    let mut pairs = Vec::new();
    for (i, id) in left.iter().enumerate() {
        if seen.insert(id.as_str(), i).is_some() {
            return Err(BossError::InvalidInput(format!("duplicate sample id '{id}'")));
        }
        if let Some(&j) = index.get(id.as_str()) {
            pairs.push((i, j));
        }
    }
    let unmatched_left = left.len() - pairs.len();
    let unmatched_right = right.len() - pairs.len();
    Ok((pairs, unmatched_left, unmatched_right))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn write(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    #[test]
    fn missing_cells_become_nan() {
        let f = write("id,y,b\ns1,1.5,NA\ns2,,2\ns3,3,.\n");
        let t = read_table(f.path()).unwrap();
        let y = t.numeric("y").unwrap();
        assert!(y[1].is_nan());
        assert_eq!(y[0], 1.5);
        assert!(t.numeric("b").unwrap()[2].is_nan());
    }

    #[test]
    fn errors_name_column_and_line() {
        let f = write("id,y\ns1,1\ns2,abc\n");
        let t = read_table(f.path()).unwrap();
        let msg = t.numeric("y").unwrap_err().to_string();
        assert!(msg.contains("'y'") && msg.contains("line 3"), "{msg}");
        let msg = t.numeric("zz").unwrap_err().to_string();
        assert!(msg.contains("unknown column 'zz'"));
    }

    #[test]
    fn survival_dataset_drops_incomplete_rows() {
        let f = write("id,time,status,gene,age\na,5,1,0.1,60\nb,3,NA,0.2,61\nc,4,0,0.3,\nd,2,1,0.4,55\n");
        let d = read_dataset(
            f.path(),
            &OutcomeColumns::parse("time,status").unwrap(),
            "gene",
            None,
            &["age".to_string()],
        )
        .unwrap();
        assert_eq!(d.sample_ids, vec!["a", "d"]);
        assert_eq!(d.dropped_rows, 2);
        assert_eq!(d.p(), 1);
    }

    #[test]
    fn bad_event_code_rejected() {
        let f = write("id,time,status,gene\na,5,2,0.1\n");
        let err = read_dataset(f.path(), &OutcomeColumns::parse("time,status").unwrap(), "gene", None, &[])
            .unwrap_err();
        assert!(err.to_string().contains("'status'"));
    }

    #[test]
    fn both_layouts_give_same_blocks() {
        let rows = write("sample,g1,g2,g3\ns1,1,2,3\ns2,4,5,6\n");
        let cols = write("gene,s1,s2\ng1,1,4\ng2,2,5\ng3,3,6\n");
        let a = ExpressionFile::open(rows.path(), Layout::SamplesAsRows).unwrap();
        let b = ExpressionFile::open(cols.path(), Layout::GenesAsRows).unwrap();
        assert_eq!(a.genes, b.genes);
        assert_eq!(a.sample_ids, b.sample_ids);
        let collect = |e: &ExpressionFile| {
            let mut out = Vec::new();
            e.for_each_block(2, |start, vals| {
                out.push((start, vals));
                Ok(())
            })
            .unwrap();
            out
        };
        let (ra, rb) = (collect(&a), collect(&b));
        assert_eq!(ra, rb);
        assert_eq!(ra[0], (0, vec![vec![1.0, 4.0], vec![2.0, 5.0]]));
        assert_eq!(ra[1], (2, vec![vec![3.0, 6.0]]));
    }

    #[test]
    fn join_reports_unmatched() {
        let l: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let r: Vec<String> = ["c", "a", "z", "y"].iter().map(|s| s.to_string()).collect();
        let (pairs, ul, ur) = inner_join(&l, &r).unwrap();
        assert_eq!(pairs, vec![(0, 1), (2, 0)]);
        assert_eq!((ul, ur), (1, 2));
        let dup: Vec<String> = ["a", "a"].iter().map(|s| s.to_string()).collect();
        assert!(inner_join(&dup, &r).is_err());
    }
}
