//! Categorical case data with missing cells.

use std::io::{Read, Write};

use mdss_core::{NetworkDoc, NodeKind, Variable};

use crate::error::{LearningError, Result};

/// Cell label marking a missing value in case files.
pub const MISSING: &str = "?";

#[derive(Clone, Debug, PartialEq)]
pub struct CaseDataset {
    schema: Vec<Variable>,
    rows: Vec<Vec<Option<usize>>>,
}

impl CaseDataset {
    pub fn new(schema: Vec<Variable>, rows: Vec<Vec<Option<usize>>>) -> Result<Self> {
        for (r, row) in rows.iter().enumerate() {
            if row.len() != schema.len() {
                return Err(LearningError::Schema(format!(
                    "row {r} has {} cells, schema has {}",
                    row.len(),
                    schema.len()
                )));
            }
            for (cell, var) in row.iter().zip(&schema) {
                if let Some(s) = cell {
                    if *s >= var.cardinality() {
                        return Err(LearningError::Schema(format!(
                            "row {r}: state {s} out of range for `{}`",
                            var.name()
                        )));
                    }
                }
            }
        }
        Ok(CaseDataset { schema, rows })
    }

    pub fn schema(&self) -> &[Variable] {
        &self.schema
    }

    pub fn rows(&self) -> &[Vec<Option<usize>>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.schema.iter().position(|v| v.name() == name)
    }

    pub fn require_column(&self, name: &str) -> Result<usize> {
        self.column_index(name)
            .ok_or_else(|| LearningError::UnknownVariable(name.to_string()))
    }

    pub fn variable(&self, name: &str) -> Result<&Variable> {
        Ok(&self.schema[self.require_column(name)?])
    }

    /// Fraction of missing cells.
    pub fn missing_fraction(&self) -> f64 {
        let total = self.rows.len() * self.schema.len();
        if total == 0 {
            return 0.0;
        }
        let miss = self.rows.iter().flatten().filter(|c| c.is_none()).count();
        miss as f64 / total as f64
    }

    /// Checks that the chance nodes of `doc` and the columns agree by name
    /// and state list.
    pub fn check_against(&self, doc: &NetworkDoc) -> Result<()> {
        let chance: Vec<Variable> = doc
            .nodes
            .iter()
            .filter(|n| n.kind == NodeKind::Chance)
            .map(|n| n.variable())
            .collect::<std::result::Result<_, _>>()?;
        for v in &chance {
            match self.column_index(v.name()) {
                None => return Err(LearningError::Schema(format!("no column for `{}`", v.name()))),
                Some(i) if self.schema[i].states() != v.states() => {
                    return Err(LearningError::Schema(format!(
                        "column `{}` has states {:?}, network has {:?}",
                        v.name(),
                        self.schema[i].states(),
                        v.states()
                    )))
                }
                _ => {}
            }
        }
        if let Some(extra) = self.schema.iter().find(|c| !chance.iter().any(|v| v.name() == c.name())) {
            return Err(LearningError::Schema(format!("column `{}` is not a chance node", extra.name())));
        }
        Ok(())
    }

    /// Reads a delimited file with a header row. Columns are matched to
    /// `schema` by name and reordered to the schema order.
    pub fn read_csv<R: Read>(reader: R, schema: &[Variable]) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let mut map = Vec::with_capacity(schema.len());
        for v in schema {
            let pos = header
                .iter()
                .position(|h| h == v.name())
                .ok_or_else(|| LearningError::Schema(format!("missing column `{}`", v.name())))?;
            map.push(pos);
        }
        if let Some(extra) = header.iter().find(|h| !schema.iter().any(|v| v.name() == h.as_str())) {
            return Err(LearningError::Schema(format!("unexpected column `{extra}`")));
        }
        let mut rows = Vec::new();
        for (r, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let mut row = Vec::with_capacity(schema.len());
            for (v, &pos) in schema.iter().zip(&map) {
                let label = rec.get(pos).unwrap_or(MISSING);
                if label == MISSING || label.is_empty() {
                    row.push(None);
                } else {
                    let s = v.state_index(label).ok_or_else(|| LearningError::UnknownLabel {
                        row: r + 1,
                        column: v.name().to_string(),
                        label: label.to_string(),
                    })?;
                    row.push(Some(s));
                }
            }
            rows.push(row);
        }
        CaseDataset::new(schema.to_vec(), rows)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.schema.iter().map(Variable::name))?;
        for row in &self.rows {
            w.write_record(row.iter().zip(&self.schema).map(|(c, v)| match c {
                Some(s) => v.states()[*s].as_str(),
                None => MISSING,
            }))?;
        }
        w.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    /// Copy with each cell independently hidden with probability `rate`.
    pub fn with_missing(&self, rate: f64, seed: u64) -> CaseDataset {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let rows = self
            .rows
            .iter()
            .map(|r| r.iter().map(|c| if rng.gen_bool(rate) { None } else { *c }).collect())
            .collect();
        CaseDataset {
            schema: self.schema.clone(),
            rows,
        }
    }
}
