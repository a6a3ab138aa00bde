use std::io::Write;

use serde::{Deserialize, Serialize};

use super::ForestError;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FeatureColumn {
    pub name: String,
    pub unit: String,
}

impl FeatureColumn {
    pub fn new(name: impl Into<String>, unit: impl Into<String>) -> Self {
        FeatureColumn { name: name.into(), unit: unit.into() }
    }
}

/// Row-major feature values with an explicit missing state.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    schema: Vec<FeatureColumn>,
    ids: Vec<String>,
    values: Vec<Option<f64>>,
}

impl FeatureMatrix {
    pub fn new(schema: Vec<FeatureColumn>, ids: Vec<String>, rows: Vec<Vec<Option<f64>>>) -> Result<Self, ForestError> {
        if ids.len() != rows.len() {
            return Err(ForestError::Shape(format!("{} ids for {} rows", ids.len(), rows.len())));
        }
        let width = schema.len();
        let mut values = Vec::with_capacity(rows.len() * width);
        for (i, row) in rows.into_iter().enumerate() {
            if row.len() != width {
                return Err(ForestError::Shape(format!("row {i} has {} values, schema has {width}", row.len())));
            }
            for v in row {
                // NaN is folded into the explicit missing state.
                values.push(v.filter(|x| !x.is_nan()));
            }
        }
        Ok(FeatureMatrix { schema, ids, values })
    }

    pub fn empty(schema: Vec<FeatureColumn>) -> Self {
        FeatureMatrix { schema, ids: Vec::new(), values: Vec::new() }
    }

    pub fn schema(&self) -> &[FeatureColumn] {
        &self.schema
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn n_rows(&self) -> usize {
        self.ids.len()
    }

    pub fn n_features(&self) -> usize {
        self.schema.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn row(&self, i: usize) -> &[Option<f64>] {
        let w = self.schema.len();
        &self.values[i * w..(i + 1) * w]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[Option<f64>]> + '_ {
        (0..self.n_rows()).map(move |i| self.row(i))
    }

    /// Rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> FeatureMatrix {
        let w = self.schema.len();
        let mut values = Vec::with_capacity(indices.len() * w);
        let mut ids = Vec::with_capacity(indices.len());
        for &i in indices {
            ids.push(self.ids[i].clone());
            values.extend_from_slice(self.row(i));
        }
        FeatureMatrix { schema: self.schema.clone(), ids, values }
    }

    /// Writes `id,<feature...>` with empty cells for missing values.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), csv::Error> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = vec!["id".to_string()];
        header.extend(self.schema.iter().map(|c| c.name.clone()));
        w.write_record(&header)?;
        for (i, id) in self.ids.iter().enumerate() {
            let mut rec = vec![id.clone()];
            rec.extend(self.row(i).iter().map(|v| v.map(|x| x.to_string()).unwrap_or_default()));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}
