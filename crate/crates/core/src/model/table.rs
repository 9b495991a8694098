use serde::{Deserialize, Serialize};

use super::design::{enumerate_instances, DesignSpec, ModelInstanceKey};
use crate::error::{Error, Result};

/// A scalar metric for every model instance of a design. Missing entries are
/// `None`; they are never filled with placeholder numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricTable {
    pub metric_name: String,
    pub design: DesignSpec,
    values: Vec<Option<f64>>,
}

impl MetricTable {
    pub fn empty(metric_name: impl Into<String>, design: DesignSpec) -> Self {
        let n = design.n_instances();
        MetricTable {
            metric_name: metric_name.into(),
            design,
            values: vec![None; n],
        }
    }

    pub fn from_fn(
        metric_name: impl Into<String>,
        design: DesignSpec,
        mut f: impl FnMut(&ModelInstanceKey) -> f64,
    ) -> Result<Self> {
        let mut table = MetricTable::empty(metric_name, design);
        for key in enumerate_instances(&table.design) {
            table.set(&key, f(&key))?;
        }
        Ok(table)
    }

    /// Builds a table from values in enumeration order.
    pub fn from_values(
        metric_name: impl Into<String>,
        design: DesignSpec,
        values: Vec<Option<f64>>,
    ) -> Result<Self> {
        if values.len() != design.n_instances() {
            return Err(Error::Design(format!(
                "table holds {} values, design has {} instances",
                values.len(),
                design.n_instances()
            )));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::invalid("metric values must be finite"));
        }
        Ok(MetricTable {
            metric_name: metric_name.into(),
            design,
            values,
        })
    }

    /// Re-checks shape after deserialization.
    pub fn validate(&self) -> Result<()> {
        if self.values.len() != self.design.n_instances() {
            return Err(Error::Design(format!(
                "table {} holds {} values, design has {} instances",
                self.metric_name,
                self.values.len(),
                self.design.n_instances()
            )));
        }
        Ok(())
    }

    pub fn get(&self, key: &ModelInstanceKey) -> Option<f64> {
        self.values[self.design.offset(key)]
    }

    pub fn set(&mut self, key: &ModelInstanceKey, value: f64) -> Result<()> {
        if !self.design.contains(key) {
            return Err(Error::invalid(format!("{key:?} outside design")));
        }
        if !value.is_finite() {
            return Err(Error::invalid(format!(
                "non-finite value {value} for {}",
                key.label()
            )));
        }
        let at = self.design.offset(key);
        self.values[at] = Some(value);
        Ok(())
    }

    pub fn mark_missing(&mut self, key: &ModelInstanceKey) {
        let at = self.design.offset(key);
        self.values[at] = None;
    }

    pub fn values(&self) -> &[Option<f64>] {
        &self.values
    }

    pub fn missing_mask(&self) -> Vec<bool> {
        self.values.iter().map(Option::is_none).collect()
    }

    /// The `n_cluster_sets × n_inits` block for one (model, quantity) cell,
    /// row-major by cluster set, or `None` if any entry is missing.
    pub fn cell(&self, model: usize, quantity: usize) -> Option<Vec<f64>> {
        let start = self
            .design
            .offset(&ModelInstanceKey::new(model, quantity, 0, 0));
        let len = self.design.n_cluster_sets * self.design.n_inits;
        self.values[start..start + len].iter().copied().collect()
    }

    /// Scores for one (quantity, cluster set) slice, indexed `[model][init]`.
    pub fn slice(&self, quantity: usize, cluster_set: usize) -> Option<Vec<Vec<f64>>> {
        (0..self.design.n_models)
            .map(|m| {
                (0..self.design.n_inits)
                    .map(|i| self.get(&ModelInstanceKey::new(m, quantity, cluster_set, i)))
                    .collect()
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> DesignSpec {
        DesignSpec {
            n_models: 2,
            quantity_levels: vec![1, 2],
            n_cluster_sets: 3,
            n_inits: 2,
        }
    }

    #[test]
    fn cell_extraction_and_mask() {
        let mut t =
            MetricTable::from_fn("x", small(), |k| k.label().len() as f64 + k.init as f64).unwrap();
        let cell = t.cell(1, 0).unwrap();
        assert_eq!(cell.len(), 6);
        let key = ModelInstanceKey::new(1, 0, 2, 1);
        assert_eq!(cell[5], t.get(&key).unwrap());
        t.mark_missing(&key);
        assert!(t.cell(1, 0).is_none());
        assert!(t.cell(0, 0).is_some());
        assert_eq!(t.missing_mask().iter().filter(|&&m| m).count(), 1);
    }

    #[test]
    fn rejects_non_finite_and_bad_shape() {
        let mut t = MetricTable::empty("x", small());
        assert!(t.set(&ModelInstanceKey::new(0, 0, 0, 0), f64::NAN).is_err());
        assert!(t.set(&ModelInstanceKey::new(2, 0, 0, 0), 1.0).is_err());
        assert!(MetricTable::from_values("x", small(), vec![None; 3]).is_err());
    }

    #[test]
    fn json_uses_null_for_missing() {
        let mut t = MetricTable::empty("x", small());
        t.set(&ModelInstanceKey::new(0, 0, 0, 0), 0.5).unwrap();
        let s = serde_json::to_string(&t).unwrap();
        assert!(s.contains("[0.5,null"));
        let back: MetricTable = serde_json::from_str(&s).unwrap();
        back.validate().unwrap();
        assert_eq!(back, t);
    }
}
