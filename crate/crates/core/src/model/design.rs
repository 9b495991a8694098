use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dimensions of the training experiment: approaches × data budgets ×
/// cluster-set repeats × initializations.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub n_models: usize,
    pub quantity_levels: Vec<usize>,
    pub n_cluster_sets: usize,
    pub n_inits: usize,
}

impl Default for DesignSpec {
    fn default() -> Self {
        DesignSpec {
            n_models: 3,
            quantity_levels: vec![1, 3, 6, 9, 12],
            n_cluster_sets: 12,
            n_inits: 4,
        }
    }
}

impl DesignSpec {
    pub fn n_quantities(&self) -> usize {
        self.quantity_levels.len()
    }

    pub fn n_instances(&self) -> usize {
        self.n_models * self.n_quantities() * self.n_cluster_sets * self.n_inits
    }

    pub fn n_cells(&self) -> usize {
        self.n_models * self.n_quantities()
    }

    /// Checks the constraints needed to separate the two variance components.
    /// `training_clusters` bounds the quantity levels when known.
    pub fn validate(&self, training_clusters: Option<usize>) -> Result<()> {
        if self.n_models < 2 {
            return Err(Error::Design("need at least 2 models".into()));
        }
        if self.n_cluster_sets < 2 {
            return Err(Error::Design("need at least 2 cluster sets".into()));
        }
        if self.n_inits < 2 {
            return Err(Error::Design("need at least 2 initializations".into()));
        }
        if self.quantity_levels.is_empty() {
            return Err(Error::Design("no quantity levels".into()));
        }
        if self.quantity_levels[0] == 0 {
            return Err(Error::Design("quantity levels must be positive".into()));
        }
        if self.quantity_levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Design(
                "quantity levels must be strictly increasing".into(),
            ));
        }
        if let Some(limit) = training_clusters {
            let top = *self.quantity_levels.last().unwrap();
            if top > limit {
                return Err(Error::Design(format!(
                    "quantity level {top} exceeds {limit} training clusters"
                )));
            }
        }
        Ok(())
    }

    pub fn contains(&self, key: &ModelInstanceKey) -> bool {
        key.model < self.n_models
            && key.quantity < self.n_quantities()
            && key.cluster_set < self.n_cluster_sets
            && key.init < self.n_inits
    }

    /// Flat lexicographic position of `key`.
    pub fn offset(&self, key: &ModelInstanceKey) -> usize {
        debug_assert!(self.contains(key));
        ((key.model * self.n_quantities() + key.quantity) * self.n_cluster_sets + key.cluster_set)
            * self.n_inits
            + key.init
    }
}

/// Identifies one trained model instance within a [`DesignSpec`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ModelInstanceKey {
    pub model: usize,
    pub quantity: usize,
    pub cluster_set: usize,
    pub init: usize,
}

impl ModelInstanceKey {
    pub fn new(model: usize, quantity: usize, cluster_set: usize, init: usize) -> Self {
        ModelInstanceKey {
            model,
            quantity,
            cluster_set,
            init,
        }
    }

    pub fn label(&self) -> String {
        format!(
            "m{}_a{}_d{}_i{}",
            self.model, self.quantity, self.cluster_set, self.init
        )
    }
}

/// All instance keys in lexicographic `(model, quantity, cluster_set, init)`
/// order. Does not validate the design, so degenerate shapes enumerate too.
pub fn enumerate_instances(design: &DesignSpec) -> Vec<ModelInstanceKey> {
    let mut keys = Vec::with_capacity(design.n_instances());
    for model in 0..design.n_models {
        for quantity in 0..design.n_quantities() {
            for cluster_set in 0..design.n_cluster_sets {
                for init in 0..design.n_inits {
                    keys.push(ModelInstanceKey::new(model, quantity, cluster_set, init));
                }
            }
        }
    }
    keys
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_design_has_720_instances() {
        let d = DesignSpec::default();
        d.validate(Some(12)).unwrap();
        assert_eq!(enumerate_instances(&d).len(), 720);
    }

    #[test]
    fn tiny_design_order() {
        let d = DesignSpec {
            n_models: 1,
            quantity_levels: vec![1],
            n_cluster_sets: 2,
            n_inits: 2,
        };
        let keys = enumerate_instances(&d);
        assert_eq!(
            keys,
            vec![
                ModelInstanceKey::new(0, 0, 0, 0),
                ModelInstanceKey::new(0, 0, 0, 1),
                ModelInstanceKey::new(0, 0, 1, 0),
                ModelInstanceKey::new(0, 0, 1, 1),
            ]
        );
    }

    #[test]
    fn validation_rules() {
        let mut d = DesignSpec::default();
        assert!(d.validate(Some(11)).is_err());
        d.quantity_levels = vec![1, 3, 3];
        assert!(d.validate(None).is_err());
        d = DesignSpec {
            n_inits: 1,
            ..DesignSpec::default()
        };
        assert!(d.validate(None).is_err());
    }

    proptest! {
        #[test]
        fn enumeration_is_a_sorted_bijection(m in 1usize..4, a in 1usize..4, dd in 1usize..5, i in 1usize..5) {
            let d = DesignSpec { n_models: m, quantity_levels: (1..=a).collect(), n_cluster_sets: dd, n_inits: i };
            let keys = enumerate_instances(&d);
            prop_assert_eq!(keys.len(), m * a * dd * i);
            let mut sorted = keys.clone();
            sorted.sort();
            sorted.dedup();
            prop_assert_eq!(&sorted, &keys);
            for (pos, k) in keys.iter().enumerate() {
                prop_assert_eq!(d.offset(k), pos);
            }
        }
    }
}
