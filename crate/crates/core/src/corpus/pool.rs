use indexmap::IndexSet;

use super::Dataset;
use crate::{Error, Result};

/// Labeled / unlabeled partition of a training dataset's sample ids, kept
/// in insertion order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolState {
    labeled: IndexSet<String>,
    unlabeled: IndexSet<String>,
}

impl PoolState {
    /// Every sample of `ds` starts unlabeled, in dataset order.
    pub fn new(ds: &Dataset) -> Self {
        Self {
            labeled: IndexSet::new(),
            unlabeled: ds.samples().iter().map(|s| s.sample_id.clone()).collect(),
        }
    }

    pub fn from_ids(unlabeled: impl IntoIterator<Item = String>) -> Self {
        Self {
            labeled: IndexSet::new(),
            unlabeled: unlabeled.into_iter().collect(),
        }
    }

    pub fn labeled(&self) -> &IndexSet<String> {
        &self.labeled
    }

    pub fn unlabeled(&self) -> &IndexSet<String> {
        &self.unlabeled
    }

    pub fn total(&self) -> usize {
        self.labeled.len() + self.unlabeled.len()
    }

    pub fn is_exhausted(&self) -> bool {
        self.unlabeled.is_empty()
    }

    /// Moves `ids` from the unlabeled to the labeled set.
    pub fn label<'a>(&mut self, ids: impl IntoIterator<Item = &'a String>) -> Result<()> {
        for id in ids {
            if !self.unlabeled.shift_remove(id) {
                return Err(Error::Dataset(format!("sample {id} is not in the unlabeled pool")));
            }
            self.labeled.insert(id.clone());
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn labeling_moves_ids_and_preserves_order() {
        let mut pool = PoolState::from_ids(["a", "b", "c", "d"].map(String::from));
        pool.label(&["c".to_string(), "a".to_string()]).unwrap();
        assert_eq!(pool.labeled().iter().collect::<Vec<_>>(), ["c", "a"]);
        assert_eq!(pool.unlabeled().iter().collect::<Vec<_>>(), ["b", "d"]);
        assert_eq!(pool.total(), 4);
        assert!(pool.label(&["a".to_string()]).is_err());
    }
}
