use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

use super::{BowVector, WordId};
use crate::ids::KeyframeId;

/// Inverted index from words to the keyframes containing them.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct BowDatabase {
    index: BTreeMap<WordId, Vec<(KeyframeId, f64)>>,
    vectors: BTreeMap<KeyframeId, BowVector>,
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    vectors: BTreeMap<KeyframeId, BowVector>,
}

impl BowDatabase {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn contains(&self, id: KeyframeId) -> bool {
        self.vectors.contains_key(&id)
    }

    pub fn vector(&self, id: KeyframeId) -> Option<&BowVector> {
        self.vectors.get(&id)
    }

    /// Adds or replaces the vector stored for `id`.
    pub fn insert(&mut self, id: KeyframeId, v: BowVector) {
        self.remove(id);
        for (w, weight) in v.iter() {
            self.index.entry(w).or_default().push((id, weight));
        }
        self.vectors.insert(id, v);
    }

    pub fn remove(&mut self, id: KeyframeId) -> Option<BowVector> {
        let old = self.vectors.remove(&id)?;
        for (w, _) in old.iter() {
            if let Some(list) = self.index.get_mut(&w) {
                list.retain(|(k, _)| *k != id);
                if list.is_empty() {
                    self.index.remove(&w);
                }
            }
        }
        Some(old)
    }

    /// Up to `n` keyframes with a positive L1 score against `v`, highest
    /// first (ties: lower id first). Ids in `exclude` never appear.
    pub fn query(&self, v: &BowVector, n: usize, exclude: &BTreeSet<KeyframeId>) -> Vec<(KeyframeId, f64)> {
        let mut acc: BTreeMap<KeyframeId, f64> = BTreeMap::new();
        for (w, a) in v.iter() {
            if let Some(list) = self.index.get(&w) {
                for &(id, b) in list {
                    if exclude.contains(&id) {
                        continue;
                    }
                    *acc.entry(id).or_insert(0.0) += (a.abs() + b.abs() - (a - b).abs()) / 2.0;
                }
            }
        }
        let mut out: Vec<(KeyframeId, f64)> = acc
            .into_iter()
            .filter(|(_, s)| *s > 0.0)
            .map(|(id, s)| (id, s.clamp(0.0, 1.0)))
            .collect();
        out.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        out.truncate(n);
        out
    }

    /// Index entries as `(word, keyframe, weight)`, for consistency checks.
    pub fn index_entries(&self) -> Vec<(WordId, KeyframeId, f64)> {
        self.index
            .iter()
            .flat_map(|(w, list)| list.iter().map(move |&(id, x)| (*w, id, x)))
            .collect()
    }

    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string(&Snapshot {
            vectors: self.vectors.clone(),
        })
    }

    pub fn from_json(s: &str) -> serde_json::Result<Self> {
        let snap: Snapshot = serde_json::from_str(s)?;
        let mut db = BowDatabase::new();
        for (id, v) in snap.vectors {
            db.insert(id, v);
        }
        Ok(db)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bow::score;
    use proptest::prelude::*;

    fn arb_vector() -> impl Strategy<Value = BowVector> {
        prop::collection::btree_map(0u32..200, 0.01f64..5.0, 1..30)
            .prop_map(|m| BowVector::from_weights(m.into_iter().map(|(k, v)| (WordId(k), v)).collect()))
    }

    #[test]
    fn empty_database_returns_nothing() {
        let db = BowDatabase::new();
        let v = BowVector::from_weights([(WordId(1), 1.0)].into_iter().collect());
        assert!(db.query(&v, 5, &BTreeSet::new()).is_empty());
    }

    proptest! {
        #[test]
        fn self_is_top_and_exclusion_holds(vs in prop::collection::vec(arb_vector(), 1..25), pick in 0usize..25, excl in prop::collection::btree_set(0u32..25, 0..10)) {
            let mut db = BowDatabase::new();
            for (i, v) in vs.iter().enumerate() {
                db.insert(KeyframeId(i as u32), v.clone());
            }
            let i = pick % vs.len();
            let id = KeyframeId(i as u32);
            let top = db.query(&vs[i], 1, &BTreeSet::new());
            prop_assert!((top[0].1 - 1.0).abs() < 1e-9);
            // Duplicates may tie with score 1; the query result must include a perfect match.
            prop_assert!(score(db.vector(top[0].0).unwrap(), &vs[i]) > 1.0 - 1e-9);
            let exclude: BTreeSet<KeyframeId> = excl.into_iter().map(KeyframeId).collect();
            let res = db.query(&vs[i], 100, &exclude);
            prop_assert!(res.iter().all(|(k, _)| !exclude.contains(k)));
            if !exclude.contains(&id) {
                prop_assert!(res.iter().any(|(k, s)| *k == id && (*s - 1.0).abs() < 1e-9));
            }
            for (k, s) in &res {
                prop_assert!((s - score(db.vector(*k).unwrap(), &vs[i])).abs() < 1e-9);
            }
            // Index mirrors inserted vectors.
            let mut expected: Vec<(WordId, KeyframeId, f64)> = Vec::new();
            for (j, v) in vs.iter().enumerate() {
                for (w, x) in v.iter() {
                    expected.push((w, KeyframeId(j as u32), x));
                }
            }
            expected.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut got = db.index_entries();
            got.sort_by(|a, b| a.0.cmp(&b.0).then(a.1.cmp(&b.1)));
            prop_assert_eq!(got, expected);
        }
    }

    #[test]
    fn snapshot_round_trip_and_remove() {
        let mut db = BowDatabase::new();
        db.insert(KeyframeId(3), BowVector::from_weights([(WordId(1), 1.0), (WordId(4), 2.0)].into_iter().collect()));
        db.insert(KeyframeId(5), BowVector::from_weights([(WordId(4), 1.0)].into_iter().collect()));
        let back = BowDatabase::from_json(&db.to_json().unwrap()).unwrap();
        assert_eq!(back, db);
        db.remove(KeyframeId(3));
        assert_eq!(db.index_entries().len(), 1);
    }
}
