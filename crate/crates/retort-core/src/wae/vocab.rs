//! The fixed reactant pool and multisets over it.

use crate::prelude::*;
use alloc::sync::Arc;
use thiserror::Error;

use crate::chem::{
    canonical_smiles, parse_smiles_strict_with, ElementTable, MolecularGraph, SmilesError,
};
use crate::ggnn::{graph_tensors, GraphTensors};

use super::WaeError;

#[derive(Debug, Error)]
pub enum VocabError {
    #[error("entry {index} (`{smiles}`): {source}")]
    Smiles {
        index: usize,
        smiles: String,
        source: SmilesError,
    },
    #[error("entry {index}: `{smiles}` duplicates an earlier entry after canonicalization")]
    Duplicate { index: usize, smiles: String },
    #[error("vocabulary is empty")]
    Empty,
    #[error("entry {index}: {source}")]
    Feature {
        index: usize,
        source: crate::chem::FeatureError,
    },
}

#[derive(Debug, Clone)]
pub struct VocabEntry {
    /// Canonical form; the key identity of the entry.
    pub smiles: String,
    /// Occurrence count from the corpus the vocabulary was built from.
    pub count: u64,
    pub graph: MolecularGraph,
    /// Cached rank-space tensors for the embedding network.
    pub tensors: GraphTensors,
}

/// The ordered reactant pool. Entry order is fixed at build time (it defines
/// decoder token ids) and must be serialized alongside trained weights.
#[derive(Debug, Clone)]
pub struct ReactantVocabulary {
    table: Arc<ElementTable>,
    entries: Vec<VocabEntry>,
    index: BTreeMap<String, usize>,
}

impl ReactantVocabulary {
    /// Build from (smiles, count) pairs, keeping the given order. Entries
    /// are parsed strictly, canonicalized, and must be unique after
    /// canonicalization.
    pub fn build(
        table: Arc<ElementTable>,
        items: &[(String, u64)],
    ) -> Result<Self, VocabError> {
        if items.is_empty() {
            return Err(VocabError::Empty);
        }
        let mut entries = Vec::with_capacity(items.len());
        let mut index = BTreeMap::new();
        for (i, (smiles, count)) in items.iter().enumerate() {
            let graph =
                parse_smiles_strict_with(&table, smiles).map_err(|source| VocabError::Smiles {
                    index: i,
                    smiles: smiles.clone(),
                    source,
                })?;
            let canonical = canonical_smiles(&graph);
            if index.contains_key(&canonical) {
                return Err(VocabError::Duplicate {
                    index: i,
                    smiles: canonical,
                });
            }
            let tensors = graph_tensors(&graph, &table)
                .map_err(|source| VocabError::Feature { index: i, source })?;
            index.insert(canonical.clone(), entries.len());
            entries.push(VocabEntry {
                smiles: canonical,
                count: *count,
                graph,
                tensors,
            });
        }
        Ok(ReactantVocabulary {
            table,
            entries,
            index,
        })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entry(&self, i: usize) -> &VocabEntry {
        &self.entries[i]
    }

    pub fn entries(&self) -> &[VocabEntry] {
        &self.entries
    }

    /// Look up a molecule by its canonical SMILES.
    pub fn lookup(&self, canonical: &str) -> Option<usize> {
        self.index.get(canonical).copied()
    }

    /// Look up an arbitrary molecule by canonicalizing it first.
    pub fn lookup_graph(&self, graph: &MolecularGraph) -> Option<usize> {
        self.lookup(&canonical_smiles(graph))
    }

    pub fn table(&self) -> &Arc<ElementTable> {
        &self.table
    }

    /// The decoder's halt token id (one past the last reactant).
    pub fn halt_token(&self) -> usize {
        self.entries.len()
    }
}

/// A multiset of vocabulary indices, stored sorted so that equal multisets
/// compare equal and iteration order never depends on construction order.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ReactantBag {
    indices: Vec<usize>,
}

impl ReactantBag {
    pub fn new(mut indices: Vec<usize>, vocab_len: usize) -> Result<Self, WaeError> {
        if indices.is_empty() {
            return Err(WaeError::EmptyBag);
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= vocab_len) {
            return Err(WaeError::BagIndexOutOfRange {
                index: bad,
                len: vocab_len,
            });
        }
        indices.sort_unstable();
        Ok(ReactantBag { indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction rejects empty bags
    }

    /// Distinct indices with multiplicities, ascending.
    pub fn counts(&self) -> Vec<(usize, usize)> {
        let mut out: Vec<(usize, usize)> = Vec::new();
        for &i in &self.indices {
            match out.last_mut() {
                Some((idx, n)) if *idx == i => *n += 1,
                _ => out.push((i, 1)),
            }
        }
        out
    }

    /// Dot-joined canonical SMILES of the members.
    pub fn smiles(&self, vocab: &ReactantVocabulary) -> String {
        let parts: Vec<&str> = self
            .indices
            .iter()
            .map(|&i| vocab.entry(i).smiles.as_str())
            .collect();
        parts.join(".")
    }

    pub fn graphs<'v>(&self, vocab: &'v ReactantVocabulary) -> Vec<&'v MolecularGraph> {
        self.indices.iter().map(|&i| &vocab.entry(i).graph).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab() -> ReactantVocabulary {
        let table = Arc::new(ElementTable::builtin());
        let items = vec![
            ("CCO".to_string(), 20),
            ("CC(=O)O".to_string(), 18),
            ("CN".to_string(), 15),
        ];
        ReactantVocabulary::build(table, &items).unwrap()
    }

    #[test]
    fn build_canonicalizes_and_indexes() {
        let v = vocab();
        assert_eq!(v.len(), 3);
        assert_eq!(v.lookup("CCO"), Some(0));
        assert_eq!(v.halt_token(), 3);
        // a non-canonical spelling resolves through lookup_graph
        let g = crate::chem::parse_smiles("OCC").unwrap();
        assert_eq!(v.lookup_graph(&g), Some(0));
    }

    #[test]
    fn duplicates_after_canonicalization_are_rejected() {
        let table = Arc::new(ElementTable::builtin());
        let items = vec![("CCO".to_string(), 2), ("OCC".to_string(), 1)];
        assert!(matches!(
            ReactantVocabulary::build(table, &items),
            Err(VocabError::Duplicate { .. })
        ));
    }

    #[test]
    fn bags_are_sorted_multisets() {
        let a = ReactantBag::new(vec![2, 0, 2], 3).unwrap();
        let b = ReactantBag::new(vec![2, 2, 0], 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.indices(), &[0, 2, 2]);
        assert_eq!(a.counts(), vec![(0, 1), (2, 2)]);
        assert!(matches!(
            ReactantBag::new(vec![], 3),
            Err(WaeError::EmptyBag)
        ));
        assert!(matches!(
            ReactantBag::new(vec![5], 3),
            Err(WaeError::BagIndexOutOfRange { .. })
        ));
    }
}
