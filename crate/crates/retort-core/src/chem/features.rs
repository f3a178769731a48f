//! Fixed atom featurization feeding the graph network.
//!
//! Layout: element one-hot (table order) ++ degree one-hot ++
//! explicit-valence one-hot ++ [hydrogen count, electronegativity, atomic
//! number, aromatic flag, formal charge].

use crate::prelude::*;
use thiserror::Error;

use super::element::ElementTable;
use super::graph::MolecularGraph;

pub const DEGREE_BUCKETS: [u32; 9] = [0, 1, 2, 3, 4, 5, 6, 7, 10];
pub const VALENCE_BUCKETS: [u32; 12] = [0, 1, 2, 3, 4, 5, 6, 7, 8, 10, 12, 14];

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("element `{symbol}` not present in the feature element table")]
    UnsupportedElement { symbol: String },
}

/// Feature vector length for a given element table.
pub fn feature_dim(table: &ElementTable) -> usize {
    table.len() + DEGREE_BUCKETS.len() + VALENCE_BUCKETS.len() + 5
}

/// Nearest bucket index; ties go to the lower bucket.
fn bucket(value: u32, buckets: &[u32]) -> usize {
    let mut best = 0usize;
    let mut best_dist = u32::MAX;
    for (i, &b) in buckets.iter().enumerate() {
        let dist = value.abs_diff(b);
        if dist < best_dist {
            best = i;
            best_dist = dist;
        }
    }
    best
}

pub fn atom_features(
    graph: &MolecularGraph,
    atom_index: usize,
    table: &ElementTable,
) -> Result<Vec<f64>, FeatureError> {
    let atom = graph.atom(atom_index);
    let symbol = graph.table().symbol(atom.element);
    let element = table
        .lookup(symbol)
        .ok_or_else(|| FeatureError::UnsupportedElement {
            symbol: symbol.to_string(),
        })?;
    let info = table.info(element);

    let mut v = vec![0.0; feature_dim(table)];
    let mut offset = 0;
    v[offset + element.index()] = 1.0;
    offset += table.len();

    v[offset + bucket(graph.degree(atom_index) as u32, &DEGREE_BUCKETS)] = 1.0;
    offset += DEGREE_BUCKETS.len();

    v[offset + bucket(graph.explicit_valence(atom_index), &VALENCE_BUCKETS)] = 1.0;
    offset += VALENCE_BUCKETS.len();

    v[offset] = graph.hydrogens(atom_index) as f64;
    v[offset + 1] = info.electronegativity;
    v[offset + 2] = info.atomic_number as f64;
    v[offset + 3] = if atom.aromatic { 1.0 } else { 0.0 };
    v[offset + 4] = atom.formal_charge as f64;
    Ok(v)
}
