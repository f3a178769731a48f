//! Molecular graphs, the SMILES subset, canonicalization, featurization and
//! descriptors.
//!
//! The SMILES subset: organic-subset bare atoms plus bracket atoms with
//! charge and H-count (isotopes and stereo markers are parsed and
//! discarded), bonds `- = # :`, lowercase aromatic atoms for b/c/n/o/s/p,
//! ring closures `1`-`9` and `%nn`, branches, and `.` for multi-fragment
//! inputs. A ring is aromatic iff written in lowercase; no Hückel
//! perception is attempted, and aromatic atoms are written back in
//! lowercase so output never needs kekulization.

mod canon;
mod descriptors;
mod element;
mod features;
mod graph;
mod iso;
mod smiles;

pub use canon::canonical_rank;
pub use descriptors::{descriptors, surrogate_qed, surrogate_qed_from, DescriptorRecord};
pub use element::{
    aromatic_capable, organic_subset, Element, ElementInfo, ElementTable, ElementTableError,
};
pub use features::{atom_features, feature_dim, FeatureError, DEGREE_BUCKETS, VALENCE_BUCKETS};
pub use graph::{Atom, Bond, BondOrder, GraphError, MolecularGraph, ValenceViolation};
pub use iso::isomorphic;
pub use smiles::{
    canonical_smiles, parse_smiles, parse_smiles_strict, parse_smiles_strict_with,
    parse_smiles_with, write_smiles, SmilesError,
};
