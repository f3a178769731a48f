mod parse;
mod write;

pub use parse::{
    parse_smiles, parse_smiles_strict, parse_smiles_strict_with, parse_smiles_with, SmilesError,
};
pub use write::write_smiles;

use super::MolecularGraph;
use crate::prelude::*;

/// Parse and re-write: the unique string this crate assigns to the
/// molecule's isomorphism class.
pub fn canonical_smiles(graph: &MolecularGraph) -> String {
    write_smiles(graph)
}
