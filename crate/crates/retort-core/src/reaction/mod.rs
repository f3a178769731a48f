//! Deterministic reaction prediction: pattern matching plus graph rewriting
//! over reactant bags, and the line protocol for swapping in an external
//! learned predictor.

mod engine;
mod oracle;
mod pattern;
mod template;

pub use engine::{predict_products, TemplateLibrary, TemplateLibraryError};
pub use oracle::{format_request, parse_response, EchoOracle, OracleError, ReactionPredictor};
pub use pattern::{match_subgraph, MatchError, PatternAtom, PatternBond, PatternGraph};
pub use template::{ApplyError, ReactionTemplate, TemplateEdit};

use crate::chem::{canonical_smiles, surrogate_qed, MolecularGraph};
use crate::prelude::*;

/// One product molecule (or an unparseable stand-in from an external
/// oracle).
#[derive(Debug, Clone)]
pub struct ProductEntry {
    /// Canonical SMILES when valid, the raw text otherwise.
    pub smiles: String,
    pub graph: Option<MolecularGraph>,
    /// True iff the molecule parses and passes the valence check.
    pub valid: bool,
}

impl ProductEntry {
    pub fn from_graph(graph: MolecularGraph) -> Self {
        let valid = graph.check_valence().is_ok();
        ProductEntry {
            smiles: canonical_smiles(&graph),
            graph: Some(graph),
            valid,
        }
    }

    pub fn invalid(text: impl Into<String>) -> Self {
        ProductEntry {
            smiles: text.into(),
            graph: None,
            valid: false,
        }
    }
}

/// Multiset of products; byproducts (leaving groups) are kept separate from
/// the main products.
#[derive(Debug, Clone, Default)]
pub struct ProductBag {
    pub products: Vec<ProductEntry>,
    pub byproducts: Vec<ProductEntry>,
    /// True when no template matched and the input passed through.
    pub no_reaction: bool,
}

impl ProductBag {
    /// Largest surrogate drug-likeness over the valid main products; 0 when
    /// nothing valid.
    pub fn best_valid_score(&self) -> f64 {
        self.products
            .iter()
            .filter(|p| p.valid)
            .filter_map(|p| p.graph.as_ref())
            .map(surrogate_qed)
            .fold(0.0, f64::max)
    }

    pub fn has_valid_product(&self) -> bool {
        self.products.iter().any(|p| p.valid)
    }

    /// Canonical SMILES of the valid main products, sorted.
    pub fn valid_product_smiles(&self) -> Vec<String> {
        let mut v: Vec<String> = self
            .products
            .iter()
            .filter(|p| p.valid)
            .map(|p| p.smiles.clone())
            .collect();
        v.sort();
        v
    }

    /// Dot-joined main products then byproducts (the `react` output line).
    pub fn joined(&self) -> String {
        let parts: Vec<&str> = self
            .products
            .iter()
            .chain(self.byproducts.iter())
            .map(|p| p.smiles.as_str())
            .collect();
        parts.join(".")
    }
}
