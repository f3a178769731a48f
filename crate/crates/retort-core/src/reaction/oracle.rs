//! The reaction-predictor abstraction and the one-line-per-bag wire
//! protocol for external predictors.
//!
//! Protocol: request `R1.R2.…\n` (dot-joined canonical reactant SMILES),
//! response `P1.P2.…\n` or `ERROR <msg>\n`, UTF-8, one round trip per bag.
//! Unparseable product tokens become invalid entries rather than failures —
//! a learned predictor is allowed to emit garbage and the metrics count it.

use crate::prelude::*;
use alloc::sync::Arc;
use thiserror::Error;

use crate::chem::{canonical_smiles, parse_smiles_with, ElementTable, MolecularGraph};

use super::engine::{predict_products, TemplateLibrary};
use super::{ProductBag, ProductEntry};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("reaction oracle unavailable: {0}")]
    Unavailable(String),
}

/// A function from a reactant bag to a product bag. Takes `&mut self`
/// because a wire-backed oracle is one-request-one-response: the caller
/// holds exclusive access for the round trip.
pub trait ReactionPredictor {
    fn react(&mut self, bag: &[MolecularGraph]) -> Result<ProductBag, OracleError>;
}

impl ReactionPredictor for TemplateLibrary {
    fn react(&mut self, bag: &[MolecularGraph]) -> Result<ProductBag, OracleError> {
        Ok(predict_products(bag, self))
    }
}

/// One request line (without the newline): dot-joined canonical SMILES.
pub fn format_request(bag: &[MolecularGraph]) -> String {
    let parts: Vec<String> = bag.iter().map(canonical_smiles).collect();
    parts.join(".")
}

/// Parse one response line. `ERROR <msg>` and unparseable tokens become
/// invalid product entries; molecules that parse but fail the valence check
/// are invalid too.
pub fn parse_response(table: &Arc<ElementTable>, line: &str) -> ProductBag {
    let line = line.trim_end();
    if let Some(msg) = line.strip_prefix("ERROR ") {
        return ProductBag {
            products: vec![ProductEntry::invalid(format!("ERROR {msg}"))],
            byproducts: Vec::new(),
            no_reaction: false,
        };
    }
    let mut products = Vec::new();
    for token in line.split('.') {
        if token.is_empty() {
            products.push(ProductEntry::invalid(""));
            continue;
        }
        match parse_smiles_with(table, token) {
            Ok(graph) => products.push(ProductEntry::from_graph(graph)),
            Err(_) => products.push(ProductEntry::invalid(token)),
        }
    }
    ProductBag {
        products,
        byproducts: Vec::new(),
        no_reaction: false,
    }
}

/// Test oracle that returns its input unchanged.
pub struct EchoOracle {
    table: Arc<ElementTable>,
}

impl EchoOracle {
    pub fn new(table: Arc<ElementTable>) -> Self {
        EchoOracle { table }
    }
}

impl ReactionPredictor for EchoOracle {
    fn react(&mut self, bag: &[MolecularGraph]) -> Result<ProductBag, OracleError> {
        let request = format_request(bag);
        Ok(parse_response(&self.table, &request))
    }
}
