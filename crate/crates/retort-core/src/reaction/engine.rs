//! The template library: text format, load-time validation, and the
//! first-match prediction loop.
//!
//! Template file format (versioned, `#` comments allowed):
//!
//! ```text
//! VERSION 1
//! TEMPLATE <name>
//! PRIORITY <integer>
//! PATTERN                       # one block per reactant
//! ATOM <idx> <elem|*> [charge=<n>] [deg=<n>] [degmax=<n>] [arom=0|1] [map=<label>]
//! BOND <i> <j> <order: 1|2|3|4>
//! EDITS
//! ADD_BOND <mapA> <mapB> <order>
//! REMOVE_BOND <mapA> <mapB>
//! SET_CHARGE <map> <charge>
//! DELETE_ATOM <map>
//! BYPRODUCT <map> [<map> ...]
//! EXAMPLE <R1.R2>>P1[.P2]>
//! END
//! ```
//!
//! A lowercase element symbol in an ATOM line is shorthand for the element
//! plus `arom=1`. Every template must carry a worked EXAMPLE; it is applied
//! at load and the main products must match, so a library that loads is a
//! library whose rewrites are at least self-consistent.

use crate::prelude::*;
use alloc::sync::Arc;
use thiserror::Error;

use crate::chem::{
    canonical_smiles, parse_smiles_strict_with, BondOrder, ElementTable, MolecularGraph,
};

use super::pattern::{PatternAtom, PatternBond, PatternGraph, MAX_PATTERN_ATOMS};
use super::template::{apply_template, ApplyError, ReactionTemplate, TemplateEdit};
use super::{ProductBag, ProductEntry};

const BUILTIN: &str = include_str!("../../resources/templates.txt");

#[derive(Debug, Error)]
pub enum TemplateLibraryError {
    #[error("template file line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("template `{template}`: {msg}")]
    Validation { template: String, msg: String },
}

fn perr(line: usize, msg: impl Into<String>) -> TemplateLibraryError {
    TemplateLibraryError::Parse {
        line,
        msg: msg.into(),
    }
}

#[derive(Debug, Clone)]
pub struct TemplateLibrary {
    table: Arc<ElementTable>,
    /// Sorted by (priority, name): the prediction order.
    templates: Vec<ReactionTemplate>,
}

impl TemplateLibrary {
    /// The six default two-reactant templates shipped with the crate.
    pub fn builtin() -> Self {
        Self::parse(Arc::new(ElementTable::builtin()), BUILTIN)
            .expect("builtin template library must load")
    }

    pub fn table(&self) -> &Arc<ElementTable> {
        &self.table
    }

    pub fn templates(&self) -> &[ReactionTemplate] {
        &self.templates
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn parse(table: Arc<ElementTable>, text: &str) -> Result<Self, TemplateLibraryError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

        match lines.next() {
            Some((_, l)) if l == "VERSION 1" => {}
            Some((n, l)) => return Err(perr(n, format!("expected `VERSION 1`, got `{l}`"))),
            None => return Err(perr(0, "empty template file")),
        }

        let mut templates = Vec::new();
        let mut pending: Option<TemplateBuilder> = None;
        for (n, line) in lines {
            let mut fields = line.split_whitespace();
            let keyword = fields.next().expect("non-empty line");
            let rest: Vec<&str> = fields.collect();
            match keyword {
                "TEMPLATE" => {
                    if pending.is_some() {
                        return Err(perr(n, "TEMPLATE before previous END"));
                    }
                    let name = rest
                        .first()
                        .ok_or_else(|| perr(n, "TEMPLATE needs a name"))?;
                    pending = Some(TemplateBuilder::new(name));
                }
                "END" => {
                    let builder = pending
                        .take()
                        .ok_or_else(|| perr(n, "END without TEMPLATE"))?;
                    templates.push(builder.finish(n)?);
                }
                _ => {
                    let builder = pending
                        .as_mut()
                        .ok_or_else(|| perr(n, format!("`{keyword}` outside a TEMPLATE block")))?;
                    builder.line(&table, n, keyword, &rest)?;
                }
            }
        }
        if pending.is_some() {
            return Err(perr(0, "unterminated TEMPLATE block"));
        }

        templates.sort_by(|a, b| (a.priority, a.name.clone()).cmp(&(b.priority, b.name.clone())));
        let library = TemplateLibrary { table, templates };
        library.validate()?;
        Ok(library)
    }

    fn validate(&self) -> Result<(), TemplateLibraryError> {
        for t in &self.templates {
            let verr = |msg: String| TemplateLibraryError::Validation {
                template: t.name.clone(),
                msg,
            };
            if t.patterns.is_empty() {
                return Err(verr("no PATTERN blocks".into()));
            }
            for (i, p) in t.patterns.iter().enumerate() {
                if p.atoms.is_empty() {
                    return Err(verr(format!("pattern {i} is empty")));
                }
                if p.atoms.len() > MAX_PATTERN_ATOMS {
                    return Err(verr(format!("pattern {i} exceeds {MAX_PATTERN_ATOMS} atoms")));
                }
                if !p.is_connected() {
                    return Err(verr(format!("pattern {i} is not connected")));
                }
            }
            // map labels must be unique across patterns
            let mut labels = BTreeSet::new();
            for p in &t.patterns {
                for a in &p.atoms {
                    if let Some(m) = &a.map {
                        if !labels.insert(m.clone()) {
                            return Err(verr(format!("map label `{m}` appears twice")));
                        }
                    }
                }
            }
            let mut check_label = |l: &str| -> Result<(), TemplateLibraryError> {
                if labels.contains(l) {
                    Ok(())
                } else {
                    Err(verr(format!("edit references unknown map label `{l}`")))
                }
            };
            for e in &t.edits {
                match e {
                    TemplateEdit::AddBond { a, b, .. } | TemplateEdit::RemoveBond { a, b } => {
                        check_label(a)?;
                        check_label(b)?;
                    }
                    TemplateEdit::SetCharge { map, .. } | TemplateEdit::DeleteAtom { map } => {
                        check_label(map)?;
                    }
                }
            }
            for l in &t.byproduct_labels {
                check_label(l)?;
            }
            if t.edits.is_empty() {
                return Err(verr("no EDITS".into()));
            }
            if t.example_reactants.is_empty() {
                return Err(verr("missing EXAMPLE".into()));
            }
            self.validate_example(t)?;
        }
        Ok(())
    }

    /// Run the template on its own EXAMPLE and require the main products to
    /// come out exactly as stated (compared canonically).
    fn validate_example(&self, t: &ReactionTemplate) -> Result<(), TemplateLibraryError> {
        let verr = |msg: String| TemplateLibraryError::Validation {
            template: t.name.clone(),
            msg,
        };
        let parse = |smiles: &str| {
            parse_smiles_strict_with(&self.table, smiles)
                .map_err(|e| verr(format!("EXAMPLE `{smiles}`: {e}")))
        };
        let reactants: Vec<MolecularGraph> = t
            .example_reactants
            .iter()
            .map(|s| parse(s))
            .collect::<Result<_, _>>()?;
        let expected: Vec<String> = t
            .example_products
            .iter()
            .map(|s| parse(s).map(|g| canonical_smiles(&g)))
            .collect::<Result<_, _>>()?;
        let mut expected = expected;
        expected.sort();

        let bag = apply_template(t, &reactants).map_err(|e| match e {
            ApplyError::NoMatch => verr("EXAMPLE does not match the patterns".into()),
            other => verr(format!("EXAMPLE application failed: {other}")),
        })?;
        let got = bag.valid_product_smiles();
        if got != expected {
            return Err(verr(format!(
                "EXAMPLE products mismatch: expected {expected:?}, got {got:?}"
            )));
        }
        Ok(())
    }
}

struct TemplateBuilder {
    name: String,
    priority: Option<i32>,
    patterns: Vec<(Vec<(usize, PatternAtom)>, Vec<PatternBond>)>,
    in_edits: bool,
    edits: Vec<TemplateEdit>,
    byproducts: Vec<String>,
    example: Option<(Vec<String>, Vec<String>)>,
}

impl TemplateBuilder {
    fn new(name: &str) -> Self {
        TemplateBuilder {
            name: name.to_string(),
            priority: None,
            patterns: Vec::new(),
            in_edits: false,
            edits: Vec::new(),
            byproducts: Vec::new(),
            example: None,
        }
    }

    fn line(
        &mut self,
        table: &ElementTable,
        n: usize,
        keyword: &str,
        rest: &[&str],
    ) -> Result<(), TemplateLibraryError> {
        match keyword {
            "PRIORITY" => {
                let p: i32 = rest
                    .first()
                    .and_then(|s| s.parse().ok())
                    .ok_or_else(|| perr(n, "PRIORITY needs an integer"))?;
                self.priority = Some(p);
            }
            "PATTERN" => {
                self.in_edits = false;
                self.patterns.push((Vec::new(), Vec::new()));
            }
            "ATOM" => {
                let (atoms, _) = self
                    .patterns
                    .last_mut()
                    .ok_or_else(|| perr(n, "ATOM before PATTERN"))?;
                if rest.len() < 2 {
                    return Err(perr(n, "ATOM needs an index and an element"));
                }
                let idx: usize = rest[0]
                    .parse()
                    .map_err(|_| perr(n, "ATOM index must be an integer"))?;
                if idx != atoms.len() {
                    return Err(perr(n, format!("ATOM indices must be dense; expected {}", atoms.len())));
                }
                let atom = parse_pattern_atom(table, n, rest[1], &rest[2..])?;
                atoms.push((idx, atom));
            }
            "BOND" => {
                let (atoms, bonds) = self
                    .patterns
                    .last_mut()
                    .ok_or_else(|| perr(n, "BOND before PATTERN"))?;
                if rest.len() != 3 {
                    return Err(perr(n, "BOND needs `i j order`"));
                }
                let a: usize = rest[0].parse().map_err(|_| perr(n, "bad BOND index"))?;
                let b: usize = rest[1].parse().map_err(|_| perr(n, "bad BOND index"))?;
                let code: u8 = rest[2].parse().map_err(|_| perr(n, "bad BOND order"))?;
                let order = BondOrder::from_code(code)
                    .ok_or_else(|| perr(n, "BOND order must be 1, 2, 3 or 4"))?;
                if a >= atoms.len() || b >= atoms.len() {
                    return Err(perr(n, "BOND references an undeclared atom"));
                }
                bonds.push(PatternBond { a, b, order });
            }
            "EDITS" => self.in_edits = true,
            "ADD_BOND" => {
                if rest.len() != 3 {
                    return Err(perr(n, "ADD_BOND needs `mapA mapB order`"));
                }
                let code: u8 = rest[2].parse().map_err(|_| perr(n, "bad bond order"))?;
                let order =
                    BondOrder::from_code(code).ok_or_else(|| perr(n, "bad bond order"))?;
                self.edits.push(TemplateEdit::AddBond {
                    a: rest[0].to_string(),
                    b: rest[1].to_string(),
                    order,
                });
            }
            "REMOVE_BOND" => {
                if rest.len() != 2 {
                    return Err(perr(n, "REMOVE_BOND needs `mapA mapB`"));
                }
                self.edits.push(TemplateEdit::RemoveBond {
                    a: rest[0].to_string(),
                    b: rest[1].to_string(),
                });
            }
            "SET_CHARGE" => {
                if rest.len() != 2 {
                    return Err(perr(n, "SET_CHARGE needs `map charge`"));
                }
                let charge: i8 = rest[1].parse().map_err(|_| perr(n, "bad charge"))?;
                self.edits.push(TemplateEdit::SetCharge {
                    map: rest[0].to_string(),
                    charge,
                });
            }
            "DELETE_ATOM" => {
                if rest.len() != 1 {
                    return Err(perr(n, "DELETE_ATOM needs `map`"));
                }
                self.edits.push(TemplateEdit::DeleteAtom {
                    map: rest[0].to_string(),
                });
            }
            "BYPRODUCT" => {
                for l in rest {
                    self.byproducts.push(l.to_string());
                }
            }
            "EXAMPLE" => {
                let spec = rest.join("");
                let (lhs, rhs) = spec
                    .split_once(">>")
                    .ok_or_else(|| perr(n, "EXAMPLE needs `reactants>>products`"))?;
                let reactants = lhs.split('.').map(|s| s.to_string()).collect();
                let products = rhs.split('.').map(|s| s.to_string()).collect();
                self.example = Some((reactants, products));
            }
            other => return Err(perr(n, format!("unknown keyword `{other}`"))),
        }
        Ok(())
    }

    fn finish(self, n: usize) -> Result<ReactionTemplate, TemplateLibraryError> {
        let priority = self
            .priority
            .ok_or_else(|| perr(n, format!("template `{}` missing PRIORITY", self.name)))?;
        let (example_reactants, example_products) = self
            .example
            .ok_or_else(|| perr(n, format!("template `{}` missing EXAMPLE", self.name)))?;
        let patterns = self
            .patterns
            .into_iter()
            .map(|(atoms, bonds)| PatternGraph {
                atoms: atoms.into_iter().map(|(_, a)| a).collect(),
                bonds,
            })
            .collect();
        Ok(ReactionTemplate {
            name: self.name,
            priority,
            patterns,
            edits: self.edits,
            byproduct_labels: self.byproducts,
            example_reactants,
            example_products,
        })
    }
}

fn parse_pattern_atom(
    table: &ElementTable,
    n: usize,
    elem: &str,
    options: &[&str],
) -> Result<PatternAtom, TemplateLibraryError> {
    let mut atom = PatternAtom::default();
    if elem != "*" {
        let lowercase_aromatic = elem.len() == 1 && elem.chars().next().unwrap().is_lowercase();
        let symbol = if lowercase_aromatic {
            atom.aromatic = Some(true);
            elem.to_ascii_uppercase()
        } else {
            elem.to_string()
        };
        atom.element = Some(
            table
                .lookup(&symbol)
                .ok_or_else(|| perr(n, format!("unknown element `{elem}`")))?,
        );
    }
    for opt in options {
        let (key, value) = opt
            .split_once('=')
            .ok_or_else(|| perr(n, format!("bad atom option `{opt}`")))?;
        match key {
            "charge" => {
                atom.charge =
                    Some(value.parse().map_err(|_| perr(n, "bad charge value"))?)
            }
            "deg" => {
                atom.degree = Some(value.parse().map_err(|_| perr(n, "bad deg value"))?)
            }
            "degmax" => {
                atom.degree_max =
                    Some(value.parse().map_err(|_| perr(n, "bad degmax value"))?)
            }
            "arom" => {
                atom.aromatic = Some(match value {
                    "0" => false,
                    "1" => true,
                    _ => return Err(perr(n, "arom must be 0 or 1")),
                })
            }
            "map" => atom.map = Some(value.to_string()),
            other => return Err(perr(n, format!("unknown atom option `{other}`"))),
        }
    }
    Ok(atom)
}

/// Try templates in (priority, name) order; the first successful
/// application wins. A template whose edit fails validity on this
/// particular bag is treated as non-matching (the error type is surfaced by
/// [`apply_template`] itself; the built-in library is validated never to do
/// this). If nothing matches, the input molecules pass through flagged
/// `no_reaction`.
pub fn predict_products(bag: &[MolecularGraph], library: &TemplateLibrary) -> ProductBag {
    for template in &library.templates {
        match apply_template(template, bag) {
            Ok(products) => return products,
            Err(ApplyError::NoMatch) => continue,
            Err(ApplyError::InvalidEdit { .. }) | Err(ApplyError::Match(_)) => continue,
        }
    }
    let mut products: Vec<ProductEntry> = bag
        .iter()
        .map(|g| ProductEntry::from_graph(g.clone()))
        .collect();
    products.sort_by(|a, b| a.smiles.cmp(&b.smiles));
    ProductBag {
        products,
        byproducts: Vec::new(),
        no_reaction: true,
    }
}
