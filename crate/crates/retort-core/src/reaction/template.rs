//! Reaction templates: per-reactant patterns plus a bond-edit list, applied
//! by rewriting the disjoint union of the matched bag.

use crate::prelude::*;
use thiserror::Error;

use crate::chem::{canonical_smiles, Atom, Bond, BondOrder, GraphError, MolecularGraph};

use super::pattern::{match_subgraph, MatchError, PatternGraph};
use super::{ProductBag, ProductEntry};

#[derive(Debug, Clone)]
pub enum TemplateEdit {
    AddBond {
        a: String,
        b: String,
        order: BondOrder,
    },
    RemoveBond {
        a: String,
        b: String,
    },
    SetCharge {
        map: String,
        charge: i8,
    },
    /// Reserved; the built-in library never deletes atoms (heavy-atom
    /// conservation).
    DeleteAtom {
        map: String,
    },
}

#[derive(Debug, Clone)]
pub struct ReactionTemplate {
    pub name: String,
    pub priority: i32,
    pub patterns: Vec<PatternGraph>,
    pub edits: Vec<TemplateEdit>,
    /// Map labels whose connected component (after edits) is a leaving
    /// group rather than a main product.
    pub byproduct_labels: Vec<String>,
    /// Worked example validated at load: reactant SMILES and the expected
    /// main products.
    pub example_reactants: Vec<String>,
    pub example_products: Vec<String>,
}

#[derive(Debug, Error)]
pub enum ApplyError {
    #[error("no match")]
    NoMatch,
    #[error("template `{template}` produced an invalid graph: {detail}")]
    InvalidEdit { template: String, detail: String },
    #[error(transparent)]
    Match(#[from] MatchError),
}

impl ReactionTemplate {
    /// Resolve a map label to (pattern index, atom index). Labels are
    /// unique across patterns (validated at load).
    fn resolve(&self, label: &str) -> Option<(usize, usize)> {
        for (pi, p) in self.patterns.iter().enumerate() {
            if let Some(ai) = p.find_map(label) {
                return Some((pi, ai));
            }
        }
        None
    }
}

/// Apply `template` to a bag of molecules.
///
/// The bag is first put in a canonical order (atom count, then canonical
/// SMILES) so the outcome never depends on input order. Pattern-to-member
/// assignments are tried in lexicographic order and the first assignment
/// where every pattern matches wins; its first match combination is
/// rewritten. An edit that yields an invalid graph is surfaced as
/// [`ApplyError::InvalidEdit`], never silently skipped.
pub fn apply_template(
    template: &ReactionTemplate,
    bag: &[MolecularGraph],
) -> Result<ProductBag, ApplyError> {
    if bag.len() != template.patterns.len() {
        return Err(ApplyError::NoMatch);
    }
    let mut order: Vec<usize> = (0..bag.len()).collect();
    let keys: Vec<(usize, String)> = bag
        .iter()
        .map(|g| (g.atom_count(), canonical_smiles(g)))
        .collect();
    order.sort_by(|&x, &y| keys[x].cmp(&keys[y]));
    let sorted: Vec<&MolecularGraph> = order.iter().map(|&i| &bag[i]).collect();

    let n = sorted.len();
    let mut assignment: Vec<usize> = Vec::with_capacity(n);
    let mut used = vec![false; n];
    let found = find_assignment(template, &sorted, 0, &mut assignment, &mut used)?;
    let Some(matches) = found else {
        return Err(ApplyError::NoMatch);
    };

    rewrite(template, &sorted, &assignment_of(&matches), &matches)
}

struct PatternMatch {
    member: usize,
    mapping: Vec<usize>,
}

fn assignment_of(matches: &[PatternMatch]) -> Vec<usize> {
    matches.iter().map(|m| m.member).collect()
}

/// Depth-first over injective pattern->member assignments in lexicographic
/// order; for each assignment take the first match of each pattern.
fn find_assignment(
    template: &ReactionTemplate,
    sorted: &[&MolecularGraph],
    depth: usize,
    assignment: &mut Vec<usize>,
    used: &mut [bool],
) -> Result<Option<Vec<PatternMatch>>, MatchError> {
    if depth == template.patterns.len() {
        // all patterns matched along the way; rebuild the match list
        let mut matches = Vec::with_capacity(depth);
        for (pi, &member) in assignment.iter().enumerate() {
            let maps = match_subgraph(&template.patterns[pi], sorted[member])?;
            matches.push(PatternMatch {
                member,
                mapping: maps.into_iter().next().expect("assignment was matched"),
            });
        }
        return Ok(Some(matches));
    }
    for member in 0..sorted.len() {
        if used[member] {
            continue;
        }
        let maps = match_subgraph(&template.patterns[depth], sorted[member])?;
        if maps.is_empty() {
            continue;
        }
        used[member] = true;
        assignment.push(member);
        if let Some(found) = find_assignment(template, sorted, depth + 1, assignment, used)? {
            return Ok(Some(found));
        }
        assignment.pop();
        used[member] = false;
    }
    Ok(None)
}

fn rewrite(
    template: &ReactionTemplate,
    sorted: &[&MolecularGraph],
    assignment: &[usize],
    matches: &[PatternMatch],
) -> Result<ProductBag, ApplyError> {
    let invalid = |detail: String| ApplyError::InvalidEdit {
        template: template.name.clone(),
        detail,
    };

    // disjoint union in sorted-member order
    let table = sorted[0].table().clone();
    let mut offsets = vec![0usize; sorted.len()];
    let mut atoms: Vec<Atom> = Vec::new();
    let mut bonds: Vec<Bond> = Vec::new();
    for (member, graph) in sorted.iter().enumerate() {
        offsets[member] = atoms.len();
        atoms.extend(graph.atoms().iter().cloned());
        bonds.extend(graph.bonds().iter().map(|b| Bond {
            a: b.a + offsets[member],
            b: b.b + offsets[member],
            order: b.order,
        }));
    }

    // map label -> union atom index
    let union_index = |label: &str| -> Result<usize, ApplyError> {
        let (pi, ai) = template
            .resolve(label)
            .ok_or_else(|| invalid(format!("unknown map label `{label}`")))?;
        let member = assignment[pi];
        Ok(offsets[member] + matches[pi].mapping[ai])
    };

    let mut deletions: Vec<usize> = Vec::new();
    for edit in &template.edits {
        match edit {
            TemplateEdit::AddBond { a, b, order } => {
                let (ia, ib) = (union_index(a)?, union_index(b)?);
                if bonds
                    .iter()
                    .any(|bd| (bd.a == ia && bd.b == ib) || (bd.a == ib && bd.b == ia))
                {
                    return Err(invalid(format!("add_bond {a}-{b}: bond already present")));
                }
                bonds.push(Bond {
                    a: ia,
                    b: ib,
                    order: *order,
                });
            }
            TemplateEdit::RemoveBond { a, b } => {
                let (ia, ib) = (union_index(a)?, union_index(b)?);
                let before = bonds.len();
                bonds.retain(|bd| !((bd.a == ia && bd.b == ib) || (bd.a == ib && bd.b == ia)));
                if bonds.len() == before {
                    return Err(invalid(format!("remove_bond {a}-{b}: no such bond")));
                }
            }
            TemplateEdit::SetCharge { map, charge } => {
                let ia = union_index(map)?;
                atoms[ia].formal_charge = *charge;
            }
            TemplateEdit::DeleteAtom { map } => {
                deletions.push(union_index(map)?);
            }
        }
    }

    // byproduct markers, tracked through deletion renumbering
    let mut byproduct_atoms: Vec<usize> = Vec::new();
    for label in &template.byproduct_labels {
        byproduct_atoms.push(union_index(label)?);
    }

    if !deletions.is_empty() {
        deletions.sort_unstable();
        deletions.dedup();
        let mut remap = vec![usize::MAX; atoms.len()];
        let mut next = 0usize;
        for i in 0..atoms.len() {
            if deletions.binary_search(&i).is_err() {
                remap[i] = next;
                next += 1;
            }
        }
        let mut new_atoms = Vec::with_capacity(next);
        for (i, a) in atoms.into_iter().enumerate() {
            if remap[i] != usize::MAX {
                new_atoms.push(a);
            }
        }
        atoms = new_atoms;
        bonds = bonds
            .into_iter()
            .filter(|b| remap[b.a] != usize::MAX && remap[b.b] != usize::MAX)
            .map(|b| Bond {
                a: remap[b.a],
                b: remap[b.b],
                order: b.order,
            })
            .collect();
        byproduct_atoms = byproduct_atoms
            .into_iter()
            .filter(|&i| remap[i] != usize::MAX)
            .map(|i| remap[i])
            .collect();
    }

    let union = MolecularGraph::new(table, atoms, bonds)
        .map_err(|e: GraphError| invalid(format!("graph rebuild failed: {e}")))?;
    union
        .check_valence()
        .map_err(|v| invalid(format!("valence violation at union atom {}", v.atom)))?;

    let mut products: Vec<ProductEntry> = Vec::new();
    let mut byproducts: Vec<ProductEntry> = Vec::new();
    for comp in 0..union.n_components() {
        let (graph, members) = union
            .component_subgraph(comp)
            .map_err(|e| invalid(format!("component split failed: {e}")))?;
        let is_byproduct = members.iter().any(|i| byproduct_atoms.contains(i));
        let entry = ProductEntry::from_graph(graph);
        if !entry.valid {
            return Err(invalid(format!("component `{}` fails valence", entry.smiles)));
        }
        if is_byproduct {
            byproducts.push(entry);
        } else {
            products.push(entry);
        }
    }
    products.sort_by(|a, b| a.smiles.cmp(&b.smiles));
    byproducts.sort_by(|a, b| a.smiles.cmp(&b.smiles));
    Ok(ProductBag {
        products,
        byproducts,
        no_reaction: false,
    })
}
