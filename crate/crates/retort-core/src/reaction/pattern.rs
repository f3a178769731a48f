//! Structural pattern graphs and backtracking subgraph matching.
//!
//! The pattern language is deliberately small: per atom an element (or
//! wildcard) with optional aromaticity, charge and degree constraints plus
//! an optional map label; per bond an exact order. Matching finds injective,
//! adjacency-respecting maps (monomorphisms — extra target bonds around the
//! matched atoms are fine).

use crate::prelude::*;
use thiserror::Error;

use crate::chem::{BondOrder, Element, MolecularGraph};

pub const MAX_PATTERN_ATOMS: usize = 12;

#[derive(Debug, Clone, Default)]
pub struct PatternAtom {
    /// `None` matches any element.
    pub element: Option<Element>,
    pub aromatic: Option<bool>,
    pub charge: Option<i8>,
    pub degree: Option<u8>,
    pub degree_max: Option<u8>,
    pub map: Option<String>,
}

#[derive(Debug, Clone, Copy)]
pub struct PatternBond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
}

#[derive(Debug, Clone)]
pub struct PatternGraph {
    pub atoms: Vec<PatternAtom>,
    pub bonds: Vec<PatternBond>,
}

#[derive(Debug, Error)]
pub enum MatchError {
    #[error("pattern has {0} atoms; the matcher caps at {MAX_PATTERN_ATOMS}")]
    PatternTooLarge(usize),
}

impl PatternGraph {
    pub fn adjacency(&self) -> Vec<Vec<(usize, BondOrder)>> {
        let mut adj = vec![Vec::new(); self.atoms.len()];
        for b in &self.bonds {
            adj[b.a].push((b.b, b.order));
            adj[b.b].push((b.a, b.order));
        }
        adj
    }

    pub fn is_connected(&self) -> bool {
        if self.atoms.is_empty() {
            return false;
        }
        let adj = self.adjacency();
        let mut seen = vec![false; self.atoms.len()];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &(u, _) in &adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    count += 1;
                    stack.push(u);
                }
            }
        }
        count == self.atoms.len()
    }

    pub fn find_map(&self, label: &str) -> Option<usize> {
        self.atoms
            .iter()
            .position(|a| a.map.as_deref() == Some(label))
    }
}

fn atom_matches(pattern: &PatternAtom, graph: &MolecularGraph, atom: usize) -> bool {
    let a = graph.atom(atom);
    if let Some(e) = pattern.element {
        if a.element != e {
            return false;
        }
    }
    if let Some(ar) = pattern.aromatic {
        if a.aromatic != ar {
            return false;
        }
    }
    if let Some(c) = pattern.charge {
        if a.formal_charge != c {
            return false;
        }
    }
    if let Some(d) = pattern.degree {
        if graph.degree(atom) != d as usize {
            return false;
        }
    }
    if let Some(dm) = pattern.degree_max {
        if graph.degree(atom) > dm as usize {
            return false;
        }
    }
    true
}

/// All injective constraint-respecting maps of `pattern` into `target`,
/// deduplicated by (mapped atom set, mapped bond set) so automorphic images
/// of the same site appear once. Candidates are explored in canonical-rank
/// order, which makes the result order a function of the molecule rather
/// than its input atom order.
pub fn match_subgraph(
    pattern: &PatternGraph,
    target: &MolecularGraph,
) -> Result<Vec<Vec<usize>>, MatchError> {
    let np = pattern.atoms.len();
    if np > MAX_PATTERN_ATOMS {
        return Err(MatchError::PatternTooLarge(np));
    }
    if np == 0 || np > target.atom_count() {
        return Ok(Vec::new());
    }
    let adj = pattern.adjacency();

    // target atoms in canonical-rank order
    let ranks = target.canonical_ranks();
    let mut by_rank: Vec<usize> = (0..target.atom_count()).collect();
    by_rank.sort_by_key(|&i| ranks[i]);

    let mut results: Vec<Vec<usize>> = Vec::new();
    let mut signatures: BTreeSet<(Vec<usize>, Vec<(usize, usize)>)> = BTreeSet::new();
    let mut mapping = vec![usize::MAX; np];
    let mut used = vec![false; target.atom_count()];

    fn backtrack(
        pattern: &PatternGraph,
        adj: &[Vec<(usize, BondOrder)>],
        target: &MolecularGraph,
        by_rank: &[usize],
        depth: usize,
        mapping: &mut [usize],
        used: &mut [bool],
        results: &mut Vec<Vec<usize>>,
        signatures: &mut BTreeSet<(Vec<usize>, Vec<(usize, usize)>)>,
    ) {
        if depth == pattern.atoms.len() {
            let mut atom_set: Vec<usize> = mapping.to_vec();
            atom_set.sort_unstable();
            let mut bond_set: Vec<(usize, usize)> = pattern
                .bonds
                .iter()
                .map(|b| {
                    let (x, y) = (mapping[b.a], mapping[b.b]);
                    (x.min(y), x.max(y))
                })
                .collect();
            bond_set.sort_unstable();
            if signatures.insert((atom_set, bond_set)) {
                results.push(mapping.to_vec());
            }
            return;
        }
        for &cand in by_rank {
            if used[cand] || !atom_matches(&pattern.atoms[depth], target, cand) {
                continue;
            }
            // bonds back to already-mapped pattern atoms must exist with the
            // exact order
            let ok = adj[depth].iter().all(|&(q, order)| {
                if q >= depth {
                    return true;
                }
                target.bond_between(cand, mapping[q]) == Some(order)
            });
            if !ok {
                continue;
            }
            mapping[depth] = cand;
            used[cand] = true;
            backtrack(
                pattern, adj, target, by_rank, depth + 1, mapping, used, results, signatures,
            );
            mapping[depth] = usize::MAX;
            used[cand] = false;
        }
    }

    backtrack(
        pattern,
        &adj,
        target,
        &by_rank,
        0,
        &mut mapping,
        &mut used,
        &mut results,
        &mut signatures,
    );
    Ok(results)
}
