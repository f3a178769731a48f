//! Exact graph isomorphism by backtracking.
//!
//! Independent of canonical ranking on purpose: the round-trip tests use it
//! as the oracle that checks the canonical writer, so it must not share that
//! code path.

use crate::prelude::*;

use super::graph::MolecularGraph;

fn atom_key(g: &MolecularGraph, i: usize) -> (u16, i8, u8, bool, usize) {
    let a = g.atom(i);
    (
        g.table().info(a.element).atomic_number,
        a.formal_charge,
        g.hydrogens(i),
        a.aromatic,
        g.degree(i),
    )
}

/// True iff the two graphs are isomorphic as labelled molecular graphs
/// (element, charge, hydrogen count, aromaticity and bond orders all match).
pub fn isomorphic(a: &MolecularGraph, b: &MolecularGraph) -> bool {
    let n = a.atom_count();
    if n != b.atom_count() || a.bond_count() != b.bond_count() {
        return false;
    }
    if n == 0 {
        return true;
    }
    let mut keys_a: Vec<_> = (0..n).map(|i| atom_key(a, i)).collect();
    let mut keys_b: Vec<_> = (0..n).map(|i| atom_key(b, i)).collect();
    keys_a.sort_unstable();
    keys_b.sort_unstable();
    if keys_a != keys_b {
        return false;
    }

    let mut mapping = vec![usize::MAX; n]; // a -> b
    let mut used = vec![false; n];
    backtrack(a, b, 0, &mut mapping, &mut used)
}

fn backtrack(
    a: &MolecularGraph,
    b: &MolecularGraph,
    i: usize,
    mapping: &mut [usize],
    used: &mut [bool],
) -> bool {
    if i == a.atom_count() {
        return true;
    }
    let key = atom_key(a, i);
    for cand in 0..b.atom_count() {
        if used[cand] || atom_key(b, cand) != key {
            continue;
        }
        // edges back to already-mapped atoms must match exactly
        let ok = (0..i).all(|j| a.bond_between(i, j) == b.bond_between(cand, mapping[j]));
        if !ok {
            continue;
        }
        mapping[i] = cand;
        used[cand] = true;
        if backtrack(a, b, i + 1, mapping, used) {
            return true;
        }
        mapping[i] = usize::MAX;
        used[cand] = false;
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;

    #[test]
    fn reorderings_are_isomorphic() {
        let a = parse_smiles("CCO").unwrap();
        let b = parse_smiles("OCC").unwrap();
        assert!(isomorphic(&a, &b));
    }

    #[test]
    fn different_molecules_are_not() {
        let a = parse_smiles("CCO").unwrap();
        let b = parse_smiles("CCN").unwrap();
        assert!(!isomorphic(&a, &b));
        // same formula, different connectivity
        let a = parse_smiles("CCCC").unwrap();
        let b = parse_smiles("CC(C)C").unwrap();
        assert!(!isomorphic(&a, &b));
        // bond order matters
        let a = parse_smiles("CC=O").unwrap();
        let b = parse_smiles("CCO").unwrap();
        assert!(!isomorphic(&a, &b));
    }

    #[test]
    fn charge_and_aromaticity_matter() {
        assert!(!isomorphic(
            &parse_smiles("[O-]C").unwrap(),
            &parse_smiles("OC").unwrap()
        ));
        assert!(!isomorphic(
            &parse_smiles("c1ccccc1").unwrap(),
            &parse_smiles("C1=CC=CC=C1").unwrap()
        ));
    }
}
