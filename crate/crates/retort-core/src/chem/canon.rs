//! Canonical atom ranking by iterative partition refinement.
//!
//! Atoms start in classes keyed by (atomic number, aromaticity, degree,
//! charge, hydrogen count); classes are refined by sorted neighbor
//! (bond-order, rank) multisets until a fixed point. Remaining ties are
//! broken by distinguishing the smallest-index member of the lowest tied
//! class, then re-refining — repeated until the ranking is discrete. For
//! molecular graphs tied-at-fixed-point atoms are interchangeable, so every
//! quantity derived from the ranks (canonical SMILES, summation orders) is
//! invariant under input atom reordering.

use crate::prelude::*;

use super::graph::MolecularGraph;

/// Dense 0-based ranks for arbitrary ordered keys.
fn dense_ranks<K: Ord + Clone>(keys: &[K]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..keys.len()).collect();
    order.sort_by(|&a, &b| keys[a].cmp(&keys[b]));
    let mut ranks = vec![0usize; keys.len()];
    let mut rank = 0usize;
    for (pos, &atom) in order.iter().enumerate() {
        if pos > 0 && keys[order[pos - 1]] != keys[atom] {
            rank = pos;
        }
        ranks[atom] = rank;
    }
    ranks
}

fn refine(graph: &MolecularGraph, mut ranks: Vec<usize>) -> Vec<usize> {
    loop {
        let keys: Vec<(usize, Vec<(u8, usize)>)> = (0..graph.atom_count())
            .map(|v| {
                let mut nbr: Vec<(u8, usize)> = graph
                    .neighbors(v)
                    .iter()
                    .map(|&(u, order)| (order.code(), ranks[u]))
                    .collect();
                nbr.sort_unstable();
                (ranks[v], nbr)
            })
            .collect();
        let next = dense_ranks(&keys);
        if next == ranks {
            return ranks;
        }
        ranks = next;
    }
}

pub(crate) fn compute_ranks(graph: &MolecularGraph) -> Vec<usize> {
    let n = graph.atom_count();
    if n == 0 {
        return Vec::new();
    }
    let table = graph.table();
    let initial: Vec<(u16, bool, usize, i8, u8)> = (0..n)
        .map(|v| {
            let atom = graph.atom(v);
            (
                table.info(atom.element).atomic_number,
                atom.aromatic,
                graph.degree(v),
                atom.formal_charge,
                graph.hydrogens(v),
            )
        })
        .collect();
    let mut ranks = refine(graph, dense_ranks(&initial));

    // Symmetry breaking: split the lowest tied class at its smallest-index
    // member, re-refine, repeat until discrete.
    loop {
        let mut class_count = vec![0usize; n];
        for &r in &ranks {
            class_count[r] += 1;
        }
        let Some(tied_rank) = (0..n).find(|&r| class_count[r] > 1) else {
            return ranks;
        };
        let chosen = (0..n)
            .find(|&v| ranks[v] == tied_rank)
            .expect("tied class must have a member");
        let keys: Vec<(usize, u8)> = (0..n)
            .map(|v| {
                if v == chosen {
                    (ranks[v], 0)
                } else if ranks[v] == tied_rank {
                    (ranks[v], 1)
                } else {
                    (ranks[v], 0)
                }
            })
            .collect();
        ranks = refine(graph, dense_ranks(&keys));
    }
}

/// Public entry point: the cached canonical ranks of `graph`.
pub fn canonical_rank(graph: &MolecularGraph) -> Vec<usize> {
    graph.canonical_ranks().to_vec()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn ranks_are_a_permutation() {
        for smi in ["c1ccccc1", "CCO", "CC(=O)OC", "C"] {
            let g = parse_smiles(smi).unwrap();
            let mut ranks = canonical_rank(&g);
            ranks.sort_unstable();
            assert_eq!(ranks, (0..g.atom_count()).collect::<Vec<_>>(), "{smi}");
        }
    }

    /// For an asymmetric molecule the rank of each atom is an invariant:
    /// permuting the input order must map ranks along with the atoms.
    #[test]
    fn ranks_stable_under_permutation() {
        let g = parse_smiles("CC(=O)OC").unwrap();
        let base = canonical_rank(&g);
        let n = g.atom_count();
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for _ in 0..100 {
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let permuted = g.permuted(&perm).unwrap();
            let ranks = canonical_rank(&permuted);
            for new in 0..n {
                assert_eq!(ranks[new], base[perm[new]]);
            }
        }
    }

    #[test]
    fn ethanol_rank_multiset_is_order_free() {
        let a = parse_smiles("OCC").unwrap();
        let b = parse_smiles("CCO").unwrap();
        // identify atoms by element symbol + hydrogen count and compare the
        // rank each identity receives
        let ident = |g: &crate::chem::MolecularGraph| {
            let ranks = canonical_rank(g);
            let mut pairs: Vec<(String, u8, usize)> = (0..g.atom_count())
                .map(|i| {
                    (
                        g.table().symbol(g.atom(i).element).to_string(),
                        g.hydrogens(i),
                        ranks[i],
                    )
                })
                .collect();
            pairs.sort();
            pairs
        };
        assert_eq!(ident(&a), ident(&b));
    }
}
