//! The molecular graph: atoms, bonds, implicit hydrogens, valence checking.

use crate::prelude::*;
use alloc::sync::Arc;
use thiserror::Error;

use super::element::{organic_subset, Element, ElementTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Conventional fractional order (aromatic = 1.5). Used when computing
    /// implicit hydrogen targets.
    pub fn fractional(self) -> f64 {
        match self {
            BondOrder::Single => 1.0,
            BondOrder::Double => 2.0,
            BondOrder::Triple => 3.0,
            BondOrder::Aromatic => 1.5,
        }
    }

    /// Sigma-framework contribution (aromatic = 1). Used by the valence
    /// check, where counting aromatic bonds at 1.5 would reject pyrrole- and
    /// furan-type ring atoms that are perfectly sound.
    pub fn sigma(self) -> u8 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }

    /// Stable small integer used in canonical-form tuples and wire formats.
    pub fn code(self) -> u8 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            1 => Some(BondOrder::Single),
            2 => Some(BondOrder::Double),
            3 => Some(BondOrder::Triple),
            4 => Some(BondOrder::Aromatic),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Atom {
    pub element: Element,
    pub formal_charge: i8,
    /// Hydrogen count fixed by a bracket expression. `None` means the count
    /// is implicit and recomputed from the valence table whenever the bond
    /// environment changes.
    pub explicit_h: Option<u8>,
    pub aromatic: bool,
}

impl Atom {
    pub fn new(element: Element) -> Self {
        Atom {
            element,
            formal_charge: 0,
            explicit_h: None,
            aromatic: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
}

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("bond ({a},{b}) references an atom out of range (atom count {n})")]
    BondIndexOutOfRange { a: usize, b: usize, n: usize },
    #[error("self-loop on atom {index}")]
    SelfLoop { index: usize },
    #[error("duplicate bond between atoms {a} and {b}")]
    DuplicateBond { a: usize, b: usize },
    #[error("atom {index} has formal charge {charge} outside [-4, 4]")]
    ChargeOutOfRange { index: usize, charge: i8 },
}

/// First atom that breaks the valence table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("atom {atom} exceeds its allowed valence")]
pub struct ValenceViolation {
    pub atom: usize,
}

/// An immutable molecular graph. Construction validates structure, resolves
/// hydrogen counts and precomputes canonical ranks; all operations on a
/// built graph are pure.
#[derive(Debug, Clone)]
pub struct MolecularGraph {
    table: Arc<ElementTable>,
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    adjacency: Vec<Vec<(usize, BondOrder)>>,
    resolved_h: Vec<u8>,
    component: Vec<u32>,
    n_components: u32,
    canonical_ranks: Vec<usize>,
}

impl MolecularGraph {
    pub fn new(
        table: Arc<ElementTable>,
        atoms: Vec<Atom>,
        bonds: Vec<Bond>,
    ) -> Result<Self, GraphError> {
        let n = atoms.len();
        for (i, atom) in atoms.iter().enumerate() {
            if atom.formal_charge < -4 || atom.formal_charge > 4 {
                return Err(GraphError::ChargeOutOfRange {
                    index: i,
                    charge: atom.formal_charge,
                });
            }
        }
        let mut adjacency: Vec<Vec<(usize, BondOrder)>> = vec![Vec::new(); n];
        let mut seen = BTreeSet::new();
        for bond in &bonds {
            if bond.a >= n || bond.b >= n {
                return Err(GraphError::BondIndexOutOfRange {
                    a: bond.a,
                    b: bond.b,
                    n,
                });
            }
            if bond.a == bond.b {
                return Err(GraphError::SelfLoop { index: bond.a });
            }
            let key = (bond.a.min(bond.b), bond.a.max(bond.b));
            if !seen.insert(key) {
                return Err(GraphError::DuplicateBond { a: key.0, b: key.1 });
            }
            adjacency[bond.a].push((bond.b, bond.order));
            adjacency[bond.b].push((bond.a, bond.order));
        }
        for adj in &mut adjacency {
            adj.sort_unstable_by_key(|&(i, order)| (i, order.code()));
        }

        let resolved_h = atoms
            .iter()
            .enumerate()
            .map(|(i, atom)| match atom.explicit_h {
                Some(h) => h,
                None => implicit_hydrogens(&table, atom, &adjacency[i]),
            })
            .collect();

        let (component, n_components) = label_components(n, &adjacency);

        let mut graph = MolecularGraph {
            table,
            atoms,
            bonds,
            adjacency,
            resolved_h,
            component,
            n_components,
            canonical_ranks: Vec::new(),
        };
        graph.canonical_ranks = super::canon::compute_ranks(&graph);
        Ok(graph)
    }

    pub fn table(&self) -> &Arc<ElementTable> {
        &self.table
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn bond_count(&self) -> usize {
        self.bonds.len()
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn atom(&self, i: usize) -> &Atom {
        &self.atoms[i]
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    /// Neighbors of atom `i`, sorted by atom index.
    pub fn neighbors(&self, i: usize) -> &[(usize, BondOrder)] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    /// Hydrogen count after resolving implicit atoms against the valence
    /// table.
    pub fn hydrogens(&self, i: usize) -> u8 {
        self.resolved_h[i]
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<BondOrder> {
        self.adjacency[a]
            .iter()
            .find(|&&(n, _)| n == b)
            .map(|&(_, order)| order)
    }

    pub fn n_components(&self) -> u32 {
        self.n_components
    }

    pub fn component_of(&self, i: usize) -> u32 {
        self.component[i]
    }

    /// Canonical ranks: a permutation of `0..n`, invariant (as a labeling of
    /// the molecule) under any reordering of the input atoms.
    pub fn canonical_ranks(&self) -> &[usize] {
        &self.canonical_ranks
    }

    /// Sum of sigma bond contributions at atom `i` (aromatic bonds count 1).
    pub fn sigma_valence(&self, i: usize) -> u32 {
        self.adjacency[i]
            .iter()
            .map(|&(_, order)| order.sigma() as u32)
            .sum()
    }

    /// Integer "explicit valence": the fractional bond-order sum rounded up
    /// (so three aromatic bonds count 5, two count 3). Feeds the feature
    /// vector and the implicit-hydrogen target.
    pub fn explicit_valence(&self, i: usize) -> u32 {
        ceil_fractional_sum(&self.adjacency[i])
    }

    /// `ok` iff every atom's sigma valence plus hydrogens stays within the
    /// charge-adjusted valence table. Returns the first offender.
    pub fn check_valence(&self) -> Result<(), ValenceViolation> {
        for i in 0..self.atoms.len() {
            let atom = &self.atoms[i];
            let allowed = self
                .table
                .allowed_valences(atom.element, atom.formal_charge);
            if let Some(allowed) = allowed {
                let max = allowed.iter().copied().max().unwrap_or(0) as u32;
                let total = self.sigma_valence(i) + self.resolved_h[i] as u32;
                if total > max {
                    return Err(ValenceViolation { atom: i });
                }
            }
        }
        Ok(())
    }

    /// Rebuild the graph with atoms reordered by `perm` (`perm[new] = old`).
    /// Used by the invariance suites.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self, GraphError> {
        assert_eq!(perm.len(), self.atoms.len());
        let mut inverse = vec![0usize; perm.len()];
        for (new, &old) in perm.iter().enumerate() {
            inverse[old] = new;
        }
        let atoms = perm.iter().map(|&old| self.atoms[old].clone()).collect();
        let bonds = self
            .bonds
            .iter()
            .map(|bond| Bond {
                a: inverse[bond.a],
                b: inverse[bond.b],
                order: bond.order,
            })
            .collect();
        MolecularGraph::new(self.table.clone(), atoms, bonds)
    }

    /// Bonds that sit on a cycle (non-bridges). Index-aligned with `bonds()`.
    pub fn ring_bonds(&self) -> Vec<bool> {
        bridges(self.atoms.len(), &self.bonds)
            .into_iter()
            .map(|is_bridge| !is_bridge)
            .collect()
    }

    /// Extract one connected component as its own graph. Returns the new
    /// graph and, per new atom, the original index.
    pub fn component_subgraph(&self, comp: u32) -> Result<(Self, Vec<usize>), GraphError> {
        let members: Vec<usize> = (0..self.atoms.len())
            .filter(|&i| self.component[i] == comp)
            .collect();
        let mut remap = BTreeMap::new();
        for (new, &old) in members.iter().enumerate() {
            remap.insert(old, new);
        }
        let atoms = members.iter().map(|&i| self.atoms[i].clone()).collect();
        let bonds = self
            .bonds
            .iter()
            .filter(|b| self.component[b.a] == comp)
            .map(|b| Bond {
                a: remap[&b.a],
                b: remap[&b.b],
                order: b.order,
            })
            .collect();
        let graph = MolecularGraph::new(self.table.clone(), atoms, bonds)?;
        Ok((graph, members))
    }
}

fn ceil_fractional_sum(adj: &[(usize, BondOrder)]) -> u32 {
    let mut twice: u32 = 0;
    for &(_, order) in adj {
        twice += match order {
            BondOrder::Single => 2,
            BondOrder::Double => 4,
            BondOrder::Triple => 6,
            BondOrder::Aromatic => 3,
        };
    }
    twice / 2 + twice % 2
}

/// Implicit hydrogen count for an atom without an explicit H spec: the
/// smallest charge-adjusted allowed valence that covers the bond-order sum,
/// minus that sum. Non-organic-subset elements get zero.
fn implicit_hydrogens(table: &ElementTable, atom: &Atom, adj: &[(usize, BondOrder)]) -> u8 {
    let symbol = table.symbol(atom.element);
    if !organic_subset(symbol) {
        return 0;
    }
    let Some(allowed) = table.allowed_valences(atom.element, atom.formal_charge) else {
        return 0;
    };
    let used = ceil_fractional_sum(adj);
    for v in allowed {
        if v as u32 >= used {
            return (v as u32 - used) as u8;
        }
    }
    0
}

fn label_components(n: usize, adjacency: &[Vec<(usize, BondOrder)>]) -> (Vec<u32>, u32) {
    let mut component = vec![u32::MAX; n];
    let mut next = 0u32;
    let mut stack = Vec::new();
    for start in 0..n {
        if component[start] != u32::MAX {
            continue;
        }
        stack.push(start);
        component[start] = next;
        while let Some(v) = stack.pop() {
            for &(u, _) in &adjacency[v] {
                if component[u] == u32::MAX {
                    component[u] = next;
                    stack.push(u);
                }
            }
        }
        next += 1;
    }
    (component, next)
}

/// Bridge detection (iterative DFS, Tarjan low-links). `result[k]` is true
/// iff bond `k` is a bridge.
fn bridges(n: usize, bonds: &[Bond]) -> Vec<bool> {
    let mut adj: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n]; // (neighbor, bond index)
    for (k, bond) in bonds.iter().enumerate() {
        adj[bond.a].push((bond.b, k));
        adj[bond.b].push((bond.a, k));
    }
    let mut is_bridge = vec![false; bonds.len()];
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![usize::MAX; n];
    let mut timer = 0usize;
    // (vertex, parent bond index, iterator position)
    let mut stack: Vec<(usize, usize, usize)> = Vec::new();
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        disc[root] = timer;
        low[root] = timer;
        timer += 1;
        stack.push((root, usize::MAX, 0));
        while let Some(frame) = stack.last_mut() {
            let (v, parent_bond) = (frame.0, frame.1);
            if frame.2 < adj[v].len() {
                let (u, bond_idx) = adj[v][frame.2];
                frame.2 += 1;
                if bond_idx == parent_bond {
                    continue;
                }
                if disc[u] == usize::MAX {
                    disc[u] = timer;
                    low[u] = timer;
                    timer += 1;
                    stack.push((u, bond_idx, 0));
                } else {
                    low[v] = low[v].min(disc[u]);
                }
            } else {
                stack.pop();
                if let Some(parent) = stack.last() {
                    let p = parent.0;
                    low[p] = low[p].min(low[v]);
                    if low[v] > disc[p] {
                        is_bridge[parent_bond] = true;
                    }
                }
            }
        }
    }
    is_bridge
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;

    fn table() -> Arc<ElementTable> {
        Arc::new(ElementTable::builtin())
    }

    #[test]
    fn rejects_bad_structure() {
        let t = table();
        let c = t.lookup("C").unwrap();
        let atoms = vec![Atom::new(c), Atom::new(c)];
        let self_loop = vec![Bond {
            a: 0,
            b: 0,
            order: BondOrder::Single,
        }];
        assert!(matches!(
            MolecularGraph::new(t.clone(), atoms.clone(), self_loop),
            Err(GraphError::SelfLoop { .. })
        ));
        let dup = vec![
            Bond {
                a: 0,
                b: 1,
                order: BondOrder::Single,
            },
            Bond {
                a: 1,
                b: 0,
                order: BondOrder::Double,
            },
        ];
        assert!(matches!(
            MolecularGraph::new(t.clone(), atoms.clone(), dup),
            Err(GraphError::DuplicateBond { .. })
        ));
        let out = vec![Bond {
            a: 0,
            b: 5,
            order: BondOrder::Single,
        }];
        assert!(matches!(
            MolecularGraph::new(t, atoms, out),
            Err(GraphError::BondIndexOutOfRange { .. })
        ));
    }

    #[test]
    fn methane_hydrogens() {
        let t = table();
        let c = t.lookup("C").unwrap();
        let g = MolecularGraph::new(t, vec![Atom::new(c)], vec![]).unwrap();
        assert_eq!(g.hydrogens(0), 4);
        assert!(g.check_valence().is_ok());
    }

    #[test]
    fn pentavalent_carbon_fails() {
        let t = table();
        let c = t.lookup("C").unwrap();
        let atoms = (0..6).map(|_| Atom::new(c)).collect::<Vec<_>>();
        let bonds = (1..6)
            .map(|b| Bond {
                a: 0,
                b,
                order: BondOrder::Single,
            })
            .collect();
        let g = MolecularGraph::new(t, atoms, bonds).unwrap();
        assert_eq!(g.check_valence(), Err(ValenceViolation { atom: 0 }));
    }

    #[test]
    fn ammonium_is_valid() {
        let g = parse_smiles("[NH4+]").unwrap();
        assert!(g.check_valence().is_ok());
        assert_eq!(g.hydrogens(0), 4);
    }

    #[test]
    fn aromatic_rings_are_valence_sound() {
        for smi in ["c1ccccc1", "c1ccncc1", "c1cc[nH]c1", "c1ccoc1", "c1ccsc1"] {
            let g = parse_smiles(smi).unwrap();
            assert!(g.check_valence().is_ok(), "{smi} should pass");
        }
        // benzene carbons carry one implicit hydrogen each
        let g = parse_smiles("c1ccccc1").unwrap();
        for i in 0..6 {
            assert_eq!(g.hydrogens(i), 1);
        }
    }

    #[test]
    fn ring_bond_detection() {
        let g = parse_smiles("C1CC1CC").unwrap();
        let ring = g.ring_bonds();
        let in_ring = ring.iter().filter(|&&r| r).count();
        assert_eq!(in_ring, 3);
        assert_eq!(g.bond_count(), 5);
    }

    #[test]
    fn components_labelled() {
        let g = parse_smiles("CC.O").unwrap();
        assert_eq!(g.n_components(), 2);
        assert_eq!(g.component_of(0), g.component_of(1));
        assert_ne!(g.component_of(0), g.component_of(2));
    }
}
