//! Canonical SMILES writer.
//!
//! Each connected component is rendered by a DFS that starts at the
//! lowest-ranked atom and visits neighbors in canonical-rank order; ring
//! digits are assigned in rendering order and reused once closed. Components
//! are rendered independently, sorted as strings and joined with `.`, so the
//! output depends only on the isomorphism class of the graph.

use crate::prelude::*;

use crate::chem::element::organic_subset;
use crate::chem::graph::{BondOrder, MolecularGraph};

pub fn write_smiles(graph: &MolecularGraph) -> String {
    let ranks = graph.canonical_ranks();
    let mut fragments: Vec<String> = Vec::new();
    for comp in 0..graph.n_components() {
        let members: Vec<usize> = (0..graph.atom_count())
            .filter(|&i| graph.component_of(i) == comp)
            .collect();
        fragments.push(render_component(graph, ranks, &members));
    }
    fragments.sort();
    fragments.join(".")
}

struct Dfs<'g> {
    graph: &'g MolecularGraph,
    ranks: &'g [usize],
    visited: Vec<bool>,
    visit_order: Vec<usize>,
    /// tree children per atom, in rank order
    children: Vec<Vec<usize>>,
    parent: Vec<Option<usize>>,
    /// ring bonds as (first-visited atom, second atom)
    ring_bonds: Vec<(usize, usize)>,
}

fn render_component(graph: &MolecularGraph, ranks: &[usize], members: &[usize]) -> String {
    let start = *members
        .iter()
        .min_by_key(|&&i| ranks[i])
        .expect("component is non-empty");

    let n = graph.atom_count();
    let mut dfs = Dfs {
        graph,
        ranks,
        visited: vec![false; n],
        visit_order: Vec::new(),
        children: vec![Vec::new(); n],
        parent: vec![None; n],
        ring_bonds: Vec::new(),
    };
    dfs.explore(start);

    // Orient each ring bond by rendering position: it opens at the endpoint
    // rendered first (printed with its bond symbol) and closes at the later
    // one (bare digit).
    let mut position = vec![usize::MAX; n];
    for (k, &v) in dfs.visit_order.iter().enumerate() {
        position[v] = k;
    }
    let mut opens_at: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    let mut closes_at: Vec<Vec<(usize, usize)>> = vec![Vec::new(); n];
    for &(a, b) in &dfs.ring_bonds {
        let (open, close) = if position[a] < position[b] {
            (a, b)
        } else {
            (b, a)
        };
        opens_at[open].push((open, close));
        closes_at[close].push((open, close));
    }
    for list in &mut opens_at {
        list.sort_by_key(|&(_, close)| position[close]);
    }

    // Digits are handed out in rendering order and reused once closed.
    let mut digit_of: BTreeMap<(usize, usize), u16> = BTreeMap::new();
    let mut free: Vec<u16> = (1..100).rev().collect();
    for &v in &dfs.visit_order {
        for key in &closes_at[v] {
            free.push(digit_of[key]);
            free.sort_unstable_by(|a, b| b.cmp(a));
        }
        for key in &opens_at[v] {
            let d = free.pop().expect("ring digits exhausted");
            digit_of.insert(*key, d);
        }
    }

    for list in &mut closes_at {
        list.sort_by_key(|key| digit_of[key]);
    }

    let mut out = String::new();
    render_atom(
        graph,
        &dfs,
        &digit_of,
        &opens_at,
        &closes_at,
        start,
        &mut out,
    );
    out
}

impl<'g> Dfs<'g> {
    fn explore(&mut self, start: usize) {
        // iterative DFS; children pushed in reverse rank order so the
        // lowest-ranked neighbor is visited first
        let mut seen_ring: BTreeSet<(usize, usize)> = BTreeSet::new();
        let mut stack = vec![start];
        self.visited[start] = true;
        while let Some(v) = stack.pop() {
            self.visit_order.push(v);
            let mut nbrs: Vec<usize> = self.graph.neighbors(v).iter().map(|&(u, _)| u).collect();
            nbrs.sort_by_key(|&u| self.ranks[u]);
            let mut tree_children = Vec::new();
            for u in nbrs {
                if Some(u) == self.parent[v] {
                    continue;
                }
                if self.visited[u] {
                    let key = (v.min(u), v.max(u));
                    if seen_ring.insert(key) {
                        // u was visited first
                        self.ring_bonds.push((u, v));
                    }
                } else {
                    self.visited[u] = true;
                    self.parent[u] = Some(v);
                    tree_children.push(u);
                }
            }
            for &u in tree_children.iter().rev() {
                stack.push(u);
            }
            self.children[v] = tree_children;
        }
    }
}

fn render_atom(
    graph: &MolecularGraph,
    dfs: &Dfs,
    digit_of: &BTreeMap<(usize, usize), u16>,
    opens_at: &[Vec<(usize, usize)>],
    closes_at: &[Vec<(usize, usize)>],
    v: usize,
    out: &mut String,
) {
    if let Some(p) = dfs.parent[v] {
        out.push_str(bond_str(graph, p, v));
    }
    out.push_str(&atom_label(graph, v));
    // Ring digits: closings first (bare digit), then openings (bond symbol +
    // digit). Closing must precede opening so that a digit freed and
    // immediately reused at the same atom parses back in the right order.
    for key in &closes_at[v] {
        push_digit(out, digit_of[key]);
    }
    for key in &opens_at[v] {
        let other = key.1;
        out.push_str(bond_str(graph, v, other));
        push_digit(out, digit_of[key]);
    }
    let children = &dfs.children[v];
    for (i, &child) in children.iter().enumerate() {
        if i + 1 < children.len() {
            out.push('(');
            render_atom(graph, dfs, digit_of, opens_at, closes_at, child, out);
            out.push(')');
        } else {
            render_atom(graph, dfs, digit_of, opens_at, closes_at, child, out);
        }
    }
}

fn push_digit(out: &mut String, d: u16) {
    if d < 10 {
        out.push((b'0' + d as u8) as char);
    } else {
        out.push('%');
        out.push((b'0' + (d / 10) as u8) as char);
        out.push((b'0' + (d % 10) as u8) as char);
    }
}

/// Bond symbol between two atoms, empty when the parser would infer it.
fn bond_str(graph: &MolecularGraph, a: usize, b: usize) -> &'static str {
    let both_aromatic = graph.atom(a).aromatic && graph.atom(b).aromatic;
    match graph
        .bond_between(a, b)
        .expect("bond must exist during rendering")
    {
        BondOrder::Single => {
            if both_aromatic {
                "-"
            } else {
                ""
            }
        }
        BondOrder::Double => "=",
        BondOrder::Triple => "#",
        BondOrder::Aromatic => {
            if both_aromatic {
                ""
            } else {
                ":"
            }
        }
    }
}

fn atom_label(graph: &MolecularGraph, v: usize) -> String {
    let atom = graph.atom(v);
    let table = graph.table();
    let symbol = table.symbol(atom.element);
    let h = graph.hydrogens(v);

    let bare_ok = atom.formal_charge == 0
        && organic_subset(symbol)
        && h == bare_reparse_h(graph, v)
        && (!atom.aromatic || matches!(symbol, "B" | "C" | "N" | "O" | "P" | "S"));
    let cased = if atom.aromatic {
        symbol.to_ascii_lowercase()
    } else {
        symbol.to_string()
    };
    if bare_ok {
        return cased;
    }
    let mut label = String::from("[");
    label.push_str(&cased);
    match h {
        0 => {}
        1 => label.push('H'),
        n => {
            label.push('H');
            label.push_str(&n.to_string());
        }
    }
    match atom.formal_charge {
        0 => {}
        1 => label.push('+'),
        -1 => label.push('-'),
        c if c > 0 => label.push_str(&format!("+{c}")),
        c => label.push_str(&format!("-{}", -c)),
    }
    label.push(']');
    label
}

/// Hydrogen count a bare (bracket-free) occurrence of this atom would get on
/// re-parse. Writing bare is only allowed when it matches the actual count.
fn bare_reparse_h(graph: &MolecularGraph, v: usize) -> u8 {
    let atom = graph.atom(v);
    let table = graph.table();
    let Some(allowed) = table.allowed_valences(atom.element, 0) else {
        return 0;
    };
    let used = graph.explicit_valence(v);
    for cap in allowed {
        if cap as u32 >= used {
            return (cap as u32 - used) as u8;
        }
    }
    0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::{isomorphic, parse_smiles};
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn single_atoms() {
        assert_eq!(write_smiles(&parse_smiles("C").unwrap()), "C");
        assert_eq!(write_smiles(&parse_smiles("[NH4+]").unwrap()), "[NH4+]");
        assert_eq!(write_smiles(&parse_smiles("O").unwrap()), "O");
    }

    #[test]
    fn canonical_across_orderings() {
        assert_eq!(
            write_smiles(&parse_smiles("OCC").unwrap()),
            write_smiles(&parse_smiles("CCO").unwrap())
        );
        assert_eq!(
            write_smiles(&parse_smiles("C1CC1").unwrap()),
            write_smiles(&parse_smiles("C2CC2").unwrap())
        );
    }

    #[test]
    fn roundtrip_is_fixed_point_and_isomorphic() {
        let cases = [
            "CCO",
            "CC(=O)O",
            "CC(=O)OCC",
            "c1ccccc1",
            "c1ccc(-c2ccccc2)cc1",
            "C1CC2CCC1CC2",
            "[Na+].CC(=O)[O-]",
            "CS(=O)(=O)O",
            "OB(O)c1ccccc1",
            "C#N",
        ];
        for smi in cases {
            let g = parse_smiles(smi).unwrap();
            let written = write_smiles(&g);
            let reparsed = parse_smiles(&written).unwrap();
            assert!(isomorphic(&g, &reparsed), "{smi} -> {written}");
            assert_eq!(written, write_smiles(&reparsed), "{smi} not a fixed point");
        }
    }

    #[test]
    fn permutation_stable() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for smi in ["CC(=O)OC", "c1ccc2ccccc2c1", "NCC(=O)O", "CN1CCC1"] {
            let g = parse_smiles(smi).unwrap();
            let base = write_smiles(&g);
            let n = g.atom_count();
            for _ in 0..100 {
                let mut perm: Vec<usize> = (0..n).collect();
                perm.shuffle(&mut rng);
                let permuted = g.permuted(&perm).unwrap();
                assert_eq!(write_smiles(&permuted), base, "{smi}");
            }
        }
    }
}
