//! Simple molecular descriptors and the surrogate drug-likeness score built
//! on them.

use crate::fmath;

use super::graph::{BondOrder, MolecularGraph};

#[derive(Debug, Clone, PartialEq)]
pub struct DescriptorRecord {
    /// Daltons, implicit hydrogens included.
    pub molecular_weight: f64,
    /// Cyclomatic ring count: bonds - atoms + components.
    pub ring_count: usize,
    /// N/O atoms carrying at least one hydrogen.
    pub h_bond_donors: usize,
    /// All N/O atoms.
    pub h_bond_acceptors: usize,
    /// Non-ring single bonds between heavy atoms of degree >= 2 each.
    pub rotatable_bonds: usize,
    pub aromatic_atom_fraction: f64,
    pub heteroatom_fraction: f64,
}

pub fn descriptors(graph: &MolecularGraph) -> DescriptorRecord {
    let table = graph.table();
    let h_mass = table
        .hydrogen()
        .map(|h| table.info(h).mass)
        .unwrap_or(1.008);

    let mut molecular_weight = 0.0;
    let mut donors = 0usize;
    let mut acceptors = 0usize;
    let mut aromatic = 0usize;
    let mut hetero = 0usize;
    let mut heavy = 0usize;
    for i in 0..graph.atom_count() {
        let atom = graph.atom(i);
        let symbol = table.symbol(atom.element);
        molecular_weight += table.info(atom.element).mass;
        molecular_weight += graph.hydrogens(i) as f64 * h_mass;
        if symbol == "H" {
            continue;
        }
        heavy += 1;
        if symbol == "N" || symbol == "O" {
            acceptors += 1;
            if graph.hydrogens(i) > 0 {
                donors += 1;
            }
        }
        if atom.aromatic {
            aromatic += 1;
        }
        if symbol != "C" {
            hetero += 1;
        }
    }

    let ring_count =
        graph.bond_count() + graph.n_components() as usize - graph.atom_count();

    let ring_bonds = graph.ring_bonds();
    let mut rotatable = 0usize;
    for (k, bond) in graph.bonds().iter().enumerate() {
        if bond.order != BondOrder::Single || ring_bonds[k] {
            continue;
        }
        let heavy_end = |i: usize| table.symbol(graph.atom(i).element) != "H";
        if heavy_end(bond.a)
            && heavy_end(bond.b)
            && graph.degree(bond.a) >= 2
            && graph.degree(bond.b) >= 2
        {
            rotatable += 1;
        }
    }

    let frac = |num: usize| {
        if heavy == 0 {
            0.0
        } else {
            num as f64 / heavy as f64
        }
    };
    DescriptorRecord {
        molecular_weight,
        ring_count,
        h_bond_donors: donors,
        h_bond_acceptors: acceptors,
        rotatable_bonds: rotatable,
        aromatic_atom_fraction: frac(aromatic),
        heteroatom_fraction: frac(hetero),
    }
}

fn gauss(x: f64, center: f64, width: f64) -> f64 {
    let d = x - center;
    fmath::exp(-(d * d) / (2.0 * width * width))
}

/// 1 up to `cap`, Gaussian decay beyond it.
fn capped(x: f64, cap: f64, width: f64) -> f64 {
    if x <= cap {
        1.0
    } else {
        gauss(x, cap, width)
    }
}

fn clamp(d: f64) -> f64 {
    d.clamp(1e-3, 1.0)
}

/// Deterministic drug-likeness surrogate in [1e-3, 1]: the geometric mean of
/// five desirability terms.
///
/// - molecular weight: Gaussian centered at 300 Da, width 150;
/// - H-bond donors: ideal <= 5, decay width 2.5;
/// - H-bond acceptors: ideal <= 10, decay width 5;
/// - rotatable bonds: ideal <= 8, decay width 4;
/// - aromatic atom fraction: Gaussian centered at 0.3, width 0.3.
pub fn surrogate_qed_from(d: &DescriptorRecord) -> f64 {
    let terms = [
        clamp(gauss(d.molecular_weight, 300.0, 150.0)),
        clamp(capped(d.h_bond_donors as f64, 5.0, 2.5)),
        clamp(capped(d.h_bond_acceptors as f64, 10.0, 5.0)),
        clamp(capped(d.rotatable_bonds as f64, 8.0, 4.0)),
        clamp(gauss(d.aromatic_atom_fraction, 0.3, 0.3)),
    ];
    let log_sum: f64 = terms.iter().map(|&t| fmath::ln(t)).sum();
    fmath::exp(log_sum / terms.len() as f64)
}

pub fn surrogate_qed(graph: &MolecularGraph) -> f64 {
    surrogate_qed_from(&descriptors(graph))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::parse_smiles;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn ethanol_descriptors() {
        // hand sum: 2 x 12.011 + 6 x 1.008 + 15.999 = 46.069
        let d = descriptors(&parse_smiles("CCO").unwrap());
        assert!((d.molecular_weight - 46.07).abs() < 0.01);
        assert_eq!(d.h_bond_donors, 1);
        assert_eq!(d.h_bond_acceptors, 1);
        assert_eq!(d.ring_count, 0);
    }

    #[test]
    fn cyclomatic_rings() {
        assert_eq!(descriptors(&parse_smiles("C1CC1").unwrap()).ring_count, 1);
        assert_eq!(
            descriptors(&parse_smiles("c1ccc2ccccc2c1").unwrap()).ring_count,
            2
        );
        assert_eq!(descriptors(&parse_smiles("CC.O").unwrap()).ring_count, 0);
    }

    #[test]
    fn single_atom_counts() {
        let d = descriptors(&parse_smiles("C").unwrap());
        assert_eq!(d.ring_count, 0);
        assert_eq!(d.h_bond_donors, 0);
        assert_eq!(d.h_bond_acceptors, 0);
        assert_eq!(d.rotatable_bonds, 0);
        assert!((d.molecular_weight - 16.043).abs() < 1e-9);
    }

    #[test]
    fn rotatable_bond_definition() {
        // butane: only the central C-C bond has degree >= 2 on both ends
        let d = descriptors(&parse_smiles("CCCC").unwrap());
        assert_eq!(d.rotatable_bonds, 1);
        // ring bonds never count
        let d = descriptors(&parse_smiles("C1CCCCC1").unwrap());
        assert_eq!(d.rotatable_bonds, 0);
    }

    #[test]
    fn qed_bounds_and_invariance() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for smi in ["CCO", "c1ccccc1", "CC(=O)OCC", "OP(=O)(O)O"] {
            let g = parse_smiles(smi).unwrap();
            let q = surrogate_qed(&g);
            assert!((1e-3..=1.0).contains(&q), "{smi}: {q}");
            let mut perm: Vec<usize> = (0..g.atom_count()).collect();
            perm.shuffle(&mut rng);
            assert_eq!(q, surrogate_qed(&g.permuted(&perm).unwrap()));
        }
    }

    #[test]
    fn desirability_ordering() {
        // a mid-weight, low-donor profile must beat a heavy, donor-rich one
        let good = DescriptorRecord {
            molecular_weight: 300.0,
            ring_count: 1,
            h_bond_donors: 1,
            h_bond_acceptors: 2,
            rotatable_bonds: 3,
            aromatic_atom_fraction: 0.3,
            heteroatom_fraction: 0.2,
        };
        let bad = DescriptorRecord {
            molecular_weight: 900.0,
            h_bond_donors: 9,
            ..good.clone()
        };
        assert!(surrogate_qed_from(&good) > surrogate_qed_from(&bad));
    }
}
