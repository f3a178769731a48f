//! SMILES subset parser. One pass over the bytes with a branch stack and an
//! open-ring table; implicit hydrogens are resolved by graph construction.

use crate::prelude::*;
use alloc::sync::Arc;

use crate::chem::element::{aromatic_capable, ElementTable};
use crate::chem::graph::{Atom, Bond, BondOrder, MolecularGraph, ValenceViolation};

#[derive(Debug, thiserror::Error)]
pub enum SmilesError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unsupported element `{symbol}` at byte {pos}")]
    UnsupportedElement { pos: usize, symbol: String },
    #[error("valence violation: {0}")]
    Valence(#[from] ValenceViolation),
}

fn syntax(pos: usize, msg: impl Into<String>) -> SmilesError {
    SmilesError::Syntax {
        pos,
        msg: msg.into(),
    }
}

/// Parse with the built-in element table.
pub fn parse_smiles(text: &str) -> Result<MolecularGraph, SmilesError> {
    parse_smiles_with(&Arc::new(ElementTable::builtin()), text)
}

/// Parse and additionally require the result to pass the valence check.
pub fn parse_smiles_strict(text: &str) -> Result<MolecularGraph, SmilesError> {
    parse_smiles_strict_with(&Arc::new(ElementTable::builtin()), text)
}

pub fn parse_smiles_strict_with(
    table: &Arc<ElementTable>,
    text: &str,
) -> Result<MolecularGraph, SmilesError> {
    let graph = parse_smiles_with(table, text)?;
    graph.check_valence()?;
    Ok(graph)
}

pub fn parse_smiles_with(
    table: &Arc<ElementTable>,
    text: &str,
) -> Result<MolecularGraph, SmilesError> {
    let trimmed = text.trim_end();
    if trimmed.is_empty() {
        return Err(syntax(0, "empty input"));
    }
    Parser {
        table,
        bytes: trimmed.as_bytes(),
        pos: 0,
        atoms: Vec::new(),
        bonds: Vec::new(),
        prev: None,
        pending: None,
        branch_stack: Vec::new(),
        open_rings: BTreeMap::new(),
        fragment_open: true,
    }
    .run()
}

struct Parser<'a> {
    table: &'a Arc<ElementTable>,
    bytes: &'a [u8],
    pos: usize,
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    prev: Option<usize>,
    pending: Option<BondOrder>,
    branch_stack: Vec<usize>,
    /// ring label -> (atom, bond char at the opening, byte position)
    open_rings: BTreeMap<u16, (usize, Option<BondOrder>, usize)>,
    /// true right after `.` (or at the very start): an atom must follow
    /// before the fragment is usable again
    fragment_open: bool,
}

impl<'a> Parser<'a> {
    fn run(mut self) -> Result<MolecularGraph, SmilesError> {
        while self.pos < self.bytes.len() {
            let c = self.bytes[self.pos];
            match c {
                b'(' => {
                    let prev = self
                        .prev
                        .ok_or_else(|| syntax(self.pos, "branch without a preceding atom"))?;
                    if self.pending.is_some() {
                        return Err(syntax(self.pos, "bond symbol before `(`"));
                    }
                    self.branch_stack.push(prev);
                    self.pos += 1;
                }
                b')' => {
                    if self.pending.is_some() {
                        return Err(syntax(self.pos, "dangling bond before `)`"));
                    }
                    let back = self
                        .branch_stack
                        .pop()
                        .ok_or_else(|| syntax(self.pos, "unbalanced `)`"))?;
                    self.prev = Some(back);
                    self.pos += 1;
                }
                b'-' | b'/' | b'\\' => self.set_pending(BondOrder::Single)?,
                b'=' => self.set_pending(BondOrder::Double)?,
                b'#' => self.set_pending(BondOrder::Triple)?,
                b':' => self.set_pending(BondOrder::Aromatic)?,
                b'.' => {
                    if self.pending.is_some() {
                        return Err(syntax(self.pos, "bond symbol before `.`"));
                    }
                    if !self.branch_stack.is_empty() {
                        return Err(syntax(self.pos, "`.` inside a branch"));
                    }
                    if self.fragment_open {
                        return Err(syntax(self.pos, "`.` without a preceding fragment"));
                    }
                    self.prev = None;
                    self.fragment_open = true;
                    self.pos += 1;
                }
                b'0'..=b'9' => {
                    let label = (c - b'0') as u16;
                    self.pos += 1;
                    self.ring_closure(label)?;
                }
                b'%' => {
                    let start = self.pos;
                    self.pos += 1;
                    let d1 = self.next_digit(start)?;
                    let d2 = self.next_digit(start)?;
                    self.ring_closure((d1 * 10 + d2) as u16)?;
                }
                b'[' => self.bracket_atom()?,
                _ => self.bare_atom()?,
            }
        }
        if let Some(&(_, _, pos)) = self.open_rings.values().next() {
            return Err(syntax(pos, "unclosed ring bond"));
        }
        if !self.branch_stack.is_empty() {
            return Err(syntax(self.pos, "unbalanced `(`"));
        }
        if self.pending.is_some() {
            return Err(syntax(self.pos, "dangling bond at end of input"));
        }
        if self.fragment_open {
            return Err(syntax(self.pos, "trailing `.`"));
        }
        MolecularGraph::new(self.table.clone(), self.atoms, self.bonds)
            .map_err(|e| syntax(0, format!("inconsistent graph: {e}")))
    }

    fn set_pending(&mut self, order: BondOrder) -> Result<(), SmilesError> {
        if self.pending.is_some() {
            return Err(syntax(self.pos, "two bond symbols in a row"));
        }
        if self.prev.is_none() {
            return Err(syntax(self.pos, "bond symbol without a preceding atom"));
        }
        self.pending = Some(order);
        self.pos += 1;
        Ok(())
    }

    fn next_digit(&mut self, start: usize) -> Result<u8, SmilesError> {
        let c = *self
            .bytes
            .get(self.pos)
            .ok_or_else(|| syntax(start, "truncated `%` ring label"))?;
        if !c.is_ascii_digit() {
            return Err(syntax(self.pos, "`%` must be followed by two digits"));
        }
        self.pos += 1;
        Ok(c - b'0')
    }

    fn ring_closure(&mut self, label: u16) -> Result<(), SmilesError> {
        let here = self
            .prev
            .ok_or_else(|| syntax(self.pos, "ring label without a preceding atom"))?;
        let pending = self.pending.take();
        match self.open_rings.remove(&label) {
            None => {
                self.open_rings.insert(label, (here, pending, self.pos));
            }
            Some((other, other_pending, opened_at)) => {
                if other == here {
                    return Err(syntax(self.pos, "ring bond closing on the same atom"));
                }
                let order = match (other_pending, pending) {
                    (None, None) => self.implicit_order(other, here),
                    (Some(o), None) | (None, Some(o)) => o,
                    (Some(a), Some(b)) if a == b => a,
                    (Some(_), Some(_)) => {
                        return Err(syntax(
                            self.pos,
                            "conflicting bond symbols on ring closure",
                        ))
                    }
                };
                if self.bond_exists(other, here) {
                    return Err(syntax(
                        opened_at,
                        "ring closure duplicates an existing bond",
                    ));
                }
                self.bonds.push(Bond {
                    a: other,
                    b: here,
                    order,
                });
            }
        }
        Ok(())
    }

    fn bond_exists(&self, a: usize, b: usize) -> bool {
        self.bonds
            .iter()
            .any(|bond| (bond.a == a && bond.b == b) || (bond.a == b && bond.b == a))
    }

    /// An unannotated bond is aromatic iff both endpoints are aromatic.
    fn implicit_order(&self, a: usize, b: usize) -> BondOrder {
        if self.atoms[a].aromatic && self.atoms[b].aromatic {
            BondOrder::Aromatic
        } else {
            BondOrder::Single
        }
    }

    fn push_atom(&mut self, atom: Atom) {
        let idx = self.atoms.len();
        self.atoms.push(atom);
        if let Some(prev) = self.prev {
            let order = self
                .pending
                .take()
                .unwrap_or_else(|| self.implicit_order(prev, idx));
            self.bonds.push(Bond {
                a: prev,
                b: idx,
                order,
            });
        }
        self.pending = None;
        self.prev = Some(idx);
        self.fragment_open = false;
    }

    fn bare_atom(&mut self) -> Result<(), SmilesError> {
        let pos = self.pos;
        let rest = &self.bytes[pos..];
        // two-letter organic-subset symbols first
        for two in [b"Cl".as_slice(), b"Br".as_slice()] {
            if rest.starts_with(two) {
                let sym = core::str::from_utf8(two).unwrap();
                let element = self.table.lookup(sym).ok_or_else(|| {
                    SmilesError::UnsupportedElement {
                        pos,
                        symbol: sym.to_string(),
                    }
                })?;
                self.pos += 2;
                self.push_atom(Atom::new(element));
                return Ok(());
            }
        }
        let c = rest[0] as char;
        let (symbol, aromatic) = match c {
            'B' | 'C' | 'N' | 'O' | 'P' | 'S' | 'F' | 'I' => (c.to_string(), false),
            'b' | 'c' | 'n' | 'o' | 's' | 'p' => (c.to_ascii_uppercase().to_string(), true),
            _ => return Err(syntax(pos, format!("unknown token `{c}`"))),
        };
        let element =
            self.table
                .lookup(&symbol)
                .ok_or_else(|| SmilesError::UnsupportedElement {
                    pos,
                    symbol: symbol.clone(),
                })?;
        self.pos += 1;
        let mut atom = Atom::new(element);
        atom.aromatic = aromatic;
        self.push_atom(atom);
        Ok(())
    }

    fn bracket_atom(&mut self) -> Result<(), SmilesError> {
        let open = self.pos;
        self.pos += 1; // consume '['

        // isotope (ignored)
        while self
            .bytes
            .get(self.pos)
            .is_some_and(|b| b.is_ascii_digit())
        {
            self.pos += 1;
        }

        let sym_start = self.pos;
        let first = *self
            .bytes
            .get(self.pos)
            .ok_or_else(|| syntax(open, "unterminated bracket atom"))? as char;
        if !first.is_ascii_alphabetic() && first != '*' {
            return Err(syntax(self.pos, "expected element symbol in bracket"));
        }
        let (symbol, aromatic) = if first.is_ascii_uppercase() {
            // greedy two-letter match against the table; `H` after a symbol
            // is a hydrogen count, never part of a two-letter symbol here
            let mut sym = first.to_string();
            if let Some(&next) = self.bytes.get(self.pos + 1) {
                if next.is_ascii_lowercase() {
                    let two = format!("{first}{}", next as char);
                    if self.table.lookup(&two).is_some() || self.table.lookup(&sym).is_none() {
                        sym = two;
                    }
                }
            }
            self.pos += sym.len();
            (sym, false)
        } else {
            let lower = first.to_string();
            if !aromatic_capable(&lower) {
                return Err(syntax(
                    sym_start,
                    format!("`{lower}` cannot be aromatic"),
                ));
            }
            self.pos += 1;
            (first.to_ascii_uppercase().to_string(), true)
        };
        let element =
            self.table
                .lookup(&symbol)
                .ok_or_else(|| SmilesError::UnsupportedElement {
                    pos: sym_start,
                    symbol: symbol.clone(),
                })?;

        // chirality (ignored)
        while self.bytes.get(self.pos) == Some(&b'@') {
            self.pos += 1;
        }

        // hydrogen count
        let mut h_count: u8 = 0;
        if self.bytes.get(self.pos) == Some(&b'H') {
            self.pos += 1;
            h_count = 1;
            let mut digits = 0u32;
            let mut saw = false;
            while let Some(&b) = self.bytes.get(self.pos) {
                if b.is_ascii_digit() {
                    digits = digits * 10 + (b - b'0') as u32;
                    saw = true;
                    self.pos += 1;
                } else {
                    break;
                }
            }
            if saw {
                if digits > 20 {
                    return Err(syntax(self.pos, "implausible hydrogen count"));
                }
                h_count = digits as u8;
            }
        }

        // charge
        let mut charge: i32 = 0;
        if let Some(&sign) = self.bytes.get(self.pos) {
            if sign == b'+' || sign == b'-' {
                let unit: i32 = if sign == b'+' { 1 } else { -1 };
                let mut magnitude = 1i32;
                self.pos += 1;
                if self
                    .bytes
                    .get(self.pos)
                    .is_some_and(|b| b.is_ascii_digit())
                {
                    magnitude = 0;
                    while let Some(&b) = self.bytes.get(self.pos) {
                        if b.is_ascii_digit() {
                            magnitude = magnitude * 10 + (b - b'0') as i32;
                            self.pos += 1;
                        } else {
                            break;
                        }
                    }
                } else {
                    while self.bytes.get(self.pos) == Some(&sign) {
                        magnitude += 1;
                        self.pos += 1;
                    }
                }
                charge = unit * magnitude;
                if !(-4..=4).contains(&charge) {
                    return Err(syntax(self.pos, format!("charge {charge} out of [-4, 4]")));
                }
            }
        }

        // atom map (ignored)
        if self.bytes.get(self.pos) == Some(&b':') {
            self.pos += 1;
            let mut saw = false;
            while self
                .bytes
                .get(self.pos)
                .is_some_and(|b| b.is_ascii_digit())
            {
                saw = true;
                self.pos += 1;
            }
            if !saw {
                return Err(syntax(self.pos, "`:` in bracket requires a map number"));
            }
        }

        if self.bytes.get(self.pos) != Some(&b']') {
            return Err(syntax(open, "unterminated bracket atom"));
        }
        self.pos += 1;

        let atom = Atom {
            element,
            formal_charge: charge as i8,
            explicit_h: Some(h_count),
            aromatic,
        };
        self.push_atom(atom);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chem::BondOrder;

    #[test]
    fn ethanol() {
        let g = parse_smiles("CCO").unwrap();
        assert_eq!(g.atom_count(), 3);
        let syms: Vec<&str> = (0..3).map(|i| g.table().symbol(g.atom(i).element)).collect();
        assert_eq!(syms, ["C", "C", "O"]);
        assert_eq!(g.bond_count(), 2);
        assert_eq!(g.bond_between(0, 1), Some(BondOrder::Single));
        assert_eq!(g.bond_between(1, 2), Some(BondOrder::Single));
        assert_eq!(g.hydrogens(2), 1);
    }

    #[test]
    fn cyclopropane_ring_closure() {
        let g = parse_smiles("C1CC1").unwrap();
        assert_eq!(g.atom_count(), 3);
        assert_eq!(g.bond_count(), 3);
        for i in 0..3 {
            assert_eq!(g.degree(i), 2);
        }
    }

    #[test]
    fn unbalanced_inputs_are_syntax_errors() {
        for bad in [
            "C(", "C)", "C1CC", "C=", "C..C", ".C", "C.", "C((C))(", "C%1", "C=#C", "[CH4",
            "C1CC2", "", "  ",
        ] {
            match parse_smiles(bad) {
                Err(SmilesError::Syntax { .. }) => {}
                other => panic!("{bad:?} should be a syntax error, got {other:?}"),
            }
        }
    }

    #[test]
    fn benzene_is_aromatic_with_one_h_each() {
        let g = parse_smiles("c1ccccc1").unwrap();
        assert_eq!(g.atom_count(), 6);
        for i in 0..6 {
            assert!(g.atom(i).aromatic);
            assert_eq!(g.hydrogens(i), 1);
            assert_eq!(g.degree(i), 2);
        }
        assert!(g
            .bonds()
            .iter()
            .all(|b| b.order == BondOrder::Aromatic));
    }

    #[test]
    fn brackets_charges_and_h() {
        let g = parse_smiles("[NH4+]").unwrap();
        assert_eq!(g.atom(0).formal_charge, 1);
        assert_eq!(g.hydrogens(0), 4);

        let g = parse_smiles("[O-]").unwrap();
        assert_eq!(g.atom(0).formal_charge, -1);
        assert_eq!(g.hydrogens(0), 0);

        let g = parse_smiles("[Mg+2]").unwrap();
        assert_eq!(g.atom(0).formal_charge, 2);
        let g = parse_smiles("[Mg++]").unwrap();
        assert_eq!(g.atom(0).formal_charge, 2);

        // isotope, chirality and atom maps are discarded
        let g = parse_smiles("[13C@@H3:42]").unwrap();
        assert_eq!(g.hydrogens(0), 3);
        assert_eq!(g.atom(0).formal_charge, 0);
    }

    #[test]
    fn stereo_bonds_become_single() {
        let g = parse_smiles("F/C=C/F").unwrap();
        assert_eq!(g.bond_between(0, 1), Some(BondOrder::Single));
        assert_eq!(g.bond_between(1, 2), Some(BondOrder::Double));
    }

    #[test]
    fn unsupported_element() {
        match parse_smiles("[Xe]") {
            Err(SmilesError::UnsupportedElement { symbol, .. }) => assert_eq!(symbol, "Xe"),
            other => panic!("expected UnsupportedElement, got {other:?}"),
        }
    }

    #[test]
    fn strict_mode_checks_valence() {
        // neutral nitrogen with four explicit hydrogens
        assert!(parse_smiles("[NH4]").is_ok());
        assert!(matches!(
            parse_smiles_strict("[NH4]"),
            Err(SmilesError::Valence(_))
        ));
        assert!(parse_smiles_strict("[NH4+]").is_ok());
    }

    #[test]
    fn multi_fragment_and_percent_rings() {
        let g = parse_smiles("[Na+].[Cl-]").unwrap();
        assert_eq!(g.n_components(), 2);
        let g = parse_smiles("C%12CCCC%12").unwrap();
        assert_eq!(g.bond_count(), 5);
    }

    #[test]
    fn explicit_single_between_aromatic_atoms_stays_single() {
        let g = parse_smiles("c1ccccc1-c1ccccc1").unwrap();
        assert_eq!(g.bond_between(5, 6), Some(BondOrder::Single));
    }
}
