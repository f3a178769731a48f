//! The supported-element table: symbols, atomic numbers, masses,
//! electronegativities and allowed valences.
//!
//! The table is a versioned text resource (`resources/elements.tsv`), one
//! element per line: `symbol  atomic_number  mass  electronegativity
//! valences`, where `valences` is a comma-separated list or `-` for
//! unconstrained (metals). Line order fixes the one-hot feature layout, so
//! reordering the file changes trained models.

use crate::prelude::*;
use thiserror::Error;

/// Index into an [`ElementTable`]. Cheap to copy, only meaningful together
/// with the table that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Element(pub(crate) u8);

impl Element {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone)]
pub struct ElementInfo {
    pub symbol: String,
    pub atomic_number: u16,
    pub mass: f64,
    pub electronegativity: f64,
    /// Allowed total valences, ascending. Empty = unconstrained.
    pub valences: Vec<u8>,
}

#[derive(Debug, Error)]
pub enum ElementTableError {
    #[error("element table line {line}: expected 5 fields, got {got}")]
    FieldCount { line: usize, got: usize },
    #[error("element table line {line}: bad numeric field `{field}`")]
    BadNumber { line: usize, field: String },
    #[error("element table line {line}: duplicate symbol `{symbol}`")]
    Duplicate { line: usize, symbol: String },
    #[error("element table is empty")]
    Empty,
    #[error("element table missing version header")]
    MissingVersion,
}

#[derive(Debug, Clone)]
pub struct ElementTable {
    elements: Vec<ElementInfo>,
    by_symbol: BTreeMap<String, Element>,
}

/// Embedded copy of the default table.
const BUILTIN: &str = include_str!("../../resources/elements.tsv");

impl ElementTable {
    /// The default 19-element table shipped with the crate.
    pub fn builtin() -> Self {
        Self::parse(BUILTIN).expect("builtin element table must parse")
    }

    /// Parse the versioned text format. The first line must be a `#` comment
    /// containing `version`.
    pub fn parse(text: &str) -> Result<Self, ElementTableError> {
        let mut lines = text.lines();
        match lines.next() {
            Some(first) if first.starts_with('#') && first.contains("version") => {}
            _ => return Err(ElementTableError::MissingVersion),
        }
        let mut elements = Vec::new();
        let mut by_symbol = BTreeMap::new();
        for (i, raw) in lines.enumerate() {
            let line_no = i + 2;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 5 {
                return Err(ElementTableError::FieldCount {
                    line: line_no,
                    got: fields.len(),
                });
            }
            let bad = |f: &str| ElementTableError::BadNumber {
                line: line_no,
                field: f.to_string(),
            };
            let atomic_number: u16 = fields[1].parse().map_err(|_| bad(fields[1]))?;
            let mass: f64 = fields[2].parse().map_err(|_| bad(fields[2]))?;
            let electronegativity: f64 = fields[3].parse().map_err(|_| bad(fields[3]))?;
            let valences = if fields[4] == "-" {
                Vec::new()
            } else {
                let mut v = Vec::new();
                for part in fields[4].split(',') {
                    v.push(part.parse::<u8>().map_err(|_| bad(fields[4]))?);
                }
                v.sort_unstable();
                v
            };
            let symbol = fields[0].to_string();
            if by_symbol.contains_key(&symbol) {
                return Err(ElementTableError::Duplicate {
                    line: line_no,
                    symbol,
                });
            }
            by_symbol.insert(symbol.clone(), Element(elements.len() as u8));
            elements.push(ElementInfo {
                symbol,
                atomic_number,
                mass,
                electronegativity,
                valences,
            });
        }
        if elements.is_empty() {
            return Err(ElementTableError::Empty);
        }
        Ok(Self {
            elements,
            by_symbol,
        })
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn lookup(&self, symbol: &str) -> Option<Element> {
        self.by_symbol.get(symbol).copied()
    }

    pub fn info(&self, e: Element) -> &ElementInfo {
        &self.elements[e.index()]
    }

    pub fn symbol(&self, e: Element) -> &str {
        &self.elements[e.index()].symbol
    }

    /// Hydrogen, if present in the table (needed for molecular weights).
    pub fn hydrogen(&self) -> Option<Element> {
        self.lookup("H")
    }

    /// Allowed valences adjusted for formal charge.
    ///
    /// The neutral list comes from the table; a small explicit map covers the
    /// charged species the SMILES subset produces (ammonium, alkoxides,
    /// halides, borates, ...). `None` = unconstrained.
    pub fn allowed_valences(&self, e: Element, charge: i8) -> Option<Vec<u8>> {
        let info = self.info(e);
        if info.valences.is_empty() {
            return None; // metals: unconstrained
        }
        if charge == 0 {
            return Some(info.valences.clone());
        }
        let adjusted: Option<Vec<u8>> = match (info.symbol.as_str(), charge) {
            ("N", 1) => Some(vec![4]),
            ("N", -1) => Some(vec![2]),
            ("P", 1) => Some(vec![4]),
            ("O", 1) => Some(vec![3]),
            ("O", -1) => Some(vec![1]),
            ("S", 1) => Some(vec![3]),
            ("S", -1) => Some(vec![1]),
            ("C", 1) | ("C", -1) => Some(vec![3]),
            ("B", -1) => Some(vec![4]),
            ("F" | "Cl" | "Br" | "I", -1) => Some(vec![0]),
            ("H", 1) | ("H", -1) => Some(vec![0]),
            _ => None,
        };
        // Unmapped charge states fall back to the neutral list; strict-mode
        // callers will reject anything that exceeds it.
        Some(adjusted.unwrap_or_else(|| info.valences.clone()))
    }
}

/// Elements writable without brackets in the SMILES subset (the "organic
/// subset"), i.e. those whose implicit hydrogen count is derived from the
/// valence table.
pub fn organic_subset(symbol: &str) -> bool {
    matches!(
        symbol,
        "B" | "C" | "N" | "O" | "P" | "S" | "F" | "Cl" | "Br" | "I"
    )
}

/// Elements that may carry the aromatic (lowercase) flag.
pub fn aromatic_capable(symbol: &str) -> bool {
    matches!(symbol, "b" | "c" | "n" | "o" | "s" | "p")
}
