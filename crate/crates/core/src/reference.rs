//! Published reference values for the quartic oscillator, embedded from
//! `data/reference_tables.json`.

use std::sync::OnceLock;

use serde::Deserialize;

const RAW: &str = include_str!("../data/reference_tables.json");

#[derive(Debug, Deserialize)]
pub struct ReferenceTables {
    pub version: u32,
    pub provenance: String,
    pub table1: CutTable,
    pub table2: Vec<EnergyTable>,
}

#[derive(Debug, Deserialize)]
pub struct CutTable {
    pub n: Vec<usize>,
    pub rows: Vec<CutRow>,
}

#[derive(Debug, Deserialize)]
pub struct CutRow {
    pub lambda: f64,
    pub values: Vec<f64>,
}

/// Energies are kept as strings so the printed digits survive untouched.
#[derive(Debug, Deserialize)]
pub struct EnergyTable {
    pub lambda: f64,
    pub known: String,
    pub rows: Vec<(usize, String)>,
}

impl EnergyTable {
    pub fn known_value(&self) -> f64 {
        self.known.parse().expect("reference data is numeric")
    }

    /// Published value at basis size `n`, if listed.
    pub fn at(&self, n: usize) -> Option<f64> {
        self.rows
            .iter()
            .find(|(size, _)| *size == n)
            .map(|(_, v)| v.parse().expect("reference data is numeric"))
    }
}

impl CutTable {
    pub fn value(&self, lambda: f64, n: usize) -> Option<f64> {
        let col = self.n.iter().position(|&m| m == n)?;
        self.rows
            .iter()
            .find(|r| r.lambda == lambda)
            .map(|r| r.values[col])
    }
}

impl ReferenceTables {
    pub fn energies(&self, lambda: f64) -> Option<&EnergyTable> {
        self.table2.iter().find(|t| t.lambda == lambda)
    }

    pub fn lambdas(&self) -> Vec<f64> {
        self.table2.iter().map(|t| t.lambda).collect()
    }
}

pub fn tables() -> &'static ReferenceTables {
    static TABLES: OnceLock<ReferenceTables> = OnceLock::new();
    TABLES.get_or_init(|| serde_json::from_str(RAW).expect("embedded reference data parses"))
}
