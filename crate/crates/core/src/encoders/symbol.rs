use std::collections::HashMap;

use super::{hash_params, Encoder};
use crate::error::{invalid, Result};
use crate::hypervector::Hypervector;
use crate::seeding;

/// i.i.d. random bipolar vector per symbol of a declared set.
///
/// The vector for a symbol depends only on the seed and the symbol text, so
/// adding symbols to the set never changes the vectors of existing ones.
#[derive(Debug, Clone)]
pub struct SymbolEncoder {
    dims: usize,
    seed: u64,
    symbols: Vec<String>,
    index: HashMap<String, usize>,
    vectors: Vec<Hypervector>,
}

impl SymbolEncoder {
    pub fn new<S: AsRef<str>>(symbols: &[S], dims: usize, seed: u64) -> Result<Self> {
        if dims == 0 {
            return invalid("dims must be positive");
        }
        if symbols.is_empty() {
            return invalid("symbol set is empty");
        }
        let mut index = HashMap::new();
        let mut names = Vec::with_capacity(symbols.len());
        let mut vectors = Vec::with_capacity(symbols.len());
        for s in symbols {
            let s = s.as_ref().to_string();
            if index.insert(s.clone(), names.len()).is_some() {
                return invalid(format!("duplicate symbol {s:?}"));
            }
            vectors.push(symbol_vector(&s, dims, seed));
            names.push(s);
        }
        Ok(Self { dims, seed, symbols: names, index, vectors })
    }

    pub fn symbols(&self) -> &[String] {
        &self.symbols
    }

    pub fn position(&self, s: &str) -> Option<usize> {
        self.index.get(s).copied()
    }

    pub fn get(&self, s: &str) -> Result<&Hypervector> {
        match self.index.get(s) {
            Some(&i) => Ok(&self.vectors[i]),
            None => invalid(format!("unknown symbol {s:?}")),
        }
    }
}

pub(crate) fn symbol_vector(s: &str, dims: usize, seed: u64) -> Hypervector {
    let key = seeding::combine(seed, seeding::fnv1a(s.as_bytes()));
    Hypervector::random_bipolar(dims, &mut seeding::rng(key, 4))
}

impl Encoder for SymbolEncoder {
    type Point = String;

    fn dims(&self) -> usize {
        self.dims
    }

    fn seed(&self) -> u64 {
        self.seed
    }

    fn id(&self) -> u64 {
        let mut parts = vec![self.dims.to_string(), self.seed.to_string()];
        parts.extend(self.symbols.iter().cloned());
        hash_params("symbols", &parts)
    }

    fn encode(&self, s: &String) -> Result<Hypervector> {
        self.get(s).cloned()
    }
}
