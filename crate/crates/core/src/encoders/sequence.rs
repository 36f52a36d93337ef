use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::symbol::symbol_vector;
use super::{hash_params, Encoder};
use crate::error::{invalid, Result};
use crate::hypervector::{permute, sign_of, Flavor, Hypervector};

/// The twenty standard amino-acid letters.
pub const PROTEIN_ALPHABET: &str = "ACDEFGHIKLMNPQRSTVWY";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SequenceFlavor {
    /// Real sum over windows divided by the number of windows.
    IidSymbol,
    /// Sign of the window sum: a bipolar vector.
    BipolarSign,
}

/// k-mer encoder for symbol strings.
///
/// Every window `s[p..p+k]` is encoded as the binding of its symbols, the
/// symbol at offset `t` circularly shifted by `t`. Windows are aggregated
/// into one vector per sequence.
#[derive(Debug, Clone)]
pub struct SequenceEncoder {
    alphabet: Vec<char>,
    index: HashMap<char, usize>,
    order: usize,
    dims: usize,
    seed: u64,
    flavor: SequenceFlavor,
    /// `shifted[t][a]` is symbol `a`'s vector permuted by `t`.
    shifted: Vec<Vec<Vec<f64>>>,
}

impl SequenceEncoder {
    pub fn new(alphabet: &str, order: usize, dims: usize, seed: u64, flavor: SequenceFlavor) -> Result<Self> {
        if dims == 0 {
            return invalid("dims must be positive");
        }
        if order == 0 {
            return invalid("k-mer order must be positive");
        }
        let chars: Vec<char> = alphabet.chars().collect();
        if chars.is_empty() {
            return invalid("alphabet is empty");
        }
        let mut index = HashMap::new();
        for (i, &c) in chars.iter().enumerate() {
            if index.insert(c, i).is_some() {
                return invalid(format!("duplicate symbol {c:?} in alphabet"));
            }
        }
        let base: Vec<Hypervector> = chars
            .iter()
            .map(|c| symbol_vector(&c.to_string(), dims, seed))
            .collect();
        let shifted = (0..order)
            .map(|t| {
                base.iter()
                    .map(|v| permute(v, t as i64).into_values())
                    .collect()
            })
            .collect();
        Ok(Self { alphabet: chars, index, order, dims, seed, flavor, shifted })
    }

    /// Trimer encoder with the default flavor.
    pub fn trimer(alphabet: &str, dims: usize, seed: u64) -> Result<Self> {
        Self::new(alphabet, 3, dims, seed, SequenceFlavor::IidSymbol)
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn alphabet(&self) -> String {
        self.alphabet.iter().collect()
    }

    pub fn flavor(&self) -> SequenceFlavor {
        self.flavor
    }

    /// Unscaled, unthresholded sum over all windows.
    pub fn window_sum(&self, seq: &str) -> Result<Vec<f64>> {
        let codes = seq
            .chars()
            .map(|c| match self.index.get(&c) {
                Some(&i) => Ok(i),
                None => invalid(format!("symbol {c:?} not in alphabet")),
            })
            .collect::<Result<Vec<usize>>>()?;
        if codes.len() < self.order {
            return invalid(format!(
                "sequence of length {} shorter than k = {}",
                codes.len(),
                self.order
            ));
        }
        let mut acc = vec![0.0; self.dims];
        let mut tmp = vec![0.0; self.dims];
        for w in codes.windows(self.order) {
            if self.order == 3 {
                let (a, b, c) = (&self.shifted[0][w[0]], &self.shifted[1][w[1]], &self.shifted[2][w[2]]);
                for i in 0..self.dims {
                    acc[i] += a[i] * b[i] * c[i];
                }
            } else {
                tmp.copy_from_slice(&self.shifted[0][w[0]]);
                for (t, &s) in w.iter().enumerate().skip(1) {
                    for (x, y) in tmp.iter_mut().zip(&self.shifted[t][s]) {
                        *x *= y;
                    }
                }
                for (x, y) in acc.iter_mut().zip(&tmp) {
                    *x += y;
                }
            }
        }
        Ok(acc)
    }
}

impl Encoder for SequenceEncoder {
    type Point = String;

    fn dims(&self) -> usize {
        self.dims
    }

    fn seed(&self) -> u64 {
        self.seed
    }

    fn id(&self) -> u64 {
        hash_params(
            "sequence",
            &[
                format!("{:?}", self.flavor),
                self.alphabet(),
                self.order.to_string(),
                self.dims.to_string(),
                self.seed.to_string(),
            ],
        )
    }

    fn encode(&self, seq: &String) -> Result<Hypervector> {
        let sum = self.window_sum(seq)?;
        let windows = (seq.chars().count() - self.order + 1) as f64;
        let raw = Hypervector::from_parts(sum, Flavor::Real);
        Ok(match self.flavor {
            SequenceFlavor::IidSymbol => raw.scale(1.0 / windows),
            SequenceFlavor::BipolarSign => sign_of(&raw),
        })
    }
}
