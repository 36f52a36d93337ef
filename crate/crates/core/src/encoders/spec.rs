use serde::{Deserialize, Serialize};

use super::{
    CosSinEncoder, Encoder, IntervalEncoder, IntervalFlavor, SequenceEncoder, SequenceFlavor,
    SymbolEncoder,
};
use crate::error::{invalid, Error, Result};
use crate::hypervector::{bind, Hypervector};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DomainKind {
    Interval,
    Symbols,
    Sequence,
    Product,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FlavorKind {
    RealCosine,
    BipolarSign,
    CosSinBaseline,
    IidSymbol,
}

/// Plain-data description of an encoder, loadable from a TOML block:
///
/// ```toml
/// domain = "interval"
/// flavor = "bipolar-sign"
/// lo = 0.0
/// hi = 1.0
/// length_scale = 0.1
/// dims = 20000
/// seed = 1
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EncoderSpec {
    pub domain: DomainKind,
    #[serde(default)]
    pub flavor: Option<FlavorKind>,
    #[serde(default)]
    pub length_scale: Option<f64>,
    #[serde(default)]
    pub dims: Option<usize>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub lo: Option<f64>,
    #[serde(default)]
    pub hi: Option<f64>,
    /// Symbol set for `symbols` domains.
    #[serde(default)]
    pub symbols: Option<Vec<String>>,
    /// Alphabet for `sequence` domains, one character per symbol.
    #[serde(default)]
    pub alphabet: Option<String>,
    /// k-mer order for `sequence` domains.
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub factors: Option<Vec<EncoderSpec>>,
}

pub const DEFAULT_DIMS: usize = 20_000;

impl EncoderSpec {
    pub fn interval(lo: f64, hi: f64, length_scale: f64, flavor: FlavorKind, dims: usize, seed: u64) -> Self {
        Self {
            domain: DomainKind::Interval,
            flavor: Some(flavor),
            length_scale: Some(length_scale),
            dims: Some(dims),
            seed: Some(seed),
            lo: Some(lo),
            hi: Some(hi),
            symbols: None,
            alphabet: None,
            k: None,
            factors: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn build(&self) -> Result<AnyEncoder> {
        let dims = self.dims.unwrap_or(DEFAULT_DIMS);
        let seed = self.seed.unwrap_or(0);
        match self.domain {
            DomainKind::Interval => {
                let lo = self.lo.unwrap_or(0.0);
                let hi = self.hi.unwrap_or(1.0);
                match self.flavor.unwrap_or(FlavorKind::BipolarSign) {
                    FlavorKind::CosSinBaseline => Ok(AnyEncoder::CosSin(CosSinEncoder::new(dims, seed)?)),
                    FlavorKind::IidSymbol => invalid("iid-symbol flavor does not apply to intervals"),
                    f => {
                        let l = match self.length_scale {
                            Some(l) => l,
                            None => return invalid("interval encoders need a length_scale"),
                        };
                        let flavor = if f == FlavorKind::RealCosine {
                            IntervalFlavor::RealCosine
                        } else {
                            IntervalFlavor::BipolarSign
                        };
                        Ok(AnyEncoder::Interval(IntervalEncoder::new(lo, hi, l, dims, seed, flavor)?))
                    }
                }
            }
            DomainKind::Symbols => {
                if let Some(l) = self.length_scale {
                    if l != 1.0 {
                        return invalid("symbol encoders have an implicit length scale of 1");
                    }
                }
                let symbols = match &self.symbols {
                    Some(s) => s,
                    None => return invalid("symbol encoders need a symbols list"),
                };
                Ok(AnyEncoder::Symbol(SymbolEncoder::new(symbols, dims, seed)?))
            }
            DomainKind::Sequence => {
                if let Some(l) = self.length_scale {
                    if !(l > 0.0) {
                        return invalid("length_scale must be positive");
                    }
                }
                let alphabet = self.alphabet.as_deref().unwrap_or(super::PROTEIN_ALPHABET);
                let flavor = match self.flavor.unwrap_or(FlavorKind::IidSymbol) {
                    FlavorKind::IidSymbol => SequenceFlavor::IidSymbol,
                    FlavorKind::BipolarSign => SequenceFlavor::BipolarSign,
                    other => return invalid(format!("flavor {other:?} does not apply to sequences")),
                };
                Ok(AnyEncoder::Sequence(SequenceEncoder::new(
                    alphabet,
                    self.k.unwrap_or(3),
                    dims,
                    seed,
                    flavor,
                )?))
            }
            DomainKind::Product => {
                let factors = match &self.factors {
                    Some(f) if f.len() >= 2 => f,
                    _ => return invalid("product encoders need at least two factors"),
                };
                let built = factors.iter().map(|f| f.build()).collect::<Result<Vec<_>>>()?;
                if built.iter().any(|b| b.dims() != built[0].dims()) {
                    return invalid("product factors differ in dims");
                }
                for (i, a) in built.iter().enumerate() {
                    if built[i + 1..].iter().any(|b| b.seed() == a.seed()) {
                        return invalid("product factors must use distinct seeds");
                    }
                }
                Ok(AnyEncoder::Product(built))
            }
        }
    }
}

/// A domain element for a dynamically chosen encoder.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Real(f64),
    Text(String),
    Tuple(Vec<Value>),
}

impl Value {
    /// Parse a CSV cell: numbers become reals, anything else text.
    pub fn parse(cell: &str) -> Self {
        match cell.trim().parse::<f64>() {
            Ok(x) => Value::Real(x),
            Err(_) => Value::Text(cell.trim().to_string()),
        }
    }
}

/// Runtime-selected encoder built from an [`EncoderSpec`].
#[derive(Debug, Clone)]
pub enum AnyEncoder {
    Interval(IntervalEncoder),
    CosSin(CosSinEncoder),
    Symbol(SymbolEncoder),
    Sequence(SequenceEncoder),
    Product(Vec<AnyEncoder>),
}

impl AnyEncoder {
    pub fn as_interval(&self) -> Option<&IntervalEncoder> {
        match self {
            AnyEncoder::Interval(e) => Some(e),
            _ => None,
        }
    }
}

/// Binding of each factor's encoding of the matching tuple element.
pub fn encode_product(factors: &[AnyEncoder], xs: &[Value]) -> Result<Hypervector> {
    if factors.len() != xs.len() {
        return invalid(format!("product of {} factors got {} elements", factors.len(), xs.len()));
    }
    if factors.is_empty() {
        return invalid("empty product");
    }
    let mut out = factors[0].encode(&xs[0])?;
    for (f, x) in factors.iter().zip(xs).skip(1) {
        out = bind(&out, &f.encode(x)?)?;
    }
    Ok(out)
}

impl Encoder for AnyEncoder {
    type Point = Value;

    fn dims(&self) -> usize {
        match self {
            AnyEncoder::Interval(e) => e.dims(),
            AnyEncoder::CosSin(e) => e.dims(),
            AnyEncoder::Symbol(e) => e.dims(),
            AnyEncoder::Sequence(e) => e.dims(),
            AnyEncoder::Product(f) => f[0].dims(),
        }
    }

    fn seed(&self) -> u64 {
        match self {
            AnyEncoder::Interval(e) => e.seed(),
            AnyEncoder::CosSin(e) => e.seed(),
            AnyEncoder::Symbol(e) => e.seed(),
            AnyEncoder::Sequence(e) => e.seed(),
            AnyEncoder::Product(f) => f.iter().fold(0, |h, e| crate::seeding::combine(h, e.seed())),
        }
    }

    fn id(&self) -> u64 {
        match self {
            AnyEncoder::Interval(e) => e.id(),
            AnyEncoder::CosSin(e) => e.id(),
            AnyEncoder::Symbol(e) => e.id(),
            AnyEncoder::Sequence(e) => e.id(),
            AnyEncoder::Product(f) => f.iter().fold(0x9d, |h, e| crate::seeding::combine(h, e.id())),
        }
    }

    fn encode(&self, x: &Value) -> Result<Hypervector> {
        match (self, x) {
            (AnyEncoder::Interval(e), Value::Real(v)) => e.encode(v),
            (AnyEncoder::CosSin(e), Value::Real(v)) => e.encode(v),
            (AnyEncoder::Symbol(e), Value::Text(s)) => e.encode(s),
            (AnyEncoder::Symbol(e), Value::Real(v)) => e.encode(&format_real(*v)),
            (AnyEncoder::Sequence(e), Value::Text(s)) => e.encode(s),
            (AnyEncoder::Product(f), Value::Tuple(xs)) => encode_product(f, xs),
            (_, other) => invalid(format!("value {other:?} does not fit this encoder")),
        }
    }
}

fn format_real(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        format!("{}", v as i64)
    } else {
        format!("{v}")
    }
}
