//! Seeded encoders from domain elements to hypervectors.
//!
//! Every encoder is a pure function of its construction parameters and the
//! input. Two encoders built from equal parameters agree on every input, and
//! their [`Encoder::id`] values agree as well.

mod cos_sin;
mod interval;
mod select;
mod sequence;
mod spec;
mod symbol;

pub use cos_sin::{CosSinEncoder, COS_SIN_DISPLAY_RANGE};
pub use interval::{IntervalEncoder, IntervalFlavor};
pub use select::{select_informative_dims, Selected};
pub use sequence::{SequenceEncoder, SequenceFlavor, PROTEIN_ALPHABET};
pub use spec::{encode_product, AnyEncoder, DomainKind, EncoderSpec, FlavorKind, Value, DEFAULT_DIMS};
pub use symbol::SymbolEncoder;

use crate::error::Result;
use crate::hypervector::Hypervector;

/// A deterministic map from a domain to hypervectors of fixed length.
pub trait Encoder {
    type Point: Clone + std::fmt::Debug;

    fn dims(&self) -> usize;

    /// Seed the random tables were drawn from.
    fn seed(&self) -> u64;

    /// Stable hash of every construction parameter.
    fn id(&self) -> u64;

    fn encode(&self, x: &Self::Point) -> Result<Hypervector>;
}

impl<E: Encoder + ?Sized> Encoder for &E {
    type Point = E::Point;

    fn dims(&self) -> usize {
        (**self).dims()
    }

    fn seed(&self) -> u64 {
        (**self).seed()
    }

    fn id(&self) -> u64 {
        (**self).id()
    }

    fn encode(&self, x: &Self::Point) -> Result<Hypervector> {
        (**self).encode(x)
    }
}

pub(crate) fn hash_params(tag: &str, parts: &[String]) -> u64 {
    let mut text = String::from(tag);
    for p in parts {
        text.push('|');
        text.push_str(p);
    }
    crate::seeding::fnv1a(text.as_bytes())
}
