use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{hash_params, Encoder};
use crate::error::{invalid, Result};
use crate::hypervector::{Flavor, Hypervector};
use crate::seeding;

/// Input range over which the baseline's similarity profile is displayed.
///
/// At these magnitudes the `x + x'` interference term has vanished and the
/// kernel is close to its stationary form `(1 + exp(-2 d²)) / 8`.
pub const COS_SIN_DISPLAY_RANGE: (f64, f64) = (2.0, 10.0);

/// Random-feature baseline `cos(x·nᵢ + uᵢ) · sin(x·nᵢ)` with `nᵢ ~ N(0, 1)`
/// and `uᵢ ~ U[0, 2π)`.
///
/// Unlike the length-scale encoders its similarity never decays to zero: the
/// expected inner product floors at about one half of its peak.
#[derive(Debug, Clone)]
pub struct CosSinEncoder {
    dims: usize,
    seed: u64,
    freqs: Vec<f64>,
    offsets: Vec<f64>,
}

impl CosSinEncoder {
    pub fn new(dims: usize, seed: u64) -> Result<Self> {
        if dims == 0 {
            return invalid("dims must be positive");
        }
        let mut rng = seeding::rng(seed, 3);
        let mut freqs = Vec::with_capacity(dims);
        let mut offsets = Vec::with_capacity(dims);
        for _ in 0..dims {
            freqs.push(rng.sample::<f64, _>(StandardNormal));
            offsets.push(rng.random::<f64>() * TAU);
        }
        Ok(Self { dims, seed, freqs, offsets })
    }

    /// Closed-form expected inner product for inputs `x` and `y`.
    pub fn expected_kernel(x: f64, y: f64) -> f64 {
        let d = x - y;
        let s = x + y;
        let gauss = |t: f64| (-t * t / 2.0).exp();
        0.25 * (0.5 * (1.0 + gauss(2.0 * d)) - 0.5 * (gauss(s - d) + gauss(s + d)))
    }
}

impl Encoder for CosSinEncoder {
    type Point = f64;

    fn dims(&self) -> usize {
        self.dims
    }

    fn seed(&self) -> u64 {
        self.seed
    }

    fn id(&self) -> u64 {
        hash_params("cos-sin", &[self.dims.to_string(), self.seed.to_string()])
    }

    fn encode(&self, x: &f64) -> Result<Hypervector> {
        if !x.is_finite() {
            return invalid(format!("x = {x} is not finite"));
        }
        let values = self
            .freqs
            .iter()
            .zip(&self.offsets)
            .map(|(n, u)| (x * n + u).cos() * (x * n).sin())
            .collect();
        Ok(Hypervector::from_parts(values, Flavor::Real))
    }
}
