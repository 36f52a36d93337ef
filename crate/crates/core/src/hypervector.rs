//! Hypervector value type and the three HDC operations.
//!
//! A [`Hypervector`] is a fixed-length real vector. Bipolar vectors keep the
//! same flat `f64` storage with every component in {-1, +1}. The similarity
//! used throughout is the Euclidean inner product rescaled by the
//! dimensionality, `inner(a, b) = (1/D) Σ aᵢbᵢ`, so a bipolar vector has unit
//! self-similarity.

use rand::Rng;

use crate::error::{invalid, Error, Result};
use crate::seeding::tie_coin;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Flavor {
    Real,
    Bipolar,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hypervector {
    values: Vec<f64>,
    flavor: Flavor,
}

impl Hypervector {
    /// Real-valued hypervector; rejects empty or non-finite input.
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return invalid("hypervector must have at least one component");
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return invalid(format!("component {i} is not finite"));
        }
        Ok(Self { values, flavor: Flavor::Real })
    }

    /// Bipolar hypervector; every component must be exactly -1 or +1.
    pub fn bipolar(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return invalid("hypervector must have at least one component");
        }
        if let Some(i) = values.iter().position(|&v| v != 1.0 && v != -1.0) {
            return invalid(format!("component {i} is not bipolar"));
        }
        Ok(Self { values, flavor: Flavor::Bipolar })
    }

    pub(crate) fn from_parts(values: Vec<f64>, flavor: Flavor) -> Self {
        debug_assert!(!values.is_empty());
        Self { values, flavor }
    }

    pub fn zeros(dims: usize) -> Self {
        Self::from_parts(vec![0.0; dims], Flavor::Real)
    }

    /// All-ones bipolar vector (the identity for binding).
    pub fn ones(dims: usize) -> Self {
        Self::from_parts(vec![1.0; dims], Flavor::Bipolar)
    }

    /// i.i.d. fair-coin bipolar vector.
    pub fn random_bipolar<R: Rng + ?Sized>(dims: usize, rng: &mut R) -> Self {
        let values = (0..dims)
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect();
        Self::from_parts(values, Flavor::Bipolar)
    }

    pub fn dims(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    pub fn is_bipolar(&self) -> bool {
        self.flavor == Flavor::Bipolar
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    /// `c · self`. Scaling by ±1 keeps a bipolar flavor.
    pub fn scale(&self, c: f64) -> Self {
        let values = self.values.iter().map(|v| v * c).collect();
        let flavor = if self.is_bipolar() && (c == 1.0 || c == -1.0) {
            Flavor::Bipolar
        } else {
            Flavor::Real
        };
        Self::from_parts(values, flavor)
    }

    /// Elementwise `self + alpha · other`, as a real vector.
    pub fn add_scaled(&self, alpha: f64, other: &Self) -> Result<Self> {
        check_dims(self, other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + alpha * b)
            .collect();
        Ok(Self::from_parts(values, Flavor::Real))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add_scaled(-1.0, other)
    }

    /// In-place `self += alpha · other`.
    pub fn axpy(&mut self, alpha: f64, other: &Self) -> Result<()> {
        check_dims(self, other)?;
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += alpha * b;
        }
        self.flavor = Flavor::Real;
        Ok(())
    }

    /// Add a constant to every component.
    pub fn offset(&self, eps: f64) -> Self {
        if eps == 0.0 {
            return self.clone();
        }
        Self::from_parts(self.values.iter().map(|v| v + eps).collect(), Flavor::Real)
    }

    /// Keep only the listed components, in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        if indices.is_empty() {
            return invalid("selection must keep at least one component");
        }
        let mut out = Vec::with_capacity(indices.len());
        for &i in indices {
            match self.values.get(i) {
                Some(&v) => out.push(v),
                None => return invalid(format!("index {i} out of range for D={}", self.dims())),
            }
        }
        Ok(Self::from_parts(out, self.flavor))
    }
}

fn check_dims(a: &Hypervector, b: &Hypervector) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::DimensionMismatch(a.dims(), b.dims()));
    }
    Ok(())
}

/// Unscaled dot product with a fixed four-lane reduction order.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 4];
    let chunks = a.len() / 4;
    for c in 0..chunks {
        let i = 4 * c;
        acc[0] += a[i] * b[i];
        acc[1] += a[i + 1] * b[i + 1];
        acc[2] += a[i + 2] * b[i + 2];
        acc[3] += a[i + 3] * b[i + 3];
    }
    for i in 4 * chunks..a.len() {
        acc[0] += a[i] * b[i];
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3])
}

/// `(1/D) Σ aᵢbᵢ` on raw slices.
pub(crate) fn dot_scaled(a: &[f64], b: &[f64]) -> f64 {
    dot(a, b) / a.len() as f64
}

/// Elementwise product. Bipolar iff both inputs are bipolar.
pub fn bind(a: &Hypervector, b: &Hypervector) -> Result<Hypervector> {
    check_dims(a, b)?;
    let values = a.values.iter().zip(&b.values).map(|(x, y)| x * y).collect();
    let flavor = if a.is_bipolar() && b.is_bipolar() {
        Flavor::Bipolar
    } else {
        Flavor::Real
    };
    Ok(Hypervector::from_parts(values, flavor))
}

/// Elementwise sum of a nonempty list, optionally thresholded to a bipolar
/// vector with zero sums resolved by the fixed tie coin.
pub fn aggregate(vs: &[&Hypervector], thresholded: bool) -> Result<Hypervector> {
    let first = match vs.first() {
        Some(v) => *v,
        None => return invalid("cannot aggregate an empty list"),
    };
    let mut sum = first.values.clone();
    for v in &vs[1..] {
        check_dims(first, v)?;
        for (s, x) in sum.iter_mut().zip(&v.values) {
            *s += x;
        }
    }
    let out = Hypervector::from_parts(sum, Flavor::Real);
    if thresholded {
        Ok(sign_of(&out))
    } else if vs.len() == 1 {
        Ok(first.clone())
    } else {
        Ok(out)
    }
}

/// Circular shift by `k` positions: `out[i] = a[(i - k) mod D]`.
pub fn permute(a: &Hypervector, k: i64) -> Hypervector {
    let d = a.dims();
    let shift = k.rem_euclid(d as i64) as usize;
    let mut values = Vec::with_capacity(d);
    values.extend_from_slice(&a.values[d - shift..]);
    values.extend_from_slice(&a.values[..d - shift]);
    Hypervector::from_parts(values, a.flavor)
}

/// Inner product rescaled by the dimensionality.
pub fn inner(a: &Hypervector, b: &Hypervector) -> Result<f64> {
    check_dims(a, b)?;
    Ok(dot_scaled(&a.values, &b.values))
}

/// Componentwise sign; exact zeros take the fixed tie coin.
pub fn sign_of(a: &Hypervector) -> Hypervector {
    if a.is_bipolar() {
        return a.clone();
    }
    let values = a
        .values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if v > 0.0 {
                1.0
            } else if v < 0.0 {
                -1.0
            } else {
                tie_coin(i)
            }
        })
        .collect();
    Hypervector::from_parts(values, Flavor::Bipolar)
}
