use super::{hash_params, Encoder};
use crate::error::{invalid, Result};
use crate::hypervector::Hypervector;

/// Indices of the `keep` components with the largest standard deviation
/// across `vectors`, returned in ascending order. Ties prefer the lower index.
pub fn select_informative_dims(vectors: &[Hypervector], keep: usize) -> Result<Vec<usize>> {
    if vectors.len() < 2 {
        return invalid("need at least two vectors to rank components");
    }
    let dims = vectors[0].dims();
    if vectors.iter().any(|v| v.dims() != dims) {
        return invalid("vectors differ in dimensionality");
    }
    if keep == 0 || keep > dims {
        return invalid(format!("cannot keep {keep} of {dims} components"));
    }
    // m Σx² - (Σx)² ranks like the variance and is sign symmetric, so columns
    // that are negations of each other tie exactly.
    let m = vectors.len() as f64;
    let mut sum = vec![0.0; dims];
    let mut sq = vec![0.0; dims];
    for v in vectors {
        for ((s, q), x) in sum.iter_mut().zip(sq.iter_mut()).zip(v.values()) {
            *s += x;
            *q += x * x;
        }
    }
    let var: Vec<f64> = sum.iter().zip(&sq).map(|(s, q)| (m * q - s * s).max(0.0)).collect();
    let mut order: Vec<usize> = (0..dims).collect();
    order.sort_by(|&a, &b| var[b].total_cmp(&var[a]).then(a.cmp(&b)));
    let mut picked = order[..keep].to_vec();
    picked.sort_unstable();
    Ok(picked)
}

/// An encoder restricted to a fixed subset of its components.
#[derive(Debug, Clone)]
pub struct Selected<E> {
    inner: E,
    indices: Vec<usize>,
}

impl<E: Encoder> Selected<E> {
    pub fn new(inner: E, indices: Vec<usize>) -> Result<Self> {
        if indices.is_empty() {
            return invalid("selection is empty");
        }
        if let Some(&bad) = indices.iter().find(|&&i| i >= inner.dims()) {
            return invalid(format!("index {bad} out of range for D={}", inner.dims()));
        }
        Ok(Self { inner, indices })
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn inner(&self) -> &E {
        &self.inner
    }
}

impl<E: Encoder> Encoder for Selected<E> {
    type Point = E::Point;

    fn dims(&self) -> usize {
        self.indices.len()
    }

    fn seed(&self) -> u64 {
        self.inner.seed()
    }

    fn id(&self) -> u64 {
        let digest = crate::seeding::fnv1a(
            &self.indices.iter().flat_map(|i| (*i as u64).to_le_bytes()).collect::<Vec<u8>>(),
        );
        hash_params("selected", &[self.inner.id().to_string(), digest.to_string()])
    }

    fn encode(&self, x: &E::Point) -> Result<Hypervector> {
        self.inner.encode(x)?.select(&self.indices)
    }
}
