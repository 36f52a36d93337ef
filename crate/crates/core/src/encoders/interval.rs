use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{hash_params, Encoder};
use crate::error::{invalid, Result};
use crate::hypervector::{Flavor, Hypervector};
use crate::seeding;

/// Slack allowed when checking that an input lies in `[lo, hi]`.
const DOMAIN_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum IntervalFlavor {
    /// Concatenated one-period cosine bumps `r (1 - cos(2πu/l)) / 2`.
    RealCosine,
    /// Signs of the cosine construction: a random ±1 step function.
    BipolarSign,
}

/// Length-scale encoder for a real interval.
///
/// Each component is a random function of `x`: the line is cut into segments
/// of width `l`, shifted by a per-component phase in `[0, l)`, and every
/// segment carries an independent random sign. Inputs closer than `l` share
/// segments in many components and are correlated; inputs further apart are
/// uncorrelated in expectation.
#[derive(Debug, Clone)]
pub struct IntervalEncoder {
    lo: f64,
    hi: f64,
    length_scale: f64,
    dims: usize,
    seed: u64,
    flavor: IntervalFlavor,
    phases: Vec<f64>,
    /// Row-major `dims × segments` table of ±1 signs.
    signs: Vec<i8>,
    segments: usize,
}

impl IntervalEncoder {
    pub fn new(
        lo: f64,
        hi: f64,
        length_scale: f64,
        dims: usize,
        seed: u64,
        flavor: IntervalFlavor,
    ) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return invalid(format!("interval [{lo}, {hi}] is empty or not finite"));
        }
        if !(length_scale.is_finite() && length_scale > 0.0) {
            return invalid(format!("length scale must be positive, got {length_scale}"));
        }
        if dims == 0 {
            return invalid("dims must be positive");
        }
        let segments = ((hi - lo) / length_scale).floor() as usize + 2;
        let mut rng = seeding::rng(seed, 1);
        let mut phases = Vec::with_capacity(dims);
        let mut signs = Vec::with_capacity(dims * segments);
        for _ in 0..dims {
            phases.push(rng.random::<f64>() * length_scale);
            for _ in 0..segments {
                signs.push(if rng.random::<bool>() { 1 } else { -1 });
            }
        }
        Ok(Self { lo, hi, length_scale, dims, seed, flavor, phases, signs, segments })
    }

    pub fn real(lo: f64, hi: f64, length_scale: f64, dims: usize, seed: u64) -> Result<Self> {
        Self::new(lo, hi, length_scale, dims, seed, IntervalFlavor::RealCosine)
    }

    pub fn bipolar(lo: f64, hi: f64, length_scale: f64, dims: usize, seed: u64) -> Result<Self> {
        Self::new(lo, hi, length_scale, dims, seed, IntervalFlavor::BipolarSign)
    }

    pub fn lo(&self) -> f64 {
        self.lo
    }

    pub fn hi(&self) -> f64 {
        self.hi
    }

    pub fn length_scale(&self) -> f64 {
        self.length_scale
    }

    pub fn flavor(&self) -> IntervalFlavor {
        self.flavor
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo - DOMAIN_SLACK && x <= self.hi + DOMAIN_SLACK
    }

    fn check(&self, x: f64) -> Result<f64> {
        if !x.is_finite() || !self.contains(x) {
            return invalid(format!("x = {x} outside [{}, {}]", self.lo, self.hi));
        }
        Ok(x.clamp(self.lo, self.hi))
    }

    /// Segment sign and local coordinate `u ∈ [0, l)` of component `i`.
    #[inline]
    fn locate(&self, i: usize, x: f64) -> (f64, f64) {
        let t = x - self.lo + self.phases[i];
        let j = ((t / self.length_scale).floor() as usize).min(self.segments - 1);
        let u = t - j as f64 * self.length_scale;
        (f64::from(self.signs[i * self.segments + j]), u)
    }

    /// Analytic derivative of order 1 or 2 of the real-cosine encoding.
    pub fn encode_derivative(&self, x: f64, order: u32) -> Result<Hypervector> {
        if self.flavor != IntervalFlavor::RealCosine {
            return Err(crate::Error::Unsupported(
                "analytic derivatives exist only for the real-cosine flavor".into(),
            ));
        }
        if order > 2 {
            return Err(crate::Error::Unsupported(format!("derivative order {order}")));
        }
        let x = self.check(x)?;
        let l = self.length_scale;
        let w = 2.0 * PI / l;
        let values = (0..self.dims)
            .map(|i| {
                let (r, u) = self.locate(i, x);
                match order {
                    0 => r * (1.0 - (w * u).cos()) / 2.0,
                    1 => r * (PI / l) * (w * u).sin(),
                    _ => r * (2.0 * PI * PI / (l * l)) * (w * u).cos(),
                }
            })
            .collect();
        Hypervector::new(values)
    }
}

impl Encoder for IntervalEncoder {
    type Point = f64;

    fn dims(&self) -> usize {
        self.dims
    }

    fn seed(&self) -> u64 {
        self.seed
    }

    fn id(&self) -> u64 {
        hash_params(
            "interval",
            &[
                format!("{:?}", self.flavor),
                self.lo.to_bits().to_string(),
                self.hi.to_bits().to_string(),
                self.length_scale.to_bits().to_string(),
                self.dims.to_string(),
                self.seed.to_string(),
            ],
        )
    }

    fn encode(&self, x: &f64) -> Result<Hypervector> {
        let x = self.check(*x)?;
        match self.flavor {
            IntervalFlavor::BipolarSign => {
                let values = (0..self.dims).map(|i| self.locate(i, x).0).collect();
                Ok(Hypervector::from_parts(values, Flavor::Bipolar))
            }
            IntervalFlavor::RealCosine => {
                let w = 2.0 * PI / self.length_scale;
                let values = (0..self.dims)
                    .map(|i| {
                        let (r, u) = self.locate(i, x);
                        r * (1.0 - (w * u).cos()) / 2.0
                    })
                    .collect();
                Ok(Hypervector::from_parts(values, Flavor::Real))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypervector::inner;

    const D: usize = 20_000;

    fn triangle(d: f64, l: f64) -> f64 {
        (1.0 - d.abs() / l).max(0.0)
    }

    #[test]
    fn deterministic_and_bipolar_unit_norm() {
        let a = IntervalEncoder::bipolar(0.0, 1.0, 0.1, 512, 9).unwrap();
        let b = IntervalEncoder::bipolar(0.0, 1.0, 0.1, 512, 9).unwrap();
        assert_eq!(a.encode(&0.37).unwrap(), b.encode(&0.37).unwrap());
        assert_eq!(a.id(), b.id());
        let v = a.encode(&0.37).unwrap();
        assert!(v.is_bipolar());
        assert_eq!(inner(&v, &v).unwrap(), 1.0);
        let c = IntervalEncoder::bipolar(0.0, 1.0, 0.1, 512, 10).unwrap();
        assert_ne!(a.id(), c.id());
    }

    #[test]
    fn rejects_out_of_domain() {
        let e = IntervalEncoder::real(0.0, 1.0, 0.1, 16, 1).unwrap();
        assert!(e.encode(&1.2).is_err());
        assert!(e.encode(&-0.01).is_err());
        assert!(e.encode(&f64::NAN).is_err());
        assert!(e.encode(&1.0).is_ok());
        assert!(IntervalEncoder::real(0.0, 1.0, 0.0, 16, 1).is_err());
        assert!(IntervalEncoder::real(1.0, 0.0, 0.1, 16, 1).is_err());
    }

    #[test]
    fn bipolar_kernel_half_and_far() {
        let l = 0.1;
        let e = IntervalEncoder::bipolar(0.0, 1.0, l, D, 4).unwrap();
        let mut r = seeding::rng(77, 0);
        for _ in 0..50 {
            let x = 0.1 + 0.7 * r.random::<f64>();
            let half = inner(&e.encode(&x).unwrap(), &e.encode(&(x + l / 2.0)).unwrap()).unwrap();
            assert!((half - 0.5).abs() <= 0.04, "{half}");
            let far = inner(&e.encode(&x).unwrap(), &e.encode(&(x + l * 1.5)).unwrap()).unwrap();
            assert!(far.abs() <= 0.04, "{far}");
        }
    }

    #[test]
    fn bipolar_kernel_matches_triangle_for_most_pairs() {
        let l = 0.3;
        let e = IntervalEncoder::bipolar(0.0, 1.0, l, D, 5).unwrap();
        let mut r = seeding::rng(5, 5);
        let bound = 5.0 / (D as f64).sqrt();
        let mut good = 0;
        for _ in 0..300 {
            let (x, y) = (r.random::<f64>(), r.random::<f64>());
            let k = inner(&e.encode(&x).unwrap(), &e.encode(&y).unwrap()).unwrap();
            if (k - triangle(x - y, l)).abs() <= bound {
                good += 1;
            }
        }
        assert!(good >= 297, "{good}/300 within 5/sqrt(D)");
    }

    #[test]
    fn real_kernel_decays_within_length_scale() {
        let l = 0.3;
        let e = IntervalEncoder::real(0.0, 1.0, l, D, 6).unwrap();
        let mut r = seeding::rng(6, 6);
        let bound = 5.0 / (D as f64).sqrt();
        let mut far_pairs = 0;
        while far_pairs < 200 {
            let (x, y) = (r.random::<f64>(), r.random::<f64>());
            if (x - y).abs() < l {
                continue;
            }
            far_pairs += 1;
            let k = inner(&e.encode(&x).unwrap(), &e.encode(&y).unwrap()).unwrap();
            assert!(k.abs() <= bound, "|x-y|={} k={k}", (x - y).abs());
        }
        for x in [0.1, 0.4, 0.6] {
            let k = inner(&e.encode(&x).unwrap(), &e.encode(&(x + l / 4.0)).unwrap()).unwrap();
            assert!(k > 0.1, "{k}");
        }
        let v = e.encode(&0.5).unwrap();
        let s = inner(&v, &v).unwrap();
        assert!((s - 0.375).abs() < 0.01, "{s}");
    }

    #[test]
    fn translation_invariance() {
        let l = 0.1;
        let e = IntervalEncoder::bipolar(0.0, 1.0, l, D, 8).unwrap();
        let f = IntervalEncoder::real(0.0, 1.0, l, D, 8).unwrap();
        let mut r = seeding::rng(8, 8);
        for _ in 0..40 {
            let x = 0.1 + 0.3 * r.random::<f64>();
            let y = x + 0.15 * (r.random::<f64>() - 0.5);
            let delta = 0.4 * r.random::<f64>();
            for enc in [&e, &f] {
                let k1 = inner(&enc.encode(&x).unwrap(), &enc.encode(&y).unwrap()).unwrap();
                let k2 = inner(&enc.encode(&(x + delta)).unwrap(), &enc.encode(&(y + delta)).unwrap())
                    .unwrap();
                assert!((k1 - k2).abs() <= 0.04, "{k1} vs {k2}");
            }
        }
    }

    #[test]
    fn analytic_derivative_matches_difference_quotient() {
        let l = 0.2;
        let e = IntervalEncoder::real(0.0, 1.0, l, 64, 3).unwrap();
        let h = 1e-6;
        let x = 0.43;
        let d1 = e.encode_derivative(x, 1).unwrap();
        let d2 = e.encode_derivative(x, 2).unwrap();
        let p = e.encode(&(x + h)).unwrap();
        let m = e.encode(&(x - h)).unwrap();
        let c = e.encode(&x).unwrap();
        for i in 0..64 {
            let (pv, mv, cv) = (p.values()[i], m.values()[i], c.values()[i]);
            let fd1 = (pv - mv) / (2.0 * h);
            assert!((fd1 - d1.values()[i]).abs() < 1e-4 * (1.0 + fd1.abs()));
            let h2 = 1e-4;
            let fd2 = (e.encode(&(x + h2)).unwrap().values()[i] - 2.0 * cv
                + e.encode(&(x - h2)).unwrap().values()[i])
                / (h2 * h2);
            assert!((fd2 - d2.values()[i]).abs() < 1e-2 * (1.0 + fd2.abs()), "{fd2} {}", d2.values()[i]);
        }
        assert!(e.encode_derivative(x, 3).is_err());
    }
}
