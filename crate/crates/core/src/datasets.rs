//! Deterministic synthetic data sets.

use rand::Rng;
use rand_distr::{Distribution, Exp, Normal};

use crate::seeding;

/// Mixture of Gaussians truncated to `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mixture1d {
    /// `(weight, mean, standard deviation)` per component.
    components: Vec<(f64, f64, f64)>,
    mass: f64,
}

impl Mixture1d {
    pub fn new(components: Vec<(f64, f64, f64)>) -> Self {
        let mut m = Self { components, mass: 1.0 };
        // midpoint rule on a fine grid for the mass inside [0, 1]
        let n = 20_000;
        m.mass = (0..n).map(|k| m.untruncated((k as f64 + 0.5) / n as f64)).sum::<f64>() / n as f64;
        m
    }

    /// Two bumps of unequal weight and width.
    pub fn standard() -> Self {
        Self::new(vec![(0.4, 0.3, 0.12), (0.6, 0.7, 0.15)])
    }

    pub fn components(&self) -> &[(f64, f64, f64)] {
        &self.components
    }

    fn untruncated(&self, x: f64) -> f64 {
        self.components
            .iter()
            .map(|&(w, mu, sd)| w * (-(x - mu).powi(2) / (2.0 * sd * sd)).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt()))
            .sum()
    }

    /// Density on `[0, 1]`, zero outside.
    pub fn pdf(&self, x: f64) -> f64 {
        if (0.0..=1.0).contains(&x) {
            self.untruncated(x) / self.mass
        } else {
            0.0
        }
    }

    /// `m` draws by rejection of the out-of-range ones.
    pub fn sample(&self, m: usize, seed: u64) -> Vec<f64> {
        let mut rng = seeding::rng(seed, 6);
        let total: f64 = self.components.iter().map(|c| c.0).sum();
        let mut out = Vec::with_capacity(m);
        while out.len() < m {
            let mut u = rng.random::<f64>() * total;
            let &(_, mu, sd) = self
                .components
                .iter()
                .find(|c| {
                    u -= c.0;
                    u < 0.0
                })
                .unwrap_or(self.components.last().expect("mixture has components"));
            let x = Normal::new(mu, sd).expect("positive sd").sample(&mut rng);
            if (0.0..=1.0).contains(&x) {
                out.push(x);
            }
        }
        out
    }
}

/// Mixture of two axis-aligned Gaussians truncated to the unit square.
#[derive(Debug, Clone, PartialEq)]
pub struct Bivariate2Mode {
    /// `(weight, mean x, mean y, sd x, sd y)` per component.
    components: Vec<(f64, f64, f64, f64, f64)>,
    mass: f64,
}

fn gauss(x: f64, mu: f64, sd: f64) -> f64 {
    (-(x - mu).powi(2) / (2.0 * sd * sd)).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
}

impl Bivariate2Mode {
    pub fn new(components: Vec<(f64, f64, f64, f64, f64)>) -> Self {
        let mut m = Self { components, mass: 1.0 };
        let n = 400;
        let h = 1.0 / n as f64;
        let mut total = 0.0;
        for j in 0..n {
            for k in 0..n {
                total += m.untruncated((j as f64 + 0.5) * h, (k as f64 + 0.5) * h);
            }
        }
        m.mass = total * h * h;
        m
    }

    /// Two modes on the anti-diagonal with different spreads.
    pub fn standard() -> Self {
        Self::new(vec![(0.5, 0.3, 0.7, 0.12, 0.15), (0.5, 0.7, 0.3, 0.15, 0.12)])
    }

    pub fn components(&self) -> &[(f64, f64, f64, f64, f64)] {
        &self.components
    }

    fn untruncated(&self, x: f64, y: f64) -> f64 {
        self.components
            .iter()
            .map(|&(w, mx, my, sx, sy)| w * gauss(x, mx, sx) * gauss(y, my, sy))
            .sum()
    }

    /// Joint density on the unit square, zero outside.
    pub fn pdf(&self, x: f64, y: f64) -> f64 {
        if (0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y) {
            self.untruncated(x, y) / self.mass
        } else {
            0.0
        }
    }

    /// `m` draws by rejection of the out-of-square ones.
    pub fn sample(&self, m: usize, seed: u64) -> Vec<(f64, f64)> {
        let mut rng = seeding::rng(seed, 7);
        let total: f64 = self.components.iter().map(|c| c.0).sum();
        let mut out = Vec::with_capacity(m);
        while out.len() < m {
            let mut u = rng.random::<f64>() * total;
            let &(_, mx, my, sx, sy) = self
                .components
                .iter()
                .find(|c| {
                    u -= c.0;
                    u < 0.0
                })
                .unwrap_or(self.components.last().expect("mixture has components"));
            let x = Normal::new(mx, sx).expect("positive sd").sample(&mut rng);
            let y = Normal::new(my, sy).expect("positive sd").sample(&mut rng);
            if (0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y) {
                out.push((x, y));
            }
        }
        out
    }
}

/// Noisy copies of a random seed motif.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SequenceFamily {
    alphabet: Vec<char>,
    motif: Vec<char>,
    substitution_rate_permille: u32,
}

impl SequenceFamily {
    /// Random motif of `length` symbols; members substitute each position
    /// with probability `rate` by a uniformly drawn different symbol.
    pub fn new(alphabet: &str, length: usize, rate: f64, seed: u64) -> Self {
        let alphabet: Vec<char> = alphabet.chars().collect();
        assert!(alphabet.len() >= 2, "alphabet needs two symbols");
        assert!((0.0..=1.0).contains(&rate), "rate must lie in [0, 1]");
        let mut rng = seeding::rng(seed, 8);
        let motif = (0..length).map(|_| alphabet[rng.random_range(0..alphabet.len())]).collect();
        Self { alphabet, motif, substitution_rate_permille: (rate * 1000.0).round() as u32 }
    }

    pub fn motif(&self) -> String {
        self.motif.iter().collect()
    }

    pub fn rate(&self) -> f64 {
        f64::from(self.substitution_rate_permille) / 1000.0
    }

    /// `count` members drawn from stream `seed`.
    pub fn members(&self, count: usize, seed: u64) -> Vec<String> {
        let mut rng = seeding::rng(seed, 9);
        let rate = self.rate();
        let a = self.alphabet.len();
        (0..count)
            .map(|_| {
                self.motif
                    .iter()
                    .map(|&c| {
                        if rng.random::<f64>() < rate {
                            let pos = self.alphabet.iter().position(|&s| s == c).expect("motif symbol");
                            self.alphabet[(pos + rng.random_range(1..a)) % a]
                        } else {
                            c
                        }
                    })
                    .collect()
            })
            .collect()
    }
}

/// The two-family sequence benchmark: motifs of length 200 over the protein
/// alphabet with 10 % substitutions, `count` members each.
pub fn sequence_families(count: usize, seed: u64) -> (Vec<String>, Vec<String>) {
    let (a, b) = family_pair(seed);
    (a.members(count, seeding::combine(seed, 1)), b.members(count, seeding::combine(seed, 2)))
}

/// The generating families behind [`sequence_families`].
pub fn family_pair(seed: u64) -> (SequenceFamily, SequenceFamily) {
    let alphabet = crate::encoders::PROTEIN_ALPHABET;
    (
        SequenceFamily::new(alphabet, 200, 0.1, seeding::combine(seed, 11)),
        SequenceFamily::new(alphabet, 200, 0.1, seeding::combine(seed, 12)),
    )
}

/// Label noise around a regression curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Noise {
    /// Gaussian with standard deviation `base + slope · x`.
    Gaussian { base: f64, slope: f64 },
    /// Exponential with mean `scale`, added above the curve.
    Exponential { scale: f64 },
}

/// `y = 0.5 + amplitude · sin(2πx) + noise`, inputs uniform on `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisyCurve {
    pub amplitude: f64,
    pub noise: Noise,
}

impl NoisyCurve {
    /// Gaussian noise with `σ = 0.25 x`.
    pub fn heteroscedastic() -> Self {
        Self { amplitude: 0.3, noise: Noise::Gaussian { base: 0.0, slope: 0.25 } }
    }

    /// Gaussian noise with constant `σ`.
    pub fn homoscedastic(sigma: f64) -> Self {
        Self { amplitude: 0.3, noise: Noise::Gaussian { base: sigma, slope: 0.0 } }
    }

    /// Exponential noise with mean 0.25 on a gentle curve.
    pub fn exponential() -> Self {
        Self { amplitude: 0.1, noise: Noise::Exponential { scale: 0.25 } }
    }

    pub fn mean(&self, x: f64) -> f64 {
        0.5 + self.amplitude * (2.0 * std::f64::consts::PI * x).sin()
    }

    /// Density of `y` given `x`.
    pub fn conditional_pdf(&self, x: f64, y: f64) -> f64 {
        let r = y - self.mean(x);
        match self.noise {
            Noise::Gaussian { base, slope } => {
                let sd = base + slope * x;
                (-(r * r) / (2.0 * sd * sd)).exp() / (sd * (2.0 * std::f64::consts::PI).sqrt())
            }
            Noise::Exponential { scale } if r >= 0.0 => (-r / scale).exp() / scale,
            Noise::Exponential { .. } => 0.0,
        }
    }

    /// One label drawn at `x`.
    pub fn label<R: Rng + ?Sized>(&self, x: f64, rng: &mut R) -> f64 {
        let eps = match self.noise {
            Noise::Gaussian { base, slope } => {
                let sd = base + slope * x;
                if sd > 0.0 {
                    Normal::new(0.0, sd).expect("positive sd").sample(rng)
                } else {
                    0.0
                }
            }
            Noise::Exponential { scale } => Exp::new(1.0 / scale).expect("positive rate").sample(rng),
        };
        self.mean(x) + eps
    }

    /// `m` pairs with uniform inputs.
    pub fn sample(&self, m: usize, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = seeding::rng(seed, 12);
        let xs: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
        let ys = xs.iter().map(|&x| self.label(x, &mut rng)).collect();
        (xs, ys)
    }
}

/// `count` equidistant points on `[lo, hi]`, endpoints included.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count).map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64).collect(),
    }
}

/// Two clusters of `per_cluster` equidistant points, on `[0.05, 0.3]` at
/// label 0 and on `[0.7, 0.95]` at label 1, with nothing in between.
pub fn gap_clusters(per_cluster: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = linspace(0.05, 0.3, per_cluster);
    xs.extend(linspace(0.7, 0.95, per_cluster));
    let ys = (0..2 * per_cluster).map(|i| if i < per_cluster { 0.0 } else { 1.0 }).collect();
    (xs, ys)
}

/// Lower end of the positive interval of the classification benchmarks.
pub const POSITIVE_LO: f64 = 0.145651;
/// Upper end of the positive interval of the classification benchmarks.
pub const POSITIVE_HI: f64 = 0.3565;

fn interval_label(x: f64) -> f64 {
    if (POSITIVE_LO..=POSITIVE_HI).contains(&x) {
        1.0
    } else {
        -1.0
    }
}

/// D1: 100 equidistant points on `[0, 1]`, label +1 inside the positive
/// interval (21 points) and -1 elsewhere.
pub fn interval_d1() -> (Vec<f64>, Vec<f64>) {
    let xs = linspace(0.0, 1.0, 100);
    let ys = xs.iter().map(|&x| interval_label(x)).collect();
    (xs, ys)
}

/// D2: 50 equidistant points on the closed positive interval, 25 on
/// `[0, POSITIVE_LO)` starting at 0 and 25 on `(POSITIVE_HI, 1]` ending at 1.
pub fn interval_d2() -> (Vec<f64>, Vec<f64>) {
    let mut xs: Vec<f64> = (0..25).map(|k| POSITIVE_LO * k as f64 / 25.0).collect();
    xs.extend(linspace(POSITIVE_LO, POSITIVE_HI, 50));
    xs.extend((1..=25).map(|k| POSITIVE_HI + (1.0 - POSITIVE_HI) * k as f64 / 25.0));
    let ys = xs.iter().map(|&x| interval_label(x)).collect();
    (xs, ys)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn interval_benchmarks_have_the_stated_shape() {
        let (xs, ys) = interval_d1();
        assert_eq!(xs.len(), 100);
        assert_eq!(ys.iter().filter(|&&y| y > 0.0).count(), 21);
        let (xs, ys) = interval_d2();
        assert_eq!(xs.len(), 100);
        assert_eq!(ys.iter().filter(|&&y| y > 0.0).count(), 50);
        assert!(xs.windows(2).all(|w| w[1] > w[0]));
        assert_eq!((xs[0], xs[99]), (0.0, 1.0));
    }

    #[test]
    fn noisy_curves_follow_their_mean() {
        for curve in [NoisyCurve::heteroscedastic(), NoisyCurve::homoscedastic(0.1)] {
            let (xs, ys) = curve.sample(4000, 1);
            let resid = xs.iter().zip(&ys).map(|(&x, y)| y - curve.mean(x)).sum::<f64>() / 4000.0;
            assert!(resid.abs() < 0.01, "{resid}");
        }
        let curve = NoisyCurve::exponential();
        let (xs, ys) = curve.sample(4000, 2);
        let resid = xs.iter().zip(&ys).map(|(&x, y)| y - curve.mean(x)).sum::<f64>() / 4000.0;
        assert!((resid - 0.25).abs() < 0.02, "{resid}");
        // the conditional density integrates to one
        let grid = linspace(-1.0, 3.0, 4001);
        let mass: f64 = grid.iter().map(|&y| curve.conditional_pdf(0.5, y)).sum::<f64>() * 0.001;
        assert!((mass - 1.0).abs() < 1e-2);
    }
}
