//! Metropolis–Hastings sampling from a transform.
//!
//! The target density is `⟨P, Δ(x)⟩`. Proposals are symmetric, so the
//! acceptance ratio is the density ratio. States where the estimate is zero
//! or negative, or below an optional floor, are never entered.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::encoders::{IntervalEncoder, Value};
use crate::error::{invalid, Error, Result};
use crate::hypervector::inner;
use crate::normalization::Embedding;
use crate::seeding;
use crate::transform::{Role, TransformVec};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MHConfig {
    /// Total number of transitions, burn-in included.
    pub chain_length: usize,
    pub burn_in: usize,
    /// Keep every `thinning`-th state after burn-in.
    pub thinning: usize,
    pub seed: u64,
    /// Draws from the proposal's initial distribution before giving up.
    pub init_tries: usize,
    /// States whose density estimate is at or below this value are never
    /// entered. Zero rejects only non-positive estimates. On large discrete
    /// domains a floor at the estimator's noise level keeps the chain from
    /// drifting into the far field, where the estimate is pure noise.
    pub density_floor: f64,
}

impl Default for MHConfig {
    fn default() -> Self {
        Self { chain_length: 11_000, burn_in: 1_000, thinning: 1, seed: 0, init_tries: 100, density_floor: 0.0 }
    }
}

impl MHConfig {
    /// Enough transitions for `count` kept states.
    pub fn for_samples(count: usize, burn_in: usize, thinning: usize, seed: u64) -> Self {
        Self { chain_length: burn_in + count * thinning, burn_in, thinning, seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.chain_length <= self.burn_in {
            return invalid(format!("chain length {} must exceed burn-in {}", self.chain_length, self.burn_in));
        }
        if self.thinning == 0 {
            return invalid("thinning must be at least 1");
        }
        if self.init_tries == 0 {
            return invalid("at least one initialization try is needed");
        }
        if !(self.density_floor >= 0.0 && self.density_floor.is_finite()) {
            return invalid("density floor must be finite and non-negative");
        }
        Ok(())
    }

    /// Number of states [`mh_sample`] returns.
    pub fn kept(&self) -> usize {
        (self.chain_length - self.burn_in).div_ceil(self.thinning)
    }
}

/// A symmetric proposal kernel on a domain.
pub trait Proposal<P> {
    /// A candidate starting state.
    fn initial(&self, rng: &mut ChaCha8Rng) -> P;

    /// A move from `current`, or `None` when the move leaves the domain.
    fn propose(&self, current: &P, rng: &mut ChaCha8Rng) -> Option<P>;
}

/// Gaussian random walk on an interval; moves outside are rejected.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianStep {
    step: Normal<f64>,
    lo: f64,
    hi: f64,
}

impl GaussianStep {
    pub fn new(sigma: f64, lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return invalid(format!("empty interval [{lo}, {hi}]"));
        }
        let step = Normal::new(0.0, sigma).map_err(|_| Error::InvalidInput(format!("step size {sigma}")))?;
        if !(sigma > 0.0) {
            return invalid("step size must be positive");
        }
        Ok(Self { step, lo, hi })
    }

    /// Step size equal to the encoder's length scale.
    pub fn for_encoder(enc: &IntervalEncoder) -> Self {
        Self::new(enc.length_scale(), enc.lo(), enc.hi()).expect("encoder parameters are valid")
    }
}

impl Proposal<f64> for GaussianStep {
    fn initial(&self, rng: &mut ChaCha8Rng) -> f64 {
        self.lo + (self.hi - self.lo) * rng.random::<f64>()
    }

    fn propose(&self, current: &f64, rng: &mut ChaCha8Rng) -> Option<f64> {
        let next = current + self.step.sample(rng);
        (self.lo..=self.hi).contains(&next).then_some(next)
    }
}

impl Proposal<Value> for GaussianStep {
    fn initial(&self, rng: &mut ChaCha8Rng) -> Value {
        Value::Real(Proposal::<f64>::initial(self, rng))
    }

    fn propose(&self, current: &Value, rng: &mut ChaCha8Rng) -> Option<Value> {
        match current {
            Value::Real(x) => Proposal::<f64>::propose(self, x, rng).map(Value::Real),
            _ => None,
        }
    }
}

/// Replace one uniformly chosen position by a different uniformly chosen
/// symbol. Chains start from one of the given sequences.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Substitution {
    alphabet: Vec<char>,
    starts: Vec<String>,
}

impl Substitution {
    pub fn new(alphabet: &str, starts: Vec<String>) -> Result<Self> {
        let alphabet: Vec<char> = alphabet.chars().collect();
        if alphabet.len() < 2 {
            return invalid("substitution needs at least two symbols");
        }
        if starts.is_empty() || starts.iter().any(String::is_empty) {
            return invalid("substitution needs non-empty starting sequences");
        }
        Ok(Self { alphabet, starts })
    }
}

impl Proposal<String> for Substitution {
    fn initial(&self, rng: &mut ChaCha8Rng) -> String {
        self.starts[rng.random_range(0..self.starts.len())].clone()
    }

    fn propose(&self, current: &String, rng: &mut ChaCha8Rng) -> Option<String> {
        let mut chars: Vec<char> = current.chars().collect();
        if chars.is_empty() {
            return None;
        }
        let pos = rng.random_range(0..chars.len());
        let a = self.alphabet.len();
        let old = self.alphabet.iter().position(|&c| c == chars[pos]);
        chars[pos] = match old {
            Some(k) => self.alphabet[(k + rng.random_range(1..a)) % a],
            None => self.alphabet[rng.random_range(0..a)],
        };
        Some(chars.into_iter().collect())
    }
}

impl Proposal<Value> for Substitution {
    fn initial(&self, rng: &mut ChaCha8Rng) -> Value {
        Value::Text(Proposal::<String>::initial(self, rng))
    }

    fn propose(&self, current: &Value, rng: &mut ChaCha8Rng) -> Option<Value> {
        match current {
            Value::Text(s) => Proposal::<String>::propose(self, s, rng).map(Value::Text),
            _ => None,
        }
    }
}

/// Run one Metropolis chain targeting `⟨P, Δ(x)⟩` and return the kept states.
pub fn mh_sample<M, Q>(emb: &M, p: &TransformVec, proposal: &Q, cfg: &MHConfig) -> Result<Vec<M::Point>>
where
    M: Embedding + ?Sized,
    Q: Proposal<M::Point> + ?Sized,
{
    cfg.validate()?;
    p.check_embedding(emb)?;
    if p.role() != Role::Distribution {
        return invalid("sampling needs the transform of a distribution");
    }
    let density = |x: &M::Point| -> Result<f64> { inner(p.vec(), &emb.delta(x)?) };
    let mut rng = seeding::rng(cfg.seed, 10);

    let mut start = None;
    for _ in 0..cfg.init_tries {
        let x = proposal.initial(&mut rng);
        let d = density(&x)?;
        if d > cfg.density_floor {
            start = Some((x, d));
            break;
        }
    }
    let (mut current, mut current_density) = start.ok_or(Error::Initialization { tries: cfg.init_tries })?;

    let mut kept = Vec::with_capacity(cfg.kept());
    for step in 0..cfg.chain_length {
        if let Some(candidate) = proposal.propose(&current, &mut rng) {
            let d = density(&candidate)?;
            if d > cfg.density_floor {
                let ratio = d / current_density;
                if ratio >= 1.0 || rng.random::<f64>() < ratio {
                    current = candidate;
                    current_density = d;
                }
            }
        }
        if step >= cfg.burn_in && (step - cfg.burn_in).is_multiple_of(cfg.thinning) {
            kept.push(current.clone());
        }
    }
    Ok(kept)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{Mixture1d, SequenceFamily};
    use crate::empirical::{density_eval, empirical_distribution, DensityPolicy, Sample};
    use crate::encoders::{Encoder, SequenceEncoder, PROTEIN_ALPHABET};
    use crate::normalization::{Embedding, Normalized, OffGrid, QuadratureGrid, SolverConfig};
    use crate::transform::forward_distribution;

    fn line(dims: usize, seed: u64) -> (Normalized<IntervalEncoder>, GaussianStep) {
        let enc = IntervalEncoder::bipolar(0.0, 1.0, 0.1, dims, seed).unwrap();
        let step = GaussianStep::for_encoder(&enc);
        let grid = QuadratureGrid::midpoint(0.0, 1.0, 200).unwrap();
        (Normalized::solve(enc, &grid, &SolverConfig::default()).unwrap(), step)
    }

    fn grid_transform(emb: &Normalized<IntervalEncoder>, pdf: impl Fn(f64) -> f64) -> TransformVec {
        let grid = QuadratureGrid::midpoint(0.0, 1.0, 200).unwrap();
        let m: Vec<f64> = grid.points().iter().map(|&x| pdf(x)).collect();
        let t: f64 = m.iter().sum();
        forward_distribution(emb, &grid, &m.iter().map(|v| v / t).collect::<Vec<_>>()).unwrap()
    }

    #[test]
    fn uniform_target_has_mean_one_half() {
        // The unit transform evaluates to exactly 1 everywhere under the
        // Nyström extension, so the target is flat at any dimension.
        let (emb, step) = line(1_000, 0);
        let p = grid_transform(&emb, |_| 1.0);
        let cfg = MHConfig::for_samples(10_000, 1_000, 50, 4);
        let draws = mh_sample(&emb, &p, &step, &cfg).unwrap();
        assert_eq!(draws.len(), 10_000);
        let mean = draws.iter().sum::<f64>() / draws.len() as f64;
        assert!((mean - 0.5).abs() <= 0.02, "{mean}");
    }

    /// Total variation between a 20-bin histogram of `draws` and the clipped
    /// inverse-transform density integrated over the same bins.
    fn histogram_tv(emb: &Normalized<IntervalEncoder>, p: &TransformVec, draws: &[f64]) -> f64 {
        let mut hist = [0.0; 20];
        for x in draws {
            hist[((x * 20.0) as usize).min(19)] += 1.0 / draws.len() as f64;
        }
        let policy = DensityPolicy::new(true, 1e-12).unwrap();
        let mut mass = [0.0; 20];
        for (b, m) in mass.iter_mut().enumerate() {
            for k in 0..10 {
                let x = (b as f64 + (k as f64 + 0.5) / 10.0) / 20.0;
                *m += density_eval(emb, p, &x, &policy).unwrap();
            }
        }
        let total: f64 = mass.iter().sum();
        0.5 * hist.iter().zip(&mass).map(|(h, m)| (h - m / total).abs()).sum::<f64>()
    }

    #[test]
    fn two_bump_histogram_matches_the_density() {
        let (emb, step) = line(20_000, 1);
        let mix = Mixture1d::standard();
        let p = grid_transform(&emb, |x| mix.pdf(x));
        let draws = mh_sample(&emb, &p, &step, &MHConfig::for_samples(10_000, 1_000, 1, 2)).unwrap();
        let tv = histogram_tv(&emb, &p, &draws);
        assert!(tv <= 0.1, "{tv}");
    }

    #[test]
    fn sequence_chain_stays_with_its_family() {
        let (closer, total, moved) = sequence_chain(true);
        assert!(closer as f64 >= 0.8 * total as f64, "{closer} of {total}");
        assert!(moved);
    }

    #[test]
    #[ignore = "without a density floor the chain drifts into the far field; see notes"]
    fn sequence_chain_stays_with_its_family_without_floor() {
        let (closer, total, _) = sequence_chain(false);
        assert!(closer as f64 >= 0.8 * total as f64, "{closer} of {total}");
    }

    /// Runs a chain on a one-family target; returns how many kept states are
    /// closer to that family's mean encoding, how many were kept, and whether
    /// the chain left the family's own members.
    fn sequence_chain(with_floor: bool) -> (usize, usize, bool) {
        let fam = SequenceFamily::new(PROTEIN_ALPHABET, 60, 0.1, 1);
        let control = SequenceFamily::new(PROTEIN_ALPHABET, 60, 0.1, 2);
        let (a, b) = (fam.members(60, 3), control.members(60, 4));
        let enc = SequenceEncoder::trimer(PROTEIN_ALPHABET, 10_000, 7).unwrap();
        let mut pool = a.clone();
        pool.extend(b.iter().cloned());
        let grid = QuadratureGrid::counting(pool).unwrap();
        let cfg = SolverConfig { off_grid: OffGrid::Mean, ..SolverConfig::for_sequences() };
        let emb = Normalized::solve(enc.clone(), &grid, &cfg).unwrap();
        let p = empirical_distribution(&emb, &Sample::new(a.clone()).unwrap()).unwrap();

        // Noise level of the estimate: its 99th percentile on uniformly random
        // sequences, which share no structure with either family.
        let mut rng = seeding::rng(11, 0);
        let letters: Vec<char> = PROTEIN_ALPHABET.chars().collect();
        let mut far: Vec<f64> = (0..200)
            .map(|_| {
                let s: String = (0..60).map(|_| letters[rng.random_range(0..20)]).collect();
                inner(p.vec(), &emb.delta(&s).unwrap()).unwrap()
            })
            .collect();
        far.sort_by(f64::total_cmp);
        let floor = far[198];

        let proposal = Substitution::new(PROTEIN_ALPHABET, a[..5].to_vec()).unwrap();
        let floor = if with_floor { floor } else { 0.0 };
        let cfg = MHConfig { density_floor: floor, ..MHConfig::for_samples(200, 300, 10, 5) };
        let draws = mh_sample(&emb, &p, &proposal, &cfg).unwrap();

        // nearest prototype by the raw kernel
        let mean = |set: &[String]| {
            let mut acc = crate::hypervector::Hypervector::zeros(enc.dims());
            for s in set {
                acc.axpy(1.0 / set.len() as f64, &enc.encode(s).unwrap()).unwrap();
            }
            acc
        };
        let (ma, mb) = (mean(&a), mean(&b));
        let closer = draws
            .iter()
            .filter(|s| {
                let v = enc.encode(s).unwrap();
                inner(&v, &ma).unwrap() > inner(&v, &mb).unwrap()
            })
            .count();
        (closer, draws.len(), draws.iter().any(|s| !a.contains(s)))
    }

    #[test]
    fn negative_targets_fail_to_initialize() {
        let (emb, step) = line(1_000, 2);
        let p = grid_transform(&emb, |_| 1.0);
        let flipped = TransformVec::new(p.vec().scale(-1.0), Role::Distribution, p.encoder_id());
        let cfg = MHConfig { init_tries: 7, ..MHConfig::default() };
        assert!(matches!(mh_sample(&emb, &flipped, &step, &cfg), Err(Error::Initialization { tries: 7 })));
    }

    #[test]
    fn chains_are_reproducible_and_validated() {
        let (emb, step) = line(1_000, 3);
        let mix = Mixture1d::standard();
        let p = grid_transform(&emb, |x| mix.pdf(x));
        let cfg = MHConfig::for_samples(500, 100, 3, 9);
        let a = mh_sample(&emb, &p, &step, &cfg).unwrap();
        let b = mh_sample(&emb, &p, &step, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), cfg.kept());
        let c = mh_sample(&emb, &p, &step, &MHConfig { seed: 10, ..cfg }).unwrap();
        assert_ne!(a, c);
        assert!(mh_sample(&emb, &p, &step, &MHConfig { burn_in: 600, chain_length: 600, ..cfg }).is_err());
        assert!(mh_sample(&emb, &p, &step, &MHConfig { thinning: 0, ..cfg }).is_err());
        let f = TransformVec::new(p.vec().clone(), Role::Function, p.encoder_id());
        assert!(mh_sample(&emb, &f, &step, &cfg).is_err());
    }

    #[test]
    fn proposals_stay_in_their_domains() {
        let step = GaussianStep::new(0.5, 0.0, 1.0).unwrap();
        let mut rng = seeding::rng(0, 0);
        for _ in 0..1_000 {
            if let Some(x) = Proposal::<f64>::propose(&step, &0.9, &mut rng) {
                assert!((0.0..=1.0).contains(&x));
            }
        }
        let sub = Substitution::new("AB", vec!["AAAA".into()]).unwrap();
        for _ in 0..100 {
            let next = Proposal::<String>::propose(&sub, &"AAAA".to_string(), &mut rng).unwrap();
            assert_eq!(next.chars().filter(|&c| c == 'B').count(), 1);
        }
        assert!(GaussianStep::new(0.0, 0.0, 1.0).is_err());
        assert!(Substitution::new("A", vec!["A".into()]).is_err());
    }
}
