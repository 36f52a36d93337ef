//! Binary classifiers on hypervector encodings.
//!
//! Labels are `+1` and `-1`. Every model is a single vector `V` and predicts
//! `sign⟨V, Δ(x)⟩`, with an exact zero going to `+1`. Since `n(x) > 0`, the
//! sign is the same whether `x` is encoded by `φ` or by `Δ`.
//!
//! * Class prototypes: sums of class encodings, signed per class, kept real,
//!   or signed after taking the difference.
//! * The perceptron-style update `M ← M − α(ŷ − y)φ(x)`, optionally with a
//!   confidence margin or the data-dependent rate `α|⟨M, φ(x)⟩|`.
//! * Empirical transforms: `F̂` of the labels, or the joint `P̂_XY` with the
//!   two labels encoded by i.i.d. random vectors.
//! * The closed form for a quadratic surrogate of the logistic loss: a scaled
//!   ridge fit, `M = a·ridge(λ′)` with `a = β/2γ` and `λ′ = λ/2γ`.

use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::distributions::condition_on_first;
use crate::empirical::{empirical_distribution, empirical_function, DensityPolicy, Sample};
use crate::encoders::{Encoder, SymbolEncoder};
use crate::error::{invalid, Error, Result};
use crate::hypervector::{aggregate, inner, sign_of, Hypervector};
use crate::normalization::{Embedding, Normalized, Product};
use crate::regression::{fit_ridge, DesignMatrix, LooShortcut};
use crate::seeding;
use crate::transform::{Role, TransformVec};

/// Symbol of the positive class in the label encoder.
pub const POSITIVE: &str = "+1";
/// Symbol of the negative class in the label encoder.
pub const NEGATIVE: &str = "-1";

/// `+1` for a non-negative score, `-1` otherwise.
pub fn label_of(score: f64) -> f64 {
    if score >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

/// Predicted label `sign⟨model, Δ(x)⟩`.
pub fn classify<M: Embedding + ?Sized>(model: &Hypervector, emb: &M, x: &M::Point) -> Result<f64> {
    Ok(label_of(inner(model, &emb.delta(x)?)?))
}

/// Predicted labels for every input.
pub fn classify_all<M: Embedding + ?Sized>(model: &Hypervector, emb: &M, xs: &[M::Point]) -> Result<Vec<f64>> {
    xs.iter().map(|x| classify(model, emb, x)).collect()
}

/// Fraction of predictions equal to the labels.
pub fn accuracy(predicted: &[f64], labels: &[f64]) -> f64 {
    if labels.is_empty() {
        return 0.0;
    }
    let hits = predicted.iter().zip(labels).filter(|(p, y)| p == y).count();
    hits as f64 / labels.len() as f64
}

fn binary_labels<P>(sample: &Sample<P>) -> Result<&[f64]> {
    let labels = match sample.labels() {
        Some(l) => l,
        None => return invalid("classification needs a labeled sample"),
    };
    if let Some(bad) = labels.iter().find(|&&y| y != 1.0 && y != -1.0) {
        return invalid(format!("class labels must be +1 or -1, found {bad}"));
    }
    Ok(labels)
}

fn both_classes(labels: &[f64]) -> Result<()> {
    if !labels.contains(&1.0) || !labels.contains(&-1.0) {
        return invalid("both classes must be present");
    }
    Ok(())
}

/// How the two class sums become one model vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PrototypeVariant {
    /// `[S₊] − [S₋]`: each class sum signed on its own.
    NormEach,
    /// `S₊ − S₋`, real valued.
    RawDiff,
    /// `[S₊ − S₋]`: the difference signed.
    NormDiff,
}

impl PrototypeVariant {
    pub const ALL: [PrototypeVariant; 3] = [Self::NormEach, Self::RawDiff, Self::NormDiff];
}

impl fmt::Display for PrototypeVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::NormEach => "norm-each",
            Self::RawDiff => "raw-diff",
            Self::NormDiff => "norm-diff",
        })
    }
}

impl FromStr for PrototypeVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "norm-each" => Ok(Self::NormEach),
            "raw-diff" => Ok(Self::RawDiff),
            "norm-diff" => Ok(Self::NormDiff),
            _ => Err(Error::Parse(format!("unknown prototype variant {s:?}"))),
        }
    }
}

/// Class sums `S₊ = Σ_{y=1} φ(x)` and `S₋ = Σ_{y=-1} φ(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypePair {
    plus: Hypervector,
    minus: Hypervector,
    variant: PrototypeVariant,
}

impl PrototypePair {
    pub fn plus(&self) -> &Hypervector {
        &self.plus
    }

    pub fn minus(&self) -> &Hypervector {
        &self.minus
    }

    pub fn variant(&self) -> PrototypeVariant {
        self.variant
    }

    /// The single vector the variant predicts with.
    pub fn model(&self) -> Hypervector {
        let diff = |a: &Hypervector, b: &Hypervector| a.sub(b).expect("class sums share dims");
        match self.variant {
            PrototypeVariant::NormEach => diff(&sign_of(&self.plus), &sign_of(&self.minus)),
            PrototypeVariant::RawDiff => diff(&self.plus, &self.minus),
            PrototypeVariant::NormDiff => sign_of(&diff(&self.plus, &self.minus)),
        }
    }
}

/// Superpose the raw encodings of each class.
pub fn fit_prototypes<E: Encoder + ?Sized>(
    encoder: &E,
    sample: &Sample<E::Point>,
    variant: PrototypeVariant,
) -> Result<PrototypePair> {
    let labels = binary_labels(sample)?;
    both_classes(labels)?;
    let codes = sample.inputs().iter().map(|x| encoder.encode(x)).collect::<Result<Vec<_>>>()?;
    let class = |c: f64| {
        let members: Vec<&Hypervector> = codes.iter().zip(labels).filter(|(_, &y)| y == c).map(|(v, _)| v).collect();
        aggregate(&members, false)
    };
    Ok(PrototypePair { plus: class(1.0)?, minus: class(-1.0)?, variant })
}

/// Where iterative training starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialModel {
    #[default]
    Zero,
    /// `Σ y_i Δ(x_i)`, the raw prototype difference on the training rows.
    ClassSums,
}

/// Settings of the perceptron-style update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IterativeTrainConfig {
    pub alpha: f64,
    pub passes: usize,
    pub seed: u64,
    /// Correct predictions with `|⟨M, Δ(x)⟩|` below this margin also update.
    pub confidence_margin: f64,
    /// Scale the rate by `|⟨M, Δ(x)⟩|`, a gradient step on the update loss.
    pub adaptive_rate: bool,
    pub init: InitialModel,
}

impl Default for IterativeTrainConfig {
    fn default() -> Self {
        Self { alpha: 0.01, passes: 20, seed: 0, confidence_margin: 0.0, adaptive_rate: false, init: InitialModel::Zero }
    }
}

impl IterativeTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return invalid(format!("learning rate must be positive, got {}", self.alpha));
        }
        if !(self.confidence_margin >= 0.0) || !self.confidence_margin.is_finite() {
            return invalid(format!("confidence margin must be non-negative, got {}", self.confidence_margin));
        }
        if self.adaptive_rate && self.init == InitialModel::Zero {
            return invalid("the data-dependent rate is zero at M = 0; start from the class sums");
        }
        Ok(())
    }
}

/// Result of iterative training.
#[derive(Debug, Clone, PartialEq)]
pub struct IterativeClassifier {
    model: TransformVec,
    pass_accuracy: Vec<f64>,
    pass_loss: Vec<f64>,
}

impl IterativeClassifier {
    pub fn model(&self) -> &TransformVec {
        &self.model
    }

    pub fn vector(&self) -> &Hypervector {
        self.model.vec()
    }

    /// Training accuracy after each pass.
    pub fn pass_accuracy(&self) -> &[f64] {
        &self.pass_accuracy
    }

    /// `½ Σ |ŷ_i − y_i| ⟨M, Δ(x_i)⟩²` after each pass.
    pub fn pass_loss(&self) -> &[f64] {
        &self.pass_loss
    }

    /// Whether the last pass classified every training point correctly.
    pub fn converged(&self) -> bool {
        self.pass_accuracy.last() == Some(&1.0)
    }
}

/// `½ Σ |ŷ_i − y_i| z_i²` with `z_i` the scores: zero when every sign is right.
pub fn update_loss(scores: &[f64], labels: &[f64]) -> f64 {
    scores.iter().zip(labels).map(|(&z, &y)| 0.5 * (label_of(z) - y).abs() * z * z).sum()
}

/// Pass-based training with per-pass shuffling.
///
/// Non-convergence is reported through [`IterativeClassifier::converged`],
/// not raised.
pub fn fit_iterative_classifier<M: Embedding + ?Sized>(
    emb: &M,
    sample: &Sample<M::Point>,
    cfg: &IterativeTrainConfig,
) -> Result<IterativeClassifier> {
    cfg.validate()?;
    let labels = binary_labels(sample)?;
    let rows = sample.inputs().iter().map(|x| emb.delta(x)).collect::<Result<Vec<_>>>()?;
    let mut model = Hypervector::zeros(emb.dims());
    if cfg.init == InitialModel::ClassSums {
        for (row, &y) in rows.iter().zip(labels) {
            model.axpy(y, row)?;
        }
    }
    let mut rng = seeding::rng(cfg.seed, 15);
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let mut pass_accuracy = Vec::with_capacity(cfg.passes);
    let mut pass_loss = Vec::with_capacity(cfg.passes);
    for _ in 0..cfg.passes {
        order.shuffle(&mut rng);
        for &i in &order {
            let (row, y) = (&rows[i], labels[i]);
            let z = inner(&model, row)?;
            let predicted = label_of(z);
            let rate = if cfg.adaptive_rate { cfg.alpha * z.abs() } else { cfg.alpha };
            if predicted != y {
                model.axpy(-rate * (predicted - y), row)?;
            } else if z.abs() < cfg.confidence_margin {
                model.axpy(rate * y, row)?;
            }
        }
        let scores = rows.iter().map(|r| inner(&model, r)).collect::<Result<Vec<_>>>()?;
        let predicted: Vec<f64> = scores.iter().map(|&z| label_of(z)).collect();
        pass_accuracy.push(accuracy(&predicted, labels));
        pass_loss.push(update_loss(&scores, labels));
    }
    Ok(IterativeClassifier { model: TransformVec::new(model, Role::Function, emb.id()), pass_accuracy, pass_loss })
}

/// Which empirical transform a classifier is read from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmpiricalMode {
    /// `F̂ = (1/m) Σ y_i / p̂(x_i) Δ(x_i)`.
    Function,
    /// `P̂_XY = (1/m) Σ Δφ(x_i) ⊗ ψ(y_i)`.
    Generative,
}

/// `F̂` of the labels; classify with [`classify`] on its vector.
pub fn fit_function_classifier<M: Embedding + ?Sized>(
    emb: &M,
    sample: &Sample<M::Point>,
    policy: &DensityPolicy,
) -> Result<TransformVec> {
    binary_labels(sample)?;
    empirical_function(emb, sample, policy)
}

/// Label embedding for the generative classifier: i.i.d. random vectors for
/// `+1` and `-1`. Neither label has neighbours, so the normalization is 1.
pub fn label_embedding(dims: usize, seed: u64) -> Result<Normalized<SymbolEncoder>> {
    Ok(Normalized::pass_through(SymbolEncoder::new(&[POSITIVE, NEGATIVE], dims, seed)?))
}

fn label_symbol(y: f64) -> String {
    if y > 0.0 { POSITIVE } else { NEGATIVE }.to_string()
}

/// `P̂_XY` over inputs and label symbols.
pub fn fit_generative_classifier<A, B>(product: &Product<A, B>, sample: &Sample<A::Point>) -> Result<TransformVec>
where
    A: Embedding,
    B: Embedding<Point = String>,
{
    let labels = binary_labels(sample)?;
    let pairs = sample.inputs().iter().zip(labels).map(|(x, &y)| (x.clone(), label_symbol(y))).collect();
    empirical_distribution(product, &Sample::new(pairs)?)
}

/// `⟨P̂_XY ⊗ Δφ(x), ψ(+1)⟩ − ⟨P̂_XY ⊗ Δφ(x), ψ(−1)⟩`.
pub fn generative_score<A, B>(product: &Product<A, B>, joint: &TransformVec, x: &A::Point) -> Result<f64>
where
    A: Embedding,
    B: Embedding<Point = String>,
{
    let conditional = condition_on_first(product, joint, x)?;
    let plus = inner(conditional.vec(), &product.second().delta(&POSITIVE.to_string())?)?;
    let minus = inner(conditional.vec(), &product.second().delta(&NEGATIVE.to_string())?)?;
    Ok(plus - minus)
}

/// Predicted label of the generative classifier.
pub fn classify_generative<A, B>(product: &Product<A, B>, joint: &TransformVec, x: &A::Point) -> Result<f64>
where
    A: Embedding,
    B: Embedding<Point = String>,
{
    Ok(label_of(generative_score(product, joint, x)?))
}

/// Bipolar approximation `[T]` of a transform.
pub fn bipolar(t: &TransformVec) -> TransformVec {
    TransformVec::new(sign_of(t.vec()), t.role(), t.encoder_id())
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

/// Logistic loss `log(1 + e^{−y z})` of logit `z` for label `y`.
pub fn logistic_loss(logit: f64, label: f64) -> f64 {
    softplus(-label * logit)
}

/// `1 / (1 + e^{−z})`.
pub fn sigmoid(logit: f64) -> f64 {
    if logit >= 0.0 {
        1.0 / (1.0 + (-logit).exp())
    } else {
        let e = logit.exp();
        e / (1.0 + e)
    }
}

/// Quadratic surrogate of the logistic loss and its regularization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogisticQuadConfig {
    beta: f64,
    gamma: f64,
    lambda: f64,
}

impl Default for LogisticQuadConfig {
    /// `β = 3`, `γ = 0.08` and `λ′ = 1e4`.
    fn default() -> Self {
        Self::from_lambda_prime(3.0, 0.08, 1e4).expect("valid defaults")
    }
}

impl LogisticQuadConfig {
    pub fn new(beta: f64, gamma: f64, lambda: f64) -> Result<Self> {
        for (name, v) in [("beta", beta), ("gamma", gamma), ("lambda", lambda)] {
            if !(v > 0.0) || !v.is_finite() {
                return invalid(format!("{name} must be positive and finite, got {v}"));
            }
        }
        Ok(Self { beta, gamma, lambda })
    }

    /// Configuration with the effective ridge parameter `λ′ = λ/2γ` given.
    pub fn from_lambda_prime(beta: f64, gamma: f64, lambda_prime: f64) -> Result<Self> {
        Self::new(beta, gamma, 2.0 * gamma * lambda_prime)
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `a = β / 2γ`, the factor on the ridge solution.
    pub fn a(&self) -> f64 {
        self.beta / (2.0 * self.gamma)
    }

    /// `λ′ = λ / 2γ`, the ridge parameter actually solved with.
    pub fn lambda_prime(&self) -> f64 {
        self.lambda / (2.0 * self.gamma)
    }

    /// Parabola `γ (z − β y)² + log(1 + e^{−β})` with its minimum at logit
    /// `β y`, touching the logistic loss there.
    pub fn surrogate_loss(&self, logit: f64, label: f64) -> f64 {
        self.gamma * (logit - self.beta * label).powi(2) + softplus(-self.beta)
    }

    /// Largest `|surrogate − logistic|` over `count` evenly spaced logits in
    /// `[lo, hi]` for both labels.
    pub fn max_loss_gap(&self, lo: f64, hi: f64, count: usize) -> f64 {
        let step = (hi - lo) / (count.max(2) - 1) as f64;
        (0..count.max(2))
            .flat_map(|k| {
                let z = lo + step * k as f64;
                [1.0, -1.0].map(|y| (self.surrogate_loss(z, y) - logistic_loss(z, y)).abs())
            })
            .fold(0.0, f64::max)
    }
}

/// Closed-form classifier `M = a·ridge(λ′)` with probabilities `σ⟨M, Δ(x)⟩`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClosedFormClassifier {
    model: TransformVec,
    config: LogisticQuadConfig,
}

impl ClosedFormClassifier {
    pub fn model(&self) -> &TransformVec {
        &self.model
    }

    pub fn vector(&self) -> &Hypervector {
        self.model.vec()
    }

    pub fn config(&self) -> &LogisticQuadConfig {
        &self.config
    }

    pub fn logit<M: Embedding + ?Sized>(&self, emb: &M, x: &M::Point) -> Result<f64> {
        self.model.check_embedding(emb)?;
        inner(self.model.vec(), &emb.delta(x)?)
    }

    pub fn probability<M: Embedding + ?Sized>(&self, emb: &M, x: &M::Point) -> Result<f64> {
        Ok(sigmoid(self.logit(emb, x)?))
    }

    pub fn classify<M: Embedding + ?Sized>(&self, emb: &M, x: &M::Point) -> Result<f64> {
        Ok(label_of(self.logit(emb, x)?))
    }

    /// Relative gradient norm of `Σ (γ z_i² − β y_i z_i) + (λ/2)‖β_M‖²` with
    /// `β_M = M/D` and `z_i = ⟨M, Δ(x_i)⟩`, against `β ‖Xᵀ Y‖`.
    pub fn stationarity(&self, design: &DesignMatrix) -> Result<f64> {
        let dims = self.model.dims() as f64;
        let (beta, gamma) = (self.config.beta, self.config.gamma);
        let mut grad = self.model.vec().scale(self.config.lambda / dims);
        let mut pull = Hypervector::zeros(self.model.dims());
        for (row, &y) in design.rows().iter().zip(design.labels()) {
            let z = inner(self.model.vec(), row)?;
            grad.axpy(2.0 * gamma * z - beta * y, row)?;
            pull.axpy(beta * y, row)?;
        }
        let norm = |v: &Hypervector| v.values().iter().map(|a| a * a).sum::<f64>().sqrt();
        Ok(norm(&grad) / norm(&pull))
    }
}

/// Minimizer of the quadratic surrogate with L2 penalty.
pub fn fit_closed_form_classifier(design: &DesignMatrix, cfg: &LogisticQuadConfig) -> Result<ClosedFormClassifier> {
    if let Some(bad) = design.labels().iter().find(|&&y| y != 1.0 && y != -1.0) {
        return invalid(format!("class labels must be +1 or -1, found {bad}"));
    }
    let ridge = fit_ridge(design, cfg.lambda_prime())?;
    Ok(ClosedFormClassifier { model: ridge.transform().scale(cfg.a()), config: *cfg })
}

/// Outcome of leave-one-out tuning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TunedClassifier {
    pub config: LogisticQuadConfig,
    /// Mean leave-one-out logistic loss of `config`.
    pub loss: f64,
}

/// Mean logistic loss of leave-one-out logits.
pub fn loo_logistic_loss(shortcut: &LooShortcut, labels: &[f64], cfg: &LogisticQuadConfig) -> Result<f64> {
    let pred = shortcut.predictions_for(cfg.lambda_prime(), labels)?;
    let a = cfg.a();
    Ok(pred.iter().zip(labels).map(|(p, &y)| logistic_loss(a * p, y)).sum::<f64>() / labels.len() as f64)
}

/// Grid search over `β × γ × λ` by leave-one-out logistic loss.
///
/// One eigendecomposition of `XXᵀ` serves the whole grid. Ties keep the
/// first configuration in `β`, `γ`, `λ` order.
pub fn loo_tune_classifier(design: &DesignMatrix, betas: &[f64], gammas: &[f64], lambdas: &[f64]) -> Result<TunedClassifier> {
    if betas.is_empty() || gammas.is_empty() || lambdas.is_empty() {
        return invalid("tuning grids must be nonempty");
    }
    let shortcut = LooShortcut::new(design);
    let mut best: Option<TunedClassifier> = None;
    for &beta in betas {
        for &gamma in gammas {
            for &lambda in lambdas {
                let config = LogisticQuadConfig::new(beta, gamma, lambda)?;
                let loss = loo_logistic_loss(&shortcut, design.labels(), &config)?;
                if best.is_none_or(|b| loss < b.loss) {
                    best = Some(TunedClassifier { config, loss });
                }
            }
        }
    }
    Ok(best.expect("grids are nonempty"))
}
