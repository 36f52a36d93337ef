//! Regression heads on normalized encodings.
//!
//! Two estimators come straight from samples: the empirical function
//! transform (discriminative) and the empirical joint transform of inputs and
//! labels (generative, read out as a conditional density on a label grid).
//! The others minimize squared error: an iterative update baseline and the
//! ridge closed form, optionally with differential-equation rows appended.
//!
//! # Scaling
//!
//! Predictions are `ŷ(x) = ⟨M, Δ(x)⟩ = (1/D) Σ_k M_k Δ_k(x)`. Writing
//! `β = M / D` turns this into the plain dot product `ŷ = X β`, with `X` the
//! `m × D` matrix of raw encodings. The regularizer `(λ/D)⟨M, M⟩` with the
//! rescaled inner product equals `(λ/D)(1/D) D² ‖β‖² = λ ‖β‖²`, so minimizing
//! `Σ (y_i − ⟨M, Δ(x_i)⟩)² + (λ/D)⟨M, M⟩` over `M` is ordinary ridge
//! regression in `β`:
//!
//! `β = (XᵀX + λI)⁻¹ XᵀY = Xᵀ(XXᵀ + λI)⁻¹ Y` and `M = D β`.
//!
//! The solvers work on `β` with the unscaled norm and multiply by `D` at the
//! end; stationarity is checked on the same `β`-space gradient.

use std::cmp::Ordering;
use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::distributions::condition_on_first;
use crate::empirical::{empirical_distribution, empirical_function, DensityPolicy, Sample};
use crate::error::{invalid, Error, Result};
use crate::hypervector::{inner, Hypervector};
use crate::normalization::{DerivativeMethod, Embedding, GridPoint, Normalized, Product, RealLine};
use crate::seeding;
use crate::transform::{Role, TransformVec};

/// Rows at or above this leverage make the leave-one-out shortcut undefined.
pub const LEVERAGE_LIMIT: f64 = 1.0 - 1e-12;

/// Relative eigenvalue below which an unregularized system counts as singular.
const RANK_TOL: f64 = 1e-12;

/// Number of points in the default label grid.
pub const LABEL_GRID_POINTS: usize = 201;

/// Number of collocation points used by [`PhysicsSpec::constant`].
pub const DEFAULT_COLLOCATION: usize = 100;

/// `m` encodings as rows, with one real label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignMatrix {
    rows: Vec<Hypervector>,
    labels: Vec<f64>,
    encoder_id: u64,
}

impl DesignMatrix {
    /// Rows built by the embedding identified by `encoder_id`.
    pub fn new(rows: Vec<Hypervector>, labels: Vec<f64>, encoder_id: u64) -> Result<Self> {
        if rows.is_empty() {
            return invalid("design matrix needs at least one row");
        }
        if rows.len() != labels.len() {
            return invalid(format!("{} rows but {} labels", rows.len(), labels.len()));
        }
        let d = rows[0].dims();
        if let Some(r) = rows.iter().find(|r| r.dims() != d) {
            return Err(Error::DimensionMismatch(d, r.dims()));
        }
        if let Some(y) = labels.iter().find(|y| !y.is_finite()) {
            return invalid(format!("label {y} is not finite"));
        }
        Ok(Self { rows, labels, encoder_id })
    }

    /// Rows `Δ(x_i)` for a labeled sample.
    pub fn from_sample<M: Embedding + ?Sized>(emb: &M, sample: &Sample<M::Point>) -> Result<Self> {
        let labels = sample
            .labels()
            .ok_or_else(|| Error::InvalidInput("design matrix needs labels".into()))?;
        let rows = sample.inputs().iter().map(|x| emb.delta(x)).collect::<Result<Vec<_>>>()?;
        Self::new(rows, labels.to_vec(), emb.id())
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.rows[0].dims()
    }

    pub fn rows(&self) -> &[Hypervector] {
        &self.rows
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn encoder_id(&self) -> u64 {
        self.encoder_id
    }

    /// The same rows with new labels.
    pub fn relabel(&self, labels: Vec<f64>) -> Result<Self> {
        Self::new(self.rows.clone(), labels, self.encoder_id)
    }

    /// This design with `other`'s rows appended.
    pub fn stack(&self, other: &DesignMatrix) -> Result<Self> {
        if other.encoder_id != self.encoder_id {
            return Err(Error::EncoderMismatch { expected: self.encoder_id, found: other.encoder_id });
        }
        let mut rows = self.rows.clone();
        rows.extend(other.rows.iter().cloned());
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        Self::new(rows, labels, self.encoder_id)
    }

    /// The design with row `index` removed.
    pub fn without(&self, index: usize) -> Result<Self> {
        if index >= self.len() {
            return invalid(format!("row {index} out of range for {} rows", self.len()));
        }
        let keep = |v: &[Hypervector]| v.iter().enumerate().filter(|(i, _)| *i != index).map(|(_, r)| r.clone()).collect();
        let labels = self.labels.iter().enumerate().filter(|(i, _)| *i != index).map(|(_, y)| *y).collect();
        Self::new(keep(&self.rows), labels, self.encoder_id)
    }

    /// `X` as an `m × D` matrix with rows in the given order.
    fn matrix_in(&self, order: &[usize]) -> DMatrix<f64> {
        let d = self.dims();
        DMatrix::from_fn(order.len(), d, |i, k| self.rows[order[i]].values()[k])
    }

    fn labels_in(&self, order: &[usize]) -> DVector<f64> {
        DVector::from_iterator(order.len(), order.iter().map(|&i| self.labels[i]))
    }

    /// Row order sorted by label, then lexicographically by row values, so
    /// solves do not depend on the order rows were supplied in.
    fn canonical_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.sort_by(|&i, &j| {
            self.labels[i].total_cmp(&self.labels[j]).then_with(|| {
                self.rows[i]
                    .values()
                    .iter()
                    .zip(self.rows[j].values())
                    .map(|(a, b)| a.total_cmp(b))
                    .find(|o| o.is_ne())
                    .unwrap_or(Ordering::Equal)
            })
        });
        order
    }

    /// The kernel matrix `XXᵀ` in the original row order.
    pub fn kernel(&self) -> DMatrix<f64> {
        let order: Vec<usize> = (0..self.len()).collect();
        let x = self.matrix_in(&order);
        &x * x.transpose()
    }
}

/// Which linear system a ridge fit solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolvePath {
    /// `(XᵀX + λI) β = XᵀY`, a `D × D` system.
    DirectD,
    /// `β = Xᵀ(XXᵀ + λI)⁻¹Y`, an `m × m` system.
    WoodburyM,
}

impl fmt::Display for SolvePath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SolvePath::DirectD => "direct-D",
            SolvePath::WoodburyM => "woodbury-m",
        })
    }
}

/// A fitted linear model `ŷ(x) = ⟨M, Δ(x)⟩`.
#[derive(Debug, Clone)]
pub struct RidgeModel {
    model: TransformVec,
    lambda: f64,
    path: SolvePath,
}

impl RidgeModel {
    pub fn transform(&self) -> &TransformVec {
        &self.model
    }

    pub fn vector(&self) -> &Hypervector {
        self.model.vec()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn path(&self) -> SolvePath {
        self.path
    }

    /// `⟨M, Δ(x)⟩`.
    pub fn predict<M: Embedding + ?Sized>(&self, emb: &M, x: &M::Point) -> Result<f64> {
        self.model.check_embedding(emb)?;
        inner(self.model.vec(), &emb.delta(x)?)
    }

    /// Predictions for every row of a design.
    pub fn predict_rows(&self, design: &DesignMatrix) -> Result<Vec<f64>> {
        design.rows().iter().map(|r| inner(self.model.vec(), r)).collect()
    }

    /// `‖Xᵀ(Xβ − Y) + λβ‖ / ‖XᵀY‖` with `β = M/D`: zero at the exact optimum.
    pub fn stationarity(&self, design: &DesignMatrix) -> Result<f64> {
        stationarity_of(self.model.vec(), design, self.lambda)
    }
}

fn stationarity_of(m: &Hypervector, design: &DesignMatrix, lambda: f64) -> Result<f64> {
    if m.dims() != design.dims() {
        return Err(Error::DimensionMismatch(m.dims(), design.dims()));
    }
    let d = design.dims() as f64;
    let beta = DVector::from_iterator(m.dims(), m.values().iter().map(|v| v / d));
    let order: Vec<usize> = (0..design.len()).collect();
    let x = design.matrix_in(&order);
    let y = design.labels_in(&order);
    let xty = x.tr_mul(&y);
    let grad = x.tr_mul(&(&x * &beta - &y)) + &beta * lambda;
    let scale = xty.norm();
    Ok(if scale > 0.0 { grad.norm() / scale } else { grad.norm() })
}

/// Solves `A z = b` for symmetric positive semi-definite `A`. With `λ > 0`
/// the system is positive definite; with `λ = 0` it must be full rank.
fn solve_psd(a: DMatrix<f64>, b: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
    if lambda > 0.0 {
        if let Some(chol) = a.clone().cholesky() {
            return Ok(chol.solve(b));
        }
        // round-off made a huge-norm system indefinite; the exact matrix has
        // every eigenvalue at least λ
        let eig = SymmetricEigen::new(a);
        let coords = eig.eigenvectors.tr_mul(b).component_div(&eig.eigenvalues.map(|e| e.max(lambda)));
        return Ok(&eig.eigenvectors * coords);
    }
    let eig = SymmetricEigen::new(a);
    let max = eig.eigenvalues.iter().fold(0.0f64, |acc, e| acc.max(e.abs()));
    let min = eig.eigenvalues.iter().fold(f64::INFINITY, |acc, &e| acc.min(e));
    if !(min > RANK_TOL * max) {
        return Err(Error::RankDeficient(format!(
            "unregularized system has eigenvalue ratio {:.3e}",
            if max > 0.0 { min / max } else { 0.0 }
        )));
    }
    let coords = eig.eigenvectors.tr_mul(b).component_div(&eig.eigenvalues);
    Ok(&eig.eigenvectors * coords)
}

/// Ridge solution on the cheaper path: `m × m` when `m < D`, `D × D` otherwise.
pub fn fit_ridge(design: &DesignMatrix, lambda: f64) -> Result<RidgeModel> {
    let path = if design.len() < design.dims() { SolvePath::WoodburyM } else { SolvePath::DirectD };
    fit_ridge_with(design, lambda, path)
}

/// Ridge solution on a chosen path.
pub fn fit_ridge_with(design: &DesignMatrix, lambda: f64, path: SolvePath) -> Result<RidgeModel> {
    if !(lambda >= 0.0) || !lambda.is_finite() {
        return invalid(format!("lambda must be finite and non-negative, got {lambda}"));
    }
    let order = design.canonical_order();
    let x = design.matrix_in(&order);
    let y = design.labels_in(&order);
    let d = design.dims();
    let beta = match path {
        SolvePath::WoodburyM => {
            let mut k = &x * x.transpose();
            for i in 0..k.nrows() {
                k[(i, i)] += lambda;
            }
            x.tr_mul(&solve_psd(k, &y, lambda)?)
        }
        SolvePath::DirectD => {
            let mut a = x.tr_mul(&x);
            for i in 0..d {
                a[(i, i)] += lambda;
            }
            solve_psd(a, &x.tr_mul(&y), lambda)?
        }
    };
    let m = Hypervector::new(beta.iter().map(|b| b * d as f64).collect())?;
    Ok(RidgeModel { model: TransformVec::new(m, Role::Function, design.encoder_id()), lambda, path })
}

/// The hat matrix `H(λ) = K(K + λI)⁻¹` from one eigendecomposition of the
/// kernel matrix `K = XXᵀ`, reused for every `λ`.
#[derive(Debug, Clone)]
pub struct LooShortcut {
    eigenvectors: DMatrix<f64>,
    eigenvalues: DVector<f64>,
    labels: DVector<f64>,
}

impl LooShortcut {
    pub fn new(design: &DesignMatrix) -> Self {
        let eig = SymmetricEigen::new(design.kernel());
        Self {
            eigenvectors: eig.eigenvectors,
            // round-off can push zero eigenvalues slightly negative
            eigenvalues: eig.eigenvalues.map(|e| e.max(0.0)),
            labels: DVector::from_column_slice(design.labels()),
        }
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn hat_matrix(&self, lambda: f64) -> DMatrix<f64> {
        let shrink = self.eigenvalues.map(|e| if e > 0.0 { e / (e + lambda) } else { 0.0 });
        let scaled = DMatrix::from_fn(self.len(), self.len(), |i, k| self.eigenvectors[(i, k)] * shrink[k]);
        scaled * self.eigenvectors.transpose()
    }

    /// `ŷ_loo,i = Σ_{j≠i} H_ij y_j / (1 − H_ii)` for the stored labels.
    pub fn predictions(&self, lambda: f64) -> Result<Vec<f64>> {
        self.predictions_for(lambda, self.labels.as_slice())
    }

    /// Leave-one-out predictions for other labels on the same rows.
    pub fn predictions_for(&self, lambda: f64, labels: &[f64]) -> Result<Vec<f64>> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return invalid(format!("lambda must be finite and non-negative, got {lambda}"));
        }
        if labels.len() != self.len() {
            return invalid(format!("{} labels for {} rows", labels.len(), self.len()));
        }
        // ŷ_loo,i = y_i − r_i / (1 − H_ii) with r = (I − H) y. Building I − H
        // from λ / (e + λ) avoids the cancellation in 1 − H_ii and in Σ_{j≠i}.
        let keep = self.eigenvalues.map(|e| if e > 0.0 { lambda / (e + lambda) } else { 1.0 });
        let v = &self.eigenvectors;
        let y = DVector::from_column_slice(labels);
        let coeffs = v.tr_mul(&y).component_mul(&keep);
        let resid = v * coeffs;
        (0..self.len())
            .map(|i| {
                let slack: f64 = (0..self.len()).map(|k| v[(i, k)] * v[(i, k)] * keep[k]).sum();
                let hii = 1.0 - slack;
                if hii >= LEVERAGE_LIMIT {
                    return Err(Error::LeverageSingularity { index: i, leverage: hii });
                }
                Ok(labels[i] - resid[i] / slack)
            })
            .collect()
    }

    /// Root mean squared leave-one-out error.
    pub fn rmse(&self, lambda: f64) -> Result<f64> {
        let pred = self.predictions(lambda)?;
        let sse: f64 = pred.iter().zip(self.labels.iter()).map(|(p, y)| (p - y).powi(2)).sum();
        Ok((sse / self.len() as f64).sqrt())
    }
}

/// Leave-one-out predictions without refitting.
pub fn loo_predictions(design: &DesignMatrix, lambda: f64) -> Result<Vec<f64>> {
    LooShortcut::new(design).predictions(lambda)
}

/// 21 values of `λ`, logarithmically spaced over `[1e-6, 1e4]`.
pub fn lambda_ladder() -> Vec<f64> {
    (0..21).map(|k| 10f64.powf(-6.0 + 0.5 * k as f64)).collect()
}

/// The `λ` from `ladder` with the smallest leave-one-out RMSE, and that RMSE.
/// Ladder entries with a leverage singularity are skipped.
pub fn tune_lambda(design: &DesignMatrix, ladder: &[f64]) -> Result<(f64, f64)> {
    let loo = LooShortcut::new(design);
    let mut best: Option<(f64, f64)> = None;
    for &lambda in ladder {
        let rmse = match loo.rmse(lambda) {
            Ok(r) => r,
            Err(Error::LeverageSingularity { .. }) => continue,
            Err(e) => return Err(e),
        };
        if best.is_none_or(|(_, b)| rmse < b) {
            best = Some((lambda, rmse));
        }
    }
    best.ok_or_else(|| Error::InvalidInput("no usable lambda in the ladder".into()))
}

/// A coefficient or right-hand side of a linear differential equation.
pub type Profile = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// `a_0(x) y + a_1(x) y' + a_2(x) y'' = c(x)` imposed at collocation points
/// with weight `w`.
#[derive(Clone)]
pub struct PhysicsSpec {
    coefficients: Vec<Profile>,
    rhs: Profile,
    collocation: Vec<f64>,
    weight: f64,
}

impl fmt::Debug for PhysicsSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PhysicsSpec")
            .field("order", &self.order())
            .field("collocation", &self.collocation.len())
            .field("weight", &self.weight)
            .finish()
    }
}

impl PhysicsSpec {
    /// `coefficients[k]` multiplies the `k`-th derivative.
    pub fn new(coefficients: Vec<Profile>, rhs: Profile, collocation: Vec<f64>, weight: f64) -> Result<Self> {
        if coefficients.is_empty() {
            return invalid("differential equation needs at least one coefficient");
        }
        if !(weight > 0.0) || !weight.is_finite() {
            return invalid(format!("physics weight must be positive, got {weight}"));
        }
        if let Some(x) = collocation.iter().find(|x| !x.is_finite()) {
            return invalid(format!("collocation point {x} is not finite"));
        }
        Ok(Self { coefficients, rhs, collocation, weight })
    }

    /// Constant coefficients and right-hand side on 100 equidistant points
    /// spanning `[lo, hi]`.
    pub fn constant(coefficients: &[f64], rhs: f64, lo: f64, hi: f64, weight: f64) -> Result<Self> {
        let coefficients = coefficients.iter().map(|&a| Arc::new(move |_: f64| a) as Profile).collect();
        let points = crate::datasets::linspace(lo, hi, DEFAULT_COLLOCATION);
        Self::new(coefficients, Arc::new(move |_| rhs), points, weight)
    }

    /// Highest derivative order.
    pub fn order(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn collocation(&self) -> &[f64] {
        &self.collocation
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn with_weight(mut self, weight: f64) -> Result<Self> {
        if !(weight > 0.0) || !weight.is_finite() {
            return invalid(format!("physics weight must be positive, got {weight}"));
        }
        self.weight = weight;
        Ok(self)
    }

    pub fn with_collocation(mut self, points: Vec<f64>) -> Self {
        self.collocation = points;
        self
    }
}

/// Ridge solution over the data rows stacked with `√w (Σ_k a_k dᵏΔ/dxᵏ)(x_c)`
/// rows whose labels are `√w c(x_c)`.
pub fn fit_physics<E>(
    emb: &Normalized<E>,
    design: &DesignMatrix,
    physics: &PhysicsSpec,
    lambda: f64,
) -> Result<RidgeModel>
where
    E: RealLine,
    E::Point: GridPoint,
{
    if physics.order() > 2 {
        return Err(Error::Unsupported(format!(
            "derivative order {}; supported orders are at most 2",
            physics.order()
        )));
    }
    if design.encoder_id() != emb.id() {
        return Err(Error::EncoderMismatch { expected: emb.id(), found: design.encoder_id() });
    }
    if physics.collocation.is_empty() {
        return fit_ridge(design, lambda);
    }
    let line = emb
        .encoder()
        .interval()
        .ok_or_else(|| Error::Unsupported("physics rows need an interval encoder".into()))?;
    let mut points = physics.collocation.clone();
    points.sort_by(f64::total_cmp);
    if let Some(w) = points.windows(2).find(|w| w[1] - w[0] > line.length_scale()) {
        return invalid(format!(
            "collocation gap {:.4} between {} and {} exceeds the length scale {}",
            w[1] - w[0],
            w[0],
            w[1],
            line.length_scale()
        ));
    }
    let root = physics.weight.sqrt();
    let mut rows = Vec::with_capacity(points.len());
    let mut labels = Vec::with_capacity(points.len());
    for &x in &physics.collocation {
        let mut row = Hypervector::zeros(emb.dims());
        for (k, a) in physics.coefficients.iter().enumerate() {
            let coef = a(x);
            if coef == 0.0 {
                continue;
            }
            let basis = if k == 0 {
                emb.delta(&E::point(x))?
            } else {
                emb.delta_derivative(x, k as u32, DerivativeMethod::Auto)?
            };
            row.axpy(coef, &basis)?;
        }
        rows.push(row.scale(root));
        labels.push(root * (physics.rhs)(x));
    }
    let stacked = design.stack(&DesignMatrix::new(rows, labels, design.encoder_id())?)?;
    fit_ridge(&stacked, lambda)
}

/// Settings for the iterative update `M ← M + α (y_i − ⟨M, x_i⟩) x_i`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IterativeConfig {
    pub alpha: f64,
    pub passes: usize,
    pub seed: u64,
}

impl Default for IterativeConfig {
    fn default() -> Self {
        Self { alpha: 0.02, passes: 50, seed: 0 }
    }
}

/// Passes of loss increase after which training stops with a divergence error.
pub const DIVERGENCE_PASSES: usize = 5;

/// Result of iterative training.
#[derive(Debug, Clone)]
pub struct IterativeFit {
    model: TransformVec,
    pass_losses: Vec<f64>,
    last_order: Vec<usize>,
}

impl IterativeFit {
    pub fn transform(&self) -> &TransformVec {
        &self.model
    }

    pub fn vector(&self) -> &Hypervector {
        self.model.vec()
    }

    /// `½ Σ (y_i − ⟨M, x_i⟩)²` after each pass.
    pub fn pass_losses(&self) -> &[f64] {
        &self.pass_losses
    }

    /// Row indices in the order the last pass visited them.
    pub fn last_order(&self) -> &[usize] {
        &self.last_order
    }

    pub fn predict<M: Embedding + ?Sized>(&self, emb: &M, x: &M::Point) -> Result<f64> {
        self.model.check_embedding(emb)?;
        inner(self.model.vec(), &emb.delta(x)?)
    }

    pub fn predict_rows(&self, design: &DesignMatrix) -> Result<Vec<f64>> {
        design.rows().iter().map(|r| inner(self.model.vec(), r)).collect()
    }
}

fn half_sse(m: &Hypervector, design: &DesignMatrix) -> Result<f64> {
    let mut total = 0.0;
    for (r, y) in design.rows().iter().zip(design.labels()) {
        total += (y - inner(m, r)?).powi(2);
    }
    Ok(0.5 * total)
}

/// Stochastic updates over the design rows, shuffled per pass by the seed.
/// Starts from the zero vector.
pub fn fit_iterative(design: &DesignMatrix, cfg: &IterativeConfig) -> Result<IterativeFit> {
    if !(cfg.alpha > 0.0) || !cfg.alpha.is_finite() {
        return invalid(format!("learning rate must be positive, got {}", cfg.alpha));
    }
    let mut rng = seeding::rng(cfg.seed, 14);
    let mut m = Hypervector::zeros(design.dims());
    let mut order: Vec<usize> = (0..design.len()).collect();
    let mut losses = Vec::with_capacity(cfg.passes);
    let mut rising = 0;
    for pass in 0..cfg.passes {
        order.shuffle(&mut rng);
        for &i in &order {
            let row = &design.rows()[i];
            let err = design.labels()[i] - inner(&m, row)?;
            m.axpy(cfg.alpha * err, row)?;
        }
        let loss = half_sse(&m, design)?;
        if !loss.is_finite() {
            return Err(Error::Divergence { pass });
        }
        rising = match losses.last() {
            Some(&prev) if loss > prev => rising + 1,
            _ => 0,
        };
        losses.push(loss);
        if rising >= DIVERGENCE_PASSES {
            return Err(Error::Divergence { pass });
        }
    }
    Ok(IterativeFit {
        model: TransformVec::new(m, Role::Function, design.encoder_id()),
        pass_losses: losses,
        last_order: order,
    })
}

/// The empirical function transform, used as a regressor.
pub fn fit_empirical_regressor<M: Embedding + ?Sized>(
    emb: &M,
    sample: &Sample<M::Point>,
    policy: &DensityPolicy,
) -> Result<TransformVec> {
    empirical_function(emb, sample, policy)
}

/// `P̂_XY = (1/m) Σ Δφ(x_i) ⊗ Δψ(y_i)` over a labeled sample.
pub fn fit_generative_regressor<A, B>(product: &Product<A, B>, sample: &Sample<A::Point>) -> Result<TransformVec>
where
    A: Embedding,
    B: Embedding<Point = f64>,
{
    let labels = sample
        .labels()
        .ok_or_else(|| Error::InvalidInput("generative regressor needs labels".into()))?;
    let pairs = sample.inputs().iter().cloned().zip(labels.iter().copied()).collect();
    empirical_distribution(product, &Sample::new(pairs)?)
}

/// `count` equidistant labels spanning `[lo − 3l, hi + 3l]`.
pub fn label_grid(lo: f64, hi: f64, length_scale: f64, count: usize) -> Result<Vec<f64>> {
    if !(hi >= lo) || !(length_scale > 0.0) || count < 2 {
        return invalid("label grid needs lo ≤ hi, a positive length scale and at least two points");
    }
    Ok(crate::datasets::linspace(lo - 3.0 * length_scale, hi + 3.0 * length_scale, count))
}

/// The default 201-point grid over the range of `labels` widened by `3l`.
pub fn label_grid_for(labels: &[f64], length_scale: f64) -> Result<Vec<f64>> {
    let lo = labels.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = labels.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    label_grid(lo, hi, length_scale, LABEL_GRID_POINTS)
}

/// A conditional density on a label grid with its summaries.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalPrediction {
    pub grid: Vec<f64>,
    /// Clipped and renormalized so that `Σ_j w_j density_j = 1`.
    pub densities: Vec<f64>,
    /// `w_j density_j` with trapezoid weights `w_j`.
    pub masses: Vec<f64>,
    /// Grid label of highest density (the first one on ties).
    pub mle: f64,
    /// Grid expectation.
    pub eve: f64,
    /// Equal-tail interval holding at least `level` of the mass.
    pub ci: (f64, f64),
    pub level: f64,
}

impl ConditionalPrediction {
    pub fn ci_width(&self) -> f64 {
        self.ci.1 - self.ci.0
    }

    /// Grid mass inside the interval, endpoints included.
    pub fn ci_mass(&self) -> f64 {
        self.grid
            .iter()
            .zip(&self.masses)
            .filter(|(y, _)| (self.ci.0..=self.ci.1).contains(*y))
            .map(|(_, p)| p)
            .sum()
    }
}

fn trapezoid_weights(grid: &[f64]) -> Vec<f64> {
    let n = grid.len();
    (0..n)
        .map(|j| {
            let left = if j > 0 { grid[j] - grid[j - 1] } else { 0.0 };
            let right = if j + 1 < n { grid[j + 1] - grid[j] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect()
}

/// Encodings of a fixed label grid, shared by many conditional predictions.
#[derive(Debug, Clone)]
pub struct LabelGrid {
    points: Vec<f64>,
    weights: Vec<f64>,
    deltas: Vec<Hypervector>,
    encoder_id: u64,
}

impl LabelGrid {
    pub fn new<B: Embedding<Point = f64> + ?Sized>(emb: &B, points: Vec<f64>) -> Result<Self> {
        if points.len() < 2 {
            return invalid("label grid needs at least two points");
        }
        if points.windows(2).any(|w| !(w[1] > w[0])) {
            return invalid("label grid must be strictly increasing");
        }
        let deltas = points.iter().map(|y| emb.delta(y)).collect::<Result<Vec<_>>>()?;
        let weights = trapezoid_weights(&points);
        Ok(Self { points, weights, deltas, encoder_id: emb.id() })
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    /// Summaries of the conditional `⟨P̂_XY ⊗ Δφ(x), Δψ(y)⟩` on this grid.
    pub fn predict<A, B>(
        &self,
        product: &Product<A, B>,
        joint: &TransformVec,
        x: &A::Point,
        level: f64,
    ) -> Result<ConditionalPrediction>
    where
        A: Embedding,
        B: Embedding<Point = f64>,
    {
        if !(level > 0.0 && level < 1.0) {
            return invalid(format!("confidence level must lie in (0, 1), got {level}"));
        }
        if product.second().id() != self.encoder_id {
            return Err(Error::EncoderMismatch { expected: product.second().id(), found: self.encoder_id });
        }
        let cond = condition_on_first(product, joint, x)?;
        let raw = self.deltas.iter().map(|d| inner(cond.vec(), d)).collect::<Result<Vec<_>>>()?;
        self.summarize(raw.into_iter().map(|v| v.max(0.0)).collect(), level)
    }

    fn summarize(&self, clipped: Vec<f64>, level: f64) -> Result<ConditionalPrediction> {
        let total: f64 = clipped.iter().zip(&self.weights).map(|(d, w)| d * w).sum();
        if !(total > 0.0) {
            return Err(Error::DegenerateConditional);
        }
        let densities: Vec<f64> = clipped.iter().map(|d| d / total).collect();
        let masses: Vec<f64> = densities.iter().zip(&self.weights).map(|(d, w)| d * w).collect();
        let mut best = 0;
        for (j, d) in densities.iter().enumerate() {
            if *d > densities[best] {
                best = j;
            }
        }
        let eve = self.points.iter().zip(&masses).map(|(y, p)| y * p).sum();
        let tail = 0.5 * (1.0 - level);
        // widen from each end while the excluded tail stays within budget
        let mut lo = 0;
        let mut below = 0.0;
        while lo + 1 < masses.len() && below + masses[lo] <= tail {
            below += masses[lo];
            lo += 1;
        }
        let mut hi = masses.len() - 1;
        let mut above = 0.0;
        while hi > lo && above + masses[hi] <= tail {
            above += masses[hi];
            hi -= 1;
        }
        Ok(ConditionalPrediction {
            grid: self.points.clone(),
            densities,
            masses,
            mle: self.points[best],
            eve,
            ci: (self.points[lo], self.points[hi]),
            level,
        })
    }
}

/// Conditional density of the label at `x` on `grid`, clipped at zero and
/// renormalized on the grid.
pub fn predict_conditional<A, B>(
    product: &Product<A, B>,
    joint: &TransformVec,
    x: &A::Point,
    grid: &[f64],
    level: f64,
) -> Result<ConditionalPrediction>
where
    A: Embedding,
    B: Embedding<Point = f64>,
{
    LabelGrid::new(product.second(), grid.to_vec())?.predict(product, joint, x, level)
}
