//! Browser bindings for three operations on the unit interval: the shape of
//! the normalized kernel, an empirical density estimate and a function-estimate
//! classifier. [`Model`] holds the logic so it can be tested natively;
//! [`Demo`] is the thin JavaScript facade.

use hdt_core::classification::fit_function_classifier;
use hdt_core::empirical::{density_eval, empirical_distribution, DensityPolicy, Sample};
use hdt_core::transform::inverse_eval;
use hdt_core::{inner, Embedding, IntervalEncoder, Normalized, QuadratureGrid, Result, SolverConfig};
use wasm_bindgen::prelude::*;

/// A bipolar interval encoder on `[0, 1]` with its normalization solved.
pub struct Model {
    emb: Normalized<IntervalEncoder>,
    policy: DensityPolicy,
}

impl Model {
    pub fn new(length_scale: f64, dims: usize, seed: u64) -> Result<Self> {
        let enc = IntervalEncoder::bipolar(0.0, 1.0, length_scale, dims, seed)?;
        let grid = QuadratureGrid::for_length_scale(0.0, 1.0, length_scale)?;
        let emb = Normalized::solve(enc, &grid, &SolverConfig::default())?;
        let policy = DensityPolicy::for_length_scale(length_scale)?;
        Ok(Self { emb, policy })
    }

    /// `points` evenly spaced abscissae covering `[0, 1]`.
    pub fn axis(points: usize) -> Vec<f64> {
        match points {
            0 => Vec::new(),
            1 => vec![0.5],
            _ => (0..points).map(|k| k as f64 / (points - 1) as f64).collect(),
        }
    }

    /// `⟨Δ(center), Δ(x)⟩` along the axis.
    pub fn kernel(&self, center: f64, points: usize) -> Result<Vec<f64>> {
        let at = self.emb.delta(&center)?;
        Self::axis(points).iter().map(|x| inner(&at, &self.emb.delta(x)?)).collect()
    }

    /// Empirical density of `sample` along the axis, clipped at zero.
    pub fn density(&self, sample: &[f64], points: usize) -> Result<Vec<f64>> {
        let p = empirical_distribution(&self.emb, &Sample::new(sample.to_vec())?)?;
        Self::axis(points).iter().map(|x| density_eval(&self.emb, &p, x, &self.policy)).collect()
    }

    /// Decision function of the classifier fitted to `±1` labels; its sign is
    /// the predicted class.
    pub fn decision(&self, xs: &[f64], labels: &[f64], points: usize) -> Result<Vec<f64>> {
        let sample = Sample::labeled(xs.to_vec(), labels.to_vec())?;
        let f = fit_function_classifier(&self.emb, &sample, &self.policy)?;
        Self::axis(points).iter().map(|x| inverse_eval(&self.emb, &f, x)).collect()
    }
}

#[wasm_bindgen]
pub struct Demo(Model);

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(length_scale: f64, dims: usize, seed: u32) -> std::result::Result<Demo, JsError> {
        Ok(Demo(Model::new(length_scale, dims, seed.into())?))
    }

    pub fn axis(points: usize) -> Vec<f64> {
        Model::axis(points)
    }

    pub fn kernel(&self, center: f64, points: usize) -> std::result::Result<Vec<f64>, JsError> {
        Ok(self.0.kernel(center, points)?)
    }

    pub fn density(&self, sample: &[f64], points: usize) -> std::result::Result<Vec<f64>, JsError> {
        Ok(self.0.density(sample, points)?)
    }

    pub fn decision(&self, xs: &[f64], labels: &[f64], points: usize) -> std::result::Result<Vec<f64>, JsError> {
        Ok(self.0.decision(xs, labels, points)?)
    }
}
