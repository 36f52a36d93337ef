//! Forward and inverse transforms.
//!
//! A function `f` maps to `F = ∫ f(x) Δ(x) dμ` and a distribution `p` to
//! `P = ∫ Δ(x) dp(x)`, both by quadrature on a grid. Evaluation goes back
//! through the inner product, `f̃(x) = ⟨F, Δ(x)⟩`, which is `f` smoothed by
//! the normalized kernel.

use std::fmt;
use std::str::FromStr;

use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::hypervector::{inner, sign_of, Hypervector};
use crate::normalization::{DerivativeMethod, Embedding, GridPoint, Normalized, QuadratureGrid, RealLine};
use crate::seeding;

/// Tolerance on the total mass of distribution weights.
pub const MASS_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Function,
    Distribution,
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Role::Function => "function",
            Role::Distribution => "distribution",
        })
    }
}

impl FromStr for Role {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "function" => Ok(Role::Function),
            "distribution" => Ok(Role::Distribution),
            other => Err(Error::Parse(format!("unknown role {other:?}"))),
        }
    }
}

/// A transform together with what it represents and the embedding that made it.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformVec {
    vec: Hypervector,
    role: Role,
    encoder_id: u64,
}

impl TransformVec {
    pub fn new(vec: Hypervector, role: Role, encoder_id: u64) -> Self {
        Self { vec, role, encoder_id }
    }

    pub fn vec(&self) -> &Hypervector {
        &self.vec
    }

    pub fn into_vec(self) -> Hypervector {
        self.vec
    }

    pub fn role(&self) -> Role {
        self.role
    }

    pub fn encoder_id(&self) -> u64 {
        self.encoder_id
    }

    pub fn dims(&self) -> usize {
        self.vec.dims()
    }

    /// Fail unless this transform was built with `emb`.
    pub fn check_embedding<M: Embedding + ?Sized>(&self, emb: &M) -> Result<()> {
        self.check_id(emb.id())
    }

    fn check_id(&self, expected: u64) -> Result<()> {
        if self.encoder_id != expected {
            return Err(Error::EncoderMismatch { expected, found: self.encoder_id });
        }
        Ok(())
    }

    /// `self + alpha * other`, keeping this transform's role.
    pub fn add_scaled(&self, alpha: f64, other: &TransformVec) -> Result<TransformVec> {
        other.check_id(self.encoder_id)?;
        Ok(Self { vec: self.vec.add_scaled(alpha, &other.vec)?, ..self.clone() })
    }

    pub fn scale(&self, c: f64) -> TransformVec {
        Self { vec: self.vec.scale(c), ..self.clone() }
    }

    /// Adds i.i.d. Gaussian noise of standard deviation `magnitude`, which
    /// makes the transform of distinct functions distinct with probability 1.
    pub fn with_noise(&self, magnitude: f64, seed: u64) -> Result<TransformVec> {
        if !(magnitude >= 0.0 && magnitude.is_finite()) {
            return invalid(format!("noise magnitude must be non-negative, got {magnitude}"));
        }
        let mut rng = seeding::rng(seed, 5);
        let values = self
            .vec
            .values()
            .iter()
            .map(|v| {
                let z: f64 = StandardNormal.sample(&mut rng);
                v + magnitude * z
            })
            .collect();
        Ok(Self { vec: Hypervector::new(values)?, ..self.clone() })
    }

    /// Plain-text form: `role=`, `dims=`, `encoder=` header lines, then one
    /// component per line.
    pub fn to_text(&self) -> String {
        let mut out = format!("role={}\ndims={}\nencoder={:016x}\n", self.role, self.dims(), self.encoder_id);
        for v in self.vec.values() {
            out.push_str(&format!("{v}\n"));
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        let mut header = |key: &str| -> Result<String> {
            let line = lines.next().ok_or_else(|| Error::Parse(format!("missing {key} header")))?;
            match line.split_once('=') {
                Some((k, v)) if k.trim() == key => Ok(v.trim().to_string()),
                _ => Err(Error::Parse(format!("expected {key}=..., got {line:?}"))),
            }
        };
        let role: Role = header("role")?.parse()?;
        let dims: usize = header("dims")?
            .parse()
            .map_err(|_| Error::Parse("dims is not an integer".into()))?;
        let encoder_id = u64::from_str_radix(&header("encoder")?, 16)
            .map_err(|_| Error::Parse("encoder hash is not hex".into()))?;
        let values = lines
            .map(|l| l.parse::<f64>().map_err(|_| Error::Parse(format!("bad component {l:?}"))))
            .collect::<Result<Vec<f64>>>()?;
        if values.len() != dims {
            return Err(Error::Parse(format!("header says {dims} components, found {}", values.len())));
        }
        Ok(Self { vec: Hypervector::new(values)?, role, encoder_id })
    }
}

fn weighted_sum<M: Embedding + ?Sized>(
    emb: &M,
    points: &[M::Point],
    coeffs: impl Iterator<Item = f64>,
) -> Result<Hypervector> {
    let mut acc = Hypervector::zeros(emb.dims());
    for (x, c) in points.iter().zip(coeffs) {
        if c != 0.0 {
            acc.axpy(c, &emb.delta(x)?)?;
        }
    }
    Ok(acc)
}

/// `F = Σ_j w_j f(x_j) Δ(x_j)`.
pub fn forward_function<M, F>(emb: &M, grid: &QuadratureGrid<M::Point>, f: F) -> Result<TransformVec>
where
    M: Embedding + ?Sized,
    F: Fn(&M::Point) -> f64,
{
    let mut coeffs = Vec::with_capacity(grid.len());
    for (x, w) in grid.points().iter().zip(grid.weights()) {
        let fx = f(x);
        if !fx.is_finite() {
            return invalid(format!("function is not finite at {x:?}: {fx}"));
        }
        coeffs.push(w * fx);
    }
    let vec = weighted_sum(emb, grid.points(), coeffs.into_iter())?;
    Ok(TransformVec::new(vec, Role::Function, emb.id()))
}

/// `𝟙_X`, the transform of the constant function 1.
pub fn unit_transform<M: Embedding + ?Sized>(emb: &M, grid: &QuadratureGrid<M::Point>) -> Result<TransformVec> {
    forward_function(emb, grid, |_| 1.0)
}

/// `P = Σ_j p_j Δ(x_j)` for probability masses `p_j` on the grid points.
pub fn forward_distribution<M>(emb: &M, grid: &QuadratureGrid<M::Point>, masses: &[f64]) -> Result<TransformVec>
where
    M: Embedding + ?Sized,
{
    if masses.len() != grid.len() {
        return invalid(format!("{} masses for {} grid points", masses.len(), grid.len()));
    }
    if let Some(p) = masses.iter().find(|p| !(**p >= 0.0 && p.is_finite())) {
        return invalid(format!("probability mass must be non-negative, got {p}"));
    }
    let total: f64 = masses.iter().sum();
    if (total - 1.0).abs() > MASS_TOLERANCE {
        return invalid(format!("probability masses sum to {total}, not 1"));
    }
    let vec = weighted_sum(emb, grid.points(), masses.iter().copied())?;
    Ok(TransformVec::new(vec, Role::Distribution, emb.id()))
}

/// `f̃(x) = ⟨T, Δ(x)⟩`.
pub fn inverse_eval<M: Embedding + ?Sized>(emb: &M, t: &TransformVec, x: &M::Point) -> Result<f64> {
    t.check_embedding(emb)?;
    inner(&t.vec, &emb.delta(x)?)
}

/// `⟨F, G⟩`: `∫ f̃ g dμ` for two functions, the expectation of `f̃` when one
/// side is a distribution.
pub fn integral_inner(f: &TransformVec, g: &TransformVec) -> Result<f64> {
    g.check_id(f.encoder_id)?;
    inner(&f.vec, &g.vec)
}

/// Sign-thresholded transform with a global calibration scale.
#[derive(Debug, Clone)]
pub struct BipolarTransform {
    transform: TransformVec,
    scale: f64,
    correlation: f64,
}

impl BipolarTransform {
    /// `sign(T)`, with the role and encoder of the source.
    pub fn transform(&self) -> &TransformVec {
        &self.transform
    }

    /// Least-squares `c` with `⟨T, Δ(x)⟩ ≈ c ⟨sign(T), Δ(x)⟩`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Pearson correlation of the two evaluation series on the calibration grid.
    pub fn correlation(&self) -> f64 {
        self.correlation
    }

    /// Calibrated evaluation `c ⟨sign(T), Δ(x)⟩`.
    pub fn eval<M: Embedding + ?Sized>(&self, emb: &M, x: &M::Point) -> Result<f64> {
        Ok(self.scale * inverse_eval(emb, &self.transform, x)?)
    }
}

/// Bipolar approximation of `t`, calibrated on `grid`.
pub fn bipolar_transform<M>(emb: &M, t: &TransformVec, grid: &QuadratureGrid<M::Point>) -> Result<BipolarTransform>
where
    M: Embedding + ?Sized,
{
    t.check_embedding(emb)?;
    if t.vec.is_zero() {
        return invalid("cannot threshold a zero transform");
    }
    let signed = sign_of(&t.vec);
    let mut real = Vec::with_capacity(grid.len());
    let mut bip = Vec::with_capacity(grid.len());
    for x in grid.points() {
        let d = emb.delta(x)?;
        real.push(inner(&t.vec, &d)?);
        bip.push(inner(&signed, &d)?);
    }
    let bb: f64 = bip.iter().map(|b| b * b).sum();
    if !(bb > 0.0) {
        return Err(Error::Calibration("bipolar evaluations vanish on the calibration grid".into()));
    }
    let scale = real.iter().zip(&bip).map(|(a, b)| a * b).sum::<f64>() / bb;
    Ok(BipolarTransform {
        transform: TransformVec::new(signed, t.role, t.encoder_id),
        scale,
        correlation: pearson(&real, &bip),
    })
}

/// Sample Pearson correlation; 0 when either series is constant.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len().min(b.len()) as f64;
    if n < 2.0 {
        return 0.0;
    }
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    if saa == 0.0 || sbb == 0.0 {
        0.0
    } else {
        sab / (saa * sbb).sqrt()
    }
}

/// `dⁿf̃/dxⁿ (x) = ⟨T, dⁿΔ(x)/dxⁿ⟩` for `order` 1 or 2, analytic for the
/// real-cosine flavor and a finite difference otherwise.
pub fn derivative_eval<E>(emb: &Normalized<E>, t: &TransformVec, x: f64, order: u32) -> Result<f64>
where
    E: RealLine,
    E::Point: GridPoint,
{
    derivative_eval_with(emb, t, x, order, DerivativeMethod::Auto)
}

pub fn derivative_eval_with<E>(
    emb: &Normalized<E>,
    t: &TransformVec,
    x: f64,
    order: u32,
    method: DerivativeMethod,
) -> Result<f64>
where
    E: RealLine,
    E::Point: GridPoint,
{
    if order == 0 || order > 2 {
        return Err(Error::Unsupported(format!("derivative order {order}; supported orders are 1 and 2")));
    }
    t.check_embedding(emb)?;
    inner(&t.vec, &emb.delta_derivative(x, order, method)?)
}
