//! Normalization of an encoder into approximate Dirac deltas.
//!
//! For an encoder `φ` and a measure `μ` given by a [`QuadratureGrid`], the
//! normalization function `n` solves
//!
//! ```text
//! ∫ ⟨φ(x), φ(x')⟩ / (n(x) n(x')) dμ(x') = 1    for every x,
//! ```
//!
//! and the normalized encoding is `Δ(x) = φ(x) / n(x)`. On the grid this is a
//! discrete Hammerstein equation `n_j = Σ_k w_k G_jk / n_k` with the Gram
//! matrix `G_jk = ⟨φ(x_j) + ε, φ(x_k) + ε⟩`.
//!
//! The plain fixed-point map `n ← G w / n` has a -1 eigenvalue along the
//! constant mode (scaling `n` by `c` maps it to `1/c`), so it oscillates
//! forever. The solver iterates the geometric mean of the current iterate
//! and its image instead, `n ← n^(1-ω) (G w / n)^ω` with `ω = 1/2` by
//! default, which has the same fixed point and contracts every mode.

use std::collections::HashMap;
use std::fmt::Debug;

use crate::encoders::{AnyEncoder, Encoder, IntervalEncoder, Value};
use crate::error::{invalid, Error, Result};
use crate::hypervector::{bind, dot, Hypervector};
use crate::seeding;

const DOMAIN_SLACK: f64 = 1e-9;

/// Points that can appear on a quadrature grid.
pub trait GridPoint: Clone + Debug {
    /// Stable text key used for lookups and serialization.
    fn key(&self) -> String;
    fn from_key(key: &str) -> Result<Self>;
    /// Coordinate on the real line, if the point has one.
    fn coord(&self) -> Option<f64>;
}

impl GridPoint for f64 {
    fn key(&self) -> String {
        format!("{self:?}")
    }

    fn from_key(key: &str) -> Result<Self> {
        key.trim()
            .parse()
            .map_err(|_| Error::Parse(format!("not a number: {key:?}")))
    }

    fn coord(&self) -> Option<f64> {
        Some(*self)
    }
}

impl GridPoint for String {
    fn key(&self) -> String {
        self.clone()
    }

    fn from_key(key: &str) -> Result<Self> {
        Ok(key.to_string())
    }

    fn coord(&self) -> Option<f64> {
        None
    }
}

impl GridPoint for Value {
    fn key(&self) -> String {
        match self {
            Value::Real(x) => x.key(),
            Value::Text(s) => s.clone(),
            Value::Tuple(vs) => vs.iter().map(GridPoint::key).collect::<Vec<_>>().join(";"),
        }
    }

    fn from_key(key: &str) -> Result<Self> {
        if key.contains(';') {
            return Ok(Value::Tuple(key.split(';').map(Value::parse).collect()));
        }
        Ok(Value::parse(key))
    }

    fn coord(&self) -> Option<f64> {
        match self {
            Value::Real(x) => Some(*x),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridLayout {
    /// Equal cells tiling `[lo, hi]`, one point at each cell midpoint.
    Midpoint { lo: f64, hi: f64 },
    /// A finite set with explicit weights.
    Finite,
}

/// Points and weights realizing the measure used in integrals.
#[derive(Debug, Clone)]
pub struct QuadratureGrid<P> {
    points: Vec<P>,
    weights: Vec<f64>,
    layout: GridLayout,
}

impl QuadratureGrid<f64> {
    /// `count` equal cells on `[lo, hi]` with midpoint nodes.
    pub fn midpoint(lo: f64, hi: f64, count: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return invalid(format!("grid interval [{lo}, {hi}] is empty"));
        }
        if count == 0 {
            return invalid("grid needs at least one cell");
        }
        let h = (hi - lo) / count as f64;
        let points = (0..count).map(|j| lo + (j as f64 + 0.5) * h).collect();
        Ok(Self { points, weights: vec![h; count], layout: GridLayout::Midpoint { lo, hi } })
    }

    /// Midpoint grid with spacing at most `l / 4` and at least 200 cells.
    pub fn for_length_scale(lo: f64, hi: f64, length_scale: f64) -> Result<Self> {
        if !(length_scale > 0.0) {
            return invalid("length scale must be positive");
        }
        let count = ((4.0 * (hi - lo) / length_scale).ceil() as usize).max(200);
        Self::midpoint(lo, hi, count)
    }

    pub fn lo(&self) -> Option<f64> {
        match self.layout {
            GridLayout::Midpoint { lo, .. } => Some(lo),
            GridLayout::Finite => None,
        }
    }

    pub fn hi(&self) -> Option<f64> {
        match self.layout {
            GridLayout::Midpoint { hi, .. } => Some(hi),
            GridLayout::Finite => None,
        }
    }
}

impl<P: Clone> QuadratureGrid<P> {
    /// Counting measure: every point has weight one.
    pub fn counting(points: Vec<P>) -> Result<Self> {
        let n = points.len();
        Self::finite(points, vec![1.0; n])
    }

    pub fn finite(points: Vec<P>, weights: Vec<f64>) -> Result<Self> {
        if points.is_empty() {
            return invalid("grid has no points");
        }
        if points.len() != weights.len() {
            return Err(Error::DimensionMismatch(points.len(), weights.len()));
        }
        if weights.iter().any(|&w| !(w > 0.0 && w.is_finite())) {
            return invalid("grid weights must be positive and finite");
        }
        Ok(Self { points, weights, layout: GridLayout::Finite })
    }

    pub fn points(&self) -> &[P] {
        &self.points
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn layout(&self) -> GridLayout {
        self.layout
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Tensor grid on `P × Q` with weights `w_j v_k`, first index slowest.
    pub fn product<Q: Clone>(&self, other: &QuadratureGrid<Q>) -> QuadratureGrid<(P, Q)> {
        let mut points = Vec::with_capacity(self.len() * other.len());
        let mut weights = Vec::with_capacity(self.len() * other.len());
        for (p, w) in self.points.iter().zip(&self.weights) {
            for (q, v) in other.points.iter().zip(&other.weights) {
                points.push((p.clone(), q.clone()));
                weights.push(w * v);
            }
        }
        QuadratureGrid { points, weights, layout: GridLayout::Finite }
    }

    /// The same grid with points converted by `f`.
    pub fn map_points<Q: Clone>(&self, f: impl Fn(&P) -> Q) -> QuadratureGrid<Q> {
        QuadratureGrid {
            points: self.points.iter().map(f).collect(),
            weights: self.weights.clone(),
            layout: self.layout,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Support {
    /// Values at increasing nodes inside `[lo, hi]`; linear in between and
    /// flat in the outer half-cells.
    Interval { nodes: Vec<f64>, lo: f64, hi: f64 },
    /// Values at the listed points; off-set points follow the [`OffGrid`] rule.
    Finite { keys: Vec<String>, weights: Vec<f64> },
    /// The same value everywhere.
    Constant,
}

/// How a normalization is evaluated away from the points it was solved on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OffGrid {
    /// Linear interpolation of the node values. Finite sets have nothing
    /// to interpolate and reject points outside the set.
    Linear,
    /// `n(x) = ⟨φ(x) + ε, 𝟙⟩` with `𝟙 = Σ_j w_j Δ(x_j)`, the extension that
    /// satisfies the discrete equation exactly at every point. At finite `D`
    /// the kernel's sampling noise makes the true `n` jagged between nodes;
    /// this rule follows it, linear interpolation does not.
    #[default]
    Nystrom,
    /// The mean of the solved values. On a finite set the Nyström rule gives
    /// every distant point the same share of the set's mass, so densities
    /// never decay away from the data; this rule keeps `⟨P, Δ(x)⟩`
    /// proportional to the kernel overlap with the data, which sampling on an
    /// unbounded domain such as sequences needs.
    Mean,
}

/// Solved normalization function with its solver diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizationFn {
    support: Support,
    off_grid: OffGrid,
    values: Vec<f64>,
    epsilon: f64,
    tol: f64,
    iterations: usize,
    residual: f64,
    history: Vec<f64>,
}

impl NormalizationFn {
    /// `n ≡ value`; `constant(1.0)` leaves encodings unnormalized.
    pub fn constant(value: f64) -> Result<Self> {
        if !(value > 0.0 && value.is_finite()) {
            return invalid(format!("normalization constant must be positive, got {value}"));
        }
        Ok(Self {
            support: Support::Constant,
            off_grid: OffGrid::Linear,
            values: vec![value],
            epsilon: 0.0,
            tol: 0.0,
            iterations: 0,
            residual: 0.0,
            history: Vec::new(),
        })
    }

    pub fn pass_through() -> Self {
        Self::constant(1.0).expect("1 is positive")
    }

    pub fn support(&self) -> &Support {
        &self.support
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn off_grid(&self) -> OffGrid {
        self.off_grid
    }

    fn mean_value(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn with_off_grid(mut self, rule: OffGrid) -> Self {
        self.off_grid = rule;
        self
    }

    /// Grid points and weights the function was solved on.
    pub(crate) fn nodes_and_weights(&self) -> Option<(Vec<String>, Vec<f64>)> {
        match &self.support {
            Support::Constant => None,
            Support::Interval { nodes, lo, hi } => {
                let w = (hi - lo) / nodes.len() as f64;
                Some((nodes.iter().map(GridPoint::key).collect(), vec![w; nodes.len()]))
            }
            Support::Finite { keys, weights } => Some((keys.clone(), weights.clone())),
        }
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    /// Final residual `max_j |Σ_k w_k ⟨Δ(x_j), Δ(x_k)⟩ - 1|`.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Residual before each update, then the final residual.
    pub fn history(&self) -> &[f64] {
        &self.history
    }

    /// Interpolated value at a real coordinate on interval support.
    pub fn at_coord(&self, x: f64) -> Result<f64> {
        match &self.support {
            Support::Constant => Ok(self.values[0]),
            Support::Interval { nodes, lo, hi } => {
                if !(x >= lo - DOMAIN_SLACK && x <= hi + DOMAIN_SLACK) {
                    return invalid(format!("x = {x} outside normalization hull [{lo}, {hi}]"));
                }
                Ok(interpolate(nodes, &self.values, x).0)
            }
            Support::Finite { .. } => invalid("finite-set normalization has no coordinate lookup"),
        }
    }

    /// Slope of the piecewise-linear interpolant at `x` (zero on constant parts).
    pub fn slope_at(&self, x: f64) -> Result<f64> {
        match &self.support {
            Support::Constant => Ok(0.0),
            Support::Interval { nodes, .. } => {
                self.at_coord(x)?;
                Ok(interpolate(nodes, &self.values, x).1)
            }
            Support::Finite { .. } => invalid("finite-set normalization has no slope"),
        }
    }

    /// Scaling factor `1/n(x)` applied to the encoding.
    pub fn scale_at(&self, x: f64) -> Result<f64> {
        Ok(1.0 / self.at_coord(x)?)
    }

    /// Plain-text table: `key=value` header lines, then `point,value` rows.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("epsilon={:?}\n", self.epsilon));
        out.push_str(&format!("tol={:?}\n", self.tol));
        out.push_str(&format!("iterations={}\n", self.iterations));
        out.push_str(&format!("residual={:?}\n", self.residual));
        out.push_str(match self.off_grid {
            OffGrid::Linear => "off_grid=linear\n",
            OffGrid::Nystrom => "off_grid=nystrom\n",
            OffGrid::Mean => "off_grid=mean\n",
        });
        match &self.support {
            Support::Constant => {
                out.push_str("support=constant\n");
                out.push_str("point,value\n");
                out.push_str(&format!("*,{:?}\n", self.values[0]));
            }
            Support::Interval { nodes, lo, hi } => {
                out.push_str(&format!("support=interval\nlo={lo:?}\nhi={hi:?}\n"));
                out.push_str("point,value\n");
                for (x, v) in nodes.iter().zip(&self.values) {
                    out.push_str(&format!("{x:?},{v:?}\n"));
                }
            }
            Support::Finite { keys, weights } => {
                out.push_str("support=finite\n");
                out.push_str("point,value,weight\n");
                for ((k, v), w) in keys.iter().zip(&self.values).zip(weights) {
                    out.push_str(&format!("{},{v:?},{w:?}\n", escape_key(k)));
                }
            }
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut header: HashMap<String, String> = HashMap::new();
        let mut lines = text.lines();
        for line in lines.by_ref() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if line.starts_with("point,value") {
                break;
            }
            match line.split_once('=') {
                Some((k, v)) => header.insert(k.trim().to_string(), v.trim().to_string()),
                None => return Err(Error::Parse(format!("bad header line {line:?}"))),
            };
        }
        let num = |k: &str| -> Result<f64> {
            header
                .get(k)
                .ok_or_else(|| Error::Parse(format!("missing header {k}")))?
                .parse::<f64>()
                .map_err(|_| Error::Parse(format!("header {k} is not a number")))
        };
        let mut keys = Vec::new();
        let mut values = Vec::new();
        let mut weights = Vec::new();
        for line in lines {
            if line.trim().is_empty() {
                continue;
            }
            let (key, rest) = split_key(line)?;
            let mut cols = rest.split(',');
            let v: f64 = parse_col(cols.next())?;
            if let Some(w) = cols.next() {
                weights.push(parse_col(Some(w))?);
            }
            keys.push(key);
            values.push(v);
        }
        if values.is_empty() {
            return Err(Error::Parse("normalization table has no rows".into()));
        }
        if values.iter().any(|&v| !(v > 0.0 && v.is_finite())) {
            return Err(Error::Parse("normalization values must be positive".into()));
        }
        let support = match header.get("support").map(String::as_str) {
            Some("constant") => Support::Constant,
            Some("interval") => {
                let nodes = keys.iter().map(|k| f64::from_key(k)).collect::<Result<Vec<_>>>()?;
                if nodes.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::Parse("interval nodes must increase".into()));
                }
                Support::Interval { nodes, lo: num("lo")?, hi: num("hi")? }
            }
            Some("finite") => {
                if weights.len() != keys.len() {
                    return Err(Error::Parse("finite support needs a weight column".into()));
                }
                Support::Finite { keys, weights }
            }
            other => return Err(Error::Parse(format!("unknown support {other:?}"))),
        };
        let off_grid = match header.get("off_grid").map(String::as_str) {
            None | Some("linear") => OffGrid::Linear,
            Some("nystrom") => OffGrid::Nystrom,
            Some("mean") => OffGrid::Mean,
            Some(other) => return Err(Error::Parse(format!("unknown off_grid rule {other:?}"))),
        };
        Ok(Self {
            support,
            off_grid,
            values,
            epsilon: num("epsilon")?,
            tol: num("tol")?,
            iterations: num("iterations")? as usize,
            residual: num("residual")?,
            history: Vec::new(),
        })
    }
}

fn escape_key(k: &str) -> String {
    if k.contains(',') || k.contains('"') {
        format!("\"{}\"", k.replace('"', "\"\""))
    } else {
        k.to_string()
    }
}

fn split_key(line: &str) -> Result<(String, &str)> {
    if let Some(rest) = line.strip_prefix('"') {
        let mut key = String::new();
        let mut chars = rest.char_indices().peekable();
        while let Some((i, c)) = chars.next() {
            if c == '"' {
                if let Some(&(_, '"')) = chars.peek() {
                    key.push('"');
                    chars.next();
                    continue;
                }
                let tail = &rest[i + 1..];
                return match tail.strip_prefix(',') {
                    Some(t) => Ok((key, t)),
                    None => Err(Error::Parse(format!("bad row {line:?}"))),
                };
            }
            key.push(c);
        }
        Err(Error::Parse(format!("unterminated quote in {line:?}")))
    } else {
        match line.split_once(',') {
            Some((k, rest)) => Ok((k.to_string(), rest)),
            None => Err(Error::Parse(format!("bad row {line:?}"))),
        }
    }
}

fn parse_col(col: Option<&str>) -> Result<f64> {
    col.ok_or_else(|| Error::Parse("missing column".into()))?
        .trim()
        .parse()
        .map_err(|_| Error::Parse("column is not a number".into()))
}

/// Linear interpolation with flat extension; returns `(value, slope)`.
fn interpolate(nodes: &[f64], values: &[f64], x: f64) -> (f64, f64) {
    let last = nodes.len() - 1;
    if x <= nodes[0] {
        return (values[0], 0.0);
    }
    if x >= nodes[last] {
        return (values[last], 0.0);
    }
    let j = nodes.partition_point(|&t| t <= x) - 1;
    let (x0, x1) = (nodes[j], nodes[j + 1]);
    let slope = (values[j + 1] - values[j]) / (x1 - x0);
    (values[j] + slope * (x - x0), slope)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    /// Constant added to every encoding component before solving.
    pub epsilon: f64,
    /// Geometric damping weight `ω ∈ (0, 1]`.
    pub damping: f64,
    pub off_grid: OffGrid,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { tol: 1e-3, max_iter: 50, epsilon: 0.0, damping: 0.5, off_grid: OffGrid::Nystrom }
    }
}

impl SolverConfig {
    /// Defaults with the offset recommended for sequence sets.
    pub fn for_sequences() -> Self {
        Self { epsilon: 0.04, ..Self::default() }
    }
}

/// `G_jk = ⟨a_j, a_k⟩` (D-scaled) for a list of equal-length vectors.
pub(crate) fn gram(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = rows.len();
    let d = rows.first().map_or(1, Vec::len) as f64;
    let mut g = vec![vec![0.0; m]; m];
    for j in 0..m {
        for k in j..m {
            let v = dot(&rows[j], &rows[k]) / d;
            g[j][k] = v;
            g[k][j] = v;
        }
    }
    g
}

/// Solve the discrete normalization equation on `grid`.
pub fn solve_normalization<E>(
    encoder: &E,
    grid: &QuadratureGrid<E::Point>,
    cfg: &SolverConfig,
) -> Result<NormalizationFn>
where
    E: Encoder,
    E::Point: GridPoint,
{
    if !(cfg.tol > 0.0) {
        return invalid("tolerance must be positive");
    }
    if !(cfg.damping > 0.0 && cfg.damping <= 1.0) {
        return invalid("damping must lie in (0, 1]");
    }
    if !(cfg.epsilon >= 0.0 && cfg.epsilon.is_finite()) {
        return invalid("epsilon must be non-negative");
    }
    let support = match grid.layout() {
        GridLayout::Midpoint { lo, hi } => {
            let nodes = grid
                .points()
                .iter()
                .map(|p| p.coord().ok_or_else(|| Error::InvalidInput("interval grid point without coordinate".into())))
                .collect::<Result<Vec<f64>>>()?;
            Support::Interval { nodes, lo, hi }
        }
        GridLayout::Finite => {
            let keys: Vec<String> = grid.points().iter().map(GridPoint::key).collect();
            let mut seen = std::collections::HashSet::new();
            if let Some(k) = keys.iter().find(|k| !seen.insert(k.as_str())) {
                return invalid(format!("duplicate grid point {k:?}"));
            }
            Support::Finite { keys, weights: grid.weights().to_vec() }
        }
    };
    let rows = grid
        .points()
        .iter()
        .map(|p| Ok(encoder.encode(p)?.offset(cfg.epsilon).into_values()))
        .collect::<Result<Vec<_>>>()?;
    let g = gram(&rows);
    let w = grid.weights();
    let m = rows.len();

    let mut n = vec![1.0; m];
    let mut history = Vec::new();
    let image = |n: &[f64]| -> Vec<f64> {
        (0..m)
            .map(|j| (0..m).map(|k| w[k] * g[j][k] / n[k]).sum())
            .collect()
    };
    let mut updates = 0;
    loop {
        let s = image(&n);
        let residual = s
            .iter()
            .zip(&n)
            .map(|(s, n)| (s / n - 1.0).abs())
            .fold(0.0, f64::max);
        history.push(residual);
        if residual <= cfg.tol {
            return Ok(NormalizationFn {
                support,
                off_grid: cfg.off_grid,
                values: n,
                epsilon: cfg.epsilon,
                tol: cfg.tol,
                iterations: updates,
                residual,
                history,
            });
        }
        if updates == cfg.max_iter {
            return Err(Error::NotConverged { iterations: updates, residual });
        }
        if let Some(index) = s.iter().position(|&v| !(v > 0.0)) {
            return Err(Error::Unstable { index, iteration: updates + 1 });
        }
        for (nj, sj) in n.iter_mut().zip(&s) {
            *nj = nj.powf(1.0 - cfg.damping) * sj.powf(cfg.damping);
        }
        updates += 1;
    }
}

/// A normalized encoding `x ↦ Δ(x)`.
pub trait Embedding {
    type Point: Clone + Debug;

    fn dims(&self) -> usize;

    /// Stable hash identifying the encoder and its normalization.
    fn id(&self) -> u64;

    fn seed(&self) -> u64;

    fn delta(&self, x: &Self::Point) -> Result<Hypervector>;
}

impl<T: Embedding + ?Sized> Embedding for &T {
    type Point = T::Point;

    fn dims(&self) -> usize {
        (**self).dims()
    }

    fn id(&self) -> u64 {
        (**self).id()
    }

    fn seed(&self) -> u64 {
        (**self).seed()
    }

    fn delta(&self, x: &Self::Point) -> Result<Hypervector> {
        (**self).delta(x)
    }
}

/// An encoder paired with its normalization function.
#[derive(Debug, Clone)]
pub struct Normalized<E: Encoder> {
    encoder: E,
    nfn: NormalizationFn,
    /// Finite support only: `Σ_j w_j Δ(x_j)` and the key → index map.
    ones: Option<Hypervector>,
    index: HashMap<String, usize>,
}

impl<E> Normalized<E>
where
    E: Encoder,
    E::Point: GridPoint,
{
    pub fn new(encoder: E, nfn: NormalizationFn) -> Result<Self> {
        let mut index = HashMap::new();
        let mut ones = None;
        if let Support::Finite { keys, .. } = &nfn.support {
            for (j, key) in keys.iter().enumerate() {
                index.insert(key.clone(), j);
            }
        }
        let needs_ones = nfn.off_grid == OffGrid::Nystrom && !matches!(nfn.support, Support::Constant);
        if let (true, Some((keys, weights))) = (needs_ones, nfn.nodes_and_weights()) {
            let mut acc = vec![0.0; encoder.dims()];
            for (j, (key, w)) in keys.iter().zip(&weights).enumerate() {
                let p = E::Point::from_key(key)?;
                let v = encoder.encode(&p)?.offset(nfn.epsilon);
                let c = w / nfn.values[j];
                for (a, x) in acc.iter_mut().zip(v.values()) {
                    *a += c * x;
                }
            }
            ones = Some(Hypervector::new(acc)?);
        }
        Ok(Self { encoder, nfn, ones, index })
    }

    /// Solve the normalization on `grid` and wrap the encoder.
    pub fn solve(encoder: E, grid: &QuadratureGrid<E::Point>, cfg: &SolverConfig) -> Result<Self> {
        let nfn = solve_normalization(&encoder, grid, cfg)?;
        Self::new(encoder, nfn)
    }

    /// Leave the encoder unnormalized (`n ≡ 1`).
    pub fn pass_through(encoder: E) -> Self {
        Self { encoder, nfn: NormalizationFn::pass_through(), ones: None, index: HashMap::new() }
    }

    pub fn encoder(&self) -> &E {
        &self.encoder
    }

    pub fn normalization(&self) -> &NormalizationFn {
        &self.nfn
    }

    /// `n(x)` for any point the embedding accepts.
    pub fn n_at(&self, x: &E::Point) -> Result<f64> {
        match &self.nfn.support {
            Support::Constant => Ok(self.nfn.values[0]),
            Support::Interval { .. } => {
                let c = match x.coord() {
                    Some(c) => c,
                    None => return invalid("interval normalization needs a real point"),
                };
                let linear = self.nfn.at_coord(c)?;
                match (&self.ones, self.nfn.off_grid) {
                    (Some(ones), _) => self.extend(x, ones),
                    (None, OffGrid::Mean) => Ok(self.nfn.mean_value()),
                    (None, _) => Ok(linear),
                }
            }
            Support::Finite { .. } => {
                if let Some(&j) = self.index.get(&x.key()) {
                    return Ok(self.nfn.values[j]);
                }
                match (&self.ones, self.nfn.off_grid) {
                    (Some(ones), _) => self.extend(x, ones),
                    (None, OffGrid::Mean) => Ok(self.nfn.mean_value()),
                    (None, _) => invalid(format!("point {:?} is not in the normalization set", x.key())),
                }
            }
        }
    }

    fn extend(&self, x: &E::Point, ones: &Hypervector) -> Result<f64> {
        let raw = self.encoder.encode(x)?.offset(self.nfn.epsilon);
        let n = crate::hypervector::inner(&raw, ones)?;
        if !(n > 0.0) {
            return invalid(format!(
                "point {:?} has no positive overlap with the normalization set",
                x.key()
            ));
        }
        Ok(n)
    }

    /// The unit vector `Σ_j w_j Δ(x_j)` when the off-grid rule uses it.
    pub fn unit_vector(&self) -> Option<&Hypervector> {
        self.ones.as_ref()
    }
}

impl<E> Embedding for Normalized<E>
where
    E: Encoder,
    E::Point: GridPoint,
{
    type Point = E::Point;

    fn dims(&self) -> usize {
        self.encoder.dims()
    }

    fn id(&self) -> u64 {
        let mut h = seeding::combine(self.encoder.id(), seeding::fnv1a(b"normalized"));
        h = seeding::combine(h, self.nfn.epsilon.to_bits());
        h = seeding::combine(h, self.nfn.off_grid as u64);
        for v in &self.nfn.values {
            h = seeding::combine(h, v.to_bits());
        }
        h
    }

    fn seed(&self) -> u64 {
        self.encoder.seed()
    }

    fn delta(&self, x: &E::Point) -> Result<Hypervector> {
        let n = self.n_at(x)?;
        Ok(self.encoder.encode(x)?.offset(self.nfn.epsilon).scale(1.0 / n))
    }
}

/// Encoders defined on a real interval.
pub trait RealLine: Encoder {
    fn interval(&self) -> Option<&IntervalEncoder>;
    fn point(x: f64) -> Self::Point;
}

impl RealLine for IntervalEncoder {
    fn interval(&self) -> Option<&IntervalEncoder> {
        Some(self)
    }

    fn point(x: f64) -> f64 {
        x
    }
}

impl RealLine for AnyEncoder {
    fn interval(&self) -> Option<&IntervalEncoder> {
        self.as_interval()
    }

    fn point(x: f64) -> Value {
        Value::Real(x)
    }
}

/// Finite-difference step as a fraction of the length scale.
pub const FD_STEP_FRACTION: f64 = 1.0 / 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivativeMethod {
    /// Closed form; real-cosine encoders only.
    Analytic,
    /// Five-point central difference of `Δ` with step `l/50`.
    FiniteDifference,
    /// Analytic where available, finite difference otherwise.
    Auto,
}

impl<E> Normalized<E>
where
    E: RealLine,
    E::Point: GridPoint,
{
    fn line(&self) -> Result<&IntervalEncoder> {
        self.encoder
            .interval()
            .ok_or_else(|| Error::Unsupported("derivatives need an interval encoder".into()))
    }

    /// `dᵏΔ/dxᵏ` at `x` for `order` 1 or 2.
    pub fn delta_derivative(&self, x: f64, order: u32, method: DerivativeMethod) -> Result<Hypervector> {
        if order == 0 || order > 2 {
            return Err(Error::Unsupported(format!("derivative order {order}; supported orders are 1 and 2")));
        }
        let line = self.line()?;
        let analytic_ok = line.flavor() == crate::encoders::IntervalFlavor::RealCosine;
        let use_analytic = match method {
            DerivativeMethod::Analytic if !analytic_ok => {
                return Err(Error::Unsupported("analytic derivatives need the real-cosine flavor".into()))
            }
            DerivativeMethod::Analytic => true,
            DerivativeMethod::FiniteDifference => false,
            DerivativeMethod::Auto => analytic_ok,
        };
        if use_analytic {
            self.analytic_derivative(line, x, order)
        } else {
            self.fd_derivative(line, x, order)
        }
    }

    fn analytic_derivative(&self, line: &IntervalEncoder, x: f64, order: u32) -> Result<Hypervector> {
        let n = self.n_at(&E::point(x))?;
        let phi = line.encode(&x)?.offset(self.nfn.epsilon);
        let d1 = line.encode_derivative(x, 1)?;
        let d2 = if order == 2 { Some(line.encode_derivative(x, 2)?) } else { None };
        let (dn, ddn) = match &self.ones {
            Some(ones) => (
                crate::hypervector::inner(&d1, ones)?,
                match &d2 {
                    Some(d2) => crate::hypervector::inner(d2, ones)?,
                    None => 0.0,
                },
            ),
            // piecewise linear: n'' = 0 inside each cell
            None if self.nfn.off_grid == OffGrid::Mean => (0.0, 0.0),
            None => (self.nfn.slope_at(x)?, 0.0),
        };
        let out = match d2 {
            // (φ/n)' = φ'/n - φ n'/n²
            None => d1.scale(1.0 / n).add_scaled(-dn / (n * n), &phi)?,
            // (φ/n)'' = φ''/n - 2φ'n'/n² - φ n''/n² + 2φ n'²/n³
            Some(d2) => d2
                .scale(1.0 / n)
                .add_scaled(-2.0 * dn / (n * n), &d1)?
                .add_scaled(2.0 * dn * dn / (n * n * n) - ddn / (n * n), &phi)?,
        };
        Ok(out)
    }

    fn fd_derivative(&self, line: &IntervalEncoder, x: f64, order: u32) -> Result<Hypervector> {
        let h = line.length_scale() * FD_STEP_FRACTION;
        if !line.contains(x) {
            return invalid(format!("x = {x} outside [{}, {}]", line.lo(), line.hi()));
        }
        // Keep the stencil inside the domain.
        let c = x.clamp(line.lo() + 2.0 * h, line.hi() - 2.0 * h);
        let at = |t: f64| self.delta(&E::point(c + t * h));
        let (m2, m1, p1, p2) = (at(-2.0)?, at(-1.0)?, at(1.0)?, at(2.0)?);
        let d = m2.dims();
        let values: Vec<f64> = if order == 1 {
            (0..d)
                .map(|i| (m2.values()[i] - 8.0 * m1.values()[i] + 8.0 * p1.values()[i] - p2.values()[i]) / (12.0 * h))
                .collect()
        } else {
            let z = at(0.0)?;
            (0..d)
                .map(|i| {
                    (-m2.values()[i] + 16.0 * m1.values()[i] - 30.0 * z.values()[i] + 16.0 * p1.values()[i]
                        - p2.values()[i])
                        / (12.0 * h * h)
                })
                .collect()
        };
        Hypervector::new(values)
    }
}

/// Two embeddings combined by binding: `Δ(x, y) = Δ₁(x) ⊗ Δ₂(y)`.
#[derive(Debug, Clone)]
pub struct Product<A, B> {
    first: A,
    second: B,
}

impl<A: Embedding, B: Embedding> Product<A, B> {
    pub fn new(first: A, second: B) -> Result<Self> {
        if first.dims() != second.dims() {
            return Err(Error::DimensionMismatch(first.dims(), second.dims()));
        }
        if first.seed() == second.seed() {
            return invalid("product factors share a seed; their encodings would not be independent");
        }
        Ok(Self { first, second })
    }

    pub fn first(&self) -> &A {
        &self.first
    }

    pub fn second(&self) -> &B {
        &self.second
    }
}

impl<A: Embedding, B: Embedding> Embedding for Product<A, B> {
    type Point = (A::Point, B::Point);

    fn dims(&self) -> usize {
        self.first.dims()
    }

    fn id(&self) -> u64 {
        seeding::combine(self.first.id(), self.second.id())
    }

    fn seed(&self) -> u64 {
        seeding::combine(self.first.seed(), self.second.seed())
    }

    fn delta(&self, x: &Self::Point) -> Result<Hypervector> {
        bind(&self.first.delta(&x.0)?, &self.second.delta(&x.1)?)
    }
}
