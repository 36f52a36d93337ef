//! Dataset generators and experiment runners that emit plot-ready CSV.
//!
//! Every experiment is a pure function of its configuration and seeds. A
//! replicate with seed `s` draws its encoder from seed `s` and its data from
//! seed `s + DATA_SEED_OFFSET`, so encoder and data randomness never share a
//! stream.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::IndexedRandom;
use serde::{Deserialize, Serialize};

use crate::classification::{
    accuracy, bipolar, classify_all, classify_generative, fit_closed_form_classifier, fit_function_classifier,
    fit_generative_classifier, fit_prototypes, label_embedding, LogisticQuadConfig, PrototypeVariant,
};
use crate::datasets::{
    gap_clusters, interval_d1, interval_d2, linspace, sequence_families, Bivariate2Mode, Mixture1d, NoisyCurve,
};
use crate::distributions::{deconvolve, joint_eval, mh_sample, mmd, GaussianStep, MHConfig};
use crate::empirical::{density_eval, empirical_distribution, empirical_function, DensityPolicy, Sample};
use crate::encoders::{AnyEncoder, DomainKind, Encoder, EncoderSpec, FlavorKind, IntervalEncoder, SequenceEncoder};
use crate::error::{invalid, Error, Result};
use crate::hypervector::sign_of;
use crate::normalization::{Embedding, Normalized, Product, QuadratureGrid, SolverConfig};
use crate::regression::{
    fit_physics, fit_ridge, label_grid_for, lambda_ladder, tune_lambda, DesignMatrix, LabelGrid, PhysicsSpec,
};
use crate::seeding;
use crate::transform::{forward_distribution, inverse_eval, TransformVec};

/// Added to a replicate seed to get its data seed.
pub const DATA_SEED_OFFSET: u64 = 100;

/// Synthetic datasets that can be written to CSV.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DatasetKind {
    D1,
    D2,
    Mixture1d,
    Bivariate2mode,
    Heteroscedastic,
    ExponentialNoise,
    SequenceFamilies,
}

impl DatasetKind {
    pub const ALL: [DatasetKind; 7] = [
        Self::D1,
        Self::D2,
        Self::Mixture1d,
        Self::Bivariate2mode,
        Self::Heteroscedastic,
        Self::ExponentialNoise,
        Self::SequenceFamilies,
    ];

    /// Size used when none is given.
    pub fn default_size(self) -> usize {
        match self {
            Self::D1 | Self::D2 => 100,
            Self::Mixture1d => 400,
            Self::Bivariate2mode => 250,
            Self::Heteroscedastic => 50,
            Self::ExponentialNoise => 200,
            Self::SequenceFamilies => 120,
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::D1 => "d1",
            Self::D2 => "d2",
            Self::Mixture1d => "mixture-1d",
            Self::Bivariate2mode => "bivariate-2mode",
            Self::Heteroscedastic => "heteroscedastic",
            Self::ExponentialNoise => "exponential-noise",
            Self::SequenceFamilies => "sequence-families",
        })
    }
}

impl FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.to_string() == s)
            .ok_or_else(|| Error::Parse(format!("unknown dataset kind {s:?}")))
    }
}

/// A named CSV file held in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvFile {
    pub name: String,
    pub text: String,
}

fn write_csv(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Parse(e.to_string()))
}

fn pairs_csv(xs: &[f64], ys: &[f64]) -> Result<String> {
    write_csv(&["x", "y"], xs.iter().zip(ys).map(|(x, y)| vec![x.to_string(), y.to_string()]))
}

/// Files for one dataset: `<kind>.csv`, or `<kind>-a.csv` and `<kind>-b.csv`
/// for the two sequence families. `d1` and `d2` ignore size and seed.
pub fn gen_dataset(kind: DatasetKind, size: Option<usize>, seed: u64) -> Result<Vec<CsvFile>> {
    let m = size.unwrap_or(kind.default_size());
    if m == 0 {
        return invalid("dataset size must be positive");
    }
    let one = |text: String| Ok(vec![CsvFile { name: format!("{kind}.csv"), text }]);
    match kind {
        DatasetKind::D1 => {
            let (xs, ys) = interval_d1();
            one(pairs_csv(&xs, &ys)?)
        }
        DatasetKind::D2 => {
            let (xs, ys) = interval_d2();
            one(pairs_csv(&xs, &ys)?)
        }
        DatasetKind::Mixture1d => one(Sample::new(Mixture1d::standard().sample(m, seed))?.to_csv()?),
        DatasetKind::Bivariate2mode => {
            let (xs, ys): (Vec<f64>, Vec<f64>) = Bivariate2Mode::standard().sample(m, seed).into_iter().unzip();
            one(pairs_csv(&xs, &ys)?)
        }
        DatasetKind::Heteroscedastic => {
            let (xs, ys) = NoisyCurve::heteroscedastic().sample(m, seed);
            one(pairs_csv(&xs, &ys)?)
        }
        DatasetKind::ExponentialNoise => {
            let (xs, ys) = NoisyCurve::exponential().sample(m, seed);
            one(pairs_csv(&xs, &ys)?)
        }
        DatasetKind::SequenceFamilies => {
            let (a, b) = sequence_families(m, seed);
            Ok(vec![
                CsvFile { name: format!("{kind}-a.csv"), text: Sample::new(a)?.to_csv()? },
                CsvFile { name: format!("{kind}-b.csv"), text: Sample::new(b)?.to_csv()? },
            ])
        }
    }
}

/// Experiments that reproduce a table or figure panel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentId {
    Table1Synthetic,
    Table2,
    FigDensity,
    FigFunction,
    FigJoint,
    FigRegression,
    FigPhysics,
    SamplerDemo,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 8] = [
        Self::Table1Synthetic,
        Self::Table2,
        Self::FigDensity,
        Self::FigFunction,
        Self::FigJoint,
        Self::FigRegression,
        Self::FigPhysics,
        Self::SamplerDemo,
    ];

    /// Encoder used when the configuration does not give one.
    pub fn default_encoder(self) -> EncoderSpec {
        match self {
            Self::Table1Synthetic => EncoderSpec {
                domain: DomainKind::Sequence,
                flavor: Some(FlavorKind::IidSymbol),
                length_scale: None,
                dims: Some(10_000),
                seed: None,
                lo: None,
                hi: None,
                symbols: None,
                alphabet: None,
                k: Some(3),
                factors: None,
            },
            Self::FigPhysics => EncoderSpec::interval(0.0, 1.0, 0.1, FlavorKind::RealCosine, 5_000, 0),
            _ => EncoderSpec::interval(0.0, 1.0, 0.1, FlavorKind::BipolarSign, 20_000, 0),
        }
    }

    fn expects(self) -> DomainKind {
        match self {
            Self::Table1Synthetic => DomainKind::Sequence,
            _ => DomainKind::Interval,
        }
    }
}

impl fmt::Display for ExperimentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Table1Synthetic => "table1-synthetic",
            Self::Table2 => "table2",
            Self::FigDensity => "fig-density",
            Self::FigFunction => "fig-function",
            Self::FigJoint => "fig-joint",
            Self::FigRegression => "fig-regression",
            Self::FigPhysics => "fig-physics",
            Self::SamplerDemo => "sampler-demo",
        })
    }
}

impl FromStr for ExperimentId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.to_string() == s)
            .ok_or_else(|| Error::Parse(format!("unknown experiment {s:?}")))
    }
}

/// Experiment configuration, read from TOML:
///
/// ```toml
/// experiment = "table2"
/// seeds = [0, 1, 2, 3, 4]
/// out = "reports/table2"
///
/// [encoder]
/// domain = "interval"
/// flavor = "bipolar-sign"
/// length_scale = 0.1
/// dims = 20000
/// ```
///
/// The encoder block's seed is ignored; each replicate uses its own seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub encoder: Option<EncoderSpec>,
    #[serde(default)]
    pub out: Option<PathBuf>,
    /// Sample CSV replacing the generated data (fig-density, fig-function,
    /// fig-regression).
    #[serde(default)]
    pub data: Option<PathBuf>,
    /// Sample size replacing the experiment's default.
    #[serde(default)]
    pub size: Option<usize>,
}

impl ExperimentConfig {
    pub fn new(experiment: ExperimentId, seeds: Vec<u64>) -> Self {
        Self { experiment, seeds, encoder: None, out: None, data: None, size: None }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Parse(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return invalid("seeds must be nonempty");
        }
        if let Some(path) = &self.data {
            if !path.is_file() {
                return invalid(format!("data file {} does not exist", path.display()));
            }
            if !matches!(self.experiment, ExperimentId::FigDensity | ExperimentId::FigFunction | ExperimentId::FigRegression) {
                return invalid(format!("{} does not read a data file", self.experiment));
            }
        }
        if self.size == Some(0) {
            return invalid("size must be positive");
        }
        if let Some(spec) = &self.encoder {
            if spec.domain != self.experiment.expects() {
                return invalid(format!("{} needs a {:?} encoder", self.experiment, self.experiment.expects()));
            }
        }
        Ok(())
    }

    /// Encoder for replicate `seed`.
    pub fn encoder_for(&self, seed: u64) -> EncoderSpec {
        let mut spec = self.encoder.clone().unwrap_or_else(|| self.experiment.default_encoder());
        spec.seed = Some(seed);
        spec
    }
}

/// Provenance of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub experiment: ExperimentId,
    pub seeds: Vec<u64>,
    pub encoder: EncoderSpec,
    /// Final normalization residual per replicate.
    pub residuals: Vec<f64>,
    pub crate_version: String,
    /// FNV-1a of the aggregate CSV, hex.
    pub aggregate_hash: String,
}

/// Output of one experiment run.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    /// One or more files per seed, names suffixed with the seed.
    pub per_seed: Vec<CsvFile>,
    /// Per-seed metrics side by side with their mean and standard deviation.
    pub aggregate: CsvFile,
    pub manifest: Manifest,
}

impl Report {
    /// Write every file into `dir`, creating it if needed.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        fs::create_dir_all(dir)?;
        let manifest = CsvFile {
            name: "manifest.toml".into(),
            text: toml::to_string(&self.manifest).map_err(|e| Error::Parse(e.to_string()))?,
        };
        let mut written = Vec::new();
        for file in self.per_seed.iter().chain([&self.aggregate, &manifest]) {
            let path = dir.join(&file.name);
            fs::write(&path, &file.text)?;
            written.push(path);
        }
        Ok(written)
    }
}

/// Named metrics of one replicate.
type Metrics = Vec<(String, f64)>;

struct Replicate {
    files: Vec<CsvFile>,
    metrics: Metrics,
    residual: f64,
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() > 1 {
        values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

fn aggregate_csv(name: &str, seeds: &[u64], metrics: &[Metrics]) -> Result<CsvFile> {
    let mut header = vec!["metric".to_string()];
    header.extend(seeds.iter().map(|s| format!("seed_{s}")));
    header.extend(["mean".to_string(), "sd".to_string()]);
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = metrics[0].iter().enumerate().map(|(k, (label, _))| {
        let values: Vec<f64> = metrics.iter().map(|m| m[k].1).collect();
        let (mean, sd) = mean_sd(&values);
        let mut row = vec![label.clone()];
        row.extend(values.iter().map(|v| v.to_string()));
        row.extend([mean.to_string(), sd.to_string()]);
        row
    });
    Ok(CsvFile { name: format!("{name}-aggregate.csv"), text: write_csv(&header_refs, rows)? })
}

/// Run every replicate of `cfg` and collect the files.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    let data = match &cfg.data {
        Some(path) => Some(Sample::<f64>::from_csv(fs::File::open(path)?)?),
        None => None,
    };
    let mut per_seed = Vec::new();
    let mut metrics = Vec::new();
    let mut residuals = Vec::new();
    for &seed in &cfg.seeds {
        let spec = cfg.encoder_for(seed);
        let rep = run_replicate(cfg, &spec, seed, data.as_ref())
            .map_err(|e| Error::InvalidInput(format!("{} seed {seed}: {e}", cfg.experiment)))?;
        per_seed.extend(rep.files.into_iter().map(|f| CsvFile { name: format!("{}-seed{seed}.csv", f.name), text: f.text }));
        metrics.push(rep.metrics);
        residuals.push(rep.residual);
    }
    let name = cfg.experiment.to_string();
    let aggregate = aggregate_csv(&name, &cfg.seeds, &metrics)?;
    let manifest = Manifest {
        experiment: cfg.experiment,
        seeds: cfg.seeds.clone(),
        encoder: cfg.encoder_for(cfg.seeds[0]),
        residuals,
        crate_version: env!("CARGO_PKG_VERSION").to_string(),
        aggregate_hash: format!("{:016x}", seeding::fnv1a(aggregate.text.as_bytes())),
    };
    Ok(Report { per_seed, aggregate, manifest })
}

fn interval_of(spec: &EncoderSpec) -> Result<IntervalEncoder> {
    match spec.build()? {
        AnyEncoder::Interval(e) => Ok(e),
        _ => invalid("expected an interval encoder"),
    }
}

type Line = Normalized<IntervalEncoder>;

fn normalized(enc: IntervalEncoder) -> Result<Line> {
    let grid = QuadratureGrid::for_length_scale(enc.lo(), enc.hi(), enc.length_scale())?;
    Normalized::solve(enc, &grid, &SolverConfig::default())
}

/// An interval encoder over `[lo, hi]` sharing flavor, length scale and dims
/// with `like`, on its own seed.
fn companion(like: &IntervalEncoder, lo: f64, hi: f64, seed: u64) -> Result<Line> {
    normalized(IntervalEncoder::new(lo, hi, like.length_scale(), like.dims(), seed, like.flavor())?)
}

fn residual(emb: &Line) -> f64 {
    emb.normalization().residual()
}

fn run_replicate(cfg: &ExperimentConfig, spec: &EncoderSpec, seed: u64, data: Option<&Sample<f64>>) -> Result<Replicate> {
    let data_seed = seed + DATA_SEED_OFFSET;
    match cfg.experiment {
        ExperimentId::Table1Synthetic => table1(spec, cfg.size.unwrap_or(120), data_seed),
        ExperimentId::Table2 => table2(spec),
        ExperimentId::FigDensity => fig_density(spec, data, cfg.size.unwrap_or(400), data_seed),
        ExperimentId::FigFunction => fig_function(spec, data, cfg.size.unwrap_or(100), data_seed),
        ExperimentId::FigJoint => fig_joint(spec, cfg.size.unwrap_or(250), data_seed),
        ExperimentId::FigRegression => fig_regression(spec, data, cfg.size.unwrap_or(50), data_seed),
        ExperimentId::FigPhysics => fig_physics(spec),
        ExperimentId::SamplerDemo => sampler_demo(spec, cfg.size.unwrap_or(10_000), data_seed),
    }
}

fn file(name: &str, text: String) -> CsvFile {
    CsvFile { name: name.to_string(), text }
}

/// Column labels of the Table 2 grid, in its order.
pub const TABLE2_MODELS: [&str; 9] = ["[S+]-[S-]", "S+-S-", "[S+-S-]", "F", "[F]", "P", "[P]", "M", "[M]"];

/// One Table 2 row: accuracies of the nine models on one dataset.
pub fn table2_row(enc: &IntervalEncoder, emb: &Line, label_seed: u64, xs: &[f64], ys: &[f64]) -> Result<[f64; 9]> {
    let sample = Sample::labeled(xs.to_vec(), ys.to_vec())?;
    let acc = |v: &crate::hypervector::Hypervector| -> Result<f64> { Ok(accuracy(&classify_all(v, emb, xs)?, ys)) };
    let mut row = [0.0; 9];
    for (k, variant) in [PrototypeVariant::NormEach, PrototypeVariant::RawDiff, PrototypeVariant::NormDiff].into_iter().enumerate() {
        row[k] = acc(&fit_prototypes(enc, &sample, variant)?.model())?;
    }
    let f = fit_function_classifier(emb, &sample, &DensityPolicy::for_length_scale(enc.length_scale())?)?;
    row[3] = acc(f.vec())?;
    row[4] = acc(bipolar(&f).vec())?;
    let labels = label_embedding(enc.dims(), label_seed)?;
    let product = Product::new(emb, &labels)?;
    let joint = fit_generative_classifier(&product, &sample)?;
    let gen_acc = |t: &TransformVec| -> Result<f64> {
        let pred = xs.iter().map(|x| classify_generative(&product, t, x)).collect::<Result<Vec<_>>>()?;
        Ok(accuracy(&pred, ys))
    };
    row[5] = gen_acc(&joint)?;
    row[6] = gen_acc(&bipolar(&joint))?;
    let closed = fit_closed_form_classifier(&DesignMatrix::from_sample(emb, &sample)?, &LogisticQuadConfig::default())?;
    row[7] = acc(closed.vector())?;
    row[8] = acc(&sign_of(closed.vector()))?;
    Ok(row)
}

/// Label encoder seed paired with input encoder seed `seed`.
pub fn label_seed(seed: u64) -> u64 {
    seed + 1000
}

fn table2(spec: &EncoderSpec) -> Result<Replicate> {
    let enc = interval_of(spec)?;
    let emb = normalized(enc.clone())?;
    let seed = enc.seed();
    let mut rows = Vec::new();
    let mut metrics = Vec::new();
    for (name, (xs, ys)) in [("D1", interval_d1()), ("D2", interval_d2())] {
        let row = table2_row(&enc, &emb, label_seed(seed), &xs, &ys)?;
        for (model, acc) in TABLE2_MODELS.iter().zip(row) {
            metrics.push((format!("{name} {model}"), acc));
        }
        let mut cells = vec![name.to_string()];
        cells.extend(row.iter().map(|a| a.to_string()));
        rows.push(cells);
    }
    let mut header = vec!["dataset"];
    header.extend(TABLE2_MODELS);
    Ok(Replicate { files: vec![file("table2", write_csv(&header, rows)?)], metrics, residual: residual(&emb) })
}

fn interior_mae(rows: &[(f64, f64, f64)]) -> f64 {
    let inside: Vec<f64> = rows.iter().filter(|r| (0.2..=0.8).contains(&r.0)).map(|r| (r.1 - r.2).abs()).collect();
    inside.iter().sum::<f64>() / inside.len().max(1) as f64
}

fn triples_csv(rows: &[(f64, f64, f64)]) -> Result<String> {
    write_csv(&["x", "true", "estimated"], rows.iter().map(|r| vec![r.0.to_string(), r.1.to_string(), r.2.to_string()]))
}

fn fig_density(spec: &EncoderSpec, data: Option<&Sample<f64>>, m: usize, data_seed: u64) -> Result<Replicate> {
    let emb = normalized(interval_of(spec)?)?;
    let mix = Mixture1d::standard();
    let sample = match data {
        Some(s) => Sample::new(s.inputs().to_vec())?,
        None => Sample::new(mix.sample(m, data_seed))?,
    };
    let p = empirical_distribution(&emb, &sample)?;
    let policy = DensityPolicy::new(true, 1e-12)?;
    let rows = linspace(0.0, 1.0, 201)
        .into_iter()
        .map(|x| Ok((x, mix.pdf(x), density_eval(&emb, &p, &x, &policy)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Replicate {
        files: vec![file("fig-density", triples_csv(&rows)?)],
        metrics: vec![("interior mean absolute error".into(), interior_mae(&rows))],
        residual: residual(&emb),
    })
}

fn fig_function(spec: &EncoderSpec, data: Option<&Sample<f64>>, m: usize, data_seed: u64) -> Result<Replicate> {
    let enc = interval_of(spec)?;
    let l = enc.length_scale();
    let emb = normalized(enc)?;
    let curve = NoisyCurve::homoscedastic(0.1);
    let sample = match data {
        Some(s) => s.clone(),
        None => {
            let (xs, ys) = curve.sample(m, data_seed);
            Sample::labeled(xs, ys)?
        }
    };
    let f = empirical_function(&emb, &sample, &DensityPolicy::for_length_scale(l)?)?;
    let rows = linspace(0.0, 1.0, 201)
        .into_iter()
        .map(|x| Ok((x, curve.mean(x), inverse_eval(&emb, &f, &x)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(Replicate {
        files: vec![file("fig-function", triples_csv(&rows)?)],
        metrics: vec![("interior mean absolute error".into(), interior_mae(&rows))],
        residual: residual(&emb),
    })
}

fn fig_joint(spec: &EncoderSpec, m: usize, data_seed: u64) -> Result<Replicate> {
    let enc = interval_of(spec)?;
    let ex = normalized(enc.clone())?;
    let ey = companion(&enc, 0.0, 1.0, label_seed(enc.seed()))?;
    let product = Product::new(&ex, &ey)?;
    let dist = Bivariate2Mode::standard();
    let p = empirical_distribution(&product, &Sample::new(dist.sample(m, data_seed))?)?;
    let grid = linspace(0.0, 1.0, 21);
    let mut rows = Vec::new();
    let mut errors = Vec::new();
    for &x in &grid {
        for &y in &grid {
            let est = joint_eval(&product, &p, &(x, y))?;
            let truth = dist.pdf(x, y);
            if (0.2..=0.8).contains(&x) && (0.2..=0.8).contains(&y) {
                errors.push((est.max(0.0) - truth).abs());
            }
            rows.push(vec![x.to_string(), y.to_string(), truth.to_string(), est.to_string()]);
        }
    }
    Ok(Replicate {
        files: vec![file("fig-joint", write_csv(&["x", "y", "true", "estimated"], rows)?)],
        metrics: vec![("interior mean absolute error".into(), errors.iter().sum::<f64>() / errors.len() as f64)],
        residual: residual(&ex).max(residual(&ey)),
    })
}

/// Label domain of the regression figure.
pub const LABEL_DOMAIN: (f64, f64) = (-1.0, 3.0);

fn fig_regression(spec: &EncoderSpec, data: Option<&Sample<f64>>, m: usize, data_seed: u64) -> Result<Replicate> {
    let enc = interval_of(spec)?;
    let ex = normalized(enc.clone())?;
    let ey = companion(&enc, LABEL_DOMAIN.0, LABEL_DOMAIN.1, label_seed(enc.seed()))?;
    let curve = NoisyCurve::heteroscedastic();
    let sample = match data {
        Some(s) => s.clone(),
        None => {
            let (xs, ys) = curve.sample(m, data_seed);
            Sample::labeled(xs, ys)?
        }
    };
    let labels = sample.labels().ok_or_else(|| Error::InvalidInput("regression data needs labels".into()))?;
    let design = DesignMatrix::from_sample(&ex, &sample)?;
    let (lambda, loo_rmse) = tune_lambda(&design, &lambda_ladder())?;
    let ridge = fit_ridge(&design, lambda)?;
    let product = Product::new(&ex, &ey)?;
    let joint = crate::regression::fit_generative_regressor(&product, &sample)?;
    let grid = LabelGrid::new(&ey, label_grid_for(labels, enc.length_scale())?)?;
    let mut rows = Vec::new();
    let mut widths = Vec::new();
    for x in linspace(0.0, 1.0, 101) {
        let pred = grid.predict(&product, &joint, &x, 0.95)?;
        widths.push(pred.ci_width());
        rows.push(vec![
            x.to_string(),
            curve.mean(x).to_string(),
            ridge.predict(&ex, &x)?.to_string(),
            pred.mle.to_string(),
            pred.eve.to_string(),
            pred.ci.0.to_string(),
            pred.ci.1.to_string(),
        ]);
    }
    Ok(Replicate {
        files: vec![file("fig-regression", write_csv(&["x", "true_mean", "ridge", "mle", "eve", "ci_lo", "ci_hi"], rows)?)],
        metrics: vec![
            ("chosen lambda".into(), lambda),
            ("loo rmse".into(), loo_rmse),
            ("mean ci width".into(), widths.iter().sum::<f64>() / widths.len() as f64),
        ],
        residual: residual(&ex).max(residual(&ey)),
    })
}

/// Collocation points for the curvature panel; 100 points leave the fit
/// between them unconstrained.
pub const CURVATURE_COLLOCATION: usize = 1000;

/// Variance of predictions over 31 points of the gap `[0.35, 0.65]`.
pub fn gap_variance<M: Embedding<Point = f64>>(emb: &M, model: &crate::regression::RidgeModel) -> Result<f64> {
    let p = linspace(0.35, 0.65, 31).iter().map(|x| model.predict(emb, x)).collect::<Result<Vec<_>>>()?;
    let (mean, _) = mean_sd(&p);
    Ok(p.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / p.len() as f64)
}

fn fig_physics(spec: &EncoderSpec) -> Result<Replicate> {
    let enc = interval_of(spec)?;
    let emb = normalized(enc)?;
    let (lambda, weight) = (1e-3, 1e-2);
    let two = DesignMatrix::from_sample(&emb, &Sample::labeled(vec![0.2, 0.8], vec![0.2, 0.8])?)?;
    let curvature = PhysicsSpec::constant(&[0.0, 0.0, 1.0], 0.0, 0.0, 1.0, weight)?
        .with_collocation(linspace(0.0, 1.0, CURVATURE_COLLOCATION));
    let plain_two = fit_ridge(&two, lambda)?;
    let phys_two = fit_physics(&emb, &two, &curvature, lambda)?;
    let (xs, _) = gap_clusters(10);
    let gap = DesignMatrix::from_sample(&emb, &Sample::labeled(xs, vec![1.0; 20])?)?;
    let slope = PhysicsSpec::constant(&[0.0, 1.0], 0.0, 0.0, 1.0, weight)?;
    let plain_gap = fit_ridge(&gap, lambda)?;
    let phys_gap = fit_physics(&emb, &gap, &slope, lambda)?;
    let mut rows = Vec::new();
    for x in linspace(0.0, 1.0, 101) {
        rows.push(vec![
            x.to_string(),
            plain_two.predict(&emb, &x)?.to_string(),
            phys_two.predict(&emb, &x)?.to_string(),
            plain_gap.predict(&emb, &x)?.to_string(),
            phys_gap.predict(&emb, &x)?.to_string(),
        ]);
    }
    let header = ["x", "two_point_ridge", "two_point_curvature", "gap_ridge", "gap_slope"];
    Ok(Replicate {
        files: vec![file("fig-physics", write_csv(&header, rows)?)],
        metrics: vec![
            ("two-point midpoint".into(), phys_two.predict(&emb, &0.5)?),
            ("gap variance ratio".into(), gap_variance(&emb, &phys_gap)? / gap_variance(&emb, &plain_gap)?),
        ],
        residual: residual(&emb),
    })
}

/// Total variation between a histogram of `draws` on `bins` equal bins of
/// `[0, 1]` and the clipped density of `p` integrated over the same bins.
pub fn histogram_tv<M: Embedding<Point = f64>>(emb: &M, p: &TransformVec, draws: &[f64], bins: usize) -> Result<(f64, Vec<(f64, f64)>)> {
    let mut hist = vec![0.0; bins];
    for x in draws {
        hist[((x * bins as f64) as usize).min(bins - 1)] += 1.0 / draws.len() as f64;
    }
    let policy = DensityPolicy::new(true, 1e-12)?;
    let mut mass = vec![0.0; bins];
    for (b, m) in mass.iter_mut().enumerate() {
        for k in 0..10 {
            let x = (b as f64 + (k as f64 + 0.5) / 10.0) / bins as f64;
            *m += density_eval(emb, p, &x, &policy)?;
        }
    }
    let total: f64 = mass.iter().sum();
    let pairs: Vec<(f64, f64)> = hist.iter().zip(&mass).map(|(&h, &m)| (h, m / total)).collect();
    Ok((0.5 * pairs.iter().map(|(h, m)| (h - m).abs()).sum::<f64>(), pairs))
}

/// Grid transform of the two-bump mixture on 200 midpoints of `[0, 1]`.
pub fn two_bump_target<M: Embedding<Point = f64>>(emb: &M) -> Result<TransformVec> {
    let mix = Mixture1d::standard();
    let grid = QuadratureGrid::midpoint(0.0, 1.0, 200)?;
    let masses: Vec<f64> = grid.points().iter().map(|&x| mix.pdf(x)).collect();
    let total: f64 = masses.iter().sum();
    forward_distribution(emb, &grid, &masses.iter().map(|m| m / total).collect::<Vec<_>>())
}

fn sampler_demo(spec: &EncoderSpec, count: usize, data_seed: u64) -> Result<Replicate> {
    let enc = interval_of(spec)?;
    if (enc.lo(), enc.hi()) != (0.0, 1.0) {
        return invalid("sampler-demo runs on the unit interval");
    }
    let step = GaussianStep::for_encoder(&enc);
    let emb = normalized(enc)?;
    let target = two_bump_target(&emb)?;
    let draws = mh_sample(&emb, &target, &step, &MHConfig::for_samples(count, 1_000, 1, data_seed))?;
    let (tv, pairs) = histogram_tv(&emb, &target, &draws, 20)?;
    let rows = pairs.iter().enumerate().map(|(b, (h, m))| {
        vec![(b as f64 / 20.0).to_string(), ((b + 1) as f64 / 20.0).to_string(), h.to_string(), m.to_string()]
    });
    Ok(Replicate {
        files: vec![file("sampler-demo", write_csv(&["bin_lo", "bin_hi", "sampled", "target"], rows)?)],
        metrics: vec![("total variation".into(), tv)],
        residual: residual(&emb),
    })
}

/// Mixture ratios `(from A, from B)` as fractions of half a pool.
pub const TABLE1_RATIOS: [(f64, f64); 5] = [(1.0, 0.0), (1.0, 0.5), (1.0, 1.0), (0.5, 1.0), (0.0, 1.0)];

fn table1(spec: &EncoderSpec, pool: usize, data_seed: u64) -> Result<Replicate> {
    let enc = match spec.build()? {
        AnyEncoder::Sequence(e) => e,
        _ => return invalid("table1-synthetic needs a sequence encoder"),
    };
    if pool < 4 {
        return invalid("table1-synthetic needs pools of at least 4 sequences");
    }
    let (a, b) = sequence_families(pool, data_seed);
    let mut all = a.clone();
    all.extend(b.iter().cloned());
    let emb: Normalized<SequenceEncoder> =
        Normalized::solve(enc, &QuadratureGrid::counting(all)?, &SolverConfig::for_sequences())?;
    let pa = empirical_distribution(&emb, &Sample::new(a.clone())?)?;
    let pb = empirical_distribution(&emb, &Sample::new(b.clone())?)?;
    let half = pool / 2;
    let mut rng = seeding::rng(data_seed, 16);
    let mut rows = Vec::new();
    let (mut to_a, mut to_b) = (Vec::new(), Vec::new());
    for &(fa, fb) in &TABLE1_RATIOS {
        let (na, nb) = ((fa * half as f64) as usize, (fb * half as f64) as usize);
        let mut picked: Vec<String> = a.choose_multiple(&mut rng, na).cloned().collect();
        picked.extend(b.choose_multiple(&mut rng, nb).cloned());
        let p = empirical_distribution(&emb, &Sample::new(picked)?)?;
        let (da, db) = (mmd(&p, &pa)?, mmd(&p, &pb)?);
        let sol = deconvolve(&p, &[pa.clone(), pb.clone()], true)?;
        to_a.push(da);
        to_b.push(db);
        rows.push(vec![
            na.to_string(),
            nb.to_string(),
            da.to_string(),
            db.to_string(),
            sol.coefficients[0].to_string(),
            sol.coefficients[1].to_string(),
        ]);
    }
    let ordered = (1..to_a.len()).all(|k| to_a[k] > to_a[k - 1] && to_b[k] < to_b[k - 1]);
    let header = ["from_a", "from_b", "mmd_to_a", "mmd_to_b", "coef_a", "coef_b"];
    Ok(Replicate {
        files: vec![file("table1-synthetic", write_csv(&header, rows)?)],
        metrics: vec![("ordering holds".into(), if ordered { 1.0 } else { 0.0 })],
        residual: emb.normalization().residual(),
    })
}
