use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use hdt_core::classification::{
    accuracy, bipolar, classify_all, classify_generative, fit_closed_form_classifier, fit_function_classifier,
    fit_generative_classifier, fit_iterative_classifier, fit_prototypes, label_embedding, IterativeTrainConfig,
    LogisticQuadConfig,
};
use hdt_core::datasets::linspace;
use hdt_core::distributions::{deconvolve, joint_eval, mh_sample, mmd, GaussianStep, MHConfig, Substitution};
use hdt_core::empirical::{density_eval, empirical_distribution, empirical_function, DensityPolicy, Sample};
use hdt_core::experiments::{gen_dataset, run_experiment, ExperimentConfig};
use hdt_core::normalization::{OffGrid, Product};
use hdt_core::regression::{
    fit_generative_regressor, fit_iterative, fit_physics, fit_ridge, label_grid_for, lambda_ladder, tune_lambda,
    DesignMatrix, IterativeConfig, LabelGrid, PhysicsSpec,
};
use hdt_core::transform::{bipolar_transform, forward_function, inverse_eval, TransformVec};
use hdt_core::{
    AnyEncoder, Encoder, EncoderSpec, Error, Hypervector, IntervalEncoder, Normalized, QuadratureGrid,
    Result, SequenceEncoder, SolverConfig,
};

use crate::{ClassifyArgs, Cli, Command, RegressArgs, RegressMode};

/// Optional overrides of the normalization solver.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SolverSettings {
    tol: Option<f64>,
    max_iter: Option<usize>,
    epsilon: Option<f64>,
    damping: Option<f64>,
}

/// Configuration shared by the single-operation commands.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ToolConfig {
    encoder: EncoderSpec,
    #[serde(default)]
    solver: SolverSettings,
    /// Sampler settings; count, burn-in and thinning come from the flags.
    #[serde(default)]
    sampler: Option<MHConfig>,
}

impl ToolConfig {
    fn load(cli: &Cli) -> Result<Self> {
        let path = cli.config.as_ref().ok_or_else(|| Error::InvalidInput("--config is required".into()))?;
        let text = read(path)?;
        let mut cfg: Self = toml::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
        if let Some(seed) = cli.seed {
            cfg.encoder.seed = Some(seed);
        }
        Ok(cfg)
    }

    fn solver(&self, base: SolverConfig) -> SolverConfig {
        let s = &self.solver;
        SolverConfig {
            tol: s.tol.unwrap_or(base.tol),
            max_iter: s.max_iter.unwrap_or(base.max_iter),
            epsilon: s.epsilon.unwrap_or(base.epsilon),
            damping: s.damping.unwrap_or(base.damping),
            ..base
        }
    }

    fn interval(&self) -> Result<Normalized<IntervalEncoder>> {
        match self.encoder.build()? {
            AnyEncoder::Interval(enc) => {
                let grid = QuadratureGrid::for_length_scale(enc.lo(), enc.hi(), enc.length_scale())?;
                Normalized::solve(enc, &grid, &self.solver(SolverConfig::default()))
            }
            _ => Err(Error::Unsupported("this command needs an interval encoder".into())),
        }
    }

    /// Sequence embedding normalized over the union of `sets`.
    fn sequences(&self, sets: &[&Sample<String>]) -> Result<Normalized<SequenceEncoder>> {
        match self.encoder.build()? {
            AnyEncoder::Sequence(enc) => {
                let mut domain: Vec<String> = sets.iter().flat_map(|s| s.inputs().iter().cloned()).collect();
                domain.sort();
                domain.dedup();
                let cfg = SolverConfig { off_grid: OffGrid::Mean, ..self.solver(SolverConfig::for_sequences()) };
                Normalized::solve(enc, &QuadratureGrid::counting(domain)?, &cfg)
            }
            _ => Err(Error::Unsupported("expected a sequence encoder".into())),
        }
    }

    fn is_sequence(&self) -> bool {
        self.encoder.domain == hdt_core::encoders::DomainKind::Sequence
    }
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::InvalidInput(format!("{}: {e}", path.display())))
}

fn reals(path: &Path) -> Result<Sample<f64>> {
    Sample::from_csv(read(path)?.as_bytes())
}

fn strings(path: &Path) -> Result<Sample<String>> {
    Sample::from_csv(read(path)?.as_bytes())
}

fn labels_of<P>(sample: &Sample<P>) -> Result<&[f64]> {
    sample.labels().ok_or_else(|| Error::InvalidInput("input needs an x,y header".into()))
}

/// Writes CSV files into the output directory.
struct Output {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Output {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new() })
    }

    fn text(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.dir.join(name);
        fs::write(&path, text)?;
        self.written.push(path);
        Ok(())
    }

    fn csv(&mut self, name: &str, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let to_err = |e: csv::Error| Error::Parse(e.to_string());
        w.write_record(header).map_err(to_err)?;
        for row in rows {
            w.write_record(&row).map_err(to_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        self.text(name, &String::from_utf8_lossy(&bytes))
    }
}

fn row(values: &[f64]) -> Vec<String> {
    values.iter().map(|v| v.to_string()).collect()
}

/// Output directory used when neither `--out` nor the experiment sets one.
const DEFAULT_OUT: &str = "hdt-out";

pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    if let Command::Experiment = cli.command {
        return experiment(cli);
    }
    let mut out = Output::new(cli.out.as_deref().unwrap_or(Path::new(DEFAULT_OUT)))?;
    match &cli.command {
        Command::Dataset(args) => {
            for file in gen_dataset(args.kind, args.size, cli.seed.unwrap_or(0))? {
                out.text(&file.name, &file.text)?;
            }
        }
        command => {
            let cfg = ToolConfig::load(cli)?;
            match command {
                Command::Encode(args) => encode(&cfg, &args.input, &mut out)?,
                Command::Normalize(args) => normalize(&cfg, args.input.as_deref(), &mut out)?,
                Command::Transform(args) => transform(&cfg, &args.input, &mut out)?,
                Command::Density(args) => density(&cfg, &args.input, &mut out)?,
                Command::Mmd(args) => distance(&cfg, &args.input, &args.other, &mut out)?,
                Command::Deconvolve(args) => {
                    mixture(&cfg, &args.input, &args.components, !args.no_project, &mut out)?
                }
                Command::Sample(args) => sample(&cfg, args, cli.seed.unwrap_or(0), &mut out)?,
                Command::Joint(args) => joint(&cfg, args, &mut out)?,
                Command::Regress(args) => regress(&cfg, args, &mut out)?,
                Command::Classify(args) => classify(&cfg, args, &mut out)?,
                Command::Experiment | Command::Dataset(_) => unreachable!("handled above"),
            }
        }
    }
    Ok(out.written)
}

fn experiment(cli: &Cli) -> Result<Vec<PathBuf>> {
    let path = cli.config.as_ref().ok_or_else(|| Error::InvalidInput("--config is required".into()))?;
    let mut cfg = ExperimentConfig::from_toml(&read(path)?)?;
    if let Some(seed) = cli.seed {
        cfg.seeds = vec![seed];
    }
    let report = run_experiment(&cfg)?;
    let dir = cli.out.clone().or(cfg.out.clone()).unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
    report.write(&dir)
}

fn vector_rows<K: ToString>(keys: &[K], vectors: &[Hypervector]) -> Vec<Vec<String>> {
    keys.iter()
        .zip(vectors)
        .map(|(k, v)| std::iter::once(k.to_string()).chain(v.values().iter().map(|c| c.to_string())).collect())
        .collect()
}

fn encode(cfg: &ToolConfig, input: &Path, out: &mut Output) -> Result<()> {
    let dims = cfg.encoder.dims.unwrap_or(hdt_core::encoders::DEFAULT_DIMS);
    let header: Vec<String> = std::iter::once("x".to_string()).chain((0..dims).map(|k| format!("c{k}"))).collect();
    let header: Vec<&str> = header.iter().map(String::as_str).collect();
    let rows = match cfg.encoder.build()? {
        AnyEncoder::Sequence(enc) => {
            let s = strings(input)?;
            vector_rows(s.inputs(), &s.inputs().iter().map(|x| enc.encode(x)).collect::<Result<Vec<_>>>()?)
        }
        AnyEncoder::Symbol(enc) => {
            let s = strings(input)?;
            vector_rows(s.inputs(), &s.inputs().iter().map(|x| enc.encode(x)).collect::<Result<Vec<_>>>()?)
        }
        AnyEncoder::Interval(enc) => {
            let s = reals(input)?;
            vector_rows(s.inputs(), &s.inputs().iter().map(|x| enc.encode(x)).collect::<Result<Vec<_>>>()?)
        }
        AnyEncoder::CosSin(enc) => {
            let s = reals(input)?;
            vector_rows(s.inputs(), &s.inputs().iter().map(|x| enc.encode(x)).collect::<Result<Vec<_>>>()?)
        }
        AnyEncoder::Product(_) => return Err(Error::Unsupported("product encoders are not encoded from CSV".into())),
    };
    out.csv("encodings.csv", &header, rows)
}

fn normalize(cfg: &ToolConfig, input: Option<&Path>, out: &mut Output) -> Result<()> {
    if cfg.is_sequence() {
        let path = input.ok_or_else(|| Error::InvalidInput("sequence normalization needs --input".into()))?;
        let set = strings(path)?;
        let emb = cfg.sequences(&[&set])?;
        out.text("normalization.txt", &emb.normalization().to_text())?;
        let rows = set.inputs().iter().map(|x| Ok(vec![x.clone(), emb.n_at(x)?.to_string()])).collect::<Result<Vec<_>>>()?;
        return out.csv("normalization.csv", &["x", "n"], rows);
    }
    let emb = cfg.interval()?;
    let enc = emb.encoder();
    out.text("normalization.txt", &emb.normalization().to_text())?;
    let rows = linspace(enc.lo(), enc.hi(), 201).into_iter().map(|x| Ok(row(&[x, emb.n_at(&x)?]))).collect::<Result<Vec<_>>>()?;
    out.csv("normalization.csv", &["x", "n"], rows)
}

/// Piecewise-linear interpolant through sorted `(x, y)` pairs, constant
/// beyond the ends.
fn interpolant(sample: &Sample<f64>) -> Result<impl Fn(&f64) -> f64> {
    let mut pts: Vec<(f64, f64)> = sample.inputs().iter().copied().zip(labels_of(sample)?.iter().copied()).collect();
    pts.sort_by(|a, b| a.0.total_cmp(&b.0));
    Ok(move |x: &f64| {
        let k = pts.partition_point(|p| p.0 <= *x);
        if k == 0 {
            pts[0].1
        } else if k == pts.len() {
            pts[k - 1].1
        } else {
            let ((x0, y0), (x1, y1)) = (pts[k - 1], pts[k]);
            y0 + (y1 - y0) * (x - x0) / (x1 - x0)
        }
    })
}

fn transform(cfg: &ToolConfig, input: &Path, out: &mut Output) -> Result<()> {
    let emb = cfg.interval()?;
    let enc = emb.encoder();
    let grid = QuadratureGrid::for_length_scale(enc.lo(), enc.hi(), enc.length_scale())?;
    let f = interpolant(&reals(input)?)?;
    let t = forward_function(&emb, &grid, &f)?;
    let b = bipolar_transform(&emb, &t, &grid)?;
    out.text("transform.txt", &t.to_text())?;
    let rows = linspace(enc.lo(), enc.hi(), 201)
        .into_iter()
        .map(|x| Ok(row(&[x, f(&x), inverse_eval(&emb, &t, &x)?, b.eval(&emb, &x)?])))
        .collect::<Result<Vec<_>>>()?;
    out.csv("transform.csv", &["x", "original", "reconstructed", "bipolar"], rows)
}

fn density(cfg: &ToolConfig, input: &Path, out: &mut Output) -> Result<()> {
    let policy = DensityPolicy::new(true, 1e-12)?;
    if cfg.is_sequence() {
        let s = strings(input)?;
        let emb = cfg.sequences(&[&s])?;
        let p = empirical_distribution(&emb, &s)?;
        out.text("transform.txt", &p.to_text())?;
        let rows = s.inputs().iter().map(|x| Ok(vec![x.clone(), density_eval(&emb, &p, x, &policy)?.to_string()]));
        return out.csv("density.csv", &["x", "density"], rows.collect::<Result<Vec<_>>>()?);
    }
    let emb = cfg.interval()?;
    let enc = emb.encoder();
    let p = empirical_distribution(&emb, &Sample::new(reals(input)?.inputs().to_vec())?)?;
    out.text("transform.txt", &p.to_text())?;
    let rows = linspace(enc.lo(), enc.hi(), 201)
        .into_iter()
        .map(|x| Ok(row(&[x, density_eval(&emb, &p, &x, &policy)?])))
        .collect::<Result<Vec<_>>>()?;
    out.csv("density.csv", &["x", "density"], rows)
}

/// Empirical transforms of each file under one embedding.
fn transforms(cfg: &ToolConfig, paths: &[&Path]) -> Result<Vec<TransformVec>> {
    if cfg.is_sequence() {
        let sets = paths.iter().map(|p| strings(p)).collect::<Result<Vec<_>>>()?;
        let emb = cfg.sequences(&sets.iter().collect::<Vec<_>>())?;
        sets.iter().map(|s| empirical_distribution(&emb, &Sample::new(s.inputs().to_vec())?)).collect()
    } else {
        let emb = cfg.interval()?;
        paths.iter().map(|p| empirical_distribution(&emb, &Sample::new(reals(p)?.inputs().to_vec())?)).collect()
    }
}

fn distance(cfg: &ToolConfig, a: &Path, b: &Path, out: &mut Output) -> Result<()> {
    let t = transforms(cfg, &[a, b])?;
    out.csv("mmd.csv", &["mmd"], [row(&[mmd(&t[0], &t[1])?])])
}

fn mixture(cfg: &ToolConfig, input: &Path, components: &[PathBuf], project: bool, out: &mut Output) -> Result<()> {
    let mut paths: Vec<&Path> = vec![input];
    paths.extend(components.iter().map(PathBuf::as_path));
    let t = transforms(cfg, &paths)?;
    let sol = deconvolve(&t[0], &t[1..], project)?;
    let rows = components
        .iter()
        .enumerate()
        .map(|(k, p)| vec![p.display().to_string(), sol.coefficients[k].to_string(), sol.raw[k].to_string()]);
    out.csv("coefficients.csv", &["component", "coefficient", "raw"], rows)
}

fn sample(cfg: &ToolConfig, args: &crate::SampleArgs, seed: u64, out: &mut Output) -> Result<()> {
    let base = cfg.sampler.unwrap_or_default();
    let mh = MHConfig {
        density_floor: base.density_floor,
        init_tries: base.init_tries,
        ..MHConfig::for_samples(args.count, args.burn_in, args.thin, seed)
    };
    if cfg.is_sequence() {
        let s = strings(&args.input)?;
        let emb = cfg.sequences(&[&s])?;
        let p = empirical_distribution(&emb, &s)?;
        let step = Substitution::new(&emb.encoder().alphabet(), s.inputs().to_vec())?;
        let draws = mh_sample(&emb, &p, &step, &mh)?;
        return out.csv("draws.csv", &["x"], draws.into_iter().map(|d| vec![d]));
    }
    let emb = cfg.interval()?;
    let p = empirical_distribution(&emb, &Sample::new(reals(&args.input)?.inputs().to_vec())?)?;
    let draws = mh_sample(&emb, &p, &GaussianStep::for_encoder(emb.encoder()), &mh)?;
    out.csv("draws.csv", &["x"], draws.into_iter().map(|d| row(&[d])))
}

/// Interval embedding over `[lo, hi]` sharing the configured encoder's
/// flavor, length scale and dims, on a derived seed.
fn companion(first: &Normalized<IntervalEncoder>, lo: f64, hi: f64, cfg: &ToolConfig) -> Result<Normalized<IntervalEncoder>> {
    let enc = first.encoder();
    let second = IntervalEncoder::new(lo, hi, enc.length_scale(), enc.dims(), enc.seed() + 1000, enc.flavor())?;
    let grid = QuadratureGrid::for_length_scale(lo, hi, enc.length_scale())?;
    Normalized::solve(second, &grid, &cfg.solver(SolverConfig::default()))
}

fn joint(cfg: &ToolConfig, args: &crate::JointArgs, out: &mut Output) -> Result<()> {
    if args.grid < 2 {
        return Err(Error::InvalidInput("--grid needs at least 2 points".into()));
    }
    let ex = cfg.interval()?;
    let s = reals(&args.input)?;
    let ys = labels_of(&s)?;
    let pad = 3.0 * ex.encoder().length_scale();
    let y_lo = args.y_lo.unwrap_or_else(|| ys.iter().copied().fold(f64::INFINITY, f64::min) - pad);
    let y_hi = args.y_hi.unwrap_or_else(|| ys.iter().copied().fold(f64::NEG_INFINITY, f64::max) + pad);
    let ey = companion(&ex, y_lo, y_hi, cfg)?;
    let pairs: Vec<(f64, f64)> = s.inputs().iter().copied().zip(ys.iter().copied()).collect();
    let product = Product::new(&ex, &ey)?;
    let p = empirical_distribution(&product, &Sample::new(pairs)?)?;
    let enc = ex.encoder();
    let mut rows = Vec::new();
    for x in linspace(enc.lo(), enc.hi(), args.grid) {
        for y in linspace(y_lo, y_hi, args.grid) {
            rows.push(row(&[x, y, joint_eval(&product, &p, &(x, y))?]));
        }
    }
    out.csv("joint.csv", &["x", "y", "density"], rows)
}

fn regress(cfg: &ToolConfig, args: &RegressArgs, out: &mut Output) -> Result<()> {
    let emb = cfg.interval()?;
    let enc = emb.encoder().clone();
    let sample = reals(&args.input)?;
    let xs = linspace(enc.lo(), enc.hi(), args.points.max(2));
    let ridge_lambda = |design: &DesignMatrix| -> Result<f64> {
        match args.lambda {
            Some(l) => Ok(l),
            None => Ok(tune_lambda(design, &lambda_ladder())?.0),
        }
    };
    match args.mode {
        RegressMode::Empirical => {
            let f = empirical_function(&emb, &sample, &DensityPolicy::for_length_scale(enc.length_scale())?)?;
            let rows = xs.iter().map(|x| Ok(row(&[*x, inverse_eval(&emb, &f, x)?]))).collect::<Result<Vec<_>>>()?;
            out.csv("predictions.csv", &["x", "prediction"], rows)
        }
        RegressMode::Ridge => {
            let design = DesignMatrix::from_sample(&emb, &sample)?;
            let model = fit_ridge(&design, ridge_lambda(&design)?)?;
            let rows = xs.iter().map(|x| Ok(row(&[*x, model.predict(&emb, x)?]))).collect::<Result<Vec<_>>>()?;
            out.csv("predictions.csv", &["x", "prediction"], rows)?;
            out.csv("model.csv", &["lambda", "path"], [vec![model.lambda().to_string(), model.path().to_string()]])
        }
        RegressMode::Physics => {
            let design = DesignMatrix::from_sample(&emb, &sample)?;
            let mut spec = PhysicsSpec::constant(&args.operator, args.rhs, enc.lo(), enc.hi(), args.weight)?;
            if let Some(n) = args.collocation {
                spec = spec.with_collocation(linspace(enc.lo(), enc.hi(), n));
            }
            let model = fit_physics(&emb, &design, &spec, args.lambda.unwrap_or(1e-3))?;
            let rows = xs.iter().map(|x| Ok(row(&[*x, model.predict(&emb, x)?]))).collect::<Result<Vec<_>>>()?;
            out.csv("predictions.csv", &["x", "prediction"], rows)
        }
        RegressMode::Iterative => {
            let design = DesignMatrix::from_sample(&emb, &sample)?;
            let seed = enc.seed();
            let fit = fit_iterative(&design, &IterativeConfig { alpha: args.alpha, passes: args.passes, seed })?;
            let rows = xs.iter().map(|x| Ok(row(&[*x, fit.predict(&emb, x)?]))).collect::<Result<Vec<_>>>()?;
            out.csv("predictions.csv", &["x", "prediction"], rows)?;
            let losses = fit.pass_losses().iter().enumerate().map(|(k, l)| row(&[(k + 1) as f64, *l]));
            out.csv("losses.csv", &["pass", "loss"], losses)
        }
        RegressMode::Generative => {
            let ey = companion(&emb, args.y_lo, args.y_hi, cfg)?;
            let product = Product::new(&emb, &ey)?;
            let joint = fit_generative_regressor(&product, &sample)?;
            let grid = LabelGrid::new(&ey, label_grid_for(labels_of(&sample)?, ey.encoder().length_scale())?)?;
            let rows = xs
                .iter()
                .map(|x| {
                    let p = grid.predict(&product, &joint, x, args.level)?;
                    Ok(row(&[*x, p.mle, p.eve, p.ci.0, p.ci.1]))
                })
                .collect::<Result<Vec<_>>>()?;
            out.csv("predictions.csv", &["x", "mle", "eve", "ci_lo", "ci_hi"], rows)
        }
    }
}

fn classify(cfg: &ToolConfig, args: &ClassifyArgs, out: &mut Output) -> Result<()> {
    use crate::ClassifyModel as M;
    let emb = cfg.interval()?;
    let enc = emb.encoder().clone();
    let train = reals(&args.input)?;
    let test = match &args.test {
        Some(p) => reals(p)?,
        None => train.clone(),
    };
    let xs = test.inputs();
    let sign = |v: Hypervector| if args.bipolar { hdt_core::sign_of(&v) } else { v };
    let predicted = match args.model {
        M::ProtoNormEach | M::ProtoRaw | M::ProtoNormDiff => {
            let variant = args.model.prototype().expect("prototype model");
            classify_all(&sign(fit_prototypes(&enc, &train, variant)?.model()), &emb, xs)?
        }
        M::Iterative => {
            let cfg = IterativeTrainConfig { alpha: args.alpha, passes: args.passes, seed: enc.seed(), ..Default::default() };
            let fit = fit_iterative_classifier(&emb, &train, &cfg)?;
            classify_all(&sign(fit.vector().clone()), &emb, xs)?
        }
        M::EmpiricalF => {
            let f = fit_function_classifier(&emb, &train, &DensityPolicy::for_length_scale(enc.length_scale())?)?;
            classify_all(&sign(f.vec().clone()), &emb, xs)?
        }
        M::EmpiricalP => {
            let labels = label_embedding(enc.dims(), enc.seed() + 1000)?;
            let product = Product::new(&emb, &labels)?;
            let mut joint = fit_generative_classifier(&product, &train)?;
            if args.bipolar {
                joint = bipolar(&joint);
            }
            xs.iter().map(|x| classify_generative(&product, &joint, x)).collect::<Result<Vec<_>>>()?
        }
        M::ClosedForm => {
            let design = DesignMatrix::from_sample(&emb, &train)?;
            let model = fit_closed_form_classifier(&design, &LogisticQuadConfig::from_lambda_prime(3.0, 0.08, args.lambda_prime)?)?;
            classify_all(&sign(model.vector().clone()), &emb, xs)?
        }
    };
    let rows = match test.labels() {
        Some(ys) => {
            out.csv("accuracy.csv", &["accuracy"], [row(&[accuracy(&predicted, ys)])])?;
            xs.iter().zip(ys).zip(&predicted).map(|((x, y), p)| row(&[*x, *y, *p])).collect::<Vec<_>>()
        }
        None => xs.iter().zip(&predicted).map(|(x, p)| row(&[*x, f64::NAN, *p])).collect(),
    };
    out.csv("predictions.csv", &["x", "label", "predicted"], rows)
}
