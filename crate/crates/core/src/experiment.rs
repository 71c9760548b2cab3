//! Sweeps over `(β, T, replication)`: configuration files, CSV rows, summary
//! statistics and rate-slope fits.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use crate::environment::{EnvironmentSpec, LambdaFunction};
use crate::error::{Error, Result};
use crate::evaluation::{
    default_nodes_per_axis, margin_probe, slow_rate, Evaluator, NodeSet, RegretReport,
    DEFAULT_MC_SAMPLES, MIN_PROBE_SAMPLES,
};
use crate::orchestrator::{run_algorithm, PolicyResult, RunConfig};
use crate::parallel::{map_slice, Parallelism};
use crate::partition::{Regime, DEFAULT_QUAD_NODES};
use crate::regularizer::Regularizer;
use crate::rng::derive_seed;
use crate::stats;
use crate::ucfw::{LearnerSettings, MarginSettings};

/// CSV header of sweep results.
pub const CSV_HEADER: [&str; 11] = [
    "beta",
    "T",
    "rep",
    "seed",
    "bins",
    "regret",
    "regret_times_T",
    "normalized_regret",
    "estimation_error",
    "approximation_error",
    "empty_bin_count",
];

/// Header of the companion file listing failed runs.
pub const ERROR_CSV_HEADER: [&str; 5] = ["beta", "T", "rep", "seed", "error"];

/// Environment variable holding the sweep worker count.
pub const WORKERS_ENV: &str = "REGBANDIT_WORKERS";

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepFile {
    #[serde(rename = "T")]
    horizons: Option<Vec<u64>>,
    beta: Option<Vec<f64>>,
    reps: Option<u32>,
    seed: Option<u64>,
    regime: Option<String>,
    out: Option<PathBuf>,
    run_log: Option<PathBuf>,
    regularizer: Option<String>,
    lambda: Option<String>,
    environment: Option<EnvironmentSpec>,
    learner: Option<LearnerFile>,
    evaluation: Option<EvaluationSettings>,
    probe: Option<ProbeSettings>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct LearnerFile {
    bins: Option<usize>,
    theta_constant: Option<f64>,
    quad_nodes: Option<usize>,
    confidence_constant: Option<f64>,
    presample_cap: Option<f64>,
    margin_alpha: Option<f64>,
    margin_exponent: Option<f64>,
    margin_constant: Option<f64>,
    ill_behaved_constant: Option<f64>,
}

/// How the regret integrals are computed.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationSettings {
    /// Quadrature nodes per axis; `None` picks the default for the dimension.
    pub nodes: Option<usize>,
    pub monte_carlo: bool,
    pub mc_samples: usize,
}

impl Default for EvaluationSettings {
    fn default() -> Self {
        EvaluationSettings {
            nodes: None,
            monte_carlo: false,
            mc_samples: DEFAULT_MC_SAMPLES,
        }
    }
}

/// Settings of the `probe-margin` command.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ProbeSettings {
    pub deltas: Vec<f64>,
    pub samples: usize,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        ProbeSettings {
            deltas: (0..=20)
                .map(|i| 10f64.powf(-3.0 + 0.15 * i as f64))
                .collect(),
            samples: 100_000,
        }
    }
}

/// Values given on the command line; they win over the file.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub horizons: Option<Vec<u64>>,
    pub betas: Option<Vec<f64>>,
    pub reps: Option<u32>,
    pub seed: Option<u64>,
    pub regime: Option<Regime>,
    pub out: Option<PathBuf>,
}

/// Where a resolved setting came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Source {
    Flag,
    File,
    Default,
}

impl Source {
    fn label(self) -> &'static str {
        match self {
            Source::Flag => "flag",
            Source::File => "file",
            Source::Default => "default",
        }
    }
}

fn pick<T>(
    flag: Option<T>,
    file: Option<T>,
    default: impl FnOnce() -> Option<T>,
) -> (Option<T>, Source) {
    match (flag, file) {
        (Some(v), _) => (Some(v), Source::Flag),
        (None, Some(v)) => (Some(v), Source::File),
        (None, None) => (default(), Source::Default),
    }
}

/// A validated sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub horizons: Vec<u64>,
    pub betas: Vec<f64>,
    pub reps: u32,
    pub seed: u64,
    pub regime: Regime,
    pub regularizer: Regularizer,
    pub lambda: LambdaFunction,
    pub environment: EnvironmentSpec,
    pub learner: LearnerSettings,
    pub bins: Option<usize>,
    pub theta_constant: f64,
    pub quad_nodes: usize,
    pub evaluation: EvaluationSettings,
    pub probe: ProbeSettings,
    pub out: Option<PathBuf>,
    pub run_log: Option<PathBuf>,
    /// Resolved top-level settings and their origin, for the summary header.
    pub provenance: Vec<(String, String, Source)>,
}

impl SweepSpec {
    /// Reads and validates a TOML file, applying `overrides` on top.
    pub fn from_file(path: &Path, overrides: &Overrides) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| {
            Error::validation("config", format!("cannot read {}: {e}", path.display()))
        })?;
        SweepSpec::from_toml_str(&text, overrides)
    }

    pub fn from_toml_str(text: &str, overrides: &Overrides) -> Result<Self> {
        let file: SweepFile = toml::from_str(text).map_err(|e| {
            let message = e.message().to_string();
            let key = message
                .split('`')
                .nth(1)
                .filter(|_| message.starts_with("unknown field"))
                .unwrap_or("config")
                .to_string();
            Error::validation(key, message)
        })?;
        SweepSpec::resolve(file, overrides)
    }

    /// Validates flags alone, with every file setting at its default.
    pub fn from_overrides(overrides: &Overrides) -> Result<Self> {
        SweepSpec::resolve(SweepFile::default(), overrides)
    }

    fn resolve(file: SweepFile, o: &Overrides) -> Result<Self> {
        let mut provenance = Vec::new();
        let mut note = |key: &str, value: String, source: Source| {
            provenance.push((key.to_string(), value, source))
        };

        let (horizons, src) = pick(o.horizons.clone(), file.horizons, || None);
        let horizons =
            horizons.ok_or_else(|| Error::validation("T", "missing list of horizons"))?;
        if horizons.is_empty() {
            return Err(Error::validation("T", "list of horizons is empty"));
        }
        if let Some(t) = horizons.iter().find(|&&t| t < 3) {
            return Err(Error::validation(
                "T",
                format!("horizon {t} must be at least 3"),
            ));
        }
        note("T", format!("{horizons:?}"), src);

        let (betas, src) = pick(o.betas.clone(), file.beta, || None);
        let betas = betas
            .ok_or_else(|| Error::validation("beta", "missing list of smoothness exponents"))?;
        if betas.is_empty() {
            return Err(Error::validation(
                "beta",
                "list of smoothness exponents is empty",
            ));
        }
        if betas.iter().any(|b| !(*b > 0.0 && *b <= 1.0)) {
            return Err(Error::validation("beta", "beta must be in (0,1]"));
        }
        note("beta", format!("{betas:?}"), src);

        let (reps, src) = pick(o.reps, file.reps, || Some(1));
        let reps = reps.unwrap_or(1);
        if reps == 0 {
            return Err(Error::validation(
                "reps",
                "at least one replication is required",
            ));
        }
        note("reps", reps.to_string(), src);

        let (seed, src) = pick(o.seed, file.seed, || Some(0));
        let seed = seed.unwrap_or(0);
        note("seed", seed.to_string(), src);

        let file_regime = file
            .regime
            .as_deref()
            .map(str::parse::<Regime>)
            .transpose()?;
        let (regime, src) = pick(o.regime, file_regime, || Some(Regime::Fast));
        let regime = regime.unwrap_or(Regime::Fast);
        note("regime", regime.to_string(), src);

        let (out, src) = pick(o.out.clone(), file.out, || None);
        if let Some(path) = &out {
            note("out", path.display().to_string(), src);
        }

        let regularizer: Regularizer = file.regularizer.as_deref().unwrap_or("entropy").parse()?;
        let src = if file.regularizer.is_some() {
            Source::File
        } else {
            Source::Default
        };
        note("regularizer", regularizer.to_string(), src);

        let lambda: LambdaFunction = file.lambda.as_deref().unwrap_or("const:0.1").parse()?;
        let src = if file.lambda.is_some() {
            Source::File
        } else {
            Source::Default
        };
        note("lambda", lambda.to_string(), src);

        let src = if file.environment.is_some() {
            Source::File
        } else {
            Source::Default
        };
        let environment = file.environment.unwrap_or_default();
        note("environment.arms", environment.arms.len().to_string(), src);
        note("environment.dim", environment.dim.to_string(), src);
        for &beta in &betas {
            environment.build(beta, lambda)?;
        }

        let l = file.learner.unwrap_or_default();
        let defaults = LearnerSettings::default();
        let margin_defaults = MarginSettings::default();
        let learner = LearnerSettings {
            confidence_constant: l
                .confidence_constant
                .unwrap_or(defaults.confidence_constant),
            presample_cap: l.presample_cap.unwrap_or(defaults.presample_cap),
            margin: MarginSettings {
                alpha: l.margin_alpha.unwrap_or(margin_defaults.alpha),
                exponent: l.margin_exponent,
                constant: l.margin_constant.unwrap_or(margin_defaults.constant),
                ill_behaved_constant: l
                    .ill_behaved_constant
                    .unwrap_or(margin_defaults.ill_behaved_constant),
            },
        };
        if !(learner.confidence_constant.is_finite() && learner.confidence_constant >= 0.0) {
            return Err(Error::validation(
                "learner.confidence_constant",
                "must be a nonnegative number",
            ));
        }
        if !(learner.presample_cap > 0.0 && learner.presample_cap < 0.5) {
            return Err(Error::validation(
                "learner.presample_cap",
                "must be in (0, 0.5)",
            ));
        }
        if !(learner.margin.alpha > 0.0 && learner.margin.alpha.is_finite()) {
            return Err(Error::validation(
                "learner.margin_alpha",
                "must be positive",
            ));
        }
        if !(learner.margin.exponent() > 0.0 && learner.margin.exponent().is_finite()) {
            return Err(Error::validation(
                "learner.margin_exponent",
                "must be positive",
            ));
        }
        if !(learner.margin.constant > 0.0 && learner.margin.ill_behaved_constant >= 0.0) {
            return Err(Error::validation(
                "learner.margin_constant",
                "constants must be positive",
            ));
        }
        if l.bins == Some(0) {
            return Err(Error::validation("learner.bins", "must be at least 1"));
        }
        let theta_constant = l.theta_constant.unwrap_or(1.0);
        if !(theta_constant > 0.0 && theta_constant.is_finite()) {
            return Err(Error::validation(
                "learner.theta_constant",
                "must be positive",
            ));
        }
        let quad_nodes = l.quad_nodes.unwrap_or(DEFAULT_QUAD_NODES);
        if quad_nodes == 0 {
            return Err(Error::validation(
                "learner.quad_nodes",
                "must be at least 1",
            ));
        }

        let evaluation = file.evaluation.unwrap_or_default();
        if evaluation.nodes == Some(0) {
            return Err(Error::validation("evaluation.nodes", "must be at least 1"));
        }
        if !evaluation.monte_carlo && environment.dim > 3 {
            return Err(Error::validation(
                "evaluation.monte_carlo",
                format!(
                    "tensor quadrature is refused in dimension {}; set monte_carlo = true",
                    environment.dim
                ),
            ));
        }
        if evaluation.monte_carlo && evaluation.mc_samples == 0 {
            return Err(Error::validation(
                "evaluation.mc_samples",
                "must be positive",
            ));
        }

        let probe = file.probe.unwrap_or_default();
        if probe.samples < MIN_PROBE_SAMPLES {
            return Err(Error::validation(
                "probe.samples",
                format!("must be at least {MIN_PROBE_SAMPLES}"),
            ));
        }
        if probe.deltas.is_empty() || probe.deltas.iter().any(|d| !(d.is_finite() && *d > 0.0)) {
            return Err(Error::validation(
                "probe.deltas",
                "thresholds must be a nonempty list of positive numbers",
            ));
        }

        Ok(SweepSpec {
            horizons,
            betas,
            reps,
            seed,
            regime,
            regularizer,
            lambda,
            environment,
            learner,
            bins: l.bins,
            theta_constant,
            quad_nodes,
            evaluation,
            probe,
            out,
            run_log: file.run_log,
            provenance,
        })
    }

    /// One run configuration per `(β, T, rep)`, in that nesting order.
    pub fn run_configs(&self) -> Vec<RunConfig> {
        let mut configs =
            Vec::with_capacity(self.betas.len() * self.horizons.len() * self.reps as usize);
        for &beta in &self.betas {
            for &horizon in &self.horizons {
                for rep in 0..self.reps {
                    configs.push(RunConfig {
                        horizon,
                        beta,
                        regime: self.regime,
                        regularizer: self.regularizer,
                        lambda: self.lambda,
                        environment: self.environment.clone(),
                        seed: run_seed(self.seed, beta, horizon, rep),
                        learner: self.learner,
                        bins: self.bins,
                        theta_constant: self.theta_constant,
                        quad_nodes: self.quad_nodes,
                        record_contexts: false,
                    });
                }
            }
        }
        configs
    }
}

/// Seed of one run, keyed by its identity so scheduling cannot change it.
pub fn run_seed(master: u64, beta: f64, horizon: u64, rep: u32) -> u64 {
    derive_seed(master, &[beta.to_bits(), horizon, rep as u64])
}

/// Identity of one run inside a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunId {
    pub beta: f64,
    pub horizon: u64,
    pub rep: u32,
    pub seed: u64,
}

/// Outcome of one run: the policy and its regret, or the failure.
#[derive(Debug, Clone)]
pub struct SweepRecord {
    pub id: RunId,
    pub outcome: std::result::Result<(PolicyResult, RegretReport), String>,
}

/// Evaluates one finished run.
pub fn evaluate_run(
    config: &RunConfig,
    result: &PolicyResult,
    settings: &EvaluationSettings,
) -> Result<RegretReport> {
    let env = config.environment()?;
    let nodes = if settings.monte_carlo {
        NodeSet::monte_carlo(result.grid, settings.mc_samples, config.seed)?
    } else {
        let g = settings
            .nodes
            .or_else(|| default_nodes_per_axis(env.dim()))
            .unwrap_or(0);
        NodeSet::quadrature(result.grid, g)?
    };
    Evaluator::new(env, config.regularizer, nodes)?.regret(result, config.horizon)
}

/// Runs and evaluates every configuration. `rep` in each id is the position
/// among configurations sharing `(β, T)`.
pub fn run_sweep(
    configs: &[RunConfig],
    settings: &EvaluationSettings,
    parallelism: Parallelism,
) -> Vec<SweepRecord> {
    let mut reps: BTreeMap<(u64, u64), u32> = BTreeMap::new();
    let ids: Vec<RunId> = configs
        .iter()
        .map(|c| {
            let counter = reps.entry((c.beta.to_bits(), c.horizon)).or_insert(0);
            let id = RunId {
                beta: c.beta,
                horizon: c.horizon,
                rep: *counter,
                seed: c.seed,
            };
            *counter += 1;
            id
        })
        .collect();
    let jobs: Vec<(RunId, &RunConfig)> = ids.into_iter().zip(configs).collect();
    parallelism.install(|| {
        map_slice(&jobs, |(id, config)| {
            let outcome = run_algorithm(config)
                .and_then(|result| {
                    evaluate_run(config, &result, settings).map(|report| (result, report))
                })
                .map_err(|e| e.to_string());
            if let Err(message) = &outcome {
                log::warn!(
                    "run beta={} T={} rep={} failed: {message}",
                    id.beta,
                    id.horizon,
                    id.rep
                );
            }
            SweepRecord { id: *id, outcome }
        })
    })
}

/// One line of the results CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvRow {
    pub beta: f64,
    pub horizon: u64,
    pub rep: u32,
    pub seed: u64,
    pub bins: usize,
    pub regret: f64,
    pub regret_times_t: f64,
    pub normalized_regret: f64,
    pub estimation_error: f64,
    pub approximation_error: f64,
    pub empty_bin_count: usize,
}

impl CsvRow {
    pub fn new(id: &RunId, bins: usize, report: &RegretReport) -> Self {
        CsvRow {
            beta: id.beta,
            horizon: id.horizon,
            rep: id.rep,
            seed: id.seed,
            bins,
            regret: report.regret,
            regret_times_t: report.regret * id.horizon as f64,
            normalized_regret: report.normalized_regret,
            estimation_error: report.estimation_error,
            approximation_error: report.approximation_error,
            empty_bin_count: report.empty_bins,
        }
    }

    fn fields(&self) -> [String; 11] {
        [
            self.beta.to_string(),
            self.horizon.to_string(),
            self.rep.to_string(),
            self.seed.to_string(),
            self.bins.to_string(),
            self.regret.to_string(),
            self.regret_times_t.to_string(),
            self.normalized_regret.to_string(),
            self.estimation_error.to_string(),
            self.approximation_error.to_string(),
            self.empty_bin_count.to_string(),
        ]
    }

    /// Parses a record produced by [`write_csv`].
    pub fn parse(fields: &[&str]) -> Result<Self> {
        if fields.len() != CSV_HEADER.len() {
            return Err(Error::Input(format!(
                "expected {} columns, got {}",
                CSV_HEADER.len(),
                fields.len()
            )));
        }
        fn num<T: std::str::FromStr>(s: &str) -> Result<T> {
            s.parse()
                .map_err(|_| Error::Input(format!("bad CSV field `{s}`")))
        }
        Ok(CsvRow {
            beta: num(fields[0])?,
            horizon: num(fields[1])?,
            rep: num(fields[2])?,
            seed: num(fields[3])?,
            bins: num(fields[4])?,
            regret: num(fields[5])?,
            regret_times_t: num(fields[6])?,
            normalized_regret: num(fields[7])?,
            estimation_error: num(fields[8])?,
            approximation_error: num(fields[9])?,
            empty_bin_count: num(fields[10])?,
        })
    }
}

/// A failed run, written to the companion error file.
#[derive(Debug, Clone, PartialEq)]
pub struct FailureRow {
    pub id: RunId,
    pub message: String,
}

/// Splits sweep records into CSV rows and failures, keeping order.
pub fn collect_rows(records: &[SweepRecord]) -> (Vec<CsvRow>, Vec<FailureRow>) {
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for record in records {
        match &record.outcome {
            Ok((result, report)) => {
                rows.push(CsvRow::new(&record.id, result.grid.bins_per_axis(), report))
            }
            Err(message) => failures.push(FailureRow {
                id: record.id,
                message: message.clone(),
            }),
        }
    }
    (rows, failures)
}

fn csv_error(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::Data(format!("{other:?}")),
    }
}

/// Serialises rows with the fixed header, LF line endings.
pub fn write_csv(rows: &[CsvRow]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(CSV_HEADER).map_err(csv_error)?;
    for row in rows {
        w.write_record(row.fields()).map_err(csv_error)?;
    }
    w.into_inner().map_err(|e| Error::Data(e.to_string()))
}

pub fn write_failures_csv(failures: &[FailureRow]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(ERROR_CSV_HEADER).map_err(csv_error)?;
    for f in failures {
        let record = [
            f.id.beta.to_string(),
            f.id.horizon.to_string(),
            f.id.rep.to_string(),
            f.id.seed.to_string(),
            f.message.clone(),
        ];
        w.write_record(&record).map_err(csv_error)?;
    }
    w.into_inner().map_err(|e| Error::Data(e.to_string()))
}

/// Reads a results CSV back, checking the header.
pub fn read_csv(bytes: &[u8]) -> Result<Vec<CsvRow>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(bytes);
    let header = r.headers().map_err(csv_error)?.clone();
    if header.iter().ne(CSV_HEADER.iter().copied()) {
        return Err(Error::Input("unexpected CSV header".into()));
    }
    r.records()
        .map(|rec| {
            let rec = rec.map_err(csv_error)?;
            CsvRow::parse(&rec.iter().collect::<Vec<_>>())
        })
        .collect()
}

/// OLS slope of `log(mean regret)` against `log T`, with its standard error.
/// Horizons whose mean regret is not positive are dropped with a warning.
pub fn fit_rate_slope(rows: &[CsvRow]) -> Result<(f64, f64)> {
    let mut by_horizon: BTreeMap<u64, Vec<f64>> = BTreeMap::new();
    for row in rows {
        by_horizon.entry(row.horizon).or_default().push(row.regret);
    }
    if by_horizon.len() < 3 {
        return Err(Error::Input(format!(
            "slope fit needs at least 3 distinct horizons, got {}",
            by_horizon.len()
        )));
    }
    let mut x = Vec::new();
    let mut y = Vec::new();
    for (horizon, regrets) in &by_horizon {
        let m = stats::mean(regrets);
        if m > 0.0 {
            x.push((*horizon as f64).ln());
            y.push(m.ln());
        } else {
            log::warn!(
                "dropping T = {horizon} from the slope fit: mean regret {m} is not positive"
            );
        }
    }
    if x.len() < 3 {
        return Err(Error::Input(format!(
            "only {} horizons with positive mean regret remain",
            x.len()
        )));
    }
    stats::ols_slope(&x, &y)
}

/// Per-β summary of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct BetaSummary {
    pub beta: f64,
    pub runs: usize,
    pub fast_normalized: (f64, f64),
    pub slow_normalized: (f64, f64),
    pub slope: std::result::Result<(f64, f64), String>,
    pub fast_exponent: f64,
}

pub fn summarize(rows: &[CsvRow], dim: usize) -> Vec<BetaSummary> {
    let mut betas: Vec<f64> = Vec::new();
    for row in rows {
        if !betas.iter().any(|b| b.to_bits() == row.beta.to_bits()) {
            betas.push(row.beta);
        }
    }
    betas
        .into_iter()
        .map(|beta| {
            let subset: Vec<CsvRow> = rows
                .iter()
                .filter(|r| r.beta.to_bits() == beta.to_bits())
                .cloned()
                .collect();
            let fast: Vec<f64> = subset.iter().map(|r| r.normalized_regret).collect();
            let slow: Vec<f64> = subset
                .iter()
                .map(|r| r.regret / slow_rate(r.horizon, beta, dim))
                .collect();
            BetaSummary {
                beta,
                runs: subset.len(),
                fast_normalized: (stats::mean(&fast), stats::standard_error(&fast)),
                slow_normalized: (stats::mean(&slow), stats::standard_error(&slow)),
                slope: fit_rate_slope(&subset).map_err(|e| e.to_string()),
                fast_exponent: -2.0 * beta / (2.0 * beta + dim as f64),
            }
        })
        .collect()
}

/// Text summary: resolved settings as comment lines, then one block per β.
pub fn render_summary(spec: &SweepSpec, summaries: &[BetaSummary], failures: usize) -> String {
    let mut s = String::new();
    for (key, value, source) in &spec.provenance {
        let _ = writeln!(s, "# {key} = {value} ({})", source.label());
    }
    let _ = writeln!(s, "# failed runs = {failures}");
    for b in summaries {
        let _ = writeln!(s, "beta = {} ({} runs)", b.beta, b.runs);
        let _ = writeln!(
            s,
            "  normalized regret, fast rate (T/log^2 T)^(-2b/(2b+d)): mean {:.6e} stderr {:.3e}",
            b.fast_normalized.0, b.fast_normalized.1
        );
        let _ = writeln!(
            s,
            "  normalized regret, slow rate (T/log T)^(-b/(2b+d)):    mean {:.6e} stderr {:.3e}",
            b.slow_normalized.0, b.slow_normalized.1
        );
        match &b.slope {
            Ok((slope, se)) => {
                let _ = writeln!(
                    s,
                    "  log-log slope of mean regret: {slope:.4} ± {se:.4} (fast exponent {:.4})",
                    b.fast_exponent
                );
            }
            Err(e) => {
                let _ = writeln!(s, "  log-log slope of mean regret: unavailable ({e})");
            }
        }
    }
    s
}

/// Everything a sweep produced.
#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub rows: Vec<CsvRow>,
    pub failures: Vec<FailureRow>,
    pub csv: Vec<u8>,
    pub summary: String,
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

/// Path of the failure file next to a results CSV.
pub fn errors_path(out: &Path) -> PathBuf {
    sibling(out, ".errors.csv")
}

/// Path of the summary file next to a results CSV.
pub fn summary_path(out: &Path) -> PathBuf {
    sibling(out, ".summary.txt")
}

/// Runs the sweep and writes `out`, `out.summary.txt` and, when runs failed,
/// `out.errors.csv`.
pub fn run_and_emit(spec: &SweepSpec, parallelism: Parallelism) -> Result<SweepOutput> {
    let configs = spec.run_configs();
    let records = run_sweep(&configs, &spec.evaluation, parallelism);
    if let Some(dir) = &spec.run_log {
        fs::create_dir_all(dir)?;
        for record in &records {
            if let Ok((result, _)) = &record.outcome {
                let id = record.id;
                result.write_run_log(&dir.join(format!(
                    "beta{}_T{}_rep{}.jsonl",
                    id.beta, id.horizon, id.rep
                )))?;
            }
        }
    }
    let (rows, failures) = collect_rows(&records);
    let csv = write_csv(&rows)?;
    let summary = render_summary(
        spec,
        &summarize(&rows, spec.environment.dim),
        failures.len(),
    );
    if let Some(out) = &spec.out {
        fs::write(out, &csv)?;
        fs::write(summary_path(out), &summary)?;
        let errors = errors_path(out);
        if failures.is_empty() {
            if errors.exists() {
                fs::remove_file(&errors)?;
            }
        } else {
            fs::write(errors, write_failures_csv(&failures)?)?;
        }
    }
    Ok(SweepOutput {
        rows,
        failures,
        csv,
        summary,
    })
}

/// Runs the margin probe for every β of the sweep and returns CSV bytes
/// (`beta,delta,lambda_tail,eta_tail`) plus a text summary.
pub fn probe_and_emit(spec: &SweepSpec, out: &Path) -> Result<String> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(["beta", "delta", "lambda_tail", "eta_tail"])
        .map_err(csv_error)?;
    let mut summary = String::new();
    for &beta in &spec.betas {
        let env = spec.environment.build(beta, spec.lambda)?;
        let seed = derive_seed(spec.seed, &[beta.to_bits()]);
        let probe = margin_probe(
            &env,
            &spec.regularizer,
            &spec.probe.deltas,
            spec.probe.samples,
            seed,
        )?;
        for i in 0..probe.deltas.len() {
            let record = [
                beta.to_string(),
                probe.deltas[i].to_string(),
                probe.lambda_tail[i].to_string(),
                probe.eta_tail[i].to_string(),
            ];
            w.write_record(&record).map_err(csv_error)?;
        }
        let show = |e: Option<f64>| e.map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}"));
        let _ = writeln!(
            summary,
            "beta = {beta}: lambda tail exponent {}, eta tail exponent {}",
            show(probe.lambda_exponent),
            show(probe.eta_exponent)
        );
    }
    let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    fs::write(out, bytes)?;
    Ok(summary)
}
