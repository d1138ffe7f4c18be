//! Replication loop, error metrics and report tables.

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::{Contamination, ScenarioConfig};
use super::models::{generate, on_truth_grid, stream_rng, truth_for, Stream, TruthSet};
use crate::error::{FqrError, Result};
use crate::funcspace::{Curve, Surface};
use crate::regression::{fit, FitMethod};

/// Largest tolerated share of failed fits per estimator.
pub const MAX_FAILURE_RATE: f64 = 0.02;

/// Replications dispatched to the thread pool at a time.
const CHUNK: usize = 64;

/// Squared bias and MISE, untrimmed and trimmed.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct MetricSet {
    pub bias2: f64,
    pub mise: f64,
    pub bias2_trim: f64,
    pub mise_trim: f64,
}

impl MetricSet {
    pub const NAMES: [&'static str; 4] = ["bias2", "mise", "bias2_trim", "mise_trim"];

    pub fn values(&self) -> [f64; 4] {
        [self.bias2, self.mise, self.bias2_trim, self.mise_trim]
    }
}

/// Number of grid points dropped at each end: `floor(M · trim)`.
pub fn trim_count(m: usize, trim_fraction: f64) -> usize {
    (m as f64 * trim_fraction).floor() as usize
}

/// Running per-cell mean and sum of squared deviations of estimation errors.
#[derive(Debug, Clone)]
struct CellStats {
    count: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl CellStats {
    fn new(cells: usize) -> Self {
        CellStats { count: 0, mean: vec![0.0; cells], m2: vec![0.0; cells] }
    }

    fn push(&mut self, est: &[f64], truth: &[f64]) {
        self.count += 1;
        let k = self.count as f64;
        for (c, (e, t)) in est.iter().zip(truth).enumerate() {
            let err = e - t;
            let delta = err - self.mean[c];
            self.mean[c] += delta / k;
            self.m2[c] += delta * (err - self.mean[c]);
        }
    }

    /// Averages of squared mean error and mean squared error over the cells
    /// selected by `keep`. Each cell's MSE is `mean² + var` with `var ≥ 0`,
    /// so MISE ≥ Bias² survives rounding.
    fn summarize(&self, keep: impl Iterator<Item = usize>) -> (f64, f64) {
        let r = self.count as f64;
        let (mut bias, mut mise, mut cells) = (0.0, 0.0, 0usize);
        for c in keep {
            let b = self.mean[c] * self.mean[c];
            let var = (self.m2[c] / r).max(0.0);
            bias += b;
            mise += b + var;
            cells += 1;
        }
        (bias / cells as f64, mise / cells as f64)
    }
}

/// Accumulates slope and kernel estimates of one estimator.
#[derive(Debug, Clone)]
pub struct MetricsAccumulator {
    m: usize,
    q: usize,
    beta_truth: Vec<f64>,
    upsilon_truth: Vec<f64>,
    beta: CellStats,
    upsilon: CellStats,
}

impl MetricsAccumulator {
    pub fn new(truth: &TruthSet, trim_fraction: f64) -> Result<Self> {
        if !(0.0..0.5).contains(&trim_fraction) {
            return Err(FqrError::InvalidInput(format!("trim fraction {trim_fraction} not in [0, 0.5)")));
        }
        let m = truth.grid().len();
        Ok(MetricsAccumulator {
            m,
            q: trim_count(m, trim_fraction),
            beta_truth: truth.beta0.values().to_vec(),
            upsilon_truth: truth.upsilon0.values().as_slice().to_vec(),
            beta: CellStats::new(m),
            upsilon: CellStats::new(m * m),
        })
    }

    pub fn push(&mut self, truth: &TruthSet, beta: &Curve, upsilon: &Surface) -> Result<()> {
        if !on_truth_grid(truth, beta) || !crate::funcspace::same_grid(truth.grid(), upsilon.grid()) {
            return Err(FqrError::GridMismatch);
        }
        self.beta.push(beta.values(), &self.beta_truth);
        self.upsilon.push(upsilon.values().as_slice(), &self.upsilon_truth);
        Ok(())
    }

    pub fn count(&self) -> usize {
        self.beta.count
    }

    /// `(β̂ metrics, υ̂ metrics)`.
    pub fn finish(&self) -> Result<(MetricSet, MetricSet)> {
        if self.count() == 0 {
            return Err(FqrError::EmptySample);
        }
        let (m, q) = (self.m, self.q);
        let (b_bias, b_mise) = self.beta.summarize(0..m);
        let (b_bias_t, b_mise_t) = self.beta.summarize(q..m - q);
        let (u_bias, u_mise) = self.upsilon.summarize(0..m * m);
        let (u_bias_t, u_mise_t) =
            self.upsilon.summarize((q..m - q).flat_map(move |j| (q..m - q).map(move |i| j * m + i)));
        Ok((
            MetricSet { bias2: b_bias, mise: b_mise, bias2_trim: b_bias_t, mise_trim: b_mise_t },
            MetricSet { bias2: u_bias, mise: u_mise, bias2_trim: u_bias_t, mise_trim: u_mise_t },
        ))
    }
}

/// Bias² and MISE of a batch of `(β̂, Υ̂)` estimates against the truth.
pub fn metrics(estimates: &[(Curve, Surface)], truth: &TruthSet, trim_fraction: f64) -> Result<(MetricSet, MetricSet)> {
    let mut acc = MetricsAccumulator::new(truth, trim_fraction)?;
    for (b, u) in estimates {
        acc.push(truth, b, u)?;
    }
    acc.finish()
}

/// Summary of one estimator over a study.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EstimatorSummary {
    pub estimator: FitMethod,
    pub beta: MetricSet,
    pub upsilon: MetricSet,
    pub intercept_abs_mean: f64,
    pub intercept_sd: f64,
    /// Replications that entered the metrics.
    pub reps: usize,
    pub failures: usize,
}

/// Scenario settings echoed in reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScenarioEcho {
    pub label: String,
    pub model: String,
    pub upsilon: String,
    pub contamination: String,
    pub n: usize,
    pub n_reps: usize,
    pub grid_size: usize,
    pub seed: u64,
    pub trim_fraction: f64,
}

impl From<&ScenarioConfig> for ScenarioEcho {
    fn from(cfg: &ScenarioConfig) -> Self {
        ScenarioEcho {
            label: cfg.label(),
            model: cfg.model.to_string(),
            upsilon: cfg.upsilon.to_string(),
            contamination: cfg.contamination.to_string(),
            n: cfg.n,
            n_reps: cfg.n_reps,
            grid_size: cfg.grid_size,
            seed: cfg.seed,
            trim_fraction: cfg.trim_fraction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyReport {
    pub scenario: ScenarioEcho,
    pub estimators: Vec<EstimatorSummary>,
}

/// One line of the study CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyRow {
    pub scenario: String,
    pub estimator: String,
    pub metric: String,
    pub target: String,
    pub value: f64,
    pub reps: usize,
    pub failures: usize,
}

impl StudyReport {
    pub fn estimator(&self, method: FitMethod) -> Option<&EstimatorSummary> {
        self.estimators.iter().find(|e| e.estimator == method)
    }

    /// One row per estimator × metric × target (eight per estimator). The
    /// intercept summaries are only part of the JSON form.
    pub fn rows(&self) -> Vec<StudyRow> {
        let mut rows = Vec::new();
        for e in &self.estimators {
            for (target, set) in [("beta", &e.beta), ("upsilon", &e.upsilon)] {
                for (name, value) in MetricSet::NAMES.iter().zip(set.values()) {
                    rows.push(StudyRow {
                        scenario: self.scenario.label.clone(),
                        estimator: e.estimator.to_string(),
                        metric: (*name).into(),
                        target: target.into(),
                        value,
                        reps: e.reps,
                        failures: e.failures,
                    });
                }
            }
        }
        rows
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| FqrError::Serialization(e.to_string()))
    }
}

/// Writes rows with a header to any writer.
pub fn write_rows<W: Write>(rows: &[StudyRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| FqrError::Serialization(e.to_string()))?;
    }
    w.flush().map_err(|e| FqrError::Serialization(e.to_string()))
}

struct RepEstimate {
    beta: Curve,
    upsilon: Surface,
    alpha: f64,
}

fn run_replication(
    cfg: &ScenarioConfig,
    truth: &TruthSet,
    rep: u64,
    methods: &[FitMethod],
) -> Result<Vec<Result<RepEstimate>>> {
    let sample = generate(cfg, truth, rep)?;
    let fit_seed: u64 = stream_rng(cfg.seed, rep, Stream::Fit).random();
    Ok(methods
        .iter()
        .map(|&method| {
            let opts = cfg.fit_options(method, fit_seed);
            fit(&sample.curves, &sample.y, &opts).map(|f| RepEstimate {
                beta: f.beta_uncentered,
                upsilon: f.upsilon,
                alpha: f.alpha_uncentered,
            })
        })
        .collect())
}

/// Runs every replication of `cfg` for each method. Replications run in
/// parallel; results are folded in replication order, so the report does
/// not depend on the number of threads.
pub fn run_study(cfg: &ScenarioConfig, methods: &[FitMethod]) -> Result<StudyReport> {
    cfg.validate()?;
    if methods.is_empty() {
        return Err(FqrError::InvalidInput("no estimators requested".into()));
    }
    let truth = truth_for(cfg)?;
    let mut accs = vec![MetricsAccumulator::new(&truth, cfg.trim_fraction)?; methods.len()];
    let mut alphas: Vec<Vec<f64>> = vec![Vec::with_capacity(cfg.n_reps); methods.len()];
    let mut failures = vec![0usize; methods.len()];

    let reps: Vec<u64> = (0..cfg.n_reps as u64).collect();
    for chunk in reps.chunks(CHUNK) {
        let outcomes: Vec<Result<Vec<Result<RepEstimate>>>> =
            chunk.par_iter().map(|&rep| run_replication(cfg, &truth, rep, methods)).collect();
        for (rep, outcome) in chunk.iter().zip(outcomes) {
            for (k, est) in outcome?.into_iter().enumerate() {
                match est {
                    Ok(e) => {
                        accs[k].push(&truth, &e.beta, &e.upsilon)?;
                        alphas[k].push(e.alpha);
                    }
                    Err(err) => {
                        log::warn!("replication {rep}: {} fit failed: {err}", methods[k]);
                        failures[k] += 1;
                    }
                }
            }
        }
        log::info!("{}: {}/{} replications", cfg.label(), chunk.last().map_or(0, |r| r + 1), cfg.n_reps);
    }

    let mut estimators = Vec::with_capacity(methods.len());
    for (k, &method) in methods.iter().enumerate() {
        if failures[k] as f64 > MAX_FAILURE_RATE * cfg.n_reps as f64 || accs[k].count() == 0 {
            return Err(FqrError::StudyFailed {
                estimator: method.to_string(),
                failures: failures[k],
                reps: cfg.n_reps,
            });
        }
        let (beta, upsilon) = accs[k].finish()?;
        let (mean, sd) = mean_sd(&alphas[k]);
        estimators.push(EstimatorSummary {
            estimator: method,
            beta,
            upsilon,
            intercept_abs_mean: mean.abs(),
            intercept_sd: sd,
            reps: accs[k].count(),
            failures: failures[k],
        });
    }
    Ok(StudyReport { scenario: cfg.into(), estimators })
}

fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (mean, 0.0);
    }
    let ss: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Arithmetic grid of values for one contamination parameter, e.g. `mu=8:20:2`.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub param: String,
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl SweepSpec {
    /// `start, start + step, …` up to and including `stop`.
    pub fn values(&self) -> Vec<f64> {
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..count).map(|k| self.start + k as f64 * self.step).collect()
    }
}

impl fmt::Display for SweepSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={}:{}:{}", self.param, self.start, self.stop, self.step)
    }
}

impl FromStr for SweepSpec {
    type Err = FqrError;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || FqrError::InvalidInput(format!("sweep '{s}' is not of the form name=start:stop:step"));
        let (param, range) = s.split_once('=').ok_or_else(bad)?;
        let parts: Vec<f64> =
            range.split(':').map(|p| p.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<_>>()?;
        let [start, stop, step] = parts[..] else { return Err(bad()) };
        let param = param.trim().to_string();
        if param != "mu" && param != "delta" {
            return Err(FqrError::InvalidInput(format!("cannot sweep '{param}'; use mu or delta")));
        }
        if !(start.is_finite() && stop.is_finite() && step.is_finite()) || step <= 0.0 || stop < start {
            return Err(bad());
        }
        Ok(SweepSpec { param, start, stop, step })
    }
}

/// Studies at every grid point of a sweep.
#[derive(Debug, Clone)]
pub struct SweepReport {
    pub spec: SweepSpec,
    pub points: Vec<StudyReport>,
}

impl SweepReport {
    /// Rows of every grid point followed by worst-case rows labelled
    /// `<scenario>/max(<sweep>)`, each carrying the maximum over the grid.
    pub fn rows(&self) -> Vec<StudyRow> {
        let mut rows: Vec<StudyRow> = self.points.iter().flat_map(|p| p.rows()).collect();
        let Some(first) = self.points.first() else { return rows };
        let prefix = format!(
            "{}/{}/{}",
            first.scenario.model,
            first.scenario.upsilon,
            first.scenario.contamination.split(':').next().unwrap_or("")
        );
        let label = format!("{prefix}/max({})", self.spec);
        let mut max_rows: Vec<StudyRow> = first.rows();
        for r in &mut max_rows {
            r.scenario = label.clone();
        }
        for point in &self.points[1..] {
            for (m, r) in max_rows.iter_mut().zip(point.rows()) {
                if r.value > m.value {
                    m.value = r.value;
                    m.reps = r.reps;
                    m.failures = r.failures;
                }
            }
        }
        rows.extend(max_rows);
        rows
    }
}

/// Runs `run_study` at each value of the swept parameter.
pub fn sweep(base: &ScenarioConfig, spec: &SweepSpec, methods: &[FitMethod]) -> Result<SweepReport> {
    if base.contamination == Contamination::C0 {
        return Err(FqrError::InvalidInput("nothing to sweep under C0".into()));
    }
    let mut points = Vec::new();
    for v in spec.values() {
        let cfg = ScenarioConfig { contamination: base.contamination.with_param(&spec.param, v)?, ..*base };
        points.push(run_study(&cfg, methods)?);
    }
    Ok(SweepReport { spec: spec.clone(), points })
}
