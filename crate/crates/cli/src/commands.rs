//! Subcommands of the `fqr` binary.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use fqr_core::fpca::build_basis;
use fqr_core::funcspace::derivative;
use fqr_core::regression::{fit, DEFAULT_SEED};
use fqr_core::simulation::{run_study, sweep, write_rows, SweepSpec};
use fqr_core::{
    Contamination, Curve, FitMethod, FitOptions, ModelKind, PcaMethod, ScenarioConfig, Selection, UpsilonChoice,
};

use crate::model_io::{FitJson, OfflineModel};
use crate::synth::{self, SynthOptions};
use crate::table::{parse_curves_csv, write_curves};

#[derive(Debug, Parser)]
#[command(name = "fqr", version, about = "Robust functional quadratic regression")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a functional quadratic model to a curves CSV.
    Fit(FitArgs),
    /// Predict responses for new curves from a fitted model JSON.
    Predict(PredictArgs),
    /// Export a principal-direction basis as plot-ready CSV.
    Pca(PcaArgs),
    /// Run a Monte Carlo study and write its report CSV.
    Simulate(SimulateArgs),
    /// Write a Tecator-shaped synthetic curves CSV.
    Synth(SynthArgs),
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Name of the response column.
    #[arg(long)]
    pub response: String,
    #[arg(long, default_value = "mm")]
    pub method: FitMethod,
    /// 1 to fit on first derivatives of the curves.
    #[arg(long, default_value_t = 0, value_parser = clap::value_parser!(u8).range(0..=1))]
    pub derivative: u8,
    /// Number of principal directions.
    #[arg(long, conflicts_with = "var_frac", value_parser = positive)]
    pub ncomp: Option<usize>,
    /// Share of variation the directions must explain.
    #[arg(long)]
    pub var_frac: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Model JSON written by `fqr fit`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PcaArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "spherical")]
    pub method: PcaMethod,
    #[arg(long, value_parser = positive)]
    pub ncomp: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub model: ModelKind,
    #[arg(long)]
    pub upsilon: UpsilonChoice,
    /// Scheme such as `C0`, `C2:mu=12` or `C3:mu=4,delta=0.4`.
    #[arg(long)]
    pub contamination: Contamination,
    #[arg(long, default_value_t = 300)]
    pub n: usize,
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    #[arg(long, value_delimiter = ',', default_value = "ls,mm")]
    pub methods: Vec<FitMethod>,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Grid of one contamination parameter, e.g. `mu=8:20:2`.
    #[arg(long)]
    pub sweep: Option<SweepSpec>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 215)]
    pub n: usize,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Share of responses turned into gross outliers.
    #[arg(long, default_value_t = 0.0)]
    pub outlier_frac: f64,
    #[arg(long)]
    pub out: PathBuf,
}

fn positive(s: &str) -> std::result::Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

/// Writes through a sibling temporary file so `path` only ever holds a
/// complete artifact.
fn write_atomic(path: &Path, body: impl FnOnce(&mut dyn Write) -> Result<()>) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".partial");
    let tmp = PathBuf::from(tmp);
    let result = (|| {
        let file = File::create(&tmp).with_context(|| format!("cannot create {}", tmp.display()))?;
        let mut w = BufWriter::new(file);
        body(&mut w)?;
        w.flush()?;
        std::fs::rename(&tmp, path).with_context(|| format!("cannot write {}", path.display()))
    })();
    if result.is_err() {
        let _ = std::fs::remove_file(&tmp);
    }
    result
}

fn preprocess(curves: &[Curve], order: u8) -> Result<Vec<Curve>> {
    if order == 0 {
        return Ok(curves.to_vec());
    }
    curves.iter().map(|c| derivative(c).context("derivative preprocessing needs equally spaced abscissae")).collect()
}

pub fn cmd_fit(args: &FitArgs) -> Result<()> {
    let table = parse_curves_csv(&args.input)?;
    let y = table.response(&args.response)?.to_vec();
    let curves = preprocess(&table.curves, args.derivative)?;
    let selection = match (args.ncomp, args.var_frac) {
        (Some(p), _) => Selection::Fixed(p),
        (None, Some(f)) => Selection::VarFrac(f),
        (None, None) => Selection::VarFrac(0.9),
    };
    let opts = FitOptions { method: args.method, selection, seed: args.seed, ..Default::default() };
    let result = fit(&curves, &y, &opts).context("fit failed")?;
    let json = FitJson::from_fit(&result, &table.ids, &args.response, args.derivative, table.map);
    log::info!("p = {}, sigma = {:.4}, {} outliers", json.p, json.sigma, json.outliers.len());
    write_atomic(&args.out, |w| Ok(serde_json::to_writer_pretty(w, &json)?))
}

pub fn cmd_predict(args: &PredictArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.model).with_context(|| format!("cannot read {}", args.model.display()))?;
    let json: FitJson = serde_json::from_str(&text).context("not a model file written by `fqr fit`")?;
    let model = OfflineModel::from_json(&json)?;
    let table = parse_curves_csv(&args.input)?;
    if table.grid.len() != model.grid().len()
        || table.grid.points().iter().zip(model.grid().points()).any(|(a, b)| (a - b).abs() > 1e-9)
        || (table.map.offset - json.abscissa_map.offset).abs() > 1e-9 * json.abscissa_map.offset.abs().max(1.0)
        || (table.map.scale / json.abscissa_map.scale - 1.0).abs() > 1e-9
    {
        bail!("input abscissae differ from the ones the model was fitted on");
    }
    let observed = table.response(&json.response).ok();
    let mut preds = Vec::with_capacity(table.n());
    for c in &table.curves {
        let c = Curve::new(model.grid().clone(), c.values().to_vec())?;
        preds.push(model.predict_raw(&c)?);
    }
    write_atomic(&args.out, |w| {
        let mut out = csv::Writer::from_writer(w);
        match observed {
            Some(_) => out.write_record(["id", "prediction", "residual"])?,
            None => out.write_record(["id", "prediction"])?,
        }
        for (i, p) in preds.iter().enumerate() {
            let mut row = vec![table.ids[i].clone(), p.to_string()];
            if let Some(y) = observed {
                row.push((y[i] - p).to_string());
            }
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    })
}

pub fn cmd_pca(args: &PcaArgs) -> Result<()> {
    let table = parse_curves_csv(&args.input)?;
    let m = args.ncomp.min(table.n()).min(table.m());
    if m < args.ncomp {
        log::warn!("only {m} directions available");
    }
    let basis = build_basis(&table.curves, args.method, m, None)?;
    write_atomic(&args.out, |w| {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["kind", "component", "t", "abscissa", "value"])?;
        let points = table.grid.points();
        let mut series = |kind: &str, k: usize, c: &Curve| -> Result<()> {
            for ((t, x), v) in points.iter().zip(&table.abscissae).zip(c.values()) {
                out.write_record([kind.to_string(), k.to_string(), t.to_string(), x.to_string(), v.to_string()])?;
            }
            Ok(())
        };
        series("center", 0, basis.center())?;
        for (k, d) in basis.directions().iter().enumerate() {
            series("direction", k + 1, d)?;
        }
        for (k, s) in basis.scales().iter().enumerate() {
            out.write_record(["scale".to_string(), (k + 1).to_string(), String::new(), String::new(), s.to_string()])?;
        }
        out.flush()?;
        Ok(())
    })
}

pub fn cmd_simulate(args: &SimulateArgs) -> Result<()> {
    let mut cfg = ScenarioConfig::new(args.model, args.upsilon, args.contamination);
    cfg.n = args.n;
    cfg.n_reps = args.reps;
    cfg.seed = args.seed;
    cfg.validate()?;
    if args.methods.is_empty() {
        bail!("--methods needs at least one of ls, mm");
    }
    let rows = match &args.sweep {
        Some(spec) => sweep(&cfg, spec, &args.methods)?.rows(),
        None => run_study(&cfg, &args.methods)?.rows(),
    };
    write_atomic(&args.out, |w| Ok(write_rows(&rows, w)?))
}

pub fn cmd_synth(args: &SynthArgs) -> Result<()> {
    if !(0.0..=1.0).contains(&args.outlier_frac) {
        bail!("--outlier-frac must lie in [0, 1]");
    }
    let data = synth::generate(&SynthOptions {
        n: args.n,
        seed: args.seed,
        outlier_fraction: args.outlier_frac,
        ..Default::default()
    })?;
    let responses = vec![("fat".to_string(), data.fat.clone())];
    write_atomic(&args.out, |w| Ok(write_curves(w, &data.ids, &responses, &data.wavelengths, &data.spectra)?))
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Fit(a) => cmd_fit(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Pca(a) => cmd_pca(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Synth(a) => cmd_synth(a),
    }
}
