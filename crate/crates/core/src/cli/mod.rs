//! The `hetlp` command line: simulate, estimate, bands, smooth, compare.
//!
//! Exit codes: 0 on success, 2 for invalid input or configuration, 3 when the
//! numerics fail (singular matrices, zero instrument covariance, non-convergence).

pub mod archive;
pub mod config;
pub mod ingest;
pub mod report;

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::inference::bands::{spreads, supt_cv};
use crate::inference::{
    evaluate, hac, supt_test, wild_draws, DrawSet, Functional, FunctionalDraws, Identification, KernelKind,
    KernelSpec,
};
use crate::inference::functional::{Fevd, ImpactDifference, StructuralIrf};
use crate::numeric::Panel;
use crate::pipeline::{band_triple, estimate, EstimationOptions, StructuralEstimate};
use crate::sim::{simulate, SimConfig};
use crate::smoother::{md_weights, SmoothedIrf};
use crate::structural::{cholesky_impact, SignConvention};

use archive::{Comparison, Diagnostics, ResultArchive, SeriesBands, Smoothing};
pub use config::{Bandwidth, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

pub fn exit_code(err: &Error) -> i32 {
    if err.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_INVALID
    }
}

#[derive(Debug, Parser)]
#[command(name = "hetlp", version, about = "Local-projection impulse responses with heteroskedasticity-instrument identification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a panel and instrument from a TOML process description.
    Simulate(SimulateArgs),
    /// Point estimates: responses, impact vector, variance decomposition.
    Estimate(RunArgs),
    /// Point-wise, sup-t and Bonferroni bands for the structural responses.
    Bands(BandsArgs),
    /// Minimum-distance smoothed responses and their bands.
    Smooth(RunArgs),
    /// Sup-t test of the recursive impact against the instrument-identified one.
    Compare(RunArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// TOML description of the data-generating process.
    #[arg(long)]
    pub config: PathBuf,
    /// Output CSV.
    #[arg(long, default_value = "simulated.csv")]
    pub out: PathBuf,
    /// JSON file for the population values; defaults to `<out>.truth.json`.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub t_len: Option<usize>,
}

#[derive(Debug, Args, Default)]
pub struct RunArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub instrument: Option<String>,
    #[arg(long)]
    pub shock: Option<String>,
    /// Comma-separated panel columns.
    #[arg(long, value_delimiter = ',')]
    pub variables: Option<Vec<String>>,
    #[arg(long)]
    pub date_column: Option<String>,
    #[arg(long)]
    pub lags: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    pub trend: Option<i32>,
    #[arg(long)]
    pub h1: Option<usize>,
    #[arg(long)]
    pub h2: Option<usize>,
    #[arg(long)]
    pub draws: Option<usize>,
    /// Band levels; repeat or separate with commas.
    #[arg(long, value_delimiter = ',')]
    pub alpha: Option<Vec<f64>>,
    /// `auto` or a positive integer.
    #[arg(long)]
    pub bandwidth: Option<Bandwidth>,
    #[arg(long, value_parser = parse_kernel)]
    pub kernel: Option<KernelKind>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
    /// Comma-separated variable order for the recursive comparison.
    #[arg(long, value_delimiter = ',')]
    pub ordering: Option<Vec<String>>,
    /// Reverse the sign of the identified shock.
    #[arg(long)]
    pub flip: bool,
    /// Use one linearised step per draw when smoothing.
    #[arg(long)]
    pub linearized: bool,
}

#[derive(Debug, Args)]
pub struct BandsArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Recompute bands from a saved archive instead of re-estimating.
    #[arg(long)]
    pub archive: Option<PathBuf>,
}

fn parse_kernel(s: &str) -> std::result::Result<KernelKind, String> {
    match s.to_ascii_lowercase().as_str() {
        "bartlett" => Ok(KernelKind::Bartlett),
        "truncated" => Ok(KernelKind::Truncated),
        _ => Err(format!("unknown kernel {s:?}; use bartlett or truncated")),
    }
}

impl RunArgs {
    /// Loads the config file if given and applies the flags on top.
    pub fn resolve(&self) -> Result<RunConfig> {
        let mut c = match &self.config {
            Some(p) => RunConfig::load(p)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($f:ident),*) => {$(if let Some(v) = &self.$f { c.$f = v.clone().into(); })*};
        }
        set!(input, instrument, shock, variables, date_column, ordering);
        set!(lags, trend, h1, h2, draws, alpha, bandwidth, kernel, seed, out_dir);
        if self.flip {
            c.flip = true;
        }
        if self.linearized {
            c.smooth_mode = crate::smoother::DrawMode::Linearized;
        }
        Ok(c)
    }
}

/// Runs the command line with the given arguments, writing reports to `out`.
/// Returns the process exit code.
pub fn run_with<I, T>(args: I, out: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli.command, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn dispatch(command: Command, out: &mut dyn Write) -> Result<()> {
    match command {
        Command::Simulate(a) => cmd_simulate(&a, out),
        Command::Estimate(a) => cmd_estimate(&a.resolve()?, out).map(|_| ()),
        Command::Bands(a) => match &a.archive {
            Some(p) => cmd_bands_from_archive(p, out).map(|_| ()),
            None => cmd_bands(&a.run.resolve()?, out).map(|_| ()),
        },
        Command::Smooth(a) => cmd_smooth(&a.resolve()?, out).map(|_| ()),
        Command::Compare(a) => cmd_compare(&a.resolve()?, out).map(|_| ()),
    }
}

fn write_panel_csv<W: Write>(w: &mut csv::Writer<W>, dates: &[String], panel: &Panel, z: &[f64]) -> Result<()> {
    let mut header = vec!["date".to_string()];
    header.extend(panel.names().iter().cloned());
    header.push("z".to_string());
    w.write_record(&header)?;
    for t in 0..panel.len() {
        let mut rec = vec![dates[t].clone()];
        rec.extend(panel.values().row(t).iter().map(|v| v.to_string()));
        rec.push(z[t].to_string());
        w.write_record(&rec)?;
    }
    Ok(())
}

pub fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", args.config.display())))?;
    let mut cfg: SimConfig =
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", args.config.display())))?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(t) = args.t_len {
        cfg.t_len = t;
    }
    let sim = simulate(&cfg)?;
    let dates: Vec<String> = (1..=sim.panel.len()).map(|t| t.to_string()).collect();
    let mut w = csv::Writer::from_path(&args.out)?;
    write_panel_csv(&mut w, &dates, &sim.panel, &sim.instrument)?;
    w.flush()?;
    let truth_path = args.truth.clone().unwrap_or_else(|| {
        let mut p = args.out.clone().into_os_string();
        p.push(".truth.json");
        PathBuf::from(p)
    });
    let truth = serde_json::json!({
        "config": cfg,
        "names": sim.panel.names(),
        "instrument_column": "z",
        "true_impact": sim.true_impact,
        "true_irf": sim.true_irf,
        "true_theta": sim.true_theta,
    });
    std::fs::write(&truth_path, serde_json::to_string_pretty(&truth)?)?;
    writeln!(
        out,
        "wrote {} periods of {} variables to {} (population values in {})",
        sim.panel.len(),
        sim.panel.dim(),
        args.out.display(),
        truth_path.display()
    )?;
    Ok(())
}

/// Data, estimate and archive shared by every analysis command.
pub struct Session {
    pub config: RunConfig,
    pub panel: Panel,
    pub instrument: Vec<f64>,
    pub estimate: StructuralEstimate,
    pub archive: ResultArchive,
}

impl Session {
    pub fn id(&self) -> Identification {
        identification(&self.archive)
    }
}

fn identification(a: &ResultArchive) -> Identification {
    Identification {
        lags: a.config.lags,
        sign: SignConvention { variable: a.shock_index, flip: a.config.flip },
        names: a.names.clone(),
    }
}

pub fn load_session(config: &RunConfig, command: &str) -> Result<Session> {
    config.validate()?;
    let input = config.input.as_ref().expect("validated");
    let instrument = config.instrument.as_ref().expect("validated");
    let shock_name = config.shock.as_ref().expect("validated");
    let data = ingest::read_csv_path(input, config.date_column.as_deref())?;
    let variables = match &config.variables {
        Some(v) => v.clone(),
        None => data.numeric_columns_except(instrument),
    };
    let (panel, z) = data.select(&variables, instrument)?;
    let shock = variables
        .iter()
        .position(|v| v == shock_name)
        .ok_or_else(|| Error::Config(format!("shock variable '{shock_name}' is not among the panel columns")))?;
    let opts = EstimationOptions { score_form: config.score_form, fevd_form: config.fevd_form, flip: config.flip };
    let est = estimate(&panel, &z, &config.design(), shock, &opts)?;
    let bandwidth = config.bandwidth.fixed().unwrap_or_else(|| est.default_bandwidth());
    let kernel = KernelSpec { kind: config.kernel, bandwidth, scale: Default::default() };
    let omega = hac(&est.scores, &kernel)?;
    let m = est.scores.m() as f64;
    let diagnostics = Diagnostics {
        bandwidth,
        score_rows: est.scores.m(),
        effective_rows: est.lp.residuals.blocks.iter().map(|b| b.rows()).collect(),
        hac_std_errors: omega.diagonal().iter().map(|v| (v.max(0.0) / m).sqrt()).collect(),
        warnings: est.warnings.clone(),
    };
    let archive = ResultArchive::new(
        command,
        config,
        variables,
        data.dates.as_ref().and_then(|d| d.first().cloned()),
        &est,
        diagnostics,
    );
    Ok(Session { config: config.clone(), panel, instrument: z, estimate: est, archive })
}

fn save(archive: &ResultArchive, out: &mut dyn Write) -> Result<PathBuf> {
    std::fs::create_dir_all(&archive.config.out_dir)?;
    let path = archive.config.out_dir.join("archive.json");
    archive.save(&path)?;
    writeln!(out, "archive written to {}", path.display())?;
    Ok(path)
}

pub fn cmd_estimate(config: &RunConfig, out: &mut dyn Write) -> Result<ResultArchive> {
    let s = load_session(config, "estimate")?;
    let a = &s.archive;
    writeln!(out, "impact of a one-standard-deviation shock to {} (b' Sigma^-1 b = {:.12})", a.names[a.shock_index], a.impact.normalization_check)?;
    let impact: Vec<Vec<String>> =
        a.names.iter().zip(a.impact.b.iter()).map(|(n, v)| vec![n.clone(), report::num(*v)]).collect();
    write!(out, "{}", report::table(&["variable".into(), "impact".into()], &impact))?;
    writeln!(out, "\nstructural responses")?;
    write!(out, "{}", report::irf_table(&a.names, &s.estimate.psi))?;
    let hmax = a.fevd.max_horizon();
    writeln!(out, "\nvariance share of the shock at horizon {hmax}")?;
    let shares: Vec<Vec<String>> =
        a.names.iter().enumerate().map(|(r, n)| vec![n.clone(), report::num(a.fevd.share(r, hmax))]).collect();
    write!(out, "{}", report::table(&["variable".into(), "share".into()], &shares))?;
    for w in &a.diagnostics.warnings {
        writeln!(out, "warning: {w}")?;
    }
    save(a, out)?;
    Ok(s.archive)
}

fn draws_for(a: &ResultArchive) -> Result<DrawSet> {
    wild_draws(&a.scores, &a.theta, a.config.draws, a.diagnostics.bandwidth, a.config.seed)
}

/// Splits a stacked per-variable functional into one band record per variable.
fn per_variable_bands(
    label: &str,
    fd: &FunctionalDraws,
    names: &[String],
    per: usize,
    alphas: &[f64],
) -> Result<Vec<SeriesBands>> {
    names
        .iter()
        .enumerate()
        .map(|(v, name)| {
            let sub = fd.subset(v * per..(v + 1) * per);
            Ok(SeriesBands {
                functional: label.to_string(),
                series: name.clone(),
                dropped_draws: sub.dropped,
                levels: alphas.iter().map(|al| band_triple(&sub, *al)).collect::<Result<Vec<_>>>()?,
            })
        })
        .collect()
}

fn irf_bands(a: &ResultArchive, draws: &DrawSet) -> Result<Vec<SeriesBands>> {
    let n = a.names.len();
    let h2 = a.config.h2;
    let f = StructuralIrf { id: identification(a), variables: (0..n).collect(), h2 };
    let fd = evaluate(draws, &f)?;
    let mut bands = per_variable_bands("irf", &fd, &a.names, h2 + 1, &a.config.alpha)?;
    for v in 0..n {
        let f = Fevd { id: identification(a), variable: v, max_h: h2, form: a.config.fevd_form };
        let fd = evaluate(draws, &f)?;
        // shares of the shock variable itself can be degenerate at short horizons
        if spreads(&fd).iter().all(|s| *s > 0.0) {
            bands.extend(per_variable_bands("fevd", &fd, &a.names[v..=v], h2, &a.config.alpha)?);
        }
    }
    Ok(bands)
}

fn finish_bands(mut archive: ResultArchive, out: &mut dyn Write) -> Result<ResultArchive> {
    let draws = draws_for(&archive)?;
    archive.bands = irf_bands(&archive, &draws)?;
    archive.command = "bands".into();
    for sb in archive.bands.iter().filter(|b| b.functional == "irf") {
        writeln!(out, "{}", report::band_table(sb, 0))?;
    }
    std::fs::create_dir_all(&archive.config.out_dir)?;
    let csv_path = archive.config.out_dir.join("bands.csv");
    report::write_bands_csv(&csv_path, &archive.bands)?;
    writeln!(out, "bands written to {}", csv_path.display())?;
    save(&archive, out)?;
    Ok(archive)
}

pub fn cmd_bands(config: &RunConfig, out: &mut dyn Write) -> Result<ResultArchive> {
    let s = load_session(config, "bands")?;
    finish_bands(s.archive, out)
}

/// Recomputes the bands from the stored scores, estimate and seed.
pub fn cmd_bands_from_archive(path: &Path, out: &mut dyn Write) -> Result<ResultArchive> {
    let archive = ResultArchive::load(path)?;
    finish_bands(archive, out)
}

pub fn cmd_smooth(config: &RunConfig, out: &mut dyn Write) -> Result<ResultArchive> {
    let s = load_session(config, "smooth")?;
    let mut a = s.archive.clone();
    let draws = draws_for(&a)?;
    let (weights, mut warnings) = md_weights(&draws);
    let n = a.names.len();
    let h2 = a.config.h2;
    let f = SmoothedIrf::new(s.id(), (0..n).collect(), h2, &a.theta, weights, a.config.smooth_mode)?;
    warnings.extend(f.point.warnings());
    let center = f.eval(&a.theta)?;
    let fd = evaluate(&draws, &f)?;
    warnings.extend(fd.warnings());
    a.bands = per_variable_bands("smoothed_irf", &fd, &a.names, h2 + 1, &a.config.alpha)?;
    let psi: Vec<Vec<f64>> = (0..=h2).map(|h| (0..n).map(|v| center[v * (h2 + 1) + h]).collect()).collect();
    writeln!(
        out,
        "minimum distance fit: objective {:.6e} (initial {:.6e}), {} iterations, converged {}",
        f.point.objective_value, f.point.initial_objective, f.point.iterations, f.point.converged
    )?;
    let psi_vec: Vec<nalgebra::DVector<f64>> = psi.iter().map(|p| nalgebra::DVector::from_row_slice(p)).collect();
    writeln!(out, "smoothed structural responses")?;
    write!(out, "{}", report::irf_table(&a.names, &psi_vec))?;
    for sb in &a.bands {
        write!(out, "\n{}", report::band_table(sb, 0))?;
    }
    for w in &warnings {
        writeln!(out, "warning: {w}")?;
    }
    a.diagnostics.warnings.extend(warnings);
    a.smoothing = Some(Smoothing { solution: f.point.clone(), psi });
    a.command = "smooth".into();
    std::fs::create_dir_all(&a.config.out_dir)?;
    let csv_path = a.config.out_dir.join("smoothed_bands.csv");
    report::write_bands_csv(&csv_path, &a.bands)?;
    writeln!(out, "bands written to {}", csv_path.display())?;
    save(&a, out)?;
    Ok(a)
}

fn ordering_indices(a: &ResultArchive) -> Result<Vec<usize>> {
    match &a.config.ordering {
        None => Ok((0..a.names.len()).collect()),
        Some(o) => o
            .iter()
            .map(|name| {
                a.names
                    .iter()
                    .position(|n| n == name)
                    .ok_or_else(|| Error::Config(format!("ordering names unknown variable '{name}'")))
            })
            .collect(),
    }
}

pub fn cmd_compare(config: &RunConfig, out: &mut dyn Write) -> Result<ResultArchive> {
    let s = load_session(config, "compare")?;
    let mut a = s.archive.clone();
    let ordering = ordering_indices(&a)?;
    let draws = draws_for(&a)?;
    let f = ImpactDifference { id: s.id(), ordering: ordering.clone() };
    let fd = evaluate(&draws, &f)?;
    let test = supt_test(&fd, &vec![0.0; a.names.len()])?;
    let sigma = spreads(&fd);
    let critical_values =
        a.config.alpha.iter().map(|al| supt_cv(&fd, &sigma, *al).map(|c| (*al, c))).collect::<Result<Vec<_>>>()?;
    let chol = cholesky_impact(&a.theta.sigma, a.shock_index, &ordering)?;
    let comparison = Comparison {
        ordering: ordering.iter().map(|&i| a.names[i].clone()).collect(),
        cholesky_impact: chol.b.iter().copied().collect(),
        het_impact: a.impact.b.iter().copied().collect(),
        test,
        critical_values,
    };
    let rows: Vec<Vec<String>> = a
        .names
        .iter()
        .enumerate()
        .map(|(i, n)| {
            vec![
                n.clone(),
                report::num(comparison.cholesky_impact[i]),
                report::num(comparison.het_impact[i]),
                report::num(comparison.cholesky_impact[i] - comparison.het_impact[i]),
            ]
        })
        .collect();
    let header = ["variable", "recursive", "instrument", "difference"].map(String::from);
    write!(out, "{}", report::table(&header, &rows))?;
    writeln!(out, "sup-t statistic {:.4}, p-value {:.4}", test.statistic, test.p_value)?;
    for (al, cv) in &comparison.critical_values {
        writeln!(out, "critical value at alpha {al}: {cv:.4}")?;
    }
    a.comparison = Some(comparison);
    a.command = "compare".into();
    a.diagnostics.warnings.extend(fd.warnings());
    save(&a, out)?;
    Ok(a)
}

/// The bootstrap draws an archive's bands are built from.
pub fn archive_draws(a: &ResultArchive) -> Result<DrawSet> {
    draws_for(a)
}
