//! `rmflab`: spectra, identity checks and disorder experiments for lattice
//! Schrödinger operators in random magnetic fields.

mod config;

use std::f64::consts::FRAC_PI_4;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use rmflab::ensemble::output::{
    file_stem, ids_plot, localization_plot, wegner_plot, write_csv, write_experiment, PlotPoint,
};
use rmflab::ensemble::{
    ids_estimate, lifshitz_diagnostic, linspace, localization_diagnostics, run_parallel,
    threshold_sweep, wegner_experiment, ExperimentConfig, RunOptions, StateSelection,
};
use rmflab::gauge::{FluxField, Gauge, VectorPotential};
use rmflab::lattice::BoxRegion;
use rmflab::operator::{AssemblyFault, HamiltonianMatrix};
use rmflab::randomfield::{sample, DensityMode, Disorder, FluxDensity};
use rmflab::regularity::{current_lower_bound, scaling_study, CertificateRecord};
use rmflab::rng::mix_seed;
use rmflab::verify::{run_instance, run_suites, Suite, SuiteResult, VerifyConfig};

use config::{resolve, Overrides, RunManifest, SuiteSummary};

const EXIT_IO: u8 = 1;
const EXIT_USAGE: u8 = 2;
const EXIT_VERIFICATION: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

#[derive(Parser)]
#[command(name = "rmflab", version, about)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct GlobalArgs {
    /// Directory for CSV, JSON and manifest output.
    #[arg(long, global = true, env = "RMFLAB_OUT_DIR", default_value = ".")]
    out_dir: PathBuf,
    /// JSON config file; command-line flags take precedence over it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Print the resolved configuration and exit.
    #[arg(long, global = true)]
    dry_run: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Eigenvalues (and optionally eigenvectors) of one instance.
    Spectrum(SpectrumArgs),
    /// Randomised identity and inequality suites.
    Verify(VerifyArgs),
    /// Eigenvalue counts in windows `[E − η/2, E + η/2]`.
    Wegner(WegnerArgs),
    /// Integrated density of states and the Lifshitz diagnostic.
    Ids(IdsArgs),
    /// Decay fits and IPR of band-edge eigenfunctions.
    Localize(LocalizeArgs),
    /// Square and current-bound certificates for every eigenpair below `E*`.
    Certify(CertifyArgs),
    /// Exploratory square search over thresholds, including above `E_crit`.
    Sweep(SweepArgs),
}

#[derive(Args)]
struct SpectrumArgs {
    #[arg(long = "L")]
    half_width: Option<u32>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    sample: Option<u64>,
    /// Explicit flux field (JSON); replaces sampling.
    #[arg(long)]
    flux_file: Option<PathBuf>,
    /// Also dump eigenvectors as little-endian (re, im) f64 pairs.
    #[arg(long)]
    eigenvectors: bool,
    #[arg(long, value_parser = parse_gauge)]
    gauge: Option<Gauge>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Suite names or aliases, comma separated.
    #[arg(long, value_delimiter = ',')]
    suite: Vec<String>,
    #[arg(long = "L", value_delimiter = ',')]
    half_widths: Vec<u32>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long = "E-star")]
    e_star: Option<f64>,
    /// Rerun a single instance seed (printed on failure).
    #[arg(long)]
    replay: Option<u64>,
    #[arg(long, hide = true)]
    inject_fault: bool,
}

#[derive(Args)]
struct EnsembleArgs {
    #[arg(long = "L", value_delimiter = ',')]
    half_widths: Vec<u32>,
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    b: Option<f64>,
    #[arg(long = "E-star")]
    e_star: Option<f64>,
    /// Also write `(x, y, yerr)` plot data.
    #[arg(long)]
    plot_data: bool,
}

#[derive(Args)]
struct WegnerArgs {
    #[command(flatten)]
    common: EnsembleArgs,
    #[arg(long = "E", value_delimiter = ',')]
    energies: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    eta: Vec<f64>,
}

#[derive(Args)]
struct IdsArgs {
    #[command(flatten)]
    common: EnsembleArgs,
    #[arg(long = "E", value_delimiter = ',')]
    energies: Vec<f64>,
}

#[derive(Args)]
struct LocalizeArgs {
    #[command(flatten)]
    common: EnsembleArgs,
    /// Eigenpairs with `E₀ ≤ E ≤ E₀ + window`.
    #[arg(long, conflicts_with = "lowest")]
    window: Option<f64>,
    /// The `N` lowest eigenpairs of each sample.
    #[arg(long)]
    lowest: Option<usize>,
    /// Zero flux instead of random fluxes.
    #[arg(long)]
    clean: bool,
}

#[derive(Args)]
struct CertifyArgs {
    #[command(flatten)]
    common: EnsembleArgs,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: EnsembleArgs,
    #[arg(long, value_delimiter = ',')]
    thresholds: Vec<f64>,
}

fn parse_gauge(s: &str) -> std::result::Result<Gauge, String> {
    match s.to_ascii_lowercase().as_str() {
        "above" | "1" => Ok(Gauge::Above),
        "right" | "2" => Ok(Gauge::Right),
        "below" | "3" => Ok(Gauge::Below),
        "left" | "4" => Ok(Gauge::Left),
        other => Err(format!("unknown gauge {other:?}; expected above, right, below or left")),
    }
}

fn nonempty<T>(v: Vec<T>) -> Option<Vec<T>> {
    (!v.is_empty()).then_some(v)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SpectrumConfig {
    #[serde(rename = "L")]
    half_width: u32,
    b: f64,
    master_seed: u64,
    sample_index: u64,
    gauge: Gauge,
    flux_file: Option<PathBuf>,
    eigenvectors: bool,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            half_width: 4,
            b: FRAC_PI_4,
            master_seed: 0,
            sample_index: 0,
            gauge: Gauge::default(),
            flux_file: None,
            eigenvectors: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LocalizeConfig {
    #[serde(flatten)]
    experiment: ExperimentConfig,
    selection: StateSelection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CertifyConfig {
    #[serde(rename = "L_list")]
    half_widths: Vec<u32>,
    samples: u64,
    b: f64,
    #[serde(rename = "E_star")]
    e_star: f64,
    master_seed: u64,
    worker_count: usize,
}

impl Default for CertifyConfig {
    fn default() -> Self {
        Self {
            half_widths: vec![3, 5, 7],
            samples: 100,
            b: FRAC_PI_4,
            e_star: 1.0,
            master_seed: 0,
            worker_count: ExperimentConfig::default().worker_count,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct SweepConfig {
    #[serde(flatten)]
    experiment: ExperimentConfig,
    thresholds: Vec<f64>,
}

/// Shared context of one invocation.
struct Session {
    out_dir: PathBuf,
    config_file: Option<PathBuf>,
    workers: Option<usize>,
    dry_run: bool,
}

impl Session {
    fn resolve<T: Serialize + for<'de> Deserialize<'de>>(&self, defaults: &T, overrides: Overrides) -> Result<T> {
        resolve(defaults, self.config_file.as_deref(), overrides.into_map())
    }

    /// Prints the config and reports whether the command should stop here.
    fn stop_if_dry<T: Serialize>(&self, config: &T) -> Result<bool> {
        if self.dry_run {
            // a closed pipe (e.g. `| head`) is not an error here
            let _ = writeln!(std::io::stdout().lock(), "{}", serde_json::to_string_pretty(config)?);
        }
        Ok(self.dry_run)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let session = Session {
        out_dir: cli.global.out_dir,
        config_file: cli.global.config,
        workers: cli.global.workers,
        dry_run: cli.global.dry_run,
    };
    let outcome = match cli.command {
        Command::Spectrum(a) => cmd_spectrum(&session, a),
        Command::Verify(a) => cmd_verify(&session, a),
        Command::Wegner(a) => cmd_wegner(&session, a),
        Command::Ids(a) => cmd_ids(&session, a),
        Command::Localize(a) => cmd_localize(&session, a),
        Command::Certify(a) => cmd_certify(&session, a),
        Command::Sweep(a) => cmd_sweep(&session, a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    use rmflab::Error as E;
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<E>() {
            return match e {
                E::NoConvergence { .. } | E::NotHermitian(_) | E::NearDegenerate { .. } | E::Aborted { .. } => {
                    EXIT_NUMERICAL
                }
                E::Certificate(_) => EXIT_VERIFICATION,
                E::Io(_) | E::Csv(_) => EXIT_IO,
                _ => EXIT_USAGE,
            };
        }
        if cause.downcast_ref::<serde_json::Error>().is_some() {
            return EXIT_USAGE;
        }
    }
    EXIT_IO
}

fn bump_disorder(b: Option<f64>) -> Result<Option<Disorder>> {
    b.map(Disorder::bump).transpose().map_err(Into::into)
}

fn ensemble_overrides(session: &Session, args: &EnsembleArgs) -> Result<Overrides> {
    let mut o = Overrides::default();
    o.set("L_list", nonempty(args.half_widths.clone()))
        .set("samples", args.samples)
        .set("master_seed", args.seed)
        .set("E_star", args.e_star)
        .set("worker_count", session.workers)
        .set("density", bump_disorder(args.b)?);
    Ok(o)
}

fn write_plot(dir: &Path, stem: &str, points: &[PlotPoint], outputs: &mut Vec<PathBuf>) -> Result<()> {
    let path = dir.join(format!("{stem}_plot.csv"));
    write_csv(fs::File::create(&path)?, points)?;
    outputs.push(path);
    Ok(())
}

fn cmd_spectrum(session: &Session, args: SpectrumArgs) -> Result<u8> {
    let mut o = Overrides::default();
    o.set("L", args.half_width)
        .set("b", args.b)
        .set("master_seed", args.seed)
        .set("sample_index", args.sample)
        .set("gauge", args.gauge)
        .set("flux_file", args.flux_file)
        .set("eigenvectors", args.eigenvectors.then_some(true));
    let cfg: SpectrumConfig = session.resolve(&SpectrumConfig::default(), o)?;
    if session.stop_if_dry(&cfg)? {
        return Ok(0);
    }
    let mut manifest = RunManifest::new("spectrum", &cfg, cfg.master_seed)?;
    let (flux, stem) = match &cfg.flux_file {
        Some(path) => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let flux: FluxField = serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            let name = path.file_stem().map_or("flux".into(), |s| s.to_string_lossy().into_owned());
            (flux, format!("spectrum_{name}"))
        }
        None => {
            let region = BoxRegion::centered(cfg.half_width)?;
            let density = FluxDensity::bump(cfg.b, DensityMode::Symmetric)?;
            let flux = sample(&density, &region, mix_seed(cfg.master_seed, u64::from(cfg.half_width)), cfg.sample_index)
                .flux_field;
            (flux, file_stem("spectrum", &[cfg.half_width], cfg.master_seed))
        }
    };
    let h = HamiltonianMatrix::from_flux(&flux, cfg.gauge)?;
    let spectrum = if cfg.eigenvectors {
        h.eigendecompose()?
    } else {
        rmflab::operator::SpectrumResult::from_eigenvalues(h.eigenvalues()?)
    };
    fs::create_dir_all(&session.out_dir)?;
    let csv_path = session.out_dir.join(format!("{stem}.csv"));
    spectrum.write_csv(fs::File::create(&csv_path)?, cfg.sample_index)?;
    manifest.outputs.push(csv_path);
    if cfg.eigenvectors {
        let path = session.out_dir.join(format!("{stem}_eigenvectors.bin"));
        spectrum.write_eigenvectors(fs::File::create(&path)?)?;
        manifest.outputs.push(path);
    }
    manifest.finish(&session.out_dir, &stem)?;
    Ok(0)
}

fn cmd_verify(session: &Session, args: VerifyArgs) -> Result<u8> {
    let suites = args
        .suite
        .iter()
        .map(|name| Suite::from_name(name).with_context(|| format!("unknown suite {name:?}")))
        .collect::<Result<Vec<_>>>()?;
    let mut o = Overrides::default();
    o.set("L_list", nonempty(args.half_widths))
        .set("trials", args.trials)
        .set("master_seed", args.seed)
        .set("b", args.b)
        .set("E_star", args.e_star)
        .set("suites", nonempty(suites))
        .set("workers", session.workers)
        .set("fault", args.inject_fault.then_some(AssemblyFault::BreakAntisymmetry));
    let cfg: VerifyConfig = session.resolve(&VerifyConfig::default(), o)?;
    if session.stop_if_dry(&cfg)? {
        return Ok(0);
    }
    let mut manifest = RunManifest::new("verify", &cfg, cfg.master_seed)?;
    let results: Vec<SuiteResult> = match args.replay {
        Some(seed) => {
            let mut merged: Option<Vec<SuiteResult>> = None;
            for &l in &cfg.half_widths {
                BoxRegion::centered(l)?;
                let run = run_instance(&cfg, l, seed);
                merged = Some(match merged {
                    None => run,
                    Some(prev) => prev
                        .into_iter()
                        .zip(run)
                        .map(|(a, b)| if a.passed() { b } else { a })
                        .collect(),
                });
            }
            merged.unwrap_or_default()
        }
        None => run_suites(&cfg)?.suites,
    };
    println!("{:<14} {:>9} {:>9} {:>12} {:>10} {:>12}  status", "suite", "instances", "checks", "max_error", "tolerance", "margin");
    for r in &results {
        println!(
            "{:<14} {:>9} {:>9} {:>12.3e} {:>10.1e} {:>12.3e}  {}",
            r.suite.name(),
            r.instances,
            r.checks,
            r.max_error,
            r.tolerance,
            r.margin(),
            if r.passed() { "PASS" } else { "FAIL" }
        );
    }
    manifest.suites = results
        .iter()
        .map(|r| SuiteSummary {
            suite: r.suite.name().to_string(),
            passed: r.passed(),
            max_error: r.max_error,
            tolerance: r.tolerance,
            margin: r.margin(),
        })
        .collect();
    let stem = file_stem("verify", &cfg.half_widths, cfg.master_seed);
    fs::create_dir_all(&session.out_dir)?;
    let report_path = session.out_dir.join(format!("{stem}.json"));
    fs::write(&report_path, serde_json::to_vec_pretty(&json!({ "config": &cfg, "suites": &results }))?)?;
    manifest.outputs.push(report_path);
    manifest.finish(&session.out_dir, &stem)?;
    let failures: Vec<&SuiteResult> = results.iter().filter(|r| !r.passed()).collect();
    for r in &failures {
        let f = r.failure.as_ref().expect("failed suite records its instance");
        eprintln!(
            "{} failed at L = {}: {}\n  replay: rmflab verify --suite {} --L {} --replay {}",
            r.suite.name(),
            f.half_width,
            f.detail,
            r.suite.name(),
            f.half_width,
            f.seed
        );
    }
    Ok(if failures.is_empty() { 0 } else { EXIT_VERIFICATION })
}

fn cmd_wegner(session: &Session, args: WegnerArgs) -> Result<u8> {
    let mut o = ensemble_overrides(session, &args.common)?;
    o.set("E_grid", nonempty(args.energies)).set("eta_grid", nonempty(args.eta));
    let cfg: ExperimentConfig = session.resolve(&ExperimentConfig::default(), o)?;
    cfg.validate_windows()?;
    if session.stop_if_dry(&cfg)? {
        return Ok(0);
    }
    let mut manifest = RunManifest::new("wegner", &cfg, cfg.master_seed)?;
    let table = wegner_experiment(&cfg)?;
    let stem = file_stem("wegner", &cfg.half_widths, cfg.master_seed);
    let summary = json!({
        "fitted_constant": table.fitted_constant,
        "max_slack": table.max_slack,
        "volume_exponents": table.volume_exponents,
    });
    manifest.outputs = write_experiment(&session.out_dir, &stem, "wegner", cfg.master_seed, &cfg, &table.rows, &summary)?;
    if args.common.plot_data {
        write_plot(&session.out_dir, &stem, &wegner_plot(&table), &mut manifest.outputs)?;
    }
    manifest.finish(&session.out_dir, &stem)?;
    Ok(0)
}

fn cmd_ids(session: &Session, args: IdsArgs) -> Result<u8> {
    let defaults = ExperimentConfig {
        half_widths: vec![10],
        energies: linspace(0.0, 8.0, 161),
        ..ExperimentConfig::default()
    };
    let mut o = ensemble_overrides(session, &args.common)?;
    o.set("E_grid", nonempty(args.energies));
    let cfg: ExperimentConfig = session.resolve(&defaults, o)?;
    cfg.validate()?;
    if session.stop_if_dry(&cfg)? {
        return Ok(0);
    }
    let mut manifest = RunManifest::new("ids", &cfg, cfg.master_seed)?;
    let curve = ids_estimate(&cfg)?;
    let stem = file_stem("ids", &cfg.half_widths, cfg.master_seed);
    let summary = json!({
        "L": curve.half_width,
        "drift": curve.drift,
        "nondecreasing": curve.is_nondecreasing(),
    });
    manifest.outputs = write_experiment(&session.out_dir, &stem, "ids", cfg.master_seed, &cfg, &curve.rows(), &summary)?;
    let lifshitz = lifshitz_diagnostic(&curve, cfg.disorder.b());
    let lifshitz_stem = file_stem("lifshitz", &cfg.half_widths, cfg.master_seed);
    let note = json!({ "exploratory": true, "L": curve.half_width });
    manifest.outputs.extend(write_experiment(
        &session.out_dir,
        &lifshitz_stem,
        "lifshitz",
        cfg.master_seed,
        &cfg,
        &lifshitz,
        &note,
    )?);
    if args.common.plot_data {
        write_plot(&session.out_dir, &stem, &ids_plot(&curve), &mut manifest.outputs)?;
    }
    manifest.finish(&session.out_dir, &stem)?;
    Ok(0)
}

fn cmd_localize(session: &Session, args: LocalizeArgs) -> Result<u8> {
    let defaults = LocalizeConfig {
        experiment: ExperimentConfig {
            half_widths: vec![6, 10, 14],
            samples: 20,
            disorder: Disorder::bump(1.4)?,
            ..ExperimentConfig::default()
        },
        selection: StateSelection::Lowest { count: 5 },
    };
    let mut o = ensemble_overrides(session, &args.common)?;
    if args.clean {
        o.set("density", Some(Disorder::Constant { flux: 0.0 }));
    }
    let selection = match (args.window, args.lowest) {
        (Some(width), _) => Some(StateSelection::Window { width }),
        (None, Some(count)) => Some(StateSelection::Lowest { count }),
        (None, None) => None,
    };
    o.set("selection", selection);
    let cfg: LocalizeConfig = session.resolve(&defaults, o)?;
    cfg.experiment.validate()?;
    if session.stop_if_dry(&cfg)? {
        return Ok(0);
    }
    let mut manifest = RunManifest::new("localize", &cfg, cfg.experiment.master_seed)?;
    let report = localization_diagnostics(&cfg.experiment, cfg.selection)?;
    let name = if matches!(cfg.experiment.disorder, Disorder::Constant { .. }) { "localize_clean" } else { "localize" };
    let stem = file_stem(name, &cfg.experiment.half_widths, cfg.experiment.master_seed);
    manifest.outputs = write_experiment(
        &session.out_dir,
        &stem,
        name,
        cfg.experiment.master_seed,
        &cfg,
        &report.rows,
        &report.summaries,
    )?;
    let summary_path = session.out_dir.join(format!("{stem}_summary.csv"));
    write_csv(fs::File::create(&summary_path)?, &report.summaries)?;
    manifest.outputs.push(summary_path);
    if args.common.plot_data {
        write_plot(&session.out_dir, &stem, &localization_plot(&report), &mut manifest.outputs)?;
    }
    manifest.finish(&session.out_dir, &stem)?;
    Ok(0)
}

/// One eigenpair below `E*` with its certificate, or why there is none.
#[derive(Debug, Serialize)]
struct CertifiedPair {
    #[serde(rename = "L")]
    half_width: u32,
    sample: u64,
    k: usize,
    valid: bool,
    error: Option<String>,
    #[serde(flatten)]
    certificate: Option<CertificateRecord>,
}

fn cmd_certify(session: &Session, args: CertifyArgs) -> Result<u8> {
    let c = &args.common;
    let mut o = Overrides::default();
    o.set("L_list", nonempty(c.half_widths.clone()))
        .set("samples", c.samples)
        .set("master_seed", c.seed)
        .set("b", c.b)
        .set("E_star", c.e_star)
        .set("worker_count", session.workers);
    let cfg: CertifyConfig = session.resolve(&CertifyConfig::default(), o)?;
    let density = FluxDensity::bump(cfg.b, DensityMode::Symmetric)?;
    if cfg.half_widths.is_empty() || cfg.worker_count == 0 {
        bail!(rmflab::Error::InvalidConfig("certify needs L_list and worker_count ≥ 1".into()));
    }
    if session.stop_if_dry(&cfg)? {
        return Ok(0);
    }
    let mut manifest = RunManifest::new("certify", &cfg, cfg.master_seed)?;
    let options = RunOptions {
        workers: cfg.worker_count,
        ..RunOptions::default()
    };
    let mut pairs = Vec::new();
    for &l in &cfg.half_widths {
        let region = BoxRegion::centered(l)?;
        let seed = mix_seed(cfg.master_seed, u64::from(l));
        let per_sample = run_parallel(cfg.samples, options, None, |s| {
            let flux = sample(&density, &region, seed, s).flux_field;
            let potential = VectorPotential::from_flux(&flux, Gauge::default());
            let spectrum = HamiltonianMatrix::assemble(&region, &potential)?.eigendecompose()?;
            let mut out = Vec::new();
            for k in 0..spectrum.len() {
                let energy = spectrum.eigenvalues[k];
                if energy > cfg.e_star {
                    break;
                }
                let psi = spectrum.eigenvector(k).expect("eigenvectors computed");
                let pair = match current_lower_bound(psi, &potential, energy, cfg.e_star, cfg.b) {
                    Ok(bound) => CertifiedPair {
                        half_width: l,
                        sample: s,
                        k,
                        valid: bound.holds() && bound.bound > 0.0,
                        error: None,
                        certificate: Some(CertificateRecord::from(&bound)),
                    },
                    Err(e) => CertifiedPair {
                        half_width: l,
                        sample: s,
                        k,
                        valid: false,
                        error: Some(e.to_string()),
                        certificate: None,
                    },
                };
                out.push(pair);
            }
            Ok(out)
        })
        .map_err(rmflab::Error::from)?;
        pairs.extend(per_sample.into_iter().flatten());
    }
    let samples = usize::try_from(cfg.samples)?;
    let scaling = scaling_study(&cfg.half_widths, samples, cfg.e_star, &density, cfg.master_seed)?;
    let stem = file_stem("certify", &cfg.half_widths, cfg.master_seed);
    let invalid = pairs.iter().filter(|p| !p.valid).count();
    let summary = json!({ "eigenpairs": pairs.len(), "invalid": invalid });
    manifest.outputs = write_experiment(&session.out_dir, &stem, "certify", cfg.master_seed, &cfg, &scaling, &summary)?;
    let cert_path = session.out_dir.join(format!("{stem}_certificates.json"));
    fs::write(&cert_path, serde_json::to_vec(&pairs)?)?;
    manifest.outputs.push(cert_path);
    manifest.finish(&session.out_dir, &stem)?;
    println!("{} eigenpairs with E <= {}, {} without a valid certificate", pairs.len(), cfg.e_star, invalid);
    for row in &scaling {
        println!("L = {:>2}: min L^4 sum <Y_f H>^2 = {:.4}", row.half_width, row.min_scaled);
    }
    if let Some(p) = pairs.iter().find(|p| !p.valid) {
        eprintln!(
            "first failure: L = {}, sample {}, k = {}: {}",
            p.half_width,
            p.sample,
            p.k,
            p.error.as_deref().unwrap_or("bound does not hold")
        );
        return Ok(EXIT_VERIFICATION);
    }
    Ok(0)
}

fn cmd_sweep(session: &Session, args: SweepArgs) -> Result<u8> {
    let defaults = SweepConfig {
        experiment: ExperimentConfig {
            half_widths: vec![4],
            samples: 20,
            ..ExperimentConfig::default()
        },
        thresholds: linspace(0.6, 1.6, 11),
    };
    let mut o = ensemble_overrides(session, &args.common)?;
    o.set("thresholds", nonempty(args.thresholds));
    let cfg: SweepConfig = session.resolve(&defaults, o)?;
    if cfg.experiment.samples == 0 || cfg.experiment.worker_count == 0 {
        bail!(rmflab::Error::InvalidConfig("samples and worker_count must be positive".into()));
    }
    if session.stop_if_dry(&cfg)? {
        return Ok(0);
    }
    let mut manifest = RunManifest::new("sweep", &cfg, cfg.experiment.master_seed)?;
    let rows = threshold_sweep(&cfg.experiment, &cfg.thresholds)?;
    let stem = file_stem("sweep", &cfg.experiment.half_widths[..1], cfg.experiment.master_seed);
    let note = json!({ "exploratory": true });
    manifest.outputs = write_experiment(&session.out_dir, &stem, "sweep", cfg.experiment.master_seed, &cfg, &rows, &note)?;
    manifest.finish(&session.out_dir, &stem)?;
    Ok(0)
}
