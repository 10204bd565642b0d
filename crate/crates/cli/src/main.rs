mod output;
mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use output::{emit_csv, write_atomic, RunManifest};
use rals::bases::UnivariateBasis;
use rals::recovery::{recover, RecoveryConfig, RecoveryReport, SampleSet};
use rals::uq::{
    generate_samples, phase_diagram, spectrum_experiment, CoefficientKind, DiffusionModel, PhaseDiagramConfig,
    PhaseTarget, Sampling, SpectrumWeight, DEFAULT_GRID, DEFAULT_PARAMETERS, TEST_SAMPLES,
};
use rals::variation::local_variation_rank1;

/// Tensor-train regression from point samples, with variation-restricted ALS.
///
/// Exit codes: 0 success, 1 numerical or runtime failure, 2 malformed input
/// (config, CSV, command line), 3 I/O error.
#[derive(Debug, Parser)]
#[command(name = "rals", version)]
struct Cli {
    /// Worker threads for parallel runs (default: all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Timestamp recorded in output manifests; falls back to SOURCE_DATE_EPOCH, then 0.
    #[arg(long, global = true)]
    timestamp: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Recover a coefficient tensor train from a sample CSV.
    Recover(RecoverArgs),
    /// Sweep the rank-1 local variation estimate over basis dimensions and radii.
    Variation(VariationArgs),
    /// Mean recovery error over a grid of orders and sample counts.
    PhaseDiagram(PhaseArgs),
    /// Generate quantity-of-interest samples of the parametric diffusion problem.
    DarcyGen(DarcyArgs),
    /// Singular values of plain and entrywise-weighted Gaussian matrices.
    Spectrum(SpectrumArgs),
}

#[derive(Debug, Args)]
struct RecoverArgs {
    /// Recovery config (key = value lines with [recovery], [rank], [cv] sections).
    #[arg(long)]
    config: Option<PathBuf>,
    /// Training samples: CSV with columns y_1..y_M, u and optional w.
    #[arg(long)]
    samples: PathBuf,
    /// Output tensor train (JSON).
    #[arg(long)]
    out: PathBuf,
    /// Report JSON (default: <out>.report.json).
    #[arg(long)]
    report: Option<PathBuf>,
    /// Held-out samples for the reported test error.
    #[arg(long)]
    test: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct VariationArgs {
    /// Comma-separated matrix sizes d (square d x d).
    #[arg(long, value_delimiter = ',', required = true)]
    d: Vec<usize>,
    /// Comma-separated radii r.
    #[arg(long, value_delimiter = ',', required = true)]
    r: Vec<f64>,
    /// Points per axis of the (alpha, beta) grid.
    #[arg(long, default_value_t = 41)]
    grid: usize,
    /// Output CSV (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PhaseArgs {
    /// Target function: `exp` (exp(y_1 + ... + y_M)) or `ones` (all coefficients 1).
    #[arg(long, default_value = "exp")]
    target: String,
    /// Comma-separated orders M.
    #[arg(long, value_delimiter = ',', required = true)]
    orders: Vec<usize>,
    /// Comma-separated training sample counts n.
    #[arg(long, value_delimiter = ',', required = true)]
    samples: Vec<usize>,
    /// Independent runs per (order, samples) cell.
    #[arg(long, default_value_t = 20)]
    realizations: usize,
    /// Held-out samples per run for the test error.
    #[arg(long, default_value_t = TEST_SAMPLES)]
    test_samples: usize,
    /// Base recovery config; --algorithm and --dimension override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Microstep: als, als_l2, rals or r2als.
    #[arg(long)]
    algorithm: Option<String>,
    /// Basis dimension per mode (default 15 without a config).
    #[arg(long)]
    dimension: Option<usize>,
    /// Base seed; each run derives its own stream from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optional heatmap.
    #[arg(long)]
    svg: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct DarcyArgs {
    /// Coefficient model: affine or lognormal.
    #[arg(long, default_value = "affine")]
    model: String,
    /// Number of samples.
    #[arg(long)]
    count: usize,
    /// Intervals per side of the finite-difference grid.
    #[arg(long, default_value_t = DEFAULT_GRID)]
    grid: usize,
    /// Number of random parameters M.
    #[arg(long, default_value_t = DEFAULT_PARAMETERS)]
    parameters: usize,
    /// uniform or gaussian (default: the model's own distribution).
    #[arg(long)]
    sampling: Option<String>,
    /// Seed of the parameter draws.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SpectrumArgs {
    /// Matrix size.
    #[arg(long, default_value_t = 50)]
    d: usize,
    /// Entrywise weight: legendre or ones.
    #[arg(long, default_value = "legendre")]
    weight: String,
    /// Independent matrix draws.
    #[arg(long, default_value_t = 100)]
    realizations: usize,
    /// Seed of the matrix draws.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output CSV (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optional line plot of the first realization's normalized spectra.
    #[arg(long)]
    svg: Option<PathBuf>,
}

fn timestamp(cli: &Cli) -> u64 {
    cli.timestamp.or_else(|| std::env::var("SOURCE_DATE_EPOCH").ok().and_then(|s| s.trim().parse().ok())).unwrap_or(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let ts = timestamp(&cli);
    let result = match &cli.command {
        Command::Recover(a) => cmd_recover(a, ts),
        Command::Variation(a) => cmd_variation(a, ts),
        Command::PhaseDiagram(a) => cmd_phase_diagram(a, ts),
        Command::DarcyGen(a) => cmd_darcy_gen(a, ts),
        Command::Spectrum(a) => cmd_spectrum(a, ts),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    for cause in e.chain() {
        if let Some(err) = cause.downcast_ref::<rals::Error>() {
            return match err {
                rals::Error::Parse { .. } | rals::Error::UnknownStrategy { .. } | rals::Error::Json(_) => 2,
                rals::Error::Io(_) => 3,
                _ => 1,
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() {
            return 3;
        }
    }
    1
}

fn with_path<T>(r: rals::Result<T>, path: &Path) -> Result<T> {
    r.with_context(|| path.display().to_string())
}

#[derive(Serialize)]
struct RecoverOutput<'a> {
    manifest: &'a RunManifest,
    config: &'a RecoveryConfig,
    samples: usize,
    report: &'a RecoveryReport,
}

fn cmd_recover(a: &RecoverArgs, ts: u64) -> Result<()> {
    let mut config = match &a.config {
        Some(p) => with_path(RecoveryConfig::load(p), p)?,
        None => RecoveryConfig::default(),
    };
    if let Some(s) = a.seed {
        config.seed = s;
    }
    let samples = with_path(SampleSet::load_csv(&a.samples), &a.samples)?;
    let test = a.test.as_ref().map(|p| with_path(SampleSet::load_csv(p), p)).transpose()?;
    let basis = UnivariateBasis::by_name(config.basis.name(), config.dimension)?;
    let mut report = recover(&samples, &config, &basis)?;
    if let Some(t) = &test {
        report.evaluate_test(t, &basis)?;
    }
    let report_path = a.report.clone().unwrap_or_else(|| {
        let mut s = a.out.clone().into_os_string();
        s.push(".report.json");
        PathBuf::from(s)
    });
    let mut manifest = RunManifest::new("recover", ts).param("algorithm", &config.algorithm);
    manifest.config = a.config.clone();
    manifest.inputs = std::iter::once(a.samples.clone()).chain(a.test.clone()).collect();
    manifest.outputs = vec![a.out.clone(), report_path.clone()];
    manifest.seed = Some(config.seed);

    let mut tt_json = serde_json::to_value(rals::tensor::TtFile::from(&report.tt))?;
    tt_json["manifest"] = serde_json::to_value(&manifest)?;
    write_atomic(&a.out, serde_json::to_string(&tt_json)?.as_bytes())?;
    let out = RecoverOutput { manifest: &manifest, config: &config, samples: samples.len(), report: &report };
    write_atomic(&report_path, (serde_json::to_string_pretty(&out)? + "\n").as_bytes())?;
    eprintln!(
        "{}: {} sweeps, best validation error {:.3e}{}",
        config.algorithm,
        report.sweeps(),
        report.best_validation_error().unwrap_or(f64::NAN),
        report.test_error.map(|e| format!(", test error {e:.3e}")).unwrap_or_default()
    );
    if let Some(f) = &report.failure {
        eprintln!("warning: last sweep aborted: {f}");
    }
    Ok(())
}

fn cmd_variation(a: &VariationArgs, ts: u64) -> Result<()> {
    let mut body = String::from("d,r,K_estimate\n");
    for &d in &a.d {
        for &r in &a.r {
            let est = local_variation_rank1(d, d, r, a.grid)?;
            body += &format!("{d},{r:e},{:.12e}\n", est.estimate);
        }
    }
    let mut manifest = RunManifest::new("variation", ts).param("grid", a.grid);
    manifest.outputs = a.out.iter().cloned().collect();
    emit_csv(&manifest, &body, a.out.as_deref())
}

fn cmd_phase_diagram(a: &PhaseArgs, ts: u64) -> Result<()> {
    let mut recovery = match &a.config {
        Some(p) => with_path(RecoveryConfig::load(p), p)?,
        None => RecoveryConfig { dimension: 15, ..RecoveryConfig::default() },
    };
    if let Some(alg) = &a.algorithm {
        recovery.algorithm = alg.clone();
    }
    if let Some(d) = a.dimension {
        recovery.dimension = d;
    }
    let cfg = PhaseDiagramConfig {
        orders: a.orders.clone(),
        sample_counts: a.samples.clone(),
        realizations: a.realizations,
        target: PhaseTarget::from_name(&a.target)?,
        test_samples: a.test_samples,
        seed: a.seed,
        recovery,
    };
    let pd = phase_diagram(&cfg)?;
    let mut manifest = RunManifest::new("phase-diagram", ts)
        .param("target", cfg.target.name())
        .param("algorithm", &cfg.recovery.algorithm)
        .param("dimension", cfg.recovery.dimension)
        .param("realizations", cfg.realizations)
        .param("test_samples", cfg.test_samples);
    manifest.config = a.config.clone();
    manifest.outputs = a.out.iter().chain(&a.svg).cloned().collect();
    manifest.seed = Some(a.seed);
    if let Some(p) = &a.svg {
        let rows: Vec<String> = pd.orders.iter().map(|m| format!("M={m}")).collect();
        let cols: Vec<String> = pd.sample_counts.iter().map(|n| n.to_string()).collect();
        let title = format!("mean relative error, target {}", cfg.target.name());
        write_atomic(p, svg::log_heatmap(&title, &manifest.comment_lines(), &rows, &cols, &pd.mean_errors).as_bytes())?;
    }
    emit_csv(&manifest, &pd.to_csv(), a.out.as_deref())
}

fn cmd_darcy_gen(a: &DarcyArgs, ts: u64) -> Result<()> {
    let kind = CoefficientKind::from_name(&a.model)?;
    let sampling = match &a.sampling {
        Some(s) => Sampling::from_name(s)?,
        None => kind.natural_sampling(),
    };
    let model = DiffusionModel { kind, parameters: a.parameters };
    let samples = generate_samples(&model, a.count, sampling, a.seed, a.grid)?;
    let mut body = Vec::new();
    samples.write_csv(&mut body)?;
    let mut manifest = RunManifest::new("darcy-gen", ts)
        .param("model", kind.name())
        .param("sampling", format!("{sampling:?}").to_lowercase())
        .param("grid", a.grid)
        .param("parameters", a.parameters)
        .param("count", a.count);
    manifest.outputs = a.out.iter().cloned().collect();
    manifest.seed = Some(a.seed);
    emit_csv(&manifest, &String::from_utf8(body)?, a.out.as_deref())
}

fn cmd_spectrum(a: &SpectrumArgs, ts: u64) -> Result<()> {
    let weight = SpectrumWeight::from_name(&a.weight)?;
    let rep = spectrum_experiment(a.d, weight, a.realizations, a.seed)?;
    let mut manifest = RunManifest::new("spectrum", ts)
        .param("d", a.d)
        .param("weight", &a.weight)
        .param("realizations", a.realizations);
    manifest.outputs = a.out.iter().chain(&a.svg).cloned().collect();
    manifest.seed = Some(a.seed);
    if let Some(p) = &a.svg {
        let norm = |s: &[f64]| s.iter().map(|v| v / s[0].max(f64::MIN_POSITIVE)).collect();
        let series = [
            svg::Series { label: "plain", color: "steelblue", ys: norm(&rep.plain[0]) },
            svg::Series { label: "weighted", color: "firebrick", ys: norm(&rep.weighted[0]) },
        ];
        write_atomic(p, svg::log_lines("normalized singular values", &manifest.comment_lines(), &series).as_bytes())?;
    }
    eprintln!(
        "weighted tail mass beyond index {} smaller in {:.1}% of realizations; median ratio {:.4}",
        rep.tail_index,
        100.0 * rep.faster_decay_fraction(),
        rep.median_tail_ratio()
    );
    emit_csv(&manifest, &rep.to_csv(), a.out.as_deref())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn parse_errors_map_to_exit_code_two() {
        let e = anyhow::Error::from(rals::Error::Parse { line: 3, message: "x".into() }).context("file.csv");
        assert_eq!(exit_code(&e), 2);
        let io = anyhow::Error::from(rals::Error::Io(std::io::Error::other("gone")));
        assert_eq!(exit_code(&io), 3);
        assert_eq!(exit_code(&anyhow::anyhow!("other")), 1);
    }
}
