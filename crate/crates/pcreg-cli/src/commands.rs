//! Subcommand implementations. Each one validates flags, runs the library,
//! writes a CSV through [`csvout::Table`], and records a manifest whose
//! `argv` line reproduces the run.

use std::path::{Path, PathBuf};

use pcreg::basis::{Family, PcBasis};
use pcreg::coherence::{required_samples, SampleSizePlan};
use pcreg::experiments::{
    coherence_sweep, manufactured_recovery, ode_study, OdeStudyConfig, RecoveryConfig,
    SweepConfig,
};
use pcreg::regression::{
    assemble, solve, NoiseModel, SolveMethod, DEFAULT_RECOVERY_THRESHOLD,
};
use pcreg::sampling::{self, McmcConfig, Proposal, SampleBatch, SamplingStrategy, StrategyKind};

use crate::config as cfgfile;
use crate::csvout::{format_f64, format_opt_f64, Table};
use crate::manifest::Manifest;
use crate::CliError;

fn usage(message: impl Into<String>) -> CliError {
    CliError::Usage(message.into())
}

fn runtime(message: impl Into<String>) -> CliError {
    CliError::Runtime(message.into())
}

fn parse_family_cli(s: &str) -> Result<Family, String> {
    match s {
        "hermite" => Ok(Family::Hermite),
        "legendre" => Ok(Family::Legendre),
        _ => Err(format!("unknown family '{s}' (expected hermite or legendre)")),
    }
}

fn parse_kind_cli(s: &str) -> Result<StrategyKind, String> {
    match s {
        "standard" => Ok(StrategyKind::Standard),
        "asymptotic" => Ok(StrategyKind::Asymptotic),
        "coherence-optimal" => Ok(StrategyKind::CoherenceOptimal),
        _ => Err(format!(
            "unknown strategy '{s}' (expected standard, asymptotic, or coherence-optimal)"
        )),
    }
}

fn parse_proposal_cli(s: &str) -> Result<Proposal, String> {
    match s {
        "standard" => Ok(Proposal::Standard),
        "asymptotic" => Ok(Proposal::Asymptotic),
        _ => Err(format!(
            "unknown proposal '{s}' (expected standard or asymptotic)"
        )),
    }
}

fn proposal_name(p: Proposal) -> &'static str {
    match p {
        Proposal::Standard => "standard",
        Proposal::Asymptotic => "asymptotic",
    }
}

fn method_name(m: SolveMethod) -> &'static str {
    match m {
        SolveMethod::Qr => "qr",
        SolveMethod::MinNormSvd => "min-norm-svd",
        SolveMethod::IterativeLsqr => "iterative-lsqr",
    }
}

fn parse_family_list(text: &str) -> Result<Vec<Family>, CliError> {
    text.split(',')
        .map(|s| parse_family_cli(s.trim()).map_err(usage))
        .collect()
}

fn parse_kind_list(text: &str) -> Result<Vec<StrategyKind>, CliError> {
    text.split(',')
        .map(|s| parse_kind_cli(s.trim()).map_err(usage))
        .collect()
}

fn parse_usize_list(name: &str, text: &str) -> Result<Vec<usize>, CliError> {
    text.split(',')
        .map(|s| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| usage(format!("--{name}: '{s}' is not a non-negative integer")))
        })
        .collect()
}

fn join_usize(values: &[usize]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

fn join_kinds(kinds: &[StrategyKind]) -> String {
    kinds
        .iter()
        .map(|k| k.name())
        .collect::<Vec<_>>()
        .join(",")
}

fn join_families(families: &[Family]) -> String {
    families
        .iter()
        .map(|f| f.name())
        .collect::<Vec<_>>()
        .join(",")
}

/// Relative output paths land under `PCREG_OUT_DIR` when it is set.
fn resolve_out(path: &Path) -> PathBuf {
    if path.is_relative() {
        if let Some(dir) = std::env::var_os("PCREG_OUT_DIR") {
            return PathBuf::from(dir).join(path);
        }
    }
    path.to_owned()
}

fn write_table(table: &Table, out: &Path) -> Result<(), CliError> {
    table
        .write_to(out)
        .map_err(|e| runtime(format!("cannot write {}: {e}", out.display())))
}

fn finish_manifest(manifest: Manifest) -> Result<(), CliError> {
    manifest
        .finish()
        .map(|_| ())
        .map_err(|e| runtime(format!("cannot write manifest: {e}")))
}

fn require<T>(value: Option<T>, what: &str) -> Result<T, CliError> {
    value.ok_or_else(|| usage(format!("missing {what}")))
}

/// The chain knobs shared by every command that can run the
/// coherence-optimal sampler.
struct McmcFlags {
    burn_in: Option<usize>,
    thin: Option<usize>,
    proposal: Option<Proposal>,
}

impl McmcFlags {
    fn check_applicable(&self, kinds: &[StrategyKind]) -> Result<(), CliError> {
        let relevant = kinds.contains(&StrategyKind::CoherenceOptimal);
        if !relevant && (self.burn_in.is_some() || self.thin.is_some() || self.proposal.is_some())
        {
            return Err(usage(
                "--burn-in, --thin, and --proposal apply only to the coherence-optimal strategy",
            ));
        }
        Ok(())
    }

    fn mcmc_config(&self) -> McmcConfig {
        let mut config = McmcConfig::default();
        if let Some(b) = self.burn_in {
            config.burn_in = b;
        }
        if let Some(t) = self.thin {
            config.thinning = t;
        }
        config.proposal = self.proposal;
        config
    }

    fn strategy(&self, kind: StrategyKind) -> SamplingStrategy {
        match kind {
            StrategyKind::Standard => SamplingStrategy::Standard,
            StrategyKind::Asymptotic => SamplingStrategy::Asymptotic,
            StrategyKind::CoherenceOptimal => {
                SamplingStrategy::CoherenceOptimal(self.mcmc_config())
            }
        }
    }

    /// Canonical argv fragment; the proposal appears only when it was
    /// given explicitly, since the automatic choice is a deterministic
    /// function of the basis shape.
    fn argv_suffix(&self) -> String {
        let config = self.mcmc_config();
        let mut text = format!(" --burn-in {} --thin {}", config.burn_in, config.thinning);
        if let Some(p) = config.proposal {
            text.push_str(&format!(" --proposal {}", proposal_name(p)));
        }
        text
    }
}

#[derive(clap::Args)]
pub struct SampleArgs {
    /// Polynomial family: hermite or legendre
    #[arg(long, value_parser = parse_family_cli)]
    family: Family,
    /// Input dimension
    #[arg(long)]
    d: usize,
    /// Total polynomial order
    #[arg(long)]
    p: usize,
    /// Sampling strategy: standard, asymptotic, or coherence-optimal
    #[arg(long, value_parser = parse_kind_cli)]
    strategy: StrategyKind,
    /// Number of points to draw
    #[arg(long)]
    n: usize,
    /// RNG seed
    #[arg(long)]
    seed: u64,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
    /// Chain burn-in steps (coherence-optimal only)
    #[arg(long)]
    burn_in: Option<usize>,
    /// Chain steps between kept samples (coherence-optimal only)
    #[arg(long)]
    thin: Option<usize>,
    /// Chain proposal: standard or asymptotic (coherence-optimal only)
    #[arg(long, value_parser = parse_proposal_cli)]
    proposal: Option<Proposal>,
}

pub fn sample(args: SampleArgs) -> Result<(), CliError> {
    let flags = McmcFlags {
        burn_in: args.burn_in,
        thin: args.thin,
        proposal: args.proposal,
    };
    flags.check_applicable(&[args.strategy])?;
    let strategy = flags.strategy(args.strategy);
    let basis = PcBasis::<f64>::new(args.family, args.d, args.p)?;
    let batch = sampling::sample(&basis, &strategy, args.n, args.seed)?;

    let header: Vec<String> = (1..=args.d)
        .map(|i| format!("x{i}"))
        .chain(std::iter::once("weight".to_owned()))
        .collect();
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut table = Table::new(&header_refs);
    for (point, &weight) in batch.iter_points().zip(batch.weights()) {
        let cells: Vec<String> = point
            .iter()
            .copied()
            .chain(std::iter::once(weight))
            .map(format_f64)
            .collect();
        table.row(&cells);
    }
    let out = resolve_out(&args.out);
    write_table(&table, &out)?;

    let mut argv = format!(
        "--family {} --d {} --p {} --strategy {} --n {} --seed {}",
        args.family.name(),
        args.d,
        args.p,
        args.strategy.name(),
        args.n,
        args.seed
    );
    if args.strategy == StrategyKind::CoherenceOptimal {
        argv.push_str(&flags.argv_suffix());
    }
    let mut manifest = Manifest::start("sample", argv, Some(args.seed), &out);
    manifest.push("rows", args.n.to_string());
    if let Some(rate) = batch.acceptance_rate() {
        manifest.push("acceptance_rate", format_f64(rate));
    }
    if let Some(ac) = batch.lag1_autocorr() {
        manifest.push("lag1_autocorr", format_f64(ac));
    }
    finish_manifest(manifest)?;
    println!("wrote {} points to {}", args.n, out.display());
    Ok(())
}

#[derive(clap::Args)]
pub struct CoherenceArgs {
    /// Comma-separated families, e.g. hermite,legendre
    #[arg(long)]
    families: String,
    /// Comma-separated strategies
    #[arg(long, default_value = "standard,asymptotic,coherence-optimal")]
    strategies: String,
    /// Comma-separated dimensions, strictly ascending
    #[arg(long)]
    d_grid: String,
    /// Comma-separated total orders, strictly ascending
    #[arg(long)]
    p_grid: String,
    /// Probe points per estimate
    #[arg(long)]
    n_probe: usize,
    /// RNG seed
    #[arg(long)]
    seed: u64,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
    /// Chain burn-in steps (coherence-optimal only)
    #[arg(long)]
    burn_in: Option<usize>,
    /// Chain steps between kept samples (coherence-optimal only)
    #[arg(long)]
    thin: Option<usize>,
    /// Chain proposal: standard or asymptotic (coherence-optimal only)
    #[arg(long, value_parser = parse_proposal_cli)]
    proposal: Option<Proposal>,
}

pub fn coherence(args: CoherenceArgs) -> Result<(), CliError> {
    let families = parse_family_list(&args.families)?;
    let kinds = parse_kind_list(&args.strategies)?;
    let flags = McmcFlags {
        burn_in: args.burn_in,
        thin: args.thin,
        proposal: args.proposal,
    };
    flags.check_applicable(&kinds)?;
    let d_grid = parse_usize_list("d-grid", &args.d_grid)?;
    let p_grid = parse_usize_list("p-grid", &args.p_grid)?;

    let sweep = SweepConfig {
        families: families.clone(),
        strategies: kinds.iter().map(|&k| flags.strategy(k)).collect(),
        d_grid: d_grid.clone(),
        p_grid: p_grid.clone(),
        n_probe: args.n_probe,
        seed: args.seed,
    };
    let reports = coherence_sweep::<f64>(&sweep)?;

    let mut table = Table::new(&[
        "family",
        "strategy",
        "d",
        "p",
        "P",
        "n_probe",
        "mu2_hat",
        "mu_inf_hat",
        "mu2_theory",
        "mu_inf_bound",
        "seed",
    ]);
    for report in &reports {
        table.row(&[
            report.family.name().to_owned(),
            report.kind.name().to_owned(),
            report.dimension.to_string(),
            report.order.to_string(),
            report.basis_size.to_string(),
            report.n_probe.to_string(),
            format_f64(report.mu2_hat),
            format_f64(report.mu_inf_hat),
            format_opt_f64(report.mu2_theory),
            format_opt_f64(report.mu_inf_bound),
            report.seed.to_string(),
        ]);
    }
    let out = resolve_out(&args.out);
    write_table(&table, &out)?;

    let mut argv = format!(
        "--families {} --strategies {} --d-grid {} --p-grid {} --n-probe {} --seed {}",
        join_families(&families),
        join_kinds(&kinds),
        join_usize(&d_grid),
        join_usize(&p_grid),
        args.n_probe,
        args.seed
    );
    if kinds.contains(&StrategyKind::CoherenceOptimal) {
        argv.push_str(&flags.argv_suffix());
    }
    let mut manifest = Manifest::start("coherence", argv, Some(args.seed), &out);
    manifest.push("rows", reports.len().to_string());
    finish_manifest(manifest)?;
    println!("wrote {} rows to {}", reports.len(), out.display());
    Ok(())
}

#[derive(clap::Args)]
pub struct FitArgs {
    /// Polynomial family: hermite or legendre
    #[arg(long, value_parser = parse_family_cli)]
    family: Family,
    /// Input dimension
    #[arg(long)]
    d: usize,
    /// Total polynomial order
    #[arg(long)]
    p: usize,
    /// Input CSV with header x1..xd,weight,u
    #[arg(long = "in")]
    input: PathBuf,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
}

fn read_sample_csv(path: &Path, d: usize) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>), CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| runtime(format!("cannot read {}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| runtime(format!("{}: empty file", path.display())))?;
    let expected: Vec<String> = (1..=d)
        .map(|i| format!("x{i}"))
        .chain(["weight".to_owned(), "u".to_owned()])
        .collect();
    let expected_line = expected.join(",");
    if header != expected_line {
        return Err(runtime(format!(
            "{}: header is '{header}' but --d {d} requires '{expected_line}'",
            path.display()
        )));
    }
    let mut points = Vec::new();
    let mut weights = Vec::new();
    let mut values = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != d + 2 {
            return Err(runtime(format!(
                "{}: line {} has {} fields, expected {}",
                path.display(),
                i + 2,
                fields.len(),
                d + 2
            )));
        }
        let mut parsed = Vec::with_capacity(d + 2);
        for field in &fields {
            let value: f64 = field.parse().map_err(|_| {
                runtime(format!(
                    "{}: line {}: '{field}' is not a number",
                    path.display(),
                    i + 2
                ))
            })?;
            parsed.push(value);
        }
        points.extend_from_slice(&parsed[..d]);
        weights.push(parsed[d]);
        values.push(parsed[d + 1]);
    }
    Ok((points, weights, values))
}

pub fn fit(args: FitArgs) -> Result<(), CliError> {
    let basis = PcBasis::<f64>::new(args.family, args.d, args.p)?;
    let (points, weights, values) = read_sample_csv(&args.input, args.d)?;
    let batch = SampleBatch::from_parts(points, weights, args.d, StrategyKind::Standard, 0)?;
    let design = assemble(&basis, &batch, &values)?;
    let result = solve(&design)?;

    let header: Vec<String> = (1..=args.d)
        .map(|i| format!("k{i}"))
        .chain(std::iter::once("c_hat".to_owned()))
        .collect();
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    let mut table = Table::new(&header_refs);
    for (k, &coeff) in result.coefficients.iter().enumerate() {
        let cells: Vec<String> = basis
            .index_set()
            .tuple(k)
            .iter()
            .map(|idx| idx.to_string())
            .chain(std::iter::once(format_f64(coeff)))
            .collect();
        table.row(&cells);
    }
    let out = resolve_out(&args.out);
    write_table(&table, &out)?;

    let mut diagnostics: Vec<(&str, String)> = vec![
        ("rank", result.rank.to_string()),
        ("rank_deficient", result.rank_deficient.to_string()),
        ("residual_norm", format_f64(result.residual_norm)),
        ("method", method_name(result.method).to_owned()),
    ];
    if let Some(sigma) = result.sigma_stability {
        diagnostics.push(("sigma", format_f64(sigma)));
        diagnostics.push(("stable", (sigma <= 0.5).to_string()));
    }
    for (key, value) in &diagnostics {
        println!("{key}={value}");
    }

    let argv = format!(
        "--family {} --d {} --p {} --in {}",
        args.family.name(),
        args.d,
        args.p,
        args.input.display()
    );
    let mut manifest = Manifest::start("fit", argv, None, &out);
    for (key, value) in diagnostics {
        manifest.push(key, value);
    }
    finish_manifest(manifest)?;
    Ok(())
}

#[derive(clap::Args)]
pub struct RecoveryArgs {
    /// Config file with a [recovery] section; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Polynomial family: hermite or legendre
    #[arg(long, value_parser = parse_family_cli)]
    family: Option<Family>,
    /// Input dimension
    #[arg(long)]
    d: Option<usize>,
    /// Total polynomial order
    #[arg(long)]
    p: Option<usize>,
    /// Comma-separated strategies
    #[arg(long)]
    strategies: Option<String>,
    /// Comma-separated sample counts, strictly ascending
    #[arg(long)]
    n_grid: Option<String>,
    /// Replications per strategy
    #[arg(long)]
    reps: Option<usize>,
    /// Relative noise level; 0 or absent means noiseless
    #[arg(long)]
    noise: Option<f64>,
    /// Relative-error threshold counted as success
    #[arg(long)]
    threshold: Option<f64>,
    /// RNG seed
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for the replication loop
    #[arg(long)]
    jobs: Option<usize>,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
    /// Chain burn-in steps (coherence-optimal only)
    #[arg(long)]
    burn_in: Option<usize>,
    /// Chain steps between kept samples (coherence-optimal only)
    #[arg(long)]
    thin: Option<usize>,
    /// Chain proposal: standard or asymptotic (coherence-optimal only)
    #[arg(long, value_parser = parse_proposal_cli)]
    proposal: Option<Proposal>,
}

const RECOVERY_KEYS: &[&str] = &[
    "family",
    "d",
    "p",
    "strategies",
    "n-grid",
    "reps",
    "noise",
    "threshold",
    "seed",
    "jobs",
];

pub fn recovery(args: RecoveryArgs) -> Result<(), CliError> {
    let file = match &args.config {
        Some(path) => cfgfile::load(path)?,
        None => cfgfile::empty(),
    };
    let section = file.section("recovery", RECOVERY_KEYS)?;

    let family_cfg = section
        .string("family")?
        .map(|s| parse_family_cli(&s).map_err(usage))
        .transpose()?;
    let family = require(args.family.or(family_cfg), "--family (or config key family)")?;
    let d = require(args.d.or(section.usize("d")?), "--d (or config key d)")?;
    let p = require(args.p.or(section.usize("p")?), "--p (or config key p)")?;
    let strategies_text = args
        .strategies
        .or(section.string("strategies")?)
        .unwrap_or_else(|| "standard,asymptotic,coherence-optimal".to_owned());
    let kinds = parse_kind_list(&strategies_text)?;
    let n_grid_text = require(
        args.n_grid.or(section.string("n-grid")?),
        "--n-grid (or config key n-grid)",
    )?;
    let n_grid = parse_usize_list("n-grid", &n_grid_text)?;
    let reps = args.reps.or(section.usize("reps")?).unwrap_or(100);
    let noise_level = args.noise.or(section.f64("noise")?).unwrap_or(0.0);
    if !(noise_level >= 0.0) {
        return Err(usage("--noise must be non-negative"));
    }
    let threshold = args
        .threshold
        .or(section.f64("threshold")?)
        .unwrap_or(DEFAULT_RECOVERY_THRESHOLD);
    let seed = require(args.seed.or(section.u64("seed")?), "--seed (or config key seed)")?;
    let jobs = args.jobs.or(section.usize("jobs")?).unwrap_or(1);

    let flags = McmcFlags {
        burn_in: args.burn_in,
        thin: args.thin,
        proposal: args.proposal,
    };
    flags.check_applicable(&kinds)?;

    let config = RecoveryConfig {
        family,
        dimension: d,
        order: p,
        strategies: kinds.iter().map(|&k| flags.strategy(k)).collect(),
        n_grid: n_grid.clone(),
        replications: reps,
        noise: if noise_level > 0.0 {
            NoiseModel::RelativeGaussian {
                sigma_rel: noise_level,
            }
        } else {
            NoiseModel::None
        },
        threshold,
        seed,
        jobs,
    };
    let cells = manufactured_recovery(&config)?;

    let mut table = Table::new(&[
        "family",
        "strategy",
        "d",
        "p",
        "P",
        "N",
        "noise_sigma",
        "replications",
        "success_prob",
    ]);
    for cell in &cells {
        table.row(&[
            cell.family.name().to_owned(),
            cell.kind.name().to_owned(),
            cell.dimension.to_string(),
            cell.order.to_string(),
            cell.basis_size.to_string(),
            cell.n_samples.to_string(),
            format_f64(cell.noise_sigma),
            cell.replications.to_string(),
            format_f64(cell.success_prob),
        ]);
    }
    let out = resolve_out(&args.out);
    write_table(&table, &out)?;

    let mut argv = format!(
        "--family {} --d {} --p {} --strategies {} --n-grid {} --reps {} --noise {} --threshold {} --seed {}",
        family.name(),
        d,
        p,
        join_kinds(&kinds),
        join_usize(&n_grid),
        reps,
        format_f64(noise_level),
        format_f64(threshold),
        seed
    );
    if kinds.contains(&StrategyKind::CoherenceOptimal) {
        argv.push_str(&flags.argv_suffix());
    }
    let mut manifest = Manifest::start("recovery", argv, Some(seed), &out);
    manifest.push("rows", cells.len().to_string());
    finish_manifest(manifest)?;
    println!("wrote {} rows to {}", cells.len(), out.display());
    Ok(())
}

#[derive(clap::Args)]
pub struct OdeArgs {
    /// Config file with an [ode] section; flags override it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated strategies
    #[arg(long)]
    strategies: Option<String>,
    /// Comma-separated sample counts, strictly ascending
    #[arg(long)]
    n_grid: Option<String>,
    /// Replications per strategy
    #[arg(long)]
    reps: Option<usize>,
    /// Total order of the fitted expansion
    #[arg(long)]
    p: Option<usize>,
    /// Quadrature nodes per dimension for the reference expansion
    #[arg(long)]
    n_per_dim: Option<usize>,
    /// Integrator step size
    #[arg(long)]
    step: Option<f64>,
    /// RNG seed
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for the replication loop
    #[arg(long)]
    jobs: Option<usize>,
    /// Output CSV path
    #[arg(long)]
    out: PathBuf,
    /// Chain burn-in steps (coherence-optimal only)
    #[arg(long)]
    burn_in: Option<usize>,
    /// Chain steps between kept samples (coherence-optimal only)
    #[arg(long)]
    thin: Option<usize>,
    /// Chain proposal: standard or asymptotic (coherence-optimal only)
    #[arg(long, value_parser = parse_proposal_cli)]
    proposal: Option<Proposal>,
}

const ODE_KEYS: &[&str] = &[
    "strategies",
    "n-grid",
    "reps",
    "p",
    "n-per-dim",
    "step",
    "seed",
    "jobs",
];

pub fn ode(args: OdeArgs) -> Result<(), CliError> {
    let file = match &args.config {
        Some(path) => cfgfile::load(path)?,
        None => cfgfile::empty(),
    };
    let section = file.section("ode", ODE_KEYS)?;

    let strategies_text = args
        .strategies
        .or(section.string("strategies")?)
        .unwrap_or_else(|| "standard,asymptotic,coherence-optimal".to_owned());
    let kinds = parse_kind_list(&strategies_text)?;
    let n_grid_text = require(
        args.n_grid.or(section.string("n-grid")?),
        "--n-grid (or config key n-grid)",
    )?;
    let n_grid = parse_usize_list("n-grid", &n_grid_text)?;
    let reps = args.reps.or(section.usize("reps")?).unwrap_or(50);
    let p = args.p.or(section.usize("p")?).unwrap_or(32);
    let n_per_dim = args.n_per_dim.or(section.usize("n-per-dim")?).unwrap_or(100);
    let step = args.step.or(section.f64("step")?).unwrap_or(1e-3);
    let seed = require(args.seed.or(section.u64("seed")?), "--seed (or config key seed)")?;
    let jobs = args.jobs.or(section.usize("jobs")?).unwrap_or(1);

    let flags = McmcFlags {
        burn_in: args.burn_in,
        thin: args.thin,
        proposal: args.proposal,
    };
    flags.check_applicable(&kinds)?;

    let config = OdeStudyConfig {
        strategies: kinds.iter().map(|&k| flags.strategy(k)).collect(),
        n_grid: n_grid.clone(),
        replications: reps,
        order: p,
        n_per_dim,
        step,
        seed,
        jobs,
    };
    let cells = ode_study(&config)?;

    let mut table = Table::new(&[
        "strategy",
        "N",
        "replications",
        "mean_rel_rmse",
        "std_rel_rmse",
        "rank_deficient_fraction",
    ]);
    for cell in &cells {
        table.row(&[
            cell.kind.name().to_owned(),
            cell.n_samples.to_string(),
            cell.replications.to_string(),
            format_f64(cell.mean_rel_rmse),
            format_f64(cell.std_rel_rmse),
            format_f64(cell.rank_deficient_fraction),
        ]);
    }
    let out = resolve_out(&args.out);
    write_table(&table, &out)?;

    let mut argv = format!(
        "--strategies {} --n-grid {} --reps {} --p {} --n-per-dim {} --step {} --seed {}",
        join_kinds(&kinds),
        join_usize(&n_grid),
        reps,
        p,
        n_per_dim,
        format_f64(step),
        seed
    );
    if kinds.contains(&StrategyKind::CoherenceOptimal) {
        argv.push_str(&flags.argv_suffix());
    }
    let mut manifest = Manifest::start("ode", argv, Some(seed), &out);
    manifest.push("rows", cells.len().to_string());
    finish_manifest(manifest)?;
    println!("wrote {} rows to {}", cells.len(), out.display());
    Ok(())
}

#[derive(clap::Args)]
pub struct PlanArgs {
    /// Number of basis functions
    #[arg(long = "P")]
    basis_size: usize,
    /// Oversampling factor, at least 1
    #[arg(long)]
    nu: f64,
    /// Markov tail threshold
    #[arg(long)]
    tau: f64,
    /// Target success probability, in (0, 1)
    #[arg(long)]
    rho: f64,
    /// Truncation energy of the target
    #[arg(long)]
    eps2: f64,
    /// Noise energy; absent means the noiseless budget
    #[arg(long = "epsM2")]
    eps_m2: Option<f64>,
    /// Plan for a merely truncated (unbounded-coherence) expansion
    #[arg(long)]
    truncated: bool,
    /// Optional one-row CSV output path
    #[arg(long)]
    out: Option<PathBuf>,
}

pub fn plan(args: PlanArgs) -> Result<(), CliError> {
    let plan = SampleSizePlan {
        basis_size: args.basis_size,
        nu: args.nu,
        tau: args.tau,
        rho: args.rho,
        eps2: args.eps2,
        eps_m2: args.eps_m2,
        bounded_coherence: !args.truncated,
    };
    let n = required_samples(&plan)?;
    println!("N={n}");

    if let Some(out_arg) = args.out {
        let mut table = Table::new(&[
            "P", "nu", "tau", "rho", "eps2", "epsM2", "truncated", "N",
        ]);
        table.row(&[
            args.basis_size.to_string(),
            format_f64(args.nu),
            format_f64(args.tau),
            format_f64(args.rho),
            format_f64(args.eps2),
            format_opt_f64(args.eps_m2),
            args.truncated.to_string(),
            n.to_string(),
        ]);
        let out = resolve_out(&out_arg);
        write_table(&table, &out)?;

        let mut argv = format!(
            "--P {} --nu {} --tau {} --rho {} --eps2 {}",
            args.basis_size,
            format_f64(args.nu),
            format_f64(args.tau),
            format_f64(args.rho),
            format_f64(args.eps2)
        );
        if let Some(m2) = args.eps_m2 {
            argv.push_str(&format!(" --epsM2 {}", format_f64(m2)));
        }
        if args.truncated {
            argv.push_str(" --truncated");
        }
        let mut manifest = Manifest::start("plan", argv, None, &out);
        manifest.push("N", n.to_string());
        finish_manifest(manifest)?;
    }
    Ok(())
}
