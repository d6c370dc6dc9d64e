//! Batch commands behind the `gnbp` binary: `estimate`, `simulate`,
//! `validate` and `reproduce-table1`.
//!
//! Every command is a plain function returning its report, so the same
//! code paths are exercised by the examples and tests.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{bundled, subsample_without_replacement, FrequencyCounts};
use crate::distributions::{gnb_log_pmf, sample_cluster_structure, sample_crm_counts, Params};
use crate::diversity::{
    prob_distinct_pair, simpson_sample_estimate, summarize, DiversityConfig, DiversityMode,
    Summary,
};
use crate::error::{Error, Result};
use crate::inference::{run_chain, AMode, ChainConfig, PosteriorDraw};
use crate::math::{ln_factorial, ln_gamma, log_sum_exp, LogStirlingTable};
use crate::partition::{
    addition_rule_residual, cluster_count_pmf, gcrsf_log_eppf, gibbs_sweep, sequential_sample,
    sequential_step_probabilities, set_partitions, Assignments, LogRTable,
    RTableMode,
};
use crate::rng::{derive_seed, derived, seeded};
use crate::ClusterSizes;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_INPUT: i32 = 2;

/// Exit code for an error: bad input maps to 2, anything else to 1.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidParameter(_)
        | Error::Parse { .. }
        | Error::InvalidData(_)
        | Error::UnknownDataset(_)
        | Error::Io(_)
        | Error::Json(_) => EXIT_INPUT,
        Error::TableMismatch(_) | Error::Sampler(_) => EXIT_VALIDATION,
    }
}

#[derive(Debug, Parser)]
#[command(name = "gnbp", version, about = "Generalized negative binomial process species models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Posterior inference and Simpson diversity for one dataset.
    Estimate(EstimateArgs),
    /// Draw cluster structures from the model.
    Simulate(SimulateArgs),
    /// Run the numerical self-checks.
    Validate(ValidateArgs),
    /// Bias and coverage study on subsamples of the EST library.
    #[command(name = "reproduce-table1")]
    ReproduceTable1(Table1Args),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DiversityModeArg {
    Auto,
    Exact,
    Mc,
}

impl From<DiversityModeArg> for DiversityMode {
    fn from(m: DiversityModeArg) -> Self {
        match m {
            DiversityModeArg::Auto => DiversityMode::Auto,
            DiversityModeArg::Exact => DiversityMode::ExactTruncated,
            DiversityModeArg::Mc => DiversityMode::MonteCarlo,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct ChainArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 2000)]
    pub iterations: usize,
    #[arg(long, default_value_t = 1000)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 1)]
    pub thin: usize,
    #[arg(long, default_value = "free")]
    pub a_mode: AMode,
    #[arg(long, default_value_t = 0.01)]
    pub e0: f64,
    #[arg(long, default_value_t = 0.01)]
    pub f0: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub a_grid_step: f64,
    #[arg(long, default_value_t = 1e-3)]
    pub p_grid_step: f64,
}

impl ChainArgs {
    pub fn to_config(&self) -> ChainConfig {
        ChainConfig {
            iterations: self.iterations,
            burn_in: self.burn_in,
            thin: self.thin,
            seed: self.seed,
            e0: self.e0,
            f0: self.f0,
            a_mode: self.a_mode,
            a_grid_step: self.a_grid_step,
            p_grid_step: self.p_grid_step,
            init: None,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct DiversityArgs {
    #[arg(long, value_enum, default_value = "auto")]
    pub diversity_mode: DiversityModeArg,
    #[arg(long, default_value_t = 1e-8)]
    pub tail_epsilon: f64,
    #[arg(long, default_value_t = 2000)]
    pub n_cap: usize,
    #[arg(long, default_value_t = 20)]
    pub mc_draws: usize,
}

impl DiversityArgs {
    pub fn to_config(&self) -> DiversityConfig {
        DiversityConfig {
            mode: self.diversity_mode.into(),
            tail_epsilon: self.tail_epsilon,
            n_cap: self.n_cap,
            mc_draws: self.mc_draws,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct EstimateArgs {
    /// Frequency-count file (CSV `i,m_i` or JSON).
    #[arg(long, conflicts_with = "dataset", required_unless_present = "dataset")]
    pub input: Option<PathBuf>,
    /// Bundled dataset: est-tomato, tcr-treg-healthy-1, tcr-treg-diabetic-1.
    #[arg(long)]
    pub dataset: Option<String>,
    #[command(flatten)]
    pub chain: ChainArgs,
    #[command(flatten)]
    pub diversity: DiversityArgs,
    /// Skip the per-draw Simpson index.
    #[arg(long)]
    pub no_diversity: bool,
    /// Directory for report.json and draws.csv; report goes to stdout otherwise.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputSummary {
    pub source: String,
    pub n: usize,
    pub l: usize,
    pub sample_simpson: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub gamma0: Summary,
    pub a: Summary,
    pub p: Summary,
    pub s_theta: Option<Summary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub input: InputSummary,
    pub chain: ChainConfig,
    pub diversity: Option<DiversityConfig>,
    pub draws: usize,
    pub posterior: PosteriorSummary,
    pub draws_csv: Option<String>,
    pub wall_clock_seconds: f64,
    pub seed: u64,
}

pub fn load_input(input: Option<&Path>, dataset: Option<&str>) -> Result<(String, FrequencyCounts)> {
    match (input, dataset) {
        (Some(path), None) => {
            let text = fs::read_to_string(path).map_err(|e| {
                Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
            })?;
            Ok((path.display().to_string(), FrequencyCounts::parse(&text)?))
        }
        (None, Some(name)) => Ok((name.to_string(), bundled(name)?)),
        _ => Err(Error::param("give exactly one of --input or --dataset")),
    }
}

pub fn draws_csv(draws: &[PosteriorDraw]) -> String {
    let mut out = String::from("iter,gamma0,a,p,s_theta,log_ecpf\n");
    for d in draws {
        let s = d.s_theta.map(|s| s.to_string()).unwrap_or_default();
        writeln!(
            out,
            "{},{},{},{},{},{}",
            d.iter,
            d.params.gamma0(),
            d.params.a(),
            d.params.p(),
            s,
            d.log_ecpf
        )
        .unwrap();
    }
    out
}

pub fn posterior_summary(draws: &[PosteriorDraw]) -> Result<PosteriorSummary> {
    let col = |f: fn(&PosteriorDraw) -> f64| draws.iter().map(f).collect::<Vec<_>>();
    let s: Option<Vec<f64>> = draws.iter().map(|d| d.s_theta).collect();
    Ok(PosteriorSummary {
        gamma0: summarize(&col(|d| d.params.gamma0()))?,
        a: summarize(&col(|d| d.params.a()))?,
        p: summarize(&col(|d| d.params.p()))?,
        s_theta: s.map(|v| summarize(&v)).transpose()?,
    })
}

/// Runs one chain and returns the report together with the draws CSV.
/// With `out` set, both are also written there.
pub fn cmd_estimate(args: &EstimateArgs) -> Result<(RunReport, String)> {
    let started = Instant::now();
    let (source, fc) = load_input(args.input.as_deref(), args.dataset.as_deref())?;
    let sizes = fc.to_cluster_sizes();
    let chain = args.chain.to_config();
    let diversity = (!args.no_diversity).then(|| args.diversity.to_config());
    let draws = run_chain(&sizes, &chain, diversity.as_ref())?;
    let csv = draws_csv(&draws);

    let draws_path = args.out.as_ref().map(|d| d.join("draws.csv"));
    let report = RunReport {
        input: InputSummary {
            source,
            n: sizes.n(),
            l: sizes.l(),
            sample_simpson: simpson_sample_estimate(&sizes).ok(),
        },
        chain,
        diversity,
        draws: draws.len(),
        posterior: posterior_summary(&draws)?,
        draws_csv: draws_path.as_ref().map(|p| p.display().to_string()),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        seed: args.chain.seed,
    };
    if let (Some(dir), Some(path)) = (&args.out, &draws_path) {
        fs::create_dir_all(dir)?;
        fs::write(path, &csv)?;
        fs::write(dir.join("report.json"), serde_json::to_string_pretty(&report)?)?;
    }
    Ok((report, csv))
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub gamma0: f64,
    #[arg(long, allow_hyphen_values = true)]
    pub a: f64,
    #[arg(long)]
    pub p: f64,
    /// Condition on this sample size (sequential sampler); otherwise `n` is
    /// random (compound Poisson sampler).
    #[arg(long)]
    pub given_n: Option<usize>,
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV file; stdout otherwise.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// CSV with columns `draw,n,l,sizes`; `sizes` is space separated, descending.
pub fn cmd_simulate(args: &SimulateArgs) -> Result<String> {
    let params = Params::new(args.gamma0, args.a, args.p)?;
    let mut rng = seeded(args.seed);
    let rtable = match args.given_n {
        Some(0) => return Err(Error::param("--given-n must be positive")),
        Some(n) => Some(LogRTable::build(n, &params, RTableMode::Full)?),
        None => None,
    };
    let mut out = String::from("draw,n,l,sizes\n");
    for draw in 0..args.count {
        let sizes = match (&rtable, args.given_n) {
            (Some(t), Some(n)) => sequential_sample(n, &params, t, &mut rng)?.cluster_sizes(),
            _ => sample_cluster_structure(&params, &mut rng)?,
        };
        let mut s = sizes.sizes().to_vec();
        s.sort_unstable_by(|x, y| y.cmp(x));
        let joined: Vec<String> = s.iter().map(usize::to_string).collect();
        writeln!(out, "{draw},{},{},{}", sizes.n(), sizes.l(), joined.join(" ")).unwrap();
    }
    if let Some(path) = &args.out {
        fs::write(path, &out)?;
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ValidateLevel {
    Quick,
    Full,
}

#[derive(Debug, Clone, Args)]
pub struct ValidateArgs {
    #[arg(long, value_enum, default_value = "quick")]
    pub level: ValidateLevel,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub level: ValidateLevel,
    pub checks: Vec<Check>,
    pub passed: bool,
}

fn check(name: impl Into<String>, residual: f64, tolerance: f64) -> Check {
    Check {
        name: name.into(),
        residual,
        tolerance,
        passed: residual.abs() <= tolerance,
    }
}

fn total_variation(counts: &[usize], probs: &[f64]) -> f64 {
    let draws: usize = counts.iter().sum();
    let len = counts.len().max(probs.len());
    (0..len)
        .map(|k| {
            let e = counts.get(k).copied().unwrap_or(0) as f64 / draws as f64;
            (e - probs.get(k).copied().unwrap_or(0.0)).abs()
        })
        .sum::<f64>()
        / 2.0
}

fn validation_grid() -> Vec<Params> {
    let mut grid = Vec::new();
    for g in [0.1, 1.0, 10.0] {
        for a in [-2.0, -1.0, 0.0, 0.5, 0.9] {
            for p in [0.1, 0.5, 0.9] {
                grid.push(Params::new(g, a, p).expect("grid values are valid"));
            }
        }
    }
    grid
}

/// `max |Σ_Π P(Π | n) − 1|` over all set partitions of `[n]`, `2 <= n <= max_n`.
pub fn eppf_normalization_residual(params: &Params, max_n: usize) -> Result<f64> {
    let table = LogStirlingTable::new(max_n, params.a())?;
    let mut worst: f64 = 0.0;
    for n in 2..=max_n {
        let mut terms = Vec::new();
        for z in set_partitions(n) {
            terms.push(gcrsf_log_eppf(&z.cluster_sizes(), params, &table)?);
        }
        worst = worst.max((log_sum_exp(&terms).exp() - 1.0).abs());
    }
    Ok(worst)
}

/// `ln Σ_l gamma0^l p^{−a l} S_a(n, l) − ln(gamma0 p^{−a}) − ln R_n(1, 1)`.
pub fn stirling_r_identity_residual(n: usize, params: &Params) -> Result<f64> {
    let table = LogStirlingTable::new(n, params.a())?;
    let w = params.ln_new_cluster_weight();
    let lhs: Vec<f64> = (1..=n).map(|l| l as f64 * w + table.get(n, l)).collect();
    let r = LogRTable::build(n, params, RTableMode::Frontier { keep: vec![1] })?;
    Ok(log_sum_exp(&lhs) - w - r.get(1, 1).expect("row kept"))
}

fn nb_log_pmf(n: usize, gamma0: f64, p: f64) -> f64 {
    ln_gamma(n as f64 + gamma0) - ln_gamma(gamma0) - ln_factorial(n)
        + n as f64 * p.ln()
        + gamma0 * (-p).ln_1p()
}

/// Largest deviation of the `a = 0` model from the Chinese restaurant
/// process and the negative binomial law.
pub fn zero_discount_residuals(gamma0: f64, p: f64) -> Result<(f64, f64, f64)> {
    let params = Params::new(gamma0, 0.0, p)?;
    let n = 30;
    let rtable = LogRTable::build(n, &params, RTableMode::Full)?;
    let mut crp: f64 = 0.0;
    let mut rng = seeded(1);
    for _ in 0..5 {
        let z = sequential_sample(n, &params, &rtable, &mut rng)?;
        for i in 1..n {
            let counts = z.prefix(i).counts();
            let probs = sequential_step_probabilities(&counts, &params, &rtable)?;
            let denom = i as f64 + gamma0;
            for (k, &c) in counts.iter().enumerate() {
                crp = crp.max((probs[k] - c as f64 / denom).abs());
            }
            crp = crp.max((probs[counts.len()] - gamma0 / denom).abs());
        }
    }

    let mut pair: f64 = 0.0;
    for n in [2, 10, 100] {
        let t = LogRTable::build(n, &params, RTableMode::Frontier { keep: vec![1, 2] })?;
        pair = pair.max((prob_distinct_pair(n, &params, &t)? - gamma0 / (1.0 + gamma0)).abs());
    }

    let table = LogStirlingTable::new(200, 0.0)?;
    let mut nb: f64 = 0.0;
    for n in 0..=200 {
        let got = gnb_log_pmf(n, &params, &table)?.exp();
        nb = nb.max((got - nb_log_pmf(n, gamma0, p).exp()).abs());
    }
    Ok((crp, pair, nb))
}

/// TV between `draws` compound-Poisson sample sizes and the gNB PMF.
pub fn compound_poisson_tv(params: &Params, draws: usize, seed: u64) -> Result<f64> {
    let mut rng = seeded(seed);
    let mut counts: Vec<usize> = Vec::new();
    for _ in 0..draws {
        let n = sample_cluster_structure(params, &mut rng)?.n();
        if n >= counts.len() {
            counts.resize(n + 1, 0);
        }
        counts[n] += 1;
    }
    let max_n = counts.len().max(64) * 2;
    let table = LogStirlingTable::new(max_n, params.a())?;
    let pmf = (0..=max_n)
        .map(|n| gnb_log_pmf(n, params, &table).map(f64::exp))
        .collect::<Result<Vec<_>>>()?;
    Ok(total_variation(&counts, &pmf))
}

/// TV between the sample sizes of the two random-`n` samplers (`a < 0`).
pub fn crm_vs_compound_poisson_tv(params: &Params, draws: usize, seed: u64) -> Result<f64> {
    let mut rng = seeded(seed);
    let mut a = Vec::new();
    let mut b = Vec::new();
    let bump = |v: &mut Vec<usize>, n: usize| {
        if n >= v.len() {
            v.resize(n + 1, 0);
        }
        v[n] += 1;
    };
    for _ in 0..draws {
        bump(&mut a, sample_cluster_structure(params, &mut rng)?.n());
        bump(&mut b, sample_crm_counts(params, &mut rng)?.n());
    }
    let len = a.len().max(b.len());
    a.resize(len, 0);
    b.resize(len, 0);
    let tv = a
        .iter()
        .zip(&b)
        .map(|(&x, &y)| (x as f64 - y as f64).abs() / draws as f64)
        .sum::<f64>()
        / 2.0;
    Ok(tv)
}

/// TV between sequential-sampler cluster counts and the exact PMF.
pub fn sequential_sampler_tv(n: usize, params: &Params, draws: usize, seed: u64) -> Result<f64> {
    let rtable = LogRTable::build(n, params, RTableMode::Full)?;
    let table = LogStirlingTable::new(n, params.a())?;
    let exact = cluster_count_pmf(n, params, &table)?;
    let mut rng = seeded(seed);
    let mut counts = vec![0usize; n + 1];
    for _ in 0..draws {
        counts[sequential_sample(n, params, &rtable, &mut rng)?.n_clusters()] += 1;
    }
    Ok(total_variation(&counts, &exact))
}

/// TV between long-run Gibbs partition frequencies and the exact EPPF on
/// all set partitions of `[n]`.
pub fn gibbs_partition_tv(n: usize, params: &Params, sweeps: usize, seed: u64) -> Result<f64> {
    let table = LogStirlingTable::new(n, params.a())?;
    let parts: Vec<Assignments> = set_partitions(n).collect();
    let exact = parts
        .iter()
        .map(|z| gcrsf_log_eppf(&z.cluster_sizes(), params, &table).map(f64::exp))
        .collect::<Result<Vec<_>>>()?;
    let mut rng = seeded(seed);
    let mut z = Assignments::new(vec![1; n])?;
    for _ in 0..100 {
        z = gibbs_sweep(&z, params, &mut rng);
    }
    let mut counts = vec![0usize; parts.len()];
    for _ in 0..sweeps {
        z = gibbs_sweep(&z, params, &mut rng);
        let k = parts.iter().position(|q| q == &z).expect("canonical labels");
        counts[k] += 1;
    }
    Ok(total_variation(&counts, &exact))
}

pub fn cmd_validate(args: &ValidateArgs) -> Result<ValidationReport> {
    let full = args.level == ValidateLevel::Full;
    let mut checks = Vec::new();

    let max_n = if full { 8 } else { 6 };
    let mut worst: f64 = 0.0;
    for th in validation_grid() {
        worst = worst.max(eppf_normalization_residual(&th, max_n)?);
    }
    checks.push(check(format!("eppf sums to one, n <= {max_n}"), worst, 1e-8));

    let sizes: &[usize] = if full { &[10, 100, 500] } else { &[10, 500] };
    for &n in sizes {
        let mut worst: f64 = 0.0;
        for th in validation_grid() {
            worst = worst.max(stirling_r_identity_residual(n, &th)?.abs());
        }
        checks.push(check(format!("stirling/R identity, n = {n}"), worst, 1e-8));
    }

    let (crp, pair, nb) = zero_discount_residuals(1.5, 0.4)?;
    checks.push(check("a = 0 prediction rule is the CRP", crp, 1e-12));
    checks.push(check("a = 0 pair probability", pair, 1e-10));
    checks.push(check("a = 0 gNB is negative binomial", nb, 1e-10));

    let mut add0: f64 = 0.0;
    let mut add_half: f64 = 0.0;
    let prefix = ClusterSizes::new(vec![1, 1])?;
    for (g, p) in [(1.0, 0.5), (3.0, 0.2)] {
        let table = LogStirlingTable::new(10, 0.0)?;
        add0 = add0.max(addition_rule_residual(&prefix, 10, &Params::new(g, 0.0, p)?, &table)?.abs());
    }
    let table = LogStirlingTable::new(10, 0.5)?;
    add_half = add_half.max(addition_rule_residual(&prefix, 10, &Params::new(1.0, 0.5, 0.5)?, &table)?.abs());
    checks.push(check("a = 0 satisfies the addition rule", add0, 1e-10));
    // here the check passes when the residual is far from zero
    checks.push(Check {
        name: "a = 0.5 violates the addition rule".into(),
        residual: add_half,
        tolerance: 1e-3,
        passed: add_half > 1e-3,
    });

    let draws = if full { 100_000 } else { 20_000 };
    let tol = if full { 0.015 } else { 0.03 };
    let th = Params::new(1.0, 0.5, 0.5)?;
    checks.push(check(
        format!("compound Poisson sizes vs gNB PMF, {draws} draws"),
        compound_poisson_tv(&th, draws, derive_seed(args.seed, &[1]))?,
        tol,
    ));
    let th_neg = Params::new(1.0, -1.0, 0.5)?;
    checks.push(check(
        format!("finite-atom thinning vs compound Poisson, {draws} draws"),
        crm_vs_compound_poisson_tv(&th_neg, draws, derive_seed(args.seed, &[2]))?,
        if full { 0.02 } else { 0.04 },
    ));
    checks.push(check(
        format!("sequential sampler cluster counts, {draws} draws"),
        sequential_sampler_tv(10, &th, draws, derive_seed(args.seed, &[3]))?,
        if full { 0.02 } else { 0.03 },
    ));
    if full {
        checks.push(check(
            "gibbs partition frequencies, n = 4",
            gibbs_partition_tv(4, &th, 200_000, derive_seed(args.seed, &[4]))?,
            0.03,
        ));
    }

    let passed = checks.iter().all(|c| c.passed);
    Ok(ValidationReport {
        level: args.level,
        checks,
        passed,
    })
}

pub fn format_validation(report: &ValidationReport) -> String {
    let mut out = String::new();
    for c in &report.checks {
        let tag = if c.passed { "PASS" } else { "FAIL" };
        writeln!(out, "{tag}  {:<52} residual {:.3e} (tol {:e})", c.name, c.residual, c.tolerance)
            .unwrap();
    }
    let n_failed = report.checks.iter().filter(|c| !c.passed).count();
    writeln!(out, "{} checks, {} failed", report.checks.len(), n_failed).unwrap();
    out
}

#[derive(Debug, Clone, Args)]
pub struct Table1Args {
    #[arg(long, default_value_t = 20)]
    pub replicates: usize,
    #[arg(long, default_value_t = 50)]
    pub subsample: usize,
    /// Comma-separated restrictions: a=-1, a=0, a=0.5, a<0, 0<=a<1, a<1
    /// (or free, nonneg, neg, fixed=V).
    #[arg(long, value_delimiter = ',', default_value = "a=-1,a=0,a=0.5,a<0,0<=a<1,a<1", allow_hyphen_values = true)]
    pub modes: Vec<String>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 2000)]
    pub iterations: usize,
    #[arg(long, default_value_t = 1000)]
    pub burn_in: usize,
    #[arg(long, default_value_t = 5)]
    pub thin: usize,
    #[arg(long, default_value_t = 1e-3)]
    pub a_grid_step: f64,
    #[arg(long, default_value_t = 5e-3)]
    pub p_grid_step: f64,
    #[command(flatten)]
    pub diversity: DiversityArgs,
    /// Reference value; defaults to the sample estimate on the full library.
    #[arg(long)]
    pub target: Option<f64>,
    /// Directory for table1.csv and table1_replicates.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Default for Table1Args {
    fn default() -> Self {
        Table1Args {
            replicates: 20,
            subsample: 50,
            modes: ["a=-1", "a=0", "a=0.5", "a<0", "0<=a<1", "a<1"]
                .map(String::from)
                .to_vec(),
            seed: 0,
            iterations: 2000,
            burn_in: 1000,
            thin: 5,
            a_grid_step: 1e-3,
            p_grid_step: 5e-3,
            diversity: DiversityArgs {
                diversity_mode: DiversityModeArg::Auto,
                tail_epsilon: 1e-8,
                n_cap: 2000,
                mc_draws: 20,
            },
            target: None,
            out: None,
        }
    }
}

/// Table row label to discount restriction.
pub fn parse_table_mode(label: &str) -> Result<AMode> {
    match label.trim() {
        "a<1" => Ok(AMode::Free),
        "0<=a<1" => Ok(AMode::NonNegative),
        "a<0" => Ok(AMode::Negative),
        other => match other.strip_prefix("a=") {
            Some(v) => format!("fixed={v}").parse(),
            None => other.parse(),
        },
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRow {
    pub replicate: usize,
    pub mode: String,
    pub summary: Summary,
    pub abs_mean_bias: f64,
    pub abs_median_bias: f64,
    pub covers_50: bool,
    pub covers_95: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1Row {
    pub mode: String,
    pub replicates: usize,
    pub mean_bias: f64,
    pub median_bias: f64,
    pub coverage_50: f64,
    pub coverage_95: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table1 {
    pub target: f64,
    pub rows: Vec<Table1Row>,
    pub replicates: Vec<ReplicateRow>,
}

impl Table1 {
    pub fn row(&self, mode: &str) -> Option<&Table1Row> {
        self.rows.iter().find(|r| r.mode == mode)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("mode,replicates,mean_bias,median_bias,coverage_50,coverage_95\n");
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.mode, r.replicates, r.mean_bias, r.median_bias, r.coverage_50, r.coverage_95
            )
            .unwrap();
        }
        out
    }

    pub fn replicates_csv(&self) -> String {
        let mut out = String::from(
            "replicate,mode,mean,median,p25,p75,p2_5,p97_5,abs_mean_bias,abs_median_bias,covers_50,covers_95\n",
        );
        for r in &self.replicates {
            let s = &r.summary;
            writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{},{}",
                r.replicate,
                r.mode,
                s.mean,
                s.median,
                s.p25,
                s.p75,
                s.p2_5,
                s.p97_5,
                r.abs_mean_bias,
                r.abs_median_bias,
                u8::from(r.covers_50),
                u8::from(r.covers_95)
            )
            .unwrap();
        }
        out
    }
}

/// Bias and coverage of the posterior Simpson index on size-`subsample`
/// subsamples of the EST library, one chain per (replicate, mode).
pub fn cmd_reproduce_table1(args: &Table1Args) -> Result<Table1> {
    if args.replicates < 1 {
        return Err(Error::param("replicates must be positive"));
    }
    let modes = args
        .modes
        .iter()
        .map(|m| parse_table_mode(m).map(|a| (m.trim().to_string(), a)))
        .collect::<Result<Vec<_>>>()?;
    if modes.is_empty() {
        return Err(Error::param("no modes given"));
    }
    let population = bundled("est-tomato")?;
    let target = match args.target {
        Some(t) => t,
        None => simpson_sample_estimate(&population.to_cluster_sizes())?,
    };
    let z = population.to_assignments();
    let subsamples = (0..args.replicates)
        .map(|r| {
            let mut rng = derived(args.seed, &[r as u64]);
            subsample_without_replacement(&z, args.subsample, &mut rng).map(|s| s.cluster_sizes())
        })
        .collect::<Result<Vec<_>>>()?;
    let diversity = args.diversity.to_config();

    let jobs: Vec<(usize, usize)> = (0..args.replicates)
        .flat_map(|r| (0..modes.len()).map(move |m| (r, m)))
        .collect();
    let replicates = jobs
        .par_iter()
        .map(|&(r, m)| {
            let (label, a_mode) = &modes[m];
            let config = ChainConfig {
                iterations: args.iterations,
                burn_in: args.burn_in,
                thin: args.thin,
                seed: derive_seed(args.seed, &[r as u64, m as u64]),
                a_mode: *a_mode,
                a_grid_step: args.a_grid_step,
                p_grid_step: args.p_grid_step,
                ..Default::default()
            };
            let draws = run_chain(&subsamples[r], &config, Some(&diversity))?;
            let s: Vec<f64> = draws.iter().map(|d| d.s_theta.expect("diversity on")).collect();
            let summary = summarize(&s)?;
            Ok(ReplicateRow {
                replicate: r,
                mode: label.clone(),
                summary,
                abs_mean_bias: (summary.mean - target).abs(),
                abs_median_bias: (summary.median - target).abs(),
                covers_50: summary.covers_50(target),
                covers_95: summary.covers_95(target),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let rows = modes
        .iter()
        .map(|(label, _)| {
            let mine: Vec<&ReplicateRow> = replicates.iter().filter(|r| &r.mode == label).collect();
            let k = mine.len() as f64;
            let avg = |f: &dyn Fn(&ReplicateRow) -> f64| mine.iter().map(|r| f(r)).sum::<f64>() / k;
            Table1Row {
                mode: label.clone(),
                replicates: mine.len(),
                mean_bias: avg(&|r| r.abs_mean_bias),
                median_bias: avg(&|r| r.abs_median_bias),
                coverage_50: avg(&|r| f64::from(u8::from(r.covers_50))),
                coverage_95: avg(&|r| f64::from(u8::from(r.covers_95))),
            }
        })
        .collect();
    let table = Table1 {
        target,
        rows,
        replicates,
    };
    if let Some(dir) = &args.out {
        fs::create_dir_all(dir)?;
        fs::write(dir.join("table1.csv"), table.to_csv())?;
        fs::write(dir.join("table1_replicates.csv"), table.replicates_csv())?;
    }
    Ok(table)
}

/// Parses `argv`, runs the command, prints its output and returns the exit
/// code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(&cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

// a closed pipe (e.g. `| head`) is not an error worth reporting
fn emit(text: &str) {
    use std::io::Write;
    let _ = std::io::stdout().lock().write_all(text.as_bytes());
}

fn dispatch(command: &Command) -> Result<i32> {
    match command {
        Command::Estimate(args) => {
            let (report, _) = cmd_estimate(args)?;
            if args.out.is_none() {
                emit(&(serde_json::to_string_pretty(&report)? + "\n"));
            }
            Ok(EXIT_OK)
        }
        Command::Simulate(args) => {
            let csv = cmd_simulate(args)?;
            if args.out.is_none() {
                emit(&csv);
            }
            Ok(EXIT_OK)
        }
        Command::Validate(args) => {
            let report = cmd_validate(args)?;
            emit(&format_validation(&report));
            Ok(if report.passed { EXIT_OK } else { EXIT_VALIDATION })
        }
        Command::ReproduceTable1(args) => {
            let table = cmd_reproduce_table1(args)?;
            if args.out.is_none() {
                emit(&table.to_csv());
            }
            Ok(EXIT_OK)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn estimate_args(extra: &[&str]) -> EstimateArgs {
        let mut argv = vec!["gnbp", "estimate"];
        argv.extend_from_slice(extra);
        match Cli::try_parse_from(argv).unwrap().command {
            Command::Estimate(a) => a,
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn estimate_flags_map_to_config() {
        let a = estimate_args(&[
            "--dataset", "est-tomato", "--thin", "5", "--a-mode", "fixed=-1", "--seed", "9",
        ]);
        let c = a.chain.to_config();
        assert_eq!(c.thin, 5);
        assert_eq!(c.a_mode, AMode::Fixed(-1.0));
        assert_eq!(c.seed, 9);
        assert_eq!(c.retained_draws(), 200);
        assert_eq!(a.diversity.to_config(), DiversityConfig::default());
    }

    #[test]
    fn input_errors_exit_with_two() {
        assert_eq!(run(["gnbp", "estimate", "--input", "/no/such/file.csv"]), EXIT_INPUT);
        assert_eq!(run(["gnbp", "estimate", "--dataset", "unknown"]), EXIT_INPUT);
        assert_eq!(run(["gnbp", "estimate"]), EXIT_INPUT);
        assert_eq!(
            run(["gnbp", "simulate", "--gamma0", "1", "--a", "1.5", "--p", "0.5"]),
            EXIT_INPUT
        );
        assert_eq!(run(["gnbp", "bogus"]), EXIT_INPUT);
    }

    #[test]
    fn simulate_zero_count_is_header_only() {
        let args = SimulateArgs {
            gamma0: 1.0,
            a: 0.0,
            p: 0.5,
            given_n: Some(10),
            count: 0,
            seed: 0,
            out: None,
        };
        assert_eq!(cmd_simulate(&args).unwrap(), "draw,n,l,sizes\n");
    }

    #[test]
    fn simulate_given_n_rows() {
        let args = SimulateArgs {
            gamma0: 2.0,
            a: -1.0,
            p: 0.5,
            given_n: Some(12),
            count: 50,
            seed: 3,
            out: None,
        };
        let csv = cmd_simulate(&args).unwrap();
        let rows: Vec<&str> = csv.lines().skip(1).collect();
        assert_eq!(rows.len(), 50);
        for row in rows {
            let f: Vec<&str> = row.split(',').collect();
            assert_eq!(f[1], "12");
            let total: usize = f[3].split(' ').map(|s| s.parse::<usize>().unwrap()).sum();
            assert_eq!(total, 12);
            assert_eq!(f[3].split(' ').count().to_string(), f[2]);
        }
        assert_eq!(cmd_simulate(&args).unwrap(), csv);
    }

    #[test]
    fn table_mode_labels() {
        assert_eq!(parse_table_mode("a=-1").unwrap(), AMode::Fixed(-1.0));
        assert_eq!(parse_table_mode("a=0.5").unwrap(), AMode::Fixed(0.5));
        assert_eq!(parse_table_mode("a<0").unwrap(), AMode::Negative);
        assert_eq!(parse_table_mode("0<=a<1").unwrap(), AMode::NonNegative);
        assert_eq!(parse_table_mode("a<1").unwrap(), AMode::Free);
        assert_eq!(parse_table_mode("nonneg").unwrap(), AMode::NonNegative);
        assert!(parse_table_mode("a>1").is_err());
    }

    #[test]
    fn stirling_identity_small() {
        for th in validation_grid() {
            assert!(stirling_r_identity_residual(25, &th).unwrap().abs() < 1e-10);
        }
    }

    #[test]
    fn report_json_round_trip() {
        let args = estimate_args(&[
            "--dataset",
            "tcr-treg-healthy-1",
            "--iterations",
            "200",
            "--burn-in",
            "100",
            "--a-grid-step",
            "0.001",
            "--seed",
            "4",
        ]);
        let (report, csv) = cmd_estimate(&args).unwrap();
        assert_eq!(report.draws, 100);
        assert_eq!(csv.lines().count(), 101);
        let back: RunReport = serde_json::from_str(&serde_json::to_string(&report).unwrap()).unwrap();
        assert_eq!(back, report);
    }

    #[test]
    fn single_replicate_table() {
        let args = Table1Args {
            replicates: 1,
            modes: vec!["a=0".into()],
            iterations: 200,
            burn_in: 100,
            thin: 1,
            ..Default::default()
        };
        let t = cmd_reproduce_table1(&args).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert_eq!(t.replicates.len(), 1);
        let r = &t.rows[0];
        assert!(r.coverage_95 == 0.0 || r.coverage_95 == 1.0);
        assert_eq!(t.replicates_csv().lines().count(), 2);
    }
}
