mod report;
mod reproduce;
mod source;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use qdiscord_core::discord::{self, MeasureKind};
use qdiscord_core::monogamy::{
    check_complete, check_discorrelated, check_proposition, expand_proposition_id, monogamy_alpha, sample_seed,
    save_samples, scan_assumptions, InequalityCheck, Sampler, Verdict,
};
use qdiscord_core::{DensityMatrix, OptimizerConfig, Partition};
use rayon::prelude::*;
use serde::Serialize;

use report::{print_check, write_json, write_rows, Envelope, ReportRow};

#[derive(Parser)]
#[command(name = "qdiscord", version, about = "Bipartite, multipartite and global quantum discord")]
struct Cli {
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true, env = "QDISCORD_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct OptArgs {
    /// TOML file with optimizer settings; flags override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Random restarts per minimization.
    #[arg(long)]
    restarts: Option<usize>,
    /// Grid points per angle for qubit blocks.
    #[arg(long)]
    grid: Option<usize>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    f_tol: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
}

impl OptArgs {
    fn resolve(&self) -> Result<OptimizerConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => OptimizerConfig::default(),
        };
        if let Some(v) = self.restarts {
            cfg.restarts = v;
        }
        if let Some(v) = self.grid {
            cfg.grid_points_per_angle = v;
        }
        if let Some(v) = self.max_iters {
            cfg.max_iters = v;
        }
        if let Some(v) = self.f_tol {
            cfg.f_tol = v;
        }
        if let Some(v) = self.seed {
            cfg.seed = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum Measure {
    Qd,
    Mqd,
    Gqd,
}

impl From<Measure> for MeasureKind {
    fn from(m: Measure) -> Self {
        match m {
            Measure::Qd => MeasureKind::QdBipartite,
            Measure::Mqd => MeasureKind::Mqd,
            Measure::Gqd => MeasureKind::Gqd,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Compute one discord value.
    Compute {
        /// named:NAME[:P1,P2,..] | file:PATH | random:DIMS:RANK:SEED
        #[arg(long)]
        state: String,
        #[arg(long, value_enum)]
        measure: Measure,
        /// e.g. "A|B|C"; block order is measurement order.
        #[arg(long)]
        partition: String,
        #[command(flatten)]
        opt: OptArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Report format for --out (or stdout instead of the summary line).
        #[arg(long, value_enum)]
        format: Option<Format>,
    },
    /// Run a canned experiment and compare against the expected values.
    Reproduce {
        #[arg(value_parser = clap::builder::PossibleValuesParser::new(reproduce::TARGETS))]
        target: String,
        #[command(flatten)]
        opt: OptArgs,
        /// Write the outcomes as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check inequalities on one state.
    ///
    /// With --prop, evaluates catalog items (e.g. prop1, prop4.item7, thm1,
    /// gqd_bound_eq26). With --coarser, tests the dis-correlated condition for
    /// the pair. Otherwise checks monotonicity along every coarsening step.
    Check {
        #[arg(long)]
        state: String,
        #[arg(long, value_enum, default_value = "mqd")]
        measure: Measure,
        #[arg(long, default_value = "")]
        partition: String,
        #[arg(long, conflicts_with = "prop")]
        coarser: Option<String>,
        #[arg(long)]
        prop: Option<String>,
        #[command(flatten)]
        opt: OptArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sample random states and evaluate an assumption scan or catalog items.
    Scan {
        /// ginibre | ginibre:RANK | classical
        #[arg(long, default_value = "ginibre")]
        sampler: String,
        /// Subsystem dimensions, e.g. 2x2x2.
        #[arg(long, default_value = "2x2x2")]
        dims: String,
        #[arg(long, default_value_t = 100)]
        samples: usize,
        /// Measure for the assumption suite; catalog items fix their own.
        #[arg(long, value_enum, default_value = "mqd")]
        measure: Measure,
        /// `assumptions` or a catalog id/group such as prop1.
        #[arg(long, default_value = "assumptions")]
        suite: String,
        #[command(flatten)]
        opt: OptArgs,
        /// CSV of report rows (stdout when absent).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "csv")]
        format: Format,
        /// Where offending states go (default: next to --out).
        #[arg(long)]
        save_dir: Option<PathBuf>,
        /// Fill the wall_time_s column.
        #[arg(long)]
        timing: bool,
    },
    /// Smallest exponent alpha with LHS^alpha >= sum RHS_i^alpha.
    Alpha {
        lhs: f64,
        #[arg(required = true)]
        rhs: Vec<f64>,
    },
}

fn parse_partition(text: &str, rho: &DensityMatrix) -> Result<Partition> {
    Ok(Partition::parse_with(text, &rho.names())?)
}

fn compute(state: &str, measure: Measure, partition: &str, cfg: &OptimizerConfig, out: Option<&Path>, format: Option<Format>) -> Result<bool> {
    let rho = source::load(state)?;
    let p = parse_partition(partition, &rho)?;
    let r = discord::discord(&rho, measure.into(), &p, cfg)?;
    match (format, out) {
        (Some(Format::Csv), _) => write_rows(out, &[ReportRow::from_result(state, &r)])?,
        (Some(Format::Json), _) | (None, Some(_)) => write_json(out, &Envelope::new("compute", Some(state), cfg, &r))?,
        (None, None) => {}
    }
    if out.is_some() || format.is_none() {
        println!("{} = {:.6} bits", r.label, r.value);
    }
    Ok(true)
}

fn reproduce(target: &str, cfg: &OptimizerConfig, out: Option<&Path>) -> Result<bool> {
    let outcomes = reproduce::run(target, cfg)?;
    for o in &outcomes {
        println!("{} {}: expected {}, got {}", if o.pass { "PASS" } else { "FAIL" }, o.name, o.expected, o.got);
    }
    if out.is_some() {
        write_json(out, &Envelope::new(target, None, cfg, &outcomes))?;
    }
    Ok(outcomes.iter().all(|o| o.pass))
}

fn check(
    state: &str,
    measure: Measure,
    partition: &str,
    coarser: Option<&str>,
    prop: Option<&str>,
    cfg: &OptimizerConfig,
    out: Option<&Path>,
) -> Result<bool> {
    let rho = source::load(state)?;
    let kind: MeasureKind = measure.into();
    if let Some(id) = prop {
        let checks = check_proposition(&rho, id, cfg)?;
        checks.iter().for_each(print_check);
        if out.is_some() {
            write_json(out, &Envelope::new("check", Some(state), cfg, &checks))?;
        }
        return Ok(!checks.iter().any(|c| c.verdict == Verdict::Violated));
    }
    let top = if partition.is_empty() {
        Partition::singletons(rho.n_subsystems())
    } else {
        parse_partition(partition, &rho)?
    };
    if let Some(q) = coarser {
        let q = parse_partition(q, &rho)?;
        let mut report = check_discorrelated(&rho, kind, &top, &q, cfg)?;
        report.state_id = state.to_string();
        for (label, v) in &report.chain {
            println!("{label} = {v:.6}");
        }
        println!("equality within tolerance: {}", report.equality);
        for x in &report.xi {
            println!("  Xi member {} = {:.6}{}", x.label, x.value, if x.vanishes { "" } else { "  (nonzero)" });
        }
        println!("dis-correlated: {}", report.dis_correlated);
        if out.is_some() {
            write_json(out, &Envelope::new("check", Some(state), cfg, &report))?;
        }
        return Ok(report.dis_correlated);
    }
    let checks = check_complete(&rho, kind, &top, cfg)?;
    checks.iter().for_each(print_check);
    if out.is_some() {
        write_json(out, &Envelope::new("check", Some(state), cfg, &checks))?;
    }
    Ok(!checks.iter().any(|c| c.verdict == Verdict::Violated))
}

#[derive(Serialize)]
struct SuiteSummary {
    check: String,
    count: usize,
    holds: usize,
    violated: usize,
    inconclusive: usize,
    min_margin: Option<f64>,
}

#[derive(Serialize)]
struct ScanReport {
    sampler: String,
    dims: Vec<usize>,
    samples: usize,
    suite: String,
    seed: u64,
    summary: serde_json::Value,
    rows: Vec<ReportRow>,
    saved_states: Vec<PathBuf>,
}

#[allow(clippy::too_many_arguments)]
fn scan(
    sampler_text: &str,
    dims_text: &str,
    samples: usize,
    measure: Measure,
    suite: &str,
    cfg: &OptimizerConfig,
    out: Option<&Path>,
    format: Format,
    save_dir: Option<&Path>,
    timing: bool,
) -> Result<bool> {
    let sampler: Sampler = sampler_text.parse()?;
    let dims = source::parse_dims(dims_text)?;
    let kind: MeasureKind = measure.into();
    let seed = cfg.seed;
    let default_dir = out.map(|o| {
        let stem = o.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        o.with_file_name(format!("{stem}_offenders"))
    });
    let save_dir = save_dir.map(Path::to_path_buf).or(default_dir);
    let (rows, summary, saved, ok) = if suite == "assumptions" {
        let start = Instant::now();
        let s = scan_assumptions(samples, &dims, sampler, kind, cfg, seed, save_dir.as_deref())?;
        let per_sample = if timing && samples > 0 { Some(start.elapsed().as_secs_f64() / samples as f64) } else { None };
        let rows: Vec<ReportRow> = s
            .rows
            .iter()
            .map(|r| ReportRow {
                state_id: format!("sample-{:05}", r.sample),
                seed: Some(r.seed),
                measure: kind.as_str().to_string(),
                partition: r.assumption.clone(),
                value: r.lhs,
                rhs: Some(r.rhs),
                margin: Some(r.margin),
                verdict: if r.violated { "violated" } else { "holds" }.to_string(),
                spread: None,
                wall_time_s: per_sample,
            })
            .collect();
        for a in &s.per_assumption {
            eprintln!(
                "{}: {} samples, {} negative margins, min margin {}",
                a.assumption,
                a.count,
                a.violations,
                a.min_margin.map_or("-".to_string(), |m| format!("{m:.6}"))
            );
        }
        let ok = s.offending_samples.is_empty();
        (rows, serde_json::to_value(&s.per_assumption)?, s.saved_states, ok)
    } else {
        expand_proposition_id(suite)?;
        type SampleOut = (usize, u64, Vec<InequalityCheck>, Option<f64>);
        let results: Vec<Result<SampleOut>> = (0..samples)
            .into_par_iter()
            .map(|i| {
                let s = sample_seed(seed, i);
                let rho = sampler.sample(&dims, s)?;
                let start = Instant::now();
                let checks = check_proposition(&rho, suite, cfg)?;
                Ok((i, s, checks, timing.then(|| start.elapsed().as_secs_f64())))
            })
            .collect();
        let mut rows = Vec::new();
        let mut summaries: Vec<SuiteSummary> = Vec::new();
        let mut offenders = Vec::new();
        for res in results {
            let (i, s, checks, wall) = res?;
            let mut bad = false;
            for c in &checks {
                let measure = if c.name == "gqd_bound_eq26" { "gqd" } else { "mqd" };
                let mut row = ReportRow::from_check(&format!("sample-{i:05}"), measure, c);
                row.seed = Some(s);
                row.wall_time_s = wall;
                rows.push(row);
                let e = match summaries.iter_mut().position(|x| x.check == c.name) {
                    Some(k) => &mut summaries[k],
                    None => {
                        summaries.push(SuiteSummary {
                            check: c.name.clone(),
                            count: 0,
                            holds: 0,
                            violated: 0,
                            inconclusive: 0,
                            min_margin: None,
                        });
                        summaries.last_mut().unwrap()
                    }
                };
                e.count += 1;
                match c.verdict {
                    Verdict::Holds => e.holds += 1,
                    Verdict::Violated => e.violated += 1,
                    Verdict::Inconclusive => e.inconclusive += 1,
                }
                e.min_margin = Some(e.min_margin.map_or(c.margin, |m: f64| m.min(c.margin)));
                bad |= c.verdict == Verdict::Violated;
            }
            if bad {
                offenders.push(i);
            }
        }
        let saved = match save_dir.as_deref() {
            Some(dir) => save_samples(sampler, &dims, seed, &offenders, dir)?,
            None => Vec::new(),
        };
        for e in &summaries {
            eprintln!(
                "{}: {} samples, {} hold, {} violated, {} inconclusive, min margin {}",
                e.check,
                e.count,
                e.holds,
                e.violated,
                e.inconclusive,
                e.min_margin.map_or("-".to_string(), |m| format!("{m:.6}"))
            );
        }
        (rows, serde_json::to_value(&summaries)?, saved, offenders.is_empty())
    };
    for p in &saved {
        eprintln!("saved {}", p.display());
    }
    match format {
        Format::Csv => write_rows(out, &rows)?,
        Format::Json => {
            let report = ScanReport {
                sampler: sampler_text.to_string(),
                dims,
                samples,
                suite: suite.to_string(),
                seed,
                summary,
                rows,
                saved_states: saved,
            };
            write_json(out, &Envelope::new("scan", None, cfg, &report))?;
        }
    }
    Ok(ok)
}

fn alpha(lhs: f64, rhs: &[f64]) -> Result<bool> {
    match monogamy_alpha(lhs, rhs)? {
        Some(a) => {
            println!("alpha = {:.6}{}", a.alpha, if a.equality { " (equality)" } else { "" });
            Ok(true)
        }
        None => {
            println!("no exponent in range");
            Ok(false)
        }
    }
}

fn run(cli: Cli) -> Result<bool> {
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("thread count must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    match cli.command {
        Command::Compute { state, measure, partition, opt, out, format } => {
            compute(&state, measure, &partition, &opt.resolve()?, out.as_deref(), format)
        }
        Command::Reproduce { target, opt, out } => reproduce(&target, &opt.resolve()?, out.as_deref()),
        Command::Check { state, measure, partition, coarser, prop, opt, out } => check(
            &state,
            measure,
            &partition,
            coarser.as_deref(),
            prop.as_deref(),
            &opt.resolve()?,
            out.as_deref(),
        ),
        Command::Scan { sampler, dims, samples, measure, suite, opt, out, format, save_dir, timing } => scan(
            &sampler,
            &dims,
            samples,
            measure,
            &suite,
            &opt.resolve()?,
            out.as_deref(),
            format,
            save_dir.as_deref(),
            timing,
        ),
        Command::Alpha { lhs, rhs } => alpha(lhs, &rhs),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
