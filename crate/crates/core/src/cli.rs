//! Command-line front end.
//!
//! Every option may also come from a flat `key = value` file passed with
//! `--config`; keys are the long flag names and flags win over the file.
//! `--seed` is accepted for future stochastic features and has no effect.

use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use crate::dirac_model::Branch;
use crate::error::{Error, Result};
use crate::harness::{
    certify_reference, make_reference, run_plan, run_solver, table_plans, validate_run, write_reference, BenchmarkProblem,
    ConvergenceTable, ReferenceCache, ReferenceSpec, Scale, SolverId, StudyContext, TableName,
};
use crate::observables::{l2_error, Cadence};
use crate::spectral_grid::SpinorGrid;

#[derive(Debug, Parser)]
#[command(name = "nlde", version, about = "Solvers and convergence tables for the 1D nonlinear Dirac equation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one solver on the benchmark and write the observable trace.
    Run(RunArgs),
    /// Compute (or refresh) a cached reference solution.
    Reference(RunArgs),
    /// Reproduce a convergence table as CSV.
    Table(TableArgs),
    /// Compare all solvers with an exact plane wave.
    Planewave(PlaneWaveArgs),
}

#[derive(Debug, Clone, Args, Default)]
pub struct CommonArgs {
    /// Flat key = value configuration file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Reference cache directory (falls back to $NLDE_CACHE, then ./nlde-cache).
    #[arg(long = "cache-dir")]
    pub cache_dir: Option<PathBuf>,
    /// Worker threads for independent cells.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Use the full-scale settings.
    #[arg(long = "paper-exact")]
    pub paper_exact: bool,
    /// Accepted for future use; has no effect.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output path (stdout if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Default)]
pub struct RunArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub solver: Option<String>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub lambda1: Option<f64>,
    #[arg(long)]
    pub lambda2: Option<f64>,
    /// Number of grid nodes.
    #[arg(long = "M", conflicts_with = "h")]
    pub m: Option<usize>,
    /// Mesh size.
    #[arg(long)]
    pub h: Option<f64>,
    #[arg(long)]
    pub tau: Option<f64>,
    /// Final time.
    #[arg(long = "T")]
    pub t_final: Option<f64>,
    /// Record observables every n steps (endpoints only if omitted).
    #[arg(long)]
    pub every: Option<usize>,
    /// Write the final field in the reference binary format.
    #[arg(long = "final-field")]
    pub final_field: Option<PathBuf>,
    /// Start from zero initial data.
    #[arg(long = "zero-initial")]
    pub zero_initial: bool,
    /// Also compute the companion run at twice the step and report the estimated error.
    #[arg(long)]
    pub certify: bool,
}

#[derive(Debug, Clone, Args)]
pub struct TableArgs {
    /// t1, t2, t3, t4, t5, t7 or t8.
    pub name: String,
    /// desk (default) or paper-exact.
    pub scale: Option<String>,
    #[command(flatten)]
    pub common: CommonArgs,
}

#[derive(Debug, Clone, Args)]
pub struct PlaneWaveArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long, default_value_t = 0.0)]
    pub k: f64,
    #[arg(long, default_value_t = 1.0)]
    pub eps: f64,
    #[arg(long, default_value_t = 0.0)]
    pub lambda2: f64,
    /// plus or minus.
    #[arg(long, default_value = "plus")]
    pub branch: String,
    #[arg(long, default_value_t = 1.0)]
    pub amplitude: f64,
    #[arg(long = "T", default_value_t = 1.0)]
    pub t_final: f64,
    #[arg(long, default_value_t = 1e-4)]
    pub tau: f64,
    #[arg(long = "M", default_value_t = 16)]
    pub m: usize,
}

/// Flat `key = value` file; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<HashMap<String, String>> {
    let mut map = HashMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got '{line}'", n + 1)))?;
        let key = k.trim().trim_start_matches("--").to_string();
        if key.is_empty() {
            return Err(Error::Config(format!("line {}: empty key", n + 1)));
        }
        map.insert(key, v.trim().to_string());
    }
    Ok(map)
}

struct FileConfig(HashMap<String, String>);

impl FileConfig {
    fn load(path: Option<&Path>) -> Result<Self> {
        match path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| Error::Config(format!("cannot read {}: {e}", p.display())))?;
                Ok(FileConfig(parse_config(&text)?))
            }
            None => Ok(FileConfig(HashMap::new())),
        }
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(v) => v.parse().map(Some).map_err(|_| Error::Config(format!("config key '{key}': cannot parse '{v}'"))),
        }
    }

    fn flag(&self, key: &str) -> Result<bool> {
        Ok(self.get::<bool>(key)?.unwrap_or(false))
    }

    fn check_keys(&self, allowed: &[&str]) -> Result<()> {
        let mut unknown: Vec<&String> = self.0.keys().filter(|k| !allowed.contains(&k.as_str())).collect();
        unknown.sort();
        match unknown.first() {
            Some(k) => Err(Error::Config(format!("unknown config key '{k}'"))),
            None => Ok(()),
        }
    }
}

const RUN_KEYS: &[&str] = &[
    "solver", "eps", "lambda1", "lambda2", "M", "h", "tau", "T", "every", "out", "final-field", "zero-initial", "cache-dir",
    "jobs", "paper-exact", "seed", "certify",
];

/// Fully resolved options for `run` and `reference`.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub solver: SolverId,
    pub problem: BenchmarkProblem,
    pub m: usize,
    pub tau: f64,
    pub cadence: Cadence,
    pub out: Option<PathBuf>,
    pub final_field: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub paper_exact: bool,
    pub certify: bool,
}

impl RunConfig {
    /// Merges flags over the file and validates everything before any solve.
    pub fn resolve(args: &RunArgs, defaults: (SolverId, usize, f64)) -> Result<Self> {
        let file = FileConfig::load(args.common.config.as_deref())?;
        file.check_keys(RUN_KEYS)?;
        let paper_exact = args.common.paper_exact || file.flag("paper-exact")?;
        let solver = match args.solver.clone().or(file.get("solver")?) {
            Some(s) => s.parse()?,
            None => defaults.0,
        };
        let eps = args.eps.or(file.get("eps")?).unwrap_or(1.0);
        let mut problem = BenchmarkProblem::benchmark(eps)?;
        let lambda1 = args.lambda1.or(file.get("lambda1")?).unwrap_or(problem.params.lambda1);
        let lambda2 = args.lambda2.or(file.get("lambda2")?).unwrap_or(problem.params.lambda2);
        problem = problem.with_couplings(lambda1, lambda2)?;
        if let Some(t) = args.t_final.or(file.get("T")?) {
            problem = problem.with_final_time(t)?;
        }
        if args.zero_initial || file.flag("zero-initial")? {
            problem = problem.with_zero_initial();
        }
        let (m_flag, h_flag) = if args.m.is_some() || args.h.is_some() {
            (args.m, args.h)
        } else {
            (file.get("M")?, file.get("h")?)
        };
        let m = match (m_flag, h_flag) {
            (Some(_), Some(_)) => return Err(Error::Config("give exactly one of M and h".into())),
            (Some(m), None) => problem.domain(m)?.m(),
            (None, Some(h)) => problem.domain_for_h(h)?.m(),
            (None, None) => defaults.1,
        };
        let tau = args.tau.or(file.get("tau")?).unwrap_or(if paper_exact { defaults.2 / 100.0 } else { defaults.2 });
        let cadence = match args.every.or(file.get("every")?) {
            Some(0) => return Err(Error::Config("every must be >= 1".into())),
            Some(n) => Cadence::every(n),
            None => Cadence::endpoints(),
        };
        validate_run(&problem, solver, m, tau)?;
        let certify = args.certify || file.flag("certify")?;
        if certify {
            validate_run(&problem, solver, m, 2.0 * tau)?;
        }
        Ok(RunConfig {
            solver,
            problem,
            m,
            tau,
            cadence,
            out: args.common.out.clone().or(file.get("out")?),
            final_field: args.final_field.clone().or(file.get("final-field")?),
            cache_dir: args.common.cache_dir.clone().or(file.get("cache-dir")?),
            paper_exact,
            certify,
        })
    }
}

fn open_out(path: Option<&Path>) -> Result<Box<dyn Write>> {
    match path {
        Some(p) => {
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            Ok(Box::new(fs::File::create(p)?))
        }
        None => Ok(Box::new(std::io::stdout().lock())),
    }
}

pub fn cmd_run(args: &RunArgs) -> Result<()> {
    let cfg = RunConfig::resolve(args, (SolverId::Tsfp, 512, 1e-3))?;
    let trace = run_solver(&cfg.problem, cfg.solver, cfg.m, cfg.tau, cfg.cadence)?;
    trace.write_csv(open_out(cfg.out.as_deref())?)?;
    if let Some(path) = &cfg.final_field {
        write_reference(path, &trace.final_field, cfg.problem.params.eps, trace.final_time)?;
    }
    Ok(())
}

pub fn cmd_reference(args: &RunArgs) -> Result<()> {
    let cfg = RunConfig::resolve(args, (SolverId::Tsfp, 512, 1e-5))?;
    let cache = ReferenceCache::resolve(cfg.cache_dir.clone());
    let spec = ReferenceSpec::new(cfg.solver, cfg.m, cfg.tau);
    // refresh: drop any stale file for this provenance first
    let path = cache.path_for(&crate::harness::Provenance::new(&cfg.problem, &spec));
    if path.exists() {
        fs::remove_file(&path)?;
    }
    let mut w = open_out(cfg.out.as_deref())?;
    if cfg.certify {
        let cert = certify_reference(&cfg.problem, &spec, Some(&cache))?;
        writeln!(w, "path,estimated_error")?;
        writeln!(w, "{},{:.5e}", path.display(), cert.l2_estimate())?;
    } else {
        make_reference(&cfg.problem, &spec, Some(&cache))?;
        writeln!(w, "path")?;
        writeln!(w, "{}", path.display())?;
    }
    Ok(())
}

const TABLE_KEYS: &[&str] = &["cache-dir", "jobs", "paper-exact", "seed", "out", "scale"];

pub fn cmd_table(args: &TableArgs) -> Result<Vec<ConvergenceTable>> {
    let file = FileConfig::load(args.common.config.as_deref())?;
    file.check_keys(TABLE_KEYS)?;
    let name: TableName = args.name.parse()?;
    let mut scale = match args.scale.clone().or(file.get("scale")?) {
        Some(s) => s.parse()?,
        None => Scale::Desk,
    };
    if args.common.paper_exact || file.flag("paper-exact")? {
        scale = Scale::PaperExact;
    }
    let jobs = args.common.jobs.or(file.get("jobs")?).unwrap_or(1);
    if jobs == 0 {
        return Err(Error::Config("jobs must be >= 1".into()));
    }
    let cache = ReferenceCache::resolve(args.common.cache_dir.clone().or(file.get("cache-dir")?));
    let out: Option<PathBuf> = args.common.out.clone().or(file.get("out")?);
    let ctx = StudyContext::new(Some(cache), jobs)?;
    let problem = BenchmarkProblem::benchmark(1.0)?;
    let tables = table_plans(name, scale).iter().map(|plan| run_plan(&ctx, &problem, plan)).collect::<Result<Vec<_>>>()?;
    let mut w = open_out(out.as_deref())?;
    writeln!(w, "{}", ConvergenceTable::CSV_HEADER)?;
    for t in &tables {
        t.write_rows(&mut w)?;
    }
    Ok(tables)
}

/// Error of each solver against the plane wave at `T`, for `τ` and `τ/2`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlaneWaveReport {
    pub rows: Vec<(SolverId, f64, f64)>,
}

impl PlaneWaveReport {
    pub fn error(&self, solver: SolverId, tau: f64) -> Option<f64> {
        self.rows.iter().find(|r| r.0 == solver && (r.1 - tau).abs() <= 1e-12 * tau).map(|r| r.2)
    }
}

#[allow(clippy::too_many_arguments)]
pub fn planewave_report(k: f64, eps: f64, lambda2: f64, branch: Branch, amplitude: f64, t_final: f64, tau: f64, m: usize) -> Result<PlaneWaveReport> {
    let (problem, wave) = BenchmarkProblem::plane_wave(k, eps, lambda2, branch, amplitude, t_final)?;
    for solver in SolverId::ALL {
        validate_run(&problem, solver, m, tau)?;
        validate_run(&problem, solver, m, tau / 2.0)?;
    }
    let domain = problem.domain(m)?;
    let exact = SpinorGrid::from_fn(domain, |x| wave.at(t_final, x));
    let mut rows = Vec::new();
    for solver in SolverId::ALL {
        for t in [tau, tau / 2.0] {
            let trace = run_solver(&problem, solver, m, t, Cadence::endpoints())?;
            rows.push((solver, t, l2_error(&trace.final_field, &exact)?));
        }
    }
    Ok(PlaneWaveReport { rows })
}

pub fn cmd_planewave(args: &PlaneWaveArgs) -> Result<PlaneWaveReport> {
    let branch = match args.branch.to_ascii_lowercase().as_str() {
        "plus" | "+" => Branch::Plus,
        "minus" | "-" => Branch::Minus,
        other => return Err(Error::Config(format!("unknown branch '{other}' (expected plus or minus)"))),
    };
    let report = planewave_report(args.k, args.eps, args.lambda2, branch, args.amplitude, args.t_final, args.tau, args.m)?;
    let mut w = open_out(args.common.out.as_deref())?;
    writeln!(w, "solver,tau,error")?;
    for (s, t, e) in &report.rows {
        writeln!(w, "{s},{t:.5e},{e:.5e}")?;
    }
    Ok(report)
}

/// Parses `args` and runs the command; returns the process exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Reference(a) => cmd_reference(a),
        Command::Table(a) => cmd_table(a).map(|_| ()),
        Command::Planewave(a) => cmd_planewave(a).map(|_| ()),
    };
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
