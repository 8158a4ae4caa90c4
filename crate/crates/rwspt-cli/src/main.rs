//! `rwspt`: build, explore and analyze rewritable stochastic Petri nets.
//!
//! Exit codes: 0 success, 1 verification failure, 2 usage or input error,
//! 3 state limit reached.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use rwspt::ctmc::{self, TimeGrid, DEFAULT_EPSILON};
use rwspt::models::{build_nplsys, degradation_rules, PlConfig};
use rwspt::netio::parse_net;
use rwspt::rewriting::{firing_rule, Rule};
use rwspt::statespace::{
    build_ordinary, build_quotient, export_dot, verify_lumping, write_edges_csv, write_generator_csv,
    write_states_csv, ExploreOptions, LumpedCtmc, StatespaceError, TransitionSystem, DEFAULT_LIMIT,
};
use rwspt::symmetry::check_symmetric_labeling;
use rwspt::System;

#[derive(Parser, Debug)]
#[command(name = "rwspt", version, about = "Symmetry-reduced state spaces and lumped CTMCs for rewritable Petri nets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Ordinary reachability graph: ordinary_states.csv, ordinary_edges.csv, ordinary.dot
    Reach(ModelArgs),
    /// Quotient graph and lumped generator: quotient_states.csv, quotient_edges.csv, generator.csv
    Quotient(ModelArgs),
    /// Build both graphs and check strong lumpability; exit 1 on any violation
    VerifyLump(ModelArgs),
    /// Transient measure on the lumped chain: reliability.csv or throughput.csv
    Ctmc(CtmcArgs),
    /// DOT rendering of the ordinary or quotient graph
    ExportDot(DotArgs),
    /// Syntax-check a .rwspt file
    Parse {
        file: PathBuf,
    },
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// `nplsys` or a path to a .rwspt file
    #[arg(long, default_value = "nplsys")]
    model: String,
    /// Preset parameters, e.g. N=2,K=2,M=2,fault=0.002
    #[arg(long)]
    params: Option<String>,
    /// Preset config file with `key = value` lines; --params overrides it
    #[arg(long)]
    config: Option<PathBuf>,
    /// Abort after this many states
    #[arg(long, default_value_t = DEFAULT_LIMIT)]
    limit: usize,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overwrite existing output files
    #[arg(long)]
    force: bool,
    /// Exploration worker threads
    #[arg(long, env = "RWSPT_THREADS")]
    threads: Option<usize>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Measure {
    Reliability,
    Throughput,
}

#[derive(Args, Debug)]
struct CtmcArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_enum, default_value = "reliability")]
    measure: Measure,
    /// Edge labels counted by the throughput measure, comma separated
    #[arg(long, value_delimiter = ',', required_if_eq("measure", "throughput"))]
    label: Vec<String>,
    /// Time grid t0:t1:n or t0:t1:n:geom
    #[arg(long, default_value = "0:5000:200:geom")]
    times: TimeGrid,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
    /// Also write transient.csv with the full state distributions
    #[arg(long)]
    transient: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Graph {
    Ordinary,
    Quotient,
}

#[derive(Args, Debug)]
struct DotArgs {
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, value_enum, default_value = "quotient")]
    graph: Graph,
}

/// An error with the exit code it maps to.
struct Failure {
    code: u8,
    err: anyhow::Error,
}

impl Failure {
    fn usage(err: impl Into<anyhow::Error>) -> Failure {
        Failure { code: 2, err: err.into() }
    }

    fn runtime(err: impl Into<anyhow::Error>) -> Failure {
        Failure { code: 1, err: err.into() }
    }
}

impl From<StatespaceError> for Failure {
    fn from(e: StatespaceError) -> Failure {
        let code = match e {
            StatespaceError::LimitExceeded { .. } => 3,
            _ => 1,
        };
        Failure { code, err: e.into() }
    }
}

type Outcome = Result<(), Failure>;

struct Model {
    initial: System,
    rules: Vec<Rule>,
}

impl ModelArgs {
    fn load(&self) -> Result<Model, Failure> {
        if self.model == "nplsys" {
            let mut cfg = PlConfig::default();
            if let Some(path) = &self.config {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))
                    .map_err(Failure::usage)?;
                cfg.apply_config_text(&text).map_err(Failure::usage)?;
            }
            if let Some(p) = &self.params {
                cfg.apply_params(p).map_err(Failure::usage)?;
            }
            let initial = build_nplsys(&cfg).map_err(Failure::usage)?;
            return Ok(Model { initial, rules: degradation_rules(&cfg) });
        }
        if self.params.is_some() || self.config.is_some() {
            return Err(Failure::usage(anyhow!("--params and --config apply only to the nplsys preset")));
        }
        let doc = read_document(Path::new(&self.model))?;
        Ok(Model { initial: doc, rules: vec![firing_rule()] })
    }

    /// Loads a model whose states will be normalized.
    fn load_symmetric(&self) -> Result<Model, Failure> {
        let m = self.load()?;
        if !check_symmetric_labeling(&m.initial.net) {
            return Err(Failure::usage(anyhow!("{}: net is not symmetrically labeled", self.model)));
        }
        Ok(m)
    }

    fn options(&self) -> Result<ExploreOptions, Failure> {
        if self.threads == Some(0) {
            return Err(Failure::usage(anyhow!("--threads must be at least 1")));
        }
        Ok(ExploreOptions { limit: self.limit, threads: self.threads })
    }

    fn output(&self) -> Output<'_> {
        Output { dir: &self.out, force: self.force }
    }
}

fn read_document(path: &Path) -> Result<System, Failure> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::usage)?;
    let doc = parse_net(&text).map_err(|e| Failure::usage(anyhow!("{}: {e}", path.display())))?;
    System::new(std::sync::Arc::new(doc.net.clone()), doc.initial_marking.clone().unwrap_or_default())
        .map_err(|e| Failure::usage(anyhow!("{}: {e}", path.display())))
}

/// Output directory with the no-overwrite policy.
struct Output<'a> {
    dir: &'a Path,
    force: bool,
}

impl Output<'_> {
    /// Fails before any work is done if a target exists.
    fn claim(&self, names: &[&str]) -> Result<Vec<PathBuf>, Failure> {
        let paths: Vec<PathBuf> = names.iter().map(|n| self.dir.join(n)).collect();
        if !self.force {
            if let Some(p) = paths.iter().find(|p| p.exists()) {
                return Err(Failure::usage(anyhow!("{} exists; pass --force to overwrite", p.display())));
            }
        }
        fs::create_dir_all(self.dir)
            .with_context(|| format!("creating {}", self.dir.display()))
            .map_err(Failure::usage)?;
        Ok(paths)
    }
}

fn write_file(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> anyhow::Result<()>) -> Outcome {
    let mut buf = Vec::new();
    f(&mut buf).map_err(Failure::runtime)?;
    fs::write(path, buf).with_context(|| format!("writing {}", path.display())).map_err(Failure::runtime)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn write_graph(ts: &TransitionSystem, states: &Path, edges: &Path) -> Outcome {
    write_file(states, |b| Ok(write_states_csv(ts, b)?))?;
    write_file(edges, |b| Ok(write_edges_csv(ts, b)?))
}

fn reach(a: &ModelArgs) -> Outcome {
    let model = a.load()?;
    let paths = a.output().claim(&["ordinary_states.csv", "ordinary_edges.csv", "ordinary.dot"])?;
    let ts = build_ordinary(&model.initial, &model.rules, a.options()?)?;
    println!("{}", ts.summary());
    write_graph(&ts, &paths[0], &paths[1])?;
    write_file(&paths[2], |b| Ok(b.write_all(export_dot(&ts).as_bytes())?))
}

fn quotient(a: &ModelArgs) -> Outcome {
    let model = a.load_symmetric()?;
    let paths = a.output().claim(&["quotient_states.csv", "quotient_edges.csv", "generator.csv"])?;
    let (ts, c) = build_quotient(&model.initial, &model.rules, a.options()?)?;
    println!("{}", ts.summary());
    write_graph(&ts, &paths[0], &paths[1])?;
    write_file(&paths[2], |b| Ok(write_generator_csv(&c, b)?))
}

fn verify_lump(a: &ModelArgs) -> Outcome {
    let model = a.load_symmetric()?;
    let opts = a.options()?;
    let ordinary = build_ordinary(&model.initial, &model.rules, opts)?;
    let (q, c) = build_quotient(&model.initial, &model.rules, opts)?;
    println!("ordinary {}", ordinary.summary());
    println!("quotient {}", q.summary());
    let report = verify_lumping(&ordinary, &c)?;
    if report.is_verified() {
        println!("lumping verified: {} states in {} classes", report.states, report.classes);
        return Ok(());
    }
    for v in report.violations.iter().take(10) {
        eprintln!(
            "state {} (class {}) to class {}: ordinary rate {}, quotient rate {}",
            v.state, v.class, v.target_class, v.ordinary_rate, v.quotient_rate
        );
    }
    Err(Failure::runtime(anyhow!("lumping violated: {} violations", report.violations.len())))
}

fn ctmc_cmd(a: &CtmcArgs) -> Outcome {
    if !(a.epsilon > 0.0 && a.epsilon < 1.0) {
        return Err(Failure::usage(anyhow!("--epsilon must lie in (0, 1), got {}", a.epsilon)));
    }
    let model = a.model.load_symmetric()?;
    let name = match a.measure {
        Measure::Reliability => "reliability.csv",
        Measure::Throughput => "throughput.csv",
    };
    let mut names = vec![name];
    if a.transient {
        names.push("transient.csv");
    }
    let paths = a.model.output().claim(&names)?;
    let (ts, c) = build_quotient(&model.initial, &model.rules, a.model.options()?)?;
    println!("{}", ts.summary());
    let times = a.times.points();
    let values = measure(a, &c, &times)?;
    if let Some((t, v)) = values.last() {
        println!("{} at t={t}: {v}", name.trim_end_matches(".csv"));
    }
    write_file(&paths[0], |b| Ok(ctmc::write_measure_csv(&values, b)?))?;
    if a.transient {
        let r = ctmc::transient(&c, &times, a.epsilon).map_err(Failure::runtime)?;
        write_file(&paths[1], |b| Ok(ctmc::write_transient_csv(&r, b)?))?;
    }
    Ok(())
}

fn measure(a: &CtmcArgs, c: &LumpedCtmc, times: &[f64]) -> Result<Vec<(f64, f64)>, Failure> {
    let r = match a.measure {
        Measure::Reliability => ctmc::reliability(c, times, a.epsilon),
        Measure::Throughput => ctmc::throughput(c, |l| a.label.iter().any(|x| x == l), times, a.epsilon),
    };
    r.map_err(Failure::runtime)
}

fn export_dot_cmd(a: &DotArgs) -> Outcome {
    let m = &a.model;
    let (ts, paths) = match a.graph {
        Graph::Ordinary => {
            let model = m.load()?;
            let paths = m.output().claim(&["ordinary.dot"])?;
            (build_ordinary(&model.initial, &model.rules, m.options()?)?, paths)
        }
        Graph::Quotient => {
            let model = m.load_symmetric()?;
            let paths = m.output().claim(&["quotient.dot"])?;
            (build_quotient(&model.initial, &model.rules, m.options()?)?.0, paths)
        }
    };
    println!("{}", ts.summary());
    write_file(&paths[0], |b| Ok(b.write_all(export_dot(&ts).as_bytes())?))
}

fn parse_cmd(file: &Path) -> Outcome {
    let s = read_document(file)?;
    let symmetric = if check_symmetric_labeling(&s.net) { "symmetric" } else { "not symmetric" };
    println!(
        "{}: ok, {} transitions, {} places, {} initial tokens, {symmetric}",
        file.display(),
        s.net.len(),
        s.net.places().len(),
        s.marking.iter().map(|(_, k)| k).sum::<u64>()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Reach(a) => reach(a),
        Command::Quotient(a) => quotient(a),
        Command::VerifyLump(a) => verify_lump(a),
        Command::Ctmc(a) => ctmc_cmd(a),
        Command::ExportDot(a) => export_dot_cmd(a),
        Command::Parse { file } => parse_cmd(file),
    };
    let _ = io::stdout().flush();
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.err);
            ExitCode::from(f.code)
        }
    }
}
