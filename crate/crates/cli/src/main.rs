//! `grwp`: run GRWp ensembles, execute the verification suites, compare
//! event logs and export plot data.
//!
//! Exit codes: 0 success, 1 asserted test failure, 2 usage or validation
//! error, 3 abort-rate breach.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use grwp_core::ensemble::{run_ensemble, run_ensemble_unchecked, EnsembleResult};
use grwp_core::records::{
    cdf_csv, histogram_csv, read_event_log, read_snapshots, trajectory_csv, write_event_log, write_manifest,
    write_snapshots, EventLine, SnapshotLine,
};
use grwp_core::schrodinger::{analytic_free_gaussian, FreeGaussian, PropagatorPlan};
use grwp_core::stats::{ks_two_sample, EmpiricalDistribution, StatTestResult};
use grwp_core::verify::{
    center_equivalence_from, collapse_rate_from, conditional_pit_from, equivariance_from, flash_proximity_from,
    VerificationReport,
};
use grwp_core::{canonical_raw, validate_config, Error, Mode, RawConfig, SimConfig};

#[derive(Parser, Debug)]
#[command(name = "grwp", version, about = "Bohmian particles guided by a GRW-collapsing wave function")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run an ensemble and write manifest, event log and snapshots.
    Simulate {
        #[command(flatten)]
        run: RunArgs,
    },
    /// Run a verification suite and print one result per line.
    Verify {
        #[arg(value_enum)]
        suite: Suite,
        #[command(flatten)]
        run: RunArgs,
        /// Succeed only if some asserted test fails.
        #[arg(long)]
        expect_fail: bool,
    },
    /// Two-sample comparison of two event logs.
    Compare {
        a: PathBuf,
        b: PathBuf,
        #[arg(long, value_enum, default_value = "centers")]
        functional: Functional,
    },
    /// Free-particle propagator check on the configured grid and step.
    PropagatorTest {
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Export CSV from an event log or snapshot file.
    PlotData {
        input: PathBuf,
        #[arg(long, value_enum)]
        kind: PlotKind,
        #[arg(long, default_value_t = 64)]
        bins: usize,
        /// Coordinate index to export.
        #[arg(long, default_value_t = 0)]
        component: usize,
        /// Trajectory index for `trajectory` exports.
        #[arg(long, default_value_t = 0)]
        traj: usize,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct RunArgs {
    /// JSON configuration; the canonical configuration when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = parse_mode)]
    mode: Option<Mode>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    workers: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Suite {
    Equivariance,
    Centers,
    Proximity,
    Conditional,
    Rate,
    All,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Functional {
    Centers,
    Intervals,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum PlotKind {
    Histogram,
    Cdf,
    Trajectory,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse::<Mode>().map_err(|e| e.to_string())
}

/// Failure classes mapped to exit codes.
enum Failure {
    Tests,
    Usage(String),
    Abort(String),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        match e.downcast_ref::<Error>() {
            Some(Error::AbortRate { .. }) => Failure::Abort(format!("{e:#}")),
            _ => Failure::Usage(format!("{e:#}")),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::from(anyhow::Error::from(e))
    }
}

type CmdResult = Result<(), Failure>;

fn load_config(run: &RunArgs) -> anyhow::Result<SimConfig> {
    let mut raw: RawConfig = match &run.config {
        Some(p) => RawConfig::from_path(p).with_context(|| format!("config {}", p.display()))?,
        None => canonical_raw(),
    };
    if let Some(m) = run.mode {
        raw.run.mode = Some(m.as_str().to_string());
    }
    if let Some(s) = run.seed {
        raw.run.master_seed = Some(s);
    }
    if let Some(n) = run.n {
        raw.run.ensemble_n = Some(n);
    }
    if let Some(w) = run.workers {
        raw.run.workers = Some(w);
    }
    Ok(validate_config(&raw)?)
}

fn out_dir(run: &RunArgs) -> anyhow::Result<Option<&Path>> {
    if let Some(dir) = &run.out {
        fs::create_dir_all(dir).with_context(|| format!("output directory {}", dir.display()))?;
        return Ok(Some(dir));
    }
    Ok(None)
}

fn create(path: &Path) -> anyhow::Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("cannot write {}", path.display()))?,
    ))
}

fn write_outputs(dir: &Path, ens: &EnsembleResult) -> anyhow::Result<()> {
    let mut w = create(&dir.join("manifest.json"))?;
    write_manifest(ens, &mut w)?;
    writeln!(w)?;
    w.flush()?;
    let mut w = create(&dir.join("events.jsonl"))?;
    write_event_log(ens, &mut w)?;
    w.flush()?;
    let mut w = create(&dir.join("snapshots.jsonl"))?;
    write_snapshots(ens, &mut w)?;
    w.flush()?;
    Ok(())
}

fn cmd_simulate(run: &RunArgs) -> CmdResult {
    let config = load_config(run)?;
    let dir = out_dir(run)?.ok_or_else(|| Failure::Usage("simulate requires --out".into()))?;
    let ens = run_ensemble_unchecked(&config, config.run.workers)?;
    write_outputs(dir, &ens)?;
    log::info!(
        "{} trajectories, {} events, {} aborted",
        ens.manifest.trajectories,
        ens.manifest.events,
        ens.manifest.aborted
    );
    ens.check_abort_rate()?;
    Ok(())
}

fn require_rate_suite(config: &SimConfig) -> anyhow::Result<()> {
    if config.params.lambda <= 0.0 {
        bail!("rate suite requires lambda > 0");
    }
    if !config.mode.collapses() {
        bail!("rate suite requires a collapse mode");
    }
    Ok(())
}

fn require_collapse_mode(config: &SimConfig, suite: &str) -> anyhow::Result<()> {
    if !config.collapses_enabled() {
        bail!("{suite} suite requires a collapse mode with lambda > 0");
    }
    Ok(())
}

fn run_suite(suite: Suite, config: &SimConfig) -> anyhow::Result<VerificationReport> {
    match suite {
        Suite::Rate => require_rate_suite(config)?,
        Suite::Proximity | Suite::Conditional | Suite::Centers => {
            require_collapse_mode(config, &format!("{suite:?}").to_lowercase())?
        }
        Suite::Equivariance | Suite::All => {}
    }
    let needs_own = suite != Suite::Centers;
    let own = if needs_own { Some(run_ensemble(config)?) } else { None };
    let mut report = VerificationReport::default();
    if matches!(suite, Suite::Equivariance | Suite::All) && !config.run.snapshot_times.is_empty() {
        report.extend(equivariance_from(config, own.as_ref().expect("ensemble"))?);
    }
    if !config.collapses_enabled() {
        if suite == Suite::Equivariance && config.run.snapshot_times.is_empty() {
            bail!("equivariance suite requires snapshot times");
        }
        return Ok(report);
    }
    if matches!(suite, Suite::Centers | Suite::All) {
        let ens_for = |mode: Mode| -> anyhow::Result<Option<EnsembleResult>> {
            if config.mode == mode && own.is_some() {
                return Ok(None);
            }
            Ok(Some(run_ensemble(&config.with_mode(mode))?))
        };
        let grw = ens_for(Mode::Grw)?;
        let grwp = ens_for(Mode::Grwp)?;
        let pinned = ens_for(Mode::Pinned)?;
        let grw_ref = grw.as_ref().or(own.as_ref()).expect("grw ensemble");
        let grwp_ref = grwp.as_ref().or(own.as_ref()).expect("grwp ensemble");
        let pinned_ref = pinned.as_ref().or(own.as_ref()).expect("pinned ensemble");
        report.extend(center_equivalence_from(grw_ref, grwp_ref, Some(pinned_ref), config.grid.dim())?);
    }
    if let Some(ens) = &own {
        if matches!(suite, Suite::Proximity | Suite::All) {
            report.extend(flash_proximity_from(config, ens)?);
        }
        if matches!(suite, Suite::Conditional | Suite::All) {
            report.extend(conditional_pit_from(config, ens)?);
        }
        if matches!(suite, Suite::Rate | Suite::All) {
            report.extend(collapse_rate_from(config, ens)?);
        }
    }
    Ok(report)
}

fn cmd_verify(suite: Suite, run: &RunArgs, expect_fail: bool) -> CmdResult {
    let config = load_config(run)?;
    let dir = out_dir(run)?;
    let report = run_suite(suite, &config)?;
    print!("{report}");
    if let Some(dir) = dir {
        fs::write(dir.join("report.txt"), report.to_string()).map_err(anyhow::Error::from)?;
    }
    let failed = report.failures().count();
    match (expect_fail, failed > 0) {
        (false, false) | (true, true) => Ok(()),
        (false, true) => {
            eprintln!("error: {failed} asserted test(s) failed");
            Err(Failure::Tests)
        }
        (true, false) => {
            eprintln!("error: expected an asserted failure but every test passed");
            Err(Failure::Tests)
        }
    }
}

fn read_log(path: &Path) -> anyhow::Result<Vec<EventLine>> {
    let f = File::open(path).with_context(|| format!("cannot read {}", path.display()))?;
    read_event_log(BufReader::new(f)).with_context(|| format!("{}", path.display()))
}

fn log_dim(events: &[EventLine], path: &Path) -> anyhow::Result<usize> {
    let d = events.first().map(|e| e.x.len()).ok_or_else(|| anyhow!("{} is empty", path.display()))?;
    if events.iter().any(|e| e.x.len() != d) {
        bail!("{} mixes center dimensions", path.display());
    }
    Ok(d)
}

/// Component `c` of the `k`-th (1-based) center of each trajectory.
fn log_centers(events: &[EventLine], k: usize, c: usize) -> Vec<f64> {
    events.iter().filter(|e| e.k == k).map(|e| e.x[c]).collect()
}

/// Waiting times between successive events of each trajectory, the first
/// measured from t = 0.
fn log_intervals(events: &[EventLine]) -> Vec<f64> {
    let mut sorted: Vec<&EventLine> = events.iter().collect();
    sorted.sort_by(|a, b| a.traj.cmp(&b.traj).then(a.k.cmp(&b.k)));
    let mut out = Vec::with_capacity(sorted.len());
    let mut prev: Option<(usize, f64)> = None;
    for e in sorted {
        let last = match prev {
            Some((traj, t)) if traj == e.traj => t,
            _ => 0.0,
        };
        out.push(e.t - last);
        prev = Some((e.traj, e.t));
    }
    out
}

fn cmd_compare(a: &Path, b: &Path, functional: Functional) -> CmdResult {
    let ea = read_log(a)?;
    let eb = read_log(b)?;
    let (da, db) = (log_dim(&ea, a)?, log_dim(&eb, b)?);
    if da != db {
        return Err(Failure::Usage(format!("center dimensions differ: {da} vs {db}")));
    }
    let mut report = VerificationReport::default();
    let ks = |x: &[f64], y: &[f64], name: String| -> anyhow::Result<StatTestResult> {
        Ok(ks_two_sample(x, y)?.named(name))
    };
    match functional {
        Functional::Centers => {
            for (k, which) in [(1, "first"), (2, "second")] {
                for c in 0..da {
                    let (x, y) = (log_centers(&ea, k, c), log_centers(&eb, k, c));
                    if k == 2 && (x.len() < 10 || y.len() < 10) {
                        continue;
                    }
                    report.push(ks(&x, &y, format!("compare.centers.{which}.x{c}"))?);
                }
            }
        }
        Functional::Intervals => {
            report.push(ks(&log_intervals(&ea), &log_intervals(&eb), "compare.intervals".into())?);
        }
    }
    print!("{report}");
    if report.passed() {
        Ok(())
    } else {
        eprintln!("error: distributions differ");
        Err(Failure::Tests)
    }
}

fn cmd_propagator_test(config: Option<&PathBuf>) -> CmdResult {
    let run = RunArgs { config: config.cloned(), out: None, mode: None, seed: None, n: None, workers: None };
    let config = load_config(&run)?;
    if config.grid.ndim() != 1 {
        return Err(Failure::Usage("propagator-test needs a one-dimensional grid".into()));
    }
    let mut params = config.params.clone();
    params.potential = grwp_core::Potential::Zero;
    let ax = config.grid.axis(0);
    let packet = FreeGaussian { mean: ax.center(), s0: 1.0, k: 2.0, mass: params.masses[0], hbar: params.hbar };
    let dt = config.run.dt;
    let plan = PropagatorPlan::new(config.grid.clone(), &params, dt)?;
    let steps = (1.0 / dt).round() as usize;
    let mut psi = analytic_free_gaussian(&config.grid, &[packet], 0.0)?;
    let mut drift: f64 = 0.0;
    for _ in 0..steps {
        psi = plan.step(&psi, None)?;
        drift = drift.max((psi.norm_sq() - 1.0).abs());
    }
    let t = steps as f64 * dt;
    let err = psi.distance(&analytic_free_gaussian(&config.grid, &[packet], t)?);
    let mut report = VerificationReport::default();
    report.push(StatTestResult::new("propagator.free_l2", steps, err, 1e-6, grwp_core::Direction::Below));
    report.push(StatTestResult::new("propagator.norm_drift", steps, drift, 1e-10, grwp_core::Direction::Below));
    print!("{report}");
    if report.passed() {
        Ok(())
    } else {
        eprintln!("error: propagator check failed");
        Err(Failure::Tests)
    }
}

enum PlotInput {
    Events(Vec<EventLine>),
    Snapshots(Vec<SnapshotLine>),
}

fn read_plot_input(path: &Path) -> anyhow::Result<PlotInput> {
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let first = text.lines().find(|l| !l.trim().is_empty()).ok_or_else(|| anyhow!("{} is empty", path.display()))?;
    let probe: serde_json::Value = serde_json::from_str(first).map_err(|e| anyhow!("line 1: {e}"))?;
    if probe.get("X").is_some() {
        Ok(PlotInput::Events(read_event_log(text.as_bytes())?))
    } else if probe.get("Q").is_some() {
        Ok(PlotInput::Snapshots(read_snapshots(text.as_bytes())?))
    } else {
        bail!("{} is neither an event log nor a snapshot file", path.display())
    }
}

fn component(values: &[Vec<f64>], c: usize) -> anyhow::Result<Vec<f64>> {
    values
        .iter()
        .map(|v| v.get(c).copied().ok_or_else(|| anyhow!("component {c} out of range")))
        .collect()
}

fn cmd_plot_data(
    input: &Path,
    kind: PlotKind,
    bins: usize,
    c: usize,
    traj: usize,
    out: Option<&PathBuf>,
) -> CmdResult {
    let data = read_plot_input(input)?;
    let csv = match (&data, kind) {
        (PlotInput::Snapshots(s), PlotKind::Trajectory) => {
            if !s.iter().any(|l| l.traj == traj) {
                return Err(Failure::Usage(format!("no snapshots for trajectory {traj}")));
            }
            trajectory_csv(s, traj)
        }
        (PlotInput::Events(_), PlotKind::Trajectory) => {
            return Err(Failure::Usage("trajectory export needs a snapshot file".into()))
        }
        (data, kind) => {
            let values: Vec<Vec<f64>> = match data {
                PlotInput::Events(e) => e.iter().map(|l| l.x.clone()).collect(),
                PlotInput::Snapshots(s) => s.iter().map(|l| l.q.clone()).collect(),
            };
            let xs = component(&values, c)?;
            match kind {
                PlotKind::Histogram => histogram_csv(&EmpiricalDistribution::histogram(&xs, bins)?),
                _ => cdf_csv(&EmpiricalDistribution::from_samples(&xs)),
            }
        }
    };
    match out {
        Some(p) => fs::write(p, csv).with_context(|| format!("cannot write {}", p.display()))?,
        None => print!("{csv}"),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GRWP_LOG_LEVEL", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Simulate { run } => cmd_simulate(run),
        Command::Verify { suite, run, expect_fail } => cmd_verify(*suite, run, *expect_fail),
        Command::Compare { a, b, functional } => cmd_compare(a, b, *functional),
        Command::PropagatorTest { config } => cmd_propagator_test(config.as_ref()),
        Command::PlotData { input, kind, bins, component, traj, out } => {
            cmd_plot_data(input, *kind, *bins, *component, *traj, out.as_ref())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Tests) => ExitCode::from(1),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {}", msg.replace('\n', " "));
            ExitCode::from(2)
        }
        Err(Failure::Abort(msg)) => {
            eprintln!("error: {}", msg.replace('\n', " "));
            ExitCode::from(3)
        }
    }
}
