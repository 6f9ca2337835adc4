use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use mesorate::builders::build;
use mesorate::config::{parse_config, GridSpec, OutputFormat, RunConfig};
use mesorate::exec::Execution;
use mesorate::experiments::{
    analytic_reference, fig3_default_energies, fig3_default_grid, fig3_default_rates,
    run_fermi_sweep_with, run_sweep_with, ExperimentError, SweepSpec, SweepTable,
};
use mesorate::model::{validate_state, StateLabel, StateVector, DEFAULT_STATE_TOL};
use mesorate::observables::currents;
use mesorate::output::{format_float, render_csv, render_svg, render_trajectory_csv};
use mesorate::solver::{default_dt, evolve, relaxation_check, steady_state};
use mesorate::validation;

/// Environment variable overriding the invariant tolerance.
const TOL_ENV: &str = "MESORATE_TOL";

const FIG3_POINTS: usize = 19;

#[derive(Parser)]
#[command(
    name = "mesorate",
    version,
    about = "Rate-equation transport through quantum dots under continuous detection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print stationary occupations and currents.
    Steady(Common),
    /// Integrate from the empty state and write a time-series CSV.
    Evolve(Common),
    /// Sweep one parameter and write a table of stationary currents.
    Sweep(Common),
    /// Sweep the detector emitter Fermi level across the blocking thresholds.
    Fig3(Common),
    /// Run the analytic-vs-numeric acceptance checks.
    Validate,
}

#[derive(Args)]
struct Common {
    /// Configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Table format for sweep and fig3.
    #[arg(long)]
    format: Option<OutputFormat>,
    /// Sweep parameter name.
    #[arg(long)]
    param: Option<String>,
    /// Sweep grid as start:stop:count, with `log` after the count for
    /// geometric spacing.
    #[arg(long)]
    grid: Option<GridSpec>,
    /// Invariant tolerance for reported states.
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Config(String),
    Numerical(String),
    Validation(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Config(_) => 2,
            Failure::Numerical(_) => 3,
            Failure::Validation(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m)
            | Failure::Config(m)
            | Failure::Numerical(m)
            | Failure::Validation(m) => m,
        }
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    let result = match cli.command {
        Command::Steady(c) => steady(&c),
        Command::Evolve(c) => evolve_cmd(&c),
        Command::Sweep(c) => sweep(&c),
        Command::Fig3(c) => fig3(&c),
        Command::Validate => validate(),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("mesorate: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}

fn load_config(path: &Path) -> Result<RunConfig, Failure> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_config(&text).map_err(|e| Failure::Config(format!("{}: {e}", path.display())))
}

fn require_config(c: &Common) -> Result<RunConfig, Failure> {
    let path = c
        .config
        .as_deref()
        .ok_or_else(|| Failure::Usage("--config is required for this command".into()))?;
    load_config(path)
}

/// Flag, then environment, then config file, then the built-in default.
fn tolerance(c: &Common, cfg: Option<&RunConfig>) -> Result<f64, Failure> {
    let check = |v: f64, what: &str| {
        if v.is_finite() && v > 0.0 {
            Ok(v)
        } else {
            Err(Failure::Config(format!(
                "{what} must be a positive number, got {v}"
            )))
        }
    };
    if let Some(v) = c.tol {
        return check(v, "--tol").map_err(|f| Failure::Usage(f.message().to_string()));
    }
    if let Ok(raw) = std::env::var(TOL_ENV) {
        let v: f64 = raw
            .trim()
            .parse()
            .map_err(|_| Failure::Config(format!("{TOL_ENV}=`{raw}` is not a number")))?;
        return check(v, TOL_ENV);
    }
    Ok(cfg.and_then(|c| c.run.tol).unwrap_or(DEFAULT_STATE_TOL))
}

fn out_path(c: &Common, cfg: Option<&RunConfig>) -> Option<PathBuf> {
    c.out
        .clone()
        .or_else(|| cfg.and_then(|c| c.run.out.as_ref().map(PathBuf::from)))
}

fn emit(path: Option<&Path>, text: &str) -> Outcome {
    match path {
        Some(p) => fs::write(p, text)
            .map_err(|e| Failure::Numerical(format!("cannot write {}: {e}", p.display()))),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Failure::Numerical(format!("cannot write to stdout: {e}"))),
    }
}

fn csv_only(c: &Common, cfg: &RunConfig) -> Outcome {
    match c.format.or(cfg.run.format) {
        Some(OutputFormat::Svg) => Err(Failure::Usage(
            "svg output is only available for sweep and fig3".into(),
        )),
        _ => Ok(()),
    }
}

fn no_sweep_flags(c: &Common, command: &str) -> Outcome {
    if c.param.is_some() || c.grid.is_some() {
        return Err(Failure::Usage(format!(
            "{command} does not take --param or --grid"
        )));
    }
    Ok(())
}

fn build_for(cfg: &RunConfig) -> Result<mesorate::model::Generator, Failure> {
    build(cfg.scenario, &cfg.rates).map_err(|e| Failure::Config(e.to_string()))
}

fn check_state(x: &StateVector, tol: f64, what: &str) -> Outcome {
    let violations = validate_state(x, tol);
    if violations.is_empty() {
        return Ok(());
    }
    let list: Vec<String> = violations.iter().map(|v| format!("{v:?}")).collect();
    Err(Failure::Numerical(format!(
        "{what} violates the state invariants at tolerance {tol:e}: {}",
        list.join(", ")
    )))
}

fn steady(c: &Common) -> Outcome {
    no_sweep_flags(c, "steady")?;
    let cfg = require_config(c)?;
    csv_only(c, &cfg)?;
    let tol = tolerance(c, Some(&cfg))?;
    let g = build_for(&cfg)?;
    let x = steady_state(&g).map_err(|e| Failure::Numerical(e.to_string()))?;
    check_state(&x, tol, "steady state")?;
    let cur =
        currents(cfg.scenario, &cfg.rates, &x).map_err(|e| Failure::Numerical(e.to_string()))?;

    let mut s = String::new();
    let _ = writeln!(s, "scenario = {}", cfg.scenario);
    for (k, label) in x.layout.diagonal_labels() {
        let _ = writeln!(
            s,
            "sigma_{} = {}",
            label.as_str(),
            format_float(x.values[k])
        );
    }
    for (i, j) in x.layout.coherence_pairs() {
        let z = x.coherence(i, j).expect("pair from layout");
        let name = format!("sigma_{}{}", i.as_str(), j.as_str());
        let _ = writeln!(s, "{name}_re = {}", format_float(z.re));
        let _ = writeln!(s, "{name}_im = {}", format_float(z.im));
    }
    let _ = writeln!(s, "I_S = {}", format_float(cur.system));
    if let Some(v) = analytic_reference(cfg.scenario, &cfg.rates) {
        let _ = writeln!(s, "I_S_analytic = {}", format_float(v));
    }
    if let Some(v) = cur.detector {
        let _ = writeln!(s, "I_D = {}", format_float(v));
    }
    if let Some(v) = cur.delta_detector {
        let _ = writeln!(s, "Delta_I_D = {}", format_float(v));
    }
    emit(out_path(c, Some(&cfg)).as_deref(), &s)
}

fn evolve_cmd(c: &Common) -> Outcome {
    no_sweep_flags(c, "evolve")?;
    let cfg = require_config(c)?;
    csv_only(c, &cfg)?;
    let tol = tolerance(c, Some(&cfg))?;
    let g = build_for(&cfg)?;
    let dt = cfg.run.dt.unwrap_or_else(|| default_dt(&g));
    let t_final = match cfg.run.t_final {
        Some(t) => t,
        // Long enough to come within `tol` of the stationary state.
        None => relaxation_check(&g, tol).map_err(|e| Failure::Numerical(e.to_string()))?,
    };
    let x0 = StateVector::point_mass(&g.layout, StateLabel::A).expect("layout has |a>");
    let traj = evolve(&g, &x0, t_final, dt).map_err(|e| Failure::Numerical(e.to_string()))?;
    for (t, x) in traj.times.iter().zip(&traj.states) {
        check_state(x, tol, &format!("state at t = {t:e}"))?;
    }
    let csv = render_trajectory_csv(&traj, cfg.scenario, &cfg.rates)
        .map_err(|e| Failure::Numerical(e.to_string()))?;
    emit(out_path(c, Some(&cfg)).as_deref(), &csv)
}

fn experiment_failure(e: ExperimentError) -> Failure {
    match e {
        ExperimentError::EmptyGrid
        | ExperimentError::NonFiniteGrid(_)
        | ExperimentError::UnknownParameter(_) => Failure::Usage(e.to_string()),
        ExperimentError::FermiOutOfRange { .. } | ExperimentError::DetectorOffResonance { .. } => {
            Failure::Config(e.to_string())
        }
    }
}

/// Writes the table, then reports failed rows and invariant warnings.
fn write_table(c: &Common, cfg: Option<&RunConfig>, table: &SweepTable, tol: f64) -> Outcome {
    let format = c
        .format
        .or(cfg.and_then(|c| c.run.format))
        .unwrap_or_default();
    let text = match format {
        OutputFormat::Csv => render_csv(table),
        OutputFormat::Svg => render_svg(table),
    }
    .map_err(|e| Failure::Numerical(e.to_string()))?;
    emit(out_path(c, cfg).as_deref(), &text)?;

    let mut failed = 0;
    for row in &table.rows {
        match &row.outcome {
            Ok(v) if v.max_violation > tol => eprintln!(
                "mesorate: warning: {} = {} has invariant violation {:e} above {tol:e}",
                table.parameter, row.param, v.max_violation
            ),
            Ok(_) => {}
            Err(e) => {
                failed += 1;
                eprintln!("mesorate: {} = {}: {e}", table.parameter, row.param);
            }
        }
    }
    if failed > 0 {
        return Err(Failure::Numerical(format!(
            "{failed} of {} grid points failed",
            table.rows.len()
        )));
    }
    Ok(())
}

fn sweep(c: &Common) -> Outcome {
    let cfg = require_config(c)?;
    let tol = tolerance(c, Some(&cfg))?;
    let parameter = c
        .param
        .clone()
        .or_else(|| cfg.run.param.clone())
        .ok_or_else(|| Failure::Usage("sweep needs --param or `param` in [run]".into()))?;
    let grid = c
        .grid
        .or(cfg.run.grid)
        .ok_or_else(|| Failure::Usage("sweep needs --grid or `grid` in [run]".into()))?;
    let spec = SweepSpec {
        scenario: cfg.scenario,
        base: cfg.rates,
        parameter,
        grid: grid.values(),
    };
    let table = run_sweep_with(&spec, Execution::default()).map_err(experiment_failure)?;
    write_table(c, Some(&cfg), &table, tol)
}

fn fig3(c: &Common) -> Outcome {
    if c.param.is_some() {
        return Err(Failure::Usage(
            "fig3 always sweeps the detector Fermi level".into(),
        ));
    }
    let cfg = c.config.as_deref().map(load_config).transpose()?;
    let tol = tolerance(c, cfg.as_ref())?;
    let (rates, energies, extrapolate) = match &cfg {
        Some(cfg) => {
            let e = cfg.energies.ok_or_else(|| {
                Failure::Config("fig3 needs an [energies] section in the config".into())
            })?;
            (cfg.rates, e, cfg.run.extrapolate)
        }
        None => (fig3_default_rates(), fig3_default_energies(), false),
    };
    let grid = match c.grid.or(cfg.as_ref().and_then(|c| c.run.grid)) {
        Some(g) => g.values(),
        None => fig3_default_grid(&energies, &rates, FIG3_POINTS),
    };
    let table = run_fermi_sweep_with(&rates, &energies, &grid, extrapolate, Execution::default())
        .map_err(experiment_failure)?;
    write_table(c, cfg.as_ref(), &table, tol)
}

fn validate() -> Outcome {
    let start = Instant::now();
    let outcomes = validation::run_all(Execution::default());
    for o in &outcomes {
        println!("{o}");
    }
    let failed: Vec<String> = outcomes
        .iter()
        .filter(|o| !o.passed)
        .map(|o| o.id.to_string())
        .collect();
    println!(
        "{} of {} criteria passed in {:.2} s",
        outcomes.len() - failed.len(),
        outcomes.len(),
        start.elapsed().as_secs_f64()
    );
    if failed.is_empty() {
        Ok(())
    } else {
        Err(Failure::Validation(format!(
            "failed criteria: {}",
            failed.join(", ")
        )))
    }
}
