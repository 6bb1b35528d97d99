use std::f64::consts::TAU;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use chaos_squeeze::cli_io::{
    emit_plot_script, load_config, write_intervals, write_intervals_csv, write_section_csv, write_sweep,
    write_sweep_csv, write_trajectory, write_trajectory_csv, Command, ConfigValues, PlotKind, RunConfig,
};
use chaos_squeeze::diagnostics::{
    chirikov, classify, lyapunov_max, poincare_section, squeezing_intervals, ChirikovConfig, ClassifyConfig,
    LyapunovConfig,
};
use chaos_squeeze::integrator::{integrate, IntegrationConfig, Trajectory, Warning};
use chaos_squeeze::sweep::{run_sweep, SweepAxis, REFINE_TOL};
use chaos_squeeze::{Error, Result};

#[derive(Parser, Debug)]
#[command(name = "chaos-squeeze", version, about = "Squeezing and chaos in a driven cooperative atom-field system")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// Drive strength G
    #[arg(long, global = true)]
    g: Option<f64>,
    /// Drive frequency Omega (units of the cooperative frequency)
    #[arg(long, global = true)]
    omega: Option<f64>,
    /// Initial momentum
    #[arg(long, global = true)]
    p0: Option<f64>,
    /// Number of two-level atoms
    #[arg(long, global = true)]
    n: Option<u64>,
    #[arg(long, global = true)]
    dt: Option<f64>,
    /// Final time (horizon for classify and lyapunov)
    #[arg(long = "tau-end", global = true)]
    tau_end: Option<f64>,
    /// Squeezing window end tau_1 for sweeps
    #[arg(long, global = true)]
    window: Option<f64>,
    /// Sweep axis: g or omega
    #[arg(long, global = true)]
    axis: Option<SweepAxis>,
    #[arg(long, global = true)]
    from: Option<f64>,
    #[arg(long, global = true)]
    to: Option<f64>,
    #[arg(long, global = true)]
    points: Option<usize>,
    /// Output file; CSV goes to stdout when omitted
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Fail on drift, accuracy or validity-radius violations
    #[arg(long, global = true)]
    strict: bool,
    /// Also write a gnuplot script next to the output
    #[arg(long = "emit-plot", global = true)]
    emit_plot: bool,
    /// Worker threads for sweeps (0 = all cores)
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Flat TOML file with the same keys as the flags
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Cmd {
    /// Integrate one trajectory and write it as CSV
    Simulate,
    /// Scan G or Omega and tabulate squeezing, growth and class
    Sweep,
    /// Classify the motion as regular, chaotic or adiabatic chaos
    Classify,
    /// Write the time intervals with S < 3
    Intervals,
    /// Estimate the maximal Lyapunov exponent
    Lyapunov,
    /// Print the resonance-overlap estimates
    Chirikov,
}

impl Cli {
    fn command(&self) -> Command {
        match self.command {
            Cmd::Simulate => Command::Simulate,
            Cmd::Sweep => Command::Sweep,
            Cmd::Classify => Command::Classify,
            Cmd::Intervals => Command::Intervals,
            Cmd::Lyapunov => Command::Lyapunov,
            Cmd::Chirikov => Command::Chirikov,
        }
    }

    fn values(&self) -> ConfigValues {
        ConfigValues {
            g: self.g,
            omega: self.omega,
            p0: self.p0,
            n: self.n,
            dt: self.dt,
            tau_end: self.tau_end,
            window: self.window,
            axis: self.axis,
            from: self.from,
            to: self.to,
            points: self.points,
            out: self.out.clone(),
            strict: self.strict.then_some(true),
            emit_plot: self.emit_plot.then_some(true),
            workers: self.workers,
            ..ConfigValues::default()
        }
    }
}

fn report_warnings(traj: &Trajectory) {
    for w in &traj.warnings {
        match w {
            Warning::InvariantDrift { tau, drift } => {
                eprintln!("warning: invariant drift {drift:.3e} exceeds tolerance at tau={tau}")
            }
            Warning::StepHalving { estimate } => eprintln!("warning: step-halving error estimate {estimate:.3e}"),
            Warning::ValidityRadius { tau, radius } => {
                eprintln!("warning: convergence radius {radius:.3e} exceeds 0.01 at tau={tau}")
            }
        }
    }
}

fn plot_path(data: &Path) -> PathBuf {
    data.with_extension("gp")
}

fn emit(kind: PlotKind, data: &Path) -> Result<()> {
    let script = plot_path(data);
    emit_plot_script(kind, data, &script)?;
    eprintln!("wrote {}", script.display());
    Ok(())
}

/// Writes `(x, p)` once per drive period from a run whose step divides the period.
fn emit_section(cfg: &RunConfig, out: &Path) -> Result<()> {
    let period = TAU / cfg.model.omega;
    let snapped = cfg.integration.snapped_to_period(period);
    let per_period = (period / snapped.dt).round() as usize;
    let config = IntegrationConfig {
        strict: false,
        ..snapped.with_sample_every(per_period)
    };
    let traj = integrate(&cfg.model, &config)?;
    let points = poincare_section(&traj)?;
    let data = out.with_extension("section.csv");
    write_section_csv(&points, &data)?;
    emit(PlotKind::Poincare, &data)
}

fn write_text(cfg: &RunConfig, text: &str) -> Result<()> {
    match &cfg.output_path {
        Some(path) => std::fs::write(path, text).map_err(|e| Error::Io { path: path.clone(), source: e }),
        None => {
            print!("{text}");
            io::stdout().flush().map_err(|e| Error::Io { path: "<stdout>".into(), source: e })
        }
    }
}

fn simulate(cfg: &RunConfig) -> Result<()> {
    let traj = integrate(&cfg.model, &cfg.integration)?;
    report_warnings(&traj);
    match &cfg.output_path {
        Some(path) => {
            let rows = write_trajectory_csv(&traj, path)?;
            eprintln!("wrote {rows} samples to {}", path.display());
            if cfg.emit_plot {
                emit(PlotKind::Trajectory, path)?;
                if cfg.model.drive.is_phase_periodic() {
                    emit_section(cfg, path)?;
                }
            }
        }
        None => {
            write_trajectory(&traj, io::stdout().lock())?;
        }
    }
    Ok(())
}

fn sweep(cfg: &RunConfig) -> Result<u8> {
    let spec = cfg.sweep.as_ref().expect("sweep config is resolved for the sweep command");
    let rows = run_sweep(spec, cfg.workers)?;
    for row in &rows {
        if let Err(failure) = &row.outcome {
            eprintln!("point g={} omega={} failed: {}", row.g, row.omega, failure.message);
        }
    }
    match &cfg.output_path {
        Some(path) => {
            let n = write_sweep_csv(&rows, path)?;
            eprintln!("wrote {n} rows to {}", path.display());
            if cfg.emit_plot {
                emit(PlotKind::Sweep(spec.axis), path)?;
            }
        }
        None => {
            write_sweep(&rows, io::stdout().lock())?;
        }
    }
    // In strict mode a failed point fails the run, after the table is written.
    let worst = rows.iter().filter_map(|r| r.outcome.as_ref().err()).map(|f| f.exit_code).max();
    Ok(if cfg.strict { worst.unwrap_or(0) } else { 0 })
}

fn intervals(cfg: &RunConfig) -> Result<()> {
    let traj = integrate(&cfg.model, &cfg.integration)?;
    report_warnings(&traj);
    let found = squeezing_intervals(&traj, REFINE_TOL)?;
    match &cfg.output_path {
        Some(path) => {
            let n = write_intervals_csv(&found, path)?;
            eprintln!("wrote {n} intervals to {}", path.display());
            if cfg.emit_plot {
                emit(PlotKind::Intervals, path)?;
            }
        }
        None => {
            write_intervals(&found, io::stdout().lock())?;
        }
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<u8> {
    let cfg = load_config(cli.command(), cli.config.as_deref(), cli.values())?;
    match cfg.command {
        Command::Sweep => return sweep(&cfg),
        Command::Simulate => simulate(&cfg),
        Command::Intervals => intervals(&cfg),
        Command::Classify => {
            let config = ClassifyConfig {
                horizon: cfg.integration.tau_end,
                dt: cfg.integration.dt,
                ..ClassifyConfig::default()
            };
            let result = classify(&cfg.model, &config)?;
            write_text(&cfg, &format!("class={} lambda={:.6e}\n", result.class.code(), result.lambda))
        }
        Command::Lyapunov => {
            let config = LyapunovConfig {
                tau_total: cfg.integration.tau_end,
                dt: cfg.integration.dt,
                ..LyapunovConfig::default()
            };
            let est = lyapunov_max(&cfg.model, &config)?;
            write_text(&cfg, &format!("lambda={:.6e} tau_total={} renormalizations={}\n", est.lambda, est.tau_total, est.renorm_count))
        }
        Command::Chirikov => {
            let r = chirikov(&cfg.model, &ChirikovConfig::default());
            write_text(
                &cfg,
                &format!(
                    "kappa={:.6e} K={:.6e} p_max={:.6e} predicted={}\n",
                    r.kappa,
                    r.k_param,
                    r.p_max,
                    r.predicted.label()
                ),
            )
        }
    }?;
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
