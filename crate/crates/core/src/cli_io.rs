//! Run configuration, CSV output and gnuplot script emission.
//!
//! Configuration files are flat TOML tables whose keys mirror the command
//! line flags (`tau_end` for `--tau-end` and so on). Values given on the
//! command line take precedence over the file, which takes precedence over
//! the built-in defaults.

use std::fs::File;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use crate::diagnostics::Interval;
use crate::error::{Error, Result};
use crate::integrator::{IntegrationConfig, Trajectory};
use crate::model::{DriveWaveform, ModelParams};
use crate::sweep::{SweepAxis, SweepRow, SweepSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Sweep,
    Classify,
    Intervals,
    Lyapunov,
    Chirikov,
}

impl Command {
    /// Default `tau_end` when neither the flag nor the file sets it.
    fn default_horizon(&self) -> f64 {
        match self {
            Command::Classify | Command::Lyapunov => 200.0,
            _ => 50.0,
        }
    }
}

/// Values that may come from either the config file or the command line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigValues {
    pub g: Option<f64>,
    pub omega: Option<f64>,
    pub p0: Option<f64>,
    pub n: Option<u64>,
    pub dt: Option<f64>,
    pub tau_end: Option<f64>,
    pub sample_every: Option<usize>,
    pub window: Option<f64>,
    pub axis: Option<SweepAxis>,
    pub from: Option<f64>,
    pub to: Option<f64>,
    pub points: Option<usize>,
    pub out: Option<PathBuf>,
    pub strict: Option<bool>,
    pub emit_plot: Option<bool>,
    pub workers: Option<usize>,
    pub drive: Option<String>,
    pub pulse_period: Option<f64>,
    pub pulse_width: Option<f64>,
    pub pulse_amplitude: Option<f64>,
}

impl ConfigValues {
    /// Fills every unset field of `self` from `fallback`.
    pub fn or(self, fallback: ConfigValues) -> ConfigValues {
        ConfigValues {
            g: self.g.or(fallback.g),
            omega: self.omega.or(fallback.omega),
            p0: self.p0.or(fallback.p0),
            n: self.n.or(fallback.n),
            dt: self.dt.or(fallback.dt),
            tau_end: self.tau_end.or(fallback.tau_end),
            sample_every: self.sample_every.or(fallback.sample_every),
            window: self.window.or(fallback.window),
            axis: self.axis.or(fallback.axis),
            from: self.from.or(fallback.from),
            to: self.to.or(fallback.to),
            points: self.points.or(fallback.points),
            out: self.out.or(fallback.out),
            strict: self.strict.or(fallback.strict),
            emit_plot: self.emit_plot.or(fallback.emit_plot),
            workers: self.workers.or(fallback.workers),
            drive: self.drive.or(fallback.drive),
            pulse_period: self.pulse_period.or(fallback.pulse_period),
            pulse_width: self.pulse_width.or(fallback.pulse_width),
            pulse_amplitude: self.pulse_amplitude.or(fallback.pulse_amplitude),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    pub model: ModelParams,
    pub integration: IntegrationConfig,
    pub sweep: Option<SweepSpec>,
    pub output_path: Option<PathBuf>,
    pub strict: bool,
    pub emit_plot: bool,
    pub workers: usize,
}

fn number(key: &str, value: &toml::Value) -> Result<f64> {
    match value {
        toml::Value::Float(v) => Ok(*v),
        toml::Value::Integer(v) => Ok(*v as f64),
        _ => Err(Error::config(key, "expected a number")),
    }
}

fn count(key: &str, value: &toml::Value) -> Result<u64> {
    match value {
        toml::Value::Integer(v) if *v >= 0 => Ok(*v as u64),
        toml::Value::Float(v) if *v >= 0.0 && v.fract() == 0.0 && *v <= u64::MAX as f64 => Ok(*v as u64),
        _ => Err(Error::config(key, "expected a non-negative integer")),
    }
}

fn flag(key: &str, value: &toml::Value) -> Result<bool> {
    value.as_bool().ok_or_else(|| Error::config(key, "expected true or false"))
}

fn text<'a>(key: &str, value: &'a toml::Value) -> Result<&'a str> {
    value.as_str().ok_or_else(|| Error::config(key, "expected a string"))
}

/// Parses a flat TOML document. Unknown keys are rejected.
pub fn parse_config_values(doc: &str) -> Result<ConfigValues> {
    let table: toml::Table = doc
        .parse()
        .map_err(|e: toml::de::Error| Error::config("<document>", e.message().to_string()))?;
    let mut values = ConfigValues::default();
    for (key, value) in &table {
        let k = key.as_str();
        match k {
            "g" => values.g = Some(number(k, value)?),
            "omega" => values.omega = Some(number(k, value)?),
            "p0" => values.p0 = Some(number(k, value)?),
            "n" => values.n = Some(count(k, value)?),
            "dt" => values.dt = Some(number(k, value)?),
            "tau_end" => values.tau_end = Some(number(k, value)?),
            "sample_every" => values.sample_every = Some(count(k, value)? as usize),
            "window" => values.window = Some(number(k, value)?),
            "axis" => values.axis = Some(text(k, value)?.parse().map_err(|e| Error::config(k, e))?),
            "from" => values.from = Some(number(k, value)?),
            "to" => values.to = Some(number(k, value)?),
            "points" => values.points = Some(count(k, value)? as usize),
            "out" => values.out = Some(PathBuf::from(text(k, value)?)),
            "strict" => values.strict = Some(flag(k, value)?),
            "emit_plot" => values.emit_plot = Some(flag(k, value)?),
            "workers" => values.workers = Some(count(k, value)? as usize),
            "drive" => values.drive = Some(text(k, value)?.to_string()),
            "pulse_period" => values.pulse_period = Some(number(k, value)?),
            "pulse_width" => values.pulse_width = Some(number(k, value)?),
            "pulse_amplitude" => values.pulse_amplitude = Some(number(k, value)?),
            _ => return Err(Error::config(k, "unknown key")),
        }
    }
    Ok(values)
}

/// Renames model-level parameter errors to the config key that set them.
fn as_config_error(err: Error) -> Error {
    match err {
        Error::InvalidParams { name, reason } => {
            let key = match name {
                "n_tls" => "n",
                "drive.period" => "pulse_period",
                "drive.width" => "pulse_width",
                "drive.amplitude" => "pulse_amplitude",
                other => other,
            };
            Error::config(key, reason)
        }
        other => other,
    }
}

fn resolve_drive(values: &ConfigValues) -> Result<DriveWaveform> {
    match values.drive.as_deref().unwrap_or("sinusoidal") {
        "sinusoidal" => Ok(DriveWaveform::Sinusoidal),
        "pulse" => Ok(DriveWaveform::PulseTrain {
            period: values.pulse_period.ok_or_else(|| Error::config("pulse_period", "required for pulse drive"))?,
            width: values.pulse_width.ok_or_else(|| Error::config("pulse_width", "required for pulse drive"))?,
            amplitude: values.pulse_amplitude.unwrap_or(1.0),
        }),
        other => Err(Error::config("drive", format!("unknown drive `{other}` (expected sinusoidal or pulse)"))),
    }
}

/// Merges command-line values over file values over defaults and validates
/// the result.
pub fn resolve_config(command: Command, cli: ConfigValues, file: ConfigValues) -> Result<RunConfig> {
    let values = cli.or(file);
    let defaults = ModelParams::default();
    let model = ModelParams {
        g: values.g.unwrap_or(defaults.g),
        omega: values.omega.unwrap_or(defaults.omega),
        p0: values.p0.unwrap_or(defaults.p0),
        n_tls: values.n.unwrap_or(defaults.n_tls),
        drive: resolve_drive(&values)?,
    };
    model.validate().map_err(as_config_error)?;

    let strict = values.strict.unwrap_or(false);
    let integration = IntegrationConfig {
        strict,
        sample_every: values.sample_every.unwrap_or(1),
        ..IntegrationConfig::new(
            values.dt.unwrap_or(1e-3),
            values.tau_end.unwrap_or(command.default_horizon()),
        )
    };
    integration.validate().map_err(as_config_error)?;

    let sweep = if command == Command::Sweep {
        let axis = values.axis.unwrap_or(SweepAxis::G);
        let base = match axis {
            SweepAxis::G => SweepSpec::g_scan(),
            SweepAxis::Omega => SweepSpec::omega_scan(),
        };
        let spec = SweepSpec {
            axis,
            from: values.from.unwrap_or(base.from),
            to: values.to.unwrap_or(base.to),
            points: values.points.unwrap_or(base.points),
            fixed: model.clone(),
            window: values.window.unwrap_or(base.window),
            classify_horizon: base.classify_horizon,
            dt: integration.dt,
            strict,
        };
        spec.validate().map_err(as_config_error)?;
        Some(spec)
    } else {
        None
    };

    let emit_plot = values.emit_plot.unwrap_or(false);
    if emit_plot && values.out.is_none() {
        return Err(Error::config("emit_plot", "plot scripts need an output path (--out)"));
    }
    Ok(RunConfig {
        command,
        model,
        integration,
        sweep,
        output_path: values.out,
        strict,
        emit_plot,
        workers: values.workers.unwrap_or(0),
    })
}

/// Parses a config document and applies command-line overrides.
pub fn parse_config(command: Command, doc: &str, cli: ConfigValues) -> Result<RunConfig> {
    resolve_config(command, cli, parse_config_values(doc)?)
}

/// Like [`parse_config`], reading the document from `path` when given.
pub fn load_config(command: Command, path: Option<&Path>, cli: ConfigValues) -> Result<RunConfig> {
    let doc = match path {
        Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?,
        None => String::new(),
    };
    parse_config(command, &doc, cli)
}

pub const TRAJECTORY_HEADER: [&str; 11] = ["tau", "x", "p", "psi", "i_action", "s_pp", "s_xx", "s_px", "S", "d", "L_drift"];
pub const SWEEP_HEADER: [&str; 11] = [
    "g", "omega", "kappa", "K", "class", "s_min", "tau_at_min", "d_end", "d_growth", "lambda", "status",
];
pub const INTERVALS_HEADER: [&str; 3] = ["tau_start", "tau_end", "duration"];
pub const SECTION_HEADER: [&str; 2] = ["x", "p"];

/// 17 significant digits, enough to reproduce every `f64` exactly.
fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn csv_err(path: &Path, err: csv::Error) -> Error {
    match err.into_kind() {
        csv::ErrorKind::Io(e) => Error::io(path, e),
        other => Error::io(path, io::Error::other(format!("{other:?}"))),
    }
}

fn write_records<W: Write>(
    out: W,
    header: &[&str],
    rows: impl Iterator<Item = Vec<String>>,
) -> std::result::Result<usize, csv::Error> {
    let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(out);
    writer.write_record(header)?;
    let mut count = 0;
    for row in rows {
        writer.write_record(&row)?;
        count += 1;
    }
    writer.flush()?;
    Ok(count)
}

fn to_path(path: &Path, write: impl FnOnce(File) -> std::result::Result<usize, csv::Error>) -> Result<usize> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write(file).map_err(|e| csv_err(path, e))
}

fn trajectory_rows(traj: &Trajectory) -> impl Iterator<Item = Vec<String>> + '_ {
    traj.samples.iter().map(|s| {
        let st = &s.state;
        vec![
            num(st.tau),
            num(st.pendulum.x),
            num(st.pendulum.p),
            num(st.pendulum.psi),
            num(st.pendulum.i_action),
            num(st.cov.s_pp),
            num(st.cov.s_xx),
            num(st.cov.s_px),
            num(s.squeezing),
            num(s.radius),
            s.drift.map(num).unwrap_or_default(),
        ]
    })
}

pub fn write_trajectory<W: Write>(traj: &Trajectory, out: W) -> Result<usize> {
    write_records(out, &TRAJECTORY_HEADER, trajectory_rows(traj)).map_err(|e| csv_err(Path::new("<stream>"), e))
}

/// Writes one row per sample and returns the number of rows.
pub fn write_trajectory_csv(traj: &Trajectory, path: &Path) -> Result<usize> {
    to_path(path, |f| write_records(f, &TRAJECTORY_HEADER, trajectory_rows(traj)))
}

fn sweep_record(row: &SweepRow) -> Vec<String> {
    let mut record = vec![num(row.g), num(row.omega)];
    match row.metrics() {
        Some(m) => record.extend([
            num(m.kappa),
            num(m.k_param),
            m.class.code().to_string(),
            num(m.s_min),
            num(m.tau_at_min),
            num(m.d_end),
            num(m.d_growth),
            num(m.lambda),
        ]),
        None => record.extend(std::iter::repeat(String::new()).take(8)),
    }
    record.push(row.status());
    record
}

pub fn write_sweep<W: Write>(rows: &[SweepRow], out: W) -> Result<usize> {
    write_records(out, &SWEEP_HEADER, rows.iter().map(sweep_record)).map_err(|e| csv_err(Path::new("<stream>"), e))
}

pub fn write_sweep_csv(rows: &[SweepRow], path: &Path) -> Result<usize> {
    to_path(path, |f| write_records(f, &SWEEP_HEADER, rows.iter().map(sweep_record)))
}

fn interval_record(iv: &Interval) -> Vec<String> {
    vec![num(iv.start), num(iv.end), num(iv.length())]
}

pub fn write_intervals<W: Write>(intervals: &[Interval], out: W) -> Result<usize> {
    write_records(out, &INTERVALS_HEADER, intervals.iter().map(interval_record))
        .map_err(|e| csv_err(Path::new("<stream>"), e))
}

pub fn write_intervals_csv(intervals: &[Interval], path: &Path) -> Result<usize> {
    to_path(path, |f| write_records(f, &INTERVALS_HEADER, intervals.iter().map(interval_record)))
}

pub fn write_section_csv(points: &[(f64, f64)], path: &Path) -> Result<usize> {
    to_path(path, |f| {
        write_records(f, &SECTION_HEADER, points.iter().map(|&(x, p)| vec![num(x), num(p)]))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotKind {
    Trajectory,
    Sweep(SweepAxis),
    Intervals,
    Poincare,
}

fn quoted(path: &Path) -> String {
    format!("'{}'", path.display().to_string().replace('\'', "''"))
}

/// Writes a gnuplot script that renders `data_path` to a PNG next to
/// `out_path`, and returns the script text.
pub fn emit_plot_script(kind: PlotKind, data_path: &Path, out_path: &Path) -> Result<String> {
    if !data_path.is_file() {
        return Err(Error::io(data_path, io::Error::new(io::ErrorKind::NotFound, "data file not found")));
    }
    let data = quoted(data_path);
    let image = quoted(&out_path.with_extension("png"));
    let mut script = String::new();
    script.push_str("set terminal pngcairo size 1000,700\n");
    script.push_str(&format!("set output {image}\n"));
    script.push_str("set datafile separator ','\n");
    script.push_str("set datafile missing ''\n");
    match kind {
        PlotKind::Trajectory => {
            script.push_str("set xlabel 'tau'\nset ylabel 'S'\nset logscale y\n");
            script.push_str(&format!(
                "plot {data} using 'tau':'S' with lines title 'S', 3 with lines dashtype 2 lc rgb 'black' title 'S = 3'\n"
            ));
        }
        PlotKind::Sweep(axis) => {
            let col = axis.name();
            script.push_str("set multiplot layout 2,1\n");
            script.push_str(&format!("set xlabel '{col}'\nset logscale y\nset format y '10^{{%L}}'\n"));
            script.push_str("set ylabel 'S_min'\n");
            script.push_str(&format!("plot {data} using '{col}':'s_min' with linespoints pt 7 title 'S_min'\n"));
            script.push_str("set ylabel 'd'\n");
            script.push_str(&format!("plot {data} using '{col}':'d_end' with linespoints pt 7 title 'd'\n"));
            script.push_str("unset multiplot\n");
        }
        PlotKind::Intervals => {
            script.push_str("set xlabel 'tau'\nunset ytics\nset yrange [0:2]\n");
            script.push_str(&format!(
                "plot {data} using 'tau_start':(1):'duration':(0) with vectors nohead lw 12 title 'S < 3'\n"
            ));
        }
        PlotKind::Poincare => {
            script.push_str("set xlabel 'x mod 2pi'\nset ylabel 'p'\nset xrange [0:2*pi]\n");
            script.push_str(&format!("plot {data} using 'x':'p' with points pt 7 ps 0.4 notitle\n"));
        }
    }
    std::fs::write(out_path, &script).map_err(|e| Error::io(out_path, e))?;
    Ok(script)
}
