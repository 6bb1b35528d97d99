//! Parameter scans, squeezing-interval timelines and initial-condition
//! sensitivity.

use rayon::prelude::*;

use crate::diagnostics::{
    chirikov, classify, min_squeezing, squeezing_intervals, ChaosClass, ChirikovConfig, ClassifyConfig, Interval,
};
use crate::error::{Error, Result};
use crate::integrator::{integrate, IntegrationConfig, Warning};
use crate::model::ModelParams;

/// Default bisection tolerance for interval boundaries.
pub const REFINE_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    G,
    Omega,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::G => "g",
            SweepAxis::Omega => "omega",
        }
    }
}

impl std::str::FromStr for SweepAxis {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "g" => Ok(SweepAxis::G),
            "omega" => Ok(SweepAxis::Omega),
            other => Err(format!("unknown axis `{other}` (expected g or omega)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub from: f64,
    pub to: f64,
    pub points: usize,
    /// Parameters held fixed; the scanned one is overwritten per point.
    pub fixed: ModelParams,
    /// End `tau_1` of the squeezing window `(0, tau_1)`.
    pub window: f64,
    pub classify_horizon: f64,
    pub dt: f64,
    pub strict: bool,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self::g_scan()
    }
}

impl SweepSpec {
    /// `G` in `[0.1, 3]` at `Omega = 0.5`, `p0 = 0`.
    pub fn g_scan() -> Self {
        Self {
            axis: SweepAxis::G,
            from: 0.1,
            to: 3.0,
            points: 50,
            fixed: ModelParams::sinusoidal(2.0, 0.5, 0.0),
            window: 10.0,
            classify_horizon: 200.0,
            dt: 1e-3,
            strict: false,
        }
    }

    /// `Omega` in `[0.05, 2]` at `G = 2`, `p0 = 0`.
    pub fn omega_scan() -> Self {
        Self {
            axis: SweepAxis::Omega,
            from: 0.05,
            to: 2.0,
            ..Self::g_scan()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.from.is_finite() && self.to.is_finite() && self.from < self.to) {
            return Err(Error::invalid("from", "sweep bounds must satisfy from < to"));
        }
        if self.points < 2 {
            return Err(Error::invalid("points", "a sweep needs at least 2 points"));
        }
        if !(self.window > 0.0) {
            return Err(Error::invalid("window", "window end must be > 0"));
        }
        for value in [self.from, self.to] {
            self.params_at(value).validate()?;
        }
        IntegrationConfig::new(self.dt, self.window).validate()
    }

    /// Evenly spaced axis values; both endpoints are reproduced exactly.
    pub fn grid(&self) -> Vec<f64> {
        let last = self.points - 1;
        (0..self.points)
            .map(|i| {
                if i == last {
                    self.to
                } else {
                    self.from + (self.to - self.from) * (i as f64 / last as f64)
                }
            })
            .collect()
    }

    pub fn params_at(&self, value: f64) -> ModelParams {
        let mut params = self.fixed.clone();
        match self.axis {
            SweepAxis::G => params.g = value,
            SweepAxis::Omega => params.omega = value,
        }
        params
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowMetrics {
    pub kappa: f64,
    pub k_param: f64,
    pub s_min: f64,
    pub tau_at_min: f64,
    /// `d(tau_1)`.
    pub d_end: f64,
    /// `d(tau_1) / d(0)`.
    pub d_growth: f64,
    pub lambda: f64,
    pub class: ChaosClass,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RowFailure {
    pub message: String,
    /// Exit status the error would map to on its own.
    pub exit_code: u8,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub g: f64,
    pub omega: f64,
    /// Metrics, or the reason the point failed.
    pub outcome: std::result::Result<RowMetrics, RowFailure>,
    /// Non-fatal warnings, e.g. `radius` when `d` left the validity bound.
    pub warnings: Vec<&'static str>,
}

impl SweepRow {
    pub fn metrics(&self) -> Option<&RowMetrics> {
        self.outcome.as_ref().ok()
    }

    pub fn class(&self) -> Option<ChaosClass> {
        self.metrics().map(|m| m.class)
    }

    /// `ok`, `failed`, or the warning kinds joined by `+`.
    pub fn status(&self) -> String {
        match (&self.outcome, self.warnings.is_empty()) {
            (Err(_), _) => "failed".to_string(),
            (Ok(_), true) => "ok".to_string(),
            (Ok(_), false) => self.warnings.join("+"),
        }
    }
}

fn warning_kind(w: &Warning) -> &'static str {
    match w {
        Warning::InvariantDrift { .. } => "drift",
        Warning::StepHalving { .. } => "accuracy",
        Warning::ValidityRadius { .. } => "radius",
    }
}

fn evaluate_point(spec: &SweepSpec, params: &ModelParams) -> Result<(RowMetrics, Vec<&'static str>)> {
    let config = IntegrationConfig {
        strict: spec.strict,
        ..IntegrationConfig::new(spec.dt, spec.window)
    };
    let traj = integrate(params, &config)?;
    let (s_min, tau_at_min) = min_squeezing(&traj, (0.0, spec.window))?;
    let d0 = traj.samples[0].radius;
    let d_end = traj.samples.last().map_or(d0, |s| s.radius);
    let report = chirikov(params, &ChirikovConfig::default());
    let classify_config = ClassifyConfig {
        horizon: spec.classify_horizon,
        dt: spec.dt,
        ..ClassifyConfig::default()
    };
    let classification = classify(params, &classify_config)?;
    let metrics = RowMetrics {
        kappa: report.kappa,
        k_param: report.k_param,
        s_min,
        tau_at_min,
        d_end,
        d_growth: d_end / d0,
        lambda: classification.lambda,
        class: classification.class,
    };
    let mut warnings: Vec<&'static str> = traj.warnings.iter().map(warning_kind).collect();
    warnings.dedup();
    Ok((metrics, warnings))
}

/// Evaluates the single grid point `value` of `spec`.
pub fn evaluate_row(spec: &SweepSpec, value: f64) -> SweepRow {
    let params = spec.params_at(value);
    let (outcome, warnings) = match evaluate_point(spec, &params) {
        Ok((metrics, warnings)) => (Ok(metrics), warnings),
        Err(e) => (
            Err(RowFailure {
                message: e.to_string(),
                exit_code: e.exit_code(),
            }),
            Vec::new(),
        ),
    };
    SweepRow {
        g: params.g,
        omega: params.omega,
        outcome,
        warnings,
    }
}

/// Evaluates every grid point on a pool of `workers` threads (0 picks the
/// core count). Rows come back in grid order; a failing point is recorded
/// in its row and does not stop the sweep.
pub fn run_sweep(spec: &SweepSpec, workers: usize) -> Result<Vec<SweepRow>> {
    spec.validate()?;
    let grid = spec.grid();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::invalid("workers", e.to_string()))?;
    Ok(pool.install(|| grid.par_iter().map(|&v| evaluate_row(spec, v)).collect()))
}

/// Fraction of successful rows with `kappa >= kappa_large` on which the
/// resonance-overlap prediction agrees with the measured class.
pub fn chirikov_concordance(rows: &[SweepRow], config: &ChirikovConfig) -> Option<f64> {
    let strong: Vec<_> = rows
        .iter()
        .filter_map(SweepRow::metrics)
        .filter(|m| m.kappa >= config.kappa_large)
        .collect();
    if strong.is_empty() {
        return None;
    }
    let agree = strong
        .iter()
        .filter(|m| (m.k_param > 1.0) == m.class.is_chaotic())
        .count();
    Some(agree as f64 / strong.len() as f64)
}

/// Squeezing intervals over `[0, tau_end]` starting from the coherent state.
pub fn interval_timeline(params: &ModelParams, tau_end: f64, dt: f64) -> Result<Vec<Interval>> {
    if !(tau_end >= 10.0) {
        return Err(Error::invalid("tau_end", "timeline horizon must be >= 10"));
    }
    let traj = integrate(params, &IntegrationConfig::new(dt, tau_end))?;
    squeezing_intervals(&traj, REFINE_TOL)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityResult {
    pub base_intervals: Vec<Interval>,
    pub perturbed_intervals: Vec<Interval>,
    /// Measure of the intersection over measure of the union, in `tau`.
    pub jaccard: f64,
    pub perturbation: String,
}

fn total_length(intervals: &[Interval]) -> f64 {
    intervals.iter().map(Interval::length).sum()
}

/// Jaccard index of two sets of disjoint intervals, measured in `tau`.
/// Two empty sets count as identical.
pub fn interval_jaccard(a: &[Interval], b: &[Interval]) -> f64 {
    let mut overlap = 0.0;
    for x in a {
        for y in b {
            let lo = x.start.max(y.start);
            let hi = x.end.min(y.end);
            if hi > lo {
                overlap += hi - lo;
            }
        }
    }
    let union = total_length(a) + total_length(b) - overlap;
    if union <= 0.0 {
        1.0
    } else {
        (overlap / union).clamp(0.0, 1.0)
    }
}

/// Compares interval timelines for `p0` and a perturbed `p0`: relative
/// `p0 (1 + delta)`, or additive `delta` when `p0 = 0`.
pub fn sensitivity(params: &ModelParams, delta: f64, tau_end: f64, dt: f64) -> Result<SensitivityResult> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::invalid("delta", "perturbation must be > 0"));
    }
    let (p0, perturbation) = if params.p0 == 0.0 {
        (delta, format!("p0 = 0 -> {delta}"))
    } else {
        (params.p0 * (1.0 + delta), format!("p0 x (1 + {delta})"))
    };
    let perturbed = ModelParams { p0, ..params.clone() };
    let base_intervals = interval_timeline(params, tau_end, dt)?;
    let perturbed_intervals = if perturbed == *params {
        base_intervals.clone()
    } else {
        interval_timeline(&perturbed, tau_end, dt)?
    };
    Ok(SensitivityResult {
        jaccard: interval_jaccard(&base_intervals, &perturbed_intervals),
        base_intervals,
        perturbed_intervals,
        perturbation,
    })
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    use super::*;

    fn short_spec() -> SweepSpec {
        SweepSpec {
            from: 0.0,
            to: 2.0,
            points: 3,
            window: 5.0,
            classify_horizon: 50.0,
            dt: 2e-3,
            ..SweepSpec::g_scan()
        }
    }

    #[test]
    fn degenerate_range_is_rejected() {
        let spec = SweepSpec { from: 0.0, to: 0.0, points: 2, ..SweepSpec::g_scan() };
        assert!(run_sweep(&spec, 1).is_err());
        let spec = SweepSpec { points: 1, ..SweepSpec::g_scan() };
        assert!(spec.validate().is_err());
        let spec = SweepSpec { axis: SweepAxis::Omega, from: 0.0, to: 1.0, ..SweepSpec::g_scan() };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn default_grids() {
        let g = SweepSpec::g_scan();
        assert_eq!((g.from, g.to, g.points, g.fixed.omega, g.fixed.p0), (0.1, 3.0, 50, 0.5, 0.0));
        let o = SweepSpec::omega_scan();
        assert_eq!((o.from, o.to, o.fixed.g, o.fixed.p0), (0.05, 2.0, 2.0, 0.0));
        assert_eq!("Omega".parse::<SweepAxis>().unwrap(), SweepAxis::Omega);
        assert!("x".parse::<SweepAxis>().is_err());
    }

    #[test]
    fn quiet_row_is_regular() {
        let rows = run_sweep(&short_spec(), 2).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows.iter().map(|r| r.g).collect::<Vec<_>>(), vec![0.0, 1.0, 2.0]);
        let first = rows[0].metrics().unwrap();
        assert_eq!(first.class, ChaosClass::Regular);
        assert!(first.lambda.abs() < 1e-3);
        assert_eq!(first.s_min, 3.0);
        assert_eq!(rows[0].status(), "ok");
    }

    #[test]
    fn worker_count_does_not_change_rows() {
        let spec = short_spec();
        assert_eq!(run_sweep(&spec, 1).unwrap(), run_sweep(&spec, 3).unwrap());
    }

    #[test]
    fn strict_breach_fails_only_that_row() {
        let spec = SweepSpec { strict: true, window: 30.0, ..short_spec() };
        let rows = run_sweep(&spec, 0).unwrap();
        assert!(rows[0].outcome.is_ok());
        assert_eq!(rows[2].status(), "failed");
        assert!(rows[2].metrics().is_none());
        assert_eq!(rows[2].outcome.as_ref().unwrap_err().exit_code, 4);
    }

    #[test]
    fn jaccard_examples() {
        let a = [Interval::new(0.0, 2.0)];
        let b = [Interval::new(1.0, 3.0)];
        assert_abs_diff_eq!(interval_jaccard(&a, &b), 1.0 / 3.0, epsilon = 1e-15);
        assert_eq!(interval_jaccard(&a, &a), 1.0);
        assert_eq!(interval_jaccard(&[], &[]), 1.0);
        assert_eq!(interval_jaccard(&a, &[]), 0.0);
    }

    #[test]
    fn quiet_timeline_is_empty() {
        let params = ModelParams::sinusoidal(0.0, 0.5, 0.0);
        assert!(interval_timeline(&params, 10.0, 1e-3).unwrap().is_empty());
        assert!(interval_timeline(&params, 5.0, 1e-3).is_err());
    }

    #[test]
    fn unresolvable_perturbation_gives_unit_jaccard() {
        let params = ModelParams::sinusoidal(0.5, 0.5, 0.5);
        let result = sensitivity(&params, 1e-18, 10.0, 1e-3).unwrap();
        assert_eq!(result.jaccard, 1.0);
        assert_eq!(result.base_intervals, result.perturbed_intervals);
        assert!(sensitivity(&params, 0.0, 10.0, 1e-3).is_err());
    }

    proptest! {
        #[test]
        fn grid_hits_endpoints(from in -5.0..5.0f64, width in 1e-6..10.0f64, points in 2usize..200) {
            let spec = SweepSpec { from, to: from + width, points, ..SweepSpec::g_scan() };
            let grid = spec.grid();
            prop_assert_eq!(grid.len(), points);
            prop_assert_eq!(grid[0], spec.from);
            prop_assert_eq!(grid[points - 1], spec.to);
            prop_assert!(grid.windows(2).all(|w| w[0] < w[1]));
        }

        #[test]
        fn jaccard_is_bounded(a in 0.0..5.0f64, la in 0.0..5.0f64, b in 0.0..5.0f64, lb in 0.0..5.0f64) {
            let j = interval_jaccard(&[Interval::new(a, a + la)], &[Interval::new(b, b + lb)]);
            prop_assert!((0.0..=1.0).contains(&j));
        }
    }
}
