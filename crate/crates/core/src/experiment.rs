//! Run specifications, presets, and the commands behind the `pdflow` binary:
//! single runs, regime validation, parameter sweeps and system comparisons.
//!
//! Every command writes plain-text artifacts. CSV floats use 17 significant
//! digits; JSON floats use the shortest representation that round-trips.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{
    energies, fit_rate, integral_estimates, metrics, tikhonov_path, EnergyReport,
    IntegralEstimates, MetricSeries, RateFit, TikhonovPath,
};
use crate::charts::{self, Chart, Scale, Series};
use crate::dynamics::{
    existence_constants, simulate, ExistenceConstants, RescaledAlmParams, SecondOrderDualParams,
    SystemKind, SystemState, SystemTrajectory, TikhonovParams,
};
use crate::integrator::{IntegratorConfig, Sampling, StepStats};
use crate::numfmt::fmt17;
use crate::problem::{builtin, Builtin, ProblemDoc, ReferenceSolution, SeparableProblem, Vector};
use crate::schedules::{validate_regimes, Curve, RegimeReport};
use crate::{Error, Result};

/// A problem given by a built-in name or an inline document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ProblemSpec {
    Builtin(Builtin),
    Inline { inline: ProblemDoc },
}

impl ProblemSpec {
    pub fn build(&self) -> Result<SeparableProblem> {
        match self {
            ProblemSpec::Builtin(b) => builtin(b),
            ProblemSpec::Inline { inline } => inline.build(),
        }
    }
}

/// A parameter curve. `power` is `c·t^r`, `decay` is `c/t^r`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum CurveSpec {
    Power { c: f64, r: f64 },
    Decay { c: f64, r: f64 },
    Constant { c: f64 },
    Zero,
}

impl CurveSpec {
    pub fn build(&self, t0: f64) -> Result<Curve> {
        match *self {
            CurveSpec::Power { c, r } => Curve::power(c, r, t0),
            CurveSpec::Decay { c, r } => Curve::power(c, -r, t0),
            CurveSpec::Constant { c } => Curve::constant(c, t0),
            CurveSpec::Zero => Curve::zero(t0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SystemSpec {
    TikhonovPd {
        gamma: f64,
        delta: f64,
        beta: CurveSpec,
        eps: CurveSpec,
    },
    SecondOrderDual {
        gamma: CurveSpec,
        delta: CurveSpec,
    },
    RescaledAlm {
        gamma: CurveSpec,
        beta: CurveSpec,
        a: CurveSpec,
        mu: f64,
    },
}

impl SystemSpec {
    pub fn build(&self, t0: f64) -> Result<SystemKind> {
        let kind = match self {
            SystemSpec::TikhonovPd {
                gamma,
                delta,
                beta,
                eps,
            } => SystemKind::TikhonovPd(TikhonovParams {
                gamma: *gamma,
                delta: *delta,
                beta: beta.build(t0)?,
                eps: eps.build(t0)?,
            }),
            SystemSpec::SecondOrderDual { gamma, delta } => {
                SystemKind::SecondOrderDual(SecondOrderDualParams {
                    gamma: gamma.build(t0)?,
                    delta: delta.build(t0)?,
                })
            }
            SystemSpec::RescaledAlm { gamma, beta, a, mu } => {
                SystemKind::RescaledAlm(RescaledAlmParams {
                    gamma: gamma.build(t0)?,
                    beta: beta.build(t0)?,
                    a: a.build(t0)?,
                    mu: *mu,
                })
            }
        };
        kind.validate()?;
        Ok(kind)
    }
}

/// Initial state; missing velocities default to zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialSpec {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub lam: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vx: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vy: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vlam: Option<Vec<f64>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rtol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub atol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_init: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub safety: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<String>,
    #[serde(default)]
    pub charts: bool,
}

fn default_name() -> String {
    "run".to_string()
}

/// One simulation: problem, system, horizon, initial state and solver settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    #[serde(default = "default_name")]
    pub name: String,
    pub problem: ProblemSpec,
    pub system: SystemSpec,
    pub horizon: [f64; 2],
    pub initial: InitialSpec,
    #[serde(default)]
    pub integrator: IntegratorSpec,
    #[serde(default)]
    pub sampling: Sampling,
    #[serde(default)]
    pub output: OutputSpec,
}

/// A run specification together with the objects it describes.
#[derive(Clone, Debug)]
pub struct Resolved {
    /// The specification with every default written out.
    pub spec: RunSpec,
    pub problem: SeparableProblem,
    pub kind: SystemKind,
    pub t0: f64,
    pub t1: f64,
    pub initial: SystemState,
    pub config: IntegratorConfig,
}

fn check_len(what: &str, v: &[f64], n: usize) -> Result<()> {
    if v.len() != n {
        return Err(Error::input(format!(
            "initial {what} has length {}, expected {n}",
            v.len()
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::input(format!(
            "initial {what} has non-finite entries"
        )));
    }
    Ok(())
}

fn check_name(name: &str) -> Result<()> {
    let ok = !name.is_empty()
        && name != "."
        && name != ".."
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(Error::input(format!(
            "name {name:?} must be non-empty and use only [A-Za-z0-9._-]"
        )))
    }
}

impl RunSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    /// Validates the specification and fills in every default.
    pub fn resolve(&self) -> Result<Resolved> {
        check_name(&self.name)?;
        let [t0, t1] = self.horizon;
        if !(t0 > 0.0 && t0.is_finite() && t1.is_finite() && t1 > t0) {
            return Err(Error::input(format!(
                "horizon must satisfy 0 < t0 < T < inf, got [{t0}, {t1}]"
            )));
        }
        let problem = self.problem.build()?;
        let kind = self.system.build(t0)?;
        let layout = kind.layout(&problem);

        let init = &self.initial;
        let zeros = |n: usize| vec![0.0; n];
        let vx = init.vx.clone().unwrap_or_else(|| zeros(layout.n1));
        let vy = init.vy.clone().unwrap_or_else(|| zeros(layout.n2));
        let vlam = match (layout.second_order_dual, &init.vlam) {
            (true, v) => Some(v.clone().unwrap_or_else(|| zeros(layout.m))),
            (false, None) => None,
            (false, Some(_)) => {
                return Err(Error::input(format!(
                    "system {} has no dual velocity; remove initial.vlam",
                    kind.name()
                )))
            }
        };
        check_len("x", &init.x, layout.n1)?;
        check_len("y", &init.y, layout.n2)?;
        check_len("lam", &init.lam, layout.m)?;
        check_len("vx", &vx, layout.n1)?;
        check_len("vy", &vy, layout.n2)?;
        if let Some(v) = &vlam {
            check_len("vlam", v, layout.m)?;
        }
        let v = |xs: &[f64]| Vector::from_column_slice(xs);
        let initial = SystemState {
            x: v(&init.x),
            y: v(&init.y),
            lam: v(&init.lam),
            vx: v(&vx),
            vy: v(&vy),
            vlam: vlam.as_deref().map(v),
        };

        let d = IntegratorConfig::default();
        let is = &self.integrator;
        let config = IntegratorConfig {
            rtol: is.rtol.unwrap_or(d.rtol),
            atol: is.atol.unwrap_or(d.atol),
            h_init: is.h_init.unwrap_or(d.h_init.min((t1 - t0) / 10.0)),
            h_max: Some(is.h_max.unwrap_or((t1 - t0) / 10.0)),
            max_steps: is.max_steps.unwrap_or(d.max_steps),
            safety: is.safety.unwrap_or(d.safety),
            keep_steps: false,
        };
        config.validate(t0, t1)?;
        self.sampling.times(t0, t1)?;

        let spec = RunSpec {
            name: self.name.clone(),
            problem: self.problem.clone(),
            system: self.system.clone(),
            horizon: self.horizon,
            initial: InitialSpec {
                x: init.x.clone(),
                y: init.y.clone(),
                lam: init.lam.clone(),
                vx: Some(vx),
                vy: Some(vy),
                vlam,
            },
            integrator: IntegratorSpec {
                rtol: Some(config.rtol),
                atol: Some(config.atol),
                h_init: Some(config.h_init),
                h_max: config.h_max,
                max_steps: Some(config.max_steps),
                safety: Some(config.safety),
            },
            sampling: self.sampling.clone(),
            output: self.output.clone(),
        };
        Ok(Resolved {
            spec,
            problem,
            kind,
            t0,
            t1,
            initial,
            config,
        })
    }
}

/// Outcome of a rate fit on the last decade of the horizon.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FitOutcome {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fit: Option<RateFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EnergySummary {
    pub monotonicity_violation: f64,
    pub etilde_start: f64,
    pub etilde_end: f64,
    pub e_end: f64,
    pub ehat_end: f64,
    pub sign_indefinite: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IntegralSummary {
    pub total: f64,
    /// Share of the total accumulated over the last decade of the horizon.
    pub last_decade_fraction: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PathSummary {
    pub final_gap: Option<f64>,
    pub min_residual: Option<f64>,
    pub skipped: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExistenceSummary {
    pub at_start: ExistenceConstants,
    pub at_end: ExistenceConstants,
}

/// Summary written to `report.json`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub name: String,
    pub system: String,
    pub horizon: [f64; 2],
    pub regime: Option<RegimeReport>,
    pub references: ReferenceSolution,
    pub stats: StepStats,
    pub final_metrics: BTreeMap<String, f64>,
    pub rate_fits: BTreeMap<String, FitOutcome>,
    pub energy: Option<EnergySummary>,
    pub integrals: Option<BTreeMap<String, IntegralSummary>>,
    pub tikhonov_path: Option<PathSummary>,
    pub existence: Option<ExistenceSummary>,
    pub warnings: Vec<String>,
}

/// Everything computed by a run, before any file is written.
#[derive(Clone, Debug)]
pub struct RunResult {
    pub resolved: Resolved,
    pub refs: ReferenceSolution,
    pub trajectory: SystemTrajectory,
    pub metrics: MetricSeries,
    pub energies: Option<EnergyReport>,
    pub integrals: Option<IntegralEstimates>,
    pub tikhonov_path: Option<TikhonovPath>,
    pub report: RunReport,
}

const FIT_METRICS: [&str; 4] = ["lag_gap", "phi_err", "feas", "minnorm_dist"];

fn metric_column<'a>(m: &'a MetricSeries, name: &str) -> &'a [f64] {
    match name {
        "lag_gap" => &m.lag_gap,
        "phi_err" => &m.phi_err,
        "feas" => &m.feas,
        "gradf_gap" => &m.gradf_gap,
        "gradg_gap" => &m.gradg_gap,
        "minnorm_dist" => &m.minnorm_dist,
        "vel_x" => &m.vel_x,
        "vel_y" => &m.vel_y,
        _ => &[],
    }
}

fn last_decade_fraction(times: &[f64], acc: &[f64]) -> f64 {
    let (Some(&t_end), Some(&total)) = (times.last(), acc.last()) else {
        return f64::NAN;
    };
    let cut = times.iter().position(|&t| t >= t_end / 10.0).unwrap_or(0);
    if total == 0.0 {
        0.0
    } else {
        (total - acc[cut]) / total
    }
}

/// Simulates a specification and computes all diagnostics without writing files.
pub fn execute(spec: &RunSpec) -> Result<RunResult> {
    let resolved = spec.resolve()?;
    let Resolved {
        problem,
        kind,
        t0,
        t1,
        initial,
        config,
        ..
    } = &resolved;
    let refs = problem.solve_saddle_point()?;
    let trajectory = simulate(
        kind,
        problem,
        *t0,
        *t1,
        initial,
        config,
        &resolved.spec.sampling,
    )?;
    let m = metrics(&trajectory, problem, &refs)?;

    let mut warnings = Vec::new();
    if !refs.unique_primal {
        warnings.push("primal solution set is not a singleton; minnorm_dist measures distance to its minimal-norm element".into());
    }
    if !refs.unique_dual {
        warnings.push("dual solution is not unique; the least-norm multiplier is used".into());
    }
    if let Some(w) = kind.damping_warning() {
        warnings.push(w);
    }

    let (regime, en, ints, path, existence) = match kind {
        SystemKind::TikhonovPd(p) => {
            let regime = validate_regimes(&p.beta, &p.eps, p.gamma, p.delta)?;
            warnings.extend(regime.warnings.iter().cloned());
            let en = energies(&trajectory, problem, &refs, p, true)?;
            let ints = integral_estimates(&trajectory, problem, &refs, p)?;
            let path = if p.eps.is_zero() {
                None
            } else {
                Some(tikhonov_path(&trajectory, problem, &refs, &p.eps)?)
            };
            let existence = ExistenceSummary {
                at_start: existence_constants(problem, p, *t0)?,
                at_end: existence_constants(problem, p, *t1)?,
            };
            (Some(regime), Some(en), Some(ints), path, Some(existence))
        }
        _ => (None, None, None, None, None),
    };

    let mut final_metrics = BTreeMap::new();
    for name in [
        "lag_gap",
        "phi_err",
        "feas",
        "gradf_gap",
        "gradg_gap",
        "minnorm_dist",
        "vel_x",
        "vel_y",
    ] {
        if let Some(v) = metric_column(&m, name).last() {
            final_metrics.insert(name.to_string(), *v);
        }
    }
    let window = ((t1 / 10.0).max(*t0), *t1);
    let rate_fits = FIT_METRICS
        .iter()
        .map(|name| {
            let outcome = match fit_rate(&m.times, metric_column(&m, name), window) {
                Ok(fit) => FitOutcome {
                    fit: Some(fit),
                    error: None,
                },
                Err(e) => FitOutcome {
                    fit: None,
                    error: Some(e.to_string()),
                },
            };
            (name.to_string(), outcome)
        })
        .collect();
    let energy = en.as_ref().map(|e| EnergySummary {
        monotonicity_violation: e.monotonicity_violation,
        etilde_start: e.etilde[0],
        etilde_end: *e.etilde.last().unwrap_or(&f64::NAN),
        e_end: *e.e.last().unwrap_or(&f64::NAN),
        ehat_end: *e.ehat.last().unwrap_or(&f64::NAN),
        sign_indefinite: e.sign_indefinite,
    });
    let integrals = ints.as_ref().map(|ie| {
        ie.series()
            .iter()
            .map(|(name, acc)| {
                let summary = IntegralSummary {
                    total: *acc.last().unwrap_or(&f64::NAN),
                    last_decade_fraction: last_decade_fraction(&ie.times, acc),
                };
                (name.to_string(), summary)
            })
            .collect()
    });
    let path_summary = path.as_ref().map(|p| PathSummary {
        final_gap: p.gap.last().copied().flatten(),
        min_residual: p.residual.iter().flatten().copied().reduce(f64::min),
        skipped: p.skipped,
    });

    let report = RunReport {
        name: resolved.spec.name.clone(),
        system: kind.name().to_string(),
        horizon: [*t0, *t1],
        regime,
        references: refs.clone(),
        stats: trajectory.stats.clone(),
        final_metrics,
        rate_fits,
        energy,
        integrals,
        tikhonov_path: path_summary,
        existence,
        warnings,
    };
    Ok(RunResult {
        refs,
        trajectory,
        metrics: m,
        energies: en,
        integrals: ints,
        tikhonov_path: path,
        report,
        resolved,
    })
}

fn csv_escape(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

fn csv_row(out: &mut String, cells: impl IntoIterator<Item = String>) {
    let cells: Vec<String> = cells.into_iter().collect();
    out.push_str(&cells.join(","));
    out.push('\n');
}

pub const METRIC_COLUMNS: [&str; 15] = [
    "t",
    "lag_gap",
    "phi_err",
    "feas",
    "gradf_gap",
    "gradg_gap",
    "minnorm_dist",
    "vel_x",
    "vel_y",
    "vel_lam",
    "E",
    "Etilde",
    "Ehat",
    "corrected",
    "tikhonov_gap",
];

impl RunResult {
    pub fn trajectory_csv(&self) -> String {
        let mut out = String::new();
        csv_row(
            &mut out,
            std::iter::once("t".to_string()).chain(self.trajectory.layout.column_names()),
        );
        for (t, s) in self.trajectory.times.iter().zip(&self.trajectory.states) {
            csv_row(
                &mut out,
                std::iter::once(fmt17(*t)).chain(s.pack().into_iter().map(fmt17)),
            );
        }
        out
    }

    /// Columns of `metrics.csv` in `METRIC_COLUMNS` order; undefined entries are NaN.
    pub fn metric_columns(&self) -> Vec<Vec<f64>> {
        let m = &self.metrics;
        let n = m.times.len();
        let or_nan = |v: Option<&Vec<f64>>| v.cloned().unwrap_or_else(|| vec![f64::NAN; n]);
        let e = self.energies.as_ref();
        let gap = match &self.tikhonov_path {
            Some(p) => p.gap.iter().map(|g| g.unwrap_or(f64::NAN)).collect(),
            None => vec![f64::NAN; n],
        };
        vec![
            m.times.clone(),
            m.lag_gap.clone(),
            m.phi_err.clone(),
            m.feas.clone(),
            m.gradf_gap.clone(),
            m.gradg_gap.clone(),
            m.minnorm_dist.clone(),
            m.vel_x.clone(),
            m.vel_y.clone(),
            or_nan(m.vel_lam.as_ref()),
            or_nan(e.map(|e| &e.e)),
            or_nan(e.map(|e| &e.etilde)),
            or_nan(e.map(|e| &e.ehat)),
            or_nan(e.map(|e| &e.corrected)),
            gap,
        ]
    }

    pub fn metrics_csv(&self) -> String {
        let cols = self.metric_columns();
        let mut out = String::new();
        csv_row(&mut out, METRIC_COLUMNS.iter().map(|s| s.to_string()));
        for i in 0..self.metrics.times.len() {
            csv_row(
                &mut out,
                cols.iter()
                    .map(|c| fmt17(c.get(i).copied().unwrap_or(f64::NAN))),
            );
        }
        out
    }

    pub fn integrals_csv(&self) -> Option<String> {
        let ie = self.integrals.as_ref()?;
        let mut out = String::new();
        csv_row(
            &mut out,
            std::iter::once("t".to_string()).chain(ie.series().iter().map(|(n, _)| n.to_string())),
        );
        for i in 0..ie.times.len() {
            csv_row(
                &mut out,
                std::iter::once(fmt17(ie.times[i]))
                    .chain(ie.series().iter().map(|(_, v)| fmt17(v[i]))),
            );
        }
        Some(out)
    }

    pub fn report_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.report)? + "\n")
    }

    /// Writes all artifacts into `dir`; charts are derived from the written CSVs.
    pub fn write(&self, dir: &Path, with_charts: bool) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("trajectory.csv"), self.trajectory_csv())?;
        std::fs::write(dir.join("metrics.csv"), self.metrics_csv())?;
        if let Some(csv) = self.integrals_csv() {
            std::fs::write(dir.join("integrals.csv"), csv)?;
        }
        std::fs::write(dir.join("report.json"), self.report_json()?)?;
        let mut echo = self.resolved.spec.clone();
        echo.output = OutputSpec {
            dir: Some(dir.display().to_string()),
            charts: with_charts,
        };
        std::fs::write(dir.join("resolved_spec.json"), echo.to_json()?)?;
        if with_charts {
            run_charts(dir)?;
        }
        Ok(())
    }
}

/// Runs a specification and writes its artifacts into `out`.
pub fn cmd_run(spec: &RunSpec, out: &Path, with_charts: bool) -> Result<RunResult> {
    let result = execute(spec)?;
    result.write(out, with_charts)?;
    Ok(result)
}

/// Charts for one run directory, built from its CSV files.
pub fn run_charts(dir: &Path) -> Result<()> {
    let metrics = charts::read_csv(&dir.join("metrics.csv"))?;
    let chart = |title: &str, y_label: &str, y_scale: Scale, series: Vec<Series>| Chart {
        title: title.to_string(),
        x_label: "t".to_string(),
        y_label: y_label.to_string(),
        x_scale: Scale::Log,
        y_scale,
        series,
    };
    chart(
        "Convergence measures",
        "value",
        Scale::Log,
        charts::series_from_table(
            &metrics,
            "t",
            &["lag_gap", "phi_err", "feas", "minnorm_dist"],
        ),
    )
    .write(&dir.join("convergence.svg"))?;
    chart(
        "Velocities",
        "norm",
        Scale::Log,
        charts::series_from_table(&metrics, "t", &["vel_x", "vel_y", "vel_lam"]),
    )
    .write(&dir.join("velocities.svg"))?;
    let energy = charts::series_from_table(&metrics, "t", &["E", "Etilde", "corrected"]);
    if !energy.is_empty() {
        chart("Energies", "value", Scale::Linear, energy).write(&dir.join("energy.svg"))?;
    }
    let integrals = dir.join("integrals.csv");
    if integrals.exists() {
        let table = charts::read_csv(&integrals)?;
        chart(
            "Running integral estimates",
            "integral",
            Scale::Log,
            charts::series_from_table(&table, "t", &["velocity", "gap", "tikhonov", "feasibility"]),
        )
        .write(&dir.join("integrals.svg"))?;
    }
    Ok(())
}

fn check_line(out: &mut String, name: &str, check: &crate::schedules::HypothesisCheck) {
    let status = match (check.applicable, check.ok) {
        (false, _) => "not applicable",
        (true, true) => "hypotheses hold",
        (true, false) => "hypotheses fail",
    };
    let limited = if check.horizon_limited {
        " (numerical, finite horizon)"
    } else {
        ""
    };
    let _ = writeln!(out, "{name}: {status}{limited}");
    for c in &check.conditions {
        let mark = if c.holds { "ok  " } else { "FAIL" };
        let detail = if c.detail.is_empty() {
            String::new()
        } else {
            format!(": {}", c.detail)
        };
        let _ = writeln!(out, "  [{mark}] {}{detail}", c.name);
    }
}

/// Checks a specification's schedules without integrating. Returns the
/// printable report and, for the regularized system, the regime report.
pub fn cmd_validate(spec: &RunSpec) -> Result<(String, Option<RegimeReport>)> {
    let resolved = spec.resolve()?;
    let mut out = String::new();
    let _ = writeln!(out, "run: {}", resolved.spec.name);
    let _ = writeln!(out, "system: {}", resolved.kind.name());
    let _ = writeln!(out, "horizon: [{}, {}]", resolved.t0, resolved.t1);
    let regime = match &resolved.kind {
        SystemKind::TikhonovPd(p) => {
            let r = validate_regimes(&p.beta, &p.eps, p.gamma, p.delta)?;
            check_line(&mut out, "rate_bounds", &r.rate_bounds);
            check_line(&mut out, "energy_decay", &r.energy_decay);
            check_line(&mut out, "strong_convergence", &r.strong_convergence);
            if let Some(pr) = &r.power_rate {
                let _ = writeln!(
                    out,
                    "power rate: beta = t^{}, eps ~ t^(-{}): predicted gap order {} (start condition {})",
                    pr.r1,
                    pr.r2,
                    pr.predicted_order,
                    if pr.start_ok { "holds" } else { "fails" }
                );
            }
            let _ = writeln!(out, "earliest_valid_t = {}", r.earliest_valid_t);
            let _ = writeln!(out, "damping_ok = {}", r.damping_ok);
            for w in &r.warnings {
                let _ = writeln!(out, "warning: {w}");
            }
            Some(r)
        }
        other => {
            let _ = writeln!(out, "no regime hypotheses are checked for {}", other.name());
            None
        }
    };
    Ok((out, regime))
}

/// A grid over one field of a base run, addressed by a JSON pointer into the
/// resolved base specification (for example `/system/eps/r`).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default = "default_name")]
    pub name: String,
    pub base: RunSpec,
    pub parameter: String,
    pub values: Vec<serde_json::Value>,
    #[serde(default)]
    pub output: OutputSpec,
}

impl SweepSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// The run specification of every grid cell, in grid order.
    pub fn cells(&self) -> Result<Vec<RunSpec>> {
        check_name(&self.name)?;
        if self.values.is_empty() {
            return Err(Error::input("sweep grid is empty"));
        }
        let base = serde_json::to_value(&self.base.resolve()?.spec)?;
        self.values
            .iter()
            .map(|v| {
                let mut cell = base.clone();
                let slot = cell.pointer_mut(&self.parameter).ok_or_else(|| {
                    Error::input(format!(
                        "sweep parameter {} does not exist in the base run",
                        self.parameter
                    ))
                })?;
                *slot = v.clone();
                Ok(serde_json::from_value(cell)?)
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellOutcome {
    pub index: usize,
    pub value: serde_json::Value,
    pub dir: String,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exit_code: Option<i32>,
    pub final_metrics: BTreeMap<String, f64>,
    pub slopes: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SweepReport {
    pub name: String,
    pub parameter: String,
    pub cells: Vec<CellOutcome>,
    pub succeeded: usize,
    pub failed: usize,
}

fn value_cell(v: &serde_json::Value) -> String {
    match v.as_f64() {
        Some(x) if v.is_number() => fmt17(x),
        _ => csv_escape(&v.to_string()),
    }
}

impl SweepReport {
    pub fn csv(&self) -> String {
        let mut out = String::new();
        let mut header = vec![
            "cell".to_string(),
            "value".to_string(),
            "status".to_string(),
        ];
        header.extend(FIT_METRICS.iter().map(|m| m.to_string()));
        header.extend(FIT_METRICS.iter().map(|m| format!("slope_{m}")));
        header.push("error".to_string());
        csv_row(&mut out, header);
        for c in &self.cells {
            let mut row = vec![
                c.index.to_string(),
                value_cell(&c.value),
                if c.ok { "ok" } else { "failed" }.to_string(),
            ];
            row.extend(
                FIT_METRICS
                    .iter()
                    .map(|m| fmt17(c.final_metrics.get(*m).copied().unwrap_or(f64::NAN))),
            );
            row.extend(
                FIT_METRICS
                    .iter()
                    .map(|m| fmt17(c.slopes.get(*m).copied().unwrap_or(f64::NAN))),
            );
            row.push(csv_escape(c.error.as_deref().unwrap_or("")));
            csv_row(&mut out, row);
        }
        out
    }
}

fn thread_pool(threads: Option<usize>) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::input(format!("cannot build thread pool: {e}")))
}

fn cell_dir(out: &Path, index: usize) -> PathBuf {
    out.join(format!("cell_{index:03}"))
}

/// Runs every grid cell (concurrently, at most `threads` at a time) into
/// `out/cell_NNN` and writes `sweep.csv` and `sweep.json`. Fails only when
/// the grid is invalid or every cell fails.
pub fn cmd_sweep(
    spec: &SweepSpec,
    out: &Path,
    with_charts: bool,
    threads: Option<usize>,
) -> Result<SweepReport> {
    let cells = spec.cells()?;
    std::fs::create_dir_all(out)?;
    let pool = thread_pool(threads)?;
    let results: Vec<Result<RunResult>> = pool.install(|| {
        cells
            .par_iter()
            .enumerate()
            .map(|(i, c)| cmd_run(c, &cell_dir(out, i), with_charts))
            .collect()
    });

    let mut first_error = None;
    let outcomes: Vec<CellOutcome> = results
        .into_iter()
        .enumerate()
        .map(|(i, r)| {
            let dir = cell_dir(out, i).display().to_string();
            let value = spec.values[i].clone();
            match r {
                Ok(res) => {
                    let slopes = res
                        .report
                        .rate_fits
                        .iter()
                        .filter_map(|(k, f)| f.fit.as_ref().map(|f| (k.clone(), f.slope)))
                        .collect();
                    CellOutcome {
                        index: i,
                        value,
                        dir,
                        ok: true,
                        error: None,
                        exit_code: None,
                        final_metrics: res.report.final_metrics,
                        slopes,
                    }
                }
                Err(e) => {
                    let outcome = CellOutcome {
                        index: i,
                        value,
                        dir,
                        ok: false,
                        error: Some(e.to_string()),
                        exit_code: Some(e.exit_code()),
                        final_metrics: BTreeMap::new(),
                        slopes: BTreeMap::new(),
                    };
                    first_error.get_or_insert(e);
                    outcome
                }
            }
        })
        .collect();
    let succeeded = outcomes.iter().filter(|c| c.ok).count();
    let report = SweepReport {
        name: spec.name.clone(),
        parameter: spec.parameter.clone(),
        failed: outcomes.len() - succeeded,
        succeeded,
        cells: outcomes,
    };
    std::fs::write(out.join("sweep.csv"), report.csv())?;
    std::fs::write(
        out.join("sweep.json"),
        serde_json::to_string_pretty(&report)? + "\n",
    )?;
    if with_charts {
        sweep_charts(out, &report)?;
    }
    match (succeeded, first_error) {
        (0, Some(e)) => Err(e),
        _ => Ok(report),
    }
}

fn sweep_charts(out: &Path, report: &SweepReport) -> Result<()> {
    for metric in ["minnorm_dist", "lag_gap", "feas"] {
        let mut series = Vec::new();
        for c in report.cells.iter().filter(|c| c.ok) {
            let table = charts::read_csv(&Path::new(&c.dir).join("metrics.csv"))?;
            if let Some(mut s) = charts::series_from_table(&table, "t", &[metric]).pop() {
                s.label = format!("{} = {}", report.parameter, c.value);
                series.push(s);
            }
        }
        Chart {
            title: format!("{metric} across the sweep"),
            x_label: "t".into(),
            y_label: metric.into(),
            x_scale: Scale::Log,
            y_scale: Scale::Log,
            series,
        }
        .write(&out.join(format!("sweep_{metric}.svg")))?;
    }
    Ok(())
}

/// Several runs on a shared horizon, compared metric by metric.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CompareSpec {
    #[serde(default = "default_name")]
    pub name: String,
    pub runs: Vec<RunSpec>,
    #[serde(default)]
    pub output: OutputSpec,
}

impl CompareSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

pub const COMPARE_METRICS: [&str; 5] = ["lag_gap", "phi_err", "feas", "minnorm_dist", "gradf_gap"];

#[derive(Clone, Debug)]
pub struct CompareResult {
    pub runs: Vec<RunResult>,
}

impl CompareResult {
    pub fn run(&self, name: &str) -> Option<&RunResult> {
        self.runs.iter().find(|r| r.resolved.spec.name == name)
    }

    /// Long-format table: one row per run and sample.
    pub fn compare_csv(&self) -> String {
        let mut out = String::new();
        let mut header = vec!["run".to_string(), "system".to_string(), "t".to_string()];
        header.extend(COMPARE_METRICS.iter().map(|m| m.to_string()));
        csv_row(&mut out, header);
        for r in &self.runs {
            for (i, t) in r.metrics.times.iter().enumerate() {
                let mut row = vec![
                    csv_escape(&r.resolved.spec.name),
                    r.report.system.clone(),
                    fmt17(*t),
                ];
                row.extend(
                    COMPARE_METRICS
                        .iter()
                        .map(|m| fmt17(metric_column(&r.metrics, m)[i])),
                );
                csv_row(&mut out, row);
            }
        }
        out
    }

    /// One row per run with the values at the end of the horizon.
    pub fn final_csv(&self) -> String {
        let mut out = String::new();
        let mut header = vec!["run".to_string(), "system".to_string(), "t".to_string()];
        header.extend(COMPARE_METRICS.iter().map(|m| m.to_string()));
        csv_row(&mut out, header);
        for r in &self.runs {
            let mut row = vec![
                csv_escape(&r.resolved.spec.name),
                r.report.system.clone(),
                fmt17(*r.metrics.times.last().unwrap_or(&f64::NAN)),
            ];
            row.extend(
                COMPARE_METRICS
                    .iter()
                    .map(|m| fmt17(*metric_column(&r.metrics, m).last().unwrap_or(&f64::NAN))),
            );
            csv_row(&mut out, row);
        }
        out
    }
}

/// Runs each member into `out/<run name>` and writes `compare.csv` and
/// `compare_final.csv`.
pub fn cmd_compare(
    spec: &CompareSpec,
    out: &Path,
    with_charts: bool,
    threads: Option<usize>,
) -> Result<CompareResult> {
    check_name(&spec.name)?;
    if spec.runs.is_empty() {
        return Err(Error::input("comparison has no runs"));
    }
    for (i, r) in spec.runs.iter().enumerate() {
        check_name(&r.name)?;
        if spec.runs[..i].iter().any(|o| o.name == r.name) {
            return Err(Error::input(format!(
                "duplicate run name {:?} in comparison",
                r.name
            )));
        }
    }
    std::fs::create_dir_all(out)?;
    let pool = thread_pool(threads)?;
    let runs: Vec<RunResult> = pool.install(|| {
        spec.runs
            .par_iter()
            .map(|r| cmd_run(r, &out.join(&r.name), with_charts))
            .collect::<Result<_>>()
    })?;
    let result = CompareResult { runs };
    std::fs::write(out.join("compare.csv"), result.compare_csv())?;
    std::fs::write(out.join("compare_final.csv"), result.final_csv())?;
    if with_charts {
        compare_charts(out)?;
    }
    Ok(result)
}

fn compare_charts(out: &Path) -> Result<()> {
    let table = charts::read_csv(&out.join("compare.csv"))?;
    let run_col = table
        .column("run")
        .ok_or_else(|| Error::input("compare.csv has no run column"))?;
    let mut names: Vec<String> = Vec::new();
    for row in &table.rows {
        if !names.contains(&row[run_col]) {
            names.push(row[run_col].clone());
        }
    }
    for metric in COMPARE_METRICS {
        let series = names
            .iter()
            .filter_map(|name| {
                let sub = charts::Table {
                    header: table.header.clone(),
                    rows: table
                        .rows
                        .iter()
                        .filter(|r| &r[run_col] == name)
                        .cloned()
                        .collect(),
                };
                let mut s = charts::series_from_table(&sub, "t", &[metric]).pop()?;
                s.label = name.clone();
                Some(s)
            })
            .collect();
        Chart {
            title: format!("{metric} by system"),
            x_label: "t".into(),
            y_label: metric.into(),
            x_scale: Scale::Log,
            y_scale: Scale::Log,
            series,
        }
        .write(&out.join(format!("compare_{metric}.svg")))?;
    }
    Ok(())
}

/// Overrides accepted by the presets. Options a preset does not use are rejected.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PresetOptions {
    /// Exponent of the preset's swept schedule.
    pub r: Option<f64>,
    /// Switches the Tikhonov term on or off.
    pub eps_on: Option<bool>,
    /// `(m, n, e, d)` of the four-variable instance.
    pub mned: Option<[f64; 4]>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Preset {
    Run(RunSpec),
    Sweep(SweepSpec),
    Compare(CompareSpec),
}

pub const PRESETS: [&str; 7] = [
    "example1-fig1",
    "example1-fig1-sweep",
    "example1-strong",
    "example2-tikhonov",
    "example2-second-order-dual",
    "example2-rescaled-alm",
    "example2-compare",
];

const PRESET_SAMPLES: usize = 400;

fn example1_run(name: &str, mned: [f64; 4], system: SystemSpec, horizon: [f64; 2]) -> RunSpec {
    let [m, n, e, d] = mned;
    RunSpec {
        name: name.to_string(),
        problem: ProblemSpec::Builtin(Builtin::Example1 { m, n, e, d }),
        system,
        horizon,
        initial: InitialSpec {
            x: vec![1.0; 3],
            y: vec![1.0],
            lam: vec![1.0],
            vx: Some(vec![1.0; 3]),
            vy: Some(vec![1.0]),
            vlam: None,
        },
        integrator: IntegratorSpec::default(),
        sampling: Sampling::LogSpaced(PRESET_SAMPLES),
        output: OutputSpec::default(),
    }
}

fn example2_run(name: &str, system: SystemSpec) -> RunSpec {
    let second_order = !matches!(system, SystemSpec::TikhonovPd { .. });
    RunSpec {
        name: name.to_string(),
        problem: ProblemSpec::Builtin(Builtin::Example2),
        system,
        horizon: [1.0, 100.0],
        initial: InitialSpec {
            x: vec![1.0; 2],
            y: vec![1.0; 2],
            lam: vec![1.0; 2],
            vx: Some(vec![1.0; 2]),
            vy: Some(vec![1.0; 2]),
            vlam: second_order.then(|| vec![1.0; 2]),
        },
        integrator: IntegratorSpec::default(),
        sampling: Sampling::LogSpaced(PRESET_SAMPLES),
        output: OutputSpec::default(),
    }
}

fn example2_tikhonov(r: f64) -> SystemSpec {
    SystemSpec::TikhonovPd {
        gamma: 10.0,
        delta: 0.2,
        beta: CurveSpec::Power { c: 1.0, r },
        eps: CurveSpec::Decay { c: 1.0, r: 2.0 },
    }
}

fn example2_second_order_dual() -> SystemSpec {
    SystemSpec::SecondOrderDual {
        gamma: CurveSpec::Constant { c: 10.0 },
        delta: CurveSpec::Constant { c: 0.2 },
    }
}

fn example2_rescaled_alm() -> SystemSpec {
    SystemSpec::RescaledAlm {
        gamma: CurveSpec::Constant { c: 10.0 },
        beta: CurveSpec::Power { c: 1.0, r: 0.1 },
        a: CurveSpec::Constant { c: 0.2 },
        mu: 1.0,
    }
}

fn fig1_system(r: f64) -> SystemSpec {
    SystemSpec::TikhonovPd {
        gamma: 0.25,
        delta: 9.0,
        beta: CurveSpec::Power { c: 1.0, r: 0.5 },
        eps: CurveSpec::Decay { c: 3.0, r },
    }
}

/// Name of an exponent for file and run names, e.g. `0.4` -> `r0.4`.
fn r_label(r: f64) -> String {
    format!("r{r}")
}

/// Builds a named preset, applying the allowed overrides.
pub fn preset(name: &str, opts: &PresetOptions) -> Result<Preset> {
    let reject = |what: &str, given: bool| -> Result<()> {
        if given {
            Err(Error::input(format!("preset {name} does not take {what}")))
        } else {
            Ok(())
        }
    };
    let mned = opts.mned.unwrap_or([5.0, 1.0, 1.0, 5.0]);
    Ok(match name {
        "example1-fig1" => {
            reject("--eps", opts.eps_on.is_some())?;
            let r = opts.r.unwrap_or(1.6);
            Preset::Run(example1_run(name, mned, fig1_system(r), [1.0, 100.0]))
        }
        "example1-fig1-sweep" => {
            reject("--r", opts.r.is_some())?;
            reject("--eps", opts.eps_on.is_some())?;
            Preset::Sweep(SweepSpec {
                name: name.to_string(),
                base: example1_run("example1-fig1", mned, fig1_system(1.6), [1.0, 100.0]),
                parameter: "/system/eps/r".to_string(),
                values: [1.2, 1.4, 1.6, 1.8]
                    .iter()
                    .map(|v| serde_json::json!(v))
                    .collect(),
                output: OutputSpec::default(),
            })
        }
        "example1-strong" => {
            reject("--r", opts.r.is_some())?;
            let eps = if opts.eps_on.unwrap_or(true) {
                CurveSpec::Decay { c: 15.0, r: 1.6 }
            } else {
                CurveSpec::Zero
            };
            let system = SystemSpec::TikhonovPd {
                gamma: 10.0,
                delta: 0.5,
                beta: CurveSpec::Power { c: 1.0, r: 0.5 },
                eps,
            };
            Preset::Run(example1_run(name, mned, system, [1.0, 30.0]))
        }
        "example2-tikhonov" => {
            reject("--eps", opts.eps_on.is_some())?;
            reject("--mned", opts.mned.is_some())?;
            Preset::Run(example2_run(name, example2_tikhonov(opts.r.unwrap_or(0.4))))
        }
        "example2-second-order-dual" | "example2-rescaled-alm" | "example2-compare" => {
            reject("--r", opts.r.is_some())?;
            reject("--eps", opts.eps_on.is_some())?;
            reject("--mned", opts.mned.is_some())?;
            match name {
                "example2-second-order-dual" => {
                    Preset::Run(example2_run(name, example2_second_order_dual()))
                }
                "example2-rescaled-alm" => Preset::Run(example2_run(name, example2_rescaled_alm())),
                _ => {
                    let mut runs: Vec<RunSpec> = [0.0, 0.1, 0.4]
                        .iter()
                        .map(|&r| {
                            example2_run(
                                &format!("tikhonov_pd_{}", r_label(r)),
                                example2_tikhonov(r),
                            )
                        })
                        .collect();
                    runs.push(example2_run(
                        "second_order_dual",
                        example2_second_order_dual(),
                    ));
                    runs.push(example2_run("rescaled_alm", example2_rescaled_alm()));
                    Preset::Compare(CompareSpec {
                        name: name.to_string(),
                        runs,
                        output: OutputSpec::default(),
                    })
                }
            }
        }
        other => {
            return Err(Error::input(format!(
                "unknown preset {other:?}; available: {}",
                PRESETS.join(", ")
            )))
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_run() -> RunSpec {
        let mut spec = example2_run("small", example2_tikhonov(0.4));
        spec.horizon = [1.0, 5.0];
        spec.sampling = Sampling::LogSpaced(40);
        spec
    }

    #[test]
    fn resolve_fills_defaults() {
        let text = r#"{
            "problem": {"builtin": "example2"},
            "system": {"kind": "tikhonov_pd", "gamma": 10, "delta": 0.2,
                       "beta": {"family": "power", "c": 1, "r": 0.4},
                       "eps": {"family": "decay", "c": 1, "r": 2}},
            "horizon": [1, 10],
            "initial": {"x": [1, 1], "y": [1, 1], "lam": [1, 1]}
        }"#;
        let spec = RunSpec::from_json(text).unwrap();
        let r = spec.resolve().unwrap();
        assert_eq!(r.spec.name, "run");
        assert_eq!(r.spec.initial.vx, Some(vec![0.0, 0.0]));
        assert_eq!(r.spec.integrator.h_max, Some(0.9));
        assert_eq!(r.spec.integrator.rtol, Some(1e-8));
        let again = RunSpec::from_json(&r.spec.to_json().unwrap()).unwrap();
        assert_eq!(again, r.spec);
        assert_eq!(again.resolve().unwrap().spec, r.spec);
    }

    #[test]
    fn schema_errors_are_input_errors() {
        let bad = [
            r#"{"problem": {"builtin": "example2"}, "system": {"kind": "second_order_dual",
                "gamma": {"family": "constant", "c": 10}, "delta": {"family": "constant", "c": 0.2},
                "beta": {"family": "power", "c": 1, "r": 0.1}},
                "horizon": [1, 10], "initial": {"x": [1, 1], "y": [1, 1], "lam": [1, 1]}}"#,
            r#"{"problem": {"builtin": "example2"}, "system": {"kind": "tikhonov_pd", "gamma": 10, "delta": 0.2,
                "beta": {"family": "power", "c": 1, "r": 0.4}, "eps": {"family": "zero"}},
                "horizon": [1, 10], "initial": {"x": [1, 1], "y": [1, 1], "lam": [1, 1]}, "extra": 1}"#,
        ];
        for text in bad {
            let err = RunSpec::from_json(text).unwrap_err();
            assert_eq!(err.exit_code(), 2, "{err}");
        }
        let mut spec = small_run();
        spec.initial.x = vec![1.0];
        assert_eq!(spec.resolve().unwrap_err().exit_code(), 2);
        let mut spec = small_run();
        spec.horizon = [0.0, 5.0];
        assert!(spec.resolve().is_err());
        let mut spec = small_run();
        spec.initial.vlam = Some(vec![0.0, 0.0]);
        assert!(spec.resolve().is_err());
    }

    #[test]
    fn execute_produces_consistent_tables() {
        let res = execute(&small_run()).unwrap();
        let csv = res.metrics_csv();
        let table = charts::parse_csv(&csv).unwrap();
        assert_eq!(table.header.len(), METRIC_COLUMNS.len());
        assert_eq!(table.rows.len(), 40);
        let traj = charts::parse_csv(&res.trajectory_csv()).unwrap();
        assert_eq!(traj.header.len(), 1 + res.trajectory.layout.len());
        let t: Vec<f64> = traj.numeric("t").unwrap();
        assert_eq!(t, res.trajectory.times);
        assert!(res.report.regime.is_some());
        assert!(res.report.energy.is_some());
        let rt: f64 = table.rows[5][0].parse().unwrap();
        assert_eq!(rt.to_bits(), res.metrics.times[5].to_bits());
    }

    #[test]
    fn baselines_report_no_energies() {
        let mut spec = example2_run("b", example2_second_order_dual());
        spec.horizon = [1.0, 3.0];
        spec.sampling = Sampling::LogSpaced(20);
        let res = execute(&spec).unwrap();
        assert!(res.energies.is_none() && res.report.regime.is_none());
        let table = charts::parse_csv(&res.metrics_csv()).unwrap();
        assert!(table.numeric("E").unwrap().iter().all(|v| v.is_nan()));
        assert!(table
            .numeric("vel_lam")
            .unwrap()
            .iter()
            .all(|v| v.is_finite()));
    }

    #[test]
    fn validate_reports_earliest_valid_time() {
        let Preset::Run(spec) = preset("example1-fig1", &PresetOptions::default()).unwrap() else {
            panic!("expected a run preset");
        };
        let (text, regime) = cmd_validate(&spec).unwrap();
        assert_eq!(regime.unwrap().earliest_valid_t, 4.5);
        assert!(text.contains("earliest_valid_t = 4.5"), "{text}");
    }

    #[test]
    fn validate_without_tikhonov_term() {
        let Preset::Run(spec) = preset(
            "example1-strong",
            &PresetOptions {
                eps_on: Some(false),
                ..Default::default()
            },
        )
        .unwrap() else {
            panic!("expected a run preset");
        };
        let (text, regime) = cmd_validate(&spec).unwrap();
        assert!(!regime.unwrap().strong_convergence.applicable);
        assert!(
            text.contains("strong_convergence: not applicable"),
            "{text}"
        );
    }

    #[test]
    fn presets_resolve_and_reject_unused_options() {
        for name in PRESETS {
            let p = preset(name, &PresetOptions::default()).unwrap();
            match p {
                Preset::Run(s) => {
                    s.resolve().unwrap();
                }
                Preset::Sweep(s) => assert_eq!(s.cells().unwrap().len(), 4),
                Preset::Compare(c) => {
                    assert_eq!(c.runs.len(), 5);
                    for r in &c.runs {
                        r.resolve().unwrap();
                    }
                }
            }
        }
        assert!(preset(
            "example2-compare",
            &PresetOptions {
                r: Some(0.1),
                ..Default::default()
            }
        )
        .is_err());
        assert!(preset("nope", &PresetOptions::default()).is_err());
    }

    #[test]
    fn sweep_cells_patch_the_pointer() {
        let Preset::Sweep(s) = preset("example1-fig1-sweep", &PresetOptions::default()).unwrap()
        else {
            panic!("expected a sweep preset");
        };
        let cells = s.cells().unwrap();
        assert_eq!(cells[0].system, fig1_system(1.2));
        let mut empty = s.clone();
        empty.values.clear();
        assert_eq!(empty.cells().unwrap_err().exit_code(), 2);
        let mut bad = s;
        bad.parameter = "/system/nope".into();
        assert!(bad.cells().is_err());
    }

    #[test]
    fn csv_escaping() {
        assert_eq!(csv_escape("a,b"), "\"a,b\"");
        assert_eq!(csv_escape("plain"), "plain");
        assert_eq!(value_cell(&serde_json::json!(1.5)), "1.5000000000000000e0");
        assert_eq!(
            value_cell(&serde_json::json!({"a": 1})),
            "\"{\"\"a\"\":1}\""
        );
    }
}
