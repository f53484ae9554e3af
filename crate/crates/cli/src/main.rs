//! `pdflow`: run, validate, sweep and compare primal-dual flow simulations.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pdflow_core::experiment::{
    cmd_compare, cmd_run, cmd_sweep, cmd_validate, preset, CompareSpec, Preset, PresetOptions,
    RunSpec, SweepSpec, PRESETS,
};
use pdflow_core::{Error, Result};

/// Prints a line to stdout, ignoring a closed pipe.
macro_rules! say {
    ($($arg:tt)*) => {{
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

#[derive(Parser, Debug)]
#[command(
    name = "pdflow",
    version,
    about = "Primal-dual flow simulations with time scaling and Tikhonov regularization"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one run and write trajectory.csv, metrics.csv and report.json.
    Run(Common),
    /// Check a run's schedules against the convergence hypotheses without simulating.
    Validate(Common),
    /// Run a grid over one parameter of a base run.
    Sweep(SweepArgs),
    /// Run several systems and tabulate their metrics side by side.
    Compare(Common),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum OnOff {
    On,
    Off,
}

#[derive(Args, Debug)]
struct Common {
    /// Specification file (JSON).
    #[arg(long, conflicts_with = "preset")]
    spec: Option<PathBuf>,
    /// Built-in experiment.
    #[arg(long, value_parser = clap::builder::PossibleValuesParser::new(PRESETS))]
    preset: Option<String>,
    /// Schedule exponent override for presets that take one.
    #[arg(long, requires = "preset", allow_negative_numbers = true)]
    r: Option<f64>,
    /// Tikhonov term on or off for presets that take it.
    #[arg(long, requires = "preset")]
    eps: Option<OnOff>,
    /// Instance coefficients m,n,e,d for presets that take them.
    #[arg(
        long,
        requires = "preset",
        value_delimiter = ',',
        allow_negative_numbers = true
    )]
    mned: Option<Vec<f64>>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write SVG charts.
    #[arg(long)]
    charts: bool,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    common: Common,
    /// JSON pointer of the swept field; turns a run specification into a sweep.
    #[arg(long)]
    param: Option<String>,
    /// Comma-separated grid values (JSON literals) used with --param.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    values: Option<Vec<String>>,
}

enum Loaded {
    Run(RunSpec),
    Sweep(SweepSpec),
    Compare(CompareSpec),
}

fn kind_of(loaded: &Loaded) -> &'static str {
    match loaded {
        Loaded::Run(_) => "run",
        Loaded::Sweep(_) => "sweep",
        Loaded::Compare(_) => "compare",
    }
}

fn load(c: &Common, want: &str) -> Result<Loaded> {
    if let Some(name) = &c.preset {
        let mned = match c.mned.as_deref() {
            Some([m, n, e, d]) => Some([*m, *n, *e, *d]),
            Some(_) => return Err(Error::Input("--mned takes four values".into())),
            None => None,
        };
        let opts = PresetOptions {
            r: c.r,
            eps_on: c.eps.map(|e| e == OnOff::On),
            mned,
        };
        return Ok(match preset(name, &opts)? {
            Preset::Run(s) => Loaded::Run(s),
            Preset::Sweep(s) => Loaded::Sweep(s),
            Preset::Compare(s) => Loaded::Compare(s),
        });
    }
    let path = c
        .spec
        .as_ref()
        .ok_or_else(|| Error::Input("one of --spec or --preset is required".into()))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Input(format!("cannot read spec {}: {e}", path.display())))?;
    Ok(match want {
        "sweep" => Loaded::Sweep(SweepSpec::from_json(&text)?),
        "compare" => Loaded::Compare(CompareSpec::from_json(&text)?),
        _ => Loaded::Run(RunSpec::from_json(&text)?),
    })
}

fn out_dir(c: &Common, from_spec: &Option<String>, name: &str) -> PathBuf {
    c.out
        .clone()
        .or_else(|| from_spec.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| Path::new("pdflow-out").join(name))
}

fn threads() -> Result<Option<usize>> {
    match std::env::var("PDFLOW_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Input(format!(
                "PDFLOW_THREADS must be a positive integer, got {v:?}"
            ))),
        },
        Err(_) => Ok(None),
    }
}

fn wrong_kind(cmd: &str, got: &Loaded) -> Error {
    Error::Input(format!(
        "{cmd} needs a {cmd} specification, got a {} preset",
        kind_of(got)
    ))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(c) => match load(&c, "run")? {
            Loaded::Run(spec) => {
                let out = out_dir(&c, &spec.output.dir, &spec.name);
                let res = cmd_run(&spec, &out, c.charts || spec.output.charts)?;
                say!("{}: wrote {}", spec.name, out.display());
                for (k, v) in &res.report.final_metrics {
                    say!("  {k} = {v:e}");
                }
                for w in &res.report.warnings {
                    eprintln!("warning: {w}");
                }
                Ok(())
            }
            other => Err(wrong_kind("run", &other)),
        },
        Command::Validate(c) => match load(&c, "run")? {
            Loaded::Run(spec) => {
                let (text, _) = cmd_validate(&spec)?;
                say!("{}", text.trim_end());
                Ok(())
            }
            other => Err(wrong_kind("validate", &other)),
        },
        Command::Sweep(s) => {
            let c = &s.common;
            let spec = match (&s.param, &s.values) {
                (Some(param), Some(values)) => {
                    let base = match load(c, "run")? {
                        Loaded::Run(r) => r,
                        other => return Err(wrong_kind("run", &other)),
                    };
                    let values = values
                        .iter()
                        .map(|v| {
                            serde_json::from_str(v)
                                .map_err(|e| Error::Input(format!("bad grid value {v:?}: {e}")))
                        })
                        .collect::<Result<Vec<_>>>()?;
                    SweepSpec {
                        name: base.name.clone(),
                        base,
                        parameter: param.clone(),
                        values,
                        output: Default::default(),
                    }
                }
                (None, None) => match load(c, "sweep")? {
                    Loaded::Sweep(s) => s,
                    other => return Err(wrong_kind("sweep", &other)),
                },
                _ => {
                    return Err(Error::Input(
                        "--param and --values must be given together".into(),
                    ))
                }
            };
            let out = out_dir(c, &spec.output.dir, &spec.name);
            let report = cmd_sweep(&spec, &out, c.charts || spec.output.charts, threads()?)?;
            say!(
                "{}: {} of {} cells succeeded; wrote {}",
                spec.name,
                report.succeeded,
                report.cells.len(),
                out.display()
            );
            for cell in report.cells.iter().filter(|c| !c.ok) {
                eprintln!(
                    "cell {} failed: {}",
                    cell.index,
                    cell.error.as_deref().unwrap_or("")
                );
            }
            Ok(())
        }
        Command::Compare(c) => match load(&c, "compare")? {
            Loaded::Compare(spec) => {
                let out = out_dir(&c, &spec.output.dir, &spec.name);
                let res = cmd_compare(&spec, &out, c.charts || spec.output.charts, threads()?)?;
                say!("{}: wrote {}", spec.name, out.display());
                for r in &res.runs {
                    let get = |k: &str| r.report.final_metrics.get(k).copied().unwrap_or(f64::NAN);
                    say!(
                        "  {:<24} phi_err = {:e}  feas = {:e}",
                        r.resolved.spec.name,
                        get("phi_err"),
                        get("feas")
                    );
                }
                Ok(())
            }
            other => Err(wrong_kind("compare", &other)),
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
