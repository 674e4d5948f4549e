//! `clearsens`: critical clearing times, CCT sensitivities, sweeps, region
//! maps and trajectory traces for scenario files.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use clearsens_core::integrator::fmt_num;
use clearsens_core::{
    find_cct, fd_cct_sensitivity, integrate, load_scenario, map_csr, run_sweep, sensitivity_report,
    write_sweep_csv, CctOptions, Error, FdSpec, GridSpec, IntegrationOptions, Scenario, SweepSpec,
};
use nalgebra::DVector;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "clearsens", version, about = "CCT and CCT sensitivity of constrained fault scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Scenario file (TOML).
    #[arg(long)]
    scenario: PathBuf,
    /// Parameter override, repeatable.
    #[arg(long = "set", value_name = "NAME=VALUE")]
    set: Vec<String>,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Integration step, seconds.
    #[arg(long)]
    step: Option<f64>,
    /// Post-fault horizon, seconds.
    #[arg(long)]
    tmax: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Critical clearing time and category as JSON.
    Cct {
        #[command(flatten)]
        common: Common,
    },
    /// Formula sensitivities of the CCT to every parameter, as JSON.
    Sens {
        #[command(flatten)]
        common: Common,
        /// Also run the finite-difference oracle.
        #[arg(long)]
        verify: bool,
        /// Restrict to these parameters.
        #[arg(long = "param")]
        params: Vec<String>,
    },
    /// CCT and sensitivity over a range of one parameter, as CSV.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, conflicts_with = "range", allow_hyphen_values = true)]
        values: Option<String>,
        /// `start:step:stop`, inclusive.
        #[arg(long, allow_hyphen_values = true)]
        range: Option<String>,
        #[arg(long)]
        verify: bool,
    },
    /// Grid labels of the post-fault region (CSV) plus boundary data (JSON
    /// next to it, same stem).
    Csr {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 201)]
        nx: usize,
        #[arg(long, default_value_t = 201)]
        ny: usize,
        /// `min:max` of the first state.
        #[arg(long, default_value = "-1:3", allow_hyphen_values = true)]
        x_range: String,
        /// `min:max` of the second state.
        #[arg(long, default_value = "-2:2", allow_hyphen_values = true)]
        y_range: String,
    },
    /// One trajectory with its sensitivities, as CSV.
    Trace {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value_t = Phase::Fault)]
        phase: Phase,
        /// Seconds.
        #[arg(long, default_value_t = 1.0)]
        duration: f64,
        /// Comma-separated initial state; the pre-fault SEP when omitted.
        #[arg(long, allow_hyphen_values = true)]
        x0: Option<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Phase {
    Pre,
    Fault,
    Post,
}

enum Failure {
    Usage(String),
    Solver(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        if e.is_input_error() {
            Failure::Usage(format!("{}: {e}", e.name()))
        } else {
            Failure::Solver(e)
        }
    }
}

type Run<T> = std::result::Result<T, Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(format!("InvalidArgument: {}", msg.into()))
}

fn parse_list(s: &str, what: &str) -> Run<Vec<f64>> {
    s.split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| v.parse::<f64>().map_err(|_| usage(format!("bad {what} entry '{v}'"))))
        .collect()
}

fn parse_pair(s: &str, what: &str) -> Run<(f64, f64)> {
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        [a, b] => match (a.trim().parse(), b.trim().parse()) {
            (Ok(a), Ok(b)) if a < b => Ok((a, b)),
            _ => Err(usage(format!("bad {what} '{s}', expected min:max"))),
        },
        _ => Err(usage(format!("bad {what} '{s}', expected min:max"))),
    }
}

struct Loaded {
    sc: Scenario,
    opts: CctOptions,
}

fn load(common: &Common) -> Run<Loaded> {
    let mut sc = load_scenario(&common.scenario)?;
    for kv in &common.set {
        let (name, value) = kv
            .split_once('=')
            .ok_or_else(|| usage(format!("--set expects NAME=VALUE, got '{kv}'")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| usage(format!("--set {name}: '{value}' is not a number")))?;
        sc.set_param(name.trim(), value)
            .map_err(|e| usage(format!("--set {kv}: {e}")))?;
    }
    let mut opts = CctOptions::default();
    if let Some(h) = common.step {
        if !(h > 0.0 && h.is_finite()) {
            return Err(usage(format!("--step must be positive, got {h}")));
        }
        opts.step = h;
    }
    if let Some(t) = common.tmax {
        if !(t > 0.0 && t.is_finite()) {
            return Err(usage(format!("--tmax must be positive, got {t}")));
        }
        opts.t_max = Some(t);
        sc.t_max = t;
    }
    Ok(Loaded { sc, opts })
}

/// Rounds every number in `v` to 12 significant digits.
fn round_json(v: Value) -> Value {
    match v {
        Value::Number(n) => match n.as_f64() {
            Some(x) if !n.is_i64() && !n.is_u64() => fmt_num(x)
                .parse::<f64>()
                .ok()
                .and_then(serde_json::Number::from_f64)
                .map(Value::Number)
                .unwrap_or(Value::Null),
            _ => Value::Number(n),
        },
        Value::Array(a) => Value::Array(a.into_iter().map(round_json).collect()),
        Value::Object(o) => Value::Object(o.into_iter().map(|(k, v)| (k, round_json(v))).collect()),
        other => other,
    }
}

fn to_json<T: serde::Serialize>(v: &T) -> Run<String> {
    let v = serde_json::to_value(v).map_err(|e| Failure::Solver(Error::Io(e.to_string())))?;
    let mut s = serde_json::to_string_pretty(&round_json(v)).expect("json values always print");
    s.push('\n');
    Ok(s)
}

/// Writes the finished output in one go so that failures never leave partial files.
fn emit(out: Option<&Path>, text: &[u8]) -> Run<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| usage(format!("{}: {e}", path.display()))),
        None => {
            use std::io::Write;
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text).map_err(|e| usage(e.to_string()))
        }
    }
}

fn cmd_cct(common: &Common) -> Run<()> {
    let Loaded { sc, opts } = load(common)?;
    let res = find_cct(&sc, &sc.p0, &opts)?;
    emit(common.out.as_deref(), to_json(&res)?.as_bytes())
}

fn cmd_sens(common: &Common, verify: bool, only: &[String]) -> Run<()> {
    let Loaded { sc, opts } = load(common)?;
    for name in only {
        sc.param_index(name).map_err(|e| usage(e.to_string()))?;
    }
    let res = find_cct(&sc, &sc.p0, &opts)?;
    let report = sensitivity_report(&sc, &sc.p0, &res, opts.step)?;
    let fd = FdSpec {
        step: opts.step,
        t_max: opts.t_max,
        ..FdSpec::default()
    };
    let mut records = Vec::new();
    for (j, (name, value)) in report.into_iter().enumerate() {
        if !only.is_empty() && !only.contains(&name) {
            continue;
        }
        let mut rec = match value {
            Ok(v) => json!({
                "param": name,
                "category": v.category.number(),
                "dtcr_dp": v.dtcr_dp,
                "denominator": v.denominator,
            }),
            Err(e) => json!({
                "param": name,
                "category": res.category.number(),
                "dtcr_dp": null,
                "denominator": null,
                "error": e.name(),
            }),
        };
        if verify {
            match fd_cct_sensitivity(&sc, &sc.p0, j, &fd) {
                Ok(o) => {
                    rec["oracle_fd"] = json!(o);
                    if let Some(f) = rec["dtcr_dp"].as_f64() {
                        let rel = if o != 0.0 { (f - o).abs() / o.abs() } else { (f - o).abs() };
                        rec["rel_err"] = json!(rel);
                    }
                }
                Err(e) => rec["oracle_error"] = json!(e.name()),
            }
        }
        records.push(rec);
    }
    emit(common.out.as_deref(), to_json(&records)?.as_bytes())
}

fn cmd_sweep(common: &Common, param: &str, values: Option<&str>, range: Option<&str>, verify: bool) -> Run<()> {
    let Loaded { sc, opts } = load(common)?;
    let j = sc.param_index(param).map_err(|e| usage(e.to_string()))?;
    let mut spec = match (values, range) {
        (Some(v), _) => SweepSpec::new(j, parse_list(v, "--values")?),
        (None, Some(r)) => {
            let v = parse_list(&r.replace(':', ","), "--range")?;
            let [start, step, stop] = v[..] else {
                return Err(usage(format!("--range expects start:step:stop, got '{r}'")));
            };
            SweepSpec::range(j, start, stop, step).map_err(|e| usage(e.to_string()))?
        }
        (None, None) => return Err(usage("sweep needs --values or --range")),
    };
    spec.verify = verify;
    spec.cct = opts;
    spec.fd.step = opts.step;
    spec.fd.t_max = opts.t_max;
    let rows = run_sweep(&sc, &sc.p0, &spec).map_err(|e| match e {
        Error::InvalidParameter(m) => usage(m),
        e => e.into(),
    })?;
    let mut buf = Vec::new();
    write_sweep_csv(&rows, &mut buf)?;
    emit(common.out.as_deref(), &buf)
}

fn cmd_csr(common: &Common, nx: usize, ny: usize, x_range: &str, y_range: &str) -> Run<()> {
    let out = common
        .out
        .as_deref()
        .ok_or_else(|| usage("csr needs --out for the cell CSV"))?;
    if nx < 2 || ny < 2 {
        return Err(usage("--nx and --ny must be at least 2"));
    }
    let Loaded { sc, opts } = load(common)?;
    let spec = GridSpec {
        x_range: parse_pair(x_range, "--x-range")?,
        y_range: parse_pair(y_range, "--y-range")?,
        nx,
        ny,
        step: opts.step,
        t_max: opts.t_max,
    };
    let grid = map_csr(&sc, &sc.p0, &spec)?;
    let mut cells = Vec::new();
    grid.write_cells_csv(&mut cells)?;
    let summary = to_json(&grid)?;
    emit(Some(out), &cells)?;
    emit(Some(&out.with_extension("json")), summary.as_bytes())
}

fn cmd_trace(common: &Common, phase: Phase, duration: f64, x0: Option<&str>) -> Run<()> {
    if !(duration >= 0.0 && duration.is_finite()) {
        return Err(usage(format!("--duration must be non-negative, got {duration}")));
    }
    let Loaded { sc, opts } = load(common)?;
    let p = sc.p0.clone();
    let x0 = match x0 {
        Some(s) => {
            let v = parse_list(s, "--x0")?;
            if v.len() != sc.dim() {
                return Err(usage(format!("--x0 needs {} entries, got {}", sc.dim(), v.len())));
            }
            DVector::from_vec(v)
        }
        None => sc.pre_sep(&p)?.x,
    };
    let (model, h) = match phase {
        Phase::Pre => (&sc.pre, None),
        Phase::Fault => (&sc.fault, Some(&sc.h_fault)),
        Phase::Post => (&sc.post, Some(&sc.h_post)),
    };
    let io = IntegrationOptions {
        step: opts.step,
        ..IntegrationOptions::default()
    };
    let tr = integrate(model, h, &x0, &p, duration, &io)?;
    let mut buf = Vec::new();
    tr.write_csv(&mut buf)?;
    emit(common.out.as_deref(), &buf)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Cct { common } => cmd_cct(common),
        Command::Sens { common, verify, params } => cmd_sens(common, *verify, params),
        Command::Sweep {
            common,
            param,
            values,
            range,
            verify,
        } => cmd_sweep(common, param, values.as_deref(), range.as_deref(), *verify),
        Command::Csr {
            common,
            nx,
            ny,
            x_range,
            y_range,
        } => cmd_csr(common, *nx, *ny, x_range, y_range),
        Command::Trace {
            common,
            phase,
            duration,
            x0,
        } => cmd_trace(common, *phase, *duration, x0.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Solver(e)) => {
            eprintln!("error: {}: {e}", e.name());
            ExitCode::from(1)
        }
    }
}
