use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use monoapprox::bernstein::{shift_bound, total_error_bound, uniform_grid};
use monoapprox::phi::basin_probe;
use monoapprox::rational::closure_suite;
use monoapprox::{BernsteinOperator, Engine, ErrorBoundInputs, TargetFunction};
use serde::Serialize;
use serde_json::json;

use crate::error::{CliError, Result};
use crate::input;
use crate::{Common, Format, PhiArgs};

/// Tolerance of the φ convergence probes.
const PROBE_TOL: f64 = 1e-6;

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn format_for(common: &Common, default: Format, allowed: &[Format]) -> Result<Format> {
    let f = common.format.unwrap_or(default);
    if allowed.contains(&f) {
        Ok(f)
    } else {
        Err(CliError::input(format!("format {f:?} is not available for this command")))
    }
}

/// Artifact goes to `--out` or stdout; notes go wherever the artifact does not.
struct Sink<'a> {
    out: Option<&'a Path>,
}

impl<'a> Sink<'a> {
    fn new(common: &'a Common) -> Self {
        Sink {
            out: common.out.as_deref(),
        }
    }

    fn artifact(&self, text: &str) -> Result<()> {
        match self.out {
            Some(path) => fs::write(path, text).map_err(|e| CliError::Input(format!("{}: {e}", path.display()))),
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout.write_all(text.as_bytes())?;
                Ok(stdout.flush()?)
            }
        }
    }

    fn note(&self, line: &str) {
        if self.out.is_some() {
            println!("{line}");
        } else {
            eprintln!("{line}");
        }
    }
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| CliError::Internal(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

pub fn order(common: &Common, space: &Path, family: Option<&Path>) -> Result<()> {
    let format = format_for(common, Format::Text, &[Format::Text, Format::Json])?;
    let order = input::load_space(space)?;
    let pairs = order.pairs().count();
    let family = family.map(input::load_family).transpose()?;
    let summary = match &family {
        Some(f) => {
            if f.point_count() != order.size() {
                return Err(CliError::Input(format!(
                    "family has {} points, space has {}",
                    f.point_count(),
                    order.size()
                )));
            }
            let generates = monoapprox::order::generates(&order, f)?;
            let zeros: Vec<usize> = monoapprox::order::common_zero_set(f).into_iter().collect();
            Some((f.len(), generates, zeros))
        }
        None => None,
    };

    let text = match format {
        Format::Json => {
            let mut report = json!({
                "preorder": "ok",
                "antisymmetric": order.is_order(),
                "size": order.size(),
                "pairs": pairs,
            });
            if let Some((count, generates, zeros)) = &summary {
                report["generators"] = json!(count);
                report["generates"] = json!(generates);
                report["zero_set"] = json!(zeros);
            }
            to_json(&report)?
        }
        _ => {
            let mut s = String::new();
            writeln!(s, "preorder: ok; antisymmetric: {}", yes_no(order.is_order())).unwrap();
            writeln!(s, "points: {}; related pairs: {pairs}", order.size()).unwrap();
            if let Some((count, generates, zeros)) = &summary {
                writeln!(s, "generators: {count}; family generates the order: {}", yes_no(*generates)).unwrap();
                let listed: Vec<String> = zeros.iter().map(|z| z.to_string()).collect();
                writeln!(s, "N_S = {{{}}}", listed.join(", ")).unwrap();
            }
            s
        }
    };
    Sink::new(common).artifact(&text)
}

pub fn approximate(common: &Common, space: &Path, family: &Path, target: &Path, n: usize, phi: &PhiArgs) -> Result<()> {
    let format = format_for(common, Format::Json, &[Format::Json, Format::Csv])?;
    if n == 0 {
        return Err(CliError::input("n must be positive"));
    }
    let order = input::load_space(space)?;
    let family = input::load_family(family)?;
    let target = input::load_target(target)?;
    if target.len() != order.size() {
        return Err(CliError::Input(format!(
            "target has {} values, space has {} points",
            target.len(),
            order.size()
        )));
    }
    let phi = input::parse_phi(&phi.phi, phi.a)?;
    let engine = Engine::new(order, family, phi)?.with_max_iter(common.max_iter);
    let result = engine.approximate(&target, n)?;
    if !(result.sup_error < result.bound) {
        return Err(CliError::Internal(format!(
            "sup_error {} is not below {}",
            result.sup_error, result.bound
        )));
    }

    let text = match format {
        Format::Csv => {
            let mut s = String::from("point,target,approximant,abs_diff\n");
            for (i, (f, g)) in target.values().iter().zip(result.approximant.values()).enumerate() {
                writeln!(s, "{i},{},{},{}", num(*f), num(*g), num((f - g).abs())).unwrap();
            }
            s
        }
        _ => to_json(&result)?,
    };
    let sink = Sink::new(common);
    sink.artifact(&text)?;
    sink.note(&format!(
        "sup_error = {:.6e} < 3/n = {:.6e} ({} levels, {} phi steps)",
        result.sup_error, result.bound, result.levels, result.iterations_used
    ));
    Ok(())
}

pub struct BernsteinConfig {
    pub function: String,
    pub n: String,
    pub b: Option<f64>,
    pub grid: usize,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub per_x: bool,
}

#[derive(Serialize)]
struct ConvergenceRow {
    n: usize,
    sup_error: f64,
    shift_bound: f64,
    monotonicity_gap: f64,
    total_error_bound: Option<f64>,
}

#[derive(Serialize)]
struct PerXRow {
    n: usize,
    x: f64,
    r_n: f64,
    f: f64,
    abs_diff: f64,
}

/// `ε/2 + 2M/(4nη²)` when ε is given and the radius for ε/2 is known.
fn error_bound(cfg: &BernsteinConfig, f: &TargetFunction, b: f64, n: usize) -> Result<Option<f64>> {
    let Some(eps) = cfg.epsilon else {
        return Ok(None);
    };
    if !(eps > 0.0) {
        return Err(CliError::input("epsilon must be positive"));
    }
    let eps_half = eps / 2.0;
    let delta = match (cfg.delta, f.lipschitz(b)) {
        (Some(d), _) => d,
        (None, Some(l)) if l > 0.0 => eps_half / l,
        (None, Some(_)) => b,
        (None, None) => return Ok(None),
    };
    let inputs = ErrorBoundInputs {
        delta,
        eps_half,
        sup_f: f.eval(b, b),
        n,
    };
    match total_error_bound(&inputs, b) {
        Ok(v) => Ok(Some(v)),
        Err(monoapprox::bernstein::BernsteinError::BoundNotApplicable { .. }) => Ok(None),
        Err(e) => Err(e.into()),
    }
}

pub fn bernstein(common: &Common, cfg: &BernsteinConfig) -> Result<()> {
    let format = format_for(common, Format::Csv, &[Format::Csv, Format::Json])?;
    let f = input::parse_function(&cfg.function)?;
    let b = match (cfg.b, &f) {
        (Some(b), _) => b,
        (None, TargetFunction::Linear(p)) if cfg.function.starts_with("data:") => {
            p.points().last().map_or(1.0, |p| p.0)
        }
        (None, _) => 1.0,
    };
    let ns = input::parse_n_list(&cfg.n)?;
    let grid = uniform_grid(b, cfg.grid)?;
    let eval = |x: f64| f.eval(x, b);

    let mut rows = Vec::with_capacity(ns.len());
    let mut per_x = Vec::new();
    for &n in &ns {
        let op = BernsteinOperator::build(eval, n, b)?;
        let values = grid
            .iter()
            .map(|&x| Ok((x, op.eval(x)?)))
            .collect::<Result<Vec<_>>>()?;
        let sup_error = values.iter().map(|&(x, r)| (r - eval(x)).abs()).fold(0.0, f64::max);
        let monotonicity_gap = values
            .windows(2)
            .map(|w| w[1].1 - w[0].1)
            .fold(f64::INFINITY, f64::min);
        if cfg.per_x {
            per_x.extend(values.iter().map(|&(x, r)| PerXRow {
                n,
                x,
                r_n: r,
                f: eval(x),
                abs_diff: (r - eval(x)).abs(),
            }));
        }
        rows.push(ConvergenceRow {
            n,
            sup_error,
            shift_bound: shift_bound(n, b),
            monotonicity_gap,
            total_error_bound: error_bound(cfg, &f, b, n)?,
        });
    }

    let text = match format {
        Format::Json => {
            let mut report = json!({
                "function": f.to_string(),
                "b": b,
                "grid": cfg.grid,
                "rows": rows,
            });
            if cfg.per_x {
                report["per_x"] = json!(per_x);
            }
            to_json(&report)?
        }
        _ if cfg.per_x => {
            let mut s = String::from("n,x,r_n,f,abs_diff\n");
            for r in &per_x {
                writeln!(s, "{},{},{},{},{}", r.n, num(r.x), num(r.r_n), num(r.f), num(r.abs_diff)).unwrap();
            }
            s
        }
        _ => {
            let mut s = String::from("n,sup_error,shift_bound,monotonicity_gap,total_error_bound\n");
            for r in &rows {
                let bound = r.total_error_bound.map(num).unwrap_or_default();
                writeln!(
                    s,
                    "{},{},{},{},{bound}",
                    r.n,
                    num(r.sup_error),
                    num(r.shift_bound),
                    num(r.monotonicity_gap)
                )
                .unwrap();
            }
            s
        }
    };
    Sink::new(common).artifact(&text)
}

pub fn closure(common: &Common, seed: u64, trials: usize, dim: usize, maxdeg: u32) -> Result<()> {
    let format = format_for(common, Format::Text, &[Format::Text, Format::Json])?;
    let report = closure_suite(seed, trials, dim, maxdeg)?;
    let text = match format {
        Format::Json => to_json(&report)?,
        _ => {
            let mut s = format!("seed: {seed}\n{report}\n");
            for failure in &report.failures {
                writeln!(s, "violation: {failure}").unwrap();
            }
            s
        }
    };
    Sink::new(common).artifact(&text)?;
    if report.all_passed() {
        Ok(())
    } else {
        Err(CliError::Internal(report.to_string()))
    }
}

#[derive(Serialize)]
struct Probe {
    start: f64,
    target: f64,
    iterations: Option<usize>,
}

pub fn phi(common: &Common, args: &PhiArgs, grid: usize, hi: f64) -> Result<()> {
    let format = format_for(common, Format::Csv, &[Format::Csv, Format::Json])?;
    let spec = input::parse_phi(&args.phi, args.a)?;
    if grid < 2 {
        return Err(CliError::input("grid needs at least 2 points"));
    }
    if !(hi > 0.0) || !hi.is_finite() {
        return Err(CliError::input("b must be positive"));
    }
    let rows = (0..grid)
        .map(|i| {
            let x = hi * i as f64 / (grid - 1) as f64;
            let y = spec.eval_raw(x)?;
            Ok((x, y, x - y))
        })
        .collect::<Result<Vec<_>>>()?;
    let probes = [(0.9, 0.0), (1.1, 1.0)]
        .into_iter()
        .map(|(start, target)| {
            Ok(Probe {
                start,
                target,
                iterations: basin_probe(&spec, start, target, PROBE_TOL, common.max_iter)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let text = match format {
        Format::Json => {
            let table: Vec<_> = rows
                .iter()
                .map(|&(x, y, gap)| json!({"x": x, "phi": y, "gap": gap}))
                .collect();
            to_json(&json!({"phi": spec, "rows": table, "probes": probes}))?
        }
        _ => {
            let mut s = String::from("x,phi,gap\n");
            for (x, y, gap) in &rows {
                writeln!(s, "{},{},{}", num(*x), num(*y), num(*gap)).unwrap();
            }
            s
        }
    };
    let sink = Sink::new(common);
    sink.artifact(&text)?;
    for p in &probes {
        let outcome = match p.iterations {
            Some(n) => format!("N = {n}"),
            None => format!("not within {PROBE_TOL:e} after {} iterations", common.max_iter),
        };
        sink.note(&format!("probe {} -> {}: {outcome}", p.start, p.target));
    }
    Ok(())
}
