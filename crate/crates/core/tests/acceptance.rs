//! Acceptance run: one PASS/FAIL line per criterion, non-zero exit on any failure.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use monoapprox::bernstein::{
    nodes, shift_bound, tail_bound, tail_width, total_error_bound, weights, Interpolant,
};
use monoapprox::engine::{level_sets, TRACE_TOLERANCE};
use monoapprox::order::{is_isotone, mul, sup_norm_distance};
use monoapprox::phi::basin_probe;
use monoapprox::rational::{chi_rat, closure_suite, restrict_to_grid, rat_eval};
use monoapprox::{
    BernsteinOperator, Engine, ErrorBoundInputs, FinitePreorder, GridFunction, NonNegPoly,
    NonNegRationalFn, PhiSpec, TargetFunction,
};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TRIALS: u64 = 100;
const LEVELS: [usize; 4] = [2, 4, 8, 16];

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            pass,
            detail: detail.into(),
        }
    }
}

/// Failures collected while walking a corpus; keeps the first few messages.
#[derive(Default)]
struct Tally {
    checks: usize,
    failures: Vec<String>,
}

impl Tally {
    fn check(&mut self, ok: bool, what: impl FnOnce() -> String) {
        self.checks += 1;
        if !ok {
            self.failures.push(what());
        }
    }

    fn passed(&self) -> usize {
        self.checks - self.failures.len()
    }

    fn summary(&self) -> String {
        let mut s = format!("{}/{} checks", self.passed(), self.checks);
        if let Some(first) = self.failures.first() {
            s.push_str(&format!("; first failure: {first}"));
        }
        s
    }
}

fn secs(d: Duration) -> String {
    format!("{:.2}s", d.as_secs_f64())
}

// ---- engine corpus (criteria 1-3) ----

struct EngineRun {
    bound: Tally,
    postconditions: Tally,
    traces: Tally,
    approx_time: Duration,
}

fn separator_checks(engine: &Engine, t: &common::Trial, rng: &mut ChaCha8Rng, run: &mut EngineRun) {
    let order = engine.order();
    let size = order.size();
    let seed = t.seed;

    let mut pairs: Vec<(usize, usize)> = (0..size)
        .flat_map(|a| (0..size).map(move |b| (a, b)))
        .filter(|&(a, b)| !order.leq(b, a))
        .collect();
    for i in (1..pairs.len()).rev() {
        pairs.swap(i, rng.random_range(0..=i));
    }
    pairs.truncate(12);
    for (a, b) in pairs {
        for eps in [0.25, 0.05] {
            match engine.separate_points(a, b, eps) {
                Ok(c) => {
                    let v = c.function.values();
                    let ok = (v[b] - 1.0).abs() <= 1e-12
                        && v[a] < eps
                        && v.iter().all(|&x| (0.0..=1.0 + eps).contains(&x));
                    run.postconditions.check(ok, || format!("seed {seed} point pair ({a},{b}) eps {eps}"));
                    trace_checks(engine, &c.function, &c.trace, &mut run.traces, || {
                        format!("seed {seed} point pair ({a},{b})")
                    });
                }
                Err(e) => run
                    .postconditions
                    .check(false, || format!("seed {seed} point pair ({a},{b}): {e}")),
            }
        }
    }

    let range = t.target.max() - t.target.min();
    let scaled = if range > 0.0 {
        GridFunction::new(t.target.values().iter().map(|v| v / range).collect()).unwrap()
    } else {
        t.target.clone()
    };
    let delta = 0.25;
    let sets = level_sets(&scaled, scaled.min(), 4).unwrap();
    for (lower, upper) in sets.lower.iter().zip(&sets.upper) {
        if lower.is_empty() || upper.is_empty() {
            continue;
        }
        let lower: Vec<usize> = lower.iter().copied().collect();
        let upper: Vec<usize> = upper.iter().copied().collect();
        match engine.separate_sets(&lower, &upper, delta) {
            Ok(c) => {
                let v = c.function.values();
                let ok = lower.iter().all(|&a| v[a] < delta)
                    && upper.iter().all(|&b| 1.0 < v[b] && v[b] < 1.0 + delta)
                    && v.iter().all(|&x| 0.0 <= x && x < 1.0 + delta);
                run.postconditions.check(ok, || format!("seed {seed} set separator |A|={}", lower.len()));
                trace_checks(engine, &c.function, &c.trace, &mut run.traces, || {
                    format!("seed {seed} set separator")
                });
            }
            Err(e) => run
                .postconditions
                .check(false, || format!("seed {seed} set separator: {e}")),
        }
    }
}

fn trace_checks(
    engine: &Engine,
    function: &GridFunction,
    trace: &monoapprox::ConeExpr,
    tally: &mut Tally,
    what: impl Fn() -> String,
) {
    let replay = trace
        .eval(engine.family(), engine.phi())
        .ok()
        .and_then(|back| sup_norm_distance(&back, function).ok());
    tally.check(replay.is_some_and(|d| d <= TRACE_TOLERANCE), || format!("{} replay {replay:?}", what()));
    tally.check(is_isotone(engine.order(), function).unwrap_or(false), || format!("{} not isotone", what()));
}

fn engine_corpus() -> EngineRun {
    let mut run = EngineRun {
        bound: Tally::default(),
        postconditions: Tally::default(),
        traces: Tally::default(),
        approx_time: Duration::ZERO,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(0xacce);
    for seed in 0..TRIALS {
        let t = common::trial(seed);
        let engine = Engine::new(t.order.clone(), t.family.clone(), PhiSpec::Gamma).unwrap();
        let start = Instant::now();
        let results: Vec<_> = LEVELS.iter().map(|&n| (n, engine.approximate(&t.target, n))).collect();
        run.approx_time += start.elapsed();
        for (n, r) in results {
            match r {
                Ok(r) => {
                    run.bound.check(r.sup_error < 3.0 / n as f64, || {
                        format!("seed {seed} n {n}: sup_error {}", r.sup_error)
                    });
                    trace_checks(&engine, &r.approximant, &r.trace, &mut run.traces, || {
                        format!("seed {seed} n {n}")
                    });
                }
                Err(e) => run.bound.check(false, || format!("seed {seed} n {n}: {e}")),
            }
        }
        separator_checks(&engine, &t, &mut rng, &mut run);
    }
    run
}

// ---- φ suite (criterion 4) ----

fn phi_suite() -> Outcome {
    let variants = [
        ("alpha(0.25)", PhiSpec::Alpha { a: 0.25 }),
        ("alpha(1)", PhiSpec::Alpha { a: 1.0 }),
        ("beta", PhiSpec::Beta),
        ("gamma", PhiSpec::Gamma),
        ("chi", PhiSpec::Chi),
    ];
    let grid: Vec<f64> = (0..10_000).map(|i| 10.0 * i as f64 / 9_999.0).collect();
    let mut pass = true;
    let mut notes = Vec::new();
    for (name, phi) in &variants {
        let fixed = phi.eval(0.0).unwrap().abs() <= 1e-15 && (phi.eval(1.0).unwrap() - 1.0).abs() <= 1e-15;
        let contraction = grid
            .iter()
            .filter(|&&x| x != 0.0 && x != 1.0)
            .all(|&x| phi.eval_raw(x).unwrap() < x);
        let low = basin_probe(phi, 0.9, 0.0, 1e-6, 1_000_000).unwrap();
        let high = basin_probe(phi, 1.1, 1.0, 1e-6, 1_000_000).unwrap();
        let ok = fixed && contraction && low.is_some() && high.is_some();
        pass &= ok;
        let show = |n: Option<usize>| n.map_or("none".to_string(), |n| n.to_string());
        notes.push(format!(
            "{name}: fixed {} contraction {} N(0.9->0) {} N(1.1->1) {}",
            yes(fixed),
            yes(contraction),
            show(low),
            show(high)
        ));
    }
    Outcome::new(pass, notes.join("; "))
}

fn yes(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "FAIL"
    }
}

// ---- closure suite (criterion 5) ----

fn closure() -> Outcome {
    let start = Instant::now();
    let report = closure_suite(2024, 200, 3, 4).unwrap();
    let elapsed = start.elapsed();
    let pass = report.all_passed() && report.passed == 200 && elapsed <= Duration::from_secs(30);
    Outcome::new(pass, format!("{report} in {}", secs(elapsed)))
}

// ---- products of isotone functions (criterion 6) ----

fn random_preorder(rng: &mut ChaCha8Rng) -> FinitePreorder {
    let size = rng.random_range(1..=24);
    let density = rng.random_range(0.0..0.3);
    let relation: Vec<Vec<bool>> = (0..size)
        .map(|_| (0..size).map(|_| rng.random_bool(density)).collect())
        .collect();
    FinitePreorder::closure(&relation).unwrap()
}

fn random_isotone(rng: &mut ChaCha8Rng, p: &FinitePreorder) -> GridFunction {
    let size = p.size();
    let raw: Vec<f64> = (0..size).map(|_| rng.random_range(0.0..5.0)).collect();
    let values = (0..size)
        .map(|x| (0..size).filter(|&y| p.leq(y, x)).map(|y| raw[y]).fold(0.0, f64::max))
        .collect();
    GridFunction::new(values).unwrap()
}

fn products() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut tally = Tally::default();
    for i in 0..500 {
        let p = random_preorder(&mut rng);
        let f = random_isotone(&mut rng, &p);
        let g = random_isotone(&mut rng, &p);
        let inputs_ok = is_isotone(&p, &f).unwrap() && is_isotone(&p, &g).unwrap();
        let fg = mul(&f, &g).unwrap();
        tally.check(inputs_ok && is_isotone(&p, &fg).unwrap(), || format!("triple {i}"));
    }
    Outcome::new(tally.failures.is_empty() && tally.checks == 500, tally.summary())
}

// ---- Bernstein (criterion 7) ----

fn direct_weights(n: usize, b: f64, x: f64) -> Vec<f64> {
    let p = x / (b + x);
    let mut binom = 1.0f64;
    (0..=n)
        .map(|k| {
            if k > 0 {
                binom = binom * (n - k + 1) as f64 / k as f64;
            }
            binom * p.powi(k as i32) * (1.0 - p).powi((n - k) as i32)
        })
        .collect()
}

fn direct_sup_error_identity(n: usize, grid: usize) -> f64 {
    let b = 1.0;
    // f extended by f(b) past b
    let g: Vec<f64> = nodes(n, b).unwrap().into_iter().map(|t| t.min(b)).collect();
    (0..grid)
        .map(|i| {
            let x = b * i as f64 / (grid - 1) as f64;
            let r: f64 = direct_weights(n, b, x).iter().zip(&g).map(|(w, s)| w * s).sum();
            (r - x).abs()
        })
        .fold(0.0, f64::max)
}

fn random_pwl(rng: &mut ChaCha8Rng, b: f64) -> Interpolant {
    let count = rng.random_range(2..=6);
    let mut xs: Vec<f64> = (0..count - 2).map(|_| rng.random_range(0.0..b)).collect();
    xs.push(0.0);
    xs.push(b);
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    let mut y = rng.random_range(0.0..1.0);
    let points = xs
        .into_iter()
        .map(|x| {
            let here = y;
            y += rng.random_range(0.0..2.0);
            (x, here)
        })
        .collect();
    Interpolant::new(points).unwrap()
}

fn bernstein_suite() -> Outcome {
    let mut notes = Vec::new();
    let mut pass = true;
    let mut part = |name: &str, ok: bool, detail: String| {
        pass &= ok;
        notes.push(format!("{name} {} ({detail})", yes(ok)));
    };

    let mut worst_sum = 0.0f64;
    for b in [0.5, 1.0, 10.0] {
        for n in (1..=512).step_by(7).chain([512]) {
            for i in 0..=20 {
                let x = b * i as f64 / 20.0;
                let s: f64 = weights(n, b, x).unwrap().iter().sum();
                worst_sum = worst_sum.max((s - 1.0).abs());
            }
        }
    }
    part("weight sums", worst_sum <= 1e-12, format!("max dev {worst_sum:.1e}"));

    let mut worst_const = 0.0f64;
    for b in [0.5, 1.0, 10.0] {
        for n in [1, 5, 25, 125, 512] {
            for c in [0.0, 0.3, 7.0] {
                let op = BernsteinOperator::build(|_| c, n, b).unwrap();
                for (_, r) in op.eval_grid(200).unwrap() {
                    worst_const = worst_const.max((r - c).abs());
                }
            }
        }
    }
    part("constants", worst_const <= 1e-12, format!("max dev {worst_const:.1e}"));

    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_gap = f64::INFINITY;
    for _ in 0..20 {
        let f = random_pwl(&mut rng, 1.0);
        for n in [5, 25, 125] {
            let op = BernsteinOperator::build(|x| f.eval(x), n, 1.0).unwrap();
            worst_gap = worst_gap.min(op.monotonicity_gap(1000).unwrap());
        }
    }
    part("monotonicity", worst_gap >= -1e-10, format!("min gap {worst_gap:.1e}"));

    let errors: Vec<f64> = [25, 50, 100, 200]
        .iter()
        .map(|&n| BernsteinOperator::build(|x| x, n, 1.0).unwrap().sup_error(|x| x, 10_000).unwrap())
        .collect();
    let oracle: Vec<f64> = [25, 50, 100, 200].iter().map(|&n| direct_sup_error_identity(n, 10_000)).collect();
    let agree = errors.iter().zip(&oracle).all(|(a, b)| (a - b).abs() <= 1e-10);
    let decreasing = oracle.windows(2).all(|w| w[1] <= w[0]) && errors.windows(2).all(|w| w[1] <= w[0]);
    part(
        "identity convergence",
        agree && decreasing && errors[3] < 0.1,
        format!("errors {errors:.4?} oracle {oracle:.4?}"),
    );

    let mut worst_direct = 0.0f64;
    for n in 1..=60 {
        for b in [0.5, 1.0, 10.0] {
            for i in 0..=10 {
                let x = b * i as f64 / 10.0;
                let w = weights(n, b, x).unwrap();
                for (a, d) in w.iter().zip(direct_weights(n, b, x)) {
                    worst_direct = worst_direct.max((a - d).abs());
                }
            }
        }
    }
    part("recurrence vs direct", worst_direct <= 1e-10, format!("max dev {worst_direct:.1e}"));

    let r1 = BernsteinOperator::build(|x| x, 1, 1.0).unwrap();
    let e1 = r1.sup_error(|x| x, 10_000).unwrap();
    let at_one = 1.0 - r1.eval(1.0).unwrap();
    part(
        "R_1 identity",
        (e1 - 0.5).abs() <= 1e-12 && (at_one - 0.5).abs() <= 1e-12,
        format!("sup {e1}"),
    );

    Outcome::new(pass, notes.join("; "))
}

// ---- bound soundness (criterion 8) ----

fn exact_tail(n: u64, p: &BigRational, eta: &BigRational) -> BigRational {
    let q = BigRational::one() - p;
    let nn = BigRational::from_integer(BigInt::from(n));
    let mut binom = BigInt::one();
    let mut total = BigRational::zero();
    for k in 0..=n {
        if k > 0 {
            binom = binom * BigInt::from(n - k + 1) / BigInt::from(k);
        }
        let kk = BigRational::from_integer(BigInt::from(k));
        let dev = kk / &nn - p;
        let dev = if dev < BigRational::zero() { -dev } else { dev };
        if dev >= *eta {
            let term = BigRational::from_integer(binom.clone())
                * num_traits::pow(p.clone(), k as usize)
                * num_traits::pow(q.clone(), (n - k) as usize);
            total += term;
        }
    }
    total
}

fn bound_soundness() -> Outcome {
    let b = 1.0;
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut family: Vec<(String, TargetFunction)> = vec![
        ("identity".into(), TargetFunction::Identity),
        ("smoothed step".into(), TargetFunction::StepSmoothed),
    ];
    for i in 0..3 {
        family.push((format!("pwl#{i}"), TargetFunction::Linear(random_pwl(&mut rng, b))));
    }

    let mut sound = Tally::default();
    for (name, f) in &family {
        let lip = f.lipschitz(b).unwrap();
        let sup_f = f.eval(b, b);
        for eps_half in [0.05, 0.1, 0.2] {
            let delta = eps_half / lip;
            for n in [64, 256, 1024] {
                let inputs = ErrorBoundInputs {
                    delta,
                    eps_half,
                    sup_f,
                    n,
                };
                let Ok(bound) = total_error_bound(&inputs, b) else {
                    continue;
                };
                let op = BernsteinOperator::build(|x| f.eval(x, b), n, b).unwrap();
                let err = op.sup_error(|x| f.eval(x, b), 10_000).unwrap();
                sound.check(err <= bound, || format!("{name} n {n} eps/2 {eps_half}: {err} > {bound}"));
            }
        }
    }

    let mut closed = Tally::default();
    for n in [1, 7, 64, 1000] {
        for bb in [0.5, 1.0, 10.0] {
            closed.check(shift_bound(n, bb) == 2.0 * bb / n as f64, || format!("shift n {n} b {bb}"));
        }
        for eta in [0.01, 0.1, 0.25] {
            closed.check(tail_bound(n, eta) == 1.0 / (4.0 * n as f64 * eta * eta), || {
                format!("tail n {n} eta {eta}")
            });
        }
    }
    closed.check(tail_width(1.0, 1.0) == 1.0 / 64.0 && tail_width(100.0, 1.0) == 0.25, || "tail width".into());

    let mut tails = Tally::default();
    for _ in 0..50 {
        let n: u64 = rng.random_range(1..=200);
        let p = BigRational::new(BigInt::from(rng.random_range(1..64)), BigInt::from(64));
        let eta = BigRational::new(BigInt::from(rng.random_range(1..=16)), BigInt::from(64));
        let eta_f = num_traits::ToPrimitive::to_f64(&eta).unwrap();
        let bound = BigRational::from_float(tail_bound(n as usize, eta_f)).unwrap();
        let exact = exact_tail(n, &p, &eta);
        tails.check(exact <= bound, || format!("n {n} p {p} eta {eta}"));
    }

    let pass = sound.failures.is_empty() && sound.checks > 0 && closed.failures.is_empty() && tails.failures.is_empty();
    Outcome::new(
        pass,
        format!(
            "bound {}; closed forms {}; exact tails {}",
            sound.summary(),
            closed.summary(),
            tails.summary()
        ),
    )
}

// ---- cross-module (criterion 9) ----

fn cross_module() -> Outcome {
    let x = NonNegRationalFn::polynomial(NonNegPoly::variable(1, 0).unwrap()).unwrap();
    let chi = chi_rat(&x).unwrap();
    let points: Vec<Vec<f64>> = (0..=1000).map(|i| vec![10.0 * i as f64 / 1000.0]).collect();
    let on_grid = restrict_to_grid(&chi, &points).unwrap();
    let worst_chi = points
        .iter()
        .zip(on_grid.values())
        .map(|(p, v)| (v - PhiSpec::Chi.eval(p[0]).unwrap()).abs())
        .fold(0.0, f64::max);

    let mut worst_bern = 0.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for n in 1..=12 {
        for b in [0.5, 1.0, 10.0] {
            let f = random_pwl(&mut rng, b);
            let op = BernsteinOperator::build(|x| f.eval(x), n, b).unwrap();
            let r = op.to_rational().unwrap();
            for i in 0..=50 {
                let x = b * i as f64 / 50.0;
                worst_bern = worst_bern.max((op.eval(x).unwrap() - rat_eval(&r, &[x]).unwrap()).abs());
            }
        }
    }
    let pass = worst_chi <= 1e-12 && worst_bern <= 1e-10;
    Outcome::new(pass, format!("chi max dev {worst_chi:.1e}; bernstein vs rational max dev {worst_bern:.1e}"))
}

fn main() -> ExitCode {
    let start = Instant::now();
    let run = engine_corpus();
    let corpus_time = start.elapsed();

    let c1 = Outcome::new(
        run.bound.failures.is_empty() && run.bound.checks == TRIALS as usize * LEVELS.len() && run.approx_time <= Duration::from_secs(60),
        format!(
            "{} trials x n in {LEVELS:?}: {}; approximate time {}",
            TRIALS,
            run.bound.summary(),
            secs(run.approx_time)
        ),
    );
    let c2 = Outcome::new(run.postconditions.failures.is_empty(), run.postconditions.summary());
    let c3 = Outcome::new(run.traces.failures.is_empty(), format!("{} (corpus {})", run.traces.summary(), secs(corpus_time)));

    let outcomes = [
        ("1", "approximation bound", c1),
        ("2", "separator postconditions", c2),
        ("3", "trace soundness", c3),
        ("4", "phi suite", phi_suite()),
        ("5", "closure suite", closure()),
        ("6", "products of isotone functions", products()),
        ("7", "bernstein operator", bernstein_suite()),
        ("8", "bound soundness", bound_soundness()),
        ("9", "cross-module agreement", cross_module()),
    ];
    let mut all = true;
    for (id, name, o) in &outcomes {
        all &= o.pass;
        println!("{} criterion {id} ({name}): {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
