//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::process::ExitCode;
use std::time::{Duration, Instant};

use appa_core::certificates::{
    c_positivity_check, descent_trace_check, ergodic_bound_check, linear_envelope_check,
    log_linear_slope, objective_linear_check, telescoping_check, CheckReport,
};
use appa_core::linalg::{dot, norm};
use appa_core::oracle::{
    fd_gradient, grid_prox, power_norm, saddle_reference, solve_matrix_game,
    solve_regularized_bilinear,
};
use appa_core::problem::CouplingOracle;
use appa_core::schedule::{default_steps, DEFAULT_SAFETY};
use appa_core::{
    run, Coupling, LipschitzQuad, Matrix, PrimalDualPoint, Regularizer, RunRecord, SaddleProblem,
    Splitting, StepSchedule, StopRule,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const TOL: f64 = 1e-9;

struct Outcome {
    pass: bool,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

/// A finished run and the saddle point it was traced against.
struct Run {
    name: String,
    problem: SaddleProblem,
    record: RunRecord,
    saddle: PrimalDualPoint,
}

impl Run {
    fn new(name: impl Into<String>, problem: SaddleProblem, schedule: &StepSchedule, init: PrimalDualPoint, iters: usize, saddle: PrimalDualPoint) -> Self {
        let stop = StopRule::max_iters(iters).with_reference(saddle.clone());
        let record = run(&problem, schedule, init, &stop).expect("solver run");
        assert_eq!(record.iters, iters, "run stopped early");
        Self {
            name: name.into(),
            problem,
            record,
            saddle,
        }
    }

    fn eta(&self) -> (f64, f64) {
        self.record.schedule.eta_margins(&self.problem.lipschitz())
    }
}

fn mat(rows: &[&[f64]]) -> Matrix {
    Matrix::from_rows(&rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>()).unwrap()
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Matrix {
    let rows: Vec<Vec<f64>> = (0..n).map(|_| random_vec(rng, m, 1.0)).collect();
    Matrix::from_rows(&rows).unwrap()
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize, r: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-r..r)).collect()
}

fn unit_norm(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Matrix {
    let mut a = random_matrix(rng, n, m);
    let s = power_norm(&a, 1e-13).unwrap();
    a.scale(1.0 / s);
    a
}

fn game(a: Matrix) -> SaddleProblem {
    let (n, m) = (a.rows(), a.cols());
    SaddleProblem::new(
        Coupling::bilinear(a, vec![0.0; n], vec![0.0; m]).unwrap(),
        Regularizer::Simplex,
        Regularizer::Simplex,
    )
    .unwrap()
}

fn pennies() -> SaddleProblem {
    // ‖A‖ = 2 exactly; use the exact constant so η is exactly 0 at τ = σ = 0.25
    game(mat(&[&[1.0, -1.0], &[-1.0, 1.0]]))
        .with_lipschitz(LipschitzQuad::bilinear(2.0))
        .unwrap()
}

fn constant(tau: f64, sigma: f64) -> StepSchedule {
    StepSchedule::constant(tau, sigma, 1.0, Splitting::default()).unwrap()
}

fn default_constant(p: &SaddleProblem) -> StepSchedule {
    let (tau, sigma) = default_steps(&p.lipschitz(), &Splitting::default(), DEFAULT_SAFETY);
    constant(tau, sigma)
}

fn pt(x: &[f64], y: &[f64]) -> PrimalDualPoint {
    PrimalDualPoint::new(x.to_vec(), y.to_vec())
}

fn summarize(reports: &[(String, CheckReport)]) -> Outcome {
    let failed: Vec<String> = reports
        .iter()
        .filter(|(_, r)| !r.pass())
        .map(|(n, r)| format!("{n}/{} k={:?}", r.check, r.failures.first().map(|f| f.k)))
        .collect();
    let checked: usize = reports.iter().map(|(_, r)| r.checked).sum();
    let worst = reports.iter().map(|(_, r)| r.worst_slack).fold(f64::INFINITY, f64::min);
    if failed.is_empty() {
        Outcome::new(true, format!("{checked} inequalities over {} runs, worst slack {worst:.3e}", reports.len()))
    } else {
        Outcome::new(false, format!("failed: {}", failed.join(", ")))
    }
}

// Matching pennies at τ = σ = 0.25 from the uniform start and from pure starts.
// The pennies gap vanishes identically (A y* = 0, x*ᵀA = 0), so a skewed 2×2
// game with an interior equilibrium rides along to exercise a nonzero gap.
fn corpus_pennies() -> Vec<Run> {
    let p = pennies();
    let saddle = pt(&[0.5, 0.5], &[0.5, 0.5]);
    let mut runs = Vec::new();
    for (name, init) in [
        ("pennies/uniform", pt(&[0.5, 0.5], &[0.5, 0.5])),
        ("pennies/corner", pt(&[1.0, 0.0], &[0.0, 1.0])),
        ("pennies/skew", pt(&[0.9, 0.1], &[0.2, 0.8])),
    ] {
        runs.push(Run::new(name, p.clone(), &constant(0.25, 0.25), init, 10_000, saddle.clone()));
    }
    let skew = game(mat(&[&[2.0, -1.0], &[-1.0, 1.0]]));
    let saddle = saddle_reference(&skew).unwrap();
    runs.push(Run::new("skew-game", skew.clone(), &default_constant(&skew), pt(&[1.0, 0.0], &[1.0, 0.0]), 10_000, saddle));
    runs
}

fn criterion_1(runs: &[Run]) -> Outcome {
    let reports: Vec<_> = runs
        .iter()
        .map(|r| (r.name.clone(), ergodic_bound_check(&r.record, &r.saddle).unwrap()))
        .collect();
    let recorded = runs.iter().all(|r| r.record.trace.iter().all(|row| row.gap_ergodic.is_some()));
    let mut out = summarize(&reports);
    out.pass &= recorded;
    out
}

fn criterion_2(runs: &[Run]) -> Outcome {
    let reports: Vec<_> = runs
        .iter()
        .map(|r| {
            let rep = telescoping_check(&r.record, &r.record.schedule, &r.saddle, r.eta()).unwrap();
            (r.name.clone(), rep)
        })
        .collect();
    summarize(&reports)
}

/// 20 random feasible instances with `n, m ≤ 4`: games, strongly convex
/// bilinear, and quadratic-coupled problems.
fn corpus_descent() -> Vec<Run> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut runs = Vec::new();
    for i in 0..20 {
        let n = rng.gen_range(1..=4);
        let m = rng.gen_range(1..=4);
        let a = random_matrix(&mut rng, n, m);
        let (b, c) = (random_vec(&mut rng, n, 1.0), random_vec(&mut rng, m, 1.0));
        let (name, problem) = match i % 3 {
            0 => {
                let cp = Coupling::bilinear(a, b, c).unwrap();
                ("game", SaddleProblem::new(cp, Regularizer::Simplex, Regularizer::Simplex).unwrap())
            }
            1 => {
                let cp = Coupling::bilinear(a, b, c).unwrap();
                let f1 = Regularizer::SquaredNorm { mu: rng.gen_range(0.2..2.0) };
                let f2 = Regularizer::SquaredNorm { mu: rng.gen_range(0.2..2.0) };
                ("sqnorm-bilinear", SaddleProblem::new(cp, f1, f2).unwrap())
            }
            _ => {
                let cp = Coupling::quadratic(a, b, c, rng.gen_range(0.1..1.5), rng.gen_range(0.1..1.5)).unwrap();
                let f1 = if rng.gen_bool(0.5) { Regularizer::Zero } else { Regularizer::SquaredNorm { mu: 0.3 } };
                ("quadratic", SaddleProblem::new(cp, f1, Regularizer::Zero).unwrap())
            }
        };
        let saddle = saddle_reference(&problem).unwrap();
        let init = problem.sample_point(&mut rng, 2.0);
        let schedule = default_constant(&problem);
        runs.push(Run::new(format!("{name}-{i}-{n}x{m}"), problem, &schedule, init, 100, saddle));
    }
    runs
}

fn criterion_3(runs: &[Run]) -> Outcome {
    let feasible = runs.iter().all(|r| r.record.certified);
    let reports: Vec<_> = runs
        .iter()
        .map(|r| (r.name.clone(), descent_trace_check(&r.record)))
        .collect();
    let mut out = summarize(&reports);
    if !feasible {
        out = Outcome::new(false, "corpus contains an uncertified run");
    }
    out
}

/// Strongly convex bilinear instances: `f1 = f2 = ½‖·‖²`, unit-norm random
/// `A`, σ with `η ≥ 0.2`.
fn corpus_linear() -> Vec<Run> {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let sigma = 0.39;
    (0..5)
        .map(|i| {
            let a = unit_norm(&mut rng, 3, 3);
            let (b, c) = (random_vec(&mut rng, 3, 1.0), random_vec(&mut rng, 3, 1.0));
            let saddle = solve_regularized_bilinear(&a, &b, &c, 1.0, 1.0).unwrap();
            let cp = Coupling::bilinear(a, b, c).unwrap();
            let sq = Regularizer::SquaredNorm { mu: 1.0 };
            let problem = SaddleProblem::new(cp, sq.clone(), sq).unwrap();
            let schedule = StepSchedule::geometric(sigma, 1.0, 1.0, 1.0, Splitting::default()).unwrap();
            let init = pt(&random_vec(&mut rng, 3, 3.0), &random_vec(&mut rng, 3, 3.0));
            Run::new(format!("strongly-convex-{i}"), problem, &schedule, init, 200, saddle)
        })
        .collect()
}

fn criterion_5(runs: &[Run]) -> Outcome {
    let mut reports = Vec::new();
    let mut worst_rate_margin = f64::INFINITY;
    let mut ok = true;
    for r in runs {
        let eta = r.eta();
        let theta = r.record.schedule.theta_ratio();
        ok &= eta.0 >= 0.2 && eta.1 >= 0.2 && (theta - 1.0 / 1.39).abs() < 1e-15;
        reports.push((r.name.clone(), linear_envelope_check(&r.record, &r.saddle, eta).unwrap()));
        let pts: Vec<(f64, f64)> = r
            .record
            .trace
            .iter()
            .map(|row| ((row.k + 1) as f64, row.dist_x_sq.unwrap() + row.dist_y_sq.unwrap()))
            .collect();
        match log_linear_slope(&pts, 1e-24) {
            Some(s) => {
                let margin = theta.ln() + 0.05 - s;
                worst_rate_margin = worst_rate_margin.min(margin);
                ok &= margin >= 0.0;
            }
            None => ok = false,
        }
    }
    let mut out = summarize(&reports);
    out.pass &= ok;
    out.detail += &format!(", worst slope margin {worst_rate_margin:.3}");
    out
}

fn criterion_6(runs: &[Run]) -> Outcome {
    let reports: Vec<_> = runs
        .iter()
        .map(|r| (r.name.clone(), objective_linear_check(&r.problem, &r.record, &r.saddle).unwrap()))
        .collect();
    summarize(&reports)
}

/// Feasible convex runs of 10⁴ iterations.
fn corpus_long() -> Vec<Run> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut runs = Vec::new();
    let p = pennies();
    runs.push(Run::new(
        "pennies/tau0.2",
        p,
        &constant(0.2, 0.2),
        pt(&[1.0, 0.0], &[0.0, 1.0]),
        10_000,
        pt(&[0.5, 0.5], &[0.5, 0.5]),
    ));
    let g = game(random_matrix(&mut rng, 3, 3));
    let saddle = saddle_reference(&g).unwrap();
    runs.push(Run::new("game-3x3", g.clone(), &default_constant(&g), pt(&[1.0, 0.0, 0.0], &[0.0, 0.0, 1.0]), 10_000, saddle));
    let a = random_matrix(&mut rng, 3, 2);
    let (b, c) = (random_vec(&mut rng, 3, 1.0), random_vec(&mut rng, 2, 1.0));
    let q = SaddleProblem::new(
        Coupling::quadratic(a, b, c, 0.4, 0.7).unwrap(),
        Regularizer::Zero,
        Regularizer::Zero,
    )
    .unwrap();
    let saddle = saddle_reference(&q).unwrap();
    runs.push(Run::new("quadratic", q.clone(), &default_constant(&q), pt(&[2.0, -1.0, 0.5], &[-2.0, 1.0]), 10_000, saddle));
    runs
}

fn criterion_7(runs: &[Run]) -> Outcome {
    let mut details = Vec::new();
    let mut ok = true;
    for r in runs {
        ok &= r.record.certified;
        let trace = &r.record.trace;
        let tail = trace[trace.len() - 100..].iter().map(|row| row.increment()).fold(0.0, f64::max);
        let eta_x = r.eta().0;
        let a0 = trace[0].a_k.unwrap();
        let cap = 2.0 / eta_x * a0 + 1e-6;
        let mut partial = 0.0;
        let mut max_partial = 0.0f64;
        for row in trace {
            partial += row.inc_x_sq / row.params.tau;
            max_partial = max_partial.max(partial);
        }
        ok &= tail <= 1e-3 && max_partial <= cap;
        details.push(format!("{}: tail {tail:.1e}, sum {max_partial:.3e} <= {cap:.3e}", r.name));
    }
    Outcome::new(ok, details.join("; "))
}

fn criterion_4(corpora: &[&[Run]]) -> Outcome {
    let mut reports = Vec::new();
    let mut skipped = 0;
    for runs in corpora {
        for r in runs.iter() {
            if !r.record.certified {
                skipped += 1;
                continue;
            }
            reports.push((r.name.clone(), c_positivity_check(&r.record, r.eta())));
        }
    }
    let mut out = summarize(&reports);
    out.detail += &format!(" ({skipped} infeasible runs skipped)");
    out
}

fn criterion_8() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut notes = Vec::new();
    let mut ok = true;

    // prox against an exhaustive grid
    let kinds = ["zero", "sqnorm", "l1", "box", "simplex"];
    let mut worst_prox = 0.0f64;
    for kind in kinds {
        for i in 0..200 {
            let dim = if i % 2 == 0 { 1 } else { 2 };
            let res = if dim == 1 { 1e-4 } else { 4e-3 };
            let reg = match kind {
                "zero" => Regularizer::Zero,
                "sqnorm" => Regularizer::SquaredNorm { mu: rng.gen_range(0.1..3.0) },
                "l1" => Regularizer::L1 { w: rng.gen_range(0.0..2.0) },
                "box" => {
                    let lo = random_vec(&mut rng, dim, 1.0);
                    let hi = lo.iter().map(|l| l + rng.gen_range(0.1..1.0)).collect();
                    Regularizer::Box { lo, hi }
                }
                _ => Regularizer::Simplex,
            };
            let tau = rng.gen_range(0.1..2.0);
            let v = random_vec(&mut rng, dim, 1.5);
            let exact = reg.prox(tau, &v).unwrap();
            let grid = grid_prox(&reg, tau, &v, res).unwrap();
            let err = exact.iter().zip(&grid).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            worst_prox = worst_prox.max(err / res);
            ok &= err <= 2.0 * res;
        }
    }
    notes.push(format!("prox worst err/res {worst_prox:.2}"));

    // analytic gradients against central differences
    let mut worst_grad = 0.0f64;
    for i in 0..200 {
        let n = rng.gen_range(1..=4);
        let m = rng.gen_range(1..=4);
        let a = random_matrix(&mut rng, n, m);
        let (b, c) = (random_vec(&mut rng, n, 1.0), random_vec(&mut rng, m, 1.0));
        let cp = if i % 2 == 0 {
            Coupling::bilinear(a, b, c).unwrap()
        } else {
            Coupling::quadratic(a, b, c, rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0)).unwrap()
        };
        let p = pt(&random_vec(&mut rng, n, 2.0), &random_vec(&mut rng, m, 2.0));
        let (fx, fy) = fd_gradient(&cp, &p, 1e-5);
        for (fd, g) in [(fx, cp.grad_x(&p.x, &p.y)), (fy, cp.grad_y(&p.x, &p.y))] {
            let diff: Vec<f64> = fd.iter().zip(&g).map(|(a, b)| a - b).collect();
            let rel = norm(&diff) / norm(&g);
            worst_grad = worst_grad.max(rel);
            ok &= rel <= 1e-6;
        }
    }
    notes.push(format!("gradient worst rel err {worst_grad:.1e}"));

    // equilibria against every pure strategy
    let mut worst_game = 0.0f64;
    for _ in 0..200 {
        let n = rng.gen_range(1..=4);
        let m = rng.gen_range(1..=4);
        let a = random_matrix(&mut rng, n, m);
        let sol = solve_matrix_game(&a).unwrap();
        let ay = a.mul_vec(&sol.y);
        let xa = a.mul_t_vec(&sol.x);
        let v = dot(&sol.x, &ay);
        // x minimizes: every pure row does at least v against y*;
        // y maximizes: every pure column does at most v against x*
        let viol = ay
            .iter()
            .map(|r| v - r)
            .chain(xa.iter().map(|c| c - v))
            .fold((sol.value - v).abs(), f64::max);
        worst_game = worst_game.max(viol);
        ok &= viol <= TOL;
    }
    notes.push(format!("game worst violation {worst_game:.1e}"));
    Outcome::new(ok, notes.join(", "))
}

fn timed<T>(f: impl FnOnce() -> T) -> (T, Duration) {
    let start = Instant::now();
    let v = f();
    (v, start.elapsed())
}

fn main() -> ExitCode {
    let (pennies_runs, t_pennies) = timed(corpus_pennies);
    let (descent_runs, t_descent) = timed(corpus_descent);
    let (linear_runs, t_linear) = timed(corpus_linear);
    let (long_runs, t_long) = timed(corpus_long);

    type Check<'a> = Box<dyn Fn() -> Outcome + 'a>;
    let criteria: Vec<(&str, Duration, Duration, Check)> = vec![
        ("1 ergodic O(1/K) gap bound", t_pennies, Duration::from_secs(5), Box::new(|| criterion_1(&pennies_runs))),
        ("2 telescoping monotonicity", t_pennies, Duration::from_secs(5), Box::new(|| criterion_2(&pennies_runs))),
        ("3 descent inequality", t_descent, Duration::from_secs(10), Box::new(|| criterion_3(&descent_runs))),
        (
            "4 c_k positivity",
            t_pennies + t_descent + t_linear + t_long,
            Duration::from_secs(30),
            Box::new(|| criterion_4(&[&pennies_runs, &descent_runs, &linear_runs, &long_runs])),
        ),
        ("5 linear convergence envelope", t_linear, Duration::from_secs(2), Box::new(|| criterion_5(&linear_runs))),
        ("6 objective linear convergence", t_linear, Duration::from_secs(2), Box::new(|| criterion_6(&linear_runs))),
        ("7 vanishing increments", t_long, Duration::from_secs(30), Box::new(|| criterion_7(&long_runs))),
        ("8 oracle equivalence", Duration::ZERO, Duration::from_secs(30), Box::new(criterion_8)),
    ];

    let mut all = true;
    for (name, setup, limit, check) in criteria {
        let (out, t_check) = timed(check);
        let elapsed = setup + t_check;
        let in_time = elapsed <= limit;
        let pass = out.pass && in_time;
        all &= pass;
        println!(
            "{} criterion {name}: {} [{:.2}s{}]",
            if pass { "PASS" } else { "FAIL" },
            out.detail,
            elapsed.as_secs_f64(),
            if in_time { String::new() } else { format!(", over {}s limit", limit.as_secs()) },
        );
    }
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
