//! Built-in benchmark corpus.

use appa_core::certificates::{ergodic_gap_bound, log_linear_slope};
use appa_core::oracle::{power_norm, saddle_reference};
use appa_core::schedule::{default_geometric_sigma, default_steps, DEFAULT_SAFETY};
use appa_core::{
    run, Coupling, Matrix, PrimalDualPoint, Regularizer, Result, SaddleProblem, ScheduleKind,
    Splitting, StepSchedule, StopRule,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

/// Slack allowed between the fitted log rate and `ln θ`.
pub const RATE_SLACK: f64 = 0.05;

#[derive(Debug, Clone)]
struct Case {
    name: String,
    problem: SaddleProblem,
    kind: ScheduleKind,
    init: PrimalDualPoint,
    iters: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub problem: String,
    pub schedule: ScheduleKind,
    pub k: usize,
    pub gap: f64,
    pub bound: f64,
    pub ratio: f64,
    /// Fitted per-iteration contraction of the squared distance.
    pub rate: Option<f64>,
    pub theta: Option<f64>,
    pub certified: bool,
    pub ok: bool,
    pub error: Option<String>,
}

fn random_matrix(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Matrix {
    let rows: Vec<Vec<f64>> = (0..n)
        .map(|_| (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect())
        .collect();
    Matrix::from_rows(&rows).expect("rectangular")
}

fn unit_norm(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Matrix {
    let mut a = random_matrix(rng, n, m);
    let norm = power_norm(&a, 1e-13).expect("power iteration");
    a.scale(1.0 / norm);
    a
}

fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
}

fn corpus(seed: u64, iters: Option<usize>) -> Vec<Case> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let convex_k = iters.unwrap_or(2000);
    let linear_k = iters.unwrap_or(40);
    let mut cases = Vec::new();

    let pennies = Matrix::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap();
    let c = Coupling::bilinear(pennies, vec![0.0; 2], vec![0.0; 2]).unwrap();
    cases.push(Case {
        name: "matching-pennies".into(),
        problem: SaddleProblem::new(c, Regularizer::Simplex, Regularizer::Simplex).unwrap(),
        kind: ScheduleKind::Constant,
        init: PrimalDualPoint::new(vec![1.0, 0.0], vec![0.0, 1.0]),
        iters: convex_k,
    });

    for i in 0..3 {
        let c = Coupling::bilinear(random_matrix(&mut rng, 4, 4), vec![0.0; 4], vec![0.0; 4]).unwrap();
        let x0 = {
            let mut v = vec![0.0; 4];
            v[i] = 1.0;
            v
        };
        cases.push(Case {
            name: format!("game-4x4-{i}"),
            problem: SaddleProblem::new(c, Regularizer::Simplex, Regularizer::Simplex).unwrap(),
            kind: ScheduleKind::Constant,
            init: PrimalDualPoint::new(x0, vec![0.25; 4]),
            iters: convex_k,
        });
    }

    let a = unit_norm(&mut rng, 3, 3);
    let (b, cv) = (random_vec(&mut rng, 3), random_vec(&mut rng, 3));
    let c = Coupling::bilinear(a, b, cv).unwrap();
    cases.push(Case {
        name: "strongly-convex-bilinear".into(),
        problem: SaddleProblem::new(
            c,
            Regularizer::SquaredNorm { mu: 1.0 },
            Regularizer::SquaredNorm { mu: 1.0 },
        )
        .unwrap(),
        kind: ScheduleKind::Geometric,
        init: PrimalDualPoint::zeros(3, 3),
        iters: linear_k,
    });

    let a = unit_norm(&mut rng, 3, 4);
    let (b, cv) = (random_vec(&mut rng, 3), random_vec(&mut rng, 4));
    let c = Coupling::quadratic(a, b, cv, 0.5, 0.8).unwrap();
    let regs = [
        (ScheduleKind::Constant, Regularizer::Zero, Regularizer::Zero, convex_k),
        (
            ScheduleKind::Geometric,
            Regularizer::SquaredNorm { mu: 0.5 },
            Regularizer::SquaredNorm { mu: 0.5 },
            linear_k.max(60),
        ),
    ];
    for (kind, f1, f2, k) in regs {
        cases.push(Case {
            name: "quadratic-coupling".into(),
            problem: SaddleProblem::new(c.clone(), f1, f2).unwrap(),
            kind,
            init: PrimalDualPoint::new(vec![1.0; 3], vec![-1.0; 4]),
            iters: k,
        });
    }
    cases
}

fn schedule_for(case: &Case) -> Result<StepSchedule> {
    let l = case.problem.lipschitz();
    let split = Splitting::default();
    match case.kind {
        ScheduleKind::Constant => {
            let (tau, sigma) = default_steps(&l, &split, DEFAULT_SAFETY);
            StepSchedule::constant(tau, sigma, 1.0, split)
        }
        ScheduleKind::Geometric => {
            let sigma = default_geometric_sigma(&l, &split, DEFAULT_SAFETY);
            StepSchedule::geometric(sigma, case.problem.mu1(), case.problem.mu2(), 1.0, split)
        }
    }
}

fn run_case(case: &Case) -> Result<BenchRow> {
    let reference = saddle_reference(&case.problem)?;
    let schedule = schedule_for(case)?;
    let stop = StopRule::max_iters(case.iters).with_reference(reference.clone());
    let record = run(&case.problem, &schedule, case.init.clone(), &stop)?;
    let base = schedule.base();
    let k = record.iters;
    let gap = record.final_gap().unwrap_or(f64::NAN);
    let bound = ergodic_gap_bound(k.max(1), base.tau, base.sigma, &record.init, &reference);
    let ratio = if bound > 0.0 { gap / bound } else { 0.0 };
    let mut ok = record.certified && gap >= -1e-9 && gap <= bound + 1e-9;
    let (rate, theta) = if case.kind == ScheduleKind::Geometric {
        let pts: Vec<(f64, f64)> = record
            .trace
            .iter()
            .filter_map(|r| Some(((r.k + 1) as f64, r.dist_x_sq? + r.dist_y_sq?)))
            .collect();
        let slope = log_linear_slope(&pts, 1e-24);
        let theta = schedule.theta_ratio();
        if let Some(s) = slope {
            ok &= s <= theta.ln() + RATE_SLACK;
        }
        (slope.map(f64::exp), Some(theta))
    } else {
        (None, None)
    };
    Ok(BenchRow {
        problem: case.name.clone(),
        schedule: case.kind,
        k,
        gap,
        bound,
        ratio,
        rate,
        theta,
        certified: record.certified,
        ok,
        error: None,
    })
}

/// Runs the corpus in parallel; rows come back in corpus order.
pub fn run_corpus(seed: u64, iters: Option<usize>) -> Vec<BenchRow> {
    corpus(seed, iters)
        .par_iter()
        .map(|case| {
            run_case(case).unwrap_or_else(|e| BenchRow {
                problem: case.name.clone(),
                schedule: case.kind,
                k: 0,
                gap: f64::NAN,
                bound: f64::NAN,
                ratio: f64::NAN,
                rate: None,
                theta: None,
                certified: false,
                ok: false,
                error: Some(e.to_string()),
            })
        })
        .collect()
}

pub fn format_table(rows: &[BenchRow]) -> String {
    let dash = || "-".to_string();
    let mut out = format!(
        "{:<26} {:<9} {:>6} {:>12} {:>12} {:>9} {:>9} {:>9} {:>4}\n",
        "problem", "schedule", "K", "gap", "bound", "ratio", "rate", "theta", "ok"
    );
    for r in rows {
        let kind = match r.schedule {
            ScheduleKind::Constant => "constant",
            ScheduleKind::Geometric => "geometric",
        };
        out += &format!(
            "{:<26} {:<9} {:>6} {:>12.4e} {:>12.4e} {:>9.4} {:>9} {:>9} {:>4}\n",
            r.problem,
            kind,
            r.k,
            r.gap,
            r.bound,
            r.ratio,
            r.rate.map_or_else(dash, |v| format!("{v:.4}")),
            r.theta.map_or_else(dash, |v| format!("{v:.4}")),
            if r.ok { "yes" } else { "NO" },
        );
        if let Some(e) = &r.error {
            out += &format!("  error: {e}\n");
        }
    }
    out
}
