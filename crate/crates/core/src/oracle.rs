//! Brute-force references: finite differences, grid prox, small matrix games,
//! closed-form strongly convex saddle points and spectral norms.
//!
//! These are deliberately naive. They exist so the solver and the certificate
//! engine can be checked against something that shares no code path with
//! them.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::{norm, solve_dense, Matrix};
use crate::problem::{CouplingKind, CouplingOracle, PrimalDualPoint, SaddleProblem};
use crate::prox::Regularizer;

/// Central-difference gradients of `Φ` in every coordinate of `x` and `y`.
pub fn fd_gradient<C: CouplingOracle + ?Sized>(
    coupling: &C,
    p: &PrimalDualPoint,
    h: f64,
) -> (Vec<f64>, Vec<f64>) {
    assert!(h > 0.0, "finite-difference step must be positive");
    let mut x = p.x.clone();
    let mut y = p.y.clone();
    let mut gx = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        let orig = x[i];
        x[i] = orig + h;
        let up = coupling.value(&x, &y);
        x[i] = orig - h;
        let down = coupling.value(&x, &y);
        x[i] = orig;
        gx.push((up - down) / (2.0 * h));
    }
    let mut gy = Vec::with_capacity(y.len());
    for j in 0..y.len() {
        let orig = y[j];
        y[j] = orig + h;
        let up = coupling.value(&x, &y);
        y[j] = orig - h;
        let down = coupling.value(&x, &y);
        y[j] = orig;
        gy.push((up - down) / (2.0 * h));
    }
    (gx, gy)
}

/// Grid values `k·res` covering `[lo, hi]`, with both endpoints included.
fn axis(lo: f64, hi: f64, res: f64) -> Vec<f64> {
    let mut pts = vec![lo];
    let mut k = (lo / res).floor() as i64 + 1;
    loop {
        let v = k as f64 * res;
        if v >= hi {
            break;
        }
        if v > lo {
            pts.push(v);
        }
        k += 1;
    }
    if hi > lo {
        pts.push(hi);
    }
    pts
}

/// Exhaustive grid minimizer of `f(u) + (1/2τ)‖u − v‖²` for `dim(v) ≤ 2`.
///
/// The search region is the domain for box and simplex indicators, and the
/// box spanned by `0` and `v` (padded by two cells) otherwise, which always
/// contains the minimizer for the full-space kinds.
pub fn grid_prox(reg: &Regularizer, tau: f64, v: &[f64], resolution: f64) -> Result<Vec<f64>> {
    let dim = v.len();
    if dim == 0 || dim > 2 {
        return Err(Error::InvalidParameter(format!(
            "grid_prox supports dimension 1 or 2, got {dim}"
        )));
    }
    if !(resolution > 0.0) || !(tau > 0.0) {
        return Err(Error::InvalidParameter("grid_prox needs tau, resolution > 0".into()));
    }
    let objective = |u: &[f64]| reg.prox_objective(tau, v, u);

    let candidates: Vec<Vec<f64>> = match reg {
        Regularizer::Simplex => {
            if dim == 1 {
                vec![vec![1.0]]
            } else {
                axis(0.0, 1.0, resolution)
                    .into_iter()
                    .map(|a| vec![a, 1.0 - a])
                    .collect()
            }
        }
        _ => {
            let axes: Vec<Vec<f64>> = (0..dim)
                .map(|i| match reg {
                    Regularizer::Box { lo, hi } => axis(lo[i], hi[i], resolution),
                    _ => axis(
                        v[i].min(0.0) - 2.0 * resolution,
                        v[i].max(0.0) + 2.0 * resolution,
                        resolution,
                    ),
                })
                .collect();
            if dim == 1 {
                axes[0].iter().map(|a| vec![*a]).collect()
            } else {
                axes[0]
                    .iter()
                    .flat_map(|a| axes[1].iter().map(move |b| vec![*a, *b]))
                    .collect()
            }
        }
    };

    let mut best = (f64::INFINITY, None);
    for u in candidates {
        let val = objective(&u);
        if val < best.0 {
            best = (val, Some(u));
        }
    }
    best.1.ok_or_else(|| Error::InvalidParameter("empty search grid".into()))
}

/// Equilibrium of the zero-sum game `min_x max_y xᵀAy` over simplices.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MatrixGameSolution {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub value: f64,
}

impl MatrixGameSolution {
    pub fn point(&self) -> PrimalDualPoint {
        PrimalDualPoint::new(self.x.clone(), self.y.clone())
    }
}

const GAME_MAX_DIM: usize = 4;

fn subsets(n: usize, size: usize) -> Vec<Vec<usize>> {
    (0u32..(1 << n))
        .filter(|mask| mask.count_ones() as usize == size)
        .map(|mask| (0..n).filter(|i| mask & (1 << i) != 0).collect())
        .collect()
}

/// Solves `Σ_{i∈rows} w_i M[i][j] = v` for `j ∈ cols`, `Σ w = 1`.
fn equalize(m: &Matrix, rows: &[usize], cols: &[usize]) -> Option<(Vec<f64>, f64)> {
    let s = rows.len();
    let mut sys = Matrix::zeros(s + 1, s + 1);
    let mut rhs = vec![0.0; s + 1];
    for (eq, &j) in cols.iter().enumerate() {
        for (var, &i) in rows.iter().enumerate() {
            sys[(eq, var)] = m[(i, j)];
        }
        sys[(eq, s)] = -1.0;
    }
    for var in 0..s {
        sys[(s, var)] = 1.0;
    }
    rhs[s] = 1.0;
    let z = solve_dense(&sys, &rhs, 1e-12)?;
    Some((z[..s].to_vec(), z[s]))
}

fn scatter(dim: usize, support: &[usize], w: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; dim];
    for (&i, &wi) in support.iter().zip(w) {
        out[i] = wi.max(0.0);
    }
    let s: f64 = out.iter().sum();
    out.iter_mut().for_each(|v| *v /= s);
    out
}

fn enumerate_supports(a: &Matrix, tol: f64) -> Option<MatrixGameSolution> {
    let (n, m) = (a.rows(), a.cols());
    let at = a.transpose();
    for size in 1..=n.min(m) {
        for rows in subsets(n, size) {
            for cols in subsets(m, size) {
                let Some((xs, v)) = equalize(a, &rows, &cols) else { continue };
                let Some((ys, w)) = equalize(&at, &cols, &rows) else { continue };
                if xs.iter().chain(&ys).any(|p| *p < -tol) || (v - w).abs() > tol {
                    continue;
                }
                let x = scatter(n, &rows, &xs);
                let y = scatter(m, &cols, &ys);
                // the maximizer cannot gain against x, the minimizer cannot against y
                let col_payoffs = a.mul_t_vec(&x);
                let row_payoffs = a.mul_vec(&y);
                if col_payoffs.iter().all(|p| *p <= v + tol)
                    && row_payoffs.iter().all(|p| *p >= v - tol)
                {
                    return Some(MatrixGameSolution { x, y, value: v });
                }
            }
        }
    }
    None
}

/// Equilibrium of `min_x max_y xᵀAy` for games up to 4x4 by exhaustive
/// support enumeration.
///
/// Square supports suffice for zero-sum games (every game has a basic optimal
/// pair with a square kernel). If no support pair survives the pivot
/// tolerance the matrix is perturbed by `1e−9` and enumeration is retried.
pub fn solve_matrix_game(a: &Matrix) -> Result<MatrixGameSolution> {
    let (n, m) = (a.rows(), a.cols());
    if n == 0 || m == 0 || n > GAME_MAX_DIM || m > GAME_MAX_DIM {
        return Err(Error::InvalidParameter(format!(
            "matrix games are limited to 1..={GAME_MAX_DIM} per side, got {n}x{m}"
        )));
    }
    let scale = a.as_slice().iter().fold(1.0f64, |acc, v| acc.max(v.abs()));
    if let Some(sol) = enumerate_supports(a, 1e-11 * scale) {
        return Ok(sol);
    }
    let mut perturbed = a.clone();
    for i in 0..n {
        for j in 0..m {
            perturbed[(i, j)] += 1e-9 * scale * (((i * m + j) % 7) as f64 - 3.0) / 3.0;
        }
    }
    let sol = enumerate_supports(&perturbed, 1e-11 * scale).ok_or(Error::NoEquilibrium)?;
    // re-validate against the original game
    let value = crate::linalg::dot(&sol.x, &a.mul_vec(&sol.y));
    let tol = 1e-8 * scale;
    if a.mul_t_vec(&sol.x).iter().all(|p| *p <= value + tol)
        && a.mul_vec(&sol.y).iter().all(|p| *p >= value - tol)
    {
        Ok(MatrixGameSolution { value, ..sol })
    } else {
        Err(Error::NoEquilibrium)
    }
}

/// Saddle point of `(mu1/2)‖x‖² + xᵀAy + bᵀx − cᵀy − (mu2/2)‖y‖²`.
///
/// Eliminates `y = (Aᵀx − c)/mu2` and solves
/// `(mu1·I + AAᵀ/mu2) x = Ac/mu2 − b`, which is SPD for `mu1 > 0`.
pub fn solve_regularized_bilinear(
    a: &Matrix,
    b: &[f64],
    c: &[f64],
    mu1: f64,
    mu2: f64,
) -> Result<PrimalDualPoint> {
    let (n, m) = (a.rows(), a.cols());
    if b.len() != n || c.len() != m {
        return Err(Error::Dimension(format!(
            "A is {n}x{m} but b has {} and c has {} entries",
            b.len(),
            c.len()
        )));
    }
    if !(mu1 > 0.0 && mu2 > 0.0) {
        return Err(Error::InvalidParameter("mu1, mu2 must be > 0".into()));
    }
    let mut sys = a.matmul(&a.transpose());
    sys.scale(1.0 / mu2);
    for i in 0..n {
        sys[(i, i)] += mu1;
    }
    let ac = a.mul_vec(c);
    let rhs: Vec<f64> = ac.iter().zip(b).map(|(v, bi)| v / mu2 - bi).collect();
    let x = solve_dense(&sys, &rhs, 1e-300)
        .ok_or_else(|| Error::InvalidParameter("stationarity system is singular".into()))?;
    let y: Vec<f64> = a
        .mul_t_vec(&x)
        .iter()
        .zip(c)
        .map(|(v, ci)| (v - ci) / mu2)
        .collect();
    Ok(PrimalDualPoint::new(x, y))
}

/// Closed-form or enumerated saddle point for the problem families the
/// oracles cover:
///
/// - bilinear coupling with simplex indicators on both sides (games up to
///   4x4; `b` and `c` fold into the payoff matrix since both sides sum to 1);
/// - zero or squared-norm regularizers whose moduli, plus any coupling
///   curvature `rho`, are positive on both sides.
pub fn saddle_reference(problem: &SaddleProblem) -> Result<PrimalDualPoint> {
    let cp = problem.coupling().analytic().ok_or_else(|| {
        Error::InapplicableReference("no oracle for custom couplings".into())
    })?;
    let (n, m) = (problem.n(), problem.m());
    match (problem.f1(), problem.f2()) {
        (Regularizer::Simplex, Regularizer::Simplex)
            if cp.kind == CouplingKind::Bilinear =>
        {
            let mut payoff = cp.a.clone();
            for i in 0..n {
                for j in 0..m {
                    payoff[(i, j)] += cp.b[i] - cp.c[j];
                }
            }
            solve_matrix_game(&payoff).map(|s| s.point())
        }
        (f1 @ (Regularizer::Zero | Regularizer::SquaredNorm { .. }),
         f2 @ (Regularizer::Zero | Regularizer::SquaredNorm { .. })) => {
            let (mu1, mu2) = (f1.modulus() + cp.rho1, f2.modulus() + cp.rho2);
            if mu1 > 0.0 && mu2 > 0.0 {
                solve_regularized_bilinear(&cp.a, &cp.b, &cp.c, mu1, mu2)
            } else {
                Err(Error::InapplicableReference(
                    "quadratic oracle needs positive curvature on both sides".into(),
                ))
            }
        }
        _ => Err(Error::InapplicableReference(
            "no oracle covers this regularizer combination".into(),
        )),
    }
}

/// Spectral norm `‖A‖` by power iteration on `AᵀA`.
pub fn power_norm(a: &Matrix, tol: f64) -> Result<f64> {
    if a.is_zero() {
        return Ok(0.0);
    }
    power_iteration(a, tol, 10_000).map(|(s, _)| s)
}

/// Largest singular value of `A` and its right singular vector.
///
/// Starts from the normalized all-ones vector, or from the unit vector of the
/// heaviest column when all-ones lies in the kernel, and stops once
/// successive estimates of `σ²` agree to relative `tol`.
pub fn power_iteration(a: &Matrix, tol: f64, max_iter: usize) -> Result<(f64, Vec<f64>)> {
    let m = a.cols();
    if a.is_zero() {
        return Ok((0.0, vec![0.0; m]));
    }
    let mut v = vec![1.0 / (m as f64).sqrt(); m];
    let av = a.mul_vec(&v);
    if norm(&av) <= 1e-14 * a.frobenius() {
        let at = a.transpose();
        let heaviest = (0..m)
            .max_by(|&i, &j| norm(at.row(i)).total_cmp(&norm(at.row(j))))
            .unwrap_or(0);
        v = vec![0.0; m];
        v[heaviest] = 1.0;
    }
    let mut estimate = 0.0;
    for _ in 0..max_iter {
        let w = a.mul_t_vec(&a.mul_vec(&v));
        let rayleigh = crate::linalg::dot(&v, &w);
        let wn = norm(&w);
        if wn == 0.0 {
            return Ok((0.0, v));
        }
        v = w.iter().map(|x| x / wn).collect();
        if (rayleigh - estimate).abs() <= tol * rayleigh {
            return Ok((rayleigh.sqrt(), v));
        }
        estimate = rayleigh;
    }
    Err(Error::PowerIteration {
        iterations: max_iter,
        estimate: estimate.sqrt(),
    })
}
