//! Proximal operators for the regularizers `f1` and `f2`.
//!
//! Every regularizer is a closed-form, prox-friendly convex function that
//! carries its own strong-convexity modulus and effective domain. The solver
//! only ever calls [`Regularizer::prox`]; the remaining methods back the
//! objective evaluation and the certificate checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{all_finite, dist_sq};

/// Tolerance used for domain membership of box and simplex sets.
pub const DOMAIN_TOL: f64 = 1e-12;

/// Prox-capable convex regularizer.
///
/// The serialized form is the `{kind, mu?, w?, lo?, hi?}` object used in
/// problem-definition files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Regularizer {
    /// `f ≡ 0`.
    Zero,
    /// `f(u) = (mu/2)‖u‖²`.
    #[serde(rename = "sqnorm")]
    SquaredNorm { mu: f64 },
    /// `f(u) = w‖u‖₁`.
    L1 { w: f64 },
    /// Indicator of the box `[lo, hi]`.
    Box { lo: Vec<f64>, hi: Vec<f64> },
    /// Indicator of the unit simplex `{u ≥ 0, Σu = 1}`.
    Simplex,
}

/// Effective domain of a regularizer.
#[derive(Debug, Clone, PartialEq)]
pub enum Domain {
    All,
    Box { lo: Vec<f64>, hi: Vec<f64> },
    Simplex,
}

impl Domain {
    pub fn contains(&self, u: &[f64]) -> bool {
        match self {
            Domain::All => true,
            Domain::Box { lo, hi } => u
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(v, (l, h))| *v >= l - DOMAIN_TOL && *v <= h + DOMAIN_TOL),
            Domain::Simplex => {
                let sum: f64 = u.iter().sum();
                !u.is_empty()
                    && u.iter().all(|v| *v >= -DOMAIN_TOL)
                    && (sum - 1.0).abs() <= DOMAIN_TOL * u.len() as f64
            }
        }
    }
}

impl Regularizer {
    /// Box indicator with the same bounds on every coordinate.
    pub fn uniform_box(dim: usize, lo: f64, hi: f64) -> Self {
        Regularizer::Box {
            lo: vec![lo; dim],
            hi: vec![hi; dim],
        }
    }

    /// Checks parameters and, for the box, that its dimension is `dim`.
    pub fn validate(&self, dim: usize) -> Result<()> {
        if dim == 0 {
            return Err(Error::Dimension("regularizer dimension must be positive".into()));
        }
        match self {
            Regularizer::Zero | Regularizer::Simplex => Ok(()),
            Regularizer::SquaredNorm { mu } => {
                if mu.is_finite() && *mu >= 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!("sqnorm needs mu >= 0, got {mu}")))
                }
            }
            Regularizer::L1 { w } => {
                if w.is_finite() && *w > 0.0 {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!("l1 needs w > 0, got {w}")))
                }
            }
            Regularizer::Box { lo, hi } => {
                if lo.len() != dim || hi.len() != dim {
                    return Err(Error::Dimension(format!(
                        "box bounds have lengths {}/{}, expected {dim}",
                        lo.len(),
                        hi.len()
                    )));
                }
                if !all_finite(lo) || !all_finite(hi) {
                    return Err(Error::InvalidParameter("box bounds must be finite".into()));
                }
                if lo.iter().zip(hi).any(|(l, h)| l > h) {
                    return Err(Error::InvalidParameter("box needs lo <= hi".into()));
                }
                Ok(())
            }
        }
    }

    /// Strong-convexity modulus.
    pub fn modulus(&self) -> f64 {
        match self {
            Regularizer::SquaredNorm { mu } => *mu,
            _ => 0.0,
        }
    }

    pub fn domain(&self) -> Domain {
        match self {
            Regularizer::Box { lo, hi } => Domain::Box {
                lo: lo.clone(),
                hi: hi.clone(),
            },
            Regularizer::Simplex => Domain::Simplex,
            _ => Domain::All,
        }
    }

    pub fn in_domain(&self, u: &[f64]) -> bool {
        self.domain().contains(u)
    }

    /// Function value, `+∞` outside the domain.
    pub fn value(&self, u: &[f64]) -> f64 {
        match self {
            Regularizer::Zero => 0.0,
            Regularizer::SquaredNorm { mu } => 0.5 * mu * u.iter().map(|v| v * v).sum::<f64>(),
            Regularizer::L1 { w } => w * u.iter().map(|v| v.abs()).sum::<f64>(),
            Regularizer::Box { .. } | Regularizer::Simplex => {
                if self.in_domain(u) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// `argmin_u f(u) + (1/2τ)‖u − v‖²`.
    pub fn prox(&self, tau: f64, v: &[f64]) -> Result<Vec<f64>> {
        if !(tau > 0.0) || !tau.is_finite() {
            return Err(Error::InvalidParameter(format!("prox step must be > 0, got {tau}")));
        }
        if !all_finite(v) {
            return Err(Error::NonFinite("prox argument".into()));
        }
        Ok(match self {
            Regularizer::Zero => v.to_vec(),
            Regularizer::SquaredNorm { mu } => {
                let s = 1.0 / (1.0 + tau * mu);
                v.iter().map(|x| x * s).collect()
            }
            Regularizer::L1 { w } => v.iter().map(|x| soft_threshold(*x, tau * w)).collect(),
            Regularizer::Box { lo, hi } => {
                if lo.len() != v.len() {
                    return Err(Error::Dimension(format!(
                        "box of dimension {} applied to vector of length {}",
                        lo.len(),
                        v.len()
                    )));
                }
                clamp_box(v, lo, hi)
            }
            Regularizer::Simplex => project_simplex(v),
        })
    }

    /// Euclidean projection onto the domain (identity for full-space kinds).
    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        match self {
            Regularizer::Box { lo, hi } => clamp_box(v, lo, hi),
            Regularizer::Simplex => project_simplex(v),
            _ => v.to_vec(),
        }
    }

    /// Objective of the prox subproblem at `u`.
    pub fn prox_objective(&self, tau: f64, v: &[f64], u: &[f64]) -> f64 {
        self.value(u) + dist_sq(u, v) / (2.0 * tau)
    }
}

pub fn soft_threshold(x: f64, threshold: f64) -> f64 {
    if x > threshold {
        x - threshold
    } else if x < -threshold {
        x + threshold
    } else {
        0.0
    }
}

fn clamp_box(v: &[f64], lo: &[f64], hi: &[f64]) -> Vec<f64> {
    v.iter()
        .zip(lo.iter().zip(hi))
        .map(|(x, (l, h))| x.clamp(*l, *h))
        .collect()
}

/// Euclidean projection onto the unit simplex by sorting and thresholding.
///
/// Ties in the sort do not change the threshold, so any stable order works.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    if v.is_empty() {
        return Vec::new();
    }
    let mut sorted = v.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumsum = 0.0;
    let mut threshold = 0.0;
    for (j, u) in sorted.iter().enumerate() {
        cumsum += u;
        let candidate = (cumsum - 1.0) / (j + 1) as f64;
        if u - candidate > 0.0 {
            threshold = candidate;
        }
    }
    v.iter().map(|x| (x - threshold).max(0.0)).collect()
}

/// Worst optimality violation of a claimed prox output `u` against `probes`.
///
/// Returns `max_p [φ(u) − φ(p)]` with `φ(w) = f(w) + (1/2τ)‖w − v‖²`; a value
/// `≤ 0` (up to rounding) certifies `u` against the probe set. An empty probe
/// set yields `−∞`.
pub fn prox_residual(reg: &Regularizer, tau: f64, v: &[f64], u: &[f64], probes: &[Vec<f64>]) -> f64 {
    let at_u = reg.prox_objective(tau, v, u);
    probes
        .iter()
        .map(|p| {
            let at_p = reg.prox_objective(tau, v, p);
            if at_p.is_infinite() {
                f64::NEG_INFINITY
            } else {
                at_u - at_p
            }
        })
        .fold(f64::NEG_INFINITY, f64::max)
}
