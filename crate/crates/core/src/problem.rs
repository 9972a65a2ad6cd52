//! Saddle-point problem instances `f(x, y) = f1(x) + Φ(x, y) − f2(y)`.
//!
//! The coupling `Φ` is one of two analytic families whose Lipschitz constants
//! are known exactly; callers that need something else can plug in a
//! [`CouplingOracle`] with their own constants, in which case the problem is
//! flagged as uncertified.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{all_finite, dist, dot, Matrix};
use crate::oracle::power_iteration;
use crate::prox::{Domain, Regularizer};

/// Relative inflation applied to power-iteration norms before they are used
/// as Lipschitz constants.
pub const NORM_INFLATION: f64 = 1.0 + 1e-8;

/// Slack used by [`SaddleProblem::certify_lipschitz`].
pub const LIPSCHITZ_SLACK: f64 = 1e-10;

/// `(∇ₓΦ, ∇_yΦ)` at some point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradPair {
    pub gx: Vec<f64>,
    pub gy: Vec<f64>,
}

impl GradPair {
    pub fn is_finite(&self) -> bool {
        all_finite(&self.gx) && all_finite(&self.gy)
    }
}

/// Iterate / candidate pair `(x, y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrimalDualPoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl PrimalDualPoint {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        Self { x, y }
    }

    pub fn zeros(n: usize, m: usize) -> Self {
        Self::new(vec![0.0; n], vec![0.0; m])
    }

    pub fn is_finite(&self) -> bool {
        all_finite(&self.x) && all_finite(&self.y)
    }

    /// `‖x − x'‖² + ‖y − y'‖²`.
    pub fn dist_sq(&self, other: &PrimalDualPoint) -> f64 {
        crate::linalg::dist_sq(&self.x, &other.x) + crate::linalg::dist_sq(&self.y, &other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CouplingKind {
    /// `Φ(x, y) = xᵀAy + bᵀx − cᵀy`.
    Bilinear,
    /// Bilinear plus `(rho1/2)‖x‖² − (rho2/2)‖y‖²`.
    #[serde(alias = "quadratic")]
    QuadraticRegularizedBilinear,
}

/// Analytic convex-concave coupling with `A ∈ R^{n×m}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Coupling {
    pub kind: CouplingKind,
    pub a: Matrix,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    pub rho1: f64,
    pub rho2: f64,
}

impl Coupling {
    pub fn bilinear(a: Matrix, b: Vec<f64>, c: Vec<f64>) -> Result<Self> {
        let cp = Self {
            kind: CouplingKind::Bilinear,
            a,
            b,
            c,
            rho1: 0.0,
            rho2: 0.0,
        };
        cp.validate()?;
        Ok(cp)
    }

    pub fn quadratic(a: Matrix, b: Vec<f64>, c: Vec<f64>, rho1: f64, rho2: f64) -> Result<Self> {
        let cp = Self {
            kind: CouplingKind::QuadraticRegularizedBilinear,
            a,
            b,
            c,
            rho1,
            rho2,
        };
        cp.validate()?;
        Ok(cp)
    }

    /// `Φ ≡ 0` on `R^n × R^m`.
    pub fn zero(n: usize, m: usize) -> Self {
        Self {
            kind: CouplingKind::Bilinear,
            a: Matrix::zeros(n, m),
            b: vec![0.0; n],
            c: vec![0.0; m],
            rho1: 0.0,
            rho2: 0.0,
        }
    }

    pub fn n(&self) -> usize {
        self.a.rows()
    }

    pub fn m(&self) -> usize {
        self.a.cols()
    }

    fn validate(&self) -> Result<()> {
        if self.n() == 0 || self.m() == 0 {
            return Err(Error::Dimension("coupling matrix must be non-empty".into()));
        }
        if self.b.len() != self.n() || self.c.len() != self.m() {
            return Err(Error::Dimension(format!(
                "A is {}x{} but b has {} and c has {} entries",
                self.n(),
                self.m(),
                self.b.len(),
                self.c.len()
            )));
        }
        if !all_finite(self.a.as_slice()) || !all_finite(&self.b) || !all_finite(&self.c) {
            return Err(Error::NonFinite("coupling data".into()));
        }
        let rho_ok = |r: f64| r.is_finite() && r >= 0.0;
        if !rho_ok(self.rho1) || !rho_ok(self.rho2) {
            return Err(Error::InvalidParameter("rho1, rho2 must be finite and >= 0".into()));
        }
        if self.kind == CouplingKind::Bilinear && (self.rho1 != 0.0 || self.rho2 != 0.0) {
            return Err(Error::InvalidParameter(
                "bilinear coupling cannot carry rho1/rho2".into(),
            ));
        }
        Ok(())
    }

    /// Exact Lipschitz constants; `‖A‖` comes from power iteration and is
    /// inflated by [`NORM_INFLATION`].
    pub fn lipschitz(&self) -> Result<LipschitzQuad> {
        let norm_a = crate::oracle::power_norm(&self.a, 1e-10)? * NORM_INFLATION;
        Ok(LipschitzQuad {
            lxx: self.rho1,
            lxy: norm_a,
            lyx: norm_a,
            lyy: self.rho2,
        })
    }
}

/// Smooth convex-concave coupling given by value and gradient callbacks.
pub trait CouplingOracle: Send + Sync + fmt::Debug {
    fn dims(&self) -> (usize, usize);
    fn value(&self, x: &[f64], y: &[f64]) -> f64;
    fn grad_x(&self, x: &[f64], y: &[f64]) -> Vec<f64>;
    fn grad_y(&self, x: &[f64], y: &[f64]) -> Vec<f64>;
}

impl CouplingOracle for Coupling {
    fn dims(&self) -> (usize, usize) {
        (self.n(), self.m())
    }

    fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        let ay = self.a.mul_vec(y);
        let mut v = dot(x, &ay) + dot(&self.b, x) - dot(&self.c, y);
        if self.kind == CouplingKind::QuadraticRegularizedBilinear {
            v += 0.5 * self.rho1 * dot(x, x) - 0.5 * self.rho2 * dot(y, y);
        }
        v
    }

    fn grad_x(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut g = self.a.mul_vec(y);
        for (gi, (bi, xi)) in g.iter_mut().zip(self.b.iter().zip(x)) {
            *gi += bi + self.rho1 * xi;
        }
        g
    }

    fn grad_y(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let mut g = self.a.mul_t_vec(x);
        for (gi, (ci, yi)) in g.iter_mut().zip(self.c.iter().zip(y)) {
            *gi += -ci - self.rho2 * yi;
        }
        g
    }
}

/// Either an analytic coupling or a user-supplied oracle.
#[derive(Debug, Clone)]
pub enum CouplingTerm {
    Analytic(Coupling),
    Custom(Arc<dyn CouplingOracle>),
}

impl CouplingTerm {
    fn oracle(&self) -> &dyn CouplingOracle {
        match self {
            CouplingTerm::Analytic(c) => c,
            CouplingTerm::Custom(o) => o.as_ref(),
        }
    }

    pub fn analytic(&self) -> Option<&Coupling> {
        match self {
            CouplingTerm::Analytic(c) => Some(c),
            CouplingTerm::Custom(_) => None,
        }
    }

    pub fn value(&self, x: &[f64], y: &[f64]) -> f64 {
        self.oracle().value(x, y)
    }

    pub fn grad_x(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        self.oracle().grad_x(x, y)
    }

    pub fn grad_y(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        self.oracle().grad_y(x, y)
    }
}

/// Gradient Lipschitz constants of the coupling:
/// `‖∇ₓΦ(x,y) − ∇ₓΦ(x',y')‖ ≤ Lxx‖x − x'‖ + Lxy‖y − y'‖` and the mirrored
/// bound for `∇_yΦ` with `Lyx`, `Lyy`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LipschitzQuad {
    pub lxx: f64,
    pub lxy: f64,
    pub lyx: f64,
    pub lyy: f64,
}

impl LipschitzQuad {
    pub const ZERO: LipschitzQuad = LipschitzQuad {
        lxx: 0.0,
        lxy: 0.0,
        lyx: 0.0,
        lyy: 0.0,
    };

    /// Constants of a purely bilinear coupling with `‖A‖ = norm_a`.
    pub fn bilinear(norm_a: f64) -> Self {
        Self {
            lxx: 0.0,
            lxy: norm_a,
            lyx: norm_a,
            lyy: 0.0,
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = |v: f64| v.is_finite() && v >= 0.0;
        if [self.lxx, self.lxy, self.lyx, self.lyy].into_iter().all(ok) {
            Ok(())
        } else {
            Err(Error::InvalidParameter("Lipschitz constants must be finite and >= 0".into()))
        }
    }
}

/// Outcome of random-pair sampling of the gradient Lipschitz bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LipschitzReport {
    pub pass: bool,
    pub samples: usize,
    pub failures: usize,
    /// Largest observed `lhs / rhs` over both inequalities.
    pub worst_ratio: f64,
}

/// A complete saddle-point problem instance.
#[derive(Debug, Clone)]
pub struct SaddleProblem {
    coupling: CouplingTerm,
    f1: Regularizer,
    f2: Regularizer,
    lipschitz: LipschitzQuad,
    mu1: f64,
    mu2: f64,
    n: usize,
    m: usize,
}

impl SaddleProblem {
    pub fn new(coupling: Coupling, f1: Regularizer, f2: Regularizer) -> Result<Self> {
        let lipschitz = coupling.lipschitz()?;
        let (n, m) = (coupling.n(), coupling.m());
        Self::assemble(CouplingTerm::Analytic(coupling), n, m, f1, f2, lipschitz)
    }

    /// Problem with a caller-supplied coupling; the Lipschitz constants are
    /// taken on trust, so runs on it are never certified.
    pub fn with_custom_coupling(
        oracle: Arc<dyn CouplingOracle>,
        lipschitz: LipschitzQuad,
        f1: Regularizer,
        f2: Regularizer,
    ) -> Result<Self> {
        let (n, m) = oracle.dims();
        Self::assemble(CouplingTerm::Custom(oracle), n, m, f1, f2, lipschitz)
    }

    /// Replaces the stored Lipschitz constants (used to build deliberately
    /// wrong instances for negative tests).
    pub fn with_lipschitz(mut self, lipschitz: LipschitzQuad) -> Result<Self> {
        lipschitz.validate()?;
        self.lipschitz = lipschitz;
        Ok(self)
    }

    fn assemble(
        coupling: CouplingTerm,
        n: usize,
        m: usize,
        f1: Regularizer,
        f2: Regularizer,
        lipschitz: LipschitzQuad,
    ) -> Result<Self> {
        f1.validate(n)?;
        f2.validate(m)?;
        lipschitz.validate()?;
        let (mu1, mu2) = (f1.modulus(), f2.modulus());
        Ok(Self {
            coupling,
            f1,
            f2,
            lipschitz,
            mu1,
            mu2,
            n,
            m,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn coupling(&self) -> &CouplingTerm {
        &self.coupling
    }

    pub fn f1(&self) -> &Regularizer {
        &self.f1
    }

    pub fn f2(&self) -> &Regularizer {
        &self.f2
    }

    pub fn lipschitz(&self) -> LipschitzQuad {
        self.lipschitz
    }

    pub fn mu1(&self) -> f64 {
        self.mu1
    }

    pub fn mu2(&self) -> f64 {
        self.mu2
    }

    /// True when the stored Lipschitz constants are upper bounds known by
    /// construction: an analytic coupling whose constants were not replaced
    /// by smaller ones.
    pub fn lipschitz_certified(&self) -> bool {
        let CouplingTerm::Analytic(c) = &self.coupling else {
            return false;
        };
        let Ok(exact) = c.lipschitz() else { return false };
        let l = &self.lipschitz;
        l.lxx >= exact.lxx
            && l.lyy >= exact.lyy
            && l.lxy * NORM_INFLATION >= exact.lxy
            && l.lyx * NORM_INFLATION >= exact.lyx
    }

    pub fn check_dims(&self, p: &PrimalDualPoint) -> Result<()> {
        if p.x.len() != self.n || p.y.len() != self.m {
            return Err(Error::Dimension(format!(
                "point has dimensions ({}, {}), problem expects ({}, {})",
                p.x.len(),
                p.y.len(),
                self.n,
                self.m
            )));
        }
        Ok(())
    }

    pub fn in_domain(&self, p: &PrimalDualPoint) -> bool {
        self.f1.in_domain(&p.x) && self.f2.in_domain(&p.y)
    }

    /// Extended-real objective with the `+∞ − (+∞) = −∞` convention:
    /// `−∞` whenever `y ∉ dom f2`, else `+∞` whenever `x ∉ dom f1`.
    pub fn eval_f(&self, p: &PrimalDualPoint) -> Result<f64> {
        self.check_dims(p)?;
        Ok(self.eval_unchecked(&p.x, &p.y))
    }

    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        let f2 = self.f2.value(y);
        if f2 == f64::INFINITY {
            return f64::NEG_INFINITY;
        }
        let f1 = self.f1.value(x);
        if f1 == f64::INFINITY {
            return f64::INFINITY;
        }
        f1 + self.coupling.value(x, y) - f2
    }

    /// `Φ(x, y)`.
    pub fn phi(&self, p: &PrimalDualPoint) -> Result<f64> {
        self.check_dims(p)?;
        Ok(self.coupling.value(&p.x, &p.y))
    }

    pub fn grad_x(&self, p: &PrimalDualPoint) -> Result<Vec<f64>> {
        self.check_dims(p)?;
        Ok(self.coupling.grad_x(&p.x, &p.y))
    }

    pub fn grad_y(&self, p: &PrimalDualPoint) -> Result<Vec<f64>> {
        self.check_dims(p)?;
        Ok(self.coupling.grad_y(&p.x, &p.y))
    }

    /// Both partial gradients at `p`.
    pub fn grad_pair(&self, p: &PrimalDualPoint) -> Result<GradPair> {
        self.check_dims(p)?;
        Ok(self.grads(p))
    }

    /// Both partial gradients at `p` (dimensions assumed checked).
    pub(crate) fn grads(&self, p: &PrimalDualPoint) -> GradPair {
        GradPair {
            gx: self.coupling.grad_x(&p.x, &p.y),
            gy: self.coupling.grad_y(&p.x, &p.y),
        }
    }

    /// Samples the Lipschitz inequalities with unbounded coordinates drawn
    /// from `[−10, 10]`.
    pub fn certify_lipschitz(&self, samples: usize, seed: u64) -> Result<LipschitzReport> {
        self.certify_lipschitz_in(samples, seed, 10.0)
    }

    /// Samples `samples` random pairs in `dom f1 × dom f2`, where coordinates
    /// of an unbounded domain are drawn from `[−radius, radius]`. For analytic
    /// couplings one extra pair per inequality is aligned with the top singular
    /// direction of `A`, the worst case for the cross constants.
    pub fn certify_lipschitz_in(
        &self,
        samples: usize,
        seed: u64,
        radius: f64,
    ) -> Result<LipschitzReport> {
        if samples == 0 {
            return Err(Error::InvalidParameter("certify_lipschitz needs samples >= 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut pairs = Vec::with_capacity(samples + 2);
        for _ in 0..samples {
            let p = self.sample_point(&mut rng, radius);
            let q = self.sample_point(&mut rng, radius);
            pairs.push((p, q));
        }
        if let CouplingTerm::Analytic(c) = &self.coupling {
            if !c.a.is_zero() {
                let (sigma, right) = power_iteration(&c.a, 1e-12, 10_000)?;
                let left: Vec<f64> = c.a.mul_vec(&right).iter().map(|v| v / sigma).collect();
                let base = self.sample_point(&mut rng, radius);
                let shifted_y: Vec<f64> = base.y.iter().zip(&right).map(|(a, b)| a + b).collect();
                let shifted_x: Vec<f64> = base.x.iter().zip(&left).map(|(a, b)| a + b).collect();
                let qy = PrimalDualPoint::new(base.x.clone(), self.f2.project(&shifted_y));
                let qx = PrimalDualPoint::new(self.f1.project(&shifted_x), base.y.clone());
                pairs.push((base.clone(), qy));
                pairs.push((base, qx));
            }
        }

        let l = self.lipschitz;
        let mut worst_ratio = 0.0f64;
        let mut failures = 0;
        for (p, q) in &pairs {
            let GradPair { gx: gxp, gy: gyp } = self.grads(p);
            let GradPair { gx: gxq, gy: gyq } = self.grads(q);
            let dx = dist(&p.x, &q.x);
            let dy = dist(&p.y, &q.y);
            let checks = [
                (dist(&gxp, &gxq), l.lxx * dx + l.lxy * dy),
                (dist(&gyp, &gyq), l.lyx * dx + l.lyy * dy),
            ];
            for (lhs, rhs) in checks {
                if lhs > rhs + LIPSCHITZ_SLACK {
                    failures += 1;
                }
                let ratio = if rhs > 0.0 {
                    lhs / rhs
                } else if lhs <= LIPSCHITZ_SLACK {
                    0.0
                } else {
                    f64::INFINITY
                };
                worst_ratio = worst_ratio.max(ratio);
            }
        }
        Ok(LipschitzReport {
            pass: failures == 0,
            samples: pairs.len(),
            failures,
            worst_ratio,
        })
    }

    /// Random point of `dom f1 × dom f2` (see [`sample_domain`]).
    pub fn sample_point(&self, rng: &mut impl Rng, radius: f64) -> PrimalDualPoint {
        PrimalDualPoint::new(
            sample_domain(&self.f1.domain(), self.n, rng, radius),
            sample_domain(&self.f2.domain(), self.m, rng, radius),
        )
    }
}

/// Draws a point of `domain`; unbounded coordinates come from `[−radius, radius]`.
pub fn sample_domain(domain: &Domain, dim: usize, rng: &mut impl Rng, radius: f64) -> Vec<f64> {
    match domain {
        Domain::All => (0..dim).map(|_| rng.gen_range(-radius..=radius)).collect(),
        Domain::Box { lo, hi } => lo
            .iter()
            .zip(hi)
            .map(|(l, h)| if l < h { rng.gen_range(*l..=*h) } else { *l })
            .collect(),
        Domain::Simplex => {
            // normalized exponentials are uniform on the simplex
            let e: Vec<f64> = (0..dim).map(|_| -(1.0 - rng.gen::<f64>()).ln()).collect();
            let s: f64 = e.iter().sum();
            e.iter().map(|v| v / s).collect()
        }
    }
}
