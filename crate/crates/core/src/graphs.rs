//! Maximal monotone graphs on the real line, their Yosida regularizations,
//! and the operators acting on fields that perturb the balance equation.
//!
//! For a maximal monotone graph beta with resolvent J_eps = (I + eps beta)^{-1}
//! the Yosida approximation is beta_eps = (I - J_eps) / eps. It is monotone,
//! Lipschitz with constant 1/eps, satisfies |beta_eps(r)| <= |beta^0(r)| on
//! the domain of beta (beta^0 the minimal section), and is the derivative of
//! the Moreau envelope
//!     beta_hat_eps(r) = beta_hat(J_eps r) + (r - J_eps r)^2 / (2 eps).
//!
//! Three concrete graphs are provided:
//! * polynomial: beta(r) = r^3, the classical quartic-well term;
//! * obstacle: beta = subdifferential of the indicator of [-1, 1];
//! * logarithmic: beta(r) = ln((1+r)/(1-r)) on (-1, 1).

use crate::error::SimError;
use crate::field::Field;

/// Residual target for scalar resolvent solves.
pub const RESOLVENT_RESIDUAL_TOL: f64 = 1e-12;
pub const RESOLVENT_MAX_ITER: usize = 200;

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum GraphKind {
    Polynomial,
    Obstacle,
    Logarithmic,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub struct MonotoneGraph {
    pub kind: GraphKind,
}

impl MonotoneGraph {
    pub fn polynomial() -> Self {
        MonotoneGraph {
            kind: GraphKind::Polynomial,
        }
    }

    pub fn obstacle() -> Self {
        MonotoneGraph {
            kind: GraphKind::Obstacle,
        }
    }

    pub fn logarithmic() -> Self {
        MonotoneGraph {
            kind: GraphKind::Logarithmic,
        }
    }

    /// Whether r lies in D(beta).
    pub fn in_domain(&self, r: f64) -> bool {
        match self.kind {
            GraphKind::Polynomial => true,
            GraphKind::Obstacle => r.abs() <= 1.0,
            GraphKind::Logarithmic => r.abs() < 1.0,
        }
    }

    /// Whether r lies in the interior of D(beta). The conserved mean of the
    /// order parameter must sit here.
    pub fn in_domain_interior(&self, r: f64) -> bool {
        match self.kind {
            GraphKind::Polynomial => true,
            GraphKind::Obstacle | GraphKind::Logarithmic => r.abs() < 1.0,
        }
    }

    /// Convex potential beta_hat with beta = its subdifferential,
    /// normalized to beta_hat(0) = 0. Infinite outside the domain closure.
    pub fn potential(&self, r: f64) -> f64 {
        match self.kind {
            GraphKind::Polynomial => 0.25 * r.powi(4),
            GraphKind::Obstacle => {
                if r.abs() <= 1.0 {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            GraphKind::Logarithmic => {
                if r.abs() <= 1.0 {
                    // primitive of ln((1+r)/(1-r)); the endpoint limits are
                    // finite (2 ln 2) even though beta blows up there
                    xlnx(1.0 + r) + xlnx(1.0 - r)
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// Minimal section beta^0(r), defined on D(beta) only.
    pub fn minimal_section(&self, r: f64) -> Option<f64> {
        match self.kind {
            GraphKind::Polynomial => Some(r.powi(3)),
            GraphKind::Obstacle => (r.abs() <= 1.0).then_some(0.0),
            GraphKind::Logarithmic => (r.abs() < 1.0).then(|| ((1.0 + r) / (1.0 - r)).ln()),
        }
    }

    /// Resolvent J_eps(r) = (I + eps beta)^{-1} r. Nonexpansive, fixes 0.
    pub fn resolvent(&self, eps: f64, r: f64) -> Result<f64, SimError> {
        assert!(eps > 0.0);
        match self.kind {
            GraphKind::Obstacle => Ok(r.clamp(-1.0, 1.0)),
            GraphKind::Polynomial => {
                // x + eps x^3 = r; the root lies between 0 and r
                let (lo, hi) = if r < 0.0 { (r, 0.0) } else { (0.0, r) };
                solve_increasing("polynomial", eps, r, lo, hi, r, |x| {
                    (x + eps * x * x * x - r, 1.0 + 3.0 * eps * x * x)
                })
            }
            GraphKind::Logarithmic => Ok(self.solve_log(eps, r)?.0),
        }
    }

    /// Yosida approximation beta_eps(r) = (r - J_eps(r)) / eps.
    pub fn yosida(&self, eps: f64, r: f64) -> Result<f64, SimError> {
        assert!(eps > 0.0);
        match self.kind {
            GraphKind::Obstacle => Ok((r - r.clamp(-1.0, 1.0)) / eps),
            // beta_eps = beta(J_eps r); evaluating beta at the resolvent is
            // better conditioned than dividing the increment by eps
            GraphKind::Polynomial => Ok(self.resolvent(eps, r)?.powi(3)),
            GraphKind::Logarithmic => Ok(self.solve_log(eps, r)?.1),
        }
    }

    /// Moreau envelope beta_hat_eps(r) = beta_hat(J_eps r) + (r - J_eps r)^2 / (2 eps).
    /// Smooth, and its derivative is the Yosida approximation.
    pub fn moreau_envelope(&self, eps: f64, r: f64) -> Result<f64, SimError> {
        assert!(eps > 0.0);
        match self.kind {
            GraphKind::Logarithmic => {
                // (r - x)^2 / (2 eps) = eps t^2 / 2 exactly at the root
                let (x, t) = self.solve_log(eps, r)?;
                Ok(self.potential(x) + 0.5 * eps * t * t)
            }
            _ => {
                let x = self.resolvent(eps, r)?;
                Ok(self.potential(x) + (r - x) * (r - x) / (2.0 * eps))
            }
        }
    }

    /// The logarithmic resolvent equation x + eps ln((1+x)/(1-x)) = r is
    /// solved in the variable t = ln((1+x)/(1-x)), i.e. x = tanh(t/2):
    ///     g(t) = tanh(t/2) + eps t - r = 0.
    /// g is smooth and strictly increasing with g' >= eps, so the solve
    /// stays well conditioned even when the resolvent is within one float
    /// of the endpoint +-1. Returns (resolvent, yosida); the Yosida value
    /// is t itself since beta_eps(r) = beta(J_eps r) = t.
    fn solve_log(&self, eps: f64, r: f64) -> Result<(f64, f64), SimError> {
        // eps t = r - tanh(t/2) constrains t between 0 and (r +- 1)/eps
        let (lo, hi) = if r < 0.0 {
            ((r - 1.0) / eps, 0.0)
        } else {
            (0.0, (r + 1.0) / eps)
        };
        // linearization tanh(t/2) ~ t/2 near 0
        let t0 = r / (0.5 + eps);
        let t = solve_increasing("logarithmic", eps, r, lo, hi, t0, |t| {
            let th = (0.5 * t).tanh();
            (th + eps * t - r, 0.5 * (1.0 - th * th) + eps)
        })?;
        Ok(((0.5 * t).tanh(), t))
    }
}

/// s ln s extended by continuity to 0 at s = 0.
fn xlnx(s: f64) -> f64 {
    if s <= 0.0 {
        0.0
    } else {
        s * s.ln()
    }
}

/// Safeguarded Newton iteration for a strictly increasing function given by
/// `f(x) = (value, derivative)`, with root bracketed in [lo, hi]. Newton
/// steps that leave the bracket fall back to bisection. Accepts when the
/// residual meets `RESOLVENT_RESIDUAL_TOL`, or when the bracket has
/// collapsed to adjacent floats, in which case no representable value does
/// better and the midpoint is the converged answer.
fn solve_increasing(
    what: &'static str,
    eps: f64,
    r: f64,
    mut lo: f64,
    mut hi: f64,
    x0: f64,
    f: impl Fn(f64) -> (f64, f64),
) -> Result<f64, SimError> {
    let mut x = x0.clamp(lo, hi);
    let mut residual = f64::INFINITY;
    for _ in 0..RESOLVENT_MAX_ITER {
        let (v, dv) = f(x);
        residual = v.abs();
        if residual <= RESOLVENT_RESIDUAL_TOL {
            return Ok(x);
        }
        if v > 0.0 {
            hi = x;
        } else {
            lo = x;
        }
        let width = hi - lo;
        if width <= 2.0 * f64::EPSILON * lo.abs().max(hi.abs()).max(f64::MIN_POSITIVE) {
            return Ok(0.5 * (lo + hi));
        }
        let newton = x - v / dv;
        x = if dv.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Err(SimError::NoConvergence {
        what,
        eps,
        r,
        residual,
    })
}

/// Smooth concave-compatible perturbation pi with primitive pi_hat
/// (normalized so pi_hat(0) = 0) and a Lipschitz constant.
#[derive(Clone, Copy)]
pub struct SmoothPerturbation {
    pub pi: fn(f64) -> f64,
    pub pi_hat: fn(f64) -> f64,
    pub lipschitz: f64,
}

impl SmoothPerturbation {
    pub fn zero() -> Self {
        SmoothPerturbation {
            pi: |_| 0.0,
            pi_hat: |_| 0.0,
            lipschitz: 0.0,
        }
    }

    /// pi(r) = -r: together with the polynomial graph this makes the
    /// quartic double well r^4/4 - r^2/2.
    pub fn double_well() -> Self {
        SmoothPerturbation {
            pi: |r| -r,
            pi_hat: |r| -0.5 * r * r,
            lipschitz: 1.0,
        }
    }
}

impl std::fmt::Debug for SmoothPerturbation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SmoothPerturbation")
            .field("lipschitz", &self.lipschitz)
            .finish()
    }
}

/// sign_eps(v) = v / max(eps, |v|_H): the Yosida regularization of the
/// H-valued sign graph (unit ball at the origin, v/|v| elsewhere).
pub fn sign_eps(v: &Field, eps: f64) -> Field {
    assert!(eps > 0.0);
    let s = 1.0 / v.norm_h().max(eps);
    v.map(|x| s * x)
}

/// Maximal monotone perturbation acting on the transformed variable in the
/// balance equation. Applied through its own Yosida regularization at
/// level eps.
#[derive(Clone, Debug)]
pub enum HilbertOperator {
    Zero,
    /// rho times the H-valued sign graph. Yosida regularizing rho * Sign at
    /// level eps gives v -> rho v / max(rho eps, |v|_H): the resolvent of
    /// the scaled graph is block soft thresholding with radius rho eps.
    ScaledSign {
        rho: f64,
    },
    /// beta applied samplewise. Monotone, but in general without the linear
    /// growth bound the sliding-mode analysis needs.
    PointwiseGraph {
        graph: MonotoneGraph,
    },
}

impl HilbertOperator {
    /// Growth constant C with |A_eps v|_H <= C (1 + |v|_H) uniformly in eps,
    /// when one exists.
    pub fn growth_constant(&self) -> Option<f64> {
        match self {
            HilbertOperator::Zero => Some(0.0),
            HilbertOperator::ScaledSign { rho } => Some(*rho),
            HilbertOperator::PointwiseGraph { .. } => None,
        }
    }

    pub fn apply_yosida(&self, eps: f64, v: &Field) -> Result<Field, SimError> {
        assert!(eps > 0.0);
        match self {
            HilbertOperator::Zero => Ok(Field::zeros(v.grid())),
            HilbertOperator::ScaledSign { rho } => {
                let denom = (rho * eps).max(v.norm_h());
                if denom == 0.0 {
                    return Ok(Field::zeros(v.grid()));
                }
                let s = rho / denom;
                Ok(v.map(|x| s * x))
            }
            HilbertOperator::PointwiseGraph { graph } => {
                let mut out = Field::zeros(v.grid());
                for (o, &x) in out.data_mut().iter_mut().zip(v.data()) {
                    *o = graph.yosida(eps, x)?;
                }
                Ok(out)
            }
        }
    }
}

#[derive(Debug)]
pub struct GrowthReport {
    pub c_tested: f64,
    pub max_ratio: f64,
    pub ok: bool,
}

/// Evaluates |A_eps v|_H / (1 + |v|_H) over the given fields and compares
/// the worst ratio against `c`.
pub fn check_linear_growth(
    op: &HilbertOperator,
    eps: f64,
    fields: &[Field],
    c: f64,
) -> Result<GrowthReport, SimError> {
    let mut max_ratio: f64 = 0.0;
    for v in fields {
        let av = op.apply_yosida(eps, v)?;
        max_ratio = max_ratio.max(av.norm_h() / (1.0 + v.norm_h()));
    }
    Ok(GrowthReport {
        c_tested: c,
        max_ratio,
        ok: max_ratio <= c,
    })
}
