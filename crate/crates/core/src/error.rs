//! Error types shared across the solver.

use std::fmt;

#[derive(Debug)]
pub enum SimError {
    /// `inv_neumann_laplacian` was handed a field whose mean is not zero
    /// (relative to the field's H norm).
    NonZeroMean {
        mean: f64,
        norm: f64,
    },
    /// The spatial mean of the initial order parameter lies outside the
    /// interior of the graph domain, so the conserved mean is unreachable.
    MeanOutsideDomain {
        mean: f64,
    },
    /// The initial potential energy of the unregularized graph is infinite
    /// at some sample.
    PotentialInfinite {
        value: f64,
    },
    /// A scalar resolvent solve stalled without collapsing its bracket.
    NoConvergence {
        what: &'static str,
        eps: f64,
        r: f64,
        residual: f64,
    },
    /// A field left the trusted amplitude range during time stepping.
    Blowup {
        t: f64,
        max_abs: f64,
    },
    /// Continuous-dependence inputs must share the conserved mean.
    MeanMismatch {
        m1: f64,
        m2: f64,
    },
    /// Parameter combination outside the regime an experiment requires.
    ParamMismatch(String),
    /// The built-in property battery found failing checks.
    SelfTestFailed {
        failed: usize,
    },
    Io(std::io::Error),
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::NonZeroMean { mean, norm } => write!(
                f,
                "field has non-zero mean {mean:e} (H norm {norm:e}); the inverse Neumann Laplacian is only defined on zero-mean data"
            ),
            SimError::MeanOutsideDomain { mean } => write!(
                f,
                "initial mean {mean:e} lies outside the interior of the graph domain"
            ),
            SimError::PotentialInfinite { value } => write!(
                f,
                "initial potential is infinite at sample value {value:e}"
            ),
            SimError::NoConvergence {
                what,
                eps,
                r,
                residual,
            } => write!(
                f,
                "{what} resolvent did not converge (eps={eps:e}, r={r:e}, residual={residual:e})"
            ),
            SimError::Blowup { t, max_abs } => {
                write!(f, "solution blew up at t={t:e} (max |value| {max_abs:e})")
            }
            SimError::MeanMismatch { m1, m2 } => write!(
                f,
                "order-parameter means differ: {m1:e} vs {m2:e}; the estimate requires equal conserved means"
            ),
            SimError::ParamMismatch(msg) => write!(f, "parameter mismatch: {msg}"),
            SimError::SelfTestFailed { failed } => {
                write!(f, "self-test: {failed} check(s) failed")
            }
            SimError::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for SimError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            SimError::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for SimError {
    fn from(e: std::io::Error) -> Self {
        SimError::Io(e)
    }
}
