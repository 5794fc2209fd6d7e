//! Semi-implicit time stepping for the coupled system
//!
//! ```text
//! d/dt (theta + ell phi) - Lap theta + zeta = f,
//! d/dt phi - Lap mu = 0,
//! mu = -nu Lap phi + beta_eps(phi) + pi(phi) - gamma theta,
//! zeta = A_eps(a theta + b phi - eta_star),
//! ```
//!
//! with homogeneous Neumann conditions on theta, phi and mu. The linear
//! part (both Laplacians and the gamma/ell cross coupling) is implicit;
//! the graph terms beta_eps, pi and the monotone perturbation zeta are
//! frozen at the current time, which keeps every cosine mode an
//! independent 2x2 linear solve:
//!
//! ```text
//! [ 1 + tau lam          ell          ] [theta_hat^{n+1}]   [theta_hat^n + ell phi_hat^n + tau (f_hat^n - zeta_hat^n)]
//! [ -tau lam gamma   1 + tau nu lam^2 ] [ phi_hat^{n+1} ] = [phi_hat^n - tau lam g_hat^n                             ]
//! ```
//!
//! with g = beta_eps(phi^n) + pi(phi^n) and determinant
//! (1 + tau lam)(1 + tau nu lam^2) + ell gamma tau lam > 0, so the solve
//! never degenerates. Mode zero reduces to phi_hat_0^{n+1} = phi_hat_0^n
//! (the conserved mean, carried exactly as a stored scalar) and
//! theta_hat_0^{n+1} = theta_hat_0^n + tau (f_hat_0 - zeta_hat_0).

use crate::error::SimError;
use crate::field::Field;
use crate::graphs::{HilbertOperator, MonotoneGraph, SmoothPerturbation};

/// Amplitudes beyond this are reported as blowup rather than stepped further.
pub const BLOWUP_LIMIT: f64 = 1e12;

/// Volume source for the balance equation, sampled at the left endpoint of
/// each time cell.
#[derive(Clone, Debug)]
pub enum Source {
    Zero,
    Constant(Field),
    /// One field per step; runs longer than the table hold the last entry.
    Samples(Vec<Field>),
}

impl Source {
    pub fn at_step(&self, step: usize) -> Option<&Field> {
        match self {
            Source::Zero => None,
            Source::Constant(f) => Some(f),
            Source::Samples(fs) => fs.get(step.min(fs.len().saturating_sub(1))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct ModelParams {
    pub ell: f64,
    pub nu: f64,
    pub gamma: f64,
    /// Coefficients of the transformed variable eta = a theta + b phi - eta_star.
    pub a: f64,
    pub b: f64,
    /// Yosida level of the pointwise graph beta.
    pub eps_beta: f64,
    /// Yosida level of the Hilbert-space operator A.
    pub eps_a: f64,
    pub graph: MonotoneGraph,
    pub perturbation: SmoothPerturbation,
    pub operator: HilbertOperator,
    pub eta_star: Field,
    pub source: Source,
}

impl ModelParams {
    pub fn validate(&self) -> Result<(), SimError> {
        let ok = self.ell > 0.0
            && self.nu > 0.0
            && self.gamma > 0.0
            && self.a > 0.0
            && self.b >= 0.0
            && self.eps_beta > 0.0
            && self.eps_a > 0.0;
        if !ok {
            return Err(SimError::ParamMismatch(format!(
                "need ell, nu, gamma, a, eps_beta, eps_a > 0 and b >= 0 (got ell={}, nu={}, gamma={}, a={}, b={}, eps_beta={}, eps_a={})",
                self.ell, self.nu, self.gamma, self.a, self.b, self.eps_beta, self.eps_a
            )));
        }
        Ok(())
    }

    /// eta = a theta + b phi - eta_star.
    pub fn eta(&self, theta: &Field, phi: &Field) -> Field {
        let mut eta = theta.map(|v| self.a * v);
        eta.add_scaled(self.b, phi);
        eta.add_scaled(-1.0, &self.eta_star);
        eta
    }
}

#[derive(Clone, Debug)]
pub struct SimState {
    pub step: usize,
    pub t: f64,
    pub theta: Field,
    pub phi: Field,
    /// Chemical potential -nu Lap phi + xi + pi(phi) - gamma theta at this
    /// time level.
    pub mu: Field,
    /// beta_eps(phi) at this time level.
    pub xi: Field,
    /// A_eps(eta) at this time level.
    pub zeta: Field,
    /// Conserved mean of phi, fixed at preparation time.
    pub m0: f64,
}

/// beta_eps(phi) evaluated samplewise.
fn yosida_field(graph: &MonotoneGraph, eps: f64, phi: &Field) -> Result<Field, SimError> {
    let mut out = Field::zeros(phi.grid());
    for (o, &v) in out.data_mut().iter_mut().zip(phi.data()) {
        *o = graph.yosida(eps, v)?;
    }
    Ok(out)
}

/// Chemical potential of the given configuration:
/// mu = -nu Lap phi + beta_eps(phi) + pi(phi) - gamma theta.
pub fn compute_mu(theta: &Field, phi: &Field, p: &ModelParams) -> Result<Field, SimError> {
    let xi = yosida_field(&p.graph, p.eps_beta, phi)?;
    Ok(mu_from_parts(theta, phi, &xi, p))
}

fn mu_from_parts(theta: &Field, phi: &Field, xi: &Field, p: &ModelParams) -> Field {
    let mut mu = phi.laplacian();
    mu.scale(-p.nu);
    for ((m, &x), (&ph, &th)) in mu
        .data_mut()
        .iter_mut()
        .zip(xi.data())
        .zip(phi.data().iter().zip(theta.data()))
    {
        *m += x + (p.perturbation.pi)(ph) - p.gamma * th;
    }
    mu
}

/// Validates the initial pair, optionally smooths theta0 with one Helmholtz
/// solve (I - eps Lap)^{-1} (which preserves its mean exactly), and fills in
/// the derived fields. Smooth the boundary datum eta_star the same way
/// before building the params if the run calls for it.
pub fn prepare_initial_state(
    theta0: &Field,
    phi0: &Field,
    p: &ModelParams,
    smooth_eps: f64,
) -> Result<SimState, SimError> {
    p.validate()?;
    assert_eq!(
        theta0.grid(),
        phi0.grid(),
        "initial fields on different grids"
    );
    assert_eq!(
        theta0.grid(),
        p.eta_star.grid(),
        "eta_star on a different grid"
    );
    let m0 = phi0.mean();
    if !p.graph.in_domain_interior(m0) {
        return Err(SimError::MeanOutsideDomain { mean: m0 });
    }
    for &v in phi0.data() {
        if !p.graph.potential(v).is_finite() {
            return Err(SimError::PotentialInfinite { value: v });
        }
    }
    let theta = if smooth_eps > 0.0 {
        theta0.helmholtz_smooth(smooth_eps)
    } else {
        theta0.clone()
    };
    let phi = phi0.clone();
    let xi = yosida_field(&p.graph, p.eps_beta, &phi)?;
    let zeta = p.operator.apply_yosida(p.eps_a, &p.eta(&theta, &phi))?;
    let mu = mu_from_parts(&theta, &phi, &xi, p);
    Ok(SimState {
        step: 0,
        t: 0.0,
        theta,
        phi,
        mu,
        xi,
        zeta,
        m0,
    })
}

/// Advances one step of size tau.
pub fn step(state: &SimState, p: &ModelParams, tau: f64) -> Result<SimState, SimError> {
    assert!(tau > 0.0);
    let grid = state.phi.grid().clone();
    let n = grid.len();

    // explicit graph terms at time n; xi and zeta are already the Yosida
    // values of the current state
    let g: Vec<f64> = (0..n)
        .map(|i| state.xi.data()[i] + (p.perturbation.pi)(state.phi.data()[i]))
        .collect();
    let f = p.source.at_step(state.step);
    let rhs1: Vec<f64> = (0..n)
        .map(|i| {
            let fv = f.map_or(0.0, |f| f.data()[i]);
            state.theta.data()[i] + p.ell * state.phi.data()[i] + tau * (fv - state.zeta.data()[i])
        })
        .collect();

    let r1 = grid.to_modes(&rhs1);
    let gm = grid.to_modes(&g);
    let mut pm = grid.to_modes(state.phi.data());
    // mode zero of phi is the conserved mean; carrying the stored scalar
    // instead of the re-extracted coefficient keeps it from drifting by
    // transform roundoff over long runs
    pm[0] = state.m0;

    let mut th_new = vec![0.0; n];
    let mut ph_new = vec![0.0; n];
    grid.for_each_mode(|flat, lam, _| {
        let r2 = pm[flat] - tau * lam * gm[flat];
        let dth = 1.0 + tau * lam;
        let dph = 1.0 + tau * p.nu * lam * lam;
        let det = dth * dph + p.ell * p.gamma * tau * lam;
        th_new[flat] = (dph * r1[flat] - p.ell * r2) / det;
        ph_new[flat] = (p.gamma * tau * lam * r1[flat] + dth * r2) / det;
    });

    let theta = Field::from_samples(&grid, grid.to_samples(&th_new));
    let phi = Field::from_samples(&grid, grid.to_samples(&ph_new));
    let t = state.t + tau;

    let worst = theta.max_abs().max(phi.max_abs());
    let finite = theta.data().iter().chain(phi.data()).all(|v| v.is_finite());
    if !finite || worst > BLOWUP_LIMIT {
        return Err(SimError::Blowup { t, max_abs: worst });
    }

    let xi = yosida_field(&p.graph, p.eps_beta, &phi)?;
    let zeta = p.operator.apply_yosida(p.eps_a, &p.eta(&theta, &phi))?;
    let mu = mu_from_parts(&theta, &phi, &xi, p);
    Ok(SimState {
        step: state.step + 1,
        t,
        theta,
        phi,
        mu,
        xi,
        zeta,
        m0: state.m0,
    })
}

/// Anything that wants to see the trajectory as it is produced. Observers
/// see the initial state and then every step; they never mutate it.
pub trait Observer {
    fn observe(&mut self, state: &SimState, p: &ModelParams) -> Result<(), SimError>;
}

pub fn run(
    state0: SimState,
    p: &ModelParams,
    tau: f64,
    n_steps: usize,
    observers: &mut [&mut dyn Observer],
) -> Result<SimState, SimError> {
    let mut state = state0;
    for obs in observers.iter_mut() {
        obs.observe(&state, p)?;
    }
    for _ in 0..n_steps {
        state = step(&state, p, tau)?;
        for obs in observers.iter_mut() {
            obs.observe(&state, p)?;
        }
    }
    Ok(state)
}

/// Stores phi (and the time) at every observed step.
pub struct PhiTrajectory {
    pub times: Vec<f64>,
    pub phis: Vec<Field>,
}

impl PhiTrajectory {
    pub fn new() -> Self {
        PhiTrajectory {
            times: Vec::new(),
            phis: Vec::new(),
        }
    }
}

impl Default for PhiTrajectory {
    fn default() -> Self {
        Self::new()
    }
}

impl Observer for PhiTrajectory {
    fn observe(&mut self, state: &SimState, _p: &ModelParams) -> Result<(), SimError> {
        self.times.push(state.t);
        self.phis.push(state.phi.clone());
        Ok(())
    }
}
