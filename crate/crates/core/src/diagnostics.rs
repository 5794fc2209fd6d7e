//! Scalar monitors along a run and the two-trajectory experiments built
//! from them: the continuous-dependence ratio and the approximation-level
//! refinement study.

use crate::error::SimError;
use crate::field::Field;
use crate::smc::psi;
use crate::stepper::{prepare_initial_state, run, step, ModelParams, Observer, SimState, Source};
use std::io::{self, Write};

/// Free energy driving the dissipation structure:
/// (gamma / 2 ell) ||theta||_H^2 + (nu / 2) ||grad phi||_H^2
/// + sum_i (beta_hat_eps(phi_i) + pi_hat(phi_i)) w_i.
///
/// The elastic term carries the gradient only; the H part of the V norm
/// is reported separately in the records, because only this combination
/// decays monotonically step by step.
pub fn energy(state: &SimState, p: &ModelParams) -> Result<f64, SimError> {
    let quad = 0.5 * p.gamma / p.ell * state.theta.norm_h().powi(2)
        + 0.5 * p.nu * state.phi.norm_grad().powi(2);
    let w = state.phi.grid().cell_volume();
    let mut pot = 0.0;
    for &v in state.phi.data() {
        pot += p.graph.moreau_envelope(p.eps_beta, v)? + (p.perturbation.pi_hat)(v);
    }
    Ok(quad + pot * w)
}

#[derive(Clone, Copy, Debug)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub mass: f64,
    pub energy: f64,
    pub theta_h: f64,
    pub phi_v: f64,
    pub mu_v: f64,
    pub xi_h: f64,
    pub zeta_h: f64,
    /// ||(phi^n - phi^{n-1}) / tau||_{V*}; zero on the first record.
    pub dphi_dt_vstar: f64,
    pub psi: f64,
}

pub const CSV_HEADER: &str = "t,mass,energy,theta_H,phi_V,mu_V,xi_H,zeta_H,dphi_dt_Vstar,psi";

impl DiagnosticsRecord {
    pub fn csv_line(&self) -> String {
        format!(
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            self.t,
            self.mass,
            self.energy,
            self.theta_h,
            self.phi_v,
            self.mu_v,
            self.xi_h,
            self.zeta_h,
            self.dphi_dt_vstar,
            self.psi
        )
    }
}

/// Assembles one record; `prev` is the previous phi snapshot and the time
/// that elapsed since it.
pub fn record(
    state: &SimState,
    p: &ModelParams,
    prev: Option<(&Field, f64)>,
) -> Result<DiagnosticsRecord, SimError> {
    let dphi_dt_vstar = match prev {
        Some((phi_prev, dt)) => {
            let mut d = state.phi.clone();
            d.add_scaled(-1.0, phi_prev);
            d.norm_vstar() / dt
        }
        None => 0.0,
    };
    Ok(DiagnosticsRecord {
        t: state.t,
        mass: state.phi.mean(),
        energy: energy(state, p)?,
        theta_h: state.theta.norm_h(),
        phi_v: state.phi.norm_v(),
        mu_v: state.mu.norm_v(),
        xi_h: state.xi.norm_h(),
        zeta_h: state.zeta.norm_h(),
        dphi_dt_vstar,
        psi: psi(state, p),
    })
}

/// Observer that keeps every stride-th record. The backward difference in
/// dphi_dt_vstar is always over one step, whatever the stride.
pub struct Monitor {
    stride: usize,
    pub records: Vec<DiagnosticsRecord>,
    prev: Option<(f64, Field)>,
}

impl Monitor {
    pub fn new(stride: usize) -> Self {
        assert!(stride >= 1);
        Monitor {
            stride,
            records: Vec::new(),
            prev: None,
        }
    }
}

impl Observer for Monitor {
    fn observe(&mut self, state: &SimState, p: &ModelParams) -> Result<(), SimError> {
        if state.step.is_multiple_of(self.stride) {
            let prev = self
                .prev
                .as_ref()
                .map(|(t_prev, phi_prev)| (phi_prev, state.t - t_prev));
            self.records.push(record(state, p, prev)?);
        }
        self.prev = Some((state.t, state.phi.clone()));
        Ok(())
    }
}

pub fn write_csv(records: &[DiagnosticsRecord], w: &mut impl Write) -> io::Result<()> {
    writeln!(w, "{CSV_HEADER}")?;
    for r in records {
        writeln!(w, "{}", r.csv_line())?;
    }
    Ok(())
}

/// Largest positive jump between consecutive entries; zero for a
/// non-increasing series.
pub fn worst_energy_increment(energies: &[f64]) -> f64 {
    energies.windows(2).fold(0.0f64, |m, w| m.max(w[1] - w[0]))
}

/// L2 norm in time of a node-sampled series (values at t_0..t_N), midpoint
/// quadrature on each step.
pub fn l2_in_time_nodes(tau: f64, vals: &[f64]) -> f64 {
    vals.windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            tau * mid * mid
        })
        .sum::<f64>()
        .sqrt()
}

/// L2 norm in time of a cell-sampled series (one value per step, constant
/// on its cell).
pub fn l2_in_time_cells(tau: f64, vals: &[f64]) -> f64 {
    vals.iter().map(|v| tau * v * v).sum::<f64>().sqrt()
}

pub fn max_in_time(vals: &[f64]) -> f64 {
    vals.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// One side of the continuous-dependence experiment: everything that is
/// allowed to differ between the two trajectories.
#[derive(Clone, Debug)]
pub struct ContDepData {
    pub theta0: Field,
    pub phi0: Field,
    pub eta_star: Field,
    pub source: Source,
}

#[derive(Clone, Copy, Debug)]
pub struct ContDepReport {
    pub max_deta_h: f64,
    pub l2_deta_v: f64,
    pub max_dphi_vstar: f64,
    pub l2_dphi_v: f64,
    pub dphi0_vstar: f64,
    pub deta0_h: f64,
    pub l2_df_h: f64,
    pub deta_star_w: f64,
    /// max_t ||d eta||_H + L2_t ||d eta||_V + max_t ||d phi||_{V*} + L2_t ||d phi||_V.
    pub lhs: f64,
    /// ||d phi0||_{V*} + ||d eta0||_H + L2_t ||d f||_H + ||d eta_star||_W.
    pub rhs: f64,
    /// lhs / rhs, with 0 by convention when rhs = 0.
    pub ratio: f64,
}

fn diff(a: &Field, b: &Field) -> Field {
    let mut d = a.clone();
    d.add_scaled(-1.0, b);
    d
}

/// Runs the two data sets through the same discretization in lockstep and
/// measures how the trajectory distance compares to the data distance.
/// Needs a > 0, b > 0 with a ell = b, and equal phi0 means.
pub fn cont_dep_experiment(
    d1: &ContDepData,
    d2: &ContDepData,
    shared: &ModelParams,
    tau: f64,
    n_steps: usize,
    smooth_eps: f64,
) -> Result<ContDepReport, SimError> {
    if !(shared.a > 0.0 && shared.b > 0.0) {
        return Err(SimError::ParamMismatch(format!(
            "trajectory comparison needs a > 0 and b > 0 (got a={}, b={})",
            shared.a, shared.b
        )));
    }
    let ab_gap = (shared.a * shared.ell - shared.b).abs();
    if ab_gap > 1e-12 * shared.b.abs().max(1.0) {
        return Err(SimError::ParamMismatch(format!(
            "trajectory comparison needs a*ell = b (a*ell = {}, b = {})",
            shared.a * shared.ell,
            shared.b
        )));
    }
    let (m1, m2) = (d1.phi0.mean(), d2.phi0.mean());
    if (m1 - m2).abs() > 1e-12 {
        return Err(SimError::MeanMismatch { m1, m2 });
    }

    let side = |d: &ContDepData| {
        let mut p = shared.clone();
        p.eta_star = d.eta_star.clone();
        p.source = d.source.clone();
        p
    };
    let p1 = side(d1);
    let p2 = side(d2);
    let mut s1 = prepare_initial_state(&d1.theta0, &d1.phi0, &p1, smooth_eps)?;
    let mut s2 = prepare_initial_state(&d2.theta0, &d2.phi0, &p2, smooth_eps)?;

    // data distances, taken on the prepared (possibly smoothed) states the
    // trajectories actually start from
    let dphi0_vstar = diff(&s1.phi, &s2.phi).norm_vstar();
    let deta0_h = diff(&p1.eta(&s1.theta, &s1.phi), &p2.eta(&s2.theta, &s2.phi)).norm_h();
    let deta_star_w = diff(&p1.eta_star, &p2.eta_star).norm_w();
    let mut df_h = Vec::with_capacity(n_steps);
    for n in 0..n_steps {
        let v = match (p1.source.at_step(n), p2.source.at_step(n)) {
            (None, None) => 0.0,
            (Some(f1), None) => f1.norm_h(),
            (None, Some(f2)) => f2.norm_h(),
            (Some(f1), Some(f2)) => diff(f1, f2).norm_h(),
        };
        df_h.push(v);
    }
    let l2_df_h = l2_in_time_cells(tau, &df_h);

    let mut deta_h = Vec::with_capacity(n_steps + 1);
    let mut deta_v = Vec::with_capacity(n_steps + 1);
    let mut dphi_vstar = Vec::with_capacity(n_steps + 1);
    let mut dphi_v = Vec::with_capacity(n_steps + 1);
    let push = |s1: &SimState,
                s2: &SimState,
                deta_h: &mut Vec<f64>,
                deta_v: &mut Vec<f64>,
                dphi_vstar: &mut Vec<f64>,
                dphi_v: &mut Vec<f64>| {
        let de = diff(&p1.eta(&s1.theta, &s1.phi), &p2.eta(&s2.theta, &s2.phi));
        let dp = diff(&s1.phi, &s2.phi);
        deta_h.push(de.norm_h());
        deta_v.push(de.norm_v());
        dphi_vstar.push(dp.norm_vstar());
        dphi_v.push(dp.norm_v());
    };
    push(
        &s1,
        &s2,
        &mut deta_h,
        &mut deta_v,
        &mut dphi_vstar,
        &mut dphi_v,
    );
    for _ in 0..n_steps {
        s1 = step(&s1, &p1, tau)?;
        s2 = step(&s2, &p2, tau)?;
        push(
            &s1,
            &s2,
            &mut deta_h,
            &mut deta_v,
            &mut dphi_vstar,
            &mut dphi_v,
        );
    }

    let lhs = max_in_time(&deta_h)
        + l2_in_time_nodes(tau, &deta_v)
        + max_in_time(&dphi_vstar)
        + l2_in_time_nodes(tau, &dphi_v);
    let rhs = dphi0_vstar + deta0_h + l2_df_h + deta_star_w;
    let ratio = if rhs == 0.0 { 0.0 } else { lhs / rhs };
    Ok(ContDepReport {
        max_deta_h: max_in_time(&deta_h),
        l2_deta_v: l2_in_time_nodes(tau, &deta_v),
        max_dphi_vstar: max_in_time(&dphi_vstar),
        l2_dphi_v: l2_in_time_nodes(tau, &dphi_v),
        dphi0_vstar,
        deta0_h,
        l2_df_h,
        deta_star_w,
        lhs,
        rhs,
        ratio,
    })
}

/// Runs the same data at each approximation level in `eps_list` and
/// returns the space-time L2 distances between consecutive phi
/// trajectories. A list of k levels yields k-1 distances.
pub fn eps_refinement_distances(
    base: &ModelParams,
    theta0: &Field,
    phi0: &Field,
    eps_list: &[f64],
    tau: f64,
    n_steps: usize,
    smooth_eps: f64,
) -> Result<Vec<f64>, SimError> {
    assert!(eps_list.len() >= 2);
    let run_at = |eps: f64| -> Result<Vec<Field>, SimError> {
        let mut p = base.clone();
        p.eps_beta = eps;
        let mut traj = crate::stepper::PhiTrajectory::new();
        let state0 = prepare_initial_state(theta0, phi0, &p, smooth_eps)?;
        run(state0, &p, tau, n_steps, &mut [&mut traj])?;
        Ok(traj.phis)
    };
    let mut prev = run_at(eps_list[0])?;
    let mut dists = Vec::with_capacity(eps_list.len() - 1);
    for &eps in &eps_list[1..] {
        let cur = run_at(eps)?;
        let norms: Vec<f64> = prev
            .iter()
            .zip(&cur)
            .map(|(a, b)| diff(a, b).norm_h())
            .collect();
        dists.push(l2_in_time_nodes(tau, &norms));
        prev = cur;
    }
    Ok(dists)
}
