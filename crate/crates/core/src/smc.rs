//! Sliding-mode experiments: close the loop with zeta = rho Sign(eta),
//! eta = theta + b phi - eta_star (a = 1, ell = b), and measure when the
//! deviation functional psi(t) = ||eta(t)||_H reaches a tolerance band.
//!
//! The gain needed for finite-time reaching is calibrated from an
//! uncontrolled pilot run: c_hat bounds the forcing
//! g = f - b Lap phi + Lap eta_star in H relative to 1 + sqrt(rho), and
//! any rho > rho_star = c_hat^2 + 2 c_hat + (2/T) psi(0) should reach
//! the manifold before T with reaching time at most
//! 2 psi(0) / (rho - c_hat^2 - 2 c_hat).

use crate::error::SimError;
use crate::field::Field;
use crate::graphs::HilbertOperator;
use crate::stepper::{prepare_initial_state, run, ModelParams, Observer, PhiTrajectory, SimState};

/// One controlled run: gain, eta coefficient, tolerance policy, and the
/// model it closes the loop around.
#[derive(Clone, Debug)]
pub struct SmcConfig {
    pub rho: f64,
    pub b: f64,
    /// Reached-band size relative to max(psi(0), 1) when no absolute
    /// tolerance is given.
    pub tol_rel: f64,
    /// Absolute override for the reached band. Either way the band is
    /// floored at 10 eps_a: the Yosida level of Sign makes psi settle
    /// near eps_a scale, never identically zero.
    pub tol_abs: Option<f64>,
    /// Prior estimate of the forcing constant (from a pilot run), if any.
    pub c_hat: Option<f64>,
    pub params: ModelParams,
}

impl SmcConfig {
    /// Builds the closed-loop model: a = 1, ell = b, operator = rho Sign.
    /// rho = 0 is accepted and means "leave the loop open"; that is the
    /// pilot configuration used to measure c_hat.
    pub fn new(rho: f64, b: f64, tol_rel: f64, mut base: ModelParams) -> Result<Self, SimError> {
        if !(rho >= 0.0 && b > 0.0 && tol_rel > 0.0) {
            return Err(SimError::ParamMismatch(format!(
                "sliding-mode setup needs rho >= 0, b > 0, tol_rel > 0 (got rho={rho}, b={b}, tol_rel={tol_rel})"
            )));
        }
        base.a = 1.0;
        base.ell = b;
        base.b = b;
        base.operator = if rho > 0.0 {
            HilbertOperator::ScaledSign { rho }
        } else {
            HilbertOperator::Zero
        };
        base.validate()?;
        Ok(SmcConfig {
            rho,
            b,
            tol_rel,
            tol_abs: None,
            c_hat: None,
            params: base,
        })
    }

    pub fn resolve_tol(&self, psi0: f64) -> f64 {
        let raw = self.tol_abs.unwrap_or_else(|| self.tol_rel * psi0.max(1.0));
        raw.max(10.0 * self.params.eps_a)
    }
}

/// Deviation from the sliding manifold: ||a theta + b phi - eta_star||_H.
pub fn psi(state: &SimState, p: &ModelParams) -> f64 {
    p.eta(&state.theta, &state.phi).norm_h()
}

/// Smallest gain the reaching argument certifies for horizon t_final:
/// c_hat^2 + 2 c_hat + (2 / t_final) ||theta0 + b phi0 - eta_star||_H.
pub fn rho_star(
    c_hat: f64,
    t_final: f64,
    theta0: &Field,
    phi0: &Field,
    eta_star: &Field,
    b: f64,
) -> f64 {
    assert!(t_final > 0.0);
    let mut eta = theta0.clone();
    eta.add_scaled(b, phi0);
    eta.add_scaled(-1.0, eta_star);
    c_hat * c_hat + 2.0 * c_hat + 2.0 / t_final * eta.norm_h()
}

/// Empirical forcing constant of a completed run:
/// max_n ||f_n - b Lap phi_n + Lap eta_star||_H / (1 + sqrt(rho)).
pub fn estimate_c_hat(traj: &PhiTrajectory, p: &ModelParams, rho: f64) -> f64 {
    assert!(rho >= 0.0);
    let lap_eta_star = p.eta_star.laplacian();
    let mut worst: f64 = 0.0;
    for (n, phi) in traj.phis.iter().enumerate() {
        let mut g = phi.laplacian();
        g.scale(-p.b);
        g.add_scaled(1.0, &lap_eta_star);
        if let Some(f) = p.source.at_step(n) {
            g.add_scaled(1.0, f);
        }
        worst = worst.max(g.norm_h());
    }
    worst / (1.0 + rho.sqrt())
}

/// Earliest sampled time from which psi stays at or below tol_abs for the
/// rest of the series. A dip that later rises above tol_abs does not count.
pub fn reaching_time(times: &[f64], psi: &[f64], tol_abs: f64) -> Option<f64> {
    assert_eq!(times.len(), psi.len());
    let mut t_star = None;
    for i in (0..psi.len()).rev() {
        if psi[i] <= tol_abs {
            t_star = Some(times[i]);
        } else {
            break;
        }
    }
    t_star
}

#[derive(Clone, Debug)]
pub struct ReachingReport {
    pub rho: f64,
    pub psi0: f64,
    pub tol_abs: f64,
    pub times: Vec<f64>,
    pub psi: Vec<f64>,
    /// ||sigma||_H with sigma = zeta / rho (zero for the open-loop run).
    pub sigma_norm: Vec<f64>,
    /// Forcing constant measured on this run.
    pub c_hat: f64,
    pub a0: f64,
    pub b0: f64,
    /// 2 psi0 / (rho - a0^2 - 2 b0) when the denominator is positive.
    pub bound: Option<f64>,
    pub t_star: Option<f64>,
    /// psi non-increasing (up to 10 tau (1 + rho) wiggle) on samples up to
    /// t_star; vacuously true when t_star is absent.
    pub monotone_before: bool,
    /// psi <= tol_abs on every sample at or after t_star; false when
    /// t_star is absent.
    pub stays_after: bool,
    /// Discrete forward-difference check of
    /// psi' + rho ||sigma||_H^2 <= c_hat (sqrt(rho) + 1), same wiggle.
    pub diff_ineq_ok: bool,
}

struct SmcMonitor {
    rho: f64,
    times: Vec<f64>,
    psi: Vec<f64>,
    sigma: Vec<f64>,
}

impl Observer for SmcMonitor {
    fn observe(&mut self, state: &SimState, p: &ModelParams) -> Result<(), SimError> {
        self.times.push(state.t);
        self.psi.push(psi(state, p));
        self.sigma.push(if self.rho > 0.0 {
            state.zeta.norm_h() / self.rho
        } else {
            0.0
        });
        Ok(())
    }
}

pub fn run_smc_experiment(
    cfg: &SmcConfig,
    theta0: &Field,
    phi0: &Field,
    tau: f64,
    n_steps: usize,
    smooth_eps: f64,
) -> Result<ReachingReport, SimError> {
    let state0 = prepare_initial_state(theta0, phi0, &cfg.params, smooth_eps)?;
    let mut mon = SmcMonitor {
        rho: cfg.rho,
        times: Vec::with_capacity(n_steps + 1),
        psi: Vec::with_capacity(n_steps + 1),
        sigma: Vec::with_capacity(n_steps + 1),
    };
    let mut traj = PhiTrajectory::new();
    {
        let mut obs: [&mut dyn Observer; 2] = [&mut mon, &mut traj];
        run(state0, &cfg.params, tau, n_steps, &mut obs)?;
    }

    let c_hat = estimate_c_hat(&traj, &cfg.params, cfg.rho);
    let psi0 = mon.psi[0];
    let tol_abs = cfg.resolve_tol(psi0);
    let t_star = reaching_time(&mon.times, &mon.psi, tol_abs);
    let denom = cfg.rho - c_hat * c_hat - 2.0 * c_hat;
    let bound = (denom > 0.0).then(|| 2.0 * psi0 / denom);

    let slack = 10.0 * tau * (1.0 + cfg.rho);
    let monotone_before = match t_star {
        Some(ts) => (0..mon.psi.len() - 1)
            .filter(|&n| mon.times[n + 1] <= ts)
            .all(|n| mon.psi[n + 1] <= mon.psi[n] + slack),
        None => true,
    };
    let stays_after = match t_star {
        Some(ts) => mon
            .times
            .iter()
            .zip(&mon.psi)
            .filter(|(t, _)| **t >= ts)
            .all(|(_, p)| *p <= tol_abs),
        None => false,
    };
    let rhs = c_hat * (cfg.rho.sqrt() + 1.0) + slack;
    let diff_ineq_ok = (0..mon.psi.len() - 1).all(|n| {
        (mon.psi[n + 1] - mon.psi[n]) / tau + cfg.rho * mon.sigma[n] * mon.sigma[n] <= rhs
    });

    Ok(ReachingReport {
        rho: cfg.rho,
        psi0,
        tol_abs,
        times: mon.times,
        psi: mon.psi,
        sigma_norm: mon.sigma,
        c_hat,
        a0: c_hat,
        b0: c_hat,
        bound,
        t_star,
        monotone_before,
        stays_after,
        diff_ineq_ok,
    })
}

#[derive(Debug)]
pub struct SweepResult {
    /// Forcing constant of the open-loop pilot; calibrates rho_star.
    pub c_hat_pilot: f64,
    pub psi0: f64,
    pub rho_star: f64,
    pub reports: Vec<ReachingReport>,
}

/// Geometric grid of gain multipliers, 5 points from 1.2 to 8.
pub fn default_multipliers() -> Vec<f64> {
    let (lo, hi, k) = (1.2f64, 8.0f64, 5);
    (0..k)
        .map(|i| lo * (hi / lo).powf(i as f64 / (k - 1) as f64))
        .collect()
}

/// Open-loop pilot to measure c_hat, then one closed-loop run per
/// multiplier at rho = multiplier * rho_star. The runs are independent and
/// execute on their own threads.
pub fn sweep_smc(
    proto: &SmcConfig,
    theta0: &Field,
    phi0: &Field,
    tau: f64,
    n_steps: usize,
    smooth_eps: f64,
    multipliers: &[f64],
) -> Result<SweepResult, SimError> {
    let mut pilot_cfg = SmcConfig::new(0.0, proto.b, proto.tol_rel, proto.params.clone())?;
    pilot_cfg.tol_abs = proto.tol_abs;
    let pilot = run_smc_experiment(&pilot_cfg, theta0, phi0, tau, n_steps, smooth_eps)?;
    let c_hat = pilot.c_hat;
    let t_final = tau * n_steps as f64;
    let rs = rho_star(
        c_hat,
        t_final,
        theta0,
        phi0,
        &proto.params.eta_star,
        proto.b,
    );

    let mut cfgs = Vec::with_capacity(multipliers.len());
    for &m in multipliers {
        let mut cfg = SmcConfig::new(m * rs, proto.b, proto.tol_rel, proto.params.clone())?;
        cfg.tol_abs = proto.tol_abs;
        cfg.c_hat = Some(c_hat);
        cfgs.push(cfg);
    }
    let reports = std::thread::scope(|scope| {
        let handles: Vec<_> = cfgs
            .iter()
            .map(|cfg| {
                scope.spawn(|| run_smc_experiment(cfg, theta0, phi0, tau, n_steps, smooth_eps))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sweep job panicked"))
            .collect::<Result<Vec<_>, _>>()
    })?;

    Ok(SweepResult {
        c_hat_pilot: c_hat,
        psi0: pilot.psi0,
        rho_star: rs,
        reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphs::{MonotoneGraph, SmoothPerturbation};
    use crate::grid::Grid;
    use crate::stepper::Source;
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn base(grid: &Arc<Grid>) -> ModelParams {
        ModelParams {
            ell: 1.0,
            nu: 0.2,
            gamma: 1.0,
            a: 1.0,
            b: 1.0,
            eps_beta: 1e-2,
            eps_a: 1e-5,
            graph: MonotoneGraph::polynomial(),
            perturbation: SmoothPerturbation::double_well(),
            operator: HilbertOperator::Zero,
            eta_star: Field::constant(grid, 0.1),
            source: Source::Zero,
        }
    }

    #[test]
    fn psi_is_the_h_norm_of_the_deviation() {
        let grid = Grid::new_1d(32, 1.0);
        let p = base(&grid);
        // on the manifold: theta = eta_star - b phi
        let phi = Field::from_fn(&grid, |x| 0.2 + 0.1 * (PI * x[0]).cos());
        let mut theta = p.eta_star.clone();
        theta.add_scaled(-p.b, &phi);
        let s = prepare_initial_state(&theta, &phi, &p, 0.0).unwrap();
        assert!(psi(&s, &p) < 1e-14);

        // constant deviation 0.5 on the unit domain
        let mut theta2 = theta.clone();
        theta2.add_scaled(0.5, &Field::constant(&grid, 1.0));
        let s2 = prepare_initial_state(&theta2, &phi, &p, 0.0).unwrap();
        assert!((psi(&s2, &p) - 0.5).abs() < 1e-14);

        // generic state agrees with the direct norm
        let theta3 = Field::from_fn(&grid, |x| 0.3 * (2.0 * PI * x[0]).cos() - 0.2);
        let s3 = prepare_initial_state(&theta3, &phi, &p, 0.0).unwrap();
        let direct = p.eta(&s3.theta, &s3.phi).norm_h();
        assert!((psi(&s3, &p) - direct).abs() < 1e-15);
    }

    #[test]
    fn rho_star_formula() {
        let grid = Grid::new_1d(32, 1.0);
        let eta_star = Field::zeros(&grid);
        // ||eta0|| = 0.5
        let theta0 = Field::constant(&grid, 0.5);
        let phi0 = Field::zeros(&grid);
        let r = rho_star(1.0, 1.0, &theta0, &phi0, &eta_star, 1.0);
        assert!((r - 4.0).abs() < 1e-14);
        let r0 = rho_star(0.0, 2.0, &theta0, &phi0, &eta_star, 1.0);
        assert!((r0 - 0.5).abs() < 1e-14);
        // on the manifold only the gain terms survive
        let theta_m = Field::constant(&grid, -0.3);
        let phi_m = Field::constant(&grid, 0.3);
        let rm = rho_star(2.0, 1.0, &theta_m, &phi_m, &eta_star, 1.0);
        assert!((rm - 8.0).abs() < 1e-14);
    }

    #[test]
    fn c_hat_of_flat_data_is_the_source_norm() {
        let grid = Grid::new_1d(32, 1.0);
        let mut p = base(&grid);
        p.eta_star = Field::constant(&grid, 0.2);
        let flat = Field::constant(&grid, 0.4);
        let mut traj = PhiTrajectory::new();
        for i in 0..3 {
            traj.times.push(i as f64);
            traj.phis.push(flat.clone());
        }
        assert!(estimate_c_hat(&traj, &p, 0.0) < 1e-12);
        p.source = Source::Constant(Field::constant(&grid, 1.0));
        let c = estimate_c_hat(&traj, &p, 0.0);
        assert!((c - 1.0).abs() < 1e-12);
        // the same forcing counts less at higher gain
        let c9 = estimate_c_hat(&traj, &p, 9.0);
        assert!((c9 - 0.25).abs() < 1e-12);
    }

    #[test]
    fn reaching_time_wants_a_stable_suffix() {
        let times = [0.0, 1.0, 2.0, 3.0, 4.0];
        let tol = 1e-3;
        assert_eq!(
            reaching_time(&times, &[1.0, 0.5, 0.1, 0.0, 0.0], tol),
            Some(3.0)
        );
        assert_eq!(
            reaching_time(&times, &[1.0, 0.5, 0.1, 0.01, 0.01], tol),
            None
        );
        // a dip below tol that rises again does not count
        assert_eq!(
            reaching_time(&times, &[1.0, 1e-4, 0.5, 1e-4, 1e-4], tol),
            Some(3.0)
        );
        assert_eq!(
            reaching_time(&times, &[0.0, 0.0, 0.0, 0.0, 0.0], tol),
            Some(0.0)
        );
    }

    #[test]
    fn closing_the_loop_reaches_the_manifold() {
        let grid = Grid::new_1d(32, 1.0);
        let p = base(&grid);
        let theta0 = Field::from_fn(&grid, |x| -0.5 + 0.3 * (PI * x[0]).cos());
        let phi0 = Field::from_fn(&grid, |x| 0.2 + 0.1 * (PI * x[0]).cos());
        let tau = 1e-5;
        let n_steps = 3000;

        let proto = SmcConfig::new(0.0, 1.0, 1e-3, p).unwrap();
        let sweep = sweep_smc(&proto, &theta0, &phi0, tau, n_steps, 0.0, &[2.0]).unwrap();
        assert!(sweep.c_hat_pilot > 0.0);
        let rep = &sweep.reports[0];
        assert!((rep.rho - 2.0 * sweep.rho_star).abs() < 1e-12);
        let ts = rep.t_star.expect("gain above rho_star should reach");
        let bound = rep.bound.expect("positive reaching margin");
        assert!(ts <= bound * 1.2, "t_star {ts} above bound {bound}");
        assert!(rep.monotone_before, "psi should fall monotonically");
        assert!(rep.stays_after, "psi should stay in the band");
        assert!(rep.diff_ineq_ok, "discrete reaching inequality violated");
        // open loop does not reach this band
        let pilot_like = run_smc_experiment(&proto, &theta0, &phi0, tau, n_steps, 0.0).unwrap();
        assert!(pilot_like.t_star.is_none());
    }

    #[test]
    fn starting_on_the_manifold_stays_there() {
        let grid = Grid::new_1d(32, 1.0);
        let p = base(&grid);
        let phi0 = Field::from_fn(&grid, |x| 0.2 + 0.1 * (PI * x[0]).cos());
        let mut theta0 = p.eta_star.clone();
        theta0.add_scaled(-1.0, &phi0);
        let cfg = SmcConfig::new(50.0, 1.0, 1e-3, p).unwrap();
        let rep = run_smc_experiment(&cfg, &theta0, &phi0, 1e-5, 500, 0.0).unwrap();
        assert_eq!(rep.t_star, Some(0.0));
        assert!(rep.stays_after);
        let worst = rep.psi.iter().cloned().fold(0.0f64, f64::max);
        assert!(worst <= rep.tol_abs, "psi wandered to {worst}");
    }
}
