//! Experiment drivers behind the CLI subcommands. Each takes a parsed
//! RunConfig, runs its study, and leaves CSV series, CHSF snapshots and a
//! flat key=value summary.txt in the output directory. All float output
//! goes through `{:e}` so reruns are byte-identical.

use crate::config::{Experiment, RunConfig};
use crate::diagnostics::{
    cont_dep_experiment, energy, eps_refinement_distances, worst_energy_increment, write_csv,
    ContDepData, Monitor,
};
use crate::error::SimError;
use crate::field::Field;
use crate::graphs::{sign_eps, MonotoneGraph, SmoothPerturbation};
use crate::grid::Grid;
use crate::smc::{run_smc_experiment, sweep_smc, ReachingReport, SmcConfig};
use crate::snapshot::{read_chsf, save_chsf, write_chsf};
use crate::stepper::{prepare_initial_state, run, step, ModelParams, Observer, SimState, Source};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

pub fn dispatch(cfg: &RunConfig) -> Result<(), SimError> {
    match cfg.experiment {
        Experiment::Simulate => simulate(cfg),
        Experiment::Smc => smc_single(cfg),
        Experiment::SmcSweep => smc_sweep(cfg),
        Experiment::ContDep => contdep(cfg),
        Experiment::EpsStudy => eps_study(cfg),
        Experiment::SelfTest => {
            let failed = selftest(cfg.seed)?;
            if failed == 0 {
                Ok(())
            } else {
                Err(SimError::SelfTestFailed { failed })
            }
        }
    }
}

/// Accumulates key=value lines for summary.txt.
struct Summary(String);

impl Summary {
    fn new(experiment: &str) -> Self {
        let mut s = Summary(String::new());
        s.kv("experiment", experiment);
        s
    }
    fn kv(&mut self, k: &str, v: impl std::fmt::Display) {
        writeln!(self.0, "{k}={v}").unwrap();
    }
    fn kv_e(&mut self, k: &str, v: f64) {
        writeln!(self.0, "{k}={v:e}").unwrap();
    }
    fn kv_opt(&mut self, k: &str, v: Option<f64>) {
        match v {
            Some(v) => self.kv_e(k, v),
            None => self.kv(k, "none"),
        }
    }
    fn save(self, dir: &Path) -> std::io::Result<()> {
        fs::write(dir.join("summary.txt"), self.0)
    }
}

/// Writes phi and theta snapshots every `stride` steps (0 disables; the
/// drivers always write the final pair themselves).
struct SnapshotWriter {
    dir: PathBuf,
    stride: usize,
}

impl Observer for SnapshotWriter {
    fn observe(&mut self, state: &SimState, _p: &ModelParams) -> Result<(), SimError> {
        if self.stride > 0 && state.step.is_multiple_of(self.stride) {
            save_chsf(
                &self.dir.join(format!("phi_{:08}.chsf", state.step)),
                &state.phi,
                state.t,
            )?;
            save_chsf(
                &self.dir.join(format!("theta_{:08}.chsf", state.step)),
                &state.theta,
                state.t,
            )?;
        }
        Ok(())
    }
}

fn simulate(cfg: &RunConfig) -> Result<(), SimError> {
    let asm = cfg.assemble();
    fs::create_dir_all(&cfg.out)?;
    let state0 = prepare_initial_state(&asm.theta0, &asm.phi0, &asm.params, cfg.smooth_eps)?;
    // data-regularity indicator: the V norm of mu at t = 0 is reported,
    // not enforced
    let initial_mu_v = state0.mu.norm_v();
    let m0 = state0.m0;
    let e0 = energy(&state0, &asm.params)?;

    let mut mon = Monitor::new(cfg.stride);
    let mut snaps = SnapshotWriter {
        dir: cfg.out.clone(),
        stride: cfg.snap_stride,
    };
    let final_state = run(
        state0,
        &asm.params,
        cfg.tau,
        asm.n_steps,
        &mut [&mut mon, &mut snaps],
    )?;

    let mut csv = Vec::new();
    write_csv(&mon.records, &mut csv)?;
    fs::write(cfg.out.join("diagnostics.csv"), csv)?;
    save_chsf(
        &cfg.out.join("phi_final.chsf"),
        &final_state.phi,
        final_state.t,
    )?;
    save_chsf(
        &cfg.out.join("theta_final.chsf"),
        &final_state.theta,
        final_state.t,
    )?;

    let energies: Vec<f64> = mon.records.iter().map(|r| r.energy).collect();
    let mut s = Summary::new("simulate");
    s.kv("n_steps", asm.n_steps);
    s.kv_e("tau", cfg.tau);
    s.kv_e("t_final", final_state.t);
    s.kv("records", mon.records.len());
    s.kv_e("initial_mu_V", initial_mu_v);
    s.kv_e("mass_initial", m0);
    s.kv_e("mass_final", final_state.phi.mean());
    s.kv_e("mass_drift", (final_state.phi.mean() - m0).abs());
    s.kv_e("energy_initial", e0);
    s.kv_e("energy_final", energy(&final_state, &asm.params)?);
    s.kv_e("worst_energy_increment", worst_energy_increment(&energies));
    s.save(&cfg.out)?;
    Ok(())
}

fn write_reaching_csv(path: &Path, rep: &ReachingReport) -> std::io::Result<()> {
    let mut text = String::from("t,psi,sigma_norm\n");
    for i in 0..rep.times.len() {
        writeln!(
            text,
            "{:e},{:e},{:e}",
            rep.times[i], rep.psi[i], rep.sigma_norm[i]
        )
        .unwrap();
    }
    fs::write(path, text)
}

fn reaching_summary(s: &mut Summary, suffix: &str, rep: &ReachingReport) {
    s.kv_e(&format!("rho{suffix}"), rep.rho);
    s.kv_e(&format!("psi0{suffix}"), rep.psi0);
    s.kv_e(&format!("tol_abs{suffix}"), rep.tol_abs);
    s.kv_e(&format!("c_hat{suffix}"), rep.c_hat);
    s.kv_opt(&format!("bound{suffix}"), rep.bound);
    s.kv_opt(&format!("t_star{suffix}"), rep.t_star);
    s.kv(&format!("monotone_before{suffix}"), rep.monotone_before);
    s.kv(&format!("stays_after{suffix}"), rep.stays_after);
    s.kv(&format!("diff_ineq_ok{suffix}"), rep.diff_ineq_ok);
}

fn smc_single(cfg: &RunConfig) -> Result<(), SimError> {
    let asm = cfg.assemble();
    let mut smc_cfg = SmcConfig::new(cfg.rho, cfg.b, cfg.tol_rel, asm.params)?;
    smc_cfg.tol_abs = cfg.tol_abs;
    let rep = run_smc_experiment(
        &smc_cfg,
        &asm.theta0,
        &asm.phi0,
        cfg.tau,
        asm.n_steps,
        cfg.smooth_eps,
    )?;
    fs::create_dir_all(&cfg.out)?;
    write_reaching_csv(&cfg.out.join("reaching.csv"), &rep)?;
    let mut s = Summary::new("smc");
    s.kv("n_steps", asm.n_steps);
    s.kv_e("tau", cfg.tau);
    s.kv_e("b", cfg.b);
    reaching_summary(&mut s, "", &rep);
    s.save(&cfg.out)?;
    Ok(())
}

fn smc_sweep(cfg: &RunConfig) -> Result<(), SimError> {
    let asm = cfg.assemble();
    let mut proto = SmcConfig::new(0.0, cfg.b, cfg.tol_rel, asm.params)?;
    proto.tol_abs = cfg.tol_abs;
    let sweep = sweep_smc(
        &proto,
        &asm.theta0,
        &asm.phi0,
        cfg.tau,
        asm.n_steps,
        cfg.smooth_eps,
        &cfg.rho_multipliers,
    )?;
    fs::create_dir_all(&cfg.out)?;
    let mut s = Summary::new("smc-sweep");
    s.kv("n_steps", asm.n_steps);
    s.kv_e("tau", cfg.tau);
    s.kv_e("b", cfg.b);
    s.kv_e("c_hat_pilot", sweep.c_hat_pilot);
    s.kv_e("rho_star", sweep.rho_star);
    s.kv("runs", sweep.reports.len());
    for (i, rep) in sweep.reports.iter().enumerate() {
        write_reaching_csv(&cfg.out.join(format!("reaching_{i}.csv")), rep)?;
        reaching_summary(&mut s, &format!("_{i}"), rep);
    }
    s.save(&cfg.out)?;
    Ok(())
}

fn contdep(cfg: &RunConfig) -> Result<(), SimError> {
    let asm = cfg.assemble();
    let d1 = ContDepData {
        theta0: asm.theta0.clone(),
        phi0: asm.phi0.clone(),
        eta_star: asm.params.eta_star.clone(),
        source: asm.params.source.clone(),
    };
    let mut d2 = d1.clone();
    let lx = asm.grid.lengths()[0];
    let bump = Field::from_fn(&asm.grid, move |x| (PI * x[0] / lx).cos());
    d2.theta0.add_scaled(cfg.delta, &bump);
    let rep = cont_dep_experiment(&d1, &d2, &asm.params, cfg.tau, asm.n_steps, cfg.smooth_eps)?;
    fs::create_dir_all(&cfg.out)?;
    let mut s = Summary::new("contdep");
    s.kv("n_steps", asm.n_steps);
    s.kv_e("tau", cfg.tau);
    s.kv_e("delta", cfg.delta);
    s.kv_e("max_deta_H", rep.max_deta_h);
    s.kv_e("l2_deta_V", rep.l2_deta_v);
    s.kv_e("max_dphi_Vstar", rep.max_dphi_vstar);
    s.kv_e("l2_dphi_V", rep.l2_dphi_v);
    s.kv_e("dphi0_Vstar", rep.dphi0_vstar);
    s.kv_e("deta0_H", rep.deta0_h);
    s.kv_e("l2_df_H", rep.l2_df_h);
    s.kv_e("deta_star_W", rep.deta_star_w);
    s.kv_e("lhs", rep.lhs);
    s.kv_e("rhs", rep.rhs);
    s.kv_e("ratio", rep.ratio);
    s.save(&cfg.out)?;
    Ok(())
}

fn eps_study(cfg: &RunConfig) -> Result<(), SimError> {
    let asm = cfg.assemble();
    let dists = eps_refinement_distances(
        &asm.params,
        &asm.theta0,
        &asm.phi0,
        &cfg.eps_list,
        cfg.tau,
        asm.n_steps,
        cfg.smooth_eps,
    )?;
    fs::create_dir_all(&cfg.out)?;
    let mut csv = String::from("eps_coarse,eps_fine,distance\n");
    for (i, d) in dists.iter().enumerate() {
        writeln!(
            csv,
            "{:e},{:e},{:e}",
            cfg.eps_list[i],
            cfg.eps_list[i + 1],
            d
        )
        .unwrap();
    }
    fs::write(cfg.out.join("eps_study.csv"), csv)?;
    let mut s = Summary::new("eps-study");
    s.kv("n_steps", asm.n_steps);
    s.kv_e("tau", cfg.tau);
    s.kv("levels", cfg.eps_list.len());
    for (i, d) in dists.iter().enumerate() {
        s.kv_e(&format!("distance_{i}"), *d);
    }
    let decreasing = dists.windows(2).all(|w| w[1] < w[0]);
    s.kv("strictly_decreasing", decreasing);
    s.save(&cfg.out)?;
    Ok(())
}

/// Built-in property battery. Prints one line per check and returns the
/// number of failures.
pub fn selftest(seed: u64) -> Result<usize, SimError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut results: Vec<(&str, bool, String)> = Vec::new();

    // cosine transform round trip
    {
        let grid = Grid::new_1d(64, 1.0);
        let data: Vec<f64> = (0..64).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let back = grid.to_samples(&grid.to_modes(&data));
        let err = data
            .iter()
            .zip(&back)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        results.push((
            "transform_round_trip",
            err < 1e-12,
            format!("max_err={err:e} (tol 1e-12)"),
        ));
    }

    // inverse Neumann Laplacian inverts and is self-adjoint
    {
        let grid = Grid::new_1d(128, 1.0);
        let mut worst_inv: f64 = 0.0;
        let mut worst_sym: f64 = 0.0;
        for _ in 0..20 {
            let zero_mean = |rng: &mut ChaCha8Rng| {
                let data: Vec<f64> = (0..128).map(|_| rng.gen_range(-1.0..=1.0)).collect();
                let mut w = Field::from_samples(&grid, data);
                let m = w.mean();
                w = w.map(|v| v - m);
                w.scale(1.0 / w.norm_h());
                w
            };
            let u = zero_mean(&mut rng);
            let v = zero_mean(&mut rng);
            let nu_ = u.inv_neumann_laplacian()?;
            let nv = v.inv_neumann_laplacian()?;
            let res = nu_.laplacian().zip_with(&u, |a, b| a + b).norm_h();
            worst_inv = worst_inv.max(res / u.norm_h());
            worst_sym = worst_sym.max((u.inner_h(&nv) - v.inner_h(&nu_)).abs());
        }
        results.push((
            "inverse_neumann_laplacian",
            worst_inv < 1e-10 && worst_sym < 1e-12,
            format!("rel_residual={worst_inv:e} (tol 1e-10), asymmetry={worst_sym:e} (tol 1e-12)"),
        ));
    }

    // scalar graph machinery, each kind
    for (graph, name, lo, hi) in [
        (MonotoneGraph::polynomial(), "graph_polynomial", -3.0, 3.0),
        (MonotoneGraph::obstacle(), "graph_obstacle", -2.0, 2.0),
        (
            MonotoneGraph::logarithmic(),
            "graph_logarithmic",
            -0.99,
            0.99,
        ),
    ] {
        let mut ok = true;
        let mut detail = String::from("monotone, lipschitz, bounded, nonexpansive");
        'outer: for _ in 0..2000 {
            let eps = 10f64.powf(rng.gen_range(-3.0..=-1.0));
            let r1 = rng.gen_range(lo..=hi);
            let r2 = rng.gen_range(lo..=hi);
            let y1 = graph.yosida(eps, r1)?;
            let y2 = graph.yosida(eps, r2)?;
            let j1 = graph.resolvent(eps, r1)?;
            let j2 = graph.resolvent(eps, r2)?;
            let checks = [
                ((y1 - y2) * (r1 - r2) >= -1e-12, "monotone"),
                (
                    (y1 - y2).abs() <= (r1 - r2).abs() / eps * (1.0 + 1e-9) + 1e-12,
                    "lipschitz",
                ),
                (
                    (j1 - j2).abs() <= (r1 - r2).abs() * (1.0 + 1e-9) + 1e-12,
                    "nonexpansive",
                ),
            ];
            for (pass, what) in checks {
                if !pass {
                    ok = false;
                    detail = format!("{what} failed at eps={eps:e}, r1={r1}, r2={r2}");
                    break 'outer;
                }
            }
            if let Some(min) = graph.minimal_section(r1) {
                if y1.abs() > min.abs() + 1e-9 {
                    ok = false;
                    detail = format!("|yosida| {y1:e} above |minimal section| {min:e} at r={r1}");
                    break;
                }
            }
        }
        results.push((name, ok, detail));
    }

    // envelope derivative matches the yosida approximation
    {
        let h = 1e-6;
        let mut worst: f64 = 0.0;
        for (graph, lo, hi) in [
            (MonotoneGraph::polynomial(), -3.0, 3.0),
            (MonotoneGraph::obstacle(), -2.0, 2.0),
            (MonotoneGraph::logarithmic(), -0.99, 0.99),
        ] {
            let mut n = 0;
            while n < 1000 {
                let eps = 10f64.powf(rng.gen_range(-3.0..=-1.0));
                let r: f64 = rng.gen_range(lo..=hi);
                // the envelope has a second-derivative jump at the kinks of
                // the obstacle graph; a central difference straddling one
                // does not measure the derivative
                if graph.kind == crate::graphs::GraphKind::Obstacle
                    && ((r - 1.0).abs() < 10.0 * h || (r + 1.0).abs() < 10.0 * h)
                {
                    continue;
                }
                let d = (graph.moreau_envelope(eps, r + h)? - graph.moreau_envelope(eps, r - h)?)
                    / (2.0 * h);
                worst = worst.max((d - graph.yosida(eps, r)?).abs());
                n += 1;
            }
        }
        results.push((
            "envelope_derivative",
            worst < 1e-5,
            format!("max_err={worst:e} (tol 1e-5)"),
        ));
    }

    // conservation and dissipation on a short free run
    {
        let grid = Grid::new_1d(64, 1.0);
        let p = ModelParams {
            ell: 0.5,
            nu: 5e-3,
            gamma: 1.0,
            a: 1.0,
            b: 0.0,
            eps_beta: 1e-2,
            eps_a: 1e-3,
            graph: MonotoneGraph::polynomial(),
            perturbation: SmoothPerturbation::double_well(),
            operator: crate::graphs::HilbertOperator::Zero,
            eta_star: Field::zeros(&grid),
            source: Source::Zero,
        };
        let theta0 = Field::from_fn(&grid, |x| 0.2 * (PI * x[0]).cos());
        let phi0 = Field::from_fn(&grid, |x| 0.1 + 0.4 * (2.0 * PI * x[0]).cos());
        let state0 = prepare_initial_state(&theta0, &phi0, &p, 0.0)?;
        let m0 = state0.m0;
        let mut mon = Monitor::new(1);
        run(state0, &p, 1e-4, 200, &mut [&mut mon])?;
        let drift = mon
            .records
            .iter()
            .fold(0.0f64, |m, r| m.max((r.mass - m0).abs()));
        results.push((
            "mass_conservation",
            drift < 1e-13,
            format!("max_drift={drift:e} (tol 1e-13)"),
        ));
        let energies: Vec<f64> = mon.records.iter().map(|r| r.energy).collect();
        let worst = worst_energy_increment(&energies);
        results.push((
            "energy_dissipation",
            worst <= 1e-10,
            format!("worst_increment={worst:e} (tol 1e-10)"),
        ));
    }

    // pure linear regime against the per-mode recurrence
    {
        let n = 32;
        let grid = Grid::new_1d(n, 1.0);
        let p = ModelParams {
            ell: 0.7,
            nu: 0.8,
            gamma: 1.3,
            a: 1.0,
            b: 0.0,
            eps_beta: 1e-2,
            eps_a: 1e-3,
            graph: MonotoneGraph::obstacle(),
            perturbation: SmoothPerturbation::zero(),
            operator: crate::graphs::HilbertOperator::Zero,
            eta_star: Field::zeros(&grid),
            source: Source::Zero,
        };
        let theta0 = Field::from_fn(&grid, |x| 0.01 + 0.02 * (2.0 * PI * x[0]).cos());
        let phi0 = Field::from_fn(&grid, |x| 0.05 * (PI * x[0]).cos() - 0.1);
        let tau = 1e-3;
        let steps = 50;
        let mut th = grid.to_modes(theta0.data());
        let mut ph = grid.to_modes(phi0.data());
        for _ in 0..steps {
            let mut th1 = vec![0.0; n];
            let mut ph1 = vec![0.0; n];
            grid.for_each_mode(|j, lam, _| {
                let r1 = th[j] + p.ell * ph[j];
                let r2 = ph[j];
                let det = (1.0 + tau * lam) * (1.0 + tau * p.nu * lam * lam)
                    + p.ell * p.gamma * tau * lam;
                th1[j] = ((1.0 + tau * p.nu * lam * lam) * r1 - p.ell * r2) / det;
                ph1[j] = (p.gamma * tau * lam * r1 + (1.0 + tau * lam) * r2) / det;
            });
            th = th1;
            ph = ph1;
        }
        let mut state = prepare_initial_state(&theta0, &phi0, &p, 0.0)?;
        for _ in 0..steps {
            state = step(&state, &p, tau)?;
        }
        let th_sim = grid.to_modes(state.theta.data());
        let ph_sim = grid.to_modes(state.phi.data());
        let err = (0..n).fold(0.0f64, |m, j| {
            m.max((th_sim[j] - th[j]).abs())
                .max((ph_sim[j] - ph[j]).abs())
        });
        results.push((
            "linear_regime_oracle",
            err < 1e-12,
            format!("max_mode_err={err:e} (tol 1e-12)"),
        ));
    }

    // snapshot container round trip
    {
        let grid = Grid::new_2d(8, 6, 1.0, 2.0);
        let data: Vec<f64> = (0..48).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let f = Field::from_samples(&grid, data);
        let mut buf = Vec::new();
        write_chsf(&mut buf, &f, 1.25)?;
        let (g, t) = read_chsf(&mut buf.as_slice())?;
        let ok = t == 1.25 && g.grid() == f.grid() && g.data() == f.data();
        results.push(("chsf_round_trip", ok, "byte-exact".into()));
    }

    // normalization operator branches
    {
        let grid = Grid::new_1d(32, 1.0);
        let v = Field::constant(&grid, 3.0);
        let unit = sign_eps(&v, 0.1);
        let small = Field::constant(&grid, 1e-3);
        let scaled = sign_eps(&small, 0.1);
        let ok = (unit.norm_h() - 1.0).abs() < 1e-14 && (scaled.data()[0] - 1e-2).abs() < 1e-15;
        results.push((
            "sign_eps_branches",
            ok,
            "unit norm outside, linear inside".into(),
        ));
    }

    let mut failed = 0;
    for (name, pass, detail) in &results {
        if *pass {
            println!("ok   {name}: {detail}");
        } else {
            failed += 1;
            println!("FAIL {name}: {detail}");
        }
    }
    println!("{} checks, {} failed", results.len(), failed);
    Ok(failed)
}
