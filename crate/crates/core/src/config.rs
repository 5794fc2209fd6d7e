//! Run configuration: a flat key = value file, '#' comments, unknown keys
//! rejected. Parsing yields a RunConfig with documented defaults;
//! `assemble` turns it into the grid, model parameters and initial fields
//! a driver needs.

use crate::field::Field;
use crate::graphs::{GraphKind, HilbertOperator, MonotoneGraph, SmoothPerturbation};
use crate::grid::Grid;
use crate::stepper::{ModelParams, Source};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;
use std::sync::Arc;

#[derive(Debug)]
pub enum ConfigError {
    Parse { line: usize, msg: String },
    Validation { field: &'static str, msg: String },
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Parse { line, msg } => write!(f, "config line {line}: {msg}"),
            ConfigError::Validation { field, msg } => write!(f, "config field '{field}': {msg}"),
        }
    }
}

impl std::error::Error for ConfigError {}

fn invalid(field: &'static str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Validation {
        field,
        msg: msg.into(),
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum Experiment {
    Simulate,
    Smc,
    SmcSweep,
    ContDep,
    SelfTest,
    EpsStudy,
}

impl Experiment {
    fn parse(value: &str, line: usize) -> Result<Self, ConfigError> {
        match value {
            "simulate" => Ok(Experiment::Simulate),
            "smc" => Ok(Experiment::Smc),
            "smc-sweep" => Ok(Experiment::SmcSweep),
            "contdep" => Ok(Experiment::ContDep),
            "selftest" => Ok(Experiment::SelfTest),
            "eps-study" => Ok(Experiment::EpsStudy),
            other => Err(ConfigError::Parse {
                line,
                msg: format!(
                    "unknown experiment '{other}' (want simulate, smc, smc-sweep, contdep, selftest or eps-study)"
                ),
            }),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::Smc => "smc",
            Experiment::SmcSweep => "smc-sweep",
            Experiment::ContDep => "contdep",
            Experiment::SelfTest => "selftest",
            Experiment::EpsStudy => "eps-study",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum OperatorKind {
    Zero,
    Sign,
}

/// Initial-data and source shapes expressible in a config file.
#[derive(Clone, Debug)]
pub enum Profile {
    Const(f64),
    /// mean + amp * prod_axis cos(pi k_axis x_axis / L_axis); one k per axis.
    Cosine {
        mean: f64,
        amp: f64,
        k: Vec<u32>,
    },
    /// mean + iid uniform noise in [-amp, amp], reproducible from the seed.
    Random {
        mean: f64,
        amp: f64,
        seed: u64,
    },
}

impl Profile {
    fn parse(value: &str, line: usize) -> Result<Self, ConfigError> {
        let err = |msg: String| ConfigError::Parse { line, msg };
        let toks: Vec<&str> = value.split_whitespace().collect();
        let numf = |s: &str| -> Result<f64, ConfigError> {
            s.parse()
                .map_err(|_| err(format!("expected a number, got '{s}'")))
        };
        match toks.as_slice() {
            ["const", v] => Ok(Profile::Const(numf(v)?)),
            ["cosine", mean, amp, ks @ ..] if !ks.is_empty() && ks.len() <= 2 => {
                let k = ks
                    .iter()
                    .map(|s| {
                        s.parse()
                            .map_err(|_| err(format!("expected a mode number, got '{s}'")))
                    })
                    .collect::<Result<Vec<u32>, _>>()?;
                Ok(Profile::Cosine {
                    mean: numf(mean)?,
                    amp: numf(amp)?,
                    k,
                })
            }
            ["random", mean, amp, seed] => Ok(Profile::Random {
                mean: numf(mean)?,
                amp: numf(amp)?,
                seed: seed
                    .parse()
                    .map_err(|_| err(format!("expected a seed, got '{seed}'")))?,
            }),
            _ => Err(err(format!(
                "bad profile '{value}' (want 'const v', 'cosine mean amp k [k2]' or 'random mean amp seed')"
            ))),
        }
    }

    fn axes(&self) -> Option<usize> {
        match self {
            Profile::Cosine { k, .. } => Some(k.len()),
            _ => None,
        }
    }

    pub fn realize(&self, grid: &Arc<Grid>) -> Field {
        match self {
            Profile::Const(v) => Field::constant(grid, *v),
            Profile::Cosine { mean, amp, k } => {
                assert_eq!(k.len(), grid.dims());
                let lengths = grid.lengths().to_vec();
                let k = k.clone();
                let (mean, amp) = (*mean, *amp);
                Field::from_fn(grid, move |x| {
                    let mut v = amp;
                    for (axis, &xi) in x.iter().enumerate() {
                        v *= (PI * k[axis] as f64 * xi / lengths[axis]).cos();
                    }
                    mean + v
                })
            }
            Profile::Random { mean, amp, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let data = (0..grid.len())
                    .map(|_| mean + rng.gen_range(-*amp..=*amp))
                    .collect();
                Field::from_samples(grid, data)
            }
        }
    }
}

#[derive(Clone, Debug)]
pub struct RunConfig {
    pub experiment: Experiment,
    pub dims: usize,
    pub nx: usize,
    pub ny: Option<usize>,
    pub lx: f64,
    pub ly: f64,
    pub ell: f64,
    pub nu: f64,
    pub gamma: f64,
    pub a: f64,
    pub b: f64,
    pub eps_beta: f64,
    pub eps_a: f64,
    pub graph: GraphKind,
    pub perturbation: SmoothPerturbation,
    pub operator: OperatorKind,
    pub rho: f64,
    pub tau: f64,
    pub t_final: f64,
    pub stride: usize,
    /// Extra phi/theta snapshots every this many steps; 0 writes only the
    /// final pair.
    pub snap_stride: usize,
    pub out: PathBuf,
    pub seed: u64,
    pub smooth_eps: f64,
    pub theta0: Profile,
    pub phi0: Profile,
    pub eta_star: Profile,
    /// None is a true zero source (skips the work).
    pub source: Option<Profile>,
    pub tol_rel: f64,
    pub tol_abs: Option<f64>,
    /// Initial-data perturbation magnitude for the contdep experiment.
    pub delta: f64,
    pub eps_list: Vec<f64>,
    /// Gain grid for smc-sweep, as multiples of rho_star.
    pub rho_multipliers: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            experiment: Experiment::Simulate,
            dims: 1,
            nx: 64,
            ny: None,
            lx: 1.0,
            ly: 1.0,
            ell: 1.0,
            nu: 0.01,
            gamma: 1.0,
            a: 1.0,
            b: 0.0,
            eps_beta: 1e-2,
            eps_a: 1e-3,
            graph: GraphKind::Polynomial,
            perturbation: SmoothPerturbation::double_well(),
            operator: OperatorKind::Zero,
            rho: 0.0,
            tau: 1e-4,
            t_final: 1.0,
            stride: 10,
            snap_stride: 0,
            out: PathBuf::from("out"),
            seed: 1,
            smooth_eps: 0.0,
            theta0: Profile::Const(0.0),
            phi0: Profile::Const(0.0),
            eta_star: Profile::Const(0.0),
            source: None,
            tol_rel: 1e-3,
            tol_abs: None,
            delta: 1e-3,
            eps_list: vec![1e-1, 1e-2, 1e-3],
            rho_multipliers: crate::smc::default_multipliers(),
        }
    }
}

pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let mut cfg = RunConfig::default();
    let mut seen = std::collections::HashSet::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let stripped = raw.split('#').next().unwrap().trim();
        if stripped.is_empty() {
            continue;
        }
        let err = |msg: String| ConfigError::Parse { line, msg };
        let (key, value) = stripped
            .split_once('=')
            .ok_or_else(|| err(format!("expected 'key = value', got '{stripped}'")))?;
        let (key, value) = (key.trim(), value.trim());
        if value.is_empty() {
            return Err(err(format!("key '{key}' has no value")));
        }
        if !seen.insert(key.to_string()) {
            return Err(err(format!("duplicate key '{key}'")));
        }
        let numf = |field: &str| -> Result<f64, ConfigError> {
            value
                .parse()
                .map_err(|_| err(format!("'{field}' expects a number, got '{value}'")))
        };
        let numu = |field: &str| -> Result<usize, ConfigError> {
            value.parse().map_err(|_| {
                err(format!(
                    "'{field}' expects a non-negative integer, got '{value}'"
                ))
            })
        };
        let numlist = |field: &str| -> Result<Vec<f64>, ConfigError> {
            value
                .split(',')
                .map(|s| s.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| {
                    err(format!(
                        "'{field}' expects comma-separated numbers, got '{value}'"
                    ))
                })
        };
        match key {
            "experiment" => cfg.experiment = Experiment::parse(value, line)?,
            "dims" => cfg.dims = numu("dims")?,
            "nx" => cfg.nx = numu("nx")?,
            "ny" => cfg.ny = Some(numu("ny")?),
            "lx" => cfg.lx = numf("lx")?,
            "ly" => cfg.ly = numf("ly")?,
            "ell" => cfg.ell = numf("ell")?,
            "nu" => cfg.nu = numf("nu")?,
            "gamma" => cfg.gamma = numf("gamma")?,
            "a" => cfg.a = numf("a")?,
            "b" => cfg.b = numf("b")?,
            "eps_beta" => cfg.eps_beta = numf("eps_beta")?,
            "eps_a" => cfg.eps_a = numf("eps_a")?,
            "graph" => {
                cfg.graph = match value {
                    "polynomial" => GraphKind::Polynomial,
                    "obstacle" => GraphKind::Obstacle,
                    "logarithmic" => GraphKind::Logarithmic,
                    other => {
                        return Err(err(format!(
                            "unknown graph '{other}' (want polynomial, obstacle or logarithmic)"
                        )))
                    }
                }
            }
            "perturbation" => {
                cfg.perturbation = match value {
                    "none" => SmoothPerturbation::zero(),
                    "double_well" => SmoothPerturbation::double_well(),
                    other => {
                        return Err(err(format!(
                            "unknown perturbation '{other}' (want none or double_well)"
                        )))
                    }
                }
            }
            "operator" => {
                cfg.operator = match value {
                    "zero" => OperatorKind::Zero,
                    "sign" => OperatorKind::Sign,
                    other => {
                        return Err(err(format!(
                            "unknown operator '{other}' (want zero or sign)"
                        )))
                    }
                }
            }
            "rho" => cfg.rho = numf("rho")?,
            "tau" => cfg.tau = numf("tau")?,
            "t_final" => cfg.t_final = numf("t_final")?,
            "stride" => cfg.stride = numu("stride")?,
            "snap_stride" => cfg.snap_stride = numu("snap_stride")?,
            "out" => cfg.out = PathBuf::from(value),
            "seed" => {
                cfg.seed = value.parse().map_err(|_| {
                    err(format!(
                        "'seed' expects a non-negative integer, got '{value}'"
                    ))
                })?
            }
            "smooth_eps" => cfg.smooth_eps = numf("smooth_eps")?,
            "theta0" => cfg.theta0 = Profile::parse(value, line)?,
            "phi0" => cfg.phi0 = Profile::parse(value, line)?,
            "eta_star" => cfg.eta_star = Profile::parse(value, line)?,
            "f" => {
                cfg.source = if value == "zero" {
                    None
                } else {
                    Some(Profile::parse(value, line)?)
                }
            }
            "tol_rel" => cfg.tol_rel = numf("tol_rel")?,
            "tol_abs" => cfg.tol_abs = Some(numf("tol_abs")?),
            "delta" => cfg.delta = numf("delta")?,
            "eps_list" => cfg.eps_list = numlist("eps_list")?,
            "rho_multipliers" => cfg.rho_multipliers = numlist("rho_multipliers")?,
            other => return Err(err(format!("unknown key '{other}'"))),
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        fn pos(v: f64, field: &'static str) -> Result<(), ConfigError> {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(
                    field,
                    format!("must be positive and finite, got {v}"),
                ))
            }
        }
        if !(self.dims == 1 || self.dims == 2) {
            return Err(invalid(
                "dims",
                format!("must be 1 or 2, got {}", self.dims),
            ));
        }
        if self.nx < 4 {
            return Err(invalid(
                "nx",
                format!("need at least 4 cells, got {}", self.nx),
            ));
        }
        match (self.dims, self.ny) {
            (2, None) => return Err(invalid("ny", "required when dims = 2")),
            (2, Some(ny)) if ny < 4 => {
                return Err(invalid("ny", format!("need at least 4 cells, got {ny}")))
            }
            (1, Some(_)) => return Err(invalid("ny", "set but dims = 1")),
            _ => {}
        }
        pos(self.lx, "lx")?;
        if self.dims == 2 {
            pos(self.ly, "ly")?;
        }
        pos(self.ell, "ell")?;
        pos(self.nu, "nu")?;
        pos(self.gamma, "gamma")?;
        pos(self.a, "a")?;
        if !(self.b >= 0.0 && self.b.is_finite()) {
            return Err(invalid(
                "b",
                format!("must be >= 0 and finite, got {}", self.b),
            ));
        }
        pos(self.eps_beta, "eps_beta")?;
        pos(self.eps_a, "eps_a")?;
        pos(self.tau, "tau")?;
        if !(self.t_final >= self.tau && self.t_final.is_finite()) {
            return Err(invalid(
                "t_final",
                format!("must be at least tau = {}, got {}", self.tau, self.t_final),
            ));
        }
        if self.stride < 1 {
            return Err(invalid("stride", "must be at least 1"));
        }
        if !(self.rho >= 0.0 && self.rho.is_finite()) {
            return Err(invalid(
                "rho",
                format!("must be >= 0 and finite, got {}", self.rho),
            ));
        }
        if self.operator == OperatorKind::Sign {
            pos(self.rho, "rho")?;
        }
        if !(self.smooth_eps >= 0.0 && self.smooth_eps.is_finite()) {
            return Err(invalid(
                "smooth_eps",
                format!("must be >= 0 and finite, got {}", self.smooth_eps),
            ));
        }
        pos(self.tol_rel, "tol_rel")?;
        if let Some(t) = self.tol_abs {
            if !(t > 0.0 && t.is_finite()) {
                return Err(invalid(
                    "tol_abs",
                    format!("must be positive and finite, got {t}"),
                ));
            }
        }
        if !self.delta.is_finite() {
            return Err(invalid("delta", "must be finite"));
        }

        let arity = |p: &Profile, field: &'static str| -> Result<(), ConfigError> {
            if let Some(n) = p.axes() {
                if n != self.dims {
                    return Err(invalid(
                        field,
                        format!(
                            "cosine profile has {n} mode numbers but dims = {}",
                            self.dims
                        ),
                    ));
                }
            }
            Ok(())
        };
        arity(&self.theta0, "theta0")?;
        arity(&self.phi0, "phi0")?;
        arity(&self.eta_star, "eta_star")?;
        if let Some(p) = &self.source {
            arity(p, "f")?;
        }

        match self.experiment {
            Experiment::Smc | Experiment::SmcSweep => {
                pos(self.b, "b")?;
                if self.experiment == Experiment::Smc {
                    pos(self.rho, "rho")?;
                }
                if self.rho_multipliers.is_empty()
                    || self
                        .rho_multipliers
                        .iter()
                        .any(|&m| !(m > 0.0 && m.is_finite()))
                {
                    return Err(invalid(
                        "rho_multipliers",
                        "need a nonempty list of positive numbers",
                    ));
                }
            }
            Experiment::ContDep => {
                pos(self.b, "b")?;
                let gap = (self.a * self.ell - self.b).abs();
                if gap > 1e-12 * self.b.max(1.0) {
                    return Err(invalid(
                        "b",
                        format!(
                            "trajectory comparison needs a*ell = b (a*ell = {}, b = {})",
                            self.a * self.ell,
                            self.b
                        ),
                    ));
                }
            }
            Experiment::EpsStudy => {
                if self.eps_list.len() < 2
                    || self.eps_list.iter().any(|&e| !(e > 0.0 && e.is_finite()))
                {
                    return Err(invalid("eps_list", "need at least two positive levels"));
                }
            }
            Experiment::Simulate | Experiment::SelfTest => {}
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_final / self.tau).round().max(1.0) as usize
    }

    pub fn grid(&self) -> Arc<Grid> {
        match self.dims {
            1 => Grid::new_1d(self.nx, self.lx),
            _ => Grid::new_2d(self.nx, self.ny.expect("validated"), self.lx, self.ly),
        }
    }

    /// Realizes the profiles and builds the model. eta_star gets the same
    /// Helmholtz smoothing the stepper applies to theta0.
    pub fn assemble(&self) -> Assembled {
        let grid = self.grid();
        let mut eta_star = self.eta_star.realize(&grid);
        if self.smooth_eps > 0.0 {
            eta_star = eta_star.helmholtz_smooth(self.smooth_eps);
        }
        let params = ModelParams {
            ell: self.ell,
            nu: self.nu,
            gamma: self.gamma,
            a: self.a,
            b: self.b,
            eps_beta: self.eps_beta,
            eps_a: self.eps_a,
            graph: MonotoneGraph { kind: self.graph },
            perturbation: self.perturbation,
            operator: match self.operator {
                OperatorKind::Zero => HilbertOperator::Zero,
                OperatorKind::Sign => HilbertOperator::ScaledSign { rho: self.rho },
            },
            eta_star,
            source: match &self.source {
                None => Source::Zero,
                Some(p) => Source::Constant(p.realize(&grid)),
            },
        };
        Assembled {
            theta0: self.theta0.realize(&grid),
            phi0: self.phi0.realize(&grid),
            n_steps: self.n_steps(),
            grid,
            params,
        }
    }
}

pub struct Assembled {
    pub grid: Arc<Grid>,
    pub params: ModelParams,
    pub theta0: Field,
    pub phi0: Field,
    pub n_steps: usize,
}
