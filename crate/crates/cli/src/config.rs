//! Experiment configuration: a small TOML schema with one table per concern.
//! Unknown keys are rejected so a typo in a tolerance name fails loudly
//! instead of silently running with a default.

use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use serde::Deserialize;

use iqcert::algorithms::{gradient_descent, heavy_ball, nesterov, triple_momentum};
use iqcert::certify::MultiplierSpec;
use iqcert::lure::{to_output_form, OutputForm, ReducedSystem};
use iqcert::problems::QuadraticObjective;
use iqcert::sets::ConvexSet;

use crate::CliError;

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub algorithm: AlgorithmCfg,
    #[serde(default)]
    pub objective: Option<ObjectiveCfg>,
    #[serde(default)]
    pub set: Option<SetCfg>,
    #[serde(default)]
    pub multiplier: Option<MultiplierCfg>,
    #[serde(default)]
    pub run: RunCfg,
    #[serde(default)]
    pub output: OutputCfg,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmCfg {
    /// `gradient-descent`, `nesterov`, `triple-momentum`, `heavy-ball`, or
    /// `custom` (explicit reduced matrices).
    pub name: String,
    /// Sector bounds used to instantiate the named factory; default to the
    /// objective's constants when omitted.
    #[serde(default)]
    pub m: Option<f64>,
    #[serde(default)]
    pub l: Option<f64>,
    /// Explicit reduced matrices for `name = "custom"`.
    #[serde(default)]
    pub a: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub b: Option<Vec<f64>>,
    #[serde(default)]
    pub c: Option<Vec<f64>>,
    #[serde(default)]
    pub d: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveCfg {
    /// `quadratic` (explicit `f`, `b`) or `random` (seeded family).
    pub kind: String,
    #[serde(default)]
    pub f: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub b: Option<Vec<f64>>,
    #[serde(default)]
    pub d: Option<usize>,
    #[serde(default)]
    pub kappa: Option<f64>,
    #[serde(default)]
    pub m: Option<f64>,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SetCfg {
    /// `whole-space`, `ball`, `box`, `halfspace`, or `hyperplane`.
    pub kind: String,
    #[serde(default)]
    pub center: Option<Vec<f64>>,
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default)]
    pub lo: Option<Vec<f64>>,
    #[serde(default)]
    pub hi: Option<Vec<f64>>,
    #[serde(default)]
    pub a: Option<Vec<f64>>,
    #[serde(default)]
    pub b: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MultiplierCfg {
    /// `static-sector` or `weighted-off-by-one`.
    pub kind: String,
    #[serde(default)]
    pub rho_weight: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunCfg {
    #[serde(default = "default_max_iters")]
    pub max_iters: usize,
    #[serde(default = "default_stop_tol")]
    pub stop_tol: f64,
    #[serde(default = "default_bisect_tol")]
    pub bisect_tol: f64,
    #[serde(default)]
    pub seed: u64,
    /// Optional explicit start; defaults to the projection of the origin.
    #[serde(default)]
    pub y0: Option<Vec<f64>>,
}

fn default_max_iters() -> usize {
    100_000
}
fn default_stop_tol() -> f64 {
    1e-9
}
fn default_bisect_tol() -> f64 {
    1e-4
}

impl Default for RunCfg {
    fn default() -> Self {
        Self {
            max_iters: default_max_iters(),
            stop_tol: default_stop_tol(),
            bisect_tol: default_bisect_tol(),
            seed: 0,
            y0: None,
        }
    }
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputCfg {
    #[serde(default)]
    pub dir: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            CliError::Config(format!("cannot read config {}: {e}", path.display()))
        })?;
        let cfg: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        for (label, value) in [
            ("run.stop_tol", self.run.stop_tol),
            ("run.bisect_tol", self.run.bisect_tol),
        ] {
            if !(value > 0.0) || !value.is_finite() {
                return Err(CliError::Config(format!("{label} must be positive, got {value}")));
            }
        }
        Ok(())
    }
}

/// Rejects option fields that do not belong to the selected `kind`, so a
/// misplaced key is an error rather than dead weight.
fn reject_extraneous(section: &str, kind: &str, extras: &[(&str, bool)]) -> Result<(), CliError> {
    for (name, present) in extras {
        if *present {
            return Err(CliError::Config(format!(
                "[{section}] key `{name}` is not valid for kind = \"{kind}\""
            )));
        }
    }
    Ok(())
}

pub fn build_objective(
    cfg: &ObjectiveCfg,
    default_seed: u64,
) -> Result<QuadraticObjective<f64>, CliError> {
    match cfg.kind.as_str() {
        "quadratic" => {
            reject_extraneous(
                "objective",
                "quadratic",
                &[
                    ("d", cfg.d.is_some()),
                    ("kappa", cfg.kappa.is_some()),
                    ("m", cfg.m.is_some()),
                    ("seed", cfg.seed.is_some()),
                ],
            )?;
            let f = cfg.f.as_ref().ok_or_else(|| {
                CliError::Config("[objective] kind = \"quadratic\" requires `f`".into())
            })?;
            let b = cfg.b.as_ref().ok_or_else(|| {
                CliError::Config("[objective] kind = \"quadratic\" requires `b`".into())
            })?;
            let mat = rows_to_matrix("objective.f", f)?;
            let vec = DVector::from_vec(b.clone());
            QuadraticObjective::new(mat, vec)
                .map_err(|e| CliError::Config(format!("[objective] {e}")))
        }
        "random" => {
            reject_extraneous(
                "objective",
                "random",
                &[("f", cfg.f.is_some()), ("b", cfg.b.is_some())],
            )?;
            let d = cfg.d.ok_or_else(|| {
                CliError::Config("[objective] kind = \"random\" requires `d`".into())
            })?;
            let kappa = cfg.kappa.ok_or_else(|| {
                CliError::Config("[objective] kind = \"random\" requires `kappa`".into())
            })?;
            let m = cfg.m.unwrap_or(1.0);
            let seed = cfg.seed.unwrap_or(default_seed);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            QuadraticObjective::random(d, m, m * kappa, &mut rng)
                .map_err(|e| CliError::Config(format!("[objective] {e}")))
        }
        other => Err(CliError::Config(format!(
            "[objective] unknown kind \"{other}\" (expected quadratic or random)"
        ))),
    }
}

pub fn build_set(cfg: &SetCfg, dim: usize) -> Result<ConvexSet<f64>, CliError> {
    let err = |e: iqcert::Error| CliError::Config(format!("[set] {e}"));
    match cfg.kind.as_str() {
        "whole-space" => {
            reject_extraneous(
                "set",
                "whole-space",
                &[
                    ("center", cfg.center.is_some()),
                    ("radius", cfg.radius.is_some()),
                    ("lo", cfg.lo.is_some()),
                    ("hi", cfg.hi.is_some()),
                    ("a", cfg.a.is_some()),
                    ("b", cfg.b.is_some()),
                ],
            )?;
            Ok(ConvexSet::whole_space(dim))
        }
        "ball" => {
            reject_extraneous(
                "set",
                "ball",
                &[
                    ("lo", cfg.lo.is_some()),
                    ("hi", cfg.hi.is_some()),
                    ("a", cfg.a.is_some()),
                    ("b", cfg.b.is_some()),
                ],
            )?;
            let center = cfg
                .center
                .clone()
                .map(DVector::from_vec)
                .unwrap_or_else(|| DVector::zeros(dim));
            let radius = cfg
                .radius
                .ok_or_else(|| CliError::Config("[set] ball requires `radius`".into()))?;
            ConvexSet::ball(center, radius).map_err(err)
        }
        "box" => {
            reject_extraneous(
                "set",
                "box",
                &[
                    ("center", cfg.center.is_some()),
                    ("radius", cfg.radius.is_some()),
                    ("a", cfg.a.is_some()),
                    ("b", cfg.b.is_some()),
                ],
            )?;
            let lo = cfg
                .lo
                .clone()
                .ok_or_else(|| CliError::Config("[set] box requires `lo`".into()))?;
            let hi = cfg
                .hi
                .clone()
                .ok_or_else(|| CliError::Config("[set] box requires `hi`".into()))?;
            ConvexSet::box_set(DVector::from_vec(lo), DVector::from_vec(hi)).map_err(err)
        }
        "halfspace" | "hyperplane" => {
            reject_extraneous(
                "set",
                cfg.kind.as_str(),
                &[
                    ("center", cfg.center.is_some()),
                    ("radius", cfg.radius.is_some()),
                    ("lo", cfg.lo.is_some()),
                    ("hi", cfg.hi.is_some()),
                ],
            )?;
            let a = cfg
                .a
                .clone()
                .ok_or_else(|| CliError::Config(format!("[set] {} requires `a`", cfg.kind)))?;
            let b = cfg
                .b
                .ok_or_else(|| CliError::Config(format!("[set] {} requires `b`", cfg.kind)))?;
            let a = DVector::from_vec(a);
            if cfg.kind == "halfspace" {
                ConvexSet::halfspace(a, b).map_err(err)
            } else {
                ConvexSet::hyperplane(a, b).map_err(err)
            }
        }
        other => Err(CliError::Config(format!(
            "[set] unknown kind \"{other}\" (expected whole-space, ball, box, halfspace, \
             or hyperplane)"
        ))),
    }
}

pub fn build_multiplier(cfg: &MultiplierCfg) -> Result<MultiplierSpec<f64>, CliError> {
    match cfg.kind.as_str() {
        "static-sector" => {
            reject_extraneous(
                "multiplier",
                "static-sector",
                &[("rho_weight", cfg.rho_weight.is_some())],
            )?;
            Ok(MultiplierSpec::StaticSector)
        }
        "weighted-off-by-one" => Ok(MultiplierSpec::WeightedOffByOne {
            rho_weight: cfg.rho_weight.unwrap_or(1.0),
        }),
        other => Err(CliError::Config(format!(
            "[multiplier] unknown kind \"{other}\" (expected static-sector or \
             weighted-off-by-one)"
        ))),
    }
}

/// Resolves the sector constants for the named algorithm: explicit
/// `[algorithm] m`/`l` win; otherwise the objective supplies them.
pub fn resolve_sector(
    alg: &AlgorithmCfg,
    obj: Option<&QuadraticObjective<f64>>,
) -> Result<(f64, f64), CliError> {
    match (alg.m, alg.l) {
        (Some(m), Some(l)) => Ok((m, l)),
        (None, None) => match obj {
            Some(o) => Ok(o.sector_constants()),
            None => Err(CliError::Config(
                "[algorithm] m and l are required when no objective is given".into(),
            )),
        },
        _ => Err(CliError::Config(
            "[algorithm] m and l must be given together".into(),
        )),
    }
}

pub fn build_form(alg: &AlgorithmCfg, m: f64, l: f64) -> Result<OutputForm<f64>, CliError> {
    let err = |e: iqcert::Error| CliError::Config(format!("[algorithm] {e}"));
    match alg.name.as_str() {
        "gradient-descent" => gradient_descent(m, l).map_err(err),
        "nesterov" => nesterov(m, l).map_err(err),
        "triple-momentum" => triple_momentum(m, l).map_err(err),
        "heavy-ball" => heavy_ball(m, l).map_err(err),
        "custom" => {
            let a = alg.a.as_ref().ok_or_else(|| {
                CliError::Config("[algorithm] custom requires matrices `a`, `b`, `c`".into())
            })?;
            let b = alg.b.as_ref().ok_or_else(|| {
                CliError::Config("[algorithm] custom requires `b`".into())
            })?;
            let c = alg.c.as_ref().ok_or_else(|| {
                CliError::Config("[algorithm] custom requires `c`".into())
            })?;
            let a = rows_to_matrix("algorithm.a", a)?;
            let c_mat = DMatrix::from_row_slice(1, c.len(), c);
            let sys = ReducedSystem::new(a, DVector::from_vec(b.clone()), c_mat, alg.d.unwrap_or(0.0))
                .map_err(err)?;
            to_output_form(&sys).map_err(err)
        }
        other => Err(CliError::Config(format!(
            "[algorithm] unknown name \"{other}\" (expected gradient-descent, nesterov, \
             triple-momentum, heavy-ball, or custom)"
        ))),
    }
}

fn rows_to_matrix(label: &str, rows: &[Vec<f64>]) -> Result<DMatrix<f64>, CliError> {
    let nrows = rows.len();
    if nrows == 0 {
        return Err(CliError::Config(format!("{label} must have at least one row")));
    }
    let ncols = rows[0].len();
    if rows.iter().any(|r| r.len() != ncols) {
        return Err(CliError::Config(format!("{label} rows have inconsistent lengths")));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |i, j| rows[i][j]))
}
