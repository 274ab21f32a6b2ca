//! Structured text configuration: strict TOML with a small expression
//! grammar for the data functions.
//!
//! Unknown keys are rejected. Data functions (`diffusion`, `y0`, `y_q`,
//! `u_a`, `u_b`) are either expressions in the variables listed in
//! [`crate::io::expr`] or `file:PATH` references to binary field files,
//! resolved relative to the configuration file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::field::{Field, SpatialField};
use crate::grid::{Grid, MAX_DIM};
use crate::io::expr::{Expr, Var};
use crate::io::field_io;
use crate::nonlin::Nonlinearity;
use crate::optim::{Method, OptimizeOptions};
use crate::problem::ProblemSpec;
use crate::verify::ExperimentId;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub grid: GridSection,
    #[serde(default)]
    pub problem: ProblemSection,
    #[serde(default)]
    pub optimize: OptimizeSection,
    #[serde(default)]
    pub verify: VerifySection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "one")]
    pub dim: usize,
    pub nx: usize,
    pub nt: usize,
    #[serde(default)]
    pub t0: f64,
    #[serde(default = "one_f")]
    pub t1: f64,
    /// Per-axis [lo, hi]; defaults to the unit box.
    #[serde(default)]
    pub domain: Option<Vec<[f64; 2]>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemSection {
    #[serde(default = "default_diffusion")]
    pub diffusion: String,
    #[serde(default = "default_nonlinearity")]
    pub nonlinearity: String,
    /// Slope for the `linear` nonlinearity.
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default = "default_y0")]
    pub y0: String,
    #[serde(default = "default_yq")]
    pub y_q: String,
    #[serde(default = "default_ua")]
    pub u_a: String,
    #[serde(default = "default_ub")]
    pub u_b: String,
}

impl Default for ProblemSection {
    fn default() -> Self {
        ProblemSection {
            diffusion: default_diffusion(),
            nonlinearity: default_nonlinearity(),
            alpha: None,
            y0: default_y0(),
            y_q: default_yq(),
            u_a: default_ua(),
            u_b: default_ub(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OptimizeSection {
    #[serde(default = "default_method")]
    pub method: String,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub gap_tol: Option<f64>,
    #[serde(default = "default_multistart")]
    pub multistart: usize,
    #[serde(default)]
    pub seed: u64,
}

impl Default for OptimizeSection {
    fn default() -> Self {
        OptimizeSection {
            method: default_method(),
            max_iter: default_max_iter(),
            gap_tol: None,
            multistart: default_multistart(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySection {
    /// Experiment ids (E1..E10 or full names); empty means all.
    #[serde(default)]
    pub experiments: Vec<String>,
    /// Override of the per-experiment default sample count.
    #[serde(default)]
    pub sample_count: Option<usize>,
    /// Perturbation scales, strictly decreasing; default 7 points log-spaced
    /// in [1e-4, 1e-1].
    #[serde(default)]
    pub scales: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
}

fn one() -> usize {
    1
}
fn one_f() -> f64 {
    1.0
}
fn default_diffusion() -> String {
    "0.1".into()
}
fn default_nonlinearity() -> String {
    "sin_plus_id".into()
}
fn default_y0() -> String {
    "sin(pi*x)".into()
}
fn default_yq() -> String {
    "(1-t)*sin(pi*x) + 0.3*sin(2*pi*x)".into()
}
fn default_ua() -> String {
    "-1".into()
}
fn default_ub() -> String {
    "1".into()
}
fn default_method() -> String {
    "conditional_gradient".into()
}
fn default_max_iter() -> usize {
    400
}
fn default_multistart() -> usize {
    5
}

/// Everything a run needs, materialized and validated.
#[derive(Debug, Clone)]
pub struct ParsedConfig {
    pub raw: ConfigFile,
    pub spec: ProblemSpec,
    pub optimize: OptimizeOptions,
    pub experiments: Vec<ExperimentId>,
    pub verify: VerifySection,
    /// Digest of the parsed configuration (canonical JSON of the raw
    /// structure), stable across re-parsing of the same file.
    pub config_hash: String,
}

pub fn parse_config(path: &Path) -> Result<ParsedConfig> {
    let text = std::fs::read_to_string(path)?;
    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    parse_config_str(&text, &base)
}

pub fn parse_config_str(text: &str, base: &Path) -> Result<ParsedConfig> {
    let raw: ConfigFile = toml::from_str(text).map_err(|e| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
            .unwrap_or(0);
        Error::Parse {
            line,
            msg: e.message().to_string(),
        }
    })?;
    materialize(raw, base)
}

fn materialize(raw: ConfigFile, base: &Path) -> Result<ParsedConfig> {
    let g = &raw.grid;
    let mut lo = [0.0; MAX_DIM];
    let mut hi = [1.0; MAX_DIM];
    if let Some(domain) = &g.domain {
        if domain.len() != g.dim {
            return Err(Error::validation(
                "grid.domain",
                format!("{} axes given, dim is {}", domain.len(), g.dim),
            ));
        }
        for (ax, pair) in domain.iter().enumerate() {
            lo[ax] = pair[0];
            hi[ax] = pair[1];
        }
    }
    let grid = Grid::new(g.dim, g.nx, g.nt, lo, hi, g.t0, g.t1)
        .map_err(|e| Error::validation("grid", e.to_string()))?;

    let p = &raw.problem;
    let space_scope: &[Var] = &[Var::X, Var::Y];
    let spacetime_scope: &[Var] = &[Var::T, Var::X, Var::Y];
    let diffusion =
        spatial_from_source(&p.diffusion, "problem.diffusion", grid, base, space_scope)?;
    let y0 = spatial_from_source(&p.y0, "problem.y0", grid, base, space_scope)?;
    let yq = field_from_source(&p.y_q, "problem.y_q", grid, base, spacetime_scope)?;
    let ua = field_from_source(&p.u_a, "problem.u_a", grid, base, spacetime_scope)?;
    let ub = field_from_source(&p.u_b, "problem.u_b", grid, base, spacetime_scope)?;

    let nonlinearity = match p.nonlinearity.as_str() {
        "zero" => Nonlinearity::Zero,
        "linear" => {
            let alpha = p.alpha.ok_or_else(|| {
                Error::validation("problem.alpha", "required for the linear nonlinearity")
            })?;
            Nonlinearity::linear(alpha)
                .map_err(|e| Error::validation("problem.alpha", e.to_string()))?
        }
        "sin_plus_id" => Nonlinearity::SinePlusIdentity,
        other => {
            return Err(Error::validation(
                "problem.nonlinearity",
                format!("unknown kind `{other}` (zero | linear | sin_plus_id)"),
            ))
        }
    };

    let spec = ProblemSpec::new(grid, diffusion, nonlinearity, y0, yq, ua, ub)?;

    let o = &raw.optimize;
    let method = match o.method.as_str() {
        "conditional_gradient" => Method::ConditionalGradient,
        "projected_gradient" => Method::ProjectedGradient,
        other => {
            return Err(Error::validation(
                "optimize.method",
                format!("unknown method `{other}`"),
            ))
        }
    };
    let optimize = OptimizeOptions {
        method,
        max_iter: o.max_iter,
        gap_tol: o.gap_tol,
        multistart: o.multistart,
        seed: o.seed,
        ..OptimizeOptions::default()
    };

    let experiments = if raw.verify.experiments.is_empty() {
        crate::verify::ALL_EXPERIMENTS.to_vec()
    } else {
        raw.verify
            .experiments
            .iter()
            .map(|s| ExperimentId::parse(s))
            .collect::<Result<_>>()?
    };
    if let Some(scales) = &raw.verify.scales {
        let decreasing = scales.windows(2).all(|w| w[0] > w[1]) && scales.iter().all(|s| *s > 0.0);
        if !decreasing {
            return Err(Error::validation(
                "verify.scales",
                "must be strictly decreasing and positive",
            ));
        }
    }

    let config_hash = {
        let canonical = serde_json::to_vec(&raw).expect("config serializes");
        let mut hasher = Sha256::new();
        hasher.update(&canonical);
        hasher
            .finalize()
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect::<String>()
    };

    Ok(ParsedConfig {
        verify: raw.verify.clone(),
        raw,
        spec,
        optimize,
        experiments,
        config_hash,
    })
}

fn spatial_from_source(
    src: &str,
    what: &str,
    grid: Grid,
    base: &Path,
    scope: &[Var],
) -> Result<SpatialField> {
    if let Some(path) = src.strip_prefix("file:") {
        let full = resolve(base, path);
        return field_io::load_spatial_field_on(&full, &grid)
            .map_err(|e| Error::validation(what, e.to_string()));
    }
    let expr = Expr::parse(src, scope).map_err(|e| Error::validation(what, e.to_string()))?;
    SpatialField::from_fn(grid, |x, y| expr.eval(0.0, x, y))
        .map_err(|e| Error::validation(what, e.to_string()))
}

fn field_from_source(
    src: &str,
    what: &str,
    grid: Grid,
    base: &Path,
    scope: &[Var],
) -> Result<Field> {
    if let Some(path) = src.strip_prefix("file:") {
        let full = resolve(base, path);
        return field_io::load_field_on(&full, &grid)
            .map_err(|e| Error::validation(what, e.to_string()));
    }
    let expr = Expr::parse(src, scope).map_err(|e| Error::validation(what, e.to_string()))?;
    Field::from_fn(grid, |t, x, y| expr.eval(t, x, y))
        .map_err(|e| Error::validation(what, e.to_string()))
}

fn resolve(base: &Path, path: &str) -> PathBuf {
    let p = Path::new(path);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Persist a materialized problem: binary field files plus a config that
/// references them. Re-parsing reproduces the fields bit-identically.
pub fn save_problem(parsed: &ParsedConfig, dir: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(dir)?;
    let spec = &parsed.spec;
    field_io::save_spatial_field(&spec.diffusion, &dir.join("diffusion.pvlf"))?;
    field_io::save_spatial_field(&spec.y0, &dir.join("y0.pvlf"))?;
    field_io::save_field(
        &spec.yq,
        &dir.join("y_q.pvlf"),
        field_io::FieldFormat::Binary,
    )?;
    field_io::save_field(
        &spec.ua,
        &dir.join("u_a.pvlf"),
        field_io::FieldFormat::Binary,
    )?;
    field_io::save_field(
        &spec.ub,
        &dir.join("u_b.pvlf"),
        field_io::FieldFormat::Binary,
    )?;
    let mut raw = parsed.raw.clone();
    raw.problem.diffusion = "file:diffusion.pvlf".into();
    raw.problem.y0 = "file:y0.pvlf".into();
    raw.problem.y_q = "file:y_q.pvlf".into();
    raw.problem.u_a = "file:u_a.pvlf".into();
    raw.problem.u_b = "file:u_b.pvlf".into();
    let text = toml::to_string_pretty(&raw).map_err(|e| Error::Format(e.to_string()))?;
    let path = dir.join("config.toml");
    std::fs::write(&path, text)?;
    Ok(path)
}
