//! Run configuration: a TOML document declaring the dimension, domain,
//! field and command parameters.

use curlfree_core::error::Error as CoreError;
use curlfree_core::fieldspec::{parse_expr, Component, Field, GridField};
use curlfree_core::geometry::{AxisBox, Ball, Domain, Shape, StarDomain};
use curlfree_core::quadrature::QuadratureRule;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dimension: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    pub domain: DomainConfig,
    #[serde(default)]
    pub field: Option<FieldConfig>,
    #[serde(default)]
    pub params: Params,
    #[serde(default)]
    pub output: OutputConfig,
}

fn default_seed() -> u64 {
    42
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainConfig {
    pub kind: String,
    #[serde(default)]
    pub center: Option<Vec<f64>>,
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default)]
    pub min: Option<Vec<f64>>,
    #[serde(default)]
    pub max: Option<Vec<f64>>,
    #[serde(default)]
    pub balls: Option<Vec<BallConfig>>,
    #[serde(default = "default_true")]
    pub simply_connected: bool,
    #[serde(default)]
    pub star_ball: Option<BallConfig>,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallConfig {
    pub center: Vec<f64>,
    pub radius: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    /// Expression per component; mutually exclusive with `grids`.
    #[serde(default)]
    pub components: Option<Vec<String>>,
    /// Path to one CFGR grid file per component.
    #[serde(default)]
    pub grids: Option<Vec<PathBuf>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    pub gauss_order: usize,
    pub inner_order: usize,
    pub angular_order: Option<usize>,
    pub segment_order: Option<usize>,
    pub rho_radius: Option<f64>,
    pub cover_radius: Option<f64>,
    /// Coverage margin for generated covers; coarse by default so the
    /// chart count stays small.
    pub cover_margin: Option<f64>,
    pub curl_tolerance: f64,
    pub overlap_samples: usize,
    pub probe_count: usize,
    pub grid_shape: Vec<usize>,
    /// Output lattice nodes per axis for `potential`.
    pub out_grid_nodes: usize,
    pub lambda_schedule: Vec<f64>,
    pub l_schedule: Vec<u32>,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            gauss_order: 24,
            inner_order: 32,
            angular_order: None,
            segment_order: None,
            rho_radius: None,
            cover_radius: None,
            cover_margin: None,
            curl_tolerance: 1e-6,
            overlap_samples: 64,
            probe_count: 24,
            grid_shape: vec![32, 32],
            out_grid_nodes: 33,
            lambda_schedule: vec![1.25, 1.1, 1.02],
            l_schedule: vec![8, 16, 32],
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub dir: Option<PathBuf>,
    pub csv: bool,
}

/// Config-level failure, with enough location detail for diagnostics.
#[derive(Debug)]
pub enum ConfigError {
    Io(String),
    Toml(String),
    Invalid(String),
    Expr {
        component: usize,
        source: String,
        inner: CoreError,
    },
    Core(CoreError),
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Io(m) => write!(f, "cannot read config: {m}"),
            ConfigError::Toml(m) => write!(f, "config parse error: {m}"),
            ConfigError::Invalid(m) => write!(f, "invalid config: {m}"),
            ConfigError::Expr {
                component,
                source,
                inner,
            } => {
                write!(f, "field component {component} (`{source}`): {inner}")
            }
            ConfigError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for ConfigError {}

impl From<CoreError> for ConfigError {
    fn from(e: CoreError) -> Self {
        ConfigError::Core(e)
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(e.to_string()))?;
        toml::from_str(&text).map_err(|e| ConfigError::Toml(e.to_string()))
    }

    /// The domain as a geometric primitive (or union).
    pub fn domain(&self) -> Result<Domain, ConfigError> {
        let n = self.dimension;
        let d = &self.domain;
        let check_dim = |v: &Vec<f64>, what: &str| -> Result<(), ConfigError> {
            if v.len() != n {
                return Err(ConfigError::Invalid(format!(
                    "{what} has {} coordinates, dimension is {n}",
                    v.len()
                )));
            }
            Ok(())
        };
        match d.kind.as_str() {
            "ball" => {
                let center = d
                    .center
                    .clone()
                    .ok_or_else(|| ConfigError::Invalid("ball domain needs `center`".into()))?;
                check_dim(&center, "domain.center")?;
                let radius = d
                    .radius
                    .ok_or_else(|| ConfigError::Invalid("ball domain needs `radius`".into()))?;
                Ok(Domain::Ball(Ball::new(center, radius)?))
            }
            "box" => {
                let lo = d
                    .min
                    .clone()
                    .ok_or_else(|| ConfigError::Invalid("box domain needs `min`".into()))?;
                let hi = d
                    .max
                    .clone()
                    .ok_or_else(|| ConfigError::Invalid("box domain needs `max`".into()))?;
                check_dim(&lo, "domain.min")?;
                check_dim(&hi, "domain.max")?;
                Ok(Domain::Box(AxisBox::new(lo, hi)?))
            }
            "ball_union" => {
                let balls = d.balls.clone().ok_or_else(|| {
                    ConfigError::Invalid("ball_union domain needs `balls`".into())
                })?;
                if balls.is_empty() {
                    return Err(ConfigError::Invalid(
                        "ball_union needs at least one ball".into(),
                    ));
                }
                let mut out = Vec::with_capacity(balls.len());
                for b in balls {
                    check_dim(&b.center, "domain.balls[].center")?;
                    out.push(Ball::new(b.center, b.radius)?);
                }
                Ok(Domain::BallUnion(out))
            }
            other => Err(ConfigError::Invalid(format!(
                "unknown domain kind `{other}` (expected ball, box or ball_union)"
            ))),
        }
    }

    /// The star-shaped chart (primitive domain plus star ball), required by
    /// the integral-operator commands.
    pub fn star_domain(&self) -> Result<StarDomain, ConfigError> {
        let shape = match self.domain()? {
            Domain::Ball(b) => Shape::Ball(b),
            Domain::Box(b) => Shape::Box(b),
            _ => {
                return Err(ConfigError::Invalid(
                    "this command needs a star-shaped domain (ball or box), not a union".into(),
                ))
            }
        };
        let sb = self.domain.star_ball.clone().ok_or_else(|| {
            ConfigError::Invalid("domain.star_ball is required for star-shaped domains".into())
        })?;
        if sb.center.len() != self.dimension {
            return Err(ConfigError::Invalid(
                "domain.star_ball.center dimension mismatch".into(),
            ));
        }
        let star = Ball::new(sb.center, sb.radius)?;
        Ok(StarDomain::new(shape, star)?)
    }

    /// Loads the configured field; grid components are resolved relative to
    /// the config file's directory.
    pub fn field(&self, config_dir: &Path) -> Result<Option<Field>, ConfigError> {
        let Some(fc) = &self.field else {
            return Ok(None);
        };
        match (&fc.components, &fc.grids) {
            (Some(_), Some(_)) => Err(ConfigError::Invalid(
                "field declares both `components` and `grids`".into(),
            )),
            (None, None) => Err(ConfigError::Invalid(
                "field declares neither `components` nor `grids`".into(),
            )),
            (Some(exprs), None) => {
                let mut comps = Vec::with_capacity(exprs.len());
                for (i, src) in exprs.iter().enumerate() {
                    let ast = parse_expr(src).map_err(|e| ConfigError::Expr {
                        component: i,
                        source: src.clone(),
                        inner: e,
                    })?;
                    comps.push(Component::Analytic(ast));
                }
                Ok(Some(Field::new(self.dimension, comps)?))
            }
            (None, Some(paths)) => {
                let mut comps = Vec::with_capacity(paths.len());
                for p in paths {
                    let full = if p.is_absolute() {
                        p.clone()
                    } else {
                        config_dir.join(p)
                    };
                    comps.push(Component::Grid(GridField::read_file(&full)?));
                }
                Ok(Some(Field::new(self.dimension, comps)?))
            }
        }
    }

    pub fn quadrature(&self) -> Result<QuadratureRule, ConfigError> {
        let mut q = QuadratureRule::new(self.params.gauss_order, self.params.inner_order)?;
        if let Some(a) = self.params.angular_order {
            q = q.with_angular(a);
        }
        if let Some(s) = self.params.segment_order {
            q = q.with_segment(s);
        }
        Ok(q)
    }

    /// Mollifier radius for operator charts: configured, or 0.6 of the star
    /// ball.
    pub fn rho_ball(&self, star: &StarDomain) -> Result<Ball, ConfigError> {
        let r = self
            .params
            .rho_radius
            .unwrap_or(0.6 * star.star_ball.radius);
        Ok(Ball::new(star.star_ball.center.clone(), r)?)
    }
}
