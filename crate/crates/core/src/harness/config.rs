//! Experiment configuration, stored as TOML with a `version` key.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::chain::SolveOptions;
use crate::error::{Error, Result};
use crate::exponents::Envelope;
use crate::fractal::{
    carpet_stage, euclidean_cloud, gasket_stage, koch_alpha, koch_natural_weights, koch_stage,
    vicsek_stage, CarpetParams, EuclideanKind, GasketParams, KochParams, VicsekParams,
};
use crate::geometry::{MeasureWeights, PointCloud};
use crate::nets::GraphKind;
use crate::spectral::Which;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Generate,
    Net,
    ExitTimes,
    Alpha,
    Beta,
    Ahlfors,
    Spectral,
    FaberKrahn,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Generate,
        Stage::Net,
        Stage::ExitTimes,
        Stage::Alpha,
        Stage::Beta,
        Stage::Ahlfors,
        Stage::Spectral,
        Stage::FaberKrahn,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Generate => "generate",
            Stage::Net => "net",
            Stage::ExitTimes => "exit-times",
            Stage::Alpha => "alpha",
            Stage::Beta => "beta",
            Stage::Ahlfors => "ahlfors",
            Stage::Spectral => "spectral",
            Stage::FaberKrahn => "faber-krahn",
        }
    }
}

/// The sample space. Angles are in degrees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum Family {
    Koch { theta1_deg: f64, theta2_deg: f64, stage: u32 },
    Gasket { r1: f64, r2: f64, side: f64, stage: u32 },
    Carpet { base: f64, height: f64, r1: f64, r2: f64, stage: u32 },
    Vicsek { side: f64, r1: f64, r2: f64, stage: u32 },
    Interval { resolution: usize, half_width: f64 },
    Disk { resolution: usize, half_width: f64 },
    Square { resolution: usize, half_width: f64 },
    /// A cloud CSV written by `generate`.
    File { path: PathBuf },
}

impl Family {
    pub fn generate(&self) -> Result<PointCloud> {
        match self {
            Family::Koch { theta1_deg, theta2_deg, stage } => {
                koch_stage(&KochParams::degrees(*theta1_deg, *theta2_deg, *stage)?)
            }
            Family::Gasket { r1, r2, side, stage } => {
                gasket_stage(&GasketParams::new(*r1, *r2, *side, *stage)?)
            }
            Family::Carpet { base, height, r1, r2, stage } => {
                carpet_stage(&CarpetParams::new(*base, *height, *r1, *r2, *stage)?)
            }
            Family::Vicsek { side, r1, r2, stage } => {
                vicsek_stage(&VicsekParams::new(*side, *r1, *r2, *stage)?)
            }
            Family::Interval { resolution, half_width } => {
                euclidean_cloud(EuclideanKind::Interval, *resolution, *half_width)
            }
            Family::Disk { resolution, half_width } => {
                euclidean_cloud(EuclideanKind::Disk, *resolution, *half_width)
            }
            Family::Square { resolution, half_width } => {
                euclidean_cloud(EuclideanKind::Square, *resolution, *half_width)
            }
            Family::File { path } => PointCloud::load_csv(path),
        }
    }

    /// Analytic local dimension, where one is known.
    pub fn analytic_alpha(&self, cloud: &PointCloud) -> Option<Vec<f64>> {
        match self {
            Family::Koch { theta1_deg, theta2_deg, .. } => {
                let (a, b) = (theta1_deg.to_radians(), theta2_deg.to_radians());
                cloud.params().iter().map(|&t| koch_alpha(t, a, b).ok()).collect()
            }
            Family::Interval { .. } => Some(vec![1.0; cloud.len()]),
            Family::Disk { .. } | Family::Square { .. } => Some(vec![2.0; cloud.len()]),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum MeasureChoice {
    #[default]
    Uniform,
    /// Equal mass per stage segment of a Koch curve.
    KochNatural,
    /// Gauge weights from a `delta`-cover; `alpha` overrides the analytic
    /// field of the family when given.
    LocalHausdorff { delta: f64, alpha: Option<f64> },
    /// CSV with columns `index,weight`.
    File { path: PathBuf },
}

/// A ball given by a centre and radius. The centre may be a cloud index, a
/// curve parameter or an ambient position (nearest cloud point).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallConfig {
    pub center: Center,
    pub radius: f64,
    #[serde(default = "yes")]
    pub closed: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Center {
    Index(usize),
    Param(f64),
    Point(Vec<f64>),
}

impl Center {
    pub fn resolve(&self, cloud: &PointCloud) -> Result<usize> {
        match self {
            Center::Index(i) => {
                cloud.check_index(*i)?;
                Ok(*i)
            }
            Center::Param(t) => Ok(cloud.nearest_param(*t)),
            Center::Point(p) => {
                if p.len() != cloud.dim() {
                    return Err(Error::invalid(format!(
                        "centre has {} coordinates, the cloud has dimension {}",
                        p.len(),
                        cloud.dim()
                    )));
                }
                Ok(cloud.nearest_to(p))
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetConfig {
    pub epsilon: f64,
    #[serde(default)]
    pub seed_index: usize,
    #[serde(default)]
    pub graph: GraphKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WalkModeConfig {
    Graph,
    Measure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExitConfig {
    pub mode: WalkModeConfig,
    /// Jump radius of the measure walk (ignored in graph mode).
    #[serde(default)]
    pub r: Option<f64>,
    /// Constant exponent for the renormalised clock; absent means steps.
    #[serde(default)]
    pub beta: Option<f64>,
    /// Monte Carlo paths from the ball centre; zero disables the check.
    #[serde(default)]
    pub mc_paths: usize,
}

/// Geometric grid `start * ratio^k`, `k < count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub start: f64,
    #[serde(default = "default_ratio")]
    pub ratio: f64,
    pub count: usize,
}

fn default_ratio() -> f64 {
    crate::exponents::GRID_RATIO
}

impl GridConfig {
    pub fn values(&self) -> Vec<f64> {
        crate::exponents::geometric_grid(self.start, self.ratio, self.count)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlphaConfig {
    pub points: Vec<Center>,
    pub grid: GridConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BetaConfig {
    pub mode: WalkModeConfig,
    pub grid: GridConfig,
    #[serde(default = "upper")]
    pub envelope: Envelope,
    /// Net seeds (cloud indices) for graph mode.
    #[serde(default)]
    pub seeds: Vec<usize>,
}

fn upper() -> Envelope {
    Envelope::Upper
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AhlforsConfig {
    pub r_min: f64,
    pub r_max: f64,
    pub points: Vec<Center>,
    #[serde(default = "fifty")]
    pub threshold: f64,
}

fn fifty() -> f64 {
    50.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectralConfig {
    pub r: f64,
    /// Constant exponent of the time change.
    pub beta: f64,
    #[serde(default = "script_l")]
    pub which: Which,
}

fn script_l() -> Which {
    Which::ScriptL
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FaberKrahnConfig {
    pub r: f64,
    pub beta: f64,
    pub radii: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub version: u32,
    #[serde(default)]
    pub seed: u64,
    /// Default output directory; the CLI `--out` flag takes precedence.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    pub stages: Vec<Stage>,
    pub family: Family,
    #[serde(default)]
    pub measure: MeasureChoice,
    #[serde(default)]
    pub ball: Option<BallConfig>,
    #[serde(default)]
    pub net: Option<NetConfig>,
    #[serde(default)]
    pub exit_times: Option<ExitConfig>,
    #[serde(default)]
    pub alpha: Option<AlphaConfig>,
    #[serde(default)]
    pub beta: Option<BetaConfig>,
    #[serde(default)]
    pub ahlfors: Option<AhlforsConfig>,
    #[serde(default)]
    pub spectral: Option<SpectralConfig>,
    #[serde(default)]
    pub faber_krahn: Option<FaberKrahnConfig>,
    #[serde(default)]
    pub solver: SolveOptions,
}

impl ExperimentConfig {
    pub fn new(family: Family, stages: Vec<Stage>) -> Self {
        ExperimentConfig {
            version: CONFIG_VERSION,
            seed: 0,
            output_dir: None,
            stages,
            family,
            measure: MeasureChoice::Uniform,
            ball: None,
            net: None,
            exit_times: None,
            alpha: None,
            beta: None,
            ahlfors: None,
            spectral: None,
            faber_krahn: None,
            solver: SolveOptions::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::TomlDe(err) => Error::Format { path: path.to_path_buf(), msg: err.to_string() },
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    /// Checks that every requested stage has the sections it needs.
    pub fn validate(&self) -> Result<()> {
        if self.version != CONFIG_VERSION {
            return Err(Error::invalid(format!(
                "config version {} is not supported (expected {CONFIG_VERSION})",
                self.version
            )));
        }
        if self.stages.is_empty() {
            return Err(Error::invalid("no stages requested"));
        }
        let need = |present: bool, section: &str, stage: Stage| {
            if present {
                Ok(())
            } else {
                Err(Error::invalid(format!("stage `{}` needs a [{section}] section", stage.name())))
            }
        };
        for &s in &self.stages {
            match s {
                Stage::Generate => Ok(()),
                Stage::Net => need(self.net.is_some(), "net", s),
                Stage::ExitTimes => {
                    need(self.ball.is_some(), "ball", s)?;
                    need(self.exit_times.is_some(), "exit_times", s)?;
                    let e = self.exit_times.as_ref().expect("checked");
                    match e.mode {
                        WalkModeConfig::Graph => need(self.net.is_some(), "net", s),
                        WalkModeConfig::Measure if e.r.is_none() => {
                            Err(Error::invalid("measure-mode exit times need `r`"))
                        }
                        WalkModeConfig::Measure => Ok(()),
                    }
                }
                Stage::Alpha => need(self.alpha.is_some(), "alpha", s),
                Stage::Beta => {
                    need(self.ball.is_some(), "ball", s)?;
                    need(self.beta.is_some(), "beta", s)?;
                    let b = self.beta.as_ref().expect("checked");
                    if b.mode == WalkModeConfig::Graph && self.net.is_none() && b.seeds.is_empty() {
                        return Err(Error::invalid("graph-mode beta needs `seeds` or a [net] section"));
                    }
                    Ok(())
                }
                Stage::Ahlfors => need(self.ahlfors.is_some(), "ahlfors", s),
                Stage::Spectral => {
                    need(self.ball.is_some(), "ball", s)?;
                    need(self.spectral.is_some(), "spectral", s)
                }
                Stage::FaberKrahn => {
                    need(self.ball.is_some(), "ball", s)?;
                    need(self.faber_krahn.is_some(), "faber_krahn", s)
                }
            }?;
        }
        Ok(())
    }

    /// Builds the measure chosen in the config.
    pub fn weights(&self, cloud: &PointCloud) -> Result<MeasureWeights> {
        match &self.measure {
            MeasureChoice::Uniform => MeasureWeights::uniform(cloud.len()),
            MeasureChoice::KochNatural => match self.family {
                Family::Koch { stage, .. } => MeasureWeights::for_cloud(cloud, koch_natural_weights(stage)),
                _ => Err(Error::invalid("koch-natural weights need the koch family")),
            },
            MeasureChoice::LocalHausdorff { delta, alpha } => {
                let field = match alpha {
                    Some(a) => vec![*a; cloud.len()],
                    None => self.family.analytic_alpha(cloud).ok_or_else(|| {
                        Error::invalid("this family has no analytic alpha; set `alpha` explicitly")
                    })?,
                };
                crate::exponents::local_hausdorff_weights(cloud, &field, *delta)
            }
            MeasureChoice::File { path } => load_weights(path, cloud),
        }
    }
}

pub fn load_weights(path: &Path, cloud: &PointCloud) -> Result<MeasureWeights> {
    let mut rdr = csv::Reader::from_path(path)?;
    let mut w = vec![f64::NAN; cloud.len()];
    for rec in rdr.records() {
        let rec = rec?;
        let bad = |msg: String| Error::Format { path: path.to_path_buf(), msg };
        let i: usize = rec.get(0).unwrap_or("").trim().parse().map_err(|e| bad(format!("index: {e}")))?;
        let v: f64 = rec.get(1).unwrap_or("").trim().parse().map_err(|e| bad(format!("weight: {e}")))?;
        if i >= w.len() {
            return Err(bad(format!("index {i} beyond the cloud")));
        }
        w[i] = v;
    }
    MeasureWeights::for_cloud(cloud, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
version = 1
seed = 3
stages = ["generate", "net", "exit-times", "beta"]

[family]
kind = "interval"
resolution = 201
half_width = 1.0

[ball]
center = { index = 100 }
radius = 0.5

[net]
epsilon = 0.05
graph = { kind = "proximity", rho = 2.0 }

[exit_times]
mode = "measure"
r = 0.05

[beta]
mode = "measure"
grid = { start = 0.1, count = 4 }
"#;

    #[test]
    fn parses_and_round_trips() {
        let cfg = ExperimentConfig::from_toml(SAMPLE).unwrap();
        assert_eq!(cfg.stages.len(), 4);
        assert_eq!(cfg.net.as_ref().unwrap().graph, GraphKind::Proximity { rho: 2.0 });
        assert_eq!(cfg.beta.as_ref().unwrap().envelope, Envelope::Upper);
        let again = ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn rejects_missing_sections_and_versions() {
        let no_ball = SAMPLE.replace("[ball]\ncenter = { index = 100 }\nradius = 0.5\n", "");
        assert!(matches!(ExperimentConfig::from_toml(&no_ball), Err(Error::InvalidParameter(_))));
        let v2 = SAMPLE.replace("version = 1", "version = 2");
        assert!(ExperimentConfig::from_toml(&v2).is_err());
        let typo = SAMPLE.replace("epsilon = 0.05", "epsilom = 0.05");
        assert!(ExperimentConfig::from_toml(&typo).is_err());
    }

    #[test]
    fn centers_resolve() {
        let cloud = Family::Koch { theta1_deg: 60.0, theta2_deg: 60.0, stage: 2 }.generate().unwrap();
        assert_eq!(Center::Param(1.0).resolve(&cloud).unwrap(), cloud.len() - 1);
        assert_eq!(Center::Point(vec![0.0, 0.0]).resolve(&cloud).unwrap(), 0);
        assert!(Center::Index(999).resolve(&cloud).is_err());
        assert!(Center::Point(vec![0.0]).resolve(&cloud).is_err());
    }
}
