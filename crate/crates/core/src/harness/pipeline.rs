//! Stage runner with a content-addressed cache and a run manifest.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;

use super::config::{Center, ExperimentConfig, Family, MeasureChoice, Stage, WalkModeConfig};
use crate::error::{Error, Result};
use crate::exponents::{
    estimate_alpha_local, estimate_beta_ball, fit_ahlfors, AhlforsOptions, BetaMode, ScalingFit,
};
use crate::geometry::{fmt_f64, BallSpec, MeasureWeights, PointCloud};
use crate::io;
use crate::nets::{build_epsilon_net, build_walk_graph, GraphKind, WalkGraph};
use crate::spectral::{
    bottom_eigenvalue, build_killed_operator, faber_krahn_sweep, green_kernel, spectral_radius_bound,
    Convention, GreenMethod, Which, DENSE_LIMIT,
};
use crate::walks::{
    exit_time_graph, exit_time_measure, exit_time_renormalized, mc_ct_exit_time, mc_exit_time, BetaField,
    WalkSpec, DEFAULT_PATH_CAP,
};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const CACHE_DIR: &str = ".cache";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub stage: String,
    pub cache_key: String,
    pub cached: bool,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config_hash: String,
    pub version: String,
    pub seed: u64,
    pub steps: Vec<StepRecord>,
    pub complete: bool,
    /// `(stage, message)` of the failure that stopped the run.
    pub error: Option<(String, String)>,
}

impl RunManifest {
    pub fn step(&self, stage: Stage) -> Option<&StepRecord> {
        self.steps.iter().find(|s| s.stage == stage.name())
    }

    /// Digests of every output, without timings or cache flags.
    pub fn digests(&self) -> Vec<(String, Vec<FileDigest>)> {
        self.steps.iter().map(|s| (s.stage.clone(), s.outputs.clone())).collect()
    }
}

/// Hash of the config without the fields that do not affect results.
pub fn config_hash(cfg: &ExperimentConfig) -> Result<String> {
    let mut c = cfg.clone();
    c.output_dir = None;
    c.stages.clear();
    let mut text = serde_json::to_string(&c)?;
    text.push_str(env!("CARGO_PKG_VERSION"));
    // Inputs read from disk are part of the content.
    for path in input_files(cfg) {
        text.push_str(&io::file_digest(&path)?);
    }
    Ok(io::sha256_hex(text.as_bytes()))
}

fn input_files(cfg: &ExperimentConfig) -> Vec<PathBuf> {
    let mut v = Vec::new();
    if let Family::File { path } = &cfg.family {
        v.push(path.clone());
    }
    if let MeasureChoice::File { path } = &cfg.measure {
        v.push(path.clone());
    }
    v
}

/// Runs the requested stages in pipeline order into `cfg.output_dir`
/// (default `out`). On failure the partial manifest is still written.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<RunManifest> {
    cfg.validate()?;
    let out = cfg.output_dir.clone().unwrap_or_else(|| PathBuf::from("out"));
    fs::create_dir_all(&out)?;
    let hash = config_hash(cfg)?;
    let mut manifest = RunManifest {
        config_hash: hash.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed: cfg.seed,
        steps: Vec::new(),
        complete: false,
        error: None,
    };
    let mut stages = cfg.stages.clone();
    stages.sort();
    stages.dedup();
    let mut ctx = Context { cfg, out: out.clone(), cloud: None, mu: None, graph: None };
    for stage in stages {
        let t0 = Instant::now();
        let key = io::sha256_hex(format!("{hash}:{}", stage.name()).as_bytes());
        let result = run_cached(&mut ctx, stage, &key);
        match result {
            Ok((outputs, cached)) => {
                let inputs = stage_inputs(&out, stage)?;
                let outputs = digests(&out, &outputs)?;
                manifest.steps.push(StepRecord {
                    stage: stage.name().to_string(),
                    cache_key: key,
                    cached,
                    inputs,
                    outputs,
                    seconds: t0.elapsed().as_secs_f64(),
                });
            }
            Err(e) => {
                manifest.error = Some((stage.name().to_string(), e.to_string()));
                io::write_json(&out.join(MANIFEST_FILE), &manifest)?;
                return Err(Error::Stage { stage: stage.name().to_string(), source: Box::new(e) });
            }
        }
    }
    manifest.complete = true;
    io::write_json(&out.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

fn digests(dir: &Path, files: &[String]) -> Result<Vec<FileDigest>> {
    files
        .iter()
        .map(|f| Ok(FileDigest { file: f.clone(), sha256: io::file_digest(&dir.join(f))? }))
        .collect()
}

fn stage_inputs(out: &Path, stage: Stage) -> Result<Vec<FileDigest>> {
    if stage == Stage::Generate {
        return Ok(Vec::new());
    }
    let files: Vec<String> = ["cloud.csv", "weights.csv"]
        .into_iter()
        .filter(|f| out.join(f).exists())
        .map(String::from)
        .collect();
    digests(out, &files)
}

/// Serves a stage from the cache when every file is present, otherwise
/// computes it and stores a copy.
fn run_cached(ctx: &mut Context<'_>, stage: Stage, key: &str) -> Result<(Vec<String>, bool)> {
    let entry = ctx.out.join(CACHE_DIR).join(key);
    let index = entry.join("files.json");
    if let Ok(text) = fs::read_to_string(&index) {
        let files: Vec<String> = serde_json::from_str(&text)?;
        if files.iter().all(|f| entry.join(f).is_file()) {
            for f in &files {
                let bytes = fs::read(entry.join(f))?;
                io::write_atomic(&ctx.out.join(f), |w| {
                    std::io::Write::write_all(w, &bytes)?;
                    Ok(())
                })?;
            }
            log::info!("stage {} served from cache", stage.name());
            return Ok((files, true));
        }
    }
    let files = ctx.run(stage)?;
    store(&ctx.out, &entry, &files)?;
    Ok((files, false))
}

fn store(out: &Path, entry: &Path, files: &[String]) -> Result<()> {
    let parent = entry.parent().expect("cache entries live under the cache directory");
    fs::create_dir_all(parent)?;
    let tmp = parent.join(format!(
        "{}.tmp{}",
        entry.file_name().and_then(|s| s.to_str()).unwrap_or("entry"),
        std::process::id()
    ));
    if tmp.exists() {
        fs::remove_dir_all(&tmp)?;
    }
    fs::create_dir_all(&tmp)?;
    for f in files {
        fs::copy(out.join(f), tmp.join(f))?;
    }
    io::write_json(&tmp.join("files.json"), &files)?;
    if entry.exists() {
        fs::remove_dir_all(entry)?;
    }
    fs::rename(&tmp, entry)?;
    Ok(())
}

struct Context<'a> {
    cfg: &'a ExperimentConfig,
    out: PathBuf,
    cloud: Option<PointCloud>,
    mu: Option<MeasureWeights>,
    graph: Option<WalkGraph>,
}

impl Context<'_> {
    fn ensure(&mut self) -> Result<()> {
        if self.cloud.is_none() {
            let cloud = self.cfg.family.generate()?;
            self.mu = Some(self.cfg.weights(&cloud)?);
            self.cloud = Some(cloud);
        }
        Ok(())
    }

    fn data(&self) -> (&PointCloud, &MeasureWeights) {
        (self.cloud.as_ref().expect("loaded"), self.mu.as_ref().expect("loaded"))
    }

    fn ball(&mut self) -> Result<BallSpec> {
        let b = self.cfg.ball.clone().expect("validated");
        self.ensure()?;
        let (cloud, _) = self.data();
        BallSpec::new(b.center.resolve(cloud)?, b.radius, b.closed)
    }

    fn centers(&mut self, list: &[Center]) -> Result<Vec<usize>> {
        self.ensure()?;
        let (cloud, _) = self.data();
        list.iter().map(|c| c.resolve(cloud)).collect()
    }

    fn graph(&mut self) -> Result<&WalkGraph> {
        self.ensure()?;
        if self.graph.is_none() {
            let n = self.cfg.net.clone().expect("validated");
            self.ensure()?;
        let (cloud, _) = self.data();
            let net = build_epsilon_net(cloud, n.epsilon, n.seed_index)?;
            let g = build_walk_graph(cloud, &net, n.graph)?;
            self.graph = Some(g);
        }
        Ok(self.graph.as_ref().expect("built"))
    }

    fn run(&mut self, stage: Stage) -> Result<Vec<String>> {
        match stage {
            Stage::Generate => self.generate(),
            Stage::Net => self.net(),
            Stage::ExitTimes => self.exit_times(),
            Stage::Alpha => self.alpha(),
            Stage::Beta => self.beta(),
            Stage::Ahlfors => self.ahlfors(),
            Stage::Spectral => self.spectral(),
            Stage::FaberKrahn => self.faber_krahn(),
        }
    }

    /// Writes a stage summary, tagged with the sample it was computed on.
    fn json(&self, name: &str, value: &serde_json::Value) -> Result<String> {
        let mut value = value.clone();
        if let (Some(cloud), Some(obj)) = (&self.cloud, value.as_object_mut()) {
            obj.insert(
                "sample".into(),
                json!({ "points": cloud.len(), "dim": cloud.dim(), "resolution": cloud.resolution() }),
            );
        }
        io::write_json(&self.out.join(name), &value)?;
        Ok(name.to_string())
    }

    fn generate(&mut self) -> Result<Vec<String>> {
        let out = self.out.clone();
        self.ensure()?;
        let (cloud, mu) = self.data();
        io::write_atomic(&out.join("cloud.csv"), |w| cloud.write_csv(w))?;
        let rows: Vec<Vec<String>> =
            mu.weights().iter().enumerate().map(|(i, w)| vec![i.to_string(), fmt_f64(*w)]).collect();
        io::write_rows(&out.join("weights.csv"), &["index", "weight"], &rows)?;
        Ok(vec!["cloud.csv".into(), "weights.csv".into()])
    }

    fn net(&mut self) -> Result<Vec<String>> {
        let out = self.out.clone();
        let g = self.graph()?;
        g.save_csv(&out, "net")?;
        Ok(vec!["net_edges.csv".into(), "net_members.csv".into(), "net_meta.csv".into()])
    }

    fn exit_times(&mut self) -> Result<Vec<String>> {
        let e = self.cfg.exit_times.clone().expect("validated");
        let opts = self.cfg.solver;
        let seed = self.cfg.seed;
        let ball = self.ball()?;
        let (field, mc) = match e.mode {
            WalkModeConfig::Graph => {
                self.graph()?;
                self.ensure()?;
        let (cloud, _) = self.data();
                let g = self.graph.as_ref().expect("built");
                let field = exit_time_graph(g, cloud, &ball, &opts)?;
                let start = g.net.net_indices[g.net.cover_of[ball.center_index]];
                let mc = if e.mc_paths > 0 {
                    Some(mc_exit_time(cloud, WalkSpec::Graph(g), &ball, start, e.mc_paths, seed, DEFAULT_PATH_CAP)?)
                } else {
                    None
                };
                let v = start_value(&field, start);
                (field, mc.map(|m| (m, v)))
            }
            WalkModeConfig::Measure => {
                let r = e.r.expect("validated");
                self.ensure()?;
        let (cloud, mu) = self.data();
                let c = ball.center_index;
                match e.beta {
                    Some(b) => {
                        let beta = BetaField::constant(cloud.len(), b)?;
                        let field = exit_time_renormalized(cloud, mu, r, &ball, &beta, &opts)?;
                        let mc = if e.mc_paths > 0 {
                            Some(mc_ct_exit_time(cloud, mu, r, &ball, &beta, c, e.mc_paths, seed)?)
                        } else {
                            None
                        };
                        (field.clone(), mc.map(|m| (m, start_value(&field, c))))
                    }
                    None => {
                        let field = exit_time_measure(cloud, mu, r, &ball, &opts)?;
                        let mc = if e.mc_paths > 0 {
                            Some(mc_exit_time(
                                cloud,
                                WalkSpec::Measure { mu, r },
                                &ball,
                                c,
                                e.mc_paths,
                                seed,
                                DEFAULT_PATH_CAP,
                            )?)
                        } else {
                            None
                        };
                        (field.clone(), mc.map(|m| (m, start_value(&field, c))))
                    }
                }
            }
        };
        field.save_csv(&self.out.join("exit_times.csv"))?;
        let summary = json!({
            "ball": field.ball,
            "scale": field.scale,
            "mode": field.mode,
            "renormalized": field.renormalized,
            "sup_value": field.sup_value,
            "center_value": field.value_at(ball.center_index),
            "solver_residual": field.solver_residual,
            "iterations": field.iterations,
            "monte_carlo": mc.map(|(m, v)| json!({
                "estimate": m,
                "solved_value": v,
                "within_ci95": m.covers(v),
            })),
        });
        Ok(vec!["exit_times.csv".into(), self.json("exit_times.json", &summary)?])
    }

    fn alpha(&mut self) -> Result<Vec<String>> {
        let a = self.cfg.alpha.clone().expect("validated");
        let points = self.centers(&a.points)?;
        let grid = a.grid.values();
        self.ensure()?;
        let (cloud, mu) = self.data();
        let analytic = self.cfg.family.analytic_alpha(cloud);
        let fits = points
            .iter()
            .map(|&x| estimate_alpha_local(cloud, mu, x, &grid))
            .collect::<Result<Vec<ScalingFit>>>()?;
        let rows: Vec<Vec<String>> = points
            .iter()
            .zip(&fits)
            .map(|(&x, f)| {
                vec![
                    x.to_string(),
                    fmt_f64(cloud.params()[x]),
                    fmt_f64(f.exponent),
                    analytic.as_ref().map(|v| fmt_f64(v[x])).unwrap_or_default(),
                    fmt_f64(f.r_squared),
                ]
            })
            .collect();
        io::write_rows(&self.out.join("alpha.csv"), &["index", "param", "alpha", "analytic", "r_squared"], &rows)?;
        let name = self.json("alpha.json", &json!({ "points": points, "fits": fits }))?;
        Ok(vec!["alpha.csv".into(), name])
    }

    fn beta(&mut self) -> Result<Vec<String>> {
        let b = self.cfg.beta.clone().expect("validated");
        let opts = self.cfg.solver;
        let ball = self.ball()?;
        self.ensure()?;
        let (cloud, mu) = self.data();
        let mode = match b.mode {
            WalkModeConfig::Graph => {
                let net = self.cfg.net.as_ref();
                let kind = net.map(|n| n.graph).unwrap_or(GraphKind::Covering { eta: 1.0 });
                let seeds = if b.seeds.is_empty() { vec![net.expect("validated").seed_index] } else { b.seeds };
                BetaMode::Graph { kind, seeds }
            }
            WalkModeConfig::Measure => BetaMode::Measure { weights: mu.clone() },
        };
        let fit = estimate_beta_ball(cloud, &ball, &mode, &b.grid.values(), b.envelope, &opts)?;
        let rows: Vec<Vec<String>> =
            fit.scales.iter().zip(&fit.sup_values).map(|(s, v)| vec![fmt_f64(*s), fmt_f64(*v)]).collect();
        io::write_rows(&self.out.join("beta.csv"), &["scale", "sup_exit_time"], &rows)?;
        let name = self.json("beta.json", &json!({ "ball": ball, "fit": fit }))?;
        Ok(vec!["beta.csv".into(), name])
    }

    fn ahlfors(&mut self) -> Result<Vec<String>> {
        let a = self.cfg.ahlfors.clone().expect("validated");
        let points = self.centers(&a.points)?;
        self.ensure()?;
        let (cloud, mu) = self.data();
        let opts = AhlforsOptions { threshold: a.threshold, ..AhlforsOptions::default() };
        let report = fit_ahlfors(cloud, mu, (a.r_min, a.r_max), &points, &opts)?;
        let name = self.json("ahlfors.json", &serde_json::to_value(&report)?)?;
        Ok(vec![name])
    }

    fn spectral(&mut self) -> Result<Vec<String>> {
        let s = self.cfg.spectral.clone().expect("validated");
        let opts = self.cfg.solver;
        let ball = self.ball()?;
        self.ensure()?;
        let (cloud, mu) = self.data();
        let beta = BetaField::constant(cloud.len(), s.beta)?;
        let op = build_killed_operator(cloud, mu, s.r, &ball, &beta)?;
        let radius = spectral_radius_bound(&op)?;
        let report = bottom_eigenvalue(&op, s.which)?;
        let renormalized = s.which == Which::ScriptL;
        let exit = op.exit_times(renormalized, &opts)?;
        let sup = exit.iter().copied().fold(0.0, f64::max);
        let green = if op.len() <= DENSE_LIMIT {
            let conv = if renormalized { Convention::NuR } else { Convention::MuR };
            let g = green_kernel(&op, conv, GreenMethod::Auto)?;
            let measure = if renormalized { &op.nu_r } else { &op.mu_r };
            let integral = g.integrate(measure);
            let err = integral.iter().zip(&exit).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            Some(json!({
                "asymmetry": g.asymmetry(),
                "min_entry": g.min_entry(),
                "integral_error": err / sup.max(f64::MIN_POSITIVE),
            }))
        } else {
            None
        };
        let rows: Vec<Vec<String>> = op
            .inside()
            .iter()
            .zip(&report.eigvec)
            .map(|(i, v)| vec![i.to_string(), fmt_f64(*v)])
            .collect();
        io::write_rows(&self.out.join("eigenvector.csv"), &["state_index", "value"], &rows)?;
        let summary = json!({
            "ball": ball,
            "r": s.r,
            "which": s.which,
            "states": op.len(),
            "connected": op.connected,
            "spectral_radius": radius,
            "lambda_1": report.lambda_1,
            "eigen_residual": report.residual,
            "sup_exit_time": sup,
            "lambda_times_sup": report.lambda_1 * sup,
            "green": green,
        });
        let name = self.json("spectral.json", &summary)?;
        Ok(vec!["eigenvector.csv".into(), name])
    }

    fn faber_krahn(&mut self) -> Result<Vec<String>> {
        let f = self.cfg.faber_krahn.clone().expect("validated");
        let ball = self.ball()?;
        self.ensure()?;
        let (cloud, mu) = self.data();
        let beta = BetaField::constant(cloud.len(), f.beta)?;
        let sweep = faber_krahn_sweep(cloud, mu, &beta, ball.center_index, &f.radii, f.r)?;
        let rows: Vec<Vec<String>> = sweep
            .rows
            .iter()
            .map(|r| vec![fmt_f64(r.radius), fmt_f64(r.lambda1), fmt_f64(r.product)])
            .collect();
        io::write_rows(&self.out.join("faber_krahn.csv"), &["R", "lambda1", "product"], &rows)?;
        let name = self.json("faber_krahn.json", &serde_json::to_value(&sweep)?)?;
        Ok(vec!["faber_krahn.csv".into(), name])
    }
}

fn start_value(field: &crate::walks::ExitTimeField, start: usize) -> f64 {
    field.value_at(start).unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(dir: &Path) -> ExperimentConfig {
        let mut cfg = ExperimentConfig::new(
            Family::Interval { resolution: 101, half_width: 1.0 },
            vec![Stage::Generate, Stage::ExitTimes],
        );
        cfg.output_dir = Some(dir.to_path_buf());
        cfg.ball = Some(super::super::config::BallConfig {
            center: Center::Param(0.5),
            radius: 0.5,
            closed: true,
        });
        cfg.exit_times = Some(super::super::config::ExitConfig {
            mode: WalkModeConfig::Measure,
            r: Some(0.1),
            beta: None,
            mc_paths: 0,
        });
        cfg
    }

    #[test]
    fn second_run_is_served_from_cache() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(dir.path());
        let first = run_pipeline(&cfg).unwrap();
        assert!(first.steps.iter().all(|s| !s.cached));
        let second = run_pipeline(&cfg).unwrap();
        assert!(second.steps.iter().all(|s| s.cached));
        assert_eq!(first.digests(), second.digests());
        assert_eq!(first.config_hash, second.config_hash);
    }

    #[test]
    fn failure_names_the_stage_and_keeps_a_partial_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = config(dir.path());
        cfg.ball.as_mut().unwrap().radius = 10.0;
        let err = run_pipeline(&cfg).unwrap_err();
        assert!(matches!(&err, Error::Stage { stage, .. } if stage == "exit-times"));
        assert!(err.is_numerical());
        let text = fs::read_to_string(dir.path().join(MANIFEST_FILE)).unwrap();
        let m: RunManifest = serde_json::from_str(&text).unwrap();
        assert!(!m.complete);
        assert_eq!(m.steps.len(), 1);
        assert_eq!(m.error.unwrap().0, "exit-times");
    }
}
