//! `walkdim` command-line front end.
//!
//! Exit codes: 0 success, 2 invalid input, 3 numerical failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use walkdim_core::harness::reproduce::Preset;
use walkdim_core::harness::{reproduce_paper, run_pipeline, ExperimentConfig, Family, Stage};
use walkdim_core::Error;

#[derive(Parser, Debug)]
#[command(name = "walkdim", version, about = "Local dimension and walk exponents on fractal samples")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Sample a space; without --config, use the family flags.
    Generate(GenerateArgs),
    /// Build an epsilon-net and its walk graph.
    Net,
    /// Solve the exit-time equation on a ball.
    ExitTimes,
    /// Fit local dimensions.
    Alpha,
    /// Fit the walk exponent of a ball.
    Beta,
    /// Check variable Ahlfors regularity.
    Ahlfors,
    /// Spectral radius, bottom eigenvalue and Green kernel of a ball.
    Spectral,
    /// Bottom eigenvalue against ball radius.
    FaberKrahn,
    /// Run every stage listed in the config.
    Run,
    /// Run the reference experiments and write a pass/fail report.
    ReproducePaper {
        #[arg(long, value_enum, default_value = "all")]
        preset: PresetArg,
    },
}

#[derive(Args, Debug)]
struct GenerateArgs {
    #[arg(long, value_enum)]
    family: Option<FamilyArg>,
    /// Construction stage for self-similar families.
    #[arg(long, default_value_t = 6)]
    stage: u32,
    /// Koch angles in degrees.
    #[arg(long, default_value_t = 5.0)]
    theta1: f64,
    #[arg(long, default_value_t = 80.0)]
    theta2: f64,
    /// Points per axis for Euclidean families.
    #[arg(long, default_value_t = 201)]
    resolution: usize,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum FamilyArg {
    Koch,
    Gasket,
    Carpet,
    Vicsek,
    Interval,
    Disk,
    Square,
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum PresetArg {
    Euclid,
    Koch,
    Gasket,
    Spectral,
    All,
}

impl From<PresetArg> for Preset {
    fn from(p: PresetArg) -> Self {
        match p {
            PresetArg::Euclid => Preset::Euclid,
            PresetArg::Koch => Preset::Koch,
            PresetArg::Gasket => Preset::Gasket,
            PresetArg::Spectral => Preset::Spectral,
            PresetArg::All => Preset::All,
        }
    }
}

fn family_from_flags(a: &GenerateArgs) -> Option<Family> {
    let s = a.stage;
    Some(match a.family? {
        FamilyArg::Koch => Family::Koch { theta1_deg: a.theta1, theta2_deg: a.theta2, stage: s },
        FamilyArg::Gasket => Family::Gasket { r1: 0.5, r2: 0.5, side: 1.0, stage: s },
        FamilyArg::Carpet => Family::Carpet { base: 1.0, height: 1.0, r1: 1.0 / 3.0, r2: 1.0 / 3.0, stage: s },
        FamilyArg::Vicsek => Family::Vicsek { side: 1.0, r1: 1.0 / 3.0, r2: 1.0 / 3.0, stage: s },
        FamilyArg::Interval => Family::Interval { resolution: a.resolution, half_width: 1.0 },
        FamilyArg::Disk => Family::Disk { resolution: a.resolution, half_width: 1.0 },
        FamilyArg::Square => Family::Square { resolution: a.resolution, half_width: 1.0 },
    })
}

fn load_config(common: &Common) -> Result<ExperimentConfig, Error> {
    let path = common
        .config
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("this command needs --config FILE".into()))?;
    ExperimentConfig::load(path)
}

fn apply_overrides(cfg: &mut ExperimentConfig, common: &Common) {
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &common.out {
        cfg.output_dir = Some(out.clone());
    }
}

fn single_stage(common: &Common, stage: Stage) -> Result<(), Error> {
    let mut cfg = load_config(common)?;
    apply_overrides(&mut cfg, common);
    cfg.stages = vec![stage];
    report_manifest(&cfg)
}

fn report_manifest(cfg: &ExperimentConfig) -> Result<(), Error> {
    let manifest = run_pipeline(cfg)?;
    println!("{}", serde_json::to_string_pretty(&manifest)?);
    Ok(())
}

fn execute(cli: Cli) -> Result<ExitCode, Error> {
    let common = cli.common;
    if let Some(n) = common.threads {
        if n == 0 {
            return Err(Error::InvalidParameter("--threads must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    }
    match cli.command {
        Command::Generate(args) => {
            let mut cfg = match (&common.config, family_from_flags(&args)) {
                (Some(_), Some(_)) => {
                    return Err(Error::InvalidParameter("give either --config or --family, not both".into()))
                }
                (Some(_), None) => load_config(&common)?,
                (None, Some(f)) => ExperimentConfig::new(f, vec![Stage::Generate]),
                (None, None) => {
                    return Err(Error::InvalidParameter("generate needs --config FILE or --family".into()))
                }
            };
            apply_overrides(&mut cfg, &common);
            cfg.stages = vec![Stage::Generate];
            report_manifest(&cfg)?;
        }
        Command::Net => single_stage(&common, Stage::Net)?,
        Command::ExitTimes => single_stage(&common, Stage::ExitTimes)?,
        Command::Alpha => single_stage(&common, Stage::Alpha)?,
        Command::Beta => single_stage(&common, Stage::Beta)?,
        Command::Ahlfors => single_stage(&common, Stage::Ahlfors)?,
        Command::Spectral => single_stage(&common, Stage::Spectral)?,
        Command::FaberKrahn => single_stage(&common, Stage::FaberKrahn)?,
        Command::Run => {
            let mut cfg = load_config(&common)?;
            apply_overrides(&mut cfg, &common);
            report_manifest(&cfg)?;
        }
        Command::ReproducePaper { preset } => {
            let out = common.out.clone().unwrap_or_else(|| PathBuf::from("out"));
            std::fs::create_dir_all(&out)?;
            let report = reproduce_paper(preset.into(), common.seed.unwrap_or(0), &out)?;
            for r in &report.rows {
                println!(
                    "{} [{:>2}] {:<16} {:<55} measured {:<24} target {}",
                    if r.pass { "PASS" } else { "FAIL" },
                    r.criterion,
                    r.check,
                    r.quantity,
                    r.measured,
                    r.target
                );
            }
            let failed = report.rows.iter().filter(|r| !r.pass).count();
            println!("{} of {} rows pass; report in {}", report.rows.len() - failed, report.rows.len(), out.display());
            if failed > 0 {
                return Ok(ExitCode::from(3));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(if e.is_numerical() { 3 } else { 2 })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn common_flags_parse_after_the_subcommand() {
        let cli = Cli::try_parse_from(["walkdim", "beta", "--config", "c.toml", "--seed", "4", "--threads", "2"]).unwrap();
        assert!(matches!(cli.command, Command::Beta));
        assert_eq!(cli.common.seed, Some(4));
        assert_eq!(cli.common.threads, Some(2));
    }

    #[test]
    fn family_flags_build_families() {
        let cli = Cli::try_parse_from(["walkdim", "generate", "--family", "gasket", "--stage", "2"]).unwrap();
        let Command::Generate(args) = cli.command else { panic!("not generate") };
        assert_eq!(family_from_flags(&args), Some(Family::Gasket { r1: 0.5, r2: 0.5, side: 1.0, stage: 2 }));
    }
}
