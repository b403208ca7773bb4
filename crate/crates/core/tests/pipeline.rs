use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use walkdim_core::harness::{run_pipeline, ExperimentConfig, Stage};
use walkdim_core::Error;

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

/// Every output file except the manifest, which carries timings.
fn outputs(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.is_file() && p.file_name().unwrap() != "manifest.json")
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect()
}

fn small_interval(out: &Path) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::load(&example("interval.toml")).unwrap();
    cfg.family = walkdim_core::harness::Family::Interval { resolution: 601, half_width: 1.5 };
    cfg.output_dir = Some(out.to_path_buf());
    cfg
}

#[test]
fn example_configs_parse_validate_and_round_trip() {
    for name in ["koch.toml", "interval.toml"] {
        let cfg = ExperimentConfig::load(&example(name)).unwrap();
        cfg.validate().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap(), cfg, "{name}");
    }
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
    let ma = one.install(|| run_pipeline(&small_interval(a.path()))).unwrap();
    let mb = four.install(|| run_pipeline(&small_interval(b.path()))).unwrap();
    assert!(ma.complete && mb.complete);
    assert_eq!(ma.config_hash, mb.config_hash);
    assert_eq!(ma.digests(), mb.digests());
    let (oa, ob) = (outputs(a.path()), outputs(b.path()));
    assert!(oa.contains_key("spectral.json") && oa.contains_key("faber_krahn.csv"));
    assert_eq!(oa, ob);
}

#[test]
fn cache_restores_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_interval(dir.path());
    let first = run_pipeline(&cfg).unwrap();
    let before = outputs(dir.path());
    for name in before.keys() {
        fs::remove_file(dir.path().join(name)).unwrap();
    }
    let second = run_pipeline(&cfg).unwrap();
    assert!(second.steps.iter().all(|s| s.cached));
    assert_eq!(first.digests(), second.digests());
    assert_eq!(outputs(dir.path()), before);
}

#[test]
fn changing_the_config_misses_the_cache() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small_interval(dir.path());
    cfg.stages = vec![Stage::Generate, Stage::ExitTimes];
    let first = run_pipeline(&cfg).unwrap();
    cfg.ball.as_mut().unwrap().radius = 0.8;
    let second = run_pipeline(&cfg).unwrap();
    assert_ne!(first.config_hash, second.config_hash);
    assert!(second.steps.iter().all(|s| !s.cached));
}

#[test]
fn malformed_configs_are_validation_errors() {
    let text = fs::read_to_string(example("interval.toml")).unwrap();
    let cases = [
        text.replace("version = 1", "version = 99"),
        text.replace("radius = 1.0", "radius = -1.0"),
        text.replace("[ball]", "[ball]\nshape = \"round\""),
        text.replace("resolution = 2001", "resolution = \"many\""),
    ];
    for case in cases {
        let err = ExperimentConfig::from_toml(&case).and_then(|c| c.validate().map(|_| c));
        let err = match err {
            Err(e) => e,
            Ok(cfg) => {
                let dir = tempfile::tempdir().unwrap();
                let mut cfg = cfg;
                cfg.output_dir = Some(dir.path().to_path_buf());
                run_pipeline(&cfg).unwrap_err()
            }
        };
        assert!(!err.is_numerical(), "{err}");
    }
    assert!(matches!(ExperimentConfig::load(&example("missing.toml")), Err(Error::Io(_))));
}
