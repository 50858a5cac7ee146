use std::path::PathBuf;

use platenet::config::RunConfig;
use platenet::runner::{match_oracle, match_reference};

fn bundled() -> Vec<(String, RunConfig)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut out: Vec<(String, RunConfig)> = std::fs::read_dir(&dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .map(|p| {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            let cfg = RunConfig::load(&p).unwrap_or_else(|e| panic!("{name}: {e}"));
            (name, cfg)
        })
        .collect();
    out.sort_by(|a, b| a.0.cmp(&b.0));
    out
}

#[test]
fn every_bundled_config_is_valid() {
    let all = bundled();
    assert_eq!(all.len(), 11);
    for (name, cfg) in &all {
        assert!(cfg.output_dir.is_some(), "{name}");
        assert!(!cfg.seeds.is_empty(), "{name}");
    }
}

#[test]
fn bundled_configs_have_comparisons() {
    for (name, cfg) in bundled() {
        match name.split('_').next().unwrap() {
            "bend" => assert!(match_oracle(&cfg).is_some(), "{name}"),
            "vibrate" | "buckle" => assert!(match_reference(&cfg).is_some(), "{name}"),
            _ => {}
        }
    }
}
