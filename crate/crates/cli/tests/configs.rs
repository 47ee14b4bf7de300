use std::path::PathBuf;

use morphic_cli::ScenarioConfig;

fn config_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn shipped_configs_load_and_validate() {
    let mut seen = 0;
    for entry in std::fs::read_dir(config_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            let cfg = ScenarioConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            cfg.validate().unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen >= 7);
}

#[test]
fn cheap_shipped_configs_pass() {
    for name in ["energy.toml", "fisher_tabulated.toml", "qpotential.toml", "relativistic_metric.toml"] {
        let cfg = ScenarioConfig::load(&config_dir().join(name)).unwrap();
        let out = tempfile::tempdir().unwrap();
        let report = morphic_cli::run_scenario(&cfg, out.path()).unwrap();
        assert!(report.all_passed(), "{name}");
    }
}
