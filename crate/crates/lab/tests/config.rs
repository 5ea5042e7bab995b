use gavg_core::{Epsilon, Spatial, StateFactor, Steps, Temporal};
use gavg_lab::{presets, ExperimentConfig, LabError};

const MINIMAL: &str = r#"{
  "problem": {
    "horizon": 1.0,
    "epsilon": "averaged",
    "b": [{"weight": 1, "time": {"kind": "sin", "omega": 1, "phase": 0}, "space": {"kind": "tanh", "k": [1.0]}}],
    "sigma": [{"weight": 1}],
    "f": [{"weight": 0.5, "state": {"kind": "z", "index": 0}}],
    "phi": [{"weight": 1, "space": {"kind": "monomial", "axis": 0, "degree": 2}}],
    "obstacle": [{"weight": -1}],
    "lipschitz": 1, "growth_m": 1, "obstacle_cap": -1
  },
  "sigma": {"lower": 0.25, "upper": 1.0},
  "grid": {"x_min": -4, "x_max": 4, "nx": 79, "nt": "auto"},
  "epsilons": [0.5, 0.1]
}"#;

#[test]
fn minimal_config_parses_with_defaults() {
    let cfg = ExperimentConfig::from_json(MINIMAL).unwrap();
    assert_eq!(cfg.problem.epsilon, Epsilon::Averaged);
    assert_eq!(cfg.grid.nt, Steps::Auto);
    assert_eq!(cfg.window, 0.6);
    assert_eq!(cfg.fk.tolerance, 2e-2);
    let b = &cfg.problem.b.terms[0];
    assert_eq!(b.time, Temporal::Sin { omega: 1.0, phase: 0.0 });
    assert_eq!(b.space, Spatial::Tanh { k: vec![1.0] });
    assert_eq!(cfg.problem.f.terms[0].state, StateFactor::Z { index: 0 });
    let spec = cfg.spec().unwrap();
    assert_eq!(spec.terminal_at(&[3.0]), 9.0);
}

#[test]
fn fixed_step_count_parses() {
    let cfg = ExperimentConfig::from_json(&MINIMAL.replace("\"auto\"", "320")).unwrap();
    assert_eq!(cfg.grid.nt, Steps::Fixed(320));
}

#[test]
fn bad_configs_are_config_errors() {
    let cases = [
        MINIMAL.replace("[0.5, 0.1]", "[0.1, 0.4]"),
        MINIMAL.replace("[0.5, 0.1]", "[1.5, 0.1]"),
        MINIMAL.replace("\"nx\": 79", "\"nx\": 2"),
        MINIMAL.replace("\"lower\": 0.25", "\"lower\": 2.0"),
        MINIMAL.replace("\"horizon\": 1.0", "\"horizon\": 1.0, \"unknown\": 3"),
        // state factor in the drift
        MINIMAL.replace("\"space\": {\"kind\": \"tanh\", \"k\": [1.0]}}]", "\"state\": {\"kind\": \"y\"}}]"),
    ];
    for text in cases {
        match ExperimentConfig::from_json(&text) {
            Err(e @ LabError::Config(_)) => assert_eq!(e.exit_code(), 2),
            other => panic!("expected a config error, got {other:?}"),
        }
    }
}

#[test]
fn load_accepts_preset_names_and_files() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("heat.json");
    std::fs::write(&path, presets::g_heat().to_json()).unwrap();
    let from_file = ExperimentConfig::load(path.to_str().unwrap()).unwrap();
    assert_eq!(from_file, ExperimentConfig::load("g_heat").unwrap());
    assert!(matches!(ExperimentConfig::load("no_such_preset"), Err(LabError::Config(_))));
}
