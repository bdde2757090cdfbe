use nullctl_harness::config::{apply_override, ExperimentConfig, NonlinearityKind, PlacementName, Profile};
use serde_json::json;

const SHIPPED: [&str; 11] = [
    "baseline",
    "solve_forward",
    "solve_adjoint",
    "penalty_sweep",
    "semilinear",
    "semilinear_elliptic",
    "eps_sweep",
    "observability",
    "carleman_probe",
    "galerkin_check",
    "acceptance",
];

fn shipped(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(format!("{name}.json"))
}

#[test]
fn empty_object_is_the_baseline() {
    let c = ExperimentConfig::parse("{}", &[]).unwrap();
    assert_eq!(c, ExperimentConfig::default());
    assert_eq!(c.mesh.counts, vec![100]);
    assert_eq!(c.time.steps, 200);
    assert_eq!(c.seed, 42);
    assert_eq!(c.hum.penalty_list.len(), 7);
}

#[test]
fn shipped_configs_parse_and_round_trip() {
    for name in SHIPPED {
        let c = ExperimentConfig::load(&shipped(name), &[]).unwrap();
        let again = ExperimentConfig::parse(&c.canonical_json(), &[]).unwrap();
        assert_eq!(again, c, "{name}");
        assert_eq!(again.hash(), c.hash());
    }
    let base = ExperimentConfig::load(&shipped("baseline"), &[]).unwrap();
    let defaults = ExperimentConfig {
        output: base.output.clone(),
        ..ExperimentConfig::default()
    };
    assert_eq!(base, defaults);
}

#[test]
fn overrides_use_dotted_paths() {
    let over = [
        "hum.penalty=1e-4".to_string(),
        "hum.placement=in_elliptic".to_string(),
        "nonlinearity.small_f.kind=tanh".to_string(),
        "initial.y0=bump".to_string(),
        "relaxation.eps_list=[0.1, 0.01]".to_string(),
        "weights.s=null".to_string(),
    ];
    let c = ExperimentConfig::parse(r#"{"hum": {"cg_tol": 1e-9}}"#, &over).unwrap();
    assert_eq!(c.hum.penalty, 1e-4);
    assert_eq!(c.hum.cg_tol, 1e-9);
    assert_eq!(c.hum.placement, PlacementName::InElliptic);
    assert_eq!(c.nonlinearity.small_f.kind, NonlinearityKind::Tanh);
    assert_eq!(c.initial.y0, Profile::Bump);
    assert_eq!(c.relaxation.eps_list, vec![0.1, 0.01]);
}

#[test]
fn override_syntax_errors_name_the_key() {
    let mut v = json!({"seed": 3});
    assert!(apply_override(&mut v, "seed").is_err());
    let e = apply_override(&mut v, "seed.inner=1").unwrap_err();
    assert_eq!(e.key, "seed.inner");
    let e = apply_override(&mut v, "a..b=1").unwrap_err();
    assert_eq!(e.key, "a..b");
}

#[test]
fn errors_name_the_offending_key() {
    let cases = [
        (r#"{"mesh": {"dim": 3}}"#, "mesh.dim"),
        (r#"{"mesh": {"counts": [2]}}"#, "mesh.counts"),
        (r#"{"hum": {"penalty": -1}}"#, "hum.penalty"),
        (r#"{"hum": {"penalty_list": [1e-3, 1e-2]}}"#, "hum.penalty_list"),
        (r#"{"hum": {"bogus": 1}}"#, "hum"),
        (r#"{"fixed_point": {"theta": 1.5}}"#, "fixed_point.theta"),
        (r#"{"fixed_point": {"fallback_theta": 0}}"#, "fixed_point.fallback_theta"),
        (r#"{"relaxation": {"eps_list": [0.0]}}"#, "relaxation.eps_list"),
        (r#"{"galerkin": {"modes": [8, 4]}}"#, "galerkin.modes"),
        (r#"{"galerkin": {"modes": [101]}}"#, "galerkin.modes"),
        (r#"{"region": {"omega": [[0.5, 0.2]]}}"#, "region.omega"),
        (r#"{"time": {"steps": 1}}"#, "time.steps"),
        (r#"{"initial": {"y0": "square"}}"#, "initial.y0"),
        (r#"{"nonlinearity": {"big_f": {"kind": "exp"}}}"#, "nonlinearity.big_f.kind"),
        (r#"{"weights": {"big_k": 0}}"#, "weights.big_k"),
        (r#"{"seed": "x"}"#, "seed"),
        (r#"{"extra": 1}"#, "extra"),
        (r#"[1, 2]"#, "<root>"),
        (r#"{"mesh": "#, "<root>"),
    ];
    for (text, key) in cases {
        let e = ExperimentConfig::parse(text, &[]).unwrap_err();
        assert!(e.key.starts_with(key), "{text}: got key {} ({})", e.key, e.message);
    }
}

#[test]
fn hash_tracks_content_but_not_location() {
    let a = ExperimentConfig::default();
    let b = ExperimentConfig::parse("{}", &["output=elsewhere".to_string()]).unwrap();
    assert_eq!(a.hash(), b.hash());
    let c = ExperimentConfig::parse("{}", &["seed=7".to_string()]).unwrap();
    assert_ne!(a.hash(), c.hash());
    assert_eq!(a.hash().len(), 64);
}

#[test]
fn missing_file_names_the_path() {
    let e = ExperimentConfig::load(std::path::Path::new("/no/such/config.json"), &[]).unwrap_err();
    assert!(e.message.contains("/no/such/config.json"));
}
