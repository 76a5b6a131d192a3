use rough_domain::{C0Domain, FixtureId};
use serde_json::Value;
use std::path::Path;
use std::process::Command;

fn run(args: &[&str], out: &Path) -> (i32, Value) {
    let status = Command::new(env!("CARGO_BIN_EXE_rough-domain"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs");
    let report = std::fs::read_to_string(out.join("report.json"))
        .ok()
        .and_then(|s| serde_json::from_str(&s).ok())
        .unwrap_or(Value::Null);
    (status.status.code().unwrap_or(-1), report)
}

fn check<'a>(report: &'a Value, name: &str) -> &'a Value {
    report["checks"].as_array().unwrap().iter().find(|c| c["name"] == name).unwrap_or_else(|| panic!("no check {name}"))
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run(&["smooth", "--fixture", "NoSuchDomain"], dir.path()).0, 2);
    assert_eq!(run(&["smooth"], dir.path()).0, 2);
    assert_eq!(run(&["verify", "--fixture", "UnitDisk", "--tol", "-1"], dir.path()).0, 2);
    assert_eq!(run(&["frobnicate"], dir.path()).0, 2);
}

#[test]
fn smooth_disk_writes_closed_curve_deterministically() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = ["smooth", "--fixture", "UnitDisk", "--eps", "0.01,-0.01", "--grid", "128", "--seed", "3"];
    let (code, report) = run(&args, a.path());
    assert_eq!(code, 0, "{report}");
    assert_eq!(check(&report, "level[0]")["detail"]["closed"], true);
    assert_eq!(check(&report, "level[0]")["detail"]["components"], 1);
    assert_eq!(check(&report, "nesting")["pass"], true);
    assert_eq!(report["exploratory"], false);
    assert_eq!(run(&args, b.path()).0, 0);
    for f in ["report.json", "level_0.csv", "level_1.csv", "rho_grid.csv"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert_eq!(x, y, "{f} differs between identical runs");
    }
    let svg = std::fs::read_to_string(a.path().join("levels.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("<path"));
}

#[test]
fn smooth_at_zero_is_identity_and_large_eps_is_exploratory() {
    let dir = tempfile::tempdir().unwrap();
    let (code, report) = run(&["smooth", "--fixture", "UnitSquare", "--eps=0,0.2", "--grid", "64"], dir.path());
    assert_eq!(code, 0, "{report}");
    assert_eq!(check(&report, "identity[0]")["detail"]["max_displacement"], 0.0);
    assert_eq!(report["exploratory"], true);
}

#[test]
fn verify_disk_passes() {
    let dir = tempfile::tempdir().unwrap();
    let (code, report) = run(&["verify", "--fixture", "UnitDisk"], dir.path());
    assert_eq!(code, 0, "{report}");
    for name in ["cover", "sandwich", "contraction", "flow_monotonicity", "round_trip", "degree_euler", "surjectivity"] {
        assert_eq!(check(&report, name)["pass"], true, "{name}");
    }
}

#[test]
fn verify_on_corrupted_spec_fails_cover() {
    let dir = tempfile::tempdir().unwrap();
    let mut spec = C0Domain::fixture(FixtureId::UnitDisk).unwrap().to_spec();
    let keep = spec.patches.len() / 2;
    spec.patches.truncate(keep);
    let path = dir.path().join("broken.json");
    spec.write(&path).unwrap();
    let out = dir.path().join("out");
    let (code, report) = run(&["verify", "--spec", path.to_str().unwrap()], &out);
    assert_eq!(code, 1, "{report}");
    assert_eq!(check(&report, "cover")["pass"], false);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"fixture": "UnitDisk", "eps": [0.01], "grid": 9999}"#).unwrap();
    let (code, report) = run(&["smooth", "--config", cfg.to_str().unwrap(), "--grid", "64"], dir.path());
    assert_eq!(code, 0, "{report}");
    assert_eq!(check(&report, "level[0]")["detail"]["grid"], 64);

    std::fs::write(&cfg, r#"{"fixture": "UnitDisk", "bogus": 1}"#).unwrap();
    assert_eq!(run(&["smooth", "--config", cfg.to_str().unwrap()], dir.path()).0, 2);
}

#[test]
fn degree_of_sphere_normal_is_one() {
    let dir = tempfile::tempdir().unwrap();
    let (code, report) = run(&["degree", "--mesh", "sphere"], dir.path());
    assert_eq!(code, 0);
    assert_eq!(check(&report, "degree")["detail"]["degree"], 1);
    let (_, report) = run(&["degree", "--mesh", "sphere", "--field", "antipodal"], dir.path());
    assert_eq!(check(&report, "degree")["detail"]["degree"], -1);
    let (_, report) = run(&["degree", "--mesh", "torus"], dir.path());
    assert_eq!(check(&report, "degree")["detail"]["degree"], 0);
}

#[test]
fn torus_band_report() {
    let dir = tempfile::tempdir().unwrap();
    let (code, report) = run(&["torus", "--gamma", "1.2", "--grid", "256"], dir.path());
    assert_eq!(code, 0, "{report}");
    let d = &check(&report, "pseudonormal[gamma=1.2]")["detail"];
    assert!(d["min_alignment"].as_f64().unwrap() > 0.0);
    assert!(dir.path().join("torus_field_0.csv").exists());
}

#[test]
fn flow_writes_trajectories() {
    let dir = tempfile::tempdir().unwrap();
    let (code, report) = run(&["flow", "--fixture", "UnitSquare", "--seed-points", "20"], dir.path());
    assert_eq!(code, 0, "{report}");
    let csv = std::fs::read_to_string(dir.path().join("trajectories.csv")).unwrap();
    assert!(csv.starts_with("trajectory,t,x,y,rho"));
    assert!(csv.lines().count() > 20);
    assert!(dir.path().join("flow.svg").exists());
}

#[test]
fn probe_weierstrass_rough_points_have_no_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let (code, report) = run(&["probe", "--fixture", "WeierstrassDomain", "--stride", "128"], dir.path());
    assert_eq!(code, 0, "{report}");
    let csv = std::fs::read_to_string(dir.path().join("points.csv")).unwrap();
    let mut rough = 0;
    for line in csv.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let (x, y): (f64, f64) = (f[2].parse().unwrap(), f[3].parse().unwrap());
        let fx = FixtureId::weierstrass();
        if x.abs() < 0.6 && (y - fx.weierstrass_height(x)).abs() < 0.02 {
            rough += 1;
            assert_eq!(f[4], "NoCertificate", "{line}");
        }
    }
    assert!(rough > 0);
    let single = tempfile::tempdir().unwrap();
    let (code, _) = run(&["probe", "--fixture", "UnitSquare", "--point=0,0", "--delta", "0.2"], single.path());
    assert_eq!(code, 0);
    let probe: Value = serde_json::from_str(&std::fs::read_to_string(single.path().join("probe.json")).unwrap()).unwrap();
    assert!(probe["outcome"]["Certificate"].is_object(), "{probe}");
}
