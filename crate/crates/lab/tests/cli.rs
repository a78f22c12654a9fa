//! End-to-end checks of the `lab` binary surface: exponent tables, single
//! simulations, rendering, and the demo subcommand.

use std::path::Path;
use std::process::Command;

fn lab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lab"))
}

#[test]
fn exponents_table_has_documented_columns() {
    let out = lab().args(["exponents", "--n", "2"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "q,r,n_over_2q_plus_1_over_r,admissible_divb,admissible_AS,theta_or_NA"
    );
    // The critical pair q = r = 2 at n = 2 is admissible with θ = 1/2.
    assert!(text.contains("2,2,1,true,false,1/2"));
    // q = 1 never clears the open interval at n = 2.
    for line in text.lines().skip(1).filter(|l| l.starts_with("1,")) {
        assert!(line.contains(",false,"), "{line}");
    }
}

#[test]
fn simulate_writes_trajectory_and_manifest() {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("sim-out");
    let cfg = dir.join("sim.toml");
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::write(
        &cfg,
        r#"id = "smoke"
kind = "fokker_planck"
dim = 1
n = 32
epsilon = 1.0
t_end = 0.05
dt = 5e-4
record_every = 20
drift = { kind = "divfree", amplitude = 0.3 }
"#,
    )
    .unwrap();
    let out = lab()
        .args(["simulate", cfg.to_str().unwrap(), "--out-dir"])
        .arg(&dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = dir.join("smoke").join("manifest.json");
    assert!(manifest.exists());
    let text = std::fs::read_to_string(manifest).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let traj_name = v["trajectory"]["path"].as_str().unwrap();
    let traj_path = dir.join("smoke").join(traj_name);
    assert!(traj_path.exists());
    // Round-trips through the documented binary layout.
    let bytes = std::fs::read(traj_path).unwrap();
    let traj = driftlab_core::io::read_trajectory(&mut bytes.as_slice()).unwrap();
    assert!(traj.len() >= 2);
    assert_eq!(traj.grid().points_per_axis(), 32);
}

#[test]
fn benton_subcommand_passes() {
    let out = lab().arg("benton").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("\"kink_slope\""));
    assert!(text.contains("passes: true"));
}

#[test]
fn verify_small_config_and_render_report() {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("verify-out");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("small.toml");
    std::fs::write(
        &cfg,
        r#"id = "small"
suite = ["benton", "heat_kernel"]
seed = 1
"#,
    )
    .unwrap();
    let out = lab()
        .args(["verify", cfg.to_str().unwrap(), "--out-dir"])
        .arg(&dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let run_dir = dir.join("small");
    let out = lab().arg("report").arg(&run_dir).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let md = std::fs::read_to_string(run_dir.join("report.md")).unwrap();
    assert!(md.contains("# Verification report"));
    assert!(md.contains("benton"));
    // At least one SVG rendered from the recorded series.
    let svgs: Vec<_> = std::fs::read_dir(&run_dir)
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.path().extension().is_some_and(|x| x == "svg"))
        .collect();
    assert!(!svgs.is_empty());
}

#[test]
fn unknown_config_exits_with_code_one() {
    let out = lab().args(["verify", "/nonexistent/nope.toml"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn sweep_requires_axes() {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("sweep-out");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("noaxes.toml");
    std::fs::write(&cfg, "id = \"x\"\nsuite = [\"benton\"]\n").unwrap();
    let out = lab().args(["sweep", cfg.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn empty_suite_exits_zero() {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join("empty-out");
    std::fs::create_dir_all(&dir).unwrap();
    let cfg = dir.join("empty.toml");
    std::fs::write(&cfg, "id = \"empty\"\nsuite = []\n").unwrap();
    let out = lab()
        .args(["verify", cfg.to_str().unwrap(), "--out-dir"])
        .arg(&dir)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
}
