use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const FREE_PACKET: &str = r#"
name = "free-packet"

[grid]
extent = [20]
points = [128]

[state]
kind = "gaussian"
width = 1.0
momentum = [1.0]

[time]
dt = 1e-3
t_final = 0.1
stride = 20

[[checks]]
kind = "continuity"
"#;

fn rhq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rhq")).args(args).output().unwrap()
}

fn text(bytes: &[u8]) -> String {
    String::from_utf8_lossy(bytes).into_owned()
}

fn write(dir: &Path, name: &str, contents: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, contents).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn list_scenarios_names_every_builtin() {
    let out = rhq(&["list-scenarios"]);
    assert!(out.status.success());
    let listing = text(&out.stdout);
    for name in ["hermitian-baseline", "absorber", "left-vs-right", "lorentz-3d", "virial-deformed"] {
        assert!(listing.contains(name), "{listing}");
    }
    let show = rhq(&["list-scenarios", "--show", "absorber"]);
    assert!(text(&show.stdout).contains("name = \"absorber\""));
    assert_eq!(rhq(&["list-scenarios", "--show", "nope"]).status.code(), Some(2));
}

#[test]
fn verify_reports_all_errors_with_exit_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let good = write(dir.path(), "good.toml", FREE_PACKET);
    let out = rhq(&["verify", &good, "reduction-chain"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    assert!(text(&out.stdout).contains("free-packet"));

    let bad = write(dir.path(), "bad.toml", &FREE_PACKET.replace("dt = 1e-3", "dt = 0.01").replace("width = 1.0", "width = -1.0"));
    let out = rhq(&["verify", &bad]);
    assert_eq!(out.status.code(), Some(2));
    let err = text(&out.stderr);
    assert!(err.contains("time.dt") && err.contains("state.width"), "{err}");

    let broken = write(dir.path(), "broken.toml", "name = \"x\"\n[grid\n");
    let err = text(&rhq(&["verify", &broken]).stderr);
    assert!(err.contains("line 2"), "{err}");
    assert_eq!(rhq(&["verify", "no-such-scenario"]).status.code(), Some(2));
}

#[test]
fn run_writes_a_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = rhq(&["run", "absorber", "--out", out_dir.to_str().unwrap(), "--format", "table"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let stdout = text(&out.stdout);
    assert!(stdout.contains("norm_decay") && stdout.contains("PASS"), "{stdout}");
    assert!(fs::read_to_string(out_dir.join("summary.txt")).unwrap().contains("PASS"));
    assert!(out_dir.join("manifest.json").exists());
    assert!(out_dir.join("norm_decay.txt").exists());
}

#[test]
fn tolerance_scale_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let file = write(dir.path(), "free.toml", FREE_PACKET);
    let out_dir = dir.path().join("out");
    let out = rhq(&["--tolerance-scale", "10", "run", &file, "--out", out_dir.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(out_dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["tolerance_scale"], 10.0);
    assert!(out_dir.join("continuity.json").exists());
    assert_eq!(rhq(&["run", &file, "--tolerance-scale", "0"]).status.code(), Some(2));
}

#[test]
fn exit_codes_for_failure_and_divergence() {
    let dir = tempfile::tempdir().unwrap();
    let failing = FREE_PACKET.replace("kind = \"continuity\"", "kind = \"norm_drift\"\nbound = 1e-300")
        + "\n[physics.potential.u1_im]\nkind = \"constant\"\nvalue = -0.1\n";
    let failing = write(dir.path(), "failing.toml", &failing);
    let diverging = write(
        dir.path(),
        "diverging.toml",
        &format!("{FREE_PACKET}\n[physics.potential.u1_re]\nkind = \"harmonic\"\nstiffness = [1e7]\n")
            .replace("free-packet", "diverging"),
    );
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    assert_eq!(rhq(&["run", &failing, "--out", out]).status.code(), Some(1));
    let diverged = rhq(&["run", &diverging, "--out", out]);
    assert_eq!(diverged.status.code(), Some(3));
    assert!(text(&diverged.stdout).contains("diverged"));
    // Several scenarios run together; the worst exit code wins and each gets
    // its own directory.
    assert_eq!(rhq(&["run", &failing, &diverging, "--out", out]).status.code(), Some(3));
    assert!(Path::new(out).join("free-packet").join("manifest.json").exists());
    assert!(Path::new(out).join("diverging").join("manifest.json").exists());
}
