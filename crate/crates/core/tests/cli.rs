use std::path::Path;
use std::process::{Command, Output};

fn ulam(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ulam-stab"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("run ulam-stab")
}

fn text(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned() + &String::from_utf8_lossy(&out.stderr)
}

const PENDULUM: &str = "[system]\nname = \"pendulum\"\n\
[noise]\nalpha = 0.5\nQ = 3\n\
[grid]\ncounts = [20, 20]\nsamples = 20\nseed = 4\n";

const CONTRACTION: &str = "[system]\nname = \"custom\"\nstate = [\"x\"]\nnoise = \"w\"\nmap = [\"(0.5 + w) * x\"]\n\
[noise]\nalpha = 0.25\nQ = 5\n\
[domain]\nlower = [-1.0]\nupper = [1.0]\nwrap = [false]\n\
[grid]\ncounts = [11]\nsamples = 50\n\
[simulate]\nn_init = 200\nn_steps = 200\nepsilon = 0.05\n";

const IDENTITY: &str = "[system]\nname = \"custom\"\nstate = [\"x\", \"y\"]\nmap = [\"x\", \"y\"]\nequilibrium = [0.0, 0.0]\n\
[domain]\nlower = [-1.0, -1.0]\nupper = [1.0, 1.0]\n\
[grid]\ncounts = [3, 3]\nsamples = 10\n";

fn setup(config: &str) -> tempfile::TempDir {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.toml"), config).unwrap();
    dir
}

#[test]
fn build_writes_matrix_and_manifest() {
    let dir = setup(PENDULUM);
    let out = ulam(dir.path(), &["--config", "run.toml", "--out", "a", "build"]);
    assert!(out.status.success(), "{}", text(&out));
    let stdout = text(&out);
    assert!(stdout.contains("cells: 400  atoms: 3"), "{stdout}");
    for name in ["transfer.mtx", "transfer.atom0.mtx", "transfer.atom2.mtx", "transfer.manifest.toml"] {
        assert!(dir.path().join("a").join(name).is_file(), "{name}");
    }
    let manifest = std::fs::read_to_string(dir.path().join("a/transfer.manifest.toml")).unwrap();
    assert!(manifest.contains("pendulum"));
}

#[test]
fn rebuild_is_bit_identical() {
    let dir = setup(PENDULUM);
    for (sub, threads) in [("a", "1"), ("b", "3")] {
        let out = ulam(dir.path(), &["--config", "run.toml", "--out", sub, "--threads", threads, "build"]);
        assert!(out.status.success(), "{}", text(&out));
    }
    for name in ["transfer.mtx", "transfer.atom0.mtx", "transfer.atom1.mtx", "transfer.atom2.mtx"] {
        let a = std::fs::read(dir.path().join("a").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
}

#[test]
fn seed_flag_changes_the_matrix() {
    let dir = setup(PENDULUM);
    ulam(dir.path(), &["--config", "run.toml", "--out", "a", "build"]);
    ulam(dir.path(), &["--config", "run.toml", "--out", "b", "--seed", "99", "build"]);
    let a = std::fs::read(dir.path().join("a/transfer.mtx")).unwrap();
    let b = std::fs::read(dir.path().join("b/transfer.mtx")).unwrap();
    assert_ne!(a, b);
}

#[test]
fn invalid_noise_levels_exit_with_config_error() {
    let dir = setup(&PENDULUM.replace("Q = 3", "Q = 0"));
    let out = ulam(dir.path(), &["--config", "run.toml", "build"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out).contains("noise.Q"), "{}", text(&out));
}

#[test]
fn unknown_key_exits_with_config_error() {
    let dir = setup(&format!("{PENDULUM}bogus = 1\n"));
    let out = ulam(dir.path(), &["--config", "run.toml", "build"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(text(&out).contains("bogus"), "{}", text(&out));
}

#[test]
fn missing_config_file_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = ulam(dir.path(), &["--config", "absent.toml", "build"]);
    assert!(!out.status.success());
    assert!(text(&out).contains("absent.toml"), "{}", text(&out));
}

#[test]
fn analyze_certifies_contraction() {
    let dir = setup(CONTRACTION);
    let out = ulam(dir.path(), &["--config", "run.toml", "--out", "o", "analyze"]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out));
    for name in ["report.txt", "report.kv", "lyapunov_measure.csv", "lyapunov_function.csv"] {
        assert!(dir.path().join("o").join(name).is_file(), "{name}");
    }
    let kv = std::fs::read_to_string(dir.path().join("o/report.kv")).unwrap();
    assert!(kv.contains("certified"), "{kv}");
}

#[test]
fn identity_map_is_not_certified() {
    let dir = setup(IDENTITY);
    let out = ulam(dir.path(), &["--config", "run.toml", "--out", "o", "analyze"]);
    assert_eq!(out.status.code(), Some(3), "{}", text(&out));
    let report = std::fs::read_to_string(dir.path().join("o/report.txt")).unwrap();
    assert!(!report.is_empty());
}

#[test]
fn analyze_saved_matrix_matches_fresh_build() {
    let dir = setup(PENDULUM);
    let out = ulam(dir.path(), &["--config", "run.toml", "--out", "fresh", "analyze"]);
    let fresh_code = out.status.code();
    let out = ulam(dir.path(), &["--config", "run.toml", "--out", "saved", "build"]);
    assert!(out.status.success());
    let out = ulam(dir.path(), &["--out", "saved", "analyze", "--matrix", "saved/transfer.manifest.toml"]);
    assert_eq!(out.status.code(), fresh_code, "{}", text(&out));
    let a = std::fs::read_to_string(dir.path().join("fresh/report.kv")).unwrap();
    let b = std::fs::read_to_string(dir.path().join("saved/report.kv")).unwrap();
    let strip = |s: &str| s.lines().filter(|l| !l.starts_with("elapsed")).collect::<Vec<_>>().join("\n");
    assert_eq!(strip(&a), strip(&b));
}

#[test]
fn invariant_reports_mass_at_attractor() {
    let dir = setup(CONTRACTION);
    let out = ulam(dir.path(), &["--config", "run.toml", "--out", "o", "invariant"]);
    assert!(out.status.success(), "{}", text(&out));
    assert!(text(&out).contains("support"), "{}", text(&out));
    assert!(dir.path().join("o/invariant_measure.csv").is_file());
}

#[test]
fn simulate_contraction_finds_no_unstable_states() {
    let dir = setup(CONTRACTION);
    let out = ulam(dir.path(), &["--config", "run.toml", "--out", "o", "simulate"]);
    assert!(out.status.success(), "{}", text(&out));
    assert!(text(&out).contains("unstable fraction: 0 "), "{}", text(&out));
    assert!(dir.path().join("o/simulate.csv").is_file());
}

#[test]
fn export_writes_heatmap() {
    let dir = setup(PENDULUM);
    let out = ulam(dir.path(), &["--config", "run.toml", "--out", "o", "invariant"]);
    assert!(out.status.success(), "{}", text(&out));
    let out = ulam(
        dir.path(),
        &["--config", "run.toml", "--log-scale", "export", "--measure", "o/invariant_measure.csv", "--output", "heat.pgm"],
    );
    assert!(out.status.success(), "{}", text(&out));
    let pgm = std::fs::read(dir.path().join("heat.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n20 20\n255\n"), "{:?}", &pgm[..16]);
    assert_eq!(pgm.len(), b"P5\n20 20\n255\n".len() + 400);
}
