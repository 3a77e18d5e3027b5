use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = "\
seed = 3
kernel.alpha = 0.5
kernel.kappa = 1.0
kernel.c_tail = 1.0
kernel.profile.family = \"power\"
kernel.profile.param = 1.0
sampler.n_paths = 1500
sampler.delta = 0.5
sampler.t_grid = [64.0, 128.0, 256.0]
sampler.diffusivity_tol = 0.25
density.far_radii = [150.0]
bounds.r_points = 6
bounds.dominance_cases = 5
";

fn jumplab(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jumplab"))
        .args(args)
        .arg("--config")
        .arg(dir.join("exp.toml"))
        .env_remove("JUMPLAB_THREADS")
        .output()
        .expect("binary runs")
}

fn setup(config: &str) -> tempfile::TempDir {
    let d = tempfile::tempdir().unwrap();
    std::fs::write(d.path().join("exp.toml"), config).unwrap();
    d
}

fn out_arg(d: &Path, name: &str) -> String {
    d.join(name).display().to_string()
}

#[test]
fn check_kernel_succeeds() {
    let d = setup(CONFIG);
    let o = jumplab(d.path(), &["check-kernel", "--out", &out_arg(d.path(), "o")]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s: serde_json::Value =
        serde_json::from_slice(&std::fs::read(d.path().join("o/check_kernel.json")).unwrap()).unwrap();
    assert_eq!(s["stage"], "check_kernel");
    assert_eq!(s["checks"].as_array().unwrap().len(), 4);
}

#[test]
fn missing_upstream_output_exits_4() {
    let d = setup(CONFIG);
    let o = jumplab(d.path(), &["density", "--out", &out_arg(d.path(), "o")]);
    assert_eq!(o.status.code(), Some(4));
    let line: serde_json::Value = serde_json::from_slice(o.stderr.trim_ascii()).unwrap();
    assert_eq!(line["error"], "missing_input");
    assert!(line["detail"].as_str().unwrap().ends_with("paths.bin"));
}

#[test]
fn bad_config_exits_3() {
    let d = setup(&format!("{CONFIG}sampler.bogus = 1\n"));
    let o = jumplab(d.path(), &["check-kernel", "--out", &out_arg(d.path(), "o")]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn mismatched_configuration_exits_5() {
    let d = setup(CONFIG);
    let out = out_arg(d.path(), "o");
    assert!(jumplab(d.path(), &["sample-paths", "--out", &out]).status.success());
    let o = jumplab(d.path(), &["density", "--out", &out, "--seed", "99"]);
    assert_eq!(o.status.code(), Some(5));
}

#[test]
fn outputs_do_not_depend_on_thread_count() {
    let d = setup(CONFIG);
    let files = ["paths.bin", "anchors.bin", "density.csv", "density.json", "far.csv", "bounds.csv"];
    let mut runs = Vec::new();
    for threads in ["1", "3"] {
        let out = out_arg(d.path(), &format!("t{threads}"));
        for stage in ["sample-paths", "density", "bounds"] {
            let o = jumplab(d.path(), &[stage, "--out", &out, "--threads", threads]);
            assert!(matches!(o.status.code(), Some(0 | 1)), "{stage}: {}", String::from_utf8_lossy(&o.stderr));
        }
        runs.push(files.map(|f| std::fs::read(Path::new(&out).join(f)).unwrap()));
    }
    for (i, f) in files.iter().enumerate() {
        assert!(runs[0][i] == runs[1][i], "{f} differs between thread counts");
    }
}
