use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn sandbox_config() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/lti_sandbox.toml")
}

fn edeepc(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_edeepc"))
        .args(args)
        .current_dir(cwd)
        .env("SOURCE_DATE_EPOCH", "1700000000")
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    let stdout = String::from_utf8_lossy(&out.stdout).into_owned();
    assert!(out.status.success(), "exit {:?}\nstdout: {stdout}\nstderr: {}", out.status.code(), String::from_utf8_lossy(&out.stderr));
    stdout
}

/// Sandbox config with shorter training and fewer steps.
fn quick_config(dir: &Path, edit: impl Fn(String) -> String) -> PathBuf {
    let text = fs::read_to_string(sandbox_config()).unwrap().replace("epochs = 100", "epochs = 20").replace("steps = 40", "steps = 12");
    let path = dir.join("case.toml");
    fs::write(&path, edit(text)).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn full_command_chain() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = quick_config(d, |t| t);
    let data = d.join("data/ds.csv");
    let out = ok(&edeepc(&["generate-data", "--config", s(&cfg), "--out", s(&data)], d));
    assert!(out.contains("persistent excitation"), "{out}");
    assert!(data.exists());

    let model = d.join("model/m.json");
    let out = ok(&edeepc(&["train", "--config", s(&cfg), "--data", s(&data), "--out", s(&model), "--grad-check"], d));
    assert!(out.contains("gradient check: 100 coordinates"), "{out}");
    let history = fs::read_to_string(model.with_extension("history.csv")).unwrap();
    assert_eq!(history.lines().count(), 1 + 20, "header plus one row per epoch");

    let mut dirs = Vec::new();
    for mode in ["econ", "econ-reduced", "constant", "tracking"] {
        let res = d.join("results").join(mode);
        ok(&edeepc(
            &["simulate", "--config", s(&cfg), "--mode", mode, "--data", s(&data), "--model", s(&model), "--seeds", "2", "--out", s(&res)],
            d,
        ));
        let csvs = fs::read_dir(&res).unwrap().filter(|e| e.as_ref().unwrap().file_name().to_string_lossy().ends_with(".csv")).count();
        assert_eq!(csvs, 3, "two seed files plus the aggregate for {mode}");
        dirs.push(res);
    }
    let mut args = vec!["evaluate".to_string()];
    args.extend(dirs.iter().map(|p| s(p).to_string()));
    args.extend(["--out".into(), s(&d.join("eval")).into()]);
    let out = ok(&edeepc(&args.iter().map(String::as_str).collect::<Vec<_>>(), d));
    assert!(out.contains("| econ-reduced |"), "{out}");
    let table = fs::read_to_string(d.join("eval/table.csv")).unwrap();
    assert_eq!(table.lines().count(), 5, "{table}");
}

#[test]
fn regenerated_data_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = quick_config(d, |t| t);
    let (a, b) = (d.join("a.csv"), d.join("b.csv"));
    ok(&edeepc(&["generate-data", "--config", s(&cfg), "--out", s(&a)], d));
    ok(&edeepc(&["generate-data", "--config", s(&cfg), "--out", s(&b)], d));
    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    let meta = |p: &Path| fs::read(edeepc::datagen::meta_path(p)).unwrap();
    assert_eq!(meta(&a), meta(&b));
    ok(&edeepc(&["generate-data", "--config", s(&cfg), "--out", s(&b), "--seed", "99"], d));
    assert_ne!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
}

#[test]
fn reduced_rank_override_is_honored() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = quick_config(d, |t| t);
    let data = d.join("ds.csv");
    let model = d.join("m.json");
    ok(&edeepc(&["generate-data", "--config", s(&cfg), "--out", s(&data)], d));
    ok(&edeepc(&["train", "--config", s(&cfg), "--data", s(&data), "--out", s(&model)], d));
    let run = |rank: &str| {
        edeepc(
            &["simulate", "--config", s(&cfg), "--mode", "econ-reduced", "--data", s(&data), "--model", s(&model), "--seeds", "1", "--reduced-rank", rank, "--out", s(&d.join(format!("r{rank}")))],
            d,
        )
    };
    ok(&run("5"));
    ok(&run("auto"));
    assert_eq!(run("0").status.code(), Some(1));
    assert_eq!(run("10000").status.code(), Some(1), "rank above the achievable rank");
}

#[test]
fn validation_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let bad_ratio = quick_config(d, |t| t.replace("split_ratio = \"7:2:1\"", "split_ratio = \"7:2\""));
    let out = edeepc(&["generate-data", "--config", s(&bad_ratio)], d);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("split ratio"));

    let cfg = quick_config(d, |t| t);
    assert_eq!(edeepc(&["simulate", "--config", s(&cfg), "--mode", "warp"], d).status.code(), Some(1));
    assert_eq!(edeepc(&["simulate", "--config", s(&cfg), "--mode", "econ"], d).status.code(), Some(1), "econ needs a model");
    assert_eq!(edeepc(&["frobnicate"], d).status.code(), Some(1));
    assert_eq!(edeepc(&["--help"], d).status.code(), Some(0));

    let junk = d.join("junk");
    fs::create_dir_all(&junk).unwrap();
    fs::write(junk.join("run.json"), "{ not json").unwrap();
    assert_eq!(edeepc(&["evaluate", s(&junk), "--out", s(&d.join("e"))], d).status.code(), Some(1));
}

#[test]
fn constant_mode_needs_no_data_or_model() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = quick_config(d, |t| t);
    ok(&edeepc(&["simulate", "--config", s(&cfg), "--mode", "constant", "--seeds", "3", "--seed", "40"], d));
    let res = d.join("out/lti_sandbox/results/constant");
    for k in 40..43 {
        assert!(res.join(format!("seed_{k}.csv")).exists());
    }
}

#[test]
fn divergent_training_exits_with_two_and_names_the_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = quick_config(d, |t| t.replace("learning_rate = 1.0e-2", "learning_rate = 1.0e300").replace("hidden = []", "hidden = [8]"));
    let data = d.join("ds.csv");
    ok(&edeepc(&["generate-data", "--config", s(&cfg), "--out", s(&data)], d));
    let model = d.join("m.json");
    let out = edeepc(&["train", "--config", s(&cfg), "--data", s(&data), "--out", s(&model)], d);
    assert_eq!(out.status.code(), Some(2), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stderr).contains(s(&model)));
    assert!(model.exists());
}
