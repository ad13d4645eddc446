use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_finalsplit"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn data(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../data")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

/// All files under `dir` with their contents, sorted by name.
fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (e.file_name().to_string_lossy().into_owned(), fs::read(e.path()).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn theory_writes_one_row_per_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("curves.csv");
    let o = run(&["theory", "--model", "sine", "--c", "0.75", "--grid", "2000", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "s,mu_L,mu_R,risk,g_cart,g_pfs,g_star");
    assert_eq!(lines.count(), 2000);
    assert!(stdout(&o).contains("MDFS split 0.416667"));
}

#[test]
fn exit_codes() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["theory", "--model", "sine", "--c", "0.7", "--bogus"]).status.code(), Some(1));
    assert_eq!(run(&["fit", "--dgp", "ball", "--method", "median"]).status.code(), Some(1));
    assert_eq!(run(&[]).status.code(), Some(1));

    let missing = run(&["fit", "--data", "/definitely/not/here.csv"]);
    assert_eq!(missing.status.code(), Some(2));
    let err = stderr(&missing);
    assert!(err.contains("not/here.csv"));
    assert!(err.lines().any(|l| l.starts_with("hint: ")));

    let no_c = run(&["fit", "--dgp", "ball", "--n", "100", "--method", "mdfs"]);
    assert_eq!(no_c.status.code(), Some(1));
    assert!(stderr(&no_c).contains("--c"));
}

#[test]
fn unknown_column_is_runtime_error_with_remedy() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    fs::write(&path, "a,b,label\n1,2,0\n3,4,1\n").unwrap();
    let o = run(&["fit", "--data", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--response"));
    let o = run(&["fit", "--data", path.to_str().unwrap(), "--response", "label", "--depth", "1", "--min-leaf-frac", "0.5"]);
    assert!(o.status.success(), "{}", stderr(&o));
}

#[test]
fn simulate_then_fit_uses_eta_for_scoring() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("s.csv");
    let o = run(&["simulate", "--dgp", "poly1", "--n", "400", "--seed", "5", "--out", csv.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let header = fs::read_to_string(&csv).unwrap().lines().next().unwrap().to_string();
    assert_eq!(header, "x1,x2,x3,x4,x5,eta,y");

    let o = run(&["fit", "--data", csv.to_str().unwrap(), "--method", "mdfs", "--c", "0.7", "--depth", "2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = stdout(&o);
    assert!(text.contains("misclassification rate"));
    assert!(!text.contains("eta <="), "eta must not be used as a feature");
}

#[test]
fn config_file_supplies_flags_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "model = \"linear\"\nc = 0.75\ngrid = 5\n").unwrap();
    let a = run(&["--config", cfg.to_str().unwrap(), "theory"]);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(stdout(&a).lines().count(), 6);
    let b = run(&["--config", cfg.to_str().unwrap(), "theory", "--grid", "3"]);
    assert_eq!(stdout(&b).lines().count(), 4);

    fs::write(&cfg, "model = [").unwrap();
    assert_eq!(run(&["--config", cfg.to_str().unwrap(), "theory"]).status.code(), Some(1));
    assert_eq!(run(&["--config", "/no/such.toml", "theory"]).status.code(), Some(1));
}

const TINY_SUITE: [&str; 20] = [
    "suite", "--smoke", "--dgp", "ball", "friedman1", "--c", "0.8", "--depth", "4", "--n", "300", "--replicates", "2",
    "--method", "cart", "mdfs", "rf-cart", "rf-mdfs", "--teacher-trees", "5",
];

#[test]
fn suite_output_is_deterministic_and_schedule_free() {
    let dir = tempfile::tempdir().unwrap();
    let outs: Vec<PathBuf> = ["a", "b", "serial"].iter().map(|n| dir.path().join(n)).collect();
    for (i, out) in outs.iter().enumerate() {
        let mut args = TINY_SUITE.to_vec();
        args.extend(["--out", out.to_str().unwrap()]);
        if i == 2 {
            args.extend(["--jobs", "1"]);
        }
        let o = run(&args);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let a = snapshot(&outs[0]);
    assert_eq!(a.iter().map(|f| f.0.as_str()).collect::<Vec<_>>(), ["diagnostics.txt", "report.md", "results.csv"]);
    assert_eq!(a, snapshot(&outs[1]));
    assert_eq!(a, snapshot(&outs[2]));
    let csv = String::from_utf8(a[2].1.clone()).unwrap();
    // 2 processes x 3 leaf fractions x 4 methods
    assert_eq!(csv.lines().count(), 1 + 24);
}

#[test]
fn suite_rejects_empty_selection() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["suite", "--smoke", "--c", "0.65", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn pima_case_study_writes_four_trees() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&[
        "case-study", "--name", "pima", "--c", "0.6", "--depth", "3", "--data", &data("pima.csv"), "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let trees: Vec<String> = snapshot(dir.path())
        .into_iter()
        .filter(|(name, _)| name.ends_with(".txt"))
        .map(|(name, _)| name)
        .collect();
    assert_eq!(trees, ["pima_cart.txt", "pima_mdfs.txt", "pima_rf-cart.txt", "pima_rf-mdfs.txt"]);
    let cart = fs::read_to_string(dir.path().join("pima_cart.txt")).unwrap();
    assert!(cart.starts_with("if Glucose <= 127.5\n    if Age <= 28.5\n"));
    assert!(cart.contains("        value: 0.870, samples: 92\n"));

    let again = tempfile::tempdir().unwrap();
    let o2 = run(&[
        "case-study", "--name", "pima", "--data", &data("pima.csv"), "--out", again.path().to_str().unwrap(),
    ]);
    assert!(o2.status.success());
    assert_eq!(snapshot(dir.path()), snapshot(again.path()));
}

#[test]
fn truncated_pima_needs_lenient() {
    let dir = tempfile::tempdir().unwrap();
    let text = fs::read_to_string(data("pima.csv")).unwrap();
    let short: Vec<&str> = text.lines().take(701).collect();
    let path = dir.path().join("short.csv");
    fs::write(&path, short.join("\n") + "\n").unwrap();
    let out = dir.path().join("out");
    let strict = run(&["case-study", "--name", "pima", "--data", path.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(strict.status.code(), Some(2));
    assert!(stderr(&strict).contains("--lenient"));
    let lenient = run(&[
        "case-study", "--name", "pima", "--data", path.to_str().unwrap(), "--lenient", "--teacher-trees", "5", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(lenient.status.success(), "{}", stderr(&lenient));
    assert!(stderr(&lenient).contains("warning"));
}

#[test]
fn kd_fit_runs_and_is_repeatable() {
    let args = ["kd-fit", "--dgp", "ring", "--n", "500", "--seed", "2", "--method", "mdfs", "--c", "0.6", "--teacher-trees", "10"];
    let a = run(&args);
    assert!(a.status.success(), "{}", stderr(&a));
    assert_eq!(stdout(&a), stdout(&run(&args)));
    assert!(stdout(&a).contains("misclassification rate"));
}
