use std::fs;
use std::path::Path;
use std::process::Command;

use mutual_energy::pipeline::{run_pipeline, ModeSelection, PipelineConfig, Stage};

fn config(n: u32, dir: &Path) -> PipelineConfig {
    PipelineConfig { n, out_dir: dir.to_path_buf(), ..PipelineConfig::default() }
}

fn cli(dir: &Path, args: &[&str]) -> std::process::Output {
    let out = Command::new(env!("CARGO_BIN_EXE_mebound"))
        .arg("--out")
        .arg(dir)
        .args(args)
        .output()
        .expect("binary runs");
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    out
}

fn sorted_files(dir: &Path) -> Vec<String> {
    let mut names: Vec<String> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .collect();
    names.sort();
    names
}

#[test]
fn miniature_run_certifies_both_witnesses() {
    let dir = tempfile::tempdir().unwrap();
    let run = run_pipeline(&config(3, dir.path())).unwrap();
    let r = &run.report;
    assert_eq!(r.schema, 1);
    assert!(r.all_certified);
    assert_eq!(r.witnesses.len(), 2);
    assert_eq!(r.witnesses[0].label, "a1_n3");
    assert_eq!(r.witnesses[1].label, "a0_n3");
    assert_eq!(r.witnesses.iter().map(|w| w.degree).collect::<Vec<_>>(), [3, 3]);
    assert_eq!(r.parameters.epsilon, 1.0 / 9.0);
    assert_eq!(r.reference_constants.len(), 5);
    assert!(r.bound.quadrature_terms.is_some());
    assert_eq!(
        sorted_files(dir.path()),
        [
            "bound.json",
            "energy_a0_n3.json",
            "energy_a1_n3.json",
            "energy_a1_n3__a0_n3.json",
            "poly_a0_n3.txt",
            "poly_a1_n3.txt",
            "report.json",
            "roots_a0_n3.csv",
            "roots_a1_n3.csv",
        ]
    );
}

#[test]
fn single_mode_runs_carry_one_column() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = PipelineConfig { mode: ModeSelection::ExactQuadrature, ..config(4, dir.path()) };
    let run = run_pipeline(&cfg).unwrap();
    assert!(run.report.energies.iter().all(|e| e.paper_bound.is_none() && e.exact_quadrature.is_some()));
    assert!(run.report.bound.quadrature_terms.is_none());
    assert!(run.report.reference_constants[2].computed.is_none());
}

#[test]
fn staged_subcommands_reproduce_the_pipeline_files() {
    let whole = tempfile::tempdir().unwrap();
    let run = run_pipeline(&config(4, whole.path())).unwrap();
    let degrees: Vec<usize> = run.report.witnesses.iter().map(|w| w.degree).collect();
    assert_eq!(degrees, [6, 6]);

    let staged = tempfile::tempdir().unwrap();
    let s = staged.path();
    let p = |name: &str| s.join(name).to_str().unwrap().to_string();
    cli(s, &["build-poly", "--a", "1", "--n", "4"]);
    cli(s, &["build-poly", "--a", "0", "--n", "4"]);
    cli(s, &["solve-roots", "--poly", &p("poly_a1_n4.txt")]);
    cli(s, &["solve-roots", "--poly", &p("poly_a0_n4.txt")]);
    let eps = format!("{:e}", run.report.parameters.epsilon);
    assert_eq!(run.report.parameters.epsilon, 1.0 / 36.0);
    cli(s, &["energy", "--self", &p("roots_a1_n4.csv"), "--eps", &eps]);
    cli(s, &["energy", "--self", &p("roots_a0_n4.csv"), "--eps", &eps]);
    cli(s, &["energy", "--cross", &p("roots_a1_n4.csv"), &p("roots_a0_n4.csv")]);
    let out = cli(
        s,
        &[
            "bound",
            "--alpha",
            &p("energy_a1_n4.json"),
            "--beta",
            &p("energy_a0_n4.json"),
            "--cross",
            &p("energy_a1_n4__a0_n4.json"),
            "--report",
            "json",
        ],
    );

    let mut names = sorted_files(whole.path());
    names.retain(|n| n != "report.json");
    assert_eq!(sorted_files(s), names);
    for name in &names {
        let a = fs::read(whole.path().join(name)).unwrap();
        let b = fs::read(s.join(name)).unwrap();
        assert!(a == b, "{name} differs");
    }
    assert_eq!(out.stdout, fs::read(s.join("bound.json")).unwrap());
}

#[test]
fn cli_run_writes_the_same_report() {
    let lib = tempfile::tempdir().unwrap();
    run_pipeline(&config(5, lib.path())).unwrap();
    let bin = tempfile::tempdir().unwrap();
    let out = cli(bin.path(), &["run", "--n", "5", "--report", "json"]);
    let file = fs::read(bin.path().join("report.json")).unwrap();
    assert_eq!(out.stdout, file);
    assert_eq!(file, fs::read(lib.path().join("report.json")).unwrap());
}

#[test]
fn reports_are_identical_across_thread_counts() {
    let mut reports = Vec::new();
    for threads in [1, 3, 8] {
        let dir = tempfile::tempdir().unwrap();
        let cfg = PipelineConfig { threads, ..config(7, dir.path()) };
        run_pipeline(&cfg).unwrap();
        reports.push(fs::read(dir.path().join("report.json")).unwrap());
    }
    assert!(reports.windows(2).all(|w| w[0] == w[1]));
}

#[test]
fn stage_errors_are_tagged() {
    let dir = tempfile::tempdir().unwrap();
    let err = run_pipeline(&PipelineConfig { n: 0, ..config(3, dir.path()) }).unwrap_err();
    assert_eq!(err.stage, Stage::Config);

    // Depth 2 leaves nothing after deflation.
    let err = run_pipeline(&config(2, dir.path())).unwrap_err();
    assert_eq!(err.stage, Stage::Energy);
    assert!(err.to_string().starts_with("[energy]"), "{err}");

    let out = Command::new(env!("CARGO_BIN_EXE_mebound"))
        .args(["--out", dir.path().to_str().unwrap(), "solve-roots", "--poly", "/nonexistent/p.txt"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("[solve-roots]"));

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "re,im\n0.5,oops\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_mebound"))
        .args(["--out", dir.path().to_str().unwrap(), "energy", "--self", bad.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"), "{}", String::from_utf8_lossy(&out.stderr));
}
