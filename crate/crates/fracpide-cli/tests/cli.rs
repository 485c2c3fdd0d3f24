//! End-to-end checks of the command-line interface: argument handling,
//! exit codes, determinism of emitted artifacts, and the CSV round trip.

use std::path::Path;
use std::process::{Command, Output};

fn fracpide(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fracpide"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("utf8 stdout")
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("utf8 stderr")
}

#[test]
fn list_problems_names_the_full_catalog() {
    let out = fracpide(&["list-problems"]);
    assert_eq!(code(&out), 0);
    let text = stdout(&out);
    for id in [
        "Ex7_1", "Ex7_2", "Ex7_3", "Ex7_4", "Ex7_5", "Ex7_6", "Ex7_7", "Ex7_8",
    ] {
        assert!(text.contains(id), "missing {id} in listing:\n{text}");
    }
}

#[test]
fn usage_errors_exit_with_code_one() {
    for args in [
        vec!["convergence", "bogus=1"],
        vec!["convergence", "n_ladder=8,4"],
        vec!["convergence", "n_ladder="],
        vec!["convergence", "alphas=1.5"],
        vec!["convergence", "example=Ex9_9"],
        vec!["convergence", "no_equals_sign"],
        vec!["convergence", "--config", "/nonexistent/path.cfg"],
        vec!["verify", "nonsense"],
        vec!["stability", "epsilon=-1"],
    ] {
        let out = fracpide(&args);
        assert_eq!(code(&out), 1, "args {args:?}: {}", stderr(&out));
        assert!(!stderr(&out).is_empty(), "args {args:?} gave no diagnostic");
    }
}

#[test]
fn large_ladders_require_an_explicit_override() {
    let out = fracpide(&["convergence", "n_ladder=4,1024"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("allow_large_n"));
}

#[test]
fn config_file_is_read_and_cli_overrides_win() {
    let dir = tempdir("config_precedence");
    let cfg = dir.join("run.cfg");
    std::fs::write(
        &cfg,
        "# comment line\nexample = Ex7_1\nalphas = 0.5\nn_ladder = 4\noutput_dir = /nonexistent\n",
    )
    .unwrap();
    // The override redirects output away from the bad directory in the file.
    let out_dir = dir.join("out");
    let out = fracpide(&[
        "convergence",
        "--config",
        cfg.to_str().unwrap(),
        &format!("output_dir={}", out_dir.display()),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert!(out_dir.join("convergence_Ex7_1_alpha0.5.csv").is_file());
}

#[test]
fn convergence_output_is_deterministic_and_round_trips() {
    let dir = tempdir("determinism");
    let run = |sub: &str| -> String {
        let out_dir = dir.join(sub);
        let out = fracpide(&[
            "convergence",
            "example=Ex7_1",
            "alphas=0.5",
            "n_ladder=4,8",
            "seed=7",
            &format!("output_dir={}", out_dir.display()),
        ]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        std::fs::read_to_string(out_dir.join("convergence_Ex7_1_alpha0.5.csv")).unwrap()
    };
    let first = run("a");
    let second = run("b");
    assert_eq!(first, second, "reruns with the same seed must be byte-identical");

    let reports = fracpide::harness::parse_reports_csv(&first).expect("csv parses");
    assert_eq!(reports.len(), 2);
    assert_eq!(reports[0].n_steps, 4);
    assert_eq!(reports[1].n_steps, 8);
    assert!(reports[0].r_udt.is_none());
    assert!(reports[1].r_udt.is_some());
    let rewritten = fracpide::harness::reports_to_csv(&reports);
    assert_eq!(rewritten, first, "CSV round trip must be exact");
}

#[test]
fn verify_suites_pass_and_respect_seeds() {
    for suite in ["kernels", "gronwall", "fem"] {
        let out = fracpide(&["verify", suite, "--seed", "3"]);
        assert_eq!(code(&out), 0, "suite {suite}: {}", stderr(&out));
        assert!(stdout(&out).contains("all checks passed"));
    }
}

#[test]
fn stability_emits_certificates_and_summary() {
    let dir = tempdir("stability");
    let out = fracpide(&[
        "stability",
        "example=Ex7_2",
        "alphas=0.5",
        "n_ladder=4,8",
        &format!("output_dir={}", dir.display()),
    ]);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("dt_tilde="));
    assert!(text.contains("step condition satisfied"));
    for tag in ["solution", "flux"] {
        let path = dir.join(format!("stability_Ex7_2_{tag}_alpha0.5.csv"));
        let csv = std::fs::read_to_string(&path).expect("certificate written");
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "n,t_n,norm,bound,pass");
        // Largest ladder entry drives the run: 8 time levels.
        assert_eq!(lines.len(), 9, "{tag} certificate rows");
        assert!(lines[1..].iter().all(|l| l.ends_with("true")));
    }
}

#[test]
fn enforce_policy_exits_with_hypothesis_code() {
    let dir = tempdir("enforce");
    let out = fracpide(&[
        "stability",
        "example=Ex7_4",
        "alphas=0.2",
        "n_ladder=16",
        "step_policy=enforce",
        &format!("output_dir={}", dir.display()),
    ]);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    assert!(stderr(&out).contains("hypothesis"));
}

fn tempdir(tag: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("fracpide_cli_{tag}_{}", std::process::id()));
    if Path::new(&dir).exists() {
        std::fs::remove_dir_all(&dir).unwrap();
    }
    std::fs::create_dir_all(&dir).unwrap();
    dir
}
