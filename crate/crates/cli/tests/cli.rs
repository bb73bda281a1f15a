use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use commoneval::ingest::{parse_categories, parse_qrels, parse_run_file, read_report};
use commoneval::model::validate_runset;
use tempfile::TempDir;

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_commoneval"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> Output {
    let out = cli(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Two users, five items, one category {c1, c2}.
fn tiny(dir: &Path) -> (PathBuf, PathBuf, PathBuf) {
    let run = dir.join("tiny.run");
    std::fs::write(
        &run,
        "u1 Q0 x1 1 5 sys\nu1 Q0 c1 2 4 sys\nu1 Q0 x2 3 3 sys\nu1 Q0 c2 4 2 sys\nu1 Q0 x3 5 1 sys\n\
         u2 Q0 c1 1 5 sys\nu2 Q0 x1 2 4 sys\nu2 Q0 x2 3 3 sys\nu2 Q0 x3 4 2 sys\nu2 Q0 c2 5 1 sys\n",
    )
    .unwrap();
    let qrels = dir.join("tiny.qrels");
    std::fs::write(&qrels, "u1 0 c1 5\nu1 0 x3 3\nu2 0 x1 4\n").unwrap();
    let cats = dir.join("tiny.tsv");
    std::fs::write(&cats, "c1\tk\nc2\tk\n").unwrap();
    (run, qrels, cats)
}

fn evaluate_tiny(dir: &Path, extra: &[&str], out: &Path) -> Output {
    let (run, qrels, cats) = tiny(dir);
    let mut args = vec![
        "evaluate",
        "--run",
        s(&run),
        "--qrels",
        s(&qrels),
        "--categories",
        s(&cats),
        "--out",
        s(out),
    ];
    args.extend(extra);
    cli(&args)
}

#[test]
fn tiny_world_report_matches_hand_computation() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("r.csv");
    assert!(evaluate_tiny(dir.path(), &[], &out).status.success());
    let report = read_report(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let g: f64 = 0.9;
    let f1 = (g - g.powi(5) + g.powi(3) - g.powi(5)) / 2.0;
    let f2 = (1.0 - g.powi(5) + g.powi(4) - g.powi(5)) / 2.0;
    let log_c = report
        .row("sys", "commonality", None)
        .unwrap()
        .log_value
        .unwrap();
    assert!((log_c - (f1.ln() + f2.ln())).abs() < 1e-4);
    assert!((report.row("sys", "rr", None).unwrap().value - 0.5).abs() < 1e-6);
    for metric in ["ndcg", "alpha_ndcg", "err_ia", "rsp", "reo"] {
        assert!(
            report.row("sys", metric, None).is_some(),
            "{metric} missing"
        );
    }
    for key in [
        "gamma",
        "cutoff_k",
        "alpha",
        "tail_policy",
        "relevance_threshold",
        "aggregation",
    ] {
        assert!(report.metadata.contains_key(key), "{key} not echoed");
    }
}

#[test]
fn missing_qrels_exits_2_and_names_the_path() {
    let dir = TempDir::new().unwrap();
    let (run, _, cats) = tiny(dir.path());
    let out = dir.path().join("r.csv");
    let res = cli(&[
        "evaluate",
        "--run",
        s(&run),
        "--qrels",
        "/no/such/qrels.txt",
        "--categories",
        s(&cats),
        "--out",
        s(&out),
    ]);
    assert_eq!(res.status.code(), Some(2));
    assert!(stderr(&res).contains("/no/such/qrels.txt"));
    assert!(!out.exists());
}

#[test]
fn evaluation_is_repeatable_and_echoes_config() {
    let dir = TempDir::new().unwrap();
    let (a, b, c) = (
        dir.path().join("a.json"),
        dir.path().join("b.json"),
        dir.path().join("c.json"),
    );
    assert!(evaluate_tiny(dir.path(), &["--format", "json"], &a)
        .status
        .success());
    assert!(evaluate_tiny(dir.path(), &["--format", "json"], &b)
        .status
        .success());
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());

    assert!(
        evaluate_tiny(dir.path(), &["--format", "json", "--gamma", "0.8"], &c)
            .status
            .success()
    );
    let ma = read_report(&std::fs::read_to_string(&a).unwrap())
        .unwrap()
        .metadata;
    let mc = read_report(&std::fs::read_to_string(&c).unwrap())
        .unwrap()
        .metadata;
    let differing: Vec<&String> = ma.keys().filter(|k| ma.get(*k) != mc.get(*k)).collect();
    assert_eq!(differing, ["gamma"]);
    assert_eq!(mc["gamma"], "0.8");
}

#[test]
fn invalid_inputs_leave_no_output() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("r.csv");

    let res = evaluate_tiny(dir.path(), &["--gamma", "1.5"], &out);
    assert_eq!(res.status.code(), Some(2));
    assert!(stderr(&res).contains("gamma"));

    let catalog = dir.path().join("catalog.txt");
    std::fs::write(&catalog, "c1\nc2\nx1\nx2\n").unwrap();
    let res = evaluate_tiny(dir.path(), &["--catalog", s(&catalog)], &out);
    assert_eq!(res.status.code(), Some(2));
    assert!(stderr(&res).contains("unknown item x3"), "{}", stderr(&res));

    let bad = dir.path().join("bad.run");
    std::fs::write(&bad, "u1 Q0 a 1 1.0\n").unwrap();
    let (_, qrels, cats) = tiny(dir.path());
    let res = cli(&[
        "evaluate",
        "--run",
        s(&bad),
        "--qrels",
        s(&qrels),
        "--categories",
        s(&cats),
        "--out",
        s(&out),
    ]);
    assert_eq!(res.status.code(), Some(2));
    assert!(stderr(&res).contains("bad.run"));

    assert!(!out.exists());
    let leftovers: Vec<_> = std::fs::read_dir(dir.path())
        .unwrap()
        .filter_map(|e| e.ok())
        .filter(|e| e.file_name().to_string_lossy().starts_with(".tmp"))
        .collect();
    assert!(leftovers.is_empty());
}

#[test]
fn usage_errors_exit_2() {
    assert_eq!(cli(&["evaluate"]).status.code(), Some(2));
    assert_eq!(cli(&["frobnicate"]).status.code(), Some(2));
    let dir = TempDir::new().unwrap();
    let res = Command::new(env!("CARGO_BIN_EXE_commoneval"))
        .args([
            "synth",
            "--users",
            "5",
            "--items",
            "50",
            "--out-dir",
            s(dir.path()),
        ])
        .env("COMMONEVAL_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(res.status.code(), Some(2));
    assert!(stderr(&res).contains("COMMONEVAL_THREADS"));
}

fn report_file(dir: &Path, systems: &[(&str, &[&str])]) -> PathBuf {
    let mut text = String::from("system,metric,category,value,log_value\n");
    for (sys, values) in systems {
        for (metric, v) in ["ndcg", "rr"].iter().zip(values.iter()) {
            text.push_str(&format!("{sys},{metric},,{v},\n"));
        }
        text.push_str(&format!("{sys},commonality,,{},{}\n", values[2], values[3]));
        text.push_str(&format!(
            "{sys},commonality_geom,,{},{}\n",
            values[2], values[3]
        ));
        for c in ["c1", "c2"] {
            text.push_str(&format!(
                "{sys},commonality,{c},{},{}\n",
                values[2], values[3]
            ));
        }
    }
    let path = dir.join("report.csv");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn correlate_identical_leaderboards() {
    let dir = TempDir::new().unwrap();
    let report = report_file(
        dir.path(),
        &[
            ("a", &["0.9", "0.8", "0.5", "-0.6931"]),
            ("b", &["0.5", "0.4", "0.25", "-1.3863"]),
            ("c", &["0.1", "0.2", "0.125", "-2.0794"]),
        ],
    );
    let out = dir.path().join("m.csv");
    ok(&["correlate", s(&report), "--out", s(&out)]);
    let text = std::fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("metric,commonality,ndcg,rr"));
    for line in lines {
        for cell in line.split(',').skip(1) {
            assert!(cell.starts_with("1.0000"), "{line}");
        }
    }

    let json = dir.path().join("m.json");
    ok(&[
        "correlate",
        s(&report),
        "--format",
        "json",
        "--raw-direction",
        "--out",
        s(&json),
    ]);
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert_eq!(v["direction"], "raw");
    assert_eq!(v["n_systems"], 3);
}

#[test]
fn correlate_needs_two_systems() {
    let dir = TempDir::new().unwrap();
    let report = report_file(dir.path(), &[("a", &["0.9", "0.8", "0.5", "-0.6931"])]);
    let out = dir.path().join("m.csv");
    let res = cli(&["correlate", s(&report), "--out", s(&out)]);
    assert!(!res.status.success());
    assert!(
        stderr(&res).contains("at least 2 systems"),
        "{}",
        stderr(&res)
    );
    assert!(!out.exists());
}

#[test]
fn report_shapes_and_unknown_systems() {
    let dir = TempDir::new().unwrap();
    let report = report_file(
        dir.path(),
        &[
            ("a", &["0.9", "0.8", "0.5", "-0.6931"]),
            ("b", &["0.5", "0.4", "0.25", "-1.3863"]),
            ("c", &["0.1", "0.2", "0.125", "-2.0794"]),
        ],
    );
    let figs = dir.path().join("figs");
    ok(&["report", s(&report), "--out-dir", s(&figs)]);
    let scatter = std::fs::read_to_string(figs.join("scatter.csv")).unwrap();
    assert_eq!(scatter.lines().count(), 4);
    assert_eq!(scatter.lines().nth(1), Some("a,0.9,-0.6931"));
    let dis = std::fs::read_to_string(figs.join("disaggregation.csv")).unwrap();
    assert_eq!(dis.lines().count(), 1 + 3 * 2 + 3);

    ok(&[
        "report",
        s(&report),
        "--systems",
        "a,c",
        "--out-dir",
        s(&figs),
    ]);
    let dis = std::fs::read_to_string(figs.join("disaggregation.csv")).unwrap();
    assert_eq!(dis.lines().count(), 1 + 2 * 2 + 2);

    let res = cli(&[
        "report",
        s(&report),
        "--systems",
        "zzz",
        "--out-dir",
        s(&dir.path().join("other")),
    ]);
    assert_eq!(res.status.code(), Some(2));
    assert!(stderr(&res).contains("zzz"));
}

#[test]
fn synth_family_reports_eight_categories() {
    let dir = TempDir::new().unwrap();
    let world = dir.path().join("w");
    ok(&[
        "synth",
        "--users",
        "30",
        "--items",
        "300",
        "--out-dir",
        s(&world),
        "--depth",
        "150",
    ]);
    let mut args: Vec<String> = vec!["evaluate".into()];
    let mut runs: Vec<PathBuf> = std::fs::read_dir(world.join("runs"))
        .unwrap()
        .map(|e| e.unwrap().path())
        .collect();
    runs.sort();
    assert_eq!(runs.len(), 8);
    for r in &runs {
        args.extend(["--run".into(), s(r).into()]);
    }
    let report = dir.path().join("r.csv");
    for (flag, file) in [
        ("--qrels", "qrels.txt"),
        ("--categories", "categories.tsv"),
        ("--catalog", "catalog.txt"),
    ] {
        args.extend([flag.into(), s(&world.join(file)).into()]);
    }
    args.extend(["--out".into(), s(&report).into()]);
    ok(&args.iter().map(String::as_str).collect::<Vec<_>>());

    let figs = dir.path().join("figs");
    ok(&[
        "report",
        s(&report),
        "--systems",
        "random,utility_oracle,popularity",
        "--out-dir",
        s(&figs),
    ]);
    let dis = std::fs::read_to_string(figs.join("disaggregation.csv")).unwrap();
    assert_eq!(dis.lines().count(), 1 + 3 * 8 + 3);
    let scatter = std::fs::read_to_string(figs.join("scatter.csv")).unwrap();
    assert_eq!(scatter.lines().count(), 1 + 8);
}

#[test]
fn synth_files_parse_and_manifest_echoes_flags() {
    let dir = TempDir::new().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let flags = [
        "--seed",
        "9",
        "--users",
        "20",
        "--items",
        "100",
        "--categories",
        "3",
        "--category-size",
        "5",
        "--popularity-exponent",
        "0.8",
        "--relevance-density",
        "0.1",
        "--placement",
        "popular",
        "--popular-categories",
        "1",
        "--depth",
        "40",
    ];
    for dir in [&a, &b] {
        let mut args = vec!["synth", "--out-dir", s(dir)];
        args.extend(flags);
        ok(&args);
    }
    for file in [
        "qrels.txt",
        "categories.tsv",
        "catalog.txt",
        "manifest.json",
        "runs/random.run",
        "runs/noisy_3.run",
    ] {
        assert_eq!(
            std::fs::read(a.join(file)).unwrap(),
            std::fs::read(b.join(file)).unwrap(),
            "{file}"
        );
    }

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 9);
    assert_eq!(manifest["depth"], 40);
    let spec = &manifest["spec"];
    assert_eq!(spec["n_users"], 20);
    assert_eq!(spec["n_items"], 100);
    assert_eq!(spec["n_categories"], 3);
    assert_eq!(spec["category_size"], 5);
    assert_eq!(spec["popularity_exponent"], 0.8);
    assert_eq!(spec["relevance_density"], 0.1);
    assert_eq!(spec["placement"], "popular");
    assert_eq!(spec["popular_categories"], 1);
    assert_eq!(spec["overlap"], false);

    let catalog = commoneval::ingest::parse_catalog(std::io::BufReader::new(
        std::fs::File::open(a.join("catalog.txt")).unwrap(),
    ))
    .unwrap();
    for entry in std::fs::read_dir(a.join("runs")).unwrap() {
        let text = std::fs::read(entry.unwrap().path()).unwrap();
        for run in parse_run_file(text.as_slice()).unwrap() {
            assert!(validate_runset(&run, Some(&catalog)).is_empty());
            assert_eq!(run.num_users(), 20);
            assert!(run.rankings().all(|r| r.len() == 40));
        }
    }
    let qrels = parse_qrels(std::fs::read(a.join("qrels.txt")).unwrap().as_slice()).unwrap();
    assert_eq!(qrels.len(), 20 * 10);
    let cats =
        parse_categories(std::fs::read(a.join("categories.tsv")).unwrap().as_slice()).unwrap();
    assert_eq!(cats.len(), 3);
}

#[test]
fn infeasible_synth_spec_fails() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("w");
    let res = cli(&[
        "synth",
        "--items",
        "10",
        "--categories",
        "8",
        "--category-size",
        "25",
        "--out-dir",
        s(&out),
    ]);
    assert!(!res.status.success());
    assert!(!stderr(&res).is_empty());
    assert!(!out.exists());
}
