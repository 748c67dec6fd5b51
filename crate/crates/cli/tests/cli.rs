use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn dyco(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dyco")).args(args).current_dir(dir).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn edge_counts(o: &Output) -> Vec<usize> {
    stdout(o).lines().skip(1).map(|l| l.split('\t').nth(2).unwrap().parse().unwrap()).collect()
}

const SMALL: &[&str] = &[
    "--epoch-max",
    "30",
    "--epoch-ws",
    "20",
    "--budgets",
    "5,20",
    "--reps",
    "2",
    "--embedding-dim",
    "8",
    "--hidden-dim",
    "6",
    "--lr",
    "0.01",
    "--seed",
    "3",
];

fn small_instance(dir: &Path) {
    let o = dyco(
        &[
            "build",
            "--problem",
            "maxcut",
            "--random",
            "12,30",
            "--snapshots",
            "4",
            "--fraction",
            "0.25",
            "-o",
            "inst.json",
        ],
        dir,
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn build_maxcut_and_mis_are_reversed() {
    let dir = tempfile::tempdir().unwrap();
    let m =
        dyco(&["build", "--problem", "maxcut", "--random", "40,200", "--snapshots", "10", "-o", "m.json"], dir.path());
    assert!(m.status.success());
    let grow = edge_counts(&m);
    assert_eq!(grow.len(), 10);
    assert_eq!(*grow.last().unwrap(), 200);
    assert!(grow.windows(2).all(|w| w[0] < w[1]));

    let s = dyco(&["build", "--problem", "mis", "--random", "40,200", "--snapshots", "10", "-o", "s.json"], dir.path());
    let mut shrink = edge_counts(&s);
    shrink.reverse();
    assert_eq!(shrink, grow);
}

#[test]
fn build_tsp_moving_node() {
    let dir = tempfile::tempdir().unwrap();
    let o = dyco(
        &["build", "--problem", "tsp", "--input", "builtin:burma14", "--snapshots", "5", "-o", "t.json"],
        dir.path(),
    );
    assert!(o.status.success());
    let lines: Vec<String> = stdout(&o).lines().skip(1).map(String::from).collect();
    assert_eq!(lines.len(), 5);
    assert!(lines.iter().all(|l| l.ends_with("\t15\t105")));
}

#[test]
fn bad_input_exits_with_usage_code() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.txt"), "1 2\nx 3\n").unwrap();
    let o = dyco(&["build", "--problem", "maxcut", "--input", "bad.txt", "-o", "x.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 2"));

    let o = dyco(&["build", "--problem", "knapsack", "--random", "5,5", "-o", "x.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));

    small_instance(dir.path());
    let o = dyco(&["solve", "--instance", "inst.json", "--strategy", "sp", "--lambda-shrink", "1.5"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    fs::write(dir.path().join("cfg.json"), r#"{"strategy":"sp","no_such_field":1}"#).unwrap();
    let o = dyco(&["solve", "--instance", "inst.json", "--config", "cfg.json"], dir.path());
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn oracle_capacity_exits_with_code_3() {
    let dir = tempfile::tempdir().unwrap();
    let mut tsp =
        String::from("NAME: ring20\nTYPE: TSP\nDIMENSION: 20\nEDGE_WEIGHT_TYPE: EUC_2D\nNODE_COORD_SECTION\n");
    for i in 0..20 {
        let a = i as f64 * std::f64::consts::TAU / 20.0;
        tsp.push_str(&format!("{} {:.3} {:.3}\n", i + 1, 100.0 * a.cos(), 100.0 * a.sin()));
    }
    tsp.push_str("EOF\n");
    fs::write(dir.path().join("ring.tsp"), tsp).unwrap();
    let o = dyco(
        &[
            "build",
            "--problem",
            "tsp",
            "--input",
            "ring.tsp",
            "--snapshots",
            "2",
            "--start",
            "0,0",
            "--end",
            "1,1",
            "-o",
            "r.json",
        ],
        dir.path(),
    );
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let o = dyco(&["solve", "--instance", "r.json", "--apr", "--epoch-max", "1", "--epoch-ws", "1"], dir.path());
    assert_eq!(o.status.code(), Some(3));
    let o = dyco(&["oracle", "--instance", "r.json", "--cache", "c.json"], dir.path());
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn oracle_cache_is_reused() {
    let dir = tempfile::tempdir().unwrap();
    small_instance(dir.path());
    let first = dyco(&["oracle", "--instance", "inst.json", "--cache", "c.json"], dir.path());
    assert!(first.status.success());
    assert!(stdout(&first).lines().skip(1).all(|l| l.ends_with("\ttrue\tfalse")));
    let second = dyco(&["oracle", "--instance", "inst.json", "--cache", "c.json"], dir.path());
    assert!(stdout(&second).lines().skip(1).all(|l| l.ends_with("\ttrue")));
    assert_eq!(stdout(&second).lines().count(), 5);
}

#[test]
fn solve_and_report_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_instance(d);
    for (strategy, out) in [("static", "a"), ("warm", "b"), ("sp", "c")] {
        let mut args = vec!["solve", "--instance", "inst.json", "--strategy", strategy, "--out-dir", out, "--apr"];
        args.extend_from_slice(SMALL);
        let o = dyco(&args, d);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let csv = fs::read_to_string(d.join("a/solve.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "snapshot,budget_epochs,seconds,objective,apr");
    assert_eq!(csv.lines().count(), 1 + 4 * 2);

    let report = |out: &str| {
        let o = dyco(
            &[
                "report",
                "--instance",
                "inst.json",
                "--traces",
                "a/trace.json",
                "b/trace.json",
                "c/trace.json",
                "--out-dir",
                out,
            ],
            d,
        );
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    };
    report("r1");
    let mean = fs::read_to_string(d.join("r1/apr_mean.csv")).unwrap();
    let rows: Vec<&str> = mean.lines().collect();
    assert_eq!(rows[0], "method,5,20");
    assert_eq!(
        rows[1..].iter().map(|r| r.split(',').next().unwrap()).collect::<Vec<_>>(),
        ["static", "warm", "sp-full"]
    );

    // Rerunning the whole pipeline yields identical reports.
    let mut args = vec!["solve", "--instance", "inst.json", "--strategy", "static", "--out-dir", "a"];
    args.extend_from_slice(SMALL);
    assert!(dyco(&args, d).status.success());
    report("r2");
    for f in ["apr_mean.csv", "apr_median.csv", "per_snapshot.csv"] {
        assert_eq!(fs::read(d.join("r1").join(f)).unwrap(), fs::read(d.join("r2").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn jobs_do_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_instance(d);
    for (jobs, out) in [("1", "one"), ("3", "three")] {
        let mut args = vec!["--jobs", jobs, "solve", "--instance", "inst.json", "--strategy", "sp", "--out-dir", out];
        args.extend_from_slice(SMALL);
        assert!(dyco(&args, d).status.success());
    }
    let strip = |p: &str| -> Vec<String> {
        fs::read_to_string(d.join(p))
            .unwrap()
            .lines()
            .map(|l| {
                let mut f: Vec<&str> = l.split(',').collect();
                f.remove(2);
                f.join(",")
            })
            .collect()
    };
    assert_eq!(strip("one/solve.csv"), strip("three/solve.csv"));
}

#[test]
fn gwlab_writes_lambda_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let o = dyco(&["gwlab", "--draws", "10", "--trials", "10", "--lambdas", "0,0.5", "-o", "gw.csv"], dir.path());
    assert!(o.status.success());
    let csv = fs::read_to_string(dir.path().join("gw.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "lambda,trials,successes,p_hat,wilson_lo,wilson_hi");
    assert!(lines[1].starts_with("0.0,100,0,"));
    assert_eq!(lines.len(), 3);
}

#[test]
fn help_documents_every_flag() {
    let dir = tempfile::tempdir().unwrap();
    let expected: &[(&str, &[&str])] = &[
        (
            "build",
            &["--problem", "--input", "--snapshots", "--fraction", "--start", "--end", "--no-rounding", "--output"],
        ),
        (
            "solve",
            &[
                "--instance",
                "--config",
                "--strategy",
                "--sp-subset",
                "--epoch-max",
                "--epoch-ws",
                "--budgets",
                "--lr",
                "--seed",
                "--reps",
                "--conv",
                "--embedding-init",
                "--beam-width",
                "--checkpoint-every",
                "--keep-adam-state",
                "--apr",
                "--jobs",
            ],
        ),
        ("oracle", &["--instance", "--cache"]),
        ("gwlab", &["--graph", "--x0", "--lambdas", "--draws", "--trials", "--output"]),
        ("report", &["--instance", "--oracle", "--traces", "--out-dir"]),
    ];
    for (cmd, flags) in expected {
        let o = dyco(&[cmd, "--help"], dir.path());
        assert!(o.status.success());
        let text = stdout(&o);
        for f in *flags {
            assert!(text.contains(f), "{cmd} --help lacks {f}");
        }
    }
}
