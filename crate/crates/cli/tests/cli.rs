use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_congstream"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON report")
}

fn gen(dir: &Path, out: &str, extra: &[&str]) -> Value {
    let mut args = vec!["gen", "--out", out];
    args.extend_from_slice(extra);
    let o = run(dir, &args);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    report(&o)
}

fn without_wall_time(mut v: Value) -> Value {
    v.as_object_mut().unwrap().remove("wall_time_ms");
    v
}

#[test]
fn congruent_pair_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let g = gen(
        dir.path(),
        "f.stream",
        &[
            "--dim",
            "2",
            "--n",
            "4",
            "--u",
            "5",
            "--kind",
            "congruent",
            "--seed",
            "11",
        ],
    );
    assert_eq!(g["v"], 1);
    let truth: Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("f.stream.truth.json")).unwrap(),
    )
    .unwrap();
    assert!(truth["truth"]["rho"].is_object());
    assert_eq!(truth["truth"], g["truth"]);

    let o = run(dir.path(), &["oracle", "f.stream"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(report(&o)["verdict"]["kind"], "congruent");

    let o = run(
        dir.path(),
        &["run2d", "--mode", "full", "--seed", "7", "f.stream"],
    );
    assert_eq!(o.status.code(), Some(0));
    let r = report(&o);
    assert_eq!(r["command"], "run2d");
    assert_eq!(r["verdict"]["kind"], "congruent");
    assert!(r["verdict"]["rho"].is_object() && r["verdict"]["t"].is_object());
    assert_eq!(r["passes"], 3);
    assert_eq!(r["seed"], 7);
    assert_eq!(r["config"]["mode"], "full");
    assert!(r["peak_bits"].as_u64().unwrap() > 0);
    assert_eq!(r["primes"].as_array().unwrap().len(), 1);
}

#[test]
fn reports_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["--n", "6", "--u", "3", "--seed", "4"];
    let first = gen(dir.path(), "f.stream", &args);
    gen(dir.path(), "g.stream", &args);
    assert_eq!(
        std::fs::read(dir.path().join("f.stream")).unwrap(),
        std::fs::read(dir.path().join("g.stream")).unwrap()
    );
    assert!(!first["truth"].is_null());
    let commands: [&[&str]; 3] = [
        &["run2d", "--seed", "9", "f.stream"],
        &["run2d", "--mode", "fast", "--seed", "9", "f.stream"],
        &["oracle", "f.stream"],
    ];
    for cmd in commands {
        let a = report(&run(dir.path(), cmd));
        let b = report(&run(dir.path(), cmd));
        assert!(a["wall_time_ms"].is_number());
        assert_eq!(without_wall_time(a), without_wall_time(b));
    }
}

#[test]
fn non_congruent_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    gen(
        dir.path(),
        "nc.stream",
        &[
            "--n",
            "6",
            "--u",
            "3",
            "--kind",
            "non-congruent",
            "--seed",
            "2",
        ],
    );
    let o = run(dir.path(), &["oracle", "nc.stream"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run(dir.path(), &["run2d", "nc.stream"]);
    assert_eq!(o.status.code(), Some(1));
    assert_eq!(report(&o)["verdict"]["kind"], "not_congruent");
}

#[test]
fn bad_prime_exits_two_and_retries_cost_passes() {
    let dir = tempfile::tempdir().unwrap();
    gen(
        dir.path(),
        "f.stream",
        &["--n", "4", "--u", "5", "--seed", "3"],
    );
    let o = run(
        dir.path(),
        &["run2d", "--mode", "fast", "--delta", "3", "f.stream"],
    );
    assert_eq!(o.status.code(), Some(2));
    assert_eq!(report(&o)["passes"], 3);
    let o = run(
        dir.path(),
        &[
            "run2d",
            "--mode",
            "fast",
            "--delta",
            "3",
            "--retry-bad-prime",
            "2",
            "f.stream",
        ],
    );
    assert_eq!(o.status.code(), Some(2));
    let r = report(&o);
    assert_eq!(r["passes"], 9);
    assert_eq!(r["primes"].as_array().unwrap().len(), 3);
}

#[test]
fn usage_and_parse_errors_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.stream"), "# dim=2 U=2 nA=1\nA 1 7\n").unwrap();
    std::fs::write(
        dir.path().join("ok.stream"),
        "# dim=2 U=2 nA=1 nB=1\nA 1 1/2\nB 0 0\n",
    )
    .unwrap();
    let cases: &[&[&str]] = &[
        &["bogus"],
        &["run2d"],
        &["run2d", "missing.stream"],
        &["run2d", "bad.stream"],
        &["run2d", "--mode", "medium", "ok.stream"],
        &["run2d", "--delta", "100", "ok.stream"],
        &[
            "gen", "--dim", "4", "--n", "3", "--u", "2", "--out", "x.stream",
        ],
        &[
            "gen",
            "--dim",
            "2",
            "--n",
            "3",
            "--u",
            "2",
            "--kind",
            "planar-counterexample",
            "--out",
            "x.stream",
        ],
        &["bench", "--sweep", "n=2^5..2^4"],
    ];
    for args in cases {
        let o = run(dir.path(), args);
        assert_eq!(o.status.code(), Some(3), "{args:?}");
        assert!(o.stdout.is_empty(), "{args:?}");
    }
    assert_eq!(run(dir.path(), &["--help"]).status.code(), Some(0));
}

#[test]
fn degenerate_sets_repeat_one_point() {
    let dir = tempfile::tempdir().unwrap();
    gen(
        dir.path(),
        "d.stream",
        &[
            "--n",
            "5",
            "--u",
            "4",
            "--kind",
            "degenerate",
            "--seed",
            "1",
        ],
    );
    let text = std::fs::read_to_string(dir.path().join("d.stream")).unwrap();
    for label in ["A", "B"] {
        let pts: Vec<&str> = text.lines().filter(|l| l.starts_with(label)).collect();
        assert_eq!(pts.len(), 5);
        assert!(pts.iter().all(|p| *p == pts[0]));
    }
}

#[test]
fn planar_counterexample_norms_and_run3d() {
    let dir = tempfile::tempdir().unwrap();
    gen(
        dir.path(),
        "p.stream",
        &[
            "--dim",
            "3",
            "--n",
            "5",
            "--u",
            "8",
            "--kind",
            "planar-counterexample",
        ],
    );
    let text = std::fs::read_to_string(dir.path().join("p.stream")).unwrap();
    let a: Vec<Vec<i64>> = text
        .lines()
        .filter(|l| l.starts_with('A'))
        .map(|l| {
            l.split_whitespace()
                .skip(1)
                .map(|c| c.parse().unwrap())
                .collect()
        })
        .collect();
    assert_eq!(a.len(), 5);
    for v in &a {
        assert_eq!(v.iter().map(|c| c * c).sum::<i64>(), 98);
    }
    for k in 0..3 {
        assert_eq!(a.iter().map(|v| v[k]).sum::<i64>(), 0);
    }
    let o = run(dir.path(), &["run3d", "--seed", "5", "p.stream"]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let r = report(&o);
    assert_eq!(r["passes"], 6);
    assert_eq!(r["verdict"]["kind"], "congruent");
    assert_eq!(r["sample_sizes"].as_array().unwrap().len(), 2);
    assert!(r["counts"]["v1"].is_array());
}

#[test]
fn hash_manifest_of_five() {
    let dir = tempfile::tempdir().unwrap();
    let sets = [
        "# dim=2 U=3 nA=4\nA 0 0\nA 2 1\nA -1 1\nA 1 1\n",
        // The first set turned by a quarter and shifted by 1.
        "# dim=2 U=3 nA=4\nA 1 0\nA 0 2\nA 0 -1\nA 0 1\n",
        "# dim=2 U=3 nA=4\nA 0 0\nA 2 1\nA -1 2\nA 1 1\n",
        "# dim=2 U=3 nA=3\nA 0 0\nA 1/3 0\nA 0 1/2\n",
        "# dim=2 U=3 nA=4\nA 1 1\nA 1 1\nA 1 1\nA 1 1\n",
    ];
    let mut manifest = String::new();
    for (i, s) in sets.iter().enumerate() {
        let name = format!("s{i}.stream");
        std::fs::write(dir.path().join(&name), s).unwrap();
        manifest.push_str(&name);
        manifest.push('\n');
    }
    std::fs::write(dir.path().join("sets.txt"), manifest).unwrap();
    let o = run(
        dir.path(),
        &["hash", "--manifest", "sets.txt", "--m", "5", "--seed", "3"],
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let r = report(&o);
    let sigs: Vec<&str> = r["sets"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["signature"].as_str().unwrap())
        .collect();
    assert_eq!(sigs.len(), 5);
    assert!(sigs
        .iter()
        .all(|s| s.chars().all(|c| c.is_ascii_hexdigit())));
    assert_eq!(sigs[0], sigs[1]);
    assert_ne!(sigs[0], sigs[2]);
    assert_ne!(sigs[0], sigs[3]);
    assert!(r["shared"]["q"].is_string());
    assert_eq!(r["shared"]["m"], 5);
    assert_eq!(r["passes"], 30);
    assert_eq!(
        run(dir.path(), &["hash", "--manifest", "sets.txt", "--m", "4"])
            .status
            .code(),
        Some(3)
    );
}

#[test]
fn bench_rows_respect_the_bound() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(
        dir.path(),
        &[
            "bench",
            "--sweep",
            "n=2^4..2^6",
            "--u",
            "2,16",
            "--mode",
            "fast",
        ],
    );
    assert_eq!(o.status.code(), Some(0));
    let r = report(&o);
    let rows = r["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 6);
    for row in rows {
        assert!(row["peak_bits"].as_u64().unwrap() <= row["bound"].as_u64().unwrap());
        assert_eq!(row["passes"], 3);
    }
    assert_eq!(r["all_within_bound"], true);
    assert!(r["fit"]["r2"].is_number());
}
