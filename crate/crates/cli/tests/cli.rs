use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_transprop");

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .output()
        .expect("spawn transprop")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

/// Data lines of a CSV, skipping the schema line and the header.
fn data_lines(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("#schema="));
    lines.next().expect("header row");
    lines
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn simulate_then_cluster_clean_reads() {
    let dir = tempfile::tempdir().unwrap();
    let sim = dir.path().join("sim");
    ok(&[
        "--seed",
        "1",
        "simulate",
        "-k",
        "2",
        "-l",
        "8",
        "-n",
        "6",
        "--error-rate",
        "0",
        "-o",
        p(&sim),
    ]);
    let reads = fs::read_to_string(sim.join("reads.txt")).unwrap();
    let templates = fs::read_to_string(sim.join("templates.txt")).unwrap();
    assert_eq!(reads.lines().count(), 6);
    assert!(reads.lines().all(|r| templates.lines().any(|t| t == r)));

    let sim = dir.path().join("sim2");
    ok(&[
        "--seed",
        "3",
        "simulate",
        "-k",
        "2",
        "-l",
        "30",
        "-n",
        "6",
        "--error-rate",
        "0.01",
        "-o",
        p(&sim),
    ]);
    let out = dir.path().join("c");
    ok(&[
        "cluster",
        "--reads",
        p(&sim.join("reads.txt")),
        "--error-rate",
        "0.01",
        "-o",
        p(&out),
    ]);
    let summary = fs::read_to_string(out.join("summary.toml")).unwrap();
    assert!(summary.contains("clusters = 2"), "{summary}");
    assert!(summary.contains("converged = true"));
    let truth = fs::read_to_string(sim.join("truth.tsv")).unwrap();
    let found = fs::read_to_string(out.join("partition.tsv")).unwrap();
    let pairs = |s: &str| -> Vec<(usize, usize)> {
        s.lines()
            .map(|l| {
                let (a, b) = l.split_once('\t').unwrap();
                (a.parse().unwrap(), b.parse().unwrap())
            })
            .collect()
    };
    let (truth, found) = (pairs(&truth), pairs(&found));
    for i in 0..6 {
        for j in 0..6 {
            assert_eq!(truth[i].1 == truth[j].1, found[i].1 == found[j].1);
        }
    }
}

#[test]
fn cluster_score_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let scores = dir.path().join("s.csv");
    fs::write(&scores, "# frustrated triangle\n0,-2,3\n-2,0,-1\n3,-1,0\n").unwrap();
    let out = dir.path().join("c");
    ok(&["cluster", "--scores", p(&scores), "-o", p(&out)]);
    assert_eq!(
        fs::read_to_string(out.join("partition.tsv")).unwrap(),
        "0\t0\n1\t0\n2\t1\n"
    );

    let with_header = dir.path().join("h.csv");
    fs::write(&with_header, "a,b,c\n0,-2,3\n-2,0,-1\n3,-1,0\n").unwrap();
    let out2 = dir.path().join("c2");
    ok(&[
        "cluster",
        "--scores",
        p(&with_header),
        "--header",
        "-o",
        p(&out2),
    ]);
    assert_eq!(
        fs::read(out.join("partition.tsv")).unwrap(),
        fs::read(out2.join("partition.tsv")).unwrap()
    );
}

#[test]
fn input_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.txt");
    fs::write(&empty, "").unwrap();
    let out = run(&[
        "cluster",
        "--reads",
        p(&empty),
        "--error-rate",
        "0.1",
        "-o",
        p(&dir.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no data points"));

    let bad = dir.path().join("bad.txt");
    fs::write(&bad, "0101\n01x1\n").unwrap();
    let out = run(&[
        "cluster",
        "--reads",
        p(&bad),
        "--error-rate",
        "0.1",
        "-o",
        p(&dir.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bad.txt:2:"));

    // Reads without an error rate, and both input kinds at once.
    let out = run(&[
        "cluster",
        "--reads",
        p(&bad),
        "-o",
        p(&dir.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&[
        "cluster",
        "--reads",
        p(&bad),
        "--scores",
        p(&bad),
        "-o",
        p(&dir.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(2));

    let asym = dir.path().join("asym.csv");
    fs::write(&asym, "0,1\n2,0\n").unwrap();
    let out = run(&[
        "cluster",
        "--scores",
        p(&asym),
        "-o",
        p(&dir.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(2));

    let out = run(&[
        "--seed",
        "1",
        "simulate",
        "-k",
        "2",
        "-n",
        "6",
        "--error-rate",
        "0.5",
        "-o",
        p(&dir.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&[
        "simulate",
        "-k",
        "2",
        "-n",
        "6",
        "--error-rate",
        "0.1",
        "-o",
        p(&dir.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(2), "missing seed");
    let out = run(&[
        "--lambda",
        "1.5",
        "cluster",
        "--scores",
        p(&asym),
        "-o",
        p(&dir.path().join("o")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn non_convergence_exits_3_unless_allowed() {
    let dir = tempfile::tempdir().unwrap();
    let scores = dir.path().join("s.csv");
    fs::write(&scores, "0,-2,3\n-2,0,-1\n3,-1,0\n").unwrap();
    let capped = [
        "--max-iters",
        "1",
        "--convergence-goal",
        "1e9",
        "cluster",
        "--scores",
        p(&scores),
    ];
    let mut args = capped.to_vec();
    let out_dir = dir.path().join("a");
    args.extend(["-o", p(&out_dir)]);
    let out = run(&args);
    assert_eq!(out.status.code(), Some(3));
    assert!(out_dir.join("partition.tsv").exists());

    let mut args = capped.to_vec();
    let out_dir = dir.path().join("b");
    args.extend(["--allow-nonconverged", "-o", p(&out_dir)]);
    assert_eq!(run(&args).status.code(), Some(0));
}

#[test]
fn prior_examples() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("z");
    ok(&[
        "prior",
        "--mode",
        "zfun",
        "--x",
        "1",
        "--n",
        "15",
        "-o",
        p(&out),
    ]);
    let rows = data_lines(&out.join("prior.csv"));
    assert_eq!(rows[0][4], "1382958545");

    let out = dir.path().join("b");
    ok(&[
        "prior",
        "--mode",
        "blue-fraction",
        "--x",
        "1",
        "--n",
        "3",
        "-o",
        p(&out),
    ]);
    let rows = data_lines(&out.join("prior.csv"));
    assert!((rows[0][3].parse::<f64>().unwrap() - 0.4).abs() < 1e-12);

    let out = dir.path().join("c");
    ok(&[
        "prior",
        "--mode",
        "cluster-moments",
        "--x",
        "1",
        "--n",
        "3",
        "-o",
        p(&out),
    ]);
    let rows = data_lines(&out.join("prior.csv"));
    assert!((rows[0][2].parse::<f64>().unwrap() - 2.0).abs() < 1e-12);
    assert!((rows[0][3].parse::<f64>().unwrap() - 0.4f64.sqrt()).abs() < 1e-12);

    let out = dir.path().join("all");
    ok(&[
        "prior",
        "--x-range",
        "0.5:4:4",
        "--n",
        "5,20",
        "-o",
        p(&out),
    ]);
    let text = fs::read_to_string(out.join("prior.csv")).unwrap();
    assert!(text.lines().nth(1).unwrap() == "x,N,Z_log,blue_fraction,mean_clusters,sd_clusters");
    assert_eq!(data_lines(&out.join("prior.csv")).len(), 8);

    let bad = run(&[
        "prior",
        "--x",
        "-1",
        "--n",
        "3",
        "-o",
        p(&dir.path().join("bad")),
    ]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn noiseless_experiments_are_exact() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("f4");
    ok(&[
        "--seed",
        "11",
        "experiment-fig4",
        "--error-rates",
        "0",
        "--sims",
        "5",
        "-o",
        p(&out),
    ]);
    for row in data_lines(&out.join("fig4.csv"))
        .iter()
        .filter(|r| r[0] == "sim")
    {
        assert_eq!(row[6], row[7], "recovered vs sampled in {row:?}");
        assert_eq!(row[8], "0");
    }

    let out = dir.path().join("f5");
    ok(&[
        "--seed",
        "11",
        "experiment-fig5",
        "--error-rates",
        "0,0.05",
        "--sims",
        "5",
        "-o",
        p(&out),
    ]);
    for row in data_lines(&out.join("fig5.csv")) {
        if row[1] == "0" {
            assert_eq!((row[7].as_str(), row[8].as_str()), ("0", "0"), "{row:?}");
        }
        if row[0] == "bin" && row[2] == "0" {
            assert_eq!(
                (row[7].as_str(), row[8].as_str()),
                ("0", "0"),
                "d = 0 bin {row:?}"
            );
        }
    }
}

#[test]
fn manifest_replay_reproduces_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    ok(&[
        "--seed",
        "4",
        "--threads",
        "2",
        "experiment-fig5",
        "--sims",
        "3",
        "-o",
        p(&first),
    ]);
    let manifest = fs::read_to_string(first.join("manifest.toml")).unwrap();
    assert!(manifest.contains("name = \"experiment-fig5\""));
    assert!(manifest.contains("seed = 4"));

    let again = dir.path().join("again");
    let stdout = ok(&["replay", p(&first.join("manifest.toml")), "-o", p(&again)]);
    assert!(stdout.contains("replay matches"));
    for f in ["fig5.csv", "fig5_sims.csv", "manifest.toml"] {
        assert_eq!(
            fs::read(first.join(f)).unwrap(),
            fs::read(again.join(f)).unwrap(),
            "{f}"
        );
    }

    // A changed input is refused.
    let scores = dir.path().join("s.csv");
    fs::write(&scores, "0,-1\n-1,0\n").unwrap();
    let c = dir.path().join("c");
    ok(&["cluster", "--scores", p(&scores), "-o", p(&c)]);
    fs::write(&scores, "0,1\n1,0\n").unwrap();
    let out = run(&[
        "replay",
        p(&c.join("manifest.toml")),
        "-o",
        p(&dir.path().join("c2")),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn csv_outputs_carry_schema_and_header() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("f4");
    ok(&[
        "--seed",
        "2",
        "experiment-fig4",
        "--sims",
        "2",
        "--error-rates",
        "0.05",
        "-o",
        p(&out),
    ]);
    let text = fs::read_to_string(out.join("fig4.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("#schema=transprop.fig4.v1"));
    assert!(lines
        .next()
        .unwrap()
        .starts_with("kind,K,error_rate,sim,seed"));
    let kinds: Vec<&str> = lines.map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(kinds, ["sim", "sim", "mean", "sd"]);
}
