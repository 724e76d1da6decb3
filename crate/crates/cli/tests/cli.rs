use std::path::PathBuf;
use std::process::{Command, Output};

fn ellstat(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ellstat"))
        .args(args)
        .output()
        .expect("run ellstat")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("ellstat-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn brute_one_is_one() {
    let out = ellstat(&["brute", "--p", "5", "--stats", "one"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let value: f64 = text
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(2)
        .unwrap()
        .parse()
        .unwrap();
    assert_eq!(value, 1.0);
}

#[test]
fn brute_tally_counts_every_model() {
    let out = ellstat(&["brute", "--p", "101", "--stats", "s,c,tau", "--tally"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let (_, tally) = text.split_once("d1,d2,count\n").unwrap();
    let total: u64 = tally
        .lines()
        .map(|l| l.rsplit(',').next().unwrap().parse::<u64>().unwrap())
        .sum();
    assert_eq!(total, 10100);
}

#[test]
fn exit_codes() {
    assert_eq!(ellstat(&["brute", "--p", "4"]).status.code(), Some(2));
    assert_eq!(ellstat(&["brute", "--p", "5001"]).status.code(), Some(2));
    assert_eq!(ellstat(&["brute"]).status.code(), Some(1));
    assert_eq!(
        ellstat(&["brute", "--p", "7", "--stats", "q"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(ellstat(&["nonsense"]).status.code(), Some(1));
    assert_eq!(ellstat(&["--help"]).status.code(), Some(0));
    assert_eq!(ellstat(&["sweep", "--xmax", "3000"]).status.code(), Some(2));
    assert_eq!(
        ellstat(&["sweep", "--xmax", "20", "--out", "/nonexistent/dir/x.csv"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn sweep_rows_and_thread_determinism() {
    let one = scratch("t1.csv");
    let eight = scratch("t8.csv");
    for (file, threads) in [(&one, "1"), (&eight, "8")] {
        let out = ellstat(&[
            "sweep",
            "--xmax",
            "50",
            "--threads",
            threads,
            "--out",
            file.to_str().unwrap(),
        ]);
        assert!(
            out.status.success(),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let a = std::fs::read_to_string(&one).unwrap();
    let b = std::fs::read_to_string(&eight).unwrap();
    assert_eq!(a, b);
    let mut lines = a.lines();
    assert_eq!(
        lines.next().unwrap(),
        "x,p,avg_s_corrected,avg_s_printed,avg_c_corrected,avg_tauN,running_mean_s"
    );
    let ps: Vec<u64> = lines
        .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
        .collect();
    assert_eq!(ps, vec![5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41, 43, 47]);
}

#[test]
fn fit_synthetic_and_missing_column() {
    let file = scratch("synthetic.csv");
    let mut text = String::from("x,exact,flat\n");
    for x in 2..60 {
        text += &format!("{x},{},3\n", 2.0 * (x as f64).ln());
    }
    std::fs::write(&file, text).unwrap();
    let out = ellstat(&["fit", "--in", file.to_str().unwrap(), "--column", "exact"]);
    assert!(out.status.success());
    let row = stdout(&out).lines().nth(1).unwrap().to_string();
    let slope: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
    assert!((slope - 2.0).abs() < 1e-10);

    let out = ellstat(&["fit", "--in", file.to_str().unwrap(), "--column", "flat"]);
    let rms: f64 = stdout(&out)
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(2)
        .unwrap()
        .parse()
        .unwrap();
    assert!(rms > 0.1);

    assert_eq!(
        ellstat(&["fit", "--in", file.to_str().unwrap(), "--column", "nope"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn sweep_gnuplot_script() {
    let csv = scratch("g.csv");
    let plot = scratch("g.gp");
    let out = ellstat(&[
        "sweep",
        "--xmax",
        "30",
        "--out",
        csv.to_str().unwrap(),
        "--gnuplot",
        plot.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let script = std::fs::read_to_string(plot).unwrap();
    assert!(script.contains(csv.to_str().unwrap()));
    assert!(script.contains("log(x)"));
}

fn compare_rows(stat: &str) -> Vec<Vec<f64>> {
    let out = ellstat(&["compare", "--p", "101,211", "--stat", stat]);
    assert!(out.status.success());
    stdout(&out)
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(|v| v.parse().unwrap()).collect())
        .collect()
}

#[test]
fn compare_columns() {
    let out = ellstat(&["compare", "--p", "101", "--stat", "s"]);
    let text = stdout(&out);
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    assert_eq!(header.len(), 10);
    assert_eq!(&header[..3], ["p", "brute", "main_term_A_paper"]);

    let s = compare_rows("s");
    let c = compare_rows("c");
    assert_eq!(s[0][0], 101.0);
    for (rs, rc) in s.iter().zip(&c) {
        assert!(rs.iter().all(|v| v.is_finite()));
        for i in 1..6 {
            assert!(rc[i] <= rs[i], "column {i}: c {} > s {}", rc[i], rs[i]);
        }
    }
}

#[test]
fn divap_commands() {
    let out = ellstat(&["divap", "delta", "--X", "10", "--q", "1", "--a", "0"]);
    let v: f64 = stdout(&out)
        .lines()
        .nth(1)
        .unwrap()
        .rsplit(',')
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!((v - 2.4298).abs() < 1e-4);

    let out = ellstat(&[
        "divap",
        "mean-square",
        "--A",
        "1000000",
        "--B",
        "1000500",
        "--q",
        "16",
    ]);
    assert!(out.status.success());
    let row: Vec<f64> = stdout(&out)
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(row.len(), 6);
    assert!(row[3..].iter().all(|v| v.is_finite() && *v > 0.0));

    assert_eq!(
        ellstat(&[
            "divap",
            "mean-square",
            "--A",
            "100",
            "--B",
            "110",
            "--q",
            "11"
        ])
        .status
        .code(),
        Some(2)
    );

    let out = ellstat(&["divap", "grid", "--A", "10000"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert_eq!(text.lines().next().unwrap(), "A,B,q,lhs,envelope,ratio");
    assert!(text.lines().count() > 10);
}

#[test]
fn density_and_prob() {
    let out = ellstat(&["density", "g-sum", "--ell", "3", "--p", "7", "--R", "3"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let sum = text
        .lines()
        .find(|l| l.starts_with("sum,"))
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap()
        .to_string();
    let expected = text
        .lines()
        .find(|l| l.starts_with("expected,"))
        .unwrap()
        .split(',')
        .nth(1)
        .unwrap()
        .to_string();
    assert_eq!(sum, expected);

    let out = ellstat(&[
        "density", "f-ell", "--ell", "2", "--p", "7", "--d1", "2", "--d2", "1",
    ]);
    assert!(stdout(&out).contains(",1/3,"));
    assert_eq!(
        ellstat(&["density", "f-ell", "--ell", "2", "--p", "7", "--d1", "4", "--d2", "1"])
            .status
            .code(),
        Some(2)
    );

    let out = ellstat(&[
        "prob", "--p", "101", "--d1", "1", "--d2", "102", "--lmax", "100", "--norm", "paper",
    ]);
    assert!(out.status.success());
    let v: f64 = stdout(&out)
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .nth(5)
        .unwrap()
        .parse()
        .unwrap();
    assert!(v > 0.0 && v < 1.0);
}

#[test]
fn seed_is_honored() {
    let a = stdout(&ellstat(&["brute", "--p", "211", "--seed", "7", "--tally"]));
    let b = stdout(&ellstat(&["brute", "--p", "211", "--seed", "7", "--tally"]));
    assert_eq!(a, b);
}
