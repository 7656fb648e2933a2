use std::fs;
use std::process::{Command, Output};

use logtm_cli::{execute, parse_args, EXIT_FAILURE, EXIT_OK, EXIT_USAGE};

fn logtm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_logtm")).args(args).output().unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines().map(|l| l.split(',').map(str::to_owned).collect()).collect()
}

#[test]
fn dims_prints_full_precision_constants() {
    let out = logtm(&["dims", "--n", "2"]);
    assert_eq!(out.status.code(), Some(EXIT_OK));
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        "n,omega,alpha_n,c_n\n2,6.283185307179586,12.566370614359172,0.5641895835477563\n"
    );
}

#[test]
fn usage_errors_exit_with_two() {
    for args in [
        vec!["maximize", "--n-dim", "1", "--beta", "-1.5"],
        vec!["dims", "--frobnicate"],
        vec!["moser", "--n-dim", "2"],
        vec!["sweep", "--n-dim", "2"],
        vec!["moser", "--n-dim", "2", "--beta", "0.5"],
        vec!["no-such-command"],
    ] {
        let out = logtm(&args);
        assert_eq!(out.status.code(), Some(EXIT_USAGE), "{args:?}");
        assert!(out.stdout.is_empty(), "{args:?}");
        assert!(!out.stderr.is_empty(), "{args:?}");
    }
}

#[test]
fn help_is_not_an_error() {
    assert_eq!(logtm(&["--help"]).status.code(), Some(EXIT_OK));
}

#[test]
fn moser_table_increases_and_dominates_the_bound() {
    let out = logtm(&["moser", "--n-dim", "2", "--beta", "-0.75", "--c", "1", "--n", "100,1000,10000"]);
    assert_eq!(out.status.code(), Some(EXIT_OK));
    let rows = csv_rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(rows[0], ["n", "phi", "lower_bound", "grad_norm"]);
    assert_eq!(rows.len(), 4);
    let phi: Vec<f64> = rows[1..].iter().map(|r| r[1].parse().unwrap()).collect();
    let bound: Vec<f64> = rows[1..].iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(phi.windows(2).all(|w| w[1] > w[0]));
    assert!(phi.iter().zip(&bound).all(|(p, b)| p >= b));
}

#[test]
fn verify_kernel_planar_rows_pass() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("kernel.csv");
    let out = logtm(&[
        "verify-kernel", "--n-dim", "2", "--seed", "0", "--profiles", "5", "--angular", "2048",
        "--out", path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(EXIT_OK));
    assert!(out.stdout.is_empty());
    let rows = csv_rows(&fs::read_to_string(&path).unwrap());
    assert_eq!(rows[0], ["seed", "b_plus", "b_minus", "b0", "gap"]);
    assert_eq!(rows.len(), 6);
    for r in &rows[1..] {
        assert!(r[4].parse::<f64>().unwrap() <= 5e-3);
    }
}

#[test]
fn failed_checks_still_write_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("kernel3.csv");
    let out = logtm(&[
        "verify-kernel", "--n-dim", "3", "--profiles", "1", "--angular", "64", "--grid", "32",
        "--out", path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(EXIT_FAILURE));
    assert_eq!(fs::read_to_string(&path).unwrap().lines().count(), 2);
}

#[test]
fn output_replaces_existing_file_without_leftovers() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("dims.csv");
    fs::write(&path, "stale\n").unwrap();
    let out = logtm(&["dims", "--n", "2,3", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(EXIT_OK));
    assert!(fs::read_to_string(&path).unwrap().starts_with("n,omega,alpha_n,c_n\n2,"));
    assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
}

#[test]
fn unwritable_output_leaves_nothing_behind() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("missing").join("dims.csv");
    let out = logtm(&["dims", "--out", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(EXIT_FAILURE));
    assert!(!path.exists());
}

#[test]
fn maximize_then_check_the_saved_profile() {
    let dir = tempfile::tempdir().unwrap();
    let profile = dir.path().join("u.csv");
    let table = dir.path().join("max.csv");
    let out = logtm(&[
        "maximize", "--n-dim", "2", "--beta", "-1.5", "--grid", "256",
        "--profile-out", profile.to_str().unwrap(), "--out", table.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(EXIT_OK));
    let rows = csv_rows(&fs::read_to_string(&table).unwrap());
    assert_eq!(rows[0].join(","), logtm_core::MaximizeResult::CSV_HEADER);
    assert_eq!(rows[1][0], "ball");
    assert_eq!(rows[1][9], "true");
    let check = logtm(&[
        "el-check", "--n-dim", "2", "--beta", "-1.5", "--profile", profile.to_str().unwrap(),
    ]);
    assert_eq!(check.status.code(), Some(EXIT_OK));
    let text = String::from_utf8(check.stdout).unwrap();
    assert!(text.starts_with("node,lhs,rhs,residual\n"));
    assert_eq!(text.lines().count(), 18);
    assert!(text.lines().last().unwrap().starts_with("summary,"));
}

#[test]
fn sweep_rows_are_sorted() {
    let config = parse_args(["sweep", "--n-dim", "3,2", "--beta", "0.25,-0.25", "--relative", "--n", "1000,100"]).unwrap();
    let csv = execute(&config).unwrap().csv;
    let keys: Vec<(usize, f64, u64)> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f[0].parse().unwrap(), f[1].parse().unwrap(), f[2].parse().unwrap())
        })
        .collect();
    assert_eq!(keys.len(), 8);
    assert!(keys.windows(2).all(|w| (w[0].0, w[0].1) < (w[1].0, w[1].1) || (w[0].0 == w[1].0 && w[0].1 == w[1].1 && w[0].2 < w[1].2)));
    assert_eq!(keys[0], (2, -1.25, 100));
}

#[test]
fn sweep_is_independent_of_thread_count() {
    let config = parse_args(["sweep", "--beta", "-1.25,-0.5", "--n", "100,1000,10000"]).unwrap();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| execute(&config).unwrap().csv)
    };
    assert_eq!(run(1), run(4));
}
