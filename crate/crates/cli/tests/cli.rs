use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use oocpca::source::{read_dense, read_header, write_dense};
use oocpca::testgen::{SimulationGenerator, SimulationSpec};
use oocpca::DenseMatrix;
use serde_json::Value;

fn oocpca(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_oocpca"))
        .args(args)
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = oocpca(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    oocpca(args).status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn diagnostics(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("diagnostics.json")).unwrap()).unwrap()
}

fn gen(dir: &Path, name: &str, args: &[&str]) -> PathBuf {
    let path = dir.join(name);
    let mut full = vec!["gen"];
    full.extend_from_slice(args);
    full.extend_from_slice(&["--out", s(&path)]);
    ok(&full);
    path
}

#[test]
fn gen_writes_header_and_payload() {
    let dir = tempfile::tempdir().unwrap();
    let path = gen(
        dir.path(),
        "e1.bin",
        &["example1", "--m", "256", "--n", "256"],
    );
    assert_eq!(std::fs::metadata(&path).unwrap().len(), 32 + 256 * 256 * 4);
    let info = ok(&["info", s(&path)]);
    assert!(info.starts_with("m=256 n=256 dtype=f32"), "{info}");
}

#[test]
fn gen_reports_generation_time() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sim.bin");
    let out = ok(&["gen", "sim", "--m", "64", "--out", s(&path)]);
    assert!(out.lines().any(|l| l.starts_with("t_gen ")), "{out}");
    assert_eq!(read_header(&path).unwrap().n, 1000);
}

#[test]
fn info_errors() {
    let dir = tempfile::tempdir().unwrap();
    let path = gen(dir.path(), "e1.bin", &["example1", "--m", "16", "--n", "8"]);
    let bytes = std::fs::read(&path).unwrap();
    let cut = dir.path().join("cut.bin");
    std::fs::write(&cut, &bytes[..bytes.len() - 3]).unwrap();
    let out = oocpca(&["info", s(&cut)]);
    assert_eq!(out.status.code(), Some(5));
    assert!(String::from_utf8_lossy(&out.stderr).contains("offset"));
    assert_eq!(code(&["info", s(&dir.path().join("missing.bin"))]), 3);
}

#[test]
fn pca_of_identity() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("eye.bin");
    write_dense(&path, &DenseMatrix::identity(2)).unwrap();
    let out = dir.path().join("out");
    ok(&[
        "pca",
        s(&path),
        "--k",
        "1",
        "--l",
        "1",
        "--i",
        "0",
        "--out-dir",
        s(&out),
    ]);
    let sigma = read_dense(out.join("sigma.bin")).unwrap();
    assert_eq!(sigma.as_slice(), &[1.0]);
    assert_eq!(diagnostics(&out)["sigma"][0].as_f64(), Some(1.0));
    let info = ok(&["info", s(&out.join("U.bin"))]);
    assert!(info.starts_with("m=2 n=1 "), "{info}");
}

#[test]
fn pca_reports_passes_and_time() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    let stdout = ok(&[
        "pca",
        "--builtin",
        "sim",
        "--m",
        "65536",
        "--k",
        "3",
        "--i",
        "1",
        "--out-dir",
        s(&out),
    ]);
    assert!(stdout.lines().any(|l| l.starts_with("t_PCA ")));
    let d = diagnostics(&out);
    assert_eq!(d["passes_over_a"], 4);
    assert_eq!(d["words_transferred"], 4 * 65536 * 1000);
    assert_eq!(d["m"], 65536);
    assert_eq!(d["n"], 1000);
    assert!(d["epsilon"].is_null());
}

#[test]
fn example1_error_estimate_in_band() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("e1");
    ok(&[
        "pca",
        "--builtin",
        "example1",
        "--m",
        "4000",
        "--n",
        "4000",
        "--k",
        "16",
        "--i",
        "3",
        "--estimate-error",
        "--out-dir",
        s(&out),
    ]);
    let eps = diagnostics(&out)["epsilon"]["value"].as_f64().unwrap();
    let eps0 = 10f64.powf(-64.0 / 19.0);
    assert!(eps >= 0.5 * eps0 && eps <= 2.0 * eps0, "{eps}");
}

#[test]
fn example2_through_a_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = gen(
        dir.path(),
        "e2.bin",
        &["example2", "--m", "2000", "--n", "2000"],
    );
    let out = dir.path().join("out");
    ok(&[
        "pca",
        s(&path),
        "--k",
        "12",
        "--i",
        "3",
        "--estimate-error",
        "--out-dir",
        s(&out),
    ]);
    let d = diagnostics(&out);
    let eps = d["epsilon"]["value"].as_f64().unwrap();
    assert!((eps - 0.01).abs() <= 0.0025, "{eps}");
    assert_eq!(d["passes_over_a"], 8);
    assert_eq!(d["epsilon"]["passes_over_a"], 12);

    // the separate subcommand on the saved factors
    let stdout = ok(&[
        "estimate-error",
        s(&path),
        "--u",
        s(&out.join("U.bin")),
        "--sigma",
        s(&out.join("sigma.bin")),
        "--v",
        s(&out.join("V.bin")),
    ]);
    let eps: f64 = stdout
        .lines()
        .next()
        .unwrap()
        .trim_start_matches("epsilon ")
        .parse()
        .unwrap();
    assert!((eps - 0.01).abs() <= 0.0025, "{eps}");
}

#[test]
fn truncated_factors_show_the_next_singular_value() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    ok(&[
        "pca",
        "--builtin",
        "example2",
        "--m",
        "300",
        "--n",
        "300",
        "--k",
        "8",
        "--i",
        "3",
        "--out-dir",
        s(&out),
    ]);
    let stdout = ok(&[
        "estimate-error",
        "--builtin",
        "example2",
        "--m",
        "300",
        "--n",
        "300",
        "--u",
        s(&out.join("U.bin")),
        "--sigma",
        s(&out.join("sigma.bin")),
        "--v",
        s(&out.join("V.bin")),
    ]);
    let eps: f64 = stdout
        .lines()
        .next()
        .unwrap()
        .trim_start_matches("epsilon ")
        .parse()
        .unwrap();
    assert!((0.17..=0.34 * 1.001).contains(&eps), "{eps}");
}

#[test]
fn exact_factors_have_zero_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut a = DenseMatrix::zeros(30, 20);
    a[(0, 0)] = 3.0;
    a[(4, 7)] = 2.0;
    let mut u = DenseMatrix::zeros(30, 2);
    u[(0, 0)] = 1.0;
    u[(4, 1)] = 1.0;
    let mut v = DenseMatrix::zeros(20, 2);
    v[(0, 0)] = 1.0;
    v[(7, 1)] = 1.0;
    let sigma = DenseMatrix::from_vec(1, 2, vec![3.0, 2.0]).unwrap();
    let p = |n: &str| dir.path().join(n);
    write_dense(p("a.bin"), &a).unwrap();
    write_dense(p("u.bin"), &u).unwrap();
    write_dense(p("v.bin"), &v).unwrap();
    write_dense(p("s.bin"), &sigma).unwrap();
    let stdout = ok(&[
        "estimate-error",
        s(&p("a.bin")),
        "--u",
        s(&p("u.bin")),
        "--sigma",
        s(&p("s.bin")),
        "--v",
        s(&p("v.bin")),
    ]);
    let eps: f64 = stdout
        .lines()
        .next()
        .unwrap()
        .trim_start_matches("epsilon ")
        .parse()
        .unwrap();
    assert!(eps <= 1e-9, "{eps}");
    assert!(stdout.contains("failure_bound"));

    // V with the wrong number of rows
    assert_eq!(
        code(&[
            "estimate-error",
            s(&p("a.bin")),
            "--u",
            s(&p("u.bin")),
            "--sigma",
            s(&p("s.bin")),
            "--v",
            s(&p("u.bin"))
        ]),
        5
    );
}

#[test]
fn reruns_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let path = gen(
        dir.path(),
        "e1.bin",
        &["example1", "--m", "300", "--n", "200"],
    );
    let run = |name: &str| {
        let out = dir.path().join(name);
        ok(&[
            "pca",
            s(&path),
            "--k",
            "5",
            "--i",
            "2",
            "--seed",
            "9",
            "--estimate-error",
            "--out-dir",
            s(&out),
        ]);
        out
    };
    let (a, b) = (run("a"), run("b"));
    for f in ["U.bin", "sigma.bin", "V.bin"] {
        assert_eq!(
            std::fs::read(a.join(f)).unwrap(),
            std::fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let (mut da, mut db) = (diagnostics(&a), diagnostics(&b));
    for d in [&mut da, &mut db] {
        d.as_object_mut().unwrap().remove("seconds");
        d.as_object_mut().unwrap().remove("t_pca");
        d["epsilon"].as_object_mut().unwrap().remove("seconds");
    }
    assert_eq!(da, db);
}

#[test]
fn budget_is_honored() {
    let dir = tempfile::tempdir().unwrap();
    let path = gen(
        dir.path(),
        "e1.bin",
        &["example1", "--m", "3000", "--n", "1000"],
    );
    let out = dir.path().join("out");
    ok(&[
        "pca",
        s(&path),
        "--k",
        "10",
        "--ram-budget-mb",
        "4",
        "--out-dir",
        s(&out),
    ]);
    let d = diagnostics(&out);
    let budget = 4 * (1 << 20) / 8;
    assert_eq!(d["ram_budget_words"], budget);
    assert!(d["high_water_words"].as_u64().unwrap() <= budget);
    assert!(d["disk_seeks"].as_u64().unwrap() > d["passes_over_a"].as_u64().unwrap());
    // too small for the factors
    assert_eq!(
        code(&[
            "pca",
            s(&path),
            "--k",
            "10",
            "--ram-budget-mb",
            "1",
            "--out-dir",
            s(&out)
        ]),
        2
    );
}

#[test]
fn flag_errors_exit_2() {
    assert_eq!(
        code(&["pca", "--builtin", "sim", "--m", "100", "--out-dir", "x"]),
        2
    );
    assert_eq!(
        code(&[
            "pca",
            "--builtin",
            "sim",
            "--m",
            "100",
            "--k",
            "0",
            "--out-dir",
            "x"
        ]),
        2
    );
    assert_eq!(
        code(&[
            "pca",
            "--builtin",
            "sim",
            "--m",
            "100",
            "--k",
            "40",
            "--out-dir",
            "x"
        ]),
        2
    );
    assert_eq!(code(&["bench", "table9"]), 2);
    assert_eq!(
        code(&["gen", "example1", "--m", "10", "--n", "20", "--out", "x.bin"]),
        2
    );
    let out = Command::new(env!("CARGO_BIN_EXE_oocpca"))
        .args(["info", "x"])
        .env("OOCPCA_THREADS", "many")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn thread_cap_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let path = gen(
        dir.path(),
        "e1.bin",
        &["example1", "--m", "200", "--n", "100"],
    );
    let mut outs = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.path().join(threads);
        let run = Command::new(env!("CARGO_BIN_EXE_oocpca"))
            .args(["pca", s(&path), "--k", "4", "--out-dir", s(&out)])
            .env("OOCPCA_THREADS", threads)
            .output()
            .unwrap();
        assert!(run.status.success());
        outs.push(std::fs::read(out.join("U.bin")).unwrap());
    }
    assert_eq!(outs[0], outs[1]);
}

#[test]
fn overflow_exits_4_and_prescale_recovers() {
    let dir = tempfile::tempdir().unwrap();
    let a = DenseMatrix::from_fn(50, 30, |r, c| {
        if (r * 7 + c * 3) % 5 == 0 {
            3e38
        } else {
            -1e38 + (r as f64) * 1e36
        }
    });
    let path = dir.path().join("big.bin");
    write_dense(&path, &a).unwrap();
    let out = dir.path().join("out");
    let err = oocpca(&[
        "pca",
        s(&path),
        "--k",
        "1",
        "--i",
        "4",
        "--out-dir",
        s(&out),
    ]);
    assert_eq!(err.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&err.stderr).contains("prescal"));
    ok(&[
        "pca",
        s(&path),
        "--k",
        "1",
        "--i",
        "4",
        "--prescale",
        "--out-dir",
        s(&out),
    ]);
    let d = diagnostics(&out);
    assert!(d["sigma"][0].as_f64().unwrap() > 1e39);
    assert_eq!(d["passes_over_a"], 10 + 12);
}

#[test]
fn transpose_flag_swaps_roles() {
    let dir = tempfile::tempdir().unwrap();
    let path = gen(dir.path(), "t.bin", &["example1", "--m", "60", "--n", "40"]);
    let out = dir.path().join("out");
    ok(&[
        "pca",
        s(&path),
        "--k",
        "3",
        "--transpose",
        "--out-dir",
        s(&out),
    ]);
    assert_eq!(read_dense(out.join("U.bin")).unwrap().shape(), (40, 3));
    assert_eq!(read_dense(out.join("V.bin")).unwrap().shape(), (60, 3));
    let d = diagnostics(&out);
    assert_eq!((d["m"].as_u64(), d["n"].as_u64()), (Some(40), Some(60)));

    let wide = dir.path().join("wide");
    ok(&[
        "pca",
        "--builtin",
        "example1",
        "--m",
        "40",
        "--n",
        "60",
        "--k",
        "3",
        "--out-dir",
        s(&wide),
    ]);
    assert_eq!(read_dense(wide.join("U.bin")).unwrap().shape(), (40, 3));
    assert_eq!(
        read_dense(wide.join("sigma.bin")).unwrap().as_slice(),
        read_dense(out.join("sigma.bin")).unwrap().as_slice()
    );
}

#[test]
fn simulated_file_recovers_directions() {
    let dir = tempfile::tempdir().unwrap();
    let path = gen(
        dir.path(),
        "sim.bin",
        &["sim", "--m", "4096", "--seed", "1"],
    );
    let out = dir.path().join("out");
    ok(&[
        "pca",
        s(&path),
        "--k",
        "3",
        "--i",
        "1",
        "--seed",
        "1",
        "--out-dir",
        s(&out),
    ]);
    let v = read_dense(out.join("V.bin")).unwrap();
    let w = SimulationGenerator::new(SimulationSpec::standard(4096, 1))
        .unwrap()
        .directions()
        .clone();
    let corr: Vec<f64> = (0..3)
        .map(|j| {
            v.column(j)
                .iter()
                .zip(&w[j])
                .map(|(a, b)| a * b)
                .sum::<f64>()
                .abs()
        })
        .collect();
    assert!(
        corr[0] >= 0.9 && corr[1] >= 0.9 && corr[2] >= 0.8,
        "{corr:?}"
    );
}

#[test]
fn bench_table2_rows() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("t2.csv");
    ok(&[
        "bench",
        "table2",
        "--scale",
        "0.01",
        "--out",
        s(&csv_path),
        "--work-dir",
        s(dir.path()),
    ]);
    let mut rdr = csv::Reader::from_path(&csv_path).unwrap();
    let headers = rdr.headers().unwrap().clone();
    assert_eq!(
        headers.iter().collect::<Vec<_>>(),
        ["table", "storage", "m", "n", "k", "t_gen", "t_PCA", "eps0", "eps"]
    );
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 6);
    for r in &rows {
        let eps0: f64 = r[7].parse().unwrap();
        let eps: f64 = r[8].parse().unwrap();
        assert!(eps / eps0 >= 0.5 && eps / eps0 <= 2.0, "{r:?}");
        assert!(!r[1].is_empty());
        assert_eq!(r[5].is_empty(), &r[1] == "fly");
    }
    let dims: Vec<(&str, &str)> = rows.iter().step_by(2).map(|r| (&r[2], &r[3])).collect();
    assert_eq!(dims, [("2000", "2000"), ("2000", "200"), ("5000", "800")]);
    // scratch files are gone
    assert!(std::fs::read_dir(dir.path())
        .unwrap()
        .all(|e| e.unwrap().path() == csv_path));
}

#[test]
fn bench_fig1_trend() {
    let dir = tempfile::tempdir().unwrap();
    let csv_path = dir.path().join("f1.csv");
    ok(&[
        "bench",
        "fig1",
        "--scale",
        "0.25",
        "--repeats",
        "1",
        "--out",
        s(&csv_path),
    ]);
    let mut rdr = csv::Reader::from_path(&csv_path).unwrap();
    let rows: Vec<Vec<f64>> = rdr
        .records()
        .map(|r| r.unwrap().iter().map(|x| x.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 5);
    assert_eq!(
        rows.iter().map(|r| r[0] as usize).collect::<Vec<_>>(),
        [1024, 2048, 4096, 8192, 16384]
    );
    for col in 4..7 {
        let ups = rows.windows(2).filter(|w| w[1][col] >= w[0][col]).count();
        assert!(ups * 2 > rows.len() - 1, "column {col}: {rows:?}");
    }
}
