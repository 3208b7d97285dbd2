use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn revind(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_revind")).args(args).output().expect("run revind")
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn data_rows(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn header_value(path: &Path, key: &str) -> Option<String> {
    let prefix = format!("# {key}: ");
    fs::read_to_string(path).unwrap().lines().find_map(|l| l.strip_prefix(&prefix).map(str::to_string))
}

#[test]
fn orbit_error_writes_series_with_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rev.csv");
    let o = revind(&[
        "orbit-error",
        "--map",
        "translation",
        "--param",
        "omega=0.41421356237309503",
        "--x0",
        "0.7",
        "--n",
        "100",
        "--indicator",
        "rev",
        "--spec",
        "single",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(data_rows(&out).len(), 100);
    assert_eq!(header_value(&out, "map").unwrap(), "translation omega=0.41421356237309503");
    assert_eq!(header_value(&out, "spec").unwrap(), "single");
    assert!(header_value(&out, "revind").is_some());
}

#[test]
fn exact_reversibility_is_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rev.csv");
    let o = revind(&[
        "orbit-error",
        "--map",
        "standard",
        "--param",
        "lambda=0.5",
        "--x0",
        "1,2",
        "--n",
        "20",
        "--indicator",
        "rev",
        "--spec",
        "exact",
        "--checkpoints",
        "20",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = data_rows(&out);
    assert_eq!(rows, vec![vec!["20".to_string(), "0.0000000000000000e0".into(), "-inf".into()]]);
}

#[test]
fn divergence_and_global_error() {
    let dir = tempfile::tempdir().unwrap();
    let div = dir.path().join("div.csv");
    let o = revind(&[
        "orbit-error",
        "--map",
        "bernoulli",
        "--param",
        "q=2",
        "--x0",
        "0.3",
        "--n",
        "40",
        "--indicator",
        "div",
        "--spec",
        "single",
        "--ref-spec",
        "double",
        "--out",
        div.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(header_value(&div, "ref-spec").unwrap(), "double");

    let g = dir.path().join("g.csv");
    let o = revind(&[
        "orbit-error",
        "--map",
        "translation",
        "--param",
        "omega=0.3",
        "--x0",
        "0.1",
        "--n",
        "50",
        "--indicator",
        "global",
        "--out",
        g.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&g).unwrap();
    assert!(text.contains("n,G,ln_G,w"));
    assert!(text.contains("# drift G_N/N:"));
}

#[test]
fn variational_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("megno.csv");
    let o = revind(&[
        "variational",
        "--map",
        "standard",
        "--param",
        "lambda=0.0001",
        "--x0",
        "1,1",
        "--n",
        "50",
        "--indicator",
        "megno",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(fs::read_to_string(&out).unwrap().contains("n,Y,Ybar"));
    assert_eq!(data_rows(&out).len(), 50);

    let out = dir.path().join("mlce.csv");
    let o = revind(&[
        "variational",
        "--map",
        "bernoulli",
        "--param",
        "q=3",
        "--x0",
        "0.2",
        "--n",
        "100",
        "--indicator",
        "mlce",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0);
    let last: f64 = data_rows(&out).last().unwrap()[1].parse().unwrap();
    assert!((last - 3f64.ln()).abs() < 1e-12);
}

#[test]
fn ensemble_reports_fits() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ens.csv");
    let o = revind(&[
        "ensemble",
        "--map",
        "skew",
        "--region",
        "0.2:0.201,0.5:0.501",
        "--count",
        "200",
        "--mode",
        "noise",
        "--amplitude",
        "1e-7",
        "--seed",
        "3",
        "--n",
        "200",
        "--fit-window",
        "20:200",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.contains("n,sigma2_x,sigma2_y"));
    assert!(text.contains("# fit sigma2_y: exponent"));
    assert_eq!(header_value(&out, "seed").unwrap(), "3");
    let noise = revind(&[
        "ensemble",
        "--map",
        "skew",
        "--region",
        "0:1,0:1",
        "--count",
        "10",
        "--mode",
        "noise",
        "--n",
        "5",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code(&noise), 2);
}

#[test]
fn scan_then_section() {
    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("std");
    let grid = "x:0:6.283185307179586:12,y:0:6.283185307179586:10";
    let o = revind(&[
        "scan",
        "--map",
        "standard",
        "--param",
        "lambda=0.971635",
        "--grid",
        grid,
        "--n",
        "50",
        "--indicator",
        "rev",
        "--norm",
        "action",
        "--spec",
        "single",
        "--workers",
        "2",
        "--out",
        prefix.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let csv = dir.path().join("std.csv");
    let pgm = fs::read(dir.path().join("std.pgm")).unwrap();
    assert!(pgm.starts_with(b"P5\n12 10\n255\n"));
    let json: String = fs::read_to_string(dir.path().join("std.json")).unwrap();
    assert!(json.contains("\"version\""));

    let sec = dir.path().join("sec.csv");
    let o = revind(&[
        "section",
        "--in",
        csv.to_str().unwrap(),
        "--axis",
        "y",
        "--value",
        "0.3",
        "--out",
        sec.to_str().unwrap(),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = data_rows(&sec);
    assert_eq!(rows.len(), 12);
    let matrix = data_rows_matrix(&csv);
    let row0: Vec<String> = rows.iter().map(|r| r[1].clone()).collect();
    assert_eq!(row0, matrix[0]);
}

fn data_rows_matrix(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn scan_is_identical_across_worker_counts() {
    let dir = tempfile::tempdir().unwrap();
    let run = |w: &str| {
        let prefix = dir.path().join(format!("w{w}"));
        let o = revind(&[
            "scan",
            "--map",
            "froeschle",
            "--param",
            "c=2,mu=0.6",
            "--grid",
            "I:0:3.6:6,J:0:3.6:5",
            "--fixed",
            "theta=0.5,phi=0.5",
            "--n",
            "30",
            "--indicator",
            "div",
            "--workers",
            w,
            "--out",
            prefix.to_str().unwrap(),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        data_rows_matrix(&dir.path().join(format!("w{w}.csv")))
    };
    assert_eq!(run("1"), run("3"));
}

#[test]
fn config_file_supplies_missing_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    let out = dir.path().join("cfg.csv");
    fs::write(
        &cfg,
        format!(
            "# orbit run\nmap=standard\nparam=lambda=0.2\nx0=0.5,0.5\nn=30\nindicator=rev\nspec=single\nout={}\n",
            out.display()
        ),
    )
    .unwrap();
    let o = revind(&["orbit-error", "--config", cfg.to_str().unwrap(), "--n", "7", "--spec", "double"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(data_rows(&out).len(), 7);
    assert_eq!(header_value(&out, "spec").unwrap(), "double");
    assert_eq!(header_value(&out, "map").unwrap(), "standard lambda=0.2");
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("x.csv");
    let out = out.to_str().unwrap();
    // usage
    assert_eq!(code(&revind(&["orbit-error", "--map", "standard"])), 2);
    assert_eq!(code(&revind(&["bogus"])), 2);
    assert_eq!(code(&revind(&["orbit-error", "--map", "nope", "--x0", "1", "--n", "1", "--out", out])), 2);
    assert_eq!(
        code(&revind(&["orbit-error", "--map", "skew", "--x0", "0.1,0.1", "--n", "1", "--spec", "quad", "--out", out])),
        2
    );
    // numeric / domain
    assert_eq!(
        code(&revind(&[
            "orbit-error",
            "--map",
            "bernoulli",
            "--param",
            "q=2",
            "--x0",
            "0.1",
            "--n",
            "5",
            "--out",
            out
        ])),
        3
    );
    assert_eq!(
        code(&revind(&[
            "variational",
            "--map",
            "standard",
            "--param",
            "lambda=-1",
            "--x0",
            "1,1",
            "--n",
            "5",
            "--indicator",
            "mlce",
            "--out",
            out
        ])),
        3
    );
    assert_eq!(
        code(&revind(&[
            "scan",
            "--map",
            "skew",
            "--grid",
            "x:0:1:100,y:0:1:100",
            "--n",
            "1",
            "--indicator",
            "rev",
            "--max-cells",
            "10",
            "--out",
            out,
        ])),
        3
    );
    // I/O
    assert_eq!(
        code(&revind(&["section", "--in", "/nonexistent/scan.csv", "--axis", "y", "--value", "0", "--out", out])),
        4
    );
    assert_eq!(code(&revind(&["orbit-error", "--config", "/nonexistent/run.cfg"])), 4);
    assert!(revind(&["--help"]).status.success());
}
