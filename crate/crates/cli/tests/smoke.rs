use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rals(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rals"))
        .current_dir(dir)
        .env_remove("SOURCE_DATE_EPOCH")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) {
    assert!(out.status.success(), "status {:?}\nstderr: {}", out.status, String::from_utf8_lossy(&out.stderr));
}

/// `u ≡ 3` sampled at deterministic pseudo-random points of `[-1, 1]^3`.
fn constant_fixture(path: &Path, n: usize, offset: usize) {
    let mut s = String::from("y_1,y_2,y_3,u\n");
    for i in 0..n {
        let c = |k: usize| (((i + offset) * 7919 + k * 104_729) % 2000) as f64 / 1000.0 - 1.0 + 0.0004 * k as f64;
        s += &format!("{},{},{},3\n", c(1), c(2), c(3));
    }
    fs::write(path, s).unwrap();
}

fn data_lines(text: &str) -> Vec<&str> {
    text.lines().filter(|l| !l.starts_with('#')).collect()
}

#[test]
fn recover_constant_target() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    constant_fixture(&p.join("s.csv"), 200, 0);
    constant_fixture(&p.join("t.csv"), 100, 5000);
    fs::write(p.join("c.cfg"), "[recovery]\nalgorithm = r2als\ndimension = 4\nmax_sweeps = 10\n").unwrap();
    let out = rals(p, &["recover", "--config", "c.cfg", "--samples", "s.csv", "--test", "t.csv", "--out", "model.tt"]);
    ok(&out);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(p.join("model.tt.report.json")).unwrap()).unwrap();
    let e = report["report"]["test_error"].as_f64().unwrap();
    assert!(e < 1e-8, "test error {e:e}");
    assert_eq!(report["manifest"]["subcommand"], "recover");
    let tt: serde_json::Value = serde_json::from_str(&fs::read_to_string(p.join("model.tt")).unwrap()).unwrap();
    assert_eq!(tt["format"], "rals-tt");
    assert_eq!(tt["dims"], serde_json::json!([4, 4, 4]));
    // the written train loads back through the library
    let train = rals::tensor::TensorTrain::load(&p.join("model.tt")).unwrap();
    assert_eq!(train.order(), 3);
}

#[test]
fn variation_sweep_rows_and_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let out = rals(dir.path(), &["variation", "--d", "2,4,8", "--r", "1e-3,1,1e3", "--grid", "41", "--out", "v.csv"]);
    ok(&out);
    let text = fs::read_to_string(dir.path().join("v.csv")).unwrap();
    let rows = data_lines(&text);
    assert_eq!(rows[0], "d,r,K_estimate");
    assert_eq!(rows.len(), 10);
    for row in &rows[1..] {
        let f: Vec<f64> = row.split(',').map(|x| x.parse().unwrap()).collect();
        assert!(f[2] >= 1.0 && f[2] <= f[0] * f[0] * (1.0 + 1e-12), "{row}");
    }
}

#[test]
fn malformed_csv_exits_with_two_and_row_number() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("bad.csv"), "y_1,u\n0.1,1.0\n0.2,oops\n").unwrap();
    let out = rals(dir.path(), &["recover", "--samples", "bad.csv", "--out", "m.tt"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(!dir.path().join("m.tt").exists());
}

#[test]
fn bad_config_reports_its_line() {
    let dir = tempfile::tempdir().unwrap();
    constant_fixture(&dir.path().join("s.csv"), 20, 0);
    fs::write(dir.path().join("c.cfg"), "[rank]\nmax_rank = 3\ntheta = abc\n").unwrap();
    let out = rals(dir.path(), &["recover", "--config", "c.cfg", "--samples", "s.csv", "--out", "m.tt"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

#[test]
fn missing_input_is_an_io_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = rals(dir.path(), &["recover", "--samples", "nope.csv", "--out", "m.tt"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn darcy_samples_feed_recovery() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let gen = rals(
        p,
        &[
            "darcy-gen",
            "--model",
            "affine",
            "--count",
            "40",
            "--grid",
            "16",
            "--parameters",
            "3",
            "--seed",
            "2",
            "--out",
            "d.csv",
        ],
    );
    ok(&gen);
    let text = fs::read_to_string(p.join("d.csv")).unwrap();
    assert!(text.starts_with("# rals "));
    assert_eq!(data_lines(&text)[0], "y_1,y_2,y_3,u");
    fs::write(p.join("c.cfg"), "dimension = 3\nmax_sweeps = 3\ncv_folds = 4\n").unwrap();
    ok(&rals(p, &["recover", "--config", "c.cfg", "--samples", "d.csv", "--out", "m.tt"]));
    let lognormal = rals(p, &["darcy-gen", "--model", "lognormal", "--count", "3", "--grid", "8"]);
    ok(&lognormal);
    let stdout = String::from_utf8(lognormal.stdout).unwrap();
    assert_eq!(data_lines(&stdout).len(), 4);
    assert!(stdout.contains("sampling=gaussian"));
}

#[test]
fn phase_diagram_and_spectrum_with_svg() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(p.join("c.cfg"), "max_sweeps = 3\ncv_folds = 3\n").unwrap();
    let pd = rals(
        p,
        &[
            "phase-diagram",
            "--config",
            "c.cfg",
            "--dimension",
            "3",
            "--orders",
            "1,2",
            "--samples",
            "20,40",
            "--realizations",
            "2",
            "--test-samples",
            "30",
            "--out",
            "pd.csv",
            "--svg",
            "pd.svg",
        ],
    );
    ok(&pd);
    let text = fs::read_to_string(p.join("pd.csv")).unwrap();
    assert_eq!(data_lines(&text).len(), 5);
    assert!(fs::read_to_string(p.join("pd.svg")).unwrap().contains("<svg"));
    let zero = rals(p, &["phase-diagram", "--orders", "1", "--samples", "0"]);
    assert_eq!(zero.status.code(), Some(1));

    let sp = rals(p, &["spectrum", "--d", "8", "--realizations", "3", "--out", "s.csv", "--svg", "s.svg"]);
    ok(&sp);
    let text = fs::read_to_string(p.join("s.csv")).unwrap();
    assert_eq!(data_lines(&text).len(), 1 + 3 * 2 * 8);
    assert!(fs::read_to_string(p.join("s.svg")).unwrap().contains("polyline"));
}

#[test]
fn identical_manifests_give_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    constant_fixture(&p.join("s.csv"), 60, 0);
    fs::write(p.join("c.cfg"), "dimension = 3\nmax_sweeps = 4\ncv_folds = 4\n").unwrap();
    let runs: [&[&str]; 5] = [
        &["recover", "--config", "c.cfg", "--samples", "s.csv", "--out", "OUT"],
        &["variation", "--d", "2,3", "--r", "0.5,2", "--grid", "11", "--out", "OUT"],
        &[
            "phase-diagram",
            "--dimension",
            "3",
            "--orders",
            "1",
            "--samples",
            "20",
            "--realizations",
            "2",
            "--test-samples",
            "20",
            "--out",
            "OUT",
        ],
        &["darcy-gen", "--count", "5", "--grid", "8", "--out", "OUT"],
        &["spectrum", "--d", "6", "--realizations", "4", "--out", "OUT"],
    ];
    for args in runs {
        let mut bytes = Vec::new();
        for k in 0..2 {
            // same output name both times so the manifests agree
            fs::create_dir_all(p.join(format!("run{k}"))).unwrap();
            for f in ["s.csv", "c.cfg"] {
                fs::copy(p.join(f), p.join(format!("run{k}")).join(f)).unwrap();
            }
            let args: Vec<&str> = args.iter().map(|a| if *a == "OUT" { "out.dat" } else { a }).collect();
            let mut full = vec!["--timestamp", "1700000000"];
            full.extend(args);
            ok(&rals(&p.join(format!("run{k}")), &full));
            let mut files = vec![fs::read(p.join(format!("run{k}/out.dat"))).unwrap()];
            if let Ok(r) = fs::read(p.join(format!("run{k}/out.dat.report.json"))) {
                files.push(r);
            }
            bytes.push(files);
        }
        assert_eq!(bytes[0], bytes[1], "{args:?}");
    }
}

#[test]
fn timestamp_comes_from_source_date_epoch() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_rals"))
        .current_dir(dir.path())
        .env("SOURCE_DATE_EPOCH", "12345")
        .args(["variation", "--d", "2", "--r", "1", "--grid", "5"])
        .output()
        .unwrap();
    ok(&out);
    assert!(String::from_utf8(out.stdout).unwrap().contains("# timestamp: 12345"));
}

#[test]
fn help_documents_every_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let out = rals(dir.path(), &["--help"]);
    ok(&out);
    let text = String::from_utf8(out.stdout).unwrap();
    for sub in ["recover", "variation", "phase-diagram", "darcy-gen", "spectrum", "--jobs", "Exit codes"] {
        assert!(text.contains(sub), "{sub} missing from --help");
    }
}
