use std::path::Path;
use std::process::{Command, Output};

const TAS: &str = r#"
[geometry]
near = { n1 = 1, n2 = 1, w1 = 0.0, w2 = 0.0 }
far = { n1 = 1, n2 = 1, w1 = 0.0, w2 = 0.0 }
eve = { n1 = 1, n2 = 1, w1 = 0.0, w2 = 0.0 }

[snr]
e_db = 0.0

[sweep]
start = 0.0
stop = 20.0
points = 3
"#;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_fas-secrecy"));
    c.env_remove("FASSEC_SEED");
    c
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let p = dir.join("run.toml");
    std::fs::write(&p, text).unwrap();
    p
}

fn run(args: &[&str], config: &Path) -> Output {
    bin().arg("--config").arg(config).args(args).output().unwrap()
}

fn table(out: &Output) -> (Vec<String>, Vec<Vec<String>>) {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout.clone()).unwrap();
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let header = rdr.headers().unwrap().iter().map(str::to_string).collect();
    let rows = rdr
        .records()
        .map(|r| r.unwrap().iter().map(str::to_string).collect())
        .collect();
    (header, rows)
}

fn column(header: &[String], rows: &[Vec<String>], name: &str) -> Vec<f64> {
    let i = header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    rows.iter().map(|r| r[i].parse().unwrap()).collect()
}

#[test]
fn sop_ext_writes_csv_to_stdout() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TAS);
    let out = run(&["sop-ext"], &cfg);
    let (header, rows) = table(&out);
    assert_eq!(header[0], "sweep_value_db");
    assert_eq!(header[1], "sop_ext_near_analytic");
    assert_eq!(rows.len(), 3);
    let sop = column(&header, &rows, "sop_ext_near_analytic");
    assert!(sop.iter().all(|&p| (0.0..=1.0).contains(&p)));
    assert!(sop[0] > sop[2]);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("event=sweep"), "{stderr}");
}

#[test]
fn bad_config_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[sweep]\npoints = 1\n");
    let out = run(&["sop-ext"], &cfg);
    assert_eq!(out.status.code(), Some(2));
    let cfg = write_config(dir.path(), "[nonsense]\nx = 1\n");
    assert_eq!(run(&["sop-ext"], &cfg).status.code(), Some(2));
    let cfg = write_config(dir.path(), TAS);
    assert_eq!(run(&["sop-ext", "--variable", "volume"], &cfg).status.code(), Some(2));
    assert_eq!(run(&["sop-ext", "--samples", "5"], &cfg).status.code(), Some(2));
}

#[test]
fn missing_config_file_is_an_io_error() {
    let out = bin().args(["--config", "/nonexistent/run.toml", "sop-ext"]).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn literal_asc_far_flag_touches_only_far_asc() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TAS);
    let far = table(&run(&["asc-ext", "--user", "far"], &cfg));
    let far_lit = table(&run(&["asc-ext", "--user", "far", "--paper-literal-asc-far"], &cfg));
    assert_eq!(far.0[0], "sweep_value_db");
    let a = column(&far.0, &far.1, "asc_ext_far_analytic");
    let b = column(&far_lit.0, &far_lit.1, "asc_ext_far_analytic");
    assert!(a.iter().zip(&b).any(|(x, y)| x != y));

    let near = table(&run(&["asc-ext"], &cfg));
    let near_lit = table(&run(&["asc-ext", "--paper-literal-asc-far"], &cfg));
    assert_eq!(near.1, near_lit.1);
}

#[test]
fn monte_carlo_columns_are_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TAS);
    let args = ["sop-ext", "--samples", "20000", "--seed", "9"];
    let a = table(&run(&args, &cfg));
    let b = table(&run(&args, &cfg));
    assert_eq!(a.1, b.1);
    let mc = column(&a.0, &a.1, "sop_ext_near_mc");
    let err = column(&a.0, &a.1, "sop_ext_near_mc_stderr");
    let an = column(&a.0, &a.1, "sop_ext_near_analytic");
    for i in 0..mc.len() {
        assert!((mc[i] - an[i]).abs() <= 5.0 * err[i] + 1e-3, "row {i}: {} vs {}", mc[i], an[i]);
    }
    let c = table(&run(&["sop-ext", "--samples", "20000", "--seed", "10"], &cfg));
    assert_ne!(a.1, c.1);
}

#[test]
fn output_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), TAS);
    let path = dir.path().join("sop.csv");
    let out = bin()
        .arg("--config")
        .arg(&cfg)
        .arg("-o")
        .arg(&path)
        .args(["sop-int", "--precision", "4"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let text = std::fs::read_to_string(&path).unwrap();
    assert!(text.starts_with("sweep_value_db,sop_int_near_analytic,"));
    assert_eq!(text.lines().count(), 4);
}

#[test]
fn quad_table_lists_rule() {
    let out = bin().args(["quad-table", "--kind", "legendre", "--order", "5"]).output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let weights: f64 = text
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(2).unwrap().parse::<f64>().unwrap())
        .sum();
    assert_eq!(text.lines().count(), 6);
    assert!((weights - 2.0).abs() < 1e-14);
    assert_eq!(bin().args(["quad-table", "--order", "0"]).output().unwrap().status.code(), Some(2));
}

#[test]
fn dist_table_single_port() {
    let out = bin()
        .args(["dist-table", "--n1", "1", "--n2", "1", "--w1", "0", "--w2", "0", "--points", "3"])
        .output()
        .unwrap();
    let (header, rows) = table(&out);
    assert_eq!(rows.len(), 3);
    let a = column(&header, &rows, "cdf_single_port");
    let b = column(&header, &rows, "cdf_fas");
    for (x, y) in a.iter().zip(&b) {
        assert!((x - y).abs() < 1e-12);
    }
}
