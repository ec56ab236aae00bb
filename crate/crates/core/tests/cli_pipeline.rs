use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn eelab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_eelab")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

fn run(mode: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![mode, "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    eelab(&args)
}

fn column(csv: &str, name: &str) -> Vec<String> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(csv.as_bytes());
    let i = rdr.headers().unwrap().iter().position(|h| h == name).unwrap();
    rdr.records().map(|r| r.unwrap()[i].to_string()).collect()
}

const FREE: &str = "[physics]\ndimension = 1\nfermi_energy = 1.0\nscales = [25.0, 50.0, 100.0, 200.0]\n";

#[test]
fn free_sweep_rows_and_reproducibility() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "free.toml", FREE);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let out = run("sweep-free", &cfg, &a, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(run("sweep-free", &cfg, &b, &["--threads", "1"]).status.success());
    let csv_a = std::fs::read_to_string(a.join("results.csv")).unwrap();
    let csv_b = std::fs::read_to_string(b.join("results.csv")).unwrap();
    assert_eq!(csv_a, csv_b);
    assert!(csv_a.starts_with("# schema=1\n"));
    let s: Vec<f64> = column(&csv_a, "entropy_nats").iter().map(|v| v.parse().unwrap()).collect();
    assert_eq!(s.len(), 4);
    assert!(s.windows(2).all(|w| w[1] > w[0]));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["mode"], "sweep-free");
    assert!(summary["elapsed_seconds"].as_f64().is_some());
    assert!(a.join("series.dat").exists());
}

#[test]
fn missing_energy_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.toml", "[physics]\nscales = [10.0, 20.0]\n");
    let out = run("sweep-free", &cfg, &dir.path().join("o"), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("fermi_energy"));
    assert!(!dir.path().join("o").exists());
}

#[test]
fn conflicting_mode_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "m.toml", "mode = \"fit\"\n");
    let out = run("green-decay", &cfg, &dir.path().join("o"), &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mode"));
}

#[test]
fn print_config_makes_defaults_explicit() {
    let out = eelab(&["riesz-check", "--print-config"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let parsed: toml::Value = toml::from_str(&text).unwrap();
    assert_eq!(parsed["mode"].as_str(), Some("riesz-check"));
    assert_eq!(parsed["riesz"]["max_solves"].as_integer(), Some(10_000));
}

#[test]
fn small_inequality_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "ineq.toml",
        "seed = 1\n[inequalities]\nscalar_points = 2000\nlog_sum_axis = 50\nmatrix_pairs = 20\nmatrix_size = 8\n",
    );
    let out = run("verify-inequalities", &cfg, &dir.path().join("o"), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let csv = std::fs::read_to_string(dir.path().join("o/results.csv")).unwrap();
    assert!(column(&csv, "passed").iter().all(|v| v == "true"));
}

#[test]
fn numerical_failures_become_error_rows() {
    let dir = tempfile::tempdir().unwrap();
    // Spacing 1 violates the lattice dispersion limit at E = 1 for every L.
    let cfg = write_config(
        dir.path(),
        "p.toml",
        "[physics]\nfermi_energy = 1.0\nscales = [5.0, 10.0]\n[lattice]\nspacing = 1.0\n\
         [potential]\nkind = \"square-well\"\nsupport_radius = 1.0\namplitude = 1.0\n",
    );
    let out = run("sweep-perturbed", &cfg, &dir.path().join("o"), &[]);
    assert_eq!(out.status.code(), Some(1));
    let csv = std::fs::read_to_string(dir.path().join("o/results.csv")).unwrap();
    assert!(column(&csv, "status").iter().all(|s| s.starts_with("error")));
}

#[test]
fn compare_free_and_unperturbed_lattice() {
    let dir = tempfile::tempdir().unwrap();
    let scales = "scales = [8.0, 16.0, 32.0]\n";
    let free = write_config(dir.path(), "f.toml", &format!("[physics]\nfermi_energy = 1.0\n{scales}"));
    let flat = write_config(
        dir.path(),
        "z.toml",
        &format!(
            "[physics]\nfermi_energy = 1.0\n{scales}[lattice]\nspacing = 0.1\nbuffer_ratio = 4.0\n\
             [potential]\nkind = \"square-well\"\nsupport_radius = 1.0\namplitude = 0.0\n"
        ),
    );
    assert!(run("sweep-free", &free, &dir.path().join("f"), &[]).status.success());
    // Fewer than four points: fits are skipped and their checks fail, but every run is ok.
    let lat = run("sweep-perturbed", &flat, &dir.path().join("z"), &[]);
    let csv = std::fs::read_to_string(dir.path().join("z/results.csv")).unwrap();
    assert!(column(&csv, "status").iter().all(|s| s == "ok"), "{}", String::from_utf8_lossy(&lat.stdout));
    for v in column(&csv, "cross_term_hs") {
        assert!(v.parse::<f64>().unwrap() < 1e-6);
    }

    let same = eelab(&["compare", dir.path().join("f/results.csv").to_str().unwrap(), dir.path().join("f/results.csv").to_str().unwrap()]);
    assert!(same.status.success());
    let report_dir = dir.path().join("cmp");
    let cross = eelab(&[
        "compare",
        dir.path().join("f/results.csv").to_str().unwrap(),
        dir.path().join("z/results.csv").to_str().unwrap(),
        "--out",
        report_dir.to_str().unwrap(),
    ]);
    assert!(cross.status.success(), "{}", String::from_utf8_lossy(&cross.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(report_dir.join("compare.json")).unwrap()).unwrap();
    let entropy = report["columns"].as_array().unwrap().iter().find(|c| c["column"] == "entropy_nats").unwrap();
    // Same operator up to lattice discretization and the finite box.
    let s_free: Vec<f64> = column(&std::fs::read_to_string(dir.path().join("f/results.csv")).unwrap(), "entropy_nats")
        .iter()
        .map(|v| v.parse().unwrap())
        .collect();
    for (d, s) in entropy["deltas"].as_array().unwrap().iter().zip(&s_free) {
        assert!(d.as_f64().unwrap().abs() < 0.03 * s, "{entropy}");
    }

    let short = write_config(dir.path(), "s.toml", "[physics]\nfermi_energy = 1.0\nscales = [8.0]\n");
    assert!(run("sweep-free", &short, &dir.path().join("s"), &[]).status.success());
    let mismatch = eelab(&["compare", dir.path().join("f/results.csv").to_str().unwrap(), dir.path().join("s/results.csv").to_str().unwrap()]);
    assert_eq!(mismatch.status.code(), Some(2));
}

#[test]
fn fit_from_input_file() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("# schema=1\nscale,entropy_bits,status\n");
    for l in [25.0f64, 50.0, 100.0, 200.0, 400.0] {
        csv.push_str(&format!("{l},{},ok\n", (l.ln() / 3.0 + 0.9) / std::f64::consts::LN_2));
    }
    std::fs::write(dir.path().join("in.csv"), csv).unwrap();
    let cfg = write_config(
        dir.path(),
        "fit.toml",
        "[physics]\nfermi_energy = 1.0\n[fit]\ninput = \"in.csv\"\nlog_base = \"nats\"\n",
    );
    let out = run("fit", &cfg, &dir.path().join("o"), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("o/summary.json")).unwrap()).unwrap();
    let sigma = summary["details"]["fits"]["joint"]["sigma_hat"].as_f64().unwrap();
    assert!((sigma - 1.0 / 3.0).abs() < 1e-10);
}

#[test]
fn green_decay_and_riesz_defaults_pass() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "g.toml", "");
    assert!(run("green-decay", &cfg, &dir.path().join("g"), &[]).status.success());
    let r = write_config(dir.path(), "r.toml", "[riesz]\ngapped_cases = 3\nchain_sites = 100\n");
    let out = run("riesz-check", &r, &dir.path().join("r"), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
}
