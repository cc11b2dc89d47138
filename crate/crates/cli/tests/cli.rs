use std::process::{Command, Output};

fn aloha(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_aloha")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Parses CSV output into (header, rows).
fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<String>>) {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let header = rd.headers().unwrap().iter().map(String::from).collect();
    let rows = rd.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

fn col(header: &[String], name: &str) -> usize {
    header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"))
}

fn num(s: &str) -> f64 {
    s.parse().unwrap_or_else(|_| panic!("not a number: {s:?}"))
}

#[test]
fn limits_for_binary_backoff() {
    let o = aloha(&["limits", "--r", "2", "--n", "inf"]);
    assert!(o.status.success());
    let (h, rows) = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 1);
    let row = &rows[0];
    assert!((num(&row[col(&h, "s_sat")]) - 0.3466).abs() < 5e-5);
    assert!((num(&row[col(&h, "s_sbmd")]) - 0.2158).abs() < 5e-5);
    assert!((num(&row[col(&h, "g_sat")]) - 2f64.ln()).abs() < 1e-11);
    assert_eq!(row[col(&h, "binding")], "bbmd-binding");
}

#[test]
fn sweep_r_peaks_near_optimal_factor() {
    let o = aloha(&["sweep-r", "--n", "inf"]);
    assert!(o.status.success());
    let (h, rows) = csv_rows(&stdout(&o));
    let (ir, is) = (col(&h, "r"), col(&h, "s_sbmd"));
    let best = rows.iter().max_by(|a, b| num(&a[is]).total_cmp(&num(&b[is]))).unwrap();
    assert!((num(&best[ir]) - 1.3757).abs() <= 0.005, "argmax {}", best[ir]);
    assert!((num(&best[is]) - 0.3545).abs() < 5e-4, "max {}", best[is]);
    let rs: Vec<f64> = rows.iter().map(|r| num(&r[ir])).collect();
    assert_eq!(rs.first(), Some(&1.05));
    assert_eq!(rs.last(), Some(&3.0));
}

#[test]
fn curve_marks_special_points() {
    let o = aloha(&["curve", "--r", "2", "--n", "10", "--offered-load", "0.3"]);
    assert!(o.status.success());
    let (h, rows) = csv_rows(&stdout(&o));
    let ip = col(&h, "point");
    for label in ["saturation", "bbmd", "operating-left", "operating-right"] {
        assert_eq!(rows.iter().filter(|r| r[ip] == label).count(), 1, "{label}");
    }
    let g = |label: &str| num(&rows.iter().find(|r| r[ip] == label).unwrap()[col(&h, "g")]);
    assert!(g("operating-left") < 1.0 && g("operating-right") > 1.0);
}

#[test]
fn jump_open_load_rate_is_below_saturated_rate() {
    let o = aloha(&[
        "jump", "--r0", "10", "--n", "20", "--r-min", "1.04", "--r-max", "1.2", "--step", "0.02", "--slots", "200000",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (h, rows) = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 18);
    let ig = col(&h, "measured_g");
    for pair in rows.chunks(2) {
        assert_eq!(pair[0][col(&h, "phase")], "saturated");
        assert_eq!(pair[1][col(&h, "phase")], "open");
        assert!(num(&pair[0][ig]) > 1.0, "saturated G {}", pair[0][ig]);
        assert!(num(&pair[1][ig]) < 1.0, "open G {}", pair[1][ig]);
    }
}

#[test]
fn delay_curve_reports_dispersion() {
    let o = aloha(&[
        "delay-curve", "--r", "2", "--n", "10", "--s-min", "0.1", "--s-max", "0.2", "--step", "0.1", "--slots", "100000",
        "--reps", "3",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (h, rows) = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 2);
    for r in &rows {
        assert_eq!(r[col(&h, "reps")], "3");
        assert!(num(&r[col(&h, "sim_sd")]) > 0.0);
        let (a, m) = (num(&r[col(&h, "analytic_mean_delay")]), num(&r[col(&h, "sim_mean_delay")]));
        assert!((m - a).abs() / a < 0.25, "analytic {a} simulated {m}");
    }
    let bad = aloha(&["delay-curve", "--r", "2", "--n", "10", "--s-min", "0.3", "--s-max", "0.5", "--step", "0.1"]);
    assert_eq!(bad.status.code(), Some(3));
}

#[test]
fn simulate_writes_raw_trace() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let o = aloha(&[
        "simulate",
        "--r",
        "2",
        "--n",
        "5",
        "--offered-load",
        "0.1",
        "--slots",
        "20000",
        "--trace",
        trace.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (h, rows) = csv_rows(&std::fs::read_to_string(&trace).unwrap());
    assert_eq!(h, ["node_id", "arrival_time", "departure_time", "service_slots", "final_stage"]);
    assert!(rows.len() > 1000);
    for r in &rows {
        assert!(num(&r[2]) > num(&r[1]));
    }
    let (sh, sum) = csv_rows(&stdout(&o));
    assert_eq!(num(&sum[0][col(&sh, "departures")]) as usize, rows.len());
}

#[test]
fn exit_codes() {
    let missing = aloha(&["limits", "--n", "10"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("--r"));

    assert_eq!(aloha(&["limits", "--r", "0.9"]).status.code(), Some(2));
    assert_eq!(aloha(&["limits", "--r", "2", "--n", "1"]).status.code(), Some(2));
    assert_eq!(aloha(&["simulate", "--r", "2", "--n", "inf"]).status.code(), Some(2));
    assert_eq!(aloha(&["frobnicate"]).status.code(), Some(2));

    let infeasible = aloha(&["simulate", "--r", "2", "--n", "10", "--offered-load", "0.9"]);
    assert_eq!(infeasible.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&infeasible.stderr).contains("0.9"));
    assert!(stdout(&infeasible).is_empty());

    let help = aloha(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
    assert!(stdout(&help).contains("starvation"));
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.conf");
    std::fs::write(&cfg, "# binary backoff\nr = 2\nn = inf\nr0 = 5\n").unwrap();
    let path = cfg.to_str().unwrap();

    let (h, rows) = csv_rows(&stdout(&aloha(&["limits", "--config", path])));
    assert_eq!(num(&rows[0][col(&h, "r")]), 2.0);
    assert_eq!(num(&rows[0][col(&h, "r0")]), 5.0);

    let (h, rows) = csv_rows(&stdout(&aloha(&["limits", "--config", path, "--r", "3"])));
    assert_eq!(num(&rows[0][col(&h, "r")]), 3.0);
    assert_eq!(rows[0][col(&h, "n")], "inf");

    std::fs::write(&cfg, "r = 2\nbogus = 1\n").unwrap();
    let bad = aloha(&["limits", "--config", path]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("bogus"));
}

#[test]
fn csv_round_trips_to_twelve_digits() {
    let o = aloha(&["limits", "--r", "1.2", "--n", "10"]);
    let (h, rows) = csv_rows(&stdout(&o));
    let crit = num(&rows[0][col(&h, "critical_n")]);
    assert!((crit - 22.138080578194988).abs() <= 1e-10);
    let pc = num(&rows[0][col(&h, "p_c_sat")]);
    assert!(pc > 0.0 && pc < 1.0 / 1.2);
}

#[test]
fn json_output_carries_metadata() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("limits.json");
    let o = aloha(&[
        "limits",
        "--r",
        "2",
        "--n",
        "inf",
        "--format",
        "json",
        "--seed",
        "42",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).is_empty());
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(v["metadata"]["seed"], 42);
    assert_eq!(v["metadata"]["spec"]["command"], "limits");
    assert!(v["metadata"]["version"].is_string());
    assert_eq!(v["columns"][0], "r0");
    let s = v["records"][0]["s_sat"].as_f64().unwrap();
    assert!((s - 0.5 * 2f64.ln()).abs() < 1e-11);
}

#[test]
fn starvation_scores_report() {
    let o = aloha(&["starvation", "--r", "1.2", "--n", "10", "--np", "2000", "--reps", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (h, rows) = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 4);
    let all = rows.last().unwrap();
    assert_eq!(all[0], "all");
    assert_eq!(all[col(&h, "analytic_non_starved")], "true");
    assert!(["starved", "non-starved", "indeterminate"].contains(&all[col(&h, "flag")].as_str()));
    assert!((num(&all[col(&h, "critical_n")]) - 22.1380805782).abs() < 1e-9);
}

#[test]
fn starvation_with_too_few_replications_is_rejected() {
    let o = aloha(&["starvation", "--r", "1.2", "--n", "10", "--np", "100", "--reps", "2"]);
    assert_eq!(o.status.code(), Some(2));
}
