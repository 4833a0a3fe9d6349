use std::collections::HashMap;
use std::path::PathBuf;
use std::process::{Command, Output};

struct Table {
    meta: HashMap<String, String>,
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn parse(text: &str) -> Table {
        let mut meta = HashMap::new();
        let mut body = String::new();
        for line in text.lines() {
            if let Some(m) = line.strip_prefix("# ") {
                let (k, v) = m.split_once(": ").unwrap();
                meta.insert(k.to_string(), v.to_string());
            } else {
                body.push_str(line);
                body.push('\n');
            }
        }
        let mut rd = csv::Reader::from_reader(body.as_bytes());
        let header = rd.headers().unwrap().iter().map(String::from).collect();
        let rows = rd.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect();
        Table { meta, header, rows }
    }

    fn col(&self, name: &str) -> Vec<f64> {
        let i = self.header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
        self.rows.iter().map(|r| r[i].parse().unwrap()).collect()
    }

    fn text(&self, name: &str) -> Vec<String> {
        let i = self.header.iter().position(|h| h == name).unwrap();
        self.rows.iter().map(|r| r[i].clone()).collect()
    }

    fn meta_num(&self, key: &str) -> f64 {
        self.meta[key].parse().unwrap()
    }
}

struct Scenario {
    _dir: tempfile::TempDir,
    config: PathBuf,
}

fn scenario(json: &str) -> Scenario {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("scenario.json");
    std::fs::write(&config, json).unwrap();
    Scenario { _dir: dir, config }
}

fn invoke(args: &[&str], s: &Scenario) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fiberqed"))
        .args(args)
        .arg("--config")
        .arg(&s.config)
        .output()
        .unwrap()
}

fn run(args: &[&str], json: &str) -> Table {
    let s = scenario(json);
    let out = invoke(args, &s);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    Table::parse(&String::from_utf8(out.stdout).unwrap())
}

fn error_of(args: &[&str], json: &str) -> (i32, serde_json::Value) {
    let s = scenario(json);
    let out = invoke(args, &s);
    let line = String::from_utf8(out.stderr).unwrap();
    let v = serde_json::from_str(line.lines().last().unwrap()).unwrap();
    (out.status.code().unwrap(), v)
}

#[test]
fn mode_profile_ratio_and_boundary_rows() {
    let t = run(&["mode"], r#"{"run":{"r_over_a_range":{"start":0.0,"stop":5.0,"points":21}}}"#);
    let r = t.col("r_over_a");
    let side = t.text("side");
    let ratio = t.col("abs_er_over_ez");
    for i in 0..r.len() {
        if side[i] == "outside" {
            assert!(ratio[i] > 1.75 && ratio[i] < 2.1, "r/a={} ratio={}", r[i], ratio[i]);
        }
    }
    // r = a appears once from each side; tangential components agree, E_r jumps by n1²
    let at_a: Vec<usize> = (0..r.len()).filter(|&i| r[i] == 1.0).collect();
    assert_eq!(at_a.len(), 2);
    let (i, o) = (at_a[0], at_a[1]);
    assert_eq!((side[i].as_str(), side[o].as_str()), ("inside", "outside"));
    let n1 = t.meta_num("fiber.n1_used");
    let er = t.col("im_e_r");
    let ephi = t.col("re_e_phi");
    let ez = t.col("re_e_z");
    assert!((er[o] / er[i] - n1 * n1).abs() < 1e-9);
    assert!((ephi[o] / ephi[i] - 1.0).abs() < 1e-9);
    assert!((ez[o] / ez[i] - 1.0).abs() < 1e-9);
    assert!(r.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn mode_metadata_has_dispersion_scalars() {
    let t = run(&["mode"], "{}");
    assert!((t.meta_num("mode.beta_over_k") - 1.14399).abs() < 1e-4);
    let vg = t.meta_num("mode.v_group_m_s") / 299_792_458.0;
    assert!((vg - 0.66335).abs() < 1e-4);
    for key in ["mode.v_phase_m_s", "mode.s", "mode.norm_c", "config", "tool", "tolerances"] {
        assert!(t.meta.contains_key(key), "{key}");
    }
    // 101 grid points, with r = a listed from both sides
    assert_eq!(t.rows.len(), 102);
}

#[test]
fn exclusive_fields_are_both_named() {
    let (code, v) = error_of(&["mode"], r#"{"array":{"n":10,"period_nm":500,"bragg_order":2}}"#);
    assert_eq!(code, 2);
    assert_eq!(v["error"], "config");
    let field = v["field"].as_str().unwrap();
    assert!(field.contains("array.period_nm") && field.contains("array.bragg_order"), "{field}");

    let (code, v) = error_of(&["mode"], r#"{"atom":{"r_minus_a_nm":200,"r_over_a":1.8}}"#);
    assert_eq!(code, 2);
    let field = v["field"].as_str().unwrap();
    assert!(field.contains("atom.r_minus_a_nm") && field.contains("atom.r_over_a"), "{field}");
}

#[test]
fn unknown_keys_and_bad_values_are_rejected() {
    let (code, v) = error_of(&["mode"], r#"{"fibre":{}}"#);
    assert_eq!(code, 2);
    assert!(v["message"].as_str().unwrap().contains("fibre"));

    let (code, v) = error_of(&["mode"], r#"{"fiber":{"radius_nm":-5}}"#);
    assert_eq!(code, 2);
    assert_eq!(v["field"], "fiber.radius_nm");

    let (code, v) = error_of(&["single"], r#"{"field":{"polarization":"circ+"}}"#);
    assert_eq!(code, 2);
    assert_eq!(v["field"], "field.polarization");

    let (code, v) = error_of(&["bandgap"], "{}");
    assert_eq!(code, 2);
    assert_eq!(v["field"], "array");
}

#[test]
fn missing_config_file_is_a_config_error() {
    let out = Command::new(env!("CARGO_BIN_EXE_fiberqed"))
        .args(["mode", "--config", "/nonexistent/scenario.json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let v: serde_json::Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(v["field"], "--config");
}

#[test]
fn rates_at_default_site() {
    let t = run(
        &["rates"],
        r#"{"atom":{"r_over_a":1.8},"field":{"detuning_range_mhz":{"start":-20,"stop":20,"points":9}}}"#,
    );
    let d = t.col("detuning_mhz");
    let mid = d.iter().position(|&x| x == 0.0).unwrap();
    let dc = t.col("d_circ");
    let dx = t.col("d_x");
    let dy = t.col("d_y");
    assert!((dc[mid] - 0.0358).abs() < 5e-4);
    assert!((dx[mid] - 0.0530).abs() < 5e-4);
    assert!((dy[mid] - 0.0186).abs() < 5e-4);
    let gyd = t.col("gamma_gyd_over_gamma0");
    let rad = t.col("gamma_rad_over_gamma0");
    let tot = t.col("gamma_over_gamma0");
    for i in 0..d.len() {
        assert!((tot[i] - (gyd[i] + rad[i])).abs() <= 1e-11 * tot[i]);
        let j = d.len() - 1 - i;
        assert!((dx[i] - dx[j]).abs() <= 1e-10 * dx[i]);
        assert!(dx[i] <= dx[mid]);
    }
}

#[test]
fn rates_over_radius_decay_outward() {
    let t = run(&["rates"], r#"{"run":{"r_over_a_range":{"start":1.0,"stop":3.0,"points":5}}}"#);
    let gyd = t.col("gamma_gyd_over_gamma0");
    let dx = t.col("d_x");
    assert_eq!(gyd.len(), 5);
    assert!(gyd.windows(2).all(|w| w[1] < w[0]));
    assert!(dx.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn single_atom_amplitudes() {
    let x = run(&["single"], r#"{"atom":{"r_minus_a_nm":0},"field":{"polarization":"x","detuning_range_mhz":{"start":-50,"stop":50,"points":3}}}"#);
    let refl = x.col("reflectivity");
    assert!((refl[1] - 0.009).abs() < 5e-4, "{}", refl[1]);

    let y = run(&["single"], r#"{"atom":{"r_minus_a_nm":0},"field":{"polarization":"y","detuning_range_mhz":{"start":-50,"stop":50,"points":3}}}"#);
    let (rr, ri, tr, ti) = (y.col("re_r"), y.col("im_r"), y.col("re_t"), y.col("im_t"));
    for i in 0..3 {
        assert!((tr[i] - 1.0 - rr[i]).abs() < 1e-12 && (ti[i] - ri[i]).abs() < 1e-12);
    }
    for t in [&x, &y] {
        let tt = t.col("transmittivity");
        assert!((1.0 - tt[0]) < (1.0 - tt[1]) && (1.0 - tt[2]) < (1.0 - tt[1]));
    }
}

#[test]
fn scan_over_count_circular() {
    let t = run(
        &["scan", "--axis", "N"],
        r#"{"array":{"n_range":{"start":1,"stop":40,"step":3},"bragg_order":2},"field":{"polarization":"circ-"}}"#,
    );
    let n = t.col("n");
    assert_eq!(n.first(), Some(&1.0));
    assert!(n.windows(2).all(|w| w[1] - w[0] == 3.0));
    let same = t.col("p_forward_minus");
    let other = t.col("p_forward_plus");
    let tot = t.col("p_tot");
    for i in 0..n.len() {
        assert!(same[i] > other[i]);
        assert!(tot[i] <= 1.0 + 1e-12);
        let sum = same[i] + other[i] + t.col("p_backward_minus")[i] + t.col("p_backward_plus")[i];
        assert!((sum - tot[i]).abs() < 1e-12);
    }
    assert!(tot.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn scan_over_period_peaks_at_bragg() {
    let t = run(
        &["scan", "--axis", "lambda"],
        r#"{"array":{"n":1000,"bragg_order":2},"field":{"polarization":"y"},
           "run":{"period_range_nm":{"start":740,"stop":750,"points":101}}}"#,
    );
    let p = t.col("period_nm");
    let refl = t.col("reflectivity");
    let imax = (0..p.len()).max_by(|&a, &b| refl[a].total_cmp(&refl[b])).unwrap();
    let bragg = t.meta_num("array.period_m") * 1e9;
    assert!((p[imax] - bragg).abs() <= 0.1, "peak {} vs {}", p[imax], bragg);
}

#[test]
fn scan_over_period_needs_grid_and_single_count() {
    let (code, v) = error_of(&["scan", "--axis", "lambda"], r#"{"array":{"n":10,"bragg_order":2}}"#);
    assert_eq!(code, 2);
    assert_eq!(v["field"], "run.period_range_nm");
    let (code, v) = error_of(
        &["scan", "--axis", "delta"],
        r#"{"array":{"n_range":{"start":1,"stop":3},"bragg_order":2}}"#,
    );
    assert_eq!(code, 2);
    assert_eq!(v["field"], "array.n_range");
}

#[test]
fn scan_over_detuning_is_symmetric() {
    let t = run(
        &["scan", "--axis", "delta"],
        r#"{"array":{"n":200,"bragg_order":2},"field":{"detuning_range_mhz":{"start":-30,"stop":30,"points":13}}}"#,
    );
    let refl = t.col("reflectivity");
    let m = refl.len();
    for i in 0..m {
        assert!((refl[i] - refl[m - 1 - i]).abs() < 1e-9);
    }
    assert!((refl[m / 2] - 0.0868).abs() < 1e-3);
}

#[test]
fn bandgap_summary_and_sweep() {
    let t = run(&["bandgap"], r#"{"array":{"n":200,"bragg_order":2}}"#);
    assert!((t.meta_num("gap.closed.n_gap") - 43539.0).abs() < 50.0);
    assert!((t.meta_num("gap.numeric.delta_min_mhz") - 1186.8).abs() < 3.0);
    assert!((t.meta_num("gap.numeric.delta_max_mhz") - 2162.9).abs() < 3.0);
    assert!((t.meta_num("gap.tau_delay_ns") - 0.495).abs() < 0.01);
    assert!(t.meta.contains_key("plateau.delta_flat_numeric_mhz"));
    let d = t.col("detuning_mhz");
    let flag = t.col("in_gap");
    let r_inf = t.col("r_inf_sq");
    let (lo, hi) = (t.meta_num("gap.numeric.delta_min_mhz"), t.meta_num("gap.numeric.delta_max_mhz"));
    assert_eq!(d.len(), 601);
    for i in 0..d.len() {
        let inside = d[i].abs() > lo + 1.0 && d[i].abs() < hi - 1.0;
        let outside = d[i].abs() < lo - 1.0 || d[i].abs() > hi + 1.0;
        if inside {
            assert_eq!(flag[i], 1.0, "{}", d[i]);
            assert!(r_inf[i] > 0.9);
        }
        if outside {
            assert_eq!(flag[i], 0.0, "{}", d[i]);
        }
    }
}

#[test]
fn y_bandgap_has_single_band() {
    let t = run(&["bandgap"], r#"{"array":{"n":200,"bragg_order":2},"field":{"polarization":"y"}}"#);
    assert!((t.meta_num("gap.closed.n_gap") - 33581.0).abs() < 50.0);
    assert!(!t.meta.contains_key("gap.numeric.delta_min_mhz"));
    assert!((t.meta_num("gap.numeric.delta_max_mhz") - 1461.3).abs() < 3.0);
}

#[test]
fn repeated_runs_are_byte_identical() {
    let s = scenario(r#"{"array":{"n":50,"bragg_order":2},"field":{"detuning_range_mhz":{"start":-5,"stop":5,"points":11}}}"#);
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("run{k}.csv"));
        let status = Command::new(env!("CARGO_BIN_EXE_fiberqed"))
            .args(["scan", "--axis", "delta", "--no-timestamp", "--config"])
            .arg(&s.config)
            .arg("--out")
            .arg(&out)
            .status()
            .unwrap();
        assert!(status.success());
        outputs.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);

    // with the timestamp only the "# generated" line may differ
    let a = invoke(&["bandgap"], &s).stdout;
    let b = invoke(&["bandgap"], &s).stdout;
    let strip = |v: &[u8]| -> String {
        String::from_utf8_lossy(v).lines().filter(|l| !l.starts_with("# generated")).collect::<Vec<_>>().join("\n")
    };
    assert!(String::from_utf8_lossy(&a).starts_with("# generated: "));
    assert_eq!(strip(&a), strip(&b));
}
