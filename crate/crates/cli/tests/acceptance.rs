//! End-to-end acceptance suite. Each test prints one `PASS`/`FAIL` line
//! straight to stdout (bypassing capture) and then asserts its verdict.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;

use ballwalk_cli::commands::linear_fit;
use ballwalk_core::discretize::{assemble_walk, assemble_witten, build_grid, to_P, GridOperator};
use ballwalk_core::eigen::quasimode::epsilon_margin;
use ballwalk_core::eigen::{build_quasimodes, principal_cosines, smallest_eigs};
use ballwalk_core::landscape::{analyze_landscape, brute_force_pairs, LandscapeOptions};
use ballwalk_core::par;
use ballwalk_core::potential::{AxisBox, Builtin, PotentialSpec};
use serde_json::Value;

fn report(n: usize, title: &str, pass: bool, detail: &str) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let line = format!("criterion {n:>2} {verdict}  {title}: {detail}\n");
    let mut out = std::io::stdout().lock();
    out.write_all(line.as_bytes()).unwrap();
    out.flush().unwrap();
    assert!(pass, "criterion {n} failed: {detail}");
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

/// Runs the binary and returns its exit code.
fn ballwalk(args: &[&str]) -> i32 {
    let out = Command::new(env!("CARGO_BIN_EXE_ballwalk"))
        .args(args)
        .output()
        .expect("binary runs");
    if !out.status.success() {
        eprintln!("{}", String::from_utf8_lossy(&out.stderr));
    }
    out.status.code().unwrap_or(-1)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

struct Run {
    _dir: tempfile::TempDir,
    json: Value,
}

fn run_command(cmd: &str, cfg: &str, file: &str) -> Run {
    let dir = tempfile::tempdir().unwrap();
    let code = ballwalk(&[cmd, config(cfg).to_str().unwrap(), "--output-dir", dir.path().to_str().unwrap()]);
    assert_eq!(code, 0, "{cmd} {cfg} exited with {code}");
    let json = read_json(&dir.path().join(file));
    Run { _dir: dir, json }
}

fn sweep_1d() -> &'static Value {
    static R: OnceLock<Run> = OnceLock::new();
    &R.get_or_init(|| run_command("sweep", "tilted_sweep.toml", "sweep.json")).json
}

fn sweep_2d() -> &'static Value {
    static R: OnceLock<Run> = OnceLock::new();
    &R.get_or_init(|| run_command("sweep", "three_well_sweep.toml", "sweep.json")).json
}

fn f(v: &Value) -> f64 {
    v.as_f64().unwrap_or(f64::NAN)
}

const SWEEP_1D: [f64; 5] = [0.15, 0.12, 0.10, 0.08, 0.06];
const SWEEP_2D: [f64; 4] = [0.26, 0.24, 0.22, 0.20];

fn residual(op: &GridOperator, lambda: f64) -> f64 {
    let v = &op.stationary_sqrt;
    let y = op.apply(v);
    y.iter().zip(v).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt()
}

#[test]
fn criterion_01_exact_structure() {
    let cases: Vec<(PotentialSpec, AxisBox, f64, Vec<f64>)> = vec![
        (PotentialSpec::double_well_tilted(0.3), AxisBox::symmetric(1, 2.0), 0.002, SWEEP_1D.to_vec()),
        (PotentialSpec::three_well(), AxisBox::symmetric(2, 3.2), 0.025, SWEEP_2D.to_vec()),
    ];
    let (mut t_res, mut p_min, mut w_res) = (0.0f64, 0.0f64, 0.0f64);
    for (spec, bx, dx, hs) in cases {
        let grid = build_grid(&bx, dx).unwrap();
        for h in hs {
            let t = assemble_walk(&spec, &grid, h).unwrap();
            t_res = t_res.max(residual(&t, 1.0));
            let p = to_P(&t).unwrap();
            drop(t);
            // The Rayleigh quotient bounds the smallest eigenvalue from above.
            let v = &p.stationary_sqrt;
            p_min = p_min.max(par::dot(&p.apply(v), v));
            let w = assemble_witten(&spec, &grid, h).unwrap();
            w_res = w_res.max(residual(&w, 0.0));
        }
    }
    let pass = t_res <= 1e-13 && p_min <= 1e-12 && w_res <= 1e-12;
    report(
        1,
        "exact structure",
        pass,
        &format!("WALK_T residual {t_res:.2e}, WALK_P lowest <= {p_min:.2e}, WITTEN0 residual {w_res:.2e}"),
    );
}

fn counting(sweep: &Value) -> (bool, f64, Vec<(usize, f64, f64)>) {
    let n0 = sweep["n0"].as_u64().unwrap() as usize;
    let counting_ok = sweep["counting_ok"].as_bool().unwrap();
    let spread = f(&sweep["next_over_h_spread"]);
    let points = sweep["points"].as_array().unwrap();
    let inv_h: Vec<f64> = points.iter().map(|p| 1.0 / f(&p["h"])).collect();
    let mut fits = Vec::new();
    for k in 2..=n0 {
        let lg: Vec<f64> = points.iter().map(|p| f(&p["walk"]["eigenvalues"][k - 1]).ln()).collect();
        let (slope, _, worst) = linear_fit(&inv_h, &lg);
        let span = lg.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - lg.iter().cloned().fold(f64::INFINITY, f64::min);
        fits.push((k, slope, worst / span));
    }
    (counting_ok, spread, fits)
}

#[test]
fn criterion_02_eigenvalue_counting() {
    let mut pass = true;
    let mut detail = Vec::new();
    for (name, sweep) in [("1D", sweep_1d()), ("2D", sweep_2d())] {
        let (ok, spread, fits) = counting(sweep);
        // Affine: residuals of the straight-line fit stay within 2% of the
        // range of ln(gap).
        let affine = fits.iter().all(|(_, s, r)| *s < 0.0 && *r <= 0.02);
        pass &= ok && affine && spread < 3.0;
        let fit_txt: Vec<String> = fits.iter().map(|(k, s, r)| format!("k={k} slope {s:.3} resid {r:.1e}")).collect();
        detail.push(format!(
            "{name}: n_small=n0 {ok}, next/h spread {spread:.3}, {}",
            fit_txt.join(", ")
        ));
    }
    report(2, "eigenvalue counting", pass, &detail.join("; "));
}

#[test]
fn criterion_03_arrhenius_rate() {
    let w = &sweep_1d()["comparison"]["wells"][0];
    let (s_fit, s, err) = (f(&w["s_fit"]), f(&w["s_theory"]), f(&w["rel_err"]));
    report(
        3,
        "Arrhenius rate",
        err <= 0.05,
        &format!("fitted S {s_fit:.6}, labeled S_2 {s:.6}, relative error {err:.2e}"),
    );
}

#[test]
fn criterion_04_prefactor() {
    let rows = sweep_1d()["comparison"]["rows"].as_array().unwrap();
    let win: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r["in_window"].as_bool().unwrap())
        .map(|r| (f(&r["h"]), f(&r["ratio"])))
        .collect();
    let in_band = !win.is_empty() && win.iter().all(|(_, r)| (0.7..=1.3).contains(r));
    let small = win.iter().min_by(|a, b| a.0.total_cmp(&b.0)).unwrap().1;
    let large = win.iter().max_by(|a, b| a.0.total_cmp(&b.0)).unwrap().1;
    let trend = (small - 1.0).abs() < (large - 1.0).abs();
    let txt: Vec<String> = win.iter().map(|(h, r)| format!("{h}:{r:.4}")).collect();
    report(
        4,
        "prefactor",
        in_band && trend,
        &format!("measured/predicted over window [{}], trends to 1 {trend}", txt.join(" ")),
    );
}

#[test]
fn criterion_05_witten_comparison() {
    let median = f(&sweep_1d()["comparison"]["witten_ratio_median"]);
    let point = sweep_2d()["comparison"]["rows"]
        .as_array()
        .unwrap()
        .iter()
        .find(|r| r["k"] == 2 && (f(&r["h"]) - 0.2).abs() < 1e-12 && !r["witten_ratio"].is_null())
        .map(|r| f(&r["witten_ratio"]))
        .unwrap_or(f64::NAN);
    let pass = (5.0..=7.0).contains(&median) && (6.0..=10.0).contains(&point);
    report(
        5,
        "Witten comparison",
        pass,
        &format!("1D median witten/walk {median:.4} (target 6), 2D at h=0.2 {point:.4} (target 8)"),
    );
}

#[test]
fn criterion_06_labeling_oracle() {
    let cases = [
        (PotentialSpec::double_well_tilted(0.3), AxisBox::symmetric(1, 2.0), 2e-3),
        (PotentialSpec::builtin(Builtin::SymmetricDoubleWell).unwrap(), AxisBox::symmetric(1, 2.0), 2e-3),
        (PotentialSpec::three_well(), AxisBox::symmetric(2, 3.2), 0.015),
    ];
    let mut pass = true;
    let mut detail = Vec::new();
    for (spec, bx, dx) in cases {
        let opts = LandscapeOptions {
            cell_cap: 1_000_000,
            ..LandscapeOptions::new(dx)
        };
        let lab = analyze_landscape(&spec, &bx, &opts).unwrap();
        let brute = brute_force_pairs(&spec, &lab.grid, &lab.values, &lab.critical_points);
        let finite: Vec<_> = lab.pairs.iter().filter(|p| p.saddle.is_some()).collect();
        let lip = (0..lab.grid.len())
            .map(|i| spec.grad_norm(&lab.grid.point(i)[..lab.grid.dim()]))
            .fold(0.0, f64::max);
        let mut same = brute.len() == finite.len();
        let mut worst: f64 = 0.0;
        for (p, (m, s, big_s)) in finite.iter().zip(&brute) {
            same &= p.minimum == lab.critical_points[*m] && p.saddle.as_ref() == Some(&lab.critical_points[*s]);
            worst = worst.max((p.persistence.unwrap() - big_s).abs()).max((p.arrhenius.value() - big_s).abs());
        }
        let tol = 5.0 * dx * lip;
        pass &= same && worst <= tol;
        detail.push(format!("{spec}: {} pairs equal {same}, max |ΔS| {worst:.1e} <= {tol:.1e}", brute.len()));
    }
    report(6, "labeling oracle equivalence", pass, &detail.join("; "));
}

#[test]
fn criterion_07_symbol_suite() {
    let dir = tempfile::tempdir().unwrap();
    let code = ballwalk(&["selfcheck", "--output-dir", dir.path().to_str().unwrap()]);
    let json = read_json(&dir.path().join("selfcheck.json"));
    let rows = json["rows"].as_array().unwrap();
    let failed: Vec<&str> = rows
        .iter()
        .filter(|r| !r["passed"].as_bool().unwrap())
        .map(|r| r["name"].as_str().unwrap())
        .collect();
    report(
        7,
        "symbol suite",
        code == 0 && failed.is_empty(),
        &format!("{} checks, failed {:?}", rows.len(), failed),
    );
}

#[test]
fn criterion_08_metastability() {
    let run = run_command("simulate", "tilted_walk.toml", "simulate.json");
    let p = &run.json["plateau"];
    let drop = f(&p["relative_drop"]);
    let e = &run.json["exits"];
    let (slope, two_s, err) = (f(&e["slope"]), f(&e["two_s"]), f(&e["rel_err"]));
    let means: Vec<String> = e["points"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| format!("{}:{:.0}", x["h"], f(&x["stats"]["mean"])))
        .collect();
    let a = drop < 0.05;
    let b = err <= 0.15;
    report(
        8,
        "metastability",
        a && b,
        &format!(
            "(a) occupation drop over [{:.1}, {:.1}] = {:.2}% {}; (b) exit slope {slope:.4} vs 2S_2 {two_s:.4}, error {:.1}% {} (means {})",
            f(&p["t_start"]),
            f(&p["t_end"]),
            100.0 * drop,
            if a { "ok" } else { "fails" },
            100.0 * err,
            if b { "ok" } else { "fails" },
            means.join(" ")
        ),
    );
}

#[test]
fn criterion_09_quasimodes() {
    let spec = PotentialSpec::double_well_tilted(0.3);
    let bx = AxisBox::symmetric(1, 2.0);
    let grid = build_grid(&bx, 0.002).unwrap();
    let lab = analyze_landscape(&spec, &bx, &LandscapeOptions::new(0.002)).unwrap();
    let eps = 0.5 * epsilon_margin(&lab);
    let mut inv_h = Vec::new();
    let mut log_off = Vec::new();
    let mut cos_ok = true;
    let mut worst_cos: f64 = 1.0;
    for h in SWEEP_1D {
        let q = build_quasimodes(&grid, &spec, &lab, h, eps).unwrap();
        let w = assemble_witten(&spec, &grid, h).unwrap();
        let res = smallest_eigs(&w, 4, 1e-10, 20_000).unwrap();
        let cos = principal_cosines(&q.vectors, &res.vectors[..res.n_small]);
        let lowest = cos.iter().cloned().fold(1.0, f64::min);
        worst_cos = worst_cos.min(lowest);
        cos_ok &= cos.len() == lab.n0 && lowest >= 1.0 - 5.0 * h;
        inv_h.push(1.0 / h);
        log_off.push(q.max_off_diagonal().ln());
    }
    let (slope, _, worst) = linear_fit(&inv_h, &log_off);
    let span = log_off[0] - log_off[log_off.len() - 1];
    let decreasing = log_off.windows(2).all(|w| w[1] < w[0]);
    let loglinear = decreasing && slope < 0.0 && worst <= 0.05 * span;
    report(
        9,
        "quasimode diagnostics",
        loglinear && cos_ok,
        &format!(
            "ln(max off-diagonal) slope {slope:.3} in 1/h, max residual {:.1}% of range; lowest cosine {worst_cos:.6}",
            100.0 * worst / span
        ),
    );
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut v: Vec<(String, Vec<u8>)> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| !p.to_string_lossy().ends_with(".meta.json"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap()))
        .collect();
    v.sort();
    v
}

#[test]
fn criterion_10_determinism() {
    let root = tempfile::tempdir().unwrap();
    let sweep = root.path().join("sweep.toml");
    std::fs::write(
        &sweep,
        r#"schema_version = 1
dx = 0.004
h_list = [0.15, 0.12, 0.10, 0.08]
[potential]
dimension = 1
form = "builtin"
name = "double_well_tilted"
params = [0.3]
[box]
lower = [-2.0]
upper = [2.0]
[solver]
dense_cutoff = 0
"#,
    )
    .unwrap();
    let walk = root.path().join("walk.toml");
    std::fs::write(
        &walk,
        r#"schema_version = 1
dx = 0.01
h = 0.3
[potential]
dimension = 1
form = "builtin"
name = "double_well_tilted"
params = [0.3]
[box]
lower = [-2.0]
upper = [2.0]
[landscape]
dx = 0.002
[walk]
n_steps = 3000
n_chains = 400
seed = 7
start = { well = 2 }
record_every = 5
exit_h_list = [0.35, 0.3]
exit_n_chains = 300
"#,
    )
    .unwrap();
    let mut pass = true;
    let mut detail = Vec::new();
    for (cmd, cfg) in [("sweep", &sweep), ("simulate", &walk)] {
        let mut outputs = Vec::new();
        for (i, threads) in ["1", "3", "1", "2"].iter().enumerate() {
            let dir = root.path().join(format!("{cmd}_{i}"));
            let code = ballwalk(&[
                cmd,
                cfg.to_str().unwrap(),
                "--threads",
                threads,
                "--output-dir",
                dir.to_str().unwrap(),
            ]);
            assert_eq!(code, 0);
            outputs.push(files(&dir));
        }
        let same = outputs.windows(2).all(|w| w[0] == w[1]) && !outputs[0].is_empty();
        pass &= same;
        let names: Vec<&str> = outputs[0].iter().map(|(n, _)| n.as_str()).collect();
        detail.push(format!("{cmd} {names:?} identical over threads 1/3/1/2: {same}"));
    }
    report(10, "determinism", pass, &detail.join("; "));
}
