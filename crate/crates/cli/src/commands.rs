//! Subcommand implementations. Each returns its report and writes its
//! files into the output directory.

use std::path::Path;

use ballwalk_core::asymptotics::{
    compare, predict_gap, predict_witten, predictions, ComparisonReport, CompareTolerances, GapPrediction,
    Predicted,
};
use ballwalk_core::discretize::{assemble_walk, assemble_witten, build_grid, to_P, write_mwop, GridOperator};
use ballwalk_core::eigen::{classify_spectrum, smallest_eigs_with, ClusterReport, SpectralResult, MAX_COUNT};
use ballwalk_core::landscape::{analyze_landscape, CriticalPoint, LandscapeError, LandscapeLabeling};
use ballwalk_core::potential::{check_hypotheses, AxisBox, HypothesisReport, HypothesisTolerances, PotentialDef};
use ballwalk_core::symbolics::selfcheck as symbol_selfcheck;
use ballwalk_core::walk::{
    empirical_gap, mean_first_exit, simulate, ExitStats, GapEstimate, Sampler, Start, StationaryHistogram, StepCounts,
    WalkConfig, WalkTrace,
};
use serde::Serialize;

use crate::config::{Format, RunConfig};
use crate::output::{write_atomic, write_json, Cell, Table};
use crate::CliError;

#[derive(Debug, Clone, Serialize)]
pub struct PairReport {
    pub k: usize,
    pub minimum: CriticalPoint,
    pub saddle: Option<CriticalPoint>,
    /// `None` for the global well.
    pub arrhenius: Option<f64>,
    pub persistence: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LandscapeReport {
    pub potential: PotentialDef,
    #[serde(rename = "box")]
    pub bx: AxisBox,
    pub dx: f64,
    pub n0: usize,
    pub n1: usize,
    pub pairs: Vec<PairReport>,
    pub unpaired_saddles: Vec<CriticalPoint>,
    pub critical_points: Vec<CriticalPoint>,
    pub hypotheses: HypothesisReport,
    pub hypotheses_ok: bool,
    pub warnings: Vec<String>,
}

/// Labeling plus hypothesis report for a configuration.
pub struct Landscape {
    pub labeling: LandscapeLabeling,
    pub report: LandscapeReport,
}

pub fn landscape_of(cfg: &RunConfig) -> Result<Landscape, CliError> {
    let spec = cfg.spec()?;
    let opts = cfg.landscape_options();
    let lab = analyze_landscape(&spec, &cfg.bx, &opts).map_err(|e| match e {
        LandscapeError::NonMorseCritical { .. } | LandscapeError::BoundaryMerge(_) => CliError::Hypothesis(e.to_string()),
        LandscapeError::DimensionMismatch => CliError::Config(e.to_string()),
        _ => CliError::Numerical(format!("landscape: {e}")),
    })?;
    let hyp = check_hypotheses(&spec, &cfg.bx, &lab, HypothesisTolerances::default());
    let report = LandscapeReport {
        potential: PotentialDef::from(&spec),
        bx: cfg.bx.clone(),
        dx: opts.dx,
        n0: lab.n0,
        n1: lab.n1,
        pairs: lab
            .pairs
            .iter()
            .map(|p| PairReport {
                k: p.k,
                minimum: p.minimum.clone(),
                saddle: p.saddle.clone(),
                arrhenius: p.arrhenius.finite(),
                persistence: p.persistence,
            })
            .collect(),
        unpaired_saddles: lab.unpaired_saddles.clone(),
        critical_points: lab.critical_points.clone(),
        hypotheses_ok: hyp.all_ok(),
        hypotheses: hyp,
        warnings: lab.warnings.clone(),
    };
    Ok(Landscape { labeling: lab, report })
}

fn require_hypotheses(l: &Landscape) -> Result<(), CliError> {
    if l.report.hypotheses_ok {
        Ok(())
    } else {
        Err(CliError::Hypothesis(format!("{:?}", l.report.hypotheses)))
    }
}

pub fn cmd_landscape(cfg: &RunConfig, out: &Path) -> Result<LandscapeReport, CliError> {
    let l = landscape_of(cfg)?;
    write_json(out, "landscape.json", &l.report)?;
    require_hypotheses(&l)?;
    Ok(l.report)
}

fn eig_count(cfg: &RunConfig, n0: usize) -> usize {
    cfg.solver.count.unwrap_or(n0 + 2).clamp(2, MAX_COUNT)
}

fn walk_operator(cfg: &RunConfig, h: f64) -> Result<(GridOperator, GridOperator), CliError> {
    let grid = build_grid(&cfg.bx, cfg.dx).map_err(|e| CliError::Config(e.to_string()))?;
    let t = assemble_walk(&cfg.spec()?, &grid, h).map_err(|e| CliError::Config(e.to_string()))?;
    let p = to_P(&t).map_err(|e| CliError::Numerical(e.to_string()))?;
    Ok((t, p))
}

fn solve(cfg: &RunConfig, op: &GridOperator, count: usize) -> Result<SpectralResult, CliError> {
    smallest_eigs_with(op, count, &cfg.solver_options())
        .map_err(|e| CliError::Numerical(format!("{} at h = {}: {e}", op.kind.label(), op.h)))
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumEntry {
    pub h: f64,
    pub spectrum: SpectralResult,
    pub cluster: Option<ClusterReport>,
    pub cluster_error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SpectrumReport {
    pub operator: &'static str,
    pub dx: f64,
    pub n0: usize,
    pub entries: Vec<SpectrumEntry>,
}

fn classify(res: &SpectralResult, n0: usize) -> (Option<ClusterReport>, Option<String>) {
    match classify_spectrum(res, res.h, Some(n0)) {
        Ok(c) => (Some(c), None),
        Err(e) => (None, Some(e.to_string())),
    }
}

pub fn cmd_spectrum(cfg: &RunConfig, out: &Path) -> Result<SpectrumReport, CliError> {
    let l = landscape_of(cfg)?;
    require_hypotheses(&l)?;
    let n0 = l.labeling.n0;
    let count = eig_count(cfg, n0);
    let mut entries = Vec::new();
    for (i, h) in cfg.h_values().into_iter().enumerate() {
        let (t, p) = walk_operator(cfg, h)?;
        if cfg.output.wants(Format::Mwop) {
            let mut buf = Vec::new();
            write_mwop(&t.to_csr(), &mut buf).map_err(|e| CliError::io(out, e))?;
            write_atomic(out, &format!("walk_t_{i}.mwop"), &buf)?;
        }
        let spectrum = solve(cfg, &p, count)?;
        let (cluster, cluster_error) = classify(&spectrum, n0);
        log::info!("h = {h}: eigenvalues {:?}", spectrum.eigenvalues);
        entries.push(SpectrumEntry {
            h,
            spectrum,
            cluster,
            cluster_error,
        });
    }
    let report = SpectrumReport {
        operator: "WALK_P",
        dx: cfg.dx,
        n0,
        entries,
    };
    write_json(out, "spectrum.json", &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub h: f64,
    pub walk: SpectralResult,
    pub witten: Option<SpectralResult>,
    pub cluster: Option<ClusterReport>,
    pub cluster_error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepReport {
    pub potential: PotentialDef,
    pub dx: f64,
    pub dimension: usize,
    pub n0: usize,
    pub points: Vec<SweepPoint>,
    pub predictions: Vec<GapPrediction>,
    pub comparison: ComparisonReport,
    /// Every `h` classified with `n_small = n0`.
    pub counting_ok: bool,
    /// `max/min` over the sweep of eigenvalue `n0 + 1` divided by `h`.
    pub next_over_h_spread: Option<f64>,
}

pub fn cmd_sweep(cfg: &RunConfig, out: &Path) -> Result<SweepReport, CliError> {
    let l = landscape_of(cfg)?;
    require_hypotheses(&l)?;
    let spec = cfg.spec()?;
    let d = spec.dimension();
    let n0 = l.labeling.n0;
    let count = eig_count(cfg, n0);
    let preds = predictions(&l.labeling).map_err(|e| CliError::Numerical(e.to_string()))?;
    let grid = build_grid(&cfg.bx, cfg.dx).map_err(|e| CliError::Config(e.to_string()))?;
    let mut points = Vec::new();
    for h in cfg.h_values() {
        let (_, p) = walk_operator(cfg, h)?;
        let walk = solve(cfg, &p, count)?;
        drop(p);
        let witten = if cfg.solver.witten_h(h) {
            let w = assemble_witten(&spec, &grid, h).map_err(|e| CliError::Config(e.to_string()))?;
            Some(solve(cfg, &w, count)?)
        } else {
            None
        };
        let (cluster, cluster_error) = classify(&walk, n0);
        log::info!("h = {h}: walk {:?}", walk.eigenvalues);
        points.push(SweepPoint {
            h,
            walk,
            witten,
            cluster,
            cluster_error,
        });
    }
    let numeric: Vec<SpectralResult> = points.iter().map(|p| p.walk.clone()).collect();
    let any_witten = points.iter().any(|p| p.witten.is_some());
    // Rows without a Witten solve carry an empty spectrum so that the
    // comparison leaves their Witten columns blank.
    let witten: Vec<SpectralResult> = points
        .iter()
        .map(|p| {
            p.witten.clone().unwrap_or_else(|| SpectralResult {
                eigenvalues: Vec::new(),
                residual_norms: Vec::new(),
                ..p.walk.clone()
            })
        })
        .collect();
    let comparison = compare(
        &numeric,
        any_witten.then_some(&witten[..]),
        &preds,
        &CompareTolerances::for_dimension(d),
        Some(l.report.hypotheses.min_s_separation),
    );
    let counting_ok = points.iter().all(|p| p.cluster.as_ref().is_some_and(|c| c.n_small == n0));
    let next: Vec<f64> = points.iter().filter_map(|p| p.cluster.as_ref().map(|c| c.next_over_h)).collect();
    let next_over_h_spread = (!next.is_empty()).then(|| {
        let (lo, hi) = next.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &x| (a.min(x), b.max(x)));
        hi / lo
    });
    let report = SweepReport {
        potential: PotentialDef::from(&spec),
        dx: cfg.dx,
        dimension: d,
        n0,
        points,
        predictions: preds,
        comparison,
        counting_ok,
        next_over_h_spread,
    };
    if cfg.output.wants(Format::Csv) {
        let mut t = Table::new(&[
            "h",
            "dx",
            "k",
            "measured_gap",
            "predicted_gap",
            "ratio",
            "witten_gap",
            "witten_ratio",
        ]);
        for r in &report.comparison.rows {
            t.row(&[
                r.h.into(),
                cfg.dx.into(),
                r.k.into(),
                r.measured_gap.into(),
                r.predicted_gap.into(),
                r.ratio.into(),
                r.witten_gap.into(),
                r.witten_ratio.into(),
            ]);
        }
        write_atomic(out, "sweep.csv", &t.to_bytes())?;
    }
    write_json(out, "sweep.json", &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct PredictRow {
    pub h: f64,
    pub k: usize,
    pub walk: Predicted,
    pub witten: Predicted,
}

#[derive(Debug, Clone, Serialize)]
pub struct PredictReport {
    pub n0: usize,
    pub wells: Vec<GapPrediction>,
    pub rows: Vec<PredictRow>,
}

pub fn cmd_predict(cfg: &RunConfig, out: &Path) -> Result<PredictReport, CliError> {
    let l = landscape_of(cfg)?;
    require_hypotheses(&l)?;
    let lab = &l.labeling;
    let d = lab.grid.dim();
    let num = |e: ballwalk_core::asymptotics::AsymptoticsError| CliError::Numerical(e.to_string());
    let mut rows = Vec::new();
    for h in cfg.h_values() {
        for k in 1..=lab.n0 {
            rows.push(PredictRow {
                h,
                k,
                walk: predict_gap(lab, k, h, d).map_err(num)?,
                witten: predict_witten(lab, k, h, d).map_err(num)?,
            });
        }
    }
    let report = PredictReport {
        n0: lab.n0,
        wells: predictions(lab).map_err(num)?,
        rows,
    };
    write_json(out, "predict.json", &report)?;
    Ok(report)
}

/// Occupation of the starting well between the Ehrenfest time and a tenth
/// of the relaxation time.
#[derive(Debug, Clone, Serialize)]
pub struct Plateau {
    pub gap: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub occupation_start: f64,
    pub occupation_end: f64,
    pub relative_drop: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExitPoint {
    pub h: f64,
    pub stats: ExitStats,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExitSummary {
    pub well: usize,
    pub points: Vec<ExitPoint>,
    /// Slope of `ln(mean·h)` against `1/h`.
    pub slope: f64,
    pub two_s: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateReport {
    pub h: f64,
    pub n_chains: usize,
    pub n_steps: u64,
    pub seed: u64,
    pub start: Start,
    pub stationary_fractions: Vec<f64>,
    pub trace: WalkTrace,
    pub gap: Option<GapEstimate>,
    pub gap_error: Option<String>,
    pub plateau: Option<Plateau>,
    pub exits: Option<ExitSummary>,
}

fn plateau(trace: &WalkTrace, well: usize, gap: f64) -> Option<Plateau> {
    let t_start = 2.0 * trace.h.ln().abs() / trace.h;
    let t_end = 0.1 / gap;
    let a = trace.steps.iter().position(|&s| s as f64 >= t_start)?;
    let b = trace.steps.iter().rposition(|&s| s as f64 <= t_end)?;
    if b <= a {
        return None;
    }
    let f = trace.fractions(well);
    Some(Plateau {
        gap,
        t_start,
        t_end,
        occupation_start: f[a],
        occupation_end: f[b],
        relative_drop: (f[a] - f[b]) / f[a],
    })
}

fn exit_summary(cfg: &RunConfig, base: &WalkConfig, lab: &LandscapeLabeling, well: usize) -> Result<Option<ExitSummary>, CliError> {
    let w = cfg.walk.as_ref().expect("walk block present");
    let Some(hs) = &w.exit_h_list else {
        return Ok(None);
    };
    let Some(s) = lab.pairs[well].arrhenius.finite() else {
        return Ok(None);
    };
    let mut points = Vec::new();
    for &h in hs {
        let c = WalkConfig {
            h,
            n_chains: w.exit_n_chains.unwrap_or(base.n_chains),
            n_steps: w.exit_max_steps.unwrap_or(base.n_steps),
            ..base.clone()
        };
        let stats = mean_first_exit(&c, lab).map_err(|e| CliError::Numerical(format!("exit at h = {h}: {e}")))?;
        log::info!("h = {h}: mean exit {}", stats.mean);
        points.push(ExitPoint { h, stats });
    }
    let xs: Vec<f64> = points.iter().map(|p| 1.0 / p.h).collect();
    let ys: Vec<f64> = points.iter().map(|p| (p.stats.mean * p.h).ln()).collect();
    let (slope, _, _) = linear_fit(&xs, &ys);
    Ok(Some(ExitSummary {
        well: well + 1,
        points,
        slope,
        two_s: 2.0 * s,
        rel_err: (slope - 2.0 * s).abs() / (2.0 * s),
    }))
}

pub fn cmd_simulate(cfg: &RunConfig, out: &Path) -> Result<SimulateReport, CliError> {
    let l = landscape_of(cfg)?;
    require_hypotheses(&l)?;
    let lab = &l.labeling;
    let wc = cfg.walk_config()?.ok_or_else(|| CliError::Config("simulate needs a [walk] block".into()))?;
    let walk_err = |e: ballwalk_core::walk::WalkError| match e {
        ballwalk_core::walk::WalkError::Config(m) => CliError::Config(m),
        other => CliError::Numerical(other.to_string()),
    };
    let trace = simulate(&wc, lab).map_err(walk_err)?;
    let hist = StationaryHistogram::new(&wc.spec, &wc.bx, wc.h, wc.stationary_dx.unwrap_or(wc.h / 10.0)).map_err(walk_err)?;
    let stationary_fractions = hist.well_fractions(lab);
    let start_well = match &wc.start {
        Start::Well(k) => Some(k - 1),
        Start::Point(x) => Some(lab.well_of(x)),
        Start::Stationary => None,
    };
    let (mut gap, mut gap_error, mut plat, mut exits) = (None, None, None, None);
    if let Some(k) = start_well {
        match empirical_gap(&trace, k, stationary_fractions[k], wc.seed) {
            Ok(g) => {
                plat = plateau(&trace, k, g.gap);
                gap = Some(g);
            }
            Err(e) => gap_error = Some(e.to_string()),
        }
        exits = exit_summary(cfg, &wc, lab, k)?;
    }
    let report = SimulateReport {
        h: wc.h,
        n_chains: wc.n_chains,
        n_steps: wc.n_steps,
        seed: wc.seed,
        start: wc.start.clone(),
        stationary_fractions,
        trace,
        gap,
        gap_error,
        plateau: plat,
        exits,
    };
    if cfg.output.wants(Format::Csv) {
        let mut header = vec!["step".to_string()];
        header.extend((1..=lab.n0).map(|k| format!("well_{k}")));
        let mut t = Table::new(&header);
        for (r, step) in report.trace.steps.iter().enumerate() {
            let mut row = vec![Cell::from(*step)];
            row.extend(
                report.trace.occupation[r]
                    .iter()
                    .map(|c| Cell::from(*c as f64 / report.n_chains as f64)),
            );
            t.row(&row);
        }
        write_atomic(out, "simulate.csv", &t.to_bytes())?;
    }
    write_json(out, "simulate.json", &report)?;
    Ok(report)
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckRow {
    pub name: String,
    pub max_error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

/// Closed-form symbols against quadrature, then detailed balance of the
/// assembled operator and of the sampler.
pub fn selfcheck_rows(seed: u64) -> Vec<CheckRow> {
    let mut rows: Vec<CheckRow> = symbol_selfcheck(100, seed)
        .into_iter()
        .map(|r| CheckRow {
            name: r.name,
            max_error: r.max_error,
            tolerance: r.tolerance,
            passed: r.passed,
        })
        .collect();
    let spec = ballwalk_core::potential::PotentialSpec::double_well_tilted(0.3);
    let bx = AxisBox::symmetric(1, 2.0);
    let h = 0.25;
    let grid = build_grid(&bx, 0.01).expect("fixed grid");
    let t = assemble_walk(&spec, &grid, h).expect("fixed operator");
    let csr = t.to_csr();
    let mut asym: f64 = 0.0;
    for i in 0..csr.n {
        let (cols, vals) = csr.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            asym = asym.max((v - csr.get(j, i)).abs());
        }
    }
    rows.push(CheckRow {
        name: "operator symmetry".into(),
        max_error: asym,
        tolerance: 0.0,
        passed: asym == 0.0,
    });
    let tv = t.apply(&t.stationary_sqrt);
    let res = tv.iter().zip(&t.stationary_sqrt).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
    rows.push(CheckRow {
        name: "stationary eigenpair".into(),
        max_error: res,
        tolerance: 1e-13,
        passed: res <= 1e-13,
    });
    // One step from the stationary histogram: binned flux i→j against j→i.
    let sampler = Sampler::new(&spec, &bx, h);
    let hist = StationaryHistogram::new(&spec, &bx, h, h / 20.0).expect("fixed histogram");
    let width = h / 2.0;
    let bins = (4.0 / width) as usize;
    let bin = |x: f64| (((x + 2.0) / width).floor().max(0.0) as usize).min(bins - 1);
    let mut flux = vec![vec![0u64; bins]; bins];
    let mut rng = ballwalk_core::walk::chain_rng(seed, 0);
    let mut counts = StepCounts::default();
    let mut stalled = false;
    for _ in 0..400_000 {
        let mut x = hist.sample(&mut rng);
        let i = bin(x[0]);
        if sampler.step(&mut x, &mut rng, &mut counts).is_err() {
            stalled = true;
            break;
        }
        flux[i][bin(x[0])] += 1;
    }
    let mut worst: f64 = 0.0;
    for i in 0..bins {
        for j in 0..i {
            let (a, b) = (flux[i][j] as f64, flux[j][i] as f64);
            if a + b >= 50.0 {
                worst = worst.max((a - b).abs() / (a + b).sqrt());
            }
        }
    }
    rows.push(CheckRow {
        name: "sampler detailed balance (sigmas)".into(),
        max_error: worst,
        tolerance: 5.0,
        passed: !stalled && worst <= 5.0,
    });
    rows
}

#[derive(Debug, Clone, Serialize)]
pub struct SelfCheckReport {
    pub rows: Vec<CheckRow>,
    pub passed: bool,
}

pub fn cmd_selfcheck(seed: u64, out: Option<&Path>) -> Result<SelfCheckReport, CliError> {
    let rows = selfcheck_rows(seed);
    let passed = rows.iter().all(|r| r.passed);
    let report = SelfCheckReport { rows, passed };
    if let Some(dir) = out {
        write_json(dir, "selfcheck.json", &report)?;
    }
    Ok(report)
}

/// Least-squares slope and intercept of `y` on `x`, with the largest
/// absolute residual.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let slope = sxy / sxx;
    let icept = my - slope * mx;
    let worst = x
        .iter()
        .zip(y)
        .map(|(a, b)| (b - icept - slope * a).abs())
        .fold(0.0, f64::max);
    (slope, icept, worst)
}
