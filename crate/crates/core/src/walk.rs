//! Monte-Carlo simulation of the continuous-state ball walk.
//!
//! A step draws `y` from the density `∝ e^{-φ(y)/h}` on `B(x, h)` by
//! rejection from the uniform distribution on the ball. The envelope uses a
//! certified lower bound of `φ` on the ball, tabulated per cell.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::discretize::{assemble_walk, build_grid, DiscretizeError, GridError};
use crate::landscape::LandscapeLabeling;
use crate::potential::{AxisBox, PotentialSpec};

pub const MAX_CONSECUTIVE_REJECTIONS: u64 = 1_000_000;
const TABLE_CELLS_PER_H: f64 = 8.0;

#[derive(Debug, Error)]
pub enum WalkError {
    #[error("{0} consecutive rejections at {1:?}")]
    RejectionStall(u64, Vec<f64>),
    #[error("chain left the tabulated domain at {0:?}")]
    LeftDomain(Vec<f64>),
    #[error("invalid walk configuration: {0}")]
    Config(String),
    #[error("relaxation not observed: final deviation {end:e} exceeds half of initial {start:e}")]
    NotRelaxed { start: f64, end: f64 },
    #[error("too few points to fit relaxation ({0})")]
    TooFewPoints(usize),
    #[error(transparent)]
    Discretize(#[from] DiscretizeError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Start {
    Point(Vec<f64>),
    /// 1-based well index; chains start at its minimum.
    Well(usize),
    Stationary,
}

#[derive(Debug, Clone)]
pub struct WalkConfig {
    pub spec: PotentialSpec,
    pub bx: AxisBox,
    pub h: f64,
    pub n_steps: u64,
    pub n_chains: usize,
    pub seed: u64,
    pub start: Start,
    pub record_every: u64,
    /// Grid spacing of the histogram used for stationary starts.
    pub stationary_dx: Option<f64>,
}

impl WalkConfig {
    pub fn validate(&self) -> Result<(), WalkError> {
        let bad = |m: &str| Err(WalkError::Config(m.to_string()));
        if self.n_steps < 1 || self.n_chains < 1 {
            return bad("n_steps and n_chains must be >= 1");
        }
        if self.record_every < 1 {
            return bad("record_every must be >= 1");
        }
        if !(self.h > 0.0 && self.h.is_finite()) {
            return bad("h must be positive");
        }
        if self.spec.dimension() != self.bx.dim() {
            return bad("box and potential dimensions differ");
        }
        Ok(())
    }
}

/// Certified lower bounds of `φ` over every ball `B(x, h)` with `x` in a
/// table cell.
#[derive(Debug, Clone)]
struct LowerBoundTable {
    d: usize,
    origin: [f64; 2],
    delta: f64,
    dims: [usize; 2],
    ball_min: Vec<f64>,
}

impl LowerBoundTable {
    fn new(spec: &PotentialSpec, bx: &AxisBox, h: f64) -> Self {
        let d = bx.dim();
        let delta = h / TABLE_CELLS_PER_H;
        let pad = 2.0 * h;
        let mut origin = [0.0; 2];
        let mut dims = [1usize; 2];
        for a in 0..d {
            origin[a] = bx.lower[a] - pad;
            dims[a] = ((bx.upper[a] - bx.lower[a] + 2.0 * pad) / delta).ceil() as usize;
        }
        let n = dims[0] * dims[1];
        let centre = |i: usize| -> [f64; 2] {
            let (ix, iy) = (i % dims[0], i / dims[0]);
            let mut c = [0.0; 2];
            c[0] = origin[0] + (ix as f64 + 0.5) * delta;
            if d == 2 {
                c[1] = origin[1] + (iy as f64 + 0.5) * delta;
            }
            c
        };
        let hmax = (0..n)
            .into_par_iter()
            .map(|i| spec.hess(&centre(i)[..d]).norm())
            .reduce(|| 0.0, f64::max);
        // Sampled Hessian bound, inflated to cover the cell interiors.
        let hb = 1.25 * hmax + 1e-9;
        let r = 0.5 * delta * (d as f64).sqrt();
        let lb: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| {
                let c = centre(i);
                spec.value(&c[..d]) - spec.grad_norm(&c[..d]) * r - 0.5 * hb * r * r
            })
            .collect();
        let reach = (h / delta).ceil() as isize + 1;
        let ball_min: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|i| {
                let (ix, iy) = ((i % dims[0]) as isize, (i / dims[0]) as isize);
                let yr = if d == 2 { reach } else { 0 };
                let mut m = f64::INFINITY;
                for oy in -yr..=yr {
                    let jy = iy + oy;
                    if jy < 0 || jy >= dims[1] as isize {
                        continue;
                    }
                    for ox in -reach..=reach {
                        let jx = ix + ox;
                        if jx < 0 || jx >= dims[0] as isize {
                            continue;
                        }
                        m = m.min(lb[jy as usize * dims[0] + jx as usize]);
                    }
                }
                m
            })
            .collect();
        Self {
            d,
            origin,
            delta,
            dims,
            ball_min,
        }
    }

    fn lookup(&self, x: &[f64]) -> Option<f64> {
        let mut idx = 0;
        let mut stride = 1;
        for a in 0..self.d {
            let t = ((x[a] - self.origin[a]) / self.delta).floor();
            if t < 1.0 || t >= (self.dims[a] - 1) as f64 {
                return None;
            }
            idx += t as usize * stride;
            stride *= self.dims[a];
        }
        Some(self.ball_min[idx])
    }
}

/// Exact sampler of one step of the walk.
#[derive(Debug, Clone)]
pub struct Sampler {
    spec: PotentialSpec,
    h: f64,
    table: LowerBoundTable,
    lip_box: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct StepCounts {
    pub proposals: u64,
    pub accepted: u64,
}

impl Sampler {
    pub fn new(spec: &PotentialSpec, bx: &AxisBox, h: f64) -> Self {
        let table = LowerBoundTable::new(spec, bx, h);
        let d = bx.dim();
        let samples = 64usize;
        let lip_box = (0..samples.pow(d as u32))
            .map(|i| {
                let mut x = [0.0; 2];
                for (a, xa) in x.iter_mut().enumerate().take(d) {
                    let k = if a == 0 { i % samples } else { i / samples };
                    *xa = bx.lower[a] + (bx.upper[a] - bx.lower[a]) * k as f64 / (samples - 1) as f64;
                }
                spec.grad_norm(&x[..d])
            })
            .fold(0.0, f64::max);
        Self {
            spec: spec.clone(),
            h,
            table,
            lip_box,
        }
    }

    pub fn dim(&self) -> usize {
        self.table.d
    }

    /// Sampled `max |∇φ|` over the box.
    pub fn lip_box(&self) -> f64 {
        self.lip_box
    }

    /// Replaces `x` by a sample of the walk kernel at `x`.
    pub fn step(&self, x: &mut [f64], rng: &mut impl Rng, counts: &mut StepCounts) -> Result<(), WalkError> {
        let d = self.dim();
        let lower = self.table.lookup(x).ok_or_else(|| WalkError::LeftDomain(x.to_vec()))?;
        let mut y = [0.0; 2];
        for attempt in 1..=MAX_CONSECUTIVE_REJECTIONS {
            counts.proposals += 1;
            if d == 1 {
                y[0] = x[0] + self.h * (2.0 * rng.random::<f64>() - 1.0);
            } else {
                let r = self.h * rng.random::<f64>().sqrt();
                let t = std::f64::consts::TAU * rng.random::<f64>();
                y[0] = x[0] + r * t.cos();
                y[1] = x[1] + r * t.sin();
            }
            let p = (-(self.spec.value(&y[..d]) - lower) / self.h).exp();
            if rng.random::<f64>() < p {
                counts.accepted += 1;
                x.copy_from_slice(&y[..d]);
                return Ok(());
            }
            if attempt == MAX_CONSECUTIVE_REJECTIONS {
                break;
            }
        }
        Err(WalkError::RejectionStall(MAX_CONSECUTIVE_REJECTIONS, x.to_vec()))
    }
}

/// Counter-based stream for one chain.
pub fn chain_rng(seed: u64, chain: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain as u64);
    rng
}

/// Inverse-CDF sampler of the discrete stationary histogram.
#[derive(Debug, Clone)]
pub struct StationaryHistogram {
    points: Vec<[f64; 2]>,
    cdf: Vec<f64>,
    spacing: f64,
    d: usize,
}

impl StationaryHistogram {
    pub fn new(spec: &PotentialSpec, bx: &AxisBox, h: f64, dx: f64) -> Result<Self, WalkError> {
        let grid = build_grid(bx, dx)?;
        let op = assemble_walk(spec, &grid, h)?;
        let mut acc = 0.0;
        let cdf: Vec<f64> = op
            .stationary_sqrt
            .iter()
            .map(|v| {
                acc += v * v;
                acc
            })
            .collect();
        let total = acc;
        Ok(Self {
            points: (0..grid.len()).map(|i| grid.point(i)).collect(),
            cdf: cdf.into_iter().map(|c| c / total).collect(),
            spacing: grid.spacing,
            d: grid.dim(),
        })
    }

    pub fn mass(&self, i: usize) -> f64 {
        self.cdf[i] - if i == 0 { 0.0 } else { self.cdf[i - 1] }
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i][..self.d]
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn sample(&self, rng: &mut impl Rng) -> Vec<f64> {
        let u = rng.random::<f64>();
        let i = self.cdf.partition_point(|c| *c < u).min(self.cdf.len() - 1);
        (0..self.d)
            .map(|a| self.points[i][a] + self.spacing * (rng.random::<f64>() - 0.5))
            .collect()
    }

    /// Stationary mass of each well of `labeling`.
    pub fn well_fractions(&self, labeling: &LandscapeLabeling) -> Vec<f64> {
        let mut f = vec![0.0; labeling.pairs.len()];
        for i in 0..self.len() {
            f[labeling.well_of(self.point(i))] += self.mass(i);
        }
        f
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalkTrace {
    pub h: f64,
    pub n_chains: usize,
    pub n_wells: usize,
    pub record_every: u64,
    /// Step index of each record.
    pub steps: Vec<u64>,
    /// `occupation[r][k]`: chains in well `k` (0-based) at record `r`.
    pub occupation: Vec<Vec<u64>>,
    /// Per chain, the first step at which it was found in another well at
    /// least `h` below the separating saddle.
    pub first_exit_steps: Vec<Option<u64>>,
    pub acceptance_rate: f64,
    pub proposals: u64,
    /// Well index per chain and record.
    #[serde(skip)]
    pub per_chain: Vec<Vec<u8>>,
}

impl WalkTrace {
    pub fn fractions(&self, k: usize) -> Vec<f64> {
        self.occupation.iter().map(|r| r[k] as f64 / self.n_chains as f64).collect()
    }
}

struct ChainRun {
    wells: Vec<u8>,
    exit: Option<u64>,
    counts: StepCounts,
}

fn initial_point(cfg: &WalkConfig, labeling: &LandscapeLabeling, hist: Option<&StationaryHistogram>, rng: &mut ChaCha8Rng) -> Result<Vec<f64>, WalkError> {
    match &cfg.start {
        Start::Point(x) => Ok(x.clone()),
        Start::Well(k) => labeling
            .pairs
            .get(k.wrapping_sub(1))
            .map(|p| p.minimum.location.clone())
            .ok_or_else(|| WalkError::Config(format!("no well {k}"))),
        Start::Stationary => Ok(hist.expect("histogram built for stationary starts").sample(rng)),
    }
}

/// A departure from `start` counts once the chain sits in `entered` at
/// least `h` below the saddle that separates them.
fn exit_level(labeling: &LandscapeLabeling, start: usize, entered: usize, h: f64) -> f64 {
    let saddle = |k: usize| labeling.pairs[k].saddle.as_ref().map(|s| s.value);
    let level = match (saddle(start), saddle(entered)) {
        (Some(a), Some(b)) => a.max(b),
        (Some(a), None) | (None, Some(a)) => a,
        (None, None) => f64::INFINITY,
    };
    level - h
}

fn run_chain(
    cfg: &WalkConfig,
    sampler: &Sampler,
    labeling: &LandscapeLabeling,
    hist: Option<&StationaryHistogram>,
    chain: usize,
    stop_at_exit: bool,
) -> Result<ChainRun, WalkError> {
    let mut rng = chain_rng(cfg.seed, chain);
    let mut x = initial_point(cfg, labeling, hist, &mut rng)?;
    let start = labeling.well_of(&x);
    let mut wells = Vec::with_capacity((cfg.n_steps / cfg.record_every + 1) as usize);
    if !stop_at_exit {
        wells.push(start as u8);
    }
    let mut exit = None;
    let mut counts = StepCounts::default();
    for t in 1..=cfg.n_steps {
        sampler.step(&mut x, &mut rng, &mut counts)?;
        let w = labeling.well_of(&x);
        if exit.is_none() && w != start && cfg.spec.value(&x) <= exit_level(labeling, start, w, cfg.h) {
            exit = Some(t);
            if stop_at_exit {
                break;
            }
        }
        if !stop_at_exit && t % cfg.record_every == 0 {
            wells.push(w as u8);
        }
    }
    Ok(ChainRun { wells, exit, counts })
}

fn histogram_for(cfg: &WalkConfig) -> Result<Option<StationaryHistogram>, WalkError> {
    if cfg.start != Start::Stationary {
        return Ok(None);
    }
    let dx = cfg.stationary_dx.unwrap_or(cfg.h / 10.0);
    Ok(Some(StationaryHistogram::new(&cfg.spec, &cfg.bx, cfg.h, dx)?))
}

fn run_all(cfg: &WalkConfig, labeling: &LandscapeLabeling, stop_at_exit: bool) -> Result<(Vec<ChainRun>, Sampler), WalkError> {
    cfg.validate()?;
    if labeling.pairs.len() > u8::MAX as usize {
        return Err(WalkError::Config("too many wells".into()));
    }
    let sampler = Sampler::new(&cfg.spec, &cfg.bx, cfg.h);
    let hist = histogram_for(cfg)?;
    let runs = (0..cfg.n_chains)
        .into_par_iter()
        .map(|c| run_chain(cfg, &sampler, labeling, hist.as_ref(), c, stop_at_exit))
        .collect::<Result<Vec<_>, _>>()?;
    Ok((runs, sampler))
}

/// Runs `cfg.n_chains` independent chains and records well occupation.
pub fn simulate(cfg: &WalkConfig, labeling: &LandscapeLabeling) -> Result<WalkTrace, WalkError> {
    let (runs, _) = run_all(cfg, labeling, false)?;
    let n_wells = labeling.pairs.len();
    let n_rec = runs[0].wells.len();
    let mut occupation = vec![vec![0u64; n_wells]; n_rec];
    for r in &runs {
        for (row, &w) in occupation.iter_mut().zip(&r.wells) {
            row[w as usize] += 1;
        }
    }
    let proposals: u64 = runs.iter().map(|r| r.counts.proposals).sum();
    let accepted: u64 = runs.iter().map(|r| r.counts.accepted).sum();
    Ok(WalkTrace {
        h: cfg.h,
        n_chains: cfg.n_chains,
        n_wells,
        record_every: cfg.record_every,
        steps: (0..n_rec as u64).map(|r| r * cfg.record_every).collect(),
        occupation,
        first_exit_steps: runs.iter().map(|r| r.exit).collect(),
        acceptance_rate: accepted as f64 / proposals.max(1) as f64,
        proposals,
        per_chain: runs.into_iter().map(|r| r.wells).collect(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitStats {
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_exited: usize,
    pub n_censored: usize,
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Mean first-exit step from the starting well, chains stopped at exit;
/// bootstrap 95% interval over chains.
pub fn mean_first_exit(cfg: &WalkConfig, labeling: &LandscapeLabeling) -> Result<ExitStats, WalkError> {
    let (runs, _) = run_all(cfg, labeling, true)?;
    let exits: Vec<f64> = runs.iter().filter_map(|r| r.exit).map(|t| t as f64).collect();
    let censored = runs.len() - exits.len();
    if exits.is_empty() {
        return Err(WalkError::TooFewPoints(0));
    }
    let mean = exits.iter().sum::<f64>() / exits.len() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0xB007_57A9);
    let mut boots: Vec<f64> = (0..400)
        .map(|_| (0..exits.len()).map(|_| exits[rng.random_range(0..exits.len())]).sum::<f64>() / exits.len() as f64)
        .collect();
    boots.sort_by(f64::total_cmp);
    Ok(ExitStats {
        mean,
        ci_low: percentile(&boots, 0.025),
        ci_high: percentile(&boots, 0.975),
        n_exited: exits.len(),
        n_censored: censored,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapEstimate {
    pub gap: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    /// Records used by the fit.
    pub window: (usize, usize),
}

/// Exponential relaxation rate of the occupation of `well` (0-based) toward
/// `stationary_fraction`, fitted from the Ehrenfest time `|ln h|/h` on.
pub fn empirical_gap(trace: &WalkTrace, well: usize, stationary_fraction: f64, seed: u64) -> Result<GapEstimate, WalkError> {
    let t0 = 2.0 * trace.h.ln().abs() / trace.h;
    let first = trace.steps.iter().position(|&s| s as f64 >= t0).unwrap_or(trace.steps.len());
    let dev = |occ: &dyn Fn(usize) -> f64, r: usize| occ(r) - stationary_fraction;
    let frac = |r: usize| trace.occupation[r][well] as f64 / trace.n_chains as f64;
    if trace.steps.len() < first + 3 {
        let (start, end) = (dev(&frac, 0), dev(&frac, trace.steps.len() - 1));
        if end > 0.5 * start {
            return Err(WalkError::NotRelaxed { start, end });
        }
        return Err(WalkError::TooFewPoints(trace.steps.len().saturating_sub(first)));
    }
    let start = dev(&frac, first);
    let end = dev(&frac, trace.steps.len() - 1);
    if start <= 0.0 || end > 0.5 * start {
        return Err(WalkError::NotRelaxed { start, end });
    }
    let fit = |occ: &dyn Fn(usize) -> f64| -> Option<(f64, (usize, usize))> {
        let d0 = dev(occ, first);
        let sigma = (stationary_fraction * (1.0 - stationary_fraction) / trace.n_chains as f64).sqrt();
        let floor = (0.05 * d0).max(3.0 * sigma);
        let mut last = first;
        while last + 1 < trace.steps.len() && dev(occ, last + 1) > floor {
            last += 1;
        }
        if last < first + 2 {
            return None;
        }
        let pts: Vec<(f64, f64)> = (first..=last).map(|r| (trace.steps[r] as f64, dev(occ, r).ln())).collect();
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        Some((1.0 - (sxy / sxx).exp(), (first, last)))
    };
    let (gap, window) = fit(&frac).ok_or(WalkError::TooFewPoints(0))?;
    let mut boots = Vec::new();
    if !trace.per_chain.is_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let nc = trace.per_chain.len();
        for _ in 0..200 {
            let pick: Vec<usize> = (0..nc).map(|_| rng.random_range(0..nc)).collect();
            let counts: Vec<f64> = (0..trace.steps.len())
                .map(|r| pick.iter().filter(|&&c| trace.per_chain[c][r] as usize == well).count() as f64 / nc as f64)
                .collect();
            if let Some((g, _)) = fit(&|r| counts[r]) {
                boots.push(g);
            }
        }
    }
    boots.sort_by(f64::total_cmp);
    let (ci_low, ci_high) = if boots.len() >= 10 {
        (percentile(&boots, 0.025), percentile(&boots, 0.975))
    } else {
        (gap, gap)
    };
    Ok(GapEstimate {
        gap,
        ci_low,
        ci_high,
        window,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_bound_is_below_ball_minimum() {
        let spec = PotentialSpec::double_well_tilted(0.3);
        let bx = AxisBox::symmetric(1, 2.0);
        let h = 0.25;
        let t = LowerBoundTable::new(&spec, &bx, h);
        for i in 0..200 {
            let x = -2.0 + 4.0 * i as f64 / 199.0;
            let lb = t.lookup(&[x]).unwrap();
            let m = (0..=400)
                .map(|j| spec.value(&[x - h + 2.0 * h * j as f64 / 400.0]))
                .fold(f64::INFINITY, f64::min);
            assert!(lb <= m, "x={x} lb={lb} min={m}");
            if x.abs() <= 1.5 {
                assert!(m - lb < 0.5, "bound too loose at {x}: {}", m - lb);
            }
        }
    }

    #[test]
    fn constant_potential_steps_are_uniform() {
        let spec = PotentialSpec::poly1(&[(0, 1.0)]);
        let bx = AxisBox::symmetric(1, 2.0);
        let s = Sampler::new(&spec, &bx, 0.2);
        let mut rng = chain_rng(3, 0);
        let mut c = StepCounts::default();
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            let mut x = [0.0];
            s.step(&mut x, &mut rng, &mut c).unwrap();
            sum += x[0];
        }
        let sigma = 0.2 / 3f64.sqrt() / (n as f64).sqrt();
        assert!((sum / n as f64).abs() < 4.0 * sigma);
        assert_eq!(c.proposals, c.accepted);
    }
}
