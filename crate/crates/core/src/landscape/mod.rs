//! Critical points, separating saddles and the well labeling.
//!
//! Minima are paired with separating saddles by 0-dimensional sublevel-set
//! persistence on a grid: every merge event of the sweep is a separating
//! saddle, and the component that dies there is the well `E_k`. Values and
//! locations reported in the labeling come from Newton-refined critical
//! points, not from the grid.

mod critical;
mod persistence;

pub use critical::{find_critical_points, find_critical_points_with, CriticalPoint};
pub use persistence::{
    key_less, persistence_sweep, sublevel_component, Adjacency, MergeEvent, Path,
    PersistencePairing,
};

use log::warn;
use thiserror::Error;

use crate::discretize::grid::{build_grid_capped, Grid, GridError, DEFAULT_CELL_CAP};
use crate::potential::{AxisBox, PotentialSpec, MORSE_TOLERANCE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LandscapeError {
    #[error("potential and box dimensions differ")]
    DimensionMismatch,
    #[error("critical point at {location:?} is degenerate (Hessian eigenvalue {eigenvalue:e})")]
    NonMorseCritical { location: Vec<f64>, eigenvalue: f64 },
    #[error(
        "{what} cell at {at:?} has {found} candidate critical points within {radius}; refine the grid or adjust match_radius"
    )]
    AmbiguousMatch {
        what: &'static str,
        at: Vec<f64>,
        found: usize,
        radius: f64,
    },
    #[error("separating merge at {0:?} lies on the box boundary; enlarge the box")]
    BoundaryMerge(Vec<f64>),
    #[error("{pairs} pairs for {minima} minima")]
    PairingMismatch { pairs: usize, minima: usize },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Arrhenius number of a pair: `φ(s_k) − φ(m_k)`, infinite for the global well.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Barrier {
    Infinite,
    Finite(f64),
}

impl Barrier {
    pub fn finite(self) -> Option<f64> {
        match self {
            Barrier::Finite(s) => Some(s),
            Barrier::Infinite => None,
        }
    }

    pub fn value(self) -> f64 {
        self.finite().unwrap_or(f64::INFINITY)
    }
}

/// One `(m_k, s_k, S_k)` triple.
#[derive(Debug, Clone, PartialEq)]
pub struct WellPair {
    pub k: usize,
    pub minimum: CriticalPoint,
    /// `None` stands for the saddle at infinity of the global well.
    pub saddle: Option<CriticalPoint>,
    pub arrhenius: Barrier,
    pub birth_cell: usize,
    pub merge_cell: Option<usize>,
    /// Grid persistence of the merge event (finite pairs only).
    pub persistence: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct LandscapeLabeling {
    /// `m_1, …, m_{n0}` in pair order.
    pub minima: Vec<CriticalPoint>,
    /// `s_1 = ∞` is `None`.
    pub saddles: Vec<Option<CriticalPoint>>,
    pub pairs: Vec<WellPair>,
    /// Well index (0-based, pair order) of every cell of `grid`.
    pub component_ids: Vec<usize>,
    pub n0: usize,
    pub n1: usize,
    pub critical_points: Vec<CriticalPoint>,
    /// Index-1 points that separate nothing.
    pub unpaired_saddles: Vec<CriticalPoint>,
    pub grid: Grid,
    pub values: Vec<f64>,
    pub warnings: Vec<String>,
}

impl LandscapeLabeling {
    /// Well index of an arbitrary point. Points off the grid go to the
    /// nearest minimum.
    pub fn well_of(&self, x: &[f64]) -> usize {
        match self.grid.cell_of(x) {
            Some(i) => self.component_ids[i],
            None => self.nearest_minimum(x),
        }
    }

    pub fn nearest_minimum(&self, x: &[f64]) -> usize {
        let mut best = 0;
        let mut bd = f64::INFINITY;
        for (k, m) in self.minima.iter().enumerate() {
            let d = m.distance_to(x);
            if d < bd {
                bd = d;
                best = k;
            }
        }
        best
    }

    /// The well `E_k` (0-based `k`) at its merge level as a cell mask on
    /// `grid`: the sublevel component of `m_k` strictly below `s_k`.
    pub fn well_mask(&self, k: usize) -> Vec<bool> {
        let p = &self.pairs[k];
        match p.merge_cell {
            None => vec![true; self.values.len()],
            Some(mc) => sublevel_component(&self.values, &self.grid, p.birth_cell, mc),
        }
    }

    pub fn arrhenius(&self) -> Vec<Barrier> {
        self.pairs.iter().map(|p| p.arrhenius).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LandscapeOptions {
    /// Spacing of the persistence grid.
    pub dx: f64,
    pub coarse_spacing: f64,
    pub newton_tolerance: f64,
    pub match_radius: f64,
    pub morse_tolerance: f64,
    pub cell_cap: usize,
}

impl LandscapeOptions {
    pub fn new(dx: f64) -> Self {
        Self {
            dx,
            coarse_spacing: 0.02,
            newton_tolerance: 1e-11,
            match_radius: 0.1,
            morse_tolerance: MORSE_TOLERANCE,
            cell_cap: DEFAULT_CELL_CAP,
        }
    }
}

/// Full labeling pipeline: critical points, grid sweep, matching.
pub fn analyze_landscape(
    spec: &PotentialSpec,
    bx: &AxisBox,
    opts: &LandscapeOptions,
) -> Result<LandscapeLabeling, LandscapeError> {
    let critical = find_critical_points_with(
        spec,
        bx,
        opts.coarse_spacing,
        opts.newton_tolerance,
        opts.morse_tolerance,
    )?;
    let grid = build_grid_capped(bx, opts.dx, opts.cell_cap)?;
    let values = grid.sample(|x| spec.value(x));
    let pairing = persistence_sweep(&values, &grid);
    label_landscape(spec, critical, &pairing, grid, values, opts.match_radius)
}

/// Persistence below this is attributed to sampling: `10·δx·L`, with `L`
/// the largest gradient over cells not above the highest merge value.
pub fn discard_threshold(spec: &PotentialSpec, grid: &Grid, values: &[f64], pairing: &PersistencePairing) -> f64 {
    let top = pairing
        .events
        .iter()
        .map(|e| e.merge_value)
        .fold(f64::NEG_INFINITY, f64::max);
    if top == f64::NEG_INFINITY {
        return 0.0;
    }
    let d = grid.dim();
    let lip = (0..grid.len())
        .filter(|&i| values[i] <= top)
        .map(|i| spec.grad_norm(&grid.point(i)[..d]))
        .fold(0.0, f64::max);
    10.0 * grid.spacing * lip
}

fn match_one<'a>(
    what: &'static str,
    at: Vec<f64>,
    candidates: impl Iterator<Item = (usize, &'a CriticalPoint)>,
    radius: f64,
) -> Result<usize, LandscapeError> {
    let hits: Vec<usize> = candidates
        .filter(|(_, c)| c.distance_to(&at) <= radius)
        .map(|(i, _)| i)
        .collect();
    if hits.len() == 1 {
        Ok(hits[0])
    } else {
        Err(LandscapeError::AmbiguousMatch {
            what,
            at,
            found: hits.len(),
            radius,
        })
    }
}

/// Matches merge events to refined critical points and assembles the pairs.
pub fn label_landscape(
    spec: &PotentialSpec,
    critical: Vec<CriticalPoint>,
    pairing: &PersistencePairing,
    grid: Grid,
    values: Vec<f64>,
    match_radius: f64,
) -> Result<LandscapeLabeling, LandscapeError> {
    let mut warnings = Vec::new();
    let thr = discard_threshold(spec, &grid, &values, pairing);
    let (kept, dropped): (Vec<&MergeEvent>, Vec<&MergeEvent>) =
        pairing.events.iter().partition(|e| e.persistence >= thr);
    if !dropped.is_empty() {
        let msg = format!(
            "discarded {} merge event(s) with persistence below {:.3e}",
            dropped.len(),
            thr
        );
        warn!("{msg}");
        warnings.push(msg);
    }

    let minima_idx = |c: &&CriticalPoint| c.index == 0;
    let n0 = critical.iter().filter(minima_idx).count();
    let n1 = critical.iter().filter(|c| c.index == 1).count();
    let index0 = || critical.iter().enumerate().filter(|(_, c)| c.index == 0);
    let index1 = || critical.iter().enumerate().filter(|(_, c)| c.index == 1);

    let survivor = match_one(
        "birth",
        grid.point_vec(pairing.survivor_cell),
        index0(),
        match_radius,
    )?;
    let mut used_min = vec![survivor];
    let mut used_saddle = Vec::new();
    let mut finite = Vec::new();
    for e in kept {
        let at = grid.point_vec(e.merge_cell);
        if grid.on_boundary(e.merge_cell) {
            return Err(LandscapeError::BoundaryMerge(at));
        }
        let m = match_one("birth", grid.point_vec(e.birth_cell), index0(), match_radius)?;
        let s = match_one("merge", at, index1(), match_radius)?;
        if used_min.contains(&m) || used_saddle.contains(&s) {
            return Err(LandscapeError::PairingMismatch {
                pairs: used_min.len() + 1,
                minima: n0,
            });
        }
        used_min.push(m);
        used_saddle.push(s);
        finite.push((m, s, *e));
    }
    if used_min.len() != n0 {
        return Err(LandscapeError::PairingMismatch {
            pairs: used_min.len(),
            minima: n0,
        });
    }

    let mut pairs = vec![WellPair {
        k: 1,
        minimum: critical[survivor].clone(),
        saddle: None,
        arrhenius: Barrier::Infinite,
        birth_cell: pairing.survivor_cell,
        merge_cell: None,
        persistence: None,
    }];
    let mut rest: Vec<WellPair> = finite
        .iter()
        .map(|&(m, s, e)| WellPair {
            k: 0,
            minimum: critical[m].clone(),
            saddle: Some(critical[s].clone()),
            arrhenius: Barrier::Finite(critical[s].value - critical[m].value),
            birth_cell: e.birth_cell,
            merge_cell: Some(e.merge_cell),
            persistence: Some(e.persistence),
        })
        .collect();
    rest.sort_by(|a, b| b.arrhenius.value().total_cmp(&a.arrhenius.value()));
    pairs.extend(rest);
    for (i, p) in pairs.iter_mut().enumerate() {
        p.k = i + 1;
    }

    let unpaired_saddles = index1()
        .filter(|(i, _)| !used_saddle.contains(i))
        .map(|(_, c)| c.clone())
        .collect();

    let component_ids = membership(&grid, &values, &pairs);
    Ok(LandscapeLabeling {
        minima: pairs.iter().map(|p| p.minimum.clone()).collect(),
        saddles: pairs.iter().map(|p| p.saddle.clone()).collect(),
        pairs,
        component_ids,
        n0,
        n1,
        critical_points: critical,
        unpaired_saddles,
        grid,
        values,
        warnings,
    })
}

/// Assigns every cell to a well: nested wells take precedence (lowest merge
/// level first), remaining cells belong to the global well, and merge cells
/// go to the nearest minimum.
fn membership(grid: &Grid, values: &[f64], pairs: &[WellPair]) -> Vec<usize> {
    const NONE: usize = usize::MAX;
    let mut ids = vec![NONE; values.len()];
    let mut order: Vec<usize> = (1..pairs.len()).collect();
    order.sort_by(|&a, &b| {
        let (ma, mb) = (pairs[a].merge_cell.unwrap(), pairs[b].merge_cell.unwrap());
        values[ma].total_cmp(&values[mb]).then(ma.cmp(&mb))
    });
    for k in order {
        let mc = pairs[k].merge_cell.unwrap();
        let mask = sublevel_component(values, grid, pairs[k].birth_cell, mc);
        for (id, inside) in ids.iter_mut().zip(mask) {
            if inside && *id == NONE {
                *id = k;
            }
        }
    }
    for id in ids.iter_mut() {
        if *id == NONE {
            *id = 0;
        }
    }
    for p in &pairs[1..] {
        let mc = p.merge_cell.unwrap();
        let x = grid.point_vec(mc);
        let mut best = (f64::INFINITY, 0);
        for (k, q) in pairs.iter().enumerate() {
            let d = q.minimum.distance_to(&x);
            if d < best.0 {
                best = (d, k);
            }
        }
        ids[mc] = best.1;
    }
    ids
}

/// Independent labeling by flood fill: for every index-1 point `s` the
/// sublevel set `{φ < φ(s) − 1e-9}` is split into components; `s` is
/// separating when its two descent directions land in different components,
/// and it is paired with the minimum of the component whose lowest value is
/// higher. Grid cells on both sides of `s` sit below `φ(s)` by `O(δx²)`, so cells
/// within `4δx` of `s` are removed before the fill. Returns `(minimum, saddle, S)` triples with indices into
/// `critical`, sorted by decreasing `S`.
pub fn brute_force_pairs(
    spec: &PotentialSpec,
    grid: &Grid,
    values: &[f64],
    critical: &[CriticalPoint],
) -> Vec<(usize, usize, f64)> {
    let n = values.len();
    let d = grid.dim();
    let mut out = Vec::new();
    let mut nb = Vec::new();
    for (si, s) in critical.iter().enumerate().filter(|(_, c)| c.index == 1) {
        let level = s.value - 1e-9;
        let hole = 4.0 * grid.spacing;
        let below = |i: usize| values[i] < level && s.distance_to(&grid.point(i)[..d]) > hole;
        let mut comp = vec![usize::MAX; n];
        let mut comp_min: Vec<usize> = Vec::new();
        for start in 0..n {
            if !below(start) || comp[start] != usize::MAX {
                continue;
            }
            let id = comp_min.len();
            comp_min.push(start);
            comp[start] = id;
            let mut stack = vec![start];
            while let Some(i) = stack.pop() {
                if values[i] < values[comp_min[id]] {
                    comp_min[id] = i;
                }
                grid.axis_neighbors(i, &mut nb);
                for &j in &nb {
                    if comp[j] == usize::MAX && below(j) {
                        comp[j] = id;
                        stack.push(j);
                    }
                }
            }
        }
        let v = spec.hess(&s.location).lowest_eigenvector();
        let descend = |sign: f64| -> Option<usize> {
            for step in 5..=400 {
                let t = sign * step as f64 * grid.spacing;
                let x: Vec<f64> = (0..d).map(|a| s.location[a] + t * v[a]).collect();
                let c = grid.cell_of(&x)?;
                if comp[c] != usize::MAX {
                    return Some(comp[c]);
                }
            }
            None
        };
        let (Some(a), Some(b)) = (descend(1.0), descend(-1.0)) else {
            continue;
        };
        if a == b {
            continue;
        }
        let (ca, cb) = (comp_min[a], comp_min[b]);
        let younger = if key_less(values, ca, cb) { cb } else { ca };
        let x = grid.point_vec(younger);
        let m = critical
            .iter()
            .enumerate()
            .filter(|(_, c)| c.index == 0)
            .min_by(|p, q| p.1.distance_to(&x).total_cmp(&q.1.distance_to(&x)))
            .map(|(i, _)| i);
        if let Some(m) = m {
            out.push((m, si, s.value - critical[m].value));
        }
    }
    out.sort_by(|a, b| b.2.total_cmp(&a.2));
    out
}
