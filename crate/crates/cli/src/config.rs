//! Run configuration files.

use std::path::{Path, PathBuf};

use ballwalk_core::discretize::MIN_CELLS_PER_BALL;
use ballwalk_core::eigen::{SolverOptions, DEFAULT_DENSE_CUTOFF};
use ballwalk_core::landscape::LandscapeOptions;
use ballwalk_core::potential::{AxisBox, PotentialDef, PotentialSpec};
use ballwalk_core::walk::{Start, WalkConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub schema_version: u32,
    /// Worker threads; 0 picks the number of available cores.
    #[serde(default)]
    pub threads: usize,
    pub potential: PotentialDef,
    #[serde(rename = "box")]
    pub bx: AxisBox,
    pub dx: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h_list: Option<Vec<f64>>,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub landscape: LandscapeSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub walk: Option<WalkSection>,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    pub tol: f64,
    pub max_iter: usize,
    pub dense_cutoff: usize,
    /// Eigenvalues per operator; defaults to `n0 + 2`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    /// `h` values at which `sweep` also solves the Witten operator; all by default.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub witten_h_list: Option<Vec<f64>>,
}

impl SolverSection {
    pub fn witten_h(&self, h: f64) -> bool {
        self.witten_h_list.as_ref().map_or(true, |l| l.contains(&h))
    }
}

impl Default for SolverSection {
    fn default() -> Self {
        let d = SolverOptions::default();
        Self {
            tol: d.tol,
            max_iter: d.max_iter,
            dense_cutoff: DEFAULT_DENSE_CUTOFF,
            count: None,
            witten_h_list: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LandscapeSection {
    /// Persistence grid spacing; defaults to the operator `dx`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dx: Option<f64>,
    pub coarse_spacing: f64,
    pub newton_tolerance: f64,
    pub match_radius: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cell_cap: Option<usize>,
}

impl Default for LandscapeSection {
    fn default() -> Self {
        let d = LandscapeOptions::new(1.0);
        Self {
            dx: None,
            coarse_spacing: d.coarse_spacing,
            newton_tolerance: d.newton_tolerance,
            match_radius: d.match_radius,
            cell_cap: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkSection {
    /// Defaults to the run `h`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    pub n_steps: u64,
    pub n_chains: usize,
    #[serde(default)]
    pub seed: u64,
    pub start: Start,
    #[serde(default = "one")]
    pub record_every: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stationary_dx: Option<f64>,
    /// When present, mean first-exit times are measured at each of these.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exit_h_list: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exit_n_chains: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exit_max_steps: Option<u64>,
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Mwop,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub directory: PathBuf,
    pub formats: Vec<Format>,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            directory: PathBuf::from("out"),
            formats: vec![Format::Json, Format::Csv],
        }
    }
}

impl OutputSection {
    pub fn wants(&self, f: Format) -> bool {
        self.formats.contains(&f)
    }
}

fn bad(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(bad(format!("{name} must be positive and finite, got {v}")))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| bad(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| bad(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(bad(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        let spec = self.spec()?;
        if !self.bx.is_valid() || self.bx.dim() != spec.dimension() {
            return Err(bad("box must have lower < upper in the potential dimension"));
        }
        positive("dx", self.dx)?;
        let hs = match (&self.h, &self.h_list) {
            (Some(_), Some(_)) => return Err(bad("give either h or h_list, not both")),
            (None, None) => return Err(bad("missing h or h_list")),
            (Some(h), None) => vec![*h],
            (None, Some(l)) if l.is_empty() => return Err(bad("h_list is empty")),
            (None, Some(l)) => l.clone(),
        };
        for w in hs.windows(2) {
            if w[1] >= w[0] {
                return Err(bad("h_list must be strictly decreasing"));
            }
        }
        for &h in &hs {
            positive("h", h)?;
            if h < MIN_CELLS_PER_BALL * self.dx {
                return Err(bad(format!("h = {h} is below {MIN_CELLS_PER_BALL}·dx")));
            }
        }
        positive("solver.tol", self.solver.tol)?;
        if self.solver.max_iter == 0 {
            return Err(bad("solver.max_iter must be positive"));
        }
        if let Some(dx) = self.landscape.dx {
            positive("landscape.dx", dx)?;
        }
        positive("landscape.coarse_spacing", self.landscape.coarse_spacing)?;
        positive("landscape.newton_tolerance", self.landscape.newton_tolerance)?;
        positive("landscape.match_radius", self.landscape.match_radius)?;
        if let Some(w) = &self.walk {
            if let Some(h) = w.h {
                positive("walk.h", h)?;
            }
            if let Some(dx) = w.stationary_dx {
                positive("walk.stationary_dx", dx)?;
            }
            if let Some(l) = &w.exit_h_list {
                if l.len() < 2 {
                    return Err(bad("walk.exit_h_list needs at least two values"));
                }
                for &h in l {
                    positive("walk.exit_h_list", h)?;
                }
            }
            self.walk_config()?
                .expect("walk block present")
                .validate()
                .map_err(|e| bad(e.to_string()))?;
        }
        if self.output.formats.is_empty() {
            return Err(bad("output.formats is empty"));
        }
        Ok(())
    }

    pub fn spec(&self) -> Result<PotentialSpec, CliError> {
        PotentialSpec::try_from(self.potential.clone()).map_err(|e| bad(format!("potential: {e}")))
    }

    /// The run's `h` values, largest first.
    pub fn h_values(&self) -> Vec<f64> {
        match (&self.h, &self.h_list) {
            (_, Some(l)) => l.clone(),
            (Some(h), None) => vec![*h],
            (None, None) => Vec::new(),
        }
    }

    pub fn landscape_options(&self) -> LandscapeOptions {
        let l = &self.landscape;
        let mut o = LandscapeOptions::new(l.dx.unwrap_or(self.dx));
        o.coarse_spacing = l.coarse_spacing;
        o.newton_tolerance = l.newton_tolerance;
        o.match_radius = l.match_radius;
        if let Some(cap) = l.cell_cap {
            o.cell_cap = cap;
        }
        o
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.solver.tol,
            max_iter: self.solver.max_iter,
            dense_cutoff: self.solver.dense_cutoff,
            ..SolverOptions::default()
        }
    }

    pub fn walk_config(&self) -> Result<Option<WalkConfig>, CliError> {
        let Some(w) = &self.walk else {
            return Ok(None);
        };
        let h = w
            .h
            .or_else(|| self.h_values().last().copied())
            .ok_or_else(|| bad("walk.h missing"))?;
        Ok(Some(WalkConfig {
            spec: self.spec()?,
            bx: self.bx.clone(),
            h,
            n_steps: w.n_steps,
            n_chains: w.n_chains,
            seed: w.seed,
            start: w.start.clone(),
            record_every: w.record_every,
            stationary_dx: w.stationary_dx,
        }))
    }
}
