//! Fixtures shared by the benchmarks.

use ballwalk_core::discretize::{build_grid, Grid};
use ballwalk_core::potential::{AxisBox, PotentialSpec};

/// A benchmark potential on its box, gridded at `dx`.
pub struct Fixture {
    pub name: &'static str,
    pub spec: PotentialSpec,
    pub bx: AxisBox,
    pub grid: Grid,
    pub h: f64,
}

pub fn tilted(dx: f64, h: f64) -> Fixture {
    let bx = AxisBox::symmetric(1, 2.0);
    Fixture {
        name: "double_well_tilted",
        spec: PotentialSpec::double_well_tilted(0.3),
        grid: build_grid(&bx, dx).expect("valid grid"),
        bx,
        h,
    }
}

pub fn three_well(dx: f64, h: f64) -> Fixture {
    let bx = AxisBox::symmetric(2, 3.2);
    Fixture {
        name: "three_well",
        spec: PotentialSpec::three_well(),
        grid: build_grid(&bx, dx).expect("valid grid"),
        bx,
        h,
    }
}

/// A deterministic test vector of length `n`.
pub fn probe(n: usize) -> Vec<f64> {
    (0..n).map(|i| ((i as f64) * 0.618_033_988_75).fract() - 0.5).collect()
}
