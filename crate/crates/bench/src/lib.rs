//! Fixtures shared by the kernel benchmarks.

use layerdarcy::io::strip_breakpoints;
use layerdarcy::{choose_delta, EnsembleSpec, Grid, LayerConfig, Model, Problem, SimState, Study};

/// Two-layer convecting configuration on an aligned grid.
pub struct Fixture {
    pub study: Study,
    pub problem: Problem,
    pub state: SimState,
}

pub fn two_layer() -> LayerConfig {
    LayerConfig::new(1.0, 1.0, vec![-0.5], vec![1.0, 10.0], vec![1.0, 4.0], 60.0, 0.0).expect("valid layers")
}

pub fn fixture(nx: usize, ny: usize, nz: usize, model: Model) -> Fixture {
    let cfg = two_layer();
    let delta = choose_delta(&cfg, 4.0, 1.0).expect("strip width").delta;
    let grid = Grid::aligned(&cfg, nx, ny, nz, &[model.epsilon()], &strip_breakpoints(&cfg, delta)).expect("grid");
    let study = Study::new(&cfg, &grid, delta).expect("spectrum");
    let problem = study.problem(model).expect("problem");
    let psi = study.ensemble(&EnsembleSpec { count: 1, ..Default::default() }).expect("ensemble").remove(0);
    let state = problem.initial_state(&psi).expect("state");
    Fixture { study, problem, state }
}
