#![allow(dead_code)]

use layerdarcy::io::{estimate_cp, strip_breakpoints};
use layerdarcy::{choose_delta, Grid, LayerConfig};
use nalgebra::{DMatrix, SymmetricEigen};

/// Two layers with a tenfold permeability jump and a fourfold diffusivity jump.
pub fn two_layer(c_delta: f64) -> LayerConfig {
    LayerConfig::new(
        1.0,
        1.0,
        vec![-0.5],
        vec![1.0, 10.0],
        vec![1.0, 4.0],
        c_delta.max(0.0),
        (-c_delta).max(0.0),
    )
    .unwrap()
}

/// Configuration, aligned grid and the automatically chosen strip width.
pub struct Regime {
    pub cfg: LayerConfig,
    pub grid: Grid,
    pub delta: f64,
    pub cp: f64,
}

pub fn regime(cfg: LayerConfig, nx: usize, ny: usize, nz: usize, epsilons: &[f64]) -> Regime {
    let base = Grid::aligned(&cfg, nx, ny, nz, epsilons, &[]).unwrap();
    let cp = estimate_cp(&cfg, &base).unwrap();
    let delta = choose_delta(&cfg, 4.0, cp).unwrap().delta;
    let grid = Grid::aligned(&cfg, nx, ny, nz, epsilons, &strip_breakpoints(&cfg, delta)).unwrap();
    Regime { cfg, grid, delta, cp }
}

fn layer_value(cfg: &LayerConfig, values: &[f64], z: f64) -> f64 {
    values[cfg.layer_of(z)]
}

/// Dense symmetric matrix `H^{-1/2} S_k H^{-1/2}` of the sharp cell-centred
/// operator, assembled from the layer data: harmonic series conductances at
/// interior faces and half-cell Dirichlet conductances at the walls.
pub fn dense_sharp_operator(cfg: &LayerConfig, grid: &Grid, k2: f64) -> DMatrix<f64> {
    let nz = grid.nz();
    let h = grid.widths();
    let d: Vec<f64> = grid.centers().iter().map(|&z| layer_value(cfg, &cfg.diffusivity, z)).collect();
    let mut cond = vec![0.0; nz + 1];
    cond[0] = 2.0 * d[0] / h[0];
    cond[nz] = 2.0 * d[nz - 1] / h[nz - 1];
    for f in 1..nz {
        cond[f] = 1.0 / (0.5 * h[f - 1] / d[f - 1] + 0.5 * h[f] / d[f]);
    }
    let mut s = DMatrix::zeros(nz, nz);
    for i in 0..nz {
        s[(i, i)] = cond[i] + cond[i + 1] + k2 * d[i] * h[i];
        if i + 1 < nz {
            s[(i, i + 1)] = -cond[i + 1];
            s[(i + 1, i)] = -cond[i + 1];
        }
    }
    for i in 0..nz {
        for j in 0..nz {
            s[(i, j)] /= (h[i] * h[j]).sqrt();
        }
    }
    s
}

pub fn dense_eigenvalues(m: DMatrix<f64>) -> Vec<f64> {
    let mut v: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    v
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
