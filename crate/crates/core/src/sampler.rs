//! Seeded random band-limited fields built from eigenfunctions of `L`.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::domain::Grid;
use crate::error::{Error, Result};
use crate::field;
use crate::fourier::Fourier;
use crate::operator::Spectrum;

/// Shape of a random ensemble.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleSpec {
    pub count: usize,
    pub seed: u64,
    /// Largest horizontal wavenumber index used (further capped at `N/3`).
    pub max_wavenumber: usize,
    /// Number of vertical eigenfunctions per horizontal mode.
    pub vertical_modes: usize,
    /// `L²` norm of every generated field.
    pub amplitude: f64,
    /// Coefficients decay like `(1 + n + |m|)^{-decay}`.
    pub decay: f64,
}

impl Default for EnsembleSpec {
    fn default() -> Self {
        Self {
            count: 8,
            seed: 7,
            max_wavenumber: 2,
            vertical_modes: 6,
            amplitude: 1.0,
            decay: 1.0,
        }
    }
}

/// Fields `Σ c · w_n^{(k)}(z) cos(k·x + φ)` scaled to the requested `L²` norm.
pub fn ensemble(grid: &Grid, spectrum: &Spectrum, spec: &EnsembleSpec) -> Result<Vec<Vec<f64>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    (0..spec.count)
        .map(|_| random_field(grid, spectrum, spec, &mut rng))
        .collect()
}

/// One random field drawn from `rng`.
pub fn random_field(grid: &Grid, spectrum: &Spectrum, spec: &EnsembleSpec, rng: &mut impl Rng) -> Result<Vec<f64>> {
    if spectrum.nx != grid.nx || spectrum.ny != grid.ny || spectrum.nz != grid.nz() {
        return Err(Error::ShapeMismatch {
            expected: grid.len(),
            got: spectrum.modes() * spectrum.nz,
        });
    }
    if !(spec.amplitude >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "amplitude",
            reason: format!("must be nonnegative, got {}", spec.amplitude),
        });
    }
    let nz = grid.nz();
    let mx_max = spec.max_wavenumber.min(grid.nx / 3) as i64;
    let my_max = spec.max_wavenumber.min(grid.ny / 3) as i64;
    let nv = spec.vertical_modes.clamp(1, spectrum.cutoff);
    let base = 2.0 * PI / grid.length;
    let xs = grid.x_coords();
    let ys = grid.y_coords();
    let mut psi = vec![0.0; grid.len()];
    // half-plane of wavevectors; cos(k·x + φ) covers ±k
    for my in -my_max..=my_max {
        for mx in 0..=mx_max {
            if mx == 0 && my < 0 {
                continue;
            }
            let i = mx as usize;
            let j = my.rem_euclid(grid.ny as i64) as usize;
            let mode = j * grid.nx + i;
            let phase: f64 = rng.random::<f64>() * 2.0 * PI;
            for n in 0..nv {
                let g: f64 = rng.sample(StandardNormal);
                let c = g * (1.0 + n as f64 + (mx.abs() + my.abs()) as f64).powf(-spec.decay);
                let w = spectrum.vector(mode, n);
                for (y, &yy) in ys.iter().enumerate() {
                    for (x, &xx) in xs.iter().enumerate() {
                        let h = if mx == 0 && my == 0 {
                            1.0
                        } else {
                            (base * (mx as f64 * xx + my as f64 * yy) + phase).cos()
                        };
                        let col = &mut psi[(y * grid.nx + x) * nz..][..nz];
                        for (v, wz) in col.iter_mut().zip(w) {
                            *v += c * h * wz;
                        }
                    }
                }
            }
        }
    }
    let norm = field::l2_norm(grid, &psi);
    if norm > 0.0 {
        let f = spec.amplitude / norm;
        psi.iter_mut().for_each(|v| *v *= f);
    }
    Ok(psi)
}

/// `base + rel · ‖base‖_{ℋ^s} · q / ‖q‖_{ℋ^s}` for a random field `q`.
pub fn perturbed(
    grid: &Grid,
    fourier: &Fourier,
    spectrum: &Spectrum,
    base: &[f64],
    rel: f64,
    s: f64,
    spec: &EnsembleSpec,
    rng: &mut impl Rng,
) -> Result<Vec<f64>> {
    field::check_len(grid, base)?;
    let q = random_field(grid, spectrum, spec, rng)?;
    let nb = spectrum.fractional_norm(&spectrum.expand(fourier, base)?, s)?;
    let nq = spectrum.fractional_norm(&spectrum.expand(fourier, &q)?, s)?;
    if nq == 0.0 {
        return Err(Error::Degenerate("perturbation direction is zero".into()));
    }
    let f = rel * nb / nq;
    Ok(base.iter().zip(&q).map(|(b, q)| b + f * q).collect())
}
