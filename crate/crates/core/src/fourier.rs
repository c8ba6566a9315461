//! Horizontal Fourier transforms and wavenumber bookkeeping.
//!
//! Physical and spectral arrays share the flat layout of [`Grid::idx`]: the
//! vertical index runs fastest, so every horizontal mode owns a contiguous
//! vertical profile. Forward transforms are unnormalized; inverse transforms
//! divide by `N_x N_y`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

use crate::domain::Grid;

/// Transform plans plus per-mode wavenumber tables.
#[derive(Clone)]
pub struct Fourier {
    pub nx: usize,
    pub ny: usize,
    pub nz: usize,
    fwd_x: Arc<dyn Fft<f64>>,
    inv_x: Arc<dyn Fft<f64>>,
    fwd_y: Arc<dyn Fft<f64>>,
    inv_y: Arc<dyn Fft<f64>>,
    /// Signed integer wavenumbers per mode.
    pub mx: Vec<i64>,
    pub my: Vec<i64>,
    /// Angular wavenumbers used for first derivatives (zero on Nyquist lines).
    pub kx: Vec<f64>,
    pub ky: Vec<f64>,
    /// `|k|²` for second derivatives (Nyquist included).
    pub k2: Vec<f64>,
    /// `kx² + ky²` from the derivative wavenumbers.
    pub k2_eff: Vec<f64>,
    /// Modes kept by the two-thirds rule.
    pub dealias: Vec<bool>,
    /// Distinct values of `k2`, ascending, and each mode's class index.
    pub classes: Vec<f64>,
    pub class_of: Vec<usize>,
}

impl std::fmt::Debug for Fourier {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fourier")
            .field("nx", &self.nx)
            .field("ny", &self.ny)
            .field("nz", &self.nz)
            .finish()
    }
}

fn signed(i: usize, n: usize) -> i64 {
    if i <= n / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

impl Fourier {
    pub fn new(grid: &Grid) -> Self {
        let (nx, ny, nz) = (grid.nx, grid.ny, grid.nz());
        let mut planner = FftPlanner::new();
        let fwd_x = planner.plan_fft_forward(nx);
        let inv_x = planner.plan_fft_inverse(nx);
        let fwd_y = planner.plan_fft_forward(ny);
        let inv_y = planner.plan_fft_inverse(ny);
        let base = 2.0 * PI / grid.length;
        let modes = nx * ny;
        let mut t = Self {
            nx,
            ny,
            nz,
            fwd_x,
            inv_x,
            fwd_y,
            inv_y,
            mx: Vec::with_capacity(modes),
            my: Vec::with_capacity(modes),
            kx: Vec::with_capacity(modes),
            ky: Vec::with_capacity(modes),
            k2: Vec::with_capacity(modes),
            k2_eff: Vec::with_capacity(modes),
            dealias: Vec::with_capacity(modes),
            classes: Vec::new(),
            class_of: Vec::with_capacity(modes),
        };
        for j in 0..ny {
            for i in 0..nx {
                let mx = signed(i, nx);
                let my = signed(j, ny);
                let nyq_x = nx > 1 && nx % 2 == 0 && i == nx / 2;
                let nyq_y = ny > 1 && ny % 2 == 0 && j == ny / 2;
                let kx = if nyq_x { 0.0 } else { base * mx as f64 };
                let ky = if nyq_y { 0.0 } else { base * my as f64 };
                t.mx.push(mx);
                t.my.push(my);
                t.kx.push(kx);
                t.ky.push(ky);
                t.k2.push(base * base * (mx * mx + my * my) as f64);
                t.k2_eff.push(kx * kx + ky * ky);
                t.dealias
                    .push(mx.unsigned_abs() as usize <= nx / 3 && my.unsigned_abs() as usize <= ny / 3);
            }
        }
        let mut distinct = t.k2.clone();
        distinct.sort_by(f64::total_cmp);
        distinct.dedup();
        t.class_of = t
            .k2
            .iter()
            .map(|k| distinct.binary_search_by(|c| c.total_cmp(k)).expect("class present"))
            .collect();
        t.classes = distinct;
        t
    }

    pub fn modes(&self) -> usize {
        self.nx * self.ny
    }

    /// Mode index `(j * nx + i)` of a mode's vertical profile.
    #[inline]
    pub fn profile<'a, T>(&self, data: &'a [T], mode: usize) -> &'a [T] {
        &data[mode * self.nz..(mode + 1) * self.nz]
    }

    /// Forward transform of a real field.
    pub fn forward(&self, field: &[f64]) -> Vec<Complex64> {
        let mut data: Vec<Complex64> = field.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.transform(&mut data, true);
        data
    }

    /// Forward transform in place on complex data.
    pub fn forward_complex(&self, data: &mut [Complex64]) {
        self.transform(data, true);
    }

    /// Inverse transform, returning the real part.
    pub fn inverse(&self, spec: &[Complex64]) -> Vec<f64> {
        let mut data = spec.to_vec();
        self.transform(&mut data, false);
        data.iter().map(|c| c.re).collect()
    }

    /// Inverse transform in place (normalized).
    pub fn inverse_complex(&self, data: &mut [Complex64]) {
        self.transform(data, false);
    }

    fn transform(&self, data: &mut [Complex64], forward: bool) {
        let (nx, ny) = (self.nx, self.ny);
        // profiles may carry cell values (nz) or face values (nz + 1)
        let nz = data.len() / (nx * ny);
        assert_eq!(data.len(), nx * ny * nz, "field size does not match the grid");
        if nx * ny == 1 {
            return;
        }
        let (fx, fy) = if forward {
            (&self.fwd_x, &self.fwd_y)
        } else {
            (&self.inv_x, &self.inv_y)
        };
        let scale = if forward { 1.0 } else { 1.0 / (nx * ny) as f64 };
        // Gather horizontal planes, transform each independently, scatter back.
        let mut planes = vec![Complex64::new(0.0, 0.0); nx * ny * nz];
        for (col, chunk) in data.chunks_exact(nz).enumerate() {
            for (z, &v) in chunk.iter().enumerate() {
                planes[z * nx * ny + col] = v;
            }
        }
        planes.par_chunks_mut(nx * ny).for_each_init(
            || {
                let len = fx
                    .get_inplace_scratch_len()
                    .max(fy.get_inplace_scratch_len());
                (vec![Complex64::new(0.0, 0.0); len], vec![Complex64::new(0.0, 0.0); ny])
            },
            |(scratch, column), plane| {
                if nx > 1 {
                    let len = fx.get_inplace_scratch_len();
                    fx.process_with_scratch(plane, &mut scratch[..len]);
                }
                if ny > 1 {
                    let len = fy.get_inplace_scratch_len();
                    for i in 0..nx {
                        for j in 0..ny {
                            column[j] = plane[j * nx + i];
                        }
                        fy.process_with_scratch(column, &mut scratch[..len]);
                        for j in 0..ny {
                            plane[j * nx + i] = column[j];
                        }
                    }
                }
                if scale != 1.0 {
                    for v in plane.iter_mut() {
                        *v *= scale;
                    }
                }
            },
        );
        for (col, chunk) in data.chunks_exact_mut(nz).enumerate() {
            for (z, v) in chunk.iter_mut().enumerate() {
                *v = planes[z * nx * ny + col];
            }
        }
    }

    /// Zeroes every mode outside the two-thirds band.
    pub fn apply_dealias(&self, spec: &mut [Complex64]) {
        let nz = spec.len() / self.modes();
        for (mode, keep) in self.dealias.iter().enumerate() {
            if !keep {
                spec[mode * nz..(mode + 1) * nz].fill(Complex64::new(0.0, 0.0));
            }
        }
    }

    /// Band-limits a real field with the two-thirds rule.
    pub fn dealias_field(&self, field: &[f64]) -> Vec<f64> {
        let mut spec = self.forward(field);
        self.apply_dealias(&mut spec);
        self.inverse(&spec)
    }

    /// Spectral horizontal derivatives `(∂x f, ∂y f)` of a real field.
    pub fn horizontal_gradient(&self, spec: &[Complex64]) -> (Vec<f64>, Vec<f64>) {
        let nz = spec.len() / self.modes();
        let mut dx = spec.to_vec();
        let mut dy = spec.to_vec();
        for mode in 0..self.modes() {
            let ikx = Complex64::new(0.0, self.kx[mode]);
            let iky = Complex64::new(0.0, self.ky[mode]);
            for z in 0..nz {
                dx[mode * nz + z] *= ikx;
                dy[mode * nz + z] *= iky;
            }
        }
        (self.inverse(&dx), self.inverse(&dy))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::LayerConfig;

    fn grid(nx: usize, ny: usize, nz: usize) -> Grid {
        let cfg = LayerConfig::new(2.0, 1.0, vec![], vec![1.0], vec![1.0], 1.0, 0.0).unwrap();
        Grid::uniform(&cfg, nx, ny, nz).unwrap()
    }

    #[test]
    fn round_trip() {
        let g = grid(8, 4, 3);
        let f = Fourier::new(&g);
        let field: Vec<f64> = (0..g.len()).map(|i| ((i * 7919) % 101) as f64 / 13.0 - 3.0).collect();
        let back = f.inverse(&f.forward(&field));
        for (a, b) in field.iter().zip(&back) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn single_mode_lands_in_its_bin() {
        let g = grid(8, 4, 2);
        let f = Fourier::new(&g);
        let mut field = vec![0.0; g.len()];
        for y in 0..4 {
            for x in 0..8 {
                let xx = x as f64 * g.dx();
                for z in 0..2 {
                    field[g.idx(x, y, z)] = (2.0 * PI * xx / g.length).cos();
                }
            }
        }
        let spec = f.forward(&field);
        let mode = 1; // (mx, my) = (1, 0)
        assert!((spec[mode * 2].re - 16.0).abs() < 1e-12);
        let (dx, _) = f.horizontal_gradient(&spec);
        for y in 0..4 {
            for x in 0..8 {
                let xx = x as f64 * g.dx();
                let expect = -(2.0 * PI / g.length) * (2.0 * PI * xx / g.length).sin();
                assert!((dx[g.idx(x, y, 0)] - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn classes_cover_modes() {
        let g = grid(8, 8, 1);
        let f = Fourier::new(&g);
        for m in 0..f.modes() {
            assert_eq!(f.classes[f.class_of[m]], f.k2[m]);
        }
        assert_eq!(f.classes[0], 0.0);
        assert_eq!(f.dealias.iter().filter(|&&d| d).count(), 25);
    }
}
