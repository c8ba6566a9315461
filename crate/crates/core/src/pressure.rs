//! Darcy pressure solve and velocity evaluation.
//!
//! Per horizontal mode the pressure satisfies the flux-form balance
//! `q_top - q_bottom + h K |k|² p = 0` with vertical face fluxes
//! `q_f = -K_f [(p_a - p_b)/dist + ψ_f]` and `q = 0` on both walls. The face
//! buoyancy `ψ_f = (h_a ψ_a + h_b ψ_b) / (2 dist)` together with the
//! distance-weighted face permeability gives the exact two-material flux, so
//! a horizontally uniform `ψ` produces no flow at all.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::domain::{CoefficientField, Grid};
use crate::error::{Error, Result};
use crate::field::check_len;
use crate::fourier::Fourier;
use crate::tridiag;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Relative residual allowed in the compatibility condition of hydrostatic modes.
pub const COMPATIBILITY_TOL: f64 = 1e-10;

/// Pressure and velocity on the grid. Face arrays hold `nz + 1` values per column.
#[derive(Debug, Clone)]
pub struct FlowField {
    pub p: Vec<f64>,
    pub ux: Vec<f64>,
    pub uy: Vec<f64>,
    pub uz: Vec<f64>,
    pub p_hat: Vec<Complex64>,
    pub ux_hat: Vec<Complex64>,
    pub uy_hat: Vec<Complex64>,
    pub uz_hat: Vec<Complex64>,
}

/// Spectral pressure/velocity solver for a fixed permeability profile.
#[derive(Debug, Clone)]
pub struct PressureSolver {
    pub grid: Grid,
    pub fourier: Arc<Fourier>,
    pub k_cell: Vec<f64>,
    pub k_face: Vec<f64>,
    /// Interior face conductances `K_f / dist_f` (wall entries zero).
    pub conductance: Vec<f64>,
    /// Centre-to-centre distances (wall entries are half cells).
    pub distance: Vec<f64>,
}

impl PressureSolver {
    pub fn new(grid: &Grid, fourier: Arc<Fourier>, coeffs: &CoefficientField) -> Result<Self> {
        let nz = grid.nz();
        if coeffs.k_cell.len() != nz || coeffs.k_face.len() != nz + 1 {
            return Err(Error::ShapeMismatch {
                expected: nz,
                got: coeffs.k_cell.len(),
            });
        }
        let w = grid.widths();
        let mut distance = vec![0.0; nz + 1];
        let mut conductance = vec![0.0; nz + 1];
        distance[0] = 0.5 * w[0];
        distance[nz] = 0.5 * w[nz - 1];
        for f in 1..nz {
            distance[f] = grid.face_distance(f);
            conductance[f] = coeffs.k_face[f] / distance[f];
        }
        Ok(Self {
            grid: grid.clone(),
            fourier,
            k_cell: coeffs.k_cell.clone(),
            k_face: coeffs.k_face.clone(),
            conductance,
            distance,
        })
    }

    pub fn nz(&self) -> usize {
        self.grid.nz()
    }

    /// Face buoyancy `ψ_f` at interior faces of one profile.
    #[inline]
    fn face_psi(&self, x: &[Complex64], f: usize) -> Complex64 {
        let w = self.grid.widths();
        (x[f - 1] * w[f - 1] + x[f] * w[f]) / (2.0 * self.distance[f])
    }

    /// Pressure tridiagonal `(lower, diag, upper)` for squared derivative wavenumber `k2`.
    pub fn matrix(&self, k2: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let nz = self.nz();
        let w = self.grid.widths();
        let c = &self.conductance;
        let mut lower = vec![0.0; nz];
        let mut diag = vec![0.0; nz];
        let mut upper = vec![0.0; nz];
        for i in 0..nz {
            diag[i] = c[i] + c[i + 1] + w[i] * self.k_cell[i] * k2;
            lower[i] = -c[i];
            upper[i] = -c[i + 1];
        }
        (lower, diag, upper)
    }

    /// Right-hand side `K_f ψ_f |_top - K_f ψ_f |_bottom` per cell.
    pub fn rhs(&self, x: &[Complex64], out: &mut [Complex64]) {
        let nz = self.nz();
        let mut top = ZERO;
        for i in 0..nz {
            let bottom = if i + 1 < nz {
                self.face_psi(x, i + 1) * self.k_face[i + 1]
            } else {
                ZERO
            };
            out[i] = top - bottom;
            top = bottom;
        }
    }

    /// Solves one mode; returns the compatibility residual for hydrostatic modes.
    pub fn solve_mode(&self, k2_eff: f64, x: &[Complex64], out: &mut [Complex64]) -> f64 {
        let nz = self.nz();
        if k2_eff == 0.0 {
            // q ≡ 0: integrate p_b = p_a + dist ψ_f downward, then remove the mean
            let w = self.grid.widths();
            let mut rhs = vec![ZERO; nz];
            self.rhs(x, &mut rhs);
            let total: Complex64 = rhs.iter().sum();
            let scale: f64 = rhs.iter().map(|v| v.norm()).sum::<f64>();
            out[0] = ZERO;
            for f in 1..nz {
                out[f] = out[f - 1] + self.face_psi(x, f) * self.distance[f];
            }
            let depth = self.grid.depth();
            let mean: Complex64 = out.iter().zip(w).map(|(p, h)| p * h).sum::<Complex64>() / depth;
            out.iter_mut().for_each(|p| *p -= mean);
            if scale > 0.0 {
                total.norm() / scale
            } else {
                0.0
            }
        } else {
            let (lower, diag, upper) = self.matrix(k2_eff);
            self.rhs(x, out);
            let mut scratch = vec![0.0; nz];
            tridiag::solve(&lower, &diag, &upper, out, &mut scratch);
            0.0
        }
    }

    /// Spectral pressure from spectral `ψ`.
    pub fn solve_spectral(&self, psi_hat: &[Complex64]) -> Result<Vec<Complex64>> {
        let nz = self.nz();
        let f = &self.fourier;
        let mut p_hat = vec![ZERO; psi_hat.len()];
        let residual = p_hat
            .par_chunks_mut(nz)
            .zip(psi_hat.par_chunks(nz))
            .enumerate()
            .map(|(m, (o, x))| self.solve_mode(f.k2_eff[m], x, o))
            .collect::<Vec<f64>>()
            .into_iter()
            .fold(0.0, f64::max);
        if residual > COMPATIBILITY_TOL {
            return Err(Error::Compatibility { residual });
        }
        Ok(p_hat)
    }

    /// Zero-mean pressure for a physical `ψ`.
    pub fn solve_pressure(&self, psi: &[f64]) -> Result<Vec<f64>> {
        check_len(&self.grid, psi)?;
        let p_hat = self.solve_spectral(&self.fourier.forward(psi))?;
        Ok(self.fourier.inverse(&p_hat))
    }

    /// Vertical face fluxes of one mode (walls zero).
    pub fn face_flux(&self, p: &[Complex64], x: &[Complex64], out: &mut [Complex64]) {
        let nz = self.nz();
        out[0] = ZERO;
        out[nz] = ZERO;
        for f in 1..nz {
            out[f] = -((p[f - 1] - p[f]) / self.distance[f] + self.face_psi(x, f)) * self.k_face[f];
        }
    }

    /// Spectral velocities `(û_x, û_y, q̂)` from spectral pressure and `ψ`.
    pub fn velocity_spectral(
        &self,
        p_hat: &[Complex64],
        psi_hat: &[Complex64],
    ) -> (Vec<Complex64>, Vec<Complex64>, Vec<Complex64>) {
        let nz = self.nz();
        let f = &self.fourier;
        let modes = f.modes();
        let mut ux = vec![ZERO; modes * nz];
        let mut uy = vec![ZERO; modes * nz];
        let mut uz = vec![ZERO; modes * (nz + 1)];
        ux.par_chunks_mut(nz)
            .zip(uy.par_chunks_mut(nz))
            .zip(uz.par_chunks_mut(nz + 1))
            .enumerate()
            .for_each(|(m, ((ox, oy), oz))| {
                let p = &p_hat[m * nz..(m + 1) * nz];
                let x = &psi_hat[m * nz..(m + 1) * nz];
                let ikx = Complex64::new(0.0, f.kx[m]);
                let iky = Complex64::new(0.0, f.ky[m]);
                for i in 0..nz {
                    ox[i] = -ikx * p[i] * self.k_cell[i];
                    oy[i] = -iky * p[i] * self.k_cell[i];
                }
                if f.k2_eff[m] == 0.0 {
                    oz.fill(ZERO);
                } else {
                    self.face_flux(p, x, oz);
                }
            });
        (ux, uy, uz)
    }

    /// Pressure and velocity from spectral `ψ`.
    pub fn flow_spectral(&self, psi_hat: &[Complex64]) -> Result<FlowField> {
        let p_hat = self.solve_spectral(psi_hat)?;
        let (ux_hat, uy_hat, uz_hat) = self.velocity_spectral(&p_hat, psi_hat);
        let f = &self.fourier;
        Ok(FlowField {
            p: f.inverse(&p_hat),
            ux: f.inverse(&ux_hat),
            uy: f.inverse(&uy_hat),
            uz: f.inverse(&uz_hat),
            p_hat,
            ux_hat,
            uy_hat,
            uz_hat,
        })
    }

    /// Pressure and velocity for a physical `ψ`.
    pub fn compute_flow(&self, psi: &[f64]) -> Result<FlowField> {
        check_len(&self.grid, psi)?;
        self.flow_spectral(&self.fourier.forward(psi))
    }

    /// Maximum absolute discrete divergence over all cells.
    pub fn check_divergence(&self, flow: &FlowField) -> f64 {
        let nz = self.nz();
        let f = &self.fourier;
        let w = self.grid.widths();
        let mut div = vec![ZERO; f.modes() * nz];
        for m in 0..f.modes() {
            let ikx = Complex64::new(0.0, f.kx[m]);
            let iky = Complex64::new(0.0, f.ky[m]);
            let q = &flow.uz_hat[m * (nz + 1)..(m + 1) * (nz + 1)];
            for i in 0..nz {
                let c = m * nz + i;
                div[c] = ikx * flow.ux_hat[c] + iky * flow.uy_hat[c] + (q[i] - q[i + 1]) / w[i];
            }
        }
        f.inverse(&div).iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Velocity norm `‖u‖`: cell quadrature horizontally, face quadrature vertically.
    pub fn velocity_norm(&self, flow: &FlowField) -> f64 {
        let nz = self.nz();
        let w = self.grid.widths();
        let mut total = 0.0;
        for col in 0..self.grid.columns() {
            for i in 0..nz {
                let c = col * nz + i;
                total += w[i] * (flow.ux[c] * flow.ux[c] + flow.uy[c] * flow.uy[c]);
            }
            for fc in 1..nz {
                let q = flow.uz[col * (nz + 1) + fc];
                total += self.distance[fc] * q * q;
            }
        }
        (total * self.grid.cell_area()).sqrt()
    }

    /// Cell-centred vertical velocity (average of the bounding faces).
    pub fn uz_cells(&self, uz_faces: &[f64]) -> Vec<f64> {
        let nz = self.nz();
        let mut out = vec![0.0; self.grid.len()];
        for (o, q) in out.chunks_exact_mut(nz).zip(uz_faces.chunks_exact(nz + 1)) {
            for i in 0..nz {
                o[i] = 0.5 * (q[i] + q[i + 1]);
            }
        }
        out
    }
}

/// Outcome of the pressure-constant estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PressureConstant {
    /// `sup ‖∇p‖ / ‖ψ‖` over the discrete space.
    pub value: f64,
    pub iterations: usize,
    pub residual: f64,
}

/// Estimates the operator norm of `ψ ↦ ∇p` by Lanczos iteration with full
/// reorthogonalization on `G* G`, independently for each distinct `|k|²`.
pub fn pressure_constant_estimate(solver: &PressureSolver) -> Result<PressureConstant> {
    let f = &solver.fourier;
    let mut classes: Vec<f64> = f.k2_eff.clone();
    classes.sort_by(f64::total_cmp);
    classes.dedup();
    let results: Vec<Result<PressureConstant>> = classes
        .par_iter()
        .map(|&k2| {
            let map = GradientMap::new(solver, k2);
            lanczos_top(&map)
        })
        .collect();
    let mut best = PressureConstant {
        value: 0.0,
        iterations: 0,
        residual: 0.0,
    };
    for r in results {
        let r = r?;
        best.iterations = best.iterations.max(r.iterations);
        best.residual = best.residual.max(r.residual);
        best.value = best.value.max(r.value);
    }
    Ok(best)
}

/// `ψ ↦ ∇p` for one wavenumber class in Euclidean coordinates: inputs are
/// scaled by `√h`, outputs by the square root of their quadrature weights.
pub struct GradientMap<'a> {
    solver: &'a PressureSolver,
    k2: f64,
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
}

impl<'a> GradientMap<'a> {
    pub fn new(solver: &'a PressureSolver, k2: f64) -> Self {
        let (lower, diag, upper) = solver.matrix(k2);
        Self {
            solver,
            k2,
            lower,
            diag,
            upper,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.solver.nz()
    }

    /// Interior faces followed by (when `k2 > 0`) one horizontal entry per cell.
    pub fn output_dim(&self) -> usize {
        let nz = self.solver.nz();
        if self.k2 > 0.0 {
            2 * nz - 1
        } else {
            nz - 1
        }
    }

    fn widths(&self) -> &[f64] {
        self.solver.grid.widths()
    }

    /// `R`: cell ψ to pressure right-hand side.
    fn r(&self, psi: &[f64], out: &mut [f64]) {
        let nz = self.solver.nz();
        let w = self.widths();
        let s = self.solver;
        let mut top = 0.0;
        for i in 0..nz {
            let bottom = if i + 1 < nz {
                s.k_face[i + 1] * (w[i] * psi[i] + w[i + 1] * psi[i + 1]) / (2.0 * s.distance[i + 1])
            } else {
                0.0
            };
            out[i] = top - bottom;
            top = bottom;
        }
    }

    /// `Rᵀ`: each face term `K_f ψ_f` enters the cell below with `+` and
    /// the cell above with `-`.
    fn r_t(&self, y: &[f64], out: &mut [f64]) {
        let nz = self.solver.nz();
        let w = self.widths();
        let s = self.solver;
        out.fill(0.0);
        // bottom-face term of cell i is the top-face term of cell i + 1
        for f in 1..nz {
            let coeff = s.k_face[f] / (2.0 * s.distance[f]);
            let g = y[f] - y[f - 1];
            out[f - 1] += coeff * w[f - 1] * g;
            out[f] += coeff * w[f] * g;
        }
    }

    /// Applies the scaled map to `v` (length `nz`).
    pub fn apply(&self, v: &[f64], out: &mut [f64]) {
        let nz = self.solver.nz();
        let w = self.widths();
        let s = self.solver;
        let psi: Vec<f64> = v.iter().zip(w).map(|(a, h)| a / h.sqrt()).collect();
        let mut p = vec![0.0; nz];
        if self.k2 == 0.0 {
            for f in 1..nz {
                let psi_f = (w[f - 1] * psi[f - 1] + w[f] * psi[f]) / (2.0 * s.distance[f]);
                out[f - 1] = -psi_f * s.distance[f].sqrt();
            }
            return;
        }
        self.r(&psi, &mut p);
        let mut scratch = vec![0.0; nz];
        tridiag::solve(&self.lower, &self.diag, &self.upper, &mut p, &mut scratch);
        for f in 1..nz {
            out[f - 1] = (p[f - 1] - p[f]) / s.distance[f].sqrt();
        }
        let k = self.k2.sqrt();
        for i in 0..nz {
            out[nz - 1 + i] = w[i].sqrt() * k * p[i];
        }
    }

    /// Applies the transpose of the scaled map.
    pub fn apply_t(&self, y: &[f64], out: &mut [f64]) {
        let nz = self.solver.nz();
        let w = self.widths();
        let s = self.solver;
        if self.k2 == 0.0 {
            out.fill(0.0);
            for f in 1..nz {
                let g = -y[f - 1] * s.distance[f].sqrt() / (2.0 * s.distance[f]);
                out[f - 1] += g * w[f - 1];
                out[f] += g * w[f];
            }
        } else {
            // B^T: gradient outputs back onto pressure cells
            let mut bt = vec![0.0; nz];
            for f in 1..nz {
                let g = y[f - 1] / s.distance[f].sqrt();
                bt[f - 1] += g;
                bt[f] -= g;
            }
            let k = self.k2.sqrt();
            for i in 0..nz {
                bt[i] += w[i].sqrt() * k * y[nz - 1 + i];
            }
            let mut scratch = vec![0.0; nz];
            tridiag::solve(&self.lower, &self.diag, &self.upper, &mut bt, &mut scratch);
            let mut tmp = vec![0.0; nz];
            self.r_t(&bt, &mut tmp);
            out.copy_from_slice(&tmp);
        }
        for (o, h) in out.iter_mut().zip(w) {
            *o /= h.sqrt();
        }
    }
}

fn lanczos_top(map: &GradientMap<'_>) -> Result<PressureConstant> {
    let n = map.input_dim();
    let m_out = map.output_dim();
    if m_out == 0 {
        return Ok(PressureConstant {
            value: 0.0,
            iterations: 0,
            residual: 0.0,
        });
    }
    let max_iter = n;
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(max_iter);
    let mut alpha = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    // deterministic start with content in every component
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.5 * ((i as f64) * 0.7).sin()).collect();
    let nv = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    v.iter_mut().for_each(|a| *a /= nv);
    let mut gy = vec![0.0; m_out];
    let mut w = vec![0.0; n];
    let mut prev_top = f64::NAN;
    let mut residual = f64::INFINITY;
    for it in 0..max_iter {
        map.apply(&v, &mut gy);
        map.apply_t(&gy, &mut w);
        let a: f64 = w.iter().zip(&v).map(|(x, y)| x * y).sum();
        alpha.push(a);
        basis.push(v.clone());
        // full reorthogonalization (twice is enough)
        for _ in 0..2 {
            for b in &basis {
                let c: f64 = w.iter().zip(b).map(|(x, y)| x * y).sum();
                w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
            }
        }
        let bnorm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        let eig = tridiag::sym_tridiag_eigen(&alpha, &beta, true).map_err(|_| {
            Error::PowerIterationNonConvergence {
                iterations: it + 1,
                residual,
            }
        })?;
        let k = alpha.len();
        let top = eig.values[k - 1];
        let vecs = eig.vectors.expect("vectors requested");
        let last = vecs[(k - 1) * k + (k - 1)].abs();
        residual = bnorm * last / top.abs().max(f64::MIN_POSITIVE);
        let settled = (top - prev_top).abs() <= 1e-14 * top.abs();
        if residual < 1e-12 || (settled && residual < 1e-8) || bnorm <= 1e-14 * top.abs() || it + 1 == max_iter {
            return Ok(PressureConstant {
                value: top.max(0.0).sqrt(),
                iterations: it + 1,
                residual,
            });
        }
        prev_top = top;
        beta.push(bnorm);
        v = w.iter().map(|x| x / bnorm).collect();
    }
    Err(Error::PowerIterationNonConvergence {
        iterations: max_iter,
        residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{sample_coefficients, LayerConfig};
    use crate::field::from_fn;
    use std::f64::consts::PI;

    fn setup(k: Vec<f64>, interfaces: Vec<f64>, nx: usize, nz: usize) -> (Grid, PressureSolver) {
        let n = k.len();
        let cfg = LayerConfig::new(1.0, 1.0, interfaces, k, vec![1.0; n], 1.0, 0.0).unwrap();
        let grid = Grid::uniform(&cfg, nx, 1, nz).unwrap();
        let coeffs = sample_coefficients(&cfg, &grid, 0.0).unwrap();
        let f = Arc::new(Fourier::new(&grid));
        let s = PressureSolver::new(&grid, f, &coeffs).unwrap();
        (grid, s)
    }

    #[test]
    fn hydrostatic_column() {
        let (grid, s) = setup(vec![1.0], vec![], 1, 400);
        let psi = from_fn(&grid, |_, _, z| (PI * z).sin());
        let p = s.solve_pressure(&psi).unwrap();
        for (i, &z) in grid.centers().iter().enumerate() {
            assert!((p[i] - (PI * z).cos() / PI).abs() < 1e-4);
        }
        let flow = s.compute_flow(&psi).unwrap();
        assert!(flow.uz.iter().all(|&v| v == 0.0));
        assert!(crate::field::mean(&grid, &p).abs() < 1e-13);
    }

    #[test]
    fn single_mode_velocity() {
        let (grid, s) = setup(vec![1.0], vec![], 8, 512);
        let k = 2.0 * PI;
        let psi = from_fn(&grid, |x, _, z| (k * x).cos() * (PI * z).sin());
        let flow = s.compute_flow(&psi).unwrap();
        let uzc = s.uz_cells(&flow.uz);
        for (a, b) in uzc.iter().zip(&psi) {
            assert!((a + 0.8 * b).abs() < 1e-4, "{a} {b}");
        }
        assert!(s.check_divergence(&flow) < 1e-11);
        for col in flow.uz.chunks_exact(grid.nz() + 1) {
            assert_eq!(col[0], 0.0);
            assert_eq!(col[grid.nz()], 0.0);
        }
    }

    #[test]
    fn constant_is_at_most_one_for_unit_permeability() {
        let (_, s) = setup(vec![1.0], vec![], 8, 32);
        let c = pressure_constant_estimate(&s).unwrap();
        assert!(c.value <= 1.0 && c.value > 0.5, "{c:?}");
        let (_, s3) = setup(vec![3.0], vec![], 8, 32);
        let c3 = pressure_constant_estimate(&s3).unwrap();
        assert!((c.value - c3.value).abs() < 1e-12);
    }

    #[test]
    fn transpose_is_consistent() {
        let (_, s) = setup(vec![1.0, 10.0], vec![-0.5], 4, 16);
        for k2 in [0.0, 39.47] {
            let map = GradientMap::new(&s, k2);
            let n = map.input_dim();
            let m = map.output_dim();
            let x: Vec<f64> = (0..n).map(|i| (i as f64 * 1.3).cos()).collect();
            let y: Vec<f64> = (0..m).map(|i| (i as f64 * 0.4).sin()).collect();
            let mut gx = vec![0.0; m];
            let mut gty = vec![0.0; n];
            map.apply(&x, &mut gx);
            map.apply_t(&y, &mut gty);
            let lhs: f64 = gx.iter().zip(&y).map(|(a, b)| a * b).sum();
            let rhs: f64 = x.iter().zip(&gty).map(|(a, b)| a * b).sum();
            assert!((lhs - rhs).abs() < 1e-12 * lhs.abs().max(1.0), "{lhs} {rhs}");
        }
    }
}
