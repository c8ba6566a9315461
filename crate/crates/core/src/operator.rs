//! The diffusion operator `L = -div(D grad ·)` with Dirichlet walls, its
//! per-wavenumber eigen-decomposition, and eigen-expansion norms.
//!
//! Vertically the operator is the finite-volume stiffness matrix `S_k`
//! (symmetric, tridiagonal) divided by the cell widths, `L_k = H⁻¹ S_k`.
//! The eigenproblem is solved on the similar symmetric matrix
//! `H^{-1/2} S_k H^{-1/2}`, so eigenvectors are orthonormal in the
//! width-weighted inner product.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::domain::{CoefficientField, Grid};
use crate::error::{Error, Result};
use crate::field::check_len;
use crate::fourier::Fourier;
use crate::quadrature;
use crate::tridiag;

/// Parseval deficit above which an expansion is considered truncated.
pub const PARSEVAL_TOL: f64 = 1e-8;

/// Finite-volume discretization of `L` on a fixed grid.
#[derive(Debug, Clone)]
pub struct DiffusionOperator {
    pub grid: Grid,
    pub fourier: Arc<Fourier>,
    pub d_cell: Vec<f64>,
    /// Face conductances `D_f / dist_f`; the wall entries use the half cell.
    pub conductance: Vec<f64>,
    /// The same with `D ≡ 1`, for unweighted gradients.
    pub unit_conductance: Vec<f64>,
}

impl DiffusionOperator {
    pub fn new(grid: &Grid, fourier: Arc<Fourier>, coeffs: &CoefficientField) -> Result<Self> {
        let nz = grid.nz();
        if coeffs.d_cell.len() != nz || coeffs.d_face.len() != nz + 1 {
            return Err(Error::ShapeMismatch {
                expected: nz,
                got: coeffs.d_cell.len(),
            });
        }
        let mut conductance = vec![0.0; nz + 1];
        let mut unit = vec![0.0; nz + 1];
        let w = grid.widths();
        for f in 0..=nz {
            let dist = if f == 0 {
                0.5 * w[0]
            } else if f == nz {
                0.5 * w[nz - 1]
            } else {
                grid.face_distance(f)
            };
            conductance[f] = coeffs.d_face[f] / dist;
            unit[f] = 1.0 / dist;
        }
        Ok(Self {
            grid: grid.clone(),
            fourier,
            d_cell: coeffs.d_cell.clone(),
            conductance,
            unit_conductance: unit,
        })
    }

    pub fn nz(&self) -> usize {
        self.grid.nz()
    }

    /// Stiffness matrix `S_k` as (lower, diag, upper).
    pub fn stiffness(&self, k2: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let nz = self.nz();
        let w = self.grid.widths();
        let c = &self.conductance;
        let mut lower = vec![0.0; nz];
        let mut diag = vec![0.0; nz];
        let mut upper = vec![0.0; nz];
        for i in 0..nz {
            diag[i] = c[i] + c[i + 1] + w[i] * self.d_cell[i] * k2;
            lower[i] = -c[i];
            upper[i] = -c[i + 1];
        }
        lower[0] = 0.0;
        upper[nz - 1] = 0.0;
        (lower, diag, upper)
    }

    /// `L_k x` for one vertical profile.
    pub fn apply_mode(&self, k2: f64, x: &[Complex64], out: &mut [Complex64]) {
        let nz = self.nz();
        let w = self.grid.widths();
        let c = &self.conductance;
        for i in 0..nz {
            let mut acc = x[i] * (c[i] + c[i + 1] + w[i] * self.d_cell[i] * k2);
            if i > 0 {
                acc -= x[i - 1] * c[i];
            }
            if i + 1 < nz {
                acc -= x[i + 1] * c[i + 1];
            }
            out[i] = acc / w[i];
        }
    }

    /// `L` applied in spectral space.
    pub fn apply_spectral(&self, spec: &[Complex64]) -> Vec<Complex64> {
        let nz = self.nz();
        let f = &self.fourier;
        let mut out = vec![Complex64::new(0.0, 0.0); spec.len()];
        out.par_chunks_mut(nz)
            .zip(spec.par_chunks(nz))
            .enumerate()
            .for_each(|(m, (o, x))| self.apply_mode(f.k2[m], x, o));
        out
    }

    /// `L ψ` for a physical field.
    pub fn apply(&self, psi: &[f64]) -> Result<Vec<f64>> {
        check_len(&self.grid, psi)?;
        let spec = self.fourier.forward(psi);
        Ok(self.fourier.inverse(&self.apply_spectral(&spec)))
    }

    /// Factor turning spectral sums into physical integrals.
    pub fn parseval_scale(&self) -> f64 {
        let n = (self.grid.nx * self.grid.ny) as f64;
        self.grid.length * self.grid.length / (n * n)
    }

    fn quadratic_form(&self, spec: &[Complex64], cond: &[f64], coeff: Option<&[f64]>) -> f64 {
        let nz = self.nz();
        let w = self.grid.widths();
        let f = &self.fourier;
        let mut total = 0.0;
        for (m, x) in spec.chunks_exact(nz).enumerate() {
            let k2 = f.k2[m];
            let mut acc = cond[0] * x[0].norm_sqr() + cond[nz] * x[nz - 1].norm_sqr();
            for fc in 1..nz {
                acc += cond[fc] * (x[fc - 1] - x[fc]).norm_sqr();
            }
            if k2 > 0.0 {
                for i in 0..nz {
                    let d = coeff.map_or(1.0, |c| c[i]);
                    acc += w[i] * d * k2 * x[i].norm_sqr();
                }
            }
            total += acc;
        }
        total * self.parseval_scale()
    }

    /// `‖√D ∇ψ‖² = ⟨Lψ, ψ⟩` from a spectral field.
    pub fn energy_sq(&self, spec: &[Complex64]) -> f64 {
        self.quadratic_form(spec, &self.conductance, Some(&self.d_cell))
    }

    /// `‖∇ψ‖²` (unweighted) from a spectral field.
    pub fn gradient_sq(&self, spec: &[Complex64]) -> f64 {
        self.quadratic_form(spec, &self.unit_conductance, None)
    }

    /// `‖∂_z ψ‖²` from a physical field.
    pub fn dz_sq(&self, psi: &[f64]) -> f64 {
        let nz = self.nz();
        let c = &self.unit_conductance;
        let mut total = 0.0;
        for x in psi.chunks_exact(nz) {
            let mut acc = c[0] * x[0] * x[0] + c[nz] * x[nz - 1] * x[nz - 1];
            for f in 1..nz {
                let d = x[f - 1] - x[f];
                acc += c[f] * d * d;
            }
            total += acc;
        }
        total * self.grid.cell_area()
    }

    /// Face values of `∂_z ψ` for one profile (top wall first), Dirichlet walls.
    pub fn dz_faces<T>(&self, x: &[T], out: &mut [T])
    where
        T: Copy + std::ops::Sub<Output = T> + std::ops::Mul<f64, Output = T> + std::ops::Neg<Output = T>,
    {
        let nz = self.nz();
        let c = &self.unit_conductance;
        // faces are ordered top to bottom; z decreases downward
        out[0] = -x[0] * c[0];
        for f in 1..nz {
            out[f] = (x[f - 1] - x[f]) * c[f];
        }
        out[nz] = x[nz - 1] * c[nz];
    }
}

/// Eigenpairs of `L` grouped by distinct `|k|²`.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub nz: usize,
    /// Number of eigenpairs kept per class.
    pub cutoff: usize,
    pub classes: Vec<f64>,
    /// Ascending eigenvalues per class.
    pub values: Vec<Vec<f64>>,
    /// Column-major eigenvectors per class (`nz × cutoff`), width-orthonormal.
    pub vectors: Vec<Vec<f64>>,
    pub widths: Vec<f64>,
    pub class_of: Vec<usize>,
    pub length: f64,
    pub nx: usize,
    pub ny: usize,
}

/// Symmetrized tridiagonal `(diag, off)` of `H^{-1/2} S_k H^{-1/2}`.
pub fn symmetric_pencil(op: &DiffusionOperator, k2: f64) -> (Vec<f64>, Vec<f64>) {
    let (_, diag, upper) = op.stiffness(k2);
    let w = op.grid.widths();
    let nz = op.nz();
    let d: Vec<f64> = (0..nz).map(|i| diag[i] / w[i]).collect();
    let off: Vec<f64> = (0..nz.saturating_sub(1))
        .map(|i| upper[i] / (w[i] * w[i + 1]).sqrt())
        .collect();
    (d, off)
}

/// Rayleigh quotient `x^T S_k x / x^T H x` evaluated through face differences.
///
/// QL eigenvalues carry an absolute error of order `eps·λ_max`, which is a
/// large relative error for the low modes of a fine grid. The difference form
/// of the quotient is accurate to round-off relative to `λ` itself, and its
/// error in the eigenvector enters only quadratically.
pub fn energy_quotient(op: &DiffusionOperator, k2: f64, x: &[f64]) -> f64 {
    let nz = op.nz();
    let w = op.grid.widths();
    let c = &op.conductance;
    let mut num = c[0] * x[0] * x[0] + c[nz] * x[nz - 1] * x[nz - 1];
    let mut den = 0.0;
    for i in 0..nz {
        if i > 0 {
            let d = x[i - 1] - x[i];
            num += c[i] * d * d;
        }
        let m = w[i] * x[i] * x[i];
        num += k2 * op.d_cell[i] * m;
        den += m;
    }
    num / den
}

/// Refines a QL eigenvalue by two shifted inverse-iteration steps followed by
/// the energy quotient. The QL value is kept if the iteration drifts away.
fn refine_eigenvalue(op: &DiffusionOperator, k2: f64, lambda: f64) -> f64 {
    let nz = op.nz();
    let w = op.grid.widths();
    let (lower, mut diag, upper) = op.stiffness(k2);
    for i in 0..nz {
        diag[i] -= lambda * w[i];
    }
    let mut x: Vec<f64> = (0..nz).map(|i| 1.0 + 0.5 * (i as f64).sin()).collect();
    let mut scratch = vec![0.0; nz];
    for _ in 0..2 {
        let mut rhs: Vec<f64> = x.iter().zip(w).map(|(v, h)| v * h).collect();
        tridiag::solve(&lower, &diag, &upper, &mut rhs, &mut scratch);
        let scale = rhs.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        if !scale.is_finite() || scale == 0.0 {
            return lambda;
        }
        x = rhs.iter().map(|v| v / scale).collect();
    }
    let q = energy_quotient(op, k2, &x);
    if q.is_finite() && (q - lambda).abs() <= 1e-6 * lambda.abs().max(1.0) {
        q
    } else {
        lambda
    }
}

/// Eigenvalues of `L_k` only (ascending).
pub fn eigenvalues(op: &DiffusionOperator, k2: f64) -> Result<Vec<f64>> {
    let (d, off) = symmetric_pencil(op, k2);
    let raw = tridiag::sym_tridiag_eigen(&d, &off, false)
        .map(|e| e.values)
        .map_err(|e| Error::EigenNonConvergence {
            mode: 0,
            index: e.index,
        })?;
    Ok(raw.into_iter().map(|l| refine_eigenvalue(op, k2, l)).collect())
}

/// Solves the vertical Sturm–Liouville problem for every distinct `|k|²`.
/// `cutoff = None` keeps all `N_z` eigenpairs.
pub fn eigensolve(op: &DiffusionOperator, cutoff: Option<usize>) -> Result<Spectrum> {
    let nz = op.nz();
    let cutoff = cutoff.unwrap_or(nz).min(nz).max(1);
    let f = &op.fourier;
    let w = op.grid.widths().to_vec();
    let results: Vec<Result<(Vec<f64>, Vec<f64>)>> = f
        .classes
        .par_iter()
        .enumerate()
        .map(|(class, &k2)| {
            let (d, off) = symmetric_pencil(op, k2);
            let eig = tridiag::sym_tridiag_eigen(&d, &off, true).map_err(|e| {
                Error::EigenNonConvergence {
                    mode: class,
                    index: e.index,
                }
            })?;
            let y = eig.vectors.expect("vectors requested");
            let mut vecs = Vec::with_capacity(nz * cutoff);
            let mut vals = Vec::with_capacity(cutoff);
            for n in 0..cutoff {
                let col = &y[n * nz..(n + 1) * nz];
                // fix the sign so the first nonzero entry is positive
                let sign = col
                    .iter()
                    .find(|v| v.abs() > 1e-300)
                    .map_or(1.0, |v| v.signum());
                let start = vecs.len();
                vecs.extend(col.iter().zip(&w).map(|(v, h)| sign * v / h.sqrt()));
                vals.push(energy_quotient(op, k2, &vecs[start..]));
            }
            Ok((vals, vecs))
        })
        .collect();
    let mut values = Vec::with_capacity(results.len());
    let mut vectors = Vec::with_capacity(results.len());
    for r in results {
        let (v, w) = r?;
        values.push(v);
        vectors.push(w);
    }
    Ok(Spectrum {
        nz,
        cutoff,
        classes: f.classes.clone(),
        values,
        vectors,
        widths: w,
        class_of: f.class_of.clone(),
        length: op.grid.length,
        nx: op.grid.nx,
        ny: op.grid.ny,
    })
}

/// Eigen-expansion coefficients of a field.
#[derive(Debug, Clone)]
pub struct FieldExpansion {
    pub cutoff: usize,
    /// `a[mode * cutoff + n]`, scaled so that `Σ|a|² = ‖ψ‖²` without truncation.
    pub coeffs: Vec<Complex64>,
    /// Physical `‖ψ‖²` of the expanded field.
    pub norm_sq: f64,
}

impl Spectrum {
    pub fn modes(&self) -> usize {
        self.nx * self.ny
    }

    pub fn eigenvalue(&self, mode: usize, n: usize) -> f64 {
        self.values[self.class_of[mode]][n]
    }

    pub fn vector(&self, mode: usize, n: usize) -> &[f64] {
        let v = &self.vectors[self.class_of[mode]];
        &v[n * self.nz..(n + 1) * self.nz]
    }

    pub fn lambda_min(&self) -> f64 {
        self.values.iter().map(|v| v[0]).fold(f64::INFINITY, f64::min)
    }

    pub fn lambda_max(&self) -> f64 {
        self.values
            .iter()
            .map(|v| v[v.len() - 1])
            .fold(0.0, f64::max)
    }

    fn scale(&self) -> f64 {
        self.length / (self.nx * self.ny) as f64
    }

    /// Expands a spectral field (forward transform of `ψ`).
    pub fn expand_spectral(&self, spec: &[Complex64]) -> Result<FieldExpansion> {
        let nz = self.nz;
        if spec.len() != self.modes() * nz {
            return Err(Error::ShapeMismatch {
                expected: self.modes() * nz,
                got: spec.len(),
            });
        }
        let scale = self.scale();
        let mut coeffs = vec![Complex64::new(0.0, 0.0); self.modes() * self.cutoff];
        let mut norm_sq = 0.0;
        for (m, x) in spec.chunks_exact(nz).enumerate() {
            for (i, v) in x.iter().enumerate() {
                norm_sq += self.widths[i] * v.norm_sqr();
            }
            if x.iter().all(|v| v.re == 0.0 && v.im == 0.0) {
                continue;
            }
            for n in 0..self.cutoff {
                let w = self.vector(m, n);
                let mut acc = Complex64::new(0.0, 0.0);
                for i in 0..nz {
                    acc += x[i] * (self.widths[i] * w[i]);
                }
                coeffs[m * self.cutoff + n] = acc * scale;
            }
        }
        Ok(FieldExpansion {
            cutoff: self.cutoff,
            coeffs,
            norm_sq: norm_sq * scale * scale,
        })
    }

    /// Expands a physical field.
    pub fn expand(&self, fourier: &Fourier, psi: &[f64]) -> Result<FieldExpansion> {
        if psi.len() != self.modes() * self.nz {
            return Err(Error::ShapeMismatch {
                expected: self.modes() * self.nz,
                got: psi.len(),
            });
        }
        self.expand_spectral(&fourier.forward(psi))
    }

    /// Spectral field from expansion coefficients.
    pub fn synthesize_spectral(&self, exp: &FieldExpansion) -> Vec<Complex64> {
        let nz = self.nz;
        let inv = 1.0 / self.scale();
        let mut spec = vec![Complex64::new(0.0, 0.0); self.modes() * nz];
        for m in 0..self.modes() {
            let out = &mut spec[m * nz..(m + 1) * nz];
            for n in 0..exp.cutoff.min(self.cutoff) {
                let a = exp.coeffs[m * exp.cutoff + n];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let w = self.vector(m, n);
                for i in 0..nz {
                    out[i] += a * (w[i] * inv);
                }
            }
        }
        spec
    }

    /// `(‖ψ‖² - Σ|a|²) / ‖ψ‖²`.
    pub fn parseval_deficit(&self, exp: &FieldExpansion) -> f64 {
        if exp.norm_sq == 0.0 {
            return 0.0;
        }
        let kept: f64 = exp.coeffs.iter().map(|a| a.norm_sqr()).sum();
        (exp.norm_sq - kept) / exp.norm_sq
    }

    fn check_truncation(&self, exp: &FieldExpansion) -> Result<()> {
        let deficit = self.parseval_deficit(exp);
        if deficit > PARSEVAL_TOL {
            return Err(Error::TruncationDeficit { deficit });
        }
        Ok(())
    }

    /// `Σ λ^s |a|²`.
    pub fn fractional_norm_sq(&self, exp: &FieldExpansion, s: f64) -> Result<f64> {
        if !(-2.0..=2.0).contains(&s) {
            return Err(Error::InvalidParameter {
                name: "s",
                reason: format!("supported range is [-2, 2], got {s}"),
            });
        }
        self.check_truncation(exp)?;
        let mut total = 0.0;
        for m in 0..self.modes() {
            let vals = &self.values[self.class_of[m]];
            let a = &exp.coeffs[m * exp.cutoff..(m + 1) * exp.cutoff];
            for (n, c) in a.iter().enumerate() {
                let p = c.norm_sqr();
                if p != 0.0 {
                    total += vals[n].powf(s) * p;
                }
            }
        }
        Ok(total)
    }

    /// `‖ψ‖_{ℋ^s} = (Σ λ^s |a|²)^{1/2}`.
    pub fn fractional_norm(&self, exp: &FieldExpansion, s: f64) -> Result<f64> {
        self.fractional_norm_sq(exp, s).map(f64::sqrt)
    }

    /// Nonzero `(λ, |a|²)` pairs of an expansion.
    pub fn weights(&self, exp: &FieldExpansion) -> Vec<(f64, f64)> {
        let mut out = Vec::new();
        for m in 0..self.modes() {
            let vals = &self.values[self.class_of[m]];
            for n in 0..exp.cutoff {
                let p = exp.coeffs[m * exp.cutoff + n].norm_sqr();
                if p != 0.0 {
                    out.push((vals[n], p));
                }
            }
        }
        out
    }
}

/// How the K-method integral is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KMethod {
    ClosedForm,
    Quadrature,
}

/// `∫_0^∞ t^{1-2s} λ/(1+t²λ) dt = λ^s (π/2)/sin(πs)`.
pub fn kmethod_mode_integral(lambda: f64, s: f64) -> f64 {
    lambda.powf(s) * 0.5 * PI / (PI * s).sin()
}

/// `‖ψ‖²_{s,ℋ,𝒱} = Σ |a|² ∫_0^∞ t^{1-2s} λ/(1+t²λ) dt` for a list of
/// `(λ, |a|²)` pairs.
pub fn kmethod_norm_sq_weights(weights: &[(f64, f64)], s: f64, method: KMethod) -> Result<f64> {
    if !(s > 0.0 && s < 1.0) {
        return Err(Error::InvalidParameter {
            name: "s",
            reason: format!("K-method needs s strictly inside (0, 1), got {s}"),
        });
    }
    if weights.is_empty() {
        return Ok(0.0);
    }
    match method {
        KMethod::ClosedForm => Ok(weights
            .iter()
            .map(|&(l, p)| p * kmethod_mode_integral(l, s))
            .sum()),
        KMethod::Quadrature => {
            let lmin = weights.iter().map(|w| w.0).fold(f64::INFINITY, f64::min);
            let lmax = weights.iter().map(|w| w.0).fold(0.0, f64::max);
            // t = e^u; both tails are below e^{-40} of the peak contribution
            let lo = -0.5 * lmax.ln() - 40.0 / (2.0 - 2.0 * s);
            let hi = -0.5 * lmin.ln() + 40.0 / (2.0 * s);
            let integrand = |u: f64| {
                let t2 = (2.0 * u).exp();
                let tw = ((2.0 - 2.0 * s) * u).exp();
                weights
                    .iter()
                    .map(|&(l, p)| p * l / (1.0 + t2 * l))
                    .sum::<f64>()
                    * tw
            };
            let r = quadrature::integrate(integrand, lo, hi, 1e-11, 0.0, 4000);
            Ok(r.value)
        }
    }
}

/// K-method interpolation norm `‖ψ‖_{s,ℋ,𝒱}` of an expansion.
pub fn kmethod_norm(spec: &Spectrum, exp: &FieldExpansion, s: f64, method: KMethod) -> Result<f64> {
    spec.check_truncation(exp)?;
    kmethod_norm_sq_weights(&spec.weights(exp), s, method).map(f64::sqrt)
}

/// `(2/π) sin(πs)`, the factor linking the K-method and eigen norms.
pub fn kmethod_factor(s: f64) -> f64 {
    2.0 / PI * (PI * s).sin()
}
