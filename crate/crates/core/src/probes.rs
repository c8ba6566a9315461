//! Empirical ratios behind the embedding inequalities used by the estimates:
//! Poincaré, `𝒲`-norm equivalence, Gagliardo–Nirenberg, the eigen-norm
//! interpolation inequality, and a per-layer Sobolev–Slobodeckij quotient.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::domain::LayerConfig;
use crate::error::Result;
use crate::field;
use crate::operator::{DiffusionOperator, FieldExpansion, Spectrum};

/// `‖ψ‖ / (H ‖∂_z ψ‖)`, `None` for the zero field.
pub fn poincare_ratio(op: &DiffusionOperator, psi: &[f64]) -> Option<f64> {
    let dz = op.dz_sq(psi);
    let l2 = field::l2_norm(&op.grid, psi);
    (dz > 0.0 && l2 > 0.0).then(|| l2 / (op.grid.depth() * dz.sqrt()))
}

/// `‖ψ‖²_𝒲 = ‖ψ‖²_{H¹} + ‖∂_xψ‖²_{H¹} + ‖∂_yψ‖²_{H¹} + ‖D∂_zψ‖²_{H¹}`.
pub fn w_norm_sq(op: &DiffusionOperator, spec: &[Complex64]) -> f64 {
    let nz = op.nz();
    let h = op.grid.widths();
    let uc = &op.unit_conductance;
    let c = &op.conductance;
    let mut g = vec![Complex64::new(0.0, 0.0); nz + 1];
    let mut total = 0.0;
    for (m, x) in spec.chunks_exact(nz).enumerate() {
        let k2 = op.fourier.k2[m];
        let a: f64 = x.iter().zip(h).map(|(v, w)| w * v.norm_sqr()).sum();
        if a == 0.0 {
            continue;
        }
        let mut dz = uc[0] * x[0].norm_sqr() + uc[nz] * x[nz - 1].norm_sqr();
        for f in 1..nz {
            dz += uc[f] * (x[f - 1] - x[f]).norm_sqr();
        }
        let h1 = (1.0 + k2) * a + dz;
        g[0] = -x[0] * c[0];
        for f in 1..nz {
            g[f] = (x[f - 1] - x[f]) * c[f];
        }
        g[nz] = x[nz - 1] * c[nz];
        let g_sq: f64 = g.iter().zip(uc).map(|(v, u)| v.norm_sqr() / u).sum();
        let dg_sq: f64 = (0..nz).map(|i| (g[i] - g[i + 1]).norm_sqr() / h[i]).sum();
        total += (1.0 + k2) * h1 + (1.0 + k2) * g_sq + dg_sq;
    }
    total * op.parseval_scale()
}

/// `‖Lψ‖²`.
pub fn l_norm_sq(op: &DiffusionOperator, spec: &[Complex64]) -> f64 {
    let nz = op.nz();
    let h = op.grid.widths();
    let mut out = vec![Complex64::new(0.0, 0.0); nz];
    let mut total = 0.0;
    for (m, x) in spec.chunks_exact(nz).enumerate() {
        op.apply_mode(op.fourier.k2[m], x, &mut out);
        total += out.iter().zip(h).map(|(v, w)| w * v.norm_sqr()).sum::<f64>();
    }
    total * op.parseval_scale()
}

/// Cell values of `|∇ψ|`, with `∂_z` averaged from the two bounding faces.
pub fn gradient_magnitude(op: &DiffusionOperator, psi: &[f64], spec: &[Complex64]) -> Vec<f64> {
    let nz = op.nz();
    let (gx, gy) = op.fourier.horizontal_gradient(spec);
    let mut faces = vec![0.0; nz + 1];
    let mut out = vec![0.0; psi.len()];
    for (col, (o, x)) in out.chunks_exact_mut(nz).zip(psi.chunks_exact(nz)).enumerate() {
        op.dz_faces(x, &mut faces);
        for i in 0..nz {
            let dz = 0.5 * (faces[i] + faces[i + 1]);
            let c = col * nz + i;
            o[i] = (gx[c] * gx[c] + gy[c] * gy[c] + dz * dz).sqrt();
        }
    }
    out
}

/// Gagliardo–Nirenberg quotients `(C₁, C₂)` for one field.
pub fn gagliardo_nirenberg(op: &DiffusionOperator, psi: &[f64], spec: &[Complex64], r: f64) -> Option<(f64, f64)> {
    let grid = &op.grid;
    let l2 = field::l2_norm(grid, psi);
    let grad = op.gradient_sq(spec).sqrt();
    let w = w_norm_sq(op, spec).sqrt();
    if l2 == 0.0 || grad == 0.0 {
        return None;
    }
    let a = 3.0 / r - 0.5;
    let b = 1.5 - 3.0 / r;
    let c1 = field::lr_norm(grid, psi, r) / (l2.powf(a) * grad.powf(b));
    let gmag = gradient_magnitude(op, psi, spec);
    let c2 = field::lr_norm(grid, &gmag, r) / (grad.powf(a) * w.powf(b));
    Some((c1, c2))
}

/// Per-layer `‖ψ‖_{H^{1+s}(Ω_j)} / ‖ψ‖_{ℋ^{1+s}}` with a discrete
/// Sobolev–Slobodeckij seminorm of `∇ψ` (horizontal part `|k|^{2s}`,
/// vertical part the double sum over cell pairs inside the layer).
pub fn slobodeckij_quotients(
    cfg: &LayerConfig,
    op: &DiffusionOperator,
    spectrum: &Spectrum,
    spec: &[Complex64],
    s: f64,
) -> Result<Vec<f64>> {
    let nz = op.nz();
    let grid = &op.grid;
    let h = grid.widths();
    let zc = grid.centers();
    let layer: Vec<usize> = zc.iter().map(|&z| cfg.layer_of(z)).collect();
    let nl = cfg.layers();
    let f = &op.fourier;
    let mut num = vec![0.0; nl];
    let mut faces = vec![Complex64::new(0.0, 0.0); nz + 1];
    let mut comps = vec![vec![Complex64::new(0.0, 0.0); nz]; 3];
    for (m, x) in spec.chunks_exact(nz).enumerate() {
        if x.iter().all(|v| v.norm_sqr() == 0.0) {
            continue;
        }
        let k2 = f.k2[m];
        let ikx = Complex64::new(0.0, f.kx[m]);
        let iky = Complex64::new(0.0, f.ky[m]);
        op.dz_faces(x, &mut faces);
        for i in 0..nz {
            comps[0][i] = ikx * x[i];
            comps[1][i] = iky * x[i];
            comps[2][i] = (faces[i] + faces[i + 1]) * 0.5;
        }
        for i in 0..nz {
            let j = layer[i];
            let g2: f64 = comps.iter().map(|g| g[i].norm_sqr()).sum();
            num[j] += h[i] * ((1.0 + k2) * x[i].norm_sqr() + g2 * (1.0 + k2.powf(s)));
            for l in 0..nz {
                if l == i || layer[l] != j {
                    continue;
                }
                let d = (zc[i] - zc[l]).abs().powf(1.0 + 2.0 * s);
                let diff: f64 = comps.iter().map(|g| (g[i] - g[l]).norm_sqr()).sum();
                num[j] += h[i] * h[l] * diff / d;
            }
        }
    }
    let exp = spectrum.expand_spectral(spec)?;
    let den = spectrum.fractional_norm_sq(&exp, 1.0 + s)?;
    let scale = op.parseval_scale();
    Ok(num.into_iter().map(|v| (v * scale / den).sqrt()).collect())
}

/// Both parts of the eigen-norm interpolation inequality for one triple
/// `s₁ < s < s₂`, `s = θ s₁ + (1 - θ) s₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterpolationCheck {
    pub s1: f64,
    pub s: f64,
    pub s2: f64,
    /// `‖ψ‖_{ℋ^{s₁}}` against `λ₁^{(s₁-s₂)/2} ‖ψ‖_{ℋ^{s₂}}`.
    pub monotone: (f64, f64),
    /// `‖ψ‖_{ℋ^s}` against `‖ψ‖_{ℋ^{s₁}}^θ ‖ψ‖_{ℋ^{s₂}}^{1-θ}`.
    pub interpolation: (f64, f64),
}

impl InterpolationCheck {
    pub fn holds(&self, rel_tol: f64) -> bool {
        self.monotone.0 <= self.monotone.1 * (1.0 + rel_tol)
            && self.interpolation.0 <= self.interpolation.1 * (1.0 + rel_tol)
    }
}

pub fn interpolation_check(spectrum: &Spectrum, exp: &FieldExpansion, s1: f64, s: f64, s2: f64) -> Result<InterpolationCheck> {
    let theta = (s2 - s) / (s2 - s1);
    let n1 = spectrum.fractional_norm(exp, s1)?;
    let n = spectrum.fractional_norm(exp, s)?;
    let n2 = spectrum.fractional_norm(exp, s2)?;
    let lam1 = spectrum.lambda_min();
    Ok(InterpolationCheck {
        s1,
        s,
        s2,
        monotone: (n1, lam1.powf((s1 - s2) / 2.0) * n2),
        interpolation: (n, n1.powf(theta) * n2.powf(1.0 - theta)),
    })
}

/// Exponent triples exercised by [`inequality_probes`].
pub const INTERPOLATION_TRIPLES: [(f64, f64, f64); 4] =
    [(0.0, 0.75, 1.0), (-0.5, 0.5, 1.5), (0.25, 1.0, 2.0), (-2.0, 0.0, 2.0)];

/// Relative round-off allowance for the exact inequalities.
pub const EXACT_TOL: f64 = 1e-12;

/// Ensemble summary of every probe.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub fields: usize,
    pub skipped: usize,
    pub poincare_max: f64,
    /// Fields with Poincaré ratio ≥ 1.
    pub poincare_violations: usize,
    /// `sup ‖ψ‖_𝒲 / ‖Lψ‖`.
    pub c_u: f64,
    /// `inf ‖ψ‖_𝒲 / ‖Lψ‖`.
    pub c_l: f64,
    pub c_1: f64,
    pub c_2: f64,
    /// Per-layer sup of the Sobolev–Slobodeckij quotient.
    pub slobodeckij: Vec<f64>,
    pub interpolation_checks: usize,
    pub interpolation_violations: usize,
    pub r: f64,
    pub s: f64,
}

impl ProbeReport {
    /// Poincaré strict and interpolation exact, everything else finite.
    pub fn passed(&self) -> bool {
        self.poincare_violations == 0
            && self.interpolation_violations == 0
            && [self.c_u, self.c_l, self.c_1, self.c_2].iter().all(|v| v.is_finite())
            && self.slobodeckij.iter().all(|v| v.is_finite())
    }
}

/// Runs every probe over `fields`; zero fields are skipped.
pub fn inequality_probes(
    cfg: &LayerConfig,
    op: &DiffusionOperator,
    spectrum: &Spectrum,
    fields: &[Vec<f64>],
    r: f64,
    s: f64,
) -> Result<ProbeReport> {
    let mut rep = ProbeReport {
        fields: 0,
        skipped: 0,
        poincare_max: 0.0,
        poincare_violations: 0,
        c_u: 0.0,
        c_l: f64::INFINITY,
        c_1: 0.0,
        c_2: 0.0,
        slobodeckij: vec![0.0; cfg.layers()],
        interpolation_checks: 0,
        interpolation_violations: 0,
        r,
        s,
    };
    for psi in fields {
        field::check_len(&op.grid, psi)?;
        let Some(p) = poincare_ratio(op, psi) else {
            rep.skipped += 1;
            continue;
        };
        rep.fields += 1;
        rep.poincare_max = rep.poincare_max.max(p);
        if p >= 1.0 {
            rep.poincare_violations += 1;
        }
        let spec = op.fourier.forward(psi);
        let w = w_norm_sq(op, &spec).sqrt() / l_norm_sq(op, &spec).sqrt();
        rep.c_u = rep.c_u.max(w);
        rep.c_l = rep.c_l.min(w);
        if let Some((c1, c2)) = gagliardo_nirenberg(op, psi, &spec, r) {
            rep.c_1 = rep.c_1.max(c1);
            rep.c_2 = rep.c_2.max(c2);
        }
        for (acc, q) in rep.slobodeckij.iter_mut().zip(slobodeckij_quotients(cfg, op, spectrum, &spec, s)?) {
            *acc = acc.max(q);
        }
        let exp = spectrum.expand_spectral(&spec)?;
        for &(s1, sm, s2) in &INTERPOLATION_TRIPLES {
            rep.interpolation_checks += 1;
            if !interpolation_check(spectrum, &exp, s1, sm, s2)?.holds(EXACT_TOL) {
                rep.interpolation_violations += 1;
            }
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{sample_coefficients, Grid};
    use crate::fourier::Fourier;
    use crate::operator::eigensolve;
    use crate::sampler::{ensemble, EnsembleSpec};
    use std::f64::consts::PI;
    use std::sync::Arc;

    fn setup(d: [f64; 2], nz: usize) -> (LayerConfig, DiffusionOperator, Spectrum) {
        let cfg = LayerConfig::new(1.0, 1.0, vec![-0.5], vec![1.0, 1.0], d.to_vec(), 1.0, 0.0).unwrap();
        let grid = Grid::uniform(&cfg, 8, 8, nz).unwrap();
        let fourier = Arc::new(Fourier::new(&grid));
        let coeffs = sample_coefficients(&cfg, &grid, 0.0).unwrap();
        let op = DiffusionOperator::new(&grid, fourier, &coeffs).unwrap();
        let spectrum = eigensolve(&op, None).unwrap();
        (cfg, op, spectrum)
    }

    #[test]
    fn poincare_single_sine() {
        let (_, op, _) = setup([1.0, 1.0], 256);
        let psi = field::from_fn(&op.grid, |_, _, z| (PI * z).sin());
        let p = poincare_ratio(&op, &psi).unwrap();
        assert!((p - 1.0 / PI).abs() < 1e-3, "{p}");
        assert!(poincare_ratio(&op, &vec![0.0; op.grid.len()]).is_none());
    }

    #[test]
    fn ensemble_probes_finite() {
        let (cfg, op, spectrum) = setup([1.0, 4.0], 48);
        let spec = EnsembleSpec {
            count: 20,
            ..Default::default()
        };
        let mut fields = ensemble(&op.grid, &spectrum, &spec).unwrap();
        fields.push(vec![0.0; op.grid.len()]);
        let rep = inequality_probes(&cfg, &op, &spectrum, &fields, 4.0, 0.75).unwrap();
        assert_eq!(rep.skipped, 1);
        assert_eq!(rep.fields, 20);
        assert!(rep.passed(), "{rep:?}");
        assert!(rep.poincare_max < 1.0 / PI + 1e-3);
        assert!(rep.c_l > 0.0 && rep.c_u >= rep.c_l);
    }

    #[test]
    fn w_norm_matches_closed_form() {
        // ψ = sin(πz) cos(2πx), D = 1: every term has a closed form
        let (_, op, _) = setup([1.0, 1.0], 512);
        let psi = field::from_fn(&op.grid, |x, _, z| (PI * z).sin() * (2.0 * PI * x).cos());
        let spec = op.fourier.forward(&psi);
        let (a, b) = (PI * PI, 4.0 * PI * PI);
        // ‖ψ‖² = 1/4, ‖∂_zψ‖² = a/4, |k|² = b
        let h1 = (1.0 + b + a) / 4.0;
        let expect = h1 * (1.0 + b) + (a * (1.0 + b) + a * a) / 4.0;
        let got = w_norm_sq(&op, &spec);
        assert!((got / expect - 1.0).abs() < 1e-4, "{got} {expect}");
        let l2 = l_norm_sq(&op, &spec);
        assert!((l2 / ((a + b) * (a + b) / 4.0) - 1.0).abs() < 1e-4);
    }
}
