//! Cell-quadrature norms and inner products on grid fields.

use crate::domain::Grid;
use crate::error::{Error, Result};

pub fn check_len(grid: &Grid, field: &[f64]) -> Result<()> {
    if field.len() != grid.len() {
        return Err(Error::ShapeMismatch {
            expected: grid.len(),
            got: field.len(),
        });
    }
    Ok(())
}

/// `∫ f g` by cell quadrature.
pub fn inner(grid: &Grid, f: &[f64], g: &[f64]) -> f64 {
    let nz = grid.nz();
    let w = grid.widths();
    let mut total = 0.0;
    for (cf, cg) in f.chunks_exact(nz).zip(g.chunks_exact(nz)) {
        let mut col = 0.0;
        for i in 0..nz {
            col += w[i] * cf[i] * cg[i];
        }
        total += col;
    }
    total * grid.cell_area()
}

pub fn l2_norm_sq(grid: &Grid, f: &[f64]) -> f64 {
    inner(grid, f, f)
}

pub fn l2_norm(grid: &Grid, f: &[f64]) -> f64 {
    l2_norm_sq(grid, f).sqrt()
}

/// `(∫ |f|^r)^{1/r}` by cell quadrature with cell-mean values.
pub fn lr_norm(grid: &Grid, f: &[f64], r: f64) -> f64 {
    lr_norm_pow(grid, f, r).powf(1.0 / r)
}

/// `∫ |f|^r`.
pub fn lr_norm_pow(grid: &Grid, f: &[f64], r: f64) -> f64 {
    let nz = grid.nz();
    let w = grid.widths();
    let mut total = 0.0;
    for cf in f.chunks_exact(nz) {
        let mut col = 0.0;
        for i in 0..nz {
            col += w[i] * cf[i].abs().powf(r);
        }
        total += col;
    }
    total * grid.cell_area()
}

/// Volume average `|Ω|⁻¹ ∫ f`.
pub fn mean(grid: &Grid, f: &[f64]) -> f64 {
    let nz = grid.nz();
    let w = grid.widths();
    let mut total = 0.0;
    for cf in f.chunks_exact(nz) {
        let mut col = 0.0;
        for i in 0..nz {
            col += w[i] * cf[i];
        }
        total += col;
    }
    total * grid.cell_area() / grid.volume()
}

pub fn max_abs(f: &[f64]) -> f64 {
    f.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Builds a field from a function of the cell centre `(x, y, z)`.
pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64, f64) -> f64) -> Vec<f64> {
    let xs = grid.x_coords();
    let ys = grid.y_coords();
    let zs = grid.centers();
    let mut out = vec![0.0; grid.len()];
    for (y, &yy) in ys.iter().enumerate() {
        for (x, &xx) in xs.iter().enumerate() {
            for (z, &zz) in zs.iter().enumerate() {
                out[grid.idx(x, y, z)] = f(xx, yy, zz);
            }
        }
    }
    out
}

/// Horizontal average profile.
pub fn horizontal_mean(grid: &Grid, f: &[f64]) -> Vec<f64> {
    let nz = grid.nz();
    let mut out = vec![0.0; nz];
    for col in f.chunks_exact(nz) {
        for (o, v) in out.iter_mut().zip(col) {
            *o += v;
        }
    }
    let n = grid.columns() as f64;
    out.iter_mut().for_each(|v| *v /= n);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::LayerConfig;

    #[test]
    fn constant_field_norms() {
        let cfg = LayerConfig::new(2.0, 1.0, vec![], vec![1.0], vec![1.0], 1.0, 0.0).unwrap();
        let g = Grid::uniform(&cfg, 4, 2, 8).unwrap();
        let f = vec![3.0; g.len()];
        assert!((l2_norm_sq(&g, &f) - 36.0).abs() < 1e-12);
        assert!((lr_norm(&g, &f, 4.0) - 3.0 * 4f64.powf(0.25)).abs() < 1e-12);
        assert!((mean(&g, &f) - 3.0).abs() < 1e-14);
    }
}
