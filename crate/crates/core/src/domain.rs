//! Layered slab geometry, coefficient profiles and the background
//! concentration profile.
//!
//! Vertical coordinates follow the physical convention: `z = 0` is the top
//! wall, `z = -H` the bottom wall, and layer `j` (1-based in messages,
//! 0-based in code) occupies `(z_j, z_{j-1})`. Cells and faces are indexed
//! from the top.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance used when matching breakpoints against grid faces.
const ALIGN_TOL: f64 = 1e-10;

/// Minimum number of cells placed in every vertical segment of an aligned grid.
const MIN_SEGMENT_CELLS: usize = 1;

/// Slab geometry and per-layer material data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerConfig {
    /// Horizontal period `L` (both horizontal directions).
    pub length: f64,
    /// Depth `H`.
    pub depth: f64,
    /// Interior interface heights `z_1 > z_2 > ... > z_{l-1}`.
    pub interfaces: Vec<f64>,
    /// Permeability `K_j`, top layer first.
    pub permeability: Vec<f64>,
    /// Diffusivity `D_j`, top layer first.
    pub diffusivity: Vec<f64>,
    /// Concentration at `z = 0`.
    pub c_top: f64,
    /// Concentration at `z = -H`.
    pub c_bottom: f64,
}

/// Which material coefficient to sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coefficient {
    Permeability,
    Diffusivity,
}

impl LayerConfig {
    /// Validates and builds a configuration with `interfaces.len() + 1` layers.
    pub fn new(
        length: f64,
        depth: f64,
        interfaces: Vec<f64>,
        permeability: Vec<f64>,
        diffusivity: Vec<f64>,
        c_top: f64,
        c_bottom: f64,
    ) -> Result<Self> {
        if !(length > 0.0 && length.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "L",
                reason: format!("must be positive, got {length}"),
            });
        }
        if !(depth > 0.0 && depth.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "H",
                reason: format!("must be positive, got {depth}"),
            });
        }
        let layers = interfaces.len() + 1;
        if permeability.len() != layers {
            return Err(Error::LengthMismatch {
                what: "K",
                expected: layers,
                got: permeability.len(),
            });
        }
        if diffusivity.len() != layers {
            return Err(Error::LengthMismatch {
                what: "D",
                expected: layers,
                got: diffusivity.len(),
            });
        }
        for (i, &z) in interfaces.iter().enumerate() {
            if !(z < 0.0 && z > -depth) {
                return Err(Error::InterfaceOutOfSlab {
                    index: i + 1,
                    value: z,
                });
            }
            if i > 0 && z >= interfaces[i - 1] {
                return Err(Error::NonMonotoneInterfaces {
                    index: i + 1,
                    value: z,
                });
            }
        }
        for (name, values) in [("K", &permeability), ("D", &diffusivity)] {
            if let Some((j, &v)) = values
                .iter()
                .enumerate()
                .find(|(_, v)| !(**v > 0.0 && v.is_finite()))
            {
                return Err(Error::NonPositiveCoefficient {
                    name,
                    layer: j + 1,
                    value: v,
                });
            }
        }
        if !(c_top.is_finite() && c_bottom.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "bc",
                reason: "boundary concentrations must be finite".into(),
            });
        }
        Ok(Self {
            length,
            depth,
            interfaces,
            permeability,
            diffusivity,
            c_top,
            c_bottom,
        })
    }

    pub fn layers(&self) -> usize {
        self.interfaces.len() + 1
    }

    /// `c_Δ = |c_0 - c_{-H}|`.
    pub fn c_delta(&self) -> f64 {
        (self.c_top - self.c_bottom).abs()
    }

    pub fn k_min(&self) -> f64 {
        self.permeability.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn k_max(&self) -> f64 {
        self.permeability.iter().copied().fold(0.0, f64::max)
    }

    pub fn d_min(&self) -> f64 {
        self.diffusivity.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn d_max(&self) -> f64 {
        self.diffusivity.iter().copied().fold(0.0, f64::max)
    }

    /// Top and bottom of layer `j` (0-based).
    pub fn layer_bounds(&self, j: usize) -> (f64, f64) {
        let top = if j == 0 { 0.0 } else { self.interfaces[j - 1] };
        let bottom = if j + 1 == self.layers() {
            -self.depth
        } else {
            self.interfaces[j]
        };
        (top, bottom)
    }

    pub fn min_thickness(&self) -> f64 {
        (0..self.layers())
            .map(|j| {
                let (t, b) = self.layer_bounds(j);
                t - b
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// Layer containing `z`; points on an interface belong to the layer above.
    pub fn layer_of(&self, z: f64) -> usize {
        self.interfaces.iter().take_while(|&&zi| z < zi).count()
    }

    fn values(&self, which: Coefficient) -> &[f64] {
        match which {
            Coefficient::Permeability => &self.permeability,
            Coefficient::Diffusivity => &self.diffusivity,
        }
    }

    /// Pointwise coefficient profile for transition half-width `epsilon`.
    ///
    /// Inside `(z_j - eps, z_j + eps)` the value ramps linearly from the
    /// plateau of the layer below to the plateau of the layer above. With
    /// `epsilon == 0` an interface point returns the mean of both sides.
    pub fn coefficient_at(&self, which: Coefficient, z: f64, epsilon: f64) -> f64 {
        let vals = self.values(which);
        for (j, &zj) in self.interfaces.iter().enumerate() {
            let above = vals[j];
            let below = vals[j + 1];
            if epsilon > 0.0 {
                if z > zj - epsilon && z < zj + epsilon {
                    return below + (z - zj + epsilon) * (above - below) / (2.0 * epsilon);
                }
            } else if z == zj {
                return 0.5 * (above + below);
            }
        }
        vals[self.layer_of(z)]
    }
}

/// Tensor-product grid: uniform Fourier collocation horizontally, finite
/// volumes vertically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub nx: usize,
    pub ny: usize,
    pub length: f64,
    faces: Vec<f64>,
    #[serde(skip)]
    centers: Vec<f64>,
    #[serde(skip)]
    widths: Vec<f64>,
}

impl Grid {
    /// Builds a grid from explicit vertical faces ordered from `0` down to `-H`.
    pub fn from_faces(nx: usize, ny: usize, length: f64, faces: Vec<f64>) -> Result<Self> {
        for (name, n) in [("N_x", nx), ("N_y", ny)] {
            if n == 0 || !n.is_power_of_two() {
                return Err(Error::InvalidParameter {
                    name: if name == "N_x" { "N_x" } else { "N_y" },
                    reason: format!("must be a power of two, got {n}"),
                });
            }
        }
        if faces.len() < 2 {
            return Err(Error::InvalidParameter {
                name: "faces",
                reason: "need at least one vertical cell".into(),
            });
        }
        if faces[0] != 0.0 {
            return Err(Error::InvalidParameter {
                name: "faces",
                reason: "first face must be z = 0".into(),
            });
        }
        if let Some(i) = (1..faces.len()).find(|&i| faces[i] >= faces[i - 1]) {
            return Err(Error::NonMonotoneInterfaces {
                index: i,
                value: faces[i],
            });
        }
        if !(length > 0.0) {
            return Err(Error::InvalidParameter {
                name: "L",
                reason: "must be positive".into(),
            });
        }
        let centers = faces.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let widths = faces.windows(2).map(|w| w[0] - w[1]).collect();
        Ok(Self {
            nx,
            ny,
            length,
            faces,
            centers,
            widths,
        })
    }

    /// Uniform vertical spacing.
    pub fn uniform(cfg: &LayerConfig, nx: usize, ny: usize, nz: usize) -> Result<Self> {
        let h = cfg.depth / nz as f64;
        let mut faces: Vec<f64> = (0..=nz).map(|i| -(i as f64) * h).collect();
        faces[nz] = -cfg.depth;
        Self::from_faces(nx, ny, cfg.length, faces)
    }

    /// Vertical faces pinned to every interface, every `z_j ± eps` for the
    /// given half-widths, and any extra breakpoints; uniform within each
    /// segment with roughly `H / nz_target` spacing.
    pub fn aligned(
        cfg: &LayerConfig,
        nx: usize,
        ny: usize,
        nz_target: usize,
        epsilons: &[f64],
        extra: &[f64],
    ) -> Result<Self> {
        let h_target = cfg.depth / nz_target.max(1) as f64;
        let mut breaks = vec![0.0, -cfg.depth];
        for &zj in &cfg.interfaces {
            breaks.push(zj);
            for &e in epsilons.iter().filter(|e| **e > 0.0) {
                breaks.push(zj + e);
                breaks.push(zj - e);
            }
        }
        breaks.extend(extra.iter().copied().filter(|z| *z < 0.0 && *z > -cfg.depth));
        breaks.sort_by(|a, b| b.partial_cmp(a).expect("finite breakpoints"));
        breaks.dedup_by(|a, b| (*a - *b).abs() <= ALIGN_TOL * cfg.depth);

        let mut faces = vec![0.0];
        for w in breaks.windows(2) {
            let (top, bottom) = (w[0], w[1]);
            let len = top - bottom;
            let n = ((len / h_target).round() as usize).max(MIN_SEGMENT_CELLS);
            let h = len / n as f64;
            for i in 1..n {
                faces.push(top - i as f64 * h);
            }
            faces.push(bottom);
        }
        Self::from_faces(nx, ny, cfg.length, faces)
    }

    fn ensure_cache(&mut self) {
        if self.centers.len() + 1 != self.faces.len() {
            self.centers = self.faces.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
            self.widths = self.faces.windows(2).map(|w| w[0] - w[1]).collect();
        }
    }

    /// Restores derived arrays after deserialization.
    pub fn rehydrate(mut self) -> Self {
        self.ensure_cache();
        self
    }

    pub fn nz(&self) -> usize {
        self.faces.len() - 1
    }

    pub fn faces(&self) -> &[f64] {
        &self.faces
    }

    pub fn centers(&self) -> &[f64] {
        &self.centers
    }

    pub fn widths(&self) -> &[f64] {
        &self.widths
    }

    pub fn depth(&self) -> f64 {
        -self.faces[self.faces.len() - 1]
    }

    pub fn dx(&self) -> f64 {
        self.length / self.nx as f64
    }

    pub fn dy(&self) -> f64 {
        self.length / self.ny as f64
    }

    /// Horizontal area element of one collocation point.
    pub fn cell_area(&self) -> f64 {
        self.dx() * self.dy()
    }

    pub fn volume(&self) -> f64 {
        self.length * self.length * self.depth()
    }

    pub fn columns(&self) -> usize {
        self.nx * self.ny
    }

    /// Number of cell-centred values.
    pub fn len(&self) -> usize {
        self.nx * self.ny * self.nz()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Flat index with `z` fastest, then `x`, then `y`.
    #[inline]
    pub fn idx(&self, x: usize, y: usize, z: usize) -> usize {
        (y * self.nx + x) * self.nz() + z
    }

    /// Distance between the centres of the cells adjacent to interior face `f`.
    #[inline]
    pub fn face_distance(&self, f: usize) -> f64 {
        self.centers[f - 1] - self.centers[f]
    }

    pub fn has_face(&self, z: f64) -> bool {
        let tol = ALIGN_TOL * self.depth();
        self.faces.iter().any(|&f| (f - z).abs() <= tol)
    }

    /// Horizontal collocation coordinates.
    pub fn x_coords(&self) -> Vec<f64> {
        (0..self.nx).map(|i| i as f64 * self.dx()).collect()
    }

    pub fn y_coords(&self) -> Vec<f64> {
        (0..self.ny).map(|i| i as f64 * self.dy()).collect()
    }

    /// Same vertical faces and horizontal layout.
    pub fn compatible(&self, other: &Grid) -> bool {
        self.nx == other.nx
            && self.ny == other.ny
            && self.length == other.length
            && self.faces == other.faces
    }
}

/// Coefficients sampled on a grid for one transition half-width.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    pub epsilon: f64,
    pub k_cell: Vec<f64>,
    pub k_face: Vec<f64>,
    pub d_cell: Vec<f64>,
    pub d_face: Vec<f64>,
    /// Cells lying inside a transition strip.
    pub transition: Vec<bool>,
}

/// Samples `K^eps` and `D^eps` at cell centres and effective face values.
///
/// For `eps > 0` faces carry the pointwise (continuous) profile. For the
/// sharp profile, a face separating two different values carries the
/// distance-weighted harmonic mean, which reproduces the exact flux through
/// two adjacent materials.
pub fn sample_coefficients(
    cfg: &LayerConfig,
    grid: &Grid,
    epsilon: f64,
) -> Result<CoefficientField> {
    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "epsilon",
            reason: format!("must be non-negative, got {epsilon}"),
        });
    }
    let min_thick = cfg.min_thickness();
    if epsilon > 0.0 && 2.0 * epsilon >= min_thick {
        return Err(Error::EpsilonTooLarge {
            epsilon,
            min_thickness: min_thick,
        });
    }
    if (grid.depth() - cfg.depth).abs() > ALIGN_TOL * cfg.depth {
        return Err(Error::MisalignedGrid { z: -cfg.depth });
    }
    for &zj in &cfg.interfaces {
        let mut pins = vec![zj];
        if epsilon > 0.0 {
            pins.extend([zj + epsilon, zj - epsilon]);
        }
        if let Some(&z) = pins.iter().find(|&&z| !grid.has_face(z)) {
            return Err(Error::MisalignedGrid { z });
        }
    }

    let nz = grid.nz();
    let centers = grid.centers();
    let widths = grid.widths();
    let faces = grid.faces();
    let mut out = CoefficientField {
        epsilon,
        k_cell: vec![0.0; nz],
        k_face: vec![0.0; nz + 1],
        d_cell: vec![0.0; nz],
        d_face: vec![0.0; nz + 1],
        transition: vec![false; nz],
    };
    for i in 0..nz {
        let zc = centers[i];
        out.k_cell[i] = cfg.coefficient_at(Coefficient::Permeability, zc, epsilon);
        out.d_cell[i] = cfg.coefficient_at(Coefficient::Diffusivity, zc, epsilon);
        out.transition[i] =
            epsilon > 0.0 && cfg.interfaces.iter().any(|&zj| (zc - zj).abs() < epsilon);
    }
    out.k_face[0] = out.k_cell[0];
    out.d_face[0] = out.d_cell[0];
    out.k_face[nz] = out.k_cell[nz - 1];
    out.d_face[nz] = out.d_cell[nz - 1];
    for f in 1..nz {
        if epsilon > 0.0 {
            out.k_face[f] = cfg.coefficient_at(Coefficient::Permeability, faces[f], epsilon);
            out.d_face[f] = cfg.coefficient_at(Coefficient::Diffusivity, faces[f], epsilon);
        } else {
            let dist = grid.face_distance(f);
            out.k_face[f] = face_mean(out.k_cell[f - 1], out.k_cell[f], widths[f - 1], widths[f], dist);
            out.d_face[f] = face_mean(out.d_cell[f - 1], out.d_cell[f], widths[f - 1], widths[f], dist);
        }
    }
    Ok(out)
}

/// Exact two-material face coefficient: `dist / (h_a/(2 c_a) + h_b/(2 c_b))`.
pub fn face_mean(ca: f64, cb: f64, ha: f64, hb: f64, dist: f64) -> f64 {
    if ca == cb {
        ca
    } else {
        dist / (0.5 * ha / ca + 0.5 * hb / cb)
    }
}

/// Background concentration profile `phi_b(z; delta)`.
///
/// Each boundary strip of width `delta` holds a C¹ piecewise-quadratic
/// transition with constant `|phi_b''| = 2 c_Δ / δ²` and a sign flip at
/// the strip midpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackgroundProfile {
    pub delta: f64,
    pub depth: f64,
    pub c_top: f64,
    pub c_bottom: f64,
    pub c_delta: f64,
    pub value_center: Vec<f64>,
    pub slope_center: Vec<f64>,
    pub curvature_center: Vec<f64>,
    pub value_face: Vec<f64>,
    pub slope_face: Vec<f64>,
    /// Exact cell means of `phi_b'`.
    pub slope_mean: Vec<f64>,
    /// Exact cell means of `phi_b''`.
    pub curvature_mean: Vec<f64>,
}

impl BackgroundProfile {
    fn mid(&self) -> f64 {
        0.5 * (self.c_top + self.c_bottom)
    }

    /// Returns (value, slope, curvature) at `z`.
    pub fn eval(&self, z: f64) -> (f64, f64, f64) {
        let d = self.delta;
        let m = self.mid();
        let a = 2.0 * (self.c_top - self.c_bottom) / (d * d);
        if z >= -d {
            // top strip, tau measured upward from z = -delta
            let tau = z + d;
            if tau <= 0.5 * d {
                (m + 0.5 * a * tau * tau, a * tau, a)
            } else {
                let r = d - tau;
                (self.c_top - 0.5 * a * r * r, a * r, -a)
            }
        } else if z <= -self.depth + d {
            let tau = z + self.depth;
            if tau <= 0.5 * d {
                (self.c_bottom + 0.5 * a * tau * tau, a * tau, a)
            } else {
                let r = d - tau;
                (m - 0.5 * a * r * r, a * r, -a)
            }
        } else {
            (m, 0.0, 0.0)
        }
    }

    pub fn value(&self, z: f64) -> f64 {
        self.eval(z).0
    }

    pub fn slope(&self, z: f64) -> f64 {
        self.eval(z).1
    }

    pub fn curvature(&self, z: f64) -> f64 {
        self.eval(z).2
    }
}

/// Builds `phi_b` on the grid for strip width `delta`.
pub fn build_background(cfg: &LayerConfig, grid: &Grid, delta: f64) -> Result<BackgroundProfile> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidDelta {
            delta,
            reason: "must be positive".into(),
        });
    }
    let reach = geometric_reach(cfg);
    if delta >= reach {
        return Err(Error::InvalidDelta {
            delta,
            reason: format!("strip reaches an interface or the opposite strip (limit {reach})"),
        });
    }
    let mut bg = BackgroundProfile {
        delta,
        depth: cfg.depth,
        c_top: cfg.c_top,
        c_bottom: cfg.c_bottom,
        c_delta: cfg.c_delta(),
        value_center: vec![],
        slope_center: vec![],
        curvature_center: vec![],
        value_face: vec![],
        slope_face: vec![],
        slope_mean: vec![],
        curvature_mean: vec![],
    };
    let faces = grid.faces();
    let nz = grid.nz();
    for &zc in grid.centers() {
        let (v, s, c) = bg.eval(zc);
        bg.value_center.push(v);
        bg.slope_center.push(s);
        bg.curvature_center.push(c);
    }
    for &zf in faces {
        let (v, s, _) = bg.eval(zf);
        bg.value_face.push(v);
        bg.slope_face.push(s);
    }
    // exact endpoints
    bg.value_face[0] = cfg.c_top;
    bg.value_face[nz] = cfg.c_bottom;
    for i in 0..nz {
        let h = faces[i] - faces[i + 1];
        bg.slope_mean.push((bg.value_face[i] - bg.value_face[i + 1]) / h);
        bg.curvature_mean.push((bg.slope_face[i] - bg.slope_face[i + 1]) / h);
    }
    Ok(bg)
}

/// Exclusive upper limit on the strip width: the strips may neither reach an
/// interface nor overlap each other.
pub fn geometric_reach(cfg: &LayerConfig) -> f64 {
    match (cfg.interfaces.first(), cfg.interfaces.last()) {
        (Some(&top), Some(&bottom)) => (-top).min(cfg.depth + bottom),
        _ => 0.5 * cfg.depth,
    }
}

/// Outcome of the strip-width selection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaChoice {
    pub delta: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub geometric_cap: f64,
    pub r: f64,
    pub cp: f64,
    pub note: Option<String>,
}

/// Picks `delta = min{delta_1(r), delta_2}` capped at half the geometric reach.
pub fn choose_delta(cfg: &LayerConfig, r: f64, cp: f64) -> Result<DeltaChoice> {
    if !(r > 2.0) {
        return Err(Error::InvalidParameter {
            name: "r",
            reason: format!("must exceed 2, got {r}"),
        });
    }
    if !(cp > 0.0 && cp.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "C_p",
            reason: format!("must be positive, got {cp}"),
        });
    }
    let cap = 0.5 * geometric_reach(cfg);
    let c_delta = cfg.c_delta();
    if c_delta == 0.0 {
        return Ok(DeltaChoice {
            delta: cap,
            delta1: f64::INFINITY,
            delta2: f64::INFINITY,
            geometric_cap: cap,
            r,
            cp,
            note: Some("c_delta = 0: strip-width formulas are vacuous, using the geometric cap".into()),
        });
    }
    let delta1 = delta_1(cfg, r, cp);
    let delta2 = delta_2(cfg);
    let raw = delta1.min(delta2);
    let (delta, note) = if raw > cap {
        (cap, Some(format!("capped by geometry from {raw}")))
    } else {
        (raw, None)
    };
    Ok(DeltaChoice {
        delta,
        delta1,
        delta2,
        geometric_cap: cap,
        r,
        cp,
        note,
    })
}

/// `[((r-1)/r²) min D / (c_Δ H^{2/r} max K (1 + C_p))]^{r/(r-2)}`.
pub fn delta_1(cfg: &LayerConfig, r: f64, cp: f64) -> f64 {
    let num = (r - 1.0) / (r * r) * cfg.d_min();
    let den = cfg.c_delta() * cfg.depth.powf(2.0 / r) * cfg.k_max() * (1.0 + cp);
    (num / den).powf(r / (r - 2.0))
}

/// `min K min D / (32 (max K)² c_Δ)`.
pub fn delta_2(cfg: &LayerConfig) -> f64 {
    let kmax = cfg.k_max();
    cfg.k_min() * cfg.d_min() / (32.0 * kmax * kmax * cfg.c_delta())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_layer(k: [f64; 2], d: [f64; 2]) -> LayerConfig {
        LayerConfig::new(1.0, 1.0, vec![-0.5], k.to_vec(), d.to_vec(), 1.0, 0.0).unwrap()
    }

    #[test]
    fn homogeneous_two_layer_is_valid() {
        let cfg = two_layer([1.0, 1.0], [1.0, 1.0]);
        assert_eq!(cfg.c_delta(), 1.0);
        assert_eq!(cfg.layers(), 2);
    }

    #[test]
    fn rejects_non_monotone_interfaces() {
        let err = LayerConfig::new(1.0, 1.0, vec![-0.5, -0.3], vec![1.0; 3], vec![1.0; 3], 1.0, 0.0)
            .unwrap_err();
        assert!(matches!(err, Error::NonMonotoneInterfaces { index: 2, .. }));
        assert!(err.to_string().contains("non-monotone interfaces"));
    }

    #[test]
    fn rejects_negative_permeability_with_layer_index() {
        let err = LayerConfig::new(1.0, 1.0, vec![-0.5], vec![1.0, -2.0], vec![1.0; 2], 1.0, 0.0)
            .unwrap_err();
        assert!(err.to_string().contains("non-positive coefficient K at layer 2"));
    }

    #[test]
    fn rejects_length_mismatch() {
        let err = LayerConfig::new(1.0, 1.0, vec![-0.5], vec![1.0], vec![1.0; 2], 1.0, 0.0)
            .unwrap_err();
        assert!(matches!(err, Error::LengthMismatch { what: "K", .. }));
    }

    #[test]
    fn ramp_midpoint_and_plateaus() {
        let cfg = two_layer([1.0, 10.0], [1.0, 1.0]);
        let k = |z| cfg.coefficient_at(Coefficient::Permeability, z, 0.05);
        assert!((k(-0.5) - 5.5).abs() < 1e-12);
        assert_eq!(k(-0.45), 1.0);
        assert_eq!(k(-0.55), 10.0);
    }

    #[test]
    fn sharp_interface_face_is_harmonic() {
        let cfg = two_layer([1.0, 10.0], [1.0, 1.0]);
        let grid = Grid::uniform(&cfg, 1, 1, 8).unwrap();
        let c = sample_coefficients(&cfg, &grid, 0.0).unwrap();
        assert!((c.k_face[4] - 20.0 / 11.0).abs() < 1e-14);
        assert_eq!(c.k_face[3], 1.0);
        assert_eq!(c.k_face[5], 10.0);
    }

    #[test]
    fn diffuse_sampling_requires_alignment() {
        let cfg = two_layer([1.0, 10.0], [1.0, 1.0]);
        let grid = Grid::uniform(&cfg, 1, 1, 8).unwrap();
        assert!(matches!(
            sample_coefficients(&cfg, &grid, 0.05),
            Err(Error::MisalignedGrid { .. })
        ));
        assert!(matches!(
            sample_coefficients(&cfg, &grid, 0.3),
            Err(Error::EpsilonTooLarge { .. })
        ));
        let grid = Grid::aligned(&cfg, 1, 1, 64, &[0.05], &[]).unwrap();
        let c = sample_coefficients(&cfg, &grid, 0.05).unwrap();
        assert!(c.transition.iter().any(|&t| t));
    }

    #[test]
    fn background_examples() {
        let cfg = two_layer([1.0, 1.0], [1.0, 1.0]);
        let grid = Grid::uniform(&cfg, 1, 1, 100).unwrap();
        let bg = build_background(&cfg, &grid, 0.1).unwrap();
        let (v, s, _) = bg.eval(-0.05);
        assert!((v - 0.75).abs() < 1e-14);
        // phi_b increases with z from c_bottom = 0 to c_top = 1
        assert!((s - 10.0).abs() < 1e-12);
        assert_eq!(bg.value(0.0), 1.0);
        assert_eq!(bg.value(-1.0), 0.0);
        assert_eq!(bg.value(-0.5), 0.5);

        let flat = LayerConfig::new(1.0, 1.0, vec![-0.5], vec![1.0; 2], vec![1.0; 2], 1.0, 1.0).unwrap();
        let bg = build_background(&flat, &grid, 0.1).unwrap();
        assert!(bg.value_center.iter().all(|&v| v == 1.0));
        assert!(bg.slope_center.iter().all(|&v| v == 0.0));
        assert!(bg.curvature_mean.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn background_rejects_bad_delta() {
        let cfg = two_layer([1.0, 1.0], [1.0, 1.0]);
        let grid = Grid::uniform(&cfg, 1, 1, 10).unwrap();
        assert!(build_background(&cfg, &grid, 0.0).is_err());
        assert!(build_background(&cfg, &grid, 0.6).is_err());
    }

    #[test]
    fn delta_formulas() {
        let cfg = two_layer([1.0, 1.0], [1.0, 1.0]);
        assert_eq!(delta_2(&cfg), 0.03125);
        let d1 = delta_1(&cfg, 4.0, 1.0);
        assert!((d1 - 0.0087890625).abs() < 1e-15);
        let choice = choose_delta(&cfg, 4.0, 1.0).unwrap();
        assert!((choice.delta - 0.0087890625).abs() < 1e-15);
        assert!(choice.note.is_none());
    }

    #[test]
    fn delta_vacuous_without_contrast() {
        let cfg = LayerConfig::new(1.0, 1.0, vec![-0.5], vec![1.0; 2], vec![1.0; 2], 0.5, 0.5).unwrap();
        let choice = choose_delta(&cfg, 4.0, 1.0).unwrap();
        assert_eq!(choice.delta, 0.25);
        assert!(choice.note.unwrap().contains("vacuous"));
    }

    #[test]
    fn aligned_grid_is_uniform_when_commensurate() {
        let cfg = two_layer([1.0, 10.0], [1.0, 4.0]);
        let grid = Grid::aligned(&cfg, 1, 1, 100, &[0.04, 0.02, 0.01], &[]).unwrap();
        assert_eq!(grid.nz(), 100);
        let w = grid.widths();
        assert!(w.iter().all(|&h| (h - 0.01).abs() < 1e-12));
        for z in [-0.46, -0.48, -0.49, -0.5, -0.51, -0.52, -0.54] {
            assert!(grid.has_face(z));
        }
    }
}
