//! Time stepping of the homogenized concentration `ψ = c - φ_b`.
//!
//! Each step recomputes the Darcy flow from `ψⁿ`, forms the explicit terms
//! (conservative advection `∇·(uψ)`, background coupling `φ_b' u_z`, and the
//! source `D φ_b''`), and solves the diffusion implicitly per horizontal mode.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{
    build_background, sample_coefficients, BackgroundProfile, CoefficientField, Grid, LayerConfig,
};
use crate::error::{Error, Result};
use crate::field;
use crate::fourier::Fourier;
use crate::operator::{eigensolve, DiffusionOperator, Spectrum};
use crate::pressure::{FlowField, PressureSolver};
use crate::tridiag;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Which coefficient profile drives a run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", content = "epsilon", rename_all = "lowercase")]
pub enum Model {
    Sharp,
    Diffuse(f64),
}

impl Model {
    pub fn epsilon(&self) -> f64 {
        match self {
            Model::Sharp => 0.0,
            Model::Diffuse(e) => *e,
        }
    }

    pub fn tag(&self) -> &'static str {
        match self {
            Model::Sharp => "sharp",
            Model::Diffuse(_) => "diffuse",
        }
    }
}

/// Time integrator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Backward Euler diffusion, forward Euler explicit terms.
    #[default]
    Imex1,
    /// Crank–Nicolson diffusion, Adams–Bashforth-2 explicit terms.
    Cnab2,
}

impl std::str::FromStr for Scheme {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "imex1" => Ok(Scheme::Imex1),
            "cnab2" => Ok(Scheme::Cnab2),
            other => Err(Error::Config(format!("unknown scheme '{other}'"))),
        }
    }
}

/// Everything that stays fixed during a run.
#[derive(Debug, Clone)]
pub struct Problem {
    pub cfg: LayerConfig,
    pub grid: Grid,
    pub model: Model,
    pub fourier: Arc<Fourier>,
    pub coeffs: CoefficientField,
    pub background: BackgroundProfile,
    pub diffusion: DiffusionOperator,
    pub pressure: PressureSolver,
    /// `D φ_b''` per cell (horizontally uniform).
    pub source: Vec<f64>,
    /// Spectrum used for `ℋ^s` norms (the sharp operator's by convention).
    pub norm_spectrum: Option<Arc<Spectrum>>,
}

impl Problem {
    pub fn new(cfg: &LayerConfig, grid: &Grid, model: Model, delta: f64) -> Result<Self> {
        Self::with_fourier(cfg, grid, model, delta, Arc::new(Fourier::new(grid)))
    }

    pub fn with_fourier(
        cfg: &LayerConfig,
        grid: &Grid,
        model: Model,
        delta: f64,
        fourier: Arc<Fourier>,
    ) -> Result<Self> {
        if let Model::Diffuse(e) = model {
            if !(e > 0.0) {
                return Err(Error::InvalidParameter {
                    name: "epsilon",
                    reason: "diffuse runs need epsilon > 0".into(),
                });
            }
        }
        let coeffs = sample_coefficients(cfg, grid, model.epsilon())?;
        let background = build_background(cfg, grid, delta)?;
        let diffusion = DiffusionOperator::new(grid, fourier.clone(), &coeffs)?;
        let pressure = PressureSolver::new(grid, fourier.clone(), &coeffs)?;
        let source = coeffs
            .d_cell
            .iter()
            .zip(&background.curvature_mean)
            .map(|(d, c)| d * c)
            .collect();
        Ok(Self {
            cfg: cfg.clone(),
            grid: grid.clone(),
            model,
            fourier,
            coeffs,
            background,
            diffusion,
            pressure,
            source,
            norm_spectrum: None,
        })
    }

    pub fn with_norm_spectrum(mut self, spectrum: Arc<Spectrum>) -> Self {
        self.norm_spectrum = Some(spectrum);
        self
    }

    /// Spectrum of the sharp operator on this grid.
    pub fn sharp_spectrum(&self) -> Result<Arc<Spectrum>> {
        let coeffs = sample_coefficients(&self.cfg, &self.grid, 0.0)?;
        let op = DiffusionOperator::new(&self.grid, self.fourier.clone(), &coeffs)?;
        Ok(Arc::new(eigensolve(&op, None)?))
    }

    pub fn ensure_norm_spectrum(&mut self) -> Result<Arc<Spectrum>> {
        if self.norm_spectrum.is_none() {
            self.norm_spectrum = Some(self.sharp_spectrum()?);
        }
        Ok(self.norm_spectrum.clone().expect("just set"))
    }

    pub fn delta(&self) -> f64 {
        self.background.delta
    }

    /// Steady horizontally uniform state `L ψ = D φ_b''` (no flow).
    pub fn conduction_state(&self) -> Vec<f64> {
        let nz = self.grid.nz();
        let (lower, diag, upper) = self.diffusion.stiffness(0.0);
        let w = self.grid.widths();
        let mut rhs: Vec<f64> = (0..nz).map(|i| w[i] * self.source[i]).collect();
        let mut scratch = vec![0.0; nz];
        tridiag::solve(&lower, &diag, &upper, &mut rhs, &mut scratch);
        let mut out = vec![0.0; self.grid.len()];
        for col in out.chunks_exact_mut(nz) {
            col.copy_from_slice(&rhs);
        }
        out
    }

    /// Band-limits `ψ` with the two-thirds rule.
    pub fn project(&self, psi: &[f64]) -> Result<Vec<f64>> {
        field::check_len(&self.grid, psi)?;
        Ok(self.fourier.dealias_field(psi))
    }

    /// Initial state; `ψ₀` is band-limited first.
    pub fn initial_state(&self, psi0: &[f64]) -> Result<SimState> {
        let psi = self.project(psi0)?;
        if psi.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step: 0 });
        }
        let psi_hat = self.fourier.forward(&psi);
        let flow = self.pressure.flow_spectral(&psi_hat)?;
        Ok(SimState {
            t: 0.0,
            step: 0,
            psi,
            psi_hat,
            flow,
            prev_explicit: None,
            prev_dt: 0.0,
            model: self.model,
            delta: self.delta(),
        })
    }

    /// `∇·(uψ)` in spectral space, two-thirds dealiased.
    pub fn advection(&self, state: &SimState) -> Vec<Complex64> {
        let nz = self.grid.nz();
        let f = &self.fourier;
        let flow = &state.flow;
        let psi = &state.psi;
        let w = self.grid.widths();
        let fx: Vec<f64> = flow.ux.iter().zip(psi).map(|(u, p)| u * p).collect();
        let fy: Vec<f64> = flow.uy.iter().zip(psi).map(|(u, p)| u * p).collect();
        let mut vert = vec![0.0; self.grid.len()];
        vert.par_chunks_mut(nz)
            .zip(psi.par_chunks(nz))
            .zip(flow.uz.par_chunks(nz + 1))
            .for_each(|((out, x), q)| {
                let mut top = 0.0;
                for i in 0..nz {
                    let bottom = if i + 1 < nz {
                        q[i + 1] * 0.5 * (x[i] + x[i + 1])
                    } else {
                        0.0
                    };
                    out[i] = (top - bottom) / w[i];
                    top = bottom;
                }
            });
        let hx = f.forward(&fx);
        let hy = if self.grid.ny > 1 { Some(f.forward(&fy)) } else { None };
        let mut total = f.forward(&vert);
        total.par_chunks_mut(nz).enumerate().for_each(|(m, out)| {
            if !f.dealias[m] {
                out.fill(ZERO);
                return;
            }
            let ikx = Complex64::new(0.0, f.kx[m]);
            let iky = Complex64::new(0.0, f.ky[m]);
            for i in 0..nz {
                let c = m * nz + i;
                out[i] += ikx * hx[c];
                if let Some(hy) = &hy {
                    out[i] += iky * hy[c];
                }
            }
        });
        total
    }

    /// Explicit right-hand side `D φ_b'' - ∇·(uψ) - φ_b' u_z` in spectral space.
    pub fn explicit_terms(&self, state: &SimState) -> Vec<Complex64> {
        let nz = self.grid.nz();
        let f = &self.fourier;
        let mut rhs = self.advection(state);
        rhs.iter_mut().for_each(|v| *v = -*v);
        let slope = &self.background.slope_mean;
        if slope.iter().any(|&s| s != 0.0) {
            let uzc = self.pressure.uz_cells(&state.flow.uz);
            let coupling: Vec<f64> = uzc
                .chunks_exact(nz)
                .flat_map(|col| col.iter().zip(slope).map(|(u, s)| u * s))
                .collect();
            let ch = f.forward(&coupling);
            rhs.iter_mut().zip(&ch).for_each(|(r, c)| *r -= c);
        }
        let n = f.modes() as f64;
        for i in 0..nz {
            rhs[i] += Complex64::new(n * self.source[i], 0.0);
        }
        rhs
    }

    /// CFL-limited step size.
    pub fn cfl_dt(&self, state: &SimState, cfl: f64, dt_max: f64) -> f64 {
        cfl_dt_from_flow(&self.grid, &self.pressure, &state.flow, cfl, dt_max)
    }

    /// Advances one step of size `dt`.
    pub fn step(&self, state: &SimState, dt: f64, scheme: Scheme) -> Result<SimState> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "dt",
                reason: format!("must be positive, got {dt}"),
            });
        }
        let nz = self.grid.nz();
        let f = &self.fourier;
        let w = self.grid.widths();
        let explicit = self.explicit_terms(state);
        let (theta, forcing): (f64, Vec<Complex64>) = match (scheme, &state.prev_explicit) {
            (Scheme::Cnab2, Some(prev)) => {
                let omega = dt / state.prev_dt;
                let a = 1.0 + 0.5 * omega;
                let b = 0.5 * omega;
                (0.5, explicit.iter().zip(prev).map(|(e, p)| e * a - p * b).collect())
            }
            (Scheme::Cnab2, None) => (0.5, explicit.clone()),
            (Scheme::Imex1, _) => (1.0, explicit.clone()),
        };
        let mut next = vec![ZERO; state.psi_hat.len()];
        next.par_chunks_mut(nz).enumerate().for_each(|(m, out)| {
            let x = &state.psi_hat[m * nz..(m + 1) * nz];
            let g = &forcing[m * nz..(m + 1) * nz];
            let (lower, diag, upper) = self.diffusion.stiffness(f.k2[m]);
            // (H + θ dt S) ψ⁺ = H(ψ + dt g) - (1-θ) dt S ψ
            for i in 0..nz {
                let mut r = (x[i] + g[i] * dt) * w[i];
                if theta < 1.0 {
                    let mut sx = x[i] * diag[i];
                    if i > 0 {
                        sx += x[i - 1] * lower[i];
                    }
                    if i + 1 < nz {
                        sx += x[i + 1] * upper[i];
                    }
                    r -= sx * ((1.0 - theta) * dt);
                }
                out[i] = r;
            }
            let lo: Vec<f64> = lower.iter().map(|v| v * theta * dt).collect();
            let up: Vec<f64> = upper.iter().map(|v| v * theta * dt).collect();
            let di: Vec<f64> = diag.iter().zip(w).map(|(v, h)| h + v * theta * dt).collect();
            let mut scratch = vec![0.0; nz];
            tridiag::solve(&lo, &di, &up, out, &mut scratch);
        });
        let psi = f.inverse(&next);
        let step = state.step + 1;
        if psi.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { step });
        }
        let flow = self.pressure.flow_spectral(&next)?;
        Ok(SimState {
            t: state.t + dt,
            step,
            psi,
            psi_hat: next,
            flow,
            prev_explicit: if scheme == Scheme::Cnab2 {
                Some(explicit)
            } else {
                None
            },
            prev_dt: dt,
            model: self.model,
            delta: state.delta,
        })
    }

    /// `(1/|Ω|) ∫ u_z ψ` with cell-centred `u_z`.
    pub fn nusselt_integrand(&self, state: &SimState) -> f64 {
        let uzc = self.pressure.uz_cells(&state.flow.uz);
        field::inner(&self.grid, &uzc, &state.psi) / self.grid.volume()
    }

    /// Diagnostics of the current state.
    pub fn diagnostics(&self, state: &SimState, r: f64, s: f64) -> Result<Diagnostics> {
        let spectrum = self
            .norm_spectrum
            .as_ref()
            .ok_or_else(|| Error::Config("no spectrum available for fractional norms".into()))?;
        let exp = spectrum.expand_spectral(&state.psi_hat)?;
        Ok(Diagnostics {
            l2: field::l2_norm(&self.grid, &state.psi),
            lr: field::lr_norm(&self.grid, &state.psi, r),
            grad: self.diffusion.energy_sq(&state.psi_hat).sqrt(),
            hs: spectrum.fractional_norm(&exp, s)?,
            nu_inst: self.nusselt_integrand(state),
            divmax: self.pressure.check_divergence(&state.flow),
        })
    }
}

/// `C_cfl · min(Δx/|u_x|, Δy/|u_y|, h/|u_z|)`, capped at `dt_max`.
pub fn cfl_dt_from_flow(
    grid: &Grid,
    pressure: &PressureSolver,
    flow: &FlowField,
    cfl: f64,
    dt_max: f64,
) -> f64 {
    let nz = grid.nz();
    let w = grid.widths();
    let (dx, dy) = (grid.dx(), grid.dy());
    let uzc = pressure.uz_cells(&flow.uz);
    let mut rate: f64 = 0.0;
    for c in 0..grid.len() {
        let i = c % nz;
        rate = rate
            .max(flow.ux[c].abs() / dx)
            .max(flow.uy[c].abs() / dy)
            .max(uzc[c].abs() / w[i]);
    }
    if rate == 0.0 {
        dt_max
    } else {
        (cfl / rate).min(dt_max)
    }
}

/// Concentration state with its cached flow.
#[derive(Debug, Clone)]
pub struct SimState {
    pub t: f64,
    pub step: u64,
    pub psi: Vec<f64>,
    pub psi_hat: Vec<Complex64>,
    pub flow: FlowField,
    pub prev_explicit: Option<Vec<Complex64>>,
    pub prev_dt: f64,
    pub model: Model,
    pub delta: f64,
}

/// Norms and flux of one state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Diagnostics {
    pub l2: f64,
    pub lr: f64,
    pub grad: f64,
    pub hs: f64,
    pub nu_inst: f64,
    pub divmax: f64,
}

/// One output row of a time series.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub t: f64,
    /// `‖ψ‖_{L²}`.
    pub l2: f64,
    /// `‖ψ‖_{L^r}`.
    pub lr: f64,
    /// `‖√D ∇ψ‖_{L²}`.
    pub grad: f64,
    /// `‖ψ‖_{ℋ^s}`.
    pub hs: f64,
    pub nu_inst: f64,
    pub nu_avg: f64,
    pub divmax: f64,
    pub dt: f64,
}

/// Metadata stored next to a time series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesMeta {
    pub model: String,
    pub epsilon: f64,
    pub delta: f64,
    pub r: f64,
    pub s: f64,
    pub scheme: Scheme,
    pub d_min: f64,
    pub depth: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    pub rows: Vec<Row>,
    pub meta: SeriesMeta,
}

impl TimeSeries {
    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }
}

/// Run controls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub t_end: f64,
    /// Output interval.
    pub cadence: f64,
    pub dt_max: f64,
    pub cfl: f64,
    pub scheme: Scheme,
    /// Exponent of the `L^r` column.
    pub r: f64,
    /// Order of the `ℋ^s` column.
    pub s: f64,
    /// Output times at which full states are kept.
    pub snapshot_times: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            t_end: 1.0,
            cadence: 0.05,
            dt_max: 1e-2,
            cfl: 0.4,
            scheme: Scheme::Imex1,
            r: 4.0,
            s: 0.75,
            snapshot_times: Vec::new(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(Error::Config(format!("t_end must be non-negative, got {}", self.t_end)));
        }
        if !(self.cadence > 0.0) {
            return Err(Error::Config("cadence must be positive".into()));
        }
        if !(self.dt_max > 0.0) {
            return Err(Error::Config("dt_max must be positive".into()));
        }
        if !(self.cfl > 0.0) {
            return Err(Error::Config("cfl must be positive".into()));
        }
        if !(self.r >= 1.0) {
            return Err(Error::Config("r must be at least 1".into()));
        }
        Ok(())
    }

    /// Output times `0, cadence, 2·cadence, …, t_end`.
    pub fn output_times(&self) -> Vec<f64> {
        let mut out = vec![0.0];
        let n = (self.t_end / self.cadence * (1.0 + 1e-12)).floor() as usize;
        for k in 1..=n {
            out.push((k as f64 * self.cadence).min(self.t_end));
        }
        if self.t_end > 0.0 && (self.t_end - out[out.len() - 1]) > 1e-12 * self.t_end {
            out.push(self.t_end);
        }
        out
    }
}

/// Result of a run: series plus the states kept at snapshot times.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub series: TimeSeries,
    pub snapshots: Vec<SimState>,
    pub final_state: SimState,
}

struct Member<'a> {
    problem: &'a Problem,
    state: SimState,
    rows: Vec<Row>,
    snapshots: Vec<SimState>,
    nu_integral: f64,
    nu_last: f64,
}

/// Runs one trajectory.
pub fn run(problem: &Problem, psi0: &[f64], rc: &RunConfig) -> Result<RunOutput> {
    let mut out = run_group(&[problem], &[psi0.to_vec()], rc)?;
    Ok(out.remove(0))
}

/// Runs several trajectories in lockstep: every member takes the same step
/// sizes (the minimum of the members' CFL limits), so their output rows and
/// internal time levels coincide exactly.
pub fn run_group(problems: &[&Problem], psi0: &[Vec<f64>], rc: &RunConfig) -> Result<Vec<RunOutput>> {
    run_group_observed(problems, psi0, rc, &mut |_, _| Ok(()))
}

/// [`run_group`] that also hands the members' states to `observe` at every
/// output time, starting with `t = 0`.
pub fn run_group_observed(
    problems: &[&Problem],
    psi0: &[Vec<f64>],
    rc: &RunConfig,
    observe: &mut dyn FnMut(f64, &[&SimState]) -> Result<()>,
) -> Result<Vec<RunOutput>> {
    rc.validate()?;
    if problems.is_empty() || problems.len() != psi0.len() {
        return Err(Error::Lockstep(format!(
            "{} problems for {} initial states",
            problems.len(),
            psi0.len()
        )));
    }
    for p in problems {
        if p.norm_spectrum.is_none() {
            return Err(Error::Config("problem has no norm spectrum; call ensure_norm_spectrum".into()));
        }
        if !p.grid.compatible(&problems[0].grid) {
            return Err(Error::Lockstep("members use different grids".into()));
        }
    }
    let mut members: Vec<Member> = problems
        .iter()
        .zip(psi0)
        .map(|(p, x)| -> Result<Member> {
            let state = p.initial_state(x)?;
            let d = p.diagnostics(&state, rc.r, rc.s)?;
            Ok(Member {
                problem: p,
                rows: vec![row_from(0.0, &d, d.nu_inst, 0.0)],
                snapshots: Vec::new(),
                nu_integral: 0.0,
                nu_last: d.nu_inst,
                state,
            })
        })
        .collect::<Result<_>>()?;
    observe(0.0, &members.iter().map(|m| &m.state).collect::<Vec<_>>())?;
    let outputs = rc.output_times();
    let snap_due = |t: f64| rc.snapshot_times.iter().any(|&s| (s - t).abs() <= 1e-9 * rc.cadence.max(1.0));
    if snap_due(0.0) {
        for m in members.iter_mut() {
            m.snapshots.push(m.state.clone());
        }
    }
    let tol = 1e-12 * rc.cadence;
    for &target in outputs.iter().skip(1) {
        loop {
            let t = members[0].state.t;
            let remaining = target - t;
            if remaining <= tol {
                break;
            }
            let mut dt = members
                .iter()
                .map(|m| m.problem.cfl_dt(&m.state, rc.cfl, rc.dt_max))
                .fold(f64::INFINITY, f64::min);
            let landing = dt >= remaining - tol;
            if landing {
                dt = remaining;
            } else if dt > 0.5 * remaining {
                // avoid a sliver step before the output time
                dt = 0.5 * remaining;
            }
            let next: Vec<Result<SimState>> = members
                .par_iter()
                .map(|m| m.problem.step(&m.state, dt, rc.scheme))
                .collect();
            for (m, s) in members.iter_mut().zip(next) {
                let mut s = s?;
                if landing {
                    s.t = target;
                }
                let nu = m.problem.nusselt_integrand(&s);
                m.nu_integral += 0.5 * dt * (m.nu_last + nu);
                m.nu_last = nu;
                m.state = s;
            }
        }
        let last_dt = members[0].state.prev_dt;
        let diags: Vec<Result<Diagnostics>> = members
            .par_iter()
            .map(|m| m.problem.diagnostics(&m.state, rc.r, rc.s))
            .collect();
        for (m, d) in members.iter_mut().zip(diags) {
            let d = d?;
            let avg = if target > 0.0 { m.nu_integral / target } else { d.nu_inst };
            m.rows.push(row_from(target, &d, avg, last_dt));
            if snap_due(target) {
                m.snapshots.push(m.state.clone());
            }
        }
        observe(target, &members.iter().map(|m| &m.state).collect::<Vec<_>>())?;
    }
    Ok(members
        .into_iter()
        .map(|m| {
            let p = m.problem;
            RunOutput {
                series: TimeSeries {
                    rows: m.rows,
                    meta: SeriesMeta {
                        model: p.model.tag().into(),
                        epsilon: p.model.epsilon(),
                        delta: p.delta(),
                        r: rc.r,
                        s: rc.s,
                        scheme: rc.scheme,
                        d_min: p.cfg.d_min(),
                        depth: p.cfg.depth,
                    },
                },
                snapshots: m.snapshots,
                final_state: m.state,
            }
        })
        .collect())
}

fn row_from(t: f64, d: &Diagnostics, nu_avg: f64, dt: f64) -> Row {
    Row {
        t,
        l2: d.l2,
        lr: d.lr,
        grad: d.grad,
        hs: d.hs,
        nu_inst: d.nu_inst,
        nu_avg,
        divmax: d.divmax,
        dt,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn problem(c_top: f64) -> Problem {
        let cfg = LayerConfig::new(1.0, 1.0, vec![-0.5], vec![1.0, 10.0], vec![1.0, 4.0], c_top, 0.0)
            .unwrap();
        let grid = Grid::uniform(&cfg, 8, 1, 32).unwrap();
        let mut p = Problem::new(&cfg, &grid, Model::Sharp, 0.125).unwrap();
        p.ensure_norm_spectrum().unwrap();
        p
    }

    #[test]
    fn zero_state_is_fixed_without_forcing() {
        let p = problem(0.0);
        let s = p.initial_state(&vec![0.0; p.grid.len()]).unwrap();
        let s1 = p.step(&s, 0.01, Scheme::Imex1).unwrap();
        assert!(s1.psi.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn output_times_hit_t_end() {
        let rc = RunConfig {
            t_end: 1.0,
            cadence: 0.3,
            ..RunConfig::default()
        };
        assert_eq!(rc.output_times(), vec![0.0, 0.3, 0.6, 0.8999999999999999, 1.0]);
    }

    #[test]
    fn zero_horizon_returns_initial_row() {
        let p = problem(1.0);
        let rc = RunConfig {
            t_end: 0.0,
            ..RunConfig::default()
        };
        let out = run(&p, &vec![0.0; p.grid.len()], &rc).unwrap();
        assert_eq!(out.series.rows.len(), 1);
    }

    #[test]
    fn conduction_state_is_steady() {
        let p = problem(1.0);
        let psi = p.conduction_state();
        let s = p.initial_state(&psi).unwrap();
        let s1 = p.step(&s, 0.05, Scheme::Imex1).unwrap();
        let diff = field::max_abs(&field::sub(&s1.psi, &psi));
        assert!(diff < 1e-12, "{diff}");
    }
}
