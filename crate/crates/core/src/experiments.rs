//! Studies built on paired and ensemble runs: convergence of the diffuse
//! model to the sharp one, attractor proxies, Nusselt statistics, and the
//! smoothing and continuous-dependence probes.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::domain::{sample_coefficients, Grid, LayerConfig};
use crate::error::{Error, Result};
use crate::evolve::{run_group, run_group_observed, Model, Problem, RunConfig, SimState, TimeSeries};
use crate::fourier::Fourier;
use crate::ledger::{trapezoid_window, BoundLedger, TOL_REL};
use crate::operator::{eigensolve, DiffusionOperator, FieldExpansion, Spectrum};
use crate::sampler::{ensemble, EnsembleSpec};

/// Rate floor for `‖ψ - ψ^ε‖²` in `ε`.
pub const RATE_FLOOR: f64 = 1.0 / 6.0;
/// Allowed relative increase when asserting monotone decrease in `ε`.
pub const MONOTONE_TOL: f64 = 0.05;
/// Window-doubling tolerance for time averages.
pub const CAUCHY_TOL: f64 = 0.05;
/// Relative slack of the Nusselt comparison.
pub const NUSSELT_REL_TOL: f64 = 0.02;
pub const NUSSELT_ABS_TOL: f64 = 1e-6;

/// Shared grid, transforms and sharp spectrum for a family of runs.
#[derive(Debug, Clone)]
pub struct Study {
    pub cfg: LayerConfig,
    pub grid: Grid,
    pub delta: f64,
    pub fourier: Arc<Fourier>,
    pub spectrum: Arc<Spectrum>,
}

impl Study {
    pub fn new(cfg: &LayerConfig, grid: &Grid, delta: f64) -> Result<Self> {
        let fourier = Arc::new(Fourier::new(grid));
        let coeffs = sample_coefficients(cfg, grid, 0.0)?;
        let op = DiffusionOperator::new(grid, fourier.clone(), &coeffs)?;
        let spectrum = Arc::new(eigensolve(&op, None)?);
        Ok(Self {
            cfg: cfg.clone(),
            grid: grid.clone(),
            delta,
            fourier,
            spectrum,
        })
    }

    /// A problem whose fractional norms use the sharp spectrum.
    pub fn problem(&self, model: Model) -> Result<Problem> {
        Ok(Problem::with_fourier(&self.cfg, &self.grid, model, self.delta, self.fourier.clone())?
            .with_norm_spectrum(self.spectrum.clone()))
    }

    pub fn expand(&self, psi: &[f64]) -> Result<FieldExpansion> {
        self.spectrum.expand(&self.fourier, psi)
    }

    pub fn ensemble(&self, spec: &EnsembleSpec) -> Result<Vec<Vec<f64>>> {
        ensemble(&self.grid, &self.spectrum, spec)
    }
}

fn check_epsilons(eps: &[f64]) -> Result<()> {
    if eps.is_empty() {
        return Err(Error::InvalidParameter {
            name: "epsilon list",
            reason: "empty".into(),
        });
    }
    if let Some(e) = eps.iter().find(|e| !(**e > 0.0)) {
        return Err(Error::InvalidParameter {
            name: "epsilon list",
            reason: format!("diffuse runs need epsilon > 0, got {e}"),
        });
    }
    if eps.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidParameter {
            name: "epsilon list",
            reason: "must be strictly decreasing".into(),
        });
    }
    Ok(())
}

fn at_time(t: f64, targets: &[f64], cadence: f64) -> Option<usize> {
    targets.iter().position(|&s| (s - t).abs() <= 1e-9 * cadence.max(1.0))
}

/// Difference of two expansions on the same spectrum.
pub fn expansion_diff(a: &FieldExpansion, b: &FieldExpansion) -> FieldExpansion {
    let coeffs: Vec<Complex64> = a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x - y).collect();
    let norm_sq = coeffs.iter().map(|c| c.norm_sqr()).sum();
    FieldExpansion {
        cutoff: a.cutoff,
        coeffs,
        norm_sq,
    }
}

fn assert_lockstep(series: &[TimeSeries]) -> Result<()> {
    let t0 = series[0].times();
    for s in &series[1..] {
        if s.times() != t0 {
            return Err(Error::Lockstep("row times differ between paired runs".into()));
        }
    }
    Ok(())
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len() as f64;
    if x.len() < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Errors `ψ - ψ^ε` of a sweep and their fitted scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    /// Strictly decreasing.
    pub epsilons: Vec<f64>,
    pub sample_times: Vec<f64>,
    pub s: f64,
    /// `‖ψ - ψ^ε‖²` indexed `[ε][time]`.
    pub l2_sq: Vec<Vec<f64>>,
    /// `‖ψ - ψ^ε‖_{ℋ^s}` indexed `[ε][time]`.
    pub hs: Vec<Vec<f64>>,
    /// Slope of `ln‖ψ̃‖²` against `ln ε` over the three smallest `ε`;
    /// `None` when the errors vanish identically.
    pub slope: Vec<Option<f64>>,
    /// `‖ψ̃‖² / ε^{1/6}` at the largest `ε`.
    pub prefactor: Vec<f64>,
    pub monotone: Vec<bool>,
    pub exponent_ok: Vec<bool>,
    pub envelope_ok: Vec<bool>,
    pub rate_floor: f64,
    /// Largest `‖√D∇ψ^ε‖²` seen over all diffuse rows.
    pub max_energy: f64,
    pub passed: bool,
}

/// Report and the series of every run (sharp first).
#[derive(Debug, Clone)]
pub struct Sweep {
    pub report: ConvergenceReport,
    pub series: Vec<TimeSeries>,
}

/// Runs the sharp model and every `ε` in lockstep from the same `ψ₀`.
pub fn sweep_epsilon(
    study: &Study,
    psi0: &[f64],
    epsilons: &[f64],
    sample_times: &[f64],
    rc: &RunConfig,
) -> Result<Sweep> {
    check_epsilons(epsilons)?;
    let mut rc = rc.clone();
    let t_last = sample_times.iter().cloned().fold(0.0, f64::max);
    rc.t_end = rc.t_end.max(t_last);
    let outputs = rc.output_times();
    for &t in sample_times {
        if at_time(t, &outputs, rc.cadence).is_none() {
            return Err(Error::Config(format!("sample time {t} is not an output time")));
        }
    }
    let mut problems = vec![study.problem(Model::Sharp)?];
    for &e in epsilons {
        problems.push(study.problem(Model::Diffuse(e))?);
    }
    let refs: Vec<&Problem> = problems.iter().collect();
    let inits = vec![psi0.to_vec(); refs.len()];
    let ne = epsilons.len();
    let nt = sample_times.len();
    let mut l2_sq = vec![vec![0.0; nt]; ne];
    let mut hs = vec![vec![0.0; nt]; ne];
    let spectrum = &study.spectrum;
    let s = rc.s;
    let grid = &study.grid;
    let mut observe = |t: f64, states: &[&SimState]| -> Result<()> {
        let Some(k) = at_time(t, sample_times, rc.cadence) else {
            return Ok(());
        };
        let sharp = spectrum.expand_spectral(&states[0].psi_hat)?;
        for (e, st) in states[1..].iter().enumerate() {
            let d: Vec<f64> = states[0].psi.iter().zip(&st.psi).map(|(a, b)| a - b).collect();
            l2_sq[e][k] = crate::field::l2_norm_sq(grid, &d);
            let diff = expansion_diff(&sharp, &spectrum.expand_spectral(&st.psi_hat)?);
            hs[e][k] = spectrum.fractional_norm(&diff, s)?;
        }
        Ok(())
    };
    let outs = run_group_observed(&refs, &inits, &rc, &mut observe)?;
    let series: Vec<TimeSeries> = outs.into_iter().map(|o| o.series).collect();
    assert_lockstep(&series)?;

    let mut slope = Vec::with_capacity(nt);
    let mut prefactor = Vec::with_capacity(nt);
    let mut monotone = Vec::with_capacity(nt);
    let mut exponent_ok = Vec::with_capacity(nt);
    let mut envelope_ok = Vec::with_capacity(nt);
    for k in 0..nt {
        let col: Vec<f64> = (0..ne).map(|e| l2_sq[e][k]).collect();
        let fit_from = ne.saturating_sub(3);
        let fitted = &col[fit_from..];
        let sl = if fitted.iter().all(|v| *v > 0.0) {
            let x: Vec<f64> = epsilons[fit_from..].iter().map(|e| e.ln()).collect();
            let y: Vec<f64> = fitted.iter().map(|v| v.ln()).collect();
            linear_fit(&x, &y).map(|(m, _)| m)
        } else {
            None
        };
        let all_zero = col.iter().all(|v| *v == 0.0);
        exponent_ok.push(match sl {
            Some(m) => m >= RATE_FLOOR,
            None => all_zero,
        });
        slope.push(sl);
        let c = col[0] / epsilons[0].powf(RATE_FLOOR);
        prefactor.push(c);
        envelope_ok.push(
            col.iter()
                .zip(epsilons)
                .all(|(v, e)| *v <= c * e.powf(RATE_FLOOR) * (1.0 + 1e-9)),
        );
        monotone.push(col.windows(2).all(|w| w[1] <= w[0] * (1.0 + MONOTONE_TOL)));
    }
    let max_energy = series[1..]
        .iter()
        .flat_map(|s| s.rows.iter().map(|r| r.grad * r.grad))
        .fold(0.0, f64::max);
    let passed = monotone.iter().chain(&exponent_ok).chain(&envelope_ok).all(|b| *b);
    Ok(Sweep {
        report: ConvergenceReport {
            epsilons: epsilons.to_vec(),
            sample_times: sample_times.to_vec(),
            s,
            l2_sq,
            hs,
            slope,
            prefactor,
            monotone,
            exponent_ok,
            envelope_ok,
            rate_floor: RATE_FLOOR,
            max_energy,
            passed,
        },
        series,
    })
}

/// Long-time states of a model standing in for its attractor.
#[derive(Debug, Clone)]
pub struct AttractorSample {
    pub model: Model,
    pub burn_in: f64,
    pub stride: f64,
    /// Sample time of each entry.
    pub times: Vec<f64>,
    pub samples: Vec<FieldExpansion>,
    pub l2_sq: Vec<f64>,
    /// `‖√D∇ψ‖²` of each sample.
    pub energy: Vec<f64>,
}

impl AttractorSample {
    /// Largest pairwise `ℋ^s` distance.
    pub fn diameter(&self, spectrum: &Spectrum, s: f64) -> Result<f64> {
        let mut d: f64 = 0.0;
        for (i, a) in self.samples.iter().enumerate() {
            for b in &self.samples[i + 1..] {
                d = d.max(spectrum.fractional_norm(&expansion_diff(a, b), s)?);
            }
        }
        Ok(d)
    }
}

/// Runs each `ψ₀` past `burn_in` and keeps `count` states `stride` apart.
/// With a ledger, `burn_in` must exceed `max{T₀, T₁} + 1` and every sample
/// is checked against both absorbing-ball constraints.
pub fn attractor_sample(
    study: &Study,
    model: Model,
    psi0: &[Vec<f64>],
    burn_in: f64,
    stride: f64,
    count: usize,
    rc: &RunConfig,
    ledger: Option<&BoundLedger>,
) -> Result<AttractorSample> {
    if psi0.is_empty() || count == 0 {
        return Err(Error::InvalidParameter {
            name: "count",
            reason: "need at least one trajectory and one sample".into(),
        });
    }
    if !(stride > 0.0) || !(burn_in >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "stride",
            reason: "stride must be positive and burn_in non-negative".into(),
        });
    }
    let problem = study.problem(model)?;
    if let Some(led) = ledger {
        for p in psi0 {
            let l2 = crate::field::l2_norm(&study.grid, p);
            let lr = crate::field::lr_norm(&study.grid, p, led.r);
            let need = led.t0(lr).max(led.t1(l2)) + 1.0;
            if burn_in < need {
                return Err(Error::InvalidParameter {
                    name: "burn_in",
                    reason: format!("{burn_in} is shorter than max(T0, T1) + 1 = {need}"),
                });
            }
        }
    }
    let refs = vec![&problem; psi0.len()];
    let mut warm = rc.clone();
    warm.t_end = burn_in;
    warm.snapshot_times.clear();
    let settled: Vec<Vec<f64>> = if burn_in > 0.0 {
        run_group(&refs, psi0, &warm)?
            .into_iter()
            .map(|o| o.final_state.psi)
            .collect()
    } else {
        psi0.to_vec()
    };
    let mut tail = rc.clone();
    tail.cadence = stride;
    tail.t_end = stride * (count - 1) as f64;
    tail.snapshot_times.clear();
    let mut sample = AttractorSample {
        model,
        burn_in,
        stride,
        times: Vec::new(),
        samples: Vec::new(),
        l2_sq: Vec::new(),
        energy: Vec::new(),
    };
    let mut k = 0usize;
    let mut observe = |t: f64, states: &[&SimState]| -> Result<()> {
        if k >= count {
            return Ok(());
        }
        k += 1;
        for st in states {
            let time = burn_in + t;
            let l2 = crate::field::l2_norm_sq(&study.grid, &st.psi);
            let energy = problem.diffusion.energy_sq(&st.psi_hat);
            if let Some(led) = ledger {
                if l2 > led.l2_ball_sq * (1.0 + TOL_REL) {
                    return Err(Error::OutsideAbsorbingBall {
                        t: time,
                        what: "L2 norm squared",
                        value: l2,
                        radius: led.l2_ball_sq,
                    });
                }
                if energy.ln() > led.ln_m5 + (1.0 + TOL_REL).ln() {
                    return Err(Error::OutsideAbsorbingBall {
                        t: time,
                        what: "dissipation energy",
                        value: energy,
                        radius: led.m5.unwrap_or(f64::INFINITY),
                    });
                }
            }
            sample.times.push(time);
            sample.samples.push(study.spectrum.expand_spectral(&st.psi_hat)?);
            sample.l2_sq.push(l2);
            sample.energy.push(energy);
        }
        Ok(())
    };
    run_group_observed(&refs, &settled, &tail, &mut observe)?;
    Ok(sample)
}

/// `sup_{f∈A} inf_{g∈B} ‖f - g‖_{ℋ^s}` over the finite samples.
pub fn hausdorff_semidistance(a: &AttractorSample, b: &AttractorSample, spectrum: &Spectrum, s: f64) -> Result<f64> {
    if a.samples.is_empty() || b.samples.is_empty() {
        return Err(Error::InsufficientData("empty attractor sample".into()));
    }
    let mut sup: f64 = 0.0;
    for f in &a.samples {
        let mut inf = f64::INFINITY;
        for g in &b.samples {
            inf = inf.min(spectrum.fractional_norm(&expansion_diff(f, g), s)?);
        }
        sup = sup.max(inf);
    }
    Ok(sup)
}

/// Time average of the volume-averaged vertical flux `u_z ψ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NusseltEstimate {
    pub window: (f64, f64),
    pub value: f64,
    /// Average over the first half of the window.
    pub half_value: f64,
    /// `|value - half_value| ≤ 5%·|value|` (plus round-off).
    pub converged: bool,
    /// Running average from the window start at every row inside it.
    pub running: Vec<(f64, f64)>,
}

/// Trapezoid average of the `nu_inst` column over `window`.
pub fn nusselt(series: &TimeSeries, window: (f64, f64)) -> Result<NusseltEstimate> {
    let (a, b) = window;
    let rows = &series.rows;
    let (Some(first), Some(last)) = (rows.first(), rows.last()) else {
        return Err(Error::InsufficientData("empty series".into()));
    };
    if !(b > a) {
        return Err(Error::InsufficientData(format!("empty window [{a}, {b}]")));
    }
    let slack = 1e-9 * last.t.max(1.0);
    if a < first.t - slack || b > last.t + slack {
        return Err(Error::InsufficientData(format!(
            "window [{a}, {b}] exceeds the simulated horizon [{}, {}]",
            first.t, last.t
        )));
    }
    let b = b.min(last.t);
    let t: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let v: Vec<f64> = rows.iter().map(|r| r.nu_inst).collect();
    let value = trapezoid_window(&t, &v, a, b) / (b - a);
    let mid = 0.5 * (a + b);
    let half_value = trapezoid_window(&t, &v, a, mid) / (mid - a);
    let running = t
        .iter()
        .filter(|&&ti| ti > a && ti <= b)
        .map(|&ti| (ti, trapezoid_window(&t, &v, a, ti) / (ti - a)))
        .collect();
    Ok(NusseltEstimate {
        window: (a, b),
        value,
        half_value,
        converged: (value - half_value).abs() <= CAUCHY_TOL * value.abs() + 1e-9,
        running,
    })
}

/// Sign turning the flux of `ψ` into transport down the imposed gradient.
pub fn transport_sign(cfg: &LayerConfig) -> f64 {
    -(cfg.c_top - cfg.c_bottom).signum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NusseltEntry {
    pub model: Model,
    pub members: Vec<NusseltEstimate>,
    /// Ensemble maximum, standing in for the supremum over initial data.
    pub nu: f64,
    /// Ensemble maximum of the members' values times [`transport_sign`].
    pub nu_transport: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NusseltReport {
    pub window: (f64, f64),
    /// Random members plus the conduction state.
    pub ensemble_size: usize,
    /// Sharp model first, then each `ε` in the given order.
    pub entries: Vec<NusseltEntry>,
    pub nu_sharp: f64,
    /// Largest `Nu_ε` over the two smallest `ε`.
    pub nu_small_eps: f64,
    pub tolerance: f64,
    /// `Nu_0 + tolerance - nu_small_eps`.
    pub margin: f64,
    pub transport_sharp: f64,
    pub transport_small_eps: f64,
    pub transport_tolerance: f64,
    /// Same margin for the transport-signed values.
    pub transport_margin: f64,
    pub converged: bool,
    pub passed: bool,
}

/// Ensemble Nusselt numbers of the sharp model and every `ε`.
pub fn nusselt_semicontinuity(
    study: &Study,
    epsilons: &[f64],
    spec: &EnsembleSpec,
    rc: &RunConfig,
    window: (f64, f64),
) -> Result<NusseltReport> {
    check_epsilons(epsilons)?;
    let mut rc = rc.clone();
    rc.t_end = rc.t_end.max(window.1);
    let random = study.ensemble(spec)?;
    let sign = transport_sign(&study.cfg);
    let models: Vec<Model> = std::iter::once(Model::Sharp)
        .chain(epsilons.iter().map(|&e| Model::Diffuse(e)))
        .collect();
    let mut entries = Vec::with_capacity(models.len());
    for model in models {
        let problem = study.problem(model)?;
        let mut inits = random.clone();
        inits.push(problem.conduction_state());
        let refs = vec![&problem; inits.len()];
        let outs = run_group(&refs, &inits, &rc)?;
        let members = outs
            .iter()
            .map(|o| nusselt(&o.series, window))
            .collect::<Result<Vec<_>>>()?;
        let nu = members.iter().map(|m| m.value).fold(f64::NEG_INFINITY, f64::max);
        let nu_transport = members.iter().map(|m| sign * m.value).fold(f64::NEG_INFINITY, f64::max);
        entries.push(NusseltEntry {
            model,
            converged: members.iter().all(|m| m.converged),
            nu,
            nu_transport,
            members,
        });
    }
    let nu_sharp = entries[0].nu;
    let small = &entries[entries.len().saturating_sub(2).max(1)..];
    let nu_small_eps = small.iter().map(|e| e.nu).fold(f64::NEG_INFINITY, f64::max);
    let tolerance = NUSSELT_REL_TOL * nu_sharp.abs() + NUSSELT_ABS_TOL;
    let converged = entries.iter().all(|e| e.converged);
    let margin = nu_sharp + tolerance - nu_small_eps;
    let transport_sharp = entries[0].nu_transport;
    let transport_small_eps = small.iter().map(|e| e.nu_transport).fold(f64::NEG_INFINITY, f64::max);
    let transport_tolerance = NUSSELT_REL_TOL * transport_sharp.abs() + NUSSELT_ABS_TOL;
    let transport_margin = transport_sharp + transport_tolerance - transport_small_eps;
    Ok(NusseltReport {
        window,
        ensemble_size: random.len() + 1,
        entries,
        nu_sharp,
        nu_small_eps,
        tolerance,
        margin,
        transport_sharp,
        transport_small_eps,
        transport_tolerance,
        transport_margin,
        converged,
        passed: converged && margin >= 0.0 && transport_margin >= 0.0,
    })
}

/// `R(t) = ‖∇ψ̄(t)‖² / [(1/t + t²) ‖ψ̄₀‖²_{ℋ^s}]` for two trajectories.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothingReport {
    pub s: f64,
    pub times: Vec<f64>,
    pub ratio: Vec<f64>,
    /// Fitted exponential rate of `R`, clamped at zero.
    pub c_hat: f64,
    /// `sup_t R(t) e^{-Ĉt}`.
    pub weighted_sup: f64,
    /// `‖ψ̄₀‖_{ℋ^s}`.
    pub separation0: f64,
    pub passed: bool,
}

fn pair_setup(problem: &Problem, a: &[f64], b: &[f64]) -> Result<Arc<Spectrum>> {
    let spectrum = problem
        .norm_spectrum
        .clone()
        .ok_or_else(|| Error::Config("problem has no norm spectrum; call ensure_norm_spectrum".into()))?;
    let pa = problem.project(a)?;
    let pb = problem.project(b)?;
    if pa == pb {
        return Err(Error::Degenerate("identical initial data".into()));
    }
    Ok(spectrum)
}

fn fit_rate(times: &[f64], values: &[f64], horizon: f64) -> f64 {
    let from = if horizon >= 1.0 { 1.0 } else { 0.5 * horizon };
    let (x, y): (Vec<f64>, Vec<f64>) = times
        .iter()
        .zip(values)
        .filter(|(t, v)| **t >= from && **v > 0.0)
        .map(|(t, v)| (*t, v.ln()))
        .unzip();
    linear_fit(&x, &y).map_or(0.0, |(m, _)| m.max(0.0))
}

/// Paired run from `ψ_a`, `ψ_b` over `rc.t_end`.
pub fn smoothing_probe(problem: &Problem, psi_a: &[f64], psi_b: &[f64], rc: &RunConfig) -> Result<SmoothingReport> {
    let spectrum = pair_setup(problem, psi_a, psi_b)?;
    let s = rc.s;
    let mut sep0 = 0.0;
    let mut times = Vec::new();
    let mut ratio = Vec::new();
    let mut observe = |t: f64, st: &[&SimState]| -> Result<()> {
        let d: Vec<Complex64> = st[0].psi_hat.iter().zip(&st[1].psi_hat).map(|(a, b)| a - b).collect();
        if t == 0.0 {
            let exp = spectrum.expand_spectral(&d)?;
            sep0 = spectrum.fractional_norm_sq(&exp, s)?;
            if sep0 == 0.0 {
                return Err(Error::Degenerate("identical initial data".into()));
            }
            return Ok(());
        }
        let g = problem.diffusion.gradient_sq(&d);
        times.push(t);
        ratio.push(g / ((1.0 / t + t * t) * sep0));
        Ok(())
    };
    run_group_observed(&[problem, problem], &[psi_a.to_vec(), psi_b.to_vec()], rc, &mut observe)?;
    let c_hat = fit_rate(&times, &ratio, rc.t_end);
    let weighted_sup = times
        .iter()
        .zip(&ratio)
        .map(|(t, r)| r * (-c_hat * t).exp())
        .fold(0.0, f64::max);
    let passed = !times.is_empty() && ratio.iter().all(|r| r.is_finite()) && weighted_sup.is_finite();
    Ok(SmoothingReport {
        s,
        times,
        ratio,
        c_hat,
        weighted_sup,
        separation0: sep0.sqrt(),
        passed,
    })
}

/// Growth of `‖ψ̄(t)‖²_{ℋ^s}` against `∫₀ᵗ (‖ψ₁‖^q + ‖ψ₂‖^q + 1)`, `q = 4/(2s-1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DependenceReport {
    pub s: f64,
    pub times: Vec<f64>,
    /// `ln(‖ψ̄(t)‖²_{ℋ^s} / ‖ψ̄₀‖²_{ℋ^s})`.
    pub log_ratio: Vec<f64>,
    pub integral: Vec<f64>,
    /// Smallest rate with `log_ratio ≤ Ĉ · integral` at every time.
    pub c_hat: f64,
    /// `log_ratio - Ĉ · integral`; never positive.
    pub residual_p95: f64,
    pub max_residual: f64,
    pub passed: bool,
}

pub fn continuous_dependence_probe(
    problem: &Problem,
    psi_a: &[f64],
    psi_b: &[f64],
    rc: &RunConfig,
) -> Result<DependenceReport> {
    let s = rc.s;
    if !(s > 0.5) {
        return Err(Error::InvalidParameter {
            name: "s",
            reason: format!("the growth exponent 4/(2s-1) needs s > 1/2, got {s}"),
        });
    }
    let spectrum = pair_setup(problem, psi_a, psi_b)?;
    let q = 4.0 / (2.0 * s - 1.0);
    let mut sep0 = 0.0;
    let mut last: Option<(f64, f64)> = None;
    let mut acc = 0.0;
    let mut times = Vec::new();
    let mut log_ratio = Vec::new();
    let mut integral = Vec::new();
    let mut observe = |t: f64, st: &[&SimState]| -> Result<()> {
        let e1 = spectrum.expand_spectral(&st[0].psi_hat)?;
        let e2 = spectrum.expand_spectral(&st[1].psi_hat)?;
        let g = spectrum.fractional_norm(&e1, s)?.powf(q) + spectrum.fractional_norm(&e2, s)?.powf(q) + 1.0;
        let sep = spectrum.fractional_norm_sq(&expansion_diff(&e1, &e2), s)?;
        if let Some((tl, gl)) = last {
            acc += 0.5 * (t - tl) * (g + gl);
        }
        last = Some((t, g));
        if t == 0.0 {
            if sep == 0.0 {
                return Err(Error::Degenerate("identical initial data".into()));
            }
            sep0 = sep;
            return Ok(());
        }
        times.push(t);
        log_ratio.push((sep / sep0).ln());
        integral.push(acc);
        Ok(())
    };
    run_group_observed(&[problem, problem], &[psi_a.to_vec(), psi_b.to_vec()], rc, &mut observe)?;
    let c_hat = log_ratio
        .iter()
        .zip(&integral)
        .map(|(l, i)| (l / i).max(0.0))
        .fold(0.0, f64::max);
    let mut residual: Vec<f64> = log_ratio.iter().zip(&integral).map(|(l, i)| l - c_hat * i).collect();
    let max_residual = residual.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    residual.sort_by(f64::total_cmp);
    let residual_p95 = if residual.is_empty() {
        f64::NAN
    } else {
        let idx = ((0.95 * residual.len() as f64).ceil() as usize).clamp(1, residual.len()) - 1;
        residual[idx]
    };
    let scale = log_ratio.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let passed = c_hat.is_finite() && !times.is_empty() && max_residual <= 1e-12 * scale;
    Ok(DependenceReport {
        s,
        times,
        log_ratio,
        integral,
        c_hat,
        residual_p95,
        max_residual,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolve::{Row, Scheme, SeriesMeta};

    fn series(nu: impl Fn(f64) -> f64) -> TimeSeries {
        TimeSeries {
            rows: (0..=100)
                .map(|i| {
                    let t = i as f64 * 0.1;
                    Row {
                        t,
                        l2: 0.0,
                        lr: 0.0,
                        grad: 0.0,
                        hs: 0.0,
                        nu_inst: nu(t),
                        nu_avg: 0.0,
                        divmax: 0.0,
                        dt: 0.1,
                    }
                })
                .collect(),
            meta: SeriesMeta {
                model: "sharp".into(),
                epsilon: 0.0,
                delta: 0.1,
                r: 4.0,
                s: 0.75,
                scheme: Scheme::Imex1,
                d_min: 1.0,
                depth: 1.0,
            },
        }
    }

    #[test]
    fn nusselt_constant_and_linear() {
        let est = nusselt(&series(|_| 0.25), (2.0, 8.0)).unwrap();
        assert!((est.value - 0.25).abs() < 1e-14 && est.converged);
        let est = nusselt(&series(|t| t), (0.0, 10.0)).unwrap();
        assert!((est.value - 5.0).abs() < 1e-12);
        assert!((est.half_value - 2.5).abs() < 1e-12);
        assert!(!est.converged);
        assert!(nusselt(&series(|_| 0.0), (3.0, 3.0)).is_err());
        assert!(nusselt(&series(|_| 0.0), (3.0, 30.0)).is_err());
    }

    #[test]
    fn linear_fit_exact() {
        let x = [0.0, 1.0, 2.0];
        let y = [1.0, 3.0, 5.0];
        assert_eq!(linear_fit(&x, &y), Some((2.0, 1.0)));
        assert!(linear_fit(&[1.0], &[1.0]).is_none());
    }

    #[test]
    fn epsilon_list_checks() {
        assert!(check_epsilons(&[0.04, 0.02, 0.01]).is_ok());
        assert!(check_epsilons(&[0.02, 0.04]).is_err());
        assert!(check_epsilons(&[0.02, 0.0]).is_err());
        assert!(check_epsilons(&[]).is_err());
    }
}
