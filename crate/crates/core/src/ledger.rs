//! Explicit a priori constants and trajectory checks against them.

use serde::{Deserialize, Serialize};

use crate::domain::{delta_1, delta_2, LayerConfig};
use crate::error::{Error, Result};
use crate::evolve::TimeSeries;
use crate::probes::ProbeReport;

/// Default relative slack on every inequality check.
pub const TOL_REL: f64 = 1e-2;

/// Minimum number of rows per unit time for windowed integrals.
pub const MIN_ROWS_PER_UNIT_TIME: f64 = 20.0;

/// Where a constant came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Analytic,
    Empirical,
    User,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tagged {
    pub value: f64,
    pub provenance: Provenance,
}

impl Tagged {
    pub fn new(value: f64, provenance: Provenance) -> Self {
        Self { value, provenance }
    }
}

/// Embedding constants feeding `M₄`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingConstants {
    /// `‖ψ‖_𝒲 ≤ C_u ‖Lψ‖`.
    pub c_u: Tagged,
    /// Gagliardo–Nirenberg constant for `‖ψ‖_{L^r}`.
    pub c_1: Tagged,
    /// Gagliardo–Nirenberg constant for `‖∇ψ‖_{L^r}`.
    pub c_2: Tagged,
    /// Young-inequality constant absorbing the advection term.
    pub c_s: Tagged,
}

impl EmbeddingConstants {
    /// Constants measured by the inequality probes, `C_s` from `r`.
    pub fn from_probes(report: &ProbeReport) -> Self {
        Self {
            c_u: Tagged::new(report.c_u, Provenance::Empirical),
            c_1: Tagged::new(report.c_1, Provenance::Empirical),
            c_2: Tagged::new(report.c_2, Provenance::Empirical),
            c_s: Tagged::new(young_constant(report.r), Provenance::Analytic),
        }
    }
}

/// Young's inequality constant: with `p = 2r/(r+3)` and `q = 2r/(r-3)`,
/// `ab ≤ a^p/4 + C_s b^q` holds for `C_s = (p/4)^{-q/p} / q`.
pub fn young_constant(r: f64) -> f64 {
    let p = 2.0 * r / (r + 3.0);
    let q = 2.0 * r / (r - 3.0);
    (p / 4.0).powf(-q / p) / q
}

/// All explicit constants of the a priori estimates, with their inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundLedger {
    pub length: f64,
    pub depth: f64,
    pub c_delta: f64,
    pub k_min: f64,
    pub k_max: f64,
    pub d_min: f64,
    pub d_max: f64,
    pub r: f64,
    pub s: f64,
    pub delta: f64,
    pub delta1: f64,
    pub delta2: f64,
    pub cp: Tagged,
    pub m0: f64,
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
    pub m4: f64,
    /// `M₅` when representable (it overflows for small `δ`).
    pub m5: Option<f64>,
    pub ln_m5: f64,
    /// `M₁H²/min D + 1`.
    pub l2_ball_sq: f64,
    /// `r M₀ H² / (2(r-1) min D) + 1`.
    pub lr_ball_pow: f64,
    /// `M₁H²/min D + 1 + M₁`.
    pub dissipation_bound: f64,
    pub embedding: EmbeddingConstants,
}

/// `r = 6/(3 - 2s)`.
pub fn r_from_s(s: f64) -> f64 {
    6.0 / (3.0 - 2.0 * s)
}

/// Evaluates every constant for strip width `delta` and exponent `r`.
pub fn compute_constants(
    cfg: &LayerConfig,
    delta: f64,
    r: f64,
    cp: Tagged,
    embedding: EmbeddingConstants,
) -> Result<BoundLedger> {
    if !(r > 3.0) {
        return Err(Error::InvalidParameter {
            name: "r",
            reason: format!("M4 needs r > 3 (its exponent 2r/(r-3) diverges), got {r}"),
        });
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidDelta {
            delta,
            reason: "must be positive".into(),
        });
    }
    if !(cp.value > 0.0 && cp.value.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "C_p",
            reason: format!("must be positive, got {}", cp.value),
        });
    }
    let (l, h) = (cfg.length, cfg.depth);
    let cd = cfg.c_delta();
    let (kmin, kmax, dmin, dmax) = (cfg.k_min(), cfg.k_max(), cfg.d_min(), cfg.d_max());
    let s = (3.0 - 6.0 / r) / 2.0;

    let m0 = (8.0 * r * cd * l.powf(2.0 / r) * delta.powf(-1.0 / r) * dmax).powf(r)
        / (r * dmin.powf(r - 1.0));
    let m1 = 8.0 * cd * cd * l * l / delta * dmax * dmax / dmin;
    let m2 = 32.0 * cd * cd * l * l * delta.powi(-3) * dmax * dmax;
    let m3 = 32.0 * kmax.powi(4) * cd * cd / (kmin * kmin * dmin);
    let e = &embedding;
    let m4 = 2.0
        * e.c_s.value
        * ((1.0 + cp.value) * e.c_2.value * e.c_u.value.powf(3.0 / r) * kmax).powf(2.0 * r / (r - 3.0))
        / dmin;
    let lr_radius = r * m0 * h * h / (2.0 * (r - 1.0) * dmin);
    let l2_radius = m1 * h * h / dmin;
    let ln_m5 = (m2 + l2_radius + 1.0 + m1).ln() + m3 + m4 * (lr_radius + 1.0).powf(2.0 / (r - 3.0));
    let m5 = ln_m5.exp();
    let (delta1, delta2) = if cd > 0.0 {
        (delta_1(cfg, r, cp.value), delta_2(cfg))
    } else {
        (f64::INFINITY, f64::INFINITY)
    };
    Ok(BoundLedger {
        length: l,
        depth: h,
        c_delta: cd,
        k_min: kmin,
        k_max: kmax,
        d_min: dmin,
        d_max: dmax,
        r,
        s,
        delta,
        delta1,
        delta2,
        cp,
        m0,
        m1,
        m2,
        m3,
        m4,
        m5: m5.is_finite().then_some(m5),
        ln_m5,
        l2_ball_sq: l2_radius + 1.0,
        lr_ball_pow: lr_radius + 1.0,
        dissipation_bound: l2_radius + 1.0 + m1,
        embedding,
    })
}

impl BoundLedger {
    /// `T₀ = r H² / (2(r-1) min D) · ln(‖ψ₀‖^r_{L^r} + 1)`.
    pub fn t0(&self, lr0: f64) -> f64 {
        self.r * self.depth * self.depth / (2.0 * (self.r - 1.0) * self.d_min) * (lr0.powf(self.r) + 1.0).ln()
    }

    /// `T₁ = H² / min D · ln(‖ψ₀‖² + 1)`.
    pub fn t1(&self, l20: f64) -> f64 {
        self.depth * self.depth / self.d_min * (l20 * l20 + 1.0).ln()
    }

    /// Right side of the `L²` decay estimate.
    pub fn l2_bound(&self, l20: f64, t: f64) -> f64 {
        let a = self.d_min / (self.depth * self.depth);
        let e = (-a * t).exp();
        l20 * l20 * e + self.m1 * self.depth * self.depth / self.d_min * (1.0 - e)
    }

    /// Right side of the `L^r` decay estimate (for `‖ψ‖^r_{L^r}`).
    pub fn lr_bound(&self, lr0: f64, t: f64) -> f64 {
        let r = self.r;
        let a = 2.0 * (r - 1.0) * self.d_min / (r * self.depth * self.depth);
        let e = (-a * t).exp();
        lr0.powf(r) * e + (self.lr_ball_pow - 1.0) * (1.0 - e)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Key-value listing.
    pub fn table(&self) -> Vec<(String, String)> {
        let mut rows = vec![
            ("r".to_string(), format!("{}", self.r)),
            ("s".into(), format!("{}", self.s)),
            ("delta".into(), format!("{:e}", self.delta)),
            ("delta1".into(), format!("{:e}", self.delta1)),
            ("delta2".into(), format!("{:e}", self.delta2)),
            ("C_p".into(), format!("{} ({:?})", self.cp.value, self.cp.provenance)),
            ("M0".into(), format!("{:e}", self.m0)),
            ("M1".into(), format!("{:e}", self.m1)),
            ("M2".into(), format!("{:e}", self.m2)),
            ("M3".into(), format!("{:e}", self.m3)),
            ("M4".into(), format!("{:e}", self.m4)),
            (
                "M5".into(),
                self.m5.map_or_else(|| "overflow".to_string(), |v| format!("{v:e}")),
            ),
            ("ln M5".into(), format!("{:e}", self.ln_m5)),
            ("L2 ball (squared)".into(), format!("{:e}", self.l2_ball_sq)),
            ("Lr ball (r-th power)".into(), format!("{:e}", self.lr_ball_pow)),
            ("dissipation bound".into(), format!("{:e}", self.dissipation_bound)),
        ];
        let e = &self.embedding;
        for (name, c) in [("C_u", e.c_u), ("C_1", e.c_1), ("C_2", e.c_2), ("C_s", e.c_s)] {
            rows.push((name.into(), format!("{} ({:?})", c.value, c.provenance)));
        }
        rows
    }
}

/// Row at which a check first failed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub row: usize,
    pub t: f64,
    pub measured: f64,
    pub bound: f64,
}

/// Verdict of one inequality check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub check: String,
    /// Verdict with the relative slack applied.
    pub passed: bool,
    /// Verdict without slack.
    pub passed_raw: bool,
    pub min_margin: f64,
    pub min_relative_margin: f64,
    pub first_violation: Option<Violation>,
    pub entry_time: Option<f64>,
    pub deadline: Option<f64>,
    /// The series ended before the check's window opened.
    pub too_short: bool,
    pub rows_checked: usize,
}

impl CheckReport {
    fn new(check: &str) -> Self {
        Self {
            check: check.into(),
            passed: true,
            passed_raw: true,
            min_margin: f64::INFINITY,
            min_relative_margin: f64::INFINITY,
            first_violation: None,
            entry_time: None,
            deadline: None,
            too_short: false,
            rows_checked: 0,
        }
    }

    fn record(&mut self, row: usize, t: f64, measured: f64, bound: f64, tol_rel: f64) {
        let margin = bound - measured;
        self.rows_checked += 1;
        self.min_margin = self.min_margin.min(margin);
        if bound > 0.0 {
            self.min_relative_margin = self.min_relative_margin.min(margin / bound);
        }
        if margin < 0.0 {
            self.passed_raw = false;
        }
        if margin < -tol_rel * bound.abs() || !measured.is_finite() {
            self.passed = false;
            if self.first_violation.is_none() {
                self.first_violation = Some(Violation {
                    row,
                    t,
                    measured,
                    bound,
                });
            }
        }
    }
}

/// Which decay estimate to check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DecayKind {
    L2,
    Lr,
}

fn check_compatible(series: &TimeSeries, ledger: &BoundLedger, kind: DecayKind) -> Result<()> {
    let m = &series.meta;
    if m.delta > ledger.delta * (1.0 + 1e-12) {
        return Err(Error::LedgerMismatch {
            what: "delta (the run must use delta no larger than the ledger's)",
            series: m.delta,
            ledger: ledger.delta,
        });
    }
    if kind == DecayKind::Lr && m.r != ledger.r {
        return Err(Error::LedgerMismatch {
            what: "r",
            series: m.r,
            ledger: ledger.r,
        });
    }
    if m.d_min != ledger.d_min {
        return Err(Error::LedgerMismatch {
            what: "min D",
            series: m.d_min,
            ledger: ledger.d_min,
        });
    }
    if m.depth != ledger.depth {
        return Err(Error::LedgerMismatch {
            what: "H",
            series: m.depth,
            ledger: ledger.depth,
        });
    }
    if series.rows.is_empty() {
        return Err(Error::InsufficientData("empty series".into()));
    }
    Ok(())
}

/// Checks the `L²` or `L^r` decay estimate at every row.
pub fn check_decay(series: &TimeSeries, ledger: &BoundLedger, kind: DecayKind, tol_rel: f64) -> Result<CheckReport> {
    check_compatible(series, ledger, kind)?;
    let first = &series.rows[0];
    let mut rep = CheckReport::new(match kind {
        DecayKind::L2 => "decay_l2",
        DecayKind::Lr => "decay_lr",
    });
    for (i, row) in series.rows.iter().enumerate() {
        let (measured, bound) = match kind {
            DecayKind::L2 => (row.l2 * row.l2, ledger.l2_bound(first.l2, row.t)),
            DecayKind::Lr => (row.lr.powf(ledger.r), ledger.lr_bound(first.lr, row.t)),
        };
        rep.record(i, row.t, measured, bound, tol_rel);
    }
    Ok(rep)
}

fn entry_check(
    name: &str,
    series: &TimeSeries,
    values: &[f64],
    radius: f64,
    deadline: f64,
    tol_rel: f64,
) -> CheckReport {
    let mut rep = CheckReport::new(name);
    rep.deadline = Some(deadline);
    let t_end = series.rows.last().map_or(0.0, |r| r.t);
    // entry: first row after which the series stays inside the (slackened) ball
    let inside = |v: f64| v <= radius * (1.0 + tol_rel);
    let mut entry = None;
    for (i, &v) in values.iter().enumerate().rev() {
        if inside(v) {
            entry = Some(i);
        } else {
            break;
        }
    }
    rep.entry_time = entry.map(|i| series.rows[i].t);
    if t_end < deadline {
        rep.too_short = true;
    }
    for (i, (row, &v)) in series.rows.iter().zip(values).enumerate() {
        if row.t >= deadline {
            rep.record(i, row.t, v, radius, tol_rel);
        }
    }
    if let Some(t) = rep.entry_time {
        if t > deadline && !rep.too_short {
            rep.passed = false;
        }
    } else if !rep.too_short {
        rep.passed = false;
    }
    rep
}

/// Absorbing-ball checks: `L²` by `T₁`, `L^r` by `T₀`, gradient by
/// `max{T₀, T₁} + 1`.
pub fn check_absorbing(series: &TimeSeries, ledger: &BoundLedger, tol_rel: f64) -> Result<Vec<CheckReport>> {
    check_compatible(series, ledger, DecayKind::Lr)?;
    let first = &series.rows[0];
    let t0 = ledger.t0(first.lr);
    let t1 = ledger.t1(first.l2);
    let l2: Vec<f64> = series.rows.iter().map(|r| r.l2 * r.l2).collect();
    let lr: Vec<f64> = series.rows.iter().map(|r| r.lr.powf(ledger.r)).collect();
    let mut out = vec![
        entry_check("absorbing_l2", series, &l2, ledger.l2_ball_sq, t1, tol_rel),
        entry_check("absorbing_lr", series, &lr, ledger.lr_ball_pow, t0, tol_rel),
    ];
    // compare logarithms because M5 may not be representable
    let grad: Vec<f64> = series.rows.iter().map(|r| 2.0 * r.grad.max(f64::MIN_POSITIVE).ln()).collect();
    let mut g = CheckReport::new("absorbing_grad");
    let deadline = t0.max(t1) + 1.0;
    g.deadline = Some(deadline);
    let t_end = series.rows.last().map_or(0.0, |r| r.t);
    g.too_short = t_end < deadline;
    for (i, (row, &v)) in series.rows.iter().zip(&grad).enumerate() {
        if row.t >= deadline {
            let slack = (1.0 + tol_rel).ln();
            g.rows_checked += 1;
            let margin = ledger.ln_m5 - v;
            g.min_margin = g.min_margin.min(margin);
            if margin < 0.0 {
                g.passed_raw = false;
            }
            if margin < -slack {
                g.passed = false;
                g.first_violation.get_or_insert(Violation {
                    row: i,
                    t: row.t,
                    measured: v,
                    bound: ledger.ln_m5,
                });
            }
        }
    }
    out.push(g);
    Ok(out)
}

/// Windowed dissipation integrals `∫_t^{t+1} ‖√D∇ψ‖²` for `t ≥ T₁`.
pub fn check_integrated_dissipation(
    series: &TimeSeries,
    ledger: &BoundLedger,
    tol_rel: f64,
) -> Result<CheckReport> {
    check_compatible(series, ledger, DecayKind::L2)?;
    let rows = &series.rows;
    let t_end = rows.last().map_or(0.0, |r| r.t);
    let mut rep = CheckReport::new("integrated_dissipation");
    if rows.len() >= 2 {
        let density = (rows.len() - 1) as f64 / (t_end - rows[0].t);
        if density < MIN_ROWS_PER_UNIT_TIME * (1.0 - 1e-9) {
            return Err(Error::InsufficientData(format!(
                "{density:.2} rows per unit time, need at least {MIN_ROWS_PER_UNIT_TIME}"
            )));
        }
    }
    let t1 = ledger.t1(rows[0].l2);
    rep.deadline = Some(t1);
    let times: Vec<f64> = rows.iter().map(|r| r.t).collect();
    let g2: Vec<f64> = rows.iter().map(|r| r.grad * r.grad).collect();
    let mut any = false;
    for (i, &t) in times.iter().enumerate() {
        if t < t1 || t + 1.0 > t_end * (1.0 + 1e-12) {
            continue;
        }
        any = true;
        let value = trapezoid_window(&times, &g2, t, (t + 1.0).min(t_end));
        rep.record(i, t, value, ledger.dissipation_bound, tol_rel);
    }
    rep.too_short = !any;
    Ok(rep)
}

/// Trapezoid integral of the piecewise-linear interpolant over `[a, b]`.
pub fn trapezoid_window(t: &[f64], v: &[f64], a: f64, b: f64) -> f64 {
    let interp = |x: f64| -> f64 {
        match t.iter().position(|&ti| ti >= x) {
            Some(0) => v[0],
            Some(j) => {
                let w = (x - t[j - 1]) / (t[j] - t[j - 1]);
                v[j - 1] * (1.0 - w) + v[j] * w
            }
            None => v[v.len() - 1],
        }
    };
    let mut pts = vec![(a, interp(a))];
    for (ti, vi) in t.iter().zip(v) {
        if *ti > a && *ti < b {
            pts.push((*ti, *vi));
        }
    }
    pts.push((b, interp(b)));
    pts.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum()
}
