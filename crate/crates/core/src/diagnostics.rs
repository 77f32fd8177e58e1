//! Post-processing of trajectories: power-law fits, scattering profiles,
//! the null/non-null nonlinearity decay contrast and lifespan scans.
//!
//! Every fit drops samples before `t = 4` (pre-asymptotic) unless a window
//! says otherwise, and drops boundary-contaminated samples. A fit built from
//! a trajectory that was ever contaminated carries the flag.

use std::fmt::Write as _;
use std::ops::ControlFlow;

use rayon::prelude::*;
use thiserror::Error;

use crate::nullforms::eval_nonlinearity;
use crate::solver::{self, Outcome, SolverConfig, SolverError, Trajectory};
use crate::spectral::{Field, SpectralError, Spectrum};
use crate::vectorfield::{gamma_sum, pullback, sigma_norm};

pub use crate::vectorfield::boundary_mass;

/// Earliest time admitted into default fit windows.
pub const ASYMPTOTIC_START: f64 = 4.0;
pub const MIN_FIT_SAMPLES: usize = 8;

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("fit of {quantity} needs >= {MIN_FIT_SAMPLES} samples in [{t_min}, {t_max}], found {found}")]
    InsufficientSamples { quantity: String, t_min: f64, t_max: f64, found: usize },
    #[error("fit of {quantity} spans [{first}, {last}], less than one decade")]
    NarrowWindow { quantity: String, first: f64, last: f64 },
    #[error("fit of {quantity} met a non-positive value {value} at t = {t}")]
    NonPositive { quantity: String, t: f64, value: f64 },
    #[error("trajectory was interrupted ({0})")]
    Interrupted(&'static str),
    #[error("paired runs differ: {0}")]
    Mismatch(String),
    #[error("need a decreasing list of positive amplitudes")]
    BadScan,
}

/// Ordinary least squares of `log value` against `log t`.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayFit {
    pub quantity: String,
    pub t_min: f64,
    pub t_max: f64,
    pub slope: f64,
    pub slope_se: f64,
    pub intercept: f64,
    pub samples: usize,
    pub contaminated: bool,
}

impl DecayFit {
    pub const CSV_HEADER: &'static str = "quantity,t_min,t_max,slope,slope_se,samples,contaminated";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{:.6},{:.6},{},{}",
            self.quantity, self.t_min, self.t_max, self.slope, self.slope_se, self.samples, self.contaminated
        )
    }

    /// Fitted value `exp(intercept) t^slope`.
    pub fn predict(&self, t: f64) -> f64 {
        (self.intercept + self.slope * t.ln()).exp()
    }
}

/// Fit `value ~ t^slope` over samples with `t_min <= t <= t_max`.
pub fn decay_fit(quantity: &str, series: &[(f64, f64)], window: (f64, f64)) -> Result<DecayFit, DiagnosticsError> {
    let (t_min, t_max) = window;
    let pts: Vec<(f64, f64)> = series.iter().copied().filter(|&(t, _)| t >= t_min && t <= t_max).collect();
    if pts.len() < MIN_FIT_SAMPLES {
        return Err(DiagnosticsError::InsufficientSamples {
            quantity: quantity.into(),
            t_min,
            t_max,
            found: pts.len(),
        });
    }
    let (first, last) = (pts[0].0, pts[pts.len() - 1].0);
    if !(first > 0.0 && last >= 10.0 * first * (1.0 - 1e-12)) {
        return Err(DiagnosticsError::NarrowWindow { quantity: quantity.into(), first, last });
    }
    if let Some(&(t, value)) = pts.iter().find(|&&(_, v)| !(v > 0.0 && v.is_finite())) {
        return Err(DiagnosticsError::NonPositive { quantity: quantity.into(), t, value });
    }
    let n = pts.len() as f64;
    let xs: Vec<f64> = pts.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = pts.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - intercept - slope * x).powi(2)).sum();
    Ok(DecayFit {
        quantity: quantity.into(),
        t_min: first,
        t_max: last,
        slope,
        slope_se: (ssr / (n - 2.0) / sxx).sqrt(),
        intercept,
        samples: pts.len(),
        contaminated: false,
    })
}

/// Samples admitted into fits: not boundary-contaminated.
fn clean_times(traj: &Trajectory) -> Vec<bool> {
    traj.samples.iter().map(|s| !s.gamma.boundary_flag).collect()
}

fn contaminated(traj: &Trajectory) -> bool {
    traj.samples.iter().any(|s| s.gamma.boundary_flag) || matches!(traj.outcome, Outcome::BoundaryContaminated { .. })
}

fn fit_clean(
    quantity: &str,
    series: &[(f64, f64)],
    clean: &[bool],
    window: (f64, f64),
    flagged: bool,
) -> Result<DecayFit, DiagnosticsError> {
    let kept: Vec<(f64, f64)> = series.iter().zip(clean).filter(|(_, &c)| c).map(|(p, _)| *p).collect();
    let mut fit = decay_fit(quantity, &kept, window)?;
    fit.contaminated = flagged;
    Ok(fit)
}

/// `Σ_j Σ_{|α| ≤ order} ‖Γ_{m_j}^α F_j(u(t))‖` at every stored sample.
pub fn nonlinearity_series(
    traj: &Trajectory,
    config: &SolverConfig,
    order: usize,
) -> Result<Vec<(f64, f64)>, DiagnosticsError> {
    let c = config.coefficients.to_numeric();
    let m = config.masses.as_f64();
    traj.samples
        .par_iter()
        .map(|s| {
            let f = eval_nonlinearity(&c, &s.state, config.dealias);
            let mut total = 0.0;
            for j in 0..3 {
                total += gamma_sum(&f[j], m[j], s.state.t, order)?;
            }
            Ok((s.state.t, total))
        })
        .collect()
}

/// Decay fits of the nonlinearity's Γ-norms for a null and a non-null run.
#[derive(Debug, Clone)]
pub struct Contrast {
    pub null: DecayFit,
    pub nonnull: DecayFit,
    pub null_series: Vec<(f64, f64)>,
    pub nonnull_series: Vec<(f64, f64)>,
}

impl Contrast {
    /// Null slope minus non-null slope.
    pub fn gap(&self) -> f64 {
        self.null.slope - self.nonnull.slope
    }
}

/// Fits `Σ_{|α| ≤ s−1} ‖Γ^α F‖` for both runs over `window`.
pub fn nonlinearity_decay_contrast(
    null: (&SolverConfig, &Trajectory),
    nonnull: (&SolverConfig, &Trajectory),
    s: usize,
    window: (f64, f64),
) -> Result<Contrast, DiagnosticsError> {
    let (ca, ta) = null;
    let (cb, tb) = nonnull;
    if ca.grid != cb.grid {
        return Err(DiagnosticsError::Mismatch("grids".into()));
    }
    if ca.masses != cb.masses {
        return Err(DiagnosticsError::Mismatch("masses".into()));
    }
    if ca.epsilon != cb.epsilon {
        return Err(DiagnosticsError::Mismatch("amplitudes".into()));
    }
    let order = s.saturating_sub(1);
    let sa = nonlinearity_series(ta, ca, order)?;
    let sb = nonlinearity_series(tb, cb, order)?;
    let null = fit_clean("null_nonlinearity", &sa, &clean_times(ta), window, contaminated(ta))?;
    let nonnull = fit_clean("nonnull_nonlinearity", &sb, &clean_times(tb), window, contaminated(tb))?;
    Ok(Contrast { null, nonnull, null_series: sa, nonnull_series: sb })
}

/// Asymptotic profile estimate and how the pullbacks approach it.
#[derive(Debug, Clone)]
pub struct ScatterReport {
    /// Pullbacks `U_{m_j}(−T) u_j(T)` at the final time.
    pub profile: [Field; 3],
    /// `Σ_j ‖U(−t)u_j(t) − φ_j⁺‖_{Σ^{s−1}}`; the last entry is 0.
    pub series: Vec<(f64, f64)>,
    /// Fitted exponent of `series` (last entry excluded); `None` when the
    /// series vanishes identically or the window is too thin.
    pub fit: Option<DecayFit>,
    /// Dyadic drift `Σ_j ‖v_j(t) − v_j(t/2)‖_{Σ^{s−1}}` for stored `t` whose
    /// half is also stored. Independent of the final time.
    pub drift: Vec<(f64, f64)>,
    pub drift_fit: Option<DecayFit>,
    /// `∫_t^∞ ‖U(−τ)F(τ)‖_{Σ^{s−1}} dτ`: data up to the final time plus the
    /// extrapolated power-law tail; infinite when the decay is too slow.
    pub duhamel_tail: Vec<(f64, f64)>,
    pub contaminated: bool,
}

impl ScatterReport {
    /// `value(t_end) / value(t_end / 10)` on `series`, both read at the
    /// nearest stored sample.
    pub fn final_decade_ratio(&self, t_end: f64) -> Option<f64> {
        decade_ratio(&self.series, t_end)
    }

    pub fn drift_decade_ratio(&self, t_end: f64) -> Option<f64> {
        decade_ratio(&self.drift, t_end)
    }

    pub fn csv(&self) -> String {
        let mut out = String::from("t,convergence,drift,duhamel_tail\n");
        for (i, &(t, v)) in self.series.iter().enumerate() {
            let d = self.drift.iter().find(|p| (p.0 - t).abs() < 1e-9).map_or(String::new(), |p| format!("{:e}", p.1));
            let tail = self.duhamel_tail.get(i).map_or(String::new(), |p| format!("{:e}", p.1));
            let _ = writeln!(out, "{t},{v:e},{d},{tail}");
        }
        out
    }
}

fn nearest(series: &[(f64, f64)], t: f64) -> Option<(f64, f64)> {
    series.iter().copied().min_by(|a, b| (a.0 - t).abs().total_cmp(&(b.0 - t).abs()))
}

fn decade_ratio(series: &[(f64, f64)], t_end: f64) -> Option<f64> {
    let end = nearest(series, t_end)?;
    let start = nearest(series, t_end / 10.0)?;
    (start.1 > 0.0).then(|| end.1 / start.1)
}

fn trapezoid(series: &[(f64, f64)]) -> f64 {
    series.windows(2).map(|w| 0.5 * (w[1].0 - w[0].0) * (w[0].1 + w[1].1)).sum()
}

/// Scattering diagnostics for a completed run in Σ^{s−1}.
pub fn scattering_profile(
    traj: &Trajectory,
    config: &SolverConfig,
    s: usize,
    window: (f64, f64),
) -> Result<ScatterReport, DiagnosticsError> {
    match traj.outcome {
        Outcome::Completed | Outcome::BoundaryContaminated { .. } => {}
        ref other => return Err(DiagnosticsError::Interrupted(other.label())),
    }
    let order = s.saturating_sub(1);
    let m = config.masses.as_f64();
    let times = traj.times();
    let final_sample = traj.samples.last().expect("trajectory holds the initial state");
    let last = &final_sample.duhamel;
    let profile = solver::profile_of(&final_sample.state, &config.masses)?.map(Spectrum::into_field);
    // Profiles differ only through their Duhamel parts; subtracting those
    // keeps the roundoff of the data out of the weighted norms.
    let distance = |a: &[Spectrum; 3], b: &[Spectrum; 3]| -> f64 {
        (0..3)
            .map(|j| {
                let mut d = a[j].clone();
                d.values_mut().iter_mut().zip(b[j].values()).for_each(|(x, y)| *x -= y);
                sigma_norm(&d.into_field(), order)
            })
            .sum()
    };
    let pullbacks: Vec<&[Spectrum; 3]> = traj.samples.iter().map(|smp| &smp.duhamel).collect();
    let series: Vec<(f64, f64)> =
        pullbacks.par_iter().zip(times.par_iter()).map(|(p, &t)| (t, distance(p, last))).collect();

    let mut drift = Vec::new();
    for (i, &t) in times.iter().enumerate() {
        if t <= 0.0 {
            continue;
        }
        if let Some(k) = times.iter().position(|&u| (u - 0.5 * t).abs() <= 1e-9 * t) {
            drift.push((t, distance(pullbacks[i], pullbacks[k])));
        }
    }

    let clean = clean_times(traj);
    let flagged = contaminated(traj);
    let n = series.len();
    let fit_series = &series[..n.saturating_sub(1)];
    let fit = fit_clean("scatter_convergence", fit_series, &clean[..fit_series.len()], window, flagged).ok();
    let drift_clean: Vec<bool> =
        drift.iter().map(|&(t, _)| times.iter().position(|&u| u == t).map_or(false, |i| clean[i])).collect();
    let drift_fit = fit_clean("scatter_drift", &drift, &drift_clean, window, flagged).ok();

    // ‖U(−τ)F(τ)‖_{Σ^{s−1}} = Σ_{|α|≤s−1} over Γ applied to F, in RSS form per component.
    let c = config.coefficients.to_numeric();
    let forcing: Vec<(f64, f64)> = traj
        .samples
        .par_iter()
        .map(|smp| -> Result<(f64, f64), SpectralError> {
            let f = eval_nonlinearity(&c, &smp.state, config.dealias);
            let mut total = 0.0;
            for j in 0..3 {
                total += sigma_norm(&pullback(&f[j], m[j], smp.state.t)?, order);
            }
            Ok((smp.state.t, total))
        })
        .collect::<Result<_, _>>()?;
    let t_end = times[n - 1];
    let tail_end = if forcing.iter().all(|p| p.1 == 0.0) {
        0.0
    } else {
        match fit_clean("duhamel_forcing", &forcing, &clean, window, flagged) {
            Ok(f) if f.slope < -1.0 => f.predict(t_end) * t_end / (-f.slope - 1.0),
            _ => f64::INFINITY,
        }
    };
    let duhamel_tail = (0..n).map(|i| (times[i], trapezoid(&forcing[i..]) + tail_end)).collect();

    Ok(ScatterReport { profile, series, fit, drift, drift_fit, duhamel_tail, contaminated: flagged })
}

/// Why a lifespan run ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LifespanCause {
    /// `‖u‖_{Γ,6}` doubled.
    Doubling,
    BlowUp,
    Boundary,
    Cap,
}

impl LifespanCause {
    pub fn label(&self) -> &'static str {
        match self {
            LifespanCause::Doubling => "gamma-doubling",
            LifespanCause::BlowUp => "blow-up-suspected",
            LifespanCause::Boundary => "boundary-contaminated",
            LifespanCause::Cap => "cap",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LifespanRow {
    pub epsilon: f64,
    /// Effective lifespan: first stored time of doubling, else the time reached.
    pub t_eff: f64,
    pub cause: LifespanCause,
}

#[derive(Debug, Clone)]
pub struct LifespanTable {
    pub rows: Vec<LifespanRow>,
    /// Slope of `log T_eff` against `1/ε` over the doubling rows (an `ω` estimate).
    pub omega: Option<f64>,
}

impl LifespanTable {
    pub fn csv(&self) -> String {
        let mut out = String::from("epsilon,t_eff,cause\n");
        for r in &self.rows {
            let _ = writeln!(out, "{:e},{},{}", r.epsilon, r.t_eff, r.cause.label());
        }
        out
    }
}

/// Norm order watched by the lifespan proxy.
pub const LIFESPAN_NORM_ORDER: usize = 6;

/// One lifespan run: evolve until `cap` or until `‖u‖_{Γ,6}` exceeds twice
/// its initial value.
pub fn lifespan_run(base: &SolverConfig, epsilon: f64, cap: f64) -> Result<LifespanRow, DiagnosticsError> {
    let mut cfg = base.clone();
    cfg.epsilon = epsilon;
    cfg.t_final = cap;
    cfg.norm_order = cfg.norm_order.max(LIFESPAN_NORM_ORDER);
    let mut initial = None;
    let mut doubled = None;
    let traj = solver::evolve_observed(&cfg, |obs| {
        let g = obs.sample.gamma.aggregate_up_to(LIFESPAN_NORM_ORDER);
        let g0 = *initial.get_or_insert(g);
        if g > 2.0 * g0 {
            doubled = Some(obs.sample.state.t);
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    })?;
    let reached = traj.last().t;
    let (t_eff, cause) = match (doubled, &traj.outcome) {
        (Some(t), _) => (t, LifespanCause::Doubling),
        (None, Outcome::BlowUpSuspected { t }) => (*t, LifespanCause::BlowUp),
        (None, Outcome::BoundaryContaminated { t }) if *t < cap - 0.5 * cfg.dt => (*t, LifespanCause::Boundary),
        _ => (reached, LifespanCause::Cap),
    };
    Ok(LifespanRow { epsilon, t_eff, cause })
}

/// Lifespan proxy over a decreasing list of amplitudes, in parallel.
pub fn lifespan_scan(base: &SolverConfig, epsilons: &[f64], cap: f64) -> Result<LifespanTable, DiagnosticsError> {
    if epsilons.is_empty() || epsilons.iter().any(|&e| !(e > 0.0)) || epsilons.windows(2).any(|w| w[1] >= w[0]) {
        return Err(DiagnosticsError::BadScan);
    }
    let rows: Vec<LifespanRow> =
        epsilons.par_iter().map(|&e| lifespan_run(base, e, cap)).collect::<Result<_, _>>()?;
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.cause == LifespanCause::Doubling)
        .map(|r| (1.0 / r.epsilon, r.t_eff.ln()))
        .collect();
    let omega = (pts.len() >= 2).then(|| {
        let n = pts.len() as f64;
        let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
        let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
        sxy / sxx
    });
    Ok(LifespanTable { rows, omega })
}

/// Key/value summary written once per run.
#[derive(Debug, Clone, Default)]
pub struct Summary {
    rows: Vec<(String, String)>,
}

impl Summary {
    pub fn push(&mut self, key: impl Into<String>, value: impl ToString) {
        self.rows.push((key.into(), value.to_string()));
    }

    pub fn push_fit(&mut self, fit: &DecayFit) {
        self.push(format!("{}_slope", fit.quantity), fit.slope);
        self.push(format!("{}_slope_se", fit.quantity), fit.slope_se);
        self.push(format!("{}_window", fit.quantity), format!("{}-{}", fit.t_min, fit.t_max));
        self.push(format!("{}_contaminated", fit.quantity), fit.contaminated);
    }

    pub fn rows(&self) -> &[(String, String)] {
        &self.rows
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("key,value\n");
        for (k, v) in &self.rows {
            let _ = writeln!(out, "{k},{v}");
        }
        out
    }
}

/// Sup norm of every stored state, summed over components.
pub fn sup_series(traj: &Trajectory) -> Vec<(f64, f64)> {
    traj.samples.iter().map(|s| (s.state.t, s.state.fields().iter().map(Field::sup_norm).sum())).collect()
}

/// `(t, Σ_j ‖u_j‖_{L²})` at every stored state.
pub fn mass_series(traj: &Trajectory) -> Vec<(f64, f64)> {
    traj.samples.iter().map(|s| (s.state.t, s.state.fields().iter().map(Field::norm_l2).sum())).collect()
}
