//! Smoothing gauge `S_±(t; κ)`: per-axis `cosh Λ − (±) i sinh Λ H_a` with
//! `Λ_{κ,a} = κ arctan(x_a/⟨t⟩)`, its inverse, the half-derivative energy
//! budget and the half-derivative commutator statistic.
//!
//! Axes are 0-based. Factors for distinct axes commute exactly, so they are
//! applied in axis order and undone in reverse.

use std::fmt::Write as _;

use num_complex::Complex64;
use thiserror::Error;

use crate::spectral::{self, Field, SpectralError};
use crate::vectorfield::japanese;

/// Increment (relative to the right-hand side) at which the inverse stops.
pub const INVERSE_TOLERANCE: f64 = 1e-12;
pub const INVERSE_MAX_ITERATIONS: usize = 1000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SmoothingError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("kappa must lie in (0, 1], got {0}")]
    BadKappa(f64),
    #[error("time must be finite and >= 0, got {0}")]
    BadTime(f64),
    #[error("inverse did not converge: increment {increment:e} after {iterations} iterations")]
    NoConvergence { iterations: usize, increment: f64 },
    #[error("zero field")]
    ZeroField,
    #[error("budget samples must have increasing times")]
    NonMonotoneTime,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    /// `S_+` for positive masses, `S_-` for negative ones.
    pub fn for_mass(m: f64) -> Self {
        if m > 0.0 {
            Sign::Plus
        } else {
            Sign::Minus
        }
    }

    fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothingParams {
    kappa: f64,
    sign: Sign,
    t: f64,
}

impl SmoothingParams {
    pub fn new(kappa: f64, sign: Sign, t: f64) -> Result<Self, SmoothingError> {
        if !(kappa > 0.0 && kappa <= 1.0) {
            return Err(SmoothingError::BadKappa(kappa));
        }
        if !(t.is_finite() && t >= 0.0) {
            return Err(SmoothingError::BadTime(t));
        }
        Ok(Self { kappa, sign, t })
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn sign(&self) -> Sign {
        self.sign
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn at_time(&self, t: f64) -> Result<Self, SmoothingError> {
        Self::new(self.kappa, self.sign, t)
    }
}

/// `κ arctan(x_a/⟨t⟩)` at each coordinate value.
pub fn lambda_phase(params: &SmoothingParams, xs: &[f64]) -> Vec<f64> {
    let jt = japanese(params.t);
    xs.iter().map(|x| params.kappa * (x / jt).atan()).collect()
}

/// `⟨x_a/⟨t⟩⟩^{-1}` at each coordinate value.
pub fn w_weight(t: f64, xs: &[f64]) -> Vec<f64> {
    let jt = japanese(t);
    xs.iter().map(|x| 1.0 / japanese(x / jt)).collect()
}

fn lambda_at(params: &SmoothingParams, x: f64) -> f64 {
    params.kappa * (x / japanese(params.t)).atan()
}

/// One factor `S_{±,a}`.
pub fn apply_s_axis(f: &Field, params: &SmoothingParams, axis: usize) -> Result<Field, SmoothingError> {
    let h = spectral::hilbert(f, axis)?;
    let s = params.sign.value();
    let mut out = f.weighted(|x| lambda_at(params, x[axis]).cosh());
    let shifted = h.weighted(|x| lambda_at(params, x[axis]).sinh());
    out.axpy(Complex64::new(0.0, -s), &shifted);
    Ok(out)
}

/// Adjoint of one factor.
fn apply_s_axis_adjoint(f: &Field, params: &SmoothingParams, axis: usize) -> Result<Field, SmoothingError> {
    let s = params.sign.value();
    let sinh_f = f.weighted(|x| lambda_at(params, x[axis]).sinh());
    let h = spectral::hilbert(&sinh_f, axis)?;
    let mut out = f.weighted(|x| lambda_at(params, x[axis]).cosh());
    // (∓ i sinh Λ H)^* = H^* (± i) sinh Λ = ∓ i H sinh Λ, since H^* = −H.
    out.axpy(Complex64::new(0.0, -s), &h);
    Ok(out)
}

/// `S_±(t; κ) f`.
pub fn apply_s(f: &Field, params: &SmoothingParams) -> Result<Field, SmoothingError> {
    let mut g = f.clone();
    for axis in 0..f.grid().dim() {
        g = apply_s_axis(&g, params, axis)?;
    }
    Ok(g)
}

/// `S_±(t; κ)^* f`.
pub fn apply_s_adjoint(f: &Field, params: &SmoothingParams) -> Result<Field, SmoothingError> {
    let mut g = f.clone();
    for axis in (0..f.grid().dim()).rev() {
        g = apply_s_axis_adjoint(&g, params, axis)?;
    }
    Ok(g)
}

/// Fixed-point solve of `(I + c·i·T) g = rhs` where `T` is `H tanh Λ`
/// (`adjoint`) or `tanh Λ H`; `c = ∓1` for `S_±`.
fn neumann(
    rhs: Field,
    params: &SmoothingParams,
    axis: usize,
    adjoint: bool,
) -> Result<(Field, usize), SmoothingError> {
    let s = params.sign.value();
    let scale = rhs.norm_l2();
    if scale == 0.0 {
        return Ok((rhs, 0));
    }
    let tanh = |g: &Field| g.weighted(|x| lambda_at(params, x[axis]).tanh());
    let mut g = rhs.clone();
    let mut increment = f64::INFINITY;
    for it in 1..=INVERSE_MAX_ITERATIONS {
        // g <- rhs ± i T g
        let tg = if adjoint { spectral::hilbert(&tanh(&g), axis)? } else { tanh(&spectral::hilbert(&g, axis)?) };
        let mut next = rhs.clone();
        next.axpy(Complex64::new(0.0, s), &tg);
        increment = next.sub(&g).norm_l2() / scale;
        g = next;
        if increment <= INVERSE_TOLERANCE {
            return Ok((g, it));
        }
    }
    Err(SmoothingError::NoConvergence { iterations: INVERSE_MAX_ITERATIONS, increment })
}

/// Inverse of one factor, with the iteration count.
pub fn apply_s_inverse_axis(
    f: &Field,
    params: &SmoothingParams,
    axis: usize,
) -> Result<(Field, usize), SmoothingError> {
    f.grid().check_axis(axis)?;
    neumann(f.weighted(|x| 1.0 / lambda_at(params, x[axis]).cosh()), params, axis, false)
}

/// `S_±(t; κ)^{-1} f` by per-axis fixed-point iteration.
pub fn apply_s_inverse(f: &Field, params: &SmoothingParams) -> Result<Field, SmoothingError> {
    let mut g = f.clone();
    for axis in (0..f.grid().dim()).rev() {
        g = apply_s_inverse_axis(&g, params, axis)?.0;
    }
    Ok(g)
}

/// `(S_±(t; κ)^*)^{-1} f`.
pub fn apply_s_adjoint_inverse(f: &Field, params: &SmoothingParams) -> Result<Field, SmoothingError> {
    let mut g = f.clone();
    for axis in 0..f.grid().dim() {
        let (h, _) = neumann(g, params, axis, true)?;
        g = h.weighted(|x| 1.0 / lambda_at(params, x[axis]).cosh());
    }
    Ok(g)
}

/// Largest `‖S f‖/‖f‖` and `‖S^{-1} f‖/‖f‖` over a family of fields.
pub fn sampled_norms<'a>(
    fields: impl IntoIterator<Item = &'a Field>,
    params: &SmoothingParams,
) -> Result<(f64, f64), SmoothingError> {
    let mut forward: f64 = 0.0;
    let mut inverse: f64 = 0.0;
    for f in fields {
        let n = f.norm_l2();
        if n == 0.0 {
            return Err(SmoothingError::ZeroField);
        }
        forward = forward.max(apply_s(f, params)?.norm_l2() / n);
        inverse = inverse.max(apply_s_inverse(f, params)?.norm_l2() / n);
    }
    Ok((forward, inverse))
}

fn power(
    start: &Field,
    iterations: usize,
    op: impl Fn(&Field) -> Result<Field, SmoothingError>,
    adj: impl Fn(&Field) -> Result<Field, SmoothingError>,
) -> Result<f64, SmoothingError> {
    let n = start.norm_l2();
    if n == 0.0 {
        return Err(SmoothingError::ZeroField);
    }
    let mut v = start.scale_real(1.0 / n);
    let mut estimate = 0.0;
    for _ in 0..iterations.max(1) {
        let av = op(&v)?;
        estimate = av.norm_l2();
        let w = adj(&av)?;
        let wn = w.norm_l2();
        if wn == 0.0 {
            break;
        }
        v = w.scale_real(1.0 / wn);
    }
    Ok(estimate)
}

/// Power iteration on `S^* S` from `start`: a lower estimate of `‖S‖`.
pub fn power_norm(start: &Field, params: &SmoothingParams, iterations: usize) -> Result<f64, SmoothingError> {
    power(start, iterations, |f| apply_s(f, params), |f| apply_s_adjoint(f, params))
}

/// Same for `‖S^{-1}‖`.
pub fn power_norm_inverse(
    start: &Field,
    params: &SmoothingParams,
    iterations: usize,
) -> Result<f64, SmoothingError> {
    power(start, iterations, |f| apply_s_inverse(f, params), |f| apply_s_adjoint_inverse(f, params))
}

/// `‖[|∂_a|^{1/2}, g] f‖ / (‖g‖_∞^{1/2} ‖∂_a g‖_∞^{1/2} ‖f‖)`; zero for
/// constant `g`.
pub fn commutator_ratio(f: &Field, g: &Field, axis: usize) -> Result<f64, SmoothingError> {
    let fnorm = f.norm_l2();
    if fnorm == 0.0 {
        return Err(SmoothingError::ZeroField);
    }
    let dg = spectral::derivative(g, axis)?.sup_norm();
    let gsup = g.sup_norm();
    if dg <= 1e-13 * gsup.max(f64::MIN_POSITIVE) {
        return Ok(0.0);
    }
    let lhs = spectral::half_derivative(&g.mul(f), axis)?.sub(&g.mul(&spectral::half_derivative(f, axis)?));
    Ok(lhs.norm_l2() / (gsup.sqrt() * dg.sqrt() * fnorm))
}

/// Pointwise ingredients of the energy budget at one time.
#[derive(Debug, Clone, Copy, PartialEq)]
struct BudgetIntegrands {
    energy: f64,
    smoothing: f64,
    kappa: f64,
    pairing: f64,
}

fn integrands(
    f: &Field,
    forcing: &Field,
    mass: f64,
    params: &SmoothingParams,
) -> Result<BudgetIntegrands, SmoothingError> {
    let jt = japanese(params.t);
    let sf = apply_s(f, params)?;
    let energy = sf.norm_l2().powi(2);
    let mut half = 0.0;
    for axis in 0..f.grid().dim() {
        let g = apply_s(&spectral::half_derivative(f, axis)?, params)?;
        let w = g.weighted(|x| 1.0 / japanese(x[axis] / jt));
        half += w.norm_l2().powi(2);
    }
    let pairing = 2.0 * sf.inner(&apply_s(forcing, params)?).norm();
    Ok(BudgetIntegrands {
        energy,
        smoothing: params.kappa / (mass.abs() * jt) * half,
        kappa: params.kappa / jt * energy,
        pairing,
    })
}

/// One row of the smoothing energy budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BudgetRecord {
    pub t: f64,
    pub lhs_energy: f64,
    pub lhs_smoothing_integral: f64,
    pub rhs_energy0: f64,
    /// `∫ κ/⟨τ⟩ ‖S f‖²`, without the constant.
    pub rhs_kappa_term: f64,
    pub rhs_pairing_term: f64,
    /// Smallest real constant (possibly negative) making every row so far
    /// hold; 0 until the kappa term becomes positive.
    pub fitted_c: f64,
}

impl BudgetRecord {
    pub const CSV_HEADER: &'static str =
        "t,lhs_energy,lhs_smoothing_integral,rhs_energy0,rhs_kappa_term,rhs_pairing_term,fitted_C";

    pub fn csv_row(&self) -> String {
        let mut s = String::new();
        let _ = write!(
            s,
            "{},{:e},{:e},{:e},{:e},{:e},{:e}",
            self.t,
            self.lhs_energy,
            self.lhs_smoothing_integral,
            self.rhs_energy0,
            self.rhs_kappa_term,
            self.rhs_pairing_term,
            self.fitted_c
        );
        s
    }
}

/// Streaming trapezoidal accumulation of the budget; feed samples in time
/// order with the forcing `L_m f` (zero for free solutions).
#[derive(Debug, Clone)]
pub struct BudgetAccumulator {
    mass: f64,
    params: SmoothingParams,
    prev: Option<(f64, BudgetIntegrands)>,
    energy0: f64,
    smoothing: f64,
    kappa: f64,
    pairing: f64,
    fitted_c: Option<f64>,
}

impl BudgetAccumulator {
    /// `S` is `S_+` or `S_-` according to the sign of `mass`.
    pub fn new(mass: f64, kappa: f64) -> Result<Self, SmoothingError> {
        if mass == 0.0 {
            return Err(SpectralError::ZeroMass.into());
        }
        Ok(Self {
            mass,
            params: SmoothingParams::new(kappa, Sign::for_mass(mass), 0.0)?,
            prev: None,
            energy0: 0.0,
            smoothing: 0.0,
            kappa: 0.0,
            pairing: 0.0,
            fitted_c: None,
        })
    }

    pub fn push(&mut self, t: f64, f: &Field, forcing: &Field) -> Result<BudgetRecord, SmoothingError> {
        let params = self.params.at_time(t)?;
        let cur = integrands(f, forcing, self.mass, &params)?;
        match self.prev {
            None => self.energy0 = cur.energy,
            Some((t0, p)) => {
                if t <= t0 {
                    return Err(SmoothingError::NonMonotoneTime);
                }
                let h = 0.5 * (t - t0);
                self.smoothing += h * (p.smoothing + cur.smoothing);
                self.kappa += h * (p.kappa + cur.kappa);
                self.pairing += h * (p.pairing + cur.pairing);
            }
        }
        self.prev = Some((t, cur));
        let excess = cur.energy + self.smoothing - self.energy0 - self.pairing;
        if self.kappa > 0.0 {
            let c = excess / self.kappa;
            self.fitted_c = Some(self.fitted_c.map_or(c, |prev| prev.max(c)));
        }
        Ok(BudgetRecord {
            t,
            lhs_energy: cur.energy,
            lhs_smoothing_integral: self.smoothing,
            rhs_energy0: self.energy0,
            rhs_kappa_term: self.kappa,
            rhs_pairing_term: self.pairing,
            fitted_c: self.fitted_c.unwrap_or(0.0),
        })
    }
}

/// Budget over a whole trajectory of `(t, f, L_m f)` samples.
pub fn smoothing_budget<'a>(
    samples: impl IntoIterator<Item = (f64, &'a Field, &'a Field)>,
    mass: f64,
    kappa: f64,
) -> Result<Vec<BudgetRecord>, SmoothingError> {
    let mut acc = BudgetAccumulator::new(mass, kappa)?;
    samples.into_iter().map(|(t, f, lf)| acc.push(t, f, lf)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::{random_field, Grid};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(kappa: f64, t: f64) -> SmoothingParams {
        SmoothingParams::new(kappa, Sign::Plus, t).unwrap()
    }

    #[test]
    fn phase_and_weight_values() {
        let p = params(1.0, 0.0);
        let l = lambda_phase(&p, &[0.0, 1.0, -1e9]);
        assert_eq!(l[0], 0.0);
        assert!((l[1] - std::f64::consts::FRAC_PI_4).abs() < 1e-15);
        assert!(l[2] > -std::f64::consts::FRAC_PI_2);
        let w = w_weight(0.0, &[0.0, 1.0, 2.0]);
        assert_eq!(w[0], 1.0);
        assert!((w[1] - 0.5_f64.sqrt()).abs() < 1e-15);
        assert!(w[2] < w[1]);
        assert!(SmoothingParams::new(0.0, Sign::Plus, 0.0).is_err());
        assert!(SmoothingParams::new(1.5, Sign::Plus, 0.0).is_err());
    }

    #[test]
    fn small_kappa_is_identity() {
        let grid = Grid::new(2, 32, 20.0).unwrap();
        let f = random_field(&grid, &mut ChaCha8Rng::seed_from_u64(1), Some(6));
        let p = params(1e-12, 0.0);
        assert!(apply_s(&f, &p).unwrap().relative_distance(&f) <= 1e-10);
        assert!(apply_s_inverse(&f, &p).unwrap().relative_distance(&f) <= 1e-10);
    }

    #[test]
    fn adjoint_matches_inner_product() {
        let grid = Grid::new(2, 32, 20.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = random_field(&grid, &mut rng, None);
        let g = random_field(&grid, &mut rng, None);
        for sign in [Sign::Plus, Sign::Minus] {
            let p = SmoothingParams::new(0.7, sign, 1.0).unwrap();
            let a = apply_s(&f, &p).unwrap().inner(&g);
            let b = f.inner(&apply_s_adjoint(&g, &p).unwrap());
            assert!((a - b).norm() <= 1e-12 * a.norm().max(1.0));
        }
    }

    #[test]
    fn worst_case_inverse_converges_within_budget() {
        let grid = Grid::new(1, 256, 400.0).unwrap();
        let f = random_field(&grid, &mut ChaCha8Rng::seed_from_u64(3), None);
        let p = params(1.0, 0.0);
        let (g, iterations) = apply_s_inverse_axis(&f, &p, 0).unwrap();
        assert!(iterations <= 700, "{iterations}");
        assert!(apply_s_axis(&g, &p, 0).unwrap().relative_distance(&f) <= 1e-10);
    }

    #[test]
    fn constant_multiplier_commutes() {
        let grid = Grid::new(1, 64, 20.0).unwrap();
        let f = random_field(&grid, &mut ChaCha8Rng::seed_from_u64(4), Some(8));
        let g = Field::constant(&grid, Complex64::new(2.0, -1.0));
        assert_eq!(commutator_ratio(&f, &g, 0).unwrap(), 0.0);
        assert!(commutator_ratio(&Field::zeros(&grid), &g, 0).is_err());
    }

    #[test]
    fn zero_trajectory_budget_is_zero() {
        let grid = Grid::new(1, 32, 10.0).unwrap();
        let z = Field::zeros(&grid);
        let rows = smoothing_budget([(0.0, &z, &z), (0.5, &z, &z)], 1.0, 0.5).unwrap();
        for r in rows {
            assert_eq!(
                [r.lhs_energy, r.lhs_smoothing_integral, r.rhs_energy0, r.rhs_kappa_term, r.rhs_pairing_term, r.fitted_c],
                [0.0; 6]
            );
        }
        assert!(smoothing_budget([(0.5, &z, &z), (0.5, &z, &z)], 1.0, 0.5).is_err());
    }
}
