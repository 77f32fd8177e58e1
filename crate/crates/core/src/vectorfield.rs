//! Galilean vector fields `J_m(t)`, the `Gamma` norms built from them, and
//! the boundary-mass monitor that guards every `x`-weighted quantity.
//!
//! `J_{m,a}(t) = U_m(t) x_a U_m(-t)`, so every norm of the form
//! `||d^p J^q u||` equals `||d^p (x^q f)||` with `f = U_m(-t) u` the pulled
//! back profile. Norms are evaluated that way: one transform per weight
//! monomial, derivatives by Parseval.
//!
//! Axes are 0-based throughout.

use std::fmt::Write as _;

use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::problem::MassTriple;
use crate::spectral::{self, Field, Grid, SpectralError, StateTriple};

/// Pullbacks with more than this fraction of their mass in the outer shell
/// are flagged as boundary-contaminated.
pub const BOUNDARY_THRESHOLD: f64 = 1e-8;

/// Inner edge of the monitored shell, as a fraction of `L/2`.
pub const SHELL_START: f64 = 0.9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum VectorFieldError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("field is identically zero")]
    ZeroField,
}

/// `<t> = (1 + t^2)^{1/2}`.
pub fn japanese(t: f64) -> f64 {
    (1.0 + t * t).sqrt()
}

/// The profile `U_m(-t) u`.
pub fn pullback(u: &Field, m: f64, t: f64) -> Result<Field, SpectralError> {
    spectral::free_propagate(u, m, -t)
}

/// Inverse of [`pullback`]: `U_m(t) f`.
pub fn push_forward(f: &Field, m: f64, t: f64) -> Result<Field, SpectralError> {
    spectral::free_propagate(f, m, t)
}

/// `J_{m,a}(t) u` computed as `U_m(t) (x_a U_m(-t) u)`.
pub fn apply_j(u: &Field, m: f64, t: f64, axis: usize) -> Result<Field, SpectralError> {
    u.grid().check_axis(axis)?;
    let f = pullback(u, m, t)?;
    push_forward(&f.weighted(|x| x[axis]), m, t)
}

/// `J_{m,a}(t) u` through the phase form `(it/m) e^{i m theta} d_a(e^{-i m theta} u)`
/// with `theta = |x|^2 / (2t)`. Singular at `t = 0` and only trustworthy while
/// `m |x| / t` stays resolved on the support of `u`; kept as a cross-check.
pub fn apply_j_phase(u: &Field, m: f64, t: f64, axis: usize) -> Result<Field, SpectralError> {
    u.grid().check_axis(axis)?;
    if m == 0.0 {
        return Err(SpectralError::ZeroMass);
    }
    if t == 0.0 {
        return Ok(u.weighted(|x| x[axis]));
    }
    let theta = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>() / (2.0 * t);
    let grid = u.grid().clone();
    let phase = Field::from_fn(&grid, |x| Complex64::from_polar(1.0, m * theta(x)));
    let inner = spectral::derivative(&u.mul(&phase.conj()), axis)?;
    Ok(inner.mul(&phase).scale(Complex64::new(0.0, t / m)))
}

/// Fraction of `|f|^2` in the shell `max_a |x_a| >= 0.9 L/2`; zero for a
/// zero field.
pub fn boundary_mass(f: &Field) -> f64 {
    let grid = f.grid();
    let edge = SHELL_START * grid.length() / 2.0;
    let mut total = 0.0;
    let mut shell = 0.0;
    for (idx, z) in f.values().iter().enumerate() {
        let p = grid.point(idx);
        let w = z.norm_sqr();
        total += w;
        if p[..grid.dim()].iter().any(|x| x.abs() >= edge) {
            shell += w;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        shell / total
    }
}

/// A multi-index of `Gamma = (d_1, .., d_d, J_1, .., J_d)`, applied as
/// `d^deriv J^weight`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GammaIndex {
    pub deriv: [usize; 2],
    pub weight: [usize; 2],
}

impl GammaIndex {
    pub fn deriv_order(&self) -> usize {
        self.deriv[0] + self.deriv[1]
    }

    pub fn j_order(&self) -> usize {
        self.weight[0] + self.weight[1]
    }

    pub fn order(&self) -> usize {
        self.deriv_order() + self.j_order()
    }
}

fn monomials(dim: usize, max: usize) -> Vec<[usize; 2]> {
    let mut out = Vec::new();
    for total in 0..=max {
        if dim == 1 {
            out.push([total, 0]);
        } else {
            for a in (0..=total).rev() {
                out.push([a, total - a]);
            }
        }
    }
    out
}

/// All `Gamma` multi-indices of total order `<= s` in dimension `dim`.
pub fn gamma_indices(dim: usize, s: usize) -> Vec<GammaIndex> {
    let mut out = Vec::new();
    for weight in monomials(dim, s) {
        let rest = s - weight[0] - weight[1];
        for deriv in monomials(dim, rest) {
            out.push(GammaIndex { deriv, weight });
        }
    }
    out.sort_by_key(|g| (g.order(), g.j_order(), g.weight, g.deriv));
    out
}

/// `||d^p (x^q f)||` for every index of order `<= s`, in [`gamma_indices`]
/// order.
pub fn profile_norms(f: &Field, s: usize) -> Vec<(GammaIndex, f64)> {
    let grid = f.grid().clone();
    let dim = grid.dim();
    let weights = monomials(dim, s);
    let mut out: Vec<(GammaIndex, f64)> = weights
        .par_iter()
        .flat_map_iter(|&q| {
            let rest = s - q[0] - q[1];
            let spec = f
                .weighted(|x| {
                    let mut w = x[0].powi(q[0] as i32);
                    if dim == 2 {
                        w *= x[1].powi(q[1] as i32);
                    }
                    w
                })
                .to_spectrum();
            let norms = derivative_norms(&grid, spec.values(), rest);
            norms.into_iter().map(move |(deriv, v)| (GammaIndex { deriv, weight: q }, v))
        })
        .collect();
    out.sort_by_key(|(g, _)| (g.order(), g.j_order(), g.weight, g.deriv));
    out
}

/// `||d^p g||` for `|p| <= rest` from the spectrum of `g`, using the
/// separability of `xi^{2p}` over axes.
fn derivative_norms(grid: &Grid, spec: &[Complex64], rest: usize) -> Vec<([usize; 2], f64)> {
    let n = grid.n();
    let freqs = grid.freqs();
    let scale = grid.cell_volume() / grid.len() as f64;
    let powers: Vec<Vec<f64>> = (0..=rest)
        .map(|p| freqs.iter().map(|k| (k * k).powi(p as i32)).collect())
        .collect();
    if grid.dim() == 1 {
        return (0..=rest)
            .map(|p| {
                let sum: f64 = spec.iter().zip(&powers[p]).map(|(z, w)| z.norm_sqr() * w).sum();
                ([p, 0], (scale * sum).sqrt())
            })
            .collect();
    }
    // rows[q][i] = sum_j xi_j^{2q} |g_ij|^2
    let rows: Vec<Vec<f64>> = (0..=rest)
        .map(|q| {
            (0..n)
                .map(|i| {
                    spec[i * n..(i + 1) * n]
                        .iter()
                        .zip(&powers[q])
                        .map(|(z, w)| z.norm_sqr() * w)
                        .sum()
                })
                .collect()
        })
        .collect();
    monomials(2, rest)
        .into_iter()
        .map(|p| {
            let sum: f64 = rows[p[1]].iter().zip(&powers[p[0]]).map(|(r, w)| r * w).sum();
            (p, (scale * sum).sqrt())
        })
        .collect()
}

/// Weighted Sobolev norm `||f||_{Sigma^s}`: root-sum-square of
/// `||d^p (x^q f)||` over `|p| + |q| <= s`.
pub fn sigma_norm(f: &Field, s: usize) -> f64 {
    profile_norms(f, s).iter().map(|(_, v)| v * v).sum::<f64>().sqrt()
}

/// `Sum_{|alpha| <= s} ||Gamma_m(t)^alpha u||`, the plain (not
/// root-sum-square) sum used by decay ratios.
pub fn gamma_sum(u: &Field, m: f64, t: f64, s: usize) -> Result<f64, SpectralError> {
    let f = pullback(u, m, t)?;
    Ok(profile_norms(&f, s).iter().map(|(_, v)| v).sum())
}

/// One `||Gamma^alpha u_j||` value.
#[derive(Clone, Debug, PartialEq)]
pub struct GammaEntry {
    /// 1-based equation index.
    pub equation: usize,
    pub index: GammaIndex,
    pub value: f64,
}

/// One CSV row: all indices of equation `equation` with the given
/// derivative and `J` orders, combined root-sum-square.
#[derive(Clone, Debug, PartialEq)]
pub struct GammaRow {
    pub equation: usize,
    pub deriv_order: usize,
    pub j_order: usize,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GammaNormReport {
    pub t: f64,
    pub order: usize,
    pub entries: Vec<GammaEntry>,
    pub rows: Vec<GammaRow>,
    /// `||u||_{Gamma(t), s}`, root-sum-square of all entries.
    pub aggregate: f64,
    /// Largest boundary-mass fraction over the three pullbacks.
    pub boundary_mass: f64,
    pub boundary_flag: bool,
}

impl GammaNormReport {
    /// Plain sum of all entries.
    pub fn sum(&self) -> f64 {
        self.entries.iter().map(|e| e.value).sum()
    }

    /// Sum of entries with total order at most `s`.
    pub fn sum_up_to(&self, s: usize) -> f64 {
        self.entries.iter().filter(|e| e.index.order() <= s).map(|e| e.value).sum()
    }

    /// Root-sum-square of entries with total order at most `s`.
    pub fn aggregate_up_to(&self, s: usize) -> f64 {
        self.entries
            .iter()
            .filter(|e| e.index.order() <= s)
            .map(|e| e.value * e.value)
            .sum::<f64>()
            .sqrt()
    }

    pub const CSV_HEADER: &'static str = "t,equation,deriv_order,j_order,value";

    /// Rows in the `t,equation,deriv_order,j_order,value` layout, no header.
    pub fn csv_rows(&self) -> String {
        let mut out = String::new();
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{:.6},{},{},{},{:.12e}",
                self.t, r.equation, r.deriv_order, r.j_order, r.value
            );
        }
        out
    }
}

/// Gamma norms of three arbitrary fields at time `t`, equation `j` using the
/// vector fields of mass `m_j`.
pub fn gamma_norm_fields(
    fields: &[Field; 3],
    masses: &MassTriple,
    t: f64,
    s: usize,
) -> Result<GammaNormReport, SpectralError> {
    let m = masses.as_f64();
    let mut entries = Vec::new();
    let mut rows = Vec::new();
    let mut worst_boundary: f64 = 0.0;
    for (j, u) in fields.iter().enumerate() {
        let f = pullback(u, m[j], t)?;
        worst_boundary = worst_boundary.max(boundary_mass(&f));
        let norms = profile_norms(&f, s);
        for p in 0..=s {
            for q in 0..=(s - p) {
                let sq: f64 = norms
                    .iter()
                    .filter(|(g, _)| g.deriv_order() == p && g.j_order() == q)
                    .map(|(_, v)| v * v)
                    .sum();
                rows.push(GammaRow { equation: j + 1, deriv_order: p, j_order: q, value: sq.sqrt() });
            }
        }
        entries.extend(norms.into_iter().map(|(index, value)| GammaEntry { equation: j + 1, index, value }));
    }
    let aggregate = entries.iter().map(|e| e.value * e.value).sum::<f64>().sqrt();
    Ok(GammaNormReport {
        t,
        order: s,
        entries,
        rows,
        aggregate,
        boundary_mass: worst_boundary,
        boundary_flag: worst_boundary > BOUNDARY_THRESHOLD,
    })
}

/// [`gamma_norm_fields`] for a state at its own time stamp.
pub fn gamma_norm(
    state: &StateTriple,
    masses: &MassTriple,
    s: usize,
) -> Result<GammaNormReport, SpectralError> {
    gamma_norm_fields(state.fields(), masses, state.t, s)
}

/// `Sum_{|alpha| <= s} ||Gamma_m(t)^alpha u||_inf`, each term evaluated in
/// physical space as `U_m(t) d^p (x^q f)`.
pub fn gamma_sup_sum(u: &Field, m: f64, t: f64, s: usize) -> Result<f64, SpectralError> {
    let grid = u.grid().clone();
    let dim = grid.dim();
    let f = pullback(u, m, t)?;
    let flow = spectral::free_multiplier(&grid, m, t)?;
    let mut total = 0.0;
    for q in monomials(dim, s) {
        let base = f
            .weighted(|x| {
                let mut w = x[0].powi(q[0] as i32);
                if dim == 2 {
                    w *= x[1].powi(q[1] as i32);
                }
                w
            })
            .to_spectrum();
        for p in monomials(dim, s - q[0] - q[1]) {
            let mut spec = base.clone();
            spec.apply_table(&flow);
            for axis in 0..dim {
                let power = p[axis] as i32;
                if power > 0 {
                    spec.apply_axis(axis, |k| Complex64::new(0.0, k).powi(power));
                }
            }
            total += spec.into_field().sup_norm();
        }
    }
    Ok(total)
}

/// `||u||_inf <t>^{d/2} / Sum_{|alpha| <= [d/2]+1} ||Gamma_m^alpha u||`.
pub fn klainerman_ratio(u: &Field, m: f64, t: f64) -> Result<f64, VectorFieldError> {
    let d = u.grid().dim();
    let denom = gamma_sum(u, m, t, d / 2 + 1)?;
    if denom == 0.0 {
        return Err(VectorFieldError::ZeroField);
    }
    Ok(u.sup_norm() * japanese(t).powf(d as f64 / 2.0) / denom)
}
