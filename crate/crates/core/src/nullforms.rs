//! The quadratic nonlinearity on grid fields, the null gauge forms `G_{j,a}`,
//! the strong null forms `Q_{ab}`, and residuals of the exact identities
//! relating them to the vector fields `J_m`.
//!
//! Equation `j` pairs its operands as `(u2, u3)`, `(u3, u1)`, `(u1, u2)` for
//! `j = 1, 2, 3`; the first operand is conjugated in equation 1, the second
//! in equation 2. Axes are 0-based.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::problem::{
    axis_pairs, is_null, CoefficientTensor, MassTriple, NullDecomposition, NumericTensor,
    ProblemError,
};
use crate::spectral::{self, Field, Grid, SpectralError, Spectrum, StateTriple};
use crate::vectorfield::{apply_j, gamma_norm_fields, gamma_sup_sum, japanese};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NullFormError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Problem(#[from] ProblemError),
    #[error("strong null form needs two distinct axes, got {0} twice")]
    SameAxis(usize),
    #[error("identity requires resonant masses m3 = m1 + m2")]
    NonResonant,
    #[error("identity is singular at t = 0")]
    ZeroTime,
    #[error("equation index {0} out of range (expected 1..=3)")]
    BadEquation(usize),
    #[error("vector-field order {0} not supported (at most 2)")]
    BadOrder(usize),
}

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// Which operand of a bilinear form enters conjugated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Conj {
    None,
    First,
    Second,
}

impl Conj {
    /// The conjugation pattern of equation `j`.
    pub fn of_equation(j: usize) -> Self {
        match j {
            1 => Conj::First,
            2 => Conj::Second,
            _ => Conj::None,
        }
    }

    fn apply(self, f: &Field, g: &Field) -> (Field, Field) {
        match self {
            Conj::None => (f.clone(), g.clone()),
            Conj::First => (f.conj(), g.clone()),
            Conj::Second => (f.clone(), g.conj()),
        }
    }
}

fn check_eq(j: usize) -> Result<(), NullFormError> {
    if (1..=3).contains(&j) {
        Ok(())
    } else {
        Err(NullFormError::BadEquation(j))
    }
}

/// Masses `(m_f, m_g, m_out)` carried by the operands and the output of
/// equation `j`.
pub fn operand_masses(m: &MassTriple, j: usize) -> (f64, f64, f64) {
    let [m1, m2, m3] = m.as_f64();
    match j {
        1 => (m2, m3, m1),
        2 => (m3, m1, m2),
        _ => (m1, m2, m3),
    }
}

/// The operands `(f, g)` of equation `j` taken from a state.
pub fn operands(state: &StateTriple, j: usize) -> (&Field, &Field) {
    let u = state.fields();
    match j {
        1 => (&u[1], &u[2]),
        2 => (&u[2], &u[0]),
        _ => (&u[0], &u[1]),
    }
}

/// `(c_f, c_g)` with `J_{m_out}(P(f, g)) = c_f P(J_{m_f} f, g) + c_g P(f, J_{m_g} g)`
/// for the product `P` of equation `j`; valid under resonance.
fn leibniz_weights(m: &MassTriple, j: usize) -> (f64, f64) {
    let [m1, m2, m3] = m.as_f64();
    match j {
        1 => (-m2 / m1, m3 / m1),
        2 => (m3 / m2, -m1 / m2),
        _ => (m1 / m3, m2 / m3),
    }
}

/// Spectra of `F_1, F_2, F_3` from the spectra of `u_1, u_2, u_3`. With
/// `dealias`, factors and output are projected by the two-thirds rule.
pub fn nonlinearity_spectra(c: &NumericTensor, u: &[Spectrum; 3], dealias: bool) -> [Spectrum; 3] {
    let grid = u[0].grid().clone();
    let slots = c.dim() + 1;
    let mut cache: Vec<Option<Field>> = vec![None; 3 * slots];
    let mut factor = |i: usize, slot: usize| -> Field {
        cache[i * slots + slot]
            .get_or_insert_with(|| {
                let mut s = u[i].clone();
                if dealias {
                    s.dealias();
                }
                if slot > 0 {
                    s.apply_axis(slot - 1, |k| Complex64::new(0.0, k));
                }
                s.into_field()
            })
            .clone()
    };
    let mut out: Vec<Spectrum> = Vec::with_capacity(3);
    for j in 1..=3 {
        let mut acc = vec![ZERO; grid.len()];
        for (alpha, beta, coef) in c.nonzero(j) {
            let (a, b, conj) = match j {
                1 => (factor(1, alpha), factor(2, beta), Conj::First),
                2 => (factor(2, alpha), factor(0, beta), Conj::Second),
                _ => (factor(0, alpha), factor(1, beta), Conj::None),
            };
            for ((z, x), y) in acc.iter_mut().zip(a.values()).zip(b.values()) {
                let p = match conj {
                    Conj::First => x.conj() * y,
                    Conj::Second => x * y.conj(),
                    Conj::None => x * y,
                };
                *z += coef * p;
            }
        }
        let mut s = Field::from_vec(&grid, acc).to_spectrum();
        if dealias {
            s.dealias();
        }
        out.push(s);
    }
    let [a, b, c3]: [Spectrum; 3] = out.try_into().expect("three equations");
    [a, b, c3]
}

/// `(F_1, F_2, F_3)` evaluated on a state.
pub fn eval_nonlinearity(c: &NumericTensor, state: &StateTriple, dealias: bool) -> [Field; 3] {
    let spectra = state.fields().clone().map(|f| f.to_spectrum());
    nonlinearity_spectra(c, &spectra, dealias).map(Spectrum::into_field)
}

/// Null gauge form `G_{j,a}(f, g)`.
pub fn eval_g(j: usize, axis: usize, f: &Field, g: &Field, m: &MassTriple) -> Result<Field, NullFormError> {
    check_eq(j)?;
    let [m1, m2, m3] = m.as_f64();
    let df = spectral::derivative(f, axis)?;
    let dg = spectral::derivative(g, axis)?;
    Ok(match j {
        1 => f.conj().mul(&dg).scale_real(m2).add(&df.conj().mul(g).scale_real(m3)),
        2 => f.mul(&dg.conj()).scale_real(m3).add(&df.mul(&g.conj()).scale_real(m1)),
        _ => f.mul(&dg).scale_real(m1).sub(&df.mul(g).scale_real(m2)),
    })
}

/// Strong null form `Q_{ab}(f, g) = d_a f d_b g - d_b f d_a g`, with the
/// selected operand conjugated first.
pub fn eval_q(a: usize, b: usize, f: &Field, g: &Field, conj: Conj) -> Result<Field, NullFormError> {
    if a == b {
        return Err(NullFormError::SameAxis(a));
    }
    let (f, g) = conj.apply(f, g);
    let d = |h: &Field, axis| spectral::derivative(h, axis);
    Ok(d(&f, a)?.mul(&d(&g, b)?).sub(&d(&f, b)?.mul(&d(&g, a)?)))
}

/// A single null form of one equation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum NullForm {
    Gauge { eq: usize, axis: usize },
    Strong { eq: usize, a: usize, b: usize },
}

impl NullForm {
    pub fn equation(&self) -> usize {
        match *self {
            NullForm::Gauge { eq, .. } | NullForm::Strong { eq, .. } => eq,
        }
    }

    pub fn tag(&self) -> String {
        match *self {
            NullForm::Gauge { eq, axis } => format!("G{eq},{}", axis + 1),
            NullForm::Strong { eq, a, b } => format!("Q{}{}[eq{eq}]", a + 1, b + 1),
        }
    }

    pub fn axes(&self) -> Vec<usize> {
        match *self {
            NullForm::Gauge { axis, .. } => vec![axis],
            NullForm::Strong { a, b, .. } => vec![a, b],
        }
    }

    pub fn eval(&self, f: &Field, g: &Field, m: &MassTriple) -> Result<Field, NullFormError> {
        match *self {
            NullForm::Gauge { eq, axis } => eval_g(eq, axis, f, g, m),
            NullForm::Strong { eq, a, b } => {
                check_eq(eq)?;
                eval_q(a, b, f, g, Conj::of_equation(eq))
            }
        }
    }
}

/// `Sum A G + Sum B Q` for each equation, the nonlinearity certified by a
/// decomposition.
pub fn eval_decomposition(
    dec: &NullDecomposition,
    state: &StateTriple,
    m: &MassTriple,
) -> Result<[Field; 3], NullFormError> {
    let grid = state.grid().clone();
    let mut out = [Field::zeros(&grid), Field::zeros(&grid), Field::zeros(&grid)];
    for j in 1..=3 {
        let (f, g) = operands(state, j);
        for (axis, w) in dec.gauge[j - 1].iter().enumerate() {
            let w = crate::problem::complex_to_f64(w);
            if w != ZERO {
                out[j - 1].axpy(w, &eval_g(j, axis, f, g, m)?);
            }
        }
        for ((a, b), w) in axis_pairs(dec.dim()).into_iter().zip(&dec.strong[j - 1]) {
            let w = crate::problem::complex_to_f64(w);
            if w != ZERO {
                out[j - 1].axpy(w, &eval_q(a, b, f, g, Conj::of_equation(j))?);
            }
        }
    }
    Ok(out)
}

/// Relative residual of one identity evaluation.
#[derive(Clone, Debug, PartialEq)]
pub struct IdentityResidual {
    pub identity: String,
    pub t: f64,
    pub masses: [f64; 3],
    pub axes: Vec<usize>,
    /// `||lhs - rhs|| / max(||lhs||, ||rhs||, 1e-300)`.
    pub residual: f64,
}

impl IdentityResidual {
    pub const CSV_HEADER: &'static str = "identity,t,masses,residual";

    pub fn from_sides(
        identity: impl Into<String>,
        t: f64,
        m: &MassTriple,
        axes: Vec<usize>,
        lhs: &Field,
        rhs: &Field,
    ) -> Self {
        let scale = lhs.norm_l2().max(rhs.norm_l2()).max(1e-300);
        Self {
            identity: identity.into(),
            t,
            masses: m.as_f64(),
            axes,
            residual: lhs.sub(rhs).norm_l2() / scale,
        }
    }

    pub fn csv_row(&self) -> String {
        let axes: Vec<String> = self.axes.iter().map(|a| (a + 1).to_string()).collect();
        format!(
            "{}[{}],{},{};{};{},{:.6e}",
            self.identity,
            axes.join(" "),
            self.t,
            self.masses[0],
            self.masses[1],
            self.masses[2],
            self.residual
        )
    }
}

fn product(conj: Conj, f: &Field, g: &Field) -> Field {
    let (f, g) = conj.apply(f, g);
    f.mul(&g)
}

/// Leibniz rule for `J` on the product of equation `j`:
/// `J_{m_out}(P(f, g)) = c_f P(J_{m_f} f, g) + c_g P(f, J_{m_g} g)`.
/// Resonance is not checked, so non-resonant masses measure how badly the
/// rule fails.
pub fn leibniz_residual(
    j: usize,
    f: &Field,
    g: &Field,
    m: &MassTriple,
    t: f64,
    axis: usize,
) -> Result<IdentityResidual, NullFormError> {
    check_eq(j)?;
    let (mf, mg, mo) = operand_masses(m, j);
    let (cf, cg) = leibniz_weights(m, j);
    let conj = Conj::of_equation(j);
    let lhs = apply_j(&product(conj, f, g), mo, t, axis)?;
    let rhs = product(conj, &apply_j(f, mf, t, axis)?, g)
        .scale_real(cf)
        .add(&product(conj, f, &apply_j(g, mg, t, axis)?).scale_real(cg));
    Ok(IdentityResidual::from_sides(format!("leibniz-{j}"), t, m, vec![axis], &lhs, &rhs))
}

/// Residual of the `1/t` rewriting of a null form through `J`.
///
/// Gauge forms use `J_{m_f}`, `J_{m_g}` of their equation and require
/// resonance. Strong forms accept free auxiliary masses `(mu_f, mu_g)`,
/// defaulting to the operand masses of the equation.
pub fn extra_decay_residual(
    form: NullForm,
    f: &Field,
    g: &Field,
    m: &MassTriple,
    aux: Option<(f64, f64)>,
    t: f64,
) -> Result<IdentityResidual, NullFormError> {
    if t == 0.0 {
        return Err(NullFormError::ZeroTime);
    }
    let j = form.equation();
    check_eq(j)?;
    let conj = Conj::of_equation(j);
    let (mf, mg, _) = operand_masses(m, j);
    let lhs = form.eval(f, g, m)?;
    let (rhs, tag) = match form {
        NullForm::Gauge { axis, .. } => {
            if !m.resonant() {
                return Err(NullFormError::NonResonant);
            }
            let sign = if j == 2 { -1.0 } else { 1.0 };
            let diff = product(conj, &apply_j(f, mf, t, axis)?, g)
                .sub(&product(conj, f, &apply_j(g, mg, t, axis)?));
            (diff.scale(I * (sign * mf * mg / t)), format!("extra-decay-G{j}"))
        }
        NullForm::Strong { a, b, .. } => {
            if a == b {
                return Err(NullFormError::SameAxis(a));
            }
            let (mu_f, mu_g) = aux.unwrap_or((mf, mg));
            // A conjugated operand flips the sign of its mass in d = (m/it)(J - x).
            let sf = if conj == Conj::First { -mu_f } else { mu_f };
            let sg = if conj == Conj::Second { -mu_g } else { mu_g };
            let jf = |axis| -> Result<Field, NullFormError> {
                let v = apply_j(f, mu_f, t, axis)?;
                Ok(if conj == Conj::First { v.conj() } else { v })
            };
            let jg = |axis| -> Result<Field, NullFormError> {
                let v = apply_j(g, mu_g, t, axis)?;
                Ok(if conj == Conj::Second { v.conj() } else { v })
            };
            let (ft, gt) = conj.apply(f, g);
            let d = |h: &Field, axis| spectral::derivative(h, axis);
            let (ja, jb) = (jf(a)?, jf(b)?);
            let (ka, kb) = (jg(a)?, jg(b)?);
            let first = d(&ft, a)?.mul(&kb).sub(&d(&ft, b)?.mul(&ka));
            let second = ja.mul(&d(&gt, b)?).sub(&jb.mul(&d(&gt, a)?));
            let third = ja.mul(&kb).sub(&jb.mul(&ka));
            let rhs = first
                .scale(-I * (sg / t))
                .add(&second.scale(-I * (sf / t)))
                .add(&third.scale_real(sf * sg / (t * t)));
            (rhs, format!("extra-decay-Q{j}(mu={mu_f};{mu_g})"))
        }
    };
    Ok(IdentityResidual::from_sides(tag, t, m, form.axes(), &lhs, &rhs))
}

/// Apply `J_{mass, c}` for every axis in `axes`.
fn apply_js(u: &Field, mass: f64, t: f64, axes: &[usize]) -> Result<Field, SpectralError> {
    let mut out = u.clone();
    for &c in axes {
        out = apply_j(&out, mass, t, c)?;
    }
    Ok(out)
}

/// All multisets of axes of size exactly `k`.
fn axis_multisets(dim: usize, k: usize) -> Vec<Vec<usize>> {
    match k {
        0 => vec![vec![]],
        1 => (0..dim).map(|a| vec![a]).collect(),
        _ => (0..dim).flat_map(|a| (a..dim).map(move |b| vec![a, b])).collect(),
    }
}

/// Action of `J_{m_out}^alpha` on a null form of equation `j`.
///
/// For `|alpha| = 1` the explicit expansion is checked. For `|alpha| = 2`
/// the left side is fitted by least squares over forms of `J`-images of the
/// operands (plus first-order gauge corrections for strong forms); the
/// residual is the relative fit error.
pub fn j_action_residual(
    form: NullForm,
    alpha: &[usize],
    f: &Field,
    g: &Field,
    m: &MassTriple,
    t: f64,
) -> Result<IdentityResidual, NullFormError> {
    if !m.resonant() {
        return Err(NullFormError::NonResonant);
    }
    let j = form.equation();
    check_eq(j)?;
    let (mf, mg, mo) = operand_masses(m, j);
    let tag = format!("j-action-{}-order{}", form.tag(), alpha.len());
    let base = form.eval(f, g, m)?;
    let lhs = apply_js(&base, mo, t, alpha)?;
    let axes = {
        let mut v = form.axes();
        v.extend_from_slice(alpha);
        v
    };
    match alpha.len() {
        0 => Ok(IdentityResidual::from_sides(tag, t, m, axes, &lhs, &base)),
        1 => {
            let c = alpha[0];
            let (cf, cg) = leibniz_weights(m, j);
            let mut rhs = form
                .eval(&apply_j(f, mf, t, c)?, g, m)?
                .scale_real(cf)
                .add(&form.eval(f, &apply_j(g, mg, t, c)?, m)?.scale_real(cg));
            if let NullForm::Strong { a, b, .. } = form {
                // Commuting J past the derivatives leaves gauge forms of the
                // same equation; equation 1 enters with the opposite sign.
                let k = if j == 1 { -1.0 / mo } else { 1.0 / mo };
                if c == b {
                    rhs = rhs.add(&eval_g(j, a, f, g, m)?.scale_real(k));
                }
                if c == a {
                    rhs = rhs.sub(&eval_g(j, b, f, g, m)?.scale_real(k));
                }
            }
            Ok(IdentityResidual::from_sides(tag, t, m, axes, &lhs, &rhs))
        }
        2 => {
            let dim = f.grid().dim();
            let mut basis = Vec::new();
            for total in 0..=2 {
                for kf in 0..=total {
                    for bf in axis_multisets(dim, kf) {
                        for bg in axis_multisets(dim, total - kf) {
                            let jf = apply_js(f, mf, t, &bf)?;
                            let jg = apply_js(g, mg, t, &bg)?;
                            basis.push(form.eval(&jf, &jg, m)?);
                            if matches!(form, NullForm::Strong { .. }) && total <= 1 {
                                for x in 0..dim {
                                    basis.push(eval_g(j, x, &jf, &jg, m)?);
                                }
                            }
                        }
                    }
                }
            }
            let fit = least_squares_fit(&basis, &lhs);
            Ok(IdentityResidual::from_sides(tag, t, m, axes, &lhs, &fit))
        }
        n => Err(NullFormError::BadOrder(n)),
    }
}

/// Best approximation of `target` in the span of `basis`, through a
/// column-normalized SVD solve.
fn least_squares_fit(basis: &[Field], target: &Field) -> Field {
    let grid = target.grid().clone();
    let rows = grid.len();
    let norms: Vec<f64> = basis.iter().map(|b| b.norm_l2().max(1e-300)).collect();
    let a = DMatrix::from_fn(rows, basis.len(), |r, c| basis[c].values()[r] / norms[c]);
    let b = DVector::from_column_slice(target.values());
    let svd = a.clone().svd(true, true);
    let x = svd.solve(&b, 1e-12).expect("SVD computed with both factors");
    let fitted = &a * x;
    Field::from_vec(&grid, fitted.as_slice().to_vec())
}

/// `Sum_j Sum_{|alpha| <= s} ||Gamma^alpha F_j||`, times `<t>` when
/// `weight_time`, over `Sum_j Sum_{|beta| <= [s/2]+1} ||Gamma^beta u_j||_inf`
/// times `||u||_{Gamma, s+1}`. Zero for a zero nonlinearity.
pub fn extra_decay_ratio(
    state: &StateTriple,
    c: &NumericTensor,
    m: &MassTriple,
    s: usize,
    weight_time: bool,
) -> Result<f64, NullFormError> {
    let t = state.t;
    let f = eval_nonlinearity(c, state, true);
    let numer = gamma_norm_fields(&f, m, t, s)?.sum();
    if numer == 0.0 {
        return Ok(0.0);
    }
    let masses = m.as_f64();
    let mut low = 0.0;
    for (u, &mj) in state.fields().iter().zip(&masses) {
        low += gamma_sup_sum(u, mj, t, s / 2 + 1)?;
    }
    let high = gamma_norm_fields(state.fields(), m, t, s + 1)?.aggregate;
    let weight = if weight_time { japanese(t) } else { 1.0 };
    Ok(numer * weight / (low * high))
}

/// The `<t>`-weighted [`extra_decay_ratio`], defined for null tensors under
/// resonance only.
pub fn extra_decay_bound(
    state: &StateTriple,
    c: &CoefficientTensor,
    m: &MassTriple,
    s: usize,
) -> Result<f64, NullFormError> {
    if !is_null(c, m) {
        return Err(NullFormError::Problem(ProblemError::NotNull(
            crate::problem::null_violation(c, m).expect("non-null tensor has a violation"),
        )));
    }
    if !m.resonant() {
        return Err(NullFormError::NonResonant);
    }
    extra_decay_ratio(state, &c.to_numeric(), m, s, true)
}

/// Standard Gaussian operands for identity checks, band-limited well below
/// the dealiasing cutoff on the grids used for sweeps.
pub fn test_operands(grid: &Grid) -> (Field, Field) {
    let f = spectral::modulated_gaussian(grid, &[0.3, -0.2], 1.0, &[0.4, 0.2]);
    let g = spectral::modulated_gaussian(grid, &[-0.25, 0.15], 1.2, &[-0.3, 0.35]);
    (f, g)
}

/// One entry of an identity sweep.
#[derive(Clone, Debug, PartialEq)]
pub enum IdentityCase {
    Leibniz { eq: usize, axis: usize },
    ExtraDecay { form: NullForm, aux: Option<(f64, f64)> },
    JAction { form: NullForm, alpha: Vec<usize> },
}

impl IdentityCase {
    pub fn evaluate(&self, f: &Field, g: &Field, m: &MassTriple, t: f64) -> Result<IdentityResidual, NullFormError> {
        match self {
            IdentityCase::Leibniz { eq, axis } => leibniz_residual(*eq, f, g, m, t, *axis),
            IdentityCase::ExtraDecay { form, aux } => extra_decay_residual(*form, f, g, m, *aux, t),
            IdentityCase::JAction { form, alpha } => j_action_residual(*form, alpha, f, g, m, t),
        }
    }
}

/// Every null form of dimension `dim`.
pub fn all_forms(dim: usize) -> Vec<NullForm> {
    let mut out = Vec::new();
    for eq in 1..=3 {
        out.extend((0..dim).map(|axis| NullForm::Gauge { eq, axis }));
        out.extend(axis_pairs(dim).into_iter().map(|(a, b)| NullForm::Strong { eq, a, b }));
    }
    out
}

/// The standard case list: Leibniz rules, `1/t` rewritings (strong forms
/// with default and unit auxiliary masses), and first-order `J` actions.
/// Cases that require resonance are dropped for non-resonant masses.
pub fn standard_cases(dim: usize, resonant: bool) -> Vec<IdentityCase> {
    let mut cases = Vec::new();
    for eq in 1..=3 {
        for axis in 0..dim {
            cases.push(IdentityCase::Leibniz { eq, axis });
        }
    }
    for form in all_forms(dim) {
        match form {
            NullForm::Gauge { .. } if resonant => cases.push(IdentityCase::ExtraDecay { form, aux: None }),
            NullForm::Gauge { .. } => {}
            NullForm::Strong { .. } => {
                cases.push(IdentityCase::ExtraDecay { form, aux: None });
                cases.push(IdentityCase::ExtraDecay { form, aux: Some((1.0, 1.0)) });
            }
        }
        if resonant {
            for c in 0..dim {
                cases.push(IdentityCase::JAction { form, alpha: vec![c] });
            }
        }
    }
    cases
}

/// Evaluate `cases` at every time in `times` on the standard operands.
pub fn identity_sweep(
    grid: &Grid,
    m: &MassTriple,
    cases: &[IdentityCase],
    times: &[f64],
) -> Result<Vec<IdentityResidual>, NullFormError> {
    let (f, g) = test_operands(grid);
    let jobs: Vec<(&IdentityCase, f64)> =
        times.iter().flat_map(|&t| cases.iter().map(move |c| (c, t))).collect();
    jobs.par_iter().map(|(c, t)| c.evaluate(&f, &g, m, *t)).collect()
}
