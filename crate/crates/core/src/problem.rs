//! Exact parameters of the three-wave system and its null-structure algebra.
//!
//! Masses and coefficients are stored as exact rationals so that the null
//! condition and the gauge/strong-form decomposition are decided by exact
//! equality. Decimal text such as `"0.1"` parses to exactly `1/10`.
//!
//! Index conventions follow the data files: equations are numbered 1..=3 and
//! a derivative slot is 0 for "no derivative" or `a` in 1..=d for the
//! derivative along axis `a`.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_complex::{Complex, Complex64};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use thiserror::Error;

pub type Exact = BigRational;
pub type ExactComplex = Complex<BigRational>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProblemError {
    #[error("mass m{index} is zero")]
    ZeroMass { index: usize },
    #[error("nonlinearity violates the null condition: {0}")]
    NotNull(NullViolation),
    #[error("equation index {0} out of range (expected 1..=3)")]
    BadEquation(usize),
    #[error("derivative slot {slot} out of range for dimension {dim}")]
    BadSlot { slot: usize, dim: usize },
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("cannot parse exact number from {0:?}")]
    Parse(String),
}

/// The coefficient condition that failed when a tensor is not null.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NullViolation {
    ConstantTerm { equation: usize },
    DiagonalQuadratic { equation: usize, axis: usize },
    SymmetricOffDiagonal { equation: usize, a: usize, b: usize },
    GaugeInconsistent { equation: usize, axis: usize },
}

impl fmt::Display for NullViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::ConstantTerm { equation } => {
                write!(f, "p{equation} has a nonzero constant term")
            }
            Self::DiagonalQuadratic { equation, axis } => {
                write!(f, "p{equation} has a nonzero xi{axis}^2 coefficient")
            }
            Self::SymmetricOffDiagonal { equation, a, b } => write!(
                f,
                "p{equation}: C[{a}][{b}] + C[{b}][{a}] is nonzero (xi{a} xi{b} term survives)"
            ),
            Self::GaugeInconsistent { equation, axis } => write!(
                f,
                "p{equation}: the two first-order slots for axis {axis} do not cancel"
            ),
        }
    }
}

/// Parse an exact rational from `"p/q"`, an integer, or a decimal with an
/// optional exponent (`"-1.25e-3"`).
pub fn parse_exact(text: &str) -> Result<Exact, ProblemError> {
    let s = text.trim();
    let err = || ProblemError::Parse(text.to_string());
    if s.is_empty() {
        return Err(err());
    }
    if let Some((num, den)) = s.split_once('/') {
        let n = BigInt::from_str(num.trim()).map_err(|_| err())?;
        let d = BigInt::from_str(den.trim()).map_err(|_| err())?;
        if d.is_zero() {
            return Err(err());
        }
        return Ok(BigRational::new(n, d));
    }
    let (mantissa, exponent) = match s.find(['e', 'E']) {
        Some(pos) => (&s[..pos], s[pos + 1..].parse::<i32>().map_err(|_| err())?),
        None => (s, 0),
    };
    let (negative, digits) = match mantissa.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, mantissa.strip_prefix('+').unwrap_or(mantissa)),
    };
    let (int_part, frac_part) = digits.split_once('.').unwrap_or((digits, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return Err(err());
    }
    if !int_part.chars().chain(frac_part.chars()).all(|c| c.is_ascii_digit()) {
        return Err(err());
    }
    let all_digits = format!("{int_part}{frac_part}");
    let mut value = BigRational::from_integer(BigInt::from_str(&all_digits).map_err(|_| err())?);
    let scale = exponent - frac_part.len() as i32;
    let ten = BigRational::from_integer(BigInt::from(10));
    if scale >= 0 {
        value *= num_traits::pow(ten, scale as usize);
    } else {
        value /= num_traits::pow(ten, (-scale) as usize);
    }
    Ok(if negative { -value } else { value })
}

/// Exact rational equal to a finite double (every finite double is dyadic).
pub fn exact_from_f64(x: f64) -> Option<Exact> {
    BigRational::from_float(x)
}

/// Canonical text form, `"p"` or `"p/q"`; [`parse_exact`] inverts it.
pub fn format_exact(x: &Exact) -> String {
    if x.denom().is_one() {
        x.numer().to_string()
    } else {
        format!("{}/{}", x.numer(), x.denom())
    }
}

fn to_f64(x: &Exact) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

pub fn complex_to_f64(z: &ExactComplex) -> Complex64 {
    Complex64::new(to_f64(&z.re), to_f64(&z.im))
}

fn real(x: Exact) -> ExactComplex {
    Complex::new(x, Exact::zero())
}

fn imag(x: Exact) -> ExactComplex {
    Complex::new(Exact::zero(), x)
}

/// The three nonzero masses `(m1, m2, m3)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MassTriple {
    m: [Exact; 3],
}

impl MassTriple {
    pub fn new(m1: Exact, m2: Exact, m3: Exact) -> Result<Self, ProblemError> {
        let m = [m1, m2, m3];
        if let Some(i) = m.iter().position(Zero::is_zero) {
            return Err(ProblemError::ZeroMass { index: i + 1 });
        }
        Ok(Self { m })
    }

    pub fn from_integers(m1: i64, m2: i64, m3: i64) -> Result<Self, ProblemError> {
        let e = |v: i64| BigRational::from_integer(BigInt::from(v));
        Self::new(e(m1), e(m2), e(m3))
    }

    /// Exact conversion from doubles; non-finite values are rejected as zero.
    pub fn from_f64(m1: f64, m2: f64, m3: f64) -> Result<Self, ProblemError> {
        let e = |v: f64, i: usize| exact_from_f64(v).ok_or(ProblemError::ZeroMass { index: i });
        Self::new(e(m1, 1)?, e(m2, 2)?, e(m3, 3)?)
    }

    /// Mass of equation `j` (1-based).
    pub fn get(&self, j: usize) -> &Exact {
        &self.m[j - 1]
    }

    pub fn exact(&self) -> &[Exact; 3] {
        &self.m
    }

    pub fn as_f64(&self) -> [f64; 3] {
        [to_f64(&self.m[0]), to_f64(&self.m[1]), to_f64(&self.m[2])]
    }

    /// `m3 == m1 + m2`, decided exactly.
    pub fn resonant(&self) -> bool {
        self.m[2] == &self.m[0] + &self.m[1]
    }
}

impl fmt::Display for MassTriple {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "({}, {}, {})",
            format_exact(&self.m[0]),
            format_exact(&self.m[1]),
            format_exact(&self.m[2])
        )
    }
}

pub fn check_resonance(m: &MassTriple) -> bool {
    m.resonant()
}

/// Complex constants `C[k][alpha][beta]` of the quadratic nonlinearity.
///
/// Equation 1 conjugates its `u2` factor, equation 2 its `u1` factor,
/// equation 3 conjugates nothing; the pattern is structural and not stored.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTensor {
    dim: usize,
    entries: Vec<ExactComplex>,
}

impl CoefficientTensor {
    pub fn zeros(dim: usize) -> Result<Self, ProblemError> {
        if dim == 0 {
            return Err(ProblemError::ZeroDimension);
        }
        let slots = dim + 1;
        Ok(Self {
            dim,
            entries: vec![ExactComplex::zero(); 3 * slots * slots],
        })
    }

    /// The derivative-free resonant system: `conj(u2) u3`, `u3 conj(u1)`, `u1 u2`.
    pub fn derivative_free(dim: usize) -> Result<Self, ProblemError> {
        let mut c = Self::zeros(dim)?;
        for j in 1..=3 {
            c.set(j, 0, 0, ExactComplex::one())?;
        }
        Ok(c)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn index(&self, eq: usize, alpha: usize, beta: usize) -> Result<usize, ProblemError> {
        if !(1..=3).contains(&eq) {
            return Err(ProblemError::BadEquation(eq));
        }
        for slot in [alpha, beta] {
            if slot > self.dim {
                return Err(ProblemError::BadSlot { slot, dim: self.dim });
            }
        }
        let slots = self.dim + 1;
        Ok(((eq - 1) * slots + alpha) * slots + beta)
    }

    pub fn get(&self, eq: usize, alpha: usize, beta: usize) -> &ExactComplex {
        let i = self.index(eq, alpha, beta).expect("coefficient index out of range");
        &self.entries[i]
    }

    pub fn set(
        &mut self,
        eq: usize,
        alpha: usize,
        beta: usize,
        value: ExactComplex,
    ) -> Result<(), ProblemError> {
        let i = self.index(eq, alpha, beta)?;
        self.entries[i] = value;
        Ok(())
    }

    pub fn add(
        &mut self,
        eq: usize,
        alpha: usize,
        beta: usize,
        value: &ExactComplex,
    ) -> Result<(), ProblemError> {
        let i = self.index(eq, alpha, beta)?;
        self.entries[i] = &self.entries[i] + value;
        Ok(())
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(Zero::is_zero)
    }

    pub fn scaled(&self, lambda: &ExactComplex) -> Self {
        Self {
            dim: self.dim,
            entries: self.entries.iter().map(|c| c * lambda).collect(),
        }
    }

    /// Nonzero entries as `(equation, alpha, beta, value)`.
    pub fn nonzero_entries(&self) -> Vec<(usize, usize, usize, &ExactComplex)> {
        let mut out = Vec::new();
        for eq in 1..=3 {
            for alpha in 0..=self.dim {
                for beta in 0..=self.dim {
                    let c = self.get(eq, alpha, beta);
                    if !c.is_zero() {
                        out.push((eq, alpha, beta, c));
                    }
                }
            }
        }
        out
    }

    pub fn to_numeric(&self) -> NumericTensor {
        NumericTensor {
            dim: self.dim,
            entries: self.entries.iter().map(complex_to_f64).collect(),
        }
    }
}

/// Floating-point copy of a [`CoefficientTensor`] used by the field evaluators.
#[derive(Debug, Clone, PartialEq)]
pub struct NumericTensor {
    dim: usize,
    entries: Vec<Complex64>,
}

impl NumericTensor {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, eq: usize, alpha: usize, beta: usize) -> Complex64 {
        let slots = self.dim + 1;
        self.entries[((eq - 1) * slots + alpha) * slots + beta]
    }

    pub fn nonzero(&self, eq: usize) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        let slots = self.dim + 1;
        (0..slots).flat_map(move |alpha| {
            (0..slots).filter_map(move |beta| {
                let c = self.get(eq, alpha, beta);
                (c != Complex64::new(0.0, 0.0)).then_some((alpha, beta, c))
            })
        })
    }

    pub fn is_zero(&self) -> bool {
        self.entries.iter().all(|c| c.re == 0.0 && c.im == 0.0)
    }
}

/// Degree-two polynomial in `xi` with exact coefficients. `quad[a][b]` is the
/// coefficient of `xi_a xi_b` and is only populated for `a <= b`.
#[derive(Debug, Clone, PartialEq)]
pub struct NullPolynomial {
    pub constant: ExactComplex,
    pub linear: Vec<ExactComplex>,
    pub quad: Vec<Vec<ExactComplex>>,
}

impl NullPolynomial {
    fn zeros(dim: usize) -> Self {
        Self {
            constant: ExactComplex::zero(),
            linear: vec![ExactComplex::zero(); dim],
            quad: vec![vec![ExactComplex::zero(); dim]; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.linear.len()
    }

    pub fn is_zero(&self) -> bool {
        self.constant.is_zero()
            && self.linear.iter().all(Zero::is_zero)
            && self.quad.iter().flatten().all(Zero::is_zero)
    }

    pub fn eval(&self, xi: &[f64]) -> Complex64 {
        let d = self.dim();
        assert_eq!(xi.len(), d, "frequency has wrong dimension");
        let mut acc = complex_to_f64(&self.constant);
        for a in 0..d {
            acc += complex_to_f64(&self.linear[a]) * xi[a];
            for b in a..d {
                acc += complex_to_f64(&self.quad[a][b]) * (xi[a] * xi[b]);
            }
        }
        acc
    }

    /// Human-readable nonzero monomials, axes numbered from 1.
    pub fn monomials(&self) -> Vec<(String, ExactComplex)> {
        let mut out = Vec::new();
        if !self.constant.is_zero() {
            out.push(("1".to_string(), self.constant.clone()));
        }
        for (a, c) in self.linear.iter().enumerate() {
            if !c.is_zero() {
                out.push((format!("xi{}", a + 1), c.clone()));
            }
        }
        for a in 0..self.dim() {
            for b in a..self.dim() {
                let c = &self.quad[a][b];
                if !c.is_zero() {
                    let name = if a == b {
                        format!("xi{}^2", a + 1)
                    } else {
                        format!("xi{} xi{}", a + 1, b + 1)
                    };
                    out.push((name, c.clone()));
                }
            }
        }
        out
    }
}

pub fn format_exact_complex(z: &ExactComplex) -> String {
    match (z.re.is_zero(), z.im.is_zero()) {
        (_, true) => format_exact(&z.re),
        (true, false) => format!("{}i", format_exact(&z.im)),
        (false, false) => {
            let sign = if z.im.is_negative() { '-' } else { '+' };
            format!("{} {} {}i", format_exact(&z.re), sign, format_exact(&z.im.abs()))
        }
    }
}

/// Multipliers replacing `d/dx_a` in the first and second factor of
/// equation `j` when the factors are free waves.
fn factor_symbols(m: &MassTriple, j: usize) -> (ExactComplex, ExactComplex) {
    let [m1, m2, m3] = m.exact().clone();
    match j {
        1 => (imag(-m2), imag(m3)),
        2 => (imag(m3), imag(-m1)),
        3 => (imag(m1), imag(m2)),
        _ => panic!("equation index {j} out of range"),
    }
}

/// Symbol `p_j(xi)` of equation `j` (1-based).
pub fn null_polynomial(
    c: &CoefficientTensor,
    m: &MassTriple,
    j: usize,
) -> Result<NullPolynomial, ProblemError> {
    if !(1..=3).contains(&j) {
        return Err(ProblemError::BadEquation(j));
    }
    let d = c.dim();
    let (x, y) = factor_symbols(m, j);
    let xy = &x * &y;
    let mut p = NullPolynomial::zeros(d);
    p.constant = c.get(j, 0, 0).clone();
    for a in 0..d {
        p.linear[a] = c.get(j, 0, a + 1) * &y + c.get(j, a + 1, 0) * &x;
        for b in 0..d {
            let (lo, hi) = (a.min(b), a.max(b));
            p.quad[lo][hi] = &p.quad[lo][hi] + c.get(j, a + 1, b + 1) * &xy;
        }
    }
    Ok(p)
}

pub fn null_polynomials(
    c: &CoefficientTensor,
    m: &MassTriple,
) -> Result<[NullPolynomial; 3], ProblemError> {
    Ok([
        null_polynomial(c, m, 1)?,
        null_polynomial(c, m, 2)?,
        null_polynomial(c, m, 3)?,
    ])
}

/// First coefficient condition that fails, if any.
pub fn null_violation(c: &CoefficientTensor, m: &MassTriple) -> Option<NullViolation> {
    let d = c.dim();
    for j in 1..=3 {
        let p = null_polynomial(c, m, j).expect("equation index in range");
        if !p.constant.is_zero() {
            return Some(NullViolation::ConstantTerm { equation: j });
        }
        for a in 0..d {
            if !p.linear[a].is_zero() {
                return Some(NullViolation::GaugeInconsistent { equation: j, axis: a + 1 });
            }
        }
        for a in 0..d {
            if !p.quad[a][a].is_zero() {
                return Some(NullViolation::DiagonalQuadratic { equation: j, axis: a + 1 });
            }
            for b in a + 1..d {
                if !p.quad[a][b].is_zero() {
                    return Some(NullViolation::SymmetricOffDiagonal {
                        equation: j,
                        a: a + 1,
                        b: b + 1,
                    });
                }
            }
        }
    }
    None
}

/// Exact null condition: all three symbols vanish identically.
pub fn is_null(c: &CoefficientTensor, m: &MassTriple) -> bool {
    null_violation(c, m).is_none()
}

/// Ordered list of axis pairs `(a, b)` with `a < b` (0-based), the index set
/// of the strong null forms.
pub fn axis_pairs(dim: usize) -> Vec<(usize, usize)> {
    (0..dim)
        .flat_map(|a| (a + 1..dim).map(move |b| (a, b)))
        .collect()
}

/// Weights of the null gauge forms `G_{j,a}` and strong null forms `Q_{ab}`
/// that reproduce a null nonlinearity.
#[derive(Debug, Clone, PartialEq)]
pub struct NullDecomposition {
    dim: usize,
    /// `gauge[j-1][a]` multiplies `G_{j,a}` (axis `a` 0-based).
    pub gauge: [Vec<ExactComplex>; 3],
    /// `strong[j-1][k]` multiplies `Q_{ab}` for the k-th pair of [`axis_pairs`].
    pub strong: [Vec<ExactComplex>; 3],
}

impl NullDecomposition {
    pub fn zeros(dim: usize) -> Self {
        let pairs = axis_pairs(dim).len();
        let g = || vec![ExactComplex::zero(); dim];
        let q = || vec![ExactComplex::zero(); pairs];
        Self {
            dim,
            gauge: [g(), g(), g()],
            strong: [q(), q(), q()],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.gauge.iter().flatten().all(Zero::is_zero)
            && self.strong.iter().flatten().all(Zero::is_zero)
    }
}

/// Mass weights `(w0, w1)` with `C[j][0][a] = w0 A` and `C[j][a][0] = w1 A`
/// for a unit-weight gauge form `G_{j,a}`.
fn gauge_slot_weights(m: &MassTriple, j: usize) -> (Exact, Exact) {
    let [m1, m2, m3] = m.exact().clone();
    match j {
        1 => (m2, m3),
        2 => (m3, m1),
        3 => (m1, -m2),
        _ => panic!("equation index {j} out of range"),
    }
}

pub fn decompose(
    c: &CoefficientTensor,
    m: &MassTriple,
) -> Result<NullDecomposition, ProblemError> {
    if let Some(v) = null_violation(c, m) {
        return Err(ProblemError::NotNull(v));
    }
    let d = c.dim();
    let mut dec = NullDecomposition::zeros(d);
    for j in 1..=3 {
        let (w0, w1) = gauge_slot_weights(m, j);
        for a in 0..d {
            let from_first = c.get(j, 0, a + 1) / real(w0.clone());
            let from_second = c.get(j, a + 1, 0) / real(w1.clone());
            if from_first != from_second {
                return Err(ProblemError::NotNull(NullViolation::GaugeInconsistent {
                    equation: j,
                    axis: a + 1,
                }));
            }
            dec.gauge[j - 1][a] = from_first;
        }
        for (k, (a, b)) in axis_pairs(d).into_iter().enumerate() {
            dec.strong[j - 1][k] = c.get(j, a + 1, b + 1).clone();
        }
    }
    Ok(dec)
}

pub fn expand(dec: &NullDecomposition, m: &MassTriple) -> CoefficientTensor {
    let d = dec.dim();
    let mut c = CoefficientTensor::zeros(d).expect("decomposition dimension is positive");
    for j in 1..=3 {
        let (w0, w1) = gauge_slot_weights(m, j);
        for a in 0..d {
            let weight = &dec.gauge[j - 1][a];
            c.add(j, 0, a + 1, &(weight * real(w0.clone()))).unwrap();
            c.add(j, a + 1, 0, &(weight * real(w1.clone()))).unwrap();
        }
        for (k, (a, b)) in axis_pairs(d).into_iter().enumerate() {
            let weight = &dec.strong[j - 1][k];
            c.add(j, a + 1, b + 1, weight).unwrap();
            c.add(j, b + 1, a + 1, &(-weight)).unwrap();
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q(n: i64) -> Exact {
        BigRational::from_integer(BigInt::from(n))
    }

    fn cq(re: i64, im: i64) -> ExactComplex {
        Complex::new(q(re), q(im))
    }

    #[test]
    fn resonance_examples() {
        assert!(check_resonance(&MassTriple::from_integers(1, 1, 2).unwrap()));
        assert!(check_resonance(&MassTriple::from_integers(1, 2, 3).unwrap()));
        assert!(!check_resonance(&MassTriple::from_integers(1, 1, 1).unwrap()));
        assert!(check_resonance(&MassTriple::from_integers(2, -1, 1).unwrap()));
    }

    #[test]
    fn zero_mass_rejected() {
        assert_eq!(
            MassTriple::from_integers(1, 0, 1),
            Err(ProblemError::ZeroMass { index: 2 })
        );
    }

    #[test]
    fn resonance_is_exact_for_decimals() {
        let m = MassTriple::new(
            parse_exact("0.1").unwrap(),
            parse_exact("0.2").unwrap(),
            parse_exact("0.3").unwrap(),
        )
        .unwrap();
        assert!(m.resonant());
        // 0.1 + 0.2 != 0.3 in binary floating point
        let approx = MassTriple::from_f64(0.1, 0.2, 0.3).unwrap();
        assert!(!approx.resonant());
    }

    #[test]
    fn parse_exact_forms() {
        assert_eq!(parse_exact("3").unwrap(), q(3));
        assert_eq!(
            parse_exact("-3/6").unwrap(),
            BigRational::new(BigInt::from(-1), BigInt::from(2))
        );
        assert_eq!(parse_exact("1.5e2").unwrap(), q(150));
        assert_eq!(
            parse_exact("-0.025").unwrap(),
            BigRational::new(BigInt::from(-1), BigInt::from(40))
        );
        assert!(parse_exact("1/0").is_err());
        assert!(parse_exact("abc").is_err());
        assert!(parse_exact(".").is_err());
        let x = parse_exact("22/7").unwrap();
        assert_eq!(parse_exact(&format_exact(&x)).unwrap(), x);
    }

    #[test]
    fn derivative_free_source_is_a_constant_symbol() {
        let c = CoefficientTensor::derivative_free(2).unwrap();
        let m = MassTriple::from_integers(1, 2, 3).unwrap();
        let p3 = null_polynomial(&c, &m, 3).unwrap();
        assert_eq!(p3.constant, cq(1, 0));
        assert!(p3.linear.iter().all(Zero::is_zero));
        assert!(p3.quad.iter().flatten().all(Zero::is_zero));
        assert!(!is_null(&c, &m));
        assert_eq!(
            decompose(&c, &m),
            Err(ProblemError::NotNull(NullViolation::ConstantTerm { equation: 1 }))
        );
    }

    #[test]
    fn single_gauge_form_is_null() {
        let m = MassTriple::from_integers(1, 2, 3).unwrap();
        let mut c = CoefficientTensor::zeros(1).unwrap();
        c.set(3, 0, 1, cq(1, 0)).unwrap();
        c.set(3, 1, 0, cq(-2, 0)).unwrap();
        assert!(null_polynomial(&c, &m, 3).unwrap().is_zero());
        assert!(is_null(&c, &m));
        let dec = decompose(&c, &m).unwrap();
        assert_eq!(dec.gauge[2], vec![cq(1, 0)]);
        assert!(dec.gauge[0][0].is_zero() && dec.gauge[1][0].is_zero());
        assert!(dec.strong.iter().all(Vec::is_empty));
    }

    #[test]
    fn expand_unit_gauge_form() {
        let m = MassTriple::from_integers(1, 2, 3).unwrap();
        let mut dec = NullDecomposition::zeros(1);
        dec.gauge[2][0] = cq(1, 0);
        let c = expand(&dec, &m);
        assert_eq!(c.get(3, 0, 1), &cq(1, 0));
        assert_eq!(c.get(3, 1, 0), &cq(-2, 0));
        assert_eq!(c.nonzero_entries().len(), 2);
    }

    #[test]
    fn strong_form_cancels_cross_term() {
        let m = MassTriple::from_integers(1, 2, 3).unwrap();
        let mut c = CoefficientTensor::zeros(2).unwrap();
        c.set(3, 1, 2, cq(1, 0)).unwrap();
        c.set(3, 2, 1, cq(-1, 0)).unwrap();
        assert!(null_polynomial(&c, &m, 3).unwrap().is_zero());
        let dec = decompose(&c, &m).unwrap();
        assert_eq!(dec.strong[2], vec![cq(1, 0)]);
    }

    #[test]
    fn zero_tensor_and_zero_decomposition() {
        let m = MassTriple::from_integers(1, 1, 2).unwrap();
        let c = CoefficientTensor::zeros(2).unwrap();
        assert!(is_null(&c, &m));
        assert!(decompose(&c, &m).unwrap().is_zero());
        assert!(expand(&NullDecomposition::zeros(2), &m).is_zero());
    }

    #[test]
    fn each_violation_kind_is_reported() {
        let m = MassTriple::from_integers(1, 2, 3).unwrap();
        let mut c = CoefficientTensor::zeros(2).unwrap();
        c.set(2, 2, 2, cq(0, 1)).unwrap();
        assert_eq!(
            null_violation(&c, &m),
            Some(NullViolation::DiagonalQuadratic { equation: 2, axis: 2 })
        );
        let mut c = CoefficientTensor::zeros(2).unwrap();
        c.set(1, 1, 2, cq(1, 0)).unwrap();
        c.set(1, 2, 1, cq(1, 0)).unwrap();
        assert_eq!(
            null_violation(&c, &m),
            Some(NullViolation::SymmetricOffDiagonal { equation: 1, a: 1, b: 2 })
        );
        let mut c = CoefficientTensor::zeros(1).unwrap();
        c.set(3, 0, 1, cq(1, 0)).unwrap();
        c.set(3, 1, 0, cq(2, 0)).unwrap();
        assert_eq!(
            null_violation(&c, &m),
            Some(NullViolation::GaugeInconsistent { equation: 3, axis: 1 })
        );
    }

    #[test]
    fn symbols_follow_conjugation_pattern() {
        // p1 = i (m3 C[1][0][a] - m2 C[1][a][0]) xi_a + m2 m3 C[1][a][b] xi_a xi_b
        let m = MassTriple::from_integers(1, 2, 3).unwrap();
        let mut c = CoefficientTensor::zeros(1).unwrap();
        c.set(1, 0, 1, cq(1, 0)).unwrap();
        c.set(1, 1, 1, cq(1, 0)).unwrap();
        let p1 = null_polynomial(&c, &m, 1).unwrap();
        assert_eq!(p1.linear[0], cq(0, 3));
        assert_eq!(p1.quad[0][0], cq(6, 0));
        // p2 = i (m3 C[2][a][0] - m1 C[2][0][a]) xi_a
        let mut c = CoefficientTensor::zeros(1).unwrap();
        c.set(2, 0, 1, cq(1, 0)).unwrap();
        let p2 = null_polynomial(&c, &m, 2).unwrap();
        assert_eq!(p2.linear[0], cq(0, -1));
        // p3 quadratic coefficient is -m1 m2
        let mut c = CoefficientTensor::zeros(1).unwrap();
        c.set(3, 1, 1, cq(1, 0)).unwrap();
        assert_eq!(null_polynomial(&c, &m, 3).unwrap().quad[0][0], cq(-2, 0));
    }

    #[test]
    fn bad_indices_rejected() {
        let mut c = CoefficientTensor::zeros(1).unwrap();
        assert_eq!(c.set(4, 0, 0, cq(1, 0)), Err(ProblemError::BadEquation(4)));
        assert_eq!(
            c.set(1, 2, 0, cq(1, 0)),
            Err(ProblemError::BadSlot { slot: 2, dim: 1 })
        );
        assert!(CoefficientTensor::zeros(0).is_err());
    }
}
