//! Periodic grids, complex grid functions and Fourier multipliers.
//!
//! The box is `[-L/2, L/2)^d` with `N` points per axis, stored row-major with
//! the last axis fastest. Spectra use the unnormalized forward DFT in FFT
//! order; the frequency of index `k` is `2 pi k' / L` with
//! `k' in [-N/2, N/2)`.

use std::f64::consts::PI;
use std::fmt;
use std::io::{self, Read, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("axis {axis} out of range for a {dim}-dimensional grid")]
    BadAxis { axis: usize, dim: usize },
    #[error("mass must be nonzero")]
    ZeroMass,
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("field contains non-finite values")]
    NonFinite,
}

struct GridInner {
    dim: usize,
    n: usize,
    length: f64,
    coords: Vec<f64>,
    freqs: Vec<f64>,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

/// Uniform periodic grid in one or two dimensions. Cloning is cheap.
#[derive(Clone)]
pub struct Grid {
    inner: Arc<GridInner>,
}

impl fmt::Debug for Grid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("dim", &self.dim())
            .field("n", &self.n())
            .field("length", &self.length())
            .finish()
    }
}

impl PartialEq for Grid {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.dim() == other.dim()
                && self.n() == other.n()
                && self.length().to_bits() == other.length().to_bits())
    }
}

impl Grid {
    pub fn new(dim: usize, n: usize, length: f64) -> Result<Self, SpectralError> {
        if !(1..=2).contains(&dim) {
            return Err(SpectralError::InvalidGrid(format!(
                "dimension {dim} unsupported (expected 1 or 2)"
            )));
        }
        if n < 8 || !n.is_power_of_two() {
            return Err(SpectralError::InvalidGrid(format!(
                "points per axis {n} must be a power of two >= 8"
            )));
        }
        if !(length.is_finite() && length > 0.0) {
            return Err(SpectralError::InvalidGrid(format!("box length {length} must be positive")));
        }
        let h = length / n as f64;
        let coords = (0..n).map(|i| -0.5 * length + i as f64 * h).collect();
        let freqs = (0..n)
            .map(|k| {
                let signed = if k < n / 2 { k as i64 } else { k as i64 - n as i64 };
                2.0 * PI * signed as f64 / length
            })
            .collect();
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        Ok(Self {
            inner: Arc::new(GridInner {
                dim,
                n,
                length,
                coords,
                freqs,
                forward,
                inverse,
            }),
        })
    }

    pub fn dim(&self) -> usize {
        self.inner.dim
    }

    pub fn n(&self) -> usize {
        self.inner.n
    }

    pub fn length(&self) -> f64 {
        self.inner.length
    }

    pub fn spacing(&self) -> f64 {
        self.inner.length / self.inner.n as f64
    }

    /// Total number of grid points `N^d`.
    pub fn len(&self) -> usize {
        self.inner.n.pow(self.inner.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Volume element `h^d`.
    pub fn cell_volume(&self) -> f64 {
        self.spacing().powi(self.dim() as i32)
    }

    /// Box coordinates along one axis, `-L/2 + i h`.
    pub fn coords(&self) -> &[f64] {
        &self.inner.coords
    }

    /// Angular frequencies along one axis in FFT order.
    pub fn freqs(&self) -> &[f64] {
        &self.inner.freqs
    }

    /// Signed integer mode number of FFT index `k`.
    pub fn mode(&self, k: usize) -> i64 {
        let n = self.n();
        if k < n / 2 {
            k as i64
        } else {
            k as i64 - n as i64
        }
    }

    pub fn check_axis(&self, axis: usize) -> Result<(), SpectralError> {
        if axis < self.dim() {
            Ok(())
        } else {
            Err(SpectralError::BadAxis { axis, dim: self.dim() })
        }
    }

    /// Multi-index `(i_0, .., i_{d-1})` of flat index `idx`.
    pub fn unflatten(&self, idx: usize) -> [usize; 2] {
        let n = self.n();
        if self.dim() == 1 {
            [idx, 0]
        } else {
            [idx / n, idx % n]
        }
    }

    /// Coordinates of flat index `idx`; unused trailing entries are zero.
    pub fn point(&self, idx: usize) -> [f64; 2] {
        let [i, j] = self.unflatten(idx);
        let c = self.coords();
        if self.dim() == 1 {
            [c[i], 0.0]
        } else {
            [c[i], c[j]]
        }
    }

    /// Values of `x_axis` at every grid point.
    pub fn coordinate_field(&self, axis: usize) -> Result<Field, SpectralError> {
        self.check_axis(axis)?;
        Ok(Field::from_fn(self, |x| Complex64::new(x[axis], 0.0)))
    }

    fn fft_rows(&self, data: &mut [Complex64], inverse: bool) {
        let plan = if inverse { &self.inner.inverse } else { &self.inner.forward };
        let mut scratch = vec![Complex64::new(0.0, 0.0); plan.get_inplace_scratch_len()];
        plan.process_with_scratch(data, &mut scratch);
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.n();
        self.fft_rows(data, inverse);
        if self.dim() == 2 {
            let mut t = vec![Complex64::new(0.0, 0.0); data.len()];
            transpose(data, &mut t, n);
            self.fft_rows(&mut t, inverse);
            transpose(&t, data, n);
        }
        if inverse {
            let scale = 1.0 / self.len() as f64;
            data.iter_mut().for_each(|z| *z *= scale);
        }
    }

    /// `|xi|^2` at every spectral index.
    pub fn xi_squared(&self) -> Vec<f64> {
        let f = self.freqs();
        (0..self.len())
            .map(|idx| {
                let [i, j] = self.unflatten(idx);
                if self.dim() == 1 {
                    f[i] * f[i]
                } else {
                    f[i] * f[i] + f[j] * f[j]
                }
            })
            .collect()
    }
}

fn transpose(src: &[Complex64], dst: &mut [Complex64], n: usize) {
    const BLOCK: usize = 32;
    for bi in (0..n).step_by(BLOCK) {
        for bj in (0..n).step_by(BLOCK) {
            for i in bi..(bi + BLOCK).min(n) {
                for j in bj..(bj + BLOCK).min(n) {
                    dst[j * n + i] = src[i * n + j];
                }
            }
        }
    }
}

/// Complex values on a [`Grid`].
#[derive(Clone, Debug, PartialEq)]
pub struct Field {
    grid: Grid,
    data: Vec<Complex64>,
}

impl Field {
    pub fn zeros(grid: &Grid) -> Self {
        Self {
            grid: grid.clone(),
            data: vec![Complex64::new(0.0, 0.0); grid.len()],
        }
    }

    pub fn from_vec(grid: &Grid, data: Vec<Complex64>) -> Self {
        assert_eq!(data.len(), grid.len(), "field data length does not match grid");
        Self { grid: grid.clone(), data }
    }

    pub fn from_fn(grid: &Grid, mut f: impl FnMut(&[f64]) -> Complex64) -> Self {
        let d = grid.dim();
        let data = (0..grid.len()).map(|idx| f(&grid.point(idx)[..d])).collect();
        Self { grid: grid.clone(), data }
    }

    pub fn constant(grid: &Grid, value: Complex64) -> Self {
        Self {
            grid: grid.clone(),
            data: vec![value; grid.len()],
        }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.data
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn ensure_finite(&self) -> Result<(), SpectralError> {
        if self.is_finite() {
            Ok(())
        } else {
            Err(SpectralError::NonFinite)
        }
    }

    fn same_grid(&self, other: &Field) {
        assert!(self.grid == other.grid, "fields live on different grids");
    }

    pub fn norm_l2(&self) -> f64 {
        (self.grid.cell_volume() * self.data.iter().map(|z| z.norm_sqr()).sum::<f64>()).sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// Grid-weighted inner product `<self, other> = int conj(self) other`.
    pub fn inner(&self, other: &Field) -> Complex64 {
        self.same_grid(other);
        let s: Complex64 = self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum();
        s * self.grid.cell_volume()
    }

    pub fn conj(&self) -> Field {
        self.map(|z| z.conj())
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Field {
        Field {
            grid: self.grid.clone(),
            data: self.data.iter().map(|&z| f(z)).collect(),
        }
    }

    pub fn scale(&self, s: Complex64) -> Field {
        self.map(|z| z * s)
    }

    pub fn scale_real(&self, s: f64) -> Field {
        self.map(|z| z * s)
    }

    pub fn zip_map(&self, other: &Field, f: impl Fn(Complex64, Complex64) -> Complex64) -> Field {
        self.same_grid(other);
        Field {
            grid: self.grid.clone(),
            data: self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect(),
        }
    }

    /// Pointwise product.
    pub fn mul(&self, other: &Field) -> Field {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn add(&self, other: &Field) -> Field {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Field) -> Field {
        self.zip_map(other, |a, b| a - b)
    }

    /// `self += s * other`.
    pub fn axpy(&mut self, s: Complex64, other: &Field) {
        self.same_grid(other);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    /// Multiply by a real function of the point.
    pub fn weighted(&self, w: impl Fn(&[f64]) -> f64) -> Field {
        let d = self.grid.dim();
        Field {
            grid: self.grid.clone(),
            data: self
                .data
                .iter()
                .enumerate()
                .map(|(idx, z)| z * w(&self.grid.point(idx)[..d]))
                .collect(),
        }
    }

    pub fn to_spectrum(&self) -> Spectrum {
        let mut data = self.data.clone();
        self.grid.transform(&mut data, false);
        Spectrum { grid: self.grid.clone(), data }
    }

    /// `||self - other|| / max(||self||, ||other||)`, zero when both vanish.
    pub fn relative_distance(&self, other: &Field) -> f64 {
        let diff = self.sub(other).norm_l2();
        let scale = self.norm_l2().max(other.norm_l2());
        if scale == 0.0 {
            0.0
        } else {
            diff / scale
        }
    }
}

/// DFT coefficients of a [`Field`] in FFT order.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    grid: Grid,
    data: Vec<Complex64>,
}

impl Spectrum {
    pub fn from_vec(grid: &Grid, data: Vec<Complex64>) -> Self {
        assert_eq!(data.len(), grid.len(), "spectrum length does not match grid");
        Self { grid: grid.clone(), data }
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.data
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn to_field(&self) -> Field {
        let mut data = self.data.clone();
        self.grid.transform(&mut data, true);
        Field { grid: self.grid.clone(), data }
    }

    pub fn into_field(mut self) -> Field {
        self.grid.transform(&mut self.data, true);
        Field { grid: self.grid, data: self.data }
    }

    /// L2 norm of the underlying field, computed on the frequency side.
    pub fn norm_l2(&self) -> f64 {
        let g = &self.grid;
        let sum: f64 = self.data.iter().map(|z| z.norm_sqr()).sum();
        (g.cell_volume() * sum / g.len() as f64).sqrt()
    }

    /// Multiply by `m(xi)` where `m` sees the frequency vector.
    pub fn apply(&mut self, m: impl Fn(&[f64]) -> Complex64) {
        let g = self.grid.clone();
        let f = g.freqs();
        for (idx, z) in self.data.iter_mut().enumerate() {
            let [i, j] = g.unflatten(idx);
            let xi = [f[i], f[j]];
            *z *= m(&xi[..g.dim()]);
        }
    }

    /// Multiply by a function of the single frequency component `xi_axis`.
    pub fn apply_axis(&mut self, axis: usize, m: impl Fn(f64) -> Complex64) {
        let g = self.grid.clone();
        let table: Vec<Complex64> = g.freqs().iter().map(|&k| m(k)).collect();
        for (idx, z) in self.data.iter_mut().enumerate() {
            *z *= table[g.unflatten(idx)[axis]];
        }
    }

    /// Multiply elementwise by a precomputed table in FFT order.
    pub fn apply_table(&mut self, table: &[Complex64]) {
        assert_eq!(table.len(), self.data.len());
        for (z, m) in self.data.iter_mut().zip(table) {
            *z *= m;
        }
    }

    /// Zero every mode with some index `|k'| > N/3`.
    pub fn dealias(&mut self) {
        let g = self.grid.clone();
        let cutoff = (g.n() / 3) as i64;
        for (idx, z) in self.data.iter_mut().enumerate() {
            let [i, j] = g.unflatten(idx);
            let outside = g.mode(i).abs() > cutoff || (g.dim() == 2 && g.mode(j).abs() > cutoff);
            if outside {
                *z = Complex64::new(0.0, 0.0);
            }
        }
    }
}

fn with_spectrum(f: &Field, op: impl FnOnce(&mut Spectrum)) -> Field {
    let mut s = f.to_spectrum();
    op(&mut s);
    s.into_field()
}

/// `d/dx_axis` as the multiplier `i xi_axis`.
pub fn derivative(f: &Field, axis: usize) -> Result<Field, SpectralError> {
    f.grid().check_axis(axis)?;
    Ok(with_spectrum(f, |s| s.apply_axis(axis, |k| Complex64::new(0.0, k))))
}

/// Multiplier of the free flow `exp(i t Delta / (2m))` over time `dt`.
pub fn free_multiplier(grid: &Grid, mass: f64, dt: f64) -> Result<Vec<Complex64>, SpectralError> {
    if mass == 0.0 {
        return Err(SpectralError::ZeroMass);
    }
    Ok(grid
        .xi_squared()
        .into_iter()
        .map(|k2| Complex64::from_polar(1.0, -dt * k2 / (2.0 * mass)))
        .collect())
}

/// Free Schrodinger evolution `U_m(dt) f`.
pub fn free_propagate(f: &Field, mass: f64, dt: f64) -> Result<Field, SpectralError> {
    let table = free_multiplier(f.grid(), mass, dt)?;
    if dt == 0.0 {
        return Ok(f.clone());
    }
    Ok(with_spectrum(f, |s| s.apply_table(&table)))
}

fn sgn(k: f64) -> f64 {
    if k > 0.0 {
        1.0
    } else if k < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Hilbert transform along one axis, multiplier `-i sgn(xi_axis)`.
pub fn hilbert(f: &Field, axis: usize) -> Result<Field, SpectralError> {
    f.grid().check_axis(axis)?;
    Ok(with_spectrum(f, |s| s.apply_axis(axis, |k| Complex64::new(0.0, -sgn(k)))))
}

/// `|d/dx_axis|^{1/2}`, multiplier `|xi_axis|^{1/2}`.
pub fn half_derivative(f: &Field, axis: usize) -> Result<Field, SpectralError> {
    f.grid().check_axis(axis)?;
    Ok(with_spectrum(f, |s| s.apply_axis(axis, |k| Complex64::new(k.abs().sqrt(), 0.0))))
}

/// `|d/dx_axis|`, multiplier `|xi_axis|`.
pub fn abs_derivative(f: &Field, axis: usize) -> Result<Field, SpectralError> {
    f.grid().check_axis(axis)?;
    Ok(with_spectrum(f, |s| s.apply_axis(axis, |k| Complex64::new(k.abs(), 0.0))))
}

/// Two-thirds rule projection.
pub fn dealias(f: &Field) -> Field {
    with_spectrum(f, Spectrum::dealias)
}

/// The three components `(u1, u2, u3)` at time `t` on one grid.
#[derive(Clone, Debug, PartialEq)]
pub struct StateTriple {
    fields: [Field; 3],
    pub t: f64,
}

impl StateTriple {
    pub fn new(fields: [Field; 3], t: f64) -> Result<Self, SpectralError> {
        if fields[1].grid() != fields[0].grid() || fields[2].grid() != fields[0].grid() {
            return Err(SpectralError::GridMismatch);
        }
        Ok(Self { fields, t })
    }

    pub fn zeros(grid: &Grid, t: f64) -> Self {
        Self {
            fields: [Field::zeros(grid), Field::zeros(grid), Field::zeros(grid)],
            t,
        }
    }

    pub fn grid(&self) -> &Grid {
        self.fields[0].grid()
    }

    pub fn fields(&self) -> &[Field; 3] {
        &self.fields
    }

    /// Component `j` (1-based).
    pub fn component(&self, j: usize) -> &Field {
        &self.fields[j - 1]
    }

    pub fn into_fields(self) -> [Field; 3] {
        self.fields
    }

    pub fn scale_real(&self, s: f64) -> Self {
        Self {
            fields: self.fields.clone().map(|f| f.scale_real(s)),
            t: self.t,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.fields.iter().all(Field::is_finite)
    }

    pub fn norm_l2(&self) -> f64 {
        self.fields.iter().map(|f| f.norm_l2().powi(2)).sum::<f64>().sqrt()
    }

    pub fn sup_norm(&self) -> f64 {
        self.fields.iter().map(Field::sup_norm).fold(0.0, f64::max)
    }
}

/// Header of the binary snapshot record.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SnapshotHeader {
    pub dim: u32,
    pub n: u32,
    pub length: f64,
    pub t: f64,
    pub equation: u32,
}

/// Size in bytes of the header: `d:u32, N:u32, L:f64, t:f64, equation:u32`.
pub const SNAPSHOT_HEADER_BYTES: usize = 28;

/// Write `header` then `N^d` little-endian `(re, im)` double pairs, row-major.
pub fn write_snapshot<W: Write>(
    w: &mut W,
    field: &Field,
    t: f64,
    equation: u32,
) -> io::Result<()> {
    let g = field.grid();
    w.write_all(&(g.dim() as u32).to_le_bytes())?;
    w.write_all(&(g.n() as u32).to_le_bytes())?;
    w.write_all(&g.length().to_le_bytes())?;
    w.write_all(&t.to_le_bytes())?;
    w.write_all(&equation.to_le_bytes())?;
    let mut buf = Vec::with_capacity(16 * g.len());
    for z in field.values() {
        buf.extend_from_slice(&z.re.to_le_bytes());
        buf.extend_from_slice(&z.im.to_le_bytes());
    }
    w.write_all(&buf)
}

pub fn read_snapshot_header<R: Read>(r: &mut R) -> io::Result<SnapshotHeader> {
    let mut b = [0u8; SNAPSHOT_HEADER_BYTES];
    r.read_exact(&mut b)?;
    let u32_at = |o: usize| u32::from_le_bytes(b[o..o + 4].try_into().unwrap());
    let f64_at = |o: usize| f64::from_le_bytes(b[o..o + 8].try_into().unwrap());
    Ok(SnapshotHeader {
        dim: u32_at(0),
        n: u32_at(4),
        length: f64_at(8),
        t: f64_at(16),
        equation: u32_at(24),
    })
}

/// Read one snapshot record. When `grid` is given it is reused if it matches
/// the header, otherwise a new grid is built from the header.
pub fn read_snapshot<R: Read>(
    r: &mut R,
    grid: Option<&Grid>,
) -> io::Result<(SnapshotHeader, Field)> {
    let header = read_snapshot_header(r)?;
    let bad = |e: SpectralError| io::Error::new(io::ErrorKind::InvalidData, e.to_string());
    let grid = match grid {
        Some(g)
            if g.dim() as u32 == header.dim
                && g.n() as u32 == header.n
                && g.length().to_bits() == header.length.to_bits() =>
        {
            g.clone()
        }
        _ => Grid::new(header.dim as usize, header.n as usize, header.length).map_err(bad)?,
    };
    let mut buf = vec![0u8; 16 * grid.len()];
    r.read_exact(&mut buf)?;
    let data = buf
        .chunks_exact(16)
        .map(|c| {
            Complex64::new(
                f64::from_le_bytes(c[..8].try_into().unwrap()),
                f64::from_le_bytes(c[8..].try_into().unwrap()),
            )
        })
        .collect();
    Ok((header, Field::from_vec(&grid, data)))
}

/// Complex white noise, or noise restricted to `|k'| <= band` on every axis.
pub fn random_field<R: Rng + ?Sized>(grid: &Grid, rng: &mut R, band: Option<usize>) -> Field {
    let mut draw = || Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
    match band {
        None => Field::from_vec(grid, (0..grid.len()).map(|_| draw()).collect()),
        Some(b) => {
            let data = (0..grid.len())
                .map(|idx| {
                    let [i, j] = grid.unflatten(idx);
                    let inside = grid.mode(i).unsigned_abs() as usize <= b
                        && (grid.dim() == 1 || grid.mode(j).unsigned_abs() as usize <= b);
                    if inside {
                        draw()
                    } else {
                        Complex64::new(0.0, 0.0)
                    }
                })
                .collect();
            Spectrum::from_vec(grid, data).into_field()
        }
    }
}

/// `exp(-|x - c|^2 / (2 w^2) + i k.x)`; `center` and `wavevector` need at
/// least `d` entries.
pub fn modulated_gaussian(grid: &Grid, center: &[f64], width: f64, wavevector: &[f64]) -> Field {
    Field::from_fn(grid, |x| {
        let mut r2 = 0.0;
        let mut phase = 0.0;
        for a in 0..x.len() {
            r2 += (x[a] - center[a]).powi(2);
            phase += wavevector[a] * x[a];
        }
        Complex64::from_polar((-r2 / (2.0 * width * width)).exp(), phase)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn grid_validation() {
        assert!(Grid::new(3, 16, 1.0).is_err());
        assert!(Grid::new(1, 12, 1.0).is_err());
        assert!(Grid::new(1, 4, 1.0).is_err());
        assert!(Grid::new(2, 16, 0.0).is_err());
        let g = Grid::new(1, 8, 8.0).unwrap();
        assert_eq!(g.coords()[0], -4.0);
        assert_eq!(g.mode(4), -4);
        assert!(close(g.freqs()[1], 2.0 * PI / 8.0, 1e-15));
    }

    #[test]
    fn transform_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for dim in [1, 2] {
            let g = Grid::new(dim, 32, 10.0).unwrap();
            let f = random_field(&g, &mut rng, None);
            let back = f.to_spectrum().into_field();
            assert!(back.relative_distance(&f) < 1e-12);
        }
    }

    #[test]
    fn parseval() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for dim in [1, 2] {
            let g = Grid::new(dim, 64, 7.0).unwrap();
            let f = random_field(&g, &mut rng, None);
            assert!(close(f.norm_l2(), f.to_spectrum().norm_l2(), 1e-12));
        }
    }

    #[test]
    fn derivative_of_plane_wave_and_constant() {
        let l = 2.0 * PI * 3.0;
        let g = Grid::new(1, 64, l).unwrap();
        let k = 2.0 * PI / l;
        let f = Field::from_fn(&g, |x| Complex64::from_polar(1.0, k * x[0]));
        let df = derivative(&f, 0).unwrap();
        let expect = f.scale(Complex64::new(0.0, k));
        assert!(df.relative_distance(&expect) < 1e-12);
        let c = Field::constant(&g, Complex64::new(2.0, -1.0));
        assert!(derivative(&c, 0).unwrap().sup_norm() < 1e-14);
        assert_eq!(
            derivative(&c, 1),
            Err(SpectralError::BadAxis { axis: 1, dim: 1 })
        );
    }

    #[test]
    fn derivative_matches_finite_differences() {
        // Centered differences are O(h^2); the spectral result is exact to
        // rounding, so the gap must shrink by ~4 per halving of h.
        let mut gaps = Vec::new();
        for n in [128, 256] {
            let g = Grid::new(1, n, 40.0).unwrap();
            let f = Field::from_fn(&g, |x| Complex64::new((-x[0] * x[0] / 2.0).exp(), 0.0));
            let df = derivative(&f, 0).unwrap();
            let h = g.spacing();
            let v = f.values();
            let fd: Vec<Complex64> = (0..n)
                .map(|i| (v[(i + 1) % n] - v[(i + n - 1) % n]) / (2.0 * h))
                .collect();
            let fd = Field::from_vec(&g, fd);
            gaps.push(df.sub(&fd).sup_norm());
        }
        let ratio = gaps[0] / gaps[1];
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn free_flow_identity_unitarity_and_group_law() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = Grid::new(2, 32, 12.0).unwrap();
        let f = random_field(&g, &mut rng, None);
        assert_eq!(free_propagate(&f, 1.0, 0.0).unwrap(), f);
        let a = free_propagate(&f, 1.5, 0.7).unwrap();
        assert!(close(a.norm_l2(), f.norm_l2(), 1e-12));
        let ab = free_propagate(&a, 1.5, 0.4).unwrap();
        let direct = free_propagate(&f, 1.5, 1.1).unwrap();
        assert!(ab.relative_distance(&direct) < 1e-12);
        let back = free_propagate(&a, 1.5, -0.7).unwrap();
        assert!(back.relative_distance(&f) < 1e-12);
        assert_eq!(free_propagate(&f, 0.0, 1.0), Err(SpectralError::ZeroMass));
    }

    #[test]
    fn free_gaussian_peak_follows_closed_form() {
        // |U(t) e^{-x^2/2}| peaks at (1 + t^2)^{-d/4} for m = 1.
        for (dim, n, l) in [(1usize, 2048usize, 400.0), (2, 256, 120.0)] {
            let g = Grid::new(dim, n, l).unwrap();
            let f = Field::from_fn(&g, |x| {
                Complex64::new((-x.iter().map(|v| v * v).sum::<f64>() / 2.0).exp(), 0.0)
            });
            for t in [0.5, 2.0, 5.0] {
                let u = free_propagate(&f, 1.0, t).unwrap();
                let expect = (1.0 + t * t).powf(-(dim as f64) / 4.0);
                assert!(close(u.sup_norm(), expect, 1e-10), "d={dim} t={t}");
            }
        }
    }

    #[test]
    fn hilbert_on_trig_functions() {
        let l = 20.0;
        let g = Grid::new(2, 32, l).unwrap();
        let k = 2.0 * PI / l;
        for axis in 0..2 {
            let c = Field::from_fn(&g, |x| Complex64::new((k * x[axis]).cos(), 0.0));
            let s = Field::from_fn(&g, |x| Complex64::new((k * x[axis]).sin(), 0.0));
            assert!(hilbert(&c, axis).unwrap().relative_distance(&s) < 1e-12);
            assert!(hilbert(&s, axis).unwrap().relative_distance(&c.scale_real(-1.0)) < 1e-12);
        }
    }

    #[test]
    fn hilbert_squares_to_minus_identity_off_zero_mode() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g = Grid::new(2, 32, 9.0).unwrap();
        let mut s = random_field(&g, &mut rng, Some(10)).to_spectrum();
        s.apply_axis(1, |k| Complex64::new(if k == 0.0 { 0.0 } else { 1.0 }, 0.0));
        let f = s.into_field();
        let hh = hilbert(&hilbert(&f, 1).unwrap(), 1).unwrap();
        assert!(hh.relative_distance(&f.scale_real(-1.0)) < 1e-12);
        assert!(hilbert(&f, 0).unwrap().norm_l2() <= f.norm_l2() * (1.0 + 1e-12));
    }

    #[test]
    fn half_derivative_properties() {
        let l = 2.0 * PI * 5.0;
        let g = Grid::new(1, 64, l).unwrap();
        let c = Field::constant(&g, Complex64::new(1.0, 1.0));
        assert!(half_derivative(&c, 0).unwrap().sup_norm() < 1e-14);
        let k = 2.0 * PI / l;
        let e = Field::from_fn(&g, |x| Complex64::from_polar(1.0, k * x[0]));
        let he = half_derivative(&e, 0).unwrap();
        assert!(he.relative_distance(&e.scale_real(k.sqrt())) < 1e-12);

        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g2 = Grid::new(2, 32, 11.0).unwrap();
        let f = random_field(&g2, &mut rng, Some(10));
        for axis in 0..2 {
            let twice = half_derivative(&half_derivative(&f, axis).unwrap(), axis).unwrap();
            let h_d = hilbert(&derivative(&f, axis).unwrap(), axis).unwrap();
            assert!(twice.relative_distance(&abs_derivative(&f, axis).unwrap()) < 1e-12);
            assert!(twice.relative_distance(&h_d) < 1e-12);
        }
    }

    #[test]
    fn multipliers_commute() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let g = Grid::new(2, 32, 11.0).unwrap();
        let f = random_field(&g, &mut rng, Some(10));
        let a = hilbert(&derivative(&free_propagate(&f, 2.0, 0.3).unwrap(), 0).unwrap(), 1).unwrap();
        let b = free_propagate(&derivative(&hilbert(&f, 1).unwrap(), 0).unwrap(), 2.0, 0.3).unwrap();
        assert!(a.relative_distance(&b) < 1e-12);
    }

    #[test]
    fn dealias_band_limited_and_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let g = Grid::new(2, 48usize.next_power_of_two(), 10.0).unwrap();
        let band = g.n() / 3;
        let f = random_field(&g, &mut rng, Some(band));
        assert!(dealias(&f).relative_distance(&f) < 1e-12);
        let w = random_field(&g, &mut rng, None);
        let once = dealias(&w);
        assert_eq!(dealias(&once).relative_distance(&once) < 1e-14, true);
    }

    #[test]
    fn dealiased_product_matches_refined_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for dim in [1, 2] {
            let n = 32;
            let l = 10.0;
            let g = Grid::new(dim, n, l).unwrap();
            let fine = Grid::new(dim, 2 * n, l).unwrap();
            let band = n / 3;
            let f = random_field(&g, &mut rng, Some(band));
            let h = random_field(&g, &mut rng, Some(band));
            let coarse = dealias(&f.mul(&h));

            // Oracle: zero-pad both spectra onto the 2N grid, multiply there
            // (no aliasing up to 2N/3 < N), then keep only |k'| <= N/3.
            let pad = |s: &Spectrum| {
                let mut out = vec![Complex64::new(0.0, 0.0); fine.len()];
                let scale = (fine.len() / g.len()) as f64;
                for (idx, z) in s.values().iter().enumerate() {
                    let [i, j] = g.unflatten(idx);
                    let wrap = |k: i64| (k.rem_euclid(2 * n as i64)) as usize;
                    let fi = wrap(g.mode(i));
                    let fj = wrap(g.mode(j));
                    let fidx = if dim == 1 { fi } else { fi * 2 * n + fj };
                    out[fidx] = z * scale;
                }
                Spectrum::from_vec(&fine, out).into_field()
            };
            let prod = pad(&f.to_spectrum()).mul(&pad(&h.to_spectrum())).to_spectrum();
            let mut restricted = vec![Complex64::new(0.0, 0.0); g.len()];
            for (idx, z) in restricted.iter_mut().enumerate() {
                let [i, j] = g.unflatten(idx);
                let (ki, kj) = (g.mode(i), g.mode(j));
                if ki.abs() as usize > band || (dim == 2 && kj.abs() as usize > band) {
                    continue;
                }
                let wrap = |k: i64| (k.rem_euclid(2 * n as i64)) as usize;
                let fidx = if dim == 1 { wrap(ki) } else { wrap(ki) * 2 * n + wrap(kj) };
                *z = prod.values()[fidx] / (fine.len() / g.len()) as f64;
            }
            let oracle = Spectrum::from_vec(&g, restricted).into_field();
            assert!(coarse.relative_distance(&oracle) < 1e-12, "dim {dim}");
        }
    }

    #[test]
    fn snapshot_round_trip_is_bit_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let g = Grid::new(2, 16, 3.5).unwrap();
        let f = random_field(&g, &mut rng, None);
        let mut buf = Vec::new();
        write_snapshot(&mut buf, &f, 1.25, 2).unwrap();
        assert_eq!(buf.len(), SNAPSHOT_HEADER_BYTES + 16 * g.len());
        let (h, back) = read_snapshot(&mut buf.as_slice(), None).unwrap();
        assert_eq!(h, SnapshotHeader { dim: 2, n: 16, length: 3.5, t: 1.25, equation: 2 });
        assert!(back
            .values()
            .iter()
            .zip(f.values())
            .all(|(a, b)| a.re.to_bits() == b.re.to_bits() && a.im.to_bits() == b.im.to_bits()));
    }

    #[test]
    fn state_triple_requires_one_grid() {
        let a = Grid::new(1, 8, 1.0).unwrap();
        let b = Grid::new(1, 16, 1.0).unwrap();
        let r = StateTriple::new([Field::zeros(&a), Field::zeros(&b), Field::zeros(&a)], 0.0);
        assert_eq!(r.unwrap_err(), SpectralError::GridMismatch);
    }
}
