//! Time integration of the three-wave system with an integrating-factor
//! Runge-Kutta scheme.
//!
//! The run carries the profiles `v_j = U_{m_j}(-t) u_j` rather than the
//! fields, split into the pulled-back linear flow of the data and the
//! accumulated Duhamel part. Each step is taken in the frame of the linear
//! flow anchored at the start of the step (Lawson RK4); only the nonlinear
//! increment is pulled back and added to the Duhamel part. Differences of
//! profiles are then free of the roundoff of the (much larger) data, which
//! matters once weighted norms amplify it by `(L/2)^s`. A component whose
//! forcing vanishes keeps an exactly zero Duhamel part.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::ops::ControlFlow;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::nullforms::nonlinearity_spectra;
use crate::problem::{CoefficientTensor, MassTriple, NumericTensor};
use crate::spectral::{
    self, read_snapshot, write_snapshot, Field, Grid, SpectralError, Spectrum, StateTriple,
};
use crate::vectorfield::{self, gamma_norm, sigma_norm, GammaNormReport, BOUNDARY_THRESHOLD};

/// Weighted Sobolev order used to normalize initial data.
pub const DATA_NORM_ORDER: usize = 7;

/// Blow-up is suspected once the sup norm exceeds this multiple of its
/// initial value.
pub const BLOWUP_FACTOR: f64 = 1e6;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("unknown initial-data family {0:?}")]
    UnknownFamily(String),
    #[error("blow-up suspected at t = {t}")]
    BlowUpSuspected { t: f64, last_finite: Box<StateTriple> },
    #[error("snapshot i/o failed: {0}")]
    Io(#[from] io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub dim: usize,
    pub n: usize,
    pub length: f64,
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid, SpectralError> {
        Grid::new(self.dim, self.n, self.length)
    }
}

/// Named families of initial data.
#[derive(Clone, Debug, PartialEq)]
pub enum InitialDataSpec {
    /// `phi_j = c_j exp(-|x|^2 / (2 w^2))` with `c_j = exp(i phase_j)`.
    Gaussian { width: f64, phases: [f64; 3] },
    /// Per-component centre, width, wave vector and phase.
    ModulatedGaussian {
        centers: [[f64; 2]; 3],
        widths: [f64; 3],
        wavevectors: [[f64; 2]; 3],
        phases: [f64; 3],
    },
    /// Independent band-limited complex Gaussian fields (modes with
    /// `|k_a| <= band` on every axis, all modes when `None`).
    Random { seed: u64, band: Option<usize> },
    /// Three snapshot records (equations 1, 2, 3) in one file, used verbatim.
    Snapshot { path: PathBuf },
}

impl InitialDataSpec {
    pub fn family(&self) -> &'static str {
        match self {
            InitialDataSpec::Gaussian { .. } => "gaussian",
            InitialDataSpec::ModulatedGaussian { .. } => "modulated-gaussian",
            InitialDataSpec::Random { .. } => "random",
            InitialDataSpec::Snapshot { .. } => "snapshot",
        }
    }
}

impl Default for InitialDataSpec {
    fn default() -> Self {
        InitialDataSpec::Gaussian { width: 1.0, phases: [0.0, 0.0, 0.0] }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub masses: MassTriple,
    pub coefficients: CoefficientTensor,
    pub grid: GridSpec,
    pub data: InitialDataSpec,
    /// `||phi||_{Sigma^7}`; ignored for snapshot data.
    pub epsilon: f64,
    pub dt: f64,
    pub t_final: f64,
    /// Parabolic regularization strength, `0` for the true system.
    pub nu: f64,
    pub dealias: bool,
    /// Steps between stored snapshots.
    pub cadence: usize,
    /// Order of the Gamma-norm report computed at each snapshot.
    pub norm_order: usize,
    /// Stop the run when a pullback puts more than the threshold mass in the
    /// outer shell of the box.
    pub stop_on_boundary: bool,
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |msg: String| Err(SolverError::InvalidConfig(msg));
        if self.coefficients.dim() != self.grid.dim {
            return bad(format!(
                "coefficient dimension {} differs from grid dimension {}",
                self.coefficients.dim(),
                self.grid.dim
            ));
        }
        if !(0.0..=1.0).contains(&self.nu) {
            return bad(format!("nu = {} outside [0, 1]", self.nu));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad(format!("dt = {} must be positive", self.dt));
        }
        if !(self.t_final.is_finite() && self.t_final >= 0.0) {
            return bad(format!("t_final = {} must be non-negative", self.t_final));
        }
        if !matches!(self.data, InitialDataSpec::Snapshot { .. })
            && !(self.epsilon.is_finite() && self.epsilon > 0.0)
        {
            return bad(format!("epsilon = {} must be positive", self.epsilon));
        }
        if self.cadence == 0 {
            return bad("cadence must be at least one step".into());
        }
        Ok(())
    }

    /// Number of steps to reach `t_final` (rounded to the nearest step).
    pub fn total_steps(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }
}

/// Build the initial state at `t = 0`, scaled so that `||phi||_{Sigma^7} = eps`
/// (root-sum-square over the three components).
pub fn initial_data(spec: &InitialDataSpec, grid: &Grid, eps: f64) -> Result<StateTriple, SolverError> {
    let raw = match spec {
        InitialDataSpec::Snapshot { path } => {
            let state = read_state_file(path, Some(grid))?;
            return Ok(state);
        }
        InitialDataSpec::Gaussian { width, phases } => [0, 1, 2].map(|j| {
            spectral::modulated_gaussian(grid, &[0.0, 0.0], *width, &[0.0, 0.0])
                .scale(Complex64::from_polar(1.0, phases[j]))
        }),
        InitialDataSpec::ModulatedGaussian { centers, widths, wavevectors, phases } => [0, 1, 2].map(|j| {
            spectral::modulated_gaussian(grid, &centers[j], widths[j], &wavevectors[j])
                .scale(Complex64::from_polar(1.0, phases[j]))
        }),
        InitialDataSpec::Random { seed, band } => {
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            [(); 3].map(|_| spectral::random_field(grid, &mut rng, *band))
        }
    };
    if !(eps.is_finite() && eps > 0.0) {
        return Err(SolverError::InvalidConfig(format!("epsilon = {eps} must be positive")));
    }
    let norm = raw.iter().map(|f| sigma_norm(f, DATA_NORM_ORDER).powi(2)).sum::<f64>().sqrt();
    let fields = raw.map(|f| f.scale_real(eps / norm));
    Ok(StateTriple::new(fields, 0.0)?)
}

/// `||phi||_{Sigma^s}` of a triple, root-sum-square over components.
pub fn data_norm(state: &StateTriple, s: usize) -> f64 {
    state.fields().iter().map(|f| sigma_norm(f, s).powi(2)).sum::<f64>().sqrt()
}

/// Write a state as three consecutive snapshot records.
pub fn write_state<W: Write>(w: &mut W, state: &StateTriple) -> io::Result<()> {
    for (j, f) in state.fields().iter().enumerate() {
        write_snapshot(w, f, state.t, j as u32 + 1)?;
    }
    Ok(())
}

/// Read three consecutive snapshot records, checking equation order and a
/// common time stamp.
pub fn read_state<R: Read>(r: &mut R, grid: Option<&Grid>) -> Result<StateTriple, SolverError> {
    let mut fields = Vec::with_capacity(3);
    let mut t = 0.0_f64;
    let mut shared = grid.cloned();
    for j in 1..=3u32 {
        let (header, field) = read_snapshot(r, shared.as_ref())?;
        if header.equation != j {
            return Err(SolverError::InvalidConfig(format!(
                "snapshot record {j} carries equation index {}",
                header.equation
            )));
        }
        if j > 1 && header.t.to_bits() != t.to_bits() {
            return Err(SolverError::InvalidConfig("snapshot records disagree on t".into()));
        }
        t = header.t;
        shared = Some(field.grid().clone());
        fields.push(field);
    }
    let [a, b, c]: [Field; 3] = fields.try_into().expect("three records");
    Ok(StateTriple::new([a, b, c], t)?)
}

pub fn write_state_file(path: &Path, state: &StateTriple) -> io::Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_state(&mut w, state)?;
    w.flush()
}

pub fn read_state_file(path: &Path, grid: Option<&Grid>) -> Result<StateTriple, SolverError> {
    read_state(&mut BufReader::new(File::open(path)?), grid)
}

/// Precomputed multipliers for one step size.
pub struct Integrator {
    grid: Grid,
    coefficients: NumericTensor,
    dealias: bool,
    dt: f64,
    full: [Vec<Complex64>; 3],
    half: [Vec<Complex64>; 3],
}

fn linear_multiplier(grid: &Grid, mass: f64, nu: f64, h: f64) -> Vec<Complex64> {
    grid.xi_squared()
        .into_iter()
        .map(|k2| (Complex64::new(-nu * k2, -k2 / (2.0 * mass)) * h).exp())
        .collect()
}

fn scaled_sum(out: &mut Spectrum, terms: &[(Complex64, &Spectrum)]) {
    for (idx, z) in out.values_mut().iter_mut().enumerate() {
        *z = terms.iter().map(|(c, s)| c * s.values()[idx]).sum();
    }
}

impl Integrator {
    pub fn new(config: &SolverConfig, grid: &Grid, dt: f64) -> Result<Self, SolverError> {
        let m = config.masses.as_f64();
        if m.contains(&0.0) {
            return Err(SpectralError::ZeroMass.into());
        }
        let table = |h: f64| [0, 1, 2].map(|j| linear_multiplier(grid, m[j], config.nu, h));
        Ok(Self {
            grid: grid.clone(),
            coefficients: config.coefficients.to_numeric(),
            dealias: config.dealias,
            dt,
            full: table(dt),
            half: table(dt / 2.0),
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// `-i F(u)` on the frequency side.
    fn rhs(&self, u: &[Spectrum; 3]) -> [Spectrum; 3] {
        let mut f = nonlinearity_spectra(&self.coefficients, u, self.dealias);
        for s in f.iter_mut() {
            s.values_mut().iter_mut().for_each(|z| *z = Complex64::new(z.im, -z.re));
        }
        f
    }

    fn propagate(table: &[Complex64], s: &Spectrum) -> Spectrum {
        let mut out = s.clone();
        out.apply_table(table);
        out
    }

    /// One step on spectra.
    pub fn step_spectra(&self, u: &[Spectrum; 3]) -> [Spectrum; 3] {
        let delta = self.increment(u);
        let one = Complex64::new(1.0, 0.0);
        [0, 1, 2].map(|j| {
            let mut s = u[j].clone();
            scaled_sum(&mut s, &[(one, &Self::propagate(&self.full[j], &u[j])), (one, &delta[j])]);
            s
        })
    }

    /// `u(t+h) - E(h) u(t)`: the nonlinear part of one step.
    pub fn increment(&self, u: &[Spectrum; 3]) -> [Spectrum; 3] {
        let h = Complex64::new(self.dt, 0.0);
        let h2 = h / 2.0;
        let one = Complex64::new(1.0, 0.0);
        let e_half_u: Vec<Spectrum> = (0..3).map(|j| Self::propagate(&self.half[j], &u[j])).collect();
        let e_full_u: Vec<Spectrum> = (0..3).map(|j| Self::propagate(&self.full[j], &u[j])).collect();

        let k1 = self.rhs(u);
        let stage2 = [0, 1, 2].map(|j| {
            let mut s = u[j].clone();
            scaled_sum(&mut s, &[(one, &u[j]), (h2, &k1[j])]);
            s.apply_table(&self.half[j]);
            s
        });
        let k2 = self.rhs(&stage2);
        let stage3 = [0, 1, 2].map(|j| {
            let mut s = u[j].clone();
            scaled_sum(&mut s, &[(one, &e_half_u[j]), (h2, &k2[j])]);
            s
        });
        let k3 = self.rhs(&stage3);
        let stage4 = [0, 1, 2].map(|j| {
            let e_k3 = Self::propagate(&self.half[j], &k3[j]);
            let mut s = u[j].clone();
            scaled_sum(&mut s, &[(one, &e_full_u[j]), (h, &e_k3)]);
            s
        });
        let k4 = self.rhs(&stage4);
        [0, 1, 2].map(|j| {
            let e_k1 = Self::propagate(&self.full[j], &k1[j]);
            let mut mid = k2[j].clone();
            scaled_sum(&mut mid, &[(one, &k2[j]), (one, &k3[j])]);
            mid.apply_table(&self.half[j]);
            let mut s = u[j].clone();
            let sixth = h / 6.0;
            scaled_sum(&mut s, &[(sixth, &e_k1), (sixth * 2.0, &mid), (sixth, &k4[j])]);
            s
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }
}

/// One integrating-factor RK4 step of size `dt` from `state`.
pub fn step(state: &StateTriple, dt: f64, config: &SolverConfig) -> Result<StateTriple, SolverError> {
    if !state.is_finite() {
        return Err(SolverError::BlowUpSuspected { t: state.t, last_finite: Box::new(state.clone()) });
    }
    let integrator = Integrator::new(config, state.grid(), dt)?;
    let spectra = state.fields().clone().map(|f| f.to_spectrum());
    let next = integrator.step_spectra(&spectra).map(Spectrum::into_field);
    let out = StateTriple::new(next, state.t + dt)?;
    if !out.is_finite() {
        return Err(SolverError::BlowUpSuspected { t: out.t, last_finite: Box::new(state.clone()) });
    }
    Ok(out)
}

/// Cheap per-step diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub t: f64,
    pub l2: f64,
    pub sup: f64,
}

impl StepRecord {
    pub const CSV_HEADER: &'static str = "step,t,l2,sup";

    pub fn csv_row(&self) -> String {
        format!("{},{:.6},{:.12e},{:.12e}", self.step, self.t, self.l2, self.sup)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    Completed,
    BlowUpSuspected { t: f64 },
    BoundaryContaminated { t: f64 },
    /// The observer asked to stop.
    Stopped { t: f64 },
}

impl Outcome {
    pub fn label(&self) -> &'static str {
        match self {
            Outcome::Completed => "completed",
            Outcome::BlowUpSuspected { .. } => "blow-up-suspected",
            Outcome::BoundaryContaminated { .. } => "boundary-contaminated",
            Outcome::Stopped { .. } => "stopped",
        }
    }
}

/// A stored snapshot with its Gamma-norm report.
#[derive(Clone, Debug)]
pub struct Sample {
    pub state: StateTriple,
    /// `U_{m_j}(-t) u_j(t)` minus the linear flow of the data, on the
    /// frequency side: `-i ∫ U(-τ) F_j(τ) dτ` when `nu = 0`.
    pub duhamel: [Spectrum; 3],
    pub gamma: GammaNormReport,
}

impl Sample {
    /// A sample rebuilt from a stored state and the run's initial state
    /// (inviscid runs only; the Duhamel part is recovered by subtraction).
    pub fn from_state(
        state: StateTriple,
        initial: &StateTriple,
        masses: &MassTriple,
        norm_order: usize,
    ) -> Result<Self, SolverError> {
        let mut duhamel = profile_of(&state, masses)?;
        let base = profile_of(initial, masses)?;
        for (d, b) in duhamel.iter_mut().zip(&base) {
            d.values_mut().iter_mut().zip(b.values()).for_each(|(x, y)| *x -= y);
        }
        let gamma = gamma_norm(&state, masses, norm_order)?;
        Ok(Self { state, duhamel, gamma })
    }
}

pub(crate) fn profile_of(state: &StateTriple, masses: &MassTriple) -> Result<[Spectrum; 3], SpectralError> {
    let m = masses.as_f64();
    let f = state.fields();
    let one = |j: usize| -> Result<Spectrum, SpectralError> {
        let mut s = f[j].to_spectrum();
        if state.t != 0.0 {
            s.apply_table(&spectral::free_multiplier(f[j].grid(), m[j], -state.t)?);
        }
        Ok(s)
    };
    Ok([one(0)?, one(1)?, one(2)?])
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
    pub steps: Vec<StepRecord>,
    pub outcome: Outcome,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.state.t).collect()
    }

    pub fn last(&self) -> &StateTriple {
        &self.samples.last().expect("trajectory holds the initial state").state
    }

    pub fn completed(&self) -> bool {
        self.outcome == Outcome::Completed
    }
}

/// What the observer sees at each stored snapshot.
pub struct Observation<'a> {
    pub sample: &'a Sample,
    pub index: usize,
}

/// Integrate from `config`'s initial data to `t_final`.
pub fn evolve(config: &SolverConfig) -> Result<Trajectory, SolverError> {
    evolve_observed(config, |_| ControlFlow::Continue(()))
}

/// [`evolve`], calling `observer` at every stored snapshot (including the
/// initial one); `ControlFlow::Break` ends the run with [`Outcome::Stopped`].
pub fn evolve_observed(
    config: &SolverConfig,
    observer: impl FnMut(Observation<'_>) -> ControlFlow<()>,
) -> Result<Trajectory, SolverError> {
    config.validate()?;
    let grid = config.grid.build()?;
    let initial = initial_data(&config.data, &grid, config.epsilon)?;
    evolve_from(config, initial, observer)
}

/// Integrate from an explicit state for `config.total_steps()` steps.
pub fn evolve_from(
    config: &SolverConfig,
    initial: StateTriple,
    mut observer: impl FnMut(Observation<'_>) -> ControlFlow<()>,
) -> Result<Trajectory, SolverError> {
    config.validate()?;
    let grid = initial.grid().clone();
    let integrator = Integrator::new(config, &grid, config.dt)?;
    let m = config.masses.as_f64();
    let t0 = initial.t;
    let sup0 = initial.sup_norm();
    let mut traj = Trajectory { samples: Vec::new(), steps: Vec::new(), outcome: Outcome::Completed };

    let forward = |t: f64| -> Result<[Vec<Complex64>; 3], SpectralError> {
        Ok([
            spectral::free_multiplier(&grid, m[0], t)?,
            spectral::free_multiplier(&grid, m[1], t)?,
            spectral::free_multiplier(&grid, m[2], t)?,
        ])
    };
    let damping: Option<[Vec<f64>; 3]> = (config.nu > 0.0).then(|| {
        let d: Vec<f64> = grid.xi_squared().into_iter().map(|k2| (-config.nu * k2 * config.dt).exp()).collect();
        [d.clone(), d.clone(), d]
    });
    let fields_of = |v: &[Spectrum; 3], table: &[Vec<Complex64>; 3]| -> [Spectrum; 3] {
        [0, 1, 2].map(|j| {
            let mut s = v[j].clone();
            s.apply_table(&table[j]);
            s
        })
    };

    let record = |traj: &mut Trajectory, state: StateTriple, duhamel: [Spectrum; 3]| -> Result<bool, SolverError> {
        let gamma = gamma_norm(&state, &config.masses, config.norm_order)?;
        let contaminated = gamma.boundary_mass > BOUNDARY_THRESHOLD;
        traj.samples.push(Sample { state, duhamel, gamma });
        Ok(contaminated)
    };
    let add = |a: &[Spectrum; 3], b: &[Spectrum; 3]| -> [Spectrum; 3] {
        [0, 1, 2].map(|j| {
            let mut s = a[j].clone();
            s.values_mut().iter_mut().zip(b[j].values()).for_each(|(x, y)| *x += y);
            s
        })
    };
    traj.steps.push(StepRecord { step: 0, t: t0, l2: initial.norm_l2(), sup: sup0 });
    let mut linear = profile_of(&initial, &config.masses)?;
    let mut duhamel = [0, 1, 2].map(|_| Field::zeros(&grid).to_spectrum());
    let mut contaminated = record(&mut traj, initial, duhamel.clone())?;
    let mut stop = observer(Observation { sample: traj.samples.last().unwrap(), index: 0 }).is_break();
    let total = config.total_steps();
    let mut spectra = fields_of(&linear, &forward(t0)?);

    for n in 1..=total {
        if stop || (contaminated && config.stop_on_boundary) {
            break;
        }
        let t = t0 + n as f64 * config.dt;
        let delta = integrator.increment(&spectra);
        let next_table = forward(t)?;
        let mut next_linear = linear.clone();
        let mut next_duhamel = duhamel.clone();
        for j in 0..3 {
            if let Some(damp) = damping.as_ref().map(|d| &d[j]) {
                for s in [&mut next_linear[j], &mut next_duhamel[j]] {
                    s.values_mut().iter_mut().zip(damp).for_each(|(z, d)| *z *= d);
                }
            }
            let back = next_table[j].iter().map(|z| z.conj());
            for ((z, b), d) in next_duhamel[j].values_mut().iter_mut().zip(back).zip(delta[j].values()) {
                *z += b * d;
            }
        }
        let next = fields_of(&add(&next_linear, &next_duhamel), &next_table);
        let state = StateTriple::new(next.clone().map(Spectrum::into_field), t)?;
        let sup = state.sup_norm();
        if !state.is_finite() || sup > BLOWUP_FACTOR * sup0 {
            let prev_state = StateTriple::new(spectra.map(Spectrum::into_field), t - config.dt)?;
            traj.steps.push(StepRecord { step: n, t, l2: state.norm_l2(), sup });
            traj.samples.push(Sample {
                gamma: gamma_norm(&prev_state, &config.masses, 0)?,
                state: prev_state,
                duhamel,
            });
            traj.outcome = Outcome::BlowUpSuspected { t };
            return Ok(traj);
        }
        traj.steps.push(StepRecord { step: n, t, l2: state.norm_l2(), sup });
        spectra = next;
        linear = next_linear;
        duhamel = next_duhamel;
        if n % config.cadence == 0 || n == total {
            contaminated = record(&mut traj, state, duhamel.clone())?;
            let index = traj.samples.len() - 1;
            stop = observer(Observation { sample: &traj.samples[index], index }).is_break();
            if stop {
                traj.outcome = Outcome::Stopped { t };
            }
        }
    }
    if contaminated && traj.outcome == Outcome::Completed {
        let t = traj.samples.last().map(|s| s.state.t).unwrap_or(t0);
        traj.outcome = Outcome::BoundaryContaminated { t };
    }
    Ok(traj)
}

/// `||u(t+D) - U(D) u(t) + i (D/2)(U(D) F(t) + F(t+D))||`, summed over the
/// three components in root-sum-square: the trapezoidal Duhamel defect
/// between two states of the same run.
pub fn duhamel_residual(a: &StateTriple, b: &StateTriple, config: &SolverConfig) -> Result<f64, SolverError> {
    let delta = b.t - a.t;
    let m = config.masses.as_f64();
    let c = config.coefficients.to_numeric();
    let fa = crate::nullforms::eval_nonlinearity(&c, a, config.dealias);
    let fb = crate::nullforms::eval_nonlinearity(&c, b, config.dealias);
    let mut total = 0.0;
    for j in 0..3 {
        let flow = |f: &Field| -> Result<Field, SolverError> {
            if config.nu == 0.0 {
                Ok(spectral::free_propagate(f, m[j], delta)?)
            } else {
                let mut s = f.to_spectrum();
                s.apply_table(&linear_multiplier(f.grid(), m[j], config.nu, delta));
                Ok(s.into_field())
            }
        };
        let integral = flow(&fa[j])?.add(&fb[j]).scale(Complex64::new(0.0, delta / 2.0));
        let defect = b.fields()[j].sub(&flow(&a.fields()[j])?).add(&integral);
        total += defect.norm_l2().powi(2);
    }
    Ok(total.sqrt())
}

/// Maximum boundary-mass fraction over the three pullbacks of a state.
pub fn state_boundary_mass(state: &StateTriple, masses: &MassTriple) -> Result<f64, SpectralError> {
    let m = masses.as_f64();
    let mut worst: f64 = 0.0;
    for (f, &mj) in state.fields().iter().zip(&m) {
        worst = worst.max(vectorfield::boundary_mass(&vectorfield::pullback(f, mj, state.t)?));
    }
    Ok(worst)
}
