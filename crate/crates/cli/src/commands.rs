//! The subcommands. Each returns a [`Report`] whose exit code follows the
//! CLI convention: 0 success, 3 a `[checks]` threshold failed, 4 the run
//! behind the result was interrupted or contaminated.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use qdnls::diagnostics::{
    decay_fit, lifespan_scan, nonlinearity_decay_contrast, nonlinearity_series, scattering_profile, sup_series,
    mass_series, DecayFit, LifespanCause, Summary,
};
use qdnls::nullforms::{identity_sweep, standard_cases};
use qdnls::problem::{
    axis_pairs, decompose as decompose_tensor, expand, format_exact_complex, null_polynomials, null_violation,
    CoefficientTensor, MassTriple, NullDecomposition,
};
use qdnls::solver::{evolve, SolverConfig, Trajectory};
use qdnls::spectral::Grid;
use qdnls::nullforms::IdentityResidual;

use crate::rundir::{load_run, write_run, write_text};
use crate::scenario::{masses_from, Checks, DecayQuantity, Diagnostic, Scenario};
use crate::{CliError, EXIT_CHECK_FAILED, EXIT_INTERRUPTED};

/// What a command printed and how it ended.
#[derive(Debug, Clone, Default)]
pub struct Report {
    pub text: String,
    /// Violated `[checks]` thresholds (or identity ceilings).
    pub failures: Vec<String>,
    /// Set when the underlying run did not complete cleanly.
    pub interrupted: Option<String>,
    pub files: Vec<PathBuf>,
}

impl Report {
    pub fn exit_code(&self) -> i32 {
        if self.interrupted.is_some() {
            EXIT_INTERRUPTED
        } else if !self.failures.is_empty() {
            EXIT_CHECK_FAILED
        } else {
            0
        }
    }

    fn line(&mut self, s: impl AsRef<str>) {
        self.text.push_str(s.as_ref());
        self.text.push('\n');
    }

    fn merge(&mut self, other: Report) {
        self.text.push_str(&other.text);
        self.failures.extend(other.failures);
        if self.interrupted.is_none() {
            self.interrupted = other.interrupted;
        }
        self.files.extend(other.files);
    }

    fn write(&mut self, path: PathBuf, text: &str) -> Result<(), CliError> {
        write_text(&path, text)?;
        self.files.push(path);
        Ok(())
    }
}

/// A loaded scenario plus where it came from and where output goes.
#[derive(Debug, Clone)]
pub struct Context {
    pub scenario: Scenario,
    /// Directory of the scenario file; relative snapshot paths resolve here.
    pub base: PathBuf,
    pub out: PathBuf,
}

impl Context {
    /// `out` and `seed` override the scenario's own values.
    pub fn load(config: &Path, out: Option<&Path>, seed: Option<u64>) -> Result<Self, CliError> {
        let scenario = Scenario::load(config)?;
        let base = config.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(Self::new(scenario, base, out, seed))
    }

    pub fn new(mut scenario: Scenario, base: PathBuf, out: Option<&Path>, seed: Option<u64>) -> Self {
        if let Some(o) = out {
            scenario.output = o.to_path_buf();
        }
        if let Some(s) = seed {
            scenario.seed = s;
        }
        let out = scenario.output.clone();
        Self { scenario, base, out }
    }

    fn ensure_out(&self) -> Result<(), CliError> {
        fs::create_dir_all(&self.out).map_err(|e| CliError::io(&self.out, e))
    }
}

fn fmt_exact_masses(m: &MassTriple) -> String {
    m.exact().iter().map(qdnls::problem::format_exact).collect::<Vec<_>>().join(", ")
}

fn certificate(dec: &NullDecomposition) -> Vec<String> {
    let mut out = Vec::new();
    for j in 0..3 {
        for (a, w) in dec.gauge[j].iter().enumerate() {
            if *w != Default::default() {
                out.push(format!("  G[{},{}] weight {}", j + 1, a + 1, format_exact_complex(w)));
            }
        }
        for ((a, b), w) in axis_pairs(dec.dim()).into_iter().zip(&dec.strong[j]) {
            if *w != Default::default() {
                out.push(format!("  Q[{}; {},{}] weight {}", j + 1, a + 1, b + 1, format_exact_complex(w)));
            }
        }
    }
    out
}

fn polynomial_lines(c: &CoefficientTensor, m: &MassTriple) -> Result<Vec<String>, CliError> {
    let mut lines = Vec::new();
    for (j, p) in null_polynomials(c, m)?.iter().enumerate() {
        let terms: Vec<String> = p
            .monomials()
            .into_iter()
            .map(|(name, coef)| {
                let coef = format_exact_complex(&coef);
                if name == "1" {
                    format!("({coef})")
                } else {
                    format!("({coef}) {name}")
                }
            })
            .collect();
        let body = if terms.is_empty() { "0".to_string() } else { terms.join(" + ") };
        lines.push(format!("p{} = {body}", j + 1));
    }
    Ok(lines)
}

/// Verdict, the nonzero monomials of the three symbols and, for null
/// tensors, the decomposition certificate.
pub fn check_null(ctx: &Context) -> Result<Report, CliError> {
    let sc = &ctx.scenario;
    let m = sc.mass_triple()?;
    let c = sc.tensor()?;
    let mut r = Report::default();
    r.line(format!(
        "masses: {} ({}resonant), d = {}",
        fmt_exact_masses(&m),
        if m.resonant() { "" } else { "non-" },
        c.dim()
    ));
    for l in polynomial_lines(&c, &m)? {
        r.line(l);
    }
    match null_violation(&c, &m) {
        Some(v) => r.line(format!("NOT NULL: {v}")),
        None => {
            r.line("NULL");
            let dec = decompose_tensor(&c, &m)?;
            let cert = certificate(&dec);
            r.line(format!("certificate ({} forms):", cert.len()));
            for l in cert {
                r.line(l);
            }
            let round_trip = expand(&dec, &m) == c;
            r.line(format!("expansion reproduces the tensor: {}", if round_trip { "yes" } else { "NO" }));
            if !round_trip {
                r.failures.push("decomposition does not expand back to the tensor".into());
            }
        }
    }
    Ok(r)
}

/// The decomposition certificate alone; non-null tensors are an error.
pub fn decompose(ctx: &Context) -> Result<Report, CliError> {
    let m = ctx.scenario.mass_triple()?;
    let c = ctx.scenario.tensor()?;
    let dec = decompose_tensor(&c, &m)?;
    let mut r = Report::default();
    let cert = certificate(&dec);
    r.line(format!("{} null forms", cert.len()));
    for l in cert {
        r.line(l);
    }
    Ok(r)
}

fn check_max(r: &mut Report, name: &str, value: Option<f64>, limit: Option<f64>) {
    if let Some(limit) = limit {
        match value {
            Some(v) if v <= limit => {}
            Some(v) => r.failures.push(format!("{name} = {v} exceeds {limit}")),
            None => r.failures.push(format!("{name} unavailable (limit {limit})")),
        }
    }
}

fn check_min(r: &mut Report, name: &str, value: Option<f64>, limit: Option<f64>) {
    if let Some(limit) = limit {
        match value {
            Some(v) if v >= limit => {}
            Some(v) => r.failures.push(format!("{name} = {v} is below {limit}")),
            None => r.failures.push(format!("{name} unavailable (limit {limit})")),
        }
    }
}

fn check_fit(r: &mut Report, fit: &DecayFit, checks: &Checks) {
    check_max(r, &format!("{} slope", fit.quantity), Some(fit.slope), checks.slope_max);
    check_min(r, &format!("{} slope", fit.quantity), Some(fit.slope), checks.slope_min);
    check_max(r, &format!("{} slope error", fit.quantity), Some(fit.slope_se), checks.slope_se_max);
}

/// One gnuplot data block (`index` separated by two blank lines).
fn dat_block(out: &mut String, title: &str, columns: &str, rows: &[(f64, f64)]) {
    if !out.is_empty() {
        out.push_str("\n\n");
    }
    let _ = writeln!(out, "# {title}\n# {columns}");
    for (t, v) in rows {
        let _ = writeln!(out, "{t} {v:e}");
    }
}

fn fit_line(fit: &DecayFit, series: &[(f64, f64)]) -> Vec<(f64, f64)> {
    series.iter().filter(|p| p.0 >= fit.t_min && p.0 <= fit.t_max).map(|p| (p.0, fit.predict(p.0))).collect()
}

fn note_outcome(r: &mut Report, traj: &Trajectory) {
    if !traj.completed() {
        r.interrupted = Some(traj.outcome.label().to_string());
    }
}

/// Power-law fit of the scenario's decay quantity on a trajectory.
pub fn analyze_decay(sc: &Scenario, cfg: &SolverConfig, traj: &Trajectory, dir: &Path) -> Result<Report, CliError> {
    let d = &sc.decay;
    let (name, series) = match d.quantity {
        DecayQuantity::Sup => ("sup", sup_series(traj)),
        DecayQuantity::Nonlinearity => ("nonlinearity", nonlinearity_series(traj, cfg, d.order)?),
    };
    let fit = decay_fit(name, &series, (d.window[0], d.window[1]))?;
    let mut r = Report::default();
    note_outcome(&mut r, traj);
    r.line(format!("{name} decay over [{}, {}]: slope {:.4} ± {:.4}", fit.t_min, fit.t_max, fit.slope, fit.slope_se));

    let mut csv = String::from("t,value\n");
    for (t, v) in &series {
        let _ = writeln!(csv, "{t},{v:e}");
    }
    let mut summary = Summary::default();
    summary.push("quantity", name);
    summary.push("outcome", traj.outcome.label());
    summary.push_fit(&fit);
    let mut dat = String::new();
    dat_block(&mut dat, name, "t value", &series);
    dat_block(&mut dat, &format!("{name} fit"), "t fitted", &fit_line(&fit, &series));
    r.write(dir.join("decay.csv"), &csv)?;
    r.write(dir.join("decay-summary.csv"), &summary.to_csv())?;
    r.write(dir.join("decay.dat"), &dat)?;
    check_fit(&mut r, &fit, &sc.checks);
    Ok(r)
}

/// Convergence of the pulled-back profile on a trajectory.
pub fn analyze_scatter(sc: &Scenario, cfg: &SolverConfig, traj: &Trajectory, dir: &Path) -> Result<Report, CliError> {
    let s = &sc.scatter;
    let rep = scattering_profile(traj, cfg, s.s, (s.window[0], s.window[1]))?;
    let mut r = Report::default();
    note_outcome(&mut r, traj);
    if rep.contaminated && r.interrupted.is_none() {
        r.interrupted = Some("boundary-contaminated".into());
    }
    let final_ratio = rep.final_decade_ratio(s.decade_end);
    let drift_ratio = rep.drift_decade_ratio(s.decade_end);
    let mut summary = Summary::default();
    summary.push("outcome", traj.outcome.label());
    summary.push("norm", format!("sigma{}", s.s - 1));
    match &rep.fit {
        Some(f) => {
            summary.push_fit(f);
            r.line(format!("convergence exponent {:.4} ± {:.4}", f.slope, f.slope_se));
        }
        None => r.line("convergence exponent: none (series vanishes or window too thin)"),
    }
    if let Some(f) = &rep.drift_fit {
        summary.push_fit(f);
    }
    let show = |x: Option<f64>| x.map_or("none".to_string(), |v| format!("{v:.4e}"));
    summary.push("final_decade_ratio", show(final_ratio));
    summary.push("drift_decade_ratio", show(drift_ratio));
    summary.push("contaminated", rep.contaminated);
    r.line(format!("final-decade ratio {} / drift decade ratio {}", show(final_ratio), show(drift_ratio)));

    let mut dat = String::new();
    dat_block(&mut dat, "convergence", "t distance", &rep.series);
    dat_block(&mut dat, "dyadic drift", "t distance", &rep.drift);
    dat_block(&mut dat, "duhamel tail", "t bound", &rep.duhamel_tail);
    r.write(dir.join("scatter.csv"), &rep.csv())?;
    r.write(dir.join("scatter-summary.csv"), &summary.to_csv())?;
    r.write(dir.join("scatter.dat"), &dat)?;
    let checks = &sc.checks;
    check_max(&mut r, "convergence exponent", rep.fit.as_ref().map(|f| f.slope), checks.convergence_exponent_max);
    check_max(&mut r, "final-decade ratio", final_ratio, checks.final_decade_ratio_max);
    check_min(&mut r, "drift decade ratio", drift_ratio, checks.drift_decade_ratio_min);
    Ok(r)
}

fn run_summary(traj: &Trajectory) -> Summary {
    let mut s = Summary::default();
    s.push("outcome", traj.outcome.label());
    s.push("t_end", traj.last().t);
    s.push("samples", traj.samples.len());
    s.push("steps", traj.steps.len());
    let mass = mass_series(traj);
    let m0 = mass[0].1;
    let drift = mass.iter().map(|p| (p.1 - m0).abs()).fold(0.0, f64::max);
    s.push("l2_max_relative_change", if m0 > 0.0 { drift / m0 } else { 0.0 });
    let g0 = traj.samples[0].gamma.aggregate;
    let gdrift = traj.samples.iter().map(|x| (x.gamma.aggregate - g0).abs()).fold(0.0, f64::max);
    s.push("gamma_max_relative_change", if g0 > 0.0 { gdrift / g0 } else { 0.0 });
    s.push("final_sup", traj.last().sup_norm());
    s
}

/// Integrate the scenario, write the run directory and run the requested
/// diagnostics on the result.
pub fn simulate(ctx: &Context) -> Result<Report, CliError> {
    let sc = &ctx.scenario;
    let cfg = sc.solver_config(&ctx.base)?;
    ctx.ensure_out()?;
    let traj = evolve(&cfg)?;
    let manifest = write_run(&ctx.out, sc, &traj)?;
    let mut r = Report::default();
    note_outcome(&mut r, &traj);
    r.line(format!(
        "{}: {} at t = {} ({} snapshots) -> {}",
        sc.name,
        manifest.outcome,
        traj.last().t,
        manifest.samples.len(),
        ctx.out.display()
    ));
    let summary = run_summary(&traj);
    r.write(ctx.out.join("summary.csv"), &summary.to_csv())?;
    let mut dat = String::new();
    dat_block(&mut dat, "l2 norm", "t l2", &mass_series(&traj));
    dat_block(&mut dat, "sup norm", "t sup", &sup_series(&traj));
    let gamma: Vec<(f64, f64)> = traj.samples.iter().map(|s| (s.state.t, s.gamma.aggregate)).collect();
    dat_block(&mut dat, "gamma aggregate", "t norm", &gamma);
    r.write(ctx.out.join("run.dat"), &dat)?;
    for d in &sc.diagnostics {
        let sub = match d {
            Diagnostic::Decay => analyze_decay(sc, &cfg, &traj, &ctx.out)?,
            Diagnostic::Scatter => analyze_scatter(sc, &cfg, &traj, &ctx.out)?,
        };
        r.merge(sub);
    }
    Ok(r)
}

pub fn decay(ctx: &Context) -> Result<Report, CliError> {
    let run = load_run(&ctx.out)?;
    let mut sc = run.scenario.clone();
    sc.decay = ctx.scenario.decay.clone();
    sc.checks = ctx.scenario.checks.clone();
    analyze_decay(&sc, &run.config, &run.trajectory, &run.dir)
}

pub fn scatter(ctx: &Context) -> Result<Report, CliError> {
    let run = load_run(&ctx.out)?;
    let mut sc = run.scenario.clone();
    sc.scatter = ctx.scenario.scatter.clone();
    sc.checks = ctx.scenario.checks.clone();
    analyze_scatter(&sc, &run.config, &run.trajectory, &run.dir)
}

/// Null versus non-null decay of the nonlinearity's Γ-norms from two runs.
pub fn contrast(ctx: &Context) -> Result<Report, CliError> {
    let spec = ctx
        .scenario
        .contrast
        .as_ref()
        .ok_or_else(|| CliError::Config("scenario has no [contrast] section".into()))?;
    let null = load_run(&spec.null)?;
    let nonnull = load_run(&spec.nonnull)?;
    let c = nonlinearity_decay_contrast(
        (&null.config, &null.trajectory),
        (&nonnull.config, &nonnull.trajectory),
        spec.s,
        (spec.window[0], spec.window[1]),
    )?;
    ctx.ensure_out()?;
    let mut r = Report::default();
    for run in [&null, &nonnull] {
        if !run.trajectory.completed() {
            r.interrupted = Some(format!("{}: {}", run.dir.display(), run.trajectory.outcome.label()));
        }
    }
    r.line(format!("null slope     {:.4} ± {:.4}", c.null.slope, c.null.slope_se));
    r.line(format!("non-null slope {:.4} ± {:.4}", c.nonnull.slope, c.nonnull.slope_se));
    r.line(format!("gap            {:.4}", c.gap()));
    let mut csv = String::from("t,null,nonnull\n");
    for (a, b) in c.null_series.iter().zip(&c.nonnull_series) {
        let _ = writeln!(csv, "{},{:e},{:e}", a.0, a.1, b.1);
    }
    let mut summary = Summary::default();
    summary.push_fit(&c.null);
    summary.push_fit(&c.nonnull);
    summary.push("gap", c.gap());
    let mut dat = String::new();
    dat_block(&mut dat, "null", "t norm", &c.null_series);
    dat_block(&mut dat, "non-null", "t norm", &c.nonnull_series);
    dat_block(&mut dat, "null fit", "t fitted", &fit_line(&c.null, &c.null_series));
    dat_block(&mut dat, "non-null fit", "t fitted", &fit_line(&c.nonnull, &c.nonnull_series));
    r.write(ctx.out.join("contrast.csv"), &csv)?;
    r.write(ctx.out.join("contrast-summary.csv"), &summary.to_csv())?;
    r.write(ctx.out.join("contrast.dat"), &dat)?;
    let k = &ctx.scenario.checks;
    check_max(&mut r, "null slope", Some(c.null.slope), k.null_slope_max);
    check_min(&mut r, "non-null slope", Some(c.nonnull.slope), k.nonnull_slope_min);
    check_max(&mut r, "gap", Some(c.gap()), k.gap_max);
    check_max(&mut r, "null slope error", Some(c.null.slope_se), k.slope_se_max);
    check_max(&mut r, "non-null slope error", Some(c.nonnull.slope_se), k.slope_se_max);
    Ok(r)
}

/// Effective lifespan over the scenario's amplitude list.
pub fn lifespan(ctx: &Context) -> Result<Report, CliError> {
    let sc = &ctx.scenario;
    let spec = sc.lifespan.as_ref().ok_or_else(|| CliError::Config("scenario has no [lifespan] section".into()))?;
    let cfg = sc.solver_config(&ctx.base)?;
    let table = lifespan_scan(&cfg, &spec.epsilons, spec.cap)?;
    ctx.ensure_out()?;
    let mut r = Report::default();
    for row in &table.rows {
        r.line(format!("eps {:e}: T_eff {} ({})", row.epsilon, row.t_eff, row.cause.label()));
    }
    let omega = table.omega.map_or("none".to_string(), |w| w.to_string());
    r.line(format!("fitted omega (log T_eff against 1/eps): {omega}"));
    let mut summary = Summary::default();
    summary.push("cap", spec.cap);
    summary.push("omega", &omega);
    let increasing = table.rows.windows(2).all(|w| w[1].t_eff > w[0].t_eff);
    let capped = table.rows.iter().all(|row| row.cause == LifespanCause::Cap);
    summary.push("increasing", increasing);
    summary.push("all_capped", capped);
    let pts: Vec<(f64, f64)> = table.rows.iter().map(|row| (1.0 / row.epsilon, row.t_eff)).collect();
    let mut dat = String::new();
    dat_block(&mut dat, "lifespan", "inverse_eps t_eff", &pts);
    r.write(ctx.out.join("lifespan.csv"), &table.csv())?;
    r.write(ctx.out.join("lifespan-summary.csv"), &summary.to_csv())?;
    r.write(ctx.out.join("lifespan.dat"), &dat)?;
    if sc.checks.lifespan_increasing == Some(true) && !increasing {
        r.failures.push("T_eff is not strictly increasing as eps decreases".into());
    }
    if sc.checks.lifespan_capped == Some(true) && !capped {
        r.failures.push("some run ended before the cap".into());
    }
    Ok(r)
}

/// Sweep of the exact identities on Gaussian test operands.
pub fn identities(ctx: &Context) -> Result<Report, CliError> {
    let sc = &ctx.scenario;
    let spec = &sc.identities;
    let masses: Vec<MassTriple> = if spec.masses.is_empty() {
        vec![sc.mass_triple()?]
    } else {
        spec.masses.iter().map(masses_from).collect::<Result<_, _>>()?
    };
    let mut rows: Vec<IdentityResidual> = Vec::new();
    for m in &masses {
        for g in &spec.grids {
            let grid = Grid::new(g[0] as usize, g[1] as usize, g[2]).map_err(|e| CliError::Config(e.to_string()))?;
            let cases = standard_cases(grid.dim(), m.resonant());
            rows.extend(identity_sweep(&grid, m, &cases, &spec.times)?);
        }
    }
    ctx.ensure_out()?;
    let mut r = Report::default();
    let mut csv = format!("{}\n", IdentityResidual::CSV_HEADER);
    for row in &rows {
        let _ = writeln!(csv, "{}", row.csv_row());
    }
    r.write(ctx.out.join("identities.csv"), &csv)?;
    let worst = rows.iter().map(|x| x.residual).fold(0.0, f64::max);
    r.line(format!("{} residuals, worst {worst:.3e} (ceiling {:e})", rows.len(), spec.ceiling));
    for row in rows.iter().filter(|x| !(x.residual <= spec.ceiling)) {
        let axes: Vec<String> = row.axes.iter().map(|a| (a + 1).to_string()).collect();
        let msg = format!(
            "{}[{}] at t = {} with masses {:?}: residual {:.3e}",
            row.identity,
            axes.join(" "),
            row.t,
            row.masses,
            row.residual
        );
        r.line(format!("FAILED {msg}"));
        r.failures.push(msg);
    }
    Ok(r)
}
