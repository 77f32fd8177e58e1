use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;

use qdnls_cli::commands::{self, Context};
use qdnls_cli::scenario::{DataSection, Scenario};
use qdnls_cli::{rundir, CliError};

fn scenarios_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("scenarios")
}

fn bundled(name: &str) -> Scenario {
    Scenario::load(&scenarios_dir().join(format!("{name}.toml"))).unwrap()
}

fn qdnls(dir: &Path, args: &[&str]) -> (i32, String, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_qdnls")).current_dir(dir).args(args).output().unwrap();
    (
        out.status.code().unwrap(),
        String::from_utf8_lossy(&out.stdout).into_owned(),
        String::from_utf8_lossy(&out.stderr).into_owned(),
    )
}

/// A small d = 2 scenario: N = 64, L = 40, t up to 4.
fn small(name: &str, coefficients: &str) -> Scenario {
    Scenario::parse(&format!(
        r#"
version = 1
name = "{name}"
masses = ["1", "1", "2"]
[grid]
dim = 2
n = 64
length = 40.0
[data]
family = "modulated-gaussian"
centers = [[0.5, 0.25], [-0.25, -0.5], [0.0, 0.0]]
widths = [1.5, 1.5, 1.0606601717798212]
[solver]
dt = 0.05
t_final = 4.0
cadence = 2
dealias = false
stop_on_boundary = false
[scatter]
s = 3
window = [0.4, 4.0]
decade_end = 4.0
{coefficients}
"#
    ))
    .unwrap()
}

const Q12: &str = r#"
[[coefficients]]
equation = 3
alpha = 1
beta = 2
re = "1"
[[coefficients]]
equation = 3
alpha = 2
beta = 1
re = "-1"
"#;

const PLAIN: &str = r#"
[[coefficients]]
equation = 3
alpha = 0
beta = 0
re = "1"
"#;

fn ctx(sc: Scenario, out: &Path) -> Context {
    Context::new(sc, PathBuf::from("."), Some(out), None)
}

#[test]
fn bundled_scenarios_round_trip() {
    let mut count = 0;
    for entry in fs::read_dir(scenarios_dir()).unwrap() {
        let path = entry.unwrap().path();
        let sc = Scenario::load(&path).unwrap();
        let text = sc.to_toml();
        let again = Scenario::parse(&text).unwrap();
        assert_eq!(sc, again, "{}", path.display());
        assert_eq!(text, again.to_toml());
        count += 1;
    }
    assert!(count >= 9);
}

#[test]
fn unknown_keys_and_versions_are_rejected() {
    let base = small("x", "").to_toml();
    let typo = base.replace("t_final", "t_finall");
    let err = Scenario::parse(&typo).unwrap_err();
    assert!(matches!(err, CliError::Config(ref m) if m.contains("t_finall")), "{err}");
    assert_eq!(err.exit_code(), 2);
    let wrong = base.replace("version = 1", "version = 2");
    assert!(matches!(Scenario::parse(&wrong), Err(CliError::Config(m)) if m.contains("version")));
    let bad_mass = base.replace(r#""2""#, r#""two""#);
    assert!(matches!(Scenario::parse(&bad_mass), Err(CliError::Config(m)) if m.contains("masses[2]")));
    let bad_grid = base.replace("n = 64", "n = 60");
    assert!(Scenario::parse(&bad_grid).is_err());

    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("typo.toml"), typo).unwrap();
    let (code, _, err) = qdnls(dir.path(), &["--config", "typo.toml", "simulate"]);
    assert_eq!(code, 2, "{err}");
    assert!(err.contains("line"), "{err}");
}

#[test]
fn check_null_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let plain = commands::check_null(&ctx(bundled("nonnull-d2"), dir.path())).unwrap();
    assert!(plain.text.contains("NOT NULL"), "{}", plain.text);
    assert!(plain.text.contains("p3 = (1)\n"), "{}", plain.text);
    assert!(plain.text.contains("constant term"), "{}", plain.text);

    let null = commands::check_null(&ctx(bundled("null-d2"), dir.path())).unwrap();
    assert!(null.text.contains("\nNULL\n") && null.text.contains("Q[3; 1,2] weight 1"), "{}", null.text);
    assert!(null.text.contains("reproduces the tensor: yes"));

    let zero = commands::check_null(&ctx(small("zero", ""), dir.path())).unwrap();
    assert!(zero.text.contains("\nNULL\n") && zero.text.contains("p1 = 0\np2 = 0\np3 = 0"), "{}", zero.text);

    // A single gauge form G_{3,1} for masses (1, 2, 3) in one dimension.
    let gauge = Scenario::parse(
        r#"
version = 1
name = "gauge"
masses = ["1", "2", "3"]
[grid]
dim = 1
n = 64
length = 20.0
[[coefficients]]
equation = 3
alpha = 0
beta = 1
re = "1"
[[coefficients]]
equation = 3
alpha = 1
beta = 0
re = "-2"
"#,
    )
    .unwrap();
    let r = commands::check_null(&ctx(gauge.clone(), dir.path())).unwrap();
    assert!(r.text.contains("G[3,1] weight 1"), "{}", r.text);
    assert_eq!(commands::decompose(&ctx(gauge, dir.path())).unwrap().exit_code(), 0);
    let err = commands::decompose(&ctx(bundled("nonnull-d2"), dir.path())).unwrap_err();
    assert_eq!(err.exit_code(), 2);
}

fn read_all(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut out = Vec::new();
    for entry in walk(dir) {
        out.push((entry.strip_prefix(dir).unwrap().to_path_buf(), fs::read(&entry).unwrap()));
    }
    out.sort();
    out
}

fn walk(dir: &Path) -> Vec<PathBuf> {
    let mut files = Vec::new();
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.is_dir() {
            files.extend(walk(&p));
        } else {
            files.push(p);
        }
    }
    files
}

#[test]
fn free_smoke_run_decays_and_reruns_identically() {
    let dir = tempfile::tempdir().unwrap();
    let config = scenarios_dir().join("free-smoke.toml");
    let config = config.to_str().unwrap();
    let (code, out, err) = qdnls(dir.path(), &["--config", config, "simulate"]);
    assert_eq!(code, 0, "{out}{err}");
    let run = dir.path().join("runs/free-smoke");
    let first = read_all(&run);
    assert!(first.iter().any(|(p, _)| p.ends_with("snapshots/duhamel-00064.bin")));

    let summary = fs::read_to_string(run.join("decay-summary.csv")).unwrap();
    let slope: f64 = summary.lines().find(|l| l.starts_with("sup_slope,")).unwrap()[10..].parse().unwrap();
    assert!((slope + 0.5).abs() <= 0.05, "{slope}");
    let scatter = fs::read_to_string(run.join("scatter.csv")).unwrap();
    for line in scatter.lines().skip(1) {
        assert_eq!(line.split(',').nth(1).unwrap(), "0e0", "{line}");
    }

    let (code, ..) = qdnls(dir.path(), &["--config", config, "simulate"]);
    assert_eq!(code, 0);
    assert!(first == read_all(&run), "rerun changed the run directory");

    // Analyses of the stored run reproduce the in-process ones.
    let (code, out, _) = qdnls(dir.path(), &["--config", config, "decay"]);
    assert_eq!(code, 0);
    assert!(out.contains(&format!("slope {slope:.4}")), "{out}");
    assert_eq!(summary, fs::read_to_string(run.join("decay-summary.csv")).unwrap());
    let (code, ..) = qdnls(dir.path(), &["--config", config, "scatter"]);
    assert_eq!(code, 0);
    assert_eq!(scatter, fs::read_to_string(run.join("scatter.csv")).unwrap());
}

#[test]
fn stored_runs_reload_their_duhamel_parts() {
    let dir = tempfile::tempdir().unwrap();
    let c = ctx(small("plain", PLAIN), dir.path());
    commands::simulate(&c).unwrap();
    let run = rundir::load_run(dir.path()).unwrap();
    let cfg = c.scenario.solver_config(Path::new(".")).unwrap();
    let fresh = qdnls::solver::evolve(&cfg).unwrap();
    let window = (0.4, 4.0);
    let a = qdnls::diagnostics::scattering_profile(&fresh, &cfg, 3, window).unwrap();
    let b = qdnls::diagnostics::scattering_profile(&run.trajectory, &run.config, 3, window).unwrap();
    assert_eq!(a.series.len(), b.series.len());
    for (x, y) in a.series.iter().zip(&b.series) {
        assert_eq!(x.0, y.0);
        assert!((x.1 - y.1).abs() <= 1e-9 * x.1.max(1e-300), "{x:?} {y:?}");
    }
    assert!(a.series[0].1 > 0.0);
}

#[test]
fn missing_runs_are_validation_errors() {
    let dir = tempfile::tempdir().unwrap();
    let c = ctx(small("absent", ""), &dir.path().join("nothing"));
    let err = commands::decay(&c).err().unwrap();
    assert!(matches!(err, CliError::MissingRun(_)));
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn boundary_contamination_exits_four() {
    let dir = tempfile::tempdir().unwrap();
    let mut sc = small("edge", PLAIN);
    sc.grid.n = 32;
    sc.grid.length = 12.0;
    sc.solver.stop_on_boundary = true;
    let c = ctx(sc, dir.path());
    let r = commands::simulate(&c).unwrap();
    assert_eq!(r.exit_code(), 4, "{}", r.text);
    assert_eq!(commands::scatter(&c).unwrap().exit_code(), 4);
}

#[test]
fn identity_sweeps() {
    let dir = tempfile::tempdir().unwrap();
    let config = scenarios_dir().join("identities.toml");
    let (code, out, err) = qdnls(dir.path(), &["--config", config.to_str().unwrap(), "identities"]);
    assert_eq!(code, 0, "{out}{err}");
    let csv = fs::read_to_string(dir.path().join("runs/identities/identities.csv")).unwrap();
    assert!(csv.lines().count() > 100);

    let broken = bundled("identities-nonresonant");
    let r = commands::identities(&ctx(broken.clone(), dir.path())).unwrap();
    assert_eq!(r.exit_code(), 3);
    assert!(r.failures.iter().any(|f| f.starts_with("leibniz")), "{:?}", r.failures);

    let mut empty = broken;
    empty.identities.times.clear();
    let out = dir.path().join("empty");
    let r = commands::identities(&ctx(empty, &out)).unwrap();
    assert_eq!(r.exit_code(), 0);
    assert_eq!(fs::read_to_string(out.join("identities.csv")).unwrap().lines().count(), 1);
}

#[test]
fn lifespan_and_contrast_commands() {
    let dir = tempfile::tempdir().unwrap();
    let mut sc = small(
        "lifespan",
        r#"
[[coefficients]]
equation = 3
alpha = 1
beta = 0
re = "200000000"
[lifespan]
epsilons = [0.04, 0.02, 0.01]
cap = 12.0
[checks]
lifespan_increasing = true
"#,
    );
    sc.grid.length = 60.0;
    sc.data = DataSection::ModulatedGaussian {
        centers: [[0.5, 0.25], [-0.25, -0.5], [0.0, 0.0]],
        widths: [2.65, 2.65, 2.65 / 2f64.sqrt()],
        wavevectors: [[0.0; 2]; 3],
        phases: [0.0, 1.0, 2.0],
    };
    sc.solver.cadence = 5;
    let r = commands::lifespan(&ctx(sc, &dir.path().join("lifespan"))).unwrap();
    assert_eq!(r.exit_code(), 0, "{}", r.text);
    assert!(fs::read_to_string(dir.path().join("lifespan/lifespan.csv")).unwrap().lines().count() == 4);

    let null_dir = dir.path().join("null");
    let plain_dir = dir.path().join("plain");
    commands::simulate(&ctx(small("null", Q12), &null_dir)).unwrap();
    commands::simulate(&ctx(small("plain", PLAIN), &plain_dir)).unwrap();
    let contrast = |null: &Path, nonnull: &Path| {
        let mut sc = small("contrast", "");
        sc.contrast = Some(qdnls_cli::scenario::ContrastSection {
            null: null.to_path_buf(),
            nonnull: nonnull.to_path_buf(),
            s: 3,
            window: [0.4, 4.0],
        });
        commands::contrast(&ctx(sc, &dir.path().join("contrast")))
    };
    let r = contrast(&null_dir, &plain_dir).unwrap();
    assert_eq!(r.exit_code(), 0, "{}", r.text);
    assert!(r.text.contains("gap"));

    let mut other = small("other", PLAIN);
    other.solver.epsilon = 2e-2;
    let other_dir = dir.path().join("other");
    commands::simulate(&ctx(other, &other_dir)).unwrap();
    assert_eq!(contrast(&null_dir, &other_dir).unwrap_err().exit_code(), 2);
}

#[test]
fn seeds_select_random_data() {
    let dir = tempfile::tempdir().unwrap();
    let mut sc = small("random", "");
    sc.data = DataSection::Random { band: Some(4) };
    sc.solver.t_final = 0.1;
    let run = |seed: u64, name: &str| {
        let out = dir.path().join(name);
        commands::simulate(&Context::new(sc.clone(), PathBuf::from("."), Some(&out), Some(seed))).unwrap();
        fs::read(out.join("snapshots/state-00000.bin")).unwrap()
    };
    let a = run(1, "a");
    assert_eq!(a, run(1, "b"));
    assert_ne!(a, run(2, "c"));
}
