//! Browser bindings: three small operations backing `www/index.html`.
//!
//! Everything here is plain Rust as well, so the same functions are tested
//! natively.

use qdnls::diagnostics::decay_fit;
use qdnls::problem::{
    axis_pairs, decompose, format_exact, format_exact_complex, null_polynomials, null_violation, parse_exact,
    CoefficientTensor, ExactComplex, MassTriple,
};
use qdnls::smoothing::{apply_s, apply_s_inverse, SmoothingParams, Sign};
use qdnls::spectral::{free_propagate, modulated_gaussian, Grid};
use wasm_bindgen::prelude::*;

fn masses_from(text: &str) -> Result<MassTriple, String> {
    let parts: Vec<&str> = text.split(|c: char| c == ',' || c.is_whitespace()).filter(|s| !s.is_empty()).collect();
    if parts.len() != 3 {
        return Err(format!("expected three masses, got {}", parts.len()));
    }
    let m: Vec<_> = parts.iter().map(|p| parse_exact(p).map_err(|e| e.to_string())).collect::<Result<_, _>>()?;
    MassTriple::new(m[0].clone(), m[1].clone(), m[2].clone()).map_err(|e| e.to_string())
}

/// One entry per line: `equation alpha beta re [im]`; `#` starts a comment.
fn tensor_from(dim: usize, entries: &str) -> Result<CoefficientTensor, String> {
    let mut c = CoefficientTensor::zeros(dim).map_err(|e| e.to_string())?;
    for (n, raw) in entries.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split_whitespace().collect();
        let err = |msg: String| format!("line {}: {msg}", n + 1);
        if !(4..=5).contains(&f.len()) {
            return Err(err("expected `equation alpha beta re [im]`".into()));
        }
        let idx = |s: &str| s.parse::<usize>().map_err(|e| err(format!("{s:?}: {e}")));
        let re = parse_exact(f[3]).map_err(|e| err(e.to_string()))?;
        let im = match f.get(4) {
            Some(s) => parse_exact(s).map_err(|e| err(e.to_string()))?,
            None => parse_exact("0").expect("zero parses"),
        };
        c.add(idx(f[0])?, idx(f[1])?, idx(f[2])?, &ExactComplex::new(re, im)).map_err(|e| err(e.to_string()))?;
    }
    Ok(c)
}

/// Null-condition verdict with the three symbols and, for null tensors,
/// the decomposition into gauge and strong null forms.
#[wasm_bindgen]
pub fn check_null(masses: &str, dim: usize, entries: &str) -> Result<String, String> {
    let m = masses_from(masses)?;
    let c = tensor_from(dim, entries)?;
    let mut out = format!(
        "masses {} ({})\n",
        m.exact().iter().map(format_exact).collect::<Vec<_>>().join(", "),
        if m.resonant() { "resonant" } else { "not resonant" }
    );
    for (j, p) in null_polynomials(&c, &m).map_err(|e| e.to_string())?.iter().enumerate() {
        let terms: Vec<String> = p
            .monomials()
            .into_iter()
            .map(|(name, z)| {
                let z = format_exact_complex(&z);
                if name == "1" {
                    format!("({z})")
                } else {
                    format!("({z}) {name}")
                }
            })
            .collect();
        out.push_str(&format!("p{} = {}\n", j + 1, if terms.is_empty() { "0".into() } else { terms.join(" + ") }));
    }
    match null_violation(&c, &m) {
        Some(v) => out.push_str(&format!("NOT NULL: {v}\n")),
        None => {
            out.push_str("NULL\n");
            let dec = decompose(&c, &m).map_err(|e| e.to_string())?;
            for j in 0..3 {
                for (a, w) in dec.gauge[j].iter().enumerate() {
                    if *w != ExactComplex::default() {
                        out.push_str(&format!("  {} G[{},{}]\n", format_exact_complex(w), j + 1, a + 1));
                    }
                }
                for ((a, b), w) in axis_pairs(dim).into_iter().zip(&dec.strong[j]) {
                    if *w != ExactComplex::default() {
                        out.push_str(&format!("  {} Q[{}; {},{}]\n", format_exact_complex(w), j + 1, a + 1, b + 1));
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Sup norm of a freely evolving Gaussian next to its closed form.
#[wasm_bindgen]
pub struct DecayCurve {
    times: Vec<f64>,
    sup: Vec<f64>,
    exact: Vec<f64>,
    slope: f64,
}

#[wasm_bindgen]
impl DecayCurve {
    #[wasm_bindgen(getter)]
    pub fn times(&self) -> Vec<f64> {
        self.times.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn sup(&self) -> Vec<f64> {
        self.sup.clone()
    }

    #[wasm_bindgen(getter)]
    pub fn exact(&self) -> Vec<f64> {
        self.exact.clone()
    }

    /// Log-log slope over the last decade of times.
    #[wasm_bindgen(getter)]
    pub fn slope(&self) -> f64 {
        self.slope
    }
}

/// `sup |U_m(t) φ|` for `φ = exp(-|x|²/(2w²))` at 65 log-spaced times in
/// `[t_max/100, t_max]`.
#[wasm_bindgen]
pub fn free_decay(dim: usize, mass: f64, width: f64, t_max: f64) -> Result<DecayCurve, String> {
    if !(mass != 0.0 && mass.is_finite()) || !(width > 0.0) || !(t_max > 0.0) {
        return Err("need nonzero mass, positive width and positive t_max".into());
    }
    let grid = match dim {
        1 => Grid::new(1, 4096, 1000.0),
        2 => Grid::new(2, 512, 400.0),
        _ => return Err(format!("dimension {dim} not offered (1 or 2)")),
    }
    .map_err(|e| e.to_string())?;
    let origin = vec![0.0; dim];
    let u0 = modulated_gaussian(&grid, &origin, width, &origin);
    let tau = mass.abs() * width * width;
    let times: Vec<f64> = (0..=64).map(|k| t_max * 10f64.powf(k as f64 / 32.0 - 2.0)).collect();
    let sup = times
        .iter()
        .map(|&t| free_propagate(&u0, mass, t).map(|u| u.sup_norm()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| e.to_string())?;
    let exact = times.iter().map(|&t| (1.0 + (t / tau).powi(2)).powf(-(dim as f64) / 4.0)).collect();
    let series: Vec<(f64, f64)> = times.iter().copied().zip(sup.iter().copied()).collect();
    let slope = decay_fit("sup", &series, (0.999 * t_max / 10.0, t_max)).map_err(|e| e.to_string())?.slope;
    Ok(DecayCurve { times, sup, exact, slope })
}

/// A wave packet before and after the smoothing gauge `S_±(t; κ)`.
#[wasm_bindgen]
pub struct GaugeProfile {
    x: Vec<f64>,
    before: Vec<f64>,
    after: Vec<f64>,
    round_trip_error: f64,
    norm_ratio: f64,
    bound: f64,
}

#[wasm_bindgen]
impl GaugeProfile {
    #[wasm_bindgen(getter)]
    pub fn x(&self) -> Vec<f64> {
        self.x.clone()
    }

    /// `|f|` on the grid.
    #[wasm_bindgen(getter)]
    pub fn before(&self) -> Vec<f64> {
        self.before.clone()
    }

    /// `|S f|` on the grid.
    #[wasm_bindgen(getter)]
    pub fn after(&self) -> Vec<f64> {
        self.after.clone()
    }

    /// `‖S⁻¹ S f − f‖ / ‖f‖`.
    #[wasm_bindgen(getter)]
    pub fn round_trip_error(&self) -> f64 {
        self.round_trip_error
    }

    /// `‖S f‖ / ‖f‖`.
    #[wasm_bindgen(getter)]
    pub fn norm_ratio(&self) -> f64 {
        self.norm_ratio
    }

    /// `e^{κπ/2}`, the operator-norm ceiling.
    #[wasm_bindgen(getter)]
    pub fn bound(&self) -> f64 {
        self.bound
    }
}

/// Apply the gauge to a packet centred at `center` with wave number `k`.
#[wasm_bindgen]
pub fn smoothing_gauge(kappa: f64, t: f64, plus: bool, center: f64, k: f64) -> Result<GaugeProfile, String> {
    let sign = if plus { Sign::Plus } else { Sign::Minus };
    let p = SmoothingParams::new(kappa, sign, t).map_err(|e| e.to_string())?;
    let grid = Grid::new(1, 512, 100.0).map_err(|e| e.to_string())?;
    let f = modulated_gaussian(&grid, &[center], 2.0, &[k]);
    let sf = apply_s(&f, &p).map_err(|e| e.to_string())?;
    let back = apply_s_inverse(&sf, &p).map_err(|e| e.to_string())?;
    Ok(GaugeProfile {
        x: grid.coords().to_vec(),
        before: f.values().iter().map(|z| z.norm()).collect(),
        after: sf.values().iter().map(|z| z.norm()).collect(),
        round_trip_error: back.relative_distance(&f),
        norm_ratio: sf.norm_l2() / f.norm_l2(),
        bound: (kappa * std::f64::consts::FRAC_PI_2).exp(),
    })
}
