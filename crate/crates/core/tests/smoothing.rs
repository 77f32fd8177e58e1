use std::f64::consts::FRAC_PI_2;

use qdnls::smoothing::*;
use qdnls::spectral::{free_propagate, modulated_gaussian, random_field, Field, Grid};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn params(kappa: f64, sign: Sign, t: f64) -> SmoothingParams {
    SmoothingParams::new(kappa, sign, t).unwrap()
}

#[test]
fn inverse_round_trip_on_random_fields() {
    let grid = Grid::new(2, 32, 40.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let fields: Vec<Field> = (0..100).map(|_| random_field(&grid, &mut rng, Some(8))).collect();
    for kappa in [0.1, 0.5, 1.0] {
        for t in [0.0, 1.0, 10.0] {
            for sign in [Sign::Plus, Sign::Minus] {
                let p = params(kappa, sign, t);
                let worst = fields
                    .iter()
                    .map(|f| apply_s_inverse(&apply_s(f, &p).unwrap(), &p).unwrap().relative_distance(f))
                    .fold(0.0, f64::max);
                assert!(worst <= 1e-10, "kappa {kappa}, t {t}: {worst:e}");
            }
        }
    }
}

#[test]
fn axis_factors_commute() {
    let grid = Grid::new(2, 64, 30.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..5 {
        let f = random_field(&grid, &mut rng, None);
        let p = params(0.8, Sign::Minus, 2.0);
        let a = apply_s_axis(&apply_s_axis(&f, &p, 0).unwrap(), &p, 1).unwrap();
        let b = apply_s_axis(&apply_s_axis(&f, &p, 1).unwrap(), &p, 0).unwrap();
        assert!(a.relative_distance(&b) <= 1e-12);
    }
}

#[test]
fn crude_multiplier_bound_per_axis() {
    let grid = Grid::new(2, 64, 30.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let bound = FRAC_PI_2.cosh() + FRAC_PI_2.sinh();
    for _ in 0..20 {
        let f = random_field(&grid, &mut rng, None);
        for axis in 0..2 {
            let p = params(1.0, Sign::Plus, 0.0);
            assert!(apply_s_axis(&f, &p, axis).unwrap().norm_l2() <= bound * f.norm_l2());
        }
    }
}

#[test]
fn operator_norms_uniform_in_time() {
    // The supremum over x of |Λ| is only approached when L/2 >> ⟨t⟩.
    let grid = Grid::new(1, 4096, 800.0).unwrap();
    let start = random_field(&grid, &mut ChaCha8Rng::seed_from_u64(14), None);
    for kappa in [0.1, 0.5, 1.0] {
        let ceiling = (kappa * FRAC_PI_2).exp() * (1.0 + 1e-9);
        let mut fwd = Vec::new();
        let mut inv = Vec::new();
        for t in [0.0, 1.0, 10.0, 100.0] {
            let p = params(kappa, Sign::Plus, t);
            let a = power_norm(&start, &p, 30).unwrap();
            let b = power_norm_inverse(&start, &p, 30).unwrap();
            assert!(a <= ceiling && b <= ceiling, "kappa {kappa}, t {t}: {a} {b}");
            if t <= 10.0 {
                fwd.push(a);
                inv.push(b);
            }
        }
        for v in [&fwd, &inv] {
            let (lo, hi) = v.iter().fold((f64::MAX, 0.0_f64), |(l, h), &x| (l.min(x), h.max(x)));
            assert!(hi / lo - 1.0 < 0.05, "kappa {kappa}: {v:?}");
        }
    }
}

#[test]
fn gauge_fades_on_localized_data() {
    let grid = Grid::new(1, 512, 100.0).unwrap();
    let f = modulated_gaussian(&grid, &[1.0], 1.0, &[0.7]);
    let diffs: Vec<f64> = [0.0, 10.0, 100.0, 1000.0]
        .iter()
        .map(|&t| apply_s(&f, &params(1.0, Sign::Plus, t)).unwrap().relative_distance(&f))
        .collect();
    assert!(diffs.windows(2).all(|w| w[1] < w[0]), "{diffs:?}");
    assert!(diffs[3] < 1e-2);
}

fn free_budget(n: usize, mass: f64, kappa: f64) -> Vec<BudgetRecord> {
    let grid = Grid::new(2, n, 60.0).unwrap();
    let f0 = modulated_gaussian(&grid, &[0.0, 0.0], 1.0, &[0.5, -0.3]);
    let zero = Field::zeros(&grid);
    let mut acc = BudgetAccumulator::new(mass, kappa).unwrap();
    (0..=160)
        .map(|k| {
            let t = 0.05 * k as f64;
            acc.push(t, &free_propagate(&f0, mass, t).unwrap(), &zero).unwrap()
        })
        .collect()
}

#[test]
fn budget_constant_stable_under_refinement() {
    let mut all = Vec::new();
    for (mass, kappa) in [(1.0, 0.5), (1.0, 0.25), (-2.0, 1.0)] {
        let coarse = free_budget(128, mass, kappa).last().unwrap().fitted_c;
        let fine = free_budget(256, mass, kappa).last().unwrap().fitted_c;
        assert!(fine.is_finite());
        assert!((fine - coarse).abs() <= 0.2 * fine.abs(), "m {mass}, kappa {kappa}: {coarse} vs {fine}");
        all.push(fine);
    }
    // One constant covers every case.
    let c = all.iter().cloned().fold(f64::MIN, f64::max);
    for (mass, kappa) in [(1.0, 0.5), (1.0, 0.25), (-2.0, 1.0)] {
        for r in free_budget(128, mass, kappa) {
            let lhs = r.lhs_energy + r.lhs_smoothing_integral;
            let rhs = r.rhs_energy0 + c * r.rhs_kappa_term + r.rhs_pairing_term;
            assert!(lhs <= rhs + 1e-9 * r.rhs_energy0 + 0.02 * c.abs() * r.rhs_kappa_term);
        }
    }
}

#[test]
fn smoothing_integral_linear_in_kappa() {
    let a = free_budget(128, 1.0, 0.25).last().unwrap().lhs_smoothing_integral;
    let b = free_budget(128, 1.0, 0.5).last().unwrap().lhs_smoothing_integral;
    assert!((b / a / 2.0 - 1.0).abs() <= 0.05, "{a} {b}");
}

#[test]
fn budget_csv_shape() {
    let rows = free_budget(64, 1.0, 0.5);
    assert_eq!(BudgetRecord::CSV_HEADER.split(',').count(), rows[3].csv_row().split(',').count());
}

#[test]
fn commutator_ratio_bounded_over_random_family() {
    let grid = Grid::new(1, 256, 40.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut ratios: Vec<f64> = (0..50)
        .map(|_| {
            let f = random_field(&grid, &mut rng, Some(24));
            let g = random_field(&grid, &mut rng, Some(12));
            commutator_ratio(&f, &g, 0).unwrap()
        })
        .collect();
    ratios.sort_by(f64::total_cmp);
    let median = 0.5 * (ratios[24] + ratios[25]);
    assert!(ratios[49] <= 10.0 * median, "{ratios:?}");
    let f = random_field(&grid, &mut rng, Some(12));
    assert!(commutator_ratio(&f, &f, 0).unwrap().is_finite());
}
