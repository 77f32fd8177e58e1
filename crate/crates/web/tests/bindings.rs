use qdnls_web::{check_null, free_decay, smoothing_gauge};

#[test]
fn null_tensor_gets_a_certificate() {
    // The strong form Q12 on the third equation.
    let out = check_null("1 1 2", 2, "3 1 2 1\n3 2 1 -1  # antisymmetric\n").unwrap();
    assert!(out.contains("resonant"), "{out}");
    assert!(out.contains("\nNULL\n"), "{out}");
    assert!(out.contains("Q[3; 1,2]"), "{out}");
}

#[test]
fn symmetric_term_is_rejected() {
    let out = check_null("1, 1, 2", 1, "3 1 0 1").unwrap();
    assert!(out.contains("NOT NULL"), "{out}");
}

#[test]
fn bad_input_is_reported_with_a_line_number() {
    assert!(check_null("1 1", 1, "").unwrap_err().contains("three masses"));
    let err = check_null("1 1 2", 1, "\n3 1 zero\n").unwrap_err();
    assert!(err.starts_with("line 2"), "{err}");
    assert!(check_null("1 1 2", 1, "4 0 0 1").is_err());
}

#[test]
fn free_decay_tracks_the_closed_form() {
    let c = free_decay(1, 1.0, 1.0, 64.0).unwrap();
    assert_eq!(c.times().len(), 65);
    for (s, e) in c.sup().iter().zip(c.exact()) {
        assert!((s - e).abs() < 1e-6 * e.max(1e-3), "{s} vs {e}");
    }
    assert!((c.slope() + 0.5).abs() < 0.02, "slope {}", c.slope());
    assert!(free_decay(3, 1.0, 1.0, 10.0).is_err());
    assert!(free_decay(1, 0.0, 1.0, 10.0).is_err());
}

#[test]
fn gauge_round_trip_and_bound() {
    let g = smoothing_gauge(0.8, 2.0, true, 5.0, 1.5).unwrap();
    assert_eq!(g.x().len(), g.after().len());
    assert!(g.round_trip_error() < 1e-10, "{}", g.round_trip_error());
    assert!(g.norm_ratio() <= g.bound() * (1.0 + 1e-9));
    assert!(g.norm_ratio() >= 1.0 / g.bound() * (1.0 - 1e-9));
    assert!(smoothing_gauge(-1.0, 1.0, true, 0.0, 0.0).is_err());
}
