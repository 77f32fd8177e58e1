use num_bigint::BigInt;
use num_complex::Complex;
use num_rational::BigRational;
use proptest::prelude::*;
use qdnls::problem::{axis_pairs, decompose, expand, is_null, ExactComplex, MassTriple, NullDecomposition};

fn exact(re: i64, im: i64) -> ExactComplex {
    let r = |v: i64| BigRational::from_integer(BigInt::from(v));
    Complex::new(r(re), r(im))
}

fn resonant_masses() -> impl Strategy<Value = MassTriple> {
    (-6i64..=6, -6i64..=6)
        .prop_filter("nonzero masses", |&(a, b)| a != 0 && b != 0 && a + b != 0)
        .prop_map(|(a, b)| MassTriple::from_integers(a, b, a + b).unwrap())
}

fn decomposition(dim: usize) -> impl Strategy<Value = NullDecomposition> {
    let pairs = axis_pairs(dim).len();
    let weights = move |n: usize| proptest::collection::vec((-4i64..=4, -4i64..=4), 3 * n);
    (weights(dim), weights(pairs)).prop_map(move |(g, q)| {
        let mut dec = NullDecomposition::zeros(dim);
        for j in 0..3 {
            for a in 0..dim {
                let (re, im) = g[j * dim + a];
                dec.gauge[j][a] = exact(re, im);
            }
            for k in 0..pairs {
                let (re, im) = q[j * pairs + k];
                dec.strong[j][k] = exact(re, im);
            }
        }
        dec
    })
}

proptest! {
    #[test]
    fn expanded_forms_are_null_and_round_trip(m in resonant_masses(), dec in (1usize..=3).prop_flat_map(decomposition)) {
        let c = expand(&dec, &m);
        prop_assert!(is_null(&c, &m));
        prop_assert_eq!(decompose(&c, &m).unwrap(), dec);
    }

    #[test]
    fn nullity_is_scale_invariant(
        m in resonant_masses(),
        dec in decomposition(2),
        extra in (1usize..=3, 0usize..=2, 0usize..=2, -3i64..=3),
        lambda in (-5i64..=5, -5i64..=5).prop_filter("nonzero", |&(a, b)| a != 0 || b != 0),
    ) {
        let mut c = expand(&dec, &m);
        let (eq, alpha, beta, v) = extra;
        c.add(eq, alpha, beta, &exact(v, 0)).unwrap();
        let scaled = c.scaled(&exact(lambda.0, lambda.1));
        prop_assert_eq!(is_null(&c, &m), is_null(&scaled, &m));
    }

    #[test]
    fn derivative_free_terms_are_never_null(m in resonant_masses(), dec in decomposition(2), eq in 1usize..=3, v in 1i64..=5) {
        let mut c = expand(&dec, &m);
        c.add(eq, 0, 0, &exact(v, -v)).unwrap();
        prop_assert!(!is_null(&c, &m));
    }
}
