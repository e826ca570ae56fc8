use braidforge::braid_words::{parse_loop_word, random_loop_word, BraidWord};
use braidforge::poly_algebra::{LaurentPoly, Var};
use braidforge::trig_interp::interpolate;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const VARS: [Var; 3] = [Var::X, Var::Y, Var::Eit];

fn poly() -> impl Strategy<Value = LaurentPoly> {
    prop::collection::vec(((0i16..4, 0i16..4, -3i16..4), -5i32..6), 1..8).prop_map(|terms| {
        LaurentPoly::from_terms(
            &VARS,
            terms
                .into_iter()
                .map(|((a, b, e), k)| (vec![a, b, e], Complex64::new(k as f64, 0.0))),
        )
    })
}

fn at(p: &LaurentPoly, x: f64, y: f64, t: f64) -> Complex64 {
    p.eval_with(&[
        (Var::X, Complex64::new(x, 0.0)),
        (Var::Y, Complex64::new(y, 0.0)),
        (Var::Eit, Complex64::from_polar(1.0, t)),
    ])
    .unwrap()
}

proptest! {
    #[test]
    fn loop_words_survive_a_text_round_trip(seed in any::<u64>()) {
        let w = random_loop_word(&mut ChaCha8Rng::seed_from_u64(seed), 5, 8);
        let back = parse_loop_word(&w.to_text(), w.strand_count()).unwrap();
        prop_assert_eq!(back, w);
    }

    #[test]
    fn product_evaluates_to_product_of_values(
        p in poly(), q in poly(), x in -2.0f64..2.0, y in -2.0f64..2.0, t in 0.0f64..6.3
    ) {
        let pq = p.mul(&q).unwrap();
        prop_assert_eq!(&pq, &q.mul(&p).unwrap());
        let want = at(&p, x, y, t) * at(&q, x, y, t);
        prop_assert!((at(&pq, x, y, t) - want).norm() <= 1e-9 * (1.0 + want.norm()));
    }

    #[test]
    fn derivative_obeys_the_product_rule(p in poly(), q in poly(), x in -2.0f64..2.0, y in -2.0f64..2.0) {
        let lhs = p.mul(&q).unwrap().derivative(Var::X);
        let rhs = p.derivative(Var::X).mul(&q).unwrap().add(&p.mul(&q.derivative(Var::X)).unwrap());
        prop_assert!((at(&lhs, x, y, 0.7) - at(&rhs, x, y, 0.7)).norm() < 1e-9 * (1.0 + at(&lhs, x, y, 0.7).norm()));
    }

    #[test]
    fn interpolant_passes_through_its_nodes(
        start in 0.0f64..0.5, gaps in prop::collection::vec(0.3f64..0.7, 1..8), seed in any::<u64>()
    ) {
        let mut t = start;
        let mut nodes = Vec::new();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for g in gaps {
            nodes.push((t, rand::Rng::gen_range(&mut rng, -3.0..3.0)));
            t += g;
        }
        let p = interpolate(&nodes).unwrap();
        for (t, y) in nodes {
            prop_assert!((p.eval(t) - y).abs() < 1e-8, "{} vs {}", p.eval(t), y);
        }
    }
}
