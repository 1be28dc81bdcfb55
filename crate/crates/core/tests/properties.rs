use std::f64::consts::PI;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use tspec_core::abel::abel_weight;
use tspec_core::analysis::{assign_branches, counting_function, expand, fit_asymptotics, Sector};
use tspec_core::shooting::characteristic_determinant;
use tspec_core::{
    condition_values, project_to_domain, validate_problem, Coefficients, EigenvalueRecord,
    PerturbationSpec, Seed, TransmissionProblem, C64,
};

fn coefficients() -> impl Strategy<Value = Coefficients> {
    let stiff = prop_oneof![-3.0..-0.2f64, 0.2..3.0f64];
    let end = (0.0..PI).prop_map(|t| (t.cos(), t.sin()));
    let coupling = -2.0..2.0f64;
    (
        stiff.clone(),
        stiff,
        end.clone(),
        end,
        [
            coupling.clone(),
            coupling.clone(),
            coupling.clone(),
            coupling,
        ],
    )
        .prop_map(
            |(p1, p2, (a0, a1), (b0, b1), [g0, d0, g1, d1])| Coefficients {
                p1,
                p2,
                alpha0: a0,
                alpha1: a1,
                beta0: b0,
                beta1: b1,
                gamma0: g0,
                delta0: d0,
                gamma1: g1,
                delta1: d1,
            },
        )
}

fn problem(c: Coefficients) -> TransmissionProblem {
    validate_problem(c, PerturbationSpec::Zero).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn condition_values_are_linear(c in coefficients(), seed in any::<u64>(), a in -3.0..3.0f64, b in -3.0..3.0f64) {
        let p = problem(c);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = Seed::random(&mut rng, 3).sample(64).unwrap();
        let v = Seed::random(&mut rng, 3).sample(64).unwrap();
        let (ca, cb) = (C64::new(a, 0.5), C64::new(-0.25, b));
        let w = u.combine(ca, &v, cb).unwrap();
        let lhs = condition_values(&p, &w).as_array();
        let (lu, lv) = (condition_values(&p, &u).as_array(), condition_values(&p, &v).as_array());
        for k in 0..4 {
            let rhs = ca * lu[k] + cb * lv[k];
            let scale = (ca * lu[k]).norm() + (cb * lv[k]).norm() + 1.0;
            prop_assert!((lhs[k] - rhs).norm() <= 1e-12 * scale, "L{} {} vs {}", k + 1, lhs[k], rhs);
        }
    }

    #[test]
    fn projection_lands_in_the_domain(c in coefficients(), seed in any::<u64>()) {
        let p = problem(c);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match project_to_domain(&p, &Seed::random(&mut rng, 4), 100) {
            Ok(u) => prop_assert!(condition_values(&p, &u).max_abs() <= 1e-10),
            // Near-degenerate correctors are refused rather than returned inaccurate.
            Err(e) => prop_assert!(e.to_string().contains("condition"), "{e}"),
        }
    }

    #[test]
    fn determinant_is_conjugate_symmetric(c in coefficients(), re in -200.0..200.0f64, im in -50.0..50.0f64) {
        let p = problem(c);
        let z = C64::new(re, im);
        let d = characteristic_determinant(&p, z).unwrap();
        let dc = characteristic_determinant(&p, z.conj()).unwrap();
        prop_assert!((dc - d.conj()).norm() <= 1e-9 * d.norm().max(1e-300) + 1e-300);
    }

    #[test]
    fn branch_split_then_merge_is_identity(
        values in prop::collection::vec((-500.0..500.0f64, -5.0..5.0f64, 1usize..3), 1..40),
        p1 in prop_oneof![-2.0..-0.5f64, 0.5..2.0f64],
    ) {
        let p = problem(Coefficients::dirichlet(p1, 1.0));
        let recs: Vec<EigenvalueRecord> = values
            .iter()
            .map(|&(re, im, m)| EigenvalueRecord::shooting(C64::new(re, im), m, 0.0))
            .collect();
        let b = assign_branches(&recs, &p).unwrap();
        let key = |r: &EigenvalueRecord| (r.value.re.to_bits(), r.value.im.to_bits(), r.multiplicity);
        let mut before: Vec<_> = recs.iter().map(key).collect();
        let mut after: Vec<_> = b.merged().iter().map(key).collect();
        before.sort();
        after.sort();
        prop_assert_eq!(before, after);
    }

    #[test]
    fn counting_is_monotone(
        values in prop::collection::vec((-100.0..100.0f64, -10.0..10.0f64, 1usize..3), 0..30),
        radii in prop::collection::vec(0.0..150.0f64, 2..10),
    ) {
        let recs: Vec<EigenvalueRecord> = values
            .iter()
            .map(|&(re, im, m)| EigenvalueRecord::shooting(C64::new(re, im), m, 0.0))
            .collect();
        let mut radii = radii;
        radii.sort_by(f64::total_cmp);
        for sector in [Sector::All, Sector::PositiveReal, Sector::NegativeReal] {
            let counts: Vec<usize> = radii.iter().map(|&r| counting_function(&recs, r, sector)).collect();
            prop_assert!(counts.windows(2).all(|w| w[0] <= w[1]), "{:?}", counts);
        }
    }

    #[test]
    fn fit_ignores_members_below_the_tail(
        a in -20.0..-1.0f64,
        b in -5.0..5.0f64,
        head in prop::collection::vec(-1e3..1e3f64, 0..9),
    ) {
        let tail: Vec<(usize, C64)> = (10..=30).map(|n| (n, C64::from(a * (n * n) as f64 + b * n as f64))).collect();
        let with_head: Vec<(usize, C64)> = head
            .iter()
            .enumerate()
            .map(|(k, &v)| (k + 1, C64::from(v)))
            .chain(tail.iter().copied())
            .collect();
        let f1 = fit_asymptotics(&tail, a, 10).unwrap();
        let f2 = fit_asymptotics(&with_head, a, 10).unwrap();
        prop_assert_eq!(f1, f2);
        prop_assert!(f1.relative_error < 1e-10);
    }

    #[test]
    fn abel_weight_is_one_at_zero_and_continuous(
        r in 0.0..1e4f64,
        arg in -PI / 4.0 + 1e-3..PI / 4.0 - 1e-3,
        t in 0.0..1.0f64,
        negative in any::<bool>(),
    ) {
        let z = C64::from_polar(r, arg) * if negative { -1.0 } else { 1.0 };
        prop_assert!((abel_weight(z, 1.5, 0.0, PI / 4.0) - 1.0).norm() < 1e-15);
        let w = abel_weight(z, 1.5, t, PI / 4.0);
        let w2 = abel_weight(z, 1.5, t + 1e-9, PI / 4.0);
        prop_assert!(w.norm() <= 1.0 + 1e-12);
        prop_assert!((w - w2).norm() <= 1e-9 * r.powf(1.5) + 1e-12);
    }
}

#[test]
fn expand_counts_multiplicity() {
    let p = problem(Coefficients::dirichlet(1.0, 1.0));
    let recs = [
        EigenvalueRecord::shooting(C64::from(-2.0), 2, 0.0),
        EigenvalueRecord::shooting(C64::from(-5.0), 1, 0.0),
    ];
    let b = assign_branches(&recs, &p).unwrap();
    let idx: Vec<usize> = expand(&b.branch1).iter().map(|e| e.0).collect();
    assert_eq!(idx, vec![1, 2, 3]);
}
