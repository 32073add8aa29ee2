mod common;

use nalgebra::Matrix2;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use pmst_core::bounds::{self, Model};
use pmst_core::builder::{self, UmbrellaFamily};
use pmst_core::bundle::WitnessBundle;
use pmst_core::eval::{self, PMScenario};
use pmst_core::qstate::born_binary;
use pmst_core::sim::{self, Circuit};
use pmst_core::{BinaryMeasurement, GramMatrix, QubitState};

use common::*;

fn unitary_defect(u: &Matrix2<Complex64>) -> f64 {
    let p = u.adjoint() * u;
    (p - Matrix2::identity()).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn witness_value_is_rotation_invariant(seed in any::<u64>(), angle in 0.0..6.3f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = witness(&mut rng, 4, 3);
        let m = units(&mut rng, 4);
        let v = units(&mut rng, 3);
        let k = unit(&mut rng);
        let rot = |xs: &[pmst_core::BlochVector]| xs.iter().map(|x| rotate(x, &k, angle)).collect::<Vec<_>>();
        let a = eval::eval_witness(&w, &PMScenario::pure(&m, &v).unwrap()).unwrap();
        let b = eval::eval_witness(&w, &PMScenario::pure(&rot(&m), &rot(&v)).unwrap()).unwrap();
        prop_assert!((a - b).abs() < 1e-12, "{} vs {}", a, b);
    }

    #[test]
    fn see_saw_never_decreases(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = witness(&mut rng, 5, 3);
        let init: Vec<BinaryMeasurement> = units(&mut rng, 3)
            .into_iter()
            .map(|v| BinaryMeasurement::projective(v).unwrap())
            .collect();
        let start = eval::best_states_for(&w, &init);
        let out = bounds::see_saw(&w, &init, 0);
        prop_assert!(out.monotone);
        prop_assert!(out.value >= start.q_v - 1e-12);
    }

    #[test]
    fn best_states_dominate(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let w = witness(&mut rng, 4, 3);
        let v = units(&mut rng, 3);
        let best = eval::best_states(&w, &v).unwrap();
        let at_best = eval::eval_witness(&w, &PMScenario::pure(&best.states, &v).unwrap()).unwrap();
        prop_assert!((at_best - best.q_v).abs() < 1e-12);
        let other = eval::eval_witness(&w, &PMScenario::pure(&units(&mut rng, 4), &v).unwrap()).unwrap();
        prop_assert!(other <= best.q_v + 1e-12);
        let g = GramMatrix::from_vectors(&v);
        for x in 0..4 {
            prop_assert!((eval::u_norm_from_gram(&w, x, &g) - best.u.norms[x]).abs() < 1e-12);
        }
    }

    #[test]
    fn gram_factor_round_trip(seed in any::<u64>(), n in 1usize..7) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vs = units(&mut rng, n);
        let g = GramMatrix::from_vectors(&vs);
        prop_assert!(g.is_legitimate());
        let back = g.factor().unwrap();
        let diff = (GramMatrix::from_vectors(&back).entries() - g.entries()).abs().max();
        prop_assert!(diff < 1e-9, "{}", diff);
    }

    #[test]
    fn circuit_unitaries_and_probabilities(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = unit(&mut rng);
        let v = unit(&mut rng);
        let c = Circuit::new(0, 0, &m, &v, 1).unwrap();
        prop_assert!((c.alpha.norm_sqr() + c.beta.norm_sqr() - 1.0).abs() < 1e-12);
        prop_assert!(unitary_defect(&sim::prep_unitary(c.alpha, c.beta)) < 1e-12);
        prop_assert!(unitary_defect(&sim::proj_unitary(c.theta, c.phi)) < 1e-12);
        let (p0, p1) = c.probabilities();
        let (q0, q1) = born_binary(&QubitState::pure(m).unwrap(), &BinaryMeasurement::projective(v).unwrap());
        prop_assert!((p0 - q0).abs() < 1e-12 && (p1 - q1).abs() < 1e-12);
    }

    #[test]
    fn umbrella_bounds_are_ordered(c in 0.0..3.0f64) {
        let w = UmbrellaFamily::new(c).unwrap().witness();
        let class = bounds::classical_bound(&w).unwrap().value;
        let real = bounds::quantum_bound(&w, Model::RealQubit, 32, 1).unwrap().value;
        let complex = bounds::quantum_bound(&w, Model::ComplexQubit, 16, 1).unwrap().value;
        prop_assert!(class <= real + 1e-9 && real <= complex + 1e-9, "{} {} {}", class, real, complex);
        prop_assert!(complex <= 2.0 + 1e-9);
    }

    #[test]
    fn bundles_round_trip(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let povm = extremal_povm(&mut rng);
        let m: Vec<_> = povm.directions().iter().map(|n| -*n).collect();
        let c = builder::build_4x3_raw(&m).unwrap();
        let text = WitnessBundle::from_construction(&c).to_json().unwrap();
        prop_assert_eq!(WitnessBundle::from_json(&text).unwrap().to_construction().unwrap(), c);
    }
}

/// Circuit path against the Bloch path on a fixed batch of 10⁴ pairs.
#[test]
fn circuit_equals_born_on_ten_thousand_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0_f64;
    for _ in 0..10_000 {
        let m = unit(&mut rng);
        let v = unit(&mut rng);
        let (p0, _) = Circuit::new(0, 0, &m, &v, 1).unwrap().probabilities();
        worst = worst.max((p0 - (1.0 + m.dot(&v)) / 2.0).abs());
    }
    assert!(worst < 1e-12, "{worst}");
}

/// Poles and the xz-plane, where the angle and amplitude formulas branch.
#[test]
fn circuit_equals_born_on_axes() {
    use pmst_core::BlochVector;
    let axes = [
        BlochVector::new(0.0, 0.0, 1.0),
        BlochVector::new(0.0, 0.0, -1.0),
        BlochVector::new(1.0, 0.0, 0.0),
        BlochVector::new(-1.0, 0.0, 0.0),
        BlochVector::new(0.0, 1.0, 0.0),
        BlochVector::new(0.0, -1.0, 0.0),
    ];
    for m in &axes {
        for v in &axes {
            let (p0, _) = Circuit::new(0, 0, m, v, 1).unwrap().probabilities();
            assert!((p0 - (1.0 + m.dot(v)) / 2.0).abs() < 1e-12, "{m:?} {v:?}");
        }
    }
}
