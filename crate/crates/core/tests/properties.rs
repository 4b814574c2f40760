use phasor_core::data::{window, GenSpec};
use phasor_core::fft::{naive_dft, Direction, DftPlan};
use phasor_core::math::fold_phase;
use phasor_core::phasor::{Lpm, LpmConfig, LpmParams};
use phasor_core::ComplexVec;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn complex_vec(len: usize) -> impl Strategy<Value = ComplexVec> {
    (prop::collection::vec(-2.0..2.0f64, len), prop::collection::vec(-2.0..2.0f64, len))
        .prop_map(|(re, im)| ComplexVec::new(re, im))
}

proptest! {
    #[test]
    fn dft_is_unitary_and_invertible(z in (1usize..=6).prop_flat_map(|k| complex_vec(1 << k))) {
        let plan = DftPlan::new(z.len());
        let fz = plan.forward(&z);
        prop_assert!((fz.norm() - z.norm()).abs() < 1e-10);
        prop_assert!(fz.max_abs_diff(&naive_dft(&z, Direction::Forward)) < 1e-9);
        prop_assert!(plan.inverse(&fz).max_abs_diff(&z) < 1e-12);
    }

    #[test]
    fn fold_is_a_bounded_idempotent_reflection(phi in -100.0..100.0f64) {
        let y = fold_phase(phi);
        prop_assert!(y.abs() <= std::f64::consts::FRAC_PI_2);
        prop_assert_eq!(fold_phase(y), y);
        prop_assert!((y.sin() - phi.sin()).abs() < 1e-12);
    }

    #[test]
    fn predictions_scale_with_the_input(
        x in prop::collection::vec(-3.0..3.0f64, 8),
        c in 0.1..10.0f64,
        seed in any::<u64>(),
    ) {
        prop_assume!(x.iter().any(|v| v.abs() > 1e-3));
        let model = Lpm::new(LpmConfig::new(8, 2, true)).unwrap();
        let params = LpmParams::uniform(model.config(), 0.3, &mut ChaCha8Rng::seed_from_u64(seed));
        let base = model.forward(&x, &params).unwrap();
        let scaled: Vec<f64> = x.iter().map(|v| v * c).collect();
        let out = model.forward(&scaled, &params).unwrap();
        prop_assert!((out - c * base).abs() <= 1e-9 * (1.0 + c * base.abs()));
    }

    #[test]
    fn windows_tile_the_series(len in 3usize..60, context in 1usize..10, horizon in 1usize..5) {
        let series: Vec<f64> = (0..len).map(|t| t as f64).collect();
        match window(&series, None, context, horizon) {
            Ok(samples) => {
                prop_assert_eq!(samples.len(), len + 1 - context - horizon);
                for (i, s) in samples.iter().enumerate() {
                    prop_assert_eq!(s.context[0], i as f64);
                    prop_assert_eq!(s.target, (i + context) as f64);
                }
            }
            Err(_) => prop_assert!(len < context + horizon),
        }
    }
}

#[test]
fn default_generator_settings_are_valid() {
    let spec = GenSpec::default();
    spec.validate().unwrap();
    assert_eq!(spec.amplitude_bound(), 4.5);
}
