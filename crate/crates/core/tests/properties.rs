use ghostsnr::composition::{bucket_from_pixel, pixel_from_single};
use ghostsnr::moments::{orders, single_mode, SourceKind};
use ghostsnr::protocols::{protocol_mean, snr, ProtocolKind};
use ghostsnr::simulator::{read_stack, sample_stack, write_stack, MaskSpec};
use ghostsnr::ExperimentParams;
use proptest::prelude::*;

fn source() -> impl Strategy<Value = SourceKind> {
    prop_oneof![Just(SourceKind::TwinBeam), Just(SourceKind::Thermal)]
}

fn kind() -> impl Strategy<Value = ProtocolKind> {
    prop::sample::select(ProtocolKind::ALL.to_vec())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn exchanging_arms_swaps_the_table(s in source(), mu in 1e-3..50.0f64, e1 in 0.0..=1.0f64, e2 in 0.0..=1.0f64) {
        let a = single_mode(s, mu, e1, e2).unwrap();
        let b = single_mode(s, mu, e2, e1).unwrap();
        for (p, q) in orders() {
            let (x, y) = (*a.get(p, q), *b.get(q, p));
            prop_assert!((x - y).abs() <= 1e-12 * x.abs().max(1.0));
        }
    }

    #[test]
    fn one_mode_and_one_cell_change_nothing(s in source(), mu in 1e-3..20.0f64, e in 0.0..=1.0f64) {
        let single = single_mode(s, mu, e, e).unwrap();
        let pixel = pixel_from_single(&single, 1).unwrap();
        let bucket = bucket_from_pixel(&pixel, 1).unwrap();
        for (p, q) in orders() {
            prop_assert_eq!(pixel.joint.get(p, q), single.get(p, q));
            prop_assert_eq!(bucket.joint.get(p, q), single.get(p, q));
        }
    }

    #[test]
    fn snr_is_finite_and_frame_invariant(
        s in source(), k in kind(), mu in 1e-3..1e3f64, m in 1u64..50, r in 1u64..50,
        e1 in 0.05..=1.0f64, e2 in 0.05..=1.0f64, frames in 2u64..100_000,
    ) {
        let mut p = ExperimentParams::new(s, mu, m, e1, r, frames).unwrap();
        p.eta2 = e2;
        let a = snr(k, &p).unwrap();
        prop_assert!(a.snr.is_finite() && a.snr > 0.0 && a.noise > 0.0);
        p.frames = frames * 3 + 7;
        let b = snr(k, &p).unwrap();
        prop_assert!((a.snr_per_sqrt_frame / b.snr_per_sqrt_frame - 1.0).abs() < 1e-12);
    }

    #[test]
    fn covariance_vanishes_outside(s in source(), mu in 1e-3..1e3f64, m in 1u64..50, r in 1u64..50, e in 0.0..=1.0f64) {
        let p = ExperimentParams::new(s, mu, m, e, r, 100).unwrap();
        let (_, out) = protocol_mean(ProtocolKind::Covariance, &p).unwrap();
        prop_assert_eq!(out, 0.0);
    }

    #[test]
    fn illumination_back_solve(s in source(), target in 1e-4..1e4f64, m in 1u64..1000, e in 0.01..=1.0f64) {
        let p = ExperimentParams::new(s, 1.0, m, e, 3, 10).unwrap().with_illumination(target).unwrap();
        prop_assert!((p.illumination() / target - 1.0).abs() < 1e-12);
    }

    #[test]
    fn stacks_survive_the_container(s in source(), seed in any::<u64>(), frames in 2u64..20, m in 1u64..80) {
        let p = ExperimentParams::new(s, 0.7, m, 0.6, 2, frames).unwrap();
        let mask = MaskSpec::from_ascii("#..\n.#.").unwrap();
        let stack = sample_stack(&p, &mask, seed).unwrap();
        let mut buf = Vec::new();
        write_stack(&stack, &mut buf).unwrap();
        prop_assert_eq!(read_stack(&buf[..]).unwrap(), stack);
    }
}
