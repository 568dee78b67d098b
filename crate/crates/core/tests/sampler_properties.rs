use lpcorrupt_core::{
    apply_noise, l0_count, lp_distance, lp_norm, sample_noise, CorruptionSpec, ImageTensor, Noise, PNorm,
    RadialMode, RngStream,
};
use proptest::prelude::*;
use rand::Rng;

fn norm_strategy() -> impl Strategy<Value = PNorm> {
    prop_oneof![
        (0.2f64..20.0).prop_map(PNorm::Finite),
        Just(PNorm::Finite(1.0)),
        Just(PNorm::Finite(2.0)),
        Just(PNorm::Infinity),
    ]
}

fn radial_strategy() -> impl Strategy<Value = RadialMode> {
    prop_oneof![
        Just(RadialMode::Ball),
        Just(RadialMode::Sphere),
        (0.5f64..4.0).prop_map(RadialMode::Exponent),
    ]
}

fn random_image(len: usize, seed: u64) -> ImageTensor {
    let mut rng = RngStream::new(seed, u64::MAX).rng();
    ImageTensor::new([1, 1, len], (0..len).map(|_| rng.random::<f32>()).collect()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn draws_stay_in_ball(p in norm_strategy(), radial in radial_strategy(), d in 1usize..300,
                          eps in 0.01f64..50.0, seed in any::<u64>()) {
        let spec = CorruptionSpec::new(p, eps).unwrap().with_radial(radial).unwrap();
        let v = sample_noise(d, &spec, &mut RngStream::new(seed, 0).rng()).unwrap();
        let n = lp_norm(v.additive().unwrap().iter().copied(), p);
        prop_assert!(n <= eps * (1.0 + 1e-9), "norm {n} > {eps}");
        if radial == RadialMode::Sphere {
            prop_assert!((n / eps - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn same_stream_same_draw(p in norm_strategy(), d in 1usize..100, seed in any::<u64>(), idx in any::<u64>()) {
        let spec = CorruptionSpec::new(p, 1.0).unwrap();
        let s = RngStream::new(seed, idx);
        prop_assert_eq!(
            sample_noise(d, &spec, &mut s.rng()).unwrap(),
            sample_noise(d, &spec, &mut s.rng()).unwrap()
        );
    }

    #[test]
    fn applied_distance_is_bounded(p in norm_strategy(), d in 1usize..200, eps in 0.01f64..20.0,
                                   clamp in any::<bool>(), seed in any::<u64>()) {
        let img = random_image(d, seed);
        let spec = CorruptionSpec::new(p, eps).unwrap();
        let noise = sample_noise(d, &spec, &mut RngStream::new(seed, 1).rng()).unwrap();
        let out = apply_noise(&img, &noise, clamp).unwrap();
        prop_assert!(lp_distance(&img, &out, p).unwrap() <= eps * (1.0 + 1e-9));
        if clamp {
            prop_assert!(out.data().iter().all(|v| (0.0..=1.0).contains(v)));
        }
    }

    #[test]
    fn l0_marks_rounded_share(d in 1usize..500, share in 0.0f64..1.0, seed in any::<u64>()) {
        let eps = share.max(0.5 / d as f64 + 1e-12).min(1.0);
        let spec = CorruptionSpec::new(PNorm::Zero, eps).unwrap();
        let v = sample_noise(d, &spec, &mut RngStream::new(seed, 0).rng()).unwrap();
        let Noise::Replace { indices, values } = v.noise else { panic!("L0 draw is a replacement") };
        prop_assert_eq!(indices.len(), l0_count(eps, d));
        let mut sorted = indices.clone();
        sorted.sort_unstable();
        sorted.dedup();
        prop_assert_eq!(sorted.len(), indices.len());
        prop_assert!(values.iter().all(|v| *v == 0.0 || *v == 1.0));
    }
}

#[test]
fn clamping_never_increases_distance() {
    let spec = CorruptionSpec::new(PNorm::Finite(1.0), 30.0).unwrap();
    for seed in 0..50 {
        let img = random_image(64, seed);
        let noise = sample_noise(64, &spec, &mut RngStream::new(seed, 0).rng()).unwrap();
        let free = apply_noise(&img, &noise, false).unwrap();
        let clamped = apply_noise(&img, &noise, true).unwrap();
        let p = PNorm::Finite(1.0);
        assert!(lp_distance(&img, &clamped, p).unwrap() <= lp_distance(&img, &free, p).unwrap());
    }
}
