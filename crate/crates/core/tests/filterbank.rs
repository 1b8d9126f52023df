use std::f64::consts::PI;

use casa_core::audio::{noise, AudioSignal, NoiseKind, PIPELINE_RATE};
use casa_core::filterbank::*;
use proptest::prelude::*;

fn signal(x: Vec<f64>) -> AudioSignal {
    AudioSignal::new(x, PIPELINE_RATE).unwrap()
}

fn tone(freq: f64, len: usize) -> AudioSignal {
    signal((0..len).map(|i| (2.0 * PI * freq * i as f64 / PIPELINE_RATE as f64).sin()).collect())
}

fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

#[test]
fn geometry_of_the_default_tree() {
    let tree = build_tree();
    assert_eq!(tree.n_channels(), 18);
    let sum_sq: f64 = DB4_LOWPASS.iter().map(|h| h * h).sum();
    assert!((sum_sq - 1.0).abs() < 1e-12);
    let edges = tree.band_edges();
    assert_eq!(edges[0].0, 0.0);
    assert_eq!(edges[17].1, 8000.0);
    for w in edges.windows(2) {
        assert_eq!(w[0].1, w[1].0);
    }
    let bw = tree.bandwidths();
    assert!(bw.windows(2).all(|w| w[0] <= w[1]));
    let centers = tree.center_frequencies();
    assert!(centers.windows(2).all(|w| w[0] < w[1]));
    assert!(centers[17] >= 4000.0);
}

#[test]
fn white_noise_energy_follows_bandwidth() {
    let tree = build_tree();
    let sub = analyze(&noise(NoiseKind::White, 1 << 16, 11), &tree);
    let e = sub.energies();
    let total: f64 = e.iter().sum();
    for (c, (ec, bw)) in e.iter().zip(tree.bandwidths()).enumerate() {
        let expect = total * bw / 8000.0;
        assert!((ec / expect - 1.0).abs() < 0.2, "channel {c}: {ec} vs {expect}");
    }
}

#[test]
fn tone_sweep_moves_up_the_channels() {
    let tree = build_tree();
    let mut prev = 0;
    let mut f = 50.0;
    while f <= 7000.0 {
        let e = analyze(&tone(f, 4096), &tree).energies();
        let best = (0..18).max_by(|&a, &b| e[a].total_cmp(&e[b])).unwrap();
        assert!(best >= prev, "{f} Hz fell back from channel {prev} to {best}");
        prev = best;
        f *= 1.05;
    }
    assert_eq!(prev, 16);
}

#[test]
fn cochleagram_frames_and_spectrogram_shape() {
    let tree = build_tree();
    let coch = cochleagram(&analyze(&tone(440.0, 16_000), &tree), DEFAULT_FRAME_LEN, DEFAULT_HOP).unwrap();
    assert_eq!((coch.n_channels(), coch.n_frames()), (18, 99));
    let spec = spectrogram(&tone(1000.0, 1024));
    assert_eq!((spec.bins(), spec.frames()), (129, 7));
    for t in 0..7 {
        let best = (0..129).max_by(|&a, &b| spec.get(a, t).total_cmp(&spec.get(b, t))).unwrap();
        assert_eq!(best, 16);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn analysis_is_perfect_reconstruction(x in prop::collection::vec(-1.0f64..1.0, 64..3000)) {
        let tree = build_tree();
        let sig = signal(x.clone());
        let sub = analyze(&sig, &tree);
        let back = synthesize(&sub, &tree).unwrap();
        let err = x.iter().zip(back.samples()).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        prop_assert!(err / energy(&x).sqrt() <= 1e-6);
    }

    #[test]
    fn aligned_analysis_conserves_energy(blocks in 2usize..80, seed in any::<u64>()) {
        let tree = build_tree();
        let n = blocks << tree.max_depth();
        let sig = noise(NoiseKind::Pink, n, seed);
        let e: f64 = analyze(&sig, &tree).energies().iter().sum();
        prop_assert!((e / sig.energy() - 1.0).abs() <= 1e-6);
    }

    #[test]
    fn adding_units_never_lowers_output_energy(
        seed in any::<u64>(),
        base in prop::collection::vec(any::<bool>(), 18 * 24),
        extra in prop::collection::vec(any::<bool>(), 18 * 24),
    ) {
        let tree = build_tree();
        let sig = noise(NoiseKind::Babble, 160 * 25, seed);
        let coch = cochleagram(&analyze(&sig, &tree), DEFAULT_FRAME_LEN, DEFAULT_HOP).unwrap();
        prop_assert_eq!(coch.n_frames(), 24);
        let rows = |bits: &dyn Fn(usize) -> bool| -> Vec<Vec<u8>> {
            (0..18).map(|c| (0..24).map(|t| u8::from(bits(c * 24 + t))).collect()).collect()
        };
        let small = TFMask::from_rows(&rows(&|i| base[i])).unwrap();
        let large = TFMask::from_rows(&rows(&|i| base[i] || extra[i])).unwrap();
        let e_small = apply_mask_and_resynthesize(&coch, &small, &tree).unwrap().energy();
        let e_large = apply_mask_and_resynthesize(&coch, &large, &tree).unwrap().energy();
        prop_assert!(e_large >= e_small * (1.0 - 1e-9), "{} < {}", e_large, e_small);
    }
}
