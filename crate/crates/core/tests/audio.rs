use std::f64::consts::PI;

use casa_core::audio::*;
use casa_core::features::{pitch, PitchConfig};
use proptest::prelude::*;

/// Index of the largest |X(k)|, k in 1..n/2, by direct DFT summation.
fn dft_peak_bin(x: &[f64]) -> usize {
    let n = x.len();
    (1..n / 2)
        .map(|k| {
            let (mut re, mut im) = (0.0, 0.0);
            for (i, v) in x.iter().enumerate() {
                let ph = 2.0 * PI * (k * i % n) as f64 / n as f64;
                re += v * ph.cos();
                im -= v * ph.sin();
            }
            (k, re * re + im * im)
        })
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap()
        .0
}

fn tone(freq: f64, rate: u32, len: usize) -> AudioSignal {
    let s = (0..len).map(|i| 0.5 * (2.0 * PI * freq * i as f64 / rate as f64).sin()).collect();
    AudioSignal::new(s, rate).unwrap()
}

#[test]
fn tone_file_peaks_at_440() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("a.wav");
    write_wav(&p, &tone(440.0, 16_000, 2048)).unwrap();
    let back = read_wav(&p).unwrap();
    let nearest = (440.0 * 2048.0 / 16_000.0f64).round() as usize;
    assert_eq!(dft_peak_bin(back.samples()), nearest);
}

#[test]
fn upsampled_tone_keeps_its_peak() {
    let up = resample(&tone(440.0, 8_000, 1100), 16_000).unwrap();
    assert_eq!(up.sample_rate(), 16_000);
    let frame = &up.samples()[..2048];
    assert_eq!(dft_peak_bin(frame), (440.0 * 2048.0 / 16_000.0f64).round() as usize);

    let long = resample(&AudioSignal::zeros(8000, 8000), 16_000).unwrap();
    assert!(long.len().abs_diff(16_000) <= 1, "{}", long.len());
}

#[test]
fn independent_noise_powers_add() {
    let target = noise(NoiseKind::White, 32_000, 1);
    let other = noise(NoiseKind::White, 32_000, 2);
    let mix = mix_at_ratio(&target, &other, 2.0, RatioKind::Amplitude).unwrap();
    let scaled = scaled_noise(&target, &other, 2.0, RatioKind::Amplitude).unwrap();
    let expect = target.rms().powi(2) + rms(&scaled).powi(2);
    assert!((mix.rms().powi(2) / expect - 1.0).abs() < 0.05);
    let snr = snr_db(target.samples(), mix.samples());
    assert!((snr - 20.0 * 2f64.log10()).abs() < 1e-9, "{snr}");
}

#[test]
fn synthetic_speaker_pitch_is_tracked() {
    let speaker = SpeakerProfile::new(120.0, 1.0);
    let sig = synth_utterance(&speaker, Emotion::Neutral, 0, 3);
    let cfg = PitchConfig::default();
    let mut f0: Vec<f64> = sig
        .samples()
        .chunks_exact(cfg.frame_len)
        .map(|f| pitch(f, PIPELINE_RATE as f64, &cfg))
        .filter(|&p| p > 0.0)
        .collect();
    assert!(f0.len() >= 5, "{} voiced frames", f0.len());
    f0.sort_by(f64::total_cmp);
    let median = f0[f0.len() / 2];
    assert!((median - 120.0).abs() <= 5.0, "median F0 {median}");
}

#[test]
fn corpus_size_and_determinism() {
    let corpus = generate_corpus(8, &Emotion::ALL, 10, 1).unwrap();
    assert_eq!(corpus.manifest.len(), 480);
    assert_eq!(corpus.manifest.n_speakers(), 8);
    corpus.manifest.validate().unwrap();

    let dir = tempfile::tempdir().unwrap();
    let a = synth_corpus(2, &[Emotion::Sad], 2, 5, &dir.path().join("a")).unwrap();
    let b = synth_corpus(2, &[Emotion::Sad], 2, 5, &dir.path().join("b")).unwrap();
    for (x, y) in a.entries.iter().zip(&b.entries) {
        assert_eq!(std::fs::read(&x.path).unwrap(), std::fs::read(&y.path).unwrap());
    }
    let reread = CorpusManifest::read_csv(dir.path().join("a/manifest.csv")).unwrap();
    assert_eq!(reread.len(), 4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn wav_round_trip_is_bit_exact(codes in prop::collection::vec(i16::MIN..=i16::MAX, 1..2000)) {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("x.wav");
        let sig = AudioSignal::new(codes.iter().map(|&c| c as f64 / 32768.0).collect(), 16_000).unwrap();
        write_wav(&p, &sig).unwrap();
        let back = read_wav(&p).unwrap();
        prop_assert_eq!(back.samples(), sig.samples());
        prop_assert_eq!(back.sample_rate(), 16_000);
    }

    #[test]
    fn resample_round_trip(
        // frequencies as fractions of the rate, all below 0.4·r
        parts in prop::collection::vec((0.0f64..0.4, 0.0f64..1.0, 0.0f64..6.3), 1..5),
        rate in prop::sample::select(vec![8000u32, 16_000]),
    ) {
        let n = 4000;
        let x: Vec<f64> = (0..n)
            .map(|i| parts.iter().map(|(f, a, ph)| a * (2.0 * PI * f * i as f64 + ph).sin()).sum())
            .collect();
        let sig = AudioSignal::new(x.clone(), rate).unwrap();
        prop_assume!(sig.rms() > 1e-3);
        let back = resample(&resample(&sig, 2 * rate).unwrap(), rate).unwrap();
        prop_assert!(back.len().abs_diff(n) <= 1);
        let m = back.len().min(n);
        let err: f64 = x[..m].iter().zip(&back.samples()[..m]).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let norm: f64 = x[..m].iter().map(|a| a * a).sum::<f64>().sqrt();
        prop_assert!(err / norm <= 1e-2, "relative error {}", err / norm);
    }
}
