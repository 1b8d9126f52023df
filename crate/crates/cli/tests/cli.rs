use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use casa_core::audio::{mix_at_ratio, read_wav, scaled_noise, snr_db, write_wav, AudioSignal, NoiseKind, RatioKind, PIPELINE_RATE};
use casa_core::mask::tone_training_pairs;

/// Small models so every command finishes in seconds.
const FAST: &[&str] = &[
    "--set",
    "corpus.speakers=2",
    "--set",
    "corpus.utterances=3",
    "--set",
    "corpus.emotions=[\"neutral\"]",
    "--set",
    "mask_training.pairs=10",
    "--set",
    "mask.rbm_hidden=16",
    "--set",
    "mask.learned_dim=8",
    "--set",
    "mask.rbm_epochs=2",
    "--set",
    "mask.finetune_epochs=2",
    "--set",
    "sid.arch.widths=[2,4,4,8,8]",
    "--set",
    "sid.arch.convs_per_block=1",
    "--set",
    "sid.arch.fc_hidden=16",
];

fn casa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_casa-sid"))
        .args(FAST)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = casa(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn corpus(dir: &Path) -> PathBuf {
    let out = dir.join("corpus");
    ok(&["synth-corpus", "--out", s(&out), "--seed", "4"]);
    out.join("manifest.csv")
}

#[test]
fn missing_model_exits_with_code_two() {
    let dir = tempfile::tempdir().unwrap();
    let wav = dir.path().join("in.wav");
    write_wav(&wav, &AudioSignal::new(vec![0.1; 4000], PIPELINE_RATE).unwrap()).unwrap();
    let out = casa(&["segregate", s(&wav), s(&dir.path().join("out.wav")), "--model", "/nonexistent/mask.model"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    assert!(err.contains("not found"));
}

#[test]
fn empty_manifest_is_a_validation_error() {
    let dir = tempfile::tempdir().unwrap();
    let m = dir.path().join("manifest.csv");
    std::fs::write(&m, "path,speaker,emotion,condition\n").unwrap();
    let out = casa(&["train-mask", "--manifest", s(&m), "--out", s(&dir.path().join("m.model"))]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("no entries"), "{err}");
    assert_eq!(err.trim_end().lines().count(), 1);
}

#[test]
fn bad_config_key_is_rejected() {
    let out = casa(&["--set", "mask.lcdb=3", "print-config"]);
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr).unwrap().contains("mask.lcdb"));
}

#[test]
fn printed_config_loads_back() {
    let dir = tempfile::tempdir().unwrap();
    let text = ok(&["print-config", "--seed", "12"]);
    assert!(text.contains("seed = 12"));
    let p = dir.path().join("pipeline.toml");
    std::fs::write(&p, &text).unwrap();
    assert_eq!(ok(&["--config", s(&p), "print-config"]), text);
}

#[test]
fn oracle_segregation() {
    let dir = tempfile::tempdir().unwrap();
    let (target, noise) = tone_training_pairs(1, &[NoiseKind::White], 0.5, 8).unwrap().remove(0);
    let noise = AudioSignal::new(scaled_noise(&target, &noise, 1.0, RatioKind::Amplitude).unwrap(), PIPELINE_RATE).unwrap();
    let target = target.scaled(0.3 / target.samples().iter().fold(0.0f64, |m, v| m.max(v.abs())));
    let noise = noise.scaled(0.3 / noise.samples().iter().fold(0.0f64, |m, v| m.max(v.abs())));
    let mix = mix_at_ratio(&target, &noise, 1.0, RatioKind::Amplitude).unwrap();
    let silent = AudioSignal::zeros(target.len(), PIPELINE_RATE);
    let p = |n: &str| dir.path().join(n);
    for (name, sig) in [("t.wav", &target), ("n.wav", &noise), ("mix.wav", &mix), ("silent.wav", &silent)] {
        write_wav(p(name), sig).unwrap();
    }
    let (t, m) = (read_wav(p("t.wav")).unwrap(), read_wav(p("mix.wav")).unwrap());

    // the noise file must be the one that was mixed in: recompute it from the
    // quantized files
    let n_exact: Vec<f64> = m.samples().iter().zip(t.samples()).map(|(a, b)| a - b).collect();
    write_wav(p("n.wav"), &AudioSignal::new(n_exact, PIPELINE_RATE).unwrap()).unwrap();
    ok(&["segregate", s(&p("mix.wav")), s(&p("out.wav")), "--oracle-target", s(&p("t.wav")), "--oracle-noise", s(&p("n.wav"))]);
    let out = read_wav(p("out.wav")).unwrap();
    let gain = snr_db(t.samples(), out.samples()) - snr_db(t.samples(), m.samples());
    assert!(gain > 0.0, "SNR gain {gain} dB");
    assert!(p("out.wav.mask.png").exists());
    let csv = std::fs::read_to_string(p("out.wav.mask.csv")).unwrap();
    assert_eq!(csv.lines().count(), 18);

    // clean input with silent noise keeps every voiced unit
    ok(&["segregate", s(&p("t.wav")), s(&p("same.wav")), "--oracle-target", s(&p("t.wav")), "--oracle-noise", s(&p("silent.wav"))]);
    let same = read_wav(p("same.wav")).unwrap();
    let err: f64 = same.samples().iter().zip(t.samples()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let norm: f64 = t.samples().iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(err / norm <= 1e-3, "relative error {}", err / norm);
}

#[test]
fn training_commands_are_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path());
    let p = |n: &str| dir.path().join(n);
    let a = ok(&["train-mask", "--manifest", s(&manifest), "--out", s(&p("a.model")), "--seed", "2"]);
    let b = ok(&["train-mask", "--manifest", s(&manifest), "--out", s(&p("b.model")), "--seed", "2"]);
    assert_eq!(std::fs::read(p("a.model")).unwrap(), std::fs::read(p("b.model")).unwrap());
    let hash = |t: &str| t.split("sha256 ").nth(1).unwrap().trim().trim_end_matches(')').to_string();
    assert_eq!(hash(&a), hash(&b));

    let sid = |out: &str| ok(&["train-sid", "--manifest", s(&manifest), "--out", s(&p(out)), "--set", "sid.train.epochs=2", "--mask", s(&p("a.model"))]);
    sid("s1.model");
    sid("s2.model");
    assert_eq!(std::fs::read(p("s1.model")).unwrap(), std::fs::read(p("s2.model")).unwrap());
    ok(&["identify", s(&dir.path().join("corpus/clean/spk00_neutral_00.wav")), "--model", s(&p("s1.model")), "--mask", s(&p("a.model"))]);
}

#[test]
fn toy_speakers_are_learned_and_logged() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path());
    let model = dir.path().join("sid.model");
    let log = dir.path().join("log.csv");
    ok(&[
        "train-sid", "--manifest", s(&manifest), "--out", s(&model), "--log", s(&log),
        "--set", "sid.train.epochs=60", "--set", "sid.train.lr=0.001", "--set", "sid.train.batch=6",
    ]);
    let text = std::fs::read_to_string(&log).unwrap();
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 60);
    let acc: f64 = rows.last().unwrap().split(',').nth(2).unwrap().parse().unwrap();
    assert!(acc >= 0.95, "training accuracy {acc}");
}

#[test]
fn evaluate_writes_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = corpus(dir.path());
    let p = |n: &str| dir.path().join(n);
    ok(&["train-mask", "--manifest", s(&manifest), "--out", s(&p("mask.model"))]);
    let stdout = ok(&[
        "evaluate", "--manifest", s(&manifest), "--mask", s(&p("mask.model")), "--report", s(&p("report")),
        "--set", "experiment.folds=3", "--set", "experiment.train.epochs=2",
        "--set", "experiment.arch.widths=[2,2,2,2,2]",
    ]);
    assert!(stdout.contains("delta"));
    for f in ["fig2_analogue.svg", "fig3_analogue.svg", "fig4_analogue.svg", "table1_analogue.csv", "table2_analogue.csv"] {
        assert!(p("report").join(f).exists(), "{f}");
    }
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(p("report/summary.json")).unwrap()).unwrap();
    for r in json["results"].as_array().unwrap() {
        for e in ["angry", "happy", "neutral", "sad", "fearful", "disgust"] {
            assert!(r["per_emotion"].get(e).is_some(), "{e}");
        }
    }
    assert!(json["noisy_minus_clean"]["segregated"].is_number());
}
