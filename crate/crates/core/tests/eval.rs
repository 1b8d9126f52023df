use std::collections::BTreeMap;

use casa_core::audio::{generate_corpus, Condition, CorpusManifest, Emotion, ManifestEntry, NoiseKind};
use casa_core::eval::*;
use casa_core::mask::{tone_training_pairs, train_mask_model, MaskConfig};
use casa_core::sid::{TrainConfig, VggConfig};
use casa_core::Error;
use proptest::prelude::*;

fn manifest(speakers: usize, emotions: &[Emotion], per_cell: usize) -> CorpusManifest {
    let mut entries = Vec::new();
    for s in 0..speakers {
        for &emotion in emotions {
            for u in 0..per_cell {
                entries.push(ManifestEntry {
                    path: format!("s{s}_{emotion}_{u}.wav").into(),
                    speaker: s,
                    emotion,
                    condition: Condition::Clean,
                });
            }
        }
    }
    CorpusManifest::new(entries)
}

#[test]
fn f1_matches_reported_precision_and_recall() {
    let f1 = f1_score(0.83, 0.82);
    assert!((f1 - 2.0 * 0.83 * 0.82 / 1.65).abs() < 1e-12);
    assert_eq!(format!("{f1:.2}"), "0.82");
    assert_eq!(T_CRITICAL, 1.645);
}

#[test]
fn identical_sequences_give_zero_t() {
    let x = [81.0, 85.5, 90.0, 78.25];
    assert_eq!(student_t(&x, &x).unwrap(), 0.0);
}

#[test]
fn folds_partition_a_hundred_entries() {
    // 5 speakers × 2 emotions × 10 utterances
    let m = manifest(5, &[Emotion::Angry, Emotion::Sad], 10);
    let folds = kfold_split(&m, 10, 3).unwrap();
    assert!(folds.by_emotion);
    assert_eq!(folds.sizes(), vec![10; 10]);
    let mut seen = vec![0; m.len()];
    for f in 0..10 {
        let test = folds.test_indices(f);
        let train = folds.train_indices(f);
        assert_eq!(test.len() + train.len(), m.len());
        assert!(test.iter().all(|i| !train.contains(i)));
        for i in test {
            seen[i] += 1;
        }
    }
    assert!(seen.iter().all(|&c| c == 1));
    assert_eq!(folds, kfold_split(&m, 10, 3).unwrap());
    assert_ne!(folds, kfold_split(&m, 10, 4).unwrap());
}

#[test]
fn small_cells_fall_back_to_speaker_strata() {
    // 3 per cell cannot fill 4 folds per cell
    let m = manifest(3, &[Emotion::Happy, Emotion::Neutral, Emotion::Fearful], 3);
    let folds = kfold_split(&m, 4, 0).unwrap();
    assert!(!folds.by_emotion);
    assert_eq!(folds.assignment.len(), 27);
    assert!(matches!(kfold_split(&manifest(1, &[Emotion::Sad], 3), 4, 0), Err(Error::DegenerateInput(_))));
    assert!(kfold_split(&m, 1, 0).is_err());
}

proptest! {
    #[test]
    fn rate_is_trace_over_total(counts in prop::collection::vec(0usize..20, 16)) {
        let cm = ConfusionMatrix { counts: counts.chunks(4).map(|r| r.to_vec()).collect() };
        let total: usize = counts.iter().sum();
        prop_assume!(total > 0);
        let trace = (0..4).map(|i| counts[i * 4 + i]).sum::<usize>();
        prop_assert_eq!(cm.sid_rate().unwrap(), 100.0 * trace as f64 / total as f64);
        prop_assert_eq!(cm.row_sums().iter().sum::<usize>(), total);
    }

    #[test]
    fn f1_lies_between_min_and_mean(counts in prop::collection::vec(0usize..20, 9)) {
        let cm = ConfusionMatrix { counts: counts.chunks(3).map(|r| r.to_vec()).collect() };
        for (_, s) in per_class_prf(&cm) {
            prop_assert!(s.f1 >= s.precision.min(s.recall) - 1e-12);
            prop_assert!(s.f1 <= (s.precision + s.recall) / 2.0 + 1e-12);
            prop_assert!((0.0..=1.0).contains(&s.f1));
        }
        if let Ok(m) = precision_recall_f1(&cm) {
            prop_assert!(m.f1 >= m.precision.min(m.recall) - 1e-12);
            prop_assert!(m.f1 <= (m.precision + m.recall) / 2.0 + 1e-12);
        }
    }

    #[test]
    fn t_is_antisymmetric_and_scale_free(
        pairs in prop::collection::vec((0.0f64..100.0, 0.0f64..100.0), 2..12),
        c in prop::sample::select(vec![0.5f64, 2.0, 4.0, 0.25, 8.0]),
    ) {
        let x1: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let x2: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        if let Ok(t) = student_t(&x1, &x2) {
            prop_assert_eq!(student_t(&x2, &x1).unwrap(), -t);
            let s1: Vec<f64> = x1.iter().map(|v| v * c).collect();
            let s2: Vec<f64> = x2.iter().map(|v| v * c).collect();
            // powers of two scale exactly
            prop_assert_eq!(student_t(&s1, &s2).unwrap(), t);
        }
    }

    #[test]
    fn folds_are_stratified_by_speaker(
        speakers in 2usize..6,
        per_cell in 2usize..9,
        k in 2usize..6,
        seed in any::<u64>(),
    ) {
        let m = manifest(speakers, &[Emotion::Angry, Emotion::Disgust], per_cell);
        let folds = kfold_split(&m, k, seed).unwrap();
        let sizes = folds.sizes();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        for s in 0..speakers {
            let n_s = 2 * per_cell;
            for f in 0..k {
                let got = folds.test_indices(f).iter().filter(|&&i| m.entries[i].speaker == s).count() as f64;
                prop_assert!((got - n_s as f64 / k as f64).abs() < 1.0 + 1e-9, "speaker {} fold {}: {}", s, f, got);
            }
        }
    }
}

#[test]
fn noise_free_control_and_report_files() {
    let corpus = generate_corpus(3, &[Emotion::Neutral, Emotion::Angry], 2, 9).unwrap();
    let mask_cfg = MaskConfig {
        rbm_hidden: 16,
        learned_dim: 8,
        rbm_epochs: 2,
        finetune_epochs: 2,
        ..MaskConfig::default()
    };
    let mask = train_mask_model(&tone_training_pairs(10, &[NoiseKind::White], 0.4, 2).unwrap(), &mask_cfg).unwrap();
    let cfg = ExperimentConfig {
        folds: 2,
        noise: "none".into(),
        arch: VggConfig {
            widths: vec![2, 2, 4, 4, 4],
            convs_per_block: 1,
            fc_hidden: 8,
        },
        train: TrainConfig {
            epochs: 3,
            lr: 1e-3,
            ..TrainConfig::default()
        },
        ..ExperimentConfig::default()
    };
    let mut report = run_experiment(&corpus, &mask, &cfg).unwrap();
    assert_eq!(report.trials.len(), corpus.signals.len());
    for system in System::ALL {
        let clean = report.result(system, Condition::Clean);
        let noisy = report.result(system, Condition::Noisy);
        assert_eq!(clean.average, noisy.average);
        assert_eq!(clean.per_emotion, noisy.per_emotion);
        assert_eq!(clean.confusion.total(), corpus.signals.len());
        assert_eq!(report.noisy_minus_clean[system.as_str()], 0.0);
    }
    for t in &report.trials {
        assert_eq!(report.folds.assignment[t.index], t.fold);
    }

    let baseline = Baseline {
        name: "reference".into(),
        condition: Condition::Clean,
        rates: vec![10.0, 30.0],
    };
    report.compare_baselines(&[baseline]).unwrap();
    assert!(report.t_tests.iter().any(|t| t.against == "reference"));
    let short = Baseline {
        name: "short".into(),
        condition: Condition::Noisy,
        rates: vec![10.0],
    };
    assert!(report.compare_baselines(&[short]).is_err());

    let dir = tempfile::tempdir().unwrap();
    write_report(&report, dir.path()).unwrap();
    for name in [
        "summary.json",
        "per_emotion.csv",
        "table1_analogue.csv",
        "table2_analogue.csv",
        "fold_rates.csv",
        "trials.csv",
        "folds.csv",
        "confusion_segregated_noisy.csv",
        "fig2_analogue.svg",
        "fig3_analogue.svg",
        "fig4_analogue.svg",
    ] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    let per: BTreeMap<String, serde_json::Value> =
        serde_json::from_value(json["results"][0]["per_emotion"].clone()).unwrap();
    for e in Emotion::ALL {
        assert!(per.contains_key(e.as_str()));
    }
    let svg = std::fs::read_to_string(dir.path().join("fig2_analogue.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
}

#[test]
fn baselines_load_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("b.csv");
    std::fs::write(&p, "name,condition,rate\nmlp,noisy,70\nmlp,noisy,72\nsvm,clean,80\nmlp,clean,75\n").unwrap();
    let b = read_baselines(&p).unwrap();
    assert_eq!(b.len(), 3);
    assert_eq!(b[0].rates, vec![70.0, 72.0]);
    assert_eq!(b[0].condition, Condition::Noisy);
}
