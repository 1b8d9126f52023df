use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use log::{info, warn};
use serde::{Deserialize, Serialize};

use super::folds::{kfold_split, Folds};
use super::metrics::{precision_recall_f1, sid_rate, student_t, ConfusionMatrix, Prf, T_CRITICAL};
use super::plot::grouped_bar_svg;
use crate::audio::{mix_at_ratio, noise, AudioSignal, Condition, Corpus, Emotion, NoiseKind, RatioKind};
use crate::error::{Error, Result};
use crate::filterbank::export::write_matrix_csv;
use crate::mask::MaskModel;
use crate::sid::{network_inputs, train_on_inputs, InputSpec, SpeechVggNet, TrainConfig, VggConfig};

/// Cross-validated comparison of a speaker net fed raw spectrograms against
/// one fed mask-segregated speech, both trained on clean speech and tested
/// on clean and noise-corrupted copies of the held-out fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub folds: usize,
    /// How many folds to train and test, starting at fold 0; 0 runs all.
    pub folds_to_run: usize,
    /// Noise family for the noisy condition, or `"none"`.
    pub noise: String,
    /// Target-to-noise ratio of the noisy condition.
    pub ratio: f64,
    pub ratio_kind: RatioKind,
    pub arch: VggConfig,
    pub train: TrainConfig,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            folds: 10,
            folds_to_run: 0,
            noise: "white".into(),
            ratio: 2.0,
            ratio_kind: RatioKind::Amplitude,
            arch: VggConfig::compact(),
            train: TrainConfig {
                epochs: 40,
                lr: 1e-3,
                ..TrainConfig::default()
            },
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    /// `None` for the noise-free control.
    pub fn noise_kind(&self) -> Result<Option<NoiseKind>> {
        if self.noise.trim().eq_ignore_ascii_case("none") {
            Ok(None)
        } else {
            NoiseKind::parse(&self.noise).map(Some)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::Config(format!("need at least two folds, got {}", self.folds)));
        }
        if !(self.ratio.is_finite() && self.ratio > 0.0) {
            return Err(Error::Config(format!("mixing ratio must be positive, got {}", self.ratio)));
        }
        self.noise_kind()?;
        self.arch.validate()?;
        self.train.validate()
    }

    fn folds_run(&self) -> Vec<usize> {
        let n = if self.folds_to_run == 0 { self.folds } else { self.folds_to_run.min(self.folds) };
        (0..n).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum System {
    /// Spectrogram of the input fed straight to the speaker net.
    Raw,
    /// Input segregated by the mask model first.
    Segregated,
}

impl System {
    pub const ALL: [System; 2] = [System::Raw, System::Segregated];

    pub fn as_str(self) -> &'static str {
        match self {
            System::Raw => "raw",
            System::Segregated => "segregated",
        }
    }
}

const CONDITIONS: [Condition; 2] = [Condition::Clean, Condition::Noisy];

/// One held-out utterance and the four decisions made on it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub index: usize,
    pub path: PathBuf,
    pub fold: usize,
    pub speaker: usize,
    pub emotion: Emotion,
    pub raw_clean: usize,
    pub raw_noisy: usize,
    pub segregated_clean: usize,
    pub segregated_noisy: usize,
}

impl Trial {
    pub fn predicted(&self, system: System, condition: Condition) -> usize {
        match (system, condition) {
            (System::Raw, Condition::Clean) => self.raw_clean,
            (System::Raw, Condition::Noisy) => self.raw_noisy,
            (System::Segregated, Condition::Clean) => self.segregated_clean,
            (System::Segregated, Condition::Noisy) => self.segregated_noisy,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionResult {
    pub system: System,
    pub condition: Condition,
    /// Rate per emotion; `None` for emotions absent from the corpus.
    pub per_emotion: BTreeMap<String, Option<f64>>,
    /// Rate over all trials.
    pub average: f64,
    pub fold_rates: Vec<f64>,
    pub metrics: Prf,
    pub confusion: ConfusionMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TTest {
    pub system: System,
    pub condition: Condition,
    pub against: String,
    pub t: f64,
    /// `t > T_CRITICAL`.
    pub significant: bool,
}

/// Per-fold rates of an external system, entered as `name,condition,rate`
/// CSV rows in fold order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub name: String,
    pub condition: Condition,
    pub rates: Vec<f64>,
}

pub fn read_baselines(path: impl AsRef<Path>) -> Result<Vec<Baseline>> {
    #[derive(Deserialize)]
    struct Row {
        name: String,
        condition: Condition,
        rate: f64,
    }
    let mut out: Vec<Baseline> = Vec::new();
    for row in csv::Reader::from_path(path.as_ref())?.deserialize() {
        let row: Row = row?;
        match out.iter_mut().find(|b| b.name == row.name && b.condition == row.condition) {
            Some(b) => b.rates.push(row.rate),
            None => out.push(Baseline {
                name: row.name,
                condition: row.condition,
                rates: vec![row.rate],
            }),
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub speakers: usize,
    pub noise: String,
    pub ratio: f64,
    pub ratio_kind: RatioKind,
    /// How precision, recall and F1 are averaged over speakers.
    pub averaging: String,
    pub folds: Folds,
    pub folds_run: Vec<usize>,
    pub results: Vec<ConditionResult>,
    /// Noisy minus clean average rate, per system.
    pub noisy_minus_clean: BTreeMap<String, f64>,
    /// Segregated minus raw average rate on the noisy condition.
    pub segregation_gain_noisy: f64,
    pub t_critical: f64,
    pub t_tests: Vec<TTest>,
    pub trials: Vec<Trial>,
}

impl EvalReport {
    pub fn result(&self, system: System, condition: Condition) -> &ConditionResult {
        self.results
            .iter()
            .find(|r| r.system == system && r.condition == condition)
            .expect("every system and condition is reported")
    }

    pub fn rate(&self, system: System, condition: Condition) -> f64 {
        self.result(system, condition).average
    }

    /// t-tests of the segregated system's fold rates against external
    /// baselines; each baseline needs one rate per fold run.
    pub fn compare_baselines(&mut self, baselines: &[Baseline]) -> Result<()> {
        for b in baselines {
            let ours = &self.result(System::Segregated, b.condition).fold_rates;
            let t = student_t(ours, &b.rates)?;
            self.t_tests.push(TTest {
                system: System::Segregated,
                condition: b.condition,
                against: b.name.clone(),
                t,
                significant: t > T_CRITICAL,
            });
        }
        Ok(())
    }
}

struct Cached {
    raw: Vec<Vec<f64>>,
    seg: Vec<Vec<f64>>,
}

fn prepare(sig: &AudioSignal, spec: &InputSpec, model: &MaskModel) -> Result<Cached> {
    Ok(Cached {
        raw: network_inputs(sig, spec, None)?,
        seg: network_inputs(sig, spec, Some(model))?,
    })
}

/// Noise track for utterance `index` of the noisy condition.
pub fn noisy_copy(sig: &AudioSignal, index: usize, cfg: &ExperimentConfig) -> Result<AudioSignal> {
    match cfg.noise_kind()? {
        None => Ok(sig.clone()),
        Some(kind) => {
            let seed = cfg.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(1000 + index as u64);
            mix_at_ratio(sig, &noise(kind, sig.len(), seed), cfg.ratio, cfg.ratio_kind)
        }
    }
}

/// Runs the cross-validated raw-versus-segregated comparison.
pub fn run_experiment(corpus: &Corpus, segregator: &MaskModel, cfg: &ExperimentConfig) -> Result<EvalReport> {
    cfg.validate()?;
    corpus.manifest.validate()?;
    if corpus.signals.len() != corpus.manifest.len() {
        return Err(Error::Shape("one signal per manifest entry is required".into()));
    }
    let entries = &corpus.manifest.entries;
    let k = corpus.manifest.n_speakers();
    let folds = kfold_split(&corpus.manifest, cfg.folds, cfg.seed)?;
    let run = cfg.folds_run();
    let spec = cfg.train.input;

    let test_set: BTreeSet<usize> = run.iter().flat_map(|&f| folds.test_indices(f)).collect();
    let train_set: BTreeSet<usize> = run.iter().flat_map(|&f| folds.train_indices(f)).collect();
    let mut clean: BTreeMap<usize, Cached> = BTreeMap::new();
    let mut noisy: BTreeMap<usize, Cached> = BTreeMap::new();
    info!(
        "preparing inputs: {} clean utterances, {} noisy",
        train_set.union(&test_set).count(),
        test_set.len()
    );
    for &i in train_set.union(&test_set) {
        clean.insert(i, prepare(&corpus.signals[i], &spec, segregator)?);
    }
    for &i in &test_set {
        let mix = noisy_copy(&corpus.signals[i].to_pipeline_rate()?, i, cfg)?;
        noisy.insert(i, prepare(&mix, &spec, segregator)?);
    }

    let mut trials = Vec::new();
    for &fold in &run {
        let test = folds.test_indices(fold);
        let train = folds.train_indices(fold);
        if test.iter().any(|i| folds.assignment[*i] != fold) || train.iter().any(|i| folds.assignment[*i] == fold) {
            return Err(Error::State(format!("fold {fold} leaks test entries into training")));
        }
        let collect = |pick: fn(&Cached) -> &Vec<Vec<f64>>| -> Vec<(Vec<f64>, usize)> {
            train
                .iter()
                .flat_map(|&i| pick(&clean[&i]).iter().map(move |x| (x.clone(), entries[i].speaker)))
                .collect()
        };
        let train_cfg = TrainConfig {
            seed: cfg.train.seed.wrapping_add(fold as u64),
            ..cfg.train.clone()
        };
        info!("fold {fold}: training on {} utterances, testing on {}", train.len(), test.len());
        let (raw_net, _) = train_on_inputs(&collect(|c| &c.raw), k, &cfg.arch, &train_cfg)?;
        let (seg_net, _) = train_on_inputs(&collect(|c| &c.seg), k, &cfg.arch, &train_cfg)?;
        let decide = |net: &SpeechVggNet, x: &[Vec<f64>]| net.identify_inputs(x).map(|r| r.0);
        for &i in &test {
            let trial = Trial {
                index: i,
                path: entries[i].path.clone(),
                fold,
                speaker: entries[i].speaker,
                emotion: entries[i].emotion,
                raw_clean: decide(&raw_net, &clean[&i].raw)?,
                raw_noisy: decide(&raw_net, &noisy[&i].raw)?,
                segregated_clean: decide(&seg_net, &clean[&i].seg)?,
                segregated_noisy: decide(&seg_net, &noisy[&i].seg)?,
            };
            trials.push(trial);
        }
        let fold_trials: Vec<&Trial> = trials.iter().filter(|t| t.fold == fold).collect();
        let acc = |s, c| fold_trials.iter().filter(|t| t.predicted(s, c) == t.speaker).count();
        info!(
            "fold {fold}: raw {}/{} clean, {}/{} noisy; segregated {}/{} clean, {}/{} noisy",
            acc(System::Raw, Condition::Clean),
            test.len(),
            acc(System::Raw, Condition::Noisy),
            test.len(),
            acc(System::Segregated, Condition::Clean),
            test.len(),
            acc(System::Segregated, Condition::Noisy),
            test.len()
        );
    }

    let mut results = Vec::new();
    for system in System::ALL {
        for condition in CONDITIONS {
            results.push(summarize(&trials, system, condition, k, &run)?);
        }
    }
    let mut report = EvalReport {
        speakers: k,
        noise: cfg.noise.clone(),
        ratio: cfg.ratio,
        ratio_kind: cfg.ratio_kind,
        averaging: "macro".into(),
        folds,
        folds_run: run,
        results,
        noisy_minus_clean: BTreeMap::new(),
        segregation_gain_noisy: 0.0,
        t_critical: T_CRITICAL,
        t_tests: Vec::new(),
        trials,
    };
    for system in System::ALL {
        let d = report.rate(system, Condition::Noisy) - report.rate(system, Condition::Clean);
        report.noisy_minus_clean.insert(system.as_str().into(), d);
    }
    report.segregation_gain_noisy =
        report.rate(System::Segregated, Condition::Noisy) - report.rate(System::Raw, Condition::Noisy);
    for condition in CONDITIONS {
        let ours = &report.result(System::Segregated, condition).fold_rates;
        let theirs = &report.result(System::Raw, condition).fold_rates;
        match student_t(ours, theirs) {
            Ok(t) => report.t_tests.push(TTest {
                system: System::Segregated,
                condition,
                against: "raw".into(),
                t,
                significant: t > T_CRITICAL,
            }),
            Err(e) => warn!("no {condition} t-test against the raw system: {e}"),
        }
    }
    Ok(report)
}

fn summarize(trials: &[Trial], system: System, condition: Condition, k: usize, run: &[usize]) -> Result<ConditionResult> {
    let confusion = ConfusionMatrix::from_pairs(k, trials.iter().map(|t| (t.speaker, t.predicted(system, condition))))?;
    let rate_of = |sel: &dyn Fn(&Trial) -> bool| -> Option<f64> {
        let chosen: Vec<&Trial> = trials.iter().filter(|t| sel(t)).collect();
        let correct = chosen.iter().filter(|t| t.predicted(system, condition) == t.speaker).count();
        sid_rate(correct, chosen.len()).ok()
    };
    let per_emotion = Emotion::ALL
        .iter()
        .map(|&e| (e.as_str().to_string(), rate_of(&|t: &Trial| t.emotion == e)))
        .collect();
    let fold_rates = run
        .iter()
        .map(|&f| rate_of(&|t: &Trial| t.fold == f).ok_or_else(|| Error::State(format!("fold {f} has no trials"))))
        .collect::<Result<Vec<_>>>()?;
    Ok(ConditionResult {
        system,
        condition,
        per_emotion,
        average: confusion.sid_rate()?,
        fold_rates,
        metrics: precision_recall_f1(&confusion)?,
        confusion,
    })
}

/// Writes CSV tables, SVG charts and `summary.json` into `dir`.
pub fn write_report(report: &EvalReport, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir)?;
    fs::write(dir.join("summary.json"), serde_json::to_string_pretty(report)?)?;

    let mut w = csv::Writer::from_path(dir.join("per_emotion.csv"))?;
    w.write_record(["system", "condition", "emotion", "rate"])?;
    for r in &report.results {
        for (e, v) in &r.per_emotion {
            if let Some(v) = v {
                w.write_record([r.system.as_str(), &r.condition.to_string(), e, &format!("{v:.4}")])?;
            }
        }
        w.write_record([r.system.as_str(), &r.condition.to_string(), "average", &format!("{:.4}", r.average)])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("table2_analogue.csv"))?;
    w.write_record(["system", "condition", "precision", "recall", "f1", "averaging"])?;
    for r in &report.results {
        w.write_record([
            r.system.as_str(),
            &r.condition.to_string(),
            &format!("{:.4}", r.metrics.precision),
            &format!("{:.4}", r.metrics.recall),
            &format!("{:.4}", r.metrics.f1),
            &report.averaging,
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("table1_analogue.csv"))?;
    w.write_record(["system", "condition", "against", "t", "significant"])?;
    for t in &report.t_tests {
        w.write_record([
            t.system.as_str(),
            &t.condition.to_string(),
            &t.against,
            &format!("{:.4}", t.t),
            &t.significant.to_string(),
        ])?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("fold_rates.csv"))?;
    w.write_record(["fold", "system", "condition", "rate"])?;
    for r in &report.results {
        for (f, v) in report.folds_run.iter().zip(&r.fold_rates) {
            w.write_record([&f.to_string(), r.system.as_str(), &r.condition.to_string(), &format!("{v:.4}")])?;
        }
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("trials.csv"))?;
    for t in &report.trials {
        w.serialize(t)?;
    }
    w.flush()?;

    let mut w = csv::Writer::from_path(dir.join("folds.csv"))?;
    w.write_record(["index", "fold"])?;
    for (i, f) in report.folds.assignment.iter().enumerate() {
        w.write_record([i.to_string(), f.to_string()])?;
    }
    w.flush()?;

    for r in &report.results {
        let rows: Vec<Vec<f64>> = r.confusion.counts.iter().map(|row| row.iter().map(|&c| c as f64).collect()).collect();
        write_matrix_csv(dir.join(format!("confusion_{}_{}.csv", r.system.as_str(), r.condition)), &rows)?;
    }

    let emotions: Vec<String> = Emotion::ALL.iter().map(|e| e.as_str().to_string()).collect();
    let mut categories = emotions.clone();
    categories.push("average".into());
    let bars = |system: System, condition: Condition| -> Vec<f64> {
        let r = report.result(system, condition);
        let mut v: Vec<f64> = emotions.iter().map(|e| r.per_emotion[e].unwrap_or(f64::NAN)).collect();
        v.push(r.average);
        v
    };
    let charts = [
        ("fig2_analogue.svg", "With segregation: clean vs noisy", System::Segregated, None),
        ("fig3_analogue.svg", "Without segregation: clean vs noisy", System::Raw, None),
        ("fig4_analogue.svg", "Noisy speech: raw vs segregated", System::Raw, Some(Condition::Noisy)),
    ];
    for (name, title, system, noisy_only) in charts {
        let series = match noisy_only {
            None => vec![
                ("clean".to_string(), bars(system, Condition::Clean)),
                ("noisy".to_string(), bars(system, Condition::Noisy)),
            ],
            Some(c) => vec![
                ("raw".to_string(), bars(System::Raw, c)),
                ("segregated".to_string(), bars(System::Segregated, c)),
            ],
        };
        fs::write(dir.join(name), grouped_bar_svg(title, &categories, &series))?;
    }
    Ok(())
}
