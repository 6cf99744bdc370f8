use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::dataset::build_dataset;
use super::metrics::{compute_metrics, ConfusionTally, MetricsReport};
use crate::detector::{
    detect_offline, judge_sample, measure_timeliness, DetectorConfig, GroundTruth, SampleOutcome,
    TimelinessReport,
};
use crate::dsp::{FeatureConfig, FeatureExtractor};
use crate::error::{Error, Result};
use crate::motion::{derive_seed, ActionKind, CorpusSpec};
use crate::neural::{architecture_registry, train, DrowsyModel, SequenceDataset, TrainConfig, TrainReport, DEFAULT_ARCHITECTURE};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    pub corpus: CorpusSpec,
    pub dsp: FeatureConfig,
    pub architecture: String,
    pub train: TrainConfig,
    pub detector: DetectorConfig,
    /// Held-out share of each class.
    pub eval_fraction: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            name: "default".into(),
            seed: 7,
            corpus: CorpusSpec::default(),
            dsp: FeatureConfig::default(),
            architecture: DEFAULT_ARCHITECTURE.into(),
            train: TrainConfig::default(),
            detector: DetectorConfig::default(),
            eval_fraction: 0.2,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.corpus.validate()?;
        self.train.validate()?;
        architecture_registry().get(&self.architecture)?;
        FeatureExtractor::new(self.dsp.clone())?;
        if !(self.eval_fraction > 0.0 && self.eval_fraction < 1.0) {
            return Err(Error::param("eval_fraction", "must lie in (0, 1)"));
        }
        if !(self.detector.threshold > 0.0 && self.detector.threshold < 1.0) || self.detector.cooldown < 0.0 {
            return Err(Error::param("detector", "threshold in (0, 1), cooldown non-negative"));
        }
        Ok(())
    }

    /// Training configuration with its seed tied to the experiment seed.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: derive_seed(self.seed, 2),
            ..self.train.clone()
        }
    }
}

/// Stratified split of record indices into (train, eval).
pub fn split_train_eval(data: &SequenceDataset, eval_fraction: f64, seed: u64) -> (Vec<usize>, Vec<usize>) {
    let mut by_class: BTreeMap<ActionKind, Vec<usize>> = BTreeMap::new();
    for (i, r) in data.records.iter().enumerate() {
        by_class.entry(r.action).or_default().push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut tr, mut ev) = (Vec::new(), Vec::new());
    for (_, mut idx) in by_class {
        idx.shuffle(&mut rng);
        let k = (idx.len() as f64 * eval_fraction).round() as usize;
        ev.extend_from_slice(&idx[..k]);
        tr.extend_from_slice(&idx[k..]);
    }
    tr.sort_unstable();
    ev.sort_unstable();
    (tr, ev)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleVerdict {
    pub id: u64,
    #[serde(flatten)]
    pub outcome: SampleOutcome,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub samples: usize,
    pub tally: ConfusionTally,
    pub metrics: MetricsReport,
    /// Share of each action's recordings reported as that action.
    pub per_action_accuracy: Vec<(ActionKind, Option<f64>)>,
    /// Drowsy-versus-normal accuracy over all recordings.
    pub drowsy_accuracy: Option<f64>,
    pub timeliness: TimelinessReport,
    pub verdicts: Vec<SampleVerdict>,
}

impl EvaluationReport {
    pub fn action_accuracy(&self, kind: ActionKind) -> Option<f64> {
        self.per_action_accuracy.iter().find(|(k, _)| *k == kind).and_then(|(_, a)| *a)
    }
}

/// Stream every listed record through the detector and score it.
pub fn evaluate_model(model: &DrowsyModel, data: &SequenceDataset, records: &[usize], config: &DetectorConfig) -> Result<EvaluationReport> {
    if data.dim != model.feature_dim() {
        return Err(Error::Shape {
            context: "evaluation features",
            expected: model.feature_dim(),
            actual: data.dim,
        });
    }
    let mut tally = ConfusionTally::default();
    let mut verdicts = Vec::with_capacity(records.len());
    for &i in records {
        let rec = &data.records[i];
        let frames = rec.history(rec.frames().saturating_sub(1), rec.frames());
        let dets = detect_offline(model, &frames, config)?;
        let truth = GroundTruth {
            action: rec.action,
            interval: rec.interval,
        };
        let outcome = judge_sample(&dets, &truth, config);
        tally.record(outcome.truth, outcome.predicted);
        verdicts.push(SampleVerdict { id: rec.id, outcome });
    }
    let outcomes: Vec<SampleOutcome> = verdicts.iter().map(|v| v.outcome.clone()).collect();
    let metrics = compute_metrics(&tally);
    let per_action_accuracy = ActionKind::ALL
        .iter()
        .map(|&k| (k, metrics.class(k).and_then(|m| m.recall)))
        .collect();
    Ok(EvaluationReport {
        samples: records.len(),
        drowsy_accuracy: metrics.drowsy_vs_normal.accuracy,
        per_action_accuracy,
        timeliness: measure_timeliness(&outcomes),
        tally,
        metrics,
        verdicts,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitSummary {
    pub train_ids: Vec<u64>,
    pub eval_ids: Vec<u64>,
}

impl SplitSummary {
    pub fn disjoint(&self) -> bool {
        let a: BTreeSet<_> = self.train_ids.iter().collect();
        self.eval_ids.iter().all(|id| !a.contains(id))
    }
}

/// Wall-clock facts kept apart from the reproducible report body.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub schema_version: u32,
    pub generated_unix: u64,
    pub features_seconds: f64,
    pub train_seconds: f64,
    pub eval_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub schema_version: u32,
    pub config: ExperimentConfig,
    pub dsp_fingerprint: String,
    pub feature_dim: usize,
    pub split: SplitSummary,
    pub training: TrainReport,
    pub evaluation: EvaluationReport,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub header: RunHeader,
    pub report: ExperimentReport,
    pub model: DrowsyModel,
}

impl ExperimentOutput {
    /// `{"header": ..., "report": ...}`; only the header varies between
    /// identical runs.
    pub fn to_json(&self) -> Result<String> {
        #[derive(Serialize)]
        struct Doc<'a> {
            header: &'a RunHeader,
            report: &'a ExperimentReport,
        }
        Ok(serde_json::to_string_pretty(&Doc {
            header: &self.header,
            report: &self.report,
        })?)
    }
}

fn unix_now() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

/// Generate, split, train and evaluate, all from `config.seed`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentOutput> {
    config.validate()?;
    let t0 = Instant::now();
    let extractor = FeatureExtractor::new(config.dsp.clone())?;
    let data = build_dataset(&config.corpus, config.seed, &extractor)?;
    let features_seconds = t0.elapsed().as_secs_f64();
    log::info!("extracted {} recordings in {features_seconds:.1} s", data.len());
    run_on_dataset(config, &data, features_seconds)
}

/// [`run_experiment`] on an already extracted dataset.
pub fn run_on_dataset(config: &ExperimentConfig, data: &SequenceDataset, features_seconds: f64) -> Result<ExperimentOutput> {
    config.validate()?;
    let (tr, ev) = split_train_eval(data, config.eval_fraction, derive_seed(config.seed, 1));
    let split = SplitSummary {
        train_ids: tr.iter().map(|&i| data.records[i].id).collect(),
        eval_ids: ev.iter().map(|&i| data.records[i].id).collect(),
    };
    if !split.disjoint() {
        return Err(Error::DegenerateDataset("a recording id appears in both partitions".into()));
    }
    let t1 = Instant::now();
    let (model, training) = train(data, &tr, &config.architecture, &config.dsp, &config.train_config())?;
    let train_seconds = t1.elapsed().as_secs_f64();
    let t2 = Instant::now();
    let evaluation = evaluate_model(&model, data, &ev, &config.detector)?;
    let eval_seconds = t2.elapsed().as_secs_f64();
    log::info!("trained in {train_seconds:.1} s, evaluated in {eval_seconds:.1} s");
    Ok(ExperimentOutput {
        header: RunHeader {
            schema_version: REPORT_SCHEMA_VERSION,
            generated_unix: unix_now(),
            features_seconds,
            train_seconds,
            eval_seconds,
        },
        report: ExperimentReport {
            schema_version: REPORT_SCHEMA_VERSION,
            config: config.clone(),
            dsp_fingerprint: config.dsp.fingerprint(),
            feature_dim: data.dim,
            split,
            training,
            evaluation,
        },
        model,
    })
}

fn pct(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".into(), |x| format!("{:.2}%", 100.0 * x))
}

/// Aligned text summary of an evaluation.
pub fn render_evaluation(e: &EvaluationReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{:<12} {:>9} {:>9} {:>9} {:>11} {:>13}", "class", "accuracy", "precision", "recall", "false alarm", "missing alarm");
    for (k, m) in &e.metrics.per_class {
        let _ = writeln!(
            s,
            "{:<12} {:>9} {:>9} {:>9} {:>11} {:>13}",
            k.name(),
            pct(m.accuracy),
            pct(m.precision),
            pct(m.recall),
            pct(m.false_alarm),
            pct(m.missing_alarm)
        );
    }
    let _ = writeln!(s, "overall accuracy {}  drowsy detection {}  ({} recordings)", pct(e.metrics.accuracy), pct(e.drowsy_accuracy), e.samples);
    let _ = writeln!(s, "{:<12} {:>8} {:>8} {:>8} {:>8} {:>8}", "timeliness", "T (s)", "detected", "<=0.5T", "<=0.7T", "<=1.0T");
    for a in &e.timeliness.actions {
        let w: Vec<String> = a.within.iter().map(|(_, f)| pct(*f)).collect();
        let _ = writeln!(s, "{:<12} {:>8.1} {:>8} {:>8} {:>8} {:>8}", a.action.name(), a.total_time, a.detected, w[0], w[1], w[2]);
    }
    let w: Vec<String> = e.timeliness.overall_within.iter().map(|(_, f)| pct(*f)).collect();
    let _ = writeln!(s, "{:<12} {:>8} {:>8} {:>8} {:>8} {:>8}", "all", "", "", w[0], w[1], w[2]);
    s
}

/// `action,latency,cdf` rows of the empirical latency distribution.
pub fn latency_cdf_csv(t: &TimelinessReport) -> String {
    let mut s = String::from("action,latency,cdf\n");
    for a in &t.actions {
        let n = a.latencies.len();
        for (i, l) in a.latencies.iter().enumerate() {
            let _ = writeln!(s, "{},{l:.4},{:.4}", a.action.name(), (i + 1) as f64 / n as f64);
        }
    }
    s
}

/// Axis of a parameter sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    FrameLength(Vec<f64>),
    Architecture(Vec<String>),
}

impl SweepAxis {
    pub fn frame_lengths() -> Self {
        SweepAxis::FrameLength(vec![0.15, 0.2, 0.25, 0.3, 0.4])
    }

    pub fn architectures() -> Self {
        SweepAxis::Architecture(architecture_registry().iter().map(|a| a.name().to_string()).collect())
    }

    /// One configuration per setting, labelled.
    pub fn configs(&self, base: &ExperimentConfig) -> Vec<(String, ExperimentConfig)> {
        match self {
            SweepAxis::FrameLength(v) => v
                .iter()
                .map(|&fl| {
                    let mut c = base.clone();
                    c.dsp = FeatureConfig {
                        frame_length: fl,
                        ..FeatureConfig::with_frame_length(fl)
                    };
                    c.name = format!("frame-{fl}");
                    (format!("{fl} s"), c)
                })
                .collect(),
            SweepAxis::Architecture(v) => v
                .iter()
                .map(|a| {
                    let mut c = base.clone();
                    c.architecture = a.clone();
                    c.name = a.clone();
                    (a.clone(), c)
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub label: String,
    pub per_action_accuracy: Vec<(ActionKind, Option<f64>)>,
    pub accuracy: Option<f64>,
    pub drowsy_accuracy: Option<f64>,
    pub within_0_7: Option<f64>,
}

impl SweepRow {
    pub fn from_report(label: String, r: &ExperimentReport) -> Self {
        let e = &r.evaluation;
        Self {
            label,
            per_action_accuracy: e.per_action_accuracy.clone(),
            accuracy: e.metrics.accuracy,
            drowsy_accuracy: e.drowsy_accuracy,
            within_0_7: e.timeliness.overall_at(0.7),
        }
    }
}

/// Run every configuration of the axis; entries share nothing but the base.
pub fn run_sweep(base: &ExperimentConfig, axis: &SweepAxis) -> Result<Vec<(SweepRow, ExperimentOutput)>> {
    axis.configs(base)
        .into_iter()
        .map(|(label, cfg)| {
            log::info!("sweep entry {label}");
            let out = run_experiment(&cfg)?;
            Ok((SweepRow::from_report(label, &out.report), out))
        })
        .collect()
}

pub fn render_sweep(rows: &[SweepRow]) -> String {
    let mut s = format!("{:<14}", "setting");
    for k in ActionKind::ALL {
        let _ = write!(s, " {:>11}", k.name());
    }
    let _ = writeln!(s, " {:>9} {:>9} {:>9}", "overall", "drowsy", "<=0.7T");
    for r in rows {
        let _ = write!(s, "{:<14}", r.label);
        for (_, a) in &r.per_action_accuracy {
            let _ = write!(s, " {:>11}", pct(*a));
        }
        let _ = writeln!(s, " {:>9} {:>9} {:>9}", pct(r.accuracy), pct(r.drowsy_accuracy), pct(r.within_0_7));
    }
    s
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let opt = |v: Option<f64>| v.map_or_else(String::new, |x| format!("{x:.6}"));
    let mut s = String::from("setting");
    for k in ActionKind::ALL {
        let _ = write!(s, ",{}", k.name());
    }
    s.push_str(",overall,drowsy,within_0_7\n");
    for r in rows {
        s.push_str(&r.label);
        for (_, a) in &r.per_action_accuracy {
            let _ = write!(s, ",{}", opt(*a));
        }
        let _ = writeln!(s, ",{},{},{}", opt(r.accuracy), opt(r.drowsy_accuracy), opt(r.within_0_7));
    }
    s
}
