//! `drowsense` command-line front end.

use std::fs;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use drowsense_core::detector::{
    sustained_budget, PassthroughPipeline, StreamState,
};
use drowsense_core::dsp::{read_feature_dump, write_feature_dump, DumpHeader, FeatureConfig, FeatureExtractor};
use drowsense_core::eval::{
    build_dataset, check_compatible, evaluate_model, latency_cdf_csv, load_dataset, load_model,
    render_evaluation, render_sweep, run_experiment, run_sweep, save_dataset, save_model,
    sweep_csv, ExperimentConfig, SweepAxis,
};
use drowsense_core::motion::{generate_corpus, ActionKind, CorpusSpec};
use drowsense_core::neural::{train, DrowsyModel, SequenceDataset};
use drowsense_core::signal::{read_wav, segment_frames};

/// Environment variable that roots every relative output path.
const OUT_ENV: &str = "DROWSENSE_OUT";

#[derive(Parser, Debug)]
#[command(name = "drowsense", version, about = "Acoustic drowsy-driving detection toolkit")]
struct Cli {
    /// TOML experiment configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// error, warn, info, debug or trace.
    #[arg(long, global = true, default_value = "info")]
    log_level: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args, Debug, Default, Clone)]
struct Overrides {
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Recordings per class for synthesized corpora.
    #[arg(long)]
    per_class: Option<usize>,
    /// Network structure, e.g. 2-3-LSTM-DNN.
    #[arg(long)]
    arch: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Frame length in seconds.
    #[arg(long)]
    frame_length: Option<f64>,
    /// Alert threshold on the fused probability.
    #[arg(long)]
    threshold: Option<f64>,
    /// Seconds between alerts.
    #[arg(long)]
    cooldown: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize a labelled corpus as WAVs plus a manifest.
    GenData {
        #[command(flatten)]
        o: Overrides,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write the phase features of a WAV recording as a CSV dump.
    Extract {
        #[command(flatten)]
        o: Overrides,
        #[arg(long)]
        wav: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model on a stored corpus (or a synthesized one).
    Train {
        #[command(flatten)]
        o: Overrides,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Where to write the training report (JSON).
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Score a model on every recording of a corpus.
    Eval {
        #[command(flatten)]
        o: Overrides,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        corpus: Option<PathBuf>,
        /// Report JSON path; the text table always goes to stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stream a recording through a model, one JSON record per frame.
    Detect {
        #[command(flatten)]
        o: Overrides,
        #[arg(long)]
        model: PathBuf,
        #[arg(long, conflicts_with = "features", required_unless_present = "features")]
        wav: Option<PathBuf>,
        /// Feature dump produced by `extract`.
        #[arg(long)]
        features: Option<PathBuf>,
        /// Pace frames at their real cadence.
        #[arg(long)]
        realtime: bool,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate, split, train and evaluate in one run.
    Experiment {
        #[command(flatten)]
        o: Overrides,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one experiment per setting of a study axis.
    Sweep {
        #[command(flatten)]
        o: Overrides,
        #[arg(long, value_enum)]
        axis: Axis,
        #[arg(long)]
        out: PathBuf,
    },
    /// Time the per-frame streaming path.
    Bench {
        #[command(flatten)]
        o: Overrides,
        /// Trained model; an untrained one of the configured shape otherwise.
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        frames: usize,
    },
}

#[derive(ValueEnum, Debug, Clone, Copy)]
enum Axis {
    FrameLength,
    Architecture,
}

fn merge(base: &mut serde_json::Value, over: serde_json::Value) {
    match (base, over) {
        (serde_json::Value::Object(b), serde_json::Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

/// Defaults, then the config file (partial trees allowed), then flags.
fn resolve(path: Option<&Path>, o: &Overrides) -> Result<ExperimentConfig> {
    let mut cfg = match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            let file: toml::Value = toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?;
            let mut tree = serde_json::to_value(ExperimentConfig::default())?;
            merge(&mut tree, serde_json::to_value(file)?);
            serde_json::from_value(tree).with_context(|| format!("invalid configuration in {}", p.display()))?
        }
        None => ExperimentConfig::default(),
    };
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    if let Some(n) = o.per_class {
        cfg.corpus.counts = ActionKind::ALL.iter().map(|&k| (k, n)).collect();
    }
    if let Some(a) = &o.arch {
        cfg.architecture = a.clone();
    }
    if let Some(e) = o.epochs {
        cfg.train.epochs = e;
    }
    if let Some(fl) = o.frame_length {
        cfg.dsp = FeatureConfig::with_frame_length(fl);
    }
    if let Some(t) = o.threshold {
        cfg.detector.threshold = t;
    }
    if let Some(c) = o.cooldown {
        cfg.detector.cooldown = c;
    }
    cfg.validate()?;
    log::info!("resolved configuration: {}", serde_json::to_string(&cfg)?);
    log::info!("seed {}", cfg.seed);
    Ok(cfg)
}

fn out_path(p: &Path) -> PathBuf {
    match std::env::var_os(OUT_ENV) {
        Some(root) if p.is_relative() => Path::new(&root).join(p),
        _ => p.to_path_buf(),
    }
}

fn write_out(p: &Path, contents: &[u8]) -> Result<PathBuf> {
    let p = out_path(p);
    if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    fs::write(&p, contents).with_context(|| format!("writing {}", p.display()))?;
    Ok(p)
}

fn dataset(corpus: Option<&Path>, cfg: &ExperimentConfig, dsp: &FeatureConfig) -> Result<SequenceDataset> {
    let extractor = FeatureExtractor::new(dsp.clone())?;
    Ok(match corpus {
        Some(dir) => {
            let stored = load_dataset(dir)?;
            log::info!("loaded {} recordings from {}", stored.len(), dir.display());
            stored.features(&extractor)?
        }
        None => {
            log::info!("synthesizing {} recordings", cfg.corpus.total());
            build_dataset(&cfg.corpus, cfg.seed, &extractor)?
        }
    })
}

fn untrained_model(cfg: &ExperimentConfig) -> Result<DrowsyModel> {
    use drowsense_core::neural::{architecture_registry, FusionDnn, LstmStack, StackRole, TrainedStack};
    let dim = FeatureExtractor::new(cfg.dsp.clone())?.dim();
    let arch = architecture_registry().get(&cfg.architecture)?;
    let mut stacks = Vec::new();
    for (i, spec) in arch.stacks().into_iter().enumerate() {
        let hidden = match spec.role {
            StackRole::Long => cfg.train.long_hidden,
            _ => cfg.train.short_hidden,
        };
        let net = LstmStack::new(dim, hidden, spec.layers, spec.timesteps, spec.class_names(), cfg.seed + i as u64)?;
        stacks.push(TrainedStack { spec, net });
    }
    let width = stacks.iter().map(|s| s.spec.classes.len()).sum();
    Ok(DrowsyModel {
        architecture: arch.name().to_string(),
        dsp: cfg.dsp.clone(),
        stacks,
        fusion: FusionDnn::new(width, cfg.train.fusion_hidden, cfg.seed)?,
    })
}

fn run(cli: Cli) -> Result<()> {
    let config = cli.config.as_deref();
    match cli.command {
        Command::GenData { o, out } => {
            let cfg = resolve(config, &o)?;
            let dir = out_path(&out);
            let n = save_dataset(&dir, &cfg.corpus, cfg.seed)?;
            println!("wrote {n} recordings to {}", dir.display());
        }
        Command::Extract { o, wav, out } => {
            let cfg = resolve(config, &o)?;
            let extractor = FeatureExtractor::new(cfg.dsp.clone())?;
            let rows = extractor.extract_audio(&read_wav(&wav)?)?;
            let header = DumpHeader::new(&cfg.dsp, extractor.band_bins());
            let mut buf = Vec::new();
            write_feature_dump(&mut buf, &header, &rows)?;
            let p = write_out(&out, &buf)?;
            println!("wrote {} frames x {} features to {}", rows.len(), extractor.dim(), p.display());
        }
        Command::Train { o, corpus, out, report } => {
            let cfg = resolve(config, &o)?;
            let data = dataset(corpus.as_deref(), &cfg, &cfg.dsp)?;
            let all: Vec<usize> = (0..data.len()).collect();
            let (model, rep) = train(&data, &all, &cfg.architecture, &cfg.dsp, &cfg.train_config())?;
            let p = out_path(&out);
            if let Some(dir) = p.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            save_model(&p, &model)?;
            if let Some(r) = report {
                write_out(&r, serde_json::to_string_pretty(&rep)?.as_bytes())?;
            }
            println!("trained {} in {:.1} s, model written to {}", rep.architecture, rep.seconds, p.display());
        }
        Command::Eval { o, model, corpus, out } => {
            let cfg = resolve(config, &o)?;
            let model = load_model(&model)?;
            if config.is_some() || o.frame_length.is_some() {
                check_compatible(&model, &cfg.dsp)?;
            }
            let data = dataset(corpus.as_deref(), &cfg, &model.dsp)?;
            let all: Vec<usize> = (0..data.len()).collect();
            let report = evaluate_model(&model, &data, &all, &cfg.detector)?;
            print!("{}", render_evaluation(&report));
            if let Some(p) = out {
                write_out(&p, serde_json::to_string_pretty(&report)?.as_bytes())?;
            }
        }
        Command::Detect { o, model, wav, features, realtime, out } => {
            let cfg = resolve(config, &o)?;
            let model = Arc::new(load_model(&model)?);
            let sink: Box<dyn Write> = match &out {
                Some(p) => Box::new(fs::File::create(out_path(p))?),
                None => Box::new(io::stdout().lock()),
            };
            let mut sink = BufWriter::new(sink);
            let mut state = StreamState::new(model.clone(), cfg.detector)?;
            let cadence = Duration::from_secs_f64(model.dsp.frame_length);
            let start = Instant::now();
            let pace = |i: usize| {
                if realtime {
                    let due = cadence * (i as u32 + 1);
                    if let Some(wait) = due.checked_sub(start.elapsed()) {
                        std::thread::sleep(wait);
                    }
                }
            };
            if let Some(wav) = wav {
                let audio = read_wav(&wav)?;
                for (i, frame) in segment_frames(&audio, model.dsp.frame_length)?.iter().enumerate() {
                    pace(i);
                    let d = state.push_frame(frame)?;
                    writeln!(sink, "{}", serde_json::to_string(&d)?)?;
                }
            } else if let Some(f) = features {
                let file = fs::File::open(&f).with_context(|| format!("opening {}", f.display()))?;
                let (header, rows) = read_feature_dump(BufReader::new(file))?;
                if header.fingerprint != model.dsp.fingerprint() {
                    bail!("feature dump was extracted with a different front end than the model");
                }
                for (i, row) in rows.into_iter().enumerate() {
                    pace(i);
                    let d = state.push_features(row.frame, row.phases)?;
                    writeln!(sink, "{}", serde_json::to_string(&d)?)?;
                }
            }
            sink.flush()?;
        }
        Command::Experiment { o, out } => {
            let cfg = resolve(config, &o)?;
            let result = run_experiment(&cfg)?;
            let dir = out_path(&out);
            fs::create_dir_all(&dir)?;
            fs::write(dir.join("report.json"), result.to_json()?)?;
            let text = render_evaluation(&result.report.evaluation);
            fs::write(dir.join("report.txt"), &text)?;
            fs::write(dir.join("latency_cdf.csv"), latency_cdf_csv(&result.report.evaluation.timeliness))?;
            save_model(dir.join("model.bin"), &result.model)?;
            print!("{text}");
        }
        Command::Sweep { o, axis, out } => {
            let cfg = resolve(config, &o)?;
            let axis = match axis {
                Axis::FrameLength => SweepAxis::frame_lengths(),
                Axis::Architecture => SweepAxis::architectures(),
            };
            let results = run_sweep(&cfg, &axis)?;
            let dir = out_path(&out);
            fs::create_dir_all(&dir)?;
            let rows: Vec<_> = results.iter().map(|(r, _)| r.clone()).collect();
            for (row, output) in &results {
                let name = row.label.replace([' ', '/'], "_");
                fs::write(dir.join(format!("{name}.json")), output.to_json()?)?;
            }
            fs::write(dir.join("sweep.json"), serde_json::to_string_pretty(&rows)?)?;
            fs::write(dir.join("sweep.csv"), sweep_csv(&rows))?;
            let table = render_sweep(&rows);
            fs::write(dir.join("sweep.txt"), &table)?;
            print!("{table}");
        }
        Command::Bench { o, model, frames } => {
            let cfg = resolve(config, &o)?;
            let model = match model {
                Some(p) => load_model(&p)?,
                None => untrained_model(&cfg)?,
            };
            let fl = model.dsp.frame_length;
            let mut spec = CorpusSpec::per_class(0);
            spec.counts.insert(ActionKind::Normal, 1);
            spec.recording_duration = fl * (frames as f64 + 0.5);
            let (_, sample) = generate_corpus(&spec, cfg.seed)?.next().context("empty corpus")??;
            let mut clip = segment_frames(&sample.audio, fl)?;
            clip.truncate(frames);
            let mut state = StreamState::new(Arc::new(model), cfg.detector)?;
            // Warm up on the first frame, then restart the clock.
            state.push_frame(&clip[0])?;
            state.reset(0);
            let report = sustained_budget(&mut state, &clip, fl)?;
            let floor = sustained_budget(&mut PassthroughPipeline, &clip, fl)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            println!(
                "p99 {:.2} ms, mean {:.2} ms, budget {:.0} ms, passthrough p99 {:.4} ms: {}",
                report.p99 * 1e3,
                report.mean * 1e3,
                report.budget * 1e3,
                floor.p99 * 1e3,
                if report.within_budget() { "within budget" } else { "OVER BUDGET" }
            );
        }
    }
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .format_timestamp_millis()
        .init();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}
