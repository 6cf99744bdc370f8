//! One PASS/FAIL line per acceptance criterion; exits non-zero on any FAIL.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use drowsense_core::detector::{detect_offline, sustained_budget, DetectorConfig, StreamState};
use drowsense_core::dsp::{
    alias_frequency, valid_undersampling_rates, BandSpec, FeatureConfig, FeatureExtractor,
    SpectrumAnalyzer,
};
use drowsense_core::eval::{decode_model, encode_model, run_experiment, ExperimentConfig, ExperimentOutput};
use drowsense_core::motion::{
    doppler_shift, generate_corpus, synthesize_received, ActionKind, ChannelSpec, CorpusSpec, Drift,
    MotionProfile, SynthesisOptions,
};
use drowsense_core::neural::{
    gradient_check, softmax, BatchNorm, DrowsyModel, FusionDnn, LstmStack, StackSpec,
};
use drowsense_core::signal::{generate_tone, read_wav, segment_frames, write_wav, AudioBuffer, ClipMode, Frame};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::{num_complex::Complex, FftPlanner};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn peak_frequency(x: &[f64], fs: f64, n: usize) -> f64 {
    let mut buf: Vec<Complex<f64>> = x.iter().map(|&v| Complex::new(v, 0.0)).collect();
    buf.resize(n, Complex::new(0.0, 0.0));
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let k = (0..n / 2).max_by(|&a, &b| buf[a].norm().total_cmp(&buf[b].norm())).unwrap();
    k as f64 * fs / n as f64
}

fn tone_frame(f: f64, duration: f64) -> Frame {
    Frame {
        samples: generate_tone(f, 44_100.0, duration, 0.5).unwrap().into_samples(),
        sample_rate: 44_100.0,
        index: 0,
        start_time: 0.0,
    }
}

fn folding() -> Verdict {
    let start = Instant::now();
    let ex = FeatureExtractor::new(FeatureConfig::default()).unwrap();
    let analyzer = SpectrumAnalyzer::new(2048, "rectangular").unwrap();
    let bin = 5512.5 / 2048.0;
    let mut worst: f64 = 0.0;
    let mut detail = Vec::new();
    for (f, want) in [(20_000.0, 2050.0), (19_800.0, 2250.0), (20_200.0, 1850.0)] {
        let spectrum = analyzer.transform(&ex.decimate(&tone_frame(f, 0.25)).unwrap()).unwrap();
        let got = spectrum.bin_frequency(spectrum.peak_bin());
        // Reference: a 2 s tone through the same front end, 2^17-point transform.
        let long = ex.decimate(&tone_frame(f, 2.0)).unwrap();
        let reference = peak_frequency(&long.samples, 5512.5, 1 << 17);
        let formula = alias_frequency(f, 5512.5);
        worst = worst.max((got - want).abs() / bin);
        worst = worst.max((reference - formula).abs() / bin);
        detail.push(format!("{f:.0}->{got:.1}"));
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst <= 1.0 && secs < 1.0,
        format!("{} Hz, worst error {worst:.2} bins, {secs:.2} s", detail.join(", ")),
    )
}

fn eq1_validity() -> Verdict {
    let start = Instant::now();
    let band = BandSpec::default();
    let (fl, fh) = (band.f_l(), band.f_h());
    let mut ok = band.max_factor() == 50;
    let mut admissible = 0;
    let mut collisions = 0usize;
    for n in 1..=50usize {
        let interval = valid_undersampling_rates(fl, fh, n).unwrap();
        let ordered = n == 1 || 2.0 * fh / n as f64 <= 2.0 * fl / (n - 1) as f64;
        ok &= interval.is_some() == ordered;
        let Some((low, high)) = interval else { continue };
        admissible += 1;
        let high = if high.is_finite() { high } else { 4.0 * low };
        for u in [0.0, 0.3, 0.7, 1.0] {
            let fs_star = low + u * (high - low);
            let mut folded: Vec<f64> = (0..=(fh - fl) as usize)
                .map(|i| alias_frequency(fl + i as f64, fs_star))
                .collect();
            folded.sort_by(f64::total_cmp);
            collisions += folded.windows(2).filter(|w| w[1] - w[0] < 1e-9).count();
        }
    }
    for (n, rate) in [(4, 11_000.0), (5, 8_800.0), (6, 7_300.0), (7, 6_300.0), (8, 5_500.0)] {
        let (low, high) = valid_undersampling_rates(fl, fh, n).unwrap().unwrap();
        ok &= rate >= low && rate <= high;
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        ok && collisions == 0 && secs < 5.0,
        format!("{admissible} admissible factors, {collisions} collisions, table rates inside, {secs:.2} s"),
    )
}

fn doppler_oracle() -> Verdict {
    let start = Instant::now();
    let n = 1 << 17;
    let fs = 44_100.0;
    let channel = ChannelSpec {
        static_paths: vec![],
        moving_path_gain: 1.0,
        noise_std: 0.0,
        ..ChannelSpec::default()
    };
    let mut worst: f64 = 0.0;
    let mut signs = true;
    for v in [0.5, 1.0, 2.0, 3.0] {
        for dir in [1.0, -1.0] {
            // d'(t) = -dir * v: dir = 1 approaches the phone.
            let period = 1e6;
            let profile = MotionProfile {
                action: ActionKind::Normal,
                duration: 3.0,
                baseline: 5.0,
                drift: Drift {
                    amplitude: -dir * v * period / (2.0 * PI),
                    period,
                    phase: 0.0,
                },
                segments: vec![],
                action_interval: None,
                phase_markers: vec![],
            };
            let s = synthesize_received(&profile, &channel, &SynthesisOptions::default(), 0).unwrap();
            let shift = peak_frequency(&s.audio.samples()[..n], fs, n) - 20_000.0;
            let expected = dir * doppler_shift(v, 20_000.0, 343.0).unwrap();
            worst = worst.max((shift - expected).abs() / (fs / n as f64));
            signs &= shift.signum() == dir;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst <= 1.0 && signs && secs < 10.0,
        format!("worst error {worst:.2} bins of 2^17, signs flip: {signs}, {secs:.2} s"),
    )
}

fn gradients() -> Verdict {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst: f64 = 0.0;
    let mut names = Vec::new();
    for spec in [StackSpec::short(2), StackSpec::long(3)] {
        let (d, h, batch) = (3, 4, 3);
        let mut net = LstmStack::new(d, h, spec.layers, spec.timesteps, spec.class_names(), 5).unwrap();
        for bn in &mut net.norms {
            bn.gamma.mapv_inplace(|_| rng.random_range(0.5..1.5));
            bn.beta.mapv_inplace(|_| rng.random_range(-0.2..0.2));
        }
        let x = Array2::from_shape_simple_fn((spec.timesteps * batch, d), || rng.random_range(-2.0..2.0));
        let k = spec.classes.len();
        let labels: Vec<usize> = (0..batch).map(|b| b % k).collect();
        let step = net.train_step(&x, batch, &labels).unwrap();
        let r = gradient_check(&net, &step.grads, |m| m.loss(&x, batch, &labels).unwrap(), 1e-4);
        worst = worst.max(r.max_rel_error);
        names.push(format!("{:?} {:.1e}", spec.role, r.max_rel_error));
    }
    let dnn = FusionDnn::new(5, 6, 3).unwrap();
    let x = Array2::from_shape_simple_fn((8, 5), || rng.random_range(0.0..1.0));
    let y: Vec<f64> = (0..8).map(|i| (i % 2) as f64).collect();
    let (_, cache) = dnn.forward_train(&x, &y).unwrap();
    let mut grads = dnn.zeros_like();
    dnn.backward(&cache, &mut grads);
    let r = gradient_check(&dnn, &grads, |m| m.loss(&x, &y).unwrap(), 1e-4);
    worst = worst.max(r.max_rel_error);
    names.push(format!("fusion {:.1e}", r.max_rel_error));
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst < 1e-4 && secs < 30.0,
        format!("max relative error {} ({secs:.2} s)", names.join(", ")),
    )
}

fn normalization() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let mut worst_sum: f64 = 0.0;
    for _ in 0..10_000 {
        let k = rng.random_range(2..12);
        let scale = rng.random_range(0.1..40.0);
        let logits: Vec<f64> = (0..k).map(|_| rng.random_range(-scale..scale)).collect();
        worst_sum = worst_sum.max((softmax(&logits).iter().sum::<f64>() - 1.0).abs());
    }
    let bn = BatchNorm::new(10);
    let (mut worst_mean, mut worst_var): (f64, f64) = (0.0, 0.0);
    for _ in 0..20 {
        let x = Array2::from_shape_fn((64, 10), |(_, c)| {
            5.0 * c as f64 - 3.0 + (1.0 + c as f64) * rng.random_range(-1.0..1.0)
        });
        let (y, _, _) = bn.forward_train(&x).unwrap();
        for col in y.columns() {
            let m = col.mean().unwrap();
            let v = col.mapv(|e| (e - m).powi(2)).mean().unwrap();
            worst_mean = worst_mean.max(m.abs());
            worst_var = worst_var.max((v - 1.0).abs());
        }
    }
    verdict(
        worst_sum <= 1e-9 && worst_mean < 1e-6 && worst_var < 1e-3,
        format!("softmax |sum-1| {worst_sum:.1e}, batch norm |mean| {worst_mean:.1e}, |var-1| {worst_var:.1e}"),
    )
}

fn classification(out: &ExperimentOutput) -> Verdict {
    let e = &out.report.evaluation;
    let h = &out.header;
    let total = h.features_seconds + h.train_seconds + h.eval_seconds;
    let accs: Vec<(ActionKind, Option<f64>)> = ActionKind::DROWSY.iter().map(|&k| (k, e.action_accuracy(k))).collect();
    let per_action_ok = accs.iter().all(|(_, a)| a.is_some_and(|a| a >= 0.90));
    let drowsy = e.drowsy_accuracy;
    let fmt = |a: Option<f64>| a.map_or("n/a".into(), |a| format!("{:.1}%", 100.0 * a));
    let parts: Vec<String> = accs.iter().map(|(k, a)| format!("{k} {}", fmt(*a))).collect();
    verdict(
        per_action_ok && drowsy.is_some_and(|a| a >= 0.92) && total <= 1800.0,
        format!(
            "{}, Normal {}, drowsy-vs-normal {}, {:.0} s (features {:.0}, train {:.0}, eval {:.0})",
            parts.join(", "),
            fmt(e.action_accuracy(ActionKind::Normal)),
            fmt(drowsy),
            total,
            h.features_seconds,
            h.train_seconds,
            h.eval_seconds
        ),
    )
}

fn timeliness(out: &ExperimentOutput) -> Verdict {
    let t = &out.report.evaluation.timeliness;
    let within = t.overall_at(0.7);
    let parts: Vec<String> = t
        .actions
        .iter()
        .map(|a| {
            format!(
                "{} {}/{} within 0.7T",
                a.action,
                a.within[1].1.map_or(0, |f| (f * a.latencies.len() as f64).round() as usize),
                a.latencies.len()
            )
        })
        .collect();
    verdict(
        within.is_some_and(|f| f >= 0.8),
        format!(
            "{} of detected actions within 0.7T ({})",
            within.map_or("n/a".into(), |f| format!("{:.1}%", 100.0 * f)),
            parts.join(", ")
        ),
    )
}

fn one_recording(action: ActionKind, duration: f64, seed: u64) -> AudioBuffer {
    let mut spec = CorpusSpec::per_class(0);
    spec.counts.insert(action, 1);
    spec.recording_duration = duration;
    generate_corpus(&spec, seed).unwrap().next().unwrap().unwrap().1.audio
}

fn realtime(model: &Arc<DrowsyModel>) -> Verdict {
    let audio = one_recording(ActionKind::Normal, 1000.0 * 0.25 + 0.1, 31);
    let frames = segment_frames(&audio, 0.25).unwrap();
    let mut state = StreamState::new(model.clone(), DetectorConfig::default()).unwrap();
    state.push_frame(&frames[0]).unwrap();
    state.reset(0);
    let r = sustained_budget(&mut state, &frames[..1000], 0.25).unwrap();
    verdict(
        r.frames == 1000 && r.within_budget(),
        format!(
            "1000 frames, p99 {:.2} ms, mean {:.2} ms, max {:.2} ms (budget 250 ms)",
            r.p99 * 1e3,
            r.mean * 1e3,
            r.max * 1e3
        ),
    )
}

fn equivalence(model: &Arc<DrowsyModel>) -> Verdict {
    let cfg = DetectorConfig::default();
    let audio = one_recording(ActionKind::Nodding, 10.0, 41);
    let ex = FeatureExtractor::new(model.dsp.clone()).unwrap();
    let feats: Vec<Vec<f64>> = ex.extract_audio(&audio).unwrap().into_iter().map(|v| v.phases).collect();
    let refs: Vec<&[f64]> = feats.iter().map(|v| v.as_slice()).collect();
    let offline = detect_offline(model, &refs, &cfg).unwrap();
    let mut state = StreamState::new(model.clone(), cfg).unwrap();
    let streamed: Vec<_> = segment_frames(&audio, model.dsp.frame_length)
        .unwrap()
        .iter()
        .map(|f| state.push_frame(f).unwrap())
        .collect();
    let identical = streamed == offline
        && streamed.iter().zip(&offline).all(|(a, b)| a.r.to_bits() == b.r.to_bits());

    let mut rng = ChaCha8Rng::seed_from_u64(43);
    let dim = model.feature_dim();
    let mut unchanged = 0;
    for _ in 0..100 {
        let len = rng.random_range(29..45);
        let i = rng.random_range(28..len);
        let rec: Vec<Vec<f64>> = (0..=i)
            .map(|_| (0..dim).map(|_| rng.random_range(-PI..PI)).collect())
            .collect();
        let mut perturbed = rec.clone();
        for v in perturbed[i - 28].iter_mut() {
            *v = rng.random_range(-PI..PI);
        }
        let last = |r: &[Vec<f64>]| {
            let refs: Vec<&[f64]> = r.iter().map(|v| v.as_slice()).collect();
            detect_offline(model, &refs, &cfg).unwrap().pop().unwrap()
        };
        let (a, b) = (last(&rec), last(&perturbed));
        if a.r.to_bits() == b.r.to_bits() && a.p_short == b.p_short && a.p_long == b.p_long {
            unchanged += 1;
        }
    }
    verdict(
        identical && unchanged == 100,
        format!(
            "{} frames streamed bit-identical: {identical}, window discipline held on {unchanged}/100 recordings",
            streamed.len()
        ),
    )
}

fn persistence(model: &DrowsyModel) -> Verdict {
    let back = decode_model(&encode_model(model).unwrap()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(47);
    let dim = model.feature_dim();
    let frames: Vec<Vec<f64>> = (0..64).map(|_| (0..dim).map(|_| rng.random_range(-PI..PI)).collect()).collect();
    let refs: Vec<&[f64]> = frames.iter().map(|v| v.as_slice()).collect();
    let cfg = DetectorConfig::default();
    let a = detect_offline(model, &refs, &cfg).unwrap();
    let b = detect_offline(&back, &refs, &cfg).unwrap();
    let bit_exact = a == b && a.iter().zip(&b).all(|(x, y)| x.r.to_bits() == y.r.to_bits());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("probe.wav");
    let mut samples: Vec<f64> = (0..44_100).map(|_| rng.random_range(-1.0..1.0)).collect();
    samples.extend([-1.0, 1.0, 0.0]);
    let audio = AudioBuffer::new(samples, 44_100.0).unwrap();
    write_wav(&path, &audio, ClipMode::Reject).unwrap();
    let read = read_wav(&path).unwrap();
    let err = audio
        .samples()
        .iter()
        .zip(read.samples())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max);
    let wav_ok = read.len() == audio.len() && err <= 2f64.powi(-15);
    verdict(
        bit_exact && wav_ok,
        format!("64-frame probe bit-identical: {bit_exact}, WAV max error {err:.2e} (bound {:.2e})", 2f64.powi(-15)),
    )
}

fn main() {
    let mut results: Vec<(usize, &str, Verdict)> = vec![
        (1, "undersampling folding", folding()),
        (2, "band-pass sampling bounds", eq1_validity()),
        (3, "Doppler oracle", doppler_oracle()),
        (4, "gradient correctness", gradients()),
        (5, "normalization properties", normalization()),
    ];
    for (n, name, v) in &results {
        println!("criterion {n:>2} {} {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }

    eprintln!("running the default experiment (600 recordings per class); this takes several minutes");
    let out = run_experiment(&ExperimentConfig::default()).expect("default experiment runs");
    let model = Arc::new(out.model.clone());
    let late = vec![
        (6, "end-to-end classification", classification(&out)),
        (7, "timeliness", timeliness(&out)),
        (8, "real-time budget", realtime(&model)),
        (9, "streaming/batch equivalence", equivalence(&model)),
        (10, "persistence", persistence(&model)),
    ];
    for (n, name, v) in &late {
        println!("criterion {n:>2} {} {name}: {}", if v.pass { "PASS" } else { "FAIL" }, v.detail);
    }
    results.extend(late);
    let failed: Vec<usize> = results.iter().filter(|(_, _, v)| !v.pass).map(|(n, _, _)| *n).collect();
    if failed.is_empty() {
        println!("acceptance: all {} criteria PASS", results.len());
    } else {
        println!("acceptance: FAIL on criteria {failed:?}");
        std::process::exit(1);
    }
}
