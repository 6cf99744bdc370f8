use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::profile::STEERING_STILL_LEAD;
use super::{
    derive_seed, motion_profile, synthesize_received, ActionKind, ChannelSpec, LabeledSample,
    PathConvention, ProfileParams, StaticPath, SynthesisOptions, DEFAULT_V_MAX, SPEED_OF_SOUND,
};
use crate::error::{Error, Result};

/// Closed interval sampled uniformly; `min == max` pins the value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Span {
    pub min: f64,
    pub max: f64,
}

impl Span {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub const fn fixed(v: f64) -> Self {
        Self { min: v, max: v }
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        if self.max > self.min {
            rng.random_range(self.min..=self.max)
        } else {
            self.min
        }
    }

    fn validate(&self, name: &'static str) -> Result<()> {
        if !(self.min.is_finite() && self.max.is_finite() && self.min <= self.max) {
            return Err(Error::param(name, format!("bad range [{}, {}]", self.min, self.max)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRanges {
    /// Handset speaker-to-microphone path; fixed geometry.
    pub direct_delay: f64,
    pub direct_gain: Span,
    pub reflections: usize,
    pub reflection_delay: Span,
    pub reflection_gain: Span,
    pub moving_gain: Span,
    pub noise_std: Span,
    pub speed_of_sound: f64,
    pub convention: PathConvention,
}

impl Default for ChannelRanges {
    fn default() -> Self {
        Self {
            direct_delay: 0.1 / SPEED_OF_SOUND,
            direct_gain: Span::new(0.8, 1.2),
            reflections: 2,
            reflection_delay: Span::new(0.002, 0.008),
            reflection_gain: Span::new(0.02, 0.1),
            moving_gain: Span::new(0.1, 0.3),
            noise_std: Span::new(0.005, 0.05),
            speed_of_sound: SPEED_OF_SOUND,
            convention: PathConvention::OneWay,
        }
    }
}

/// Recipe for a synthetic corpus: class counts plus parameter ranges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub counts: BTreeMap<ActionKind, usize>,
    pub recording_duration: f64,
    pub synthesis: SynthesisOptions,
    pub duration_scale: Span,
    pub amplitude: BTreeMap<ActionKind, Span>,
    /// Onset range for nodding and yawning.
    pub onset: Span,
    /// Onset range for steering corrections; at least the still lead-in.
    pub steering_onset: Span,
    pub baseline: Span,
    pub action_drift: Span,
    pub normal_drift: Span,
    pub drift_period: Span,
    pub channel: ChannelRanges,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self::per_class(600)
    }
}

impl CorpusSpec {
    pub fn per_class(n: usize) -> Self {
        Self {
            counts: ActionKind::ALL.iter().map(|&k| (k, n)).collect(),
            recording_duration: 10.0,
            synthesis: SynthesisOptions::default(),
            duration_scale: Span::new(0.85, 1.05),
            amplitude: [
                (ActionKind::Nodding, Span::new(0.05, 0.25)),
                (ActionKind::Yawning, Span::new(0.1, 0.3)),
                (ActionKind::OperatingSw, Span::new(0.2, 0.4)),
            ]
            .into_iter()
            .collect(),
            onset: Span::new(2.5, 6.5),
            steering_onset: Span::new(4.0, 6.0),
            baseline: Span::new(0.6, 1.4),
            action_drift: Span::new(0.0, 0.003),
            normal_drift: Span::new(0.005, 0.03),
            drift_period: Span::new(3.0, 6.0),
            channel: ChannelRanges::default(),
        }
    }

    pub fn total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.recording_duration > 0.0) {
            return Err(Error::param("recording_duration", "must be positive"));
        }
        for (name, span) in [
            ("duration_scale", self.duration_scale),
            ("onset", self.onset),
            ("steering_onset", self.steering_onset),
            ("baseline", self.baseline),
            ("action_drift", self.action_drift),
            ("normal_drift", self.normal_drift),
            ("drift_period", self.drift_period),
        ] {
            span.validate(name)?;
        }
        if self.steering_onset.min < STEERING_STILL_LEAD {
            return Err(Error::param("steering_onset", "must leave the still lead-in"));
        }
        for kind in ActionKind::DROWSY {
            if self.counts.get(&kind).copied().unwrap_or(0) > 0 && !self.amplitude.contains_key(&kind) {
                return Err(Error::param("amplitude", format!("no range for {kind}")));
            }
        }
        Ok(())
    }

    /// Deterministic per-sample recipes, class-major in [`ActionKind::ALL`] order.
    pub fn plan(&self, seed: u64) -> Result<Vec<SampleRecipe>> {
        self.validate()?;
        let mut recipes = Vec::with_capacity(self.total());
        let mut index = 0u64;
        for kind in ActionKind::ALL {
            for _ in 0..self.counts.get(&kind).copied().unwrap_or(0) {
                let sample_seed = derive_seed(seed, index);
                recipes.push(self.recipe(kind, index, sample_seed));
                index += 1;
            }
        }
        Ok(recipes)
    }

    fn recipe(&self, action: ActionKind, index: u64, seed: u64) -> SampleRecipe {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ProfileParams::defaults_for(action);
        params.recording_duration = self.recording_duration;
        params.v_max = DEFAULT_V_MAX;
        params.baseline = self.baseline.sample(&mut rng);
        params.drift_period = self.drift_period.sample(&mut rng);
        match action {
            ActionKind::Normal => {
                params.drift_amplitude = self.normal_drift.sample(&mut rng);
            }
            _ => {
                params.drift_amplitude = self.action_drift.sample(&mut rng);
                params.duration_scale = self.duration_scale.sample(&mut rng);
                params.amplitude = self.amplitude[&action].sample(&mut rng);
                let onset = if action == ActionKind::OperatingSw {
                    self.steering_onset
                } else {
                    self.onset
                };
                params.onset = onset.sample(&mut rng);
            }
        }
        let ch = &self.channel;
        let mut static_paths = vec![StaticPath {
            delay: ch.direct_delay,
            gain: ch.direct_gain.sample(&mut rng),
        }];
        for _ in 0..ch.reflections {
            static_paths.push(StaticPath {
                delay: ch.reflection_delay.sample(&mut rng),
                gain: ch.reflection_gain.sample(&mut rng),
            });
        }
        let channel = ChannelSpec {
            static_paths,
            moving_path_gain: ch.moving_gain.sample(&mut rng),
            noise_std: ch.noise_std.sample(&mut rng),
            speed_of_sound: ch.speed_of_sound,
            convention: ch.convention,
        };
        SampleRecipe {
            index,
            action,
            seed,
            params,
            channel,
            synthesis: self.synthesis,
        }
    }
}

/// Everything needed to regenerate one sample bit-identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecipe {
    pub index: u64,
    pub action: ActionKind,
    pub seed: u64,
    pub params: ProfileParams,
    pub channel: ChannelSpec,
    pub synthesis: SynthesisOptions,
}

impl SampleRecipe {
    pub fn synthesize(&self) -> Result<LabeledSample> {
        let profile = motion_profile(self.action, &self.params, self.seed)?;
        synthesize_received(&profile, &self.channel, &self.synthesis, derive_seed(self.seed, u64::MAX))
    }
}

/// Lazily synthesized corpus; a full-size corpus does not fit in memory as audio.
pub struct Corpus {
    recipes: std::vec::IntoIter<SampleRecipe>,
}

impl Corpus {
    pub fn len(&self) -> usize {
        self.recipes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.recipes.len() == 0
    }
}

impl Iterator for Corpus {
    type Item = Result<(SampleRecipe, LabeledSample)>;

    fn next(&mut self) -> Option<Self::Item> {
        let recipe = self.recipes.next()?;
        Some(recipe.synthesize().map(|s| (recipe, s)))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        self.recipes.size_hint()
    }
}

impl ExactSizeIterator for Corpus {}

pub fn generate_corpus(spec: &CorpusSpec, seed: u64) -> Result<Corpus> {
    Ok(Corpus {
        recipes: spec.plan(seed)?.into_iter(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(n: usize, y: usize, s: usize, normal: usize) -> CorpusSpec {
        let mut spec = CorpusSpec::per_class(0);
        spec.counts = [
            (ActionKind::Nodding, n),
            (ActionKind::Yawning, y),
            (ActionKind::OperatingSw, s),
            (ActionKind::Normal, normal),
        ]
        .into_iter()
        .collect();
        spec
    }

    #[test]
    fn class_counts_are_exact() {
        let plan = counts(10, 0, 0, 10).plan(1).unwrap();
        assert_eq!(plan.len(), 20);
        assert_eq!(plan.iter().filter(|r| r.action == ActionKind::Nodding).count(), 10);
        assert_eq!(CorpusSpec::default().plan(1).unwrap().len(), 2400);
        assert!(counts(0, 0, 0, 0).plan(1).unwrap().is_empty());
    }

    #[test]
    fn every_default_recipe_is_valid() {
        for recipe in CorpusSpec::per_class(150).plan(42).unwrap() {
            motion_profile(recipe.action, &recipe.params, recipe.seed)
                .unwrap_or_else(|e| panic!("{recipe:?}: {e}"));
        }
    }

    #[test]
    fn fixed_seed_fixed_corpus() {
        let spec = counts(1, 1, 1, 1);
        let a: Vec<_> = generate_corpus(&spec, 3).unwrap().map(|r| r.unwrap()).collect();
        let b: Vec<_> = generate_corpus(&spec, 3).unwrap().map(|r| r.unwrap()).collect();
        assert_eq!(a.len(), 4);
        for ((ra, sa), (rb, sb)) in a.iter().zip(&b) {
            assert_eq!(ra, rb);
            assert_eq!(sa.audio, sb.audio);
        }
        let seeds: std::collections::BTreeSet<_> = a.iter().map(|(r, _)| r.seed).collect();
        assert_eq!(seeds.len(), 4);
        for (recipe, sample) in &a {
            assert_eq!(recipe.action, sample.action);
            assert_eq!(sample.action_interval.is_none(), recipe.action == ActionKind::Normal);
        }
    }

    #[test]
    fn steering_onset_must_leave_lead_in() {
        let mut spec = CorpusSpec::per_class(1);
        spec.steering_onset = Span::new(1.0, 5.0);
        assert!(spec.plan(0).is_err());
    }
}
