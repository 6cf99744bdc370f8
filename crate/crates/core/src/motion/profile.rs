use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;
use std::sync::{Arc, OnceLock};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DEFAULT_V_MAX;
use crate::error::{Error, Result};
use crate::registry::{Named, Registry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ActionKind {
    Nodding,
    Yawning,
    #[serde(rename = "OperatingSW")]
    OperatingSw,
    Normal,
}

impl ActionKind {
    pub const ALL: [ActionKind; 4] = [
        ActionKind::Nodding,
        ActionKind::Yawning,
        ActionKind::OperatingSw,
        ActionKind::Normal,
    ];

    pub const DROWSY: [ActionKind; 3] = [
        ActionKind::Nodding,
        ActionKind::Yawning,
        ActionKind::OperatingSw,
    ];

    /// Time by which 95% of instances of the action complete: T(N), T(Y), T(S).
    pub fn total_time(self) -> Option<f64> {
        match self {
            ActionKind::Nodding => Some(2.3),
            ActionKind::Yawning => Some(2.7),
            ActionKind::OperatingSw => Some(2.4),
            ActionKind::Normal => None,
        }
    }

    pub fn is_drowsy(self) -> bool {
        self != ActionKind::Normal
    }

    pub fn name(self) -> &'static str {
        match self {
            ActionKind::Nodding => "Nodding",
            ActionKind::Yawning => "Yawning",
            ActionKind::OperatingSw => "OperatingSW",
            ActionKind::Normal => "Normal",
        }
    }
}

impl fmt::Display for ActionKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ActionKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nodding" | "n" => Ok(ActionKind::Nodding),
            "yawning" | "y" => Ok(ActionKind::Yawning),
            "operatingsw" | "operating-sw" | "steering" | "s" => Ok(ActionKind::OperatingSw),
            "normal" => Ok(ActionKind::Normal),
            _ => Err(Error::Unknown {
                kind: "action",
                name: s.to_string(),
            }),
        }
    }
}

/// Raised-cosine displacement: moves the path by `displacement` metres over
/// `[start, start + duration]` with zero velocity at both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub start: f64,
    pub duration: f64,
    pub displacement: f64,
}

impl Segment {
    fn progress(&self, t: f64) -> f64 {
        ((t - self.start) / self.duration).clamp(0.0, 1.0)
    }

    pub fn offset(&self, t: f64) -> f64 {
        self.displacement * (1.0 - (PI * self.progress(t)).cos()) / 2.0
    }

    pub fn velocity(&self, t: f64) -> f64 {
        if t <= self.start || t >= self.start + self.duration {
            return 0.0;
        }
        self.displacement * PI / (2.0 * self.duration) * (PI * self.progress(t)).sin()
    }

    pub fn peak_speed(&self) -> f64 {
        self.displacement.abs() * PI / (2.0 * self.duration)
    }
}

/// Slow sinusoidal background motion.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Drift {
    pub amplitude: f64,
    pub period: f64,
    pub phase: f64,
}

impl Drift {
    pub fn offset(&self, t: f64) -> f64 {
        if self.amplitude == 0.0 {
            return 0.0;
        }
        self.amplitude * (2.0 * PI * t / self.period + self.phase).sin()
    }

    pub fn velocity(&self, t: f64) -> f64 {
        if self.amplitude == 0.0 {
            return 0.0;
        }
        self.amplitude * 2.0 * PI / self.period * (2.0 * PI * t / self.period + self.phase).cos()
    }

    pub fn peak_speed(&self) -> f64 {
        if self.amplitude == 0.0 {
            0.0
        } else {
            self.amplitude * 2.0 * PI / self.period
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseMarker {
    pub step: String,
    pub start: f64,
}

/// Reflection path length over a recording.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MotionProfile {
    pub action: ActionKind,
    /// Recording span in seconds.
    pub duration: f64,
    /// Path length at rest (m).
    pub baseline: f64,
    pub drift: Drift,
    pub segments: Vec<Segment>,
    /// `None` for normal driving.
    pub action_interval: Option<(f64, f64)>,
    pub phase_markers: Vec<PhaseMarker>,
}

impl MotionProfile {
    /// `d(t)` in metres.
    pub fn path_length(&self, t: f64) -> f64 {
        self.baseline + self.drift.offset(t) + self.segments.iter().map(|s| s.offset(t)).sum::<f64>()
    }

    /// `d'(t)` in m/s.
    pub fn velocity(&self, t: f64) -> f64 {
        self.drift.velocity(t) + self.segments.iter().map(|s| s.velocity(t)).sum::<f64>()
    }

    /// Upper bound on `|d'(t)|`; exact when segments do not overlap.
    pub fn peak_speed(&self) -> f64 {
        self.drift.peak_speed()
            + self
                .segments
                .iter()
                .map(Segment::peak_speed)
                .fold(0.0, f64::max)
    }

    /// Action duration, or the full span for normal driving.
    pub fn action_duration(&self) -> f64 {
        self.action_interval
            .map(|(a, b)| b - a)
            .unwrap_or(self.duration)
    }

    /// Step active at time `t`, if `t` lies inside the action interval.
    pub fn step_at(&self, t: f64) -> Option<&str> {
        let (start, end) = self.action_interval?;
        if t < start || t >= end {
            return None;
        }
        self.phase_markers
            .iter()
            .rev()
            .find(|m| m.start <= t)
            .map(|m| m.step.as_str())
    }
}

/// Inputs to [`motion_profile`]. Ranges are validated on use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileParams {
    pub recording_duration: f64,
    /// Action start within the recording.
    pub onset: f64,
    /// Action length as a multiple of its total time; within [0.8, 1.2].
    pub duration_scale: f64,
    /// Peak displacement (m); within [0.05, 0.4] for drowsy actions.
    pub amplitude: f64,
    pub baseline: f64,
    pub drift_amplitude: f64,
    pub drift_period: f64,
    pub v_max: f64,
}

impl ProfileParams {
    pub fn defaults_for(action: ActionKind) -> Self {
        let (amplitude, drift_amplitude) = match action {
            ActionKind::Nodding => (0.15, 0.0),
            ActionKind::Yawning => (0.2, 0.0),
            ActionKind::OperatingSw => (0.3, 0.0),
            ActionKind::Normal => (0.0, 0.02),
        };
        Self {
            recording_duration: 10.0,
            onset: 5.0,
            duration_scale: 1.0,
            amplitude,
            baseline: 1.0,
            drift_amplitude,
            drift_period: 4.0,
            v_max: DEFAULT_V_MAX,
        }
    }
}

/// Builds the displacement segments and step markers of one action.
pub trait ActionPattern: Named + Send + Sync {
    fn kind(&self) -> ActionKind;

    fn steps(&self) -> &'static [&'static str];

    /// Segments and markers for an action starting at `onset` lasting `length`.
    /// `rng` jitters segment proportions.
    fn build(
        &self,
        onset: f64,
        length: f64,
        amplitude: f64,
        rng: &mut ChaCha8Rng,
    ) -> (Vec<Segment>, Vec<PhaseMarker>);

    /// Checks pattern-specific constraints on the finished profile.
    fn check(&self, _params: &ProfileParams, _profile: &MotionProfile) -> Result<()> {
        Ok(())
    }
}

fn marker(step: &str, start: f64) -> PhaseMarker {
    PhaseMarker {
        step: step.to_string(),
        start,
    }
}

/// Quick bow (path lengthens) then looking up (path returns).
struct Nodding;

impl Named for Nodding {
    fn name(&self) -> &str {
        "Nodding"
    }
}

impl ActionPattern for Nodding {
    fn kind(&self) -> ActionKind {
        ActionKind::Nodding
    }

    fn steps(&self) -> &'static [&'static str] {
        &["bow", "raise"]
    }

    fn build(&self, onset: f64, length: f64, a: f64, rng: &mut ChaCha8Rng) -> (Vec<Segment>, Vec<PhaseMarker>) {
        let bow = length * rng.random_range(0.35..0.45);
        (
            vec![
                Segment { start: onset, duration: bow, displacement: a },
                Segment { start: onset + bow, duration: length - bow, displacement: -a },
            ],
            vec![marker("bow", onset), marker("raise", onset + bow)],
        )
    }
}

/// Hand to mouth, hold while the mouth is open, hand down.
struct Yawning;

impl Named for Yawning {
    fn name(&self) -> &str {
        "Yawning"
    }
}

impl ActionPattern for Yawning {
    fn kind(&self) -> ActionKind {
        ActionKind::Yawning
    }

    fn steps(&self) -> &'static [&'static str] {
        &["raise_hand", "hold", "lower_hand"]
    }

    fn build(&self, onset: f64, length: f64, a: f64, rng: &mut ChaCha8Rng) -> (Vec<Segment>, Vec<PhaseMarker>) {
        let up = length * rng.random_range(0.25..0.35);
        let hold = length * rng.random_range(0.35..0.45);
        let down = length - up - hold;
        (
            vec![
                Segment { start: onset, duration: up, displacement: -a },
                Segment { start: onset + up + hold, duration: down, displacement: a },
            ],
            vec![
                marker("raise_hand", onset),
                marker("hold", onset + up),
                marker("lower_hand", onset + up + hold),
            ],
        )
    }
}

/// Minimum motionless lead-in before a drowsy steering correction (s).
pub(crate) const STEERING_STILL_LEAD: f64 = 3.0;
const STEERING_STILL_SPEED: f64 = 0.02;

/// Long still stretch, then a quick large swing, over-correction and settle.
struct OperatingSw;

impl Named for OperatingSw {
    fn name(&self) -> &str {
        "OperatingSW"
    }
}

impl ActionPattern for OperatingSw {
    fn kind(&self) -> ActionKind {
        ActionKind::OperatingSw
    }

    fn steps(&self) -> &'static [&'static str] {
        &["swing", "correct", "settle"]
    }

    fn build(&self, onset: f64, length: f64, a: f64, rng: &mut ChaCha8Rng) -> (Vec<Segment>, Vec<PhaseMarker>) {
        let swing = length * rng.random_range(0.25..0.35);
        let correct = length * 0.4;
        let settle = length - swing - correct;
        (
            vec![
                Segment { start: onset, duration: swing, displacement: a },
                Segment { start: onset + swing, duration: correct, displacement: -1.6 * a },
                Segment { start: onset + swing + correct, duration: settle, displacement: 0.6 * a },
            ],
            vec![
                marker("swing", onset),
                marker("correct", onset + swing),
                marker("settle", onset + swing + correct),
            ],
        )
    }

    fn check(&self, params: &ProfileParams, profile: &MotionProfile) -> Result<()> {
        if params.onset < STEERING_STILL_LEAD {
            return Err(Error::param(
                "onset",
                format!("steering correction needs a still lead-in of at least {STEERING_STILL_LEAD} s"),
            ));
        }
        if profile.drift.peak_speed() >= STEERING_STILL_SPEED {
            return Err(Error::param(
                "drift_amplitude",
                format!("lead-in must stay below {STEERING_STILL_SPEED} m/s"),
            ));
        }
        Ok(())
    }
}

const NORMAL_MAX_SPEED: f64 = 0.2;

/// Normal driving: background drift only.
struct NormalDriving;

impl Named for NormalDriving {
    fn name(&self) -> &str {
        "Normal"
    }
}

impl ActionPattern for NormalDriving {
    fn kind(&self) -> ActionKind {
        ActionKind::Normal
    }

    fn steps(&self) -> &'static [&'static str] {
        &[]
    }

    fn build(&self, _: f64, _: f64, _: f64, _: &mut ChaCha8Rng) -> (Vec<Segment>, Vec<PhaseMarker>) {
        (Vec::new(), Vec::new())
    }

    fn check(&self, _params: &ProfileParams, profile: &MotionProfile) -> Result<()> {
        if profile.peak_speed() >= NORMAL_MAX_SPEED {
            return Err(Error::param(
                "drift_amplitude",
                format!("normal drift must stay below {NORMAL_MAX_SPEED} m/s"),
            ));
        }
        Ok(())
    }
}

/// Built-in motion patterns, one per [`ActionKind`].
pub fn pattern_registry() -> &'static Registry<dyn ActionPattern> {
    static REGISTRY: OnceLock<Registry<dyn ActionPattern>> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        let mut reg: Registry<dyn ActionPattern> = Registry::new("action pattern");
        reg.register(Arc::new(Nodding))
            .register(Arc::new(Yawning))
            .register(Arc::new(OperatingSw))
            .register(Arc::new(NormalDriving));
        reg
    })
}

fn check_range(name: &'static str, value: f64, lo: f64, hi: f64) -> Result<()> {
    if !(value >= lo && value <= hi) {
        return Err(Error::param(name, format!("{value} outside [{lo}, {hi}]")));
    }
    Ok(())
}

/// Builds the path-length profile for `action`.
pub fn motion_profile(action: ActionKind, params: &ProfileParams, seed: u64) -> Result<MotionProfile> {
    let p = params;
    if !(p.recording_duration > 0.0) {
        return Err(Error::param("recording_duration", "must be positive"));
    }
    if !(p.baseline > 0.0) {
        return Err(Error::param("baseline", "must be positive"));
    }
    if !(p.drift_amplitude >= 0.0) {
        return Err(Error::param("drift_amplitude", "must be non-negative"));
    }
    if !(p.drift_period > 0.0) {
        return Err(Error::param("drift_period", "must be positive"));
    }
    if !(p.v_max > 0.0) {
        return Err(Error::param("v_max", "must be positive"));
    }
    let pattern = pattern_registry().get(action.name())?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let drift = Drift {
        amplitude: p.drift_amplitude,
        period: p.drift_period,
        phase: rng.random_range(0.0..2.0 * PI),
    };

    let (segments, phase_markers, action_interval) = match action.total_time() {
        Some(total) => {
            check_range("duration_scale", p.duration_scale, 0.8, 1.2)?;
            check_range("amplitude", p.amplitude, 0.05, 0.4)?;
            let length = total * p.duration_scale;
            if !(p.onset >= 0.0 && p.onset + length <= p.recording_duration) {
                return Err(Error::param(
                    "onset",
                    format!(
                        "action [{}, {}] does not fit in {} s",
                        p.onset,
                        p.onset + length,
                        p.recording_duration
                    ),
                ));
            }
            let (segments, markers) = pattern.build(p.onset, length, p.amplitude, &mut rng);
            (segments, markers, Some((p.onset, p.onset + length)))
        }
        None => {
            let (segments, markers) = pattern.build(0.0, p.recording_duration, 0.0, &mut rng);
            (segments, markers, None)
        }
    };

    let profile = MotionProfile {
        action,
        duration: p.recording_duration,
        baseline: p.baseline,
        drift,
        segments,
        action_interval,
        phase_markers,
    };
    pattern.check(p, &profile)?;
    if profile.peak_speed() > p.v_max {
        return Err(Error::param(
            "amplitude",
            format!(
                "peak path speed {:.3} m/s exceeds v_max {} m/s",
                profile.peak_speed(),
                p.v_max
            ),
        ));
    }
    let steps = (p.recording_duration * 1000.0).ceil() as usize;
    if (0..=steps).any(|i| profile.path_length(i as f64 * 1e-3) <= 0.0) {
        return Err(Error::param("baseline", "path length must stay positive"));
    }
    Ok(profile)
}
