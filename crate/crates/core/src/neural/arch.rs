use std::sync::{Arc, OnceLock};

use serde::{Deserialize, Serialize};

use crate::motion::ActionKind;
use crate::registry::{Named, Registry};

pub const SHORT_TIMESTEPS: usize = 11;
pub const LONG_TIMESTEPS: usize = 28;
pub const DEFAULT_ARCHITECTURE: &str = "2-3-LSTM-DNN";

/// Which hidden-size setting a stack uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StackRole {
    Short,
    Long,
    Joint,
}

/// One LSTM stack of an architecture: depth, window length and class set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackSpec {
    pub role: StackRole,
    pub layers: usize,
    pub timesteps: usize,
    /// Output classes; frame labels outside this set map to `Normal`.
    pub classes: Vec<ActionKind>,
}

impl StackSpec {
    pub fn short(layers: usize) -> Self {
        Self {
            role: StackRole::Short,
            layers,
            timesteps: SHORT_TIMESTEPS,
            classes: vec![ActionKind::Nodding, ActionKind::Yawning, ActionKind::Normal],
        }
    }

    pub fn long(layers: usize) -> Self {
        Self {
            role: StackRole::Long,
            layers,
            timesteps: LONG_TIMESTEPS,
            classes: vec![ActionKind::OperatingSw, ActionKind::Normal],
        }
    }

    pub fn joint(layers: usize) -> Self {
        Self {
            role: StackRole::Joint,
            layers,
            timesteps: LONG_TIMESTEPS,
            classes: ActionKind::ALL.to_vec(),
        }
    }

    pub fn class_index(&self, kind: ActionKind) -> usize {
        self.classes
            .iter()
            .position(|&c| c == kind)
            .or_else(|| self.classes.iter().position(|&c| c == ActionKind::Normal))
            .expect("class set contains Normal")
    }

    pub fn normal_index(&self) -> usize {
        self.class_index(ActionKind::Normal)
    }

    pub fn class_names(&self) -> Vec<String> {
        self.classes.iter().map(|c| c.name().to_string()).collect()
    }
}

/// A network structure: the LSTM stacks whose outputs the fusion DNN joins.
pub trait Architecture: Named + Send + Sync {
    fn stacks(&self) -> Vec<StackSpec>;
}

struct SingleStack {
    name: &'static str,
    layers: usize,
}

impl Named for SingleStack {
    fn name(&self) -> &str {
        self.name
    }
}

impl Architecture for SingleStack {
    fn stacks(&self) -> Vec<StackSpec> {
        vec![StackSpec::joint(self.layers)]
    }
}

struct DualStack {
    name: &'static str,
    short_layers: usize,
    long_layers: usize,
}

impl Named for DualStack {
    fn name(&self) -> &str {
        self.name
    }
}

impl Architecture for DualStack {
    fn stacks(&self) -> Vec<StackSpec> {
        vec![StackSpec::short(self.short_layers), StackSpec::long(self.long_layers)]
    }
}

pub fn architecture_registry() -> &'static Registry<dyn Architecture> {
    static REGISTRY: OnceLock<Registry<dyn Architecture>> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        let mut r: Registry<dyn Architecture> = Registry::new("architecture");
        r.register(Arc::new(SingleStack { name: "2-LSTM-DNN", layers: 2 }));
        r.register(Arc::new(SingleStack { name: "3-LSTM-DNN", layers: 3 }));
        for (name, s, l) in [("2-2-LSTM-DNN", 2, 2), ("2-3-LSTM-DNN", 2, 3), ("3-3-LSTM-DNN", 3, 3)] {
            r.register(Arc::new(DualStack {
                name,
                short_layers: s,
                long_layers: l,
            }));
        }
        r
    })
}
