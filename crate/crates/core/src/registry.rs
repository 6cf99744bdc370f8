//! Name-keyed registries of interchangeable strategies.
//!
//! Network structures, action motion patterns and FFT windows are each a
//! trait object registered under a stable name so configs and the CLI can
//! select them at runtime.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Anything that can be registered by name.
pub trait Named {
    fn name(&self) -> &str;
}

pub struct Registry<T: ?Sized + Named> {
    kind: &'static str,
    entries: BTreeMap<String, Arc<T>>,
    order: Vec<String>,
}

impl<T: ?Sized + Named> Registry<T> {
    pub fn new(kind: &'static str) -> Self {
        Self {
            kind,
            entries: BTreeMap::new(),
            order: Vec::new(),
        }
    }

    /// Registers `item` under its own name, replacing any previous entry.
    pub fn register(&mut self, item: Arc<T>) -> &mut Self {
        let key = item.name().to_ascii_lowercase();
        if self.entries.insert(key.clone(), item).is_none() {
            self.order.push(key);
        }
        self
    }

    /// Case-insensitive lookup.
    pub fn get(&self, name: &str) -> Result<Arc<T>> {
        self.entries
            .get(&name.to_ascii_lowercase())
            .cloned()
            .ok_or_else(|| Error::Unknown {
                kind: self.kind,
                name: format!("{name} (known: {})", self.names().join(", ")),
            })
    }

    /// Registered names in registration order.
    pub fn names(&self) -> Vec<&str> {
        self.order
            .iter()
            .map(|k| self.entries[k].name())
            .collect()
    }

    pub fn iter(&self) -> impl Iterator<Item = Arc<T>> + '_ {
        self.order.iter().map(|k| self.entries[k].clone())
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }
}
