//! Potentials selected by name at runtime.
//!
//! Each kind registers a builder that turns a flat table of numeric
//! parameters into a [`SpaceTimeSpec`], together with the keys it accepts so
//! that misspelled parameters are rejected instead of silently defaulted.

use std::collections::BTreeMap;
use std::fmt;

use super::potential::SpaceTimeSpec;
use crate::error::{Error, Result};
use crate::C64;

/// Numeric parameters of one potential term.
pub type Params = BTreeMap<String, f64>;

type BuildFn = dyn Fn(&Params) -> Result<SpaceTimeSpec> + Send + Sync;

struct Entry {
    keys: &'static [&'static str],
    build: Box<BuildFn>,
}

/// Name-indexed builders of space-time functions.
#[derive(Default)]
pub struct SpaceTimeRegistry {
    entries: BTreeMap<String, Entry>,
}

impl fmt::Debug for SpaceTimeRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.entries.keys()).finish()
    }
}

/// Value of `key`, or `default` when absent.
pub fn param_or(params: &Params, key: &str, default: f64) -> f64 {
    params.get(key).copied().unwrap_or(default)
}

/// Value of a mandatory `key`.
pub fn param(params: &Params, key: &str) -> Result<f64> {
    params.get(key).copied().ok_or_else(|| Error::Domain(format!("missing parameter `{key}`")))
}

impl SpaceTimeRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// `zero`, `constant` (`re`, `im`) and `gaussian_well` (`re`, `im`,
    /// `width`, `frequency`, `x`, `y`).
    pub fn standard() -> Self {
        let mut r = Self::empty();
        r.register("zero", &[], |_| Ok(SpaceTimeSpec::zero()));
        r.register("constant", &["re", "im"], |p| {
            Ok(SpaceTimeSpec::constant(C64::new(param_or(p, "re", 0.0), param_or(p, "im", 0.0))))
        });
        r.register("gaussian_well", &["re", "im", "width", "frequency", "x", "y"], |p| {
            let width = param(p, "width")?;
            if !(width > 0.0) {
                return Err(Error::Domain(format!("well width must be positive, got {width}")));
            }
            let amplitude = C64::new(param_or(p, "re", 0.0), param_or(p, "im", 0.0));
            let center = [param_or(p, "x", 0.0), param_or(p, "y", 0.0)];
            Ok(SpaceTimeSpec::gaussian_well_at(amplitude, width, param_or(p, "frequency", 0.0), center))
        });
        r
    }

    /// Adds or replaces the builder for `name`.
    pub fn register<F>(&mut self, name: &str, keys: &'static [&'static str], build: F)
    where
        F: Fn(&Params) -> Result<SpaceTimeSpec> + Send + Sync + 'static,
    {
        self.entries.insert(name.to_string(), Entry { keys, build: Box::new(build) });
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.keys().map(String::as_str).collect()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn build(&self, name: &str, params: &Params) -> Result<SpaceTimeSpec> {
        let entry = self
            .entries
            .get(name)
            .ok_or_else(|| Error::Domain(format!("unknown kind `{name}`; known: {}", self.names().join(", "))))?;
        if let Some(bad) = params.keys().find(|k| !entry.keys.contains(&k.as_str())) {
            return Err(Error::Domain(format!("`{name}` does not take parameter `{bad}`")));
        }
        let spec = (entry.build)(params)?;
        if !spec.sup_bound().is_finite() {
            return Err(Error::NonFinite(format!("bound of `{name}`")));
        }
        Ok(spec)
    }

    /// Sum of the named terms; an empty list is the zero function.
    pub fn build_sum(&self, terms: &[(String, Params)]) -> Result<SpaceTimeSpec> {
        let mut parts = terms.iter().map(|(n, p)| self.build(n, p)).collect::<Result<Vec<_>>>()?;
        match parts.len() {
            0 => Ok(SpaceTimeSpec::zero()),
            1 => Ok(parts.remove(0)),
            _ => Ok(SpaceTimeSpec::sum(parts)),
        }
    }
}
