//! Scenario files: sectioned TOML with one block per analysis.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use obslab_core::propagator::Params;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default)]
    pub seed: u64,
    pub grid: GridSpec,
    pub initial: InitialSpec,
    #[serde(default)]
    pub potential: Vec<TermSpec>,
    pub time: TimeSpec,
    pub observe: Option<ObserveSpec>,
    pub appell: Option<AppellSpec>,
    pub carleman: Option<CarlemanSpec>,
    pub mass: Option<MassSpec>,
    pub chain: Option<ChainSpec>,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub dim: usize,
    pub half_width: f64,
    pub points: usize,
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct PacketSpec {
    #[serde(default)]
    pub center: [f64; 2],
    pub width: f64,
    #[serde(default)]
    pub momentum: [f64; 2],
    #[serde(default = "one")]
    pub amplitude: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialSpec {
    Gaussian {
        #[serde(default)]
        center: [f64; 2],
        width: f64,
        #[serde(default)]
        momentum: [f64; 2],
        #[serde(default = "one")]
        amplitude: f64,
    },
    Sum {
        parts: Vec<PacketSpec>,
    },
    /// Whitespace-separated `re im` pairs, one grid point per line in storage order.
    File {
        path: String,
    },
}

/// One potential term: a registered kind and its numeric parameters.
#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
pub struct TermSpec {
    pub kind: String,
    #[serde(flatten)]
    pub params: Params,
}

#[derive(Clone, Copy, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "one_usize")]
    pub stride: usize,
}

fn one_usize() -> usize {
    1
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    /// `t_to_zero` or `rho_to_inf`.
    pub mode: String,
    /// Multiple of the fitted constant.
    pub factor: f64,
    /// `to_zero`, `bounded` or `to_infinity`.
    pub expect: String,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ObserveSpec {
    pub r0: f64,
    pub m: Option<f64>,
    /// Radii of the J table; with `t` unset they are also the fit radii.
    pub rho: Vec<f64>,
    /// Fixed time for the J table; unset means `fit_fraction * t*`.
    pub t: Option<f64>,
    #[serde(default = "default_fit_fraction")]
    pub fit_fraction: f64,
    #[serde(default)]
    pub held_out_fractions: Vec<f64>,
    #[serde(default)]
    pub held_out_rho: Vec<f64>,
    #[serde(default = "default_band_factor")]
    pub band_factor: f64,
    #[serde(default)]
    pub periodic: bool,
    #[serde(default)]
    pub probes: Vec<ProbeSpec>,
}

fn default_fit_fraction() -> f64 {
    0.9
}

fn default_band_factor() -> f64 {
    4.0
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AppellSpec {
    /// Parameter of the closure study.
    #[serde(default = "default_closure_gamma")]
    pub gamma: f64,
    #[serde(default = "default_levels")]
    pub levels: u32,
    #[serde(default = "yes")]
    pub closure: bool,
    /// Fixed parameters for the dense bound check.
    #[serde(default)]
    pub bound_gammas: Vec<f64>,
    #[serde(default = "default_bound_samples")]
    pub bound_samples: usize,
    /// Random `(gamma, position)` samples with log-uniform `gamma` in `(16, 1e8]`.
    #[serde(default = "default_random_samples")]
    pub random_samples: usize,
}

fn default_closure_gamma() -> f64 {
    4.0
}

fn default_levels() -> u32 {
    2
}

fn yes() -> bool {
    true
}

fn default_bound_samples() -> usize {
    10_000
}

fn default_random_samples() -> usize {
    10_000
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CarlemanSpec {
    pub r: f64,
    #[serde(default = "default_smoothness")]
    pub smoothness: usize,
    #[serde(default = "default_suite_steps")]
    pub steps: usize,
    /// `sigma = k * sigma_scale * R^2` for each multiplier `k`.
    #[serde(default = "one")]
    pub sigma_scale: f64,
    #[serde(default = "default_multipliers")]
    pub multipliers: Vec<f64>,
    /// Random fields for the symmetry and conjugation checks.
    #[serde(default = "default_algebra_fields")]
    pub algebra_fields: usize,
    /// Points per axis of the finer grid used for the conjugation identity.
    #[serde(default = "default_algebra_points")]
    pub algebra_points: usize,
    #[serde(default = "yes")]
    pub calibrate: bool,
}

fn default_smoothness() -> usize {
    4
}

fn default_suite_steps() -> usize {
    512
}

fn default_multipliers() -> Vec<f64> {
    vec![1.0, 2.0, 4.0]
}

fn default_algebra_fields() -> usize {
    20
}

fn default_algebra_points() -> usize {
    4096
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MassSpec {
    /// `pointwise`, `whole_box` or `radial`.
    pub weight: String,
    /// Cutoff radius for the radial weight.
    pub r: Option<f64>,
    /// Extra runs at `dt / 2^k`, `k = 1..=halvings`.
    #[serde(default)]
    pub halvings: u32,
    pub tolerance: Option<f64>,
}

#[derive(Clone, Debug, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ChainSpec {
    pub r0: f64,
    pub m: Option<f64>,
    /// Fixed `gamma`; unset means `gamma_factor` times the admissible minimum.
    pub gamma: Option<f64>,
    #[serde(default = "default_gamma_factor")]
    pub gamma_factor: f64,
    pub c_n: f64,
    #[serde(default = "default_smoothness")]
    pub smoothness: usize,
}

fn default_gamma_factor() -> f64 {
    1.1
}

/// A failed precondition, with the line of the offending key when known.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.message),
            None => write!(f, "{}", self.message),
        }
    }
}

/// The raw text of a scenario, kept for line lookup and hashing.
#[derive(Clone, Debug)]
pub struct Source {
    pub text: String,
}

impl Source {
    /// 1-based line of `key` inside `[section]` (or the top level for `""`).
    /// Array-of-table sections match their first occurrence.
    pub fn line_of(&self, section: &str, key: &str) -> Option<usize> {
        let mut current = String::new();
        let mut header_line = None;
        for (n, raw) in self.text.lines().enumerate() {
            let line = raw.trim();
            if let Some(h) = line.strip_prefix('[') {
                current = h.trim_start_matches('[').trim_end_matches(']').trim().to_string();
                if current == section && header_line.is_none() {
                    header_line = Some(n + 1);
                }
                continue;
            }
            if current == section {
                let lhs = line.split('=').next().unwrap_or("").trim();
                if lhs == key {
                    return Some(n + 1);
                }
            }
        }
        header_line
    }

    /// 1-based line of `key` inside the `nth` (0-based) `[[section]]` entry,
    /// or of that entry's header when the key is absent.
    pub fn line_of_nth(&self, section: &str, nth: usize, key: &str) -> Option<usize> {
        let mut count = 0;
        let mut inside = false;
        let mut header_line = None;
        for (n, raw) in self.text.lines().enumerate() {
            let line = raw.trim();
            if let Some(h) = line.strip_prefix('[') {
                inside = h.trim_start_matches('[').trim_end_matches(']').trim() == section && count == nth;
                if h.trim_start_matches('[').trim_end_matches(']').trim() == section {
                    count += 1;
                }
                if inside {
                    header_line = Some(n + 1);
                }
                continue;
            }
            if inside && line.split('=').next().unwrap_or("").trim() == key {
                return Some(n + 1);
            }
        }
        header_line
    }

    /// Hex SHA-256 of the scenario text.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

pub fn parse(text: &str) -> Result<Scenario, CliError> {
    toml::from_str(text).map_err(|e| CliError::Validation(vec![Violation { line: None, message: e.to_string() }]))
}

pub fn load(path: &Path) -> Result<(Scenario, Source), CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    let scenario = parse(&text)?;
    Ok((scenario, Source { text }))
}

/// Sets `path` (dotted, e.g. `observe.rho`) to `value` in a scenario text.
/// A list-valued target becomes the single-element list `[value]`.
pub fn override_value(text: &str, path: &str, value: f64) -> Result<String, CliError> {
    let mut doc: toml::Table =
        toml::from_str(text).map_err(|e| CliError::Validation(vec![Violation { line: None, message: e.to_string() }]))?;
    let keys: Vec<&str> = path.split('.').collect();
    let (last, parents) = keys.split_last().ok_or_else(|| CliError::Usage("empty sweep axis".into()))?;
    let mut table = &mut doc;
    for k in parents {
        table = table
            .get_mut(*k)
            .and_then(|v| v.as_table_mut())
            .ok_or_else(|| CliError::Usage(format!("sweep axis `{path}`: no section `{k}`")))?;
    }
    let slot = table.get_mut(*last).ok_or_else(|| CliError::Usage(format!("sweep axis `{path}` is not set in the scenario")))?;
    let number = |v: f64, like: &toml::Value| match like {
        toml::Value::Integer(_) if v.fract() == 0.0 => toml::Value::Integer(v as i64),
        _ => toml::Value::Float(v),
    };
    *slot = match slot {
        toml::Value::Array(items) => {
            let like = items.first().cloned().unwrap_or(toml::Value::Float(0.0));
            toml::Value::Array(vec![number(value, &like)])
        }
        toml::Value::Integer(_) | toml::Value::Float(_) => number(value, slot),
        _ => return Err(CliError::Usage(format!("sweep axis `{path}` is not numeric"))),
    };
    toml::to_string(&doc).map_err(|e| CliError::Io(e.to_string()))
}

/// Parameters of a potential term with the kind removed.
pub fn term_params(term: &TermSpec) -> Params {
    term.params.clone()
}

/// Flat key/value listing of a scenario used as the parameter tuple of records.
pub fn describe(s: &Scenario) -> BTreeMap<&'static str, String> {
    let mut m = BTreeMap::new();
    m.insert("dim", s.grid.dim.to_string());
    m.insert("half_width", s.grid.half_width.to_string());
    m.insert("points", s.grid.points.to_string());
    m.insert("dt", s.time.dt.to_string());
    m.insert("t_end", s.time.t_end.to_string());
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEXT: &str = r#"
name = "t"

[grid]
dim = 1
half_width = 8.0
points = 64

[initial]
kind = "gaussian"
width = 1.0

[[potential]]
kind = "constant"
re = 1.0

[time]
dt = 0.01
t_end = 0.1

[observe]
r0 = 1.0
rho = [1.0, 2.0]
"#;

    #[test]
    fn parses_and_locates_keys() {
        let s = parse(TEXT).unwrap();
        assert_eq!(s.potential[0].kind, "constant");
        assert_eq!(s.potential[0].params.get("re"), Some(&1.0));
        assert_eq!(s.time.stride, 1);
        let src = Source { text: TEXT.into() };
        assert_eq!(src.line_of("grid", "points"), Some(7));
        assert_eq!(src.line_of("observe", "rho"), Some(23));
        assert_eq!(src.line_of("observe", "m"), Some(21));
        assert_eq!(src.line_of("", "name"), Some(2));
        assert_eq!(src.hash().len(), 64);
        let two = format!("{TEXT}\n[[potential]]\nkind = \"zero\"\n");
        let src = Source { text: two };
        assert_eq!(src.line_of_nth("potential", 0, "kind"), Some(14));
        assert_eq!(src.line_of_nth("potential", 1, "kind"), Some(26));
        assert_eq!(src.line_of_nth("potential", 1, "re"), Some(25));
    }

    #[test]
    fn unknown_fields_are_rejected() {
        let bad = TEXT.replace("points = 64", "points = 64\nsize = 3");
        assert!(matches!(parse(&bad), Err(CliError::Validation(_))));
    }

    #[test]
    fn override_replaces_lists_and_scalars() {
        let t = override_value(TEXT, "observe.rho", 4.0).unwrap();
        assert_eq!(parse(&t).unwrap().observe.unwrap().rho, vec![4.0]);
        let t = override_value(TEXT, "grid.points", 128.0).unwrap();
        assert_eq!(parse(&t).unwrap().grid.points, 128);
        assert!(override_value(TEXT, "observe.t", 1.0).is_err());
        assert!(override_value(TEXT, "nothing.here", 1.0).is_err());
    }
}
