//! Simulation configuration: JSON schema, validation and provenance hash.
//!
//! Parsing reports every violation it finds rather than stopping at the
//! first; see `docs/config.md` for the schema.

use std::fmt;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use sha2::{Digest, Sha256};

use crate::error::Result;
use crate::grid::Grid1D;
use crate::mass::{regularize, BoundedProfile, MassSpec, RegularizedMass};
use crate::propagation::SchemeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MassCase {
    Zero,
    Delta,
    DeltaSquared,
    Bounded,
}

impl MassCase {
    /// Case numbering of the wall-effect study: 1 zero, 2 delta, 3 delta^2.
    pub fn from_number(case: u8) -> Option<Self> {
        match case {
            1 => Some(MassCase::Zero),
            2 => Some(MassCase::Delta),
            3 => Some(MassCase::DeltaSquared),
            _ => None,
        }
    }

    pub fn number(self) -> Option<u8> {
        match self {
            MassCase::Zero => Some(1),
            MassCase::Delta => Some(2),
            MassCase::DeltaSquared => Some(3),
            MassCase::Bounded => None,
        }
    }
}

/// Acceptance knobs. Defaults are the documented thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// `max_t |E(t) - E(0)| / E(0)` for the spectral scheme.
    pub energy_rel: f64,
    /// Margin on fitted growth exponents.
    pub exponent_margin: f64,
    /// Relative level below which a difference counts as solver noise.
    pub noise_floor: f64,
    /// Negligible differences must decay faster than `eps^k` for `k` up to this.
    pub negligible_max_order: u32,
    /// Allowed deviation of the power-mode decay exponent from `p`.
    pub power_margin: f64,
    /// Minimum fitted order in the consistency experiment (`None`: not asserted).
    pub consistency_min_order: Option<f64>,
    /// Final `||u - u_eps|| / ||u||` must be below this.
    pub consistency_final_rel: f64,
    /// State norm may grow at most by this factor.
    pub stability_factor: f64,
    /// Relative L2 agreement between the two schemes.
    pub cross_scheme_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            energy_rel: 1e-4,
            exponent_margin: 0.1,
            noise_floor: 1e-10,
            negligible_max_order: 6,
            power_margin: 0.3,
            consistency_min_order: Some(1.5),
            consistency_final_rel: 1e-2,
            stability_factor: 10.0,
            cross_scheme_rel: 2e-2,
        }
    }
}

/// Everything needed to rerun one experiment bit-identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub alpha: f64,
    pub length: f64,
    pub n: usize,
    pub dt: f64,
    pub t_final: f64,
    pub scheme: SchemeId,
    pub mass_case: MassCase,
    pub x0: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounded_profile: Option<BoundedProfile>,
    pub epsilon: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilons: Option<Vec<f64>>,
    pub snapshot_times: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub barrier_x: Option<f64>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<String>,
}

pub const REQUIRED_KEYS: [&str; 10] = [
    "alpha",
    "length",
    "n",
    "dt",
    "t_final",
    "scheme",
    "mass_case",
    "x0",
    "epsilon",
    "snapshot_times",
];

pub const OPTIONAL_KEYS: [&str; 5] = [
    "bounded_profile",
    "epsilons",
    "barrier_x",
    "tolerances",
    "output_dir",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

/// All problems found in a configuration document.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub struct ConfigError {
    pub violations: Vec<Violation>,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "invalid configuration ({} problem(s)):",
            self.violations.len()
        )?;
        for v in &self.violations {
            writeln!(f, "  {}: {}", v.field, v.message)?;
        }
        Ok(())
    }
}

impl ConfigError {
    pub fn fields(&self) -> Vec<&str> {
        self.violations.iter().map(|v| v.field.as_str()).collect()
    }
}

struct Collector(Vec<Violation>);

impl Collector {
    fn push(&mut self, field: &str, message: impl Into<String>) {
        self.0.push(Violation {
            field: field.to_string(),
            message: message.into(),
        });
    }

    fn check(&mut self, ok: bool, field: &str, message: impl Into<String>) {
        if !ok {
            self.push(field, message);
        }
    }

    fn take<T: DeserializeOwned>(&mut self, map: &Map<String, Value>, key: &str) -> Option<T> {
        let value = map.get(key)?;
        match serde_json::from_value(value.clone()) {
            Ok(v) => Some(v),
            Err(e) => {
                self.push(key, e.to_string());
                None
            }
        }
    }
}

/// Parses and validates a JSON configuration. Blank text is treated as an
/// empty object, so every required key is reported missing.
pub fn parse_config(text: &str) -> std::result::Result<SimulationConfig, ConfigError> {
    let mut c = Collector(Vec::new());
    let value: Value = if text.trim().is_empty() {
        Value::Object(Map::new())
    } else {
        match serde_json::from_str(text) {
            Ok(v) => v,
            Err(e) => {
                c.push("<document>", format!("not valid JSON: {e}"));
                return Err(ConfigError { violations: c.0 });
            }
        }
    };
    let Value::Object(map) = value else {
        c.push("<document>", "top level must be a JSON object");
        return Err(ConfigError { violations: c.0 });
    };
    for key in map.keys() {
        if !REQUIRED_KEYS.contains(&key.as_str()) && !OPTIONAL_KEYS.contains(&key.as_str()) {
            c.push(key, "unknown key");
        }
    }
    for key in REQUIRED_KEYS {
        if !map.contains_key(key) {
            c.push(key, "missing required key");
        }
    }

    let alpha = c.take(&map, "alpha");
    let length = c.take(&map, "length");
    let n = c.take(&map, "n");
    let dt = c.take(&map, "dt");
    let t_final = c.take(&map, "t_final");
    let scheme = c.take(&map, "scheme");
    let mass_case = c.take(&map, "mass_case");
    let x0 = c.take(&map, "x0");
    let epsilon = c.take(&map, "epsilon");
    let snapshot_times = c.take(&map, "snapshot_times");
    let bounded_profile = c
        .take::<Option<BoundedProfile>>(&map, "bounded_profile")
        .flatten();
    let epsilons = c.take::<Option<Vec<f64>>>(&map, "epsilons").flatten();
    let barrier_x = c.take::<Option<f64>>(&map, "barrier_x").flatten();
    let tolerances = c.take(&map, "tolerances").unwrap_or_default();
    let output_dir = c.take::<Option<String>>(&map, "output_dir").flatten();

    if !c.0.is_empty() {
        return Err(ConfigError { violations: c.0 });
    }
    // All required keys are present and typed at this point.
    let config = SimulationConfig {
        alpha: alpha.unwrap(),
        length: length.unwrap(),
        n: n.unwrap(),
        dt: dt.unwrap(),
        t_final: t_final.unwrap(),
        scheme: scheme.unwrap(),
        mass_case: mass_case.unwrap(),
        x0: x0.unwrap(),
        bounded_profile,
        epsilon: epsilon.unwrap(),
        epsilons,
        snapshot_times: snapshot_times.unwrap(),
        barrier_x,
        tolerances,
        output_dir,
    };
    config.validate()?;
    Ok(config)
}

fn in_unit_interval(e: f64) -> bool {
    e > 0.0 && e <= 1.0
}

impl SimulationConfig {
    pub fn validate(&self) -> std::result::Result<(), ConfigError> {
        let mut c = Collector(Vec::new());
        let positive = |v: f64| v.is_finite() && v > 0.0;
        c.check(positive(self.alpha), "alpha", "must be positive");
        c.check(positive(self.length), "length", "must be positive");
        c.check(
            self.n >= 4 && self.n.is_multiple_of(2),
            "n",
            "must be even and >= 4",
        );
        c.check(positive(self.dt), "dt", "must be positive");
        c.check(positive(self.t_final), "t_final", "must be positive");
        c.check(
            in_unit_interval(self.epsilon),
            "epsilon",
            "must lie in (0, 1]",
        );
        if let Some(eps) = &self.epsilons {
            c.check(eps.len() >= 3, "epsilons", "need at least 3 values");
            c.check(
                eps.iter().all(|&e| in_unit_interval(e)),
                "epsilons",
                "values must lie in (0, 1]",
            );
            c.check(
                eps.windows(2).all(|w| w[1] < w[0]),
                "epsilons",
                "must be strictly decreasing",
            );
        }
        let snaps = &self.snapshot_times;
        c.check(!snaps.is_empty(), "snapshot_times", "must not be empty");
        c.check(
            snaps.windows(2).all(|w| w[0] <= w[1]),
            "snapshot_times",
            "must be sorted",
        );
        c.check(
            snaps.iter().all(|&s| s >= 0.0 && s <= self.t_final),
            "snapshot_times",
            "must lie in [0, t_final]",
        );
        c.check(
            self.x0 > 0.0 && self.x0 < self.length,
            "x0",
            "must lie strictly inside (0, length)",
        );
        if matches!(self.mass_case, MassCase::Delta | MassCase::DeltaSquared) {
            let margins =
                std::iter::once(self.epsilon).chain(self.epsilons.iter().flatten().copied());
            let widest = margins.fold(0.0_f64, f64::max);
            c.check(
                self.x0 - widest > 0.0 && self.x0 + widest < self.length,
                "x0",
                "mollified support would wrap around the periodic domain",
            );
        }
        match (&self.mass_case, &self.bounded_profile) {
            (MassCase::Bounded, None) => {
                c.push("bounded_profile", "required when mass_case is bounded")
            }
            (MassCase::Bounded, Some(_)) | (_, None) => {}
            (_, Some(_)) => c.push("bounded_profile", "only allowed when mass_case is bounded"),
        }
        if let Some(BoundedProfile::Table { samples }) = &self.bounded_profile {
            c.check(
                samples.len() == self.n,
                "bounded_profile",
                "table length must equal n",
            );
        }
        if self.scheme == SchemeId::ImplicitFd {
            c.check(
                self.alpha == 1.0,
                "scheme",
                "implicit_fd requires alpha = 1",
            );
        }
        if let Some(b) = self.barrier_x {
            c.check(
                b > 0.0 && b < self.length,
                "barrier_x",
                "must lie strictly inside (0, length)",
            );
        }
        if let Some(dir) = &self.output_dir {
            c.check(!dir.trim().is_empty(), "output_dir", "must not be empty");
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("tolerances.energy_rel", t.energy_rel),
            ("tolerances.exponent_margin", t.exponent_margin),
            ("tolerances.noise_floor", t.noise_floor),
            ("tolerances.power_margin", t.power_margin),
            ("tolerances.consistency_final_rel", t.consistency_final_rel),
            ("tolerances.stability_factor", t.stability_factor),
            ("tolerances.cross_scheme_rel", t.cross_scheme_rel),
        ] {
            c.check(positive(v), name, "must be positive");
        }
        if c.0.is_empty() {
            Ok(())
        } else {
            Err(ConfigError { violations: c.0 })
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// SHA-256 over the canonical JSON of every field except `output_dir`.
    pub fn config_hash(&self) -> String {
        let mut canonical = self.clone();
        canonical.output_dir = None;
        let json = serde_json::to_string(&canonical).expect("config serializes");
        Sha256::digest(json.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn grid(&self) -> Result<Grid1D> {
        Grid1D::new(self.length, self.n)
    }

    pub fn mass_spec(&self) -> MassSpec {
        match self.mass_case {
            MassCase::Zero => MassSpec::Zero,
            MassCase::Delta => MassSpec::Delta { x0: self.x0 },
            MassCase::DeltaSquared => MassSpec::DeltaSquared { x0: self.x0 },
            MassCase::Bounded => MassSpec::Bounded(
                self.bounded_profile
                    .clone()
                    .unwrap_or(BoundedProfile::Constant { value: 0.0 }),
            ),
        }
    }

    pub fn regularized_mass(&self, eps: f64, grid: &Grid1D) -> Result<RegularizedMass> {
        regularize(&self.mass_spec(), eps, grid)
    }

    pub fn barrier(&self) -> f64 {
        self.barrier_x.unwrap_or(self.x0)
    }

    pub fn eps_ladder(&self) -> Vec<f64> {
        self.epsilons.clone().unwrap_or_else(|| vec![self.epsilon])
    }
}
