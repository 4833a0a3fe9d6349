//! Scenario configuration: JSON schema, validation and resolution into
//! physical units (lengths in m, detunings in rad/s).

use fiberqed::numerics::ToleranceConfig;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub field: String,
    pub message: String,
}

impl ConfigError {
    pub fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { field: field.into(), message: message.into() }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub fiber: FiberConfig,
    #[serde(default)]
    pub atom: AtomConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub array: Option<ArrayConfig>,
    #[serde(default)]
    pub field: FieldConfig,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub tolerances: ToleranceOverrides,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FiberConfig {
    #[serde(default = "default_radius")]
    pub radius_nm: f64,
    /// Core index; Sellmeier fused silica at the transition wavelength if absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n1: Option<f64>,
    #[serde(default = "default_n2")]
    pub n2: f64,
}

fn default_radius() -> f64 {
    250.0
}

fn default_n2() -> f64 {
    1.0
}

impl Default for FiberConfig {
    fn default() -> Self {
        Self { radius_nm: default_radius(), n1: None, n2: default_n2() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct AtomConfig {
    #[serde(default = "default_species")]
    pub species: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_minus_a_nm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_over_a: Option<f64>,
}

fn default_species() -> String {
    "cesium_d2".into()
}

impl Default for AtomConfig {
    fn default() -> Self {
        Self { species: default_species(), r_minus_a_nm: None, r_over_a: None }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Range {
    pub start: f64,
    pub stop: f64,
    pub points: usize,
}

impl Range {
    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start];
        }
        let step = (self.stop - self.start) / (self.points - 1) as f64;
        (0..self.points).map(|i| self.start + step * i as f64).collect()
    }

    fn validate(&self, field: &str) -> Result<(), ConfigError> {
        if !(self.start.is_finite() && self.stop.is_finite()) {
            return Err(ConfigError::new(field, "start and stop must be finite"));
        }
        if self.points == 0 {
            return Err(ConfigError::new(format!("{field}.points"), "must be >= 1"));
        }
        if self.points > 1 && self.stop <= self.start {
            return Err(ConfigError::new(field, "stop must exceed start"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct CountRange {
    pub start: u64,
    pub stop: u64,
    #[serde(default = "default_step")]
    pub step: u64,
}

fn default_step() -> u64 {
    1
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ArrayConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_range: Option<CountRange>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period_nm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bragg_order: Option<i64>,
    /// Detuning at which the Bragg condition holds; only with `bragg_order`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_lat_mhz: Option<f64>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
pub enum Polarization {
    #[serde(rename = "circ+")]
    CircPlus,
    #[serde(rename = "circ-", alias = "circ−")]
    CircMinus,
    #[serde(rename = "x")]
    X,
    #[serde(rename = "y")]
    Y,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FieldConfig {
    #[serde(default = "default_polarization")]
    pub polarization: Polarization,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detuning_mhz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detuning_range_mhz: Option<Range>,
}

fn default_polarization() -> Polarization {
    Polarization::X
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self { polarization: default_polarization(), detuning_mhz: None, detuning_range_mhz: None }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Radial grid for `mode`, `rates` and `single`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_over_a_range: Option<Range>,
    /// Period grid for `scan --axis lambda`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period_range_nm: Option<Range>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ToleranceOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub root_rel_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quad_rel_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series_abs_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m_truncation_tol: Option<f64>,
}

impl ToleranceOverrides {
    pub fn resolve(&self) -> Result<ToleranceConfig, ConfigError> {
        let mut t = ToleranceConfig::default();
        if let Some(v) = self.root_rel_tol {
            t.root_rel_tol = v;
        }
        if let Some(v) = self.quad_rel_tol {
            t.quad_rel_tol = v;
        }
        if let Some(v) = self.series_abs_tol {
            t.series_abs_tol = v;
        }
        if let Some(v) = self.m_truncation_tol {
            t.m_truncation_tol = v;
        }
        t.validate().map_err(|e| ConfigError::new("tolerances", e.to_string()))?;
        Ok(t)
    }
}

/// Array period as given in the config.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PeriodSpec {
    Period(f64),
    Bragg { order: i64, delta_lat: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CountSpec {
    One(u64),
    Range(CountRange),
}

impl CountSpec {
    pub fn values(&self) -> Vec<u64> {
        match *self {
            CountSpec::One(n) => vec![n],
            CountSpec::Range(r) => (r.start..=r.stop).step_by(r.step as usize).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedArray {
    pub count: CountSpec,
    pub period: PeriodSpec,
}

/// Validated scenario in SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub radius: f64,
    pub n1: Option<f64>,
    pub n2: f64,
    /// Atom distance from the fiber axis.
    pub r: f64,
    pub array: Option<ResolvedArray>,
    pub polarization: Polarization,
    /// Detuning grid in rad/s (single point if a scalar was given, δ = 0 if neither).
    pub detunings: Vec<f64>,
    pub detuning_is_range: bool,
    pub r_grid: Option<Vec<f64>>,
    pub period_grid: Option<Vec<f64>>,
    pub tolerances: ToleranceConfig,
}

pub fn mhz_to_rad(f: f64) -> f64 {
    2.0 * PI * 1e6 * f
}

fn positive(field: &str, v: f64) -> Result<f64, ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(ConfigError::new(field, format!("must be a positive number, got {v}")))
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| {
            ConfigError::new(format!("line {} column {}", e.line(), e.column()), e.to_string())
        })
    }

    pub fn resolve(&self) -> Result<Resolved, ConfigError> {
        let radius = positive("fiber.radius_nm", self.fiber.radius_nm)? * 1e-9;
        if !(self.fiber.n2.is_finite() && self.fiber.n2 >= 1.0) {
            return Err(ConfigError::new("fiber.n2", "must be >= 1"));
        }
        if let Some(n1) = self.fiber.n1 {
            if !(n1.is_finite() && n1 > self.fiber.n2) {
                return Err(ConfigError::new("fiber.n1", "must exceed fiber.n2"));
            }
        }
        if self.atom.species != "cesium_d2" {
            return Err(ConfigError::new(
                "atom.species",
                format!("unsupported species '{}'; only \"cesium_d2\" is available", self.atom.species),
            ));
        }
        let r = match (self.atom.r_minus_a_nm, self.atom.r_over_a) {
            (Some(_), Some(_)) => {
                return Err(ConfigError::new(
                    "atom.r_minus_a_nm, atom.r_over_a",
                    "give exactly one of atom.r_minus_a_nm and atom.r_over_a",
                ))
            }
            (Some(d), None) if d.is_finite() && d >= 0.0 => radius + d * 1e-9,
            (Some(d), None) => return Err(ConfigError::new("atom.r_minus_a_nm", format!("must be >= 0, got {d}"))),
            (None, Some(x)) if x.is_finite() && x >= 1.0 => radius * x,
            (None, Some(x)) => return Err(ConfigError::new("atom.r_over_a", format!("must be >= 1, got {x}"))),
            (None, None) => radius + 200e-9,
        };
        let array = self.array.as_ref().map(resolve_array).transpose()?;
        let (detunings, detuning_is_range) = match (self.field.detuning_mhz, self.field.detuning_range_mhz) {
            (Some(_), Some(_)) => {
                return Err(ConfigError::new(
                    "field.detuning_mhz, field.detuning_range_mhz",
                    "give at most one of field.detuning_mhz and field.detuning_range_mhz",
                ))
            }
            (Some(d), None) if d.is_finite() => (vec![mhz_to_rad(d)], false),
            (Some(d), None) => return Err(ConfigError::new("field.detuning_mhz", format!("must be finite, got {d}"))),
            (None, Some(range)) => {
                range.validate("field.detuning_range_mhz")?;
                (range.values().into_iter().map(mhz_to_rad).collect(), true)
            }
            (None, None) => (vec![0.0], false),
        };
        let r_grid = match self.run.r_over_a_range {
            Some(range) => {
                range.validate("run.r_over_a_range")?;
                Some(range.values().into_iter().map(|x| x * radius).collect())
            }
            None => None,
        };
        let period_grid = match self.run.period_range_nm {
            Some(range) => {
                range.validate("run.period_range_nm")?;
                if range.start <= 0.0 {
                    return Err(ConfigError::new("run.period_range_nm.start", "must be > 0"));
                }
                Some(range.values().into_iter().map(|x| x * 1e-9).collect())
            }
            None => None,
        };
        Ok(Resolved {
            radius,
            n1: self.fiber.n1,
            n2: self.fiber.n2,
            r,
            array,
            polarization: self.field.polarization,
            detunings,
            detuning_is_range,
            r_grid,
            period_grid,
            tolerances: self.tolerances.resolve()?,
        })
    }
}

fn resolve_array(a: &ArrayConfig) -> Result<ResolvedArray, ConfigError> {
    let count = match (a.n, a.n_range) {
        (Some(_), Some(_)) => {
            return Err(ConfigError::new("array.n, array.n_range", "give exactly one of array.n and array.n_range"))
        }
        (None, None) => return Err(ConfigError::new("array.n, array.n_range", "one of array.n and array.n_range is required")),
        (Some(0), None) => return Err(ConfigError::new("array.n", "must be >= 1")),
        (Some(n), None) => CountSpec::One(n),
        (None, Some(r)) => {
            if r.start == 0 || r.stop < r.start || r.step == 0 {
                return Err(ConfigError::new("array.n_range", "need 1 <= start <= stop and step >= 1"));
            }
            CountSpec::Range(r)
        }
    };
    let period = match (a.period_nm, a.bragg_order) {
        (Some(_), Some(_)) => {
            return Err(ConfigError::new(
                "array.period_nm, array.bragg_order",
                "give exactly one of array.period_nm and array.bragg_order",
            ))
        }
        (None, None) => {
            return Err(ConfigError::new(
                "array.period_nm, array.bragg_order",
                "one of array.period_nm and array.bragg_order is required",
            ))
        }
        (Some(p), None) => {
            if a.delta_lat_mhz.is_some() {
                return Err(ConfigError::new("array.delta_lat_mhz", "only valid together with array.bragg_order"));
            }
            PeriodSpec::Period(positive("array.period_nm", p)? * 1e-9)
        }
        (None, Some(order)) => {
            if order < 1 {
                return Err(ConfigError::new("array.bragg_order", format!("must be >= 1, got {order}")));
            }
            let dl = a.delta_lat_mhz.unwrap_or(0.0);
            if !dl.is_finite() {
                return Err(ConfigError::new("array.delta_lat_mhz", "must be finite"));
            }
            PeriodSpec::Bragg { order, delta_lat: mhz_to_rad(dl) }
        }
    };
    Ok(ResolvedArray { count, period })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_document_uses_defaults() {
        let r = ScenarioConfig::from_json("{}").unwrap().resolve().unwrap();
        assert!((r.radius - 250e-9).abs() < 1e-20);
        assert!((r.r - 450e-9).abs() < 1e-20);
        assert_eq!(r.detunings, vec![0.0]);
        assert_eq!(r.polarization, Polarization::X);
        assert!(r.array.is_none());
    }

    #[test]
    fn period_and_order_together_rejected() {
        let c = ScenarioConfig::from_json(r#"{"array": {"n": 10, "period_nm": 745, "bragg_order": 2}}"#).unwrap();
        let e = c.resolve().unwrap_err();
        assert!(e.field.contains("period_nm") && e.field.contains("bragg_order"));
    }

    #[test]
    fn two_count_specifiers_rejected() {
        let c = ScenarioConfig::from_json(r#"{"array": {"n": 10, "n_range": {"start": 1, "stop": 5}, "bragg_order": 2}}"#)
            .unwrap();
        assert!(c.resolve().unwrap_err().field.contains("n_range"));
    }

    #[test]
    fn unknown_field_reports_position() {
        let e = ScenarioConfig::from_json("{\n  \"fibre\": {}\n}").unwrap_err();
        assert!(e.field.starts_with("line 2"), "{e}");
    }

    #[test]
    fn detuning_in_megahertz() {
        let c = ScenarioConfig::from_json(r#"{"field": {"polarization": "y", "detuning_mhz": 1.0}}"#).unwrap();
        let r = c.resolve().unwrap();
        assert!((r.detunings[0] - 2.0 * PI * 1e6).abs() < 1e-6);
        assert_eq!(r.polarization, Polarization::Y);
    }

    #[test]
    fn ranges_are_inclusive() {
        let range = Range { start: -1.0, stop: 1.0, points: 5 };
        assert_eq!(range.values(), vec![-1.0, -0.5, 0.0, 0.5, 1.0]);
        let n = CountSpec::Range(CountRange { start: 1, stop: 10, step: 3 });
        assert_eq!(n.values(), vec![1, 4, 7, 10]);
    }

    #[test]
    fn bad_species_and_position() {
        let c = ScenarioConfig::from_json(r#"{"atom": {"species": "rubidium_d2"}}"#).unwrap();
        assert_eq!(c.resolve().unwrap_err().field, "atom.species");
        let c = ScenarioConfig::from_json(r#"{"atom": {"r_over_a": 0.5}}"#).unwrap();
        assert_eq!(c.resolve().unwrap_err().field, "atom.r_over_a");
    }
}
