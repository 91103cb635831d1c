use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{CriticalEvent, Variable};
use crate::error::{Error, Result};

/// An event as read from a source table: field name to raw text.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawEvent {
    pub fields: BTreeMap<String, String>,
}

impl RawEvent {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, field: &str, value: impl Into<String>) -> Self {
        self.fields.insert(field.to_string(), value.into());
        self
    }

    pub fn get(&self, field: &str) -> Option<&str> {
        self.fields.get(field).map(String::as_str)
    }

    /// Canonical text form of an event; `recode_levels` maps it back to the
    /// same event.
    pub fn from_event(e: &CriticalEvent) -> Self {
        let mut raw = RawEvent::new();
        for var in Variable::ALL {
            let text = match e.continuous(var) {
                Some(v) => v.to_string(),
                None => var.levels()[e.level(var).expect("categorical")].to_string(),
            };
            raw.fields.insert(var.name().to_string(), text);
        }
        if let Some(label) = e.label {
            raw.fields.insert(super::LABEL_COLUMN.to_string(), if label { "1" } else { "0" }.into());
        }
        raw
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecodeRule {
    pub variable: Variable,
    pub raw: String,
    pub canonical: String,
}

/// Raw-level to canonical-level rules. Matching ignores case and surrounding
/// whitespace.
#[derive(Debug, Clone)]
pub struct RecodeMap {
    rules: Vec<RecodeRule>,
    lookup: BTreeMap<(Variable, String), usize>,
}

fn normalize(s: &str) -> String {
    s.trim().to_lowercase()
}

impl RecodeMap {
    pub fn new(rules: Vec<RecodeRule>) -> Result<Self> {
        let mut lookup = BTreeMap::new();
        for rule in &rules {
            if rule.variable.is_continuous() {
                return Err(Error::InvalidConfig(format!(
                    "recode rule for continuous variable {}",
                    rule.variable
                )));
            }
            let level = rule
                .variable
                .levels()
                .iter()
                .position(|l| *l == rule.canonical)
                .ok_or_else(|| Error::UnknownLevel {
                    variable: rule.variable.name().into(),
                    value: rule.canonical.clone(),
                })?;
            let key = (rule.variable, normalize(&rule.raw));
            if let Some(prev) = lookup.insert(key, level) {
                if prev != level {
                    return Err(Error::InvalidConfig(format!(
                        "raw level {:?} of {} maps to two canonical levels",
                        rule.raw, rule.variable
                    )));
                }
            }
        }
        Ok(Self { rules, lookup })
    }

    /// Identity rules for every canonical level (plus its spaced spelling),
    /// and the level groupings used for the VRU critical-event data:
    /// heavy vehicles become `bus`, rain/snow become `precipitation`, the
    /// crosswalk locations become `crosswalk`, and signal indications collapse
    /// to `red`/`green`.
    pub fn standard() -> Self {
        let mut rules = Vec::new();
        let mut add = |variable: Variable, raw: &str, canonical: &str| {
            rules.push(RecodeRule { variable, raw: raw.into(), canonical: canonical.into() })
        };
        for var in Variable::CATEGORICAL {
            for level in var.levels() {
                add(var, level, level);
                if level.contains('_') {
                    add(var, &level.replace('_', " "), level);
                }
            }
        }
        for heavy in [
            "articulated truck",
            "box truck",
            "single-unit truck",
            "pickup truck",
            "work-van",
            "heavy vehicle",
        ] {
            add(Variable::VehicleType, heavy, "bus");
        }
        for (var, level) in [(Variable::Weather, "rain"), (Variable::Weather, "snow")] {
            add(var, level, "precipitation");
        }
        for loc in ["in crosswalk", "out of crosswalk", "near crosswalk"] {
            add(Variable::VruLocation, loc, "crosswalk");
        }
        for signal in [Variable::VehSignal, Variable::VruSignal] {
            for red in ["do not walk", "red ball"] {
                add(signal, red, "red");
            }
            for green in ["green ball", "green arrow", "yellow ball", "yellow arrow", "walk"] {
                add(signal, green, "green");
            }
        }
        for (raw, canonical) in [("yes", "true"), ("no", "false"), ("1", "true"), ("0", "false")] {
            add(Variable::Nearside, raw, canonical);
        }
        Self::new(rules).expect("standard recode map is consistent")
    }

    pub fn rules(&self) -> &[RecodeRule] {
        &self.rules
    }

    pub fn level(&self, variable: Variable, raw: &str) -> Result<usize> {
        self.lookup.get(&(variable, normalize(raw))).copied().ok_or_else(|| Error::UnknownLevel {
            variable: variable.name().into(),
            value: raw.to_string(),
        })
    }
}

fn parse_continuous(var: Variable, text: &str) -> Result<f64> {
    let v: f64 = text.trim().parse().map_err(|_| {
        Error::InvalidEvent(format!("{var}: cannot parse {text:?} as a number"))
    })?;
    if !v.is_finite() {
        return Err(Error::NonFiniteValue(var.name().into()));
    }
    Ok(v)
}

fn parse_label(text: &str) -> Result<Option<bool>> {
    match text.trim() {
        "" => Ok(None),
        "0" => Ok(Some(false)),
        "1" => Ok(Some(true)),
        other => Err(Error::InvalidEvent(format!(
            "{}: expected 0, 1 or empty, got {other:?}",
            super::LABEL_COLUMN
        ))),
    }
}

/// Maps a raw event onto the canonical schema. Continuous fields pass through
/// unchanged; the result is validated against the event invariants.
pub fn recode_levels(raw: &RawEvent, map: &RecodeMap) -> Result<CriticalEvent> {
    let field = |var: Variable| {
        raw.get(var.name())
            .ok_or_else(|| Error::InvalidEvent(format!("missing field {var}")))
    };
    let mut event = super::sample_event();
    event.label = None;
    for var in Variable::CONTINUOUS {
        event.set_continuous(var, parse_continuous(var, field(var)?)?);
    }
    for var in Variable::CATEGORICAL {
        event.set_level(var, map.level(var, field(var)?)?);
    }
    if let Some(text) = raw.get(super::LABEL_COLUMN) {
        event.label = parse_label(text)?;
    }
    event.validate()?;
    Ok(event)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::event_model::{sample_event, Signal, VehicleType, Weather};

    fn raw_with(var: Variable, value: &str) -> RawEvent {
        let mut raw = RawEvent::from_event(&sample_event());
        raw.fields.insert(var.name().into(), value.into());
        raw
    }

    #[test]
    fn groups_documented_levels() {
        let map = RecodeMap::standard();
        let e = recode_levels(&raw_with(Variable::Weather, "rain"), &map).unwrap();
        assert_eq!(e.weather, Weather::Precipitation);
        let e = recode_levels(&raw_with(Variable::VruSignal, "do not walk"), &map).unwrap();
        assert_eq!(e.vru_signal, Signal::Red);
        let e = recode_levels(&raw_with(Variable::VehSignal, "Red Ball"), &map).unwrap();
        assert_eq!(e.veh_signal, Signal::Red);
        let e = recode_levels(&raw_with(Variable::VehicleType, "car"), &map).unwrap();
        assert_eq!(e.vehicle_type, VehicleType::Car);
        let e = recode_levels(&raw_with(Variable::VehicleType, "articulated truck"), &map).unwrap();
        assert_eq!(e.vehicle_type, VehicleType::Bus);
        let e = recode_levels(&raw_with(Variable::VruLocation, "near crosswalk"), &map).unwrap();
        assert_eq!(e.vru_location, super::super::VruLocation::Crosswalk);
    }

    #[test]
    fn unknown_level_is_reported() {
        let map = RecodeMap::standard();
        match recode_levels(&raw_with(Variable::Weather, "hail"), &map) {
            Err(Error::UnknownLevel { variable, value }) => {
                assert_eq!(variable, "weather");
                assert_eq!(value, "hail");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn non_finite_continuous_rejected() {
        let map = RecodeMap::standard();
        for bad in ["NaN", "inf", "-inf"] {
            let r = recode_levels(&raw_with(Variable::VruConflictSpeed, bad), &map);
            assert!(matches!(r, Err(Error::NonFiniteValue(_))), "{bad}");
        }
    }

    #[test]
    fn continuous_passes_through() {
        let map = RecodeMap::standard();
        let e = recode_levels(&raw_with(Variable::Pet, "2.345678901"), &map).unwrap();
        assert_eq!(e.pet, 2.345678901);
    }

    #[test]
    fn recoding_is_idempotent() {
        let map = RecodeMap::standard();
        let once = recode_levels(&raw_with(Variable::Weather, "snow"), &map).unwrap();
        let twice = recode_levels(&RawEvent::from_event(&once), &map).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn conflicting_rules_rejected() {
        let rules = vec![
            RecodeRule { variable: Variable::Weather, raw: "rain".into(), canonical: "precipitation".into() },
            RecodeRule { variable: Variable::Weather, raw: "RAIN".into(), canonical: "overcast".into() },
        ];
        assert!(matches!(RecodeMap::new(rules), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn label_parsing() {
        let map = RecodeMap::standard();
        let mut raw = RawEvent::from_event(&sample_event());
        raw.fields.insert("confirmed_conflict".into(), "".into());
        assert_eq!(recode_levels(&raw, &map).unwrap().label, None);
        raw.fields.insert("confirmed_conflict".into(), "1".into());
        assert_eq!(recode_levels(&raw, &map).unwrap().label, Some(true));
        raw.fields.insert("confirmed_conflict".into(), "yes".into());
        assert!(recode_levels(&raw, &map).is_err());
    }
}
