//! Critical-event schema, level recoding, one-hot encoding and stratified
//! splitting.
//!
//! A critical event is a vehicle/VRU interaction whose post-encroachment time
//! (PET) is below three seconds. Each event carries five continuous
//! surrogates and eleven categorical descriptors; the optional label marks a
//! manually confirmed conflict.

mod csv_io;
mod encode;
mod recode;
mod split;

pub use csv_io::{read_events, read_events_path, write_events, write_events_path, LABEL_COLUMN};
pub use encode::{one_hot_encode, Column, ColumnGroup, EncodedMatrix, RowOrigin};
pub use recode::{recode_levels, RawEvent, RecodeMap, RecodeRule};
pub use split::{stratified_split, Split};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// PET threshold (seconds) below which an interaction is a critical event.
pub const CRITICAL_PET: f64 = 3.0;

/// True iff `pet` is strictly below three seconds.
pub fn is_critical(pet: f64) -> Result<bool> {
    if !pet.is_finite() {
        return Err(Error::NonFiniteValue("pet".into()));
    }
    if pet <= 0.0 {
        return Err(Error::NonPositivePet(pet));
    }
    Ok(pet < CRITICAL_PET)
}

macro_rules! levels {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        #[serde(rename_all = "snake_case")]
        pub enum $name {
            $($variant),+
        }

        impl $name {
            pub const LEVELS: &'static [$name] = &[$($name::$variant),+];
            pub const NAMES: &'static [&'static str] = &[$($text),+];

            pub fn name(self) -> &'static str {
                Self::NAMES[self as usize]
            }

            pub fn index(self) -> usize {
                self as usize
            }

            pub fn from_index(i: usize) -> Option<Self> {
                Self::LEVELS.get(i).copied()
            }

            pub fn from_name(s: &str) -> Option<Self> {
                Self::NAMES.iter().position(|n| *n == s).map(|i| Self::LEVELS[i])
            }
        }

        impl std::fmt::Display for $name {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str(self.name())
            }
        }
    };
}

levels!(Proximity { Low => "low", High => "high" });
levels!(VruType { Pedestrian => "pedestrian", Bicycle => "bicycle" });
levels!(VehicleType { Bicycle => "bicycle", Bus => "bus", Car => "car", Motorcycle => "motorcycle" });
levels!(
    /// Road user that reached the conflict point first.
    ArrivedFirst {
        Bicycle => "bicycle",
        Pedestrian => "pedestrian",
        Bus => "bus",
        Car => "car",
        Motorcycle => "motorcycle",
    }
);
levels!(VruLocation {
    Crosswalk => "crosswalk",
    Curb => "curb",
    Sidewalk => "sidewalk",
    TravelLane => "travel_lane",
});
levels!(VehMovement { Through => "through", LeftTurn => "left_turn", RightTurn => "right_turn" });
levels!(VruMovement {
    Crosswalk => "crosswalk",
    Through => "through",
    LeftTurn => "left_turn",
    RightTurn => "right_turn",
});
levels!(Signal { Green => "green", Red => "red" });
levels!(Weather {
    Clear => "clear",
    Sunny => "sunny",
    Precipitation => "precipitation",
    Overcast => "overcast",
});
levels!(Lighting {
    Daylight => "daylight",
    Twilight => "twilight",
    DarkNoStreetlights => "dark_no_streetlights",
    DarkWithStreetlights => "dark_with_streetlights",
    Evening => "evening",
});

/// One observed vehicle/VRU interaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalEvent {
    pub pet: f64,
    pub veh_median_speed: f64,
    pub veh_conflict_speed: f64,
    pub vru_median_speed: f64,
    pub vru_conflict_speed: f64,
    pub proximity: Proximity,
    pub vru_type: VruType,
    pub vehicle_type: VehicleType,
    pub arrived_first: ArrivedFirst,
    pub vru_location: VruLocation,
    pub veh_movement: VehMovement,
    pub nearside: bool,
    pub vru_movement: VruMovement,
    pub veh_signal: Signal,
    pub vru_signal: Signal,
    pub weather: Weather,
    pub lighting: Lighting,
    pub label: Option<bool>,
}

/// Every schema field, in canonical (CSV header) order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variable {
    Pet,
    VehMedianSpeed,
    VehConflictSpeed,
    VruMedianSpeed,
    VruConflictSpeed,
    Proximity,
    VruType,
    VehicleType,
    ArrivedFirst,
    VruLocation,
    VehMovement,
    Nearside,
    VruMovement,
    VehSignal,
    VruSignal,
    Weather,
    Lighting,
}

const NEARSIDE_LEVELS: &[&str] = &["false", "true"];

impl Variable {
    pub const ALL: [Variable; 17] = [
        Variable::Pet,
        Variable::VehMedianSpeed,
        Variable::VehConflictSpeed,
        Variable::VruMedianSpeed,
        Variable::VruConflictSpeed,
        Variable::Proximity,
        Variable::VruType,
        Variable::VehicleType,
        Variable::ArrivedFirst,
        Variable::VruLocation,
        Variable::VehMovement,
        Variable::Nearside,
        Variable::VruMovement,
        Variable::VehSignal,
        Variable::VruSignal,
        Variable::Weather,
        Variable::Lighting,
    ];

    pub const CONTINUOUS: [Variable; 5] = [
        Variable::Pet,
        Variable::VehMedianSpeed,
        Variable::VehConflictSpeed,
        Variable::VruMedianSpeed,
        Variable::VruConflictSpeed,
    ];

    pub const CATEGORICAL: [Variable; 12] = [
        Variable::Proximity,
        Variable::VruType,
        Variable::VehicleType,
        Variable::ArrivedFirst,
        Variable::VruLocation,
        Variable::VehMovement,
        Variable::Nearside,
        Variable::VruMovement,
        Variable::VehSignal,
        Variable::VruSignal,
        Variable::Weather,
        Variable::Lighting,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variable::Pet => "pet",
            Variable::VehMedianSpeed => "veh_median_speed",
            Variable::VehConflictSpeed => "veh_conflict_speed",
            Variable::VruMedianSpeed => "vru_median_speed",
            Variable::VruConflictSpeed => "vru_conflict_speed",
            Variable::Proximity => "proximity",
            Variable::VruType => "vru_type",
            Variable::VehicleType => "vehicle_type",
            Variable::ArrivedFirst => "arrived_first",
            Variable::VruLocation => "vru_location",
            Variable::VehMovement => "veh_movement",
            Variable::Nearside => "nearside",
            Variable::VruMovement => "vru_movement",
            Variable::VehSignal => "veh_signal",
            Variable::VruSignal => "vru_signal",
            Variable::Weather => "weather",
            Variable::Lighting => "lighting",
        }
    }

    pub fn from_name(s: &str) -> Option<Variable> {
        Variable::ALL.into_iter().find(|v| v.name() == s)
    }

    pub fn is_continuous(self) -> bool {
        Variable::CONTINUOUS.contains(&self)
    }

    /// Canonical level names; empty for continuous variables.
    pub fn levels(self) -> &'static [&'static str] {
        match self {
            Variable::Proximity => Proximity::NAMES,
            Variable::VruType => VruType::NAMES,
            Variable::VehicleType => VehicleType::NAMES,
            Variable::ArrivedFirst => ArrivedFirst::NAMES,
            Variable::VruLocation => VruLocation::NAMES,
            Variable::VehMovement => VehMovement::NAMES,
            Variable::Nearside => NEARSIDE_LEVELS,
            Variable::VruMovement => VruMovement::NAMES,
            Variable::VehSignal | Variable::VruSignal => Signal::NAMES,
            Variable::Weather => Weather::NAMES,
            Variable::Lighting => Lighting::NAMES,
            _ => &[],
        }
    }

    /// Reference level, omitted from the logistic design matrix.
    pub fn baseline(self) -> Option<usize> {
        let level = match self {
            Variable::Proximity => Proximity::High.index(),
            Variable::VruType => VruType::Bicycle.index(),
            Variable::VehicleType => VehicleType::Car.index(),
            Variable::ArrivedFirst => ArrivedFirst::Pedestrian.index(),
            Variable::VruLocation => VruLocation::Crosswalk.index(),
            Variable::VehMovement => VehMovement::LeftTurn.index(),
            Variable::Nearside => 0,
            Variable::VruMovement => VruMovement::Crosswalk.index(),
            Variable::VehSignal | Variable::VruSignal => Signal::Green.index(),
            Variable::Weather => Weather::Clear.index(),
            Variable::Lighting => Lighting::Daylight.index(),
            _ => return None,
        };
        Some(level)
    }

    pub fn is_binary(self) -> bool {
        self.levels().len() == 2
    }
}

impl std::fmt::Display for Variable {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl CriticalEvent {
    pub fn continuous(&self, var: Variable) -> Option<f64> {
        let v = match var {
            Variable::Pet => self.pet,
            Variable::VehMedianSpeed => self.veh_median_speed,
            Variable::VehConflictSpeed => self.veh_conflict_speed,
            Variable::VruMedianSpeed => self.vru_median_speed,
            Variable::VruConflictSpeed => self.vru_conflict_speed,
            _ => return None,
        };
        Some(v)
    }

    pub fn set_continuous(&mut self, var: Variable, value: f64) {
        match var {
            Variable::Pet => self.pet = value,
            Variable::VehMedianSpeed => self.veh_median_speed = value,
            Variable::VehConflictSpeed => self.veh_conflict_speed = value,
            Variable::VruMedianSpeed => self.vru_median_speed = value,
            Variable::VruConflictSpeed => self.vru_conflict_speed = value,
            _ => panic!("{var} is not continuous"),
        }
    }

    /// Index of the event's level within `var.levels()`.
    pub fn level(&self, var: Variable) -> Option<usize> {
        let i = match var {
            Variable::Proximity => self.proximity.index(),
            Variable::VruType => self.vru_type.index(),
            Variable::VehicleType => self.vehicle_type.index(),
            Variable::ArrivedFirst => self.arrived_first.index(),
            Variable::VruLocation => self.vru_location.index(),
            Variable::VehMovement => self.veh_movement.index(),
            Variable::Nearside => usize::from(self.nearside),
            Variable::VruMovement => self.vru_movement.index(),
            Variable::VehSignal => self.veh_signal.index(),
            Variable::VruSignal => self.vru_signal.index(),
            Variable::Weather => self.weather.index(),
            Variable::Lighting => self.lighting.index(),
            _ => return None,
        };
        Some(i)
    }

    /// Panics when `var` is continuous or `level` is out of range.
    pub fn set_level(&mut self, var: Variable, level: usize) {
        fn pick<T: Copy>(levels: &[T], var: Variable, level: usize) -> T {
            *levels.get(level).unwrap_or_else(|| panic!("level {level} out of range for {var}"))
        }
        match var {
            Variable::Proximity => self.proximity = pick(Proximity::LEVELS, var, level),
            Variable::VruType => self.vru_type = pick(VruType::LEVELS, var, level),
            Variable::VehicleType => self.vehicle_type = pick(VehicleType::LEVELS, var, level),
            Variable::ArrivedFirst => self.arrived_first = pick(ArrivedFirst::LEVELS, var, level),
            Variable::VruLocation => self.vru_location = pick(VruLocation::LEVELS, var, level),
            Variable::VehMovement => self.veh_movement = pick(VehMovement::LEVELS, var, level),
            Variable::Nearside => self.nearside = pick(&[false, true], var, level),
            Variable::VruMovement => self.vru_movement = pick(VruMovement::LEVELS, var, level),
            Variable::VehSignal => self.veh_signal = pick(Signal::LEVELS, var, level),
            Variable::VruSignal => self.vru_signal = pick(Signal::LEVELS, var, level),
            Variable::Weather => self.weather = pick(Weather::LEVELS, var, level),
            Variable::Lighting => self.lighting = pick(Lighting::LEVELS, var, level),
            _ => panic!("{var} is not categorical"),
        }
    }

    /// Checks the schema invariants: positive finite PET, finite non-negative
    /// speeds, and the pedestrian movement/location constraints.
    pub fn validate(&self) -> Result<()> {
        for var in Variable::CONTINUOUS {
            let v = self.continuous(var).unwrap_or_default();
            if !v.is_finite() {
                return Err(Error::NonFiniteValue(var.name().into()));
            }
            if var == Variable::Pet {
                if v <= 0.0 {
                    return Err(Error::NonPositivePet(v));
                }
            } else if v < 0.0 {
                return Err(Error::InvalidEvent(format!("{var} is negative ({v})")));
            }
        }
        if self.vru_type == VruType::Pedestrian {
            if self.vru_movement != VruMovement::Crosswalk {
                return Err(Error::InvalidEvent(format!(
                    "pedestrian with vru_movement {}",
                    self.vru_movement
                )));
            }
            if self.vru_location == VruLocation::TravelLane {
                return Err(Error::InvalidEvent("pedestrian located in travel_lane".into()));
            }
        }
        Ok(())
    }

    pub fn is_labeled(&self) -> bool {
        self.label.is_some()
    }
}

/// Labels of a fully labeled dataset.
pub fn labels_of(events: &[CriticalEvent]) -> Result<Vec<bool>> {
    events.iter().map(|e| e.label.ok_or(Error::UnlabeledData)).collect()
}

/// Placeholder event used as a starting point when assembling events field by field.
pub(crate) fn sample_event() -> CriticalEvent {
    CriticalEvent {
        pet: 1.4,
        veh_median_speed: 12.0,
        veh_conflict_speed: 14.5,
        vru_median_speed: 3.2,
        vru_conflict_speed: 4.1,
        proximity: Proximity::High,
        vru_type: VruType::Pedestrian,
        vehicle_type: VehicleType::Car,
        arrived_first: ArrivedFirst::Car,
        vru_location: VruLocation::Crosswalk,
        veh_movement: VehMovement::Through,
        nearside: true,
        vru_movement: VruMovement::Crosswalk,
        veh_signal: Signal::Green,
        vru_signal: Signal::Red,
        weather: Weather::Clear,
        lighting: Lighting::Daylight,
        label: Some(false),
    }
}
