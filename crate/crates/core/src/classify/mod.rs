//! Liquid-level state classification from frame-pair difference features.

mod features;
mod heuristic;
mod mlp;

pub use features::{extract_features, FeatureVector, FEATURE_LEN, GLOBAL_FEATURES, GRID};
pub use heuristic::heuristic_classify;
pub use mlp::{softmax, train, MlpModel, TrainOptions, TrainOutcome, HIDDEN_UNITS};

use serde::{Deserialize, Serialize};

/// The five states a frame pair can be assigned. The discriminant order is
/// the canonical class index used by models, confusion matrices, and
/// tie-breaking (lowest index wins).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LevelState {
    LowStatic,
    Rising,
    HighStatic,
    Falling,
    ContainerMoved,
}

/// Number of level states.
pub const CLASS_COUNT: usize = 5;

impl LevelState {
    pub const ALL: [LevelState; CLASS_COUNT] = [
        LevelState::LowStatic,
        LevelState::Rising,
        LevelState::HighStatic,
        LevelState::Falling,
        LevelState::ContainerMoved,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(index: usize) -> Option<LevelState> {
        Self::ALL.get(index).copied()
    }
}

impl std::fmt::Display for LevelState {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            LevelState::LowStatic => "LowStatic",
            LevelState::Rising => "Rising",
            LevelState::HighStatic => "HighStatic",
            LevelState::Falling => "Falling",
            LevelState::ContainerMoved => "ContainerMoved",
        };
        f.write_str(name)
    }
}

impl std::str::FromStr for LevelState {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "LowStatic" => Ok(LevelState::LowStatic),
            "Rising" => Ok(LevelState::Rising),
            "HighStatic" => Ok(LevelState::HighStatic),
            "Falling" => Ok(LevelState::Falling),
            "ContainerMoved" => Ok(LevelState::ContainerMoved),
            other => Err(format!("unknown level state {other:?}")),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_round_trip() {
        for (i, state) in LevelState::ALL.iter().enumerate() {
            assert_eq!(state.index(), i);
            assert_eq!(LevelState::from_index(i), Some(*state));
        }
        assert_eq!(LevelState::from_index(5), None);
    }

    #[test]
    fn display_parse_round_trip() {
        for state in LevelState::ALL {
            let text = state.to_string();
            assert_eq!(text.parse::<LevelState>().unwrap(), state);
        }
        assert!("Sideways".parse::<LevelState>().is_err());
    }

    #[test]
    fn serde_uses_variant_names() {
        let json = serde_json::to_string(&LevelState::ContainerMoved).unwrap();
        assert_eq!(json, "\"ContainerMoved\"");
        let back: LevelState = serde_json::from_str(&json).unwrap();
        assert_eq!(back, LevelState::ContainerMoved);
    }
}
