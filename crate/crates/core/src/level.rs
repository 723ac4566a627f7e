//! The signed style scale shared by the proposed recognizer and the fuzzy
//! baseline.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// Binary driver class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DriverClass {
    Aggressive,
    Normal,
}

impl DriverClass {
    pub const ALL: [DriverClass; 2] = [DriverClass::Aggressive, DriverClass::Normal];

    pub fn as_str(self) -> &'static str {
        match self {
            DriverClass::Aggressive => "aggressive",
            DriverClass::Normal => "normal",
        }
    }

    pub fn other(self) -> DriverClass {
        match self {
            DriverClass::Aggressive => DriverClass::Normal,
            DriverClass::Normal => DriverClass::Aggressive,
        }
    }
}

impl fmt::Display for DriverClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One of the eight signed style levels.
///
/// The near-tie band is split by the sign of the distance difference:
/// `0+` counts as aggressive and `0-` as normal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StyleLevel {
    Normal3,
    Normal2,
    Normal1,
    ZeroMinus,
    ZeroPlus,
    Aggressive1,
    Aggressive2,
    Aggressive3,
}

impl StyleLevel {
    /// All levels, ordered from most normal to most aggressive.
    pub const ALL: [StyleLevel; 8] = [
        StyleLevel::Normal3,
        StyleLevel::Normal2,
        StyleLevel::Normal1,
        StyleLevel::ZeroMinus,
        StyleLevel::ZeroPlus,
        StyleLevel::Aggressive1,
        StyleLevel::Aggressive2,
        StyleLevel::Aggressive3,
    ];

    /// Integer value on the −3…3 scale; both zero levels map to 0.
    pub fn value(self) -> i8 {
        match self {
            StyleLevel::Normal3 => -3,
            StyleLevel::Normal2 => -2,
            StyleLevel::Normal1 => -1,
            StyleLevel::ZeroMinus | StyleLevel::ZeroPlus => 0,
            StyleLevel::Aggressive1 => 1,
            StyleLevel::Aggressive2 => 2,
            StyleLevel::Aggressive3 => 3,
        }
    }

    /// Position in [`StyleLevel::ALL`].
    pub fn index(self) -> usize {
        self as usize
    }

    pub fn binary_class(self) -> DriverClass {
        if self >= StyleLevel::ZeroPlus {
            DriverClass::Aggressive
        } else {
            DriverClass::Normal
        }
    }

    /// Builds a level from an integer in −3…3; `aggressive_zero` selects
    /// `0+` over `0-`.
    pub fn from_value(value: i8, aggressive_zero: bool) -> Option<StyleLevel> {
        Some(match value {
            -3 => StyleLevel::Normal3,
            -2 => StyleLevel::Normal2,
            -1 => StyleLevel::Normal1,
            0 if aggressive_zero => StyleLevel::ZeroPlus,
            0 => StyleLevel::ZeroMinus,
            1 => StyleLevel::Aggressive1,
            2 => StyleLevel::Aggressive2,
            3 => StyleLevel::Aggressive3,
            _ => return None,
        })
    }

    /// Level with the opposite sign (`0+` ↔ `0-`).
    pub fn mirrored(self) -> StyleLevel {
        StyleLevel::ALL[7 - self.index()]
    }

    pub fn as_str(self) -> &'static str {
        match self {
            StyleLevel::Normal3 => "-3",
            StyleLevel::Normal2 => "-2",
            StyleLevel::Normal1 => "-1",
            StyleLevel::ZeroMinus => "0-",
            StyleLevel::ZeroPlus => "0+",
            StyleLevel::Aggressive1 => "1",
            StyleLevel::Aggressive2 => "2",
            StyleLevel::Aggressive3 => "3",
        }
    }
}

impl fmt::Display for StyleLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StyleLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StyleLevel::ALL
            .into_iter()
            .find(|l| l.as_str() == s.trim())
            .ok_or_else(|| format!("unknown style level `{s}`"))
    }
}

impl Serialize for StyleLevel {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for StyleLevel {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Anything that carries a style level, so recognition rates can be
/// computed the same way for both recognizers.
pub trait Classified {
    fn level(&self) -> StyleLevel;

    fn binary_class(&self) -> DriverClass {
        self.level().binary_class()
    }
}

impl Classified for StyleLevel {
    fn level(&self) -> StyleLevel {
        *self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_class_follows_sign() {
        for level in StyleLevel::ALL {
            let expected = if level.value() > 0 || level == StyleLevel::ZeroPlus {
                DriverClass::Aggressive
            } else {
                DriverClass::Normal
            };
            assert_eq!(level.binary_class(), expected, "{level}");
        }
    }

    #[test]
    fn mirror_negates() {
        for level in StyleLevel::ALL {
            assert_eq!(level.mirrored().value(), -level.value());
            assert_ne!(level.mirrored().binary_class(), level.binary_class());
        }
    }

    #[test]
    fn string_form_round_trips() {
        for level in StyleLevel::ALL {
            assert_eq!(level.as_str().parse::<StyleLevel>().unwrap(), level);
        }
        assert!("4".parse::<StyleLevel>().is_err());
    }
}
