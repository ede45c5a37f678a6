use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A positive real parameter that may be left to its data-dependent default.
///
/// Serialises as the string `"auto"` or a number.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum AutoOr {
    #[default]
    Auto,
    Value(f64),
}

impl AutoOr {
    pub fn resolve(self, default: impl FnOnce() -> f64) -> f64 {
        match self {
            AutoOr::Auto => default(),
            AutoOr::Value(v) => v,
        }
    }
}

impl fmt::Display for AutoOr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AutoOr::Auto => f.write_str("auto"),
            AutoOr::Value(v) => write!(f, "{v}"),
        }
    }
}

impl Serialize for AutoOr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            AutoOr::Auto => s.serialize_str("auto"),
            AutoOr::Value(v) => s.serialize_f64(*v),
        }
    }
}

impl<'de> Deserialize<'de> for AutoOr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Int(i64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(v) => Ok(AutoOr::Value(v)),
            Raw::Int(v) => Ok(AutoOr::Value(v as f64)),
            Raw::Str(s) if s == "auto" => Ok(AutoOr::Auto),
            Raw::Str(s) => Err(serde::de::Error::custom(format!("expected \"auto\" or a number, got {s:?}"))),
        }
    }
}
