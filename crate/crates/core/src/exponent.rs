//! The exponent `p`, which may be `inf`.
//!
//! JSON has no infinity, so `p = inf` is written as the string `"inf"` and
//! finite values as plain numbers.

use serde::{Deserialize, Deserializer, Serializer};

use crate::error::{Error, Result};

/// Parses `inf`/`infinity` or a float `>= 1`.
pub fn parse(s: &str) -> Result<f64> {
    let t = s.trim().to_ascii_lowercase();
    let p = match t.as_str() {
        "inf" | "infinity" | "+inf" => f64::INFINITY,
        _ => t.parse::<f64>().map_err(|_| Error::Parse(format!("bad exponent `{s}`")))?,
    };
    if p >= 1.0 {
        Ok(p)
    } else {
        Err(Error::InvalidExponent(p))
    }
}

pub fn serialize<S: Serializer>(p: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if p.is_infinite() {
        s.serialize_str("inf")
    } else {
        s.serialize_f64(*p)
    }
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Num(f64),
        Str(String),
    }
    match Raw::deserialize(d)? {
        Raw::Num(p) => Ok(p),
        Raw::Str(s) => parse(&s).map_err(serde::de::Error::custom),
    }
}
