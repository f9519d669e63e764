//! JSON encoding for floats that may be non-finite.
//!
//! Finite values are written as JSON numbers (shortest round-trip form);
//! `NaN`, `inf` and `-inf` are written as strings.

use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum Repr {
    Num(f64),
    Text(String),
}

pub(crate) fn to_repr(x: f64) -> Result<f64, &'static str> {
    if x.is_nan() {
        Err("NaN")
    } else if x == f64::INFINITY {
        Err("inf")
    } else if x == f64::NEG_INFINITY {
        Err("-inf")
    } else {
        Ok(x)
    }
}

pub(crate) fn from_text(s: &str) -> Option<f64> {
    match s {
        "NaN" => Some(f64::NAN),
        "inf" => Some(f64::INFINITY),
        "-inf" => Some(f64::NEG_INFINITY),
        _ => None,
    }
}

pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
    match to_repr(*x) {
        Ok(v) => s.serialize_f64(v),
        Err(tag) => s.serialize_str(tag),
    }
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    match Repr::deserialize(d)? {
        Repr::Num(v) => Ok(v),
        Repr::Text(t) => from_text(&t).ok_or_else(|| de::Error::custom(format!("bad float token {t:?}"))),
    }
}

pub mod vec {
    use super::*;
    use serde::ser::SerializeSeq;

    pub fn serialize<S: Serializer>(xs: &[f64], s: S) -> Result<S::Ok, S::Error> {
        let mut seq = s.serialize_seq(Some(xs.len()))?;
        for x in xs {
            match to_repr(*x) {
                Ok(v) => seq.serialize_element(&v)?,
                Err(tag) => seq.serialize_element(tag)?,
            }
        }
        seq.end()
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
        let raw = Vec::<Repr>::deserialize(d)?;
        raw.into_iter()
            .map(|r| match r {
                Repr::Num(v) => Ok(v),
                Repr::Text(t) => from_text(&t).ok_or_else(|| de::Error::custom(format!("bad float token {t:?}"))),
            })
            .collect()
    }
}

pub mod opt {
    use super::*;

    pub fn serialize<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        match x {
            Some(v) => super::serialize(v, s),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        match Option::<Repr>::deserialize(d)? {
            None => Ok(None),
            Some(Repr::Num(v)) => Ok(Some(v)),
            Some(Repr::Text(t)) => from_text(&t)
                .map(Some)
                .ok_or_else(|| de::Error::custom(format!("bad float token {t:?}"))),
        }
    }
}
