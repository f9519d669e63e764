//! Values flowing into and out of privacy primitives.
//!
//! Equality is bitwise on floats, so `NaN == NaN` and `0.0 != -0.0`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Value {
    Real(#[serde(with = "crate::float_repr")] f64),
    Vector(#[serde(with = "crate::float_repr::vec")] Vec<f64>),
    Int(i64),
    Index(usize),
    Bool(bool),
    Text(String),
    List(Vec<Value>),
    Map(BTreeMap<String, Value>),
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        use Value::*;
        match (self, other) {
            (Real(a), Real(b)) => a.to_bits() == b.to_bits(),
            (Vector(a), Vector(b)) => a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits()),
            (Int(a), Int(b)) => a == b,
            (Index(a), Index(b)) => a == b,
            (Bool(a), Bool(b)) => a == b,
            (Text(a), Text(b)) => a == b,
            (List(a), List(b)) => a == b,
            (Map(a), Map(b)) => a == b,
            _ => false,
        }
    }
}

impl Eq for Value {}

impl Value {
    pub fn map<I, K>(entries: I) -> Value
    where
        I: IntoIterator<Item = (K, Value)>,
        K: Into<String>,
    {
        Value::Map(entries.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }

    pub fn as_real(&self) -> Option<f64> {
        match self {
            Value::Real(x) => Some(*x),
            _ => None,
        }
    }

    pub fn as_vector(&self) -> Option<&[f64]> {
        match self {
            Value::Vector(v) => Some(v),
            _ => None,
        }
    }

    pub fn as_index(&self) -> Option<usize> {
        match self {
            Value::Index(i) => Some(*i),
            _ => None,
        }
    }

    /// Flat numeric view of scalars and vectors; `None` for anything structured.
    pub fn numeric(&self) -> Option<Vec<f64>> {
        match self {
            Value::Real(x) => Some(vec![*x]),
            Value::Vector(v) => Some(v.clone()),
            Value::Int(i) => Some(vec![*i as f64]),
            Value::Index(i) => Some(vec![*i as f64]),
            Value::Bool(b) => Some(vec![f64::from(u8::from(*b))]),
            _ => None,
        }
    }

    /// Every numeric leaf, depth first, map entries in key order.
    pub fn leaves(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<f64>) {
        match self {
            Value::List(xs) => xs.iter().for_each(|x| x.collect_leaves(out)),
            Value::Map(m) => m.values().for_each(|x| x.collect_leaves(out)),
            Value::Text(_) => {}
            other => out.extend(other.numeric().unwrap_or_default()),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.leaves().iter().all(|x| x.is_finite())
    }
}

impl From<f64> for Value {
    fn from(x: f64) -> Self {
        Value::Real(x)
    }
}

impl From<Vec<f64>> for Value {
    fn from(v: Vec<f64>) -> Self {
        Value::Vector(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equality_is_bitwise() {
        assert_eq!(Value::Real(f64::NAN), Value::Real(f64::NAN));
        assert_ne!(Value::Real(0.0), Value::Real(-0.0));
        assert_ne!(Value::Real(1.0), Value::Int(1));
    }

    #[test]
    fn non_finite_round_trip() {
        let v = Value::Vector(vec![f64::NAN, f64::INFINITY, f64::NEG_INFINITY, -0.0, 0.1]);
        let s = serde_json::to_string(&v).unwrap();
        assert_eq!(s, r#"{"vector":["NaN","inf","-inf",-0.0,0.1]}"#);
        let back: Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn leaves_walk_maps_in_key_order() {
        let v = Value::map([("b", Value::Real(2.0)), ("a", Value::Vector(vec![1.0, 1.5]))]);
        assert_eq!(v.leaves(), vec![1.0, 1.5, 2.0]);
    }
}
