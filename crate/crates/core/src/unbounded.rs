//! Serde helpers for bounds that may be `+inf`, written as `null` in JSON.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

fn wrap(v: f64) -> Option<f64> {
    (v != f64::INFINITY).then_some(v)
}

fn unwrap(v: Option<f64>) -> f64 {
    v.unwrap_or(f64::INFINITY)
}

pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
    wrap(*v).serialize(s)
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
    Ok(unwrap(Option::deserialize(d)?))
}

pub mod pair {
    use super::*;

    pub fn serialize<S: Serializer>(v: &(f64, f64), s: S) -> Result<S::Ok, S::Error> {
        (wrap(v.0), wrap(v.1)).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(f64, f64), D::Error> {
        let (a, b) = <(Option<f64>, Option<f64>)>::deserialize(d)?;
        Ok((unwrap(a), unwrap(b)))
    }
}

#[cfg(test)]
mod tests {
    #[derive(serde::Serialize, serde::Deserialize, PartialEq, Debug)]
    struct S {
        #[serde(with = "super")]
        x: f64,
        #[serde(with = "super::pair")]
        r: (f64, f64),
    }

    #[test]
    fn infinity_round_trips() {
        let v = S { x: f64::INFINITY, r: (0.5, f64::INFINITY) };
        let s = serde_json::to_string(&v).unwrap();
        assert_eq!(s, r#"{"x":null,"r":[0.5,null]}"#);
        assert_eq!(serde_json::from_str::<S>(&s).unwrap(), v);
    }
}
