//! Serde adapter writing a [`BigRational`] as the string `"p/q"`. Integers are
//! accepted on input; floats are rejected.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::de::{self, Visitor};
use serde::{Deserializer, Serializer};

pub fn to_string(r: &BigRational) -> String {
    format!("{}/{}", r.numer(), r.denom())
}

/// Parses `"p/q"` or `"p"`; decimal notation is an error.
pub fn parse(s: &str) -> Result<BigRational, String> {
    let s = s.trim();
    let int = |v: &str| v.trim().parse::<BigInt>().map_err(|_| format!("'{s}' is not a rational of the form p/q"));
    match s.split_once('/') {
        Some((p, q)) => {
            let q = int(q)?;
            if q == BigInt::from(0) {
                return Err(format!("'{s}' has a zero denominator"));
            }
            Ok(BigRational::new(int(p)?, q))
        }
        None => Ok(BigRational::from_integer(int(s)?)),
    }
}

pub fn serialize<S: Serializer>(r: &BigRational, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&to_string(r))
}

struct RatVisitor;

impl<'de> Visitor<'de> for RatVisitor {
    type Value = BigRational;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("a rational string \"p/q\" or an integer")
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<BigRational, E> {
        parse(v).map_err(E::custom)
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<BigRational, E> {
        Ok(BigRational::from_integer(v.into()))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<BigRational, E> {
        Ok(BigRational::from_integer(v.into()))
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<BigRational, E> {
        Err(E::custom(format!("float {v} where an exact rational \"p/q\" is required")))
    }
}

pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BigRational, D::Error> {
    d.deserialize_any(RatVisitor)
}
