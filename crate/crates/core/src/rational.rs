//! Exact rational arithmetic for utilizations and capacities.

use std::fmt;

use num_rational::Ratio;
use serde::de::{self, Visitor};
use serde::{Deserializer, Serializer};

pub type Rational = Ratio<i64>;

/// Parses `"3/10"`, `"0.25"` or `"2"` into an exact rational.
pub fn parse_rational(text: &str) -> Result<Rational, String> {
    let text = text.trim();
    if let Some((n, d)) = text.split_once('/') {
        let n: i64 = n.trim().parse().map_err(|_| format!("bad numerator in {text:?}"))?;
        let d: i64 = d.trim().parse().map_err(|_| format!("bad denominator in {text:?}"))?;
        if d == 0 {
            return Err(format!("zero denominator in {text:?}"));
        }
        return Ok(Rational::new(n, d));
    }
    if let Some((int, frac)) = text.split_once('.') {
        let neg = int.starts_with('-');
        let whole: i64 =
            if int.is_empty() || int == "-" { 0 } else { int.parse().map_err(|_| format!("bad number {text:?}"))? };
        if frac.len() > 12 || !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(format!("bad number {text:?}"));
        }
        let scale = 10i64.pow(frac.len() as u32);
        let f: i64 = if frac.is_empty() { 0 } else { frac.parse().unwrap() };
        let sign = if neg { -1 } else { 1 };
        return Ok(Rational::from_integer(whole) + Rational::new(sign * f, scale));
    }
    text.parse::<i64>().map(Rational::from_integer).map_err(|_| format!("bad number {text:?}"))
}

pub fn format_rational(r: &Rational) -> String {
    if *r.denom() == 1 {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Serde adapter: rationals as `"n/d"` strings, accepting plain numbers on input.
pub mod serde_text {
    use super::*;

    pub fn serialize<S: Serializer>(r: &Rational, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format_rational(r))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Rational, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Rational;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a rational as \"n/d\", a decimal string or an integer")
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Rational, E> {
                parse_rational(v).map_err(E::custom)
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Rational, E> {
                Ok(Rational::from_integer(v))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Rational, E> {
                Ok(Rational::from_integer(v as i64))
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Rational, E> {
                parse_rational(&format!("{v}")).map_err(E::custom)
            }
        }
        d.deserialize_any(V)
    }
}
