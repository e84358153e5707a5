//! Exact rational scalars with the `{num, den}` JSON form.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::{self, Deserializer, MapAccess, Visitor};
use serde::ser::{SerializeStruct, Serializer};
use serde::{Deserialize, Serialize};

/// A rational number. Serializes as `{"num": "...", "den": "..."}` with a
/// positive denominator in lowest terms.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Rat(pub BigRational);

impl Rat {
    pub fn new(num: i64, den: i64) -> Rat {
        Rat(BigRational::new(BigInt::from(num), BigInt::from(den)))
    }

    pub fn int(n: i64) -> Rat {
        Rat(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn zero() -> Rat {
        Rat(BigRational::zero())
    }

    pub fn one() -> Rat {
        Rat(BigRational::one())
    }

    /// Exact conversion; every finite double is a dyadic rational.
    pub fn from_f64(x: f64) -> Option<Rat> {
        BigRational::from_float(x).map(Rat)
    }

    /// Nearest double.
    pub fn to_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or_else(|| {
            if self.0.is_negative() {
                f64::NEG_INFINITY
            } else {
                f64::INFINITY
            }
        })
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    pub fn is_positive(&self) -> bool {
        self.0.is_positive()
    }

    pub fn numer(&self) -> &BigInt {
        self.0.numer()
    }

    pub fn denom(&self) -> &BigInt {
        self.0.denom()
    }
}

impl From<BigRational> for Rat {
    fn from(q: BigRational) -> Rat {
        Rat(q)
    }
}

impl From<i64> for Rat {
    fn from(n: i64) -> Rat {
        Rat::int(n)
    }
}

impl fmt::Debug for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.denom().is_one() {
            write!(f, "{}", self.0.numer())
        } else {
            write!(f, "{}/{}", self.0.numer(), self.0.denom())
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("invalid rational `{0}`")]
pub struct ParseRatError(String);

impl FromStr for Rat {
    type Err = ParseRatError;

    fn from_str(s: &str) -> Result<Rat, ParseRatError> {
        let bad = || ParseRatError(s.to_string());
        let t = s.trim();
        match t.split_once('/') {
            Some((n, d)) => {
                let n = BigInt::from_str(n.trim()).map_err(|_| bad())?;
                let d = BigInt::from_str(d.trim()).map_err(|_| bad())?;
                if d.is_zero() {
                    return Err(bad());
                }
                Ok(Rat(BigRational::new(n, d)))
            }
            None => {
                if let Ok(n) = BigInt::from_str(t) {
                    return Ok(Rat(BigRational::from_integer(n)));
                }
                // decimal literal, read exactly
                let (mant, exp) = match t.find(['e', 'E']) {
                    Some(i) => (&t[..i], t[i + 1..].parse::<i32>().map_err(|_| bad())?),
                    None => (t, 0),
                };
                let (ip, fp) = mant.split_once('.').ok_or_else(bad)?;
                let digits = format!("{}{}", ip, fp);
                let n = BigInt::from_str(&digits).map_err(|_| bad())?;
                let scale = exp - fp.len() as i32;
                let ten = BigInt::from(10);
                let q = if scale >= 0 {
                    BigRational::from_integer(n * num_traits::pow(ten, scale as usize))
                } else {
                    BigRational::new(n, num_traits::pow(ten, (-scale) as usize))
                };
                Ok(Rat(q))
            }
        }
    }
}

impl Serialize for Rat {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Rat", 2)?;
        st.serialize_field("num", &self.0.numer().to_string())?;
        st.serialize_field("den", &self.0.denom().to_string())?;
        st.end()
    }
}

struct RatVisitor;

impl<'de> Visitor<'de> for RatVisitor {
    type Value = Rat;

    fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
        f.write_str("a rational: {num, den} strings, \"p/q\", or a number")
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<Rat, E> {
        Ok(Rat::int(v))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<Rat, E> {
        Ok(Rat(BigRational::from_integer(BigInt::from(v))))
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<Rat, E> {
        Rat::from_f64(v).ok_or_else(|| E::custom("non-finite number"))
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<Rat, E> {
        Rat::from_str(v).map_err(E::custom)
    }

    fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<Rat, A::Error> {
        let mut num: Option<String> = None;
        let mut den: Option<String> = None;
        while let Some(key) = map.next_key::<String>()? {
            match key.as_str() {
                "num" => num = Some(map.next_value()?),
                "den" => den = Some(map.next_value()?),
                other => return Err(de::Error::unknown_field(other, &["num", "den"])),
            }
        }
        let num = num.ok_or_else(|| de::Error::missing_field("num"))?;
        let den = den.ok_or_else(|| de::Error::missing_field("den"))?;
        let n = BigInt::from_str(num.trim()).map_err(|_| de::Error::custom("bad numerator"))?;
        let d = BigInt::from_str(den.trim()).map_err(|_| de::Error::custom("bad denominator"))?;
        if d.is_zero() {
            return Err(de::Error::custom("zero denominator"));
        }
        Ok(Rat(BigRational::new(n, d)))
    }
}

impl<'de> Deserialize<'de> for Rat {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Rat, D::Error> {
        d.deserialize_any(RatVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_forms() {
        let r: Rat = serde_json::from_str(r#"{"num":"-6","den":"4"}"#).unwrap();
        assert_eq!(r, Rat::new(-3, 2));
        assert_eq!(serde_json::to_string(&r).unwrap(), r#"{"num":"-3","den":"2"}"#);
        let r: Rat = serde_json::from_str(r#""1/3""#).unwrap();
        assert_eq!(r, Rat::new(1, 3));
        let r: Rat = serde_json::from_str("0.25").unwrap();
        assert_eq!(r, Rat::new(1, 4));
        let r: Rat = serde_json::from_str(r#""1.5e-2""#).unwrap();
        assert_eq!(r, Rat::new(3, 200));
        assert!(serde_json::from_str::<Rat>(r#"{"num":"1","den":"0"}"#).is_err());
        assert!(serde_json::from_str::<Rat>(r#"{"num":"1","den":"2","x":1}"#).is_err());
    }

    #[test]
    fn f64_round_trip_is_exact() {
        for x in [0.1, -3.75e-200, 1e300, 123456.789] {
            assert_eq!(Rat::from_f64(x).unwrap().to_f64(), x);
        }
    }
}
