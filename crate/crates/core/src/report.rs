//! Serialization helpers shared by the JSON outputs.
//!
//! Every real is written with 17 significant digits in exponent form, so that
//! reports are bit-exact round trips and byte-identical across runs.

use serde::Serialize;

/// `format!("{:.16e}")`, or `null` for non-finite values.
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        "null".to_string()
    }
}

fn raw(x: f64) -> Box<serde_json::value::RawValue> {
    serde_json::value::RawValue::from_string(fmt17(x)).expect("formatted float is valid JSON")
}

/// `#[serde(with = "real17")]` for `f64` fields.
pub mod real17 {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        super::raw(*x).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

/// `#[serde(with = "real17_opt")]` for `Option<f64>` fields.
pub mod real17_opt {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(x: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        x.map(super::raw).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        Option::<f64>::deserialize(d)
    }
}

/// `#[serde(with = "real17_pair")]` for `(f64, f64)` fields.
pub mod real17_pair {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(x: &(f64, f64), s: S) -> Result<S::Ok, S::Error> {
        [super::raw(x.0), super::raw(x.1)].serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<(f64, f64), D::Error> {
        let [a, b] = <[Option<f64>; 2]>::deserialize(d)?;
        Ok((a.unwrap_or(f64::NAN), b.unwrap_or(f64::NAN)))
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("report types always serialize");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde::Deserialize;

    #[derive(Serialize, Deserialize, Debug, PartialEq)]
    struct Probe {
        #[serde(with = "real17")]
        x: f64,
        #[serde(with = "real17_opt")]
        y: Option<f64>,
        #[serde(with = "real17_pair")]
        z: (f64, f64),
    }

    #[test]
    fn seventeen_digits_and_round_trip() {
        let p = Probe { x: 0.1, y: Some(-1e-300), z: (2.0, 1.0 / 3.0) };
        let text = serde_json::to_string(&p).unwrap();
        assert_eq!(
            text,
            r#"{"x":1.0000000000000001e-1,"y":-1.0000000000000000e-300,"z":[2.0000000000000000e0,3.3333333333333331e-1]}"#
        );
        let back: Probe = serde_json::from_str(&text).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn non_finite_becomes_null() {
        let p = Probe { x: f64::INFINITY, y: None, z: (f64::NAN, 0.0) };
        let text = serde_json::to_string(&p).unwrap();
        assert!(text.starts_with(r#"{"x":null,"y":null,"z":[null,"#));
        let back: Probe = serde_json::from_str(&text).unwrap();
        assert!(back.x.is_nan());
    }
}
