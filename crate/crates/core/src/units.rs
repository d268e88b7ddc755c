//! Unit conversions and parsing of unit-suffixed quantities such as
//! `"380 mJ"`, `"2.34 ms"` or `"16.69 dB"`.

use std::fmt;

use crate::error::{Error, Result};

/// Converts a power level in dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    1e-3 * 10f64.powf(dbm / 10.0)
}

/// Converts a power in watts to dBm. Non-positive powers map to `-inf`.
pub fn watts_to_dbm(watts: f64) -> f64 {
    if watts <= 0.0 {
        f64::NEG_INFINITY
    } else {
        10.0 * (watts / 1e-3).log10()
    }
}

/// Converts an attenuation in dB (`-10 log10 h`) to the linear power ratio `h`.
pub fn attenuation_db_to_ratio(db: f64) -> f64 {
    10f64.powf(-db / 10.0)
}

/// Converts a linear power ratio `h` to an attenuation in dB.
pub fn ratio_to_attenuation_db(h: f64) -> f64 {
    -10.0 * h.log10()
}

/// Physical dimension of a parsed quantity.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dimension {
    Power,
    Energy,
    Time,
    Voltage,
    Current,
    Capacitance,
    Resistance,
    Length,
    /// Attenuation given in dB; the value is already converted to a ratio.
    Attenuation,
    Dimensionless,
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Dimension::Power => "power",
            Dimension::Energy => "energy",
            Dimension::Time => "time",
            Dimension::Voltage => "voltage",
            Dimension::Current => "current",
            Dimension::Capacitance => "capacitance",
            Dimension::Resistance => "resistance",
            Dimension::Length => "length",
            Dimension::Attenuation => "attenuation",
            Dimension::Dimensionless => "dimensionless",
        };
        f.write_str(s)
    }
}

/// A value in SI base units together with its dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantity {
    pub value: f64,
    pub dimension: Dimension,
}

impl Quantity {
    /// Parses `"<number> <unit>"`. A bare number is dimensionless.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        let (number, unit) = if let Some(rest) = text.strip_prefix("inf") {
            (f64::INFINITY, rest.trim())
        } else {
            // longest numeric prefix, so exponents like "1e-3" stay intact
            let (number, split) = text
                .char_indices()
                .map(|(i, c)| i + c.len_utf8())
                .filter_map(|end| text[..end].trim().parse::<f64>().ok().map(|v| (v, end)))
                .next_back()
                .ok_or_else(|| Error::Scenario(format!("cannot parse quantity {text:?}")))?;
            (number, text[split..].trim())
        };
        let (value, dimension) = match unit {
            "" => (number, Dimension::Dimensionless),
            "W" => (number, Dimension::Power),
            "mW" => (number * 1e-3, Dimension::Power),
            "uW" | "µW" => (number * 1e-6, Dimension::Power),
            "dBm" => (dbm_to_watts(number), Dimension::Power),
            "J" => (number, Dimension::Energy),
            "mJ" => (number * 1e-3, Dimension::Energy),
            "uJ" | "µJ" => (number * 1e-6, Dimension::Energy),
            "s" => (number, Dimension::Time),
            "ms" => (number * 1e-3, Dimension::Time),
            "us" | "µs" => (number * 1e-6, Dimension::Time),
            "V" => (number, Dimension::Voltage),
            "mV" => (number * 1e-3, Dimension::Voltage),
            "A" => (number, Dimension::Current),
            "mA" => (number * 1e-3, Dimension::Current),
            "uA" | "µA" => (number * 1e-6, Dimension::Current),
            "F" => (number, Dimension::Capacitance),
            "mF" => (number * 1e-3, Dimension::Capacitance),
            "uF" | "µF" => (number * 1e-6, Dimension::Capacitance),
            "ohm" | "Ω" => (number, Dimension::Resistance),
            "kohm" | "kΩ" => (number * 1e3, Dimension::Resistance),
            "Mohm" | "MΩ" => (number * 1e6, Dimension::Resistance),
            "m" => (number, Dimension::Length),
            "cm" => (number * 1e-2, Dimension::Length),
            "dB" => (attenuation_db_to_ratio(number), Dimension::Attenuation),
            other => {
                return Err(Error::Scenario(format!(
                    "unknown unit {other:?} in {text:?}"
                )))
            }
        };
        Ok(Quantity { value, dimension })
    }

    /// Returns the SI value if the dimension matches. Bare numbers are
    /// accepted for any dimension and read as SI.
    pub fn expect(self, dimension: Dimension) -> Result<f64> {
        if self.dimension == dimension || self.dimension == Dimension::Dimensionless {
            Ok(self.value)
        } else {
            Err(Error::Scenario(format!(
                "expected a {dimension} quantity, found {}",
                self.dimension
            )))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dbm_round_trip() {
        assert!((dbm_to_watts(10.0) - 0.01).abs() < 1e-15);
        assert!((watts_to_dbm(0.02) - 13.010299956639813).abs() < 1e-12);
        assert_eq!(watts_to_dbm(0.0), f64::NEG_INFINITY);
    }

    #[test]
    fn attenuation_conversion() {
        assert!((attenuation_db_to_ratio(20.0) - 0.01).abs() < 1e-15);
        assert!((ratio_to_attenuation_db(0.01) - 20.0).abs() < 1e-12);
    }

    #[test]
    fn parses_suffixed_quantities() {
        let q = Quantity::parse("380 mJ").unwrap();
        assert_eq!(q.dimension, Dimension::Energy);
        assert!((q.value - 0.38).abs() < 1e-15);
        assert!((Quantity::parse("2.34ms").unwrap().value - 2.34e-3).abs() < 1e-18);
        assert!((Quantity::parse("196 kohm").unwrap().value - 196e3).abs() < 1e-9);
        assert_eq!(Quantity::parse("inf ohm").unwrap().value, f64::INFINITY);
        assert!((Quantity::parse("1e-3 mW").unwrap().value - 1e-6).abs() < 1e-21);
        assert!((Quantity::parse("6 dBm").unwrap().value - 3.981071705534972e-3).abs() < 1e-15);
        assert_eq!(Quantity::parse("0.1").unwrap().dimension, Dimension::Dimensionless);
    }

    #[test]
    fn rejects_wrong_dimension_and_unknown_units() {
        assert!(Quantity::parse("3 parsecs").is_err());
        assert!(Quantity::parse("3 V").unwrap().expect(Dimension::Energy).is_err());
        assert!(Quantity::parse("abc mW").is_err());
    }
}
