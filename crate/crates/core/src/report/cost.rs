use std::fmt;

use serde::{Deserialize, Serialize, Serializer};

/// A US-dollar amount in whole cents.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Usd(pub u64);

impl fmt::Display for Usd {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "${}.{:02}", self.0 / 100, self.0 % 100)
    }
}

impl Serialize for Usd {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&format!("{}.{:02}", self.0 / 100, self.0 % 100))
    }
}

/// Per-million-token prices of one model, in USD.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostModel {
    pub name: String,
    pub input_per_million: f64,
    pub output_per_million: f64,
}

/// Micro-dollars per million tokens, the unit of exact arithmetic.
fn micro(rate: f64) -> u128 {
    (rate * 1e6).round() as u128
}

impl CostModel {
    pub fn new(name: &str, input_per_million: f64, output_per_million: f64) -> Result<CostModel, String> {
        let m = CostModel { name: name.to_string(), input_per_million, output_per_million };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), String> {
        for rate in [self.input_per_million, self.output_per_million] {
            if !(rate.is_finite() && rate > 0.0) {
                return Err(format!("cost model {}: rates must be positive", self.name));
            }
        }
        Ok(())
    }

    /// Price list used when the configuration names none.
    pub fn presets() -> Vec<CostModel> {
        vec![
            CostModel { name: "gpt-3.5-turbo".into(), input_per_million: 0.50, output_per_million: 1.50 },
            CostModel { name: "gpt-4o".into(), input_per_million: 5.00, output_per_million: 15.00 },
            CostModel { name: "llama-3-70b".into(), input_per_million: 0.59, output_per_million: 0.79 },
        ]
    }

    pub fn preset(name: &str) -> Option<CostModel> {
        Self::presets().into_iter().find(|m| m.name == name)
    }

    /// Cost of the given token counts, rounded half up to the cent.
    pub fn estimate(&self, input_tokens: u64, output_tokens: u64) -> Usd {
        // token * micro-USD per 1M tokens = 1e-12 USD; a cent is 1e10 of those
        let pico = input_tokens as u128 * micro(self.input_per_million) + output_tokens as u128 * micro(self.output_per_million);
        Usd(((pico + 5_000_000_000) / 10_000_000_000) as u64)
    }
}
