//! Named default parameter sets.

use std::collections::BTreeMap;
use std::sync::OnceLock;

use serde::Deserialize;

use crate::cascade::CascadeParams;

const DEFAULT_CASCADE_SET: &str = include_str!("../params/cascade_default.json");

/// Monte Carlo medians of the GPCR activation rate (µM/s).
pub const SWEEP_K1_MEDIANS: [f64; 5] = [1.82, 2.25, 2.68, 3.10, 3.67];

/// Endpoint activation rates used for the headline single-run figures (µM/s).
pub const ENDPOINT_K1: [f64; 2] = [1.52, 3.82];

/// Alternative activation-rate range quoted alongside the sweep (µM/s).
pub const ALT_K1_RANGE: [f64; 2] = [1.8, 3.7];

/// Activation rates used for the calcium/voltage trace comparison (µM/s).
pub const TRACE_K1: [f64; 2] = [1.50, 3.82];

#[derive(Debug, Clone, Deserialize)]
pub struct ParameterSet {
    pub name: String,
    pub version: u32,
    pub values: CascadeParams<f64>,
    pub provenance: BTreeMap<String, String>,
}

/// The versioned cascade set shipped with the crate.
pub fn default_cascade_set() -> ParameterSet {
    serde_json::from_str(DEFAULT_CASCADE_SET).expect("bundled cascade parameter set parses")
}

pub fn default_cascade_params() -> CascadeParams<f64> {
    static VALUES: OnceLock<CascadeParams<f64>> = OnceLock::new();
    *VALUES.get_or_init(|| default_cascade_set().values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_set_is_valid_and_documented() {
        let set = default_cascade_set();
        set.values.validate().unwrap();
        for k in 2..=17 {
            assert!(
                set.provenance.keys().any(|key| key.starts_with(&format!("k{k}_"))),
                "missing provenance for k{k}"
            );
        }
    }
}
