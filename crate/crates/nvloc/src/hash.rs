//! Content hashes recorded in every output file.

use nvloc_core::nv::{FieldConfig, SensorConfig};
use nvloc_core::positioning::LibrarySpec;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::config::Resolved;

/// SHA-256 of the canonical JSON encoding, lowercase hex.
pub fn sha256_json<T: Serialize>(value: &T) -> String {
    let bytes = serde_json::to_vec(value).expect("config types serialise");
    let digest = Sha256::digest(&bytes);
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Hash of every physics parameter of a run (output paths and thread
/// counts excluded).
pub fn config_hash(r: &Resolved) -> String {
    sha256_json(r)
}

/// What a measured curve and a library must agree on to be comparable:
/// control sequence, field, the sensor's spin parameters and the target's
/// gyromagnetic ratio. Sensor position and id are deliberately absent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlSpec {
    pub pulses: usize,
    pub field: FieldConfig,
    pub strain: f64,
    pub axis: nvloc_core::Vec3,
    pub gamma: f64,
    pub zero_field_splitting: f64,
    pub target_gamma: f64,
}

impl ControlSpec {
    pub fn new(pulses: usize, field: FieldConfig, sensor: &SensorConfig, target_gamma: f64) -> Self {
        Self {
            pulses,
            field,
            strain: sensor.strain,
            axis: sensor.axis,
            gamma: sensor.gamma,
            zero_field_splitting: sensor.zero_field_splitting,
            target_gamma,
        }
    }

    pub fn of_library(spec: &LibrarySpec) -> Self {
        Self::new(spec.pulses, spec.field, &spec.sensor, spec.target_gamma)
    }

    pub fn hash(&self) -> String {
        sha256_json(self)
    }

    /// Field-by-field differences, `key: ours vs theirs`.
    pub fn diff(&self, other: &ControlSpec) -> Vec<String> {
        let a = serde_json::to_value(self).expect("serialise");
        let b = serde_json::to_value(other).expect("serialise");
        let mut out = Vec::new();
        diff_values("", &a, &b, &mut out);
        out
    }
}

fn diff_values(path: &str, a: &Value, b: &Value, out: &mut Vec<String>) {
    match (a, b) {
        (Value::Object(x), Value::Object(y)) => {
            for (k, va) in x {
                let p = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                match y.get(k) {
                    Some(vb) => diff_values(&p, va, vb, out),
                    None => out.push(format!("{p}: {va} vs (missing)")),
                }
            }
        }
        _ if a != b => out.push(format!("{path}: {a} vs {b}")),
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nvloc_core::Vec3;

    #[test]
    fn hash_is_stable_and_sensitive() {
        let s = SensorConfig::new("A", Vec3::ZERO, 3.0);
        let f = FieldConfig::along_111(0.1);
        let a = ControlSpec::new(30, f, &s, -17.59);
        assert_eq!(a.hash(), a.clone().hash());
        assert_eq!(a.hash().len(), 64);
        let mut moved = s.clone();
        moved.position = Vec3::new(1.0, 2.0, 3.0);
        moved.id = "Z".into();
        assert_eq!(ControlSpec::new(30, f, &moved, -17.59).hash(), a.hash());
        let b = ControlSpec::new(100, f, &s, -17.59);
        assert_ne!(a.hash(), b.hash());
        assert_eq!(a.diff(&b), ["pulses: 30 vs 100"]);
    }
}
