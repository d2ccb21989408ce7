//! Versioned JSON-lines records.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::{Error, Result};

pub const SCHEMA: &str = "sodm/1";

/// One JSON object on a single line, tagged with `schema` and `kind`.
pub fn json_line<T: Serialize>(kind: &str, value: &T) -> Result<String> {
    let mut map = Map::new();
    map.insert("schema".into(), Value::from(SCHEMA));
    map.insert("kind".into(), Value::from(kind));
    match serde_json::to_value(value)? {
        Value::Object(fields) => map.extend(fields),
        other => {
            map.insert("value".into(), other);
        }
    }
    Ok(serde_json::to_string(&Value::Object(map))?)
}

/// Writes `lines` to `path`, one per line.
pub fn write_lines(path: impl AsRef<Path>, lines: &[String]) -> Result<()> {
    let path = path.as_ref();
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for line in lines {
        writeln!(file, "{line}").map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

/// Serde adapter storing a `Duration` as fractional seconds.
pub mod duration_secs {
    use std::time::Duration;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(d: &Duration, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(d.as_secs_f64())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Duration, D::Error> {
        let secs = f64::deserialize(d)?;
        Duration::try_from_secs_f64(secs).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Serialize)]
    struct Rec {
        epoch: usize,
    }

    #[test]
    fn lines_are_tagged() {
        let line = json_line("epoch", &Rec { epoch: 3 }).unwrap();
        let v: Value = serde_json::from_str(&line).unwrap();
        assert_eq!(v["schema"], "sodm/1");
        assert_eq!(v["kind"], "epoch");
        assert_eq!(v["epoch"], 3);
        assert!(!line.contains('\n'));
        let scalar: Value = serde_json::from_str(&json_line("n", &5).unwrap()).unwrap();
        assert_eq!(scalar["value"], 5);
    }
}
