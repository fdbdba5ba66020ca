//! Model files.
//!
//! Layout, little endian:
//!
//! ```text
//! magic    8 bytes  "TBRFMODL"
//! version  u32
//! scalar   u8       4 (f32) or 8 (f64)
//! length   u64      payload bytes
//! payload           bincode-encoded forest
//! crc32    u32      over the payload
//! ```
//!
//! Partitions are stored as their split sequences and replayed on load.
//! Floats are stored bit for bit.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::forest::Forest;
use crate::scalar::{Scalar, ScalarKind};

pub const MAGIC: &[u8; 8] = b"TBRFMODL";
pub const FORMAT_VERSION: u32 = 1;
const HEADER_LEN: usize = 8 + 4 + 1 + 8;

/// Scalar type of a serialized model, read from its header.
pub fn peek_scalar_kind(bytes: &[u8]) -> Result<ScalarKind> {
    let header = parse_header(bytes)?;
    Ok(header.kind)
}

struct Header {
    kind: ScalarKind,
    length: usize,
}

fn parse_header(bytes: &[u8]) -> Result<Header> {
    if bytes.is_empty() {
        return Err(Error::Corrupt("model file is empty".into()));
    }
    if bytes.len() < HEADER_LEN {
        return Err(Error::Corrupt("model file is truncated".into()));
    }
    if &bytes[..8] != MAGIC {
        return Err(Error::Corrupt("not a model file".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            found: version,
            expected: FORMAT_VERSION,
        });
    }
    let kind = ScalarKind::from_tag(bytes[12])
        .ok_or_else(|| Error::Corrupt(format!("unknown scalar tag {}", bytes[12])))?;
    let length = u64::from_le_bytes(bytes[13..21].try_into().unwrap());
    let length =
        usize::try_from(length).map_err(|_| Error::Corrupt("payload length overflows".into()))?;
    if bytes.len() != HEADER_LEN + length + 4 {
        return Err(Error::Corrupt(format!(
            "expected {} bytes, found {}",
            HEADER_LEN + length + 4,
            bytes.len()
        )));
    }
    Ok(Header { kind, length })
}

pub fn to_bytes<T: Scalar>(forest: &Forest<T>) -> Result<Vec<u8>> {
    let payload = bincode::serialize(forest)
        .map_err(|e| Error::Corrupt(format!("cannot encode model: {e}")))?;
    let mut out = Vec::with_capacity(HEADER_LEN + payload.len() + 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&forest.format_version.to_le_bytes());
    out.push(T::KIND.tag());
    out.extend_from_slice(&(payload.len() as u64).to_le_bytes());
    out.extend_from_slice(&payload);
    out.extend_from_slice(&crc32fast::hash(&payload).to_le_bytes());
    Ok(out)
}

pub fn from_bytes<T: Scalar>(bytes: &[u8]) -> Result<Forest<T>> {
    let header = parse_header(bytes)?;
    if header.kind != T::KIND {
        return Err(Error::invalid(format!(
            "model stores {} values, requested {}",
            header.kind,
            T::KIND
        )));
    }
    let payload = &bytes[HEADER_LEN..HEADER_LEN + header.length];
    let stored = u32::from_le_bytes(bytes[HEADER_LEN + header.length..].try_into().unwrap());
    let computed = crc32fast::hash(payload);
    if stored != computed {
        return Err(Error::Checksum { stored, computed });
    }
    let forest: Forest<T> = bincode::deserialize(payload)
        .map_err(|e| Error::Corrupt(format!("cannot decode model: {e}")))?;
    if forest.parents.len() != forest.params.trees || forest.meta.lower.len() != forest.meta.d {
        return Err(Error::Corrupt("model contents are inconsistent".into()));
    }
    Ok(forest)
}

pub fn save<T: Scalar>(forest: &Forest<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, to_bytes(forest)?).map_err(|e| Error::io(path, e))
}

pub fn load<T: Scalar>(path: impl AsRef<Path>) -> Result<Forest<T>> {
    let path = path.as_ref();
    from_bytes(&fs::read(path).map_err(|e| Error::io(path, e))?)
}

/// Plain `key=value` description of a model: format, training summary and
/// hyperparameters, plus any `extra` entries (e.g. training MSE).
pub fn metadata<T: Scalar>(forest: &Forest<T>, extra: &[(&str, String)]) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "format_version = {}", forest.format_version);
    let _ = writeln!(s, "scalar = {}", T::KIND);
    let _ = writeln!(s, "n = {}", forest.meta.n);
    let _ = writeln!(s, "d = {}", forest.meta.d);
    let _ = writeln!(s, "target_bound_value = {}", forest.meta.target_bound);
    let _ = writeln!(s, "global_mean = {}", forest.meta.global_mean);
    for (k, v) in extra {
        let _ = writeln!(s, "{k} = {v}");
    }
    s.push_str(&forest.params.to_config_string());
    s
}

pub fn save_metadata<T: Scalar>(
    forest: &Forest<T>,
    extra: &[(&str, String)],
    path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, metadata(forest, extra)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{Dataset, HyperParams};

    fn forest() -> Forest<f64> {
        let xs: Vec<f64> = (0..100).map(|i| i as f64 / 10.0).collect();
        let ys = xs.iter().map(|x| x.sin()).collect();
        let data = Dataset::new(xs, ys, 1).unwrap();
        let params = HyperParams {
            trees: 2,
            cells: 3,
            candidates: 2,
            ..HyperParams::default()
        };
        Forest::train(&data, &params).unwrap()
    }

    #[test]
    fn round_trip_is_exact() {
        let f = forest();
        let g: Forest<f64> = from_bytes(&to_bytes(&f).unwrap()).unwrap();
        assert_eq!(f, g);
        assert_eq!(
            peek_scalar_kind(&to_bytes(&f).unwrap()).unwrap(),
            ScalarKind::F64
        );
    }

    #[test]
    fn corrupt_inputs() {
        let bytes = to_bytes(&forest()).unwrap();
        assert!(matches!(from_bytes::<f64>(&[]), Err(Error::Corrupt(_))));
        assert!(matches!(
            from_bytes::<f64>(&bytes[..bytes.len() - 1]),
            Err(Error::Corrupt(_))
        ));
        let mut flipped = bytes.clone();
        flipped[HEADER_LEN + 5] ^= 0x40;
        assert!(matches!(
            from_bytes::<f64>(&flipped),
            Err(Error::Checksum { .. })
        ));
        let mut newer = bytes.clone();
        newer[8..12].copy_from_slice(&(FORMAT_VERSION + 1).to_le_bytes());
        let err = from_bytes::<f64>(&newer).unwrap_err();
        let msg = err.to_string();
        assert!(
            msg.contains(&FORMAT_VERSION.to_string())
                && msg.contains(&(FORMAT_VERSION + 1).to_string())
        );
        assert!(from_bytes::<f32>(&bytes).is_err());
    }

    #[test]
    fn metadata_lists_params() {
        let text = metadata(&forest(), &[("train_mse", "0.1".into())]);
        assert!(text.contains("trees = 2"));
        assert!(text.contains("train_mse = 0.1"));
        assert!(text.contains("d = 1"));
    }
}
