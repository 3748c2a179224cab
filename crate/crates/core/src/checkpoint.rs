//! Binary checkpoints.
//!
//! Layout: `b"RSEG"`, `u32` version, `u64` header length, JSON header,
//! then little-endian `f32` blobs in header order. All integers are
//! little-endian. Adam moments, when present, follow the parameters as
//! `adam.m.<name>` / `adam.v.<name>` blobs.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::adam::{AdamConfig, AdamState, Moments};
use crate::error::{Error, Result};
use crate::tensor::Tensor4;
use crate::unet::{shape_table, Model, UNetConfig};

pub const MAGIC: &[u8; 4] = b"RSEG";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: [usize; 4],
    /// Offset in bytes from the start of the blob section.
    offset: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct AdamHeader {
    config: AdamConfig,
    t: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    config: UNetConfig,
    seed: u64,
    tensors: Vec<TensorEntry>,
    adam: Option<AdamHeader>,
}

fn write_err(path: &Path, e: impl ToString) -> Error {
    Error::WriteFailure { path: path.to_path_buf(), reason: e.to_string() }
}

/// Serializes a model and optional optimizer state to bytes.
pub fn encode_checkpoint(model: &Model<f32>, adam: Option<&AdamState<f32>>) -> Result<Vec<u8>> {
    let mut named: Vec<(String, &Tensor4<f32>)> = model.params().map(|(n, t)| (n.to_string(), t)).collect();
    if let Some(state) = adam {
        for mo in state.moments() {
            named.push((format!("adam.m.{}", mo.name), &mo.m));
            named.push((format!("adam.v.{}", mo.name), &mo.v));
        }
    }
    let mut offset = 0;
    let tensors = named
        .iter()
        .map(|(name, t)| {
            let e = TensorEntry { name: name.clone(), shape: t.shape(), offset };
            offset += t.len() * 4;
            e
        })
        .collect();
    let header = Header {
        config: model.config().clone(),
        seed: model.seed(),
        tensors,
        adam: adam.map(|s| AdamHeader { config: s.config, t: s.t }),
    };
    let json = serde_json::to_vec(&header)?;
    let mut out = Vec::with_capacity(16 + json.len() + offset);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for (_, t) in &named {
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn save_checkpoint(model: &Model<f32>, adam: Option<&AdamState<f32>>, path: &Path) -> Result<()> {
    let bytes = encode_checkpoint(model, adam)?;
    fs::write(path, bytes).map_err(|e| write_err(path, e))
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::CorruptCheckpoint(msg.into())
}

/// Parses bytes produced by [`encode_checkpoint`].
pub fn decode_checkpoint(bytes: &[u8]) -> Result<(Model<f32>, Option<AdamState<f32>>)> {
    if bytes.len() < 16 {
        return Err(corrupt(format!("{} bytes is shorter than the fixed preamble", bytes.len())));
    }
    if &bytes[..4] != MAGIC {
        return Err(corrupt("bad magic"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(corrupt(format!("unsupported version {version}")));
    }
    let hlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let hlen = usize::try_from(hlen).map_err(|_| corrupt("header length overflow"))?;
    let blob_start = 16usize.checked_add(hlen).filter(|&e| e <= bytes.len()).ok_or_else(|| corrupt("truncated header"))?;
    let header: Header =
        serde_json::from_slice(&bytes[16..blob_start]).map_err(|e| corrupt(format!("header: {e}")))?;
    let blobs = &bytes[blob_start..];

    let mut expected_offset = 0usize;
    let mut read = |e: &TensorEntry| -> Result<Tensor4<f32>> {
        let numel: usize = e.shape.iter().product();
        if e.offset != expected_offset {
            return Err(corrupt(format!("tensor {} at offset {} (expected {expected_offset})", e.name, e.offset)));
        }
        let end = e.offset + numel * 4;
        if end > blobs.len() {
            return Err(corrupt(format!("truncated data for {}", e.name)));
        }
        expected_offset = end;
        let data = blobs[e.offset..end]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        Tensor4::from_vec(e.shape, data)
    };

    let specs = shape_table(&header.config).map_err(|e| corrupt(format!("config: {e}")))?;
    if header.tensors.len() < specs.len() {
        return Err(corrupt(format!("{} tensors listed, model needs {}", header.tensors.len(), specs.len())));
    }
    let mut params = Vec::with_capacity(specs.len());
    for (spec, entry) in specs.iter().zip(&header.tensors) {
        if spec.name != entry.name {
            return Err(corrupt(format!("expected tensor {}, found {}", spec.name, entry.name)));
        }
        if spec.shape != entry.shape {
            return Err(Error::ShapeHeaderMismatch { name: spec.name.clone(), expected: spec.shape, found: entry.shape });
        }
        params.push(read(entry)?);
    }

    let rest = &header.tensors[specs.len()..];
    let adam = match &header.adam {
        None if rest.is_empty() => None,
        None => return Err(corrupt("optimizer tensors without optimizer header")),
        Some(h) => {
            if rest.len() % 2 != 0 {
                return Err(corrupt("unpaired optimizer moments"));
            }
            let mut moments = Vec::with_capacity(rest.len() / 2);
            for pair in rest.chunks_exact(2) {
                let name = pair[0]
                    .name
                    .strip_prefix("adam.m.")
                    .ok_or_else(|| corrupt(format!("unexpected tensor {}", pair[0].name)))?;
                if pair[1].name != format!("adam.v.{name}") {
                    return Err(corrupt(format!("unexpected tensor {}", pair[1].name)));
                }
                let m = read(&pair[0])?;
                let v = read(&pair[1])?;
                moments.push(Moments { name: name.to_string(), m, v });
            }
            Some(AdamState::from_parts(h.config, h.t, moments))
        }
    };
    if expected_offset != blobs.len() {
        return Err(corrupt(format!("{} trailing bytes", blobs.len() - expected_offset)));
    }
    let model = Model::from_params(header.config, header.seed, params)?;
    for (name, t) in model.params() {
        if t.ensure_finite("checkpoint").is_err() {
            return Err(corrupt(format!("non-finite values in {name}")));
        }
    }
    Ok((model, adam))
}

pub fn load_checkpoint(path: &Path) -> Result<(Model<f32>, Option<AdamState<f32>>)> {
    let bytes = fs::read(path).map_err(|e| Error::UnreadableFile { path: path.to_path_buf(), reason: e.to_string() })?;
    decode_checkpoint(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::unet::build_unet;

    fn small() -> Model<f32> {
        build_unet(&UNetConfig::reti_unet1().with_width_scale(32), 3).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let m = small();
        let (back, adam) = decode_checkpoint(&encode_checkpoint(&m, None).unwrap()).unwrap();
        assert!(adam.is_none());
        assert_eq!(back.config(), m.config());
        assert_eq!(back.seed(), 3);
        for ((_, a), (_, b)) in m.params().zip(back.params()) {
            let ab: Vec<u32> = a.data().iter().map(|v| v.to_bits()).collect();
            let bb: Vec<u32> = b.data().iter().map(|v| v.to_bits()).collect();
            assert_eq!(ab, bb);
        }
    }

    #[test]
    fn adam_state_round_trips() {
        let mut m = small();
        let mut state = AdamState::new(AdamConfig::with_lr(1e-3));
        let names: Vec<String> = m.specs().iter().map(|s| s.name.clone()).collect();
        for name in &names {
            let p = m.param_mut(name).unwrap();
            let g = Tensor4::full(p.shape(), 0.25);
            state.step([(name.as_str(), p, &g)]).unwrap();
        }
        let (back, adam) = decode_checkpoint(&encode_checkpoint(&m, Some(&state)).unwrap()).unwrap();
        assert_eq!(back, m);
        assert_eq!(adam.unwrap(), state);
    }

    #[test]
    fn corruption_is_detected() {
        let bytes = encode_checkpoint(&small(), None).unwrap();
        for cut in [0, 3, 15, 40, bytes.len() - 1] {
            assert!(matches!(decode_checkpoint(&bytes[..cut]), Err(Error::CorruptCheckpoint(_))), "cut {cut}");
        }
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(decode_checkpoint(&bad), Err(Error::CorruptCheckpoint(_))));
        let mut bad = bytes.clone();
        bad[4] = 9;
        assert!(matches!(decode_checkpoint(&bad), Err(Error::CorruptCheckpoint(_))));
        let mut long = bytes;
        long.push(0);
        assert!(matches!(decode_checkpoint(&long), Err(Error::CorruptCheckpoint(_))));
    }

    #[test]
    fn shape_header_mismatch() {
        let bytes = encode_checkpoint(&small(), None).unwrap();
        let hlen = u64::from_le_bytes(bytes[8..16].try_into().unwrap()) as usize;
        let json = std::str::from_utf8(&bytes[16..16 + hlen]).unwrap();
        // enc0.conv1.w is [2,1,3,3] at width 32
        let edited = json.replacen("[2,1,3,3]", "[1,2,3,3]", 1);
        assert_eq!(edited.len(), json.len());
        let mut out = bytes[..16].to_vec();
        out.extend_from_slice(edited.as_bytes());
        out.extend_from_slice(&bytes[16 + hlen..]);
        assert!(matches!(decode_checkpoint(&out), Err(Error::ShapeHeaderMismatch { .. })));
    }

    #[test]
    fn unwritable_path() {
        let r = save_checkpoint(&small(), None, Path::new("/nonexistent-dir/x.rseg"));
        assert!(matches!(r, Err(Error::WriteFailure { .. })));
    }
}
