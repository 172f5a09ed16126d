//! Single-file checkpoint container.
//!
//! ```text
//! btnn-checkpoint
//! format_version: 1
//! precision: f32
//! gate_order: f,i,c,o
//! architecture: {"kind":"bt-mlp",...}
//! seed: 7
//! step: 120
//! rng: {"state":...,"increment":...}
//! arrays: 14
//! array param.bt.core0 shape=2,2,2,2 offset=0 count=16
//! ...
//! end
//! <little-endian payload, arrays back to back in manifest order>
//! ```
//!
//! Arrays are the network parameters (`param.`), non-learned buffers
//! (`buffer.`) and momentum buffers (`velocity.`), in that order.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::{Architecture, Parameters, TrainState, GATE_ORDER};
use crate::rng::Pcg32;
use crate::scalar::{Precision, Scalar};
use crate::tensor::DenseTensor;

pub const CHECKPOINT_MAGIC: &str = "btnn-checkpoint";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    name: String,
    dims: Vec<usize>,
    offset: usize,
    count: usize,
}

/// Parsed header block.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckpointHeader {
    pub version: u32,
    pub precision: Precision,
    pub architecture: Architecture,
    pub seed: u64,
    pub step: u64,
    rng: Pcg32,
    entries: Vec<Entry>,
}

fn named_arrays<T: Scalar>(state: &TrainState<T>) -> Vec<(String, &DenseTensor<T>)> {
    let mut out: Vec<(String, &DenseTensor<T>)> = state
        .network
        .tensor_names()
        .into_iter()
        .map(|n| format!("param.{n}"))
        .zip(state.network.tensors())
        .collect();
    out.extend(
        state
            .network
            .buffers()
            .into_iter()
            .map(|(n, t)| (format!("buffer.{n}"), t)),
    );
    out.extend(
        state
            .network
            .tensor_names()
            .into_iter()
            .map(|n| format!("velocity.{n}"))
            .zip(state.velocity.iter()),
    );
    out
}

/// Serializes a training state into the container format.
pub fn encode_checkpoint<T: Scalar>(state: &TrainState<T>) -> Result<Vec<u8>> {
    let arch = serde_json::to_string(&state.network.architecture())
        .map_err(|e| Error::State(format!("architecture encoding: {e}")))?;
    let rng = serde_json::to_string(&state.rng).map_err(|e| Error::State(format!("rng encoding: {e}")))?;
    let arrays = named_arrays(state);
    let width = T::PRECISION.byte_width();

    let mut header = String::new();
    header.push_str(CHECKPOINT_MAGIC);
    header.push('\n');
    header.push_str(&format!("format_version: {FORMAT_VERSION}\n"));
    header.push_str(&format!("precision: {}\n", T::PRECISION));
    header.push_str(&format!("gate_order: {GATE_ORDER}\n"));
    header.push_str(&format!("architecture: {arch}\n"));
    header.push_str(&format!("seed: {}\n", state.seed));
    header.push_str(&format!("step: {}\n", state.step));
    header.push_str(&format!("rng: {rng}\n"));
    header.push_str(&format!("arrays: {}\n", arrays.len()));
    let mut offset = 0;
    for (name, t) in &arrays {
        let dims: Vec<String> = t.dims().iter().map(|d| d.to_string()).collect();
        header.push_str(&format!(
            "array {name} shape={} offset={offset} count={}\n",
            dims.join(","),
            t.len()
        ));
        offset += t.len() * width;
    }
    header.push_str("end\n");

    let mut out = header.into_bytes();
    out.reserve(offset);
    for (_, t) in &arrays {
        for &v in t.data() {
            v.write_le(&mut out);
        }
    }
    Ok(out)
}

/// Writes via a temporary file in the same directory, then renames.
pub fn save_checkpoint<T: Scalar>(path: impl AsRef<Path>, state: &TrainState<T>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_checkpoint(state)?;
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::arg(format!("checkpoint path {} has no file name", path.display())))?;
    let tmp = path.with_file_name(format!(".{}.tmp", file_name.to_string_lossy()));
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| Error::io(path, e))
}

fn corrupt(msg: impl Into<String>) -> Error {
    Error::Corruption(msg.into())
}

fn field<'a>(line: Option<&'a str>, key: &str) -> Result<&'a str> {
    let line = line.ok_or_else(|| corrupt(format!("header ends before '{key}'")))?;
    line.strip_prefix(key)
        .and_then(|rest| rest.strip_prefix(": "))
        .ok_or_else(|| corrupt(format!("expected '{key}: ...', found '{line}'")))
}

fn parse_num<N: std::str::FromStr>(s: &str, what: &str) -> Result<N> {
    s.parse().map_err(|_| corrupt(format!("bad {what} '{s}'")))
}

fn parse_entry(line: &str) -> Result<Entry> {
    let mut parts = line.split(' ');
    if parts.next() != Some("array") {
        return Err(corrupt(format!("expected array entry, found '{line}'")));
    }
    let name = parts.next().ok_or_else(|| corrupt("array entry without name"))?;
    let mut kv = |key: &str| -> Result<&str> {
        parts
            .next()
            .and_then(|p| p.strip_prefix(key))
            .and_then(|p| p.strip_prefix('='))
            .ok_or_else(|| corrupt(format!("array {name}: missing {key}")))
    };
    let dims = kv("shape")?
        .split(',')
        .map(|d| parse_num(d, "dimension"))
        .collect::<Result<Vec<usize>>>()?;
    let offset = parse_num(kv("offset")?, "offset")?;
    let count = parse_num(kv("count")?, "count")?;
    Ok(Entry {
        name: name.to_string(),
        dims,
        offset,
        count,
    })
}

/// Splits `bytes` into the parsed header and the payload.
pub fn decode_header(bytes: &[u8]) -> Result<(CheckpointHeader, &[u8])> {
    const END: &[u8] = b"\nend\n";
    let end = bytes
        .windows(END.len())
        .position(|w| w == END)
        .ok_or_else(|| corrupt("header terminator not found"))?;
    let text = std::str::from_utf8(&bytes[..end]).map_err(|_| corrupt("header is not UTF-8"))?;
    let payload = &bytes[end + END.len()..];
    let mut lines = text.lines();
    if lines.next() != Some(CHECKPOINT_MAGIC) {
        return Err(corrupt("missing checkpoint magic line"));
    }
    let version: u32 = parse_num(field(lines.next(), "format_version")?, "format version")?;
    if version != FORMAT_VERSION {
        return Err(Error::Version {
            expected: FORMAT_VERSION,
            found: version,
        });
    }
    let precision: Precision = field(lines.next(), "precision")?.parse().map_err(corrupt)?;
    let gates = field(lines.next(), "gate_order")?;
    if gates != GATE_ORDER {
        return Err(corrupt(format!("unsupported gate order '{gates}'")));
    }
    let architecture: Architecture = serde_json::from_str(field(lines.next(), "architecture")?)
        .map_err(|e| corrupt(format!("architecture: {e}")))?;
    let seed = parse_num(field(lines.next(), "seed")?, "seed")?;
    let step = parse_num(field(lines.next(), "step")?, "step")?;
    let rng: Pcg32 =
        serde_json::from_str(field(lines.next(), "rng")?).map_err(|e| corrupt(format!("rng state: {e}")))?;
    let n: usize = parse_num(field(lines.next(), "arrays")?, "array count")?;
    let entries = (0..n)
        .map(|_| parse_entry(lines.next().ok_or_else(|| corrupt("manifest shorter than declared"))?))
        .collect::<Result<Vec<_>>>()?;
    if let Some(extra) = lines.next() {
        return Err(corrupt(format!("unexpected header line '{extra}'")));
    }
    Ok((
        CheckpointHeader {
            version,
            precision,
            architecture,
            seed,
            step,
            rng,
            entries,
        },
        payload,
    ))
}

pub fn read_checkpoint_header(path: impl AsRef<Path>) -> Result<CheckpointHeader> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(decode_header(&bytes)?.0)
}

pub fn decode_checkpoint<T: Scalar>(bytes: &[u8]) -> Result<TrainState<T>> {
    let (header, payload) = decode_header(bytes)?;
    if header.precision != T::PRECISION {
        return Err(Error::arg(format!(
            "checkpoint stores {} values, {} requested",
            header.precision,
            T::PRECISION
        )));
    }
    let width = T::PRECISION.byte_width();
    let mut expected_offset = 0;
    for e in &header.entries {
        if e.offset != expected_offset || e.dims.iter().product::<usize>() != e.count {
            return Err(corrupt(format!("array {} has an inconsistent manifest entry", e.name)));
        }
        expected_offset += e.count * width;
    }
    if payload.len() != expected_offset {
        return Err(corrupt(format!(
            "manifest describes {expected_offset} payload bytes, file has {}",
            payload.len()
        )));
    }

    // initial values are overwritten array by array below
    let mut state = TrainState::<T>::new(&header.architecture, 0)?;
    state.rng = header.rng.clone();
    state.seed = header.seed;
    state.step = header.step;

    let names: Vec<String> = {
        let arrays = named_arrays(&state);
        arrays.into_iter().map(|(n, _)| n).collect()
    };
    if names.len() != header.entries.len() {
        return Err(corrupt(format!(
            "architecture has {} arrays, manifest lists {}",
            names.len(),
            header.entries.len()
        )));
    }
    let mut targets = state.network.tensors_and_buffers_mut();
    targets.extend(state.velocity.iter_mut());
    for ((entry, name), target) in header.entries.iter().zip(&names).zip(targets.iter_mut()) {
        if &entry.name != name || entry.dims != target.dims() {
            return Err(corrupt(format!(
                "manifest entry {} {:?} does not match architecture array {name} {:?}",
                entry.name,
                entry.dims,
                target.dims()
            )));
        }
        let bytes = &payload[entry.offset..entry.offset + entry.count * width];
        for (dst, chunk) in target.data_mut().iter_mut().zip(bytes.chunks_exact(width)) {
            *dst = T::read_le(chunk);
        }
        target.ensure_finite("checkpoint load")?;
    }
    Ok(state)
}

pub fn load_checkpoint<T: Scalar>(path: impl AsRef<Path>) -> Result<TrainState<T>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes)
}
