//! Checkpoint files: a UTF-8 text header followed by raw little-endian
//! f32 parameter arrays in registry order. Byte layout is documented in
//! docs/checkpoint.md.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::nn::model::Model;

const MAGIC: &str = "EQCKPT";
const VERSION: u32 = 1;

/// Writes the model parameters plus enough header to validate a reload.
/// `hyper` is a free-form single-line description stored verbatim.
pub fn save(model: &Model, hyper: &str, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "{MAGIC} {VERSION}")?;
    writeln!(w, "seed {}", model.seed)?;
    writeln!(w, "hyper {hyper}")?;
    let names = model.param_names();
    let params = model.params();
    writeln!(w, "params {}", params.len())?;
    for (name, p) in names.iter().zip(&params) {
        let dims: Vec<String> = p.shape().iter().map(|d| d.to_string()).collect();
        writeln!(w, "param {name} {}", dims.join("x"))?;
    }
    writeln!(w)?;
    for p in params {
        for &v in p.data() {
            w.write_all(&(v as f32).to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Loads parameters into a structurally matching model (same registry).
pub fn load_into(model: &mut Model, path: &Path) -> Result<String> {
    let mut r = BufReader::new(File::open(path)?);
    // read header up to the blank line, byte by byte
    let mut line = Vec::new();
    let mut hyper = String::new();
    let mut expected: Vec<(String, Vec<usize>)> = Vec::new();
    let mut seed: Option<u64> = None;
    let mut magic_seen = false;
    loop {
        let mut byte = [0u8; 1];
        r.read_exact(&mut byte)
            .map_err(|_| Error::Format("truncated checkpoint header".into()))?;
        if byte[0] != b'\n' {
            line.push(byte[0]);
            continue;
        }
        let text = String::from_utf8(line.clone())
            .map_err(|_| Error::Format("non-UTF8 checkpoint header".into()))?;
        line.clear();
        if text.is_empty() {
            break;
        }
        let mut parts = text.splitn(2, ' ');
        match parts.next() {
            Some(MAGIC) => {
                let v: u32 = parts
                    .next()
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| Error::Format("bad version line".into()))?;
                if v != VERSION {
                    return Err(Error::Format(format!("unsupported checkpoint version {v}")));
                }
                magic_seen = true;
            }
            Some("seed") => {
                seed = parts.next().and_then(|s| s.trim().parse().ok());
            }
            Some("hyper") => {
                hyper = parts.next().unwrap_or("").to_string();
            }
            Some("params") => {}
            Some("param") => {
                let rest = parts.next().unwrap_or("");
                let mut it = rest.split(' ');
                let name = it.next().unwrap_or("").to_string();
                let dims: Vec<usize> = it
                    .next()
                    .unwrap_or("")
                    .split('x')
                    .filter_map(|d| d.parse().ok())
                    .collect();
                expected.push((name, dims));
            }
            _ => return Err(Error::Format(format!("unknown header line: {text}"))),
        }
    }
    if !magic_seen {
        return Err(Error::Format("missing checkpoint magic".into()));
    }
    let names = model.param_names();
    {
        let params = model.params();
        if expected.len() != params.len() {
            return Err(Error::Parameter(format!(
                "checkpoint has {} params, model has {}",
                expected.len(),
                params.len()
            )));
        }
        for ((name, dims), (mname, p)) in expected.iter().zip(names.iter().zip(&params)) {
            if name != mname || dims != p.shape() {
                return Err(Error::Parameter(format!(
                    "registry mismatch: checkpoint {name} {dims:?}, model {mname} {:?}",
                    p.shape()
                )));
            }
        }
    }
    if let Some(s) = seed {
        model.seed = s;
    }
    for p in model.params_mut() {
        let mut buf = vec![0u8; p.len() * 4];
        r.read_exact(&mut buf)
            .map_err(|_| Error::Format("truncated checkpoint data".into()))?;
        for (i, chunk) in buf.chunks_exact(4).enumerate() {
            p.data_mut()[i] = f32::from_le_bytes(chunk.try_into().unwrap()) as f64;
        }
    }
    Ok(hyper)
}

/// Round-trips the model through checkpoint precision (f32), so that a
/// freshly saved and reloaded model computes identically.
pub fn quantize_params(model: &mut Model) {
    for p in model.params_mut() {
        for v in p.data_mut() {
            *v = *v as f32 as f64;
        }
    }
}
