//! Binary checkpoints for trained models.
//!
//! Grammar shared by all model files: 4 magic bytes, a u32 format version,
//! a model-specific u32 header, then named tensors — each a u32 name
//! length, the UTF-8 name, a u32 rank, u32 dimensions, and the row-major
//! f32 little-endian data. Parameters are f64 in memory and f32 on disk, so
//! save → load → save reproduces the first file byte for byte.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::denoiser::mlp::{DenoiserHyper, PointMlpDenoiser};
use crate::error::{Error, Result};

/// Magic bytes of denoiser checkpoints.
pub const DENOISER_MAGIC: &[u8; 4] = b"ADNZ";
/// Current checkpoint format version.
pub const CHECKPOINT_VERSION: u32 = 1;

pub(crate) fn write_u32(w: &mut impl Write, value: u32, path: &Path) -> Result<()> {
    w.write_all(&value.to_le_bytes()).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_u32(r: &mut impl Read, path: &Path) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf).map_err(|e| Error::io(path, e))?;
    Ok(u32::from_le_bytes(buf))
}

pub(crate) fn write_magic_and_version(
    w: &mut impl Write,
    magic: &[u8; 4],
    path: &Path,
) -> Result<()> {
    w.write_all(magic).map_err(|e| Error::io(path, e))?;
    write_u32(w, CHECKPOINT_VERSION, path)
}

pub(crate) fn read_magic_and_version(
    r: &mut impl Read,
    magic: &[u8; 4],
    path: &Path,
) -> Result<u32> {
    let mut found = [0u8; 4];
    r.read_exact(&mut found).map_err(|e| Error::io(path, e))?;
    if &found != magic {
        return Err(Error::format(
            path,
            format!("bad magic {found:?}, expected {magic:?}"),
        ));
    }
    let version = read_u32(r, path)?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::format(
            path,
            format!("unsupported checkpoint version {version}, expected {CHECKPOINT_VERSION}"),
        ));
    }
    Ok(version)
}

pub(crate) fn write_tensor(
    w: &mut impl Write,
    name: &str,
    dims: &[u32],
    data: &[f64],
    path: &Path,
) -> Result<()> {
    let expected: usize = dims.iter().map(|&d| d as usize).product();
    debug_assert_eq!(data.len(), expected, "tensor {name} shape mismatch");
    write_u32(w, name.len() as u32, path)?;
    w.write_all(name.as_bytes()).map_err(|e| Error::io(path, e))?;
    write_u32(w, dims.len() as u32, path)?;
    for &d in dims {
        write_u32(w, d, path)?;
    }
    for &v in data {
        w.write_all(&(v as f32).to_le_bytes()).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

pub(crate) fn read_tensor(r: &mut impl Read, path: &Path) -> Result<(String, Vec<u32>, Vec<f64>)> {
    let name_len = read_u32(r, path)? as usize;
    if name_len > 256 {
        return Err(Error::format(path, format!("tensor name length {name_len} out of range")));
    }
    let mut name_buf = vec![0u8; name_len];
    r.read_exact(&mut name_buf).map_err(|e| Error::io(path, e))?;
    let name = String::from_utf8(name_buf)
        .map_err(|_| Error::format(path, "tensor name is not UTF-8"))?;
    let rank = read_u32(r, path)? as usize;
    if rank > 8 {
        return Err(Error::format(path, format!("tensor rank {rank} out of range")));
    }
    let mut dims = Vec::with_capacity(rank);
    for _ in 0..rank {
        dims.push(read_u32(r, path)?);
    }
    let count: usize = dims.iter().map(|&d| d as usize).product();
    let mut data = Vec::with_capacity(count);
    let mut buf = [0u8; 4];
    for _ in 0..count {
        r.read_exact(&mut buf).map_err(|e| Error::io(path, e))?;
        data.push(f32::from_le_bytes(buf) as f64);
    }
    Ok((name, dims, data))
}

/// Expected tensor names and shapes for a denoiser of the given sizes, in
/// file order, paired with their offsets into the flat parameter vector.
fn denoiser_tensors(hyper: &DenoiserHyper) -> Vec<(String, Vec<u32>, usize, usize)> {
    let h = hyper.hidden as u32;
    let e = hyper.embed as u32;
    let mut named: Vec<(String, Vec<u32>)> = vec![
        ("encode1.weight".into(), vec![h, 3]),
        ("encode1.bias".into(), vec![h]),
        ("time_proj.weight".into(), vec![h, e]),
        ("time_proj.bias".into(), vec![h]),
        ("encode2.weight".into(), vec![h, h]),
        ("encode2.bias".into(), vec![h]),
    ];
    let mut width = 2 * h;
    for layer in 1..=hyper.decoder_layers {
        named.push((format!("decode{layer}.weight"), vec![h, width]));
        named.push((format!("decode{layer}.bias"), vec![h]));
        width = h;
    }
    named.push(("decode_out.weight".into(), vec![3u32, h]));
    named.push(("decode_out.bias".into(), vec![3u32]));
    let mut offset = 0usize;
    let mut out = Vec::new();
    for (name, dims) in named {
        let len: usize = dims.iter().map(|&d| d as usize).product();
        out.push((name, dims, offset, len));
        offset += len;
    }
    out
}

/// Writes a denoiser checkpoint.
pub fn save_denoiser(net: &PointMlpDenoiser, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_magic_and_version(&mut w, DENOISER_MAGIC, path)?;
    write_u32(&mut w, net.hyper().hidden as u32, path)?;
    write_u32(&mut w, net.hyper().embed as u32, path)?;
    write_u32(&mut w, net.hyper().decoder_layers as u32, path)?;
    write_u32(&mut w, net.t_total() as u32, path)?;
    let tensors = denoiser_tensors(net.hyper());
    write_u32(&mut w, tensors.len() as u32, path)?;
    for (name, dims, offset, len) in tensors {
        write_tensor(&mut w, &name, &dims, &net.parameters()[offset..offset + len], path)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a checkpoint written by [`save_denoiser`].
pub fn load_denoiser(path: &Path) -> Result<PointMlpDenoiser> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut r = BufReader::new(file);
    read_magic_and_version(&mut r, DENOISER_MAGIC, path)?;
    let hidden = read_u32(&mut r, path)? as usize;
    let embed = read_u32(&mut r, path)? as usize;
    let decoder_layers = read_u32(&mut r, path)? as usize;
    let t_total = read_u32(&mut r, path)? as usize;
    let hyper = DenoiserHyper { hidden, embed, decoder_layers };
    let expected = denoiser_tensors(&hyper);
    let count = read_u32(&mut r, path)? as usize;
    if count != expected.len() {
        return Err(Error::format(
            path,
            format!("checkpoint has {count} tensors, expected {}", expected.len()),
        ));
    }
    let total: usize = expected.iter().map(|(_, _, _, len)| len).sum();
    let mut params = vec![0.0; total];
    for (name, dims, offset, len) in expected {
        let (found_name, found_dims, data) = read_tensor(&mut r, path)?;
        if found_name != name || found_dims != dims {
            return Err(Error::format(
                path,
                format!("tensor {found_name} {found_dims:?} where {name} {dims:?} expected"),
            ));
        }
        params[offset..offset + len].copy_from_slice(&data);
    }
    PointMlpDenoiser::from_parameters(hyper, t_total, params)
}
