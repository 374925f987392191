//! Point cloud file formats.
//!
//! Two interchangeable on-disk representations:
//!
//! * `xyz` text — one point per line, three decimal floats separated by
//!   single spaces, LF line endings, optional leading comment lines starting
//!   with `#`. Written with 6 fractional digits, so round-trips are exact to
//!   1e-6 absolute.
//! * `pcb` binary — magic `PCB1`, little-endian u32 point count, then
//!   count × 3 little-endian f32 coordinates. Round-trips are bit-exact for
//!   values representable in f32 (computation is f64, storage is f32).
//!
//! Neither format stores labels; those live in the dataset manifest.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use crate::cloud::{PointCloud, Vec3};
use crate::error::{Error, Result};

/// Magic bytes opening every binary cloud file.
pub const PCB_MAGIC: &[u8; 4] = b"PCB1";

/// Writes the text format.
pub fn write_xyz(cloud: &PointCloud, path: &Path) -> Result<()> {
    let mut out = String::with_capacity(cloud.len() * 32);
    for p in cloud.points() {
        out.push_str(&format!("{:.6} {:.6} {:.6}\n", p.x, p.y, p.z));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads the text format.
pub fn read_xyz(path: &Path) -> Result<PointCloud> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut points = Vec::new();
    let mut in_header = true;
    for (lineno, line) in text.lines().enumerate() {
        if in_header && line.starts_with('#') {
            continue;
        }
        in_header = false;
        if line.trim().is_empty() {
            return Err(Error::format(path, format!("line {}: blank line in data section", lineno + 1)));
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::format(
                path,
                format!("line {}: expected 3 coordinates, found {}", lineno + 1, fields.len()),
            ));
        }
        let mut coord = [0.0f64; 3];
        for (a, field) in fields.iter().enumerate() {
            coord[a] = field.parse::<f64>().map_err(|_| {
                Error::format(path, format!("line {}: unparseable coordinate {field:?}", lineno + 1))
            })?;
        }
        points.push(Vec3::new(coord[0], coord[1], coord[2]));
    }
    if points.is_empty() {
        return Err(Error::format(path, "no data lines".to_string()));
    }
    PointCloud::new(points)
}

/// Writes the binary format.
pub fn write_pcb(cloud: &PointCloud, path: &Path) -> Result<()> {
    let mut bytes = Vec::with_capacity(8 + cloud.len() * 12);
    bytes.extend_from_slice(PCB_MAGIC);
    let count = u32::try_from(cloud.len())
        .map_err(|_| Error::InvalidArgument(format!("cloud of {} points exceeds u32 count", cloud.len())))?;
    bytes.extend_from_slice(&count.to_le_bytes());
    for p in cloud.points() {
        for a in 0..3 {
            bytes.extend_from_slice(&(p[a] as f32).to_le_bytes());
        }
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&bytes).map_err(|e| Error::io(path, e))
}

/// Reads the binary format.
pub fn read_pcb(path: &Path) -> Result<PointCloud> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() < 8 {
        return Err(Error::format(path, format!("file too short for header: {} bytes", bytes.len())));
    }
    if &bytes[0..4] != PCB_MAGIC {
        return Err(Error::format(path, format!("bad magic {:?}, expected {PCB_MAGIC:?}", &bytes[0..4])));
    }
    let count = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let expected = 8 + count * 12;
    if bytes.len() != expected {
        return Err(Error::format(
            path,
            format!("point count {count} implies {expected} bytes, file has {}", bytes.len()),
        ));
    }
    let mut points = Vec::with_capacity(count);
    for i in 0..count {
        let at = 8 + i * 12;
        let x = f32::from_le_bytes(bytes[at..at + 4].try_into().unwrap()) as f64;
        let y = f32::from_le_bytes(bytes[at + 4..at + 8].try_into().unwrap()) as f64;
        let z = f32::from_le_bytes(bytes[at + 8..at + 12].try_into().unwrap()) as f64;
        points.push(Vec3::new(x, y, z));
    }
    PointCloud::new(points)
}

/// Reads either format, dispatching on the file extension
/// (`.xyz` → text, `.pcb` → binary).
pub fn read_cloud(path: &Path) -> Result<PointCloud> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("xyz") => read_xyz(path),
        Some("pcb") => read_pcb(path),
        other => Err(Error::InvalidArgument(format!(
            "unsupported cloud extension {other:?} for {} (expected .xyz or .pcb)",
            path.display()
        ))),
    }
}

/// Writes either format, dispatching on the file extension.
pub fn write_cloud(cloud: &PointCloud, path: &Path) -> Result<()> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("xyz") => write_xyz(cloud, path),
        Some("pcb") => write_pcb(cloud, path),
        other => Err(Error::InvalidArgument(format!(
            "unsupported cloud extension {other:?} for {} (expected .xyz or .pcb)",
            path.display()
        ))),
    }
}
