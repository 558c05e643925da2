//! Small file helpers shared by the persistence code.

use std::io::Write;
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Writes via a sibling temp file and rename so readers never see a
/// partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|s| s.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.tmp"));
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_f64s(values: &[f64]) -> String {
    let mut h = Sha256::new();
    for v in values {
        h.update(v.to_le_bytes());
    }
    hex::encode(h.finalize())
}

/// `x,y` CSV using shortest round-trip float formatting.
pub fn write_xy_csv(path: &Path, x: &[f64], y: &[f64]) -> Result<()> {
    let mut out = String::from("x,y\n");
    for (a, b) in x.iter().zip(y) {
        out.push_str(&format!("{a:?},{b:?}\n"));
    }
    write_atomic(path, out.as_bytes())
}

pub fn read_xy_csv(path: &Path) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::Parse(e.to_string()))?;
    let headers = reader.headers().map_err(|e| Error::Parse(e.to_string()))?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::Parse(format!("{}: missing column `{name}`", path.display())))
    };
    let (ix, iy) = (col("x")?, col("y")?);
    let mut x = Vec::new();
    let mut y = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| Error::Parse(e.to_string()))?;
        let parse = |i: usize| -> Result<f64> {
            rec.get(i)
                .unwrap_or("")
                .trim()
                .parse()
                .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
        };
        x.push(parse(ix)?);
        y.push(parse(iy)?);
    }
    Ok((x, y))
}
