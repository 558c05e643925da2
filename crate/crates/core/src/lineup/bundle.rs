//! Bundle directory layout:
//!
//! ```text
//! manifest.json            id, m, seed, factors, data_position, checksums
//! lineup.svg               numbered grid
//! panel_01.svg ...         one file per panel
//! data.csv                 x, y of the underlying dataset
//! ```
//!
//! The manifest is the only file that carries the secret position. Panels
//! are not stored numerically; they are regenerated from `data.csv` and the
//! lineup seed, and the regenerated position is checked against the
//! manifest.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{build, render_lineup, LineupBundle};
use crate::error::{Error, Result};
use crate::fsutil::{read_xy_csv, sha256_hex, write_atomic, write_xy_csv};
use crate::numerics::RandomStream;
use crate::simulate::{dataset_from_parts, DatasetManifest, ExperimentFactors};

pub const BUNDLE_MANIFEST: &str = "manifest.json";
const GRID_FILE: &str = "lineup.svg";
const DATA_FILE: &str = "data.csv";

fn panel_file(i: usize) -> String {
    format!("panel_{i:02}.svg")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BundleManifest {
    pub id: String,
    pub m: usize,
    pub seed: u64,
    pub stream: u64,
    pub rng: String,
    pub factors: ExperimentFactors,
    pub data_position: usize,
    pub attention_check: bool,
    pub null_lineup: bool,
    pub created_at: String,
    pub dataset: DatasetManifest,
    /// SHA-256 of every other file in the bundle.
    pub files: BTreeMap<String, String>,
    /// SHA-256 of this manifest serialized with `checksum` empty.
    pub checksum: String,
}

impl BundleManifest {
    fn compute_checksum(&self) -> Result<String> {
        let mut copy = self.clone();
        copy.checksum = String::new();
        let text = serde_json::to_string(&copy).map_err(|e| Error::Parse(e.to_string()))?;
        Ok(sha256_hex(text.as_bytes()))
    }

    /// Reads and verifies the manifest alone.
    pub fn load(dir: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(dir.join(BUNDLE_MANIFEST))?;
        let manifest: BundleManifest =
            serde_json::from_str(&text).map_err(|e| Error::CorruptManifest(e.to_string()))?;
        if manifest.compute_checksum()? != manifest.checksum {
            return Err(Error::CorruptManifest(format!("{}: checksum mismatch", dir.display())));
        }
        Ok(manifest)
    }
}

/// Writes every bundle file; each is written atomically.
pub fn save_bundle(bundle: &LineupBundle, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let rendered = render_lineup(bundle);
    let mut files = BTreeMap::new();

    let mut put = |name: String, bytes: &[u8]| -> Result<()> {
        write_atomic(&dir.join(&name), bytes)?;
        files.insert(name, sha256_hex(bytes));
        Ok(())
    };
    put(GRID_FILE.into(), rendered.grid_svg.as_bytes())?;
    for p in &rendered.panels {
        put(panel_file(p.panel_index), p.svg.as_bytes())?;
    }
    write_xy_csv(&dir.join(DATA_FILE), &bundle.dataset.x, &bundle.dataset.y)?;
    files.insert(DATA_FILE.into(), sha256_hex(&std::fs::read(dir.join(DATA_FILE))?));

    let mut manifest = BundleManifest {
        id: bundle.id.clone(),
        m: bundle.m,
        seed: bundle.seed,
        stream: bundle.stream,
        rng: RandomStream::ALGORITHM.into(),
        factors: bundle.factors,
        data_position: bundle.data_position,
        attention_check: bundle.attention_check,
        null_lineup: bundle.null_lineup,
        created_at: bundle.created_at.clone(),
        dataset: DatasetManifest::of(&bundle.dataset),
        files,
        checksum: String::new(),
    };
    manifest.checksum = manifest.compute_checksum()?;
    let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Parse(e.to_string()))?;
    write_atomic(&dir.join(BUNDLE_MANIFEST), format!("{text}\n").as_bytes())
}

/// Loads and verifies a bundle. Missing SVG files are regenerated.
pub fn load_bundle(dir: &Path) -> Result<LineupBundle> {
    let manifest = BundleManifest::load(dir)?;
    let data_bytes = std::fs::read(dir.join(DATA_FILE))?;
    if manifest.files.get(DATA_FILE) != Some(&sha256_hex(&data_bytes)) {
        return Err(Error::CorruptManifest(format!("{}: data.csv checksum mismatch", dir.display())));
    }
    let (x, y) = read_xy_csv(&dir.join(DATA_FILE))?;
    let ds = dataset_from_parts(manifest.dataset.clone(), x, y)?;
    let mut rng = RandomStream::with_stream(manifest.seed, manifest.stream);
    let mut bundle = build(&ds, manifest.m, &mut rng, manifest.null_lineup)?;
    if bundle.data_position != manifest.data_position || bundle.id != manifest.id {
        return Err(Error::CorruptManifest(format!("{}: regenerated lineup differs from manifest", dir.display())));
    }
    bundle.attention_check = manifest.attention_check;
    bundle.created_at = manifest.created_at.clone();

    let mut rendered = None;
    for (name, digest) in &manifest.files {
        if name == DATA_FILE {
            continue;
        }
        let path = dir.join(name);
        match std::fs::read(&path) {
            Ok(bytes) => {
                if &sha256_hex(&bytes) != digest {
                    return Err(Error::CorruptManifest(format!("{}: checksum mismatch", path.display())));
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
                let r = rendered.get_or_insert_with(|| render_lineup(&bundle));
                let svg = if name == GRID_FILE {
                    r.grid_svg.clone()
                } else {
                    r.panels
                        .iter()
                        .find(|p| &panel_file(p.panel_index) == name)
                        .map(|p| p.svg.clone())
                        .ok_or_else(|| Error::CorruptManifest(format!("unknown bundle file {name}")))?
                };
                if &sha256_hex(svg.as_bytes()) != digest {
                    return Err(Error::CorruptManifest(format!("{name}: regenerated file differs")));
                }
                write_atomic(&path, svg.as_bytes())?;
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(bundle)
}

/// Reads the served panel SVGs in order without touching the secret.
pub fn read_panel_svgs(dir: &Path, m: usize) -> Result<Vec<String>> {
    (1..=m)
        .map(|i| std::fs::read_to_string(dir.join(panel_file(i))).map_err(Error::from))
        .collect()
}
