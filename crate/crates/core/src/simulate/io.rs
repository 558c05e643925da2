use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{nonlinear_mean, variance_profile, Departure, ExperimentFactors, SimulatedDataset};
use crate::error::{Error, Result};
use crate::fsutil::{read_xy_csv, sha256_f64s, write_atomic, write_xy_csv};
use crate::numerics::RandomStream;

pub const DATA_FILE: &str = "data.csv";
pub const MANIFEST_FILE: &str = "dataset.json";

/// Sidecar describing how `data.csv` was generated.
///
/// `Z` and the variance vector are not stored; they are functions of `x`
/// and the factors and are recomputed (and checked against the digest) on
/// load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub factors: ExperimentFactors,
    pub seed: u64,
    pub rng: String,
    pub n: usize,
    pub beta_z: Vec<f64>,
    pub sigma2: f64,
    pub variance_digest: String,
}

impl DatasetManifest {
    pub fn of(ds: &SimulatedDataset) -> Self {
        Self {
            factors: ds.factors,
            seed: ds.seed,
            rng: RandomStream::ALGORITHM.to_string(),
            n: ds.x.len(),
            beta_z: ds.beta_z.clone(),
            sigma2: ds.sigma2,
            variance_digest: sha256_f64s(&ds.variances),
        }
    }
}

pub fn save_dataset(ds: &SimulatedDataset, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_xy_csv(&dir.join(DATA_FILE), &ds.x, &ds.y)?;
    let manifest = serde_json::to_string_pretty(&DatasetManifest::of(ds)).map_err(|e| Error::Parse(e.to_string()))?;
    write_atomic(&dir.join(MANIFEST_FILE), format!("{manifest}\n").as_bytes())
}

pub fn load_dataset(dir: &Path) -> Result<SimulatedDataset> {
    let text = std::fs::read_to_string(dir.join(MANIFEST_FILE))?;
    let manifest: DatasetManifest =
        serde_json::from_str(&text).map_err(|e| Error::CorruptManifest(e.to_string()))?;
    let (x, y) = read_xy_csv(&dir.join(DATA_FILE))?;
    dataset_from_parts(manifest, x, y)
}

/// Rebuilds a dataset from its manifest and the stored `x`, `y` columns.
pub fn dataset_from_parts(manifest: DatasetManifest, x: Vec<f64>, y: Vec<f64>) -> Result<SimulatedDataset> {
    if x.len() != manifest.n {
        return Err(Error::CorruptManifest(format!("manifest n = {}, data has {} rows", manifest.n, x.len())));
    }
    let f = manifest.factors;
    let (z_design, variances) = match f.departure {
        Departure::NonLinearity => {
            let s = f.sigma.unwrap_or(1.0);
            (vec![nonlinear_mean(f.j.unwrap_or(2), &x)?], vec![s * s; x.len()])
        }
        Departure::Heteroskedasticity => (
            Vec::new(),
            variance_profile(f.a.unwrap_or(0), f.b.unwrap_or(1.0), &x, f.dist)?,
        ),
    };
    if sha256_f64s(&variances) != manifest.variance_digest {
        return Err(Error::CorruptManifest("variance digest mismatch".into()));
    }
    Ok(SimulatedDataset {
        x,
        y,
        z_design,
        beta_z: manifest.beta_z,
        variances,
        sigma2: manifest.sigma2,
        factors: f,
        seed: manifest.seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{simulate, PredictorDist};

    #[test]
    fn round_trip_is_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        for f in [
            ExperimentFactors::nonlinear(3, 1.5, 300, PredictorDist::Uniform),
            ExperimentFactors::heteroskedastic(-1, 16.0, 50, PredictorDist::Skewed),
        ] {
            let ds = simulate(&f, &mut RandomStream::new(1)).unwrap();
            save_dataset(&ds, dir.path()).unwrap();
            let back = load_dataset(dir.path()).unwrap();
            assert_eq!(ds, back);
        }
    }

    #[test]
    fn tampered_data_is_detected() {
        let dir = tempfile::tempdir().unwrap();
        let f = ExperimentFactors::heteroskedastic(0, 4.0, 50, PredictorDist::Uniform);
        let ds = simulate(&f, &mut RandomStream::new(2)).unwrap();
        save_dataset(&ds, dir.path()).unwrap();
        let mut x = ds.x.clone();
        x[0] = 0.0;
        write_xy_csv(&dir.path().join(DATA_FILE), &x, &ds.y).unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(Error::CorruptManifest(_))));
    }
}
