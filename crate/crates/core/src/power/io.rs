use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DecisionRecord, PowerCurve};
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;
use crate::simulate::ExperimentFactors;

/// Flat CSV form of a [`DecisionRecord`].
#[derive(Debug, Serialize, Deserialize)]
struct RecordRow {
    id: String,
    cell: usize,
    replicate: usize,
    test: String,
    effect_size: f64,
    log_e: f64,
    p_value: f64,
    reject: bool,
    departure: String,
    j: Option<u32>,
    sigma: Option<f64>,
    a: Option<i32>,
    b: Option<f64>,
    n: usize,
    dist: String,
}

fn csv_error(e: csv::Error) -> Error {
    Error::Parse(e.to_string())
}

fn finish(writer: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    writer.into_inner().map_err(|e| Error::Parse(e.to_string()))
}

pub fn write_records_csv(path: &Path, records: &[DecisionRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in records {
        let f = &r.factors;
        w.serialize(RecordRow {
            id: r.id.clone(),
            cell: r.cell,
            replicate: r.replicate,
            test: r.source.to_string(),
            effect_size: r.effect_size,
            log_e: r.log_e,
            p_value: r.p_value,
            reject: r.reject,
            departure: f.departure.name().into(),
            j: f.j,
            sigma: f.sigma,
            a: f.a,
            b: f.b,
            n: f.n,
            dist: f.dist.name().into(),
        })
        .map_err(csv_error)?;
    }
    write_atomic(path, &finish(w)?)
}

pub fn read_records_csv(path: &Path) -> Result<Vec<DecisionRecord>> {
    let mut reader = csv::Reader::from_path(path).map_err(csv_error)?;
    reader
        .deserialize::<RecordRow>()
        .map(|row| {
            let row = row.map_err(csv_error)?;
            let factors = ExperimentFactors {
                departure: row.departure.parse()?,
                j: row.j,
                sigma: row.sigma,
                a: row.a,
                b: row.b,
                n: row.n,
                dist: row.dist.parse()?,
            };
            Ok(DecisionRecord {
                id: row.id,
                cell: row.cell,
                replicate: row.replicate,
                source: row.test.parse()?,
                effect_size: row.effect_size,
                log_e: row.log_e,
                p_value: row.p_value,
                reject: row.reject,
                factors,
            })
        })
        .collect()
}

/// Writes `test,log_e,effect_size,power` rows for each labelled curve.
pub fn write_curves_csv(path: &Path, curves: &[(String, &PowerCurve)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["test", "beta1", "log_e", "effect_size", "power"]).map_err(csv_error)?;
    for (label, curve) in curves {
        for p in &curve.curve {
            w.write_record([
                label.clone(),
                format!("{:?}", curve.beta1),
                format!("{:?}", p.log_e),
                format!("{:?}", p.effect_size),
                format!("{:?}", p.power),
            ])
            .map_err(csv_error)?;
        }
    }
    write_atomic(path, &finish(w)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::power::{mc_power, McConfig};
    use crate::simulate::PredictorDist;

    #[test]
    fn records_round_trip() {
        let cells = vec![
            ExperimentFactors::nonlinear(3, 0.25, 50, PredictorDist::Uniform),
            ExperimentFactors::heteroskedastic(-1, 1.0, 50, PredictorDist::Skewed),
        ];
        let records = mc_power(&cells, &McConfig::new(3, 5)).unwrap().records;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("records.csv");
        write_records_csv(&path, &records).unwrap();
        assert_eq!(read_records_csv(&path).unwrap(), records);
    }
}
