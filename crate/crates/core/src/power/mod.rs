//! Monte Carlo power of the conventional tests, logistic power curves with
//! a fixed intercept, bootstrap bands and decision agreement.

mod agreement;
mod chart;
mod curve;
mod io;

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::conventional::{bp_test_with, reset_test, sw_test, BpOptions, TestKind, DEFAULT_RESET_POWER};
use crate::effect_size::{effect_size, EffectSizeInputs};
use crate::error::{Error, Result};
use crate::numerics::{ols_fit, RandomStream};
use crate::parallel::{map_indexed, ExecutionMode};
use crate::simulate::{simulate, Departure, ExperimentFactors, PredictorDist};

pub use agreement::{agreement_report, AgreementTable, SweepRow, SWEEP_LEVELS};
pub use chart::render_power_chart;
pub use curve::{bootstrap_power, fit_power_curve, logistic, CurvePoint, PowerCurve, CURVE_LOG_E_RANGE, CURVE_POINTS, INTERCEPT, NOMINAL_LEVEL};
pub use io::{read_records_csv, write_curves_csv, write_records_csv};

/// Which test produced a decision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum DecisionSource {
    Conventional { test: TestKind, reset_power: Option<u32> },
    Visual,
}

impl DecisionSource {
    pub fn reset(power: u32) -> Self {
        Self::Conventional { test: TestKind::Reset, reset_power: Some(power) }
    }

    pub fn test(kind: TestKind) -> Self {
        match kind {
            TestKind::Reset => Self::reset(DEFAULT_RESET_POWER),
            _ => Self::Conventional { test: kind, reset_power: None },
        }
    }

    /// RESET with the default power, BP and SW.
    pub fn standard() -> Vec<Self> {
        TestKind::ALL.into_iter().map(Self::test).collect()
    }
}

impl fmt::Display for DecisionSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Conventional { test: TestKind::Reset, reset_power: Some(p) } if *p != DEFAULT_RESET_POWER => {
                write!(f, "RESET{p}")
            }
            Self::Conventional { test, .. } => f.write_str(test.name()),
            Self::Visual => f.write_str("visual"),
        }
    }
}

impl std::str::FromStr for DecisionSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.eq_ignore_ascii_case("visual") {
            return Ok(Self::Visual);
        }
        let upper = s.to_ascii_uppercase();
        if let Some(rest) = upper.strip_prefix("RESET") {
            if !rest.is_empty() {
                let p = rest.parse().map_err(|_| Error::InvalidArgument(format!("unknown test `{s}`")))?;
                return Ok(Self::reset(p));
            }
        }
        s.parse::<TestKind>().map(Self::test)
    }
}

/// One accept/reject decision at a known effect size.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    /// Lineup id for visual decisions, `c{cell}r{replicate}` for simulations.
    pub id: String,
    pub cell: usize,
    pub replicate: usize,
    pub source: DecisionSource,
    pub effect_size: f64,
    /// `ln E`; negative infinity when `E = 0`.
    pub log_e: f64,
    pub p_value: f64,
    pub reject: bool,
    pub factors: ExperimentFactors,
}

/// Settings for [`mc_power`].
#[derive(Debug, Clone, PartialEq)]
pub struct McConfig {
    pub tests: Vec<DecisionSource>,
    pub nsim: usize,
    pub level: f64,
    pub seed: u64,
    pub mode: ExecutionMode,
    pub bp: BpOptions,
}

impl McConfig {
    pub fn new(nsim: usize, seed: u64) -> Self {
        Self {
            tests: DecisionSource::standard(),
            nsim,
            level: NOMINAL_LEVEL,
            seed,
            mode: ExecutionMode::default(),
            bp: BpOptions::default(),
        }
    }
}

/// A test that could not be computed on one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McFailure {
    pub cell: usize,
    pub replicate: usize,
    pub source: DecisionSource,
    pub code: String,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct McOutput {
    pub records: Vec<DecisionRecord>,
    pub failures: Vec<McFailure>,
}

/// The non-linearity cells of the experimental design for the given
/// predictor distributions.
pub fn nonlinear_grid(dists: &[PredictorDist]) -> Vec<ExperimentFactors> {
    let mut out = Vec::new();
    for &dist in dists {
        for j in ExperimentFactors::J_LEVELS {
            for sigma in ExperimentFactors::SIGMA_LEVELS {
                for n in ExperimentFactors::N_LEVELS {
                    out.push(ExperimentFactors::nonlinear(j, sigma, n, dist));
                }
            }
        }
    }
    out
}

/// The heteroskedasticity cells of the experimental design.
pub fn heteroskedastic_grid(dists: &[PredictorDist]) -> Vec<ExperimentFactors> {
    let mut out = Vec::new();
    for &dist in dists {
        for a in ExperimentFactors::A_LEVELS {
            for b in ExperimentFactors::B_LEVELS {
                for n in ExperimentFactors::N_LEVELS {
                    out.push(ExperimentFactors::heteroskedastic(a, b, n, dist));
                }
            }
        }
    }
    out
}

pub fn design_grid(departure: Departure, dists: &[PredictorDist]) -> Vec<ExperimentFactors> {
    match departure {
        Departure::NonLinearity => nonlinear_grid(dists),
        Departure::Heteroskedasticity => heteroskedastic_grid(dists),
    }
}

type Replicate = (Vec<DecisionRecord>, Vec<McFailure>);

fn run_replicate(cells: &[ExperimentFactors], cfg: &McConfig, index: usize) -> Result<Replicate> {
    let (cell, replicate) = (index / cfg.nsim, index % cfg.nsim);
    let factors = &cells[cell];
    let mut rng = RandomStream::new(cfg.seed).split(cell as u64).split(replicate as u64);
    let ds = simulate(factors, &mut rng)?;
    let e = effect_size(&EffectSizeInputs::from_dataset(&ds)?)?;
    let design = ds.design()?;
    let fit = ols_fit(&design, &ds.y)?;

    let mut sw: Option<std::result::Result<f64, &'static str>> = None;
    let mut records = Vec::with_capacity(cfg.tests.len());
    let mut failures = Vec::new();
    for &source in &cfg.tests {
        let p_value = match source {
            DecisionSource::Conventional { test: TestKind::Reset, reset_power } => {
                reset_test(&fit, &design, reset_power.unwrap_or(DEFAULT_RESET_POWER)).map(|r| r.p_value).map_err(|e| e.code())
            }
            DecisionSource::Conventional { test: TestKind::Bp, .. } => {
                bp_test_with(&fit, &design, cfg.bp).map(|r| r.p_value).map_err(|e| e.code())
            }
            DecisionSource::Conventional { test: TestKind::Sw, .. } => {
                *sw.get_or_insert_with(|| sw_test(&fit.residuals).map(|r| r.p_value).map_err(|e| e.code()))
            }
            DecisionSource::Visual => unreachable!("validated in mc_power"),
        };
        match p_value {
            Ok(p_value) => records.push(DecisionRecord {
                id: format!("c{cell}r{replicate}"),
                cell,
                replicate,
                source,
                effect_size: e.value,
                log_e: e.log_value.unwrap_or(f64::NEG_INFINITY),
                p_value,
                reject: p_value < cfg.level,
                factors: *factors,
            }),
            Err(code) => failures.push(McFailure { cell, replicate, source, code: code.into() }),
        }
    }
    Ok((records, failures))
}

/// Simulates `nsim` datasets per cell and records each test's decision.
///
/// Replicate `r` of cell `c` draws from `RandomStream::new(seed).split(c).split(r)`,
/// so the output is identical across execution modes and thread counts.
/// Simulation failures abort the run; a test that cannot be computed on a
/// replicate (for example RESET on a two-point predictor) is listed in
/// `failures` instead.
pub fn mc_power(cells: &[ExperimentFactors], cfg: &McConfig) -> Result<McOutput> {
    if cfg.nsim == 0 {
        return Err(Error::InvalidArgument("nsim must be at least 1".into()));
    }
    if !(cfg.level > 0.0 && cfg.level < 1.0) {
        return Err(Error::InvalidArgument(format!("level must lie in (0, 1), got {}", cfg.level)));
    }
    if cfg.tests.is_empty() || cfg.tests.contains(&DecisionSource::Visual) {
        return Err(Error::InvalidArgument("mc_power needs one or more conventional tests".into()));
    }
    for f in cells {
        f.validate()?;
    }
    let results = map_indexed(cells.len() * cfg.nsim, cfg.mode, |i| run_replicate(cells, cfg, i));
    let mut out = McOutput::default();
    for r in results {
        let (records, failures) = r?;
        out.records.extend(records);
        out.failures.extend(failures);
    }
    Ok(out)
}

/// Records of one source, in input order.
pub fn records_for(records: &[DecisionRecord], source: DecisionSource) -> Vec<DecisionRecord> {
    records.iter().filter(|r| r.source == source).cloned().collect()
}

/// Rejection rate of `source` in each cell, indexed by cell.
pub fn cell_power(records: &[DecisionRecord], source: DecisionSource, cells: usize) -> Vec<Option<f64>> {
    let mut hits = vec![0usize; cells];
    let mut total = vec![0usize; cells];
    for r in records.iter().filter(|r| r.source == source && r.cell < cells) {
        total[r.cell] += 1;
        hits[r.cell] += usize::from(r.reject);
    }
    hits.iter().zip(&total).map(|(&h, &t)| (t > 0).then(|| h as f64 / t as f64)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn source_labels_round_trip() {
        for s in [
            DecisionSource::standard(),
            vec![DecisionSource::reset(6), DecisionSource::reset(2), DecisionSource::Visual],
        ]
        .concat()
        {
            assert_eq!(s.to_string().parse::<DecisionSource>().unwrap(), s);
        }
        assert_eq!(DecisionSource::test(TestKind::Reset).to_string(), "RESET");
        assert_eq!(DecisionSource::reset(6).to_string(), "RESET6");
    }

    #[test]
    fn grid_sizes() {
        assert_eq!(nonlinear_grid(&[PredictorDist::Uniform]).len(), 48);
        assert_eq!(heteroskedastic_grid(&[PredictorDist::Uniform, PredictorDist::Normal]).len(), 90);
    }

    #[test]
    fn modes_give_identical_records() {
        let cells = vec![
            ExperimentFactors::nonlinear(3, 1.0, 50, PredictorDist::Uniform),
            ExperimentFactors::heteroskedastic(0, 4.0, 50, PredictorDist::Normal),
        ];
        let mut cfg = McConfig::new(15, 8);
        cfg.mode = ExecutionMode::Sequential;
        let seq = mc_power(&cells, &cfg).unwrap();
        cfg.mode = ExecutionMode::ParallelWith { threads: 3 };
        let par = mc_power(&cells, &cfg).unwrap();
        assert_eq!(seq, par);
        assert_eq!(seq.records.len(), 2 * 15 * 3);
    }

    #[test]
    fn cell_prefix_is_stable() {
        // Adding cells or replicates does not change existing draws.
        let a = vec![ExperimentFactors::nonlinear(2, 2.0, 50, PredictorDist::Uniform)];
        let mut b = a.clone();
        b.push(ExperimentFactors::nonlinear(6, 0.25, 100, PredictorDist::Skewed));
        let small = mc_power(&a, &McConfig::new(5, 1)).unwrap();
        let large = mc_power(&b, &McConfig::new(8, 1)).unwrap();
        for r in &small.records {
            assert!(large.records.contains(r));
        }
    }

    #[test]
    fn discrete_reset_failures_are_listed() {
        let cells = vec![ExperimentFactors::nonlinear(3, 1.0, 50, PredictorDist::Discrete)];
        let out = mc_power(&cells, &McConfig::new(4, 2)).unwrap();
        assert_eq!(out.failures.len(), 4);
        assert!(out.failures.iter().all(|f| f.source == DecisionSource::test(TestKind::Reset)));
        assert_eq!(out.records.len(), 8);
    }

    #[test]
    fn heteroskedastic_null_size() {
        let cells = vec![ExperimentFactors::heteroskedastic(0, 1.0, 100, PredictorDist::Uniform)];
        let out = mc_power(&cells, &McConfig::new(2000, 31)).unwrap();
        for source in DecisionSource::standard() {
            let rate = cell_power(&out.records, source, 1)[0].unwrap();
            assert!((rate - 0.05).abs() <= 0.02, "{source}: {rate}");
        }
        assert!(out.records.iter().all(|r| r.effect_size < 1e-8));
    }

    #[test]
    fn rejects_bad_config() {
        let cells = vec![ExperimentFactors::nonlinear(2, 1.0, 50, PredictorDist::Uniform)];
        assert!(mc_power(&cells, &McConfig::new(0, 1)).is_err());
        let mut cfg = McConfig::new(1, 1);
        cfg.tests = vec![DecisionSource::Visual];
        assert!(matches!(mc_power(&cells, &cfg), Err(Error::InvalidArgument(_))));
    }
}
