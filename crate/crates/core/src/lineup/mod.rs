//! Lineups: the observed residual plot hidden among `m - 1` null plots
//! generated by residual rotation.

mod bundle;
mod render;

pub use bundle::{load_bundle, read_panel_svgs, save_bundle, BundleManifest, BUNDLE_MANIFEST};
pub use render::{render_lineup, render_panel, PanelRendering, PlotRanges, RenderedLineup};

use serde::{Deserialize, Serialize};

use crate::effect_size::{effect_size, EffectSize, EffectSizeInputs};
use crate::error::{Error, Result};
use crate::fsutil::sha256_hex;
use crate::numerics::{ols_fit, RandomStream};
use crate::simulate::{gen_null_residuals, ExperimentFactors, SimulatedDataset};

pub const DEFAULT_PANELS: usize = 20;

/// Minimum log effect size for an attention-check lineup.
pub const ATTENTION_MIN_LOG_E: f64 = 5.0;

/// One residual-vs-fitted scatterplot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Panel {
    pub fitted: Vec<f64>,
    pub residuals: Vec<f64>,
}

impl Panel {
    pub fn rss(&self) -> f64 {
        self.residuals.iter().map(|e| e * e).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineupBundle {
    pub id: String,
    pub m: usize,
    pub panels: Vec<Panel>,
    /// 1-based position of the data plot. Secret.
    pub data_position: usize,
    pub seed: u64,
    pub stream: u64,
    pub factors: ExperimentFactors,
    pub attention_check: bool,
    /// Every panel, including the one at `data_position`, is a null plot.
    pub null_lineup: bool,
    pub created_at: String,
    pub dataset: SimulatedDataset,
}

impl LineupBundle {
    pub fn data_panel(&self) -> &Panel {
        &self.panels[self.data_position - 1]
    }

    pub fn effect_size(&self) -> Result<EffectSize> {
        if self.null_lineup {
            return Ok(EffectSize { value: 0.0, log_value: None });
        }
        effect_size(&EffectSizeInputs::from_dataset(&self.dataset)?)
    }

    /// Marks the bundle as an attention check; the signal must be strong.
    pub fn into_attention_check(mut self) -> Result<Self> {
        let log_e = self.effect_size()?.log_value.unwrap_or(f64::NEG_INFINITY);
        if log_e < ATTENTION_MIN_LOG_E {
            return Err(Error::AttentionSignalTooWeak(log_e));
        }
        self.attention_check = true;
        Ok(self)
    }

    pub fn with_created_at(mut self, created_at: impl Into<String>) -> Self {
        self.created_at = created_at.into();
        self
    }
}

fn lineup_id(ds: &SimulatedDataset, m: usize, rng: &RandomStream, null_lineup: bool) -> String {
    let mut bytes = Vec::with_capacity(16 * ds.x.len() + 32);
    for v in ds.x.iter().chain(&ds.y) {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    bytes.extend_from_slice(&(m as u64).to_le_bytes());
    bytes.extend_from_slice(&rng.seed().to_le_bytes());
    bytes.extend_from_slice(&rng.stream().to_le_bytes());
    bytes.push(null_lineup as u8);
    format!("L{}", &sha256_hex(&bytes)[..16])
}

fn build(ds: &SimulatedDataset, m: usize, rng: &mut RandomStream, null_lineup: bool) -> Result<LineupBundle> {
    if m < 2 {
        return Err(Error::InvalidArgument(format!("a lineup needs m >= 2, got {m}")));
    }
    let id = lineup_id(ds, m, rng, null_lineup);
    let (seed, stream) = (rng.seed(), rng.stream());
    let design = ds.design()?;
    let fit = ols_fit(&design, &ds.y)?;
    let data_position = rng.below(m) + 1;
    let mut panels = Vec::with_capacity(m);
    for pos in 1..=m {
        if pos == data_position && !null_lineup {
            panels.push(Panel { fitted: fit.fitted.clone(), residuals: fit.residuals.clone() });
        } else {
            let e = gen_null_residuals(&design, fit.rss, rng)?;
            panels.push(Panel { fitted: fit.fitted.clone(), residuals: e.values });
        }
    }
    Ok(LineupBundle {
        id,
        m,
        panels,
        data_position,
        seed,
        stream,
        factors: ds.factors,
        attention_check: false,
        null_lineup,
        created_at: "1970-01-01T00:00:00Z".into(),
        dataset: ds.clone(),
    })
}

/// Data plot at a uniformly drawn position among `m - 1` rotated null plots.
pub fn make_lineup(ds: &SimulatedDataset, m: usize, rng: &mut RandomStream) -> Result<LineupBundle> {
    build(ds, m, rng, false)
}

/// A lineup of `m` null plots, used to calibrate panel attractiveness.
/// `data_position` marks the panel standing in for the data plot.
pub fn make_null_lineup(ds: &SimulatedDataset, m: usize, rng: &mut RandomStream) -> Result<LineupBundle> {
    build(ds, m, rng, true)
}
