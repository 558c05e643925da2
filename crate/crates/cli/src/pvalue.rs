use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};
use vislineup::conventional::{test_battery_with, BatteryOptions, TestKind, DEFAULT_RESET_POWER};
use vislineup::fsutil::write_atomic;
use vislineup::lineup::{load_bundle, LineupBundle};
use vislineup::numerics::ols_fit;
use vislineup::power::NOMINAL_LEVEL;
use vislineup::visual::{
    estimate_alpha, filter_participants, group_by_lineup, read_evaluation_log, visual_pvalue, PValueMode, PValueOptions,
    DEFAULT_REPLICATIONS,
};
use vislineup::Error;

use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;

pub const PVALUES_FILE: &str = "pvalues.csv";
pub const ALPHA_FILE: &str = "alpha.json";

#[derive(Debug, Args, Serialize)]
pub struct PvalueArgs {
    /// Evaluation log or study export (newline-delimited JSON).
    #[arg(long)]
    pub log: PathBuf,
    /// Directory of lineup bundles named by id.
    #[arg(long)]
    pub bundles: PathBuf,
    /// uniform (exact) or alpha (Monte Carlo over Dirichlet panel weights).
    #[arg(long, default_value = "uniform")]
    pub mode: PValueMode,
    /// Dirichlet concentration; estimated from the null lineups in the log
    /// when omitted in alpha mode.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Monte Carlo seed (alpha mode).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Monte Carlo replications per lineup (alpha mode).
    #[arg(long, default_value_t = DEFAULT_REPLICATIONS)]
    pub replications: usize,
    /// Keep participants who missed every attention check.
    #[arg(long)]
    pub no_attention_filter: bool,
    /// Level at which a visual p-value counts as a rejection.
    #[arg(long, default_value_t = NOMINAL_LEVEL)]
    pub level: f64,
    /// RESET power for the conventional p-value columns.
    #[arg(long, default_value_t = DEFAULT_RESET_POWER)]
    pub reset_power: u32,
    /// Output directory for pvalues.csv.
    #[arg(short, long, env = "VISLINEUP_OUT")]
    pub out: PathBuf,
}

/// One lineup's visual test next to the conventional tests of its data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PValueRow {
    pub lineup_id: String,
    pub m: usize,
    pub k: usize,
    pub c_obs: usize,
    pub p_value: f64,
    pub mode: String,
    pub alpha: Option<f64>,
    pub mc_se: Option<f64>,
    pub reject: bool,
    pub effect_size: f64,
    pub log_e: f64,
    pub departure: String,
    pub j: Option<u32>,
    pub sigma: Option<f64>,
    pub a: Option<i32>,
    pub b: Option<f64>,
    pub n: usize,
    pub dist: String,
    #[serde(rename = "RESET")]
    pub reset: Option<f64>,
    #[serde(rename = "BP")]
    pub bp: Option<f64>,
    #[serde(rename = "SW")]
    pub sw: Option<f64>,
}

impl PValueRow {
    pub fn conventional(&self, test: TestKind) -> Option<f64> {
        match test {
            TestKind::Reset => self.reset,
            TestKind::Bp => self.bp,
            TestKind::Sw => self.sw,
        }
    }
}

pub fn read_pvalues(path: &std::path::Path) -> CliResult<Vec<PValueRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

#[derive(Serialize)]
struct AlphaReport {
    alpha: f64,
    estimated: bool,
    log_likelihood: Option<f64>,
    null_lineups: usize,
    evaluations: usize,
    at_upper_bound: bool,
    approximately_uniform: bool,
}

pub fn pvalue(args: PvalueArgs) -> CliResult<()> {
    if args.mode == PValueMode::AlphaAdjusted && args.seed.is_none() {
        return Err(CliError::Usage("--seed is required with --mode alpha".into()));
    }
    let mut records = read_evaluation_log(&args.log)?;
    if records.is_empty() {
        return Err(Error::NoEvaluations.into());
    }
    let mut bundles: BTreeMap<String, LineupBundle> = BTreeMap::new();
    for r in &records {
        if !bundles.contains_key(&r.lineup_id) {
            let dir = args.bundles.join(&r.lineup_id);
            if !dir.is_dir() {
                return Err(Error::IdMismatch(format!("no bundle for lineup {} in {}", r.lineup_id, args.bundles.display())).into());
            }
            bundles.insert(r.lineup_id.clone(), load_bundle(&dir)?);
        }
    }

    let attention: BTreeMap<String, usize> =
        bundles.values().filter(|b| b.attention_check).map(|b| (b.id.clone(), b.data_position)).collect();
    let before = records.len();
    if !attention.is_empty() && !args.no_attention_filter {
        let kept = filter_participants(&records, &attention);
        records.retain(|r| kept.contains(&r.participant_id));
    }
    let groups = group_by_lineup(&records);

    let opts = match args.mode {
        PValueMode::UniformNull => PValueOptions::uniform(),
        PValueMode::AlphaAdjusted => {
            let alpha = match args.alpha {
                Some(a) => {
                    write_alpha(&args, AlphaReport {
                        alpha: a,
                        estimated: false,
                        log_likelihood: None,
                        null_lineups: 0,
                        evaluations: 0,
                        at_upper_bound: false,
                        approximately_uniform: false,
                    })?;
                    a
                }
                None => {
                    let nulls: Vec<&LineupBundle> = bundles.values().filter(|b| b.null_lineup).collect();
                    let m = nulls.first().map_or(0, |b| b.m);
                    if nulls.iter().any(|b| b.m != m) {
                        return Err(Error::InsufficientNullData("null lineups differ in panel count".into()).into());
                    }
                    let evals: Vec<_> = nulls.iter().filter_map(|b| groups.get(&b.id).cloned()).collect();
                    let est = estimate_alpha(&evals, m)?;
                    write_alpha(&args, AlphaReport {
                        alpha: est.alpha,
                        estimated: true,
                        log_likelihood: Some(est.log_likelihood),
                        null_lineups: est.lineups,
                        evaluations: est.evaluations,
                        at_upper_bound: est.at_upper_bound,
                        approximately_uniform: est.approximately_uniform,
                    })?;
                    est.alpha
                }
            };
            PValueOptions { replications: args.replications, ..PValueOptions::alpha_adjusted(alpha, args.seed.unwrap_or(0)) }
        }
    };

    let battery = BatteryOptions { reset_power: args.reset_power, ..BatteryOptions::default() };
    let mut rows = Vec::new();
    for (id, evals) in &groups {
        let b = &bundles[id];
        if b.attention_check || b.null_lineup {
            continue;
        }
        let v = visual_pvalue(evals, b.data_position, b.m, &opts)?;
        let e = b.effect_size()?;
        let design = b.dataset.design()?;
        let fit = ols_fit(&design, &b.dataset.y)?;
        let mut conv: BTreeMap<TestKind, Option<f64>> = BTreeMap::new();
        for (kind, r) in test_battery_with(&fit, &design, battery) {
            conv.insert(kind, r.ok().map(|t| t.p_value));
        }
        let f = b.factors;
        rows.push(PValueRow {
            lineup_id: id.clone(),
            m: b.m,
            k: v.k,
            c_obs: v.c_obs,
            p_value: v.p_value,
            mode: match v.mode {
                PValueMode::UniformNull => "uniform".into(),
                PValueMode::AlphaAdjusted => "alpha".into(),
            },
            alpha: v.alpha,
            mc_se: v.mc_se,
            reject: v.p_value < args.level,
            effect_size: e.value,
            log_e: e.log_value.unwrap_or(f64::NEG_INFINITY),
            departure: f.departure.name().into(),
            j: f.j,
            sigma: f.sigma,
            a: f.a,
            b: f.b,
            n: f.n,
            dist: f.dist.name().into(),
            reset: conv[&TestKind::Reset],
            bp: conv[&TestKind::Bp],
            sw: conv[&TestKind::Sw],
        });
    }
    if rows.is_empty() {
        return Err(Error::NoEvaluations.into());
    }

    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    write_atomic(&args.out.join(PVALUES_FILE), &bytes)?;

    println!(
        "{} lineups, {} of {} evaluations kept, {} visual rejections at {}",
        rows.len(),
        records.len(),
        before,
        rows.iter().filter(|r| r.reject).count(),
        args.level
    );
    let seed = (args.mode == PValueMode::AlphaAdjusted).then_some(args.seed).flatten();
    RunManifest::new("pvalue", &args, seed)?.input(&args.log)?.write(&args.out)
}

fn write_alpha(args: &PvalueArgs, report: AlphaReport) -> CliResult<()> {
    let text = serde_json::to_string_pretty(&report)?;
    write_atomic(&args.out.join(ALPHA_FILE), format!("{text}\n").as_bytes())?;
    Ok(())
}
