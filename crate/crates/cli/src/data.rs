use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use serde::Serialize;
use vislineup::conventional::{test_battery_with, BatteryOptions, BpAuxiliary, BpOptions, DEFAULT_RESET_POWER};
use vislineup::effect_size::{effect_size as compute_effect_size, EffectSize, EffectSizeInputs};
use vislineup::lineup::{load_bundle, make_lineup, make_null_lineup, save_bundle, BUNDLE_MANIFEST, DEFAULT_PANELS};
use vislineup::numerics::{ols_fit, RandomStream};
use vislineup::simulate::{load_dataset, save_dataset, simulate as run_simulation, Departure, ExperimentFactors, PredictorDist, SimulatedDataset, MANIFEST_FILE};

use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Table,
    Csv,
}

#[derive(Debug, Args, Serialize)]
pub struct SimulateArgs {
    /// non_linearity (alias nonlinear) or heteroskedasticity (alias heteroskedastic).
    #[arg(long)]
    pub departure: Departure,
    /// Hermite order of the omitted term (non-linearity).
    #[arg(long)]
    pub j: Option<u32>,
    /// Error standard deviation (non-linearity).
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Variance shape: -1 left triangle, 0 butterfly, 1 right triangle.
    #[arg(long, allow_negative_numbers = true)]
    pub a: Option<i32>,
    /// Variance ratio (heteroskedasticity).
    #[arg(long)]
    pub b: Option<f64>,
    /// Sample size.
    #[arg(long)]
    pub n: usize,
    /// uniform, normal, skewed or discrete.
    #[arg(long, default_value = "uniform")]
    pub dist: PredictorDist,
    /// Seed of the random stream.
    #[arg(long)]
    pub seed: u64,
    /// Output directory.
    #[arg(short, long, env = "VISLINEUP_OUT")]
    pub out: PathBuf,
}

fn factors_of(a: &SimulateArgs) -> CliResult<ExperimentFactors> {
    let missing = |flag: &str| CliError::Usage(format!("--{flag} is required for {}", a.departure.name()));
    let f = match a.departure {
        Departure::NonLinearity => ExperimentFactors::nonlinear(
            a.j.ok_or_else(|| missing("j"))?,
            a.sigma.ok_or_else(|| missing("sigma"))?,
            a.n,
            a.dist,
        ),
        Departure::Heteroskedasticity => ExperimentFactors::heteroskedastic(
            a.a.ok_or_else(|| missing("a"))?,
            a.b.ok_or_else(|| missing("b"))?,
            a.n,
            a.dist,
        ),
    };
    f.validate()?;
    Ok(f)
}

pub fn simulate(args: SimulateArgs) -> CliResult<()> {
    let factors = factors_of(&args)?;
    let ds = run_simulation(&factors, &mut RandomStream::new(args.seed))?;
    save_dataset(&ds, &args.out)?;
    let e = compute_effect_size(&EffectSizeInputs::from_dataset(&ds)?)?;
    println!("{}  n={}  E={}  ln E={}", factors.label(), ds.x.len(), e.value, fmt_log(&e));
    RunManifest::new("simulate", &args, Some(args.seed))?.write(&args.out)
}

/// A dataset directory or a lineup bundle directory.
pub fn load_any(path: &Path) -> CliResult<SimulatedDataset> {
    if path.join(MANIFEST_FILE).is_file() {
        Ok(load_dataset(path)?)
    } else if path.join(BUNDLE_MANIFEST).is_file() {
        Ok(load_bundle(path)?.dataset)
    } else {
        Err(vislineup::Error::InvalidArgument(format!("{} is neither a dataset nor a lineup bundle", path.display())).into())
    }
}

fn fmt_log(e: &EffectSize) -> String {
    e.log_value.map_or_else(|| "-inf".to_string(), |v| v.to_string())
}

#[derive(Debug, Args, Serialize)]
pub struct TestArgs {
    /// Dataset or lineup bundle directory.
    pub dataset: PathBuf,
    /// Highest power of the fitted values added by RESET; 6 is worth trying
    /// for high-order non-linearity.
    #[arg(long, default_value_t = DEFAULT_RESET_POWER)]
    pub reset_power: u32,
    /// Regressors of the Breusch-Pagan auxiliary regression.
    #[arg(long, default_value = "quadratic")]
    pub bp_auxiliary: BpAuxiliary,
    /// Classical Breusch-Pagan statistic instead of Koenker's studentized one.
    #[arg(long)]
    pub classical_bp: bool,
    /// Human-readable table or CSV.
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
}

pub fn test(args: TestArgs) -> CliResult<()> {
    let ds = load_any(&args.dataset)?;
    let design = ds.design()?;
    let fit = ols_fit(&design, &ds.y)?;
    let opts = BatteryOptions {
        reset_power: args.reset_power,
        bp: BpOptions { studentized: !args.classical_bp, auxiliary: args.bp_auxiliary },
    };
    let results = test_battery_with(&fit, &design, opts);
    match args.format {
        Format::Csv => {
            let mut w = csv::Writer::from_writer(std::io::stdout().lock());
            w.write_record(["test", "statistic", "df", "p_value", "error"])?;
            for (kind, r) in &results {
                match r {
                    Ok(t) => w.write_record([kind.name(), &format!("{:?}", t.statistic), &t.df_label(), &format!("{:?}", t.p_value), ""])?,
                    Err(e) => w.write_record([kind.name(), "", "", "", e.code()])?,
                }
            }
            w.flush()?;
        }
        Format::Table => {
            println!("{:<6} {:>12} {:>10} {:>12}", "test", "statistic", "df", "p_value");
            for (kind, r) in &results {
                match r {
                    Ok(t) => println!("{:<6} {:>12.4} {:>10} {:>12}", kind.name(), t.statistic, t.df_label(), fmt_p(t.p_value)),
                    Err(e) => println!("{:<6} {:>12} {:>10} {:>12}  {}", kind.name(), "-", "-", "-", e.code()),
                }
            }
        }
    }
    if results.iter().all(|(_, r)| r.is_err()) {
        let (_, first) = results.into_iter().next().expect("battery is never empty");
        return Err(first.unwrap_err().into());
    }
    Ok(())
}

pub fn fmt_p(p: f64) -> String {
    if p < 1e-3 {
        format!("{p:.3e}")
    } else {
        format!("{p:.4}")
    }
}

#[derive(Debug, Args, Serialize)]
pub struct EffectSizeArgs {
    /// Dataset or lineup bundle directory.
    pub dataset: PathBuf,
    /// Human-readable table or CSV.
    #[arg(long, value_enum, default_value_t = Format::Table)]
    pub format: Format,
}

pub fn effect_size(args: EffectSizeArgs) -> CliResult<()> {
    let e = if args.dataset.join(BUNDLE_MANIFEST).is_file() && !args.dataset.join(MANIFEST_FILE).is_file() {
        load_bundle(&args.dataset)?.effect_size()?
    } else {
        compute_effect_size(&EffectSizeInputs::from_dataset(&load_any(&args.dataset)?)?)?
    };
    match args.format {
        Format::Csv => println!("effect_size,log_e\n{},{}", e.value, fmt_log(&e)),
        Format::Table => println!("E    {}\nln E {}", e.value, fmt_log(&e)),
    }
    Ok(())
}

#[derive(Debug, Args, Serialize)]
pub struct LineupArgs {
    /// Dataset directory written by `simulate`.
    pub dataset: PathBuf,
    /// Number of panels.
    #[arg(short, default_value_t = DEFAULT_PANELS)]
    pub m: usize,
    /// Seed of the random stream.
    #[arg(long)]
    pub seed: u64,
    /// Random stream, to build several lineups from one dataset.
    #[arg(long, default_value_t = 0)]
    pub stream: u64,
    /// Mark as an attention check (requires ln E >= 5).
    #[arg(long, conflicts_with = "null")]
    pub attention_check: bool,
    /// Every panel is a null plot; used to estimate alpha.
    #[arg(long)]
    pub null: bool,
    /// Timestamp recorded in the bundle manifest.
    #[arg(long, default_value = "1970-01-01T00:00:00Z")]
    pub created_at: String,
    /// Bundles directory; the bundle is written to OUT/<lineup id>.
    #[arg(short, long, env = "VISLINEUP_OUT")]
    pub out: PathBuf,
}

pub fn lineup(args: LineupArgs) -> CliResult<()> {
    let ds = load_dataset(&args.dataset)?;
    let mut rng = RandomStream::with_stream(args.seed, args.stream);
    let mut bundle = if args.null { make_null_lineup(&ds, args.m, &mut rng)? } else { make_lineup(&ds, args.m, &mut rng)? };
    if args.attention_check {
        bundle = bundle.into_attention_check()?;
    }
    let bundle = bundle.with_created_at(args.created_at.clone());
    let dir = args.out.join(&bundle.id);
    save_bundle(&bundle, &dir)?;
    println!("{}", bundle.id);
    RunManifest::new("lineup", &args, Some(args.seed))?.input(&args.dataset)?.write(&dir)
}
