use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::Args;
use serde::Serialize;
use vislineup::conventional::{BpAuxiliary, BpOptions, TestKind};
use vislineup::fsutil::write_atomic;
use vislineup::numerics::RandomStream;
use vislineup::parallel::ExecutionMode;
use vislineup::power::{
    agreement_report, bootstrap_power, cell_power, design_grid, fit_power_curve, mc_power, records_for,
    render_power_chart, write_curves_csv, write_records_csv, AgreementTable, DecisionRecord, DecisionSource, McConfig,
    PowerCurve, NOMINAL_LEVEL,
};
use vislineup::simulate::{Departure, ExperimentFactors, PredictorDist};
use vislineup::Error;

use crate::data::fmt_p;
use crate::error::{CliError, CliResult};
use crate::manifest::RunManifest;
use crate::pvalue::read_pvalues;

#[derive(Debug, Args, Serialize)]
pub struct PowerArgs {
    /// Departures to simulate, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "non_linearity")]
    pub departure: Vec<Departure>,
    /// Predictor distributions, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "uniform")]
    pub dist: Vec<PredictorDist>,
    /// Simulations per grid cell; 0 skips the simulation.
    #[arg(long, default_value_t = 200)]
    pub nsim: usize,
    /// Tests to run: RESET, BP, SW, or RESET<p> for another RESET power.
    #[arg(long, value_delimiter = ',', default_value = "RESET,BP,SW")]
    pub tests: Vec<DecisionSource>,
    /// Significance level of every decision.
    #[arg(long, default_value_t = NOMINAL_LEVEL)]
    pub level: f64,
    /// Regressors of the Breusch-Pagan auxiliary regression: linear or quadratic.
    #[arg(long, default_value = "quadratic")]
    pub bp_auxiliary: BpAuxiliary,
    /// Classical Breusch-Pagan statistic instead of Koenker's studentized one.
    #[arg(long)]
    pub classical_bp: bool,
    /// Required when simulating or bootstrapping.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads; 1 runs sequentially. Defaults to all cores.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// `pvalues.csv` from the pvalue command; adds a visual power curve.
    #[arg(long)]
    pub visual: Option<PathBuf>,
    /// Bootstrap resamples per curve.
    #[arg(long, default_value_t = 0)]
    pub bootstrap: usize,
    /// Output directory.
    #[arg(short, long, env = "VISLINEUP_OUT")]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct CurveSummary {
    departure: String,
    test: String,
    records: usize,
    rejections: usize,
    beta1: Option<f64>,
    std_error: Option<f64>,
    bootstrap_interval: Option<(f64, f64)>,
    warnings: Vec<String>,
    error: Option<String>,
}

#[derive(Serialize)]
struct PowerSummary {
    cells: usize,
    records: usize,
    failures: usize,
    curves: Vec<CurveSummary>,
}

fn visual_records(path: &std::path::Path, level: f64) -> CliResult<Vec<DecisionRecord>> {
    let rows = read_pvalues(path)?;
    rows.into_iter()
        .map(|r| {
            let factors = ExperimentFactors {
                departure: r.departure.parse()?,
                j: r.j,
                sigma: r.sigma,
                a: r.a,
                b: r.b,
                n: r.n,
                dist: r.dist.parse()?,
            };
            Ok(DecisionRecord {
                id: r.lineup_id,
                cell: 0,
                replicate: 0,
                source: DecisionSource::Visual,
                effect_size: r.effect_size,
                log_e: r.log_e,
                p_value: r.p_value,
                reject: r.p_value < level,
                factors,
            })
        })
        .collect()
}

fn write_cells(path: &std::path::Path, cells: &[ExperimentFactors], records: &[DecisionRecord], tests: &[DecisionSource]) -> CliResult<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["cell", "departure", "j", "sigma", "a", "b", "n", "dist", "effect_size", "log_e"]
        .into_iter()
        .map(String::from)
        .collect::<Vec<_>>();
    header.extend(tests.iter().map(|t| t.to_string()));
    w.write_record(&header)?;
    let powers: Vec<Vec<Option<f64>>> = tests.iter().map(|&t| cell_power(records, t, cells.len())).collect();
    let mut e_sum = vec![(0.0, 0usize); cells.len()];
    for r in records.iter().filter(|r| r.source == tests[0]) {
        e_sum[r.cell].0 += r.effect_size;
        e_sum[r.cell].1 += 1;
    }
    let opt = |v: Option<String>| v.unwrap_or_default();
    for (i, f) in cells.iter().enumerate() {
        let mean_e = if e_sum[i].1 > 0 { e_sum[i].0 / e_sum[i].1 as f64 } else { f64::NAN };
        let mut row = vec![
            i.to_string(),
            f.departure.name().to_string(),
            opt(f.j.map(|v| v.to_string())),
            opt(f.sigma.map(|v| format!("{v:?}"))),
            opt(f.a.map(|v| v.to_string())),
            opt(f.b.map(|v| format!("{v:?}"))),
            f.n.to_string(),
            f.dist.name().to_string(),
            format!("{mean_e:?}"),
            format!("{:?}", mean_e.ln()),
        ];
        row.extend(powers.iter().map(|p| opt(p[i].map(|v| format!("{v:?}")))));
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
    write_atomic(path, &bytes)?;
    Ok(())
}

pub fn power(args: PowerArgs) -> CliResult<()> {
    if (args.nsim > 0 || args.bootstrap > 0) && args.seed.is_none() {
        return Err(CliError::Usage("--seed is required unless --nsim 0 and --bootstrap 0".into()));
    }
    if args.nsim == 0 && args.visual.is_none() {
        return Err(CliError::Usage("nothing to do: --nsim 0 without --visual".into()));
    }
    if args.tests.contains(&DecisionSource::Visual) {
        return Err(CliError::Usage("visual decisions come from --visual, not --tests".into()));
    }
    let seed = args.seed.unwrap_or(0);
    std::fs::create_dir_all(&args.out)?;

    let mut departures = args.departure.clone();
    departures.dedup();
    let cells: Vec<ExperimentFactors> = departures.iter().flat_map(|&d| design_grid(d, &args.dist)).collect();
    let mut records = Vec::new();
    let mut failures = Vec::new();
    if args.nsim > 0 {
        let cfg = McConfig {
            tests: args.tests.clone(),
            nsim: args.nsim,
            level: args.level,
            seed,
            mode: ExecutionMode::from_jobs(args.jobs),
            bp: BpOptions { studentized: !args.classical_bp, auxiliary: args.bp_auxiliary },
        };
        let out = mc_power(&cells, &cfg)?;
        write_cells(&args.out.join("cells.csv"), &cells, &out.records, &args.tests)?;
        records = out.records;
        failures = out.failures;
    }
    if !failures.is_empty() {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["cell", "replicate", "test", "code"])?;
        for f in &failures {
            w.write_record([f.cell.to_string(), f.replicate.to_string(), f.source.to_string(), f.code.clone()])?;
        }
        write_atomic(&args.out.join("failures.csv"), &w.into_inner().map_err(|e| Error::Parse(e.to_string()))?)?;
        eprintln!("warning: {} test computations failed; see failures.csv", failures.len());
    }
    let mut sources = if args.nsim > 0 { args.tests.clone() } else { Vec::new() };
    if let Some(path) = &args.visual {
        records.extend(visual_records(path, args.level)?);
        sources.push(DecisionSource::Visual);
    }
    write_records_csv(&args.out.join("records.csv"), &records)?;

    let mut fitted: Vec<(Departure, DecisionSource, PowerCurve)> = Vec::new();
    let mut summaries = Vec::new();
    let mut all_departures: Vec<Departure> = records.iter().map(|r| r.factors.departure).collect();
    all_departures.sort_by_key(|d| d.name());
    all_departures.dedup();
    for (di, &dep) in all_departures.iter().enumerate() {
        for (si, &source) in sources.iter().enumerate() {
            let subset: Vec<DecisionRecord> =
                records_for(&records, source).into_iter().filter(|r| r.factors.departure == dep).collect();
            if subset.is_empty() {
                continue;
            }
            let fit = if args.bootstrap > 0 {
                let mut rng = RandomStream::new(seed).split(1_000_000 + (di * sources.len() + si) as u64);
                bootstrap_power(&subset, args.bootstrap, &mut rng)
            } else {
                fit_power_curve(&subset)
            };
            let rejections = subset.iter().filter(|r| r.reject).count();
            match fit {
                Ok(curve) => {
                    for w in &curve.warnings {
                        eprintln!("warning: {}/{source}: {w}", dep.name());
                    }
                    summaries.push(CurveSummary {
                        departure: dep.name().into(),
                        test: source.to_string(),
                        records: subset.len(),
                        rejections,
                        beta1: Some(curve.beta1),
                        std_error: Some(curve.std_error),
                        bootstrap_interval: curve.bootstrap_quantile(0.025).zip(curve.bootstrap_quantile(0.975)),
                        warnings: curve.warnings.clone(),
                        error: None,
                    });
                    fitted.push((dep, source, curve));
                }
                Err(e) => {
                    eprintln!("warning: {}/{source}: no curve: {e}", dep.name());
                    summaries.push(CurveSummary {
                        departure: dep.name().into(),
                        test: source.to_string(),
                        records: subset.len(),
                        rejections,
                        beta1: None,
                        std_error: None,
                        bootstrap_interval: None,
                        warnings: Vec::new(),
                        error: Some(e.code().into()),
                    });
                }
            }
        }
    }

    let labelled: Vec<(String, &PowerCurve)> =
        fitted.iter().map(|(d, s, c)| (format!("{}/{s}", d.name()), c)).collect();
    write_curves_csv(&args.out.join("curves.csv"), &labelled)?;
    for &dep in &all_departures {
        let curves: Vec<(String, &PowerCurve)> =
            fitted.iter().filter(|(d, ..)| *d == dep).map(|(_, s, c)| (s.to_string(), c)).collect();
        let dots: Vec<DecisionRecord> =
            records_for(&records, DecisionSource::Visual).into_iter().filter(|r| r.factors.departure == dep).collect();
        let svg = render_power_chart(&curves, &dots);
        write_atomic(&args.out.join(format!("power_{}.svg", dep.name())), svg.as_bytes())?;
    }

    println!("{:<20} {:<8} {:>8} {:>8} {:>10} {:>10}", "departure", "test", "records", "rejects", "beta1", "se");
    for s in &summaries {
        let num = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
        println!(
            "{:<20} {:<8} {:>8} {:>8} {:>10} {:>10}{}",
            s.departure,
            s.test,
            s.records,
            s.rejections,
            num(s.beta1),
            num(s.std_error),
            s.error.as_deref().map(|c| format!("  {c}")).unwrap_or_default()
        );
    }
    let summary = PowerSummary { cells: cells.len(), records: records.len(), failures: failures.len(), curves: summaries };
    let text = serde_json::to_string_pretty(&summary)?;
    write_atomic(&args.out.join("summary.json"), format!("{text}\n").as_bytes())?;
    if fitted.is_empty() {
        return Err(Error::InsufficientData("no power curve could be fitted".into()).into());
    }

    let mut manifest = RunManifest::new("power", &args, args.seed)?;
    if let Some(path) = &args.visual {
        manifest = manifest.input(path)?;
    }
    manifest.write(&args.out)
}

#[derive(Debug, Args, Serialize)]
pub struct ReportArgs {
    /// `pvalues.csv` from the pvalue command.
    #[arg(long)]
    pub pvalues: PathBuf,
    /// Conventional tests to compare with the visual test.
    #[arg(long, value_delimiter = ',', default_value = "RESET,BP,SW")]
    pub tests: Vec<TestKind>,
    /// Level applied to both the conventional and the visual p-values.
    #[arg(long, default_value_t = NOMINAL_LEVEL)]
    pub level: f64,
    /// Also write agreement.json here.
    #[arg(short, long, env = "VISLINEUP_OUT")]
    pub out: Option<PathBuf>,
}

#[derive(Serialize)]
struct TestAgreement {
    test: TestKind,
    #[serde(flatten)]
    table: AgreementTable,
}

fn rate(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.3}"))
}

pub fn report(args: ReportArgs) -> CliResult<()> {
    let rows = read_pvalues(&args.pvalues)?;
    let mut tables = Vec::new();
    for &test in &args.tests {
        let conv: BTreeMap<String, f64> =
            rows.iter().filter_map(|r| r.conventional(test).map(|p| (r.lineup_id.clone(), p))).collect();
        let vis: BTreeMap<String, f64> =
            rows.iter().filter(|r| conv.contains_key(&r.lineup_id)).map(|r| (r.lineup_id.clone(), r.p_value)).collect();
        let t = agreement_report(&conv, &vis, args.level)?;
        println!("{test} vs visual, level {}, {} lineups", args.level, t.total);
        println!("  {:<22} {:>14} {:>14}", "", "visual reject", "visual accept");
        println!("  {:<22} {:>14} {:>14}", format!("{test} reject"), t.counts[1][1], t.counts[1][0]);
        println!("  {:<22} {:>14} {:>14}", format!("{test} accept"), t.counts[0][1], t.counts[0][0]);
        println!("  conventional reject rate        {:.3}", t.conventional_reject_rate);
        println!("  visual reject rate              {:.3}", t.visual_reject_rate);
        println!("  visual | conventional reject    {}", rate(t.visual_given_conventional_reject));
        println!("  visual | conventional accept    {}", rate(t.visual_given_conventional_accept));
        println!("  conventional | visual reject    {}", rate(t.conventional_given_visual_reject));
        println!("  {:>10} {:>10} {:>10} {:>10} {:>10}", "conv level", "conv rate", "vis|conv", "conv|vis", "agree");
        for s in &t.sweep {
            println!(
                "  {:>10} {:>10.3} {:>10} {:>10} {:>10.3}",
                fmt_p(s.conventional_level),
                s.conventional_reject_rate,
                rate(s.visual_given_conventional_reject),
                rate(s.conventional_given_visual_reject),
                s.agreement
            );
        }
        println!();
        tables.push(TestAgreement { test, table: t });
    }
    if let Some(out) = &args.out {
        let text = serde_json::to_string_pretty(&tables)?;
        write_atomic(&out.join("agreement.json"), format!("{text}\n").as_bytes())?;
        RunManifest::new("report", &args, None)?.input(&args.pvalues)?.write(out)?;
    }
    Ok(())
}
