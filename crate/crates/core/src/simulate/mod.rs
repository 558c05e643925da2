//! Data generation for the two departure models (omitted Hermite term and
//! predictor-dependent error variance), the four predictor distributions,
//! and null residuals by residual rotation.

mod io;

pub use io::{dataset_from_parts, load_dataset, save_dataset, DatasetManifest, DATA_FILE, MANIFEST_FILE};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{DesignMatrix, RandomStream};

/// Highest Hermite order accepted by [`hermite`].
pub const MAX_HERMITE_ORDER: u32 = 30;

/// Retries for the probability-zero event of an all-zero rotated draw.
const NULL_DRAW_ATTEMPTS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Departure {
    NonLinearity,
    Heteroskedasticity,
}

impl Departure {
    pub fn name(self) -> &'static str {
        match self {
            Departure::NonLinearity => "non_linearity",
            Departure::Heteroskedasticity => "heteroskedasticity",
        }
    }
}

impl std::str::FromStr for Departure {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "non_linearity" | "nonlinear" | "nonlinearity" => Ok(Departure::NonLinearity),
            "heteroskedasticity" | "heteroskedastic" => Ok(Departure::Heteroskedasticity),
            _ => Err(Error::InvalidArgument(format!("unknown departure `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PredictorDist {
    Uniform,
    Normal,
    Skewed,
    Discrete,
}

impl PredictorDist {
    pub const ALL: [PredictorDist; 4] = [
        PredictorDist::Uniform,
        PredictorDist::Normal,
        PredictorDist::Skewed,
        PredictorDist::Discrete,
    ];

    pub fn name(self) -> &'static str {
        match self {
            PredictorDist::Uniform => "uniform",
            PredictorDist::Normal => "normal",
            PredictorDist::Skewed => "skewed",
            PredictorDist::Discrete => "discrete",
        }
    }
}

impl std::str::FromStr for PredictorDist {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PredictorDist::ALL
            .into_iter()
            .find(|d| d.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown predictor distribution `{s}`")))
    }
}

/// One cell of the experimental design.
///
/// `j` and `sigma` belong to the non-linearity model, `a` and `b` to the
/// heteroskedasticity model; the fields of the other model are `None`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExperimentFactors {
    pub departure: Departure,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub j: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a: Option<i32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<f64>,
    pub n: usize,
    pub dist: PredictorDist,
}

impl ExperimentFactors {
    pub const J_LEVELS: [u32; 4] = [2, 3, 6, 18];
    pub const SIGMA_LEVELS: [f64; 4] = [0.25, 1.0, 2.0, 4.0];
    pub const A_LEVELS: [i32; 3] = [-1, 0, 1];
    pub const B_LEVELS: [f64; 5] = [0.25, 1.0, 4.0, 16.0, 64.0];
    pub const N_LEVELS: [usize; 3] = [50, 100, 300];

    pub fn nonlinear(j: u32, sigma: f64, n: usize, dist: PredictorDist) -> Self {
        Self { departure: Departure::NonLinearity, j: Some(j), sigma: Some(sigma), a: None, b: None, n, dist }
    }

    pub fn heteroskedastic(a: i32, b: f64, n: usize, dist: PredictorDist) -> Self {
        Self { departure: Departure::Heteroskedasticity, j: None, sigma: None, a: Some(a), b: Some(b), n, dist }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(Error::InvalidArgument(format!("n must be at least 3, got {}", self.n)));
        }
        match self.departure {
            Departure::NonLinearity => {
                let j = self.j.ok_or_else(|| Error::InvalidArgument("non-linearity needs j".into()))?;
                if j > MAX_HERMITE_ORDER {
                    return Err(Error::OrderTooLarge(j));
                }
                let sigma = self.sigma.ok_or_else(|| Error::InvalidArgument("non-linearity needs sigma".into()))?;
                if !(sigma >= 0.0 && sigma.is_finite()) {
                    return Err(Error::InvalidArgument(format!("sigma must be >= 0, got {sigma}")));
                }
            }
            Departure::Heteroskedasticity => {
                let a = self.a.ok_or_else(|| Error::InvalidArgument("heteroskedasticity needs a".into()))?;
                if !(-1..=1).contains(&a) {
                    return Err(Error::InvalidArgument(format!("shape a must be -1, 0 or 1, got {a}")));
                }
                let b = self.b.ok_or_else(|| Error::InvalidArgument("heteroskedasticity needs b".into()))?;
                if !(b > 0.0 && b.is_finite()) {
                    return Err(Error::InvalidArgument(format!("ratio b must be > 0, got {b}")));
                }
            }
        }
        Ok(())
    }

    /// Short stable label, e.g. `nonlinear_j3_s1.5_n300_uniform`.
    pub fn label(&self) -> String {
        match self.departure {
            Departure::NonLinearity => format!(
                "nonlinear_j{}_s{}_n{}_{}",
                self.j.unwrap_or(0),
                self.sigma.unwrap_or(0.0),
                self.n,
                self.dist.name()
            ),
            Departure::Heteroskedasticity => format!(
                "heteroskedastic_a{}_b{}_n{}_{}",
                self.a.unwrap_or(0),
                self.b.unwrap_or(0.0),
                self.n,
                self.dist.name()
            ),
        }
    }
}

/// A simulated regression dataset together with the true-model pieces the
/// effect size needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulatedDataset {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// Omitted-term columns `Z`; empty for heteroskedastic data.
    pub z_design: Vec<Vec<f64>>,
    pub beta_z: Vec<f64>,
    /// Diagonal of the true error covariance.
    pub variances: Vec<f64>,
    /// Error variance assumed under the null model.
    pub sigma2: f64,
    pub factors: ExperimentFactors,
    pub seed: u64,
}

impl SimulatedDataset {
    pub fn design(&self) -> Result<DesignMatrix> {
        DesignMatrix::simple(&self.x)
    }

    /// Mean-curve contribution `Z beta_z` per observation.
    pub fn omitted_mean(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.x.len()];
        for (col, b) in self.z_design.iter().zip(&self.beta_z) {
            for (o, z) in out.iter_mut().zip(col) {
                *o += z * b;
            }
        }
        out
    }
}

/// Residual vector simulated under the null model.
#[derive(Debug, Clone, PartialEq)]
pub struct NullResiduals {
    pub values: Vec<f64>,
    pub source_rss: f64,
}

pub fn sample_predictor(dist: PredictorDist, n: usize, rng: &mut RandomStream) -> Result<Vec<f64>> {
    if n < 3 {
        return Err(Error::InvalidArgument(format!("n must be at least 3, got {n}")));
    }
    let x = (0..n)
        .map(|_| match dist {
            PredictorDist::Uniform => rng.uniform_range(-1.0, 1.0),
            PredictorDist::Normal => 0.3 * rng.normal(),
            PredictorDist::Skewed => (0.6 * rng.normal()).exp() / 3.0,
            PredictorDist::Discrete => {
                if rng.below(2) == 0 {
                    -1.0
                } else {
                    1.0
                }
            }
        })
        .collect();
    Ok(x)
}

/// Probabilists' Hermite polynomial `He_j(t)`.
pub fn hermite(j: u32, t: f64) -> Result<f64> {
    if j > MAX_HERMITE_ORDER {
        return Err(Error::OrderTooLarge(j));
    }
    let (mut prev, mut cur) = (1.0, t);
    if j == 0 {
        return Ok(prev);
    }
    for k in 1..j {
        let next = t * cur - k as f64 * prev;
        prev = cur;
        cur = next;
    }
    Ok(cur)
}

/// Half-width of the interval the predictor range is mapped onto before
/// evaluating `He_j`, chosen so the curve shows 1, 2, 3 and 5 interior
/// extrema for j = 2, 3, 6, 18 ("U", "S", "M", "triple-U").
pub fn hermite_window(j: u32) -> f64 {
    match j {
        6 => 2.2,
        _ => 2.0,
    }
}

/// Standardized omitted curve `g(x)`: `He_j` on the windowed predictor,
/// centred and scaled to unit variance over the sample.
pub fn nonlinear_mean(j: u32, x: &[f64]) -> Result<Vec<f64>> {
    let (lo, hi) = min_max(x);
    let w = hermite_window(j);
    let raw: Vec<f64> = if hi > lo {
        x.iter()
            .map(|&v| hermite(j, -w + 2.0 * w * (v - lo) / (hi - lo)))
            .collect::<Result<_>>()?
    } else {
        vec![0.0; x.len()]
    };
    Ok(standardize(&raw))
}

fn standardize(v: &[f64]) -> Vec<f64> {
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n;
    let scale = v.iter().fold(0.0f64, |m, a| m.max(a.abs()));
    if var.sqrt() <= 1e-12 * scale.max(f64::MIN_POSITIVE) {
        return vec![0.0; v.len()];
    }
    let sd = var.sqrt();
    v.iter().map(|a| (a - mean) / sd).collect()
}

fn min_max(x: &[f64]) -> (f64, f64) {
    x.iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

fn shape_profile(a: i32, t: f64) -> f64 {
    match a {
        -1 => (1.0 + t) / 2.0,
        1 => (1.0 - t) / 2.0,
        _ => t.abs(),
    }
}

/// Error variances `v(x) = 1 + (b - 1) h_a(t)^2` where `t` is the predictor
/// rescaled to `[-1, 1]` and `h_a` the shape profile rescaled to span
/// exactly `[0, 1]` over the sample, so `max v / min v = max(b, 1/b)`.
/// Squaring the profile makes the error SD grow roughly linearly, which
/// gives the triangle and butterfly silhouettes straight edges.
///
/// A discrete predictor is evaluated at its support points directly.
pub fn variance_profile(a: i32, b: f64, x: &[f64], dist: PredictorDist) -> Result<Vec<f64>> {
    let h: Vec<f64> = if dist == PredictorDist::Discrete {
        x.iter().map(|&t| shape_profile(a, t.clamp(-1.0, 1.0))).collect()
    } else {
        let (lo, hi) = min_max(x);
        if !(hi > lo) {
            return Err(Error::DegenerateRange);
        }
        let raw: Vec<f64> = x
            .iter()
            .map(|&v| shape_profile(a, -1.0 + 2.0 * (v - lo) / (hi - lo)))
            .collect();
        let (hlo, hhi) = min_max(&raw);
        raw.iter().map(|&r| (r - hlo) / (hhi - hlo)).collect()
    };
    Ok(h.iter().map(|&hv| 1.0 + (b - 1.0) * hv * hv).collect())
}

pub fn gen_nonlinear(factors: &ExperimentFactors, rng: &mut RandomStream) -> Result<SimulatedDataset> {
    factors.validate()?;
    if factors.departure != Departure::NonLinearity {
        return Err(Error::InvalidArgument("factors describe a heteroskedastic model".into()));
    }
    let j = factors.j.unwrap_or(2);
    let sigma = factors.sigma.unwrap_or(1.0);
    let x = sample_predictor(factors.dist, factors.n, rng)?;
    let g = nonlinear_mean(j, &x)?;
    let y = x
        .iter()
        .zip(&g)
        .map(|(&xi, &gi)| xi + gi + sigma * rng.normal())
        .collect();
    let s2 = sigma * sigma;
    Ok(SimulatedDataset {
        variances: vec![s2; x.len()],
        x,
        y,
        z_design: vec![g],
        beta_z: vec![1.0],
        sigma2: s2,
        factors: *factors,
        seed: rng.seed(),
    })
}

pub fn gen_heteroskedastic(factors: &ExperimentFactors, rng: &mut RandomStream) -> Result<SimulatedDataset> {
    factors.validate()?;
    if factors.departure != Departure::Heteroskedasticity {
        return Err(Error::InvalidArgument("factors describe a non-linear model".into()));
    }
    let x = sample_predictor(factors.dist, factors.n, rng)?;
    let v = variance_profile(factors.a.unwrap_or(0), factors.b.unwrap_or(1.0), &x, factors.dist)?;
    let y = x
        .iter()
        .zip(&v)
        .map(|(&xi, &vi)| xi + vi.sqrt() * rng.normal())
        .collect();
    let sigma2 = v.iter().sum::<f64>() / v.len() as f64;
    Ok(SimulatedDataset {
        x,
        y,
        z_design: Vec::new(),
        beta_z: Vec::new(),
        variances: v,
        sigma2,
        factors: *factors,
        seed: rng.seed(),
    })
}

/// Dispatches on the departure type.
pub fn simulate(factors: &ExperimentFactors, rng: &mut RandomStream) -> Result<SimulatedDataset> {
    match factors.departure {
        Departure::NonLinearity => gen_nonlinear(factors, rng),
        Departure::Heteroskedasticity => gen_heteroskedastic(factors, rng),
    }
}

/// Residual rotation: project standard normal draws through the residual
/// operator and rescale to the observed residual sum of squares.
pub fn gen_null_residuals(x: &DesignMatrix, rss_obs: f64, rng: &mut RandomStream) -> Result<NullResiduals> {
    if !(rss_obs >= 0.0 && rss_obs.is_finite()) {
        return Err(Error::InvalidArgument(format!("rss must be finite and >= 0, got {rss_obs}")));
    }
    let n = x.nrows();
    for _ in 0..NULL_DRAW_ATTEMPTS {
        let w: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let e = x.residualize(&w);
        let ss: f64 = e.iter().map(|v| v * v).sum();
        if ss > 0.0 {
            let scale = (rss_obs / ss).sqrt();
            return Ok(NullResiduals {
                values: e.iter().map(|v| v * scale).collect(),
                source_rss: rss_obs,
            });
        }
    }
    Err(Error::DegenerateDraw(NULL_DRAW_ATTEMPTS))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::ols_fit;

    #[test]
    fn hermite_values() {
        assert_eq!(hermite(2, 2.0).unwrap(), 3.0);
        assert_eq!(hermite(0, 123.4).unwrap(), 1.0);
        assert_eq!(hermite(6, 1.0).unwrap(), 16.0);
        assert!(matches!(hermite(31, 0.0), Err(Error::OrderTooLarge(31))));
    }

    #[test]
    fn hermite_matches_expansion() {
        // He_6(t) = t^6 - 15 t^4 + 45 t^2 - 15
        for &t in &[-2.3f64, -0.4, 0.0, 0.9, 1.7] {
            let direct = t.powi(6) - 15.0 * t.powi(4) + 45.0 * t * t - 15.0;
            assert!((hermite(6, t).unwrap() - direct).abs() < 1e-10);
        }
    }

    fn interior_extrema(j: u32) -> usize {
        let grid: Vec<f64> = (0..=4000).map(|i| -1.0 + 2.0 * i as f64 / 4000.0).collect();
        let g = nonlinear_mean(j, &grid).unwrap();
        let d: Vec<f64> = g.windows(2).map(|w| w[1] - w[0]).collect();
        d.windows(2).filter(|w| w[0].signum() != w[1].signum()).count()
    }

    #[test]
    fn window_constants_give_the_shape_extrema() {
        assert_eq!(interior_extrema(2), 1);
        assert_eq!(interior_extrema(3), 2);
        assert_eq!(interior_extrema(6), 3);
        assert_eq!(interior_extrema(18), 5);
    }

    #[test]
    fn discrete_support() {
        let mut rng = RandomStream::new(1);
        let x = sample_predictor(PredictorDist::Discrete, 100, &mut rng).unwrap();
        assert!(x.iter().all(|&v| v == -1.0 || v == 1.0));
    }

    #[test]
    fn uniform_support_and_mean() {
        let mut rng = RandomStream::new(2);
        let x = sample_predictor(PredictorDist::Uniform, 100_000, &mut rng).unwrap();
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        assert!(mean.abs() < 0.02);
        assert!(x.iter().all(|&v| (-1.0..=1.0).contains(&v)));
    }

    #[test]
    fn skewed_is_right_skewed() {
        let mut rng = RandomStream::new(3);
        let x = sample_predictor(PredictorDist::Skewed, 100_000, &mut rng).unwrap();
        let n = x.len() as f64;
        let m = x.iter().sum::<f64>() / n;
        let m2 = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
        let m3 = x.iter().map(|v| (v - m).powi(3)).sum::<f64>() / n;
        assert!(m3 / m2.powf(1.5) > 0.5);
    }

    #[test]
    fn too_few_observations() {
        let mut rng = RandomStream::new(0);
        assert!(sample_predictor(PredictorDist::Uniform, 2, &mut rng).is_err());
    }

    #[test]
    fn noiseless_true_model_fits_exactly() {
        let f = ExperimentFactors::nonlinear(3, 0.0, 100, PredictorDist::Uniform);
        let ds = gen_nonlinear(&f, &mut RandomStream::new(5)).unwrap();
        let d = DesignMatrix::with_intercept(&[&ds.x, &ds.z_design[0]]).unwrap();
        let fit = ols_fit(&d, &ds.y).unwrap();
        assert!(fit.rss < 1e-20);
    }

    #[test]
    fn u_shape_residuals_have_one_turning_point() {
        let f = ExperimentFactors::nonlinear(2, 0.0, 300, PredictorDist::Uniform);
        let ds = gen_nonlinear(&f, &mut RandomStream::new(8)).unwrap();
        let fit = ols_fit(&ds.design().unwrap(), &ds.y).unwrap();
        let mut pairs: Vec<(f64, f64)> = ds.x.iter().copied().zip(fit.residuals).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        // Smooth with bins of 30 and count sign changes of the differences.
        let smooth: Vec<f64> = pairs.chunks(30).map(|c| c.iter().map(|p| p.1).sum::<f64>() / c.len() as f64).collect();
        let d: Vec<f64> = smooth.windows(2).map(|w| w[1] - w[0]).collect();
        let changes = d.windows(2).filter(|w| w[0].signum() != w[1].signum()).count();
        assert_eq!(changes, 1);
    }

    #[test]
    fn heteroskedastic_ratio_is_exact() {
        for a in [-1, 0, 1] {
            for b in [0.25, 4.0, 64.0] {
                let f = ExperimentFactors::heteroskedastic(a, b, 100, PredictorDist::Uniform);
                let ds = gen_heteroskedastic(&f, &mut RandomStream::new(13)).unwrap();
                let (lo, hi) = min_max(&ds.variances);
                let want = if b >= 1.0 { b } else { 1.0 / b };
                assert!((hi / lo - want).abs() < 1e-9 * want, "a={a} b={b}");
                assert!(ds.z_design.is_empty() && ds.beta_z.is_empty());
            }
        }
    }

    #[test]
    fn unit_ratio_is_homoskedastic() {
        let f = ExperimentFactors::heteroskedastic(0, 1.0, 50, PredictorDist::Normal);
        let ds = gen_heteroskedastic(&f, &mut RandomStream::new(4)).unwrap();
        assert!(ds.variances.iter().all(|&v| v == 1.0));
    }

    #[test]
    fn mirrored_shapes_share_variances() {
        let mut rng = RandomStream::new(21);
        let x = sample_predictor(PredictorDist::Uniform, 60, &mut rng).unwrap();
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let mut left = variance_profile(-1, 16.0, &x, PredictorDist::Uniform).unwrap();
        let mut right = variance_profile(1, 16.0, &neg, PredictorDist::Uniform).unwrap();
        left.sort_by(f64::total_cmp);
        right.sort_by(f64::total_cmp);
        for (l, r) in left.iter().zip(&right) {
            assert!((l - r).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_predictor_has_no_variance_function() {
        let x = vec![0.3; 10];
        assert!(matches!(variance_profile(1, 4.0, &x, PredictorDist::Uniform), Err(Error::DegenerateRange)));
        let d = vec![1.0; 10];
        assert!(variance_profile(1, 4.0, &d, PredictorDist::Discrete).is_ok());
    }

    #[test]
    fn butterfly_is_wider_at_the_edges() {
        let f = ExperimentFactors::heteroskedastic(0, 64.0, 300, PredictorDist::Uniform);
        let mut ratio_sum = 0.0;
        let reps = 200;
        for s in 0..reps {
            let ds = gen_heteroskedastic(&f, &mut RandomStream::new(s)).unwrap();
            let fit = ols_fit(&ds.design().unwrap(), &ds.y).unwrap();
            let mut pairs: Vec<(f64, f64)> = ds.x.iter().copied().zip(fit.residuals).collect();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            let sd = |s: &[(f64, f64)]| (s.iter().map(|p| p.1 * p.1).sum::<f64>() / s.len() as f64).sqrt();
            let dec = pairs.len() / 10;
            let outer: Vec<(f64, f64)> = pairs[..dec].iter().chain(&pairs[pairs.len() - dec..]).copied().collect();
            let inner = &pairs[pairs.len() / 2 - dec / 2..pairs.len() / 2 + dec / 2];
            ratio_sum += sd(&outer) / sd(inner);
        }
        assert!(ratio_sum / reps as f64 > 4.0, "{}", ratio_sum / reps as f64);
    }

    #[test]
    fn null_residuals_contract() {
        let mut rng = RandomStream::new(30);
        let x = sample_predictor(PredictorDist::Uniform, 40, &mut rng).unwrap();
        let d = DesignMatrix::simple(&x).unwrap();
        let zero = gen_null_residuals(&d, 0.0, &mut rng).unwrap();
        assert!(zero.values.iter().all(|&v| v == 0.0));
        let e = gen_null_residuals(&d, 12.5, &mut rng).unwrap();
        let ss: f64 = e.values.iter().map(|v| v * v).sum();
        assert!((ss - 12.5).abs() < 1e-8 * 12.5);
        let xte0: f64 = e.values.iter().sum();
        let xte1: f64 = e.values.iter().zip(&x).map(|(a, b)| a * b).sum();
        assert!(xte0.abs() < 1e-8 && xte1.abs() < 1e-8);
    }

    #[test]
    fn null_residual_variance_follows_projection() {
        let mut rng = RandomStream::new(31);
        let n = 100;
        let x = sample_predictor(PredictorDist::Skewed, n, &mut rng).unwrap();
        let d = DesignMatrix::simple(&x).unwrap();
        let rss = 50.0;
        let draws = 2000;
        let mut sumsq = vec![0.0; n];
        for _ in 0..draws {
            let e = gen_null_residuals(&d, rss, &mut rng).unwrap();
            for (s, v) in sumsq.iter_mut().zip(&e.values) {
                *s += v * v;
            }
        }
        let lev = d.leverages();
        for i in 0..n {
            let want = (1.0 - lev[i]) * rss / (n - 2) as f64;
            let got = sumsq[i] / draws as f64;
            assert!((got / want - 1.0).abs() < 0.15, "i = {i}: {got} vs {want}");
        }
    }

    #[test]
    fn seed_determinism() {
        let f = ExperimentFactors::nonlinear(6, 1.0, 100, PredictorDist::Skewed);
        let a = simulate(&f, &mut RandomStream::new(77)).unwrap();
        let b = simulate(&f, &mut RandomStream::new(77)).unwrap();
        assert_eq!(a, b);
    }
}
