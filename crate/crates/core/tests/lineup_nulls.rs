use vislineup::conventional::{test_battery, TestKind};
use vislineup::lineup::make_lineup;
use vislineup::numerics::{ols_fit, DesignMatrix, RandomStream};
use vislineup::simulate::{simulate, ExperimentFactors, PredictorDist};

/// Kolmogorov-Smirnov distance of a sample from U(0, 1).
fn ks_uniform(mut p: Vec<f64>) -> f64 {
    p.sort_by(f64::total_cmp);
    let n = p.len() as f64;
    p.iter()
        .enumerate()
        .map(|(i, &v)| (v - i as f64 / n).max((i + 1) as f64 / n - v))
        .fold(0.0, f64::max)
}

#[test]
fn null_panels_look_like_good_residuals() {
    let mut pvals: Vec<Vec<f64>> = vec![Vec::new(); 3];
    for seed in 0..100u64 {
        let f = ExperimentFactors::nonlinear(3, 1.0, 100, PredictorDist::Uniform);
        let ds = simulate(&f, &mut RandomStream::new(seed)).unwrap();
        let bundle = make_lineup(&ds, 20, &mut RandomStream::new(seed).split(1)).unwrap();
        let design = DesignMatrix::simple(&ds.x).unwrap();
        for (i, panel) in bundle.panels.iter().enumerate() {
            if i + 1 == bundle.data_position {
                continue;
            }
            // Null data share the observed fit, so refitting returns the panel.
            let y: Vec<f64> = panel.fitted.iter().zip(&panel.residuals).map(|(f, e)| f + e).collect();
            let fit = ols_fit(&design, &y).unwrap();
            for (k, (kind, r)) in test_battery(&fit, &design).into_iter().enumerate() {
                assert_eq!(kind, TestKind::ALL[k]);
                pvals[k].push(r.unwrap().p_value);
            }
        }
    }
    for (k, p) in pvals.into_iter().enumerate() {
        let n = p.len() as f64;
        let d = ks_uniform(p);
        // Asymptotic 1% critical value.
        assert!(d < 1.628 / n.sqrt(), "{}: D = {d}", TestKind::ALL[k]);
    }
}
