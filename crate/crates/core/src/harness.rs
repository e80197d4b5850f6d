//! The verification harness: compute the eleven quantified features of a
//! return series, simulate the model under test, and report one- and
//! two-sided Monte-Carlo p-values.
//!
//! Two independent simulation batches of size nsim are drawn. Batch 1
//! provides the single-stage feature distributions and the reference means
//! (mean ACF of |r|, componentwise mean order statistics qm); batch 2
//! provides the reference distributions of the two-stage features (5, 10,
//! 11), which therefore never reuse a batch-1 simulation.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kuiper::{kuiper_asymmetry, kuiper_distance};
use crate::model::ReturnGenerator;
use crate::multiscale::{build_interval_family, estimate_with_family, IntervalFamily};
use crate::seeding;
use crate::series::ReturnSeries;
use crate::stats::{
    abs_moments, acf, d_acf, end_return, heavy_tail_measure, quantile_sorted, sign_acf1, AcfCurve,
};

/// min of the lower and upper exceedance fractions, ties counting on both
/// sides, capped at the two-sided maximum 1/2.
pub fn two_sided_pvalue(empirical: f64, sims: &[f64]) -> f64 {
    debug_assert!(!sims.is_empty());
    let n = sims.len() as f64;
    let p1 = sims.iter().filter(|s| **s <= empirical).count() as f64 / n;
    let p2 = sims.iter().filter(|s| **s >= empirical).count() as f64 / n;
    p1.min(p2).min(0.5)
}

/// Fraction of simulated values at least as large as the empirical one.
pub fn one_sided_pvalue(empirical: f64, sims: &[f64]) -> f64 {
    debug_assert!(!sims.is_empty());
    sims.iter().filter(|s| **s >= empirical).count() as f64 / sims.len() as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sided {
    One,
    Two,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureValue {
    pub id: u8,
    pub name: String,
    pub empirical: f64,
    pub sim_q05: f64,
    pub sim_mean: f64,
    pub sim_q95: f64,
    pub sim_sd: f64,
    pub p_value: f64,
    pub sided: Sided,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FeatureReport {
    pub features: Vec<FeatureValue>,
    pub model_label: String,
    pub data_label: String,
    pub n: usize,
    pub nsim: usize,
    pub master_seed: u64,
    pub acf_lags: usize,
    pub alpha_n: f64,
    /// |r| autocorrelation of the data, lags 1..acf_lags.
    pub data_abs_acf: Vec<f64>,
    /// Batch-1 mean |r| autocorrelation of the model.
    pub mean_abs_acf: Vec<f64>,
}

impl FeatureReport {
    pub fn min_p(&self) -> f64 {
        self.features
            .iter()
            .map(|f| f.p_value)
            .fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct HarnessConfig {
    /// Simulations per batch (two batches are drawn).
    pub nsim: usize,
    /// ACF lags for the slow-decay feature.
    pub acf_lags: usize,
    /// Segmentation level used for the clustering feature, shared by the
    /// data and every simulation.
    pub alpha_n: f64,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            nsim: 1000,
            acf_lags: 1500,
            alpha_n: 0.9999993,
        }
    }
}

/// Everything the harness needs from one series.
struct SeriesStats {
    sign_acf1: f64,
    heavy_tail: f64,
    kuiper_asym: f64,
    seg_count: f64,
    abs_acf: AcfCurve,
    abs_acf1: f64,
    end_ret: f64,
    mean_abs: f64,
    mean_sq: f64,
    sorted: Vec<f64>,
}

fn series_stats(
    series: &ReturnSeries,
    family: &IntervalFamily,
    cfg: &HarnessConfig,
) -> Result<SeriesStats> {
    let abs: Vec<f64> = series.values().iter().map(|v| v.abs()).collect();
    let abs_acf = acf(&abs, cfg.acf_lags)?;
    let abs_acf1 = abs_acf.values[0];
    let (mean_abs, mean_sq) = abs_moments(series);
    let (kuiper_asym, _) = kuiper_asymmetry(series)?;
    let seg_count = estimate_with_family(series, family, cfg.alpha_n)?.num_intervals() as f64;
    let mut sorted = series.values().to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(SeriesStats {
        sign_acf1: sign_acf1(series)?,
        heavy_tail: heavy_tail_measure(series)?,
        kuiper_asym,
        seg_count,
        abs_acf,
        abs_acf1,
        end_ret: end_return(series)?,
        mean_abs,
        mean_sq,
        sorted,
    })
}

fn summary(sims: &[f64]) -> (f64, f64, f64, f64) {
    let mut sorted = sims.to_vec();
    sorted.sort_by(f64::total_cmp);
    let q05 = quantile_sorted(&sorted, 0.05);
    let q95 = quantile_sorted(&sorted, 0.95);
    let mean = sims.iter().sum::<f64>() / sims.len() as f64;
    let var = sims.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / sims.len() as f64;
    (q05, mean, q95, var.sqrt())
}

fn feature(
    id: u8,
    name: &str,
    empirical: f64,
    sims: &[f64],
    sided: Sided,
) -> FeatureValue {
    let (sim_q05, sim_mean, sim_q95, sim_sd) = summary(sims);
    let p_value = match sided {
        Sided::Two => two_sided_pvalue(empirical, sims),
        Sided::One => one_sided_pvalue(empirical, sims),
    };
    FeatureValue {
        id,
        name: name.to_string(),
        empirical,
        sim_q05,
        sim_mean,
        sim_q95,
        sim_sd,
        p_value,
        sided,
    }
}

/// Score a model against the data on the eleven features. Deterministic
/// for fixed (data, model, cfg, master_seed) regardless of worker count.
pub fn evaluate_features(
    data: &ReturnSeries,
    model: &dyn ReturnGenerator,
    cfg: &HarnessConfig,
    master_seed: u64,
) -> Result<FeatureReport> {
    if cfg.nsim < 100 {
        return Err(Error::Config(format!(
            "nsim must be at least 100, got {}",
            cfg.nsim
        )));
    }
    let n = data.len();
    if n <= cfg.acf_lags {
        return Err(Error::Config(format!(
            "series length {n} must exceed acf_lags {}",
            cfg.acf_lags
        )));
    }
    if !(0.0 < cfg.alpha_n && cfg.alpha_n < 1.0) {
        return Err(Error::Config("alpha_n must be in (0,1)".into()));
    }

    let family = build_interval_family(n);
    let emp = series_stats(data, &family, cfg)?;

    let simulate = |batch: u64, index: usize| -> Result<ReturnSeries> {
        let seed = seeding::derive_seed(master_seed, &[batch, index as u64]);
        let mut s = model.generate(n, seed)?;
        s.kind = data.kind;
        Ok(s)
    };

    // batch 1: single-stage feature distributions and the reference means
    let batch1: Vec<SeriesStats> = (0..cfg.nsim)
        .into_par_iter()
        .map(|i| {
            let s = simulate(1, i)?;
            series_stats(&s, &family, cfg).map_err(|e| Error::ModelFailure {
                seed: seeding::derive_seed(master_seed, &[1, i as u64]),
                msg: e.to_string(),
            })
        })
        .collect::<Result<_>>()?;

    let lags = cfg.acf_lags;
    let mut mean_acf = vec![0.0f64; lags];
    let mut qm = vec![0.0f64; n];
    for s in &batch1 {
        for (acc, v) in mean_acf.iter_mut().zip(&s.abs_acf.values) {
            *acc += v;
        }
        for (acc, v) in qm.iter_mut().zip(&s.sorted) {
            *acc += v;
        }
    }
    let nsim_f = cfg.nsim as f64;
    for v in mean_acf.iter_mut() {
        *v /= nsim_f;
    }
    for v in qm.iter_mut() {
        *v /= nsim_f;
    }
    let mean_acf = AcfCurve { values: mean_acf };

    // batch 2: reference distributions for the two-stage features
    let batch2: Vec<(f64, f64, f64)> = (0..cfg.nsim)
        .into_par_iter()
        .map(|i| -> Result<(f64, f64, f64)> {
            let s = simulate(2, i)?;
            let fail = |e: Error| Error::ModelFailure {
                seed: seeding::derive_seed(master_seed, &[2, i as u64]),
                msg: e.to_string(),
            };
            let abs: Vec<f64> = s.values().iter().map(|v| v.abs()).collect();
            let a = acf(&abs, lags).map_err(fail)?;
            let d = d_acf(&a, &mean_acf).map_err(fail)?;
            let mut sorted = s.values().to_vec();
            sorted.sort_by(f64::total_cmp);
            let qmad = crate::stats::quantile_mad(&sorted, &qm).map_err(fail)?;
            let ku = kuiper_distance(&sorted, &qm).map_err(fail)?;
            Ok((d, qmad, ku))
        })
        .collect::<Result<_>>()?;

    let d_emp = d_acf(&emp.abs_acf, &mean_acf)?;
    let qmad_emp = crate::stats::quantile_mad(&emp.sorted, &qm)?;
    let kuiper_emp = kuiper_distance(&emp.sorted, &qm)?;

    let pull = |f: fn(&SeriesStats) -> f64| -> Vec<f64> { batch1.iter().map(f).collect() };
    let d_sims: Vec<f64> = batch2.iter().map(|t| t.0).collect();
    let qmad_sims: Vec<f64> = batch2.iter().map(|t| t.1).collect();
    let ku_sims: Vec<f64> = batch2.iter().map(|t| t.2).collect();

    let features = vec![
        feature(1, "sign acf lag 1", emp.sign_acf1, &pull(|s| s.sign_acf1), Sided::Two),
        feature(2, "heavy tails", emp.heavy_tail, &pull(|s| s.heavy_tail), Sided::Two),
        feature(3, "gain/loss asymmetry", emp.kuiper_asym, &pull(|s| s.kuiper_asym), Sided::Two),
        feature(4, "volatility clustering", emp.seg_count, &pull(|s| s.seg_count), Sided::Two),
        feature(5, "abs acf decay", d_emp, &d_sims, Sided::One),
        feature(6, "abs acf lag 1", emp.abs_acf1, &pull(|s| s.abs_acf1), Sided::Two),
        feature(7, "end return", emp.end_ret, &pull(|s| s.end_ret), Sided::Two),
        feature(8, "mean abs return", emp.mean_abs, &pull(|s| s.mean_abs), Sided::Two),
        feature(9, "mean squared return", emp.mean_sq, &pull(|s| s.mean_sq), Sided::Two),
        feature(10, "return quantiles", qmad_emp, &qmad_sims, Sided::One),
        feature(11, "kuiper to mean quantiles", kuiper_emp, &ku_sims, Sided::One),
    ];

    Ok(FeatureReport {
        features,
        model_label: model.label(),
        data_label: data.source_label.clone(),
        n,
        nsim: cfg.nsim,
        master_seed,
        acf_lags: cfg.acf_lags,
        alpha_n: cfg.alpha_n,
        data_abs_acf: emp.abs_acf.values,
        mean_abs_acf: mean_acf.values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Text,
    Json,
    Csv,
}

/// Render the report; the text form mirrors the one-row p-value table
/// (starred columns are two-sided with maximum 0.5).
pub fn render_report(report: &FeatureReport, format: ReportFormat) -> Result<String> {
    if report.features.len() != 11 {
        return Err(Error::invalid(format!(
            "report must carry 11 features, has {}",
            report.features.len()
        )));
    }
    match format {
        ReportFormat::Json => Ok(serde_json::to_string_pretty(report)?),
        ReportFormat::Csv => {
            let mut out = String::from("id,name,sided,empirical,sim_q05,sim_mean,sim_q95,sim_sd,p_value\n");
            for f in &report.features {
                let sided = match f.sided {
                    Sided::One => "one",
                    Sided::Two => "two",
                };
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{}",
                    f.id, f.name, sided, f.empirical, f.sim_q05, f.sim_mean, f.sim_q95, f.sim_sd, f.p_value
                )
                .unwrap();
            }
            Ok(out)
        }
        ReportFormat::Text => {
            let mut out = String::new();
            writeln!(
                out,
                "data: {}   model: {}   n: {}   nsim: {}   seed: {}   alpha_n: {}",
                report.data_label,
                report.model_label,
                report.n,
                report.nsim,
                report.master_seed,
                report.alpha_n
            )
            .unwrap();
            let mut header = String::from("          ");
            let mut row = format!("{:<10}", report.model_label.chars().take(9).collect::<String>());
            for f in &report.features {
                let star = if f.sided == Sided::Two { "*" } else { " " };
                header.push_str(&format!("{:>5}{star}", f.id));
                row.push_str(&format!("{:>5.2} ", f.p_value));
            }
            writeln!(out, "{header}").unwrap();
            writeln!(out, "{row}").unwrap();
            writeln!(out).unwrap();
            writeln!(
                out,
                "{:>2}  {:<24} {:>5} {:>13} {:>13} {:>13} {:>13} {:>13} {:>6}",
                "id", "name", "sided", "empirical", "q05", "mean", "q95", "sd", "p"
            )
            .unwrap();
            for f in &report.features {
                let sided = match f.sided {
                    Sided::One => "one",
                    Sided::Two => "two",
                };
                writeln!(
                    out,
                    "{:>2}  {:<24} {:>5} {:>13.6e} {:>13.6e} {:>13.6e} {:>13.6e} {:>13.6e} {:>6.2}",
                    f.id, f.name, sided, f.empirical, f.sim_q05, f.sim_mean, f.sim_q95, f.sim_sd, f.p_value
                )
                .unwrap();
            }
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::rng_for;
    use crate::series::ReturnKind;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn two_sided_examples() {
        // empirical at the median of an odd sims count
        let sims: Vec<f64> = (1..=9).map(|i| i as f64).collect();
        assert_eq!(two_sided_pvalue(5.0, &sims), 0.5);
        // empirical below all sims
        assert_eq!(two_sided_pvalue(-3.0, &sims), 0.0);
        // the counted-ties case: p1 = 5/10, p2 = 6/10, p = 0.5
        let sims: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        assert_eq!(two_sided_pvalue(5.0, &sims), 0.5);
    }

    #[test]
    fn one_sided_examples() {
        let sims: Vec<f64> = (1..=10).map(|i| i as f64).collect();
        assert_eq!(one_sided_pvalue(0.5, &sims), 1.0);
        assert_eq!(one_sided_pvalue(11.0, &sims), 0.0);
        assert_eq!(one_sided_pvalue(8.0, &sims), 0.3);
    }

    #[test]
    fn pvalues_permutation_invariant() {
        let mut rng = rng_for(3, &[]);
        let mut sims: Vec<f64> = (0..500).map(|_| StandardNormal.sample(&mut rng)).collect();
        let e = 0.7;
        let p2 = two_sided_pvalue(e, &sims);
        let p1 = one_sided_pvalue(e, &sims);
        // reverse and interleave
        sims.reverse();
        assert_eq!(two_sided_pvalue(e, &sims), p2);
        assert_eq!(one_sided_pvalue(e, &sims), p1);
    }

    struct Resampler(ReturnSeries);

    impl ReturnGenerator for Resampler {
        fn generate(&self, n: usize, _seed: u64) -> crate::Result<ReturnSeries> {
            assert_eq!(n, self.0.len());
            Ok(self.0.clone())
        }
        fn label(&self) -> String {
            "resampler".into()
        }
    }

    fn gaussian_series(n: usize, seed: u64) -> ReturnSeries {
        let mut rng = rng_for(seed, &[]);
        let vals: Vec<f64> = (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                let v = 0.01 * z;
                if v == 0.0 {
                    1e-300
                } else {
                    v
                }
            })
            .collect();
        ReturnSeries::new(vals, None, "gauss", 0, ReturnKind::Simple).unwrap()
    }

    fn small_cfg() -> HarnessConfig {
        HarnessConfig {
            nsim: 120,
            acf_lags: 50,
            alpha_n: 0.999,
        }
    }

    #[test]
    fn exact_resampler_maximal_pvalues() {
        let data = gaussian_series(1500, 5);
        let model = Resampler(data.clone());
        let report = evaluate_features(&data, &model, &small_cfg(), 42).unwrap();
        for f in &report.features {
            match f.sided {
                Sided::Two => assert_eq!(f.p_value, 0.5, "feature {}: {}", f.id, f.p_value),
                Sided::One => assert_eq!(f.p_value, 1.0, "feature {}: {}", f.id, f.p_value),
            }
            assert!(f.sim_sd.abs() < 1e-12, "feature {} sd {}", f.id, f.sim_sd);
        }
    }

    #[test]
    fn empirical_matches_standalone() {
        let data = gaussian_series(1500, 7);
        let model = Resampler(data.clone());
        let report = evaluate_features(&data, &model, &small_cfg(), 1).unwrap();
        let by_id = |id: u8| -> f64 {
            report
                .features
                .iter()
                .find(|f| f.id == id)
                .unwrap()
                .empirical
        };
        assert_eq!(by_id(1), sign_acf1(&data).unwrap());
        assert_eq!(by_id(2), heavy_tail_measure(&data).unwrap());
        assert_eq!(by_id(3), kuiper_asymmetry(&data).unwrap().0);
        let abs: Vec<f64> = data.values().iter().map(|v| v.abs()).collect();
        assert_eq!(by_id(6), acf(&abs, 50).unwrap().values[0]);
        assert_eq!(by_id(7), end_return(&data).unwrap());
        let (m1, m2) = abs_moments(&data);
        assert_eq!(by_id(8), m1);
        assert_eq!(by_id(9), m2);
    }

    #[test]
    fn report_bit_reproducible_across_worker_counts() {
        let data = gaussian_series(600, 9);
        let model = crate::model::small_section3_for_tests();
        let cfg = HarnessConfig {
            nsim: 100,
            acf_lags: 30,
            alpha_n: 0.999,
        };
        let a = evaluate_features(&data, &model, &cfg, 77).unwrap();
        let b = evaluate_features(&data, &model, &cfg, 77).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let c = pool.install(|| evaluate_features(&data, &model, &cfg, 77).unwrap());
        let ja = serde_json::to_string(&a).unwrap();
        assert_eq!(ja, serde_json::to_string(&b).unwrap());
        assert_eq!(ja, serde_json::to_string(&c).unwrap());
    }

    #[test]
    fn report_renders_all_formats() {
        let data = gaussian_series(1200, 11);
        let model = Resampler(data.clone());
        let report = evaluate_features(&data, &model, &small_cfg(), 3).unwrap();
        let text = render_report(&report, ReportFormat::Text).unwrap();
        assert!(text.contains("1*") && text.contains("11") && text.contains("resampler"));
        let json = render_report(&report, ReportFormat::Json).unwrap();
        let back: FeatureReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.features.len(), 11);
        for (x, y) in back.features.iter().zip(&report.features) {
            assert_eq!(x.p_value.to_bits(), y.p_value.to_bits());
            assert_eq!(x.empirical.to_bits(), y.empirical.to_bits());
        }
        let csv = render_report(&report, ReportFormat::Csv).unwrap();
        assert_eq!(csv.lines().count(), 12);
    }

    #[test]
    fn render_rejects_malformed_report() {
        let data = gaussian_series(1200, 19);
        let model = Resampler(data.clone());
        let mut report = evaluate_features(&data, &model, &small_cfg(), 3).unwrap();
        report.features.pop();
        assert!(render_report(&report, ReportFormat::Text).is_err());
    }

    #[test]
    fn sided_pattern_matches_contract() {
        let data = gaussian_series(1200, 13);
        let model = Resampler(data.clone());
        let report = evaluate_features(&data, &model, &small_cfg(), 3).unwrap();
        for f in &report.features {
            let want = if [5u8, 10, 11].contains(&f.id) {
                Sided::One
            } else {
                Sided::Two
            };
            assert_eq!(f.sided, want, "feature {}", f.id);
        }
        assert_eq!(report.features.len(), 11);
    }

    #[test]
    fn model_failure_reports_seed() {
        struct Failing;
        impl ReturnGenerator for Failing {
            fn generate(&self, _n: usize, seed: u64) -> crate::Result<ReturnSeries> {
                Err(Error::ModelFailure {
                    seed,
                    msg: "boom".into(),
                })
            }
            fn label(&self) -> String {
                "failing".into()
            }
        }
        let data = gaussian_series(1200, 17);
        let err = evaluate_features(&data, &Failing, &small_cfg(), 5).unwrap_err();
        assert!(matches!(err, Error::ModelFailure { .. }), "{err:?}");
    }

    use crate::stats::heavy_tail_measure;
}
