//! Return construction on top of a volatility path: correlated-magnitude
//! noise, tail shaping, magnitude-dependent signs and first-lag sign
//! autocorrelation injection.

use rand::RngExt;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding;
use crate::series::{ReturnKind, ReturnSeries};
use crate::stats;
use crate::volmodel::{simulate_volatility, VolSimParams};

/// Quantile-binned positive-sign frequencies of the empirical |r|.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SignModel {
    /// Strictly increasing quantile upper edges of |r| (i/nu, i = 1..nu).
    pub eqa: Vec<f64>,
    /// Positive-sign frequency per bin.
    pub p: Vec<f64>,
}

impl SignModel {
    pub fn nu_bins(&self) -> usize {
        self.eqa.len()
    }

    /// Fair-coin model with a single bin; simulation is sign-symmetric.
    pub fn fair(edge: f64) -> Self {
        Self {
            eqa: vec![edge],
            p: vec![0.5],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.eqa.is_empty() || self.eqa.len() != self.p.len() {
            return Err(Error::invalid("sign model edge/frequency length mismatch"));
        }
        if self.eqa.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::invalid("sign model edges must strictly increase"));
        }
        if self.p.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::invalid("sign frequencies must lie in [0,1]"));
        }
        Ok(())
    }

    /// Bin index for a magnitude: first bin whose upper edge contains it,
    /// clamping outside the empirical range to the nearest bin.
    pub fn bin_for(&self, magnitude: f64) -> usize {
        let idx = self.eqa.partition_point(|e| *e < magnitude);
        idx.min(self.eqa.len() - 1)
    }
}

/// All the return-construction screws.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReturnSimParams {
    /// Magnitude-correlation screw of the noise recursion.
    pub rho: f64,
    /// Tail screw: positive values make |Z| tails heavier.
    #[serde(default)]
    pub eta: f64,
    /// Sign-dependence screw in [0,1].
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    /// Target first-lag sign autocorrelation.
    #[serde(default)]
    pub eacf1: f64,
    pub sign_model: SignModel,
    /// Negative rho is mathematically valid in the recursion but off by
    /// default; set this to opt in.
    #[serde(default)]
    pub allow_negative_rho: bool,
}

fn default_gamma() -> f64 {
    1.0
}

impl ReturnSimParams {
    pub fn validate(&self) -> Result<()> {
        if self.rho < 0.0 && !self.allow_negative_rho {
            return Err(Error::Config(
                "rho < 0 requires allow_negative_rho".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::Config(format!("gamma must be in [0,1]: {}", self.gamma)));
        }
        if self.eacf1.abs() >= 1.0 {
            return Err(Error::Config(format!("|eacf1| must be < 1: {}", self.eacf1)));
        }
        self.sign_model.validate()
    }
}

/// Correlated-magnitude noise:
/// Z~_t = (rho |Z^_{t-1}| + 1) Z^_t / sqrt(1 + 2 rho sqrt(2/pi) + rho^2),
/// with Z~_1 = Z^_1. Unit variance for every rho by the normalizer.
pub fn gen_ztilde(n: usize, rho: f64, seed: u64) -> Vec<f64> {
    let mut rng = seeding::rng_for(seed, &[0x27]);
    let norm = (1.0 + 2.0 * rho * (2.0 / std::f64::consts::PI).sqrt() + rho * rho).sqrt();
    let mut out = Vec::with_capacity(n);
    let mut prev: f64 = StandardNormal.sample(&mut rng);
    out.push(prev);
    for _ in 1..n {
        let z: f64 = StandardNormal.sample(&mut rng);
        let v = (rho * prev.abs() + 1.0) * z / norm;
        out.push(v);
        prev = z;
    }
    out
}

/// Absolute return |R| = sigma |z| (1 + |z|)^eta.
pub fn abs_return(sigma: f64, ztilde: f64, eta: f64) -> f64 {
    debug_assert!(sigma > 0.0);
    let az = ztilde.abs();
    sigma * az * (1.0 + az).powf(eta)
}

/// Fit the quantile-bin sign model: edges at i/nu quantiles of |r|,
/// positive-sign frequency per bin. Duplicate edges (from tied magnitudes)
/// are merged, reducing the bin count; callers can compare `nu_bins()` to
/// the request to surface the reduction.
pub fn fit_sign_model(r: &ReturnSeries, nu_bins: usize) -> Result<SignModel> {
    if nu_bins == 0 {
        return Err(Error::Config("nu_bins must be positive".into()));
    }
    if r.len() < 10 * nu_bins {
        return Err(Error::invalid(format!(
            "need at least {} returns for {nu_bins} sign bins",
            10 * nu_bins
        )));
    }
    let mut abs_sorted: Vec<f64> = r.values().iter().map(|v| v.abs()).collect();
    abs_sorted.sort_by(f64::total_cmp);
    let mut edges: Vec<f64> = (1..=nu_bins)
        .map(|i| stats::quantile_sorted(&abs_sorted, i as f64 / nu_bins as f64))
        .collect();
    edges.dedup();
    let nu = edges.len();

    let mut pos = vec![0usize; nu];
    let mut tot = vec![0usize; nu];
    for v in r.values() {
        let idx = edges.partition_point(|e| *e < v.abs()).min(nu - 1);
        tot[idx] += 1;
        if *v > 0.0 {
            pos[idx] += 1;
        }
    }
    let p: Vec<f64> = pos
        .iter()
        .zip(&tot)
        .map(|(p, t)| if *t == 0 { 0.5 } else { *p as f64 / *t as f64 })
        .collect();
    let model = SignModel { eqa: edges, p };
    model.validate()?;
    Ok(model)
}

/// Assign +/- to magnitudes: positive with probability
/// gamma p(i) + (1 - gamma)/2 using the bin containing each magnitude.
pub fn assign_signs(abs_returns: &[f64], model: &SignModel, gamma: f64, seed: u64) -> Vec<f64> {
    let mut rng = seeding::rng_for(seed, &[0x519]);
    abs_returns
        .iter()
        .map(|m| {
            debug_assert!(*m >= 0.0);
            let p_pos = gamma * model.p[model.bin_for(*m)] + (1.0 - gamma) / 2.0;
            let u: f64 = rng.random();
            if u < p_pos {
                *m
            } else {
                -*m
            }
        })
        .collect()
}

/// Overwrite signs with lag-1 persistence: with probability |eacf1| the
/// sign of R_t is set to (the sign of R_{t-1}) for eacf1 > 0, or the
/// opposite for eacf1 < 0. Magnitudes are untouched.
pub fn inject_sign_acf(signed_returns: &[f64], eacf1: f64, seed: u64) -> Vec<f64> {
    if eacf1 == 0.0 || signed_returns.len() < 2 {
        return signed_returns.to_vec();
    }
    let mut rng = seeding::rng_for(seed, &[0xacf1]);
    let mut out = signed_returns.to_vec();
    for t in 1..out.len() {
        let u: f64 = rng.random();
        if u < eacf1.abs() {
            let carried = out[t - 1].signum() * if eacf1 > 0.0 { 1.0 } else { -1.0 };
            out[t] = carried * out[t].abs();
        }
    }
    out
}

/// Full pipeline: volatility path -> correlated noise -> tail shaping ->
/// magnitude-dependent signs -> sign-ACF injection.
pub fn simulate_returns(
    vol_params: &VolSimParams,
    ret_params: &ReturnSimParams,
    n: usize,
    seed: u64,
    kind: ReturnKind,
) -> Result<ReturnSeries> {
    ret_params.validate()?;
    if n < 2 {
        return Err(Error::invalid("n must be at least 2"));
    }
    let sigma = simulate_volatility(vol_params, n, seeding::derive_seed(seed, &[10]))?;
    let ztilde = gen_ztilde(n, ret_params.rho, seeding::derive_seed(seed, &[11]));
    let mags: Vec<f64> = sigma
        .iter()
        .zip(&ztilde)
        .map(|(s, z)| abs_return(*s, *z, ret_params.eta))
        .collect();
    let signed = assign_signs(
        &mags,
        &ret_params.sign_model,
        ret_params.gamma,
        seeding::derive_seed(seed, &[12]),
    );
    let injected = inject_sign_acf(&signed, ret_params.eacf1, seeding::derive_seed(seed, &[13]));
    ReturnSeries::new(injected, None, format!("sim[{seed}]"), 0, kind)
}

/// Grid-search helper for rho: matches the mean lag-1 ACF of |R| over
/// simulated paths to a target value. Returns the best grid point.
pub fn search_rho(
    vol_params: &VolSimParams,
    ret_params: &ReturnSimParams,
    n: usize,
    target_abs_acf1: f64,
    grid: &[f64],
    paths_per_point: usize,
    seed: u64,
) -> Result<f64> {
    if grid.is_empty() || paths_per_point == 0 {
        return Err(Error::Config("empty rho grid".into()));
    }
    let mut best = (f64::INFINITY, grid[0]);
    for (gi, rho) in grid.iter().enumerate() {
        let mut params = ret_params.clone();
        params.rho = *rho;
        let mut acc = 0.0;
        for path in 0..paths_per_point {
            let r = simulate_returns(
                &vol_params.clone(),
                &params,
                n,
                seeding::derive_seed(seed, &[gi as u64, path as u64]),
                ReturnKind::Simple,
            )?;
            let abs: Vec<f64> = r.values().iter().map(|v| v.abs()).collect();
            acc += stats::acf(&abs, 1)?.values[0];
        }
        let mean_acf1 = acc / paths_per_point as f64;
        let err = (mean_acf1 - target_abs_acf1).abs();
        if err < best.0 {
            best = (err, *rho);
        }
    }
    Ok(best.1)
}
