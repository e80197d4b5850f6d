//! Volatility decomposition and simulation: a low-frequency trigonometric
//! fit of the log piecewise-constant volatility, a two-regime high-frequency
//! residual model, and the randomized recombination
//! Sigma_k = exp(mlv + Delta + lowfreq(k) + highfreq(k)).

use rand::RngExt;
use rand_distr::{Distribution, Exp, StandardNormal, StudentT};
use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fft;
use crate::seeding;

/// One selected trigonometric pair a sin(2 pi j k / n) + b cos(2 pi j k / n).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrigCoef {
    pub freq: usize,
    pub a: f64,
    pub b: f64,
}

/// Frequency selection order for the low-frequency fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FreqOrder {
    /// Descending explained variance; minimal J.
    #[default]
    Energy,
    /// Ascending frequency index.
    Index,
}

/// Low-frequency component of the centered log-volatility.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LowFreqModel {
    pub coefficients: Vec<TrigCoef>,
    /// Length of the series the model was fitted on.
    pub n: usize,
    /// Target fraction of centered variance explained.
    pub pow: f64,
    /// Mean log-volatility removed before fitting.
    pub mlv: f64,
}

impl LowFreqModel {
    pub fn num_frequencies(&self) -> usize {
        self.coefficients.len()
    }
}

/// Least-squares trigonometric fit via the FFT: selects frequencies (in
/// `order`) until the cumulative explained fraction of the centered
/// variance reaches `pow`.
pub fn fit_low_freq_with_order(log_vol: &[f64], pow: f64, order: FreqOrder) -> Result<LowFreqModel> {
    let n = log_vol.len();
    if n < 4 {
        return Err(Error::invalid("need at least 4 points to fit"));
    }
    if !(pow > 0.0 && pow <= 1.0) {
        return Err(Error::Config(format!("pow must be in (0,1]: {pow}")));
    }
    let mlv = log_vol.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = log_vol.iter().map(|v| v - mlv).collect();
    let ss_total: f64 = centered.iter().map(|v| v * v).sum();
    if ss_total == 0.0 {
        return Err(Error::ZeroVariance("constant log-volatility".into()));
    }

    let mut buf: Vec<Complex<f64>> = centered.iter().map(|v| Complex::new(*v, 0.0)).collect();
    fft::forward(&mut buf);

    // data point k = m + 1 sits at buffer index m, so the DFT picks up a
    // phase factor e^{-2 pi i j / n} relative to the k-grid
    let nf = n as f64;
    let mut terms: Vec<(TrigCoef, f64)> = Vec::with_capacity(n / 2);
    for (j, bin) in buf.iter().enumerate().take(n / 2 + 1).skip(1) {
        let phase = Complex::from_polar(1.0, -2.0 * std::f64::consts::PI * j as f64 / nf);
        let fj = phase * bin;
        let (a, b, energy);
        if 2 * j == n {
            // Nyquist term: cos alternates +-1, sin vanishes
            a = 0.0;
            b = fj.re / nf;
            energy = nf * b * b;
        } else {
            a = -2.0 * fj.im / nf;
            b = 2.0 * fj.re / nf;
            energy = 0.5 * nf * (a * a + b * b);
        }
        terms.push((TrigCoef { freq: j, a, b }, energy));
    }

    if order == FreqOrder::Energy {
        terms.sort_by(|x, y| y.1.total_cmp(&x.1));
    }
    let threshold = pow * ss_total * (1.0 - 1e-12);
    let mut cum = 0.0;
    let mut coefficients = Vec::new();
    for (coef, energy) in terms {
        if cum >= threshold {
            break;
        }
        cum += energy;
        coefficients.push(coef);
    }
    Ok(LowFreqModel {
        coefficients,
        n,
        pow,
        mlv,
    })
}

/// Energy-ordered fit (the default selection rule).
pub fn fit_low_freq(log_vol: &[f64], pow: f64) -> Result<LowFreqModel> {
    fit_low_freq_with_order(log_vol, pow, FreqOrder::Energy)
}

/// Fraction of the centered variance explained by the first `j` selected
/// frequencies (in the model's stored order).
pub fn explained_fraction(model: &LowFreqModel, log_vol: &[f64], j: usize) -> f64 {
    let n = model.n as f64;
    let mlv = model.mlv;
    let ss_total: f64 = log_vol.iter().map(|v| (v - mlv) * (v - mlv)).sum();
    let mut cum = 0.0;
    for c in model.coefficients.iter().take(j) {
        cum += if 2 * c.freq == model.n {
            n * c.b * c.b
        } else {
            0.5 * n * (c.a * c.a + c.b * c.b)
        };
    }
    cum / ss_total
}

/// Evaluate sum_j p_j(k) for k = 1..n via an inverse FFT.
/// `terms` come as (freq, a, b) after multiplier application.
fn synth_trig(n: usize, terms: &[TrigCoef]) -> Vec<f64> {
    let mut spec = vec![Complex::new(0.0, 0.0); n];
    for c in terms {
        let j = c.freq;
        debug_assert!(j >= 1 && 2 * j <= n);
        if 2 * j == n {
            spec[j] += Complex::new(c.b, 0.0);
        } else {
            spec[j] += Complex::new(0.5 * c.b, -0.5 * c.a);
            spec[n - j] += Complex::new(0.5 * c.b, 0.5 * c.a);
        }
    }
    fft::inverse(&mut spec);
    // buffer index m holds k = m; the path wants k = 1..n (k = n wraps to 0)
    (0..n).map(|t| spec[(t + 1) % n].re).collect()
}

/// Deterministic low-frequency path (all multipliers one), k = 1..n.
pub fn low_freq_path(model: &LowFreqModel) -> Vec<f64> {
    low_freq_path_at(model, model.n)
}

/// Deterministic path re-evaluated on a k = 1..n grid of arbitrary n.
pub fn low_freq_path_at(model: &LowFreqModel, n: usize) -> Vec<f64> {
    let usable: Vec<TrigCoef> = model
        .coefficients
        .iter()
        .copied()
        .filter(|c| 2 * c.freq <= n)
        .collect();
    synth_trig(n, &usable)
}

/// Randomized path: each coefficient scaled by an independent standard
/// normal draw (a_j by Z1j, b_j by Z2j).
pub fn randomize_low_freq(model: &LowFreqModel, seed: u64) -> Vec<f64> {
    randomize_low_freq_at(model, model.n, seed)
}

pub fn randomize_low_freq_at(model: &LowFreqModel, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = seeding::rng_for(seed, &[0x10f]);
    let terms: Vec<TrigCoef> = model
        .coefficients
        .iter()
        .map(|c| {
            let z1: f64 = StandardNormal.sample(&mut rng);
            let z2: f64 = StandardNormal.sample(&mut rng);
            TrigCoef {
                freq: c.freq,
                a: z1 * c.a,
                b: z2 * c.b,
            }
        })
        .filter(|c| 2 * c.freq <= n)
        .collect();
    synth_trig(n, &terms)
}

/// High-frequency residual parameters: alternating exponential regimes.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct HighFreqParams {
    /// Mean length (days) of the quiet regime.
    pub lambda1: f64,
    /// Noise scale on the quiet regime, N(0, sigma1^2).
    pub sigma1: f64,
    /// Mean length (days) of the active regime.
    pub lambda2: f64,
    /// Scale of the active-regime t noise, sigma2 * T_nu.
    pub sigma2: f64,
    /// Degrees of freedom of the active-regime t noise.
    pub nu_t: f64,
}

impl Default for HighFreqParams {
    fn default() -> Self {
        Self {
            lambda1: 200.0,
            sigma1: 0.0,
            lambda2: 20.0,
            sigma2: 0.4,
            nu_t: 15.0,
        }
    }
}

impl HighFreqParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda1 > 0.0 && self.lambda2 > 0.0) {
            return Err(Error::Config("lambda1 and lambda2 must be positive".into()));
        }
        if !(self.sigma1 >= 0.0 && self.sigma2 >= 0.0) {
            return Err(Error::Config("sigma1 and sigma2 must be nonnegative".into()));
        }
        if !(self.nu_t > 2.0) {
            return Err(Error::Config(format!(
                "nu_t must exceed 2, got {}",
                self.nu_t
            )));
        }
        Ok(())
    }
}

/// Alternating-regime residual log-volatility, starting with a lambda1
/// regime. Interval lengths are continuous exponentials rounded up to
/// at least one day; exactly n points are emitted.
pub fn simulate_high_freq(n: usize, p: &HighFreqParams, seed: u64) -> Result<Vec<f64>> {
    p.validate()?;
    if n == 0 {
        return Err(Error::invalid("n must be positive"));
    }
    let mut rng = seeding::rng_for(seed, &[0x81f]);
    let exp1 = Exp::new(1.0 / p.lambda1).expect("positive rate");
    let exp2 = Exp::new(1.0 / p.lambda2).expect("positive rate");
    let t_dist = StudentT::new(p.nu_t).expect("nu_t > 2");
    let mut out = Vec::with_capacity(n);
    let mut long_regime = true;
    while out.len() < n {
        let mean_draw: f64 = if long_regime {
            exp1.sample(&mut rng)
        } else {
            exp2.sample(&mut rng)
        };
        let len = (mean_draw.ceil() as usize).max(1).min(n - out.len());
        for _ in 0..len {
            let v = if long_regime {
                if p.sigma1 == 0.0 {
                    0.0
                } else {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    p.sigma1 * z
                }
            } else if p.sigma2 == 0.0 {
                0.0
            } else {
                let t: f64 = t_dist.sample(&mut rng);
                p.sigma2 * t
            };
            out.push(v);
        }
        long_regime = !long_regime;
    }
    Ok(out)
}

/// All the volatility-simulator screws plus the fitted trig coefficients.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VolSimParams {
    pub low: LowFreqModel,
    #[serde(default)]
    pub high: HighFreqParams,
    /// Level-shift half-width: Delta ~ U[-delta, delta], one draw per path.
    #[serde(default = "default_delta")]
    pub delta: f64,
}

fn default_delta() -> f64 {
    0.2
}

impl VolSimParams {
    pub fn validate(&self) -> Result<()> {
        self.high.validate()?;
        if self.delta < 0.0 {
            return Err(Error::Config("delta must be nonnegative".into()));
        }
        if !(self.low.pow > 0.0 && self.low.pow <= 1.0) {
            return Err(Error::Config("pow must be in (0,1]".into()));
        }
        Ok(())
    }
}

/// One randomized volatility path of length n:
/// Sigma_k = exp(mlv + Delta + lowfreq_random(k) + highfreq(k)).
pub fn simulate_volatility(params: &VolSimParams, n: usize, seed: u64) -> Result<Vec<f64>> {
    params.validate()?;
    if n == 0 {
        return Err(Error::invalid("n must be positive"));
    }
    let mut rng = seeding::rng_for(seed, &[0xde17a]);
    let delta = if params.delta == 0.0 {
        0.0
    } else {
        rng.random_range(-params.delta..=params.delta)
    };
    let low = randomize_low_freq_at(&params.low, n, seeding::derive_seed(seed, &[1]));
    let high = simulate_high_freq(n, &params.high, seeding::derive_seed(seed, &[2]))?;
    Ok(low
        .iter()
        .zip(&high)
        .map(|(l, h)| (params.low.mlv + delta + l + h).exp())
        .collect())
}
