//! The model parameter file (one JSON document per model) and the generator
//! abstraction the harness scores.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::garch::{simulate_garch11, GarchParams, GarchSignMod};
use crate::returns::{simulate_returns, ReturnSimParams};
use crate::seeding;
use crate::series::{ReturnKind, ReturnSeries};
use crate::volmodel::VolSimParams;

/// A return-generating model, dispatched on the `model_type` JSON field.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "model_type", rename_all = "snake_case")]
pub enum ModelSpec {
    /// Randomized volatility decomposition plus the sign pipeline.
    Section3 {
        vol: VolSimParams,
        ret: ReturnSimParams,
        #[serde(default)]
        return_kind: ReturnKind,
    },
    /// GARCH(1,1) with an optional modified sign scheme.
    Garch {
        params: GarchParams,
        #[serde(default)]
        sign_mod: Option<GarchSignMod>,
        #[serde(default)]
        return_kind: ReturnKind,
    },
}

impl ModelSpec {
    pub fn label(&self) -> String {
        match self {
            ModelSpec::Section3 { .. } => "section3".into(),
            ModelSpec::Garch { .. } => "garch".into(),
        }
    }

    pub fn return_kind(&self) -> ReturnKind {
        match self {
            ModelSpec::Section3 { return_kind, .. } => *return_kind,
            ModelSpec::Garch { return_kind, .. } => *return_kind,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            ModelSpec::Section3 { vol, ret, .. } => {
                vol.validate()?;
                ret.validate()
            }
            ModelSpec::Garch { params, .. } => {
                if !(params.a0 > 0.0) || params.a1 < 0.0 || params.b1 < 0.0 {
                    return Err(Error::Config("invalid GARCH parameters".into()));
                }
                Ok(())
            }
        }
    }

    pub fn to_json_file(&self, path: &Path) -> Result<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer_pretty(f, self)?;
        Ok(())
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        let spec: ModelSpec = serde_json::from_reader(f)?;
        spec.validate()?;
        Ok(spec)
    }
}

/// Anything that can produce a return series of a requested length from a
/// seed. Implementations must be deterministic per (n, seed).
pub trait ReturnGenerator: Sync {
    fn generate(&self, n: usize, seed: u64) -> Result<ReturnSeries>;
    fn label(&self) -> String;
}

impl ReturnGenerator for ModelSpec {
    fn generate(&self, n: usize, seed: u64) -> Result<ReturnSeries> {
        let map_err = |e: Error| Error::ModelFailure {
            seed,
            msg: e.to_string(),
        };
        match self {
            ModelSpec::Section3 {
                vol,
                ret,
                return_kind,
            } => simulate_returns(vol, ret, n, seed, *return_kind).map_err(map_err),
            ModelSpec::Garch {
                params,
                sign_mod,
                return_kind,
            } => {
                let sim = simulate_garch11(params, n, sign_mod.as_ref(), seed).map_err(map_err)?;
                if let Some(at) = sim.truncated_at {
                    return Err(Error::ModelFailure {
                        seed,
                        msg: format!("variance recursion overflowed at step {at}"),
                    });
                }
                let mut series = sim.series;
                series.kind = *return_kind;
                Ok(series)
            }
        }
    }

    fn label(&self) -> String {
        self.label()
    }
}

/// Generate `count` independent paths with seeds derived from
/// (master_seed, stream, index); the result is identical for any worker
/// count.
pub fn simulate_batch(
    generator: &dyn ReturnGenerator,
    n: usize,
    count: usize,
    master_seed: u64,
    stream: u64,
) -> Result<Vec<ReturnSeries>> {
    (0..count)
        .into_par_iter()
        .map(|i| generator.generate(n, seeding::derive_seed(master_seed, &[stream, i as u64])))
        .collect()
}

/// Small synthetic model used by internal tests.
#[cfg(test)]
pub(crate) fn small_section3_for_tests() -> ModelSpec {
    use crate::returns::SignModel;
    use crate::volmodel::{HighFreqParams, LowFreqModel, TrigCoef};
    ModelSpec::Section3 {
        vol: VolSimParams {
            low: LowFreqModel {
                coefficients: vec![TrigCoef {
                    freq: 1,
                    a: 0.3,
                    b: 0.1,
                }],
                n: 400,
                pow: 0.8,
                mlv: -4.769,
            },
            high: HighFreqParams::default(),
            delta: 0.1,
        },
        ret: ReturnSimParams {
            rho: 0.2,
            eta: 0.0,
            gamma: 1.0,
            eacf1: 0.05,
            sign_model: SignModel {
                eqa: vec![0.003, 0.006, 0.01, 0.05],
                p: vec![0.55, 0.52, 0.48, 0.40],
            },
            allow_negative_rho: false,
        },
        return_kind: ReturnKind::Simple,
    }
}
