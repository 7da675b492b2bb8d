//! Violation-probability estimators: naive Monte Carlo and adaptive
//! multi-level splitting.

mod amls;
pub mod chains;
mod naive;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::input_model::InputModel;

pub use amls::amls_run;
pub use chains::{
    adapt_proposal, mh_sweep, quantile_index, resample_survivors, update_level, ChainPopulation,
};
pub use naive::{naive_mc, NaiveMcResult};

/// Natural-log probability estimate, or the "numerically zero" verdict
/// returned when the estimate falls below the configured floor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LogEstimate {
    Finite(f64),
    Unsat,
}

impl LogEstimate {
    /// Natural log; `-inf` for `Unsat`.
    pub fn ln(self) -> f64 {
        match self {
            LogEstimate::Finite(v) => v,
            LogEstimate::Unsat => f64::NEG_INFINITY,
        }
    }

    pub fn log10(self) -> f64 {
        self.ln() / std::f64::consts::LN_10
    }

    pub fn probability(self) -> f64 {
        self.ln().exp()
    }

    pub fn is_unsat(self) -> bool {
        matches!(self, LogEstimate::Unsat)
    }
}

/// Run parameters for [`amls_run`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AmlsConfig {
    /// Number of chains `N`.
    pub n_chains: usize,
    /// Metropolis–Hastings steps `M` applied to every chain per level.
    pub mh_steps: usize,
    /// Fraction `rho` of chains kept when a level is set.
    pub quantile: f64,
    /// Natural log of the probability floor below which the run stops and
    /// reports the event as numerically impossible.
    pub log_p_min: f64,
    /// Initial random-walk radius; `None` means a quarter of the narrowest
    /// support side.
    pub proposal_width_init: Option<f64>,
    pub accept_target: f64,
    pub width_shrink: f64,
    pub width_grow: f64,
    /// Level cap; `None` means `2 * ceil(|log_p_min| / -ln(rho)) + 10`.
    pub max_levels: Option<usize>,
    /// Adapt per-chain proposal widths after every sweep.
    pub adapt: bool,
    /// Master seed. Job files carry the seed at the top level instead.
    #[serde(skip)]
    pub seed: u64,
}

impl Default for AmlsConfig {
    fn default() -> Self {
        AmlsConfig {
            n_chains: 10_000,
            mh_steps: 1000,
            quantile: 0.1,
            log_p_min: -250.0,
            proposal_width_init: None,
            accept_target: 0.234,
            width_shrink: 0.5,
            width_grow: 1.02,
            max_levels: None,
            adapt: true,
            seed: 0,
        }
    }
}

impl AmlsConfig {
    pub fn new(n_chains: usize, mh_steps: usize, quantile: f64, log_p_min: f64, seed: u64) -> Self {
        AmlsConfig {
            n_chains,
            mh_steps,
            quantile,
            log_p_min,
            seed,
            ..Default::default()
        }
    }

    pub fn default_max_levels(&self) -> usize {
        let per_level = -self.quantile.ln();
        2 * (self.log_p_min.abs() / per_level).ceil() as usize + 10
    }

    pub fn max_levels(&self) -> usize {
        self.max_levels.unwrap_or_else(|| self.default_max_levels())
    }

    /// Copy with every optional field filled in for `model`.
    pub fn resolved(&self, model: &InputModel) -> AmlsConfig {
        AmlsConfig {
            proposal_width_init: Some(
                self.proposal_width_init
                    .unwrap_or_else(|| model.default_proposal_width()),
            ),
            max_levels: Some(self.max_levels()),
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.n_chains == 0 {
            return bad("n_chains must be positive".into());
        }
        if self.mh_steps == 0 {
            return bad("mh_steps must be positive".into());
        }
        if !(self.quantile > 0.0 && self.quantile < 1.0) {
            return bad(format!("quantile must lie in (0, 1), got {}", self.quantile));
        }
        if quantile_index(self.n_chains, self.quantile) < 1 {
            return bad(format!(
                "floor(quantile * n_chains) must be at least 1 (quantile {}, n_chains {})",
                self.quantile, self.n_chains
            ));
        }
        if !(self.log_p_min < 0.0) {
            return bad(format!("log_p_min must be negative, got {}", self.log_p_min));
        }
        if let Some(w) = self.proposal_width_init {
            if !(w.is_finite() && w > 0.0) {
                return bad(format!("proposal_width_init must be positive, got {w}"));
            }
        }
        if !(self.accept_target > 0.0 && self.accept_target < 1.0) {
            return bad(format!("accept_target must lie in (0, 1), got {}", self.accept_target));
        }
        if !(self.width_shrink > 0.0 && self.width_grow > 0.0) {
            return bad("width_shrink and width_grow must be positive".into());
        }
        if self.max_levels == Some(0) {
            return bad("max_levels must be at least 1".into());
        }
        Ok(())
    }
}

/// Per-level record of a run. Also carried by [`Error::Diverged`] as the
/// partial trace of an aborted run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LevelTrace {
    /// Levels `L_k`, in the order they were set.
    pub levels: Vec<f64>,
    /// `ln P_k` for each level.
    pub log_factors: Vec<f64>,
    /// Number of chains with `s >= L_k` when the level was set.
    pub survivors: Vec<usize>,
    /// Mean per-chain acceptance fraction of each completed sweep.
    pub mean_acceptance: Vec<f64>,
    pub property_evaluations: u64,
}

pub type PartialTrace = LevelTrace;

impl LevelTrace {
    pub fn n_levels(&self) -> usize {
        self.levels.len()
    }

    /// Cumulative log-estimate after each level.
    pub fn running_log_estimates(&self) -> Vec<f64> {
        self.log_factors
            .iter()
            .scan(0.0, |acc, f| {
                *acc += f;
                Some(*acc)
            })
            .collect()
    }
}

/// Final chain states of a successful run, all satisfying `s(x) >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Counterexamples {
    pub points: Array2<f64>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmlsResult {
    pub log_estimate: LogEstimate,
    pub trace: LevelTrace,
    /// Present iff the run reached level 0.
    pub counterexamples: Option<Counterexamples>,
}

impl AmlsResult {
    pub fn n_levels(&self) -> usize {
        self.trace.n_levels()
    }

    pub fn is_unsat(&self) -> bool {
        self.log_estimate.is_unsat()
    }
}
