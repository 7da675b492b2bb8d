//! Chain population and the per-level moves of the splitting engine:
//! level selection, survivor resampling, Metropolis–Hastings rejuvenation and
//! proposal adaptation.

use ndarray::Array2;
use rand::Rng;
use rayon::prelude::*;

use super::AmlsConfig;
use crate::error::{Error, Result};
use crate::input_model::InputModel;
use crate::property::PropertySpec;
use crate::seed::{stream, substream_seeds};

/// The `N` live sampler states.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainPopulation {
    /// One chain per row.
    pub positions: Array2<f64>,
    /// `s(positions[i])`.
    pub prop_values: Vec<f64>,
    /// Per-chain random-walk radius.
    pub widths: Vec<f64>,
    /// Per-chain acceptance fraction over the last sweep.
    pub accept_accum: Vec<f64>,
}

impl ChainPopulation {
    pub fn new(positions: Array2<f64>, prop_values: Vec<f64>, width: f64) -> Result<Self> {
        let n = positions.nrows();
        if prop_values.len() != n {
            return Err(Error::dim_mismatch("chain values", n, prop_values.len()));
        }
        Ok(ChainPopulation {
            positions: positions.as_standard_layout().into_owned(),
            prop_values,
            widths: vec![width; n],
            accept_accum: vec![0.0; n],
        })
    }

    pub fn len(&self) -> usize {
        self.prop_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prop_values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.positions.ncols()
    }

    pub fn mean_acceptance(&self) -> f64 {
        self.accept_accum.iter().sum::<f64>() / self.len() as f64
    }
}

/// 1-based rank of the level-setting value in a descending sort:
/// `floor(rho * n)`, clamped to `[1, n]` when positive.
///
/// The product is nudged up by a few ulps so that decimal quantiles such as
/// `0.29 * 100` land on the intended integer.
pub fn quantile_index(n: usize, rho: f64) -> usize {
    let raw = (rho * n as f64 * (1.0 + 4.0 * f64::EPSILON)).floor();
    if raw < 1.0 {
        0
    } else {
        (raw as usize).min(n)
    }
}

/// `min{0, v_(floor(rho N))}` for values sorted in descending order.
pub fn update_level(sorted_desc: &[f64], rho: f64) -> Result<f64> {
    let idx = quantile_index(sorted_desc.len(), rho).max(1);
    let v = *sorted_desc
        .get(idx - 1)
        .ok_or_else(|| Error::Usage("update_level on an empty population".into()))?;
    Ok(v.min(0.0))
}

/// Draws `N` chains uniformly with replacement from those with `s >= level`.
/// Each copy inherits its parent's proposal width; acceptance statistics are
/// reset.
pub fn resample_survivors<R: Rng + ?Sized>(
    pop: &ChainPopulation,
    level: f64,
    rng: &mut R,
) -> Result<ChainPopulation> {
    let survivors: Vec<usize> = (0..pop.len())
        .filter(|&i| pop.prop_values[i] >= level)
        .collect();
    if survivors.is_empty() {
        return Err(Error::Usage(format!("no chain survives level {level}")));
    }
    let n = pop.len();
    let d = pop.dim();
    let mut positions = Array2::zeros((n, d));
    let mut prop_values = Vec::with_capacity(n);
    let mut widths = Vec::with_capacity(n);
    for mut row in positions.rows_mut() {
        let parent = survivors[rng.random_range(0..survivors.len())];
        row.assign(&pop.positions.row(parent));
        prop_values.push(pop.prop_values[parent]);
        widths.push(pop.widths[parent]);
    }
    Ok(ChainPopulation {
        positions,
        prop_values,
        widths,
        accept_accum: vec![0.0; n],
    })
}

/// Applies `steps` Metropolis–Hastings transitions to every chain, targeting
/// `p(x) 1{s(x) >= level}`.
///
/// The proposal adds an independent uniform draw on `[-w, w]` to each
/// coordinate, `w` being the chain's width. It is symmetric, so for uniform
/// models a move is accepted iff it stays in the support and keeps
/// `s >= level`. Out-of-support proposals are rejected without evaluating `s`.
///
/// Chains run in parallel, each on its own substream seeded from `rng`, so
/// the result does not depend on scheduling. Returns the number of property
/// evaluations.
pub fn mh_sweep<R: Rng + ?Sized>(
    pop: &mut ChainPopulation,
    level: f64,
    model: &InputModel,
    spec: &PropertySpec,
    steps: usize,
    rng: &mut R,
) -> Result<u64> {
    let d = pop.dim();
    if d != model.dim() {
        return Err(Error::dim_mismatch("mh_sweep", model.dim(), d));
    }
    spec.check_dim(d)?;
    let seeds = substream_seeds(rng, pop.len());
    let positions = pop
        .positions
        .as_slice_mut()
        .expect("chain positions are kept in standard layout");
    let evals = positions
        .par_chunks_mut(d)
        .zip(pop.prop_values.par_iter_mut())
        .zip(pop.widths.par_iter())
        .zip(pop.accept_accum.par_iter_mut())
        .zip(seeds.par_iter())
        .map(|((((x, value), &width), accept), &seed)| {
            advance_chain(x, value, width, accept, seed, level, model, spec, steps)
        })
        .collect::<Result<Vec<u64>>>()?;
    Ok(evals.iter().sum())
}

#[allow(clippy::too_many_arguments)]
fn advance_chain(
    x: &mut [f64],
    value: &mut f64,
    width: f64,
    accept: &mut f64,
    seed: u64,
    level: f64,
    model: &InputModel,
    spec: &PropertySpec,
    steps: usize,
) -> Result<u64> {
    let mut rng = stream(seed);
    let uniform = model.is_uniform();
    let mut proposal = vec![0.0; x.len()];
    let mut accepted = 0usize;
    let mut evals = 0u64;
    for _ in 0..steps {
        for (p, xi) in proposal.iter_mut().zip(x.iter()) {
            *p = xi + width * (2.0 * rng.random::<f64>() - 1.0);
        }
        let log_ratio = model.log_density_ratio(x, &proposal);
        if log_ratio == f64::NEG_INFINITY {
            continue;
        }
        if !uniform && rng.random::<f64>().ln() >= log_ratio {
            continue;
        }
        let s = spec.evaluate_row(&proposal)?;
        evals += 1;
        if s >= level {
            x.copy_from_slice(&proposal);
            *value = s;
            accepted += 1;
        }
    }
    *accept = accepted as f64 / steps as f64;
    Ok(evals)
}

/// Halves the width of chains whose acceptance fell below the target and
/// grows the others by `width_grow`; exact hits are left alone. Resets the
/// acceptance statistics.
pub fn adapt_proposal(pop: &mut ChainPopulation, cfg: &AmlsConfig) {
    for (w, acc) in pop.widths.iter_mut().zip(pop.accept_accum.iter_mut()) {
        if *acc < cfg.accept_target {
            *w *= cfg.width_shrink;
        } else if *acc > cfg.accept_target {
            *w *= cfg.width_grow;
        }
        *acc = 0.0;
    }
}
