use super::chains::{adapt_proposal, mh_sweep, resample_survivors, update_level, ChainPopulation};
use super::{AmlsConfig, AmlsResult, Counterexamples, LevelTrace, LogEstimate};
use crate::error::{Error, Result};
use crate::input_model::InputModel;
use crate::property::PropertySpec;
use crate::seed::stream;

/// Adaptive multi-level splitting with a probability floor.
///
/// Starting from `N` exact prior draws, each iteration sets the next level to
/// `min{0, v_(floor(rho N))}` of the descending property values, multiplies
/// the estimate by the fraction of chains at or above it, resamples those
/// survivors back to `N` and rejuvenates every chain with `M`
/// Metropolis–Hastings steps targeting `p(x) 1{s(x) >= L}`. The run succeeds
/// when the level reaches 0, returning the final chains as counterexamples.
/// It returns [`LogEstimate::Unsat`] as soon as the running estimate drops
/// below `log_p_min`, and fails with [`Error::Diverged`] if neither happens
/// within `max_levels` levels.
pub fn amls_run(model: &InputModel, spec: &PropertySpec, cfg: &AmlsConfig) -> Result<AmlsResult> {
    cfg.validate()?;
    model.validate()?;
    spec.check_dim(model.dim())?;
    let cfg = cfg.resolved(model);
    let n = cfg.n_chains;
    let max_levels = cfg.max_levels();
    let mut rng = stream(cfg.seed);

    let x0 = model.sample_prior(n, &mut rng)?;
    let values = spec.evaluate(x0.view())?.to_vec();
    let width = cfg.proposal_width_init.expect("resolved config has a width");
    let mut pop = ChainPopulation::new(x0, values, width)?;
    let mut trace = LevelTrace {
        property_evaluations: n as u64,
        ..Default::default()
    };
    let mut log_estimate = 0.0;

    loop {
        let mut sorted = pop.prop_values.clone();
        sorted.sort_unstable_by(|a, b| b.total_cmp(a));
        let level = update_level(&sorted, cfg.quantile)?;
        let survivors = pop.prop_values.iter().filter(|&&v| v >= level).count();
        trace.levels.push(level);
        trace.survivors.push(survivors);
        if survivors == 0 {
            trace.log_factors.push(f64::NEG_INFINITY);
            return Ok(unsat(trace));
        }
        let log_factor = (survivors as f64 / n as f64).ln();
        trace.log_factors.push(log_factor);
        log_estimate += log_factor;
        if log_estimate < cfg.log_p_min {
            return Ok(unsat(trace));
        }

        pop = resample_survivors(&pop, level, &mut rng)?;
        trace.property_evaluations +=
            mh_sweep(&mut pop, level, model, spec, cfg.mh_steps, &mut rng)?;
        trace.mean_acceptance.push(pop.mean_acceptance());
        if cfg.adapt {
            adapt_proposal(&mut pop, &cfg);
        } else {
            pop.accept_accum.iter_mut().for_each(|a| *a = 0.0);
        }

        if level >= 0.0 {
            return Ok(AmlsResult {
                log_estimate: LogEstimate::Finite(log_estimate),
                trace,
                counterexamples: Some(Counterexamples {
                    points: pop.positions,
                    values: pop.prop_values,
                }),
            });
        }
        if trace.n_levels() >= max_levels {
            return Err(Error::Diverged(Box::new(trace)));
        }
    }
}

fn unsat(trace: LevelTrace) -> AmlsResult {
    AmlsResult {
        log_estimate: LogEstimate::Unsat,
        trace,
        counterexamples: None,
    }
}
