use rand::Rng;
use rayon::prelude::*;

use super::LogEstimate;
use crate::error::{Error, Result};
use crate::input_model::InputModel;
use crate::property::PropertySpec;
use crate::seed::{stream, substream_seeds};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NaiveMcResult {
    /// `ln(hits / samples)`, or `Unsat` when nothing was hit.
    pub log_estimate: LogEstimate,
    pub hits: u64,
    pub samples: u64,
}

impl NaiveMcResult {
    pub fn estimate(&self) -> f64 {
        self.hits as f64 / self.samples as f64
    }

    /// Binomial standard error of [`estimate`](Self::estimate).
    pub fn std_error(&self) -> f64 {
        let p = self.estimate();
        (p * (1.0 - p) / self.samples as f64).sqrt()
    }
}

/// Plain Monte Carlo: the fraction of prior draws with `s(x) >= 0`.
///
/// Work is split into batches of at most `batch_size` draws, each on its own
/// substream, so results are independent of thread count.
pub fn naive_mc<R: Rng + ?Sized>(
    model: &InputModel,
    spec: &PropertySpec,
    n_samples: u64,
    batch_size: usize,
    rng: &mut R,
) -> Result<NaiveMcResult> {
    if n_samples == 0 {
        return Err(Error::Config("naive_mc needs at least one sample".into()));
    }
    if batch_size == 0 {
        return Err(Error::Config("batch_size must be positive".into()));
    }
    model.validate()?;
    spec.check_dim(model.dim())?;
    let n_batches = n_samples.div_ceil(batch_size as u64) as usize;
    let seeds = substream_seeds(rng, n_batches);
    let hits = seeds
        .par_iter()
        .enumerate()
        .map(|(b, &seed)| {
            let start = b as u64 * batch_size as u64;
            let size = (n_samples - start).min(batch_size as u64) as usize;
            let xs = model.sample_prior(size, &mut stream(seed))?;
            let vals = spec.evaluate(xs.view())?;
            Ok(vals.iter().filter(|&&v| v >= 0.0).count() as u64)
        })
        .collect::<Result<Vec<u64>>>()?
        .into_iter()
        .sum::<u64>();
    let log_estimate = if hits == 0 {
        LogEstimate::Unsat
    } else {
        LogEstimate::Finite((hits as f64 / n_samples as f64).ln())
    };
    Ok(NaiveMcResult {
        log_estimate,
        hits,
        samples: n_samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::property::AnalyticProperty;

    #[test]
    fn half_interval() {
        let model = InputModel::unit_box(1).unwrap();
        let spec = PropertySpec::linear_threshold(vec![1.0], 0.5).unwrap();
        let r = naive_mc(&model, &spec, 1_000_000, 65_536, &mut stream(1)).unwrap();
        assert!((r.estimate() - 0.5).abs() < 0.002, "{}", r.estimate());
        assert_eq!(r.samples, 1_000_000);
    }

    #[test]
    fn impossible_event_gives_sentinel() {
        let model = InputModel::unit_box(2).unwrap();
        let spec = PropertySpec::Analytic(AnalyticProperty::Constant { value: -1.0 });
        let r = naive_mc(&model, &spec, 10_000, 1000, &mut stream(2)).unwrap();
        assert_eq!(r.hits, 0);
        assert!(r.log_estimate.is_unsat());
    }

    #[test]
    fn ragged_final_batch_counts_every_sample() {
        let model = InputModel::unit_box(1).unwrap();
        let spec = PropertySpec::Analytic(AnalyticProperty::Constant { value: 0.0 });
        let r = naive_mc(&model, &spec, 1001, 100, &mut stream(3)).unwrap();
        assert_eq!(r.hits, 1001);
        assert_eq!(r.log_estimate, LogEstimate::Finite(0.0));
    }

    #[test]
    fn rejects_zero_samples() {
        let model = InputModel::unit_box(1).unwrap();
        let spec = PropertySpec::linear_threshold(vec![1.0], 0.5).unwrap();
        assert!(naive_mc(&model, &spec, 0, 10, &mut stream(0)).is_err());
    }
}
