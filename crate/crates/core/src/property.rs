//! Property functions `s(x)`. The violation event is the closed set `s(x) >= 0`.

use std::sync::Arc;

use ndarray::{Array1, ArrayView2};

use crate::error::{Error, Result};
use crate::network::Network;

/// Closed-form test properties with known violation probabilities.
#[derive(Debug, Clone, PartialEq)]
pub enum AnalyticProperty {
    /// `s(x) = value` everywhere.
    Constant { value: f64 },
    /// `s(x) = -1 - ||x - center||_inf`, negative everywhere.
    Unreachable { center: Vec<f64> },
}

#[derive(Debug, Clone)]
pub enum PropertySpec {
    /// `s(x) = max_{i != c} (z_i(x) - z_c(x))` for logits `z`.
    AdversarialMargin {
        network: Arc<Network>,
        true_class: usize,
    },
    /// `s(x) = a . x - b`.
    LinearThreshold { a: Vec<f64>, b: f64 },
    /// `s(x) = max_j (a_j . x - b_j)`.
    MaxOfLinear { terms: Vec<(Vec<f64>, f64)> },
    Analytic(AnalyticProperty),
}

fn dot(a: &[f64], x: &[f64]) -> f64 {
    a.iter().zip(x).map(|(p, q)| p * q).sum()
}

impl PropertySpec {
    pub fn adversarial_margin(network: Arc<Network>, true_class: usize) -> Result<Self> {
        if network.output_dim() < 2 {
            return Err(Error::Config(format!(
                "adversarial margin needs at least 2 outputs, network has {}",
                network.output_dim()
            )));
        }
        if true_class >= network.output_dim() {
            return Err(Error::Config(format!(
                "true class {true_class} out of range for {} outputs",
                network.output_dim()
            )));
        }
        Ok(PropertySpec::AdversarialMargin {
            network,
            true_class,
        })
    }

    pub fn linear_threshold(a: Vec<f64>, b: f64) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::Config("linear threshold needs a nonempty a".into()));
        }
        Ok(PropertySpec::LinearThreshold { a, b })
    }

    pub fn max_of_linear(terms: Vec<(Vec<f64>, f64)>) -> Result<Self> {
        let d = terms.first().map(|t| t.0.len()).unwrap_or(0);
        if d == 0 || terms.iter().any(|t| t.0.len() != d) {
            return Err(Error::Config(
                "max-of-linear needs at least one term and equal-length coefficient vectors".into(),
            ));
        }
        Ok(PropertySpec::MaxOfLinear { terms })
    }

    /// Input dimension, or `None` for properties defined on any dimension.
    pub fn dim(&self) -> Option<usize> {
        match self {
            PropertySpec::AdversarialMargin { network, .. } => Some(network.input_dim()),
            PropertySpec::LinearThreshold { a, .. } => Some(a.len()),
            PropertySpec::MaxOfLinear { terms } => Some(terms[0].0.len()),
            PropertySpec::Analytic(AnalyticProperty::Constant { .. }) => None,
            PropertySpec::Analytic(AnalyticProperty::Unreachable { center }) => Some(center.len()),
        }
    }

    pub(crate) fn check_dim(&self, d: usize) -> Result<()> {
        match self.dim() {
            Some(e) if e != d => Err(Error::dim_mismatch("property", e, d)),
            _ => Ok(()),
        }
    }

    /// `s(x)` for a single input.
    pub fn evaluate_row(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        let s = match self {
            PropertySpec::AdversarialMargin {
                network,
                true_class,
            } => margin(&network.forward_row(x)?, *true_class),
            PropertySpec::LinearThreshold { a, b } => dot(a, x) - b,
            PropertySpec::MaxOfLinear { terms } => terms
                .iter()
                .map(|(a, b)| dot(a, x) - b)
                .fold(f64::NEG_INFINITY, f64::max),
            PropertySpec::Analytic(AnalyticProperty::Constant { value }) => *value,
            PropertySpec::Analytic(AnalyticProperty::Unreachable { center }) => {
                -1.0 - x
                    .iter()
                    .zip(center)
                    .map(|(v, c)| (v - c).abs())
                    .fold(0.0, f64::max)
            }
        };
        if !s.is_finite() {
            return Err(Error::NonFiniteProperty);
        }
        Ok(s)
    }

    /// `s(x)` for every row of `batch`.
    pub fn evaluate(&self, batch: ArrayView2<'_, f64>) -> Result<Array1<f64>> {
        self.check_dim(batch.ncols())?;
        batch
            .rows()
            .into_iter()
            .map(|row| match row.as_slice() {
                Some(s) => self.evaluate_row(s),
                None => self.evaluate_row(&row.to_vec()),
            })
            .collect::<Result<Vec<_>>>()
            .map(Array1::from)
    }
}

/// `max_{i != c} (z_i - z_c)`.
pub fn margin(logits: &[f64], true_class: usize) -> f64 {
    let zc = logits[true_class];
    logits
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != true_class)
        .map(|(_, z)| z - zc)
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Smallest index attaining the maximum logit at `x_ref`.
pub fn infer_true_class(net: &Network, x_ref: &[f64]) -> Result<usize> {
    let z = net.forward_row(x_ref)?;
    Ok(argmax(&z))
}

pub(crate) fn argmax(z: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in z.iter().enumerate().skip(1) {
        if *v > z[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Layer;
    use ndarray::{array, Array1, Array2};
    use proptest::prelude::*;

    fn passthrough(n: usize) -> Arc<Network> {
        Arc::new(Network::new(n, vec![Layer::dense(Array2::eye(n), Array1::zeros(n))]).unwrap())
    }

    #[test]
    fn margin_example() {
        assert_eq!(margin(&[2.0, 5.0, 1.0], 1), -3.0);
        let spec = PropertySpec::adversarial_margin(passthrough(3), 1).unwrap();
        assert_eq!(spec.evaluate_row(&[2.0, 5.0, 1.0]).unwrap(), -3.0);
    }

    #[test]
    fn margin_tie_is_zero() {
        assert_eq!(margin(&[3.0, 3.0], 0), 0.0);
        assert_eq!(margin(&[3.0, 3.0], 1), 0.0);
    }

    #[test]
    fn linear_threshold_example() {
        let spec = PropertySpec::linear_threshold(vec![1.0, 1.0], 1.5).unwrap();
        assert_eq!(spec.evaluate_row(&[1.0, 1.0]).unwrap(), 0.5);
    }

    #[test]
    fn max_of_linear_takes_largest_term() {
        let spec = PropertySpec::max_of_linear(vec![
            (vec![1.0, 0.0], 0.5),
            (vec![0.0, 1.0], 0.25),
        ])
        .unwrap();
        assert_eq!(spec.evaluate_row(&[0.0, 0.5]).unwrap(), 0.25);
    }

    #[test]
    fn true_class_tie_break_smallest_index() {
        let net = passthrough(2);
        assert_eq!(infer_true_class(&net, &[0.1, 0.9]).unwrap(), 1);
        assert_eq!(infer_true_class(&net, &[3.0, 3.0]).unwrap(), 0);
    }

    #[test]
    fn class_out_of_range() {
        assert!(PropertySpec::adversarial_margin(passthrough(2), 2).is_err());
        assert!(PropertySpec::adversarial_margin(passthrough(1), 0).is_err());
    }

    #[test]
    fn batch_dimension_checked() {
        let spec = PropertySpec::linear_threshold(vec![1.0, 1.0], 0.0).unwrap();
        assert!(matches!(
            spec.evaluate(array![[1.0, 2.0, 3.0]].view()),
            Err(Error::Usage(_))
        ));
    }

    #[test]
    fn unreachable_is_at_most_minus_one() {
        let spec = PropertySpec::Analytic(AnalyticProperty::Unreachable {
            center: vec![0.5, 0.5],
        });
        assert_eq!(spec.evaluate_row(&[0.5, 0.5]).unwrap(), -1.0);
        assert!((spec.evaluate_row(&[0.6, 0.45]).unwrap() + 1.1).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn margin_sign_matches_argmax(z in prop::collection::vec(-5.0f64..5.0, 2..6), c in 0usize..6) {
            let c = c % z.len();
            let s = margin(&z, c);
            let tied = z.iter().enumerate().any(|(i, v)| i != c && *v == z[c]);
            prop_assert_eq!(s >= 0.0, argmax(&z) != c || tied);
        }

        #[test]
        fn evaluate_is_batch_order_equivariant(rows in prop::collection::vec(prop::collection::vec(-1.0f64..1.0, 3), 1..8)) {
            let spec = PropertySpec::max_of_linear(vec![(vec![1.0, -2.0, 0.5], 0.1), (vec![-1.0, 0.3, 2.0], -0.2)]).unwrap();
            let n = rows.len();
            let flat: Vec<f64> = rows.iter().flatten().copied().collect();
            let rev: Vec<f64> = rows.iter().rev().flatten().copied().collect();
            let a = spec.evaluate(Array2::from_shape_vec((n, 3), flat).unwrap().view()).unwrap();
            let b = spec.evaluate(Array2::from_shape_vec((n, 3), rev).unwrap().view()).unwrap();
            for i in 0..n {
                prop_assert_eq!(a[i].to_bits(), b[n - 1 - i].to_bits());
            }
        }

        #[test]
        fn linear_matches_compensated_dot(a in prop::collection::vec(-10.0f64..10.0, 1..12), seed in 0u64..1000) {
            use rand::Rng;
            let mut rng = crate::seed::stream(seed);
            let x: Vec<f64> = (0..a.len()).map(|_| rng.random_range(-10.0..10.0)).collect();
            let spec = PropertySpec::linear_threshold(a.clone(), 0.75).unwrap();
            let got = spec.evaluate_row(&x).unwrap();
            // two-product + two-sum compensated reference
            let (mut s, mut c) = (0.0f64, 0.0f64);
            for (p, q) in a.iter().zip(&x) {
                let prod = p * q;
                let err = p.mul_add(*q, -prod);
                let t = s + prod;
                let z = t - s;
                c += (s - (t - z)) + (prod - z) + err;
                s = t;
            }
            let reference = (s + c) - 0.75;
            let scale = a.iter().zip(&x).map(|(p, q)| (p * q).abs()).sum::<f64>() + 0.75;
            prop_assert!((got - reference).abs() <= 1e-12 * scale.max(1.0));
        }
    }
}
