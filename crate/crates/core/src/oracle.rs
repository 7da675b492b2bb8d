//! Closed-form ground truth for validating the estimators.

use std::f64::consts::{PI, SQRT_2};

use serde::{Deserialize, Serialize};
use libm::erfc;

use crate::error::{Error, Result};
use crate::input_model::InputModel;
use crate::property::{AnalyticProperty, PropertySpec};

/// Largest dimension for which the alternating Irwin–Hall sum is evaluated.
pub const IRWIN_HALL_MAX_DIM: usize = 30;

/// An input model and property with an exactly known violation probability.
#[derive(Debug, Clone)]
pub struct OracleProblem {
    pub name: String,
    pub model: InputModel,
    pub spec: PropertySpec,
    /// Natural log of the true probability; `-inf` for impossible events.
    pub log_true_prob: f64,
}

/// Oracle problems addressable by name from a job config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum OracleDecl {
    /// `sum_i x_i >= threshold` with `x` uniform on `[0,1]^dim`.
    IrwinHall { dim: usize, threshold: f64 },
    /// `a . x >= b` with `x` standard normal.
    GaussianHalfspace { a: Vec<f64>, b: f64 },
    /// `s(x) = -1 - ||x - c||_inf` on an l-inf ball; never violated.
    ImpossibleEvent {
        #[serde(default = "default_impossible_dim")]
        dim: usize,
    },
}

fn default_impossible_dim() -> usize {
    10
}

impl OracleDecl {
    pub fn label(&self) -> String {
        match self {
            OracleDecl::IrwinHall { dim, threshold } => format!("irwin-hall(d={dim},b={threshold})"),
            OracleDecl::GaussianHalfspace { a, b } => format!("gaussian-halfspace(a={a:?},b={b})"),
            OracleDecl::ImpossibleEvent { dim } => format!("impossible-event(d={dim})"),
        }
    }

    pub fn build(&self) -> Result<OracleProblem> {
        let mut p = match self {
            OracleDecl::IrwinHall { dim, threshold } => irwin_hall_problem(*dim, *threshold)?,
            OracleDecl::GaussianHalfspace { a, b } => gaussian_halfspace_problem(a.clone(), *b)?,
            OracleDecl::ImpossibleEvent { dim } => impossible_event_in(*dim)?,
        };
        p.name = self.label();
        Ok(p)
    }

    /// Problems exercised by the `selftest` command.
    pub fn roster() -> Vec<OracleDecl> {
        vec![
            OracleDecl::IrwinHall {
                dim: 1,
                threshold: 0.5,
            },
            OracleDecl::IrwinHall {
                dim: 2,
                threshold: 1.0,
            },
            OracleDecl::IrwinHall {
                dim: 5,
                threshold: 4.0,
            },
            OracleDecl::IrwinHall {
                dim: 10,
                threshold: 9.5,
            },
            OracleDecl::GaussianHalfspace {
                a: vec![3.0, 4.0],
                b: 5.0,
            },
            OracleDecl::GaussianHalfspace {
                a: vec![1.0],
                b: 3.0,
            },
            OracleDecl::GaussianHalfspace {
                a: vec![1.0; 4],
                b: 12.0,
            },
            OracleDecl::ImpossibleEvent { dim: 10 },
        ]
    }
}

fn ln_factorial(d: usize) -> f64 {
    (2..=d).map(|k| (k as f64).ln()).sum()
}

/// Neumaier-compensated sum.
fn compensated_sum(terms: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for t in terms {
        let s = sum + t;
        if sum.abs() >= t.abs() {
            comp += (sum - s) + t;
        } else {
            comp += (t - s) + sum;
        }
        sum = s;
    }
    sum + comp
}

/// Irwin–Hall CDF `P(sum of d uniforms <= x)` by the full alternating sum
/// `1/d! sum_{k=0}^{floor x} (-1)^k C(d,k) (x-k)^d`.
pub fn irwin_hall_cdf(d: usize, x: f64) -> Result<f64> {
    if d == 0 || d > IRWIN_HALL_MAX_DIM {
        return Err(Error::Domain(format!(
            "alternating Irwin-Hall sum supports 1 <= d <= {IRWIN_HALL_MAX_DIM}, got {d}"
        )));
    }
    if x <= 0.0 {
        return Ok(0.0);
    }
    if x >= d as f64 {
        return Ok(1.0);
    }
    let ln_dfact = ln_factorial(d);
    let mut ln_binom = 0.0;
    let terms = (0..=x.floor() as usize).map(|k| {
        if k > 0 {
            ln_binom += ((d - k + 1) as f64 / k as f64).ln();
        }
        let mag = (ln_binom + d as f64 * (x - k as f64).ln() - ln_dfact).exp();
        if k % 2 == 0 {
            mag
        } else {
            -mag
        }
    });
    let v: Vec<f64> = terms.collect();
    Ok(compensated_sum(v).clamp(0.0, 1.0))
}

/// `ln P(U_1 + ... + U_d >= b)` for i.i.d. uniform `[0,1]` variables.
///
/// Thresholds within one unit of `d` use the corner-simplex volume
/// `(d-b)^d / d!`, which has no cancellation and works for any `d`. Otherwise
/// the alternating sum is evaluated on whichever side of `d/2` keeps the
/// argument small, which limits `d` to [`IRWIN_HALL_MAX_DIM`].
pub fn irwin_hall_tail(d: usize, b: f64) -> Result<f64> {
    if d == 0 {
        return Err(Error::Domain("Irwin-Hall dimension must be positive".into()));
    }
    let df = d as f64;
    if !(0.0..=df).contains(&b) {
        return Err(Error::Domain(format!("threshold {b} outside [0, {d}]")));
    }
    if b >= df - 1.0 {
        return Ok(df * (df - b).ln() - ln_factorial(d));
    }
    if d > IRWIN_HALL_MAX_DIM {
        return Err(Error::Domain(format!(
            "only thresholds b >= d - 1 are supported for d > {IRWIN_HALL_MAX_DIM}"
        )));
    }
    let mirrored = df - b;
    if mirrored <= df / 2.0 {
        Ok(irwin_hall_cdf(d, mirrored)?.ln())
    } else {
        Ok((-irwin_hall_cdf(d, b)?).ln_1p())
    }
}

/// `ln Phi_bar(z)`, the log upper tail of the standard normal.
pub fn log_normal_upper_tail(z: f64) -> f64 {
    if z < 0.0 {
        return (-0.5 * erfc(-z / SQRT_2)).ln_1p();
    }
    if z <= 5.0 {
        return (0.5 * erfc(z / SQRT_2)).ln();
    }
    // Mills ratio by continued fraction R(z) = 1/(z+ 1/(z+ 2/(z+ 3/(z+ ...)))),
    // evaluated bottom-up.
    let mut tail = z;
    for k in (1..=200).rev() {
        tail = z + k as f64 / tail;
    }
    -0.5 * z * z - 0.5 * (2.0 * PI).ln() - tail.ln()
}

/// `ln P(a . X >= b)` for `X` standard normal: `ln Phi_bar(b / ||a||)`.
pub fn gaussian_halfspace_tail(a: &[f64], b: f64) -> Result<f64> {
    let norm = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::Domain("halfspace normal must be nonzero and finite".into()));
    }
    Ok(log_normal_upper_tail(b / norm))
}

pub fn irwin_hall_problem(d: usize, b: f64) -> Result<OracleProblem> {
    let log_true_prob = irwin_hall_tail(d, b)?;
    Ok(OracleProblem {
        name: format!("irwin-hall(d={d},b={b})"),
        model: InputModel::unit_box(d)?,
        spec: PropertySpec::linear_threshold(vec![1.0; d], b)?,
        log_true_prob,
    })
}

pub fn gaussian_halfspace_problem(a: Vec<f64>, b: f64) -> Result<OracleProblem> {
    let log_true_prob = gaussian_halfspace_tail(&a, b)?;
    Ok(OracleProblem {
        name: format!("gaussian-halfspace(a={a:?},b={b})"),
        model: InputModel::standard_normal(a.len())?,
        spec: PropertySpec::linear_threshold(a, b)?,
        log_true_prob,
    })
}

/// Unreachable property on the l-inf ball of radius 0.1 around `0.5 * 1`.
pub fn impossible_event() -> OracleProblem {
    impossible_event_in(default_impossible_dim()).expect("default dimension is valid")
}

pub fn impossible_event_in(dim: usize) -> Result<OracleProblem> {
    let center = vec![0.5; dim];
    Ok(OracleProblem {
        name: format!("impossible-event(d={dim})"),
        model: InputModel::linf_ball(center.clone(), 0.1, None)?,
        spec: PropertySpec::Analytic(AnalyticProperty::Unreachable { center }),
        log_true_prob: f64::NEG_INFINITY,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn irwin_hall_small_cases() {
        assert_relative_eq!(irwin_hall_tail(1, 0.5).unwrap(), 0.5f64.ln(), epsilon = 1e-15);
        assert_relative_eq!(irwin_hall_tail(2, 1.0).unwrap(), 0.5f64.ln(), epsilon = 1e-15);
        assert_relative_eq!(
            irwin_hall_tail(5, 4.0).unwrap(),
            (1.0f64 / 120.0).ln(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn corner_form_matches_alternating_sum() {
        // d = 10, b = 9.5: corner volume 0.5^10 / 10!
        let corner = irwin_hall_tail(10, 9.5).unwrap();
        let expected = 10.0 * 0.5f64.ln() - ln_factorial(10);
        assert_relative_eq!(corner, expected, epsilon = 1e-13);
        // the same value through the full alternating sum on the lower side
        let full = (1.0 - irwin_hall_cdf(10, 9.5).unwrap()).ln();
        let via_mirror = irwin_hall_cdf(10, 0.5).unwrap().ln();
        assert_relative_eq!(via_mirror, expected, epsilon = 1e-13);
        // 1 - CDF loses everything at this depth; only the order of magnitude survives
        assert!(full.is_infinite() || (full - expected).abs() < 1.0);
        assert_relative_eq!(corner / std::f64::consts::LN_10, -9.570062989516606, epsilon = 1e-12);
    }

    #[test]
    fn irwin_hall_mid_range_against_high_precision() {
        // P(sum of 6 uniforms >= 2.5) from a 50-digit evaluation of the same sum
        let reference: f64 = 0.7555121527777778;
        assert_relative_eq!(irwin_hall_tail(6, 2.5).unwrap().exp(), reference, epsilon = 1e-14);
    }

    #[test]
    fn irwin_hall_symmetry_and_monotonicity() {
        for d in [3usize, 7, 12] {
            let df = d as f64;
            let mut prev = 0.0f64;
            for i in 1..20 {
                let b = df * i as f64 / 20.0;
                let tail = irwin_hall_tail(d, b).unwrap();
                assert!(tail < prev, "not decreasing at d={d}, b={b}");
                prev = tail;
                // P(S >= b) = P(S <= d - b), checked on the side where the
                // alternating sum has no cancellation
                if b >= df / 2.0 {
                    let lower = irwin_hall_cdf(d, df - b).unwrap().ln();
                    assert_relative_eq!(tail, lower, max_relative = 1e-12);
                }
                // P(S >= b) + P(S >= d - b) = 1
                let mirrored = irwin_hall_tail(d, df - b).unwrap();
                assert_relative_eq!(tail.exp() + mirrored.exp(), 1.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn irwin_hall_domain_errors() {
        assert!(matches!(irwin_hall_tail(3, -0.1), Err(Error::Domain(_))));
        assert!(matches!(irwin_hall_tail(3, 3.1), Err(Error::Domain(_))));
        assert!(matches!(irwin_hall_tail(40, 20.0), Err(Error::Domain(_))));
        assert!(irwin_hall_tail(40, 39.5).unwrap().is_finite());
        assert_eq!(irwin_hall_tail(3, 3.0).unwrap(), f64::NEG_INFINITY);
    }

    #[test]
    fn gaussian_tail_values() {
        assert_relative_eq!(gaussian_halfspace_tail(&[1.0], 0.0).unwrap(), 0.5f64.ln(), epsilon = 1e-15);
        // ln Phi_bar(1)
        assert_relative_eq!(
            gaussian_halfspace_tail(&[3.0, 4.0], 5.0).unwrap(),
            -1.8410216450092635,
            epsilon = 1e-13
        );
        // Phi_bar(6) = 9.8658764503769814e-10
        assert_relative_eq!(
            gaussian_halfspace_tail(&[1.0], 6.0).unwrap(),
            9.8658764503769814e-10f64.ln(),
            epsilon = 1e-12
        );
        // ln Phi_bar(40), far below f64 range in linear space
        assert_relative_eq!(log_normal_upper_tail(40.0), -804.6084420137538, max_relative = 1e-14);
        // negative side
        assert_relative_eq!(
            log_normal_upper_tail(-1.0),
            (1.0 - (-1.8410216450092635f64).exp()).ln(),
            epsilon = 1e-14
        );
        assert!(gaussian_halfspace_tail(&[0.0, 0.0], 1.0).is_err());
    }

    #[test]
    fn normal_tail_continuous_across_branch() {
        let below = log_normal_upper_tail(5.0);
        let above = log_normal_upper_tail(5.0 + 1e-9);
        assert!((below - above).abs() < 1e-7);
    }

    #[test]
    fn impossible_event_values() {
        let p = impossible_event();
        assert_eq!(p.spec.evaluate_row(&[0.5; 10]).unwrap(), -1.0);
        assert_eq!(p.log_true_prob, f64::NEG_INFINITY);
        let xs = p.model.sample_prior(100, &mut crate::seed::stream(0)).unwrap();
        assert!(p.spec.evaluate(xs.view()).unwrap().iter().all(|&s| s <= -1.0));
    }

    #[test]
    fn decl_round_trips_through_json() {
        for decl in OracleDecl::roster() {
            let text = serde_json::to_string(&decl).unwrap();
            let back: OracleDecl = serde_json::from_str(&text).unwrap();
            assert_eq!(decl, back);
            assert!(decl.build().is_ok());
        }
    }
}
