//! Dense/ReLU feed-forward inference and the JSON weight file.
//!
//! The network computes raw logits `z(x)`; softmax is never applied since
//! property functions only look at logit differences.

use std::fs;
use std::path::Path;

use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const WEIGHT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Layer {
    /// `y = W x + b` with `W` stored `out x in`.
    Dense {
        weights: Array2<f64>,
        bias: Array1<f64>,
    },
    Relu,
}

impl Layer {
    pub fn dense(weights: Array2<f64>, bias: Array1<f64>) -> Self {
        Layer::Dense { weights, bias }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    input_dim: usize,
    output_dim: usize,
    layers: Vec<Layer>,
}

impl Network {
    pub fn new(input_dim: usize, layers: Vec<Layer>) -> Result<Self> {
        // forward_row walks weight rows as contiguous slices
        let layers: Vec<Layer> = layers
            .into_iter()
            .map(|layer| match layer {
                Layer::Dense { weights, bias } if !weights.is_standard_layout() => Layer::Dense {
                    weights: weights.as_standard_layout().into_owned(),
                    bias,
                },
                other => other,
            })
            .collect();
        let fail = |layer: usize, reason: String| Error::Load {
            layer: Some(layer),
            reason,
        };
        if input_dim == 0 {
            return Err(Error::Load {
                layer: None,
                reason: "input_dim must be positive".into(),
            });
        }
        let mut width = input_dim;
        for (i, layer) in layers.iter().enumerate() {
            if let Layer::Dense { weights, bias } = layer {
                let (out, inp) = weights.dim();
                if out == 0 || inp == 0 {
                    return Err(fail(i, "dense layer has a zero dimension".into()));
                }
                if inp != width {
                    return Err(fail(
                        i,
                        format!("expects input width {inp} but receives {width}"),
                    ));
                }
                if bias.len() != out {
                    return Err(fail(
                        i,
                        format!("bias has length {} but layer has {out} outputs", bias.len()),
                    ));
                }
                if !weights.iter().chain(bias.iter()).all(|v| v.is_finite()) {
                    return Err(fail(i, "non-finite weight or bias".into()));
                }
                width = out;
            }
        }
        Ok(Network {
            input_dim,
            output_dim: width,
            layers,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Logits for a single input.
    pub fn forward_row(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim {
            return Err(Error::dim_mismatch("forward", self.input_dim, x.len()));
        }
        let mut cur = x.to_vec();
        for (i, layer) in self.layers.iter().enumerate() {
            match layer {
                Layer::Dense { weights, bias } => {
                    let w = weights.as_slice().expect("standard layout");
                    let next: Vec<f64> = w
                        .chunks_exact(cur.len())
                        .zip(bias)
                        .map(|(row, b)| row.iter().zip(&cur).map(|(w, v)| w * v).sum::<f64>() + b)
                        .collect();
                    if !next.iter().all(|v| v.is_finite()) {
                        return Err(Error::Numeric { layer: i });
                    }
                    cur = next;
                }
                Layer::Relu => cur.iter_mut().for_each(|v| *v = v.max(0.0)),
            }
        }
        Ok(cur)
    }

    /// Logits for every row of `batch`. Row `i` of the output depends only on
    /// row `i` of the input.
    pub fn forward(&self, batch: ArrayView2<'_, f64>) -> Result<Array2<f64>> {
        if batch.ncols() != self.input_dim {
            return Err(Error::dim_mismatch("forward", self.input_dim, batch.ncols()));
        }
        let mut out = Array2::zeros((batch.nrows(), self.output_dim));
        for (row, mut dst) in batch.rows().into_iter().zip(out.rows_mut()) {
            let logits = match row.as_slice() {
                Some(s) => self.forward_row(s)?,
                None => self.forward_row(&row.to_vec())?,
            };
            dst.assign(&Array1::from(logits));
        }
        Ok(out)
    }

    /// Seeded dense/ReLU network with He-normal weights and small random
    /// biases. `widths` lists every layer width, input first.
    pub fn seeded_dense_relu<R: Rng + ?Sized>(widths: &[usize], rng: &mut R) -> Result<Self> {
        if widths.len() < 2 {
            return Err(Error::Usage("need at least input and output widths".into()));
        }
        let mut layers = Vec::new();
        for (k, pair) in widths.windows(2).enumerate() {
            let (inp, out) = (pair[0], pair[1]);
            let scale = (2.0 / inp as f64).sqrt();
            let weights = Array2::from_shape_simple_fn((out, inp), || {
                scale * rng.sample::<f64, _>(StandardNormal)
            });
            let bias = Array1::from_shape_simple_fn(out, || {
                0.1 * rng.sample::<f64, _>(StandardNormal)
            });
            layers.push(Layer::dense(weights, bias));
            if k + 2 < widths.len() {
                layers.push(Layer::Relu);
            }
        }
        Network::new(widths[0], layers)
    }

    pub fn to_weight_file(&self) -> WeightFile {
        let layers = self
            .layers
            .iter()
            .map(|l| match l {
                Layer::Dense { weights, bias } => LayerRecord::Dense {
                    out: weights.nrows(),
                    inp: weights.ncols(),
                    weights: weights.iter().copied().collect(),
                    bias: bias.to_vec(),
                },
                Layer::Relu => LayerRecord::Relu,
            })
            .collect();
        WeightFile {
            format_version: WEIGHT_FORMAT_VERSION,
            input_dim: self.input_dim,
            layers,
        }
    }

    pub fn from_weight_file(file: WeightFile) -> Result<Self> {
        if file.format_version != WEIGHT_FORMAT_VERSION {
            return Err(Error::Load {
                layer: None,
                reason: format!("unsupported format_version {}", file.format_version),
            });
        }
        let mut layers = Vec::with_capacity(file.layers.len());
        for (i, rec) in file.layers.into_iter().enumerate() {
            layers.push(match rec {
                LayerRecord::Relu => Layer::Relu,
                LayerRecord::Dense {
                    out,
                    inp,
                    weights,
                    bias,
                } => {
                    if weights.len() != out * inp {
                        return Err(Error::Load {
                            layer: Some(i),
                            reason: format!(
                                "weights has {} entries, expected {out}x{inp}",
                                weights.len()
                            ),
                        });
                    }
                    let weights = Array2::from_shape_vec((out, inp), weights)
                        .expect("length checked above");
                    Layer::dense(weights, Array1::from(bias))
                }
            });
        }
        Network::new(file.input_dim, layers)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: WeightFile = serde_json::from_str(text).map_err(|e| Error::Load {
            layer: None,
            reason: e.to_string(),
        })?;
        Self::from_weight_file(file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_weight_file()).expect("weight file serializes")
    }
}

/// On-disk weight document. Matrices are row-major `out x in`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WeightFile {
    pub format_version: u32,
    pub input_dim: usize,
    pub layers: Vec<LayerRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum LayerRecord {
    Dense {
        out: usize,
        #[serde(rename = "in")]
        inp: usize,
        weights: Vec<f64>,
        bias: Vec<f64>,
    },
    Relu,
}

pub fn load_network(path: impl AsRef<Path>) -> Result<Network> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Network::from_json(&text)
}

pub fn save_network(net: &Network, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, net.to_json()).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::stream;
    use ndarray::array;

    #[test]
    fn identity_dense() {
        let net = Network::new(2, vec![Layer::dense(Array2::eye(2), Array1::zeros(2))]).unwrap();
        assert_eq!(net.forward_row(&[1.0, -2.0]).unwrap(), vec![1.0, -2.0]);
    }

    #[test]
    fn relu_clamps_negative() {
        let net = Network::new(
            1,
            vec![
                Layer::dense(array![[1.0], [-1.0]], array![0.0, 0.0]),
                Layer::Relu,
            ],
        )
        .unwrap();
        assert_eq!(net.forward_row(&[3.0]).unwrap(), vec![3.0, 0.0]);
    }

    #[test]
    fn dimension_chain_enforced() {
        let err = Network::new(
            2,
            vec![
                Layer::dense(Array2::zeros((3, 2)), Array1::zeros(3)),
                Layer::Relu,
                Layer::dense(Array2::zeros((1, 4)), Array1::zeros(1)),
            ],
        )
        .unwrap_err();
        assert!(matches!(err, Error::Load { layer: Some(2), .. }), "{err}");
    }

    #[test]
    fn non_finite_weight_rejected() {
        let err = Network::new(1, vec![Layer::dense(array![[f64::NAN]], array![0.0])]).unwrap_err();
        assert!(matches!(err, Error::Load { layer: Some(0), .. }));
    }

    #[test]
    fn overflow_reports_layer() {
        let net = Network::new(
            1,
            vec![
                Layer::dense(array![[1e300]], array![0.0]),
                Layer::Relu,
                Layer::dense(array![[1e300]], array![0.0]),
            ],
        )
        .unwrap();
        assert!(matches!(
            net.forward_row(&[1e10]),
            Err(Error::Numeric { layer: 0 })
        ));
        assert!(matches!(
            net.forward_row(&[1.0]),
            Err(Error::Numeric { layer: 2 })
        ));
    }

    #[test]
    fn batch_dimension_mismatch() {
        let net = Network::seeded_dense_relu(&[3, 4, 2], &mut stream(0)).unwrap();
        let batch = Array2::zeros((2, 4));
        assert!(matches!(net.forward(batch.view()), Err(Error::Usage(_))));
    }

    #[test]
    fn json_round_trip_is_bit_identical() {
        let net = Network::seeded_dense_relu(&[5, 7, 7, 3], &mut stream(11)).unwrap();
        let back = Network::from_json(&net.to_json()).unwrap();
        assert_eq!(net, back);
        for (a, b) in net.layers().iter().zip(back.layers()) {
            if let (Layer::Dense { weights: wa, .. }, Layer::Dense { weights: wb, .. }) = (a, b) {
                assert!(wa.iter().zip(wb).all(|(x, y)| x.to_bits() == y.to_bits()));
            }
        }
    }

    #[test]
    fn wrong_weight_count_names_layer() {
        let text = r#"{"format_version":1,"input_dim":2,"layers":[
            {"kind":"relu"},
            {"kind":"dense","out":2,"in":2,"weights":[1,0,0],"bias":[0,0]}]}"#;
        let err = Network::from_json(text).unwrap_err();
        assert!(matches!(err, Error::Load { layer: Some(1), .. }), "{err}");
    }
}
