use std::path::PathBuf;

use amls::network::{load_network, save_network, Layer};
use amls::property::infer_true_class;
use amls::seed::stream;
use amls::{Error, Network};
use ndarray::Array2;
use proptest::prelude::*;
use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

/// Straight-line single-example evaluator working directly on the weight
/// file's JSON, independent of the library's `Network`.
fn reference_forward(doc: &Value, x: &[f64]) -> Vec<f64> {
    let mut cur = x.to_vec();
    for layer in doc["layers"].as_array().unwrap() {
        match layer["kind"].as_str().unwrap() {
            "dense" => {
                let out = layer["out"].as_u64().unwrap() as usize;
                let inp = layer["in"].as_u64().unwrap() as usize;
                let w: Vec<f64> = layer["weights"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
                let b: Vec<f64> = layer["bias"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
                let mut next = vec![0.0; out];
                for i in 0..out {
                    let mut acc = 0.0;
                    for j in 0..inp {
                        acc += w[i * inp + j] * cur[j];
                    }
                    next[i] = acc + b[i];
                }
                cur = next;
            }
            "relu" => {
                for v in cur.iter_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
            other => panic!("unknown layer {other}"),
        }
    }
    cur
}

#[test]
fn identity_fixture_loads() {
    let net = load_network(fixture("identity_2.json")).unwrap();
    assert_eq!(net.layers().len(), 1);
    assert_eq!(net.forward_row(&[1.0, -2.0]).unwrap(), vec![1.0, -2.0]);
}

#[test]
fn mismatched_dims_fixture_rejected() {
    match load_network(fixture("mismatched_dims.json")) {
        Err(Error::Load { layer: Some(2), reason }) => assert!(reason.contains("input width")),
        other => panic!("expected load error on layer 2, got {other:?}"),
    }
}

#[test]
fn missing_file_is_io_error() {
    assert!(matches!(load_network(fixture("nope.json")), Err(Error::Io { .. })));
}

#[test]
fn torch_exported_net_matches_torch_logits() {
    let net = load_network(fixture("torch_16x32x32x4.json")).unwrap();
    assert_eq!((net.input_dim(), net.output_dim()), (16, 4));
    let parity: Value =
        serde_json::from_str(&std::fs::read_to_string(fixture("torch_16x32x32x4_parity.json")).unwrap()).unwrap();
    let inputs = parity["inputs"].as_array().unwrap();
    let logits = parity["logits"].as_array().unwrap();
    let argmax = parity["argmax"].as_array().unwrap();
    assert_eq!(inputs.len(), 10);
    for ((x, z), c) in inputs.iter().zip(logits).zip(argmax) {
        let x: Vec<f64> = x.as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
        let got = net.forward_row(&x).unwrap();
        for (g, e) in got.iter().zip(z.as_array().unwrap()) {
            assert!((g - e.as_f64().unwrap()).abs() <= 1e-5);
        }
        assert_eq!(infer_true_class(&net, &x).unwrap() as u64, c.as_u64().unwrap());
    }
}

#[test]
fn save_load_is_bit_identical() {
    let net = load_network(fixture("torch_16x32x32x4.json")).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("net.json");
    save_network(&net, &path).unwrap();
    let back = load_network(&path).unwrap();
    for (a, b) in net.layers().iter().zip(back.layers()) {
        match (a, b) {
            (Layer::Dense { weights: wa, bias: ba }, Layer::Dense { weights: wb, bias: bb }) => {
                assert!(wa.iter().zip(wb).all(|(x, y)| x.to_bits() == y.to_bits()));
                assert!(ba.iter().zip(bb).all(|(x, y)| x.to_bits() == y.to_bits()));
            }
            (Layer::Relu, Layer::Relu) => {}
            _ => panic!("layer kinds differ"),
        }
    }
}

#[test]
fn zero_input_propagates_biases() {
    let net = Network::seeded_dense_relu(&[2, 16, 16, 3], &mut stream(21)).unwrap();
    let doc: Value = serde_json::from_str(&net.to_json()).unwrap();
    let expected = reference_forward(&doc, &[0.0, 0.0]);
    let got = net.forward_row(&[0.0, 0.0]).unwrap();
    assert_eq!(got, expected);
}

#[test]
fn random_inputs_match_reference_evaluator() {
    use rand::Rng;
    let net = Network::seeded_dense_relu(&[2, 16, 16, 3], &mut stream(22)).unwrap();
    let doc: Value = serde_json::from_str(&net.to_json()).unwrap();
    let mut rng = stream(23);
    for _ in 0..100 {
        let x = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
        let got = net.forward_row(&x).unwrap();
        let want = reference_forward(&doc, &x);
        for (g, w) in got.iter().zip(&want) {
            assert!((g - w).abs() <= 1e-12 * w.abs().max(1.0));
        }
    }
}

fn zero_bias(net: &Network) -> Network {
    let layers = net
        .layers()
        .iter()
        .map(|l| match l {
            Layer::Dense { weights, bias } => Layer::dense(weights.clone(), bias.mapv(|_| 0.0)),
            Layer::Relu => Layer::Relu,
        })
        .collect();
    Network::new(net.input_dim(), layers).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn batch_forward_equals_row_forward(seed in 0u64..1000, rows in 1usize..12) {
        use rand::Rng;
        let net = Network::seeded_dense_relu(&[5, 8, 3], &mut stream(seed)).unwrap();
        let mut rng = stream(seed + 1);
        let batch = Array2::from_shape_simple_fn((rows, 5), || rng.random_range(-1.0..1.0));
        let out = net.forward(batch.view()).unwrap();
        for (i, row) in batch.rows().into_iter().enumerate() {
            let single = net.forward_row(row.as_slice().unwrap()).unwrap();
            for (a, b) in out.row(i).iter().zip(&single) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
        // no hidden state
        prop_assert_eq!(out, net.forward(batch.view()).unwrap());
    }

    #[test]
    fn relu_stack_without_bias_is_positively_homogeneous(seed in 0u64..1000, alpha in 0.01f64..100.0) {
        use rand::Rng;
        let net = zero_bias(&Network::seeded_dense_relu(&[4, 6, 6, 2], &mut stream(seed)).unwrap());
        let mut rng = stream(seed ^ 0xABCD);
        let x: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        let scaled: Vec<f64> = x.iter().map(|v| alpha * v).collect();
        let a = net.forward_row(&scaled).unwrap();
        let b = net.forward_row(&x).unwrap();
        for (p, q) in a.iter().zip(&b) {
            prop_assert!((p - alpha * q).abs() <= 1e-12 * (1.0 + (alpha * q).abs()));
        }
    }
}
