use super::*;
use crate::numerics::ops::one_hot;
use crate::synthgen::canonical_factors;

fn model(seed: u64) -> DisentangleModel {
    DisentangleModel::init(&canonical_factors(), ModelDims::default(), seed).unwrap()
}

fn zero_all(store: &mut ParamStore) {
    for i in 0..store.slots().len() {
        store.slot_mut(i).value.fill(0.0);
    }
}

fn probe_input(seed: u64) -> Vec<f64> {
    let mut rng = Rng::new(seed);
    (0..FEATURE_DIM).map(|_| rng.uniform_range(0.0, 6.0)).collect()
}

#[test]
fn predictor_layout_follows_n_minus_one_rule() {
    let m = model(1);
    assert_eq!(m.predictor_count(), 6);
    let sizes: Vec<Vec<usize>> = m
        .aes
        .iter()
        .map(|ae| ae.predictors.iter().map(|p| p.net.output_dim()).collect())
        .collect();
    assert_eq!(sizes, vec![vec![3, 3], vec![4, 3], vec![4, 3]]);
    for ae in &m.aes {
        let targets: Vec<usize> = ae.predictors.iter().map(|p| p.target).collect();
        assert_eq!(targets, others(3, ae.owner).collect::<Vec<_>>());
    }
}

#[test]
fn two_factor_model_has_one_adversary_each() {
    let f = vec![FactorSpec::new(0, "speaker", 4), FactorSpec::new(1, "content", 3)];
    let m = DisentangleModel::init(&f, ModelDims::default(), 3).unwrap();
    assert_eq!(m.predictor_count(), 2);
    assert!(matches!(
        DisentangleModel::init(&f[..1], ModelDims::default(), 3),
        Err(crate::Error::TooFewFactors(1))
    ));
}

#[test]
fn init_is_seed_deterministic() {
    assert_eq!(model(5), model(5));
    assert_ne!(model(5), model(6));
}

#[test]
fn store_names_unique() {
    let m = model(1);
    let mut names: Vec<&str> = m.stores().iter().map(|s| s.name()).collect();
    let n = names.len();
    names.sort_unstable();
    names.dedup();
    assert_eq!(names.len(), n);
    assert_eq!(n, 3 * 2 + 6);
}

#[test]
fn decoder_widths() {
    let m = model(1);
    for i in 0..3 {
        let expect = 8 + (0..3).filter(|&j| j != i).map(|j| m.cardinality(j)).sum::<usize>();
        assert_eq!(m.decoder_input_width(i), expect);
        assert_eq!(m.aes[i].decoder.0.input_dim(), expect);
    }
    assert_eq!(m.label_offset(0, 2), 3);
    assert_eq!(m.label_offset(1, 2), 4);
}

#[test]
fn encode_matches_hand_forward() {
    let m = model(8);
    let x = probe_input(2);
    let store = &m.aes[1].encoder.0.store;
    let (w1, b1, w2, b2) = (store.value(0), store.value(1), store.value(2), store.value(3));
    let mut h = vec![0.0; w1.rows()];
    for o in 0..w1.rows() {
        let mut acc = b1.as_slice()[o];
        for k in 0..w1.cols() {
            acc += w1.get(o, k) * x[k];
        }
        h[o] = if acc < 0.0 { 0.01 * acc } else { acc };
    }
    let z = m.encode(1, &x).unwrap();
    assert_eq!(z.len(), 8);
    for o in 0..8 {
        let mut acc = b2.as_slice()[o];
        for k in 0..h.len() {
            acc += w2.get(o, k) * h[k];
        }
        assert!((acc - z[o]).abs() < 1e-12);
    }
    assert_eq!(z, m.encode(1, &x).unwrap());
}

#[test]
fn zero_encoder_gives_zero_latent() {
    let mut m = model(2);
    zero_all(&mut m.aes[0].encoder.0.store);
    assert!(m.encode(0, &probe_input(1)).unwrap().iter().all(|&v| v == 0.0));
    assert!(m.encode(3, &probe_input(1)).is_err());
}

#[test]
fn predictor_outputs_are_distributions() {
    let mut m = model(4);
    let z = m.encode(0, &probe_input(3)).unwrap();
    let p = m.predict(0, 1, &z).unwrap();
    assert_eq!(p.len(), 3);
    assert!((p.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
    assert!(matches!(m.predict(0, 0, &z), Err(crate::Error::SelfPredictor(0))));
    zero_all(&mut m.predictor_mut(2, 0).unwrap().net.store);
    let u = m.predict(2, 0, &z).unwrap();
    assert!(u.iter().all(|&v| (v - 0.25).abs() < 1e-15));
}

#[test]
fn perturbing_one_network_leaves_others_unchanged() {
    let base = model(10);
    let x = probe_input(5);
    let z: Vec<Vec<f64>> = (0..3).map(|i| base.encode(i, &x).unwrap()).collect();
    let outputs = |m: &DisentangleModel| {
        let mut out = Vec::new();
        for i in 0..3 {
            out.push(m.encode(i, &x).unwrap());
            for j in others(3, i) {
                out.push(m.predict(i, j, &z[i]).unwrap());
            }
        }
        out
    };
    let before = outputs(&base);

    let mut m = base.clone();
    m.aes[0].encoder.0.store.slot_mut(0).value.as_mut_slice()[0] += 0.5;
    let after = outputs(&m);
    assert_ne!(before[0], after[0]);
    assert_eq!(before[1..], after[1..]);

    let mut m = base.clone();
    m.predictor_mut(1, 2).unwrap().net.store.slot_mut(2).value.as_mut_slice()[3] += 0.5;
    let after = outputs(&m);
    let changed: Vec<usize> = (0..before.len()).filter(|&k| before[k] != after[k]).collect();
    // layout: [enc0, p01, p02, enc1, p10, p12, enc2, p20, p21]
    assert_eq!(changed, vec![5]);
}

#[test]
fn decode_contract() {
    let mut m = model(3);
    let z = vec![0.1; 8];
    let labels = vec![one_hot(1, 4), one_hot(2, 3)];
    assert_eq!(m.decode(1, &z, &labels).unwrap().len(), FEATURE_DIM);
    assert!(m.decode(1, &z, &[one_hot(1, 4)]).is_err());
    assert!(m.decode(1, &z, &[one_hot(1, 3), one_hot(2, 3)]).is_err());
    assert!(m.decode(1, &z, &[vec![0.5, 0.6, 0.0, 0.0], one_hot(2, 3)]).is_err());

    let store = &mut m.aes[1].decoder.0.store;
    zero_all(store);
    let bias: Vec<f64> = (0..FEATURE_DIM).map(|k| k as f64 * 0.01).collect();
    store.set_value(3, Matrix::row_vector(&bias)).unwrap();
    let soft = vec![vec![0.25; 4], vec![0.2, 0.3, 0.5]];
    assert_eq!(m.decode(1, &[3.0; 8], &soft).unwrap(), bias);
}

#[test]
fn tape_forward_matches_plain_forward() {
    let m = model(12);
    let x = Matrix::from_vec(2, FEATURE_DIM, [probe_input(1), probe_input(2)].concat()).unwrap();
    let mut tape = Tape::new();
    let xv = tape.constant(x.clone());
    let z = m.encode_on_tape(2, &mut tape, xv, true).unwrap();
    assert_eq!(tape.value(z), &m.encode_batch(2, &x).unwrap());
    let p = m.predict_on_tape(2, 0, &mut tape, z, false).unwrap();
    assert_eq!(tape.value(p), &m.predict_batch(2, 0, tape.value(z)).unwrap());
}

#[test]
fn model_file_round_trips_bitwise() {
    let mut m = model(21);
    m.aes[0].encoder.0.store.slot_mut(1).value.as_mut_slice()[0] = 1.0 / 3.0;
    m.aes[2].decoder.0.store.slot_mut(3).value.as_mut_slice()[5] = -0.0;
    let text = m.to_json_string();
    let back = DisentangleModel::from_json(&serde_json::from_str(&text).unwrap()).unwrap();
    for (a, b) in m.stores().iter().zip(back.stores()) {
        let bits = |s: &ParamStore| s.flat_values().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(a), bits(b));
    }
    assert_eq!(back.to_json_string(), text);
    assert!(text.starts_with("{\"version\":1,\"factors\":[{\"name\":\"pitch\",\"cardinality\":4}"));
    assert!(text.contains("\"ae1.pred0.W1\":[["));
}

#[test]
fn model_file_version_checked() {
    let mut v = model(1).to_json();
    v["version"] = 2.into();
    assert!(matches!(
        DisentangleModel::from_json(&v),
        Err(crate::Error::Version { found: 2, .. })
    ));
    let mut v = model(1).to_json();
    v["params"].as_object_mut().unwrap().remove("ae2.dec.b2");
    assert!(DisentangleModel::from_json(&v).is_err());
}
