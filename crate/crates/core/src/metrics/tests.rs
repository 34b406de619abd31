use super::*;
use crate::model::{ModelDims, B2, W2};
use crate::numerics::{Matrix, Rng};
use crate::synthgen::{canonical_factors, make_dataset, MaskPolicy};

fn model(seed: u64) -> DisentangleModel {
    DisentangleModel::init(&canonical_factors(), ModelDims::default(), seed).unwrap()
}

fn fast_probe() -> ProbeConfig {
    ProbeConfig {
        epochs: 40,
        ..ProbeConfig::default()
    }
}

fn zero_encoders(m: &mut DisentangleModel) {
    for i in 0..m.n_factors() {
        let s = &mut m.ae_mut(i).unwrap().encoder.0.store;
        for k in [W2, B2] {
            let (r, c) = s.value(k).shape();
            s.set_value(k, Matrix::zeros(r, c)).unwrap();
        }
    }
}

#[test]
fn constant_latent_scores_chance() {
    let mut m = model(1);
    zero_encoders(&mut m);
    let train = make_dataset(1000, MaskPolicy::Full, 2).unwrap();
    let test = make_dataset(2000, MaskPolicy::Full, 3).unwrap();
    let pm = probe_matrix(&m, &train, &test, 4, &ProbeConfig::default()).unwrap();
    for i in 0..3 {
        for j in 0..3 {
            let chance = m.factors[j].chance();
            assert!((pm.get(i, j) - chance).abs() <= 0.05, "({i},{j}) {}", pm.get(i, j));
        }
    }
}

#[test]
fn one_hot_latent_is_read_back() {
    let train = make_dataset(1000, MaskPolicy::Full, 5).unwrap();
    let test = make_dataset(2000, MaskPolicy::Full, 6).unwrap();
    let latent = |d: &Dataset, j: usize| {
        let rows: Vec<Vec<f64>> = d
            .samples
            .iter()
            .map(|s| {
                let mut z = vec![0.0; 8];
                z[s.labels.class(j)] = 1.0;
                z
            })
            .collect();
        Matrix::from_rows(&rows).unwrap()
    };
    for (j, f) in canonical_factors().iter().enumerate() {
        let y = |d: &Dataset| d.samples.iter().map(|s| s.labels.class(j)).collect::<Vec<_>>();
        let acc = probe_accuracy(
            &latent(&train, j),
            &y(&train),
            &latent(&test, j),
            &y(&test),
            f.cardinality,
            &ProbeConfig::default(),
            &mut Rng::new(7),
        )
        .unwrap();
        assert!(acc >= 0.99, "factor {j}: {acc}");
    }
}

#[test]
fn probing_leaves_model_untouched_and_is_seeded() {
    let m = model(8);
    let before = m.clone();
    let train = make_dataset(300, MaskPolicy::Only(0), 9).unwrap();
    let test = make_dataset(200, MaskPolicy::Full, 10).unwrap();
    let a = probe_matrix(&m, &train, &test, 11, &fast_probe()).unwrap();
    assert_eq!(m, before);
    assert_eq!(a.n(), 3);
    assert!(a.0.iter().flatten().all(|v| (0.0..=1.0).contains(v)));
    let b = probe_matrix(&m, &train, &test, 11, &fast_probe()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn leakage_takes_worst_off_diagonal() {
    let pm = ProbeMatrix(vec![
        vec![0.9, 0.4, 0.3],
        vec![0.3, 0.95, 0.6],
        vec![0.25, 0.33, 0.9],
    ]);
    let chance = [0.25, 1.0 / 3.0, 1.0 / 3.0];
    let l = pm.leakage(&chance);
    assert!((l[0] - (0.4 - 1.0 / 3.0)).abs() < 1e-12);
    assert!((l[1] - (0.6 - 1.0 / 3.0)).abs() < 1e-12);
    assert!((l[2] - 0.0).abs() < 1e-12);
    assert_eq!(pm.diagonal(), vec![0.9, 0.95, 0.9]);
}

#[test]
fn identity_swap_expects_own_labels() {
    let m = model(12);
    let d = make_dataset(3, MaskPolicy::Full, 13).unwrap();
    let s = &d.samples[1];
    for i in 0..3 {
        let r = swap_synthesis(&m, i, s, s).unwrap();
        assert_eq!(r.expected, s.labels);
        assert_eq!(r.x_hat.len(), 128);
    }
    let r = swap_synthesis(&m, 1, &d.samples[0], &d.samples[2]).unwrap();
    assert_eq!(r.expected.class(1), d.samples[0].labels.class(1));
    assert_eq!(r.expected.class(0), d.samples[2].labels.class(0));
}

#[test]
fn swap_agreement_matches_single_swaps() {
    let m = model(14);
    let d = make_dataset(50, MaskPolicy::Full, 15).unwrap();
    let stats = swap_agreement(&m, &d, 40, 16).unwrap();
    assert_eq!(stats.len(), 3);
    for s in &stats {
        for v in [s.swapped, s.carried, s.full] {
            assert!((0.0..=1.0).contains(&v));
        }
        assert!(s.full <= s.swapped);
    }
    assert_eq!(stats, swap_agreement(&m, &d, 40, 16).unwrap());
    assert!(swap_agreement(&m, &d, 0, 16).is_err());
}

#[test]
fn zero_decoder_reconstructs_to_mean_magnitude() {
    let mut m = model(17);
    for i in 0..3 {
        let s = &mut m.ae_mut(i).unwrap().decoder.0.store;
        let (r, c) = s.value(W2).shape();
        s.set_value(W2, Matrix::zeros(r, c)).unwrap();
    }
    let d = make_dataset(20, MaskPolicy::Full, 18).unwrap();
    let mean_abs: f64 = d.samples.iter().flat_map(|s| s.features.as_slice()).map(|v| v.abs()).sum::<f64>() / (20.0 * 128.0);
    for r in reconstruction_report(&m, &d).unwrap() {
        assert!((r - mean_abs).abs() < 1e-12);
    }
}

#[test]
fn report_round_trips_with_fixed_field_order() {
    let m = model(19);
    let train = make_dataset(100, MaskPolicy::Full, 20).unwrap();
    let test = make_dataset(60, MaskPolicy::Full, 21).unwrap();
    let eval = EvalConfig {
        probe: ProbeConfig {
            epochs: 5,
            ..ProbeConfig::default()
        },
        swap_pairs: 10,
    };
    let r = evaluate(&m, &train, &test, &eval, serde_json::json!({"k": 1}), 22).unwrap();
    assert_eq!(r.chance, vec![0.25, 1.0 / 3.0, 1.0 / 3.0]);
    let text = r.to_json_string();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(
        keys,
        [
            "version",
            "probe_matrix",
            "chance",
            "leakage",
            "recon_l1",
            "swap_agreement",
            "swap_swapped",
            "swap_carried",
            "config",
            "seed"
        ]
    );
    let sw: Vec<&str> = v["swap_agreement"].as_object().unwrap().keys().map(String::as_str).collect();
    assert_eq!(sw, ["factor_0", "factor_1", "factor_2"]);
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("r.json");
    r.emit(&p).unwrap();
    assert_eq!(MetricsReport::load(&p).unwrap(), r);
}

#[test]
fn empty_splits_rejected() {
    let m = model(23);
    let mut empty = make_dataset(1, MaskPolicy::Full, 1).unwrap();
    empty.samples.clear();
    let full = make_dataset(10, MaskPolicy::Full, 2).unwrap();
    assert!(probe_matrix(&m, &empty, &full, 0, &fast_probe()).is_err());
    assert!(reconstruction_report(&m, &empty).is_err());
    assert!(swap_agreement(&m, &empty, 5, 0).is_err());
}
