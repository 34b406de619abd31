use super::*;
use proptest::prelude::{prop, prop_assert, proptest};

#[test]
fn square_gradient() {
    let mut store = ParamStore::new("q");
    store.add_vector("w", &[3.0]).unwrap();
    let mut tape = Tape::new();
    let w = tape.param(&store, 0);
    let sq = tape.square(w);
    let loss = tape.sum(sq);
    tape.backward(loss, &mut [&mut store]).unwrap();
    assert_eq!(store.slot(0).grad.as_slice(), &[6.0]);
}

#[test]
fn constant_loss_zeroes_gradients() {
    let mut store = ParamStore::new("q");
    store.add_vector("w", &[3.0, 4.0]).unwrap();
    store.slot_mut(0).grad.fill(9.0);
    let mut tape = Tape::new();
    let _w = tape.param(&store, 0);
    let c = tape.constant(Matrix::scalar(2.5));
    tape.backward(c, &mut [&mut store]).unwrap();
    assert_eq!(store.slot(0).grad.as_slice(), &[0.0, 0.0]);
}

#[test]
fn backward_rejects_non_scalar() {
    let mut store = ParamStore::new("q");
    store.add_vector("w", &[1.0, 2.0]).unwrap();
    let mut tape = Tape::new();
    let w = tape.param(&store, 0);
    assert!(matches!(
        tape.backward(w, &mut [&mut store]),
        Err(crate::Error::NotScalar { rows: 1, cols: 2 })
    ));
}

struct Chain {
    store: ParamStore,
    x: Matrix,
    targets: Vec<usize>,
}

fn chain(seed: u64) -> Chain {
    let mut rng = Rng::new(seed);
    let mut store = ParamStore::new("chain");
    store.add_matrix("W1", he_uniform(12, 6, &mut rng)).unwrap();
    let b1: Vec<f64> = (0..12).map(|_| rng.uniform_range(-0.5, 0.5)).collect();
    store.add_vector("b1", &b1).unwrap();
    store.add_matrix("W2", he_uniform(4, 12, &mut rng)).unwrap();
    let b2: Vec<f64> = (0..4).map(|_| rng.uniform_range(-0.5, 0.5)).collect();
    store.add_vector("b2", &b2).unwrap();
    let x = Matrix::from_vec(5, 6, (0..30).map(|_| rng.uniform_range(-2.0, 2.0)).collect())
        .unwrap();
    let targets = (0..5).map(|_| rng.below(4)).collect();
    Chain { store, x, targets }
}

// Forward-only reference built from the single-sample primitives.
fn chain_loss_reference(c: &Chain) -> f64 {
    let v = |i| c.store.value(i);
    let mut total = 0.0;
    for r in 0..c.x.rows() {
        let h = dense_forward(v(0), v(1).as_slice(), c.x.row(r)).unwrap();
        let h = leaky_relu(&h, LEAKY_SLOPE);
        let logits = dense_forward(v(2), v(3).as_slice(), &h).unwrap();
        total += cross_entropy(&softmax(&logits), c.targets[r]).unwrap();
    }
    total / c.x.rows() as f64
}

fn chain_backward(c: &mut Chain) -> f64 {
    let mut tape = Tape::new();
    let x = tape.constant(c.x.clone());
    let (w1, b1, w2, b2) = (
        tape.param(&c.store, 0),
        tape.param(&c.store, 1),
        tape.param(&c.store, 2),
        tape.param(&c.store, 3),
    );
    let h = tape.dense(x, w1, b1).unwrap();
    let h = tape.leaky_relu(h, LEAKY_SLOPE);
    let logits = tape.dense(h, w2, b2).unwrap();
    let p = tape.softmax(logits);
    let loss = tape.cross_entropy(p, &c.targets).unwrap();
    tape.backward(loss, &mut [&mut c.store]).unwrap();
    tape.scalar(loss)
}

#[test]
fn chain_matches_central_differences() {
    let mut c = chain(5);
    let loss = chain_backward(&mut c);
    assert!((loss - chain_loss_reference(&c)).abs() < 1e-12);

    let h = 1e-5;
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    for s in 0..c.store.slots().len() {
        for k in 0..c.store.value(s).len() {
            let analytic = c.store.slot(s).grad.as_slice()[k];
            let orig = c.store.value(s).as_slice()[k];
            c.store.slot_mut(s).value.as_mut_slice()[k] = orig + h;
            let up = chain_loss_reference(&c);
            c.store.slot_mut(s).value.as_mut_slice()[k] = orig - h;
            let down = chain_loss_reference(&c);
            c.store.slot_mut(s).value.as_mut_slice()[k] = orig;
            let numeric = (up - down) / (2.0 * h);
            let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
            worst = worst.max(rel);
            checked += 1;
        }
    }
    assert!(checked >= 100, "only {checked} parameters");
    assert!(worst <= 1e-4, "worst relative error {worst}");
}

#[test]
fn corrupted_rule_is_detectable() {
    let mut c = chain(6);
    chain_backward(&mut c);
    let good = c.store.flat_grads();
    let mut tape = Tape::with_fault(BackwardFault::LeakyReluSlope);
    let x = tape.constant(c.x.clone());
    let w1 = tape.param(&c.store, 0);
    let b1 = tape.param(&c.store, 1);
    let h = tape.dense(x, w1, b1).unwrap();
    let h = tape.leaky_relu(h, LEAKY_SLOPE);
    let s = tape.sum(h);
    tape.backward(s, &mut [&mut c.store]).unwrap();
    assert_ne!(good, c.store.flat_grads());
}

#[test]
fn hcat_and_l1_gradients() {
    let mut store = ParamStore::new("q");
    store.add_vector("a", &[1.0, -2.0]).unwrap();
    let mut tape = Tape::new();
    let a = tape.param(&store, 0);
    let c = tape.constant(Matrix::row_vector(&[0.5]));
    let cat = tape.hcat(&[a, c]).unwrap();
    let target = tape.constant(Matrix::row_vector(&[0.0, 0.0, 0.5]));
    let l = tape.l1(cat, target).unwrap();
    assert!((tape.scalar(l) - 1.0).abs() < 1e-15);
    tape.backward(l, &mut [&mut store]).unwrap();
    let g = store.slot(0).grad.as_slice();
    assert!((g[0] - 1.0 / 3.0).abs() < 1e-15 && (g[1] + 1.0 / 3.0).abs() < 1e-15);
}

#[test]
fn max_prob_gradient_hits_argmax() {
    let mut store = ParamStore::new("q");
    store.add_vector("p", &[0.2, 0.5, 0.3]).unwrap();
    let mut tape = Tape::new();
    let p = tape.param(&store, 0);
    let m = tape.max_prob(p).unwrap();
    assert_eq!(tape.scalar(m), 0.5);
    tape.backward(m, &mut [&mut store]).unwrap();
    assert_eq!(store.slot(0).grad.as_slice(), &[0.0, 1.0, 0.0]);
}

#[test]
fn identical_seeds_give_identical_training() {
    let run = || {
        let mut c = chain(9);
        for _ in 0..5 {
            chain_backward(&mut c);
            sgd_step(&mut c.store, 0.1, 0.9);
        }
        c.store
    };
    assert_eq!(run(), run());
}

proptest! {
    #[test]
    fn softmax_normalised_and_shift_invariant(
        logits in prop::collection::vec(-50.0f64..50.0, 2..12),
        shift in -100.0f64..100.0,
    ) {
        let p = softmax(&logits);
        let total: f64 = p.iter().sum();
        prop_assert!((total - 1.0).abs() <= 1e-12);
        prop_assert!(p.iter().all(|v| *v >= 0.0 && v.is_finite()));
        let shifted: Vec<f64> = logits.iter().map(|l| l + shift).collect();
        let q = softmax(&shifted);
        for (a, b) in p.iter().zip(&q) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn cross_entropy_finite_on_any_distribution(
        logits in prop::collection::vec(-800.0f64..800.0, 2..6),
    ) {
        let p = softmax(&logits);
        for k in 0..p.len() {
            prop_assert!(cross_entropy(&p, k).unwrap().is_finite());
        }
    }
}

#[test]
fn select_rows_scatters_gradient() {
    let mut store = ParamStore::new("q");
    store
        .add_matrix("m", Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]).unwrap())
        .unwrap();
    let mut tape = Tape::new();
    let m = tape.param(&store, 0);
    let sel = tape.select_rows(m, &[2, 0, 2]).unwrap();
    assert_eq!(tape.value(sel).to_rows(), vec![vec![5.0, 6.0], vec![1.0, 2.0], vec![5.0, 6.0]]);
    let s = tape.sum(sel);
    tape.backward(s, &mut [&mut store]).unwrap();
    assert_eq!(store.slot(0).grad.as_slice(), &[1.0, 1.0, 0.0, 0.0, 2.0, 2.0]);
    assert!(tape.select_rows(m, &[3]).is_err());
}
