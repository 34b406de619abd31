//! Finite-difference audit of the analytic gradients for every network
//! family, on a small mixed-annotation batch.
//!
//! Each sampled coordinate is differenced at `h` and `h/2`. When the two
//! disagree the coordinate sits on a kink (L1, leaky ReLU, argmin switch)
//! and is redrawn; a corrupted backward rule still yields consistent
//! differences, so redrawing never hides it.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::DisentangleModel;
use crate::numerics::{BackwardFault, Matrix, ParamStore, Rng, Tape};
use crate::synthgen::{canonical_factors, make_dataset, LabeledSample, MaskPolicy};
use crate::trainer::{ae_graph, Batch, TrainConfig};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckConfig {
    pub seed: u64,
    pub params_per_family: usize,
    pub h: f64,
    pub tolerance: f64,
    #[serde(skip)]
    pub fault: Option<BackwardFault>,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            params_per_family: 100,
            h: 1e-5,
            tolerance: 1e-4,
            fault: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FamilyCheck {
    pub family: String,
    pub checked: usize,
    /// Coordinates redrawn because they sat on a kink.
    pub redrawn: usize,
    pub worst_rel_error: f64,
    pub worst_param: String,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GradCheckReport {
    pub families: Vec<FamilyCheck>,
}

impl GradCheckReport {
    pub fn passed(&self) -> bool {
        !self.families.is_empty() && self.families.iter().all(|f| f.passed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Family {
    Encoder,
    Decoder,
    Predictor,
    Composed,
}

impl Family {
    const ALL: [Family; 4] = [Family::Encoder, Family::Decoder, Family::Predictor, Family::Composed];

    fn name(self) -> &'static str {
        match self {
            Family::Encoder => "encoder",
            Family::Decoder => "decoder",
            Family::Predictor => "predictor",
            Family::Composed => "composed",
        }
    }

    fn stores(self) -> Vec<&'static str> {
        match self {
            Family::Encoder => vec!["ae0.enc"],
            Family::Decoder => vec!["ae0.dec"],
            Family::Predictor => vec!["ae0.pred1"],
            Family::Composed => vec!["ae0.enc", "ae0.dec"],
        }
    }
}

struct Fixture {
    batch: Batch,
    config: TrainConfig,
    /// Decoder label block of the composed objective at the base point.
    frozen: Matrix,
}

fn find<'a>(m: &'a DisentangleModel, name: &str) -> &'a ParamStore {
    m.stores().into_iter().find(|s| s.name() == name).expect("known store")
}

fn find_mut<'a>(m: &'a mut DisentangleModel, name: &str) -> &'a mut ParamStore {
    m.stores_mut().into_iter().find(|s| s.name() == name).expect("known store")
}

/// Loss of `family` and, when `fault` is given or `want_grads` is set, its
/// gradients written into the family's stores of `m`.
fn evaluate(
    family: Family,
    m: &mut DisentangleModel,
    fx: &Fixture,
    fault: Option<BackwardFault>,
    want_grads: bool,
) -> Result<f64> {
    let new_tape = || fault.map_or_else(Tape::new, Tape::with_fault);
    let (tape, loss) = match family {
        Family::Encoder | Family::Decoder => {
            let mut tape = new_tape();
            let x = tape.constant(fx.batch.x.clone());
            let z = m.encode_on_tape(0, &mut tape, x, family == Family::Encoder)?;
            let rows: Vec<&[usize]> = fx.batch.labels.iter().map(Vec::as_slice).collect();
            let labels = tape.constant(m.one_hot_block(0, &rows));
            let input = tape.hcat(&[z, labels])?;
            let x_hat = m.decode_on_tape(0, &mut tape, input, family == Family::Decoder)?;
            let loss = tape.l1(x_hat, x)?;
            (tape, loss)
        }
        Family::Predictor => {
            let mut tape = new_tape();
            let z = m.encode_batch(0, &fx.batch.x)?;
            let zv = tape.constant(z);
            let p = m.predict_on_tape(0, 1, &mut tape, zv, true)?;
            let targets: Vec<usize> = fx.batch.labels.iter().map(|l| l[1]).collect();
            let loss = tape.cross_entropy(p, &targets)?;
            (tape, loss)
        }
        Family::Composed => {
            let g = ae_graph(m, 0, &fx.batch, &fx.config, fault, Some(&fx.frozen))?;
            (g.tape, g.loss)
        }
    };
    if want_grads {
        let names = family.stores();
        let mut stores: Vec<&mut ParamStore> = m
            .stores_mut()
            .into_iter()
            .filter(|s| names.contains(&s.name()))
            .collect();
        tape.backward(loss, &mut stores)?;
    }
    Ok(tape.scalar(loss))
}

fn fixture(model: &DisentangleModel, seed: u64) -> Result<Fixture> {
    let full = make_dataset(3, MaskPolicy::Full, seed)?;
    let partial = make_dataset(3, MaskPolicy::Only(1), seed ^ 0x5eed)?;
    let samples: Vec<&LabeledSample> = full.samples.iter().chain(&partial.samples).collect();
    let batch = Batch::from_samples(&samples)?;
    let config = TrainConfig::default();
    let frozen = ae_graph(model, 0, &batch, &config, None, None)?.labels;
    Ok(Fixture { batch, config, frozen })
}

fn perturbed(family: Family, base: &DisentangleModel, fx: &Fixture, store: &str, slot: usize, idx: usize, d: f64) -> Result<f64> {
    let mut m = base.clone();
    find_mut(&mut m, store).slot_mut(slot).value.as_mut_slice()[idx] += d;
    evaluate(family, &mut m, fx, None, false)
}

fn central(family: Family, base: &DisentangleModel, fx: &Fixture, at: (&str, usize, usize), h: f64) -> Result<f64> {
    let (store, slot, idx) = at;
    Ok((perturbed(family, base, fx, store, slot, idx, h)? - perturbed(family, base, fx, store, slot, idx, -h)?) / (2.0 * h))
}

fn rel_error(a: f64, n: f64) -> f64 {
    (a - n).abs() / a.abs().max(n.abs()).max(1e-6)
}

fn check_family(family: Family, model: &DisentangleModel, fx: &Fixture, cfg: &GradCheckConfig, rng: &mut Rng) -> Result<FamilyCheck> {
    let mut analytic = model.clone();
    evaluate(family, &mut analytic, fx, cfg.fault, true)?;

    // Flat index over every coordinate of the family's stores.
    let mut coords: Vec<(&str, usize, usize)> = Vec::new();
    for name in family.stores() {
        for (k, s) in find(model, name).slots().iter().enumerate() {
            coords.extend((0..s.value.len()).map(|idx| (name, k, idx)));
        }
    }
    if coords.len() < cfg.params_per_family {
        return Err(Error::Invalid {
            what: "grad check",
            reason: format!("{} has only {} parameters", family.name(), coords.len()),
        });
    }
    rng.shuffle(&mut coords);

    let mut out = FamilyCheck {
        family: family.name().to_string(),
        checked: 0,
        redrawn: 0,
        worst_rel_error: 0.0,
        worst_param: String::new(),
        passed: false,
    };
    for &(store, slot, idx) in &coords {
        if out.checked == cfg.params_per_family {
            break;
        }
        let fd = central(family, model, fx, (store, slot, idx), cfg.h)?;
        let fd_half = central(family, model, fx, (store, slot, idx), cfg.h / 2.0)?;
        if rel_error(fd, fd_half) > cfg.tolerance / 10.0 {
            out.redrawn += 1;
            continue;
        }
        let a = find(&analytic, store).slot(slot).grad.as_slice()[idx];
        let e = rel_error(a, fd);
        out.checked += 1;
        if e >= out.worst_rel_error {
            let s = find(model, store);
            let cols = s.slot(slot).value.cols();
            out.worst_rel_error = e;
            out.worst_param = format!("{}[{},{}]", s.qualified(slot), idx / cols, idx % cols);
        }
    }
    // Too many kinks would mean the sample no longer represents the family.
    out.passed = out.checked == cfg.params_per_family
        && out.redrawn * 4 <= out.checked
        && out.worst_rel_error <= cfg.tolerance;
    Ok(out)
}

/// Checks encoder, decoder, predictor and composed-objective gradients of a
/// freshly initialised 3-factor model against central finite differences.
pub fn grad_check(cfg: &GradCheckConfig) -> Result<GradCheckReport> {
    let model = DisentangleModel::init(&canonical_factors(), Default::default(), cfg.seed)?;
    let fx = fixture(&model, cfg.seed)?;
    let root = Rng::new(cfg.seed).split("gradcheck");
    let families = Family::ALL
        .iter()
        .map(|&f| check_family(f, &model, &fx, cfg, &mut root.split(f.name())))
        .collect::<Result<Vec<_>>>()?;
    Ok(GradCheckReport { families })
}
