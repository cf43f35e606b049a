//! Finite-difference checks of gradients with respect to network weights.

mod common;

use candle_core::{DType, Tensor, Var};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use retvi::ade;
use retvi::cfa::{Cfa, CfaConfig};
use retvi::nn::{Mode, ParamStore};
use retvi::synthetic::ToyClips;
use retvi::trainer::{Dataset, Precision, TrainConfig, Trainer};

use common::{rel_err, rng, uniform};

fn value(t: &Tensor) -> f64 {
    t.to_dtype(DType::F64).unwrap().to_scalar::<f64>().unwrap()
}

fn nudge(var: &Var, i: usize, delta: f64) {
    let mut v = var.as_tensor().flatten_all().unwrap().to_vec1::<f64>().unwrap();
    v[i] += delta;
    let t = Tensor::from_vec(v, var.as_tensor().shape(), var.device()).unwrap();
    var.set(&t).unwrap();
}

/// Number of probed weights whose autodiff gradient matches central
/// differences. The step is small because ReLU, clamp and max kinks sit
/// close to many weights; biases feeding batch norm have an exactly zero
/// gradient, hence the absolute floor.
fn probe_weights(store: &ParamStore, f: impl Fn() -> Tensor, probes: usize, r: &mut ChaCha8Rng) -> (usize, Vec<String>) {
    let h = 1e-6;
    let grads = f().backward().unwrap();
    let names: Vec<&String> = store.params().keys().collect();
    let mut passed = 0;
    let mut misses = Vec::new();
    for _ in 0..probes {
        let name = names[r.random_range(0..names.len())];
        let var = &store.params()[name];
        let i = r.random_range(0..var.as_tensor().elem_count());
        let analytic = grads
            .get(var.as_tensor())
            .map(|g| g.flatten_all().unwrap().to_vec1::<f64>().unwrap()[i])
            .unwrap_or(0.0);
        nudge(var, i, h);
        let up = value(&f());
        nudge(var, i, -2.0 * h);
        let down = value(&f());
        nudge(var, i, h);
        let numeric = (up - down) / (2.0 * h);
        if rel_err(analytic, numeric) <= 1e-3 || (analytic - numeric).abs() <= 1e-7 {
            passed += 1;
        } else {
            misses.push(format!("{name}[{i}]: {analytic:e} vs {numeric:e}"));
        }
    }
    (passed, misses)
}

#[test]
fn warp_chain_gradient_wrt_cfa_weights() {
    let mut r = rng(21);
    let (cfa, store) = Cfa::seeded(CfaConfig::tiny(), DType::F64, 21).unwrap();
    let v = uniform(&[1, 3, 16, 16], 0.0, 1.0, &mut r);
    let weights = uniform(&[1, 3, 16, 16], 0.0, 1.0, &mut r);
    let f = || {
        let e = ade::energy_batch(&v, &cfa, Mode::Eval).unwrap();
        let h = ade::build_deformation(&e, 0.25, 1.0).unwrap();
        ade::deform_and_sample(&v, &h).unwrap().mul(&weights).unwrap().mean_all().unwrap()
    };
    let (passed, misses) = probe_weights(&store, f, 40, &mut r);
    assert!(passed >= 38, "{passed}/40 probes matched; misses: {misses:#?}");
}

#[test]
fn generator_objective_gradient_wrt_cfa_weights() {
    let mut r = rng(22);
    let clips = ToyClips {
        clips: 1,
        frames: 4,
        height: 32,
        width: 32,
        seed: 22,
    }
    .generate()
    .unwrap();
    let dataset = Dataset::new(clips).unwrap();
    let trainer = Trainer::new(TrainConfig {
        precision: Precision::F64,
        ..TrainConfig::tiny()
    })
    .unwrap();
    let batch = trainer.sample_batch(&dataset, &mut trainer.step_rng(0)).unwrap();
    let f = || trainer.generator_objective(&batch).unwrap();
    let (passed, misses) = probe_weights(trainer.cfa_store(), f, 40, &mut r);
    assert!(passed >= 38, "{passed}/40 probes matched; misses: {misses:#?}");
}
