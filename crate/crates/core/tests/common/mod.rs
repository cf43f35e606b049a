#![allow(dead_code)]

use std::io::Write;

use candle_core::{DType, Device, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Writes straight to the process stdout so the line survives test capture.
pub fn report(criterion: usize, pass: bool, detail: &str) {
    let status = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "[acceptance] criterion {criterion:2}: {status}  {detail}");
    let _ = out.flush();
}

pub fn uniform(shape: &[usize], lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Tensor {
    let n: usize = shape.iter().product();
    let data: Vec<f64> = (0..n).map(|_| rng.random_range(lo..hi)).collect();
    Tensor::from_vec(data, shape, &Device::Cpu).unwrap()
}

#[derive(Debug)]
pub struct GradCheck {
    pub probes: usize,
    pub passed: usize,
    pub worst: f64,
}

impl GradCheck {
    pub fn fraction(&self) -> f64 {
        self.passed as f64 / self.probes as f64
    }

    pub fn ok(&self) -> bool {
        self.fraction() >= 0.95
    }
}

/// Relative error with a small absolute floor so exact zeros compare cleanly.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
}

/// Compares the autodiff gradient of the scalar `f(x)` at `probes` random
/// coordinates of `x` against central differences with step `h` (f64).
pub fn grad_check(
    x: &Tensor,
    f: impl Fn(&Tensor) -> Tensor,
    probes: usize,
    h: f64,
    tol: f64,
    rng: &mut ChaCha8Rng,
) -> GradCheck {
    assert_eq!(x.dtype(), DType::F64);
    let var = Var::from_tensor(x).unwrap();
    let loss = f(var.as_tensor());
    let grads = loss.backward().unwrap();
    let analytic = match grads.get(var.as_tensor()) {
        Some(g) => g.flatten_all().unwrap().to_vec1::<f64>().unwrap(),
        None => vec![0.0; x.elem_count()],
    };
    let base = x.flatten_all().unwrap().to_vec1::<f64>().unwrap();
    let shape = x.dims().to_vec();
    let eval = |v: &[f64]| {
        let t = Tensor::from_vec(v.to_vec(), shape.as_slice(), &Device::Cpu).unwrap();
        f(&t).to_scalar::<f64>().unwrap()
    };
    let mut passed = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..probes {
        let i = rng.random_range(0..base.len());
        let mut v = base.clone();
        v[i] = base[i] + h;
        let up = eval(&v);
        v[i] = base[i] - h;
        let down = eval(&v);
        let numeric = (up - down) / (2.0 * h);
        let e = rel_err(analytic[i], numeric);
        worst = worst.max(e);
        if e <= tol {
            passed += 1;
        }
    }
    GradCheck {
        probes,
        passed,
        worst,
    }
}
