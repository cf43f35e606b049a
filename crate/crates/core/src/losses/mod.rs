//! Training objectives: critical-region, global-integrity, temporal-consistency
//! and fidelity terms, plus their weighted combination.
//!
//! All functions work on batched tensors `(N, 3, H, W)` with values in `[0, 1]`
//! and return scalar (rank-0) tensors that stay on the autodiff graph.

pub mod backbone;
pub mod fid_disc;

use candle_core::Tensor;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{self, Mode};

pub use backbone::{Backbone, BackboneConfig, BackboneIdentity, BackboneOutput};
pub use fid_disc::{bce, FidDisc, FidDiscConfig};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda_c: f64,
    pub lambda_g: f64,
    pub lambda_t: f64,
    pub lambda_f: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda_c: 1.0,
            lambda_g: 1.0,
            lambda_t: 1.0,
            lambda_f: 1.0,
        }
    }
}

impl LossWeights {
    pub fn zero() -> Self {
        Self {
            lambda_c: 0.0,
            lambda_g: 0.0,
            lambda_t: 0.0,
            lambda_f: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.lambda_c, self.lambda_g, self.lambda_t, self.lambda_f];
        if all.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::Config(format!("loss weights must be finite and >= 0, got {all:?}")));
        }
        Ok(())
    }

    pub fn as_array(&self) -> [f64; 4] {
        [self.lambda_c, self.lambda_g, self.lambda_t, self.lambda_f]
    }
}

/// The four loss components, in the order critical, global, temporal, fidelity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossParts<T> {
    pub critical: T,
    pub global: T,
    pub temporal: T,
    pub fidelity: T,
}

impl<T> LossParts<T> {
    pub fn as_array(&self) -> [&T; 4] {
        [&self.critical, &self.global, &self.temporal, &self.fidelity]
    }

    pub fn names() -> [&'static str; 4] {
        ["critical", "global", "temporal", "fidelity"]
    }
}

impl LossParts<f64> {
    pub fn weighted(&self, w: &LossWeights) -> f64 {
        self.as_array()
            .iter()
            .zip(w.as_array())
            .map(|(p, w)| **p * w)
            .sum()
    }
}

impl LossParts<Tensor> {
    pub fn values(&self) -> Result<LossParts<f64>> {
        Ok(LossParts {
            critical: nn::scalar(&self.critical)?,
            global: nn::scalar(&self.global)?,
            temporal: nn::scalar(&self.temporal)?,
            fidelity: nn::scalar(&self.fidelity)?,
        })
    }

    /// Fails with the name of the first non-finite component.
    pub fn ensure_finite(&self) -> Result<()> {
        for (name, t) in Self::names().iter().zip(self.as_array()) {
            nn::ensure_finite(t, name)?;
        }
        Ok(())
    }
}

/// Weighted sum of the four parts. Terms with weight 0 are left out of the
/// graph so they contribute no gradient at all.
pub fn total_loss(parts: &LossParts<Tensor>, w: &LossWeights) -> Result<Tensor> {
    let mut total = parts.critical.zeros_like()?.detach();
    for (p, wi) in parts.as_array().into_iter().zip(w.as_array()) {
        if wi != 0.0 {
            total = (total + p.affine(wi, 0.0)?)?;
        }
    }
    Ok(total)
}

fn check_pair(a: &Tensor, b: &Tensor, what: &str) -> Result<()> {
    if a.dims() != b.dims() {
        return Err(Error::shape(format!(
            "{what}: operands differ in shape, {:?} vs {:?}",
            a.dims(),
            b.dims()
        )));
    }
    Ok(())
}

/// Sum over layers of the per-layer mean squared feature difference,
/// averaged over the batch.
pub fn critical_region_from_features(a: &[Tensor], b: &[Tensor]) -> Result<Tensor> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::shape("feature lists differ in length"));
    }
    let mut total: Option<Tensor> = None;
    for (fa, fb) in a.iter().zip(b) {
        check_pair(fa, fb, "critical-region features")?;
        let term = (fa - fb)?.sqr()?.mean_all()?;
        total = Some(match total {
            None => term,
            Some(t) => (t + term)?,
        });
    }
    Ok(total.expect("non-empty"))
}

/// Critical-region loss between foreground frames `ve` and the pre-crop warped
/// foreground `re`; both are resized to the backbone input.
pub fn critical_region_loss(ve: &Tensor, re: &Tensor, bb: &Backbone) -> Result<Tensor> {
    check_pair(ve, re, "critical-region loss")?;
    let fa = bb.features(ve)?;
    let fb = bb.features(re)?;
    for f in fa.iter().chain(&fb) {
        nn::ensure_finite(f, "backbone features")?;
    }
    critical_region_from_features(&fa, &fb)
}

/// Squared L2 distance of class distributions, averaged over the batch.
pub fn global_integrity_from_logits(xo: &Tensor, xr: &Tensor) -> Result<Tensor> {
    check_pair(xo, xr, "global-integrity logits")?;
    let po = nn::softmax_last(xo)?;
    let pr = nn::softmax_last(xr)?;
    Ok((po - pr)?.sqr()?.sum(1)?.mean_all()?)
}

/// Global-integrity loss. The frames may differ in size; each is resized to
/// the classifier input independently.
pub fn global_integrity_loss(vo: &Tensor, ro: &Tensor, bb: &Backbone) -> Result<Tensor> {
    let xo = bb.forward(vo)?.logits;
    let xr = bb.forward(ro)?.logits;
    global_integrity_from_logits(&xo, &xr)
}

/// Mean over `(C, H, W)` of the elementwise product of three feature maps,
/// one value per batch item.
pub fn triplet_correlation(prev: &Tensor, cur: &Tensor, next: &Tensor) -> Result<Tensor> {
    check_pair(prev, cur, "triplet correlation")?;
    check_pair(cur, next, "triplet correlation")?;
    let p = (prev * cur)?.mul(next)?;
    Ok(p.flatten_from(1)?.mean(1)?)
}

/// Per-layer correlations, `(N, layers)`, of a triplet given its features.
pub fn triplet_profile(feats: [&[Tensor]; 3]) -> Result<Tensor> {
    let [a, b, c] = feats;
    if a.len() != b.len() || b.len() != c.len() || a.is_empty() {
        return Err(Error::shape("triplet feature lists differ in length"));
    }
    let gammas = a
        .iter()
        .zip(b)
        .zip(c)
        .map(|((x, y), z)| triplet_correlation(x, y, z))
        .collect::<Result<Vec<_>>>()?;
    Ok(Tensor::stack(&gammas, 1)?)
}

/// Sum over layers of squared correlation differences, averaged over the batch.
pub fn temporal_from_features(src: [&[Tensor]; 3], ret: [&[Tensor]; 3]) -> Result<Tensor> {
    let gs = triplet_profile(src)?;
    let gr = triplet_profile(ret)?;
    check_pair(&gs, &gr, "temporal profiles")?;
    Ok((gs - gr)?.sqr()?.sum(1)?.mean_all()?)
}

/// Temporal-consistency loss between a source triplet and its retargeted
/// triplet, each given as three `(N, 3, H, W)` batches.
pub fn temporal_consistency_loss(src: [&Tensor; 3], ret: [&Tensor; 3], bb: &Backbone) -> Result<Tensor> {
    let fs = src.map(|t| bb.features(t));
    let fr = ret.map(|t| bb.features(t));
    let [s0, s1, s2] = fs;
    let [r0, r1, r2] = fr;
    let (s0, s1, s2, r0, r1, r2) = (s0?, s1?, s2?, r0?, r1?, r2?);
    temporal_from_features([&s0, &s1, &s2], [&r0, &r1, &r2])
}

/// Discriminator objective and generator adversarial term.
#[derive(Clone, Debug)]
pub struct FidelityTerms {
    pub d_loss: Tensor,
    pub g_term: Tensor,
}

/// Both fidelity terms from discriminator scores on real and retargeted frames.
pub fn fidelity_from_scores(real: &Tensor, fake: &Tensor) -> Result<FidelityTerms> {
    let d_loss = ((bce(real, 1.0)? + bce(fake, 0.0)?)? * 0.5)?;
    let g_term = bce(fake, 1.0)?;
    Ok(FidelityTerms { d_loss, g_term })
}

pub fn fidelity_losses(vo: &Tensor, ro: &Tensor, disc: &FidDisc, mode: Mode) -> Result<FidelityTerms> {
    let real = disc.forward(vo, mode)?;
    let fake = disc.forward(ro, mode)?;
    nn::ensure_finite(&real, "fid-disc")?;
    nn::ensure_finite(&fake, "fid-disc")?;
    fidelity_from_scores(&real, &fake)
}

#[cfg(test)]
mod tests {
    use super::*;
    use candle_core::{DType, Device};
    use std::f64::consts::LN_2;

    fn small_backbone(dtype: DType) -> Backbone {
        Backbone::seeded(BackboneConfig::compact().with_resolution(32), dtype).unwrap()
    }

    fn rand(shape: (usize, usize, usize, usize)) -> Tensor {
        Tensor::rand(0f64, 1.0, shape, &Device::Cpu).unwrap()
    }

    #[test]
    fn total_is_weighted_sum() {
        let dev = Device::Cpu;
        let t = |v: f64| Tensor::new(v, &dev).unwrap();
        let parts = LossParts {
            critical: t(1.0),
            global: t(2.0),
            temporal: t(3.0),
            fidelity: t(4.0),
        };
        let w = LossWeights::default();
        assert_eq!(nn::scalar(&total_loss(&parts, &w).unwrap()).unwrap(), 10.0);
        assert_eq!(parts.values().unwrap().weighted(&w), 10.0);
        let zero = LossParts {
            critical: t(0.0),
            global: t(0.0),
            temporal: t(0.0),
            fidelity: t(0.0),
        };
        assert_eq!(nn::scalar(&total_loss(&zero, &w).unwrap()).unwrap(), 0.0);
        assert!(LossWeights { lambda_g: -1.0, ..w }.validate().is_err());
    }

    #[test]
    fn zero_weight_drops_gradient() {
        let dev = Device::Cpu;
        let v = candle_core::Var::new(&[1.5f64], &dev).unwrap();
        let sq = v.as_tensor().sqr().unwrap().sum_all().unwrap();
        let c = Tensor::new(1.0f64, &dev).unwrap();
        let parts = LossParts {
            critical: c.clone(),
            global: sq,
            temporal: c.clone(),
            fidelity: c,
        };
        let w = LossWeights {
            lambda_g: 0.0,
            ..Default::default()
        };
        let grads = total_loss(&parts, &w).unwrap().backward().unwrap();
        assert!(grads.get(v.as_tensor()).is_none());
    }

    #[test]
    fn critical_region_properties() {
        let bb = small_backbone(DType::F64);
        let ve = rand((1, 3, 24, 24));
        let l0 = nn::scalar(&critical_region_loss(&ve, &ve, &bb).unwrap()).unwrap();
        assert_eq!(l0, 0.0);
        let mask = Tensor::new(&[0f64, 1.0, 1.0], &Device::Cpu)
            .unwrap()
            .reshape((1, 3, 1, 1))
            .unwrap();
        let re = ve.broadcast_mul(&mask).unwrap();
        let ab = nn::scalar(&critical_region_loss(&ve, &re, &bb).unwrap()).unwrap();
        let ba = nn::scalar(&critical_region_loss(&re, &ve, &bb).unwrap()).unwrap();
        assert!(ab > 0.0);
        assert!((ab - ba).abs() <= 1e-12 * ab.max(1.0));
    }

    #[test]
    fn global_integrity_properties() {
        let dev = Device::Cpu;
        let logits = Tensor::randn(0f64, 3.0, (4, 1000), &dev).unwrap();
        let sums = nn::softmax_last(&logits).unwrap().sum(1).unwrap().to_vec1::<f64>().unwrap();
        assert!(sums.iter().all(|s| (s - 1.0).abs() < 1e-6));

        let mut a = vec![0f64; 1000];
        let mut b = vec![0f64; 1000];
        a[3] = 1e4;
        b[7] = 1e4;
        let a = Tensor::from_vec(a, (1, 1000), &dev).unwrap();
        let b = Tensor::from_vec(b, (1, 1000), &dev).unwrap();
        let v = nn::scalar(&global_integrity_from_logits(&a, &b).unwrap()).unwrap();
        assert!((v - 2.0).abs() < 1e-12);

        let bb = small_backbone(DType::F64);
        let vo = rand((1, 3, 20, 30));
        assert_eq!(nn::scalar(&global_integrity_loss(&vo, &vo, &bb).unwrap()).unwrap(), 0.0);
        let ro = rand((1, 3, 20, 15));
        let v = nn::scalar(&global_integrity_loss(&vo, &ro, &bb).unwrap()).unwrap();
        assert!((0.0..=2.0).contains(&v));
    }

    fn gamma_loop(a: &Tensor, b: &Tensor, c: &Tensor) -> Vec<f64> {
        let (n, ch, h, w) = a.dims4().unwrap();
        let va = a.flatten_all().unwrap().to_vec1::<f64>().unwrap();
        let vb = b.flatten_all().unwrap().to_vec1::<f64>().unwrap();
        let vc = c.flatten_all().unwrap().to_vec1::<f64>().unwrap();
        let per = ch * h * w;
        (0..n)
            .map(|k| {
                let mut s = 0.0;
                for i in 0..per {
                    let idx = k * per + i;
                    s += va[idx] * vb[idx] * vc[idx];
                }
                s / per as f64
            })
            .collect()
    }

    #[test]
    fn triplet_correlation_matches_loop() {
        let dev = Device::Cpu;
        let ones = Tensor::ones((2, 4, 3, 3), DType::F64, &dev).unwrap();
        let g = triplet_correlation(&ones, &ones, &ones).unwrap().to_vec1::<f64>().unwrap();
        assert_eq!(g, vec![1.0, 1.0]);
        for _ in 0..5 {
            let a = Tensor::randn(0f64, 1.0, (2, 5, 6, 7), &dev).unwrap();
            let b = Tensor::randn(0f64, 1.0, (2, 5, 6, 7), &dev).unwrap();
            let c = Tensor::randn(0f64, 1.0, (2, 5, 6, 7), &dev).unwrap();
            let v = triplet_correlation(&a, &b, &c).unwrap().to_vec1::<f64>().unwrap();
            for (x, y) in v.iter().zip(gamma_loop(&a, &b, &c)) {
                assert!((x - y).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn temporal_zero_on_identical_triplets() {
        let bb = small_backbone(DType::F64);
        let f: Vec<Tensor> = (0..3).map(|_| rand((2, 3, 20, 20))).collect();
        let src = [&f[0], &f[1], &f[2]];
        assert_eq!(nn::scalar(&temporal_consistency_loss(src, src, &bb).unwrap()).unwrap(), 0.0);
        let g: Vec<Tensor> = (0..3).map(|_| rand((2, 3, 20, 10))).collect();
        let v = nn::scalar(&temporal_consistency_loss(src, [&g[0], &g[1], &g[2]], &bb).unwrap()).unwrap();
        assert!(v >= 0.0);
    }

    #[test]
    fn fidelity_closed_forms() {
        let dev = Device::Cpu;
        let t = |v: &[f64]| Tensor::new(v, &dev).unwrap();
        let perfect = fidelity_from_scores(&t(&[1.0, 1.0]), &t(&[0.0, 0.0])).unwrap();
        assert!(nn::scalar(&perfect.d_loss).unwrap() < 1e-6);
        let half = fidelity_from_scores(&t(&[0.5]), &t(&[0.5])).unwrap();
        assert!((nn::scalar(&half.d_loss).unwrap() - LN_2).abs() < 1e-12);
        assert!((nn::scalar(&half.g_term).unwrap() - LN_2).abs() < 1e-12);
    }
}
