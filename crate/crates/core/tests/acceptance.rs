//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

mod common;

use std::time::Instant;

use candle_core::{DType, Device, Tensor};
use rand::Rng;
use retvi::ade::{self, Axis, ResizeMode, RetargetSpec};
use retvi::cfa::{self, Cfa, CfaConfig};
use retvi::losses::{self, Backbone, BackboneConfig, FidDisc, FidDiscConfig};
use retvi::media_io::{Frame, FrameSequence};
use retvi::metrics::{self, PatchSpec};
use retvi::nn::Mode;
use retvi::synthetic::{self, ToyClips};
use retvi::trainer::{Dataset, FitOptions, StepMetrics, TrainConfig, Trainer};

use common::{grad_check, report, rng, uniform};

#[test]
fn criterion_01_identity_retargeting() {
    let started = Instant::now();
    let mut r = rng(1);
    let mut worst = 0f32;
    for i in 0..20 {
        let (h, w) = (r.random_range(16..97), r.random_range(16..97));
        let frame = synthetic::noise_frame(h, w, &mut r);
        let (cfa, _store) = Cfa::seeded(CfaConfig::default(), DType::F32, 100 + i).unwrap();
        let spec = RetargetSpec::from_ratio((h, w), 1.0, Axis::Width).unwrap();
        let out = ade::retarget_frame(&frame, &spec, &cfa, DType::F32).unwrap();
        assert_eq!(out.dims(), (h, w));
        for (a, b) in out.data().iter().zip(frame.data()) {
            worst = worst.max((a - b).abs());
        }
    }
    let secs = started.elapsed().as_secs_f64();
    let pass = worst <= 1.0 / 255.0 && secs < 60.0;
    report(1, pass, &format!("max |out - in| = {worst:.3e} over 20 frames, {secs:.1}s"));
    assert!(pass);
}

#[test]
fn criterion_02_flow_scale_law() {
    let cases = [
        (0.5, ResizeMode::Reduce, 0.25),
        (1.25, ResizeMode::Enlarge, -0.0625),
        (1.0, ResizeMode::Reduce, 0.0),
        (1.0, ResizeMode::Enlarge, 0.0),
    ];
    let worst = cases
        .iter()
        .map(|&(r, m, want)| (ade::flow_scale(r, m).unwrap() - want).abs())
        .fold(0.0, f64::max);
    let pass = worst <= 1e-12;
    report(2, pass, &format!("max deviation {worst:.1e}"));
    assert!(pass);
}

#[test]
fn criterion_03_theta_linearity() {
    let mut r = rng(3);
    let mut exact = 0;
    for _ in 0..100 {
        let (h, w) = (r.random_range(16..64), r.random_range(16..64));
        let e = uniform(&[2, h, w], -0.999, 0.999, &mut r).to_dtype(DType::F32).unwrap();
        let ratio = r.random_range(0.25..1.25);
        let flow = ade::flow_scale(ratio, ResizeMode::for_ratio(ratio)).unwrap();
        let h1 = ade::build_deformation(&e, flow, 1.0).unwrap();
        let h2 = ade::build_deformation(&e, flow, 2.0).unwrap();
        let doubled = (h1 * 2.0).unwrap();
        let a = h2.flatten_all().unwrap().to_vec1::<f32>().unwrap();
        let b = doubled.flatten_all().unwrap().to_vec1::<f32>().unwrap();
        if a == b {
            exact += 1;
        }
    }
    let pass = exact == 100;
    report(3, pass, &format!("{exact}/100 fields with H(2) == 2 H(1) bit for bit"));
    assert!(pass);
}

#[test]
fn criterion_04_gradient_checks() {
    let started = Instant::now();
    let mut r = rng(4);
    let (probes, step, tol) = (40, 1e-4, 1e-3);
    let mut results = Vec::new();

    // warp, w.r.t. the field and w.r.t. the frame
    let v = uniform(&[1, 3, 32, 32], 0.0, 1.0, &mut r);
    let field = uniform(&[1, 2, 32, 32], -0.05, 0.05, &mut r);
    let mean_warp = |v: &Tensor, h: &Tensor| ade::deform_and_sample(v, h).unwrap().mean_all().unwrap();
    results.push(("warp/field", grad_check(&field, |h| mean_warp(&v, h), probes, step, tol, &mut r)));
    let weights = uniform(&[1, 3, 32, 32], 0.0, 1.0, &mut r);
    results.push((
        "warp/frame",
        grad_check(
            &v,
            |v| {
                ade::deform_and_sample(v, &field)
                    .unwrap()
                    .mul(&weights)
                    .unwrap()
                    .mean_all()
                    .unwrap()
            },
            probes,
            step,
            tol,
            &mut r,
        ),
    ));

    let bb = Backbone::seeded(BackboneConfig::compact().with_resolution(32), DType::F64).unwrap();
    let disc_cfg = FidDiscConfig {
        input_resolution: 32,
        ..Default::default()
    };
    let (disc, _store) = FidDisc::seeded(disc_cfg, DType::F64, 4).unwrap();
    let frame = |r: &mut _| uniform(&[1, 3, 32, 32], 0.0, 1.0, r);
    let (ve, vo, a, b, c, a2, c2) = (
        frame(&mut r),
        frame(&mut r),
        frame(&mut r),
        frame(&mut r),
        frame(&mut r),
        frame(&mut r),
        frame(&mut r),
    );
    let warped = frame(&mut r);
    results.push((
        "critical",
        grad_check(&warped, |x| losses::critical_region_loss(&ve, x, &bb).unwrap(), probes, step, tol, &mut r),
    ));
    results.push((
        "global",
        grad_check(&warped, |x| losses::global_integrity_loss(&vo, x, &bb).unwrap(), probes, step, tol, &mut r),
    ));
    results.push((
        "temporal",
        grad_check(
            &warped,
            |x| losses::temporal_consistency_loss([&a, &b, &c], [&a2, x, &c2], &bb).unwrap(),
            probes,
            step,
            tol,
            &mut r,
        ),
    ));
    results.push((
        "fidelity/d",
        grad_check(
            &warped,
            |x| losses::fidelity_losses(&vo, x, &disc, Mode::Eval).unwrap().d_loss,
            probes,
            step,
            tol,
            &mut r,
        ),
    ));
    results.push((
        "fidelity/g",
        grad_check(
            &warped,
            |x| losses::fidelity_losses(&vo, x, &disc, Mode::Eval).unwrap().g_term,
            probes,
            step,
            tol,
            &mut r,
        ),
    ));
    let secs = started.elapsed().as_secs_f64();
    let pass = results.iter().all(|(_, g)| g.ok()) && secs < 300.0;
    let detail: Vec<String> = results
        .iter()
        .map(|(n, g)| format!("{n} {}/{}", g.passed, g.probes))
        .collect();
    report(4, pass, &format!("{} within 1e-3, {secs:.1}s", detail.join(", ")));
    for (n, g) in &results {
        assert!(g.ok(), "{n}: {g:?}");
    }
    assert!(secs < 300.0);
}

#[test]
fn criterion_05_shape_contract() {
    let (cfa, _store) = Cfa::seeded(CfaConfig::default(), DType::F32, 5).unwrap();
    let mut r = rng(5);
    let mut shapes = Vec::new();
    for (h, w) in [(256, 256), (480, 854), (720, 1280)] {
        let f = synthetic::noise_frame(h, w, &mut r);
        let out = cfa::cfa_forward(&f, &cfa, DType::F32).unwrap();
        shapes.push(out.d1.dims().to_vec());
    }
    let pass = shapes.iter().all(|s| s == &[2, 16, 16]);
    report(5, pass, &format!("D1 shapes {shapes:?} for 256x256, 854x480, 1280x720"));
    assert!(pass);
}

#[test]
fn criterion_06_loss_zeros_and_ln2() {
    let mut r = rng(6);
    let bb = Backbone::seeded(BackboneConfig::compact().with_resolution(64), DType::F64).unwrap();
    let (disc, _store) = FidDisc::seeded(
        FidDiscConfig {
            input_resolution: 64,
            ..Default::default()
        },
        DType::F64,
        6,
    )
    .unwrap();
    let (cfa, _cs) = Cfa::seeded(CfaConfig::default(), DType::F64, 6).unwrap();

    // identity path: r = 1 retargeting of a source triplet
    let clip = synthetic::moving_box_clip("c", 3, (48, 64), &mut r).unwrap();
    let masks = clip.masks.as_ref().unwrap();
    let src: Vec<&Frame> = clip.frames.frames().iter().collect();
    let spec = RetargetSpec::from_ratio((48, 64), 1.0, Axis::Width).unwrap();
    let ret: Vec<Frame> = src
        .iter()
        .map(|f| ade::retarget_frame(f, &spec, &cfa, DType::F64).unwrap())
        .collect();
    let fg = retvi::media_io::make_foreground_pair(src[1], &masks[1]).unwrap().foreground;
    let fg_warped = ade::retarget_frame(&fg, &spec, &cfa, DType::F64).unwrap();
    let t = |f: &Frame| Frame::stack(&[f], DType::F64).unwrap();
    let value = |x: Tensor| x.to_scalar::<f64>().unwrap();

    let critical = value(losses::critical_region_loss(&t(&fg), &t(&fg_warped), &bb).unwrap());
    let global = value(losses::global_integrity_loss(&t(src[1]), &t(&ret[1]), &bb).unwrap());
    let temporal = value(
        losses::temporal_consistency_loss(
            [&t(src[0]), &t(src[1]), &t(src[2])],
            [&t(&ret[0]), &t(&ret[1]), &t(&ret[2])],
            &bb,
        )
        .unwrap(),
    );
    let fid = losses::fidelity_losses(&t(src[1]), &t(&ret[1]), &disc, Mode::Eval).unwrap();
    let fidelity = value(fid.d_loss);

    let half = Tensor::new(&[0.5f64], &Device::Cpu).unwrap();
    let at_half = losses::fidelity_from_scores(&half, &half).unwrap();
    let at_half = (value(at_half.d_loss), value(at_half.g_term));
    let ln2 = std::f64::consts::LN_2;
    let ln2_ok = (at_half.0 - ln2).abs() <= 1e-6 && (at_half.1 - ln2).abs() <= 1e-6;

    let zeros = [critical, global, temporal, fidelity];
    let zeros_ok = zeros.iter().all(|v| v.abs() <= 1e-8);
    let pass = zeros_ok && ln2_ok;
    report(
        6,
        pass,
        &format!(
            "identity losses cri {critical:.2e} glo {global:.2e} tem {temporal:.2e} fid {fidelity:.4}; \
             d_loss at eta=0.5 {:.7}, g_term {:.7}",
            at_half.0, at_half.1
        ),
    );
    assert!(ln2_ok);
    assert!(critical.abs() <= 1e-8 && global.abs() <= 1e-8 && temporal.abs() <= 1e-8);
    assert!(fidelity.abs() <= 1e-8, "fidelity d_loss on identical inputs is {fidelity}, not 0");
}

fn brute_force_bidirectional(a: &Frame, b: &Frame, spec: &PatchSpec) -> f64 {
    let k = spec.patch_size;
    let grid = |f: &Frame| {
        let mut v = Vec::new();
        let mut y = 0;
        while y + k <= f.height() {
            let mut x = 0;
            while x + k <= f.width() {
                v.push((y, x));
                x += spec.stride;
            }
            y += spec.stride;
        }
        v
    };
    let dist = |p: &Frame, (py, px): (usize, usize), q: &Frame, (qy, qx): (usize, usize)| {
        let mut s = 0.0f64;
        for c in 0..p.channels() {
            for dy in 0..k {
                for dx in 0..k {
                    let d = p.get(c, py + dy, px + dx) as f64 - q.get(c, qy + dy, qx + dx) as f64;
                    s += d * d;
                }
            }
        }
        s
    };
    let (ga, gb) = (grid(a), grid(b));
    let mut total = 0.0;
    for &p in &ga {
        total += gb.iter().map(|&q| dist(a, p, b, q)).fold(f64::INFINITY, f64::min);
    }
    for &q in &gb {
        total += ga.iter().map(|&p| dist(b, q, a, p)).fold(f64::INFINITY, f64::min);
    }
    total / (ga.len() + gb.len()) as f64
}

#[test]
fn criterion_07_metric_oracle() {
    let mut r = rng(7);
    let mut worst = 0f64;
    for i in 0..50 {
        let dims = |r: &mut rand_chacha::ChaCha8Rng| (r.random_range(4..33), r.random_range(4..33));
        let ((ha, wa), (hb, wb)) = (dims(&mut r), dims(&mut r));
        let a = synthetic::noise_frame(ha, wa, &mut r);
        let b = synthetic::noise_frame(hb, wb, &mut r);
        let k = r.random_range(1..=ha.min(wa).min(hb).min(wb).min(7));
        let spec = PatchSpec::new(k, r.random_range(1..4)).unwrap();
        let got = metrics::bidirectional_error(&a, &b, &spec).unwrap();
        let want = brute_force_bidirectional(&a, &b, &spec);
        worst = worst.max((got - want).abs());
        assert!((got - want).abs() <= 1e-9, "pair {i}: {got} vs {want}");
    }
    let a = Frame::new(2, 2, 1, vec![0.0; 4]).unwrap();
    let b = Frame::new(2, 2, 1, vec![100.0 / 255.0, 0.0, 0.0, 0.0]).unwrap();
    let d = metrics::frame_difference(&a, &b).unwrap();
    let pass = worst <= 1e-9 && d == 0.25;
    report(7, pass, &format!("50 pairs max |fast - brute| = {worst:.1e}; hand case D = {d}"));
    assert!(pass);
}

#[test]
fn criterion_08_stability_sanity() {
    let mut r = rng(8);
    let still = synthetic::noise_frame(24, 32, &mut r);
    let static_clip = FrameSequence::new(vec![still; 6], 30.0).unwrap();
    let stb_static = metrics::stability(&static_clip).unwrap().stb;
    let mut worst = 0f64;
    for _ in 0..10 {
        let n = r.random_range(2..10);
        let (h, w) = (r.random_range(2..40), r.random_range(2..40));
        let frames = (0..n).map(|_| synthetic::noise_frame(h, w, &mut r)).collect();
        let seq = FrameSequence::new(frames, 30.0).unwrap();
        let fwd = metrics::stability(&seq).unwrap().stb;
        let bwd = metrics::stability(&seq.reversed()).unwrap().stb;
        worst = worst.max((fwd - bwd).abs());
    }
    let pass = stb_static == 0.0 && worst <= 1e-12;
    report(8, pass, &format!("static STB {stb_static}; reversal max diff {worst:.1e} on 10 clips"));
    assert!(pass);
}

#[test]
fn criterion_09_toy_overfit() {
    let started = Instant::now();
    let dataset = Dataset::new(ToyClips::default().generate().unwrap()).unwrap();
    let config = TrainConfig::toy();
    let mut trainer = Trainer::new(config.clone()).unwrap();
    let mut metrics: Vec<StepMetrics> = Vec::new();
    let mut collect = |m: &StepMetrics| metrics.push(m.clone());
    let summary = trainer
        .fit(
            &dataset,
            FitOptions {
                on_step: Some(&mut collect),
                ..Default::default()
            },
        )
        .unwrap();
    let secs = started.elapsed().as_secs_f64();

    // same seed, fresh state: the first steps must repeat exactly
    let mut again = Trainer::new(config).unwrap();
    let mut replay: Vec<StepMetrics> = Vec::new();
    let mut collect = |m: &StepMetrics| replay.push(m.clone());
    again
        .fit(
            &dataset,
            FitOptions {
                stop_at: Some(10),
                on_step: Some(&mut collect),
                ..Default::default()
            },
        )
        .unwrap();
    let deterministic = replay[..] == metrics[..10];

    let total = summary.total.expect("steps ran");
    let objective = summary.objective.expect("steps ran");
    let pass = summary.steps == 300 && total.reduction >= 0.4 && secs <= 1800.0 && deterministic;
    report(
        9,
        pass,
        &format!(
            "300 steps in {secs:.0}s; total 10-step average {:.3} -> {:.3} ({:.1}% drop); \
             generator objective {:.3} -> {:.3} ({:.1}% drop); replay identical: {deterministic}",
            total.initial_avg,
            total.final_avg,
            100.0 * total.reduction,
            objective.initial_avg,
            objective.final_avg,
            100.0 * objective.reduction
        ),
    );
    assert!(deterministic);
    assert!(secs <= 1800.0);
    assert!(total.reduction >= 0.4, "moving-average reduction {}", total.reduction);
}

#[test]
fn criterion_10_throughput_report() {
    let (cfa, _store) = Cfa::seeded(CfaConfig::default(), DType::F32, 10).unwrap();
    let mut r = rng(10);
    let frame = synthetic::noise_frame(720, 1280, &mut r);
    let spec = RetargetSpec::from_ratio((720, 1280), 0.5, Axis::Width).unwrap();
    ade::retarget_frame(&frame, &spec, &cfa, DType::F32).unwrap();
    let n = 5;
    let started = Instant::now();
    for _ in 0..n {
        let out = ade::retarget_frame(&frame, &spec, &cfa, DType::F32).unwrap();
        assert_eq!(out.dims(), (720, 640));
    }
    let per_frame = started.elapsed().as_secs_f64() / n as f64;
    report(
        10,
        true,
        &format!("1280x720 -> 640x720 eval retarget: {:.1} ms/frame on CPU (report only)", per_frame * 1e3),
    );
}
