//! Property tests for the metrics and frame I/O.

mod common;

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use retvi::media_io::{self, Frame, FrameSequence, Mask};
use retvi::metrics::{self, PatchSpec};
use retvi::synthetic;

fn frame(h: usize, w: usize, seed: u64) -> Frame {
    synthetic::noise_frame(h, w, &mut ChaCha8Rng::seed_from_u64(seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bidirectional_is_symmetric_and_nonnegative(
        ha in 3usize..20, wa in 3usize..20, hb in 3usize..20, wb in 3usize..20,
        k in 1usize..4, stride in 1usize..4, seed in any::<u64>(),
    ) {
        let a = frame(ha, wa, seed);
        let b = frame(hb, wb, seed.wrapping_add(1));
        let spec = PatchSpec::new(k, stride).unwrap();
        let ab = metrics::bidirectional_error(&a, &b, &spec).unwrap();
        let ba = metrics::bidirectional_error(&b, &a, &spec).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert_eq!(ab, ba);
        prop_assert_eq!(metrics::bidirectional_error(&a, &a, &spec).unwrap(), 0.0);
    }

    #[test]
    fn frame_difference_is_a_metric(h in 1usize..12, w in 1usize..12, seed in any::<u64>()) {
        let (a, b, c) = (frame(h, w, seed), frame(h, w, seed ^ 1), frame(h, w, seed ^ 2));
        let d = |x: &Frame, y: &Frame| metrics::frame_difference(x, y).unwrap();
        prop_assert_eq!(d(&a, &a), 0.0);
        prop_assert_eq!(d(&a, &b), d(&b, &a));
        prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c) + 1e-12);
        prop_assert!(d(&a, &b) <= 2.55);
    }

    #[test]
    fn stability_ignores_time_direction(n in 2usize..8, h in 1usize..10, w in 1usize..10, seed in any::<u64>()) {
        let frames = (0..n as u64).map(|i| frame(h, w, seed.wrapping_add(i))).collect();
        let seq = FrameSequence::new(frames, 25.0).unwrap();
        let fwd = metrics::stability(&seq).unwrap();
        let bwd = metrics::stability(&seq.reversed()).unwrap();
        prop_assert!((fwd.stb - bwd.stb).abs() <= 1e-12);
        prop_assert_eq!(fwd.differences.len(), n - 1);
    }
}

#[test]
fn png_roundtrip_within_one_level() {
    let dir = tempfile::tempdir().unwrap();
    let frames: Vec<Frame> = (0..3).map(|i| frame(20, 24, i)).collect();
    let seq = FrameSequence::new(frames, 30.0).unwrap();
    media_io::save_frame_sequence(&seq, dir.path(), media_io::DEFAULT_PATTERN).unwrap();
    let back = media_io::load_frame_sequence(dir.path(), media_io::DEFAULT_PATTERN).unwrap();
    assert_eq!(back.len(), 3);
    for (a, b) in seq.frames().iter().zip(back.frames()) {
        assert_eq!(a.dims(), b.dims());
        let worst = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).fold(0f32, f32::max);
        assert!(worst <= 1.0 / 255.0, "{worst}");
    }
    // a second round trip is lossless
    let dir2 = tempfile::tempdir().unwrap();
    media_io::save_frame_sequence(&back, dir2.path(), media_io::DEFAULT_PATTERN).unwrap();
    let again = media_io::load_frame_sequence(dir2.path(), media_io::DEFAULT_PATTERN).unwrap();
    assert_eq!(again, back);
}

#[test]
fn clip_roundtrip_keeps_masks() {
    let dir = tempfile::tempdir().unwrap();
    let clip = synthetic::moving_box_clip("walk", 4, (24, 32), &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
    media_io::save_clip(&clip, dir.path()).unwrap();
    let back = media_io::load_clip(dir.path()).unwrap();
    assert_eq!(back.frames.len(), 4);
    let masks: &Vec<Mask> = back.masks.as_ref().unwrap();
    assert_eq!(masks, clip.masks.as_ref().unwrap());
    let pair = back.pair(2).unwrap();
    assert_eq!(pair.original.dims(), (24, 32));
}
