use std::f64::consts::PI;

use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;

fn smooth_image(h: usize, w: usize) -> Plane {
    Plane::from_fn(h, w, |y, x| {
        let (x, y) = (x as f32, y as f32);
        128.0 + 60.0 * (x / 9.0).sin() * (y / 11.0).cos() + 0.4 * x
    })
}

fn mae(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs() as f64).sum::<f64>() / a.len() as f64
}

#[test]
fn normalize_examples() {
    assert_eq!(pixel_normalize(127.5), 0.0);
    assert_eq!(pixel_normalize(255.0), 0.99609375);
    assert_eq!(pixel_normalize(0.0), -0.99609375);
}

#[test]
fn grayscale_examples() {
    let img = RgbImage::new(1, 3, vec![255.0, 255.0, 255.0, 255.0, 0.0, 0.0, 42.0, 42.0, 42.0]).unwrap();
    let g = to_grayscale(&img);
    assert!((g.data()[0] - 255.0).abs() < 1e-4);
    assert!((g.data()[1] - 76.245).abs() < 1e-4);
    assert!((g.data()[2] - 42.0).abs() < 1e-4);
}

#[test]
fn similarity_identity_and_translation() {
    let dst = CANONICAL_LANDMARKS.points;
    let fit = estimate_similarity(&dst, &dst).unwrap();
    let t = fit.transform;
    assert!((t.scale() - 1.0).abs() < 1e-12 && t.rotation().abs() < 1e-12);
    assert!(t.tx.abs() < 1e-9 && t.ty.abs() < 1e-9 && fit.residual < 1e-9);

    let src: Vec<[f64; 2]> = dst.iter().map(|p| [p[0] - 5.0, p[1] + 3.0]).collect();
    let t = estimate_similarity(&src, &dst).unwrap().transform;
    assert!((t.scale() - 1.0).abs() < 1e-12 && t.rotation().abs() < 1e-12);
    assert!((t.tx - 5.0).abs() < 1e-9 && (t.ty + 3.0).abs() < 1e-9);
}

#[test]
fn similarity_rotation_and_half_scale() {
    let dst = CANONICAL_LANDMARKS.points;
    let forward = SimilarityTransform::from_parts(0.5, PI / 2.0, 10.0, -4.0).unwrap();
    let inv = forward.inverse().unwrap();
    let src: Vec<[f64; 2]> = dst.iter().map(|&p| inv.apply(p)).collect();
    let fit = estimate_similarity(&src, &dst).unwrap();
    assert!(fit.residual < 1e-6);
    for (s, d) in src.iter().zip(&dst) {
        let m = fit.transform.apply(*s);
        assert!((m[0] - d[0]).abs() < 1e-9 && (m[1] - d[1]).abs() < 1e-9);
    }
    assert!((fit.transform.scale() - 0.5).abs() < 1e-12);
}

#[test]
fn similarity_degenerate() {
    let src = [[3.0, 4.0]; 5];
    assert!(estimate_similarity(&src, &CANONICAL_LANDMARKS.points).is_err());
    assert!(estimate_similarity(&src[..1], &CANONICAL_LANDMARKS.points[..1]).is_err());
}

#[test]
fn least_squares_beats_perturbations() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let src: Vec<[f64; 2]> = (0..5).map(|_| [rng.random_range(0.0..100.0), rng.random_range(0.0..100.0)]).collect();
    let dst = CANONICAL_LANDMARKS.points;
    let fit = estimate_similarity(&src, &dst).unwrap();
    let cost = |t: &SimilarityTransform| -> f64 {
        src.iter().zip(&dst).map(|(s, d)| {
            let m = t.apply(*s);
            (m[0] - d[0]).powi(2) + (m[1] - d[1]).powi(2)
        }).sum()
    };
    let best = cost(&fit.transform);
    assert!(((best / 5.0).sqrt() - fit.residual).abs() < 1e-9);
    for _ in 0..200 {
        let mut t = fit.transform;
        t.a += rng.random_range(-1e-3..1e-3);
        t.b += rng.random_range(-1e-3..1e-3);
        t.tx += rng.random_range(-0.1..0.1);
        t.ty += rng.random_range(-0.1..0.1);
        assert!(cost(&t) >= best - 1e-9);
    }
}

#[test]
fn compose_and_inverse() {
    let t = SimilarityTransform::from_parts(1.7, 0.4, 3.0, -8.0).unwrap();
    let id = t.compose(&t.inverse().unwrap());
    for (got, want) in [id.a, id.b, id.tx, id.ty].iter().zip([1.0, 0.0, 0.0, 0.0]) {
        assert!((got - want).abs() < 1e-12);
    }
    let m = t.matrix();
    assert_eq!(m[0][0], m[1][1]);
    assert_eq!(m[0][1], -m[1][0]);
}

#[test]
fn warp_identity_and_integer_shift() {
    let img = smooth_image(FRAME_HEIGHT, FRAME_WIDTH);
    let out = warp(&img, &SimilarityTransform::IDENTITY, FRAME_HEIGHT, FRAME_WIDTH).unwrap();
    assert_eq!(out, img);

    let shift = SimilarityTransform { a: 1.0, b: 0.0, tx: 3.0, ty: -2.0 };
    let out = warp(&img, &shift, FRAME_HEIGHT, FRAME_WIDTH).unwrap();
    for y in 0..FRAME_HEIGHT {
        for x in 0..FRAME_WIDTH {
            let (sy, sx) = (y as i64 + 2, x as i64 - 3);
            let want = if sx >= 0 && sy < FRAME_HEIGHT as i64 { img.get(sy as usize, sx as usize) } else { 0.0 };
            assert_eq!(out.get(y, x), want, "at ({y},{x})");
        }
    }
}

#[test]
fn warp_round_trip_interior() {
    let img = smooth_image(FRAME_HEIGHT, FRAME_WIDTH);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..10 {
        let s = rng.random_range(0.9..1.1);
        let theta = rng.random_range(-0.2..0.2);
        // rotate about the frame center so the interior stays in view
        let c = [47.5, 55.5];
        let rot = SimilarityTransform::from_parts(s, theta, 0.0, 0.0).unwrap();
        let rc = rot.apply(c);
        let t = SimilarityTransform { tx: c[0] - rc[0] + rng.random_range(-2.0..2.0), ty: c[1] - rc[1], ..rot };
        let there = warp(&img, &t, FRAME_HEIGHT, FRAME_WIDTH).unwrap();
        let back = warp(&there, &t.inverse().unwrap(), FRAME_HEIGHT, FRAME_WIDTH).unwrap();
        let (mut a, mut b) = (Vec::new(), Vec::new());
        for y in 20..92 {
            for x in 20..76 {
                a.push(img.get(y, x) / 255.0);
                b.push(back.get(y, x) / 255.0);
            }
        }
        assert!(mae(&a, &b) < 1e-2, "mae {}", mae(&a, &b));
    }
}

#[test]
fn fallback_full_frame_is_identity() {
    let img = smooth_image(FRAME_HEIGHT, FRAME_WIDTH);
    let bbox = BoundingBox { x: 0.0, y: 0.0, width: 96.0, height: 112.0 };
    let face = fallback_crop(&img, &bbox).unwrap();
    assert_eq!(face.provenance, Provenance::FallbackCrop);
    for (got, want) in face.pixels.data().iter().zip(img.data()) {
        assert!((got - pixel_normalize(*want)).abs() < 1e-6);
    }
}

#[test]
fn fallback_clamps_and_rejects() {
    let img = smooth_image(FRAME_HEIGHT, FRAME_WIDTH);
    let half_out = BoundingBox { x: -48.0, y: 0.0, width: 96.0, height: 112.0 };
    let clamped = BoundingBox { x: 0.0, y: 0.0, width: 48.0, height: 112.0 };
    assert_eq!(crop_resize(&img, &half_out, 112, 96).unwrap(), crop_resize(&img, &clamped, 112, 96).unwrap());
    let zero = BoundingBox { x: 5.0, y: 5.0, width: 0.0, height: 10.0 };
    assert!(fallback_crop(&img, &zero).is_err());
    let outside = BoundingBox { x: 200.0, y: 5.0, width: 10.0, height: 10.0 };
    assert!(fallback_crop(&img, &outside).is_err());
}

#[test]
fn fallback_downsample_matches_box_average() {
    let big = smooth_image(224 + 40, 192 + 20);
    let bbox = BoundingBox { x: 10.0, y: 20.0, width: 192.0, height: 224.0 };
    let out = crop_resize(&big, &bbox, 112, 96).unwrap();
    let mut reference = Vec::new();
    for y in 0..112 {
        for x in 0..96 {
            let (by, bx) = (20 + 2 * y, 10 + 2 * x);
            let s = big.get(by, bx) + big.get(by + 1, bx) + big.get(by, bx + 1) + big.get(by + 1, bx + 1);
            reference.push(s / 4.0 / 255.0);
        }
    }
    let got: Vec<f32> = out.data().iter().map(|v| v / 255.0).collect();
    assert!(mae(&got, &reference) < 1e-2);
}

#[test]
fn alignment_is_flip_consistent() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let img = smooth_image(150, 130);
    let canonical = CANONICAL_LANDMARKS;
    for (m, c) in canonical.mirrored(FRAME_WIDTH).points.iter().zip(&canonical.points) {
        assert!((m[0] - c[0]).abs() < 1e-9 && m[1] == c[1]);
    }
    let bbox = BoundingBox { x: 0.0, y: 0.0, width: 130.0, height: 150.0 };
    for _ in 0..5 {
        let t = SimilarityTransform::from_parts(rng.random_range(0.8..1.2), rng.random_range(-0.3..0.3), 15.0, 20.0).unwrap();
        let mut points = canonical.points.map(|p| t.apply(p));
        for p in &mut points {
            p[0] += rng.random_range(-1.5..1.5);
            p[1] += rng.random_range(-1.5..1.5);
        }
        let lm = LandmarkSet::new(points, true).unwrap();
        let face = align_face(&img, &lm, &bbox, &canonical).unwrap();
        let mirrored = align_face(&img.flip_horizontal(), &lm.mirrored(img.width()), &bbox, &canonical).unwrap();
        assert_eq!(face.provenance, Provenance::Aligned);
        assert!(mae(face.pixels.flip_horizontal().data(), mirrored.pixels.data()) < 1e-2);
    }
}

#[test]
fn undetected_landmarks_fall_back() {
    let img = smooth_image(FRAME_HEIGHT, FRAME_WIDTH);
    let lm = LandmarkSet::new([[0.0; 2]; 5], false).unwrap();
    let bbox = BoundingBox { x: 0.0, y: 0.0, width: 96.0, height: 112.0 };
    let face = align_face(&img, &lm, &bbox, &CANONICAL_LANDMARKS).unwrap();
    assert_eq!(face.provenance, Provenance::FallbackCrop);
    assert_eq!((face.pixels.height(), face.pixels.width()), (FRAME_HEIGHT, FRAME_WIDTH));
}

#[test]
fn manifest_parsing() {
    let text = "# comment\n\
        a.png 30 50 66 50 48 70 33 90 62 90 0 0 96 112 1\n\
        \n\
        dir/b.png 0 0 0 0 0 0 0 0 0 0 5 6 50 60 0\n";
    let recs = parse_landmark_manifest(text).unwrap();
    assert_eq!(recs.len(), 2);
    assert!(recs[0].landmarks.detected && !recs[1].landmarks.detected);
    assert_eq!(recs[0].landmarks.points[2], [48.0, 70.0]);
    assert_eq!(recs[1].bbox, BoundingBox { x: 5.0, y: 6.0, width: 50.0, height: 60.0 });
    assert!(parse_landmark_manifest("a.png 1 2 3\n").is_err());
    assert!(parse_landmark_manifest("a.png 30 50 66 50 48 70 33 90 62 90 0 0 96 112 yes\n").is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn recovers_random_similarities(
        s in 0.5f64..2.0,
        theta in -PI..PI,
        tx in -20.0f64..20.0,
        ty in -20.0f64..20.0,
    ) {
        let dst = CANONICAL_LANDMARKS.points;
        let t = SimilarityTransform::from_parts(s, theta, tx, ty).unwrap();
        let src: Vec<[f64; 2]> = dst.iter().map(|&p| t.inverse().unwrap().apply(p)).collect();
        let fit = estimate_similarity(&src, &dst).unwrap();
        prop_assert!(fit.residual < 1e-6);
        prop_assert!((fit.transform.scale() - s).abs() < 1e-9);
        let m = fit.transform.matrix();
        prop_assert!((m[0][0] - m[1][1]).abs() < 1e-9 && (m[0][1] + m[1][0]).abs() < 1e-9);
        prop_assert!(m[0][0] * m[1][1] - m[0][1] * m[1][0] > 0.0);
    }

    #[test]
    fn flip_is_involution(seed in 0u64..1000) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let img = Plane::from_fn(7, 5, |_, _| rng.random_range(0.0..255.0));
        prop_assert_eq!(img.flip_horizontal().flip_horizontal(), img);
    }
}
