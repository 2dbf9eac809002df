//! Acceptance suite: one test per criterion, each printing a pass/fail
//! line. Run with `cargo test --test acceptance -- --nocapture` to see the
//! per-criterion summary.

mod common;

use graspkit::data::{
    assemble_input, make_splits, parse_cornell, parse_jacquard, InputSpec, Split, SplitMode,
};
use graspkit::eval::{evaluate_records, jaccard, MatchCriteria};
use graspkit::grasp::{
    decode_grasps, encode_grasp_maps, DecodeConfig, FillRegion, GaussianEncoderConfig,
    GraspRectangle,
};
use graspkit::net::{load_checkpoint, Network, NetworkConfig, NetworkPredictor};
use graspkit::nn::{gradcheck, Tape};
use graspkit::train::{smooth_l1, tape_grasp_loss, train, LossConfig, TrainConfig, TrainOptions};
use ndarray::{Array4, ArrayD};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::time::Instant;

fn report(criterion: &str, pass: bool, detail: &str) {
    println!(
        "[{}] criterion {criterion}: {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "criterion {criterion} failed: {detail}");
}

/// Criterion 1: forward shape contract for 1/3/4 channels at 300x300 and
/// at 64x64 / 128x128, within a minute.
#[test]
fn criterion_1_shape_contract() {
    let t0 = Instant::now();
    for channels in [1usize, 3, 4] {
        let cfg = NetworkConfig {
            in_channels: channels,
            ..NetworkConfig::default()
        };
        let net = Network::<f32>::new(cfg, 0).unwrap();
        let x = Array4::<f32>::from_elem((1, channels, 300, 300), 0.1);
        let y = net.forward_eval(&x).unwrap();
        assert_eq!(y.dim(), (1, 4, 300, 300), "channels {channels}");
    }
    let cfg = NetworkConfig {
        in_channels: 1,
        ..NetworkConfig::default()
    };
    let net = Network::<f32>::new(cfg, 0).unwrap();
    for size in [64usize, 128] {
        let x = Array4::<f32>::from_elem((1, 1, size, size), 0.1);
        let y = net.forward_eval(&x).unwrap();
        assert_eq!(y.dim(), (1, 4, size, size), "size {size}");
    }
    let elapsed = t0.elapsed().as_secs_f64();
    report(
        "1 (shape contract)",
        elapsed < 60.0,
        &format!("four equal-size maps for channels 1/3/4 at 300 and sizes 64/128 in {elapsed:.1}s"),
    );
}

/// Criterion 2: default-config parameter count inside [3.7M, 5.6M].
#[test]
fn criterion_2_parameter_count() {
    let net = Network::<f32>::new(NetworkConfig::default(), 0).unwrap();
    let count = net.param_count();
    report(
        "2 (parameter count)",
        (3_700_000..=5_600_000).contains(&count),
        &format!("exact trainable parameter count = {count} (target band [3.7M, 5.6M] around the published 4.67M)"),
    );
}

/// Criterion 3: analytic gradients match central finite differences at
/// f64 on the miniature network, for every parameter tensor (covering
/// stem convs, residual blocks, all four receptive-field branches, both
/// attention branches, the pixel-shuffle path, heads and the loss).
#[test]
fn criterion_3_gradient_correctness() {
    let t0 = Instant::now();
    let cfg = NetworkConfig::miniature();
    let net = Network::<f64>::new(cfg, 42).unwrap();
    let x = Array4::<f64>::from_shape_fn((2, 1, 16, 16), |(n, _, i, j)| {
        ((n * 97 + i * 13 + j * 7) as f64 * 0.173).sin() * 0.5
    });
    let enc = GaussianEncoderConfig {
        t_x: 3.0,
        t_y: 3.0,
        w_max: 20.0,
        ..Default::default()
    };
    let targets = vec![
        encode_grasp_maps(
            &[GraspRectangle::new(8.0, 8.0, 0.4, 9.0, 5.0).unwrap()],
            &enc,
            (16, 16),
        )
        .unwrap(),
        encode_grasp_maps(
            &[GraspRectangle::new(5.0, 10.0, -0.7, 8.0, 4.0).unwrap()],
            &enc,
            (16, 16),
        )
        .unwrap(),
    ];
    let loss_cfg = LossConfig::default();

    let mut tape = Tape::<f64>::new();
    let (nodes, _) = net.forward_train(&mut tape, x.clone()).unwrap();
    let loss_node = tape_grasp_loss(&mut tape, &nodes.heads, &targets, &loss_cfg).unwrap();
    let grads = tape.backward(loss_node);
    let analytic: Vec<(String, ArrayD<f64>)> = nodes
        .params
        .iter()
        .map(|(name, id)| {
            let g = grads
                .get(*id)
                .cloned()
                .unwrap_or_else(|| panic!("no gradient reached parameter {name}"));
            (name.clone(), g)
        })
        .collect();

    let mut params: Vec<(String, ArrayD<f64>)> = net
        .params()
        .iter()
        .map(|(k, v)| (k.clone(), v.clone()))
        .collect();
    let loss_fn = |ps: &[(String, ArrayD<f64>)]| -> f64 {
        let mut net2 = Network::<f64>::new(cfg, 42).unwrap();
        for (k, v) in ps {
            net2.params_mut().insert(k.clone(), v.clone());
        }
        let mut t = Tape::<f64>::new();
        let (nodes, _) = net2.forward_train(&mut t, x.clone()).unwrap();
        let l = tape_grasp_loss(&mut t, &nodes.heads, &targets, &loss_cfg).unwrap();
        t.scalar(l)
    };
    let results = gradcheck::check_parameters(&mut params, &analytic, loss_fn, 1e-6);
    // every layer type must be represented
    for needle in [
        "stem.block0",
        "bottleneck.res0",
        "bottleneck.rfb.b0",
        "bottleneck.rfb.b1",
        "bottleneck.rfb.b2",
        "bottleneck.rfb.b3",
        "decoder.fuse0.pixel",
        "decoder.fuse0.se_fc1",
        "decoder.fuse0.out",
        "heads.",
    ] {
        assert!(
            results.iter().any(|r| r.name.contains(needle)),
            "gradient check covered no parameter from {needle}"
        );
    }
    let worst = results
        .iter()
        .max_by(|a, b| a.max_relative_error.total_cmp(&b.max_relative_error))
        .unwrap();
    let elapsed = t0.elapsed().as_secs_f64();
    report(
        "3 (gradient correctness)",
        worst.max_relative_error < 1e-3 && elapsed < 300.0,
        &format!(
            "{} tensors checked, worst relative error {:.3e} at {} in {elapsed:.1}s",
            results.len(),
            worst.max_relative_error,
            worst.name
        ),
    );
}

/// Criterion 4: encode -> decode round trip over 100 random grasps with
/// T = 16 and no smoothing: center within 1 px, angle within 1e-6 rad,
/// width within 1 px.
#[test]
fn criterion_4_representation_round_trip() {
    let t0 = Instant::now();
    let cfg = GaussianEncoderConfig::with_scale(16.0);
    let mut rng = ChaCha12Rng::seed_from_u64(4);
    let mut worst_center = 0.0f64;
    let mut worst_angle = 0.0f64;
    let mut worst_width = 0.0f64;
    for _ in 0..100 {
        let rect = GraspRectangle::new(
            rng.random_range(40.0..260.0),
            rng.random_range(40.0..260.0),
            rng.random_range(-1.57..1.57),
            rng.random_range(20.0..120.0),
            rng.random_range(12.0..60.0),
        )
        .unwrap();
        let maps = encode_grasp_maps(std::slice::from_ref(&rect), &cfg, (300, 300)).unwrap();
        let decoded = decode_grasps(&maps, 1, 0.0, cfg.w_max).unwrap();
        let g = &decoded[0];
        let center_err = ((g.u() - rect.x()).powi(2) + (g.v() - rect.y()).powi(2)).sqrt();
        let angle_err = graspkit::eval::angle_difference(g.phi(), rect.theta());
        let width_err = (g.width() - rect.w()).abs();
        worst_center = worst_center.max(center_err);
        worst_angle = worst_angle.max(angle_err);
        worst_width = worst_width.max(width_err);
    }
    let elapsed = t0.elapsed().as_secs_f64();
    report(
        "4 (representation round trip)",
        worst_center <= 1.0 && worst_angle <= 1e-6 && worst_width <= 1.0 && elapsed < 60.0,
        &format!(
            "100 grasps: center <= {worst_center:.3} px, angle <= {worst_angle:.2e} rad, width <= {worst_width:.4} px in {elapsed:.1}s"
        ),
    );
}

/// Criterion 5: polygon-clipping Jaccard against a 1000x1000 rasterization
/// oracle on 200 random pairs, plus exact self-overlap and symmetry.
#[test]
fn criterion_5_metric_oracle() {
    let t0 = Instant::now();
    let mut rng = ChaCha12Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for i in 0..200 {
        let near = i % 2 == 0; // half the pairs overlap, half may not
        let a = random_rect(&mut rng, 0.0);
        let b = if near {
            random_rect(&mut rng, 12.0)
        } else {
            random_rect(&mut rng, 60.0)
        };
        let exact = jaccard(&a, &b).unwrap();
        let raster = rasterized_jaccard(&a, &b, 1000);
        worst = worst.max((exact - raster).abs());
        assert_eq!(jaccard(&a, &a).unwrap(), 1.0, "self-overlap must be exact");
        let sym = (jaccard(&a, &b).unwrap() - jaccard(&b, &a).unwrap()).abs();
        assert!(sym < 1e-12, "symmetry violated by {sym}");
    }
    let elapsed = t0.elapsed().as_secs_f64();
    report(
        "5 (metric oracle)",
        worst < 0.01 && elapsed < 120.0,
        &format!("200 pairs: max |clipping - raster| = {worst:.5} in {elapsed:.1}s"),
    );
}

fn random_rect(rng: &mut ChaCha12Rng, center_jitter: f64) -> GraspRectangle {
    GraspRectangle::new(
        50.0 + rng.random_range(-center_jitter..=center_jitter.max(1e-9)),
        50.0 + rng.random_range(-center_jitter..=center_jitter.max(1e-9)),
        rng.random_range(-1.57..1.57),
        rng.random_range(8.0..45.0),
        rng.random_range(5.0..30.0),
    )
    .unwrap()
}

/// Independent oracle: rasterize both rectangles over their joint bounding
/// box on an n x n grid and count cell-center membership.
fn rasterized_jaccard(a: &GraspRectangle, b: &GraspRectangle, n: usize) -> f64 {
    let corners: Vec<[f64; 2]> = a.corners().into_iter().chain(b.corners()).collect();
    let min_x = corners.iter().map(|c| c[0]).fold(f64::MAX, f64::min) - 1.0;
    let max_x = corners.iter().map(|c| c[0]).fold(f64::MIN, f64::max) + 1.0;
    let min_y = corners.iter().map(|c| c[1]).fold(f64::MAX, f64::min) - 1.0;
    let max_y = corners.iter().map(|c| c[1]).fold(f64::MIN, f64::max) + 1.0;
    let inside = |r: &GraspRectangle, x: f64, y: f64| {
        let (s, c) = r.theta().sin_cos();
        let dx = x - r.x();
        let dy = y - r.y();
        let along = dx * c + dy * s;
        let across = -dx * s + dy * c;
        along.abs() <= r.w() / 2.0 && across.abs() <= r.h() / 2.0
    };
    let mut inter = 0u64;
    let mut union = 0u64;
    for i in 0..n {
        let y = min_y + (i as f64 + 0.5) / n as f64 * (max_y - min_y);
        for j in 0..n {
            let x = min_x + (j as f64 + 0.5) / n as f64 * (max_x - min_x);
            let in_a = inside(a, x, y);
            let in_b = inside(b, x, y);
            inter += (in_a && in_b) as u64;
            union += (in_a || in_b) as u64;
        }
    }
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// Criterion 6: Smooth-L1 unit values exact to 1e-12 and continuity at the
/// |x| = 1 boundary within 1e-5 for sigma = 1.
#[test]
fn criterion_6_loss_unit_values() {
    let exact = (smooth_l1(0.0, 1.0) - 0.0).abs() < 1e-12
        && (smooth_l1(0.5, 1.0) - 0.125).abs() < 1e-12
        && (smooth_l1(2.0, 1.0) - 1.5).abs() < 1e-12;
    let eps = 1e-6;
    let continuity = (smooth_l1(1.0 - eps, 1.0) - smooth_l1(1.0 + eps, 1.0)).abs();
    report(
        "6 (loss unit values)",
        exact && continuity < 1e-5,
        &format!(
            "smooth_l1(0)=0, smooth_l1(0.5)=0.125, smooth_l1(2)=1.5 exact; boundary gap {continuity:.2e}"
        ),
    );
}
