// Dev harness for tuning the overfit smoke configuration.
use graspkit::data::{imageio, parse_cornell, InputSpec, Split, SplitMode};
use graspkit::grasp::{GaussianEncoderConfig, GraspRectangle};
use graspkit::net::{Network, NetworkConfig};
use graspkit::train::{train, TrainConfig, TrainOptions};
use ndarray::{Array2, Array3};
use std::path::Path;

fn write_bar_sample(dir: &Path, idx: usize, cx: f64, cy: f64, bar_angle: f64) {
    let native = 300usize;
    let bar_len = 200.0;
    let bar_thick = 60.0;
    let (sin_a, cos_a) = bar_angle.sin_cos();
    let mut depth = Array2::<f32>::zeros((native, native));
    let mut rgb = Array3::<f32>::zeros((3, native, native));
    for y in 0..native {
        for x in 0..native {
            let dx = x as f64 - cx;
            let dy = y as f64 - cy;
            let along = dx * cos_a + dy * sin_a;
            let across = -dx * sin_a + dy * cos_a;
            let on_bar = along.abs() <= bar_len / 2.0 && across.abs() <= bar_thick / 2.0;
            depth[[y, x]] = if on_bar { 0.70 } else { 1.0 + 0.0001 * (x + y) as f32 };
            if on_bar {
                rgb[[0, y, x]] = 0.8;
                rgb[[1, y, x]] = 0.3;
                rgb[[2, y, x]] = 0.2;
            } else {
                rgb[[0, y, x]] = 0.1;
                rgb[[1, y, x]] = 0.1;
                rgb[[2, y, x]] = 0.12;
            }
        }
    }
    let id = format!("pcd{idx:04}");
    imageio::save_depth_png(&dir.join(format!("{id}d.png")), &depth).unwrap();
    imageio::save_rgb_png(&dir.join(format!("{id}r.png")), &rgb).unwrap();
    // grasps: jaws close across the bar; several annotations spaced along
    // its long axis, like real Cornell labels
    let mut text = String::new();
    for offset in [-35.0, 0.0, 35.0f64] {
        let grasp = GraspRectangle::new(
            cx + offset * cos_a,
            cy + offset * sin_a,
            bar_angle + std::f64::consts::FRAC_PI_2,
            bar_thick + 28.0,
            120.0,
        )
        .unwrap();
        for c in grasp.corners() {
            text.push_str(&format!("{:.2} {:.2}\n", c[0], c[1]));
        }
    }
    std::fs::write(dir.join(format!("{id}cpos.txt")), text).unwrap();
}

fn main() {
    let dir = std::env::temp_dir().join("graspkit_overfit_dev");
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    let centers = [
        (150.0, 150.0, 0.0),
        (110.0, 120.0, 0.7),
        (190.0, 170.0, -0.9),
        (140.0, 190.0, 1.3),
        (170.0, 120.0, -0.4),
        (120.0, 170.0, 0.3),
        (180.0, 140.0, -1.2),
        (150.0, 110.0, 1.0),
    ];
    for (i, (cx, cy, a)) in centers.iter().enumerate() {
        write_bar_sample(&dir, i, *cx, *cy, *a);
    }
    let report = parse_cornell(&dir).unwrap();
    println!("parsed {} records", report.records.len());

    let ids: Vec<String> = report.records.iter().map(|r| r.sample_id.clone()).collect();
    let split = Split {
        train_ids: ids.clone(),
        test_ids: ids,
    };
    let args: Vec<String> = std::env::args().collect();
    let batch: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(2);
    let lr: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(2e-3);
    let widths: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(48);
    let epochs: usize = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(300);
    let cfg = NetworkConfig {
        in_channels: 1,
        stem_widths: [widths / 4, widths / 2],
        bottleneck_width: widths,
        residual_blocks: 3,
        rfb_enabled: true,
        mdafn_enabled: true,
        se_reduction: 8,
    };
    let mut net = Network::<f32>::new(cfg, 7).unwrap();
    println!("params: {}", net.param_count());
    let out = dir.join("run");
    let mut opts = TrainOptions::new(out);
    opts.train = TrainConfig {
        learning_rate: lr,
        batch_size: batch,
        epochs,
        seed: 7,
    };
    opts.input = InputSpec {
        size: 96,
        ..InputSpec::default()
    };
    opts.encoder = GaussianEncoderConfig {
        w_max: 48.0,
        fill_region: graspkit::grasp::FillRegion::FullRect,
        ..GaussianEncoderConfig::with_scale(16.0)
    };
    opts.augment = None;
    opts.checkpoint_every = 50;
    opts.stop_at_val_accuracy = Some(1.0);
    let t0 = std::time::Instant::now();
    let outcome = train(&mut net, &report.records, &split, &opts).unwrap();
    println!(
        "epochs {} best {:.3} at {} in {:.0}s",
        outcome.epochs_run,
        outcome.best_val_accuracy,
        outcome.best_epoch,
        t0.elapsed().as_secs_f64()
    );
}
