//! Synthetic dataset fixtures shared by the integration suites.
//!
//! Scenes are single elongated bars on a flat table plane, annotated with
//! grasps whose jaws close across the bar — the same shape real Cornell
//! and Jacquard scenes take, at a size the test budget can train on.

#![allow(dead_code)]

use graspkit::data::imageio;
use graspkit::grasp::GraspRectangle;
use ndarray::{Array2, Array3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::path::Path;

pub struct BarScene {
    pub cx: f64,
    pub cy: f64,
    pub angle: f64,
    pub length: f64,
    pub thickness: f64,
}

impl BarScene {
    /// Grasp annotations: jaws close across the bar at several points
    /// along its axis.
    pub fn grasps(&self, native: f64) -> Vec<GraspRectangle> {
        let (sin_a, cos_a) = self.angle.sin_cos();
        let offsets = [-0.175 * native, 0.0, 0.175 * native];
        offsets
            .iter()
            .map(|off| {
                GraspRectangle::new(
                    self.cx + off * cos_a,
                    self.cy + off * sin_a,
                    self.angle + std::f64::consts::FRAC_PI_2,
                    self.thickness + 28.0,
                    0.4 * native,
                )
                .expect("valid fixture grasp")
            })
            .collect()
    }

    pub fn depth(&self, native: usize) -> Array2<f32> {
        let (sin_a, cos_a) = self.angle.sin_cos();
        Array2::from_shape_fn((native, native), |(y, x)| {
            let dx = x as f64 - self.cx;
            let dy = y as f64 - self.cy;
            let along = dx * cos_a + dy * sin_a;
            let across = -dx * sin_a + dy * cos_a;
            if along.abs() <= self.length / 2.0 && across.abs() <= self.thickness / 2.0 {
                0.70
            } else {
                1.0 + 0.0001 * (x + y) as f32
            }
        })
    }

    pub fn rgb(&self, native: usize) -> Array3<f32> {
        let (sin_a, cos_a) = self.angle.sin_cos();
        Array3::from_shape_fn((3, native, native), |(c, y, x)| {
            let dx = x as f64 - self.cx;
            let dy = y as f64 - self.cy;
            let along = dx * cos_a + dy * sin_a;
            let across = -dx * sin_a + dy * cos_a;
            let on_bar =
                along.abs() <= self.length / 2.0 && across.abs() <= self.thickness / 2.0;
            match (on_bar, c) {
                (true, 0) => 0.8,
                (true, 1) => 0.3,
                (true, _) => 0.2,
                (false, 2) => 0.12,
                (false, _) => 0.1,
            }
        })
    }
}

pub fn scene_for(native: usize, rng: &mut ChaCha12Rng) -> BarScene {
    let n = native as f64;
    BarScene {
        cx: rng.random_range(0.37 * n..0.63 * n),
        cy: rng.random_range(0.37 * n..0.63 * n),
        angle: rng.random_range(-1.4..1.4),
        length: 0.66 * n,
        thickness: 0.2 * n,
    }
}

/// Writes `count` Cornell-format samples (depth PNG, RGB PNG, cpos vertex
/// annotations, object_ids.txt) under `dir`.
pub fn write_cornell_fixture(dir: &Path, count: usize, native: usize, seed: u64) {
    std::fs::create_dir_all(dir).expect("fixture dir");
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut object_ids = String::new();
    for i in 0..count {
        let scene = scene_for(native, &mut rng);
        let id = format!("pcd{i:04}");
        imageio::save_depth_png(&dir.join(format!("{id}d.png")), &scene.depth(native))
            .expect("depth write");
        imageio::save_rgb_png(&dir.join(format!("{id}r.png")), &scene.rgb(native))
            .expect("rgb write");
        let mut text = String::new();
        for grasp in scene.grasps(native as f64) {
            for corner in grasp.corners() {
                text.push_str(&format!("{:.2} {:.2}\n", corner[0], corner[1]));
            }
        }
        std::fs::write(dir.join(format!("{id}cpos.txt")), text).expect("cpos write");
        object_ids.push_str(&format!("{id} object{:02}\n", i % 4.max(count / 4)));
    }
    std::fs::write(dir.join("object_ids.txt"), object_ids).expect("object ids");
}

/// Writes `count` Jacquard-format samples (depth PNG, RGB PNG,
/// `x;y;theta_deg;opening;jaw` grasp lines) under `dir`.
pub fn write_jacquard_fixture(dir: &Path, count: usize, native: usize, seed: u64) {
    std::fs::create_dir_all(dir).expect("fixture dir");
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let n_objects = (count / 2).max(2);
    for i in 0..count {
        let scene = scene_for(native, &mut rng);
        let object = format!("obj{:03}", i % n_objects);
        let id = format!("{}_{object}", i / n_objects);
        imageio::save_depth_png(&dir.join(format!("{id}_depth.png")), &scene.depth(native))
            .expect("depth write");
        imageio::save_rgb_png(&dir.join(format!("{id}_RGB.png")), &scene.rgb(native))
            .expect("rgb write");
        let mut text = String::new();
        for grasp in scene.grasps(native as f64) {
            text.push_str(&format!(
                "{:.2};{:.2};{:.3};{:.2};{:.2}\n",
                grasp.x(),
                grasp.y(),
                grasp.theta().to_degrees(),
                grasp.w(),
                grasp.h()
            ));
        }
        std::fs::write(dir.join(format!("{id}_grasps.txt")), text).expect("grasps write");
    }
}
