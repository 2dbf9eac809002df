use graspkit::net::{Network, NetworkConfig};
use graspkit::nn::{gradcheck, Tape};
use graspkit::train::{tape_grasp_loss, LossConfig};
use graspkit::grasp::{encode_grasp_maps, GaussianEncoderConfig, GraspRectangle};
use ndarray::{Array4, ArrayD};

fn main() {
    let cfg = NetworkConfig::miniature();
    let net = Network::<f64>::new(cfg, 42).unwrap();
    let x = Array4::<f64>::from_shape_fn((2, 1, 16, 16), |(n, _, i, j)| {
        ((n * 97 + i * 13 + j * 7) as f64 * 0.173).sin() * 0.5
    });
    let enc = GaussianEncoderConfig { t_x: 3.0, t_y: 3.0, w_max: 20.0, ..Default::default() };
    let rect = GraspRectangle::new(8.0, 8.0, 0.4, 9.0, 5.0).unwrap();
    let targets = vec![
        encode_grasp_maps(&[rect], &enc, (16, 16)).unwrap(),
        encode_grasp_maps(&[GraspRectangle::new(5.0, 10.0, -0.7, 8.0, 4.0).unwrap()], &enc, (16, 16)).unwrap(),
    ];
    let loss_cfg = LossConfig::default();

    // analytic gradients
    let mut tape = Tape::<f64>::new();
    let (nodes, _) = net.forward_train(&mut tape, x.clone()).unwrap();
    let loss_node = tape_grasp_loss(&mut tape, &nodes.heads, &targets, &loss_cfg).unwrap();
    println!("loss = {}", tape.scalar(loss_node));
    let grads = tape.backward(loss_node);
    let analytic: Vec<(String, ArrayD<f64>)> = nodes
        .params
        .iter()
        .map(|(name, id)| {
            let g = grads.get(*id).cloned().unwrap_or_else(|| panic!("no grad for {name}"));
            (name.clone(), g)
        })
        .collect();

    let mut params: Vec<(String, ArrayD<f64>)> =
        net.params().iter().map(|(k, v)| (k.clone(), v.clone())).collect();
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
    let t0 = std::time::Instant::now();
    let results = gradcheck::check_parameters(&mut params, &analytic, loss_fn, 1e-6);
    let mut worst = (String::new(), 0.0f64);
    for r in &results {
        if r.max_relative_error > worst.1 {
            worst = (r.name.clone(), r.max_relative_error);
        }
    }
    println!("checked {} tensors in {:.1}s", results.len(), t0.elapsed().as_secs_f64());
    println!("worst: {} rel err {:.3e}", worst.0, worst.1);
    let bad: Vec<_> = results.iter().filter(|r| r.max_relative_error >= 1e-3).collect();
    for b in &bad {
        println!("FAIL {} rel {:.3e}", b.name, b.max_relative_error);
    }
    if bad.is_empty() { println!("ALL OK"); }
}
