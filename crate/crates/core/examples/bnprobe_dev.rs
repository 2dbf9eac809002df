// Dev probe: quantify the batch-norm train/eval gap on the smoke run.
use graspkit::data::{assemble_input, parse_cornell, InputSpec};
use graspkit::net::load_checkpoint;
use graspkit::nn::Tape;
use ndarray::{Array4, Axis};

fn main() {
    let dir = std::env::temp_dir().join("graspkit_overfit_dev");
    let report = parse_cornell(&dir).unwrap();
    let (net, _meta) = load_checkpoint::<f32>(&dir.join("run/checkpoints/epoch_0300")).unwrap();
    let spec = InputSpec {
        size: 96,
        ..InputSpec::default()
    };
    let mut batch = Array4::<f32>::zeros((report.records.len(), 1, 96, 96));
    for (i, rec) in report.records.iter().enumerate() {
        let (input, _) = assemble_input(rec, &spec).unwrap();
        batch.index_axis_mut(Axis(0), i).assign(&input);
    }
    // train-mode forward (batch statistics over all 8 samples)
    let mut tape = Tape::<f32>::new();
    let (nodes, _) = net.forward_train(&mut tape, batch.clone()).unwrap();
    let cos_train = tape.value(nodes.heads[1]).clone();
    let w_train = tape.value(nodes.heads[3]).clone();
    // eval-mode forward (running statistics)
    let eval = net.forward_eval(&batch).unwrap();
    for i in 0..3 {
        let rec = &report.records[i];
        let (_, labels) = assemble_input(rec, &spec).unwrap();
        let l = &labels[1]; // the centered grasp
        let (cy, cx) = (l.y().round() as usize, l.x().round() as usize);
        println!(
            "{}: target cos {:.2} | train-mode cos {:+.3} w {:+.3} | eval-mode cos {:+.3} w {:+.3}",
            rec.sample_id,
            (2.0 * l.theta()).cos(),
            cos_train[[i, 0, cy, cx]],
            w_train[[i, 0, cy, cx]],
            eval[[i, 1, cy, cx]],
            eval[[i, 3, cy, cx]],
        );
    }
}
