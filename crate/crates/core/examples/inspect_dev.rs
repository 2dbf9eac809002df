// Dev harness: inspect what a trained smoke checkpoint predicts.
use graspkit::data::{assemble_input, parse_cornell, InputSpec};
use graspkit::eval::{is_correct, MatchCriteria};
use graspkit::grasp::{decode_grasps, rectangle_from_planar};
use graspkit::net::load_checkpoint;

fn main() {
    let dir = std::env::temp_dir().join("graspkit_overfit_dev");
    let report = parse_cornell(&dir).unwrap();
    let (net, meta) = load_checkpoint::<f32>(&dir.join("run/checkpoints/epoch_0300")).unwrap();
    let spec = InputSpec {
        size: 96,
        ..InputSpec::default()
    };
    for rec in report.records.iter().take(4) {
        let (input, labels) = assemble_input(rec, &spec).unwrap();
        let mut maps = net.predict_maps(&input).unwrap();
        maps.quality.mapv_inplace(|v| v.clamp(0.0, 1.0));
        let label = &labels[0];
        println!(
            "{}: label center ({:.1},{:.1}) theta {:.2} w {:.1} h {:.1}",
            rec.sample_id,
            label.x(),
            label.y(),
            label.theta(),
            label.w(),
            label.h()
        );
        for sigma in [0.0, 2.0] {
            let g = &decode_grasps(&maps, 1, sigma, meta.encoder.w_max).unwrap()[0];
            let rect = rectangle_from_planar(
                &graspkit::grasp::PlanarGrasp::new(
                    g.u(),
                    g.v(),
                    g.phi(),
                    g.width().max(1.0),
                    g.quality(),
                )
                .unwrap(),
                0.5,
            )
            .unwrap();
            let out = is_correct(&rect, &labels, &MatchCriteria::default()).unwrap();
            println!(
                "  sigma {sigma}: peak ({:.0},{:.0}) q {:.3} phi {:.2} w {:.1} -> matched {} (jacc {:.3}, dang {:.2})",
                g.u(),
                g.v(),
                g.quality(),
                g.phi(),
                g.width(),
                out.matched,
                out.best_jaccard,
                out.best_angle_diff
            );
        }
        // raw map stats at the label center
        let (cy, cx) = (label.y().round() as usize, label.x().round() as usize);
        println!(
            "  at center: q {:.3} cos {:.3} sin {:.3} wmap {:.3}",
            maps.quality[[cy, cx]],
            maps.cos2theta[[cy, cx]],
            maps.sin2theta[[cy, cx]],
            maps.width[[cy, cx]]
        );
    }
}
