//! Parameter layout shared by initialization and checkpoint loading.

use super::NetworkConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ParamDef {
    Conv {
        out: usize,
        inp: usize,
        k: (usize, usize),
        /// Convolutions feeding a norm layer carry no bias (the norm shift
        /// absorbs it); attention and head convolutions keep theirs.
        bias: bool,
    },
    Norm {
        ch: usize,
    },
    Linear {
        out: usize,
        inp: usize,
    },
}

/// Ordered list of layers carrying parameters, keyed by module path.
pub(crate) fn layer_defs(cfg: &NetworkConfig) -> Vec<(String, ParamDef)> {
    let [s0, s1] = cfg.stem_widths;
    let b = cfg.bottleneck_width;
    let mut defs: Vec<(String, ParamDef)> = Vec::new();
    let conv = |defs: &mut Vec<(String, ParamDef)>, name: String, out, inp, k| {
        defs.push((
            name.clone(),
            ParamDef::Conv {
                out,
                inp,
                k,
                bias: true,
            },
        ));
    };
    // convolutions feeding a norm layer carry no bias; the norm shift
    // absorbs it
    let conv_norm = |defs: &mut Vec<(String, ParamDef)>, prefix: &str, out, inp, k| {
        defs.push((
            format!("{prefix}.conv"),
            ParamDef::Conv {
                out,
                inp,
                k,
                bias: false,
            },
        ));
        defs.push((format!("{prefix}.norm"), ParamDef::Norm { ch: out }));
    };

    // stem: first block of four convs, second block of two, each followed
    // by a 2x2 max pool at forward time
    conv_norm(&mut defs, "stem.block0.l0", s0, cfg.in_channels, (3, 3));
    for i in 1..4 {
        conv_norm(&mut defs, &format!("stem.block0.l{i}"), s0, s0, (3, 3));
    }
    conv_norm(&mut defs, "stem.block1.l0", s1, s0, (3, 3));
    conv_norm(&mut defs, "stem.block1.l1", s1, s1, (3, 3));

    // two convs lifting to the bottleneck width
    conv_norm(&mut defs, "bottleneck.lift0", b / 2, s1, (3, 3));
    conv_norm(&mut defs, "bottleneck.lift1", b, b / 2, (3, 3));

    let residual = |defs: &mut Vec<(String, ParamDef)>, prefix: &str| {
        conv_norm(defs, &format!("{prefix}.l0"), b, b, (3, 3));
        conv_norm(defs, &format!("{prefix}.l1"), b, b, (3, 3));
    };
    for i in 0..cfg.residual_blocks {
        residual(&mut defs, &format!("bottleneck.res{i}"));
    }
    if cfg.rfb_enabled {
        let bw = b / 4;
        for (branch, kernels) in [
            ("b0", vec![(3, 3)]),
            ("b1", vec![(3, 3), (3, 3)]),
            ("b2", vec![(1, 7), (3, 3)]),
            ("b3", vec![(7, 1), (3, 3)]),
        ] {
            conv_norm(
                &mut defs,
                &format!("bottleneck.rfb.{branch}.reduce"),
                bw,
                b,
                (1, 1),
            );
            for (i, k) in kernels.into_iter().enumerate() {
                conv_norm(
                    &mut defs,
                    &format!("bottleneck.rfb.{branch}.l{i}"),
                    bw,
                    bw,
                    k,
                );
            }
        }
        conv_norm(&mut defs, "bottleneck.rfb.merge", b, b, (1, 1));
    } else {
        // the receptive-field block is replaced by one more residual block
        residual(&mut defs, &format!("bottleneck.res{}", cfg.residual_blocks));
    }

    // decoder: fuse with the deep skip at S/4, shuffle, fuse with the
    // shallow skip at S/2, shuffle
    let fuse = |defs: &mut Vec<(String, ParamDef)>, prefix: &str, f_in: usize, out: usize| {
        if cfg.mdafn_enabled {
            defs.push((
                format!("{prefix}.pixel"),
                ParamDef::Conv {
                    out: 1,
                    inp: f_in,
                    k: (3, 3),
                    bias: true,
                },
            ));
            let hidden = (f_in / cfg.se_reduction).max(1);
            defs.push((
                format!("{prefix}.se_fc1"),
                ParamDef::Linear {
                    out: hidden,
                    inp: f_in,
                },
            ));
            defs.push((
                format!("{prefix}.se_fc2"),
                ParamDef::Linear {
                    out: f_in,
                    inp: hidden,
                },
            ));
        }
        defs.push((
            format!("{prefix}.out"),
            ParamDef::Conv {
                out,
                inp: f_in,
                k: (3, 3),
                bias: false,
            },
        ));
        defs.push((format!("{prefix}.norm"), ParamDef::Norm { ch: out }));
    };
    fuse(&mut defs, "decoder.fuse0", s1 + b, b);
    fuse(&mut defs, "decoder.fuse1", s0 + b / 4, b / 2);

    // four linear prediction heads
    for head in ["quality", "cos2theta", "sin2theta", "width"] {
        conv(
            &mut defs,
            format!("heads.{head}"),
            1,
            cfg.head_input_channels(),
            (3, 3),
        );
    }
    defs
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_have_expected_structure() {
        let defs = layer_defs(&NetworkConfig::default());
        let names: Vec<&str> = defs.iter().map(|(n, _)| n.as_str()).collect();
        assert!(names.contains(&"stem.block0.l0.conv"));
        assert!(names.contains(&"bottleneck.res2.l1.norm"));
        assert!(names.contains(&"bottleneck.rfb.b3.l1.conv"));
        assert!(names.contains(&"decoder.fuse0.se_fc2"));
        assert!(names.contains(&"heads.width"));
        // no duplicate layer names
        let mut sorted = names.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(sorted.len(), names.len());
    }

    #[test]
    fn rfb_disabled_swaps_in_extra_residual() {
        let cfg = NetworkConfig {
            rfb_enabled: false,
            ..NetworkConfig::default()
        };
        let defs = layer_defs(&cfg);
        let names: Vec<&str> = defs.iter().map(|(n, _)| n.as_str()).collect();
        assert!(names.contains(&"bottleneck.res3.l0.conv"));
        assert!(!names.iter().any(|n| n.contains("rfb")));
    }

    #[test]
    fn mdafn_disabled_drops_attention_params() {
        let cfg = NetworkConfig {
            mdafn_enabled: false,
            ..NetworkConfig::default()
        };
        let defs = layer_defs(&cfg);
        assert!(!defs.iter().any(|(n, _)| n.contains("pixel") || n.contains("se_fc")));
        assert!(defs.iter().any(|(n, _)| n == "decoder.fuse0.out"));
    }
}
