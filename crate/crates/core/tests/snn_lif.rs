use std::fs;
use std::path::PathBuf;

use spyking_core::data::{fixture_weights, synthetic_dataset, WeightContainer};
use spyking_core::nn::{build_architecture, Network, Shape};
use spyking_core::snn::{
    decode_output, encode_constant_current, lif_step, spiking_forward, LifParams, LifState, DEFAULT_SEQ_LENGTH,
};

fn single_pixel_spikes(current: f64, p: &LifParams) -> usize {
    encode_constant_current(&[current], Shape::flat(1), p, DEFAULT_SEQ_LENGTH)
        .unwrap()
        .total_spikes()
}

#[test]
fn rest_is_a_fixed_point() {
    for v_leak in [0.0, 0.2, -0.3] {
        let p = LifParams {
            v_leak,
            ..LifParams::default()
        };
        let mut s = LifState {
            v: vec![v_leak; 4],
            i: vec![0.0; 4],
        };
        for _ in 0..1000 {
            let spikes = s.step(&[0.0; 4], &p).unwrap();
            assert!(spikes.iter().all(|&x| x == 0));
        }
        assert!(s.v.iter().all(|&v| v == v_leak));
        assert!(s.i.iter().all(|&i| i == 0.0));
    }
}

#[test]
fn spike_count_is_monotone_in_current() {
    let p = LifParams::default();
    let counts: Vec<usize> = (0..20).map(|k| single_pixel_spikes(k as f64 / 19.0, &p)).collect();
    assert_eq!(counts[0], 0);
    assert!(counts[19] > 0);
    assert!(counts.windows(2).all(|w| w[0] <= w[1]), "{counts:?}");
}

#[test]
fn higher_threshold_never_spikes_more() {
    let levels: Vec<f64> = (0..20).map(|k| k as f64 / 19.0).collect();
    let counts: Vec<Vec<usize>> = [0.25, 0.5, 1.0]
        .iter()
        .map(|&v_th| {
            let p = LifParams {
                v_th,
                ..LifParams::default()
            };
            levels.iter().map(|&c| single_pixel_spikes(c, &p)).collect()
        })
        .collect();
    for k in 0..levels.len() {
        assert!(
            counts[0][k] >= counts[1][k] && counts[1][k] >= counts[2][k],
            "level {k}: {counts:?}"
        );
    }
    assert!(counts[0][19] > counts[2][19]);
}

#[test]
fn zero_image_encodes_to_silence() {
    let train = encode_constant_current(&[0.0; 784], Shape::new(1, 28, 28), &LifParams::default(), 30).unwrap();
    assert_eq!(train.seq_length(), 30);
    assert_eq!(train.total_spikes(), 0);
}

#[test]
fn state_persists_between_steps() {
    let p = LifParams::default();
    let s0 = LifState::zeros(1);
    let (s1, _) = lif_step(&s0, &[1.0], &p).unwrap();
    let (s2, _) = lif_step(&s1, &[0.0], &p).unwrap();
    // Current decays by (1 - dt/tau_syn) without input.
    assert!((s2.i[0] - s1.i[0] * 0.8).abs() < 1e-15);
    assert!(s2.v[0] > s1.v[0]);
    assert!(lif_step(&s0, &[1.0, 2.0], &p).is_err());
}

/// Independent LIF network evaluation for `smicronet`.
fn reference_smicronet(w: &WeightContainer, image: &[f64], p: &LifParams, steps: usize) -> Vec<f64> {
    let f = |name: &str| {
        w.get(name)
            .unwrap()
            .values
            .iter()
            .map(|&v| v as f64)
            .collect::<Vec<f64>>()
    };
    let (cw, cb, fw, fb) = (f("conv1.weight"), f("conv1.bias"), f("fc1.weight"), f("fc1.bias"));
    let lif = |v: &mut [f64], i: &mut [f64], x: &[f64]| -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(k, &xk)| {
                i[k] = i[k] + p.dt * (-p.tau_syn_inv * i[k]) + xk;
                v[k] = v[k] + p.dt * p.tau_mem_inv * (p.v_leak - v[k] + i[k]);
                if v[k] >= p.v_th {
                    v[k] = p.v_reset;
                    1.0
                } else {
                    0.0
                }
            })
            .collect()
    };
    let (mut ev, mut ei) = (vec![0.0; 784], vec![0.0; 784]);
    let (mut hv, mut hi) = (vec![0.0; 576], vec![0.0; 576]);
    let mut acc = vec![0.0; 10];
    for _ in 0..steps {
        let spikes = lif(&mut ev, &mut ei, image);
        let mut conv = vec![0.0; 576];
        for o in 0..4 {
            for y in 0..12 {
                for x in 0..12 {
                    let mut s = cb[o];
                    for ky in 0..5 {
                        for kx in 0..5 {
                            s += cw[o * 25 + ky * 5 + kx] * spikes[(2 * y + ky) * 28 + 2 * x + kx];
                        }
                    }
                    conv[o * 144 + y * 12 + x] = s;
                }
            }
        }
        let hidden = lif(&mut hv, &mut hi, &conv);
        for (o, a) in acc.iter_mut().enumerate() {
            *a += fb[o] + (0..576).map(|k| fw[o * 576 + k] * hidden[k]).sum::<f64>();
        }
    }
    acc
}

#[test]
fn spiking_forward_matches_reference_and_golden() {
    let w = fixture_weights("smicronet", 7).unwrap();
    let net = Network::bind(build_architecture("smicronet").unwrap(), &w).unwrap();
    let p = LifParams::default();
    let data = synthetic_dataset(3, 3);
    let mut rendered = String::new();
    for i in 0..data.len() {
        let img = data.image_f64(i);
        let train = encode_constant_current(&img, Shape::new(1, 28, 28), &p, DEFAULT_SEQ_LENGTH).unwrap();
        let out = spiking_forward(&net, &train, &p).unwrap();
        let reference = reference_smicronet(&w, &img, &p, DEFAULT_SEQ_LENGTH);
        for (a, b) in out.accumulated.iter().zip(&reference) {
            assert!((a - b).abs() < 1e-9, "{a} vs {b}");
        }
        assert_eq!(out.spike_counts.len(), 1);
        assert!(out.spike_counts[0] > 0);
        let fields: Vec<String> = out.accumulated.iter().map(|v| format!("{v:.12e}")).collect();
        rendered.push_str(&format!("smicronet {i} {}\n", fields.join(" ")));
    }
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/spiking_output.txt");
    if std::env::var_os("SPYKING_REGEN_GOLDEN").is_some() {
        fs::write(&path, &rendered).unwrap();
    }
    let golden = fs::read_to_string(&path).unwrap();
    for (g, r) in golden.lines().zip(rendered.lines()) {
        let parse = |l: &str| {
            l.split_whitespace()
                .skip(2)
                .map(|v| v.parse::<f64>().unwrap())
                .collect::<Vec<_>>()
        };
        for (a, b) in parse(g).iter().zip(parse(r)) {
            assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0));
        }
    }
    assert_eq!(golden.lines().count(), 3);
}

#[test]
fn readout_breaks_ties_low() {
    assert_eq!(decode_output(&[1.0, 3.0, 3.0, 2.0]), 1);
    assert_eq!(decode_output(&[0i64; 10]), 0);
}

#[test]
fn spiking_forward_rejects_relu_networks_and_bad_shapes() {
    let p = LifParams::default();
    let relu = Network::bind(
        build_architecture("micronet").unwrap(),
        &fixture_weights("micronet", 1).unwrap(),
    )
    .unwrap();
    let train = encode_constant_current(&[0.5; 784], Shape::new(1, 28, 28), &p, 3).unwrap();
    assert!(spiking_forward(&relu, &train, &p).is_err());
    let snn = Network::bind(
        build_architecture("smicronet").unwrap(),
        &fixture_weights("smicronet", 1).unwrap(),
    )
    .unwrap();
    let small = encode_constant_current(&[0.5; 4], Shape::new(1, 2, 2), &p, 3).unwrap();
    assert!(spiking_forward(&snn, &small, &p).is_err());
    let bad = LifParams { v_th: -1.0, ..p };
    assert!(spiking_forward(&snn, &train, &bad).is_err());
}
