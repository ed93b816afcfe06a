//! Network-level contracts: shapes, determinism, residual capture, census.

use watermamba::network::{count_flops, count_params, init_weights, Model, ModelConfig};
use watermamba::rng::Rng;
use watermamba::Tensor;

fn small() -> ModelConfig {
    ModelConfig {
        widths: [4, 6, 8, 8],
        state: 4,
        ..ModelConfig::default()
    }
}

fn image(n: usize, h: usize, w: usize, seed: u64) -> Tensor {
    let mut rng = Rng::new(seed);
    Tensor::from_fn(&[n, 3, h, w], |_| rng.next_f32())
}

#[test]
fn shape_contract_over_the_size_grid() {
    let model = Model::from_store(&init_weights(&small(), 1).unwrap()).unwrap();
    for h in [8, 16, 64, 256] {
        for w in [8, 24, 256] {
            let y = model.forward(&image(1, h, w, (h * w) as u64)).unwrap();
            assert_eq!(y.shape(), &[1, 3, h, w]);
            assert!(y.data().iter().all(|v| v.is_finite()), "{h}x{w}");
        }
    }
}

#[test]
fn indivisible_sizes_ask_for_padding() {
    let model = Model::from_store(&init_weights(&small(), 1).unwrap()).unwrap();
    let err = model.forward(&image(1, 12, 16, 0)).unwrap_err().to_string();
    assert!(err.contains("pad"), "{err}");
}

#[test]
fn outputs_do_not_depend_on_the_worker_count() {
    let model = Model::from_store(&init_weights(&small(), 2).unwrap()).unwrap();
    let x = image(2, 32, 24, 3);
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| model.forward(&x).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(3));
    assert_eq!(one, run(8));
}

#[test]
fn batch_items_are_independent() {
    let model = Model::from_store(&init_weights(&small(), 4).unwrap()).unwrap();
    let x = image(2, 16, 16, 5);
    let y = model.forward(&x).unwrap();
    for b in 0..2 {
        let single = model.forward(&x.batch_item(b).unwrap()).unwrap();
        assert_eq!(single, y.batch_item(b).unwrap());
    }
}

#[test]
fn output_is_captured_residual_plus_input() {
    let model = Model::from_store(&init_weights(&ModelConfig::default(), 6).unwrap()).unwrap();
    let x = image(1, 16, 32, 7);
    let t = model.forward_trace(&x).unwrap();
    assert_eq!(t.output, t.residual.add(&x).unwrap());
    assert_eq!(t.output, model.forward(&x).unwrap());
}

#[test]
fn census_is_linear_in_pixels() {
    let cfg = ModelConfig::default();
    let base = count_flops(&cfg, 256, 256).unwrap();
    let big = count_flops(&cfg, 512, 512).unwrap();
    let ratio = big.total_macs() as f64 / base.total_macs() as f64;
    assert!((ratio / 4.0 - 1.0).abs() <= 0.02, "{ratio}");
    assert_eq!(base.params, count_params(&cfg).unwrap());
    let parts: u64 = base.entries.iter().map(|e| e.macs).sum();
    assert_eq!(parts, base.total_macs());
}

#[test]
fn every_ablation_shrinks_the_census() {
    let full = ModelConfig::default();
    let p = count_params(&full).unwrap();
    let m = count_flops(&full, 64, 64).unwrap().total_macs();
    for cfg in [
        ModelConfig {
            use_soss: false,
            ..full.clone()
        },
        ModelConfig {
            use_ccoss: false,
            ..full.clone()
        },
        ModelConfig {
            use_msffn: false,
            ..full.clone()
        },
    ] {
        assert!(count_params(&cfg).unwrap() < p);
        assert!(count_flops(&cfg, 64, 64).unwrap().total_macs() < m);
        let model = Model::from_store(&init_weights(&cfg, 9).unwrap()).unwrap();
        assert_eq!(
            model.forward(&image(1, 16, 16, 10)).unwrap().shape(),
            &[1, 3, 16, 16]
        );
    }
}
