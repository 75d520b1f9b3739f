use finnews_core::factcheck::{check_instance, gradient_check, ModelConfig, DEFAULT_PARAM_SAMPLES};

fn cfg() -> ModelConfig {
    ModelConfig { vocab_size: 50, d_model: 16, n_heads: 2, n_layers: 1, d_ff: 32, max_len: 8, n_classes: 2, seed: 0 }
}

#[test]
fn one_layer_d16_batch4_double_precision() {
    let inst = check_instance::<f64>(cfg(), 4, 0).unwrap();
    let r = gradient_check(&inst.params, &inst.batch, Some(&inst.deltas), 1e-3, DEFAULT_PARAM_SAMPLES, 0).unwrap();
    assert!(r.delta_coords == 4 * 8 * 16);
    assert!(r.param_coords == DEFAULT_PARAM_SAMPLES);
    assert!(r.max_rel_error < 1e-6, "{r:?}");
}

#[test]
fn two_layers_double_precision() {
    let c = ModelConfig { n_layers: 2, ..cfg() };
    for seed in 0..3 {
        let inst = check_instance::<f64>(c, 4, seed).unwrap();
        let r = gradient_check(&inst.params, &inst.batch, Some(&inst.deltas), 1e-3, DEFAULT_PARAM_SAMPLES, seed).unwrap();
        assert!(r.max_rel_error < 1e-6, "seed {seed}: {r:?}");
    }
}
