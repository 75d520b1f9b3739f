use finnews_core::factcheck::{batch_loss, pgd_attack, Example, ModelConfig, ModelParameters, PgdConfig};
use finnews_core::rng::seeded;
use rand::Rng;

#[test]
fn hundred_random_attacks_stay_feasible_and_never_lower_the_loss() {
    let mut rng = seeded(4);
    for round in 0..100 {
        let d_model = [4usize, 8, 12][rng.gen_range(0..3)];
        let cfg = ModelConfig {
            vocab_size: rng.gen_range(5..30),
            d_model,
            n_heads: if d_model % 4 == 0 { 2 } else { 1 },
            n_layers: rng.gen_range(0..3),
            d_ff: rng.gen_range(4..20),
            max_len: rng.gen_range(2..10),
            n_classes: 2,
            seed: round,
        };
        let params = if rng.gen_bool(0.5) {
            ModelParameters::<f64>::init_with_std(cfg, rng.gen_range(0.01..0.5)).unwrap()
        } else {
            ModelParameters::<f64>::random_dense(cfg, rng.gen_range(0.01..0.3), round).unwrap()
        };
        let batch: Vec<Example> = (0..rng.gen_range(1..6))
            .map(|_| Example {
                tokens: (0..rng.gen_range(1..=cfg.max_len)).map(|_| rng.gen_range(0..cfg.vocab_size as u32)).collect(),
                label: rng.gen_range(0..2),
            })
            .collect();
        let pc = PgdConfig { epsilon: rng.gen_range(0.0..0.3), alpha: rng.gen_range(0.001..0.2), steps: rng.gen_range(1..8) };
        let out = pgd_attack(&params, &batch, &pc).unwrap();
        let worst = out.deltas.iter().flatten().fold(0.0f64, |m, &x| m.max(x.abs()));
        assert!(worst <= pc.epsilon + 1e-12, "round {round}: {worst} > {}", pc.epsilon);
        assert!(out.adversarial_loss >= out.clean_loss, "round {round}");
        let clean = batch_loss(&params, &batch, None).unwrap();
        assert!((clean - out.clean_loss).abs() <= 1e-12 * clean.max(1.0));
        let replay = batch_loss(&params, &batch, Some(&out.deltas)).unwrap();
        assert!((replay - out.adversarial_loss).abs() <= 1e-12 * replay.max(1.0), "round {round}");
    }
}
