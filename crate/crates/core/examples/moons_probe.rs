//! Scratch harness: trains the full model on skewed two-moons data and
//! prints the headline numbers. Useful for eyeballing hyperparameters.
//!
//! Usage: moons_probe [seed] [steps] [c1 c2 c3 as 0/1]

use modegan_core::data::two_moons;
use modegan_core::latent::ModePriorParams;
use modegan_core::metrics::{clustering_accuracy, modal_mass};
use modegan_core::train::{train, ConditionToggles, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let seed: u64 = args.get(1).map_or(7, |s| s.parse().unwrap());
    let steps: usize = args.get(2).map_or(5000, |s| s.parse().unwrap());
    let c1 = args.get(3).map_or(true, |s| s == "1");
    let c2 = args.get(4).map_or(true, |s| s == "1");
    let c3 = args.get(5).map_or(true, |s| s == "1");
    let env = |key: &str, default: f64| -> f64 {
        std::env::var(key).ok().map_or(default, |v| v.parse().unwrap())
    };

    let data = two_moons::<f64>(2000, [0.8, 0.2], 0.08, seed).unwrap();
    let mut cfg = TrainConfig::for_data(data.dim(), data.num_classes(), seed).unwrap();
    cfg.steps = steps;
    cfg.lr_d = env("LR_D", cfg.lr_d);
    cfg.lr_g = env("LR_G", cfg.lr_g);
    cfg.lr_h = env("LR_H", cfg.lr_h);
    cfg.inverter_weight = env("LAMBDA", cfg.inverter_weight);
    cfg.latent.noise_halfwidth = env("EPS", cfg.latent.noise_halfwidth);
    cfg.batch_size = env("BATCH", cfg.batch_size as f64) as usize;
    cfg.d_steps = env("DSTEPS", cfg.d_steps as f64) as usize;
    cfg.hidden_units = env("HIDDEN", cfg.hidden_units as f64) as usize;
    cfg.real_label_target = env("SMOOTH", cfg.real_label_target);
    if std::env::var("TANH").is_ok() {
        cfg.hidden_activation = modegan_core::nn::Activation::Tanh;
    }
    cfg.toggles = ConditionToggles {
        multimodal_latent: c1,
        use_inverter: c2,
        matched_prior: c3,
    };
    let (alpha, _) = ModePriorParams::from_probs(data.class_masses()).unwrap();
    cfg.alpha = alpha;

    let t0 = std::time::Instant::now();
    let (trained, trace) = train(&cfg, &data).unwrap();
    let train_time = t0.elapsed();

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xe7a1);
    let h_real = trained.model.inverter.forward(data.points()).unwrap();
    let pred: Vec<usize> = h_real
        .rows()
        .into_iter()
        .map(|r| {
            let mut best = 0;
            for (i, &v) in r.iter().enumerate() {
                if v > r[best] {
                    best = i;
                }
            }
            best
        })
        .collect();
    let acc = clustering_accuracy(&pred, data.labels()).unwrap();

    let (gen, _tags) = trained.generate(10_000, &mut rng).unwrap();
    let assigned = data.nearest_labels(&gen);
    let masses: Vec<f64> = modal_mass(&assigned, data.num_classes()).unwrap();
    let consistency = trained.inverter_consistency(10_000, &mut rng).unwrap();

    println!("seed {seed} steps {steps} toggles {}", cfg.toggles.label());
    println!("train time: {train_time:?}");
    println!("acc (h on real): {acc:.4}");
    println!("generated modal mass: {masses:?}");
    println!("inverter consistency: {consistency:.4}");
    for row in trace.rows.iter().rev().take(3).collect::<Vec<_>>().iter().rev() {
        println!(
            "  step {:5}  d {:.4}  g {:.4}  inv {:.4}",
            row.step, row.d_loss, row.g_loss, row.inv_loss
        );
    }
}
