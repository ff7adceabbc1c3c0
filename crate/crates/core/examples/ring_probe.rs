//! Scratch harness: full model on the 8-blob ring, prints mode coverage.
//!
//! Usage: ring_probe [seed] [steps] [sigma] [radius_threshold]

use modegan_core::data::gmm_ring;
use modegan_core::latent::ModePriorParams;
use modegan_core::metrics::mode_coverage;
use modegan_core::train::{train, TrainConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let seed: u64 = args.get(1).map_or(7, |s| s.parse().unwrap());
    let steps: usize = args.get(2).map_or(8000, |s| s.parse().unwrap());
    let sigma: f64 = args.get(3).map_or(0.05, |s| s.parse().unwrap());
    let threshold: f64 = args.get(4).map_or(0.5, |s| s.parse().unwrap());

    let data = gmm_ring::<f64>(4000, 8, 2.0, sigma, seed).unwrap();
    let mut cfg = TrainConfig::for_data(data.dim(), data.num_classes(), seed).unwrap();
    cfg.steps = steps;
    let (alpha, _) = ModePriorParams::from_probs(data.class_masses()).unwrap();
    cfg.alpha = alpha;

    let t0 = std::time::Instant::now();
    let (trained, _) = train(&cfg, &data).unwrap();
    let train_time = t0.elapsed();

    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xe7a1);
    let (gen, _) = trained.generate(10_000, &mut rng).unwrap();
    let centers = data.class_centers();
    let (covered, frac) = mode_coverage(&gen, &centers, threshold);
    let consistency = trained.inverter_consistency(10_000, &mut rng).unwrap();

    println!("seed {seed} steps {steps} sigma {sigma} threshold {threshold}");
    println!("train time: {train_time:?}");
    println!("modes covered: {covered}/8  high-quality fraction: {frac:.4}");
    println!("inverter consistency: {consistency:.4}");
}
