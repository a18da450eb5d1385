//! Trains one of the synthetic transport tasks and prints evaluation stats.
//!
//! ```text
//! cargo run --release -p monge-mmd --example desk_run -- gauss [epochs] [batch]
//! cargo run --release -p monge-mmd --example desk_run -- moons [epochs] [batch]
//! ```

use std::time::Instant;

use monge_mmd::{
    evaluate, map_deviation, CostSpec, DatasetSpec, GaussianOptimalMap, KernelSpec, TrainConfig,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let task = args.first().map(String::as_str).unwrap_or("gauss");
    let epochs = args.get(1).map(|s| s.parse()).transpose()?.unwrap_or(3000);
    let batch = args.get(2).map(|s| s.parse()).transpose()?;

    let gauss = |mean: f64, n, seed| DatasetSpec::IsotropicGaussian {
        n,
        mean: vec![mean, mean],
        variance: 1.0,
        seed,
    };
    let (source, target) = match task {
        "gauss" => (gauss(0.0, 500, 1), gauss(5.0, 500, 2)),
        "moons" => (
            DatasetSpec::TwoMoons { n: 500, noise: 0.05, seed: 1 },
            DatasetSpec::TwoCircles { n: 500, noise: 0.05, factor: 0.5, seed: 2 },
        ),
        "gauss_moons" => (gauss(0.0, 500, 1), DatasetSpec::TwoMoons { n: 500, noise: 0.05, seed: 2 }),
        other => return Err(format!("unknown task {other}").into()),
    };
    let config = TrainConfig {
        epochs,
        batch_size: batch,
        ..TrainConfig::default()
    };
    let started = Instant::now();
    let out = monge_mmd::train(&config, &source.generate()?, &target.generate()?)?;
    let elapsed = started.elapsed().as_secs_f64();
    for r in out.history.iter().filter(|r| r.epoch == 1 || r.epoch % 250 == 0) {
        println!(
            "epoch {:5}  objective {:+.6e}  mmd2 {:+.6e}  cost {:.4}",
            r.epoch, r.objective, r.mmd2, r.cost
        );
    }
    let src_test = source.with_n_and_seed(1000, 101).generate()?;
    let tgt_test = target.with_n_and_seed(1000, 102).generate()?;
    let report = evaluate(&out.params, &src_test, &tgt_test, &KernelSpec::default(), &CostSpec::default())?;
    println!("{}", report.to_json());
    if task == "gauss" {
        let oracle = GaussianOptimalMap::new(&[0.0, 0.0], &[5.0, 5.0])?;
        println!("map deviation {:.4}", map_deviation(&out.params, &oracle, &src_test)?);
    }
    println!("trained in {elapsed:.1}s");
    Ok(())
}
