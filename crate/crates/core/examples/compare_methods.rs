//! Runs all four methods on the mock backend over a range of seeds and prints
//! mean best reward and depth per method.
//!
//! cargo run --release -p mcr-core --example compare_methods -- [seeds] [landscape]

use std::sync::Arc;
use std::time::Instant;

use mcr_core::baselines::{run_cot, run_self_consistency, run_tot_bfs, TotConfig};
use mcr_core::env::{Environment, Landscape, MockBackend, MockProfile, QuerySettings};
use mcr_core::{run_search, ActionSpace, RootQuery, SearchConfig};

fn main() {
    let mut args = std::env::args().skip(1);
    let seeds: u64 = args.next().and_then(|s| s.parse().ok()).unwrap_or(20);
    let landscape = match args.next().as_deref() {
        Some("uniform") => Landscape::Uniform,
        Some("depth_monotone") => Landscape::DepthMonotone,
        Some("deceptive") => Landscape::Deceptive,
        _ => Landscape::PropertyKeyed,
    };
    let query = RootQuery::OpenCatalysis {
        adsorbate: "*OH".into(),
        k: 5,
    };
    let space = ActionSpace::default();
    let start = Instant::now();
    let mut sums = [0.0f64; 4];
    let mut depth = [0.0f64; 2];
    let mut mcr_wins = 0;
    for seed in 0..seeds {
        let mut profile = MockProfile::new(seed, landscape);
        if let Some(v) = env_f64("MOCK_BASE") {
            profile.base_energy = v;
        }
        if let Some(v) = env_f64("MOCK_BONUS") {
            profile.tier_bonus = v;
        }
        if let Some(v) = env_f64("MOCK_NOISE") {
            profile.noise = v;
        }
        if let Some(v) = env_f64("MOCK_FAVORED") {
            profile.favored_count = v as usize;
        }
        let backend = MockBackend::new(profile).expect("mock");
        let env = Environment::new(Arc::new(backend), QuerySettings::default());
        let cot = run_cot(&query, &env).expect("cot").metrics.best_reward;
        let sc = run_self_consistency(&query, &env, 10)
            .expect("sc")
            .metrics
            .best_reward;
        let tot = run_tot_bfs(&query, &env, &space, TotConfig::default()).expect("tot");
        let config = SearchConfig {
            rng_seed: seed,
            ..SearchConfig::default()
        };
        let mcr = run_search(&query, &env, &space, config, &mut |_| {}).expect("mcr");
        println!(
            "seed {seed:>3}: cot {cot:.3} sc {sc:.3} tot {:.3} (d {}) mcr {:.3} (d {})",
            tot.metrics.best_reward, tot.metrics.d_max, mcr.metrics.best_reward, mcr.metrics.d_max
        );
        if mcr.metrics.best_reward >= tot.metrics.best_reward {
            mcr_wins += 1;
        }
        sums[0] += cot;
        sums[1] += sc;
        sums[2] += tot.metrics.best_reward;
        sums[3] += mcr.metrics.best_reward;
        depth[0] += tot.metrics.d_max as f64;
        depth[1] += mcr.metrics.d_max as f64;
    }
    let n = seeds as f64;
    println!(
        "mean: cot {:.3} sc {:.3} tot {:.3} mcr {:.3}; d_max tot {:.2} mcr {:.2}; mcr >= tot in {mcr_wins}/{seeds}; {:.1?}",
        sums[0] / n,
        sums[1] / n,
        sums[2] / n,
        sums[3] / n,
        depth[0] / n,
        depth[1] / n,
        start.elapsed()
    );
}

fn env_f64(name: &str) -> Option<f64> {
    std::env::var(name).ok()?.parse().ok()
}
